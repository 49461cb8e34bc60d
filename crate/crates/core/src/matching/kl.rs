use serde::{Deserialize, Serialize};

use crate::error::{CadError, Result};

/// Added to every bin before renormalizing, so empty bins stay finite.
pub const KL_EPS: f64 = 1e-8;

pub fn smoothed(p: &[f64]) -> Vec<f64> {
    let s: f64 = p.iter().map(|v| v + KL_EPS).sum();
    p.iter().map(|v| (v + KL_EPS) / s).collect()
}

/// `D(p || q)` in nats, both sides smoothed first.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(CadError::InvalidInput(format!("distributions of length {} and {}", p.len(), q.len())));
    }
    if p.iter().chain(q).any(|v| !(*v >= 0.0)) {
        return Err(CadError::InvalidInput("distributions must be non-negative".into()));
    }
    let (p, q) = (smoothed(p), smoothed(q));
    Ok(p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum::<f64>().max(0.0))
}

/// Divergence between the predicted and true frame distributions over
/// `actions`. `pred` holds matched actions per frame; predictions outside
/// `actions` and frames without ground truth are ignored.
pub fn kl_action_distribution(
    videos: &[(&[Option<usize>], &[Option<usize>])],
    actions: &[usize],
) -> Result<f64> {
    let mut p = vec![0.0; actions.len()];
    let mut q = vec![0.0; actions.len()];
    for (pred, gt) in videos {
        if pred.len() != gt.len() {
            return Err(CadError::InvalidInput(format!("{} vs {} frames", pred.len(), gt.len())));
        }
        for (a, g) in pred.iter().zip(gt.iter()) {
            let Some(g) = g else { continue };
            if let Some(j) = actions.iter().position(|x| x == g) {
                q[j] += 1.0;
            }
            if let Some(j) = a.and_then(|a| actions.iter().position(|&x| x == a)) {
                p[j] += 1.0;
            }
        }
    }
    let norm = |v: &mut Vec<f64>| {
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
        }
    };
    norm(&mut p);
    norm(&mut q);
    kl_divergence(&p, &q)
}

/// Per-activity frame distribution over `prototypes` pooled from
/// `labelings` (`(activity, labels)` pairs).
pub fn prototype_distributions(labelings: &[(usize, &[usize])], classes: usize, prototypes: usize) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; prototypes]; classes];
    for (a, labels) in labelings {
        for &l in labels.iter() {
            d[*a][l] += 1.0;
        }
    }
    for row in d.iter_mut() {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|x| *x /= s);
        }
    }
    d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlMatrix {
    /// `directed[i][j] = D(p_i || p_j)`.
    pub directed: Vec<Vec<f64>>,
    /// `(D(p_i || p_j) + D(p_j || p_i)) / 2`.
    pub symmetric: Vec<Vec<f64>>,
}

pub fn kl_prototype_sharing(distributions: &[Vec<f64>]) -> Result<KlMatrix> {
    let c = distributions.len();
    let mut directed = vec![vec![0.0; c]; c];
    for i in 0..c {
        for j in 0..c {
            if i != j {
                directed[i][j] = kl_divergence(&distributions[i], &distributions[j])?;
            }
        }
    }
    let symmetric = (0..c)
        .map(|i| (0..c).map(|j| 0.5 * (directed[i][j] + directed[j][i])).collect())
        .collect();
    Ok(KlMatrix { directed, symmetric })
}
