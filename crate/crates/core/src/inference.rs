//! Frame labeling from affinity matrices.
//!
//! Global mode labels every frame with its most similar prototype. Activity
//! mode keeps the `N'` prototypes an activity uses most, optionally smooths
//! the reduced affinities over time and decodes them along the activity's
//! prototype ordering. Prototype indices are 0-based throughout; columns of
//! a reduced matrix refer to positions in the kept list.

use serde::{Deserialize, Serialize};

use crate::error::{CadError, Result};
use crate::numerics::{argmax, Tensor2};

/// Floor applied before taking logs of affinities during decoding.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Labeling {
    pub labels: Vec<usize>,
    /// `true` marks a background frame.
    pub background: Option<Vec<bool>>,
}

impl Labeling {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels, background: None }
    }

    pub fn frames(&self) -> usize {
        self.labels.len()
    }

    pub fn is_background(&self, t: usize) -> bool {
        self.background.as_ref().is_some_and(|m| m[t])
    }

    /// Label per frame with background frames as `None`.
    pub fn masked(&self) -> Vec<Option<usize>> {
        (0..self.frames())
            .map(|t| (!self.is_background(t)).then_some(self.labels[t]))
            .collect()
    }

    pub fn transitions(&self) -> usize {
        self.labels.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

pub fn naive_labels(a: &Tensor2) -> Labeling {
    Labeling::new(a.argmax_rows())
}

fn check_nprime(nprime: usize, n: usize) -> Result<()> {
    if nprime == 0 || nprime > n {
        return Err(CadError::InvalidInput(format!("N' = {nprime} must be in 1..={n}")));
    }
    Ok(())
}

/// The `nprime` prototypes most often chosen by naive labeling across
/// `affinities`, in decreasing frequency (ties to the lower index).
pub fn top_prototypes(affinities: &[&Tensor2], nprime: usize) -> Result<Vec<usize>> {
    let n = affinities
        .first()
        .map(|a| a.cols())
        .ok_or_else(|| CadError::InvalidInput("no videos to reduce".into()))?;
    check_nprime(nprime, n)?;
    let mut counts = vec![0usize; n];
    for a in affinities {
        if a.cols() != n {
            return Err(CadError::shape("activity_reduce", format!("{} prototypes vs {n}", a.cols())));
        }
        for l in a.argmax_rows() {
            counts[l] += 1;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| counts[y].cmp(&counts[x]).then(x.cmp(&y)));
    order.truncate(nprime);
    Ok(order)
}

/// Keeps the `kept` columns and renormalizes each row. A row with no mass on
/// the kept columns becomes uniform.
pub fn reduce_columns(a: &Tensor2, kept: &[usize]) -> Tensor2 {
    let mut out = a.select_columns(kept);
    let k = kept.len() as f64;
    for t in 0..out.rows() {
        let row = out.row_mut(t);
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.iter_mut().for_each(|v| *v = 1.0 / k);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActivityReduction {
    pub kept: Vec<usize>,
    pub matrices: Vec<Tensor2>,
}

pub fn activity_reduce(affinities: &[&Tensor2], nprime: usize) -> Result<ActivityReduction> {
    let kept = top_prototypes(affinities, nprime)?;
    let matrices = affinities.iter().map(|a| reduce_columns(a, &kept)).collect();
    Ok(ActivityReduction { kept, matrices })
}

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Half-sample symmetric reflection: `... 1 0 | 0 1 ... T-1 | T-1 T-2 ...`.
fn reflect(i: isize, t: usize) -> usize {
    let period = 2 * t as isize;
    let m = i.rem_euclid(period) as usize;
    if m < t {
        m
    } else {
        2 * t - 1 - m
    }
}

/// Convolves every column with a Gaussian along time. With symmetric
/// reflection every input frame spreads exactly its own mass, so column sums
/// are preserved.
pub fn gaussian_smooth(a: &Tensor2, sigma: f64) -> Result<Tensor2> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(CadError::InvalidInput(format!("sigma {sigma} must be > 0")));
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let (t_len, n) = a.shape();
    let mut out = Tensor2::zeros(t_len, n);
    for t in 0..t_len {
        let row = out.row_mut(t);
        for (j, w) in kernel.iter().enumerate() {
            let src = reflect(t as isize + j as isize - r, t_len);
            for (o, &v) in row.iter_mut().zip(a.row(src)) {
                *o += w * v;
            }
        }
    }
    Ok(out)
}

/// Orders columns by the mean normalized timestamp `t / T` of the frames
/// assigned to them across all `labelings`. Columns with no frames go last.
/// Each labeling holds column indices below `columns`.
pub fn action_ordering(labelings: &[Vec<usize>], columns: usize) -> Vec<usize> {
    let mut sum = vec![0.0; columns];
    let mut count = vec![0usize; columns];
    for labels in labelings {
        let t_len = labels.len() as f64;
        for (t, &l) in labels.iter().enumerate() {
            sum[l] += t as f64 / t_len;
            count[l] += 1;
        }
    }
    let key = |c: usize| (count[c] == 0, if count[c] == 0 { 0.0 } else { sum[c] / count[c] as f64 });
    let mut order: Vec<usize> = (0..columns).collect();
    order.sort_by(|&x, &y| {
        let (ex, mx) = key(x);
        let (ey, my) = key(y);
        ex.cmp(&ey).then(mx.total_cmp(&my)).then(x.cmp(&y))
    });
    order
}

/// Log-likelihood of a column path under the uniform-prior frame model.
pub fn path_score(a: &Tensor2, path: &[usize]) -> f64 {
    let prior = -(1.0 / a.cols() as f64).ln();
    path.iter()
        .enumerate()
        .map(|(t, &c)| a.get(t, c).max(LOG_FLOOR).ln() + prior)
        .sum()
}

/// Best path that starts at `order[0]` and at every frame either keeps its
/// element of `order` or moves to the next one. The path need not reach the
/// end of `order`. Ties prefer staying, then the earlier element.
pub fn viterbi_decode(a: &Tensor2, order: &[usize]) -> Result<Vec<usize>> {
    if order.is_empty() {
        return Err(CadError::InvalidInput("empty ordering".into()));
    }
    if let Some(&c) = order.iter().find(|&&c| c >= a.cols()) {
        return Err(CadError::InvalidInput(format!("ordering column {c} out of {}", a.cols())));
    }
    let (t_len, k) = (a.rows(), order.len());
    if t_len == 0 {
        return Ok(Vec::new());
    }
    let ll = |t: usize, j: usize| a.get(t, order[j]).max(LOG_FLOOR).ln();
    let mut score = vec![f64::NEG_INFINITY; k];
    let mut advanced = vec![false; t_len * k];
    score[0] = ll(0, 0);
    for t in 1..t_len {
        let mut next = vec![f64::NEG_INFINITY; k];
        for j in 0..k.min(t + 1) {
            let stay = score[j];
            let adv = if j > 0 { score[j - 1] } else { f64::NEG_INFINITY };
            let (best, from_prev) = if adv > stay { (adv, true) } else { (stay, false) };
            next[j] = best + ll(t, j);
            advanced[t * k + j] = from_prev;
        }
        score = next;
    }
    let mut j = 0;
    for i in 1..k {
        if score[i] > score[j] {
            j = i;
        }
    }
    let mut path = vec![0; t_len];
    for t in (0..t_len).rev() {
        path[t] = order[j];
        if t > 0 && advanced[t * k + j] {
            j -= 1;
        }
    }
    Ok(path)
}

/// Per prototype, keeps the `ceil((1 - eta) * count)` frames with the highest
/// affinity among those naively assigned to it and marks the rest as
/// background. Equal affinities keep the earlier frame.
pub fn background_mask(a: &Tensor2, eta: f64) -> Result<Vec<bool>> {
    if !(0.0..1.0).contains(&eta) {
        return Err(CadError::InvalidInput(format!("eta {eta} must be in [0, 1)")));
    }
    let labels = a.argmax_rows();
    let mut mask = vec![false; labels.len()];
    for p in 0..a.cols() {
        let mut frames: Vec<usize> = (0..labels.len()).filter(|&t| labels[t] == p).collect();
        let keep = ((1.0 - eta) * frames.len() as f64 - 1e-9).ceil().max(0.0) as usize;
        frames.sort_by(|&x, &y| a.get(y, p).total_cmp(&a.get(x, p)).then(x.cmp(&y)));
        for &t in &frames[keep.min(frames.len())..] {
            mask[t] = true;
        }
    }
    Ok(mask)
}

/// `argmax_c (wp * yp_c + wg * yg_c)`.
pub fn recognize_activity(yp: &[f64], yg: &[f64], wp: f64, wg: f64) -> Result<usize> {
    if yp.len() != yg.len() || yp.is_empty() {
        return Err(CadError::shape("recognize_activity", format!("{} vs {}", yp.len(), yg.len())));
    }
    if !(wp >= 0.0 && wg >= 0.0) || wp + wg == 0.0 {
        return Err(CadError::InvalidInput(format!("weights ({wp}, {wg}) must be >= 0, not both 0")));
    }
    let mix: Vec<f64> = yp.iter().zip(yg).map(|(p, g)| wp * p + wg * g).collect();
    Ok(argmax(&mix))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentMode {
    Global,
    #[default]
    Activity,
}

/// How many prototypes an activity keeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NPrime {
    Fixed(usize),
    /// The number of distinct ground-truth actions in the activity's videos.
    #[default]
    PerActivityGt,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferConfig {
    pub mode: SegmentMode,
    pub sigma: f64,
    pub smooth: bool,
    pub decode: bool,
    pub nprime: NPrime,
    pub eta: f64,
    pub wp: f64,
    pub wg: f64,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self {
            mode: SegmentMode::Activity,
            sigma: 5.0,
            smooth: true,
            decode: true,
            nprime: NPrime::PerActivityGt,
            eta: 0.0,
            wp: 0.5,
            wg: 0.5,
        }
    }
}

impl InferConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CadError::Config(m));
        if self.smooth && !(self.sigma > 0.0) {
            return bad(format!("sigma {} must be > 0", self.sigma));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return bad(format!("eta {} must be in [0, 1)", self.eta));
        }
        if !(self.wp >= 0.0 && self.wg >= 0.0) || self.wp + self.wg == 0.0 {
            return bad(format!("wp {} / wg {} must be >= 0, not both 0", self.wp, self.wg));
        }
        if self.nprime == NPrime::Fixed(0) {
            return bad("nprime must be >= 1".into());
        }
        Ok(())
    }
}

/// A video's affinities together with what activity mode needs to group it.
#[derive(Clone, Copy, Debug)]
pub struct VideoAffinity<'a> {
    pub activity: usize,
    pub affinity: &'a Tensor2,
    pub gt: Option<&'a [Option<usize>]>,
}

/// What activity mode chose for one activity.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivityPlan {
    pub activity: usize,
    pub kept: Vec<usize>,
    /// Prototype indices in decoding order.
    pub ordering: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segmentation {
    pub labelings: Vec<Labeling>,
    pub plans: Vec<ActivityPlan>,
}

pub fn segment_videos(videos: &[VideoAffinity<'_>], cfg: &InferConfig) -> Result<Segmentation> {
    cfg.validate()?;
    let mut labelings: Vec<Labeling> = videos.iter().map(|v| naive_labels(v.affinity)).collect();
    let mut plans = Vec::new();
    if cfg.mode == SegmentMode::Activity {
        let classes = videos.iter().map(|v| v.activity + 1).max().unwrap_or(0);
        for c in 0..classes {
            let members: Vec<usize> = (0..videos.len()).filter(|&i| videos[i].activity == c).collect();
            if members.is_empty() {
                continue;
            }
            let n = videos[members[0]].affinity.cols();
            let nprime = match cfg.nprime {
                NPrime::Fixed(k) => k.min(n),
                NPrime::PerActivityGt => {
                    let mut seen = std::collections::BTreeSet::new();
                    for &i in &members {
                        let gt = videos[i].gt.ok_or_else(|| {
                            CadError::Config("nprime per_activity_gt needs ground truth for every video".into())
                        })?;
                        seen.extend(gt.iter().flatten().copied());
                    }
                    seen.len().clamp(1, n)
                }
            };
            let mats: Vec<&Tensor2> = members.iter().map(|&i| videos[i].affinity).collect();
            let red = activity_reduce(&mats, nprime)?;
            let prepared: Vec<Tensor2> = if cfg.smooth {
                red.matrices
                    .iter()
                    .map(|m| gaussian_smooth(m, cfg.sigma))
                    .collect::<Result<_>>()?
            } else {
                red.matrices
            };
            let naive: Vec<Vec<usize>> = prepared.iter().map(|m| m.argmax_rows()).collect();
            let order = action_ordering(&naive, red.kept.len());
            for (slot, &i) in members.iter().enumerate() {
                let cols = if cfg.decode {
                    viterbi_decode(&prepared[slot], &order)?
                } else {
                    naive[slot].clone()
                };
                labelings[i].labels = cols.into_iter().map(|c| red.kept[c]).collect();
            }
            plans.push(ActivityPlan {
                activity: c,
                ordering: order.iter().map(|&j| red.kept[j]).collect(),
                kept: red.kept,
            });
        }
    }
    if cfg.eta > 0.0 {
        for (lab, v) in labelings.iter_mut().zip(videos) {
            lab.background = Some(background_mask(v.affinity, cfg.eta)?);
        }
    }
    Ok(Segmentation { labelings, plans })
}
