//! Forward definitions of the primitives used by the model.
//!
//! Each function here is pure. The tape in [`super::tape`] records the same
//! functions and adds their adjoints.

use serde::{Deserialize, Serialize};

use super::tensor::{argmax, argmin, Tensor2};
use crate::error::{CadError, Result};

/// Added under the square root so the distance gradient stays finite at
/// coincident points.
pub const DISTANCE_EPS: f64 = 1e-12;

/// Frame-to-prototype distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// `sqrt(eps + |f - p|^2)`
    #[default]
    Euclidean,
    /// `|f - p|^2`
    SquaredEuclidean,
}

pub fn matmul(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    if a.cols() != b.rows() {
        return Err(CadError::shape(
            "matmul",
            format!("{:?} x {:?}", a.shape(), b.shape()),
        ));
    }
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; n * m];
    let bv = b.values();
    for i in 0..n {
        let arow = a.row(i);
        let orow = &mut out[i * m..(i + 1) * m];
        for (p, &aip) in arow.iter().enumerate().take(k) {
            if aip == 0.0 {
                continue;
            }
            let brow = &bv[p * m..(p + 1) * m];
            for (o, &bpj) in orow.iter_mut().zip(brow) {
                *o += aip * bpj;
            }
        }
    }
    Tensor2::new(n, m, out)
}

/// `a^T b` without materializing the transpose.
pub(crate) fn matmul_tn(a: &Tensor2, b: &Tensor2) -> Tensor2 {
    debug_assert_eq!(a.rows(), b.rows());
    let (k, n, m) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; n * m];
    for p in 0..k {
        let arow = a.row(p);
        let brow = b.row(p);
        for (i, &api) in arow.iter().enumerate() {
            if api == 0.0 {
                continue;
            }
            let orow = &mut out[i * m..(i + 1) * m];
            for (o, &bpj) in orow.iter_mut().zip(brow) {
                *o += api * bpj;
            }
        }
    }
    Tensor2::new(n, m, out).expect("shape computed above")
}

/// `a b^T` without materializing the transpose.
pub(crate) fn matmul_nt(a: &Tensor2, b: &Tensor2) -> Tensor2 {
    debug_assert_eq!(a.cols(), b.cols());
    let (n, m) = (a.rows(), b.rows());
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let arow = a.row(i);
        for j in 0..m {
            out[i * m + j] = dot(arow, b.row(j));
        }
    }
    Tensor2::new(n, m, out).expect("shape computed above")
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Adds a `1 x cols` bias to every row.
pub fn add_row(x: &Tensor2, bias: &Tensor2) -> Result<Tensor2> {
    if bias.rows() != 1 || bias.cols() != x.cols() {
        return Err(CadError::shape(
            "add_row",
            format!("{:?} + {:?}", x.shape(), bias.shape()),
        ));
    }
    let mut out = x.clone();
    for r in 0..out.rows() {
        for (o, b) in out.row_mut(r).iter_mut().zip(bias.values()) {
            *o += b;
        }
    }
    Ok(out)
}

pub fn add(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    if a.shape() != b.shape() {
        return Err(CadError::shape(
            "add",
            format!("{:?} + {:?}", a.shape(), b.shape()),
        ));
    }
    let mut out = a.clone();
    out.add_scaled(b, 1.0);
    Ok(out)
}

pub fn relu(x: &Tensor2) -> Tensor2 {
    x.map(|v| v.max(0.0))
}

/// Distance between every frame row of `f` and every prototype row of `p`.
pub fn pairwise_distance(f: &Tensor2, p: &Tensor2, kind: DistanceKind) -> Result<Tensor2> {
    if f.cols() != p.cols() {
        return Err(CadError::shape(
            "pairwise_distance",
            format!("frames have {} dims, prototypes {}", f.cols(), p.cols()),
        ));
    }
    if f.rows() == 0 || p.rows() == 0 {
        return Err(CadError::InvalidInput(
            "pairwise_distance needs at least one frame and one prototype".into(),
        ));
    }
    let (t, n) = (f.rows(), p.rows());
    let mut out = Vec::with_capacity(t * n);
    for fr in f.iter_rows() {
        for pr in p.iter_rows() {
            let sq: f64 = fr.iter().zip(pr).map(|(a, b)| (a - b) * (a - b)).sum();
            out.push(match kind {
                DistanceKind::Euclidean => (DISTANCE_EPS + sq).sqrt(),
                DistanceKind::SquaredEuclidean => sq,
            });
        }
    }
    Tensor2::new(t, n, out)
}

/// Per-row selectors chosen by [`minmax_invert_rows`]: `(argmin, argmax)`,
/// lowest index on ties.
pub(crate) fn row_selectors(d: &Tensor2) -> (Vec<usize>, Vec<usize>) {
    d.iter_rows().map(|r| (argmin(r), argmax(r))).unzip()
}

/// `1 - (d - min) / (max - min)` per row. A constant row maps to all ones,
/// which normalizes to a uniform affinity row.
pub fn minmax_invert_rows(d: &Tensor2) -> Tensor2 {
    let mut out = d.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let lo = row[argmin(row)];
        let hi = row[argmax(row)];
        let range = hi - lo;
        if range > 0.0 {
            for v in row.iter_mut() {
                *v = 1.0 - (*v - lo) / range;
            }
        } else {
            row.fill(1.0);
        }
    }
    out
}

/// Divides every row by its sum.
pub fn row_normalize(d: &Tensor2) -> Result<Tensor2> {
    let mut out = d.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        if row.iter().any(|&v| v < 0.0) {
            return Err(CadError::InvalidInput(format!(
                "row_normalize: negative entry in row {r}"
            )));
        }
        let s: f64 = row.iter().sum();
        if s <= 0.0 || !s.is_finite() {
            return Err(CadError::InvalidInput(format!(
                "row_normalize: row {r} sums to {s}"
            )));
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    Ok(out)
}

/// Column sums as a `1 x cols` row.
pub fn sum_rows(x: &Tensor2) -> Tensor2 {
    let mut acc = vec![0.0; x.cols()];
    for r in x.iter_rows() {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    Tensor2::row_vector(acc)
}

/// Column means as a `1 x cols` row.
pub fn mean_rows(x: &Tensor2) -> Tensor2 {
    let t = x.rows().max(1) as f64;
    sum_rows(x).scale(1.0 / t)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Tensor2) -> Tensor2 {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    out
}
