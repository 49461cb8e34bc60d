//! Video-level activity classification loss, the truncated temporal
//! smoothing loss and their weighted combination.

use serde::{Deserialize, Serialize};

use crate::error::{CadError, Result};
use crate::numerics::{Primitive, Tensor2};

pub const PROB_CLAMP: f64 = 1e-7;
pub const AFFINITY_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Weight of the prototype-representation head; the visual head gets `1 - alpha`.
    pub alpha: f64,
    /// Weight of the smoothing term.
    pub lambda: f64,
    /// Truncation threshold on log-affinity differences.
    pub tau: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            lambda: 0.15,
            tau: 4.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(CadError::Config(format!("alpha {} not in [0,1]", self.alpha)));
        }
        if !(self.lambda >= 0.0) {
            return Err(CadError::Config(format!("lambda {} must be >= 0", self.lambda)));
        }
        if !(self.tau > 0.0) {
            return Err(CadError::Config(format!("tau {} must be > 0", self.tau)));
        }
        Ok(())
    }
}

/// One-hot encoding of `class` over `classes` entries.
pub fn one_hot(class: usize, classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    v[class] = 1.0;
    v
}

fn check_one_hot(y: &[f64]) -> Result<()> {
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    let zeros = y.iter().filter(|&&v| v == 0.0).count();
    if ones != 1 || ones + zeros != y.len() {
        return Err(CadError::InvalidInput("target is not one-hot".into()));
    }
    Ok(())
}

/// `-sum_j [y_j log p_j + (1 - y_j) log(1 - p_j)]` with `p` clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn activity_loss(yhat: &[f64], y: &[f64]) -> Result<f64> {
    if yhat.len() != y.len() {
        return Err(CadError::shape(
            "activity_loss",
            format!("{} probabilities, {} targets", yhat.len(), y.len()),
        ));
    }
    check_one_hot(y)?;
    Ok(bce_value(yhat, y))
}

fn bce_value(yhat: &[f64], y: &[f64]) -> f64 {
    yhat.iter()
        .zip(y)
        .map(|(&p, &t)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum()
}

/// Tape primitive for [`activity_loss`] on a `1 x C` probability row.
pub struct ActivityLoss {
    target: Vec<f64>,
}

impl ActivityLoss {
    pub fn new(target: Vec<f64>) -> Result<Self> {
        check_one_hot(&target)?;
        Ok(Self { target })
    }
}

impl Primitive for ActivityLoss {
    fn name(&self) -> &'static str {
        "activity_loss"
    }

    fn forward(&self, input: &Tensor2) -> Result<Tensor2> {
        if input.shape() != (1, self.target.len()) {
            return Err(CadError::shape(
                "activity_loss",
                format!("expected 1x{}, got {:?}", self.target.len(), input.shape()),
            ));
        }
        Ok(Tensor2::filled(1, 1, bce_value(input.values(), &self.target)))
    }

    fn backward(&self, input: &Tensor2, _output: &Tensor2, grad_out: &Tensor2) -> Tensor2 {
        let g = grad_out.values()[0];
        let grads = input
            .values()
            .iter()
            .zip(&self.target)
            .map(|(&p, &t)| {
                if p < PROB_CLAMP || p > 1.0 - PROB_CLAMP {
                    0.0
                } else {
                    g * (-t / p + (1.0 - t) / (1.0 - p))
                }
            })
            .collect();
        Tensor2::row_vector(grads)
    }
}

/// Value of the truncated smoothing loss. The flag is set when the input has
/// fewer than two frames, in which case the loss is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TmseValue {
    pub loss: f64,
    pub too_short: bool,
}

/// `(1 / TN) sum_{t,n} min(|log A_tn - log A_{t-1,n}|, tau)^2`.
pub fn tmse_loss(a: &Tensor2, tau: f64) -> TmseValue {
    let (t, n) = a.shape();
    if t < 2 {
        return TmseValue {
            loss: 0.0,
            too_short: true,
        };
    }
    let mut s = 0.0;
    for r in 1..t {
        for (cur, prev) in a.row(r).iter().zip(a.row(r - 1)) {
            let delta = (floor_ln(*cur) - floor_ln(*prev)).abs().min(tau);
            s += delta * delta;
        }
    }
    TmseValue {
        loss: s / (t * n) as f64,
        too_short: false,
    }
}

fn floor_ln(v: f64) -> f64 {
    v.max(AFFINITY_FLOOR).ln()
}

/// Tape primitive for [`tmse_loss`]. Truncated entries (`delta >= tau`) and
/// floored affinities pass no gradient.
pub struct TmseLoss {
    pub tau: f64,
}

impl Primitive for TmseLoss {
    fn name(&self) -> &'static str {
        "tmse_loss"
    }

    fn forward(&self, input: &Tensor2) -> Result<Tensor2> {
        Ok(Tensor2::filled(1, 1, tmse_loss(input, self.tau).loss))
    }

    fn backward(&self, input: &Tensor2, _output: &Tensor2, grad_out: &Tensor2) -> Tensor2 {
        let (t, n) = input.shape();
        let mut g = Tensor2::zeros(t, n);
        if t < 2 {
            return g;
        }
        let scale = grad_out.values()[0] / (t * n) as f64;
        for r in 1..t {
            for c in 0..n {
                let (cur, prev) = (input.get(r, c), input.get(r - 1, c));
                let diff = floor_ln(cur) - floor_ln(prev);
                if diff.abs() >= self.tau {
                    continue;
                }
                // d(diff^2) = 2 diff (dlog cur - dlog prev)
                let k = 2.0 * diff * scale;
                if cur > AFFINITY_FLOOR {
                    g.values_mut()[r * n + c] += k / cur;
                }
                if prev > AFFINITY_FLOOR {
                    g.values_mut()[(r - 1) * n + c] -= k / prev;
                }
            }
        }
        g
    }
}

/// `alpha * lp + (1 - alpha) * lg + lambda * ls`.
pub fn total_loss(lp: f64, lg: f64, ls: f64, cfg: &LossConfig) -> f64 {
    cfg.alpha * lp + (1.0 - cfg.alpha) * lg + cfg.lambda * ls
}

/// Term weights of [`total_loss`] in `(prototype, visual, smoothing)` order.
pub fn loss_weights(cfg: &LossConfig) -> [f64; 3] {
    [cfg.alpha, 1.0 - cfg.alpha, cfg.lambda]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check, Tape, FD_STEP};

    #[test]
    fn bce_uniform_two_class() {
        let l = activity_loss(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((l - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((l - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn bce_perfect_prediction_limit() {
        let l = activity_loss(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        // both terms clamp at 1e-7: 2 * -ln(1 - 1e-7)
        assert!(l < 1e-6, "{l}");
    }

    #[test]
    fn bce_rejects_non_one_hot() {
        assert!(activity_loss(&[0.5, 0.5], &[0.5, 0.5]).is_err());
        assert!(activity_loss(&[0.5, 0.5], &[1.0, 1.0]).is_err());
        assert!(ActivityLoss::new(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn bce_decreases_as_true_class_gains() {
        let mut last = f64::INFINITY;
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let rest = (1.0 - p) / 2.0;
            let l = activity_loss(&[p, rest, rest], &[1.0, 0.0, 0.0]).unwrap();
            assert!(l >= 0.0);
            assert!(l < last);
            last = l;
        }
    }

    #[test]
    fn tmse_examples() {
        let constant = Tensor2::from_rows(&[[0.2, 0.8], [0.2, 0.8], [0.2, 0.8]]);
        assert_eq!(tmse_loss(&constant, 4.0).loss, 0.0);

        let col = Tensor2::from_rows(&[[1.0], [5.0f64.exp()]]);
        let v = tmse_loss(&col, 4.0);
        assert!((v.loss - 8.0).abs() < 1e-12);
        assert!(!v.too_short);

        let short = tmse_loss(&Tensor2::filled(1, 3, 1.0 / 3.0), 4.0);
        assert_eq!(short.loss, 0.0);
        assert!(short.too_short);
    }

    #[test]
    fn tmse_time_reversal() {
        let a = Tensor2::from_rows(&[[0.1, 0.9], [0.5, 0.5], [0.7, 0.3], [0.05, 0.95]]);
        let rev = a.select_rows(&[3, 2, 1, 0]);
        assert!((tmse_loss(&a, 4.0).loss - tmse_loss(&rev, 4.0).loss).abs() < 1e-15);
    }

    #[test]
    fn truncated_entries_have_zero_gradient() {
        let col = Tensor2::from_rows(&[[1.0], [5.0f64.exp()]]);
        let g = TmseLoss { tau: 4.0 }.backward(&col, &Tensor2::zeros(1, 1), &Tensor2::filled(1, 1, 1.0));
        assert_eq!(g.values(), &[0.0, 0.0]);
    }

    #[test]
    fn total_loss_examples() {
        let cfg = LossConfig::default();
        assert!((total_loss(2.0, 4.0, 1.0, &cfg) - 3.15).abs() < 1e-12);
        let only_p = LossConfig {
            alpha: 1.0,
            lambda: 0.0,
            tau: 4.0,
        };
        assert_eq!(total_loss(2.0, 4.0, 1.0, &only_p), 2.0);
    }

    #[test]
    fn defaults() {
        let cfg = LossConfig::default();
        assert_eq!((cfg.alpha, cfg.lambda, cfg.tau), (0.5, 0.15, 4.0));
    }

    #[test]
    fn loss_primitives_pass_gradient_check() {
        let probs = Tensor2::row_vector(vec![0.2, 0.5, 0.3]);
        let r = finite_diff_check(
            |tape: &mut Tape, v| tape.custom(v[0], Box::new(ActivityLoss::new(one_hot(1, 3))?)),
            &[probs],
            FD_STEP,
        )
        .unwrap();
        assert!(r.max_rel_error <= 1e-6, "{r:?}");

        let a = Tensor2::from_rows(&[[0.1, 0.9], [0.5, 0.5], [0.7, 0.3], [0.2, 0.8]]);
        let r = finite_diff_check(
            |tape: &mut Tape, v| tape.custom(v[0], Box::new(TmseLoss { tau: 4.0 })),
            &[a],
            FD_STEP,
        )
        .unwrap();
        assert!(r.max_rel_error <= 1e-6, "{r:?}");
    }

    #[test]
    fn weighted_sum_matches_total_loss() {
        let cfg = LossConfig::default();
        let mut tape = Tape::new();
        let lp = tape.leaf(Tensor2::filled(1, 1, 2.0));
        let lg = tape.leaf(Tensor2::filled(1, 1, 4.0));
        let ls = tape.leaf(Tensor2::filled(1, 1, 1.0));
        let w = loss_weights(&cfg);
        let out = tape.weighted_sum(&[(lp, w[0]), (lg, w[1]), (ls, w[2])]).unwrap();
        assert!((tape.scalar(out) - total_loss(2.0, 4.0, 1.0, &cfg)).abs() < 1e-15);
        let g = tape.backward(out).unwrap();
        assert_eq!(g.wrt(lp).values(), &[0.5]);
        assert_eq!(g.wrt(lg).values(), &[0.5]);
        assert_eq!(g.wrt(ls).values(), &[0.15]);
    }
}
