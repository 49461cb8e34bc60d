use super::tape::{Tape, Var};
use super::tensor::Tensor2;
use crate::error::{CadError, Result};

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Outcome of a finite-difference comparison.
#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Max over all coordinates of `|analytic - numeric| / max(1, |numeric|)`.
    pub max_rel_error: f64,
    /// `(input index, flat coordinate)` where the max was attained.
    pub worst: Option<(usize, usize)>,
    pub coordinates: usize,
}

/// Compares tape gradients of a scalar function against central differences.
///
/// `f` must build a `1 x 1` node from the leaves it is handed, using only
/// tape primitives.
pub fn finite_diff_check<F>(f: F, inputs: &[Tensor2], h: f64) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let leaves: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
    let out = f(&mut tape, &leaves)?;
    let value = tape.scalar(out);
    if !value.is_finite() {
        return Err(CadError::NonFinite(format!("forward value {value}")));
    }
    let grads = tape.backward(out)?;
    let analytic: Vec<Tensor2> = leaves.iter().map(|&v| grads.wrt(v)).collect();

    let eval = |perturbed: &[Tensor2]| -> Result<f64> {
        let mut tape = Tape::new();
        let leaves: Vec<Var> = perturbed.iter().map(|x| tape.leaf(x.clone())).collect();
        let out = f(&mut tape, &leaves)?;
        let v = tape.scalar(out);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CadError::NonFinite(format!("perturbed forward value {v}")))
        }
    };

    let mut work: Vec<Tensor2> = inputs.to_vec();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    for i in 0..inputs.len() {
        for k in 0..inputs[i].values().len() {
            let orig = inputs[i].values()[k];
            work[i].values_mut()[k] = orig + h;
            let plus = eval(&work)?;
            work[i].values_mut()[k] = orig - h;
            let minus = eval(&work)?;
            work[i].values_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let err = (analytic[i].values()[k] - numeric).abs() / numeric.abs().max(1.0);
            report.coordinates += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((i, k));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares() {
        let x = Tensor2::row_vector(vec![1.0, 2.0, 3.0]);
        let mut tape = Tape::new();
        let v = tape.leaf(x.clone());
        let out = tape.sum_squares(v).unwrap();
        let g = tape.backward(out).unwrap().wrt(v);
        assert_eq!(g.values(), &[2.0, 4.0, 6.0]);

        let r = finite_diff_check(|tape, v| tape.sum_squares(v[0]), &[x], FD_STEP).unwrap();
        assert!(r.max_rel_error <= 1e-6, "{r:?}");
        assert_eq!(r.coordinates, 3);
    }

    #[test]
    fn constant_function_has_zero_error() {
        let x = Tensor2::row_vector(vec![0.3, -0.2]);
        let r = finite_diff_check(
            |tape, _v| Ok(tape.constant(Tensor2::filled(1, 1, 7.0))),
            &[x],
            FD_STEP,
        )
        .unwrap();
        assert_eq!(r.max_rel_error, 0.0);
    }
}
