#![allow(dead_code)]

use cad::losses::{one_hot, ActivityLoss, LossConfig, TmseLoss};
use cad::matching::EvalVideo;
use cad::model::{record_loss, ModelConfig, ModelParameters};
use cad::numerics::{finite_diff_check, DistanceKind, Tape, Tensor2, Var, FD_STEP};
use cad::rng::{self, CadRng};
use rand::Rng;

pub fn random(r: &mut CadRng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor2 {
    Tensor2::new(rows, cols, (0..rows * cols).map(|_| r.random_range(lo..hi)).collect()).unwrap()
}

/// Names of the cases the gradient suite cycles through.
pub const GRADIENT_CASES: [&str; 17] = [
    "matmul",
    "add_row",
    "add",
    "relu",
    "pairwise_distance",
    "pairwise_distance_squared",
    "minmax_invert_rows",
    "row_normalize",
    "sum_rows",
    "mean_rows",
    "softmax_rows",
    "contract",
    "sum_squares",
    "weighted_sum",
    "activity_loss",
    "tmse_loss",
    "total_loss",
];

/// Runs case `i` of the suite (cycling through [`GRADIENT_CASES`]) and
/// returns its name and maximal relative error.
pub fn gradient_case(i: usize) -> (&'static str, f64) {
    let name = GRADIENT_CASES[i % GRADIENT_CASES.len()];
    let mut r = rng::seeded(1000 + i as u64);
    let t = r.random_range(2..6usize);
    let n = r.random_range(2..5usize);
    let d = r.random_range(2..5usize);
    // random output weights make every tensor-valued op a scalar function
    let w = |r: &mut CadRng, rows, cols| random(r, rows, cols, -1.0, 1.0);
    let check = |f: &dyn Fn(&mut Tape, &[Var]) -> cad::Result<Var>, inputs: Vec<Tensor2>| {
        finite_diff_check(f, &inputs, FD_STEP).unwrap().max_rel_error
    };
    let err = match name {
        "matmul" => {
            let wts = w(&mut r, t, n);
            check(&|tp, v| { let m = tp.matmul(v[0], v[1])?; tp.contract(m, wts.clone()) },
                vec![random(&mut r, t, d, -1.0, 1.0), random(&mut r, d, n, -1.0, 1.0)])
        }
        "add_row" => {
            let wts = w(&mut r, t, d);
            check(&|tp, v| { let m = tp.add_row(v[0], v[1])?; tp.contract(m, wts.clone()) },
                vec![random(&mut r, t, d, -1.0, 1.0), random(&mut r, 1, d, -1.0, 1.0)])
        }
        "add" => {
            let wts = w(&mut r, t, d);
            check(&|tp, v| { let m = tp.add(v[0], v[1])?; tp.contract(m, wts.clone()) },
                vec![random(&mut r, t, d, -1.0, 1.0), random(&mut r, t, d, -1.0, 1.0)])
        }
        "relu" => {
            let wts = w(&mut r, t, d);
            // keep inputs away from the kink
            let x = random(&mut r, t, d, 0.05, 1.0).map(|v| if v > 0.5 { v } else { -v });
            check(&|tp, v| { let m = tp.relu(v[0])?; tp.contract(m, wts.clone()) }, vec![x])
        }
        "pairwise_distance" | "pairwise_distance_squared" => {
            let kind = if name.ends_with("squared") { DistanceKind::SquaredEuclidean } else { DistanceKind::Euclidean };
            let wts = w(&mut r, t, n);
            check(&|tp, v| { let m = tp.pairwise_distance(v[0], v[1], kind)?; tp.contract(m, wts.clone()) },
                vec![random(&mut r, t, d, -1.0, 1.0), random(&mut r, n, d, -1.0, 1.0)])
        }
        "minmax_invert_rows" => {
            let wts = w(&mut r, t, n);
            check(&|tp, v| { let m = tp.minmax_invert_rows(v[0])?; tp.contract(m, wts.clone()) },
                vec![random(&mut r, t, n, 0.0, 3.0)])
        }
        "row_normalize" => {
            let wts = w(&mut r, t, n);
            check(&|tp, v| { let m = tp.row_normalize(v[0])?; tp.contract(m, wts.clone()) },
                vec![random(&mut r, t, n, 0.1, 2.0)])
        }
        "sum_rows" => {
            let wts = w(&mut r, 1, d);
            check(&|tp, v| { let m = tp.sum_rows(v[0])?; tp.contract(m, wts.clone()) }, vec![random(&mut r, t, d, -1.0, 1.0)])
        }
        "mean_rows" => {
            let wts = w(&mut r, 1, d);
            check(&|tp, v| { let m = tp.mean_rows(v[0])?; tp.contract(m, wts.clone()) }, vec![random(&mut r, t, d, -1.0, 1.0)])
        }
        "softmax_rows" => {
            let wts = w(&mut r, t, n);
            check(&|tp, v| { let m = tp.softmax_rows(v[0])?; tp.contract(m, wts.clone()) }, vec![random(&mut r, t, n, -2.0, 2.0)])
        }
        "contract" => {
            let wts = w(&mut r, t, d);
            check(&|tp, v| tp.contract(v[0], wts.clone()), vec![random(&mut r, t, d, -1.0, 1.0)])
        }
        "sum_squares" => check(&|tp, v| tp.sum_squares(v[0]), vec![random(&mut r, t, d, -1.0, 1.0)]),
        "weighted_sum" => {
            let (a, b) = (r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
            check(&|tp, v| {
                let x = tp.sum_squares(v[0])?;
                let y = tp.sum_squares(v[1])?;
                tp.weighted_sum(&[(x, a), (y, b)])
            }, vec![random(&mut r, 1, d, -1.0, 1.0), random(&mut r, t, 1, -1.0, 1.0)])
        }
        "activity_loss" => {
            let c = n;
            let class = r.random_range(0..c);
            check(&|tp, v| {
                let p = tp.softmax_rows(v[0])?;
                tp.custom(p, Box::new(ActivityLoss::new(one_hot(class, c))?))
            }, vec![random(&mut r, 1, c, -2.0, 2.0)])
        }
        "tmse_loss" => check(&|tp, v| {
            let a = tp.row_normalize(v[0])?;
            tp.custom(a, Box::new(TmseLoss { tau: 4.0 }))
        }, vec![random(&mut r, t, n, 0.05, 1.0)]),
        _ => {
            let din = r.random_range(2..5usize);
            let c = r.random_range(2..4usize);
            let config = ModelConfig { embed_dim: d, ..ModelConfig::new(din, n, c) };
            let params = ModelParameters::init(config, &mut r).unwrap();
            let features = random(&mut r, t.max(2) + 2, din, -1.0, 1.0);
            let class = r.random_range(0..c);
            let loss = LossConfig::default();
            let inputs: Vec<Tensor2> = params.tensors().iter().map(|x| (*x).clone()).collect();
            check(&|tp, v| record_loss(tp, v, &config, &features, class, &loss), inputs)
        }
    };
    (name, err)
}

/// Best total weight over all injections of the smaller side into the larger.
pub fn brute_force_assignment(w: &[Vec<i64>]) -> i64 {
    let rows = w.len();
    let cols = w[0].len();
    fn go(w: &[Vec<i64>], row: usize, used: &mut Vec<bool>, transpose: bool) -> i64 {
        let (rows, cols) = if transpose { (w[0].len(), w.len()) } else { (w.len(), w[0].len()) };
        if row == rows {
            return 0;
        }
        let mut best = i64::MIN;
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                let v = if transpose { w[c][row] } else { w[row][c] };
                best = best.max(v + go(w, row + 1, used, transpose));
                used[c] = false;
            }
        }
        best
    }
    if rows <= cols {
        go(w, 0, &mut vec![false; cols], false)
    } else {
        go(w, 0, &mut vec![false; rows], true)
    }
}

/// Number of injections attaining the brute-force optimum.
pub fn optimal_assignment_count(w: &[Vec<i64>]) -> usize {
    let best = brute_force_assignment(w);
    let (rows, cols) = (w.len(), w[0].len());
    let transpose = rows > cols;
    let (a, b) = if transpose { (cols, rows) } else { (rows, cols) };
    let at = |i: usize, j: usize| if transpose { w[j][i] } else { w[i][j] };
    fn count(a: usize, b: usize, row: usize, acc: i64, best: i64, used: &mut Vec<bool>, at: &dyn Fn(usize, usize) -> i64) -> usize {
        if row == a {
            return usize::from(acc == best);
        }
        let mut n = 0;
        for c in 0..b {
            if !used[c] {
                used[c] = true;
                n += count(a, b, row + 1, acc + at(row, c), best, used, at);
                used[c] = false;
            }
        }
        n
    }
    count(a, b, 0, 0, best, &mut vec![false; b], &at)
}

/// A random corpus of predictions and ground truth for matching properties.
pub fn random_eval_corpus(r: &mut CadRng) -> Vec<EvalVideo> {
    let videos = r.random_range(1..8usize);
    let clusters = r.random_range(1..7usize);
    let actions = r.random_range(1..6usize);
    (0..videos)
        .map(|i| {
            let t = r.random_range(1..30usize);
            EvalVideo {
                id: format!("v{i}"),
                activity: r.random_range(0..3usize),
                pred: (0..t).map(|_| Some(r.random_range(0..clusters))).collect(),
                gt: (0..t).map(|_| (r.random::<f64>() > 0.05).then(|| r.random_range(0..actions))).collect(),
            }
        })
        .collect()
}
