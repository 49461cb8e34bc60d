//! The prototype network: per-frame embedding, frame-to-prototype affinities,
//! latent reconstruction from prototypes, the two video representations and
//! their activity heads.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CadError, Result};
use crate::losses::{loss_weights, one_hot, ActivityLoss, LossConfig, TmseLoss};
use crate::numerics::{self, ops, DistanceKind, Gradients, Tape, Tensor2, Var};

/// Nonlinearity between the two maps of the latent network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Raw feature dimension.
    pub input_dim: usize,
    /// Embedding dimension.
    pub embed_dim: usize,
    /// Number of prototypes.
    pub prototypes: usize,
    /// Number of complex activities.
    pub classes: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub distance: DistanceKind,
}

impl ModelConfig {
    pub fn new(input_dim: usize, prototypes: usize, classes: usize) -> Self {
        Self {
            input_dim,
            embed_dim: default_embed_dim(input_dim),
            prototypes,
            classes,
            activation: Activation::Relu,
            distance: DistanceKind::Euclidean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.embed_dim == 0 {
            return Err(CadError::Config("feature dimensions must be positive".into()));
        }
        if self.prototypes == 0 {
            return Err(CadError::Config("need at least one prototype".into()));
        }
        if self.classes < 1 {
            return Err(CadError::Config("need at least one activity class".into()));
        }
        Ok(())
    }
}

/// 20 for inputs of at most 64 dims, otherwise the input size capped at 1024.
pub fn default_embed_dim(input_dim: usize) -> usize {
    if input_dim <= 64 {
        20
    } else {
        input_dim.min(1024)
    }
}

/// All trainable tensors. Linear maps are stored `in x out`, biases `1 x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParameters {
    pub config: ModelConfig,
    pub embed_w: Tensor2,
    pub embed_b: Tensor2,
    pub prototypes: Tensor2,
    pub latent_w1: Tensor2,
    pub latent_b1: Tensor2,
    pub latent_w2: Tensor2,
    pub latent_b2: Tensor2,
    pub head_p_w: Tensor2,
    pub head_p_b: Tensor2,
    pub head_g_w: Tensor2,
    pub head_g_b: Tensor2,
}

/// Names of the tensors in [`ModelParameters::tensors`] order.
pub const PARAMETER_NAMES: [&str; 11] = [
    "embed_w",
    "embed_b",
    "prototypes",
    "latent_w1",
    "latent_b1",
    "latent_w2",
    "latent_b2",
    "head_p_w",
    "head_p_b",
    "head_g_w",
    "head_g_b",
];

fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> Tensor2 {
    let values = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Tensor2::new(rows, cols, values).expect("shape")
}

impl ModelParameters {
    /// Uniform `±1/sqrt(fan_in)` for every linear map and bias, `±1/sqrt(d)`
    /// for the prototypes.
    pub fn init(config: ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let ModelConfig {
            input_dim: din,
            embed_dim: d,
            prototypes: n,
            classes: c,
            ..
        } = config;
        let b_in = 1.0 / (din as f64).sqrt();
        let b_d = 1.0 / (d as f64).sqrt();
        let b_n = 1.0 / (n as f64).sqrt();
        Ok(Self {
            config,
            embed_w: uniform(din, d, b_in, rng),
            embed_b: uniform(1, d, b_in, rng),
            prototypes: uniform(n, d, b_d, rng),
            latent_w1: uniform(d, d, b_d, rng),
            latent_b1: uniform(1, d, b_d, rng),
            latent_w2: uniform(d, d, b_d, rng),
            latent_b2: uniform(1, d, b_d, rng),
            head_p_w: uniform(n, c, b_n, rng),
            head_p_b: uniform(1, c, b_n, rng),
            head_g_w: uniform(d, c, b_d, rng),
            head_g_b: uniform(1, c, b_d, rng),
        })
    }

    /// All-zero parameters of the right shapes.
    pub fn zeros(config: ModelConfig) -> Self {
        let ModelConfig {
            input_dim: din,
            embed_dim: d,
            prototypes: n,
            classes: c,
            ..
        } = config;
        Self {
            config,
            embed_w: Tensor2::zeros(din, d),
            embed_b: Tensor2::zeros(1, d),
            prototypes: Tensor2::zeros(n, d),
            latent_w1: Tensor2::zeros(d, d),
            latent_b1: Tensor2::zeros(1, d),
            latent_w2: Tensor2::zeros(d, d),
            latent_b2: Tensor2::zeros(1, d),
            head_p_w: Tensor2::zeros(n, c),
            head_p_b: Tensor2::zeros(1, c),
            head_g_w: Tensor2::zeros(d, c),
            head_g_b: Tensor2::zeros(1, c),
        }
    }

    pub fn tensors(&self) -> [&Tensor2; 11] {
        [
            &self.embed_w,
            &self.embed_b,
            &self.prototypes,
            &self.latent_w1,
            &self.latent_b1,
            &self.latent_w2,
            &self.latent_b2,
            &self.head_p_w,
            &self.head_p_b,
            &self.head_g_w,
            &self.head_g_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor2; 11] {
        [
            &mut self.embed_w,
            &mut self.embed_b,
            &mut self.prototypes,
            &mut self.latent_w1,
            &mut self.latent_b1,
            &mut self.latent_w2,
            &mut self.latent_b2,
            &mut self.head_p_w,
            &mut self.head_p_b,
            &mut self.head_g_w,
            &mut self.head_g_b,
        ]
    }

    /// Rebuilds parameters from tensors in [`PARAMETER_NAMES`] order,
    /// checking every shape against `config`.
    pub fn from_tensors(config: ModelConfig, tensors: Vec<Tensor2>) -> Result<Self> {
        let mut params = Self::zeros(config);
        if tensors.len() != PARAMETER_NAMES.len() {
            return Err(CadError::InvalidInput(format!(
                "expected {} parameter tensors, got {}",
                PARAMETER_NAMES.len(),
                tensors.len()
            )));
        }
        for ((slot, t), name) in params.tensors_mut().into_iter().zip(tensors).zip(PARAMETER_NAMES) {
            if slot.shape() != t.shape() {
                return Err(CadError::shape(
                    "ModelParameters::from_tensors",
                    format!("{name}: expected {:?}, got {:?}", slot.shape(), t.shape()),
                ));
            }
            *slot = t;
        }
        Ok(params)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

/// Everything the forward pass produces for one video.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutputs {
    /// `T x N` row-stochastic affinities.
    pub affinity: Tensor2,
    /// Time-summed affinities, length N.
    pub prototype_repr: Vec<f64>,
    /// Time-averaged latent frames, length d.
    pub visual_repr: Vec<f64>,
    /// Activity probabilities from the prototype head.
    pub probs_p: Vec<f64>,
    /// Activity probabilities from the visual head.
    pub probs_g: Vec<f64>,
}

/// `x W + b` per frame.
pub fn embed_frames(features: &Tensor2, params: &ModelParameters) -> Result<Tensor2> {
    if features.cols() != params.config.input_dim {
        return Err(CadError::shape(
            "embed_frames",
            format!(
                "features have {} dims, model expects {}",
                features.cols(),
                params.config.input_dim
            ),
        ));
    }
    ops::add_row(&ops::matmul(features, &params.embed_w)?, &params.embed_b)
}

/// Distance, per-row min-max inversion, then row normalization.
pub fn compute_affinity(frames: &Tensor2, prototypes: &Tensor2, kind: DistanceKind) -> Result<Tensor2> {
    let d = numerics::pairwise_distance(frames, prototypes, kind)?;
    numerics::row_normalize(&numerics::minmax_invert_rows(&d))
}

/// `G' = A P` followed by the residual latent network.
pub fn reconstruct_latent(affinity: &Tensor2, params: &ModelParameters) -> Result<Tensor2> {
    let recon = ops::matmul(affinity, &params.prototypes)?;
    latent_map(&recon, params)
}

fn latent_map(recon: &Tensor2, params: &ModelParameters) -> Result<Tensor2> {
    let h = ops::add_row(&ops::matmul(recon, &params.latent_w1)?, &params.latent_b1)?;
    let h = match params.config.activation {
        Activation::Relu => ops::relu(&h),
        Activation::Identity => h,
    };
    let out = ops::add_row(&ops::matmul(&h, &params.latent_w2)?, &params.latent_b2)?;
    ops::add(recon, &out)
}

/// Sum of the affinity rows.
pub fn prototype_representation(affinity: &Tensor2) -> Vec<f64> {
    ops::sum_rows(affinity).into_values()
}

/// Mean of the latent rows.
pub fn visual_representation(latent: &Tensor2) -> Vec<f64> {
    ops::mean_rows(latent).into_values()
}

/// Linear heads followed by softmax: `(probs_p, probs_g)`.
pub fn classify(vp: &[f64], vg: &[f64], params: &ModelParameters) -> Result<(Vec<f64>, Vec<f64>)> {
    let head = |v: &[f64], w: &Tensor2, b: &Tensor2| -> Result<Vec<f64>> {
        let x = Tensor2::row_vector(v.to_vec());
        let logits = ops::add_row(&ops::matmul(&x, w)?, b)?;
        Ok(ops::softmax_rows(&logits).into_values())
    };
    Ok((
        head(vp, &params.head_p_w, &params.head_p_b)?,
        head(vg, &params.head_g_w, &params.head_g_b)?,
    ))
}

/// Full forward pass on one video's raw `T x d_in` features.
pub fn forward(features: &Tensor2, params: &ModelParameters) -> Result<ForwardOutputs> {
    if features.rows() == 0 {
        return Err(CadError::InvalidInput("video has no frames".into()));
    }
    let frames = embed_frames(features, params)?;
    let affinity = compute_affinity(&frames, &params.prototypes, params.config.distance)?;
    let latent = reconstruct_latent(&affinity, params)?;
    let prototype_repr = prototype_representation(&affinity);
    let visual_repr = visual_representation(&latent);
    let (probs_p, probs_g) = classify(&prototype_repr, &visual_repr, params)?;
    Ok(ForwardOutputs {
        affinity,
        prototype_repr,
        visual_repr,
        probs_p,
        probs_g,
    })
}

/// Affinities only; skips the latent network and heads.
pub fn affinity(features: &Tensor2, params: &ModelParameters) -> Result<Tensor2> {
    let frames = embed_frames(features, params)?;
    compute_affinity(&frames, &params.prototypes, params.config.distance)
}

/// The three loss terms and their weighted total for one video.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub prototype_cls: f64,
    pub visual_cls: f64,
    pub smoothing: f64,
    pub total: f64,
}

struct Graph {
    params: [Var; 11],
    parts: [Var; 3],
    total: Var,
}

/// Records the training graph of one video. Parameters are leaves in
/// [`PARAMETER_NAMES`] order.
fn record(
    tape: &mut Tape,
    param_vars: [Var; 11],
    config: &ModelConfig,
    features: &Tensor2,
    activity: usize,
    loss: &LossConfig,
) -> Result<Graph> {
    let [ew, eb, proto, w1, b1, w2, b2, hpw, hpb, hgw, hgb] = param_vars;
    let x = tape.constant(features.clone());
    let frames = tape.linear(x, ew, eb)?;
    let dist = tape.pairwise_distance(frames, proto, config.distance)?;
    let inv = tape.minmax_invert_rows(dist)?;
    let aff = tape.row_normalize(inv)?;

    let recon = tape.matmul(aff, proto)?;
    let h = tape.linear(recon, w1, b1)?;
    let h = match config.activation {
        Activation::Relu => tape.relu(h)?,
        Activation::Identity => h,
    };
    let out = tape.linear(h, w2, b2)?;
    let latent = tape.add(recon, out)?;

    let vp = tape.sum_rows(aff)?;
    let vg = tape.mean_rows(latent)?;
    let logits_p = tape.linear(vp, hpw, hpb)?;
    let logits_g = tape.linear(vg, hgw, hgb)?;
    let yp = tape.softmax_rows(logits_p)?;
    let yg = tape.softmax_rows(logits_g)?;

    let target = one_hot(activity, config.classes);
    let lp = tape.custom(yp, Box::new(ActivityLoss::new(target.clone())?))?;
    let lg = tape.custom(yg, Box::new(ActivityLoss::new(target)?))?;
    let ls = tape.custom(aff, Box::new(TmseLoss { tau: loss.tau }))?;
    let w = loss_weights(loss);
    let total = tape.weighted_sum(&[(lp, w[0]), (lg, w[1]), (ls, w[2])])?;
    Ok(Graph {
        params: param_vars,
        parts: [lp, lg, ls],
        total,
    })
}

/// Builds the training loss of one video on `tape` with `tensors` (in
/// [`PARAMETER_NAMES`] order) already registered as leaves.
pub fn record_loss(
    tape: &mut Tape,
    params: &[Var],
    config: &ModelConfig,
    features: &Tensor2,
    activity: usize,
    loss: &LossConfig,
) -> Result<Var> {
    let vars: [Var; 11] = params
        .try_into()
        .map_err(|_| CadError::InvalidInput("expected 11 parameter leaves".into()))?;
    Ok(record(tape, vars, config, features, activity, loss)?.total)
}

/// Loss terms of one video and the gradient of the total with respect to
/// every parameter tensor, in [`PARAMETER_NAMES`] order.
pub fn loss_and_gradients(
    features: &Tensor2,
    activity: usize,
    params: &ModelParameters,
    loss: &LossConfig,
) -> Result<(LossBreakdown, Vec<Tensor2>)> {
    if activity >= params.config.classes {
        return Err(CadError::InvalidInput(format!(
            "activity {activity} out of range for {} classes",
            params.config.classes
        )));
    }
    if features.cols() != params.config.input_dim {
        return Err(CadError::shape(
            "loss_and_gradients",
            format!("features have {} dims, model expects {}", features.cols(), params.config.input_dim),
        ));
    }
    let mut tape = Tape::new();
    let leaves = params.tensors().map(|t| tape.leaf(t.clone()));
    let graph = record(&mut tape, leaves, &params.config, features, activity, loss)?;
    let mut grads: Gradients = tape.backward(graph.total)?;
    let breakdown = LossBreakdown {
        prototype_cls: tape.scalar(graph.parts[0]),
        visual_cls: tape.scalar(graph.parts[1]),
        smoothing: tape.scalar(graph.parts[2]),
        total: tape.scalar(graph.total),
    };
    Ok((breakdown, graph.params.iter().map(|&v| grads.take(v)).collect()))
}
