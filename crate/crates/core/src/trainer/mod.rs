//! Mini-batch Adam training of the prototype network.
//!
//! Each epoch shuffles the corpus with the run's seeded generator, cuts it
//! into batches, forwards every video on its own (no padding, the sums and
//! means run over the true frame count) and takes one Adam step per batch on
//! the batch-averaged gradient. Per-video gradients are always reduced in
//! batch order, so the thread count never changes the result.

mod adam;
mod checkpoint;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Corpus;
use crate::error::{CadError, Result};
use crate::losses::LossConfig;
use crate::model::{self, LossBreakdown, ModelConfig, ModelParameters};
use crate::numerics::Tensor2;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    #[serde(alias = "batch")]
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            epochs: 240,
            batch_size: 8,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(CadError::Config("epochs and batch_size must be >= 1".into()));
        }
        if !(self.lr >= 0.0) {
            return Err(CadError::Config(format!("lr {} must be >= 0", self.lr)));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Mean loss terms over all videos of one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub prototype_cls: f64,
    pub visual_cls: f64,
    pub smoothing: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub trace: Vec<EpochStats>,
}

/// Training run configuration plus the number of worker threads.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub threads: usize,
    /// Starting parameters; a seeded initialization when `None`.
    pub initial: Option<ModelParameters>,
}

impl Trainer {
    pub fn new(model: ModelConfig, train: TrainConfig, loss: LossConfig) -> Self {
        Self {
            model,
            train,
            loss,
            threads: 1,
            initial: None,
        }
    }

    pub fn initial(mut self, params: ModelParameters) -> Self {
        self.initial = Some(params);
        self
    }

    pub fn threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn run(&self, corpus: &Corpus) -> Result<TrainOutcome> {
        self.run_with(corpus, |_| {})
    }

    /// Trains from a fresh initialization, calling `on_epoch` after every epoch.
    pub fn run_with(&self, corpus: &Corpus, mut on_epoch: impl FnMut(&EpochStats)) -> Result<TrainOutcome> {
        self.train.validate()?;
        self.loss.validate()?;
        self.model.validate()?;
        corpus.validate()?;
        if corpus.feature_dim() != self.model.input_dim {
            return Err(CadError::Config(format!(
                "corpus features have {} dims, model expects {}",
                corpus.feature_dim(),
                self.model.input_dim
            )));
        }
        if corpus.classes() != self.model.classes {
            return Err(CadError::Config(format!(
                "corpus has {} activities, model expects {}",
                corpus.classes(),
                self.model.classes
            )));
        }

        let mut r = rng::seeded(self.train.seed);
        let init = ModelParameters::init(self.model, &mut r)?;
        let mut params = match &self.initial {
            Some(p) if p.config == self.model => p.clone(),
            Some(_) => return Err(CadError::Config("initial parameters do not match the model config".into())),
            None => init,
        };
        let mut state = AdamState::new(params.tensors());
        let adam = self.train.adam();
        let pool = if self.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(self.threads)
                    .build()
                    .map_err(|e| CadError::Config(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };

        let mut order: Vec<usize> = (0..corpus.videos.len()).collect();
        let mut trace = Vec::with_capacity(self.train.epochs);
        for epoch in 0..self.train.epochs {
            rng::shuffle(&mut r, &mut order);
            let mut sums = [0.0; 4];
            for batch in order.chunks(self.train.batch_size) {
                let results = match &pool {
                    Some(pool) => pool.install(|| {
                        batch
                            .par_iter()
                            .map(|&i| self.video_step(corpus, i, &params))
                            .collect::<Vec<_>>()
                    }),
                    None => batch
                        .iter()
                        .map(|&i| self.video_step(corpus, i, &params))
                        .collect(),
                };
                let mut grads: Vec<Tensor2> = params
                    .tensors()
                    .iter()
                    .map(|t| Tensor2::zeros(t.rows(), t.cols()))
                    .collect();
                for res in results {
                    let (b, g) = res?;
                    sums[0] += b.prototype_cls;
                    sums[1] += b.visual_cls;
                    sums[2] += b.smoothing;
                    sums[3] += b.total;
                    for (acc, gi) in grads.iter_mut().zip(&g) {
                        acc.add_scaled(gi, 1.0);
                    }
                }
                let k = 1.0 / batch.len() as f64;
                for g in grads.iter_mut() {
                    for v in g.values_mut() {
                        *v *= k;
                    }
                }
                adam_step(&mut params.tensors_mut(), &grads, &mut state, &adam);
            }
            let n = corpus.videos.len() as f64;
            let stats = EpochStats {
                epoch,
                prototype_cls: sums[0] / n,
                visual_cls: sums[1] / n,
                smoothing: sums[2] / n,
                total: sums[3] / n,
            };
            on_epoch(&stats);
            trace.push(stats);
        }

        Ok(TrainOutcome {
            checkpoint: Checkpoint {
                params,
                train: self.train,
                loss: self.loss,
                epoch: self.train.epochs,
                rng_digest: rng::digest(&r),
            },
            trace,
        })
    }

    fn video_step(
        &self,
        corpus: &Corpus,
        index: usize,
        params: &ModelParameters,
    ) -> Result<(LossBreakdown, Vec<Tensor2>)> {
        let video = &corpus.videos[index];
        let nonfinite = |detail: String| CadError::NonFinite(format!("video {}: {detail}", video.video_id));
        let (b, g) = model::loss_and_gradients(&video.features, video.activity, params, &self.loss)
            .map_err(|e| match e {
                CadError::NonFinite(d) => nonfinite(d),
                other => other,
            })?;
        if !b.total.is_finite() {
            return Err(nonfinite(format!("loss {}", b.total)));
        }
        if g.iter().any(|t| !t.is_finite()) {
            return Err(nonfinite("gradient".into()));
        }
        Ok((b, g))
    }
}

/// Mean loss terms of `params` over `corpus` without updating anything.
pub fn evaluate_loss(corpus: &Corpus, params: &ModelParameters, loss: &LossConfig) -> Result<EpochStats> {
    let mut sums = [0.0; 4];
    for v in &corpus.videos {
        let (b, _) = model::loss_and_gradients(&v.features, v.activity, params, loss)?;
        sums[0] += b.prototype_cls;
        sums[1] += b.visual_cls;
        sums[2] += b.smoothing;
        sums[3] += b.total;
    }
    let n = corpus.videos.len() as f64;
    Ok(EpochStats {
        epoch: 0,
        prototype_cls: sums[0] / n,
        visual_cls: sums[1] / n,
        smoothing: sums[2] / n,
        total: sums[3] / n,
    })
}

/// Loss trace as TSV: `epoch, total, prototype_cls, visual_cls, smoothing`.
pub fn trace_tsv(trace: &[EpochStats]) -> String {
    let mut out = String::from("epoch\ttotal\tprototype_cls\tvisual_cls\tsmoothing\n");
    for s in trace {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            s.epoch + 1,
            s.total,
            s.prototype_cls,
            s.visual_cls,
            s.smoothing
        ));
    }
    out
}
