//! Corpus-level helpers that chain the model, inference and matching.

use rayon::prelude::*;

use crate::data::Corpus;
use crate::error::{CadError, Result};
use crate::inference::{recognize_activity, segment_videos, InferConfig, Labeling, Segmentation, VideoAffinity};
use crate::matching::EvalVideo;
use crate::model::{self, ModelParameters};
use crate::numerics::{argmax, Tensor2};

fn pooled<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CadError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Affinity matrix of every video, in corpus order.
pub fn corpus_affinities(corpus: &Corpus, params: &ModelParameters, threads: usize) -> Result<Vec<Tensor2>> {
    pooled(threads, || {
        corpus
            .videos
            .par_iter()
            .map(|v| model::affinity(&v.features, params))
            .collect::<Result<Vec<_>>>()
    })?
}

pub fn segment_corpus(corpus: &Corpus, affinities: &[Tensor2], cfg: &InferConfig) -> Result<Segmentation> {
    let inputs: Vec<VideoAffinity<'_>> = corpus
        .videos
        .iter()
        .zip(affinities)
        .map(|(v, a)| VideoAffinity {
            activity: v.activity,
            affinity: a,
            gt: v.gt_actions.as_deref(),
        })
        .collect();
    segment_videos(&inputs, cfg)
}

/// Pairs labelings with ground truth; background frames become `None`.
pub fn eval_videos(corpus: &Corpus, labelings: &[Labeling]) -> Result<Vec<EvalVideo>> {
    corpus
        .videos
        .iter()
        .zip(labelings)
        .map(|(v, l)| {
            let gt = v
                .gt_actions
                .clone()
                .ok_or_else(|| CadError::InvalidInput(format!("video {} has no ground truth", v.video_id)))?;
            Ok(EvalVideo {
                id: v.video_id.clone(),
                activity: v.activity,
                pred: l.masked(),
                gt,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recognition {
    pub video_id: String,
    pub truth: usize,
    pub combined: usize,
    pub prototype_head: usize,
    pub visual_head: usize,
    pub probs_p: Vec<f64>,
    pub probs_g: Vec<f64>,
}

pub fn recognize_corpus(
    corpus: &Corpus,
    params: &ModelParameters,
    wp: f64,
    wg: f64,
    threads: usize,
) -> Result<Vec<Recognition>> {
    pooled(threads, || {
        corpus
            .videos
            .par_iter()
            .map(|v| {
                let out = model::forward(&v.features, params)?;
                Ok(Recognition {
                    video_id: v.video_id.clone(),
                    truth: v.activity,
                    combined: recognize_activity(&out.probs_p, &out.probs_g, wp, wg)?,
                    prototype_head: argmax(&out.probs_p),
                    visual_head: argmax(&out.probs_g),
                    probs_p: out.probs_p,
                    probs_g: out.probs_g,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Accuracies of the combined, prototype and visual heads.
pub fn recognition_accuracy(recs: &[Recognition]) -> (f64, f64, f64) {
    let n = recs.len().max(1) as f64;
    let acc = |f: fn(&Recognition) -> usize| recs.iter().filter(|r| f(r) == r.truth).count() as f64 / n;
    (acc(|r| r.combined), acc(|r| r.prototype_head), acc(|r| r.visual_head))
}

/// Segments `corpus` with `cfg` and matches the result at `scope`.
pub fn evaluate(
    corpus: &Corpus,
    affinities: &[Tensor2],
    cfg: &InferConfig,
    scope: crate::matching::Scope,
) -> Result<crate::matching::LevelReport> {
    let seg = segment_corpus(corpus, affinities, cfg)?;
    let videos = eval_videos(corpus, &seg.labelings)?;
    crate::matching::match_at_level(&videos, scope)
}
