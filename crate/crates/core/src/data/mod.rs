//! Videos, corpora, their on-disk format and a synthetic corpus generator.

mod generator;
mod io;

pub use generator::{generate_corpus, ActivityPlan, CorpusSpec, GeneratorTruth};
pub use io::{
    read_corpus, read_features, read_ground_truth, write_corpus, write_features,
    write_ground_truth, Manifest, ManifestVideo, FEATURE_MAGIC, FORMAT_VERSION, GT_MAGIC,
};

use crate::error::{CadError, Result};
use crate::numerics::Tensor2;
use crate::rng;

/// One video: frame features, its activity and, when known, per-frame
/// ground-truth actions. Indices are 0-based; `None` marks background.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    pub video_id: String,
    pub activity: usize,
    pub features: Tensor2,
    pub gt_actions: Option<Vec<Option<usize>>>,
}

impl FeatureSequence {
    pub fn new(
        video_id: impl Into<String>,
        activity: usize,
        features: Tensor2,
        gt_actions: Option<Vec<Option<usize>>>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if features.rows() == 0 {
            return Err(CadError::InvalidInput(format!("video {video_id} has no frames")));
        }
        if let Some(gt) = &gt_actions {
            if gt.len() != features.rows() {
                return Err(CadError::InvalidInput(format!(
                    "video {video_id}: {} ground-truth labels for {} frames",
                    gt.len(),
                    features.rows()
                )));
            }
        }
        Ok(Self {
            video_id,
            activity,
            features,
            gt_actions,
        })
    }

    pub fn frames(&self) -> usize {
        self.features.rows()
    }
}

/// A named set of videos with activity names.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub activity_names: Vec<String>,
    pub videos: Vec<FeatureSequence>,
}

impl Corpus {
    pub fn classes(&self) -> usize {
        self.activity_names.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.videos.first().map_or(0, |v| v.features.cols())
    }

    /// Number of distinct ground-truth actions (one past the largest index).
    pub fn action_count(&self) -> usize {
        self.videos
            .iter()
            .filter_map(|v| v.gt_actions.as_ref())
            .flatten()
            .flatten()
            .map(|&a| a + 1)
            .max()
            .unwrap_or(0)
    }

    /// Distinct ground-truth actions appearing in each activity's videos.
    pub fn actions_per_activity(&self) -> Vec<usize> {
        let mut sets = vec![std::collections::BTreeSet::new(); self.classes()];
        for v in &self.videos {
            if let Some(gt) = &v.gt_actions {
                sets[v.activity].extend(gt.iter().flatten().copied());
            }
        }
        sets.iter().map(|s| s.len()).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            name: self.name.clone(),
            activity_names: self.activity_names.clone(),
            videos: indices.iter().map(|&i| self.videos[i].clone()).collect(),
        }
    }

    /// Stratified split: within each activity, shuffle with `seed` and send
    /// `round(fraction * count)` videos to the test side. Returns
    /// `(train, test)` index lists in corpus order.
    pub fn split_indices(&self, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
        let mut r = rng::seeded(seed);
        let mut test = vec![false; self.videos.len()];
        for c in 0..self.classes() {
            let mut ids: Vec<usize> = (0..self.videos.len())
                .filter(|&i| self.videos[i].activity == c)
                .collect();
            rng::shuffle(&mut r, &mut ids);
            let k = (test_fraction * ids.len() as f64).round() as usize;
            for &i in ids.iter().take(k) {
                test[i] = true;
            }
        }
        let (te, tr): (Vec<usize>, Vec<usize>) = (0..self.videos.len()).partition(|&i| test[i]);
        (tr, te)
    }

    pub fn validate(&self) -> Result<()> {
        if self.videos.is_empty() {
            return Err(CadError::InvalidInput("corpus has no videos".into()));
        }
        let d = self.feature_dim();
        for v in &self.videos {
            if v.activity >= self.classes() {
                return Err(CadError::InvalidInput(format!(
                    "video {}: activity {} out of range for {} classes",
                    v.video_id,
                    v.activity + 1,
                    self.classes()
                )));
            }
            if v.features.cols() != d {
                return Err(CadError::InvalidInput(format!(
                    "video {}: feature dim {} differs from {}",
                    v.video_id,
                    v.features.cols(),
                    d
                )));
            }
        }
        Ok(())
    }
}
