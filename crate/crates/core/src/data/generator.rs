//! Seeded synthetic corpora with a controllable amount of cross-activity
//! action sharing.
//!
//! Every action owns a fixed mean in feature space; frames are that mean
//! plus isotropic Gaussian noise. Each activity has a canonical ordered list
//! of actions and every video walks that list, possibly omitting optional
//! entries. Shared actions are handed to pairs of consecutive activities
//! (`0,1`, then `2,3`, wrapping modulo `C`), two per pair, so the sharing
//! pattern is block structured. Exclusive actions are dealt round-robin.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Corpus, FeatureSequence};
use crate::error::{CadError, Result};
use crate::numerics::Tensor2;
use crate::rng;

const MEAN_ATTEMPTS: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub name: String,
    /// Number of complex activities.
    pub activities: usize,
    /// Number of distinct actions over the whole corpus.
    pub actions: usize,
    /// Actions that appear in two activities.
    pub shared_actions: usize,
    /// Allowed canonical list length per activity, inclusive.
    pub actions_per_activity: (usize, usize),
    pub videos_per_activity: usize,
    /// Inclusive frame-count range per video.
    pub frames: (usize, usize),
    pub feature_dim: usize,
    /// Minimum distance between action means, in units of `noise_std`.
    pub cluster_separation: f64,
    pub noise_std: f64,
    /// Probability that an optional (non-first) action is left out of a video.
    pub drop_prob: f64,
    /// Fraction of frames replaced by uniform-noise background, split between
    /// the start and the end of each video.
    pub background_ratio: f64,
    /// Relative segment lengths are drawn uniformly from this range.
    pub segment_weights: (f64, f64),
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            activities: 4,
            actions: 10,
            shared_actions: 3,
            actions_per_activity: (1, 10),
            videos_per_activity: 25,
            frames: (100, 300),
            feature_dim: 32,
            cluster_separation: 6.0,
            noise_std: 1.0,
            drop_prob: 0.0,
            background_ratio: 0.0,
            segment_weights: (0.5, 1.5),
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CadError::Config(m));
        if self.activities == 0 || self.actions == 0 {
            return bad("need at least one activity and one action".into());
        }
        if self.shared_actions > self.actions {
            return bad(format!(
                "shared_actions {} exceeds actions {}",
                self.shared_actions, self.actions
            ));
        }
        if self.shared_actions > 0 && self.activities < 2 {
            return bad("shared actions need at least two activities".into());
        }
        let (lo, hi) = self.actions_per_activity;
        if lo == 0 || lo > hi || lo > self.actions {
            return bad(format!("actions_per_activity {lo}..={hi} invalid for {} actions", self.actions));
        }
        if !(self.cluster_separation > 0.0) {
            return bad("cluster_separation must be > 0".into());
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return bad("drop_prob must be in [0,1]".into());
        }
        if !(0.0..1.0).contains(&self.background_ratio) {
            return bad("background_ratio must be in [0,1)".into());
        }
        let (wlo, whi) = self.segment_weights;
        if !(wlo > 0.0 && whi >= wlo) {
            return bad("segment_weights must satisfy 0 < lo <= hi".into());
        }
        if self.frames.0 == 0 || self.frames.0 > self.frames.1 {
            return bad("frames range must be nonempty and start at >= 1".into());
        }
        if self.videos_per_activity == 0 {
            return bad("videos_per_activity must be >= 1".into());
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be >= 1".into());
        }
        Ok(())
    }
}

/// Canonical action list of one activity. The first entry is mandatory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivityPlan {
    pub actions: Vec<usize>,
}

/// What the generator decided, for checking a corpus against its recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTruth {
    pub spec: CorpusSpec,
    pub plans: Vec<ActivityPlan>,
    /// `M x d_raw` action means.
    pub means: Tensor2,
    /// Actions kept in each video, in corpus order.
    pub video_actions: Vec<Vec<usize>>,
}

impl GeneratorTruth {
    /// Actions two activities have in common.
    pub fn shared_between(&self, a: usize, b: usize) -> usize {
        self.plans[a]
            .actions
            .iter()
            .filter(|x| self.plans[b].actions.contains(x))
            .count()
    }

    /// Expected fraction of an activity's frames per action, available when
    /// nothing is dropped and there is no background: segment weights are
    /// i.i.d., so every listed action expects `1/k`.
    pub fn expected_proportions(&self, activity: usize) -> Option<Vec<(usize, f64)>> {
        if self.spec.drop_prob > 0.0 || self.spec.background_ratio > 0.0 {
            return None;
        }
        let acts = &self.plans[activity].actions;
        let k = acts.len() as f64;
        Some(acts.iter().map(|&a| (a, 1.0 / k)).collect())
    }
}

fn f32_round(v: f64) -> f64 {
    v as f32 as f64
}

fn activity_plans(spec: &CorpusSpec, r: &mut rng::CadRng) -> Result<Vec<ActivityPlan>> {
    let c = spec.activities;
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); c];
    for j in 0..spec.shared_actions {
        let a = (2 * (j / 2)) % c;
        let b = (a + 1) % c;
        lists[a].push(j);
        lists[b].push(j);
    }
    for (i, action) in (spec.shared_actions..spec.actions).enumerate() {
        lists[i % c].push(action);
    }
    let (lo, hi) = spec.actions_per_activity;
    for (a, list) in lists.iter_mut().enumerate() {
        if list.is_empty() || list.len() < lo || list.len() > hi {
            return Err(CadError::Config(format!(
                "activity {} receives {} actions, outside actions_per_activity {lo}..={hi}",
                a + 1,
                list.len()
            )));
        }
        rng::shuffle(r, list);
    }
    Ok(lists
        .into_iter()
        .map(|actions| ActivityPlan { actions })
        .collect())
}

fn action_means(spec: &CorpusSpec, r: &mut rng::CadRng) -> Result<Tensor2> {
    let d = spec.feature_dim;
    let unit = spec.noise_std.max(1.0);
    let min_dist = spec.cluster_separation * spec.noise_std;
    let scale = spec.cluster_separation * unit / (d as f64).sqrt();
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(spec.actions);
    for m in 0..spec.actions {
        let mut placed = false;
        for _ in 0..MEAN_ATTEMPTS {
            let cand: Vec<f64> = (0..d)
                .map(|_| f32_round(scale * r.sample::<f64, _>(StandardNormal)))
                .collect();
            let ok = means.iter().all(|other| {
                let sq: f64 = other.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum();
                sq.sqrt() >= min_dist && sq > 0.0
            });
            if ok {
                means.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(CadError::Generation(format!(
                "could not place action mean {} at separation {} after {MEAN_ATTEMPTS} attempts; \
                 increase feature_dim (currently {d})",
                m + 1,
                spec.cluster_separation
            )));
        }
    }
    Ok(Tensor2::from_rows(&means))
}

/// Splits `total` frames proportionally to `weights` by largest remainder,
/// giving every segment at least one frame.
fn allocate(total: usize, weights: &[f64]) -> Vec<usize> {
    let k = weights.len();
    debug_assert!(total >= k);
    let spare = total - k;
    let wsum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| spare as f64 * w / wsum).collect();
    let mut lens: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = spare - lens.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if left == 0 {
            break;
        }
        lens[i] += 1;
        left -= 1;
    }
    lens.iter().map(|l| l + 1).collect()
}

/// Builds a corpus and the recipe it was drawn from. Deterministic in `spec.seed`.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<(Corpus, GeneratorTruth)> {
    spec.validate()?;
    let mut r = rng::seeded(spec.seed);
    let means = action_means(spec, &mut r)?;
    let plans = activity_plans(spec, &mut r)?;
    let d = spec.feature_dim;

    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in means.iter_rows() {
        for k in 0..d {
            lo[k] = lo[k].min(row[k] - 3.0 * spec.noise_std);
            hi[k] = hi[k].max(row[k] + 3.0 * spec.noise_std);
        }
    }

    let mut videos = Vec::new();
    let mut video_actions = Vec::new();
    for (a, plan) in plans.iter().enumerate() {
        for v in 0..spec.videos_per_activity {
            let kept: Vec<usize> = plan
                .actions
                .iter()
                .enumerate()
                .filter(|&(i, _)| i == 0 || r.random::<f64>() >= spec.drop_prob)
                .map(|(_, &act)| act)
                .collect();
            let t = r.random_range(spec.frames.0..=spec.frames.1).max(kept.len());
            let background = ((spec.background_ratio * t as f64).round() as usize).min(t - kept.len());
            let lead = background / 2;
            let action_frames = t - background;
            let weights: Vec<f64> = kept
                .iter()
                .map(|_| {
                    if spec.segment_weights.0 == spec.segment_weights.1 {
                        spec.segment_weights.0
                    } else {
                        r.random_range(spec.segment_weights.0..spec.segment_weights.1)
                    }
                })
                .collect();
            let lens = allocate(action_frames, &weights);

            let mut gt: Vec<Option<usize>> = vec![None; lead];
            for (&act, &len) in kept.iter().zip(&lens) {
                gt.extend(std::iter::repeat_n(Some(act), len));
            }
            gt.resize(t, None);

            let mut values = Vec::with_capacity(t * d);
            for label in &gt {
                match label {
                    Some(act) => {
                        for &m in means.row(*act) {
                            let noise: f64 = r.sample(StandardNormal);
                            values.push(f32_round(m + spec.noise_std * noise));
                        }
                    }
                    None => {
                        for k in 0..d {
                            values.push(f32_round(r.random_range(lo[k]..=hi[k])));
                        }
                    }
                }
            }
            let features = Tensor2::new(t, d, values)?;
            let id = format!("a{:02}_v{:03}", a + 1, v + 1);
            videos.push(FeatureSequence::new(id, a, features, Some(gt))?);
            video_actions.push(kept);
        }
    }

    let corpus = Corpus {
        name: spec.name.clone(),
        activity_names: (0..spec.activities).map(|a| format!("activity_{}", a + 1)).collect(),
        videos,
    };
    let truth = GeneratorTruth {
        spec: spec.clone(),
        plans,
        means,
        video_actions,
    };
    Ok((corpus, truth))
}
