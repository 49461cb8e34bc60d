//! Cluster-to-action matching and the evaluation metrics built on it.
//!
//! Predictions are cluster ids (prototype indices), ground truth is action
//! ids; both are 0-based and `None` marks a frame that is not evaluated
//! (background in either sequence).

mod bow;
mod hungarian;
mod kl;

pub use bow::{bow_pseudo_activities, kmeans, BowResult, KMeans};
pub use hungarian::{assignment_value, hungarian_solve};
pub use kl::{
    kl_action_distribution, kl_divergence, kl_prototype_sharing, prototype_distributions, smoothed, KlMatrix,
    KL_EPS,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CadError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contingency {
    /// Distinct predicted ids, ascending.
    pub clusters: Vec<usize>,
    /// Distinct ground-truth ids, ascending.
    pub actions: Vec<usize>,
    /// `counts[i][j]`: frames with cluster `clusters[i]` and action `actions[j]`.
    pub counts: Vec<Vec<i64>>,
}

impl Contingency {
    pub fn total(&self) -> i64 {
        self.counts.iter().flatten().sum()
    }
}

fn evaluated<'a>(
    pred: &'a [Option<usize>],
    gt: &'a [Option<usize>],
) -> impl Iterator<Item = (usize, usize)> + 'a {
    pred.iter().zip(gt).filter_map(|(p, g)| Some(((*p)?, (*g)?)))
}

fn check_lengths(pred: &[Option<usize>], gt: &[Option<usize>]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(CadError::InvalidInput(format!(
            "prediction has {} frames, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    Ok(())
}

/// Overlap counts over the frames where both sequences carry a label; the
/// `(pred, gt)` slices are concatenated in order.
pub fn build_contingency(pairs: &[(&[Option<usize>], &[Option<usize>])]) -> Result<Contingency> {
    let mut map: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    let mut clusters = BTreeSet::new();
    let mut actions = BTreeSet::new();
    for (pred, gt) in pairs {
        check_lengths(pred, gt)?;
        for (p, g) in evaluated(pred, gt) {
            *map.entry((p, g)).or_default() += 1;
            clusters.insert(p);
            actions.insert(g);
        }
    }
    let clusters: Vec<usize> = clusters.into_iter().collect();
    let actions: Vec<usize> = actions.into_iter().collect();
    let mut counts = vec![vec![0; actions.len()]; clusters.len()];
    for ((p, g), c) in map {
        let i = clusters.binary_search(&p).unwrap();
        let j = actions.binary_search(&g).unwrap();
        counts[i][j] = c;
    }
    Ok(Contingency { clusters, actions, counts })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Video,
    Activity,
    #[default]
    Global,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Video => "video",
            Scope::Activity => "activity",
            Scope::Global => "global",
        })
    }
}

impl FromStr for Scope {
    type Err = CadError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "video" => Ok(Scope::Video),
            "activity" => Ok(Scope::Activity),
            "global" => Ok(Scope::Global),
            other => Err(CadError::InvalidInput(format!(
                "unknown scope {other:?} (video, activity or global)"
            ))),
        }
    }
}

/// One video's predictions and ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalVideo {
    pub id: String,
    pub activity: usize,
    pub pred: Vec<Option<usize>>,
    pub gt: Vec<Option<usize>>,
}

/// Matching result of one unit (a video, an activity or the whole corpus).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitReport {
    pub unit: String,
    /// `(cluster, action)` pairs, 0-based.
    pub assignment: Vec<(usize, usize)>,
    pub frames: u64,
    pub correct: u64,
    pub mof: f64,
    pub mop: f64,
    pub moc: f64,
    #[serde(skip)]
    cluster_acc: Vec<f64>,
    #[serde(skip)]
    class_acc: Vec<f64>,
}

impl UnitReport {
    pub fn action_of(&self, cluster: usize) -> Option<usize> {
        self.assignment.iter().find(|(c, _)| *c == cluster).map(|&(_, a)| a)
    }
}

/// Matches one contingency table and derives its frame, prototype and class
/// accuracies. Unmatched clusters and classes count as 0.
pub fn match_unit(unit: impl Into<String>, table: &Contingency) -> UnitReport {
    let pairs = hungarian_solve(&table.counts);
    let frames = table.total() as u64;
    let correct = assignment_value(&table.counts, &pairs) as u64;
    let mut cluster_acc = vec![0.0; table.clusters.len()];
    let mut class_acc = vec![0.0; table.actions.len()];
    for &(i, j) in &pairs {
        let c = table.counts[i][j] as f64;
        let row: i64 = table.counts[i].iter().sum();
        let col: i64 = table.counts.iter().map(|r| r[j]).sum();
        cluster_acc[i] = c / row as f64;
        class_acc[j] = c / col as f64;
    }
    let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    UnitReport {
        unit: unit.into(),
        assignment: pairs.iter().map(|&(i, j)| (table.clusters[i], table.actions[j])).collect(),
        frames,
        correct,
        mof: if frames == 0 { 0.0 } else { correct as f64 / frames as f64 },
        mop: mean(&cluster_acc),
        moc: mean(&class_acc),
        cluster_acc,
        class_acc,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub scope: Scope,
    pub units: Vec<UnitReport>,
    /// Which unit each video was matched in.
    #[serde(skip)]
    pub video_unit: Vec<usize>,
    pub frames: u64,
    pub mof: f64,
    /// Mean over every matched unit's clusters.
    pub mop: f64,
    /// Mean over every matched unit's ground-truth classes.
    pub moc: f64,
}

impl LevelReport {
    /// Predictions of `video` translated to matched actions: `Some(Some(a))`
    /// for a matched cluster, `Some(None)` for an unmatched one and `None` for
    /// frames without a prediction.
    pub fn mapped(&self, video_index: usize, video: &EvalVideo) -> Vec<Option<Option<usize>>> {
        let unit = &self.units[self.video_unit[video_index]];
        video.pred.iter().map(|p| p.map(|c| unit.action_of(c))).collect()
    }
}

pub fn match_at_level(videos: &[EvalVideo], scope: Scope) -> Result<LevelReport> {
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    match scope {
        Scope::Video => {
            for (i, v) in videos.iter().enumerate() {
                groups.push((v.id.clone(), vec![i]));
            }
        }
        Scope::Activity => {
            let mut by: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, v) in videos.iter().enumerate() {
                by.entry(v.activity).or_default().push(i);
            }
            for (a, members) in by {
                groups.push((format!("activity_{}", a + 1), members));
            }
        }
        Scope::Global => groups.push(("global".into(), (0..videos.len()).collect())),
    }
    let mut units = Vec::with_capacity(groups.len());
    let mut video_unit = vec![0; videos.len()];
    for (u, (name, members)) in groups.into_iter().enumerate() {
        let pairs: Vec<(&[Option<usize>], &[Option<usize>])> =
            members.iter().map(|&i| (&videos[i].pred[..], &videos[i].gt[..])).collect();
        let table = build_contingency(&pairs)?;
        for &i in &members {
            video_unit[i] = u;
        }
        units.push(match_unit(name, &table));
    }
    let frames: u64 = units.iter().map(|u| u.frames).sum();
    if frames == 0 {
        return Err(CadError::InvalidInput("no evaluated frames".into()));
    }
    let correct: u64 = units.iter().map(|u| u.correct).sum();
    let pooled_mean = |f: fn(&UnitReport) -> &[f64]| {
        let all: Vec<f64> = units.iter().flat_map(|u| f(u).iter().copied()).collect();
        all.iter().sum::<f64>() / all.len().max(1) as f64
    };
    Ok(LevelReport {
        scope,
        frames,
        mof: correct as f64 / frames as f64,
        mop: pooled_mean(|u| &u.cluster_acc),
        moc: pooled_mean(|u| &u.class_acc),
        units,
        video_unit,
    })
}

/// Fraction of videos whose predicted class maps to their true class under
/// one-to-one matching of predicted classes to true classes.
pub fn mean_over_videos(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(CadError::InvalidInput(format!(
            "{} predictions for {} videos",
            pred.len(),
            truth.len()
        )));
    }
    let p: Vec<Option<usize>> = pred.iter().copied().map(Some).collect();
    let t: Vec<Option<usize>> = truth.iter().copied().map(Some).collect();
    let table = build_contingency(&[(&p, &t)])?;
    Ok(match_unit("videos", &table).mof)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn runs<T: PartialEq + Copy>(xs: &[T]) -> Vec<(usize, usize, T)> {
    let mut out = Vec::new();
    let mut start = 0;
    for t in 1..=xs.len() {
        if t == xs.len() || xs[t] != xs[start] {
            out.push((start, t, xs[start]));
            start = t;
        }
    }
    out
}

/// Segment precision, recall and F1 of one video.
///
/// `pred` holds the matched action per frame (`None` for an unmatched
/// cluster). Frames where either side is missing are dropped first, then
/// segments are maximal constant runs. A ground-truth segment is recalled if
/// more than half of its frames carry its label; a predicted segment is
/// precise if more than half of its frames lie in one ground-truth segment
/// of the same label.
pub fn f1_segments(pred: &[Option<Option<usize>>], gt: &[Option<usize>]) -> Result<SegmentScore> {
    if pred.len() != gt.len() {
        return Err(CadError::InvalidInput(format!("{} vs {} frames", pred.len(), gt.len())));
    }
    let (p, g): (Vec<Option<usize>>, Vec<usize>) = pred
        .iter()
        .zip(gt)
        .filter_map(|(p, g)| Some(((*p)?, (*g)?)))
        .unzip();
    if g.is_empty() {
        return Ok(SegmentScore::default());
    }
    let gt_runs = runs(&g);
    let pred_runs = runs(&p);
    let recalled = gt_runs
        .iter()
        .filter(|&&(s, e, a)| 2 * (s..e).filter(|&t| p[t] == Some(a)).count() > e - s)
        .count();
    let precise = pred_runs
        .iter()
        .filter(|&&(s, e, l)| {
            let Some(a) = l else { return false };
            gt_runs
                .iter()
                .filter(|r| r.2 == a)
                .any(|&(gs, ge, _)| 2 * overlap(s, e, gs, ge) > e - s)
        })
        .count();
    let precision = precise as f64 / pred_runs.len() as f64;
    let recall = recalled as f64 / gt_runs.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(SegmentScore { precision, recall, f1 })
}

fn overlap(s: usize, e: usize, gs: usize, ge: usize) -> usize {
    e.min(ge).saturating_sub(s.max(gs))
}

/// Mean per-video segment scores under `report`'s matching.
pub fn f1_corpus(videos: &[EvalVideo], report: &LevelReport) -> Result<SegmentScore> {
    let mut acc = SegmentScore::default();
    for (i, v) in videos.iter().enumerate() {
        let s = f1_segments(&report.mapped(i, v), &v.gt)?;
        acc.precision += s.precision;
        acc.recall += s.recall;
        acc.f1 += s.f1;
    }
    let n = videos.len().max(1) as f64;
    Ok(SegmentScore {
        precision: acc.precision / n,
        recall: acc.recall / n,
        f1: acc.f1 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn some(xs: &[usize]) -> Vec<Option<usize>> {
        xs.iter().copied().map(Some).collect()
    }

    fn video(id: &str, activity: usize, pred: &[usize], gt: &[usize]) -> EvalVideo {
        EvalVideo {
            id: id.into(),
            activity,
            pred: some(pred),
            gt: some(gt),
        }
    }

    #[test]
    fn contingency_counts() {
        let t = build_contingency(&[(&some(&[0, 0, 1]), &some(&[0, 1, 1]))]).unwrap();
        assert_eq!(t.counts, vec![vec![1, 1], vec![0, 1]]);
        assert_eq!(t.total(), 3);
        let d = build_contingency(&[(&some(&[2, 0, 1, 2]), &some(&[2, 0, 1, 2]))]).unwrap();
        assert_eq!(d.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 2]]);
        assert!(build_contingency(&[(&some(&[0]), &some(&[0, 1]))]).is_err());
    }

    #[test]
    fn background_is_not_counted() {
        let pred = vec![Some(0), None, Some(1)];
        let gt = vec![Some(0), Some(0), None];
        assert_eq!(build_contingency(&[(&pred, &gt)]).unwrap().total(), 1);
    }

    #[test]
    fn perfect_predictions() {
        let vs = [video("a", 0, &[3, 3, 1, 1], &[0, 0, 1, 1])];
        for scope in [Scope::Video, Scope::Activity, Scope::Global] {
            let r = match_at_level(&vs, scope).unwrap();
            assert_eq!((r.mof, r.mop, r.moc), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn moc_penalizes_a_missed_small_class() {
        let mut pred = vec![0; 110];
        let mut gt = vec![0; 100];
        gt.extend([1; 10]);
        pred[100..].fill(0);
        let r = match_at_level(&[video("v", 0, &pred, &gt)], Scope::Global).unwrap();
        assert!((r.mof - 100.0 / 110.0).abs() < 1e-12);
        assert!((r.moc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn video_scope_can_beat_activity_scope() {
        // the same cluster means action 0 in one video and action 1 in the other
        let vs = [video("v1", 0, &[0, 0], &[0, 0]), video("v2", 0, &[0, 0], &[1, 1])];
        let v = match_at_level(&vs, Scope::Video).unwrap();
        let a = match_at_level(&vs, Scope::Activity).unwrap();
        assert_eq!(v.mof, 1.0);
        assert_eq!(a.mof, 0.5);
    }

    #[test]
    fn single_video_video_equals_global() {
        let vs = [video("v", 2, &[0, 1, 1, 2, 0], &[1, 1, 0, 0, 2])];
        let v = match_at_level(&vs, Scope::Video).unwrap();
        let g = match_at_level(&vs, Scope::Global).unwrap();
        assert_eq!(v.mof, g.mof);
    }

    #[test]
    fn scope_parsing() {
        assert_eq!("activity".parse::<Scope>().unwrap(), Scope::Activity);
        assert!("frame".parse::<Scope>().is_err());
    }

    #[test]
    fn empty_evaluation_is_rejected() {
        let vs = [EvalVideo { id: "x".into(), activity: 0, pred: vec![None], gt: vec![Some(0)] }];
        assert!(match_at_level(&vs, Scope::Global).is_err());
    }

    #[test]
    fn mov_examples() {
        assert_eq!(mean_over_videos(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(mean_over_videos(&[0, 0, 0, 0], &[0, 0, 0, 1]).unwrap(), 0.75);
    }

    fn mapped(xs: &[Option<usize>]) -> Vec<Option<Option<usize>>> {
        xs.iter().map(|&x| Some(x)).collect()
    }

    #[test]
    fn f1_hand_cases() {
        let gt = some(&[0, 0, 0, 0, 1, 1, 1, 1]);
        let same = f1_segments(&mapped(&gt), &gt).unwrap();
        assert_eq!(same.f1, 1.0);

        // correct halves plus two spurious runs: 50% is not a majority, so no
        // ground-truth segment is recalled while two of four runs are precise
        let pred = [Some(0), Some(0), Some(5), Some(5), Some(1), Some(1), None, None];
        let s = f1_segments(&mapped(&pred), &gt).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.5, 0.0, 0.0));

        // three of four frames right in each segment
        let pred = [Some(0), Some(0), Some(0), Some(1), Some(1), Some(1), Some(1), Some(1)];
        let s = f1_segments(&mapped(&pred), &gt).unwrap();
        assert_eq!((s.precision, s.recall), (1.0, 1.0));

        let none = f1_segments(&mapped(&[Some(3); 8]), &gt).unwrap();
        assert_eq!(none.f1, 0.0);
    }

    fn corpus_strategy() -> impl Strategy<Value = Vec<EvalVideo>> {
        proptest::collection::vec(
            (0usize..3, proptest::collection::vec((0usize..5, 0usize..4), 1..15)),
            1..7,
        )
        .prop_map(|vs| {
            vs.into_iter()
                .enumerate()
                .map(|(i, (a, frames))| {
                    let (p, g): (Vec<usize>, Vec<usize>) = frames.into_iter().unzip();
                    video(&format!("v{i}"), a, &p, &g)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn scopes_nest(vs in corpus_strategy()) {
            let v = match_at_level(&vs, Scope::Video).unwrap().mof;
            let a = match_at_level(&vs, Scope::Activity).unwrap().mof;
            let g = match_at_level(&vs, Scope::Global).unwrap().mof;
            prop_assert!(v >= a - 1e-12 && a >= g - 1e-12, "{v} {a} {g}");
        }

        #[test]
        fn relabeling_clusters_keeps_mof(vs in corpus_strategy(), shift in 1usize..5) {
            let relabeled: Vec<EvalVideo> = vs.iter().map(|v| EvalVideo {
                pred: v.pred.iter().map(|p| p.map(|c| (c + shift) % 5 + 10)).collect(),
                ..v.clone()
            }).collect();
            for scope in [Scope::Video, Scope::Activity, Scope::Global] {
                let a = match_at_level(&vs, scope).unwrap();
                let b = match_at_level(&relabeled, scope).unwrap();
                prop_assert_eq!(a.mof, b.mof);
                prop_assert!(a.moc <= 1.0 && a.mop <= 1.0);
            }
        }
    }
}
