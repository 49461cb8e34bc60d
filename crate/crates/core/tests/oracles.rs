mod common;

use cad::data::{generate_corpus, read_corpus, write_corpus, CorpusSpec};
use cad::inference::{segment_videos, InferConfig, NPrime, SegmentMode, VideoAffinity};
use cad::matching::{
    build_contingency, hungarian_solve, kl_action_distribution, match_at_level, match_unit, EvalVideo, Scope,
};
use cad::numerics::Tensor2;
use cad::rng;
use proptest::prelude::*;

#[test]
fn every_gradient_case_is_within_tolerance() {
    for i in 0..common::GRADIENT_CASES.len() * 2 {
        let (name, err) = common::gradient_case(i);
        assert!(err <= 1e-4, "{name} (case {i}): {err:e}");
    }
}

proptest! {
    #[test]
    fn hungarian_matches_brute_force(
        w in (1..=6usize, 1..=6usize).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-20i64..40, c), r))
    ) {
        let pairs = hungarian_solve(&w);
        prop_assert_eq!(pairs.len(), w.len().min(w[0].len()));
        let mut rows: Vec<_> = pairs.iter().map(|p| p.0).collect();
        let mut cols: Vec<_> = pairs.iter().map(|p| p.1).collect();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(rows.len(), pairs.len());
        prop_assert_eq!(cols.len(), pairs.len());
        let got: i64 = pairs.iter().map(|&(i, j)| w[i][j]).sum();
        prop_assert_eq!(got, common::brute_force_assignment(&w));
    }

    #[test]
    fn relabeling_clusters_keeps_every_metric(seed in 0u64..500) {
        let mut r = rng::seeded(seed);
        let videos = common::random_eval_corpus(&mut r);
        let k = videos.iter().flat_map(|v| v.pred.iter().flatten()).max().map_or(1, |m| m + 1);
        let mut perm: Vec<usize> = (0..k).collect();
        rng::shuffle(&mut r, &mut perm);
        let relabeled: Vec<EvalVideo> = videos
            .iter()
            .map(|v| EvalVideo { pred: v.pred.iter().map(|p| p.map(|c| perm[c])).collect(), ..v.clone() })
            .collect();
        let pairs: Vec<_> = videos.iter().map(|v| (&v.pred[..], &v.gt[..])).collect();
        let table = build_contingency(&pairs).unwrap();
        let a = match_at_level(&videos, Scope::Global).unwrap();
        let b = match_at_level(&relabeled, Scope::Global).unwrap();
        prop_assert!((a.mof - b.mof).abs() < 1e-12);
        // MoP and MoC depend on which optimum is picked; compare them only then
        if common::optimal_assignment_count(&table.counts) == 1 {
            prop_assert!((a.mop - b.mop).abs() < 1e-12);
            prop_assert!((a.moc - b.moc).abs() < 1e-12);
        }
    }

    #[test]
    fn finer_scopes_never_score_lower(seed in 0u64..500) {
        let videos = common::random_eval_corpus(&mut rng::seeded(seed));
        let v = match_at_level(&videos, Scope::Video).unwrap();
        let a = match_at_level(&videos, Scope::Activity).unwrap();
        let g = match_at_level(&videos, Scope::Global).unwrap();
        prop_assert!(v.mof + 1e-12 >= a.mof && a.mof + 1e-12 >= g.mof);
        prop_assert_eq!(v.frames, g.frames);
    }
}

#[test]
fn perfect_prediction_scores_one_at_every_scope() {
    let gt: Vec<Option<usize>> = [0, 0, 1, 1, 2, 2, 2].iter().map(|&a| Some(a)).collect();
    let pred: Vec<Option<usize>> = [5, 5, 3, 3, 4, 4, 4].iter().map(|&a| Some(a)).collect();
    let videos = vec![
        EvalVideo { id: "a".into(), activity: 0, pred: pred.clone(), gt: gt.clone() },
        EvalVideo { id: "b".into(), activity: 1, pred, gt },
    ];
    for scope in [Scope::Video, Scope::Activity, Scope::Global] {
        let r = match_at_level(&videos, scope).unwrap();
        assert_eq!((r.mof, r.mop, r.moc), (1.0, 1.0, 1.0), "{scope}");
    }
}

#[test]
fn over_clustering_halves_every_metric() {
    // 2 actions split over 4 clusters
    let gt: Vec<Option<usize>> = [0, 0, 0, 0, 1, 1, 1, 1].iter().map(|&a| Some(a)).collect();
    let pred: Vec<Option<usize>> = [0, 0, 1, 1, 2, 2, 3, 3].iter().map(|&a| Some(a)).collect();
    let table = build_contingency(&[(&pred, &gt)]).unwrap();
    let r = match_unit("u", &table);
    assert_eq!(r.correct, 4);
    assert_eq!(r.mof, 0.5);
    assert_eq!(r.moc, 0.5);
    assert_eq!(r.mop, 0.5);
}

#[test]
fn kl_of_identical_and_disjoint_activities() {
    let a: Vec<Option<usize>> = vec![Some(0), Some(1), Some(0), Some(1)];
    let b: Vec<Option<usize>> = vec![Some(2), Some(2), Some(3), Some(3)];
    let pairs = [(&a[..], &a[..]), (&b[..], &b[..])];
    let kl = kl_action_distribution(&pairs, &[0, 1, 2, 3]).unwrap();
    assert!(kl.abs() < 1e-12);
    let cross = [(&a[..], &b[..])];
    assert!(kl_action_distribution(&cross, &[0, 1, 2, 3]).unwrap() > 5.0);
}

#[test]
fn corpus_round_trips_through_files() {
    let spec = CorpusSpec {
        videos_per_activity: 2,
        frames: (10, 20),
        feature_dim: 5,
        background_ratio: 0.1,
        drop_prob: 0.3,
        ..CorpusSpec::default()
    };
    let (corpus, truth) = generate_corpus(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_corpus(&corpus, dir.path()).unwrap();
    let back = read_corpus(&manifest).unwrap();
    assert_eq!(back.videos.len(), corpus.videos.len());
    for (x, y) in corpus.videos.iter().zip(&back.videos) {
        assert_eq!(x.video_id, y.video_id);
        assert_eq!(x.activity, y.activity);
        assert_eq!(x.gt_actions, y.gt_actions);
        // features are stored as f32
        assert!(x.features.max_abs_diff(&y.features) < 1e-5 * (1.0 + x.features.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))));
    }
    for (v, acts) in corpus.videos.iter().zip(&truth.video_actions) {
        let plan = &truth.plans[v.activity].actions;
        assert_eq!(acts[0], plan[0]);
        assert!(acts.iter().all(|a| plan.contains(a)));
        let seen: Vec<usize> = v.gt_actions.as_ref().unwrap().iter().flatten().copied().collect();
        assert!(seen.iter().all(|a| acts.contains(a)));
        assert!(seen.windows(2).all(|w| {
            let i = acts.iter().position(|a| *a == w[0]).unwrap();
            let j = acts.iter().position(|a| *a == w[1]).unwrap();
            j == i || j == i + 1
        }));
    }
}

#[test]
fn generated_corpus_has_the_requested_sharing() {
    let (_, truth) = generate_corpus(&CorpusSpec::default()).unwrap();
    let mut owners = vec![0; truth.spec.actions];
    for plan in &truth.plans {
        for &a in &plan.actions {
            owners[a] += 1;
        }
    }
    assert_eq!(owners.iter().filter(|&&n| n >= 2).count(), truth.spec.shared_actions);
    assert!(owners.iter().all(|&n| n >= 1));
}

#[test]
fn activity_mode_without_ground_truth_needs_fixed_nprime() {
    let a = Tensor2::from_rows(&[[0.7, 0.2, 0.1], [0.1, 0.8, 0.1]]);
    let inputs = [VideoAffinity { activity: 0, affinity: &a, gt: None }];
    assert!(segment_videos(&inputs, &InferConfig::default()).is_err());
    let cfg = InferConfig { nprime: NPrime::Fixed(2), smooth: false, ..InferConfig::default() };
    let seg = segment_videos(&inputs, &cfg).unwrap();
    assert_eq!(seg.labelings[0].labels, vec![0, 1]);
    let global = InferConfig { mode: SegmentMode::Global, decode: false, smooth: false, ..InferConfig::default() };
    assert_eq!(segment_videos(&inputs, &global).unwrap().labelings[0].labels, vec![0, 1]);
}
