//! Bag-of-words video clustering used as an unsupervised activity baseline.

use rand::Rng;

use super::mean_over_videos;
use crate::data::Corpus;
use crate::error::{CadError, Result};
use crate::numerics::Tensor2;
use crate::rng;

const MAX_ITER: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub centroids: Tensor2,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centroids: &Tensor2) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.iter_rows().enumerate() {
        let d = sq_dist(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations until assignments settle.
/// An emptied cluster keeps its previous centroid.
pub fn kmeans(points: &Tensor2, k: usize, seed: u64) -> Result<KMeans> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(CadError::InvalidInput(format!("k = {k} with {n} points")));
    }
    let mut r = rng::seeded(seed);
    let mut centroids = Tensor2::zeros(k, points.cols());
    centroids.row_mut(0).copy_from_slice(points.row(rng::bounded(&mut r, n)));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = r.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng::bounded(&mut r, n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centroids.row(c)));
        }
    }

    let mut assignments = vec![usize::MAX; n];
    let mut iterations = 0;
    for _ in 0..MAX_ITER {
        iterations += 1;
        let mut changed = false;
        for (i, a) in assignments.iter_mut().enumerate() {
            let (c, _) = nearest(points.row(i), &centroids);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Tensor2::zeros(k, points.cols());
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (s, v) in sums.row_mut(a).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
    }
    Ok(KMeans {
        centroids,
        assignments,
        iterations,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BowResult {
    pub pseudo: Vec<usize>,
    pub histograms: Tensor2,
    pub mov: f64,
}

/// Clusters all frames into `k_frames` codewords, describes each video by its
/// normalized codeword histogram and clusters the histograms into
/// `c_pseudo` pseudo-activities. `mov` scores them against the true
/// activities.
pub fn bow_pseudo_activities(corpus: &Corpus, k_frames: usize, c_pseudo: usize, seed: u64) -> Result<BowResult> {
    let videos = corpus.videos.len();
    if c_pseudo == 0 || videos < c_pseudo {
        return Err(CadError::InvalidInput(format!(
            "{videos} videos cannot form {c_pseudo} pseudo-activities"
        )));
    }
    let d = corpus.feature_dim();
    let total: usize = corpus.videos.iter().map(|v| v.frames()).sum();
    let mut all = Vec::with_capacity(total * d);
    for v in &corpus.videos {
        all.extend_from_slice(v.features.values());
    }
    let frames = Tensor2::new(total, d, all)?;
    let words = kmeans(&frames, k_frames, seed)?;

    let mut histograms = Tensor2::zeros(videos, k_frames);
    let mut offset = 0;
    for (i, v) in corpus.videos.iter().enumerate() {
        let t = v.frames();
        let row = histograms.row_mut(i);
        for &w in &words.assignments[offset..offset + t] {
            row[w] += 1.0 / t as f64;
        }
        offset += t;
    }
    let groups = kmeans(&histograms, c_pseudo, seed.wrapping_add(1))?;
    let truth: Vec<usize> = corpus.videos.iter().map(|v| v.activity).collect();
    let mov = mean_over_videos(&groups.assignments, &truth)?;
    Ok(BowResult {
        pseudo: groups.assignments,
        histograms,
        mov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSequence;

    fn two_cluster_corpus() -> Corpus {
        let mut r = rng::seeded(3);
        let mut videos = Vec::new();
        for a in 0..2 {
            for v in 0..5 {
                let centre = if a == 0 { -20.0 } else { 20.0 };
                let values = (0..12).map(|_| centre + r.random::<f64>()).collect();
                let feats = Tensor2::new(6, 2, values).unwrap();
                videos.push(FeatureSequence::new(format!("{a}_{v}"), a, feats, None).unwrap());
            }
        }
        Corpus {
            name: "two".into(),
            activity_names: vec!["x".into(), "y".into()],
            videos,
        }
    }

    #[test]
    fn separated_videos_are_recovered() {
        let c = two_cluster_corpus();
        let r = bow_pseudo_activities(&c, 4, 2, 0).unwrap();
        assert_eq!(r.mov, 1.0);
        for row in r.histograms.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_pseudo_class_scores_the_largest_class() {
        let mut c = two_cluster_corpus();
        c.videos.truncate(7);
        let r = bow_pseudo_activities(&c, 3, 1, 0).unwrap();
        assert!((r.mov - 5.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_validated() {
        let c = two_cluster_corpus();
        assert_eq!(bow_pseudo_activities(&c, 4, 2, 9).unwrap(), bow_pseudo_activities(&c, 4, 2, 9).unwrap());
        assert!(bow_pseudo_activities(&c, 4, 11, 0).is_err());
    }

    #[test]
    fn kmeans_separates_obvious_groups() {
        let pts = Tensor2::from_rows(&[[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.1, 10.0]]);
        let km = kmeans(&pts, 2, 0).unwrap();
        assert_eq!(km.assignments[0], km.assignments[1]);
        assert_eq!(km.assignments[2], km.assignments[3]);
        assert_ne!(km.assignments[0], km.assignments[2]);
    }
}
