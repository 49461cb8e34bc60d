//! Unsupervised baseline: bag-of-words histograms of raw frames clustered
//! into pseudo-activities, scored by matching them to the true activities.

use cad::data::{generate_corpus, CorpusSpec};
use cad::matching::bow_pseudo_activities;

fn main() -> cad::Result<()> {
    let spec = CorpusSpec::default();
    let (corpus, _) = generate_corpus(&spec)?;
    for k_frames in [4, 10, 20] {
        let r = bow_pseudo_activities(&corpus, k_frames, corpus.classes(), 0)?;
        println!("{k_frames:>2} codewords: MoV {:.3}", r.mov);
    }
    Ok(())
}
