//! Generate a synthetic corpus, write it to disk and print how actions are
//! shared between activities.
//!
//!     cargo run --example generate_corpus -- [out_dir]

use cad::data::{generate_corpus, read_corpus, write_corpus, CorpusSpec};

fn main() -> cad::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "synthetic_corpus".into());
    let spec = CorpusSpec::default();
    let (corpus, truth) = generate_corpus(&spec)?;

    for (a, plan) in truth.plans.iter().enumerate() {
        let names: Vec<String> = plan.actions.iter().map(|x| format!("a{}", x + 1)).collect();
        println!("{:<12} {}", corpus.activity_names[a], names.join(" -> "));
    }
    println!("shared actions per activity pair:");
    for a in 0..corpus.classes() {
        let row: Vec<String> = (0..corpus.classes()).map(|b| truth.shared_between(a, b).to_string()).collect();
        println!("  {}", row.join(" "));
    }

    let manifest = write_corpus(&corpus, dir.as_ref())?;
    let back = read_corpus(&manifest)?;
    assert_eq!(back, corpus);
    let frames: usize = corpus.videos.iter().map(|v| v.frames()).sum();
    println!("{} videos, {frames} frames, round-trip ok: {}", corpus.videos.len(), manifest.display());
    Ok(())
}
