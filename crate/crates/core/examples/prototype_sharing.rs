//! Symmetric KL divergence between the activities' prototype distributions,
//! next to the number of actions each pair shares.
//!
//!     cargo run --release --example prototype_sharing -- [epochs]

use cad::data::{generate_corpus, CorpusSpec};
use cad::losses::LossConfig;
use cad::matching::{kl_prototype_sharing, prototype_distributions};
use cad::model::ModelConfig;
use cad::pipeline;
use cad::trainer::{TrainConfig, Trainer};

fn main() -> cad::Result<()> {
    let epochs = std::env::args().nth(1).map_or(240, |s| s.parse().expect("epochs"));
    let spec = CorpusSpec::default();
    let (corpus, truth) = generate_corpus(&spec)?;
    let model = ModelConfig::new(spec.feature_dim, 10, spec.activities);
    let train = TrainConfig { epochs, ..TrainConfig::default() };
    let ck = Trainer::new(model, train, LossConfig::default()).run(&corpus)?.checkpoint;

    let aff = pipeline::corpus_affinities(&corpus, &ck.params, 1)?;
    let labels: Vec<Vec<usize>> = aff.iter().map(|a| a.argmax_rows()).collect();
    let pairs: Vec<(usize, &[usize])> = corpus.videos.iter().zip(&labels).map(|(v, l)| (v.activity, &l[..])).collect();
    let dists = prototype_distributions(&pairs, corpus.classes(), model.prototypes);
    let kl = kl_prototype_sharing(&dists)?;

    println!("pair   shared  KL");
    for a in 0..corpus.classes() {
        for b in a + 1..corpus.classes() {
            println!("{}-{}    {}       {:.4}", a + 1, b + 1, truth.shared_between(a, b), kl.symmetric[a][b]);
        }
    }
    Ok(())
}
