//! Train on 80% of the corpus and recognize the activity of the held-out
//! videos with each head and their average.
//!
//!     cargo run --release --example activity_recognition -- [epochs]

use cad::data::{generate_corpus, CorpusSpec};
use cad::losses::LossConfig;
use cad::model::ModelConfig;
use cad::pipeline;
use cad::trainer::{TrainConfig, Trainer};

fn main() -> cad::Result<()> {
    let epochs = std::env::args().nth(1).map_or(240, |s| s.parse().expect("epochs"));
    let spec = CorpusSpec::default();
    let (corpus, _) = generate_corpus(&spec)?;
    let (train_idx, test_idx) = corpus.split_indices(0.2, 0);
    let (train_set, test_set) = (corpus.subset(&train_idx), corpus.subset(&test_idx));

    let model = ModelConfig::new(spec.feature_dim, 10, spec.activities);
    let train = TrainConfig { epochs, ..TrainConfig::default() };
    let ck = Trainer::new(model, train, LossConfig::default()).run(&train_set)?.checkpoint;

    for (wp, wg) in [(1.0, 0.0), (0.0, 1.0), (0.5, 0.5)] {
        let recs = pipeline::recognize_corpus(&test_set, &ck.params, wp, wg, 1)?;
        let (acc, _, _) = pipeline::recognition_accuracy(&recs);
        println!("wp {wp:.1} wg {wg:.1}: accuracy {acc:.3} on {} held-out videos", recs.len());
    }
    Ok(())
}
