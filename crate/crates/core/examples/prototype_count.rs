//! Global MoF and MoC for prototype counts around the true number of actions.
//!
//!     cargo run --release --example prototype_count -- [epochs]

use cad::data::{generate_corpus, CorpusSpec};
use cad::inference::{InferConfig, SegmentMode};
use cad::losses::LossConfig;
use cad::matching::Scope;
use cad::model::ModelConfig;
use cad::pipeline;
use cad::trainer::{TrainConfig, Trainer};

fn main() -> cad::Result<()> {
    let epochs = std::env::args().nth(1).map_or(240, |s| s.parse().expect("epochs"));
    let spec = CorpusSpec::default();
    let (corpus, _) = generate_corpus(&spec)?;
    let global = InferConfig { mode: SegmentMode::Global, ..InferConfig::default() };
    for n in [6, 8, 10, 12, 14] {
        let model = ModelConfig::new(spec.feature_dim, n, spec.activities);
        let train = TrainConfig { epochs, ..TrainConfig::default() };
        let ck = Trainer::new(model, train, LossConfig::default()).run(&corpus)?.checkpoint;
        let aff = pipeline::corpus_affinities(&corpus, &ck.params, 1)?;
        let r = pipeline::evaluate(&corpus, &aff, &global, Scope::Global)?;
        println!("N = {n:>2}: MoF {:.3}  MoC {:.3}", r.mof, r.moc);
    }
    Ok(())
}
