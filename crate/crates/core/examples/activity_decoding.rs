//! Activity-level segmentation ablation: naive relabeling, Viterbi decoding
//! and Gaussian smoothing with several widths.
//!
//!     cargo run --release --example activity_decoding -- [epochs]

use cad::data::{generate_corpus, CorpusSpec};
use cad::inference::InferConfig;
use cad::losses::LossConfig;
use cad::matching::Scope;
use cad::model::ModelConfig;
use cad::pipeline;
use cad::trainer::{TrainConfig, Trainer};

fn main() -> cad::Result<()> {
    let epochs = std::env::args().nth(1).map_or(240, |s| s.parse().expect("epochs"));
    let spec = CorpusSpec::default();
    let (corpus, _) = generate_corpus(&spec)?;
    let model = ModelConfig::new(spec.feature_dim, 10, spec.activities);
    let train = TrainConfig { epochs, ..TrainConfig::default() };
    let ck = Trainer::new(model, train, LossConfig::default()).run(&corpus)?.checkpoint;
    let aff = pipeline::corpus_affinities(&corpus, &ck.params, 1)?;

    let naive = InferConfig { smooth: false, decode: false, ..InferConfig::default() };
    let mut rows = vec![("naive".to_string(), naive), ("decode".into(), InferConfig { decode: true, ..naive })];
    for sigma in [3.0, 5.0, 10.0] {
        rows.push((format!("decode, sigma {sigma}"), InferConfig { sigma, ..InferConfig::default() }));
    }
    for (name, cfg) in rows {
        let r = pipeline::evaluate(&corpus, &aff, &cfg, Scope::Activity)?;
        println!("{name:<18} MoF {:.3}  MoC {:.3}", r.mof, r.moc);
    }
    Ok(())
}
