//! Generate the default synthetic corpus, train N = 10 prototypes and report
//! matching scores at the global and activity level.
//!
//!     cargo run --release --example train_and_segment -- [epochs] [seed]

use cad::data::{generate_corpus, CorpusSpec};
use cad::inference::{InferConfig, SegmentMode};
use cad::losses::LossConfig;
use cad::matching::Scope;
use cad::model::ModelConfig;
use cad::pipeline;
use cad::trainer::{TrainConfig, Trainer};

fn main() -> cad::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(240, |s| s.parse().expect("epochs"));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));

    let spec = CorpusSpec::default();
    let (corpus, _) = generate_corpus(&spec)?;
    let model = ModelConfig::new(spec.feature_dim, 10, spec.activities);
    let train = TrainConfig { epochs, seed, ..TrainConfig::default() };
    let start = std::time::Instant::now();
    let out = Trainer::new(model, train, LossConfig::default()).run_with(&corpus, |s| {
        if (s.epoch + 1) % 40 == 0 {
            println!(
                "epoch {:>3}  total {:.4}  prototype {:.4}  visual {:.4}  smoothing {:.4}",
                s.epoch + 1,
                s.total,
                s.prototype_cls,
                s.visual_cls,
                s.smoothing
            );
        }
    })?;
    println!("trained in {:.1?}", start.elapsed());

    let aff = pipeline::corpus_affinities(&corpus, &out.checkpoint.params, 1)?;
    let global = InferConfig { mode: SegmentMode::Global, ..InferConfig::default() };
    let g = pipeline::evaluate(&corpus, &aff, &global, Scope::Global)?;
    let a = pipeline::evaluate(&corpus, &aff, &InferConfig::default(), Scope::Activity)?;
    println!("global   MoF {:.3}  MoP {:.3}  MoC {:.3}", g.mof, g.mop, g.moc);
    println!("activity MoF {:.3}  MoP {:.3}  MoC {:.3}  (sigma 5, decoded)", a.mof, a.mop, a.moc);
    for u in &g.units {
        for (c, m) in &u.assignment {
            print!("P{}->a{} ", c + 1, m + 1);
        }
        println!();
    }
    Ok(())
}
