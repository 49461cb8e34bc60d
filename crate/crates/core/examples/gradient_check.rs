//! Central finite differences against the tape gradients of the full
//! training loss on a small random video.

use cad::losses::LossConfig;
use cad::model::{record_loss, ModelConfig, ModelParameters};
use cad::numerics::{finite_diff_check, Tensor2, FD_STEP};
use cad::rng;
use rand::Rng;

fn main() -> cad::Result<()> {
    let mut r = rng::seeded(11);
    let config = ModelConfig { embed_dim: 4, ..ModelConfig::new(5, 3, 2) };
    let params = ModelParameters::init(config, &mut r)?;
    let features = Tensor2::new(6, 5, (0..30).map(|_| r.random_range(-1.0..1.0)).collect())?;
    let loss = LossConfig::default();

    let inputs: Vec<Tensor2> = params.tensors().iter().map(|t| (*t).clone()).collect();
    let check = finite_diff_check(
        |tape, vars| record_loss(tape, vars, &config, &features, 1, &loss),
        &inputs,
        FD_STEP,
    )?;
    println!(
        "{} coordinates, max relative error {:.2e}, worst at {:?}",
        check.coordinates, check.max_rel_error, check.worst
    );
    Ok(())
}
