//! Train an 8-state network to predict the next sample of a sine wave.
//!
//! $ cargo run --release --example train_sine

use brnn::cli::DEFAULT_OMEGA;
use brnn::loss::LossWeights;
use brnn::model::{forward, Dims, Nonlinearity};
use brnn::tasks::{gen_task, TaskSpec};
use brnn::trainer::{init_params, train, Aggregation, TrainConfig};
use brnn::DVector;

fn main() -> brnn::Result<()> {
    let horizon = 50;
    let seq = gen_task(&TaskSpec::sine(horizon, DEFAULT_OMEGA))?;
    let config = TrainConfig {
        eta: 0.01,
        epochs: 5000,
        aggregation: Aggregation::Sum,
        ..TrainConfig::default()
    };
    let dims = Dims::new(8, 1, 1, horizon)?;
    let p0 = init_params(
        &dims,
        Nonlinearity::Tanh,
        config.init_scale,
        config.alpha_a,
        config.seed,
    );
    let x0 = DVector::zeros(8);
    let (p, history) = train(&config, &seq, &p0, &x0, &LossWeights::default())?;

    println!(
        "{:>6} {:>12} {:>12} {:>12}",
        "epoch", "cost", "grad_norm", "lambda_max"
    );
    for m in history
        .iter()
        .filter(|m| m.epoch == 1 || m.epoch % 500 == 0)
    {
        println!(
            "{:>6} {:>12.6} {:>12.4e} {:>12.4e}",
            m.epoch, m.cost.total, m.grad_norm, m.lambda_max
        );
    }

    let traj = forward(&p, &seq, &x0)?;
    println!("\nlast ten steps (target, prediction)");
    for k in horizon - 9..=horizon {
        println!("{k:>3} {:>9.5} {:>9.5}", seq.d[k][0], traj.y[k][0]);
    }
    Ok(())
}
