//! The four aggregation rules side by side: how far each lies from the true
//! gradient, and how training fares with each.
//!
//! $ cargo run --release --example aggregation_modes

use brnn::loss::{LossWeights, StateLossKind};
use brnn::model::{Dims, Nonlinearity};
use brnn::tasks::{gen_task, TaskSpec};
use brnn::trainer::{init_params, train, Aggregation, TrainConfig};
use brnn::verify::{adjoint_gradient, compare_gradients, numeric_gradient, GradCheckInstance};
use brnn::DVector;

const MODES: [Aggregation; 4] = [
    Aggregation::Sum,
    Aggregation::Mean,
    Aggregation::Median,
    Aggregation::MinAbs,
];

fn main() -> brnn::Result<()> {
    let dims = Dims::new(4, 2, 2, 16)?;
    let w = LossWeights {
        beta: 0.1,
        gamma1: 0.01,
        gamma2: 0.01,
        state_loss_kind: StateLossKind::TanhApprox,
        ..LossWeights::default()
    };
    let inst = GradCheckInstance::random(&dims, Nonlinearity::Tanh, w, 3);
    let oracle = numeric_gradient(&inst.params, &inst.seq, &inst.x0, &w, 1e-5)?;
    println!("max relative error against finite differences");
    for mode in MODES {
        let g = adjoint_gradient(&inst.params, &inst.seq, &inst.x0, &w, mode)?;
        let rep = compare_gradients(&g, &oracle, 1e-5)?;
        println!("  {:<8} {:.3e}", mode.name(), rep.max_rel());
    }

    // mean divides by the step count, so it gets a proportionally larger rate
    let horizon = 40;
    let seq = gen_task(&TaskSpec::sine(horizon, 0.25))?;
    let dims = Dims::new(6, 1, 1, horizon)?;
    let p0 = init_params(&dims, Nonlinearity::Tanh, 0.1, 0.5, 1);
    println!("\ncost after 2000 epochs on a sine task");
    for (mode, eta) in [
        (MODES[0], 0.01),
        (MODES[1], 0.4),
        (MODES[2], 0.4),
        (MODES[3], 0.4),
    ] {
        let config = TrainConfig {
            eta,
            epochs: 2000,
            aggregation: mode,
            ..TrainConfig::default()
        };
        match train(
            &config,
            &seq,
            &p0,
            &DVector::zeros(6),
            &LossWeights::default(),
        ) {
            Ok((_, h)) => println!(
                "  {:<8} eta={eta:<5} {:.4} -> {:.4e}",
                mode.name(),
                h[0].cost.total,
                h.last().unwrap().cost.total
            ),
            Err(e) => println!("  {:<8} eta={eta:<5} {e}", mode.name()),
        }
    }
    Ok(())
}
