//! Co-state gradients against central finite differences, for each
//! nonlinearity that has a derivative everywhere.
//!
//! $ cargo run --example gradcheck

use brnn::loss::{LossWeights, StateLossKind};
use brnn::model::{Dims, Nonlinearity};
use brnn::verify::{GradCheckInstance, DEFAULT_EPS};

fn main() -> brnn::Result<()> {
    let dims = Dims::new(4, 2, 2, 10)?;
    let w = LossWeights {
        beta: 0.1,
        beta0: 0.05,
        gamma1: 0.01,
        gamma2: 0.01,
        state_loss_kind: StateLossKind::TanhApprox,
        alpha_ent: 2.0,
    };
    for sigma in [
        Nonlinearity::Tanh,
        Nonlinearity::Logistic,
        Nonlinearity::Identity,
    ] {
        let inst = GradCheckInstance::random(&dims, sigma, w, 1);
        let report = inst.check(DEFAULT_EPS, 1e-5)?;
        println!("sigma = {sigma}");
        println!("{report}\n");
    }

    // L1 has a kink at zero, so the oracle refuses it
    let l1 = LossWeights {
        state_loss_kind: StateLossKind::L1,
        ..w
    };
    let inst = GradCheckInstance::random(&dims, Nonlinearity::Tanh, l1, 1);
    match inst.check(DEFAULT_EPS, 1e-5) {
        Ok(_) => println!("l1 unexpectedly accepted"),
        Err(e) => println!("l1 state loss: {e}"),
    }
    Ok(())
}
