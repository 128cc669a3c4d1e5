//! BIBO bound and Liapunov region for a fixed `A`, then a long rollout that
//! stays inside the bound.
//!
//! $ cargo run --release --example stability_report

use brnn::model::{forward, BrnnParams, Nonlinearity, Sequence};
use brnn::rng::SplitMix64;
use brnn::stability::{bibo_bound, make_stable_a, StabilityReport, StableScheme};
use brnn::{DMatrix, DVector};

fn main() -> brnn::Result<()> {
    let scalar = StabilityReport::new(&DMatrix::from_element(1, 1, 0.5), 1.0)?;
    println!("{scalar}");

    let n = 4;
    let mut rng = SplitMix64::new(5);
    let mut p = BrnnParams::zeros(n, 2, 1, Nonlinearity::Tanh);
    p.a = make_stable_a(n, StableScheme::RandomOrthogonalScaled, 0.8, 5)?;
    p.u = DMatrix::from_fn(n, n, |_, _| rng.symmetric(0.5));
    p.w = DMatrix::from_fn(n, 2, |_, _| rng.symmetric(0.5));
    let report = StabilityReport::for_params(&p, 1.0, None)?;
    println!("{report}");

    let steps = 5000;
    let s = (0..steps)
        .map(|_| {
            let v = DVector::from_fn(2, |_, _| rng.symmetric(1.0));
            &v / v.norm().max(1.0)
        })
        .collect();
    let seq = Sequence::new(s, vec![DVector::zeros(1); steps])?;
    let traj = forward(&p, &seq, &DVector::zeros(n))?;
    let peak = traj.x.iter().map(|x| x.norm()).fold(0.0, f64::max);
    println!(
        "largest |x| over {steps} steps: {peak:.4} (bound {:.4})",
        bibo_bound(&p, 1.0)?
    );
    Ok(())
}
