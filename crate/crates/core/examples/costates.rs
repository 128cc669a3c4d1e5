//! How co-states shrink or grow on their way back from the final step.
//!
//! Only the final error is nonzero here, so `λ[k]` is `λ[N]` pushed back
//! through the step Jacobians `(A + U diag σ'(x[k]))ᵀ`.
//!
//! $ cargo run --example costates

use brnn::adjoint::backward_costates;
use brnn::loss::LossWeights;
use brnn::model::{forward, BrnnParams, Nonlinearity, Sequence};
use brnn::{BrnnError, DMatrix, DVector};

fn final_error_only(p: &BrnnParams, horizon: usize) -> brnn::Result<Vec<f64>> {
    let zeros = vec![DVector::zeros(1); horizon + 1];
    let x0 = DVector::from_element(p.n(), 0.1);
    let probe = Sequence::new(zeros.clone(), zeros.clone())?;
    let mut d = forward(p, &probe, &x0)?.y;
    d[horizon][0] -= 1.0;
    let seq = Sequence::new(zeros, d)?;
    let traj = forward(p, &seq, &x0)?;
    let lam = backward_costates(p, &traj, &LossWeights::default())?;
    Ok(lam.lambda[1..].iter().map(|l| l.norm()).collect())
}

fn scalar(a: f64, u: f64, sigma: Nonlinearity) -> BrnnParams {
    let mut p = BrnnParams::zeros(1, 1, 1, sigma);
    p.a = DMatrix::from_element(1, 1, a);
    p.u = DMatrix::from_element(1, 1, u);
    p.v = DMatrix::from_element(1, 1, 1.0);
    p
}

fn main() -> brnn::Result<()> {
    let horizon = 10;
    let cases = [
        (
            "contractive  a=0.5 u=0.3 tanh",
            scalar(0.5, 0.3, Nonlinearity::Tanh),
        ),
        (
            "neutral      a=0.5 u=0.5 identity",
            scalar(0.5, 0.5, Nonlinearity::Identity),
        ),
        (
            "expansive    a=0   u=3   identity",
            scalar(0.0, 3.0, Nonlinearity::Identity),
        ),
    ];
    for (name, p) in &cases {
        let norms = final_error_only(p, horizon)?;
        let ratio = norms[0] / norms[horizon - 1];
        println!("{name}: |λ1|/|λN| = {ratio:.6e}");
    }

    // over a long horizon the expansive state itself overflows
    let p = scalar(0.0, 3.0, Nonlinearity::Identity);
    let zeros = vec![DVector::zeros(1); 801];
    let seq = Sequence::new(zeros.clone(), zeros)?;
    match forward(&p, &seq, &DVector::from_element(1, 1.0)) {
        Err(e @ BrnnError::Overflow { .. }) => println!("N=800: {e}"),
        other => println!("N=800: {:?}", other.map(|t| t.x.len())),
    }
    Ok(())
}
