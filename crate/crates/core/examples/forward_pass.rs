//! Roll a small network forward and print its trajectory and cost.
//!
//! $ cargo run --example forward_pass

use brnn::loss::{total_cost, LossWeights, StateLossKind};
use brnn::model::{forward, BrnnParams, Nonlinearity, Sequence};
use brnn::{DMatrix, DVector};

fn main() -> brnn::Result<()> {
    let mut p = BrnnParams::zeros(2, 1, 1, Nonlinearity::Tanh);
    p.a = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
    p.u = DMatrix::from_row_slice(2, 2, &[0.2, -0.4, 0.4, 0.2]);
    p.w = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
    p.v = DMatrix::from_row_slice(1, 2, &[1.0, 0.5]);

    let horizon = 8;
    let s = (0..=horizon)
        .map(|k| DVector::from_element(1, if k == 0 { 1.0 } else { 0.0 }))
        .collect();
    let d = vec![DVector::zeros(1); horizon + 1];
    let seq = Sequence::new(s, d)?;
    let traj = forward(&p, &seq, &DVector::zeros(2))?;

    println!("impulse response");
    println!("{:>3} {:>10} {:>10} {:>10}", "k", "x1", "x2", "y");
    for k in 0..=horizon {
        println!(
            "{k:>3} {:>10.5} {:>10.5} {:>10.5}",
            traj.x[k][0], traj.x[k][1], traj.y[k][0]
        );
    }

    let w = LossWeights {
        beta: 0.1,
        gamma1: 0.01,
        gamma2: 0.01,
        state_loss_kind: StateLossKind::TanhApprox,
        ..LossWeights::default()
    };
    let c = total_cost(&traj, &seq, &p, &w)?;
    println!();
    println!("phi_N      {:.6}", c.phi_n);
    println!("output_sum {:.6}", c.output_sum);
    println!("state_sum  {:.6}", c.state_sum);
    println!("reg_theta  {:.6}", c.reg_theta);
    println!("reg_nu     {:.6}", c.reg_nu);
    println!("total      {:.6}", c.total);
    Ok(())
}
