//! Cost function and the state-loss forcing terms of the co-state recursion.
//!
//! ```text
//! J = ½‖e[N]‖² + Σ_{k<N} ( ½‖e[k]‖² + β P(x[k]) + β0 P(h[k]) + γ1 ½‖θ‖² )
//!              + Σ_{k≤N} γ2 ½‖ν‖²
//! ```
//!
//! `P` is the state penalty: the L1 norm, the smooth surrogate
//! `Σ x·tanh(α x)`, or nothing. The regularizers are charged once per step,
//! so over an epoch their effective weights are `N γ1` and `(N+1) γ2`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{BrnnError, Result};
use crate::model::{BrnnParams, Sequence, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateLossKind {
    /// `‖x‖₁`, with subgradient `sign(x)` and `sign(0) = 0`.
    L1,
    /// `Σ_j x_j tanh(α x_j)`, a smooth even stand-in for the L1 norm.
    TanhApprox,
    None,
}

impl StateLossKind {
    pub fn name(self) -> &'static str {
        match self {
            StateLossKind::L1 => "l1",
            StateLossKind::TanhApprox => "tanh_approx",
            StateLossKind::None => "none",
        }
    }
}

impl fmt::Display for StateLossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StateLossKind {
    type Err = BrnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(StateLossKind::L1),
            "tanh_approx" | "tanh" => Ok(StateLossKind::TanhApprox),
            "none" => Ok(StateLossKind::None),
            other => Err(BrnnError::Config(format!("unknown state loss '{other}'"))),
        }
    }
}

/// Hyper-parameters of the cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight on the state penalty `P(x[k])`.
    pub beta: f64,
    /// Weight on the hidden penalty `P(h[k])`.
    pub beta0: f64,
    /// State-equation regularizer weight.
    pub gamma1: f64,
    /// Output-equation regularizer weight.
    pub gamma2: f64,
    pub state_loss_kind: StateLossKind,
    /// Sharpness of the tanh surrogate, in `(1, 3]`.
    pub alpha_ent: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            beta: 0.0,
            beta0: 0.0,
            gamma1: 0.0,
            gamma2: 0.0,
            state_loss_kind: StateLossKind::None,
            alpha_ent: 2.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta", self.beta),
            ("beta0", self.beta0),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(BrnnError::Config(format!("{name}={v} must lie in [0, 1]")));
            }
        }
        if !(self.alpha_ent > 1.0 && self.alpha_ent <= 3.0) {
            return Err(BrnnError::Config(format!(
                "alpha_ent={} must lie in (1, 3]",
                self.alpha_ent
            )));
        }
        Ok(())
    }
}

/// The pieces of `J`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub phi_n: f64,
    pub output_sum: f64,
    pub state_sum: f64,
    pub hidden_sum: f64,
    pub reg_theta: f64,
    pub reg_nu: f64,
    pub total: f64,
}

/// `P(v)` for the chosen penalty.
pub fn state_penalty(kind: StateLossKind, alpha_ent: f64, v: &DVector<f64>) -> f64 {
    match kind {
        StateLossKind::L1 => v.iter().map(|x| x.abs()).sum(),
        StateLossKind::TanhApprox => v.iter().map(|&x| x * (alpha_ent * x).tanh()).sum(),
        StateLossKind::None => 0.0,
    }
}

/// `∂P/∂v` elementwise.
pub fn state_penalty_grad(kind: StateLossKind, alpha_ent: f64, v: &DVector<f64>) -> DVector<f64> {
    match kind {
        StateLossKind::L1 => v.map(|x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }),
        StateLossKind::TanhApprox => v.map(|x| {
            let t = (alpha_ent * x).tanh();
            t + alpha_ent * x * (1.0 - t * t)
        }),
        StateLossKind::None => DVector::zeros(v.len()),
    }
}

/// Forcing term of the co-state recursion at an interior step:
/// `β ∂P(x)/∂x + β0 σ' ⊙ ∂P(h)/∂h`.
pub fn state_loss_grad(
    w: &LossWeights,
    x_k: &DVector<f64>,
    h_k: &DVector<f64>,
    sigma_prime_k: &DVector<f64>,
) -> DVector<f64> {
    let n = x_k.len();
    if w.state_loss_kind == StateLossKind::None {
        return DVector::zeros(n);
    }
    let mut g = DVector::zeros(n);
    if w.beta != 0.0 {
        g += state_penalty_grad(w.state_loss_kind, w.alpha_ent, x_k) * w.beta;
    }
    if w.beta0 != 0.0 {
        let gh = state_penalty_grad(w.state_loss_kind, w.alpha_ent, h_k);
        g += gh.component_mul(sigma_prime_k) * w.beta0;
    }
    g
}

/// Evaluates `J` along a trajectory.
pub fn total_cost(
    traj: &Trajectory,
    seq: &Sequence,
    params: &BrnnParams,
    w: &LossWeights,
) -> Result<CostBreakdown> {
    let steps = seq.s.len();
    if traj.x.len() != steps || traj.e.len() != steps || traj.h.len() != steps {
        return Err(BrnnError::dim("trajectory length", steps, traj.x.len()));
    }
    let big_n = steps - 1;

    let phi_n = 0.5 * traj.e[big_n].norm_squared();
    let output_sum: f64 = traj.e[..big_n].iter().map(|e| 0.5 * e.norm_squared()).sum();

    let (kind, alpha) = (w.state_loss_kind, w.alpha_ent);
    let state_sum = if w.beta != 0.0 {
        w.beta
            * traj.x[..big_n]
                .iter()
                .map(|x| state_penalty(kind, alpha, x))
                .sum::<f64>()
    } else {
        0.0
    };
    let hidden_sum = if w.beta0 != 0.0 {
        w.beta0
            * traj.h[..big_n]
                .iter()
                .map(|h| state_penalty(kind, alpha, h))
                .sum::<f64>()
    } else {
        0.0
    };
    let reg_theta = w.gamma1 * big_n as f64 * params.theta_sq_half();
    let reg_nu = w.gamma2 * steps as f64 * params.nu_sq_half();

    Ok(CostBreakdown {
        phi_n,
        output_sum,
        state_sum,
        hidden_sum,
        reg_theta,
        reg_nu,
        total: phi_n + output_sum + state_sum + hidden_sum + reg_theta + reg_nu,
    })
}
