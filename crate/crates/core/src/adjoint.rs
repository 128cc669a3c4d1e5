//! Co-state (Lagrange multiplier) recursion and per-step gradient terms.
//!
//! With `D_k = diag(σ'(x[k]))` the co-states run backward from
//!
//! ```text
//! λ[N] = D_N Vᵀ e[N]
//! λ[k] = (A + U D_k)ᵀ λ[k+1] + D_k Vᵀ e[k] + β ∂P(x[k]) + β0 D_k ∂P(h[k])    0 < k < N
//! ```
//!
//! and each step contributes `λ[k+1] h[k]ᵀ`, `λ[k+1] s[k]ᵀ`, `λ[k+1]` to the
//! state-equation parameters (`k < N`) and `e[k] h[k]ᵀ`, `e[k] s[k]ᵀ`, `e[k]`
//! to the output-equation parameters (`k ≤ N`), plus the regularizer terms.
//! The diagonal `D_k` is never formed; `σ'` is kept as a vector.

use nalgebra::{DMatrix, DVector};

use crate::error::{BrnnError, Result};
use crate::loss::{state_loss_grad, LossWeights};
use crate::model::{nonlinearity_derivative, BrnnParams, Sequence, Trajectory};

/// `λ[0..=N]`. Only `λ[1..=N]` feed the parameter updates; `λ[0]` is filled
/// by extending the recursion one more step and is kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CostateSeq {
    pub lambda: Vec<DVector<f64>>,
    /// Whether `lambda[0]` holds a (finite) value from the recursion.
    pub lambda0_valid: bool,
}

impl CostateSeq {
    pub fn horizon(&self) -> usize {
        self.lambda.len() - 1
    }

    /// `λ[1..=N]`, the co-states that enter the updates.
    pub fn essential(&self) -> &[DVector<f64>] {
        &self.lambda[1..]
    }

    /// Largest `‖λ[k]‖₂` over `k = 1..=N`.
    pub fn max_norm(&self) -> f64 {
        self.essential()
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max)
    }

    /// Copy with `λ[0]` zeroed and flagged invalid.
    pub fn without_lambda0(&self) -> CostateSeq {
        let mut c = self.clone();
        c.lambda[0].fill(0.0);
        c.lambda0_valid = false;
        c
    }
}

/// Gradient contribution of one step to `θ = (U, W, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateStepGrad {
    pub u: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Gradient contribution of one step to `ν = (V, Dft, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputStepGrad {
    pub v: DMatrix<f64>,
    pub dft: DMatrix<f64>,
    pub c: DVector<f64>,
}

/// Per-step gradients before scaling by the learning rate.
/// `state` has `N` entries (`k = 0..N-1`), `output` has `N + 1` (`k = 0..=N`).
#[derive(Debug, Clone, PartialEq)]
pub struct GradSeq {
    pub state: Vec<StateStepGrad>,
    pub output: Vec<OutputStepGrad>,
}

impl GradSeq {
    pub fn horizon(&self) -> usize {
        self.state.len()
    }

    /// Largest Frobenius norm of a single step's full contribution.
    pub fn max_step_norm(&self) -> f64 {
        let steps = self.output.len();
        (0..steps)
            .map(|k| {
                let mut sq = 0.0;
                if let Some(s) = self.state.get(k) {
                    sq += s.u.norm_squared() + s.w.norm_squared() + s.b.norm_squared();
                }
                let o = &self.output[k];
                sq += o.v.norm_squared() + o.dft.norm_squared() + o.c.norm_squared();
                sq.sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Final boundary condition `λ[N] = σ'(x[N]) ⊙ (Vᵀ e[N])`.
pub fn final_costate(params: &BrnnParams, x_n: &DVector<f64>, e_n: &DVector<f64>) -> DVector<f64> {
    let sp = nonlinearity_derivative(params.sigma, x_n);
    (params.v.transpose() * e_n).component_mul(&sp)
}

/// Runs the co-state recursion backward from `λ[N]` down to `λ[0]`.
pub fn backward_costates(
    params: &BrnnParams,
    traj: &Trajectory,
    w: &LossWeights,
) -> Result<CostateSeq> {
    let big_n = traj.horizon();
    if traj.x.is_empty() || traj.e.len() != big_n + 1 || traj.h.len() != big_n + 1 {
        return Err(BrnnError::dim(
            "trajectory",
            "x, h and e of equal length",
            traj.x.len(),
        ));
    }
    let n = params.n();
    let vt = params.v.transpose();
    let ut = params.u.transpose();
    let at = params.a.transpose();

    let mut lambda = vec![DVector::zeros(n); big_n + 1];
    lambda[big_n] = final_costate(params, &traj.x[big_n], &traj.e[big_n]);
    if !lambda[big_n].iter().all(|v| v.is_finite()) {
        return Err(BrnnError::Explosion { k: big_n });
    }

    let mut lambda0_valid = true;
    for k in (0..big_n).rev() {
        let sp = nonlinearity_derivative(params.sigma, &traj.x[k]);
        let next = &lambda[k + 1];
        // (A + U D)ᵀ λ = Aᵀ λ + D (Uᵀ λ)
        let mut lk = &at * next + (&ut * next).component_mul(&sp);
        lk += (&vt * &traj.e[k]).component_mul(&sp);
        lk += state_loss_grad(w, &traj.x[k], &traj.h[k], &sp);
        if !lk.iter().all(|v| v.is_finite()) {
            if k == 0 {
                lambda0_valid = false;
                break;
            }
            return Err(BrnnError::Explosion { k });
        }
        lambda[k] = lk;
    }

    Ok(CostateSeq {
        lambda,
        lambda0_valid,
    })
}

/// Unscaled per-step gradient terms (the update at step `k` is `-η` times these).
pub fn per_step_gradients(
    params: &BrnnParams,
    seq: &Sequence,
    traj: &Trajectory,
    costates: &CostateSeq,
    w: &LossWeights,
) -> Result<GradSeq> {
    let big_n = traj.horizon();
    if costates.horizon() != big_n || seq.s.len() != big_n + 1 {
        return Err(BrnnError::dim(
            "horizon",
            big_n,
            format!(
                "costates {}, sequence {}",
                costates.horizon(),
                seq.horizon()
            ),
        ));
    }

    let state = (0..big_n)
        .map(|k| {
            let lam = &costates.lambda[k + 1];
            StateStepGrad {
                u: &params.u * w.gamma1 + lam * traj.h[k].transpose(),
                w: &params.w * w.gamma1 + lam * seq.s[k].transpose(),
                b: &params.b * w.gamma1 + lam,
            }
        })
        .collect();

    let output = (0..=big_n)
        .map(|k| {
            let e = &traj.e[k];
            OutputStepGrad {
                v: &params.v * w.gamma2 + e * traj.h[k].transpose(),
                dft: &params.dft * w.gamma2 + e * seq.s[k].transpose(),
                c: &params.c * w.gamma2 + e,
            }
        })
        .collect();

    Ok(GradSeq { state, output })
}
