//! Finite-difference gradient oracle and comparison against the co-state gradient.
//!
//! The oracle only ever evaluates the cost; it shares the forward pass and
//! [`total_cost`] with the rest of the crate but nothing from the backward pass.

use std::fmt;

use nalgebra::DVector;

use crate::adjoint::{backward_costates, per_step_gradients};
use crate::error::{BrnnError, Result};
use crate::loss::{total_cost, LossWeights, StateLossKind};
use crate::model::{forward, BrnnParams, Dims, Nonlinearity, Sequence, TRAINABLE};
use crate::rng::SplitMix64;
use crate::trainer::{aggregate, Aggregation, GradSet};

pub const DEFAULT_EPS: f64 = 1e-5;

fn cost(params: &BrnnParams, seq: &Sequence, x0: &DVector<f64>, w: &LossWeights) -> Result<f64> {
    let traj = forward(params, seq, x0)?;
    Ok(total_cost(&traj, seq, params, w)?.total)
}

/// Central differences `(J(p + ε) − J(p − ε)) / 2ε` for every trainable entry.
pub fn numeric_gradient(
    params: &BrnnParams,
    seq: &Sequence,
    x0: &DVector<f64>,
    w: &LossWeights,
    eps: f64,
) -> Result<GradSet> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(BrnnError::Config(format!(
            "eps={eps} must lie in [1e-7, 1e-3]"
        )));
    }
    if !params.sigma.is_smooth() {
        return Err(BrnnError::Config(format!(
            "finite differences need a smooth σ, got {}",
            params.sigma
        )));
    }
    if w.state_loss_kind == StateLossKind::L1 && (w.beta != 0.0 || w.beta0 != 0.0) {
        return Err(BrnnError::Config(
            "finite differences need a smooth state loss (none or tanh_approx)".into(),
        ));
    }

    let mut grad = GradSet::zeros_like(params);
    let mut probe = params.clone();
    for group in 0..TRAINABLE.len() {
        for i in 0..params.trainable()[group].len() {
            let orig = params.trainable()[group][i];
            probe.trainable_mut()[group][i] = orig + eps;
            let plus = cost(&probe, seq, x0, w)?;
            probe.trainable_mut()[group][i] = orig - eps;
            let minus = cost(&probe, seq, x0, w)?;
            probe.trainable_mut()[group][i] = orig;
            grad.groups_mut()[group][i] = (plus - minus) / (2.0 * eps);
        }
    }
    Ok(grad)
}

/// Co-state gradient of `J`: per-step terms reduced with `mode`.
pub fn adjoint_gradient(
    params: &BrnnParams,
    seq: &Sequence,
    x0: &DVector<f64>,
    w: &LossWeights,
    mode: Aggregation,
) -> Result<GradSet> {
    let traj = forward(params, seq, x0)?;
    let costates = backward_costates(params, &traj, w)?;
    let steps = per_step_gradients(params, seq, &traj, &costates, w)?;
    Ok(aggregate(&steps, mode))
}

/// Worst discrepancy within one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub name: &'static str,
    pub max_abs: f64,
    pub max_rel: f64,
    /// `(row, col)` of the entry with the largest relative error.
    pub worst: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupError>,
    pub tol: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn max_rel(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel).fold(0.0, f64::max)
    }

    pub fn worst_group(&self) -> Option<&GroupError> {
        self.groups
            .iter()
            .max_by(|a, b| a.max_rel.total_cmp(&b.max_rel))
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<5} {:>12} {:>12}  worst",
            "group", "max_abs", "max_rel"
        )?;
        for g in &self.groups {
            writeln!(
                f,
                "{:<5} {:>12.3e} {:>12.3e}  ({}, {})",
                g.name, g.max_abs, g.max_rel, g.worst.0, g.worst.1
            )?;
        }
        write!(
            f,
            "{} (max relative error {:.3e}, tolerance {:.1e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.max_rel(),
            self.tol
        )
    }
}

/// `|a − b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Entrywise comparison; passes iff every relative error is below `tol`.
pub fn compare_gradients(
    analytic: &GradSet,
    numeric: &GradSet,
    tol: f64,
) -> Result<GradCheckReport> {
    let shapes = |g: &GradSet| {
        [
            g.u.shape(),
            g.w.shape(),
            g.b.shape(),
            g.v.shape(),
            g.dft.shape(),
            g.c.shape(),
        ]
    };
    let (sa, sn) = (shapes(analytic), shapes(numeric));
    let mut groups = Vec::with_capacity(6);
    for (i, (a, n)) in analytic
        .groups()
        .into_iter()
        .zip(numeric.groups())
        .enumerate()
    {
        if sa[i] != sn[i] {
            return Err(BrnnError::dim(
                TRAINABLE[i],
                format!("{:?}", sa[i]),
                format!("{:?}", sn[i]),
            ));
        }
        let rows = sa[i].0;
        let mut ge = GroupError {
            name: TRAINABLE[i],
            max_abs: 0.0,
            max_rel: 0.0,
            worst: (0, 0),
        };
        for (j, (&x, &y)) in a.iter().zip(n).enumerate() {
            let abs = (x - y).abs();
            let rel = relative_error(x, y);
            ge.max_abs = ge.max_abs.max(abs);
            // NaN in either side must not slip through as "no error"
            if rel > ge.max_rel || rel.is_nan() {
                ge.max_rel = if rel.is_nan() { f64::INFINITY } else { rel };
                ge.worst = (j % rows, j / rows);
            }
        }
        groups.push(ge);
    }
    let pass = groups.iter().all(|g| g.max_rel < tol);
    Ok(GradCheckReport { groups, tol, pass })
}

/// A self-contained gradient-check problem.
#[derive(Debug, Clone)]
pub struct GradCheckInstance {
    pub params: BrnnParams,
    pub seq: Sequence,
    pub x0: DVector<f64>,
    pub weights: LossWeights,
}

impl GradCheckInstance {
    /// Random instance: weights and biases uniform in `[-0.5, 0.5)`, inputs and
    /// targets in `[-1, 1)`, `x0` in `[-0.5, 0.5)`, `A` a random diagonal with
    /// entries in `[-0.9, 0.9)`.
    pub fn random(
        dims: &Dims,
        sigma: Nonlinearity,
        weights: LossWeights,
        seed: u64,
    ) -> GradCheckInstance {
        let mut rng = SplitMix64::new(seed);
        let (n, m, r) = (dims.n, dims.m, dims.r);
        let mut params = BrnnParams::zeros(n, m, r, sigma);
        for i in 0..n {
            params.a[(i, i)] = rng.symmetric(0.9);
        }
        for group in params.trainable_mut() {
            for v in group.iter_mut() {
                *v = rng.symmetric(0.5);
            }
        }
        let steps = dims.steps();
        let s = (0..steps)
            .map(|_| DVector::from_fn(m, |_, _| rng.symmetric(1.0)))
            .collect();
        let d = (0..steps)
            .map(|_| DVector::from_fn(r, |_, _| rng.symmetric(1.0)))
            .collect();
        let x0 = DVector::from_fn(n, |_, _| rng.symmetric(0.5));
        GradCheckInstance {
            params,
            seq: Sequence { s, d },
            x0,
            weights,
        }
    }

    /// Sum-aggregated co-state gradient against central differences.
    pub fn check(&self, eps: f64, tol: f64) -> Result<GradCheckReport> {
        let analytic = adjoint_gradient(
            &self.params,
            &self.seq,
            &self.x0,
            &self.weights,
            Aggregation::Sum,
        )?;
        let numeric = numeric_gradient(&self.params, &self.seq, &self.x0, &self.weights, eps)?;
        compare_gradients(&analytic, &numeric, tol)
    }
}
