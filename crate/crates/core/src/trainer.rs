//! Epoch aggregation, parameter updates and the training loop.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::adjoint::{backward_costates, per_step_gradients, CostateSeq, GradSeq};
use crate::error::{BrnnError, Result};
use crate::loss::{total_cost, CostBreakdown, LossWeights};
use crate::model::{forward, BrnnParams, Dims, Nonlinearity, Sequence, Trajectory, TRAINABLE};
use crate::rng::SplitMix64;

/// How the per-step contributions of one epoch are reduced to a single update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregation {
    /// Elementwise sum over `k`: the true gradient of the epoch cost.
    Sum,
    /// Sum divided by the step count (`N` for `U, W, b`; `N + 1` for `V, Dft, c`).
    Mean,
    /// Elementwise median; midpoint of the two central values for even counts.
    Median,
    /// Elementwise entry of smallest magnitude, sign kept.
    MinAbs,
}

impl Aggregation {
    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Sum => "sum",
            Aggregation::Mean => "mean",
            Aggregation::Median => "median",
            Aggregation::MinAbs => "min_abs",
        }
    }

    /// Reduces one parameter entry's per-step values; `values` may be reordered.
    pub fn reduce(self, values: &mut [f64]) -> f64 {
        match self {
            Aggregation::Sum => values.iter().sum(),
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Median => {
                values.sort_by(f64::total_cmp);
                let mid = values.len() / 2;
                if values.len() % 2 == 1 {
                    values[mid]
                } else {
                    0.5 * (values[mid - 1] + values[mid])
                }
            }
            Aggregation::MinAbs => values
                .iter()
                .copied()
                .reduce(|best, v| if v.abs() < best.abs() { v } else { best })
                .unwrap_or(0.0),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregation {
    type Err = BrnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Aggregation::Sum),
            "mean" => Ok(Aggregation::Mean),
            "median" => Ok(Aggregation::Median),
            "min_abs" | "minabs" | "min" => Ok(Aggregation::MinAbs),
            other => Err(BrnnError::Config(format!("unknown aggregation '{other}'"))),
        }
    }
}

/// One epoch's gradient, one entry per trainable parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GradSet {
    pub u: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub v: DMatrix<f64>,
    pub dft: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl GradSet {
    pub fn zeros_like(params: &BrnnParams) -> Self {
        GradSet {
            u: DMatrix::zeros(params.u.nrows(), params.u.ncols()),
            w: DMatrix::zeros(params.w.nrows(), params.w.ncols()),
            b: DVector::zeros(params.b.len()),
            v: DMatrix::zeros(params.v.nrows(), params.v.ncols()),
            dft: DMatrix::zeros(params.dft.nrows(), params.dft.ncols()),
            c: DVector::zeros(params.c.len()),
        }
    }

    /// Groups as flat column-major slices, in [`TRAINABLE`] order.
    pub fn groups(&self) -> [&[f64]; 6] {
        [
            self.u.as_slice(),
            self.w.as_slice(),
            self.b.as_slice(),
            self.v.as_slice(),
            self.dft.as_slice(),
            self.c.as_slice(),
        ]
    }

    pub fn groups_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.u.as_mut_slice(),
            self.w.as_mut_slice(),
            self.b.as_mut_slice(),
            self.v.as_mut_slice(),
            self.dft.as_mut_slice(),
            self.c.as_mut_slice(),
        ]
    }

    pub fn norm(&self) -> f64 {
        self.groups()
            .iter()
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Elementwise accumulation in a fixed order, for combining sequences.
    pub fn accumulate(&mut self, other: &GradSet) {
        self.u += &other.u;
        self.w += &other.w;
        self.b += &other.b;
        self.v += &other.v;
        self.dft += &other.dft;
        self.c += &other.c;
    }
}

fn reduce_group<'a>(
    shape: (usize, usize),
    steps: impl Iterator<Item = &'a [f64]> + Clone,
    mode: Aggregation,
) -> Vec<f64> {
    let len = shape.0 * shape.1;
    let mut column = Vec::new();
    (0..len)
        .map(|i| {
            column.clear();
            column.extend(steps.clone().map(|s| s[i]));
            if column.is_empty() {
                0.0
            } else {
                mode.reduce(&mut column)
            }
        })
        .collect()
}

/// Reduces a sequence of per-step gradients to one epoch gradient.
pub fn aggregate(grads: &GradSeq, mode: Aggregation) -> GradSet {
    let first_out = &grads.output[0];
    let n = first_out.v.ncols();
    let m = first_out.dft.ncols();
    let r = first_out.v.nrows();

    let st = &grads.state;
    let out = &grads.output;
    GradSet {
        u: DMatrix::from_vec(
            n,
            n,
            reduce_group((n, n), st.iter().map(|g| g.u.as_slice()), mode),
        ),
        w: DMatrix::from_vec(
            n,
            m,
            reduce_group((n, m), st.iter().map(|g| g.w.as_slice()), mode),
        ),
        b: DVector::from_vec(reduce_group(
            (n, 1),
            st.iter().map(|g| g.b.as_slice()),
            mode,
        )),
        v: DMatrix::from_vec(
            r,
            n,
            reduce_group((r, n), out.iter().map(|g| g.v.as_slice()), mode),
        ),
        dft: DMatrix::from_vec(
            r,
            m,
            reduce_group((r, m), out.iter().map(|g| g.dft.as_slice()), mode),
        ),
        c: DVector::from_vec(reduce_group(
            (r, 1),
            out.iter().map(|g| g.c.as_slice()),
            mode,
        )),
    }
}

/// `p ← p − η g` for every trainable parameter. `A` is never touched.
pub fn apply_update(params: &BrnnParams, g: &GradSet, eta: f64) -> Result<BrnnParams> {
    apply_update_split(params, g, eta, eta)
}

/// Like [`apply_update`] with separate rates for the state-equation group
/// `(U, W, b)` and the output-equation group `(V, Dft, c)`.
pub fn apply_update_split(
    params: &BrnnParams,
    g: &GradSet,
    eta_state: f64,
    eta_output: f64,
) -> Result<BrnnParams> {
    if !(eta_state > 0.0 && eta_output > 0.0) {
        return Err(BrnnError::Config("learning rate must be positive".into()));
    }
    let mut next = params.clone();
    for (i, (p, d)) in next.trainable_mut().into_iter().zip(g.groups()).enumerate() {
        if p.len() != d.len() {
            return Err(BrnnError::dim(TRAINABLE[i], p.len(), d.len()));
        }
        let eta = if i < 3 { eta_state } else { eta_output };
        for (pv, dv) in p.iter_mut().zip(d) {
            *pv -= eta * dv;
            if !pv.is_finite() {
                return Err(BrnnError::Divergence(TRAINABLE[i]));
            }
        }
    }
    Ok(next)
}

/// Training hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub eta: f64,
    pub epochs: usize,
    pub aggregation: Aggregation,
    /// Training stops once the epoch cost falls below this value.
    pub stop_tol: f64,
    pub seed: u64,
    /// Half-width of the uniform initialization of `U, W, V, Dft`.
    pub init_scale: f64,
    /// `A = alpha_a I`.
    pub alpha_a: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.01,
            epochs: 1000,
            aggregation: Aggregation::Sum,
            stop_tol: 0.0,
            seed: 1,
            init_scale: 0.1,
            alpha_a: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(BrnnError::Config(format!(
                "eta={} must be positive",
                self.eta
            )));
        }
        if !(self.alpha_a > 0.0 && self.alpha_a <= 1.0) {
            return Err(BrnnError::Config(format!(
                "alpha_A={} must lie in (0, 1]",
                self.alpha_a
            )));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(BrnnError::Config("init_scale must be non-negative".into()));
        }
        if self.stop_tol.is_nan() {
            return Err(BrnnError::Config("stop_tol must be a number".into()));
        }
        Ok(())
    }
}

/// Random initial parameters: `U, W, V, Dft` uniform in `[-scale, scale)`
/// (drawn in that order, each row by row, from one [`SplitMix64`] stream),
/// `b = c = 0` and `A = alpha_a I`.
pub fn init_params(
    dims: &Dims,
    sigma: Nonlinearity,
    init_scale: f64,
    alpha_a: f64,
    seed: u64,
) -> BrnnParams {
    let mut rng = SplitMix64::new(seed);
    let mut draw = |rows: usize, cols: usize| {
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| rng.symmetric(init_scale))
            .collect();
        DMatrix::from_row_slice(rows, cols, &data)
    };
    let u = draw(dims.n, dims.n);
    let w = draw(dims.n, dims.m);
    let v = draw(dims.r, dims.n);
    let dft = draw(dims.r, dims.m);
    BrnnParams {
        a: DMatrix::identity(dims.n, dims.n) * alpha_a,
        u,
        w,
        b: DVector::zeros(dims.n),
        v,
        dft,
        c: DVector::zeros(dims.r),
        sigma,
    }
}

/// Frobenius norms of the trainable parameters, in [`TRAINABLE`] order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParamNorms(pub [f64; 6]);

impl ParamNorms {
    pub fn of(params: &BrnnParams) -> Self {
        let t = params.trainable();
        ParamNorms(std::array::from_fn(|i| {
            t[i].iter().map(|v| v * v).sum::<f64>().sqrt()
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Cost of the parameters the epoch started with.
    pub cost: CostBreakdown,
    /// Largest Frobenius norm of a single step's gradient contribution.
    pub grad_norm: f64,
    /// Largest `‖λ[k]‖₂`, `k = 1..=N`.
    pub lambda_max: f64,
    pub param_norms: ParamNorms,
}

/// Everything computed during one epoch with frozen parameters.
#[derive(Debug, Clone)]
pub struct EpochOutcome {
    pub trajectory: Trajectory,
    pub cost: CostBreakdown,
    pub costates: CostateSeq,
    pub steps: GradSeq,
    pub grad: GradSet,
}

/// Forward pass, cost, co-states, per-step gradients and their aggregate.
pub fn epoch_gradient(
    params: &BrnnParams,
    seq: &Sequence,
    x0: &DVector<f64>,
    w: &LossWeights,
    mode: Aggregation,
) -> Result<EpochOutcome> {
    let trajectory = forward(params, seq, x0)?;
    let cost = total_cost(&trajectory, seq, params, w)?;
    let costates = backward_costates(params, &trajectory, w)?;
    let steps = per_step_gradients(params, seq, &trajectory, &costates, w)?;
    let grad = aggregate(&steps, mode);
    Ok(EpochOutcome {
        trajectory,
        cost,
        costates,
        steps,
        grad,
    })
}

/// Trains on a single sequence. Each epoch runs forward and backward with the
/// parameters frozen, records metrics, and then applies one update. The loop
/// ends after `config.epochs` epochs or as soon as an epoch's cost drops below
/// `config.stop_tol` (in which case that epoch applies no update).
pub fn train(
    config: &TrainConfig,
    seq: &Sequence,
    params0: &BrnnParams,
    x0: &DVector<f64>,
    w: &LossWeights,
) -> Result<(BrnnParams, Vec<EpochMetrics>)> {
    config.validate()?;
    w.validate()?;
    let mut params = params0.clone();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let wrap = |source: BrnnError| BrnnError::Training {
            epoch,
            source: Box::new(source),
        };
        let out = epoch_gradient(&params, seq, x0, w, config.aggregation).map_err(wrap)?;
        history.push(EpochMetrics {
            epoch,
            cost: out.cost,
            grad_norm: out.steps.max_step_norm(),
            lambda_max: out.costates.max_norm(),
            param_norms: ParamNorms::of(&params),
        });
        if out.cost.total < config.stop_tol {
            break;
        }
        params = apply_update(&params, &out.grad, config.eta).map_err(wrap)?;
    }

    Ok((params, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::{OutputStepGrad, StateStepGrad};
    use approx::assert_abs_diff_eq;

    fn scalar_seq_grads(values: &[f64]) -> GradSeq {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        let vec1 = |v: f64| DVector::from_element(1, v);
        GradSeq {
            state: values
                .iter()
                .map(|&v| StateStepGrad {
                    u: one(v),
                    w: one(v),
                    b: vec1(v),
                })
                .collect(),
            output: values
                .iter()
                .chain(std::iter::once(&0.0))
                .map(|&v| OutputStepGrad {
                    v: one(v),
                    dft: one(v),
                    c: vec1(v),
                })
                .collect(),
        }
    }

    #[test]
    fn two_element_aggregates() {
        let g = scalar_seq_grads(&[1.0, 3.0]);
        assert_eq!(aggregate(&g, Aggregation::Sum).u[(0, 0)], 4.0);
        assert_eq!(aggregate(&g, Aggregation::Mean).u[(0, 0)], 2.0);
        assert_eq!(aggregate(&g, Aggregation::Median).u[(0, 0)], 2.0);
        assert_eq!(aggregate(&g, Aggregation::MinAbs).u[(0, 0)], 1.0);
    }

    #[test]
    fn mean_and_median_can_disagree() {
        let g = scalar_seq_grads(&[-5.0, 1.0, 2.0]);
        assert_abs_diff_eq!(
            aggregate(&g, Aggregation::Mean).u[(0, 0)],
            -2.0 / 3.0,
            epsilon = 1e-15
        );
        assert_eq!(aggregate(&g, Aggregation::Median).u[(0, 0)], 1.0);
        assert_eq!(aggregate(&g, Aggregation::MinAbs).u[(0, 0)], 1.0);
        // output group has the extra k = N entry (0 here)
        assert_eq!(aggregate(&g, Aggregation::MinAbs).v[(0, 0)], 0.0);
        assert_eq!(aggregate(&g, Aggregation::Median).v[(0, 0)], 0.5);
    }

    #[test]
    fn min_abs_keeps_sign() {
        let g = scalar_seq_grads(&[-0.5, 2.0, -0.1, 4.0]);
        assert_eq!(aggregate(&g, Aggregation::MinAbs).u[(0, 0)], -0.1);
    }

    #[test]
    fn zero_grads_aggregate_to_zero() {
        let g = scalar_seq_grads(&[0.0, 0.0, 0.0]);
        for mode in [
            Aggregation::Sum,
            Aggregation::Mean,
            Aggregation::Median,
            Aggregation::MinAbs,
        ] {
            let s = aggregate(&g, mode);
            assert!(s.groups().iter().all(|g| g.iter().all(|&v| v == 0.0)));
        }
    }

    #[test]
    fn update_rules() {
        let mut p = BrnnParams::zeros(1, 1, 1, Nonlinearity::Tanh);
        p.a[(0, 0)] = 0.5;
        p.u[(0, 0)] = 1.0;
        let zero = GradSet::zeros_like(&p);
        assert_eq!(apply_update(&p, &zero, 0.1).unwrap(), p);

        let mut g = zero.clone();
        g.u[(0, 0)] = 0.5;
        g.c[0] = 1.0;
        let q = apply_update(&p, &g, 0.1).unwrap();
        assert_eq!(q.u[(0, 0)], 0.95);
        assert_eq!(q.c[0], -0.1);
        assert_eq!(q.a, p.a);

        g.w[(0, 0)] = f64::INFINITY;
        assert!(matches!(
            apply_update(&p, &g, 0.1),
            Err(BrnnError::Divergence("W"))
        ));
        assert!(apply_update(&p, &zero, 0.0).is_err());
    }

    fn toy_problem() -> (BrnnParams, Sequence) {
        let dims = Dims::new(3, 1, 1, 8).unwrap();
        let p = init_params(&dims, Nonlinearity::Tanh, 0.3, 0.5, 11);
        let seq = Sequence::new(
            (0..9)
                .map(|k| DVector::from_element(1, (0.7 * k as f64).sin()))
                .collect(),
            (0..9)
                .map(|k| DVector::from_element(1, (0.7 * (k + 1) as f64).sin()))
                .collect(),
        )
        .unwrap();
        (p, seq)
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let (p, seq) = toy_problem();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (q, hist) = train(&cfg, &seq, &p, &DVector::zeros(3), &LossWeights::default()).unwrap();
        assert_eq!(q, p);
        assert!(hist.is_empty());
    }

    #[test]
    fn perfect_fit_stops_after_first_epoch() {
        let (mut p, _) = toy_problem();
        p.v.fill(0.0);
        p.dft.fill(0.0);
        // targets equal to the model output: zero cost
        let seq = Sequence::new(
            vec![DVector::from_element(1, 0.3); 5],
            vec![DVector::zeros(1); 5],
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            stop_tol: 1e-12,
            ..TrainConfig::default()
        };
        let (q, hist) = train(&cfg, &seq, &p, &DVector::zeros(3), &LossWeights::default()).unwrap();
        assert_eq!(hist.len(), 1);
        assert_eq!(hist[0].cost.total, 0.0);
        assert_eq!(q, p);
    }

    #[test]
    fn training_reduces_cost_and_keeps_a_fixed() {
        let (p, seq) = toy_problem();
        let cfg = TrainConfig {
            epochs: 200,
            eta: 0.05,
            ..TrainConfig::default()
        };
        let (q, hist) = train(&cfg, &seq, &p, &DVector::zeros(3), &LossWeights::default()).unwrap();
        assert_eq!(hist.len(), 200);
        assert!(hist.last().unwrap().cost.total < 0.5 * hist[0].cost.total);
        assert_eq!(q.a, p.a);
        assert!(hist.iter().enumerate().all(|(i, m)| m.epoch == i + 1));
    }

    #[test]
    fn divergence_carries_the_epoch() {
        let (p, seq) = toy_problem();
        let cfg = TrainConfig {
            epochs: 100,
            eta: 1e200,
            ..TrainConfig::default()
        };
        let err = train(&cfg, &seq, &p, &DVector::zeros(3), &LossWeights::default()).unwrap_err();
        assert!(err.is_numerical());
        assert!(matches!(err, BrnnError::Training { .. }));
    }

    #[test]
    fn init_is_seeded_and_shaped() {
        let dims = Dims::new(4, 2, 3, 5).unwrap();
        let a = init_params(&dims, Nonlinearity::Tanh, 0.2, 0.7, 5);
        let b = init_params(&dims, Nonlinearity::Tanh, 0.2, 0.7, 5);
        let c = init_params(&dims, Nonlinearity::Tanh, 0.2, 0.7, 6);
        assert_eq!(a, b);
        assert_ne!(a, c);
        a.validate().unwrap();
        assert_eq!(a.a, DMatrix::identity(4, 4) * 0.7);
        assert!(a.b.iter().chain(a.c.iter()).all(|&v| v == 0.0));
        assert!(a.u.iter().all(|v| v.abs() <= 0.2));
    }
}
