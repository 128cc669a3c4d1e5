//! Parameters and the forward recursion.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{BrnnError, Result};

/// Problem dimensions. The sequence has `horizon + 1` steps, `k = 0..=horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub horizon: usize,
}

impl Dims {
    pub fn new(n: usize, m: usize, r: usize, horizon: usize) -> Result<Self> {
        if n == 0 || m == 0 || r == 0 {
            return Err(BrnnError::Config(format!(
                "dimensions must be positive (n={n}, m={m}, r={r})"
            )));
        }
        if horizon == 0 {
            return Err(BrnnError::Config("horizon N must be at least 1".into()));
        }
        Ok(Dims { n, m, r, horizon })
    }

    /// Number of samples in a sequence, `N + 1`.
    pub fn steps(&self) -> usize {
        self.horizon + 1
    }
}

/// Elementwise nonlinearity `σ`, the same at every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Nonlinearity {
    Tanh,
    Logistic,
    Relu,
    Identity,
}

impl Nonlinearity {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => x.tanh(),
            Nonlinearity::Logistic => 1.0 / (1.0 + (-x).exp()),
            Nonlinearity::Relu => x.max(0.0),
            Nonlinearity::Identity => x,
        }
    }

    /// Derivative at `x`. The relu derivative at 0 is taken to be 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Nonlinearity::Logistic => {
                let s = self.eval(x);
                s * (1.0 - s)
            }
            Nonlinearity::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Nonlinearity::Identity => 1.0,
        }
    }

    /// Whether `|σ(x)| <= 1` for every `x`.
    pub fn is_bounded(self) -> bool {
        matches!(self, Nonlinearity::Tanh | Nonlinearity::Logistic)
    }

    /// Whether σ is differentiable everywhere.
    pub fn is_smooth(self) -> bool {
        !matches!(self, Nonlinearity::Relu)
    }

    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::Tanh => "tanh",
            Nonlinearity::Logistic => "logistic",
            Nonlinearity::Relu => "relu",
            Nonlinearity::Identity => "identity",
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Nonlinearity {
    type Err = BrnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Nonlinearity::Tanh),
            "logistic" | "sigmoid" | "sigm" => Ok(Nonlinearity::Logistic),
            "relu" => Ok(Nonlinearity::Relu),
            "identity" | "linear" => Ok(Nonlinearity::Identity),
            other => Err(BrnnError::Config(format!("unknown nonlinearity '{other}'"))),
        }
    }
}

pub fn apply_nonlinearity(kind: Nonlinearity, x: &DVector<f64>) -> DVector<f64> {
    x.map(|v| kind.eval(v))
}

/// Diagonal of `σ'(x)` stored as a vector.
pub fn nonlinearity_derivative(kind: Nonlinearity, x: &DVector<f64>) -> DVector<f64> {
    x.map(|v| kind.derivative(v))
}

/// All parameters of the network. `a` is fixed; the rest are trained.
#[derive(Debug, Clone, PartialEq)]
pub struct BrnnParams {
    pub a: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub v: DMatrix<f64>,
    /// Direct input-to-output feedthrough.
    pub dft: DMatrix<f64>,
    pub c: DVector<f64>,
    pub sigma: Nonlinearity,
}

/// Names of the six trainable groups, in the order used everywhere
/// (updates, gradient sets, reports, checkpoints).
pub const TRAINABLE: [&str; 6] = ["U", "W", "b", "V", "Dft", "c"];

impl BrnnParams {
    /// All-zero parameters (including `A`).
    pub fn zeros(n: usize, m: usize, r: usize, sigma: Nonlinearity) -> Self {
        BrnnParams {
            a: DMatrix::zeros(n, n),
            u: DMatrix::zeros(n, n),
            w: DMatrix::zeros(n, m),
            b: DVector::zeros(n),
            v: DMatrix::zeros(r, n),
            dft: DMatrix::zeros(r, m),
            c: DVector::zeros(r),
            sigma,
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.w.ncols()
    }

    pub fn r(&self) -> usize {
        self.v.nrows()
    }

    /// Checks that every matrix agrees with the sizes implied by `A`, `W` and `V`.
    pub fn validate(&self) -> Result<()> {
        let (n, m, r) = (self.n(), self.m(), self.r());
        let check = |what: &'static str, shape: (usize, usize), want: (usize, usize)| {
            if shape == want {
                Ok(())
            } else {
                Err(BrnnError::dim(
                    what,
                    format!("{}x{}", want.0, want.1),
                    format!("{}x{}", shape.0, shape.1),
                ))
            }
        };
        check("A", self.a.shape(), (n, n))?;
        check("U", self.u.shape(), (n, n))?;
        check("W", self.w.shape(), (n, m))?;
        check("b", self.b.shape(), (n, 1))?;
        check("V", self.v.shape(), (r, n))?;
        check("Dft", self.dft.shape(), (r, m))?;
        check("c", self.c.shape(), (r, 1))?;
        if n == 0 || m == 0 || r == 0 {
            return Err(BrnnError::Config(
                "parameter dimensions must be positive".into(),
            ));
        }
        Ok(())
    }

    /// The trainable groups as flat column-major slices, in [`TRAINABLE`] order.
    pub fn trainable(&self) -> [&[f64]; 6] {
        [
            self.u.as_slice(),
            self.w.as_slice(),
            self.b.as_slice(),
            self.v.as_slice(),
            self.dft.as_slice(),
            self.c.as_slice(),
        ]
    }

    pub fn trainable_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.u.as_mut_slice(),
            self.w.as_mut_slice(),
            self.b.as_mut_slice(),
            self.v.as_mut_slice(),
            self.dft.as_mut_slice(),
            self.c.as_mut_slice(),
        ]
    }

    /// `½‖θ‖²` with `θ = (U, W, b)`.
    pub fn theta_sq_half(&self) -> f64 {
        0.5 * (self.u.norm_squared() + self.w.norm_squared() + self.b.norm_squared())
    }

    /// `½‖ν‖²` with `ν = (V, Dft, c)`.
    pub fn nu_sq_half(&self) -> f64 {
        0.5 * (self.v.norm_squared() + self.dft.norm_squared() + self.c.norm_squared())
    }

    pub fn is_finite(&self) -> bool {
        std::iter::once(self.a.as_slice())
            .chain(self.trainable())
            .all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Input samples `s[k]` and targets `d[k]`, `k = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub s: Vec<DVector<f64>>,
    pub d: Vec<DVector<f64>>,
}

impl Sequence {
    pub fn new(s: Vec<DVector<f64>>, d: Vec<DVector<f64>>) -> Result<Self> {
        let seq = Sequence { s, d };
        seq.validate()?;
        Ok(seq)
    }

    /// Final index `N`.
    pub fn horizon(&self) -> usize {
        self.s.len().saturating_sub(1)
    }

    pub fn m(&self) -> usize {
        self.s.first().map_or(0, |v| v.len())
    }

    pub fn r(&self) -> usize {
        self.d.first().map_or(0, |v| v.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.s.len() != self.d.len() {
            return Err(BrnnError::dim(
                "sequence length",
                self.s.len(),
                self.d.len(),
            ));
        }
        if self.s.len() < 2 {
            return Err(BrnnError::Config(
                "a sequence needs at least two samples (N >= 1)".into(),
            ));
        }
        let (m, r) = (self.m(), self.r());
        if m == 0 || r == 0 {
            return Err(BrnnError::Config(
                "input and target dimensions must be positive".into(),
            ));
        }
        for (k, (s, d)) in self.s.iter().zip(&self.d).enumerate() {
            if s.len() != m {
                return Err(BrnnError::dim(
                    "input sample",
                    m,
                    format!("{} at k={k}", s.len()),
                ));
            }
            if d.len() != r {
                return Err(BrnnError::dim(
                    "target sample",
                    r,
                    format!("{} at k={k}", d.len()),
                ));
            }
            if !s.iter().chain(d.iter()).all(|v| v.is_finite()) {
                return Err(BrnnError::Config(format!("non-finite sample at k={k}")));
            }
        }
        Ok(())
    }
}

/// Record of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: Vec<DVector<f64>>,
    pub h: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    /// Output errors `e[k] = y[k] - d[k]`.
    pub e: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.x.len().saturating_sub(1)
    }
}

/// Runs the state, hidden and output equations from `x0` over the whole sequence.
pub fn forward(params: &BrnnParams, seq: &Sequence, x0: &DVector<f64>) -> Result<Trajectory> {
    params.validate()?;
    seq.validate()?;
    if seq.m() != params.m() {
        return Err(BrnnError::dim("input dimension m", params.m(), seq.m()));
    }
    if seq.r() != params.r() {
        return Err(BrnnError::dim("output dimension r", params.r(), seq.r()));
    }
    if x0.len() != params.n() {
        return Err(BrnnError::dim("initial state", params.n(), x0.len()));
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(BrnnError::Config("initial state is not finite".into()));
    }

    let steps = seq.s.len();
    let mut x = Vec::with_capacity(steps);
    let mut h = Vec::with_capacity(steps);
    let mut y = Vec::with_capacity(steps);
    let mut e = Vec::with_capacity(steps);

    let mut xk = x0.clone();
    for k in 0..steps {
        let hk = apply_nonlinearity(params.sigma, &xk);
        let yk = &params.v * &hk + &params.dft * &seq.s[k] + &params.c;
        if !yk.iter().all(|v| v.is_finite()) || !hk.iter().all(|v| v.is_finite()) {
            return Err(BrnnError::Overflow { k });
        }
        let ek = &yk - &seq.d[k];
        let next = if k + 1 < steps {
            let xn = &params.a * &xk + &params.u * &hk + &params.w * &seq.s[k] + &params.b;
            if !xn.iter().all(|v| v.is_finite()) {
                return Err(BrnnError::Overflow { k: k + 1 });
            }
            Some(xn)
        } else {
            None
        };
        x.push(xk);
        h.push(hk);
        y.push(yk);
        e.push(ek);
        match next {
            Some(xn) => xk = xn,
            None => break,
        }
    }

    Ok(Trajectory { x, h, y, e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_params(a: f64, u: f64, w: f64, b: f64, sigma: Nonlinearity) -> BrnnParams {
        let mut p = BrnnParams::zeros(1, 1, 1, sigma);
        p.a[(0, 0)] = a;
        p.u[(0, 0)] = u;
        p.w[(0, 0)] = w;
        p.b[0] = b;
        p.v[(0, 0)] = 1.0;
        p
    }

    fn scalar_seq(s: &[f64]) -> Sequence {
        Sequence::new(
            s.iter().map(|&v| DVector::from_element(1, v)).collect(),
            s.iter().map(|_| DVector::zeros(1)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn scalar_forward_step() {
        let p = scalar_params(0.5, 0.1, 1.0, 0.0, Nonlinearity::Tanh);
        let traj = forward(&p, &scalar_seq(&[1.0, 0.0]), &DVector::zeros(1)).unwrap();
        assert_eq!(traj.x[1][0], 1.0);
        assert_abs_diff_eq!(traj.h[1][0], 0.761594, epsilon = 1e-6);
        assert_abs_diff_eq!(traj.h[1][0], 1.0f64.tanh(), epsilon = 0.0);
    }

    #[test]
    fn zero_parameters_give_zero_trajectory() {
        let p = BrnnParams::zeros(3, 2, 2, Nonlinearity::Tanh);
        let seq = Sequence::new(
            (0..5)
                .map(|k| DVector::from_element(2, k as f64 - 2.0))
                .collect(),
            (0..5).map(|_| DVector::zeros(2)).collect(),
        )
        .unwrap();
        let traj = forward(&p, &seq, &DVector::zeros(3)).unwrap();
        for k in 0..5 {
            assert!(traj.x[k].iter().all(|&v| v == 0.0));
            assert!(traj.h[k].iter().all(|&v| v == 0.0));
            assert!(traj.y[k].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn nonlinearity_values() {
        let z = DVector::zeros(3);
        assert_eq!(apply_nonlinearity(Nonlinearity::Tanh, &z), z);
        assert_eq!(
            apply_nonlinearity(Nonlinearity::Logistic, &z),
            DVector::from_element(3, 0.5)
        );
        let x = DVector::from_vec(vec![-1.0, 2.0]);
        assert_eq!(
            apply_nonlinearity(Nonlinearity::Relu, &x),
            DVector::from_vec(vec![0.0, 2.0])
        );
    }

    #[test]
    fn nonlinearity_derivatives() {
        let one = DVector::from_element(1, 1.0);
        let dt = nonlinearity_derivative(Nonlinearity::Tanh, &one)[0];
        assert_abs_diff_eq!(dt, 0.419974, epsilon = 1e-6);
        let x = DVector::from_vec(vec![-3.0, 0.0, 7.5]);
        assert_eq!(
            nonlinearity_derivative(Nonlinearity::Identity, &x),
            DVector::from_element(3, 1.0)
        );
        assert_eq!(
            nonlinearity_derivative(Nonlinearity::Relu, &DVector::zeros(1))[0],
            0.0
        );
        let dl = nonlinearity_derivative(Nonlinearity::Logistic, &DVector::zeros(1))[0];
        assert_eq!(dl, 0.25);
    }

    #[test]
    fn derivatives_match_central_differences() {
        for kind in [
            Nonlinearity::Tanh,
            Nonlinearity::Logistic,
            Nonlinearity::Identity,
        ] {
            for &x in &[-2.0, -0.3, 0.4, 1.7] {
                let h = 1e-6;
                let fd = (kind.eval(x + h) - kind.eval(x - h)) / (2.0 * h);
                assert_abs_diff_eq!(kind.derivative(x), fd, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = BrnnParams::zeros(2, 1, 1, Nonlinearity::Tanh);
        let seq = Sequence::new(vec![DVector::zeros(2); 3], vec![DVector::zeros(1); 3]).unwrap();
        let err = forward(&p, &seq, &DVector::zeros(2)).unwrap_err();
        assert!(matches!(err, BrnnError::Dimension { .. }));
        let seq = scalar_seq(&[0.0, 0.0]);
        let err = forward(&p, &seq, &DVector::zeros(3)).unwrap_err();
        assert!(matches!(err, BrnnError::Dimension { .. }));
    }

    #[test]
    fn overflow_names_first_bad_step() {
        // x1 = b = MAX is still finite; x2 = s1 + b overflows.
        let p = scalar_params(0.0, 0.0, 1.0, f64::MAX, Nonlinearity::Identity);
        let mut seq = scalar_seq(&[0.0, 0.0, 0.0, 0.0]);
        seq.s[1][0] = f64::MAX;
        let err = forward(&p, &seq, &DVector::zeros(1)).unwrap_err();
        assert!(matches!(err, BrnnError::Overflow { k: 2 }), "{err:?}");
    }

    #[test]
    fn short_sequences_are_rejected() {
        let err = Sequence::new(vec![DVector::zeros(1)], vec![DVector::zeros(1)]).unwrap_err();
        assert!(matches!(err, BrnnError::Config(_)));
        assert!(Dims::new(1, 1, 1, 0).is_err());
        assert!(Dims::new(0, 1, 1, 3).is_err());
    }
}
