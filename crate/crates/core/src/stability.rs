//! Stable `A` construction and the bounded-input bounded-output analysis.
//!
//! Writing the state equation as `x[k+1] = A x[k] + M[k]` with
//! `M[k] = U h[k] + W s[k] + b`, a bound `‖M[k]‖ ≤ M_sup` and `‖A‖₂ < 1` give
//!
//! ```text
//! ‖x[k]‖ ≤ ‖A‖₂^k ‖x[0]‖ + M_sup / (1 − ‖A‖₂)
//! ```
//!
//! For the quadratic Liapunov function `V(x) = xᵀx` the one-step difference is
//!
//! ```text
//! ΔV = ‖A x + M‖² − ‖x‖² = −‖G x − x2‖² + D,
//! GᵀG = I − AᵀA,   x2 = (G Gᵀ)⁻¹ G Aᵀ M,   D = ‖M‖² + ‖x2‖²
//! ```
//!
//! so `ΔV < 0` outside the ellipsoid `‖G x − x2‖² ≤ D`. `G` is taken as the
//! symmetric square root of `I − AᵀA`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{BrnnError, Result};
use crate::model::{BrnnParams, Nonlinearity};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StableScheme {
    /// `α I`.
    ScaledIdentity,
    /// Diagonal with entries uniform in `[-α, α)`.
    RandomDiagonal,
    /// `Q diag(d) Qᵀ` with `Q` a random orthogonal matrix and `|d_i| ≤ α`.
    RandomOrthogonalScaled,
}

impl StableScheme {
    pub fn name(self) -> &'static str {
        match self {
            StableScheme::ScaledIdentity => "scaled_identity",
            StableScheme::RandomDiagonal => "random_diagonal",
            StableScheme::RandomOrthogonalScaled => "random_orthogonal_scaled",
        }
    }
}

impl fmt::Display for StableScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StableScheme {
    type Err = BrnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled_identity" | "identity" => Ok(StableScheme::ScaledIdentity),
            "random_diagonal" | "diagonal" => Ok(StableScheme::RandomDiagonal),
            "random_orthogonal_scaled" | "orthogonal" => Ok(StableScheme::RandomOrthogonalScaled),
            other => Err(BrnnError::Config(format!(
                "unknown stable-A scheme '{other}'"
            ))),
        }
    }
}

/// Builds a fixed state matrix with spectral norm at most `alpha_a`.
pub fn make_stable_a(
    n: usize,
    scheme: StableScheme,
    alpha_a: f64,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(BrnnError::Config("state dimension must be positive".into()));
    }
    if !(alpha_a > 0.0 && alpha_a <= 1.0) {
        return Err(BrnnError::Config(format!(
            "alpha_A={alpha_a} must lie in (0, 1]"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let a = match scheme {
        StableScheme::ScaledIdentity => DMatrix::identity(n, n) * alpha_a,
        StableScheme::RandomDiagonal => {
            DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.symmetric(alpha_a)))
        }
        StableScheme::RandomOrthogonalScaled => {
            let g = DMatrix::from_fn(n, n, |_, _| rng.symmetric(1.0));
            let q = g.qr().q();
            let d = DVector::from_fn(n, |_, _| rng.symmetric(alpha_a));
            &q * DMatrix::from_diagonal(&d) * q.transpose()
        }
    };
    Ok(a)
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// `M_sup / (1 − ‖A‖₂)`.
pub fn bibo_bound_from_msup(a_norm: f64, m_sup: f64) -> Result<f64> {
    if !(a_norm < 1.0) {
        return Err(BrnnError::UnboundedRegion(format!(
            "‖A‖₂ = {a_norm} is not below 1"
        )));
    }
    Ok(m_sup / (1.0 - a_norm))
}

/// Bound on `‖M[k]‖₂` given bounds on `‖h[k]‖₂` and `‖s[k]‖₂`.
pub fn forcing_bound(params: &BrnnParams, h_sup: f64, s_sup: f64) -> f64 {
    spectral_norm(&params.u) * h_sup + spectral_norm(&params.w) * s_sup + params.b.norm()
}

/// BIBO bound for inputs with `‖s[k]‖₂ ≤ s_sup`. Needs a bounded σ
/// (`‖h‖₂ ≤ √n`); for relu or identity use [`bibo_bound_with_hidden_sup`].
pub fn bibo_bound(params: &BrnnParams, s_sup: f64) -> Result<f64> {
    if !params.sigma.is_bounded() {
        return Err(BrnnError::UnboundedRegion(format!(
            "σ = {} is unbounded; supply a measured hidden bound",
            params.sigma
        )));
    }
    let h_sup = (params.n() as f64).sqrt();
    bibo_bound_with_hidden_sup(params, s_sup, h_sup)
}

/// BIBO bound with an explicit `sup ‖h[k]‖₂`, e.g. measured on a rollout.
pub fn bibo_bound_with_hidden_sup(params: &BrnnParams, s_sup: f64, h_sup: f64) -> Result<f64> {
    bibo_bound_from_msup(
        spectral_norm(&params.a),
        forcing_bound(params, h_sup, s_sup),
    )
}

/// Sup of `‖h[k]‖₂` along a trajectory.
pub fn measured_hidden_sup(h: &[DVector<f64>]) -> f64 {
    h.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// `ΔV = ‖A x + M‖² − ‖x‖²`.
pub fn delta_v(a: &DMatrix<f64>, x: &DVector<f64>, m: &DVector<f64>) -> f64 {
    (a * x + m).norm_squared() - x.norm_squared()
}

/// The region outside of which `V(x) = ‖x‖²` strictly decreases.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovRegion {
    /// Symmetric factor with `GᵀG = I − AᵀA`.
    pub g: DMatrix<f64>,
    /// Center term for the worst-case forcing `M = M_sup v`, where `v` is the
    /// top right singular vector of `G⁻¹Aᵀ` (sign fixed so the first nonzero
    /// entry of `M` is positive).
    pub x_star2: DVector<f64>,
    /// `M_sup² + ‖x_star2‖²`, the largest offset over `‖M‖ ≤ M_sup`.
    pub d_lyap: f64,
    /// `√d_lyap`.
    pub radius: f64,
    pub m_sup: f64,
    /// The forcing that produced `x_star2`.
    pub worst_forcing: DVector<f64>,
    a: DMatrix<f64>,
    g_inv: DMatrix<f64>,
}

impl LyapunovRegion {
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// `x2 = (G Gᵀ)⁻¹ G Aᵀ M` for a particular forcing `M`.
    pub fn x_star2_for(&self, m: &DVector<f64>) -> DVector<f64> {
        // (G Gᵀ)⁻¹ G = G⁻¹ for symmetric invertible G
        &self.g_inv * (self.a.transpose() * m)
    }

    /// `D = ‖M‖² + ‖x2‖²` for a particular forcing `M`.
    pub fn offset_for(&self, m: &DVector<f64>) -> f64 {
        m.norm_squared() + self.x_star2_for(m).norm_squared()
    }

    /// `ΔV` through the completed square, `−‖G x − x2‖² + D`.
    pub fn delta_v_completed(&self, x: &DVector<f64>, m: &DVector<f64>) -> f64 {
        let x2 = self.x_star2_for(m);
        -(&self.g * x - &x2).norm_squared() + m.norm_squared() + x2.norm_squared()
    }

    /// Whether `x` lies outside the worst-case ellipsoid `‖G x − x_star2‖² > D`.
    pub fn is_exterior(&self, x: &DVector<f64>) -> bool {
        (&self.g * x - &self.x_star2).norm_squared() > self.d_lyap
    }

    /// Whether `ΔV(x, M) < 0` is guaranteed for every `‖M‖ ≤ M_sup`:
    /// `‖G x‖ > ‖x_star2‖ + radius`. Such `x` lies outside the ellipsoid of
    /// every admissible `M`.
    pub fn is_certified_exterior(&self, x: &DVector<f64>) -> bool {
        (&self.g * x).norm() > self.x_star2.norm() + self.radius
    }

    /// Center of the worst-case ellipsoid in state coordinates, `G⁻¹ x_star2`.
    pub fn center(&self) -> DVector<f64> {
        &self.g_inv * &self.x_star2
    }
}

/// Solves `GᵀG = I − AᵀA` and the matching center/offset for `‖M‖ ≤ m_sup`.
pub fn lyapunov_region(a: &DMatrix<f64>, m_sup: f64) -> Result<LyapunovRegion> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(BrnnError::dim(
            "A",
            "square, non-empty",
            format!("{}x{}", n, a.ncols()),
        ));
    }
    if !(m_sup >= 0.0 && m_sup.is_finite()) {
        return Err(BrnnError::Config(format!(
            "M_sup={m_sup} must be finite and >= 0"
        )));
    }
    let gram = DMatrix::identity(n, n) - a.transpose() * a;
    let eig = gram.symmetric_eigen();
    let min_eig = eig.eigenvalues.min();
    if !(min_eig > 0.0) {
        return Err(BrnnError::UnboundedRegion(format!(
            "I − AᵀA is not positive definite (smallest eigenvalue {min_eig:e})"
        )));
    }
    let q = &eig.eigenvectors;
    let root = eig.eigenvalues.map(f64::sqrt);
    let g = q * DMatrix::from_diagonal(&root) * q.transpose();
    let g_inv = q * DMatrix::from_diagonal(&root.map(|v| 1.0 / v)) * q.transpose();

    // Worst-case direction: the top right singular vector of G⁻¹Aᵀ.
    let gain = &g_inv * a.transpose();
    let svd = gain.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let top = (0..svd.singular_values.len())
        .max_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))
        .unwrap_or(0);
    let mut dir: DVector<f64> = v_t.row(top).transpose();
    if let Some(first) = dir.iter().find(|v| v.abs() > 1e-12) {
        if *first < 0.0 {
            dir = -dir;
        }
    }
    let worst_forcing = dir * m_sup;

    // x2 = (G Gᵀ)⁻¹ G Aᵀ M, solved as written.
    let ggt = &g * g.transpose();
    let rhs = &g * (a.transpose() * &worst_forcing);
    let x_star2 = ggt
        .cholesky()
        .ok_or_else(|| BrnnError::UnboundedRegion("G Gᵀ is singular".into()))?
        .solve(&rhs);

    let d_lyap = m_sup * m_sup + x_star2.norm_squared();
    Ok(LyapunovRegion {
        g,
        x_star2,
        d_lyap,
        radius: d_lyap.sqrt(),
        m_sup,
        worst_forcing,
        a: a.clone(),
        g_inv,
    })
}

/// Stability summary of a fixed `A` under a forcing bound.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub spectral_radius: f64,
    pub spectral_norm: f64,
    /// `None` when `‖A‖₂ ≥ 1`.
    pub bibo_bound: Option<f64>,
    pub m_sup: f64,
    /// `None` when `I − AᵀA` is not positive definite.
    pub region: Option<LyapunovRegion>,
}

impl StabilityReport {
    pub fn new(a: &DMatrix<f64>, m_sup: f64) -> Result<Self> {
        let norm = spectral_norm(a);
        let bound = bibo_bound_from_msup(norm, m_sup).ok();
        let region = match lyapunov_region(a, m_sup) {
            Ok(r) => Some(r),
            Err(BrnnError::UnboundedRegion(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(StabilityReport {
            spectral_radius: spectral_radius(a),
            spectral_norm: norm,
            bibo_bound: bound,
            m_sup,
            region,
        })
    }

    /// Report for a trained network, with `M_sup` derived from its weights.
    pub fn for_params(params: &BrnnParams, s_sup: f64, h_sup: Option<f64>) -> Result<Self> {
        let h_sup = match (h_sup, params.sigma) {
            (Some(h), _) => h,
            (None, Nonlinearity::Tanh | Nonlinearity::Logistic) => (params.n() as f64).sqrt(),
            (None, other) => {
                return Err(BrnnError::UnboundedRegion(format!(
                    "σ = {other} is unbounded; supply a hidden bound"
                )))
            }
        };
        StabilityReport::new(&params.a, forcing_bound(params, h_sup, s_sup))
    }

    pub const CSV_HEADER: &'static str =
        "spectral_radius,spectral_norm,bibo_bound,m_sup,x_star2_norm,d_lyap,radius";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "inf".to_string(), |v| v.to_string());
        let region = self.region.as_ref();
        format!(
            "{},{},{},{},{},{},{}",
            self.spectral_radius,
            self.spectral_norm,
            opt(self.bibo_bound),
            self.m_sup,
            opt(region.map(|r| r.x_star2.norm())),
            opt(region.map(|r| r.d_lyap)),
            opt(region.map(|r| r.radius)),
        )
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "stability report")?;
        writeln!(f, "  spectral radius of A : {:.6}", self.spectral_radius)?;
        writeln!(f, "  spectral norm of A   : {:.6}", self.spectral_norm)?;
        writeln!(f, "  forcing bound M_sup  : {:.6}", self.m_sup)?;
        match self.bibo_bound {
            Some(b) => writeln!(f, "  bibo bound           : {b:.6}")?,
            None => writeln!(f, "  bibo bound           : unbounded (‖A‖₂ >= 1)")?,
        }
        match &self.region {
            Some(r) => {
                writeln!(f, "  ‖x*_2‖               : {:.6}", r.x_star2.norm())?;
                writeln!(f, "  D_lyap               : {:.6}", r.d_lyap)?;
                writeln!(f, "  radius               : {:.6}", r.radius)?;
                if r.g.nrows() == 1 {
                    let c = r.center()[0];
                    let half = r.radius / r.g[(0, 0)];
                    writeln!(f, "  G                    : {:.6}", r.g[(0, 0)])?;
                    writeln!(f, "  ΔV < 0 for           : |x - {c:.6}| > {half:.6}")?;
                }
            }
            None => writeln!(
                f,
                "  liapunov region      : none (I - AᵀA not positive definite)"
            )?,
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scaled_identity_examples() {
        let a = make_stable_a(3, StableScheme::ScaledIdentity, 0.5, 0).unwrap();
        assert_eq!(a, DMatrix::identity(3, 3) * 0.5);
        let a = make_stable_a(4, StableScheme::ScaledIdentity, 1.0, 0).unwrap();
        assert_abs_diff_eq!(spectral_norm(&a), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn every_scheme_respects_alpha() {
        for scheme in [
            StableScheme::ScaledIdentity,
            StableScheme::RandomDiagonal,
            StableScheme::RandomOrthogonalScaled,
        ] {
            for seed in 0..10 {
                let a = make_stable_a(6, scheme, 0.8, seed).unwrap();
                assert!(spectral_norm(&a) <= 0.8 + 1e-12, "{scheme}");
                assert!(spectral_radius(&a) <= spectral_norm(&a) + 1e-12);
            }
        }
    }

    #[test]
    fn alpha_out_of_range() {
        assert!(make_stable_a(2, StableScheme::ScaledIdentity, 0.0, 0).is_err());
        assert!(make_stable_a(2, StableScheme::ScaledIdentity, 1.2, 0).is_err());
    }

    #[test]
    fn bibo_examples() {
        let mut p = BrnnParams::zeros(1, 1, 1, Nonlinearity::Tanh);
        p.a[(0, 0)] = 0.5;
        assert_eq!(bibo_bound(&p, 1.0).unwrap(), 0.0);
        assert_eq!(bibo_bound_from_msup(0.5, 1.0).unwrap(), 2.0);
        assert_abs_diff_eq!(
            bibo_bound_from_msup(0.9, 1.0).unwrap(),
            10.0,
            epsilon = 1e-14
        );
        assert!(matches!(
            bibo_bound_from_msup(1.0, 1.0),
            Err(BrnnError::UnboundedRegion(_))
        ));
        p.sigma = Nonlinearity::Relu;
        assert!(bibo_bound(&p, 1.0).is_err());
        assert_eq!(bibo_bound_with_hidden_sup(&p, 1.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn scalar_region() {
        let a = DMatrix::from_element(1, 1, 0.5);
        let r = lyapunov_region(&a, 1.0).unwrap();
        assert_abs_diff_eq!(r.g[(0, 0)], 0.75f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.x_star2[0], 1.0 / 3.0f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.d_lyap, 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.center()[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.radius / r.g[(0, 0)], 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_a_and_zero_forcing() {
        let r = lyapunov_region(&DMatrix::zeros(3, 3), 2.0).unwrap();
        assert_abs_diff_eq!(
            (&r.g - DMatrix::identity(3, 3)).norm(),
            0.0,
            epsilon = 1e-14
        );
        assert_eq!(r.x_star2.norm(), 0.0);
        assert_eq!(r.d_lyap, 4.0);

        let a = make_stable_a(3, StableScheme::RandomOrthogonalScaled, 0.7, 3).unwrap();
        let r = lyapunov_region(&a, 0.0).unwrap();
        assert_eq!(r.x_star2.norm(), 0.0);
        assert_eq!(r.d_lyap, 0.0);
    }

    #[test]
    fn completed_square_matches_direct_difference() {
        let a = make_stable_a(4, StableScheme::RandomOrthogonalScaled, 0.9, 8).unwrap();
        let r = lyapunov_region(&a, 1.0).unwrap();
        let mut rng = SplitMix64::new(99);
        for _ in 0..100 {
            let x = DVector::from_fn(4, |_, _| rng.symmetric(5.0));
            let m = DVector::from_fn(4, |_, _| rng.symmetric(1.0));
            let direct = delta_v(&a, &x, &m);
            assert_abs_diff_eq!(
                r.delta_v_completed(&x, &m),
                direct,
                epsilon = 1e-9 * (1.0 + direct.abs())
            );
        }
        // G x2 = Aᵀ M for the stored worst case
        let lhs = r.g.transpose() * &r.x_star2;
        let rhs = a.transpose() * &r.worst_forcing;
        assert_abs_diff_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn unstable_a_has_no_region() {
        let a = DMatrix::identity(2, 2) * 1.0;
        assert!(matches!(
            lyapunov_region(&a, 1.0),
            Err(BrnnError::UnboundedRegion(_))
        ));
        let rep = StabilityReport::new(&a, 1.0).unwrap();
        assert!(rep.bibo_bound.is_none());
        assert!(rep.region.is_none());
    }

    #[test]
    fn report_text_and_row() {
        let a = DMatrix::from_element(1, 1, 0.5);
        let rep = StabilityReport::new(&a, 1.0).unwrap();
        let text = rep.to_string();
        assert!(text.contains("bibo bound           : 2.000000"), "{text}");
        assert!(text.contains("D_lyap               : 1.333333"), "{text}");
        assert!(text.contains("|x - 0.666667| > 1.333333"), "{text}");
        assert!(rep.csv_row().starts_with("0.5,0.5,2,1,"));
    }
}
