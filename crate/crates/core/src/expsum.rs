//! Gaussian exponential sums `E(x) = Σ_a ξ_a α_a e^{<a,x>}` and their
//! pointwise quantities.
//!
//! All evaluations go through the shifted softmax
//! `λ_a(x) = exp(2(w_a - L)) / Σ_b exp(2(w_b - L))`, `w_a = <a,x> + log α_a`,
//! `L = max_a w_a`, so nothing overflows for large `‖x‖`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::geometry::{ball_sphere_constants, dot, norm, QuadForm, SupportSet};

/// Tolerance for exposed faces used by the asymptotic routines.
pub const FACE_TOL: f64 = 1e-9;

/// Determinants below this are treated as a degenerate metric.
pub const DET_FLOOR: f64 = 1e-300;

/// A finite support `A ⊂ ℝ^m` with strictly positive coefficients `α_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSum {
    support: SupportSet,
    coeffs: Vec<f64>,
    log_coeffs: Vec<f64>,
}

/// JSON form of an [`ExpSum`]. `coeffs` defaults to all ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpSumJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<u32>,
    pub dim: usize,
    pub support: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
}

/// Everything the Kac-Rice pipeline needs at one point `x`.
#[derive(Debug, Clone)]
pub struct EvalBundle {
    pub x: Vec<f64>,
    /// `log K(x)`; `K` itself overflows far out.
    pub log_k: f64,
    pub k: f64,
    /// `K̄(x) = e^{-2 h_P(x)} K(x)`.
    pub kbar: f64,
    /// `Φ = ½ log K`.
    pub phi: f64,
    pub lambda: Vec<f64>,
    /// Moment map `μ = ∇Φ = Σ λ_a a`.
    pub mu: Vec<f64>,
    /// Adler-Taylor metric `g_x = Σ λ_a (a - μ)²`.
    pub g: QuadForm,
    pub g_dual: Option<QuadForm>,
    /// Kac-Rice density `(2/s_m) √det g_x`.
    pub density: f64,
}

/// Residuals of a finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeReport {
    pub grad_residual: f64,
    pub hess_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullbackReport {
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub(crate) struct Moments {
    pub phi: f64,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// Row-major `m × m`.
    pub g: Vec<f64>,
}

impl ExpSum {
    pub fn new(support: SupportSet, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != support.len() {
            return Err(Error::Input(format!(
                "{} coefficients for {} support points",
                coeffs.len(),
                support.len()
            )));
        }
        if let Some(c) = coeffs.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Input(format!(
                "coefficient {c} is not a positive real"
            )));
        }
        let log_coeffs = coeffs.iter().map(|c| c.ln()).collect();
        Ok(ExpSum {
            support,
            coeffs,
            log_coeffs,
        })
    }

    /// All coefficients equal to one.
    pub fn unit(support: SupportSet) -> Self {
        let n = support.len();
        ExpSum::new(support, vec![1.0; n]).expect("unit coefficients are valid")
    }

    pub fn from_points(
        dim: usize,
        points: Vec<Vec<f64>>,
        coeffs: Option<Vec<f64>>,
    ) -> Result<Self> {
        let support = SupportSet::new(dim, points)?;
        let coeffs = coeffs.unwrap_or_else(|| vec![1.0; support.len()]);
        ExpSum::new(support, coeffs)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ExpSumJson =
            serde_json::from_str(s).map_err(|e| Error::Input(format!("malformed JSON: {e}")))?;
        Self::from_json(raw)
    }

    pub fn from_json(raw: ExpSumJson) -> Result<Self> {
        ExpSum::from_points(raw.dim, raw.support, raw.coeffs)
    }

    pub fn to_json(&self) -> ExpSumJson {
        ExpSumJson {
            schema: Some(crate::SCHEMA_VERSION),
            dim: self.dim(),
            support: self.support.to_vecs(),
            coeffs: Some(self.coeffs.clone()),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("serializable")
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.support.is_full_dim()
    }

    /// The restricted sum `(A', α|_{A'})` on the given indices.
    pub fn restrict(&self, idx: &[usize]) -> Result<Self> {
        let support = self.support.subset(idx)?;
        let coeffs = idx.iter().map(|&i| self.coeffs[i]).collect();
        ExpSum::new(support, coeffs)
    }

    /// Shift every exponent by `b`.
    pub fn translated(&self, b: &[f64]) -> Result<Self> {
        ExpSum::new(self.support.translated(b)?, self.coeffs.clone())
    }

    pub(crate) fn moments(&self, x: &[f64]) -> Moments {
        let m = self.dim();
        let w: Vec<f64> = self
            .support
            .points()
            .zip(&self.log_coeffs)
            .map(|(a, la)| dot(a, x) + la)
            .collect();
        let top = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda: Vec<f64> = w.iter().map(|wa| (2.0 * (wa - top)).exp()).collect();
        let total: f64 = lambda.iter().sum();
        lambda.iter_mut().for_each(|l| *l /= total);
        let phi = top + 0.5 * total.ln();

        let mut mu = vec![0.0; m];
        for (a, l) in self.support.points().zip(&lambda) {
            for k in 0..m {
                mu[k] += l * a[k];
            }
        }
        let mut g = vec![0.0; m * m];
        let mut c = vec![0.0; m];
        for (a, l) in self.support.points().zip(&lambda) {
            for k in 0..m {
                c[k] = a[k] - mu[k];
            }
            for i in 0..m {
                for j in i..m {
                    g[i * m + j] += l * c[i] * c[j];
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                g[i * m + j] = g[j * m + i];
            }
        }
        Moments { phi, lambda, mu, g }
    }

    pub(crate) fn phi_at(&self, x: &[f64]) -> f64 {
        let w: Vec<f64> = self
            .support
            .points()
            .zip(&self.log_coeffs)
            .map(|(a, la)| dot(a, x) + la)
            .collect();
        let top = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + 0.5
            * w.iter()
                .map(|wa| (2.0 * (wa - top)).exp())
                .sum::<f64>()
                .ln()
    }

    /// All pointwise quantities at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<EvalBundle> {
        check_dim(self.dim(), x.len())?;
        check_finite("evaluation point", x)?;
        let m = self.dim();
        let mo = self.moments(x);
        let g = QuadForm::from_symmetric_unchecked(DMatrix::from_row_slice(m, m, &mo.g));
        let det = if self.is_nondegenerate() {
            g.det()
        } else {
            0.0
        };
        let g_dual = if det > DET_FLOOR { g.dual().ok() } else { None };
        let (_, s_m) = ball_sphere_constants(m);
        let density = if det > 0.0 {
            2.0 / s_m * det.sqrt()
        } else {
            0.0
        };
        let h = self.support.support_function(x)?;
        let log_k = 2.0 * mo.phi;
        Ok(EvalBundle {
            x: x.to_vec(),
            log_k,
            k: log_k.exp(),
            kbar: (log_k - 2.0 * h).exp(),
            phi: mo.phi,
            lambda: mo.lambda,
            mu: mo.mu,
            g,
            g_dual,
            density,
        })
    }

    /// Potential `Φ(x) = ½ log K(x)`.
    pub fn potential(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_finite("evaluation point", x)?;
        Ok(self.phi_at(x))
    }

    pub fn moment_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        check_finite("evaluation point", x)?;
        Ok(self.moments(x).mu)
    }

    pub fn metric(&self, x: &[f64]) -> Result<QuadForm> {
        check_dim(self.dim(), x.len())?;
        check_finite("evaluation point", x)?;
        let m = self.dim();
        let mo = self.moments(x);
        Ok(QuadForm::from_symmetric_unchecked(DMatrix::from_row_slice(
            m, m, &mo.g,
        )))
    }

    /// `√det g_x` without allocation of the full bundle; the hot path of
    /// every cubature.
    pub(crate) fn sqrt_det_metric(&self, x: &[f64]) -> f64 {
        if !self.is_nondegenerate() {
            return 0.0;
        }
        let m = self.dim();
        let g = self.moments(x).g;
        let det = small_det(&g, m);
        if det > 0.0 {
            det.sqrt()
        } else {
            0.0
        }
    }

    /// Kac-Rice density `(2/s_m) √det g_x`; zero when the metric degenerates.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_finite("evaluation point", x)?;
        let (_, s_m) = ball_sphere_constants(self.dim());
        Ok(2.0 / s_m * self.sqrt_det_metric(x))
    }

    /// Central differences of `Φ` against `μ` and `2g`.
    pub fn hessian_check(&self, x: &[f64], h: f64) -> Result<DerivativeReport> {
        if !(h > 0.0) {
            return Err(Error::Input(
                "finite-difference step must be positive".into(),
            ));
        }
        let b = self.evaluate(x)?;
        let m = self.dim();
        let mut xp = x.to_vec();
        let mut grad_res: f64 = 0.0;
        for i in 0..m {
            xp[i] = x[i] + h;
            let fp = self.phi_at(&xp);
            xp[i] = x[i] - h;
            let fm = self.phi_at(&xp);
            xp[i] = x[i];
            grad_res = grad_res.max(((fp - fm) / (2.0 * h) - b.mu[i]).abs());
        }
        let mut hess_res: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let fd = if i == j {
                    xp[i] = x[i] + h;
                    let fp = self.phi_at(&xp);
                    xp[i] = x[i] - h;
                    let fm = self.phi_at(&xp);
                    xp[i] = x[i];
                    (fp - 2.0 * b.phi + fm) / (h * h)
                } else {
                    let mut f = |si: f64, sj: f64| {
                        xp[i] = x[i] + si * h;
                        xp[j] = x[j] + sj * h;
                        let v = self.phi_at(&xp);
                        xp[i] = x[i];
                        xp[j] = x[j];
                        v
                    };
                    (f(1.0, 1.0) - f(1.0, -1.0) - f(-1.0, 1.0) + f(-1.0, -1.0)) / (4.0 * h * h)
                };
                hess_res = hess_res.max((fd - 2.0 * b.g.entry(i, j)).abs());
            }
        }
        let diam = self.support.diameter();
        let tolerance = 1e-6_f64.max((2.0 * diam).powi(4) * h * h / 6.0);
        Ok(DerivativeReport {
            grad_residual: grad_res,
            hess_residual: hess_res,
            tolerance,
            passed: grad_res <= tolerance && hess_res <= tolerance,
        })
    }

    /// Starting point for quadrature boxes and root scans: `μ⁻¹` of the
    /// centroid of `A`, or the origin when that fails.
    pub fn center(&self) -> Vec<f64> {
        let zero = vec![0.0; self.dim()];
        if !self.is_nondegenerate() {
            return zero;
        }
        self.newton_invert(&self.support.centroid(), 1e-10, 200)
            .unwrap_or(zero)
    }

    /// Solve `μ(x) = p` for `p` in the interior of `P`.
    pub fn invert_moment(&self, p: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        check_dim(self.dim(), p.len())?;
        check_finite("target point", p)?;
        if !(tol > 0.0) {
            return Err(Error::Input("tolerance must be positive".into()));
        }
        if !self.is_nondegenerate() {
            return Err(Error::Degenerate(
                "dim conv(A) < m, moment map is not onto".into(),
            ));
        }
        let margin = self.interior_margin();
        if !self.support.interior_contains(p, margin) {
            return Err(Error::Domain(format!(
                "{p:?} is not inside the Newton polytope with margin {margin:e}"
            )));
        }
        self.newton_invert(p, tol, max_iter)
    }

    /// Minimal distance to `∂P` accepted by the moment-space routines.
    pub fn interior_margin(&self) -> f64 {
        1e-6 * self.support.diameter()
    }

    /// Damped Newton on `∇Φ(x) = p`, with Jacobian `2 g_x`, halving the step
    /// while the residual does not decrease.
    pub(crate) fn newton_invert(&self, p: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        self.newton_invert_from(p, vec![0.0; self.dim()], tol, max_iter)
    }

    pub(crate) fn newton_invert_from(
        &self,
        p: &[f64],
        mut x: Vec<f64>,
        tol: f64,
        max_iter: usize,
    ) -> Result<Vec<f64>> {
        let m = self.dim();
        let residual = |mo: &Moments| {
            mo.mu
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        let mut mo = self.moments(&x);
        let mut res = residual(&mo);
        for _ in 0..max_iter {
            if res <= tol {
                return Ok(x);
            }
            let jac = DMatrix::from_row_slice(m, m, &mo.g) * 2.0;
            let rhs = DVector::from_iterator(m, mo.mu.iter().zip(p).map(|(a, b)| b - a));
            let step = match jac.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => {
                    let ridge = 1e-14 * jac.trace().abs().max(1e-300);
                    (jac + DMatrix::identity(m, m) * ridge)
                        .lu()
                        .solve(&rhs)
                        .ok_or_else(|| Error::Singular("Newton system is singular".into()))?
                }
            };
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-20 {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
                let tmo = self.moments(&trial);
                let tres = residual(&tmo);
                if tres < res {
                    x = trial;
                    mo = tmo;
                    res = tres;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if res <= tol {
            Ok(x)
        } else {
            Err(Error::Convergence {
                iterations: max_iter,
                residual: res,
                partial: f64::NAN,
            })
        }
    }

    /// Integrand of the moment-space formula: `√det D²Φ*(p) = 1/√det(2 g_x)`
    /// at `x = μ⁻¹(p)`.
    pub fn legendre_density(&self, p: &[f64]) -> Result<f64> {
        let x = self.invert_moment(p, 1e-10, 200)?;
        Ok(self.legendre_density_at(&x))
    }

    pub(crate) fn legendre_density_at(&self, x: &[f64]) -> f64 {
        let m = self.dim();
        let det = small_det(&self.moments(x).g, m) * 2f64.powi(m as i32);
        1.0 / det.sqrt()
    }

    /// `lim_{t→∞} μ(t·x_dir)`: the `α²`-weighted barycenter of the exposed face.
    pub fn asymptotic_moment(&self, x_dir: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x_dir.len())?;
        if norm(x_dir) == 0.0 {
            return Err(Error::Input("direction must be nonzero".into()));
        }
        let face = self.support.exposed_face_indices(x_dir, FACE_TOL)?;
        let total: f64 = face.iter().map(|&i| self.coeffs[i].powi(2)).sum();
        let mut out = vec![0.0; self.dim()];
        for &i in &face {
            let w = self.coeffs[i].powi(2) / total;
            for (o, a) in out.iter_mut().zip(self.support.point(i)) {
                *o += w * a;
            }
        }
        Ok(out)
    }

    /// `‖α^x‖²`, the limit of `K̄(t·x_dir)`.
    pub fn face_norm_sq(&self, x_dir: &[f64]) -> Result<f64> {
        let face = self.support.exposed_face_indices(x_dir, FACE_TOL)?;
        Ok(face.iter().map(|&i| self.coeffs[i].powi(2)).sum())
    }

    /// `lim_{t→∞} g_{y + t·x_dir}`: the metric of the face sum `(A^x, α^x)` at `y`.
    pub fn face_metric_limit(&self, x_dir: &[f64], y: &[f64]) -> Result<QuadForm> {
        check_dim(self.dim(), x_dir.len())?;
        check_dim(self.dim(), y.len())?;
        let nx = norm(x_dir);
        if nx == 0.0 {
            return Err(Error::Input("direction must be nonzero".into()));
        }
        if dot(x_dir, y).abs() > 1e-9 * nx * norm(y).max(1.0) {
            return Err(Error::Input(
                "base point must be orthogonal to the direction".into(),
            ));
        }
        let face = self.support.exposed_face_indices(x_dir, FACE_TOL)?;
        self.restrict(&face)?.metric(y)
    }

    /// Real Veronese map `ν(x) = (√λ_a(x))_a` into the unit sphere of `ℝ^A`.
    pub fn veronese(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        check_finite("evaluation point", x)?;
        Ok(self.moments(x).lambda.iter().map(|l| l.sqrt()).collect())
    }

    /// Checks `‖Dν(u)‖² = g_x(u)` by central differences along `e_i` and
    /// `e_i + e_j`, which determines the whole form by polarization.
    pub fn veronese_pullback_check(&self, x: &[f64], h: f64) -> Result<PullbackReport> {
        if !(h > 0.0) {
            return Err(Error::Input(
                "finite-difference step must be positive".into(),
            ));
        }
        let g = self.metric(x)?;
        let m = self.dim();
        let mut dirs = Vec::new();
        for i in 0..m {
            for j in i..m {
                let mut u = vec![0.0; m];
                u[i] += 1.0;
                u[j] += 1.0;
                dirs.push(u);
            }
        }
        let mut residual: f64 = 0.0;
        for u in &dirs {
            let xp: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(u).map(|(a, b)| a - h * b).collect();
            let (np, nm) = (self.veronese(&xp)?, self.veronese(&xm)?);
            let speed: f64 = np
                .iter()
                .zip(&nm)
                .map(|(a, b)| ((a - b) / (2.0 * h)).powi(2))
                .sum();
            residual = residual.max((speed - g.eval(u)).abs());
        }
        let diam = self.support.diameter();
        let tolerance = 1e-5_f64.max(diam * diam * h);
        Ok(PullbackReport {
            residual,
            tolerance,
            passed: residual <= tolerance,
        })
    }
}

/// Determinant of a row-major `m × m` array.
pub(crate) fn small_det(g: &[f64], m: usize) -> f64 {
    match m {
        1 => g[0],
        2 => g[0] * g[3] - g[1] * g[2],
        3 => {
            g[0] * (g[4] * g[8] - g[5] * g[7]) - g[1] * (g[3] * g[8] - g[5] * g[6])
                + g[2] * (g[3] * g[7] - g[4] * g[6])
        }
        _ => DMatrix::from_row_slice(m, m, g).determinant(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn two_term() -> ExpSum {
        ExpSum::from_points(1, vec![vec![0.0], vec![1.0]], None).unwrap()
    }

    fn triangle() -> ExpSum {
        ExpSum::from_points(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            None,
        )
        .unwrap()
    }

    fn random_sum(pts: &[f64], logc: &[f64]) -> ExpSum {
        let points: Vec<Vec<f64>> = pts.chunks(2).map(|c| c.to_vec()).collect();
        let coeffs = logc.iter().map(|l| l.exp()).collect();
        ExpSum::from_points(2, points, Some(coeffs)).unwrap()
    }

    fn cosh(x: f64) -> f64 {
        x.cosh()
    }

    #[test]
    fn two_term_closed_forms() {
        let e = two_term();
        let b = e.evaluate(&[0.0]).unwrap();
        assert!((b.k - 2.0).abs() < 1e-15);
        assert!((b.mu[0] - 0.5).abs() < 1e-15);
        assert!((b.g.entry(0, 0) - 0.25).abs() < 1e-15);
        let b = e.evaluate(&[1.0]).unwrap();
        assert!((b.mu[0] - (1f64.tanh() + 1.0) / 2.0).abs() < 1e-15);
        assert!((b.mu[0] - 0.880797).abs() < 1e-6);
        assert!((b.g.entry(0, 0) - 1.0 / (4.0 * cosh(1.0).powi(2))).abs() < 1e-15);
        assert!((b.g.entry(0, 0) - 0.104994).abs() < 1e-6);
        for x in [-3.0, -0.5, 0.0, 0.7, 2.5] {
            let d = e.density(&[x]).unwrap();
            assert!((d - 1.0 / (PI * 2.0 * cosh(x))).abs() < 1e-15);
        }
    }

    #[test]
    fn bundle_invariants() {
        let e = random_sum(
            &[0.0, 0.0, 1.3, 0.2, -0.4, 0.9, 0.5, 0.5],
            &[0.1, -0.3, 0.7, 0.0],
        );
        for x in [[0.0, 0.0], [2.0, -1.0], [-30.0, 12.0], [400.0, 400.0]] {
            let b = e.evaluate(&x).unwrap();
            let s: f64 = b.lambda.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(b.lambda.iter().all(|l| *l >= 0.0 && *l <= 1.0));
            let mut mu = [0.0; 2];
            for (a, l) in e.support().points().zip(&b.lambda) {
                mu[0] += l * a[0];
                mu[1] += l * a[1];
            }
            assert!((mu[0] - b.mu[0]).abs() < 1e-12 && (mu[1] - b.mu[1]).abs() < 1e-12);
            let (_, s2) = ball_sphere_constants(2);
            let expect = 2.0 / s2 * b.g.det().max(0.0).sqrt();
            assert!((b.density - expect).abs() < 1e-12);
            assert!(b.phi.is_finite());
        }
        let b = e.evaluate(&[0.3, 0.1]).unwrap();
        assert!(e.support().interior_contains(&b.mu, 1e-9));
        assert!(b.g_dual.is_some());
        assert!(e.evaluate(&[f64::NAN, 0.0]).is_err());
        assert!(e.evaluate(&[0.0]).is_err());
    }

    #[test]
    fn single_term_is_degenerate() {
        let e = ExpSum::from_points(2, vec![vec![1.0, 2.0]], Some(vec![3.0])).unwrap();
        for x in [[0.0, 0.0], [1.0, -2.0]] {
            let b = e.evaluate(&x).unwrap();
            assert_eq!(b.mu, vec![1.0, 2.0]);
            assert_eq!(b.g.det(), 0.0);
            assert_eq!(b.density, 0.0);
            assert!(b.g_dual.is_none());
        }
        let r = e.hessian_check(&[0.2, 0.1], 1e-4).unwrap();
        assert!(r.hess_residual < 1e-6 && r.grad_residual < 1e-9);
        assert!(matches!(
            e.invert_moment(&[1.0, 2.0], 1e-10, 50),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn kostlan_density_scales_with_sqrt_degree() {
        let base = two_term();
        let k4 = ExpSum::from_points(
            1,
            (0..=4).map(|k| vec![k as f64]).collect(),
            Some(vec![1.0, 2.0, 6f64.sqrt(), 2.0, 1.0]),
        )
        .unwrap();
        for x in [-2.0, -0.3, 0.0, 1.1] {
            let ratio = k4.density(&[x]).unwrap() / base.density(&[x]).unwrap();
            assert!((ratio - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_checks() {
        let r = two_term().hessian_check(&[0.3], 1e-4).unwrap();
        assert!(r.passed && r.hess_residual < 1e-6 && r.grad_residual < 1e-6);
        let e = random_sum(
            &[0.0, 0.0, 1.0, 0.3, 0.2, 1.4, 1.1, 1.2],
            &[0.0, 0.4, -0.2, 0.3],
        );
        for x in [
            [0.1, 0.2],
            [-1.0, 0.5],
            [0.7, -0.9],
            [2.0, 1.0],
            [-0.4, -2.2],
        ] {
            let r = e.hessian_check(&x, 1e-4).unwrap();
            assert!(r.hess_residual < 1e-5 && r.grad_residual < 1e-5, "{r:?}");
        }
        assert!(e.hessian_check(&[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn moment_inversion() {
        let e = two_term();
        let x = e.invert_moment(&[0.5], 1e-12, 100).unwrap();
        assert!(x[0].abs() < 1e-12);
        let x = e.invert_moment(&[0.99], 1e-12, 100).unwrap();
        assert!((x[0] - 0.98f64.atanh()).abs() < 1e-9);
        assert!((x[0] - 2.2976).abs() < 1e-4);
        assert!(matches!(
            e.invert_moment(&[1.2], 1e-10, 100),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            e.invert_moment(&[1.0], 1e-10, 100),
            Err(Error::Domain(_))
        ));
        let p = [1.0 - 1e-4];
        assert!(matches!(
            e.invert_moment(&p, 1e-12, 1),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn legendre_density_values() {
        let e = two_term();
        assert!((e.legendre_density(&[0.5]).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        // μ = (1+tanh x)/2 so D²Φ = 2 p (1-p) at p.
        for p in [0.1f64, 0.37, 0.8] {
            let expect = 1.0 / (2.0 * p * (1.0 - p)).sqrt();
            assert!((e.legendre_density(&[p]).unwrap() - expect).abs() < 1e-8);
        }
        assert!(matches!(
            e.legendre_density(&[1.0 - 1e-9]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn asymptotic_moments() {
        let e = two_term();
        assert_eq!(e.asymptotic_moment(&[1.0]).unwrap(), vec![1.0]);
        assert_eq!(e.asymptotic_moment(&[-1.0]).unwrap(), vec![0.0]);
        let t = triangle();
        let lim = t.asymptotic_moment(&[1.0, 1.0]).unwrap();
        assert!((lim[0] - 0.5).abs() < 1e-15 && (lim[1] - 0.5).abs() < 1e-15);
        let far = t.moment_map(&[40.0, 40.0]).unwrap();
        assert!((far[0] - 0.5).abs() < 1e-12 && (far[1] - 0.5).abs() < 1e-12);
        assert!(e.asymptotic_moment(&[0.0]).is_err());
    }

    #[test]
    fn face_metric_limits() {
        let z = two_term().face_metric_limit(&[1.0], &[0.0]).unwrap();
        assert_eq!(z.entry(0, 0), 0.0);
        let t = triangle();
        let lim = t.face_metric_limit(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        // The edge {(1,0),(0,1)} with equal weights: λ = (1/2,1/2), g = (e1-e2)²/4.
        let expect = QuadForm::from_rows(&[vec![0.25, -0.25], vec![-0.25, 0.25]]).unwrap();
        assert!(lim.max_abs_diff(&expect) < 1e-15);
        let at40 = t.metric(&[40.0, 40.0]).unwrap();
        assert!(at40.max_abs_diff(&lim) < 1e-12);
        let y = [0.3, -0.3];
        let lim = t.face_metric_limit(&[1.0, 1.0], &y).unwrap();
        let far = t.metric(&[0.3 + 40.0, -0.3 + 40.0]).unwrap();
        assert!(far.max_abs_diff(&lim) < 1e-12);
        assert!(t.face_metric_limit(&[1.0, 1.0], &[1.0, 0.0]).is_err());
        // Doubling one face coefficient moves the limit but keeps it a λ-covariance.
        let skew = ExpSum::from_points(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            Some(vec![1.0, 2.0, 1.0]),
        )
        .unwrap();
        let lim = skew.face_metric_limit(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!((lim.entry(0, 0) - 0.8 * 0.2).abs() < 1e-15);
    }

    #[test]
    fn kbar_tail_limit() {
        let t = ExpSum::from_points(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            Some(vec![1.0, 2.0, 3.0]),
        )
        .unwrap();
        let dir = [1.0, 1.0];
        let target = t.face_norm_sq(&dir).unwrap();
        assert_eq!(target, 13.0);
        let mut prev = f64::INFINITY;
        for s in [10.0, 20.0, 40.0] {
            let b = t.evaluate(&[s, s]).unwrap();
            let gap = (b.kbar - target).abs();
            assert!(gap <= prev + 1e-13 * target);
            prev = gap;
        }
        assert!(prev < 1e-12 * target);
    }

    #[test]
    fn veronese_map() {
        let e = two_term();
        let v = e.veronese(&[0.0]).unwrap();
        assert!((v[0] - 0.5f64.sqrt()).abs() < 1e-15 && (v[1] - 0.5f64.sqrt()).abs() < 1e-15);
        let t = random_sum(&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0], &[0.0, 0.5, -0.5]);
        for x in [
            [0.1, 0.3],
            [-1.0, 2.0],
            [0.5, -0.5],
            [1.5, 1.5],
            [-2.0, -0.1],
        ] {
            let v = t.veronese(&x).unwrap();
            assert!((norm(&v) - 1.0).abs() < 1e-14);
            let r = t.veronese_pullback_check(&x, 1e-5).unwrap();
            assert!(r.passed && r.residual < 1e-5, "{r:?}");
        }
    }

    #[test]
    fn json_round_trip_and_errors() {
        let e = ExpSum::from_json_str(r#"{"dim": 1, "support": [[0], [1]]}"#).unwrap();
        assert_eq!(e.coeffs(), &[1.0, 1.0]);
        let back = ExpSum::from_json_str(&e.to_json_string()).unwrap();
        assert_eq!(back, e);
        let err = ExpSum::from_json_str(r#"{"dim": 1, "support": [[0], [1]"#).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        assert!(
            ExpSum::from_json_str(r#"{"dim": 1, "support": [[0], [1]], "coeffs": [1, -1]}"#)
                .is_err()
        );
        assert!(ExpSum::from_json_str(r#"{"dim": 2, "support": [[0], [1]]}"#).is_err());
    }

    proptest! {
        #[test]
        fn shift_covariance(
            pts in prop::collection::vec(-2.0..2.0f64, 8),
            logc in prop::collection::vec(-1.0..1.0f64, 4),
            b in prop::collection::vec(-3.0..3.0f64, 2),
            x in prop::collection::vec(-3.0..3.0f64, 2),
        ) {
            let e = random_sum(&pts, &logc);
            prop_assume!(e.is_nondegenerate());
            let s = e.translated(&b).unwrap();
            let (be, bs) = (e.evaluate(&x).unwrap(), s.evaluate(&x).unwrap());
            prop_assert!(be.g.max_abs_diff(&bs.g) < 1e-12);
            prop_assert!((be.density - bs.density).abs() < 1e-12);
            for ((ms, me), bk) in bs.mu.iter().zip(&be.mu).zip(&b) {
                prop_assert!((ms - me - bk).abs() < 1e-12);
            }
        }

        #[test]
        fn gradient_and_hessian_match_differences(
            pts in prop::collection::vec(-2.0..2.0f64, 8),
            logc in prop::collection::vec(-1.0..1.0f64, 4),
            x in prop::collection::vec(-3.0..3.0f64, 2),
        ) {
            let e = random_sum(&pts, &logc);
            let r = e.hessian_check(&x, 1e-4).unwrap();
            prop_assert!(r.grad_residual < 1e-5 && r.hess_residual < 1e-5);
        }

        #[test]
        fn metric_is_psd_and_definite_iff_full_dim(
            pts in prop::collection::vec(-2.0..2.0f64, 6),
            x in prop::collection::vec(-3.0..3.0f64, 2),
        ) {
            let e = random_sum(&pts, &[0.0, 0.0, 0.0]);
            let g = e.metric(&x).unwrap();
            let ev = g.eigenvalues();
            prop_assert!(ev[0] >= -1e-14);
            if e.is_nondegenerate() && e.support().interior_margin(&e.support().centroid()) > 1e-3 {
                prop_assert!(g.det() > 0.0);
            }
        }

        #[test]
        fn inversion_round_trip(
            x0 in prop::collection::vec(-2.0..2.0f64, 2),
        ) {
            let e = random_sum(&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0], &[0.2, 0.0, -0.3, 0.1]);
            let p = e.moment_map(&x0).unwrap();
            let x = e.invert_moment(&p, 1e-12, 200).unwrap();
            let lam_min = e.metric(&x0).unwrap().eigenvalues()[0] * 2.0;
            for k in 0..2 {
                prop_assert!((x[k] - x0[k]).abs() <= 1e-12 / lam_min * 10.0);
            }
        }
    }
}
