//! Expected zero counts as integrals of the Kac-Rice density, on the
//! exponent side (`x ∈ ℝ^m`) and on the moment side (`p ∈ P`).

pub mod cubature;

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::expsum::ExpSum;
use crate::geometry::{ball_sphere_constants, hull::convex_polygon};
pub use cubature::{adaptive, adaptive_box, compensated_sum, Cell, CubatureResult};

/// Number of doubling shells tried before AUTO truncation gives up.
const MAX_SHELLS: usize = 40;

/// Integration region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    /// Box grown around the sum's center until the tail shell is negligible.
    Auto,
    /// Explicit box; bounds may be infinite.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

/// Tolerances, region and evaluation budget for a cubature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub region: Region,
    pub max_evals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-8,
            rel_tol: 1e-8,
            region: Region::Auto,
            max_evals: 20_000_000,
        }
    }
}

impl Quadrature {
    pub fn with_tol(tol: f64) -> Self {
        Quadrature {
            abs_tol: tol,
            rel_tol: tol,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Input(
                "quadrature tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Integral value with its estimated absolute error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub cells: usize,
    pub evals: usize,
    /// Final half-width of the AUTO box, if AUTO was used.
    pub radius: Option<f64>,
    /// Moment-side only: nodes where `μ⁻¹` failed and contributed zero.
    pub inversion_failures: usize,
}

impl Estimate {
    fn zero() -> Self {
        Estimate {
            value: 0.0,
            error: 0.0,
            cells: 0,
            evals: 0,
            radius: None,
            inversion_failures: 0,
        }
    }

    fn absorb(&mut self, r: &CubatureResult) {
        self.value += r.value;
        self.error += r.error;
        self.cells += r.cells;
        self.evals += r.evals;
    }
}

fn density_prefactor(m: usize) -> f64 {
    2.0 / ball_sphere_constants(m).1
}

fn check_supported(e: &ExpSum) -> Result<()> {
    if e.dim() > 3 {
        return Err(Error::UnsupportedDimension(e.dim()));
    }
    Ok(())
}

/// Integrates `f` over ℝ^m: a core box of half-width `r0` about `center`,
/// then shells `R ≤ ‖x-c‖_∞ ≤ 2R` with doubling `R` until a shell
/// contributes less than `abs_tol/10`.
pub fn integrate_auto<F>(f: &F, center: &[f64], r0: f64, q: &Quadrature) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let m = center.len();
    let core = Cell::new(
        center.iter().map(|c| c - r0).collect(),
        center.iter().map(|c| c + r0).collect(),
    );
    let mut est = Estimate::zero();
    let r = adaptive(f, vec![core], q.abs_tol / 2.0, q.rel_tol / 2.0, q.max_evals)?;
    est.absorb(&r);
    let mut radius = r0;
    for _ in 0..MAX_SHELLS {
        let cells = shell_cells(center, radius);
        debug_assert_eq!(cells.len(), 4usize.pow(m as u32) - 2usize.pow(m as u32));
        let budget = q.max_evals.saturating_sub(est.evals).max(1);
        let r =
            adaptive(f, cells, q.abs_tol / 20.0, q.rel_tol / 2.0, budget).map_err(|e| match e {
                Error::Convergence {
                    iterations,
                    residual,
                    partial,
                } => Error::Convergence {
                    iterations,
                    residual,
                    partial: partial + est.value,
                },
                other => other,
            })?;
        est.absorb(&r);
        radius *= 2.0;
        if r.value.abs() < q.abs_tol / 10.0 {
            est.radius = Some(radius);
            return Ok(est);
        }
    }
    Err(Error::Convergence {
        iterations: MAX_SHELLS,
        residual: f64::NAN,
        partial: est.value,
    })
}

/// Cells of width `r` tiling `[c-2r, c+2r]^m` minus `[c-r, c+r]^m`.
fn shell_cells(center: &[f64], r: f64) -> Vec<Cell> {
    let m = center.len();
    let mut out = Vec::new();
    for idx in 0..4usize.pow(m as u32) {
        let mut k = idx;
        let mut digits = Vec::with_capacity(m);
        for _ in 0..m {
            digits.push(k % 4);
            k /= 4;
        }
        if digits.iter().all(|&d| d == 1 || d == 2) {
            continue;
        }
        let lo: Vec<f64> = digits
            .iter()
            .zip(center)
            .map(|(&d, c)| c + (d as f64 - 2.0) * r)
            .collect();
        let hi: Vec<f64> = lo.iter().map(|v| v + r).collect();
        out.push(Cell::new(lo, hi));
    }
    out
}

/// Expected number of real zeros `(2/s_m)∫√det g_x dx` over the region of `q`.
/// Degenerate supports have no zeros almost surely and give exactly 0.
pub fn esol_total(e: &ExpSum, q: &Quadrature) -> Result<Estimate> {
    q.validate()?;
    check_supported(e)?;
    if !e.is_nondegenerate() {
        return Ok(Estimate::zero());
    }
    let c = density_prefactor(e.dim());
    let f = |x: &[f64]| c * e.sqrt_det_metric(x);
    match &q.region {
        Region::Auto => {
            let gap = e
                .support()
                .min_axis_gap()
                .ok_or_else(|| Error::Degenerate("support has no nonzero axis gap".into()))?;
            integrate_auto(&f, &e.center(), 5.0 / gap, q)
        }
        Region::Box { lo, hi } => esol_region(e, lo, hi, q),
    }
}

/// Expected number of zeros inside the box `[lo, hi]` (bounds may be infinite).
pub fn esol_region(e: &ExpSum, lo: &[f64], hi: &[f64], q: &Quadrature) -> Result<Estimate> {
    q.validate()?;
    check_supported(e)?;
    check_dim(e.dim(), lo.len())?;
    check_dim(e.dim(), hi.len())?;
    if !e.is_nondegenerate() {
        return Ok(Estimate::zero());
    }
    let c = density_prefactor(e.dim());
    let f = |x: &[f64]| c * e.sqrt_det_metric(x);
    let r = adaptive_box(&f, lo, hi, q.abs_tol, q.rel_tol, q.max_evals)?;
    let mut est = Estimate::zero();
    est.absorb(&r);
    Ok(est)
}

/// `(1 - cos πs)/2` and its derivative: clusters nodes at both ends of
/// `[0,1]`, which tames the inverse-square-root growth of the moment-side
/// integrand at `∂P`.
fn sin2(s: f64) -> (f64, f64) {
    let pi = std::f64::consts::PI;
    (0.5 * (1.0 - (pi * s).cos()), 0.5 * pi * (pi * s).sin())
}

/// Expected number of zeros computed on the moment side,
/// `1/(2^{(m-2)/2} s_m) ∫_P √det D²Φ*(p) dp`, for `m ≤ 2`.
pub fn esol_pspace(e: &ExpSum, q: &Quadrature) -> Result<Estimate> {
    q.validate()?;
    let m = e.dim();
    if m > 2 {
        return Err(Error::UnsupportedDimension(m));
    }
    if !e.is_nondegenerate() {
        return Ok(Estimate::zero());
    }
    let (_, s_m) = ball_sphere_constants(m);
    let pref = 1.0 / (2f64.powf((m as f64 - 2.0) / 2.0) * s_m);
    let newton_tol = 1e-13 * (1.0 + e.support().max_norm());
    let failures = AtomicUsize::new(0);
    let legendre = |p: &[f64]| match e.newton_invert(p, newton_tol, 300) {
        Ok(x) => e.legendre_density_at(&x),
        Err(_) => {
            failures.fetch_add(1, Ordering::Relaxed);
            0.0
        }
    };
    let unit = Cell::new(vec![0.0; m], vec![1.0; m]);
    let mut est = Estimate::zero();
    if m == 1 {
        let pts: Vec<f64> = e.support().points().map(|p| p[0]).collect();
        let lo = pts.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = pts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let f = |s: &[f64]| {
            let (u, du) = sin2(s[0]);
            let p = lo + (hi - lo) * u;
            pref * legendre(&[p]) * (hi - lo) * du
        };
        est.absorb(&adaptive(
            &f,
            vec![unit],
            q.abs_tol,
            q.rel_tol,
            q.max_evals,
        )?);
    } else {
        let pts: Vec<[f64; 2]> = e.support().points().map(|p| [p[0], p[1]]).collect();
        let poly: Vec<[f64; 2]> = convex_polygon(&pts).into_iter().map(|i| pts[i]).collect();
        let a = poly[0];
        let tris: Vec<([f64; 2], [f64; 2])> = (1..poly.len() - 1)
            .map(|i| (poly[i], poly[i + 1]))
            .collect();
        for (b, c) in tris {
            let det = ((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])).abs();
            // Collapsed-square map p = A + u(B-A) + uv(C-B), Jacobian u·det.
            let f = |s: &[f64]| {
                let (u, du) = sin2(s[0]);
                let (v, dv) = sin2(s[1]);
                let p = [
                    a[0] + u * (b[0] - a[0]) + u * v * (c[0] - b[0]),
                    a[1] + u * (b[1] - a[1]) + u * v * (c[1] - b[1]),
                ];
                pref * legendre(&p) * u * det * du * dv
            };
            let share = q.abs_tol / (poly.len() - 2) as f64;
            est.absorb(&adaptive(
                &f,
                vec![unit.clone()],
                share,
                q.rel_tol,
                q.max_evals,
            )?);
        }
    }
    est.inversion_failures = failures.into_inner();
    Ok(est)
}

/// Both sides of `esol > vol(P) / (2^{m-1} s_m diam(P)^m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub esol: f64,
    pub esol_error: f64,
    pub bound: f64,
    pub volume: f64,
    pub diameter: f64,
    /// `dim P < m`: both sides vanish and the inequality is vacuous.
    pub degenerate: bool,
    pub holds: bool,
}

/// Evaluates the Euclidean-volume lower bound and compares it with `esol_total`.
pub fn lower_bound_check(e: &ExpSum, q: &Quadrature) -> Result<LowerBoundReport> {
    check_supported(e)?;
    let m = e.dim();
    let hv = e.support().hull_volume()?;
    let diameter = e.support().diameter();
    let (_, s_m) = ball_sphere_constants(m);
    let degenerate = hv.degenerate || !e.is_nondegenerate();
    let bound = if degenerate {
        0.0
    } else {
        hv.volume / (2f64.powi(m as i32 - 1) * s_m * diameter.powi(m as i32))
    };
    let est = esol_total(e, q)?;
    Ok(LowerBoundReport {
        esol: est.value,
        esol_error: est.error,
        bound,
        volume: hv.volume,
        diameter,
        degenerate,
        holds: !degenerate && est.value - est.error > bound,
    })
}
