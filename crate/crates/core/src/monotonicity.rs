//! Adding one exponent `a₀` with weight `α₀` to an exponential sum.
//!
//! With `K₀ = K + f₀²`, `f₀ = α₀ e^{<a₀,x>}`, the augmented metric is
//! `(K/K₀)(g + τ²)` for the one-form `τ = (f₀/√K₀)(μ - a₀)`, so the zero
//! density is multiplied pointwise by
//! `Ψ = (K/K₀)^{m/2} √(1 + g°(τ))`.
//! `U₋ = {Ψ < 1}` is where the new term removes zeros, `U₊ = {Ψ > 1}` where
//! it adds them.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::expsum::ExpSum;
use crate::geometry::{dist, dot, norm, QuadForm};

/// Half-width of the band around `Ψ = 1` reported as [`Classification::Boundary`].
pub const BOUNDARY_BAND: f64 = 1e-10;

/// A candidate new exponent `a₀` with coefficient `α₀ > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Augmentation {
    pub a0: Vec<f64>,
    pub alpha0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "U_minus")]
    UMinus,
    #[serde(rename = "U_plus")]
    UPlus,
    #[serde(rename = "boundary")]
    Boundary,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::UMinus => "U_minus",
            Classification::UPlus => "U_plus",
            Classification::Boundary => "boundary",
        }
    }

    fn from_psi(psi: f64) -> Self {
        if (psi - 1.0).abs() <= BOUNDARY_BAND {
            Classification::Boundary
        } else if psi < 1.0 {
            Classification::UMinus
        } else {
            Classification::UPlus
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiEval {
    pub x: Vec<f64>,
    /// `Φ₀ = ½ log(K/f₀²)`.
    pub phi0: f64,
    pub tau: Vec<f64>,
    /// `g°(τ)`.
    pub tau_normsq: f64,
    /// `K/K₀`.
    pub ratio: f64,
    pub psi: f64,
    pub classification: Classification,
}

impl Augmentation {
    pub fn new(a0: Vec<f64>, alpha0: f64) -> Result<Self> {
        check_finite("a0", &a0)?;
        if !(alpha0.is_finite() && alpha0 > 0.0) {
            return Err(Error::Input(format!(
                "alpha0 = {alpha0} must be a positive real"
            )));
        }
        Ok(Augmentation { a0, alpha0 })
    }

    fn validate(&self, e: &ExpSum) -> Result<()> {
        check_dim(e.dim(), self.a0.len())?;
        let tol = e.support().dedup_tolerance();
        if e.support().points().any(|a| dist(a, &self.a0) <= tol) {
            return Err(Error::Input("a0 already belongs to the support".into()));
        }
        Ok(())
    }

    /// `log f₀(x) = log α₀ + <a₀, x>`.
    fn log_f0(&self, x: &[f64]) -> f64 {
        self.alpha0.ln() + dot(&self.a0, x)
    }
}

/// The sum over `A ∪ {a₀}`.
pub fn augmented_sum(e: &ExpSum, aug: &Augmentation) -> Result<ExpSum> {
    aug.validate(e)?;
    let mut pts = e.support().to_vecs();
    pts.push(aug.a0.clone());
    let mut coeffs = e.coeffs().to_vec();
    coeffs.push(aug.alpha0);
    ExpSum::from_points(e.dim(), pts, Some(coeffs))
}

struct Pieces {
    phi0: f64,
    /// `log(K/K₀)`.
    log_ratio: f64,
    /// `f₀²/K₀ = 1 - K/K₀`.
    weight0: f64,
    diff: Vec<f64>,
    g: QuadForm,
    g_dual: QuadForm,
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn pieces(e: &ExpSum, aug: &Augmentation, x: &[f64]) -> Result<Pieces> {
    aug.validate(e)?;
    let b = e.evaluate(x)?;
    let g_dual = b
        .g_dual
        .ok_or_else(|| Error::Degenerate(format!("metric is degenerate at {x:?}")))?;
    let phi0 = b.phi - aug.log_f0(x);
    // s = f₀²/K = e^{-2Φ₀}; K/K₀ = 1/(1+s).
    let log_s = -2.0 * phi0;
    let log_ratio = -softplus(log_s);
    let weight0 = if log_s > 0.0 {
        1.0 / (1.0 + (-log_s).exp())
    } else {
        let s = log_s.exp();
        s / (1.0 + s)
    };
    let diff = b.mu.iter().zip(&aug.a0).map(|(m, a)| m - a).collect();
    Ok(Pieces {
        phi0,
        log_ratio,
        weight0,
        diff,
        g: b.g,
        g_dual,
    })
}

/// `Ψ(x)` from the one-form `τ`.
pub fn psi(e: &ExpSum, aug: &Augmentation, x: &[f64]) -> Result<PsiEval> {
    let pc = pieces(e, aug, x)?;
    let m = e.dim() as f64;
    let scale = pc.weight0.sqrt();
    let tau: Vec<f64> = pc.diff.iter().map(|d| scale * d).collect();
    let tau_normsq = pc.g_dual.eval(&tau).max(0.0);
    let psi = (0.5 * m * pc.log_ratio).exp() * (1.0 + tau_normsq).sqrt();
    Ok(PsiEval {
        x: x.to_vec(),
        phi0: pc.phi0,
        tau,
        tau_normsq,
        ratio: pc.log_ratio.exp(),
        psi,
        classification: Classification::from_psi(psi),
    })
}

/// `Ψ(x)` written through `Φ₀` alone:
/// `(1 - e^{-2Φ₀}/(1+e^{-2Φ₀}))^{m/2} √(1 + g°(∇Φ₀)/(1+e^{2Φ₀}))`.
pub fn psi_via_phi0(e: &ExpSum, aug: &Augmentation, x: &[f64]) -> Result<f64> {
    let pc = pieces(e, aug, x)?;
    let m = e.dim() as f64;
    let em = (-2.0 * pc.phi0).exp();
    let shrink = if em.is_infinite() {
        1.0
    } else {
        em / (1.0 + em)
    };
    let first = (1.0 - shrink).powf(0.5 * m);
    let second = (1.0 + pc.g_dual.eval(&pc.diff) / (1.0 + (2.0 * pc.phi0).exp())).sqrt();
    Ok(first * second)
}

/// Classifies `x` by comparing `g°(μ - a₀)` with
/// `m + Σ_{k=1}^{m-1} C(m+1, k+1) e^{-2kΦ₀} + e^{-2mΦ₀}`, the closed form of `Ψ < 1`.
pub fn classify(e: &ExpSum, aug: &Augmentation, x: &[f64], tol: f64) -> Result<Classification> {
    let pc = pieces(e, aug, x)?;
    let m = e.dim();
    let lhs = pc.g_dual.eval(&pc.diff);
    let s = (-2.0 * pc.phi0).exp();
    let mut rhs = m as f64 + s.powi(m as i32);
    for k in 1..m {
        rhs += binomial(m + 1, k + 1) * s.powi(k as i32);
    }
    Ok(if (lhs - rhs).abs() <= tol * rhs.max(1.0) {
        Classification::Boundary
    } else if lhs < rhs {
        Classification::UMinus
    } else {
        Classification::UPlus
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(g₀)_x = (K/K₀)(g_x + τ²)`.
pub fn augmented_metric(e: &ExpSum, aug: &Augmentation, x: &[f64]) -> Result<QuadForm> {
    let pc = pieces(e, aug, x)?;
    let scale = pc.weight0.sqrt();
    let tau: Vec<f64> = pc.diff.iter().map(|d| scale * d).collect();
    Ok(pc.g.add_rank_one(&tau)?.scaled(pc.log_ratio.exp()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x0: Vec<f64>,
    pub eval: PsiEval,
}

/// For `a₀ ∈ int P`, the point `x₀ = μ⁻¹(a₀)` where `τ` vanishes and `Ψ < 1`.
pub fn witness_interior(e: &ExpSum, aug: &Augmentation, tol: f64) -> Result<Witness> {
    aug.validate(e)?;
    if !e.is_nondegenerate() {
        return Err(Error::Degenerate("base sum has dim conv(A) < m".into()));
    }
    let margin = e.interior_margin();
    if !e.support().interior_contains(&aug.a0, margin) {
        return Err(Error::Domain(
            "a0 is not in the interior of the Newton polytope".into(),
        ));
    }
    let x0 = e.invert_moment(&aug.a0, tol, 200)?;
    let eval = psi(e, aug, &x0)?;
    if !(eval.psi < 1.0) {
        return Err(Error::Numerical(format!(
            "Ψ(μ⁻¹(a0)) = {} is not below 1",
            eval.psi
        )));
    }
    Ok(Witness { x0, eval })
}

/// Data on the hypotheses of the far-exponent tail statement for a ray.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayHypothesis {
    /// `d(a₀, P)`.
    pub distance: f64,
    /// `diam(P)/m`.
    pub diam_over_m: f64,
    /// Number of support points on the face exposed by the direction.
    pub face_size: usize,
    /// `<a₀, x_dir> - h_P(x_dir)`.
    pub face_gap: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaySample {
    pub t: f64,
    pub eval: PsiEval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayScan {
    pub hypothesis: RayHypothesis,
    pub samples: Vec<RaySample>,
    /// First `t` at which the metric degenerated numerically, if any.
    pub truncated_at: Option<f64>,
}

impl RayScan {
    /// Whether every sample with `t ≥ t_min` lies in `U₋`.
    pub fn tail_in_u_minus(&self, t_min: f64) -> bool {
        self.samples
            .iter()
            .filter(|s| s.t >= t_min)
            .all(|s| s.eval.classification == Classification::UMinus)
    }
}

/// Ψ along `t·x_dir` for `t ∈ [0, t_max]`. Reports the hypotheses but makes
/// no claim about unboundedness of `U₋`.
pub fn ray_scan_unbounded(
    e: &ExpSum,
    aug: &Augmentation,
    x_dir: &[f64],
    t_max: f64,
    n_steps: usize,
) -> Result<RayScan> {
    aug.validate(e)?;
    check_dim(e.dim(), x_dir.len())?;
    if (norm(x_dir) - 1.0).abs() > 1e-9 {
        return Err(Error::Input("ray direction must have unit length".into()));
    }
    if !(t_max > 0.0) || n_steps == 0 {
        return Err(Error::Input("need t_max > 0 and at least one step".into()));
    }
    let support = e.support();
    let face = support.exposed_face_indices(x_dir, crate::expsum::FACE_TOL)?;
    let face_gap = dot(&aug.a0, x_dir) - support.support_function(x_dir)?;
    let distance = support.distance_to_hull(&aug.a0)?;
    let diam_over_m = support.diameter() / e.dim() as f64;
    let hypothesis = RayHypothesis {
        distance,
        diam_over_m,
        face_size: face.len(),
        face_gap,
        holds: distance > diam_over_m && face.len() == 1 && face_gap > diam_over_m,
    };
    let mut samples = Vec::with_capacity(n_steps + 1);
    let mut truncated_at = None;
    for k in 0..=n_steps {
        let t = t_max * k as f64 / n_steps as f64;
        let x: Vec<f64> = x_dir.iter().map(|d| t * d).collect();
        match psi(e, aug, &x) {
            Ok(eval) => samples.push(RaySample { t, eval }),
            Err(Error::Degenerate(_)) => {
                truncated_at = Some(t);
                break;
            }
            Err(err) => return Err(err),
        }
    }
    Ok(RayScan {
        hypothesis,
        samples,
        truncated_at,
    })
}

/// Coordinates of a region scan grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanSpace {
    /// Moment coordinates `p ∈ P`; each node is pulled back by `μ⁻¹`.
    P,
    X,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanNode {
    pub coords: Vec<f64>,
    pub x: Option<Vec<f64>>,
    pub psi: Option<f64>,
    /// `None` for moment-space nodes outside the polytope interior.
    pub class: Option<Classification>,
}

/// A rectangular grid of `Ψ` values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionScan {
    pub schema: u32,
    pub space: ScanSpace,
    pub bounds: Vec<(f64, f64)>,
    pub resolution: usize,
    pub a0: Vec<f64>,
    pub alpha0: f64,
    pub nodes: Vec<ScanNode>,
}

/// Evaluates `Ψ` on a `resolution^m` grid over `bounds`, row-major with the
/// first axis slowest.
pub fn region_scan(
    e: &ExpSum,
    aug: &Augmentation,
    bounds: &[(f64, f64)],
    resolution: usize,
    space: ScanSpace,
) -> Result<RegionScan> {
    aug.validate(e)?;
    check_dim(e.dim(), bounds.len())?;
    if resolution < 2 {
        return Err(Error::Input(
            "resolution must be at least 2 per axis".into(),
        ));
    }
    if bounds
        .iter()
        .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
    {
        return Err(Error::Input(
            "scan bounds must be finite with lo < hi".into(),
        ));
    }
    if !e.is_nondegenerate() {
        return Err(Error::Degenerate("base sum has dim conv(A) < m".into()));
    }
    let m = e.dim();
    let per_row = resolution.pow((m - 1) as u32);
    let coord = |axis: usize, i: usize| {
        let (lo, hi) = bounds[axis];
        lo + (hi - lo) * i as f64 / (resolution - 1) as f64
    };
    let margin = e.interior_margin();
    let rows: Vec<Result<Vec<ScanNode>>> = (0..resolution)
        .into_par_iter()
        .map(|row| {
            let mut out = Vec::with_capacity(per_row);
            for rest in 0..per_row {
                let mut coords = vec![coord(0, row); m];
                let mut r = rest;
                for axis in (1..m).rev() {
                    coords[axis] = coord(axis, r % resolution);
                    r /= resolution;
                }
                let x = match space {
                    ScanSpace::X => Some(coords.clone()),
                    ScanSpace::P if e.support().interior_contains(&coords, margin) => {
                        Some(e.invert_moment(&coords, 1e-10, 200)?)
                    }
                    ScanSpace::P => None,
                };
                let node = match x {
                    Some(x) => match psi(e, aug, &x) {
                        Ok(ev) => ScanNode {
                            coords,
                            x: Some(x),
                            psi: Some(ev.psi),
                            class: Some(ev.classification),
                        },
                        Err(Error::Degenerate(_)) => ScanNode {
                            coords,
                            x: Some(x),
                            psi: None,
                            class: None,
                        },
                        Err(err) => return Err(err),
                    },
                    None => ScanNode {
                        coords,
                        x: None,
                        psi: None,
                        class: None,
                    },
                };
                out.push(node);
            }
            Ok(out)
        })
        .collect();
    let mut nodes = Vec::with_capacity(per_row * resolution);
    for row in rows {
        nodes.extend(row?);
    }
    Ok(RegionScan {
        schema: crate::SCHEMA_VERSION,
        space,
        bounds: bounds.to_vec(),
        resolution,
        a0: aug.a0.clone(),
        alpha0: aug.alpha0,
        nodes,
    })
}

impl RegionScan {
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .map(|n| n.class == Some(Classification::UMinus))
            .collect()
    }

    pub fn count(&self, class: Classification) -> usize {
        self.nodes.iter().filter(|n| n.class == Some(class)).count()
    }

    /// Connected components of the `U₋` mask under axis-neighbour adjacency.
    /// Observational only: connectivity at a finite resolution proves nothing.
    pub fn u_minus_components(&self) -> usize {
        let mask = self.mask();
        let (m, r) = (self.dim(), self.resolution);
        let mut seen = vec![false; mask.len()];
        let mut components = 0;
        for start in 0..mask.len() {
            if !mask[start] || seen[start] {
                continue;
            }
            components += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let mut stride = 1;
                for _ in 0..m {
                    let pos = (i / stride) % r;
                    let mut visit = |j: usize| {
                        if mask[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    };
                    if pos > 0 {
                        visit(i - stride);
                    }
                    if pos + 1 < r {
                        visit(i + stride);
                    }
                    stride *= r;
                }
            }
        }
        components
    }

    /// Header `p1..pm` (or `x1..xm`), `psi`, `class`; one row per node.
    pub fn to_csv(&self) -> String {
        let prefix = match self.space {
            ScanSpace::P => "p",
            ScanSpace::X => "x",
        };
        let mut out = String::new();
        for k in 1..=self.dim() {
            out.push_str(&format!("{prefix}{k},"));
        }
        out.push_str("psi,class\n");
        for n in &self.nodes {
            for c in &n.coords {
                out.push_str(&format!("{c},"));
            }
            match n.psi {
                Some(p) => out.push_str(&format!("{p},")),
                None => out.push_str("nan,"),
            }
            out.push_str(n.class.map_or("outside", Classification::as_str));
            out.push('\n');
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Result of comparing the augmented and base metrics on the tangent space
/// of the level set of `Φ₀` through `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionReport {
    /// Largest entry of `g₀|_T - (K/K₀) g|_T`.
    pub residual: f64,
    /// `K/K₀`.
    pub ratio: f64,
    /// Observed shrink factor of the projected dual ellipsoid; equals `√(K/K₀)`.
    pub scale_factor: f64,
    /// `m = 1`: the tangent space is trivial.
    pub vacuous: bool,
    pub passed: bool,
}

/// On `T = ker dΦ₀ = (μ - a₀)^⊥` the rank-one term `τ²` vanishes, so the
/// projected dual ellipsoid of the augmented sum is the base one scaled by
/// `√(K/K₀)`.
pub fn levelset_projection_check(
    e: &ExpSum,
    aug: &Augmentation,
    x: &[f64],
    tol: f64,
) -> Result<ProjectionReport> {
    let pc = pieces(e, aug, x)?;
    let m = e.dim();
    let ratio = pc.log_ratio.exp();
    let dn = norm(&pc.diff);
    if dn <= 1e-12 * (1.0 + e.support().max_norm()) {
        return Err(Error::Domain("x is a critical point of Φ₀".into()));
    }
    if m == 1 {
        return Ok(ProjectionReport {
            residual: 0.0,
            ratio,
            scale_factor: ratio.sqrt(),
            vacuous: true,
            passed: true,
        });
    }
    let unit: Vec<f64> = pc.diff.iter().map(|d| d / dn).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m - 1);
    for i in 0..m {
        if basis.len() == m - 1 {
            break;
        }
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        for b in std::iter::once(&unit).chain(basis.iter()) {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(vk, bk)| *vk -= c * bk);
        }
        let n = norm(&v);
        if n > 1e-6 {
            basis.push(v.iter().map(|vk| vk / n).collect());
        }
    }
    let bmat = DMatrix::from_fn(m, m - 1, |i, j| basis[j][i]);
    let g0 = augmented_metric(e, aug, x)?;
    let restricted0 = g0.restrict(&bmat)?;
    let restricted = pc.g.restrict(&bmat)?;
    let residual = restricted0.max_abs_diff(&restricted.scaled(ratio));
    let scale_factor = (0..m - 1)
        .map(|j| {
            let mut u = vec![0.0; m - 1];
            u[j] = 1.0;
            restricted0.dual_ball_support(&u) / restricted.dual_ball_support(&u)
        })
        .fold(0.0, f64::max);
    Ok(ProjectionReport {
        residual,
        ratio,
        scale_factor,
        vacuous: false,
        passed: residual < tol && (scale_factor - ratio.sqrt()).abs() < tol.max(1e-12) * 10.0,
    })
}
