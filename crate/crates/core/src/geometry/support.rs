use nalgebra::DMatrix;

use super::hull::{self, Facet, HullVolume};
use super::{dist, dot, norm};
use crate::error::{check_dim, check_finite, Error, Result};

/// A finite, non-empty set of distinct points `A ⊂ ℝ^m`.
///
/// The affine dimension of `conv(A)` is computed once at construction;
/// supports with `dim conv(A) < m` are accepted but flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    dim: usize,
    coords: Vec<f64>,
    affine_dim: usize,
}

impl SupportSet {
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("support dimension must be positive".into()));
        }
        if points.is_empty() {
            return Err(Error::Input("support set is empty".into()));
        }
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in &points {
            check_dim(dim, p.len())?;
            check_finite("support point", p)?;
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords)
    }

    /// Points stored row-major, `dim` coordinates each.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::Input("malformed flat coordinate list".into()));
        }
        check_finite("support point", &coords)?;
        let mut set = SupportSet {
            dim,
            coords,
            affine_dim: 0,
        };
        let tol = set.dedup_tolerance();
        for i in 0..set.len() {
            for j in 0..i {
                if dist(set.point(i), set.point(j)) <= tol {
                    return Err(Error::Input(format!(
                        "support points {j} and {i} coincide within {tol:e}"
                    )));
                }
            }
        }
        set.affine_dim = set.compute_affine_dim();
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.points().map(<[f64]>::to_vec).collect()
    }

    /// Dimension of the affine span of the points.
    pub fn affine_dim(&self) -> usize {
        self.affine_dim
    }

    /// `dim conv(A) = m`.
    pub fn is_full_dim(&self) -> bool {
        self.affine_dim == self.dim
    }

    pub fn max_norm(&self) -> f64 {
        self.points().map(norm).fold(0.0, f64::max)
    }

    pub fn dedup_tolerance(&self) -> f64 {
        1e-12 * (1.0 + self.max_norm())
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut c = vec![0.0; self.dim];
        for p in self.points() {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += pi / n;
            }
        }
        c
    }

    pub fn translated(&self, b: &[f64]) -> Result<Self> {
        check_dim(self.dim, b.len())?;
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(k, v)| v + b[k % self.dim])
            .collect();
        Self::from_flat(self.dim, coords)
    }

    /// Sub-support of the given indices, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            coords.extend_from_slice(self.point(i));
        }
        Self::from_flat(self.dim, coords)
    }

    /// `h_A(u) = max_a <u, a>`.
    pub fn support_function(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim, u.len())?;
        Ok(self
            .points()
            .map(|a| dot(u, a))
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// Indices of the points exposed by `u`, i.e. with `h(u) - <u, a>` at most
    /// `tol · max(1, ‖u‖·max‖a‖)`.
    pub fn exposed_face_indices(&self, u: &[f64], tol: f64) -> Result<Vec<usize>> {
        if !(tol >= 0.0) {
            return Err(Error::Input("face tolerance must be non-negative".into()));
        }
        let h = self.support_function(u)?;
        let scaled = tol * (norm(u) * self.max_norm()).max(1.0);
        Ok(self
            .points()
            .enumerate()
            .filter(|(_, a)| h - dot(u, a) <= scaled)
            .map(|(i, _)| i)
            .collect())
    }

    pub fn exposed_face(&self, u: &[f64], tol: f64) -> Result<SupportSet> {
        let idx = self.exposed_face_indices(u, tol)?;
        self.subset(&idx)
    }

    /// Largest pairwise distance; equals `diam(conv A)`.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.len() {
            for j in 0..i {
                d = d.max(dist(self.point(i), self.point(j)));
            }
        }
        d
    }

    /// Smallest nonzero coordinate gap `|a_i - b_i|` over pairs of points and axes.
    pub fn min_axis_gap(&self) -> Option<f64> {
        let tol = self.dedup_tolerance();
        let mut best: Option<f64> = None;
        for k in 0..self.dim {
            for i in 0..self.len() {
                for j in 0..i {
                    let g = (self.point(i)[k] - self.point(j)[k]).abs();
                    if g > tol {
                        best = Some(best.map_or(g, |b| b.min(g)));
                    }
                }
            }
        }
        best
    }

    /// Euclidean volume of `conv(A)`, exact for `m ≤ 3`.
    pub fn hull_volume(&self) -> Result<HullVolume> {
        if self.dim > 3 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        if !self.is_full_dim() {
            return Ok(HullVolume {
                volume: 0.0,
                degenerate: true,
            });
        }
        Ok(HullVolume {
            volume: hull::volume(self),
            degenerate: false,
        })
    }

    /// Facets of `conv(A)` with outward unit normals. Empty for degenerate supports.
    pub fn facets(&self) -> Vec<Facet> {
        if !self.is_full_dim() {
            return Vec::new();
        }
        hull::facets(self)
    }

    /// Whether `p` lies in the interior of `conv(A)` at distance at least `tol`
    /// from every facet hyperplane.
    pub fn interior_contains(&self, p: &[f64], tol: f64) -> bool {
        if p.len() != self.dim || !self.is_full_dim() || p.iter().any(|v| !v.is_finite()) {
            return false;
        }
        self.facets()
            .iter()
            .all(|f| f.offset - dot(&f.normal, p) >= tol)
    }

    /// Signed slack `min_F (h_F - <n_F, p>)`; negative outside the hull.
    pub fn interior_margin(&self, p: &[f64]) -> f64 {
        self.facets()
            .iter()
            .map(|f| f.offset - dot(&f.normal, p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Euclidean distance from `p` to `conv(A)`, by accelerated projected
    /// gradient on the barycentric simplex.
    pub fn distance_to_hull(&self, p: &[f64]) -> Result<f64> {
        check_dim(self.dim, p.len())?;
        let n = self.len();
        let shifted: Vec<Vec<f64>> = self
            .points()
            .map(|a| a.iter().zip(p).map(|(x, y)| x - y).collect())
            .collect();
        let lip: f64 = shifted.iter().map(|v| dot(v, v)).sum::<f64>().max(1e-300);
        let combine = |w: &[f64]| {
            let mut v = vec![0.0; self.dim];
            for (wi, a) in w.iter().zip(&shifted) {
                for (vk, ak) in v.iter_mut().zip(a) {
                    *vk += wi * ak;
                }
            }
            v
        };
        let mut w = vec![1.0 / n as f64; n];
        let mut y = w.clone();
        let mut t = 1.0_f64;
        for _ in 0..20_000 {
            let r = combine(&y);
            let grad: Vec<f64> = shifted.iter().map(|a| dot(a, &r)).collect();
            let step: Vec<f64> = y.iter().zip(&grad).map(|(yi, gi)| yi - gi / lip).collect();
            let w_next = project_simplex(&step);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            let moved: f64 = w_next.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
            y = w_next
                .iter()
                .zip(&w)
                .map(|(a, b)| a + beta * (a - b))
                .collect();
            w = w_next;
            t = t_next;
            if moved < 1e-15 {
                break;
            }
        }
        Ok(norm(&combine(&w)))
    }

    fn compute_affine_dim(&self) -> usize {
        let n = self.len();
        if n == 1 {
            return 0;
        }
        let base = self.point(0);
        let diffs = DMatrix::from_fn(n - 1, self.dim, |i, k| self.point(i + 1)[k] - base[k]);
        let sv = diffs.singular_values();
        let top = sv.iter().cloned().fold(0.0, f64::max);
        let tol = 1e-10 * top.max(1e-300);
        sv.iter().filter(|&&s| s > tol).count()
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, s) in sorted.iter().enumerate() {
        cum += s;
        let candidate = (cum - 1.0) / (k as f64 + 1.0);
        if s - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}
