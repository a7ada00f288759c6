//! Facets and volumes of `conv(A)` for finite `A`.
//!
//! `m = 1` and `m = 2` use direct constructions (interval, monotone chain).
//! For `m ≥ 3` facets are found by enumerating affinely independent
//! `m`-subsets whose hyperplane supports the whole set; volume is then the
//! cone decomposition `vol = Σ_F dist(c, F)·area(F) / m` around the centroid.

use nalgebra::DMatrix;

use super::support::SupportSet;
use super::{dot, norm};

/// A supporting hyperplane `<normal, x> = offset` of a facet, with the normal
/// pointing outward and of unit length.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
    /// Indices of the support points lying on the facet.
    pub vertices: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullVolume {
    pub volume: f64,
    /// `dim conv(A) < m`.
    pub degenerate: bool,
}

fn plane_tol(set: &SupportSet) -> f64 {
    1e-10 * (1.0 + set.max_norm())
}

pub(super) fn facets(set: &SupportSet) -> Vec<Facet> {
    match set.dim() {
        1 => facets_1d(set),
        2 => facets_2d(set),
        _ => facets_enumerated(set),
    }
}

pub(super) fn volume(set: &SupportSet) -> f64 {
    match set.dim() {
        1 => {
            let (lo, hi) = extent_1d(set);
            hi - lo
        }
        2 => {
            let pts: Vec<[f64; 2]> = set.points().map(|p| [p[0], p[1]]).collect();
            polygon_area(&pts, &convex_polygon(&pts))
        }
        3 => {
            let c = set.centroid();
            facets_enumerated(set)
                .iter()
                .map(|f| {
                    let height = f.offset - dot(&f.normal, &c);
                    height * facet_area_3d(set, f) / 3.0
                })
                .sum()
        }
        m => unreachable!("volume requested for dimension {m}"),
    }
}

fn extent_1d(set: &SupportSet) -> (f64, f64) {
    set.points()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p[0]), hi.max(p[0]))
        })
}

fn facets_1d(set: &SupportSet) -> Vec<Facet> {
    let (lo, hi) = extent_1d(set);
    let at = |v: f64| {
        set.points()
            .enumerate()
            .filter(|(_, p)| p[0] == v)
            .map(|(i, _)| i)
            .collect()
    };
    vec![
        Facet {
            normal: vec![1.0],
            offset: hi,
            vertices: at(hi),
        },
        Facet {
            normal: vec![-1.0],
            offset: -lo,
            vertices: at(lo),
        },
    ]
}

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain. Returns hull vertex indices in counter-clockwise
/// order with collinear points dropped.
pub(crate) fn convex_polygon(pts: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&i, &j| {
        pts[i][0]
            .total_cmp(&pts[j][0])
            .then(pts[i][1].total_cmp(&pts[j][1]))
    });
    if idx.len() < 3 {
        return idx;
    }
    let scale = pts
        .iter()
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(1.0, f64::max);
    let eps = 1e-12 * scale * scale;
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let order: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &i in order {
            while hull.len() >= start + 2
                && cross2(pts[hull[hull.len() - 2]], pts[hull[hull.len() - 1]], pts[i]) <= eps
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    hull
}

fn polygon_area(pts: &[[f64; 2]], poly: &[usize]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for k in 0..poly.len() {
        let a = pts[poly[k]];
        let b = pts[poly[(k + 1) % poly.len()]];
        twice += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * twice.abs()
}

fn on_plane(set: &SupportSet, normal: &[f64], offset: f64, tol: f64) -> Vec<usize> {
    set.points()
        .enumerate()
        .filter(|(_, p)| (dot(normal, p) - offset).abs() <= tol)
        .map(|(i, _)| i)
        .collect()
}

fn facets_2d(set: &SupportSet) -> Vec<Facet> {
    let pts: Vec<[f64; 2]> = set.points().map(|p| [p[0], p[1]]).collect();
    let poly = convex_polygon(&pts);
    let tol = plane_tol(set);
    (0..poly.len())
        .map(|k| {
            let a = pts[poly[k]];
            let b = pts[poly[(k + 1) % poly.len()]];
            let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
            let len = ex.hypot(ey);
            let normal = vec![ey / len, -ex / len];
            let offset = dot(&normal, &a);
            let vertices = on_plane(set, &normal, offset, tol);
            Facet {
                normal,
                offset,
                vertices,
            }
        })
        .collect()
}

/// Unit normal of the hyperplane through `m` points in `ℝ^m`, or `None` when
/// they are affinely dependent.
fn hyperplane_normal(pts: &[&[f64]], scale: f64) -> Option<Vec<f64>> {
    let m = pts[0].len();
    let base = pts[0];
    if m == 3 {
        let u: Vec<f64> = (0..3).map(|k| pts[1][k] - base[k]).collect();
        let v: Vec<f64> = (0..3).map(|k| pts[2][k] - base[k]).collect();
        let n = vec![
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let len = norm(&n);
        if len <= 1e-10 * scale * scale {
            return None;
        }
        return Some(n.iter().map(|x| x / len).collect());
    }
    // Pad with a zero row so the SVD exposes the null direction.
    let diffs = DMatrix::from_fn(m, m, |i, k| {
        if i + 1 < m {
            pts[i + 1][k] - base[k]
        } else {
            0.0
        }
    });
    let svd = diffs.svd(false, true);
    let v_t = svd.v_t?;
    let sv = &svd.singular_values;
    let (imin, _) = sv.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let second = sv
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != imin)
        .map(|(_, s)| *s)
        .fold(f64::INFINITY, f64::min);
    if second <= 1e-10 * scale {
        return None;
    }
    Some(v_t.row(imin).iter().cloned().collect())
}

fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        f(&c);
        let mut i = k;
        while i > 0 && c[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        c[i - 1] += 1;
        for j in i..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

fn facets_enumerated(set: &SupportSet) -> Vec<Facet> {
    let m = set.dim();
    let tol = plane_tol(set);
    let scale = 1.0 + set.max_norm();
    let mut out: Vec<Facet> = Vec::new();
    for_each_combination(set.len(), m, |combo| {
        let pts: Vec<&[f64]> = combo.iter().map(|&i| set.point(i)).collect();
        let Some(mut normal) = hyperplane_normal(&pts, scale) else {
            return;
        };
        let mut offset = dot(&normal, pts[0]);
        let (mut above, mut below) = (false, false);
        for p in set.points() {
            let s = dot(&normal, p) - offset;
            above |= s > tol;
            below |= s < -tol;
        }
        if above && below {
            return;
        }
        if above {
            normal.iter_mut().for_each(|x| *x = -*x);
            offset = -offset;
        }
        let duplicate = out.iter().any(|f| {
            (f.offset - offset).abs() <= tol
                && f.normal
                    .iter()
                    .zip(&normal)
                    .all(|(a, b)| (a - b).abs() <= 1e-9)
        });
        if !duplicate {
            let vertices = on_plane(set, &normal, offset, tol);
            out.push(Facet {
                normal,
                offset,
                vertices,
            });
        }
    });
    out
}

/// Area of a 3D facet polygon, via an orthonormal frame of its plane.
fn facet_area_3d(set: &SupportSet, f: &Facet) -> f64 {
    let n = &f.normal;
    let helper = if n[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let proj = dot(&helper, n);
    let mut e1: Vec<f64> = (0..3).map(|k| helper[k] - proj * n[k]).collect();
    let l1 = norm(&e1);
    e1.iter_mut().for_each(|x| *x /= l1);
    let e2 = vec![
        n[1] * e1[2] - n[2] * e1[1],
        n[2] * e1[0] - n[0] * e1[2],
        n[0] * e1[1] - n[1] * e1[0],
    ];
    let pts: Vec<[f64; 2]> = f
        .vertices
        .iter()
        .map(|&i| {
            let p = set.point(i);
            [dot(p, &e1), dot(p, &e2)]
        })
        .collect();
    polygon_area(&pts, &convex_polygon(&pts))
}
