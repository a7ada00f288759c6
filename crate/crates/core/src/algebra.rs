//! Tensor products and Aronszajn multiplication of coefficient systems.
//!
//! For `α` on `A ⊂ ℝ^m` and `β` on `B`:
//! - `α⊗β` lives on `A×B ⊂ ℝ^{m+n}` with `(α⊗β)_{(a,b)} = α_a β_b`; potentials add
//!   across the two blocks and the metric is block diagonal.
//! - `α⊙β` lives on the Minkowski sum `A+B` with
//!   `(α⊙β)_c = √(Σ_{a+b=c} α_a² β_b²)`; potentials and metrics add.
//!
//! Results are returned with the support in lexicographic order so that
//! algebraic identities can be compared structurally.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::expsum::ExpSum;
use crate::geometry::{ball_sphere_constants, dist, two_sum_bounds, QuadForm};

/// Coefficient systems are exponential sums viewed as operands of ⊗ and ⊙.
pub type CoeffSystem = ExpSum;

fn canonical(dim: usize, mut terms: Vec<(Vec<f64>, f64)>) -> Result<ExpSum> {
    terms.sort_by(|(a, _), (b, _)| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if let Some((_, c)) = terms.iter().find(|(_, c)| !c.is_finite()) {
        return Err(Error::Numerical(format!(
            "coefficient {c} overflows double range"
        )));
    }
    let (pts, coeffs): (Vec<_>, Vec<_>) = terms.into_iter().unzip();
    ExpSum::from_points(dim, pts, Some(coeffs))
}

/// Same sum with the support sorted lexicographically.
pub fn canonicalize(e: &ExpSum) -> Result<ExpSum> {
    canonical(
        e.dim(),
        e.support()
            .to_vecs()
            .into_iter()
            .zip(e.coeffs().iter().cloned())
            .collect(),
    )
}

/// `α⊗β` on `A×B`.
pub fn tensor(a: &ExpSum, b: &ExpSum) -> Result<ExpSum> {
    let mut terms = Vec::with_capacity(a.len() * b.len());
    for (pa, ca) in a.support().points().zip(a.coeffs()) {
        for (pb, cb) in b.support().points().zip(b.coeffs()) {
            let mut p = pa.to_vec();
            p.extend_from_slice(pb);
            terms.push((p, ca * cb));
        }
    }
    canonical(a.dim() + b.dim(), terms)
}

/// Merge tolerance for Minkowski sums: `1e-9·(1 + max‖a‖)` over both operands.
pub fn default_merge_tol(a: &ExpSum, b: &ExpSum) -> f64 {
    1e-9 * (1.0 + a.support().max_norm().max(b.support().max_norm()))
}

/// `α⊙β` on `A+B`. Sums closer than `merge_tol` are identified and their
/// squared coefficients accumulated.
pub fn aronszajn(a: &ExpSum, b: &ExpSum, merge_tol: f64) -> Result<ExpSum> {
    check_dim(a.dim(), b.dim())?;
    if !(merge_tol >= 0.0) {
        return Err(Error::Input("merge tolerance must be non-negative".into()));
    }
    // (representative point, accumulated α²β²)
    let mut acc: Vec<(Vec<f64>, f64)> = Vec::new();
    for (pa, ca) in a.support().points().zip(a.coeffs()) {
        for (pb, cb) in b.support().points().zip(b.coeffs()) {
            let c: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| x + y).collect();
            let w = (ca * cb).powi(2);
            match acc.iter_mut().find(|(p, _)| dist(p, &c) <= merge_tol) {
                Some((_, total)) => *total += w,
                None => acc.push((c, w)),
            }
        }
    }
    canonical(
        a.dim(),
        acc.into_iter().map(|(p, w)| (p, w.sqrt())).collect(),
    )
}

/// `E^{⊙d}`. A two-point seed `{c, c+δ}` in one dimension uses the closed
/// form `√C(d,k) α₀^{d-k} α₁^k`; other supports multiply repeatedly.
pub fn aronszajn_power(e: &ExpSum, d: usize) -> Result<ExpSum> {
    if d == 0 {
        return Err(Error::Input("Aronszajn power must be at least 1".into()));
    }
    if e.dim() == 1 && e.len() == 2 {
        let sorted = canonicalize(e)?;
        let (lo, hi) = (sorted.support().point(0)[0], sorted.support().point(1)[0]);
        let (l0, l1) = (sorted.coeffs()[0].ln(), sorted.coeffs()[1].ln());
        let terms = (0..=d)
            .map(|k| {
                let p = vec![(d - k) as f64 * lo + k as f64 * hi];
                let logc = 0.5 * ln_binomial(d, k) + (d - k) as f64 * l0 + k as f64 * l1;
                (p, logc.exp())
            })
            .collect();
        return canonical(1, terms);
    }
    let mut out = e.clone();
    for _ in 1..d {
        let tol = default_merge_tol(&out, e);
        out = aronszajn(&out, e, tol)?;
    }
    Ok(out)
}

pub(crate) fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// Largest support a builder will materialize.
pub const MAX_SUPPORT: usize = 1 << 22;

/// Kostlan system `(o^{⊗m})^{⊙d}` for the seed `o = ({0,1}, (1,1))`: support
/// `{0..d}^m` with coefficients `Π_i √C(d, c_i)`.
pub fn kostlan(m: usize, d: usize) -> Result<ExpSum> {
    if m == 0 || d == 0 {
        return Err(Error::Input("Kostlan builder needs m ≥ 1 and d ≥ 1".into()));
    }
    let count = (d + 1).checked_pow(m as u32).ok_or_else(|| {
        Error::Input(format!(
            "support of size (d+1)^m overflows for m={m}, d={d}"
        ))
    })?;
    let half_ln: Vec<f64> = (0..=d).map(|k| 0.5 * ln_binomial(d, k)).collect();
    if m as f64 * half_ln[d / 2] > f64::MAX.ln() {
        return Err(Error::Numerical(format!(
            "Kostlan coefficients overflow double range for m={m}, d={d}"
        )));
    }
    if count > MAX_SUPPORT {
        return Err(Error::Input(format!(
            "support of size {count} exceeds {MAX_SUPPORT}"
        )));
    }
    let mut terms = Vec::with_capacity(count);
    for idx in 0..count {
        let mut r = idx;
        let mut c = vec![0.0; m];
        let mut logc = 0.0;
        for axis in (0..m).rev() {
            let k = r % (d + 1);
            r /= d + 1;
            c[axis] = k as f64;
            logc += half_ln[k];
        }
        terms.push((c, logc.exp()));
    }
    canonical(m, terms)
}

/// Outcome of checking the Aronszajn sub/super-additivity bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    /// One-dimensional case: `(1/√2)(δ_α + δ_β)`, `δ_{α⊙β}`, `δ_α + δ_β`.
    pub densities: Option<(f64, f64, f64)>,
    /// Smallest `middle - lower` over all tested directions.
    pub lower_slack: f64,
    /// Smallest `upper - middle` over all tested directions.
    pub upper_slack: f64,
    pub directions: usize,
    pub passed: bool,
}

/// Checks `(1/√2)(√g_α + √g_β) ≤ √g_{α⊙β} ≤ √g_α + √g_β` at `x`. For `m = 1`
/// this is the density statement; for `m ≥ 2` it is the support-function
/// form of the dual-ellipsoid inclusions, sampled on 50 fixed random
/// directions. The middle term comes from the actual product sum.
pub fn density_bounds_check(a: &ExpSum, b: &ExpSum, x: &[f64]) -> Result<BoundsReport> {
    check_dim(a.dim(), b.dim())?;
    let prod = aronszajn(a, b, default_merge_tol(a, b))?;
    let m = a.dim();
    let (ga, gb, gp) = (a.metric(x)?, b.metric(x)?, prod.metric(x)?);
    let dirs: Vec<Vec<f64>> = if m == 1 {
        vec![vec![1.0]]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0b0d);
        (0..50)
            .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    };
    let mut lower_slack = f64::INFINITY;
    let mut upper_slack = f64::INFINITY;
    for u in &dirs {
        let (lo, _, hi) = two_sum_bounds(&[ga.clone(), gb.clone()], &[1.0, 1.0], u)?;
        let mid = gp.dual_ball_support(u);
        lower_slack = lower_slack.min(mid - lo);
        upper_slack = upper_slack.min(hi - mid);
    }
    let densities = (m == 1).then(|| {
        let (_, s1) = ball_sphere_constants(1);
        let c = 2.0 / s1;
        let (da, db, dp) = (
            c * ga.entry(0, 0).max(0.0).sqrt(),
            c * gb.entry(0, 0).max(0.0).sqrt(),
            c * gp.entry(0, 0).max(0.0).sqrt(),
        );
        ((da + db) / 2f64.sqrt(), dp, da + db)
    });
    let slack = 1e-12 * (1.0 + ga.gram().amax() + gb.gram().amax());
    Ok(BoundsReport {
        densities,
        lower_slack,
        upper_slack,
        directions: dirs.len(),
        passed: lower_slack >= -slack && upper_slack >= -slack,
    })
}

/// Metric of `α⊙β` predicted by additivity, for cross-checks.
pub fn predicted_product_metric(a: &ExpSum, b: &ExpSum, x: &[f64]) -> Result<QuadForm> {
    a.metric(x)?.add(&b.metric(x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seed() -> ExpSum {
        ExpSum::from_points(1, vec![vec![0.0], vec![1.0]], None).unwrap()
    }

    fn close(a: &ExpSum, b: &ExpSum, tol: f64) -> bool {
        a.len() == b.len()
            && a.support()
                .points()
                .zip(b.support().points())
                .all(|(p, q)| dist(p, q) <= tol)
            && a.coeffs()
                .iter()
                .zip(b.coeffs())
                .all(|(x, y)| (x - y).abs() <= tol * x.abs().max(1.0))
    }

    #[test]
    fn tensor_of_seeds_is_the_square() {
        let sq = tensor(&seed(), &seed()).unwrap();
        assert_eq!(
            sq.support().to_vecs(),
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0]
            ]
        );
        assert_eq!(sq.coeffs(), &[1.0; 4]);
    }

    #[test]
    fn tensor_potential_and_block_metric() {
        let a = ExpSum::from_points(
            1,
            vec![vec![0.0], vec![0.7], vec![2.0]],
            Some(vec![1.0, 2.0, 0.5]),
        )
        .unwrap();
        let b = ExpSum::from_points(1, vec![vec![-1.0], vec![1.5]], Some(vec![0.3, 1.1])).unwrap();
        let t = tensor(&a, &b).unwrap();
        let (x, y) = (0.7, -0.4);
        let lhs = t.potential(&[x, y]).unwrap();
        let rhs = a.potential(&[x]).unwrap() + b.potential(&[y]).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        let g = t.metric(&[x, y]).unwrap();
        assert!(g.entry(0, 1).abs() < 1e-12);
        assert!((g.entry(0, 0) - a.metric(&[x]).unwrap().entry(0, 0)).abs() < 1e-12);
        assert!((g.entry(1, 1) - b.metric(&[y]).unwrap().entry(0, 0)).abs() < 1e-12);
    }

    #[test]
    fn aronszajn_examples() {
        let sq = aronszajn(&seed(), &seed(), 1e-9).unwrap();
        assert_eq!(
            sq.support().to_vecs(),
            vec![vec![0.0], vec![1.0], vec![2.0]]
        );
        assert!((sq.coeffs()[1] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!((sq.coeffs()[0], sq.coeffs()[2]), (1.0, 1.0));
        let e = ExpSum::from_points(
            2,
            vec![vec![0.0, 0.3], vec![1.0, 0.0], vec![0.2, 1.0]],
            Some(vec![1.0, 2.0, 3.0]),
        )
        .unwrap();
        let one = ExpSum::from_points(2, vec![vec![0.0, 0.0]], None).unwrap();
        let same = aronszajn(&e, &one, 1e-9).unwrap();
        assert!(close(&same, &canonicalize(&e).unwrap(), 0.0));
        assert!(aronszajn(&seed(), &one, 1e-9).is_err());
    }

    #[test]
    fn near_collisions_merge() {
        let a = ExpSum::from_points(1, vec![vec![0.0], vec![1.0 + 1e-12]], None).unwrap();
        let b = ExpSum::from_points(1, vec![vec![0.0], vec![1.0]], None).unwrap();
        let p = aronszajn(&a, &b, default_merge_tol(&a, &b)).unwrap();
        assert_eq!(p.len(), 3);
        assert!((p.coeffs()[1] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kostlan_builders() {
        let k = kostlan(1, 2).unwrap();
        assert_eq!(k.support().to_vecs(), vec![vec![0.0], vec![1.0], vec![2.0]]);
        assert!((k.coeffs()[1] - 2f64.sqrt()).abs() < 1e-15);
        let sq = kostlan(2, 1).unwrap();
        assert_eq!(sq.len(), 4);
        assert!(sq.coeffs().iter().all(|c| (c - 1.0).abs() < 1e-15));
        for d in 1..6 {
            let kd = kostlan(1, d).unwrap();
            for x in [-1.5, 0.0, 0.4, 2.0] {
                let g = kd.metric(&[x]).unwrap().entry(0, 0);
                let expect = d as f64 / (4.0 * f64::cosh(x).powi(2));
                assert!((g - expect).abs() < 1e-13, "d={d} x={x}");
            }
            let viaprod = aronszajn_power(&seed(), d).unwrap();
            assert!(close(&viaprod, &kd, 1e-13));
        }
        // Product form agrees with repeated multiplication in two dimensions.
        let sq2 = aronszajn_power(&tensor(&seed(), &seed()).unwrap(), 3).unwrap();
        assert!(close(&sq2, &kostlan(2, 3).unwrap(), 1e-12));
        assert!(kostlan(1, 500)
            .unwrap()
            .coeffs()
            .iter()
            .all(|c| c.is_finite()));
        assert!(matches!(kostlan(6, 500), Err(Error::Numerical(_))));
        assert!(kostlan(0, 2).is_err() && aronszajn_power(&seed(), 0).is_err());
    }

    #[test]
    fn commutation_of_products() {
        let a = ExpSum::from_points(1, vec![vec![0.0], vec![0.5]], Some(vec![1.0, 2.0])).unwrap();
        let a2 = ExpSum::from_points(
            1,
            vec![vec![0.0], vec![1.0], vec![1.7]],
            Some(vec![0.4, 1.0, 3.0]),
        )
        .unwrap();
        let b = ExpSum::from_points(1, vec![vec![-1.0], vec![2.0]], Some(vec![1.5, 0.2])).unwrap();
        let b2 = ExpSum::from_points(1, vec![vec![0.0], vec![0.25]], None).unwrap();
        let lhs = aronszajn(&tensor(&a, &b).unwrap(), &tensor(&a2, &b2).unwrap(), 1e-9).unwrap();
        let rhs = tensor(
            &aronszajn(&a, &a2, 1e-9).unwrap(),
            &aronszajn(&b, &b2, 1e-9).unwrap(),
        )
        .unwrap();
        assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn bounds_in_one_dimension() {
        let r = density_bounds_check(&seed(), &seed(), &[0.3]).unwrap();
        let (lo, mid, hi) = r.densities.unwrap();
        // Equal forms: the lower bound is attained.
        assert!((lo - mid).abs() < 1e-15 && mid < hi && r.passed);
        let a = ExpSum::from_points(
            1,
            vec![vec![0.0], vec![0.6], vec![2.0]],
            Some(vec![1.0, 0.5, 2.0]),
        )
        .unwrap();
        let b = ExpSum::from_points(1, vec![vec![-0.5], vec![1.3]], Some(vec![0.7, 1.0])).unwrap();
        let r = density_bounds_check(&a, &b, &[0.3]).unwrap();
        let (lo, mid, hi) = r.densities.unwrap();
        assert!(lo < mid && mid < hi && r.passed);
    }

    #[test]
    fn bounds_in_two_dimensions() {
        let a = kostlan(2, 1).unwrap();
        let b = ExpSum::from_points(
            2,
            vec![vec![0.0, 0.0], vec![2.0, 0.5], vec![0.3, 1.0]],
            Some(vec![1.0, 0.5, 2.0]),
        )
        .unwrap();
        let r = density_bounds_check(&a, &b, &[0.2, -0.7]).unwrap();
        assert_eq!(r.directions, 50);
        assert!(r.passed && r.lower_slack >= 0.0 && r.upper_slack >= 0.0);
    }

    fn sum2(pts: &[f64], logc: &[f64]) -> ExpSum {
        let points: Vec<Vec<f64>> = pts.chunks(2).map(|c| c.to_vec()).collect();
        ExpSum::from_points(2, points, Some(logc.iter().map(|l| l.exp()).collect())).unwrap()
    }

    proptest! {
        #[test]
        fn product_laws(
            pa in prop::collection::vec(-2.0..2.0f64, 6),
            pb in prop::collection::vec(-2.0..2.0f64, 6),
            la in prop::collection::vec(-1.0..1.0f64, 3),
            lb in prop::collection::vec(-1.0..1.0f64, 3),
            x in prop::collection::vec(-2.0..2.0f64, 2),
        ) {
            let (a, b) = (sum2(&pa, &la), sum2(&pb, &lb));
            let p = aronszajn(&a, &b, default_merge_tol(&a, &b)).unwrap();
            let phi = p.potential(&x).unwrap();
            prop_assert!((phi - a.potential(&x).unwrap() - b.potential(&x).unwrap()).abs() < 1e-12);
            let g = p.metric(&x).unwrap();
            prop_assert!(g.max_abs_diff(&predicted_product_metric(&a, &b, &x).unwrap()) < 1e-12);
            // Commutativity and associativity as coefficient systems.
            let q = aronszajn(&b, &a, default_merge_tol(&a, &b)).unwrap();
            prop_assert!(close(&p, &q, 1e-12));
            let c = sum2(&[0.0, 0.0, 1.0, 0.5], &[0.0, 0.3]);
            let l = aronszajn(&p, &c, 1e-9).unwrap();
            let r = aronszajn(&a, &aronszajn(&b, &c, 1e-9).unwrap(), 1e-9).unwrap();
            prop_assert!(close(&l, &r, 1e-12));
            let rep = density_bounds_check(&a, &b, &x).unwrap();
            prop_assert!(rep.passed);
        }

        #[test]
        fn power_scales_metric(
            pts in prop::collection::vec(-2.0..2.0f64, 6),
            x in prop::collection::vec(-2.0..2.0f64, 2),
            d in 1usize..4,
        ) {
            let e = sum2(&pts, &[0.0, 0.2, -0.2]);
            prop_assume!(e.is_nondegenerate());
            let pd = aronszajn_power(&e, d).unwrap();
            let g = e.metric(&x).unwrap().scaled(d as f64);
            let gd = pd.metric(&x).unwrap();
            prop_assert!(gd.max_abs_diff(&g) < 1e-10 * (1.0 + g.gram().amax()));
        }
    }
}
