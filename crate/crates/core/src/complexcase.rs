//! Complex Gaussian exponential sums and the BKK count `n!·vol(P)`.
//!
//! The zero density of the complex sum is invariant under imaginary
//! translations, so it is evaluated on the real slice only.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::expsum::{small_det, ExpSum};
use crate::integrate::{integrate_auto, Quadrature, Region};

/// Support and positive coefficients of a complex sum; the data coincide
/// with the real case.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexExpSum(pub ExpSum);

impl ComplexExpSum {
    pub fn new(e: ExpSum) -> Self {
        ComplexExpSum(e)
    }

    pub fn inner(&self) -> &ExpSum {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Integer-valued exponents up to `1e-9`.
    pub fn has_integer_support(&self) -> bool {
        self.0
            .support()
            .points()
            .flatten()
            .all(|v| (v - v.round()).abs() < 1e-9)
    }
}

/// Zero density `(n!/π^n)·det(Σ λ_a a aᵀ − μ μᵀ)` at the real point `x`.
/// Computed from the weights directly rather than via the real metric.
pub fn bkk_density(e: &ComplexExpSum, x: &[f64]) -> Result<f64> {
    let n = e.dim();
    check_dim(n, x.len())?;
    check_finite("evaluation point", x)?;
    Ok(density_unchecked(e, x))
}

fn density_unchecked(e: &ComplexExpSum, x: &[f64]) -> f64 {
    let s = &e.0;
    let n = s.dim();
    if !s.is_nondegenerate() {
        return 0.0;
    }
    let logw: Vec<f64> = s
        .support()
        .points()
        .zip(s.coeffs())
        .map(|(a, c)| 2.0 * (c.ln() + a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>()))
        .collect();
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut second = vec![0.0; n * n];
    let mut mu = vec![0.0; n];
    for (a, wi) in s.support().points().zip(&w) {
        let lam = wi / total;
        for i in 0..n {
            mu[i] += lam * a[i];
            for j in 0..n {
                second[i * n + j] += lam * a[i] * a[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            second[i * n + j] -= mu[i] * mu[j];
        }
    }
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    (fact / std::f64::consts::PI.powi(n as i32) * small_det(&second, n)).max(0.0)
}

/// Density-route total against the BKK count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BkkReport {
    pub density_route_total: f64,
    pub error: f64,
    pub n_factorial_vol: f64,
    pub abs_diff: f64,
}

/// `(2π)^n ∫_{ℝ^n} bkk_density` over the fundamental imaginary domain,
/// compared with `n!·vol(P)`. Requires integer exponents and `n ≤ 3`.
pub fn bkk_total(e: &ComplexExpSum, q: &Quadrature) -> Result<BkkReport> {
    let n = e.dim();
    if n > 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    if !e.has_integer_support() {
        return Err(Error::Input("the BKK count needs integer exponents".into()));
    }
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let n_factorial_vol = fact * e.0.support().hull_volume()?.volume;
    if !e.0.is_nondegenerate() {
        return Ok(BkkReport {
            density_route_total: 0.0,
            error: 0.0,
            n_factorial_vol,
            abs_diff: n_factorial_vol,
        });
    }
    let scale = (2.0 * std::f64::consts::PI).powi(n as i32);
    let f = |x: &[f64]| scale * density_unchecked(e, x);
    let est = match &q.region {
        Region::Auto => {
            let gap = e.0.support().min_axis_gap().unwrap_or(1.0);
            integrate_auto(&f, &e.0.center(), 5.0 / gap, q)?
        }
        Region::Box { lo, hi } => {
            let r = crate::integrate::adaptive_box(&f, lo, hi, q.abs_tol, q.rel_tol, q.max_evals)?;
            crate::integrate::Estimate {
                value: r.value,
                error: r.error,
                cells: r.cells,
                evals: r.evals,
                radius: None,
                inversion_failures: 0,
            }
        }
    };
    Ok(BkkReport {
        density_route_total: est.value,
        error: est.error,
        n_factorial_vol,
        abs_diff: (est.value - n_factorial_vol).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cx(dim: usize, pts: Vec<Vec<f64>>) -> ComplexExpSum {
        ComplexExpSum::new(ExpSum::from_points(dim, pts, None).unwrap())
    }

    #[test]
    fn density_examples() {
        let seg = cx(1, vec![vec![0.0], vec![1.0]]);
        assert!((bkk_density(&seg, &[0.0]).unwrap() - 0.25 / PI).abs() < 1e-15);
        let one = cx(2, vec![vec![1.0, 2.0]]);
        assert_eq!(bkk_density(&one, &[0.3, 0.1]).unwrap(), 0.0);
        let sq = cx(
            2,
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 1.0],
            ],
        );
        assert!((bkk_density(&sq, &[0.0, 0.0]).unwrap() - 1.0 / (8.0 * PI * PI)).abs() < 1e-15);
        assert!(bkk_density(&sq, &[0.0]).is_err());
    }

    #[test]
    fn one_dimensional_relation_to_real_metric() {
        let e = ExpSum::from_points(
            1,
            vec![vec![0.0], vec![0.4], vec![2.5]],
            Some(vec![1.0, 3.0, 0.2]),
        )
        .unwrap();
        let c = ComplexExpSum::new(e.clone());
        for x in [-2.0, -0.3, 0.0, 1.1, 4.0] {
            let g = e.metric(&[x]).unwrap().entry(0, 0);
            assert!((bkk_density(&c, &[x]).unwrap() - g / PI).abs() < 1e-12);
        }
    }

    #[test]
    fn totals() {
        let q = Quadrature::with_tol(1e-7);
        for d in 1..=4 {
            let e = cx(1, (0..=d).map(|k| vec![k as f64]).collect());
            let r = bkk_total(&e, &q).unwrap();
            assert!(
                (r.density_route_total - d as f64).abs() < 1e-5,
                "d={d}: {r:?}"
            );
            assert_eq!(r.n_factorial_vol, d as f64);
        }
        let sq = cx(
            2,
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 1.0],
            ],
        );
        let r = bkk_total(&sq, &Quadrature::with_tol(1e-6)).unwrap();
        assert!(
            (r.density_route_total - 2.0).abs() < 1e-4 && r.n_factorial_vol == 2.0,
            "{r:?}"
        );
        let frac = cx(1, vec![vec![0.0], vec![0.5]]);
        assert!(bkk_total(&frac, &q).unwrap_err().is_input_error());
    }
}
