//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export is a thin wrapper over a plain function in [`demo`], which
//! is what the native tests exercise.

use wasm_bindgen::prelude::*;

pub mod demo {
    use serde_json::json;
    use sparse_kacrice::integrate::{esol_total, lower_bound_check, Quadrature};
    use sparse_kacrice::monotonicity::{psi, region_scan, ScanSpace};
    use sparse_kacrice::{Augmentation, ExpSum};

    fn parse(sum_json: &str) -> Result<ExpSum, String> {
        ExpSum::from_json_str(sum_json).map_err(|e| e.to_string())
    }

    /// Kac-Rice density of a univariate sum at `n` equally spaced points,
    /// followed by `Ψ` for the optional extra exponent at the same points.
    pub fn density_curve(sum_json: &str, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, String> {
        let e = parse(sum_json)?;
        if e.dim() != 1 {
            return Err("the density curve needs a one-dimensional support".into());
        }
        if n < 2 || lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
            return Err("need n ≥ 2 and lo < hi".into());
        }
        (0..n)
            .map(|i| {
                e.density(&[lo + (hi - lo) * i as f64 / (n - 1) as f64])
                    .map_err(|e| e.to_string())
            })
            .collect()
    }

    /// `Ψ` along the same grid for the augmentation `(a0, alpha0)`.
    pub fn psi_curve(
        sum_json: &str,
        a0: f64,
        alpha0: f64,
        lo: f64,
        hi: f64,
        n: usize,
    ) -> Result<Vec<f64>, String> {
        let e = parse(sum_json)?;
        let aug = Augmentation::new(vec![a0], alpha0).map_err(|e| e.to_string())?;
        if n < 2 || lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
            return Err("need n ≥ 2 and lo < hi".into());
        }
        (0..n)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                psi(&e, &aug, &[x])
                    .map(|p| p.psi)
                    .map_err(|e| e.to_string())
            })
            .collect()
    }

    /// Expected number of real zeros with its error and the volume lower
    /// bound, as a JSON object.
    pub fn expected_zeros(sum_json: &str, tol: f64) -> Result<String, String> {
        let e = parse(sum_json)?;
        let q = Quadrature::with_tol(tol);
        let est = esol_total(&e, &q).map_err(|e| e.to_string())?;
        let bound = if e.dim() <= 3 {
            lower_bound_check(&e, &q).ok().map(|r| r.bound)
        } else {
            None
        };
        Ok(json!({ "value": est.value, "error": est.error, "cells": est.cells, "lower_bound": bound }).to_string())
    }

    /// `Ψ` on a `res × res` grid over the bounding box of a planar support,
    /// in moment coordinates, row-major with `p1` slowest. Nodes outside the
    /// open polytope are NaN. The box is appended as `[lo1, hi1, lo2, hi2]`.
    pub fn psi_field(
        sum_json: &str,
        a0x: f64,
        a0y: f64,
        alpha0: f64,
        res: usize,
    ) -> Result<Vec<f64>, String> {
        let e = parse(sum_json)?;
        if e.dim() != 2 {
            return Err("the Ψ field needs a two-dimensional support".into());
        }
        let aug = Augmentation::new(vec![a0x, a0y], alpha0).map_err(|e| e.to_string())?;
        let pts = e.support().to_vecs();
        let bounds: Vec<(f64, f64)> = (0..2)
            .map(|i| {
                let lo = pts.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
                let hi = pts.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect();
        let scan = region_scan(&e, &aug, &bounds, res, ScanSpace::P).map_err(|e| e.to_string())?;
        let mut out: Vec<f64> = scan
            .nodes
            .iter()
            .map(|n| n.psi.unwrap_or(f64::NAN))
            .collect();
        out.extend(bounds.iter().flat_map(|(lo, hi)| [*lo, *hi]));
        Ok(out)
    }
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = densityCurve)]
pub fn density_curve(sum_json: &str, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, JsError> {
    js(demo::density_curve(sum_json, lo, hi, n))
}

#[wasm_bindgen(js_name = psiCurve)]
pub fn psi_curve(
    sum_json: &str,
    a0: f64,
    alpha0: f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<Vec<f64>, JsError> {
    js(demo::psi_curve(sum_json, a0, alpha0, lo, hi, n))
}

#[wasm_bindgen(js_name = expectedZeros)]
pub fn expected_zeros(sum_json: &str, tol: f64) -> Result<String, JsError> {
    demo::expected_zeros(sum_json, tol).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = psiField)]
pub fn psi_field(
    sum_json: &str,
    a0x: f64,
    a0y: f64,
    alpha0: f64,
    res: usize,
) -> Result<Vec<f64>, JsError> {
    js(demo::psi_field(sum_json, a0x, a0y, alpha0, res))
}
