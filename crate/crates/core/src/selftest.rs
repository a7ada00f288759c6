//! Closed-form checks used by the `selftest` command: each row compares a
//! computed value with a value known exactly.

use std::f64::consts::PI;

use serde::Serialize;

use crate::algebra::{kostlan, tensor};
use crate::complexcase::{bkk_total, ComplexExpSum};
use crate::error::Result;
use crate::expsum::ExpSum;
use crate::integrate::{esol_pspace, esol_total, lower_bound_check, Quadrature};
use crate::mc::{estimate_esol, McConfig};
use crate::monotonicity::{psi, witness_interior, Augmentation};

/// One line of the self-test table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub expected: f64,
    pub got: f64,
    pub tol: f64,
    /// `"≈"` for `|got - expected| ≤ tol`, `"<"` for `got < expected`.
    pub relation: &'static str,
    pub passed: bool,
}

impl CheckRow {
    fn abs(name: impl Into<String>, expected: f64, got: f64, tol: f64) -> Self {
        CheckRow {
            name: name.into(),
            expected,
            got,
            tol,
            relation: "≈",
            passed: (got - expected).abs() <= tol,
        }
    }

    /// Passes when `got < bound`.
    fn below(name: impl Into<String>, bound: f64, got: f64) -> Self {
        CheckRow {
            name: name.into(),
            expected: bound,
            got,
            tol: 0.0,
            relation: "<",
            passed: got < bound,
        }
    }
}

fn line(points: &[f64]) -> Result<ExpSum> {
    ExpSum::from_points(1, points.iter().map(|a| vec![*a]).collect(), None)
}

/// Runs all closed-form checks. Errors abort the table, failures do not.
pub fn run() -> Result<Vec<CheckRow>> {
    let q = Quadrature::with_tol(1e-8);
    let seed = line(&[0.0, 1.0])?;
    let mut rows = vec![CheckRow::abs(
        "esol two-term sum",
        0.5,
        esol_total(&seed, &q)?.value,
        1e-6,
    )];
    for d in 1..=5 {
        let v = esol_total(&kostlan(1, d)?, &q)?.value;
        rows.push(CheckRow::abs(
            format!("esol kostlan(1,{d})"),
            (d as f64).sqrt() / 2.0,
            v,
            1e-4,
        ));
    }
    let sq = kostlan(2, 1)?;
    let v = esol_total(&sq, &Quadrature::with_tol(1e-6))?.value;
    rows.push(CheckRow::abs(
        "esol kostlan(2,1)",
        PI / 8.0,
        v,
        2e-3 * PI / 8.0,
    ));
    let p = esol_pspace(&seed, &Quadrature::with_tol(1e-7))?.value;
    rows.push(CheckRow::abs("moment-side two-term sum", 0.5, p, 1e-4));
    let ab = esol_total(&tensor(&seed, &kostlan(1, 2)?)?, &q)?.value;
    let ratio = ab / (0.5 * 2f64.sqrt() / 2.0);
    rows.push(CheckRow::abs(
        "tensor constant s1·s1/(2·s2)",
        PI / 2.0,
        ratio,
        2e-3 * PI / 2.0,
    ));
    let lb = lower_bound_check(&seed, &q)?;
    rows.push(CheckRow::abs(
        "lower bound two-term sum",
        1.0 / (2.0 * PI),
        lb.bound,
        1e-12,
    ));
    rows.push(CheckRow::below("lower bound below esol", lb.esol, lb.bound));
    let bkk = bkk_total(&ComplexExpSum::new(line(&[0.0, 1.0, 2.0])?), &q)?;
    rows.push(CheckRow::abs(
        "BKK count {0,1,2}",
        2.0,
        bkk.density_route_total,
        1e-3,
    ));
    let aug = Augmentation::new(vec![0.5, 0.5], 1.0)?;
    let w = witness_interior(&sq, &aug, 1e-12)?;
    rows.push(CheckRow::below(
        "Ψ at the interior witness",
        1.0,
        w.eval.psi,
    ));
    let far = Augmentation::new(vec![3.0], 1.0)?;
    let tail = psi(&seed, &far, &[20.0])?.psi;
    rows.push(CheckRow::below("Ψ far along the ray, a0 = 3", 1.0, tail));
    let mc = estimate_esol(&seed, &McConfig::for_sum(&seed, 20_000, 2024)?)?;
    rows.push(CheckRow::abs(
        "Monte-Carlo two-term sum",
        0.5,
        mc.mean,
        3.0 * mc.stderr,
    ));
    Ok(rows)
}

/// Fixed-width text rendering of the table.
pub fn render(rows: &[CheckRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let tol = if r.relation == "<" {
            String::new()
        } else {
            format!("  (tol {:.0e})", r.tol)
        };
        out.push_str(&format!(
            "{}  {:<32} got {:>14.9} {} {:>14.9}{}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.got,
            r.relation,
            r.expected,
            tol
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_rows_pass() {
        let rows = super::run().unwrap();
        let failed: Vec<_> = rows.iter().filter(|r| !r.passed).collect();
        assert!(failed.is_empty(), "{}", super::render(&rows));
        assert!(super::render(&rows).lines().count() == rows.len());
    }
}
