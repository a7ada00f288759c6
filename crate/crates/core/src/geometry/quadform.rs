use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

/// Largest eigenvalue ratio accepted when inverting a form.
pub const CONDITION_LIMIT: f64 = 1e12;

/// A symmetric quadratic form on `ℝ^m`, stored by its Gram matrix.
///
/// For a positive definite `Q`, the dual form `Q°(u) = sup{<u,v>² : Q(v) ≤ 1}`
/// has the inverse Gram matrix, and `B_{Q°}` has volume `b_m √det Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadForm {
    gram: DMatrix<f64>,
}

impl QuadForm {
    /// Symmetrizes `(M + Mᵀ)/2`.
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        if gram.nrows() != gram.ncols() || gram.nrows() == 0 {
            return Err(Error::Input(
                "Gram matrix must be square and non-empty".into(),
            ));
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("Gram matrix has non-finite entries".into()));
        }
        let sym = (&gram + gram.transpose()) * 0.5;
        Ok(QuadForm { gram: sym })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Input("Gram rows must form a square array".into()));
        }
        Self::new(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
    }

    pub(crate) fn from_symmetric_unchecked(gram: DMatrix<f64>) -> Self {
        QuadForm { gram }
    }

    pub fn zeros(m: usize) -> Self {
        QuadForm {
            gram: DMatrix::zeros(m, m),
        }
    }

    pub fn identity(m: usize) -> Self {
        QuadForm {
            gram: DMatrix::identity(m, m),
        }
    }

    pub fn diag(d: &[f64]) -> Self {
        QuadForm {
            gram: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
        }
    }

    /// `u²`, i.e. `v ↦ <u, v>²`.
    pub fn rank_one(u: &[f64]) -> Self {
        let v = DVector::from_column_slice(u);
        QuadForm {
            gram: &v * v.transpose(),
        }
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.gram[(i, j)]
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        let m = self.dim();
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += v[i] * self.gram[(i, j)] * v[j];
            }
        }
        s
    }

    pub fn det(&self) -> f64 {
        match self.dim() {
            1 => self.gram[(0, 0)],
            2 => self.gram[(0, 0)] * self.gram[(1, 1)] - self.gram[(0, 1)] * self.gram[(1, 0)],
            _ => self.gram.determinant(),
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .gram
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn condition_number(&self) -> f64 {
        let ev = self.eigenvalues();
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.gram.clone().cholesky().is_some() && self.eigenvalues()[0] > 0.0
    }

    /// The dual form `Q°`, via Cholesky inversion of the Gram matrix.
    pub fn dual(&self) -> Result<QuadForm> {
        let chol = self
            .gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("form is not positive definite".into()))?;
        let cond = self.condition_number();
        if !(cond <= CONDITION_LIMIT) {
            return Err(Error::Singular(format!(
                "condition number {cond:e} exceeds {CONDITION_LIMIT:e}"
            )));
        }
        let inv = chol.inverse();
        Ok(QuadForm {
            gram: (&inv + inv.transpose()) * 0.5,
        })
    }

    /// `vol(B_{Q°}) = b_m √det Q`; zero for singular forms.
    pub fn ellipsoid_volume(&self) -> Result<f64> {
        let det = self.det();
        let scale = self.gram.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let floor = 1e-12 * scale.powi(self.dim() as i32);
        if det < -floor {
            return Err(Error::Numerical(format!(
                "negative determinant {det:e} for a semidefinite form"
            )));
        }
        let (b, _) = ball_sphere_constants(self.dim());
        Ok(b * det.max(0.0).sqrt())
    }

    pub fn add(&self, other: &QuadForm) -> Result<QuadForm> {
        check_dim(self.dim(), other.dim())?;
        Ok(QuadForm {
            gram: &self.gram + &other.gram,
        })
    }

    pub fn scaled(&self, c: f64) -> QuadForm {
        QuadForm {
            gram: &self.gram * c,
        }
    }

    /// `Q + u²`.
    pub fn add_rank_one(&self, u: &[f64]) -> Result<QuadForm> {
        check_dim(self.dim(), u.len())?;
        self.add(&QuadForm::rank_one(u))
    }

    /// Restriction to the span of the columns of `basis`: Gram `Bᵀ G B`.
    pub fn restrict(&self, basis: &DMatrix<f64>) -> Result<QuadForm> {
        check_dim(self.dim(), basis.nrows())?;
        let g = basis.transpose() * &self.gram * basis;
        Ok(QuadForm {
            gram: (&g + g.transpose()) * 0.5,
        })
    }

    /// Support function of the dual ball `B°_Q`, `h(u) = √Q(u)`.
    pub fn dual_ball_support(&self, u: &[f64]) -> f64 {
        self.eval(u).max(0.0).sqrt()
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &QuadForm) -> f64 {
        self.gram
            .iter()
            .zip(other.gram.iter())
            .fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }
}

/// Unit-ball volume `b_m` in `ℝ^m` and unit-sphere volume `s_m` of `S^m ⊂ ℝ^{m+1}`.
pub fn ball_sphere_constants(m: usize) -> (f64, f64) {
    use std::f64::consts::PI;
    // b_k = 2π/k · b_{k-2}, b_0 = 1, b_1 = 2; s_m = (m+1) b_{m+1}.
    let ball = |k: usize| {
        let mut b = if k.is_multiple_of(2) { 1.0 } else { 2.0 };
        let mut j = if k.is_multiple_of(2) { 2 } else { 3 };
        while j <= k {
            b *= 2.0 * PI / j as f64;
            j += 2;
        }
        b
    };
    (ball(m), (m + 1) as f64 * ball(m + 1))
}

/// Bounds for `√(Σ t_j Q_j(u))`: returns `(lower, middle, upper)` with
/// `lower = (1/√t) Σ t_j √Q_j(u)` and `upper = Σ √t_j √Q_j(u)`, `t = Σ t_j`.
pub fn two_sum_bounds(forms: &[QuadForm], weights: &[f64], u: &[f64]) -> Result<(f64, f64, f64)> {
    if forms.len() != weights.len() || forms.is_empty() {
        return Err(Error::Input(
            "forms and weights must be non-empty and aligned".into(),
        ));
    }
    if weights.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Input("weights must be positive".into()));
    }
    let total: f64 = weights.iter().sum();
    let mut mid = 0.0;
    let mut lower = 0.0;
    let mut upper = 0.0;
    for (q, &t) in forms.iter().zip(weights) {
        check_dim(q.dim(), u.len())?;
        let v = q.eval(u).max(0.0);
        mid += t * v;
        lower += t * v.sqrt();
        upper += t.sqrt() * v.sqrt();
    }
    Ok((lower / total.sqrt(), mid.sqrt(), upper))
}
