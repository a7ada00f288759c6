//! Expected number of real zeros of Gaussian exponential sums
//! `E(x) = Σ ξ_a α_a exp(<a, x>)` with iid standard Gaussian `ξ_a`.
//!
//! The expected zero count over a region `U ⊂ ℝ^m` is the Riemannian volume
//! of `U` for the Adler-Taylor metric `g_x`, the weighted covariance of the
//! support `A` under the softmax weights `λ_a(x) ∝ α_a² exp(2<a, x>)`, scaled
//! by `2 / s_m`. Everything in this crate is built around that identity:
//!
//! - [`geometry`]: support functions, faces, hull volume, quadratic forms.
//! - [`expsum`]: the exponential sum and its pointwise quantities.
//! - [`monotonicity`]: the effect of adding one exponent (`Ψ`, `U₋`, `U₊`).
//! - [`algebra`]: tensor and Aronszajn products, Kostlan systems.
//! - [`integrate`]: expected zero counts by cubature in `x` or moment space.
//! - [`mc`]: Monte-Carlo zero counting for univariate sums.
//! - [`complexcase`]: the complex density and the `n!·vol(P)` check.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod complexcase;
pub mod error;
pub mod expsum;
pub mod geometry;
pub mod integrate;
pub mod mc;
pub mod monotonicity;
pub mod selftest;

pub use error::{Error, Result};
pub use expsum::{EvalBundle, ExpSum};
pub use geometry::{QuadForm, SupportSet};
pub use monotonicity::{Augmentation, Classification, PsiEval};

/// Version tag written into every JSON/CSV artifact.
pub const SCHEMA_VERSION: u32 = 1;
