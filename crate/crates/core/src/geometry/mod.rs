//! Convex geometry of finite point sets and quadratic-form calculus.

pub(crate) mod hull;
mod quadform;
mod support;

pub use hull::{Facet, HullVolume};
pub use quadform::{ball_sphere_constants, two_sum_bounds, QuadForm, CONDITION_LIMIT};
pub use support::SupportSet;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
