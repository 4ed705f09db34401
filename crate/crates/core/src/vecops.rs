//! Small weighted reductions over nodal fields.

/// `Σ wᵢ uᵢ vᵢ`.
pub fn weighted_dot(weights: &[f64], u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), u.len());
    debug_assert_eq!(weights.len(), v.len());
    weights
        .iter()
        .zip(u)
        .zip(v)
        .map(|((w, a), b)| w * a * b)
        .sum()
}

/// `(Σ wᵢ uᵢ²)^½`.
pub fn weighted_norm(weights: &[f64], u: &[f64]) -> f64 {
    libm::sqrt(weighted_dot(weights, u, u))
}

/// `Σ wᵢ uᵢ`.
pub fn weighted_sum(weights: &[f64], u: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), u.len());
    weights.iter().zip(u).map(|(w, a)| w * a).sum()
}

pub(crate) fn max_abs(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}
