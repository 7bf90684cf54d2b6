//! Small shared numeric helpers.

/// Euclidean norm of a vector.
pub(crate) fn norm(xs: &[f64]) -> f64 {
    xs.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Squared Euclidean distance between two equal-length vectors.
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `true` iff every component is finite.
pub(crate) fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|v| v.is_finite())
}
