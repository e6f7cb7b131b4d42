use super::Real;

/// Default Charbonnier smoothing term.
pub const CHARBONNIER_EPS: f64 = 1e-3;

/// Elementwise Charbonnier penalty `sqrt((a - b)^2 + eps)`.
///
/// Returns the sum of the penalties (accumulated in `f64`) and, per element,
/// the derivative with respect to `a`. Callers divide by their own element
/// count for mean reduction.
pub fn charbonnier<T: Real>(a: &[T], b: &[T], eps: f64) -> (f64, Vec<T>) {
    assert_eq!(a.len(), b.len(), "charbonnier operands differ in length");
    let eps_t = T::from_f64(eps);
    let mut sum = 0.0;
    let grad = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            let r = (d * d + eps_t).sqrt();
            sum += r.to_f64();
            d / r
        })
        .collect();
    (sum, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_difference_sits_on_the_floor() {
        let (s, g) = charbonnier(&[0.25f64; 4], &[0.25; 4], 1e-3);
        assert!((s / 4.0 - 1e-3f64.sqrt()).abs() < 1e-15);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn derivative_matches_closed_form() {
        let (_, g) = charbonnier(&[1.0f64], &[0.0], 1e-3);
        assert!((g[0] - 1.0 / (1.0f64 + 1e-3).sqrt()).abs() < 1e-15);
    }
}
