//! Stick-breaking map from the unit cube onto the probability simplex.

/// Weights on `u.len() + 1` components.
///
/// `r_i = u_i^{1/(k-i)}` is the fraction of the remaining stick kept for later
/// components, so uniform `u` gives uniformly distributed weights. The last
/// weight takes the remainder, making the sum exactly 1 up to rounding.
pub fn simplex_map(u: &[f64]) -> Vec<f64> {
    let k = u.len() + 1;
    let mut w = Vec::with_capacity(k);
    let mut rest = 1.0;
    for (i, &ui) in u.iter().enumerate() {
        let r = ui.clamp(0.0, 1.0).powf(1.0 / (k - 1 - i) as f64);
        w.push(rest * (1.0 - r));
        rest *= r;
    }
    w.push(rest);
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halves() {
        assert_eq!(simplex_map(&[0.5]), vec![0.5, 0.5]);
    }

    #[test]
    fn corners_are_vertices() {
        assert_eq!(simplex_map(&[1.0, 1.0]), vec![0.0, 0.0, 1.0]);
        assert_eq!(simplex_map(&[0.0, 0.3]), vec![1.0, 0.0, 0.0]);
        assert_eq!(simplex_map(&[]), vec![1.0]);
    }

    #[test]
    fn centre_of_cube_is_not_degenerate() {
        let w = simplex_map(&[0.5, 0.5, 0.5]);
        assert!(w.iter().all(|&x| x > 0.05));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
