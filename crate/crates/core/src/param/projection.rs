//! Euclidean projection of mixture weights onto `{w >= 0, Σw = 1, Cw = d}`.
//!
//! For fixed atom locations (or uniform endpoints) every equality constraint
//! is linear in the weights. The projection is a small quadratic program,
//! solved exactly by enumerating which weights sit at zero: on each candidate
//! free set the closest point of the affine subspace is `w0 + C⁺(d - C w0)`.

use nalgebra::{DMatrix, DVector};

/// Scaled residual below which a linear system counts as consistent.
const CONSISTENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub weights: Vec<f64>,
    /// Largest scaled constraint residual left after projection; zero when feasible.
    pub violation: f64,
}

/// Projects `w0` onto the weights satisfying `rows · w = rhs` on the simplex.
///
/// `rows[j][k]` is the expectation of constraint `j` under component `k`.
/// When the set is empty the nonnegative candidate with the smallest residual
/// is returned together with that residual.
pub fn project_weights(w0: &[f64], rows: &[Vec<f64>], rhs: &[f64]) -> Projection {
    let k = w0.len();
    let mut a = Vec::with_capacity(rows.len() + 1);
    let mut b = Vec::with_capacity(rows.len() + 1);
    a.push(vec![1.0; k]);
    b.push(1.0);
    for (row, &d) in rows.iter().zip(rhs) {
        let s = row.iter().fold(d.abs(), |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        a.push(row.iter().map(|v| v / s).collect::<Vec<_>>());
        b.push(d / s);
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut fallback: Option<(f64, Vec<f64>)> = None;
    // Masks in order of increasing number of zeroed weights.
    let mut masks: Vec<u32> = (0..(1u32 << k) - 1).collect();
    masks.sort_by_key(|m| m.count_ones());
    for zeros in masks {
        let free: Vec<usize> = (0..k).filter(|i| zeros & (1 << i) == 0).collect();
        let Some(w) = solve_on(&free, w0, &a, &b, k) else {
            continue;
        };
        if w.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let w: Vec<f64> = w.into_iter().map(|v| v.max(0.0)).collect();
        let resid = residual(&a, &b, &w);
        if resid <= CONSISTENCY_TOL {
            let dist: f64 = w.iter().zip(w0).map(|(x, y)| (x - y).powi(2)).sum();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, w));
            }
            if zeros == 0 {
                break;
            }
        } else if fallback.as_ref().is_none_or(|(r, _)| resid < *r) {
            fallback = Some((resid, w));
        }
    }
    match (best, fallback) {
        (Some((_, w)), _) => Projection {
            weights: normalize(w),
            violation: 0.0,
        },
        (None, Some((r, w))) => Projection {
            weights: normalize(w),
            violation: r,
        },
        (None, None) => Projection {
            weights: vec![1.0 / k as f64; k],
            violation: residual(&a, &b, &vec![1.0 / k as f64; k]).max(1.0),
        },
    }
}

fn solve_on(free: &[usize], w0: &[f64], a: &[Vec<f64>], b: &[f64], k: usize) -> Option<Vec<f64>> {
    let m = a.len();
    let c = DMatrix::from_fn(m, free.len(), |r, s| a[r][free[s]]);
    let x0 = DVector::from_iterator(free.len(), free.iter().map(|&i| w0[i]));
    let rhs = DVector::from_column_slice(b) - &c * &x0;
    let pinv = c.pseudo_inverse(1e-13).ok()?;
    let x = x0 + pinv * rhs;
    let mut w = vec![0.0; k];
    for (s, &i) in free.iter().enumerate() {
        w[i] = x[s];
    }
    Some(w)
}

fn residual(a: &[Vec<f64>], b: &[f64], w: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(row, d)| (row.iter().zip(w).map(|(x, y)| x * y).sum::<f64>() - d).abs())
        .fold(0.0, f64::max)
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    for v in &mut w {
        *v /= s;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_target_is_plain_affine_projection() {
        // mean of atoms {0, 1, 2} must be 1
        let p = project_weights(&[0.5, 0.3, 0.2], &[vec![0.0, 1.0, 2.0]], &[1.0]);
        assert_eq!(p.violation, 0.0);
        let mean: f64 = p.weights.iter().zip([0.0, 1.0, 2.0]).map(|(w, x)| w * x).sum();
        assert!((mean - 1.0).abs() < 1e-14);
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn active_bound_is_found() {
        // mean 1.9 of atoms {0, 1, 2} forces weight to the top atom
        let p = project_weights(&[1.0, 0.0, 0.0], &[vec![0.0, 1.0, 2.0]], &[1.9]);
        assert_eq!(p.violation, 0.0);
        assert!(p.weights.iter().all(|&w| w >= 0.0));
        let mean: f64 = p.weights.iter().zip([0.0, 1.0, 2.0]).map(|(w, x)| w * x).sum();
        assert!((mean - 1.9).abs() < 1e-12);
    }

    #[test]
    fn unreachable_target_is_flagged() {
        let p = project_weights(&[0.5, 0.5], &[vec![0.0, 1.0]], &[3.0]);
        assert!(p.violation > 0.1);
    }

    #[test]
    fn badly_scaled_rows() {
        let x = [200.0f64, 800.0, 3000.0];
        let rows = vec![x.to_vec(), x.iter().map(|v| v * v).collect()];
        let p = project_weights(&[0.3, 0.4, 0.3], &rows, &[736.0, 602043.0]);
        assert_eq!(p.violation, 0.0);
        let m2: f64 = p.weights.iter().zip(x).map(|(w, x)| w * x * x).sum();
        assert!((m2 - 602043.0).abs() < 1e-6 * 602043.0);
    }
}
