//! Discrete measures reproducing a given moment sequence.
//!
//! Recurrence coefficients come from the moments by the Chebyshev algorithm;
//! atoms and weights from the Jacobi matrix (Golub–Welsch).

use super::canonical::{jacobi_nodes_weights, next_moment_range, to_unit_moments, ATOM_WEIGHT_FLOOR};
use crate::error::{Error, Result};
use crate::measure::{ExtremeMeasure, Interval};

/// Atoms reproducing a moment sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureResult {
    pub measure: ExtremeMeasure,
    /// Total mass `m_0`; the measure itself is normalized.
    pub mass: f64,
    /// The sequence lies on the boundary of the moment space; fewer atoms were returned.
    pub degenerate: bool,
}

/// Relative size of a recurrence coefficient below which the sequence is degenerate.
const DEGENERACY_TOL: f64 = 1e-11;

struct Recurrence {
    alpha: Vec<f64>,
    /// `β_0 = c_0, β_1, …`
    beta: Vec<f64>,
    /// Level `k` at which `β_k` vanished.
    degenerate: Option<usize>,
}

/// Chebyshev algorithm on `c_0..c_K`: every `α_k` with `2k+1 <= K` and `β_k` with `2k <= K`.
fn chebyshev(c: &[f64]) -> Recurrence {
    let kmax = c.len() - 1;
    let mut alpha = Vec::new();
    let mut beta = vec![c[0]];
    if kmax >= 1 {
        alpha.push(c[1] / c[0]);
    }
    let mut sig_prev = vec![0.0; c.len()];
    let mut sig = c.to_vec();
    let mut k = 1;
    while 2 * k <= kmax {
        let mut next = vec![0.0; c.len()];
        for l in k..=(kmax - k) {
            next[l] = sig[l + 1] - alpha[k - 1] * sig[l] - beta[k - 1] * sig_prev[l];
        }
        let b = next[k] / sig[k - 1];
        // β_k is the squared off-diagonal on [0, 1], so it is at most 1/4.
        if !(b > DEGENERACY_TOL) {
            return Recurrence {
                alpha,
                beta,
                degenerate: Some(k),
            };
        }
        beta.push(b);
        if 2 * k < kmax {
            alpha.push(next[k + 1] / next[k] - sig[k] / sig[k - 1]);
        }
        sig_prev = sig;
        sig = next;
        k += 1;
    }
    Recurrence {
        alpha,
        beta,
        degenerate: None,
    }
}

/// Discrete measure reproducing `m_0..m_K` on `interval`.
///
/// With an even count `K + 1 = 2(n+1)` this is the `(n+1)`-point Gauss rule,
/// the lower principal representation of `m_0..m_{2n+1}`. With an odd count
/// (`m_0..m_{2n}`) the missing `m_{2n+1}` is first placed at the midpoint of
/// its admissible range (canonical coordinate 1/2), giving the central
/// `(n+1)`-atom representation. Sequences on the boundary of the moment space
/// return fewer atoms with `degenerate` set.
pub fn moments_to_quadrature(moments: &[f64], interval: Interval) -> Result<QuadratureResult> {
    let (&m0, rest) = moments
        .split_first()
        .ok_or_else(|| Error::InvalidMeasure("empty moment sequence".into()))?;
    if !(m0 > 0.0 && m0.is_finite()) {
        return Err(Error::InfeasibleMoments { index: 0 });
    }
    if rest.is_empty() {
        return Err(Error::InvalidMeasure("at least m_0 and m_1 are required".into()));
    }
    let normalized: Vec<f64> = rest.iter().map(|m| m / m0).collect();
    let mut c = to_unit_moments(&normalized, &interval);
    if c[1] < -1e-12 || c[1] > 1.0 + 1e-12 {
        return Err(Error::InfeasibleMoments { index: 1 });
    }
    let kmax = c.len() - 1;
    let n_atoms = kmax / 2 + 1;

    let mut rec = chebyshev(&c);
    if rec.degenerate.is_none() && kmax.is_multiple_of(2) {
        let (lo, hi) = next_moment_range(&c);
        c.push(0.5 * (lo + hi));
        rec = chebyshev(&c);
    }
    let used = rec.degenerate.unwrap_or(rec.alpha.len()).min(rec.alpha.len()).max(1);
    let (nodes, weights) = jacobi_nodes_weights(&rec.alpha[..used], &rec.beta[1..used]);
    let atoms: Vec<(f64, f64)> = nodes
        .into_iter()
        .zip(weights)
        .filter(|&(_, w)| w > ATOM_WEIGHT_FLOOR)
        .map(|(x, w)| (w, interval.from_unit(x.clamp(0.0, 1.0))))
        .collect();
    let total: f64 = atoms.iter().map(|a| a.0).sum();
    let measure = ExtremeMeasure::dirac(atoms.into_iter().map(|(w, x)| (w / total, x)))?;
    Ok(QuadratureResult {
        degenerate: measure.n_components() < n_atoms,
        measure,
        mass: m0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_gauss_for_uniform() {
        let iv = Interval::new(0.0, 1.0).unwrap();
        let q = moments_to_quadrature(&[1.0, 0.5, 1.0 / 3.0], iv).unwrap();
        assert!(!q.degenerate);
        let ExtremeMeasure::Dirac { atoms } = &q.measure else {
            panic!()
        };
        let s = 1.0 / 3f64.sqrt();
        assert!((atoms[0].location - (1.0 - s) / 2.0).abs() < 1e-12);
        assert!((atoms[1].location - (1.0 + s) / 2.0).abs() < 1e-12);
        assert!((atoms[0].weight - 0.5).abs() < 1e-12);
        assert!((q.measure.raw_moment(2) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn even_count_is_gauss_rule() {
        let iv = Interval::new(0.0, 1.0).unwrap();
        let m: Vec<f64> = (0..6).map(|k| 1.0 / (k as f64 + 1.0)).collect();
        let q = moments_to_quadrature(&m, iv).unwrap();
        assert_eq!(q.measure.n_components(), 3);
        for k in 1..6u32 {
            assert!((q.measure.raw_moment(k) - m[k as usize]).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_variance_is_single_atom() {
        let iv = Interval::new(0.0, 10.0).unwrap();
        let a: f64 = 3.7;
        let q = moments_to_quadrature(&[1.0, a, a * a], iv).unwrap();
        assert!(q.degenerate);
        assert_eq!(q.measure, ExtremeMeasure::dirac([(1.0, q.measure.mean())]).unwrap());
        assert!((q.measure.mean() - a).abs() < 1e-12);
        let q = moments_to_quadrature(&[1.0, 0.0, 0.0], iv).unwrap();
        assert_eq!(q.measure.n_components(), 1);
    }

    #[test]
    fn flow_rate_class_moments() {
        let iv = Interval::new(160.0, 3580.0).unwrap();
        let q = moments_to_quadrature(&[1.0, 736.0, 602043.0], iv).unwrap();
        assert_eq!(q.measure.n_components(), 2);
        assert!((q.measure.raw_moment(1) - 736.0).abs() <= 1e-8 * 736.0);
        assert!((q.measure.raw_moment(2) - 602043.0).abs() <= 1e-8 * 602043.0);
    }

    #[test]
    fn unnormalized_mass() {
        let iv = Interval::new(0.0, 1.0).unwrap();
        let q = moments_to_quadrature(&[2.0, 1.0, 2.0 / 3.0], iv).unwrap();
        assert_eq!(q.mass, 2.0);
        assert!((q.measure.raw_moment(2) - 1.0 / 3.0).abs() < 1e-13);
    }
}
