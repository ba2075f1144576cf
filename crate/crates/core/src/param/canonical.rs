//! Canonical moments of measures on a compact interval.
//!
//! A moment sequence `(m_1, …, m_k)` on `[a, b]` is rescaled to `[0, 1]` and
//! encoded by `p_j = (c_j - c_j^-) / (c_j^+ - c_j^-)`, where `[c_j^-, c_j^+]` is
//! the range of the `j`-th moment given the previous ones. Both gaps are ratios
//! of Hankel determinants. The inverse direction uses the continued-fraction
//! coefficients `ζ_1 = p_1`, `ζ_j = (1 - p_{j-1}) p_j`, which give the
//! three-term recurrence `a_{k+1} = ζ_{2k} + ζ_{2k+1}`, `b_{k+1} = ζ_{2k-1} ζ_{2k}`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{ExtremeMeasure, Interval};

/// Canonical moments `p_1..p_k ∈ [0, 1]` on an interval.
///
/// A coordinate equal to 0 or 1 ends the sequence: the measure is then finitely
/// supported and determined by the prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalSeq {
    pub p: Vec<f64>,
    pub interval: Interval,
}

impl CanonicalSeq {
    pub fn new(p: Vec<f64>, interval: Interval) -> Result<Self> {
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidMeasure("canonical moments must lie in [0, 1]".into()));
        }
        Ok(Self { p, interval })
    }

    /// True when the last coordinate sits on the boundary.
    pub fn is_terminated(&self) -> bool {
        self.p.last().is_some_and(|&v| v == 0.0 || v == 1.0)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Moments `c_0..c_k` of `(X - a)/(b - a)` from raw moments `m_1..m_k` of `X`.
pub fn to_unit_moments(moments: &[f64], interval: &Interval) -> Vec<f64> {
    let (a, w) = (interval.lo, interval.width());
    let m = |j: usize| if j == 0 { 1.0 } else { moments[j - 1] };
    let mut c = vec![1.0];
    for r in 1..=moments.len() {
        let mut s = 0.0;
        for j in 0..=r {
            s += binomial(r, j) * (-a).powi((r - j) as i32) * m(j);
        }
        c.push(s / w.powi(r as i32));
    }
    c
}

/// Raw moments `m_1..m_k` on the interval from unit moments `c_0..c_k` (with `c_0 = 1`).
pub fn from_unit_moments(c: &[f64], interval: &Interval) -> Vec<f64> {
    let (a, w) = (interval.lo, interval.width());
    (1..c.len())
        .map(|r| {
            (0..=r)
                .map(|j| binomial(r, j) * a.powi((r - j) as i32) * w.powi(j as i32) * c[j])
                .sum()
        })
        .collect()
}

fn det(n: usize, entry: impl Fn(usize, usize) -> f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    DMatrix::from_fn(n, n, entry).determinant()
}

/// Lower and upper gaps `(c_j - c_j^-, c_j^+ - c_j)` for `j = 1..` using
/// the unit moments `c` (`c[0] = 1`).
fn gaps(c: &[f64], j: usize) -> (f64, f64) {
    let m = j / 2;
    if j.is_multiple_of(2) {
        // j = 2m: H_{2m} / H_{2m-2} and Hbar_{2m} / Hbar_{2m-2}
        let h = |n: usize| det(n + 1, |r, s| c[r + s]);
        let hbar = |n: usize| det(n, |r, s| c[r + s + 1] - c[r + s + 2]);
        (h(m) / h(m - 1), hbar(m) / hbar(m - 1))
    } else {
        // j = 2m+1: Hlow_{2m+1} / Hlow_{2m-1} and Hbar_{2m+1} / Hbar_{2m-1}
        let hlow = |n: usize| det(n, |r, s| c[r + s + 1]);
        let hbar = |n: usize| det(n, |r, s| c[r + s] - c[r + s + 1]);
        (hlow(m + 1) / hlow(m), hbar(m + 1) / hbar(m))
    }
}

/// Admissible range `[c^-, c^+]` of the next unit moment `c_{k+1}` given `c_0..c_k`.
pub(crate) fn next_moment_range(c: &[f64]) -> (f64, f64) {
    let mut ext = c.to_vec();
    ext.push(0.0);
    let (lower, upper) = gaps(&ext, c.len());
    (-lower, upper)
}

/// Relative size below which a gap counts as zero.
const GAP_TOL: f64 = 1e-12;
/// Relative size below which a negative gap is treated as rounding.
const INFEASIBLE_TOL: f64 = 1e-9;

/// Canonical moments of the raw moments `m_1..m_k` on `interval`.
///
/// The unit moments are turned into recurrence coefficients by the Chebyshev
/// algorithm, then into `ζ_j` and `p_j = ζ_j / (1 - p_{j-1})`.
pub fn moments_to_canonical(moments: &[f64], interval: Interval) -> Result<CanonicalSeq> {
    let c = to_unit_moments(moments, &interval);
    let k = moments.len();
    let mut p: Vec<f64> = Vec::with_capacity(k);
    // sigma[l] = ∫ π_r(x) x^l for the current level r, `prev` for r - 1.
    let mut prev = vec![0.0; k + 1];
    let mut sigma = c.clone();
    let mut alpha = c.get(1).copied().unwrap_or(0.0);
    let mut beta = 0.0;
    let mut zeta_prev = 0.0;
    for j in 1..=k {
        let r = j / 2;
        let zeta = if j == 1 {
            alpha
        } else if j % 2 == 0 {
            let mut next = vec![0.0; k + 1];
            for l in r..=(k - r) {
                next[l] = sigma[l + 1] - alpha * sigma[l] - beta * prev[l];
            }
            beta = next[r] / sigma[r - 1];
            prev = std::mem::replace(&mut sigma, next);
            beta / zeta_prev
        } else {
            alpha = sigma[r + 1] / sigma[r] - prev[r] / prev[r - 1];
            alpha - zeta_prev
        };
        let gap = if j == 1 { 1.0 } else { 1.0 - p[j - 2] };
        let pj = zeta / gap;
        if !pj.is_finite() || !(-INFEASIBLE_TOL..=1.0 + INFEASIBLE_TOL).contains(&pj) {
            return Err(Error::InfeasibleMoments { index: j });
        }
        if pj <= GAP_TOL || pj >= 1.0 - GAP_TOL {
            p.push(if pj <= GAP_TOL { 0.0 } else { 1.0 });
            // Remaining moments must agree with the boundary measure.
            check_tail(&c, &p, j)?;
            break;
        }
        p.push(pj);
        zeta_prev = zeta;
    }
    CanonicalSeq::new(p, interval)
}

fn check_tail(c: &[f64], p: &[f64], j: usize) -> Result<()> {
    let k = c.len() - 1;
    if k == j {
        return Ok(());
    }
    let mut full = p.to_vec();
    full.resize(k, 0.5);
    let implied = unit_moments_from_canonical(&full);
    for r in (j + 1)..=k {
        let scale = 1e-8 * c[r].abs().max(1e-12);
        if (implied[r] - c[r]).abs() > scale.max(1e-10) {
            return Err(Error::InfeasibleMoments { index: r });
        }
    }
    Ok(())
}

/// Continued-fraction coefficients `ζ_0 = 0, ζ_1, …, ζ_k`.
fn zetas(p: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; p.len() + 1];
    for j in 1..=p.len() {
        z[j] = if j == 1 { p[0] } else { (1.0 - p[j - 2]) * p[j - 1] };
    }
    z
}

/// Recurrence coefficients `(α_0..α_{n-1}, β_1..β_{n-1})` of the monic orthogonal
/// polynomials on `[0, 1]`; `ζ` beyond the given length are zero.
fn recurrence(p: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut z = zetas(p);
    z.resize(2 * n + 2, 0.0);
    let alpha = (0..n)
        .map(|k| if k == 0 { z[1] } else { z[2 * k] + z[2 * k + 1] })
        .collect();
    let beta = (1..n).map(|k| z[2 * k - 1] * z[2 * k]).collect();
    (alpha, beta)
}

/// Unit moments `c_0..c_k` encoded by `p_1..p_k`.
fn unit_moments_from_canonical(p: &[f64]) -> Vec<f64> {
    let k = p.len();
    let levels = k / 2 + 2;
    let (alpha, beta) = recurrence(p, levels);
    // Coefficients of x^r in the orthogonal basis; x·P_j = P_{j+1} + α_j P_j + β_j P_{j-1}.
    let mut v = vec![0.0; levels + 1];
    v[0] = 1.0;
    let mut c = vec![1.0];
    for _ in 0..k {
        let mut next = vec![0.0; levels + 1];
        for j in 0..=levels {
            let mut s = 0.0;
            if j > 0 {
                s += v[j - 1];
            }
            if j < levels {
                s += alpha[j] * v[j];
            }
            if j < levels && j < beta.len() {
                s += beta[j] * v[j + 1];
            }
            next[j] = s;
        }
        v = next;
        c.push(v[0]);
    }
    c
}

/// Raw moments `m_1..m_k` on the interval encoded by the canonical sequence.
pub fn canonical_to_moments(cs: &CanonicalSeq) -> Vec<f64> {
    from_unit_moments(&unit_moments_from_canonical(&cs.p), &cs.interval)
}

/// Weights below this are dropped from decoded measures.
pub const ATOM_WEIGHT_FLOOR: f64 = 1e-14;

/// The `n`-atom measure on the interval whose canonical moments start with
/// `p_1..p_{2n-1}` (missing coordinates are taken as 1/2).
///
/// Atoms are the eigenvalues of the `n × n` Jacobi matrix; weights are the
/// squared first components of its eigenvectors.
pub fn canonical_to_quadrature(p: &[f64], n: usize, interval: &Interval) -> ExtremeMeasure {
    let mut full = p.to_vec();
    if full.len() < 2 * n - 1 {
        full.resize(2 * n - 1, 0.5);
    }
    let (alpha, beta) = recurrence(&full[..2 * n - 1], n);
    let (nodes, weights) = jacobi_nodes_weights(&alpha, &beta);
    let atoms: Vec<(f64, f64)> = nodes
        .into_iter()
        .zip(weights)
        .filter(|&(_, w)| w > ATOM_WEIGHT_FLOOR)
        .map(|(x, w)| (w, interval.from_unit(x.clamp(0.0, 1.0))))
        .collect();
    let total: f64 = atoms.iter().map(|a| a.0).sum();
    ExtremeMeasure::dirac(atoms.into_iter().map(|(w, x)| (w / total, x)))
        .expect("eigenvector weights form a probability vector")
}

/// Golub–Welsch: nodes and unit-mass weights of the Jacobi matrix with
/// diagonal `alpha` and squared off-diagonal `beta`.
pub(crate) fn jacobi_nodes_weights(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = alpha.len();
    let jac = DMatrix::from_fn(n, n, |r, s| {
        if r == s {
            alpha[r]
        } else if r + 1 == s {
            beta[r].max(0.0).sqrt()
        } else if s + 1 == r {
            beta[s].max(0.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn uniform_prefix() {
        let cs = moments_to_canonical(&[0.5, 1.0 / 3.0, 0.25], unit()).unwrap();
        let expected = [0.5, 1.0 / 3.0, 0.5];
        for (a, b) in cs.p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{:?}", cs.p);
        }
    }

    #[test]
    fn second_canonical_moment_hand_formula() {
        let (m1, m2) = (0.3, 0.15);
        let cs = moments_to_canonical(&[m1, m2], unit()).unwrap();
        let p2 = (m2 - m1 * m1) / (m1 * (1.0 - m1));
        assert!((cs.p[1] - p2).abs() < 1e-14);
    }

    #[test]
    fn arcsine_is_all_half() {
        // m_k = C(2k, k) / 4^k
        let moments: Vec<f64> = (1..=8).map(|k| binomial(2 * k, k) / 4f64.powi(k as i32)).collect();
        let cs = moments_to_canonical(&moments, unit()).unwrap();
        assert_eq!(cs.p.len(), 8);
        for p in &cs.p {
            assert!((p - 0.5).abs() < 1e-9, "{:?}", cs.p);
        }
    }

    #[test]
    fn dirac_at_left_end_terminates() {
        let iv = Interval::new(2.0, 5.0).unwrap();
        let cs = moments_to_canonical(&[2.0, 4.0, 8.0], iv).unwrap();
        assert_eq!(cs.p, vec![0.0]);
        let cs = moments_to_canonical(&[5.0, 25.0], iv).unwrap();
        assert_eq!(cs.p, vec![1.0]);
    }

    #[test]
    fn invalid_sequence_reports_index() {
        // variance would be negative
        let err = moments_to_canonical(&[0.5, 0.2], unit()).unwrap_err();
        assert_eq!(err, Error::InfeasibleMoments { index: 2 });
        // mean outside the interval
        let err = moments_to_canonical(&[1.5], unit()).unwrap_err();
        assert_eq!(err, Error::InfeasibleMoments { index: 1 });
    }

    #[test]
    fn inverse_examples() {
        let cs = CanonicalSeq::new(vec![0.5, 1.0 / 3.0, 0.5], unit()).unwrap();
        let m = canonical_to_moments(&cs);
        for (a, b) in m.iter().zip([0.5, 1.0 / 3.0, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
        let iv = Interval::new(2.0, 5.0).unwrap();
        let m = canonical_to_moments(&CanonicalSeq::new(vec![0.0], iv).unwrap());
        assert_eq!(m, vec![2.0]);
        let arcsine = CanonicalSeq::new(vec![0.5; 6], unit()).unwrap();
        let m = canonical_to_moments(&arcsine);
        for (k, v) in m.iter().enumerate() {
            let exact = binomial(2 * (k + 1), k + 1) / 4f64.powi(k as i32 + 1);
            assert!((v - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn quadrature_from_canonical_is_gauss_for_uniform() {
        let m = canonical_to_quadrature(&[0.5, 1.0 / 3.0, 0.5], 2, &unit());
        let ExtremeMeasure::Dirac { atoms } = m else { panic!() };
        let s = 1.0 / 3f64.sqrt();
        assert!((atoms[0].location - (1.0 - s) / 2.0).abs() < 1e-14);
        assert!((atoms[1].location - (1.0 + s) / 2.0).abs() < 1e-14);
        assert!((atoms[0].weight - 0.5).abs() < 1e-14);
    }

    #[test]
    fn boundary_coordinate_collapses_atoms() {
        // zero variance: a single atom at the mean
        let m = canonical_to_quadrature(&[0.3, 0.0, 0.7], 2, &unit());
        assert_eq!(m.n_components(), 1);
        assert!((m.mean() - 0.3).abs() < 1e-14);
        // maximal variance: mass on both endpoints
        let m = canonical_to_quadrature(&[0.3, 1.0, 0.7], 2, &unit());
        let ExtremeMeasure::Dirac { atoms } = m else { panic!() };
        assert_eq!(atoms.len(), 2);
        assert!(atoms[0].location.abs() < 1e-14 && (atoms[1].location - 1.0).abs() < 1e-14);
        assert!((atoms[1].weight - 0.3).abs() < 1e-14);
    }
}
