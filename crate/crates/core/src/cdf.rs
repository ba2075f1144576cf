//! Exact distribution functions of finite mixtures of point masses and
//! uniform segments, with both generalized inverses.
//!
//! The distribution function of such a mixture is piecewise linear with jumps.
//! It is stored at its breakpoints as left limits `F(b-)` and values `F(b)`;
//! between consecutive breakpoints it is linear.

use serde::{Deserialize, Serialize};

/// Uniform mass `weight` spread over `[lo, hi]` (a point mass when `lo == hi`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub weight: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Default)]
pub struct PiecewiseCdf {
    breaks: Vec<f64>,
    left: Vec<f64>,
    value: Vec<f64>,
    total: f64,
}

impl PiecewiseCdf {
    /// Builds the distribution function of `Σ atoms + Σ segments`.
    ///
    /// Weights are used as given; `total` is their sum (normally 1).
    pub fn new(atoms: &[(f64, f64)], segments: &[Segment]) -> Self {
        // Event: position, jump, slope change.
        let mut events: Vec<(f64, f64, f64)> = Vec::with_capacity(atoms.len() + 2 * segments.len());
        for &(w, x) in atoms {
            if w > 0.0 {
                events.push((x, w, 0.0));
            }
        }
        for s in segments {
            if s.weight <= 0.0 {
                continue;
            }
            let (lo, hi) = if s.lo <= s.hi { (s.lo, s.hi) } else { (s.hi, s.lo) };
            if hi > lo {
                let slope = s.weight / (hi - lo);
                events.push((lo, 0.0, slope));
                events.push((hi, 0.0, -slope));
            } else {
                events.push((lo, s.weight, 0.0));
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut breaks = Vec::new();
        let mut left = Vec::new();
        let mut value = Vec::new();
        let mut slope = 0.0;
        let mut f = 0.0;
        let mut prev = f64::NEG_INFINITY;
        let mut i = 0;
        while i < events.len() {
            let x = events[i].0;
            let f_left = if prev.is_finite() {
                (f + slope * (x - prev)).max(f)
            } else {
                0.0
            };
            let mut jump = 0.0;
            let mut dslope = 0.0;
            while i < events.len() && events[i].0 == x {
                jump += events[i].1;
                dslope += events[i].2;
                i += 1;
            }
            f = f_left + jump;
            slope += dslope;
            if slope.abs() < 1e-300 {
                slope = 0.0;
            }
            breaks.push(x);
            left.push(f_left);
            value.push(f);
            prev = x;
        }
        let total = value.last().copied().unwrap_or(0.0);
        Self {
            breaks,
            left,
            value,
            total,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        Some((*self.breaks.first()?, *self.breaks.last()?))
    }

    /// `F(t) = mass of (-inf, t]`, right-continuous.
    pub fn cdf(&self, t: f64) -> f64 {
        let n = self.breaks.len();
        if n == 0 || t < self.breaks[0] {
            return 0.0;
        }
        // index of the last breakpoint <= t
        let j = self.breaks.partition_point(|&b| b <= t) - 1;
        if j + 1 == n {
            return self.value[j];
        }
        let (b0, b1) = (self.breaks[j], self.breaks[j + 1]);
        let frac = (t - b0) / (b1 - b0);
        let f = self.value[j] + frac * (self.left[j + 1] - self.value[j]);
        f.clamp(self.value[j], self.left[j + 1])
    }

    /// Lower quantile `inf { x : F(x) >= p }`.
    pub fn lower_quantile(&self, p: f64) -> f64 {
        self.inverse(p, |f| f >= p, true)
    }

    /// Upper quantile `inf { x : F(x) > p }`.
    pub fn upper_quantile(&self, p: f64) -> f64 {
        self.inverse(p, |f| f > p, false)
    }

    fn inverse(&self, p: f64, hit: impl Fn(f64) -> bool, attained: bool) -> f64 {
        let n = self.breaks.len();
        if n == 0 {
            return f64::NAN;
        }
        let j = self.value.partition_point(|&v| !hit(v));
        if j == n {
            return self.breaks[n - 1];
        }
        if j == 0 {
            return self.breaks[0];
        }
        let (b0, b1) = (self.breaks[j - 1], self.breaks[j]);
        let (f0, f1) = (self.value[j - 1], self.left[j]);
        if hit(f1) && f1 > f0 {
            // F is linear on (b0, b1]; solve F(x) = p.
            let mut x = (b0 + (p - f0) / (f1 - f0) * (b1 - b0)).clamp(b0, b1);
            if !attained {
                return x;
            }
            // Snap to the smallest float where the evaluated F hits.
            while x < b1 && !hit(self.cdf(x)) {
                x = x.next_up();
            }
            while x > b0 && hit(self.cdf(x.next_down())) {
                x = x.next_down();
            }
            return x;
        }
        b1
    }

    /// Breakpoints with `(x, F(x-), F(x))`.
    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breaks
            .iter()
            .zip(&self.left)
            .zip(&self.value)
            .map(|((&x, &l), &v)| (x, l, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_conventions_split_at_atom() {
        let cdf = PiecewiseCdf::new(&[(0.5, 1.0), (0.5, 2.0)], &[]);
        assert_eq!(cdf.lower_quantile(0.5), 1.0);
        assert_eq!(cdf.upper_quantile(0.5), 2.0);
        assert_eq!(cdf.cdf(1.0), 0.5);
        assert_eq!(cdf.cdf(0.999), 0.0);
    }

    #[test]
    fn uniform_segment_quantile() {
        let cdf = PiecewiseCdf::new(
            &[],
            &[Segment {
                weight: 1.0,
                lo: 0.0,
                hi: 1.0,
            }],
        );
        assert!((cdf.lower_quantile(0.95) - 0.95).abs() < 1e-15);
        assert!((cdf.upper_quantile(0.95) - 0.95).abs() < 1e-15);
        assert!((cdf.cdf(0.25) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn flat_region_splits_quantiles() {
        // mass 0.5 on [0,1], 0.5 on [2,3]
        let cdf = PiecewiseCdf::new(
            &[],
            &[
                Segment {
                    weight: 0.5,
                    lo: 0.0,
                    hi: 1.0,
                },
                Segment {
                    weight: 0.5,
                    lo: 2.0,
                    hi: 3.0,
                },
            ],
        );
        assert_eq!(cdf.lower_quantile(0.5), 1.0);
        assert_eq!(cdf.upper_quantile(0.5), 2.0);
        assert!((cdf.cdf(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn overlapping_segments_and_atoms() {
        let cdf = PiecewiseCdf::new(
            &[(0.2, 0.5)],
            &[
                Segment {
                    weight: 0.4,
                    lo: 0.0,
                    hi: 1.0,
                },
                Segment {
                    weight: 0.4,
                    lo: 0.5,
                    hi: 1.5,
                },
            ],
        );
        // F(0.5) = 0.4*0.5 + 0.2 = 0.4
        assert!((cdf.cdf(0.5) - 0.4).abs() < 1e-15);
        // F(1.0) = 0.4 + 0.2 + 0.4*0.5 = 0.8
        assert!((cdf.cdf(1.0) - 0.8).abs() < 1e-15);
        assert!((cdf.cdf(2.0) - 1.0).abs() < 1e-15);
        let q = cdf.lower_quantile(0.6);
        assert!((cdf.cdf(q) - 0.6).abs() < 1e-12);
    }
}
