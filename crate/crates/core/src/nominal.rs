//! Parametric reference distributions and their discretization into extreme measures.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::measure::ExtremeMeasure;
use crate::quadrature::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nominal {
    /// CDF `exp(-exp(-(x - loc)/scale))`.
    Gumbel {
        loc: f64,
        scale: f64,
    },
    /// Normal law, optionally truncated to `[lo, hi]`.
    Normal {
        mean: f64,
        sd: f64,
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid standard normal")
}

impl Nominal {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Gumbel { loc, scale } => loc.is_finite() && scale > 0.0,
            Self::Normal { mean, sd, lo, hi } => {
                mean.is_finite()
                    && sd > 0.0
                    && match (lo, hi) {
                        (Some(a), Some(b)) => a < b,
                        _ => true,
                    }
            }
            Self::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid nominal distribution {self:?}")))
        }
    }

    /// Standardized truncation bounds as CDF values.
    fn normal_mass(mean: f64, sd: f64, lo: Option<f64>, hi: Option<f64>) -> (f64, f64) {
        let n = std_normal();
        let a = lo.map_or(0.0, |v| n.cdf((v - mean) / sd));
        let b = hi.map_or(1.0, |v| n.cdf((v - mean) / sd));
        (a, b)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Gumbel { loc, scale } => (-(-(x - loc) / scale).exp()).exp(),
            Self::Normal { mean, sd, lo, hi } => {
                let (a, b) = Self::normal_mass(mean, sd, lo, hi);
                let f = std_normal().cdf((x - mean) / sd);
                ((f - a) / (b - a)).clamp(0.0, 1.0)
            }
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    /// Quantile function on `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Gumbel { loc, scale } => loc - scale * (-u.ln()).ln(),
            Self::Normal { mean, sd, lo, hi } => {
                let (a, b) = Self::normal_mass(mean, sd, lo, hi);
                let x = mean + sd * std_normal().inverse_cdf(a + u * (b - a));
                match (lo, hi) {
                    (Some(l), _) if x < l => l,
                    (_, Some(h)) if x > h => h,
                    _ => x,
                }
            }
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
        }
    }

    /// Extreme-measure stand-in: the uniform law exactly, otherwise the
    /// Gauss–Legendre rule of `order` nodes in probability space.
    pub fn discretize(&self, order: usize) -> ExtremeMeasure {
        if let Self::Uniform { lo, hi } = *self {
            return ExtremeMeasure::uniform(lo, [(1.0, hi)]).expect("unit weight");
        }
        let rule = gauss_legendre(order);
        let atoms: Vec<(f64, f64)> = rule
            .unit_mass_on(0.0, 1.0)
            .map(|(u, w)| (w, self.quantile(u)))
            .collect();
        ExtremeMeasure::dirac(atoms).expect("quadrature weights sum to one")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gumbel_quantile_inverts_cdf() {
        let g = Nominal::Gumbel {
            loc: 626.0,
            scale: 190.0,
        };
        for u in [0.01, 0.3, 0.5, 0.95, 0.999] {
            assert!((g.cdf(g.quantile(u)) - u).abs() < 1e-12);
        }
        assert!((g.cdf(626.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn truncated_normal_stays_inside() {
        let n = Nominal::Normal {
            mean: 30.0,
            sd: 7.5,
            lo: Some(12.55),
            hi: Some(47.45),
        };
        assert!((n.quantile(0.5) - 30.0).abs() < 1e-9);
        assert!(n.quantile(1e-12) >= 12.55);
        assert!(n.quantile(1.0 - 1e-12) <= 47.45);
        assert!((n.cdf(n.quantile(0.2)) - 0.2).abs() < 1e-9);
    }

    #[test]
    fn discretization_moments() {
        let u = Nominal::Uniform { lo: 49.0, hi: 51.0 }.discretize(64);
        assert!((u.mean() - 50.0).abs() < 1e-12);
        let g = Nominal::Gumbel {
            loc: 626.0,
            scale: 190.0,
        }
        .discretize(200);
        let euler = 0.577_215_664_901_532_9;
        assert!((g.mean() - (626.0 + 190.0 * euler)).abs() < 0.5);
    }
}
