//! Quantities of interest of the model output and their evaluation on product measures.

pub mod bayes;
pub mod output;
pub mod sobol;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::ProductMeasure;
use crate::models::Model;

pub use bayes::{
    bayesian_failure_probability, failure_probability_qoi, gumbel_log_likelihood, posterior_pushforward,
    synthetic_gumbel_sample, BayesQoi, PosteriorPredictive,
};
pub use output::{pushforward, EvalSettings, Grid, OutputDistribution};
pub use sobol::{sobol_first, sobol_indices, sobol_total, ConditionalTable};

type Integrand = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// `q(y, x)`: integrand of an expectation QoI given the output `y` and the inputs `x`.
#[derive(Clone)]
pub struct OutputFn {
    label: String,
    f: Integrand,
}

impl OutputFn {
    pub fn new(label: impl Into<String>, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    /// `q(y) = y`.
    pub fn identity() -> Self {
        Self::new("y", |y, _| y)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn call(&self, y: f64, x: &[f64]) -> f64 {
        (self.f)(y, x)
    }
}

impl fmt::Debug for OutputFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OutputFn({})", self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Sup,
    Inf,
}

impl Direction {
    /// `+1` for `Sup`, `-1` for `Inf`.
    pub fn sign(self) -> f64 {
        match self {
            Self::Sup => 1.0,
            Self::Inf => -1.0,
        }
    }

    /// Whether `a` improves on `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Self::Sup => a > b,
            Self::Inf => a < b,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sup => "sup",
            Self::Inf => "inf",
        })
    }
}

/// Functional of the law of the inputs and output. Input indices are zero-based.
#[derive(Debug, Clone)]
pub enum QoiKind {
    Expectation(OutputFn),
    /// `P(Y <= h)`.
    FailureProb {
        h: f64,
    },
    /// `inf { y : F(y) >= p }`.
    LowerQuantile {
        p: f64,
    },
    /// `inf { y : F(y) > p }`.
    UpperQuantile {
        p: f64,
    },
    Variance,
    SobolFirst {
        index: usize,
    },
    SobolTotal {
        index: usize,
    },
    /// Posterior functional of a prior over the inputs; the model is not used.
    Bayes(BayesQoi),
}

impl QoiKind {
    pub fn label(&self) -> String {
        match self {
            Self::Expectation(q) => format!("E[{}]", q.label()),
            Self::FailureProb { h } => format!("P(Y <= {h})"),
            Self::LowerQuantile { p } => format!("lower quantile {p}"),
            Self::UpperQuantile { p } => format!("upper quantile {p}"),
            Self::Variance => "Var[Y]".into(),
            Self::SobolFirst { index } => format!("S_{}", index + 1),
            Self::SobolTotal { index } => format!("S_T{}", index + 1),
            Self::Bayes(b) => b.label.clone(),
        }
    }

    pub fn validate(&self, dims: usize) -> Result<()> {
        match self {
            Self::LowerQuantile { p } | Self::UpperQuantile { p } if !(*p > 0.0 && *p < 1.0) => {
                Err(Error::Config(format!("quantile level {p} is outside (0, 1)")))
            }
            Self::FailureProb { h } if !h.is_finite() => Err(Error::Config("threshold must be finite".into())),
            Self::SobolFirst { index } | Self::SobolTotal { index } if *index >= dims => {
                Err(Error::Config(format!("Sobol index {} of {dims} inputs", index + 1)))
            }
            Self::Bayes(b) if b.likelihood_inputs.iter().any(|&j| j >= dims) => {
                Err(Error::Config("likelihood input out of range".into()))
            }
            _ => Ok(()),
        }
    }

    /// Rejects directions in which extreme points need not attain the bound.
    pub fn check_direction(&self, direction: Direction) -> Result<()> {
        match (self, direction) {
            (Self::LowerQuantile { .. }, Direction::Inf) => Err(Error::DirectionMismatch(
                "the lower quantile is quasi-convex and lower semicontinuous, so only its supremum \
                 is attained on extreme points; use the upper quantile for an infimum"
                    .into(),
            )),
            (Self::UpperQuantile { .. }, Direction::Sup) => Err(Error::DirectionMismatch(
                "the upper quantile is quasi-concave and upper semicontinuous, so only its infimum \
                 is attained on extreme points; use the lower quantile for a supremum"
                    .into(),
            )),
            _ => Ok(()),
        }
    }

    /// Value of the QoI at `pm`.
    pub fn evaluate(&self, pm: &ProductMeasure, model: &dyn Model, settings: &EvalSettings) -> Result<f64> {
        match self {
            Self::Expectation(q) => expectation_qoi(pm, model, q, settings),
            Self::FailureProb { h } => failure_probability(pm, model, *h, settings),
            Self::LowerQuantile { p } => lower_quantile(pm, model, *p, settings),
            Self::UpperQuantile { p } => upper_quantile(pm, model, *p, settings),
            Self::Variance => variance_qoi(pm, model, settings),
            Self::SobolFirst { index } => sobol_first(pm, model, *index, settings),
            Self::SobolTotal { index } => sobol_total(pm, model, *index, settings),
            Self::Bayes(b) => b.evaluate(pm, settings.quadrature_order),
        }
    }

    /// Whether the QoI is an expectation, so that mixtures evaluate to mixtures.
    pub fn is_affine(&self) -> bool {
        matches!(self, Self::Expectation(_) | Self::FailureProb { .. })
    }
}

/// A QoI together with the direction to bound it in.
#[derive(Debug, Clone)]
pub struct QoiSpec {
    pub kind: QoiKind,
    pub direction: Direction,
}

impl QoiSpec {
    pub fn new(kind: QoiKind, direction: Direction) -> Result<Self> {
        kind.check_direction(direction)?;
        Ok(Self { kind, direction })
    }

    pub fn label(&self) -> String {
        format!("{} {}", self.direction, self.kind.label())
    }
}

/// `E[q(G(X), X)]` on the tensor grid of `pm`.
pub fn expectation_qoi(pm: &ProductMeasure, model: &dyn Model, q: &OutputFn, settings: &EvalSettings) -> Result<f64> {
    let grid = Grid::of(pm, settings.quadrature_order);
    let mut acc = 0.0;
    for k in 0..grid.len() {
        let x = grid.point(k);
        acc += grid.weights[k] * q.call(model.eval(x)?, x);
    }
    Ok(acc)
}

/// `P(G(X) <= h)`.
pub fn failure_probability(pm: &ProductMeasure, model: &dyn Model, h: f64, settings: &EvalSettings) -> Result<f64> {
    Ok(pushforward(pm, model, settings)?.cdf(h))
}

pub fn lower_quantile(pm: &ProductMeasure, model: &dyn Model, p: f64, settings: &EvalSettings) -> Result<f64> {
    Ok(pushforward(pm, model, settings)?.lower_quantile(p))
}

pub fn upper_quantile(pm: &ProductMeasure, model: &dyn Model, p: f64, settings: &EvalSettings) -> Result<f64> {
    Ok(pushforward(pm, model, settings)?.upper_quantile(p))
}

pub fn variance_qoi(pm: &ProductMeasure, model: &dyn Model, settings: &EvalSettings) -> Result<f64> {
    let grid = Grid::of(pm, settings.quadrature_order);
    let ys = grid.values(model)?;
    let m1: f64 = ys.iter().zip(&grid.weights).map(|(y, w)| w * y).sum();
    let var: f64 = ys.iter().zip(&grid.weights).map(|(y, w)| w * (y - m1).powi(2)).sum();
    Ok(var.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ExtremeMeasure;
    use crate::models::ExprModel;

    fn id() -> ExprModel {
        ExprModel::new("x", &["a".to_string()]).unwrap()
    }

    fn pm(atoms: &[(f64, f64)]) -> ProductMeasure {
        ProductMeasure::new(vec![ExtremeMeasure::dirac(atoms.iter().copied()).unwrap()])
    }

    #[test]
    fn quantile_conventions_split_at_atom() {
        let p = pm(&[(0.5, 1.0), (0.5, 2.0)]);
        let s = EvalSettings::default();
        assert_eq!(lower_quantile(&p, &id(), 0.5, &s).unwrap(), 1.0);
        assert_eq!(upper_quantile(&p, &id(), 0.5, &s).unwrap(), 2.0);
    }

    #[test]
    fn expectations() {
        let p = pm(&[(0.25, 1.0), (0.75, 3.0)]);
        let s = EvalSettings::default();
        let one = OutputFn::new("1", |_, _| 1.0);
        assert_eq!(expectation_qoi(&p, &id(), &one, &s).unwrap(), 1.0);
        assert_eq!(failure_probability(&p, &id(), 2.0, &s).unwrap(), 0.25);
        assert_eq!(variance_qoi(&pm(&[(1.0, 4.0)]), &id(), &s).unwrap(), 0.0);
        assert_eq!(variance_qoi(&pm(&[(0.5, 0.0), (0.5, 1.0)]), &id(), &s).unwrap(), 0.25);
    }

    #[test]
    fn direction_mismatch_is_rejected() {
        assert!(matches!(
            QoiSpec::new(QoiKind::LowerQuantile { p: 0.9 }, Direction::Inf),
            Err(Error::DirectionMismatch(_))
        ));
        assert!(matches!(
            QoiSpec::new(QoiKind::UpperQuantile { p: 0.9 }, Direction::Sup),
            Err(Error::DirectionMismatch(_))
        ));
        assert!(QoiSpec::new(QoiKind::Variance, Direction::Inf).is_ok());
    }

    #[test]
    fn invalid_levels() {
        assert!(QoiKind::LowerQuantile { p: 1.0 }.validate(1).is_err());
        assert!(QoiKind::SobolFirst { index: 1 }.validate(1).is_err());
    }
}
