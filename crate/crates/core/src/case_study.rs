//! The river flood study: moment classes, reference laws and prior classes.

use std::sync::Arc;

use crate::error::Result;
use crate::measure::{Constraint, ExtremeMeasure, Interval, MarginalClass, ProductMeasure, Relation};
use crate::models::{ConditionalFailure, Hydraulic, Model, Threshold};
use crate::nominal::Nominal;
use crate::optim::Problem;
use crate::qoi::{synthetic_gumbel_sample, Direction, QoiKind, QoiSpec};

pub const NAMES: [&str; 4] = ["J", "Ks", "Zv", "Zm"];

/// Maximum-likelihood Gumbel location of the flow record.
pub const RHO_MLE: f64 = 626.14;
pub const BETA_MLE: f64 = 190.0;
/// Size of the flow record.
pub const RECORD_LEN: usize = 47;

fn moments(lo: f64, hi: f64, mean: f64, second: Option<f64>, mode: Option<f64>) -> MarginalClass {
    let mut cs = vec![Constraint::raw_moment(1, Relation::Eq, mean).expect("order 1")];
    if let Some(m2) = second {
        cs.push(Constraint::raw_moment(2, Relation::Eq, m2).expect("order 2"));
    }
    MarginalClass::new(Interval::new(lo, hi).expect("ordered bounds"), cs, mode).expect("valid class")
}

/// Classes of `J`, `Ks`, `Zv`, `Zm`; `Ks` is unimodal about 30.
pub fn classes() -> Vec<MarginalClass> {
    vec![
        moments(160.0, 3580.0, 736.0, Some(602_043.0), None),
        moments(12.55, 47.45, 30.0, Some(949.0), Some(30.0)),
        moments(49.0, 51.0, 50.0, None, None),
        moments(54.0, 55.0, 54.5, None, None),
    ]
}

/// Reference laws of the inputs; `Ks` is truncated to its class support.
pub fn nominals() -> Vec<Nominal> {
    vec![
        Nominal::Gumbel {
            loc: 626.0,
            scale: 190.0,
        },
        Nominal::Normal {
            mean: 30.0,
            sd: 7.5,
            lo: Some(12.55),
            hi: Some(47.45),
        },
        Nominal::Uniform { lo: 49.0, hi: 51.0 },
        Nominal::Uniform { lo: 54.0, hi: 55.0 },
    ]
}

pub fn nominal_measure(order: usize) -> ProductMeasure {
    ProductMeasure::new(nominals().iter().map(|n| n.discretize(order)).collect())
}

pub fn model() -> Arc<dyn Model> {
    Arc::new(Hydraulic::Height)
}

/// The study with the given QoI on the water height.
pub fn problem(qoi: QoiSpec) -> Result<Problem> {
    Problem::new(NAMES.map(String::from).to_vec(), classes(), vec![], Some(model()), qoi)
}

/// `sup` of the lower `p`-quantile of the height.
pub fn quantile_problem(p: f64) -> Result<Problem> {
    problem(QoiSpec::new(QoiKind::LowerQuantile { p }, Direction::Sup)?)
}

/// Prior classes for `(ρ, β, Ks, Zv, Zm)`.
pub fn prior_classes() -> Vec<MarginalClass> {
    let c = classes();
    vec![
        moments(550.0, 700.0, RHO_MLE, None, None),
        moments(150.0, 250.0, BETA_MLE, None, None),
        c[1].clone(),
        c[2].clone(),
        c[3].clone(),
    ]
}

/// Point prior at the maximum-likelihood parameters with nominal hydraulic inputs.
pub fn mle_prior(order: usize) -> ProductMeasure {
    let n = nominal_measure(order);
    ProductMeasure::new(vec![
        ExtremeMeasure::point(RHO_MLE),
        ExtremeMeasure::point(BETA_MLE),
        n.marginals[1].clone(),
        n.marginals[2].clone(),
        n.marginals[3].clone(),
    ])
}

/// Stand-in flow record drawn from the fitted Gumbel law.
pub fn synthetic_flows(seed: u64) -> Vec<f64> {
    synthetic_gumbel_sample(RECORD_LEN, RHO_MLE, BETA_MLE, seed)
}

/// Conditional failure probability on the height scale, matching [`Hydraulic::Height`].
pub fn conditional() -> ConditionalFailure {
    ConditionalFailure {
        threshold: Threshold::Height,
        printed_form: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_laws_are_close_to_their_classes() {
        let n = nominal_measure(64);
        let c = classes();
        assert!((n.marginals[0].mean() - 736.0).abs() < 1.0);
        assert!((n.marginals[1].mean() - 30.0).abs() < 1e-9);
        for (class, m) in c.iter().zip(&n.marginals).skip(2) {
            assert!(class.is_feasible(m).unwrap());
        }
        assert_eq!(c.iter().map(|c| c.atom_budget()).collect::<Vec<_>>(), vec![3, 3, 2, 2]);
    }

    #[test]
    fn flows_are_reproducible() {
        assert_eq!(synthetic_flows(1), synthetic_flows(1));
        assert_eq!(synthetic_flows(1).len(), 47);
    }
}
