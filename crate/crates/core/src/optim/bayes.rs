//! Robust posterior predictive quantile over prior classes for `(ρ, β, Ks, Zv, Zm)`.

use crate::error::{Error, Result};
use crate::measure::MarginalClass;
use crate::models::ConditionalFailure;
use crate::qoi::{
    failure_probability_qoi, gumbel_log_likelihood, Direction, EvalSettings, PosteriorPredictive, QoiKind, QoiSpec,
};

use super::bound::{optimize_over, Assembly, BoundResult, Problem};
use super::de::DeConfig;

/// `sup` over priors in `classes` of the lower `p`-quantile of the posterior predictive law of `H`.
///
/// The posterior predictive CDF at each `h` is a ratio of two expectations of
/// the prior, so its infimum and hence the supremum of the quantile are attained
/// on extreme points.
pub fn robust_posterior_quantile(
    classes: Vec<MarginalClass>,
    data: Vec<f64>,
    conditional: ConditionalFailure,
    p: f64,
    settings: EvalSettings,
    config: &DeConfig,
) -> Result<BoundResult> {
    if classes.len() != 5 {
        return Err(Error::Config("priors are needed for (rho, beta, Ks, Zv, Zm)".into()));
    }
    if data.is_empty() {
        return Err(Error::Config("no observations".into()));
    }
    let names = ["rho", "beta", "Ks", "Zv", "Zm"].map(String::from).to_vec();
    let qoi = QoiSpec::new(
        QoiKind::Bayes(failure_probability_qoi(data.clone(), 0.0, conditional)),
        Direction::Sup,
    )?;
    let problem = Problem::new(names, classes, vec![], None, qoi)?.with_settings(settings);
    let ll = gumbel_log_likelihood(data);
    let asm = Assembly::new(&problem)?;
    optimize_over(
        asm.dims(),
        |t| asm.decode(t),
        |pm| PosteriorPredictive::new(pm, &ll, conditional, settings.quadrature_order)?.lower_quantile(p),
        |pm| problem.feasibility(pm),
        Direction::Sup,
        format!("sup posterior predictive lower quantile {p}"),
        config,
    )
}
