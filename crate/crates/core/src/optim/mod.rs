//! Differential evolution over extreme-point parameterizations and the bounds built on it.

pub mod bayes;
pub mod bound;
pub mod de;
pub mod sobol;

pub use bayes::robust_posterior_quantile;
pub use bound::{
    bound_qoi, bound_qoi_best_of, bound_qoi_with_budgets, cdf_envelope, linearized_variance_bound, BoundResult,
    Envelope, FeasibilityReport, JointConstraint, Problem, OUTER_STEPS,
};
pub use de::{minimize, DeConfig, DeOutcome, Evaluation, Strategy, PENALTY};
pub use sobol::{sobol_first_bound, sobol_total_bound, SobolStrategy};
