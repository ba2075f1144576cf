//! Robust bounds on quantities of interest of a black-box model whose
//! independent inputs are only known to lie in moment classes or unimodal
//! moment classes.
//!
//! Optimization runs over finite mixtures of Dirac masses or of
//! mode-anchored uniforms, which is where the extremes are attained.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod case_study;
pub mod cdf;
pub mod error;
pub mod expr;
pub mod measure;
pub mod models;
pub mod nominal;
pub mod optim;
pub mod oracle;
pub mod param;
pub mod problem;
pub mod qoi;
pub mod quadrature;

pub use error::{Error, ModelError, Result};
pub use measure::{
    product_sample, Constraint, ConstraintKind, ExtremeMeasure, Interval, MarginalClass, ProductMeasure, Relation,
    ScalarFn,
};
