//! Problem files: JSON descriptions of classes, model, QoI and optimizer settings.
//!
//! ```json
//! {
//!   "inputs": [
//!     {"name": "a", "support": [0, 1], "mode": null,
//!      "constraints": [{"kind": "raw_moment", "order": 1, "relation": "eq", "bound": 0.5}],
//!      "nominal": {"kind": "uniform", "lo": 0, "hi": 1}}
//!   ],
//!   "joint_constraints": [{"expr": "y", "relation": "leq", "bound": 0.7}],
//!   "model": {"kind": "expr", "expr": "a^2"},
//!   "qoi": {"kind": "failure_prob", "params": {"h": 0.2}, "direction": "inf"},
//!   "optimizer": {"seed": 3}
//! }
//! ```
//!
//! Sobol indices in `qoi.params.index` are one-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::measure::{Constraint, Interval, MarginalClass, ProductMeasure, Relation, ScalarFn};
use crate::models::{ConditionalFailure, ModelSpec, Threshold};
use crate::nominal::Nominal;
use crate::optim::{DeConfig, JointConstraint, Problem};
use crate::qoi::{failure_probability_qoi, Direction, EvalSettings, OutputFn, QoiKind, QoiSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintFn {
    RawMoment {
        order: u32,
    },
    /// Expression in `x`.
    Expr {
        expr: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    #[serde(flatten)]
    pub function: ConstraintFn,
    pub relation: Relation,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub name: String,
    pub support: [f64; 2],
    #[serde(default)]
    pub mode: Option<f64>,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    /// Reference law, needed by Sobol bounds and Monte Carlo checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal: Option<Nominal>,
}

/// `E[expr] relation bound`; `expr` may use `y`, `x1..xd` and the input names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub expr: String,
    pub relation: Relation,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum QoiParams {
    /// `E[expr]` with the variables of [`JointSpec`].
    Expectation {
        expr: String,
    },
    FailureProb {
        h: f64,
    },
    LowerQuantile {
        p: f64,
    },
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
    /// Posterior `P(H <= h)` for inputs `(ρ, β, Ks, Zv, Zm)` and a Gumbel flow record.
    BayesFailureProb {
        h: f64,
        data: Vec<f64>,
        #[serde(default)]
        threshold: Threshold,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QoiFile {
    #[serde(flatten)]
    pub params: QoiParams,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub inputs: Vec<InputSpec>,
    #[serde(default)]
    pub joint_constraints: Vec<JointSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    pub qoi: QoiFile,
    #[serde(default)]
    pub optimizer: DeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<EvalSettings>,
}

/// A parsed problem ready to run.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub problem: Problem,
    pub optimizer: DeConfig,
    /// Product of the nominal laws when every input declares one.
    pub nominal: Option<ProductMeasure>,
}

impl ProblemFile {
    /// Parses JSON; syntax and type errors carry their line and column.
    pub fn parse(src: &str) -> Result<Self> {
        serde_json::from_str(src).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }

    pub fn names(&self) -> Vec<String> {
        self.inputs.iter().map(|i| i.name.clone()).collect()
    }

    pub fn load(&self) -> Result<Loaded> {
        let names = self.names();
        let classes = self
            .inputs
            .iter()
            .enumerate()
            .map(|(k, input)| input.class().map_err(|e| at(&format!("inputs[{k}]"), e)))
            .collect::<Result<Vec<_>>>()?;
        let joint = self
            .joint_constraints
            .iter()
            .enumerate()
            .map(|(k, j)| {
                let f = output_fn(&j.expr, &names).map_err(|e| at(&format!("joint_constraints[{k}]"), e))?;
                Ok(JointConstraint::new(f, j.relation, j.bound))
            })
            .collect::<Result<Vec<_>>>()?;
        let model = match &self.model {
            Some(spec) => Some(spec.build(&names).map_err(|e| at("model", e))?),
            None => None,
        };
        let kind = self.qoi.params.kind(&names).map_err(|e| at("qoi", e))?;
        kind.validate(names.len()).map_err(|e| at("qoi", e))?;
        let qoi = QoiSpec::new(kind, self.qoi.direction).map_err(|e| at("qoi", e))?;
        let mut problem = Problem::new(names, classes, joint, model, qoi)?;
        if let Some(s) = self.settings {
            problem = problem.with_settings(s);
        }
        self.optimizer.validate().map_err(|e| at("optimizer", e))?;
        let nominal = self.nominal(problem.settings.nominal_order)?;
        Ok(Loaded {
            problem,
            optimizer: self.optimizer,
            nominal,
        })
    }

    fn nominal(&self, order: usize) -> Result<Option<ProductMeasure>> {
        let mut marginals = Vec::with_capacity(self.inputs.len());
        for (k, input) in self.inputs.iter().enumerate() {
            let Some(n) = input.nominal else { return Ok(None) };
            n.validate().map_err(|e| at(&format!("inputs[{k}].nominal"), e))?;
            marginals.push(n.discretize(order));
        }
        Ok(Some(ProductMeasure::new(marginals)))
    }
}

impl InputSpec {
    pub fn class(&self) -> Result<MarginalClass> {
        let support = Interval::new(self.support[0], self.support[1])?;
        let constraints = self
            .constraints
            .iter()
            .enumerate()
            .map(|(c, spec)| spec.build().map_err(|e| at(&format!("constraints[{c}]"), e)))
            .collect::<Result<Vec<_>>>()?;
        MarginalClass::new(support, constraints, self.mode)
    }
}

impl ConstraintSpec {
    pub fn build(&self) -> Result<Constraint> {
        match &self.function {
            ConstraintFn::RawMoment { order } => Constraint::raw_moment(*order, self.relation, self.bound),
            ConstraintFn::Expr { expr } => {
                let e = Expr::parse_unary(expr)?;
                Ok(Constraint::generalized(
                    ScalarFn::new(expr.clone(), move |x| e.eval(&[x])),
                    self.relation,
                    self.bound,
                ))
            }
        }
    }
}

impl QoiParams {
    pub fn kind(&self, names: &[String]) -> Result<QoiKind> {
        let index = |i: usize| {
            i.checked_sub(1)
                .ok_or_else(|| Error::Config("Sobol indices are one-based".into()))
        };
        Ok(match self {
            Self::Expectation { expr } => QoiKind::Expectation(output_fn(expr, names)?),
            Self::FailureProb { h } => QoiKind::FailureProb { h: *h },
            Self::LowerQuantile { p } => QoiKind::LowerQuantile { p: *p },
            Self::UpperQuantile { p } => QoiKind::UpperQuantile { p: *p },
            Self::Variance => QoiKind::Variance,
            Self::SobolFirst { index: i } => QoiKind::SobolFirst { index: index(*i)? },
            Self::SobolTotal { index: i } => QoiKind::SobolTotal { index: index(*i)? },
            Self::BayesFailureProb { h, data, threshold } => {
                if names.len() != 5 {
                    return Err(Error::Config(format!(
                        "posterior failure probability takes (rho, beta, Ks, Zv, Zm), got {} inputs",
                        names.len()
                    )));
                }
                if data.is_empty() {
                    return Err(Error::Config("empty flow record".into()));
                }
                let cf = ConditionalFailure {
                    threshold: *threshold,
                    printed_form: false,
                };
                QoiKind::Bayes(failure_probability_qoi(data.clone(), *h, cf))
            }
        })
    }
}

/// `q(y, x)` from an expression over `y`, `x1..xd` and the input names.
pub fn output_fn(src: &str, names: &[String]) -> Result<OutputFn> {
    let d = names.len();
    let mut vars: Vec<String> = vec!["y".into()];
    vars.extend((1..=d).map(|k| format!("x{k}")));
    vars.extend(names.iter().cloned());
    let refs: Vec<&str> = vars.iter().map(String::as_str).collect();
    let e = Expr::parse(src, &refs)?;
    Ok(OutputFn::new(src, move |y, x| {
        let mut args = Vec::with_capacity(2 * x.len() + 1);
        args.push(y);
        args.extend_from_slice(x);
        args.extend_from_slice(x);
        e.eval(&args)
    }))
}

fn at(path: &str, e: Error) -> Error {
    match e {
        Error::Problem(m) => Error::Problem(format!("{path}.{m}")),
        e @ (Error::Model(_) | Error::Parse { .. }) => e,
        e => Error::Problem(format!("{path}: {e}")),
    }
}

/// The bundled hydraulic problem with the given QoI.
pub fn case_study_file(qoi: QoiFile) -> ProblemFile {
    let input = |name: &str, lo: f64, hi: f64, mean: f64, second: Option<f64>, mode: Option<f64>, nominal: Nominal| {
        let mut constraints = vec![ConstraintSpec {
            function: ConstraintFn::RawMoment { order: 1 },
            relation: Relation::Eq,
            bound: mean,
        }];
        if let Some(m2) = second {
            constraints.push(ConstraintSpec {
                function: ConstraintFn::RawMoment { order: 2 },
                relation: Relation::Eq,
                bound: m2,
            });
        }
        InputSpec {
            name: name.into(),
            support: [lo, hi],
            mode,
            constraints,
            nominal: Some(nominal),
        }
    };
    let n = crate::case_study::nominals();
    ProblemFile {
        inputs: vec![
            input("J", 160.0, 3580.0, 736.0, Some(602_043.0), None, n[0]),
            input("Ks", 12.55, 47.45, 30.0, Some(949.0), Some(30.0), n[1]),
            input("Zv", 49.0, 51.0, 50.0, None, None, n[2]),
            input("Zm", 54.0, 55.0, 54.5, None, None, n[3]),
        ],
        joint_constraints: vec![],
        model: Some(ModelSpec::HydraulicHeight),
        qoi,
        optimizer: DeConfig::default(),
        settings: None,
    }
}
