//! Bounds of QoIs over products of moment classes, searched on extreme points.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{ExtremeMeasure, MarginalClass, ProductMeasure, Relation, FEASIBILITY_TOL};
use crate::models::Model;
use crate::param::{ExtraRows, LayoutKind, MarginalLayout};
use crate::qoi::{Direction, EvalSettings, OutputFn, QoiKind, QoiSpec};

use super::de::{minimize, DeConfig, DeOutcome, Evaluation};

/// `E[f(G(X), X)] (= or <=) bound` over the joint law.
#[derive(Debug, Clone)]
pub struct JointConstraint {
    pub f: OutputFn,
    pub relation: Relation,
    pub bound: f64,
}

impl JointConstraint {
    pub fn new(f: OutputFn, relation: Relation, bound: f64) -> Self {
        Self { f, relation, bound }
    }

    pub fn label(&self) -> String {
        let op = match self.relation {
            Relation::Eq => "=",
            Relation::Leq => "<=",
        };
        format!("E[{}] {op} {}", self.f.label(), self.bound)
    }

    fn scale(&self) -> f64 {
        self.bound.abs().max(1.0)
    }

    pub fn expectation(&self, pm: &ProductMeasure, model: &dyn Model, order: usize) -> Result<f64> {
        crate::qoi::expectation_qoi(
            pm,
            model,
            &self.f,
            &EvalSettings {
                quadrature_order: order,
                ..Default::default()
            },
        )
    }

    /// `E - bound` for `Leq`, `|E - bound|` for `Eq`.
    pub fn residual(&self, pm: &ProductMeasure, model: &dyn Model, order: usize) -> Result<f64> {
        let e = self.expectation(pm, model, order)?;
        Ok(match self.relation {
            Relation::Leq => e - self.bound,
            Relation::Eq => (e - self.bound).abs(),
        })
    }
}

/// Marginal classes, a model and the QoI to bound.
#[derive(Clone)]
pub struct Problem {
    pub names: Vec<String>,
    pub classes: Vec<MarginalClass>,
    pub joint: Vec<JointConstraint>,
    /// Absent only for posterior QoIs, which do not use a model.
    pub model: Option<Arc<dyn Model>>,
    pub qoi: QoiSpec,
    pub settings: EvalSettings,
    /// Marginal whose weights absorb joint equality constraints.
    pub repair: usize,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("names", &self.names)
            .field("classes", &self.classes)
            .field("joint", &self.joint)
            .field("qoi", &self.qoi)
            .field("settings", &self.settings)
            .field("repair", &self.repair)
            .finish()
    }
}

impl Problem {
    /// Sets each class's joint budget to the number of joint constraints.
    pub fn new(
        names: Vec<String>,
        classes: Vec<MarginalClass>,
        joint: Vec<JointConstraint>,
        model: Option<Arc<dyn Model>>,
        qoi: QoiSpec,
    ) -> Result<Self> {
        if names.len() != classes.len() {
            return Err(Error::Problem(format!(
                "{} names for {} inputs",
                names.len(),
                classes.len()
            )));
        }
        if classes.is_empty() {
            return Err(Error::Problem("no inputs".into()));
        }
        if let Some(m) = &model {
            if m.dims() != classes.len() {
                return Err(Error::Problem(format!(
                    "model takes {} inputs but {} are declared",
                    m.dims(),
                    classes.len()
                )));
            }
        }
        qoi.kind.validate(classes.len())?;
        qoi.kind.check_direction(qoi.direction)?;
        let n = joint.len();
        let classes = classes.into_iter().map(|c| c.with_joint_budget(n)).collect();
        Ok(Self {
            names,
            classes,
            joint,
            model,
            qoi,
            settings: EvalSettings::default(),
            repair: 0,
        })
    }

    pub fn with_settings(mut self, settings: EvalSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn with_qoi(&self, qoi: QoiSpec) -> Result<Self> {
        qoi.kind.validate(self.classes.len())?;
        qoi.kind.check_direction(qoi.direction)?;
        Ok(Self { qoi, ..self.clone() })
    }

    pub fn dims(&self) -> usize {
        self.classes.len()
    }

    pub fn model(&self) -> Result<&dyn Model> {
        self.model
            .as_deref()
            .ok_or_else(|| Error::Problem("this QoI needs a model".into()))
    }

    pub fn evaluate(&self, pm: &ProductMeasure) -> Result<f64> {
        match &self.qoi.kind {
            QoiKind::Bayes(b) => b.evaluate(pm, self.settings.quadrature_order),
            kind => kind.evaluate(pm, self.model()?, &self.settings),
        }
    }

    fn has_joint_eq(&self) -> bool {
        self.joint.iter().any(|j| j.relation == Relation::Eq)
    }

    pub fn layouts(&self) -> Result<Vec<MarginalLayout>> {
        self.classes
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut kind = MarginalLayout::preferred_kind(c);
                if i == self.repair && self.has_joint_eq() && kind == LayoutKind::CanonicalDirac {
                    kind = LayoutKind::DirectDirac;
                }
                MarginalLayout::with_budget(c, kind, c.atom_budget())
            })
            .collect()
    }

    /// Per-marginal residuals, joint residuals and the largest scaled violation.
    pub fn feasibility(&self, pm: &ProductMeasure) -> Result<FeasibilityReport> {
        let mut worst: f64 = 0.0;
        let mut marginal_residuals = Vec::with_capacity(self.dims());
        for (c, m) in self.classes.iter().zip(&pm.marginals) {
            marginal_residuals.push(c.residuals(m)?);
            worst = worst.max(c.violation(m)?);
            if !m.lies_in(&c.support) {
                worst = worst.max(1.0);
            }
        }
        let joint_residuals = self.joint_residuals(pm)?;
        for (j, r) in self.joint.iter().zip(&joint_residuals) {
            let v = r / j.scale();
            if v > FEASIBILITY_TOL {
                worst = worst.max(v);
            }
        }
        Ok(FeasibilityReport {
            marginal_residuals,
            joint_residuals,
            max_violation: worst,
        })
    }

    fn joint_residuals(&self, pm: &ProductMeasure) -> Result<Vec<f64>> {
        if self.joint.is_empty() {
            return Ok(vec![]);
        }
        let model = self.model()?;
        self.joint
            .iter()
            .map(|j| j.residual(pm, model, self.settings.quadrature_order))
            .collect()
    }

    fn joint_violation(&self, pm: &ProductMeasure) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (j, r) in self.joint.iter().zip(self.joint_residuals(pm)?) {
            let v = r / j.scale();
            if v > FEASIBILITY_TOL {
                worst = worst.max(v);
            }
        }
        Ok(worst)
    }
}

/// Residuals of a measure against its problem's constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// One row per input, one residual per class constraint.
    pub marginal_residuals: Vec<Vec<f64>>,
    pub joint_residuals: Vec<f64>,
    /// Largest scaled violation above tolerance; zero when feasible.
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub qoi: String,
    pub direction: Direction,
    pub value: f64,
    pub argmax: ProductMeasure,
    /// Best objective value after each generation.
    pub trace: Vec<(usize, f64)>,
    pub feasibility: FeasibilityReport,
    pub seed: u64,
}

/// Decoder from the concatenated hypercube to product measures.
pub(crate) struct Assembly<'p> {
    problem: &'p Problem,
    layouts: Vec<MarginalLayout>,
}

impl<'p> Assembly<'p> {
    pub(crate) fn new(problem: &'p Problem) -> Result<Self> {
        Ok(Self {
            problem,
            layouts: problem.layouts()?,
        })
    }

    pub(crate) fn with_layouts(problem: &'p Problem, layouts: Vec<MarginalLayout>) -> Self {
        Self { problem, layouts }
    }

    pub(crate) fn dims(&self) -> usize {
        self.layouts.iter().map(|l| l.dims).sum()
    }

    /// Product measure and violation; joint equalities are met by reweighting the repair marginal.
    pub(crate) fn decode(&self, theta: &[f64]) -> Result<(ProductMeasure, f64)> {
        let p = self.problem;
        let mut parts = Vec::with_capacity(self.layouts.len());
        let mut at = 0;
        for l in &self.layouts {
            parts.push(&theta[at..at + l.dims]);
            at += l.dims;
        }
        let mut marginals = Vec::with_capacity(self.layouts.len());
        let mut violation: f64 = 0.0;
        let repair = p.has_joint_eq().then_some(p.repair);
        for (i, (l, t)) in self.layouts.iter().zip(&parts).enumerate() {
            if Some(i) == repair {
                marginals.push(ExtremeMeasure::point(l.class.support.lo));
                continue;
            }
            let d = l.decode(t)?;
            violation = violation.max(d.violation);
            marginals.push(d.measure);
        }
        if let Some(r) = repair {
            let model = p.model()?;
            let order = p.settings.quadrature_order;
            let base = ProductMeasure::new(marginals.clone());
            let rows = |template: &ExtremeMeasure| -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
                let n = template.n_components();
                let mut rows = Vec::new();
                let mut rhs = Vec::new();
                for j in p.joint.iter().filter(|j| j.relation == Relation::Eq) {
                    let mut row = Vec::with_capacity(n);
                    for k in 0..n {
                        let mut unit = vec![0.0; n];
                        unit[k] = 1.0;
                        let pm = base.with_marginal(r, template.with_weights(&unit)?);
                        row.push(j.expectation(&pm, model, order)?);
                    }
                    rows.push(row);
                    rhs.push(j.bound);
                }
                Ok((rows, rhs))
            };
            let extra: &ExtraRows<'_> = &rows;
            let d = self.layouts[r].decode_with(parts[r], Some(extra))?;
            violation = violation.max(d.violation);
            marginals[r] = d.measure;
        }
        let pm = ProductMeasure::new(marginals);
        if !p.joint.is_empty() {
            violation = violation.max(p.joint_violation(&pm)?);
        }
        Ok((pm, violation))
    }
}

/// Runs DE for `direction` of `value` over a decoder and packages the result.
pub(crate) fn optimize_over<D, F, R>(
    dims: usize,
    decode: D,
    value: F,
    report: R,
    direction: Direction,
    label: String,
    config: &DeConfig,
) -> Result<BoundResult>
where
    D: Fn(&[f64]) -> Result<(ProductMeasure, f64)> + Sync,
    F: Fn(&ProductMeasure) -> Result<f64> + Sync,
    R: Fn(&ProductMeasure) -> Result<FeasibilityReport>,
{
    let sign = -direction.sign();
    let objective = |theta: &[f64]| -> Result<Evaluation> {
        let (pm, violation) = decode(theta)?;
        if violation > 0.0 {
            return Ok(Evaluation { value: 0.0, violation });
        }
        match value(&pm) {
            Ok(v) => Ok(Evaluation::feasible(sign * v)),
            Err(Error::UndefinedIndex(_)) => Ok(Evaluation {
                value: 0.0,
                violation: 1.0,
            }),
            Err(e) => Err(e),
        }
    };
    let out: DeOutcome = minimize(objective, dims, config)?;
    if out.violation > 0.0 {
        return Err(Error::InfeasibleClass(format!(
            "no feasible point found, smallest violation {:.3e}",
            out.violation
        )));
    }
    let (argmax, _) = decode(&out.theta)?;
    let feasibility = report(&argmax)?;
    Ok(BoundResult {
        qoi: label,
        direction,
        value: sign * out.value,
        argmax,
        trace: out.trace.into_iter().map(|(g, s)| (g, sign * s)).collect(),
        feasibility,
        seed: config.seed,
    })
}

/// Sup or inf of the problem's QoI over the product of extreme-point sets.
pub fn bound_qoi(problem: &Problem, config: &DeConfig) -> Result<BoundResult> {
    let asm = Assembly::new(problem)?;
    optimize_over(
        asm.dims(),
        |t| asm.decode(t),
        |pm| problem.evaluate(pm),
        |pm| problem.feasibility(pm),
        problem.qoi.direction,
        problem.qoi.label(),
        config,
    )
}

/// [`bound_qoi`] with explicit atom budgets per input instead of `N_i + N + 1`.
pub fn bound_qoi_with_budgets(problem: &Problem, budgets: &[usize], config: &DeConfig) -> Result<BoundResult> {
    if budgets.len() != problem.dims() {
        return Err(Error::Config(format!(
            "{} budgets for {} inputs",
            budgets.len(),
            problem.dims()
        )));
    }
    let layouts = problem
        .layouts()?
        .into_iter()
        .zip(budgets)
        .map(|(l, &b)| MarginalLayout::with_budget(&l.class, l.kind, b))
        .collect::<Result<Vec<_>>>()?;
    let asm = Assembly::with_layouts(problem, layouts);
    optimize_over(
        asm.dims(),
        |t| asm.decode(t),
        |pm| problem.evaluate(pm),
        |pm| problem.feasibility(pm),
        problem.qoi.direction,
        problem.qoi.label(),
        config,
    )
}

/// Best of several seeds.
pub fn bound_qoi_best_of(problem: &Problem, config: &DeConfig, seeds: &[u64]) -> Result<BoundResult> {
    let mut best: Option<BoundResult> = None;
    for &seed in seeds {
        let r = bound_qoi(problem, &DeConfig { seed, ..*config })?;
        if best
            .as_ref()
            .is_none_or(|b| problem.qoi.direction.better(r.value, b.value))
        {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::Config("no seeds given".into()))
}

/// Lower envelope `h ↦ inf F(h)` of the output CDFs over the problem's classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub h: Vec<f64>,
    pub inf_cdf: Vec<f64>,
    /// Minimizers found at each `h`.
    pub argmin: Vec<ProductMeasure>,
}

impl Envelope {
    /// `inf { h : envelope(h) >= p }` on the grid.
    pub fn invert(&self, p: f64) -> Option<f64> {
        self.h.iter().zip(&self.inf_cdf).find(|(_, &f)| f >= p).map(|(&h, _)| h)
    }
}

/// Minimizes `P(Y <= h)` at each grid point.
///
/// Every minimizer is also evaluated at the other grid points, and the result
/// is made nondecreasing by a running minimum from the right; both steps keep
/// each value attained by some feasible measure.
pub fn cdf_envelope(problem: &Problem, grid: &[f64], config: &DeConfig) -> Result<Envelope> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("envelope grid must be strictly increasing".into()));
    }
    let model = problem.model()?;
    let mut argmin = Vec::with_capacity(grid.len());
    for &h in grid {
        let p = problem.with_qoi(QoiSpec::new(QoiKind::FailureProb { h }, Direction::Inf)?)?;
        argmin.push(bound_qoi(&p, config)?.argmax);
    }
    let mut inf_cdf = vec![f64::INFINITY; grid.len()];
    for pm in &argmin {
        let out = crate::qoi::pushforward(pm, model, &problem.settings)?;
        for (v, &h) in inf_cdf.iter_mut().zip(grid) {
            *v = v.min(out.cdf(h));
        }
    }
    for k in (0..grid.len().saturating_sub(1)).rev() {
        inf_cdf[k] = inf_cdf[k].min(inf_cdf[k + 1]);
    }
    Ok(Envelope {
        h: grid.to_vec(),
        inf_cdf,
        argmin,
    })
}

/// Golden-section maximization of `f` on `[lo, hi]` with `steps` refinements.
pub(crate) fn golden_section<F>(lo: f64, hi: f64, steps: usize, mut f: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for _ in 0..steps {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
        for (x, v) in [(c, fc), (d, fd)] {
            if v > best.1 {
                best = (x, v);
            }
        }
    }
    for x in [lo, hi] {
        let v = f(x)?;
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

/// Refinement steps of the outer searches over a linearization parameter.
pub const OUTER_STEPS: usize = 48;

/// Bound of `Var[Y]` by `sup_φ sup { E[(Y - φ)²] : E[Y] = φ }` (or the inf analogue).
///
/// The inner problem carries `E[Y] = φ` as one more joint equality; the outer
/// search is golden-section on `[inf E[Y], sup E[Y]]`. An empty inner problem
/// counts as `-∞` for a supremum and `+∞` for an infimum.
pub fn linearized_variance_bound(problem: &Problem, config: &DeConfig) -> Result<BoundResult> {
    let direction = problem.qoi.direction;
    let mean_range = |d: Direction| -> Result<f64> {
        let p = problem.with_qoi(QoiSpec::new(QoiKind::Expectation(OutputFn::identity()), d)?)?;
        Ok(bound_qoi(&p, config)?.value)
    };
    let (lo, hi) = (mean_range(Direction::Inf)?, mean_range(Direction::Sup)?);
    let inner = |phi: f64| -> Result<Option<BoundResult>> {
        let mut joint = problem.joint.clone();
        joint.push(JointConstraint::new(OutputFn::identity(), Relation::Eq, phi));
        let q = QoiSpec::new(
            QoiKind::Expectation(OutputFn::new(format!("(y - {phi})^2"), move |y, _| (y - phi).powi(2))),
            direction,
        )?;
        let p = Problem::new(
            problem.names.clone(),
            problem.classes.clone(),
            joint,
            problem.model.clone(),
            q,
        )?
        .with_settings(problem.settings);
        let p = Problem {
            repair: problem.repair,
            ..p
        };
        match bound_qoi(&p, config) {
            Ok(r) => Ok(Some(r)),
            Err(Error::InfeasibleClass(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let sign = direction.sign();
    let mut best: Option<BoundResult> = None;
    let mut consider = |phi: f64| -> Result<f64> {
        Ok(match inner(phi)? {
            Some(r) => {
                let v = sign * r.value;
                if best.as_ref().is_none_or(|b| direction.better(r.value, b.value)) {
                    best = Some(r);
                }
                v
            }
            None => f64::NEG_INFINITY,
        })
    };
    if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
        consider(lo)?;
    } else {
        golden_section(lo, hi, OUTER_STEPS, &mut consider)?;
    }
    let mut r = best.ok_or_else(|| Error::InfeasibleClass("no mean level admits a feasible measure".into()))?;
    r.value = crate::qoi::variance_qoi(&r.argmax, problem.model()?, &problem.settings)?;
    r.qoi = format!("{direction} Var[Y]");
    r.feasibility = problem.feasibility(&r.argmax)?;
    Ok(r)
}
