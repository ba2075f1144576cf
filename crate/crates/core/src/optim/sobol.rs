//! Bounds of first-order and total Sobol indices when one or all-but-one input laws vary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{ExtremeMeasure, ProductMeasure, FEASIBILITY_TOL};
use crate::param::{LayoutKind, MarginalLayout};
use crate::qoi::{sobol_total, ConditionalTable, Direction};

use super::bound::{golden_section, optimize_over, BoundResult, FeasibilityReport, Problem, OUTER_STEPS};
use super::de::DeConfig;

/// How the ratio `S_i` is optimized over the law of input `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SobolStrategy {
    /// Optimize the ratio itself over extreme points with one extra atom.
    #[default]
    Direct,
    /// Fix `E[Y] = ȳ` as an extra equality and search `ȳ` by golden section.
    Sweep,
}

/// Report in which only the varying marginals count towards `max_violation`.
fn partial_report(problem: &Problem, pm: &ProductMeasure, varying: &[usize]) -> Result<FeasibilityReport> {
    let mut worst: f64 = 0.0;
    let mut marginal_residuals = Vec::with_capacity(problem.dims());
    for (j, (c, m)) in problem.classes.iter().zip(&pm.marginals).enumerate() {
        marginal_residuals.push(c.residuals(m)?);
        if varying.contains(&j) {
            worst = worst.max(c.violation(m)?);
        }
    }
    Ok(FeasibilityReport {
        marginal_residuals,
        joint_residuals: vec![],
        max_violation: worst,
    })
}

fn check(problem: &Problem, nominal: &ProductMeasure, i: usize) -> Result<()> {
    if nominal.dims() != problem.dims() {
        return Err(Error::Config(format!(
            "{} nominal laws for {} inputs",
            nominal.dims(),
            problem.dims()
        )));
    }
    if i >= problem.dims() {
        return Err(Error::Config(format!(
            "Sobol index {} of {} inputs",
            i + 1,
            problem.dims()
        )));
    }
    if !problem.joint.is_empty() {
        return Err(Error::Config("Sobol bounds do not take joint constraints".into()));
    }
    Ok(())
}

/// Layout of class `i` with one atom more than its own budget.
fn widened_layout(problem: &Problem, i: usize, kind: Option<LayoutKind>) -> Result<MarginalLayout> {
    let class = &problem.classes[i];
    let kind = kind.unwrap_or_else(|| MarginalLayout::preferred_kind(class));
    MarginalLayout::with_budget(class, kind, class.atom_budget() + 1)
}

/// Bound of `S_i` over the class of input `i`, the others fixed at `nominal`.
pub fn sobol_first_bound(
    problem: &Problem,
    nominal: &ProductMeasure,
    i: usize,
    direction: Direction,
    strategy: SobolStrategy,
    config: &DeConfig,
) -> Result<BoundResult> {
    check(problem, nominal, i)?;
    let model = problem.model()?;
    let table = ConditionalTable::build(model, nominal, i, problem.classes[i].support, &problem.settings)?;
    let label = format!("{direction} S_{}", i + 1);
    match strategy {
        SobolStrategy::Direct => {
            let layout = widened_layout(problem, i, None)?;
            optimize_over(
                layout.dims,
                |t| {
                    let d = layout.decode(t)?;
                    Ok((nominal.with_marginal(i, d.measure), d.violation))
                },
                |pm| table.sobol_first(&pm.marginals[i]),
                |pm| partial_report(problem, pm, &[i]),
                direction,
                label,
                config,
            )
        }
        SobolStrategy::Sweep => sweep(problem, nominal, i, &table, direction, label, config),
    }
}

fn sweep(
    problem: &Problem,
    nominal: &ProductMeasure,
    i: usize,
    table: &ConditionalTable,
    direction: Direction,
    label: String,
    config: &DeConfig,
) -> Result<BoundResult> {
    let class = &problem.classes[i];
    let kind = if class.is_unimodal() {
        LayoutKind::UnimodalMixture
    } else {
        LayoutKind::DirectDirac
    };
    let layout = widened_layout(problem, i, Some(kind))?;
    let iv = table.interval();
    let probe: Vec<f64> = (0..=256)
        .map(|k| table.eval(iv.from_unit(k as f64 / 256.0)).0)
        .collect();
    let lo = probe.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = probe.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let inner = |ybar: f64| -> Result<Option<BoundResult>> {
        let rows = |m: &ExtremeMeasure| -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
            let row = (0..m.n_components())
                .map(|k| table.component_moments(m, k).map(|c| c.0))
                .collect::<Result<Vec<_>>>()?;
            Ok((vec![row], vec![ybar]))
        };
        let ratio = |pm: &ProductMeasure| -> Result<f64> {
            let (_, e11, e2) = table.moments(&pm.marginals[i])?;
            let den = e2 - ybar * ybar;
            if !(den > 0.0) {
                return Err(Error::UndefinedIndex("output variance is zero".into()));
            }
            Ok(((e11 - ybar * ybar) / den).clamp(0.0, 1.0))
        };
        let r = optimize_over(
            layout.dims,
            |t| {
                let d = layout.decode_with(t, Some(&rows))?;
                Ok((nominal.with_marginal(i, d.measure), d.violation))
            },
            ratio,
            |pm| partial_report(problem, pm, &[i]),
            direction,
            label.clone(),
            config,
        );
        match r {
            Ok(r) => Ok(Some(r)),
            Err(Error::InfeasibleClass(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let sign = direction.sign();
    let mut best: Option<BoundResult> = None;
    golden_section(lo, hi, OUTER_STEPS, |ybar| {
        Ok(match inner(ybar)? {
            Some(r) => {
                let v = sign * r.value;
                if best.as_ref().is_none_or(|b| direction.better(r.value, b.value)) {
                    best = Some(r);
                }
                v
            }
            None => f64::NEG_INFINITY,
        })
    })?;
    let mut r = best.ok_or_else(|| Error::InfeasibleClass("no mean level admits a feasible measure".into()))?;
    r.value = table.sobol_first(&r.argmax.marginals[i])?;
    Ok(r)
}

/// Bound of `S_Ti` with input `i` at its nominal law and every other input varying in its class.
pub fn sobol_total_bound(
    problem: &Problem,
    nominal: &ProductMeasure,
    i: usize,
    direction: Direction,
    config: &DeConfig,
) -> Result<BoundResult> {
    check(problem, nominal, i)?;
    let model = problem.model()?;
    let varying: Vec<usize> = (0..problem.dims()).filter(|&j| j != i).collect();
    let layouts = varying
        .iter()
        .map(|&j| widened_layout(problem, j, None))
        .collect::<Result<Vec<_>>>()?;
    let dims = layouts.iter().map(|l| l.dims).sum();
    let decode = |theta: &[f64]| -> Result<(ProductMeasure, f64)> {
        let mut pm = nominal.clone();
        let mut at = 0;
        let mut violation: f64 = 0.0;
        for (l, &j) in layouts.iter().zip(&varying) {
            let d = l.decode(&theta[at..at + l.dims])?;
            at += l.dims;
            violation = violation.max(d.violation);
            pm.marginals[j] = d.measure;
        }
        Ok((pm, if violation > FEASIBILITY_TOL { violation } else { 0.0 }))
    };
    optimize_over(
        dims,
        decode,
        |pm| sobol_total(pm, model, i, &problem.settings),
        |pm| partial_report(problem, pm, &varying),
        direction,
        format!("{direction} S_T{}", i + 1),
        config,
    )
}
