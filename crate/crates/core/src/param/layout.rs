//! Decoding optimizer vectors in `[0, 1]^dims` into extreme measures of a class.

use serde::{Deserialize, Serialize};

use super::canonical::{canonical_to_quadrature, moments_to_canonical};
use super::projection::project_weights;
use super::simplex::simplex_map;
use crate::error::{Error, Result};
use crate::measure::{ConstraintKind, ExtremeMeasure, MarginalClass, ProductMeasure, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    /// Free canonical moments beyond the fixed ones; exact feasibility.
    CanonicalDirac,
    /// Atom locations plus simplex weights, equality constraints by projection.
    DirectDirac,
    /// Uniform endpoints plus simplex weights, equality constraints by projection.
    UnimodalMixture,
}

/// Extra equality rows imposed on a marginal at decode time.
///
/// Given the marginal with its unprojected weights, returns one row of
/// per-component expectations and one right-hand side per constraint.
pub type ExtraRows<'a> = dyn Fn(&ExtremeMeasure) -> Result<(Vec<Vec<f64>>, Vec<f64>)> + 'a;

/// A decoded marginal with its constraint violation (zero when feasible).
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub measure: ExtremeMeasure,
    pub violation: f64,
}

#[derive(Debug, Clone)]
pub struct MarginalLayout {
    pub kind: LayoutKind,
    pub class: MarginalClass,
    /// Number of atoms or uniform components.
    pub budget: usize,
    pub dims: usize,
    fixed: Vec<f64>,
}

/// Moment orders `1..=n` fixed by equality, if the class is exactly that.
fn classical_orders(class: &MarginalClass) -> Option<Vec<f64>> {
    let mut fixed: Vec<(u32, f64)> = Vec::new();
    for c in &class.constraints {
        match (&c.kind, c.relation) {
            (ConstraintKind::RawMoment(k), Relation::Eq) => fixed.push((*k, c.bound)),
            _ => return None,
        }
    }
    fixed.sort_by_key(|f| f.0);
    let ok = fixed.iter().enumerate().all(|(i, f)| f.0 as usize == i + 1);
    ok.then(|| fixed.into_iter().map(|f| f.1).collect())
}

impl MarginalLayout {
    /// Layout with the class's own budget `N_i + N + 1` and the preferred kind.
    pub fn new(class: &MarginalClass) -> Result<Self> {
        Self::with_budget(class, Self::preferred_kind(class), class.atom_budget())
    }

    pub fn preferred_kind(class: &MarginalClass) -> LayoutKind {
        if class.is_unimodal() {
            LayoutKind::UnimodalMixture
        } else if classical_orders(class).is_some() {
            LayoutKind::CanonicalDirac
        } else {
            LayoutKind::DirectDirac
        }
    }

    pub fn with_budget(class: &MarginalClass, kind: LayoutKind, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::Config("atom budget must be positive".into()));
        }
        let mut fixed = Vec::new();
        let dims = match kind {
            LayoutKind::CanonicalDirac => {
                let moments = classical_orders(class).ok_or_else(|| {
                    Error::Config("canonical layout needs equality constraints on moments 1..n only".into())
                })?;
                if moments.len() > 2 * budget - 1 {
                    return Err(Error::Config(format!(
                        "{} fixed moments exceed what {budget} atoms can carry",
                        moments.len()
                    )));
                }
                fixed = moments_to_canonical(&moments, class.support)
                    .map_err(|e| Error::InfeasibleClass(e.to_string()))?
                    .p;
                2 * budget - 1 - moments.len()
            }
            LayoutKind::DirectDirac => {
                if class.is_unimodal() {
                    return Err(Error::Config("unimodal class needs a uniform-mixture layout".into()));
                }
                2 * budget - 1
            }
            LayoutKind::UnimodalMixture => {
                if !class.is_unimodal() {
                    return Err(Error::Config("uniform-mixture layout needs a mode".into()));
                }
                2 * budget - 1
            }
        };
        Ok(Self {
            kind,
            class: class.clone(),
            budget,
            dims,
            fixed,
        })
    }

    pub fn decode(&self, theta: &[f64]) -> Result<Decoded> {
        self.decode_with(theta, None)
    }

    /// Decodes `theta`, additionally enforcing `extra` equality rows by weight projection.
    pub fn decode_with(&self, theta: &[f64], extra: Option<&ExtraRows<'_>>) -> Result<Decoded> {
        if theta.len() != self.dims {
            return Err(Error::Config(format!(
                "expected {} coordinates, got {}",
                self.dims,
                theta.len()
            )));
        }
        let support = self.class.support;
        let k = self.budget;
        let measure = match self.kind {
            LayoutKind::CanonicalDirac => {
                if extra.is_some() {
                    return Err(Error::Config(
                        "extra equality rows need a direct or uniform-mixture layout".into(),
                    ));
                }
                let mut p = self.fixed.clone();
                p.extend(theta.iter().map(|t| t.clamp(0.0, 1.0)));
                let m = canonical_to_quadrature(&p, k, &support);
                let violation = self.class.violation(&m)?;
                return Ok(Decoded { measure: m, violation });
            }
            LayoutKind::DirectDirac => {
                let w = simplex_map(&theta[k..]);
                ExtremeMeasure::dirac(
                    w.into_iter()
                        .zip(&theta[..k])
                        .map(|(w, &t)| (w, support.from_unit(t.clamp(0.0, 1.0)))),
                )?
            }
            LayoutKind::UnimodalMixture => {
                let mode = self.class.mode.expect("checked at construction");
                let w = simplex_map(&theta[k..]);
                ExtremeMeasure::uniform(
                    mode,
                    w.into_iter()
                        .zip(&theta[..k])
                        .map(|(w, &t)| (w, support.from_unit(t.clamp(0.0, 1.0)))),
                )?
            }
        };
        self.project(measure, extra)
    }

    fn project(&self, template: ExtremeMeasure, extra: Option<&ExtraRows<'_>>) -> Result<Decoded> {
        let n = template.n_components();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for c in self.class.constraints.iter().filter(|c| c.relation == Relation::Eq) {
            let row = (0..n)
                .map(|k| c.component_expectation(&template, k))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
            rhs.push(c.bound);
        }
        if let Some(extra) = extra {
            let (r, d) = extra(&template)?;
            rows.extend(r);
            rhs.extend(d);
        }
        let proj = project_weights(&template.weights(), &rows, &rhs);
        let measure = template.with_weights(&proj.weights)?;
        let violation = proj.violation.max(self.class.violation(&measure)?);
        Ok(Decoded { measure, violation })
    }
}

/// Decodes one marginal's coordinates.
pub fn vector_to_extreme(theta: &[f64], layout: &MarginalLayout) -> Result<Decoded> {
    layout.decode(theta)
}

/// Concatenated layouts of all marginals.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    pub marginals: Vec<MarginalLayout>,
}

impl ParamLayout {
    pub fn new(marginals: Vec<MarginalLayout>) -> Self {
        Self { marginals }
    }

    pub fn from_classes(classes: &[MarginalClass]) -> Result<Self> {
        Ok(Self::new(
            classes.iter().map(MarginalLayout::new).collect::<Result<_>>()?,
        ))
    }

    pub fn dims(&self) -> usize {
        self.marginals.iter().map(|m| m.dims).sum()
    }

    /// Slices of `theta` belonging to each marginal.
    pub fn split<'t>(&self, theta: &'t [f64]) -> Vec<&'t [f64]> {
        let mut out = Vec::with_capacity(self.marginals.len());
        let mut at = 0;
        for m in &self.marginals {
            out.push(&theta[at..at + m.dims]);
            at += m.dims;
        }
        out
    }

    /// Decodes all marginals; the violation is the largest over marginals.
    pub fn decode(&self, theta: &[f64]) -> Result<(ProductMeasure, f64)> {
        let mut ms = Vec::with_capacity(self.marginals.len());
        let mut violation: f64 = 0.0;
        for (layout, t) in self.marginals.iter().zip(self.split(theta)) {
            let d = layout.decode(t)?;
            violation = violation.max(d.violation);
            ms.push(d.measure);
        }
        Ok((ProductMeasure::new(ms), violation))
    }
}
