//! Extreme-point measures of moment classes and their exact evaluation.
//!
//! Two generators are represented: finite mixtures of Dirac masses (extreme
//! points of a moment class) and finite mixtures of uniform laws on `co(a, z)`
//! anchored at a common mode `a` (extreme points of a unimodal moment class).
//! A uniform component with `z == a` is the Dirac mass at the mode.

use std::fmt;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cdf::{PiecewiseCdf, Segment};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Gauss–Legendre order used per uniform component by [`ExtremeMeasure::expectation`].
pub const EXPECTATION_ORDER: usize = 32;

/// Relative feasibility tolerance of constraint residuals.
pub const FEASIBILITY_TOL: f64 = 1e-8;

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A bounded real interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(Error::InvalidInterval { lo, hi })
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Membership with a small relative slack for rounding.
    pub fn contains(&self, x: f64) -> bool {
        let slack = 1e-12 * self.width().max(self.lo.abs()).max(self.hi.abs());
        x >= self.lo - slack && x <= self.hi + slack
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Affine image of `t ∈ [0, 1]`.
    pub fn from_unit(&self, t: f64) -> f64 {
        self.clamp(self.lo + t * self.width())
    }
}

/// A named real function of one variable, used as a generalized moment function.
#[derive(Clone)]
pub struct ScalarFn {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarFn {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn call(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.label)
    }
}

#[derive(Debug, Clone)]
pub enum ConstraintKind {
    RawMoment(u32),
    Generalized(ScalarFn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Eq,
    Leq,
}

/// `E[φ] = bound` or `E[φ] <= bound`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub relation: Relation,
    pub bound: f64,
}

impl Constraint {
    pub fn raw_moment(order: u32, relation: Relation, bound: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidClass("raw moment order must be >= 1".into()));
        }
        Ok(Self {
            kind: ConstraintKind::RawMoment(order),
            relation,
            bound,
        })
    }

    pub fn generalized(f: ScalarFn, relation: Relation, bound: f64) -> Self {
        Self {
            kind: ConstraintKind::Generalized(f),
            relation,
            bound,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            ConstraintKind::RawMoment(k) => x.powi(*k as i32),
            ConstraintKind::Generalized(f) => f.call(x),
        }
    }

    /// Scale used to make residuals relative.
    pub fn scale(&self) -> f64 {
        self.bound.abs().max(1.0)
    }

    pub fn expectation(&self, m: &ExtremeMeasure) -> Result<f64> {
        match &self.kind {
            ConstraintKind::RawMoment(k) => Ok(m.raw_moment(*k)),
            ConstraintKind::Generalized(f) => m.expectation(|x| f.call(x)),
        }
    }

    /// Expectation of the constraint function under one mixture component.
    pub fn component_expectation(&self, m: &ExtremeMeasure, k: usize) -> Result<f64> {
        match &self.kind {
            ConstraintKind::RawMoment(order) => Ok(m.component_raw_moment(k, *order)),
            ConstraintKind::Generalized(f) => m.component_expectation(k, |x| f.call(x)),
        }
    }

    /// Signed residual: `E - bound` for `Leq`, `|E - bound|` for `Eq`.
    pub fn residual(&self, m: &ExtremeMeasure) -> Result<f64> {
        let e = self.expectation(m)?;
        Ok(match self.relation {
            Relation::Leq => e - self.bound,
            Relation::Eq => (e - self.bound).abs(),
        })
    }

    pub fn label(&self) -> String {
        let lhs = match &self.kind {
            ConstraintKind::RawMoment(k) => format!("E[x^{k}]"),
            ConstraintKind::Generalized(f) => format!("E[{}]", f.label()),
        };
        let rel = match self.relation {
            Relation::Eq => "=",
            Relation::Leq => "<=",
        };
        format!("{lhs} {rel} {}", self.bound)
    }
}

/// A moment class (no mode) or a unimodal moment class (mode given) on an interval.
#[derive(Debug, Clone)]
pub struct MarginalClass {
    pub support: Interval,
    pub constraints: Vec<Constraint>,
    pub mode: Option<f64>,
    /// Number of joint constraints shared across the product.
    pub joint_budget: usize,
}

impl MarginalClass {
    pub fn new(support: Interval, constraints: Vec<Constraint>, mode: Option<f64>) -> Result<Self> {
        if let Some(a) = mode {
            if !(a.is_finite() && a >= support.lo && a <= support.hi) {
                return Err(Error::InvalidClass(format!(
                    "mode {a} outside support [{}, {}]",
                    support.lo, support.hi
                )));
            }
        }
        Ok(Self {
            support,
            constraints,
            mode,
            joint_budget: 0,
        })
    }

    pub fn with_joint_budget(mut self, n: usize) -> Self {
        self.joint_budget = n;
        self
    }

    pub fn is_unimodal(&self) -> bool {
        self.mode.is_some()
    }

    /// Maximal number of mixture components of an extreme point: `N_i + N + 1`.
    pub fn atom_budget(&self) -> usize {
        self.constraints.len() + self.joint_budget + 1
    }

    /// One residual per constraint, see [`Constraint::residual`].
    pub fn residuals(&self, m: &ExtremeMeasure) -> Result<Vec<f64>> {
        self.constraints.iter().map(|c| c.residual(m)).collect()
    }

    /// Largest scaled violation; zero when every constraint holds within tolerance.
    pub fn violation(&self, m: &ExtremeMeasure) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let r = c.residual(m)? / c.scale();
            if r > FEASIBILITY_TOL {
                worst = worst.max(r);
            }
        }
        Ok(worst)
    }

    pub fn is_feasible(&self, m: &ExtremeMeasure) -> Result<bool> {
        Ok(self.violation(m)? == 0.0 && m.lies_in(&self.support))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub location: f64,
}

/// Uniform law on `co(mode, endpoint)` with mixture weight `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformComponent {
    pub weight: f64,
    pub endpoint: f64,
}

/// A finite mixture of Dirac masses or of mode-anchored uniforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExtremeMeasure {
    Dirac {
        atoms: Vec<Atom>,
    },
    Uniform {
        mode: f64,
        components: Vec<UniformComponent>,
    },
}

fn normalize_weights(weights: &mut [f64]) -> Result<()> {
    for w in weights.iter_mut() {
        if !w.is_finite() {
            return Err(Error::InvalidMeasure("non-finite weight".into()));
        }
        if *w < 0.0 {
            if *w < -1e-12 {
                return Err(Error::InvalidMeasure(format!("negative weight {w}")));
            }
            *w = 0.0;
        }
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidMeasure(format!("weights sum to {s}")));
    }
    for w in weights.iter_mut() {
        *w /= s;
    }
    Ok(())
}

/// `E[X^k]` of the uniform law on `co(a, z)`, written without cancellation.
fn uniform_raw_moment(a: f64, z: f64, k: u32) -> f64 {
    // (z^{k+1} - a^{k+1}) / ((k+1)(z-a)) = Σ_j z^j a^{k-j} / (k+1)
    let mut s = 0.0;
    let mut zp = 1.0;
    for j in 0..=k {
        s += zp * a.powi((k - j) as i32);
        zp *= z;
    }
    s / (k as f64 + 1.0)
}

impl ExtremeMeasure {
    /// Dirac mixture from `(weight, location)` pairs.
    pub fn dirac(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (mut w, x): (Vec<f64>, Vec<f64>) = atoms.into_iter().unzip();
        if w.is_empty() {
            return Err(Error::InvalidMeasure("empty mixture".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite location".into()));
        }
        normalize_weights(&mut w)?;
        Ok(Self::Dirac {
            atoms: w
                .into_iter()
                .zip(x)
                .map(|(weight, location)| Atom { weight, location })
                .collect(),
        })
    }

    pub fn point(x: f64) -> Self {
        Self::Dirac {
            atoms: vec![Atom {
                weight: 1.0,
                location: x,
            }],
        }
    }

    /// Uniform mixture anchored at `mode` from `(weight, endpoint)` pairs.
    pub fn uniform(mode: f64, components: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (mut w, z): (Vec<f64>, Vec<f64>) = components.into_iter().unzip();
        if w.is_empty() {
            return Err(Error::InvalidMeasure("empty mixture".into()));
        }
        if !mode.is_finite() || z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite endpoint".into()));
        }
        normalize_weights(&mut w)?;
        Ok(Self::Uniform {
            mode,
            components: w
                .into_iter()
                .zip(z)
                .map(|(weight, endpoint)| UniformComponent { weight, endpoint })
                .collect(),
        })
    }

    pub fn n_components(&self) -> usize {
        match self {
            Self::Dirac { atoms } => atoms.len(),
            Self::Uniform { components, .. } => components.len(),
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        match self {
            Self::Dirac { atoms } => atoms.iter().map(|a| a.weight).collect(),
            Self::Uniform { components, .. } => components.iter().map(|c| c.weight).collect(),
        }
    }

    /// Number of components with positive weight.
    pub fn n_active(&self) -> usize {
        self.weights().iter().filter(|&&w| w > 0.0).count()
    }

    /// Smallest interval containing the support.
    pub fn hull(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        match self {
            Self::Dirac { atoms } => {
                for a in atoms {
                    lo = lo.min(a.location);
                    hi = hi.max(a.location);
                }
            }
            Self::Uniform { mode, components } => {
                lo = *mode;
                hi = *mode;
                for c in components {
                    lo = lo.min(c.endpoint);
                    hi = hi.max(c.endpoint);
                }
            }
        }
        (lo, hi)
    }

    pub fn lies_in(&self, support: &Interval) -> bool {
        let (lo, hi) = self.hull();
        support.contains(lo) && support.contains(hi)
    }

    /// `E[f]`: exact for Dirac mixtures, Gauss–Legendre of order 32 per uniform component.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        self.expectation_with_order(f, EXPECTATION_ORDER)
    }

    pub fn expectation_with_order(&self, f: impl Fn(f64) -> f64, order: usize) -> Result<f64> {
        let mut s = 0.0;
        for k in 0..self.n_components() {
            let w = self.component_weight(k);
            if w > 0.0 {
                s += w * self.component_expectation_with_order(k, &f, order)?;
            }
        }
        Ok(s)
    }

    pub fn component_weight(&self, k: usize) -> f64 {
        match self {
            Self::Dirac { atoms } => atoms[k].weight,
            Self::Uniform { components, .. } => components[k].weight,
        }
    }

    /// Expectation of `f` under the `k`-th (unweighted) component.
    pub fn component_expectation(&self, k: usize, f: impl Fn(f64) -> f64) -> Result<f64> {
        self.component_expectation_with_order(k, f, EXPECTATION_ORDER)
    }

    fn component_expectation_with_order(&self, k: usize, f: impl Fn(f64) -> f64, order: usize) -> Result<f64> {
        let checked = |x: f64| {
            let v = f(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Evaluation { location: x })
            }
        };
        match self {
            Self::Dirac { atoms } => checked(atoms[k].location),
            Self::Uniform { mode, components } => {
                let z = components[k].endpoint;
                if z == *mode {
                    return checked(z);
                }
                let rule = gauss_legendre(order);
                let mut s = 0.0;
                for (x, w) in rule.unit_mass_on(*mode, z) {
                    s += w * checked(x)?;
                }
                Ok(s)
            }
        }
    }

    /// `E[X^k]` in closed form.
    pub fn raw_moment(&self, order: u32) -> f64 {
        (0..self.n_components())
            .map(|k| self.component_weight(k) * self.component_raw_moment(k, order))
            .sum()
    }

    pub fn component_raw_moment(&self, k: usize, order: u32) -> f64 {
        match self {
            Self::Dirac { atoms } => atoms[k].location.powi(order as i32),
            Self::Uniform { mode, components } => uniform_raw_moment(*mode, components[k].endpoint, order),
        }
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    /// Atoms and segments of the law, for exact CDF work.
    pub fn pieces(&self) -> (Vec<(f64, f64)>, Vec<Segment>) {
        match self {
            Self::Dirac { atoms } => (atoms.iter().map(|a| (a.weight, a.location)).collect(), vec![]),
            Self::Uniform { mode, components } => {
                let mut atoms = Vec::new();
                let mut segs = Vec::new();
                for c in components {
                    if c.endpoint == *mode {
                        atoms.push((c.weight, *mode));
                    } else {
                        segs.push(Segment {
                            weight: c.weight,
                            lo: mode.min(c.endpoint),
                            hi: mode.max(c.endpoint),
                        });
                    }
                }
                (atoms, segs)
            }
        }
    }

    pub fn piecewise_cdf(&self) -> PiecewiseCdf {
        let (atoms, segs) = self.pieces();
        PiecewiseCdf::new(&atoms, &segs)
    }

    /// Right-continuous distribution function.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            Self::Dirac { atoms } => atoms
                .iter()
                .filter(|a| a.location <= t)
                .map(|a| a.weight)
                .sum::<f64>()
                .min(1.0),
            Self::Uniform { mode, components } => {
                let mut f = 0.0;
                for c in components {
                    let (lo, hi) = (mode.min(c.endpoint), mode.max(c.endpoint));
                    f += c.weight
                        * if hi == lo {
                            if t >= lo {
                                1.0
                            } else {
                                0.0
                            }
                        } else {
                            ((t - lo) / (hi - lo)).clamp(0.0, 1.0)
                        };
                }
                f.min(1.0)
            }
        }
    }

    /// Weighted nodes: the atoms, or `order` Gauss–Legendre nodes per uniform component.
    pub fn nodes(&self, order: usize) -> Vec<(f64, f64)> {
        match self {
            Self::Dirac { atoms } => atoms
                .iter()
                .filter(|a| a.weight > 0.0)
                .map(|a| (a.weight, a.location))
                .collect(),
            Self::Uniform { mode, components } => {
                let rule = gauss_legendre(order);
                let mut out = Vec::new();
                for c in components.iter().filter(|c| c.weight > 0.0) {
                    if c.endpoint == *mode {
                        out.push((c.weight, *mode));
                    } else {
                        out.extend(rule.unit_mass_on(*mode, c.endpoint).map(|(x, w)| (c.weight * w, x)));
                    }
                }
                out
            }
        }
    }

    /// `λ·self ⊕ (1-λ)·other`: concatenation of the weighted components.
    pub fn mix(&self, lambda: f64, other: &Self) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidMeasure(format!("mixing weight {lambda}")));
        }
        match (self, other) {
            (Self::Dirac { atoms: a }, Self::Dirac { atoms: b }) => Ok(Self::Dirac {
                atoms: a
                    .iter()
                    .map(|x| Atom {
                        weight: lambda * x.weight,
                        ..*x
                    })
                    .chain(b.iter().map(|x| Atom {
                        weight: (1.0 - lambda) * x.weight,
                        ..*x
                    }))
                    .collect(),
            }),
            (
                Self::Uniform {
                    mode: ma,
                    components: a,
                },
                Self::Uniform {
                    mode: mb,
                    components: b,
                },
            ) if ma == mb => Ok(Self::Uniform {
                mode: *ma,
                components: a
                    .iter()
                    .map(|c| UniformComponent {
                        weight: lambda * c.weight,
                        ..*c
                    })
                    .chain(b.iter().map(|c| UniformComponent {
                        weight: (1.0 - lambda) * c.weight,
                        ..*c
                    }))
                    .collect(),
            }),
            _ => Err(Error::InvalidMeasure(
                "cannot mix measures of different kinds or modes".into(),
            )),
        }
    }

    /// Convex combination `Σ λ_j m_j` of measures of the same kind.
    pub fn mixture(parts: &[(f64, Self)]) -> Result<Self> {
        let (first_w, first) = parts
            .first()
            .ok_or_else(|| Error::InvalidMeasure("empty mixture".into()))?;
        let mut acc = first.clone();
        let mut mass = *first_w;
        for (w, m) in &parts[1..] {
            let total = mass + w;
            if total <= 0.0 {
                continue;
            }
            acc = acc.mix(mass / total, m)?;
            mass = total;
        }
        Ok(acc)
    }

    /// Same components with new weights.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.n_components() {
            return Err(Error::InvalidMeasure("weight count mismatch".into()));
        }
        match self {
            Self::Dirac { atoms } => Self::dirac(weights.iter().zip(atoms).map(|(&w, a)| (w, a.location))),
            Self::Uniform { mode, components } => {
                Self::uniform(*mode, weights.iter().zip(components).map(|(&w, c)| (w, c.endpoint)))
            }
        }
    }

    /// Drops zero-weight components.
    pub fn pruned(&self) -> Self {
        match self {
            Self::Dirac { atoms } => Self::Dirac {
                atoms: atoms.iter().copied().filter(|a| a.weight > 0.0).collect(),
            },
            Self::Uniform { mode, components } => Self::Uniform {
                mode: *mode,
                components: components.iter().copied().filter(|c| c.weight > 0.0).collect(),
            },
        }
    }
}

/// Independent product of marginal extreme measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMeasure {
    pub marginals: Vec<ExtremeMeasure>,
}

impl ProductMeasure {
    pub fn new(marginals: Vec<ExtremeMeasure>) -> Self {
        Self { marginals }
    }

    pub fn dims(&self) -> usize {
        self.marginals.len()
    }

    /// Replaces marginal `i`.
    pub fn with_marginal(&self, i: usize, m: ExtremeMeasure) -> Self {
        let mut out = self.clone();
        out.marginals[i] = m;
        out
    }
}

/// Row-major `rows × cols` sample matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl SampleMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |r| self.data[r * self.cols + c])
    }
}

/// Maps 64 random bits to the open interval (0, 1).
pub(crate) fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// `n` i.i.d. rows drawn by inverse CDF. Column `j` uses ChaCha stream `j`
/// of `seed`, so the output only depends on `(seed, n)`.
pub fn product_sample(pm: &ProductMeasure, n: usize, seed: u64) -> SampleMatrix {
    let cols = pm.dims();
    let mut data = vec![0.0; n * cols];
    for (j, m) in pm.marginals.iter().enumerate() {
        let cdf = m.piecewise_cdf();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        for r in 0..n {
            data[r * cols + j] = cdf.lower_quantile(open_unit(rng.next_u64()));
        }
    }
    SampleMatrix { rows: n, cols, data }
}
