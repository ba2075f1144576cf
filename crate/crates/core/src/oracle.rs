//! Independent references: plain Monte Carlo through the model, and randomized
//! checks that no measure inside a class beats a computed bound.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::measure::{ExtremeMeasure, MarginalClass, ProductMeasure};
use crate::models::Model;
use crate::nominal::Nominal;
use crate::optim::{BoundResult, Problem};
use crate::param::{MarginalLayout, ParamLayout};
use crate::qoi::{ConditionalTable, Direction, QoiKind};

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile: Acklam's rational approximation refined by one Halley step.
pub fn probit(u: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if u < 0.024_25 {
        tail((-2.0 * u.ln()).sqrt())
    } else if u > 1.0 - 0.024_25 {
        -tail((-2.0 * (1.0 - u).ln()).sqrt())
    } else {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = normal_cdf(x) - u;
    let g = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - g / (1.0 + 0.5 * x * g)
}

/// Draw from `law` by inversion of `u ∈ (0, 1)`.
pub fn sample_nominal(law: &Nominal, u: f64) -> f64 {
    match *law {
        Nominal::Gumbel { loc, scale } => loc - scale * (-u.ln()).ln(),
        Nominal::Normal { mean, sd, lo, hi } => {
            let a = lo.map_or(0.0, |l| normal_cdf((l - mean) / sd));
            let b = hi.map_or(1.0, |h| normal_cdf((h - mean) / sd));
            let x = mean + sd * probit(a + u * (b - a));
            x.clamp(lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))
        }
        Nominal::Uniform { lo, hi } => lo + u * (hi - lo),
    }
}

fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// `n` i.i.d. input rows, row-major; column `j` uses ChaCha stream `j` of `seed`.
pub fn mc_inputs(laws: &[Nominal], n: usize, seed: u64) -> Result<Vec<f64>> {
    for l in laws {
        l.validate()?;
    }
    let d = laws.len();
    let mut x = vec![0.0; n * d];
    for (j, law) in laws.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        for r in 0..n {
            x[r * d + j] = sample_nominal(law, open_unit(rng.next_u64()));
        }
    }
    Ok(x)
}

/// Plain Monte Carlo estimate of an output QoI under independent `laws`.
pub fn mc_reference(laws: &[Nominal], model: &dyn Model, qoi: &QoiKind, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Config("no samples".into()));
    }
    if laws.len() != model.dims() {
        return Err(Error::Config(format!(
            "{} laws for a model of {} inputs",
            laws.len(),
            model.dims()
        )));
    }
    let x = mc_inputs(laws, n, seed)?;
    let d = laws.len();
    let mut ys = x
        .chunks_exact(d)
        .map(|row| model.eval(row).map_err(Error::from))
        .collect::<Result<Vec<f64>>>()?;
    let nf = n as f64;
    match qoi {
        QoiKind::Expectation(q) => Ok(ys
            .iter()
            .zip(x.chunks_exact(d))
            .map(|(&y, row)| q.call(y, row))
            .sum::<f64>()
            / nf),
        QoiKind::FailureProb { h } => Ok(ys.iter().filter(|&&y| y <= *h).count() as f64 / nf),
        QoiKind::LowerQuantile { p } => {
            ys.sort_by(f64::total_cmp);
            Ok(ys[((p * nf).ceil() as usize).clamp(1, n) - 1])
        }
        QoiKind::UpperQuantile { p } => {
            ys.sort_by(f64::total_cmp);
            Ok(ys[((p * nf).floor() as usize).min(n - 1)])
        }
        QoiKind::Variance => {
            let m = ys.iter().sum::<f64>() / nf;
            Ok(ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / nf)
        }
        _ => Err(Error::Config(format!("no Monte Carlo reference for {}", qoi.label()))),
    }
}

/// Outcome of a randomized search for measures beating a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest amount by which a sampled value went past the bound.
    pub max_excess: f64,
    pub bound: f64,
    pub direction: Direction,
    /// The worst offending measure, if any.
    pub counterexample: Option<ProductMeasure>,
}

impl DominanceReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Allowed overshoot of a sampled value past a bound.
pub const DOMINANCE_TOL: f64 = 1e-6;

fn random_theta(rng: &mut ChaCha8Rng, dims: usize) -> Vec<f64> {
    (0..dims).map(|_| rng.random::<f64>()).collect()
}

/// A feasible measure of `class` drawn as a random mixture of 2 to 5 decoded extreme points.
pub fn random_interior(class: &MarginalClass, rng: &mut ChaCha8Rng) -> Result<ExtremeMeasure> {
    let layout = MarginalLayout::new(class)?;
    let k = rng.random_range(2..=5);
    let mut parts = Vec::with_capacity(k);
    let mut attempts = 0;
    while parts.len() < k {
        attempts += 1;
        if attempts > 1000 {
            return Err(Error::InfeasibleClass("could not sample feasible measures".into()));
        }
        let d = layout.decode(&random_theta(rng, layout.dims))?;
        if d.violation == 0.0 {
            parts.push((rng.random::<f64>() + 0.05, d.measure));
        }
    }
    let total: f64 = parts.iter().map(|p| p.0).sum();
    for p in &mut parts {
        p.0 /= total;
    }
    ExtremeMeasure::mixture(&parts)
}

fn interior_product(problem: &Problem, rng: &mut ChaCha8Rng) -> Result<ProductMeasure> {
    if problem.joint.is_empty() {
        return Ok(ProductMeasure::new(
            problem
                .classes
                .iter()
                .map(|c| random_interior(c, rng))
                .collect::<Result<_>>()?,
        ));
    }
    // joint constraints: decode with enlarged budgets until feasible
    let layouts = problem
        .layouts()?
        .into_iter()
        .map(|l| MarginalLayout::with_budget(&l.class, l.kind, l.budget + 2))
        .collect::<Result<Vec<_>>>()?;
    let asm = crate::optim::bound::Assembly::with_layouts(problem, layouts);
    for _ in 0..1000 {
        let (pm, v) = asm.decode(&random_theta(rng, asm.dims()))?;
        if v == 0.0 {
            return Ok(pm);
        }
    }
    Err(Error::InfeasibleClass("could not sample feasible measures".into()))
}

fn tally(
    trials: usize,
    bound: f64,
    direction: Direction,
    mut draw: impl FnMut(usize) -> Result<(ProductMeasure, f64)>,
) -> Result<DominanceReport> {
    let mut report = DominanceReport {
        trials,
        violations: 0,
        max_excess: 0.0,
        bound,
        direction,
        counterexample: None,
    };
    for t in 0..trials {
        let (pm, v) = draw(t)?;
        let excess = direction.sign() * (v - bound);
        if excess > DOMINANCE_TOL {
            report.violations += 1;
        }
        if excess > report.max_excess {
            report.max_excess = excess;
            if excess > DOMINANCE_TOL {
                report.counterexample = Some(pm);
            }
        }
    }
    Ok(report)
}

fn trial_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

/// Evaluates the problem's QoI at `trials` random feasible measures and counts
/// those beyond `bound` by more than [`DOMINANCE_TOL`].
pub fn dominance_test(problem: &Problem, bound: &BoundResult, trials: usize, seed: u64) -> Result<DominanceReport> {
    tally(trials, bound.value, problem.qoi.direction, |t| {
        let pm = interior_product(problem, &mut trial_rng(seed, t))?;
        let v = problem.evaluate(&pm)?;
        Ok((pm, v))
    })
}

/// [`dominance_test`] for a bound of `S_i` where only input `i` varies around `nominal`.
///
/// `S_i` is evaluated through the same conditional table as the optimizer uses.
pub fn sobol_dominance_test(
    problem: &Problem,
    nominal: &ProductMeasure,
    i: usize,
    bound: &BoundResult,
    trials: usize,
    seed: u64,
) -> Result<DominanceReport> {
    let model = problem.model()?;
    let table = ConditionalTable::build(model, nominal, i, problem.classes[i].support, &problem.settings)?;
    tally(trials, bound.value, bound.direction, |t| {
        let m = random_interior(&problem.classes[i], &mut trial_rng(seed, t))?;
        let v = table.sobol_first(&m)?;
        Ok((nominal.with_marginal(i, m), v))
    })
}

/// Outcome of mixing extreme points of one input's class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JensenReport {
    pub trials: usize,
    pub failures: usize,
    /// Largest departure from the identity or inequality being checked.
    pub max_gap: f64,
}

impl JensenReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Mixes 2 to 5 decoded extreme points `m_k` of input `i`'s class, the other
/// inputs fixed at `base`, and compares the QoI at the mixture with its values
/// at the `m_k`.
///
/// Expectations must equal the weighted average to `1e-12`; the lower quantile
/// must not exceed the largest value, the upper quantile must not fall below
/// the smallest, and posterior functionals must lie between the two, to `1e-9`.
pub fn jensen_extremal_check(
    problem: &Problem,
    i: usize,
    base: &ProductMeasure,
    trials: usize,
    seed: u64,
) -> Result<JensenReport> {
    if i >= problem.dims() || base.dims() != problem.dims() {
        return Err(Error::Config(
            "input index or base measure does not fit the problem".into(),
        ));
    }
    let kind = &problem.qoi.kind;
    if !(kind.is_affine()
        || matches!(
            kind,
            QoiKind::LowerQuantile { .. } | QoiKind::UpperQuantile { .. } | QoiKind::Bayes(_)
        ))
    {
        return Err(Error::Config(format!(
            "no extremal Jensen property for {}",
            kind.label()
        )));
    }
    let layout = ParamLayout::from_classes(std::slice::from_ref(&problem.classes[i]))?;
    let mut report = JensenReport {
        trials,
        failures: 0,
        max_gap: 0.0,
    };
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let k = rng.random_range(2..=5);
        let mut parts = Vec::with_capacity(k);
        let mut values = Vec::with_capacity(k);
        let mut attempts = 0;
        while parts.len() < k {
            attempts += 1;
            if attempts > 1000 {
                return Err(Error::InfeasibleClass("could not sample feasible measures".into()));
            }
            let (pm, v) = layout.decode(&random_theta(&mut rng, layout.dims()))?;
            if v > 0.0 {
                continue;
            }
            let m = pm.marginals.into_iter().next().expect("one marginal");
            values.push(problem.evaluate(&base.with_marginal(i, m.clone()))?);
            parts.push((rng.random::<f64>() + 0.05, m));
        }
        let total: f64 = parts.iter().map(|p| p.0).sum();
        for p in &mut parts {
            p.0 /= total;
        }
        let mixed = problem.evaluate(&base.with_marginal(i, ExtremeMeasure::mixture(&parts)?))?;
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let (gap, tol) = match kind {
            QoiKind::LowerQuantile { .. } => (mixed - hi, 1e-9),
            QoiKind::UpperQuantile { .. } => (lo - mixed, 1e-9),
            QoiKind::Bayes(_) => ((mixed - hi).max(lo - mixed), 1e-9),
            _ => {
                let avg: f64 = parts.iter().zip(&values).map(|(p, v)| p.0 * v).sum();
                ((mixed - avg).abs(), 1e-12)
            }
        };
        report.max_gap = report.max_gap.max(gap);
        if gap > tol {
            report.failures += 1;
        }
    }
    Ok(report)
}
