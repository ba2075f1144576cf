//! Posterior functionals `∫ q L dπ / ∫ L dπ` of priors in moment classes.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measure::{ExtremeMeasure, ProductMeasure};
use crate::models::ConditionalFailure;

use super::output::Grid;

type ParamFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A posterior expectation over a product prior.
///
/// The log-likelihood depends only on the inputs `likelihood_inputs` (in that
/// order); the integrand sees the whole parameter vector.
#[derive(Clone)]
pub struct BayesQoi {
    pub label: String,
    pub likelihood_inputs: Vec<usize>,
    pub log_likelihood: ParamFn,
    pub integrand: ParamFn,
}

impl fmt::Debug for BayesQoi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BayesQoi")
            .field("label", &self.label)
            .field("likelihood_inputs", &self.likelihood_inputs)
            .finish()
    }
}

impl BayesQoi {
    /// Posterior expectation of the integrand under the prior `pm`.
    pub fn evaluate(&self, pm: &ProductMeasure, order: usize) -> Result<f64> {
        let d = pm.dims();
        let lik: Vec<Vec<(f64, f64)>> = self
            .likelihood_inputs
            .iter()
            .map(|&j| pm.marginals[j].nodes(order))
            .collect();
        let rest_idx: Vec<usize> = (0..d).filter(|j| !self.likelihood_inputs.contains(j)).collect();
        let rest: Vec<Vec<(f64, f64)>> = rest_idx.iter().map(|&j| pm.marginals[j].nodes(order)).collect();
        let ga = Grid::tensor(&lik);
        let gb = Grid::tensor(&rest);

        let ll: Vec<f64> = (0..ga.len()).map(|a| (self.log_likelihood)(ga.point(a))).collect();
        let top = ll
            .iter()
            .zip(&ga.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(l, _)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::DegeneratePosterior);
        }
        let post: Vec<f64> = ll.iter().zip(&ga.weights).map(|(l, w)| w * (l - top).exp()).collect();
        let z: f64 = post.iter().sum();
        if !(z > 0.0) {
            return Err(Error::DegeneratePosterior);
        }

        let mut theta = vec![0.0; d];
        let mut acc = 0.0;
        for (a, &pa) in post.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (k, &j) in self.likelihood_inputs.iter().enumerate() {
                theta[j] = ga.point(a)[k];
            }
            let mut inner = 0.0;
            for b in 0..gb.len() {
                for (k, &j) in rest_idx.iter().enumerate() {
                    theta[j] = gb.point(b)[k];
                }
                let q = (self.integrand)(&theta);
                if !q.is_finite() {
                    return Err(Error::Evaluation { location: theta[0] });
                }
                inner += gb.weights[b] * q;
            }
            acc += pa * inner;
        }
        Ok(acc / z)
    }
}

/// Posterior of a one-dimensional prior under `likelihood`.
///
/// Dirac mixtures are reweighted exactly. A uniform mixture stays a uniform
/// mixture when the likelihood is constant on each component; otherwise each
/// component is replaced by its Gauss–Legendre nodes of `order` before reweighting.
pub fn posterior_pushforward(
    prior: &ExtremeMeasure,
    likelihood: impl Fn(f64) -> f64,
    order: usize,
) -> Result<ExtremeMeasure> {
    let check = |x: f64| {
        let l = likelihood(x);
        if l.is_finite() && l >= 0.0 {
            Ok(l)
        } else {
            Err(Error::Evaluation { location: x })
        }
    };
    let reweight = |pairs: Vec<(f64, f64)>| -> Result<Vec<(f64, f64)>> {
        let z: f64 = pairs.iter().map(|p| p.0).sum();
        if !(z > 0.0) {
            return Err(Error::DegeneratePosterior);
        }
        Ok(pairs.into_iter().map(|(w, x)| (w / z, x)).collect())
    };
    match prior {
        ExtremeMeasure::Dirac { atoms } => {
            let pairs = atoms
                .iter()
                .map(|a| Ok((a.weight * check(a.location)?, a.location)))
                .collect::<Result<Vec<_>>>()?;
            ExtremeMeasure::dirac(reweight(pairs)?)
        }
        ExtremeMeasure::Uniform { mode, components } => {
            let mut constant = Vec::with_capacity(components.len());
            for (k, c) in components.iter().enumerate() {
                let nodes = ExtremeMeasure::Uniform {
                    mode: *mode,
                    components: vec![crate::measure::UniformComponent { weight: 1.0, ..*c }],
                }
                .nodes(order);
                let ls = nodes.iter().map(|&(_, x)| check(x)).collect::<Result<Vec<_>>>()?;
                if ls.iter().all(|&l| l == ls[0]) {
                    constant.push((k, ls[0]));
                } else {
                    break;
                }
            }
            if constant.len() == components.len() {
                let pairs = constant
                    .iter()
                    .map(|&(k, l)| (components[k].weight * l, components[k].endpoint))
                    .collect();
                return ExtremeMeasure::uniform(*mode, reweight(pairs)?);
            }
            let pairs = prior
                .nodes(order)
                .into_iter()
                .map(|(w, x)| Ok((w * check(x)?, x)))
                .collect::<Result<Vec<_>>>()?;
            ExtremeMeasure::dirac(reweight(pairs)?)
        }
    }
}

/// Log-likelihood of i.i.d. Gumbel observations as a function of `(ρ, β)`.
pub fn gumbel_log_likelihood(data: Vec<f64>) -> impl Fn(&[f64]) -> f64 + Send + Sync + Clone {
    move |theta: &[f64]| {
        let (rho, beta) = (theta[0], theta[1]);
        if !(beta > 0.0) {
            return f64::NEG_INFINITY;
        }
        data.iter()
            .map(|&x| {
                let z = (x - rho) / beta;
                -beta.ln() - z - (-z).exp()
            })
            .sum()
    }
}

/// `n` draws from Gumbel(`loc`, `scale`) by inversion of ChaCha8 uniforms.
pub fn synthetic_gumbel_sample(n: usize, loc: f64, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            loc - scale * (-u.ln()).ln()
        })
        .collect()
}

/// `F_Θ(h) = E_posterior[P(H <= h | Θ)]` for a posterior over `(ρ, β, Ks, Zv, Zm)`.
pub fn bayesian_failure_probability(
    posterior: &ProductMeasure,
    h: f64,
    conditional: ConditionalFailure,
    order: usize,
) -> Result<f64> {
    if posterior.dims() != 5 {
        return Err(Error::Config("posterior must be over (rho, beta, Ks, Zv, Zm)".into()));
    }
    let grid = Grid::of(posterior, order);
    Ok((0..grid.len())
        .map(|k| {
            let t = grid.point(k);
            grid.weights[k] * conditional.eval(t[0], t[1], t[2], t[3], t[4], h)
        })
        .sum())
}

/// The posterior failure probability at `h` as a [`BayesQoi`] over `(ρ, β, Ks, Zv, Zm)`.
pub fn failure_probability_qoi(data: Vec<f64>, h: f64, conditional: ConditionalFailure) -> BayesQoi {
    let ll = gumbel_log_likelihood(data);
    BayesQoi {
        label: format!("posterior P(H <= {h})"),
        likelihood_inputs: vec![0, 1],
        log_likelihood: Arc::new(ll),
        integrand: Arc::new(move |t: &[f64]| conditional.eval(t[0], t[1], t[2], t[3], t[4], h)),
    }
}

/// Posterior predictive `h ↦ E_posterior[P(H <= h | Θ)]` over `(ρ, β, Ks, Zv, Zm)`.
#[derive(Debug, Clone)]
pub struct PosteriorPredictive {
    /// `(weight, ρ, β)` normalized.
    rb: Vec<(f64, f64, f64)>,
    /// `(weight, Ks, Zv, Zm)`.
    rest: Vec<(f64, f64, f64, f64)>,
    conditional: ConditionalFailure,
}

impl PosteriorPredictive {
    pub fn new(
        prior: &ProductMeasure,
        log_likelihood: &(dyn Fn(&[f64]) -> f64 + Sync),
        conditional: ConditionalFailure,
        order: usize,
    ) -> Result<Self> {
        if prior.dims() != 5 {
            return Err(Error::Config("prior must be over (rho, beta, Ks, Zv, Zm)".into()));
        }
        let ga = Grid::tensor(&[prior.marginals[0].nodes(order), prior.marginals[1].nodes(order)]);
        let ll: Vec<f64> = (0..ga.len()).map(|k| log_likelihood(ga.point(k))).collect();
        let top = ll.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::DegeneratePosterior);
        }
        let mut rb: Vec<(f64, f64, f64)> = (0..ga.len())
            .map(|k| (ga.weights[k] * (ll[k] - top).exp(), ga.point(k)[0], ga.point(k)[1]))
            .filter(|t| t.0 > 0.0)
            .collect();
        let z: f64 = rb.iter().map(|t| t.0).sum();
        if !(z > 0.0) {
            return Err(Error::DegeneratePosterior);
        }
        for t in &mut rb {
            t.0 /= z;
        }
        let gb = Grid::tensor(&[
            prior.marginals[2].nodes(order),
            prior.marginals[3].nodes(order),
            prior.marginals[4].nodes(order),
        ]);
        let rest = (0..gb.len())
            .map(|k| {
                let p = gb.point(k);
                (gb.weights[k], p[0], p[1], p[2])
            })
            .collect();
        Ok(Self { rb, rest, conditional })
    }

    pub fn cdf(&self, h: f64) -> f64 {
        let mut acc = 0.0;
        for &(wb, ks, zv, zm) in &self.rest {
            let inner: f64 = self
                .rb
                .iter()
                .map(|&(wa, rho, beta)| wa * self.conditional.eval(rho, beta, ks, zv, zm, h))
                .sum();
            acc += wb * inner;
        }
        acc.clamp(0.0, 1.0)
    }

    /// `inf { h : cdf(h) >= p }` by bisection to `1e-9` in `h`.
    pub fn lower_quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Config(format!("quantile level {p} is outside (0, 1)")));
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut grow = 0;
        while self.cdf(hi) < p {
            lo = hi;
            hi *= 2.0;
            grow += 1;
            if grow > 60 {
                return Err(Error::Config("posterior predictive does not reach the level".into()));
            }
        }
        while hi - lo > 1e-9 * (1.0 + hi) {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) >= p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Threshold;

    #[test]
    fn constant_likelihood_is_identity() {
        let prior = ExtremeMeasure::dirac([(0.2, 1.0), (0.8, 3.0)]).unwrap();
        assert_eq!(posterior_pushforward(&prior, |_| 4.2, 32).unwrap(), prior);
        let uni = ExtremeMeasure::uniform(30.0, [(0.25, 20.0), (0.75, 41.0)]).unwrap();
        assert_eq!(posterior_pushforward(&uni, |_| 0.5, 32).unwrap(), uni);
    }

    #[test]
    fn two_atom_bayes_arithmetic() {
        let prior = ExtremeMeasure::dirac([(0.5, 0.0), (0.5, 1.0)]).unwrap();
        let post = posterior_pushforward(&prior, |x| if x == 0.0 { 1.0 } else { 3.0 }, 32).unwrap();
        assert_eq!(post.weights(), vec![0.25, 0.75]);
        assert_eq!(post.weights().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn zero_likelihood_is_degenerate() {
        let prior = ExtremeMeasure::dirac([(0.5, 0.0), (0.5, 1.0)]).unwrap();
        assert_eq!(
            posterior_pushforward(&prior, |_| 0.0, 32),
            Err(Error::DegeneratePosterior)
        );
    }

    #[test]
    fn reweighting_commutes_with_mixing() {
        let p1 = ExtremeMeasure::dirac([(0.3, 1.0), (0.7, 2.0)]).unwrap();
        let p2 = ExtremeMeasure::dirac([(0.6, 0.5), (0.4, 4.0)]).unwrap();
        let l = |x: f64| (-(x - 2.0f64).powi(2)).exp();
        let z = |p: &ExtremeMeasure| p.expectation(l).unwrap();
        let lambda = 0.35;
        let lhs = posterior_pushforward(&p1.mix(lambda, &p2).unwrap(), l, 32).unwrap();
        let beta = lambda * z(&p1) / (lambda * z(&p1) + (1.0 - lambda) * z(&p2));
        let rhs = posterior_pushforward(&p1, l, 32)
            .unwrap()
            .mix(beta, &posterior_pushforward(&p2, l, 32).unwrap())
            .unwrap();
        for (a, b) in lhs.weights().iter().zip(rhs.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn point_prior_matches_closed_form() {
        let cf = ConditionalFailure {
            threshold: Threshold::Height,
            printed_form: false,
        };
        let pm = ProductMeasure::new(vec![
            ExtremeMeasure::point(626.14),
            ExtremeMeasure::point(190.0),
            ExtremeMeasure::point(30.0),
            ExtremeMeasure::point(50.0),
            ExtremeMeasure::point(54.5),
        ]);
        let f = bayesian_failure_probability(&pm, 2.0, cf, 16).unwrap();
        assert_eq!(f, cf.eval(626.14, 190.0, 30.0, 50.0, 54.5, 2.0));
        let q = failure_probability_qoi(vec![600.0, 700.0], 2.0, cf);
        assert!((q.evaluate(&pm, 16).unwrap() - f).abs() < 1e-15);
    }

    #[test]
    fn predictive_matches_closed_form_and_inverts() {
        let cf = ConditionalFailure {
            threshold: Threshold::Height,
            printed_form: false,
        };
        let pm = ProductMeasure::new(vec![
            ExtremeMeasure::dirac([(0.5, 600.0), (0.5, 650.0)]).unwrap(),
            ExtremeMeasure::point(190.0),
            ExtremeMeasure::uniform(30.0, [(1.0, 40.0)]).unwrap(),
            ExtremeMeasure::point(50.0),
            ExtremeMeasure::point(54.5),
        ]);
        let data = synthetic_gumbel_sample(47, 626.14, 190.0, 3);
        let ll = gumbel_log_likelihood(data.clone());
        let pred = PosteriorPredictive::new(&pm, &ll, cf, 16).unwrap();
        let q = failure_probability_qoi(data, 2.5, cf);
        assert!((pred.cdf(2.5) - q.evaluate(&pm, 16).unwrap()).abs() < 1e-12);
        let h = pred.lower_quantile(0.95).unwrap();
        assert!((pred.cdf(h) - 0.95).abs() < 1e-6);
    }

    #[test]
    fn mixture_prior_is_convex_combination() {
        let cf = ConditionalFailure::default();
        let base = |rho: ExtremeMeasure| {
            ProductMeasure::new(vec![
                rho,
                ExtremeMeasure::point(190.0),
                ExtremeMeasure::point(30.0),
                ExtremeMeasure::point(50.0),
                ExtremeMeasure::point(54.5),
            ])
        };
        let h = 52.0;
        let f = |pm: &ProductMeasure| bayesian_failure_probability(pm, h, cf, 16).unwrap();
        let mixed = f(&base(ExtremeMeasure::dirac([(0.4, 560.0), (0.6, 690.0)]).unwrap()));
        let a = f(&base(ExtremeMeasure::point(560.0)));
        let b = f(&base(ExtremeMeasure::point(690.0)));
        assert!((mixed - (0.4 * a + 0.6 * b)).abs() < 1e-15);
    }
}
