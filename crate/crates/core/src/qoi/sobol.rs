//! First-order and total Sobol indices by enumeration over conditioning strata.

use crate::error::{Error, Result};
use crate::measure::{ExtremeMeasure, Interval, ProductMeasure};
use crate::models::Model;

use super::output::{EvalSettings, Grid};

/// Model values arranged as `strata of input i × points of the other inputs`.
struct Split {
    wi: Vec<f64>,
    wo: Vec<f64>,
    /// `y[a * wo.len() + b]`
    y: Vec<f64>,
}

fn split(pm: &ProductMeasure, model: &dyn Model, i: usize, order: usize) -> Result<Split> {
    if i >= pm.dims() {
        return Err(Error::UndefinedIndex(format!("input {} of {}", i + 1, pm.dims())));
    }
    let strata = pm.marginals[i].nodes(order);
    let others: Vec<Vec<(f64, f64)>> = pm
        .marginals
        .iter()
        .enumerate()
        .map(|(j, m)| if j == i { vec![(1.0, 0.0)] } else { m.nodes(order) })
        .collect();
    let grid = Grid::tensor(&others);
    let mut y = Vec::with_capacity(strata.len() * grid.len());
    let mut x = vec![0.0; pm.dims()];
    for &(_, xi) in &strata {
        for b in 0..grid.len() {
            x.copy_from_slice(grid.point(b));
            x[i] = xi;
            y.push(model.eval(&x)?);
        }
    }
    Ok(Split {
        wi: strata.iter().map(|s| s.0).collect(),
        wo: grid.weights,
        y,
    })
}

/// Relative variance below which indices are undefined.
const VARIANCE_FLOOR: f64 = 1e-13;

/// `(S_i, S_Ti)` of input `i` (zero-based) under `pm`.
pub fn sobol_indices(pm: &ProductMeasure, model: &dyn Model, i: usize, settings: &EvalSettings) -> Result<(f64, f64)> {
    let s = split(pm, model, i, settings.quadrature_order)?;
    let nb = s.wo.len();
    let (mut m1, mut m2, mut first, mut total) = (0.0, 0.0, 0.0, 0.0);
    for (a, &wa) in s.wi.iter().enumerate() {
        let row = &s.y[a * nb..(a + 1) * nb];
        let g1: f64 = row.iter().zip(&s.wo).map(|(y, w)| w * y).sum();
        let g2: f64 = row.iter().zip(&s.wo).map(|(y, w)| w * y * y).sum();
        m1 += wa * g1;
        m2 += wa * g2;
        first += wa * g1 * g1;
    }
    for (b, &wb) in s.wo.iter().enumerate() {
        let (mut c1, mut c2) = (0.0, 0.0);
        for (a, &wa) in s.wi.iter().enumerate() {
            let y = s.y[a * nb + b];
            c1 += wa * y;
            c2 += wa * y * y;
        }
        total += wb * (c2 - c1 * c1).max(0.0);
    }
    let var = m2 - m1 * m1;
    if !(var > VARIANCE_FLOOR * m2.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::UndefinedIndex(format!(
            "output variance {var} is zero, Sobol index of input {} is undefined",
            i + 1
        )));
    }
    Ok((((first - m1 * m1) / var).clamp(0.0, 1.0), (total / var).clamp(0.0, 1.0)))
}

pub fn sobol_first(pm: &ProductMeasure, model: &dyn Model, i: usize, settings: &EvalSettings) -> Result<f64> {
    sobol_indices(pm, model, i, settings).map(|s| s.0)
}

pub fn sobol_total(pm: &ProductMeasure, model: &dyn Model, i: usize, settings: &EvalSettings) -> Result<f64> {
    sobol_indices(pm, model, i, settings).map(|s| s.1)
}

/// `g1(x) = E[Y | X_i = x]` and `g2(x) = E[Y² | X_i = x]` with the other inputs
/// fixed, tabulated at Chebyshev points of the support of `X_i` and
/// interpolated barycentrically.
#[derive(Debug, Clone)]
pub struct ConditionalTable {
    interval: Interval,
    nodes: Vec<f64>,
    bary: Vec<f64>,
    g1: Vec<f64>,
    g2: Vec<f64>,
    order: usize,
}

impl ConditionalTable {
    /// `others` holds the fixed marginals; its entry `i` is ignored.
    pub fn build(
        model: &dyn Model,
        others: &ProductMeasure,
        i: usize,
        interval: Interval,
        settings: &EvalSettings,
    ) -> Result<Self> {
        let n = settings.table_nodes.max(2);
        let nodes: Vec<f64> = (0..n)
            .map(|j| {
                let t = (std::f64::consts::PI * j as f64 / (n - 1) as f64).cos();
                interval.lo + 0.5 * (1.0 - t) * interval.width()
            })
            .collect();
        let bary: Vec<f64> = (0..n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let strata = ExtremeMeasure::dirac(nodes.iter().map(|&x| (1.0 / n as f64, x)))?;
        let s = split(&others.with_marginal(i, strata), model, i, settings.quadrature_order)?;
        let nb = s.wo.len();
        let mut g1 = Vec::with_capacity(n);
        let mut g2 = Vec::with_capacity(n);
        for a in 0..n {
            let row = &s.y[a * nb..(a + 1) * nb];
            g1.push(row.iter().zip(&s.wo).map(|(y, w)| w * y).sum());
            g2.push(row.iter().zip(&s.wo).map(|(y, w)| w * y * y).sum());
        }
        Ok(Self {
            interval,
            nodes,
            bary,
            g1,
            g2,
            order: settings.quadrature_order,
        })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    /// `(g1(x), g2(x))`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let (mut num1, mut num2, mut den) = (0.0, 0.0, 0.0);
        for (j, &xj) in self.nodes.iter().enumerate() {
            let d = x - xj;
            if d == 0.0 {
                return (self.g1[j], self.g2[j]);
            }
            let c = self.bary[j] / d;
            num1 += c * self.g1[j];
            num2 += c * self.g2[j];
            den += c;
        }
        (num1 / den, num2 / den)
    }

    /// `(E[g1], E[g1²], E[g2])` under a marginal law of `X_i`.
    pub fn moments(&self, m: &ExtremeMeasure) -> Result<(f64, f64, f64)> {
        let mut out = (0.0, 0.0, 0.0);
        for k in 0..m.n_components() {
            let w = m.component_weight(k);
            if w <= 0.0 {
                continue;
            }
            let (a, b, c) = self.component_moments(m, k)?;
            out.0 += w * a;
            out.1 += w * b;
            out.2 += w * c;
        }
        Ok(out)
    }

    /// `(E[g1], E[g1²], E[g2])` under one mixture component.
    pub fn component_moments(&self, m: &ExtremeMeasure, k: usize) -> Result<(f64, f64, f64)> {
        let mut unit = vec![0.0; m.n_components()];
        unit[k] = 1.0;
        let mut out = (0.0, 0.0, 0.0);
        for (w, x) in m.with_weights(&unit)?.nodes(self.order) {
            let (g1, g2) = self.eval(x);
            out.0 += w * g1;
            out.1 += w * g1 * g1;
            out.2 += w * g2;
        }
        Ok(out)
    }

    /// First-order index of `X_i ~ m` with the other inputs as tabulated.
    pub fn sobol_first(&self, m: &ExtremeMeasure) -> Result<f64> {
        let (e1, e11, e2) = self.moments(m)?;
        let var = e2 - e1 * e1;
        if !(var > VARIANCE_FLOOR * e2.abs().max(f64::MIN_POSITIVE)) {
            return Err(Error::UndefinedIndex("output variance is zero".into()));
        }
        Ok(((e11 - e1 * e1) / var).clamp(0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ExprModel;

    fn model(src: &str, d: usize) -> ExprModel {
        let names: Vec<String> = (0..d).map(|k| format!("v{k}")).collect();
        ExprModel::new(src, &names).unwrap()
    }

    fn sym(v: f64) -> ExtremeMeasure {
        let s = v.sqrt();
        ExtremeMeasure::dirac([(0.5, -s), (0.5, s)]).unwrap()
    }

    #[test]
    fn additive_model_matches_anova() {
        let (v1, v2) = (2.0, 3.0);
        let pm = ProductMeasure::new(vec![sym(v1), sym(v2)]);
        let m = model("x1 + x2", 2);
        let (s1, t1) = sobol_indices(&pm, &m, 0, &EvalSettings::default()).unwrap();
        assert!((s1 - v1 / (v1 + v2)).abs() < 1e-14);
        assert!((t1 - s1).abs() < 1e-14);
    }

    #[test]
    fn inert_input_has_zero_indices() {
        let pm = ProductMeasure::new(vec![sym(1.0), sym(2.0)]);
        let m = model("x1^2 + 3*x1", 2);
        let (s, t) = sobol_indices(&pm, &m, 1, &EvalSettings::default()).unwrap();
        assert!(s.abs() < 1e-12 && t.abs() < 1e-12, "{s} {t}");
    }

    #[test]
    fn interaction_separates_first_and_total() {
        let pm = ProductMeasure::new(vec![
            ExtremeMeasure::uniform(0.0, [(1.0, 1.0)]).unwrap(),
            ExtremeMeasure::dirac([(0.3, 1.0), (0.7, 2.0)]).unwrap(),
        ]);
        let m = model("x1 * x2 + x1", 2);
        for i in 0..2 {
            let (s, t) = sobol_indices(&pm, &m, i, &EvalSettings::default()).unwrap();
            assert!(s <= t + 1e-12, "S={s} ST={t}");
        }
    }

    #[test]
    fn constant_output_is_undefined() {
        let pm = ProductMeasure::new(vec![sym(1.0)]);
        assert!(matches!(
            sobol_first(&pm, &model("2", 1), 0, &EvalSettings::default()),
            Err(Error::UndefinedIndex(_))
        ));
    }

    #[test]
    fn table_reproduces_enumeration() {
        let others = ProductMeasure::new(vec![
            ExtremeMeasure::point(0.0),
            ExtremeMeasure::uniform(1.0, [(0.5, 2.0), (0.5, 0.5)]).unwrap(),
        ]);
        let m = model("x1^0.6 * x2 + x2^2", 2);
        let iv = Interval::new(1.0, 10.0).unwrap();
        let table = ConditionalTable::build(&m, &others, 0, iv, &EvalSettings::default()).unwrap();
        let mu = ExtremeMeasure::dirac([(0.2, 1.5), (0.5, 4.0), (0.3, 9.0)]).unwrap();
        let direct = sobol_first(&others.with_marginal(0, mu.clone()), &m, 0, &EvalSettings::default()).unwrap();
        assert!((table.sobol_first(&mu).unwrap() - direct).abs() < 1e-10);
    }
}
