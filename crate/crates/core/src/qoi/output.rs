//! Law of the model output under a product of extreme measures.

use serde::{Deserialize, Serialize};

use crate::cdf::{PiecewiseCdf, Segment};
use crate::error::Result;
use crate::measure::{ExtremeMeasure, ProductMeasure};
use crate::models::Model;

/// Discretization parameters for output laws and expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    /// Gauss–Legendre nodes per uniform component in tensor grids.
    pub quadrature_order: usize,
    /// Equal cells per uniform component of the marginal whose CDF is resolved exactly.
    pub cdf_cells: usize,
    /// Chebyshev nodes used to tabulate conditional expectations.
    pub table_nodes: usize,
    /// Gauss–Legendre nodes used to discretize non-uniform nominal laws.
    pub nominal_order: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            quadrature_order: 64,
            cdf_cells: 64,
            table_nodes: 64,
            nominal_order: 64,
        }
    }
}

/// Weighted points of the tensor product of per-marginal nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dims: usize,
    pub weights: Vec<f64>,
    /// Row-major, `dims` coordinates per point.
    pub points: Vec<f64>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dims..(k + 1) * self.dims]
    }

    /// Tensor product of weighted node lists.
    pub fn tensor(nodes: &[Vec<(f64, f64)>]) -> Self {
        let dims = nodes.len();
        let total: usize = nodes.iter().map(Vec::len).product();
        let mut weights = Vec::with_capacity(total);
        let mut points = Vec::with_capacity(total * dims);
        let mut idx = vec![0usize; dims];
        if nodes.iter().any(Vec::is_empty) {
            return Self { dims, weights, points };
        }
        loop {
            let mut w = 1.0;
            for (j, &k) in idx.iter().enumerate() {
                w *= nodes[j][k].0;
                points.push(nodes[j][k].1);
            }
            weights.push(w);
            // odometer, last coordinate fastest
            let mut j = dims;
            loop {
                if j == 0 {
                    return Self { dims, weights, points };
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < nodes[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
    }

    pub fn of(pm: &ProductMeasure, order: usize) -> Self {
        let nodes: Vec<_> = pm.marginals.iter().map(|m| m.nodes(order)).collect();
        Self::tensor(&nodes)
    }

    /// Model values at every point.
    pub fn values(&self, model: &dyn Model) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|k| model.eval(self.point(k)).map_err(Into::into))
            .collect()
    }
}

/// The law of `Y = G(X)` as weighted atoms and uniform segments.
#[derive(Debug, Clone)]
pub struct OutputDistribution {
    pub atoms: Vec<(f64, f64)>,
    pub segments: Vec<Segment>,
    cdf: PiecewiseCdf,
}

impl OutputDistribution {
    pub fn new(atoms: Vec<(f64, f64)>, segments: Vec<Segment>) -> Self {
        let cdf = PiecewiseCdf::new(&atoms, &segments);
        Self { atoms, segments, cdf }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        self.cdf.cdf(t)
    }

    pub fn lower_quantile(&self, p: f64) -> f64 {
        self.cdf.lower_quantile(p)
    }

    pub fn upper_quantile(&self, p: f64) -> f64 {
        self.cdf.upper_quantile(p)
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        self.cdf.support()
    }

    pub fn piecewise_cdf(&self) -> &PiecewiseCdf {
        &self.cdf
    }
}

fn resolved_marginal(pm: &ProductMeasure) -> Option<usize> {
    pm.marginals.iter().position(|m| match m {
        ExtremeMeasure::Uniform { mode, components } => {
            components.iter().any(|c| c.weight > 0.0 && c.endpoint != *mode)
        }
        ExtremeMeasure::Dirac { .. } => false,
    })
}

/// Pushes `pm` forward through `model`.
///
/// With Dirac marginals only the output is the exact finite law. Otherwise the
/// first marginal carrying uniform components is cut into equal cells, on each
/// of which the model is interpolated linearly between the cell ends, giving
/// uniform output segments; the remaining uniform marginals contribute their
/// Gauss–Legendre nodes.
pub fn pushforward(pm: &ProductMeasure, model: &dyn Model, settings: &EvalSettings) -> Result<OutputDistribution> {
    let Some(s) = resolved_marginal(pm) else {
        let grid = Grid::of(pm, settings.quadrature_order);
        let ys = grid.values(model)?;
        return Ok(OutputDistribution::new(
            grid.weights.into_iter().zip(ys).collect(),
            vec![],
        ));
    };
    let ExtremeMeasure::Uniform { mode, components } = &pm.marginals[s] else {
        unreachable!("resolved marginal is a uniform mixture")
    };
    let others: Vec<Vec<(f64, f64)>> = pm
        .marginals
        .iter()
        .enumerate()
        .map(|(j, m)| {
            if j == s {
                vec![(1.0, *mode)]
            } else {
                m.nodes(settings.quadrature_order)
            }
        })
        .collect();
    let grid = Grid::tensor(&others);
    let cells = settings.cdf_cells.max(1);
    let mut atoms = Vec::new();
    let mut segments = Vec::new();
    let mut x = vec![0.0; pm.dims()];
    let mut vals = vec![0.0; cells + 1];
    for k in 0..grid.len() {
        let w0 = grid.weights[k];
        x.copy_from_slice(grid.point(k));
        for c in components.iter().filter(|c| c.weight > 0.0) {
            let w = w0 * c.weight;
            if c.endpoint == *mode {
                x[s] = *mode;
                atoms.push((w, model.eval(&x)?));
                continue;
            }
            for (j, v) in vals.iter_mut().enumerate() {
                x[s] = mode + (c.endpoint - mode) * j as f64 / cells as f64;
                *v = model.eval(&x)?;
            }
            let wc = w / cells as f64;
            for j in 0..cells {
                let (a, b) = (vals[j], vals[j + 1]);
                if a == b {
                    atoms.push((wc, a));
                } else {
                    segments.push(Segment {
                        weight: wc,
                        lo: a.min(b),
                        hi: a.max(b),
                    });
                }
            }
        }
    }
    Ok(OutputDistribution::new(atoms, segments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ExprModel, Hydraulic};

    fn model(src: &str, d: usize) -> ExprModel {
        let names: Vec<String> = (0..d).map(|k| format!("v{k}")).collect();
        ExprModel::new(src, &names).unwrap()
    }

    #[test]
    fn dirac_pushforward_is_exact() {
        let pm = ProductMeasure::new(vec![ExtremeMeasure::dirac([(0.3, 1.0), (0.7, 2.0)]).unwrap()]);
        let out = pushforward(&pm, &model("x^2", 1), &EvalSettings::default()).unwrap();
        assert_eq!(out.atoms, vec![(0.3, 1.0), (0.7, 4.0)]);
        assert!(out.segments.is_empty());
    }

    #[test]
    fn sixteen_atoms_at_most() {
        let j = ExtremeMeasure::dirac([(0.5, 500.0), (0.5, 1000.0)]).unwrap();
        let ks = ExtremeMeasure::dirac([(0.5, 25.0), (0.5, 35.0)]).unwrap();
        let zv = ExtremeMeasure::dirac([(0.5, 49.5), (0.5, 50.5)]).unwrap();
        let zm = ExtremeMeasure::dirac([(0.5, 54.2), (0.5, 54.8)]).unwrap();
        let out = pushforward(
            &ProductMeasure::new(vec![j, ks, zv, zm]),
            &Hydraulic::Height,
            &EvalSettings::default(),
        )
        .unwrap();
        assert_eq!(out.atoms.len(), 16);
    }

    #[test]
    fn uniform_input_gives_exact_linear_cdf() {
        let pm = ProductMeasure::new(vec![ExtremeMeasure::uniform(0.0, [(1.0, 1.0)]).unwrap()]);
        let out = pushforward(&pm, &model("x", 1), &EvalSettings::default()).unwrap();
        assert!((out.lower_quantile(0.95) - 0.95).abs() < 1e-12);
        assert!((out.cdf(0.3) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn grid_weights_sum_to_one() {
        let pm = ProductMeasure::new(vec![
            ExtremeMeasure::uniform(30.0, [(0.4, 20.0), (0.6, 40.0)]).unwrap(),
            ExtremeMeasure::dirac([(0.25, 1.0), (0.75, 2.0)]).unwrap(),
        ]);
        let g = Grid::of(&pm, 8);
        assert_eq!(g.len(), 32);
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
