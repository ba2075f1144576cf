//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each operation takes and returns JSON strings. The plain functions are
//! usable natively; the `#[wasm_bindgen]` wrappers only convert errors.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use momentbound::case_study as cs;
use momentbound::measure::{ExtremeMeasure, Interval};
use momentbound::optim::{bound_qoi, linearized_variance_bound, BoundResult, DeConfig};
use momentbound::param::moments_to_quadrature;
use momentbound::problem::ProblemFile;
use momentbound::qoi::{EvalSettings, QoiKind};

#[derive(Serialize)]
struct Atoms {
    atoms: Vec<(f64, f64)>,
    degenerate: bool,
}

/// Atoms `(weight, location)` of the quadrature rule reproducing `m_0..m_k` on `[lo, hi]`.
pub fn quadrature(moments: &str, lo: f64, hi: f64) -> Result<String, String> {
    let m: Vec<f64> = serde_json::from_str(moments).map_err(|e| format!("moments: {e}"))?;
    let iv = Interval::new(lo, hi).map_err(|e| e.to_string())?;
    let q = moments_to_quadrature(&m, iv).map_err(|e| e.to_string())?;
    let atoms = match &q.measure {
        ExtremeMeasure::Dirac { atoms } => atoms.iter().map(|a| (a.weight, a.location)).collect(),
        _ => Vec::new(),
    };
    to_json(&Atoms {
        atoms,
        degenerate: q.degenerate,
    })
}

/// Bound of the QoI in a problem file.
pub fn bound(problem: &str) -> Result<String, String> {
    let loaded = ProblemFile::parse(problem)
        .and_then(|f| f.load())
        .map_err(|e| e.to_string())?;
    let p = &loaded.problem;
    let r = match p.qoi.kind {
        QoiKind::SobolFirst { .. } | QoiKind::SobolTotal { .. } => {
            return Err("Sobol bounds are available from the command line".into())
        }
        QoiKind::Variance => linearized_variance_bound(p, &loaded.optimizer),
        _ => bound_qoi(p, &loaded.optimizer),
    }
    .map_err(|e| e.to_string())?;
    summary(&r)
}

/// Upper bound of the `p`-quantile of the flood height with coarse settings.
pub fn flood_quantile(p: f64, generations: usize, seed: u64) -> Result<String, String> {
    let problem = cs::quantile_problem(p)
        .map_err(|e| e.to_string())?
        .with_settings(EvalSettings {
            quadrature_order: 8,
            cdf_cells: 8,
            table_nodes: 16,
            nominal_order: 16,
        });
    let cfg = DeConfig {
        max_generations: generations,
        seed,
        ..DeConfig::default()
    };
    summary(&bound_qoi(&problem, &cfg).map_err(|e| e.to_string())?)
}

#[derive(Serialize)]
struct Summary<'a> {
    qoi: &'a str,
    value: f64,
    generations: usize,
    marginals: Vec<serde_json::Value>,
}

fn summary(r: &BoundResult) -> Result<String, String> {
    let marginals = r
        .argmax
        .marginals
        .iter()
        .map(|m| serde_json::to_value(m).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    to_json(&Summary {
        qoi: &r.qoi,
        value: r.value,
        generations: r.trace.len(),
        marginals,
    })
}

fn to_json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string_pretty(v).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = quadrature)]
pub fn quadrature_js(moments: &str, lo: f64, hi: f64) -> Result<String, JsError> {
    quadrature(moments, lo, hi).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = bound)]
pub fn bound_js(problem: &str) -> Result<String, JsError> {
    bound(problem).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = floodQuantile)]
pub fn flood_quantile_js(p: f64, generations: usize, seed: u64) -> Result<String, JsError> {
    flood_quantile(p, generations, seed).map_err(|e| JsError::new(&e))
}
