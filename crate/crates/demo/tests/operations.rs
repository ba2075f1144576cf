use momentbound_demo::{bound, flood_quantile, quadrature};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn two_point_gauss_rule_from_uniform_moments() {
    let r = parse(&quadrature("[1, 0.5, 0.3333333333333333, 0.25]", 0.0, 1.0).unwrap());
    let atoms = r["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 2);
    let d = 0.5 / 3f64.sqrt();
    for (a, x) in atoms.iter().zip([0.5 - d, 0.5 + d]) {
        assert!((a[0].as_f64().unwrap() - 0.5).abs() < 1e-12);
        assert!((a[1].as_f64().unwrap() - x).abs() < 1e-12);
    }
    assert_eq!(r["degenerate"], false);
}

#[test]
fn quadrature_rejects_bad_input() {
    assert!(quadrature("[1, 0.5", 0.0, 1.0).unwrap_err().starts_with("moments"));
    assert!(quadrature("[1, 2.0, 4.0]", 0.0, 1.0).is_err());
}

#[test]
fn expectation_bound_of_a_one_dimensional_problem() {
    let problem = r#"{
      "inputs": [{"name": "x", "support": [0, 1],
                  "constraints": [{"kind": "raw_moment", "order": 1, "relation": "eq", "bound": 0.5}]}],
      "model": {"kind": "expr", "expr": "x^2"},
      "qoi": {"kind": "expectation", "params": {"expr": "y"}, "direction": "sup"},
      "optimizer": {"max_generations": 80, "seed": 3}
    }"#;
    let r = parse(&bound(problem).unwrap());
    // two atoms at the ends of [0, 1] maximize E[x^2] under mean 1/2
    assert!((r["value"].as_f64().unwrap() - 0.5).abs() < 1e-6, "{r}");
}

#[test]
fn sobol_problems_are_refused() {
    let problem = r#"{
      "inputs": [{"name": "x", "support": [0, 1], "nominal": {"kind": "uniform", "lo": 0, "hi": 1}}],
      "model": {"kind": "expr", "expr": "x"},
      "qoi": {"kind": "sobol_first", "params": {"index": 1}, "direction": "sup"},
      "optimizer": {}
    }"#;
    assert!(bound(problem).unwrap_err().contains("command line"));
    assert!(bound("{").is_err());
}

#[test]
fn coarse_flood_quantile_is_above_the_nominal_one() {
    let r = parse(&flood_quantile(0.95, 20, 1).unwrap());
    let v = r["value"].as_f64().unwrap();
    assert!(v > 2.6 && v < 3.3, "{v}");
    assert_eq!(r["marginals"].as_array().unwrap().len(), 4);
}
