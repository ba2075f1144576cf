use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use momentbound::optim::{
    bound_qoi, cdf_envelope, linearized_variance_bound, sobol_first_bound, sobol_total_bound, BoundResult, DeConfig,
    SobolStrategy,
};
use momentbound::oracle::{dominance_test, jensen_extremal_check, sobol_dominance_test, DominanceReport, JensenReport};
use momentbound::problem::{Loaded, ProblemFile};
use momentbound::qoi::{Direction, QoiKind};
use momentbound::Error;

use crate::Failure;

pub fn load(path: &Path) -> Result<Loaded, Failure> {
    let src = fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))?;
    Ok(ProblemFile::parse(&src)?.load()?)
}

fn config(loaded: &Loaded, seed: Option<u64>) -> DeConfig {
    DeConfig {
        seed: seed.unwrap_or(loaded.optimizer.seed),
        ..loaded.optimizer
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(p.to_path_buf(), e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("results serialize")
}

fn nominal(loaded: &Loaded) -> Result<&momentbound::ProductMeasure, Failure> {
    loaded
        .nominal
        .as_ref()
        .ok_or_else(|| Failure::Usage("Sobol bounds need a \"nominal\" law for every input".into()))
}

/// Bound of the problem's QoI, dispatching on its kind.
pub fn solve(loaded: &Loaded, config: &DeConfig) -> Result<BoundResult, Failure> {
    let p = &loaded.problem;
    let direction = p.qoi.direction;
    Ok(match p.qoi.kind {
        QoiKind::Variance => linearized_variance_bound(p, config)?,
        QoiKind::SobolFirst { index } => {
            sobol_first_bound(p, nominal(loaded)?, index, direction, SobolStrategy::Direct, config)?
        }
        QoiKind::SobolTotal { index } => sobol_total_bound(p, nominal(loaded)?, index, direction, config)?,
        _ => bound_qoi(p, config)?,
    })
}

pub fn bound(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    let loaded = load(path)?;
    let r = solve(&loaded, &config(&loaded, seed))?;
    emit(&json(&r), out)
}

/// Parses `lo:hi:n` into `n` evenly spaced points.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(format!("grid `{spec}` is not of the form lo:hi:n"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !(lo.is_finite() && hi.is_finite()) || hi < lo || (n == 1 && hi != lo) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

pub fn envelope(path: &Path, grid: &str, seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    let loaded = load(path)?;
    let grid = parse_grid(grid)?;
    let env = cdf_envelope(&loaded.problem, &grid, &config(&loaded, seed))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["h", "inf_cdf"]).map_err(csv_error)?;
    for (h, f) in env.h.iter().zip(&env.inf_cdf) {
        w.write_record([h.to_string(), f.to_string()]).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Usage(e.to_string()))?;
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| Failure::Io(p.to_path_buf(), e)),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| Failure::Io(PathBuf::from("<stdout>"), e)),
    }
}

fn csv_error(e: csv::Error) -> Failure {
    Failure::Usage(e.to_string())
}

pub fn sobol(
    path: &Path,
    index: usize,
    total: bool,
    direction: Direction,
    strategy: SobolStrategy,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let loaded = load(path)?;
    let i = index
        .checked_sub(1)
        .filter(|&i| i < loaded.problem.dims())
        .ok_or_else(|| Failure::Usage(format!("index {index} is not in 1..={}", loaded.problem.dims())))?;
    let cfg = config(&loaded, seed);
    let nominal = nominal(&loaded)?;
    let r = if total {
        sobol_total_bound(&loaded.problem, nominal, i, direction, &cfg)?
    } else {
        sobol_first_bound(&loaded.problem, nominal, i, direction, strategy, &cfg)?
    };
    emit(&json(&r), out)
}

#[derive(Serialize)]
struct Validation {
    bound: f64,
    dominance: DominanceReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    mixtures: Vec<JensenReport>,
}

pub fn validate(path: &Path, trials: usize, seed: Option<u64>) -> Result<(), Failure> {
    let loaded = load(path)?;
    let cfg = config(&loaded, seed);
    let p = &loaded.problem;
    let r = solve(&loaded, &cfg)?;
    let dominance = match p.qoi.kind {
        QoiKind::SobolFirst { index } => sobol_dominance_test(p, nominal(&loaded)?, index, &r, trials, cfg.seed)?,
        QoiKind::SobolTotal { .. } | QoiKind::Variance => {
            return Err(Failure::Usage(format!(
                "no randomized check for {}",
                p.qoi.kind.label()
            )))
        }
        _ => dominance_test(p, &r, trials, cfg.seed)?,
    };
    let mut mixtures = Vec::new();
    if matches!(
        p.qoi.kind,
        QoiKind::Expectation(_)
            | QoiKind::FailureProb { .. }
            | QoiKind::LowerQuantile { .. }
            | QoiKind::UpperQuantile { .. }
    ) {
        for i in 0..p.dims() {
            let per = trials.div_ceil(p.dims());
            match jensen_extremal_check(p, i, &r.argmax, per, cfg.seed + 1 + i as u64) {
                Ok(j) => mixtures.push(j),
                Err(Error::InfeasibleClass(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    let failures = dominance.violations + mixtures.iter().map(|m| m.failures).sum::<usize>();
    println!(
        "{}",
        json(&Validation {
            bound: r.value,
            dominance,
            mixtures
        })
    );
    if failures > 0 {
        return Err(Failure::Violations(failures));
    }
    Ok(())
}
