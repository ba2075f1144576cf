//! Acceptance suite for the flood study and the core machinery.
//!
//! Runs without the test harness and prints one line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use momentbound::case_study as cs;
use momentbound::measure::{ExtremeMeasure, Interval, MarginalClass, ProductMeasure};
use momentbound::models::ExprModel;
use momentbound::optim::{
    bound_qoi, bound_qoi_best_of, robust_posterior_quantile, sobol_first_bound, BoundResult, DeConfig, Problem,
    SobolStrategy,
};
use momentbound::oracle::{
    dominance_test, jensen_extremal_check, mc_reference, random_interior, sobol_dominance_test, DominanceReport,
};
use momentbound::param::{canonical_to_moments, moments_to_canonical, moments_to_quadrature, CanonicalSeq};
use momentbound::qoi::{
    bayesian_failure_probability, lower_quantile, posterior_pushforward, pushforward, sobol_first, upper_quantile,
    Direction, EvalSettings, OutputFn, QoiKind, QoiSpec,
};

type Outcome = Result<(bool, String), String>;

struct Report {
    lines: Vec<(usize, bool)>,
}

impl Report {
    fn record(&mut self, n: usize, started: Instant, outcome: Outcome) {
        let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        let line = format!(
            "criterion {n}: {} ({detail}) [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
        println!("{line}");
        self.lines.push((n, pass));
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn quantile_q95() -> QoiKind {
    QoiKind::LowerQuantile { p: 0.95 }
}

fn criterion_1() -> Result<(bool, String, f64), String> {
    let q = mc_reference(&cs::nominals(), &*cs::model(), &quantile_q95(), 1_000_000, 2024).map_err(err)?;
    Ok((
        (q - 2.75).abs() <= 0.05,
        format!("Monte Carlo Q95 = {q:.4} m, target 2.75 +/- 0.05"),
        q,
    ))
}

fn criterion_2(nominal_q: f64) -> Result<(bool, String, Problem, BoundResult), String> {
    let p = cs::quantile_problem(0.95).map_err(err)?;
    let r = bound_qoi_best_of(&p, &DeConfig::default(), &[0, 1, 2]).map_err(err)?;
    let ok = (2.95..=3.15).contains(&r.value) && r.value >= nominal_q && r.feasibility.max_violation == 0.0;
    let detail = format!(
        "sup Q95 = {:.4} m over seeds 0..3, target [2.95, 3.15] and >= {nominal_q:.4}",
        r.value
    );
    Ok((ok, detail, p, r))
}

struct SobolRun {
    problem: Problem,
    nominal: ProductMeasure,
    bounds: Vec<(BoundResult, BoundResult)>,
}

fn criterion_3() -> Result<(bool, String, SobolRun), String> {
    let qoi = QoiSpec::new(QoiKind::SobolFirst { index: 0 }, Direction::Sup).map_err(err)?;
    let problem = cs::problem(qoi).map_err(err)?;
    let nominal = cs::nominal_measure(64);
    let cfg = DeConfig::default();
    let mut bounds = Vec::new();
    let mut bracket = true;
    let mut parts = Vec::new();
    for i in 0..4 {
        let s0 = sobol_first(&nominal, &*cs::model(), i, &problem.settings).map_err(err)?;
        let lo = sobol_first_bound(&problem, &nominal, i, Direction::Inf, SobolStrategy::Direct, &cfg).map_err(err)?;
        let hi = sobol_first_bound(&problem, &nominal, i, Direction::Sup, SobolStrategy::Direct, &cfg).map_err(err)?;
        bracket &= lo.value <= s0 + 1e-9 && s0 <= hi.value + 1e-9;
        parts.push(format!(
            "{}: {:.3} <= {s0:.3} <= {:.3}",
            cs::NAMES[i],
            lo.value,
            hi.value
        ));
        bounds.push((lo, hi));
    }
    // the same bound with the mode constraint on Ks dropped
    let mut relaxed = problem.clone();
    let ks = &relaxed.classes[1];
    relaxed.classes[1] = MarginalClass::new(ks.support, ks.constraints.clone(), None).map_err(err)?;
    let ks_relaxed =
        sobol_first_bound(&relaxed, &nominal, 1, Direction::Sup, SobolStrategy::Direct, &cfg).map_err(err)?;

    let s_j = bounds[0].0.value;
    let s_ks = bounds[1].1.value;
    let ok =
        (s_j - 0.39).abs() <= 0.05 && (ks_relaxed.value - 0.55).abs() <= 0.05 && bracket && s_ks <= ks_relaxed.value;
    let detail = format!(
        "S_J^- = {s_j:.3} (target 0.39 +/- 0.05); S_Ks^+ = {:.3} over the Ks moment class without mode (target 0.55 +/- 0.05), \
         {s_ks:.3} with mode 30; {}",
        ks_relaxed.value,
        parts.join(", ")
    );
    Ok((
        ok,
        detail,
        SobolRun {
            problem,
            nominal,
            bounds,
        },
    ))
}

fn criterion_4(robust_q: f64) -> Outcome {
    // constant likelihood leaves the prior unchanged
    let uni = ExtremeMeasure::uniform(30.0, [(0.4, 20.0), (0.6, 41.0)]).map_err(err)?;
    let dirac = ExtremeMeasure::dirac([(0.2, 600.0), (0.3, 640.0), (0.5, 690.0)]).map_err(err)?;
    let mut identity_gap: f64 = 0.0;
    for m in [&uni, &dirac] {
        let post = posterior_pushforward(m, |_| 0.37, 32).map_err(err)?;
        for (a, b) in post.weights().iter().zip(m.weights()) {
            identity_gap = identity_gap.max((a - b).abs());
        }
    }
    let two = ExtremeMeasure::dirac([(0.5, 0.0), (0.5, 1.0)]).map_err(err)?;
    let post = posterior_pushforward(&two, |x| if x == 0.0 { 1.0 } else { 3.0 }, 32).map_err(err)?;
    let arithmetic = post.weights() == vec![0.25, 0.75];

    let order = 16;
    let posterior = cs::mle_prior(order);
    let grid: Vec<f64> = (0..50).map(|k| 0.5 + 4.5 * k as f64 / 49.0).collect();
    let mut f = Vec::with_capacity(grid.len());
    for &h in &grid {
        f.push(bayesian_failure_probability(&posterior, h, cs::conditional(), order).map_err(err)?);
    }
    let monotone = f.windows(2).all(|w| w[1] >= w[0]);

    let settings = EvalSettings {
        quadrature_order: 16,
        ..EvalSettings::default()
    };
    let cfg = DeConfig {
        max_generations: 200,
        ..DeConfig::default()
    };
    let r = robust_posterior_quantile(
        cs::prior_classes(),
        cs::synthetic_flows(0),
        cs::conditional(),
        0.95,
        settings,
        &cfg,
    )
    .map_err(err)?;
    let ok = identity_gap <= 1e-15 && arithmetic && monotone && r.value >= robust_q - 0.1;
    Ok((
        ok,
        format!(
            "identity gap {identity_gap:e}, two-atom weights {:?}, F monotone on 50 points: {monotone}, \
             robust posterior Q95 = {:.4} m >= {:.4}",
            post.weights(),
            r.value,
            robust_q - 0.1
        ),
    ))
}

fn summarize(name: &str, r: &DominanceReport) -> String {
    format!("{name} {}/{} beyond {:.4}", r.violations, r.trials, r.bound)
}

fn criterion_5(quantile: (&Problem, &BoundResult), sobol: &SobolRun) -> Outcome {
    let cfg = DeConfig::default();
    let expectation =
        cs::problem(QoiSpec::new(QoiKind::Expectation(OutputFn::identity()), Direction::Sup).map_err(err)?)
            .map_err(err)?;
    let failure =
        cs::problem(QoiSpec::new(QoiKind::FailureProb { h: 2.5 }, Direction::Inf).map_err(err)?).map_err(err)?;
    let mut reports = Vec::new();
    for (name, p) in [("E[H]", &expectation), ("P(H <= 2.5)", &failure)] {
        let b = bound_qoi(p, &cfg).map_err(err)?;
        reports.push((name, dominance_test(p, &b, 200, 11).map_err(err)?));
    }
    reports.push(("Q95", dominance_test(quantile.0, quantile.1, 200, 12).map_err(err)?));
    let ks_sup = &sobol.bounds[1].1;
    reports.push((
        "S_Ks",
        sobol_dominance_test(&sobol.problem, &sobol.nominal, 1, ks_sup, 200, 13).map_err(err)?,
    ));
    let ok = reports.iter().all(|(_, r)| r.passed());
    let detail = reports
        .iter()
        .map(|(n, r)| summarize(n, r))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((ok, detail))
}

fn criterion_6(sobol: &SobolRun) -> Outcome {
    let p = cs::problem(QoiSpec::new(QoiKind::Expectation(OutputFn::identity()), Direction::Sup).map_err(err)?)
        .map_err(err)?
        .with_settings(EvalSettings {
            quadrature_order: 16,
            ..EvalSettings::default()
        });
    let base = cs::nominal_measure(16);
    let mut gap: f64 = 0.0;
    let mut failures = 0;
    for i in 0..4 {
        let r = jensen_extremal_check(&p, i, &base, 250, 20 + i as u64).map_err(err)?;
        gap = gap.max(r.max_gap);
        failures += r.failures;
    }
    let mut violations = 0;
    let mut trials = 0;
    for (i, (lo, hi)) in sobol.bounds.iter().enumerate() {
        for b in [lo, hi] {
            let r = sobol_dominance_test(&sobol.problem, &sobol.nominal, i, b, 50, 30 + i as u64).map_err(err)?;
            violations += r.violations;
            trials += r.trials;
        }
    }
    Ok((
        failures == 0 && violations == 0,
        format!(
            "barycentric identity on 1000 mixtures, max gap {gap:e}; Sobol ratio dominance {violations}/{trials} violations"
        ),
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // Moment sequences of random finite mixtures, strictly inside the moment space.
    let mut moment_trip: f64 = 0.0;
    let mut reproduce: f64 = 0.0;
    for _ in 0..1000 {
        let lo = rng.random_range(-5.0..5.0);
        let iv = Interval::new(lo, lo + rng.random_range(0.5..10.0)).map_err(err)?;
        let n = rng.random_range(1..=5usize);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        let mix =
            ExtremeMeasure::dirac((0..n).map(|i| (w[i] / total, iv.from_unit(rng.random::<f64>())))).map_err(err)?;
        let k = rng.random_range(1..=(2 * n as u32 - 1).min(8));
        let m: Vec<f64> = (1..=k).map(|j| mix.raw_moment(j)).collect();
        let back = canonical_to_moments(&moments_to_canonical(&m, iv).map_err(err)?);
        for (a, b) in back.iter().zip(&m) {
            moment_trip = moment_trip.max((a - b).abs() / b.abs().max(1.0));
        }
        let mut full = vec![1.0];
        full.extend_from_slice(&m);
        let q = moments_to_quadrature(&full, iv).map_err(err)?;
        for (j, mj) in m.iter().enumerate() {
            let got = q.measure.raw_moment(j as u32 + 1);
            reproduce = reproduce.max((got - mj).abs() / mj.abs().max(1.0));
        }
    }
    // Canonical sequences on the unit interval up to order 6.
    let unit_iv = Interval::new(0.0, 1.0).map_err(err)?;
    let mut canonical_trip: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=6);
        let p: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..0.95)).collect();
        let m = canonical_to_moments(&CanonicalSeq::new(p.clone(), unit_iv).map_err(err)?);
        let back = moments_to_canonical(&m, unit_iv).map_err(err)?;
        for (a, b) in back.p.iter().zip(&p) {
            canonical_trip = canonical_trip.max((a - b).abs());
        }
    }
    let unit = moments_to_canonical(&[0.5, 1.0 / 3.0, 0.25], unit_iv).map_err(err)?;
    let prefix = [0.5, 1.0 / 3.0, 0.5];
    let prefix_gap = unit
        .p
        .iter()
        .zip(prefix)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((
        moment_trip <= 1e-10 && canonical_trip <= 1e-10 && reproduce <= 1e-8 && prefix_gap <= 1e-12,
        format!(
            "moment round trip {moment_trip:e}, canonical round trip {canonical_trip:e}, \
             quadrature moments {reproduce:e}, uniform prefix {prefix_gap:e}"
        ),
    ))
}

fn criterion_8() -> Outcome {
    let names = vec!["a".to_string()];
    let id = ExprModel::new("a", &names).map_err(err)?;
    let s = EvalSettings::default();
    let split = ProductMeasure::new(vec![ExtremeMeasure::dirac([(0.5, 1.0), (0.5, 2.0)]).map_err(err)?]);
    let ql = lower_quantile(&split, &id, 0.5, &s).map_err(err)?;
    let qr = upper_quantile(&split, &id, 0.5, &s).map_err(err)?;
    let atom_split = ql == 1.0 && qr == 2.0;

    let model = cs::model();
    let settings = EvalSettings {
        quadrature_order: 16,
        ..EvalSettings::default()
    };
    let classes = cs::classes();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut galois_failures = 0;
    for _ in 0..20 {
        let pm = ProductMeasure::new(
            classes
                .iter()
                .map(|c| random_interior(c, &mut rng))
                .collect::<Result<_, _>>()
                .map_err(err)?,
        );
        let out = pushforward(&pm, &*model, &settings).map_err(err)?;
        let (lo, hi) = out.support().ok_or("empty output law")?;
        for a in 0..=40 {
            let p = (a as f64 + 0.5) / 41.0;
            let q = out.lower_quantile(p);
            for b in 0..=60 {
                let t = lo - 0.1 + (hi - lo + 0.2) * b as f64 / 60.0;
                if (q <= t) != (out.cdf(t) >= p) {
                    galois_failures += 1;
                }
            }
            if out.cdf(q) < p {
                galois_failures += 1;
            }
        }
    }

    let base: Vec<ExtremeMeasure> = classes
        .iter()
        .map(|c| random_interior(c, &mut rng))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let mut worst: f64 = f64::NEG_INFINITY;
    for t in 0..500 {
        let i = t % 4;
        let m1 = random_interior(&classes[i], &mut rng).map_err(err)?;
        let m2 = random_interior(&classes[i], &mut rng).map_err(err)?;
        let lambda: f64 = rng.random();
        let p = rng.random_range(0.05..0.95);
        let pm = |m: ExtremeMeasure| {
            let mut ms = base.clone();
            ms[i] = m;
            ProductMeasure::new(ms)
        };
        let q1 = lower_quantile(&pm(m1.clone()), &*model, p, &settings).map_err(err)?;
        let q2 = lower_quantile(&pm(m2.clone()), &*model, p, &settings).map_err(err)?;
        let qm = lower_quantile(&pm(m1.mix(lambda, &m2).map_err(err)?), &*model, p, &settings).map_err(err)?;
        worst = worst.max(qm - q1.max(q2));
    }
    Ok((
        atom_split && galois_failures == 0 && worst <= 1e-9,
        format!(
            "Q^L = {ql}, Q^R = {qr} at the split atom; {galois_failures} Galois mismatches; \
             quasi-convexity worst excess {worst:e} on 500 pairs"
        ),
    ))
}

fn criterion_9() -> Outcome {
    let p = cs::quantile_problem(0.95).map_err(err)?.with_settings(EvalSettings {
        quadrature_order: 16,
        ..EvalSettings::default()
    });
    let cfg = DeConfig {
        max_generations: 30,
        seed: 9,
        ..DeConfig::default()
    };
    let mut outputs = Vec::new();
    for threads in [1, 2, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(err)?;
        let r = pool.install(|| bound_qoi(&p, &cfg)).map_err(err)?;
        outputs.push(serde_json::to_string(&r).map_err(err)?);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    Ok((
        same,
        format!("BoundResult JSON identical across 1, 2 and 4 workers: {same}"),
    ))
}

fn main() -> ExitCode {
    let mut report = Report { lines: Vec::new() };

    let t = Instant::now();
    let q1 = match criterion_1() {
        Ok((ok, d, q)) => {
            report.record(1, t, Ok((ok, d)));
            q
        }
        Err(e) => {
            report.record(1, t, Err(e));
            2.75
        }
    };

    let t = Instant::now();
    let c2 = criterion_2(q1);
    let quantile = match c2 {
        Ok((ok, d, p, r)) => {
            report.record(2, t, Ok((ok, d)));
            Some((p, r))
        }
        Err(e) => {
            report.record(2, t, Err(e));
            None
        }
    };

    let t = Instant::now();
    let sobol = match criterion_3() {
        Ok((ok, d, run)) => {
            report.record(3, t, Ok((ok, d)));
            Some(run)
        }
        Err(e) => {
            report.record(3, t, Err(e));
            None
        }
    };

    let t = Instant::now();
    let robust_q = quantile.as_ref().map_or(3.05, |q| q.1.value);
    report.record(4, t, criterion_4(robust_q));

    let t = Instant::now();
    let c5 = match (&quantile, &sobol) {
        (Some((p, r)), Some(s)) => criterion_5((p, r), s),
        _ => Err("needs the bounds of criteria 2 and 3".into()),
    };
    report.record(5, t, c5);

    let t = Instant::now();
    let c6 = match &sobol {
        Some(s) => criterion_6(s),
        None => Err("needs the bounds of criterion 3".into()),
    };
    report.record(6, t, c6);

    let t = Instant::now();
    report.record(7, t, criterion_7());
    let t = Instant::now();
    report.record(8, t, criterion_8());
    let t = Instant::now();
    report.record(9, t, criterion_9());

    let failed = report.lines.iter().filter(|l| !l.1).count();
    println!(
        "\n{} of {} criteria passed",
        report.lines.len() - failed,
        report.lines.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
