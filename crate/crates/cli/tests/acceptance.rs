//! Acceptance checks, one line per criterion.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subag_core::bounds::{BoundSpec, BoundVariant};
use subag_core::cv::{total_variation, CvScheme, SchemeKind, TrainingVector};
use subag_core::data::{Criterion, Dataset, Label, LossFunction, Sample};
use subag_core::learners::{shatter_coefficient, HypothesisClass, Learner};
use subag_core::sim::{
    coverage_experiment, generate, l1_experiment, majority_inequality_oracle, BoundParams, CoverageConfig,
    CoverageReport, DeviationKind, L1Config, SyntheticDistribution,
};
use subag_core::split_select::{delta_crossover, f_inverse, select_split, SelectOptions};
use subag_core::subagging::{r_hat_cv_in, r_hat_cv_out};

type Check = Result<String, String>;
type Entry = (&'static str, Duration, fn() -> Check);

const MINUTE: Duration = Duration::from_secs(60);

fn stump() -> Learner {
    Learner::Erm { class: HypothesisClass::Stump { feature: 0 }, objective: Criterion::ZERO_ONE }
}

fn threshold_task() -> SyntheticDistribution {
    SyntheticDistribution::ThresholdNoise { theta: 0.5, flip: 0.2 }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// 1

fn brute_force(learner: &Learner, data: &Dataset, tests: &[Vec<usize>], crit: &Criterion) -> (f64, f64) {
    let n = data.len();
    let t = tests[0].len();
    let (mut out, mut inn) = (0.0, 0.0);
    for test in tests {
        let train: Vec<bool> = (0..n).map(|i| !test.contains(&i)).collect();
        let pred = learner.fit_masked(data, &train).unwrap();
        for (i, s) in data.samples().iter().enumerate() {
            let loss = crit.evaluate(s.y, pred.predict(&s.x)).unwrap();
            if train[i] {
                inn += loss;
            } else {
                out += loss;
            }
        }
    }
    let m = tests.len() as f64;
    (out / (m * t as f64), inn / (m * (n - t) as f64))
}

fn schemes(n: usize) -> Vec<(CvScheme, Vec<Vec<usize>>)> {
    let mut v = Vec::new();
    if n.is_multiple_of(2) {
        v.push((CvScheme::kfold(n, 2).unwrap(), vec![(0..n / 2).collect(), (n / 2..n).collect()]));
    }
    v.push((CvScheme::loo(n).unwrap(), (0..n).map(|i| vec![i]).collect()));
    if n >= 3 {
        let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| vec![i, j])).collect();
        v.push((CvScheme::lpo(n, 2, None, 0).unwrap(), pairs));
    }
    v
}

fn estimator_exactness() -> Check {
    let zero_one = [
        stump(),
        Learner::Erm { class: HypothesisClass::Interval { feature: 0 }, objective: Criterion::ZERO_ONE },
        Learner::Erm { class: HypothesisClass::HalfLine { feature: 0 }, objective: Criterion::ZERO_ONE },
        Learner::Knn { k: 1 },
    ];
    let mut compared = 0usize;
    for n in 2..=8usize {
        for x in [(0..n).map(|i| i as f64).collect::<Vec<_>>(), (0..n).map(|i| (i / 2) as f64).collect()] {
            for labels in 0u32..1 << n {
                let y: Vec<u32> = (0..n).map(|i| 1 + (labels >> i & 1)).collect();
                let data = Dataset::from_1d_classes(&x, &y).map_err(fail)?;
                for (scheme, tests) in schemes(n) {
                    for learner in &zero_one {
                        let (o, i) = brute_force(learner, &data, &tests, &Criterion::ZERO_ONE);
                        let got_o = r_hat_cv_out(learner, &data, &scheme, &Criterion::ZERO_ONE).map_err(fail)?.value;
                        let got_i = r_hat_cv_in(learner, &data, &scheme, &Criterion::ZERO_ONE).map_err(fail)?.value;
                        ensure(got_o == o && got_i == i, || format!("n={n} labels={labels:b} {}", scheme.kind.name()))?;
                        compared += 1;
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 2..=8usize {
        for _ in 0..20 {
            let samples = (0..n)
                .map(|_| Sample::new(vec![rng.random_range(0.0..1.0)], Label::Value(rng.random_range(-0.5..1.5))))
                .collect();
            let data = Dataset::regression(samples).map_err(fail)?;
            for crit in [Criterion::Loss(LossFunction::ClippedSquared), Criterion::Loss(LossFunction::ClippedAbsolute)]
            {
                let learners = [
                    Learner::Erm { class: HypothesisClass::Stump { feature: 0 }, objective: crit },
                    Learner::Knn { k: 1 },
                ];
                for (scheme, tests) in schemes(n) {
                    for learner in &learners {
                        let (o, i) = brute_force(learner, &data, &tests, &crit);
                        let got_o = r_hat_cv_out(learner, &data, &scheme, &crit).map_err(fail)?.value;
                        let got_i = r_hat_cv_in(learner, &data, &scheme, &crit).map_err(fail)?.value;
                        ensure((got_o - o).abs() <= 1e-12 && (got_i - i).abs() <= 1e-12, || {
                            format!("regression n={n}: {got_o} vs {o}, {got_i} vs {i}")
                        })?;
                        compared += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{compared} estimator pairs"))
}

// 2

fn total_variation_examples() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    for n in 2..=50usize {
        let ones = vec![true; n];
        for v in 1..n {
            let contiguous: Vec<usize> = (0..v).collect();
            let mut scattered: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                scattered.swap(i, rng.random_range(0..=i));
            }
            scattered.truncate(v);
            for test in [contiguous, scattered] {
                let u = TrainingVector::with_test_indices(n, test).map_err(fail)?;
                let tv = total_variation(u.bits(), &ones).map_err(fail)?;
                let want = 2.0 * v as f64 / n as f64;
                ensure(tv == want, || format!("n={n} v={v}: {tv} != {want}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} vectors"))
}

// 3

fn shatter_counts() -> Check {
    let interval = HypothesisClass::Interval { feature: 0 };
    for n in 1..=8usize {
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let s = shatter_coefficient(&interval, &pts).map_err(fail)?;
        let want = (n * (n + 1) / 2 + 1) as u64;
        ensure(s == want && s <= ((n + 1) * (n + 1)) as u64, || format!("interval n={n}: {s} != {want}"))?;
    }
    let classes = [
        HypothesisClass::HalfLine { feature: 0 },
        HypothesisClass::Stump { feature: 0 },
        interval,
        HypothesisClass::Histogram { bins: 1, lo: 0.0, hi: 1.0 },
        HypothesisClass::Histogram { bins: 2, lo: 0.0, hi: 1.0 },
        HypothesisClass::Histogram { bins: 3, lo: 0.0, hi: 1.0 },
        HypothesisClass::Histogram { bins: 4, lo: 0.0, hi: 1.0 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut configs = 0;
    for class in &classes {
        let vc = class.declared_vc(1).map_err(fail)?;
        for n in 1..=12usize {
            let mut layouts = vec![(0..n).map(|i| vec![(i as f64 + 0.5) / n as f64]).collect::<Vec<_>>()];
            for _ in 0..5 {
                layouts.push((0..n).map(|_| vec![rng.random_range(0.0..1.0)]).collect());
            }
            for pts in layouts {
                let s = shatter_coefficient(class, &pts).map_err(fail)?;
                let sauer = ((n + 1) as u64).pow(vc);
                ensure(s <= sauer, || format!("{class:?} n={n}: S={s} > {sauer}"))?;
                configs += 1;
            }
        }
    }
    Ok(format!("{configs} point sets over {} classes", classes.len()))
}

// 4, 5

fn coverage(bound: BoundParams, estimator: DeviationKind) -> Result<CoverageReport, String> {
    let cfg = CoverageConfig {
        distribution: threshold_task(),
        learner: stump(),
        scheme: SchemeKind::Kfold { k: 5 },
        n: 60,
        eps_grid: (1..=10).map(|i| i as f64 * 0.05).collect(),
        replicates: 1000,
        ghost: 20_000,
        seed: 4,
        estimator,
        bound,
        criterion: None,
    };
    coverage_experiment(&cfg).map_err(fail)
}

fn summarize(name: &str, r: &CoverageReport) -> Result<String, String> {
    let worst = r.rows.iter().map(|row| row.bound_value + row.slack - row.empirical_freq).fold(f64::INFINITY, f64::min);
    match r.rows.iter().find(|row| !row.holds) {
        Some(row) => Err(format!(
            "{name}: eps={} freq={} > bound {} + slack {}",
            row.eps, row.empirical_freq, row.bound_value, row.slack
        )),
        None => Ok(format!("{name} min headroom {worst:.4}")),
    }
}

fn symmetric_coverage() -> Check {
    let vc = stump().declared_vc(1).ok_or("stump has no declared VC")?;
    let r = coverage(BoundParams::new(BoundVariant::SymOut).with_vc(vc), DeviationKind::Out)?;
    let first = &r.rows[0];
    Ok(format!("{}, freq(0.05)={}", summarize("sym-out", &r)?, first.empirical_freq))
}

fn erm_and_classifier_coverage() -> Check {
    let vc = stump().declared_vc(1).ok_or("stump has no declared VC")?;
    let erm = coverage(BoundParams::new(BoundVariant::Erm).with_vc(vc), DeviationKind::Out)?;
    let half = coverage(BoundParams::new(BoundVariant::HalfOut), DeviationKind::HalfOut)?;
    Ok(format!("{}; {}", summarize("erm", &erm)?, summarize("half-out", &half)?))
}

// 6

fn l1_mean_deviation() -> Check {
    let cfg = L1Config {
        distribution: threshold_task(),
        learner: stump(),
        scheme: SchemeKind::Kfold { k: 4 },
        n: 100,
        replicates: 1000,
        ghost: 20_000,
        seed: 6,
        vc: Some(1),
        criterion: None,
    };
    let r = l1_experiment(&cfg).map_err(fail)?;
    let upper = r.mean + 3.0 * r.se;
    ensure((r.bound - 0.2).abs() < 1e-15, || format!("bound {} != 0.2", r.bound))?;
    ensure(r.holds, || format!("mean + 3se = {upper} > {}", r.bound))?;
    let erm = r.erm_bound.ok_or("no erm bound")?;
    ensure(r.holds_erm == Some(true), || format!("mean + 3se = {upper} > erm {erm}"))?;
    Ok(format!("mean + 3se = {upper:.4}, bound 0.2, erm {erm:.4}"))
}

// 7

fn majority_oracle() -> Check {
    let v = majority_inequality_oracle(4, 5).map_err(fail)?;
    match v.counterexample {
        None => Ok(format!("{} matrices", v.matrices_checked)),
        Some((m, ineq)) => Err(format!("{ineq:?} fails on {m:?}")),
    }
}

// 8

fn inverse_property() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut hoeffding, mut vc_branch, mut tries) = (0, 0, 0);
    while (hoeffding < 1000 || vc_branch < 1000) && tries < 1_000_000 {
        tries += 1;
        let n = rng.random_range(20..100_000usize);
        let want_vc = hoeffding >= 1000;
        let p = if want_vc { rng.random_range(0.001..1.0 / 18.0) } else { rng.random_range(0.001..0.99) };
        let vc = rng.random_range(1..6u32);
        let delta = (-rng.random_range(0.0..300.0f64)).exp();
        let cross = delta_crossover(n, p, vc).map_err(fail)?;
        let first = delta >= cross;
        if (first && hoeffding >= 1000) || (!first && vc_branch >= 1000) {
            continue;
        }
        let f = f_inverse(n, p, delta, vc).map_err(fail)?;
        let nf = n as f64;
        let log_gen = if first {
            hoeffding += 1;
            -2.0 * nf * p * f * f
        } else {
            vc_branch += 1;
            4.0 * vc as f64 / (1.0 - p) * (2.0 * nf * (1.0 - p)).ln_1p() - nf * f * f / 9.0
        };
        let generated = log_gen.exp();
        ensure((generated - delta).abs() <= 1e-9 * delta, || {
            format!("n={n} p={p} vc={vc} delta={delta:e}: regenerated {generated:e}")
        })?;
    }
    ensure(hoeffding >= 1000 && vc_branch >= 1000, || format!("only {hoeffding}/{vc_branch} cases"))?;
    let mut rows = 0;
    for (n, eta, seed) in [(20usize, 0.1, 1u64), (40, 0.25, 2), (60, 0.05, 3)] {
        let data = generate(&threshold_task(), n, seed).map_err(fail)?;
        let opts = SelectOptions { draws: 100, ..SelectOptions::default() };
        let t = select_split(&stump(), &data, eta, 1, &opts).map_err(fail)?;
        for r in &t.rows {
            ensure((r.f_value - eta).abs() <= 1e-9 * eta, || format!("n={n} k={}: f={}", r.k, r.f_value))?;
            rows += 1;
        }
    }
    Ok(format!("{hoeffding} + {vc_branch} inversions, {rows} split rows"))
}

// 9

fn spec_for(variant: BoundVariant, n: usize, p: f64, vc: u32) -> BoundSpec {
    let mut s = BoundSpec::new(variant, n).with_p(p).with_vc(vc).with_l(3).with_stability(1e-4, 1e-9);
    match variant {
        BoundVariant::Kfold => s = BoundSpec::new(variant, n).with_k(5).with_vc(vc),
        BoundVariant::KutinStrong | BoundVariant::KutinWeak => {
            s.b = Some(2e-3);
            s.c = Some(1e-3);
            s.alpha = Some(1.0);
        }
        _ => {}
    }
    s
}

fn monotone_and_limits() -> Check {
    let mut curves = 0;
    for variant in BoundVariant::ALL {
        for (n, p, vc, top) in
            [(60usize, 0.2, 2u32, 1.0), (1000, 0.1, 1, 0.5), (5000, 0.5, 3, 2.0), (200, 0.05, 1, 3.0)]
        {
            let s = spec_for(variant, n, p, vc);
            let mut prev = f64::INFINITY;
            for i in 0..1000 {
                let eps = top * i as f64 / 999.0;
                let v = s.evaluate(eps).map_err(fail)?.value;
                ensure((0.0..=1.0).contains(&v) && v <= prev, || format!("{variant} n={n} rises at eps={eps}"))?;
                if i == 0 {
                    ensure(v == 1.0, || format!("{variant} n={n}: value {v} at eps=0"))?;
                }
                prev = v;
            }
            curves += 1;
        }
    }
    for n in [1usize, 2, 5, 10, 100, 10_000] {
        for p in [0.01, 0.2, 0.5, 0.99] {
            for eps in [1e-3, 0.01, 0.1, 1.0] {
                let v = BoundSpec::new(BoundVariant::Vsym, n).with_p(p).evaluate(eps).map_err(fail)?.value;
                ensure(v < 1.0, || format!("v_sym({n}, {p}, {eps}) = {v}"))?;
            }
        }
    }
    Ok(format!("{curves} curves of 1000 points"))
}

// 10

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_subag")).args(args).output().map_err(fail)?;
    ensure(o.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))?;
    Ok(o.stdout)
}

fn cli_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(fail)?;
    let data_path = dir.path().join("data.csv");
    let data = generate(&threshold_task(), 30, 10).map_err(fail)?;
    data.write_csv(std::fs::File::create(&data_path).map_err(fail)?).map_err(fail)?;
    let data = data_path.to_str().unwrap();
    let stump = r#"{"learner":"erm","class":"stump"}"#;
    let sim = r#"{"experiment":"coverage","distribution":{"kind":"threshold-noise","theta":0.5,"flip":0.2},
        "learner":{"learner":"erm","class":"stump"},"scheme":{"scheme":"kfold","k":5},"n":30,
        "eps_grid":[0.1,0.2,0.3],"replicates":100,"ghost":1000,"bound":{"variant":"sym-out","vc":2}}"#;
    let runs: Vec<Vec<&str>> = vec![
        vec![
            "bounds",
            "--variant",
            "kutin-weak",
            "--n",
            "500",
            "--b",
            "0.002",
            "--c",
            "0.001",
            "--delta",
            "1e-6",
            "--eps",
            "0:1:0.05",
        ],
        vec![
            "estimate",
            "--data",
            data,
            "--learner",
            stump,
            "--scheme",
            r#"{"scheme":"lpo","v":3,"max_enum":100,"draws":50}"#,
        ],
        vec!["subag-train", "--data", data, "--learner", stump, "--scheme", r#"{"scheme":"kfold","k":3}"#],
        vec!["select-split", "--data", data, "--learner", stump, "--eta", "0.2", "--vc", "1", "--draws", "50"],
        vec!["simulate", "--config", sim],
        vec!["--format", "json", "shatter", "--class", r#"{"class":"histogram","bins":3}"#, "--n", "7"],
        vec!["oracle-majority", "--max-m", "3", "--max-n", "4"],
    ];
    for args in &runs {
        let mut files = Vec::new();
        for rep in 0..2 {
            let path: PathBuf = dir.path().join(format!("out{rep}"));
            let mut full = vec!["--seed", "17", "--output", path.to_str().unwrap()];
            full.extend(args.iter().copied());
            let stdout = run_cli(&full)?;
            files.push((std::fs::read(&path).map_err(fail)?, stdout));
        }
        ensure(!files[0].0.is_empty() && files[0] == files[1], || format!("{} differs between runs", args[0]))?;
    }
    Ok(format!("{} commands", runs.len()))
}

fn main() -> ExitCode {
    let criteria: [Entry; 10] = [
        ("estimator exactness", MINUTE, estimator_exactness),
        ("total variation", MINUTE, total_variation_examples),
        ("shatter counts", MINUTE, shatter_counts),
        ("symmetric bound coverage", 10 * MINUTE, symmetric_coverage),
        ("erm and classifier coverage", 10 * MINUTE, erm_and_classifier_coverage),
        ("l1 bound", 10 * MINUTE, l1_mean_deviation),
        ("majority combinatorics", MINUTE, majority_oracle),
        ("inverse of f", MINUTE, inverse_property),
        ("monotonicity and limits", MINUTE, monotone_and_limits),
        ("cli determinism", MINUTE, cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result =
            result.and_then(
                |d| {
                    if took <= *limit {
                        Ok(d)
                    } else {
                        Err(format!("{d}; took {took:.1?}, limit {limit:?}"))
                    }
                },
            );
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{took:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{took:.2?}]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
