//! End-to-end acceptance checks. Runs every criterion, prints one line per
//! criterion and exits non-zero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use stopmean::harness::{self, run_replicate, run_replicates, Execution, ReplicateResult};
use stopmean::metrics::stationarity_check;
use stopmean::quantize::{cell_index, representative};
use stopmean::sources::counterexample_value;
use stopmean::{
    Cell, Dyadic, DyadicValue, Error, ExactEstimator, ExperimentConfig, LevelCompletion,
    QuantizedEstimator, Seeds, SourceModel, SourceSpec,
};

static PATHS_CHECKED: AtomicU64 = AtomicU64::new(0);
static LEVELS_CHECKED: AtomicU64 = AtomicU64::new(0);
static VIOLATIONS: AtomicU64 = AtomicU64::new(0);

/// `lambda_n >= n` and strict increase along one path. Tallied for criterion 4.
fn check_lambdas(completions: &[LevelCompletion]) {
    PATHS_CHECKED.fetch_add(1, Ordering::Relaxed);
    let mut previous = 0;
    for (i, c) in completions.iter().enumerate() {
        LEVELS_CHECKED.fetch_add(1, Ordering::Relaxed);
        if c.level != i as u64 + 1 || c.lambda < c.level || c.lambda <= previous {
            VIOLATIONS.fetch_add(1, Ordering::Relaxed);
        }
        previous = c.lambda;
    }
}

fn check_results(results: &[ReplicateResult]) {
    for r in results {
        check_lambdas(&r.completions);
        if !r.exact_completions.is_empty() {
            check_lambdas(&r.exact_completions);
        }
    }
}

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn replay(
    pattern: &[DyadicValue],
    steps: usize,
    levels: u64,
) -> (Vec<LevelCompletion>, Vec<LevelCompletion>) {
    let mut q = QuantizedEstimator::new().with_max_level(levels);
    let mut e = ExactEstimator::new().with_max_level(levels);
    for t in 0..steps {
        let x = pattern[t % pattern.len()];
        q.step(x);
        e.step(x);
    }
    check_lambdas(q.completions());
    check_lambdas(e.completions());
    (q.completions().to_vec(), e.completions().to_vec())
}

fn golden_traces() -> Outcome {
    let start = Instant::now();
    let pattern: Vec<_> = [0, 1, 0].into_iter().map(DyadicValue::integer).collect();
    let (q, e) = replay(&pattern, 9, 3);
    let got: Vec<_> = q.iter().map(|c| (c.level, c.lambda, c.estimate)).collect();
    let golden = got == [(1, 2, 1.0), (2, 5, 0.5), (3, 8, 1.0 / 3.0)] && q == e;

    let (q, e) = replay(&[DyadicValue::ZERO], 21, 20);
    let constant =
        q.len() == 20 && q == e && q.iter().all(|c| c.lambda == c.level && c.estimate == 0.0);
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        golden && constant && elapsed < 1.0,
        format!("(0,1,0) -> {got:?}, exact variant identical: {}, constant-0 lambda_n = n and m_n = 0 for n <= 20: {constant}, {elapsed:.3}s", q == e),
    )
}

fn matcher_correctness() -> Outcome {
    let start = Instant::now();
    let config = ExperimentConfig {
        seeds: Seeds::range(0, 1000),
        check_oracle: true,
        ..ExperimentConfig::new(SourceSpec::sticky_binary(0.95), 20_000)
    };
    match run_replicates(&config, &config.seeds.to_vec(), Execution::Parallel) {
        Ok(results) => {
            check_results(&results);
            let levels: usize = results.iter().map(|r| r.completions.len()).sum();
            let elapsed = start.elapsed().as_secs_f64();
            outcome(
                elapsed < 60.0,
                format!("1000 sticky paths, {levels} completed levels all equal the brute-force scan, {elapsed:.1}s"),
            )
        }
        Err(e) => outcome(false, format!("{e} (exit code {})", e.exit_code())),
    }
}

fn quantizer_suite() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut xs: Vec<DyadicValue> = vec![
        DyadicValue::real(0.3),
        DyadicValue::real(-0.25),
        DyadicValue::real(-1e-300),
        DyadicValue::real(1e300),
        DyadicValue::exact(1, 1024),
        DyadicValue::exact(-3, -1024),
        DyadicValue::exact(i64::MAX, -1074),
    ];
    let mut source = SourceModel::new(
        &SourceSpec::IidUniform {
            low: -4.0,
            high: 4.0,
        },
        1,
    )
    .unwrap();
    xs.extend((0..1000).map(|_| source.next()));
    for x in &xs {
        for k in 0..64 {
            let cell = Cell::of(x, k);
            let rep = representative(&cell).as_dyadic();
            let width = Dyadic::pow2(-(k as i64));
            let within =
                rep <= x.as_dyadic() && cell.contains(x) && cell.contains(&DyadicValue::Exact(rep));
            // x - rep < 2^-k  <=>  floor(x 2^k) = floor(rep 2^k) and rep is that cell's left end.
            let fidelity =
                rep == cell.left() && cell_index(&DyadicValue::Exact(rep), k) == cell.index;
            if Cell::of(x, k + 1).parent() != Some(cell)
                || Cell::of(x, k + 1).index.parent() != cell.index
                || cell.width() != width
                || !within
                || !fidelity
            {
                failures.push(format!("{x} at level {k}"));
            }
        }
    }
    for i in 2..=40u64 {
        let h = DyadicValue::Exact(counterexample_value(i));
        let log2 = -(1i64 << i) - 1;
        if h.is_zero() || h.as_dyadic() != Dyadic::pow2(log2) {
            failures.push(format!("h({i}) underflowed"));
        }
        for k in [0, 4, (1u64 << i), (1u64 << i) + 1, (1u64 << i) + 5] {
            let expected = if (k as i64) < -log2 {
                Dyadic::ZERO
            } else {
                Dyadic::pow2(log2 + k as i64)
            };
            if cell_index(&h, k).as_dyadic() != expected {
                failures.push(format!("h({i}) at level {k}"));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && elapsed < 1.0,
        format!(
            "{} values x 64 levels plus h(2..=40): {} failures{}, {elapsed:.3}s",
            xs.len(),
            failures.len(),
            failures
                .first()
                .map(|f| format!(" (first: {f})"))
                .unwrap_or_default()
        ),
    )
}

fn median(xs: &[f64]) -> f64 {
    harness::median(xs).unwrap_or(f64::NAN)
}

fn markov_convergence() -> Outcome {
    let config = harness::preset("convergence-markov").unwrap();
    let results = run_replicates(&config, &config.seeds.to_vec(), Execution::Parallel).unwrap();
    check_results(&results);
    let records: Vec<_> = results.iter().flat_map(|r| r.records.clone()).collect();
    let summary = harness::summarize(&records, &config.seeds.to_vec());
    let n_star = summary.deepest_level_reached_by(0.8);
    let gaps = |n: u64| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.n == n)
            .filter_map(|r| r.gap)
            .collect()
    };
    let (at_star, at_two) = (gaps(n_star), gaps(2));
    let (m_star, m_two) = (median(&at_star), median(&at_two));
    // Paths still inside their first run have m_n in {0, 1} and gap 1 - p_stay.
    let floor = at_star
        .iter()
        .filter(|g| (**g - 0.05).abs() < 1e-12)
        .count();
    outcome(
        m_star < m_two && m_star < 0.15,
        format!(
            "n* = {n_star} ({} of {} seeds), median gap {m_star:?} at n*, {m_two:?} at n = 2; \
             {floor} of {} gaps at n* equal 1 - p_stay",
            at_star.len(),
            results.len(),
            at_star.len()
        ),
    )
}

fn iid_convergence() -> Outcome {
    let config = harness::preset("convergence-iid").unwrap();
    let results = run_replicates(&config, &config.seeds.to_vec(), Execution::Parallel).unwrap();
    check_results(&results);
    let n_star = results.iter().map(|r| r.deepest_level()).min().unwrap_or(0);
    let ms: Vec<f64> = results
        .iter()
        .map(|r| r.completions[n_star as usize - 1].estimate)
        .collect();
    let mean = ms.iter().sum::<f64>() / ms.len() as f64;
    outcome(
        (mean - 0.5).abs() <= 0.06,
        format!(
            "deepest common level n* = {n_star}, mean m_n* = {mean:.4} over {} seeds",
            ms.len()
        ),
    )
}

fn stationarity() -> Outcome {
    let spec = SourceSpec::sticky_binary(0.95);
    match stationarity_check(
        &spec,
        2,
        1_000_000,
        0..10_000,
        harness::STATIONARITY_SIGNIFICANCE,
    ) {
        Ok(r) => {
            let tv = r.comparison.tv_distance;
            outcome(
                tv < 0.05,
                format!(
                    "TV(X_(lambda_2+1), X_1) = {tv:.4} over {} of {} replicates (chi-square p = {:.3})",
                    r.completed, r.replicates, r.comparison.p_value
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn counterexample() -> Outcome {
    let config = harness::preset("divergence-counterexample").unwrap();
    let results = run_replicates(&config, &config.seeds.to_vec(), Execution::Parallel).unwrap();
    check_results(&results);
    let seeds = results.len() as f64;
    let h: Vec<&ReplicateResult> = results
        .iter()
        .filter(|r| r.records.first().and_then(|rec| rec.event_h_prefix) == Some(true))
        .collect();
    let p_h = h.len() as f64 / seeds;
    let a = (p_h - 2.0 / 7.0).abs() <= 0.02;

    let h3: Vec<&ReplicateResult> = h.iter().copied().filter(|r| r.records.len() >= 3).collect();
    let an: Vec<&ReplicateResult> = h3
        .iter()
        .copied()
        .filter(|r| r.records[2].event_an == Some(true))
        .collect();
    let freq = an.len() as f64 / h3.len() as f64;
    let b = freq >= 0.4;

    let oracle_zero = an.iter().all(|r| r.records[2].oracle_stop == Some(0.0));
    let mean_m3 = an.iter().map(|r| r.records[2].m_n).sum::<f64>() / an.len() as f64;
    let c = oracle_zero && (0.2..=0.7).contains(&mean_m3);

    // Deepest level completed by both estimators on every A_3 row.
    let common = an
        .iter()
        .map(|r| r.deepest_level().min(r.exact_deepest_level()))
        .min()
        .unwrap_or(0);
    let (mut exact_gap, mut quantized_gap) = (0.0, 0.0);
    for r in &an {
        let i = common as usize - 1;
        exact_gap += (r.exact_completions[i].estimate
            - r.exact_oracles[i].expect("counterexample oracle"))
        .abs();
        quantized_gap += r.records[i].gap.expect("counterexample oracle");
    }
    exact_gap /= an.len() as f64;
    quantized_gap /= an.len() as f64;
    let d = common >= 1 && exact_gap < quantized_gap;

    outcome(
        a && b && c && d,
        format!(
            "(a) P(H prefix) = {p_h:.4}: {a}; (b) P(A_3 | H) = {freq:.4} over {} rows: {b}; \
             (c) oracle_stop = 0 on all {} A_3 rows: {oracle_zero}, mean m_3 = {mean_m3:.4}: {c}; \
             (d) at common level {common}: exact gap {exact_gap:.4} vs quantized gap {quantized_gap:.4}: {d}",
            h3.len(),
            an.len()
        ),
    )
}

fn binary_identity() -> Outcome {
    let config = ExperimentConfig {
        run_exact_variant: true,
        ..ExperimentConfig::new(SourceSpec::sticky_binary(0.95), 200_000)
    };
    let mut levels = 0;
    let mut mismatched = Vec::new();
    for seed in 0..100 {
        let r = run_replicate(&config, seed).unwrap();
        check_results(std::slice::from_ref(&r));
        levels += r.completions.len();
        if r.completions != r.exact_completions {
            mismatched.push(seed);
        }
    }
    outcome(
        mismatched.is_empty(),
        format!("100 sticky paths, {levels} levels, mismatching seeds: {mismatched:?}"),
    )
}

fn determinism() -> Outcome {
    let configs = [
        ExperimentConfig {
            seeds: Seeds::range(0, 20),
            run_exact_variant: true,
            snapshot_depth: Some(4),
            ..ExperimentConfig::new(SourceSpec::sticky_binary(0.95), 50_000)
        },
        ExperimentConfig {
            seeds: Seeds::range(0, 50),
            max_level: Some(3),
            run_exact_variant: true,
            ..ExperimentConfig::new(SourceSpec::Counterexample, 100_000)
        },
        ExperimentConfig {
            seeds: Seeds::range(0, 10),
            ..ExperimentConfig::new(SourceSpec::Ar1 { a: 0.5, sigma: 1.0 }, 20_000)
        },
    ];
    let read = |dir: &std::path::Path| -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };
    let mut ok = true;
    let mut compared = 0;
    for config in &configs {
        let dirs: Vec<_> = (0..4).map(|_| tempfile::tempdir().unwrap()).collect();
        harness::run(config, dirs[0].path()).unwrap();
        harness::run(config, dirs[1].path()).unwrap();
        let n = config.seeds.to_vec().len() as u64;
        let serial = harness::sweep(config, n, dirs[2].path(), Execution::Serial).unwrap();
        harness::sweep(config, n, dirs[3].path(), Execution::Parallel).unwrap();
        check_results(&serial.results);
        let files: Vec<_> = dirs.iter().map(|d| read(d.path())).collect();
        ok &= files[0] == files[1] && files[2] == files[3];
        compared += files[0].len() + files[2].len();
    }
    outcome(
        ok,
        format!(
            "{} configs, {compared} files byte-identical across repeated and parallel runs",
            configs.len()
        ),
    )
}

fn invariants() -> Outcome {
    // Every path above went through check_lambdas; the harness also rejects
    // violations with exit code 3 as they happen.
    let paths = PATHS_CHECKED.load(Ordering::Relaxed);
    let levels = LEVELS_CHECKED.load(Ordering::Relaxed);
    let violations = VIOLATIONS.load(Ordering::Relaxed);
    let probe = Error::InvariantViolation(String::new()).exit_code();
    outcome(
        violations == 0 && paths > 0 && probe == 3,
        format!("{paths} paths, {levels} completed levels, {violations} violations"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "golden traces", golden_traces),
        (2, "matcher correctness", matcher_correctness),
        (3, "quantizer suite", quantizer_suite),
        (5, "convergence, Markov", markov_convergence),
        (6, "convergence, iid", iid_convergence),
        (7, "stationarity along stopping times", stationarity),
        (8, "counterexample", counterexample),
        (9, "binary identity", binary_identity),
        (10, "determinism", determinism),
    ];
    let mut lines = Vec::new();
    let mut run = |id: u32, name: &str, f: fn() -> Outcome| {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let line = format!(
            "criterion {id:>2} {}: {name}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
        println!("{line}");
        lines.push((id, result.pass, line));
    };
    for (id, name, f) in criteria {
        run(id, name, f);
    }
    run(4, "lambda_n >= n and strictly increasing", invariants);

    lines.sort_by_key(|l| l.0);
    println!("\nacceptance summary:");
    for (_, _, line) in &lines {
        println!("{line}");
    }
    let failed: Vec<u32> = lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", lines.len());
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
