//! Experiment configuration, replication, and CSV/JSON output.
//!
//! A replicate streams one seeded sample path into the quantized estimator
//! (and optionally the exact-match estimator) until the sample budget runs out
//! or `max_level` completes, producing one [`TraceRecord`] per completed level.
//! Output is a pure function of the config: no timestamps, rows ordered by
//! seed, so repeated and parallel runs are byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicValue;
use crate::error::{Error, Result};
use crate::estimator::{
    naive_lambda_oracle, Estimator, ExactEstimator, LevelCompletion, MatchRule, QuantizedEstimator,
};
use crate::metrics::{
    detect_an, detect_h_prefix, oracle_limit, oracle_stop, StationarityReport, TraceRecord,
};
use crate::quantize::PastVector;
use crate::sources::{SourceModel, SourceSpec, RNG_NAME};

pub const CSV_HEADER: [&str; 11] = [
    "replicate",
    "n",
    "lambda_n",
    "m_n",
    "m_prime_n",
    "oracle_stop",
    "oracle_limit",
    "gap",
    "value_at_stop",
    "event_An",
    "event_H_prefix",
];

pub const TRACE_FILE: &str = "trace.csv";
pub const SNAPSHOT_FILE: &str = "snapshots.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const SUMMARY_FILE: &str = "summary.json";

/// Significance used for stationarity checks in sweep summaries.
pub const STATIONARITY_SIGNIFICANCE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRange {
    pub start: u64,
    pub count: u64,
}

/// A single seed or a contiguous range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Single(u64),
    Range(SeedRange),
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Single(0)
    }
}

impl Seeds {
    pub fn range(start: u64, count: u64) -> Self {
        Seeds::Range(SeedRange { start, count })
    }

    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::Single(s) => vec![*s],
            Seeds::Range(r) => (r.start..r.start.saturating_add(r.count)).collect(),
        }
    }
}

/// One experiment, as read from a JSON config file. Unknown keys are errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceSpec,
    #[serde(default)]
    pub seeds: Seeds,
    /// Sample budget per replicate.
    pub max_samples: u64,
    /// Stop a replicate once this level has completed (and one more sample is seen).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_level: Option<u64>,
    /// Fail with exit code 2 if any replicate ends below this level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_level: Option<u64>,
    /// Write backward snapshots of this depth at every completion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_depth: Option<usize>,
    #[serde(default)]
    pub run_exact_variant: bool,
    /// Cross-check every stopping time against the brute-force scanner.
    #[serde(default)]
    pub check_oracle: bool,
    /// Levels at which sweep summaries compare `X_{lambda_k + 1}` with `X_1`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stationarity_levels: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(source: SourceSpec, max_samples: u64) -> Self {
        ExperimentConfig {
            source,
            seeds: Seeds::default(),
            max_samples,
            max_level: None,
            min_level: None,
            snapshot_depth: None,
            run_exact_variant: false,
            check_oracle: false,
            stationarity_levels: Vec::new(),
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_samples < 1 {
            return Err(Error::Config("max_samples must be at least 1".into()));
        }
        if let Seeds::Range(r) = &self.seeds {
            if r.count == 0 {
                return Err(Error::Config("seed range is empty".into()));
            }
        }
        if let (Some(min), Some(max)) = (self.min_level, self.max_level) {
            if min > max {
                return Err(Error::Config(format!(
                    "min_level {min} exceeds max_level {max}"
                )));
            }
        }
        if self.max_level == Some(0) {
            return Err(Error::Config("max_level must be at least 1".into()));
        }
        // Surface bad source parameters as config errors before any work starts.
        SourceModel::new(&self.source, 0).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// Everything one replicate produced.
#[derive(Clone, Debug)]
pub struct ReplicateResult {
    pub seed: u64,
    pub samples: u64,
    pub completions: Vec<LevelCompletion>,
    pub exact_completions: Vec<LevelCompletion>,
    /// Oracle at each exact-match stopping time.
    pub exact_oracles: Vec<Option<f64>>,
    pub records: Vec<TraceRecord>,
    /// `X_1`, if observed.
    pub first: Option<DyadicValue>,
    /// `X_{lambda_n + 1}` for each completed quantized level, if observed.
    pub after_stop: Vec<Option<DyadicValue>>,
    pub snapshots: Vec<(u64, PastVector)>,
}

impl ReplicateResult {
    pub fn deepest_level(&self) -> u64 {
        self.completions.len() as u64
    }

    pub fn exact_deepest_level(&self) -> u64 {
        self.exact_completions.len() as u64
    }
}

fn check_completion<R: MatchRule>(
    est: &Estimator<R>,
    completion: &LevelCompletion,
    check_oracle: bool,
    seed: u64,
) -> Result<()> {
    let lambdas = est.stopping_times();
    let n = completion.level as usize;
    let previous = lambdas[n - 1];
    if completion.lambda < completion.level || completion.lambda <= previous {
        return Err(Error::InvariantViolation(format!(
            "{} estimator, seed {seed}: lambda_{n} = {} after lambda_{} = {previous}",
            R::NAME,
            completion.lambda,
            n - 1
        )));
    }
    if check_oracle {
        let history = &est.history()[..=completion.lambda as usize];
        let naive = naive_lambda_oracle(est.rule(), history, previous, completion.level)?;
        if naive != completion.lambda {
            return Err(Error::InvariantViolation(format!(
                "{} estimator, seed {seed}: streaming lambda_{n} = {} but brute force gives {naive}",
                R::NAME,
                completion.lambda
            )));
        }
    }
    Ok(())
}

/// Stream one seeded path through the estimators.
pub fn run_replicate(config: &ExperimentConfig, seed: u64) -> Result<ReplicateResult> {
    let mut source = SourceModel::new(&config.source, seed)?;
    let mut quantized = QuantizedEstimator::new();
    let mut exact = config.run_exact_variant.then(ExactEstimator::new);
    if let Some(max) = config.max_level {
        quantized = quantized.with_max_level(max);
        exact = exact.map(|e| e.with_max_level(max));
    }
    let mut snapshots = Vec::new();
    let mut samples = 0;

    while samples < config.max_samples {
        let x = source.next();
        samples += 1;
        if let Some(c) = quantized.step(x) {
            check_completion(&quantized, &c, config.check_oracle, seed)?;
            if let Some(depth) = config.snapshot_depth {
                let depth = depth.min(c.lambda as usize);
                snapshots.push((c.level, quantized.backward_snapshot(depth)?));
            }
        }
        if let Some(e) = exact.as_mut() {
            if let Some(c) = e.step(x) {
                check_completion(e, &c, config.check_oracle, seed)?;
            }
        }
        if seen_enough(&quantized, samples)
            && exact.as_ref().is_none_or(|e| seen_enough(e, samples))
        {
            break;
        }
    }

    let history = quantized.history();
    let completions = quantized.completions().to_vec();
    let exact_completions = exact
        .as_ref()
        .map(|e| e.completions().to_vec())
        .unwrap_or_default();
    let exact_oracles = exact_completions
        .iter()
        .map(|c| oracle_stop(&source, history, c.lambda).ok())
        .collect();
    let is_counterexample = matches!(config.source, SourceSpec::Counterexample);
    let h_prefix = detect_h_prefix(history);

    let records = completions
        .iter()
        .map(|c| {
            let stop = oracle_stop(&source, history, c.lambda).ok();
            let value_at_stop = history[c.lambda as usize];
            TraceRecord {
                replicate: seed,
                n: c.level,
                lambda_n: c.lambda,
                m_n: c.estimate,
                m_prime_n: exact_completions
                    .get(c.level as usize - 1)
                    .map(|e| e.estimate),
                oracle_stop: stop,
                oracle_limit: oracle_limit(&source, history, c.lambda).ok(),
                gap: stop.map(|o| (c.estimate - o).abs()),
                value_at_stop,
                event_an: is_counterexample.then(|| detect_an(&value_at_stop, c.level)),
                event_h_prefix: is_counterexample.then_some(h_prefix),
            }
        })
        .collect();

    Ok(ReplicateResult {
        seed,
        samples,
        first: history.get(1).copied(),
        after_stop: completions
            .iter()
            .map(|c| history.get(c.lambda as usize + 1).copied())
            .collect(),
        completions,
        exact_completions,
        exact_oracles,
        records,
        snapshots,
    })
}

/// Finished and `X_{lambda_max + 1}` observed.
fn seen_enough<R: MatchRule>(est: &Estimator<R>, samples: u64) -> bool {
    est.is_finished()
        && est
            .completions()
            .last()
            .is_some_and(|c| samples > c.lambda + 1)
}

/// How to schedule independent replicates. Both produce identical output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

pub fn run_replicates(
    config: &ExperimentConfig,
    seeds: &[u64],
    execution: Execution,
) -> Result<Vec<ReplicateResult>> {
    match execution {
        Execution::Serial => seeds.iter().map(|&s| run_replicate(config, s)).collect(),
        Execution::Parallel => seeds
            .par_iter()
            .map(|&s| run_replicate(config, s))
            .collect(),
    }
}

fn check_min_level(config: &ExperimentConfig, results: &[ReplicateResult]) -> Result<()> {
    let Some(required) = config.min_level else {
        return Ok(());
    };
    match results.iter().find(|r| r.deepest_level() < required) {
        Some(r) => Err(Error::BudgetExhausted {
            seed: r.seed,
            budget: config.max_samples,
            reached: r.deepest_level(),
            required,
        }),
        None => Ok(()),
    }
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn record_fields(r: &TraceRecord) -> [String; 11] {
    [
        r.replicate.to_string(),
        r.n.to_string(),
        r.lambda_n.to_string(),
        r.m_n.to_string(),
        fmt_opt(r.m_prime_n),
        fmt_opt(r.oracle_stop),
        fmt_opt(r.oracle_limit),
        fmt_opt(r.gap),
        r.value_at_stop.to_string(),
        fmt_opt(r.event_an),
        fmt_opt(r.event_h_prefix),
    ]
}

/// Render rows in the fixed trace schema. The header is always written.
pub fn write_trace_csv<W: Write>(out: W, records: &[TraceRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for r in records {
        writer.write_record(record_fields(r))?;
    }
    writer.flush()?;
    Ok(())
}

fn parse_opt<T: std::str::FromStr>(field: &str, name: &str) -> Result<Option<T>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::Parse(format!("bad {name} field {field:?}")))
}

fn parse_req<T: std::str::FromStr>(field: &str, name: &str) -> Result<T> {
    parse_opt(field, name)?.ok_or_else(|| Error::Parse(format!("missing {name}")))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!(
            "{} does not have the trace header",
            path.display()
        )));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let f = |i: usize| row.get(i).unwrap_or("");
        records.push(TraceRecord {
            replicate: parse_req(f(0), "replicate")?,
            n: parse_req(f(1), "n")?,
            lambda_n: parse_req(f(2), "lambda_n")?,
            m_n: parse_req(f(3), "m_n")?,
            m_prime_n: parse_opt(f(4), "m_prime_n")?,
            oracle_stop: parse_opt(f(5), "oracle_stop")?,
            oracle_limit: parse_opt(f(6), "oracle_limit")?,
            gap: parse_opt(f(7), "gap")?,
            value_at_stop: parse_req(f(8), "value_at_stop")?,
            event_an: parse_opt(f(9), "event_An")?,
            event_h_prefix: parse_opt(f(10), "event_H_prefix")?,
        });
    }
    Ok(records)
}

fn write_snapshots(path: &Path, results: &[ReplicateResult]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["replicate", "n", "offset", "value"])?;
    for r in results {
        for (n, past) in &r.snapshots {
            for (offset, v) in past.values().iter().enumerate() {
                writer.write_record([
                    r.seed.to_string(),
                    n.to_string(),
                    format!("-{offset}"),
                    v.to_string(),
                ])?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMetadata {
    pub seed: u64,
    pub samples: u64,
    pub deepest_level: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_deepest_level: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub artifact: String,
    pub version: String,
    pub rng: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub replicates: Vec<ReplicateMetadata>,
}

impl RunMetadata {
    fn new(command: &str, config: &ExperimentConfig, results: &[ReplicateResult]) -> Self {
        RunMetadata {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng: RNG_NAME.to_string(),
            command: command.to_string(),
            config: config.clone(),
            replicates: results
                .iter()
                .map(|r| ReplicateMetadata {
                    seed: r.seed,
                    samples: r.samples,
                    deepest_level: r.deepest_level(),
                    exact_deepest_level: config.run_exact_variant.then(|| r.exact_deepest_level()),
                })
                .collect(),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Run every configured seed serially and write `trace.csv` plus
/// `metadata.json` (and `snapshots.csv` when requested) into `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<Vec<ReplicateResult>> {
    config.validate()?;
    let results = run_replicates(config, &config.seeds.to_vec(), Execution::Serial)?;
    fs::create_dir_all(out)?;
    let records: Vec<TraceRecord> = results.iter().flat_map(|r| r.records.clone()).collect();
    write_trace_csv(fs::File::create(out.join(TRACE_FILE))?, &records)?;
    if config.snapshot_depth.is_some() {
        write_snapshots(&out.join(SNAPSHOT_FILE), &results)?;
    }
    write_json(
        &out.join(METADATA_FILE),
        &RunMetadata::new("run", config, &results),
    )?;
    check_min_level(config, &results)?;
    Ok(results)
}

pub fn trace_file_name(seed: u64) -> String {
    format!("trace-{seed}.csv")
}

/// Result of [`sweep`].
#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub results: Vec<ReplicateResult>,
    pub summary: SummaryReport,
}

/// Run `replicates` seeds starting at the config's first seed, write one CSV
/// per seed, the metadata, and `summary.json`.
pub fn sweep(
    config: &ExperimentConfig,
    replicates: u64,
    out: &Path,
    execution: Execution,
) -> Result<SweepOutput> {
    if replicates == 0 {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    let start = match &config.seeds {
        Seeds::Single(s) => *s,
        Seeds::Range(r) => r.start,
    };
    let mut config = config.clone();
    config.seeds = Seeds::range(start, replicates);
    config.validate()?;
    let seeds = config.seeds.to_vec();
    let results = run_replicates(&config, &seeds, execution)?;

    fs::create_dir_all(out)?;
    for r in &results {
        write_trace_csv(
            fs::File::create(out.join(trace_file_name(r.seed)))?,
            &r.records,
        )?;
    }
    if config.snapshot_depth.is_some() {
        write_snapshots(&out.join(SNAPSHOT_FILE), &results)?;
    }
    let records: Vec<TraceRecord> = results.iter().flat_map(|r| r.records.clone()).collect();
    let mut summary = summarize(&records, &seeds);
    summary.stationarity = stationarity_reports(&config, &results);
    write_json(
        &out.join(METADATA_FILE),
        &RunMetadata::new("sweep", &config, &results),
    )?;
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    check_min_level(&config, &results)?;
    Ok(SweepOutput { results, summary })
}

fn stationarity_reports(
    config: &ExperimentConfig,
    results: &[ReplicateResult],
) -> Vec<StationarityReport> {
    if !config.source.is_discrete() {
        return Vec::new();
    }
    let first: Vec<DyadicValue> = results.iter().filter_map(|r| r.first).collect();
    config
        .stationarity_levels
        .iter()
        .filter(|&&k| k >= 1)
        .map(|&k| {
            let after: Vec<DyadicValue> = results
                .iter()
                .filter_map(|r| r.after_stop.get(k as usize - 1).copied().flatten())
                .collect();
            StationarityReport::from_samples(
                k,
                results.len(),
                &after,
                &first,
                STATIONARITY_SIGNIFICANCE,
            )
        })
        .collect()
}

/// Aggregates over the rows of one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: u64,
    pub completions: usize,
    pub mean_m: f64,
    pub mean_m_prime: Option<f64>,
    pub mean_gap: Option<f64>,
    pub median_gap: Option<f64>,
    pub mean_lambda: f64,
    /// Fraction of rows with `event_An`, among rows carrying the flag.
    pub event_an_frequency: Option<f64>,
    pub h_prefix_rows: usize,
    /// Fraction of `event_H_prefix` rows that also have `event_An`.
    pub event_an_given_h_prefix: Option<f64>,
}

/// Per-level aggregates across replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub replicates: usize,
    pub rows: usize,
    /// Number of replicates whose deepest completed level is the key.
    pub deepest_level_counts: BTreeMap<u64, usize>,
    pub levels: Vec<LevelSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stationarity: Vec<StationarityReport>,
}

impl SummaryReport {
    pub fn level(&self, n: u64) -> Option<&LevelSummary> {
        self.levels.iter().find(|l| l.n == n)
    }

    /// Deepest level reached by at least `fraction` of the replicates.
    pub fn deepest_level_reached_by(&self, fraction: f64) -> u64 {
        let needed = (fraction * self.replicates as f64).ceil() as usize;
        let mut reached = 0usize;
        for (&level, &count) in self.deepest_level_counts.iter().rev() {
            reached += count;
            if reached >= needed {
                return level;
            }
        }
        0
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    })
}

/// Aggregate trace rows. `replicates` lists every seed that was run, including
/// those that completed no level and so contributed no rows.
pub fn summarize(records: &[TraceRecord], replicates: &[u64]) -> SummaryReport {
    let mut by_level: BTreeMap<u64, Vec<&TraceRecord>> = BTreeMap::new();
    let mut deepest: BTreeMap<u64, u64> = replicates.iter().map(|&s| (s, 0)).collect();
    for r in records {
        by_level.entry(r.n).or_default().push(r);
        let d = deepest.entry(r.replicate).or_insert(0);
        *d = (*d).max(r.n);
    }
    let mut deepest_level_counts = BTreeMap::new();
    for level in deepest.values() {
        *deepest_level_counts.entry(*level).or_insert(0) += 1;
    }

    let levels = by_level
        .into_iter()
        .map(|(n, rows)| {
            let collect = |f: fn(&TraceRecord) -> Option<f64>| -> Vec<f64> {
                rows.iter().filter_map(|r| f(r)).collect()
            };
            let gaps = collect(|r| r.gap);
            let flagged: Vec<bool> = rows.iter().filter_map(|r| r.event_an).collect();
            let with_h: Vec<&&TraceRecord> = rows
                .iter()
                .filter(|r| r.event_h_prefix == Some(true))
                .collect();
            let frequency = |flags: &[bool]| {
                (!flags.is_empty())
                    .then(|| flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64)
            };
            let h_flags: Vec<bool> = with_h.iter().filter_map(|r| r.event_an).collect();
            LevelSummary {
                n,
                completions: rows.len(),
                mean_m: mean(&collect(|r| Some(r.m_n))).unwrap_or(f64::NAN),
                mean_m_prime: mean(&collect(|r| r.m_prime_n)),
                mean_gap: mean(&gaps),
                median_gap: median(&gaps),
                mean_lambda: mean(&collect(|r| Some(r.lambda_n as f64))).unwrap_or(f64::NAN),
                event_an_frequency: frequency(&flagged),
                h_prefix_rows: with_h.len(),
                event_an_given_h_prefix: frequency(&h_flags),
            }
        })
        .collect();

    SummaryReport {
        replicates: deepest.len(),
        rows: records.len(),
        deepest_level_counts,
        levels,
        stationarity: Vec::new(),
    }
}

/// Recompute the summary from the CSV files in a run or sweep directory.
pub fn summarize_dir(dir: &Path) -> Result<SummaryReport> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("trace") && n.ends_with(".csv"))
        })
        .collect();
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no trace CSV files in {}",
            dir.display()
        )));
    }
    files.sort();
    let mut records = Vec::new();
    for f in &files {
        records.extend(read_trace_csv(f)?);
    }
    let metadata_path = dir.join(METADATA_FILE);
    let seeds: Vec<u64> = if metadata_path.exists() {
        let meta: RunMetadata = serde_json::from_str(&fs::read_to_string(metadata_path)?)?;
        meta.replicates.iter().map(|r| r.seed).collect()
    } else {
        records
            .iter()
            .map(|r| r.replicate)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    };
    records.sort_by_key(|r| (r.replicate, r.n));
    Ok(summarize(&records, &seeds))
}

pub const PRESETS: [&str; 4] = [
    "convergence-markov",
    "convergence-iid",
    "continuity-ar1",
    "divergence-counterexample",
];

/// The four experiments that mirror the convergence, continuity and
/// divergence claims.
///
/// Recurrence times grow roughly doubly exponentially in the level, so these
/// budgets reach: sticky chain about level 5-6, fair coin about level 3,
/// AR(1) about level 2-3. The counterexample is only analysed up to level 3.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let config = match name {
        "convergence-markov" => ExperimentConfig {
            seeds: Seeds::range(0, 200),
            stationarity_levels: vec![1, 2, 3],
            ..ExperimentConfig::new(SourceSpec::sticky_binary(0.95), 1_000_000)
        },
        "convergence-iid" => ExperimentConfig {
            seeds: Seeds::range(0, 200),
            stationarity_levels: vec![1, 2],
            ..ExperimentConfig::new(SourceSpec::IidBernoulli { p: 0.5 }, 1_000_000)
        },
        "continuity-ar1" => ExperimentConfig {
            seeds: Seeds::range(0, 200),
            ..ExperimentConfig::new(SourceSpec::Ar1 { a: 0.5, sigma: 1.0 }, 100_000)
        },
        "divergence-counterexample" => ExperimentConfig {
            seeds: Seeds::range(0, 10_000),
            max_level: Some(3),
            run_exact_variant: true,
            ..ExperimentConfig::new(SourceSpec::Counterexample, 1_000_000)
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(config)
}
