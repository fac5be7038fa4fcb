//! Ground-truth oracles and event detectors evaluated at each completed level.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dyadic::{Dyadic, DyadicValue};
use crate::error::{Error, Result};
use crate::estimator::QuantizedEstimator;
use crate::sources::{SourceModel, SourceSpec};

/// One output row: the state of both estimators at a completed level.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub replicate: u64,
    pub n: u64,
    pub lambda_n: u64,
    pub m_n: f64,
    pub m_prime_n: Option<f64>,
    pub oracle_stop: Option<f64>,
    pub oracle_limit: Option<f64>,
    pub gap: Option<f64>,
    pub value_at_stop: DyadicValue,
    pub event_an: Option<bool>,
    pub event_h_prefix: Option<bool>,
}

/// `E(X_{lambda+1} | X_0 ..= X_lambda)`.
///
/// `lambda` is a function of the observed prefix, so by the strong Markov
/// property the conditional mean depends only on the statistic carried by
/// `X_lambda` (state, last value, or replay position).
pub fn oracle_stop(source: &SourceModel, history: &[DyadicValue], lambda: u64) -> Result<f64> {
    let index =
        usize::try_from(lambda).map_err(|_| Error::InvalidParameter("lambda too large".into()))?;
    source.cond_mean(source.conditioning_at(history, index)?)
}

/// Current estimate of the conditional mean given the backward-limit past.
///
/// For the Markov-type sources here that mean depends only on the most recent
/// coordinate, and `X_{lambda_n}` converges to it, so this is the conditional
/// mean at the state of `X_{lambda_n}`.
pub fn oracle_limit(source: &SourceModel, history: &[DyadicValue], lambda: u64) -> Result<f64> {
    oracle_stop(source, history, lambda)
}

/// `X_{lambda_n}` is a nonzero value below `2^-(n+1)`, i.e. it shares the
/// level-`(n+1)` cell of zero without being zero.
pub fn detect_an(value_at_stop: &DyadicValue, n: u64) -> bool {
    let v = value_at_stop.as_dyadic();
    let bound = Dyadic::pow2(-i64::try_from(n).unwrap_or(i64::MAX - 1) - 1);
    !v.is_zero() && v < bound
}

/// The checkable part of the divergence event: `(X_0, X_1) = (0, 1)`.
pub fn detect_h_prefix(history: &[DyadicValue]) -> bool {
    matches!(history, [x0, x1, ..] if x0.is_zero() && *x1 == DyadicValue::integer(1))
}

/// Two-sample comparison of discrete empirical laws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalComparison {
    pub samples_a: usize,
    pub samples_b: usize,
    /// Total-variation distance on the merged support.
    pub tv_distance: f64,
    /// Chi-square homogeneity statistic after pooling sparse values.
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Minimum combined count for a value to keep its own chi-square bin.
const MIN_BIN_COUNT: usize = 10;

pub fn compare_marginals(a: &[DyadicValue], b: &[DyadicValue]) -> MarginalComparison {
    let mut counts: BTreeMap<Dyadic, (usize, usize)> = BTreeMap::new();
    for x in a {
        counts.entry(x.as_dyadic()).or_default().0 += 1;
    }
    for x in b {
        counts.entry(x.as_dyadic()).or_default().1 += 1;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let tv_distance = if a.is_empty() || b.is_empty() {
        1.0
    } else {
        0.5 * counts
            .values()
            .map(|&(ca, cb)| (ca as f64 / na - cb as f64 / nb).abs())
            .sum::<f64>()
    };

    let mut bins: Vec<(usize, usize)> = Vec::new();
    let mut pooled = (0, 0);
    for &(ca, cb) in counts.values() {
        if ca + cb >= MIN_BIN_COUNT {
            bins.push((ca, cb));
        } else {
            pooled.0 += ca;
            pooled.1 += cb;
        }
    }
    if pooled.0 + pooled.1 > 0 {
        if pooled.0 + pooled.1 >= MIN_BIN_COUNT || bins.is_empty() {
            bins.push(pooled);
        } else {
            let smallest = (0..bins.len())
                .min_by_key(|&i| bins[i].0 + bins[i].1)
                .expect("non-empty");
            bins[smallest].0 += pooled.0;
            bins[smallest].1 += pooled.1;
        }
    }

    let total = na + nb;
    let mut chi_square = 0.0;
    if na > 0.0 && nb > 0.0 {
        for &(ca, cb) in &bins {
            let row = (ca + cb) as f64;
            for (observed, group) in [(ca as f64, na), (cb as f64, nb)] {
                let expected = row * group / total;
                chi_square += (observed - expected).powi(2) / expected;
            }
        }
    }
    let degrees_of_freedom = bins.len().saturating_sub(1);
    let p_value = if degrees_of_freedom == 0 {
        1.0
    } else {
        ChiSquared::new(degrees_of_freedom as f64)
            .expect("positive degrees of freedom")
            .sf(chi_square)
    };
    MarginalComparison {
        samples_a: a.len(),
        samples_b: b.len(),
        tv_distance,
        chi_square,
        degrees_of_freedom,
        p_value,
    }
}

/// Law of `X_{lambda_k + 1}` across replicates versus the law of `X_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub level: u64,
    pub replicates: usize,
    pub completed: usize,
    pub comparison: MarginalComparison,
    pub significance: f64,
    pub pass: bool,
}

impl StationarityReport {
    pub fn from_samples(
        level: u64,
        replicates: usize,
        after_stop: &[DyadicValue],
        first: &[DyadicValue],
        significance: f64,
    ) -> Self {
        let comparison = compare_marginals(after_stop, first);
        let pass = comparison.p_value >= significance;
        StationarityReport {
            level,
            replicates,
            completed: after_stop.len(),
            comparison,
            significance,
            pass,
        }
    }
}

/// Run `seeds.len()` independent paths of up to `horizon` samples, collect
/// `X_{lambda_k + 1}` where level `k` completes, and compare with `X_1`.
pub fn stationarity_check(
    spec: &SourceSpec,
    level: u64,
    horizon: u64,
    seeds: Range<u64>,
    significance: f64,
) -> Result<StationarityReport> {
    if !spec.is_discrete() {
        return Err(Error::InvalidParameter(format!(
            "stationarity check needs a discrete source, got {}",
            spec.kind_name()
        )));
    }
    if level == 0 || horizon < 2 {
        return Err(Error::InvalidParameter(
            "need level >= 1 and horizon >= 2".into(),
        ));
    }
    let replicates = seeds.clone().count();
    let mut after_stop = Vec::new();
    let mut first = Vec::new();
    for seed in seeds {
        let mut source = SourceModel::new(spec, seed)?;
        let mut est = QuantizedEstimator::new().with_max_level(level);
        let mut target: Option<usize> = None;
        for t in 0..horizon as usize {
            let x = source.next();
            if t == 1 {
                first.push(x);
            }
            if let Some(c) = est.step(x) {
                if c.level == level {
                    target = Some(c.lambda as usize + 1);
                }
            }
            if target == Some(t) {
                after_stop.push(x);
                break;
            }
        }
    }
    if after_stop.len() * 2 < replicates {
        return Err(Error::InsufficientCompletions {
            level,
            completed: after_stop.len(),
            replicates,
        });
    }
    Ok(StationarityReport::from_samples(
        level,
        replicates,
        &after_stop,
        &first,
        significance,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::counterexample_value;

    #[test]
    fn an_examples() {
        let h2 = DyadicValue::Exact(counterexample_value(2));
        assert!(detect_an(&h2, 3));
        assert!(!detect_an(&h2, 5));
        assert!(detect_an(&h2, 2));
        for n in 0..50 {
            assert!(!detect_an(&DyadicValue::ZERO, n));
        }
        let h40 = DyadicValue::Exact(counterexample_value(40));
        assert!(detect_an(&h40, 1 << 39));
        assert!(!detect_an(&h40, 1 << 40));
    }

    #[test]
    fn h_prefix_examples() {
        let v = |xs: &[i64]| {
            xs.iter()
                .copied()
                .map(DyadicValue::integer)
                .collect::<Vec<_>>()
        };
        assert!(detect_h_prefix(&v(&[0, 1, 0])));
        assert!(!detect_h_prefix(&v(&[0, 0, 1])));
        assert!(!detect_h_prefix(&v(&[1, 1])));
        assert!(!detect_h_prefix(&v(&[0])));
    }

    #[test]
    fn oracle_stop_replay_and_counterexample() {
        let spec = SourceSpec::Replay {
            pattern: [0, 1, 0].into_iter().map(DyadicValue::integer).collect(),
            phase: 0,
        };
        let mut source = SourceModel::new(&spec, 0).unwrap();
        let history: Vec<_> = (0..9).map(|_| source.next()).collect();
        assert_eq!(oracle_stop(&source, &history, 5).unwrap(), 0.0);
        assert_eq!(oracle_stop(&source, &history, 2).unwrap(), 0.0);
        assert_eq!(oracle_stop(&source, &history, 3).unwrap(), 1.0);

        let ce = SourceModel::counterexample(0);
        let path = vec![
            DyadicValue::ZERO,
            DyadicValue::integer(1),
            DyadicValue::Exact(counterexample_value(5)),
        ];
        assert_eq!(oracle_stop(&ce, &path, 0).unwrap(), 0.5);
        assert_eq!(oracle_stop(&ce, &path, 2).unwrap(), 0.0);
        assert!(oracle_stop(&ce, &path, 3).is_err());
    }

    #[test]
    fn identical_samples_compare_cleanly() {
        let xs: Vec<_> = (0..100).map(|i| DyadicValue::integer(i % 2)).collect();
        let c = compare_marginals(&xs, &xs);
        assert_eq!(c.tv_distance, 0.0);
        assert_eq!(c.chi_square, 0.0);
        assert_eq!(c.p_value, 1.0);
    }

    #[test]
    fn disjoint_samples_are_far_apart() {
        let a = vec![DyadicValue::integer(0); 50];
        let b = vec![DyadicValue::integer(1); 50];
        let c = compare_marginals(&a, &b);
        assert_eq!(c.tv_distance, 1.0);
        assert!(c.p_value < 1e-10);
    }

    #[test]
    fn constant_source_has_zero_distance() {
        let spec = SourceSpec::constant(DyadicValue::ZERO);
        let r = stationarity_check(&spec, 3, 100, 0..50, 1e-3).unwrap();
        assert_eq!(r.completed, 50);
        assert_eq!(r.comparison.tv_distance, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn continuous_sources_are_rejected() {
        let spec = SourceSpec::Ar1 { a: 0.5, sigma: 1.0 };
        assert!(matches!(
            stationarity_check(&spec, 1, 100, 0..10, 1e-3),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn short_horizon_reports_insufficient_completions() {
        let spec = SourceSpec::IidBernoulli { p: 0.5 };
        assert!(matches!(
            stationarity_check(&spec, 3, 3, 0..20, 1e-3),
            Err(Error::InsufficientCompletions { level: 3, .. })
        ));
    }
}
