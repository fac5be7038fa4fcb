//! Seeded stationary sources.
//!
//! Every source starts in its stationary law and is driven by a single
//! [`ChaCha8Rng`] seeded from a `u64`, so `(spec, seed)` fixes the sample path
//! bit for bit. Sources with a one-step-sufficient statistic also expose the
//! exact conditional mean of the next value.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dyadic::{Dyadic, DyadicValue};
use crate::error::{Error, Result};

/// Name of the generator behind every source, recorded in run metadata.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9) seeded by SeedableRng::seed_from_u64";

/// Tolerance for row sums and the stationary residual.
pub const MARKOV_TOLERANCE: f64 = 1.0 / (1u64 << 40) as f64;

/// Largest counterexample state whose value `2^-(2^i + 1)` fits the `i64`
/// exponent of [`Dyadic`]. Deeper states share its value; a draw from state 1
/// lands beyond it with probability `2^-62`.
pub const COUNTEREXAMPLE_MAX_EXACT_STATE: u64 = 62;

/// Source parameters as they appear in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Finite-state chain emitting `values[state]`.
    Markov {
        values: Vec<DyadicValue>,
        transitions: Vec<Vec<f64>>,
    },
    /// The countable-state chain on which the quantized estimator fails.
    Counterexample,
    IidBernoulli {
        p: f64,
    },
    IidUniform {
        low: f64,
        high: f64,
    },
    Ar1 {
        a: f64,
        sigma: f64,
    },
    /// Deterministic cyclic replay of `pattern`, starting at offset `phase`.
    Replay {
        pattern: Vec<DyadicValue>,
        #[serde(default)]
        phase: usize,
    },
}

impl SourceSpec {
    /// Two-state chain on {0, 1} that keeps its state with probability `p_stay`.
    pub fn sticky_binary(p_stay: f64) -> Self {
        SourceSpec::Markov {
            values: vec![DyadicValue::integer(0), DyadicValue::integer(1)],
            transitions: vec![vec![p_stay, 1.0 - p_stay], vec![1.0 - p_stay, p_stay]],
        }
    }

    pub fn constant(value: DyadicValue) -> Self {
        SourceSpec::Replay {
            pattern: vec![value],
            phase: 0,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SourceSpec::Markov { .. } => "markov",
            SourceSpec::Counterexample => "counterexample",
            SourceSpec::IidBernoulli { .. } => "iid_bernoulli",
            SourceSpec::IidUniform { .. } => "iid_uniform",
            SourceSpec::Ar1 { .. } => "ar1",
            SourceSpec::Replay { .. } => "replay",
        }
    }

    /// Whether the source takes countably many values.
    pub fn is_discrete(&self) -> bool {
        !matches!(self, SourceSpec::IidUniform { .. } | SourceSpec::Ar1 { .. })
    }
}

/// A finite Markov chain with per-state emitted values and its stationary law.
#[derive(Clone, Debug)]
pub struct MarkovSpec {
    values: Vec<DyadicValue>,
    transitions: Vec<Vec<f64>>,
    stationary: Vec<f64>,
    cumulative: Vec<Vec<f64>>,
    stationary_cumulative: Vec<f64>,
}

impl MarkovSpec {
    pub fn new(values: Vec<DyadicValue>, transitions: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != transitions.len() {
            return Err(Error::InvalidParameter(format!(
                "{} state values for {} transition rows",
                values.len(),
                transitions.len()
            )));
        }
        let stationary = stationary_distribution(&transitions)?;
        let cumulative = transitions.iter().map(|row| cumulative_sum(row)).collect();
        let stationary_cumulative = cumulative_sum(&stationary);
        Ok(MarkovSpec {
            values,
            transitions,
            stationary,
            cumulative,
            stationary_cumulative,
        })
    }

    pub fn states(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[DyadicValue] {
        &self.values
    }

    pub fn transitions(&self) -> &[Vec<f64>] {
        &self.transitions
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// `E[value(next) | state]`.
    pub fn cond_mean(&self, state: usize) -> f64 {
        self.transitions[state]
            .iter()
            .zip(&self.values)
            .map(|(p, v)| p * v.to_f64())
            .sum()
    }

    /// The state emitting `value`, if exactly one does.
    pub fn state_of(&self, value: &DyadicValue) -> Option<usize> {
        let mut found = self.values.iter().enumerate().filter(|(_, v)| *v == value);
        let (state, _) = found.next()?;
        found.next().is_none().then_some(state)
    }
}

fn cumulative_sum(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Index of the first cumulative weight strictly above `u`, skipping
/// zero-probability states when rounding leaves the total just below 1.
fn sample_index(cumulative: &[f64], weights: &[f64], u: f64) -> usize {
    match cumulative.iter().position(|&c| u < c) {
        Some(i) => i,
        None => weights.iter().rposition(|&w| w > 0.0).unwrap_or(0),
    }
}

/// Stationary law of an irreducible finite chain.
///
/// Solves `pi (P - I) = 0` with one equation replaced by `sum(pi) = 1`; if the
/// solve is singular or its residual is too large, falls back to power
/// iteration on the lazy chain `(P + I) / 2`.
pub fn stationary_distribution(transitions: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = transitions.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty transition matrix".into()));
    }
    for (i, row) in transitions.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidParameter(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "row {i} has a negative or non-finite entry"
            )));
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > MARKOV_TOLERANCE {
            return Err(Error::InvalidParameter(format!("row {i} sums to {total}")));
        }
    }
    check_irreducible(transitions)?;

    if let Some(pi) = solve_linear(transitions) {
        if residual(transitions, &pi) < MARKOV_TOLERANCE {
            return Ok(pi);
        }
    }
    let pi = power_iteration(transitions);
    let r = residual(transitions, &pi);
    if r < MARKOV_TOLERANCE {
        Ok(pi)
    } else {
        Err(Error::NotConverged { residual: r })
    }
}

fn check_irreducible(transitions: &[Vec<f64>]) -> Result<()> {
    let n = transitions.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                let p = if forward {
                    transitions[i][j]
                } else {
                    transitions[j][i]
                };
                if p > 0.0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    };
    // Irreducible iff state 0 reaches every state and every state reaches 0.
    for (direction, seen) in [("reached from", reach(true)), ("reaching", reach(false))] {
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::Reducible(format!(
                "state {j} is not {direction} state 0"
            )));
        }
    }
    Ok(())
}

fn solve_linear(transitions: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = transitions.len();
    // Row i of the system is column i of (P - I), i.e. (P^T - I) pi = 0.
    let mut a = DMatrix::from_fn(n, n, |i, j| {
        transitions[j][i] - if i == j { 1.0 } else { 0.0 }
    });
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b)?;
    if x.iter().any(|v| !v.is_finite() || *v < -MARKOV_TOLERANCE) {
        return None;
    }
    Some(normalize(x.iter().map(|v| v.max(0.0)).collect()))
}

fn power_iteration(transitions: &[Vec<f64>]) -> Vec<f64> {
    let n = transitions.len();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; n];
        for (i, row) in transitions.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                next[j] += pi[i] * p;
            }
        }
        let next = normalize(next.iter().zip(&pi).map(|(a, b)| 0.5 * (a + b)).collect());
        let delta = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pi = next;
        if delta < MARKOV_TOLERANCE * 1e-3 {
            break;
        }
    }
    pi
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.into_iter().map(|x| x / total).collect()
}

/// `max_j |(pi P)_j - pi_j|`.
fn residual(transitions: &[Vec<f64>], pi: &[f64]) -> f64 {
    let n = pi.len();
    (0..n)
        .map(|j| {
            let flow: f64 = (0..n).map(|i| pi[i] * transitions[i][j]).sum();
            (flow - pi[j]).abs()
        })
        .fold(0.0, f64::max)
}

/// Value emitted by counterexample state `i`: 0, 1, then `2^-(2^i) / 2`.
pub fn counterexample_value(state: u64) -> Dyadic {
    match state {
        0 => Dyadic::ZERO,
        1 => Dyadic::ONE,
        i => {
            let i = i.min(COUNTEREXAMPLE_MAX_EXACT_STATE);
            Dyadic::pow2(-(1i64 << i) - 1)
        }
    }
}

/// Inverse of [`counterexample_value`] on its range.
pub fn counterexample_state(value: &DyadicValue) -> Option<u64> {
    let d = value.as_dyadic();
    if d.is_zero() {
        return Some(0);
    }
    if d == Dyadic::ONE {
        return Some(1);
    }
    if d.mantissa() != 1 || d.exponent() > -5 {
        return None;
    }
    let power = -d.exponent() - 1;
    (power.count_ones() == 1).then(|| u64::from(power.trailing_zeros()))
}

/// `E[X_1 | X_0 = 1] = sum_{i>=2} 2^-i h(i)`, summed until the terms vanish.
pub fn counterexample_mean_after_one() -> f64 {
    (2..COUNTEREXAMPLE_MAX_EXACT_STATE)
        .map(|i| Dyadic::pow2(-(i as i64)).to_f64() * counterexample_value(i).to_f64())
        .take_while(|term| *term > 0.0)
        .sum()
}

/// The statistic a source's conditional mean depends on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Conditioning {
    /// Nothing: the next value is independent of the past.
    Nothing,
    /// Current Markov state.
    State(u64),
    /// Most recent value.
    LastValue(f64),
    /// Position within a deterministic replay, counted from the first sample.
    Position(u64),
}

#[derive(Clone, Debug)]
enum Dynamics {
    Markov {
        chain: MarkovSpec,
        state: usize,
    },
    Counterexample {
        state: u64,
    },
    IidBernoulli {
        p: f64,
    },
    IidUniform {
        low: f64,
        high: f64,
    },
    Ar1 {
        a: f64,
        sigma: f64,
        last: f64,
    },
    Replay {
        pattern: Vec<DyadicValue>,
        phase: usize,
        position: u64,
    },
}

/// A running source: parameters, generator and current state.
#[derive(Clone, Debug)]
pub struct SourceModel {
    spec: SourceSpec,
    seed: u64,
    rng: ChaCha8Rng,
    dynamics: Dynamics,
    emitted: u64,
}

impl SourceModel {
    pub fn new(spec: &SourceSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dynamics = match spec {
            SourceSpec::Markov {
                values,
                transitions,
            } => {
                let chain = MarkovSpec::new(values.clone(), transitions.clone())?;
                let u: f64 = rng.random();
                let state = sample_index(&chain.stationary_cumulative, &chain.stationary, u);
                Dynamics::Markov { chain, state }
            }
            SourceSpec::Counterexample => {
                // pi(0) = 4/7, pi(1) = 2/7, pi(i) = 2^-(i-1) / 7 for i >= 2.
                let state = match rng.random_range(0..7u32) {
                    0..=3 => 0,
                    4 | 5 => 1,
                    _ => 2 + geometric_failures(&mut rng),
                };
                Dynamics::Counterexample { state }
            }
            SourceSpec::IidBernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidParameter(format!("bernoulli p = {p}")));
                }
                Dynamics::IidBernoulli { p: *p }
            }
            SourceSpec::IidUniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(Error::InvalidParameter(format!(
                        "uniform on [{low}, {high})"
                    )));
                }
                Dynamics::IidUniform {
                    low: *low,
                    high: *high,
                }
            }
            SourceSpec::Ar1 { a, sigma } => {
                if a.is_nan() || a.abs() >= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "ar1 needs |a| < 1, got {a}"
                    )));
                }
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "ar1 needs sigma > 0, got {sigma}"
                    )));
                }
                let z: f64 = rng.sample(StandardNormal);
                let last = z * sigma / (1.0 - a * a).sqrt();
                Dynamics::Ar1 {
                    a: *a,
                    sigma: *sigma,
                    last,
                }
            }
            SourceSpec::Replay { pattern, phase } => {
                if pattern.is_empty() {
                    return Err(Error::InvalidParameter("empty replay pattern".into()));
                }
                Dynamics::Replay {
                    pattern: pattern.clone(),
                    phase: phase % pattern.len(),
                    position: 0,
                }
            }
        };
        Ok(SourceModel {
            spec: spec.clone(),
            seed,
            rng,
            dynamics,
            emitted: 0,
        })
    }

    /// The counterexample chain, started from its stationary law.
    pub fn counterexample(seed: u64) -> Self {
        Self::new(&SourceSpec::Counterexample, seed).expect("counterexample has no parameters")
    }

    pub fn ar1(a: f64, sigma: f64, seed: u64) -> Result<Self> {
        Self::new(&SourceSpec::Ar1 { a, sigma }, seed)
    }

    pub fn spec(&self) -> &SourceSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of samples emitted so far.
    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Current Markov state (the state of the last emitted sample, or the
    /// initial state before the first call to [`next`](Self::next)).
    pub fn markov_state(&self) -> Option<u64> {
        match &self.dynamics {
            Dynamics::Markov { state, .. } => Some(*state as u64),
            Dynamics::Counterexample { state } => Some(*state),
            _ => None,
        }
    }

    pub fn markov_spec(&self) -> Option<&MarkovSpec> {
        match &self.dynamics {
            Dynamics::Markov { chain, .. } => Some(chain),
            _ => None,
        }
    }

    /// Emit the next sample. The first call returns `X_0`.
    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> DyadicValue {
        if self.emitted > 0 {
            self.advance();
        }
        self.emitted += 1;
        self.current()
    }

    fn advance(&mut self) {
        let rng = &mut self.rng;
        match &mut self.dynamics {
            Dynamics::Markov { chain, state } => {
                let u: f64 = rng.random();
                *state = sample_index(&chain.cumulative[*state], &chain.transitions[*state], u);
            }
            Dynamics::Counterexample { state } => {
                *state = match *state {
                    0 => u64::from(rng.random::<bool>()),
                    1 => {
                        if rng.random::<bool>() {
                            0
                        } else {
                            2 + geometric_failures(rng)
                        }
                    }
                    _ => 0,
                };
            }
            Dynamics::Ar1 { a, sigma, last } => {
                let z: f64 = rng.sample(StandardNormal);
                *last = *a * *last + *sigma * z;
            }
            Dynamics::Replay { position, .. } => *position += 1,
            // iid kinds draw fresh in `current`.
            Dynamics::IidBernoulli { .. } | Dynamics::IidUniform { .. } => {}
        }
    }

    fn current(&mut self) -> DyadicValue {
        let rng = &mut self.rng;
        match &self.dynamics {
            Dynamics::Markov { chain, state } => chain.values[*state],
            Dynamics::Counterexample { state } => DyadicValue::Exact(counterexample_value(*state)),
            Dynamics::IidBernoulli { p } => DyadicValue::integer(i64::from(rng.random_bool(*p))),
            Dynamics::IidUniform { low, high } => {
                let u: f64 = rng.random();
                DyadicValue::real(low + (high - low) * u)
            }
            Dynamics::Ar1 { last, .. } => DyadicValue::real(*last),
            Dynamics::Replay {
                pattern,
                phase,
                position,
            } => pattern[(*phase + (*position % pattern.len() as u64) as usize) % pattern.len()],
        }
    }

    /// Exact `E[X_{t+1} | statistic]` for this source.
    pub fn cond_mean(&self, given: Conditioning) -> Result<f64> {
        let mismatch = || {
            Error::NoOracle(format!(
                "{} source cannot condition on {given:?}",
                self.spec.kind_name()
            ))
        };
        match (&self.dynamics, given) {
            (Dynamics::Markov { chain, .. }, Conditioning::State(s)) => {
                let s = usize::try_from(s)
                    .ok()
                    .filter(|s| *s < chain.states())
                    .ok_or_else(mismatch)?;
                Ok(chain.cond_mean(s))
            }
            (Dynamics::Counterexample { .. }, Conditioning::State(s)) => Ok(match s {
                0 => 0.5,
                1 => counterexample_mean_after_one(),
                _ => 0.0,
            }),
            (Dynamics::IidBernoulli { p }, _) => Ok(*p),
            (Dynamics::IidUniform { low, high }, _) => Ok(0.5 * (low + high)),
            (Dynamics::Ar1 { a, .. }, Conditioning::LastValue(x)) => Ok(a * x),
            (Dynamics::Replay { pattern, phase, .. }, Conditioning::Position(t)) => {
                let len = pattern.len() as u64;
                let next = (*phase as u64 + (t + 1) % len) % len;
                Ok(pattern[next as usize].to_f64())
            }
            _ => Err(mismatch()),
        }
    }

    /// The statistic carried by sample `values[index]` of a path from this source.
    pub fn conditioning_at(&self, values: &[DyadicValue], index: usize) -> Result<Conditioning> {
        let value = values.get(index).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "index {index} outside a history of {}",
                values.len()
            ))
        })?;
        match &self.dynamics {
            Dynamics::Markov { chain, .. } => chain
                .state_of(value)
                .map(|s| Conditioning::State(s as u64))
                .ok_or_else(|| {
                    Error::NoOracle(format!(
                        "value {value} does not identify a unique Markov state"
                    ))
                }),
            Dynamics::Counterexample { .. } => counterexample_state(value)
                .map(Conditioning::State)
                .ok_or_else(|| Error::NoOracle(format!("{value} is not a counterexample value"))),
            Dynamics::IidBernoulli { .. } | Dynamics::IidUniform { .. } => {
                Ok(Conditioning::Nothing)
            }
            Dynamics::Ar1 { .. } => Ok(Conditioning::LastValue(value.to_f64())),
            Dynamics::Replay { .. } => Ok(Conditioning::Position(index as u64)),
        }
    }

    /// Mean of the stationary marginal, when known in closed form.
    pub fn marginal_mean(&self) -> Option<f64> {
        match &self.dynamics {
            Dynamics::Markov { chain, .. } => Some(
                chain
                    .stationary
                    .iter()
                    .zip(&chain.values)
                    .map(|(p, v)| p * v.to_f64())
                    .sum(),
            ),
            Dynamics::IidBernoulli { p } => Some(*p),
            Dynamics::IidUniform { low, high } => Some(0.5 * (low + high)),
            Dynamics::Ar1 { .. } => Some(0.0),
            _ => None,
        }
    }
}

/// Number of fair-coin failures before the first success, drawn bit by bit
/// with no truncation.
fn geometric_failures<R: RngCore>(rng: &mut R) -> u64 {
    let mut failures = 0u64;
    loop {
        let bits = rng.next_u64();
        if bits != 0 {
            return failures + u64::from(bits.trailing_zeros());
        }
        failures += 64;
    }
}
