//! Streaming estimation of the conditional mean along recurrence stopping times.
//!
//! With `lambda_0 = 0`, level `n` waits for the first `t > 0` at which the block
//! `X_t ..= X_{lambda_{n-1} + t}` quantized at level `n` equals the prefix
//! `X_0 ..= X_{lambda_{n-1}}` quantized at level `n`, and sets
//! `lambda_n = lambda_{n-1} + t`, the index where that occurrence ends. The
//! estimate at `lambda_n` is
//!
//! ```text
//! m_n = (1/n) * sum_{j<n} f_j([X_{lambda_j + 1}]^j)
//! ```
//!
//! where `f_j` maps a level-`j` cell to its left endpoint. The exact-match
//! variant compares raw values instead of cells and averages the raw
//! `X_{lambda'_j + 1}`.
//!
//! Occurrences are found with a failure-function matcher fed one symbol per
//! sample. When a level completes, the pattern grows to the whole observed
//! prefix at the next level and history positions `1..=lambda_n` are replayed
//! through the fresh matcher, since the next occurrence may start anywhere
//! after position 0.

use crate::dyadic::{Dyadic, DyadicValue};
use crate::error::{Error, Result};
use crate::quantize::{cell_index, representative, Cell, CellIndex, PastVector};

/// How samples are compared and averaged.
pub trait MatchRule: Clone + Default {
    type Symbol: Eq + Clone;

    const NAME: &'static str;

    /// Symbol compared by the level-`level` matcher.
    fn symbol(&self, x: &DyadicValue, level: u64) -> Self::Symbol;

    /// Summand contributed by `X_{lambda_j + 1}` at level `j`.
    fn term(&self, x: &DyadicValue, level: u64) -> f64;
}

/// Cell equality at the current level; summands are cell representatives.
#[derive(Clone, Copy, Debug, Default)]
pub struct Quantized;

impl MatchRule for Quantized {
    type Symbol = CellIndex;

    const NAME: &'static str = "quantized";

    fn symbol(&self, x: &DyadicValue, level: u64) -> CellIndex {
        cell_index(x, level)
    }

    fn term(&self, x: &DyadicValue, level: u64) -> f64 {
        representative(&Cell::of(x, level)).to_f64()
    }
}

/// Raw value equality; summands are the raw values. Meant for sources with
/// countably many values.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactMatch;

impl MatchRule for ExactMatch {
    type Symbol = Dyadic;

    const NAME: &'static str = "exact";

    fn symbol(&self, x: &DyadicValue, _level: u64) -> Dyadic {
        x.as_dyadic()
    }

    fn term(&self, x: &DyadicValue, _level: u64) -> f64 {
        x.to_f64()
    }
}

/// Online matcher reporting every position where a full occurrence of the
/// pattern ends. Overlapping occurrences are reported.
#[derive(Clone, Debug)]
pub struct StreamMatcher<S> {
    pattern: Vec<S>,
    failure: Vec<usize>,
    matched: usize,
}

impl<S: Eq> StreamMatcher<S> {
    pub fn new(pattern: Vec<S>) -> Self {
        assert!(!pattern.is_empty(), "pattern must be non-empty");
        let failure = failure_function(&pattern);
        StreamMatcher {
            pattern,
            failure,
            matched: 0,
        }
    }

    pub fn pattern_len(&self) -> usize {
        self.pattern.len()
    }

    /// Feed one symbol; true when an occurrence ends at it.
    pub fn push(&mut self, symbol: &S) -> bool {
        let m = self.pattern.len();
        if self.matched == m {
            self.matched = self.failure[m - 1];
        }
        while self.matched > 0 && self.pattern[self.matched] != *symbol {
            self.matched = self.failure[self.matched - 1];
        }
        if self.pattern[self.matched] == *symbol {
            self.matched += 1;
        }
        self.matched == m
    }
}

/// `failure[q]`: length of the longest proper border of `pattern[..=q]`.
fn failure_function<S: Eq>(pattern: &[S]) -> Vec<usize> {
    let mut failure = vec![0; pattern.len()];
    let mut k = 0;
    for q in 1..pattern.len() {
        while k > 0 && pattern[k] != pattern[q] {
            k = failure[k - 1];
        }
        if pattern[k] == pattern[q] {
            k += 1;
        }
        failure[q] = k;
    }
    failure
}

/// A completed level: `m_n`, emitted at sample index `lambda_n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelCompletion {
    pub level: u64,
    pub lambda: u64,
    pub estimate: f64,
}

/// Streaming estimator state for one sample path.
#[derive(Clone, Debug)]
pub struct Estimator<R: MatchRule> {
    rule: R,
    history: Vec<DyadicValue>,
    // lambdas[0] = 0; lambdas[n] for each completed level n.
    lambdas: Vec<u64>,
    // terms[j] = f_j([X_{lambda_j + 1}]^j).
    terms: Vec<f64>,
    completions: Vec<LevelCompletion>,
    matcher: Option<StreamMatcher<R::Symbol>>,
    cursor: usize,
    max_level: Option<u64>,
}

pub type QuantizedEstimator = Estimator<Quantized>;
pub type ExactEstimator = Estimator<ExactMatch>;

impl<R: MatchRule> Default for Estimator<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: MatchRule> Estimator<R> {
    pub fn new() -> Self {
        Estimator {
            rule: R::default(),
            history: Vec::new(),
            lambdas: vec![0],
            terms: Vec::new(),
            completions: Vec::new(),
            matcher: None,
            cursor: 1,
            max_level: None,
        }
    }

    /// Stop matching once level `max_level` has completed.
    pub fn with_max_level(mut self, max_level: u64) -> Self {
        self.max_level = Some(max_level);
        self
    }

    pub fn rule(&self) -> &R {
        &self.rule
    }

    pub fn history(&self) -> &[DyadicValue] {
        &self.history
    }

    pub fn completions(&self) -> &[LevelCompletion] {
        &self.completions
    }

    /// `lambda_0 ..= lambda_n` for the completed levels.
    pub fn stopping_times(&self) -> &[u64] {
        &self.lambdas
    }

    /// Number of completed levels.
    pub fn completed_levels(&self) -> u64 {
        self.completions.len() as u64
    }

    /// The level currently being matched.
    pub fn active_level(&self) -> u64 {
        self.lambdas.len() as u64
    }

    /// True once `max_level` has completed; later samples are only recorded.
    pub fn is_finished(&self) -> bool {
        self.max_level
            .is_some_and(|max| self.completed_levels() >= max)
    }

    /// Length of the pattern the active matcher is looking for.
    pub fn pattern_len(&self) -> Option<usize> {
        self.matcher.as_ref().map(StreamMatcher::pattern_len)
    }

    /// Append the next sample and advance the matcher.
    ///
    /// After a completion at index `p` the replay covers positions `1..=p`,
    /// fewer than the `p + 1` symbols of the new pattern, so a replay never
    /// completes a level and each call emits at most one completion.
    pub fn step(&mut self, x: DyadicValue) -> Option<LevelCompletion> {
        self.history.push(x);
        if self.is_finished() {
            return None;
        }
        if self.matcher.is_none() {
            self.rebuild();
        }
        let mut emitted = None;
        while self.cursor < self.history.len() {
            let position = self.cursor;
            self.cursor += 1;
            let level = self.active_level();
            let symbol = self.rule.symbol(&self.history[position], level);
            let Some(matcher) = self.matcher.as_mut() else {
                break;
            };
            if matcher.push(&symbol) {
                debug_assert!(emitted.is_none(), "replay completed a level");
                emitted = Some(self.complete(position));
                if self.is_finished() {
                    self.matcher = None;
                    self.cursor = self.history.len();
                } else {
                    self.rebuild();
                }
            }
        }
        emitted
    }

    fn complete(&mut self, position: usize) -> LevelCompletion {
        let level = self.active_level();
        let previous = *self.lambdas.last().expect("lambda_0 is always present") as usize;
        self.lambdas.push(position as u64);
        // lambda_n >= lambda_{n-1} + 1, so this sample has been observed.
        let term = self.rule.term(&self.history[previous + 1], level - 1);
        self.terms.push(term);
        let completion = LevelCompletion {
            level,
            lambda: position as u64,
            estimate: self.terms.iter().sum::<f64>() / level as f64,
        };
        self.completions.push(completion);
        completion
    }

    /// Pattern `[X_0 ..= X_{lambda_{n-1}}]^n` for the active level `n`.
    fn rebuild(&mut self) {
        let level = self.active_level();
        let end = *self.lambdas.last().expect("lambda_0 is always present") as usize;
        let pattern = self.history[..=end]
            .iter()
            .map(|x| self.rule.symbol(x, level))
            .collect();
        self.matcher = Some(StreamMatcher::new(pattern));
        self.cursor = 1;
    }

    /// `(X_{lambda_n}, X_{lambda_n - 1}, ..., X_{lambda_n - depth})` for the
    /// deepest completed level `n`.
    pub fn backward_snapshot(&self, depth: usize) -> Result<PastVector> {
        let lambda = self.completions.last().ok_or(Error::NoCompletion)?.lambda;
        if depth as u64 > lambda {
            return Err(Error::SnapshotTooDeep { depth, lambda });
        }
        let end = lambda as usize;
        PastVector::new(
            self.history[end - depth..=end]
                .iter()
                .rev()
                .copied()
                .collect(),
        )
    }
}

/// `m_n` recomputed from the stopping times and the raw history.
pub fn estimate_from_stopping_times<R: MatchRule>(
    rule: &R,
    history: &[DyadicValue],
    lambdas: &[u64],
    level: u64,
) -> f64 {
    let sum: f64 = (0..level)
        .map(|j| rule.term(&history[lambdas[j as usize] as usize + 1], j))
        .sum();
    sum / level as f64
}

/// Brute-force `lambda_n`: scan `t = 1, 2, ...` comparing each quantized
/// window of length `lambda_{n-1} + 1` against the prefix.
pub fn naive_lambda_oracle<R: MatchRule>(
    rule: &R,
    history: &[DyadicValue],
    previous_lambda: u64,
    level: u64,
) -> Result<u64> {
    let len = previous_lambda as usize + 1;
    if history.len() < len {
        return Err(Error::NoRecurrence { level });
    }
    let symbols: Vec<R::Symbol> = history.iter().map(|x| rule.symbol(x, level)).collect();
    let prefix = &symbols[..len];
    (1..)
        .take_while(|t| t + len <= symbols.len())
        .find(|&t| symbols[t..t + len] == *prefix)
        .map(|t| previous_lambda + t as u64)
        .ok_or(Error::NoRecurrence { level })
}
