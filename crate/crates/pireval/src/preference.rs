//! Meta-evaluation of ranking metrics against explicit pairwise preferences.
//!
//! For each query a user compared two result lists and recorded which one
//! they preferred. A metric predicts the same comparison through the sign of
//! its score difference; the preference identification ratio (PIR) is the
//! net rate of correct predictions over preference-bearing queries, with
//! differences below a threshold `t` abstaining. Sweeping `t` over a grid
//! yields the profile a study reports per metric and cutoff.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::metrics::{
    metric_eval, CutoffK, JudgmentSet, MetricKind, MetricsError, RankedList,
};

#[derive(Debug, Error, PartialEq)]
pub enum PrefError {
    #[error("no preference-bearing queries: PIR is undefined")]
    NoPreferences,
    #[error("cannot pick a best threshold from an empty sweep")]
    EmptySweep,
    #[error("query {0} has a preference but no metric delta")]
    MissingDelta(String),
    #[error("threshold {0} must be finite and non-negative")]
    InvalidThreshold(f64),
    #[error("threshold step {0} must be finite and positive")]
    InvalidStep(f64),
    #[error("threshold ceiling {0} must be finite and non-negative")]
    InvalidMax(f64),
    #[error("paired lists answer different queries: {first} vs {second}")]
    QueryMismatch { first: String, second: String },
    #[error("paired lists for query {0} share one list id")]
    SameListIds(String),
    #[error("query {query} has {count} lists, pairing needs exactly 2")]
    UnpairedQuery { query: String, count: usize },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// The verdict a user gave when comparing the two lists of one query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreferenceJudgment {
    First,
    Second,
    Tie,
}

/// How TIE verdicts enter the PIR denominator. The default drops them from
/// the query set entirely; `CountInDenominator` keeps them as queries a
/// metric can never score on, pulling PIR toward zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    #[default]
    Exclude,
    CountInDenominator,
}

/// Two result lists for the same query, in the order shown to the user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListPair {
    first: RankedList,
    second: RankedList,
}

impl ListPair {
    pub fn new(first: RankedList, second: RankedList) -> Result<Self, PrefError> {
        if first.query_id() != second.query_id() {
            return Err(PrefError::QueryMismatch {
                first: first.query_id().to_string(),
                second: second.query_id().to_string(),
            });
        }
        if first.list_id() == second.list_id() {
            return Err(PrefError::SameListIds(first.query_id().to_string()));
        }
        Ok(ListPair { first, second })
    }

    /// Groups lists into pairs, two per query, keeping first-seen order for
    /// both the queries and the lists within each pair.
    pub fn pair_up(lists: Vec<RankedList>) -> Result<Vec<ListPair>, PrefError> {
        let mut order: Vec<String> = Vec::new();
        let mut grouped: BTreeMap<String, Vec<RankedList>> = BTreeMap::new();
        for list in lists {
            let entry = grouped.entry(list.query_id().to_string()).or_default();
            if entry.is_empty() {
                order.push(list.query_id().to_string());
            }
            entry.push(list);
        }
        let mut pairs = Vec::with_capacity(order.len());
        for query in order {
            let mut group = grouped.remove(&query).expect("grouped by construction");
            if group.len() != 2 {
                return Err(PrefError::UnpairedQuery {
                    query,
                    count: group.len(),
                });
            }
            let second = group.pop().expect("len checked");
            let first = group.pop().expect("len checked");
            pairs.push(ListPair::new(first, second)?);
        }
        Ok(pairs)
    }

    pub fn query_id(&self) -> &str {
        self.first.query_id()
    }

    pub fn first(&self) -> &RankedList {
        &self.first
    }

    pub fn second(&self) -> &RankedList {
        &self.second
    }

    pub fn swapped(&self) -> ListPair {
        ListPair {
            first: self.second.clone(),
            second: self.first.clone(),
        }
    }

    /// Documents judged for this query in either list; the pool an ideal
    /// ordering may draw from, shared by both sides so normalised scores
    /// are comparable within the pair.
    pub fn candidate_pool(&self, judgments: &JudgmentSet) -> BTreeSet<String> {
        let query = self.query_id();
        self.first
            .docs()
            .iter()
            .chain(self.second.docs().iter())
            .filter(|doc| judgments.is_judged(query, doc))
            .cloned()
            .collect()
    }
}

/// Score difference `m(first) - m(second)` for one pair.
pub fn metric_delta(
    pair: &ListPair,
    judgments: &JudgmentSet,
    kind: MetricKind,
    k: CutoffK,
) -> Result<f64, MetricsError> {
    let candidates = pair.candidate_pool(judgments);
    let first = metric_eval(kind, pair.first(), judgments, &candidates, k)?;
    let second = metric_eval(kind, pair.second(), judgments, &candidates, k)?;
    Ok(first - second)
}

/// Per-query deltas for one metric/cutoff cell. Queries whose pair cannot
/// be scored for lack of any positive grade are dropped, not failed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeltaSet {
    pub deltas: BTreeMap<String, f64>,
    pub dropped: BTreeSet<String>,
}

pub fn compute_deltas(
    pairs: &[ListPair],
    judgments: &JudgmentSet,
    kind: MetricKind,
    k: CutoffK,
) -> Result<DeltaSet, PrefError> {
    let mut out = DeltaSet::default();
    for pair in pairs {
        match metric_delta(pair, judgments, kind, k) {
            Ok(delta) => {
                out.deltas.insert(pair.query_id().to_string(), delta);
            }
            Err(MetricsError::IdealGainZero) => {
                out.dropped.insert(pair.query_id().to_string());
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn sgn(x: f64) -> i64 {
    // f64::signum maps 0.0 to 1.0, which is wrong here: a zero delta is
    // no prediction at all.
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Preference identification ratio at threshold `t`, ties excluded.
///
/// Over queries with a FIRST or SECOND verdict, each delta with `|delta| >= t`
/// predicts the preferred side through its sign; correct predictions add 1,
/// inverted ones subtract 1, suppressed or zero deltas add 0. The sum is
/// divided by the number of those queries, so the result sits in `[-1, 1]`
/// and random prediction has expectation 0.
pub fn pir(
    deltas: &BTreeMap<String, f64>,
    prefs: &BTreeMap<String, PreferenceJudgment>,
    t: f64,
) -> Result<f64, PrefError> {
    pir_with_policy(deltas, prefs, t, TiePolicy::Exclude)
}

pub fn pir_with_policy(
    deltas: &BTreeMap<String, f64>,
    prefs: &BTreeMap<String, PreferenceJudgment>,
    t: f64,
    policy: TiePolicy,
) -> Result<f64, PrefError> {
    if !t.is_finite() || t < 0.0 {
        return Err(PrefError::InvalidThreshold(t));
    }
    let mut numerator: i64 = 0;
    let mut denominator: i64 = 0;
    for (query, verdict) in prefs {
        let direction = match verdict {
            PreferenceJudgment::First => 1,
            PreferenceJudgment::Second => -1,
            PreferenceJudgment::Tie => {
                if policy == TiePolicy::CountInDenominator {
                    denominator += 1;
                }
                continue;
            }
        };
        let delta = *deltas
            .get(query)
            .ok_or_else(|| PrefError::MissingDelta(query.clone()))?;
        denominator += 1;
        if delta.abs() >= t {
            numerator += sgn(delta) * direction;
        }
    }
    if denominator == 0 {
        return Err(PrefError::NoPreferences);
    }
    Ok(numerator as f64 / denominator as f64)
}

/// Number of queries contributing a nonzero term at threshold `t`.
/// Non-increasing as `t` grows.
pub fn pir_support(
    deltas: &BTreeMap<String, f64>,
    prefs: &BTreeMap<String, PreferenceJudgment>,
    t: f64,
) -> Result<usize, PrefError> {
    if !t.is_finite() || t < 0.0 {
        return Err(PrefError::InvalidThreshold(t));
    }
    let mut support = 0;
    for (query, verdict) in prefs {
        if *verdict == PreferenceJudgment::Tie {
            continue;
        }
        let delta = *deltas
            .get(query)
            .ok_or_else(|| PrefError::MissingDelta(query.clone()))?;
        if delta != 0.0 && delta.abs() >= t {
            support += 1;
        }
    }
    Ok(support)
}

/// The grid a sweep walks: which metrics and cutoffs to cross, and how to
/// enumerate thresholds. `threshold_max: None` resolves per metric, to 1.0
/// for unit-range metrics and to the largest observed |delta| otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub metrics: Vec<MetricKind>,
    pub cutoffs: Vec<CutoffK>,
    pub threshold_step: f64,
    pub threshold_max: Option<f64>,
}

pub const DEFAULT_THRESHOLD_STEP: f64 = 0.01;

impl SweepGrid {
    pub fn new(metrics: Vec<MetricKind>, cutoffs: Vec<CutoffK>) -> Self {
        SweepGrid {
            metrics,
            cutoffs,
            threshold_step: DEFAULT_THRESHOLD_STEP,
            threshold_max: None,
        }
    }

    fn check_steps(&self) -> Result<(), PrefError> {
        if !self.threshold_step.is_finite() || self.threshold_step <= 0.0 {
            return Err(PrefError::InvalidStep(self.threshold_step));
        }
        if let Some(max) = self.threshold_max {
            if !max.is_finite() || max < 0.0 {
                return Err(PrefError::InvalidMax(max));
            }
        }
        Ok(())
    }

    /// Multiples of the step from 0 up to `max` inclusive. The division gets
    /// a small relative guard and each value is snapped to 12 decimals, so a
    /// decimal step like 0.01 lands exactly on 0.03, 1.0 and friends.
    pub fn thresholds(&self, max: f64) -> Vec<f64> {
        let count = (max / self.threshold_step + 1e-6).floor() as usize;
        (0..=count)
            .map(|i| snap(i as f64 * self.threshold_step))
            .collect()
    }

    fn resolve_max(&self, kind: MetricKind, deltas: &BTreeMap<String, f64>) -> f64 {
        if let Some(max) = self.threshold_max {
            return max;
        }
        if kind.unit_range() {
            1.0
        } else {
            deltas.values().fold(0.0, |acc, d| acc.max(d.abs()))
        }
    }
}

fn snap(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// One swept metric/cutoff cell: the PIR at every threshold plus the best
/// point and the query bookkeeping behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSweep {
    pub metric: MetricKind,
    pub cutoff: CutoffK,
    /// `(threshold, pir)` in ascending threshold order.
    pub points: Vec<(f64, f64)>,
    pub best_threshold: f64,
    pub best_pir: f64,
    /// Queries dropped because the cell's metric could not score their pair.
    pub dropped_queries: usize,
    /// Queries with a FIRST or SECOND verdict that entered the denominator.
    pub preference_queries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub metric: MetricKind,
    pub cutoff: CutoffK,
    pub error: String,
}

/// Everything a sweep produced. Failed cells never abort the rest; they are
/// recorded here with the error text.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub cells: Vec<CellSweep>,
    pub failures: Vec<CellFailure>,
}

fn sweep_cell(
    pairs: &[ListPair],
    judgments: &JudgmentSet,
    prefs: &BTreeMap<String, PreferenceJudgment>,
    kind: MetricKind,
    k: CutoffK,
    grid: &SweepGrid,
) -> Result<CellSweep, PrefError> {
    let ds = compute_deltas(pairs, judgments, kind, k)?;
    // Dropped queries leave the cell's query set entirely; everything else
    // keeps its verdict.
    let kept: BTreeMap<String, PreferenceJudgment> = prefs
        .iter()
        .filter(|(query, _)| ds.deltas.contains_key(*query))
        .map(|(query, verdict)| (query.clone(), *verdict))
        .collect();
    let max = grid.resolve_max(kind, &ds.deltas);
    let mut points = Vec::new();
    for t in grid.thresholds(max) {
        points.push((t, pir(&ds.deltas, &kept, t)?));
    }
    let (best_threshold, best_pir) = best_threshold(&points)?;
    let preference_queries = kept
        .values()
        .filter(|v| **v != PreferenceJudgment::Tie)
        .count();
    Ok(CellSweep {
        metric: kind,
        cutoff: k,
        points,
        best_threshold,
        best_pir,
        dropped_queries: ds.dropped.len(),
        preference_queries,
    })
}

/// PIR at every grid threshold for one metric/cutoff. Deltas are computed
/// once and reused across thresholds.
pub fn threshold_sweep(
    pairs: &[ListPair],
    judgments: &JudgmentSet,
    prefs: &BTreeMap<String, PreferenceJudgment>,
    kind: MetricKind,
    k: CutoffK,
    grid: &SweepGrid,
) -> Result<Vec<(f64, f64)>, PrefError> {
    grid.check_steps()?;
    Ok(sweep_cell(pairs, judgments, prefs, kind, k, grid)?.points)
}

/// Highest PIR in the sweep; ties go to the smallest threshold.
pub fn best_threshold(points: &[(f64, f64)]) -> Result<(f64, f64), PrefError> {
    let mut best: Option<(f64, f64)> = None;
    for &(t, p) in points {
        best = Some(match best {
            None => (t, p),
            Some((bt, bp)) => {
                if p > bp || (p == bp && t < bt) {
                    (t, p)
                } else {
                    (bt, bp)
                }
            }
        });
    }
    best.ok_or(PrefError::EmptySweep)
}

/// The full metric x cutoff x threshold cube plus per-cell best points.
pub fn pir_profile(
    pairs: &[ListPair],
    judgments: &JudgmentSet,
    prefs: &BTreeMap<String, PreferenceJudgment>,
    grid: &SweepGrid,
) -> Result<SweepResult, PrefError> {
    grid.check_steps()?;
    if grid.metrics.is_empty() || grid.cutoffs.is_empty() {
        return Err(PrefError::EmptySweep);
    }
    let mut result = SweepResult::default();
    for &kind in &grid.metrics {
        for &k in &grid.cutoffs {
            match sweep_cell(pairs, judgments, prefs, kind, k, grid) {
                Ok(cell) => result.cells.push(cell),
                Err(e) => result.failures.push(CellFailure {
                    metric: kind,
                    cutoff: k,
                    error: e.to_string(),
                }),
            }
        }
    }
    Ok(result)
}
