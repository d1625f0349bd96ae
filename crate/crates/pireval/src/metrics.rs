//! Graded relevance metrics over ranked document lists.
//!
//! Grades live in `[0, 1]`. Position discounting follows the two-case
//! cumulated-gain recurrence: ranks below the log base accumulate raw gain,
//! ranks at or past it are divided by `log_b(rank)`. Normalisation divides by
//! the gain of an ideal reordering of a candidate pool.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("relevance grade {0} outside [0, 1]")]
    GradeOutOfRange(f64),
    #[error("cutoff must be at least 1")]
    ZeroCutoff,
    #[error("log base {0} must be at least 2")]
    LogBaseTooSmall(f64),
    #[error("ranked list for query {query} is empty")]
    EmptyList { query: String },
    #[error("document {doc} appears twice in list {list} for query {query}")]
    DuplicateDoc {
        query: String,
        list: String,
        doc: String,
    },
    #[error("ideal gain is zero: no candidate carries a positive grade")]
    IdealGainZero,
    #[error("cannot average over an empty query set")]
    EmptyQuerySet,
}

/// Relevance of one document to one query, on the unit scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RelevanceGrade(f64);

impl RelevanceGrade {
    pub const ZERO: RelevanceGrade = RelevanceGrade(0.0);

    pub fn new(value: f64) -> Result<Self, MetricsError> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(RelevanceGrade(value))
        } else {
            Err(MetricsError::GradeOutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Rank cutoff; always at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CutoffK(usize);

impl CutoffK {
    pub fn new(k: usize) -> Result<Self, MetricsError> {
        if k >= 1 {
            Ok(CutoffK(k))
        } else {
            Err(MetricsError::ZeroCutoff)
        }
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// One retrieval result list: the documents returned for a query, best first.
/// Documents are unique within a list; rank `i` is position `i - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    query_id: String,
    list_id: String,
    docs: Vec<String>,
}

impl RankedList {
    pub fn new(
        query_id: impl Into<String>,
        list_id: impl Into<String>,
        docs: Vec<String>,
    ) -> Result<Self, MetricsError> {
        let query_id = query_id.into();
        let list_id = list_id.into();
        if docs.is_empty() {
            return Err(MetricsError::EmptyList { query: query_id });
        }
        let mut seen = HashSet::new();
        for doc in &docs {
            if !seen.insert(doc.as_str()) {
                return Err(MetricsError::DuplicateDoc {
                    query: query_id,
                    list: list_id,
                    doc: doc.clone(),
                });
            }
        }
        Ok(RankedList {
            query_id,
            list_id,
            docs,
        })
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn list_id(&self) -> &str {
        &self.list_id
    }

    pub fn docs(&self) -> &[String] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Document at 1-based `rank`, or None past the end of the list.
    pub fn doc_at_rank(&self, rank: usize) -> Option<&str> {
        self.docs.get(rank - 1).map(String::as_str)
    }
}

/// Graded judgments for (query, document) pairs. Lookups are total:
/// unjudged pairs resolve to the default grade.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgmentSet {
    grades: BTreeMap<(String, String), RelevanceGrade>,
    default_grade: RelevanceGrade,
}

impl JudgmentSet {
    pub fn new(default_grade: RelevanceGrade) -> Self {
        JudgmentSet {
            grades: BTreeMap::new(),
            default_grade,
        }
    }

    /// Records a grade, returning the previous one for the same pair if any.
    pub fn insert(
        &mut self,
        query_id: impl Into<String>,
        doc_id: impl Into<String>,
        grade: RelevanceGrade,
    ) -> Option<RelevanceGrade> {
        self.grades.insert((query_id.into(), doc_id.into()), grade)
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> RelevanceGrade {
        // BTreeMap<(String, String), _> cannot be probed with borrowed keys;
        // the per-lookup allocation is acceptable at study scale.
        self.grades
            .get(&(query_id.to_string(), doc_id.to_string()))
            .copied()
            .unwrap_or(self.default_grade)
    }

    pub fn is_judged(&self, query_id: &str, doc_id: &str) -> bool {
        self.grades
            .contains_key(&(query_id.to_string(), doc_id.to_string()))
    }

    pub fn default_grade(&self) -> RelevanceGrade {
        self.default_grade
    }

    pub fn len(&self) -> usize {
        self.grades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, RelevanceGrade)> {
        self.grades.iter().map(|((q, d), g)| (q.as_str(), d.as_str(), *g))
    }

    /// Judged documents for one query, in ascending document-id order.
    pub fn judged_docs(&self, query_id: &str) -> Vec<&str> {
        self.grades
            .range((query_id.to_string(), String::new())..)
            .take_while(|((q, _), _)| q == query_id)
            .map(|((_, d), _)| d.as_str())
            .collect()
    }
}

/// Which metric to evaluate. DCG and nDCG carry the discount log base,
/// which must be at least 2; build those through [`MetricKind::dcg`] and
/// [`MetricKind::ndcg`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricKind {
    Precision,
    AveragePrecision,
    CumulatedGain,
    Dcg { log_base: f64 },
    Ndcg { log_base: f64 },
}

impl MetricKind {
    pub fn dcg(log_base: f64) -> Result<Self, MetricsError> {
        check_log_base(log_base)?;
        Ok(MetricKind::Dcg { log_base })
    }

    pub fn ndcg(log_base: f64) -> Result<Self, MetricsError> {
        check_log_base(log_base)?;
        Ok(MetricKind::Ndcg { log_base })
    }

    /// Short name used in reports: `precision`, `ap`, `cg`, `dcg`, `ndcg`.
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Precision => "precision",
            MetricKind::AveragePrecision => "ap",
            MetricKind::CumulatedGain => "cg",
            MetricKind::Dcg { .. } => "dcg",
            MetricKind::Ndcg { .. } => "ndcg",
        }
    }

    /// True for metrics whose values stay within `[0, 1]`.
    pub fn unit_range(self) -> bool {
        matches!(
            self,
            MetricKind::Precision | MetricKind::AveragePrecision | MetricKind::Ndcg { .. }
        )
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn check_log_base(b: f64) -> Result<(), MetricsError> {
    // Bases in (1, 2) would discount rank 1 by log_b(1) = 0 once the
    // rank-vs-base comparison moves past it, so they are rejected outright.
    if b.is_finite() && b >= 2.0 {
        Ok(())
    } else {
        Err(MetricsError::LogBaseTooSmall(b))
    }
}

fn gain_at_rank(list: &RankedList, judgments: &JudgmentSet, rank: usize) -> f64 {
    match list.doc_at_rank(rank) {
        Some(doc) => judgments.grade(list.query_id(), doc).value(),
        None => 0.0,
    }
}

/// Sum of the gains at ranks `1..=k`. Ranks past the end of the list
/// contribute zero.
pub fn cumulated_gain_at_k(list: &RankedList, judgments: &JudgmentSet, k: CutoffK) -> f64 {
    (1..=k.get())
        .map(|rank| gain_at_rank(list, judgments, rank))
        .sum()
}

/// Cumulated gain with position discounting: ranks below `log_base` keep
/// their raw gain, rank `i >= log_base` contributes `gain / log_b(i)`.
pub fn dcg_at_k(list: &RankedList, judgments: &JudgmentSet, k: CutoffK, log_base: f64) -> f64 {
    let mut total = 0.0;
    for rank in 1..=k.get() {
        total += discounted(gain_at_rank(list, judgments, rank), rank, log_base);
    }
    total
}

fn discounted(gain: f64, rank: usize, log_base: f64) -> f64 {
    if (rank as f64) < log_base {
        gain
    } else {
        gain / ((rank as f64).ln() / log_base.ln())
    }
}

/// Discounted gain of the best possible ordering of `candidates`: descending
/// grade, ties broken by ascending document id. An empty pool yields zero.
pub fn ideal_dcg_at_k(
    query_id: &str,
    judgments: &JudgmentSet,
    candidates: &BTreeSet<String>,
    k: CutoffK,
    log_base: f64,
) -> f64 {
    // BTreeSet iteration is already id-ascending, and the sort is stable,
    // so equal grades stay in id order.
    let mut graded: Vec<f64> = candidates
        .iter()
        .map(|doc| judgments.grade(query_id, doc).value())
        .collect();
    graded.sort_by(|a, b| b.total_cmp(a));
    let mut total = 0.0;
    for (idx, gain) in graded.iter().take(k.get()).enumerate() {
        total += discounted(*gain, idx + 1, log_base);
    }
    total
}

/// DCG normalised by the ideal DCG over `candidates`; always in `[0, 1]`.
pub fn ndcg_at_k(
    list: &RankedList,
    judgments: &JudgmentSet,
    candidates: &BTreeSet<String>,
    k: CutoffK,
    log_base: f64,
) -> Result<f64, MetricsError> {
    let ideal = ideal_dcg_at_k(list.query_id(), judgments, candidates, k, log_base);
    if ideal == 0.0 {
        return Err(MetricsError::IdealGainZero);
    }
    Ok(dcg_at_k(list, judgments, k, log_base) / ideal)
}

/// Mean gain over the top `k` ranks. The divisor is always `k`, so lists
/// shorter than the cutoff are penalised.
pub fn precision_at_k(list: &RankedList, judgments: &JudgmentSet, k: CutoffK) -> f64 {
    cumulated_gain_at_k(list, judgments, k) / k.get() as f64
}

/// Graded average precision at `k`: each rank contributes its gain weighted
/// by the mean gain accumulated so far, normalised by the ideal gain mass
/// (the sum of the `k` largest grades among the list's own documents).
pub fn average_precision_at_k(
    list: &RankedList,
    judgments: &JudgmentSet,
    k: CutoffK,
) -> Result<f64, MetricsError> {
    let mut mass: Vec<f64> = list
        .docs()
        .iter()
        .map(|doc| judgments.grade(list.query_id(), doc).value())
        .collect();
    mass.sort_by(|a, b| b.total_cmp(a));
    let ideal_mass: f64 = mass.iter().take(k.get()).sum();
    if ideal_mass == 0.0 {
        return Err(MetricsError::IdealGainZero);
    }

    let mut cumulated = 0.0;
    let mut sum = 0.0;
    for rank in 1..=k.get() {
        let gain = gain_at_rank(list, judgments, rank);
        cumulated += gain;
        sum += gain * (cumulated / rank as f64);
    }
    Ok(sum / ideal_mass)
}

/// Arithmetic mean of per-query values.
pub fn mean_over_queries(values: &BTreeMap<String, f64>) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyQuerySet);
    }
    Ok(values.values().sum::<f64>() / values.len() as f64)
}

/// Evaluates `kind` on one list. `candidates` is the pool an ideal ordering
/// may draw from; only the normalised metric consumes it.
pub fn metric_eval(
    kind: MetricKind,
    list: &RankedList,
    judgments: &JudgmentSet,
    candidates: &BTreeSet<String>,
    k: CutoffK,
) -> Result<f64, MetricsError> {
    match kind {
        MetricKind::Precision => Ok(precision_at_k(list, judgments, k)),
        MetricKind::AveragePrecision => average_precision_at_k(list, judgments, k),
        MetricKind::CumulatedGain => Ok(cumulated_gain_at_k(list, judgments, k)),
        MetricKind::Dcg { log_base } => {
            check_log_base(log_base)?;
            Ok(dcg_at_k(list, judgments, k, log_base))
        }
        MetricKind::Ndcg { log_base } => {
            check_log_base(log_base)?;
            ndcg_at_k(list, judgments, candidates, k, log_base)
        }
    }
}
