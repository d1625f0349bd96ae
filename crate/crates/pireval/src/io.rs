//! Plain-text study data and report serialisation.
//!
//! All three input formats are UTF-8, one record per line, fields separated
//! by literal tabs. Lines starting with `#` and blank lines are skipped.
//! Parsers fail on the first offending line and never repair silently:
//! a quietly mended file would corrupt every ratio downstream.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::metrics::{JudgmentSet, RankedList, RelevanceGrade};
use crate::preference::{ListPair, PreferenceJudgment, SweepResult};

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: school grade {value} is not an integer in 1..6")]
    OutOfScale { line: usize, value: String },
    #[error("line {line}: conflicting grade for ({query}, {doc})")]
    DuplicateJudgment {
        line: usize,
        query: String,
        doc: String,
    },
    #[error("line {line}: duplicate preference for query {query}")]
    DuplicatePreference { line: usize, query: String },
    #[error("ranks for ({query}, {list}) skip from {prev} to {found}")]
    RankGap {
        query: String,
        list: String,
        prev: usize,
        found: usize,
    },
    #[error("line {line}: rank {rank} repeated in ({query}, {list})")]
    DuplicateRank {
        line: usize,
        query: String,
        list: String,
        rank: usize,
    },
    #[error("line {line}: document {doc} repeated in ({query}, {list})")]
    DuplicateDoc {
        line: usize,
        query: String,
        list: String,
        doc: String,
    },
    #[error("no preference recorded for query {query}")]
    MissingPreference { query: String },
}

/// Which grade scale a judgments file uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// German school grades, integers 1 (best) through 6 (worst).
    School6,
    /// Reals in `[0, 1]`, taken verbatim.
    Unit,
}

/// A school grade as collected from raters: an integer from 1 to 6.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchoolGrade(u8);

impl SchoolGrade {
    pub fn new(raw: i64) -> Option<Self> {
        (1..=6).contains(&raw).then_some(SchoolGrade(raw as u8))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

/// Maps school grade `g` onto the unit scale as `(6 - g) / 5`, so
/// 1 becomes 1.0, 2 becomes 0.8, and so on down to 6 as 0.0.
pub fn convert_school_grade(grade: SchoolGrade) -> RelevanceGrade {
    let unit = (6 - grade.get()) as f64 / 5.0;
    RelevanceGrade::new(unit).expect("conversion stays on the unit scale")
}

/// One study: graded judgments, the compared list pairs, and the per-query
/// verdicts. Every pair's query must carry a verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyBundle {
    pub judgments: JudgmentSet,
    pub pairs: Vec<ListPair>,
    pub prefs: BTreeMap<String, PreferenceJudgment>,
}

impl StudyBundle {
    pub fn new(
        judgments: JudgmentSet,
        pairs: Vec<ListPair>,
        prefs: BTreeMap<String, PreferenceJudgment>,
    ) -> Result<Self, DataError> {
        for pair in &pairs {
            if !prefs.contains_key(pair.query_id()) {
                return Err(DataError::MissingPreference {
                    query: pair.query_id().to_string(),
                });
            }
        }
        Ok(StudyBundle {
            judgments,
            pairs,
            prefs,
        })
    }

    /// The pairs flattened back into lists, first side before second.
    pub fn runs(&self) -> Vec<&RankedList> {
        self.pairs
            .iter()
            .flat_map(|p| [p.first(), p.second()])
            .collect()
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.strip_suffix('\r').unwrap_or(line)))
        .filter(|(_, line)| !line.trim().is_empty() && !line.starts_with('#'))
}

fn fields(line: &str, n: usize, lineno: usize) -> Result<Vec<&str>, DataError> {
    let parts: Vec<&str> = line.split('\t').collect();
    if parts.len() != n {
        return Err(DataError::Parse {
            line: lineno,
            msg: format!("expected {n} tab-separated fields, found {}", parts.len()),
        });
    }
    for part in &parts {
        if part.is_empty() {
            return Err(DataError::Parse {
                line: lineno,
                msg: "empty field".to_string(),
            });
        }
    }
    Ok(parts)
}

/// Parses `query_id TAB doc_id TAB grade` lines. Repeated pairs must agree;
/// a conflict is an error, never last-wins. Unjudged pairs default to 0.
pub fn parse_judgments(text: &str, scale: Scale) -> Result<JudgmentSet, DataError> {
    let mut judgments = JudgmentSet::new(RelevanceGrade::ZERO);
    for (lineno, line) in data_lines(text) {
        let parts = fields(line, 3, lineno)?;
        let (query, doc, raw) = (parts[0], parts[1], parts[2]);
        let grade = match scale {
            Scale::School6 => {
                let school = raw
                    .parse::<i64>()
                    .ok()
                    .and_then(SchoolGrade::new)
                    .ok_or_else(|| DataError::OutOfScale {
                        line: lineno,
                        value: raw.to_string(),
                    })?;
                convert_school_grade(school)
            }
            Scale::Unit => {
                let value = raw.parse::<f64>().map_err(|_| DataError::Parse {
                    line: lineno,
                    msg: format!("grade {raw} is not a number"),
                })?;
                RelevanceGrade::new(value).map_err(|_| DataError::Parse {
                    line: lineno,
                    msg: format!("grade {raw} outside [0, 1]"),
                })?
            }
        };
        if judgments.is_judged(query, doc) && judgments.grade(query, doc) != grade {
            return Err(DataError::DuplicateJudgment {
                line: lineno,
                query: query.to_string(),
                doc: doc.to_string(),
            });
        }
        judgments.insert(query, doc, grade);
    }
    Ok(judgments)
}

/// Parses `query_id TAB list_id TAB rank TAB doc_id` lines into lists in
/// first-appearance order. Ranks within a list must form 1..n with no gaps
/// or repeats, in any line order.
pub fn parse_runs(text: &str) -> Result<Vec<RankedList>, DataError> {
    type Key = (String, String);
    let mut order: Vec<Key> = Vec::new();
    let mut entries: BTreeMap<Key, Vec<(usize, String, usize)>> = BTreeMap::new();
    for (lineno, line) in data_lines(text) {
        let parts = fields(line, 4, lineno)?;
        let (query, list, raw_rank, doc) = (parts[0], parts[1], parts[2], parts[3]);
        let rank: usize = raw_rank
            .parse()
            .ok()
            .filter(|r| *r >= 1)
            .ok_or_else(|| DataError::Parse {
                line: lineno,
                msg: format!("rank {raw_rank} is not a positive integer"),
            })?;
        let key = (query.to_string(), list.to_string());
        let rows = entries.entry(key.clone()).or_default();
        if rows.is_empty() {
            order.push(key);
        }
        if rows.iter().any(|(r, _, _)| *r == rank) {
            return Err(DataError::DuplicateRank {
                line: lineno,
                query: query.to_string(),
                list: list.to_string(),
                rank,
            });
        }
        if rows.iter().any(|(_, d, _)| d == doc) {
            return Err(DataError::DuplicateDoc {
                line: lineno,
                query: query.to_string(),
                list: list.to_string(),
                doc: doc.to_string(),
            });
        }
        rows.push((rank, doc.to_string(), lineno));
    }

    let mut lists = Vec::with_capacity(order.len());
    for key in order {
        let mut rows = entries.remove(&key).expect("grouped by construction");
        rows.sort_by_key(|(rank, _, _)| *rank);
        for (i, (rank, _, _)) in rows.iter().enumerate() {
            if *rank != i + 1 {
                return Err(DataError::RankGap {
                    query: key.0,
                    list: key.1,
                    prev: i,
                    found: *rank,
                });
            }
        }
        let docs = rows.into_iter().map(|(_, doc, _)| doc).collect();
        lists.push(
            RankedList::new(key.0, key.1, docs).expect("duplicates rejected during parsing"),
        );
    }
    Ok(lists)
}

/// Parses `query_id TAB verdict` lines, verdict one of FIRST, SECOND, TIE.
/// Repeating a query is an error even with the same verdict.
pub fn parse_preferences(
    text: &str,
) -> Result<BTreeMap<String, PreferenceJudgment>, DataError> {
    let mut prefs = BTreeMap::new();
    for (lineno, line) in data_lines(text) {
        let parts = fields(line, 2, lineno)?;
        let (query, raw) = (parts[0], parts[1]);
        let verdict = match raw {
            "FIRST" => PreferenceJudgment::First,
            "SECOND" => PreferenceJudgment::Second,
            "TIE" => PreferenceJudgment::Tie,
            other => {
                return Err(DataError::Parse {
                    line: lineno,
                    msg: format!("verdict {other} is not FIRST, SECOND or TIE"),
                })
            }
        };
        if prefs.insert(query.to_string(), verdict).is_some() {
            return Err(DataError::DuplicatePreference {
                line: lineno,
                query: query.to_string(),
            });
        }
    }
    Ok(prefs)
}

/// Serialises judgments in (query, doc) order. Grades print in shortest
/// round-trip form, so parsing the output reproduces the set bit for bit.
pub fn write_judgments(judgments: &JudgmentSet) -> String {
    let mut out = String::new();
    for (query, doc, grade) in judgments.iter() {
        out.push_str(&format!("{query}\t{doc}\t{}\n", grade.value()));
    }
    out
}

pub fn write_runs(lists: &[&RankedList]) -> String {
    let mut out = String::new();
    for list in lists {
        for (i, doc) in list.docs().iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{doc}\n",
                list.query_id(),
                list.list_id(),
                i + 1
            ));
        }
    }
    out
}

pub fn write_preferences(prefs: &BTreeMap<String, PreferenceJudgment>) -> String {
    let mut out = String::new();
    for (query, verdict) in prefs {
        let word = match verdict {
            PreferenceJudgment::First => "FIRST",
            PreferenceJudgment::Second => "SECOND",
            PreferenceJudgment::Tie => "TIE",
        };
        out.push_str(&format!("{query}\t{word}\n"));
    }
    out
}

/// Output encoding for sweep reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Serialize)]
struct JsonCell {
    metric: String,
    cutoff: usize,
    threshold: f64,
    pir: f64,
}

#[derive(Serialize)]
struct JsonBest {
    metric: String,
    cutoff: usize,
    threshold: f64,
    pir: f64,
    dropped_queries: usize,
    preference_queries: usize,
}

#[derive(Serialize)]
struct JsonFailure {
    metric: String,
    cutoff: usize,
    error: String,
}

#[derive(Serialize)]
struct JsonReport {
    meta: BTreeMap<String, String>,
    cells: Vec<JsonCell>,
    best: Vec<JsonBest>,
    errors: Vec<JsonFailure>,
}

fn sorted_cells(result: &SweepResult) -> Vec<&crate::preference::CellSweep> {
    let mut cells: Vec<_> = result.cells.iter().collect();
    cells.sort_by(|a, b| {
        a.metric
            .name()
            .cmp(b.metric.name())
            .then(a.cutoff.cmp(&b.cutoff))
    });
    cells
}

pub fn write_report(result: &SweepResult, format: ReportFormat) -> String {
    write_report_with_meta(result, format, &[])
}

/// Renders a sweep. CSV carries the metadata, per-cell best points and any
/// cell errors as `#` comments above a fixed `metric,cutoff,threshold,pir`
/// table sorted by metric name, cutoff and threshold, reals at six decimals.
/// JSON mirrors the same content as `meta`, `cells`, `best` and `errors`.
pub fn write_report_with_meta(
    result: &SweepResult,
    format: ReportFormat,
    meta: &[(String, String)],
) -> String {
    let cells = sorted_cells(result);
    let mut failures: Vec<_> = result.failures.iter().collect();
    failures.sort_by(|a, b| {
        a.metric
            .name()
            .cmp(b.metric.name())
            .then(a.cutoff.cmp(&b.cutoff))
    });

    match format {
        ReportFormat::Csv => {
            let mut out = String::new();
            for (key, value) in meta {
                out.push_str(&format!("# {key}: {value}\n"));
            }
            for cell in &cells {
                out.push_str(&format!(
                    "# best: metric={} cutoff={} threshold={:.6} pir={:.6} dropped_queries={} preference_queries={}\n",
                    cell.metric.name(),
                    cell.cutoff.get(),
                    cell.best_threshold,
                    cell.best_pir,
                    cell.dropped_queries,
                    cell.preference_queries
                ));
            }
            for failure in &failures {
                out.push_str(&format!(
                    "# error: metric={} cutoff={}: {}\n",
                    failure.metric.name(),
                    failure.cutoff.get(),
                    failure.error
                ));
            }
            out.push_str("metric,cutoff,threshold,pir\n");
            for cell in &cells {
                for (t, p) in &cell.points {
                    out.push_str(&format!(
                        "{},{},{t:.6},{p:.6}\n",
                        cell.metric.name(),
                        cell.cutoff.get()
                    ));
                }
            }
            out
        }
        ReportFormat::Json => {
            let report = JsonReport {
                meta: meta.iter().cloned().collect(),
                cells: cells
                    .iter()
                    .flat_map(|cell| {
                        cell.points.iter().map(|(t, p)| JsonCell {
                            metric: cell.metric.name().to_string(),
                            cutoff: cell.cutoff.get(),
                            threshold: *t,
                            pir: *p,
                        })
                    })
                    .collect(),
                best: cells
                    .iter()
                    .map(|cell| JsonBest {
                        metric: cell.metric.name().to_string(),
                        cutoff: cell.cutoff.get(),
                        threshold: cell.best_threshold,
                        pir: cell.best_pir,
                        dropped_queries: cell.dropped_queries,
                        preference_queries: cell.preference_queries,
                    })
                    .collect(),
                errors: failures
                    .iter()
                    .map(|f| JsonFailure {
                        metric: f.metric.name().to_string(),
                        cutoff: f.cutoff.get(),
                        error: f.error.clone(),
                    })
                    .collect(),
            };
            let mut text = serde_json::to_string_pretty(&report).expect("report serialises");
            text.push('\n');
            text
        }
    }
}
