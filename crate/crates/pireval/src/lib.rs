//! Graded relevance metrics for ranked retrieval and their meta-evaluation
//! against explicit pairwise user preferences.
//!
//! The [`metrics`] module scores individual ranked lists (precision, average
//! precision, cumulated and discounted gain, normalised DCG) on unit-scale
//! graded judgments. [`preference`] turns per-query score differences into
//! the preference identification ratio and sweeps its abstention threshold.
//! [`io`] reads and writes the tab-separated study formats and renders sweep
//! reports. [`sim`] generates seeded synthetic studies with known ground
//! truth, plus a brute-force ratio oracle used to cross-check the sweep
//! path. [`cli`] wires it all into a command-line tool.
//!
//! ```
//! use std::collections::BTreeMap;
//! use pireval::preference::{compute_deltas, pir};
//! use pireval::{
//!     CutoffK, JudgmentSet, ListPair, MetricKind, PreferenceJudgment, RankedList,
//!     RelevanceGrade,
//! };
//!
//! let mut judgments = JudgmentSet::new(RelevanceGrade::ZERO);
//! judgments.insert("q1", "a", RelevanceGrade::new(1.0)?);
//! judgments.insert("q1", "b", RelevanceGrade::new(0.2)?);
//!
//! let pair = ListPair::new(
//!     RankedList::new("q1", "engine", vec!["a".into(), "b".into()])?,
//!     RankedList::new("q1", "shuffled", vec!["b".into(), "a".into()])?,
//! )?;
//! let prefs = BTreeMap::from([("q1".to_string(), PreferenceJudgment::First)]);
//!
//! let ds = compute_deltas(&[pair], &judgments, MetricKind::Precision, CutoffK::new(1)?)?;
//! assert_eq!(pir(&ds.deltas, &prefs, 0.0)?, 1.0);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod cli;
pub mod io;
pub mod metrics;
pub mod preference;
pub mod sim;

pub use io::{Scale, StudyBundle};
pub use metrics::{CutoffK, JudgmentSet, MetricKind, RankedList, RelevanceGrade};
pub use preference::{ListPair, PreferenceJudgment, SweepGrid, SweepResult};
pub use sim::SimConfig;
