//! Synthetic preference studies with known ground truth.
//!
//! Each simulated query gets one plausibly engine-ordered list and one
//! randomly permuted list over the same documents, plus rater grades and a
//! pairwise verdict derived from those grades. Because the verdict comes
//! from a known utility, the generator yields studies where the right sweep
//! answer is known in advance.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use thiserror::Error;

use crate::io::StudyBundle;
use crate::metrics::{CutoffK, JudgmentSet, MetricKind, MetricsError, RankedList, RelevanceGrade};
use crate::preference::{metric_delta, ListPair, PrefError, PreferenceJudgment};

/// Name of the generator behind every draw; recorded in report metadata so
/// a study can state how it was produced.
pub const GENERATOR: &str = "chacha8";

pub const FIRST_LIST_ID: &str = "original";
pub const SECOND_LIST_ID: &str = "randomized";

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

/// Everything that shapes one simulated study. Equal configs produce
/// bit-identical studies.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub num_queries: usize,
    pub docs_per_query: usize,
    /// Std dev of the Gaussian perturbation on rater grades.
    pub grade_noise: f64,
    /// Std dev of the perturbation on the engine score ordering the first list.
    pub engine_noise: f64,
    /// How many top ranks the simulated user actually inspects.
    pub persistence_depth: usize,
    /// Utility differences below this margin read as TIE.
    pub tie_margin: f64,
    /// The utility the simulated user compares lists by, over the top
    /// `persistence_depth` ranks.
    pub utility_metric: MetricKind,
    /// Shape of the true relevance distribution; the defaults skew low, so
    /// most documents are weakly relevant and a few are strong.
    pub relevance_alpha: f64,
    pub relevance_beta: f64,
}

impl SimConfig {
    pub fn new(seed: u64, num_queries: usize, docs_per_query: usize) -> Self {
        SimConfig {
            seed,
            num_queries,
            docs_per_query,
            grade_noise: 0.1,
            engine_noise: 0.15,
            persistence_depth: 10,
            tie_margin: 0.05,
            utility_metric: MetricKind::CumulatedGain,
            relevance_alpha: 1.2,
            relevance_beta: 3.5,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        fn bad(msg: &str) -> Result<(), SimError> {
            Err(SimError::InvalidConfig(msg.to_string()))
        }
        if self.num_queries < 1 {
            return bad("num_queries must be at least 1");
        }
        if self.docs_per_query < 1 {
            return bad("docs_per_query must be at least 1");
        }
        if self.persistence_depth < 1 {
            return bad("persistence_depth must be at least 1");
        }
        if !(self.grade_noise.is_finite() && self.grade_noise >= 0.0) {
            return bad("grade_noise must be finite and non-negative");
        }
        if !(self.engine_noise.is_finite() && self.engine_noise >= 0.0) {
            return bad("engine_noise must be finite and non-negative");
        }
        if !(self.tie_margin.is_finite() && self.tie_margin >= 0.0) {
            return bad("tie_margin must be finite and non-negative");
        }
        if !(self.relevance_alpha.is_finite() && self.relevance_alpha > 0.0)
            || !(self.relevance_beta.is_finite() && self.relevance_beta > 0.0)
        {
            return bad("relevance shape parameters must be finite and positive");
        }
        if let MetricKind::Dcg { log_base } | MetricKind::Ndcg { log_base } = self.utility_metric {
            if !(log_base.is_finite() && log_base >= 2.0) {
                return bad("utility log base must be at least 2");
            }
        }
        Ok(())
    }
}

/// What the generator knows that a real study never would.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Latent relevance per (query, doc), before noise and quantisation.
    pub true_relevance: BTreeMap<(String, String), f64>,
    /// The raw utility difference behind each verdict.
    pub utility_deltas: BTreeMap<String, f64>,
}

/// Snaps a noisy grade onto the six-step unit lattice raters use.
fn quantize(value: f64) -> f64 {
    (value.clamp(0.0, 1.0) * 5.0).round() / 5.0
}

/// Generates one study. The verdict per query is the sign of the utility
/// difference computed from the rater grades, the same grades the metrics
/// will see, so with zero grade noise a metric aligned with the utility
/// predicts every non-tied verdict.
pub fn generate_study(config: &SimConfig) -> Result<(StudyBundle, GroundTruth), SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let relevance = Beta::new(config.relevance_alpha, config.relevance_beta)
        .expect("shape parameters validated");
    let query_width = config.num_queries.to_string().len();
    let doc_width = config.docs_per_query.to_string().len();
    let depth = CutoffK::new(config.persistence_depth).expect("depth validated");

    let mut judgments = JudgmentSet::new(RelevanceGrade::ZERO);
    let mut pairs = Vec::with_capacity(config.num_queries);
    let mut prefs = BTreeMap::new();
    let mut truth = GroundTruth {
        true_relevance: BTreeMap::new(),
        utility_deltas: BTreeMap::new(),
    };

    for qi in 1..=config.num_queries {
        let query = format!("q{qi:0query_width$}");
        let docs: Vec<String> = (1..=config.docs_per_query)
            .map(|d| format!("d{d:0doc_width$}"))
            .collect();

        let true_rel: Vec<f64> = docs.iter().map(|_| relevance.sample(&mut rng)).collect();
        let engine_scores: Vec<f64> = true_rel
            .iter()
            .map(|r| r + draw_noise(&mut rng, config.engine_noise))
            .collect();

        // stable sort: score ties stay in ascending doc order
        let mut by_engine: Vec<usize> = (0..docs.len()).collect();
        by_engine.sort_by(|a, b| engine_scores[*b].total_cmp(&engine_scores[*a]));
        let first_docs: Vec<String> = by_engine.iter().map(|i| docs[*i].clone()).collect();

        let mut second_docs = docs.clone();
        second_docs.shuffle(&mut rng);

        for (doc, rel) in docs.iter().zip(&true_rel) {
            let grade = quantize(rel + draw_noise(&mut rng, config.grade_noise));
            judgments.insert(query.clone(), doc.clone(), RelevanceGrade::new(grade).expect("quantized onto the lattice"));
            truth
                .true_relevance
                .insert((query.clone(), doc.clone()), *rel);
        }

        let pair = ListPair::new(
            RankedList::new(query.clone(), FIRST_LIST_ID, first_docs)
                .expect("simulated lists are valid"),
            RankedList::new(query.clone(), SECOND_LIST_ID, second_docs)
                .expect("simulated lists are valid"),
        )
        .expect("list ids differ");

        // a query whose pool carries no positive grade gives the user
        // nothing to prefer either way
        let delta = match metric_delta(&pair, &judgments, config.utility_metric, depth) {
            Ok(d) => d,
            Err(MetricsError::IdealGainZero) => 0.0,
            Err(e) => unreachable!("utility evaluation cannot fail otherwise: {e}"),
        };
        let verdict = if delta == 0.0 || delta.abs() < config.tie_margin {
            PreferenceJudgment::Tie
        } else if delta > 0.0 {
            PreferenceJudgment::First
        } else {
            PreferenceJudgment::Second
        };

        truth.utility_deltas.insert(query.clone(), delta);
        prefs.insert(query, verdict);
        pairs.push(pair);
    }

    let bundle = StudyBundle::new(judgments, pairs, prefs).expect("every pair gets a verdict");
    Ok((bundle, truth))
}

fn draw_noise(rng: &mut ChaCha8Rng, std_dev: f64) -> f64 {
    if std_dev == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, std_dev)
        .expect("std dev validated")
        .sample(rng)
}

/// Brute-force preference identification ratio, written against the ratio
/// definition directly: count correct and inverted predictions per query
/// and divide by the number of preference-bearing queries. Deliberately
/// shares no code with the sweep implementation it cross-checks.
pub fn oracle_pir(
    deltas: &BTreeMap<String, f64>,
    prefs: &BTreeMap<String, PreferenceJudgment>,
    t: f64,
) -> Result<f64, PrefError> {
    if !t.is_finite() || t < 0.0 {
        return Err(PrefError::InvalidThreshold(t));
    }
    let mut correct: i64 = 0;
    let mut inverted: i64 = 0;
    let mut bearing: i64 = 0;
    for (query, verdict) in prefs {
        let preferred_first = match verdict {
            PreferenceJudgment::First => true,
            PreferenceJudgment::Second => false,
            PreferenceJudgment::Tie => continue,
        };
        bearing += 1;
        let delta = *deltas
            .get(query)
            .ok_or_else(|| PrefError::MissingDelta(query.clone()))?;
        if delta.abs() < t || delta == 0.0 {
            continue;
        }
        let predicted_first = delta > 0.0;
        if predicted_first == preferred_first {
            correct += 1;
        } else {
            inverted += 1;
        }
    }
    if bearing == 0 {
        return Err(PrefError::NoPreferences);
    }
    Ok((correct - inverted) as f64 / bearing as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{mean_over_queries, ndcg_at_k};
    use crate::preference::{compute_deltas, pir};

    #[test]
    fn equal_configs_reproduce_the_study_bit_for_bit() {
        let config = SimConfig::new(11, 6, 9);
        let (bundle_a, truth_a) = generate_study(&config).unwrap();
        let (bundle_b, truth_b) = generate_study(&config).unwrap();
        assert_eq!(bundle_a, bundle_b);
        assert_eq!(truth_a, truth_b);

        let other = SimConfig::new(12, 6, 9);
        let (bundle_c, _) = generate_study(&other).unwrap();
        assert_ne!(bundle_a, bundle_c);
    }

    #[test]
    fn grades_sit_on_the_rater_lattice() {
        let (bundle, _) = generate_study(&SimConfig::new(3, 5, 12)).unwrap();
        for (_, _, grade) in bundle.judgments.iter() {
            let scaled = grade.value() * 5.0;
            assert_eq!(scaled, scaled.round(), "grade {} off-lattice", grade.value());
        }
    }

    #[test]
    fn noise_free_grades_are_quantized_truth() {
        let mut config = SimConfig::new(21, 4, 7);
        config.grade_noise = 0.0;
        let (bundle, truth) = generate_study(&config).unwrap();
        for ((query, doc), rel) in &truth.true_relevance {
            assert_eq!(bundle.judgments.grade(query, doc).value(), quantize(*rel));
        }
    }

    #[test]
    fn verdicts_follow_utility_deltas() {
        let (bundle, truth) = generate_study(&SimConfig::new(5, 30, 8)).unwrap();
        let margin = SimConfig::new(5, 30, 8).tie_margin;
        for (query, delta) in &truth.utility_deltas {
            let expected = if *delta == 0.0 || delta.abs() < margin {
                PreferenceJudgment::Tie
            } else if *delta > 0.0 {
                PreferenceJudgment::First
            } else {
                PreferenceJudgment::Second
            };
            assert_eq!(bundle.prefs[query], expected, "query {query}");
        }
    }

    #[test]
    fn wide_margin_turns_every_verdict_into_a_tie() {
        let mut config = SimConfig::new(9, 10, 6);
        config.tie_margin = f64::MAX;
        let (bundle, _) = generate_study(&config).unwrap();
        assert!(bundle
            .prefs
            .values()
            .all(|v| *v == PreferenceJudgment::Tie));
    }

    #[test]
    fn noise_free_aligned_metric_identifies_every_preference() {
        let mut config = SimConfig::new(40, 30, 12);
        config.grade_noise = 0.0;
        config.tie_margin = 0.0;
        config.persistence_depth = 3;
        config.utility_metric = MetricKind::ndcg(2.0).unwrap();
        let (bundle, _) = generate_study(&config).unwrap();
        assert!(
            bundle
                .prefs
                .values()
                .any(|v| *v != PreferenceJudgment::Tie),
            "fixture seed must leave some preferences"
        );
        let ds = compute_deltas(
            &bundle.pairs,
            &bundle.judgments,
            config.utility_metric,
            CutoffK::new(3).unwrap(),
        )
        .unwrap();
        assert_eq!(pir(&ds.deltas, &bundle.prefs, 0.0).unwrap(), 1.0);
        assert_eq!(oracle_pir(&ds.deltas, &bundle.prefs, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn engine_ordering_beats_the_shuffle_on_ndcg() {
        let mut config = SimConfig::new(17, 200, 30);
        config.grade_noise = 0.0;
        let (bundle, _) = generate_study(&config).unwrap();
        let k = CutoffK::new(10).unwrap();
        let mut original = BTreeMap::new();
        let mut randomized = BTreeMap::new();
        for pair in &bundle.pairs {
            let pool = pair.candidate_pool(&bundle.judgments);
            if let Ok(v) = ndcg_at_k(pair.first(), &bundle.judgments, &pool, k, 2.0) {
                original.insert(pair.query_id().to_string(), v);
            }
            if let Ok(v) = ndcg_at_k(pair.second(), &bundle.judgments, &pool, k, 2.0) {
                randomized.insert(pair.query_id().to_string(), v);
            }
        }
        let mean_original = mean_over_queries(&original).unwrap();
        let mean_randomized = mean_over_queries(&randomized).unwrap();
        assert!(
            mean_original > mean_randomized,
            "engine list {mean_original} should beat shuffle {mean_randomized}"
        );
    }

    #[test]
    fn oracle_matches_hand_derived_fixture() {
        let deltas: BTreeMap<String, f64> = [
            ("q1".to_string(), 0.4),
            ("q2".to_string(), -0.3),
            ("q3".to_string(), 0.05),
        ]
        .into();
        let prefs: BTreeMap<String, PreferenceJudgment> = [
            ("q1".to_string(), PreferenceJudgment::First),
            ("q2".to_string(), PreferenceJudgment::First),
            ("q3".to_string(), PreferenceJudgment::Second),
        ]
        .into();
        assert_eq!(oracle_pir(&deltas, &prefs, 0.1).unwrap(), 0.0);
        assert!((oracle_pir(&deltas, &prefs, 0.0).unwrap() + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = SimConfig::new(1, 0, 5);
        assert!(generate_study(&config).is_err());
        config.num_queries = 5;
        config.grade_noise = -0.1;
        assert!(generate_study(&config).is_err());
        config.grade_noise = 0.1;
        config.utility_metric = MetricKind::Ndcg { log_base: 1.5 };
        assert!(generate_study(&config).is_err());
    }
}
