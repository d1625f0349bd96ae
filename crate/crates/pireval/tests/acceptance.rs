//! Acceptance gate: one test per release criterion, each printing a PASS
//! line with the bound it enforced. Oracles here are written from the
//! definitions directly and share no code with the library paths they check.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use itertools::Itertools;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use pireval::io::{
    convert_school_grade, parse_judgments, parse_preferences, parse_runs, write_judgments,
    write_preferences, write_runs, Scale, SchoolGrade,
};
use pireval::metrics::{
    average_precision_at_k, dcg_at_k, ideal_dcg_at_k, ndcg_at_k, precision_at_k, CutoffK,
    JudgmentSet, MetricsError, RankedList, RelevanceGrade,
};
use pireval::preference::{pir, pir_support, PreferenceJudgment};
use pireval::sim::{generate_study, oracle_pir, SimConfig};

const TOL: f64 = 1e-12;
const LATTICE: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

fn k(n: usize) -> CutoffK {
    CutoffK::new(n).unwrap()
}

fn single_list(grades: &[f64]) -> (RankedList, JudgmentSet) {
    let docs: Vec<String> = (1..=grades.len()).map(|i| format!("d{i:02}")).collect();
    let mut judgments = JudgmentSet::new(RelevanceGrade::ZERO);
    for (doc, &g) in docs.iter().zip(grades) {
        judgments.insert("q", doc.clone(), RelevanceGrade::new(g).unwrap());
    }
    (RankedList::new("q", "l", docs).unwrap(), judgments)
}

/// Direct weighted summation of the discounted gain definition; written
/// independently of the library's accumulation loop.
fn naive_dcg(grades: &[f64], cutoff: usize, base: f64) -> f64 {
    let mut total = 0.0;
    for i in 1..=cutoff {
        let gain = if i <= grades.len() { grades[i - 1] } else { 0.0 };
        let weight = if (i as f64) < base {
            1.0
        } else {
            base.ln() / (i as f64).ln()
        };
        total += gain * weight;
    }
    total
}

#[test]
fn criterion_01_dcg_matches_direct_summation_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let bases = [2.0, std::f64::consts::E, 10.0];
    for _ in 0..10_000 {
        let len = rng.gen_range(1..=50);
        let grades: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let cutoff = rng.gen_range(1..=50);
        let base = bases[rng.gen_range(0..bases.len())];
        let (list, judgments) = single_list(&grades);
        let got = dcg_at_k(&list, &judgments, k(cutoff), base);
        let want = naive_dcg(&grades, cutoff, base);
        assert!(
            (got - want).abs() <= TOL,
            "len={len} k={cutoff} b={base}: {got} vs oracle {want}"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, bound 5s");
    println!("PASS criterion 1: dcg_at_k matches the direct-summation oracle to 1e-12 on 10000 instances in {elapsed:?}");
}

#[test]
fn criterion_02_no_permutation_beats_the_ideal_ordering() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut checked = 0usize;
    for _ in 0..1_000 {
        let len = rng.gen_range(1..=6);
        let grades: Vec<f64> = (0..len)
            .map(|_| LATTICE[rng.gen_range(0..LATTICE.len())])
            .collect();
        let docs: Vec<String> = (1..=len).map(|i| format!("d{i}")).collect();
        let mut judgments = JudgmentSet::new(RelevanceGrade::ZERO);
        for (doc, &g) in docs.iter().zip(&grades) {
            judgments.insert("q", doc.clone(), RelevanceGrade::new(g).unwrap());
        }
        let candidates: BTreeSet<String> = docs.iter().cloned().collect();
        let cutoff = k(rng.gen_range(1..=len));

        let ideal = ideal_dcg_at_k("q", &judgments, &candidates, cutoff, 2.0);
        if grades.iter().all(|g| *g == 0.0) {
            assert_eq!(ideal, 0.0);
            continue;
        }
        for perm in docs.iter().cloned().permutations(len) {
            let list = RankedList::new("q", "perm", perm).unwrap();
            let dcg = dcg_at_k(&list, &judgments, cutoff, 2.0);
            assert!(
                dcg <= ideal + TOL,
                "permutation beat the ideal: {dcg} > {ideal} for grades {grades:?}"
            );
        }
        // the ideal ordering itself: grade descending, doc id ascending
        let mut ordered: Vec<(String, f64)> = docs
            .iter()
            .cloned()
            .zip(grades.iter().copied())
            .collect();
        ordered.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let ideal_list =
            RankedList::new("q", "ideal", ordered.into_iter().map(|(d, _)| d).collect()).unwrap();
        let ndcg = ndcg_at_k(&ideal_list, &judgments, &candidates, cutoff, 2.0).unwrap();
        assert_eq!(ndcg, 1.0, "ideal ordering must normalise to exactly 1.0");
        checked += 1;
    }
    assert!(checked >= 700, "too few non-degenerate multisets: {checked}");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, bound 30s");
    println!("PASS criterion 2: ideal ordering dominates all permutations of {checked} lattice multisets (len <= 6) in {elapsed:?}");
}

#[test]
fn criterion_03_binary_grades_reduce_to_classical_metrics() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..1_000 {
        let len = rng.gen_range(1..=30);
        let rel: Vec<bool> = (0..len).map(|_| rng.gen_bool(0.4)).collect();
        let grades: Vec<f64> = rel.iter().map(|r| if *r { 1.0 } else { 0.0 }).collect();
        let cutoff = rng.gen_range(1..=len + 5);
        let (list, judgments) = single_list(&grades);

        // classical precision: relevant in top k over k
        let hits_at_k = rel.iter().take(cutoff).filter(|r| **r).count();
        let classical_p = hits_at_k as f64 / cutoff as f64;
        assert_eq!(precision_at_k(&list, &judgments, k(cutoff)), classical_p);

        // classical AP at k, normalised by min(relevant docs, k)
        let total_relevant = rel.iter().filter(|r| **r).count();
        let got = average_precision_at_k(&list, &judgments, k(cutoff));
        if total_relevant == 0 {
            assert_eq!(got, Err(MetricsError::IdealGainZero));
            continue;
        }
        let mut hits = 0usize;
        let mut sum = 0.0;
        for (i, r) in rel.iter().take(cutoff).enumerate() {
            if *r {
                hits += 1;
                sum += hits as f64 / (i + 1) as f64;
            }
        }
        let classical_ap = sum / total_relevant.min(cutoff) as f64;
        assert_eq!(got, Ok(classical_ap), "len={len} k={cutoff} rel={rel:?}");
    }
    println!("PASS criterion 3: precision and AP equal their classical forms exactly on 1000 binary lists");
}

#[test]
fn criterion_04_pir_endpoint_identities() {
    let deltas: BTreeMap<String, f64> = (1..=7)
        .map(|i| (format!("q{i}"), if i % 2 == 0 { 0.2 } else { -0.4 }))
        .collect();
    let aligned: BTreeMap<String, PreferenceJudgment> = deltas
        .iter()
        .map(|(q, d)| {
            let v = if *d > 0.0 {
                PreferenceJudgment::First
            } else {
                PreferenceJudgment::Second
            };
            (q.clone(), v)
        })
        .collect();
    let inverted: BTreeMap<String, PreferenceJudgment> = aligned
        .iter()
        .map(|(q, v)| {
            let flipped = match v {
                PreferenceJudgment::First => PreferenceJudgment::Second,
                PreferenceJudgment::Second => PreferenceJudgment::First,
                PreferenceJudgment::Tie => PreferenceJudgment::Tie,
            };
            (q.clone(), flipped)
        })
        .collect();
    assert_eq!(pir(&deltas, &aligned, 0.0).unwrap(), 1.0);
    assert_eq!(pir(&deltas, &inverted, 0.0).unwrap(), -1.0);
    let constant: BTreeMap<String, f64> = deltas.keys().map(|q| (q.clone(), 0.0)).collect();
    for t in [0.0, 0.01, 0.5, 1.0] {
        assert_eq!(pir(&constant, &aligned, t).unwrap(), 0.0);
    }
    println!("PASS criterion 4: PIR hits +1, -1 and 0 exactly on aligned, inverted and constant fixtures");
}

#[test]
fn criterion_05_pir_agrees_with_the_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let verdicts = [
        PreferenceJudgment::First,
        PreferenceJudgment::Second,
        PreferenceJudgment::Tie,
    ];
    for _ in 0..10_000 {
        let queries = rng.gen_range(1..=12);
        let mut deltas = BTreeMap::new();
        let mut prefs = BTreeMap::new();
        for i in 0..queries {
            let q = format!("q{i:02}");
            // lattice deltas so |delta| == t happens routinely
            deltas.insert(q.clone(), rng.gen_range(-6..=6i32) as f64 * 0.05);
            prefs.insert(q, verdicts[rng.gen_range(0..verdicts.len())]);
        }
        let t = rng.gen_range(0..=20) as f64 * 0.05;
        match (pir(&deltas, &prefs, t), oracle_pir(&deltas, &prefs, t)) {
            (Ok(a), Ok(b)) => assert_eq!(a, b, "t={t} deltas={deltas:?} prefs={prefs:?}"),
            (Err(a), Err(b)) => assert_eq!(a, b),
            (a, b) => panic!("implementation and oracle disagree: {a:?} vs {b:?}"),
        }
    }
    println!("PASS criterion 5: pir equals oracle_pir bit for bit on 10000 instances with ties and boundary deltas");
}

#[test]
fn criterion_06_three_query_fixture_values() {
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
    let at_tenth = pir(&deltas, &prefs, 0.1).unwrap();
    assert!(at_tenth.abs() <= TOL, "t=0.1 gave {at_tenth}, want 0.0");
    let at_zero = pir(&deltas, &prefs, 0.0).unwrap();
    assert!(
        (at_zero + 1.0 / 3.0).abs() <= TOL,
        "t=0 gave {at_zero}, want -1/3"
    );
    println!("PASS criterion 6: three-query fixture yields PIR 0.0 at t=0.1 and -1/3 at t=0");
}

#[test]
fn criterion_07_school_grade_conversion_table() {
    let expected = [1.0, 0.8, 0.6, 0.4, 0.2, 0.0];
    for (raw, want) in (1..=6i64).zip(expected) {
        let got = convert_school_grade(SchoolGrade::new(raw).unwrap()).value();
        assert_eq!(got, want, "school grade {raw}");
    }
    println!("PASS criterion 7: school grades 1..6 convert to 1.0, 0.8, 0.6, 0.4, 0.2, 0.0 exactly");
}

fn run_tool(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pireval"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn simulate_aligned_study(dir: &Path) {
    let out = run_tool(&[
        "simulate",
        "--seed",
        "42",
        "--queries",
        "200",
        "--docs",
        "50",
        "--grade-noise",
        "0",
        "--tie-margin",
        "0",
        "--persistence-depth",
        "5",
        "--utility",
        "ndcg",
        "--log-base",
        "2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "simulate failed: {out:?}");
}

#[test]
fn criterion_08_aligned_noise_free_sweep_reaches_pir_one() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let study = tmp.path().join("study");
    simulate_aligned_study(&study);

    let report_path = tmp.path().join("report.csv");
    let out = run_tool(&[
        "sweep",
        "--judgments",
        study.join("judgments.tsv").to_str().unwrap(),
        "--runs",
        study.join("runs.tsv").to_str().unwrap(),
        "--prefs",
        study.join("prefs.tsv").to_str().unwrap(),
        "--scale",
        "unit",
        "--metrics",
        "precision,ap,ndcg",
        "--cutoffs",
        "1-10",
        "--threshold-step",
        "0.01",
        "--log-base",
        "2",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "sweep failed: {out:?}");

    let report = std::fs::read_to_string(&report_path).unwrap();
    let best = report
        .lines()
        .find(|line| line.starts_with("# best: metric=ndcg cutoff=5 "))
        .expect("report carries a best line for ndcg at cutoff 5");
    assert!(
        best.contains("threshold=0.000000") && best.contains("pir=1.000000"),
        "aligned cell should peak at (t=0, PIR 1): {best}"
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, bound 60s");
    println!("PASS criterion 8: noise-free ndcg-aligned study sweeps to best PIR 1.000000 at t=0.000000 in {elapsed:?}");
}

#[test]
fn criterion_09_prediction_support_shrinks_as_t_grows() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let verdicts = [
        PreferenceJudgment::First,
        PreferenceJudgment::Second,
        PreferenceJudgment::Tie,
    ];
    for _ in 0..1_000 {
        let queries = rng.gen_range(1..=15);
        let mut deltas = BTreeMap::new();
        let mut prefs = BTreeMap::new();
        for i in 0..queries {
            let q = format!("q{i:02}");
            deltas.insert(q.clone(), rng.gen_range(-1.0..=1.0));
            prefs.insert(q, verdicts[rng.gen_range(0..verdicts.len())]);
        }
        let mut prev = usize::MAX;
        for step in 0..=100 {
            let support = pir_support(&deltas, &prefs, step as f64 * 0.01).unwrap();
            assert!(
                support <= prev,
                "support grew from {prev} to {support} at step {step}"
            );
            prev = support;
        }
    }
    println!("PASS criterion 9: nonzero-term support is non-increasing over t in 0..=1 on 1000 instances");
}

#[test]
fn criterion_10_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let study_a = tmp.path().join("a");
    let study_b = tmp.path().join("b");
    for dir in [&study_a, &study_b] {
        let out = run_tool(&[
            "simulate",
            "--seed",
            "7",
            "--queries",
            "30",
            "--docs",
            "12",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "simulate failed: {out:?}");
    }
    for name in ["judgments.tsv", "runs.tsv", "prefs.tsv"] {
        let a = std::fs::read(study_a.join(name)).unwrap();
        let b = std::fs::read(study_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical simulate runs");
    }

    let mut reports = Vec::new();
    for name in ["r1.csv", "r2.csv"] {
        let path = tmp.path().join(name);
        let out = run_tool(&[
            "sweep",
            "--judgments",
            study_a.join("judgments.tsv").to_str().unwrap(),
            "--runs",
            study_a.join("runs.tsv").to_str().unwrap(),
            "--prefs",
            study_a.join("prefs.tsv").to_str().unwrap(),
            "--scale",
            "unit",
            "--cutoffs",
            "1-5",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "sweep failed: {out:?}");
        reports.push(std::fs::read(path).unwrap());
    }
    assert_eq!(reports[0], reports[1], "sweep reports differ between runs");
    println!("PASS criterion 10: repeated simulate and sweep invocations emit byte-identical outputs");
}

#[test]
fn criterion_11_serialise_then_parse_is_identity() {
    for seed in 0..100 {
        let mut config = SimConfig::new(seed, 4, 6);
        config.grade_noise = 0.05 + (seed % 5) as f64 * 0.05;
        config.persistence_depth = 1 + (seed as usize % 6);
        let (bundle, _) = generate_study(&config).unwrap();

        let judgments = parse_judgments(&write_judgments(&bundle.judgments), Scale::Unit).unwrap();
        assert_eq!(judgments, bundle.judgments, "judgments round trip, seed {seed}");

        let lists = parse_runs(&write_runs(&bundle.runs())).unwrap();
        let original = bundle.runs();
        assert_eq!(lists.len(), original.len());
        for (parsed, written) in lists.iter().zip(original) {
            assert_eq!(parsed, written, "runs round trip, seed {seed}");
        }

        let prefs = parse_preferences(&write_preferences(&bundle.prefs)).unwrap();
        assert_eq!(prefs, bundle.prefs, "preferences round trip, seed {seed}");
    }
    println!("PASS criterion 11: 100 simulated studies survive serialise-then-parse bit for bit");
}
