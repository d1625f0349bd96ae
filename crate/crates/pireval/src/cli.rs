//! Command-line front end.
//!
//! Four subcommands: `metrics` scores run lists, `pir` evaluates one
//! metric/cutoff/threshold cell, `sweep` produces the full threshold
//! profile, `simulate` writes a synthetic study. Exit codes: 0 on success,
//! 1 on usage errors, 2 on data errors, each with a one-line diagnostic.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::io::{
    parse_judgments, parse_preferences, parse_runs, write_judgments, write_preferences,
    write_report_with_meta, write_runs, ReportFormat, Scale, StudyBundle,
};
use crate::metrics::{metric_eval, CutoffK, JudgmentSet, MetricKind, MetricsError, RankedList};
use crate::preference::{compute_deltas, pir, pir_profile, ListPair, PreferenceJudgment, SweepGrid};
use crate::sim::{generate_study, SimConfig, GENERATOR};

const TOOL: &str = "pireval";
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "pireval",
    version,
    about = "Graded relevance metrics and their meta-evaluation against pairwise preferences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every run list with the chosen metrics
    Metrics(MetricsArgs),
    /// Preference identification ratio for one metric, cutoff and threshold
    Pir(PirArgs),
    /// Sweep thresholds over a metric/cutoff grid and report the profile
    Sweep(SweepArgs),
    /// Generate a synthetic study with known ground truth
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Judgments file: query, doc, grade (tab-separated)
    #[arg(long)]
    judgments: PathBuf,
    /// Runs file: query, list, rank, doc (tab-separated)
    #[arg(long)]
    runs: PathBuf,
    /// Grade scale used by the judgments file
    #[arg(long, value_enum, default_value_t = ScaleArg::Unit)]
    scale: ScaleArg,
}

#[derive(Args)]
struct MetricsArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma list drawn from precision, ap, cg, dcg, ndcg
    #[arg(long, default_value = "precision,ap,ndcg")]
    metrics: String,
    /// Comma list of cutoffs; ranges like 1-10 expand
    #[arg(long, default_value = "1-10")]
    cutoffs: String,
    /// Discount log base for dcg and ndcg
    #[arg(long, default_value_t = 2.0)]
    log_base: f64,
    /// Write the table here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PirArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Preferences file: query, verdict (FIRST, SECOND or TIE)
    #[arg(long)]
    prefs: PathBuf,
    /// One of precision, ap, cg, dcg, ndcg
    #[arg(long)]
    metric: String,
    #[arg(long)]
    cutoff: usize,
    /// Smallest |delta| that counts as a prediction
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Discount log base for dcg and ndcg
    #[arg(long, default_value_t = 2.0)]
    log_base: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Preferences file: query, verdict (FIRST, SECOND or TIE)
    #[arg(long)]
    prefs: PathBuf,
    /// Comma list drawn from precision, ap, cg, dcg, ndcg
    #[arg(long, default_value = "precision,ap,ndcg")]
    metrics: String,
    /// Comma list of cutoffs; ranges like 1-10 expand
    #[arg(long, default_value = "1-10")]
    cutoffs: String,
    #[arg(long, default_value_t = 0.01)]
    threshold_step: f64,
    /// Sweep ceiling; defaults to 1 for unit-range metrics and to the
    /// largest observed |delta| otherwise
    #[arg(long)]
    threshold_max: Option<f64>,
    /// Discount log base for dcg and ndcg
    #[arg(long, default_value_t = 2.0)]
    log_base: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    queries: usize,
    #[arg(long, default_value_t = 50)]
    docs: usize,
    /// Std dev of rater grade noise
    #[arg(long, default_value_t = 0.1)]
    grade_noise: f64,
    /// Std dev of the engine score noise ordering the first list
    #[arg(long, default_value_t = 0.15)]
    engine_noise: f64,
    /// Top ranks the simulated user inspects
    #[arg(long, default_value_t = 10)]
    persistence_depth: usize,
    /// Utility differences below this margin become TIE verdicts
    #[arg(long, default_value_t = 0.05)]
    tie_margin: f64,
    /// Utility metric the verdicts derive from
    #[arg(long, default_value = "cg")]
    utility: String,
    /// Discount log base if the utility is dcg or ndcg
    #[arg(long, default_value_t = 2.0)]
    log_base: f64,
    /// True relevance shape: alpha
    #[arg(long, default_value_t = 1.2)]
    rel_alpha: f64,
    /// True relevance shape: beta
    #[arg(long, default_value_t = 3.5)]
    rel_beta: f64,
    /// Directory receiving judgments.tsv, runs.tsv and prefs.tsv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScaleArg {
    Unit,
    School6,
}

impl From<ScaleArg> for Scale {
    fn from(arg: ScaleArg) -> Scale {
        match arg {
            ScaleArg::Unit => Scale::Unit,
            ScaleArg::School6 => Scale::School6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

fn usage(msg: impl Display) -> Failure {
    Failure::Usage(msg.to_string())
}

fn data(msg: impl Display) -> Failure {
    Failure::Data(msg.to_string())
}

type CmdResult = Result<(), Failure>;

/// Parses the arguments and runs the chosen subcommand, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help and version print to stdout and exit cleanly
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Metrics(args) => cmd_metrics(args),
        Command::Pir(args) => cmd_pir(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn parse_metric_name(name: &str, log_base: f64) -> Result<MetricKind, Failure> {
    match name.trim() {
        "precision" => Ok(MetricKind::Precision),
        "ap" => Ok(MetricKind::AveragePrecision),
        "cg" => Ok(MetricKind::CumulatedGain),
        "dcg" => MetricKind::dcg(log_base).map_err(usage),
        "ndcg" => MetricKind::ndcg(log_base).map_err(usage),
        other => Err(usage(format!(
            "unknown metric {other:?}; expected precision, ap, cg, dcg or ndcg"
        ))),
    }
}

fn parse_metric_list(spec: &str, log_base: f64) -> Result<Vec<MetricKind>, Failure> {
    let mut kinds = Vec::new();
    for name in spec.split(',') {
        let kind = parse_metric_name(name, log_base)?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    Ok(kinds)
}

fn parse_cutoff_list(spec: &str) -> Result<Vec<CutoffK>, Failure> {
    let mut cutoffs = Vec::new();
    let mut push = |k: usize| -> Result<(), Failure> {
        let k = CutoffK::new(k).map_err(usage)?;
        if !cutoffs.contains(&k) {
            cutoffs.push(k);
        }
        Ok(())
    };
    for segment in spec.split(',') {
        let segment = segment.trim();
        let bad = || usage(format!("cutoff segment {segment:?} is not N or A-B"));
        if let Some((a, b)) = segment.split_once('-') {
            let a: usize = a.parse().map_err(|_| bad())?;
            let b: usize = b.parse().map_err(|_| bad())?;
            if a > b {
                return Err(usage(format!("cutoff range {segment:?} is reversed")));
            }
            for k in a..=b {
                push(k)?;
            }
        } else {
            push(segment.parse().map_err(|_| bad())?)?;
        }
    }
    Ok(cutoffs)
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn load_judgments(path: &Path, scale: Scale) -> Result<JudgmentSet, Failure> {
    parse_judgments(&read_file(path)?, scale)
        .map_err(|e| data(format!("{}: {e}", path.display())))
}

fn load_runs(path: &Path) -> Result<Vec<RankedList>, Failure> {
    parse_runs(&read_file(path)?).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn load_bundle(input: &InputArgs, prefs_path: &Path) -> Result<StudyBundle, Failure> {
    let judgments = load_judgments(&input.judgments, input.scale.into())?;
    let lists = load_runs(&input.runs)?;
    let pairs = ListPair::pair_up(lists)
        .map_err(|e| data(format!("{}: {e}", input.runs.display())))?;
    let prefs = parse_preferences(&read_file(prefs_path)?)
        .map_err(|e| data(format!("{}: {e}", prefs_path.display())))?;
    StudyBundle::new(judgments, pairs, prefs)
        .map_err(|e| data(format!("{}: {e}", prefs_path.display())))
}

fn count_unjudged(lists: &[&RankedList], judgments: &JudgmentSet) -> usize {
    lists
        .iter()
        .flat_map(|list| {
            list.docs()
                .iter()
                .filter(|doc| !judgments.is_judged(list.query_id(), doc))
        })
        .count()
}

/// Quotes a CSV field only when it needs it.
fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

fn meta_line(out: &mut Vec<(String, String)>, key: &str, value: impl Display) {
    out.push((key.to_string(), value.to_string()));
}

fn write_output(out: Option<&Path>, content: &str) -> CmdResult {
    match out {
        Some(path) => write_atomic(path, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Writes to a sibling temp file first and renames it over the target, so
/// an interrupted run never leaves a partial report behind.
fn write_atomic(path: &Path, content: &str) -> CmdResult {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| usage(format!("{}: not a writable file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, content).map_err(|e| data(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn cmd_metrics(args: MetricsArgs) -> CmdResult {
    let kinds = parse_metric_list(&args.metrics, args.log_base)?;
    let cutoffs = parse_cutoff_list(&args.cutoffs)?;
    let judgments = load_judgments(&args.input.judgments, args.input.scale.into())?;
    let lists = load_runs(&args.input.runs)?;
    let list_refs: Vec<&RankedList> = lists.iter().collect();

    // ideal orderings may draw on every judged doc the query showed anywhere
    let mut pools: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for list in &lists {
        let pool = pools.entry(list.query_id()).or_default();
        for doc in list.docs() {
            if judgments.is_judged(list.query_id(), doc) {
                pool.insert(doc.clone());
            }
        }
    }

    let mut skipped = 0usize;
    let mut rows = String::new();
    for list in &lists {
        let pool = &pools[list.query_id()];
        for kind in &kinds {
            for k in &cutoffs {
                match metric_eval(*kind, list, &judgments, pool, *k) {
                    Ok(value) => rows.push_str(&format!(
                        "{},{},{},{},{value:.6}\n",
                        csv_field(list.query_id()),
                        csv_field(list.list_id()),
                        kind.name(),
                        k.get()
                    )),
                    Err(MetricsError::IdealGainZero) => skipped += 1,
                    Err(e) => return Err(data(e)),
                }
            }
        }
    }

    let mut meta = Vec::new();
    meta_line(&mut meta, "tool", TOOL);
    meta_line(&mut meta, "version", VERSION);
    meta_line(&mut meta, "command", "metrics");
    meta_line(&mut meta, "judgments", args.input.judgments.display());
    meta_line(&mut meta, "runs", args.input.runs.display());
    meta_line(&mut meta, "scale", format!("{:?}", args.input.scale).to_lowercase());
    meta_line(&mut meta, "metrics", &args.metrics);
    meta_line(&mut meta, "cutoffs", &args.cutoffs);
    meta_line(&mut meta, "log_base", args.log_base);
    meta_line(&mut meta, "unjudged_docs", count_unjudged(&list_refs, &judgments));
    meta_line(&mut meta, "skipped_no_relevance", skipped);

    let mut content = String::new();
    for (key, value) in &meta {
        content.push_str(&format!("# {key}: {value}\n"));
    }
    content.push_str("query,list,metric,cutoff,value\n");
    content.push_str(&rows);
    write_output(args.out.as_deref(), &content)
}

fn check_threshold(t: f64) -> Result<(), Failure> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(usage(format!("threshold {t} must be finite and non-negative")))
    }
}

fn cmd_pir(args: PirArgs) -> CmdResult {
    let kind = parse_metric_name(&args.metric, args.log_base)?;
    let k = CutoffK::new(args.cutoff).map_err(usage)?;
    check_threshold(args.threshold)?;
    let bundle = load_bundle(&args.input, &args.prefs)?;

    let ds = compute_deltas(&bundle.pairs, &bundle.judgments, kind, k).map_err(data)?;
    let kept: BTreeMap<String, PreferenceJudgment> = bundle
        .prefs
        .iter()
        .filter(|(query, _)| ds.deltas.contains_key(*query))
        .map(|(query, verdict)| (query.clone(), *verdict))
        .collect();
    let value = pir(&ds.deltas, &kept, args.threshold).map_err(data)?;
    if !ds.dropped.is_empty() {
        eprintln!(
            "note: dropped {} of {} queries ({} carries no positive grade)",
            ds.dropped.len(),
            bundle.pairs.len(),
            kind.name()
        );
    }
    println!("{value:.6}");
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> CmdResult {
    let kinds = parse_metric_list(&args.metrics, args.log_base)?;
    let cutoffs = parse_cutoff_list(&args.cutoffs)?;
    if !(args.threshold_step.is_finite() && args.threshold_step > 0.0) {
        return Err(usage(format!(
            "threshold step {} must be finite and positive",
            args.threshold_step
        )));
    }
    if let Some(max) = args.threshold_max {
        if !(max.is_finite() && max >= 0.0) {
            return Err(usage(format!(
                "threshold ceiling {max} must be finite and non-negative"
            )));
        }
    }
    let bundle = load_bundle(&args.input, &args.prefs)?;
    let grid = SweepGrid {
        metrics: kinds,
        cutoffs,
        threshold_step: args.threshold_step,
        threshold_max: args.threshold_max,
    };
    let result = pir_profile(&bundle.pairs, &bundle.judgments, &bundle.prefs, &grid)
        .map_err(data)?;

    let mut meta = Vec::new();
    meta_line(&mut meta, "tool", TOOL);
    meta_line(&mut meta, "version", VERSION);
    meta_line(&mut meta, "command", "sweep");
    meta_line(&mut meta, "judgments", args.input.judgments.display());
    meta_line(&mut meta, "runs", args.input.runs.display());
    meta_line(&mut meta, "prefs", args.prefs.display());
    meta_line(&mut meta, "scale", format!("{:?}", args.input.scale).to_lowercase());
    meta_line(&mut meta, "metrics", &args.metrics);
    meta_line(&mut meta, "cutoffs", &args.cutoffs);
    meta_line(&mut meta, "threshold_step", args.threshold_step);
    match args.threshold_max {
        Some(max) => meta_line(&mut meta, "threshold_max", max),
        None => meta_line(&mut meta, "threshold_max", "auto"),
    }
    meta_line(&mut meta, "log_base", args.log_base);
    meta_line(&mut meta, "ties", "excluded");
    let runs = bundle.runs();
    meta_line(&mut meta, "unjudged_docs", count_unjudged(&runs, &bundle.judgments));

    let format = match args.format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Json => ReportFormat::Json,
    };
    let content = write_report_with_meta(&result, format, &meta);
    write_output(args.out.as_deref(), &content)
}

fn cmd_simulate(args: SimulateArgs) -> CmdResult {
    let utility = parse_metric_name(&args.utility, args.log_base)?;
    let mut config = SimConfig::new(args.seed, args.queries, args.docs);
    config.grade_noise = args.grade_noise;
    config.engine_noise = args.engine_noise;
    config.persistence_depth = args.persistence_depth;
    config.tie_margin = args.tie_margin;
    config.utility_metric = utility;
    config.relevance_alpha = args.rel_alpha;
    config.relevance_beta = args.rel_beta;

    // config problems are flag problems
    let (bundle, _) = generate_study(&config).map_err(usage)?;

    let mut meta = Vec::new();
    meta_line(&mut meta, "tool", TOOL);
    meta_line(&mut meta, "version", VERSION);
    meta_line(&mut meta, "command", "simulate");
    meta_line(&mut meta, "generator", GENERATOR);
    meta_line(&mut meta, "seed", args.seed);
    meta_line(&mut meta, "queries", args.queries);
    meta_line(&mut meta, "docs", args.docs);
    meta_line(&mut meta, "grade_noise", args.grade_noise);
    meta_line(&mut meta, "engine_noise", args.engine_noise);
    meta_line(&mut meta, "persistence_depth", args.persistence_depth);
    meta_line(&mut meta, "tie_margin", args.tie_margin);
    meta_line(&mut meta, "utility", utility.name());
    meta_line(&mut meta, "log_base", args.log_base);
    meta_line(&mut meta, "rel_alpha", args.rel_alpha);
    meta_line(&mut meta, "rel_beta", args.rel_beta);
    let mut header = String::new();
    for (key, value) in &meta {
        header.push_str(&format!("# {key}: {value}\n"));
    }

    fs::create_dir_all(&args.out)
        .map_err(|e| data(format!("{}: {e}", args.out.display())))?;
    let judgments = format!("{header}{}", write_judgments(&bundle.judgments));
    write_atomic(&args.out.join("judgments.tsv"), &judgments)?;
    let runs = format!("{header}{}", write_runs(&bundle.runs()));
    write_atomic(&args.out.join("runs.tsv"), &runs)?;
    let prefs = format!("{header}{}", write_preferences(&bundle.prefs));
    write_atomic(&args.out.join("prefs.tsv"), &prefs)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_names_parse_and_dedupe() {
        let kinds = parse_metric_list("precision,ap,precision,ndcg", 2.0).unwrap();
        assert_eq!(kinds.len(), 3);
        assert!(parse_metric_list("precision,rr", 2.0).is_err());
        assert!(parse_metric_list("ndcg", 1.5).is_err());
    }

    #[test]
    fn cutoff_lists_expand_ranges() {
        let ks = parse_cutoff_list("1-3,7,2").unwrap();
        let got: Vec<usize> = ks.iter().map(|k| k.get()).collect();
        assert_eq!(got, vec![1, 2, 3, 7]);
        assert!(parse_cutoff_list("0").is_err());
        assert!(parse_cutoff_list("5-2").is_err());
        assert!(parse_cutoff_list("a-b").is_err());
        assert!(parse_cutoff_list("").is_err());
    }

    #[test]
    fn csv_fields_quote_only_when_needed() {
        assert_eq!(csv_field("q1"), "q1");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
