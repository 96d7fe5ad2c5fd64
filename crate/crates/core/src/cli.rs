//! Command-line front end: scoring, selection, detection evaluation,
//! threshold sweeps, simulation, and separation metrics.
//!
//! Corpus inputs are either a single multi-recording RTTM file or a
//! directory of `.rttm` files (auto-detected). Reports print as aligned
//! tables by default; `--format json` emits the same numbers at full
//! precision. Warnings go to stderr and never change the exit code.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::der::{
    score_der_with, CorpusScore, DerBreakdown, PooledDer, ScoringOptions,
};
use crate::rttm::{apply_uem, parse_rttm, parse_uem, serialize_rttm, ParseOptions};
use crate::selector::{
    combine_flags, detection_positives, metrics_from_flags, oracle_select, select,
    CombinationMode, DetectionMetrics, Selection, SelectionRecord,
};
use crate::sep::{si_snr_with, upit_loss_with, SiSnrOptions, UpitOptions};
use crate::sim::{
    evaluate_benchmark, generate_utterance, BenchmarkRun, InjectedMode, SimConfig,
    SimulatedUtterance,
};
use crate::strategies::{
    strategy1_balance, strategy2_overlap, strategy3_deviation, StrategyVerdict, Thresholds,
};
use crate::timeline::{Annotation, Time};
use crate::wav::load_mono_wav;

#[derive(Parser, Debug)]
#[command(name = "diarkit", version, about = "Diarization scoring, selection and simulation")]
struct Cli {
    /// Worker threads for per-recording work (default: all processors).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score a hypothesis against a reference (DER and decomposition).
    Score(ScoreArgs),
    /// Select per recording between CSD and SSD results.
    Select(SelectArgs),
    /// Evaluate poor-separation detection against ground truth.
    DetectEval(DetectEvalArgs),
    /// Sweep detection thresholds over a grid.
    Sweep(SweepArgs),
    /// Generate a synthetic corpus and run the full selection benchmark.
    Simulate(SimulateArgs),
    /// Scale-invariant source-to-noise ratio of two WAV files.
    Sisnr(SisnrArgs),
    /// Permutation-invariant separation loss over WAV file sets.
    Upit(UpitArgs),
}

#[derive(Args, Debug, Clone, Copy)]
struct ThresholdArgs {
    /// Minimum speaker-duration ratio before flagging poor separation.
    #[arg(long, default_value_t = 0.40)]
    th1: f64,
    /// Maximum overlap ratio before flagging poor separation.
    #[arg(long, default_value_t = 0.20)]
    th2: f64,
    /// Maximum deviation from the CSD result before flagging.
    #[arg(long, default_value_t = 0.26)]
    th3: f64,
}

impl ThresholdArgs {
    fn thresholds(&self) -> Thresholds {
        Thresholds {
            th1: self.th1,
            th2: self.th2,
            th3: self.th3,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ReportFormat {
    /// Aligned text table, percentages with two decimals.
    Table,
    /// Structured JSON with full-precision values.
    Json,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Reference RTTM file or directory.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Hypothesis RTTM file or directory.
    #[arg(long)]
    hyp: PathBuf,
    /// UEM file restricting scoring regions.
    #[arg(long)]
    uem: Option<PathBuf>,
    /// Forgiveness collar in seconds around reference boundaries.
    #[arg(long, default_value_t = 0.0)]
    collar: f64,
    /// Round sub-centisecond input times instead of rejecting them.
    #[arg(long)]
    round: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
    /// Write the structured report to this file as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelectArgs {
    /// CSD results (RTTM file or directory).
    #[arg(long)]
    csd: PathBuf,
    /// SSD results (RTTM file or directory).
    #[arg(long)]
    ssd: PathBuf,
    /// Ground-truth reference; required for --mode oracle.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Combination mode: s1, s2, s3, s1and2, vote or oracle.
    #[arg(long, value_parser = CombinationMode::from_str, default_value = "s3")]
    mode: CombinationMode,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    #[arg(long)]
    round: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
    /// Output directory for selected RTTMs and the selection report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DetectEvalArgs {
    #[arg(long)]
    csd: PathBuf,
    #[arg(long)]
    ssd: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Modes to evaluate, in output order.
    #[arg(long = "mode", value_parser = CombinationMode::from_str,
          value_delimiter = ',', num_args = 1..,
          default_values = ["s1", "s2", "s3", "s1and2", "vote"])]
    modes: Vec<CombinationMode>,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    #[arg(long)]
    round: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    csd: PathBuf,
    #[arg(long)]
    ssd: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Mode whose flags are swept.
    #[arg(long, value_parser = CombinationMode::from_str, default_value = "s3")]
    mode: CombinationMode,
    /// Grid of th1 values (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = [0.40])]
    th1_grid: Vec<f64>,
    /// Grid of th2 values.
    #[arg(long, value_delimiter = ',', default_values_t = [0.20])]
    th2_grid: Vec<f64>,
    /// Grid of th3 values.
    #[arg(long, value_delimiter = ',', default_values_t = [0.26])]
    th3_grid: Vec<f64>,
    #[arg(long)]
    round: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Generator configuration (TOML key-value file). Defaults apply
    /// when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    /// Output directory for RTTM files and the benchmark report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SisnrArgs {
    /// Estimate WAV file (mono, PCM16 or float32).
    #[arg(long)]
    est: PathBuf,
    /// Target WAV file.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Subtract signal means before projecting.
    #[arg(long)]
    zero_mean: bool,
}

#[derive(Args, Debug)]
struct UpitArgs {
    /// Estimate WAV files, one per source.
    #[arg(long = "est", required = true, num_args = 1..)]
    estimates: Vec<PathBuf>,
    /// Reference WAV files, one per source.
    #[arg(long = "ref", required = true, num_args = 1..)]
    references: Vec<PathBuf>,
    #[arg(long)]
    zero_mean: bool,
    /// Cap on the factorial permutation search.
    #[arg(long, default_value_t = 8)]
    max_sources: usize,
}

/// Entry point used by the binary.
pub fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.jobs {
        None => dispatch(cli.command),
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .context("building worker pool")?;
            pool.install(|| dispatch(cli.command))
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Score(args) => cmd_score(args),
        Command::Select(args) => cmd_select(args),
        Command::DetectEval(args) => cmd_detect_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sisnr(args) => cmd_sisnr(args),
        Command::Upit(args) => cmd_upit(args),
    }
}

fn emit_warnings(warnings: &[String]) {
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
}

/// Loads a corpus from a multi-recording RTTM file or a directory of
/// `.rttm` files. In directory mode a file with no records registers an
/// empty annotation under its file stem.
fn load_corpus(path: &Path, options: ParseOptions) -> Result<BTreeMap<String, Annotation>> {
    let mut corpus = BTreeMap::new();
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| format!("reading directory {}", path.display()))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "rttm"))
            .collect();
        files.sort();
        if files.is_empty() {
            bail!("{}: no .rttm files found", path.display());
        }
        for file in files {
            let parsed = parse_file(&file, options)?;
            if parsed.is_empty() {
                let stem = file
                    .file_stem()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_default();
                eprintln!(
                    "warning: {}: no records; treating recording `{stem}` as empty",
                    file.display()
                );
                if corpus.insert(stem.clone(), Annotation::empty(stem.clone())).is_some() {
                    bail!("recording `{stem}` appears in multiple files");
                }
                continue;
            }
            for (id, annotation) in parsed {
                if corpus.insert(id.clone(), annotation).is_some() {
                    bail!("recording `{id}` appears in multiple files");
                }
            }
        }
    } else {
        corpus = parse_file(path, options)?;
    }
    Ok(corpus)
}

fn parse_file(path: &Path, options: ParseOptions) -> Result<BTreeMap<String, Annotation>> {
    let file =
        fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let parsed = parse_rttm(BufReader::new(file), options)
        .with_context(|| format!("parsing {}", path.display()))?;
    emit_warnings(&parsed.warnings);
    Ok(parsed.annotations)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn percent(rate: f64) -> f64 {
    rate * 100.0
}

// ---------------------------------------------------------------- score

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let options = ParseOptions { round: args.round };
    let mut references = load_corpus(&args.reference, options)?;
    let mut hypotheses = load_corpus(&args.hyp, options)?;

    if let Some(uem_path) = &args.uem {
        let file = fs::File::open(uem_path)
            .with_context(|| format!("opening {}", uem_path.display()))?;
        let regions = parse_uem(BufReader::new(file), options)
            .with_context(|| format!("parsing {}", uem_path.display()))?;
        for (id, annotation) in references.iter_mut() {
            match regions.get(id) {
                Some(r) => *annotation = apply_uem(annotation, r),
                None => eprintln!("warning: recording {id}: not listed in UEM; kept unrestricted"),
            }
        }
        for (id, annotation) in hypotheses.iter_mut() {
            if let Some(r) = regions.get(id) {
                *annotation = apply_uem(annotation, r);
            }
        }
    }

    let scoring = ScoringOptions {
        collar: Time::from_secs_f64(args.collar),
        regions: None,
    };
    let corpus = score_corpus_parallel(&references, &hypotheses, &scoring)?;
    emit_warnings(&corpus.warnings);

    match args.format {
        ReportFormat::Table => print_der_table(&corpus),
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&corpus)?),
    }
    if let Some(out) = &args.out {
        write_json(out, &corpus)?;
    }
    Ok(())
}

/// Same contract as [`crate::der::score_corpus`], with per-recording
/// scoring spread over the worker pool.
fn score_corpus_parallel(
    references: &BTreeMap<String, Annotation>,
    hypotheses: &BTreeMap<String, Annotation>,
    options: &ScoringOptions,
) -> Result<CorpusScore> {
    let mut warnings = Vec::new();
    let mut jobs: Vec<(String, Annotation, Annotation)> = Vec::new();
    let mut ids: Vec<&String> = references.keys().collect();
    ids.extend(hypotheses.keys().filter(|k| !references.contains_key(*k)));
    ids.sort();
    for id in ids {
        let reference = references.get(id).cloned().unwrap_or_else(|| {
            warnings.push(format!(
                "recording {id}: no reference; hypothesis scored against empty reference"
            ));
            Annotation::empty(id.clone())
        });
        let hypothesis = hypotheses.get(id).cloned().unwrap_or_else(|| {
            warnings.push(format!("recording {id}: missing hypothesis; scored as empty"));
            Annotation::empty(id.clone())
        });
        jobs.push((id.clone(), reference, hypothesis));
    }

    let per_recording: BTreeMap<String, DerBreakdown> = jobs
        .into_par_iter()
        .map(|(id, reference, hypothesis)| {
            score_der_with(&reference, &hypothesis, options).map(|b| (id, b))
        })
        .collect::<Result<_, _>>()?;

    Ok(CorpusScore {
        pooled: PooledDer::from_breakdowns(per_recording.values()),
        per_recording,
        warnings,
    })
}

fn print_der_table(corpus: &CorpusScore) {
    println!(
        "{:<24} {:>9} {:>9} {:>10} {:>9}",
        "Recording", "MISS(%)", "FA(%)", "SpkErr(%)", "DER(%)"
    );
    println!("{:-<64}", "");
    for (id, b) in &corpus.per_recording {
        let marker = if b.degenerate { "  (empty reference)" } else { "" };
        println!(
            "{:<24} {:>9.2} {:>9.2} {:>10.2} {:>9.2}{marker}",
            id,
            percent(b.miss_rate),
            percent(b.fa_rate),
            percent(b.spkerr_rate),
            percent(b.der),
        );
    }
    println!("{:-<64}", "");
    let p = &corpus.pooled;
    let marker = if p.degenerate { "  (empty reference)" } else { "" };
    println!(
        "{:<24} {:>9.2} {:>9.2} {:>10.2} {:>9.2}{marker}",
        "OVERALL",
        percent(p.miss_rate),
        percent(p.fa_rate),
        percent(p.spkerr_rate),
        percent(p.der),
    );
}

// --------------------------------------------------------------- select

fn cmd_select(args: SelectArgs) -> Result<()> {
    let options = ParseOptions { round: args.round };
    let csd = load_corpus(&args.csd, options)?;
    let ssd = load_corpus(&args.ssd, options)?;
    let thresholds = args.thresholds.thresholds();

    let selection = if args.mode == CombinationMode::Oracle {
        let reference_path = args
            .reference
            .as_ref()
            .context("--mode oracle requires --ref with ground truth")?;
        let reference = load_corpus(reference_path, options)?;
        oracle_select(&csd, &ssd, &reference)?
    } else {
        select(&csd, &ssd, &thresholds, args.mode)?
    };

    for record in &selection.records {
        for verdict in [&record.s1, &record.s2, &record.s3].into_iter().flatten() {
            if verdict.degenerate {
                eprintln!(
                    "warning: recording {}: degenerate input for check {:?}; flagged poor",
                    record.recording_id, verdict.strategy
                );
            }
        }
    }

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    for (id, annotation) in &selection.selected {
        let path = args.out.join(format!("{id}.rttm"));
        fs::write(&path, serialize_rttm([annotation]))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    write_json(&args.out.join("selection.json"), &selection)?;

    match args.format {
        ReportFormat::Table => print_selection_table(&selection),
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&selection)?),
    }
    Ok(())
}

fn verdict_cell(verdict: &Option<StrategyVerdict>) -> String {
    match verdict {
        None => "-".to_string(),
        Some(v) => match v.statistic {
            Some(stat) => format!("{stat:.3}{}", if v.flagged_poor { "*" } else { "" }),
            None => "degen*".to_string(),
        },
    }
}

fn print_selection_table(selection: &Selection) {
    println!(
        "mode: {}   thresholds: th1={} th2={} th3={}",
        selection.mode,
        selection.thresholds.th1,
        selection.thresholds.th2,
        selection.thresholds.th3
    );
    println!(
        "{:<24} {:>10} {:>10} {:>10} {:>8} {:>7}",
        "Recording", "S1", "S2", "S3", "flagged", "chosen"
    );
    println!("{:-<74}", "");
    for record in &selection.records {
        println!(
            "{:<24} {:>10} {:>10} {:>10} {:>8} {:>7}",
            record.recording_id,
            verdict_cell(&record.s1),
            verdict_cell(&record.s2),
            verdict_cell(&record.s3),
            if record.flagged_poor { "yes" } else { "no" },
            record.chosen.to_string(),
        );
    }
    println!("{:-<74}", "");
    println!(
        "flagged {} of {} recordings (* = check flagged poor)",
        selection.flagged_count(),
        selection.records.len()
    );
}

// ----------------------------------------------------------- detect-eval

#[derive(Serialize)]
struct ModeMetrics {
    mode: CombinationMode,
    detection: DetectionMetrics,
}

fn cmd_detect_eval(args: DetectEvalArgs) -> Result<()> {
    let options = ParseOptions { round: args.round };
    let csd = load_corpus(&args.csd, options)?;
    let ssd = load_corpus(&args.ssd, options)?;
    let reference = load_corpus(&args.reference, options)?;
    let thresholds = args.thresholds.thresholds();

    let mut rows = Vec::new();
    for mode in &args.modes {
        let selection = if *mode == CombinationMode::Oracle {
            oracle_select(&csd, &ssd, &reference)?
        } else {
            select(&csd, &ssd, &thresholds, *mode)?
        };
        let detection = crate::selector::evaluate_detection(&selection.flags(), &csd, &ssd, &reference)?;
        if detection.degenerate_precision {
            eprintln!("warning: mode {mode}: no recordings flagged; precision reported as 1.0");
        }
        if detection.degenerate_recall {
            eprintln!("warning: mode {mode}: no positive recordings; recall reported as 1.0");
        }
        rows.push(ModeMetrics {
            mode: *mode,
            detection,
        });
    }

    match args.format {
        ReportFormat::Table => print_detection_table(&rows),
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&rows)?),
    }
    if let Some(out) = &args.out {
        write_json(out, &rows)?;
    }
    Ok(())
}

fn print_detection_table(rows: &[ModeMetrics]) {
    println!(
        "{:<8} {:>7} {:>10} {:>6}",
        "Mode", "Recall", "Precision", "Acc"
    );
    println!("{:-<34}", "");
    for row in rows {
        println!(
            "{:<8} {:>7.2} {:>10.2} {:>6.2}",
            row.mode.to_string(),
            row.detection.recall,
            row.detection.precision,
            row.detection.accuracy,
        );
    }
}

// ---------------------------------------------------------------- sweep

#[derive(Serialize)]
struct SweepPoint {
    th1: f64,
    th2: f64,
    th3: f64,
    flagged: usize,
    detection: DetectionMetrics,
}

#[derive(Serialize)]
struct SweepReport {
    mode: CombinationMode,
    points: Vec<SweepPoint>,
    monotonicity_ok: bool,
    monotonicity_violations: Vec<String>,
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    if args.th1_grid.is_empty() || args.th2_grid.is_empty() || args.th3_grid.is_empty() {
        bail!("threshold grids must be non-empty");
    }
    if args.mode == CombinationMode::Oracle {
        bail!("sweep applies to verdict-based modes, not oracle");
    }
    let options = ParseOptions { round: args.round };
    let csd = load_corpus(&args.csd, options)?;
    let ssd = load_corpus(&args.ssd, options)?;
    let reference = load_corpus(&args.reference, options)?;

    // Statistics are threshold-independent; measure once and re-judge.
    let base = Thresholds::default();
    let mut verdicts: BTreeMap<String, (StrategyVerdict, StrategyVerdict, StrategyVerdict)> =
        BTreeMap::new();
    for (id, ssd_annotation) in &ssd {
        let csd_annotation = csd
            .get(id)
            .with_context(|| format!("recording {id} missing from CSD results"))?;
        verdicts.insert(
            id.clone(),
            (
                strategy1_balance(ssd_annotation, &base),
                strategy2_overlap(ssd_annotation, &base),
                strategy3_deviation(csd_annotation, ssd_annotation, &base)?,
            ),
        );
    }
    let template: BTreeMap<String, bool> = verdicts.keys().map(|k| (k.clone(), false)).collect();
    let positives = detection_positives(&template, &csd, &ssd, &reference)?;

    let mut points = Vec::new();
    for &th1 in &args.th1_grid {
        for &th2 in &args.th2_grid {
            for &th3 in &args.th3_grid {
                Thresholds { th1, th2, th3 }
                    .validate()
                    .map_err(|e| anyhow::anyhow!(e.to_string()))?;
                let mut flags = BTreeMap::new();
                for (id, (s1, s2, s3)) in &verdicts {
                    let flag = combine_flags(
                        Some(&s1.with_threshold(th1)),
                        Some(&s2.with_threshold(th2)),
                        Some(&s3.with_threshold(th3)),
                        args.mode,
                    )?;
                    flags.insert(id.clone(), flag);
                }
                let detection = metrics_from_flags(&flags, &positives)?;
                points.push(SweepPoint {
                    th1,
                    th2,
                    th3,
                    flagged: flags.values().filter(|&&f| f).count(),
                    detection,
                });
            }
        }
    }

    let violations = monotonicity_violations(&points);
    let report = SweepReport {
        mode: args.mode,
        monotonicity_ok: violations.is_empty(),
        monotonicity_violations: violations,
        points,
    };

    match args.format {
        ReportFormat::Table => print_sweep_table(&report),
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(())
}

/// Flag counts must be non-decreasing in th1 and non-increasing in th2
/// and th3, other axes held fixed.
fn monotonicity_violations(points: &[SweepPoint]) -> Vec<String> {
    let mut violations = Vec::new();
    let key = |p: &SweepPoint, axis: usize| match axis {
        0 => (p.th2.to_bits(), p.th3.to_bits()),
        1 => (p.th1.to_bits(), p.th3.to_bits()),
        _ => (p.th1.to_bits(), p.th2.to_bits()),
    };
    let value = |p: &SweepPoint, axis: usize| match axis {
        0 => p.th1,
        1 => p.th2,
        _ => p.th3,
    };
    for axis in 0..3usize {
        let mut groups: BTreeMap<(u64, u64), Vec<(f64, usize)>> = BTreeMap::new();
        for p in points {
            groups
                .entry(key(p, axis))
                .or_default()
                .push((value(p, axis), p.flagged));
        }
        for series in groups.values_mut() {
            series.sort_by(|a, b| a.0.total_cmp(&b.0));
            for pair in series.windows(2) {
                let ok = if axis == 0 {
                    pair[0].1 <= pair[1].1
                } else {
                    pair[0].1 >= pair[1].1
                };
                if !ok {
                    violations.push(format!(
                        "th{} {} -> {}: flag count {} -> {}",
                        axis + 1,
                        pair[0].0,
                        pair[1].0,
                        pair[0].1,
                        pair[1].1
                    ));
                }
            }
        }
    }
    violations
}

fn print_sweep_table(report: &SweepReport) {
    println!("mode: {}", report.mode);
    println!(
        "{:>6} {:>6} {:>6} {:>8} {:>7} {:>10} {:>6}",
        "th1", "th2", "th3", "flagged", "Recall", "Precision", "Acc"
    );
    println!("{:-<56}", "");
    for p in &report.points {
        println!(
            "{:>6.2} {:>6.2} {:>6.2} {:>8} {:>7.2} {:>10.2} {:>6.2}",
            p.th1, p.th2, p.th3, p.flagged,
            p.detection.recall, p.detection.precision, p.detection.accuracy,
        );
    }
    println!("{:-<56}", "");
    if report.monotonicity_ok {
        println!("flag-count monotonicity along each threshold axis: OK");
    } else {
        println!("flag-count monotonicity VIOLATED:");
        for v in &report.monotonicity_violations {
            println!("  {v}");
        }
    }
}

// ------------------------------------------------------------- simulate

#[derive(Serialize)]
struct RecordingReport {
    recording_id: String,
    injected_mode: InjectedMode,
    der_csd: f64,
    der_ssd: f64,
}

#[derive(Serialize)]
struct ModeReport<'a> {
    mode: CombinationMode,
    flagged: usize,
    corpus: &'a PooledDer,
    detection: &'a DetectionMetrics,
    records: &'a [SelectionRecord],
}

#[derive(Serialize)]
struct BenchmarkReport<'a> {
    config: &'a SimConfig,
    thresholds: Thresholds,
    recordings: Vec<RecordingReport>,
    csd_only: &'a PooledDer,
    ssd_only: &'a PooledDer,
    modes: Vec<ModeReport<'a>>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            SimConfig::from_toml_str(&text)?
        }
        None => SimConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    let thresholds = args.thresholds.thresholds();

    let utterances: Vec<SimulatedUtterance> = (0..config.num_recordings)
        .into_par_iter()
        .map(|index| generate_utterance(&config, index))
        .collect::<Result<_, _>>()?;
    let run = evaluate_benchmark(utterances, &thresholds)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let write_rttm = |name: &str, annotations: Vec<&Annotation>| -> Result<()> {
        let path = args.out.join(name);
        fs::write(&path, serialize_rttm(annotations))
            .with_context(|| format!("writing {}", path.display()))
    };
    write_rttm("reference.rttm", run.utterances.iter().map(|u| &u.reference).collect())?;
    write_rttm("csd.rttm", run.utterances.iter().map(|u| &u.csd).collect())?;
    write_rttm("ssd.rttm", run.utterances.iter().map(|u| &u.ssd).collect())?;
    for outcome in &run.outcomes {
        write_rttm(
            &format!("selected_{}.rttm", outcome.mode),
            outcome.selection.selected.values().collect(),
        )?;
    }

    let report = benchmark_report(&config, thresholds, &run);
    write_json(&args.out.join("report.json"), &report)?;
    print_benchmark_summary(&run);
    Ok(())
}

fn benchmark_report<'a>(
    config: &'a SimConfig,
    thresholds: Thresholds,
    run: &'a BenchmarkRun,
) -> BenchmarkReport<'a> {
    let recordings = run
        .utterances
        .iter()
        .map(|u| {
            let id = u.reference.recording_id().to_string();
            RecordingReport {
                der_csd: run.csd_only.per_recording[&id].der,
                der_ssd: run.ssd_only.per_recording[&id].der,
                recording_id: id,
                injected_mode: u.injected_mode,
            }
        })
        .collect();
    let modes = run
        .outcomes
        .iter()
        .map(|o| ModeReport {
            mode: o.mode,
            flagged: o.selection.flagged_count(),
            corpus: &o.corpus.pooled,
            detection: &o.detection,
            records: &o.selection.records,
        })
        .collect();
    BenchmarkReport {
        config,
        thresholds,
        recordings,
        csd_only: &run.csd_only.pooled,
        ssd_only: &run.ssd_only.pooled,
        modes,
    }
}

fn print_benchmark_summary(run: &BenchmarkRun) {
    let count = |mode: InjectedMode| {
        run.utterances.iter().filter(|u| u.injected_mode == mode).count()
    };
    println!(
        "corpus: {} recordings (clean {}, merged-stream failures {}, duplicated-stream failures {})",
        run.utterances.len(),
        count(InjectedMode::Clean),
        count(InjectedMode::Fail1),
        count(InjectedMode::Fail2),
    );
    println!(
        "baselines: CSD-only DER {:.2}%   SSD-only DER {:.2}%",
        percent(run.csd_only.pooled.der),
        percent(run.ssd_only.pooled.der),
    );
    println!(
        "{:<8} {:>8} {:>8} {:>7} {:>10} {:>6}",
        "Mode", "flagged", "DER(%)", "Recall", "Precision", "Acc"
    );
    println!("{:-<52}", "");
    for outcome in &run.outcomes {
        println!(
            "{:<8} {:>8} {:>8.2} {:>7.2} {:>10.2} {:>6.2}",
            outcome.mode.to_string(),
            outcome.selection.flagged_count(),
            percent(outcome.corpus.pooled.der),
            outcome.detection.recall,
            outcome.detection.precision,
            outcome.detection.accuracy,
        );
    }
}

// ----------------------------------------------------------- sisnr/upit

fn format_db(value: f64) -> String {
    if value == f64::INFINITY {
        "+inf dB (perfect reconstruction)".to_string()
    } else if value == f64::NEG_INFINITY {
        "-inf dB (orthogonal estimate)".to_string()
    } else {
        format!("{value:.4} dB")
    }
}

fn cmd_sisnr(args: SisnrArgs) -> Result<()> {
    let estimate = load_mono_wav(&args.est)?;
    let target = load_mono_wav(&args.reference)?;
    let value = si_snr_with(
        &estimate,
        &target,
        &SiSnrOptions {
            zero_mean: args.zero_mean,
        },
    )?;
    println!("Si-SNR: {}", format_db(value));
    Ok(())
}

fn cmd_upit(args: UpitArgs) -> Result<()> {
    let estimates = args
        .estimates
        .iter()
        .map(|p| load_mono_wav(p))
        .collect::<Result<Vec<_>, _>>()?;
    let references = args
        .references
        .iter()
        .map(|p| load_mono_wav(p))
        .collect::<Result<Vec<_>, _>>()?;
    let result = upit_loss_with(
        &estimates,
        &references,
        &UpitOptions {
            si_snr: SiSnrOptions {
                zero_mean: args.zero_mean,
            },
            max_sources: args.max_sources,
        },
    )?;

    let loss = if result.loss == f64::NEG_INFINITY {
        "-inf (perfect reconstruction)".to_string()
    } else if result.loss == f64::INFINITY {
        "+inf (orthogonal estimate)".to_string()
    } else {
        format!("{:.4}", result.loss)
    };
    println!("uPIT loss (mean negated Si-SNR): {loss}");
    let permutation: Vec<String> = result
        .permutation
        .iter()
        .enumerate()
        .map(|(i, j)| format!("{i} -> {j}"))
        .collect();
    println!("best permutation: {}", permutation.join(", "));
    for (i, value) in result.pair_si_snr.iter().enumerate() {
        println!(
            "pair {i}: estimate {} vs reference {}: {}",
            args.estimates[i].display(),
            args.references[result.permutation[i]].display(),
            format_db(*value),
        );
    }
    Ok(())
}
