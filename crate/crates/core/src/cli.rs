//! `pqah` command-line interface.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

use crate::aggregate::{dataset_summary, write_summary_csv, CategoryStats};
use crate::error::{Error, LlmError};
use crate::grid::BinaryGrid;
use crate::io::{load_manifest, read_indexed_png, write_indexed_png};
use crate::metric::{read_jsonl, write_jsonl, DEFAULT_THRESHOLD};
use crate::pipeline::score_manifest;
use crate::plot::{render_boxplots, Series};
use crate::regions::{split_lung_mask, RegionSplit};
use crate::report::{
    build_prompt, build_report_payload, request_report, LlmConfig, PromptTemplate, DEFAULT_DIGITS,
    DEFAULT_TOKEN_ENV,
};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum Exit {
    Ok = 0,
    Failure = 1,
    BadConfig = 2,
    Partial = 3,
}

#[derive(Debug, Parser)]
#[command(
    name = "pqah",
    version,
    about = "Part-based quantitative analysis of DNN heatmaps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every manifest entry and write PH records as JSON Lines.
    Run(RunArgs),
    /// Group scores by (category, part) into quartile stats.
    Aggregate(AggregateArgs),
    /// Average the quartile columns of one or more stats files into CSV.
    Summary(SummaryArgs),
    /// Render grouped boxplots, one SVG per category.
    Plot(PlotArgs),
    /// Split a whole-lung mask into six positional parts.
    SplitLung(SplitLungArgs),
    /// Build the report payload and prompt, optionally requesting the report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Skip min-max normalization of heatmaps.
    #[arg(long)]
    pub no_normalize: bool,
    /// Worker threads (default: logical CPUs).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SummaryArgs {
    /// Stats file; repeat for several rows.
    #[arg(long, required = true)]
    pub stats: Vec<PathBuf>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub include_bg: bool,
    /// Row label per stats file (default: file stem).
    #[arg(long)]
    pub label: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Stats file; repeat to draw grouped series.
    #[arg(long, required = true)]
    pub stats: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Series label per stats file (default: file stem).
    #[arg(long)]
    pub series: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SplitLungArgs {
    /// Binary lung mask PNG (nonzero = lung).
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub stats: PathBuf,
    /// Report file; the payload and prompt are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DIGITS)]
    pub digits: u32,
    #[arg(long)]
    pub llm_endpoint: Option<String>,
    #[arg(long, default_value = "gpt-4")]
    pub llm_model: String,
    #[arg(long, default_value = DEFAULT_TOKEN_ENV)]
    pub llm_token_env: String,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 120)]
    pub llm_timeout: u64,
    /// Template file containing `{payload}` exactly once.
    #[arg(long)]
    pub prompt_template: Option<PathBuf>,
    /// Manifest whose label order sets the payload's part order.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Parses `args` and runs the selected command.
pub fn main_with_args<I, T>(args: I) -> Exit
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                Exit::BadConfig
            } else {
                Exit::Ok
            }
        }
    }
}

pub fn execute(cli: Cli) -> Exit {
    let result = match cli.command {
        Command::Run(a) => return cmd_run(&a),
        Command::Aggregate(a) => cmd_aggregate(&a),
        Command::Summary(a) => cmd_summary(&a),
        Command::Plot(a) => cmd_plot(&a),
        Command::SplitLung(a) => cmd_split_lung(&a),
        Command::Report(a) => cmd_report(&a),
    };
    match result {
        Ok(()) => Exit::Ok,
        Err(e) => {
            error!("{e}");
            exit_for(&e)
        }
    }
}

fn exit_for(e: &Error) -> Exit {
    match e {
        Error::Io { .. }
        | Error::Json { .. }
        | Error::Manifest(_)
        | Error::InvalidThreshold(_)
        | Error::Template { .. }
        | Error::Llm(LlmError::Config(_)) => Exit::BadConfig,
        _ => Exit::Failure,
    }
}

pub fn cmd_run(args: &RunArgs) -> Exit {
    if !(0.0..=1.0).contains(&args.threshold) {
        error!("threshold {} outside [0, 1]", args.threshold);
        return Exit::BadConfig;
    }
    if args.workers == Some(0) {
        error!("--workers must be at least 1");
        return Exit::BadConfig;
    }
    let manifest = match load_manifest(&args.manifest) {
        Ok(m) => m,
        Err(e) => {
            error!("{e}");
            return Exit::BadConfig;
        }
    };
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let outcome = match score_manifest(&manifest, args.threshold, !args.no_normalize, workers) {
        Ok(o) => o,
        Err(e) => {
            error!("{e}");
            return exit_for(&e);
        }
    };
    for (id, e) in &outcome.failures {
        warn!("skipping image {id}: {e}");
    }
    if let Err(e) =
        File::create(&args.out).and_then(|f| write_jsonl(BufWriter::new(f), &outcome.records))
    {
        error!("{}: {e}", args.out.display());
        return Exit::Failure;
    }
    info!(
        "scored {} of {} images, {} records",
        outcome.scored,
        manifest.entries.len(),
        outcome.records.len()
    );
    match (outcome.scored, outcome.failures.len()) {
        (_, 0) => Exit::Ok,
        (0, _) => Exit::Failure,
        _ => Exit::Partial,
    }
}

fn read_text(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn stem_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn labels_for(paths: &[PathBuf], given: &[String]) -> Result<Vec<String>, Error> {
    if given.is_empty() {
        return Ok(paths.iter().map(|p| stem_label(p)).collect());
    }
    if given.len() != paths.len() {
        return Err(Error::Manifest(format!(
            "{} labels given for {} stats files",
            given.len(),
            paths.len()
        )));
    }
    Ok(given.to_vec())
}

pub fn cmd_aggregate(args: &AggregateArgs) -> Result<(), Error> {
    let text = read_text(&args.scores)?;
    let records = read_jsonl(&text).map_err(|(line, e)| Error::Json {
        path: format!("{}:{line}", args.scores.display()).into(),
        source: e,
    })?;
    let stats = crate::aggregate::aggregate_scores(&records);
    write_text(&args.out, &stats.to_json())?;
    info!(
        "{} groups from {} records",
        stats.groups.len(),
        records.len()
    );
    Ok(())
}

pub fn cmd_summary(args: &SummaryArgs) -> Result<(), Error> {
    let labels = labels_for(&args.stats, &args.label)?;
    let mut rows = Vec::with_capacity(labels.len());
    for (path, label) in args.stats.iter().zip(&labels) {
        let stats = CategoryStats::load(path)?;
        rows.push(dataset_summary(&stats, label, args.include_bg)?);
    }
    let mut buf = Vec::new();
    write_summary_csv(&mut buf, &rows).expect("write to memory");
    match &args.out {
        Some(out) => std::fs::write(out, &buf).map_err(|e| Error::io(out, e)),
        None => {
            print!("{}", String::from_utf8_lossy(&buf));
            Ok(())
        }
    }
}

pub fn cmd_plot(args: &PlotArgs) -> Result<(), Error> {
    let labels = labels_for(&args.stats, &args.series)?;
    let stats = args
        .stats
        .iter()
        .map(CategoryStats::load)
        .collect::<Result<Vec<_>, _>>()?;
    let series: Vec<Series<'_>> = labels
        .iter()
        .zip(&stats)
        .map(|(label, stats)| Series { label, stats })
        .collect();
    let written = render_boxplots(&series, &args.out_dir)?;
    info!(
        "wrote {} panels to {}",
        written.len(),
        args.out_dir.display()
    );
    Ok(())
}

pub fn cmd_split_lung(args: &SplitLungArgs) -> Result<(), Error> {
    let (w, h, pixels) = read_indexed_png(&args.mask)?;
    let mask = BinaryGrid::from_bits(w, h, pixels);
    let split = split_lung_mask(&mask)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let stem = stem_label(&args.mask);
    let png_path = args.out_dir.join(format!("{stem}_parts.png"));
    write_indexed_png(&png_path, w, h, &split.to_indexed())?;
    let json_path = args.out_dir.join(format!("{stem}_label_map.json"));
    let mut fragment =
        serde_json::to_string_pretty(&RegionSplit::label_map_fragment()).expect("json");
    fragment.push('\n');
    write_text(&json_path, &fragment)?;
    info!("wrote {} and {}", png_path.display(), json_path.display());
    Ok(())
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    out.with_file_name(name)
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), Error> {
    let stats = CategoryStats::load(&args.stats)?;
    let template = match &args.prompt_template {
        Some(p) => PromptTemplate::new(read_text(p)?)?,
        None => PromptTemplate::default(),
    };
    let hint = match &args.manifest {
        Some(p) => {
            let m = load_manifest(p)?;
            let mut order: Vec<String> = Vec::new();
            for e in &m.entries {
                for name in e.part_names() {
                    if !order.iter().any(|o| o == name) {
                        order.push(name.to_owned());
                    }
                }
            }
            Some(order)
        }
        None => None,
    };
    let payload = build_report_payload(&stats, args.digits, hint.as_deref())?;
    let prompt = build_prompt(&payload, &template);

    let mut payload_json = payload.to_json_pretty();
    payload_json.push('\n');
    write_text(&sibling(&args.out, ".payload.json"), &payload_json)?;
    write_text(&sibling(&args.out, ".prompt.txt"), &prompt)?;

    let Some(endpoint) = &args.llm_endpoint else {
        info!("no --llm-endpoint given; wrote payload and prompt only");
        return Ok(());
    };
    let config = LlmConfig {
        endpoint: endpoint.clone(),
        model: args.llm_model.clone(),
        token_env: args.llm_token_env.clone(),
        timeout: Duration::from_secs(args.llm_timeout),
    };
    let report = request_report(&prompt, &config)?;
    write_text(&args.out, &report)?;
    info!("report written to {}", args.out.display());
    Ok(())
}
