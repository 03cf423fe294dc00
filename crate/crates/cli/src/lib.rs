//! Command-line driver for word storms.
//!
//! Three subcommands share one run-directory layout:
//!
//! * `build` lays out a corpus with one method and writes the storm, its
//!   renderings and per-cloud compactness,
//! * `eval` builds a storm per method and scores a pixel classifier on each,
//! * `inspect` re-checks a storm file and prints its metrics.
//!
//! Configuration comes from defaults, then the `--config` JSON file, then
//! flags. The resolved configuration is written to `manifest.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use wordstorm::config::RunConfig;
use wordstorm::corpus::{load_documents, StopList};
use wordstorm::eval::run_evaluation;
use wordstorm::layout::{Storm, StormFile};
use wordstorm::pipeline::{build_storm, prepare, Method};
use wordstorm::render::{compactness_csv, compose_grid, render_svg, storm_compactness};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] wordstorm::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot start thread pool: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),

    #[error("post-run checks failed: {0}")]
    ChecksFailed(String),
}

impl CliError {
    /// 2 for inputs that can never succeed as given, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use wordstorm::Error as E;
        match self {
            CliError::Core(
                E::Unlabeled(_) | E::DegenerateTraining(_) | E::InvalidConfig(_) | E::MissingGroupKey(_),
            ) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "wordstorm", version, about = "Build, evaluate and inspect coordinated word clouds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lay out a corpus and render every cloud.
    Build(BuildArgs),
    /// Compare layout methods by pixel-classifier accuracy.
    Eval(EvalArgs),
    /// Check a storm file and print its metrics.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Directory of .txt files or a JSON-lines corpus.
    #[arg(long)]
    pub input: PathBuf,
    /// Run directory; created if missing.
    #[arg(long)]
    pub output: PathBuf,
    /// JSON file with configuration keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Columns of the grid image.
    #[arg(long)]
    pub columns: Option<usize>,
    #[arg(long)]
    pub words_per_cloud: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value = "combined", value_parser = parse_method)]
    pub method: Method,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Methods to compare; repeat the flag for several.
    #[arg(long, value_parser = parse_method, default_values = ["independent", "iterative", "combined"])]
    pub method: Vec<Method>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Storm JSON written by `build`.
    #[arg(long)]
    pub input: PathBuf,
    /// Configuration supplying the raster size used for compactness.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn config_help() -> String {
    let keys = RunConfig::describe();
    let kw = keys.iter().map(|k| k.0.len()).max().unwrap_or(0);
    let vw = keys.iter().map(|k| k.1.len()).max().unwrap_or(0);
    let mut out = String::from("Configuration keys (--config JSON; flags take precedence):\n");
    for (key, default, what) in keys {
        out.push_str(&format!("  {key:<kw$}  {default:<vw$}  {what}\n"));
    }
    out
}

/// The clap command with the configuration key table appended to the help
/// of the top level and of every subcommand.
pub fn command() -> clap::Command {
    let help = config_help();
    Cli::command()
        .after_help(help.clone())
        .mut_subcommands(|sub| sub.after_help(help.clone()))
}

pub fn parse_from<I, T>(args: I) -> std::result::Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = command().try_get_matches_from(args)?;
    Cli::from_arg_matches(&matches)
}

/// Defaults, overlaid by the config file, overlaid by flags; validated.
pub fn resolve_config(run: &RunArgs) -> Result<RunConfig> {
    let mut config = match &run.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            // validated below, after the flags are applied
            serde_json::from_str::<RunConfig>(&text).map_err(|e| {
                wordstorm::Error::InvalidConfig(format!("{}: {e}", path.display()))
            })?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = run.seed {
        config.seed = seed;
    }
    if let Some(columns) = run.columns {
        config.columns = columns;
    }
    if let Some(m) = run.words_per_cloud {
        config.words_per_cloud = m;
    }
    config.validate()?;
    Ok(config)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            Ok(RunConfig::from_json(&text)?)
        }
        None => Ok(RunConfig::default()),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    methods: Vec<&'static str>,
    input: String,
    threads: Option<usize>,
    config: &'a RunConfig,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn write_manifest(dir: &Path, command: &str, methods: &[Method], run: &RunArgs, config: &RunConfig) -> Result<()> {
    let manifest = Manifest {
        command,
        methods: methods.iter().map(|m| m.name()).collect(),
        input: run.input.display().to_string(),
        threads: run.threads,
        config,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write(&dir.join("manifest.json"), text)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

fn file_stem(index: usize, doc_id: &str) -> String {
    let safe: String = doc_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{index:03}-{safe}")
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

/// Runs a parsed command, writing human-readable progress to `out`.
pub fn run(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<()> {
    let start = Instant::now();
    let result = match &cli.command {
        Command::Build(args) => pool(args.run.threads)?.install(|| cmd_build(args, out)),
        Command::Eval(args) => pool(args.run.threads)?.install(|| cmd_eval(args, out)),
        Command::Inspect(args) => pool(args.threads)?.install(|| cmd_inspect(args, out)),
    };
    let _ = writeln!(out, "wall time {:.2} s", start.elapsed().as_secs_f64());
    result
}

fn cmd_build(args: &BuildArgs, out: &mut dyn Write) -> Result<()> {
    let config = resolve_config(&args.run)?;
    let docs = load_documents(&args.run.input)?;
    let dir = &args.run.output;
    create_dir(dir)?;
    write_manifest(dir, "build", &[args.method], &args.run, &config)?;

    let spec = prepare(&docs, &StopList::default(), &config)?;
    let outcome = build_storm(&spec, args.method, &config)?;
    let storm = &outcome.storm;
    let _ = writeln!(
        out,
        "{}: {} clouds, {} words, layout {:.2} s",
        args.method,
        storm.clouds.len(),
        storm.word_count(),
        outcome.elapsed.as_secs_f64()
    );

    let file = storm.to_file();
    write(&dir.join("storm.json"), file.to_json())?;
    let svg_dir = dir.join("svg");
    create_dir(&svg_dir)?;
    for (i, cloud) in storm.clouds.iter().enumerate() {
        let path = svg_dir.join(format!("{}.svg", file_stem(i, &cloud.doc_id)));
        write(&path, render_svg(cloud, &storm.styles))?;
    }
    let dims = config.raster_dims();
    let grid_path = dir.join("grid.png");
    compose_grid(storm, config.columns, dims).write_png(&grid_path)?;
    let compact = storm_compactness(storm, dims);
    write(&dir.join("compactness.csv"), compactness_csv(storm, &compact))?;
    if let Some(report) = &outcome.iterative {
        let mut csv = String::from("round,spread\n");
        for (i, s) in report.spreads.iter().enumerate() {
            csv.push_str(&format!("{i},{s}\n"));
        }
        write(&dir.join("iterative.csv"), csv)?;
    }
    if let Some(report) = &outcome.optimizer {
        write(&dir.join("trace.csv"), report.trace_csv())?;
    }

    let mean = compact.iter().sum::<f64>() / compact.len().max(1) as f64;
    let _ = writeln!(out, "shared-word spread {:.3} px", storm.shared_spread());
    let _ = writeln!(out, "mean compactness {mean:.2} %");
    let failures = check(storm, &file, out);
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::ChecksFailed(failures.join("; ")))
    }
}

/// Prints one PASS/FAIL line per invariant and returns the failed ones.
fn check(storm: &Storm, file: &StormFile, out: &mut dyn Write) -> Vec<String> {
    let mut failed = Vec::new();
    let overlaps = storm.overlap_violations();
    match overlaps.first() {
        None => {
            let _ = writeln!(out, "overlap check: PASS");
        }
        Some(v) => {
            let _ = writeln!(
                out,
                "overlap check: FAIL ({} pairs; first `{}` / `{}` in cloud {} `{}`)",
                overlaps.len(),
                v.first,
                v.second,
                v.cloud,
                v.doc_id
            );
            failed.push("overlap".to_string());
        }
    }
    let outside = storm.containment_violations();
    match outside.first() {
        None => {
            let _ = writeln!(out, "containment check: PASS");
        }
        Some((ci, word)) => {
            let _ = writeln!(
                out,
                "containment check: FAIL ({} words; first `{word}` in cloud {ci})",
                outside.len()
            );
            failed.push("containment".to_string());
        }
    }
    let conflicts = file.attribute_conflicts();
    if conflicts.is_empty() {
        let _ = writeln!(out, "attribute check: PASS");
    } else {
        let _ = writeln!(out, "attribute check: FAIL ({})", conflicts.join(", "));
        failed.push("attributes".to_string());
    }
    failed
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let config = resolve_config(&args.run)?;
    let docs = load_documents(&args.run.input)?;
    let dir = &args.run.output;
    create_dir(dir)?;
    write_manifest(dir, "eval", &args.method, &args.run, &config)?;
    let report = run_evaluation(&docs, &StopList::default(), &args.method, &config)?;
    write(&dir.join("report.csv"), report.to_csv())?;
    let table = report.to_table();
    write(&dir.join("report.txt"), &table)?;
    write(&dir.join("timing.csv"), report.timing_csv())?;
    let _ = write!(out, "{table}");
    Ok(())
}

fn cmd_inspect(args: &InspectArgs, out: &mut dyn Write) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let text = fs::read_to_string(&args.input).map_err(io_err(&args.input))?;
    let file = StormFile::from_json(&text)?;
    let conflicts = file.attribute_conflicts();
    if !conflicts.is_empty() {
        let _ = writeln!(out, "attribute check: FAIL ({})", conflicts.join(", "));
        return Err(CliError::ChecksFailed("attributes".into()));
    }
    let storm = file.clone().into_storm()?;
    let compact = storm_compactness(&storm, config.raster_dims());
    let width = storm.clouds.iter().map(|c| c.doc_id.len()).max().unwrap_or(0).max(6);
    let _ = writeln!(out, "{:<5} {:<width$} {:>5} {:>12}", "cloud", "doc_id", "words", "compactness");
    for (i, (cloud, c)) in storm.clouds.iter().zip(&compact).enumerate() {
        let _ = writeln!(out, "{i:<5} {:<width$} {:>5} {c:>11.2}%", cloud.doc_id, cloud.words.len());
    }
    let mean = compact.iter().sum::<f64>() / compact.len().max(1) as f64;
    let _ = writeln!(out, "shared-word spread {:.3} px", storm.shared_spread());
    let _ = writeln!(out, "mean compactness {mean:.2} %");
    let failures = check(&storm, &file, out);
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::ChecksFailed(failures.join("; ")))
    }
}
