//! Command-line front end behind the `tubelink` binary.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 invalid data,
//! 3 I/O failure. Diagnostics go to stderr; data goes to files (and the
//! evaluation table to stdout).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, PipelineConfig};
use crate::evaluation::evaluate;
use crate::io::{self, DataError};
use crate::pathing::EmptyFramePolicy;
use crate::pipeline::{self, PipelineError};
use crate::synth::{self, CorpusSpec, ScenarioSpec, SynthError};
use crate::trimming::{BackgroundScore, ForegroundScore};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "TUBELINK_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "tubelink",
    version,
    about = "Action tube fusion, linking, trimming and evaluation"
)]
pub struct Cli {
    /// Print the interchange-format schema and exit.
    #[arg(long)]
    pub schema: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Boost appearance detections with motion detections.
    Fuse {
        #[arg(long)]
        appearance: Option<PathBuf>,
        #[arg(long)]
        motion: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: Tuning,
    },
    /// Build class-specific action paths from fused detections.
    Link {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: Tuning,
    },
    /// Temporally trim action paths into scored tubes.
    Trim {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: Tuning,
    },
    /// Fuse, link and trim in one go, optionally evaluating the result.
    Pipeline {
        #[arg(long)]
        appearance: Option<PathBuf>,
        #[arg(long)]
        motion: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        opts: Tuning,
    },
    /// Score tubes against ground truth.
    Eval {
        #[arg(long)]
        tubes: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Machine-readable report (JSON). The table is printed to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Per-class precision/recall points, one JSON record per class and threshold.
        #[arg(long)]
        pr_dump: Option<PathBuf>,
        #[command(flatten)]
        opts: Tuning,
    },
    /// Generate a synthetic corpus from a scenario spec (TOML or JSON).
    Synth {
        #[arg(long)]
        spec: PathBuf,
        /// Writes PREFIX.appearance.jsonl, PREFIX.motion.jsonl and PREFIX.gt.jsonl.
        #[arg(long)]
        out_prefix: PathBuf,
    },
}

/// Parameters shared by all processing subcommands. Each one overrides the
/// matching key of the `--config` file.
#[derive(Debug, Default, Args)]
pub struct Tuning {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: config file, then $TUBELINK_WORKERS, then 1).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Comma-separated class names, in id order.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lambda_o: Option<f64>,
    #[arg(long)]
    pub max_paths: Option<usize>,
    /// stop | skip-class
    #[arg(long, value_parser = parse_policy)]
    pub empty_frame_policy: Option<EmptyFramePolicy>,
    #[arg(long)]
    pub score_floor: Option<f64>,
    #[arg(long)]
    pub lambda_l: Option<f64>,
    #[arg(long)]
    pub alpha_default: Option<f64>,
    /// Per-class Potts penalty, CLASS=VALUE with a class name or id. Repeatable.
    #[arg(long, value_parser = parse_alpha)]
    pub alpha: Vec<(String, f64)>,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// complement | constant:VALUE
    #[arg(long, value_parser = parse_background)]
    pub background_score: Option<BackgroundScore>,
    /// augmented | raw
    #[arg(long, value_parser = parse_foreground)]
    pub foreground_score: Option<ForegroundScore>,
    /// Comma-separated overlap thresholds.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
}

fn parse_policy(s: &str) -> Result<EmptyFramePolicy, String> {
    match s {
        "stop" => Ok(EmptyFramePolicy::Stop),
        "skip-class" => Ok(EmptyFramePolicy::SkipClass),
        _ => Err(format!("expected stop or skip-class, got {s:?}")),
    }
}

fn parse_alpha(s: &str) -> Result<(String, f64), String> {
    let (class, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected CLASS=VALUE, got {s:?}"))?;
    let value = value
        .parse()
        .map_err(|e| format!("bad alpha value {value:?}: {e}"))?;
    Ok((class.to_owned(), value))
}

fn parse_background(s: &str) -> Result<BackgroundScore, String> {
    if s == "complement" {
        return Ok(BackgroundScore::Complement);
    }
    s.strip_prefix("constant:")
        .and_then(|v| v.parse().ok())
        .map(BackgroundScore::Constant)
        .ok_or_else(|| format!("expected complement or constant:VALUE, got {s:?}"))
}

fn parse_foreground(s: &str) -> Result<ForegroundScore, String> {
    match s {
        "augmented" => Ok(ForegroundScore::Augmented),
        "raw" => Ok(ForegroundScore::Raw),
        _ => Err(format!("expected augmented or raw, got {s:?}")),
    }
}

impl Tuning {
    /// Config file (or defaults) with every given flag applied on top.
    pub fn config(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(w) = self.workers {
            cfg.workers = Some(w);
        } else if cfg.workers.is_none() {
            if let Some(v) = std::env::var_os(WORKERS_ENV) {
                let w = v.to_string_lossy().parse().map_err(|_| {
                    CliError::Usage(format!("{WORKERS_ENV} must be a positive integer"))
                })?;
                cfg.workers = Some(w);
            }
        }
        if let Some(c) = &self.classes {
            cfg.classes = Some(c.clone());
        }
        if let Some(v) = self.tau {
            cfg.fusion.tau = v;
        }
        if let Some(v) = self.lambda_o {
            cfg.pathing.lambda_o = v;
        }
        if let Some(v) = self.max_paths {
            cfg.pathing.max_paths_per_class = v;
        }
        if let Some(v) = self.empty_frame_policy {
            cfg.pathing.empty_frame_policy = v;
        }
        if let Some(v) = self.score_floor {
            cfg.pathing.score_floor = Some(v);
        }
        if let Some(v) = self.lambda_l {
            cfg.trimming.lambda_l = v;
        }
        if let Some(v) = self.alpha_default {
            cfg.trimming.alpha_default = v;
        }
        for (class, value) in &self.alpha {
            cfg.trimming.alpha.insert(class.clone(), *value);
        }
        if let Some(v) = self.top_k {
            cfg.trimming.top_k = v;
        }
        if let Some(v) = self.background_score {
            cfg.trimming.background_score = v;
        }
        if let Some(v) = self.foreground_score {
            cfg.trimming.foreground_score = v;
        }
        if let Some(v) = &self.deltas {
            cfg.evaluation.deltas = v.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Read { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn required(
    value: Option<PathBuf>,
    file_value: &Option<PathBuf>,
    flag: &str,
) -> Result<PathBuf, CliError> {
    value.or_else(|| file_value.clone()).ok_or_else(|| {
        CliError::Usage(format!(
            "missing --{flag} (or io.{flag} in the config file)"
        ))
    })
}

/// Parses `argv` (including the program name) and runs it.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    if cli.schema {
        println!("{}", io::SCHEMA.trim_end());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Usage("no subcommand given; see --help".into()));
    };
    match command {
        Command::Fuse {
            appearance,
            motion,
            out,
            opts,
        } => {
            let cfg = opts.config()?;
            let r = cfg.resolve()?;
            let appearance = required(appearance, &cfg.io.appearance, "appearance")?;
            let motion = required(motion, &cfg.io.motion, "motion")?;
            let out = required(out, &cfg.io.out, "out")?;
            let a = io::load_detections(&appearance, None)?;
            let m = io::load_detections(&motion, a.iter().find_map(|v| v.num_classes()))?;
            let fused = pipeline::fuse_corpus(&a, &m, &r.fusion, r.workers)?;
            io::save_detections(&out, &fused)?;
            eprintln!("fused {} videos -> {}", fused.len(), out.display());
        }
        Command::Link { input, out, opts } => {
            let r = opts.config()?.resolve()?;
            let fused = io::load_detections(&input, None)?;
            let paths = pipeline::link_corpus(&fused, &r.pathing, r.workers)?;
            io::save_paths(&out, &paths)?;
            eprintln!("linked {} paths -> {}", paths.len(), out.display());
        }
        Command::Trim { input, out, opts } => {
            let r = opts.config()?.resolve()?;
            let paths = io::load_paths(&input)?;
            let tubes = pipeline::trim_corpus(&paths, &r.trimming, r.workers)?;
            io::save_tubes(&out, &tubes)?;
            eprintln!("trimmed {} tubes -> {}", tubes.len(), out.display());
        }
        Command::Pipeline {
            appearance,
            motion,
            out,
            gt,
            report,
            opts,
        } => {
            let cfg = opts.config()?;
            let r = cfg.resolve()?;
            let appearance = required(appearance, &cfg.io.appearance, "appearance")?;
            let motion = required(motion, &cfg.io.motion, "motion")?;
            let out = required(out, &cfg.io.out, "out")?;
            let a = io::load_detections(&appearance, None)?;
            let m = io::load_detections(&motion, a.iter().find_map(|v| v.num_classes()))?;
            let tubes =
                pipeline::run_corpus(&a, &m, &r.fusion, &r.pathing, &r.trimming, r.workers)?;
            io::save_tubes(&out, &tubes)?;
            eprintln!(
                "built {} tubes from {} videos -> {}",
                tubes.len(),
                a.len(),
                out.display()
            );
            if let Some(gt) = gt.or(cfg.io.gt.clone()) {
                let ground_truth = io::load_ground_truth(&gt)?;
                let rep = evaluate(&tubes, &ground_truth, &r.evaluation, r.catalog.as_ref())
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                print!("{}", rep.render_table());
                if let Some(path) = report.or(cfg.io.report.clone()) {
                    write_json(&path, &rep)?;
                }
            }
        }
        Command::Eval {
            tubes,
            gt,
            report,
            pr_dump,
            opts,
        } => {
            let r = opts.config()?.resolve()?;
            let predictions = io::load_tubes(&tubes)?;
            let ground_truth = io::load_ground_truth(&gt)?;
            let rep = evaluate(
                &predictions,
                &ground_truth,
                &r.evaluation,
                r.catalog.as_ref(),
            )
            .map_err(|e| CliError::Usage(e.to_string()))?;
            print!("{}", rep.render_table());
            if let Some(path) = report {
                write_json(&path, &rep)?;
            }
            if let Some(path) = pr_dump {
                io::write_atomic(&path, |w| {
                    for curve in &rep.pr_curves {
                        serde_json::to_writer(&mut *w, curve)
                            .map_err(|e| io_error(&path, e.into()))?;
                        w.write_all(b"\n").map_err(|e| io_error(&path, e))?;
                    }
                    Ok(())
                })?;
            }
        }
        Command::Synth { spec, out_prefix } => {
            let specs = load_specs(&spec)?;
            let mut appearance = Vec::new();
            let mut motion = Vec::new();
            let mut gt = Vec::new();
            for s in &specs {
                let scenario = synth::generate(s)?;
                appearance.push(scenario.appearance);
                motion.push(scenario.motion);
                gt.extend(scenario.ground_truth);
            }
            let with_suffix = |suffix: &str| {
                let mut name = out_prefix.clone().into_os_string();
                name.push(suffix);
                PathBuf::from(name)
            };
            io::save_detections(&with_suffix(".appearance.jsonl"), &appearance)?;
            io::save_detections(&with_suffix(".motion.jsonl"), &motion)?;
            io::save_ground_truth(&with_suffix(".gt.jsonl"), &gt)?;
            eprintln!("generated {} videos", specs.len());
        }
    }
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.to_owned(),
        source,
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    io::write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| io_error(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| io_error(path, e))
    })?;
    Ok(())
}

/// A spec file holds either one scenario or a `videos` list of them.
fn load_specs(path: &Path) -> Result<Vec<ScenarioSpec>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let bad = |e: String| CliError::Usage(format!("{}: {e}", path.display()));
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        if let Ok(c) = serde_json::from_str::<CorpusSpec>(&text) {
            return Ok(c.videos);
        }
        serde_json::from_str::<ScenarioSpec>(&text)
            .map(|s| vec![s])
            .map_err(|e| bad(e.to_string()))
    } else {
        if let Ok(c) = toml::from_str::<CorpusSpec>(&text) {
            return Ok(c.videos);
        }
        toml::from_str::<ScenarioSpec>(&text)
            .map(|s| vec![s])
            .map_err(|e| bad(e.to_string()))
    }
}
