//! `nucspin` batch front-end: runs protocol simulations, Monte Carlo studies
//! and fits from TOML configs and writes CSV/JSON plot data.

mod config;
mod run;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use config::*;
use run::Payload;

pub const OUT_DIR_ENV: &str = "NUCSPIN_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] nucspin::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_validation() && !matches!(e, nucspin::Error::Io(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nucspin", version, about = "Electron-nuclear spin simulations, Monte Carlo studies and fits")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run config; only runs of the chosen experiment are executed.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    trials: Option<usize>,
    /// Output file, or directory when several runs are written.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for trial parallelism; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Validate and print the resolved plan without computing.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transition frequencies of the coupled pair.
    Spectrum,
    /// NMR frequency × duration map.
    Chevron,
    /// NMR Rabi oscillation.
    Rabi,
    /// Detuned nuclear Ramsey fringe.
    Ramsey,
    /// Nuclear Hahn echo.
    Hahn,
    /// Bell-state tomography.
    Bell,
    /// Per-mechanism Bell fidelity reduction.
    ErrorBudget,
    /// Shuttling experiments.
    Shuttle {
        #[arg(long, value_parser = ["phase", "repeated", "electron"])]
        variant: Option<String>,
    },
    /// Repetitive nuclear readout fidelity model.
    ReadoutFidelity {
        /// Scan M over an inclusive range, e.g. 1..50.
        #[arg(long, value_name = "A..B")]
        scan_m: Option<String>,
        /// Evaluate the model at this M.
        #[arg(long, value_name = "M")]
        shots: Option<u32>,
    },
    /// Lattice Monte Carlo of hyperfine couplings.
    HyperfineMc {
        #[arg(long, value_parser = ["count", "curves", "max_coupling"])]
        mode: Option<String>,
    },
    /// Van Vleck second moment of the gate ²⁷Al bath versus standoff.
    Vanvleck,
    /// Fit a model to a CSV produced by the other subcommands.
    Fit {
        #[arg(value_enum)]
        model: Option<FitModel>,
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "NAME")]
        x_column: Option<String>,
        #[arg(long, value_name = "NAME")]
        y_column: Option<String>,
    },
    /// Run a bundled figure config.
    Reproduce {
        /// Figure id (2e, 2f, 2g-j, 3c-e, 4b, 4d, 4f, ext1, s1, s2, m-opt).
        #[arg(required_unless_present = "list")]
        figure: Option<String>,
        /// List the bundled configs.
        #[arg(long)]
        list: bool,
    },
}

fn parse_enum<T: serde::de::DeserializeOwned>(kind: &str, v: &str) -> Result<T, CliError> {
    toml::Value::String(v.to_string())
        .try_into()
        .map_err(|e| CliError::invalid(format!("{kind}: {e}")))
}

impl Command {
    fn experiment(&self) -> Option<Experiment> {
        Some(match self {
            Command::Spectrum => Experiment::Spectrum,
            Command::Chevron => Experiment::Chevron,
            Command::Rabi => Experiment::Rabi,
            Command::Ramsey => Experiment::Ramsey,
            Command::Hahn => Experiment::Hahn,
            Command::Bell => Experiment::Bell,
            Command::ErrorBudget => Experiment::ErrorBudget,
            Command::Shuttle { .. } => Experiment::Shuttle,
            Command::ReadoutFidelity { .. } => Experiment::ReadoutFidelity,
            Command::HyperfineMc { .. } => Experiment::HyperfineMc,
            Command::Vanvleck => Experiment::Vanvleck,
            Command::Fit { .. } => Experiment::Fit,
            Command::Reproduce { .. } => return None,
        })
    }

    /// Applies subcommand flags to a run's job section.
    fn apply(&self, run: &mut RunSpec) -> Result<(), CliError> {
        match self {
            Command::Shuttle { variant: Some(v) } => run.shuttle.as_mut().unwrap().variant = parse_enum("variant", v)?,
            Command::ReadoutFidelity { scan_m, shots } => {
                let j = run.readout.as_mut().unwrap();
                if let Some(r) = scan_m {
                    j.scan_m = Some(r.clone());
                }
                if let Some(m) = shots {
                    j.model.m_shots = *m;
                }
            }
            Command::HyperfineMc { mode: Some(m) } => run.hyperfine.as_mut().unwrap().mode = parse_enum("mode", m)?,
            Command::Fit { model, input, x_column, y_column } => {
                let j = run.fit.as_mut().unwrap();
                if model.is_some() {
                    j.model = *model;
                }
                if let Some(p) = input {
                    j.input = Some(p.clone());
                    j.synthetic_esr = None;
                    j.synthetic_intervals = None;
                }
                if x_column.is_some() {
                    j.x_column = x_column.clone();
                }
                if y_column.is_some() {
                    j.y_column = y_column.clone();
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    figure: Option<&'a str>,
    run: &'a str,
    experiment: &'static str,
    seed: u64,
    trials: usize,
    config_sha256: String,
}

#[derive(Debug, Serialize)]
struct Envelope<'a, T: Serialize> {
    provenance: &'a Provenance<'a>,
    result: &'a T,
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn provenance<'a>(run: &'a ResolvedRun, figure: Option<&'a str>) -> Result<Provenance<'a>, CliError> {
    Ok(Provenance {
        tool: "nucspin",
        version: env!("CARGO_PKG_VERSION"),
        figure,
        run: &run.spec.name,
        experiment: run.spec.experiment.name(),
        seed: run.seed,
        trials: run.trials,
        config_sha256: sha256_hex(run.canonical()?.as_bytes()),
    })
}

fn enveloped<T: Serialize>(prov: &Provenance, result: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(&Envelope { provenance: prov, result }).map_err(nucspin::Error::from)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn render(run: &ResolvedRun, payload: &Payload, figure: Option<&str>) -> Result<Vec<u8>, CliError> {
    let prov = provenance(run, figure)?;
    match (payload, run.format) {
        (Payload::Sweep(r), Format::Csv) => {
            let mut out = Vec::new();
            r.write_csv(&mut out)?;
            Ok(out)
        }
        (Payload::Sweep(r), Format::Json) => enveloped(&prov, r),
        (Payload::Table { csv, .. }, Format::Csv) => Ok(csv.clone()),
        (Payload::Table { json, .. }, Format::Json) => enveloped(&prov, json),
    }
}

enum Destination {
    Stdout,
    File(PathBuf),
    Dir(PathBuf),
}

impl Destination {
    fn file_for(&self, run: &ResolvedRun) -> Option<PathBuf> {
        let name = format!("{}.{}", run.spec.name, run.format.extension());
        match self {
            Destination::Stdout => None,
            Destination::File(p) => Some(p.clone()),
            Destination::Dir(d) => Some(d.join(name)),
        }
    }
}

fn destination(common: &Common, figure: Option<&str>, runs: usize) -> Destination {
    let env_dir = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    match (&common.out, figure, runs) {
        (Some(p), None, 1) => Destination::File(p.clone()),
        (Some(p), _, _) => Destination::Dir(p.clone()),
        (None, Some(f), _) => Destination::Dir(env_dir.unwrap_or_else(|| PathBuf::from(".")).join(format!("fig{f}"))),
        (None, None, 1) => env_dir.map(Destination::Dir).unwrap_or(Destination::Stdout),
        (None, None, _) => Destination::Dir(env_dir.unwrap_or_else(|| PathBuf::from("."))),
    }
}

#[derive(Debug, Serialize)]
struct PlanEntry<'a> {
    run: &'a str,
    experiment: &'static str,
    seed: u64,
    trials: usize,
    format: Format,
    output: String,
    config_sha256: String,
    resolved: &'a ResolvedRun,
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    run: String,
    file: String,
    sha256: String,
    config_sha256: String,
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    let c = &cli.common;
    if let Command::Reproduce { list: true, .. } = cli.command {
        for (id, text) in FIGURES {
            let cfg = RunConfig::parse(text, id)?;
            println!("{id:6} {}", cfg.description);
        }
        return Ok(());
    }
    if let Some(n) = c.threads {
        if n < 1 {
            return Err(CliError::invalid("threads must be ≥ 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::invalid(format!("thread pool: {e}")))?;
    }

    let (cfg, base_dir, figure) = match (&cli.command, &c.config) {
        (Command::Reproduce { figure: Some(f), .. }, None) => {
            let cfg = config::figure(f)?;
            let id = cfg.figure.clone().unwrap_or_else(|| f.clone());
            (cfg, PathBuf::from("."), Some(id))
        }
        (Command::Reproduce { .. }, Some(_)) => {
            return Err(CliError::invalid("reproduce uses a bundled config; run the matching subcommand with --config instead"))
        }
        (cmd, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
            let cfg = RunConfig::parse(&text, &path.display().to_string())?.only(cmd.experiment().unwrap())?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
            (cfg, base, None)
        }
        (cmd, None) => {
            let e = cmd.experiment().unwrap();
            (RunConfig::single(RunSpec::new(e.name(), e)), PathBuf::from("."), None)
        }
    };
    let mut cfg = cfg;
    for r in cfg.runs.iter_mut() {
        let filled = std::mem::replace(r, RunSpec::new("", Experiment::Spectrum)).with_default_section();
        *r = filled;
        cli.command.apply(r)?;
    }
    let overrides = Overrides { seed: c.seed, trials: c.trials, format: c.format };
    let runs = cfg.resolve(&overrides)?;
    let dest = destination(c, figure.as_deref(), runs.len());
    let fig = figure.as_deref();

    if c.dry_run {
        let plan = runs
            .iter()
            .map(|r| {
                Ok(PlanEntry {
                    run: &r.spec.name,
                    experiment: r.spec.experiment.name(),
                    seed: r.seed,
                    trials: r.trials,
                    format: r.format,
                    output: dest.file_for(r).map(|p| p.display().to_string()).unwrap_or_else(|| "<stdout>".into()),
                    config_sha256: sha256_hex(r.canonical()?.as_bytes()),
                    resolved: r,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let text = serde_json::to_string_pretty(&plan).map_err(nucspin::Error::from)?;
        println!("{text}");
        return Ok(());
    }

    if let Destination::Dir(d) = &dest {
        std::fs::create_dir_all(d)?;
    }
    let mut manifest = Vec::new();
    for r in &runs {
        let payload = run::execute(r, &base_dir)?;
        let bytes = render(r, &payload, fig)?;
        match dest.file_for(r) {
            None => std::io::stdout().write_all(&bytes)?,
            Some(path) => {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent)?;
                }
                std::fs::write(&path, &bytes)?;
                eprintln!("wrote {}", path.display());
                manifest.push(ManifestEntry {
                    run: r.spec.name.clone(),
                    file: path.file_name().unwrap().to_string_lossy().into_owned(),
                    sha256: sha256_hex(&bytes),
                    config_sha256: sha256_hex(r.canonical()?.as_bytes()),
                });
            }
        }
    }
    if let (Destination::Dir(d), Some(f)) = (&dest, fig) {
        let m = serde_json::json!({
            "tool": "nucspin",
            "version": env!("CARGO_PKG_VERSION"),
            "figure": f,
            "description": cfg.description,
            "outputs": manifest,
        });
        let text = serde_json::to_string_pretty(&m).map_err(nucspin::Error::from)? + "\n";
        std::fs::write(d.join("manifest.json"), text)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
