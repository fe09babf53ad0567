//! `blowup-lab <command> --manifest <file> [--out <dir>] [--jobs N] [--validate]`

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use blowup_core::lab::{self, Command, ExperimentManifest};
use clap::Parser;

/// Default output directory when neither `--out` nor the manifest sets one.
const OUT_ENV: &str = "BLOWUP_LAB_OUT";
const OUT_FALLBACK: &str = "blowup-lab-out";

#[derive(Debug, Parser)]
#[command(
    name = "blowup-lab",
    version,
    about = "Runs blow-up dichotomy experiments from JSON manifests"
)]
struct Cli {
    /// criteria, ode, pde, example4, dichotomy-sweep or kernel-verify
    #[arg(value_parser = parse_command)]
    command: Command,

    /// Experiment manifest (JSON)
    #[arg(long, required_unless_present = "defaults")]
    manifest: Option<PathBuf>,

    /// Output directory; overrides the manifest's `output_dir`
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,

    /// Check the manifest against the schema and print it resolved, without running
    #[arg(long)]
    validate: bool,

    /// Print the command's default manifest and exit
    #[arg(long, conflicts_with_all = ["manifest", "validate"])]
    defaults: bool,
}

fn parse_command(s: &str) -> Result<Command, String> {
    s.parse().map_err(|e: blowup_core::Error| e.to_string())
}

fn output_dir(cli: &Cli, manifest: &ExperimentManifest) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| manifest.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(OUT_FALLBACK))
}

fn print_json(m: &ExperimentManifest) -> Result<(), blowup_core::Error> {
    let text = serde_json::to_string_pretty(m)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn execute(cli: &Cli) -> Result<bool, blowup_core::Error> {
    if cli.defaults {
        print_json(&ExperimentManifest::new(cli.command).resolved()?)?;
        return Ok(true);
    }
    let path = cli.manifest.as_ref().expect("clap enforces --manifest");
    let mut manifest = ExperimentManifest::load(path)?;
    if manifest.command != cli.command {
        return Err(blowup_core::Error::Manifest(format!(
            "{} is a '{}' manifest, not '{}'",
            path.display(),
            manifest.command,
            cli.command
        )));
    }
    if cli.validate {
        manifest.validate()?;
        print_json(&manifest.resolved()?)?;
        eprintln!("manifest ok");
        return Ok(true);
    }
    let dir = output_dir(cli, &manifest);
    manifest.output_dir = Some(dir.clone());
    let outcome = lab::run(&manifest)?;
    let written = outcome.write(&dir)?;
    for p in &written {
        log::info!("wrote {}", p.display());
    }
    let report = &outcome.report;
    let failed: Vec<_> = report.failures().collect();
    eprintln!(
        "{}: {} of {} checks passed; outputs in {}",
        cli.command,
        report.checks.len() - failed.len(),
        report.checks.len(),
        dir.display()
    );
    for c in &failed {
        eprintln!("FAILED {}: {}", c.name, c.detail);
    }
    Ok(failed.is_empty())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
