//! `fraclab` — sweeps the crate's fractional-Sobolev quantities from JSON run
//! configurations into reproducible CSV/JSON tables. Exit code 0 means every
//! gated inequality held, 1 means some gate failed, 2 means the run never
//! started (bad flags, bad config, or a compute error).

mod config;
mod emit;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::emit::RunMeta;
use crate::run::Rendered;

#[derive(Parser)]
#[command(name = "fraclab", version, about = "Grid laboratory for fractional Sobolev inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Poincaré-constant comparison table over a (domain, s, p) grid.
    Constants(RunArgs),
    /// Cracked-family sweep separating the two Poincaré constants.
    Counterexample(RunArgs),
    /// K(t) profile of one function over a geometric t-grid.
    Kprofile(RunArgs),
    /// One capacity evaluation, or the flat-crack thickness sweep (JSON out).
    Capacity(RunArgs),
    /// Weighted-Hardy margins for sharpening power cutoffs.
    Hardy(RunArgs),
    /// Polygon scaled-distance margins and cone eccentricities.
    Geometry(RunArgs),
    /// Diagnostic s-limit table; reported, not gated (always exits 0).
    Slimits(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread count; library default when omitted.
    #[arg(long)]
    threads: Option<usize>,
    /// Run seed; recorded in the output and driving every random family.
    #[arg(long)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("fraclab: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: &Command) -> Result<bool> {
    let (name, args): (&'static str, &RunArgs) = match command {
        Command::Constants(a) => ("constants", a),
        Command::Counterexample(a) => ("counterexample", a),
        Command::Kprofile(a) => ("kprofile", a),
        Command::Capacity(a) => ("capacity", a),
        Command::Hardy(a) => ("hardy", a),
        Command::Geometry(a) => ("geometry", a),
        Command::Slimits(a) => ("slimits", a),
    };
    let raw = std::fs::read(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    if let Some(n) = args.threads {
        ensure!(n >= 1, "--threads must be at least 1");
        // Ignore the error from a pool that already exists (tests call
        // dispatch more than once per process); the first size wins.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let threads = args.threads.unwrap_or(0);
    let rendered = match name {
        "constants" => {
            let (cfg, mut meta) = load::<config::ConstantsConfig>(name, &raw, args, threads)?;
            cfg.validate()?;
            run::cmd_constants(&cfg, &mut meta)?
        }
        "counterexample" => {
            let (cfg, mut meta) = load::<config::CounterexampleConfig>(name, &raw, args, threads)?;
            cfg.validate()?;
            run::cmd_counterexample(&cfg, &mut meta)?
        }
        "kprofile" => {
            let (cfg, mut meta) = load::<config::KProfileConfig>(name, &raw, args, threads)?;
            cfg.validate()?;
            run::cmd_kprofile(&cfg, &mut meta)?
        }
        "capacity" => {
            let (cfg, mut meta) = load::<config::CapacityConfig>(name, &raw, args, threads)?;
            cfg.validate()?;
            run::cmd_capacity(&cfg, &mut meta)?
        }
        "hardy" => {
            let (cfg, mut meta) = load::<config::HardyConfig>(name, &raw, args, threads)?;
            cfg.validate()?;
            run::cmd_hardy(&cfg, &mut meta)?
        }
        "geometry" => {
            let (cfg, mut meta) = load::<config::GeometryConfig>(name, &raw, args, threads)?;
            cfg.validate()?;
            run::cmd_geometry(&cfg, &mut meta)?
        }
        "slimits" => {
            let (cfg, mut meta) = load::<config::SLimitsConfig>(name, &raw, args, threads)?;
            cfg.validate()?;
            run::cmd_slimits(&cfg, &mut meta)?
        }
        _ => unreachable!(),
    };
    write_artifacts(args, rendered)
}

fn load<T: DeserializeOwned + Serialize>(
    name: &'static str,
    raw: &[u8],
    args: &RunArgs,
    threads: usize,
) -> Result<(T, RunMeta)> {
    let mut de = serde_json::Deserializer::from_slice(raw);
    let cfg = T::deserialize(&mut de).context("invalid config")?;
    de.end().context("trailing data after the config object")?;
    let canonical = serde_json::to_string(&cfg)?;
    let meta = RunMeta::new(name, canonical, raw, args.seed, threads);
    Ok((cfg, meta))
}

fn write_artifacts(args: &RunArgs, rendered: Rendered) -> Result<bool> {
    for (path, content) in &rendered.side_files {
        std::fs::write(path, content).with_context(|| format!("writing {path}"))?;
    }
    match &args.out {
        Some(path) => std::fs::write(path, &rendered.content)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", rendered.content),
    }
    Ok(rendered.pass)
}
