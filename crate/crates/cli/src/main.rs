//! `parkseg` command-line tool.
//!
//! Exit codes: 0 success, 1 processing failure, 2 bad invocation.

mod commands;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use parkseg::augment::AugmentSpec;
use parkseg::errmask::ErrorMode;
use parkseg::maskcore::Palette;
use parkseg::synthscene::GenParams;

use commands::Outcome;

/// Seed used whenever `--seed` is not given.
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "parkseg", version, about = "Parked-car post-processing and evaluation for aerial segmentation masks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Palette JSON; defaults to the built-in four-class palette.
    #[arg(long, global = true)]
    palette: Option<PathBuf>,
    /// Maximum Euclidean RGB distance when snapping mask colors to the palette.
    #[arg(long, global = true, default_value_t = 0)]
    tolerance: u32,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Relabel parked cars in each input mask and write per-component verdicts.
    DetectParked {
        /// Mask files or directories of masks.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 15)]
        kernel: u32,
    },
    /// Score predicted masks against ground truth, pairing files by stem.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write white/red/green/black error images for each gt/pred pair.
    Errmask {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `all-foreground` or `class:NAME`.
        #[arg(long, default_value = "all-foreground")]
        mode: String,
    },
    /// Write augmented image/mask pairs with a provenance record.
    Augment {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Augmentations per input pair.
        #[arg(long, default_value_t = 4)]
        count: u32,
        /// Augmentation config JSON; defaults to the built-in pipeline.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate, render and score seeded synthetic scenes.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Number of scenes; seeds run from `--seed` upwards.
        #[arg(long, default_value_t = 100)]
        count: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 15)]
        kernel: u32,
        #[arg(long, default_value_t = 7)]
        margin: u32,
        #[arg(long, default_value_t = 160)]
        width: u32,
        #[arg(long, default_value_t = 120)]
        height: u32,
        #[arg(long, default_value_t = 2)]
        roads: u32,
        #[arg(long, default_value_t = 8)]
        cars: u32,
        #[arg(long, default_value_t = 0.5)]
        parked_fraction: f64,
    },
    /// Check a dataset manifest for split leakage, missing files and bad masks.
    Validate {
        manifest: PathBuf,
        /// Directory relative paths resolve against; defaults to the manifest's directory.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long, default_value = ",")]
        delimiter: char,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Problems with the invocation itself, reported with exit code 2.
struct Usage(anyhow::Error);

fn usage<T>(r: Result<T>) -> Result<T, Usage> {
    r.map_err(Usage)
}

fn check_kernel(k: u32) -> Result<()> {
    if k == 0 || k.is_multiple_of(2) {
        bail!("--kernel must be a positive odd number, got {k}");
    }
    Ok(())
}

fn check_exists(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.exists() {
            bail!("{}: no such file or directory", p.display());
        }
    }
    Ok(())
}

fn parse_mode(s: &str, palette: &Palette) -> Result<ErrorMode> {
    if s == "all-foreground" {
        return Ok(ErrorMode::AllForeground);
    }
    let Some(name) = s.strip_prefix("class:") else {
        bail!("--mode must be all-foreground or class:NAME, got {s:?}");
    };
    let entry = palette.by_name(name).with_context(|| format!("--mode: palette has no class named {name:?}"))?;
    Ok(ErrorMode::SingleClass(entry.id))
}

fn run(cli: Cli) -> Result<Result<Outcome>, Usage> {
    let palette = match &cli.common.palette {
        Some(p) => usage(Palette::load(p).with_context(|| format!("loading palette {}", p.display())))?,
        None => Palette::default_four_class(),
    };
    let tol = cli.common.tolerance;
    Ok(match cli.command {
        Command::DetectParked { inputs, out, kernel } => {
            usage(check_kernel(kernel))?;
            usage(check_exists(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>()))?;
            commands::detect_parked_cmd(&inputs, &out, &palette, kernel, tol)
        }
        Command::Eval { gt, pred, out } => {
            usage(check_exists(&[&gt, &pred]))?;
            commands::eval_cmd(&gt, &pred, &out, &palette, tol)
        }
        Command::Errmask { gt, pred, out, mode } => {
            usage(check_exists(&[&gt, &pred]))?;
            let mode = usage(parse_mode(&mode, &palette))?;
            commands::errmask_cmd(&gt, &pred, &out, &palette, tol, mode)
        }
        Command::Augment { images, masks, out, count, config, seed } => {
            usage(check_exists(&[&images, &masks]))?;
            let mut spec = match config {
                Some(p) => usage(
                    std::fs::read_to_string(&p)
                        .map_err(anyhow::Error::from)
                        .and_then(|t| Ok(serde_json::from_str::<AugmentSpec>(&t)?))
                        .with_context(|| format!("loading augmentation config {}", p.display())),
                )?,
                None => AugmentSpec { seed: DEFAULT_SEED, ..AugmentSpec::default() },
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            usage(spec.validate().map_err(anyhow::Error::from))?;
            commands::augment_cmd(
                commands::AugmentArgs { images: &images, masks: &masks, out: &out, spec, count },
                &palette,
                tol,
            )
        }
        Command::Synth { out, count, seed, kernel, margin, width, height, roads, cars, parked_fraction } => {
            usage(check_kernel(kernel))?;
            let params = GenParams { seed, width, height, n_roads: roads, n_cars: cars, parked_fraction, margin };
            commands::synth_cmd(params, count, kernel, &out, &palette)
        }
        Command::Validate { manifest, base, delimiter, out } => {
            usage(check_exists(&[&manifest]))?;
            if !delimiter.is_ascii() {
                return Err(Usage(anyhow::anyhow!("--delimiter must be a single ASCII character")));
            }
            commands::validate_cmd(&manifest, base.as_deref(), delimiter as u8, out.as_deref(), &palette, tol)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.common.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --jobs: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Err(Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Ok(Ok(Outcome::Failed)) => ExitCode::from(1),
        Ok(Ok(Outcome::Ok)) => ExitCode::SUCCESS,
    }
}
