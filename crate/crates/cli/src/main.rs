use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use spline_compander::optimizer::DEFAULT_GRID_STEP;
use spline_compander_cli::{
    design_report, lloyd_max_report, sweep_report, table1_report, validate_report, DesignFailure,
    Format, Output, RunManifest, UsageError, X1Choice,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DESIGN: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

/// Companding quantizer design with piecewise-quadratic compressors.
#[derive(Debug, Parser)]
#[command(name = "spline-compander", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write output here instead of stdout; the manifest goes to PATH.manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design a two-segment quantizer and report its parameters and SQNR.
    Design {
        #[arg(long, default_value_t = 16)]
        levels: usize,
        /// Interior segment threshold, or "auto" to sweep for it.
        #[arg(long, default_value = "auto")]
        x1: X1Choice,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
        #[command(flatten)]
        common: Common,
    },
    /// SQNR as a function of the interior threshold.
    Sweep {
        #[arg(long, default_value_t = 16)]
        levels: usize,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Midpoint, swept and Lloyd–Max SQNR for 16 and 32 levels.
    Table1 {
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Analytic versus Monte-Carlo distortion.
    Validate {
        #[arg(long, default_value_t = 16)]
        levels: usize,
        #[arg(long, default_value = "auto")]
        x1: X1Choice,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
        #[arg(long, default_value_t = 10_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Lloyd–Max quantizer for the unit Gaussian.
    LloydMax {
        #[arg(long, default_value_t = 16)]
        levels: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn params(pairs: &[(&str, String)], common: &Common) -> BTreeMap<String, String> {
    let mut map: BTreeMap<String, String> = pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect();
    map.insert("format".into(), common.format.to_string());
    if let Some(out) = &common.out {
        map.insert("out".into(), out.display().to_string());
    }
    map
}

fn run(cli: Cli) -> Result<bool> {
    let (name, parameters, common, output) = match cli.command {
        Command::Design {
            levels,
            x1,
            grid_step,
            common,
        } => {
            let p = params(
                &[
                    ("levels", levels.to_string()),
                    ("x1", x1.to_string()),
                    ("grid-step", grid_step.to_string()),
                ],
                &common,
            );
            (
                "design",
                p,
                common,
                Output::Design(design_report(levels, x1, grid_step)?),
            )
        }
        Command::Sweep {
            levels,
            grid_step,
            common,
        } => {
            let p = params(
                &[
                    ("levels", levels.to_string()),
                    ("grid-step", grid_step.to_string()),
                ],
                &common,
            );
            (
                "sweep",
                p,
                common,
                Output::Sweep(sweep_report(levels, grid_step)?),
            )
        }
        Command::Table1 { grid_step, common } => {
            let p = params(&[("grid-step", grid_step.to_string())], &common);
            (
                "table1",
                p,
                common,
                Output::Table1(table1_report(grid_step)?),
            )
        }
        Command::Validate {
            levels,
            x1,
            grid_step,
            samples,
            seed,
            common,
        } => {
            let p = params(
                &[
                    ("levels", levels.to_string()),
                    ("x1", x1.to_string()),
                    ("grid-step", grid_step.to_string()),
                    ("samples", samples.to_string()),
                    ("seed", seed.to_string()),
                ],
                &common,
            );
            (
                "validate",
                p,
                common,
                Output::Validate(validate_report(levels, x1, grid_step, samples, seed)?),
            )
        }
        Command::LloydMax { levels, common } => {
            let p = params(&[("levels", levels.to_string())], &common);
            (
                "lloyd-max",
                p,
                common,
                Output::LloydMax(lloyd_max_report(levels)?),
            )
        }
    };

    let passed = match &output {
        Output::Validate(r) => r.passed(),
        _ => true,
    };
    let bytes = output.render(common.format)?;
    match &common.out {
        Some(path) => {
            std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?;
            let manifest = RunManifest::new(name, parameters, vec![path.display().to_string()]);
            let manifest_path = RunManifest::path_for(path);
            std::fs::write(&manifest_path, serde_json::to_vec_pretty(&manifest)?)
                .with_context(|| format!("writing {}", manifest_path.display()))?;
        }
        None => {
            std::io::stdout().write_all(&bytes)?;
            let manifest = RunManifest::new(name, parameters, vec!["-".into()]);
            eprintln!("{}", serde_json::to_string(&manifest)?);
        }
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VALIDATION),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(EXIT_USAGE)
            } else if e.is::<DesignFailure>() {
                ExitCode::from(EXIT_DESIGN)
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
    }
}
