//! Experiment runner: sweeps a preset's parameter, averages rate-energy
//! results over channel realizations and writes a CSV plus a JSON manifest.

mod config;
mod output;
mod presets;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;
use rayon::prelude::*;

use config::{CsitLevel, ExperimentSpec, Mode, Preset};
use output::{aggregate, Manifest, PointManifest, COLUMNS};
use presets::{realization_seed, run_task};

#[derive(Debug, Parser)]
#[command(
    name = "irs-swipt",
    version,
    about = "Rate-energy experiments for IRS-aided multi-carrier SWIPT"
)]
struct Cli {
    /// Experiment to run; overrides the config file.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// JSON experiment description (dB units).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Channel realizations per parameter value.
    #[arg(long)]
    realizations: Option<usize>,
    /// Base seed; realization i uses a seed derived from (seed, i).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Points per rate-energy region.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Codebook resolutions for the quantization preset, e.g. 1,2,4.
    #[arg(long, value_delimiter = ',')]
    quant_bits: Option<Vec<u32>>,
    /// Relative CSIT error levels, e.g. 0,0.2,none.
    #[arg(long, value_delimiter = ',')]
    csit_error: Option<Vec<CsitLevel>>,
    /// Swept parameter values; the preset's defaults otherwise.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    values: Option<Vec<f64>>,
}

fn resolve(cli: Cli) -> Result<(ExperimentSpec, PathBuf)> {
    let mut spec = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(p) = cli.preset {
        spec.preset = p;
    }
    if let Some(r) = cli.realizations {
        spec.realizations = r;
    }
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    if let Some(g) = cli.grid {
        spec.grid = g;
    }
    if let Some(m) = cli.mode {
        spec.mode = m;
    }
    if let Some(b) = cli.quant_bits {
        spec.quant_bits = b;
    }
    if let Some(e) = cli.csit_error {
        spec.csit_error = e;
    }
    if let Some(v) = cli.values {
        spec.values = Some(v);
    }
    spec.validate()?;
    Ok((spec, cli.out))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (spec, out) = resolve(Cli::parse())?;
    let values = spec.values();
    let scenarios = (0..values.len())
        .map(|p| spec.point_scenario(p))
        .collect::<Result<Vec<_>>>()?;
    log::info!(
        "{}: {} values x {} realizations",
        spec.preset,
        values.len(),
        spec.realizations
    );

    let tasks: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|p| (0..spec.realizations).map(move |r| (p, r)))
        .collect();
    let results = tasks
        .par_iter()
        .map(|&(p, r)| {
            let samples = run_task(&spec, &scenarios[p], r).with_context(|| {
                format!(
                    "{} = {}, realization {r}",
                    spec.preset.parameter(),
                    values[p]
                )
            })?;
            log::debug!(
                "finished {} = {}, realization {r}",
                spec.preset.parameter(),
                values[p]
            );
            Ok(samples)
        })
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<_> = results
        .chunks(spec.realizations)
        .zip(&values)
        .flat_map(|(runs, &v)| aggregate(&spec, v, runs))
        .collect();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        spec: &spec,
        points: values
            .iter()
            .zip(scenarios)
            .map(|(&value, scenario)| PointManifest { value, scenario })
            .collect(),
        realization_seeds: (0..spec.realizations)
            .map(|r| realization_seed(&spec, r))
            .collect(),
        csv: format!("{}.csv", spec.preset),
        columns: COLUMNS.to_vec(),
    };
    let files = output::write(&out, &rows, &manifest)?;
    log::info!(
        "wrote {} and {}",
        files.csv.display(),
        files.manifest.display()
    );
    Ok(())
}
