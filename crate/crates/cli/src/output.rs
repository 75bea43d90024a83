//! Averaging over realizations, CSV rows and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use swipt::scenario::Scenario;

use crate::config::ExperimentSpec;
use crate::presets::Sample;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.96;

/// One averaged point. Column order is the CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub preset: String,
    pub param: String,
    pub value: f64,
    pub scheme: String,
    pub mode: String,
    pub point: usize,
    pub rate_per_subband: f64,
    pub z: f64,
    pub n_realizations: usize,
    /// Half-width of the 95% confidence interval of z.
    pub ci95: f64,
    pub ci95_rate: f64,
    /// 10·log10 of the averaged mean per-subband SNR (WIT rows only).
    pub wit_snr_db: Option<f64>,
    /// 20·log10 of the averaged z (WPT rows only).
    pub wpt_dc_dba: Option<f64>,
}

fn mean_ci(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Z95 * (var / n).sqrt())
}

/// Averages the samples of one parameter point, keeping the order in which
/// (scheme, mode, point) keys first appear.
pub fn aggregate(spec: &ExperimentSpec, value: f64, realizations: &[Vec<Sample>]) -> Vec<Row> {
    let mut keys: Vec<(String, String, usize)> = Vec::new();
    for s in realizations.iter().flatten() {
        let key = (s.scheme.clone(), s.mode.clone(), s.point);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(scheme, mode, point)| {
            let matching: Vec<&Sample> = realizations
                .iter()
                .flatten()
                .filter(|s| s.scheme == scheme && s.mode == mode && s.point == point)
                .collect();
            let rates: Vec<f64> = matching.iter().map(|s| s.rate_per_subband).collect();
            let zs: Vec<f64> = matching.iter().map(|s| s.z).collect();
            let snrs: Vec<f64> = matching.iter().filter_map(|s| s.snr).collect();
            let (rate, ci95_rate) = mean_ci(&rates);
            let (z, ci95) = mean_ci(&zs);
            let wit_snr_db = (!snrs.is_empty()).then(|| 10.0 * mean_ci(&snrs).0.log10());
            let wpt_dc_dba = (mode == "WPT").then(|| 20.0 * z.log10());
            Row {
                preset: spec.preset.to_string(),
                param: spec.preset.parameter().to_string(),
                value,
                scheme,
                mode,
                point,
                rate_per_subband: rate,
                z,
                n_realizations: matching.len(),
                ci95,
                ci95_rate,
                wit_snr_db,
                wpt_dc_dba,
            }
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct PointManifest {
    pub value: f64,
    /// Scenario in linear units as passed to the library.
    pub scenario: Scenario,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub spec: &'a ExperimentSpec,
    pub points: Vec<PointManifest>,
    /// Channel seed of every realization index.
    pub realization_seeds: Vec<u64>,
    pub csv: String,
    pub columns: Vec<&'static str>,
}

pub const COLUMNS: [&str; 13] = [
    "preset",
    "param",
    "value",
    "scheme",
    "mode",
    "point",
    "rate_per_subband",
    "z",
    "n_realizations",
    "ci95",
    "ci95_rate",
    "wit_snr_db",
    "wpt_dc_dba",
];

pub struct Outputs {
    pub csv: PathBuf,
    pub manifest: PathBuf,
}

pub fn write(out_dir: &Path, rows: &[Row], manifest: &Manifest<'_>) -> Result<Outputs> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let csv_path = out_dir.join(&manifest.csv);
    let mut w = csv::Writer::from_path(&csv_path)
        .with_context(|| format!("writing {}", csv_path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let manifest_path = out_dir.join(format!("{}.manifest.json", manifest.spec.preset));
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(manifest)? + "\n",
    )
    .with_context(|| format!("writing {}", manifest_path.display()))?;
    Ok(Outputs {
        csv: csv_path,
        manifest: manifest_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;

    fn sample(scheme: &str, mode: &str, point: usize, z: f64) -> Sample {
        Sample {
            scheme: scheme.into(),
            mode: mode.into(),
            point,
            rate_per_subband: 1.0,
            z,
            snr: None,
        }
    }

    #[test]
    fn mean_and_interval() {
        let (m, ci) = mean_ci(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((ci - 1.96 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_ci(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn aggregation_groups_by_key_in_first_seen_order() {
        let spec = ExperimentSpec {
            preset: Preset::IrsScaling,
            ..ExperimentSpec::default()
        };
        let runs = vec![
            vec![sample("GP", "WPT", 0, 1e-6), sample("BCD", "PS", 0, 2.0)],
            vec![sample("GP", "WPT", 0, 3e-6), sample("BCD", "PS", 0, 4.0)],
        ];
        let rows = aggregate(&spec, 8.0, &runs);
        assert_eq!(rows.len(), 2);
        assert_eq!(
            (rows[0].scheme.as_str(), rows[0].z, rows[0].n_realizations),
            ("GP", 2e-6, 2)
        );
        assert!((rows[0].wpt_dc_dba.unwrap() - 20.0 * 2e-6f64.log10()).abs() < 1e-12);
        assert_eq!(rows[1].wpt_dc_dba, None);
        assert_eq!((rows[1].param.as_str(), rows[1].value), ("L", 8.0));
    }
}
