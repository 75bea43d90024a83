//! Per-realization pipelines of every preset.

use anyhow::Result;
use swipt::linalg::{CMat, C64};
use swipt::orchestrate::{
    bcd, csit_point, lc_bcd, linear_eh_baseline, quantized_point, random_irs_strategy, re_region,
    BcdConfig, IrsPhases, PassiveStrategy, REPoint, RERegion, RegionConfig, RegionMode,
};
use swipt::scenario::{
    derive_seed, perturb_csit, sample_channels, CascadedCsit, ChannelRealization, CsitError,
    Scenario,
};

use crate::config::{ExperimentSpec, Mode, Preset};

/// One (rate, z) outcome of one realization, labelled for averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub scheme: String,
    /// PS, TS, WIT or WPT.
    pub mode: String,
    pub point: usize,
    pub rate_per_subband: f64,
    pub z: f64,
    /// Mean per-subband SNR at the WIT point [linear].
    pub snr: Option<f64>,
}

/// Seed of the channel draw of realization `r`.
pub fn realization_seed(spec: &ExperimentSpec, r: usize) -> u64 {
    derive_seed(spec.seed, r as u64)
}

/// Seeds of the auxiliary random draws of a realization.
const RANDOM_IRS_STREAM: u64 = 1;
const CSIT_STREAM: u64 = 2;

pub fn run_task(spec: &ExperimentSpec, sc: &Scenario, r: usize) -> Result<Vec<Sample>> {
    let seed = realization_seed(spec, r);
    let ch = sample_channels(sc, seed)?;
    match spec.preset {
        Preset::SubbandSweep | Preset::NoiseSweep | Preset::DistanceSweep => {
            regions(&ch, sc, spec, PassiveStrategy::Optimized, "")
        }
        Preset::TxScaling | Preset::IrsScaling => {
            let mut out = scaling(&ch, sc)?;
            out.extend(regions(&ch, sc, spec, PassiveStrategy::Optimized, "")?);
            Ok(out)
        }
        Preset::IrsStrategy => strategies(&ch, sc, spec, seed),
        Preset::CsitRobustness => csit(&ch, sc, spec, seed),
        Preset::Quantization => quantization(&ch, sc, spec),
    }
}

fn region_modes(mode: Mode) -> Vec<(RegionMode, &'static str)> {
    match mode {
        Mode::Bcd => vec![(RegionMode::Bcd, "BCD")],
        Mode::Lc => vec![(RegionMode::Lc, "LC")],
        Mode::Both => vec![(RegionMode::Bcd, "BCD"), (RegionMode::Lc, "LC")],
    }
}

fn point_sample(p: &REPoint, scheme: &str, point: usize) -> Sample {
    Sample {
        scheme: scheme.to_string(),
        mode: p.mode.to_string(),
        point,
        rate_per_subband: p.rate_per_subband,
        z: p.z,
        snr: None,
    }
}

fn region_samples(region: &RERegion, scheme: &str) -> Vec<Sample> {
    region
        .ps
        .iter()
        .chain(&region.ts)
        .enumerate()
        .map(|(i, p)| point_sample(p, scheme, i % region.ps.len().max(1)))
        .collect()
}

/// PS and TS points for every requested algorithm; `label` prefixes the
/// scheme name.
fn regions(
    ch: &ChannelRealization,
    sc: &Scenario,
    spec: &ExperimentSpec,
    passive: PassiveStrategy,
    label: &str,
) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for (mode, name) in region_modes(spec.mode) {
        let rc = RegionConfig {
            bcd: BcdConfig::with_passive(passive.clone()),
            ..RegionConfig::new(mode, spec.grid)
        };
        let region = re_region(ch, sc, &rc)?;
        let scheme = if label.is_empty() {
            name.to_string()
        } else {
            format!("{label}/{name}")
        };
        out.extend(region_samples(&region, &scheme));
    }
    Ok(out)
}

/// Mean over subbands of |h_nᴴw_I,n|²/σ_n² at a point.
fn wit_snr(ch: &ChannelRealization, sc: &Scenario, p: &REPoint) -> Result<f64> {
    let d = p.design.as_ref().expect("loop points carry designs");
    let h = d.irs.composite(ch)?;
    let noise = sc.noise();
    let snr: f64 = h
        .iter()
        .zip(d.waveform.info_weights())
        .zip(&noise)
        .map(|((h, w), s2)| h.dotc(&w).norm_sqr() / s2)
        .sum();
    Ok(snr / noise.len() as f64)
}

/// WIT point with its SNR, and the WPT DC of the GP, SMF and
/// linear-model designs.
fn scaling(ch: &ChannelRealization, sc: &Scenario) -> Result<Vec<Sample>> {
    let cfg = BcdConfig::default();
    let wit = lc_bcd(ch, sc, 0.0, 0.0, &cfg)?;
    let mut out = vec![Sample {
        snr: Some(wit_snr(ch, sc, &wit)?),
        mode: "WIT".into(),
        ..point_sample(&wit, "WF", 0)
    }];
    let wpt = [
        ("GP", bcd(ch, sc, 0.0, &cfg)?),
        ("SMF", lc_bcd(ch, sc, 1.0, 1.0, &cfg)?),
        ("LEH", linear_eh_baseline(ch, sc, 0.0, &cfg)?),
    ];
    for (name, p) in &wpt {
        out.push(Sample {
            mode: "WPT".into(),
            ..point_sample(p, name, 0)
        });
    }
    Ok(out)
}

fn shared_phases(p: &REPoint, l: usize) -> Vec<C64> {
    match p.design.as_ref().map(|d| &d.irs) {
        Some(IrsPhases::Shared(phi)) => phi.clone(),
        _ => vec![C64::new(1.0, 0.0); l],
    }
}

/// Frequency-selective, adaptive, WIT/WPT-optimized fixed, random and no IRS.
fn strategies(
    ch: &ChannelRealization,
    sc: &Scenario,
    spec: &ExperimentSpec,
    seed: u64,
) -> Result<Vec<Sample>> {
    let l = sc.irs_elements;
    let cfg = BcdConfig::default();
    let wit_phi = shared_phases(&lc_bcd(ch, sc, 0.0, 0.0, &cfg)?, l);
    let wpt_phi = shared_phases(&lc_bcd(ch, sc, 1.0, 1.0, &cfg)?, l);
    let schemes = [
        ("FS", PassiveStrategy::FrequencySelective),
        ("adaptive", PassiveStrategy::Optimized),
        ("WIT-optimized", PassiveStrategy::Fixed(wit_phi)),
        ("WPT-optimized", PassiveStrategy::Fixed(wpt_phi)),
        (
            "random",
            random_irs_strategy(l, derive_seed(seed, RANDOM_IRS_STREAM)),
        ),
        ("none", PassiveStrategy::Absent),
    ];
    let mut out = Vec::new();
    for (name, passive) in schemes {
        out.extend(regions(ch, sc, spec, passive, name)?);
    }
    Ok(out)
}

/// RMS magnitude of the cascaded entries of one subband.
fn rms(v: &CMat) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        (v.norm_squared() / v.len() as f64).sqrt()
    }
}

/// Rate floors uniformly spaced in [0, capacity].
fn floors(capacity: f64, grid: usize) -> Vec<f64> {
    (0..grid)
        .map(|i| capacity * i as f64 / (grid - 1) as f64)
        .collect()
}

/// Designs on an estimate of the cascaded channel at every rate floor and
/// scores them on the true channel. Error levels scale the RMS cascaded
/// entry of each subband.
fn csit(
    ch: &ChannelRealization,
    sc: &Scenario,
    spec: &ExperimentSpec,
    seed: u64,
) -> Result<Vec<Sample>> {
    let cfg = BcdConfig::default();
    let capacity = lc_bcd(ch, sc, 0.0, 0.0, &cfg)?.rate;
    let mut out = Vec::new();
    for (k, level) in spec.csit_error.iter().enumerate() {
        let stream = derive_seed(derive_seed(seed, CSIT_STREAM), k as u64);
        let estimate = match level.0 {
            None => CascadedCsit::Unavailable,
            Some(e) => {
                let err = CsitError {
                    epsilon: ch.cascaded.iter().map(|v| e * rms(v)).collect(),
                };
                perturb_csit(&ch.cascaded, &err, stream)?
            }
        };
        let scheme = level.to_string();
        for (i, floor) in floors(capacity, spec.grid).into_iter().enumerate() {
            let p = csit_point(ch, sc, floor, &estimate, &cfg, stream)?;
            out.push(point_sample(&p, &scheme, i));
        }
    }
    Ok(out)
}

/// Continuous BCD region, its quantized counterparts and the no-IRS region.
fn quantization(
    ch: &ChannelRealization,
    sc: &Scenario,
    spec: &ExperimentSpec,
) -> Result<Vec<Sample>> {
    let continuous = re_region(ch, sc, &RegionConfig::new(RegionMode::Bcd, spec.grid))?;
    let mut out: Vec<Sample> = continuous
        .ps
        .iter()
        .enumerate()
        .map(|(i, p)| point_sample(p, "continuous", i))
        .collect();
    for &bits in &spec.quant_bits {
        let scheme = format!("b={bits}");
        for (i, p) in continuous.ps.iter().enumerate() {
            let design = p.design.as_ref().expect("loop points carry designs");
            let q = if sc.irs_elements == 0 {
                p.clone()
            } else {
                quantized_point(ch, sc, p.rate_floor.unwrap_or(0.0), bits, design)?
            };
            out.push(point_sample(&q, &scheme, i));
        }
    }
    let rc = RegionConfig {
        bcd: BcdConfig::with_passive(PassiveStrategy::Absent),
        ..RegionConfig::new(RegionMode::Bcd, spec.grid)
    };
    let none = re_region(ch, sc, &rc)?;
    out.extend(
        none.ps
            .iter()
            .enumerate()
            .map(|(i, p)| point_sample(p, "none", i)),
    );
    Ok(out)
}
