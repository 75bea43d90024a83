//! Experiment configuration. Power-like quantities are given in dB here and
//! converted to linear units when the scenario is built.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use swipt::scenario::{Scenario, TapProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// R-E regions versus the number of subbands N.
    SubbandSweep,
    /// R-E regions versus the noise power [dBm].
    NoiseSweep,
    /// R-E regions versus the AP-IRS horizontal distance [m].
    DistanceSweep,
    /// WIT SNR and WPT DC versus the number of transmit antennas M.
    TxScaling,
    /// WIT SNR and WPT DC versus the number of IRS elements L.
    IrsScaling,
    /// R-E regions of IRS strategies versus the bandwidth [MHz].
    IrsStrategy,
    /// R-E regions under imperfect cascaded CSIT versus L.
    CsitRobustness,
    /// R-E regions with a discrete-phase IRS versus L.
    Quantization,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Self::SubbandSweep => "subband-sweep",
            Self::NoiseSweep => "noise-sweep",
            Self::DistanceSweep => "distance-sweep",
            Self::TxScaling => "tx-scaling",
            Self::IrsScaling => "irs-scaling",
            Self::IrsStrategy => "irs-strategy",
            Self::CsitRobustness => "csit-robustness",
            Self::Quantization => "quantization",
        }
    }

    /// Name of the swept parameter as written to the CSV.
    pub fn parameter(self) -> &'static str {
        match self {
            Self::SubbandSweep => "N",
            Self::NoiseSweep => "noise_dbm",
            Self::DistanceSweep => "d_horizontal_m",
            Self::TxScaling => "M",
            Self::IrsScaling | Self::CsitRobustness | Self::Quantization => "L",
            Self::IrsStrategy => "bandwidth_mhz",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            Self::SubbandSweep => vec![2.0, 4.0, 8.0, 16.0],
            Self::NoiseSweep => vec![-20.0, -40.0, -60.0],
            Self::DistanceSweep => vec![0.6, 2.0, 6.0, 10.0, 11.4],
            Self::TxScaling => vec![1.0, 2.0, 4.0, 8.0],
            Self::IrsScaling => vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            Self::IrsStrategy => vec![1.0, 10.0],
            Self::CsitRobustness | Self::Quantization => vec![20.0],
        }
    }

    /// Whether the swept values must be positive integers.
    fn integral(self) -> bool {
        matches!(
            self,
            Self::SubbandSweep
                | Self::TxScaling
                | Self::IrsScaling
                | Self::CsitRobustness
                | Self::Quantization
        )
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which rate-energy region algorithm(s) to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Bcd,
    Lc,
    Both,
}

/// Cascaded CSIT error level relative to the RMS cascaded entry of each
/// subband; `None` means no cascaded CSIT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CsitLevel(pub Option<f64>);

impl FromStr for CsitLevel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "none" | "inf" => Ok(Self(None)),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|e| e.is_finite() && *e >= 0.0)
                .map(|e| Self(Some(e)))
                .ok_or_else(|| {
                    format!("CSIT error must be a nonnegative number or 'none', got '{v}'")
                }),
        }
    }
}

impl fmt::Display for CsitLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(e) => write!(f, "eps={e}"),
            None => f.write_str("eps=none"),
        }
    }
}

/// Scenario in configuration units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub tx_antennas: usize,
    pub subbands: usize,
    pub irs_elements: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_dbm: f64,
    pub noise_dbm_per_subband: Option<Vec<f64>>,
    pub tx_power_dbm: f64,
    pub rx_gain_dbi: f64,
    pub beta2: f64,
    pub beta4: f64,
    pub d_direct: f64,
    pub d_horizontal: f64,
    pub d_vertical: f64,
    pub alpha: f64,
    pub epsilon: f64,
    /// Two-column CSV (delay_s, power_linear); TGn model D when absent.
    pub tap_profile_csv: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let s = Scenario::default();
        Self {
            tx_antennas: s.tx_antennas,
            subbands: s.subbands,
            irs_elements: s.irs_elements,
            carrier_hz: s.carrier_hz,
            bandwidth_hz: s.bandwidth_hz,
            noise_dbm: -40.0,
            noise_dbm_per_subband: None,
            tx_power_dbm: 40.0,
            rx_gain_dbi: 3.0,
            beta2: s.beta2,
            beta4: s.beta4,
            d_direct: s.d_direct,
            d_horizontal: s.d_horizontal,
            d_vertical: s.d_vertical,
            alpha: s.alpha,
            epsilon: s.epsilon,
            tap_profile_csv: None,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ScenarioConfig {
    pub fn to_scenario(&self, seed: u64) -> Result<Scenario> {
        let tap_profile = match &self.tap_profile_csv {
            Some(p) => TapProfile::from_csv_path(p)
                .with_context(|| format!("reading tap profile {}", p.display()))?,
            None => TapProfile::tgn_model_d(),
        };
        let s = Scenario {
            tx_antennas: self.tx_antennas,
            subbands: self.subbands,
            irs_elements: self.irs_elements,
            carrier_hz: self.carrier_hz,
            bandwidth_hz: self.bandwidth_hz,
            noise_power: dbm_to_watts(self.noise_dbm),
            noise_per_subband: self
                .noise_dbm_per_subband
                .as_ref()
                .map(|v| v.iter().map(|&x| dbm_to_watts(x)).collect()),
            tx_power: dbm_to_watts(self.tx_power_dbm),
            beta2: self.beta2,
            beta4: self.beta4,
            d_direct: self.d_direct,
            d_horizontal: self.d_horizontal,
            d_vertical: self.d_vertical,
            alpha: self.alpha,
            epsilon: self.epsilon,
            tap_profile,
            rx_gain: db_to_linear(self.rx_gain_dbi),
            seed,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Full experiment description, as read from `--config` and overridden by
/// the command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub scenario: ScenarioConfig,
    /// Swept parameter values; the preset's defaults when absent.
    pub values: Option<Vec<f64>>,
    pub realizations: usize,
    pub seed: u64,
    /// Points per rate-energy region.
    pub grid: usize,
    pub mode: Mode,
    pub quant_bits: Vec<u32>,
    pub csit_error: Vec<CsitLevel>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            preset: Preset::SubbandSweep,
            scenario: ScenarioConfig::default(),
            values: None,
            realizations: 20,
            seed: 0,
            grid: 11,
            mode: Mode::Both,
            quant_bits: vec![1, 2, 4],
            csit_error: vec![
                CsitLevel(Some(0.0)),
                CsitLevel(Some(0.2)),
                CsitLevel(Some(0.5)),
                CsitLevel(None),
            ],
        }
    }
}

impl ExperimentSpec {
    pub fn values(&self) -> Vec<f64> {
        self.values
            .clone()
            .unwrap_or_else(|| self.preset.default_values())
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            bail!("at least one realization is required");
        }
        if self.grid < 2 {
            bail!("grid must have at least 2 points, got {}", self.grid);
        }
        let values = self.values();
        if values.is_empty() {
            bail!("no parameter values to sweep");
        }
        if self.preset.integral() && values.iter().any(|&v| v.fract() != 0.0 || v < 0.0) {
            bail!(
                "{} values must be nonnegative integers, got {values:?}",
                self.preset.parameter()
            );
        }
        if self.preset == Preset::Quantization && self.quant_bits.is_empty() {
            bail!("quantization needs at least one codebook resolution");
        }
        if self.preset == Preset::CsitRobustness && self.csit_error.is_empty() {
            bail!("csit-robustness needs at least one CSIT error level");
        }
        for p in 0..values.len() {
            self.point_scenario(p)?;
        }
        Ok(())
    }

    /// Scenario of parameter point `p`.
    pub fn point_scenario(&self, p: usize) -> Result<Scenario> {
        let v = self.values()[p];
        let mut c = self.scenario.clone();
        match self.preset {
            Preset::SubbandSweep => {
                c.subbands = v as usize;
                if let Some(per) = &c.noise_dbm_per_subband {
                    if per.len() != c.subbands {
                        bail!("noise_dbm_per_subband cannot be combined with a subband sweep");
                    }
                }
            }
            Preset::NoiseSweep => {
                c.noise_dbm = v;
                c.noise_dbm_per_subband = None;
            }
            Preset::DistanceSweep => c.d_horizontal = v,
            Preset::TxScaling => c.tx_antennas = v as usize,
            Preset::IrsScaling | Preset::CsitRobustness | Preset::Quantization => {
                c.irs_elements = v as usize
            }
            Preset::IrsStrategy => c.bandwidth_hz = v * 1e6,
        }
        c.to_scenario(self.seed)
            .with_context(|| format!("{} = {v}", self.preset.parameter()))
    }
}
