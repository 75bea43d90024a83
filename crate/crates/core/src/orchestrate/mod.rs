//! Joint design loops and rate-energy region assembly.
//!
//! [`bcd`] cycles through the IRS phases (SCA), the precoders (MRT) and the
//! amplitudes with the splitting ratio (GP) under a rate floor. [`lc_bcd`]
//! replaces the GP by the closed-form superposition of water-filling and a
//! scaled matched filter. [`region`] sweeps either over the rate-energy
//! plane and [`baselines`] holds the reference schemes.

pub mod baselines;
pub mod region;

pub use baselines::{
    csit_point, linear_eh_baseline, quantize_irs, quantized_point, random_irs_strategy, IrsCodebook,
};
pub use region::{
    re_region, time_sharing, upper_concave_envelope, RERegion, RegionConfig, RegionMode,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::active::{channel_norms, mrt_precoders};
use crate::linalg::{c, CVec, C64};
use crate::passive::{cophase_per_subband, m_sca, sca, ScaConfig, ScaStatus};
use crate::rectenna::{achievable_rate, dc_terms, harvested_dc, RectennaModel, WaveformDesign};
use crate::scenario::{ChannelRealization, Scenario};
use crate::solver::psd::IpmSettings;
use crate::waveform::{gp, superposed_lc, GpConfig, GpStart, WaveformStatus};
use crate::{Error, Result};

/// Reflection coefficients of a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IrsPhases {
    /// The IRS is ignored (or not deployed).
    Absent,
    /// One phase vector for all subbands.
    Shared(Vec<C64>),
    /// Ideal frequency-selective reflection, one vector per subband.
    PerSubband(Vec<Vec<C64>>),
}

impl IrsPhases {
    /// Composite channels seen through these phases. `Absent` drops the
    /// cascaded links.
    pub fn composite(&self, ch: &ChannelRealization) -> Result<Vec<CVec>> {
        match self {
            Self::Absent => Ok(ch.direct.clone()),
            Self::Shared(phi) => ch.composite(phi),
            Self::PerSubband(phis) => ch.composite_per_subband(phis),
        }
    }
}

/// How the IRS phases are chosen inside the design loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PassiveStrategy {
    /// SCA over a shared phase vector.
    Optimized,
    /// Per-subband co-phasing, an upper-bound baseline.
    FrequencySelective,
    /// Phases held fixed (random or quantized).
    Fixed(Vec<C64>),
    /// No IRS.
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub irs: IrsPhases,
    pub waveform: WaveformDesign,
}

/// (rate in bits, z) of a design on a channel.
pub fn evaluate(
    ch: &ChannelRealization,
    design: &Design,
    noise: &[f64],
    model: RectennaModel,
) -> Result<(f64, f64)> {
    let h = design.irs.composite(ch)?;
    let wi = design.waveform.info_weights();
    let wp = design.waveform.power_weights();
    let rate = achievable_rate(&h, &wi, design.waveform.rho, noise)?;
    let z = harvested_dc(&dc_terms(&h, &wi, &wp)?, design.waveform.rho, model);
    Ok((rate, z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReceiverMode {
    PowerSplitting,
    TimeSwitching,
    /// Time sharing between power-splitting points.
    Mixed,
}

impl fmt::Display for ReceiverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PowerSplitting => "PS",
            Self::TimeSwitching => "TS",
            Self::Mixed => "TS-PS",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoopStatus {
    Converged,
    IterationLimit,
}

/// Iteration bookkeeping of a design loop.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointMeta {
    pub outer_iterations: usize,
    /// z after initialization and after every outer iteration (rate for the
    /// low-complexity loop at ρ = 0).
    pub history: Vec<f64>,
    pub sca_iterations: usize,
    pub gp_iterations: usize,
    /// SCA steps that fell back to the corrected surrogate.
    pub corrected_steps: usize,
    /// Largest λ₂/λ₁ among accepted SCA steps.
    pub eigen_ratio: f64,
    pub status: Option<LoopStatus>,
    pub sca_status: Option<ScaStatus>,
    pub gp_status: Option<WaveformStatus>,
}

/// One achievable (rate, z) pair and the design reaching it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct REPoint {
    /// Bits per channel use summed over subbands.
    pub rate: f64,
    pub rate_per_subband: f64,
    pub z: f64,
    pub mode: ReceiverMode,
    /// Rate floor this point was designed for, if any.
    pub rate_floor: Option<f64>,
    /// `None` for time-sharing combinations.
    pub design: Option<Design>,
    pub meta: PointMeta,
}

impl REPoint {
    pub fn combination(rate: f64, z: f64, subbands: usize, mode: ReceiverMode) -> Self {
        Self {
            rate,
            rate_per_subband: rate / subbands as f64,
            z,
            mode,
            rate_floor: None,
            design: None,
            meta: PointMeta::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcdConfig {
    pub passive: PassiveStrategy,
    pub max_outer: usize,
    pub max_sca: usize,
    pub max_gp: usize,
    pub ipm: IpmSettings,
}

impl Default for BcdConfig {
    fn default() -> Self {
        Self {
            passive: PassiveStrategy::Optimized,
            max_outer: 30,
            max_sca: 100,
            max_gp: 200,
            ipm: IpmSettings::default(),
        }
    }
}

impl BcdConfig {
    pub fn with_passive(passive: PassiveStrategy) -> Self {
        Self {
            passive,
            ..Self::default()
        }
    }
}

/// Scenario quantities the loops need, with the rectenna model overridable.
#[derive(Debug, Clone)]
pub(crate) struct Context<'a> {
    pub ch: &'a ChannelRealization,
    pub power: f64,
    pub noise: Vec<f64>,
    pub model: RectennaModel,
    pub alpha: f64,
    pub epsilon: f64,
    pub cfg: &'a BcdConfig,
}

impl<'a> Context<'a> {
    pub fn new(ch: &'a ChannelRealization, sc: &Scenario, cfg: &'a BcdConfig) -> Result<Self> {
        sc.validate()?;
        if ch.subbands() != sc.subbands || ch.tx_antennas() != sc.tx_antennas {
            return Err(Error::DimensionMismatch(format!(
                "channel is {} subbands x {} antennas, scenario expects {} x {}",
                ch.subbands(),
                ch.tx_antennas(),
                sc.subbands,
                sc.tx_antennas
            )));
        }
        if let PassiveStrategy::Fixed(phi) = &cfg.passive {
            if phi.len() != ch.irs_elements() {
                return Err(Error::DimensionMismatch(format!(
                    "{} fixed phases for {} elements",
                    phi.len(),
                    ch.irs_elements()
                )));
            }
        }
        Ok(Self {
            ch,
            power: sc.tx_power,
            noise: sc.noise(),
            model: sc.rectenna(),
            alpha: sc.alpha,
            epsilon: sc.epsilon,
            cfg,
        })
    }

    fn initial_phases(&self) -> IrsPhases {
        let l = self.ch.irs_elements();
        match &self.cfg.passive {
            PassiveStrategy::Absent => IrsPhases::Absent,
            PassiveStrategy::Fixed(phi) => IrsPhases::Shared(phi.clone()),
            PassiveStrategy::Optimized => IrsPhases::Shared(vec![c(1.0, 0.0); l]),
            PassiveStrategy::FrequencySelective => {
                IrsPhases::PerSubband(vec![vec![c(1.0, 0.0); l]; self.ch.subbands()])
            }
        }
    }

    fn evaluate(&self, d: &Design) -> Result<(f64, f64)> {
        evaluate(self.ch, d, &self.noise, self.model)
    }

    fn sca_config(&self, rho: f64, rate_floor: f64) -> ScaConfig {
        ScaConfig {
            max_iterations: self.cfg.max_sca,
            ipm: self.cfg.ipm,
            ..ScaConfig::new(
                self.model,
                rho,
                self.noise.clone(),
                rate_floor,
                self.epsilon,
            )
        }
    }

    fn gp_config(&self, rate_floor: f64) -> GpConfig {
        GpConfig {
            max_iterations: self.cfg.max_gp,
            ipm: self.cfg.ipm,
            ..GpConfig::new(
                self.model,
                self.power,
                self.noise.clone(),
                rate_floor,
                self.epsilon,
            )
        }
    }

    /// Passive block: SCA under the rate floor, or the floor-free variant
    /// when `rate_only` is set or there is no floor.
    fn passive_step(
        &self,
        d: &Design,
        rate_floor: f64,
        rate_only: bool,
        meta: &mut PointMeta,
    ) -> Result<IrsPhases> {
        let wi = d.waveform.info_weights();
        let wp = d.waveform.power_weights();
        let rho = d.waveform.rho;
        match (&self.cfg.passive, &d.irs) {
            (PassiveStrategy::Optimized, IrsPhases::Shared(phi)) if !phi.is_empty() => {
                let scfg = self.sca_config(rho, rate_floor);
                let out = if rate_only || rate_floor <= 0.0 {
                    m_sca(self.ch, &wi, &wp, &scfg, Some(phi))?
                } else {
                    sca(self.ch, &wi, &wp, &scfg, Some(phi))?
                };
                meta.sca_iterations += out.iterations;
                meta.corrected_steps += out.corrected_steps;
                meta.eigen_ratio = meta.eigen_ratio.max(out.eigen_ratio);
                meta.sca_status = Some(out.status);
                Ok(IrsPhases::Shared(out.phi))
            }
            (PassiveStrategy::FrequencySelective, IrsPhases::PerSubband(_))
                if self.ch.irs_elements() > 0 =>
            {
                Ok(IrsPhases::PerSubband(cophase_per_subband(
                    self.ch, &wi, &wp,
                )?))
            }
            _ => Ok(d.irs.clone()),
        }
    }
}

fn mrt_for(ctx: &Context<'_>, irs: &IrsPhases) -> Result<(Vec<f64>, Vec<CVec>)> {
    let h = irs.composite(ctx.ch)?;
    Ok((channel_norms(&h), mrt_precoders(&h)))
}

fn with_precoders(w: &WaveformDesign, b: &[CVec]) -> WaveformDesign {
    WaveformDesign {
        b_info: b.to_vec(),
        b_power: b.to_vec(),
        ..w.clone()
    }
}

/// Low-complexity loop for a fixed combining ratio δ and splitting ratio ρ:
/// phases without a rate floor, MRT, then the superposed WF/SMF amplitudes.
pub fn lc_bcd(
    ch: &ChannelRealization,
    sc: &Scenario,
    delta: f64,
    rho: f64,
    cfg: &BcdConfig,
) -> Result<REPoint> {
    let ctx = Context::new(ch, sc, cfg)?;
    lc_bcd_ctx(&ctx, delta, rho)
}

pub(crate) fn lc_bcd_ctx(ctx: &Context<'_>, delta: f64, rho: f64) -> Result<REPoint> {
    if !(0.0..=1.0).contains(&delta) || !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!(
            "delta={delta} and rho={rho} must lie in [0, 1]"
        )));
    }
    let rate_branch = rho == 0.0;
    let mut meta = PointMeta::default();
    let build = |irs: IrsPhases| -> Result<Design> {
        let (norms, b) = mrt_for(ctx, &irs)?;
        let (s_info, s_power) = superposed_lc(&norms, ctx.power, delta, &ctx.noise, ctx.alpha)?;
        let waveform = WaveformDesign {
            s_info,
            s_power,
            b_info: b.clone(),
            b_power: b,
            rho,
            rho_bar: 1.0 - rho,
            delta: Some(delta),
            eta: None,
        };
        Ok(Design { irs, waveform })
    };
    let mut design = build(ctx.initial_phases())?;
    let (mut rate, mut z) = ctx.evaluate(&design)?;
    let tracked = |r: f64, z: f64| if rate_branch { r } else { z };
    meta.history.push(tracked(rate, z));
    meta.status = Some(LoopStatus::IterationLimit);
    for _ in 0..ctx.cfg.max_outer {
        meta.outer_iterations += 1;
        let irs = ctx.passive_step(&design, 0.0, rate_branch, &mut meta)?;
        let candidate = build(irs)?;
        let (r_new, z_new) = ctx.evaluate(&candidate)?;
        let (old, new) = (tracked(rate, z), tracked(r_new, z_new));
        design = candidate;
        rate = r_new;
        z = z_new;
        meta.history.push(new);
        if (new - old).abs() <= ctx.epsilon * new.abs() {
            meta.status = Some(LoopStatus::Converged);
            break;
        }
    }
    let n = ctx.ch.subbands();
    Ok(REPoint {
        rate,
        rate_per_subband: rate / n as f64,
        z,
        mode: ReceiverMode::PowerSplitting,
        rate_floor: None,
        design: Some(design),
        meta,
    })
}

/// Waveform step used by the design loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum WaveformStep {
    Gp,
    /// All power on one sinewave at the strongest subband, ρ = 1.
    SingleSinewave,
}

/// Block coordinate ascent on z under the rate floor, starting from the
/// water-filling point (and also from the energy-only point when the floor
/// is zero).
pub fn bcd(
    ch: &ChannelRealization,
    sc: &Scenario,
    rate_floor: f64,
    cfg: &BcdConfig,
) -> Result<REPoint> {
    let ctx = Context::new(ch, sc, cfg)?;
    let wit = lc_bcd_ctx(&ctx, 0.0, 0.0)?;
    let mut starts = vec![wit.design.clone().expect("loop points carry designs")];
    if rate_floor <= 0.0 {
        starts.push(
            lc_bcd_ctx(&ctx, 1.0, 1.0)?
                .design
                .expect("loop points carry designs"),
        );
    }
    best_of(&ctx, rate_floor, &starts, wit.rate)
}

/// [`bcd`] from explicit starting designs; the best final point is kept.
pub fn bcd_from(
    ch: &ChannelRealization,
    sc: &Scenario,
    rate_floor: f64,
    cfg: &BcdConfig,
    starts: &[Design],
    capacity: f64,
) -> Result<REPoint> {
    let ctx = Context::new(ch, sc, cfg)?;
    best_of(&ctx, rate_floor, starts, capacity)
}

pub(crate) fn best_of(
    ctx: &Context<'_>,
    rate_floor: f64,
    starts: &[Design],
    capacity: f64,
) -> Result<REPoint> {
    if rate_floor > capacity * (1.0 + 1e-9) {
        return Err(Error::Infeasible {
            requested: rate_floor,
            achievable: capacity,
        });
    }
    let mut best: Option<REPoint> = None;
    let mut last_err = None;
    for start in starts {
        match bcd_ctx(ctx, rate_floor, start.clone(), WaveformStep::Gp) {
            Ok(p) => {
                if best.as_ref().is_none_or(|b| p.z > b.z) {
                    best = Some(p);
                }
            }
            // A start that misses the floor is skipped.
            Err(e @ Error::Infeasible { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Domain("no starting design".into())))
}

pub(crate) fn bcd_ctx(
    ctx: &Context<'_>,
    rate_floor: f64,
    start: Design,
    step: WaveformStep,
) -> Result<REPoint> {
    let feasible = |rate: f64| rate_floor <= 0.0 || rate >= rate_floor - crate::passive::RATE_TOL;
    let mut design = start;
    let (mut rate, mut z) = ctx.evaluate(&design)?;
    if !feasible(rate) {
        return Err(Error::Infeasible {
            requested: rate_floor,
            achievable: rate,
        });
    }
    let mut meta = PointMeta {
        history: vec![z],
        status: Some(LoopStatus::IterationLimit),
        ..Default::default()
    };
    let gp_cfg = ctx.gp_config(rate_floor);

    for _ in 0..ctx.cfg.max_outer {
        meta.outer_iterations += 1;
        let z_start = z;

        // Phases.
        let irs = ctx.passive_step(&design, rate_floor, false, &mut meta)?;
        let candidate = Design {
            irs,
            waveform: design.waveform.clone(),
        };
        let (r, zc) = ctx.evaluate(&candidate)?;
        if zc >= z && feasible(r) {
            design = candidate;
            (rate, z) = (r, zc);
        }

        // Precoders: MRT maximizes every |h_nᴴw_n| for fixed amplitudes.
        let (norms, b) = mrt_for(ctx, &design.irs)?;
        let candidate = Design {
            irs: design.irs.clone(),
            waveform: with_precoders(&design.waveform, &b),
        };
        let (r, zc) = ctx.evaluate(&candidate)?;
        if zc >= z && feasible(r) {
            design = candidate;
            (rate, z) = (r, zc);
        }

        // Amplitudes and splitting ratio.
        let waveform = match step {
            WaveformStep::Gp => {
                let warm = GpStart {
                    s_info: design.waveform.s_info.clone(),
                    s_power: design.waveform.s_power.clone(),
                    rho: design.waveform.rho,
                };
                let out = gp(&norms, &gp_cfg, Some(&warm))?;
                meta.gp_iterations += out.iterations;
                meta.gp_status = Some(out.status);
                WaveformDesign {
                    s_info: out.s_info,
                    s_power: out.s_power,
                    b_info: b.clone(),
                    b_power: b.clone(),
                    rho: out.rho,
                    rho_bar: out.rho_bar,
                    delta: None,
                    eta: None,
                }
            }
            WaveformStep::SingleSinewave => single_sinewave(&norms, ctx.power, &b),
        };
        let candidate = Design {
            irs: design.irs.clone(),
            waveform,
        };
        let (r, zc) = ctx.evaluate(&candidate)?;
        if zc >= z && feasible(r) {
            design = candidate;
            (rate, z) = (r, zc);
        }

        meta.history.push(z);
        if (z - z_start).abs() <= ctx.epsilon * z.abs() {
            meta.status = Some(LoopStatus::Converged);
            break;
        }
    }
    let n = ctx.ch.subbands();
    Ok(REPoint {
        rate,
        rate_per_subband: rate / n as f64,
        z,
        mode: ReceiverMode::PowerSplitting,
        rate_floor: Some(rate_floor),
        design: Some(design),
        meta,
    })
}

/// Adaptive single sinewave: the whole budget on the strongest subband (the
/// first one on ties), nothing modulated, ρ = 1.
pub fn single_sinewave(norms: &[f64], power: f64, b: &[CVec]) -> WaveformDesign {
    let n = norms.len();
    let best = norms
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > norms[best] { i } else { best });
    let mut s_power = vec![0.0; n];
    s_power[best] = (2.0 * power).sqrt();
    WaveformDesign {
        s_info: vec![0.0; n],
        s_power,
        b_info: b.to_vec(),
        b_power: b.to_vec(),
        rho: 1.0,
        rho_bar: 0.0,
        delta: None,
        eta: None,
    }
}
