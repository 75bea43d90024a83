//! Reference schemes: discrete IRS phases, the linear harvester model, random
//! phases and imperfect cascaded CSIT.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{
    bcd_ctx, best_of, evaluate, lc_bcd_ctx, BcdConfig, Context, Design, IrsPhases, PassiveStrategy,
    REPoint, WaveformStep,
};
use crate::linalg::C64;
use crate::scenario::{random_phases, CascadedCsit, ChannelRealization, Scenario};
use crate::{Error, Result};

/// Uniform phase codebook {e^{j2πi/2^b}}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrsCodebook {
    pub bits: u32,
}

impl IrsCodebook {
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > 24 {
            return Err(Error::Domain(format!(
                "codebook resolution must be 1..=24 bits, got {bits}"
            )));
        }
        Ok(Self { bits })
    }

    pub fn size(&self) -> usize {
        1 << self.bits
    }

    pub fn phases(&self) -> Vec<C64> {
        let q = self.size();
        (0..q)
            .map(|i| C64::from_polar(1.0, 2.0 * PI * i as f64 / q as f64))
            .collect()
    }

    /// Codebook index nearest to `phi`; exact midpoints go to the lower index.
    pub fn index(&self, phi: C64) -> usize {
        let q = self.size();
        let step = 2.0 * PI / q as f64;
        let x = phi.arg().rem_euclid(2.0 * PI) / step;
        ((x - 0.5).ceil() as i64).rem_euclid(q as i64) as usize
    }

    pub fn quantize(&self, phi: &[C64]) -> Vec<C64> {
        let q = self.size() as f64;
        phi.iter()
            .map(|&p| C64::from_polar(1.0, 2.0 * PI * self.index(p) as f64 / q))
            .collect()
    }
}

/// Snaps every coefficient to the nearest of 2^b uniform phases.
pub fn quantize_irs(phi: &[C64], bits: u32) -> Result<Vec<C64>> {
    Ok(IrsCodebook::new(bits)?.quantize(phi))
}

/// Fixed i.i.d. uniform phases.
pub fn random_irs_strategy(l: usize, seed: u64) -> PassiveStrategy {
    PassiveStrategy::Fixed(random_phases(l, seed))
}

/// Quantizes the phases of a continuous design, then re-optimizes the
/// precoders and amplitudes with the quantized phases held fixed.
pub fn quantized_point(
    ch: &ChannelRealization,
    sc: &Scenario,
    rate_floor: f64,
    bits: u32,
    continuous: &Design,
) -> Result<REPoint> {
    let IrsPhases::Shared(phi) = &continuous.irs else {
        return Err(Error::Domain(
            "only a shared phase vector can be quantized".into(),
        ));
    };
    let q = quantize_irs(phi, bits)?;
    let cfg = BcdConfig::with_passive(PassiveStrategy::Fixed(q.clone()));
    let ctx = Context::new(ch, sc, &cfg)?;
    let wit = lc_bcd_ctx(&ctx, 0.0, 0.0)?;
    let warm = Design {
        irs: IrsPhases::Shared(q),
        waveform: continuous.waveform.clone(),
    };
    let starts = vec![wit.design.clone().expect("loop points carry designs"), warm];
    best_of(&ctx, rate_floor.min(wit.rate), &starts, wit.rate)
}

/// Designs under the second-order (linear) harvester model and scores the
/// result under the full model. Without a rate floor the waveform is a single
/// sinewave on the strongest subband.
pub fn linear_eh_baseline(
    ch: &ChannelRealization,
    sc: &Scenario,
    rate_floor: f64,
    cfg: &BcdConfig,
) -> Result<REPoint> {
    let full = Context::new(ch, sc, cfg)?;
    let ctx = Context {
        model: full.model.linear(),
        ..full.clone()
    };
    let wit = lc_bcd_ctx(&ctx, 0.0, 0.0)?;
    if rate_floor > wit.rate * (1.0 + 1e-9) {
        return Err(Error::Infeasible {
            requested: rate_floor,
            achievable: wit.rate,
        });
    }
    let start = wit.design.expect("loop points carry designs");
    let step = if rate_floor <= 0.0 {
        WaveformStep::SingleSinewave
    } else {
        WaveformStep::Gp
    };
    let mut p = bcd_ctx(&ctx, rate_floor, start, step)?;
    let design = p.design.as_ref().expect("loop points carry designs");
    let (rate, z) = full.evaluate(design)?;
    p.rate = rate;
    p.rate_per_subband = rate / ch.subbands() as f64;
    p.z = z;
    Ok(p)
}

/// Designs on the transmitter's knowledge of the cascaded channel and scores
/// the design on the true channel. With no cascaded CSIT the IRS is left at
/// random phases and the waveform is designed for the direct link. The floor
/// is capped at the capacity the transmitter believes in.
pub fn csit_point(
    ch: &ChannelRealization,
    sc: &Scenario,
    rate_floor: f64,
    csit: &CascadedCsit,
    cfg: &BcdConfig,
    seed: u64,
) -> Result<REPoint> {
    let (design_channel, cfg_used, random) = match csit {
        CascadedCsit::Estimated(v) => (ch.with_cascaded(v.clone()), cfg.clone(), None),
        CascadedCsit::Unavailable => (
            ch.clone(),
            BcdConfig {
                passive: PassiveStrategy::Absent,
                ..cfg.clone()
            },
            Some(random_phases(ch.irs_elements(), seed)),
        ),
    };
    let ctx = Context::new(&design_channel, sc, &cfg_used)?;
    let wit = lc_bcd_ctx(&ctx, 0.0, 0.0)?;
    let mut starts = vec![wit.design.clone().expect("loop points carry designs")];
    if rate_floor <= 0.0 {
        starts.push(
            lc_bcd_ctx(&ctx, 1.0, 1.0)?
                .design
                .expect("loop points carry designs"),
        );
    }
    let mut p = best_of(&ctx, rate_floor.min(wit.rate), &starts, wit.rate)?;
    let mut design = p.design.take().expect("loop points carry designs");
    if let Some(phi) = random {
        design.irs = IrsPhases::Shared(phi);
    }
    let (rate, z) = evaluate(ch, &design, &sc.noise(), sc.rectenna())?;
    p.rate = rate;
    p.rate_per_subband = rate / ch.subbands() as f64;
    p.z = z;
    p.design = Some(design);
    Ok(p)
}
