//! IRS phase design for fixed transmit weights.
//!
//! With φ̄ = [φ; 1] and u_n = M_n w_n = [V_n w_n; h_D,nᴴw_n], every received
//! amplitude is h_nᴴw_n = φ̄ᴴu_n. The DC model and the rate are then functions
//! of the lifted matrix Φ = φ̄φ̄ᴴ through traces tr(CΦ). [`sca`] maximizes the
//! DC subject to a rate floor by solving a sequence of linearized PSD
//! programs; [`m_sca`] drops the floor. Phases are read off the leading
//! eigenvector with [`extract_phase`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{c, hermitian_eigen, hermitize, outer, trace_product, CMat, CVec, C64};
use crate::rectenna::{achievable_rate, dc_terms, harvested_dc, RectennaModel};
use crate::scenario::{check_unit_modulus, ChannelRealization};
use crate::solver::psd::{
    maximize_rate, solve_psd_given_capacity, IpmSettings, PsdStatus, PsdSubproblem, RateTerm,
};
use crate::{Error, Result};

/// Relative second-to-first eigenvalue ratio above which extraction warns.
pub const RANK_ONE_TOL: f64 = 1e-3;
/// Slack (bits) allowed on the rate floor after phase extraction.
pub const RATE_TOL: f64 = 1e-6;

/// Reflection coefficients and, while optimizing, their lifted matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsState {
    pub phi: Vec<C64>,
    pub lifted: Option<CMat>,
}

impl IrsState {
    pub fn new(phi: Vec<C64>) -> Result<Self> {
        check_unit_modulus(&phi)?;
        Ok(Self { phi, lifted: None })
    }

    pub fn with_lift(mut self) -> Self {
        self.lifted = Some(lifted_matrix(&self.phi));
        self
    }
}

/// φ̄ = [φ; 1].
pub fn lift(phi: &[C64]) -> CVec {
    CVec::from_iterator(phi.len() + 1, phi.iter().copied().chain([c(1.0, 0.0)]))
}

/// Φ = φ̄φ̄ᴴ.
pub fn lifted_matrix(phi: &[C64]) -> CMat {
    let v = lift(phi);
    outer(&v, &v)
}

/// u_n = [V_n w_n; h_D,nᴴw_n] for every subband.
pub fn lifted_responses(ch: &ChannelRealization, w: &[CVec]) -> Result<Vec<CVec>> {
    let n = ch.subbands();
    if w.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {n} subbands",
            w.len()
        )));
    }
    let l = ch.irs_elements();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        if w[k].len() != ch.tx_antennas() {
            return Err(Error::DimensionMismatch(format!(
                "subband {k}: weight length {} for {} antennas",
                w[k].len(),
                ch.tx_antennas()
            )));
        }
        let vw = &ch.cascaded[k] * &w[k];
        let mut u = CVec::zeros(l + 1);
        u.rows_mut(0, l).copy_from(&vw);
        u[l] = ch.direct[k].dotc(&w[k]);
        out.push(u);
    }
    Ok(out)
}

/// Rate and DC coupling matrices, the DC ones indexed by k + N − 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrices {
    /// C_n = u_I,n u_I,nᴴ.
    pub rate: Vec<CMat>,
    /// C_I,k = Σ_{n₂−n₁=k} u_I,n₁ u_I,n₂ᴴ.
    pub info: Vec<CMat>,
    /// C_P,k = Σ_{n₂−n₁=k} u_P,n₁ u_P,n₂ᴴ.
    pub power: Vec<CMat>,
}

impl CouplingMatrices {
    pub fn subbands(&self) -> usize {
        self.rate.len()
    }

    pub fn dim(&self) -> usize {
        self.rate.first().map_or(0, |m| m.nrows())
    }

    pub fn info0(&self) -> &CMat {
        &self.info[self.subbands() - 1]
    }

    pub fn power0(&self) -> &CMat {
        &self.power[self.subbands() - 1]
    }
}

fn shift_sums(u: &[CVec]) -> Vec<CMat> {
    let n = u.len();
    let d = u[0].len();
    let mut out = vec![CMat::zeros(d, d); 2 * n - 1];
    for n1 in 0..n {
        for n2 in 0..n {
            out[n2 + n - 1 - n1] += outer(&u[n1], &u[n2]);
        }
    }
    out
}

pub fn build_coupling(
    ch: &ChannelRealization,
    w_info: &[CVec],
    w_power: &[CVec],
) -> Result<CouplingMatrices> {
    if ch.subbands() == 0 {
        return Err(Error::DimensionMismatch("no subbands".into()));
    }
    let ui = lifted_responses(ch, w_info)?;
    let up = lifted_responses(ch, w_power)?;
    Ok(CouplingMatrices {
        rate: ui.iter().map(|u| outer(u, u)).collect(),
        info: shift_sums(&ui),
        power: shift_sums(&up),
    })
}

/// t_I,k and t_P,k = tr(C_{I/P,k}Φ), indexed by k + N − 1.
pub fn coupling_traces(cm: &CouplingMatrices, phi: &CMat) -> (Vec<C64>, Vec<C64>) {
    let tr = |v: &[CMat]| v.iter().map(|m| trace_product(m, phi)).collect();
    (tr(&cm.info), tr(&cm.power))
}

fn dc_from_traces(t_i0: f64, t_p: &[C64], rho: f64, model: RectennaModel) -> f64 {
    let t_p0 = t_p[t_p.len() / 2].re;
    let sum_sq: f64 = t_p.iter().map(|t| t.norm_sqr()).sum();
    0.5 * model.beta2 * rho * (t_i0 + t_p0)
        + model.beta4 * rho * rho * (0.75 * t_i0 * t_i0 + 0.375 * sum_sq + 1.5 * t_i0 * t_p0)
}

/// z as a function of the lifted matrix.
pub fn dc_lifted(cm: &CouplingMatrices, phi: &CMat, rho: f64, model: RectennaModel) -> f64 {
    let t_i0 = trace_product(cm.info0(), phi).re;
    let (_, t_p) = coupling_traces(cm, phi);
    dc_from_traces(t_i0, &t_p, rho, model)
}

fn rate_terms(cm: &CouplingMatrices, rho: f64, noise: &[f64]) -> Vec<RateTerm> {
    cm.rate
        .iter()
        .zip(noise)
        .map(|(m, s2)| RateTerm {
            coupling: m.clone(),
            scale: (1.0 - rho) / s2,
        })
        .collect()
}

/// Rate (bits) as a function of the lifted matrix.
pub fn rate_lifted(cm: &CouplingMatrices, phi: &CMat, rho: f64, noise: &[f64]) -> f64 {
    crate::solver::psd::rate_of(&rate_terms(cm, rho, noise), phi)
}

/// tr(AΦ) + constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub matrix: CMat,
    pub constant: f64,
}

impl Surrogate {
    pub fn value(&self, phi: &CMat) -> f64 {
        trace_product(&self.matrix, phi).re + self.constant
    }
}

/// First-order expansion of z around `expansion`: A is the gradient of z with
/// respect to Φ and the constant makes the expansion tight there.
pub fn sca_surrogate(
    cm: &CouplingMatrices,
    expansion: &CMat,
    rho: f64,
    model: RectennaModel,
) -> Surrogate {
    let n = cm.subbands();
    let (t_i, t_p) = coupling_traces(cm, expansion);
    let t_i0 = t_i[n - 1].re;
    let t_p0 = t_p[n - 1].re;
    let mut a = (cm.info0() + cm.power0()) * c(0.5 * model.beta2 * rho, 0.0);
    if model.beta4 != 0.0 {
        let mut g = cm.info0() * c(2.0 * t_i0 + 2.0 * t_p0, 0.0) + cm.power0() * c(2.0 * t_i0, 0.0);
        for (t, m) in t_p.iter().zip(&cm.power) {
            g += m * t.conj();
        }
        a += g * c(0.75 * model.beta4 * rho * rho, 0.0);
    }
    let matrix = hermitize(&a);
    let z = dc_from_traces(t_i0, &t_p, rho, model);
    let constant = z - trace_product(&matrix, expansion).re;
    Surrogate { matrix, constant }
}

/// A global minorant of z over unit-diagonal PSD Φ, tight at a rank-one
/// unit-diagonal expansion point. The cross term t_I,0·t_P,0 makes the plain
/// expansion fail to bound z from below; subtracting
/// κ‖Φ − Φ̂‖²_F ≤ κ(d² + tr Φ̂² − 2 tr(Φ̂Φ)) with κ = ⅜β₄ρ²‖C_I,0 − C_P,0‖²_F
/// restores the bound.
pub fn corrected_surrogate(
    cm: &CouplingMatrices,
    expansion: &CMat,
    rho: f64,
    model: RectennaModel,
) -> Surrogate {
    let base = sca_surrogate(cm, expansion, rho, model);
    let kappa = 0.375 * model.beta4 * rho * rho * (cm.info0() - cm.power0()).norm_squared();
    if kappa == 0.0 {
        return base;
    }
    let d = expansion.nrows() as f64;
    let self_trace = trace_product(expansion, expansion).re;
    Surrogate {
        matrix: base.matrix + expansion * c(2.0 * kappa, 0.0),
        constant: base.constant - kappa * (d * d + self_trace),
    }
}

/// Leading-eigenvector phases and the rank-one certificate λ₂/λ₁.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseExtraction {
    pub phi: Vec<C64>,
    pub eigen_ratio: f64,
}

/// φ_l = e^{j arg(v_l/v_{L+1})} from the leading eigenvector v of Φ.
pub fn extract_phase(lifted: &CMat) -> Result<PhaseExtraction> {
    let d = lifted.nrows();
    if d == 0 || lifted.ncols() != d {
        return Err(Error::DimensionMismatch(
            "lifted matrix must be square and nonempty".into(),
        ));
    }
    let (values, vectors) = hermitian_eigen(lifted);
    let eigen_ratio = if d > 1 && values[0] > 0.0 {
        (values[1] / values[0]).max(0.0)
    } else {
        0.0
    };
    if eigen_ratio > RANK_ONE_TOL {
        log::warn!("lifted solution is not rank one (λ₂/λ₁ = {eigen_ratio:.3e}); using its leading eigenvector");
    } else {
        log::debug!("lifted solution λ₂/λ₁ = {eigen_ratio:.3e}");
    }
    let v = vectors.column(0);
    let reference = v[d - 1];
    let rot = if reference.norm() > 0.0 {
        reference.conj() / reference.norm()
    } else {
        c(1.0, 0.0)
    };
    let phi = (0..d - 1)
        .map(|l| {
            let x = v[l] * rot;
            if x.norm() > 0.0 {
                x / x.norm()
            } else {
                c(1.0, 0.0)
            }
        })
        .collect();
    Ok(PhaseExtraction { phi, eigen_ratio })
}

/// Exact DC of a phase vector under fixed weights.
pub fn dc_of_phase(
    ch: &ChannelRealization,
    w_info: &[CVec],
    w_power: &[CVec],
    phi: &[C64],
    rho: f64,
    model: RectennaModel,
) -> Result<f64> {
    let h = ch.composite(phi)?;
    Ok(harvested_dc(&dc_terms(&h, w_info, w_power)?, rho, model))
}

/// Exact rate (bits) of a phase vector under fixed information weights.
pub fn rate_of_phase(
    ch: &ChannelRealization,
    w_info: &[CVec],
    phi: &[C64],
    rho: f64,
    noise: &[f64],
) -> Result<f64> {
    let h = ch.composite(phi)?;
    achievable_rate(&h, w_info, rho, noise)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaConfig {
    pub model: RectennaModel,
    pub rho: f64,
    pub noise: Vec<f64>,
    /// Rate floor in bits; zero disables it.
    pub rate_floor: f64,
    /// Relative tolerance on successive z values.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub ipm: IpmSettings,
}

impl ScaConfig {
    pub fn new(
        model: RectennaModel,
        rho: f64,
        noise: Vec<f64>,
        rate_floor: f64,
        epsilon: f64,
    ) -> Self {
        Self {
            model,
            rho,
            noise,
            rate_floor,
            epsilon,
            max_iterations: 100,
            ipm: IpmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaStatus {
    Converged,
    /// Neither surrogate produced an ascent step; the last iterate is kept.
    Stalled,
    IterationLimit,
}

impl fmt::Display for ScaStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::Stalled => "stalled",
            Self::IterationLimit => "iteration-limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    pub phi: Vec<C64>,
    pub z: f64,
    pub rate: f64,
    /// Exact z at the start and after every accepted step.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// Steps that needed the corrected surrogate.
    pub corrected_steps: usize,
    /// Largest λ₂/λ₁ seen at an accepted step.
    pub eigen_ratio: f64,
    pub status: ScaStatus,
}

struct Evaluator<'a> {
    ch: &'a ChannelRealization,
    w_info: &'a [CVec],
    w_power: &'a [CVec],
    cfg: &'a ScaConfig,
}

impl Evaluator<'_> {
    fn z(&self, phi: &[C64]) -> Result<f64> {
        dc_of_phase(
            self.ch,
            self.w_info,
            self.w_power,
            phi,
            self.cfg.rho,
            self.cfg.model,
        )
    }

    fn rate(&self, phi: &[C64]) -> Result<f64> {
        rate_of_phase(self.ch, self.w_info, phi, self.cfg.rho, &self.cfg.noise)
    }

    fn feasible(&self, rate: f64) -> bool {
        self.cfg.rate_floor <= 0.0 || rate >= self.cfg.rate_floor - RATE_TOL
    }
}

fn normalized(a: &CMat) -> CMat {
    let s = a.norm();
    if s > 0.0 {
        a / c(s, 0.0)
    } else {
        a.clone()
    }
}

/// Phases maximizing the rate alone, and that rate.
fn rate_maximizing_phase(
    cm: &CouplingMatrices,
    rho: f64,
    noise: &[f64],
    ipm: &IpmSettings,
) -> Result<PhaseExtraction> {
    let sol = maximize_rate(cm.dim(), &rate_terms(cm, rho, noise), ipm)?;
    extract_phase(&sol.phi)
}

/// Maximizes z over the phases subject to the rate floor in `cfg`, starting
/// from `phi0` (or from the rate-maximizing phases when a floor is set and
/// from all-ones otherwise).
pub fn sca(
    ch: &ChannelRealization,
    w_info: &[CVec],
    w_power: &[CVec],
    cfg: &ScaConfig,
    phi0: Option<&[C64]>,
) -> Result<ScaOutcome> {
    let ev = Evaluator {
        ch,
        w_info,
        w_power,
        cfg,
    };
    let l = ch.irs_elements();
    if cfg.noise.len() != ch.subbands() {
        return Err(Error::DimensionMismatch(format!(
            "{} noise levels for {} subbands",
            cfg.noise.len(),
            ch.subbands()
        )));
    }
    if l == 0 {
        let z = ev.z(&[])?;
        let rate = ev.rate(&[])?;
        if !ev.feasible(rate) {
            return Err(Error::Infeasible {
                requested: cfg.rate_floor,
                achievable: rate,
            });
        }
        return Ok(ScaOutcome {
            phi: Vec::new(),
            z,
            rate,
            history: vec![z],
            iterations: 0,
            corrected_steps: 0,
            eigen_ratio: 0.0,
            status: ScaStatus::Converged,
        });
    }
    let cm = build_coupling(ch, w_info, w_power)?;
    let terms = rate_terms(&cm, cfg.rho, &cfg.noise);

    let mut phi = match phi0 {
        Some(p) => {
            if p.len() != l {
                return Err(Error::DimensionMismatch(format!(
                    "{} initial phases for {l} elements",
                    p.len()
                )));
            }
            check_unit_modulus(p)?;
            p.to_vec()
        }
        None if cfg.rate_floor > 0.0 => {
            rate_maximizing_phase(&cm, cfg.rho, &cfg.noise, &cfg.ipm)?.phi
        }
        None => vec![c(1.0, 0.0); l],
    };
    let mut rate = ev.rate(&phi)?;
    if !ev.feasible(rate) {
        let fallback = rate_maximizing_phase(&cm, cfg.rho, &cfg.noise, &cfg.ipm)?.phi;
        let r = ev.rate(&fallback)?;
        if !ev.feasible(r) {
            return Err(Error::Infeasible {
                requested: cfg.rate_floor,
                achievable: r.max(rate),
            });
        }
        log::debug!("initial phases miss the rate floor; starting from the rate-maximizing phases");
        phi = fallback;
        rate = r;
    }
    let mut z = ev.z(&phi)?;
    let mut history = vec![z];
    let mut corrected_steps = 0;
    let mut eigen_ratio: f64 = 0.0;
    let mut status = ScaStatus::IterationLimit;
    let mut iterations = 0;

    for _ in 0..cfg.max_iterations {
        iterations += 1;
        let expansion = lifted_matrix(&phi);
        let capacity_hint = crate::solver::psd::rate_of(&terms, &expansion);
        let mut step = None;
        for corrected in [false, true] {
            let sur = if corrected {
                corrected_surrogate(&cm, &expansion, cfg.rho, cfg.model)
            } else {
                sca_surrogate(&cm, &expansion, cfg.rho, cfg.model)
            };
            if sur.matrix.norm() == 0.0 {
                break;
            }
            let problem = PsdSubproblem {
                objective: normalized(&sur.matrix),
                rate_terms: terms.clone(),
                rate_floor: cfg.rate_floor,
                include_rate: cfg.rate_floor > 0.0,
            };
            let sol = solve_psd_given_capacity(&problem, capacity_hint, &cfg.ipm)?;
            if sol.status == PsdStatus::Infeasible {
                return Err(Error::Infeasible {
                    requested: cfg.rate_floor,
                    achievable: sol.rate,
                });
            }
            let ext = extract_phase(&sol.phi)?;
            let z_new = ev.z(&ext.phi)?;
            let r_new = ev.rate(&ext.phi)?;
            if z_new >= z && ev.feasible(r_new) {
                if corrected {
                    corrected_steps += 1;
                }
                step = Some((ext, z_new, r_new));
                break;
            }
            log::debug!(
                "{} surrogate step lowers z ({z:e} -> {z_new:e})",
                if corrected { "corrected" } else { "plain" }
            );
        }
        let Some((ext, z_new, r_new)) = step else {
            status = ScaStatus::Stalled;
            break;
        };
        let done = (z_new - z).abs() <= cfg.epsilon * z_new.abs();
        eigen_ratio = eigen_ratio.max(ext.eigen_ratio);
        phi = ext.phi;
        z = z_new;
        rate = r_new;
        history.push(z);
        if done {
            status = ScaStatus::Converged;
            break;
        }
    }
    Ok(ScaOutcome {
        phi,
        z,
        rate,
        history,
        iterations,
        corrected_steps,
        eigen_ratio,
        status,
    })
}

/// Phase design without a rate floor: rate maximization when ρ = 0 and
/// unconstrained SCA on z otherwise.
pub fn m_sca(
    ch: &ChannelRealization,
    w_info: &[CVec],
    w_power: &[CVec],
    cfg: &ScaConfig,
    phi0: Option<&[C64]>,
) -> Result<ScaOutcome> {
    if cfg.rho > 0.0 {
        let free = ScaConfig {
            rate_floor: 0.0,
            ..cfg.clone()
        };
        return sca(ch, w_info, w_power, &free, phi0);
    }
    let ev = Evaluator {
        ch,
        w_info,
        w_power,
        cfg,
    };
    let l = ch.irs_elements();
    let (phi, eigen_ratio) = if l == 0 {
        (Vec::new(), 0.0)
    } else {
        let cm = build_coupling(ch, w_info, w_power)?;
        let ext = rate_maximizing_phase(&cm, 0.0, &cfg.noise, &cfg.ipm)?;
        (ext.phi, ext.eigen_ratio)
    };
    let z = ev.z(&phi)?;
    let rate = ev.rate(&phi)?;
    Ok(ScaOutcome {
        phi,
        z,
        rate,
        history: vec![z],
        iterations: 1,
        corrected_steps: 0,
        eigen_ratio,
        status: ScaStatus::Converged,
    })
}

/// Frequency-selective reflection: each subband gets its own phases, aligning
/// every cascaded path with the direct path as seen through w_I,n + w_P,n.
/// This maximizes each |h_nᴴw_n| separately.
pub fn cophase_per_subband(
    ch: &ChannelRealization,
    w_info: &[CVec],
    w_power: &[CVec],
) -> Result<Vec<Vec<C64>>> {
    let combined: Vec<CVec> = w_info.iter().zip(w_power).map(|(a, b)| a + b).collect();
    if w_info.len() != w_power.len() {
        return Err(Error::DimensionMismatch(
            "information and power weights differ in length".into(),
        ));
    }
    let u = lifted_responses(ch, &combined)?;
    let l = ch.irs_elements();
    Ok(u.iter()
        .map(|u| {
            let direct = u[l];
            let reference = if direct.norm() > 0.0 {
                direct / direct.norm()
            } else {
                c(1.0, 0.0)
            };
            // a = direct + Σ φ_l*·u_l, so φ_l* must carry the phase of direct/u_l.
            (0..l)
                .map(|i| {
                    let x = u[i] * reference.conj();
                    if x.norm() > 0.0 {
                        x / x.norm()
                    } else {
                        c(1.0, 0.0)
                    }
                })
                .collect()
        })
        .collect())
}
