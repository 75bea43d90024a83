//! Amplitude and splitting-ratio design under MRT.
//!
//! With MRT the received amplitude on subband n is ‖h_n‖·s_n, so the DC model
//! becomes a posynomial in (s_I, s_P, ρ). [`gp`] maximizes it subject to a
//! rate floor by successive AM-GM condensation into geometric programs.
//! [`water_filling`], [`smf`] and [`superposed_lc`] are the closed-form
//! low-complexity allocations.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::rectenna::RectennaModel;
use crate::solver::gp::{solve_gp, GeometricProgram, GpStatus, Monomial, Posynomial};
use crate::solver::psd::IpmSettings;
use crate::{Error, Result};

/// Amplitude floor relative to √P while iterating in the log domain.
pub const AMPLITUDE_FLOOR: f64 = 1e-12;
/// Amplitudes below this fraction of √P are reported as zero.
pub const AMPLITUDE_THRESHOLD: f64 = 1e-6;
const RATIO_FLOOR: f64 = 1e-12;
const INTERIOR: f64 = 1e-6;
const WF_TOL: f64 = 1e-12;
const PRUNE_RATIO: f64 = 1e-2;

/// Ordered index quadruples (n₁, n₂, n₃, n₄) with n₁ + n₂ = n₃ + n₄, cached
/// per N. There are (2N³ + N)/3 of them.
pub fn quadruples(n: usize) -> Arc<Vec<[usize; 4]>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<[usize; 4]>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut out = Vec::new();
            for n1 in 0..n {
                for n2 in 0..n {
                    for n3 in 0..n {
                        let s = n1 + n2;
                        if s >= n3 && s - n3 < n {
                            out.push([n1, n2, n3, s - n3]);
                        }
                    }
                }
            }
            Arc::new(out)
        })
        .clone()
}

/// Which block of the DC posynomial a monomial belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonomialKind {
    SecondOrderInfo,
    SecondOrderPower,
    FourthOrderInfo,
    FourthOrderPower,
    FourthOrderCross,
}

/// coeff·∏ x_v^{a_v} over the variables (s_I[0..N], s_P[0..N], ρ).
#[derive(Debug, Clone, PartialEq)]
pub struct DcMonomial {
    pub kind: MonomialKind,
    pub coeff: f64,
    pub exponents: Vec<(usize, f64)>,
}

impl DcMonomial {
    fn new(kind: MonomialKind, coeff: f64, vars: &[usize]) -> Self {
        let mut exponents: Vec<(usize, f64)> = Vec::new();
        for &v in vars {
            match exponents.iter_mut().find(|(i, _)| *i == v) {
                Some(e) => e.1 += 1.0,
                None => exponents.push((v, 1.0)),
            }
        }
        exponents.sort_by_key(|e| e.0);
        Self {
            kind,
            coeff,
            exponents,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .fold(self.coeff, |acc, &(v, a)| acc * x[v].powf(a))
    }
}

/// The DC model as a posynomial in (s_I, s_P, ρ) for fixed channel gains.
#[derive(Debug, Clone, PartialEq)]
pub struct DcPosynomial {
    pub subbands: usize,
    pub monomials: Vec<DcMonomial>,
}

impl DcPosynomial {
    pub fn new(h_norms: &[f64], model: RectennaModel) -> Self {
        let n = h_norms.len();
        let (si, sp, rho) = (|k: usize| k, |k: usize| n + k, 2 * n);
        let h = h_norms;
        let mut monomials = Vec::new();
        let mut push = |kind, coeff: f64, vars: &[usize]| {
            if coeff > 0.0 {
                monomials.push(DcMonomial::new(kind, coeff, vars));
            }
        };
        for k in 0..n {
            let c = 0.5 * model.beta2 * h[k] * h[k];
            push(MonomialKind::SecondOrderInfo, c, &[si(k), si(k), rho]);
            push(MonomialKind::SecondOrderPower, c, &[sp(k), sp(k), rho]);
        }
        if model.beta4 > 0.0 {
            for a in 0..n {
                for b in 0..n {
                    let c = 0.75 * model.beta4 * (h[a] * h[b]).powi(2);
                    push(
                        MonomialKind::FourthOrderInfo,
                        c,
                        &[si(a), si(a), si(b), si(b), rho, rho],
                    );
                }
            }
            for q in quadruples(n).iter() {
                let c = 0.375 * model.beta4 * q.iter().map(|&k| h[k]).product::<f64>();
                push(
                    MonomialKind::FourthOrderPower,
                    c,
                    &[sp(q[0]), sp(q[1]), sp(q[2]), sp(q[3]), rho, rho],
                );
            }
            for a in 0..n {
                for b in 0..n {
                    let c = 1.5 * model.beta4 * (h[a] * h[b]).powi(2);
                    push(
                        MonomialKind::FourthOrderCross,
                        c,
                        &[si(a), si(a), sp(b), sp(b), rho, rho],
                    );
                }
            }
        }
        Self {
            subbands: n,
            monomials,
        }
    }

    fn point(s_info: &[f64], s_power: &[f64], rho: f64) -> Vec<f64> {
        s_info.iter().chain(s_power).copied().chain([rho]).collect()
    }

    pub fn values(&self, s_info: &[f64], s_power: &[f64], rho: f64) -> Vec<f64> {
        let x = Self::point(s_info, s_power, rho);
        self.monomials.iter().map(|m| m.value(&x)).collect()
    }

    pub fn evaluate(&self, s_info: &[f64], s_power: &[f64], rho: f64) -> f64 {
        self.values(s_info, s_power, rho).iter().sum()
    }
}

/// z(s_I, s_P, ρ) under MRT together with the monomial decomposition.
pub fn dc_posynomial(
    h_norms: &[f64],
    s_info: &[f64],
    s_power: &[f64],
    rho: f64,
    model: RectennaModel,
) -> (f64, DcPosynomial) {
    let p = DcPosynomial::new(h_norms, model);
    (p.evaluate(s_info, s_power, rho), p)
}

/// Σ_n log₂(1 + (1−ρ)‖h_n‖²s_I,n²/σ_n²).
pub fn rate_mrt(h_norms: &[f64], s_info: &[f64], rho: f64, noise: &[f64]) -> f64 {
    h_norms
        .iter()
        .zip(s_info)
        .zip(noise)
        .map(|((h, s), n)| ((1.0 - rho) * (h * s).powi(2) / n).log2_1p())
        .sum()
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

fn check_lengths(h_norms: &[f64], noise: &[f64]) -> Result<()> {
    if h_norms.len() != noise.len() || h_norms.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} channel gains and {} noise levels",
            h_norms.len(),
            noise.len()
        )));
    }
    Ok(())
}

fn power_of(s: &[f64]) -> f64 {
    0.5 * s.iter().map(|v| v * v).sum::<f64>()
}

fn scale_to_power(s: &mut [f64], power: f64) {
    let current = power_of(s);
    if current > 0.0 {
        let k = (power / current).sqrt();
        s.iter_mut().for_each(|v| *v *= k);
    }
}

/// Capacity-achieving allocation: s_I,n = √(2P(λ − σ_n²/(P‖h_n‖²))⁺) with
/// Σ_n (λ − σ_n²/(P‖h_n‖²))⁺ = 1.
pub fn water_filling(h_norms: &[f64], power: f64, noise: &[f64]) -> Result<Vec<f64>> {
    check_lengths(h_norms, noise)?;
    if !(power > 0.0) {
        return Err(Error::Domain(format!(
            "power budget must be positive, got {power}"
        )));
    }
    if h_norms.iter().all(|&h| h == 0.0) {
        return Err(Error::Domain(
            "water-filling over an all-zero channel".into(),
        ));
    }
    let floor: Vec<f64> = h_norms
        .iter()
        .zip(noise)
        .map(|(&h, &n)| {
            if h > 0.0 {
                n / (power * h * h)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let fill = |level: f64| floor.iter().map(|&x| (level - x).max(0.0)).sum::<f64>();
    let lowest = floor.iter().cloned().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (lowest, lowest + 1.0);
    while hi - lo > WF_TOL * hi.abs().max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fill(mid) >= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut s: Vec<f64> = floor
        .iter()
        .map(|&x| (2.0 * power * (hi - x).max(0.0)).sqrt())
        .collect();
    scale_to_power(&mut s, power);
    Ok(s)
}

/// Rate of the water-filling allocation with all power modulated and ρ = 0.
pub fn capacity(h_norms: &[f64], power: f64, noise: &[f64]) -> Result<f64> {
    let s = water_filling(h_norms, power, noise)?;
    Ok(rate_mrt(h_norms, &s, 0.0, noise))
}

/// Scaled matched filter: s_P,n ∝ ‖h_n‖^α with ‖s_P‖²/2 = P.
pub fn smf(h_norms: &[f64], power: f64, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha >= 1.0) {
        return Err(Error::Domain(format!(
            "SMF exponent must be at least 1, got {alpha}"
        )));
    }
    let total: f64 = h_norms.iter().map(|h| h.powf(2.0 * alpha)).sum();
    if !(total > 0.0) {
        return Err(Error::Domain("SMF over an all-zero channel".into()));
    }
    let k = (2.0 * power / total).sqrt();
    let mut s: Vec<f64> = h_norms.iter().map(|h| k * h.powf(alpha)).collect();
    scale_to_power(&mut s, power);
    Ok(s)
}

/// √(1−δ)·water-filling superposed with √δ·SMF.
pub fn superposed_lc(
    h_norms: &[f64],
    power: f64,
    delta: f64,
    noise: &[f64],
    alpha: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Domain(format!(
            "combining ratio must lie in [0, 1], got {delta}"
        )));
    }
    let wf = water_filling(h_norms, power, noise)?;
    let sm = smf(h_norms, power, alpha)?;
    let a = (1.0 - delta).sqrt();
    let b = delta.sqrt();
    Ok((
        wf.iter().map(|v| a * v).collect(),
        sm.iter().map(|v| b * v).collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveformStatus {
    Converged,
    IterationLimit,
    /// The rate floor equals the capacity; the water-filling design is returned.
    RateBoundary,
}

impl fmt::Display for WaveformStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::IterationLimit => "iteration-limit",
            Self::RateBoundary => "rate-boundary",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    pub model: RectennaModel,
    pub power: f64,
    pub noise: Vec<f64>,
    /// Rate floor in bits.
    pub rate_floor: f64,
    /// Relative tolerance on successive z values.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub ipm: IpmSettings,
}

impl GpConfig {
    pub fn new(
        model: RectennaModel,
        power: f64,
        noise: Vec<f64>,
        rate_floor: f64,
        epsilon: f64,
    ) -> Self {
        Self {
            model,
            power,
            noise,
            rate_floor,
            epsilon,
            max_iterations: 200,
            ipm: IpmSettings::default(),
        }
    }
}

/// Starting amplitudes and splitting ratio for [`gp`].
#[derive(Debug, Clone, PartialEq)]
pub struct GpStart {
    pub s_info: Vec<f64>,
    pub s_power: Vec<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpOutcome {
    pub s_info: Vec<f64>,
    pub s_power: Vec<f64>,
    pub rho: f64,
    pub rho_bar: f64,
    pub z: f64,
    pub rate: f64,
    /// z at the start point and after every condensation step.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub status: WaveformStatus,
}

/// AM-GM weights γ_m = g_m/Σg of a posynomial at the current point.
pub fn amgm_weights(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    values.iter().map(|v| v / total).collect()
}

/// Log of the condensed monomial ∏(g_m/γ_m)^{γ_m} evaluated where ln g_m = `logs`.
pub fn condensed_log(weights: &[f64], logs: &[f64]) -> f64 {
    weights
        .iter()
        .zip(logs)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, l)| w * (l - w.ln()))
        .sum()
}

struct Layout {
    n: usize,
}

impl Layout {
    fn si(&self, k: usize) -> usize {
        k
    }
    fn sp(&self, k: usize) -> usize {
        self.n + k
    }
    fn rho(&self) -> usize {
        2 * self.n
    }
    fn rho_bar(&self) -> usize {
        2 * self.n + 1
    }
    fn t(&self) -> usize {
        2 * self.n + 2
    }
    fn vars(&self) -> usize {
        2 * self.n + 3
    }
}

/// Waveform amplitudes and splitting ratio maximizing z subject to
/// R ≥ `cfg.rate_floor` and the power budget.
pub fn gp(h_norms: &[f64], cfg: &GpConfig, init: Option<&GpStart>) -> Result<GpOutcome> {
    check_lengths(h_norms, &cfg.noise)?;
    let n = h_norms.len();
    let power = cfg.power;
    let wf = water_filling(h_norms, power, &cfg.noise)?;
    let cap = rate_mrt(h_norms, &wf, 0.0, &cfg.noise);
    if cfg.rate_floor > cap * (1.0 + 1e-9) {
        return Err(Error::Infeasible {
            requested: cfg.rate_floor,
            achievable: cap,
        });
    }
    let posy = DcPosynomial::new(h_norms, cfg.model);
    if cfg.rate_floor >= cap * (1.0 - 1e-9) {
        let z = posy.evaluate(&wf, &vec![0.0; n], 0.0);
        return Ok(GpOutcome {
            s_info: wf,
            s_power: vec![0.0; n],
            rho: 0.0,
            rho_bar: 1.0,
            z,
            rate: cap,
            history: vec![z],
            iterations: 0,
            status: WaveformStatus::RateBoundary,
        });
    }

    let lay = Layout { n };
    let s_floor = AMPLITUDE_FLOOR * power.sqrt();
    let rate_of = |x: &[f64]| -> f64 {
        (0..n)
            .map(|k| {
                (x[lay.rho_bar()] * (h_norms[k] * x[lay.si(k)]).powi(2) / cfg.noise[k]).log2_1p()
            })
            .sum()
    };
    let z_of = |x: &[f64]| posy.evaluate(&x[..n], &x[n..2 * n], x[lay.rho()]);

    let mut x = start_point(cfg, init, &wf, cap, &lay, &rate_of);
    let mut z = z_of(&x);
    let mut history = vec![z];
    let mut status = WaveformStatus::IterationLimit;
    let mut iterations = 0;

    let log_coeffs: Vec<f64> = posy.monomials.iter().map(|m| m.coeff.ln()).collect();
    for _ in 0..cfg.max_iterations {
        iterations += 1;
        let program = condensed_program(h_norms, cfg, &posy, &log_coeffs, &x, &lay, s_floor, z);
        let mut x0 = x.clone();
        x0[lay.t()] = z * (1.0 - INTERIOR);
        let sol = solve_gp(&program, &x0, &cfg.ipm)?;
        if sol.status == GpStatus::Infeasible {
            return Err(Error::Numerical("condensed GP lost feasibility".into()));
        }
        let z_new = z_of(&sol.x);
        if !(z_new >= z) || rate_of(&sol.x) < cfg.rate_floor {
            log::debug!("GP step rejected: z {z:e} -> {z_new:e}");
            status = WaveformStatus::Converged;
            break;
        }
        let done = (z_new - z).abs() <= cfg.epsilon * z_new.abs();
        x = sol.x;
        z = z_new;
        history.push(z);
        if done {
            status = WaveformStatus::Converged;
            break;
        }
    }

    // Report: drop negligible amplitudes, use the full budget, no wasted split.
    let (rho, rho_bar) = if cfg.rate_floor <= 0.0 {
        (1.0, 0.0)
    } else {
        (x[lay.rho()], 1.0 - x[lay.rho()])
    };
    let threshold = AMPLITUDE_THRESHOLD * power.sqrt();
    let clean = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&a| if a < threshold { 0.0 } else { a })
            .collect()
    };
    let mut best = rescaled(clean(&x[..n]), clean(&x[n..2 * n]), power);
    // Amplitudes heading to zero do so only geometrically; try the limit directly.
    let largest = x[..2 * n].iter().cloned().fold(0.0, f64::max);
    let prune = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&a| if a < PRUNE_RATIO * largest { 0.0 } else { a })
            .collect()
    };
    let mut candidates = vec![
        rescaled(prune(&best.0), prune(&best.1), power),
        rescaled(best.0.clone(), vec![0.0; n], power),
    ];
    if cfg.rate_floor <= 0.0 {
        candidates.push(rescaled(vec![0.0; n], best.1.clone(), power));
    }
    let mut z_best = posy.evaluate(&best.0, &best.1, rho);
    for cand in candidates {
        let z_c = posy.evaluate(&cand.0, &cand.1, rho);
        let feasible =
            cfg.rate_floor <= 0.0 || rate_mrt(h_norms, &cand.0, rho, &cfg.noise) >= cfg.rate_floor;
        if feasible && z_c > z_best {
            log::debug!("pruned support improves z {z_best:e} -> {z_c:e}");
            z_best = z_c;
            best = cand;
        }
    }
    let (s_info, s_power) = best;
    let z_final = z_best;
    let rate = rate_mrt(h_norms, &s_info, rho, &cfg.noise);
    Ok(GpOutcome {
        s_info,
        s_power,
        rho,
        rho_bar,
        z: z_final,
        rate,
        history,
        iterations,
        status,
    })
}

#[allow(clippy::too_many_arguments)]
fn condensed_program(
    h_norms: &[f64],
    cfg: &GpConfig,
    posy: &DcPosynomial,
    log_coeffs: &[f64],
    x: &[f64],
    lay: &Layout,
    s_floor: f64,
    z: f64,
) -> GeometricProgram {
    let n = lay.n;
    let mut constraints = Vec::new();

    // t ≤ ∏(g_m/γ_m)^{γ_m}
    let values: Vec<f64> = posy
        .monomials
        .iter()
        .map(|m| m.value(&x[..=2 * n]))
        .collect();
    let gamma = amgm_weights(&values);
    let mut log_coeff = 0.0;
    let mut expo = vec![0.0; lay.vars()];
    expo[lay.t()] = 1.0;
    for ((m, &g), &lc) in posy.monomials.iter().zip(&gamma).zip(log_coeffs) {
        if g > 0.0 {
            log_coeff -= g * (lc - g.ln());
            for &(v, a) in &m.exponents {
                expo[v] -= g * a;
            }
        }
    }
    constraints.push(Posynomial {
        terms: vec![sparse(log_coeff, &expo)],
    });

    // 2^R̄ ≤ ∏_n (1/γ₁)^{γ₁}(ρ̄‖h‖²s²/(σ²γ₂))^{γ₂}
    if cfg.rate_floor > 0.0 {
        let mut log_coeff = cfg.rate_floor * std::f64::consts::LN_2;
        let mut expo = vec![0.0; lay.vars()];
        for k in 0..n {
            let gain = (h_norms[k] / cfg.noise[k].sqrt()).powi(2);
            let snr = x[lay.rho_bar()] * gain * x[lay.si(k)].powi(2);
            if !(snr > 0.0) {
                continue;
            }
            let g1 = 1.0 / (1.0 + snr);
            let g2 = snr / (1.0 + snr);
            log_coeff -= g1 * (-g1.ln());
            if g2 > 0.0 {
                log_coeff -= g2 * (gain.ln() - g2.ln());
                expo[lay.si(k)] -= 2.0 * g2;
                expo[lay.rho_bar()] -= g2;
            }
        }
        constraints.push(Posynomial {
            terms: vec![sparse(log_coeff, &expo)],
        });
    }

    // ½Σ(s_I² + s_P²) ≤ P
    let mut terms = Vec::new();
    for k in 0..n {
        terms.push(Monomial::new(0.5 / cfg.power, vec![(lay.si(k), 2.0)]));
        terms.push(Monomial::new(0.5 / cfg.power, vec![(lay.sp(k), 2.0)]));
    }
    constraints.push(Posynomial { terms });
    // ρ + ρ̄ ≤ 1
    constraints.push(Posynomial {
        terms: vec![
            Monomial::new(1.0, vec![(lay.rho(), 1.0)]),
            Monomial::new(1.0, vec![(lay.rho_bar(), 1.0)]),
        ],
    });
    // Floors keep the log-domain problem bounded.
    for k in 0..n {
        constraints.push(Posynomial {
            terms: vec![Monomial::new(s_floor, vec![(lay.si(k), -1.0)])],
        });
        constraints.push(Posynomial {
            terms: vec![Monomial::new(s_floor, vec![(lay.sp(k), -1.0)])],
        });
    }
    constraints.push(Posynomial {
        terms: vec![Monomial::new(RATIO_FLOOR, vec![(lay.rho(), -1.0)])],
    });
    constraints.push(Posynomial {
        terms: vec![Monomial::new(RATIO_FLOOR, vec![(lay.rho_bar(), -1.0)])],
    });
    constraints.push(Posynomial {
        terms: vec![Monomial::new(1e-6 * z, vec![(lay.t(), -1.0)])],
    });

    GeometricProgram {
        n_vars: lay.vars(),
        objective: Monomial::new(1.0, vec![(lay.t(), -1.0)]),
        constraints,
    }
}

fn rescaled(mut s_info: Vec<f64>, mut s_power: Vec<f64>, power: f64) -> (Vec<f64>, Vec<f64>) {
    let total = power_of(&s_info) + power_of(&s_power);
    if total > 0.0 {
        let k = (power / total).sqrt();
        s_info
            .iter_mut()
            .chain(s_power.iter_mut())
            .for_each(|v| *v *= k);
    }
    (s_info, s_power)
}

fn sparse(log_coeff: f64, expo: &[f64]) -> Monomial {
    Monomial {
        log_coeff,
        exponents: expo
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(i, a)| (i, *a))
            .collect(),
    }
}

/// Strictly interior starting point with rate above the floor.
fn start_point(
    cfg: &GpConfig,
    init: Option<&GpStart>,
    wf: &[f64],
    cap: f64,
    lay: &Layout,
    rate_of: &dyn Fn(&[f64]) -> f64,
) -> Vec<f64> {
    let n = lay.n;
    let power = cfg.power;
    let lift = 10.0 * AMPLITUDE_FLOOR * power.sqrt();
    let assemble = |si: &[f64], sp: &[f64], rho: f64| -> Vec<f64> {
        let mut si: Vec<f64> = si.iter().map(|v| v.max(lift)).collect();
        let mut sp: Vec<f64> = sp.iter().map(|v| v.max(lift)).collect();
        let total = power_of(&si) + power_of(&sp);
        let k = (power * (1.0 - INTERIOR) / total).sqrt();
        si.iter_mut().chain(sp.iter_mut()).for_each(|v| *v *= k);
        let rho = rho.clamp(INTERIOR, 1.0 - INTERIOR);
        let mut x = vec![0.0; lay.vars()];
        x[..n].copy_from_slice(&si);
        x[n..2 * n].copy_from_slice(&sp);
        x[lay.rho()] = rho * (1.0 - INTERIOR);
        x[lay.rho_bar()] = (1.0 - rho) * (1.0 - INTERIOR);
        x[lay.t()] = 1.0;
        x
    };
    let feasible = |x: &[f64]| cfg.rate_floor <= 0.0 || rate_of(x) > cfg.rate_floor;

    if let Some(s) = init {
        let x = assemble(&s.s_info, &s.s_power, s.rho);
        if feasible(&x) {
            return x;
        }
    }
    let uniform = vec![(power / n as f64).sqrt(); n];
    let x = assemble(&uniform, &uniform, 0.5);
    if feasible(&x) {
        return x;
    }
    // Blend the capacity-achieving point with the uniform multisine, keeping
    // the rate a tenth of the way from the floor to capacity.
    let ms = vec![(2.0 * power / n as f64).sqrt(); n];
    let blend = |u: f64| {
        let si: Vec<f64> = wf.iter().map(|v| (1.0 - u).sqrt() * v).collect();
        let sp: Vec<f64> = ms.iter().map(|v| u.sqrt() * v).collect();
        assemble(&si, &sp, u)
    };
    let target = cfg.rate_floor + 0.1 * (cap - cfg.rate_floor);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if rate_of(&blend(mid)) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    blend(lo)
}
