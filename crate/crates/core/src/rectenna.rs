//! Rate and harvested-DC metrics of superposed modulated/multisine waveforms.
//!
//! Channels and weights are handled per subband (`&[CVec]`, one length-M vector
//! per subband). [`stack`] and [`block_diag`] expose the equivalent stacked
//! MN-dimensional form used to express the frequency coupling of the
//! fourth-order terms.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{c, CMat, CVec, C64};
use crate::{Error, Result};

const UNIT_NORM_TOL: f64 = 1e-9;
const POWER_TOL: f64 = 1e-9;

/// Truncated diode model coefficients β₂ = k₂R_A and β₄ = k₄R_A².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectennaModel {
    pub beta2: f64,
    pub beta4: f64,
}

impl RectennaModel {
    /// k₂ = 0.0034, k₄ = 0.3829, R_A = 50 Ω.
    pub const REFERENCE: Self = Self {
        beta2: 0.17,
        beta4: 957.25,
    };

    pub fn from_diode(k2: f64, k4: f64, antenna_resistance: f64) -> Self {
        Self {
            beta2: k2 * antenna_resistance,
            beta4: k4 * antenna_resistance.powi(2),
        }
    }

    /// Second-order truncation of the same diode.
    pub fn linear(self) -> Self {
        Self { beta4: 0.0, ..self }
    }
}

/// Per-subband amplitudes, precoders and receiver ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformDesign {
    pub s_info: Vec<f64>,
    pub s_power: Vec<f64>,
    pub b_info: Vec<CVec>,
    pub b_power: Vec<CVec>,
    pub rho: f64,
    pub rho_bar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl WaveformDesign {
    /// w_I,n = s_I,n·b_I,n.
    pub fn info_weights(&self) -> Vec<CVec> {
        self.b_info
            .iter()
            .zip(&self.s_info)
            .map(|(b, &s)| b * c(s, 0.0))
            .collect()
    }

    /// w_P,n = s_P,n·b_P,n.
    pub fn power_weights(&self) -> Vec<CVec> {
        self.b_power
            .iter()
            .zip(&self.s_power)
            .map(|(b, &s)| b * c(s, 0.0))
            .collect()
    }

    /// (‖s_I‖² + ‖s_P‖²)/2.
    pub fn transmit_power(&self) -> f64 {
        0.5 * self
            .s_info
            .iter()
            .chain(&self.s_power)
            .map(|s| s * s)
            .sum::<f64>()
    }

    pub fn validate(&self, power_budget: f64) -> Result<()> {
        let n = self.s_info.len();
        if self.s_power.len() != n || self.b_info.len() != n || self.b_power.len() != n {
            return Err(Error::DimensionMismatch(
                "waveform components disagree on N".into(),
            ));
        }
        if self
            .s_info
            .iter()
            .chain(&self.s_power)
            .any(|&s| !(s >= 0.0 && s.is_finite()))
        {
            return Err(Error::InvariantViolation(
                "amplitudes must be nonnegative".into(),
            ));
        }
        for b in self.b_info.iter().chain(&self.b_power) {
            if (b.norm() - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvariantViolation(format!(
                    "precoder norm {}",
                    b.norm()
                )));
            }
        }
        if self.transmit_power() > power_budget * (1.0 + POWER_TOL) {
            return Err(Error::InvariantViolation(format!(
                "transmit power {} exceeds budget {}",
                self.transmit_power(),
                power_budget
            )));
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.rho) || !unit(self.rho_bar) || self.rho + self.rho_bar > 1.0 + POWER_TOL {
            return Err(Error::InvariantViolation(format!(
                "splitting ratios rho={} rho_bar={}",
                self.rho, self.rho_bar
            )));
        }
        if self.delta.is_some_and(|d| !unit(d)) || self.eta.is_some_and(|e| !unit(e)) {
            return Err(Error::InvariantViolation(
                "delta and eta must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// The four averaged signal moments entering the DC model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcTerms {
    pub y_i2: f64,
    pub y_i4: f64,
    pub y_p2: f64,
    pub y_p4: f64,
}

/// Stacks per-subband vectors into one MN vector.
pub fn stack(parts: &[CVec]) -> CVec {
    let total = parts.iter().map(|p| p.len()).sum();
    CVec::from_iterator(total, parts.iter().flat_map(|p| p.iter().copied()))
}

/// Keeps the M×M blocks (n₁, n₂) of `w` with n₂ − n₁ = k and zeroes the rest.
pub fn block_diag(w: &CMat, block: usize, k: isize) -> Result<CMat> {
    if block == 0 || w.nrows() != w.ncols() || w.nrows() % block != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix is not a square stack of {block}x{block} blocks",
            w.nrows(),
            w.ncols()
        )));
    }
    let n = (w.nrows() / block) as isize;
    if k.abs() >= n {
        return Err(Error::Domain(format!(
            "block offset {k} out of range for N = {n}"
        )));
    }
    Ok(CMat::from_fn(w.nrows(), w.ncols(), |i, j| {
        if (j / block) as isize - (i / block) as isize == k {
            w[(i, j)]
        } else {
            c(0.0, 0.0)
        }
    }))
}

fn check_dims(h: &[CVec], w: &[CVec], what: &str) -> Result<()> {
    if h.len() != w.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} channels but {} {what} weights",
            h.len(),
            w.len()
        )));
    }
    for (n, (hn, wn)) in h.iter().zip(w).enumerate() {
        if hn.len() != wn.len() {
            return Err(Error::DimensionMismatch(format!(
                "subband {n}: channel length {} vs {what} weight length {}",
                hn.len(),
                wn.len()
            )));
        }
    }
    Ok(())
}

/// Per-subband received amplitudes h_nᴴw_n.
pub fn received_amplitudes(h: &[CVec], w: &[CVec]) -> Vec<C64> {
    h.iter().zip(w).map(|(hn, wn)| hn.dotc(wn)).collect()
}

/// Σ_{n₂−n₁=k} a_{n₁}a_{n₂}* for k = −(N−1)..N−1, indexed by k + N − 1.
pub fn coupling_sums(a: &[C64]) -> Vec<C64> {
    let n = a.len();
    let mut t = vec![c(0.0, 0.0); 2 * n - 1];
    for n1 in 0..n {
        for n2 in 0..n {
            t[n2 + n - 1 - n1] += a[n1] * a[n2].conj();
        }
    }
    t
}

pub fn dc_terms(h: &[CVec], w_info: &[CVec], w_power: &[CVec]) -> Result<DcTerms> {
    check_dims(h, w_info, "information")?;
    check_dims(h, w_power, "power")?;
    let a_i = received_amplitudes(h, w_info);
    let a_p = received_amplitudes(h, w_power);
    let t_i0: f64 = a_i.iter().map(|a| a.norm_sqr()).sum();
    let t_p0: f64 = a_p.iter().map(|a| a.norm_sqr()).sum();
    let y_p4 = if a_p.is_empty() {
        0.0
    } else {
        0.375
            * coupling_sums(&a_p)
                .iter()
                .map(|t| t.norm_sqr())
                .sum::<f64>()
    };
    Ok(DcTerms {
        y_i2: 0.5 * t_i0,
        y_i4: 0.75 * t_i0 * t_i0,
        y_p2: 0.5 * t_p0,
        y_p4,
    })
}

pub fn harvested_dc(terms: &DcTerms, rho: f64, model: RectennaModel) -> f64 {
    model.beta2 * rho * (terms.y_i2 + terms.y_p2)
        + model.beta4 * rho * rho * (terms.y_i4 + terms.y_p4 + 6.0 * terms.y_i2 * terms.y_p2)
}

/// Σ_n log₂(1 + (1−ρ)|h_nᴴw_I,n|²/σ_n²) in bits.
pub fn achievable_rate(h: &[CVec], w_info: &[CVec], rho: f64, noise: &[f64]) -> Result<f64> {
    check_dims(h, w_info, "information")?;
    if noise.len() != h.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} noise levels for {} subbands",
            noise.len(),
            h.len()
        )));
    }
    Ok(received_amplitudes(h, w_info)
        .iter()
        .zip(noise)
        .map(|(a, s2)| (1.0 + (1.0 - rho) * a.norm_sqr() / s2).log2())
        .sum())
}

/// Per-subband rates in bits.
pub fn subband_rates(h: &[CVec], w_info: &[CVec], rho: f64, noise: &[f64]) -> Vec<f64> {
    received_amplitudes(h, w_info)
        .iter()
        .zip(noise)
        .map(|(a, s2)| (1.0 + (1.0 - rho) * a.norm_sqr() / s2).log2())
        .collect()
}

/// Settings of the time-domain Monte Carlo DC estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Samples per period; `None` picks 64 per period of the highest carrier.
    pub samples: Option<usize>,
    pub draws: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            samples: None,
            draws: 100_000,
            seed: 0,
        }
    }
}

/// Brute-force DC estimate from the sampled received waveform.
///
/// Subband n sits at frequency index 2N + n (n = 0..N−1) of a periodic signal,
/// so the fourth-order products never alias onto DC except through the
/// n₁ + n₂ = n₃ + n₄ coincidences the closed form accounts for. Modulation
/// symbols are 𝒞𝒩(0, 1), independent across subbands and constant over the
/// period; their squared magnitudes are Latin-hypercube stratified over the
/// draws, their phases uniform.
pub fn time_domain_dc_oracle(
    h: &[CVec],
    w_info: &[CVec],
    w_power: &[CVec],
    rho: f64,
    model: RectennaModel,
    cfg: OracleConfig,
) -> Result<f64> {
    check_dims(h, w_info, "information")?;
    check_dims(h, w_power, "power")?;
    let n = h.len();
    if n == 0 {
        return Ok(0.0);
    }
    let highest = 3 * n - 1;
    let samples = cfg.samples.unwrap_or(64 * highest);
    if samples <= 4 * highest {
        return Err(Error::Aliasing {
            samples,
            required: 4 * highest,
        });
    }

    let a_i = received_amplitudes(h, w_info);
    let a_p = received_amplitudes(h, w_power);
    let carriers: Vec<Vec<C64>> = (0..n)
        .map(|k| {
            let index = (2 * n + k) as f64;
            (0..samples)
                .map(|t| C64::from_polar(1.0, 2.0 * PI * index * t as f64 / samples as f64))
                .collect()
        })
        .collect();
    let multisine: Vec<f64> = (0..samples)
        .map(|t| (0..n).map(|k| (a_p[k] * carriers[k][t]).re).sum())
        .collect();

    let moments = |y: &dyn Fn(usize) -> f64| -> (f64, f64) {
        let (mut m2, mut m4) = (0.0, 0.0);
        for t in 0..samples {
            let v = y(t);
            let v2 = v * v;
            m2 += v2;
            m4 += v2 * v2;
        }
        (m2 / samples as f64, m4 / samples as f64)
    };

    let modulated = a_i.iter().any(|a| a.norm_sqr() > 0.0);
    let (m2, m4) = if !modulated {
        moments(&|t| multisine[t])
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let strata: Vec<Vec<usize>> = (0..n)
            .map(|_| {
                let mut p: Vec<usize> = (0..cfg.draws).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect();
        let (mut s2, mut s4) = (0.0, 0.0);
        let mut coeff = vec![c(0.0, 0.0); n];
        for d in 0..cfg.draws {
            for k in 0..n {
                let u = (strata[k][d] as f64 + rng.random::<f64>()) / cfg.draws as f64;
                let power = -(1.0 - u).max(f64::MIN_POSITIVE).ln();
                coeff[k] = a_i[k] * C64::from_polar(power.sqrt(), 2.0 * PI * rng.random::<f64>());
            }
            let (m2, m4) = moments(&|t| {
                multisine[t] + (0..n).map(|k| (coeff[k] * carriers[k][t]).re).sum::<f64>()
            });
            s2 += m2;
            s4 += m4;
        }
        (s2 / cfg.draws as f64, s4 / cfg.draws as f64)
    };
    Ok(model.beta2 * rho * m2 + model.beta4 * rho * rho * m4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::complex_normal;
    use crate::scenario::derive_seed;

    fn random_vecs(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<CVec> {
        (0..n)
            .map(|_| CVec::from_fn(m, |_, _| complex_normal(rng, 1.0)))
            .collect()
    }

    fn scalar(v: &[f64]) -> Vec<CVec> {
        v.iter()
            .map(|&x| CVec::from_element(1, c(x, 0.0)))
            .collect()
    }

    #[test]
    fn reference_coefficients_from_diode() {
        let m = RectennaModel::from_diode(0.0034, 0.3829, 50.0);
        assert!((m.beta2 - 0.17).abs() < 1e-12);
        assert!((m.beta4 - 957.25).abs() < 1e-9);
        assert_eq!(RectennaModel::REFERENCE.beta2, 0.17);
        assert_eq!(RectennaModel::REFERENCE.beta4, 957.25);
    }

    #[test]
    fn block_diag_of_identity() {
        let i = CMat::identity(6, 6);
        assert_eq!(block_diag(&i, 2, 0).unwrap(), i);
    }

    #[test]
    fn block_diagonals_partition_the_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = CMat::from_fn(6, 6, |_, _| complex_normal(&mut rng, 1.0));
        let mut sum = CMat::zeros(6, 6);
        for k in -2..=2 {
            sum += block_diag(&w, 2, k).unwrap();
        }
        assert_eq!(sum, w);
        assert!(matches!(block_diag(&w, 2, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn first_block_diagonal_by_hand() {
        let w = CVec::from_vec(vec![c(1.0, 1.0), c(2.0, -1.0), c(0.5, 3.0)]);
        let outer = &w * w.adjoint();
        let w1 = block_diag(&outer, 1, 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if j == i + 1 {
                    w[i] * w[j].conj()
                } else {
                    c(0.0, 0.0)
                };
                assert_eq!(w1[(i, j)], expected);
            }
        }
    }

    #[test]
    fn negative_block_diagonal_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = CMat::from_fn(6, 6, |_, _| complex_normal(&mut rng, 1.0));
        let herm = &a + a.adjoint();
        for k in 1..3 {
            let plus = block_diag(&herm, 2, k).unwrap();
            let minus = block_diag(&herm, 2, -k).unwrap();
            assert!((minus - plus.adjoint()).norm() < 1e-14);
        }
    }

    #[test]
    fn dc_terms_match_block_diagonal_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, m) = (4, 2);
        let h = random_vecs(&mut rng, n, m);
        let wi = random_vecs(&mut rng, n, m);
        let wp = random_vecs(&mut rng, n, m);
        let terms = dc_terms(&h, &wi, &wp).unwrap();

        let hs = stack(&h);
        let quad = |w: &CMat| (hs.adjoint() * w * &hs)[(0, 0)];
        let wi_s = stack(&wi);
        let wp_s = stack(&wp);
        let w_i = &wi_s * wi_s.adjoint();
        let w_p = &wp_s * wp_s.adjoint();
        let ti0 = quad(&block_diag(&w_i, m, 0).unwrap());
        let tp0 = quad(&block_diag(&w_p, m, 0).unwrap());
        let mut yp4 = c(0.0, 0.0);
        for k in -(n as isize - 1)..(n as isize) {
            let t = quad(&block_diag(&w_p, m, k).unwrap());
            yp4 += t * t.conj();
        }
        assert!(ti0.im.abs() < 1e-9 * ti0.re && yp4.im.abs() < 1e-9 * yp4.re);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
        assert!(close(terms.y_i2, 0.5 * ti0.re));
        assert!(close(terms.y_i4, 0.75 * ti0.re * ti0.re));
        assert!(close(terms.y_p2, 0.5 * tp0.re));
        assert!(close(terms.y_p4, 0.375 * yp4.re));
    }

    #[test]
    fn zero_multisine_has_no_power_terms() {
        let h = scalar(&[1.0, 0.5]);
        let t = dc_terms(&h, &scalar(&[1.0, 1.0]), &scalar(&[0.0, 0.0])).unwrap();
        assert_eq!(t.y_p2, 0.0);
        assert_eq!(t.y_p4, 0.0);
    }

    #[test]
    fn single_tone_closed_form() {
        let p: f64 = 2.5;
        let t = dc_terms(
            &scalar(&[1.0]),
            &scalar(&[0.0]),
            &scalar(&[(2.0 * p).sqrt()]),
        )
        .unwrap();
        assert!((t.y_p2 - p).abs() < 1e-12);
        assert!((t.y_p4 - 1.5 * p * p).abs() < 1e-12);
    }

    #[test]
    fn two_tone_quadruple_sum() {
        // Explicit 16-term enumeration of Σ_{n1+n2=n3+n4} a1 a2 a3* a4*.
        let a = [c(0.7, 0.2), c(-0.3, 1.1)];
        let h = scalar(&[1.0, 1.0]);
        let wp: Vec<CVec> = a.iter().map(|&x| CVec::from_element(1, x)).collect();
        let t = dc_terms(&h, &scalar(&[0.0, 0.0]), &wp).unwrap();
        let mut sum = c(0.0, 0.0);
        for n1 in 0..2 {
            for n2 in 0..2 {
                for n3 in 0..2 {
                    for n4 in 0..2 {
                        if n1 + n2 == n3 + n4 {
                            sum += a[n1] * a[n2] * a[n3].conj() * a[n4].conj();
                        }
                    }
                }
            }
        }
        assert!((t.y_p4 - 0.375 * sum.re).abs() < 1e-12);
    }

    #[test]
    fn modulated_fourth_moment_is_three_times_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let h = random_vecs(&mut rng, 3, 2);
            let w = random_vecs(&mut rng, 3, 2);
            let t = dc_terms(&h, &w, &w).unwrap();
            assert!((t.y_i4 - 3.0 * t.y_i2 * t.y_i2).abs() <= 1e-12 * t.y_i4);
        }
    }

    #[test]
    fn dc_special_cases() {
        let t = DcTerms {
            y_i2: 1.0,
            y_i4: 3.0,
            y_p2: 2.0,
            y_p4: 5.0,
        };
        let m = RectennaModel::REFERENCE;
        assert_eq!(harvested_dc(&t, 0.0, m), 0.0);
        let lin = harvested_dc(&t, 0.4, m.linear());
        assert!((lin - 0.17 * 0.4 * 3.0).abs() < 1e-15);
    }

    #[test]
    fn dc_is_quadratic_and_nondecreasing_in_rho() {
        let t = DcTerms {
            y_i2: 0.3,
            y_i4: 0.27,
            y_p2: 0.2,
            y_p4: 0.1,
        };
        let m = RectennaModel::REFERENCE;
        let mut prev = 0.0;
        for i in 0..=20 {
            let z = harvested_dc(&t, i as f64 / 20.0, m);
            assert!(z >= prev);
            prev = z;
        }
    }

    #[test]
    fn rate_examples() {
        let h = scalar(&[1.0]);
        assert_eq!(
            achievable_rate(&h, &scalar(&[3f64.sqrt()]), 1.0, &[1.0]).unwrap(),
            0.0
        );
        let r = achievable_rate(&h, &scalar(&[3f64.sqrt()]), 0.0, &[1.0]).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rate_rejects_mismatched_noise() {
        let h = scalar(&[1.0, 1.0]);
        assert!(achievable_rate(&h, &h, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn oracle_refuses_aliasing() {
        let h = scalar(&[1.0, 1.0]);
        let cfg = OracleConfig {
            samples: Some(20),
            ..OracleConfig::default()
        };
        assert!(matches!(
            time_domain_dc_oracle(&h, &h, &h, 1.0, RectennaModel::REFERENCE, cfg),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn oracle_of_silence_is_zero() {
        let h = scalar(&[1.0, 0.3]);
        let zero = scalar(&[0.0, 0.0]);
        let z = time_domain_dc_oracle(
            &h,
            &zero,
            &zero,
            1.0,
            RectennaModel::REFERENCE,
            OracleConfig::default(),
        )
        .unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn oracle_matches_multisine_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(5, 0));
        for n in 1..=4 {
            let m = rng.random_range(1..=2);
            let h = random_vecs(&mut rng, n, m);
            let wp = random_vecs(&mut rng, n, m);
            let wi: Vec<CVec> = (0..n).map(|_| CVec::zeros(m)).collect();
            let model = RectennaModel {
                beta2: 0.17,
                beta4: 9.0,
            };
            let z = harvested_dc(&dc_terms(&h, &wi, &wp).unwrap(), 0.8, model);
            let o =
                time_domain_dc_oracle(&h, &wi, &wp, 0.8, model, OracleConfig::default()).unwrap();
            assert!(
                (o - z).abs() <= 1e-10 * z,
                "N={n}: oracle {o} closed form {z}"
            );
        }
    }

    #[test]
    fn oracle_matches_modulated_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = random_vecs(&mut rng, 3, 1);
        let wi = random_vecs(&mut rng, 3, 1);
        let wp = random_vecs(&mut rng, 3, 1);
        let model = RectennaModel {
            beta2: 1.0,
            beta4: 0.05,
        };
        let z = harvested_dc(&dc_terms(&h, &wi, &wp).unwrap(), 1.0, model);
        let cfg = OracleConfig {
            draws: 20_000,
            ..OracleConfig::default()
        };
        let o = time_domain_dc_oracle(&h, &wi, &wp, 1.0, model, cfg).unwrap();
        assert!((o / z - 1.0).abs() < 0.02, "ratio {}", o / z);
    }

    #[test]
    fn design_validation() {
        let b = vec![CVec::from_element(1, c(1.0, 0.0)); 2];
        let mut d = WaveformDesign {
            s_info: vec![1.0, 1.0],
            s_power: vec![1.0, 1.0],
            b_info: b.clone(),
            b_power: b,
            rho: 0.5,
            rho_bar: 0.5,
            delta: None,
            eta: None,
        };
        assert!(d.validate(2.0).is_ok());
        assert!(d.validate(1.9).is_err());
        d.rho_bar = 0.6;
        assert!(d.validate(2.0).is_err());
    }
}
