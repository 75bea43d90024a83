//! Experiment configuration, channel synthesis and the composite channel.
//!
//! Every link is a tapped delay line with i.i.d. circularly-symmetric complex
//! Gaussian taps. Frequency responses are taken at `N` subbands evenly spaced
//! across the bandwidth and centred on the carrier; the carrier itself only
//! enters through path loss (phases are referenced to baseband).

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{c, CMat, CVec, C64};
use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Distance at which the path-loss exponent switches from 2 to 3.5.
pub const BREAKPOINT_M: f64 = 10.0;
pub const FAR_EXPONENT: f64 = 3.5;

const UNIT_MODULUS_TOL: f64 = 1e-9;

static TGN_MODEL_D: &str = include_str!("../data/tgn_model_d.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub delay_s: f64,
    pub power: f64,
}

/// Power-delay profile of a tapped delay line. Powers are normalized to sum
/// to one on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Tap>", into = "Vec<Tap>")]
pub struct TapProfile {
    taps: Vec<Tap>,
}

impl TapProfile {
    pub fn new(taps: Vec<Tap>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::TapProfile("profile has no taps".into()));
        }
        for t in &taps {
            if !(t.delay_s.is_finite() && t.delay_s >= 0.0) {
                return Err(Error::TapProfile(format!("bad delay {}", t.delay_s)));
            }
            if !(t.power.is_finite() && t.power >= 0.0) {
                return Err(Error::TapProfile(format!("bad power {}", t.power)));
            }
        }
        let total: f64 = taps.iter().map(|t| t.power).sum();
        if total <= 0.0 {
            return Err(Error::TapProfile("tap powers sum to zero".into()));
        }
        if (total - 1.0).abs() < 1e-12 {
            return Ok(Self { taps });
        }
        let taps = taps
            .into_iter()
            .map(|t| Tap {
                delay_s: t.delay_s,
                power: t.power / total,
            })
            .collect();
        Ok(Self { taps })
    }

    /// A single tap at zero delay: a frequency-flat channel.
    pub fn flat() -> Self {
        Self {
            taps: vec![Tap {
                delay_s: 0.0,
                power: 1.0,
            }],
        }
    }

    /// The bundled 18-tap profile approximating IEEE TGn model D.
    pub fn tgn_model_d() -> Self {
        Self::from_csv_reader(TGN_MODEL_D.as_bytes()).expect("bundled tap profile is valid")
    }

    /// Reads a two-column CSV (`delay_s,power_linear`) with a header row.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut taps = Vec::new();
        for record in rdr.deserialize::<(f64, f64)>() {
            let (delay_s, power) = record?;
            taps.push(Tap { delay_s, power });
        }
        Self::new(taps)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }
}

impl TryFrom<Vec<Tap>> for TapProfile {
    type Error = Error;
    fn try_from(taps: Vec<Tap>) -> Result<Self> {
        Self::new(taps)
    }
}

impl From<TapProfile> for Vec<Tap> {
    fn from(p: TapProfile) -> Self {
        p.taps
    }
}

/// Full experiment configuration in linear units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub tx_antennas: usize,
    pub subbands: usize,
    pub irs_elements: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    /// Per-subband noise power σ² [W].
    pub noise_power: f64,
    /// Optional per-subband override of `noise_power`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_per_subband: Option<Vec<f64>>,
    /// Average transmit power budget P [W].
    pub tx_power: f64,
    pub beta2: f64,
    pub beta4: f64,
    pub d_direct: f64,
    pub d_horizontal: f64,
    pub d_vertical: f64,
    /// Scaled matched filter exponent α.
    pub alpha: f64,
    /// Relative convergence tolerance of the iterative algorithms.
    pub epsilon: f64,
    pub tap_profile: TapProfile,
    /// Receive antenna gain [linear].
    pub rx_gain: f64,
    pub seed: u64,
}

impl Default for Scenario {
    /// Reference configuration: 40 dBm EIRP, -40 dBm noise, 1 MHz, 2.4 GHz,
    /// 3 dBi receive gain, IRS 2 m off the AP along a 12 m link.
    fn default() -> Self {
        Self {
            tx_antennas: 1,
            subbands: 16,
            irs_elements: 20,
            carrier_hz: 2.4e9,
            bandwidth_hz: 1e6,
            noise_power: 1e-7,
            noise_per_subband: None,
            tx_power: 10.0,
            beta2: 0.17,
            beta4: 957.25,
            d_direct: 12.0,
            d_horizontal: 2.0,
            d_vertical: 2.0,
            alpha: 2.0,
            epsilon: 1e-8,
            tap_profile: TapProfile::tgn_model_d(),
            rx_gain: 10f64.powf(0.3),
            seed: 0,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.tx_antennas == 0 {
            return bad("at least one transmit antenna is required".into());
        }
        if self.subbands == 0 {
            return bad("at least one subband is required".into());
        }
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_power", self.noise_power),
            ("tx_power", self.tx_power),
            ("beta2", self.beta2),
            ("beta4", self.beta4),
            ("d_direct", self.d_direct),
            ("epsilon", self.epsilon),
            ("rx_gain", self.rx_gain),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [
            ("d_horizontal", self.d_horizontal),
            ("d_vertical", self.d_vertical),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if self.irs_elements > 0
            && (self.incident_distance() <= 0.0 || self.reflected_distance() <= 0.0)
        {
            return bad("IRS coincides with a terminal".into());
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be at least 1, got {}", self.alpha));
        }
        if let Some(noise) = &self.noise_per_subband {
            if noise.len() != self.subbands {
                return bad(format!(
                    "noise_per_subband has {} entries for {} subbands",
                    noise.len(),
                    self.subbands
                ));
            }
            if noise.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
                return bad("noise_per_subband entries must be positive".into());
            }
        }
        Ok(())
    }

    /// σ_n² for every subband.
    pub fn noise(&self) -> Vec<f64> {
        match &self.noise_per_subband {
            Some(v) => v.clone(),
            None => vec![self.noise_power; self.subbands],
        }
    }

    /// Subband centre frequencies f_n = f_c + (n − (N+1)/2)·B/N, n = 1..N.
    pub fn subband_frequencies(&self) -> Vec<f64> {
        let n = self.subbands as f64;
        (1..=self.subbands)
            .map(|k| self.carrier_hz + (k as f64 - (n + 1.0) / 2.0) * self.bandwidth_hz / n)
            .collect()
    }

    pub fn incident_distance(&self) -> f64 {
        self.d_horizontal.hypot(self.d_vertical)
    }

    pub fn reflected_distance(&self) -> f64 {
        (self.d_direct - self.d_horizontal).hypot(self.d_vertical)
    }

    pub fn path_loss(&self, d: f64) -> Result<f64> {
        path_loss(self.carrier_hz, d)
    }

    pub fn rectenna(&self) -> crate::rectenna::RectennaModel {
        crate::rectenna::RectennaModel {
            beta2: self.beta2,
            beta4: self.beta4,
        }
    }
}

/// Dual-slope power gain: free space up to [`BREAKPOINT_M`], exponent
/// [`FAR_EXPONENT`] beyond.
pub fn path_loss(carrier_hz: f64, d: f64) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::Domain(format!(
            "path loss needs a positive distance, got {d}"
        )));
    }
    let wavelength = SPEED_OF_LIGHT / carrier_hz;
    let free_space = |d: f64| (wavelength / (4.0 * PI * d)).powi(2);
    if d <= BREAKPOINT_M {
        Ok(free_space(d))
    } else {
        Ok(free_space(BREAKPOINT_M) * (d / BREAKPOINT_M).powf(-FAR_EXPONENT))
    }
}

/// Amplitude path loss of each link, receive gain included where it applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkAmplitudes {
    pub direct: f64,
    pub incident: f64,
    pub reflected: f64,
}

/// One draw of all channels, already scaled by path loss.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// h_D,n, length M.
    pub direct: Vec<CVec>,
    /// H_I,n, L×M.
    pub incident: Vec<CMat>,
    /// h_R,n, length L. The cascade uses its conjugate transpose.
    pub reflected: Vec<CVec>,
    /// V_n = diag(h_R,nᴴ)·H_I,n, L×M.
    pub cascaded: Vec<CMat>,
    pub amplitudes: LinkAmplitudes,
}

impl ChannelRealization {
    pub fn tx_antennas(&self) -> usize {
        self.direct.first().map_or(0, |h| h.len())
    }

    pub fn subbands(&self) -> usize {
        self.direct.len()
    }

    pub fn irs_elements(&self) -> usize {
        self.cascaded.first().map_or(0, |v| v.nrows())
    }

    /// Builds a realization from explicit link responses, forming the cascade.
    pub fn from_links(
        direct: Vec<CVec>,
        incident: Vec<CMat>,
        reflected: Vec<CVec>,
        amplitudes: LinkAmplitudes,
    ) -> Result<Self> {
        let n = direct.len();
        if n == 0 || incident.len() != n || reflected.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "links cover {}/{}/{} subbands",
                n,
                incident.len(),
                reflected.len()
            )));
        }
        let m = direct[0].len();
        let l = reflected[0].len();
        let mut cascaded = Vec::with_capacity(n);
        for k in 0..n {
            if direct[k].len() != m
                || incident[k].nrows() != l
                || incident[k].ncols() != m
                || reflected[k].len() != l
            {
                return Err(Error::DimensionMismatch(format!(
                    "subband {k} has inconsistent link sizes"
                )));
            }
            cascaded.push(cascade(&incident[k], &reflected[k]));
        }
        Ok(Self {
            direct,
            incident,
            reflected,
            cascaded,
            amplitudes,
        })
    }

    /// Copy with the IRS removed (L = 0).
    pub fn without_irs(&self) -> Self {
        let n = self.subbands();
        let m = self.tx_antennas();
        Self {
            direct: self.direct.clone(),
            incident: vec![CMat::zeros(0, m); n],
            reflected: vec![CVec::zeros(0); n],
            cascaded: vec![CMat::zeros(0, m); n],
            amplitudes: self.amplitudes,
        }
    }

    /// Copy with the cascaded channels replaced (used for imperfect CSIT).
    pub fn with_cascaded(&self, cascaded: Vec<CMat>) -> Self {
        Self {
            cascaded,
            ..self.clone()
        }
    }

    /// Composite channels h_n for every subband.
    pub fn composite(&self, phi: &[C64]) -> Result<Vec<CVec>> {
        self.direct
            .iter()
            .zip(&self.cascaded)
            .map(|(hd, v)| composite_channel(hd, v, phi))
            .collect()
    }

    /// Composite channels with a separate phase vector per subband.
    pub fn composite_per_subband(&self, phis: &[Vec<C64>]) -> Result<Vec<CVec>> {
        if phis.len() != self.subbands() {
            return Err(Error::DimensionMismatch(format!(
                "{} phase vectors for {} subbands",
                phis.len(),
                self.subbands()
            )));
        }
        self.direct
            .iter()
            .zip(&self.cascaded)
            .zip(phis)
            .map(|((hd, v), phi)| composite_channel(hd, v, phi))
            .collect()
    }
}

/// V = diag(h_Rᴴ)·H_I.
fn cascade(incident: &CMat, reflected: &CVec) -> CMat {
    CMat::from_fn(incident.nrows(), incident.ncols(), |l, m| {
        reflected[l].conj() * incident[(l, m)]
    })
}

/// Draws an independent realization. The result is a pure function of the
/// scenario and `seed`.
pub fn sample_channels(s: &Scenario, seed: u64) -> Result<ChannelRealization> {
    s.validate()?;
    let (m, n, l) = (s.tx_antennas, s.subbands, s.irs_elements);
    let offsets: Vec<f64> = s
        .subband_frequencies()
        .iter()
        .map(|f| f - s.carrier_hz)
        .collect();
    let amplitudes = LinkAmplitudes {
        direct: (s.path_loss(s.d_direct)? * s.rx_gain).sqrt(),
        incident: if l > 0 {
            s.path_loss(s.incident_distance())?.sqrt()
        } else {
            0.0
        },
        reflected: if l > 0 {
            (s.path_loss(s.reflected_distance())? * s.rx_gain).sqrt()
        } else {
            0.0
        },
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let taps = s.tap_profile.taps();
    let mut draw_response = |scale: f64| -> Vec<C64> {
        let gains: Vec<C64> = taps
            .iter()
            .map(|t| complex_normal(&mut rng, t.power.sqrt()))
            .collect();
        offsets
            .iter()
            .map(|&f| {
                let mut acc = c(0.0, 0.0);
                for (g, t) in gains.iter().zip(taps) {
                    acc += g * C64::from_polar(1.0, -2.0 * PI * f * t.delay_s);
                }
                acc * scale
            })
            .collect()
    };

    let mut direct = vec![CVec::zeros(m); n];
    for a in 0..m {
        for (k, h) in draw_response(amplitudes.direct).into_iter().enumerate() {
            direct[k][a] = h;
        }
    }
    let mut incident = vec![CMat::zeros(l, m); n];
    for e in 0..l {
        for a in 0..m {
            for (k, h) in draw_response(amplitudes.incident).into_iter().enumerate() {
                incident[k][(e, a)] = h;
            }
        }
    }
    let mut reflected = vec![CVec::zeros(l); n];
    for e in 0..l {
        for (k, h) in draw_response(amplitudes.reflected).into_iter().enumerate() {
            reflected[k][e] = h;
        }
    }
    ChannelRealization::from_links(direct, incident, reflected, amplitudes)
}

/// Draws from 𝒞𝒩(0, std²).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, std: f64) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im) * (std / 2f64.sqrt())
}

/// Per-realization seed derived from a base seed and an index (SplitMix64).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        ^ index
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// h_n with h_nᴴ = h_D,nᴴ + φᴴV_n, i.e. h_n = h_D,n + V_nᴴφ.
pub fn composite_channel(direct: &CVec, cascaded: &CMat, phi: &[C64]) -> Result<CVec> {
    if cascaded.nrows() != phi.len() || (cascaded.nrows() > 0 && cascaded.ncols() != direct.len()) {
        return Err(Error::DimensionMismatch(format!(
            "cascade is {}x{}, phase vector has {} entries, direct link has {}",
            cascaded.nrows(),
            cascaded.ncols(),
            phi.len(),
            direct.len()
        )));
    }
    check_unit_modulus(phi)?;
    let mut h = direct.clone();
    for (l, p) in phi.iter().enumerate() {
        for a in 0..direct.len() {
            h[a] += cascaded[(l, a)].conj() * p;
        }
    }
    Ok(h)
}

pub fn check_unit_modulus(phi: &[C64]) -> Result<()> {
    for (l, p) in phi.iter().enumerate() {
        if (p.norm() - 1.0).abs() > UNIT_MODULUS_TOL {
            return Err(Error::InvariantViolation(format!(
                "reflection coefficient {l} has modulus {}",
                p.norm()
            )));
        }
    }
    Ok(())
}

/// Per-subband standard deviation of the cascaded-channel estimation error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsitError {
    pub epsilon: Vec<f64>,
}

impl CsitError {
    pub fn uniform(epsilon: f64, subbands: usize) -> Self {
        Self {
            epsilon: vec![epsilon; subbands],
        }
    }

    pub fn perfect(subbands: usize) -> Self {
        Self::uniform(0.0, subbands)
    }

    /// ε = ∞ on any subband stands for no CSIT at all.
    pub fn is_unavailable(&self) -> bool {
        self.epsilon.iter().any(|e| e.is_infinite())
    }
}

/// What the transmitter knows about the cascaded channel.
#[derive(Debug, Clone, PartialEq)]
pub enum CascadedCsit {
    Estimated(Vec<CMat>),
    Unavailable,
}

/// V̂_n = V_n + Ṽ_n with Ṽ_n entries i.i.d. 𝒞𝒩(0, ε_n²).
pub fn perturb_csit(cascaded: &[CMat], err: &CsitError, seed: u64) -> Result<CascadedCsit> {
    if err.epsilon.len() != cascaded.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} error levels for {} subbands",
            err.epsilon.len(),
            cascaded.len()
        )));
    }
    if let Some(e) = err.epsilon.iter().find(|e| e.is_nan() || **e < 0.0) {
        return Err(Error::Domain(format!(
            "CSIT error must be nonnegative, got {e}"
        )));
    }
    if err.is_unavailable() {
        return Ok(CascadedCsit::Unavailable);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let estimate = cascaded
        .iter()
        .zip(&err.epsilon)
        .map(|(v, &eps)| {
            if eps == 0.0 {
                v.clone()
            } else {
                v.map(|x| x + complex_normal(&mut rng, eps))
            }
        })
        .collect();
    Ok(CascadedCsit::Estimated(estimate))
}

/// i.i.d. uniform phases over [0, 2π).
pub fn random_phases(l: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..l)
        .map(|_| C64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)))
        .collect()
}
