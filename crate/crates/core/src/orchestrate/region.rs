//! Rate-energy region sweeps, time sharing and the concave envelope.

use serde::{Deserialize, Serialize};

use super::{best_of, lc_bcd_ctx, BcdConfig, Context, REPoint, ReceiverMode};
use crate::scenario::{ChannelRealization, Scenario};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionMode {
    /// Rate floors uniformly spaced in [0, C_max], each solved by BCD.
    Bcd,
    /// Low-complexity design on the diagonal δ = ρ ∈ [0, 1].
    Lc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionConfig {
    pub mode: RegionMode,
    pub grid_size: usize,
    pub bcd: BcdConfig,
}

impl RegionConfig {
    pub fn new(mode: RegionMode, grid_size: usize) -> Self {
        Self {
            mode,
            grid_size,
            bcd: BcdConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RERegion {
    /// Power-splitting points sorted by rate.
    pub ps: Vec<REPoint>,
    /// Time sharing between the WIT and WPT points.
    pub ts: Vec<REPoint>,
    /// Upper concave envelope of the PS points and both endpoints.
    pub mixed: Vec<REPoint>,
    /// Maximum rate, reached with ρ = 0.
    pub capacity: f64,
    /// Maximum DC, reached with no rate floor.
    pub z_wpt: f64,
}

/// Sweeps the rate-energy boundary. BCD points are solved from the highest
/// floor down, each taking the better of a water-filling start and the
/// previous point's design; the latter stays feasible as the floor drops, so
/// z never decreases along the sweep.
pub fn re_region(ch: &ChannelRealization, sc: &Scenario, rc: &RegionConfig) -> Result<RERegion> {
    if rc.grid_size < 2 {
        return Err(Error::Domain(format!(
            "grid size must be at least 2, got {}",
            rc.grid_size
        )));
    }
    let ctx = Context::new(ch, sc, &rc.bcd)?;
    let wit = lc_bcd_ctx(&ctx, 0.0, 0.0)?;
    let capacity = wit.rate;
    let wit_design = wit.design.clone().expect("loop points carry designs");
    let g = rc.grid_size;
    let mut ps = Vec::with_capacity(g);
    match rc.mode {
        RegionMode::Bcd => {
            let mut previous = None;
            for i in (0..g).rev() {
                let floor = capacity * i as f64 / (g - 1) as f64;
                let mut starts = vec![wit_design.clone()];
                if let Some(d) = previous.take() {
                    starts.push(d);
                }
                if i == 0 {
                    starts.push(
                        lc_bcd_ctx(&ctx, 1.0, 1.0)?
                            .design
                            .expect("loop points carry designs"),
                    );
                }
                let p = best_of(&ctx, floor, &starts, capacity)?;
                previous = p.design.clone();
                ps.push(p);
            }
        }
        RegionMode::Lc => {
            for i in 0..g {
                let u = i as f64 / (g - 1) as f64;
                ps.push(lc_bcd_ctx(&ctx, u, u)?);
            }
        }
    }
    ps.sort_by(|a, b| a.rate.total_cmp(&b.rate).then(b.z.total_cmp(&a.z)));
    let z_wpt = ps.iter().map(|p| p.z).fold(0.0, f64::max);
    let capacity = capacity.max(ps.iter().map(|p| p.rate).fold(0.0, f64::max));
    let n = ch.subbands();
    let ts = time_sharing(capacity, z_wpt, g, n);
    let mut pairs: Vec<(f64, f64)> = ps.iter().map(|p| (p.rate, p.z)).collect();
    pairs.push((0.0, z_wpt));
    pairs.push((capacity, 0.0));
    let mixed = upper_concave_envelope(&pairs)
        .into_iter()
        .map(|(r, z)| REPoint::combination(r, z, n, ReceiverMode::Mixed))
        .collect();
    Ok(RERegion {
        ps,
        ts,
        mixed,
        capacity,
        z_wpt,
    })
}

/// (C(1−η), z_wpt·η) for η uniformly spaced in [0, 1].
pub fn time_sharing(capacity: f64, z_wpt: f64, points: usize, subbands: usize) -> Vec<REPoint> {
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let eta = i as f64 / (points - 1) as f64;
            REPoint::combination(
                capacity * (1.0 - eta),
                z_wpt * eta,
                subbands,
                ReceiverMode::TimeSwitching,
            )
        })
        .rev()
        .collect()
}

/// Upper concave hull of (rate, z) pairs, sorted by rate.
pub fn upper_concave_envelope(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(r, z)| r.is_finite() && z.is_finite())
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    sorted.dedup_by(|next, kept| next.0 == kept.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for p in sorted {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Whether every point lies on its own upper concave envelope, within a
/// relative tolerance on z.
pub fn is_concave(points: &[(f64, f64)], tol: f64) -> bool {
    let hull = upper_concave_envelope(points);
    let scale = points
        .iter()
        .map(|p| p.1.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    points
        .iter()
        .all(|&(r, z)| envelope_at(&hull, r).is_none_or(|e| e - z <= tol * scale))
}

/// Linear interpolation of a sorted envelope.
pub fn envelope_at(hull: &[(f64, f64)], rate: f64) -> Option<f64> {
    let first = hull.first()?;
    let last = hull.last()?;
    if rate < first.0 || rate > last.0 {
        return None;
    }
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        if rate <= b.0 {
            let t = if b.0 > a.0 {
                (rate - a.0) / (b.0 - a.0)
            } else {
                1.0
            };
            return Some(a.1 + t * (b.1 - a.1));
        }
    }
    Some(last.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::sample_channels;

    #[test]
    fn concave_points_are_their_own_envelope() {
        let pts = vec![(0.0, 4.0), (1.0, 3.5), (2.0, 2.5), (3.0, 0.0)];
        assert_eq!(upper_concave_envelope(&pts), pts);
        assert!(is_concave(&pts, 1e-12));
    }

    #[test]
    fn envelope_drops_dents_and_dominates() {
        let pts = vec![(0.0, 4.0), (1.0, 2.0), (2.0, 2.5), (3.0, 0.0), (1.5, 1.0)];
        let hull = upper_concave_envelope(&pts);
        assert_eq!(hull, vec![(0.0, 4.0), (2.0, 2.5), (3.0, 0.0)]);
        for &(r, z) in &pts {
            assert!(envelope_at(&hull, r).unwrap() >= z);
        }
        assert!(!is_concave(&pts, 1e-12));
    }

    #[test]
    fn time_sharing_segment() {
        let ts = time_sharing(8.0, 2.0, 5, 4);
        assert_eq!(ts.len(), 5);
        assert_eq!((ts[0].rate, ts[0].z), (0.0, 2.0));
        assert_eq!((ts[4].rate, ts[4].z), (8.0, 0.0));
        for p in &ts {
            let eta = 1.0 - p.rate / 8.0;
            assert!((p.z - 2.0 * eta).abs() < 1e-12);
            assert_eq!(p.rate_per_subband, p.rate / 4.0);
        }
    }

    #[test]
    fn bcd_sweep_is_monotone_and_enveloped() {
        let sc = Scenario {
            subbands: 4,
            irs_elements: 4,
            ..Scenario::default()
        };
        let ch = sample_channels(&sc, 7).unwrap();
        let region = re_region(&ch, &sc, &RegionConfig::new(RegionMode::Bcd, 5)).unwrap();
        assert_eq!(region.ps.len(), 5);
        for w in region.ps.windows(2) {
            assert!(w[1].rate >= w[0].rate);
            assert!(w[1].z <= w[0].z * (1.0 + 1e-12));
        }
        let hull: Vec<(f64, f64)> = region.mixed.iter().map(|p| (p.rate, p.z)).collect();
        for p in region.ps.iter().chain(&region.ts) {
            assert!(envelope_at(&hull, p.rate).unwrap() >= p.z * (1.0 - 1e-12));
        }
        assert_eq!(region.ts.first().unwrap().z, region.z_wpt);
        assert_eq!(region.ts.last().unwrap().rate, region.capacity);
    }

    #[test]
    fn lc_sweep_covers_the_diagonal() {
        let sc = Scenario {
            subbands: 4,
            irs_elements: 2,
            ..Scenario::default()
        };
        let ch = sample_channels(&sc, 8).unwrap();
        let region = re_region(&ch, &sc, &RegionConfig::new(RegionMode::Lc, 3)).unwrap();
        let deltas: Vec<f64> = region
            .ps
            .iter()
            .map(|p| p.design.as_ref().unwrap().waveform.delta.unwrap())
            .collect();
        assert_eq!(deltas.len(), 3);
        assert!(deltas.contains(&0.0) && deltas.contains(&0.5) && deltas.contains(&1.0));
        assert!(re_region(&ch, &sc, &RegionConfig::new(RegionMode::Lc, 1)).is_err());
    }
}
