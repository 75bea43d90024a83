//! Maximum-ratio transmission. The same precoder serves the modulated and the
//! multisine components.

use crate::linalg::{c, CVec};

/// b_n = h_n/‖h_n‖. A zero channel falls back to e₁.
pub fn mrt_precoder(h: &CVec) -> CVec {
    let norm = h.norm();
    if norm > 0.0 && norm.is_finite() {
        return h / c(norm, 0.0);
    }
    log::warn!("zero channel in MRT, falling back to the first antenna");
    let mut e = CVec::zeros(h.len().max(1));
    e[0] = c(1.0, 0.0);
    e
}

pub fn mrt_precoders(h: &[CVec]) -> Vec<CVec> {
    h.iter().map(mrt_precoder).collect()
}

/// ‖h_n‖ per subband, the effective gains seen by the amplitude design.
pub fn channel_norms(h: &[CVec]) -> Vec<f64> {
    h.iter().map(|v| v.norm()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rectenna::{achievable_rate, dc_terms};
    use crate::scenario::complex_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn aligned_channel() {
        let b = mrt_precoder(&CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        assert_eq!(b, CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
    }

    #[test]
    fn zero_channel_fallback() {
        let b = mrt_precoder(&CVec::zeros(3));
        assert_eq!(b[0], c(1.0, 0.0));
        assert_eq!(b.norm(), 1.0);
    }

    #[test]
    fn unit_norm_and_full_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let h = CVec::from_fn(4, |_, _| complex_normal(&mut rng, 1.0));
            let b = mrt_precoder(&h);
            assert!((b.norm() - 1.0).abs() < 1e-12);
            assert!((h.dotc(&b).norm() - h.norm()).abs() < 1e-12 * h.norm());
        }
    }

    #[test]
    fn no_sampled_precoder_beats_mrt() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h: Vec<CVec> = (0..3)
            .map(|_| CVec::from_fn(3, |_, _| complex_normal(&mut rng, 1.0)))
            .collect();
        let s = [1.0, 0.7, 0.2];
        let scaled =
            |b: &[CVec]| -> Vec<CVec> { b.iter().zip(&s).map(|(b, &a)| b * c(a, 0.0)).collect() };
        let mrt = scaled(&mrt_precoders(&h));
        let noise = [0.1; 3];
        let rate = achievable_rate(&h, &mrt, 0.0, &noise).unwrap();
        let terms = dc_terms(&h, &mrt, &mrt).unwrap();
        for _ in 0..100 {
            let other: Vec<CVec> = (0..3)
                .map(|_| {
                    let v = CVec::from_fn(3, |_, _| complex_normal(&mut rng, 1.0));
                    let n = v.norm();
                    v / c(n, 0.0)
                })
                .collect();
            let w = scaled(&other);
            for (hn, (bn, mn)) in h.iter().zip(other.iter().zip(&mrt_precoders(&h))) {
                assert!(hn.dotc(bn).norm() <= hn.dotc(mn).norm() + 1e-12);
            }
            assert!(achievable_rate(&h, &w, 0.0, &noise).unwrap() <= rate + 1e-12);
            let t = dc_terms(&h, &w, &w).unwrap();
            assert!(t.y_i2 <= terms.y_i2 + 1e-12);
            assert!(t.y_i4 <= terms.y_i4 + 1e-12);
            assert!(t.y_p4 <= terms.y_p4 + 1e-12);
        }
    }
}
