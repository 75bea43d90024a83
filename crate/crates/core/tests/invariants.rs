use proptest::prelude::*;
use swipt::linalg::{c, hermitian_defect, hermitian_eigen, CMat, CVec, C64};
use swipt::orchestrate::baselines::IrsCodebook;
use swipt::orchestrate::region::{envelope_at, is_concave, upper_concave_envelope};
use swipt::passive::build_coupling;
use swipt::rectenna::{block_diag, dc_terms};
use swipt::scenario::{
    path_loss, perturb_csit, sample_channels, CascadedCsit, CsitError, Scenario, TapProfile,
};
use swipt::solver::psd::{maximize_rate, rate_of, solve_psd, IpmSettings, PsdSubproblem, RateTerm};
use swipt::waveform::{dc_posynomial, smf, superposed_lc, water_filling};

fn cvec(parts: &[(f64, f64)]) -> CVec {
    CVec::from_iterator(parts.len(), parts.iter().map(|&(re, im)| c(re, im)))
}

fn small_scenario(m: usize, n: usize, l: usize) -> Scenario {
    Scenario {
        tx_antennas: m,
        subbands: n,
        irs_elements: l,
        tap_profile: TapProfile::flat(),
        ..Scenario::default()
    }
}

fn power_of(s: &[f64]) -> f64 {
    s.iter().map(|v| v * v).sum::<f64>() / 2.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cascade_is_reflected_times_incident(m in 1usize..3, n in 1usize..5, l in 0usize..5, seed in any::<u64>()) {
        let ch = sample_channels(&small_scenario(m, n, l), seed).unwrap();
        for k in 0..n {
            let v = &ch.cascaded[k];
            prop_assert_eq!((v.nrows(), v.ncols()), (l, m));
            for i in 0..l {
                for j in 0..m {
                    prop_assert_eq!(v[(i, j)], ch.reflected[k][i].conj() * ch.incident[k][(i, j)]);
                    prop_assert!(v[(i, j)].re.is_finite() && v[(i, j)].im.is_finite());
                }
            }
        }
    }

    #[test]
    fn zero_csit_error_is_exact(n in 1usize..5, l in 1usize..5, seed in any::<u64>()) {
        let ch = sample_channels(&small_scenario(1, n, l), seed).unwrap();
        let est = perturb_csit(&ch.cascaded, &CsitError::perfect(n), seed ^ 1).unwrap();
        prop_assert_eq!(est, CascadedCsit::Estimated(ch.cascaded.clone()));
    }

    #[test]
    fn path_loss_is_continuous_and_decreasing(d in 0.1f64..50.0, f in 1e8f64..1e10) {
        let a = path_loss(f, d).unwrap();
        let b = path_loss(f, d * 1.01).unwrap();
        prop_assert!(a > 0.0 && b < a);
        let below = path_loss(f, 10.0 - 1e-9).unwrap();
        let above = path_loss(f, 10.0 + 1e-9).unwrap();
        prop_assert!((below / above - 1.0).abs() < 1e-8);
    }

    #[test]
    fn block_diagonals_partition_the_matrix(
        block in 1usize..3,
        n in 1usize..4,
        entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 36),
    ) {
        let d = block * n;
        let w = CMat::from_fn(d, d, |i, j| {
            let (re, im) = entries[(i * d + j) % entries.len()];
            c(re, im)
        });
        let mut sum = CMat::zeros(d, d);
        for k in -(n as isize - 1)..n as isize {
            sum += block_diag(&w, block, k).unwrap();
        }
        prop_assert_eq!(sum, w.clone());
        prop_assert!(block_diag(&w, block, n as isize).is_err());
    }

    #[test]
    fn dc_moments_are_nonnegative_and_gaussian(
        amps in prop::collection::vec(((-1.0f64..1.0, -1.0f64..1.0), (-1.0f64..1.0, -1.0f64..1.0), (-1.0f64..1.0, -1.0f64..1.0)), 1..6),
    ) {
        let h: Vec<CVec> = amps.iter().map(|a| cvec(&[a.0])).collect();
        let wi: Vec<CVec> = amps.iter().map(|a| cvec(&[a.1])).collect();
        let wp: Vec<CVec> = amps.iter().map(|a| cvec(&[a.2])).collect();
        let t = dc_terms(&h, &wi, &wp).unwrap();
        prop_assert!(t.y_i2 >= 0.0 && t.y_i4 >= 0.0 && t.y_p2 >= 0.0 && t.y_p4 >= 0.0);
        prop_assert!((t.y_i4 - 3.0 * t.y_i2 * t.y_i2).abs() <= 1e-12 * t.y_i4.max(1e-300));
    }

    #[test]
    fn coupling_matrices_are_conjugate_symmetric(n in 1usize..4, l in 1usize..4, seed in any::<u64>()) {
        let ch = sample_channels(&small_scenario(1, n, l), seed).unwrap();
        let w: Vec<CVec> = (0..n).map(|k| cvec(&[(1.0 + k as f64, 0.5)])).collect();
        let cm = build_coupling(&ch, &w, &w).unwrap();
        for set in [&cm.info, &cm.power] {
            for k in 0..n - 1 {
                let diff = (&set[k] - set[2 * n - 2 - k].adjoint()).norm();
                prop_assert!(diff <= 1e-12 * set[k].norm().max(1e-300));
            }
            let zero = &set[n - 1];
            prop_assert!(hermitian_defect(zero) < 1e-12);
            let (eig, _) = hermitian_eigen(zero);
            let top = eig.iter().cloned().fold(0.0, f64::max);
            prop_assert!(eig.iter().all(|&e| e >= -1e-10 * top.max(1e-300)));
        }
    }

    #[test]
    fn codebook_is_unit_modulus_and_nearest(bits in 1u32..6, theta in 0.0f64..std::f64::consts::TAU) {
        let cb = IrsCodebook::new(bits).unwrap();
        let phases = cb.phases();
        prop_assert_eq!(phases.len(), 1 << bits);
        prop_assert!(phases.iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
        let phi = C64::from_polar(1.0, theta);
        let q = cb.quantize(&[phi])[0];
        let err = (q * phi.conj()).arg().abs();
        prop_assert!(err <= std::f64::consts::PI / (1u32 << bits) as f64 + 1e-12);
    }

    #[test]
    fn water_filling_meets_budget_with_common_level(
        gains in prop::collection::vec(1e-3f64..10.0, 1..8),
        noise in 1e-3f64..1.0,
        power in 0.1f64..100.0,
    ) {
        let sigma = vec![noise; gains.len()];
        let s = water_filling(&gains, power, &sigma).unwrap();
        prop_assert!((power_of(&s) / power - 1.0).abs() < 1e-10);
        // Active tones share the level s²/(2P) + σ²/(P‖h‖²); inactive tones sit above it.
        let floor: Vec<f64> = gains.iter().map(|h| noise / (power * h * h)).collect();
        let levels: Vec<f64> = s.iter().zip(&floor).filter(|(v, _)| **v > 0.0).map(|(v, f)| v * v / (2.0 * power) + f).collect();
        let level = levels[0];
        prop_assert!(levels.iter().all(|l| (l / level - 1.0).abs() < 1e-8));
        for (v, f) in s.iter().zip(&floor) {
            if *v == 0.0 {
                prop_assert!(*f >= level * (1.0 - 1e-8));
            }
        }
    }

    #[test]
    fn closed_form_waveforms_meet_budget(
        gains in prop::collection::vec(1e-3f64..10.0, 1..8),
        power in 0.1f64..100.0,
        alpha in 1.0f64..4.0,
        delta in 0.0f64..=1.0,
    ) {
        let sigma = vec![1e-2; gains.len()];
        let s = smf(&gains, power, alpha).unwrap();
        prop_assert!((power_of(&s) / power - 1.0).abs() < 1e-10);
        let (si, sp) = superposed_lc(&gains, power, delta, &sigma, alpha).unwrap();
        prop_assert!(((power_of(&si) + power_of(&sp)) / power - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dc_monomials_sum_to_z(
        tones in prop::collection::vec((0.1f64..2.0, 0.0f64..1.0, 0.0f64..1.0), 1..5),
        rho in 0.0f64..=1.0,
    ) {
        let h: Vec<f64> = tones.iter().map(|t| t.0).collect();
        let si: Vec<f64> = tones.iter().map(|t| t.1).collect();
        let sp: Vec<f64> = tones.iter().map(|t| t.2).collect();
        let (z, posy) = dc_posynomial(&h, &si, &sp, rho, Scenario::default().rectenna());
        let sum: f64 = posy.values(&si, &sp, rho).iter().sum();
        prop_assert!((sum - z).abs() <= 1e-10 * z.abs().max(1e-300));
    }

    #[test]
    fn envelope_is_concave_and_dominates(points in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..12)) {
        let hull = upper_concave_envelope(&points);
        prop_assert!(is_concave(&hull, 1e-9));
        for &(r, z) in &points {
            let e = envelope_at(&hull, r).unwrap();
            prop_assert!(e >= z - 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn psd_solution_is_feasible_and_beats_identity(
        d in 2usize..5,
        entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 25),
        gains in prop::collection::vec(0.1f64..10.0, 1..4),
        fraction in 0.0f64..0.9,
    ) {
        let raw = CMat::from_fn(d, d, |i, j| {
            let (re, im) = entries[i * 5 + j];
            c(re, im)
        });
        let a = (&raw + raw.adjoint()) * c(0.5, 0.0);
        let terms: Vec<RateTerm> = gains
            .iter()
            .enumerate()
            .map(|(n, &g)| {
                let u = CVec::from_fn(d, |i, _| {
                    let (re, im) = entries[(7 * n + 3 * i + 1) % 25];
                    c(re + 0.1, im)
                });
                RateTerm { coupling: &u * u.adjoint(), scale: g }
            })
            .collect();
        let settings = IpmSettings::default();
        let cap = maximize_rate(d, &terms, &settings).unwrap().rate;
        let floor = fraction * cap;
        let p = PsdSubproblem { objective: a.clone(), rate_terms: terms.clone(), rate_floor: floor, include_rate: true };
        let sol = solve_psd(&p, &settings).unwrap();
        for i in 0..d {
            prop_assert!((sol.phi[(i, i)].re - 1.0).abs() < 1e-6);
        }
        prop_assert!(hermitian_defect(&sol.phi) < 1e-9);
        let (eig, _) = hermitian_eigen(&sol.phi);
        prop_assert!(eig.iter().all(|&e| e >= -1e-6));
        prop_assert!(rate_of(&terms, &sol.phi) >= floor - 1e-6 * cap.max(1.0));
        let identity = CMat::identity(d, d);
        if rate_of(&terms, &identity) >= floor {
            let trace_a: f64 = (0..d).map(|i| a[(i, i)].re).sum();
            prop_assert!(sol.objective >= trace_a - 1e-6 * a.norm().max(1.0));
        }
    }
}
