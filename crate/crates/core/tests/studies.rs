use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trapheat::electrostatics::{CouplingMethod, PatchCouplings};
use trapheat::geometry::shapes::square_plate;
use trapheat::geometry::{discretize, DiscretizeOptions};
use trapheat::heating::{per_patch_heating, HeatingReport, ModeFrame, NoiseModel};
use trapheat::studies::{compare_reports, fit_line, fit_power_law};
use trapheat::trapdynamics::IonSpecies;
use trapheat::Vec3;

fn report(seed: u64, height: f64, s0: f64) -> HeatingReport {
    let g = square_plate::<f64>(1e-3, height).unwrap();
    let p = discretize(&g, &DiscretizeOptions::uniform(200e-6)).unwrap();
    let frame = ModeFrame {
        frequencies: [0.5e6, 1.9e6, 2.0e6],
        axes: [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<PatchCouplings<f64>> = (0..3)
        .map(|k| PatchCouplings {
            direction: Vec3::from_f64(frame.axes[k]),
            values: (0..p.len()).map(|_| rng.random_range(-1e3..1e3)).collect(),
            method: CouplingMethod::Adjoint,
        })
        .collect();
    let noise = NoiseModel { s0, ..NoiseModel::default() };
    per_patch_heating(&p, &c, &frame, &noise, &IonSpecies::yb171()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn line_fit_recovers_exact_lines(m in -5.0f64..5.0, b in -100.0f64..100.0, n in 3usize..9) {
        let s: Vec<(f64, f64)> = (0..n).map(|i| { let x = 100.0 + 50.0 * i as f64; (x, m * x + b) }).collect();
        let f = fit_line(&s).unwrap();
        prop_assert!((f.slope - m).abs() < 1e-9);
        prop_assert!((f.intercept - b).abs() < 1e-6);
        prop_assert!(m == 0.0 || f.r_squared > 1.0 - 1e-9);
        prop_assert!(f.leave_one_out_slopes.iter().all(|s| (s - m).abs() < 1e-9));
    }

    #[test]
    fn power_law_fit_recovers_exponent(alpha in 0.5f64..6.0, a in 1e-30f64..1e-10) {
        let s: Vec<(f64, f64)> = [100e-6f64, 150e-6, 200e-6, 300e-6, 400e-6].iter().map(|&d| (d, a * d.powf(-alpha))).collect();
        let f = fit_power_law(&s).unwrap();
        prop_assert!((f.alpha - alpha).abs() < 1e-9);
        prop_assert!((f.prefactor / a - 1.0).abs() < 1e-6);
    }

    #[test]
    fn self_comparison_is_unity_and_ratios_invert(seed in any::<u64>()) {
        let a = report(seed, 200e-6, 1e-20);
        let b = report(seed.wrapping_add(1), 250e-6, 1e-20);
        let same = compare_reports(("a", &a, 1), ("a", &a, 1), 1e-5);
        prop_assert!((same.summed_ratio - 1.0).abs() < 1e-14);
        prop_assert_eq!(same.mode_map, [0, 1, 2]);
        let ab = compare_reports(("a", &a, 1), ("b", &b, 1), 1e-5);
        let ba = compare_reports(("b", &b, 1), ("a", &a, 1), 1e-5);
        prop_assert!((ab.summed_ratio * ba.summed_ratio - 1.0).abs() < 1e-12);
        for k in 0..3 {
            prop_assert!((ab.mode_ratios[k] * ba.mode_ratios[k] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ratio_does_not_depend_on_s0(seed in any::<u64>(), s0 in 1e-24f64..1e-16) {
        let r1 = compare_reports(("a", &report(seed, 200e-6, 1e-20), 1), ("b", &report(!seed, 200e-6, 1e-20), 1), 1e-5);
        let r2 = compare_reports(("a", &report(seed, 200e-6, s0), 1), ("b", &report(!seed, 200e-6, s0), 1), 1e-5);
        prop_assert!((r1.summed_ratio - r2.summed_ratio).abs() < 1e-12 * r1.summed_ratio);
    }
}

#[test]
fn fits_reject_degenerate_samples() {
    assert!(fit_line(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
    assert!(fit_line(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    assert!(fit_power_law(&[(1.0, 1.0), (2.0, -1.0), (3.0, 1.0)]).is_err());
}

#[test]
fn leave_one_out_spread_flags_an_outlier() {
    let mut s: Vec<(f64, f64)> = (0..5).map(|i| { let x = 100.0 + 75.0 * i as f64; (x, 0.6 * x - 10.0) }).collect();
    s[4].1 += 60.0;
    let f = fit_line(&s).unwrap();
    let spread = f.leave_one_out_slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - f.leave_one_out_slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread > 0.1, "{spread}");
}
