use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trapheat::electrostatics::{CouplingMethod, PatchCouplings};
use trapheat::geometry::shapes::square_plate;
use trapheat::geometry::{discretize, DiscretizeOptions};
use trapheat::heating::{fraction_within, per_patch_heating, HeatingReport, ModeFrame, NoiseModel};
use trapheat::trapdynamics::IonSpecies;
use trapheat::{PatchSet, Vec3};

fn plate() -> &'static PatchSet {
    static P: OnceLock<PatchSet> = OnceLock::new();
    P.get_or_init(|| {
        let g = square_plate::<f64>(2e-3, 200e-6).unwrap();
        discretize(&g, &DiscretizeOptions::uniform(150e-6)).unwrap()
    })
}

fn frame() -> ModeFrame {
    ModeFrame {
        frequencies: [0.5e6, 1.9e6, 2.0e6],
        axes: [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    }
}

fn random_couplings(seed: u64, n: usize) -> Vec<PatchCouplings<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = frame();
    (0..3)
        .map(|k| PatchCouplings {
            direction: Vec3::from_f64(f.axes[k]),
            values: (0..n).map(|_| rng.random_range(-1e4..1e4)).collect(),
            method: CouplingMethod::Adjoint,
        })
        .collect()
}

fn heat(seed: u64, noise: &NoiseModel) -> HeatingReport {
    let p = plate();
    per_patch_heating(p, &random_couplings(seed, p.len()), &frame(), noise, &IonSpecies::yb171()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn totals_are_sums_of_nonnegative_patch_rates(seed in any::<u64>()) {
        let r = heat(seed, &NoiseModel::default());
        for k in 0..3 {
            prop_assert!(r.records.iter().all(|p| p.gamma[k] >= 0.0));
            let s: f64 = r.records.iter().map(|p| p.gamma[k]).sum();
            prop_assert!((s - r.totals[k]).abs() <= 1e-12 * r.totals[k]);
        }
    }

    #[test]
    fn rates_scale_linearly_with_s0(seed in any::<u64>(), factor in 1e-3f64..1e3) {
        let base = NoiseModel::default();
        let a = heat(seed, &base);
        let b = heat(seed, &NoiseModel { s0: base.s0 * factor, ..base });
        for k in 0..3 {
            prop_assert!((b.totals[k] - factor * a.totals[k]).abs() <= 1e-12 * b.totals[k]);
            let (fa, fb) = (fraction_within(&a, k, 400e-6), fraction_within(&b, k, 400e-6));
            prop_assert!((fa - fb).abs() <= 1e-12);
        }
    }

    #[test]
    fn fraction_within_is_monotone_and_reaches_one(seed in any::<u64>(), r1 in 1e-4f64..2e-3, r2 in 1e-4f64..2e-3) {
        let r = heat(seed, &NoiseModel::default());
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        for k in 0..3 {
            let (a, b) = (fraction_within(&r, k, lo), fraction_within(&r, k, hi));
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(a <= b + 1e-12);
            prop_assert_eq!(fraction_within(&r, k, 1.0), 1.0);
            let cum = r.cumulative_by_distance(k);
            prop_assert!(cum.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1 + 1e-12));
            prop_assert!((cum.last().unwrap().1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_weight_follows_power_law(beta in 0.0f64..3.0, f in 1e5f64..1e7) {
        let n = NoiseModel { s0: 2e-20, beta, reference_frequency: 1e6 };
        let expected = 2e-20 * (1e6 / f).powf(beta);
        prop_assert!((n.at(f) - expected).abs() <= 1e-12 * expected);
    }
}

#[test]
fn zero_couplings_give_zero_rates() {
    let p = plate();
    let f = frame();
    let zero: Vec<PatchCouplings<f64>> = (0..3)
        .map(|k| PatchCouplings { direction: Vec3::from_f64(f.axes[k]), values: vec![0.0; p.len()], method: CouplingMethod::Direct })
        .collect();
    let r = per_patch_heating(p, &zero, &f, &NoiseModel::default(), &IonSpecies::yb171()).unwrap();
    assert_eq!(r.totals, [0.0; 3]);
    assert_eq!(fraction_within(&r, 0, 1.0), 0.0);
}

#[test]
fn misaligned_couplings_are_rejected() {
    let p = plate();
    let mut c = random_couplings(1, p.len());
    c.swap(0, 1);
    assert!(per_patch_heating(p, &c, &frame(), &NoiseModel::default(), &IonSpecies::yb171()).is_err());
}
