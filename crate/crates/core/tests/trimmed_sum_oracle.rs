mod common;

use common::{brute_ls_profile, brute_margin, brute_tsum, counts_of, grid_value, neighbours, Counts, GRID};
use proptest::prelude::*;
use ptr_accountant::trimmed_sum::{local_sensitivity_profile, safety_margin, tsum, GradientBatch, SensitivityProfile};
use ptr_accountant::SafetyMargin;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GS: f64 = 1.0;

fn batch_of(c: &Counts) -> GradientBatch {
    let mut values = Vec::new();
    for (i, &k) in c.iter().enumerate() {
        values.extend(std::iter::repeat_n(grid_value(i), k as usize));
    }
    GradientBatch::from_scalars(&values, GS).unwrap()
}

fn random_counts(rng: &mut ChaCha8Rng) -> Counts {
    let m = rng.random_range(0..=8);
    let values: Vec<usize> = (0..m).map(|_| rng.random_range(1..GRID)).collect();
    counts_of(&values)
}

#[test]
fn local_sensitivity_and_margin_match_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let c = random_counts(&mut rng);
        let trim = rng.random_range(1..=3);
        let tau = rng.random_range(0..=10) as f64 / 10.0 + 0.05;
        let profile = SensitivityProfile::new(trim, tau, GS).unwrap();
        let batch = batch_of(&c);
        let expected = brute_ls_profile(&c, trim, trim);
        let got = local_sensitivity_profile(&batch, &profile);
        assert_eq!(got.len(), expected.len());
        for (r, (g, e)) in got.iter().zip(&expected).enumerate() {
            assert!((g - e).abs() < 1e-12, "{c:?} F={trim} r={r}: {g} vs {e}");
        }
        let margin = safety_margin(&batch, &profile);
        match brute_margin(&expected, tau) {
            Some(r) => assert_eq!(margin, SafetyMargin::Finite(r as u64), "{c:?} F={trim} tau={tau}"),
            None => assert!(tau >= GS && margin.is_infinite()),
        }
    }
}

#[test]
fn margin_and_tsum_are_stable_under_single_edits() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let c = random_counts(&mut rng);
        let trim = rng.random_range(1..=3);
        let tau = rng.random_range(1..=9) as f64 / 10.0 + 0.05;
        let profile = SensitivityProfile::new(trim, tau, GS).unwrap();
        let batch = batch_of(&c);
        let here = safety_margin(&batch, &profile).value();
        let t_here = tsum(&batch, trim)[0];
        assert!((t_here - brute_tsum(&c, trim)).abs() < 1e-12);
        for n in neighbours(&c) {
            let nb = batch_of(&n);
            let there = safety_margin(&nb, &profile).value();
            assert!((here - there).abs() <= 1.0, "{c:?} -> {n:?}");
            assert!((tsum(&nb, trim)[0] - t_here).abs() <= GS + 1e-12);
        }
    }
}

#[test]
fn infinite_margin_when_tau_reaches_gs() {
    let batch = GradientBatch::from_scalars(&[0.2, 0.9], GS).unwrap();
    let profile = SensitivityProfile::new(1, GS, GS).unwrap();
    assert_eq!(safety_margin(&batch, &profile), SafetyMargin::Infinite);
}

proptest! {
    #[test]
    fn tsum_ignores_batch_order(mut values in prop::collection::vec(0.0f64..1.0, 0..12), trim in 0usize..5, seed in any::<u64>()) {
        values.sort_by(f64::total_cmp);
        values.dedup();
        let original = GradientBatch::from_scalars(&values, GS).unwrap();
        let mut shuffled = values.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let permuted = GradientBatch::from_scalars(&shuffled, GS).unwrap();
        prop_assert_eq!(tsum(&original, trim), tsum(&permuted, trim));
    }

    #[test]
    fn profile_is_monotone_and_capped(values in prop::collection::vec(0.0f64..1.0, 0..12), trim in 0usize..5, tau in 0.01f64..2.0) {
        let batch = GradientBatch::from_scalars(&values, GS).unwrap();
        let profile = SensitivityProfile::new(trim, tau, GS).unwrap();
        let ls = local_sensitivity_profile(&batch, &profile);
        prop_assert!(ls.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(ls.iter().all(|&v| (0.0..=GS).contains(&v)));
        match safety_margin(&batch, &profile) {
            SafetyMargin::Finite(r) => prop_assert!(r as usize <= trim && tau < GS),
            SafetyMargin::Infinite => prop_assert!(tau >= GS),
        }
    }
}
