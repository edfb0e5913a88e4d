//! Cross-module properties: the two dynamics, the two decomposition
//! directions, and the discrete/continuum bridges must all agree.

use proptest::prelude::*;

use bbs_ghd::codec::{reconstruct, slot_decompose};
use bbs_ghd::empirics::{
    check_scale_bounds, evolve_via, sample_iid_balls, sample_slot_bernoulli, EvolutionPath,
    SlotRateSpec, StepRates,
};
use bbs_ghd::scattering::{free_shift, scatter, unscatter};
use bbs_ghd::speeds::{effective_speeds, DensityVector};
use bbs_ghd::{bbs, codec};

fn size_multiset(config: &bbs::BallConfig) -> Vec<usize> {
    let mut sizes: Vec<usize> = codec::decompose_fast(config)
        .unwrap()
        .solitons()
        .iter()
        .map(|s| s.size)
        .collect();
    sizes.sort_unstable();
    sizes
}

fn two_rate_spec(p1: f64, p2: f64) -> SlotRateSpec {
    SlotRateSpec::new(vec![
        StepRates::constant(1.0, 2.0, p1).unwrap(),
        StepRates::constant(0.0, 1.0, p2).unwrap(),
    ])
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn carrier_and_slot_shift_agree_on_random_configs(
        sites in 0usize..300,
        p in 0.05f64..0.45,
        k in 0usize..100,
        trial in 0u64..32,
    ) {
        let config = sample_iid_balls(sites, p, 17, trial).unwrap();
        evolve_via(&config, k, EvolutionPath::BothAsserted).unwrap();
    }

    #[test]
    fn soliton_sizes_are_conserved_by_evolution(
        sites in 0usize..300,
        p in 0.05f64..0.45,
        k in 0usize..60,
        trial in 0u64..32,
    ) {
        let config = sample_iid_balls(sites, p, 19, trial).unwrap();
        prop_assert_eq!(size_multiset(&bbs::evolve(&config, k)), size_multiset(&config));
    }

    #[test]
    fn sampled_slots_round_trip_exactly(n in 50u64..400, trial in 0u64..64) {
        let zeta = sample_slot_bernoulli(&SlotRateSpec::two_species_default(), n, 23, trial);
        let config = reconstruct(&zeta);
        prop_assert_eq!(slot_decompose(&config).unwrap(), zeta);
    }

    #[test]
    fn rate_integrals_round_trip_through_scattering(
        p1 in 0.01f64..0.20,
        p2 in 0.01f64..0.14,
    ) {
        prop_assume!(p1 + 2.0 * p2 < 0.49);
        let sc = two_rate_spec(p1, p2).scattered_profile();
        let back = scatter(&unscatter(&sc).unwrap()).unwrap();
        for i in 1..=sc.max_size() {
            prop_assert!(sc.psibar(i).approx_eq(back.psibar(i), 1e-9));
        }
    }

    #[test]
    fn flow_preserves_species_masses(
        p1 in 0.01f64..0.20,
        p2 in 0.01f64..0.14,
        t in 0.0f64..3.0,
    ) {
        prop_assume!(p1 + 2.0 * p2 < 0.49);
        let spec = two_rate_spec(p1, p2);
        let sc = spec.scattered_profile();
        let frame = unscatter(&free_shift(&sc, t).unwrap()).unwrap();
        let far = 100.0;
        for i in 1..=2 {
            let mass = spec.rate(i).integral().eval(far);
            prop_assert!((frame.psi(i).eval(far) - mass).abs() < 1e-9);
        }
    }

    #[test]
    fn effective_speeds_satisfy_the_fixed_point(
        raw in proptest::collection::vec(0.0f64..1.0, 1..7),
    ) {
        let n = raw.len();
        let total: f64 = raw.iter().enumerate().map(|(k, r)| (k + 1) as f64 * r).sum();
        let scale = if total > 0.0 { 0.45 / total.max(1.0) } else { 0.0 };
        let rho: Vec<f64> = raw.iter().map(|r| r * scale).collect();
        let report = effective_speeds(&DensityVector::new(rho.clone()).unwrap()).unwrap();
        for i in 1..=n {
            let coupling: f64 = (1..=n)
                .map(|j| {
                    2.0 * i.min(j) as f64
                        * rho[j - 1]
                        * (report.speeds[i - 1] - report.speeds[j - 1])
                })
                .sum();
            prop_assert!((report.speeds[i - 1] - i as f64 - coupling).abs() < 1e-8);
        }
    }

    #[test]
    fn scale_bounds_hold_on_slot_sampled_configs(n in 50u64..300, trial in 0u64..64) {
        let zeta = sample_slot_bernoulli(&SlotRateSpec::two_species_default(), n, 29, trial);
        let report = check_scale_bounds(&reconstruct(&zeta)).unwrap();
        prop_assert!(report.i_max <= 2);
        prop_assert!(report.worst_slot_identity <= 16);
    }
}
