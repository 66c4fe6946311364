mod common;

use hapnet::association::{solve_bh, solve_fh_fp, CenterEdgeSplit};
use hapnet::power::{mmu_power, msu_power, uniform_power, PowerConfig};
use hapnet::rates::{evaluate, Association};
use proptest::prelude::*;

fn fp_association(seed: u64) -> (hapnet::scenario::Scenario, hapnet::channel::ChannelRealization, Association) {
    let (s, g) = common::fuzz(seed);
    let fh = solve_fh_fp(&s, &g, &CenterEdgeSplit::compute(&s)).unwrap();
    let bh = solve_bh(&s, &g).unwrap();
    (s, g, Association { fh, bh })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_allocation_is_feasible(seed in 0u64..100_000) {
        let (s, g, a) = fp_association(seed);
        let cfg = PowerConfig::default();
        for p in [
            msu_power(&s, &g, &a, &cfg).unwrap().power,
            mmu_power(&s, &g, &a, &cfg).unwrap().power,
            uniform_power(&s, &g, &a),
        ] {
            let report = evaluate(&s, &g, &a, &p);
            prop_assert!(report.is_feasible(), "{:?}", report.violations);
        }
    }

    #[test]
    fn sum_rate_allocation_beats_uniform(seed in 0u64..100_000) {
        let (s, g, a) = fp_association(seed);
        let msu = msu_power(&s, &g, &a, &PowerConfig::default()).unwrap().power;
        let sum = |p| evaluate(&s, &g, &a, p).user_rates.iter().sum::<f64>();
        let (opt, uni) = (sum(&msu), sum(&uniform_power(&s, &g, &a)));
        prop_assert!(opt >= uni * (1.0 - 1e-9), "msu {} < uniform {}", opt, uni);
    }

    #[test]
    fn max_min_rate_is_met_by_every_powered_user(seed in 0u64..100_000) {
        let (s, g, a) = fp_association(seed);
        let out = mmu_power(&s, &g, &a, &PowerConfig::default()).unwrap();
        let report = evaluate(&s, &g, &a, &out.power);
        let r_min = out.r_min.unwrap_or(0.0);
        for (u, rate) in report.user_rates.iter().enumerate() {
            if report.user_power[u] > 0.0 {
                prop_assert!(*rate >= r_min * (1.0 - 1e-6), "user {} rate {} < {}", u, rate, r_min);
            }
        }
    }
}

#[test]
fn empty_association_gets_no_power() {
    let (s, g) = common::fuzz(7);
    let a = Association::default();
    let cfg = PowerConfig::default();
    assert!(msu_power(&s, &g, &a, &cfg).unwrap().power.p.values().all(|&w| w == 0.0));
    assert!(uniform_power(&s, &g, &a).p.is_empty());
}
