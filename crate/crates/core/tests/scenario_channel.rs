use hapnet::channel::{path_loss, sample_fading, ChannelRealization, FadingModel};
use hapnet::config::Config;
use hapnet::rates::BhStation;
use hapnet::rng::{stream, Stream};
use hapnet::scenario::Tier;
use proptest::prelude::*;

fn small(users: usize) -> Config {
    let mut cfg = Config::default();
    cfg.counts.users = users;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generated_scenario_has_requested_shape(seed in 0u64..1000, users in 0usize..300) {
        let cfg = small(users);
        let s = cfg.scenario(seed).unwrap();
        prop_assert_eq!(s.users.len(), users);
        prop_assert_eq!(s.tbs.len(), cfg.counts.tbs);
        prop_assert_eq!(s.haps.len(), cfg.counts.haps);
        prop_assert_eq!(s.gateways.len(), cfg.counts.gateways);
        let side = s.params.area_side_m;
        for u in &s.users {
            prop_assert!((0.0..=side).contains(&u.x) && (0.0..=side).contains(&u.y));
            prop_assert_eq!(u.z, 0.0);
        }
        prop_assert_eq!(&s, &cfg.scenario(seed).unwrap());
    }

    #[test]
    fn sampled_gains_are_reproducible_and_finite(seed in 0u64..1000) {
        let s = small(40).scenario(seed).unwrap();
        let a = ChannelRealization::sample(&s, &mut stream(seed, Stream::Fading(0))).unwrap();
        let b = ChannelRealization::sample(&s, &mut stream(seed, Stream::Fading(0))).unwrap();
        prop_assert_eq!(&a, &b);
        for tier in Tier::ALL {
            for st in 0..a.station_count(tier) {
                for u in 0..a.users() {
                    for rb in 0..a.rb_count(tier) {
                        let g = a.fh(tier, st, u, rb);
                        prop_assert!(g.is_finite() && g >= 0.0);
                    }
                }
            }
        }
        for station in BhStation::all(s.gateways.len()) {
            for hap in 0..s.haps.len() {
                prop_assert!(a.bh(station, hap).is_finite() && a.bh(station, hap) >= 0.0);
            }
        }
    }

    #[test]
    fn path_gain_falls_with_distance_and_frequency(d in 1.0f64..1e7, k in 1.0001f64..10.0, f in 1e8f64..1e10) {
        let g = path_loss(d, f).unwrap();
        prop_assert!(path_loss(d * k, f).unwrap() < g);
        prop_assert!(path_loss(d, f * k).unwrap() < g);
        // Inverse-square law.
        let ratio = g / path_loss(2.0 * d, f).unwrap();
        prop_assert!((ratio - 4.0).abs() < 1e-9);
    }

    #[test]
    fn fading_samples_are_nonnegative(seed in 0u64..10_000) {
        let mut rng = stream(seed, Stream::Aux(5));
        for model in [
            FadingModel::Rayleigh,
            FadingModel::Rician { kappa: 10.0 },
            FadingModel::ShadowedRician { omega0: 0.372, omega1: 0.0129, omega2: 7.64 },
        ] {
            let x = sample_fading(&model, &mut rng);
            prop_assert!(x.is_finite() && x >= 0.0);
        }
    }
}

#[test]
fn different_seeds_drop_users_differently() {
    let cfg = small(50);
    assert_ne!(cfg.scenario(1).unwrap().users, cfg.scenario(2).unwrap().users);
}

#[test]
fn pinned_and_mean_gains_differ_by_fading_mean() {
    let s = small(10).scenario(3).unwrap();
    let pinned = ChannelRealization::pinned(&s).unwrap();
    let mean = ChannelRealization::mean(&s).unwrap();
    for tier in Tier::ALL {
        let m = s.tier(tier).fading.mean();
        for st in 0..s.station_count(tier) {
            for u in 0..s.user_count() {
                let (a, b) = (pinned.fh(tier, st, u, 0), mean.fh(tier, st, u, 0));
                assert!((b - m * a).abs() <= 1e-12 * b.abs(), "{tier} {st} {u}: {b} vs {m} x {a}");
            }
        }
    }
}

#[test]
fn zero_distance_is_rejected() {
    assert!(path_loss(0.0, 1e9).is_err());
    assert!(path_loss(1.0, 0.0).is_err());
}
