use proptest::prelude::*;

use sdmqkd::analysis::{binary_entropy, decoy_bounds, mutual_information, bsc_joint, DecoyObservables};
use sdmqkd::channel::{analytic_gain, analytic_qber, ChannelParams};
use sdmqkd::cli::parse_config;
use sdmqkd::multiplex::{scheme_rate, LinkParams, Scheme, SchemeParams};
use sdmqkd::protocol::{
    cross_correlation, run_session, ClassCounts, DecoyStatistics, IntensitySchedule, PairSetup, Prbs, SessionConfig,
};

fn counts() -> impl Strategy<Value = ClassCounts> {
    (0u64..1000, 0u64..1000, 0u64..1000, 0u64..1000).prop_map(|(a, b, c, d)| {
        let mut v = [a, b, c, d];
        v.sort_unstable();
        ClassCounts {
            sent: v[3],
            clicked: v[2],
            sifted: v[1],
            errors: v[0],
        }
    })
}

fn stats() -> impl Strategy<Value = DecoyStatistics> {
    (counts(), counts(), counts()).prop_map(|(signal, decoy, vacuum)| DecoyStatistics { signal, decoy, vacuum })
}

fn merged(a: &DecoyStatistics, b: &DecoyStatistics) -> DecoyStatistics {
    let mut out = *a;
    out.merge(b);
    out
}

proptest! {
    #[test]
    fn decoy_bounds_are_sound(
        log_eta in -4.0f64..(0.5f64).log10(),
        mu in 0.1f64..0.9,
        pd in 0.0f64..1e-5,
        ed in 0.0f64..0.1,
        ratio in 0.1f64..0.6,
    ) {
        let eta = 10f64.powf(log_eta);
        let ch = ChannelParams {
            det_efficiency: eta,
            dark_count_prob: pd,
            e_det: ed,
            crosstalk_db: None,
            ..ChannelParams::lossless()
        };
        let sched = IntensitySchedule { v: mu * ratio, ..IntensitySchedule::with_signal(mu) };
        let y0 = ch.vacuum_yield();
        let obs = DecoyObservables {
            q_u: analytic_gain(sched.u, &ch),
            e_u: analytic_qber(sched.u, &ch).unwrap(),
            q_v: analytic_gain(sched.v, &ch),
            e_v: analytic_qber(sched.v, &ch).unwrap(),
            y0,
        };
        let b = decoy_bounds(&obs, &sched).unwrap();
        let y1 = y0 + eta - y0 * eta;
        let e1 = (0.5 * y0 + ed * eta) / y1;
        prop_assert!(b.y1_lower <= y1 * (1.0 + 1e-12));
        prop_assert!(b.e1_upper >= e1 * (1.0 - 1e-12));
        prop_assert!((0.0..=0.5).contains(&b.e1_upper));
    }

    #[test]
    fn statistics_merge_is_associative_and_commutative(a in stats(), b in stats(), c in stats()) {
        prop_assert_eq!(merged(&merged(&a, &b), &c), merged(&a, &merged(&b, &c)));
        prop_assert_eq!(merged(&a, &b), merged(&b, &a));
        prop_assert!(merged(&a, &b).validate().is_ok());
    }

    #[test]
    fn entropy_and_information_bounds(p in 0.0f64..=1.0) {
        let h = binary_entropy(p).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert!((h - binary_entropy(1.0 - p).unwrap()).abs() < 1e-12);
        let i = mutual_information(&bsc_joint(p)).unwrap();
        prop_assert!((i - (1.0 - h)).abs() < 1e-9);
    }

    #[test]
    fn scheme_ordering(length in 0.0f64..200.0, half in 2u32..32) {
        let link = LinkParams { length_km: length, ..LinkParams::default() };
        let n = 2 * half;
        let r = |s| scheme_rate(&SchemeParams::new(s, n, link)).unwrap();
        prop_assert!(r(Scheme::Sdm) >= r(Scheme::Hd) * (1.0 - 1e-12));
        prop_assert!(r(Scheme::Tdm) < r(Scheme::Wdm));
        prop_assert!(r(Scheme::Sdm) > 0.0);
    }

    #[test]
    fn prbs_never_locks_up(seed in 1u32..0x7FFF_FFFF) {
        let mut g = Prbs::prbs31(seed).unwrap();
        let ones: u32 = (0..4096).map(|_| g.next_bit() as u32).sum();
        prop_assert!(ones > 0 && ones < 4096);
    }

    #[test]
    fn correlation_is_bounded(a in prop::collection::vec(any::<bool>(), 1..200), b in prop::collection::vec(any::<bool>(), 1..200)) {
        let c = cross_correlation(&a, &b);
        prop_assert!(c.is_nan() || (-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
    }

    #[test]
    fn blocks_merge_to_the_session_total(seed in any::<u64>(), block in 1u64..700) {
        let cfg = SessionConfig {
            n_pulses: 2_000,
            rep_rate_hz: 5000.0,
            basis_prob_x: 0.5,
            bob_basis_prob_x: 0.5,
            pairs: vec![PairSetup {
                prbs_seed: (seed as u32 & 0x7FFF_FFFF).max(1),
                rng_seed: seed,
                schedule: IntensitySchedule::with_signal(0.6),
            }],
            block_pulses: Some(block),
        };
        let ch = ChannelParams { e_det: 0.05, dark_count_prob: 1e-3, ..ChannelParams::lossless() };
        let out = run_session(&cfg, &[ch]).unwrap();
        let mut total = DecoyStatistics::default();
        for b in &out[0].blocks {
            total.merge(b);
        }
        prop_assert_eq!(total, out[0].statistics);
        prop_assert_eq!(out[0].blocks.len() as u64, 2_000u64.div_ceil(block));
    }

    #[test]
    fn channel_ranges_are_enforced(pd in -1.0f64..2.0) {
        let res = parse_config(&format!("[channel]\ndark_count_prob = {pd:?}\n"));
        if (0.0..1.0).contains(&pd) {
            prop_assert!(res.is_ok());
        } else {
            let key = res.unwrap_err().key;
            prop_assert_eq!(key.as_deref(), Some("channel.dark_count_prob"));
        }
    }
}
