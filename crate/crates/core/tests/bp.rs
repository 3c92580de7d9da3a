mod common;

use ldpc_replica::bp::*;
use ldpc_replica::channel::{embed_memoryless, MarkovChannelSpec, MemorylessChannelSpec};
use ldpc_replica::ensemble::Ensemble;
use ldpc_replica::graph::{encode_random_codeword, sample_tanner_graph};
use ldpc_replica::rng;

#[test]
fn leaf_checks_with_general_channels_match_enumeration() {
    for i in 0..20 {
        let gap = common::tree_instance_gap(i, 0);
        assert!(gap < 1e-9, "instance {i}: {gap}");
    }
}

#[test]
fn forests_with_iid_states_match_enumeration() {
    for i in 0..20 {
        let gap = common::tree_instance_gap(100 + i, 1);
        assert!(gap < 1e-9, "instance {i}: {gap}");
    }
}

#[test]
fn erasure_decoding_never_commits_to_a_wrong_bit() {
    let e = Ensemble::new(3, 6).unwrap();
    let c = MarkovChannelSpec::dec(0.6).unwrap();
    for seed in 0..3 {
        let g = sample_tanner_graph(&e, 600, seed).unwrap();
        let x = encode_random_codeword(&g, seed);
        let (y, _) = c.transmit(&x, &mut rng::stream(seed, &[9]));
        let out = joint_bp_decode(&g, &c, &y, 500, 1e-12).unwrap();
        for (m, &b) in out.marginals.iter().zip(&x) {
            assert!(*m == [0.5, 0.5] || m[b as usize] == 1.0, "{m:?}");
        }
        for m in out.state.v2c.iter().chain(&out.state.c2v) {
            assert!(*m == [0.5, 0.5] || *m == [1.0, 0.0] || *m == [0.0, 1.0]);
        }
    }
}

#[test]
fn simulation_is_deterministic() {
    let e = Ensemble::new(3, 6).unwrap();
    let c = MarkovChannelSpec::dec(0.55).unwrap();
    let a = simulate_rate(&e, 300, &c, 4, 200, 5).unwrap();
    let b = simulate_rate(&e, 300, &c, 4, 200, 5).unwrap();
    assert_eq!(a, b);
    assert!(a.errors.iter().all(|&k| k <= 300.0));
}

#[test]
fn residual_rate_is_monotone_in_erasure_probability() {
    let e = Ensemble::new(3, 6).unwrap();
    let trials = prepare_trials(&e, 1000, 8, 3).unwrap();
    let cfg = SimConfig::default();
    let mut prev: Option<SimStats> = None;
    for k in 0..6 {
        let eps = 0.40 + 0.05 * k as f64;
        let s = run_trials(
            &trials,
            &MarkovChannelSpec::dec(eps).unwrap(),
            &cfg,
            Some(eps),
        )
        .unwrap();
        if let Some(p) = &prev {
            assert!(
                s.mean_rate + 2.0 * s.std_err.hypot(p.std_err) >= p.mean_rate,
                "{} then {}",
                p.mean_rate,
                s.mean_rate
            );
        }
        prev = Some(s);
    }
}

#[test]
fn short_dec_codes_separate_good_and_bad_channels() {
    let e = Ensemble::new(3, 6).unwrap();
    let good = simulate_rate(&e, 4000, &MarkovChannelSpec::dec(0.45).unwrap(), 5, 1000, 1).unwrap();
    let bad = simulate_rate(&e, 4000, &MarkovChannelSpec::dec(0.65).unwrap(), 5, 1000, 1).unwrap();
    assert!(good.mean_rate < 1e-3, "{}", good.mean_rate);
    assert!(bad.mean_rate > 0.02, "{}", bad.mean_rate);
}

#[test]
fn embedded_bec_threshold_sits_just_below_scalar_recursion() {
    // At this length a single failed frame already exceeds the target rate,
    // so the crossing lands on the early side of the waterfall.
    let e = Ensemble::new(3, 6).unwrap();
    let family = |p: f64| Ok(embed_memoryless(&MemorylessChannelSpec::bec(p)?));
    let search = ThresholdSearch {
        lo: 0.35,
        hi: 0.5,
        ..ThresholdSearch::default()
    };
    let t = empirical_threshold(&e, family, 20_000, 20, DEFAULT_TARGET_RATE, 2, &search).unwrap();
    let oracle = common::bec_bp_threshold(3, 6);
    assert!(t < oracle + 0.005 && t > oracle - 0.02, "{t} vs {oracle}");
}

#[test]
fn missing_bracket_is_an_error() {
    let e = Ensemble::new(3, 6).unwrap();
    let search = ThresholdSearch {
        lo: 0.1,
        hi: 0.2,
        ..ThresholdSearch::default()
    };
    let r = empirical_threshold(
        &e,
        MarkovChannelSpec::dec,
        600,
        2,
        DEFAULT_TARGET_RATE,
        1,
        &search,
    );
    assert!(r.is_err());
}

#[test]
fn sim_csv_layout() {
    let e = Ensemble::new(3, 6).unwrap();
    let trials = prepare_trials(&e, 120, 2, 1).unwrap();
    let s = run_trials(
        &trials,
        &MarkovChannelSpec::dec(0.3).unwrap(),
        &SimConfig::default(),
        Some(0.3),
    )
    .unwrap();
    let mut buf = Vec::new();
    write_sim_csv(&[s], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("param,n,trials,mean_rate,std_err,avg_iters")
    );
    assert!(lines.next().unwrap().starts_with("0.3,120,2,"));
}
