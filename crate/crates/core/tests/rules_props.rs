use proptest::prelude::*;
use spikelearn::gen::{poisson_pattern, rng_from_seed};
use spikelearn::rules::{apply_momentum, stdp_update, train_stdp_cycle, MomentumState, Prepared, Rule, StdpParams};
use spikelearn::{NeuronConfig, SpikePattern, WeightVector};

const TAU: f64 = 20.0;

fn brute_stdp(pre: &SpikePattern, post: &[f64], p: &StdpParams) -> Vec<f64> {
    pre.spikes()
        .iter()
        .map(|train| {
            let mut s = 0.0;
            for &tp in train {
                for &tq in post {
                    let dt = tp - tq;
                    if dt <= 0.0 {
                        s += p.a_p * (dt / p.tau_p).exp();
                    } else {
                        s -= p.a_n * (-dt / p.tau_n).exp();
                    }
                }
            }
            s
        })
        .collect()
}

fn sorted_times(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..200.0, 0..max_len).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn stdp_matches_all_pairs(
        pre in prop::collection::vec(sorted_times(12), 1..6),
        post in sorted_times(10),
    ) {
        let pattern = SpikePattern::new(200.0, pre).unwrap();
        let params = StdpParams::default();
        let fast = stdp_update(&pattern, &post, &params);
        let slow = brute_stdp(&pattern, &post, &params);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn momentum_is_linear(
        cur in prop::collection::vec(-1.0f64..1.0, 4),
        prev in prop::collection::vec(-1.0f64..1.0, 4),
        mu in 0.0f64..1.0,
        a in -3.0f64..3.0,
    ) {
        let run = |c: &[f64], p: &[f64]| {
            let mut st = MomentumState::new(4);
            st.prev_update = p.to_vec();
            apply_momentum(c, &mut st, mu).unwrap()
        };
        let out = run(&cur, &prev);
        for i in 0..4 {
            prop_assert_eq!(out[i], cur[i] + mu * prev[i]);
        }
        let scaled_c: Vec<f64> = cur.iter().map(|x| a * x).collect();
        let scaled_p: Vec<f64> = prev.iter().map(|x| a * x).collect();
        let out2 = run(&scaled_c, &scaled_p);
        for i in 0..4 {
            prop_assert!((out2[i] - a * out[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn stdp_cycle_keeps_weights_clamped(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let trials: Vec<SpikePattern> = (0..3)
            .map(|_| poisson_pattern(100, 300.0, 10.0, &mut rng).unwrap())
            .collect();
        let params = StdpParams { a_p: 0.05, a_n: 0.036, ..StdpParams::default() };
        let w = WeightVector::new(vec![0.09; 100]).unwrap();
        let out = train_stdp_cycle(&trials, w, &params, &NeuronConfig::new(1.0, TAU).unwrap()).unwrap();
        prop_assert!(out.as_slice().iter().all(|&x| (0.0..=0.1).contains(&x)));
    }

    #[test]
    fn multi_spike_updates_have_correct_sign(seed in any::<u64>(), n_d in 0usize..12) {
        use rand_distr::{Distribution, Normal};
        let mut rng = rng_from_seed(seed);
        let p = poisson_pattern(80, 300.0, 6.0, &mut rng).unwrap();
        let d = Normal::new(0.05, 0.05).unwrap();
        let w: Vec<f64> = (0..80).map(|_| d.sample(&mut rng)).collect();
        let prep = Prepared::new(p, TAU).unwrap();
        for rule in [Rule::Eml, Rule::Emlc] {
            let (sim, dw) = prep.delta(rule, &w, 1.0, n_d, 1e-4).unwrap();
            if sim.n_out > n_d {
                prop_assert!(dw.iter().all(|&x| x <= 0.0));
            } else if sim.n_out < n_d {
                prop_assert!(dw.iter().all(|&x| x >= 0.0));
            } else {
                prop_assert!(dw.iter().all(|&x| x == 0.0));
            }
        }
    }
}

#[test]
fn single_eml_step_rarely_hurts() {
    use rand::Rng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rng_from_seed(7);
    let (mut trials, mut ok) = (0, 0);
    while trials < 1000 {
        let p = poisson_pattern(100, 300.0, 6.0, &mut rng).unwrap();
        let d = Normal::new(0.04, 0.05).unwrap();
        let w: Vec<f64> = (0..100).map(|_| d.sample(&mut rng)).collect();
        let n_d = rng.gen_range(0..10);
        let prep = Prepared::new(p, TAU).unwrap();
        let (sim, dw) = prep.delta(Rule::Eml, &w, 1.0, n_d, 1e-4).unwrap();
        if sim.n_out == n_d {
            continue;
        }
        trials += 1;
        let w2: Vec<f64> = w.iter().zip(&dw).map(|(a, b)| a + b).collect();
        let after = prep.count(&w2, 1.0).unwrap();
        if after.abs_diff(n_d) <= sim.n_out.abs_diff(n_d) {
            ok += 1;
        }
    }
    assert!(ok >= 950, "{ok}/1000");
}
