use proptest::prelude::*;
use spikelearn::gen::{poisson_pattern, rng_from_seed};
use spikelearn::{psp_sum, simulate, simulate_clock, NeuronConfig, SpikePattern, WeightVector};

const TAU: f64 = 20.0;

fn random_weights(n: usize, mean: f64, std: f64, seed: u64) -> WeightVector {
    use rand::Rng;
    let mut rng = rng_from_seed(seed);
    WeightVector::new((0..n).map(|_| mean + std * (rng.gen::<f64>() * 2.0 - 1.0) * 1.7).collect()).unwrap()
}

/// Poisson pattern with times snapped to a grid of `step` ms.
fn grid_pattern(n: usize, duration: f64, rate: f64, step: f64, seed: u64) -> SpikePattern {
    let p = poisson_pattern(n, duration, rate, &mut rng_from_seed(seed)).unwrap();
    let spikes = p
        .spikes()
        .iter()
        .map(|tr| tr.iter().map(|&t| ((t / step).floor() * step).min(duration)).collect())
        .collect();
    SpikePattern::from_unsorted(duration, spikes).unwrap()
}

fn min_gap(p: &SpikePattern) -> f64 {
    let mut all: Vec<f64> = p.spikes().iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn event_and_clock_agree(seed in any::<u64>(), theta in 0.3f64..2.0) {
        let dt = 0.01;
        // Spikes on a coarse grid keep inter-event gaps well above dt.
        let p = grid_pattern(40, 300.0, 5.0, 0.5, seed);
        let w = random_weights(40, 0.15, 0.1, seed ^ 1);
        let cfg = NeuronConfig::new(theta, TAU).unwrap();
        let ev = simulate(&p, &w, &cfg).unwrap();
        let ck = simulate_clock(&p, &w, &cfg, dt).unwrap();
        prop_assume!(min_gap(&p) > dt);
        prop_assert_eq!(ev.n_out, ck.n_out);
        for (a, b) in ev.output_times.iter().zip(&ck.output_times) {
            prop_assert!((a - b).abs() <= dt);
        }
    }

    #[test]
    fn adding_a_positive_input_never_reduces_output(
        seed in any::<u64>(),
        syn in 0usize..30,
        t in 0.0f64..200.0,
        extra in 0.0f64..0.5,
    ) {
        let p = poisson_pattern(30, 200.0, 8.0, &mut rng_from_seed(seed)).unwrap();
        let mut w = random_weights(30, 0.1, 0.08, seed ^ 7).into_inner();
        w[syn] = extra;
        let w = WeightVector::new(w).unwrap();
        let cfg = NeuronConfig::new(0.8, TAU).unwrap();
        let before = simulate(&p, &w, &cfg).unwrap().n_out;
        let mut spikes = p.clone().into_spikes();
        spikes[syn].push(t);
        let augmented = SpikePattern::from_unsorted(200.0, spikes).unwrap();
        let after = simulate(&augmented, &w, &cfg).unwrap().n_out;
        prop_assert!(after >= before, "{after} < {before}");
    }

    #[test]
    fn subthreshold_voltage_is_weighted_kernel_sum(seed in any::<u64>()) {
        let p = poisson_pattern(25, 300.0, 6.0, &mut rng_from_seed(seed)).unwrap();
        let w = random_weights(25, 0.05, 0.05, seed ^ 3);
        let cfg = NeuronConfig::new(1e6, TAU).unwrap();
        let r = simulate(&p, &w, &cfg).unwrap();
        prop_assert_eq!(r.n_out, 0);
        for e in &r.event_trace {
            let k = psp_sum(&p, e.time, TAU).unwrap();
            let v: f64 = k.iter().zip(w.as_slice()).map(|(a, b)| a * b).sum();
            prop_assert!((v - e.v_pre).abs() <= 1e-10 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn reset_count_bounded_and_deterministic(seed in any::<u64>(), theta in 0.05f64..1.5) {
        let p = poisson_pattern(30, 200.0, 10.0, &mut rng_from_seed(seed)).unwrap();
        let w = random_weights(30, 0.2, 0.2, seed ^ 5);
        let cfg = NeuronConfig::new(theta, TAU).unwrap();
        let a = simulate(&p, &w, &cfg).unwrap();
        let b = simulate(&p, &w, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.n_out, a.output_times.len());
        prop_assert_eq!(a.v_min_reset.is_some(), a.n_out > 0);
        let mut fired = 0usize;
        for e in &a.event_trace {
            prop_assert!(e.v_post <= theta);
            let n = a.output_times.iter().filter(|&&t| t == e.time).count();
            fired += n;
            prop_assert!(n as f64 <= (e.v_pre / theta).ceil().max(0.0));
        }
        prop_assert_eq!(fired, a.n_out);
    }
}

#[test]
fn dense_poisson_pattern_matches_clock_count() {
    // N=500, T=500 ms, 4 Hz, times on the 0.01 ms grid
    let p = grid_pattern(500, 500.0, 4.0, 0.01, 2024);
    let w = random_weights(500, 0.02, 0.02, 99);
    let cfg = NeuronConfig::new(1.0, TAU).unwrap();
    let ev = simulate(&p, &w, &cfg).unwrap();
    let ck = simulate_clock(&p, &w, &cfg, 0.01).unwrap();
    assert!(ev.n_out > 0);
    assert_eq!(ev.n_out, ck.n_out);
    for (a, b) in ev.output_times.iter().zip(&ck.output_times) {
        assert!((a - b).abs() <= 0.01);
    }
}

#[test]
fn clock_example_matches_event_example() {
    let p = SpikePattern::new(50.0, vec![vec![10.0]]).unwrap();
    let w = WeightVector::new(vec![2.5]).unwrap();
    let cfg = NeuronConfig::new(1.0, TAU).unwrap();
    assert_eq!(simulate_clock(&p, &w, &cfg, 0.01).unwrap().n_out, 2);
    let empty = SpikePattern::empty(3, 50.0).unwrap();
    assert_eq!(simulate_clock(&empty, &WeightVector::zeros(3), &cfg, 0.01).unwrap().n_out, 0);
}
