use proptest::prelude::*;
use spikelearn::gen::{poisson_pattern, rng_from_seed};
use spikelearn::pattern::{read_spike_csv, write_spike_csv};
use spikelearn::rules::{train_to_count, LearnerConfig, TrainReport};
use spikelearn::{NeuronConfig, SpikePattern, WeightVector};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pattern_round_trips(seed in any::<u64>(), n in 1usize..20) {
        let p = poisson_pattern(n, 250.0, 15.0, &mut rng_from_seed(seed)).unwrap();
        prop_assert_eq!(&SpikePattern::from_json(&p.to_json()).unwrap(), &p);
        let q = poisson_pattern(n, 100.0, 30.0, &mut rng_from_seed(seed ^ 1)).unwrap();
        let mut buf = Vec::new();
        write_spike_csv(&mut buf, &[(0, &p), (7, &q)]).unwrap();
        let back = read_spike_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, vec![(0, p), (7, q)]);
    }

    #[test]
    fn weights_round_trip(w in prop::collection::vec(-1e3f64..1e3, 1..50)) {
        let w = WeightVector::new(w).unwrap();
        prop_assert_eq!(&WeightVector::from_csv(&w.to_csv()).unwrap(), &w);
        let json = serde_json::to_string(&w).unwrap();
        prop_assert_eq!(serde_json::from_str::<WeightVector>(&json).unwrap(), w);
    }
}

#[test]
fn train_report_round_trips() {
    let p = SpikePattern::new(100.0, vec![vec![10.0]]).unwrap();
    let cfg = LearnerConfig { lambda: 0.05, ..LearnerConfig::default() };
    let r = train_to_count(&[p], &[1], WeightVector::zeros(1), &cfg, &NeuronConfig::new(1.0, 20.0).unwrap()).unwrap();
    assert!(r.converged);
    let json = serde_json::to_string(&r).unwrap();
    let back: TrainReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
}
