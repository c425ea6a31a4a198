//! Small helpers shared by the experiments.

use std::time::{Duration, Instant};

use rand_distr::{Distribution, Normal};
use spikelearn::gen::{rng_from_seed, SimRng};
use spikelearn::WeightVector;

use crate::Result;

/// Independent generator for one purpose (`stream`) within a run.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = rng_from_seed(seed);
    rng.set_stream(stream);
    rng
}

/// `n` weights drawn from N(mean, std).
pub fn init_weights(n: usize, mean: f64, std: f64, rng: &mut SimRng) -> Result<WeightVector> {
    let d = Normal::new(mean, std).map_err(|e| crate::HarnessError::Config(format!("initial weights: {e}")))?;
    Ok(WeightVector::new((0..n).map(|_| d.sample(rng)).collect())?)
}

/// Accumulates time spent inside [`Stopwatch::time`] only.
#[derive(Debug, Default, Clone, Copy)]
pub struct Stopwatch {
    total: Duration,
}

impl Stopwatch {
    pub fn time<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.total += start.elapsed();
        out
    }

    pub fn seconds(&self) -> f64 {
        self.total.as_secs_f64()
    }
}

/// Mean and population standard deviation; `(NaN, NaN)` when empty.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn mean(xs: &[f64]) -> f64 {
    mean_std(xs).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[2.0, 4.0]), (3.0, 1.0));
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        use rand::Rng;
        let a: u64 = stream_rng(5, 0).gen();
        let b: u64 = stream_rng(5, 1).gen();
        assert_ne!(a, b);
        assert_eq!(a, stream_rng(5, 0).gen::<u64>());
    }

    #[test]
    fn init_weights_moments() {
        let w = init_weights(20_000, 0.01, 0.01, &mut stream_rng(1, 0)).unwrap();
        let (m, s) = mean_std(w.as_slice());
        assert!((m - 0.01).abs() < 5e-4 && (s - 0.01).abs() < 5e-4);
        let z = init_weights(10, 0.05, 0.0, &mut stream_rng(1, 0)).unwrap();
        assert!(z.as_slice().iter().all(|&x| x == 0.05));
    }
}
