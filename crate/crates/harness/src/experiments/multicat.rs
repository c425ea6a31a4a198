//! A single neuron answering each of several classes with its own spike
//! count, for spike-timing and for rate-coded inputs.

use serde_json::json;
use spikelearn::gen::{noisy_instance, poisson_pattern, rate_pattern, RateTemplate, SimRng};
use spikelearn::rules::{apply_momentum, MomentumState, Prepared, Rule};
use spikelearn::SpikePattern;

use super::{run_records, run_seed};
use crate::common::{init_weights, mean_std, stream_rng, Stopwatch};
use crate::config::ExperimentConfig;
use crate::output::{ExperimentOutput, Table};
use crate::{row, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coding {
    Time,
    Rate,
}

impl Coding {
    pub fn name(self) -> &'static str {
        match self {
            Coding::Time => "time",
            Coding::Rate => "rate",
        }
    }
}

enum Templates {
    Time(Vec<SpikePattern>),
    Rate(Vec<RateTemplate>),
}

impl Templates {
    fn instance(&self, class: usize, cfg: &ExperimentConfig, rng: &mut SimRng) -> Result<SpikePattern> {
        Ok(match self {
            Templates::Time(t) => noisy_instance(&t[class], cfg.train_jitter_ms, cfg.train_p_del, rng)?,
            Templates::Rate(t) => rate_pattern(&t[class], cfg.duration_ms, rng)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassResponse {
    pub run: usize,
    pub coding: Coding,
    pub class: usize,
    pub target: usize,
    pub mean: f64,
    pub std: f64,
    /// Evaluation responses, one per instance.
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodingSummary {
    pub run: usize,
    pub coding: Coding,
    pub rule: Rule,
    /// Fraction of instances whose count is nearest to their own target.
    pub accuracy: f64,
    pub last_epoch_errors: usize,
    pub train_time_s: f64,
    pub inference_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct MulticatResult {
    pub responses: Vec<ClassResponse>,
    pub summaries: Vec<CodingSummary>,
}

/// Index of the target closest to `n`; ties go to the earlier class.
pub fn nearest_target(targets: &[usize], n: usize) -> usize {
    let mut best = 0;
    for (i, &t) in targets.iter().enumerate() {
        if t.abs_diff(n) < targets[best].abs_diff(n) {
            best = i;
        }
    }
    best
}

pub fn run(cfg: &ExperimentConfig) -> Result<MulticatResult> {
    let neuron = cfg.neuron();
    let rule = cfg.rules[0];
    let n_classes = cfg.targets.len();
    let mut responses = Vec::new();
    let mut summaries = Vec::new();
    for r in 0..cfg.runs {
        let seed = run_seed(cfg, r);
        for (ci, coding) in [Coding::Time, Coding::Rate].into_iter().enumerate() {
            let base = 16 * ci as u64;
            let mut trng = stream_rng(seed, base);
            let templates = match coding {
                Coding::Time => Templates::Time(
                    (0..n_classes)
                        .map(|_| poisson_pattern(cfg.n_synapses, cfg.duration_ms, cfg.rate_hz, &mut trng))
                        .collect::<spikelearn::Result<_>>()?,
                ),
                Coding::Rate => Templates::Rate(
                    (0..n_classes)
                        .map(|_| RateTemplate::half_split(cfg.n_synapses, cfg.low_rate_hz, cfg.high_rate_hz, &mut trng))
                        .collect::<spikelearn::Result<_>>()?,
                ),
            };
            let mut w = init_weights(cfg.n_synapses, cfg.w_init_mean, cfg.w_init_std, &mut stream_rng(seed, base + 1))?;
            let mut momentum = MomentumState::new(cfg.n_synapses);
            let mut rng = stream_rng(seed, base + 2);
            let mut train_watch = Stopwatch::default();
            let mut last_errors = 0;
            for _ in 0..cfg.train_epochs {
                last_errors = 0;
                for _ in 0..cfg.instances_per_epoch {
                    for (c, &target) in cfg.targets.iter().enumerate() {
                        let p = Prepared::new(templates.instance(c, cfg, &mut rng)?, neuron.tau)?;
                        train_watch.time(|| -> Result<()> {
                            let (sim, dw) = p.delta(rule, w.as_slice(), neuron.theta, target, cfg.lambda)?;
                            if sim.n_out != target {
                                last_errors += 1;
                                let applied = apply_momentum(&dw, &mut momentum, cfg.mu)?;
                                w.add(&applied)?;
                            }
                            Ok(())
                        })?;
                    }
                }
            }

            let mut rng = stream_rng(seed, base + 3);
            let mut infer_watch = Stopwatch::default();
            let mut hits = 0;
            for (c, &target) in cfg.targets.iter().enumerate() {
                let mut counts = Vec::with_capacity(cfg.test_per_class);
                for _ in 0..cfg.test_per_class {
                    let p = Prepared::new(templates.instance(c, cfg, &mut rng)?, neuron.tau)?;
                    let n = infer_watch.time(|| p.count(w.as_slice(), neuron.theta))?;
                    hits += usize::from(nearest_target(&cfg.targets, n) == c);
                    counts.push(n);
                }
                let as_f: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
                let (mean, std) = mean_std(&as_f);
                responses.push(ClassResponse {
                    run: r,
                    coding,
                    class: c,
                    target,
                    mean,
                    std,
                    counts,
                });
            }
            summaries.push(CodingSummary {
                run: r,
                coding,
                rule,
                accuracy: hits as f64 / (n_classes * cfg.test_per_class) as f64,
                last_epoch_errors: last_errors,
                train_time_s: train_watch.seconds(),
                inference_time_s: infer_watch.seconds(),
            });
        }
    }
    Ok(MulticatResult { responses, summaries })
}

impl MulticatResult {
    pub fn into_output(self, cfg: &ExperimentConfig) -> ExperimentOutput {
        let mut main = Table::new("responses", &["run", "coding", "class", "target", "mean_n_out", "std_n_out"]);
        let mut hist = Table::new("histogram", &["run", "coding", "class", "n_out", "count"]);
        for r in &self.responses {
            main.push(row![r.run, r.coding.name(), r.class, r.target, r.mean, r.std]);
            let max = r.counts.iter().copied().max().unwrap_or(0);
            let mut bins = vec![0usize; max + 1];
            for &n in &r.counts {
                bins[n] += 1;
            }
            for (n, &count) in bins.iter().enumerate().filter(|(_, &c)| c > 0) {
                hist.push(row![r.run, r.coding.name(), r.class, n, count]);
            }
        }
        let mut acc = Table::new("accuracy", &["run", "coding", "rule", "accuracy", "last_epoch_errors"]);
        for s in &self.summaries {
            acc.push(row![s.run, s.coding.name(), s.rule, s.accuracy, s.last_epoch_errors]);
        }
        let walls: Vec<_> = self
            .summaries
            .iter()
            .map(|s| json!({"run": s.run, "coding": s.coding.name(), "training": s.train_time_s, "inference_total": s.inference_time_s}))
            .collect();
        ExperimentOutput {
            tables: vec![main, acc, hist],
            runs: run_records(cfg, cfg.runs),
            wall_times: json!({ "per_coding": walls }),
            failure: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::nearest_target;

    #[test]
    fn nearest_target_breaks_ties_low() {
        let t = [5, 10, 15];
        assert_eq!(nearest_target(&t, 0), 0);
        assert_eq!(nearest_target(&t, 8), 1);
        assert_eq!(nearest_target(&t, 12), 1);
        assert_eq!(nearest_target(&t, 13), 2);
        assert_eq!(nearest_target(&t, 40), 2);
        assert_eq!(nearest_target(&[7], 100), 0);
    }
}
