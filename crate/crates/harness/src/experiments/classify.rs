//! Three-class spike pattern classification under jitter and deletion noise.

use serde_json::json;
use spikelearn::gen::{noisy_instance, poisson_pattern, SimRng};
use spikelearn::rules::{Prepared, Rule};
use spikelearn::SpikePattern;

use super::{run_records, run_seed};
use crate::bank::ClassifierBank;
use crate::common::{init_weights, mean, stream_rng, Stopwatch};
use crate::config::ExperimentConfig;
use crate::output::{ExperimentOutput, Table};
use crate::{row, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Jitter,
    Deletion,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Jitter => "jitter",
            NoiseKind::Deletion => "deletion",
        }
    }

    /// (sigma_ms, p_del) for a level of this kind of noise alone.
    fn noise(self, level: f64) -> (f64, f64) {
        match self {
            NoiseKind::Jitter => (level, 0.0),
            NoiseKind::Deletion => (0.0, level),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelScore {
    pub run: usize,
    pub kind: NoiseKind,
    pub rule: Rule,
    pub level: f64,
    /// Fraction of correct (neuron, instance) decisions.
    pub accuracy: f64,
    /// Fraction of instances on which every neuron was right.
    pub pattern_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSummary {
    pub run: usize,
    pub kind: NoiseKind,
    pub rule: Rule,
    pub last_epoch_errors: usize,
    pub train_time_s: f64,
    pub inference_time_s: f64,
    pub inferences: usize,
}

#[derive(Debug, Clone)]
pub struct ClassifyResult {
    pub scores: Vec<LevelScore>,
    pub training: Vec<TrainingSummary>,
}

impl ClassifyResult {
    /// Accuracy averaged over runs.
    pub fn accuracy(&self, kind: NoiseKind, rule: Rule, level: f64) -> Option<(f64, f64)> {
        let sel: Vec<&LevelScore> = self
            .scores
            .iter()
            .filter(|s| s.kind == kind && s.rule == rule && s.level == level)
            .collect();
        if sel.is_empty() {
            return None;
        }
        let acc: Vec<f64> = sel.iter().map(|s| s.accuracy).collect();
        let pat: Vec<f64> = sel.iter().map(|s| s.pattern_accuracy).collect();
        Some((mean(&acc), mean(&pat)))
    }
}

fn prepared_instance(template: &SpikePattern, noise: (f64, f64), tau: f64, rng: &mut SimRng) -> Result<Prepared> {
    let p = noisy_instance(template, noise.0, noise.1, rng)?;
    Ok(Prepared::new(p, tau)?)
}

pub fn run(cfg: &ExperimentConfig) -> Result<ClassifyResult> {
    let neuron = cfg.neuron();
    let tau = neuron.tau;
    let mut scores = Vec::new();
    let mut training = Vec::new();
    for r in 0..cfg.runs {
        let seed = run_seed(cfg, r);
        let mut template_rng = stream_rng(seed, 0);
        let templates = (0..cfg.n_classes)
            .map(|_| poisson_pattern(cfg.n_synapses, cfg.duration_ms, cfg.rate_hz, &mut template_rng))
            .collect::<spikelearn::Result<Vec<_>>>()?;
        let sweeps = [
            (NoiseKind::Jitter, (cfg.train_jitter_ms, 0.0), &cfg.jitter_levels),
            (NoiseKind::Deletion, (0.0, cfg.train_p_del), &cfg.deletion_levels),
        ];
        for (kind_idx, (kind, train_noise, levels)) in sweeps.into_iter().enumerate() {
            for &rule in &cfg.rules {
                let kind_stream = 16 * kind_idx as u64;
                let mut init_rng = stream_rng(seed, kind_stream + 1);
                let neurons = (0..cfg.n_classes)
                    .map(|_| init_weights(cfg.n_synapses, cfg.w_init_mean, cfg.w_init_std, &mut init_rng))
                    .collect::<Result<Vec<_>>>()?;
                let readout = if rule == Rule::Bin { 0 } else { cfg.decision_count };
                let mut bank = ClassifierBank::new(neurons, readout);

                let mut train_rng = stream_rng(seed, kind_stream + 2);
                let mut train_watch = Stopwatch::default();
                let mut last_errors = 0;
                for _ in 0..cfg.train_epochs {
                    last_errors = 0;
                    for _ in 0..cfg.instances_per_epoch {
                        for (c, t) in templates.iter().enumerate() {
                            let p = prepared_instance(t, train_noise, tau, &mut train_rng)?;
                            last_errors += train_watch.time(|| {
                                bank.train(&p, c, rule, cfg.train_target, cfg.lambda, cfg.mu, &neuron)
                            })?;
                        }
                    }
                }

                let mut test_rng = stream_rng(seed, kind_stream + 3);
                let mut infer_watch = Stopwatch::default();
                let mut inferences = 0;
                for &level in levels.iter() {
                    let mut correct = 0;
                    let mut all_right = 0;
                    let mut decisions = 0;
                    for _ in 0..cfg.test_per_class {
                        for (c, t) in templates.iter().enumerate() {
                            let p = prepared_instance(t, kind.noise(level), tau, &mut test_rng)?;
                            let resp = infer_watch.time(|| bank.responses(&p, &neuron))?;
                            inferences += resp.len();
                            let (ok, all) = bank.score(&resp, c);
                            correct += ok;
                            decisions += resp.len();
                            all_right += usize::from(all);
                        }
                    }
                    scores.push(LevelScore {
                        run: r,
                        kind,
                        rule,
                        level,
                        accuracy: correct as f64 / decisions as f64,
                        pattern_accuracy: all_right as f64 / (cfg.test_per_class * cfg.n_classes) as f64,
                    });
                }
                training.push(TrainingSummary {
                    run: r,
                    kind,
                    rule,
                    last_epoch_errors: last_errors,
                    train_time_s: train_watch.seconds(),
                    inference_time_s: infer_watch.seconds(),
                    inferences,
                });
            }
        }
    }
    Ok(ClassifyResult { scores, training })
}

impl ClassifyResult {
    pub fn into_output(self, cfg: &ExperimentConfig) -> ExperimentOutput {
        let mut main = Table::new("accuracy", &["noise", "level", "rule", "runs", "accuracy", "pattern_accuracy"]);
        for (kind, levels) in [(NoiseKind::Jitter, &cfg.jitter_levels), (NoiseKind::Deletion, &cfg.deletion_levels)] {
            for &level in levels {
                for &rule in &cfg.rules {
                    if let Some((acc, pat)) = self.accuracy(kind, rule, level) {
                        main.push(row![kind.name(), level, rule, cfg.runs, acc, pat]);
                    }
                }
            }
        }
        let mut per_run = Table::new("runs", &["run", "noise", "level", "rule", "accuracy", "pattern_accuracy"]);
        for s in &self.scores {
            per_run.push(row![s.run, s.kind.name(), s.level, s.rule, s.accuracy, s.pattern_accuracy]);
        }
        let mut train = Table::new("training", &["run", "noise", "rule", "last_epoch_errors"]);
        for t in &self.training {
            train.push(row![t.run, t.kind.name(), t.rule, t.last_epoch_errors]);
        }
        let walls: Vec<_> = self
            .training
            .iter()
            .map(|t| {
                json!({
                    "run": t.run,
                    "noise": t.kind.name(),
                    "rule": t.rule,
                    "training": t.train_time_s,
                    "inference_total": t.inference_time_s,
                    "inference_per_neuron_pattern": t.inference_time_s / t.inferences.max(1) as f64,
                })
            })
            .collect();
        ExperimentOutput {
            tables: vec![main, per_run, train],
            runs: run_records(cfg, cfg.runs),
            wall_times: json!({ "per_bank": walls }),
            failure: None,
        }
    }
}
