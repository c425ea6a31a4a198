//! Epochs needed to train a neuron to a target spike count, swept over
//! targets (`efficiency`) or initial weight means (`init-sweep`).

use serde_json::json;
use spikelearn::gen::poisson_pattern;
use spikelearn::rules::{train_to_count, LearnerConfig, Rule};

use super::{run_records, run_seed};
use crate::common::{init_weights, mean_std, stream_rng};
use crate::config::{Experiment, ExperimentConfig};
use crate::output::{ExperimentOutput, Table};
use crate::{row, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run: usize,
    pub rule: Rule,
    pub target: usize,
    pub w_init_mean: f64,
    pub initial_n_out: usize,
    pub converged: bool,
    pub epochs: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub rule: Rule,
    pub target: usize,
    pub w_init_mean: f64,
    pub runs: usize,
    pub converged: usize,
    /// Over converged runs only.
    pub mean_epochs: f64,
    pub std_epochs: f64,
    pub mean_wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct EfficiencyResult {
    pub outcomes: Vec<RunOutcome>,
    pub conditions: Vec<Condition>,
}

fn sweep(cfg: &ExperimentConfig) -> Vec<(usize, f64)> {
    match cfg.experiment {
        Experiment::InitSweep => cfg
            .targets
            .iter()
            .flat_map(|&t| cfg.w_init_sweep.iter().map(move |&w| (t, w)))
            .collect(),
        _ => cfg.targets.iter().map(|&t| (t, cfg.w_init_mean)).collect(),
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<EfficiencyResult> {
    let neuron = cfg.neuron();
    let conditions = sweep(cfg);
    let mut outcomes = Vec::new();
    for r in 0..cfg.runs {
        let seed = run_seed(cfg, r);
        let pattern = poisson_pattern(cfg.n_synapses, cfg.duration_ms, cfg.rate_hz, &mut stream_rng(seed, 0))?;
        for &(target, w_mean) in &conditions {
            // the same draw for every rule and target of this run
            let initial = init_weights(cfg.n_synapses, w_mean, cfg.w_init_std, &mut stream_rng(seed, 1))?;
            let initial_n_out = spikelearn::simulate(&pattern, &initial, &neuron)?.n_out;
            for &rule in &cfg.rules {
                let learner = LearnerConfig {
                    rule,
                    lambda: cfg.lambda,
                    mu: cfg.mu,
                    max_epochs: cfg.max_epochs,
                    rng_seed: seed,
                    shuffle: cfg.shuffle,
                };
                let report = train_to_count(std::slice::from_ref(&pattern), &[target], initial.clone(), &learner, &neuron)?;
                outcomes.push(RunOutcome {
                    run: r,
                    rule,
                    target,
                    w_init_mean: w_mean,
                    initial_n_out,
                    converged: report.converged,
                    epochs: report.epochs,
                    wall_time_s: report.wall_time_s,
                });
            }
        }
    }
    let mut summary = Vec::new();
    for &(target, w_mean) in &conditions {
        for &rule in &cfg.rules {
            let sel: Vec<&RunOutcome> = outcomes
                .iter()
                .filter(|o| o.rule == rule && o.target == target && o.w_init_mean == w_mean)
                .collect();
            let ok: Vec<&RunOutcome> = sel.iter().copied().filter(|o| o.converged).collect();
            let epochs: Vec<f64> = ok.iter().map(|o| o.epochs as f64).collect();
            let (mean_epochs, std_epochs) = mean_std(&epochs);
            let walls: Vec<f64> = ok.iter().map(|o| o.wall_time_s).collect();
            summary.push(Condition {
                rule,
                target,
                w_init_mean: w_mean,
                runs: sel.len(),
                converged: ok.len(),
                mean_epochs,
                std_epochs,
                mean_wall_time_s: mean_std(&walls).0,
            });
        }
    }
    Ok(EfficiencyResult {
        outcomes,
        conditions: summary,
    })
}

impl EfficiencyResult {
    pub fn into_output(self, cfg: &ExperimentConfig) -> ExperimentOutput {
        let mut main = Table::new(
            "epochs",
            &["target", "w_init_mean", "rule", "runs", "converged", "mean_epochs", "std_epochs"],
        );
        for c in &self.conditions {
            main.push(row![c.target, c.w_init_mean, c.rule, c.runs, c.converged, c.mean_epochs, c.std_epochs]);
        }
        let mut per_run = Table::new(
            "runs",
            &["run", "target", "w_init_mean", "rule", "initial_n_out", "converged", "epochs"],
        );
        for o in &self.outcomes {
            per_run.push(row![o.run, o.target, o.w_init_mean, o.rule, o.initial_n_out, o.converged, o.epochs]);
        }
        let walls: Vec<_> = self
            .conditions
            .iter()
            .map(|c| {
                json!({
                    "target": c.target,
                    "w_init_mean": c.w_init_mean,
                    "rule": c.rule,
                    "mean_wall_time": c.mean_wall_time_s,
                })
            })
            .collect();
        let failure = self
            .conditions
            .iter()
            .find(|c| c.converged == 0)
            .map(|c| format!("no run converged for {} at target {} (w_init_mean {})", c.rule, c.target, c.w_init_mean));
        ExperimentOutput {
            tables: vec![main, per_run],
            runs: run_records(cfg, cfg.runs),
            wall_times: json!({ "per_condition": walls }),
            failure,
        }
    }
}
