//! Feature detection with count-supervised rules: the neuron only learns the
//! total number of spikes a trial should elicit.

use serde_json::json;
use spikelearn::gen::{
    embed_motifs, eval_trial, poisson_pattern, EvalSpec, Motif, MotifRole, OccurrenceCounts, Placement, SimRng,
    TrialSpec,
};
use spikelearn::rules::{apply_momentum, MomentumState, Prepared, Rule};
use spikelearn::{NeuronConfig, SpikePattern, WeightVector};

use super::{run_records, run_seed};
use crate::common::{init_weights, mean, mean_std, stream_rng, Stopwatch};
use crate::config::ExperimentConfig;
use crate::output::{ExperimentOutput, Table};
use crate::tracker::ConvergenceTracker;
use crate::{row, Result};

/// Mean response to a motif (or to plain background) measured against the
/// same trial without it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    /// Mean of `R_x - R_phi`.
    pub selectivity: f64,
    pub selectivity_std: f64,
    /// Mean spike count on the bare background.
    pub base_count: f64,
}

pub fn eval_spec(cfg: &ExperimentConfig) -> EvalSpec {
    let mut spec = EvalSpec::new(cfg.n_synapses, cfg.background_hz, cfg.noise_hz, cfg.motif_ms);
    spec.duration_ms = cfg.eval_ms;
    spec
}

pub fn measure(
    weights: &WeightVector,
    motif: Option<&SpikePattern>,
    n_evals: usize,
    spec: &EvalSpec,
    neuron: &NeuronConfig,
    rng: &mut SimRng,
) -> Result<Response> {
    let mut diffs = Vec::with_capacity(n_evals);
    let mut base = Vec::with_capacity(n_evals);
    for _ in 0..n_evals {
        let (bare, with) = eval_trial(spec, motif, rng)?;
        let r_phi = Prepared::new(bare, neuron.tau)?.count(weights.as_slice(), neuron.theta)?;
        let r_x = Prepared::new(with, neuron.tau)?.count(weights.as_slice(), neuron.theta)?;
        diffs.push(r_x as f64 - r_phi as f64);
        base.push(r_phi as f64);
    }
    let (selectivity, selectivity_std) = mean_std(&diffs);
    Ok(Response {
        selectivity,
        selectivity_std,
        base_count: mean(&base),
    })
}

/// Motifs plus the background, each with its desired response.
fn probes(motifs: &[Motif]) -> Vec<(String, Option<&SpikePattern>, usize)> {
    let mut out = Vec::new();
    let (mut nf, mut nd) = (0, 0);
    for m in motifs {
        let label = match m.role {
            MotifRole::Feature { .. } => {
                nf += 1;
                format!("feature{nf}")
            }
            MotifRole::Distractor => {
                nd += 1;
                format!("distractor{nd}")
            }
        };
        out.push((label, Some(&m.pattern), m.role.desired()));
    }
    out.push(("background".to_string(), None, 0));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    /// Mean `|n_o - n_d|` over the cycle's training trials.
    pub train_error: f64,
    /// Mean absolute deviation of the probe responses from their targets.
    pub error: f64,
    pub responses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRun {
    pub run: usize,
    pub seed: u64,
    pub rule: Rule,
    pub w_init_mean: f64,
    pub converged: bool,
    /// Training cycles completed when the qualifying window began.
    pub convergence_cycle: Option<usize>,
    pub cycles_run: usize,
    pub initial_rate_hz: f64,
    pub labels: Vec<String>,
    pub desired: Vec<usize>,
    pub final_responses: Vec<f64>,
    pub final_error: f64,
    pub curve: Vec<CycleRecord>,
    pub train_time_s: f64,
}

struct Task {
    motifs: Vec<Motif>,
    trials: TrialSpec,
}

fn train_task(
    task: &Task,
    rule: Rule,
    mut w: WeightVector,
    cfg: &ExperimentConfig,
    seed: u64,
    run: usize,
    w_init_mean: f64,
) -> Result<FeatureRun> {
    let neuron = cfg.neuron();
    let spec = eval_spec(cfg);
    let probes = probes(&task.motifs);
    let desired: Vec<usize> = probes.iter().map(|p| p.2).collect();
    let mut train_rng = stream_rng(seed, 2);
    let mut eval_rng = stream_rng(seed, 3);
    let mut momentum = MomentumState::new(w.len());
    let mut tracker = ConvergenceTracker::new(cfg.convergence_window, cfg.convergence_tolerance);
    let mut watch = Stopwatch::default();
    let mut curve = Vec::new();
    let mut initial_rate_hz = f64::NAN;
    for cycle in 0..cfg.max_cycles {
        let mut abs_err = 0;
        let mut spikes = 0;
        let mut duration_ms = 0.0;
        for _ in 0..cfg.trials_per_cycle {
            let trial = embed_motifs(&task.trials, &task.motifs, &mut train_rng)?;
            let n_d = trial.desired_count;
            duration_ms += trial.pattern.duration();
            let p = Prepared::new(trial.pattern, neuron.tau)?;
            watch.time(|| -> Result<()> {
                let (sim, dw) = p.delta(rule, w.as_slice(), neuron.theta, n_d, cfg.lambda)?;
                spikes += sim.n_out;
                if sim.n_out != n_d {
                    abs_err += sim.n_out.abs_diff(n_d);
                    let applied = apply_momentum(&dw, &mut momentum, cfg.mu)?;
                    w.add(&applied)?;
                }
                Ok(())
            })?;
        }
        if cycle == 0 {
            initial_rate_hz = spikes as f64 / (duration_ms / 1000.0);
        }
        let responses = probes
            .iter()
            .map(|(_, m, _)| Ok(measure(&w, *m, cfg.eval_trials, &spec, &neuron, &mut eval_rng)?.selectivity))
            .collect::<Result<Vec<f64>>>()?;
        let error = mean_abs_error(&responses, &desired);
        curve.push(CycleRecord {
            cycle,
            train_error: abs_err as f64 / cfg.trials_per_cycle as f64,
            error,
            responses,
        });
        if tracker.observe(cycle, error) {
            break;
        }
    }
    let mut final_rng = stream_rng(seed, 4);
    let final_responses = probes
        .iter()
        .map(|(_, m, _)| Ok(measure(&w, *m, cfg.headline_eval_trials, &spec, &neuron, &mut final_rng)?.selectivity))
        .collect::<Result<Vec<f64>>>()?;
    Ok(FeatureRun {
        run,
        seed,
        rule,
        w_init_mean,
        converged: tracker.converged(),
        convergence_cycle: tracker.converged_at().map(|c| c + 1),
        cycles_run: curve.len(),
        initial_rate_hz,
        labels: probes.iter().map(|p| p.0.clone()).collect(),
        final_error: mean_abs_error(&final_responses, &desired),
        desired,
        final_responses,
        curve,
        train_time_s: watch.seconds(),
    })
}

fn mean_abs_error(responses: &[f64], desired: &[usize]) -> f64 {
    let e: Vec<f64> = responses.iter().zip(desired).map(|(r, &d)| (r - d as f64).abs()).collect();
    mean(&e)
}

fn make_motifs(cfg: &ExperimentConfig, rng: &mut SimRng) -> Result<Vec<Motif>> {
    let roles = cfg
        .feature_targets
        .iter()
        .map(|&d| MotifRole::Feature { desired: d })
        .chain(std::iter::repeat_n(MotifRole::Distractor, cfg.n_distractors));
    roles
        .map(|role| {
            Ok(Motif {
                pattern: poisson_pattern(cfg.n_synapses, cfg.motif_ms, cfg.rate_hz, rng)?,
                role,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FeatureResult {
    pub runs: Vec<FeatureRun>,
    pub sweep: Vec<f64>,
    pub n_seeds: usize,
}

impl FeatureResult {
    pub fn converged_fraction(&self) -> f64 {
        self.runs.iter().filter(|r| r.converged).count() as f64 / self.runs.len() as f64
    }
}

/// One feature amid background, occurrences replacing background at a fixed
/// rate; swept over the initial weight mean.
pub fn run_single(cfg: &ExperimentConfig) -> Result<FeatureResult> {
    let trials = TrialSpec {
        n_synapses: cfg.n_synapses,
        background_ms: cfg.background_ms,
        background_hz: cfg.background_hz,
        noise_hz: cfg.noise_hz,
        placement: Placement::Replace {
            rate_hz: cfg.occurrence_hz,
        },
    };
    run_sweep(cfg, trials, &cfg.w_init_sweep)
}

/// Several features and distractors spliced into background, each a Poisson
/// number of times.
pub fn run_multi(cfg: &ExperimentConfig) -> Result<FeatureResult> {
    let trials = TrialSpec {
        n_synapses: cfg.n_synapses,
        background_ms: cfg.background_ms,
        background_hz: cfg.background_hz,
        noise_hz: cfg.noise_hz,
        placement: Placement::Insert {
            counts: OccurrenceCounts::Poisson {
                mean: cfg.occurrence_mean,
            },
        },
    };
    run_sweep(cfg, trials, &[cfg.w_init_mean])
}

fn run_sweep(cfg: &ExperimentConfig, trials: TrialSpec, sweep: &[f64]) -> Result<FeatureResult> {
    let mut runs = Vec::new();
    for (si, &w_mean) in sweep.iter().enumerate() {
        for r in 0..cfg.runs {
            let index = si * cfg.runs + r;
            let seed = run_seed(cfg, index);
            let task = Task {
                motifs: make_motifs(cfg, &mut stream_rng(seed, 0))?,
                trials: trials.clone(),
            };
            for &rule in &cfg.rules {
                let w = init_weights(cfg.n_synapses, w_mean, cfg.w_init_std, &mut stream_rng(seed, 1))?;
                runs.push(train_task(&task, rule, w, cfg, seed, index, w_mean)?);
            }
        }
    }
    Ok(FeatureResult {
        runs,
        sweep: sweep.to_vec(),
        n_seeds: sweep.len() * cfg.runs,
    })
}

impl FeatureResult {
    pub fn into_output(self, cfg: &ExperimentConfig) -> ExperimentOutput {
        let mut summary = Table::new(
            "convergence",
            &["rule", "w_init_mean", "runs", "converged", "mean_cycles", "std_cycles", "mean_initial_rate_hz"],
        );
        for &w_mean in &self.sweep {
            for &rule in &cfg.rules {
                let sel: Vec<&FeatureRun> = self.runs.iter().filter(|r| r.rule == rule && r.w_init_mean == w_mean).collect();
                let cycles: Vec<f64> = sel.iter().filter_map(|r| r.convergence_cycle).map(|c| c as f64).collect();
                let (mc, sc) = mean_std(&cycles);
                let rates: Vec<f64> = sel.iter().map(|r| r.initial_rate_hz).collect();
                summary.push(row![rule, w_mean, sel.len(), cycles.len(), mc, sc, mean(&rates)]);
            }
        }
        let mut runs = Table::new(
            "runs",
            &["rule", "w_init_mean", "run", "converged", "convergence_cycle", "cycles_run", "initial_rate_hz", "final_error"],
        );
        let mut responses = Table::new("responses", &["rule", "w_init_mean", "run", "pattern", "desired", "response"]);
        let labels = self.runs.first().map(|r| r.labels.clone()).unwrap_or_default();
        let mut header: Vec<String> = ["rule", "w_init_mean", "run", "cycle", "train_error", "error"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(labels.iter().map(|l| format!("r_{l}")));
        let mut curve = Table::with_header("curve", header);
        for r in &self.runs {
            runs.push(row![
                r.rule,
                r.w_init_mean,
                r.run,
                r.converged,
                r.convergence_cycle,
                r.cycles_run,
                r.initial_rate_hz,
                r.final_error
            ]);
            for ((l, &d), &x) in r.labels.iter().zip(&r.desired).zip(&r.final_responses) {
                responses.push(row![r.rule, r.w_init_mean, r.run, l.as_str(), d, x]);
            }
            for c in &r.curve {
                let mut cells = row![r.rule, r.w_init_mean, r.run, c.cycle, c.train_error, c.error];
                cells.extend(c.responses.iter().map(|&x| crate::output::fcell(x)));
                curve.push(cells);
            }
        }
        let walls: Vec<_> = self
            .runs
            .iter()
            .map(|r| {
                json!({
                    "rule": r.rule,
                    "w_init_mean": r.w_init_mean,
                    "run": r.run,
                    "training": r.train_time_s,
                    "per_cycle": r.train_time_s / r.cycles_run.max(1) as f64,
                })
            })
            .collect();
        let failure = (!self.runs.iter().any(|r| r.converged)).then(|| "no run converged".to_string());
        ExperimentOutput {
            tables: vec![summary, runs, responses, curve],
            runs: run_records(cfg, self.n_seeds),
            wall_times: json!({ "per_run": walls }),
            failure,
        }
    }
}
