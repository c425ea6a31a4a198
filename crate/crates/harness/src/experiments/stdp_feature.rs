//! Unsupervised STDP on a feature embedded in background: selectivity first
//! emerges, then fades with further training.

use serde_json::json;
use spikelearn::gen::{embed_motifs, poisson_pattern, EvalSpec, Motif, MotifRole, Placement, SimRng, TrialSpec};
use spikelearn::rules::train_stdp_cycle;
use spikelearn::{NeuronConfig, SpikePattern, WeightVector};

use super::feature::{eval_spec, measure};
use super::{run_records, run_seed};
use crate::common::{init_weights, stream_rng, Stopwatch};
use crate::config::ExperimentConfig;
use crate::output::{ExperimentOutput, Table};
use crate::{row, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub cycle: usize,
    pub n_evals: usize,
    /// Mean `R_f - R_phi`.
    pub selectivity: f64,
    pub selectivity_std: f64,
    /// Mean `R_b - R_phi`.
    pub background_selectivity: f64,
    /// Spikes per feature-length window of plain background.
    pub background_response: f64,
    pub mean_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    Initial,
    Peak,
    Final,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Initial => "initial",
            Phase::Peak => "peak",
            Phase::Final => "final",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StdpRun {
    pub run: usize,
    pub seed: u64,
    pub checkpoints: Vec<Checkpoint>,
    /// Re-measured with the larger evaluation count.
    pub headline: Vec<(Phase, Checkpoint)>,
    pub peak_found: bool,
    pub decay_observed: bool,
    pub cycles_run: usize,
    pub train_time_s: f64,
}

impl StdpRun {
    pub fn phase(&self, phase: Phase) -> Option<&Checkpoint> {
        self.headline.iter().find(|(p, _)| *p == phase).map(|(_, c)| c)
    }
}

#[derive(Debug, Clone)]
pub struct StdpResult {
    pub runs: Vec<StdpRun>,
}

fn checkpoint(
    cycle: usize,
    w: &WeightVector,
    feature: &SpikePattern,
    n_evals: usize,
    spec: &EvalSpec,
    neuron: &NeuronConfig,
    rng: &mut SimRng,
) -> Result<Checkpoint> {
    let f = measure(w, Some(feature), n_evals, spec, neuron, rng)?;
    let b = measure(w, None, n_evals, spec, neuron, rng)?;
    let base = 0.5 * (f.base_count + b.base_count);
    Ok(Checkpoint {
        cycle,
        n_evals,
        selectivity: f.selectivity,
        selectivity_std: f.selectivity_std,
        background_selectivity: b.selectivity,
        background_response: base * spec.window_ms / spec.duration_ms,
        mean_weight: w.mean(),
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<StdpResult> {
    let neuron = cfg.neuron();
    let params = cfg.stdp();
    let spec = eval_spec(cfg);
    let trials = TrialSpec {
        n_synapses: cfg.n_synapses,
        background_ms: cfg.background_ms,
        background_hz: cfg.background_hz,
        noise_hz: cfg.noise_hz,
        placement: Placement::Replace {
            rate_hz: cfg.occurrence_hz,
        },
    };
    let mut runs = Vec::new();
    for r in 0..cfg.runs {
        let seed = run_seed(cfg, r);
        let feature = Motif {
            pattern: poisson_pattern(cfg.n_synapses, cfg.motif_ms, cfg.rate_hz, &mut stream_rng(seed, 0))?,
            role: MotifRole::Feature { desired: 1 },
        };
        let initial = init_weights(cfg.n_synapses, cfg.w_init_mean, cfg.w_init_std, &mut stream_rng(seed, 1))?;
        let mut train_rng = stream_rng(seed, 2);
        let mut eval_rng = stream_rng(seed, 3);
        let mut watch = Stopwatch::default();

        let mut w = initial.clone();
        let mut checkpoints = vec![checkpoint(0, &w, &feature.pattern, cfg.eval_trials, &spec, &neuron, &mut eval_rng)?];
        let mut peak: Option<(Checkpoint, WeightVector)> = None;
        let mut below = 0;
        let mut decay_observed = false;
        let mut cycle = 0;
        while cycle < cfg.max_cycles && !decay_observed {
            let batch = (0..cfg.trials_per_cycle)
                .map(|_| Ok(embed_motifs(&trials, std::slice::from_ref(&feature), &mut train_rng)?.pattern))
                .collect::<Result<Vec<_>>>()?;
            w = watch.time(|| train_stdp_cycle(&batch, w, &params, &neuron))?;
            cycle += 1;
            if cycle % cfg.eval_every != 0 {
                continue;
            }
            let c = checkpoint(cycle, &w, &feature.pattern, cfg.eval_trials, &spec, &neuron, &mut eval_rng)?;
            checkpoints.push(c);
            let selective = c.background_response < cfg.background_limit && c.selectivity > 0.0;
            if selective && peak.as_ref().is_none_or(|(p, _)| c.selectivity > p.selectivity) {
                peak = Some((c, w.clone()));
                below = 0;
                continue;
            }
            if let Some((p, _)) = &peak {
                if c.selectivity <= (1.0 - cfg.decay_fraction) * p.selectivity {
                    below += 1;
                } else {
                    below = 0;
                }
                decay_observed = below >= cfg.decay_confirm;
            }
        }

        let n = cfg.headline_eval_trials;
        let mut head_rng = stream_rng(seed, 4);
        let mut headline = vec![(
            Phase::Initial,
            checkpoint(0, &initial, &feature.pattern, n, &spec, &neuron, &mut head_rng)?,
        )];
        if let Some((p, pw)) = &peak {
            headline.push((Phase::Peak, checkpoint(p.cycle, pw, &feature.pattern, n, &spec, &neuron, &mut head_rng)?));
        }
        headline.push((Phase::Final, checkpoint(cycle, &w, &feature.pattern, n, &spec, &neuron, &mut head_rng)?));
        runs.push(StdpRun {
            run: r,
            seed,
            checkpoints,
            headline,
            peak_found: peak.is_some(),
            decay_observed,
            cycles_run: cycle,
            train_time_s: watch.seconds(),
        });
    }
    Ok(StdpResult { runs })
}

impl StdpResult {
    pub fn into_output(self, cfg: &ExperimentConfig) -> ExperimentOutput {
        let cols = [
            "run",
            "cycle",
            "n_evals",
            "feature_selectivity",
            "feature_selectivity_std",
            "background_selectivity",
            "background_response",
            "mean_weight",
        ];
        let mut curve = Table::new("selectivity", &cols);
        let mut head_cols = vec!["phase"];
        head_cols.extend_from_slice(&cols);
        let mut head = Table::new("phases", &head_cols);
        let mut summary = Table::new("summary", &["run", "cycles_run", "peak_found", "decay_observed"]);
        for r in &self.runs {
            for c in &r.checkpoints {
                curve.push(row![
                    r.run,
                    c.cycle,
                    c.n_evals,
                    c.selectivity,
                    c.selectivity_std,
                    c.background_selectivity,
                    c.background_response,
                    c.mean_weight
                ]);
            }
            for (p, c) in &r.headline {
                head.push(row![
                    p.name(),
                    r.run,
                    c.cycle,
                    c.n_evals,
                    c.selectivity,
                    c.selectivity_std,
                    c.background_selectivity,
                    c.background_response,
                    c.mean_weight
                ]);
            }
            summary.push(row![r.run, r.cycles_run, r.peak_found, r.decay_observed]);
        }
        let walls: Vec<_> = self
            .runs
            .iter()
            .map(|r| json!({"run": r.run, "training": r.train_time_s, "per_cycle": r.train_time_s / r.cycles_run.max(1) as f64}))
            .collect();
        ExperimentOutput {
            tables: vec![curve, head, summary],
            runs: run_records(cfg, cfg.runs),
            wall_times: json!({ "per_run": walls }),
            failure: None,
        }
    }
}
