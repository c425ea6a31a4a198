//! Agreement between the analytic threshold gradient and finite differences.

use serde_json::json;
use spikelearn::gen::poisson_pattern;
use spikelearn::sts::{cosine_similarity, StsSolver};

use super::{run_records, run_seed};
use crate::common::{init_weights, mean_std, stream_rng, Stopwatch};
use crate::config::ExperimentConfig;
use crate::output::{ExperimentOutput, Table};
use crate::{row, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub run: usize,
    pub k: usize,
    /// `None` when `k` exceeds what the pattern can produce.
    pub theta_star: Option<f64>,
    pub cosine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSummary {
    pub k: usize,
    pub n: usize,
    pub excluded: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct DerivativeResult {
    pub samples: Vec<Sample>,
    pub summary: Vec<KSummary>,
    pub wall_time_s: f64,
}

pub fn run(cfg: &ExperimentConfig) -> Result<DerivativeResult> {
    let tau = cfg.tau();
    let mut watch = Stopwatch::default();
    let mut samples = Vec::new();
    for r in 0..cfg.runs {
        let mut rng = stream_rng(run_seed(cfg, r), 0);
        let pattern = poisson_pattern(cfg.n_synapses, cfg.duration_ms, cfg.rate_hz, &mut rng)?;
        let w = init_weights(cfg.n_synapses, cfg.w_init_mean, cfg.w_init_std, &mut rng)?;
        let solver = StsSolver::new(&pattern, tau)?;
        for k in 1..=cfg.k_max {
            let sample = watch.time(|| -> Result<Sample> {
                let Some(point) = solver.point(w.as_slice(), k)? else {
                    return Ok(Sample { run: r, k, theta_star: None, cosine: None });
                };
                let fd = solver.numerical_gradient(w.as_slice(), k, cfg.xi)?;
                Ok(Sample {
                    run: r,
                    k,
                    theta_star: Some(point.theta_star),
                    cosine: fd.and_then(|fd| cosine_similarity(&point.grad, &fd).ok()),
                })
            })?;
            samples.push(sample);
        }
    }
    let summary = (1..=cfg.k_max)
        .map(|k| {
            let cos: Vec<f64> = samples.iter().filter(|s| s.k == k).filter_map(|s| s.cosine).collect();
            let (mean, std) = mean_std(&cos);
            KSummary {
                k,
                n: cos.len(),
                excluded: cfg.runs - cos.len(),
                mean,
                std,
            }
        })
        .collect();
    Ok(DerivativeResult {
        samples,
        summary,
        wall_time_s: watch.seconds(),
    })
}

impl DerivativeResult {
    pub fn into_output(self, cfg: &ExperimentConfig) -> ExperimentOutput {
        let mut main = Table::new("cosine", &["k", "n", "excluded", "mean_cosine", "std_cosine"]);
        for s in &self.summary {
            main.push(row![s.k, s.n, s.excluded, s.mean, s.std]);
        }
        let mut per_run = Table::new("samples", &["run", "k", "representable", "theta_star", "cosine"]);
        for s in &self.samples {
            per_run.push(row![s.run, s.k, s.theta_star.is_some(), s.theta_star, s.cosine]);
        }
        let failure = self
            .summary
            .iter()
            .all(|s| s.n == 0)
            .then(|| "no output count was representable".to_string());
        ExperimentOutput {
            tables: vec![main, per_run],
            runs: run_records(cfg, cfg.runs),
            wall_times: json!({ "gradients_total": self.wall_time_s }),
            failure,
        }
    }
}
