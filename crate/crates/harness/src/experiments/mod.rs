//! The experiment families. Each module exposes a typed `run` plus a
//! conversion into emitted tables.

use spikelearn::gen::derive_seed;

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{ExperimentOutput, RunRecord};
use crate::Result;

pub mod classify;
pub mod derivative;
pub mod efficiency;
pub mod feature;
pub mod multicat;
pub mod stdp_feature;

/// Validates `cfg` and runs its experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Derivative => Ok(derivative::run(cfg)?.into_output(cfg)),
        Experiment::Efficiency | Experiment::InitSweep => Ok(efficiency::run(cfg)?.into_output(cfg)),
        Experiment::Classify => Ok(classify::run(cfg)?.into_output(cfg)),
        Experiment::Multicat => Ok(multicat::run(cfg)?.into_output(cfg)),
        Experiment::StdpFeature => Ok(stdp_feature::run(cfg)?.into_output(cfg)),
        Experiment::MlFeature => Ok(feature::run_single(cfg)?.into_output(cfg)),
        Experiment::MultiFeature => Ok(feature::run_multi(cfg)?.into_output(cfg)),
    }
}

pub(crate) fn run_seed(cfg: &ExperimentConfig, index: usize) -> u64 {
    derive_seed(cfg.seed, index as u64)
}

pub(crate) fn run_records(cfg: &ExperimentConfig, n: usize) -> Vec<RunRecord> {
    (0..n)
        .map(|index| RunRecord {
            index,
            seed: run_seed(cfg, index),
        })
        .collect()
}
