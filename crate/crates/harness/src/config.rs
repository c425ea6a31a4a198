//! Experiment configuration: per-experiment presets, TOML files and
//! command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spikelearn::rules::{Rule, StdpParams};
use spikelearn::{calibrate_tau, NeuronConfig};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Derivative,
    Efficiency,
    InitSweep,
    Classify,
    Multicat,
    StdpFeature,
    MlFeature,
    MultiFeature,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Derivative,
        Experiment::Efficiency,
        Experiment::InitSweep,
        Experiment::Classify,
        Experiment::Multicat,
        Experiment::StdpFeature,
        Experiment::MlFeature,
        Experiment::MultiFeature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Derivative => "derivative",
            Experiment::Efficiency => "efficiency",
            Experiment::InitSweep => "init-sweep",
            Experiment::Classify => "classify",
            Experiment::Multicat => "multicat",
            Experiment::StdpFeature => "stdp-feature",
            Experiment::MlFeature => "ml-feature",
            Experiment::MultiFeature => "multi-feature",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment `{s}`")))
    }
}

/// Every tunable of every experiment. Fields irrelevant to the selected
/// experiment are carried along (and echoed in the manifest) but unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub runs: usize,
    pub out_dir: PathBuf,

    pub n_synapses: usize,
    pub duration_ms: f64,
    pub rate_hz: f64,
    pub theta: f64,
    /// Kernel decay constant; derived from `tau_m`/`tau_s` when absent.
    pub tau_ms: Option<f64>,
    pub tau_m: f64,
    pub tau_s: f64,

    pub rules: Vec<Rule>,
    pub lambda: f64,
    pub mu: f64,
    pub max_epochs: usize,
    pub shuffle: bool,
    pub w_init_mean: f64,
    pub w_init_std: f64,
    pub w_init_sweep: Vec<f64>,
    pub targets: Vec<usize>,

    pub k_max: usize,
    pub xi: f64,

    pub n_classes: usize,
    pub train_jitter_ms: f64,
    pub train_p_del: f64,
    pub jitter_levels: Vec<f64>,
    pub deletion_levels: Vec<f64>,
    pub train_epochs: usize,
    pub instances_per_epoch: usize,
    pub train_target: usize,
    pub decision_count: usize,
    pub test_per_class: usize,
    pub low_rate_hz: f64,
    pub high_rate_hz: f64,

    pub motif_ms: f64,
    pub background_ms: f64,
    pub background_hz: f64,
    pub noise_hz: f64,
    pub occurrence_hz: f64,
    pub occurrence_mean: f64,
    pub feature_targets: Vec<usize>,
    pub n_distractors: usize,
    pub trials_per_cycle: usize,
    pub max_cycles: usize,
    pub eval_ms: f64,
    pub eval_every: usize,
    pub eval_trials: usize,
    pub headline_eval_trials: usize,
    pub convergence_window: usize,
    pub convergence_tolerance: f64,

    pub a_plus: f64,
    pub a_minus_ratio: f64,
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub background_limit: f64,
    pub decay_fraction: f64,
    pub decay_confirm: usize,
}

impl ExperimentConfig {
    /// Defaults shared by all experiments, then the experiment's own setup.
    pub fn preset(experiment: Experiment) -> Self {
        let mut c = Self {
            experiment,
            seed: 1,
            runs: 100,
            out_dir: PathBuf::from("results"),
            n_synapses: 500,
            duration_ms: 500.0,
            rate_hz: 4.0,
            theta: 1.0,
            tau_ms: None,
            tau_m: 20.0,
            tau_s: 5.0,
            rules: vec![Rule::Eml, Rule::Emlc],
            lambda: 1e-4,
            mu: 0.0,
            max_epochs: 10_000,
            shuffle: false,
            w_init_mean: 0.01,
            w_init_std: 0.01,
            w_init_sweep: vec![0.0, 0.025, 0.05, 0.075, 0.1],
            targets: vec![10],
            k_max: 20,
            xi: 1e-6,
            n_classes: 3,
            train_jitter_ms: 2.0,
            train_p_del: 0.1,
            jitter_levels: vec![0.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
            deletion_levels: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            train_epochs: 300,
            instances_per_epoch: 10,
            train_target: 20,
            decision_count: 10,
            test_per_class: 100,
            low_rate_hz: 2.0,
            high_rate_hz: 10.0,
            motif_ms: 100.0,
            background_ms: 5000.0,
            background_hz: 4.0,
            noise_hz: 1.0,
            occurrence_hz: 3.0,
            occurrence_mean: 3.0,
            feature_targets: vec![1],
            n_distractors: 0,
            trials_per_cycle: 10,
            max_cycles: 5000,
            eval_ms: 2000.0,
            eval_every: 1,
            eval_trials: 20,
            headline_eval_trials: 200,
            convergence_window: 10,
            convergence_tolerance: 0.05,
            a_plus: 5e-6,
            a_minus_ratio: 0.72,
            tau_plus: 20.0,
            tau_minus: 40.0,
            w_min: 0.0,
            w_max: 0.1,
            background_limit: 0.5,
            decay_fraction: 0.5,
            decay_confirm: 3,
        };
        match experiment {
            Experiment::Derivative => {
                c.rate_hz = 6.0;
            }
            Experiment::Efficiency => {
                c.rate_hz = 6.0;
                c.targets = vec![1, 5, 10, 15, 20];
            }
            Experiment::InitSweep => {
                c.rate_hz = 10.0;
                c.duration_ms = 1000.0;
                c.targets = vec![10];
            }
            Experiment::Classify => {
                c.runs = 10;
                c.rate_hz = 2.0;
                c.rules = vec![Rule::Eml, Rule::Emlc, Rule::Bin];
                c.mu = 0.9;
                c.w_init_mean = 0.0;
                c.w_init_std = 0.001;
            }
            Experiment::Multicat => {
                c.runs = 1;
                c.rate_hz = 2.0;
                c.rules = vec![Rule::Eml];
                c.mu = 0.9;
                c.w_init_mean = 0.0;
                c.w_init_std = 0.001;
                c.targets = vec![5, 10, 15];
                c.train_epochs = 1000;
                c.instances_per_epoch = 1;
                c.test_per_class = 1000;
            }
            Experiment::StdpFeature => {
                c.runs = 1;
                c.rules = vec![Rule::Stdp];
                c.w_init_mean = 0.05;
                c.w_init_std = 0.01;
                c.max_cycles = 3000;
                c.eval_every = 20;
                c.eval_trials = 200;
                c.headline_eval_trials = 1000;
            }
            Experiment::MlFeature => {
                c.runs = 4;
                c.rules = vec![Rule::Eml];
                c.mu = 0.9;
            }
            Experiment::MultiFeature => {
                c.runs = 3;
                c.rules = vec![Rule::Eml];
                c.mu = 0.9;
                c.background_ms = 2000.0;
                c.feature_targets = vec![1, 2, 3];
                c.n_distractors = 3;
                c.trials_per_cycle = 100;
                c.max_cycles = 1000;
            }
        }
        c
    }

    /// Preset of the file's experiment (or `fallback`) overlaid with the
    /// file's keys.
    pub fn from_toml_str(s: &str, fallback: Option<Experiment>) -> Result<Self, HarnessError> {
        let doc: toml::Table = s.parse().map_err(|e| HarnessError::Config(format!("{e}")))?;
        let experiment = match doc.get("experiment") {
            Some(v) => v
                .as_str()
                .ok_or_else(|| HarnessError::Config("`experiment` must be a string".into()))?
                .parse()?,
            None => fallback.ok_or_else(|| HarnessError::Config("no experiment named".into()))?,
        };
        let preset = Self::preset(experiment);
        let mut merged = toml::Table::try_from(&preset).map_err(|e| HarnessError::Config(e.to_string()))?;
        for (k, v) in doc {
            merged.insert(k, v);
        }
        let cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path, fallback: Option<Experiment>) -> Result<Self, HarnessError> {
        let s = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&s, fallback)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn tau(&self) -> f64 {
        self.tau_ms
            .unwrap_or_else(|| calibrate_tau(self.tau_m, self.tau_s).expect("validated"))
    }

    pub fn neuron(&self) -> NeuronConfig {
        NeuronConfig {
            theta: self.theta,
            tau: self.tau(),
        }
    }

    pub fn stdp(&self) -> StdpParams {
        StdpParams {
            a_p: self.a_plus,
            a_n: self.a_minus_ratio * self.a_plus,
            tau_p: self.tau_plus,
            tau_n: self.tau_minus,
            w_min: self.w_min,
            w_max: self.w_max,
        }
    }

    /// Short digest of everything but the output directory.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("out_dir");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        hex::encode(&digest[..6])
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |what: &str| Err(HarnessError::Config(what.to_string()));
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if self.runs == 0 {
            return bad("runs must be at least 1");
        }
        if self.n_synapses == 0 {
            return bad("n_synapses must be at least 1");
        }
        if !finite_pos(self.duration_ms) {
            return bad("duration_ms must be positive");
        }
        for (name, r) in [
            ("rate_hz", self.rate_hz),
            ("background_hz", self.background_hz),
            ("noise_hz", self.noise_hz),
            ("occurrence_hz", self.occurrence_hz),
            ("occurrence_mean", self.occurrence_mean),
            ("low_rate_hz", self.low_rate_hz),
            ("high_rate_hz", self.high_rate_hz),
        ] {
            if !finite_nonneg(r) {
                return bad(&format!("{name} must be non-negative"));
            }
        }
        if !finite_pos(self.theta) {
            return bad("theta must be positive");
        }
        match self.tau_ms {
            Some(t) if !finite_pos(t) => return bad("tau_ms must be positive"),
            None if calibrate_tau(self.tau_m, self.tau_s).is_err() => {
                return bad("tau_m and tau_s must satisfy tau_m > tau_s > 0")
            }
            _ => {}
        }
        if !finite_pos(self.lambda) {
            return bad("lambda must be positive");
        }
        if !(self.mu.is_finite() && (0.0..1.0).contains(&self.mu)) {
            return bad("mu must lie in [0, 1)");
        }
        if !finite_nonneg(self.w_init_std) || !self.w_init_mean.is_finite() {
            return bad("initial weight mean must be finite and std non-negative");
        }
        if self.w_init_sweep.iter().any(|w| !w.is_finite()) {
            return bad("w_init_sweep entries must be finite");
        }
        if self.max_epochs == 0 || self.train_epochs == 0 || self.max_cycles == 0 {
            return bad("epoch and cycle budgets must be at least 1");
        }
        if !finite_pos(self.xi) || self.k_max == 0 {
            return bad("xi must be positive and k_max at least 1");
        }
        if self.jitter_levels.iter().any(|&s| !finite_nonneg(s)) || !finite_nonneg(self.train_jitter_ms) {
            return bad("jitter levels must be non-negative");
        }
        if self
            .deletion_levels
            .iter()
            .chain([&self.train_p_del])
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return bad("deletion probabilities must lie in [0, 1]");
        }
        if !finite_pos(self.motif_ms) || self.motif_ms > self.background_ms || self.motif_ms >= self.eval_ms {
            return bad("motif_ms must be positive, at most background_ms and below eval_ms");
        }
        if self.convergence_window == 0 || !finite_pos(self.convergence_tolerance) {
            return bad("convergence window and tolerance must be positive");
        }
        if self.eval_every == 0 || self.eval_trials == 0 || self.headline_eval_trials == 0 {
            return bad("evaluation cadence and counts must be at least 1");
        }
        if self.trials_per_cycle == 0 || self.instances_per_epoch == 0 || self.test_per_class == 0 {
            return bad("trial and instance counts must be at least 1");
        }
        if !(0.0..1.0).contains(&self.decay_fraction) || self.decay_confirm == 0 {
            return bad("decay_fraction must lie in [0, 1) and decay_confirm be at least 1");
        }
        self.stdp()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.rules.is_empty() {
            return bad("at least one rule is required");
        }
        let allowed: &[Rule] = match self.experiment {
            Experiment::Derivative => &[Rule::Eml, Rule::Emlc, Rule::Bin, Rule::Stdp],
            Experiment::Classify => &[Rule::Eml, Rule::Emlc, Rule::Bin],
            Experiment::Multicat => &[Rule::Eml, Rule::Emlc],
            Experiment::StdpFeature => &[Rule::Stdp],
            _ => &[Rule::Eml, Rule::Emlc],
        };
        if let Some(r) = self.rules.iter().find(|r| !allowed.contains(r)) {
            return bad(&format!("rule {r} is not supported by {}", self.experiment));
        }
        match self.experiment {
            Experiment::Efficiency | Experiment::InitSweep | Experiment::Multicat if self.targets.is_empty() => {
                bad("targets must not be empty")
            }
            Experiment::InitSweep | Experiment::MlFeature if self.w_init_sweep.is_empty() => {
                bad("w_init_sweep must not be empty")
            }
            Experiment::Classify | Experiment::Multicat if self.n_classes == 0 => bad("n_classes must be at least 1"),
            Experiment::Multicat if self.targets.len() != self.n_classes => {
                bad("multicat needs one target per class")
            }
            Experiment::MlFeature | Experiment::MultiFeature if self.feature_targets.is_empty() => {
                bad("feature_targets must not be empty")
            }
            _ => Ok(()),
        }
    }
}

macro_rules! overrides {
    (
        scalars { $($s:ident : $st:ty),* $(,)? }
        lists { $($l:ident : $lt:ty),* $(,)? }
    ) => {
        /// Command-line overrides, one flag per config field.
        #[derive(Args, Debug, Clone, Default)]
        pub struct ConfigOverrides {
            $(
                #[arg(long, allow_hyphen_values = true)]
                pub $s: Option<$st>,
            )*
            $(
                #[arg(long, value_delimiter = ',', num_args = 1..)]
                pub $l: Option<Vec<$lt>>,
            )*
            #[arg(long, allow_hyphen_values = true)]
            pub tau_ms: Option<f64>,
        }

        impl ConfigOverrides {
            pub fn apply(&self, cfg: &mut ExperimentConfig) {
                $( if let Some(v) = &self.$s { cfg.$s = v.clone(); } )*
                $( if let Some(v) = &self.$l { cfg.$l = v.clone(); } )*
                if let Some(t) = self.tau_ms {
                    cfg.tau_ms = Some(t);
                }
            }
        }
    };
}

overrides! {
    scalars {
        seed: u64, runs: usize, out_dir: PathBuf,
        n_synapses: usize, duration_ms: f64, rate_hz: f64, theta: f64, tau_m: f64, tau_s: f64,
        lambda: f64, mu: f64, max_epochs: usize, shuffle: bool, w_init_mean: f64, w_init_std: f64,
        k_max: usize, xi: f64,
        n_classes: usize, train_jitter_ms: f64, train_p_del: f64, train_epochs: usize,
        instances_per_epoch: usize, train_target: usize, decision_count: usize, test_per_class: usize,
        low_rate_hz: f64, high_rate_hz: f64,
        motif_ms: f64, background_ms: f64, background_hz: f64, noise_hz: f64, occurrence_hz: f64,
        occurrence_mean: f64, n_distractors: usize, trials_per_cycle: usize, max_cycles: usize,
        eval_ms: f64, eval_every: usize, eval_trials: usize, headline_eval_trials: usize,
        convergence_window: usize, convergence_tolerance: f64,
        a_plus: f64, a_minus_ratio: f64, tau_plus: f64, tau_minus: f64, w_min: f64, w_max: f64,
        background_limit: f64, decay_fraction: f64, decay_confirm: usize,
    }
    lists {
        rules: Rule, w_init_sweep: f64, targets: usize, jitter_levels: f64, deletion_levels: f64,
        feature_targets: usize,
    }
}
