//! Plasticity rules and the loops that drive them.
//!
//! EML moves the critical thresholds adjacent to the current output count;
//! EMLC uses only landmarks of the current response; STDP and a binary
//! tempotron serve as baselines.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::TimeMs;
use crate::pattern::{SpikePattern, WeightVector};
use crate::sim::{check_theta, psp_sum, EventStream, NeuronConfig, SimResult};
use crate::sts::StsSolver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "EML")]
    Eml,
    #[serde(rename = "EMLC")]
    Emlc,
    #[serde(rename = "STDP")]
    Stdp,
    #[serde(rename = "BIN")]
    Bin,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Eml => "EML",
            Rule::Emlc => "EMLC",
            Rule::Stdp => "STDP",
            Rule::Bin => "BIN",
        })
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EML" => Ok(Rule::Eml),
            "EMLC" => Ok(Rule::Emlc),
            "STDP" => Ok(Rule::Stdp),
            "BIN" => Ok(Rule::Bin),
            other => Err(invalid("rule", format!("unknown rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub rule: Rule,
    pub lambda: f64,
    pub mu: f64,
    pub max_epochs: usize,
    pub rng_seed: u64,
    /// Present patterns in a fresh random order every epoch.
    #[serde(default)]
    pub shuffle: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            rule: Rule::Eml,
            lambda: 1e-4,
            mu: 0.0,
            max_epochs: 10_000,
            rng_seed: 0,
            shuffle: false,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(invalid("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(invalid("mu", format!("must lie in [0, 1], got {}", self.mu)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdpParams {
    pub a_p: f64,
    pub a_n: f64,
    pub tau_p: TimeMs,
    pub tau_n: TimeMs,
    pub w_min: f64,
    pub w_max: f64,
}

impl Default for StdpParams {
    fn default() -> Self {
        Self {
            a_p: 5e-6,
            a_n: 0.72 * 5e-6,
            tau_p: 20.0,
            tau_n: 40.0,
            w_min: 0.0,
            w_max: 0.1,
        }
    }
}

impl StdpParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a_p", self.a_p),
            ("a_n", self.a_n),
            ("tau_p", self.tau_p),
            ("tau_n", self.tau_n),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.w_min < self.w_max) {
            return Err(invalid("w_min", "must be below w_max"));
        }
        Ok(())
    }
}

/// Previous applied update for momentum composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumState {
    pub prev_update: Vec<f64>,
}

impl MomentumState {
    pub fn new(n: usize) -> Self {
        Self {
            prev_update: vec![0.0; n],
        }
    }

    pub fn reset(&mut self) {
        self.prev_update.iter_mut().for_each(|x| *x = 0.0);
    }
}

/// `current + mu * previous`; the result becomes the new previous update.
pub fn apply_momentum(current: &[f64], state: &mut MomentumState, mu: f64) -> Result<Vec<f64>> {
    if current.len() != state.prev_update.len() {
        return Err(Error::Dimension {
            expected: state.prev_update.len(),
            actual: current.len(),
        });
    }
    let out: Vec<f64> = current
        .iter()
        .zip(&state.prev_update)
        .map(|(c, p)| c + mu * p)
        .collect();
    state.prev_update.copy_from_slice(&out);
    Ok(out)
}

/// A pattern together with its flattened event stream, for repeated
/// presentation under changing weights.
#[derive(Debug, Clone)]
pub struct Prepared {
    pattern: SpikePattern,
    stream: EventStream,
}

impl Prepared {
    pub fn new(pattern: SpikePattern, tau: TimeMs) -> Result<Self> {
        let stream = EventStream::new(&pattern, tau)?;
        Ok(Self { pattern, stream })
    }

    pub fn pattern(&self) -> &SpikePattern {
        &self.pattern
    }

    pub fn stream(&self) -> &EventStream {
        &self.stream
    }

    pub fn simulate(&self, weights: &[f64], theta: f64) -> Result<SimResult> {
        Ok(self.stream.run(&self.stream.drive(weights)?, theta))
    }

    pub fn count(&self, weights: &[f64], theta: f64) -> Result<usize> {
        Ok(self.stream.count(&self.stream.drive(weights)?, theta, usize::MAX))
    }

    fn scaled_psp(&self, t: TimeMs, scale: f64) -> Vec<f64> {
        psp_sum(&self.pattern, t, self.stream.tau())
            .expect("tau validated by the stream")
            .into_iter()
            .map(|x| scale * x)
            .collect()
    }

    /// EML update given a response already simulated at `theta`.
    pub fn eml_delta(&self, weights: &[f64], sim: &SimResult, n_d: usize, lambda: f64) -> Result<Vec<f64>> {
        let n_o = sim.n_out;
        if n_o == n_d {
            return Ok(vec![0.0; weights.len()]);
        }
        let solver = StsSolver::from_stream(&self.pattern, &self.stream);
        let (k, sign) = if n_o > n_d { (n_o, -1.0) } else { (n_o + 1, 1.0) };
        match solver.point(weights, k)? {
            Some(p) => Ok(p.grad.into_iter().map(|g| sign * lambda * g).collect()),
            // theta*_{n_o+1} does not exist: potentiate at the subthreshold maximum
            None => Ok(match sim.t_ltp {
                Some(t) => self.scaled_psp(t, sign * lambda),
                None => vec![0.0; weights.len()],
            }),
        }
    }

    pub fn emlc_delta(&self, sim: &SimResult, n_d: usize, lambda: f64) -> Result<Vec<f64>> {
        let n = self.pattern.n_synapses();
        let n_o = sim.n_out;
        if n_o == n_d {
            return Ok(vec![0.0; n]);
        }
        if n_o > n_d {
            let t = sim.t_ltd.expect("n_o > 0 implies a firing event");
            return Ok(self.scaled_psp(t, -lambda));
        }
        let t = sim.t_ltp.or(sim.t_ltd).ok_or(Error::NoEvents)?;
        Ok(self.scaled_psp(t, lambda))
    }

    pub fn bin_delta(&self, sim: &SimResult, should_fire: bool, lambda: f64) -> Vec<f64> {
        let n = self.pattern.n_synapses();
        match (should_fire, sim.n_out) {
            (true, 0) => match sim.t_vmax() {
                Some(t) => self.scaled_psp(t, lambda),
                None => vec![0.0; n],
            },
            (false, m) if m > 0 => self.scaled_psp(sim.output_times[0], -lambda),
            _ => vec![0.0; n],
        }
    }

    /// Update of `rule` towards `n_d` spikes; BIN treats `n_d > 0` as
    /// "should fire". Returns the response and the (unscaled by momentum)
    /// update, which is all zeros on a correct trial.
    pub fn delta(&self, rule: Rule, weights: &[f64], theta: f64, n_d: usize, lambda: f64) -> Result<(SimResult, Vec<f64>)> {
        let sim = self.simulate(weights, theta)?;
        let d = match rule {
            Rule::Eml => self.eml_delta(weights, &sim, n_d, lambda)?,
            Rule::Emlc => self.emlc_delta(&sim, n_d, lambda)?,
            Rule::Bin => self.bin_delta(&sim, n_d > 0, lambda),
            Rule::Stdp => return Err(invalid("rule", "STDP is not a count-supervised rule")),
        };
        Ok((sim, d))
    }
}

fn prepare(pattern: &SpikePattern, weights: &WeightVector, tau: TimeMs, theta: f64) -> Result<Prepared> {
    check_theta(theta)?;
    weights.check_len(pattern.n_synapses())?;
    Prepared::new(pattern.clone(), tau)
}

/// EML: on `n_o > n_d` depress along the derivative of `theta*_{n_o}`, on
/// `n_o < n_d` potentiate along the derivative of `theta*_{n_o + 1}`.
pub fn eml_update(
    pattern: &SpikePattern,
    weights: &WeightVector,
    tau: TimeMs,
    theta: f64,
    n_d: usize,
    lambda: f64,
) -> Result<Vec<f64>> {
    let p = prepare(pattern, weights, tau, theta)?;
    let sim = p.simulate(weights.as_slice(), theta)?;
    p.eml_delta(weights.as_slice(), &sim, n_d, lambda)
}

/// EMLC: potentiate at the subthreshold maximum, depress at the firing
/// event with the lowest post-reset voltage.
pub fn emlc_update(
    pattern: &SpikePattern,
    weights: &WeightVector,
    tau: TimeMs,
    theta: f64,
    n_d: usize,
    lambda: f64,
) -> Result<Vec<f64>> {
    let p = prepare(pattern, weights, tau, theta)?;
    let sim = p.simulate(weights.as_slice(), theta)?;
    p.emlc_delta(&sim, n_d, lambda)
}

/// Binary tempotron: potentiate at the voltage maximum on a miss, depress
/// at the first output spike on a false alarm.
pub fn bin_update(
    pattern: &SpikePattern,
    weights: &WeightVector,
    tau: TimeMs,
    theta: f64,
    should_fire: bool,
    lambda: f64,
) -> Result<Vec<f64>> {
    let p = prepare(pattern, weights, tau, theta)?;
    let sim = p.simulate(weights.as_slice(), theta)?;
    Ok(p.bin_delta(&sim, should_fire, lambda))
}

/// All-pairs STDP summed per synapse, `dt = t_pre - t_post`:
/// `+a_p exp(dt/tau_p)` for `dt <= 0`, `-a_n exp(-dt/tau_n)` otherwise.
///
/// Uses forward/backward exponential traces over the sorted post times, so
/// each pre spike costs one binary search.
pub fn stdp_update(pre: &SpikePattern, post: &[TimeMs], params: &StdpParams) -> Vec<f64> {
    let n = pre.n_synapses();
    if post.is_empty() {
        return vec![0.0; n];
    }
    let m = post.len();
    // fwd[j] = sum_{l <= j} exp(-(p_j - p_l)/tau_n)
    let mut fwd = vec![1.0; m];
    for j in 1..m {
        fwd[j] = 1.0 + fwd[j - 1] * (-(post[j] - post[j - 1]) / params.tau_n).exp();
    }
    // bwd[j] = sum_{l >= j} exp(-(p_l - p_j)/tau_p)
    let mut bwd = vec![1.0; m];
    for j in (0..m - 1).rev() {
        bwd[j] = 1.0 + bwd[j + 1] * (-(post[j + 1] - post[j]) / params.tau_p).exp();
    }
    pre.spikes()
        .iter()
        .map(|train| {
            train
                .iter()
                .map(|&t| {
                    let idx = post.partition_point(|&p| p < t);
                    let mut dw = 0.0;
                    if idx < m {
                        dw += params.a_p * bwd[idx] * (-(post[idx] - t) / params.tau_p).exp();
                    }
                    if idx > 0 {
                        dw -= params.a_n * fwd[idx - 1] * (-(t - post[idx - 1]) / params.tau_n).exp();
                    }
                    dw
                })
                .sum()
        })
        .collect()
}

/// One STDP cycle: each trial is simulated, its all-pairs update added and
/// the weights clamped to `[w_min, w_max]`.
pub fn train_stdp_cycle(
    trials: &[SpikePattern],
    mut weights: WeightVector,
    params: &StdpParams,
    neuron: &NeuronConfig,
) -> Result<WeightVector> {
    params.validate()?;
    neuron.validate()?;
    for trial in trials {
        weights.check_len(trial.n_synapses())?;
        let stream = EventStream::new(trial, neuron.tau)?;
        let sim = stream.run(&stream.drive(weights.as_slice())?, neuron.theta);
        if sim.n_out == 0 {
            continue;
        }
        let dw = stdp_update(trial, &sim.output_times, params);
        weights.add(&dw)?;
        weights.clamp(params.w_min, params.w_max);
    }
    Ok(weights)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub n_out: Vec<usize>,
    /// Sum of `|n_o - n_d|` over the patterns.
    pub error: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub converged: bool,
    /// Epochs with at least one erroneous presentation before the first
    /// clean epoch.
    pub epochs: usize,
    pub wall_time_s: f64,
    pub final_weights: WeightVector,
    pub history: Vec<EpochRecord>,
}

/// Presents the patterns epoch after epoch until every one of them elicits
/// exactly its desired count, or `max_epochs` erroneous epochs have passed.
pub fn train_to_count(
    patterns: &[SpikePattern],
    targets: &[usize],
    initial: WeightVector,
    cfg: &LearnerConfig,
    neuron: &NeuronConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    neuron.validate()?;
    if !matches!(cfg.rule, Rule::Eml | Rule::Emlc) {
        return Err(invalid("rule", format!("train_to_count needs EML or EMLC, got {}", cfg.rule)));
    }
    if patterns.len() != targets.len() {
        return Err(Error::Dimension {
            expected: patterns.len(),
            actual: targets.len(),
        });
    }
    let prepared = patterns
        .iter()
        .map(|p| {
            initial.check_len(p.n_synapses())?;
            Prepared::new(p.clone(), neuron.tau)
        })
        .collect::<Result<Vec<_>>>()?;

    let start = Instant::now();
    let mut weights = initial;
    let mut momentum = MomentumState::new(weights.len());
    let mut order: Vec<usize> = (0..patterns.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut history = Vec::new();
    let mut converged = false;
    let mut epoch = 0;
    loop {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut n_out = vec![0; patterns.len()];
        let mut error = 0;
        for &i in &order {
            let (sim, dw) = prepared[i].delta(cfg.rule, weights.as_slice(), neuron.theta, targets[i], cfg.lambda)?;
            n_out[i] = sim.n_out;
            if sim.n_out != targets[i] {
                error += sim.n_out.abs_diff(targets[i]);
                let applied = apply_momentum(&dw, &mut momentum, cfg.mu)?;
                weights.add(&applied)?;
            }
        }
        history.push(EpochRecord { epoch, n_out, error });
        if error == 0 {
            converged = true;
            break;
        }
        epoch += 1;
        if epoch >= cfg.max_epochs {
            break;
        }
    }
    Ok(TrainReport {
        converged,
        epochs: epoch,
        wall_time_s: start.elapsed().as_secs_f64(),
        final_weights: weights,
        history,
    })
}
