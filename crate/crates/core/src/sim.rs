//! Event-driven neuron simulation and a fixed-step reference simulator.
//!
//! Between input events the membrane potential only decays, so the state is
//! fully described by its value at event times:
//! `V(t_k) = V(t_{k-1}) exp(-(t_k - t_{k-1}) / tau) + w_k`, followed by
//! subtracting `theta` for every output spike while `V > theta`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{check_tau, kappa_unchecked, TimeMs};
use crate::pattern::{SpikePattern, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronConfig {
    /// Firing threshold.
    pub theta: f64,
    /// Membrane time constant in ms.
    pub tau: TimeMs,
}

impl NeuronConfig {
    pub fn new(theta: f64, tau: TimeMs) -> Result<Self> {
        let cfg = Self { theta, tau };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        check_tau(self.tau)
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta > 0.0 {
        Ok(())
    } else {
        Err(invalid("theta", format!("must be positive and finite, got {theta}")))
    }
}

/// Voltage at one input event, before and after the reset loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub time: TimeMs,
    pub v_pre: f64,
    pub v_post: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub n_out: usize,
    pub output_times: Vec<TimeMs>,
    pub event_trace: Vec<TraceEntry>,
    /// Event with the largest post-reset voltage (earliest on ties).
    pub t_ltp: Option<TimeMs>,
    /// Largest post-reset voltage; 0 when there are no events.
    pub v_max_sub: f64,
    /// Firing event with the smallest post-reset voltage (earliest on ties).
    pub t_ltd: Option<TimeMs>,
    pub v_min_reset: Option<f64>,
}

impl SimResult {
    fn empty() -> Self {
        Self {
            n_out: 0,
            output_times: Vec::new(),
            event_trace: Vec::new(),
            t_ltp: None,
            v_max_sub: 0.0,
            t_ltd: None,
            v_min_reset: None,
        }
    }

    /// Event time with the largest pre-reset voltage (earliest on ties).
    pub fn t_vmax(&self) -> Option<TimeMs> {
        let mut best: Option<TraceEntry> = None;
        for e in &self.event_trace {
            if best.is_none_or(|b| e.v_pre > b.v_pre) {
                best = Some(*e);
            }
        }
        best.map(|e| e.time)
    }

    fn record(&mut self, time: TimeMs, v_pre: f64, v_post: f64, fired: u64) {
        self.event_trace.push(TraceEntry { time, v_pre, v_post });
        if self.t_ltp.is_none() || v_post > self.v_max_sub {
            self.t_ltp = Some(time);
            self.v_max_sub = v_post;
        }
        if fired > 0 {
            self.n_out += fired as usize;
            self.output_times
                .extend(std::iter::repeat_n(time, fired as usize));
            if self.v_min_reset.is_none_or(|m| v_post < m) {
                self.v_min_reset = Some(v_post);
                self.t_ltd = Some(time);
            }
        }
    }
}

/// Number of threshold subtractions the reset loop performs on `v`, and the
/// residual voltage. Equivalent to `while v > theta { v -= theta }` in exact
/// arithmetic, but O(1) for any ratio `v / theta`.
#[inline]
pub(crate) fn reset(v: f64, theta: f64) -> (u64, f64) {
    if !(v > theta) {
        return (0, v);
    }
    let mut m = ((v / theta).ceil() - 1.0).max(1.0);
    while v - m * theta > theta {
        m += 1.0;
    }
    while m > 1.0 && v - (m - 1.0) * theta <= theta {
        m -= 1.0;
    }
    (m as u64, v - m * theta)
}

/// A pattern flattened into time-ordered input events, reusable across
/// weight vectors and thresholds.
///
/// Spikes sharing a timestamp form a single event whose drive is the sum
/// of their weights.
#[derive(Debug, Clone)]
pub struct EventStream {
    n_synapses: usize,
    tau: TimeMs,
    times: Vec<TimeMs>,
    decay: Vec<f64>,
    offsets: Vec<usize>,
    synapses: Vec<usize>,
    spike_counts: Vec<usize>,
}

impl EventStream {
    pub fn new(pattern: &SpikePattern, tau: TimeMs) -> Result<Self> {
        check_tau(tau)?;
        let mut all: Vec<(TimeMs, usize)> = pattern
            .spikes()
            .iter()
            .enumerate()
            .flat_map(|(i, train)| train.iter().map(move |&t| (t, i)))
            .collect();
        all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut times = Vec::new();
        let mut offsets = vec![0];
        let mut synapses = Vec::with_capacity(all.len());
        for (t, i) in all {
            if times.last() != Some(&t) {
                if !times.is_empty() {
                    offsets.push(synapses.len());
                }
                times.push(t);
            }
            synapses.push(i);
        }
        if !times.is_empty() {
            offsets.push(synapses.len());
        }
        let mut prev = 0.0;
        let decay = times
            .iter()
            .map(|&t| {
                let d = kappa_unchecked(t - prev, tau);
                prev = t;
                d
            })
            .collect();
        Ok(Self {
            n_synapses: pattern.n_synapses(),
            tau,
            times,
            decay,
            offsets,
            synapses,
            spike_counts: pattern.spikes().iter().map(Vec::len).collect(),
        })
    }

    pub fn n_synapses(&self) -> usize {
        self.n_synapses
    }

    pub fn tau(&self) -> TimeMs {
        self.tau
    }

    pub fn n_events(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[TimeMs] {
        &self.times
    }

    pub fn spike_counts(&self) -> &[usize] {
        &self.spike_counts
    }

    /// Synapses that spike at event `k`.
    pub fn event_synapses(&self, k: usize) -> &[usize] {
        &self.synapses[self.offsets[k]..self.offsets[k + 1]]
    }

    /// Per-event summed input weight.
    pub fn drive(&self, weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() != self.n_synapses {
            return Err(Error::Dimension {
                expected: self.n_synapses,
                actual: weights.len(),
            });
        }
        Ok((0..self.n_events())
            .map(|k| self.event_synapses(k).iter().map(|&i| weights[i]).sum())
            .collect())
    }

    /// Largest voltage any threshold could be crossed at:
    /// `sum_i max(w_i, 0) * count_i`.
    pub fn voltage_bound(&self, weights: &[f64]) -> f64 {
        weights
            .iter()
            .zip(&self.spike_counts)
            .map(|(w, &c)| w.max(0.0) * c as f64)
            .sum()
    }

    /// Output spike count, stopping early once it reaches `stop_at`.
    pub fn count(&self, drive: &[f64], theta: f64, stop_at: usize) -> usize {
        debug_assert_eq!(drive.len(), self.times.len());
        let stop = stop_at as u64;
        let mut v = 0.0;
        let mut n = 0u64;
        for (d, w) in self.decay.iter().zip(drive) {
            v = v * d + w;
            if v > theta {
                let (m, r) = reset(v, theta);
                n += m;
                if n >= stop {
                    return n as usize;
                }
                v = r;
            }
        }
        n as usize
    }

    /// Full simulation with trace and learning landmarks.
    pub fn run(&self, drive: &[f64], theta: f64) -> SimResult {
        debug_assert_eq!(drive.len(), self.times.len());
        let mut res = SimResult::empty();
        res.event_trace.reserve(self.times.len());
        let mut v = 0.0;
        for ((&t, d), w) in self.times.iter().zip(&self.decay).zip(drive) {
            v = v * d + w;
            let (m, r) = reset(v, theta);
            res.record(t, v, r, m);
            v = r;
        }
        res
    }
}

/// Event-driven simulation of one neuron on one pattern.
pub fn simulate(pattern: &SpikePattern, weights: &WeightVector, cfg: &NeuronConfig) -> Result<SimResult> {
    cfg.validate()?;
    weights.check_len(pattern.n_synapses())?;
    let stream = EventStream::new(pattern, cfg.tau)?;
    let drive = stream.drive(weights.as_slice())?;
    Ok(stream.run(&drive, cfg.theta))
}

/// Fixed-step simulation: spikes are binned to the step containing them,
/// the potential decays by `exp(-dt/tau)` per step and the reset loop runs
/// literally. Output spikes carry the start time of their step.
pub fn simulate_clock(
    pattern: &SpikePattern,
    weights: &WeightVector,
    cfg: &NeuronConfig,
    dt: TimeMs,
) -> Result<SimResult> {
    cfg.validate()?;
    weights.check_len(pattern.n_synapses())?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    // Times sitting on the step grid up to representation error belong to
    // the step they start.
    let bin = |t: TimeMs| (t / dt + 1e-7).floor() as usize;
    let n_steps = bin(pattern.duration()) + 1;
    let mut input = vec![0.0; n_steps];
    let mut has_input = vec![false; n_steps];
    for (i, train) in pattern.spikes().iter().enumerate() {
        for &t in train {
            let s = bin(t);
            input[s] += weights[i];
            has_input[s] = true;
        }
    }
    let step_decay = (-dt / cfg.tau).exp();
    let mut res = SimResult::empty();
    let mut v = 0.0;
    for s in 0..n_steps {
        v *= step_decay;
        if !has_input[s] {
            continue;
        }
        v += input[s];
        let v_pre = v;
        let mut fired = 0;
        while v > cfg.theta {
            v -= cfg.theta;
            fired += 1;
        }
        res.record(s as f64 * dt, v_pre, v, fired);
    }
    Ok(res)
}

/// Per-synapse kernel sum `sum_{t_i^j <= t} exp(-(t - t_i^j)/tau)`.
pub fn psp_sum(pattern: &SpikePattern, t: TimeMs, tau: TimeMs) -> Result<Vec<f64>> {
    check_tau(tau)?;
    Ok(pattern
        .spikes()
        .iter()
        .map(|train| {
            let end = train.partition_point(|&s| s <= t);
            train[..end].iter().map(|&s| kappa_unchecked(t - s, tau)).sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single(t: f64, w: f64) -> (SpikePattern, WeightVector) {
        (
            SpikePattern::new(50.0, vec![vec![t]]).unwrap(),
            WeightVector::new(vec![w]).unwrap(),
        )
    }

    #[test]
    fn strong_single_spike_fires_twice() {
        let (p, w) = single(10.0, 2.5);
        let cfg = NeuronConfig::new(1.0, 20.0).unwrap();
        let r = simulate(&p, &w, &cfg).unwrap();
        assert_eq!(r.n_out, 2);
        assert_eq!(r.output_times, vec![10.0, 10.0]);
        assert_relative_eq!(r.event_trace[0].v_post, 0.5);
        assert_eq!(r.t_ltd, Some(10.0));
        assert_eq!(r.v_min_reset, Some(0.5));

        let c = simulate_clock(&p, &w, &cfg, 0.01).unwrap();
        assert_eq!(c.n_out, 2);
    }

    #[test]
    fn empty_pattern_stays_at_rest() {
        let p = SpikePattern::empty(3, 100.0).unwrap();
        let w = WeightVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let cfg = NeuronConfig::new(1.0, 20.0).unwrap();
        let r = simulate(&p, &w, &cfg).unwrap();
        assert_eq!(r.n_out, 0);
        assert_eq!(r.t_ltp, None);
        assert_eq!(r.v_max_sub, 0.0);
        assert_eq!(r.v_min_reset, None);
        assert_eq!(simulate_clock(&p, &w, &cfg, 0.01).unwrap().n_out, 0);
    }

    #[test]
    fn two_subthreshold_spikes() {
        let p = SpikePattern::new(50.0, vec![vec![0.0, 20.0]]).unwrap();
        let w = WeightVector::new(vec![0.6]).unwrap();
        let cfg = NeuronConfig::new(1.0, 20.0).unwrap();
        let r = simulate(&p, &w, &cfg).unwrap();
        assert_eq!(r.n_out, 0);
        assert_relative_eq!(r.event_trace[1].v_pre, 0.82073, epsilon = 1e-5);
        assert_relative_eq!(r.v_max_sub, 0.6 * (-1.0f64).exp() + 0.6, max_relative = 1e-14);
        assert_eq!(r.t_ltp, Some(20.0));
    }

    #[test]
    fn equality_does_not_fire() {
        let (p, w) = single(1.0, 1.0);
        let r = simulate(&p, &w, &NeuronConfig::new(1.0, 20.0).unwrap()).unwrap();
        assert_eq!(r.n_out, 0);
    }

    #[test]
    fn coincident_spikes_merge() {
        let p = SpikePattern::new(50.0, vec![vec![5.0], vec![5.0]]).unwrap();
        let w = WeightVector::new(vec![0.7, 0.7]).unwrap();
        let r = simulate(&p, &w, &NeuronConfig::new(1.0, 20.0).unwrap()).unwrap();
        assert_eq!(r.event_trace.len(), 1);
        assert_eq!(r.n_out, 1);
        assert_relative_eq!(r.event_trace[0].v_post, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn reset_matches_subtraction_loop() {
        for &(v, th) in &[(2.5, 1.0), (0.8, 0.5), (10.0, 3.0), (1.0000001, 1.0), (7.31, 0.1), (3.7, 0.013)] {
            let (mut lv, mut n) = (v, 0u64);
            while lv > th {
                lv -= th;
                n += 1;
            }
            let (m, r) = reset(v, th);
            assert_eq!(m, n, "v={v} theta={th}");
            assert_relative_eq!(r, lv, epsilon = 1e-12);
        }
        // exact multiple: strict inequality stops at the threshold itself
        assert_eq!(reset(0.8, 0.2).0, 3);
        assert_eq!(reset(0.8, 0.4).0, 1);
        let (m, r) = reset(1e3, 1e-9);
        assert!(r > 0.0 && r <= 1e-9 * (1.0 + 1e-6), "{r}");
        assert!((m as f64 - 1e12).abs() < 2.0);
    }

    #[test]
    fn dimension_and_parameter_errors() {
        let (p, _) = single(1.0, 1.0);
        let w2 = WeightVector::new(vec![1.0, 1.0]).unwrap();
        let cfg = NeuronConfig { theta: 1.0, tau: 20.0 };
        assert!(matches!(simulate(&p, &w2, &cfg), Err(Error::Dimension { .. })));
        let w = WeightVector::new(vec![1.0]).unwrap();
        assert!(simulate(&p, &w, &NeuronConfig { theta: 0.0, tau: 20.0 }).is_err());
        assert!(simulate_clock(&p, &w, &cfg, 0.0).is_err());
        assert!(simulate_clock(&p, &w, &cfg, -1.0).is_err());
    }

    #[test]
    fn psp_sum_values() {
        let p = SpikePattern::new(50.0, vec![vec![0.0, 20.0], vec![30.0]]).unwrap();
        let s = psp_sum(&p, 20.0, 20.0).unwrap();
        assert_relative_eq!(s[0], 1.0 + (-1.0f64).exp());
        assert_eq!(s[1], 0.0);
        assert_eq!(psp_sum(&p, -1.0, 20.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(psp_sum(&p, 30.0, 20.0).unwrap()[1], 1.0);
    }

    #[test]
    fn early_exit_count() {
        let p = SpikePattern::new(50.0, vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let s = EventStream::new(&p, 20.0).unwrap();
        let d = s.drive(&[5.0]).unwrap();
        let full = s.count(&d, 1.0, usize::MAX);
        assert_eq!(full, s.run(&d, 1.0).n_out);
        assert!(s.count(&d, 1.0, 3) >= 3);
    }
}
