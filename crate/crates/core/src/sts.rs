//! Spike-threshold-surface: the map from firing threshold to output count.
//!
//! The critical threshold `theta*_k` is where the count jumps from `k - 1`
//! to `k`. It is located by bisection on the threshold, each probe being a
//! single event-driven run that stops as soon as `k` spikes are reached.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::TimeMs;
use crate::pattern::{SpikePattern, WeightVector};
use crate::sim::{check_theta, psp_sum, EventStream};

/// Bisection stops once the bracket is this narrow relative to its midpoint.
pub const BRACKET_REL_TOL: f64 = 1e-12;
pub const MAX_BISECTION_ITERS: usize = 100;
/// Relative offset above `theta*` at which `t*` is read off.
pub const T_STAR_OFFSET: f64 = 1e-9;
/// Lowest probed threshold, relative to the voltage bound.
pub const THETA_FLOOR: f64 = 1e-12;
/// Slack added to the voltage bound to form the upper bracket.
pub const BOUND_EPS: f64 = 1e-9;
pub const DEFAULT_XI: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsPoint {
    pub k: usize,
    pub theta_star: f64,
    pub t_star: TimeMs,
    /// Kernel sums at `t_star`; the EML derivative of `theta_star`.
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StsCurve {
    pub points: Vec<StsPoint>,
}

/// Reusable critical-threshold search over one pattern.
#[derive(Debug, Clone)]
pub struct StsSolver<'a> {
    pattern: &'a SpikePattern,
    stream: Cow<'a, EventStream>,
}

impl<'a> StsSolver<'a> {
    pub fn new(pattern: &'a SpikePattern, tau: TimeMs) -> Result<Self> {
        Ok(Self {
            pattern,
            stream: Cow::Owned(EventStream::new(pattern, tau)?),
        })
    }

    /// Reuses a stream already built for `pattern`.
    pub fn from_stream(pattern: &'a SpikePattern, stream: &'a EventStream) -> Self {
        Self {
            pattern,
            stream: Cow::Borrowed(stream),
        }
    }

    pub fn stream(&self) -> &EventStream {
        &self.stream
    }

    pub fn pattern(&self) -> &SpikePattern {
        self.pattern
    }

    fn bisect(&self, drive: &[f64], k: usize, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..MAX_BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if hi - lo < BRACKET_REL_TOL * mid || mid <= lo || mid >= hi {
                break;
            }
            if self.stream.count(drive, mid, k) >= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `theta*_k` for a precomputed drive, or `None` when `k` spikes are
    /// out of reach at any positive threshold.
    pub fn critical_theta(&self, drive: &[f64], weights: &[f64], k: usize) -> Option<f64> {
        assert!(k >= 1, "critical output count must be at least 1");
        let hi = self.stream.voltage_bound(weights) + BOUND_EPS;
        let lo = THETA_FLOOR * hi;
        if self.stream.count(drive, lo, k) < k {
            return None;
        }
        Some(self.bisect(drive, k, lo, hi))
    }

    /// Same as [`critical_theta`](Self::critical_theta) but first tries the
    /// caller's bracket `[lo, hi]`, falling back to the full search when the
    /// bracket does not straddle the jump.
    pub fn critical_theta_near(
        &self,
        drive: &[f64],
        weights: &[f64],
        k: usize,
        lo: f64,
        hi: f64,
    ) -> Option<f64> {
        if lo > 0.0
            && lo < hi
            && self.stream.count(drive, lo, k) >= k
            && self.stream.count(drive, hi, k) < k
        {
            return Some(self.bisect(drive, k, lo, hi));
        }
        self.critical_theta(drive, weights, k)
    }

    /// Time of the barely-missed `k`-th crossing: the subthreshold maximum
    /// just above `theta_star`.
    pub fn t_star(&self, drive: &[f64], theta_star: f64) -> Option<TimeMs> {
        self.stream
            .run(drive, theta_star * (1.0 + T_STAR_OFFSET))
            .t_ltp
    }

    pub fn point(&self, weights: &[f64], k: usize) -> Result<Option<StsPoint>> {
        if k == 0 {
            return Err(invalid("k", "critical output count must be at least 1"));
        }
        let drive = self.stream.drive(weights)?;
        let Some(theta_star) = self.critical_theta(&drive, weights, k) else {
            return Ok(None);
        };
        let t_star = self
            .t_star(&drive, theta_star)
            .expect("a representable k implies at least one event");
        Ok(Some(StsPoint {
            k,
            theta_star,
            t_star,
            grad: psp_sum(self.pattern, t_star, self.stream.tau())?,
        }))
    }

    /// Forward differences of `theta*_k` with respect to each weight.
    pub fn numerical_gradient(&self, weights: &[f64], k: usize, xi: f64) -> Result<Option<Vec<f64>>> {
        if !(xi.is_finite() && xi > 0.0) {
            return Err(invalid("xi", format!("must be positive, got {xi}")));
        }
        if k == 0 {
            return Err(invalid("k", "critical output count must be at least 1"));
        }
        let drive = self.stream.drive(weights)?;
        let Some(base) = self.critical_theta(&drive, weights, k) else {
            return Ok(None);
        };
        let counts = self.stream.spike_counts();
        let mut membership: Vec<Vec<usize>> = vec![Vec::new(); weights.len()];
        for e in 0..self.stream.n_events() {
            for &i in self.stream.event_synapses(e) {
                membership[i].push(e);
            }
        }
        let mut w = weights.to_vec();
        let mut d = drive.clone();
        let mut grad = vec![0.0; weights.len()];
        for i in 0..weights.len() {
            if counts[i] == 0 {
                // the weight never enters the dynamics
                continue;
            }
            w[i] = weights[i] + xi;
            for &e in &membership[i] {
                d[e] += xi;
            }
            let slack = T_STAR_OFFSET * base;
            let theta = self
                .critical_theta_near(&d, &w, k, base - slack, base + xi * counts[i] as f64 + slack)
                .expect("raising a weight keeps k spikes reachable");
            grad[i] = (theta - base) / xi;
            w[i] = weights[i];
            for &e in &membership[i] {
                d[e] = drive[e];
            }
        }
        Ok(Some(grad))
    }
}

fn check_weights(pattern: &SpikePattern, weights: &WeightVector) -> Result<()> {
    weights.check_len(pattern.n_synapses())
}

/// Output spike count at threshold `theta`.
pub fn spike_count_at(pattern: &SpikePattern, weights: &WeightVector, tau: TimeMs, theta: f64) -> Result<usize> {
    check_theta(theta)?;
    check_weights(pattern, weights)?;
    let stream = EventStream::new(pattern, tau)?;
    let drive = stream.drive(weights.as_slice())?;
    Ok(stream.count(&drive, theta, usize::MAX))
}

/// Critical threshold `theta*_k`; `Ok(None)` when no positive threshold
/// yields `k` spikes.
pub fn critical_threshold(
    pattern: &SpikePattern,
    weights: &WeightVector,
    tau: TimeMs,
    k: usize,
) -> Result<Option<StsPoint>> {
    check_weights(pattern, weights)?;
    StsSolver::new(pattern, tau)?.point(weights.as_slice(), k)
}

/// Critical thresholds for `k = 1..=k_max`, stopping at the first
/// unreachable `k`.
pub fn sts_curve(pattern: &SpikePattern, weights: &WeightVector, tau: TimeMs, k_max: usize) -> Result<StsCurve> {
    if k_max == 0 {
        return Err(invalid("k_max", "must be at least 1"));
    }
    check_weights(pattern, weights)?;
    let solver = StsSolver::new(pattern, tau)?;
    let mut points = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        match solver.point(weights.as_slice(), k)? {
            Some(p) => points.push(p),
            None => break,
        }
    }
    Ok(StsCurve { points })
}

/// Derivative of `theta*_k` that ignores the weight dependence carried by
/// earlier output spikes: the kernel sums at `t*`.
pub fn eml_gradient(pattern: &SpikePattern, weights: &WeightVector, tau: TimeMs, k: usize) -> Result<Option<Vec<f64>>> {
    Ok(critical_threshold(pattern, weights, tau, k)?.map(|p| p.grad))
}

/// Finite-difference derivative `(theta*_k(w_i + xi) - theta*_k(w)) / xi`.
pub fn numerical_gradient(
    pattern: &SpikePattern,
    weights: &WeightVector,
    tau: TimeMs,
    k: usize,
    xi: f64,
) -> Result<Option<Vec<f64>>> {
    check_weights(pattern, weights)?;
    StsSolver::new(pattern, tau)?.numerical_gradient(weights.as_slice(), k, xi)
}

pub fn cosine_similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TAU: f64 = 20.0;

    fn single(w: f64) -> (SpikePattern, WeightVector) {
        (
            SpikePattern::new(50.0, vec![vec![10.0]]).unwrap(),
            WeightVector::new(vec![w]).unwrap(),
        )
    }

    #[test]
    fn counts_for_single_spike() {
        let (p, w) = single(0.8);
        assert_eq!(spike_count_at(&p, &w, TAU, 1.0).unwrap(), 0);
        assert_eq!(spike_count_at(&p, &w, TAU, 0.5).unwrap(), 1);
        // 0.8 -> 0.6 -> 0.4 -> 0.2: three subtractions, then 0.2 > 0.2 fails
        assert_eq!(spike_count_at(&p, &w, TAU, 0.2).unwrap(), 3);
        assert_eq!(spike_count_at(&p, &w, TAU, 0.2 * (1.0 - 1e-9)).unwrap(), 4);
        assert!(spike_count_at(&p, &w, TAU, 0.0).is_err());
        assert!(spike_count_at(&p, &w, TAU, -1.0).is_err());
    }

    #[test]
    fn single_spike_critical_thresholds() {
        let (p, w) = single(0.8);
        let p1 = critical_threshold(&p, &w, TAU, 1).unwrap().unwrap();
        assert_relative_eq!(p1.theta_star, 0.8, max_relative = 1e-11);
        assert_eq!(p1.t_star, 10.0);
        let p2 = critical_threshold(&p, &w, TAU, 2).unwrap().unwrap();
        assert_relative_eq!(p2.theta_star, 0.4, max_relative = 1e-11);
        let curve = sts_curve(&p, &w, TAU, 3).unwrap();
        let th: Vec<f64> = curve.points.iter().map(|p| p.theta_star).collect();
        assert_eq!(th.len(), 3);
        for (k, t) in th.iter().enumerate() {
            assert_relative_eq!(*t, 0.8 / (k + 1) as f64, max_relative = 1e-11);
        }
    }

    #[test]
    fn empty_and_negative_patterns_are_unreachable() {
        let p = SpikePattern::empty(2, 10.0).unwrap();
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        assert!(sts_curve(&p, &w, TAU, 3).unwrap().points.is_empty());
        assert_eq!(critical_threshold(&p, &w, TAU, 1).unwrap(), None);
        let (p, _) = single(0.0);
        let neg = WeightVector::new(vec![-0.3]).unwrap();
        assert_eq!(eml_gradient(&p, &neg, TAU, 1).unwrap(), None);
        assert_eq!(numerical_gradient(&p, &neg, TAU, 1, 1e-6).unwrap(), None);
    }

    #[test]
    fn gradients_for_single_spike() {
        let (p, w) = single(0.8);
        assert_eq!(eml_gradient(&p, &w, TAU, 1).unwrap().unwrap(), vec![1.0]);
        assert_eq!(eml_gradient(&p, &w, TAU, 2).unwrap().unwrap(), vec![1.0]);
        let fd1 = numerical_gradient(&p, &w, TAU, 1, DEFAULT_XI).unwrap().unwrap();
        assert_relative_eq!(fd1[0], 1.0, epsilon = 1e-5);
        let fd2 = numerical_gradient(&p, &w, TAU, 2, DEFAULT_XI).unwrap().unwrap();
        assert_relative_eq!(fd2[0], 0.5, epsilon = 1e-5);
        let c = cosine_similarity(&[1.0], &fd2).unwrap();
        assert_relative_eq!(c, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn silent_synapse_has_zero_gradient() {
        let p = SpikePattern::new(50.0, vec![vec![10.0], vec![]]).unwrap();
        let w = WeightVector::new(vec![0.8, 0.0]).unwrap();
        let g = eml_gradient(&p, &w, TAU, 1).unwrap().unwrap();
        assert_eq!(g[1], 0.0);
        let fd = numerical_gradient(&p, &w, TAU, 1, DEFAULT_XI).unwrap().unwrap();
        assert_eq!(fd[1], 0.0);
    }

    #[test]
    fn invalid_arguments() {
        let (p, w) = single(0.8);
        assert!(critical_threshold(&p, &w, TAU, 0).is_err());
        assert!(sts_curve(&p, &w, TAU, 0).is_err());
        assert!(numerical_gradient(&p, &w, TAU, 1, 0.0).is_err());
        let w2 = WeightVector::new(vec![0.8, 0.1]).unwrap();
        assert!(critical_threshold(&p, &w2, TAU, 1).is_err());
    }

    #[test]
    fn cosine_cases() {
        assert_relative_eq!(cosine_similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_relative_eq!(cosine_similarity(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 1.0);
        assert_eq!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::UndefinedSimilarity)
        );
        assert!(cosine_similarity(&[1.0], &[1.0, 2.0]).is_err());
    }
}
