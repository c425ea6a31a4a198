//! Seeded generation of input patterns, noise and embedded-motif trials.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::TimeMs;
use crate::pattern::SpikePattern;

/// Generator used for every stochastic operation. ChaCha keeps streams
/// reproducible across platforms and crate versions.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of the `index`-th independent run under a master seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

fn check_rate(rate_hz: f64) -> Result<()> {
    if rate_hz.is_finite() && rate_hz >= 0.0 {
        Ok(())
    } else {
        Err(invalid("rate_hz", format!("must be non-negative, got {rate_hz}")))
    }
}

/// Homogeneous Poisson spike times on `[0, duration]` by exponential
/// inter-arrival sampling.
pub fn poisson_train(duration: TimeMs, rate_hz: f64, rng: &mut SimRng) -> Result<Vec<TimeMs>> {
    check_rate(rate_hz)?;
    if rate_hz == 0.0 {
        return Ok(Vec::new());
    }
    let gap = Exp::new(rate_hz / 1000.0).map_err(|e| invalid("rate_hz", e.to_string()))?;
    let mut out = Vec::new();
    let mut t = gap.sample(rng);
    while t <= duration {
        out.push(t);
        t += gap.sample(rng);
    }
    Ok(out)
}

pub fn poisson_pattern(n: usize, duration: TimeMs, rate_hz: f64, rng: &mut SimRng) -> Result<SpikePattern> {
    check_rate(rate_hz)?;
    let spikes = (0..n)
        .map(|_| poisson_train(duration, rate_hz, rng))
        .collect::<Result<Vec<_>>>()?;
    SpikePattern::new(duration, spikes)
}

/// Adds independent Gaussian noise to every spike time, clipping to
/// `[0, duration]`.
pub fn jitter(pattern: &SpikePattern, sigma_ms: f64, rng: &mut SimRng) -> Result<SpikePattern> {
    if !(sigma_ms.is_finite() && sigma_ms >= 0.0) {
        return Err(invalid("sigma_ms", format!("must be non-negative, got {sigma_ms}")));
    }
    if sigma_ms == 0.0 {
        return Ok(pattern.clone());
    }
    let noise = Normal::new(0.0, sigma_ms).map_err(|e| invalid("sigma_ms", e.to_string()))?;
    let spikes = pattern
        .spikes()
        .iter()
        .map(|train| train.iter().map(|&t| t + noise.sample(rng)).collect())
        .collect();
    SpikePattern::from_unsorted(pattern.duration(), spikes)
}

/// Removes each spike independently with probability `p_del`.
pub fn delete_spikes(pattern: &SpikePattern, p_del: f64, rng: &mut SimRng) -> Result<SpikePattern> {
    if !(0.0..=1.0).contains(&p_del) {
        return Err(invalid("p_del", format!("must lie in [0, 1], got {p_del}")));
    }
    let spikes = pattern
        .spikes()
        .iter()
        .map(|train| train.iter().copied().filter(|_| !rng.gen_bool(p_del)).collect())
        .collect();
    SpikePattern::new(pattern.duration(), spikes)
}

/// Jitter followed by deletion.
pub fn noisy_instance(template: &SpikePattern, sigma_ms: f64, p_del: f64, rng: &mut SimRng) -> Result<SpikePattern> {
    let jittered = jitter(template, sigma_ms, rng)?;
    delete_spikes(&jittered, p_del, rng)
}

/// Per-synapse firing rates for rate-coded patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTemplate {
    pub rates_hz: Vec<f64>,
}

impl RateTemplate {
    pub fn new(rates_hz: Vec<f64>) -> Result<Self> {
        for &r in &rates_hz {
            check_rate(r)?;
        }
        Ok(Self { rates_hz })
    }

    /// A random half of the synapses at `low_hz`, the rest at `high_hz`.
    pub fn half_split(n: usize, low_hz: f64, high_hz: f64, rng: &mut SimRng) -> Result<Self> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let mut rates = vec![high_hz; n];
        for &i in &idx[..n / 2] {
            rates[i] = low_hz;
        }
        Self::new(rates)
    }
}

/// Fresh Poisson pattern with each synapse at its template rate.
pub fn rate_pattern(template: &RateTemplate, duration: TimeMs, rng: &mut SimRng) -> Result<SpikePattern> {
    let spikes = template
        .rates_hz
        .iter()
        .map(|&r| poisson_train(duration, r, rng))
        .collect::<Result<Vec<_>>>()?;
    SpikePattern::new(duration, spikes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotifRole {
    /// A motif the neuron should answer with `desired` spikes.
    Feature { desired: usize },
    Distractor,
}

impl MotifRole {
    pub fn desired(&self) -> usize {
        match self {
            MotifRole::Feature { desired } => *desired,
            MotifRole::Distractor => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Motif {
    pub pattern: SpikePattern,
    pub role: MotifRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OccurrenceCounts {
    Poisson { mean: f64 },
    Fixed(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Placement {
    /// Each motif occurs `Poisson(rate_hz * T)` times at non-overlapping
    /// onsets, replacing the background in its window. Duration is kept.
    Replace { rate_hz: f64 },
    /// Motif windows are spliced into the background timeline, extending
    /// the trial by the total inserted length.
    Insert { counts: OccurrenceCounts },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub n_synapses: usize,
    pub background_ms: TimeMs,
    pub background_hz: f64,
    pub noise_hz: f64,
    pub placement: Placement,
}

/// Replacement attempts per occurrence before giving up.
pub const PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occurrence {
    pub motif: usize,
    pub onset: TimeMs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPattern {
    pub pattern: SpikePattern,
    /// Sorted by onset.
    pub occurrences: Vec<Occurrence>,
    pub roles: Vec<MotifRole>,
    /// Sum over feature occurrences of the feature's desired count.
    pub desired_count: usize,
}

impl TrialPattern {
    pub fn count_of(&self, motif: usize) -> usize {
        self.occurrences.iter().filter(|o| o.motif == motif).count()
    }

    /// Occurrence log as `motif_id,onset_ms,role,d_i`.
    pub fn occurrence_csv(&self) -> String {
        let mut s = String::from("motif_id,onset_ms,role,d_i\n");
        for o in &self.occurrences {
            let role = self.roles[o.motif];
            let name = match role {
                MotifRole::Feature { .. } => "feature",
                MotifRole::Distractor => "distractor",
            };
            let _ = writeln!(s, "{},{},{},{}", o.motif, o.onset, name, role.desired());
        }
        s
    }
}

fn sample_count(mean: f64, rng: &mut SimRng) -> Result<usize> {
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(invalid("mean", format!("must be non-negative, got {mean}")));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| invalid("mean", e.to_string()))?;
    let c: f64 = d.sample(rng);
    Ok(c as usize)
}

/// Builds a trial with the motifs embedded in Poisson background activity,
/// then superposes fresh Poisson noise over the whole trial.
pub fn embed_motifs(spec: &TrialSpec, motifs: &[Motif], rng: &mut SimRng) -> Result<TrialPattern> {
    let n = spec.n_synapses;
    for (i, m) in motifs.iter().enumerate() {
        if m.pattern.n_synapses() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: m.pattern.n_synapses(),
            });
        }
        if m.pattern.duration() > spec.background_ms {
            return Err(invalid(
                "motifs",
                format!("motif {i} is longer than the background"),
            ));
        }
    }
    let background = poisson_pattern(n, spec.background_ms, spec.background_hz, rng)?;
    let (mut spikes, occurrences, duration) = match &spec.placement {
        Placement::Replace { rate_hz } => replace(spec, motifs, background, *rate_hz, rng)?,
        Placement::Insert { counts } => insert(spec, motifs, background, counts, rng)?,
    };
    let noise = poisson_pattern(n, duration, spec.noise_hz, rng)?;
    for (train, extra) in spikes.iter_mut().zip(noise.spikes()) {
        train.extend_from_slice(extra);
    }
    let pattern = SpikePattern::from_unsorted(duration, spikes)?;
    let roles: Vec<MotifRole> = motifs.iter().map(|m| m.role).collect();
    let desired_count = occurrences.iter().map(|o| roles[o.motif].desired()).sum();
    Ok(TrialPattern {
        pattern,
        occurrences,
        roles,
        desired_count,
    })
}

type Embedded = (Vec<Vec<TimeMs>>, Vec<Occurrence>, TimeMs);

fn replace(
    spec: &TrialSpec,
    motifs: &[Motif],
    background: SpikePattern,
    rate_hz: f64,
    rng: &mut SimRng,
) -> Result<Embedded> {
    check_rate(rate_hz)?;
    let total = spec.background_ms;
    let mut placed: Vec<(TimeMs, TimeMs, usize)> = Vec::new();
    for (i, m) in motifs.iter().enumerate() {
        let len = m.pattern.duration();
        let count = sample_count(rate_hz * total / 1000.0, rng)?;
        for _ in 0..count {
            let mut ok = false;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let onset = rng.gen::<f64>() * (total - len);
                let end = onset + len;
                if placed.iter().all(|&(a, b, _)| end <= a || onset >= b) {
                    placed.push((onset, end, i));
                    ok = true;
                    break;
                }
            }
            if !ok {
                return Err(Error::Placement {
                    motif: i,
                    attempts: PLACEMENT_ATTEMPTS,
                });
            }
        }
    }
    placed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut spikes = background.into_spikes();
    for train in &mut spikes {
        train.retain(|&t| !placed.iter().any(|&(a, b, _)| t >= a && t < b));
    }
    for &(onset, _, i) in &placed {
        for (train, motif_train) in spikes.iter_mut().zip(motifs[i].pattern.spikes()) {
            train.extend(motif_train.iter().map(|&t| onset + t));
        }
    }
    let occurrences = placed
        .into_iter()
        .map(|(onset, _, motif)| Occurrence { motif, onset })
        .collect();
    Ok((spikes, occurrences, total))
}

fn insert(
    spec: &TrialSpec,
    motifs: &[Motif],
    background: SpikePattern,
    counts: &OccurrenceCounts,
    rng: &mut SimRng,
) -> Result<Embedded> {
    let counts: Vec<usize> = match counts {
        OccurrenceCounts::Poisson { mean } => motifs
            .iter()
            .map(|_| sample_count(*mean, rng))
            .collect::<Result<_>>()?,
        OccurrenceCounts::Fixed(c) => {
            if c.len() != motifs.len() {
                return Err(Error::Dimension {
                    expected: motifs.len(),
                    actual: c.len(),
                });
            }
            c.clone()
        }
    };
    let mut order: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat_n(i, c))
        .collect();
    order.shuffle(rng);
    let mut cuts: Vec<TimeMs> = order
        .iter()
        .map(|_| rng.gen::<f64>() * spec.background_ms)
        .collect();
    cuts.sort_by(f64::total_cmp);

    // onset of each insertion in the extended timeline
    let mut occurrences = Vec::with_capacity(order.len());
    let mut shift = 0.0;
    for (&cut, &i) in cuts.iter().zip(&order) {
        occurrences.push(Occurrence {
            motif: i,
            onset: cut + shift,
        });
        shift += motifs[i].pattern.duration();
    }
    let duration = spec.background_ms + shift;

    let mut spikes: Vec<Vec<TimeMs>> = background
        .spikes()
        .iter()
        .map(|train| {
            let mut j = 0;
            let mut offset = 0.0;
            train
                .iter()
                .map(|&t| {
                    while j < cuts.len() && cuts[j] <= t {
                        offset += motifs[order[j]].pattern.duration();
                        j += 1;
                    }
                    t + offset
                })
                .collect()
        })
        .collect();
    for o in &occurrences {
        for (train, motif_train) in spikes.iter_mut().zip(motifs[o.motif].pattern.spikes()) {
            train.extend(motif_train.iter().map(|&t| o.onset + t));
        }
    }
    Ok((spikes, occurrences, duration))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub n_synapses: usize,
    pub duration_ms: TimeMs,
    pub background_hz: f64,
    pub noise_hz: f64,
    /// Window length used when no motif is given.
    pub window_ms: TimeMs,
}

impl EvalSpec {
    pub fn new(n_synapses: usize, background_hz: f64, noise_hz: f64, window_ms: TimeMs) -> Self {
        Self {
            n_synapses,
            duration_ms: 2000.0,
            background_hz,
            noise_hz,
            window_ms,
        }
    }
}

/// Background `P_phi` and a copy whose central window is replaced by the
/// motif (plus noise) or, with no motif, by fresh background of the same
/// length.
pub fn eval_trial(spec: &EvalSpec, motif: Option<&SpikePattern>, rng: &mut SimRng) -> Result<(SpikePattern, SpikePattern)> {
    let n = spec.n_synapses;
    let len = motif.map_or(spec.window_ms, SpikePattern::duration);
    if len >= spec.duration_ms {
        return Err(invalid("motif", "must be shorter than the evaluation background"));
    }
    if let Some(m) = motif {
        if m.n_synapses() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: m.n_synapses(),
            });
        }
    }
    let bg = poisson_pattern(n, spec.duration_ms, spec.background_hz, rng)?;
    let noise = poisson_pattern(n, spec.duration_ms, spec.noise_hz, rng)?;
    let base = bg.superpose(&noise)?;

    let start = 0.5 * (spec.duration_ms - len);
    let end = start + len;
    let content: Vec<Vec<TimeMs>> = match motif {
        Some(m) => {
            let noise = poisson_pattern(n, len, spec.noise_hz, rng)?;
            m.superpose(&noise)?.into_spikes()
        }
        None => poisson_pattern(n, len, spec.background_hz + spec.noise_hz, rng)?.into_spikes(),
    };
    let spikes = base
        .spikes()
        .iter()
        .zip(content)
        .map(|(train, window)| {
            let mut out: Vec<TimeMs> = train.iter().copied().filter(|&t| t < start || t >= end).collect();
            out.extend(window.into_iter().map(|t| start + t));
            out
        })
        .collect();
    let inserted = SpikePattern::from_unsorted(spec.duration_ms, spikes)?;
    Ok((base, inserted))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feature(n: usize, rng: &mut SimRng) -> SpikePattern {
        poisson_pattern(n, 100.0, 4.0, rng).unwrap()
    }

    #[test]
    fn zero_rate_is_empty() {
        let mut rng = rng_from_seed(1);
        let p = poisson_pattern(20, 500.0, 0.0, &mut rng).unwrap();
        assert_eq!(p.total_spikes(), 0);
        assert!(poisson_pattern(2, 500.0, -1.0, &mut rng).is_err());
    }

    #[test]
    fn same_seed_same_pattern() {
        let a = poisson_pattern(50, 500.0, 4.0, &mut rng_from_seed(9)).unwrap();
        let b = poisson_pattern(50, 500.0, 4.0, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
        let c = poisson_pattern(50, 500.0, 4.0, &mut rng_from_seed(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn jitter_edges() {
        let mut rng = rng_from_seed(3);
        let p = poisson_pattern(30, 500.0, 10.0, &mut rng).unwrap();
        assert_eq!(jitter(&p, 0.0, &mut rng).unwrap(), p);
        let j = jitter(&p, 50.0, &mut rng).unwrap();
        assert_eq!(j.total_spikes(), p.total_spikes());
        assert!(jitter(&p, -1.0, &mut rng).is_err());

        let edge = SpikePattern::new(10.0, vec![vec![0.0; 50]]).unwrap();
        let j = jitter(&edge, 1.0, &mut rng).unwrap();
        assert!(j.train(0).iter().all(|&t| (0.0..=10.0).contains(&t)));
        assert!(j.train(0).contains(&0.0));
    }

    #[test]
    fn deletion_edges() {
        let mut rng = rng_from_seed(4);
        let p = poisson_pattern(30, 500.0, 10.0, &mut rng).unwrap();
        assert_eq!(delete_spikes(&p, 0.0, &mut rng).unwrap(), p);
        assert_eq!(delete_spikes(&p, 1.0, &mut rng).unwrap().total_spikes(), 0);
        assert!(delete_spikes(&p, 1.5, &mut rng).is_err());
    }

    #[test]
    fn rate_template_split() {
        let mut rng = rng_from_seed(5);
        let t = RateTemplate::half_split(10, 2.0, 10.0, &mut rng).unwrap();
        assert_eq!(t.rates_hz.iter().filter(|&&r| r == 2.0).count(), 5);
        let zero = RateTemplate::new(vec![0.0; 4]).unwrap();
        assert_eq!(rate_pattern(&zero, 500.0, &mut rng).unwrap().total_spikes(), 0);
        assert!(RateTemplate::new(vec![-1.0]).is_err());
        let a = rate_pattern(&t, 500.0, &mut rng).unwrap();
        let b = rate_pattern(&t, 500.0, &mut rng).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn no_motifs_means_no_target() {
        let spec = TrialSpec {
            n_synapses: 20,
            background_ms: 1000.0,
            background_hz: 4.0,
            noise_hz: 1.0,
            placement: Placement::Replace { rate_hz: 3.0 },
        };
        let t = embed_motifs(&spec, &[], &mut rng_from_seed(6)).unwrap();
        assert_eq!(t.desired_count, 0);
        assert!(t.occurrences.is_empty());
        assert_eq!(t.pattern.duration(), 1000.0);
    }

    #[test]
    fn insertion_with_fixed_counts_extends_duration() {
        let mut rng = rng_from_seed(7);
        let motifs: Vec<Motif> = (0..6)
            .map(|i| Motif {
                pattern: feature(40, &mut rng),
                role: if i < 3 {
                    MotifRole::Feature { desired: 1 }
                } else {
                    MotifRole::Distractor
                },
            })
            .collect();
        let spec = TrialSpec {
            n_synapses: 40,
            background_ms: 2000.0,
            background_hz: 4.0,
            noise_hz: 1.0,
            placement: Placement::Insert {
                counts: OccurrenceCounts::Fixed(vec![3; 6]),
            },
        };
        let t = embed_motifs(&spec, &motifs, &mut rng).unwrap();
        assert_eq!(t.pattern.duration(), 3800.0);
        assert_eq!(t.occurrences.len(), 18);
        assert_eq!(t.desired_count, 9);
    }

    #[test]
    fn desired_count_weights_features() {
        let mut rng = rng_from_seed(8);
        let motifs: Vec<Motif> = [1, 2, 3]
            .iter()
            .map(|&d| Motif {
                pattern: feature(10, &mut rng),
                role: MotifRole::Feature { desired: d },
            })
            .collect();
        let spec = TrialSpec {
            n_synapses: 10,
            background_ms: 2000.0,
            background_hz: 4.0,
            noise_hz: 1.0,
            placement: Placement::Insert {
                counts: OccurrenceCounts::Fixed(vec![2, 3, 1]),
            },
        };
        let t = embed_motifs(&spec, &motifs, &mut rng).unwrap();
        assert_eq!(t.desired_count, 11);
        assert_eq!(t.count_of(1), 3);
        let log = t.occurrence_csv();
        assert_eq!(log.lines().count(), 7);
        assert!(log.starts_with("motif_id,onset_ms,role,d_i\n"));
    }

    #[test]
    fn replacement_overflow_is_reported() {
        let mut rng = rng_from_seed(11);
        let m = Motif {
            pattern: SpikePattern::empty(5, 400.0).unwrap(),
            role: MotifRole::Feature { desired: 1 },
        };
        let spec = TrialSpec {
            n_synapses: 5,
            background_ms: 1000.0,
            background_hz: 4.0,
            noise_hz: 0.0,
            placement: Placement::Replace { rate_hz: 20.0 },
        };
        assert!(matches!(
            embed_motifs(&spec, &[m], &mut rng),
            Err(Error::Placement { .. })
        ));
    }

    #[test]
    fn eval_trial_window() {
        let mut rng = rng_from_seed(12);
        let spec = EvalSpec::new(30, 4.0, 1.0, 100.0);
        let (base, with_bg) = eval_trial(&spec, None, &mut rng).unwrap();
        let outside = |p: &SpikePattern| -> Vec<Vec<f64>> {
            p.spikes()
                .iter()
                .map(|tr| tr.iter().copied().filter(|&t| !(950.0..1050.0).contains(&t)).collect())
                .collect()
        };
        assert_eq!(outside(&base), outside(&with_bg));

        let motif = SpikePattern::new(100.0, vec![vec![0.0, 99.0]; 30]).unwrap();
        let spec = EvalSpec::new(30, 4.0, 0.0, 100.0);
        let (_, with_f) = eval_trial(&spec, Some(&motif), &mut rng).unwrap();
        for tr in with_f.spikes() {
            assert!(tr.contains(&950.0) && tr.contains(&1049.0));
        }

        let (a, _) = eval_trial(&spec, Some(&motif), &mut rng_from_seed(2)).unwrap();
        let (b, _) = eval_trial(&spec, None, &mut rng_from_seed(2)).unwrap();
        assert_eq!(a, b);
    }
}
