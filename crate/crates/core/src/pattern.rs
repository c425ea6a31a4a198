//! Spike patterns and synaptic weight vectors, with their text formats.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::TimeMs;

/// Per-synapse sorted spike times over `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PatternDoc", into = "PatternDoc")]
pub struct SpikePattern {
    duration: TimeMs,
    spikes: Vec<Vec<TimeMs>>,
}

#[derive(Serialize, Deserialize)]
struct PatternDoc {
    n_synapses: usize,
    duration_ms: TimeMs,
    spikes: Vec<Vec<TimeMs>>,
}

impl TryFrom<PatternDoc> for SpikePattern {
    type Error = Error;

    fn try_from(doc: PatternDoc) -> Result<Self> {
        if doc.spikes.len() != doc.n_synapses {
            return Err(Error::InvalidPattern(format!(
                "n_synapses is {} but {} spike lists were given",
                doc.n_synapses,
                doc.spikes.len()
            )));
        }
        SpikePattern::new(doc.duration_ms, doc.spikes)
    }
}

impl From<SpikePattern> for PatternDoc {
    fn from(p: SpikePattern) -> Self {
        PatternDoc {
            n_synapses: p.spikes.len(),
            duration_ms: p.duration,
            spikes: p.spikes,
        }
    }
}

impl SpikePattern {
    /// Validates that every list is sorted and inside `[0, duration]`.
    pub fn new(duration: TimeMs, spikes: Vec<Vec<TimeMs>>) -> Result<Self> {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::InvalidPattern(format!("bad duration {duration}")));
        }
        if spikes.is_empty() {
            return Err(Error::InvalidPattern("need at least one synapse".into()));
        }
        for (i, train) in spikes.iter().enumerate() {
            for (j, &t) in train.iter().enumerate() {
                if !(t.is_finite() && (0.0..=duration).contains(&t)) {
                    return Err(Error::InvalidPattern(format!(
                        "synapse {i}: spike at {t} outside [0, {duration}]"
                    )));
                }
                if j > 0 && train[j - 1] > t {
                    return Err(Error::InvalidPattern(format!("synapse {i}: spikes not sorted")));
                }
            }
        }
        Ok(Self { duration, spikes })
    }

    /// Builds a pattern, sorting each list and clipping times into range.
    pub fn from_unsorted(duration: TimeMs, mut spikes: Vec<Vec<TimeMs>>) -> Result<Self> {
        for train in &mut spikes {
            for t in train.iter_mut() {
                *t = t.clamp(0.0, duration);
            }
            train.sort_by(f64::total_cmp);
        }
        Self::new(duration, spikes)
    }

    pub fn empty(n_synapses: usize, duration: TimeMs) -> Result<Self> {
        Self::new(duration, vec![Vec::new(); n_synapses])
    }

    pub fn n_synapses(&self) -> usize {
        self.spikes.len()
    }

    pub fn duration(&self) -> TimeMs {
        self.duration
    }

    pub fn spikes(&self) -> &[Vec<TimeMs>] {
        &self.spikes
    }

    pub fn train(&self, synapse: usize) -> &[TimeMs] {
        &self.spikes[synapse]
    }

    pub fn total_spikes(&self) -> usize {
        self.spikes.iter().map(Vec::len).sum()
    }

    pub fn into_spikes(self) -> Vec<Vec<TimeMs>> {
        self.spikes
    }

    /// Union of two patterns over the same synapses; the duration is the
    /// larger of the two.
    pub fn superpose(&self, other: &SpikePattern) -> Result<SpikePattern> {
        if self.n_synapses() != other.n_synapses() {
            return Err(Error::Dimension {
                expected: self.n_synapses(),
                actual: other.n_synapses(),
            });
        }
        let spikes = self
            .spikes
            .iter()
            .zip(&other.spikes)
            .map(|(a, b)| merge_sorted(a, b))
            .collect();
        SpikePattern::new(self.duration.max(other.duration), spikes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pattern serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            line: e.line(),
            reason: e.to_string(),
        })
    }
}

pub(crate) fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Writes patterns in the line format `pattern_id,synapse_index,time_ms`.
///
/// Each pattern is preceded by a `#pattern,<id>,<n_synapses>,<duration_ms>`
/// line so synapse count and duration survive patterns with silent tails.
pub fn write_spike_csv<W: Write>(mut out: W, patterns: &[(u64, &SpikePattern)]) -> std::io::Result<()> {
    writeln!(out, "pattern_id,synapse_index,time_ms")?;
    for (id, p) in patterns {
        writeln!(out, "#pattern,{id},{},{}", p.n_synapses(), p.duration())?;
        for (i, train) in p.spikes().iter().enumerate() {
            for t in train {
                writeln!(out, "{id},{i},{t}")?;
            }
        }
    }
    Ok(())
}

/// Reads the line format written by [`write_spike_csv`]. Patterns without a
/// `#pattern` line get `n_synapses = max index + 1` and `duration = max time`.
pub fn read_spike_csv<R: BufRead>(input: R) -> Result<Vec<(u64, SpikePattern)>> {
    struct Acc {
        id: u64,
        n: Option<usize>,
        duration: Option<f64>,
        spikes: Vec<(usize, f64)>,
    }
    let mut accs: Vec<Acc> = Vec::new();
    let slot = |accs: &mut Vec<Acc>, id: u64| -> usize {
        match accs.iter().position(|a| a.id == id) {
            Some(p) => p,
            None => {
                accs.push(Acc {
                    id,
                    n: None,
                    duration: None,
                    spikes: Vec::new(),
                });
                accs.len() - 1
            }
        }
    };
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: lineno + 1,
            reason: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with("pattern_id") {
            continue;
        }
        let perr = |reason: String| Error::Parse {
            line: lineno + 1,
            reason,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if let Some(meta) = line.strip_prefix("#pattern,") {
            let f: Vec<&str> = meta.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(perr(format!("expected 3 metadata fields, got {}", f.len())));
            }
            let id: u64 = f[0].parse().map_err(|e| perr(format!("{e}")))?;
            let s = slot(&mut accs, id);
            accs[s].n = Some(f[1].parse().map_err(|e| perr(format!("{e}")))?);
            accs[s].duration = Some(f[2].parse().map_err(|e| perr(format!("{e}")))?);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        if fields.len() != 3 {
            return Err(perr(format!("expected 3 fields, got {}", fields.len())));
        }
        let id: u64 = fields[0].parse().map_err(|e| perr(format!("{e}")))?;
        let syn: usize = fields[1].parse().map_err(|e| perr(format!("{e}")))?;
        let t: f64 = fields[2].parse().map_err(|e| perr(format!("{e}")))?;
        let s = slot(&mut accs, id);
        accs[s].spikes.push((syn, t));
    }
    accs.into_iter()
        .map(|a| {
            let n = a
                .n
                .unwrap_or_else(|| a.spikes.iter().map(|s| s.0 + 1).max().unwrap_or(1));
            let duration = a
                .duration
                .unwrap_or_else(|| a.spikes.iter().map(|s| s.1).fold(0.0, f64::max));
            let mut trains = vec![Vec::new(); n];
            for (syn, t) in a.spikes {
                let train = trains.get_mut(syn).ok_or_else(|| {
                    Error::InvalidPattern(format!("synapse index {syn} >= n_synapses {n}"))
                })?;
                train.push(t);
            }
            for train in &mut trains {
                train.sort_by(f64::total_cmp);
            }
            Ok((a.id, SpikePattern::new(duration, trains)?))
        })
        .collect()
}

/// Synaptic efficacies, one per input channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(i) = w.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: format!("entry {i} is not finite"),
            });
        }
        Ok(Self(w))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() == n {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: n,
                actual: self.0.len(),
            })
        }
    }

    /// Adds `delta` in place.
    pub fn add(&mut self, delta: &[f64]) -> Result<()> {
        self.check_len(delta.len())?;
        for (w, d) in self.0.iter_mut().zip(delta) {
            *w += d;
        }
        Ok(())
    }

    pub fn clamp(&mut self, lo: f64, hi: f64) {
        for w in &mut self.0 {
            *w = w.clamp(lo, hi);
        }
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.0.iter().sum::<f64>() / self.0.len() as f64
        }
    }

    /// One-column CSV with a `w` header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("w\n");
        for w in &self.0 {
            let _ = writeln!(s, "{w}");
        }
        s
    }

    pub fn from_csv(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        for (i, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line == "w") {
                continue;
            }
            out.push(line.parse::<f64>().map_err(|e| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?);
        }
        Self::new(out)
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for WeightVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}
