//! One neuron per class, trained and read out by spike count.

use spikelearn::rules::{apply_momentum, MomentumState, Prepared, Rule};
use spikelearn::{NeuronConfig, WeightVector};

use crate::Result;

#[derive(Debug, Clone)]
pub struct ClassifierBank {
    pub neurons: Vec<WeightVector>,
    /// A neuron "votes" for its class when it fires more than this many spikes.
    pub decision_count: usize,
    momentum: Vec<MomentumState>,
}

impl ClassifierBank {
    pub fn new(neurons: Vec<WeightVector>, decision_count: usize) -> Self {
        let momentum = neurons.iter().map(|w| MomentumState::new(w.len())).collect();
        Self {
            neurons,
            decision_count,
            momentum,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.neurons.len()
    }

    /// Presents a labelled instance to every neuron. The target neuron is
    /// pushed to more than `target` spikes (BIN: to fire at all), the others
    /// to silence. Returns the number of neurons that erred.
    pub fn train(
        &mut self,
        prepared: &Prepared,
        class: usize,
        rule: Rule,
        target: usize,
        lambda: f64,
        mu: f64,
        neuron: &NeuronConfig,
    ) -> Result<usize> {
        let mut errors = 0;
        for (j, (w, mom)) in self.neurons.iter_mut().zip(&mut self.momentum).enumerate() {
            let is_target = j == class;
            let sim = prepared.simulate(w.as_slice(), neuron.theta)?;
            let (wrong, n_d) = match (is_target, rule) {
                (true, Rule::Bin) => (sim.n_out == 0, 1),
                (true, _) => (sim.n_out <= target, target + 1),
                (false, _) => (sim.n_out > 0, 0),
            };
            if !wrong {
                continue;
            }
            errors += 1;
            let dw = match rule {
                Rule::Eml => prepared.eml_delta(w.as_slice(), &sim, n_d, lambda)?,
                Rule::Emlc => prepared.emlc_delta(&sim, n_d, lambda)?,
                Rule::Bin => prepared.bin_delta(&sim, is_target, lambda),
                Rule::Stdp => unreachable!("validated: classification rules are supervised"),
            };
            let applied = apply_momentum(&dw, mom, mu)?;
            w.add(&applied)?;
        }
        Ok(errors)
    }

    pub fn responses(&self, prepared: &Prepared, neuron: &NeuronConfig) -> Result<Vec<usize>> {
        self.neurons
            .iter()
            .map(|w| Ok(prepared.count(w.as_slice(), neuron.theta)?))
            .collect()
    }

    pub fn votes(&self, n_out: usize) -> bool {
        n_out > self.decision_count
    }

    /// Correct per-neuron decisions for an instance of `class`, and whether
    /// all of them were correct.
    pub fn score(&self, responses: &[usize], class: usize) -> (usize, bool) {
        let correct = responses
            .iter()
            .enumerate()
            .filter(|&(j, &n)| self.votes(n) == (j == class))
            .count();
        (correct, correct == responses.len())
    }
}
