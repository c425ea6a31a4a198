//! Event-driven simulation and multi-spike learning for a leaky
//! integrate-and-fire neuron with impulse synapses.
//!
//! Each input spike makes the membrane potential jump by its synaptic
//! weight; the potential then decays with time constant `tau`. An output
//! spike subtracts the threshold from the potential. Since nothing happens
//! between input events, simulation is exact and linear in the number of
//! input spikes.

pub mod error;
pub mod gen;
pub mod kernel;
pub mod pattern;
pub mod rules;
pub mod sim;
pub mod sts;

pub use error::{Error, Result};
pub use kernel::{calibrate_tau, double_exp_kernel, kappa, KernelParams, TimeMs};
pub use pattern::{SpikePattern, WeightVector};
pub use rules::{
    apply_momentum, bin_update, eml_update, emlc_update, stdp_update, train_stdp_cycle, train_to_count,
    LearnerConfig, MomentumState, Prepared, Rule, StdpParams, TrainReport,
};
pub use sim::{psp_sum, simulate, simulate_clock, EventStream, NeuronConfig, SimResult};
pub use sts::{
    cosine_similarity, critical_threshold, eml_gradient, numerical_gradient, spike_count_at, sts_curve,
    StsCurve, StsPoint, StsSolver,
};
