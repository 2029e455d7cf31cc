//! Coded slotted ALOHA over packet erasure channels.
//!
//! Users repeat a packet in randomly chosen slots of a frame; the receiver
//! decodes singleton slots and cancels decoded copies until it gets stuck.
//! This crate simulates that process, predicts the resulting error floor from
//! a catalog of small stopping sets, computes asymptotic thresholds, searches
//! degree distributions, and checks the stopping-set probabilities by exact
//! enumeration.

pub mod decoder;
pub mod density_evolution;
pub mod distributions;
pub mod error;
pub mod frame;
pub mod harness;
mod math;
pub mod optimizer;
pub mod oracle;
pub mod predictor;
pub mod rng;
pub mod stopping_sets;

pub use decoder::{peel, DecodeOutcome, DegreeKeying};
pub use density_evolution::{de_fixed_point, threshold, DeResult};
pub use distributions::{ChannelModel, DegreeDistribution};
pub use error::{Error, Result};
pub use frame::{multinomial_pmf, sample_frame, FrameConfig, FrameGraph, GraphProfile, SamplingMode};
pub use harness::{confidence_interval, run_sweep, SweepPlan, SweepRow};
pub use optimizer::{objective, optimize, ObjectiveSpec};
pub use predictor::PlrReport;
pub use stopping_sets::{classify, components, ComponentClass, StoppingSetId};
