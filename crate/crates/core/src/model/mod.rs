//! Potentials, frequencies, hopping kernels and operator instances.

mod frequency;
mod hopping;
mod instance;
mod potential;
mod regularity;

pub use frequency::{golden_mean, FrequencyVector, DEFAULT_N_CHECK};
pub use hopping::{DistanceTable, HopFn, HoppingKernel, HoppingTerm};
pub use instance::{OperatorInstance, DEFAULT_DELTA_RES};
pub use potential::{PotentialKind, PotentialSpec, DEFAULT_DELTA_SING};
pub use regularity::{probe_regularity, probe_regularity_scaled, RegularityReport};
