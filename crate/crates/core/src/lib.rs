//! Quantum state tomography with nonnegative tensor trains.
//!
//! Outcome strings of a tetrahedral IC-POVM are fitted by a nonnegative
//! tensor train through alternating multiplicative updates; the fitted train
//! is mapped site-by-site through the inverse POVM into an MPO density matrix.

// `!(x <= tol)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod container;
pub mod error;
pub mod fit;
pub mod metrics;
pub mod povm;
pub mod reconstruct;
pub mod rng;
pub mod sampling;
pub mod scalar;
pub mod states;
pub mod tensor;
pub mod tt;

pub use error::{Error, Result};
pub use fit::{fit, EnvStorage, FitConfig, FitOutcome, OneHotSamples, TrialResult};
pub use metrics::{classical_fidelity, quantum_fidelity, FidelityResult, ProbabilityModel};
pub use povm::{tetrahedral_povm, Povm};
pub use scalar::{Complex, Real, C};
pub use states::{DenseDensity, DenseDistribution, MpoDensity, XxzParams};
pub use reconstruct::{diagnose, normalize_tt, tt_to_mpo, ReconstructionReport};
pub use sampling::SampleSet;
pub use tensor::DenseTensor;
pub use tt::TtDistribution;

pub type Povm64 = Povm<f64>;
pub type Povm32 = Povm<f32>;
pub type DenseDensity64 = DenseDensity<f64>;
pub type MpoDensity64 = MpoDensity<f64>;
pub type TtDistribution64 = TtDistribution<f64>;
pub type TtDistribution32 = TtDistribution<f32>;
pub type FitConfig64 = FitConfig<f64>;
