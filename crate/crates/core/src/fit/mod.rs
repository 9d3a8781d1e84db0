//! Nonnegative tensor-train fit by alternating multiplicative updates.
//!
//! The loss is the squared Euclidean distance between the train `P` and the
//! empirical distribution `P_s`, shifted by the constant `⟨P_s,P_s⟩`:
//! `⟨P,P⟩ − 2⟨P,P_s⟩`. Its minimum over all distributions is `−⟨P_s,P_s⟩`.

mod driver;
mod env;
mod local;
mod onehot;

pub use driver::{
    best_of_trials, fit, fit_from, fit_trial, should_stop, sweep, FitConfig, FitOutcome,
    SweepStat, TrialResult, UpdateRecord,
};
pub use env::{EnvCache, EnvStorage};
pub use local::{loss, update_core, LocalProblem};
pub use onehot::OneHotSamples;
