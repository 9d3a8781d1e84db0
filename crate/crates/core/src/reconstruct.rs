//! From a fitted outcome distribution back to a density matrix.

use crate::error::{Error, Result};
use crate::povm::Povm;
use crate::scalar::Real;
use crate::states::{DenseDensity, MpoDensity};
use crate::tt::TtDistribution;

/// Validity diagnostics of a reconstructed density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionReport {
    /// `|tr ρ − 1|`.
    pub trace_deviation: f64,
    /// `‖ρ − ρ†‖_F`.
    pub hermiticity_residual: f64,
    /// Smallest eigenvalue of the Hermitian part; `None` when ρ was not
    /// densified.
    pub min_eigenvalue: Option<f64>,
    pub bond_profile: Vec<usize>,
}

/// Scales the first core by `1/Z` so that `Σ_a P(a) = 1`.
pub fn normalize_tt<T: Real>(tt: &TtDistribution<T>) -> Result<TtDistribution<T>> {
    let z = tt.total_mass();
    if !z.is_finite() || z <= T::zero() {
        return Err(Error::DegenerateFit(format!("total mass {z} is not positive")));
    }
    let mut out = tt.clone();
    out.scale_core(0, T::one() / z);
    Ok(out)
}

/// Applies the inverse POVM to every core; the bond profile is unchanged.
pub fn tt_to_mpo<T: Real>(tt: &TtDistribution<T>, povm: &Povm<T>) -> Result<MpoDensity<T>> {
    let cores = tt.cores().iter().map(|c| povm.inverse_map_site(c)).collect::<Result<Vec<_>>>()?;
    MpoDensity::new(cores)
}

/// Applies the POVM to every MPO core. The result carries real, possibly
/// signed cores whose contraction is the outcome distribution of `rho`.
pub fn mpo_to_tt<T: Real>(rho: &MpoDensity<T>, povm: &Povm<T>) -> Result<TtDistribution<T>> {
    let tol = T::lit(1e-10);
    let cores = rho
        .cores()
        .iter()
        .map(|w| povm.forward_map_site_real(w, tol))
        .collect::<Result<Vec<_>>>()?;
    TtDistribution::new(cores)
}

pub fn diagnose<T: Real>(rho: &DenseDensity<T>, bond_profile: Vec<usize>) -> ReconstructionReport {
    let m = rho.matrix();
    let tr = rho.trace();
    let trace_deviation = ((tr.re - T::one()).powi(2) + tr.im.powi(2)).sqrt().as_f64();
    let herm = (m - m.adjoint()).norm().as_f64();
    let min_eigenvalue = rho.eigenvalues().first().map(|&e| e.as_f64());
    ReconstructionReport { trace_deviation, hermiticity_residual: herm, min_eigenvalue, bond_profile }
}
