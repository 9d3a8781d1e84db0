//! Tensor trains over outcome strings.
//!
//! Core `k` is stored as a `[4, D_k, D_{k+1}]` tensor so that the matrix
//! selected by outcome symbol `s` is the contiguous row-major block
//! `X^s_{b,b'}`. `P(a) = X^{a_0} X^{a_1} ⋯ X^{a_{L-1}}` with `D_0 = D_L = 1`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::povm::OUTCOMES;
use crate::rng::{stream_rng, INIT_STREAM};
use crate::scalar::Real;
use crate::states::{outcome_string, MAX_DENSE_SITES};
use crate::tensor::DenseTensor;

/// Nonnegative tensor-train model of an outcome distribution.
///
/// Fitted trains keep every core entry nonnegative. Trains obtained by
/// forward-mapping an arbitrary MPO may carry signed cores while still
/// contracting to a nonnegative distribution; `is_nonnegative` tells the two
/// apart.
#[derive(Clone, Debug, PartialEq)]
pub struct TtDistribution<T> {
    cores: Vec<DenseTensor<T>>,
}

/// Bond extents `min(D, 4^k, 4^{L-k})` at every cut `k = 0..=L`.
pub fn bond_profile(sites: usize, max_bond: usize) -> Vec<usize> {
    let cap = |k: usize| -> usize {
        OUTCOMES.checked_pow(k as u32).unwrap_or(usize::MAX)
    };
    (0..=sites).map(|k| max_bond.min(cap(k)).min(cap(sites - k))).collect()
}

impl<T: Real> TtDistribution<T> {
    pub fn new(cores: Vec<DenseTensor<T>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Validation("tensor train needs at least one site".into()));
        }
        let mut left = 1;
        for (k, c) in cores.iter().enumerate() {
            let sh = c.shape();
            if sh.len() != 3 || sh[0] != OUTCOMES {
                return Err(Error::Dimension(format!("core {k} has shape {sh:?}")));
            }
            if sh[1] != left {
                return Err(Error::Dimension(format!(
                    "core {k} left bond {} does not match {left}",
                    sh[1]
                )));
            }
            left = sh[2];
        }
        if left != 1 {
            return Err(Error::Dimension(format!("right boundary bond is {left}")));
        }
        Ok(Self { cores })
    }

    /// Random start: i.i.d. uniform(0, 1) entries on the capped bond profile.
    pub fn random(sites: usize, max_bond: usize, seed: u64) -> Result<Self> {
        if sites == 0 || max_bond == 0 {
            return Err(Error::Validation("sites and bond dimension must be positive".into()));
        }
        let bonds = bond_profile(sites, max_bond);
        let mut rng = stream_rng(seed, INIT_STREAM);
        let cores = (0..sites)
            .map(|k| {
                let shape = vec![OUTCOMES, bonds[k], bonds[k + 1]];
                let n = shape.iter().product();
                // gen::<f64>() is in [0, 1); reject the zero endpoint.
                let data = (0..n)
                    .map(|_| loop {
                        let u: f64 = rng.gen();
                        if u > 0.0 {
                            break T::lit(u);
                        }
                    })
                    .collect();
                DenseTensor::new(shape, data)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    pub fn sites(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[DenseTensor<T>] {
        &self.cores
    }

    pub fn core(&self, site: usize) -> &DenseTensor<T> {
        &self.cores[site]
    }

    /// Replaces a core with one of identical shape.
    pub fn set_core(&mut self, site: usize, core: DenseTensor<T>) -> Result<()> {
        let len = self.sites();
        let slot = self.cores.get_mut(site).ok_or(Error::Range {
            index: site,
            valid: format!("0..{len}"),
        })?;
        if slot.shape() != core.shape() {
            return Err(Error::Dimension(format!(
                "core {site} shape {:?} cannot be replaced by {:?}",
                slot.shape(),
                core.shape()
            )));
        }
        *slot = core;
        Ok(())
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        let mut out = vec![1];
        out.extend(self.cores.iter().map(|c| c.shape()[2]));
        out
    }

    pub fn is_nonnegative(&self) -> bool {
        self.cores.iter().all(|c| c.data().iter().all(|&x| x >= T::zero()))
    }

    pub fn min_entry(&self) -> T {
        self.cores
            .iter()
            .flat_map(|c| c.data().iter().copied())
            .fold(T::max_value().expect("bounded float"), |m, x| m.min(x))
    }

    /// `P(a)` by chaining the selected matrices left to right.
    pub fn probability(&self, outcome: &[u8]) -> T {
        debug_assert_eq!(outcome.len(), self.sites());
        let mut v = vec![T::one()];
        for (core, &a) in self.cores.iter().zip(outcome) {
            let (dl, dr) = (core.shape()[1], core.shape()[2]);
            let block = &core.data()[a as usize * dl * dr..(a as usize + 1) * dl * dr];
            let mut next = vec![T::zero(); dr];
            for (b, &vb) in v.iter().enumerate() {
                for (n, &x) in next.iter_mut().zip(&block[b * dr..(b + 1) * dr]) {
                    *n += vb * x;
                }
            }
            v = next;
        }
        v[0]
    }

    /// `Σ_a P(a)`, contracting each core with the all-ones physical vector.
    pub fn total_mass(&self) -> T {
        let mut v = vec![T::one()];
        for core in &self.cores {
            let (dl, dr) = (core.shape()[1], core.shape()[2]);
            let mut next = vec![T::zero(); dr];
            for s in 0..OUTCOMES {
                let block = &core.data()[s * dl * dr..(s + 1) * dl * dr];
                for (b, &vb) in v.iter().enumerate() {
                    for (n, &x) in next.iter_mut().zip(&block[b * dr..(b + 1) * dr]) {
                        *n += vb * x;
                    }
                }
            }
            v = next;
        }
        v[0]
    }

    pub fn scale_core(&mut self, site: usize, alpha: T) {
        self.cores[site].data_mut().iter_mut().for_each(|x| *x *= alpha);
    }

    /// All 4^L values of `P`, lexicographic order.
    pub fn densify(&self) -> Result<Vec<T>> {
        let l = self.sites();
        if l > MAX_DENSE_SITES {
            return Err(Error::Capacity(format!(
                "dense evaluation is limited to {MAX_DENSE_SITES} sites"
            )));
        }
        Ok((0..OUTCOMES.pow(l as u32)).map(|i| self.probability(&outcome_string(i, l))).collect())
    }
}
