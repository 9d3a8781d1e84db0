use crate::error::{Error, Result};
use crate::sampling::SampleSet;
use crate::scalar::Real;

/// Training samples as one-hot product states.
///
/// A one-hot state has bond extent 1 and selects a single physical slice per
/// site, so it is stored as the outcome string itself together with its
/// weight `n_j / N`.
#[derive(Clone, Debug)]
pub struct OneHotSamples<T> {
    sites: usize,
    outcomes: Vec<u8>,
    weights: Vec<T>,
}

impl<T: Real> OneHotSamples<T> {
    pub fn new(set: &SampleSet) -> Result<Self> {
        if set.is_empty() || set.total() == 0 {
            return Err(Error::Validation("sample set is empty".into()));
        }
        let outcomes = set.entries().iter().flat_map(|e| e.outcome.iter().copied()).collect();
        Ok(Self { sites: set.sites(), outcomes, weights: set.frequencies() })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn outcome(&self, j: usize) -> &[u8] {
        &self.outcomes[j * self.sites..(j + 1) * self.sites]
    }

    #[inline]
    pub fn symbol(&self, j: usize, site: usize) -> usize {
        self.outcomes[j * self.sites + site] as usize
    }

    /// `Σ_j (n_j/N)²`, the offset between the reported loss and the squared
    /// distance `‖P − P_s‖²`.
    pub fn self_overlap(&self) -> T {
        self.weights.iter().fold(T::zero(), |acc, &w| acc + w * w)
    }
}
