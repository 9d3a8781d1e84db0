//! Environment cache for the alternating sweeps.
//!
//! Bond `b` sits between sites `b-1` and `b` (`b = 0..=L`). At every bond the
//! cache may hold
//!
//! - the left Gram `G<_b = Σ_{s_0..s_{b-1}} X^{<b} ⊗ X^{<b}` and the right Gram
//!   `G>_b`, both `D_b × D_b`;
//! - the per-sample overlaps of the train with each one-hot sample state,
//!   `L_b[j] = X^{a_0} ⋯ X^{a_{b-1}}` (row vector) and
//!   `R_b[j] = X^{a_b} ⋯ X^{a_{L-1}}` (column vector), stored sample-major.
//!
//! Grams are cheap and kept at every bond. Per-sample overlaps dominate memory
//! (`N_s · D` scalars per bond), so under [`EnvStorage::Anchored`] only every
//! `⌈L/4⌉`-th bond is retained besides the moving boundaries; other bonds are
//! recomputed from the nearest anchor when a sweep reaches them. Recomputation
//! repeats the exact arithmetic of the original pass, so both storage modes
//! produce bit-identical sweeps.
//!
//! Entries that depend on a core are dropped when that core changes
//! ([`EnvCache::invalidate_site`]), so everything present is always coherent
//! with the current train.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::onehot::OneHotSamples;
use crate::error::{Error, Result};
use crate::povm::OUTCOMES;
use crate::scalar::Real;
use crate::tensor::DenseTensor;
use crate::tt::TtDistribution;

/// Samples per parallel work unit. Reductions combine chunk partials in chunk
/// order, so results do not depend on the thread count.
pub(crate) const CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EnvStorage {
    /// Keep per-sample overlaps at every bond.
    Full,
    /// Keep per-sample overlaps at anchor bonds and the active boundaries.
    #[default]
    Anchored,
}

impl EnvStorage {
    pub fn stride(self, sites: usize) -> usize {
        match self {
            EnvStorage::Full => 1,
            EnvStorage::Anchored => sites.div_ceil(4).max(1),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnvCache<T: Real> {
    sites: usize,
    samples: usize,
    stride: usize,
    left_gram: Vec<Option<DMatrix<T>>>,
    right_gram: Vec<Option<DMatrix<T>>>,
    left_overlap: Vec<Option<Vec<T>>>,
    right_overlap: Vec<Option<Vec<T>>>,
}

pub(crate) fn block<T: Real>(core: &DenseTensor<T>, s: usize) -> DMatrix<T> {
    let (dl, dr) = (core.shape()[1], core.shape()[2]);
    DMatrix::from_row_slice(dl, dr, &core.data()[s * dl * dr..(s + 1) * dl * dr])
}

/// `Σ_s (X^s)ᵀ G X^s`.
pub(crate) fn left_gram_step<T: Real>(gram: &DMatrix<T>, core: &DenseTensor<T>) -> DMatrix<T> {
    let dr = core.shape()[2];
    let mut out = DMatrix::zeros(dr, dr);
    for s in 0..OUTCOMES {
        let x = block(core, s);
        out += x.transpose() * gram * &x;
    }
    out
}

/// `Σ_s X^s G (X^s)ᵀ`.
pub(crate) fn right_gram_step<T: Real>(gram: &DMatrix<T>, core: &DenseTensor<T>) -> DMatrix<T> {
    let dl = core.shape()[1];
    let mut out = DMatrix::zeros(dl, dl);
    for s in 0..OUTCOMES {
        let x = block(core, s);
        out += &x * gram * x.transpose();
    }
    out
}

/// `L_{k+1}[j] = L_k[j] · X^{a^j_k}` for every sample.
pub(crate) fn left_overlap_step<T: Real>(
    prev: &[T],
    core: &DenseTensor<T>,
    samples: &OneHotSamples<T>,
    site: usize,
) -> Vec<T> {
    let (dl, dr) = (core.shape()[1], core.shape()[2]);
    let data = core.data();
    let mut out = vec![T::zero(); samples.len() * dr];
    out.par_chunks_mut(CHUNK * dr).enumerate().for_each(|(c, chunk)| {
        for (i, row) in chunk.chunks_mut(dr).enumerate() {
            let j = c * CHUNK + i;
            let base = samples.symbol(j, site) * dl * dr;
            for (b, &lv) in prev[j * dl..(j + 1) * dl].iter().enumerate() {
                if lv == T::zero() {
                    continue;
                }
                let x = &data[base + b * dr..base + (b + 1) * dr];
                for (o, &xv) in row.iter_mut().zip(x) {
                    *o += lv * xv;
                }
            }
        }
    });
    out
}

/// `R_k[j] = X^{a^j_k} · R_{k+1}[j]` for every sample.
pub(crate) fn right_overlap_step<T: Real>(
    next: &[T],
    core: &DenseTensor<T>,
    samples: &OneHotSamples<T>,
    site: usize,
) -> Vec<T> {
    let (dl, dr) = (core.shape()[1], core.shape()[2]);
    let data = core.data();
    let mut out = vec![T::zero(); samples.len() * dl];
    out.par_chunks_mut(CHUNK * dl).enumerate().for_each(|(c, chunk)| {
        for (i, row) in chunk.chunks_mut(dl).enumerate() {
            let j = c * CHUNK + i;
            let base = samples.symbol(j, site) * dl * dr;
            let r = &next[j * dr..(j + 1) * dr];
            for (b, o) in row.iter_mut().enumerate() {
                let x = &data[base + b * dr..base + (b + 1) * dr];
                *o = x.iter().zip(r).fold(T::zero(), |acc, (&xv, &rv)| acc + xv * rv);
            }
        }
    });
    out
}

impl<T: Real> EnvCache<T> {
    /// Boundary environments, then every left environment for bonds
    /// `1..L` followed by every right environment for bonds `L-1..1`.
    pub fn new(
        tt: &TtDistribution<T>,
        samples: &OneHotSamples<T>,
        storage: EnvStorage,
    ) -> Result<Self> {
        let sites = tt.sites();
        if samples.sites() != sites {
            return Err(Error::Dimension(format!(
                "samples have {} sites, train has {sites}",
                samples.sites()
            )));
        }
        let n = samples.len();
        let unit = DMatrix::from_element(1, 1, T::one());
        let mut cache = Self {
            sites,
            samples: n,
            stride: storage.stride(sites),
            left_gram: vec![None; sites + 1],
            right_gram: vec![None; sites + 1],
            left_overlap: vec![None; sites + 1],
            right_overlap: vec![None; sites + 1],
        };
        cache.left_gram[0] = Some(unit.clone());
        cache.right_gram[sites] = Some(unit);
        cache.left_overlap[0] = Some(vec![T::one(); n]);
        cache.right_overlap[sites] = Some(vec![T::one(); n]);
        for k in 0..sites.saturating_sub(1) {
            cache.refresh_left(tt, samples, k)?;
        }
        for k in (1..sites).rev() {
            cache.refresh_right(tt, samples, k)?;
        }
        Ok(cache)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    fn is_anchor(&self, bond: usize) -> bool {
        bond.is_multiple_of(self.stride) || bond == self.sites
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.sites {
            return Err(Error::Range { index: site, valid: format!("0..{}", self.sites) });
        }
        Ok(())
    }

    fn check_samples(&self, samples: &OneHotSamples<T>) -> Result<()> {
        if samples.len() != self.samples || samples.sites() != self.sites {
            return Err(Error::Dimension("sample set differs from the cached one".into()));
        }
        Ok(())
    }

    pub fn left_gram(&self, bond: usize) -> Option<&DMatrix<T>> {
        self.left_gram.get(bond)?.as_ref()
    }

    pub fn right_gram(&self, bond: usize) -> Option<&DMatrix<T>> {
        self.right_gram.get(bond)?.as_ref()
    }

    pub fn left_overlap(&self, bond: usize) -> Option<&[T]> {
        self.left_overlap.get(bond)?.as_deref()
    }

    pub fn right_overlap(&self, bond: usize) -> Option<&[T]> {
        self.right_overlap.get(bond)?.as_deref()
    }

    /// Number of per-sample overlap blocks currently held.
    pub fn stored_overlap_blocks(&self) -> usize {
        self.left_overlap.iter().chain(&self.right_overlap).filter(|o| o.is_some()).count()
    }

    fn ensure_left(&mut self, tt: &TtDistribution<T>, samples: &OneHotSamples<T>, bond: usize) {
        if self.left_gram[bond].is_none() {
            let mut a = bond;
            while self.left_gram[a].is_none() {
                a -= 1;
            }
            for b in a..bond {
                let g = left_gram_step(self.left_gram[b].as_ref().unwrap(), tt.core(b));
                self.left_gram[b + 1] = Some(g);
            }
        }
        if self.left_overlap[bond].is_none() {
            let mut a = bond;
            while self.left_overlap[a].is_none() {
                a -= 1;
            }
            for b in a..bond {
                let o = left_overlap_step(
                    self.left_overlap[b].as_ref().unwrap(),
                    tt.core(b),
                    samples,
                    b,
                );
                self.left_overlap[b + 1] = Some(o);
            }
            self.evict_left(a + 1..=bond);
        }
    }

    fn ensure_right(&mut self, tt: &TtDistribution<T>, samples: &OneHotSamples<T>, bond: usize) {
        if self.right_gram[bond].is_none() {
            let mut a = bond;
            while self.right_gram[a].is_none() {
                a += 1;
            }
            for b in (bond..a).rev() {
                let g = right_gram_step(self.right_gram[b + 1].as_ref().unwrap(), tt.core(b));
                self.right_gram[b] = Some(g);
            }
        }
        if self.right_overlap[bond].is_none() {
            let mut a = bond;
            while self.right_overlap[a].is_none() {
                a += 1;
            }
            for b in (bond..a).rev() {
                let o = right_overlap_step(
                    self.right_overlap[b + 1].as_ref().unwrap(),
                    tt.core(b),
                    samples,
                    b,
                );
                self.right_overlap[b] = Some(o);
            }
            self.evict_right(bond..=a);
        }
    }

    fn evict_left(&mut self, keep: std::ops::RangeInclusive<usize>) {
        for b in 1..self.sites {
            if !keep.contains(&b) && !self.is_anchor(b) {
                self.left_overlap[b] = None;
            }
        }
    }

    fn evict_right(&mut self, keep: std::ops::RangeInclusive<usize>) {
        for b in 1..self.sites {
            if !keep.contains(&b) && !self.is_anchor(b) {
                self.right_overlap[b] = None;
            }
        }
    }

    /// Recomputes the left environments at bond `site + 1` from bond `site`
    /// and the current core `site`.
    pub fn refresh_left(
        &mut self,
        tt: &TtDistribution<T>,
        samples: &OneHotSamples<T>,
        site: usize,
    ) -> Result<()> {
        self.check_site(site)?;
        self.check_samples(samples)?;
        self.ensure_left(tt, samples, site);
        let core = tt.core(site);
        let g = left_gram_step(self.left_gram[site].as_ref().unwrap(), core);
        let o = left_overlap_step(self.left_overlap[site].as_ref().unwrap(), core, samples, site);
        self.left_gram[site + 1] = Some(g);
        self.left_overlap[site + 1] = Some(o);
        self.evict_left(site + 1..=site + 1);
        Ok(())
    }

    /// Recomputes the right environments at bond `site` from bond `site + 1`
    /// and the current core `site`.
    pub fn refresh_right(
        &mut self,
        tt: &TtDistribution<T>,
        samples: &OneHotSamples<T>,
        site: usize,
    ) -> Result<()> {
        self.check_site(site)?;
        self.check_samples(samples)?;
        self.ensure_right(tt, samples, site + 1);
        let core = tt.core(site);
        let g = right_gram_step(self.right_gram[site + 1].as_ref().unwrap(), core);
        let o =
            right_overlap_step(self.right_overlap[site + 1].as_ref().unwrap(), core, samples, site);
        self.right_gram[site] = Some(g);
        self.right_overlap[site] = Some(o);
        self.evict_right(site..=site);
        Ok(())
    }

    /// Drops every entry that depends on core `site`.
    pub fn invalidate_site(&mut self, site: usize) {
        for b in site + 1..=self.sites {
            self.left_gram[b] = None;
            self.left_overlap[b] = None;
        }
        for b in 0..=site.min(self.sites - 1) {
            self.right_gram[b] = None;
            self.right_overlap[b] = None;
        }
    }

    /// Environments needed to update core `site`: left at bond `site`,
    /// right at bond `site + 1`.
    pub(crate) fn environments(
        &mut self,
        tt: &TtDistribution<T>,
        samples: &OneHotSamples<T>,
        site: usize,
    ) -> Result<SiteEnvironments<'_, T>> {
        self.check_site(site)?;
        self.check_samples(samples)?;
        self.ensure_left(tt, samples, site);
        self.ensure_right(tt, samples, site + 1);
        Ok(SiteEnvironments {
            left_gram: self.left_gram[site].as_ref().unwrap(),
            right_gram: self.right_gram[site + 1].as_ref().unwrap(),
            left_overlap: self.left_overlap[site].as_ref().unwrap(),
            right_overlap: self.right_overlap[site + 1].as_ref().unwrap(),
        })
    }

    /// Shifted loss `⟨P,P⟩ − 2⟨P,P_s⟩` evaluated at `bond`.
    pub fn loss_at(
        &mut self,
        tt: &TtDistribution<T>,
        samples: &OneHotSamples<T>,
        bond: usize,
    ) -> Result<T> {
        if bond > self.sites {
            return Err(Error::Range { index: bond, valid: format!("0..={}", self.sites) });
        }
        self.check_samples(samples)?;
        self.ensure_left(tt, samples, bond);
        self.ensure_right(tt, samples, bond);
        let gl = self.left_gram[bond].as_ref().unwrap();
        let gr = self.right_gram[bond].as_ref().unwrap();
        let norm = gl.component_mul(gr).sum();
        let overlap = sample_overlap(
            self.left_overlap[bond].as_ref().unwrap(),
            self.right_overlap[bond].as_ref().unwrap(),
            samples.weights(),
        );
        Ok(norm - overlap * T::lit(2.0))
    }
}

pub(crate) struct SiteEnvironments<'a, T: Real> {
    pub left_gram: &'a DMatrix<T>,
    pub right_gram: &'a DMatrix<T>,
    pub left_overlap: &'a [T],
    pub right_overlap: &'a [T],
}

/// `Σ_j w_j L[j]·R[j]` with chunked, order-fixed reduction.
pub(crate) fn sample_overlap<T: Real>(left: &[T], right: &[T], weights: &[T]) -> T {
    let n = weights.len();
    let d = left.len() / n.max(1);
    let partials: Vec<T> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = T::zero();
            for j in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let l = &left[j * d..(j + 1) * d];
                let r = &right[j * d..(j + 1) * d];
                let dot = l.iter().zip(r).fold(T::zero(), |a, (&x, &y)| a + x * y);
                acc += weights[j] * dot;
            }
            acc
        })
        .collect();
    partials.into_iter().fold(T::zero(), |a, b| a + b)
}
