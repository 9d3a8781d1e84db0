//! The single-core subproblem.
//!
//! With every core but `k` fixed, the shifted loss is a quadratic in the
//! entries of `X^{s}` for each `s`:
//!
//! `Σ_s ⟨X^s, G< X^s G>ᵀ⟩ − 2⟨X^s, N^s⟩`,
//!
//! where `N^s_{b,b'} = Σ_j (n_j/N) [a^j_k = s] L_k[j]_b R_{k+1}[j]_{b'}`.
//! The multiplicative update `X ← X ∘ N / (G< X G>ᵀ + ε)` keeps `X`
//! nonnegative and does not increase this quadratic.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::env::{block, EnvCache, CHUNK};
use super::onehot::OneHotSamples;
use crate::error::Result;
use crate::povm::OUTCOMES;
use crate::scalar::Real;
use crate::tensor::{hadamard_div, DenseTensor};
use crate::tt::TtDistribution;

#[derive(Clone, Debug)]
pub struct LocalProblem<T: Real> {
    site: usize,
    left_gram: DMatrix<T>,
    right_gram: DMatrix<T>,
    numerator: DenseTensor<T>,
}

impl<T: Real> LocalProblem<T> {
    pub fn assemble(
        tt: &TtDistribution<T>,
        cache: &mut EnvCache<T>,
        samples: &OneHotSamples<T>,
        site: usize,
    ) -> Result<Self> {
        let env = cache.environments(tt, samples, site)?;
        let (dl, dr) = (env.left_gram.nrows(), env.right_gram.nrows());
        let n = samples.len();
        let weights = samples.weights();
        let partials: Vec<Vec<T>> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![T::zero(); OUTCOMES * dl * dr];
                #[allow(clippy::needless_range_loop)]
                for j in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let base = samples.symbol(j, site) * dl * dr;
                    let r = &env.right_overlap[j * dr..(j + 1) * dr];
                    for (b, &lv) in env.left_overlap[j * dl..(j + 1) * dl].iter().enumerate() {
                        let lw = weights[j] * lv;
                        if lw == T::zero() {
                            continue;
                        }
                        let row = &mut acc[base + b * dr..base + (b + 1) * dr];
                        for (a, &rv) in row.iter_mut().zip(r) {
                            *a += lw * rv;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut numer = vec![T::zero(); OUTCOMES * dl * dr];
        for p in partials {
            for (a, b) in numer.iter_mut().zip(p) {
                *a += b;
            }
        }
        Ok(Self {
            site,
            left_gram: env.left_gram.clone(),
            right_gram: env.right_gram.clone(),
            numerator: DenseTensor::new(vec![OUTCOMES, dl, dr], numer)?,
        })
    }

    pub fn site(&self) -> usize {
        self.site
    }

    pub fn left_gram(&self) -> &DMatrix<T> {
        &self.left_gram
    }

    pub fn right_gram(&self) -> &DMatrix<T> {
        &self.right_gram
    }

    /// `Σ_j (n_j/N) Σ A^{s}_j L_k[j] R_{k+1}[j]`, shaped `[4, D_k, D_{k+1}]`.
    pub fn numerator(&self) -> &DenseTensor<T> {
        &self.numerator
    }

    /// `G< X^s G>ᵀ` for every `s`.
    pub fn denominator(&self, core: &DenseTensor<T>) -> DenseTensor<T> {
        let (dl, dr) = (core.shape()[1], core.shape()[2]);
        let mut out = Vec::with_capacity(OUTCOMES * dl * dr);
        let gr_t = self.right_gram.transpose();
        for s in 0..OUTCOMES {
            let m = &self.left_gram * block(core, s) * &gr_t;
            for b in 0..dl {
                for bp in 0..dr {
                    out.push(m[(b, bp)]);
                }
            }
        }
        DenseTensor::new(vec![OUTCOMES, dl, dr], out).expect("matching shape")
    }

    /// Shifted loss of the full train with `core` placed at this site.
    pub fn loss(&self, core: &DenseTensor<T>) -> T {
        let den = self.denominator(core);
        let two = T::lit(2.0);
        core.data()
            .iter()
            .zip(den.data())
            .zip(self.numerator.data())
            .fold(T::zero(), |acc, ((&x, &d), &n)| acc + x * (d - two * n))
    }

    pub fn multiplicative_step(&self, core: &DenseTensor<T>, eps: T) -> Result<DenseTensor<T>> {
        let ratio = hadamard_div(&self.numerator, &self.denominator(core), eps)?;
        core.hadamard(&ratio)
    }
}

/// One multiplicative update of core `site`; the train itself is not modified.
pub fn update_core<T: Real>(
    tt: &TtDistribution<T>,
    cache: &mut EnvCache<T>,
    samples: &OneHotSamples<T>,
    site: usize,
    eps: T,
) -> Result<DenseTensor<T>> {
    LocalProblem::assemble(tt, cache, samples, site)?.multiplicative_step(tt.core(site), eps)
}

/// Shifted loss `⟨P,P⟩ − 2⟨P,P_s⟩` from scratch, by running the Gram chain and
/// the per-sample chain across the whole train.
pub fn loss<T: Real>(tt: &TtDistribution<T>, samples: &OneHotSamples<T>) -> T {
    let mut gram = DMatrix::from_element(1, 1, T::one());
    let mut over = vec![T::one(); samples.len()];
    for k in 0..tt.sites() {
        gram = super::env::left_gram_step(&gram, tt.core(k));
        over = super::env::left_overlap_step(&over, tt.core(k), samples, k);
    }
    let ones = vec![T::one(); samples.len()];
    gram[(0, 0)] - T::lit(2.0) * super::env::sample_overlap(&over, &ones, samples.weights())
}
