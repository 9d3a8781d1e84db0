//! Synthetic targets: XXZ-chain ground states, depolarizing noise, their
//! operator (MPO) form and exact POVM outcome distribution.
//!
//! Qubit ordering: site 0 is the most significant digit of every basis index,
//! base 2 for Hilbert space indices and base 4 for outcome strings.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::povm::{Povm, OUTCOMES};
use crate::scalar::{cr, Complex, Real, C};
use crate::tensor::DenseTensor;

/// Largest chain for which a dense Hamiltonian is built.
pub const MAX_DENSE_HAMILTONIAN_SITES: usize = 14;
/// Largest chain for which 4^L distributions or 2^L×2^L densities are materialized.
pub const MAX_DENSE_SITES: usize = 10;
pub const DEFAULT_GAP_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct XxzParams<T> {
    pub sites: usize,
    /// Tunneling strength J.
    pub coupling: T,
    /// Interaction strength γ of the σzσz term.
    pub anisotropy: T,
    /// Magnetization strength h.
    pub field: T,
    /// Depolarizing strength p.
    pub noise: T,
}

impl<T: Real> XxzParams<T> {
    pub fn new(sites: usize, coupling: T, anisotropy: T, field: T, noise: T) -> Result<Self> {
        let params = Self { sites, coupling, anisotropy, field, noise };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::Validation(format!("need at least 2 sites, got {}", self.sites)));
        }
        check_noise(self.noise)
    }
}

fn check_noise<T: Real>(p: T) -> Result<()> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::Validation(format!("noise strength {p} outside [0, 1]")));
    }
    Ok(())
}

fn dense_guard(sites: usize, max: usize, what: &str) -> Result<()> {
    if sites > max {
        return Err(Error::Capacity(format!(
            "{what} is limited to {max} sites, requested {sites}; use at most {max} sites"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseDensity<T: Real> {
    sites: usize,
    matrix: DMatrix<C<T>>,
}

impl<T: Real> DenseDensity<T> {
    pub fn new(sites: usize, matrix: DMatrix<C<T>>) -> Result<Self> {
        let dim = 1usize << sites;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Dimension(format!(
                "{sites} qubits need a {dim}×{dim} matrix, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { sites, matrix })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C<T>> {
        self.matrix
    }

    pub fn trace(&self) -> C<T> {
        self.matrix.trace()
    }

    pub fn maximally_mixed(sites: usize) -> Self {
        let dim = 1usize << sites;
        let m = DMatrix::identity(dim, dim) * cr(T::one() / T::count(dim));
        Self { sites, matrix: m }
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<T> {
        let h = (&self.matrix + self.matrix.adjoint()) * cr(T::lit(0.5));
        let mut ev: Vec<T> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        ev
    }
}

/// Matrix product operator with cores `W[σ, σ', b, b']`.
#[derive(Clone, Debug, PartialEq)]
pub struct MpoDensity<T: Real> {
    cores: Vec<DenseTensor<C<T>>>,
}

impl<T: Real> MpoDensity<T> {
    pub fn new(cores: Vec<DenseTensor<C<T>>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Validation("MPO needs at least one site".into()));
        }
        let mut left = 1;
        for (k, c) in cores.iter().enumerate() {
            let sh = c.shape();
            if sh.len() != 4 || sh[0] != 2 || sh[1] != 2 {
                return Err(Error::Dimension(format!("MPO core {k} has shape {sh:?}")));
            }
            if sh[2] != left {
                return Err(Error::Dimension(format!(
                    "MPO core {k} left bond {} does not match {left}",
                    sh[2]
                )));
            }
            left = sh[3];
        }
        if left != 1 {
            return Err(Error::Dimension(format!("MPO right boundary bond is {left}")));
        }
        Ok(Self { cores })
    }

    pub fn sites(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[DenseTensor<C<T>>] {
        &self.cores
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        let mut out = vec![1];
        out.extend(self.cores.iter().map(|c| c.shape()[3]));
        out
    }

    /// Densifies by contracting the bond chain.
    pub fn to_dense(&self) -> Result<DenseDensity<T>> {
        mpo_to_dense(self)
    }
}

/// Exact outcome distribution over all 4^L strings, indexed with site 0 as
/// the most significant base-4 digit.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseDistribution<T> {
    sites: usize,
    probs: Vec<T>,
}

impl<T: Real> DenseDistribution<T> {
    pub fn new(sites: usize, probs: Vec<T>) -> Result<Self> {
        if probs.len() != OUTCOMES.pow(sites as u32) {
            return Err(Error::Dimension(format!(
                "{sites} sites need {} probabilities, got {}",
                OUTCOMES.pow(sites as u32),
                probs.len()
            )));
        }
        Ok(Self { sites, probs })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn probability(&self, outcome: &[u8]) -> T {
        self.probs[outcome_index(outcome)]
    }
}

pub fn outcome_index(outcome: &[u8]) -> usize {
    outcome.iter().fold(0, |acc, &a| acc * OUTCOMES + a as usize)
}

pub fn outcome_string(mut index: usize, sites: usize) -> Vec<u8> {
    let mut out = vec![0u8; sites];
    for slot in out.iter_mut().rev() {
        *slot = (index % OUTCOMES) as u8;
        index /= OUTCOMES;
    }
    out
}

/// Open-boundary XXZ chain
/// `Σ_l J(σx σx + σy σy + γ σz σz)_{l,l+1} + h Σ_l σz_l`.
pub fn xxz_hamiltonian<T: Real>(params: &XxzParams<T>) -> Result<DMatrix<C<T>>> {
    params.validate()?;
    let l = params.sites;
    dense_guard(l, MAX_DENSE_HAMILTONIAN_SITES, "dense Hamiltonian")?;
    let dim = 1usize << l;
    let bit = |x: usize, site: usize| (x >> (l - 1 - site)) & 1;
    let z = |b: usize| if b == 0 { T::one() } else { -T::one() };
    let two = T::lit(2.0);
    let mut h = DMatrix::<C<T>>::zeros(dim, dim);
    for x in 0..dim {
        let mut diag = T::zero();
        for site in 0..l {
            diag += params.field * z(bit(x, site));
        }
        for site in 0..l - 1 {
            let (b0, b1) = (bit(x, site), bit(x, site + 1));
            diag += params.coupling * params.anisotropy * z(b0) * z(b1);
            if b0 != b1 {
                // σxσx + σyσy maps |01⟩ ↔ |10⟩ with amplitude 2.
                let mask = (1 << (l - 1 - site)) | (1 << (l - 2 - site));
                h[(x ^ mask, x)] += cr(params.coupling * two);
            }
        }
        h[(x, x)] += cr(diag);
    }
    Ok(h)
}

pub fn ground_state_density<T: Real>(params: &XxzParams<T>) -> Result<DenseDensity<T>> {
    ground_state_density_with_gap(params, T::lit(DEFAULT_GAP_THRESHOLD))
}

/// Projector onto the lowest eigenvector; the vector's phase is fixed so that
/// its largest-magnitude amplitude is real and positive.
pub fn ground_state_density_with_gap<T: Real>(
    params: &XxzParams<T>,
    gap_threshold: T,
) -> Result<DenseDensity<T>> {
    let h = xxz_hamiltonian(params)?;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite spectrum")
    });
    let gap = eig.eigenvalues[order[1]] - eig.eigenvalues[order[0]];
    if gap <= gap_threshold {
        return Err(Error::DegenerateGround {
            gap: gap.as_f64(),
            threshold: gap_threshold.as_f64(),
        });
    }
    let mut v = eig.eigenvectors.column(order[0]).into_owned();
    let (mut best, mut best_mag) = (0, T::zero());
    for (i, a) in v.iter().enumerate() {
        if a.modulus() > best_mag {
            best = i;
            best_mag = a.modulus();
        }
    }
    let phase = v[best].conj() / cr(best_mag);
    v *= phase;
    v /= cr(v.norm());
    let rho = &v * v.adjoint();
    DenseDensity::new(params.sites, rho)
}

/// `p·I/d + (1−p)·ρ`.
pub fn depolarize<T: Real>(rho: &DenseDensity<T>, p: T) -> Result<DenseDensity<T>> {
    check_noise(p)?;
    let dim = rho.dim();
    let mixed = DMatrix::<C<T>>::identity(dim, dim) * cr(p / T::count(dim));
    Ok(DenseDensity { sites: rho.sites, matrix: mixed + &rho.matrix * cr(T::one() - p) })
}

/// Depolarized XXZ ground state for `params`.
pub fn target_density<T: Real>(params: &XxzParams<T>) -> Result<DenseDensity<T>> {
    depolarize(&ground_state_density(params)?, params.noise)
}

/// Regroups `ρ[(σ_1..σ_L), (σ'_1..σ'_L)]` into a vector over site pairs
/// `(2σ_l + σ'_l)`, site 0 most significant.
fn pair_vector<T: Real>(rho: &DenseDensity<T>) -> Vec<C<T>> {
    let l = rho.sites;
    let dim = rho.dim();
    let mut out = vec![cr(T::zero()); dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            let mut idx = 0;
            for site in 0..l {
                let s = (r >> (l - 1 - site)) & 1;
                let sp = (c >> (l - 1 - site)) & 1;
                idx = idx * 4 + 2 * s + sp;
            }
            out[idx] = rho.matrix[(r, c)];
        }
    }
    out
}

/// Orthonormal Hermitian operator basis `{I, X, Y, Z}/√2`, entries `[μ][σ][σ']`.
fn pauli_basis<T: Real>() -> [[[C<T>; 2]; 2]; 4] {
    let h = T::one() / T::lit(2.0).sqrt();
    let (z, o, i) = (C::new(T::zero(), T::zero()), C::new(h, T::zero()), C::new(T::zero(), h));
    [[[o, z], [z, o]], [[z, o], [o, z]], [[z, -i], [i, z]], [[o, z], [z, -o]]]
}

/// Sequential SVD factorization carried out on the real coefficients of ρ in
/// the orthonormal Pauli basis, so that every core slice `W[·, ·, b, b']` is
/// a Hermitian 2×2 operator. At each cut the smallest singular values are
/// discarded while their squared sum (a squared Frobenius norm) stays within
/// `tol`.
pub fn density_to_mpo<T: Real>(rho: &DenseDensity<T>, tol: T) -> Result<MpoDensity<T>> {
    let l = rho.sites;
    dense_guard(l, MAX_DENSE_SITES, "operator factorization")?;
    let m = &rho.matrix;
    let scale = m.norm().max(T::one());
    if (m - m.adjoint()).norm() > T::lit(1e-10) * scale {
        return Err(Error::Validation("operator factorization needs a Hermitian matrix".into()));
    }
    let basis = pauli_basis::<T>();
    // Coefficients tr(B_μ ρ), site by site on the pair-indexed vector.
    let mut v = pair_vector(rho);
    for site in 0..l {
        let inner = 4usize.pow((l - 1 - site) as u32);
        let outer = v.len() / (4 * inner);
        let mut next = vec![cr(T::zero()); v.len()];
        for a in 0..outer {
            for c in 0..inner {
                for (mu, b) in basis.iter().enumerate() {
                    let mut acc = cr(T::zero());
                    for q in 0..4 {
                        acc += b[q & 1][q >> 1] * v[(a * 4 + q) * inner + c];
                    }
                    next[(a * 4 + mu) * inner + c] = acc;
                }
            }
        }
        v = next;
    }
    let mut rest: Vec<T> = v.into_iter().map(|z| z.re).collect();
    let to_operator = |coef: &dyn Fn(usize, usize, usize) -> T, left: usize, right: usize| {
        DenseTensor::from_fn(vec![2, 2, left, right], |i| {
            let mut acc = cr(T::zero());
            for (mu, b) in basis.iter().enumerate() {
                acc += b[i[0]][i[1]] * cr(coef(mu, i[2], i[3]));
            }
            acc
        })
    };
    let mut left = 1usize;
    let mut cores = Vec::with_capacity(l);
    for site in 0..l {
        let cols = rest.len() / (left * 4);
        if site == l - 1 {
            debug_assert_eq!(cols, 1);
            cores.push(to_operator(&|mu, b, _| rest[b * 4 + mu], left, 1));
            break;
        }
        let mat = DMatrix::from_row_slice(left * 4, cols, &rest);
        let svd = mat.svd(true, true);
        let u = svd.u.expect("left vectors");
        let vt = svd.v_t.expect("right vectors");
        let sv = &svd.singular_values;
        let mut idx: Vec<usize> = (0..sv.len()).collect();
        idx.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).expect("finite"));
        let mut keep = idx.len();
        let mut discarded = T::zero();
        while keep > 1 {
            let s = sv[idx[keep - 1]];
            if discarded + s * s > tol {
                break;
            }
            discarded += s * s;
            keep -= 1;
        }
        let kept = &idx[..keep];
        cores.push(to_operator(&|mu, b, k| u[(b * 4 + mu, kept[k])], left, keep));
        let mut next = Vec::with_capacity(keep * cols);
        for &k in kept {
            for c in 0..cols {
                next.push(sv[k] * vt[(k, c)]);
            }
        }
        rest = next;
        left = keep;
    }
    MpoDensity::new(cores)
}

pub fn mpo_to_dense<T: Real>(mpo: &MpoDensity<T>) -> Result<DenseDensity<T>> {
    let l = mpo.sites();
    dense_guard(l, MAX_DENSE_SITES, "dense density matrix")?;
    // acc[(r, c, b)] over row index r, column index c and open bond b.
    let mut acc = vec![cr(T::one())];
    let (mut rows, mut bond) = (1usize, 1usize);
    for w in mpo.cores() {
        let next_bond = w.shape()[3];
        let nrows = rows * 2;
        let mut next = vec![cr(T::zero()); nrows * nrows * next_bond];
        for r in 0..rows {
            for c in 0..rows {
                for b in 0..bond {
                    let a = acc[(r * rows + c) * bond + b];
                    if a == cr(T::zero()) {
                        continue;
                    }
                    for s in 0..2 {
                        for sp in 0..2 {
                            let (rr, cc) = (2 * r + s, 2 * c + sp);
                            for bb in 0..next_bond {
                                next[(rr * nrows + cc) * next_bond + bb] +=
                                    a * w.get(&[s, sp, b, bb]);
                            }
                        }
                    }
                }
            }
        }
        acc = next;
        rows = nrows;
        bond = next_bond;
    }
    DenseDensity::new(l, DMatrix::from_row_slice(rows, rows, &acc))
}

/// `P(a) = tr(M^{⊗a} ρ)` for every outcome string.
pub fn exact_outcome_distribution<T: Real>(
    rho: &DenseDensity<T>,
    povm: &Povm<T>,
) -> Result<DenseDistribution<T>> {
    let l = rho.sites;
    dense_guard(l, MAX_DENSE_SITES, "dense outcome distribution")?;
    let mut v = pair_vector(rho);
    let flat = povm.flat();
    for site in 0..l {
        let inner = 4usize.pow((l - 1 - site) as u32);
        let outer = v.len() / (4 * inner);
        let mut next = vec![cr(T::zero()); v.len()];
        for a in 0..outer {
            for c in 0..inner {
                for s in 0..4 {
                    let mut acc = cr(T::zero());
                    for q in 0..4 {
                        acc += flat[(s, q)] * v[(a * 4 + q) * inner + c];
                    }
                    next[(a * 4 + s) * inner + c] = acc;
                }
            }
        }
        v = next;
    }
    DenseDistribution::new(l, v.into_iter().map(|z: Complex<T>| z.re).collect())
}
