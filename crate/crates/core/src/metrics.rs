//! Quantum and classical fidelities.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sampling::SampleSet;
use crate::scalar::{cr, Real, C};
use crate::states::{outcome_string, DenseDensity, DenseDistribution};
use crate::tt::TtDistribution;

const TRACE_TOL: f64 = 1e-6;
const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FidelityResult {
    pub fidelity: f64,
    pub infidelity: f64,
    /// Magnitude of the negative spectrum (quantum) or negative probability
    /// mass (classical) set to zero before taking square roots.
    pub clipped_mass: f64,
    /// Standard error of a sampled estimate; `None` for exact evaluations.
    pub std_error: Option<f64>,
}

impl FidelityResult {
    fn new(fidelity: f64, clipped_mass: f64, std_error: Option<f64>) -> Self {
        Self { fidelity, infidelity: 1.0 - fidelity, clipped_mass, std_error }
    }
}

/// Anything that assigns a probability to an outcome string.
pub trait ProbabilityModel<T>: Sync {
    fn sites(&self) -> usize;
    fn probability(&self, outcome: &[u8]) -> T;
}

impl<T: Real> ProbabilityModel<T> for TtDistribution<T> {
    fn sites(&self) -> usize {
        TtDistribution::sites(self)
    }

    fn probability(&self, outcome: &[u8]) -> T {
        TtDistribution::probability(self, outcome)
    }
}

impl<T: Real> ProbabilityModel<T> for DenseDistribution<T> {
    fn sites(&self) -> usize {
        DenseDistribution::sites(self)
    }

    fn probability(&self, outcome: &[u8]) -> T {
        DenseDistribution::probability(self, outcome)
    }
}

/// Eigendecomposition of the Hermitian part with the negative spectrum cut
/// off. Returns `(V, max(λ, 0), Σ max(−λ, 0))`.
fn clipped_eigen<T: Real>(m: &DMatrix<C<T>>) -> (DMatrix<C<T>>, Vec<T>, T) {
    let h = (m + m.adjoint()) * cr(T::lit(0.5));
    let eig = h.symmetric_eigen();
    let mut clipped = T::zero();
    let vals = eig
        .eigenvalues
        .iter()
        .map(|&l| {
            if l < T::zero() {
                clipped -= l;
                T::zero()
            } else {
                l
            }
        })
        .collect();
    (eig.eigenvectors, vals, clipped)
}

fn from_spectrum<T: Real>(v: &DMatrix<C<T>>, vals: &[T], f: impl Fn(T) -> T) -> DMatrix<C<T>> {
    let mut scaled = v.clone();
    for (mut col, &l) in scaled.column_iter_mut().zip(vals) {
        col *= cr(f(l));
    }
    scaled * v.adjoint()
}

/// `F_q = (tr √(√ρ₁ ρ₂ √ρ₁))²`.
///
/// Both inputs are replaced by the positive part of their Hermitian part
/// before the square roots; the discarded negative eigenvalue mass of the
/// two inputs is reported as `clipped_mass`. The result is not truncated
/// to `[0, 1]`.
pub fn quantum_fidelity<T: Real>(
    rho1: &DenseDensity<T>,
    rho2: &DenseDensity<T>,
) -> Result<FidelityResult> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::Validation(format!(
            "density matrices of dimension {} and {} cannot be compared",
            rho1.dim(),
            rho2.dim()
        )));
    }
    for (name, rho) in [("first", rho1), ("second", rho2)] {
        let tr = rho.trace();
        let dev = nalgebra::ComplexField::modulus(tr - cr(T::one())).as_f64();
        if !(dev <= TRACE_TOL) {
            return Err(Error::Validation(format!("{name} density has trace {tr}")));
        }
    }
    let (v1, l1, c1) = clipped_eigen(rho1.matrix());
    let (v2, l2, c2) = clipped_eigen(rho2.matrix());
    let sqrt1 = from_spectrum(&v1, &l1, |l| l.sqrt());
    let pos2 = from_spectrum(&v2, &l2, |l| l);
    let inner = &sqrt1 * pos2 * &sqrt1;
    let (_, mu, _) = clipped_eigen(&inner);
    // Square roots magnify round-off eigenvalues of low-rank products.
    let top = mu.iter().fold(T::zero(), |m, &x| m.max(x));
    let floor = top * T::default_epsilon() * T::count(mu.len());
    let root = mu.iter().filter(|&&m| m > floor).fold(T::zero(), |acc, &m| acc + m.sqrt());
    Ok(FidelityResult::new((root * root).as_f64(), (c1 + c2).as_f64(), None))
}

/// Test-set estimate `Σ_j (n_j/N) √(P_m(a^j) / P_i(a^j))` of the classical
/// fidelity. Negative model values (possible for signed trains) count as 0
/// and their magnitude is reported as clipped mass.
pub fn classical_fidelity<T: Real, M, I>(model: &M, ideal: &I, test: &SampleSet) -> Result<FidelityResult>
where
    M: ProbabilityModel<T> + ?Sized,
    I: ProbabilityModel<T> + ?Sized,
{
    if model.sites() != test.sites() || ideal.sites() != test.sites() {
        return Err(Error::Validation(format!(
            "model has {} sites, ideal {}, test set {}",
            model.sites(),
            ideal.sites(),
            test.sites()
        )));
    }
    if test.total() == 0 {
        return Err(Error::Validation("test set is empty".into()));
    }
    let entries = test.entries();
    let n = test.total() as f64;
    // Per chunk: (Σ n x, Σ n x², Σ n |neg|), combined in chunk order.
    let partials: Vec<Result<(f64, f64, f64)>> = entries
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = (0.0, 0.0, 0.0);
            for e in chunk {
                let pi = ideal.probability(&e.outcome).as_f64();
                if !(pi > 0.0) {
                    return Err(Error::Integrity(format!(
                        "test outcome {:?} has ideal probability {pi}",
                        e.outcome
                    )));
                }
                let pm = model.probability(&e.outcome).as_f64();
                let c = e.count as f64;
                let x = (pm.max(0.0) / pi).sqrt();
                acc.0 += c * x;
                acc.1 += c * x * x;
                acc.2 += c * (-pm).max(0.0);
            }
            Ok(acc)
        })
        .collect();
    let (mut s1, mut s2, mut neg) = (0.0, 0.0, 0.0);
    for p in partials {
        let (a, b, c) = p?;
        s1 += a;
        s2 += b;
        neg += c;
    }
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0);
    let se = if n > 1.0 { (var / (n - 1.0)).sqrt() } else { f64::NAN };
    Ok(FidelityResult::new(mean, neg / n, Some(se)))
}

/// Dense Bhattacharyya coefficient `Σ_a √(P(a) Q(a))`, negative entries as 0.
pub fn bhattacharyya<T: Real>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::Validation(format!("lengths {} and {} differ", p.len(), q.len())));
    }
    Ok(p.iter()
        .zip(q)
        .fold(T::zero(), |acc, (&a, &b)| acc + (a.max(T::zero()) * b.max(T::zero())).sqrt()))
}

/// Classical fidelity with the expectation over `P_i` taken by full
/// enumeration instead of a test set.
pub fn classical_fidelity_exact<T: Real, M>(model: &M, ideal: &DenseDistribution<T>) -> Result<FidelityResult>
where
    M: ProbabilityModel<T> + ?Sized,
{
    let l = ideal.sites();
    if model.sites() != l {
        return Err(Error::Validation(format!("model has {} sites, ideal {l}", model.sites())));
    }
    let pm: Vec<T> =
        (0..ideal.probs().len()).map(|i| model.probability(&outcome_string(i, l))).collect();
    let neg = pm.iter().fold(0.0, |acc, &x| acc + (-x.as_f64()).max(0.0));
    let f = bhattacharyya(&pm, ideal.probs())?;
    Ok(FidelityResult::new(f.as_f64(), neg, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Complex;
    use nalgebra::DVector;

    fn pure(v: &[Complex<f64>]) -> DenseDensity<f64> {
        let psi = DVector::from_column_slice(v).normalize();
        let sites = v.len().trailing_zeros() as usize;
        DenseDensity::new(sites, &psi * psi.adjoint()).unwrap()
    }

    #[test]
    fn pure_state_overlap() {
        let a = pure(&[Complex::new(1.0, 0.0), Complex::new(0.3, -0.4)]);
        let b = pure(&[Complex::new(0.2, 0.1), Complex::new(1.0, 0.0)]);
        let va = DVector::from_column_slice(&[Complex::new(1.0, 0.0), Complex::new(0.3, -0.4)]).normalize();
        let vb = DVector::from_column_slice(&[Complex::new(0.2, 0.1), Complex::new(1.0, 0.0)]).normalize();
        let expect = va.dotc(&vb).norm_sqr();
        let f = quantum_fidelity(&a, &b).unwrap().fidelity;
        assert!((f - expect).abs() < 1e-8, "{f} vs {expect}");
        let g = quantum_fidelity(&b, &a).unwrap().fidelity;
        assert!((f - g).abs() < 1e-8);
    }

    #[test]
    fn orthogonal_and_identical() {
        let z = Complex::new(0.0, 0.0);
        let o = Complex::new(1.0, 0.0);
        let up = pure(&[o, z]);
        let down = pure(&[z, o]);
        assert!(quantum_fidelity(&up, &down).unwrap().fidelity.abs() < 1e-10);
        let mm = DenseDensity::<f64>::maximally_mixed(2);
        assert!((quantum_fidelity(&mm, &mm).unwrap().fidelity - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_mismatch_and_bad_trace() {
        let a = DenseDensity::<f64>::maximally_mixed(1);
        let b = DenseDensity::<f64>::maximally_mixed(2);
        assert!(matches!(quantum_fidelity(&a, &b), Err(Error::Validation(_))));
        let c = DenseDensity::new(1, a.matrix() * Complex::new(2.0, 0.0)).unwrap();
        assert!(matches!(quantum_fidelity(&a, &c), Err(Error::Validation(_))));
    }

    #[test]
    fn clipped_mass_is_reported() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex::new(1.1, 0.0),
            Complex::new(-0.1, 0.0),
        ]));
        let bad = DenseDensity::<f64>::new(1, m).unwrap();
        let r = quantum_fidelity(&bad, &DenseDensity::maximally_mixed(1)).unwrap();
        assert!((r.clipped_mass - 0.1).abs() < 1e-12);
        assert!((r.fidelity - 0.55).abs() < 1e-10);
    }

    #[test]
    fn identical_distributions_give_one() {
        let probs = vec![0.1, 0.2, 0.3, 0.4];
        let d = DenseDistribution::new(1, probs).unwrap();
        let test = SampleSet::from_counts(1, 0, 0, [(vec![0], 3), (vec![3], 9)]).unwrap();
        let r = classical_fidelity(&d, &d, &test).unwrap();
        assert_eq!(r.fidelity, 1.0);
        assert!(r.std_error.unwrap() < 1e-12);
        assert!((classical_fidelity_exact(&d, &d).unwrap().fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_ideal_probability_is_integrity_error() {
        let ideal = DenseDistribution::new(1, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let model = DenseDistribution::new(1, vec![0.25; 4]).unwrap();
        let test = SampleSet::from_counts(1, 0, 0, [(vec![2], 1)]).unwrap();
        assert!(matches!(classical_fidelity(&model, &ideal, &test), Err(Error::Integrity(_))));
    }
}
