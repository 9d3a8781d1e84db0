//! Tetrahedral single-qubit IC-POVM and the per-site maps between density
//! operator cores and outcome-probability cores.
//!
//! Pairing convention: an operator core `W[σ, σ', b, b']` stores
//! `⟨σ|W_{bb'}|σ'⟩`, i.e. `σ` is the row (ket) index and `σ'` the column (bra)
//! index. Row `s` of the flattened POVM is the entrywise conjugate of `M^s`
//! in the same row-major `(σ, σ')` order, so that `flat · vec(W) = tr(M^s W)`.
//! The forward map, the inverse map and every densification share this.

use nalgebra::{ComplexField, Matrix2, Matrix4, Vector2};

use crate::error::{Error, Result};
use crate::scalar::{cr, Complex, Real, C};
use crate::tensor::DenseTensor;

pub const OUTCOMES: usize = 4;

#[derive(Clone, Debug)]
pub struct Povm<T: Real> {
    elements: [Matrix2<C<T>>; 4],
    flat: Matrix4<C<T>>,
    flat_inverse: Matrix4<C<T>>,
}

impl<T: Real> Povm<T> {
    /// Builds a POVM from four 2×2 effects. The effects must be linearly
    /// independent, otherwise the flattened map cannot be inverted.
    pub fn from_elements(elements: [Matrix2<C<T>>; 4]) -> Result<Self> {
        let mut flat = Matrix4::zeros();
        for (s, m) in elements.iter().enumerate() {
            for sigma in 0..2 {
                for sigma_p in 0..2 {
                    flat[(s, 2 * sigma + sigma_p)] = m[(sigma, sigma_p)].conj();
                }
            }
        }
        let flat_inverse = flat
            .try_inverse()
            .ok_or_else(|| Error::Validation("POVM is not informationally complete".into()))?;
        Ok(Self { elements, flat, flat_inverse })
    }

    pub fn elements(&self) -> &[Matrix2<C<T>>; 4] {
        &self.elements
    }

    pub fn flat(&self) -> &Matrix4<C<T>> {
        &self.flat
    }

    pub fn flat_inverse(&self) -> &Matrix4<C<T>> {
        &self.flat_inverse
    }

    /// Ratio of extreme singular values of the flattened map.
    pub fn condition_number(&self) -> T {
        let sv = self.flat.singular_values();
        sv.max() / sv.min()
    }

    /// `[s, σ, σ']` view of `flat`.
    pub fn tensor(&self) -> DenseTensor<C<T>> {
        DenseTensor::from_fn(vec![4, 2, 2], |i| self.flat[(i[0], 2 * i[1] + i[2])])
    }

    fn inverse_tensor(&self) -> DenseTensor<C<T>> {
        DenseTensor::from_fn(vec![2, 2, 4], |i| self.flat_inverse[(2 * i[0] + i[1], i[2])])
    }

    /// Outcome probabilities `tr(M^s ρ)` of a single-qubit state.
    pub fn single_site_probs(&self, rho: &Matrix2<C<T>>) -> Result<[T; 4]> {
        let tr = rho.trace();
        if (tr - cr(T::one())).modulus() > T::lit(1e-8) {
            return Err(Error::Validation(format!("density matrix trace {tr} is not 1")));
        }
        let mut p = [T::zero(); 4];
        for (ps, m) in p.iter_mut().zip(&self.elements) {
            *ps = (m * rho).trace().re;
        }
        Ok(p)
    }

    /// `X^s_{bb'} = Σ_{σσ'} W^{σσ'}_{bb'} M^s_{σσ'}` for a core shaped
    /// `[2, 2, dl, dr]`; returns `[4, dl, dr]`.
    pub fn forward_map_site(&self, w_core: &DenseTensor<C<T>>) -> Result<DenseTensor<C<T>>> {
        check_operator_core(w_core)?;
        self.tensor().contract(w_core, &[(1, 0), (2, 1)])
    }

    /// Real-valued forward map; fails if the imaginary residue exceeds `tol`
    /// relative to the core's magnitude.
    pub fn forward_map_site_real(
        &self,
        w_core: &DenseTensor<C<T>>,
        tol: T,
    ) -> Result<DenseTensor<T>> {
        let x = self.forward_map_site(w_core)?;
        let scale = x.frobenius_norm().max(T::one());
        let worst = x.data().iter().fold(T::zero(), |m, z| m.max(z.im.abs()));
        if worst > tol * scale {
            return Err(Error::Validation(format!(
                "forward-mapped core has imaginary part {worst:e}; operator is not Hermitian"
            )));
        }
        Ok(x.map(|z| z.re))
    }

    /// Solves `X^s = Σ W^{σσ'} M^s_{σσ'}` for `W`; input `[4, dl, dr]`,
    /// output `[2, 2, dl, dr]`.
    pub fn inverse_map_site(&self, x_core: &DenseTensor<T>) -> Result<DenseTensor<C<T>>> {
        if x_core.rank() != 3 || x_core.shape()[0] != OUTCOMES {
            return Err(Error::Dimension(format!(
                "probability core must be [4, dl, dr], got {:?}",
                x_core.shape()
            )));
        }
        let xc = x_core.map(cr);
        self.inverse_tensor().contract(&xc, &[(2, 0)])
    }
}

impl<T: Real> Povm<T> {
    /// The four-outcome POVM `M^s = ½|ψ^s⟩⟨ψ^s|` whose states sit on the
    /// vertices of a regular tetrahedron on the Bloch sphere.
    pub fn tetrahedral() -> Self {
        let third = T::one() / T::lit(3.0);
        let a = third.sqrt();
        let b = (T::lit(2.0) * third).sqrt();
        let two_pi_third = T::lit(2.0) * T::PI() * third;
        let mut states = [Vector2::new(cr(T::one()), cr(T::zero())); 4];
        for (k, st) in states.iter_mut().enumerate().skip(1) {
            let phase = two_pi_third * T::count(k - 1);
            *st = Vector2::new(cr(a), Complex::new(b * phase.cos(), b * phase.sin()));
        }
        let half = cr(T::lit(0.5));
        let elements = states.map(|psi| psi * psi.adjoint() * half);
        Self::from_elements(elements).expect("tetrahedral POVM is informationally complete")
    }
}

pub fn tetrahedral_povm<T: Real>() -> Povm<T> {
    Povm::tetrahedral()
}

fn check_operator_core<T: Real>(w: &DenseTensor<C<T>>) -> Result<()> {
    if w.rank() != 4 || w.shape()[0] != 2 || w.shape()[1] != 2 {
        return Err(Error::Dimension(format!(
            "operator core must be [2, 2, dl, dr], got {:?}",
            w.shape()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix2;

    fn povm() -> Povm<f64> {
        Povm::tetrahedral()
    }

    fn c(re: f64) -> C<f64> {
        Complex::new(re, 0.0)
    }

    fn single_core(m: Matrix2<C<f64>>) -> DenseTensor<C<f64>> {
        DenseTensor::from_fn(vec![2, 2, 1, 1], |i| m[(i[0], i[1])])
    }

    #[test]
    fn completeness_and_spectra() {
        let p = povm();
        let sum: Matrix2<C<f64>> = p.elements().iter().sum();
        assert!((sum - Matrix2::identity()).norm() < 1e-12);
        for m in p.elements() {
            assert!((m - m.adjoint()).norm() < 1e-15);
            let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            assert!(ev[0].abs() < 1e-12 && (ev[1] - 0.5).abs() < 1e-12);
        }
        assert!((p.elements()[1][(0, 0)].re - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn flat_inverse_is_inverse() {
        let p = povm();
        assert!((p.flat() * p.flat_inverse() - Matrix4::identity()).norm() < 1e-10);
        let k = p.condition_number();
        assert!(k.is_finite() && k >= 1.0);
    }

    #[test]
    fn single_site_examples() {
        let p = povm();
        let zero = Matrix2::new(c(1.), c(0.), c(0.), c(0.));
        let one = Matrix2::new(c(0.), c(0.), c(0.), c(1.));
        let mixed = Matrix2::identity() * c(0.5);
        let expect = [
            (zero, [0.5, 1. / 6., 1. / 6., 1. / 6.]),
            (one, [0.0, 1. / 3., 1. / 3., 1. / 3.]),
            (mixed, [0.25; 4]),
        ];
        for (rho, want) in expect {
            let got = p.single_site_probs(&rho).unwrap();
            for s in 0..4 {
                assert!((got[s] - want[s]).abs() < 1e-12, "{got:?} vs {want:?}");
            }
        }
        assert!(matches!(
            p.single_site_probs(&(zero * c(2.0))),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn forward_examples() {
        let p = povm();
        let x = p.forward_map_site_real(&single_core(Matrix2::identity()), 1e-12).unwrap();
        assert_eq!(x.shape(), &[4, 1, 1]);
        for v in x.data() {
            assert!((v - 0.5).abs() < 1e-12);
        }
        let zero = Matrix2::new(c(1.), c(0.), c(0.), c(0.));
        let x = p.forward_map_site_real(&single_core(zero), 1e-12).unwrap();
        let want = [0.5, 1. / 6., 1. / 6., 1. / 6.];
        for (got, want) in x.data().iter().zip(want) {
            assert!((got - want).abs() < 1e-12);
        }
        let back = p.inverse_map_site(&x).unwrap();
        for (a, b) in back.data().iter().zip(single_core(zero).data()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn inverse_of_uniform_is_maximally_mixed() {
        let p = povm();
        let x = DenseTensor::new(vec![4, 1, 1], vec![0.25; 4]).unwrap();
        let w = p.inverse_map_site(&x).unwrap();
        let want = single_core(Matrix2::identity() * c(0.5));
        for (a, b) in w.data().iter().zip(want.data()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let p = povm();
        let bad = DenseTensor::<C<f64>>::zeros(vec![3, 2, 1, 1]);
        assert!(p.forward_map_site(&bad).is_err());
        let bad = DenseTensor::<f64>::zeros(vec![2, 1, 1]);
        assert!(p.inverse_map_site(&bad).is_err());
    }

    #[test]
    fn non_hermitian_core_is_flagged() {
        let p = povm();
        let m = Matrix2::new(c(0.), c(1.), c(0.), c(0.));
        assert!(p.forward_map_site_real(&single_core(m), 1e-12).is_err());
    }
}
