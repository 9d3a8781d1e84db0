//! Dense multiway arrays.
//!
//! Storage is row-major: the last axis varies fastest. Every reshape reads
//! and writes the data in that order, so `reshape` never moves elements.

use std::ops::{Add, Mul};

use nalgebra::ComplexField;
use num_traits::{Num, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_EPS: f64 = 1e-16;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

fn volume(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Row-major strides for `shape`.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut out = vec![1; shape.len()];
    for ax in (0..shape.len().saturating_sub(1)).rev() {
        out[ax] = out[ax + 1] * shape[ax + 1];
    }
    out
}

/// Offsets of every multi-index over `axes` of a tensor with `shape`,
/// enumerated in row-major order of those axes.
fn offsets(shape: &[usize], axes: &[usize]) -> Vec<usize> {
    let st = strides(shape);
    let mut out = vec![0usize];
    for &ax in axes {
        let mut next = Vec::with_capacity(out.len() * shape[ax]);
        for &base in &out {
            for i in 0..shape[ax] {
                next.push(base + i * st[ax]);
            }
        }
        out = next;
    }
    out
}

impl<S: Copy + Num> DenseTensor<S> {
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Dimension(format!("zero extent in shape {shape:?}")));
        }
        if volume(&shape) != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} holds {} elements, got {}",
                volume(&shape),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = volume(&shape);
        assert!(shape.iter().all(|&e| e > 0), "zero extent in {shape:?}");
        Self { shape, data: vec![S::zero(); n] }
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> S) -> Self {
        let mut t = Self::zeros(shape);
        let mut idx = vec![0usize; t.shape.len()];
        for k in 0..t.data.len() {
            t.data[k] = f(&idx);
            for ax in (0..idx.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < t.shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &e)| {
                debug_assert!(i < e);
                acc * e + i
            })
    }

    pub fn get(&self, index: &[usize]) -> S {
        self.data[self.flat_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: S) {
        let k = self.flat_index(index);
        self.data[k] = value;
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Reorders axes so that output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.rank()];
        if axes.len() != self.rank() {
            return Err(Error::Dimension(format!(
                "permutation {axes:?} for rank {}",
                self.rank()
            )));
        }
        for &a in axes {
            if a >= self.rank() || seen[a] {
                return Err(Error::Dimension(format!("invalid permutation {axes:?}")));
            }
            seen[a] = true;
        }
        let src = offsets(&self.shape, axes);
        let shape = axes.iter().map(|&a| self.shape[a]).collect();
        Ok(Self { shape, data: src.into_iter().map(|o| self.data[o]).collect() })
    }

    pub fn map<R: Copy + Num>(&self, f: impl Fn(S) -> R) -> DenseTensor<R> {
        DenseTensor { shape: self.shape.clone(), data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn scale(&self, alpha: S) -> Self {
        self.map(|x| x * alpha)
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "shapes {:?} and {:?} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// Sums over paired axes; result axes are the free axes of `self` in
    /// order, then the free axes of `other` in order.
    pub fn contract(&self, other: &Self, pairs: &[(usize, usize)]) -> Result<Self> {
        contract(self, other, pairs)
    }
}

impl<S: Copy + Num + ComplexField> DenseTensor<S> {
    pub fn frobenius_norm(&self) -> S::RealField {
        self.data
            .iter()
            .fold(S::RealField::zero(), |acc, x| acc + (*x).modulus_squared())
            .sqrt()
    }
}

impl<S: Copy + Num> Add for &DenseTensor<S> {
    type Output = DenseTensor<S>;

    fn add(self, rhs: Self) -> DenseTensor<S> {
        assert_eq!(self.shape, rhs.shape, "shape mismatch in tensor addition");
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect();
        DenseTensor { shape: self.shape.clone(), data }
    }
}

impl<S: Copy + Num> Mul<S> for &DenseTensor<S> {
    type Output = DenseTensor<S>;

    fn mul(self, rhs: S) -> DenseTensor<S> {
        self.scale(rhs)
    }
}

pub fn contract<S: Copy + Num>(
    a: &DenseTensor<S>,
    b: &DenseTensor<S>,
    pairs: &[(usize, usize)],
) -> Result<DenseTensor<S>> {
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    for &(i, j) in pairs {
        if i >= a.rank() || j >= b.rank() {
            return Err(Error::Dimension(format!(
                "axis pair ({i}, {j}) out of range for ranks {} and {}",
                a.rank(),
                b.rank()
            )));
        }
        if used_a[i] || used_b[j] {
            return Err(Error::Dimension(format!("axis pair ({i}, {j}) repeats an axis")));
        }
        if a.shape[i] != b.shape[j] {
            return Err(Error::Dimension(format!(
                "paired axes ({i}, {j}) have extents {} and {}",
                a.shape[i], b.shape[j]
            )));
        }
        used_a[i] = true;
        used_b[j] = true;
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&j| !used_b[j]).collect();
    let con_a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let con_b: Vec<usize> = pairs.iter().map(|p| p.1).collect();

    let oa = offsets(&a.shape, &free_a);
    let ob = offsets(&b.shape, &free_b);
    let ca = offsets(&a.shape, &con_a);
    let cb = offsets(&b.shape, &con_b);

    let mut data = Vec::with_capacity(oa.len() * ob.len());
    let mut row = vec![S::zero(); ob.len()];
    for &ia in &oa {
        row.iter_mut().for_each(|x| *x = S::zero());
        for (&ka, &kb) in ca.iter().zip(&cb) {
            let av = a.data[ia + ka];
            if av.is_zero() {
                continue;
            }
            for (acc, &jb) in row.iter_mut().zip(&ob) {
                *acc = *acc + av * b.data[kb + jb];
            }
        }
        data.extend_from_slice(&row);
    }
    let shape = free_a
        .iter()
        .map(|&i| a.shape[i])
        .chain(free_b.iter().map(|&j| b.shape[j]))
        .collect();
    Ok(DenseTensor { shape, data })
}

/// Elementwise `num / (den + eps)`; `eps` floors denominators that underflow.
pub fn hadamard_div<T: Real>(
    num: &DenseTensor<T>,
    den: &DenseTensor<T>,
    eps: T,
) -> Result<DenseTensor<T>> {
    num.check_same_shape(den)?;
    let data = num
        .data
        .iter()
        .zip(&den.data)
        .map(|(&n, &d)| if n.is_zero() { T::zero() } else { n / (d + eps) })
        .collect();
    Ok(DenseTensor { shape: num.shape.clone(), data })
}
