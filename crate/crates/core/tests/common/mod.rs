//! Brute-force oracles shared by the integration tests.
//!
//! Everything here works by explicit enumeration over outcome strings and
//! bond index tuples, never through the library's chain contractions.
#![allow(dead_code)]

use nalgebra::DMatrix;
use nntt::sampling::{sample_dataset, SampleSet};
use nntt::states::{outcome_string, DenseDistribution};
use nntt::tensor::DenseTensor;
use nntt::TtDistribution;
use rand::Rng;

pub fn strings(sites: usize) -> Vec<Vec<u8>> {
    (0..4usize.pow(sites as u32)).map(|i| outcome_string(i, sites)).collect()
}

/// Odometer over all tuples with the given extents.
pub fn tuples(extents: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = extents.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0; extents.len()];
    for _ in 0..total {
        out.push(idx.clone());
        for axis in (0..extents.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < extents[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
    out
}

/// `Σ_{internal bonds} Π_k X_k[a_k, b_k, b_{k+1}]` over sites `from..to` with
/// the outer bonds pinned to `bl` and `br`.
pub fn segment(tt: &TtDistribution<f64>, from: usize, to: usize, a: &[u8], bl: usize, br: usize) -> f64 {
    if from == to {
        return if bl == br { 1.0 } else { 0.0 };
    }
    let bonds = tt.bond_dims();
    let inner = &bonds[from + 1..to];
    let mut total = 0.0;
    for t in tuples(inner) {
        let mut chain = vec![bl];
        chain.extend(&t);
        chain.push(br);
        let mut prod = 1.0;
        for (i, k) in (from..to).enumerate() {
            prod *= tt.core(k).get(&[a[i] as usize, chain[i], chain[i + 1]]);
        }
        total += prod;
    }
    total
}

pub fn brute_probability(tt: &TtDistribution<f64>, a: &[u8]) -> f64 {
    segment(tt, 0, tt.sites(), a, 0, 0)
}

pub fn brute_dense(tt: &TtDistribution<f64>) -> Vec<f64> {
    strings(tt.sites()).iter().map(|a| brute_probability(tt, a)).collect()
}

pub fn empirical_dense(set: &SampleSet) -> Vec<f64> {
    let mut p = vec![0.0; 4usize.pow(set.sites() as u32)];
    for e in set.entries() {
        let idx = e.outcome.iter().fold(0, |acc, &x| acc * 4 + x as usize);
        p[idx] = e.count as f64 / set.total() as f64;
    }
    p
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `⟨P,P⟩ − 2⟨P,P_s⟩` by enumerating all 4^L strings.
pub fn brute_loss(tt: &TtDistribution<f64>, set: &SampleSet) -> f64 {
    let p = brute_dense(tt);
    dot(&p, &p) - 2.0 * dot(&p, &empirical_dense(set))
}

/// The train with core `k` replaced by the unit tensor at `(s, b, b')`.
pub fn with_unit_core(tt: &TtDistribution<f64>, k: usize, s: usize, b: usize, bp: usize) -> TtDistribution<f64> {
    let mut unit = DenseTensor::zeros(tt.core(k).shape().to_vec());
    unit.set(&[s, b, bp], 1.0);
    let mut out = tt.clone();
    out.set_core(k, unit).unwrap();
    out
}

fn unit_projections(tt: &TtDistribution<f64>, k: usize, against: &[f64]) -> Vec<f64> {
    let sh = tt.core(k).shape().to_vec();
    let mut out = Vec::new();
    for s in 0..4 {
        for b in 0..sh[1] {
            for bp in 0..sh[2] {
                out.push(dot(&brute_dense(&with_unit_core(tt, k, s, b, bp)), against));
            }
        }
    }
    out
}

/// `∂⟨P,P_s⟩/∂X_k`, which is the update numerator.
pub fn brute_numerator(tt: &TtDistribution<f64>, set: &SampleSet, k: usize) -> Vec<f64> {
    unit_projections(tt, k, &empirical_dense(set))
}

/// `½ ∂⟨P,P⟩/∂X_k`, which is the update denominator before `ε`.
pub fn brute_denominator(tt: &TtDistribution<f64>, k: usize) -> Vec<f64> {
    unit_projections(tt, k, &brute_dense(tt))
}

pub fn brute_left_gram(tt: &TtDistribution<f64>, bond: usize) -> DMatrix<f64> {
    let d = tt.bond_dims()[bond];
    let mut g = DMatrix::zeros(d, d);
    for a in strings(bond) {
        let v: Vec<f64> = (0..d).map(|b| segment(tt, 0, bond, &a, 0, b)).collect();
        for i in 0..d {
            for j in 0..d {
                g[(i, j)] += v[i] * v[j];
            }
        }
    }
    g
}

pub fn brute_right_gram(tt: &TtDistribution<f64>, bond: usize) -> DMatrix<f64> {
    let l = tt.sites();
    let d = tt.bond_dims()[bond];
    let mut g = DMatrix::zeros(d, d);
    for a in strings(l - bond) {
        let v: Vec<f64> = (0..d).map(|b| segment(tt, bond, l, &a, b, 0)).collect();
        for i in 0..d {
            for j in 0..d {
                g[(i, j)] += v[i] * v[j];
            }
        }
    }
    g
}

/// Sample-major `[j, b]` left overlaps at `bond`.
pub fn brute_left_overlap(tt: &TtDistribution<f64>, set: &SampleSet, bond: usize) -> Vec<f64> {
    let d = tt.bond_dims()[bond];
    set.entries()
        .iter()
        .flat_map(|e| (0..d).map(move |b| segment(tt, 0, bond, &e.outcome[..bond], 0, b)))
        .collect()
}

pub fn brute_right_overlap(tt: &TtDistribution<f64>, set: &SampleSet, bond: usize) -> Vec<f64> {
    let l = tt.sites();
    let d = tt.bond_dims()[bond];
    set.entries()
        .iter()
        .flat_map(|e| (0..d).map(move |b| segment(tt, bond, l, &e.outcome[bond..], b, 0)))
        .collect()
}

/// Contraction by iterating over every joint index of both operands.
pub fn brute_contract(a: &DenseTensor<f64>, b: &DenseTensor<f64>, pairs: &[(usize, usize)]) -> DenseTensor<f64> {
    let free_a: Vec<usize> = (0..a.rank()).filter(|i| pairs.iter().all(|p| p.0 != *i)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|j| pairs.iter().all(|p| p.1 != *j)).collect();
    let shape: Vec<usize> =
        free_a.iter().map(|&i| a.shape()[i]).chain(free_b.iter().map(|&j| b.shape()[j])).collect();
    let mut out = DenseTensor::zeros(shape);
    for ia in tuples(a.shape()) {
        for ib in tuples(b.shape()) {
            if pairs.iter().any(|&(i, j)| ia[i] != ib[j]) {
                continue;
            }
            let idx: Vec<usize> =
                free_a.iter().map(|&i| ia[i]).chain(free_b.iter().map(|&j| ib[j])).collect();
            let v = out.get(&idx) + a.get(&ia) * b.get(&ib);
            out.set(&idx, v);
        }
    }
    out
}

/// Random skewed distribution over `4^sites` strings.
pub fn random_distribution(sites: usize, seed: u64) -> DenseDistribution<f64> {
    let mut rng = nntt::rng::stream_rng(seed, 99);
    let raw: Vec<f64> = (0..4usize.pow(sites as u32)).map(|_| rng.gen::<f64>().powi(3)).collect();
    let z: f64 = raw.iter().sum();
    DenseDistribution::new(sites, raw.into_iter().map(|x| x / z).collect()).unwrap()
}

pub fn random_samples(sites: usize, n: u64, seed: u64) -> SampleSet {
    sample_dataset(&random_distribution(sites, seed), n, seed).unwrap()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Largest deviation relative to the larger operand's magnitude.
pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = max_abs(want).max(max_abs(got)).max(f64::MIN_POSITIVE);
    got.iter().zip(want).fold(0.0f64, |m, (g, w)| m.max((g - w).abs())) / scale
}
