//! Plain-text containers for trains, operators and dense data.
//!
//! ```text
//! nntt-tensor 1
//! kind tt            # tt | mpo | dense
//! field real         # real | complex
//! sites 4
//! physical 4         # 4 for tt, 2x2 for mpo and dense
//! bonds 1 4 10 4 1   # dense: dim 16
//! data
//! 3.1e-1             # one value per line (complex: "re im"), cores in
//! ...                # order, each row-major
//! ```
//!
//! Values are written in shortest round-trip scientific notation, so a
//! write/read cycle is exact.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::povm::OUTCOMES;
use crate::scalar::{Real, C};
use crate::states::{DenseDensity, DenseDistribution, MpoDensity};
use crate::tensor::DenseTensor;
use crate::tt::TtDistribution;

const TENSOR_MAGIC: &str = "nntt-tensor 1";
const DIST_MAGIC: &str = "nntt-distribution 1";

fn header(kind: &str, field: &str, sites: usize, physical: &str, shape_line: &str) -> String {
    format!(
        "{TENSOR_MAGIC}\nkind {kind}\nfield {field}\nsites {sites}\nphysical {physical}\n{shape_line}\ndata\n"
    )
}

fn join(v: &[usize]) -> String {
    v.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn tt_to_text<T: Real>(tt: &TtDistribution<T>) -> String {
    let mut out = header("tt", "real", tt.sites(), "4", &format!("bonds {}", join(&tt.bond_dims())));
    for core in tt.cores() {
        for x in core.data() {
            writeln!(out, "{x:e}").unwrap();
        }
    }
    out
}

pub fn mpo_to_text<T: Real>(rho: &MpoDensity<T>) -> String {
    let mut out =
        header("mpo", "complex", rho.sites(), "2x2", &format!("bonds {}", join(&rho.bond_dims())));
    for core in rho.cores() {
        for z in core.data() {
            writeln!(out, "{:e} {:e}", z.re, z.im).unwrap();
        }
    }
    out
}

pub fn dense_to_text<T: Real>(rho: &DenseDensity<T>) -> String {
    let mut out = header("dense", "complex", rho.sites(), "2x2", &format!("dim {}", rho.dim()));
    let m = rho.matrix();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            writeln!(out, "{:e} {:e}", z.re, z.im).unwrap();
        }
    }
    out
}

struct Parsed<'a> {
    kind: String,
    field: String,
    sites: usize,
    physical: String,
    shape: Vec<usize>,
    /// `(line number, text)` of each data line.
    data: Vec<(usize, &'a str)>,
}

fn parse_usize(line: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::parse(line, format!("expected an integer, found {s:?}")))
}

fn parse_tensor_text(text: &str) -> Result<Parsed<'_>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, TENSOR_MAGIC)) => {}
        _ => return Err(Error::parse(1, format!("expected {TENSOR_MAGIC:?}"))),
    }
    let mut fields = std::collections::BTreeMap::new();
    let mut data_line = None;
    for (n, l) in lines.by_ref() {
        if l == "data" {
            data_line = Some(n);
            break;
        }
        let (k, v) = l.split_once(' ').ok_or_else(|| Error::parse(n, "expected `key value`"))?;
        if fields.insert(k.to_string(), (n, v.trim().to_string())).is_some() {
            return Err(Error::parse(n, format!("duplicate key {k:?}")));
        }
    }
    let data_line = data_line.ok_or_else(|| Error::parse(text.lines().count(), "missing `data`"))?;
    let take = |k: &str| {
        fields.get(k).cloned().ok_or_else(|| Error::parse(data_line, format!("missing key {k:?}")))
    };
    let (_, kind) = take("kind")?;
    let (_, field) = take("field")?;
    let (sl, sites) = take("sites")?;
    let (_, physical) = take("physical")?;
    let shape = if kind == "dense" {
        let (n, d) = take("dim")?;
        vec![parse_usize(n, &d)?]
    } else {
        let (n, b) = take("bonds")?;
        b.split_whitespace().map(|x| parse_usize(n, x)).collect::<Result<Vec<_>>>()?
    };
    let data = lines.filter(|(_, l)| !l.is_empty()).collect();
    Ok(Parsed { kind, field, sites: parse_usize(sl, &sites)?, physical, shape, data })
}

impl Parsed<'_> {
    fn expect(&self, kind: &str, field: &str, physical: &str) -> Result<()> {
        if self.kind != kind || self.field != field || self.physical != physical {
            return Err(Error::parse(
                2,
                format!(
                    "expected a {kind}/{field}/{physical} container, found {}/{}/{}",
                    self.kind, self.field, self.physical
                ),
            ));
        }
        Ok(())
    }

    fn check_count(&self, expected: usize) -> Result<()> {
        if self.data.len() != expected {
            let line = self.data.last().map(|d| d.0).unwrap_or(1);
            return Err(Error::parse(
                line,
                format!("expected {expected} values, found {}", self.data.len()),
            ));
        }
        Ok(())
    }

    fn bonds(&self) -> Result<&[usize]> {
        let b = &self.shape;
        if b.len() != self.sites + 1 || self.sites == 0 || b.contains(&0) {
            return Err(Error::parse(6, format!("bond list {b:?} does not fit {} sites", self.sites)));
        }
        Ok(b)
    }

    fn reals<T: Real>(&self) -> Result<Vec<T>> {
        self.data
            .iter()
            .map(|&(n, l)| parse_value(n, l))
            .collect()
    }

    fn complexes<T: Real>(&self) -> Result<Vec<C<T>>> {
        self.data
            .iter()
            .map(|&(n, l)| {
                let mut it = l.split_whitespace();
                match (it.next(), it.next(), it.next()) {
                    (Some(re), Some(im), None) => Ok(C::new(parse_value(n, re)?, parse_value(n, im)?)),
                    _ => Err(Error::parse(n, "expected `re im`")),
                }
            })
            .collect()
    }
}

fn parse_value<T: Real>(line: usize, s: &str) -> Result<T> {
    let v: T = s.parse().map_err(|_| Error::parse(line, format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite value {s:?}")));
    }
    Ok(v)
}

fn split_cores<S: Copy + num_traits::Num>(
    values: Vec<S>,
    bonds: &[usize],
    physical: &[usize],
) -> Result<Vec<DenseTensor<S>>> {
    let mut it = values.into_iter();
    bonds
        .windows(2)
        .map(|w| {
            let mut shape = physical.to_vec();
            shape.extend([w[0], w[1]]);
            let n = shape.iter().product();
            DenseTensor::new(shape, it.by_ref().take(n).collect())
        })
        .collect()
}

pub fn tt_from_text<T: Real>(text: &str) -> Result<TtDistribution<T>> {
    let p = parse_tensor_text(text)?;
    p.expect("tt", "real", "4")?;
    let bonds = p.bonds()?.to_vec();
    let n = bonds.windows(2).map(|w| OUTCOMES * w[0] * w[1]).sum();
    let values = p.reals()?;
    p.check_count(n)?;
    TtDistribution::new(split_cores(values, &bonds, &[OUTCOMES])?)
}

pub fn mpo_from_text<T: Real>(text: &str) -> Result<MpoDensity<T>> {
    let p = parse_tensor_text(text)?;
    p.expect("mpo", "complex", "2x2")?;
    let bonds = p.bonds()?.to_vec();
    let n = bonds.windows(2).map(|w| 4 * w[0] * w[1]).sum();
    let values = p.complexes()?;
    p.check_count(n)?;
    MpoDensity::new(split_cores(values, &bonds, &[2, 2])?)
}

pub fn dense_from_text<T: Real>(text: &str) -> Result<DenseDensity<T>> {
    let p = parse_tensor_text(text)?;
    p.expect("dense", "complex", "2x2")?;
    let dim = p.shape[0];
    if p.sites >= usize::BITS as usize || dim != 1usize << p.sites {
        return Err(Error::parse(6, format!("dimension {dim} does not fit {} sites", p.sites)));
    }
    let values = p.complexes()?;
    p.check_count(dim * dim)?;
    DenseDensity::new(p.sites, DMatrix::from_row_slice(dim, dim, &values))
}

pub fn distribution_to_text<T: Real>(d: &DenseDistribution<T>) -> String {
    let mut out = format!("{DIST_MAGIC}\nsites {}\n", d.sites());
    for p in d.probs() {
        writeln!(out, "{p:e}").unwrap();
    }
    out
}

pub fn distribution_from_text<T: Real>(text: &str) -> Result<DenseDistribution<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    if lines.next().map(|l| l.1) != Some(DIST_MAGIC) {
        return Err(Error::parse(1, format!("expected {DIST_MAGIC:?}")));
    }
    let sites = match lines.next() {
        Some((n, l)) => match l.strip_prefix("sites ") {
            Some(v) => parse_usize(n, v.trim())?,
            None => return Err(Error::parse(n, "expected `sites L`")),
        },
        None => return Err(Error::parse(2, "missing `sites`")),
    };
    let probs = lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, l)| parse_value(n, l))
        .collect::<Result<Vec<T>>>()?;
    if sites > crate::states::MAX_DENSE_SITES {
        return Err(Error::Capacity(format!("{sites} sites exceed the dense limit")));
    }
    DenseDistribution::new(sites, probs).map_err(|e| Error::parse(text.lines().count(), e.to_string()))
}

fn read(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

pub fn save_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    Ok(std::fs::write(path, text)?)
}

pub fn load_tt<T: Real>(path: impl AsRef<Path>) -> Result<TtDistribution<T>> {
    tt_from_text(&read(path.as_ref())?)
}

pub fn load_mpo<T: Real>(path: impl AsRef<Path>) -> Result<MpoDensity<T>> {
    mpo_from_text(&read(path.as_ref())?)
}

pub fn load_dense<T: Real>(path: impl AsRef<Path>) -> Result<DenseDensity<T>> {
    dense_from_text(&read(path.as_ref())?)
}

pub fn load_distribution<T: Real>(path: impl AsRef<Path>) -> Result<DenseDistribution<T>> {
    distribution_from_text(&read(path.as_ref())?)
}
