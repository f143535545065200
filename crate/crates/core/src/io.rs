//! JSON file formats.
//!
//! Coefficient tensors:
//! `{"nvars": n, "caps": [..], "ordering": "lex-last-fastest", "re": [..], "im": [..]}`
//! with arrays in linear-index order and an optional `"structure"` for inner
//! functions. Subspaces carry the same grid header plus one column-major
//! basis matrix per block. Floats are written with 17 significant digits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{MultiIndex, TruncationGrid, ORDERING};
use crate::hardy::{HardyElement, InnerFunction, InnerStructure};
use crate::numkernel::CMatrix;
use crate::subspace::Subspace;
use crate::theorems::{Factor, FactorizeOptions, Factorization, SymbolSeries};
use crate::C64;

/// Serializers writing `f64` as `{:.16e}` through raw JSON numbers.
pub mod sci {
    use serde::ser::{Error as _, SerializeSeq};
    use serde::{Serialize, Serializer};
    use serde_json::value::RawValue;

    fn raw(x: f64) -> Result<Box<RawValue>, String> {
        if !x.is_finite() {
            return Err(format!("non-finite value {x}"));
        }
        RawValue::from_string(format!("{x:.16e}")).map_err(|e| e.to_string())
    }

    pub fn f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        raw(*x).map_err(S::Error::custom)?.serialize(s)
    }

    pub fn vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&raw(*x).map_err(S::Error::custom)?)?;
        }
        seq.end()
    }

    pub fn map<S: Serializer, K: serde::Serialize>(
        m: &std::collections::BTreeMap<K, f64>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut out = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            out.serialize_entry(k, &raw(*v).map_err(S::Error::custom)?)?;
        }
        out.end()
    }
}

/// A complex number as `{"re": .., "im": ..}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexFile {
    #[serde(serialize_with = "sci::f64")]
    pub re: f64,
    #[serde(serialize_with = "sci::f64")]
    pub im: f64,
}

impl From<C64> for ComplexFile {
    fn from(c: C64) -> Self {
        ComplexFile { re: c.re, im: c.im }
    }
}

impl From<ComplexFile> for C64 {
    fn from(c: ComplexFile) -> Self {
        C64::new(c.re, c.im)
    }
}

/// Provenance of an inner function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StructureFile {
    Monomial { degrees: Vec<usize> },
    Blaschke { var: usize, zeros: Vec<ComplexFile> },
    Tensor { factors: Vec<StructureFile> },
    /// Only the coefficients are known.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorFile {
    pub nvars: usize,
    pub caps: Vec<usize>,
    pub ordering: String,
    #[serde(serialize_with = "sci::vec")]
    pub re: Vec<f64>,
    #[serde(serialize_with = "sci::vec")]
    pub im: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureFile>,
}

fn grid_of(nvars: usize, caps: &[usize], ordering: &str) -> Result<TruncationGrid> {
    if ordering != ORDERING {
        return Err(Error::Serialization(format!("unknown ordering {ordering:?}")));
    }
    if nvars != caps.len() {
        return Err(Error::Serialization(format!("nvars {nvars} with {} caps", caps.len())));
    }
    TruncationGrid::new(caps.to_vec())
}

impl TensorFile {
    pub fn from_element(h: &HardyElement) -> Self {
        TensorFile {
            nvars: h.grid().nvars(),
            caps: h.grid().caps().to_vec(),
            ordering: ORDERING.to_string(),
            re: h.coeffs().iter().map(|c| c.re).collect(),
            im: h.coeffs().iter().map(|c| c.im).collect(),
            structure: None,
        }
    }

    pub fn from_inner(f: &InnerFunction) -> Self {
        let mut t = TensorFile::from_element(&f.coefficients());
        t.structure = Some(structure_file(f.structure()));
        t
    }

    pub fn grid(&self) -> Result<TruncationGrid> {
        grid_of(self.nvars, &self.caps, &self.ordering)
    }

    pub fn to_element(&self) -> Result<HardyElement> {
        let grid = self.grid()?;
        if self.re.len() != grid.size() || self.im.len() != grid.size() {
            return Err(Error::Serialization(format!(
                "{} re / {} im values for a grid of size {}",
                self.re.len(),
                self.im.len(),
                grid.size()
            )));
        }
        let coeffs = self.re.iter().zip(&self.im).map(|(r, i)| C64::new(*r, *i)).collect();
        HardyElement::new(grid, coeffs)
    }

    /// Rebuilds the inner function from `structure`; without one, or for
    /// `raw`, the coefficients are taken as a raw series.
    pub fn to_inner(&self) -> Result<InnerFunction> {
        let grid = self.grid()?;
        match &self.structure {
            None | Some(StructureFile::Raw) => Ok(InnerFunction::raw(self.to_element()?)),
            Some(s) => inner_from_structure(&grid, s),
        }
    }
}

fn structure_file(s: &InnerStructure) -> StructureFile {
    match s {
        InnerStructure::Monomial(k) => StructureFile::Monomial { degrees: k.entries().to_vec() },
        InnerStructure::Blaschke1D { var, zeros } => StructureFile::Blaschke {
            var: *var,
            zeros: zeros.iter().map(|z| (*z).into()).collect(),
        },
        InnerStructure::TensorProduct(fs) => StructureFile::Tensor {
            factors: fs.iter().map(|f| structure_file(f.structure())).collect(),
        },
        InnerStructure::RawSeries(_) => StructureFile::Raw,
    }
}

/// Inner function on `grid` described by `s`; `raw` has no coefficients to
/// build from and is rejected.
pub fn inner_from_structure(grid: &TruncationGrid, s: &StructureFile) -> Result<InnerFunction> {
    match s {
        StructureFile::Monomial { degrees } => InnerFunction::monomial(grid, MultiIndex::new(degrees.clone())),
        StructureFile::Blaschke { var, zeros } => {
            InnerFunction::blaschke(grid, *var, zeros.iter().map(|z| (*z).into()).collect())
        }
        StructureFile::Tensor { factors } => {
            let fs = factors.iter().map(|f| inner_from_structure(grid, f)).collect::<Result<_>>()?;
            InnerFunction::tensor(grid, fs)
        }
        StructureFile::Raw => Err(Error::Serialization("raw structure needs coefficients".into())),
    }
}

/// A dense complex matrix, column-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    #[serde(serialize_with = "sci::vec")]
    pub re: Vec<f64>,
    #[serde(serialize_with = "sci::vec")]
    pub im: Vec<f64>,
}

impl MatrixFile {
    pub fn from_matrix(m: &CMatrix) -> Self {
        MatrixFile {
            rows: m.nrows(),
            cols: m.ncols(),
            re: m.iter().map(|c| c.re).collect(),
            im: m.iter().map(|c| c.im).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.rows * self.cols;
        if self.re.len() != n || self.im.len() != n {
            return Err(Error::Serialization(format!("{}x{} matrix with {} values", self.rows, self.cols, self.re.len())));
        }
        let data: Vec<C64> = self.re.iter().zip(&self.im).map(|(r, i)| C64::new(*r, *i)).collect();
        Ok(CMatrix::from_column_slice(self.rows, self.cols, &data))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockFile {
    /// First variable of the block.
    pub start: usize,
    pub caps: Vec<usize>,
    pub basis: MatrixFile,
}

/// Subspace: grid header plus the orthonormal basis of every block; the
/// full basis is the Kronecker product of the block bases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspaceFile {
    pub nvars: usize,
    pub caps: Vec<usize>,
    pub ordering: String,
    pub dim: usize,
    pub blocks: Vec<BlockFile>,
}

impl SubspaceFile {
    pub fn from_subspace(s: &Subspace) -> Self {
        SubspaceFile {
            nvars: s.grid().nvars(),
            caps: s.grid().caps().to_vec(),
            ordering: ORDERING.to_string(),
            dim: s.dim(),
            blocks: s
                .blocks()
                .iter()
                .map(|b| BlockFile {
                    start: b.start(),
                    caps: b.grid().caps().to_vec(),
                    basis: MatrixFile::from_matrix(b.basis()),
                })
                .collect(),
        }
    }

    pub fn to_subspace(&self) -> Result<Subspace> {
        let grid = grid_of(self.nvars, &self.caps, &self.ordering)?;
        let mut at = 0;
        let mut parts = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            if b.start != at {
                return Err(Error::Serialization(format!("block starts at {} instead of {at}", b.start)));
            }
            at += b.caps.len();
            parts.push((TruncationGrid::new(b.caps.clone())?, b.basis.to_matrix()?));
        }
        let s = Subspace::from_blocks(parts)?;
        if s.grid() != &grid {
            return Err(Error::Serialization(format!("blocks cover {} but the header says {grid}", s.grid())));
        }
        if s.dim() != self.dim {
            return Err(Error::Serialization(format!("dim {} but the blocks give {}", self.dim, s.dim())));
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FactorFile {
    Model { zeros: Vec<ComplexFile> },
    FullAtTruncation,
}

impl From<&Factor> for FactorFile {
    fn from(f: &Factor) -> Self {
        match f {
            Factor::Model { zeros } => FactorFile::Model { zeros: zeros.iter().map(|z| (*z).into()).collect() },
            Factor::FullAtTruncation => FactorFile::FullAtTruncation,
        }
    }
}

impl From<&FactorFile> for Factor {
    fn from(f: &FactorFile) -> Self {
        match f {
            FactorFile::Model { zeros } => Factor::Model { zeros: zeros.iter().map(|z| (*z).into()).collect() },
            FactorFile::FullAtTruncation => Factor::FullAtTruncation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsFile {
    #[serde(serialize_with = "sci::f64")]
    pub tol: f64,
    #[serde(serialize_with = "sci::f64")]
    pub rank_epsilon: f64,
    #[serde(serialize_with = "sci::f64")]
    pub rank_ratio: f64,
    #[serde(serialize_with = "sci::f64")]
    pub inner_tol: f64,
    #[serde(serialize_with = "sci::f64")]
    pub cluster_radius: f64,
}

impl From<&FactorizeOptions> for OptionsFile {
    fn from(o: &FactorizeOptions) -> Self {
        OptionsFile {
            tol: o.tol,
            rank_epsilon: o.rank_epsilon,
            rank_ratio: o.rank_ratio,
            inner_tol: o.inner_tol,
            cluster_radius: o.cluster_radius,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorizationFile {
    pub split: usize,
    pub theta: TensorFile,
    pub factors: Vec<FactorFile>,
    pub lambda: ComplexFile,
    #[serde(serialize_with = "sci::map")]
    pub residuals: BTreeMap<String, f64>,
    pub wandering_dim: usize,
    pub tolerances: OptionsFile,
}

impl From<&Factorization> for FactorizationFile {
    fn from(f: &Factorization) -> Self {
        FactorizationFile {
            split: f.split,
            theta: TensorFile::from_inner(&f.theta),
            factors: f.factors.iter().map(FactorFile::from).collect(),
            lambda: f.lambda.into(),
            residuals: f.residuals.clone(),
            wandering_dim: f.wandering_dim,
            tolerances: (&f.options).into(),
        }
    }
}

/// One operator coefficient `Φ_k` of a symbol series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolCoeffFile {
    pub index: Vec<usize>,
    pub matrix: MatrixFile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSeriesFile {
    pub nvars: usize,
    pub caps: Vec<usize>,
    pub ordering: String,
    pub coeffs: Vec<SymbolCoeffFile>,
}

impl From<&SymbolSeries> for SymbolSeriesFile {
    fn from(s: &SymbolSeries) -> Self {
        SymbolSeriesFile {
            nvars: s.grid_z.nvars(),
            caps: s.grid_z.caps().to_vec(),
            ordering: ORDERING.to_string(),
            coeffs: s
                .coeffs
                .iter()
                .map(|(k, m)| SymbolCoeffFile { index: k.entries().to_vec(), matrix: MatrixFile::from_matrix(m.as_matrix()) })
                .collect(),
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(caps: &[usize]) -> TruncationGrid {
        TruncationGrid::new(caps.to_vec()).unwrap()
    }

    #[test]
    fn tensor_round_trip_is_bitwise() {
        let g = grid(&[2, 3]);
        let h = crate::instances::polynomial(&mut crate::instances::rng(11), &g);
        let text = to_json(&TensorFile::from_element(&h)).unwrap();
        assert!(text.contains("\"ordering\": \"lex-last-fastest\""));
        let back: TensorFile = from_json(&text).unwrap();
        assert_eq!(back.to_element().unwrap(), h);
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        let h = HardyElement::from_1d(vec![C64::new(0.1, -1.0 / 3.0)]).unwrap();
        let text = to_json(&TensorFile::from_element(&h)).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("-3.3333333333333331e-1"), "{text}");
    }

    #[test]
    fn inner_structure_round_trip() {
        let g = grid(&[8, 8]);
        let a = InnerFunction::blaschke(&g, 0, vec![C64::new(0.3, 0.1)]).unwrap();
        let b = InnerFunction::monomial(&g, MultiIndex::new(vec![0, 2])).unwrap();
        let t = InnerFunction::tensor(&g, vec![a, b]).unwrap();
        let text = to_json(&TensorFile::from_inner(&t)).unwrap();
        let back: TensorFile = from_json(&text).unwrap();
        assert_eq!(back.to_inner().unwrap(), t);
    }

    #[test]
    fn subspace_round_trip() {
        let g = grid(&[6, 6]);
        let th = InnerFunction::blaschke(&g, 0, vec![C64::new(0.4, 0.0)]).unwrap();
        let s = crate::theorems::mixed_subspace(
            &th,
            &[Factor::Model { zeros: vec![C64::new(-0.2, 0.1)] }],
            &g,
            crate::subspace::Layout::Split,
        )
        .unwrap();
        let text = to_json(&SubspaceFile::from_subspace(&s)).unwrap();
        let back: SubspaceFile = from_json(&text).unwrap();
        assert_eq!(back.to_subspace().unwrap(), s);
    }

    #[test]
    fn rejects_bad_headers() {
        let mut t = TensorFile::from_element(&HardyElement::one(&grid(&[1])));
        t.ordering = "colex".into();
        assert!(matches!(t.to_element(), Err(Error::Serialization(_))));
        let text = r#"{"nvars":1,"caps":[0],"ordering":"lex-last-fastest","re":[1],"im":[0],"extra":1}"#;
        assert!(matches!(from_json::<TensorFile>(text), Err(Error::Serialization(_))));
        let text = r#"{"nvars":1,"caps":[1],"ordering":"lex-last-fastest","re":[1],"im":[0]}"#;
        let t: TensorFile = from_json(text).unwrap();
        assert!(t.to_element().is_err());
    }
}
