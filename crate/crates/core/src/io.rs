//! Instance files.
//!
//! JSON documents with a `schema_version` and a `kind` of either `normlike`
//! or `period_model`. Matrices are row-major nested arrays. Each scalar is an
//! integer, a rational `[num, den]` pair or a decimal, and is written back in
//! the form it was read in, so parsing and re-serializing a file reproduces it.
//!
//! A `normlike` file:
//!
//! ```json
//! {
//!   "schema_version": "1",
//!   "kind": "normlike",
//!   "g": 1,
//!   "k": 2,
//!   "kappa": 1,
//!   "A": [[[1]], [[1]]],
//!   "c": [[1], [2]],
//!   "a": [1],
//!   "B": [[0]]
//! }
//! ```
//!
//! Instead of `a` and `B` a list `samples` of `{"lambda": [..], "a": [..], "B": [[..]]}`
//! gives a sampled parameter domain.
//!
//! A `period_model` file carries `g`, `k`, `n`, the polarization `delta`,
//! `A`, `c`, the polynomial maps `psi` and `alpha` as lists of terms
//! `{"exponents": [..], "re": .., "im": ..}` (missing parts are zero),
//! `h_orders`, and optionally `h_unit`, `epsilon` and a `grid` of points
//! `{"re": [..], "im": [..]}` of the polydisk.

use std::fmt;
use std::path::Path;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::biext_metric::{MatrixPolynomial, PeriodModel, PolarizationType, VectorPolynomial};
use crate::error::Error;
use crate::normlike::{NormlikeInstance, ParamSample};
use crate::psd_linalg::PsdMatrix;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FileError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error(transparent)]
    Model(#[from] Error),
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> FileError {
    FileError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

/// A number as written in a file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Ratio([i64; 2]),
    Real(f64),
}

impl Scalar {
    /// Reduced fraction; a zero denominator is rejected by [`Scalar::value`].
    pub fn ratio(num: i64, den: i64) -> Self {
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i64;
        let (mut n, mut d) = (num / g, den / g);
        if d < 0 {
            n = -n;
            d = -d;
        }
        if d == 1 {
            Scalar::Int(n)
        } else {
            Scalar::Ratio([n, d])
        }
    }

    pub fn value(&self, field: &str) -> Result<f64, FileError> {
        match *self {
            Scalar::Int(n) => Ok(n as f64),
            Scalar::Ratio([_, 0]) => Err(schema(field, "zero denominator")),
            Scalar::Ratio([n, d]) => Ok(n as f64 / d as f64),
            Scalar::Real(x) if x.is_finite() => Ok(x),
            Scalar::Real(_) => Err(schema(field, "non-finite number")),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int(n) => write!(f, "{n}"),
            Scalar::Ratio([n, d]) => write!(f, "{n}/{d}"),
            Scalar::Real(x) => write!(f, "{x}"),
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub type Vector = Vec<Scalar>;
pub type Matrix = Vec<Vec<Scalar>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleFile {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda: Vector,
    pub a: Vector,
    #[serde(rename = "B")]
    pub b: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormlikeFile {
    pub schema_version: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    pub g: usize,
    pub k: usize,
    pub kappa: Scalar,
    #[serde(rename = "A")]
    pub a_mats: Vec<Matrix>,
    pub c: Vec<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vector>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<SampleFile>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixTerm {
    pub exponents: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorTerm {
    pub exponents: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexPoint {
    pub re: Vector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodModelFile {
    pub schema_version: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    pub g: usize,
    pub k: usize,
    pub n: usize,
    pub delta: Vec<u64>,
    #[serde(rename = "A")]
    pub a_mats: Vec<Matrix>,
    pub c: Vec<Vector>,
    #[serde(default)]
    pub psi: Vec<MatrixTerm>,
    #[serde(default)]
    pub alpha: Vec<VectorTerm>,
    pub h_orders: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_unit: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<ComplexPoint>>,
}

/// A parsed instance file of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceFile {
    Normlike(NormlikeFile),
    PeriodModel(PeriodModelFile),
}

#[derive(Deserialize)]
struct Header {
    schema_version: String,
    kind: String,
}

fn parse_error(e: serde_json::Error) -> FileError {
    FileError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self, FileError> {
        let header: Header = serde_json::from_str(text).map_err(parse_error)?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(schema(
                "schema_version",
                format!(
                    "unsupported version {:?}, expected {SCHEMA_VERSION:?}",
                    header.schema_version
                ),
            ));
        }
        match header.kind.as_str() {
            "normlike" => Ok(Self::Normlike(serde_json::from_str(text).map_err(parse_error)?)),
            "period_model" => Ok(Self::PeriodModel(serde_json::from_str(text).map_err(parse_error)?)),
            other => Err(schema("kind", format!("unknown kind {other:?}"))),
        }
    }

    pub fn read(path: &Path) -> Result<(Self, Vec<u8>), FileError> {
        let bytes = std::fs::read(path).map_err(|e| FileError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let text = std::str::from_utf8(&bytes).map_err(|e| FileError::Parse {
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
        Ok((Self::parse(text)?, bytes))
    }

    /// Canonical JSON: one key per line, arrays without objects inline.
    pub fn to_json(&self) -> String {
        let value = match self {
            Self::Normlike(f) => serde_json::to_value(f),
            Self::PeriodModel(f) => serde_json::to_value(f),
        };
        let mut out = String::new();
        write_canonical(&value.expect("file types serialize"), 0, &mut out);
        out.push('\n');
        out
    }

    pub fn seed(&self) -> Option<&str> {
        match self {
            Self::Normlike(f) => f.seed.as_deref(),
            Self::PeriodModel(f) => f.seed.as_deref(),
        }
    }

    pub fn tolerances(&self) -> Option<&Tolerances> {
        match self {
            Self::Normlike(f) => f.tolerances.as_ref(),
            Self::PeriodModel(f) => f.tolerances.as_ref(),
        }
    }

    /// The normlike instance of the file; a period model is packaged over
    /// its grid (the origin when no grid is given).
    pub fn to_instance(&self) -> Result<NormlikeInstance, FileError> {
        match self {
            Self::Normlike(f) => f.to_instance(),
            Self::PeriodModel(f) => {
                let model = f.to_model()?;
                let grid = f.grid_points()?;
                Ok(model.to_normlike(&grid)?)
            }
        }
    }
}

fn has_object(v: &Value) -> bool {
    match v {
        Value::Object(_) => true,
        Value::Array(items) => items.iter().any(has_object),
        _ => false,
    }
}

fn write_inline(v: &Value, out: &mut String) {
    match v {
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_inline(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

fn write_canonical(v: &Value, depth: usize, out: &mut String) {
    let pad = |d: usize| "  ".repeat(d);
    match v {
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (i, (key, item)) in map.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_canonical(item, depth + 1, out);
                if i + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(depth));
            out.push('}');
        }
        Value::Array(items) if has_object(v) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                write_canonical(item, depth + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(depth));
            out.push(']');
        }
        other => write_inline(other, out),
    }
}

fn vector(v: &[Scalar], len: usize, field: &str) -> Result<DVector<f64>, FileError> {
    if v.len() != len {
        return Err(schema(field, format!("expected {len} entries, found {}", v.len())));
    }
    let vals = v
        .iter()
        .enumerate()
        .map(|(i, s)| s.value(&format!("{field}[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DVector::from_vec(vals))
}

fn matrix(m: &[Vec<Scalar>], n: usize, field: &str) -> Result<DMatrix<f64>, FileError> {
    if m.len() != n {
        return Err(schema(field, format!("expected {n} rows, found {}", m.len())));
    }
    let mut out = DMatrix::zeros(n, n);
    for (i, row) in m.iter().enumerate() {
        let r = vector(row, n, &format!("{field}[{i}]"))?;
        out.set_row(i, &r.transpose());
    }
    Ok(out)
}

fn psd(m: &[Vec<Scalar>], n: usize, field: &str) -> Result<PsdMatrix, FileError> {
    PsdMatrix::new(matrix(m, n, field)?).map_err(|e| schema(field, e.to_string()))
}

fn check_kind(kind: &str, expected: &str) -> Result<(), FileError> {
    if kind != expected {
        return Err(schema("kind", format!("expected {expected:?}, found {kind:?}")));
    }
    Ok(())
}

fn check_count<T>(items: &[T], k: usize, field: &str) -> Result<(), FileError> {
    if items.len() != k {
        return Err(schema(field, format!("expected {k} entries, found {}", items.len())));
    }
    Ok(())
}

impl NormlikeFile {
    pub fn to_instance(&self) -> Result<NormlikeInstance, FileError> {
        check_kind(&self.kind, "normlike")?;
        let (g, k) = (self.g, self.k);
        if g == 0 && k > 0 {
            return Err(schema("k", "k must be 0 when g is 0"));
        }
        check_count(&self.a_mats, k, "A")?;
        check_count(&self.c, k, "c")?;
        let a = self
            .a_mats
            .iter()
            .enumerate()
            .map(|(i, m)| psd(m, g, &format!("A[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let c = self
            .c
            .iter()
            .enumerate()
            .map(|(i, v)| vector(v, g, &format!("c[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let samples = match (&self.a, &self.b, &self.samples) {
            (Some(av), Some(bm), None) => vec![ParamSample::constant(vector(av, g, "a")?, matrix(bm, g, "B")?)],
            (None, None, Some(list)) if !list.is_empty() => list
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let lambda = s
                        .lambda
                        .iter()
                        .enumerate()
                        .map(|(j, v)| v.value(&format!("samples[{i}].lambda[{j}]")))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(ParamSample::new(
                        lambda,
                        vector(&s.a, g, &format!("samples[{i}].a"))?,
                        matrix(&s.b, g, &format!("samples[{i}].B"))?,
                    ))
                })
                .collect::<Result<Vec<_>, FileError>>()?,
            _ => {
                return Err(schema(
                    "samples",
                    "give either both `a` and `B` or a non-empty `samples` list",
                ))
            }
        };
        let kappa = self.kappa.value("kappa")?;
        for (i, ai) in a.iter().enumerate() {
            if ai.rank() == 0 {
                return Err(schema(format!("A[{i}]"), "matrix has rank zero"));
            }
        }
        Ok(NormlikeInstance::new(g, kappa, a, c, samples)?)
    }
}

impl PeriodModelFile {
    pub fn to_model(&self) -> Result<PeriodModel, FileError> {
        check_kind(&self.kind, "period_model")?;
        let (g, k, n) = (self.g, self.k, self.n);
        check_count(&self.delta, g, "delta")?;
        check_count(&self.a_mats, k, "A")?;
        check_count(&self.c, k, "c")?;
        check_count(&self.h_orders, k, "h_orders")?;
        let pol = PolarizationType::new(self.delta.clone())?;
        let a = self
            .a_mats
            .iter()
            .enumerate()
            .map(|(i, m)| psd(m, g, &format!("A[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let c = self
            .c
            .iter()
            .enumerate()
            .map(|(i, v)| vector(v, g, &format!("c[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let mut psi = MatrixPolynomial::zero(g, n);
        for (i, t) in self.psi.iter().enumerate() {
            let field = format!("psi[{i}]");
            check_count(&t.exponents, n, &format!("{field}.exponents"))?;
            let re =
                t.re.as_ref()
                    .map(|m| matrix(m, g, &format!("{field}.re")))
                    .transpose()?
                    .unwrap_or_else(|| DMatrix::zeros(g, g));
            let im =
                t.im.as_ref()
                    .map(|m| matrix(m, g, &format!("{field}.im")))
                    .transpose()?
                    .unwrap_or_else(|| DMatrix::zeros(g, g));
            let coeff = DMatrix::from_fn(g, g, |r, s| Complex::new(re[(r, s)], im[(r, s)]));
            psi.push_term(t.exponents.clone(), coeff)?;
        }
        let mut alpha = VectorPolynomial::zero(g, n);
        for (i, t) in self.alpha.iter().enumerate() {
            let field = format!("alpha[{i}]");
            check_count(&t.exponents, n, &format!("{field}.exponents"))?;
            let re =
                t.re.as_ref()
                    .map(|v| vector(v, g, &format!("{field}.re")))
                    .transpose()?
                    .unwrap_or_else(|| DVector::zeros(g));
            let im =
                t.im.as_ref()
                    .map(|v| vector(v, g, &format!("{field}.im")))
                    .transpose()?
                    .unwrap_or_else(|| DVector::zeros(g));
            let coeff = DVector::from_fn(g, |r, _| Complex::new(re[r], im[r]));
            alpha.push_term(t.exponents.clone(), coeff)?;
        }
        let mut model = PeriodModel::new(pol, n, a, c, psi, alpha, self.h_orders.clone())?;
        if let Some(u) = &self.h_unit {
            model = model.with_h_unit(u.value("h_unit")?)?;
        }
        if let Some(e) = &self.epsilon {
            model = model.with_epsilon(e.value("epsilon")?)?;
        }
        Ok(model)
    }

    /// Grid points of the file, or the origin of the polydisk.
    pub fn grid_points(&self) -> Result<Vec<Vec<Complex<f64>>>, FileError> {
        let Some(grid) = &self.grid else {
            return Ok(vec![vec![Complex::new(0.0, 0.0); self.n]]);
        };
        grid.iter()
            .enumerate()
            .map(|(i, p)| {
                let re = vector(&p.re, self.n, &format!("grid[{i}].re"))?;
                let im = match &p.im {
                    Some(v) => vector(v, self.n, &format!("grid[{i}].im"))?,
                    None => DVector::zeros(self.n),
                };
                Ok(re.iter().zip(im.iter()).map(|(&r, &m)| Complex::new(r, m)).collect())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX: &str = r#"{
  "schema_version": "1",
  "kind": "normlike",
  "g": 1,
  "k": 2,
  "kappa": 1,
  "A": [[[1]], [[1]]],
  "c": [[1], [2]],
  "a": [1],
  "B": [[0]]
}
"#;

    #[test]
    fn parses_and_round_trips() {
        let f = InstanceFile::parse(EX).unwrap();
        assert_eq!(f.to_json(), EX);
        let inst = f.to_instance().unwrap();
        assert!((inst.eval_phi(&[1.0, 1.0], 0).unwrap() - 8.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_forms_survive() {
        let text = EX
            .replace("\"kappa\": 1", "\"kappa\": [3, 2]")
            .replace("[[0]]", "[[0.25]]");
        let f = InstanceFile::parse(&text).unwrap();
        assert_eq!(f.to_json(), text);
        assert_eq!(f.to_instance().unwrap().kappa(), 1.5);
    }

    #[test]
    fn reports_position() {
        let broken = EX.replace("\"g\": 1,", "\"g\": 1");
        match InstanceFile::parse(&broken).unwrap_err() {
            FileError::Parse { line, .. } => assert_eq!(line, 5),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn reports_field_on_shape_error() {
        let bad = EX.replace("[[[1]], [[1]]]", "[[[1]], [[1, 0]]]");
        match InstanceFile::parse(&bad).unwrap().to_instance().unwrap_err() {
            FileError::Schema { field, .. } => assert_eq!(field, "A[1][0]"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn rejects_unknown_version_and_kind() {
        assert!(matches!(
            InstanceFile::parse(&EX.replace("\"1\"", "\"2\"")).unwrap_err(),
            FileError::Schema { .. }
        ));
        assert!(matches!(
            InstanceFile::parse(&EX.replace("\"normlike\"", "\"other\"")).unwrap_err(),
            FileError::Schema { .. }
        ));
    }

    #[test]
    fn ratio_reduces() {
        assert_eq!(Scalar::ratio(4, 2), Scalar::Int(2));
        assert_eq!(Scalar::ratio(3, -6), Scalar::Ratio([-1, 2]));
        assert_eq!(Scalar::ratio(0, 3), Scalar::Int(0));
    }
}
