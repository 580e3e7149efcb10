//! File formats.
//!
//! Matrices are nested arrays of `[re, im]` pairs; a plain number is read as
//! a real entry. CSV files flatten a matrix into `re_ij` / `im_ij` columns.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geodesic::CurveSamples;
use crate::lie::{GroupElement, NULL_SPACE_TOL};
use crate::numerics::{c, CMat};
use crate::quotient::{DiscPoint, DiscSample, DiscTangent, DEFAULT_BOUNDARY_EPS};

/// Serde adapter for `CMat` as `[[[re, im], ...], ...]`.
pub mod matrix_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let v = Value::deserialize(d)?;
        matrix_from_value(&v).map_err(serde::de::Error::custom)
    }
}

pub fn matrix_to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

fn entry(v: &Value) -> Result<num_complex::Complex64> {
    match v {
        Value::Number(x) => Ok(c(x.as_f64().unwrap_or(f64::NAN), 0.0)),
        Value::Array(p) if p.len() == 2 => match (p[0].as_f64(), p[1].as_f64()) {
            (Some(re), Some(im)) => Ok(c(re, im)),
            _ => Err(Error::Parse("matrix entry must be [re, im] numbers".into())),
        },
        _ => Err(Error::Parse(format!("bad matrix entry {v}"))),
    }
}

/// Reads a square matrix from a JSON value: either the nested array itself
/// or an object carrying it under `"matrix"`.
pub fn matrix_from_value(v: &Value) -> Result<CMat> {
    if let Some(inner) = v.get("matrix") {
        return matrix_from_value(inner);
    }
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Parse("matrix must be a JSON array of rows".into()))?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse("empty matrix".into()));
    }
    let mut m = CMat::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Parse("matrix rows must be arrays".into()))?;
        if row.len() != n {
            return Err(Error::NotSquare {
                rows: n,
                cols: row.len(),
            });
        }
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = entry(x)?;
        }
    }
    Ok(m)
}

/// A matrix argument: inline JSON, or the path of a JSON file.
pub fn read_matrix_arg(arg: &str) -> Result<CMat> {
    matrix_from_value(&read_json_arg(arg)?)
}

pub fn read_json_arg(arg: &str) -> Result<Value> {
    let text = arg.trim();
    if text.starts_with('[') || text.starts_with('{') {
        return serde_json::from_str(text).map_err(|e| Error::Parse(format!("matrix JSON: {e}")));
    }
    let body = fs::read_to_string(text).map_err(|e| {
        Error::Parse(format!(
            "{text:?} is neither JSON nor a readable file ({e})"
        ))
    })?;
    serde_json::from_str(&body).map_err(|e| Error::Parse(format!("{text}: {e}")))
}

/// Tolerances that a config file may override.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub eps_boundary: f64,
    pub eps_target: f64,
    pub delta_tie: f64,
    pub null_space_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_boundary: DEFAULT_BOUNDARY_EPS,
            eps_target: crate::cut_locus::DEFAULT_EPS_TARGET,
            delta_tie: 2e-3,
            null_space_tol: NULL_SPACE_TOL,
        }
    }
}

impl Tolerances {
    /// TOML with any subset of the fields, e.g. `eps_target = 1e-7`.
    pub fn from_toml(text: &str) -> Result<Self> {
        let t: Self = toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        for (what, v) in [
            ("eps_boundary", t.eps_boundary),
            ("eps_target", t.eps_target),
            ("delta_tie", t.delta_tie),
            ("null_space_tol", t.null_space_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{what} must be positive")));
            }
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }
}

/// Embedded at the top of every JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub flags: BTreeMap<String, Value>,
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Header {
    pub fn new(command: &str, flags: &impl Serialize, seed: u64, tolerances: Tolerances) -> Self {
        let flags = match serde_json::to_value(flags) {
            Ok(Value::Object(m)) => m.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            flags,
            seed,
            tolerances,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub t: f64,
    #[serde(with = "matrix_serde")]
    pub x: CMat,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub disc: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDocument {
    pub n: usize,
    pub samples: Vec<CurveRecord>,
}

impl CurveDocument {
    pub fn from_samples(s: &CurveSamples) -> Self {
        let samples = s
            .times
            .iter()
            .zip(&s.points)
            .enumerate()
            .map(|(k, (&t, x))| CurveRecord {
                t,
                x: x.matrix().clone(),
                disc: s.disc.as_ref().map(|d| [d[k].x, d[k].y]),
            })
            .collect();
        Self {
            n: s.points.first().map_or(0, GroupElement::n),
            samples,
        }
    }

    pub fn into_samples(self) -> Result<CurveSamples> {
        let (times, points) = self
            .samples
            .into_iter()
            .map(|r| Ok((r.t, GroupElement::new(r.x)?)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        CurveSamples::new(times, points)
    }
}

/// JSON document `{header, ...body}`; `body` must serialize to an object.
pub fn with_header(header: &Header, body: &impl Serialize) -> Result<Value> {
    let mut out = serde_json::Map::new();
    out.insert("header".into(), serde_json::to_value(header)?);
    match serde_json::to_value(body)? {
        Value::Object(m) => out.extend(m),
        other => {
            out.insert("result".into(), other);
        }
    }
    Ok(Value::Object(out))
}

pub fn json_string(v: &Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Reads a curve written by [`curve_json`] or [`curve_csv`].
pub fn read_curve(path: &Path) -> Result<CurveSamples> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(&text)?;
        let doc: CurveDocument = serde_json::from_value(v)?;
        return doc.into_samples();
    }
    read_curve_csv(text.as_bytes())
}

fn matrix_columns(n: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            cols.push(format!("re_{i}{j}"));
            cols.push(format!("im_{i}{j}"));
        }
    }
    cols
}

pub fn curve_csv(s: &CurveSamples) -> Result<String> {
    let n = s.points.first().map_or(0, GroupElement::n);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend(matrix_columns(n));
    if s.disc.is_some() {
        header.extend(["x".into(), "y".into()]);
    }
    w.write_record(&header)?;
    for (k, (t, x)) in s.times.iter().zip(&s.points).enumerate() {
        let mut rec = vec![t.to_string()];
        for z in x.matrix().transpose().iter() {
            rec.push(z.re.to_string());
            rec.push(z.im.to_string());
        }
        if let Some(d) = &s.disc {
            rec.push(d[k].x.to_string());
            rec.push(d[k].y.to_string());
        }
        w.write_record(&rec)?;
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Parse(format!("missing CSV column {name:?}")))
}

fn field(rec: &csv::StringRecord, idx: usize) -> Result<f64> {
    let s = rec.get(idx).unwrap_or("").trim();
    s.parse()
        .map_err(|_| Error::Parse(format!("bad number {s:?} in CSV")))
}

pub fn read_curve_csv(data: &[u8]) -> Result<CurveSamples> {
    let mut r = csv::Reader::from_reader(data);
    let headers = r.headers()?.clone();
    let entries = headers.iter().filter(|h| h.starts_with("re_")).count();
    let n = (entries as f64).sqrt().round() as usize;
    if n == 0 || n * n != entries {
        return Err(Error::Parse("CSV needs n^2 re_ij columns".into()));
    }
    let t_col = column(&headers, "t")?;
    let cols = matrix_columns(n)
        .iter()
        .map(|name| column(&headers, name))
        .collect::<Result<Vec<_>>>()?;
    let mut times = Vec::new();
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        times.push(field(&rec, t_col)?);
        let mut m = CMat::zeros(n, n);
        for k in 0..n * n {
            m[(k / n, k % n)] = c(field(&rec, cols[2 * k])?, field(&rec, cols[2 * k + 1])?);
        }
        points.push(GroupElement::new(m)?);
    }
    CurveSamples::new(times, points)
}

/// Disc curve CSV with columns `t, x, y, vx, vy`.
pub fn disc_curve_csv(curve: &[DiscSample]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "x", "y", "vx", "vy"])?;
    for s in curve {
        w.write_record(
            [s.t, s.point.x, s.point.y, s.velocity.vx, s.velocity.vy].map(|v| v.to_string()),
        )?;
    }
    finish_csv(w)
}

pub fn read_disc_curve_csv(data: &[u8]) -> Result<Vec<DiscSample>> {
    let mut r = csv::Reader::from_reader(data);
    let headers = r.headers()?.clone();
    let idx = ["t", "x", "y", "vx", "vy"]
        .iter()
        .map(|name| column(&headers, name))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v = idx
            .iter()
            .map(|&i| field(&rec, i))
            .collect::<Result<Vec<_>>>()?;
        out.push(DiscSample {
            t: v[0],
            point: DiscPoint::new(v[1], v[2]),
            velocity: DiscTangent::new(v[3], v[4]),
        });
    }
    Ok(out)
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ZERO;

    #[test]
    fn parses_plain_and_complex_entries() {
        let m = read_matrix_arg("[[0,1],[-1,0]]").unwrap();
        assert_eq!(m[(0, 1)], c(1.0, 0.0));
        let m = read_matrix_arg("[[[0,0],[0,1]],[[0,1],[0,0]]]").unwrap();
        assert_eq!(m[(1, 0)], c(0.0, 1.0));
        assert_eq!(m[(0, 0)], ZERO);
        let m = read_matrix_arg(r#"{"n": 2, "matrix": [[1,0],[0,1]]}"#).unwrap();
        assert_eq!(m, CMat::identity(2, 2));
        assert!(read_matrix_arg("[[1,2,3],[4,5,6]]").is_err());
    }

    #[test]
    fn tolerances_partial_override() {
        let t = Tolerances::from_toml("eps_target = 1e-7\n").unwrap();
        assert_eq!(t.eps_target, 1e-7);
        assert_eq!(t.eps_boundary, DEFAULT_BOUNDARY_EPS);
        assert!(Tolerances::from_toml("bogus = 1").is_err());
        assert!(Tolerances::from_toml("delta_tie = -1").is_err());
    }

    #[test]
    fn disc_csv_round_trip() {
        let curve = vec![DiscSample {
            t: 0.5,
            point: DiscPoint::new(0.1, -0.2),
            velocity: DiscTangent::new(0.3, 1e-17),
        }];
        let text = disc_curve_csv(&curve).unwrap();
        assert_eq!(read_disc_curve_csv(text.as_bytes()).unwrap(), curve);
    }
}
