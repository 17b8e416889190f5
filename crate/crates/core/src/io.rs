//! File formats.
//!
//! JSON is canonical; numbers are binary64 written in shortest round-trip
//! form, so `load(save(v)) == v` bit for bit. Complex scalars are `[re, im]`.
//!
//! ```text
//! frame         {"m", "n", "field": "real" | "complex", "columns": [[..], ..]}
//! signal        {"m", "entries": [[re, im], ..]}
//! measurements  {"values": [..], "noise_sigma": optional}
//! matrix        {"m", "rows": [[..], ..]}             (symmetric)
//! witness       {"x": signal, "y": signal, "target": matrix, "residual"}
//! certificate   {"verdict", "method", "det_value", "kernel_dim",
//!                "witness_file", "trials", "violating_set"}
//! ```
//!
//! Real frames may also be CSV: `m` lines of `n` comma-separated values, no
//! header. Files are written in place; concurrent writers are not supported.

use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::algebra::{ComplexSignal, SymmetricLift};
use crate::certify::Certificate;
use crate::error::{Error, Result};
use crate::frames::{ComplexFrame, Frame, RealFrame};
use crate::lift::MeasurementVector;
use crate::witness::WitnessPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatCode {
    Io,
    Json,
    Csv,
    Dimension,
    NonFinite,
    Negative,
    Invalid,
}

impl FormatCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FormatCode::Io => "E_IO",
            FormatCode::Json => "E_JSON",
            FormatCode::Csv => "E_CSV",
            FormatCode::Dimension => "E_DIM",
            FormatCode::NonFinite => "E_NONFINITE",
            FormatCode::Negative => "E_NEGATIVE",
            FormatCode::Invalid => "E_INVALID",
        }
    }
}

/// A malformed or unreadable file. `field` names the offending JSON path.
#[derive(Debug, Clone, PartialEq)]
pub struct FormatError {
    pub code: FormatCode,
    pub field: String,
    pub message: String,
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.code.as_str(), self.field, self.message)
    }
}

impl std::error::Error for FormatError {}

fn err(code: FormatCode, field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Format(FormatError {
        code,
        field: field.into(),
        message: message.into(),
    })
}

/// Re-labels library validation errors raised while building a value from
/// a file.
fn relabel(e: Error, field: &str) -> Error {
    match e {
        Error::Format(_) => e,
        Error::NonFinite(msg) => err(FormatCode::NonFinite, field, msg),
        Error::DimensionMismatch { .. } => err(FormatCode::Dimension, field, e.to_string()),
        other => err(FormatCode::Invalid, field, other.to_string()),
    }
}

// ---------------------------------------------------------------- reading

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| err(FormatCode::Io, path.display().to_string(), e.to_string()))
}

fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| err(FormatCode::Json, "<document>", e.to_string()))
}

fn object<'a>(v: &'a Value, field: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| err(FormatCode::Json, field, "expected an object"))
}

fn get<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| err(FormatCode::Json, key, "missing field"))
}

fn array<'a>(v: &'a Value, field: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| err(FormatCode::Json, field, "expected an array"))
}

fn number(v: &Value, field: &str) -> Result<f64> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| err(FormatCode::NonFinite, field, format!("{n} is not a finite binary64"))),
        Value::Null => Err(err(FormatCode::NonFinite, field, "null where a finite number is required")),
        Value::String(s) if s.parse::<f64>().is_ok_and(|x| !x.is_finite()) => {
            Err(err(FormatCode::NonFinite, field, format!("non-finite value {s:?}")))
        }
        _ => Err(err(FormatCode::Json, field, "expected a number")),
    }
}

fn count(v: &Value, field: &str) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| err(FormatCode::Json, field, "expected a nonnegative integer"))
}

fn complex(v: &Value, field: &str) -> Result<Complex64> {
    let pair = array(v, field)?;
    if pair.len() != 2 {
        return Err(err(FormatCode::Json, field, "complex scalars are [re, im] pairs"));
    }
    Ok(Complex64::new(number(&pair[0], field)?, number(&pair[1], field)?))
}

fn check_len(field: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(err(
            FormatCode::Dimension,
            field,
            format!("expected {expected} entries, found {got}"),
        ));
    }
    Ok(())
}

fn signal_from(v: &Value, field: &str) -> Result<ComplexSignal> {
    let obj = object(v, field)?;
    let m = count(get(obj, "m")?, &format!("{field}.m"))?;
    let entries = array(get(obj, "entries")?, &format!("{field}.entries"))?;
    check_len(&format!("{field}.entries"), m, entries.len())?;
    let values = entries
        .iter()
        .enumerate()
        .map(|(k, e)| complex(e, &format!("{field}.entries[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    ComplexSignal::new(values).map_err(|e| relabel(e, field))
}

fn matrix_from(v: &Value, field: &str) -> Result<SymmetricLift> {
    let obj = object(v, field)?;
    let m = count(get(obj, "m")?, &format!("{field}.m"))?;
    let rows = array(get(obj, "rows")?, &format!("{field}.rows"))?;
    check_len(&format!("{field}.rows"), m, rows.len())?;
    let mut full = DMatrix::zeros(m, m);
    for (i, row) in rows.iter().enumerate() {
        let name = format!("{field}.rows[{i}]");
        let row = array(row, &name)?;
        check_len(&name, m, row.len())?;
        for (j, x) in row.iter().enumerate() {
            full[(i, j)] = number(x, &format!("{name}[{j}]"))?;
        }
    }
    let scale = full.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    for i in 0..m {
        for j in (i + 1)..m {
            if (full[(i, j)] - full[(j, i)]).abs() > 1e-12 * scale {
                return Err(err(
                    FormatCode::Invalid,
                    format!("{field}.rows[{i}][{j}]"),
                    "matrix is not symmetric",
                ));
            }
        }
    }
    if m == 0 {
        return Err(err(FormatCode::Dimension, field, "empty matrix"));
    }
    Ok(SymmetricLift::from_matrix_upper(&full))
}

fn frame_from(v: &Value) -> Result<Frame> {
    let obj = object(v, "<document>")?;
    let m = count(get(obj, "m")?, "m")?;
    let n = count(get(obj, "n")?, "n")?;
    let field = get(obj, "field")?
        .as_str()
        .ok_or_else(|| err(FormatCode::Json, "field", "expected \"real\" or \"complex\""))?;
    let columns = array(get(obj, "columns")?, "columns")?;
    check_len("columns", n, columns.len())?;
    match field {
        "real" => {
            let mut cols = Vec::with_capacity(n);
            for (k, c) in columns.iter().enumerate() {
                let name = format!("columns[{k}]");
                let c = array(c, &name)?;
                check_len(&name, m, c.len())?;
                cols.push(
                    c.iter()
                        .enumerate()
                        .map(|(i, x)| number(x, &format!("{name}[{i}]")))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            if n == 0 {
                return Err(err(FormatCode::Dimension, "columns", "frame has no columns"));
            }
            RealFrame::from_columns(&cols).map(Frame::Real).map_err(|e| relabel(e, "columns"))
        }
        "complex" => {
            let mut cols = Vec::with_capacity(n);
            for (k, c) in columns.iter().enumerate() {
                let name = format!("columns[{k}]");
                let c = array(c, &name)?;
                check_len(&name, m, c.len())?;
                cols.push(
                    c.iter()
                        .enumerate()
                        .map(|(i, x)| complex(x, &format!("{name}[{i}]")))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            if n == 0 {
                return Err(err(FormatCode::Dimension, "columns", "frame has no columns"));
            }
            ComplexFrame::from_columns(&cols).map(Frame::Complex).map_err(|e| relabel(e, "columns"))
        }
        other => Err(err(FormatCode::Invalid, "field", format!("unknown field {other:?}"))),
    }
}

fn frame_from_csv(text: &str) -> Result<Frame> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(FormatCode::Csv, format!("row {i}"), e.to_string()))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let x: f64 = s
                    .parse()
                    .map_err(|_| err(FormatCode::Csv, format!("row {i}, column {j}"), format!("not a number: {s:?}")))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(err(FormatCode::NonFinite, format!("row {i}, column {j}"), format!("non-finite value {s:?}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return Err(err(FormatCode::Dimension, "<csv>", "empty frame"));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    RealFrame::from_rows(m, n, &flat).map(Frame::Real).map_err(|e| relabel(e, "<csv>"))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn load_frame(path: &Path) -> Result<Frame> {
    let text = read_text(path)?;
    if is_csv(path) {
        frame_from_csv(&text)
    } else {
        frame_from(&parse_json(&text)?)
    }
}

/// Loads a frame and requires real entries (a complex-typed file whose
/// imaginary parts are all zero is accepted).
pub fn load_real_frame(path: &Path) -> Result<RealFrame> {
    match load_frame(path)? {
        Frame::Real(f) => Ok(f),
        Frame::Complex(f) => f
            .as_real()
            .ok_or_else(|| err(FormatCode::Invalid, "field", "frame has complex entries; a real frame is required")),
    }
}

pub fn load_signal(path: &Path) -> Result<ComplexSignal> {
    signal_from(&parse_json(&read_text(path)?)?, "<document>")
}

pub fn measurements_from_json(v: &Value) -> Result<MeasurementVector> {
    let obj = object(v, "<document>")?;
    let values = array(get(obj, "values")?, "values")?
        .iter()
        .enumerate()
        .map(|(k, x)| number(x, &format!("values[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    let noise_sigma = match obj.get("noise_sigma") {
        None | Some(Value::Null) => None,
        Some(s) => {
            let s = number(s, "noise_sigma")?;
            if s < 0.0 {
                return Err(err(FormatCode::Negative, "noise_sigma", format!("must be >= 0, got {s}")));
            }
            Some(s)
        }
    };
    if noise_sigma.is_none() {
        if let Some(k) = values.iter().position(|&x| x < 0.0) {
            return Err(err(
                FormatCode::Negative,
                format!("values[{k}]"),
                format!("negative measurement {} without a recorded noise level", values[k]),
            ));
        }
    }
    Ok(MeasurementVector { values, noise_sigma })
}

pub fn load_measurements(path: &Path) -> Result<MeasurementVector> {
    measurements_from_json(&parse_json(&read_text(path)?)?)
}

pub fn load_matrix(path: &Path) -> Result<SymmetricLift> {
    matrix_from(&parse_json(&read_text(path)?)?, "<document>")
}

pub fn load_witness(path: &Path) -> Result<WitnessPair> {
    let v = parse_json(&read_text(path)?)?;
    let obj = object(&v, "<document>")?;
    let x = signal_from(get(obj, "x")?, "x")?;
    let y = signal_from(get(obj, "y")?, "y")?;
    let target = matrix_from(get(obj, "target")?, "target")?;
    if x.m() != y.m() || x.m() != target.m() {
        return Err(err(FormatCode::Dimension, "y", "x, y and target must share one dimension"));
    }
    let residual = number(get(obj, "residual")?, "residual")?;
    Ok(WitnessPair { x, y, target, residual })
}

// ---------------------------------------------------------------- writing

fn finite(x: f64, field: &str) -> Result<Value> {
    if x.is_finite() {
        Ok(json!(x))
    } else {
        Err(err(FormatCode::NonFinite, field, format!("refusing to write {x}")))
    }
}

fn complex_json(z: Complex64, field: &str) -> Result<Value> {
    Ok(Value::Array(vec![finite(z.re, field)?, finite(z.im, field)?]))
}

pub fn signal_to_json(x: &ComplexSignal) -> Result<Value> {
    let entries = x
        .entries()
        .iter()
        .map(|&z| complex_json(z, "entries"))
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({ "m": x.m(), "entries": entries }))
}

pub fn matrix_to_json(q: &SymmetricLift) -> Result<Value> {
    let m = q.m();
    let rows = (0..m)
        .map(|i| (0..m).map(|j| finite(q.get(i, j), "rows")).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({ "m": m, "rows": rows }))
}

pub fn frame_to_json(frame: &Frame) -> Result<Value> {
    let (m, n) = (frame.m(), frame.n());
    let (field, columns): (&str, Vec<Value>) = match frame {
        Frame::Real(f) => (
            "real",
            f.columns()
                .map(|c| c.iter().map(|&x| finite(x, "columns")).collect::<Result<Vec<_>>>().map(Value::Array))
                .collect::<Result<Vec<_>>>()?,
        ),
        Frame::Complex(f) => (
            "complex",
            f.columns()
                .map(|c| c.iter().map(|&z| complex_json(z, "columns")).collect::<Result<Vec<_>>>().map(Value::Array))
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    Ok(json!({ "m": m, "n": n, "field": field, "columns": columns }))
}

pub fn measurements_to_json(b: &MeasurementVector) -> Result<Value> {
    let values = b.values.iter().map(|&x| finite(x, "values")).collect::<Result<Vec<_>>>()?;
    let mut obj = Map::new();
    obj.insert("values".into(), Value::Array(values));
    if let Some(s) = b.noise_sigma {
        obj.insert("noise_sigma".into(), finite(s, "noise_sigma")?);
    }
    Ok(Value::Object(obj))
}

pub fn witness_to_json(w: &WitnessPair) -> Result<Value> {
    Ok(json!({
        "x": signal_to_json(&w.x)?,
        "y": signal_to_json(&w.y)?,
        "target": matrix_to_json(&w.target)?,
        "residual": finite(w.residual, "residual")?,
    }))
}

pub fn certificate_to_json(cert: &Certificate, witness_file: Option<&str>) -> Result<Value> {
    let det = match cert.det_value {
        Some(d) => finite(d, "det_value")?,
        None => Value::Null,
    };
    let trials = match &cert.trials {
        Some(t) => json!({
            "restarts_run": t.restarts_run,
            "best_objective": if t.best_objective.is_finite() { json!(t.best_objective) } else { Value::Null },
            "successful_restart": t.successful_restart,
        }),
        None => Value::Null,
    };
    Ok(json!({
        "verdict": cert.verdict.to_string(),
        "method": cert.method.to_string(),
        "det_value": det,
        "kernel_dim": cert.kernel_dim,
        "witness_file": witness_file,
        "trials": trials,
        "violating_set": cert.violating_set,
    }))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| err(FormatCode::Json, "<document>", e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| err(FormatCode::Io, path.display().to_string(), e.to_string()))
}

/// Writes JSON, or CSV when the path ends in `.csv` (real frames only).
pub fn save_frame(path: &Path, frame: &Frame) -> Result<()> {
    if is_csv(path) {
        let Frame::Real(f) = frame else {
            return Err(err(FormatCode::Invalid, "field", "CSV holds real frames only"));
        };
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for i in 0..f.m() {
            let row: Vec<String> = (0..f.n()).map(|j| f.matrix()[(i, j)]).map(|x| {
                finite(x, "columns").map(|v| v.to_string())
            }).collect::<Result<Vec<_>>>()?;
            writer.write_record(&row).map_err(|e| err(FormatCode::Csv, format!("row {i}"), e.to_string()))?;
        }
        let bytes = writer.into_inner().map_err(|e| err(FormatCode::Io, "<csv>", e.to_string()))?;
        return fs::write(path, bytes).map_err(|e| err(FormatCode::Io, path.display().to_string(), e.to_string()));
    }
    write_json(path, &frame_to_json(frame)?)
}

pub fn save_signal(path: &Path, x: &ComplexSignal) -> Result<()> {
    write_json(path, &signal_to_json(x)?)
}

pub fn save_measurements(path: &Path, b: &MeasurementVector) -> Result<()> {
    write_json(path, &measurements_to_json(b)?)
}

pub fn save_matrix(path: &Path, q: &SymmetricLift) -> Result<()> {
    write_json(path, &matrix_to_json(q)?)
}

pub fn save_witness(path: &Path, w: &WitnessPair) -> Result<()> {
    write_json(path, &witness_to_json(w)?)
}

pub fn save_certificate(path: &Path, cert: &Certificate, witness_file: Option<&str>) -> Result<()> {
    write_json(path, &certificate_to_json(cert, witness_file)?)
}
