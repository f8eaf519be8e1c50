//! Canonical JSON and CSV emission.
//!
//! Objects are written with sorted keys and floats in C `%.17g` form, so the
//! same run produces byte-identical files. Non-finite floats become `null`.
//! Results above double precision additionally carry the dimensionless
//! vectors as exact hex strings (`delta_hp`, `sigma_hp`, `green_hp`), which
//! are preferred on load.

use std::fs;
use std::io::{self, Write as _};
use std::path::Path;

use num_complex::Complex;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::dmft::{energy_to_physical, green_to_physical, DimensionlessParams, PhysicalParams, SolveResult};
use crate::ipt::MatsubaraVector;
use crate::nevanlinna::{PickEntry, PickReport};
use crate::scalar::{ExtFloat, Real, DOUBLE_BITS};
use crate::{Error, Result};

/// `x` formatted like C's `printf("%.17g", x)`.
pub fn format_g17(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{x:.*}", (16 - exp) as usize)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

struct G17Formatter;

impl serde_json::ser::Formatter for G17Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_g17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Canonical text of any serializable value, newline terminated.
pub fn to_canonical_string<S: Serialize>(value: &S) -> Result<String> {
    // Going through `Value` sorts object keys.
    let value = serde_json::to_value(value).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, G17Formatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Format(e.to_string()))?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(text.as_bytes()).map_err(io_err)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_canonical<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    write_text(path, &to_canonical_string(value)?)
}

fn pairs<T: Real>(v: &MatsubaraVector<T>) -> Value {
    Value::Array(
        v.values
            .iter()
            .map(|z| json!([z.re.to_f64(), z.im.to_f64()]))
            .collect(),
    )
}

fn hex_pairs<T: Real>(v: &MatsubaraVector<T>, bits: u32) -> Value {
    Value::Array(
        v.values
            .iter()
            .map(|z| json!([z.re.to_ext(bits).to_hex_string(), z.im.to_ext(bits).to_hex_string()]))
            .collect(),
    )
}

/// Identifies the run alongside the numerical result.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo {
    pub graph: String,
    pub physical: PhysicalParams,
    pub tol: f64,
    pub mixing: f64,
    pub init: String,
}

/// JSON document for a solve. `delta`, `sigma` and `green` are in physical
/// units; `params.dimensionless` echoes `(t, u, a, b)`.
pub fn result_to_json<T: Real>(info: &RunInfo, r: &SolveResult<T>) -> Value {
    let beta = info.physical.beta;
    let p = &r.params;
    let mut doc = Map::new();
    doc.insert(
        "params".into(),
        json!({
            "graph": info.graph,
            "beta": beta,
            "hopping": info.physical.hopping,
            "repulsion": info.physical.repulsion,
            "n_omega": p.n_omega,
            "tol": info.tol,
            "mixing": info.mixing,
            "init": info.init,
            "dimensionless": { "t": p.t, "u": p.u, "a": p.a, "b": p.b },
        }),
    );
    doc.insert("converged".into(), json!(r.converged));
    doc.insert("iterations".into(), json!(r.iterations));
    doc.insert("residuals".into(), json!(r.residuals));
    doc.insert("admissible".into(), json!(r.admissible));
    doc.insert("left_admissible_at".into(), json!(r.left_admissible_at));
    doc.insert("max_abs_re".into(), json!(r.max_abs_re));
    doc.insert("precision_bits".into(), json!(r.precision_bits));
    doc.insert("delta".into(), pairs(&energy_to_physical(&r.delta, beta)));
    doc.insert("sigma".into(), pairs(&energy_to_physical(&r.sigma, beta)));
    doc.insert("green".into(), pairs(&green_to_physical(&r.green, beta)));
    if r.precision_bits > DOUBLE_BITS {
        let bits = r.precision_bits;
        doc.insert("delta_hp".into(), hex_pairs(&r.delta, bits));
        doc.insert("sigma_hp".into(), hex_pairs(&r.sigma, bits));
        doc.insert("green_hp".into(), hex_pairs(&r.green, bits));
    }
    Value::Object(doc)
}

pub fn emit_result<T: Real>(path: &Path, info: &RunInfo, r: &SolveResult<T>) -> Result<()> {
    write_canonical(path, &result_to_json(info, r))
}

/// A result read back from disk. `extended` is present when the file carries
/// hex data, and is then the authoritative copy.
#[derive(Debug, Clone)]
pub struct StoredResult {
    pub info: RunInfo,
    pub double: SolveResult<f64>,
    pub extended: Option<SolveResult<ExtFloat>>,
}

fn field<'a>(v: &'a Value, key: &str, what: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| Error::Format(format!("{what}: missing field {key:?}")))
}

fn as_f64(v: &Value, what: &str) -> Result<f64> {
    match v {
        Value::Null => Ok(f64::NAN),
        _ => v
            .as_f64()
            .ok_or_else(|| Error::Format(format!("{what}: expected a number"))),
    }
}

fn as_usize(v: &Value, what: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::Format(format!("{what}: expected a non-negative integer")))
}

fn as_bool(v: &Value, what: &str) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| Error::Format(format!("{what}: expected a boolean")))
}

fn as_str<'a>(v: &'a Value, what: &str) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::Format(format!("{what}: expected a string")))
}

fn read_pairs(v: &Value, scale: f64, what: &str) -> Result<MatsubaraVector<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Format(format!("{what}: expected an array")))?;
    let values = arr
        .iter()
        .map(|p| match p.as_array().map(|a| a.as_slice()) {
            Some([re, im]) => Ok(Complex::new(as_f64(re, what)? * scale, as_f64(im, what)? * scale)),
            _ => Err(Error::Format(format!("{what}: expected [re, im] pairs"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Format(format!("{what}: empty vector")));
    }
    Ok(MatsubaraVector::new(values))
}

fn read_hex_pairs(v: &Value, what: &str) -> Result<MatsubaraVector<ExtFloat>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Format(format!("{what}: expected an array")))?;
    let parse = |s: &Value| -> Result<ExtFloat> {
        ExtFloat::from_hex_str(as_str(s, what)?).map_err(|e| Error::Format(format!("{what}: {e}")))
    };
    let values = arr
        .iter()
        .map(|p| match p.as_array().map(|a| a.as_slice()) {
            Some([re, im]) => Ok(Complex::new(parse(re)?, parse(im)?)),
            _ => Err(Error::Format(format!("{what}: expected [re, im] pairs"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MatsubaraVector::new(values))
}

/// Parses a document produced by [`result_to_json`].
pub fn result_from_json(doc: &Value) -> Result<StoredResult> {
    let what = "result";
    let params = field(doc, "params", what)?;
    let dimless = field(params, "dimensionless", what)?;
    let beta = as_f64(field(params, "beta", what)?, what)?;
    let n_omega = as_usize(field(params, "n_omega", what)?, what)?;
    let physical = PhysicalParams {
        beta,
        hopping: as_f64(field(params, "hopping", what)?, what)?,
        repulsion: as_f64(field(params, "repulsion", what)?, what)?,
        n_omega,
    };
    physical.validate().map_err(|e| Error::Format(format!("{what}: {e}")))?;
    let info = RunInfo {
        graph: as_str(field(params, "graph", what)?, what)?.to_string(),
        physical,
        tol: as_f64(field(params, "tol", what)?, what)?,
        mixing: as_f64(field(params, "mixing", what)?, what)?,
        init: as_str(field(params, "init", what)?, what)?.to_string(),
    };
    let dp = DimensionlessParams {
        t: as_f64(field(dimless, "t", what)?, what)?,
        u: as_f64(field(dimless, "u", what)?, what)?,
        a: as_f64(field(dimless, "a", what)?, what)?,
        b: as_f64(field(dimless, "b", what)?, what)?,
        n_omega,
    };
    let residuals = field(doc, "residuals", what)?
        .as_array()
        .ok_or_else(|| Error::Format(format!("{what}: residuals must be an array")))?
        .iter()
        .map(|x| as_f64(x, what))
        .collect::<Result<Vec<_>>>()?;
    let left_admissible_at = match doc.get("left_admissible_at") {
        None | Some(Value::Null) => None,
        Some(v) => Some(as_usize(v, what)?),
    };
    let precision_bits = match doc.get("precision_bits") {
        None => DOUBLE_BITS,
        Some(v) => as_usize(v, what)? as u32,
    };

    let delta = read_pairs(field(doc, "delta", what)?, beta, "delta")?;
    let sigma = read_pairs(field(doc, "sigma", what)?, beta, "sigma")?;
    let green = read_pairs(field(doc, "green", what)?, 1.0 / beta, "green")?;
    for (name, v) in [("delta", &delta), ("sigma", &sigma), ("green", &green)] {
        if v.n_omega() != n_omega {
            return Err(Error::Format(format!("{name}: expected {} entries, found {}", n_omega + 1, v.len())));
        }
    }
    let double = SolveResult {
        params: dp,
        delta,
        sigma,
        green,
        residuals,
        iterations: as_usize(field(doc, "iterations", what)?, what)?,
        converged: as_bool(field(doc, "converged", what)?, what)?,
        admissible: as_bool(field(doc, "admissible", what)?, what)?,
        left_admissible_at,
        max_abs_re: as_f64(field(doc, "max_abs_re", what)?, what)?,
        precision_bits,
    };
    let extended = match (doc.get("delta_hp"), doc.get("sigma_hp"), doc.get("green_hp")) {
        (Some(d), Some(s), Some(g)) => Some(SolveResult {
            params: dp,
            delta: read_hex_pairs(d, "delta_hp")?,
            sigma: read_hex_pairs(s, "sigma_hp")?,
            green: read_hex_pairs(g, "green_hp")?,
            residuals: double.residuals.clone(),
            iterations: double.iterations,
            converged: double.converged,
            admissible: double.admissible,
            left_admissible_at,
            max_abs_re: double.max_abs_re,
            precision_bits,
        }),
        _ => None,
    };
    Ok(StoredResult { info, double, extended })
}

pub fn load_result(path: &Path) -> Result<StoredResult> {
    let text = read_text(path)?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    result_from_json(&doc).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn pick_entry_json(e: &PickEntry) -> Value {
    json!({
        "min_eig": e.min_eig.to_f64(),
        "min_eig_hex": e.min_eig.to_hex_string(),
        "tolerance": e.tolerance.to_f64(),
        "residual": e.residual.to_f64(),
        "psd": e.psd,
        "unique": e.unique,
    })
}

pub fn pick_report_to_json(r: &PickReport) -> Value {
    json!({
        "bits": r.bits,
        "all_psd": r.all_psd(),
        "green": pick_entry_json(&r.green),
        "hybridization": pick_entry_json(&r.delta),
        "self_energy": pick_entry_json(&r.sigma),
    })
}

/// Minimal CSV writer: numbers are written with [`format_g17`], `NaN` as `nan`.
#[derive(Debug, Default, Clone)]
pub struct Csv {
    text: String,
}

pub enum Cell<'a> {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(&'a str),
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        let line: Vec<String> = cells
            .iter()
            .map(|c| match c {
                Cell::Num(x) if x.is_nan() => "nan".to_string(),
                Cell::Num(x) => format_g17(*x),
                Cell::Int(i) => i.to_string(),
                Cell::Bool(b) => b.to_string(),
                Cell::Text(s) => s.to_string(),
            })
            .collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}
