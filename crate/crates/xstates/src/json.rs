//! JSON wire formats for states and invariants.
//!
//! Complex numbers are `[re, im]` pairs. The two state formats are
//!
//! ```text
//! {"n": 2, "components": {"XX": [1.0, 0.0], ...}}     // Bloch expansion
//! {"n": 1, "matrix": [[[re, im], ...], ...]}          // dense matrix
//! ```
//!
//! with Pauli words written as uppercase strings, qubit 1 first. Map keys
//! are emitted in sorted order and floats use the shortest representation
//! that round-trips `f64` exactly, so identical data serializes to
//! identical bytes.

use nalgebra::DMatrix;
use serde_json::{json, Map, Value};

use crate::bloch::{BlochState, C64, DensityMatrix, PauliWord};
use crate::error::{Error, Result};
use crate::geometry::{SectionPoint2, XFiberPoint};
use crate::group::LocalRotation;
use crate::invariants::{Invariants2, QuotientCoords};

fn complex_value(z: C64) -> Value {
    json!([z.re, z.im])
}

fn complex_from(v: &Value, what: &str) -> Result<C64> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::MalformedState(format!("{what}: expected [re, im]")))?;
    let re = arr[0]
        .as_f64()
        .ok_or_else(|| Error::MalformedState(format!("{what}: non-numeric real part")))?;
    let im = arr[1]
        .as_f64()
        .ok_or_else(|| Error::MalformedState(format!("{what}: non-numeric imaginary part")))?;
    Ok(C64::new(re, im))
}

fn get_n(obj: &Map<String, Value>) -> Result<usize> {
    obj.get("n")
        .and_then(Value::as_u64)
        .filter(|n| *n >= 1)
        .map(|n| n as usize)
        .ok_or_else(|| Error::MalformedState("missing or invalid \"n\"".into()))
}

pub fn bloch_to_value(b: &BlochState) -> Value {
    let mut comps = Map::new();
    for (w, v) in b.components() {
        comps.insert(w.to_string(), complex_value(*v));
    }
    json!({"n": b.n(), "components": Value::Object(comps)})
}

pub fn bloch_from_value(v: &Value) -> Result<BlochState> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::MalformedState("expected a JSON object".into()))?;
    let n = get_n(obj)?;
    let comps = obj
        .get("components")
        .and_then(Value::as_object)
        .ok_or_else(|| Error::MalformedState("missing \"components\" object".into()))?;
    let mut b = BlochState::new(n)?;
    for (key, val) in comps {
        let word = PauliWord::parse(key)?;
        b.insert(word, complex_from(val, key)?)?;
    }
    Ok(b)
}

pub fn density_to_value(d: &DensityMatrix) -> Value {
    let rows: Vec<Value> = (0..d.dim())
        .map(|r| {
            Value::Array(
                (0..d.dim())
                    .map(|c| complex_value(d.matrix()[(r, c)]))
                    .collect(),
            )
        })
        .collect();
    json!({"n": d.n(), "matrix": Value::Array(rows)})
}

pub fn density_from_value(v: &Value) -> Result<DensityMatrix> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::MalformedState("expected a JSON object".into()))?;
    let n = get_n(obj)?;
    let dim = 1usize << n;
    let rows = obj
        .get("matrix")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::MalformedState("missing \"matrix\" array".into()))?;
    if rows.len() != dim {
        return Err(Error::MalformedState(format!(
            "expected {dim} rows, got {}",
            rows.len()
        )));
    }
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for (r, row) in rows.iter().enumerate() {
        let cells = row
            .as_array()
            .filter(|a| a.len() == dim)
            .ok_or_else(|| Error::MalformedState(format!("row {r}: expected {dim} entries")))?;
        for (c, cell) in cells.iter().enumerate() {
            m[(r, c)] = complex_from(cell, &format!("entry ({r},{c})"))?;
        }
    }
    DensityMatrix::new(n, m)
}

/// Either state format, detected by its fields.
pub enum StateValue {
    Bloch(BlochState),
    Density(DensityMatrix),
}

pub fn state_from_value(v: &Value) -> Result<StateValue> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::MalformedState("expected a JSON object".into()))?;
    if obj.contains_key("components") {
        Ok(StateValue::Bloch(bloch_from_value(v)?))
    } else if obj.contains_key("matrix") {
        Ok(StateValue::Density(density_from_value(v)?))
    } else {
        Err(Error::MalformedState(
            "expected \"components\" or \"matrix\"".into(),
        ))
    }
}

/// Any state value as a Bloch expansion.
pub fn state_as_bloch(v: &Value) -> Result<BlochState> {
    match state_from_value(v)? {
        StateValue::Bloch(b) => Ok(b),
        StateValue::Density(d) => crate::bloch::to_bloch(&d),
    }
}

pub fn section_to_value(s: &SectionPoint2) -> Value {
    json!({
        "x": complex_value(s.x),
        "y": complex_value(s.y),
        "lambda": [
            complex_value(s.lambda[0]),
            complex_value(s.lambda[1]),
            complex_value(s.lambda[2]),
        ],
    })
}

pub fn section_from_value(v: &Value) -> Result<SectionPoint2> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::MalformedState("expected a JSON object".into()))?;
    let x = complex_from(
        obj.get("x")
            .ok_or_else(|| Error::MalformedState("missing \"x\"".into()))?,
        "x",
    )?;
    let y = complex_from(
        obj.get("y")
            .ok_or_else(|| Error::MalformedState("missing \"y\"".into()))?,
        "y",
    )?;
    let lam = obj
        .get("lambda")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 3)
        .ok_or_else(|| Error::MalformedState("missing \"lambda\" triple".into()))?;
    Ok(SectionPoint2::new(
        x,
        y,
        [
            complex_from(&lam[0], "lambda[0]")?,
            complex_from(&lam[1], "lambda[1]")?,
            complex_from(&lam[2], "lambda[2]")?,
        ],
    ))
}

pub fn rotation_to_value(g: &LocalRotation) -> Value {
    let blocks: Vec<Value> = g
        .blocks()
        .iter()
        .map(|b| {
            Value::Array(
                (0..3)
                    .map(|r| {
                        Value::Array((0..3).map(|c| complex_value(b[(r, c)])).collect())
                    })
                    .collect(),
            )
        })
        .collect();
    Value::Array(blocks)
}

pub fn invariants_to_value(inv: &Invariants2) -> Value {
    json!({"p": inv.p.iter().map(|z| complex_value(*z)).collect::<Vec<_>>()})
}

pub fn quotient_to_value(q: &QuotientCoords) -> Value {
    let list = |v: &[C64]| -> Value { Value::Array(v.iter().map(|z| complex_value(*z)).collect()) };
    json!({
        "quotient": {
            "t_tilde": list(&q.t_tilde),
            "delta_tilde": list(&q.delta_tilde),
            "s_tilde": list(&q.s_tilde),
            "v_tilde": list(&q.v_tilde),
            "eta_1": complex_value(q.eta_1),
            "eta_n": complex_value(q.eta_n),
        }
    })
}

/// Fiber points travel as Bloch states restricted to admissible words.
pub fn fiber_from_value(v: &Value) -> Result<XFiberPoint> {
    let b = state_as_bloch(v)?;
    XFiberPoint::from_bloch_state(&b, 1e-12)
}
