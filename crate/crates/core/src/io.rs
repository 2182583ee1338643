//! JSON protocol files.
//!
//! Layout:
//!
//! ```text
//! meta         {name, beta, seed}
//! systems      {label: dim, ...}            A, M, K, then bath registers
//! hamiltonians {"A@0".."A@4", "M+K", bath terms keyed by "+"-joined labels}
//! states       {rho0_A, rho0_M}
//! unitaries    {U, F: [circuit; |K|], V: circuit}
//! pointer      {type: luders, effects} | {type: nuclear, effects, prepared}
//!              | {type: kraus, operations}
//! ```
//!
//! A matrix is an array of rows of `[re, im]` pairs. A circuit is either the
//! token `"identity"`, a matrix (on `B1 registers (x) A` for `F`, on
//! `M (x) K (x) B2 registers` for `V`) or `{"gates": [...]}` with gates
//! `{"unitary": {"targets": [...], "matrix": ...}}` and `{"swap": [a, b]}`.

use indexmap::IndexMap;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::operator::{Matrix, Operator, SystemLabel, C64};
use crate::protocol::{Bath, PointerSpec, ProtocolSpec, A, B1_PREFIX, B2_PREFIX, K, M};
use crate::state::{Circuit, Gate};

fn fmt_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

pub fn matrix_to_json(m: &Matrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| {
                Value::Array(
                    (0..m.ncols())
                        .map(|j| json!([m[(i, j)].re, m[(i, j)].im]))
                        .collect(),
                )
            })
            .collect(),
    )
}

pub fn matrix_from_json(v: &Value, at: &str) -> Result<Matrix> {
    let rows = match v.as_array() {
        Some(r) => r,
        None => return fmt_err(format!("{at}: expected an array of rows")),
    };
    let n = rows.len();
    let mut m = Matrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let row = match row.as_array() {
            Some(r) if r.len() == n => r,
            _ => return fmt_err(format!("{at}: row {i} is not a length-{n} array")),
        };
        for (j, z) in row.iter().enumerate() {
            let pair = z.as_array().filter(|p| p.len() == 2);
            let parts = pair.and_then(|p| Some((p[0].as_f64()?, p[1].as_f64()?)));
            match parts {
                Some((re, im)) => m[(i, j)] = C64::new(re, im),
                None => return fmt_err(format!("{at}[{i}][{j}]: expected [re, im]")),
            }
        }
    }
    Ok(m)
}

fn op_json(op: &Operator) -> Value {
    matrix_to_json(op.matrix())
}

fn circuit_json(c: &Circuit) -> Value {
    if c.is_identity() {
        return json!("identity");
    }
    let gates: Vec<Value> = c
        .gates
        .iter()
        .map(|g| match g {
            Gate::Unitary(u) => json!({"unitary": {"targets": u.names(), "matrix": op_json(u)}}),
            Gate::Swap(a, b) => json!({"swap": [a, b]}),
        })
        .collect();
    json!({ "gates": gates })
}

fn bath_terms(bath: &Bath, into: &mut Map<String, Value>) {
    for t in &bath.terms {
        into.insert(t.names().join("+"), op_json(t));
    }
}

/// Serializes a protocol.
pub fn to_json(spec: &ProtocolSpec) -> Value {
    let mut systems = Map::new();
    for l in [spec.a_label(), spec.m_label(), spec.k_label()]
        .iter()
        .chain(&spec.bath1.registers)
        .chain(&spec.bath2.registers)
    {
        systems.insert(l.name.clone(), json!(l.dim));
    }
    let mut hams = Map::new();
    for (t, h) in spec.h_a.iter().enumerate() {
        hams.insert(format!("{A}@{t}"), op_json(h));
    }
    hams.insert(spec.h_mk.names().join("+"), op_json(&spec.h_mk));
    bath_terms(&spec.bath1, &mut hams);
    bath_terms(&spec.bath2, &mut hams);
    let pointer = match &spec.pointer {
        PointerSpec::Luders { effects } => json!({
            "type": "luders",
            "effects": effects.iter().map(op_json).collect::<Vec<_>>(),
        }),
        PointerSpec::Nuclear { effects, prepared } => json!({
            "type": "nuclear",
            "effects": effects.iter().map(op_json).collect::<Vec<_>>(),
            "prepared": prepared.iter().map(op_json).collect::<Vec<_>>(),
        }),
        PointerSpec::Kraus { operations } => json!({
            "type": "kraus",
            "operations": operations
                .iter()
                .map(|ks| ks.iter().map(op_json).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        }),
    };
    json!({
        "meta": {"name": spec.name, "beta": spec.beta, "seed": spec.seed},
        "systems": systems,
        "hamiltonians": hams,
        "states": {"rho0_A": op_json(&spec.rho0_a), "rho0_M": op_json(&spec.rho0_m)},
        "unitaries": {
            "U": op_json(&spec.u),
            "F": spec.feedback.iter().map(circuit_json).collect::<Vec<_>>(),
            "V": circuit_json(&spec.erasure),
        },
        "pointer": pointer,
    })
}

pub fn to_string_pretty(spec: &ProtocolSpec) -> String {
    serde_json::to_string_pretty(&to_json(spec)).expect("json values serialize")
}

struct Reader {
    dims: IndexMap<String, usize>,
}

impl Reader {
    fn labels(&self, names: &[&str], at: &str) -> Result<Vec<SystemLabel>> {
        names
            .iter()
            .map(|n| match self.dims.get(*n) {
                Some(&d) => Ok(SystemLabel::new(*n, d)),
                None => fmt_err(format!("{at}: system {n} is not declared")),
            })
            .collect()
    }

    fn op(&self, v: &Value, names: &[&str], at: &str) -> Result<Operator> {
        let labels = self.labels(names, at)?;
        let m = matrix_from_json(v, at)?;
        Operator::new(labels, m).map_err(|e| Error::Format(format!("{at}: {e}")))
    }

    fn circuit(&self, v: &Value, dense_on: &[&str], at: &str) -> Result<Circuit> {
        if v.as_str() == Some("identity") {
            return Ok(Circuit::identity());
        }
        if v.is_array() {
            return Ok(Circuit::single(self.op(v, dense_on, at)?));
        }
        let gates = match v.get("gates").and_then(Value::as_array) {
            Some(g) => g,
            None => return fmt_err(format!("{at}: expected \"identity\", a matrix or {{\"gates\": [...]}}")),
        };
        let mut c = Circuit::identity();
        for (i, g) in gates.iter().enumerate() {
            let gat = format!("{at}.gates[{i}]");
            if let Some(u) = g.get("unitary") {
                let targets: Vec<&str> = match u.get("targets").and_then(Value::as_array) {
                    Some(t) => t.iter().filter_map(Value::as_str).collect(),
                    None => return fmt_err(format!("{gat}: missing targets")),
                };
                let m = u.get("matrix").unwrap_or(&Value::Null);
                c = c.then(Gate::Unitary(self.op(m, &targets, &gat)?));
            } else if let Some(pair) = g.get("swap").and_then(Value::as_array) {
                match (pair.first().and_then(Value::as_str), pair.get(1).and_then(Value::as_str)) {
                    (Some(a), Some(b)) if pair.len() == 2 => {
                        c = c.then(Gate::Swap(a.into(), b.into()));
                    }
                    _ => return fmt_err(format!("{gat}: swap takes two labels")),
                }
            } else {
                return fmt_err(format!("{gat}: unknown gate"));
            }
        }
        Ok(c)
    }
}

fn section<'a>(v: &'a Value, key: &str) -> Result<&'a Map<String, Value>> {
    match v.get(key).and_then(Value::as_object) {
        Some(m) => Ok(m),
        None => fmt_err(format!("missing section {key}")),
    }
}

fn field<'a>(m: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a Value> {
    match m.get(key) {
        Some(v) => Ok(v),
        None => fmt_err(format!("{at}: missing {key}")),
    }
}

fn list<'a>(v: &'a Value, at: &str) -> Result<&'a Vec<Value>> {
    match v.as_array() {
        Some(a) => Ok(a),
        None => fmt_err(format!("{at}: expected an array")),
    }
}

/// Parses a protocol and re-validates it.
pub fn from_json(v: &Value) -> Result<ProtocolSpec> {
    let meta = section(v, "meta")?;
    let beta = match field(meta, "beta", "meta")?.as_f64() {
        Some(b) => b,
        None => return fmt_err("meta.beta: expected a number"),
    };
    let seed = meta.get("seed").and_then(Value::as_u64);
    let name = meta.get("name").and_then(Value::as_str).unwrap_or("protocol").to_string();

    let mut dims = IndexMap::new();
    for (k, d) in section(v, "systems")? {
        match d.as_u64() {
            Some(d) if d > 0 => {
                dims.insert(k.clone(), d as usize);
            }
            _ => return fmt_err(format!("systems.{k}: expected a positive dimension")),
        }
    }
    for req in [A, M, K] {
        if !dims.contains_key(req) {
            return fmt_err(format!("systems: missing {req}"));
        }
    }
    let r = Reader { dims };

    let hams = section(v, "hamiltonians")?;
    let mut h_a = Vec::with_capacity(5);
    for t in 0..5 {
        let key = format!("{A}@{t}");
        h_a.push(r.op(field(hams, &key, "hamiltonians")?, &[A], &format!("hamiltonians.{key}"))?);
    }
    let mk_key = format!("{M}+{K}");
    let h_mk = r.op(field(hams, &mk_key, "hamiltonians")?, &[M, K], &format!("hamiltonians.{mk_key}"))?;
    let (mut bath1, mut bath2) = (Bath::empty(), Bath::empty());
    for (key, m) in hams {
        if key == &mk_key || key.starts_with(&format!("{A}@")) {
            continue;
        }
        let names: Vec<&str> = key.split('+').collect();
        let term = r.op(m, &names, &format!("hamiltonians.{key}"))?;
        if names.iter().all(|n| n.starts_with(B1_PREFIX)) {
            bath1.add(term);
        } else if names.iter().all(|n| n.starts_with(B2_PREFIX)) {
            bath2.add(term);
        } else {
            return fmt_err(format!("hamiltonians.{key}: bath terms act on B1* or B2* registers only"));
        }
    }

    let states = section(v, "states")?;
    let rho0_a = r.op(field(states, "rho0_A", "states")?, &[A], "states.rho0_A")?;
    let rho0_m = r.op(field(states, "rho0_M", "states")?, &[M], "states.rho0_M")?;

    let unitaries = section(v, "unitaries")?;
    let u = r.op(field(unitaries, "U", "unitaries")?, &[A, M], "unitaries.U")?;
    let f_on: Vec<&str> = bath1.names().into_iter().chain([A]).collect();
    let feedback = list(field(unitaries, "F", "unitaries")?, "unitaries.F")?
        .iter()
        .enumerate()
        .map(|(k, c)| r.circuit(c, &f_on, &format!("unitaries.F[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    let v_on: Vec<&str> = [M, K].into_iter().chain(bath2.names()).collect();
    let erasure = r.circuit(field(unitaries, "V", "unitaries")?, &v_on, "unitaries.V")?;

    let p = section(v, "pointer")?;
    let ops = |key: &str| -> Result<Vec<Operator>> {
        list(field(p, key, "pointer")?, &format!("pointer.{key}"))?
            .iter()
            .enumerate()
            .map(|(i, m)| r.op(m, &[M], &format!("pointer.{key}[{i}]")))
            .collect()
    };
    let pointer = match p.get("type").and_then(Value::as_str) {
        Some("luders") => PointerSpec::Luders { effects: ops("effects")? },
        Some("nuclear") => PointerSpec::Nuclear {
            effects: ops("effects")?,
            prepared: ops("prepared")?,
        },
        Some("kraus") => {
            let operations = list(field(p, "operations", "pointer")?, "pointer.operations")?
                .iter()
                .enumerate()
                .map(|(k, ks)| {
                    list(ks, &format!("pointer.operations[{k}]"))?
                        .iter()
                        .enumerate()
                        .map(|(j, m)| r.op(m, &[M], &format!("pointer.operations[{k}][{j}]")))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            PointerSpec::Kraus { operations }
        }
        other => return fmt_err(format!("pointer.type: unknown pointer type {other:?}")),
    };
    if r.dims[K] != pointer.n_outcomes() {
        return fmt_err(format!(
            "systems.K: dimension {} differs from the {} pointer outcomes",
            r.dims[K],
            pointer.n_outcomes()
        ));
    }

    Ok(ProtocolSpec {
        name,
        seed,
        beta,
        h_a,
        h_mk,
        bath1,
        bath2,
        rho0_a,
        rho0_m,
        u,
        pointer,
        feedback,
        erasure,
    })
}

/// Parses without validating the physics.
pub fn parse_str(s: &str) -> Result<ProtocolSpec> {
    from_json(&serde_json::from_str(s)?)
}

/// Parses and validates.
pub fn load_str(s: &str) -> Result<ProtocolSpec> {
    let spec = parse_str(s)?;
    spec.validate()?;
    Ok(spec)
}

pub fn load_file(path: &std::path::Path) -> Result<ProtocolSpec> {
    load_str(&std::fs::read_to_string(path)?)
}
