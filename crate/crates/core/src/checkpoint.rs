//! Text checkpoints of the full optimization state.
//!
//! ```text
//! LAGRANGEKIT-CKPT v1
//! groups.ball.multiplier = 0x1.0000000000001p+2
//! opt.primal.kind = gd
//! signature = dim=2;ball:inequality:1:lagrangian:dense
//! step = 30
//! version = 1
//! x = 0x1.3333333333333p-1,0x1.999999999999ap-1
//! ```
//!
//! Keys are sorted, floats are hex literals, and lazily created optimizer
//! buffers that do not exist yet are written as `absent`. Learning rates
//! and penalty schedules are configuration and are not stored; optimizer
//! kinds and the scheme are stored and must match on load.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::cmp::{ConstrainedProblem, ConstraintType};
use crate::error::{Error, Result};
use crate::formulations::PenaltyCoefficient;
use crate::hexfloat;
use crate::multipliers::Multiplier;
use crate::optim::{ConstrainedOptimizer, DualBuffers, PrimalBuffers};

pub const MAGIC: &str = "LAGRANGEKIT-CKPT";
pub const VERSION: u32 = 1;
const ABSENT: &str = "absent";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint does not match the problem at `{group}`: expected `{expected}`, found `{found}`")]
    SignatureMismatch {
        group: String,
        expected: String,
        found: String,
    },

    #[error("unsupported checkpoint version `{0}`")]
    UnsupportedVersion(String),

    #[error("corrupt checkpoint section `{section}`: {reason}")]
    Corrupt { section: String, reason: String },

    #[error("checkpoint was written by a different optimizer: `{key}` is `{found}`, expected `{expected}`")]
    OptimizerMismatch {
        key: String,
        expected: String,
        found: String,
    },
}

fn corrupt(section: &str, reason: impl Into<String>) -> CheckpointError {
    CheckpointError::Corrupt {
        section: section.to_owned(),
        reason: reason.into(),
    }
}

fn floats(v: &[f64]) -> String {
    v.iter().map(|x| hexfloat::format(*x)).collect::<Vec<_>>().join(",")
}

fn ints(v: &[u64]) -> String {
    v.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

fn bools(v: &[bool]) -> String {
    v.iter().map(|b| if *b { '1' } else { '0' }).collect()
}

fn primal_entries(opt: &ConstrainedOptimizer, out: &mut BTreeMap<String, String>) {
    let primal = opt.primal();
    out.insert("opt.primal.kind".into(), primal.kind().name().into());
    match primal.kind().name() {
        "momentum" => {
            let velocity = match primal.buffers() {
                Some(PrimalBuffers::Momentum { velocity }) => floats(velocity),
                _ => ABSENT.into(),
            };
            out.insert("opt.primal.velocity".into(), velocity);
        }
        "adam" => {
            let (m, v, t) = match primal.buffers() {
                Some(PrimalBuffers::AdamLike { m, v, t }) => (floats(m), floats(v), t.to_string()),
                _ => (ABSENT.into(), ABSENT.into(), ABSENT.into()),
            };
            out.insert("opt.primal.m".into(), m);
            out.insert("opt.primal.v".into(), v);
            out.insert("opt.primal.t".into(), t);
        }
        _ => {}
    }
}

fn entries(problem: &ConstrainedProblem, opt: &ConstrainedOptimizer, step: u64) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    out.insert("version".into(), VERSION.to_string());
    out.insert("signature".into(), problem.signature());
    out.insert("step".into(), step.to_string());
    out.insert("x".into(), floats(problem.x()));
    for g in problem.groups() {
        let key = |k: &str| format!("groups.{}.{k}", g.id());
        if let Some(m) = g.multiplier() {
            out.insert(key("multiplier"), floats(m.values()));
            if let Some(counts) = m.update_count() {
                out.insert(key("update_count"), ints(counts));
            }
            let buffers = opt.dual_buffers().get(g.id());
            let ema = buffers
                .and_then(|b| b.ema.as_deref())
                .map_or_else(|| ABSENT.into(), floats);
            let seen = buffers
                .filter(|b| !b.seen.is_empty())
                .map_or_else(|| ABSENT.into(), |b| bools(&b.seen));
            out.insert(format!("opt.dual.{}.ema", g.id()), ema);
            out.insert(format!("opt.dual.{}.seen", g.id()), seen);
        }
        if let Some(p) = g.penalty() {
            out.insert(key("penalty"), floats(p.values()));
            let r = g.penalty_reference().map_or_else(|| ABSENT.into(), hexfloat::format);
            out.insert(key("penalty_reference"), r);
        }
    }
    out.insert("opt.scheme".into(), opt.scheme().as_str().into());
    out.insert("opt.reuse_violations".into(), opt.reuses_violations().to_string());
    out.insert("opt.dual.kind".into(), opt.dual().kind().name().into());
    primal_entries(opt, &mut out);
    out
}

/// Serializes the state to checkpoint text.
pub fn to_string(problem: &ConstrainedProblem, optimizer: &ConstrainedOptimizer, step: u64) -> String {
    let mut text = format!("{MAGIC} v{VERSION}\n");
    for (k, v) in entries(problem, optimizer, step) {
        text.push_str(&k);
        text.push_str(" = ");
        text.push_str(&v);
        text.push('\n');
    }
    text
}

/// Writes a checkpoint atomically: the target is either the previous file
/// or the complete new one.
pub fn save(
    problem: &ConstrainedProblem,
    optimizer: &ConstrainedOptimizer,
    step: u64,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(to_string(problem, optimizer, step).as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn parse_entries(text: &str) -> std::result::Result<BTreeMap<String, String>, CheckpointError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| corrupt("header", "empty file"))?;
    let version = header
        .strip_prefix(MAGIC)
        .and_then(|v| v.strip_prefix(' '))
        .ok_or_else(|| corrupt("header", "missing magic line"))?;
    if version != format!("v{VERSION}") {
        return Err(CheckpointError::UnsupportedVersion(version.to_owned()));
    }
    let mut map = BTreeMap::new();
    for line in lines {
        let (k, v) = line
            .split_once(" = ")
            .ok_or_else(|| corrupt(line, "expected `key = value`"))?;
        if map.insert(k.to_owned(), v.to_owned()).is_some() {
            return Err(corrupt(k, "duplicate key"));
        }
    }
    if !text.ends_with('\n') {
        return Err(corrupt(map.keys().last().map_or("header", String::as_str), "truncated"));
    }
    match map.get("version").map(String::as_str) {
        Some(v) if v == VERSION.to_string() => {}
        Some(v) => return Err(CheckpointError::UnsupportedVersion(v.to_owned())),
        None => return Err(corrupt("version", "missing")),
    }
    Ok(map)
}

/// Reports the first signature component that differs, named by group id
/// (or `dim`).
fn signature_mismatch(expected: &str, found: &str) -> Option<CheckpointError> {
    if expected == found {
        return None;
    }
    let split = |s: &str| -> Vec<(String, String)> {
        s.split(';')
            .map(|part| {
                let name = part.split([':', '=']).next().unwrap_or("").to_owned();
                (name, part.to_owned())
            })
            .collect()
    };
    let (e, f) = (split(expected), split(found));
    for (name, part) in &e {
        let other = f.iter().find(|(n, _)| n == name).map(|(_, p)| p.clone());
        if other.as_deref() != Some(part.as_str()) {
            return Some(CheckpointError::SignatureMismatch {
                group: name.clone(),
                expected: part.clone(),
                found: other.unwrap_or_else(|| "missing".into()),
            });
        }
    }
    let (name, part) = f.iter().find(|(n, _)| !e.iter().any(|(m, _)| m == n))?;
    Some(CheckpointError::SignatureMismatch {
        group: name.clone(),
        expected: "missing".into(),
        found: part.clone(),
    })
}

struct Reader {
    map: BTreeMap<String, String>,
}

type CkResult<T> = std::result::Result<T, CheckpointError>;

impl Reader {
    fn take(&mut self, key: &str) -> CkResult<String> {
        self.map.remove(key).ok_or_else(|| corrupt(key, "missing"))
    }

    fn expect(&mut self, key: &str, expected: &str) -> CkResult<()> {
        let found = self.take(key)?;
        if found != expected {
            return Err(CheckpointError::OptimizerMismatch {
                key: key.to_owned(),
                expected: expected.to_owned(),
                found,
            });
        }
        Ok(())
    }

    fn floats(&mut self, key: &str, len: Option<usize>) -> CkResult<Vec<f64>> {
        let raw = self.take(key)?;
        parse_floats(key, &raw, len)
    }

    fn optional_floats(&mut self, key: &str, len: usize) -> CkResult<Option<Vec<f64>>> {
        let raw = self.take(key)?;
        if raw == ABSENT {
            return Ok(None);
        }
        parse_floats(key, &raw, Some(len)).map(Some)
    }
}

fn parse_floats(key: &str, raw: &str, len: Option<usize>) -> CkResult<Vec<f64>> {
    let values = raw
        .split(',')
        .map(|s| hexfloat::parse(s).map_err(|e| corrupt(key, e.to_string())))
        .collect::<CkResult<Vec<f64>>>()?;
    if let Some(n) = len {
        if values.len() != n {
            return Err(corrupt(key, format!("expected {n} values, found {}", values.len())));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(corrupt(key, "non-finite value"));
    }
    Ok(values)
}

fn parse_u64(key: &str, raw: &str) -> CkResult<u64> {
    raw.parse().map_err(|_| corrupt(key, format!("`{raw}` is not a step count")))
}

fn restore(
    text: &str,
    problem: &ConstrainedProblem,
    optimizer: &ConstrainedOptimizer,
) -> CkResult<(ConstrainedProblem, ConstrainedOptimizer, u64)> {
    let mut r = Reader {
        map: parse_entries(text)?,
    };
    r.take("version")?;
    let signature = r.take("signature")?;
    if let Some(e) = signature_mismatch(&problem.signature(), &signature) {
        return Err(e);
    }
    let step_raw = r.take("step")?;
    let step = parse_u64("step", &step_raw)?;

    let mut p = problem.clone();
    let mut opt = optimizer.clone();
    let x = r.floats("x", Some(p.dim()))?;
    p.set_x(x).map_err(|e| corrupt("x", e.to_string()))?;

    r.expect("opt.scheme", opt.scheme().as_str())?;
    r.expect("opt.reuse_violations", &opt.reuses_violations().to_string())?;
    r.expect("opt.dual.kind", opt.dual().kind().name())?;
    r.expect("opt.primal.kind", opt.primal().kind().name())?;

    let mut dual_buffers = BTreeMap::new();
    for g in p.groups_mut() {
        let id = g.id().to_owned();
        let size = g.size();
        let ty = g.constraint_type();
        let key = |k: &str| format!("groups.{id}.{k}");
        if let Some(m) = g.multiplier_mut() {
            let mk = key("multiplier");
            let values = r.floats(&mk, Some(size))?;
            if ty == ConstraintType::Inequality && values.iter().any(|v| *v < 0.0) {
                return Err(corrupt(&mk, "negative inequality multiplier"));
            }
            let counts = if matches!(m, Multiplier::Indexed(_)) {
                let ck = key("update_count");
                let raw = r.take(&ck)?;
                let counts = raw
                    .split(',')
                    .map(|s| parse_u64(&ck, s))
                    .collect::<CkResult<Vec<u64>>>()?;
                if counts.len() != size {
                    return Err(corrupt(&ck, format!("expected {size} values, found {}", counts.len())));
                }
                Some(counts)
            } else {
                None
            };
            m.restore(values, counts);

            let ek = format!("opt.dual.{id}.ema");
            let sk = format!("opt.dual.{id}.seen");
            let ema = r.optional_floats(&ek, size)?;
            let seen_raw = r.take(&sk)?;
            let seen = if seen_raw == ABSENT {
                Vec::new()
            } else {
                let bits = seen_raw
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        _ => Err(corrupt(&sk, "expected 0/1 flags")),
                    })
                    .collect::<CkResult<Vec<bool>>>()?;
                if bits.len() != size {
                    return Err(corrupt(&sk, format!("expected {size} flags, found {}", bits.len())));
                }
                bits
            };
            let buffers = DualBuffers { ema, seen };
            if buffers != DualBuffers::default() {
                dual_buffers.insert(id.clone(), buffers);
            }
        }
        if let Some(len) = g.penalty().map(PenaltyCoefficient::len) {
            let pk = key("penalty");
            let values = r.floats(&pk, Some(len))?;
            let penalty = PenaltyCoefficient::vector(values).map_err(|e| corrupt(&pk, e.to_string()))?;
            g.set_penalty(penalty);
            let rk = key("penalty_reference");
            let raw = r.take(&rk)?;
            let reference = if raw == ABSENT {
                None
            } else {
                Some(parse_floats(&rk, &raw, Some(1))?[0])
            };
            g.set_penalty_reference(reference);
        }
    }
    opt.restore_dual_buffers(dual_buffers);

    let dim = p.dim();
    let primal_buffers = match opt.primal().kind().name() {
        "momentum" => r
            .optional_floats("opt.primal.velocity", dim)?
            .map(|velocity| PrimalBuffers::Momentum { velocity }),
        "adam" => {
            let m = r.optional_floats("opt.primal.m", dim)?;
            let v = r.optional_floats("opt.primal.v", dim)?;
            let t_raw = r.take("opt.primal.t")?;
            match (m, v, t_raw.as_str()) {
                (None, None, ABSENT) => None,
                (Some(m), Some(v), t) => Some(PrimalBuffers::AdamLike {
                    m,
                    v,
                    t: parse_u64("opt.primal.t", t)?,
                }),
                _ => return Err(corrupt("opt.primal", "moment buffers partially present")),
            }
        }
        _ => None,
    };
    opt.primal_mut().restore_buffers(primal_buffers);
    if step > 0 {
        p.seal();
    }

    if let Some(k) = r.map.keys().next() {
        return Err(corrupt(k, "unexpected key"));
    }
    Ok((p, opt, step))
}

/// Restores state from `path` into `problem` and `optimizer` and returns
/// the saved step counter. Nothing is modified unless the whole file
/// validates.
pub fn load(
    path: impl AsRef<Path>,
    problem: &mut ConstrainedProblem,
    optimizer: &mut ConstrainedOptimizer,
) -> Result<u64> {
    let text = fs::read_to_string(path)?;
    from_str(&text, problem, optimizer)
}

/// [`load`] from checkpoint text.
pub fn from_str(
    text: &str,
    problem: &mut ConstrainedProblem,
    optimizer: &mut ConstrainedOptimizer,
) -> Result<u64> {
    let (p, opt, step) = restore(text, problem, optimizer)?;
    *problem = p;
    *optimizer = opt;
    Ok(step)
}
