//! Plain-text policy files.
//!
//! ```text
//! # qaoi-policy v1
//! # config_hash 3f2a9c0d11e4b7a8
//! # dims delta_max=400 bucket=10 err_states=1 query_states=40 cost=QAPA
//! # columns index age tokens err_state query_state action value
//! 0 1 0 0 0 0 4.25
//! ...
//! ```
//!
//! One line per state in canonical index order, fields separated by a single
//! space. `action` is 0 (silent) or 1 (transmit). The `value` column is
//! optional and, when present, holds the shortest decimal that reads back to
//! the identical `f64`. Lines end with `\n`.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::model::{Action, MdpModel};
use crate::solver::{Policy, ValueFunction};

pub const MAGIC: &str = "# qaoi-policy v1";

#[derive(Debug, Error)]
pub enum PolicyIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("policy was computed for config {found}, expected {expected}")]
    HashMismatch { expected: String, found: String },
    #[error("dimension header `{found}` does not match the model (`{expected}`)")]
    DimensionMismatch { expected: String, found: String },
}

fn dims_line(model: &MdpModel) -> String {
    let cfg = model.config();
    format!(
        "# dims delta_max={} bucket={} err_states={} query_states={} cost={}",
        cfg.delta_max,
        cfg.bucket_size,
        cfg.error_chain.n_states(),
        cfg.query_chain.n_states(),
        cfg.cost_kind.label()
    )
}

pub fn write_policy<W: Write>(
    mut out: W,
    model: &MdpModel,
    policy: &Policy,
    value: Option<&ValueFunction>,
) -> Result<(), PolicyIoError> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "# config_hash {}", model.config().config_hash())?;
    writeln!(out, "{}", dims_line(model))?;
    let suffix = if value.is_some() { " value" } else { "" };
    writeln!(out, "# columns index age tokens err_state query_state action{suffix}")?;
    for i in 0..model.n_states() {
        let s = model.state_at(i);
        write!(out, "{i} {} {} {} {} {}", s.age, s.tokens, s.err_state, s.query_state, policy.action(i).as_u8())?;
        match value {
            Some(v) => writeln!(out, " {:?}", v.get(i))?,
            None => writeln!(out)?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a policy written for `model`, checking the config hash, the
/// dimensions and every state column.
pub fn read_policy<R: BufRead>(input: R, model: &MdpModel) -> Result<(Policy, Option<ValueFunction>), PolicyIoError> {
    let mut lines = input.lines().enumerate();
    let mut header = |expect: &str| -> Result<String, PolicyIoError> {
        match lines.next() {
            Some((n, line)) => {
                let line = line?;
                if line.starts_with(expect) {
                    Ok(line)
                } else {
                    Err(PolicyIoError::Format { line: n + 1, reason: format!("expected `{expect}`") })
                }
            }
            None => Err(PolicyIoError::Format { line: 0, reason: "truncated header".into() }),
        }
    };
    header(MAGIC)?;
    let hash_line = header("# config_hash ")?;
    let found = hash_line["# config_hash ".len()..].trim().to_string();
    let expected = model.config().config_hash();
    if found != expected {
        return Err(PolicyIoError::HashMismatch { expected, found });
    }
    let dims = header("# dims ")?;
    let expected_dims = dims_line(model);
    if dims.trim_end() != expected_dims {
        return Err(PolicyIoError::DimensionMismatch { expected: expected_dims, found: dims });
    }
    let columns = header("# columns ")?;
    let with_value = match columns.trim_end() {
        "# columns index age tokens err_state query_state action" => false,
        "# columns index age tokens err_state query_state action value" => true,
        _ => return Err(PolicyIoError::Format { line: 4, reason: "unknown column list".into() }),
    };
    let n_fields = if with_value { 7 } else { 6 };

    let n = model.n_states();
    let mut actions = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(if with_value { n } else { 0 });
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let bad = |reason: String| PolicyIoError::Format { line: lineno, reason };
        let fields: Vec<&str> = line.split(' ').collect();
        if fields.len() != n_fields {
            return Err(bad(format!("expected {n_fields} fields, found {}", fields.len())));
        }
        let ints: Vec<u64> = fields[..6]
            .iter()
            .map(|f| f.parse::<u64>().map_err(|e| bad(format!("`{f}`: {e}"))))
            .collect::<Result<_, _>>()?;
        let i = actions.len();
        if ints[0] != i as u64 || i >= n {
            return Err(bad(format!("expected state index {i}")));
        }
        let s = model.state_at(i);
        if [s.age as u64, s.tokens as u64, s.err_state as u64, s.query_state as u64] != ints[1..5] {
            return Err(bad(format!("state columns do not match index {i} ({s})")));
        }
        let action = u8::try_from(ints[5]).ok().and_then(Action::from_u8).ok_or_else(|| bad("action must be 0 or 1".into()))?;
        if !model.is_admissible(i, action) {
            return Err(bad("transmit with an empty bucket".into()));
        }
        actions.push(action);
        if with_value {
            let v: f64 = fields[6].parse().map_err(|e| bad(format!("`{}`: {e}", fields[6])))?;
            values.push(v);
        }
    }
    if actions.len() != n {
        return Err(PolicyIoError::Format { line: actions.len() + 4, reason: format!("expected {n} states") });
    }
    let policy = Policy::from_actions(model, actions).expect("checked line by line");
    Ok((policy, with_value.then(|| ValueFunction::new(values))))
}
