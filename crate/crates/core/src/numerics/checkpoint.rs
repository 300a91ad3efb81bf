//! Line-oriented checkpoint format.
//!
//! ```text
//! entgen-checkpoint 1
//! param <name> <rows> <cols>
//! <row 0 values, space separated>
//! ...
//! end
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a save/load
//! cycle is bit-exact. Parameters appear in registration order.

use std::fmt::Write as _;
use std::path::Path;

use super::matrix::Matrix;
use super::params::ParamStore;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "entgen-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn to_string(store: &ParamStore) -> String {
    let mut out = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n");
    for id in store.ids() {
        let m = store.value(id);
        let _ = writeln!(out, "param {} {} {}", store.name(id), m.rows(), m.cols());
        for r in 0..m.rows() {
            let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out.push_str("end\n");
    out
}

pub fn from_str(text: &str) -> Result<ParamStore> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("empty checkpoint".into()))?;
    let mut head = header.split_whitespace();
    if head.next() != Some(CHECKPOINT_MAGIC) {
        return Err(Error::Checkpoint(format!("bad header {header:?}")));
    }
    let version: u32 = head
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Checkpoint(format!("bad header {header:?}")))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let mut store = ParamStore::new();
    loop {
        let line = lines
            .next()
            .ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        if line == "end" {
            break;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [tag, name, rows, cols] = parts[..] else {
            return Err(Error::Checkpoint(format!("bad parameter line {line:?}")));
        };
        if tag != "param" {
            return Err(Error::Checkpoint(format!("bad parameter line {line:?}")));
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Checkpoint(format!("bad dimension in {line:?}")))
        };
        let (rows, cols) = (parse_dim(rows)?, parse_dim(cols)?);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let row = lines
                .next()
                .ok_or_else(|| Error::Checkpoint(format!("truncated values for {name}")))?;
            for tok in row.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::Checkpoint(format!("bad value {tok:?} in {name}")))?;
                data.push(v);
            }
        }
        let m = Matrix::from_vec(rows, cols, data)
            .map_err(|_| Error::Checkpoint(format!("wrong value count for {name}")))?;
        store.add(name, m)?;
    }
    Ok(store)
}

pub fn save(store: &ParamStore, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(store))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ParamStore> {
    from_str(&std::fs::read_to_string(path)?)
}
