//! `NSGLS1` snapshot files: one ASCII header line followed by the raw samples
//! as little-endian `f64`, component-major and row-major within a component.

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{Grid, VectorField};

const MAGIC: &str = "NSGLS1";
const MAX_HEADER: usize = 512;

pub fn encode(u: &VectorField) -> Vec<u8> {
    let header = format!(
        "{MAGIC} d={} n={} L={} t={} comps={}\n",
        u.grid.d,
        u.grid.n,
        u.grid.l,
        u.time.unwrap_or(0.0),
        u.comps()
    );
    let mut out = Vec::with_capacity(header.len() + 8 * u.comps() * u.grid.len());
    out.extend_from_slice(header.as_bytes());
    for comp in &u.components {
        for v in comp {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn parse_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Parse { offset, reason: reason.into() }
}

pub fn decode(bytes: &[u8]) -> Result<VectorField> {
    let newline = bytes
        .iter()
        .take(MAX_HEADER)
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_err(bytes.len().min(MAX_HEADER), "header line not terminated"))?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|e| parse_err(e.valid_up_to(), "header is not UTF-8"))?;

    let mut offset = 0;
    let mut fields = Vec::new();
    for token in header.split(' ') {
        fields.push((offset, token));
        offset += token.len() + 1;
    }
    let (_, magic) = fields[0];
    if magic != MAGIC {
        return Err(parse_err(0, format!("bad magic {magic:?}")));
    }
    let expected = ["d", "n", "L", "t", "comps"];
    if fields.len() != expected.len() + 1 {
        return Err(parse_err(newline, format!("expected {} header fields, found {}", expected.len(), fields.len() - 1)));
    }
    let mut values = [""; 5];
    for (slot, (&key, &(pos, token))) in values.iter_mut().zip(expected.iter().zip(&fields[1..])) {
        match token.split_once('=') {
            Some((k, v)) if k == key => *slot = v,
            _ => return Err(parse_err(pos, format!("expected `{key}=...`, found {token:?}"))),
        }
    }
    let value_offset = |i: usize| fields[i + 1].0 + expected[i].len() + 1;
    let int = |i: usize| -> Result<usize> {
        values[i].parse().map_err(|_| parse_err(value_offset(i), format!("bad integer {:?}", values[i])))
    };
    let float = |i: usize| -> Result<f64> {
        values[i].parse().map_err(|_| parse_err(value_offset(i), format!("bad float {:?}", values[i])))
    };
    let d = int(0)?;
    let n = int(1)?;
    let l = float(2)?;
    let t = float(3)?;
    let comps = int(4)?;
    let grid = Grid::new(d, n, l).map_err(|e| parse_err(value_offset(0), e.to_string()))?;
    if comps == 0 {
        return Err(parse_err(value_offset(4), "zero components"));
    }

    let body = &bytes[newline + 1..];
    let want = comps * grid.len() * 8;
    if body.len() != want {
        return Err(parse_err(
            newline + 1 + body.len().min(want),
            format!("expected {want} data bytes, found {}", body.len()),
        ));
    }
    let mut components = Vec::with_capacity(comps);
    for c in 0..comps {
        let chunk = &body[c * grid.len() * 8..(c + 1) * grid.len() * 8];
        let comp: Vec<f64> = chunk
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect();
        if let Some(pos) = comp.iter().position(|v| !v.is_finite()) {
            return Err(parse_err(newline + 1 + (c * grid.len() + pos) * 8, "non-finite sample"));
        }
        components.push(comp);
    }
    Ok(VectorField::new(grid, components)?.with_time(t))
}

pub fn write(path: &Path, u: &VectorField) -> Result<()> {
    std::fs::write(path, encode(u))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<VectorField> {
    decode(&std::fs::read(path)?)
}
