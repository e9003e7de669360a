//! Binary field grids: one ASCII header line
//! `heatfield 1 nx ny x0 y0 dx dy t k` followed by `nx·ny` little-endian `f64`
//! values, row-major by `y` then `x`.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use heatcloak_core::{vec2, FieldGrid};

const MAGIC: &str = "heatfield";
const VERSION: u32 = 1;

/// Serialized bytes of `grid`; `k` is recorded for provenance.
pub fn encode(grid: &FieldGrid, k: f64) -> Vec<u8> {
    let header = format!(
        "{MAGIC} {VERSION} {} {} {} {} {} {} {} {}\n",
        grid.nx, grid.ny, grid.origin.x, grid.origin.y, grid.dx, grid.dy, grid.time, k
    );
    let mut out = Vec::with_capacity(header.len() + 8 * grid.values.len());
    out.extend_from_slice(header.as_bytes());
    for v in &grid.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Inverse of [`encode`]: the grid and its diffusivity.
pub fn decode(bytes: &[u8]) -> Result<(FieldGrid, f64)> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .context("missing header line")?;
    let header = std::str::from_utf8(&bytes[..end]).context("header is not UTF-8")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.first() != Some(&MAGIC) {
        bail!("bad magic: expected '{MAGIC}'");
    }
    if fields.len() != 10 {
        bail!("header has {} fields, expected 10", fields.len());
    }
    let version: u32 = fields[1].parse().context("bad version")?;
    if version != VERSION {
        bail!("unsupported version {version}");
    }
    let nx: usize = fields[2].parse().context("bad nx")?;
    let ny: usize = fields[3].parse().context("bad ny")?;
    let num = |i: usize, name: &str| -> Result<f64> { fields[i].parse().with_context(|| format!("bad {name}")) };
    let (x0, y0, dx, dy, t, k) = (num(4, "x0")?, num(5, "y0")?, num(6, "dx")?, num(7, "dy")?, num(8, "t")?, num(9, "k")?);
    let payload = &bytes[end + 1..];
    let expected = nx.checked_mul(ny).and_then(|n| n.checked_mul(8)).context("grid size overflows")?;
    if payload.len() != expected {
        bail!("payload has {} bytes, expected {expected} for a {nx}x{ny} grid", payload.len());
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((FieldGrid { origin: vec2(x0, y0), nx, ny, dx, dy, values, time: t }, k))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_field_grid(grid: &FieldGrid, k: f64, path: &Path) -> Result<()> {
    write_atomic(path, &encode(grid, k))
}

pub fn read_field_grid(path: &Path) -> Result<(FieldGrid, f64)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}
