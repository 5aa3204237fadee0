//! Snapshot and trace files.
//!
//! Raw snapshots: `QSTR`, version `u32`, then `J, K, M, m` as `u64`, then
//! `(re, im)` pairs as little-endian `f64`, row-major over `(j, k)`. CSV
//! output prints 6 significant digits; the raw format is the one to diff.

use crate::error::{HarnessError, Result};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use schrostrip::mesh::Mesh2d;
use schrostrip::splitting::TraceRecord;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

pub const RAW_MAGIC: &[u8; 4] = b"QSTR";
pub const RAW_VERSION: u32 = 1;
pub const RAW_HEADER_LEN: usize = 4 + 4 + 4 * 8;

/// Identification stored with a raw snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotMeta {
    pub j: usize,
    pub k: usize,
    pub m_total: usize,
    pub m: usize,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| HarnessError::io(path, e))?))
}

pub fn write_raw(path: &Path, psi: &Array2<C64>, meta: SnapshotMeta) -> Result<()> {
    if psi.dim() != (meta.j + 1, meta.k + 1) {
        return Err(HarnessError::Format {
            path: path.display().to_string(),
            reason: format!("field shape {:?} does not match J = {}, K = {}", psi.dim(), meta.j, meta.k),
        });
    }
    let mut buf = Vec::with_capacity(RAW_HEADER_LEN + 16 * psi.len());
    buf.extend_from_slice(RAW_MAGIC);
    buf.extend_from_slice(&RAW_VERSION.to_le_bytes());
    for v in [meta.j, meta.k, meta.m_total, meta.m] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for v in psi.iter() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    let mut w = create(path)?;
    w.write_all(&buf).and_then(|_| w.flush()).map_err(|e| HarnessError::io(path, e))
}

pub fn read_raw(path: &Path) -> Result<(Array2<C64>, SnapshotMeta)> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| HarnessError::io(path, e))?;
    let bad = |reason: &str| HarnessError::Format {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    if bytes.len() < RAW_HEADER_LEN || &bytes[..4] != RAW_MAGIC {
        return Err(bad("missing QSTR header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != RAW_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().expect("8 bytes")) as usize;
    let meta = SnapshotMeta {
        j: word(0),
        k: word(1),
        m_total: word(2),
        m: word(3),
    };
    let n = (meta.j + 1)
        .checked_mul(meta.k + 1)
        .ok_or_else(|| bad("header sizes overflow"))?;
    if bytes.len() != RAW_HEADER_LEN + 16 * n {
        return Err(bad("payload length does not match the header"));
    }
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let data: Vec<C64> = (0..n)
        .map(|i| {
            let o = RAW_HEADER_LEN + 16 * i;
            C64::new(f(o), f(o + 8))
        })
        .collect();
    let psi = Array2::from_shape_vec((meta.j + 1, meta.k + 1), data).expect("length checked");
    Ok((psi, meta))
}

/// `x,y,re,im,abs`, one row per node, `k` fastest.
pub fn write_csv(path: &Path, psi: &Array2<C64>, mesh: &Mesh2d) -> Result<()> {
    mesh.check_shape(psi)?;
    let mut w = create(path)?;
    let io = |e| HarnessError::io(path, e);
    writeln!(w, "x,y,re,im,abs").map_err(io)?;
    for ((j, k), v) in psi.indexed_iter() {
        writeln!(
            w,
            "{:.5e},{:.5e},{:.5e},{:.5e},{:.5e}",
            mesh.x.node(j),
            mesh.y.node(k),
            v.re,
            v.im,
            v.norm()
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// `m,t,mass,flux_left,flux_right`.
pub fn write_trace_csv(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| HarnessError::io(path, e);
    writeln!(w, "m,t,mass,flux_left,flux_right").map_err(io)?;
    for r in trace {
        writeln!(
            w,
            "{},{:.5e},{:.5e},{:.5e},{:.5e}",
            r.m, r.t, r.mass, r.flux_left, r.flux_right
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}
