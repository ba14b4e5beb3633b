//! Reduced substructure B and its versioned binary cache file.
//!
//! Layout (little endian): magic `HOTRSUBB`, u32 format version, 64-byte hex
//! key, u64 header counts, node lists as u64, `K_r`, `M_r` and `T` as
//! column-major f64, then the SHA-256 of everything before it.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fe::dofs::DofMap;
use crate::fe::mesh::Mesh2D;
use crate::fe::BeamConfig;

use super::SubstructureSplit;

const MAGIC: &[u8; 8] = b"HOTRSUBB";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct BReduction {
    pub key: String,
    pub n_interface: usize,
    pub n_forcing: usize,
    pub modal_count: usize,
    pub interface: Vec<usize>,
    /// Column-major B nodes; defines the rows of `t`.
    pub b_nodes: Vec<usize>,
    pub k_r: DMatrix<f64>,
    pub m_r: DMatrix<f64>,
    pub t: Arc<DMatrix<f64>>,
}

/// Hex SHA-256 of everything the B reduction depends on.
pub fn cache_key(config: &BeamConfig, split: &SubstructureSplit, n_modes: usize) -> String {
    let mut h = Sha256::new();
    h.update(VERSION.to_le_bytes());
    h.update(serde_json::to_vec(config).expect("config serializes"));
    h.update(serde_json::to_vec(split).expect("split serializes"));
    h.update((n_modes as u64).to_le_bytes());
    hex::encode(h.finalize())
}

impl BReduction {
    pub fn n_reduced(&self) -> usize {
        self.k_r.nrows()
    }

    pub fn map(&self, mesh: &Mesh2D, fixed: &[(usize, usize)]) -> Result<DofMap> {
        let map = DofMap::build(mesh.grid_node_count(), &self.b_nodes, fixed, &[])?;
        if map.n() != self.t.nrows() {
            return Err(Error::Cache("B node list does not match the basis".into()));
        }
        Ok(map)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(self.key.as_bytes());
        for v in [
            self.n_interface,
            self.n_forcing,
            self.modal_count,
            self.interface.len(),
            self.b_nodes.len(),
            self.t.nrows(),
            self.t.ncols(),
        ] {
            b.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for v in self.interface.iter().chain(&self.b_nodes) {
            b.extend_from_slice(&(*v as u64).to_le_bytes());
        }
        for m in [&self.k_r, &self.m_r, &*self.t] {
            for v in m.iter() {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&b);
        b.extend_from_slice(&digest);
        b
    }

    pub fn from_bytes(bytes: &[u8], expected_key: &str) -> Result<Self> {
        let bad = |m: &str| Error::Cache(m.to_string());
        if bytes.len() < 8 + 4 + 64 + 56 + 32 {
            return Err(bad("file is truncated"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(bad("checksum mismatch"));
        }
        let mut r = Reader { b: body, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(bad("not a substructure cache file"));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Cache(format!("unsupported cache version {version}")));
        }
        let key = String::from_utf8(r.take(64)?.to_vec()).map_err(|_| bad("bad key"))?;
        if key != expected_key {
            return Err(bad("cache key does not match the model configuration"));
        }
        let mut h = [0usize; 7];
        for v in h.iter_mut() {
            *v = r.u64()? as usize;
        }
        let [n_interface, n_forcing, modal_count, n_if_nodes, n_b_nodes, rows, cols] = h;
        let nr = n_interface + n_forcing + modal_count;
        if cols != nr {
            return Err(bad("inconsistent header"));
        }
        let interface = (0..n_if_nodes)
            .map(|_| r.u64().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let b_nodes = (0..n_b_nodes)
            .map(|_| r.u64().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let k_r = r.matrix(nr, nr)?;
        let m_r = r.matrix(nr, nr)?;
        let t = r.matrix(rows, cols)?;
        if r.pos != body.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(BReduction {
            key,
            n_interface,
            n_forcing,
            modal_count,
            interface,
            b_nodes,
            k_r,
            m_r,
            t: Arc::new(t),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path, expected_key: &str) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?, expected_key)
    }
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.b.len())
            .ok_or_else(|| Error::Cache("file is truncated".into()))?;
        let s = &self.b[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Cache("matrix size overflows".into()))?;
        let raw = self.take(len)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(DMatrix::from_vec(rows, cols, data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BReduction {
        BReduction {
            key: "ab".repeat(32),
            n_interface: 2,
            n_forcing: 1,
            modal_count: 1,
            interface: vec![3, 4],
            b_nodes: vec![0, 1, 3, 4],
            k_r: DMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64),
            m_r: DMatrix::identity(4, 4),
            t: Arc::new(DMatrix::from_fn(6, 4, |i, j| i as f64 - j as f64 * 0.5)),
        }
    }

    #[test]
    fn round_trip() {
        let s = sample();
        let back = BReduction::from_bytes(&s.to_bytes(), &s.key).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_corruption_and_wrong_key() {
        let s = sample();
        let mut b = s.to_bytes();
        assert!(BReduction::from_bytes(&b, &"cd".repeat(32)).is_err());
        b[100] ^= 1;
        assert!(matches!(
            BReduction::from_bytes(&b, &s.key),
            Err(Error::Cache(_))
        ));
        assert!(BReduction::from_bytes(&b[..50], &s.key).is_err());
    }
}
