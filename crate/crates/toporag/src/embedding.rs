//! Embedding matrices and their on-disk format.
//!
//! An [`EmbeddingMatrix`] is an `N x d` matrix of finite `f64` rows tagged
//! with the embedding kind and a fingerprint of the configuration that
//! produced it. Downstream artifacts (indexes, reports) carry the same
//! fingerprint so stale combinations are rejected instead of silently mixed.
//!
//! Binary layout: magic `TPRG`, one kind byte (0 proximity, 1 role, 2 text),
//! `N` and `d` as little-endian `u64`, then `N * d` little-endian `f64`
//! values row-major. A JSON sidecar (`<file>.json`) mirrors the header and
//! holds the fingerprint.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TPRG";

/// What an embedding row measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    /// Graph diffusion closeness.
    Proximity,
    /// Spectral structural role.
    Role,
    /// Text content.
    Text,
}

impl EmbeddingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Proximity => "proximity",
            EmbeddingKind::Role => "role",
            EmbeddingKind::Text => "text",
        }
    }

    fn to_byte(self) -> u8 {
        match self {
            EmbeddingKind::Proximity => 0,
            EmbeddingKind::Role => 1,
            EmbeddingKind::Text => 2,
        }
    }

    fn from_byte(b: u8) -> Option<EmbeddingKind> {
        match b {
            0 => Some(EmbeddingKind::Proximity),
            1 => Some(EmbeddingKind::Role),
            2 => Some(EmbeddingKind::Text),
            _ => None,
        }
    }
}

impl std::fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sidecar mirroring the binary header plus the config fingerprint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub kind: EmbeddingKind,
    pub n: usize,
    pub dim: usize,
    pub fingerprint: String,
}

/// Dense per-node embedding matrix with provenance.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    rows: Array2<f64>,
    kind: EmbeddingKind,
    fingerprint: String,
}

impl EmbeddingMatrix {
    /// Wrap a matrix; rejects non-finite entries.
    pub fn new(rows: Array2<f64>, kind: EmbeddingKind, fingerprint: String) -> Result<Self> {
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("{kind} embedding matrix"),
            });
        }
        Ok(EmbeddingMatrix {
            rows,
            kind,
            fingerprint,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn row(&self, id: u32) -> Result<ArrayView1<'_, f64>> {
        if id as usize >= self.n() {
            return Err(Error::InvalidNodeId {
                id,
                count: self.n(),
            });
        }
        Ok(self.rows.row(id as usize))
    }

    /// Guard for operations that require a particular kind.
    pub fn expect_kind(&self, expected: EmbeddingKind) -> Result<()> {
        if self.kind != expected {
            return Err(Error::KindMismatch {
                expected: expected.as_str().into(),
                got: self.kind.as_str().into(),
            });
        }
        Ok(())
    }

    fn sidecar_path(path: &Path) -> PathBuf {
        let mut os = path.as_os_str().to_owned();
        os.push(".json");
        PathBuf::from(os)
    }

    /// Write the binary matrix plus its JSON sidecar.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let p = path.display().to_string();
        let file = File::create(path).map_err(|e| Error::io(&p, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(MAGIC).map_err(|e| Error::io(&p, e))?;
        w.write_all(&[self.kind.to_byte()]).map_err(|e| Error::io(&p, e))?;
        w.write_all(&(self.n() as u64).to_le_bytes())
            .map_err(|e| Error::io(&p, e))?;
        w.write_all(&(self.dim() as u64).to_le_bytes())
            .map_err(|e| Error::io(&p, e))?;
        for row in self.rows.rows() {
            for &v in row {
                w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(&p, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&p, e))?;

        let side = EmbeddingSidecar {
            kind: self.kind,
            n: self.n(),
            dim: self.dim(),
            fingerprint: self.fingerprint.clone(),
        };
        let sp = Self::sidecar_path(path);
        let spd = sp.display().to_string();
        let file = File::create(&sp).map_err(|e| Error::io(&spd, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &side).map_err(|e| Error::json(&spd, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(&spd, e))?;
        w.flush().map_err(|e| Error::io(&spd, e))?;
        Ok(())
    }

    /// Read a matrix written by [`write_binary`](Self::write_binary),
    /// cross-checking the sidecar header.
    pub fn read_binary(path: &Path) -> Result<Self> {
        let p = path.display().to_string();
        let corrupt = |message: String| Error::CorruptEmbedding {
            path: p.clone(),
            message,
        };
        let file = File::open(path).map_err(|e| Error::io(&p, e))?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::io(&p, e))?;
        if &magic != MAGIC {
            return Err(corrupt(format!("bad magic {magic:?}")));
        }
        let mut kind_byte = [0u8; 1];
        r.read_exact(&mut kind_byte).map_err(|e| Error::io(&p, e))?;
        let kind = EmbeddingKind::from_byte(kind_byte[0])
            .ok_or_else(|| corrupt(format!("unknown kind byte {}", kind_byte[0])))?;
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf).map_err(|e| Error::io(&p, e))?;
        let n = u64::from_le_bytes(u64buf) as usize;
        r.read_exact(&mut u64buf).map_err(|e| Error::io(&p, e))?;
        let dim = u64::from_le_bytes(u64buf) as usize;
        let mut data = Vec::with_capacity(n * dim);
        let mut f64buf = [0u8; 8];
        for _ in 0..n * dim {
            r.read_exact(&mut f64buf)
                .map_err(|_| corrupt("truncated value block".into()))?;
            data.push(f64::from_le_bytes(f64buf));
        }
        if r.read(&mut [0u8; 1]).map_err(|e| Error::io(&p, e))? != 0 {
            return Err(corrupt("trailing bytes after value block".into()));
        }
        let rows = Array2::from_shape_vec((n, dim), data)
            .map_err(|e| corrupt(format!("shape error: {e}")))?;

        let sp = Self::sidecar_path(path);
        let spd = sp.display().to_string();
        let file = File::open(&sp).map_err(|e| Error::io(&spd, e))?;
        let side: EmbeddingSidecar =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::json(&spd, e))?;
        if side.kind != kind || side.n != n || side.dim != dim {
            return Err(corrupt(format!(
                "sidecar disagrees with header: sidecar {}x{} {}, header {}x{} {}",
                side.n, side.dim, side.kind, n, dim, kind
            )));
        }
        EmbeddingMatrix::new(rows, kind, side.fingerprint)
    }
}

/// Cosine similarity; any zero vector yields exactly 0.
pub fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Cosine similarity over plain slices; zero vectors yield 0.
pub fn cosine_slice(a: &[f64], b: &[f64]) -> f64 {
    cosine(ArrayView1::from(a), ArrayView1::from(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample() -> EmbeddingMatrix {
        let m = array![[1.0, 2.0, 3.0], [0.0, -1.0, 0.5]];
        EmbeddingMatrix::new(m, EmbeddingKind::Proximity, "fp-test".into()).unwrap()
    }

    #[test]
    fn rejects_non_finite() {
        let m = array![[f64::NAN]];
        assert!(EmbeddingMatrix::new(m, EmbeddingKind::Text, "f".into()).is_err());
    }

    #[test]
    fn roundtrip_is_byte_identical() {
        let e = sample();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.emb");
        let p2 = dir.path().join("b.emb");
        e.write_binary(&p1).unwrap();
        let back = EmbeddingMatrix::read_binary(&p1).unwrap();
        assert_eq!(back.kind(), EmbeddingKind::Proximity);
        assert_eq!(back.fingerprint(), "fp-test");
        assert_eq!(back.matrix(), e.matrix());
        back.write_binary(&p2).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2);
        let s1 = std::fs::read(dir.path().join("a.emb.json")).unwrap();
        let s2 = std::fs::read(dir.path().join("b.emb.json")).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn header_layout_is_fixed() {
        let e = sample();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.emb");
        e.write_binary(&p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"TPRG");
        assert_eq!(bytes[4], 0, "proximity kind byte");
        assert_eq!(u64::from_le_bytes(bytes[5..13].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[13..21].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 21 + 6 * 8);
        assert_eq!(
            f64::from_le_bytes(bytes[21..29].try_into().unwrap()),
            1.0,
            "first value row-major"
        );
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.emb");
        std::fs::write(&p, b"NOPE").unwrap();
        assert!(matches!(
            EmbeddingMatrix::read_binary(&p),
            Err(Error::CorruptEmbedding { .. })
        ));
    }

    #[test]
    fn truncation_is_rejected() {
        let e = sample();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.emb");
        e.write_binary(&p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            EmbeddingMatrix::read_binary(&p),
            Err(Error::CorruptEmbedding { .. })
        ));
    }

    #[test]
    fn sidecar_mismatch_is_rejected() {
        let e = sample();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.emb");
        e.write_binary(&p).unwrap();
        let side = EmbeddingSidecar {
            kind: EmbeddingKind::Proximity,
            n: 99,
            dim: 3,
            fingerprint: "fp-test".into(),
        };
        std::fs::write(
            dir.path().join("x.emb.json"),
            serde_json::to_string(&side).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            EmbeddingMatrix::read_binary(&p),
            Err(Error::CorruptEmbedding { .. })
        ));
    }

    #[test]
    fn cosine_handles_zero_vectors() {
        let a = array![1.0, 0.0];
        let z = array![0.0, 0.0];
        assert_eq!(cosine(a.view(), z.view()), 0.0);
        assert_eq!(cosine(z.view(), z.view()), 0.0);
        assert!((cosine(a.view(), a.view()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kind_guard() {
        let e = sample();
        assert!(e.expect_kind(EmbeddingKind::Proximity).is_ok());
        assert!(matches!(
            e.expect_kind(EmbeddingKind::Text),
            Err(Error::KindMismatch { .. })
        ));
    }
}
