//! Bit-exact artifact serialization.
//!
//! Embedding container layout (normative, little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "VFE1"
//! 4       1     dtype code (0x01 = f32 LE)
//! 5       8     n as u64
//! 13      8     d as u64
//! 21      n*d*4 payload, row-major f32
//! ...     4     CRC32 (IEEE) of the payload
//! ```
//!
//! Writes go to a sibling temp file followed by an atomic rename, so a
//! crashed writer never leaves a partial container behind. Matrices are
//! checked finite before they hit disk.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embstats::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::lexicon::unicode_version;

const MAGIC: &[u8; 4] = b"VFE1";
const DTYPE_F32_LE: u8 = 0x01;
const HEADER_LEN: usize = 4 + 1 + 8 + 8;

/// Serialize a matrix to the container format. Refuses non-finite entries.
pub fn write_emb(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some((row, col)) = matrix.find_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let tmp_path = sibling_tmp_path(path);
    {
        let file = File::create(&tmp_path).map_err(|e| Error::io(&tmp_path, e))?;
        let mut w = BufWriter::new(file);
        let mut hasher = crc32fast::Hasher::new();
        w.write_all(MAGIC).map_err(|e| Error::io(&tmp_path, e))?;
        w.write_all(&[DTYPE_F32_LE])
            .map_err(|e| Error::io(&tmp_path, e))?;
        w.write_all(&(matrix.rows() as u64).to_le_bytes())
            .map_err(|e| Error::io(&tmp_path, e))?;
        w.write_all(&(matrix.dim() as u64).to_le_bytes())
            .map_err(|e| Error::io(&tmp_path, e))?;
        let mut buf = Vec::with_capacity(matrix.dim() * 4);
        for i in 0..matrix.rows() {
            buf.clear();
            for v in matrix.row(i) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            hasher.update(&buf);
            w.write_all(&buf).map_err(|e| Error::io(&tmp_path, e))?;
        }
        w.write_all(&hasher.finalize().to_le_bytes())
            .map_err(|e| Error::io(&tmp_path, e))?;
        w.flush().map_err(|e| Error::io(&tmp_path, e))?;
    }
    fs::rename(&tmp_path, path).map_err(|e| Error::io(path, e))
}

fn sibling_tmp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "out".into());
    name.push(".tmp");
    path.with_file_name(name)
}

/// Read a container back, validating magic, dtype, length, CRC, and
/// finiteness.
pub fn read_emb(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = [0u8; HEADER_LEN];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::BadMagic(path.to_path_buf()))?;
    if &header[0..4] != MAGIC {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    if header[4] != DTYPE_F32_LE {
        return Err(Error::CorruptPayload {
            path: path.to_path_buf(),
            reason: format!("unsupported dtype code 0x{:02x}", header[4]),
        });
    }
    let n = u64::from_le_bytes(header[5..13].try_into().unwrap());
    let d = u64::from_le_bytes(header[13..21].try_into().unwrap());
    let payload_len = n
        .checked_mul(d)
        .and_then(|x| x.checked_mul(4))
        .and_then(|x| usize::try_from(x).ok())
        .ok_or_else(|| Error::CorruptPayload {
            path: path.to_path_buf(),
            reason: format!("implausible shape {n} x {d}"),
        })?;

    let mut payload = vec![0u8; payload_len];
    reader
        .read_exact(&mut payload)
        .map_err(|_| Error::CorruptPayload {
            path: path.to_path_buf(),
            reason: "truncated payload".into(),
        })?;
    let mut crc_bytes = [0u8; 4];
    reader
        .read_exact(&mut crc_bytes)
        .map_err(|_| Error::CorruptPayload {
            path: path.to_path_buf(),
            reason: "missing checksum".into(),
        })?;
    let mut trailing = [0u8; 1];
    if reader.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::CorruptPayload {
            path: path.to_path_buf(),
            reason: "trailing bytes after checksum".into(),
        });
    }
    let expected = u32::from_le_bytes(crc_bytes);
    let actual = crc32fast::hash(&payload);
    if expected != actual {
        return Err(Error::CorruptPayload {
            path: path.to_path_buf(),
            reason: format!("CRC mismatch: stored {expected:#010x}, computed {actual:#010x}"),
        });
    }

    let mut data = Vec::with_capacity(payload_len / 4);
    for chunk in payload.chunks_exact(4) {
        data.push(f32::from_le_bytes(chunk.try_into().unwrap()));
    }
    let matrix = EmbeddingMatrix::from_flat(data, n as usize, d as usize)?;
    if matrix.find_non_finite().is_some() {
        return Err(Error::CorruptPayload {
            path: path.to_path_buf(),
            reason: "payload contains non-finite values".into(),
        });
    }
    Ok(matrix)
}

/// Parse word2vec text format: a `count dim` header line, then one
/// `token v1 .. vd` line per row, in file order.
pub fn import_word2vec_text(path: impl AsRef<Path>) -> Result<(Vec<String>, EmbeddingMatrix)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file, expected 'count dim' header"))?
        .map_err(|e| Error::io(path, e))?;
    let mut parts = header.split_whitespace();
    let (count, dim) = match (parts.next(), parts.next(), parts.next()) {
        (Some(c), Some(d), None) => {
            let count: usize = c
                .parse()
                .map_err(|_| Error::format(path, format!("bad count {c:?} in header")))?;
            let dim: usize = d
                .parse()
                .map_err(|_| Error::format(path, format!("bad dim {d:?} in header")))?;
            (count, dim)
        }
        _ => {
            return Err(Error::format(
                path,
                format!("header must be 'count dim', got {header:?}"),
            ))
        }
    };

    let mut tokens = Vec::with_capacity(count);
    let mut data = Vec::with_capacity(count * dim);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields
            .next()
            .ok_or_else(|| Error::format(path, format!("row {i} has no token")))?;
        let values: Vec<&str> = fields.collect();
        if values.len() != dim {
            return Err(Error::DimMismatch(format!(
                "row {i} ({token:?}) has {} values, header says {dim}",
                values.len()
            )));
        }
        for v in values {
            let x: f32 = v.parse().map_err(|_| {
                Error::format(path, format!("row {i} ({token:?}): bad float {v:?}"))
            })?;
            if !x.is_finite() {
                return Err(Error::format(
                    path,
                    format!("row {i} ({token:?}): non-finite value"),
                ));
            }
            data.push(x);
        }
        tokens.push(token.to_string());
    }
    if tokens.len() != count {
        return Err(Error::format(
            path,
            format!("header promised {count} rows, file has {}", tokens.len()),
        ));
    }
    let matrix = EmbeddingMatrix::from_flat(data, tokens.len(), dim)?;
    Ok((tokens, matrix))
}

/// Write word2vec text format. Floats use the shortest representation that
/// parses back to the identical value, so a text round-trip is bit-exact.
pub fn export_word2vec_text(
    tokens: &[String],
    matrix: &EmbeddingMatrix,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if tokens.len() != matrix.rows() {
        return Err(Error::DimMismatch(format!(
            "{} tokens vs {} matrix rows",
            tokens.len(),
            matrix.rows()
        )));
    }
    if let Some((row, col)) = matrix.find_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{} {}", tokens.len(), matrix.dim()).map_err(|e| Error::io(path, e))?;
    for (i, token) in tokens.iter().enumerate() {
        write!(w, "{token}").map_err(|e| Error::io(path, e))?;
        for v in matrix.row(i) {
            write!(w, " {v}").map_err(|e| Error::io(path, e))?;
        }
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Embedding parameter accounting under tied input/output embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSavings {
    /// Parameters in the source embedding matrix (`src_vocab * dim`).
    pub src_emb: u64,
    /// Parameters in the target embedding matrix (`tgt_vocab * dim`).
    pub tgt_emb: u64,
    /// `src_emb - tgt_emb`; negative if the target vocabulary is larger.
    pub saved: i64,
    /// Fraction of total model parameters spent on the source embedding.
    pub src_fraction: f64,
}

/// Exact integer accounting of embedding parameters saved by swapping the
/// source vocabulary for the target one.
pub fn param_savings(
    src_vocab: u64,
    tgt_vocab: u64,
    dim: u64,
    total_params: u64,
) -> Result<ParamSavings> {
    if src_vocab == 0 || tgt_vocab == 0 || dim == 0 || total_params == 0 {
        return Err(Error::InvalidArgument(
            "all parameter counts must be positive".into(),
        ));
    }
    let src_emb = src_vocab * dim;
    let tgt_emb = tgt_vocab * dim;
    Ok(ParamSavings {
        src_emb,
        tgt_emb,
        saved: src_emb as i64 - tgt_emb as i64,
        src_fraction: src_emb as f64 / total_params as f64,
    })
}

/// SHA-256 of a file, lowercase hex.
pub fn sha256_hex(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

/// Ties a specialization run's artifacts together with content hashes,
/// the tool version, and the Unicode table version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub unicode_version: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub strategy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub files: BTreeMap<String, ManifestEntry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest::new()
    }
}

impl Manifest {
    pub fn new() -> Self {
        Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            unicode_version: unicode_version(),
            command: None,
            strategy: None,
            seed: None,
            files: BTreeMap::new(),
        }
    }

    /// Hash `path` now and record it under `role`.
    pub fn add_file(&mut self, role: impl Into<String>, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let sha256 = sha256_hex(path)?;
        self.files.insert(
            role.into(),
            ManifestEntry {
                path: path.to_string_lossy().into_owned(),
                sha256,
            },
        );
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(path, e.to_string()))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Re-hash every referenced file; relative entries resolve against
    /// `base_dir`. Fails on the first mismatch.
    pub fn verify(&self, base_dir: &Path) -> Result<()> {
        for (role, entry) in &self.files {
            let p = PathBuf::from(&entry.path);
            let resolved = if p.is_absolute() { p } else { base_dir.join(p) };
            let actual = sha256_hex(&resolved)?;
            if actual != entry.sha256 {
                return Err(Error::HashMismatch {
                    role: role.clone(),
                    path: resolved,
                    expected: entry.sha256.clone(),
                    actual,
                });
            }
        }
        Ok(())
    }
}
