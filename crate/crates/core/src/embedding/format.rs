//! The `DPRB0001` dump file format.
//!
//! ```text
//! offset  size  content
//! 0       8     magic "DPRB0001"
//! 8       1     format version (1)
//! 9       3     reserved, zero
//! 12      8     manifest length M, u64 little-endian
//! 20      M     manifest, UTF-8 JSON object
//! 20+M    ...   data section: one block per instance, in manifest order
//! ```
//!
//! An instance block holds `layer_count` matrices back to back (layer 1
//! first), each `token_count x hidden_dim` f32 little-endian values in
//! row-major order. Manifest `offset` fields are byte offsets into the data
//! section; blocks are contiguous and the file ends exactly after the last
//! one.
//!
//! Manifest keys: `model_id`, `layer_count`, `hidden_dim`, `layer_roles`
//! (`"encoder"`, `"decoder"` or `"n/a"` per layer), `cls_position` (row or
//! `null`) and `instances`, a list of `{id, offset, token_count, truncated,
//! alignment}` where `alignment` is a list of `[char_start, char_end]` pairs
//! with `[-1, -1]` for special tokens.

use super::{Dump, DumpHeader, EmbeddingError, InstanceDump, Matrix, Result, TokenAlignment};
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;
use std::sync::Mutex;

pub const MAGIC: &[u8; 8] = b"DPRB0001";
pub const FORMAT_VERSION: u8 = 1;

const PREAMBLE_LEN: usize = 20;

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    offset: u64,
    token_count: usize,
    #[serde(default)]
    truncated: bool,
    alignment: TokenAlignment,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    #[serde(flatten)]
    header: DumpHeader,
    instances: Vec<ManifestEntry>,
}

fn block_len(header: &DumpHeader, token_count: usize) -> u64 {
    (header.layer_count * token_count * header.hidden_dim * 4) as u64
}

/// Serializes a dump into its on-disk bytes.
pub fn encode_dump(dump: &Dump) -> Result<Vec<u8>> {
    let header = dump.header();
    let mut offset = 0u64;
    let entries: Vec<ManifestEntry> = dump
        .instances()
        .iter()
        .map(|inst| {
            let entry = ManifestEntry {
                id: inst.id.clone(),
                offset,
                token_count: inst.token_count(),
                truncated: inst.truncated,
                alignment: inst.alignment.clone(),
            };
            offset += block_len(header, inst.token_count());
            entry
        })
        .collect();
    let manifest = serde_json::to_vec(&Manifest {
        header: header.clone(),
        instances: entries,
    })
    .map_err(|e| EmbeddingError::Invalid(e.to_string()))?;

    let mut out = Vec::with_capacity(PREAMBLE_LEN + manifest.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&[0, 0, 0]);
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    for inst in dump.instances() {
        for layer in &inst.layers {
            for v in layer.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn write_dump(dump: &Dump, path: &Path) -> Result<()> {
    let bytes = encode_dump(dump)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

fn need(len: u64, start: u64, count: u64, section: &'static str) -> Result<()> {
    if len < start.saturating_add(count) {
        return Err(EmbeddingError::Truncated {
            offset: len,
            needed: start.saturating_add(count),
            section,
        });
    }
    Ok(())
}

/// Checks the preamble and parses the manifest. Returns the header, the
/// manifest entries and the absolute offset of the data section.
fn parse_front(bytes: &[u8], file_len: u64) -> Result<(DumpHeader, Vec<ManifestEntry>, u64)> {
    need(file_len, 0, MAGIC.len() as u64, "magic")?;
    if &bytes[..8] != MAGIC {
        return Err(EmbeddingError::BadMagic);
    }
    need(file_len, 8, 1, "version")?;
    if bytes[8] != FORMAT_VERSION {
        return Err(EmbeddingError::UnsupportedVersion { found: bytes[8] });
    }
    need(file_len, 9, 11, "manifest length")?;
    let manifest_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    need(file_len, PREAMBLE_LEN as u64, manifest_len, "manifest")?;
    let manifest_bytes = &bytes[PREAMBLE_LEN..PREAMBLE_LEN + manifest_len as usize];
    let manifest: Manifest =
        serde_json::from_slice(manifest_bytes).map_err(|e| EmbeddingError::Manifest {
            offset: PREAMBLE_LEN as u64,
            message: e.to_string(),
        })?;
    manifest.header.validate()?;

    let data_start = PREAMBLE_LEN as u64 + manifest_len;
    let mut expected = 0u64;
    for entry in &manifest.instances {
        if entry.offset != expected {
            return Err(EmbeddingError::Manifest {
                offset: PREAMBLE_LEN as u64,
                message: format!(
                    "instance `{}` at data offset {}, expected {expected}",
                    entry.id, entry.offset
                ),
            });
        }
        if entry.token_count != entry.alignment.len() {
            return Err(EmbeddingError::AlignmentMismatch {
                id: entry.id.clone(),
                token_count: entry.token_count,
                alignment_len: entry.alignment.len(),
            });
        }
        expected += block_len(&manifest.header, entry.token_count);
    }
    need(file_len, data_start, expected, "data")?;
    if file_len > data_start + expected {
        return Err(EmbeddingError::TrailingBytes {
            offset: data_start + expected,
            count: file_len - data_start - expected,
        });
    }
    Ok((manifest.header, manifest.instances, data_start))
}

fn read_matrix(
    bytes: &[u8],
    rows: usize,
    cols: usize,
    id: &str,
    layer: usize,
    base: u64,
) -> Result<Matrix> {
    let mut data = Vec::with_capacity(rows * cols);
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(EmbeddingError::NonFinite {
                id: id.to_string(),
                layer,
                offset: base + 4 * i as u64,
            });
        }
        data.push(v);
    }
    Matrix::new(rows, cols, data)
}

/// Parses a complete dump from bytes.
pub fn decode_dump(bytes: &[u8]) -> Result<Dump> {
    let (header, entries, data_start) = parse_front(bytes, bytes.len() as u64)?;
    let layer_bytes = |tokens: usize| tokens * header.hidden_dim * 4;
    let mut instances = Vec::with_capacity(entries.len());
    for entry in entries {
        let mut layers = Vec::with_capacity(header.layer_count);
        for l in 0..header.layer_count {
            let start =
                data_start as usize + entry.offset as usize + l * layer_bytes(entry.token_count);
            let slice = &bytes[start..start + layer_bytes(entry.token_count)];
            layers.push(read_matrix(
                slice,
                entry.token_count,
                header.hidden_dim,
                &entry.id,
                l + 1,
                start as u64,
            )?);
        }
        instances.push(InstanceDump {
            id: entry.id,
            alignment: entry.alignment,
            truncated: entry.truncated,
            layers,
        });
    }
    Dump::new(header, instances)
}

pub fn read_dump(path: &Path) -> Result<Dump> {
    let bytes = std::fs::read(path)?;
    decode_dump(&bytes)
}

struct IndexEntry {
    offset: u64,
    alignment: TokenAlignment,
    truncated: bool,
}

/// Random-access reader that keeps only the manifest in memory and reads
/// matrices on demand.
pub struct DumpReader {
    header: DumpHeader,
    ids: Vec<String>,
    index: HashMap<String, IndexEntry>,
    data_start: u64,
    file: Mutex<File>,
}

impl DumpReader {
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = File::open(path)?;
        let file_len = file.metadata()?.len();
        let mut preamble = vec![0u8; PREAMBLE_LEN.min(file_len as usize)];
        file.read_exact(&mut preamble)?;
        // Reuse `parse_front` on preamble + manifest; the data section is
        // only checked for length.
        let mut front = preamble;
        if front.len() == PREAMBLE_LEN && &front[..8] == MAGIC && front[8] == FORMAT_VERSION {
            let manifest_len = u64::from_le_bytes(front[12..20].try_into().expect("8 bytes"));
            let available = file_len
                .saturating_sub(PREAMBLE_LEN as u64)
                .min(manifest_len);
            let mut manifest = vec![0u8; available as usize];
            file.read_exact(&mut manifest)?;
            front.extend_from_slice(&manifest);
        }
        let (header, entries, data_start) = parse_front(&front, file_len)?;
        let mut ids = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for e in entries {
            if let Some(s) = header.cls_position.filter(|&c| c >= e.token_count) {
                return Err(EmbeddingError::Invalid(format!(
                    "instance `{}` has no row at cls position {s}",
                    e.id
                )));
            }
            e.alignment
                .validate()
                .map_err(|m| EmbeddingError::Invalid(format!("instance `{}`: {m}", e.id)))?;
            ids.push(e.id.clone());
            let prev = index.insert(
                e.id.clone(),
                IndexEntry {
                    offset: e.offset,
                    alignment: e.alignment,
                    truncated: e.truncated,
                },
            );
            if prev.is_some() {
                return Err(EmbeddingError::Invalid(format!(
                    "duplicate instance id `{}`",
                    e.id
                )));
            }
        }
        Ok(DumpReader {
            header,
            ids,
            index,
            data_start,
            file: Mutex::new(file),
        })
    }

    /// Instance ids in file order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Loads the whole file into memory.
    pub fn load_all(&self) -> Result<Dump> {
        let mut instances = Vec::with_capacity(self.ids.len());
        for id in &self.ids {
            let e = &self.index[id];
            let layers = (1..=self.header.layer_count)
                .map(|l| self.read_layer(id, e, l))
                .collect::<Result<Vec<_>>>()?;
            instances.push(InstanceDump {
                id: id.clone(),
                alignment: e.alignment.clone(),
                truncated: e.truncated,
                layers,
            });
        }
        Dump::new(self.header.clone(), instances)
    }

    fn read_layer(&self, id: &str, entry: &IndexEntry, layer: usize) -> Result<Matrix> {
        let tokens = entry.alignment.len();
        let len = tokens * self.header.hidden_dim * 4;
        let start = self.data_start + entry.offset + ((layer - 1) * len) as u64;
        let mut buf = vec![0u8; len];
        {
            let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
            file.seek(SeekFrom::Start(start))?;
            file.read_exact(&mut buf)?;
        }
        read_matrix(&buf, tokens, self.header.hidden_dim, id, layer, start)
    }
}

impl super::EmbeddingSource for DumpReader {
    fn header(&self) -> &DumpHeader {
        &self.header
    }

    fn alignment(&self, id: &str) -> Option<&TokenAlignment> {
        self.index.get(id).map(|e| &e.alignment)
    }

    fn matrix(&self, id: &str, layer: usize) -> Result<Cow<'_, Matrix>> {
        self.header.check_layer(layer)?;
        let entry = self
            .index
            .get(id)
            .ok_or_else(|| EmbeddingError::UnknownInstance(id.to_string()))?;
        self.read_layer(id, entry, layer).map(Cow::Owned)
    }

    fn is_truncated(&self, id: &str) -> bool {
        self.index.get(id).is_some_and(|e| e.truncated)
    }
}
