//! Version-2 pack index lookup and packfile object decoding.

use std::fs::File;
use std::io::{self, Read};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use flate2::read::ZlibDecoder;

use super::{ObjectId, ObjectKind, Result, StoreError, MAX_DELTA_DEPTH};

const IDX_MAGIC: [u8; 4] = [0xff, b't', b'O', b'c'];

const OBJ_COMMIT: u8 = 1;
const OBJ_TREE: u8 = 2;
const OBJ_BLOB: u8 = 3;
const OBJ_TAG: u8 = 4;
const OBJ_OFS_DELTA: u8 = 6;
const OBJ_REF_DELTA: u8 = 7;

struct PackIndex {
    fanout: [u32; 256],
    names: Vec<u8>,
    offsets: Vec<u64>,
}

impl PackIndex {
    fn parse(data: &[u8], path: &Path) -> Result<Self> {
        let corrupt = |r: &str| StoreError::corrupt(None, format!("{}: {r}", path.display()));
        if data.len() < 8 + 256 * 4 || data[..4] != IDX_MAGIC {
            return Err(corrupt("not a version 2 pack index"));
        }
        let version = u32::from_be_bytes(data[4..8].try_into().unwrap());
        if version != 2 {
            return Err(corrupt("unsupported pack index version"));
        }
        let mut fanout = [0u32; 256];
        for (i, slot) in fanout.iter_mut().enumerate() {
            let at = 8 + i * 4;
            *slot = u32::from_be_bytes(data[at..at + 4].try_into().unwrap());
        }
        let count = fanout[255] as usize;
        let names_at = 8 + 256 * 4;
        let crc_at = names_at + count * 20;
        let off_at = crc_at + count * 4;
        let large_at = off_at + count * 4;
        if data.len() < large_at + 40 {
            return Err(corrupt("truncated pack index"));
        }
        let names = data[names_at..crc_at].to_vec();
        let mut offsets = Vec::with_capacity(count);
        for i in 0..count {
            let at = off_at + i * 4;
            let raw = u32::from_be_bytes(data[at..at + 4].try_into().unwrap());
            let offset = if raw & 0x8000_0000 != 0 {
                let li = (raw & 0x7fff_ffff) as usize;
                let at = large_at + li * 8;
                let bytes = data.get(at..at + 8).ok_or_else(|| corrupt("bad large offset"))?;
                u64::from_be_bytes(bytes.try_into().unwrap())
            } else {
                raw as u64
            };
            offsets.push(offset);
        }
        Ok(PackIndex { fanout, names, offsets })
    }

    fn find(&self, id: &ObjectId) -> Option<u64> {
        let first = id.as_bytes()[0] as usize;
        let mut lo = if first == 0 { 0 } else { self.fanout[first - 1] as usize };
        let mut hi = self.fanout[first] as usize;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let name = &self.names[mid * 20..mid * 20 + 20];
            match name.cmp(id.as_bytes().as_slice()) {
                std::cmp::Ordering::Equal => return Some(self.offsets[mid]),
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
            }
        }
        None
    }
}

pub(crate) struct Pack {
    path: PathBuf,
    file: File,
    index: PackIndex,
}

/// Sequential reader over a pack file using positional reads, so that
/// concurrent readers never share a cursor.
struct PackStream<'a> {
    file: &'a File,
    pos: u64,
}

impl Read for PackStream<'_> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.file.read_at(buf, self.pos)?;
        self.pos += n as u64;
        Ok(n)
    }
}

pub(crate) enum PackedEntry {
    Full(ObjectKind, Vec<u8>),
    /// A reference delta whose base must be fetched by id.
    RefDelta {
        base: ObjectId,
        delta: Vec<u8>,
    },
}

impl Pack {
    pub(crate) fn open(idx_path: &Path) -> Result<Self> {
        let pack_path = idx_path.with_extension("pack");
        let index = PackIndex::parse(&std::fs::read(idx_path)?, idx_path)?;
        let file = File::open(&pack_path)?;
        let mut header = [0u8; 12];
        file.read_exact_at(&mut header, 0)?;
        let version = u32::from_be_bytes(header[4..8].try_into().unwrap());
        let count = u32::from_be_bytes(header[8..12].try_into().unwrap());
        if &header[..4] != b"PACK" || !(version == 2 || version == 3) {
            return Err(StoreError::corrupt(None, format!("{}: bad pack header", pack_path.display())));
        }
        if count != index.fanout[255] {
            return Err(StoreError::corrupt(None, format!("{}: object count differs from index", pack_path.display())));
        }
        Ok(Pack { path: pack_path, file, index })
    }

    pub(crate) fn find(&self, id: &ObjectId) -> Option<u64> {
        self.index.find(id)
    }

    fn corrupt(&self, reason: impl std::fmt::Display) -> StoreError {
        StoreError::corrupt(None, format!("{}: {reason}", self.path.display()))
    }

    /// Decodes the object at `offset`, resolving offset deltas within this
    /// pack. Reference deltas are returned unresolved when their base
    /// lives elsewhere; `depth` counts deltas already applied above.
    pub(crate) fn read_at(&self, offset: u64, depth: usize) -> Result<PackedEntry> {
        if depth > MAX_DELTA_DEPTH {
            return Err(self.corrupt("delta chain exceeds maximum depth"));
        }
        let mut head = [0u8; 64];
        let n = self.file.read_at(&mut head, offset)?;
        let head = &head[..n];
        let mut pos = 0;
        let mut byte = *head.first().ok_or_else(|| self.corrupt("offset past end of pack"))?;
        let type_code = (byte >> 4) & 0x7;
        let mut size = (byte & 0x0f) as u64;
        let mut shift = 4;
        while byte & 0x80 != 0 {
            pos += 1;
            byte = *head.get(pos).ok_or_else(|| self.corrupt("truncated object header"))?;
            if shift > 57 {
                return Err(self.corrupt("object size overflow"));
            }
            size |= ((byte & 0x7f) as u64) << shift;
            shift += 7;
        }
        pos += 1;

        let kind = match type_code {
            OBJ_COMMIT => Some(ObjectKind::Commit),
            OBJ_TREE => Some(ObjectKind::Tree),
            OBJ_BLOB => Some(ObjectKind::Blob),
            OBJ_TAG => Some(ObjectKind::Tag),
            OBJ_OFS_DELTA | OBJ_REF_DELTA => None,
            other => return Err(self.corrupt(format!("unknown object type {other}"))),
        };
        if let Some(kind) = kind {
            let data = self.inflate(offset + pos as u64, size)?;
            return Ok(PackedEntry::Full(kind, data));
        }

        if type_code == OBJ_OFS_DELTA {
            let mut byte = *head.get(pos).ok_or_else(|| self.corrupt("truncated delta offset"))?;
            pos += 1;
            let mut back = (byte & 0x7f) as u64;
            while byte & 0x80 != 0 {
                byte = *head.get(pos).ok_or_else(|| self.corrupt("truncated delta offset"))?;
                pos += 1;
                back = back
                    .checked_add(1)
                    .and_then(|b| b.checked_mul(128))
                    .ok_or_else(|| StoreError::BadDelta("base offset overflow".into()))?
                    | (byte & 0x7f) as u64;
            }
            if back == 0 || back > offset {
                return Err(StoreError::BadDelta(format!("base offset {back} out of range at {offset}")));
            }
            let delta = self.inflate(offset + pos as u64, size)?;
            match self.read_at(offset - back, depth + 1)? {
                PackedEntry::Full(kind, base) => Ok(PackedEntry::Full(kind, apply_delta(&base, &delta)?)),
                PackedEntry::RefDelta { .. } => {
                    Err(StoreError::BadDelta("offset delta based on an unresolved reference delta".into()))
                }
            }
        } else {
            let base_bytes = head.get(pos..pos + 20).ok_or_else(|| self.corrupt("truncated delta base"))?;
            let base = ObjectId::from_slice(base_bytes)?;
            pos += 20;
            let delta = self.inflate(offset + pos as u64, size)?;
            Ok(PackedEntry::RefDelta { base, delta })
        }
    }

    fn inflate(&self, at: u64, size: u64) -> Result<Vec<u8>> {
        let stream = PackStream { file: &self.file, pos: at };
        let mut out = Vec::with_capacity(size.min(1 << 24) as usize);
        ZlibDecoder::new(stream)
            .take(size + 1)
            .read_to_end(&mut out)
            .map_err(|e| self.corrupt(format!("inflate failed at {at}: {e}")))?;
        if out.len() as u64 != size {
            return Err(self.corrupt(format!("inflated size mismatch at {at}")));
        }
        Ok(out)
    }
}

fn read_varint(data: &[u8], pos: &mut usize) -> Result<u64> {
    let mut value = 0u64;
    let mut shift = 0;
    loop {
        let byte = *data.get(*pos).ok_or_else(|| StoreError::BadDelta("truncated size".into()))?;
        *pos += 1;
        if shift > 63 {
            return Err(StoreError::BadDelta("size overflow".into()));
        }
        value |= ((byte & 0x7f) as u64) << shift;
        shift += 7;
        if byte & 0x80 == 0 {
            return Ok(value);
        }
    }
}

/// Applies a Git delta to `base`.
pub(crate) fn apply_delta(base: &[u8], delta: &[u8]) -> Result<Vec<u8>> {
    let bad = |m: &str| StoreError::BadDelta(m.to_string());
    let mut pos = 0;
    let source_size = read_varint(delta, &mut pos)?;
    let target_size = read_varint(delta, &mut pos)?;
    if source_size != base.len() as u64 {
        return Err(bad("base size mismatch"));
    }
    let mut out = Vec::with_capacity(target_size.min(1 << 24) as usize);
    while pos < delta.len() {
        let op = delta[pos];
        pos += 1;
        if op & 0x80 != 0 {
            let mut offset = 0usize;
            let mut size = 0usize;
            for i in 0..4 {
                if op & (1 << i) != 0 {
                    let b = *delta.get(pos).ok_or_else(|| bad("truncated copy"))?;
                    pos += 1;
                    offset |= (b as usize) << (8 * i);
                }
            }
            for i in 0..3 {
                if op & (0x10 << i) != 0 {
                    let b = *delta.get(pos).ok_or_else(|| bad("truncated copy"))?;
                    pos += 1;
                    size |= (b as usize) << (8 * i);
                }
            }
            if size == 0 {
                size = 0x10000;
            }
            let chunk = offset
                .checked_add(size)
                .and_then(|end| base.get(offset..end))
                .ok_or_else(|| bad("copy outside base"))?;
            out.extend_from_slice(chunk);
        } else if op != 0 {
            let chunk = delta.get(pos..pos + op as usize).ok_or_else(|| bad("truncated insert"))?;
            out.extend_from_slice(chunk);
            pos += op as usize;
        } else {
            return Err(bad("reserved opcode 0"));
        }
        if out.len() as u64 > target_size {
            return Err(bad("result exceeds declared size"));
        }
    }
    if out.len() as u64 != target_size {
        return Err(bad("result size mismatch"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn varint(mut v: usize, out: &mut Vec<u8>) {
        loop {
            let b = (v & 0x7f) as u8;
            v >>= 7;
            if v == 0 {
                out.push(b);
                return;
            }
            out.push(b | 0x80);
        }
    }

    #[test]
    fn delta_copy_and_insert() {
        let base = b"the quick brown fox";
        let mut delta = Vec::new();
        varint(base.len(), &mut delta);
        varint(14, &mut delta);
        // copy offset 4, size 6 -> "quick "
        delta.extend_from_slice(&[0x80 | 0x01 | 0x10, 4, 6]);
        // insert "red "
        delta.push(4);
        delta.extend_from_slice(b"red ");
        // copy offset 16 size 3 -> "fox"
        delta.extend_from_slice(&[0x80 | 0x01 | 0x10, 16, 3]);
        delta.push(1);
        delta.push(b'!');
        assert_eq!(apply_delta(base, &delta).unwrap(), b"quick red fox!");
    }

    #[test]
    fn delta_rejects_out_of_range_copy() {
        let base = b"abc";
        let mut delta = Vec::new();
        varint(3, &mut delta);
        varint(10, &mut delta);
        delta.extend_from_slice(&[0x80 | 0x01 | 0x10, 1, 10]);
        assert!(matches!(apply_delta(base, &delta), Err(StoreError::BadDelta(_))));
    }

    #[test]
    fn delta_rejects_size_mismatch() {
        let mut delta = Vec::new();
        varint(5, &mut delta);
        varint(1, &mut delta);
        delta.extend_from_slice(&[1, b'x']);
        assert!(apply_delta(b"abc", &delta).is_err());
        let mut delta = Vec::new();
        varint(3, &mut delta);
        varint(2, &mut delta);
        delta.extend_from_slice(&[1, b'x']);
        assert!(apply_delta(b"abc", &delta).is_err());
    }

    #[test]
    fn copy_size_zero_means_64k() {
        let base = vec![7u8; 0x10000];
        let mut delta = Vec::new();
        varint(base.len(), &mut delta);
        varint(0x10000, &mut delta);
        delta.push(0x80);
        assert_eq!(apply_delta(&base, &delta).unwrap(), base);
    }
}
