use std::fs;
use std::io::{ErrorKind, Read};
use std::path::{Path, PathBuf};

use flate2::read::ZlibDecoder;

use super::pack::{apply_delta, Pack, PackedEntry};
use super::refs::{self, RefValue};
use super::{verify_integrity, ObjectId, ObjectKind, RawObject, Repository, Result, StoreError, MAX_DELTA_DEPTH};

/// An on-disk repository opened read-only.
pub struct DiskRepository {
    git_dir: PathBuf,
    objects: PathBuf,
    packs: Vec<Pack>,
}

impl std::fmt::Debug for DiskRepository {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiskRepository").field("git_dir", &self.git_dir).field("packs", &self.packs.len()).finish()
    }
}

fn find_git_dir(path: &Path) -> Result<PathBuf> {
    let dot_git = path.join(".git");
    if dot_git.is_dir() {
        return Ok(dot_git);
    }
    if dot_git.is_file() {
        let content = fs::read_to_string(&dot_git)?;
        if let Some(target) = content.trim().strip_prefix("gitdir:") {
            let target = Path::new(target.trim());
            return Ok(if target.is_absolute() { target.to_path_buf() } else { path.join(target) });
        }
    }
    if path.join("objects").is_dir() && path.join("HEAD").is_file() {
        return Ok(path.to_path_buf());
    }
    Err(StoreError::NotARepository(path.display().to_string()))
}

impl DiskRepository {
    /// Opens a work tree (containing `.git`) or a bare repository.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let git_dir = find_git_dir(path.as_ref())?;
        let objects = git_dir.join("objects");
        let mut packs = Vec::new();
        let pack_dir = objects.join("pack");
        if pack_dir.is_dir() {
            let mut idx_files: Vec<PathBuf> = fs::read_dir(&pack_dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "idx"))
                .collect();
            idx_files.sort();
            for idx in idx_files {
                packs.push(Pack::open(&idx)?);
            }
        }
        Ok(DiskRepository { git_dir, objects, packs })
    }

    pub fn git_dir(&self) -> &Path {
        &self.git_dir
    }

    fn read_loose(&self, id: &ObjectId) -> Result<Option<RawObject>> {
        let hex = id.to_hex();
        let path = self.objects.join(&hex[..2]).join(&hex[2..]);
        let compressed = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let mut data = Vec::new();
        ZlibDecoder::new(compressed.as_slice())
            .read_to_end(&mut data)
            .map_err(|e| StoreError::corrupt(Some(*id), format!("undecodable loose object: {e}")))?;
        let nul =
            data.iter().position(|&b| b == 0).ok_or_else(|| StoreError::corrupt(Some(*id), "missing object header"))?;
        let header = &data[..nul];
        let sp = header
            .iter()
            .position(|&b| b == b' ')
            .ok_or_else(|| StoreError::corrupt(Some(*id), "malformed object header"))?;
        let kind = ObjectKind::from_name(&header[..sp])
            .ok_or_else(|| StoreError::corrupt(Some(*id), "unknown object type"))?;
        let len: usize = std::str::from_utf8(&header[sp + 1..])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| StoreError::corrupt(Some(*id), "bad object length"))?;
        if data.len() - nul - 1 != len {
            return Err(StoreError::corrupt(Some(*id), "object length mismatch"));
        }
        data.drain(..=nul);
        Ok(Some(RawObject::new(kind, data)))
    }

    fn read_unverified(&self, id: &ObjectId, depth: usize) -> Result<RawObject> {
        if depth > MAX_DELTA_DEPTH {
            return Err(StoreError::corrupt(Some(*id), "delta chain exceeds maximum depth"));
        }
        if let Some(obj) = self.read_loose(id)? {
            return Ok(obj);
        }
        for pack in &self.packs {
            let Some(offset) = pack.find(id) else { continue };
            return match pack.read_at(offset, depth)? {
                PackedEntry::Full(kind, payload) => Ok(RawObject::new(kind, payload)),
                PackedEntry::RefDelta { base, delta } => {
                    let base_obj = match self.read_unverified(&base, depth + 1) {
                        Err(StoreError::NotFound(_)) => {
                            return Err(StoreError::BadDelta(format!("base {base} of {id} is missing")))
                        }
                        other => other?,
                    };
                    Ok(RawObject::new(base_obj.kind, apply_delta(&base_obj.payload, &delta)?))
                }
            };
        }
        Err(StoreError::NotFound(*id))
    }

    fn lookup_ref(&self, name: &str) -> Result<Option<RefValue>> {
        let path = self.git_dir.join(name);
        match fs::read_to_string(&path) {
            Ok(content) => return refs::parse_ref_file(&content).map(Some),
            Err(e) if e.kind() == ErrorKind::NotFound || path.is_dir() => {}
            Err(e) => return Err(e.into()),
        }
        match fs::read_to_string(self.git_dir.join("packed-refs")) {
            Ok(content) => Ok(refs::lookup_packed(&content, name)?.map(RefValue::Direct)),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

impl Repository for DiskRepository {
    fn read_object(&self, id: &ObjectId) -> Result<RawObject> {
        let obj = self.read_unverified(id, 0)?;
        verify_integrity(id, &obj)?;
        Ok(obj)
    }

    fn resolve_ref(&self, name: &str) -> Result<ObjectId> {
        refs::resolve(self, name, |n| self.lookup_ref(n))
    }
}
