//! Read-only access to Git object databases.
//!
//! Objects are addressed by the SHA-1 of `"<kind> <len>\0" + payload`. Two
//! backends implement [`Repository`]: [`DiskRepository`] reads an on-disk
//! repository (loose objects and version-2 packfiles), and [`MemoryStore`]
//! is an in-memory store used to synthesize fixtures.

mod commit;
mod disk;
mod graph;
mod memory;
mod pack;
mod refs;

use std::fmt;
use std::str::FromStr;

use sha1::{Digest, Sha1};
use thiserror::Error;

pub use commit::{parse_commit, parse_tree, serialize_tree, signed_payload, Commit, Header, TreeEntry};
pub use disk::DiskRepository;
pub use graph::{commit_difference, is_ancestor};
pub use memory::{CommitTemplate, MemoryStore};
pub use refs::MAX_SYMREF_HOPS;

/// Maximum number of deltas followed when reconstructing a packed object.
pub const MAX_DELTA_DEPTH: usize = 64;

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("object {0} not found")]
    NotFound(ObjectId),
    #[error("reference {0} not found")]
    RefNotFound(String),
    #[error("corrupt object{}: {reason}", .id.map(|id| format!(" {id}")).unwrap_or_default())]
    Corrupt { id: Option<ObjectId>, reason: String },
    #[error("unresolvable delta: {0}")]
    BadDelta(String),
    #[error("malformed commit: {0}")]
    Malformed(String),
    #[error("symbolic reference loop while resolving {0}")]
    SymrefLoop(String),
    #[error("object {0} is not a commit")]
    NotACommit(ObjectId),
    #[error("invalid object id {0:?}")]
    InvalidObjectId(String),
    #[error("invalid reference name {0:?}")]
    InvalidRefName(String),
    #[error("not a git repository: {0}")]
    NotARepository(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl StoreError {
    pub(crate) fn corrupt(id: Option<ObjectId>, reason: impl Into<String>) -> Self {
        StoreError::Corrupt { id, reason: reason.into() }
    }
}

/// A 20-byte SHA-1 object name.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId([u8; 20]);

impl ObjectId {
    pub const LEN: usize = 20;

    pub fn from_bytes(bytes: [u8; 20]) -> Self {
        ObjectId(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; 20] = bytes.try_into().map_err(|_| StoreError::InvalidObjectId(hex::encode(bytes)))?;
        Ok(ObjectId(arr))
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Abbreviated form as printed by `git log --oneline`.
    pub fn short(&self) -> String {
        self.to_hex()[..7].to_string()
    }
}

impl FromStr for ObjectId {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() != 40 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(StoreError::InvalidObjectId(s.to_string()));
        }
        let mut out = [0u8; 20];
        hex::decode_to_slice(s, &mut out).map_err(|_| StoreError::InvalidObjectId(s.to_string()))?;
        Ok(ObjectId(out))
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ObjectId({})", self.to_hex())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ObjectKind {
    Commit,
    Tree,
    Blob,
    Tag,
}

impl ObjectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectKind::Commit => "commit",
            ObjectKind::Tree => "tree",
            ObjectKind::Blob => "blob",
            ObjectKind::Tag => "tag",
        }
    }

    pub fn from_name(name: &[u8]) -> Option<Self> {
        match name {
            b"commit" => Some(ObjectKind::Commit),
            b"tree" => Some(ObjectKind::Tree),
            b"blob" => Some(ObjectKind::Blob),
            b"tag" => Some(ObjectKind::Tag),
            _ => None,
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawObject {
    pub kind: ObjectKind,
    pub payload: Vec<u8>,
}

impl RawObject {
    pub fn new(kind: ObjectKind, payload: Vec<u8>) -> Self {
        RawObject { kind, payload }
    }

    pub fn id(&self) -> ObjectId {
        hash_object(self.kind, &self.payload)
    }
}

/// Computes the object name of `payload` stored as `kind`.
pub fn hash_object(kind: ObjectKind, payload: &[u8]) -> ObjectId {
    let mut hasher = Sha1::new();
    hasher.update(kind.as_str().as_bytes());
    hasher.update(b" ");
    hasher.update(payload.len().to_string().as_bytes());
    hasher.update([0u8]);
    hasher.update(payload);
    ObjectId(hasher.finalize().into())
}

pub(crate) fn verify_integrity(id: &ObjectId, obj: &RawObject) -> Result<()> {
    if obj.id() != *id {
        return Err(StoreError::corrupt(Some(*id), "content digest does not match object name"));
    }
    Ok(())
}

/// Read-only view over an object database and its references.
///
/// Implementations must be safe to share between reader threads.
pub trait Repository: Send + Sync {
    /// Returns the object named `id`, after checking its content digest.
    fn read_object(&self, id: &ObjectId) -> Result<RawObject>;

    /// Resolves a full reference name (or `HEAD`) to an object id, following
    /// symbolic references and peeling annotated tags.
    fn resolve_ref(&self, name: &str) -> Result<ObjectId>;

    fn has_object(&self, id: &ObjectId) -> bool {
        self.read_object(id).is_ok()
    }

    fn read_commit(&self, id: &ObjectId) -> Result<Commit> {
        let obj = self.read_object(id)?;
        if obj.kind != ObjectKind::Commit {
            return Err(StoreError::NotACommit(*id));
        }
        parse_commit(&obj)
    }

    fn read_tree(&self, id: &ObjectId) -> Result<Vec<TreeEntry>> {
        let obj = self.read_object(id)?;
        if obj.kind != ObjectKind::Tree {
            return Err(StoreError::corrupt(Some(*id), "expected a tree"));
        }
        parse_tree(&obj.payload).map_err(|e| match e {
            StoreError::Corrupt { reason, .. } => StoreError::corrupt(Some(*id), reason),
            other => other,
        })
    }

    /// Reads the blob at the `/`-separated `path` in the tree of `commit`.
    ///
    /// Returns `None` when a component is missing or when the path names a
    /// tree rather than a blob.
    fn read_path_at_commit(&self, commit: &ObjectId, path: &str) -> Result<Option<Vec<u8>>> {
        let commit = self.read_commit(commit)?;
        let mut current = commit.tree;
        let components: Vec<&str> = path.split('/').filter(|c| !c.is_empty()).collect();
        if components.is_empty() {
            return Ok(None);
        }
        for (i, name) in components.iter().enumerate() {
            let entries = self.read_tree(&current)?;
            let Some(entry) = entries.iter().find(|e| e.name.as_slice() == name.as_bytes()) else {
                return Ok(None);
            };
            let last = i + 1 == components.len();
            if entry.is_tree() {
                if last {
                    return Ok(None);
                }
                current = entry.id;
            } else if last {
                if entry.is_submodule() {
                    return Ok(None);
                }
                let obj = self.read_object(&entry.id)?;
                return Ok((obj.kind == ObjectKind::Blob).then_some(obj.payload));
            } else {
                return Ok(None);
            }
        }
        Ok(None)
    }
}

impl<R: Repository + ?Sized> Repository for &R {
    fn read_object(&self, id: &ObjectId) -> Result<RawObject> {
        (**self).read_object(id)
    }
    fn resolve_ref(&self, name: &str) -> Result<ObjectId> {
        (**self).resolve_ref(name)
    }
    fn has_object(&self, id: &ObjectId) -> bool {
        (**self).has_object(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_object_matches_git() {
        // `printf 'hello\n' | git hash-object --stdin`
        assert_eq!(hash_object(ObjectKind::Blob, b"hello\n").to_hex(), "ce013625030ba8dba906f756967f9e9ca394464a");
        // `git hash-object -t blob /dev/null`
        assert_eq!(hash_object(ObjectKind::Blob, b"").to_hex(), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
        // `git hash-object -t tree /dev/null`
        assert_eq!(hash_object(ObjectKind::Tree, b"").to_hex(), "4b825dc642cb6eb9a060e54bf8d69288fbee4904");
        assert_eq!(hash_object(ObjectKind::Blob, b"x"), hash_object(ObjectKind::Blob, b"x"));
    }

    #[test]
    fn object_id_text_form() {
        let id: ObjectId = "CE013625030BA8DBA906F756967F9E9CA394464A".parse().unwrap();
        assert_eq!(id.to_string(), "ce013625030ba8dba906f756967f9e9ca394464a");
        assert!("ce0136".parse::<ObjectId>().is_err());
        assert!("ce013625030ba8dba906f756967f9e9ca394464a0".parse::<ObjectId>().is_err());
        assert!("zz013625030ba8dba906f756967f9e9ca394464a".parse::<ObjectId>().is_err());
        assert!(ObjectId::from_slice(&[0u8; 19]).is_err());
    }
}
