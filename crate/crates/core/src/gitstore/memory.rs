use std::collections::{BTreeMap, HashMap};

use super::commit::{serialize_tree, TreeEntry};
use super::refs::{self, RefValue};
use super::{hash_object, verify_integrity, ObjectId, ObjectKind, RawObject, Repository, Result, StoreError};

/// In-memory object store and reference namespace.
///
/// Writers build fixtures single-threaded; once built, the store is a plain
/// read-only [`Repository`].
#[derive(Clone, Debug, Default)]
pub struct MemoryStore {
    objects: HashMap<ObjectId, RawObject>,
    refs: HashMap<String, RefValue>,
}

/// Commit headers and message, serialized the way `git commit` does.
#[derive(Clone, Debug)]
pub struct CommitTemplate {
    pub tree: ObjectId,
    pub parents: Vec<ObjectId>,
    pub author: String,
    pub committer: String,
    pub message: String,
}

impl CommitTemplate {
    /// Payload bytes; `signature` is placed in a `gpgsig` header after
    /// `committer`, with continuation lines prefixed by a space.
    pub fn payload(&self, signature: Option<&str>) -> Vec<u8> {
        let mut out = String::new();
        out.push_str(&format!("tree {}\n", self.tree));
        for p in &self.parents {
            out.push_str(&format!("parent {p}\n"));
        }
        out.push_str(&format!("author {}\n", self.author));
        out.push_str(&format!("committer {}\n", self.committer));
        if let Some(sig) = signature {
            out.push_str("gpgsig ");
            out.push_str(&sig.trim_end_matches('\n').replace('\n', "\n "));
            out.push('\n');
        }
        out.push('\n');
        out.push_str(&self.message);
        out.into_bytes()
    }
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, kind: ObjectKind, payload: Vec<u8>) -> ObjectId {
        let obj = RawObject::new(kind, payload);
        let id = obj.id();
        self.objects.insert(id, obj);
        id
    }

    /// Stores `obj` under `id` without checking that the digest matches.
    /// Reads of such an object fail with `Corrupt`.
    pub fn insert_unchecked(&mut self, id: ObjectId, obj: RawObject) {
        self.objects.insert(id, obj);
    }

    pub fn remove(&mut self, id: &ObjectId) -> Option<RawObject> {
        self.objects.remove(id)
    }

    pub fn write_blob(&mut self, data: &[u8]) -> ObjectId {
        self.insert(ObjectKind::Blob, data.to_vec())
    }

    /// Writes nested trees for `files`, whose keys are `/`-separated paths.
    pub fn write_tree(&mut self, files: &BTreeMap<String, Vec<u8>>) -> ObjectId {
        #[derive(Default)]
        struct Dir {
            files: BTreeMap<String, Vec<u8>>,
            dirs: BTreeMap<String, Dir>,
        }
        fn write(store: &mut MemoryStore, dir: &Dir) -> ObjectId {
            let mut entries = Vec::new();
            for (name, data) in &dir.files {
                let id = store.write_blob(data);
                entries.push(TreeEntry { mode: "100644".into(), name: name.as_bytes().to_vec(), id });
            }
            for (name, sub) in &dir.dirs {
                let id = write(store, sub);
                entries.push(TreeEntry { mode: "40000".into(), name: name.as_bytes().to_vec(), id });
            }
            store.insert(ObjectKind::Tree, serialize_tree(&entries))
        }
        let mut root = Dir::default();
        for (path, data) in files {
            let parts: Vec<&str> = path.split('/').filter(|p| !p.is_empty()).collect();
            let Some((file, dirs)) = parts.split_last() else { continue };
            let mut node = &mut root;
            for d in dirs {
                node = node.dirs.entry(d.to_string()).or_default();
            }
            node.files.insert(file.to_string(), data.clone());
        }
        write(self, &root)
    }

    pub fn write_commit(&mut self, template: &CommitTemplate, signature: Option<&str>) -> ObjectId {
        self.insert(ObjectKind::Commit, template.payload(signature))
    }

    pub fn set_ref(&mut self, name: &str, id: ObjectId) {
        self.refs.insert(name.to_string(), RefValue::Direct(id));
    }

    pub fn set_symref(&mut self, name: &str, target: &str) {
        self.refs.insert(name.to_string(), RefValue::Symbolic(target.to_string()));
    }

    pub fn objects(&self) -> impl Iterator<Item = (&ObjectId, &RawObject)> {
        self.objects.iter()
    }

    /// Direct references and their targets.
    pub fn direct_refs(&self) -> impl Iterator<Item = (&str, ObjectId)> {
        self.refs.iter().filter_map(|(n, v)| match v {
            RefValue::Direct(id) => Some((n.as_str(), *id)),
            RefValue::Symbolic(_) => None,
        })
    }

    /// Symbolic references and the names they point to.
    pub fn symbolic_refs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.refs.iter().filter_map(|(n, v)| match v {
            RefValue::Symbolic(t) => Some((n.as_str(), t.as_str())),
            RefValue::Direct(_) => None,
        })
    }
}

impl Repository for MemoryStore {
    fn read_object(&self, id: &ObjectId) -> Result<RawObject> {
        let obj = self.objects.get(id).ok_or(StoreError::NotFound(*id))?;
        verify_integrity(id, obj)?;
        Ok(obj.clone())
    }

    fn resolve_ref(&self, name: &str) -> Result<ObjectId> {
        refs::resolve(self, name, |n| Ok(self.refs.get(n).cloned()))
    }

    fn has_object(&self, id: &ObjectId) -> bool {
        self.objects.get(id).is_some_and(|o| hash_object(o.kind, &o.payload) == *id)
    }
}
