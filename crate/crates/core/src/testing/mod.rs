//! Fixture construction: signed repositories built in memory, optionally
//! written out as loose objects so that external tools and the CLI can
//! read them.

pub mod model;
pub mod reference;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use flate2::write::ZlibEncoder;
use flate2::Compression;
use sha2::{Digest, Sha256};

use crate::authz::{AuthorizationEntry, AuthorizationList, AUTHORIZATIONS_FILE};
use crate::gitstore::{CommitTemplate, MemoryStore, ObjectId};
use crate::sigverify::{armor, export_public_key, sign_with, Fingerprint, HashAlgorithm, TestSigningKey};

/// A named committer with a deterministic Ed25519 key.
#[derive(Clone, Debug)]
pub struct Committer {
    pub name: String,
    pub key: TestSigningKey,
}

impl Committer {
    /// Key seeded from the name, so the same name always yields the same key.
    pub fn new(name: &str) -> Self {
        let seed: [u8; 32] = Sha256::digest(name.as_bytes()).into();
        Committer { name: name.to_string(), key: TestSigningKey::from_seed(seed, 1_577_836_800) }
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.key.fingerprint()
    }

    pub fn email(&self) -> String {
        format!("{}@example.org", self.name.to_lowercase())
    }

    /// Armored transferable public key.
    pub fn armored_public_key(&self) -> String {
        let uid = format!("{} <{}>", self.name, self.email());
        armor("PGP PUBLIC KEY BLOCK", &export_public_key(&self.key, &[], &uid))
    }
}

/// How a fixture commit is signed.
#[derive(Clone, Debug)]
pub enum Sign<'a> {
    Unsigned,
    By(&'a Committer),
    /// Signed with an explicit digest algorithm.
    Digest(&'a Committer, HashAlgorithm),
    /// Verbatim `gpgsig` content.
    Raw(String),
}

/// Policy file listing `who`.
pub fn authorizations_for(who: &[&Committer]) -> Vec<u8> {
    AuthorizationList {
        version: 0,
        entries: who
            .iter()
            .map(|c| AuthorizationEntry { fingerprint: c.fingerprint(), name: Some(c.name.to_lowercase()) })
            .collect(),
    }
    .to_text()
    .into_bytes()
}

/// Tree contents with an optional policy file and extra files.
pub fn tree_with(authorized: Option<&[&Committer]>, extra: &[(&str, &[u8])]) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    if let Some(who) = authorized {
        files.insert(AUTHORIZATIONS_FILE.to_string(), authorizations_for(who));
    }
    for (path, data) in extra {
        files.insert(path.to_string(), data.to_vec());
    }
    files
}

/// Builds signed commit graphs in a [`MemoryStore`].
#[derive(Clone, Debug)]
pub struct RepoBuilder {
    pub store: MemoryStore,
    clock: u64,
}

impl Default for RepoBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl RepoBuilder {
    pub fn new() -> Self {
        RepoBuilder { store: MemoryStore::new(), clock: 1_600_000_000 }
    }

    /// Commits the armored keys of `who` (as `<name>.key`) to `refs/heads/keyring`.
    pub fn keyring(&mut self, who: &[&Committer]) -> ObjectId {
        let files: BTreeMap<String, Vec<u8>> = who
            .iter()
            .map(|c| (format!("{}.key", c.name.to_lowercase()), c.armored_public_key().into_bytes()))
            .collect();
        self.keyring_tree(&files)
    }

    /// Commits arbitrary files to `refs/heads/keyring`.
    pub fn keyring_tree(&mut self, files: &BTreeMap<String, Vec<u8>>) -> ObjectId {
        let parent = self.store.resolve_ref_opt("refs/heads/keyring");
        let id = self.commit(parent.as_slice(), files, Sign::Unsigned, "Update keyring.");
        self.store.set_ref("refs/heads/keyring", id);
        id
    }

    pub fn commit(
        &mut self,
        parents: &[ObjectId],
        files: &BTreeMap<String, Vec<u8>>,
        sign: Sign<'_>,
        message: &str,
    ) -> ObjectId {
        self.clock += 60;
        let ident = match &sign {
            Sign::By(c) | Sign::Digest(c, _) => format!("{} <{}>", c.name, c.email()),
            _ => "Anonymous <anonymous@example.org>".to_string(),
        };
        let stamp = format!("{ident} {} +0000", self.clock);
        let template = CommitTemplate {
            tree: self.store.write_tree(files),
            parents: parents.to_vec(),
            author: stamp.clone(),
            committer: stamp,
            message: format!("{message}\n"),
        };
        let signature = match sign {
            Sign::Unsigned => None,
            Sign::By(c) => Some(sign_with(&template.payload(None), &c.key, HashAlgorithm::Sha256, 0)),
            Sign::Digest(c, hash) => Some(sign_with(&template.payload(None), &c.key, hash, 0)),
            Sign::Raw(text) => Some(text),
        };
        self.store.write_commit(&template, signature.as_deref())
    }

    /// Commit whose tree holds a policy listing `authorized` and a file
    /// named after the message.
    pub fn policy_commit(
        &mut self,
        parents: &[ObjectId],
        authorized: &[&Committer],
        sign: Sign<'_>,
        message: &str,
    ) -> ObjectId {
        let files = tree_with(Some(authorized), &[("NEWS", message.as_bytes())]);
        self.commit(parents, &files, sign, message)
    }

    pub fn branch(&mut self, name: &str, id: ObjectId) {
        self.store.set_ref(&format!("refs/heads/{name}"), id);
    }
}

impl MemoryStore {
    fn resolve_ref_opt(&self, name: &str) -> Option<ObjectId> {
        use crate::gitstore::Repository;
        self.resolve_ref(name).ok()
    }
}

/// The six-commit graph used throughout: A is the root, B follows
/// A, C and E follow B, D follows C, and F merges D and E. Only Alice is
/// authorized at A; B adds Bob. B and F are signed by Alice, C and D by
/// Bob, E by Alice.
#[derive(Clone, Debug)]
pub struct SampleHistory {
    pub repo: RepoBuilder,
    pub alice: Committer,
    pub bob: Committer,
    pub a: ObjectId,
    pub b: ObjectId,
    pub c: ObjectId,
    pub d: ObjectId,
    pub e: ObjectId,
    pub f: ObjectId,
}

/// Which commit of [`SampleHistory`] to tamper with while building it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMutation {
    None,
    UnsignedC,
    /// C signed by a key present in the keyring but in no policy.
    CByOutsider,
    /// E drops Bob from the policy and F is signed by Bob.
    FUnauthorizedByE,
}

pub fn sample_history() -> SampleHistory {
    sample_history_with(SampleMutation::None)
}

pub fn sample_history_with(mutation: SampleMutation) -> SampleHistory {
    let alice = Committer::new("Alice");
    let bob = Committer::new("Bob");
    let mallory = Committer::new("Mallory");
    let mut repo = RepoBuilder::new();
    repo.keyring(&[&alice, &bob, &mallory]);
    let a = repo.policy_commit(&[], &[&alice], Sign::By(&alice), "A: initial commit");
    let b = repo.policy_commit(&[a], &[&alice, &bob], Sign::By(&alice), "B: authorize Bob");
    let c_sign = match mutation {
        SampleMutation::UnsignedC => Sign::Unsigned,
        SampleMutation::CByOutsider => Sign::By(&mallory),
        _ => Sign::By(&bob),
    };
    let c = repo.policy_commit(&[b], &[&alice, &bob], c_sign, "C: main line");
    let d = repo.policy_commit(&[c], &[&alice, &bob], Sign::By(&bob), "D: main line");
    let (e_policy, f_signer): (&[&Committer], &Committer) = match mutation {
        SampleMutation::FUnauthorizedByE => (&[&alice], &bob),
        _ => (&[&alice, &bob], &alice),
    };
    let e = repo.policy_commit(&[b], e_policy, Sign::By(&alice), "E: feature branch");
    let f = repo.policy_commit(&[d, e], &[&alice, &bob], Sign::By(f_signer), "F: merge feature branch");
    repo.branch("master", f);
    repo.store.set_symref("HEAD", "refs/heads/master");
    SampleHistory { repo, alice, bob, a, b, c, d, e, f }
}

/// [`SampleHistory`]'s graph plus G, a child of A, and H, a child of G, neither
/// descending from B.
#[derive(Clone, Debug)]
pub struct ForkedHistory {
    pub base: SampleHistory,
    pub g: ObjectId,
    pub h: ObjectId,
}

pub fn forked_history() -> ForkedHistory {
    let mut base = sample_history();
    let (alice, a) = (base.alice.clone(), base.a);
    let g = base.repo.policy_commit(&[a], &[&alice], Sign::By(&alice), "G: elsewhere");
    let h = base.repo.policy_commit(&[g], &[&alice], Sign::By(&alice), "H: elsewhere");
    base.repo.branch("other", h);
    ForkedHistory { base, g, h }
}

/// Writes `store` as a non-bare repository at `dir` (objects loose, refs as
/// files). `HEAD` points to `refs/heads/master` unless the store says otherwise.
pub fn write_to_disk(store: &MemoryStore, dir: &Path) -> io::Result<()> {
    let git = dir.join(".git");
    fs::create_dir_all(git.join("objects"))?;
    fs::create_dir_all(git.join("refs/heads"))?;
    fs::create_dir_all(git.join("refs/tags"))?;
    fs::write(git.join("config"), "[core]\n\trepositoryformatversion = 0\n\tbare = false\n")?;
    for (id, obj) in store.objects() {
        let hex = id.to_hex();
        let subdir = git.join("objects").join(&hex[..2]);
        fs::create_dir_all(&subdir)?;
        let path = subdir.join(&hex[2..]);
        if path.exists() {
            continue;
        }
        let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
        enc.write_all(format!("{} {}\0", obj.kind.as_str(), obj.payload.len()).as_bytes())?;
        enc.write_all(&obj.payload)?;
        fs::write(path, enc.finish()?)?;
    }
    for (name, id) in store.direct_refs() {
        let path = git.join(name);
        fs::create_dir_all(path.parent().unwrap())?;
        fs::write(path, format!("{id}\n"))?;
    }
    let mut head_written = false;
    for (name, target) in store.symbolic_refs() {
        let path = git.join(name);
        fs::create_dir_all(path.parent().unwrap())?;
        fs::write(path, format!("ref: {target}\n"))?;
        head_written |= name == "HEAD";
    }
    if !head_written {
        fs::write(git.join("HEAD"), "ref: refs/heads/master\n")?;
    }
    Ok(())
}
