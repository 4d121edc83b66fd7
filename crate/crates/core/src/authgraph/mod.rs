//! Enforces the authorization invariant between a channel introduction and
//! a target commit.
//!
//! Keys come from a keyring branch loaded once per run. Each commit between
//! the introduction and the target must be signed by a key listed in the
//! `.guix-authorizations` file of every one of its parents. Commits already
//! authenticated in a previous run (see [`AuthCache`]) are skipped together
//! with their ancestors.

mod cache;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::authz::{parse_authorizations, AuthorizationList, AuthzError, AUTHORIZATIONS_FILE};
use crate::gitstore::{
    commit_difference, is_ancestor, signed_payload, Commit, ObjectId, ObjectKind, Repository, StoreError,
};
use crate::sigverify::{load_keys, parse_signature, verify_detailed, Fingerprint, Keyring, PgpError, Verified};

pub use cache::{cache_key, cache_read, cache_write, AuthCache, CacheContents};

pub const DEFAULT_KEYRING_REF: &str = "refs/heads/keyring";

/// Trust anchor: a commit and the fingerprint of the key that signed it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ChannelIntroduction {
    pub commit: ObjectId,
    pub signer: Fingerprint,
}

#[derive(Clone, Debug)]
pub struct AuthOptions {
    pub keyring_ref: String,
    /// Static list standing in for parents without a policy file.
    pub historical_authorizations: Option<AuthorizationList>,
    pub cache: Option<AuthCache>,
}

impl Default for AuthOptions {
    fn default() -> Self {
        AuthOptions { keyring_ref: DEFAULT_KEYRING_REF.to_string(), historical_authorizations: None, cache: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthReport {
    pub target: ObjectId,
    /// Commits whose signature and authorization were checked in this run,
    /// not counting the introduction.
    pub checked: usize,
    /// Commits that would have been checked but were covered by the cache.
    pub cache_skipped: usize,
    pub signers: BTreeMap<ObjectId, Fingerprint>,
    pub warnings: Vec<String>,
}

/// Why a single commit failed.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommitError {
    #[error("commit is not signed")]
    Unsigned,
    #[error(transparent)]
    Signature(#[from] PgpError),
    #[error("signer {signer} is not authorized by parent {parent}")]
    Unauthorized { parent: ObjectId, signer: Fingerprint },
    #[error("{}", match .parent {
        Some(p) => format!("parent {p} has no {AUTHORIZATIONS_FILE} file"),
        None => "root commit has no parent authorizations".to_string(),
    })]
    MissingAuthorizations { parent: Option<ObjectId> },
    #[error("invalid {AUTHORIZATIONS_FILE} in {parent}: {error}")]
    Policy { parent: ObjectId, error: AuthzError },
}

impl CommitError {
    pub fn kind(&self) -> &'static str {
        match self {
            CommitError::Unsigned => "Unsigned",
            CommitError::Signature(e) => match e {
                PgpError::WeakDigest(_) => "WeakDigest",
                PgpError::UnknownKey(_) => "UnknownKey",
                PgpError::BadSignature => "BadSignature",
                PgpError::Unsupported(_) => "UnsupportedSignature",
                _ => "MalformedSignature",
            },
            CommitError::Unauthorized { .. } => "Unauthorized",
            CommitError::MissingAuthorizations { .. } => "MissingAuthorizations",
            CommitError::Policy { error, .. } => match error {
                AuthzError::Syntax(_) => "SyntaxError",
                AuthzError::BadVersion(_) => "BadVersion",
                AuthzError::BadFingerprint(_) => "BadFingerprint",
                AuthzError::Malformed(_) => "MalformedAuthorizations",
            },
        }
    }
}

#[derive(Debug, Error)]
pub enum AuthError {
    #[error("keyring reference {0} not found")]
    KeyringNotFound(String),
    #[error("keyring {0} holds no usable OpenPGP key")]
    EmptyKeyring(String),
    #[error("commit {target} is not a descendant of introductory commit {intro}")]
    NotDescendantOfIntroduction { intro: ObjectId, target: ObjectId },
    #[error("introductory commit signed by {actual}, expected {expected}")]
    IntroductionSignerMismatch { expected: Fingerprint, actual: Fingerprint },
    #[error("commit {commit}: {kind}")]
    Commit { commit: ObjectId, kind: CommitError },
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl AuthError {
    /// Stable name of the error class, used in diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            AuthError::KeyringNotFound(_) => "KeyringNotFound",
            AuthError::EmptyKeyring(_) => "EmptyKeyring",
            AuthError::NotDescendantOfIntroduction { .. } => "NotDescendantOfIntroduction",
            AuthError::IntroductionSignerMismatch { .. } => "IntroductionSignerMismatch",
            AuthError::Commit { kind, .. } => kind.kind(),
            AuthError::Store(_) => "Store",
        }
    }

    /// The commit the error is about, when there is one.
    pub fn commit(&self) -> Option<ObjectId> {
        match self {
            AuthError::Commit { commit, .. } => Some(*commit),
            AuthError::NotDescendantOfIntroduction { target, .. } => Some(*target),
            _ => None,
        }
    }
}

/// Keyring assembled from a branch, with the number of files skipped
/// because they held no OpenPGP key.
#[derive(Clone, Debug, Default)]
pub struct LoadedKeyring {
    pub keyring: Keyring,
    pub skipped: usize,
}

fn resolve_keyring_ref<R: Repository + ?Sized>(repo: &R, name: &str) -> Result<ObjectId, AuthError> {
    let candidates = if name.starts_with("refs/") {
        vec![name.to_string()]
    } else {
        vec![format!("refs/heads/{name}"), format!("refs/remotes/origin/{name}"), name.to_string()]
    };
    for c in &candidates {
        match repo.resolve_ref(c) {
            Ok(id) => return Ok(id),
            Err(StoreError::RefNotFound(_) | StoreError::InvalidRefName(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(AuthError::KeyringNotFound(name.to_string()))
}

/// Loads every key file in the tree of the commit `keyring_ref` points to.
/// Branch names are looked up under `refs/heads/` and then
/// `refs/remotes/origin/`.
pub fn load_keyring<R: Repository + ?Sized>(repo: &R, keyring_ref: &str) -> Result<LoadedKeyring, AuthError> {
    let tip = resolve_keyring_ref(repo, keyring_ref)?;
    let commit = repo.read_commit(&tip)?;
    let mut out = LoadedKeyring::default();
    let mut stack = vec![commit.tree];
    while let Some(tree) = stack.pop() {
        for entry in repo.read_tree(&tree)? {
            if entry.is_tree() {
                stack.push(entry.id);
            } else if !entry.is_submodule() {
                let obj = repo.read_object(&entry.id)?;
                if obj.kind != ObjectKind::Blob {
                    continue;
                }
                match load_keys(&obj.payload) {
                    Ok(keys) => out.keyring.extend(keys),
                    Err(_) => out.skipped += 1,
                }
            }
        }
    }
    if out.keyring.is_empty() {
        return Err(AuthError::EmptyKeyring(keyring_ref.to_string()));
    }
    Ok(out)
}

/// Verifies the signature on `commit` against `keyring`.
pub fn verify_commit_signature(commit: &Commit, keyring: &Keyring) -> Result<Verified, CommitError> {
    let armored = commit.signature.as_deref().ok_or(CommitError::Unsigned)?;
    let sig = parse_signature(armored)?;
    Ok(verify_detailed(&sig, &signed_payload(commit), keyring)?)
}

fn check_membership(
    verified: &Verified,
    parent_sets: &[(ObjectId, &BTreeSet<Fingerprint>)],
) -> Result<Fingerprint, CommitError> {
    for (parent, set) in parent_sets {
        if !set.contains(&verified.primary) && !set.contains(&verified.signing_key) {
            return Err(CommitError::Unauthorized { parent: *parent, signer: verified.primary });
        }
    }
    Ok(verified.primary)
}

/// Checks `commit`'s signature, then that its signer appears in the
/// authorization set of every parent. `parent_sets` pairs each parent
/// with its set. A key matches when either its primary fingerprint or
/// the fingerprint of the subkey that signed is listed.
pub fn authenticate_commit(
    commit: &Commit,
    keyring: &Keyring,
    parent_sets: &[(ObjectId, &BTreeSet<Fingerprint>)],
) -> Result<Fingerprint, CommitError> {
    check_membership(&verify_commit_signature(commit, keyring)?, parent_sets)
}

fn annotate(commit: ObjectId) -> impl FnOnce(CommitError) -> AuthError {
    move |kind| AuthError::Commit { commit, kind }
}

/// Authorization set in effect at `parent`: its policy file, or the
/// historical list when the file is absent and one was supplied.
pub fn parent_authorizations<R: Repository + ?Sized>(
    repo: &R,
    parent: &ObjectId,
    options: &AuthOptions,
) -> Result<BTreeSet<Fingerprint>, AuthParentError> {
    match repo.read_path_at_commit(parent, AUTHORIZATIONS_FILE)? {
        Some(bytes) => parse_authorizations(&bytes)
            .map(|list| list.fingerprints())
            .map_err(|error| CommitError::Policy { parent: *parent, error }.into()),
        None => match &options.historical_authorizations {
            Some(list) => Ok(list.fingerprints()),
            None => Err(CommitError::MissingAuthorizations { parent: Some(*parent) }.into()),
        },
    }
}

/// Failure of [`parent_authorizations`]: either the store or the policy.
#[derive(Debug, Error)]
pub enum AuthParentError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Commit(#[from] CommitError),
}

struct PolicyMemo<'a, R: ?Sized> {
    repo: &'a R,
    options: &'a AuthOptions,
    sets: HashMap<ObjectId, BTreeSet<Fingerprint>>,
}

impl<'a, R: Repository + ?Sized> PolicyMemo<'a, R> {
    fn get(&mut self, parent: ObjectId, child: ObjectId) -> Result<&BTreeSet<Fingerprint>, AuthError> {
        if !self.sets.contains_key(&parent) {
            let set = parent_authorizations(self.repo, &parent, self.options).map_err(|e| match e {
                AuthParentError::Store(e) => AuthError::Store(e),
                AuthParentError::Commit(kind) => AuthError::Commit { commit: child, kind },
            })?;
            self.sets.insert(parent, set);
        }
        Ok(&self.sets[&parent])
    }
}

/// Authenticates every commit from `intro` (exclusive) to `target`.
pub fn authenticate_repository<R: Repository + ?Sized>(
    repo: &R,
    intro: &ChannelIntroduction,
    target: &ObjectId,
    options: &AuthOptions,
) -> Result<AuthReport, AuthError> {
    repo.read_commit(target)?;
    if !is_ancestor(repo, &intro.commit, target)? {
        return Err(AuthError::NotDescendantOfIntroduction { intro: intro.commit, target: *target });
    }

    let loaded = load_keyring(repo, &options.keyring_ref)?;
    let keyring = &loaded.keyring;
    let mut report =
        AuthReport { target: *target, checked: 0, cache_skipped: 0, signers: BTreeMap::new(), warnings: Vec::new() };
    if loaded.skipped > 0 {
        report.warnings.push(format!("skipped {} keyring file(s) holding no OpenPGP key", loaded.skipped));
    }

    let intro_commit = repo.read_commit(&intro.commit)?;
    let verified = verify_commit_signature(&intro_commit, keyring).map_err(annotate(intro.commit))?;
    if verified.primary != intro.signer && verified.signing_key != intro.signer {
        return Err(AuthError::IntroductionSignerMismatch { expected: intro.signer, actual: verified.primary });
    }

    let cached = match &options.cache {
        Some(cache) => {
            let contents = cache.read();
            report.warnings.extend(contents.warning);
            contents.ids.into_iter().filter(|id| repo.has_object(id)).collect()
        }
        None => HashSet::new(),
    };
    let mut excluded = cached.clone();
    excluded.insert(intro.commit);
    let pending = commit_difference(repo, target, &excluded)?;

    let historical = options.historical_authorizations.as_ref().map(|l| l.fingerprints());
    let mut memo = PolicyMemo { repo, options, sets: HashMap::new() };
    for commit in &pending {
        let verified = verify_commit_signature(commit, keyring).map_err(annotate(commit.id))?;
        if commit.parents.is_empty() {
            // A root other than the introduction has no parent to consult.
            let Some(set) = &historical else {
                return Err(annotate(commit.id)(CommitError::MissingAuthorizations { parent: None }));
            };
            check_membership(&verified, &[(commit.id, set)]).map_err(annotate(commit.id))?;
        }
        for parent in &commit.parents {
            let set = memo.get(*parent, commit.id)?;
            check_membership(&verified, &[(*parent, set)]).map_err(annotate(commit.id))?;
        }
        let signer = verified.primary;
        report.signers.insert(commit.id, signer);
    }
    report.checked = report.signers.len();
    if !cached.is_empty() {
        let full = commit_difference(repo, target, &HashSet::from([intro.commit]))?.len();
        report.cache_skipped = full.saturating_sub(report.checked);
    }

    if let Some(cache) = &options.cache {
        let mut ids: HashSet<ObjectId> = report.signers.keys().copied().collect();
        ids.insert(*target);
        if let Err(e) = cache.write(&ids) {
            report.warnings.push(format!("could not update cache {}: {e}", cache.path().display()));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::*;

    fn intro(hist: &SampleHistory, commit: ObjectId) -> ChannelIntroduction {
        ChannelIntroduction { commit, signer: hist.alice.fingerprint() }
    }

    fn run(hist: &SampleHistory, from: ObjectId, to: ObjectId) -> Result<AuthReport, AuthError> {
        authenticate_repository(&hist.repo.store, &intro(hist, from), &to, &AuthOptions::default())
    }

    #[test]
    fn keyring_of_three() {
        let hist = sample_history();
        let loaded = load_keyring(&hist.repo.store, DEFAULT_KEYRING_REF).unwrap();
        assert_eq!(loaded.keyring.primary_count(), 3);
        assert_eq!(loaded.skipped, 0);
        // Short branch names work too.
        assert_eq!(load_keyring(&hist.repo.store, "keyring").unwrap().keyring.primary_count(), 3);
    }

    #[test]
    fn keyring_of_readme_only_is_empty() {
        let mut repo = RepoBuilder::new();
        repo.keyring_tree(&tree_with(None, &[("README", b"keys go here")]));
        assert!(matches!(load_keyring(&repo.store, "keyring"), Err(AuthError::EmptyKeyring(_))));
        assert!(matches!(load_keyring(&repo.store, "nope"), Err(AuthError::KeyringNotFound(_))));
    }

    #[test]
    fn keyring_walks_nested_directories() {
        let (a, b) = (Committer::new("A"), Committer::new("B"));
        let mut repo = RepoBuilder::new();
        let files = tree_with(
            None,
            &[
                ("top/a.key", a.armored_public_key().as_bytes()),
                ("top/deeper/b.key", b.armored_public_key().as_bytes()),
                ("README", b"not a key"),
            ],
        );
        repo.keyring_tree(&files);
        let loaded = load_keyring(&repo.store, "keyring").unwrap();
        assert_eq!(loaded.keyring.primary_count(), 2);
        assert_eq!(loaded.skipped, 1);
    }

    #[test]
    fn single_commits_of_the_sample_history() {
        let hist = sample_history();
        let store = &hist.repo.store;
        let ring = load_keyring(store, "keyring").unwrap().keyring;
        let opts = AuthOptions::default();
        let set_b = parent_authorizations(store, &hist.b, &opts).unwrap();
        let c = store.read_commit(&hist.c).unwrap();
        assert_eq!(authenticate_commit(&c, &ring, &[(hist.b, &set_b)]).unwrap(), hist.bob.fingerprint());

        let set_d = parent_authorizations(store, &hist.d, &opts).unwrap();
        let set_e = parent_authorizations(store, &hist.e, &opts).unwrap();
        let f = store.read_commit(&hist.f).unwrap();
        assert_eq!(
            authenticate_commit(&f, &ring, &[(hist.d, &set_d), (hist.e, &set_e)]).unwrap(),
            hist.alice.fingerprint()
        );

        let set_a = parent_authorizations(store, &hist.a, &opts).unwrap();
        assert_eq!(
            authenticate_commit(&c, &ring, &[(hist.b, &set_b), (hist.a, &set_a)]),
            Err(CommitError::Unauthorized { parent: hist.a, signer: hist.bob.fingerprint() })
        );
    }

    #[test]
    fn parent_policy_sources() {
        const SAMPLE: &[u8] = br#"(authorizations (version 0)
 ((("AD17 A21E F8AE D8F1 CC02 DBD9 F8AE D8F1 765C 61E3" (name "alice"))
  ("2A39 3FFF 68F4 EF7A 3D29 12AF 68F4 EF7A 22FB B2D5" (name "bob"))
  ("CABB A931 C0FF EEC6 900D 0CFB 090B 1199 3D9A EBB5" (name "charlie")))))"#;
        let mut repo = RepoBuilder::new();
        let with = repo.commit(&[], &tree_with(None, &[(AUTHORIZATIONS_FILE, SAMPLE)]), Sign::Unsigned, "p");
        let without = repo.commit(&[], &tree_with(None, &[("README", b"x")]), Sign::Unsigned, "q");
        let normal = AuthOptions::default();
        assert_eq!(parent_authorizations(&repo.store, &with, &normal).unwrap().len(), 3);
        assert!(matches!(
            parent_authorizations(&repo.store, &without, &normal),
            Err(AuthParentError::Commit(CommitError::MissingAuthorizations { parent: Some(p) })) if p == without
        ));
        let list = AuthorizationList::parse(SAMPLE).unwrap();
        let historical = AuthOptions { historical_authorizations: Some(list.clone()), ..AuthOptions::default() };
        assert_eq!(parent_authorizations(&repo.store, &without, &historical).unwrap(), list.fingerprints());
    }

    #[test]
    fn introduction_scenarios() {
        let forked = forked_history();
        let hist = &forked.base;
        let report = run(hist, hist.b, hist.f).unwrap();
        let checked: BTreeSet<_> = report.signers.keys().copied().collect();
        assert_eq!(checked, [hist.c, hist.d, hist.e, hist.f].into());
        assert_eq!(report.checked, 4);
        for target in [forked.g, forked.h] {
            assert!(matches!(run(hist, hist.b, target), Err(AuthError::NotDescendantOfIntroduction { .. })));
        }
        let same = run(hist, hist.b, hist.b).unwrap();
        assert_eq!(same.checked, 0);
    }

    #[test]
    fn introduction_signer_is_checked() {
        let hist = sample_history();
        let wrong = ChannelIntroduction { commit: hist.a, signer: hist.bob.fingerprint() };
        let err = authenticate_repository(&hist.repo.store, &wrong, &hist.f, &AuthOptions::default()).unwrap_err();
        assert!(matches!(err, AuthError::IntroductionSignerMismatch { .. }));
    }

    #[test]
    fn mutations_fail_with_their_kind() {
        let cases = [
            (SampleMutation::UnsignedC, "Unsigned"),
            (SampleMutation::CByOutsider, "Unauthorized"),
            (SampleMutation::FUnauthorizedByE, "Unauthorized"),
        ];
        for (mutation, kind) in cases {
            let hist = sample_history_with(mutation);
            let err = run(&hist, hist.a, hist.f).unwrap_err();
            assert_eq!(err.kind(), kind, "{mutation:?}");
            let culprit = if mutation == SampleMutation::FUnauthorizedByE { hist.f } else { hist.c };
            assert_eq!(err.commit(), Some(culprit));
        }
        let hist = sample_history_with(SampleMutation::FUnauthorizedByE);
        assert!(matches!(
            run(&hist, hist.a, hist.f),
            Err(AuthError::Commit { kind: CommitError::Unauthorized { parent, .. }, .. }) if parent == hist.e
        ));
    }

    #[test]
    fn new_key_is_not_trusted_by_its_own_commit() {
        let (alice, bob) = (Committer::new("Alice"), Committer::new("Bob"));
        let mut repo = RepoBuilder::new();
        repo.keyring(&[&alice, &bob]);
        let a = repo.policy_commit(&[], &[&alice], Sign::By(&alice), "a");
        let b = repo.policy_commit(&[a], &[&alice, &bob], Sign::By(&bob), "bob adds himself");
        let intro = ChannelIntroduction { commit: a, signer: alice.fingerprint() };
        let err = authenticate_repository(&repo.store, &intro, &b, &AuthOptions::default()).unwrap_err();
        assert_eq!(err.kind(), "Unauthorized");
    }

    #[test]
    fn removed_key_is_rejected_afterwards() {
        let (alice, bob) = (Committer::new("Alice"), Committer::new("Bob"));
        let mut repo = RepoBuilder::new();
        repo.keyring(&[&alice, &bob]);
        let a = repo.policy_commit(&[], &[&alice, &bob], Sign::By(&alice), "a");
        let b = repo.policy_commit(&[a], &[&alice], Sign::By(&bob), "bob removes himself");
        let c = repo.policy_commit(&[b], &[&alice], Sign::By(&bob), "bob again");
        let intro = ChannelIntroduction { commit: a, signer: alice.fingerprint() };
        assert!(authenticate_repository(&repo.store, &intro, &b, &AuthOptions::default()).is_ok());
        let err = authenticate_repository(&repo.store, &intro, &c, &AuthOptions::default()).unwrap_err();
        assert_eq!(err.commit(), Some(c));
        assert_eq!(err.kind(), "Unauthorized");
    }

    #[test]
    fn malformed_policy_in_history_is_fatal() {
        let alice = Committer::new("Alice");
        let mut repo = RepoBuilder::new();
        repo.keyring(&[&alice]);
        let a = repo.policy_commit(&[], &[&alice], Sign::By(&alice), "a");
        let broken = tree_with(None, &[(AUTHORIZATIONS_FILE, b"(authorizations (version 1) ())")]);
        let b = repo.commit(&[a], &broken, Sign::By(&alice), "b");
        let c = repo.policy_commit(&[b], &[&alice], Sign::By(&alice), "c");
        let intro = ChannelIntroduction { commit: a, signer: alice.fingerprint() };
        let err = authenticate_repository(&repo.store, &intro, &c, &AuthOptions::default()).unwrap_err();
        assert_eq!(err.kind(), "BadVersion");
        assert_eq!(err.commit(), Some(c));
    }

    #[test]
    fn warm_cache_skips_everything() {
        let hist = sample_history();
        let dir = tempfile::tempdir().unwrap();
        let i = intro(&hist, hist.a);
        let opts = AuthOptions { cache: Some(AuthCache::for_introduction(dir.path(), &i)), ..AuthOptions::default() };
        let cold = authenticate_repository(&hist.repo.store, &i, &hist.f, &opts).unwrap();
        assert_eq!(cold.checked, 5);
        assert_eq!(cold.cache_skipped, 0);
        let warm = authenticate_repository(&hist.repo.store, &i, &hist.f, &opts).unwrap();
        assert_eq!(warm.checked, 0);
        assert_eq!(warm.cache_skipped, 5);

        // A cache for another introduction is independent.
        let other = ChannelIntroduction { commit: hist.b, signer: hist.alice.fingerprint() };
        let opts2 =
            AuthOptions { cache: Some(AuthCache::for_introduction(dir.path(), &other)), ..AuthOptions::default() };
        assert_eq!(authenticate_repository(&hist.repo.store, &other, &hist.f, &opts2).unwrap().checked, 4);
    }

    #[test]
    fn cached_descendant_resumes_from_cache() {
        let mut hist = sample_history();
        let dir = tempfile::tempdir().unwrap();
        let i = intro(&hist, hist.a);
        let opts = AuthOptions { cache: Some(AuthCache::for_introduction(dir.path(), &i)), ..AuthOptions::default() };
        authenticate_repository(&hist.repo.store, &i, &hist.f, &opts).unwrap();
        let (alice, bob, f) = (hist.alice.clone(), hist.bob.clone(), hist.f);
        let g = hist.repo.policy_commit(&[f], &[&alice, &bob], Sign::By(&bob), "G");
        let report = authenticate_repository(&hist.repo.store, &i, &g, &opts).unwrap();
        assert_eq!(report.checked, 1);
        assert_eq!(report.cache_skipped, 5);
    }

    #[test]
    fn unwritable_cache_is_a_warning() {
        let hist = sample_history();
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"").unwrap();
        let opts = AuthOptions { cache: Some(AuthCache::new(&blocker, "k")), ..AuthOptions::default() };
        let report = authenticate_repository(&hist.repo.store, &intro(&hist, hist.a), &hist.f, &opts).unwrap();
        assert_eq!(report.checked, 5);
        assert!(report.warnings.iter().any(|w| w.starts_with("could not update cache")));
    }
}
