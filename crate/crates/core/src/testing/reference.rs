//! Fixtures produced by the reference `git` and `gpg` command-line tools.
//!
//! Used to check that objects, keys and signatures written by mainstream
//! tooling read back identically here. Both programs must be on `PATH`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use std::collections::BTreeMap;

use crate::gitstore::{ObjectId, ObjectKind};
use crate::sigverify::Fingerprint;

/// Commit timestamps start here and advance one minute per commit.
const EPOCH: u64 = 1_650_000_000;

fn check(what: &str, out: Output) -> io::Result<Vec<u8>> {
    if out.status.success() {
        Ok(out.stdout)
    } else {
        Err(io::Error::other(format!("{what} failed: {}", String::from_utf8_lossy(&out.stderr).trim())))
    }
}

/// A private GnuPG home with generated keys.
#[derive(Debug)]
pub struct GpgHome {
    pub dir: PathBuf,
}

impl GpgHome {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            fs::set_permissions(dir, fs::Permissions::from_mode(0o700))?;
        }
        fs::write(dir.join("gpg.conf"), "personal-digest-preferences SHA256\ncert-digest-algo SHA256\n")?;
        Ok(GpgHome { dir: dir.to_path_buf() })
    }

    pub fn gpg(&self) -> Command {
        let mut cmd = Command::new("gpg");
        cmd.env("GNUPGHOME", &self.dir)
            .args(["--batch", "--no-tty", "--passphrase", "", "--pinentry-mode", "loopback"])
            .stdin(Stdio::null());
        cmd
    }

    pub fn run(&self, args: &[&str]) -> io::Result<Vec<u8>> {
        check(&format!("gpg {}", args.join(" ")), self.gpg().args(args).output()?)
    }

    /// Generates a signing-only primary key; `algo` is e.g. `ed25519` or `rsa2048`.
    pub fn generate(&self, uid: &str, algo: &str) -> io::Result<Fingerprint> {
        self.run(&["--quick-gen-key", uid, algo, "sign", "never"])?;
        Ok(self.fingerprints(uid)?[0])
    }

    /// Adds a signing subkey to `primary` and returns its fingerprint.
    pub fn add_signing_subkey(&self, primary: &Fingerprint, algo: &str) -> io::Result<Fingerprint> {
        self.run(&["--quick-add-key", &primary.to_hex(), algo, "sign", "never"])?;
        Ok(*self.fingerprints(&primary.to_hex())?.last().unwrap())
    }

    /// Fingerprints of the primary key matching `who` and its subkeys, as
    /// listed by `gpg --with-colons`.
    pub fn fingerprints(&self, who: &str) -> io::Result<Vec<Fingerprint>> {
        let out = self.run(&["--with-colons", "--list-keys", who])?;
        Ok(String::from_utf8_lossy(&out)
            .lines()
            .filter(|l| l.starts_with("fpr:"))
            .filter_map(|l| l.split(':').nth(9).and_then(|f| f.parse().ok()))
            .collect())
    }

    pub fn export(&self, who: &str, armored: bool) -> io::Result<Vec<u8>> {
        if armored {
            self.run(&["--armor", "--export", who])
        } else {
            self.run(&["--export", who])
        }
    }
}

/// A work tree driven through the `git` binary.
#[derive(Debug)]
pub struct GitRepo {
    pub path: PathBuf,
    gnupghome: PathBuf,
    clock: u64,
}

impl GitRepo {
    pub fn init(path: &Path, gpg: &GpgHome) -> io::Result<Self> {
        fs::create_dir_all(path)?;
        let mut repo = GitRepo { path: path.to_path_buf(), gnupghome: gpg.dir.clone(), clock: EPOCH };
        repo.git(&["init", "-q"])?;
        repo.git(&["symbolic-ref", "HEAD", "refs/heads/master"])?;
        repo.git(&["config", "user.name", "Fixture"])?;
        repo.git(&["config", "user.email", "fixture@example.org"])?;
        repo.git(&["config", "commit.gpgsign", "false"])?;
        repo.git(&["config", "gc.auto", "0"])?;
        Ok(repo)
    }

    pub fn command(&self) -> Command {
        let mut cmd = Command::new("git");
        let date = format!("{} +0000", self.clock);
        cmd.current_dir(&self.path)
            .env("GNUPGHOME", &self.gnupghome)
            .env("GIT_AUTHOR_DATE", &date)
            .env("GIT_COMMITTER_DATE", &date)
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .env("HOME", &self.path)
            .stdin(Stdio::null());
        cmd
    }

    pub fn git(&mut self, args: &[&str]) -> io::Result<Vec<u8>> {
        check(&format!("git {}", args.join(" ")), self.command().args(args).output()?)
    }

    fn git_text(&mut self, args: &[&str]) -> io::Result<String> {
        Ok(String::from_utf8_lossy(&self.git(args)?).trim().to_string())
    }

    pub fn write(&self, name: &str, data: &[u8]) -> io::Result<()> {
        let path = self.path.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, data)
    }

    /// Commits all changes in the work tree, signed by `key` when given.
    pub fn commit(&mut self, message: &str, key: Option<&Fingerprint>) -> io::Result<ObjectId> {
        self.clock += 60;
        self.git(&["add", "-A"])?;
        let sign = key.map(|k| format!("-S{}", k.to_hex()));
        let mut args = vec!["commit", "-q", "--allow-empty", "-m", message];
        if let Some(s) = &sign {
            args.push(s);
        }
        self.git(&args)?;
        self.head()
    }

    pub fn head(&mut self) -> io::Result<ObjectId> {
        self.git_text(&["rev-parse", "HEAD"])?.parse().map_err(|_| io::Error::other("bad rev-parse output"))
    }

    /// Creates `branch` with a single unsigned commit holding `files`,
    /// without touching the work tree.
    pub fn orphan_branch(&mut self, branch: &str, files: &[(&str, Vec<u8>)]) -> io::Result<ObjectId> {
        self.clock += 60;
        let mut listing = String::new();
        for (name, data) in files {
            let mut child = self
                .command()
                .args(["hash-object", "-w", "--stdin"])
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()?;
            io::Write::write_all(child.stdin.as_mut().unwrap(), data)?;
            let id = String::from_utf8_lossy(&check("git hash-object", child.wait_with_output()?)?).trim().to_string();
            listing.push_str(&format!("100644 blob {id}\t{name}\n"));
        }
        let mut child = self.command().args(["mktree"]).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        io::Write::write_all(child.stdin.as_mut().unwrap(), listing.as_bytes())?;
        let tree = String::from_utf8_lossy(&check("git mktree", child.wait_with_output()?)?).trim().to_string();
        let commit = self.git_text(&["commit-tree", &tree, "-m", "Keyring."])?;
        self.git(&["update-ref", &format!("refs/heads/{branch}"), &commit])?;
        commit.parse().map_err(|_| io::Error::other("bad commit-tree output"))
    }
}

impl GitRepo {
    /// Every object in the repository, as `git cat-file --batch` prints it.
    pub fn all_objects(&mut self) -> io::Result<BTreeMap<ObjectId, (ObjectKind, Vec<u8>)>> {
        let ids = self.git(&["cat-file", "--batch-all-objects", "--batch-check=%(objectname)"])?;
        let mut child =
            self.command().args(["cat-file", "--batch"]).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        io::Write::write_all(child.stdin.as_mut().unwrap(), &ids)?;
        drop(child.stdin.take());
        let out = check("git cat-file --batch", child.wait_with_output()?)?;

        let bad = || io::Error::new(io::ErrorKind::InvalidData, "unexpected cat-file output");
        let mut objects = BTreeMap::new();
        let mut rest = &out[..];
        while !rest.is_empty() {
            let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(bad)?;
            let header = String::from_utf8_lossy(&rest[..nl]).into_owned();
            let fields: Vec<&str> = header.split(' ').collect();
            let [id, kind, size] = fields[..] else { return Err(bad()) };
            let size: usize = size.parse().map_err(|_| bad())?;
            let kind = ObjectKind::from_name(kind.as_bytes()).ok_or_else(bad)?;
            let body = rest.get(nl + 1..nl + 1 + size).ok_or_else(bad)?.to_vec();
            objects.insert(id.parse().map_err(|_| bad())?, (kind, body));
            rest = rest.get(nl + 2 + size..).ok_or_else(bad)?;
        }
        Ok(objects)
    }

    /// Number of deltified entries across all packs, from `git verify-pack -v`.
    pub fn delta_count(&mut self) -> io::Result<usize> {
        let mut deltas = 0;
        for entry in fs::read_dir(self.path.join(".git/objects/pack"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "idx") {
                let out = self.git(&["verify-pack", "-v", &path.to_string_lossy()])?;
                // Delta lines add depth and base object columns.
                deltas += String::from_utf8_lossy(&out).lines().filter(|l| l.split_whitespace().count() == 7).count();
            }
        }
        Ok(deltas)
    }
}

/// Authorization file text in the two-level list form.
pub fn policy_text(entries: &[(&str, &Fingerprint)]) -> String {
    let mut out = String::from("(authorizations\n (version 0)\n (");
    for (i, (name, fp)) in entries.iter().enumerate() {
        if i > 0 {
            out.push_str("\n  ");
        }
        out.push_str(&format!("(\"{fp}\"\n   (name \"{name}\"))"));
    }
    out.push_str("))\n");
    out
}

/// The scripted repository: ten commits on `master`, signed by Alice
/// (Ed25519, through a signing subkey) and Bob (RSA 2048); commit 5 adds Bob to the policy. The
/// `keyring` branch holds Alice's armored key and Bob's binary key.
#[derive(Debug)]
pub struct ReferenceFixture {
    pub gpg: GpgHome,
    pub repo: GitRepo,
    pub alice: Fingerprint,
    /// Signing subkey that gpg selects for Alice's commits.
    pub alice_subkey: Fingerprint,
    pub bob: Fingerprint,
    pub commits: Vec<ObjectId>,
    /// For each commit, whether Bob (rather than Alice) signed it.
    pub signed_by_bob: Vec<bool>,
}

/// Large file edited a little in every commit, so that repacking produces deltas.
fn manual(revision: usize) -> Vec<u8> {
    let mut out = String::new();
    for line in 0..300 {
        let edit = if line % 50 == revision % 50 { format!(" (rev {revision})") } else { String::new() };
        out.push_str(&format!("Line {line} of the manual explains a little more about the project{edit}.\n"));
    }
    out.into_bytes()
}

pub fn reference_fixture(dir: &Path) -> io::Result<ReferenceFixture> {
    let gpg = GpgHome::create(&dir.join("gnupg"))?;
    let alice = gpg.generate("Alice <alice@example.org>", "ed25519")?;
    let alice_subkey = gpg.add_signing_subkey(&alice, "ed25519")?;
    let bob = gpg.generate("Bob <bob@example.org>", "rsa2048")?;
    let mut repo = GitRepo::init(&dir.join("repo"), &gpg)?;

    let mut commits = Vec::new();
    let signed_by_bob = vec![false, false, false, false, false, true, false, true, true, false];
    for (i, by_bob) in signed_by_bob.iter().enumerate() {
        let policy =
            if i < 4 { policy_text(&[("alice", &alice)]) } else { policy_text(&[("alice", &alice), ("bob", &bob)]) };
        repo.write(".guix-authorizations", policy.as_bytes())?;
        repo.write("doc/manual.txt", &manual(i))?;
        repo.write("NEWS", format!("Release {i}\n").as_bytes())?;
        let key = if *by_bob { &bob } else { &alice };
        commits.push(repo.commit(&format!("Commit {}", i + 1), Some(key))?);
    }
    let alice_key = gpg.export(&alice.to_hex(), true)?;
    let bob_key = gpg.export(&bob.to_hex(), false)?;
    repo.orphan_branch("keyring", &[("alice.asc", alice_key), ("bob.gpg", bob_key)])?;
    Ok(ReferenceFixture { gpg, repo, alice, alice_subkey, bob, commits, signed_by_bob })
}
