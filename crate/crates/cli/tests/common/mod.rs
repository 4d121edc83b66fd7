#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use gitauth::authgraph::ChannelIntroduction;
use gitauth::gitstore::MemoryStore;
use gitauth::testing::write_to_disk;
use gitauth_cli::{run, Context, ExitStatus};

pub struct Run {
    pub status: ExitStatus,
    pub out: String,
    pub err: String,
}

impl Run {
    pub fn code(&self) -> i32 {
        self.status.code()
    }
}

pub fn gitauth(args: &[&str]) -> Run {
    gitauth_with(args, &Context { state_dir: None, now: 1_700_000_000 })
}

pub fn gitauth_with(args: &[&str], ctx: &Context) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("gitauth").chain(args.iter().copied());
    let status = run(argv, &mut out, &mut err, ctx);
    Run { status, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

/// Writes `store` as a work tree's `.git` directory under `dir/name`.
pub fn on_disk(store: &MemoryStore, dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(name);
    write_to_disk(store, &path).unwrap();
    path
}

pub fn channel_file(dir: &Path, name: &str, url: &str, intro: &ChannelIntroduction) -> PathBuf {
    let path = dir.join(format!("{name}.scm"));
    let text = format!(
        "(list (channel\n  (name '{name})\n  (url \"{url}\")\n  (introduction\n    (make-channel-introduction\n      \"{}\"\n      (openpgp-fingerprint\n        \"{}\")))))\n",
        intro.commit, intro.signer
    );
    fs::write(&path, text).unwrap();
    path
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
