//! Per-introduction record of commits already authenticated.

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::gitstore::ObjectId;

use super::ChannelIntroduction;

/// Handle on one cache file. Reads never fail: a missing or unreadable
/// file is an empty cache.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthCache {
    path: PathBuf,
}

/// Contents of a cache file, plus a note when the file had to be ignored.
#[derive(Clone, Debug, Default)]
pub struct CacheContents {
    pub ids: HashSet<ObjectId>,
    pub warning: Option<String>,
}

/// Default file name for an introduction: commit hex and signer hex.
pub fn cache_key(intro: &ChannelIntroduction) -> String {
    format!("{}-{}", intro.commit.to_hex(), intro.signer.to_hex().to_lowercase())
}

fn sanitize(key: &str) -> String {
    let cleaned: String =
        key.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' }).collect();
    match cleaned.trim_start_matches('.') {
        "" => "_".to_string(),
        s => s.to_string(),
    }
}

impl AuthCache {
    /// Cache stored at exactly `path`.
    pub fn at_path(path: impl Into<PathBuf>) -> Self {
        AuthCache { path: path.into() }
    }

    /// `<state_dir>/authentication/<key>`, with `key` reduced to a safe file name.
    pub fn new(state_dir: impl AsRef<Path>, key: &str) -> Self {
        AuthCache { path: state_dir.as_ref().join("authentication").join(sanitize(key)) }
    }

    pub fn for_introduction(state_dir: impl AsRef<Path>, intro: &ChannelIntroduction) -> Self {
        Self::new(state_dir, &cache_key(intro))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn read(&self) -> CacheContents {
        cache_read(&self.path)
    }

    /// Adds `ids` to whatever the file currently holds.
    pub fn write(&self, ids: &HashSet<ObjectId>) -> io::Result<()> {
        cache_write(&self.path, ids)
    }
}

pub fn cache_read(path: &Path) -> CacheContents {
    let text = match fs::read(path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return CacheContents::default(),
        Err(e) => {
            return CacheContents {
                ids: HashSet::new(),
                warning: Some(format!("ignoring unreadable cache {}: {e}", path.display())),
            }
        }
    };
    let parsed: Option<HashSet<ObjectId>> = std::str::from_utf8(&text).ok().and_then(|text| {
        if !text.is_empty() && !text.ends_with('\n') {
            return None;
        }
        text.lines().map(|l| l.parse::<ObjectId>().ok()).collect()
    });
    match parsed {
        Some(ids) => CacheContents { ids, warning: None },
        None => {
            CacheContents { ids: HashSet::new(), warning: Some(format!("ignoring corrupt cache {}", path.display())) }
        }
    }
}

/// Writes the union of `ids` and the current file contents, atomically.
pub fn cache_write(path: &Path, ids: &HashSet<ObjectId>) -> io::Result<()> {
    let mut all: Vec<ObjectId> = cache_read(path).ids.union(ids).copied().collect();
    all.sort();
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("cache");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        let mut text = String::with_capacity(all.len() * 41);
        for id in &all {
            text.push_str(&id.to_hex());
            text.push('\n');
        }
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
