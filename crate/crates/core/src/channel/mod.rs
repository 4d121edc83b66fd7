//! Channel specifications and update policy.
//!
//! A channel file lists the repositories to follow together with their
//! introductions:
//!
//! ```text
//! (channel
//!   (name 'my-channel)
//!   (url "https://example.org/my-channel.git")
//!   (introduction
//!     (make-channel-introduction
//!       "<commit hex>"
//!       (openpgp-fingerprint "<fingerprint>"))))
//! ```
//!
//! Updates are only accepted when they move forward from the last recorded
//! commit ([`fast_forward_check`]), and a warning is produced when the URL
//! pulled from is not the channel's declared primary URL
//! ([`staleness_check`]).

mod provenance;
mod update;

use thiserror::Error;

use crate::authgraph::ChannelIntroduction;
use crate::authz::{parse_sexp, parse_sexps, Sexp, SyntaxError};
use crate::gitstore::{is_ancestor, ObjectId, Repository, StoreError};

pub use provenance::{provenance_read, provenance_write, read_provenance, write_provenance, ProvenanceRecord};
pub use update::{update_channel, UpdateError, UpdateOptions, UpdateOutcome};

/// Metadata file at the root of a channel's tree.
pub const CHANNEL_METADATA_FILE: &str = ".guix-channel";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChannelError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("channel {0:?} has no introduction")]
    MissingIntroduction(String),
    #[error("unsupported format version {0}")]
    BadVersion(String),
    #[error("{0}")]
    Malformed(String),
}

fn malformed(msg: impl Into<String>) -> ChannelError {
    ChannelError::Malformed(msg.into())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelSpec {
    pub name: String,
    pub url: String,
    pub branch: Option<String>,
    pub introduction: ChannelIntroduction,
}

fn single<'a>(items: &'a [Sexp], key: &str) -> Option<&'a Sexp> {
    match Sexp::field(items, key) {
        Some([v]) => Some(v),
        _ => None,
    }
}

fn parse_introduction(name: &str, items: &[Sexp]) -> Result<ChannelIntroduction, ChannelError> {
    let Some(form) = single(items, "introduction") else {
        return Err(ChannelError::MissingIntroduction(name.to_string()));
    };
    let Some([commit, fingerprint]) = form.tagged("make-channel-introduction") else {
        return Err(malformed(format!("channel {name:?}: expected (make-channel-introduction COMMIT FINGERPRINT)")));
    };
    let commit_text = commit.as_str().ok_or_else(|| malformed(format!("channel {name:?}: commit must be a string")))?;
    let commit: ObjectId =
        commit_text.parse().map_err(|_| malformed(format!("channel {name:?}: invalid commit {commit_text:?}")))?;
    let fp_text = match fingerprint.tagged("openpgp-fingerprint") {
        Some([Sexp::Str(s)]) => s,
        _ => return Err(malformed(format!("channel {name:?}: expected (openpgp-fingerprint STRING)"))),
    };
    let signer =
        fp_text.parse().map_err(|_| malformed(format!("channel {name:?}: invalid fingerprint {fp_text:?}")))?;
    Ok(ChannelIntroduction { commit, signer })
}

fn parse_channel_form(items: &[Sexp]) -> Result<ChannelSpec, ChannelError> {
    let name = single(items, "name")
        .and_then(Sexp::as_symbol)
        .filter(|n| !n.is_empty())
        .ok_or_else(|| malformed("channel without a name"))?
        .to_string();
    let url = single(items, "url")
        .and_then(Sexp::as_str)
        .filter(|u| !u.is_empty())
        .ok_or_else(|| malformed(format!("channel {name:?} has no url")))?
        .to_string();
    let branch = single(items, "branch").and_then(Sexp::as_str).map(str::to_string);
    let introduction = parse_introduction(&name, items)?;
    Ok(ChannelSpec { name, url, branch, introduction })
}

fn collect_channels(datum: &Sexp, out: &mut Vec<ChannelSpec>) -> Result<(), ChannelError> {
    if let Some(items) = datum.tagged("channel") {
        out.push(parse_channel_form(items)?);
    } else if let Some(items) = datum.tagged("list") {
        for item in items {
            collect_channels(item, out)?;
        }
    } else {
        return Err(malformed(format!("expected (channel ...) or (list ...), found {datum}")));
    }
    Ok(())
}

/// Parses every channel form in a channel file. Forms may appear at top
/// level or inside a `(list ...)`.
pub fn parse_channel_spec(bytes: &[u8]) -> Result<Vec<ChannelSpec>, ChannelError> {
    let mut out = Vec::new();
    for datum in parse_sexps(bytes)? {
        collect_channels(&datum, &mut out)?;
    }
    Ok(out)
}

/// Contents of [`CHANNEL_METADATA_FILE`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChannelMetadata {
    pub version: u32,
    pub primary_url: Option<String>,
    pub keyring_ref: Option<String>,
}

pub fn parse_channel_metadata(bytes: &[u8]) -> Result<ChannelMetadata, ChannelError> {
    let top = parse_sexp(bytes)?;
    let items = top.tagged("channel").ok_or_else(|| malformed("metadata must be a (channel ...) form"))?;
    match single(items, "version") {
        Some(Sexp::Atom(v)) if v == "0" => {}
        Some(v) => return Err(ChannelError::BadVersion(v.to_string())),
        None => return Err(malformed("metadata lacks (version ...)")),
    }
    let text_field = |key: &str| -> Result<Option<String>, ChannelError> {
        match Sexp::field(items, key) {
            None => Ok(None),
            Some([Sexp::Str(s)]) => Ok(Some(s.clone())),
            Some(_) => Err(malformed(format!("({key} ...) must hold one string"))),
        }
    };
    Ok(ChannelMetadata { version: 0, primary_url: text_field("url")?, keyring_ref: text_field("keyring-reference")? })
}

/// Reads the metadata file at `commit`; an absent file yields the defaults.
pub fn read_channel_metadata<R: Repository + ?Sized>(
    repo: &R,
    commit: &ObjectId,
) -> Result<Result<ChannelMetadata, ChannelError>, StoreError> {
    Ok(match repo.read_path_at_commit(commit, CHANNEL_METADATA_FILE)? {
        Some(bytes) => parse_channel_metadata(&bytes),
        None => Ok(ChannelMetadata::default()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FastForwardVerdict {
    Same,
    FastForward,
    Downgrade,
    Unrelated,
}

impl FastForwardVerdict {
    pub fn is_allowed(self) -> bool {
        matches!(self, FastForwardVerdict::Same | FastForwardVerdict::FastForward)
    }
}

/// Classifies moving from `current` to `target`.
pub fn fast_forward_check<R: Repository + ?Sized>(
    repo: &R,
    current: &ObjectId,
    target: &ObjectId,
) -> Result<FastForwardVerdict, StoreError> {
    repo.read_commit(current)?;
    repo.read_commit(target)?;
    Ok(if current == target {
        FastForwardVerdict::Same
    } else if is_ancestor(repo, current, target)? {
        FastForwardVerdict::FastForward
    } else if is_ancestor(repo, target, current)? {
        FastForwardVerdict::Downgrade
    } else {
        FastForwardVerdict::Unrelated
    })
}

fn normalize_url(url: &str) -> &str {
    url.trim_end_matches('/')
}

/// Warning for pulling channel `name` from `pulled_url` when the channel
/// declares a different primary URL.
pub fn staleness_check(name: &str, pulled_url: &str, metadata: &ChannelMetadata) -> Option<String> {
    let primary = metadata.primary_url.as_deref()?;
    if normalize_url(primary) == normalize_url(pulled_url) {
        return None;
    }
    Some(format!("warning: pulled channel '{name}' from {pulled_url}, a mirror of {primary}, which might be stale"))
}
