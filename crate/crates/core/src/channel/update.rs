//! The update pipeline: authenticate the branch tip, check it moves forward
//! from the recorded commit, then record it.

use std::path::Path;

use thiserror::Error;

use crate::authgraph::{authenticate_repository, AuthCache, AuthError, AuthOptions, AuthReport, DEFAULT_KEYRING_REF};
use crate::gitstore::{ObjectId, Repository, StoreError};

use super::{
    fast_forward_check, provenance_read, provenance_write, read_channel_metadata, staleness_check, ChannelError,
    ChannelSpec, FastForwardVerdict, ProvenanceRecord,
};

#[derive(Clone, Debug)]
pub struct UpdateOptions {
    pub branch: String,
    /// URL actually pulled from; defaults to the spec's URL.
    pub pulled_url: Option<String>,
    pub allow_downgrades: bool,
    pub cache: Option<AuthCache>,
    /// Recorded in the provenance file.
    pub timestamp: u64,
}

impl Default for UpdateOptions {
    fn default() -> Self {
        UpdateOptions {
            branch: "master".to_string(),
            pulled_url: None,
            allow_downgrades: false,
            cache: None,
            timestamp: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct UpdateOutcome {
    pub target: ObjectId,
    pub report: AuthReport,
    /// Compared to the previously recorded commit, if there was one.
    pub verdict: Option<FastForwardVerdict>,
    pub previous: Option<ObjectId>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum UpdateError {
    #[error("branch {0:?} not found")]
    BranchNotFound(String),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error("{}", refusal_message(*.verdict, .current, .target))]
    Refused { verdict: FastForwardVerdict, current: ObjectId, target: ObjectId },
    #[error("channel metadata: {0}")]
    Metadata(ChannelError),
    #[error("provenance: {0}")]
    Provenance(ChannelError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

fn refusal_message(verdict: FastForwardVerdict, current: &ObjectId, target: &ObjectId) -> String {
    match verdict {
        FastForwardVerdict::Downgrade => {
            format!("aborting downgrade from {current} to {target}: target is an ancestor of the current commit")
        }
        _ => format!("aborting update from {current} to {target}: target commit is unrelated to the current commit"),
    }
}

fn resolve_branch<R: Repository + ?Sized>(repo: &R, branch: &str) -> Result<ObjectId, UpdateError> {
    for name in [format!("refs/heads/{branch}"), format!("refs/remotes/origin/{branch}")] {
        match repo.resolve_ref(&name) {
            Ok(id) => return Ok(id),
            Err(StoreError::RefNotFound(_)) => continue,
            Err(StoreError::InvalidRefName(_)) => break,
            Err(e) => return Err(e.into()),
        }
    }
    Err(UpdateError::BranchNotFound(branch.to_string()))
}

/// Authenticates the tip of `options.branch`, checks it against the
/// commit recorded for the channel in `provenance`, and records it.
///
/// Nothing is recorded unless authentication succeeds and the update is a
/// fast-forward (or `allow_downgrades` is set).
pub fn update_channel<R: Repository + ?Sized>(
    repo: &R,
    spec: &ChannelSpec,
    provenance: &Path,
    options: &UpdateOptions,
) -> Result<UpdateOutcome, UpdateError> {
    let target = resolve_branch(repo, &options.branch)?;
    let pulled_url = options.pulled_url.as_deref().unwrap_or(&spec.url);

    // The keyring branch named at the tip is only a hint about where to find
    // keys; the keys themselves still have to be authorized by history.
    let hint = read_channel_metadata(repo, &target)?.ok().and_then(|m| m.keyring_ref);
    let auth_options = AuthOptions {
        keyring_ref: hint.unwrap_or_else(|| DEFAULT_KEYRING_REF.to_string()),
        historical_authorizations: None,
        cache: options.cache.clone(),
    };
    let report = authenticate_repository(repo, &spec.introduction, &target, &auth_options)?;
    let mut warnings = report.warnings.clone();

    let metadata = read_channel_metadata(repo, &target)?.map_err(UpdateError::Metadata)?;
    warnings.extend(staleness_check(&spec.name, pulled_url, &metadata));

    let previous = provenance_read(provenance, &spec.name).map_err(UpdateError::Provenance)?;
    let mut verdict = None;
    if let Some(prev) = &previous {
        let v = if repo.has_object(&prev.commit) {
            fast_forward_check(repo, &prev.commit, &target)?
        } else {
            FastForwardVerdict::Unrelated
        };
        verdict = Some(v);
        if !v.is_allowed() {
            if !options.allow_downgrades {
                return Err(UpdateError::Refused { verdict: v, current: prev.commit, target });
            }
            warnings.push(format!(
                "warning: {}",
                refusal_message(v, &prev.commit, &target).replacen("aborting", "allowing", 1)
            ));
        }
    }

    let record = ProvenanceRecord {
        name: spec.name.clone(),
        url: pulled_url.to_string(),
        branch: Some(options.branch.clone()),
        commit: target,
        timestamp: Some(options.timestamp),
    };
    provenance_write(provenance, &record).map_err(UpdateError::Provenance)?;
    Ok(UpdateOutcome { target, report, verdict, previous: previous.map(|p| p.commit), warnings })
}
