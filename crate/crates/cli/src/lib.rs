//! Front end for the `gitauth` binary. [`run`] takes its arguments and output
//! streams explicitly so that tests can drive it in-process.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gitauth::authgraph::{
    authenticate_repository, AuthCache, AuthError, AuthOptions, ChannelIntroduction, DEFAULT_KEYRING_REF,
};
use gitauth::authz::AuthorizationList;
use gitauth::channel::{parse_channel_spec, read_provenance, update_channel, UpdateError, UpdateOptions};
use gitauth::gitstore::{DiskRepository, ObjectId, Repository, StoreError};
use gitauth::sigverify::Fingerprint;

/// Environment variable naming the state directory.
pub const STATE_DIR_VAR: &str = "GITAUTH_STATE_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    AuthenticationFailure,
    Refused,
    UsageOrIo,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::AuthenticationFailure => 1,
            ExitStatus::Refused => 2,
            ExitStatus::UsageOrIo => 3,
        }
    }
}

/// Inputs normally taken from the process environment.
#[derive(Clone, Debug, Default)]
pub struct Context {
    /// State directory used when `--state-dir` is not given.
    pub state_dir: Option<PathBuf>,
    /// Current time in seconds since the epoch.
    pub now: u64,
}

impl Context {
    pub fn from_env() -> Self {
        let state_dir = std::env::var_os(STATE_DIR_VAR)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .or_else(|| {
                std::env::var_os("XDG_CACHE_HOME").filter(|v| !v.is_empty()).map(|d| Path::new(&d).join("gitauth"))
            })
            .or_else(|| {
                std::env::var_os("HOME").filter(|v| !v.is_empty()).map(|h| Path::new(&h).join(".cache/gitauth"))
            });
        let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Context { state_dir, now }
    }
}

#[derive(Parser, Debug)]
#[command(name = "gitauth", version, about = "Authenticate Git checkouts against in-repository authorizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check every commit from an introduction to the end commit.
    Authenticate(AuthenticateArgs),
    /// Authenticate a branch tip and record it, refusing non-fast-forward updates.
    Update(UpdateArgs),
    /// Print the recorded commit of each channel.
    Describe(DescribeArgs),
}

#[derive(Args, Debug)]
struct AuthenticateArgs {
    /// Introductory commit (40 hex digits).
    commit: String,
    /// Fingerprint of the key that signed the introductory commit.
    signer: String,
    #[arg(long, default_value = ".")]
    repository: PathBuf,
    /// Commit to authenticate up to: a reference or 40 hex digits.
    #[arg(long, default_value = "HEAD")]
    end: String,
    /// Branch or reference holding the keyring.
    #[arg(long, default_value = DEFAULT_KEYRING_REF)]
    keyring: String,
    /// Policy used for commits whose parents have no authorization file.
    #[arg(long, value_name = "FILE")]
    historical_authorizations: Option<PathBuf>,
    /// Name of the cache file; defaults to one derived from the introduction.
    #[arg(long)]
    cache_key: Option<String>,
    #[arg(long)]
    state_dir: Option<PathBuf>,
    /// Print counts of checked and skipped commits.
    #[arg(long)]
    stats: bool,
}

#[derive(Args, Debug)]
struct UpdateArgs {
    #[arg(long, default_value = ".")]
    repository: PathBuf,
    /// Channel file with the introduction.
    #[arg(long, value_name = "FILE")]
    channels: PathBuf,
    /// Channel to update when the file lists several.
    #[arg(long, value_name = "NAME")]
    channel: Option<String>,
    #[arg(long, default_value = "master")]
    branch: String,
    /// URL the repository was fetched from, if not the channel's URL.
    #[arg(long)]
    url: Option<String>,
    #[arg(long)]
    allow_downgrades: bool,
    #[arg(long)]
    state_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DescribeArgs {
    #[arg(long)]
    state_dir: Option<PathBuf>,
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Io<'_> {
    fn fail(&mut self, status: ExitStatus, message: impl std::fmt::Display) -> ExitStatus {
        let _ = writeln!(self.err, "gitauth: error: {message}");
        status
    }
}

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write, ctx: &Context) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    ExitStatus::Success
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    ExitStatus::UsageOrIo
                }
            };
        }
    };
    let mut io = Io { out, err };
    match cli.command {
        Command::Authenticate(a) => cmd_authenticate(a, &mut io, ctx),
        Command::Update(a) => cmd_update(a, &mut io, ctx),
        Command::Describe(a) => cmd_describe(a, &mut io, ctx),
    }
}

fn state_dir(flag: Option<PathBuf>, ctx: &Context) -> Option<PathBuf> {
    flag.or_else(|| ctx.state_dir.clone())
}

fn provenance_path(state: &Path) -> PathBuf {
    state.join("provenance")
}

fn resolve_commit(repo: &DiskRepository, spec: &str) -> Result<ObjectId, StoreError> {
    if spec.len() == 40 {
        if let Ok(id) = spec.parse::<ObjectId>() {
            repo.read_commit(&id)?;
            return Ok(id);
        }
    }
    for name in [spec.to_string(), format!("refs/heads/{spec}"), format!("refs/tags/{spec}")] {
        match repo.resolve_ref(&name) {
            Ok(id) => return Ok(id),
            Err(StoreError::RefNotFound(_) | StoreError::InvalidRefName(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(StoreError::RefNotFound(spec.to_string()))
}

fn auth_status(e: &AuthError) -> ExitStatus {
    match e {
        AuthError::Store(_) => ExitStatus::UsageOrIo,
        _ => ExitStatus::AuthenticationFailure,
    }
}

fn describe_auth_error(e: &AuthError) -> String {
    match e.commit() {
        Some(commit) => format!("commit {commit}: {}: {}", e.kind(), e),
        None => format!("{}: {}", e.kind(), e),
    }
}

fn cmd_authenticate(args: AuthenticateArgs, io: &mut Io<'_>, ctx: &Context) -> ExitStatus {
    let Ok(commit) = args.commit.parse::<ObjectId>() else {
        return io.fail(ExitStatus::UsageOrIo, format!("invalid introductory commit {:?}", args.commit));
    };
    let Ok(signer) = args.signer.parse::<Fingerprint>() else {
        return io.fail(ExitStatus::UsageOrIo, format!("invalid fingerprint {:?}", args.signer));
    };
    let historical = match &args.historical_authorizations {
        None => None,
        Some(path) => match std::fs::read(path) {
            Err(e) => return io.fail(ExitStatus::UsageOrIo, format!("{}: {e}", path.display())),
            Ok(bytes) => match AuthorizationList::parse(&bytes) {
                Ok(list) => Some(list),
                Err(e) => return io.fail(ExitStatus::UsageOrIo, format!("{}: {e}", path.display())),
            },
        },
    };
    let repo = match DiskRepository::open(&args.repository) {
        Ok(r) => r,
        Err(e) => return io.fail(ExitStatus::UsageOrIo, e),
    };
    let end = match resolve_commit(&repo, &args.end) {
        Ok(id) => id,
        Err(e) => return io.fail(ExitStatus::UsageOrIo, format!("cannot resolve {}: {e}", args.end)),
    };
    let intro = ChannelIntroduction { commit, signer };
    let cache = state_dir(args.state_dir, ctx).map(|dir| match &args.cache_key {
        Some(key) => AuthCache::new(dir, key),
        None => AuthCache::for_introduction(dir, &intro),
    });
    let options = AuthOptions { keyring_ref: args.keyring, historical_authorizations: historical, cache };
    match authenticate_repository(&repo, &intro, &end, &options) {
        Ok(report) => {
            for w in &report.warnings {
                let _ = writeln!(io.err, "gitauth: warning: {}", w.trim_start_matches("warning: "));
            }
            let _ = writeln!(io.out, "gitauth: successfully authenticated commit {end}");
            if args.stats {
                let _ = writeln!(io.out, "stats: commits checked: {}", report.checked);
                let _ = writeln!(io.out, "stats: cache hits: {}", report.cache_skipped);
                let mut per_signer = std::collections::BTreeMap::new();
                for fp in report.signers.values() {
                    *per_signer.entry(*fp).or_insert(0usize) += 1;
                }
                for (fp, n) in per_signer {
                    let _ = writeln!(io.out, "stats: signer {fp}: {n}");
                }
            }
            ExitStatus::Success
        }
        Err(e) => io.fail(auth_status(&e), describe_auth_error(&e)),
    }
}

fn cmd_update(args: UpdateArgs, io: &mut Io<'_>, ctx: &Context) -> ExitStatus {
    let bytes = match std::fs::read(&args.channels) {
        Ok(b) => b,
        Err(e) => return io.fail(ExitStatus::UsageOrIo, format!("{}: {e}", args.channels.display())),
    };
    let specs = match parse_channel_spec(&bytes) {
        Ok(s) => s,
        Err(e) => return io.fail(ExitStatus::UsageOrIo, format!("{}: {e}", args.channels.display())),
    };
    let spec = match (&args.channel, specs.as_slice()) {
        (None, [only]) => only.clone(),
        (None, []) => return io.fail(ExitStatus::UsageOrIo, "channel file lists no channel"),
        (None, _) => return io.fail(ExitStatus::UsageOrIo, "channel file lists several channels; pass --channel"),
        (Some(name), _) => match specs.iter().find(|s| &s.name == name) {
            Some(s) => s.clone(),
            None => return io.fail(ExitStatus::UsageOrIo, format!("no channel named {name:?}")),
        },
    };
    let Some(state) = state_dir(args.state_dir, ctx) else {
        return io.fail(ExitStatus::UsageOrIo, format!("no state directory; pass --state-dir or set {STATE_DIR_VAR}"));
    };
    let repo = match DiskRepository::open(&args.repository) {
        Ok(r) => r,
        Err(e) => return io.fail(ExitStatus::UsageOrIo, e),
    };
    let pulled = args.url.clone().unwrap_or_else(|| spec.url.clone());
    let _ = writeln!(io.err, "Updating channel '{}' from '{pulled}'...", spec.name);
    let options = UpdateOptions {
        branch: args.branch,
        pulled_url: args.url,
        allow_downgrades: args.allow_downgrades,
        cache: Some(AuthCache::for_introduction(&state, &spec.introduction)),
        timestamp: ctx.now,
    };
    match update_channel(&repo, &spec, &provenance_path(&state), &options) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                let _ = writeln!(io.err, "gitauth: warning: {}", w.trim_start_matches("warning: "));
            }
            let _ = writeln!(io.out, "channel '{}' is at commit {}", spec.name, outcome.target);
            ExitStatus::Success
        }
        Err(e) => {
            let status = match &e {
                UpdateError::Auth(a) => return io.fail(auth_status(a), describe_auth_error(a)),
                UpdateError::Refused { .. } => ExitStatus::Refused,
                _ => ExitStatus::UsageOrIo,
            };
            io.fail(status, e)
        }
    }
}

fn cmd_describe(args: DescribeArgs, io: &mut Io<'_>, ctx: &Context) -> ExitStatus {
    let Some(state) = state_dir(args.state_dir, ctx) else {
        return io.fail(ExitStatus::UsageOrIo, format!("no state directory; pass --state-dir or set {STATE_DIR_VAR}"));
    };
    let records = match read_provenance(&provenance_path(&state)) {
        Ok(Some(r)) if !r.is_empty() => r,
        Ok(_) => return io.fail(ExitStatus::UsageOrIo, format!("no provenance recorded in {}", state.display())),
        Err(e) => return io.fail(ExitStatus::UsageOrIo, e),
    };
    for r in records {
        let _ = writeln!(io.out, "{} {}", r.name, r.commit.short());
        let _ = writeln!(io.out, "  repository URL: {}", r.url);
        if let Some(branch) = &r.branch {
            let _ = writeln!(io.out, "  branch: {branch}");
        }
        let _ = writeln!(io.out, "  commit: {}", r.commit);
    }
    ExitStatus::Success
}
