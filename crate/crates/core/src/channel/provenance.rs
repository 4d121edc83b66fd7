//! Record of the commit last deployed for each channel.
//!
//! ```text
//! (provenance
//!  (version 0)
//!  (channel (name guix) (url "https://...") (branch "master")
//!           (commit "d904abe0768293b2322dbf355b6e41d94e769d78")
//!           (timestamp 1619554653)))
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::authz::{parse_sexp, Sexp};
use crate::gitstore::ObjectId;

use super::{malformed, single, ChannelError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProvenanceRecord {
    pub name: String,
    pub url: String,
    pub branch: Option<String>,
    pub commit: ObjectId,
    /// Seconds since the epoch at which the record was made.
    pub timestamp: Option<u64>,
}

impl ProvenanceRecord {
    fn to_sexp(&self) -> Sexp {
        let mut items = vec![
            Sexp::atom("channel"),
            Sexp::List(vec![Sexp::atom("name"), Sexp::atom(&self.name)]),
            Sexp::List(vec![Sexp::atom("url"), Sexp::string(&self.url)]),
        ];
        if let Some(branch) = &self.branch {
            items.push(Sexp::List(vec![Sexp::atom("branch"), Sexp::string(branch)]));
        }
        items.push(Sexp::List(vec![Sexp::atom("commit"), Sexp::Str(self.commit.to_hex())]));
        if let Some(ts) = self.timestamp {
            items.push(Sexp::List(vec![Sexp::atom("timestamp"), Sexp::Atom(ts.to_string())]));
        }
        Sexp::List(items)
    }

    fn from_items(items: &[Sexp]) -> Result<Self, ChannelError> {
        let name = single(items, "name")
            .and_then(Sexp::as_symbol)
            .filter(|n| !n.is_empty())
            .ok_or_else(|| malformed("provenance record without a name"))?
            .to_string();
        let url = single(items, "url")
            .and_then(Sexp::as_str)
            .ok_or_else(|| malformed(format!("provenance record {name:?} has no url")))?
            .to_string();
        let branch = single(items, "branch").and_then(Sexp::as_str).map(str::to_string);
        let commit = single(items, "commit")
            .and_then(Sexp::as_str)
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| malformed(format!("provenance record {name:?} lacks a valid commit")))?;
        let timestamp = match single(items, "timestamp") {
            None => None,
            Some(t) => Some(
                t.as_atom()
                    .and_then(|a| a.parse().ok())
                    .ok_or_else(|| malformed(format!("provenance record {name:?} has a bad timestamp")))?,
            ),
        };
        Ok(ProvenanceRecord { name, url, branch, commit, timestamp })
    }
}

/// All records in the file at `path`, or `None` when the file does not exist.
pub fn read_provenance(path: &Path) -> Result<Option<Vec<ProvenanceRecord>>, ChannelError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(malformed(format!("cannot read {}: {e}", path.display()))),
    };
    let top = parse_sexp(&bytes)?;
    let items = top.tagged("provenance").ok_or_else(|| malformed("expected a (provenance ...) form"))?;
    match single(items, "version") {
        Some(Sexp::Atom(v)) if v == "0" => {}
        Some(v) => return Err(ChannelError::BadVersion(v.to_string())),
        None => return Err(malformed("provenance lacks (version ...)")),
    }
    let mut records = Vec::new();
    for item in items.iter().filter_map(|i| i.tagged("channel")) {
        records.push(ProvenanceRecord::from_items(item)?);
    }
    Ok(Some(records))
}

/// The record for channel `name`, if any.
pub fn provenance_read(path: &Path, name: &str) -> Result<Option<ProvenanceRecord>, ChannelError> {
    Ok(read_provenance(path)?.and_then(|records| records.into_iter().find(|r| r.name == name)))
}

/// Replaces the whole file with `records`, atomically.
pub fn write_provenance(path: &Path, records: &[ProvenanceRecord]) -> io::Result<()> {
    let mut text = String::from("(provenance\n (version 0)");
    for r in records {
        text.push_str("\n ");
        text.push_str(&r.to_sexp().to_string());
    }
    text.push_str(")\n");
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("provenance");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Stores `record`, replacing any record with the same name and keeping
/// the others.
pub fn provenance_write(path: &Path, record: &ProvenanceRecord) -> Result<(), ChannelError> {
    let mut records = read_provenance(path)?.unwrap_or_default();
    match records.iter_mut().find(|r| r.name == record.name) {
        Some(existing) => *existing = record.clone(),
        None => records.push(record.clone()),
    }
    write_provenance(path, &records).map_err(|e| malformed(format!("cannot write {}: {e}", path.display())))
}
