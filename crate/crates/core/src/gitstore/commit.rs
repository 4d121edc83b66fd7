use std::cmp::Ordering;
use std::collections::HashSet;
use std::ops::Range;

use super::{hash_object, ObjectId, ObjectKind, RawObject, Result, StoreError};

const SIGNATURE_HEADER: &str = "gpgsig";

/// One commit header. Continuation lines are joined with `\n`, with their
/// leading space removed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Header {
    pub name: String,
    pub value: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Commit {
    pub id: ObjectId,
    pub tree: ObjectId,
    pub parents: Vec<ObjectId>,
    pub author_line: String,
    pub committer_line: String,
    /// ASCII-armored OpenPGP signature from the `gpgsig` header.
    pub signature: Option<String>,
    pub message: Vec<u8>,
    /// All headers in payload order, including `tree`, `parent` and `gpgsig`.
    pub headers: Vec<Header>,
    pub raw_payload: Vec<u8>,
    signature_span: Option<Range<usize>>,
}

impl Commit {
    pub fn message_text(&self) -> String {
        String::from_utf8_lossy(&self.message).into_owned()
    }

    /// Byte range of the whole `gpgsig` header block within `raw_payload`.
    pub fn signature_span(&self) -> Option<Range<usize>> {
        self.signature_span.clone()
    }

    /// Serializes the parsed headers and message back to commit payload bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.raw_payload.len());
        for h in &self.headers {
            out.extend_from_slice(h.name.as_bytes());
            out.push(b' ');
            for (i, line) in h.value.split(|&b| b == b'\n').enumerate() {
                if i > 0 {
                    out.extend_from_slice(b"\n ");
                }
                out.extend_from_slice(line);
            }
            out.push(b'\n');
        }
        out.push(b'\n');
        out.extend_from_slice(&self.message);
        out
    }
}

fn malformed(msg: impl Into<String>) -> StoreError {
    StoreError::Malformed(msg.into())
}

fn parse_hex_id(value: &[u8], what: &str) -> Result<ObjectId> {
    std::str::from_utf8(value).ok().and_then(|s| s.parse().ok()).ok_or_else(|| malformed(format!("bad {what} id")))
}

pub fn parse_commit(obj: &RawObject) -> Result<Commit> {
    if obj.kind != ObjectKind::Commit {
        return Err(malformed(format!("expected commit, found {}", obj.kind)));
    }
    let raw = &obj.payload;
    let mut headers: Vec<Header> = Vec::new();
    let mut signature_span: Option<Range<usize>> = None;
    let mut in_signature = false;
    let mut pos = 0;
    let message_start = loop {
        let Some(nl) = raw[pos..].iter().position(|&b| b == b'\n').map(|n| pos + n) else {
            return Err(malformed("header section not terminated by a blank line"));
        };
        let line = &raw[pos..nl];
        if line.is_empty() {
            break nl + 1;
        }
        if line[0] == b' ' {
            let Some(last) = headers.last_mut() else {
                return Err(malformed("continuation line before any header"));
            };
            last.value.push(b'\n');
            last.value.extend_from_slice(&line[1..]);
            if in_signature {
                if let Some(span) = signature_span.as_mut() {
                    span.end = nl + 1;
                }
            }
        } else {
            let Some(sp) = line.iter().position(|&b| b == b' ') else {
                return Err(malformed("header line without a value"));
            };
            let name = std::str::from_utf8(&line[..sp]).map_err(|_| malformed("non-UTF-8 header name"))?.to_string();
            in_signature = name == SIGNATURE_HEADER;
            if in_signature {
                if signature_span.is_some() {
                    return Err(malformed("duplicate gpgsig header"));
                }
                signature_span = Some(pos..nl + 1);
            }
            headers.push(Header { name, value: line[sp + 1..].to_vec() });
        }
        pos = nl + 1;
    };

    let mut iter = headers.iter().peekable();
    let tree = match iter.next() {
        Some(h) if h.name == "tree" => parse_hex_id(&h.value, "tree")?,
        _ => return Err(malformed("missing tree header")),
    };
    let mut parents = Vec::new();
    while let Some(h) = iter.next_if(|h| h.name == "parent") {
        parents.push(parse_hex_id(&h.value, "parent")?);
    }
    let author_line = match iter.next() {
        Some(h) if h.name == "author" => String::from_utf8_lossy(&h.value).into_owned(),
        _ => return Err(malformed("missing author header")),
    };
    let committer_line = match iter.next() {
        Some(h) if h.name == "committer" => String::from_utf8_lossy(&h.value).into_owned(),
        _ => return Err(malformed("missing committer header")),
    };
    let mut signature = None;
    for h in iter {
        match h.name.as_str() {
            "tree" | "parent" | "author" | "committer" => {
                return Err(malformed(format!("misplaced {} header", h.name)));
            }
            SIGNATURE_HEADER => {
                let mut text = String::from_utf8(h.value.clone()).map_err(|_| malformed("non-UTF-8 signature"))?;
                text.push('\n');
                signature = Some(text);
            }
            _ => {}
        }
    }

    Ok(Commit {
        id: hash_object(ObjectKind::Commit, raw),
        tree,
        parents,
        author_line,
        committer_line,
        signature,
        message: raw[message_start..].to_vec(),
        headers,
        raw_payload: raw.clone(),
        signature_span,
    })
}

/// Returns the bytes covered by the commit signature: the raw payload with
/// the entire `gpgsig` header block removed.
pub fn signed_payload(commit: &Commit) -> Vec<u8> {
    match &commit.signature_span {
        None => commit.raw_payload.clone(),
        Some(span) => {
            let raw = &commit.raw_payload;
            let mut out = Vec::with_capacity(raw.len() - span.len());
            out.extend_from_slice(&raw[..span.start]);
            out.extend_from_slice(&raw[span.end..]);
            out
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeEntry {
    /// Octal mode as written by Git, e.g. `100644` or `40000`.
    pub mode: String,
    pub name: Vec<u8>,
    pub id: ObjectId,
}

impl TreeEntry {
    pub fn is_tree(&self) -> bool {
        self.mode == "40000" || self.mode == "040000"
    }

    pub fn is_submodule(&self) -> bool {
        self.mode == "160000"
    }

    pub fn name_lossy(&self) -> String {
        String::from_utf8_lossy(&self.name).into_owned()
    }
}

pub fn parse_tree(payload: &[u8]) -> Result<Vec<TreeEntry>> {
    let corrupt = |reason: &str| StoreError::corrupt(None, format!("tree: {reason}"));
    let mut entries = Vec::new();
    let mut names = HashSet::new();
    let mut pos = 0;
    while pos < payload.len() {
        let sp = payload[pos..].iter().position(|&b| b == b' ').ok_or_else(|| corrupt("missing mode separator"))?;
        let mode = &payload[pos..pos + sp];
        if mode.is_empty() || !mode.iter().all(|b| (b'0'..=b'7').contains(b)) {
            return Err(corrupt("bad mode"));
        }
        pos += sp + 1;
        let nul = payload[pos..].iter().position(|&b| b == 0).ok_or_else(|| corrupt("missing name terminator"))?;
        let name = payload[pos..pos + nul].to_vec();
        if name.is_empty() || name.contains(&b'/') {
            return Err(corrupt("bad entry name"));
        }
        pos += nul + 1;
        let id_bytes = payload.get(pos..pos + 20).ok_or_else(|| corrupt("truncated entry id"))?;
        pos += 20;
        if !names.insert(name.clone()) {
            return Err(corrupt("duplicate entry name"));
        }
        entries.push(TreeEntry {
            mode: String::from_utf8_lossy(mode).into_owned(),
            name,
            id: ObjectId::from_slice(id_bytes)?,
        });
    }
    Ok(entries)
}

fn tree_order(a: &TreeEntry, b: &TreeEntry) -> Ordering {
    let key = |e: &TreeEntry| {
        let mut k = e.name.clone();
        if e.is_tree() {
            k.push(b'/');
        }
        k
    };
    key(a).cmp(&key(b))
}

/// Serializes entries in Git's canonical tree order.
pub fn serialize_tree(entries: &[TreeEntry]) -> Vec<u8> {
    let mut sorted: Vec<&TreeEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| tree_order(a, b));
    let mut out = Vec::new();
    for e in sorted {
        out.extend_from_slice(e.mode.as_bytes());
        out.push(b' ');
        out.extend_from_slice(&e.name);
        out.push(0);
        out.extend_from_slice(e.id.as_bytes());
    }
    out
}
