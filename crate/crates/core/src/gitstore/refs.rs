use super::{ObjectId, ObjectKind, Repository, Result, StoreError};

/// Symbolic references followed before giving up with `SymrefLoop`.
pub const MAX_SYMREF_HOPS: usize = 16;

const MAX_TAG_PEELS: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum RefValue {
    Direct(ObjectId),
    Symbolic(String),
}

pub(crate) fn validate_ref_name(name: &str) -> Result<()> {
    let bad = || StoreError::InvalidRefName(name.to_string());
    if name.is_empty() || name.starts_with('/') || name.ends_with('/') {
        return Err(bad());
    }
    if name.bytes().any(|b| b == 0 || b == b'\\' || b.is_ascii_control() || b == b' ') {
        return Err(bad());
    }
    if name.split('/').any(|c| c.is_empty() || c == "." || c == ".." || c.ends_with(".lock")) {
        return Err(bad());
    }
    let top_level = !name.contains('/');
    if top_level && !name.bytes().all(|b| b.is_ascii_uppercase() || b == b'_') {
        return Err(bad());
    }
    if !top_level && !name.starts_with("refs/") {
        return Err(bad());
    }
    Ok(())
}

/// Parses the content of a loose ref file.
pub(crate) fn parse_ref_file(content: &str) -> Result<RefValue> {
    let content = content.trim_end();
    if let Some(target) = content.strip_prefix("ref:") {
        return Ok(RefValue::Symbolic(target.trim().to_string()));
    }
    Ok(RefValue::Direct(content.parse()?))
}

/// Looks `name` up in the content of a `packed-refs` file.
pub(crate) fn lookup_packed(content: &str, name: &str) -> Result<Option<ObjectId>> {
    for line in content.lines() {
        if line.starts_with('#') || line.starts_with('^') || line.is_empty() {
            continue;
        }
        if let Some((hex, refname)) = line.split_once(' ') {
            if refname == name {
                return Ok(Some(hex.parse()?));
            }
        }
    }
    Ok(None)
}

/// Follows symbolic references through `lookup`, then peels annotated tags.
pub(crate) fn resolve<R, F>(repo: &R, name: &str, lookup: F) -> Result<ObjectId>
where
    R: Repository + ?Sized,
    F: Fn(&str) -> Result<Option<RefValue>>,
{
    let mut current = name.to_string();
    let mut hops = 0;
    loop {
        validate_ref_name(&current)?;
        match lookup(&current)? {
            None => return Err(StoreError::RefNotFound(current)),
            Some(RefValue::Symbolic(target)) => {
                hops += 1;
                if hops > MAX_SYMREF_HOPS {
                    return Err(StoreError::SymrefLoop(name.to_string()));
                }
                current = target;
            }
            Some(RefValue::Direct(id)) => return peel(repo, id),
        }
    }
}

fn peel<R: Repository + ?Sized>(repo: &R, mut id: ObjectId) -> Result<ObjectId> {
    for _ in 0..MAX_TAG_PEELS {
        let obj = repo.read_object(&id)?;
        if obj.kind != ObjectKind::Tag {
            return Ok(id);
        }
        let first = obj.payload.split(|&b| b == b'\n').next().unwrap_or_default();
        let target = first
            .strip_prefix(b"object ")
            .and_then(|h| std::str::from_utf8(h).ok())
            .and_then(|h| h.parse().ok())
            .ok_or_else(|| StoreError::corrupt(Some(id), "tag without object header"))?;
        id = target;
    }
    Err(StoreError::corrupt(Some(id), "tag chain too long"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ref_names() {
        for ok in ["HEAD", "refs/heads/master", "refs/remotes/origin/keyring", "FETCH_HEAD"] {
            assert!(validate_ref_name(ok).is_ok(), "{ok}");
        }
        for bad in ["", "refs/../HEAD", "/etc/passwd", "refs//x", "master", "refs/heads/x.lock", "refs/a b"] {
            assert!(validate_ref_name(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn packed_refs_lookup() {
        let content = "# pack-refs with: peeled fully-peeled sorted\n\
            1111111111111111111111111111111111111111 refs/heads/master\n\
            2222222222222222222222222222222222222222 refs/tags/v1\n\
            ^3333333333333333333333333333333333333333\n";
        assert_eq!(
            lookup_packed(content, "refs/tags/v1").unwrap().unwrap().to_hex(),
            "2222222222222222222222222222222222222222"
        );
        assert!(lookup_packed(content, "refs/heads/nope").unwrap().is_none());
    }

    #[test]
    fn ref_file_forms() {
        assert_eq!(parse_ref_file("ref: refs/heads/master\n").unwrap(), RefValue::Symbolic("refs/heads/master".into()));
        assert!(matches!(parse_ref_file("1111111111111111111111111111111111111111\n").unwrap(), RefValue::Direct(_)));
        assert!(parse_ref_file("garbage").is_err());
    }
}
