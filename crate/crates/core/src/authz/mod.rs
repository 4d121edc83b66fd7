//! The in-repository authorization policy file.
//!
//! ```text
//! (authorizations
//!  (version 0)
//!  (("AD17 A21E F8AE D8F1 CC02 DBD9 F8AE D8F1 765C 61E3"
//!    (name "alice"))
//!   ("2A39 3FFF 68F4 EF7A 3D29 12AF 68F4 EF7A 22FB B2D5"
//!    (name "bob"))))
//! ```
//!
//! Entry properties other than `name` are accepted and ignored. Entries
//! may also be wrapped in an extra level of list nesting; such groups are
//! flattened.

mod sexp;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::sigverify::Fingerprint;

pub use sexp::{parse_sexp, parse_sexps, Sexp, SyntaxError};

/// Name of the policy file at the root of each commit's tree.
pub const AUTHORIZATIONS_FILE: &str = ".guix-authorizations";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuthzError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unsupported format version {0}")]
    BadVersion(String),
    #[error("invalid fingerprint {0:?}")]
    BadFingerprint(String),
    #[error("malformed authorizations: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthorizationEntry {
    pub fingerprint: Fingerprint,
    pub name: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct AuthorizationList {
    pub version: u32,
    pub entries: Vec<AuthorizationEntry>,
}

fn collect_entries(items: &[Sexp], out: &mut Vec<AuthorizationEntry>) -> Result<(), AuthzError> {
    for item in items {
        let Some(list) = item.as_list() else {
            return Err(AuthzError::Malformed(format!("expected an entry list, found {item}")));
        };
        match list.first() {
            Some(Sexp::Str(fpr)) => {
                let fingerprint: Fingerprint = fpr.parse().map_err(|_| AuthzError::BadFingerprint(fpr.clone()))?;
                let name = Sexp::field(&list[1..], "name").and_then(|v| match v {
                    [Sexp::Str(n)] => Some(n.clone()),
                    _ => None,
                });
                if !out.iter().any(|e| e.fingerprint == fingerprint) {
                    out.push(AuthorizationEntry { fingerprint, name });
                }
            }
            Some(Sexp::List(_)) => collect_entries(list, out)?,
            Some(other) => {
                return Err(AuthzError::Malformed(format!("entry must start with a fingerprint string, found {other}")))
            }
            None => {}
        }
    }
    Ok(())
}

impl AuthorizationList {
    pub fn parse(bytes: &[u8]) -> Result<Self, AuthzError> {
        parse_authorizations(bytes)
    }

    pub fn fingerprints(&self) -> BTreeSet<Fingerprint> {
        authorized_fingerprints(self)
    }

    pub fn to_sexp(&self) -> Sexp {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let mut items = vec![Sexp::Str(e.fingerprint.to_string())];
                if let Some(name) = &e.name {
                    items.push(Sexp::List(vec![Sexp::atom("name"), Sexp::Str(name.clone())]));
                }
                Sexp::List(items)
            })
            .collect();
        Sexp::List(vec![
            Sexp::atom("authorizations"),
            Sexp::List(vec![Sexp::atom("version"), Sexp::Atom(self.version.to_string())]),
            Sexp::List(entries),
        ])
    }

    /// Canonical text form, one entry per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("(authorizations\n (version {})\n (", self.version);
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                out.push_str("\n  ");
            }
            let mut items = vec![Sexp::Str(e.fingerprint.to_string())];
            if let Some(name) = &e.name {
                items.push(Sexp::List(vec![Sexp::atom("name"), Sexp::Str(name.clone())]));
            }
            out.push_str(&Sexp::List(items).to_string());
        }
        out.push_str("))\n");
        out
    }
}

pub fn parse_authorizations(bytes: &[u8]) -> Result<AuthorizationList, AuthzError> {
    let top = parse_sexp(bytes)?;
    let Some(body) = top.tagged("authorizations") else {
        return Err(AuthzError::Malformed("top-level form must be (authorizations ...)".into()));
    };
    let version = match Sexp::field(body, "version") {
        Some([Sexp::Atom(v)]) if v == "0" => 0,
        Some([v]) => return Err(AuthzError::BadVersion(v.to_string())),
        _ => return Err(AuthzError::Malformed("missing (version ...)".into())),
    };
    let lists: Vec<&Sexp> = body.iter().filter(|i| i.tagged("version").is_none()).collect();
    let mut entries = Vec::new();
    match lists.as_slice() {
        [] => {}
        [Sexp::List(items)] => collect_entries(items, &mut entries)?,
        _ => return Err(AuthzError::Malformed("expected a single list of entries".into())),
    }
    Ok(AuthorizationList { version, entries })
}

pub fn authorized_fingerprints(list: &AuthorizationList) -> BTreeSet<Fingerprint> {
    list.entries.iter().map(|e| e.fingerprint).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"(authorizations
 (version 0)                               ;current file format version

 ((("AD17 A21E F8AE D8F1 CC02 DBD9 F8AE D8F1 765C 61E3"
   (name "alice"))
  ("2A39 3FFF 68F4 EF7A 3D29 12AF 68F4 EF7A 22FB B2D5"
   (name "bob"))
  ("CABB A931 C0FF EEC6 900D 0CFB 090B 1199 3D9A EBB5"
   (name "charlie")))))
"#;

    #[test]
    fn sample_file_parses() {
        let list = parse_authorizations(SAMPLE.as_bytes()).unwrap();
        let names: Vec<_> = list.entries.iter().map(|e| e.name.clone().unwrap()).collect();
        assert_eq!(names, ["alice", "bob", "charlie"]);
        assert_eq!(list.entries[2].fingerprint.to_string(), "CABB A931 C0FF EEC6 900D 0CFB 090B 1199 3D9A EBB5");
        assert_eq!(authorized_fingerprints(&list).len(), 3);
    }

    #[test]
    fn two_level_form_parses_the_same() {
        let canonical = parse_authorizations(SAMPLE.as_bytes()).unwrap();
        let reparsed = parse_authorizations(canonical.to_text().as_bytes()).unwrap();
        assert_eq!(reparsed, canonical);
        assert_eq!(parse_authorizations(canonical.to_sexp().to_string().as_bytes()).unwrap(), canonical);
    }

    #[test]
    fn empty_list_authorizes_nobody() {
        let list = parse_authorizations(b"(authorizations (version 0) ())").unwrap();
        assert!(list.entries.is_empty());
        assert!(authorized_fingerprints(&list).is_empty());
    }

    #[test]
    fn version_must_be_zero() {
        let e = parse_authorizations(b"(authorizations (version 1) ())").unwrap_err();
        assert_eq!(e, AuthzError::BadVersion("1".into()));
    }

    #[test]
    fn bad_fingerprints() {
        let e = parse_authorizations(b"(authorizations (version 0) ((\"ABCD\")))").unwrap_err();
        assert!(matches!(e, AuthzError::BadFingerprint(_)));
        let e = parse_authorizations(
            b"(authorizations (version 0) ((\"ZZ17 A21E F8AE D8F1 CC02 DBD9 F8AE D8F1 765C 61E3\")))",
        )
        .unwrap_err();
        assert!(matches!(e, AuthzError::BadFingerprint(_)));
    }

    #[test]
    fn duplicates_collapse_across_case_and_spacing() {
        let text = br#"(authorizations (version 0)
            (("cabba931c0ffeec6900d0cfb090b11993d9aebb5" (name "lower"))
             ("CABB A931 C0FF EEC6 900D 0CFB 090B 1199 3D9A EBB5" (name "upper"))))"#;
        let list = parse_authorizations(text).unwrap();
        assert_eq!(list.entries.len(), 1);
        assert_eq!(authorized_fingerprints(&list).len(), 1);
    }

    #[test]
    fn unknown_properties_are_ignored() {
        let plain = br#"(authorizations (version 0) (("CABB A931 C0FF EEC6 900D 0CFB 090B 1199 3D9A EBB5")))"#;
        let extended = br#"(authorizations (version 0)
            (("CABB A931 C0FF EEC6 900D 0CFB 090B 1199 3D9A EBB5" (files "gnu/packages/*") (role maintainer))))"#;
        assert_eq!(
            authorized_fingerprints(&parse_authorizations(plain).unwrap()),
            authorized_fingerprints(&parse_authorizations(extended).unwrap())
        );
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(parse_authorizations(b"(unclosed"), Err(AuthzError::Syntax(_))));
        assert!(matches!(parse_authorizations(b"(policy (version 0) ())"), Err(AuthzError::Malformed(_))));
        assert!(matches!(parse_authorizations(b"(authorizations ())"), Err(AuthzError::Malformed(_))));
    }
}
