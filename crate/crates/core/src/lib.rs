//! Offline authentication of Git checkouts.
//!
//! A commit is authentic when it is signed by a key listed in the
//! `.guix-authorizations` file of each of its parents. Starting from a
//! trusted *introduction* (a commit and the fingerprint of its signer),
//! [`authgraph::authenticate_repository`] checks that invariant for every
//! commit up to a target. The [`channel`] module adds update policy on top:
//! refusing non-fast-forward updates, warning about possibly stale mirrors,
//! and recording what was last deployed.

pub mod authgraph;
pub mod authz;
pub mod channel;
pub mod gitstore;
pub mod sigverify;
pub mod testing;
