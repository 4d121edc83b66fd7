//! Reachability over the commit graph.

use std::collections::HashSet;

use super::{Commit, ObjectId, Repository, Result};

/// True iff `a == b` or `a` is reachable from `b` through parent edges.
pub fn is_ancestor<R: Repository + ?Sized>(repo: &R, a: &ObjectId, b: &ObjectId) -> Result<bool> {
    repo.read_commit(a)?;
    if a == b {
        return Ok(true);
    }
    let mut seen = HashSet::new();
    let mut stack = vec![*b];
    while let Some(id) = stack.pop() {
        if !seen.insert(id) {
            continue;
        }
        if id == *a {
            return Ok(true);
        }
        stack.extend(repo.read_commit(&id)?.parents);
    }
    Ok(false)
}

/// Every commit in the closure of `ids` (the ids themselves included).
pub(crate) fn closure<R: Repository + ?Sized>(
    repo: &R,
    ids: impl IntoIterator<Item = ObjectId>,
) -> Result<HashSet<ObjectId>> {
    let mut seen = HashSet::new();
    let mut stack: Vec<ObjectId> = ids.into_iter().collect();
    while let Some(id) = stack.pop() {
        if seen.insert(id) {
            stack.extend(repo.read_commit(&id)?.parents);
        }
    }
    Ok(seen)
}

/// Commits reachable from `target` that are outside the closure of
/// `excluded`, ordered parents before children.
pub fn commit_difference<R: Repository + ?Sized>(
    repo: &R,
    target: &ObjectId,
    excluded: &HashSet<ObjectId>,
) -> Result<Vec<Commit>> {
    let excluded = closure(repo, excluded.iter().copied())?;

    enum Frame {
        Enter(ObjectId),
        Exit(Commit),
    }

    let mut out = Vec::new();
    let mut visited = HashSet::new();
    let mut stack = vec![Frame::Enter(*target)];
    while let Some(frame) = stack.pop() {
        match frame {
            Frame::Enter(id) => {
                if excluded.contains(&id) || !visited.insert(id) {
                    continue;
                }
                let commit = repo.read_commit(&id)?;
                let parents = commit.parents.clone();
                stack.push(Frame::Exit(commit));
                stack.extend(parents.into_iter().rev().map(Frame::Enter));
            }
            Frame::Exit(commit) => out.push(commit),
        }
    }
    Ok(out)
}
