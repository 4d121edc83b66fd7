//! Random repositories described abstractly, so that a checker can decide
//! the expected outcome without looking at Git objects or signatures.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::authgraph::{AuthError, AuthReport, ChannelIntroduction};
use crate::gitstore::{commit_difference, ObjectId};
use crate::sigverify::HashAlgorithm;

use super::{authorizations_for, Committer, RepoBuilder, Sign};
use crate::authz::AUTHORIZATIONS_FILE;

/// How a node of the model is signed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Signing {
    Key(usize),
    Unsigned,
    /// A key that is not in the keyring.
    Outsider,
    /// Signature by `Key` over different bytes.
    Forged(usize),
    Sha1(usize),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub parents: Vec<usize>,
    /// Keys listed in the node's policy file; `None` when there is no file.
    pub policy: Option<BTreeSet<usize>>,
    pub signing: Signing,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub keys: usize,
    /// Topologically ordered: parents have lower indices.
    pub nodes: Vec<Node>,
    pub intro: usize,
    pub target: usize,
}

/// Parameters for [`Model::random`].
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_nodes: usize,
    pub min_keys: usize,
    pub max_keys: usize,
    /// Percentage of repositories given one deliberate defect.
    pub violation_percent: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Shape { max_nodes: 40, min_keys: 2, max_keys: 5, violation_percent: 10 }
    }
}

fn chance(percent: usize, below: &mut dyn FnMut(usize) -> usize) -> bool {
    below(100) < percent
}

impl Model {
    /// Draws a model; `below(n)` must return a uniform value in `0..n`.
    pub fn random(shape: Shape, below: &mut dyn FnMut(usize) -> usize) -> Model {
        let keys = shape.min_keys + below(shape.max_keys - shape.min_keys + 1);
        let count = 2 + below(shape.max_nodes - 1);
        let mut nodes: Vec<Node> = Vec::with_capacity(count);

        for i in 0..count {
            let parents: Vec<usize> = if i == 0 {
                vec![]
            } else if i > 1 && chance(25, below) {
                let a = below(i);
                let mut b = below(i);
                if a == b {
                    b = (b + 1) % i;
                }
                vec![a, b]
            } else if chance(70, below) {
                vec![i - 1]
            } else {
                vec![below(i)]
            };

            // Keys every parent allows; honest committers pick one of these.
            let allowed: BTreeSet<usize> = parents
                .iter()
                .map(|&p| nodes[p].policy.clone().unwrap_or_default())
                .reduce(|a, b| a.intersection(&b).copied().collect())
                .unwrap_or_else(|| (0..keys).collect());

            let mut policy: BTreeSet<usize> = match parents.first() {
                Some(&p) => nodes[p].policy.clone().unwrap_or_else(|| (0..keys).collect()),
                None => (0..1 + below(keys)).collect(),
            };
            if chance(20, below) {
                policy.insert(below(keys));
            }
            if chance(10, below) && policy.len() > 1 {
                let k = *policy.iter().nth(below(policy.len())).unwrap();
                policy.remove(&k);
            }

            // Occasionally a committer signs regardless of policy.
            let signing = match allowed.len() {
                _ if chance(3, below) => Signing::Key(below(keys)),
                0 => Signing::Key(below(keys)),
                n => Signing::Key(*allowed.iter().nth(below(n)).unwrap()),
            };
            let policy = Some(policy);
            nodes.push(Node { parents, policy, signing });
        }
        if chance(shape.violation_percent, below) {
            let node = &mut nodes[1 + below(count - 1)];
            match below(6) {
                0 => node.signing = Signing::Unsigned,
                1 => node.signing = Signing::Outsider,
                2 => node.signing = Signing::Forged(below(keys)),
                3 => node.signing = Signing::Sha1(below(keys)),
                4 => node.policy = None,
                _ => node.signing = Signing::Key(below(keys)),
            }
        }
        // Mostly introduce at the root, sometimes deeper so that targets may
        // fall outside the introduction's descendants.
        let intro = if chance(70, below) { 0 } else { below(count) };
        let target = if chance(60, below) { count - 1 } else { below(count) };
        if !matches!(nodes[intro].signing, Signing::Key(_)) {
            nodes[intro].signing = Signing::Key(0);
        }
        Model { keys, nodes, intro, target }
    }

    fn ancestors(&self, of: usize) -> HashSet<usize> {
        let mut seen = HashSet::new();
        let mut stack = vec![of];
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend(&self.nodes[n].parents);
            }
        }
        seen
    }

    pub fn intro_key(&self) -> usize {
        match self.nodes[self.intro].signing {
            Signing::Key(k) => k,
            _ => unreachable!("introduction is always properly signed"),
        }
    }

    /// Expected failures: every node between introduction and target that
    /// breaks the rule, with the name of the error the engine should give.
    /// `Err` when the target does not descend from the introduction.
    pub fn expected(&self) -> Result<HashMap<usize, &'static str>, &'static str> {
        let reach = self.ancestors(self.target);
        if !reach.contains(&self.intro) {
            return Err("NotDescendantOfIntroduction");
        }
        let trusted = self.ancestors(self.intro);
        let mut failures = HashMap::new();
        for &n in reach.difference(&trusted) {
            let node = &self.nodes[n];
            let signer = match node.signing {
                Signing::Key(k) => k,
                Signing::Unsigned => {
                    failures.insert(n, "Unsigned");
                    continue;
                }
                Signing::Outsider => {
                    failures.insert(n, "UnknownKey");
                    continue;
                }
                Signing::Forged(_) => {
                    failures.insert(n, "BadSignature");
                    continue;
                }
                Signing::Sha1(_) => {
                    failures.insert(n, "WeakDigest");
                    continue;
                }
            };
            for &p in &node.parents {
                match &self.nodes[p].policy {
                    None => {
                        failures.insert(n, "MissingAuthorizations");
                        break;
                    }
                    Some(set) if !set.contains(&signer) => {
                        failures.insert(n, "Unauthorized");
                        break;
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(failures)
    }
}

/// A model turned into signed commits.
#[derive(Clone, Debug)]
pub struct Realized {
    pub repo: RepoBuilder,
    pub committers: Vec<Committer>,
    pub ids: Vec<ObjectId>,
}

impl Realized {
    pub fn node_of(&self, id: &ObjectId) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }

    pub fn introduction(&self, model: &Model) -> ChannelIntroduction {
        ChannelIntroduction { commit: self.ids[model.intro], signer: self.committers[model.intro_key()].fingerprint() }
    }

    pub fn target(&self, model: &Model) -> ObjectId {
        self.ids[model.target]
    }

    /// Compares an engine outcome with the model's expectation. A failing
    /// run must name one of the commits the model considers defective, with
    /// the matching error; a passing run must account for every commit
    /// between introduction and target.
    pub fn judge(&self, model: &Model, result: &Result<AuthReport, AuthError>) -> Result<(), String> {
        match (model.expected(), result) {
            (Err(kind), Err(e)) if e.kind() == kind => Ok(()),
            (Ok(failures), Ok(report)) if failures.is_empty() => {
                let range =
                    commit_difference(&self.repo.store, &self.target(model), &HashSet::from([self.ids[model.intro]]))
                        .map_err(|e| e.to_string())?
                        .len();
                if report.checked + report.cache_skipped == range {
                    Ok(())
                } else {
                    Err(format!("checked {} + skipped {} != {range}", report.checked, report.cache_skipped))
                }
            }
            (Ok(failures), Err(e)) if !failures.is_empty() => {
                let node = e.commit().and_then(|c| self.node_of(&c));
                match node.and_then(|n| failures.get(&n)) {
                    Some(kind) if *kind == e.kind() => Ok(()),
                    _ => Err(format!("engine failed with {} at {node:?}, expected one of {failures:?}", e.kind())),
                }
            }
            (expected, got) => Err(format!(
                "expected {expected:?}, engine gave {:?}",
                got.as_ref().map(|r| r.checked).map_err(|e| e.kind())
            )),
        }
    }
}

pub fn realize(model: &Model) -> Realized {
    let committers: Vec<Committer> = (0..model.keys).map(|k| Committer::new(&format!("key{k}"))).collect();
    let outsider = Committer::new("outsider");
    let mut repo = RepoBuilder::new();
    repo.keyring(&committers.iter().collect::<Vec<_>>());
    let mut ids: Vec<ObjectId> = Vec::with_capacity(model.nodes.len());
    for (i, node) in model.nodes.iter().enumerate() {
        let parents: Vec<ObjectId> = node.parents.iter().map(|&p| ids[p]).collect();
        let mut files = std::collections::BTreeMap::new();
        files.insert("node".to_string(), i.to_string().into_bytes());
        if let Some(policy) = &node.policy {
            let who: Vec<&Committer> = policy.iter().map(|&k| &committers[k]).collect();
            files.insert(AUTHORIZATIONS_FILE.to_string(), authorizations_for(&who));
        }
        let message = format!("node {i}");
        let id = match node.signing {
            Signing::Key(k) => repo.commit(&parents, &files, Sign::By(&committers[k]), &message),
            Signing::Unsigned => repo.commit(&parents, &files, Sign::Unsigned, &message),
            Signing::Outsider => repo.commit(&parents, &files, Sign::By(&outsider), &message),
            Signing::Sha1(k) => {
                repo.commit(&parents, &files, Sign::Digest(&committers[k], HashAlgorithm::Sha1), &message)
            }
            Signing::Forged(k) => {
                let other = crate::sigverify::sign_for_tests(b"some other payload", &committers[k].key);
                repo.commit(&parents, &files, Sign::Raw(other), &message)
            }
        };
        ids.push(id);
    }
    Realized { repo, committers, ids }
}
