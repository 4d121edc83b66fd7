use std::collections::{BTreeMap, HashSet};

use gitauth::channel::{fast_forward_check, FastForwardVerdict};
use gitauth::gitstore::{commit_difference, is_ancestor, ObjectId, Repository};
use gitauth::testing::{sample_history, RepoBuilder, Sign};
use proptest::prelude::*;

#[test]
fn sample_ancestry() {
    let hist = sample_history();
    let s = &hist.repo.store;
    assert!(is_ancestor(s, &hist.a, &hist.f).unwrap());
    assert!(!is_ancestor(s, &hist.d, &hist.e).unwrap());
    assert!(!is_ancestor(s, &hist.f, &hist.a).unwrap());
    assert!(is_ancestor(s, &hist.c, &hist.c).unwrap());
}

#[test]
fn sample_differences() {
    let hist = sample_history();
    let s = &hist.repo.store;
    let ids = |v: Vec<gitauth::gitstore::Commit>| v.into_iter().map(|c| c.id).collect::<Vec<_>>();

    let from_a = ids(commit_difference(s, &hist.f, &HashSet::from([hist.a])).unwrap());
    assert_eq!(from_a.iter().copied().collect::<HashSet<_>>(), HashSet::from([hist.b, hist.c, hist.d, hist.e, hist.f]));
    let pos = |id: ObjectId| from_a.iter().position(|x| *x == id).unwrap();
    assert!(pos(hist.b) < pos(hist.c) && pos(hist.c) < pos(hist.d) && pos(hist.d) < pos(hist.f));
    assert!(pos(hist.b) < pos(hist.e) && pos(hist.e) < pos(hist.f));

    assert!(commit_difference(s, &hist.f, &HashSet::from([hist.f])).unwrap().is_empty());
    assert_eq!(ids(commit_difference(s, &hist.f, &HashSet::from([hist.d, hist.e])).unwrap()), vec![hist.f]);
}

#[test]
fn missing_commit_is_not_found() {
    let hist = sample_history();
    let ghost = ObjectId::from_bytes([0xAB; 20]);
    assert!(is_ancestor(&hist.repo.store, &ghost, &hist.f).is_err());
    assert!(commit_difference(&hist.repo.store, &ghost, &HashSet::new()).is_err());
}

/// Random DAG as parent lists over node indices (parents precede children).
fn arb_dag() -> impl Strategy<Value = Vec<Vec<usize>>> {
    (1usize..=64).prop_flat_map(|n| {
        let per_node: Vec<_> = (0..n)
            .map(|i| {
                if i == 0 {
                    Just(vec![]).boxed()
                } else {
                    prop::collection::btree_set(0..i, 0..=2.min(i)).prop_map(|s| s.into_iter().collect()).boxed()
                }
            })
            .collect();
        per_node
    })
}

fn build(dag: &[Vec<usize>]) -> (RepoBuilder, Vec<ObjectId>) {
    let mut repo = RepoBuilder::new();
    let mut ids = Vec::new();
    for (i, parents) in dag.iter().enumerate() {
        let parents: Vec<ObjectId> = parents.iter().map(|&p| ids[p]).collect();
        let files = BTreeMap::from([("n".to_string(), i.to_string().into_bytes())]);
        ids.push(repo.commit(&parents, &files, Sign::Unsigned, &format!("{i}")));
    }
    (repo, ids)
}

/// Brute-force reflexive-transitive closure: reach[b][a] iff a is an ancestor of b.
fn closure_matrix(dag: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = dag.len();
    let mut reach = vec![vec![false; n]; n];
    for b in 0..n {
        reach[b][b] = true;
        for &p in &dag[b] {
            for a in 0..n {
                if reach[p][a] {
                    reach[b][a] = true;
                }
            }
        }
    }
    reach
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reachability_matches_brute_force(dag in arb_dag(), picks in prop::collection::vec((0usize..64, 0usize..64), 8)) {
        let (repo, ids) = build(&dag);
        let reach = closure_matrix(&dag);
        let n = dag.len();
        for (a, b) in picks {
            let (a, b) = (a % n, b % n);
            prop_assert_eq!(is_ancestor(&repo.store, &ids[a], &ids[b]).unwrap(), reach[b][a]);
        }
    }

    #[test]
    fn difference_matches_brute_force(
        dag in arb_dag(),
        target in 0usize..64,
        excluded in prop::collection::btree_set(0usize..64, 0..4),
    ) {
        let (repo, ids) = build(&dag);
        let reach = closure_matrix(&dag);
        let n = dag.len();
        let target = target % n;
        let excluded: Vec<usize> = excluded.into_iter().map(|e| e % n).collect();
        let expected: HashSet<usize> = (0..n)
            .filter(|&c| reach[target][c] && !excluded.iter().any(|&e| reach[e][c]))
            .collect();
        let got = commit_difference(&repo.store, &ids[target], &excluded.iter().map(|&e| ids[e]).collect()).unwrap();
        let order: Vec<usize> = got.iter().map(|c| ids.iter().position(|i| *i == c.id).unwrap()).collect();
        prop_assert_eq!(order.len(), expected.len());
        prop_assert_eq!(order.iter().copied().collect::<HashSet<_>>(), expected);
        // Parents come before children.
        for (pos, &node) in order.iter().enumerate() {
            for p in &dag[node] {
                if let Some(ppos) = order.iter().position(|x| x == p) {
                    prop_assert!(ppos < pos);
                }
            }
        }
    }

    #[test]
    fn verdicts_are_a_trichotomy(dag in arb_dag(), picks in prop::collection::vec((0usize..64, 0usize..64), 8)) {
        let (repo, ids) = build(&dag);
        let reach = closure_matrix(&dag);
        let n = dag.len();
        for (a, b) in picks {
            let (a, b) = (a % n, b % n);
            let v = fast_forward_check(&repo.store, &ids[a], &ids[b]).unwrap();
            let expected = if a == b {
                FastForwardVerdict::Same
            } else if reach[b][a] {
                FastForwardVerdict::FastForward
            } else if reach[a][b] {
                FastForwardVerdict::Downgrade
            } else {
                FastForwardVerdict::Unrelated
            };
            prop_assert_eq!(v, expected);
            let back = fast_forward_check(&repo.store, &ids[b], &ids[a]).unwrap();
            prop_assert_eq!(v == FastForwardVerdict::FastForward, back == FastForwardVerdict::Downgrade);
        }
    }

    #[test]
    fn objects_hash_to_their_ids(dag in arb_dag()) {
        let (repo, _) = build(&dag);
        for (id, obj) in repo.store.objects() {
            prop_assert_eq!(gitauth::gitstore::hash_object(obj.kind, &obj.payload), *id);
            prop_assert_eq!(repo.store.read_object(id).unwrap().id(), *id);
        }
    }
}
