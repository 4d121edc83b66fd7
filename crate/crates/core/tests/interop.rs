//! Round trips against repositories and keys produced by the `git` and
//! `gpg` binaries.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use gitauth::authgraph::{authenticate_repository, AuthError, AuthOptions, ChannelIntroduction};
use gitauth::gitstore::{signed_payload, DiskRepository, ObjectId, ObjectKind, Repository};
use gitauth::sigverify::{
    armor, dearmor, export_public_key, load_keys, parse_packets, parse_signature, sign_for_tests,
};
use gitauth::testing::reference::{reference_fixture, GitRepo, ReferenceFixture};
use gitauth::testing::{Committer, RepoBuilder, Sign};

fn fixture() -> (tempfile::TempDir, ReferenceFixture) {
    let dir = tempfile::tempdir().unwrap();
    let fx = reference_fixture(dir.path()).expect("git and gpg must be installed");
    (dir, fx)
}

fn assert_same_objects(repo: &mut GitRepo, expected: &BTreeMap<ObjectId, (ObjectKind, Vec<u8>)>) {
    let disk = DiskRepository::open(&repo.path).unwrap();
    for (id, (kind, body)) in expected {
        let obj = disk.read_object(id).unwrap_or_else(|e| panic!("{id}: {e}"));
        assert_eq!(obj.kind, *kind, "{id}");
        assert_eq!(&obj.payload, body, "{id}");
    }
}

fn authenticate(fx: &ReferenceFixture) -> Result<gitauth::authgraph::AuthReport, AuthError> {
    let repo = DiskRepository::open(&fx.repo.path).unwrap();
    let target = repo.resolve_ref("refs/heads/master").unwrap();
    let intro = ChannelIntroduction { commit: fx.commits[0], signer: fx.alice };
    authenticate_repository(&repo, &intro, &target, &AuthOptions::default())
}

#[test]
fn objects_read_identically_loose_and_packed() {
    let (_dir, mut fx) = fixture();
    let expected = fx.repo.all_objects().unwrap();
    assert!(expected.len() > 30);
    assert_same_objects(&mut fx.repo, &expected);

    fx.repo.git(&["repack", "-adf", "-q"]).unwrap();
    assert!(fx.repo.delta_count().unwrap() > 0, "repack produced no deltas");
    assert_same_objects(&mut fx.repo, &expected);

    fx.repo.git(&["-c", "repack.useDeltaBaseOffset=false", "repack", "-adf", "-q"]).unwrap();
    assert!(fx.repo.delta_count().unwrap() > 0);
    assert_same_objects(&mut fx.repo, &expected);
    assert_eq!(authenticate(&fx).unwrap().checked, 9);
}

fn gpg_packet_dump(fx: &ReferenceFixture, data: &[u8]) -> Vec<(usize, u8, usize, usize)> {
    let file = fx.gpg.dir.join("dump.bin");
    fs::write(&file, data).unwrap();
    let out = fx.gpg.run(&["--list-packets", file.to_str().unwrap()]).unwrap();
    String::from_utf8_lossy(&out)
        .lines()
        .filter_map(|l| l.strip_prefix("# off="))
        .map(|l| {
            let mut f = BTreeMap::new();
            for (i, part) in l.split_whitespace().enumerate() {
                let (k, v) = if i == 0 { ("off", part) } else { part.split_once('=').unwrap() };
                f.insert(k, v.to_string());
            }
            (
                f["off"].parse().unwrap(),
                f["tag"].parse().unwrap(),
                f["hlen"].parse().unwrap(),
                f["plen"].parse().unwrap(),
            )
        })
        .collect()
}

fn our_packet_dump(data: &[u8]) -> Vec<(usize, u8, usize, usize)> {
    parse_packets(data)
        .unwrap()
        .iter()
        .map(|p| (p.header.offset, p.header.tag, p.header.header_len, p.header.body_len))
        .collect()
}

#[test]
fn packet_boundaries_and_fingerprints_match_gpg() {
    let (_dir, fx) = fixture();
    for who in [fx.alice, fx.bob] {
        let exported = fx.gpg.export(&who.to_hex(), false).unwrap();
        assert_eq!(our_packet_dump(&exported), gpg_packet_dump(&fx, &exported));

        let listed: BTreeSet<_> = fx.gpg.fingerprints(&who.to_hex()).unwrap().into_iter().collect();
        let ours: BTreeSet<_> = load_keys(&exported).unwrap().iter().map(|k| k.fingerprint).collect();
        assert_eq!(ours, listed);
        let armored = fx.gpg.export(&who.to_hex(), true).unwrap();
        assert_eq!(dearmor(std::str::from_utf8(&armored).unwrap()).unwrap(), exported);
    }
    assert!(fx.gpg.fingerprints(&fx.alice.to_hex()).unwrap().contains(&fx.alice_subkey));

    let repo = DiskRepository::open(&fx.repo.path).unwrap();
    for (id, by_bob) in fx.commits.iter().zip(&fx.signed_by_bob) {
        let commit = repo.read_commit(id).unwrap();
        let sig = commit.signature.expect("signed commit");
        let binary = dearmor(&sig).unwrap();
        assert_eq!(our_packet_dump(&binary), gpg_packet_dump(&fx, &binary));
        let issuer = parse_signature(&sig).unwrap().issuer_fingerprint();
        assert_eq!(issuer, Some(if *by_bob { fx.bob } else { fx.alice_subkey }));
    }
}

#[test]
fn authentication_of_gpg_signed_history() {
    let (_dir, mut fx) = fixture();
    let report = authenticate(&fx).unwrap();
    assert_eq!(report.checked, 9);
    for (i, id) in fx.commits.iter().enumerate().skip(1) {
        let expected = if fx.signed_by_bob[i] { fx.bob } else { fx.alice };
        assert_eq!(report.signers[id], expected, "commit {}", i + 1);
    }

    // Bob signing on top of a commit whose policy predates him.
    fx.repo.git(&["checkout", "-q", "-b", "early", &fx.commits[2].to_hex()]).unwrap();
    fx.repo.write("NEWS", b"too early\n").unwrap();
    let bob = fx.bob;
    let early = fx.repo.commit("Early Bob", Some(&bob)).unwrap();
    let repo = DiskRepository::open(&fx.repo.path).unwrap();
    let intro = ChannelIntroduction { commit: fx.commits[0], signer: fx.alice };
    let err = authenticate_repository(&repo, &intro, &early, &AuthOptions::default()).unwrap_err();
    assert_eq!(err.kind(), "Unauthorized");
    assert_eq!(err.commit(), Some(early));
}

/// The same history rebuilt with synthetic keys gives the same outcome.
#[test]
fn matches_synthetic_equivalent() {
    let (_dir, fx) = fixture();
    let real = authenticate(&fx).unwrap();

    let alice = Committer::new("Alice");
    let bob = Committer::new("Bob");
    let mut b = RepoBuilder::new();
    b.keyring(&[&alice, &bob]);
    let mut ids = Vec::new();
    for (i, by_bob) in fx.signed_by_bob.iter().enumerate() {
        let allowed: Vec<&Committer> = if i < 4 { vec![&alice] } else { vec![&alice, &bob] };
        let parents: Vec<ObjectId> = ids.last().copied().into_iter().collect();
        let signer = if *by_bob { &bob } else { &alice };
        ids.push(b.policy_commit(&parents, &allowed, Sign::By(signer), &format!("Commit {}", i + 1)));
    }
    let intro = ChannelIntroduction { commit: ids[0], signer: alice.fingerprint() };
    let synthetic = authenticate_repository(&b.store, &intro, ids.last().unwrap(), &AuthOptions::default()).unwrap();

    assert_eq!(synthetic.checked, real.checked);
    let role = |fp, a, b| {
        if fp == a {
            "alice"
        } else if fp == b {
            "bob"
        } else {
            "other"
        }
    };
    for i in 1..ids.len() {
        assert_eq!(
            role(synthetic.signers[&ids[i]], alice.fingerprint(), bob.fingerprint()),
            role(real.signers[&fx.commits[i]], fx.alice, fx.bob)
        );
    }
}

#[test]
fn gpg_accepts_our_signatures() {
    let (dir, fx) = fixture();
    let carol = Committer::new("Carol");
    let key = export_public_key(&carol.key, &[], "Carol <carol@example.org>");
    let key_file = dir.path().join("carol.asc");
    fs::write(&key_file, armor("PGP PUBLIC KEY BLOCK", &key)).unwrap();
    fx.gpg.run(&["--import", key_file.to_str().unwrap()]).unwrap();
    assert!(fx.gpg.fingerprints(&carol.fingerprint().to_hex()).unwrap().contains(&carol.fingerprint()));

    let repo = DiskRepository::open(&fx.repo.path).unwrap();
    let payload = signed_payload(&repo.read_commit(&fx.commits[3]).unwrap());
    let sig = sign_for_tests(&payload, &carol.key);
    let payload_file = dir.path().join("payload");
    let sig_file = dir.path().join("payload.asc");
    fs::write(&payload_file, &payload).unwrap();
    fs::write(&sig_file, &sig).unwrap();
    let status =
        fx.gpg.gpg().args(["--verify", sig_file.to_str().unwrap(), payload_file.to_str().unwrap()]).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    fs::write(&payload_file, [&payload[..], b"x"].concat()).unwrap();
    let status =
        fx.gpg.gpg().args(["--verify", sig_file.to_str().unwrap(), payload_file.to_str().unwrap()]).output().unwrap();
    assert!(!status.status.success());
}
