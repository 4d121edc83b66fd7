//! Ed25519 signer used to generate fixtures.

use ed25519_dalek::{Signer as _, SigningKey};
use sha1::Sha1;
use sha2::{Digest, Sha256, Sha512};

use super::packet::{
    encode_mpi, encode_packet, fingerprint_of, KeyMaterial, ALGO_EDDSA, ED25519_OID, SUBPACKET_CREATION_TIME,
    SUBPACKET_ISSUER, SUBPACKET_ISSUER_FINGERPRINT, TAG_PUBLIC_KEY, TAG_PUBLIC_SUBKEY, TAG_SIGNATURE, TAG_USER_ID,
};
use super::{armor, Fingerprint, HashAlgorithm, PublicKey};

const SUBPACKET_EMBEDDED_SIGNATURE: u8 = 32;
const SUBPACKET_KEY_FLAGS: u8 = 27;

/// An Ed25519 key able to produce v4 OpenPGP signatures.
#[derive(Clone, Debug)]
pub struct TestSigningKey {
    signing: SigningKey,
    creation_time: u32,
    body: Vec<u8>,
    fingerprint: Fingerprint,
}

impl TestSigningKey {
    pub fn from_seed(seed: [u8; 32], creation_time: u32) -> Self {
        let signing = SigningKey::from_bytes(&seed);
        let mut body = vec![4];
        body.extend_from_slice(&creation_time.to_be_bytes());
        body.push(ALGO_EDDSA);
        body.push(ED25519_OID.len() as u8);
        body.extend_from_slice(ED25519_OID);
        let mut point = vec![0x40];
        point.extend_from_slice(signing.verifying_key().as_bytes());
        body.extend(encode_mpi(&point));
        let fingerprint = fingerprint_of(&body).expect("v4 body");
        TestSigningKey { signing, creation_time, body, fingerprint }
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn creation_time(&self) -> u32 {
        self.creation_time
    }

    /// Body of the public-key packet.
    pub fn key_packet_body(&self) -> &[u8] {
        &self.body
    }

    /// The public half, as a primary key.
    pub fn public_key(&self) -> PublicKey {
        PublicKey {
            version: 4,
            algorithm: ALGO_EDDSA,
            creation_time: self.creation_time,
            material: KeyMaterial::Ed25519 { point: *self.signing.verifying_key().as_bytes() },
            fingerprint: self.fingerprint,
            primary_fingerprint: self.fingerprint,
        }
    }

    fn key_hash_prefix(&self) -> Vec<u8> {
        let mut out = vec![0x99];
        out.extend_from_slice(&(self.body.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.body);
        out
    }
}

fn subpacket(kind: u8, data: &[u8]) -> Vec<u8> {
    let len = data.len() + 1;
    let mut out = Vec::new();
    if len < 192 {
        out.push(len as u8);
    } else {
        out.push(0xff);
        out.extend_from_slice(&(len as u32).to_be_bytes());
    }
    out.push(kind);
    out.extend_from_slice(data);
    out
}

fn digest(hash: HashAlgorithm, parts: &[&[u8]]) -> Vec<u8> {
    fn run<D: Digest>(parts: &[&[u8]]) -> Vec<u8> {
        let mut h = D::new();
        for p in parts {
            h.update(p);
        }
        h.finalize().to_vec()
    }
    match hash {
        HashAlgorithm::Sha1 => run::<Sha1>(parts),
        HashAlgorithm::Sha256 => run::<Sha256>(parts),
        HashAlgorithm::Sha512 => run::<Sha512>(parts),
        other => panic!("test signer does not support {other}"),
    }
}

/// Builds a signature packet body over `data` (already framed for the
/// signature type) with the given extra hashed subpackets.
fn signature_body(
    key: &TestSigningKey,
    sig_type: u8,
    hash: HashAlgorithm,
    data: &[u8],
    extra_hashed: &[u8],
    extra_unhashed: &[u8],
) -> Vec<u8> {
    let mut hashed = subpacket(SUBPACKET_CREATION_TIME, &key.creation_time.to_be_bytes());
    let mut issuer_fp = vec![4];
    issuer_fp.extend_from_slice(key.fingerprint.as_bytes());
    hashed.extend(subpacket(SUBPACKET_ISSUER_FINGERPRINT, &issuer_fp));
    hashed.extend_from_slice(extra_hashed);

    let mut prefix = vec![4, sig_type, ALGO_EDDSA, hash.id()];
    prefix.extend_from_slice(&(hashed.len() as u16).to_be_bytes());
    prefix.extend_from_slice(&hashed);
    let mut trailer = vec![0x04, 0xFF];
    trailer.extend_from_slice(&(prefix.len() as u32).to_be_bytes());
    let hashed_value = digest(hash, &[data, &prefix, &trailer]);
    let sig = key.signing.sign(&hashed_value).to_bytes();

    let mut unhashed = subpacket(SUBPACKET_ISSUER, &key.fingerprint.key_id().0.to_be_bytes());
    unhashed.extend_from_slice(extra_unhashed);
    let mut body = prefix;
    body.extend_from_slice(&(unhashed.len() as u16).to_be_bytes());
    body.extend_from_slice(&unhashed);
    body.extend_from_slice(&hashed_value[..2]);
    body.extend(encode_mpi(&sig[..32]));
    body.extend(encode_mpi(&sig[32..]));
    body
}

/// Armored detached signature over `payload` with an explicit digest and
/// signature type (0x00 binary or 0x01 text). SHA-1 is accepted here so
/// that fixtures can exercise the weak-digest policy.
pub fn sign_with(payload: &[u8], key: &TestSigningKey, hash: HashAlgorithm, sig_type: u8) -> String {
    let data = if sig_type == 0x01 {
        let mut out = Vec::new();
        let mut prev = 0u8;
        for &b in payload {
            if b == b'\n' && prev != b'\r' {
                out.push(b'\r');
            }
            out.push(b);
            prev = b;
        }
        out
    } else {
        payload.to_vec()
    };
    let body = signature_body(key, sig_type, hash, &data, &[], &[]);
    armor("PGP SIGNATURE", &encode_packet(TAG_SIGNATURE, &body))
}

/// Armored v4 binary-document signature with SHA-256.
pub fn sign_for_tests(payload: &[u8], key: &TestSigningKey) -> String {
    sign_with(payload, key, HashAlgorithm::Sha256, 0x00)
}

/// Transferable public key: primary, self-certified user id, and signing
/// subkeys with binding signatures.
pub fn export_public_key(primary: &TestSigningKey, subkeys: &[&TestSigningKey], user_id: &str) -> Vec<u8> {
    let mut out = encode_packet(TAG_PUBLIC_KEY, primary.key_packet_body());
    out.extend(encode_packet(TAG_USER_ID, user_id.as_bytes()));

    let mut uid_data = primary.key_hash_prefix();
    uid_data.push(0xB4);
    uid_data.extend_from_slice(&(user_id.len() as u32).to_be_bytes());
    uid_data.extend_from_slice(user_id.as_bytes());
    let flags = subpacket(SUBPACKET_KEY_FLAGS, &[0x03]);
    let cert = signature_body(primary, 0x13, HashAlgorithm::Sha256, &uid_data, &flags, &[]);
    out.extend(encode_packet(TAG_SIGNATURE, &cert));

    for sub in subkeys {
        out.extend(encode_packet(TAG_PUBLIC_SUBKEY, sub.key_packet_body()));
        let mut bind_data = primary.key_hash_prefix();
        bind_data.extend(sub.key_hash_prefix());
        let back = signature_body(sub, 0x19, HashAlgorithm::Sha256, &bind_data, &[], &[]);
        let mut hashed = subpacket(SUBPACKET_KEY_FLAGS, &[0x02]);
        hashed.extend(subpacket(SUBPACKET_EMBEDDED_SIGNATURE, &back));
        let binding = signature_body(primary, 0x18, HashAlgorithm::Sha256, &bind_data, &hashed, &[]);
        out.extend(encode_packet(TAG_SIGNATURE, &binding));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{load_keys, parse_signature, verify, Keyring, PgpError};
    use super::*;

    fn key(n: u8) -> TestSigningKey {
        TestSigningKey::from_seed([n; 32], 1_600_000_000)
    }

    #[test]
    fn sign_then_verify() {
        let alice = key(1);
        let ring = Keyring::from_keys([alice.public_key()]);
        let sig = parse_signature(&sign_for_tests(b"payload", &alice)).unwrap();
        assert_eq!(verify(&sig, b"payload", &ring).unwrap(), alice.fingerprint());
        assert_eq!(verify(&sig, b"payloaD", &ring), Err(PgpError::BadSignature));
    }

    #[test]
    fn unknown_key() {
        let (a, b) = (key(1), key(2));
        let ring = Keyring::from_keys([b.public_key()]);
        let sig = parse_signature(&sign_for_tests(b"x", &a)).unwrap();
        assert!(matches!(verify(&sig, b"x", &ring), Err(PgpError::UnknownKey(_))));
    }

    #[test]
    fn sha1_is_weak_and_sha512_is_fine() {
        let a = key(1);
        let ring = Keyring::from_keys([a.public_key()]);
        let weak = parse_signature(&sign_with(b"x", &a, HashAlgorithm::Sha1, 0)).unwrap();
        assert_eq!(verify(&weak, b"x", &ring), Err(PgpError::WeakDigest(HashAlgorithm::Sha1)));
        // Rejected on policy even when the payload does not match.
        assert_eq!(verify(&weak, b"y", &ring), Err(PgpError::WeakDigest(HashAlgorithm::Sha1)));
        let strong = parse_signature(&sign_with(b"x", &a, HashAlgorithm::Sha512, 0)).unwrap();
        assert_eq!(verify(&strong, b"x", &ring).unwrap(), a.fingerprint());
    }

    #[test]
    fn text_signature_canonicalizes_line_endings() {
        let a = key(3);
        let ring = Keyring::from_keys([a.public_key()]);
        let sig = parse_signature(&sign_with(b"line\nline\n", &a, HashAlgorithm::Sha256, 0x01)).unwrap();
        assert_eq!(sig.sig_type, 0x01);
        assert_eq!(verify(&sig, b"line\nline\n", &ring).unwrap(), a.fingerprint());
        assert_eq!(verify(&sig, b"line\r\nline\r\n", &ring).unwrap(), a.fingerprint());
    }

    #[test]
    fn exported_key_with_subkey() {
        let (primary, sub) = (key(4), key(5));
        let keys = load_keys(&export_public_key(&primary, &[&sub], "Alice <alice@example.org>")).unwrap();
        assert_eq!(keys.len(), 2);
        assert_eq!(keys[0].fingerprint, primary.fingerprint());
        assert_eq!(keys[1].fingerprint, sub.fingerprint());
        assert_eq!(keys[1].primary_fingerprint, primary.fingerprint());

        let ring = Keyring::from_keys(keys);
        let sig = parse_signature(&sign_for_tests(b"data", &sub)).unwrap();
        assert_eq!(verify(&sig, b"data", &ring).unwrap(), primary.fingerprint());
    }

    #[test]
    fn armored_export_loads() {
        let a = key(6);
        let text = armor("PGP PUBLIC KEY BLOCK", &export_public_key(&a, &[], "A <a@x>"));
        let keys = load_keys(text.as_bytes()).unwrap();
        assert_eq!(keys.len(), 1);
        assert_eq!(keys[0], a.public_key());
    }
}
