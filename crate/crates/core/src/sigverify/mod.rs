//! A pragmatic OpenPGP subset: enough to load public keys and verify
//! detached v4 signatures over commit payloads.
//!
//! Key signatures, expiration and revocation are deliberately ignored: the
//! only question asked of a signature is whether it was made by a key in the
//! keyring. Digests other than SHA-256 and SHA-512 are refused, with SHA-1
//! and MD5 reported as [`PgpError::WeakDigest`].

mod armor;
mod packet;
mod signer;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signature as EdSignature, VerifyingKey};
use rsa::{BigUint, Pkcs1v15Sign, RsaPublicKey};
use sha2::{Digest, Sha256, Sha512};
use thiserror::Error;

pub use armor::{armor, crc24, dearmor, dearmor_all, ArmorBlock};
pub use packet::{
    encode_mpi, encode_packet, fingerprint_of, parse_packets, KeyMaterial, KeyPacket, Packet, PacketHeader,
    ParsedPacket, SignatureMaterial, SignaturePacket, Subpacket,
};
pub use signer::{export_public_key, sign_for_tests, sign_with, TestSigningKey};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PgpError {
    #[error("bad ASCII armor: {0}")]
    BadArmor(String),
    #[error("armor checksum mismatch")]
    BadChecksum,
    #[error("truncated packet")]
    Truncated,
    #[error("malformed packet: {0}")]
    Malformed(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no public key found")]
    NoKeyFound,
    #[error("no signature packet found")]
    NoSignature,
    #[error("weak digest algorithm {0} rejected")]
    WeakDigest(HashAlgorithm),
    #[error("signing key {0} not in keyring")]
    UnknownKey(String),
    #[error("bad signature")]
    BadSignature,
}

/// SHA-1 fingerprint of a v4 OpenPGP key.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint([u8; 20]);

impl Fingerprint {
    pub fn from_bytes(bytes: [u8; 20]) -> Self {
        Fingerprint(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    /// The low 64 bits, used as the key id of v4 keys.
    pub fn key_id(&self) -> KeyId {
        KeyId(u64::from_be_bytes(self.0[12..].try_into().unwrap()))
    }

    /// Uppercase hex without spaces.
    pub fn to_hex(&self) -> String {
        hex::encode_upper(self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid fingerprint {0:?}")]
pub struct BadFingerprint(pub String);

impl FromStr for Fingerprint {
    type Err = BadFingerprint;

    /// Accepts 40 hex digits, with or without whitespace, in any case.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.len() != 40 || !compact.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(BadFingerprint(s.to_string()));
        }
        let mut out = [0u8; 20];
        hex::decode_to_slice(&compact, &mut out).map_err(|_| BadFingerprint(s.to_string()))?;
        Ok(Fingerprint(out))
    }
}

impl fmt::Display for Fingerprint {
    /// Ten groups of four uppercase hex digits separated by spaces.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex = self.to_hex();
        for (i, chunk) in hex.as_bytes().chunks(4).enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(std::str::from_utf8(chunk).unwrap())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({self})")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeyId(pub u64);

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016X}", self.0)
    }
}

impl fmt::Debug for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyId({self})")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HashAlgorithm {
    Md5,
    Sha1,
    Ripemd160,
    Sha256,
    Sha384,
    Sha512,
    Sha224,
    Other(u8),
}

impl HashAlgorithm {
    pub fn from_id(id: u8) -> Self {
        match id {
            1 => HashAlgorithm::Md5,
            2 => HashAlgorithm::Sha1,
            3 => HashAlgorithm::Ripemd160,
            8 => HashAlgorithm::Sha256,
            9 => HashAlgorithm::Sha384,
            10 => HashAlgorithm::Sha512,
            11 => HashAlgorithm::Sha224,
            other => HashAlgorithm::Other(other),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            HashAlgorithm::Md5 => 1,
            HashAlgorithm::Sha1 => 2,
            HashAlgorithm::Ripemd160 => 3,
            HashAlgorithm::Sha256 => 8,
            HashAlgorithm::Sha384 => 9,
            HashAlgorithm::Sha512 => 10,
            HashAlgorithm::Sha224 => 11,
            HashAlgorithm::Other(id) => id,
        }
    }

    pub fn is_weak(self) -> bool {
        matches!(self, HashAlgorithm::Md5 | HashAlgorithm::Sha1)
    }
}

impl fmt::Display for HashAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HashAlgorithm::Md5 => f.write_str("MD5"),
            HashAlgorithm::Sha1 => f.write_str("SHA1"),
            HashAlgorithm::Ripemd160 => f.write_str("RIPEMD160"),
            HashAlgorithm::Sha256 => f.write_str("SHA256"),
            HashAlgorithm::Sha384 => f.write_str("SHA384"),
            HashAlgorithm::Sha512 => f.write_str("SHA512"),
            HashAlgorithm::Sha224 => f.write_str("SHA224"),
            HashAlgorithm::Other(id) => write!(f, "hash#{id}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    pub version: u8,
    pub algorithm: u8,
    pub creation_time: u32,
    pub material: KeyMaterial,
    pub fingerprint: Fingerprint,
    /// Fingerprint of the primary key; equal to `fingerprint` for primaries.
    pub primary_fingerprint: Fingerprint,
}

impl PublicKey {
    fn from_packet(packet: &KeyPacket, primary: Fingerprint) -> Self {
        PublicKey {
            version: packet.version,
            algorithm: packet.algorithm,
            creation_time: packet.creation_time,
            material: packet.material.clone(),
            fingerprint: packet.fingerprint,
            primary_fingerprint: primary,
        }
    }

    pub fn is_primary(&self) -> bool {
        self.fingerprint == self.primary_fingerprint
    }
}

/// Loads primary keys and subkeys from binary or armored OpenPGP data.
/// Signature and user id packets are ignored.
pub fn load_keys(data: &[u8]) -> Result<Vec<PublicKey>, PgpError> {
    let text_start = data.iter().position(|b| !b.is_ascii_whitespace()).unwrap_or(data.len());
    let packets = if data[text_start..].starts_with(b"-----BEGIN PGP") {
        let text = std::str::from_utf8(data).map_err(|_| PgpError::BadArmor("non-UTF-8 armor".into()))?;
        let mut packets = Vec::new();
        for block in dearmor_all(text)? {
            packets.extend(packet::split_packets(&block.data, false)?);
        }
        packets
    } else {
        packet::split_packets(data, false)?
    };
    let mut keys = Vec::new();
    let mut primary: Option<Fingerprint> = None;
    for p in packets {
        match p.packet {
            Packet::PublicKey(k) => {
                primary = Some(k.fingerprint);
                keys.push(PublicKey::from_packet(&k, k.fingerprint));
            }
            Packet::PublicSubkey(k) => {
                let owner = primary.ok_or_else(|| PgpError::Malformed("subkey without a primary key".into()))?;
                keys.push(PublicKey::from_packet(&k, owner));
            }
            _ => {}
        }
    }
    if keys.is_empty() {
        return Err(PgpError::NoKeyFound);
    }
    Ok(keys)
}

/// Public keys indexed by fingerprint and by 64-bit key id.
#[derive(Clone, Debug, Default)]
pub struct Keyring {
    keys: HashMap<Fingerprint, PublicKey>,
    by_keyid: HashMap<KeyId, Vec<Fingerprint>>,
}

impl Keyring {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_keys(keys: impl IntoIterator<Item = PublicKey>) -> Self {
        let mut ring = Keyring::new();
        ring.extend(keys);
        ring
    }

    pub fn insert(&mut self, key: PublicKey) {
        let fp = key.fingerprint;
        if self.keys.insert(fp, key).is_none() {
            self.by_keyid.entry(fp.key_id()).or_default().push(fp);
        }
    }

    pub fn extend(&mut self, keys: impl IntoIterator<Item = PublicKey>) {
        for k in keys {
            self.insert(k);
        }
    }

    pub fn get(&self, fp: &Fingerprint) -> Option<&PublicKey> {
        self.keys.get(fp)
    }

    /// All keys sharing the given key id.
    pub fn by_key_id(&self, id: KeyId) -> &[Fingerprint] {
        self.by_keyid.get(&id).map(Vec::as_slice).unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn primary_count(&self) -> usize {
        self.keys.values().filter(|k| k.is_primary()).count()
    }

    pub fn keys(&self) -> impl Iterator<Item = &PublicKey> {
        self.keys.values()
    }
}

/// Outcome of a successful verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verified {
    /// Primary key owning the signing key.
    pub primary: Fingerprint,
    /// Key that actually produced the signature (a subkey or the primary).
    pub signing_key: Fingerprint,
}

/// Extracts the first signature packet from armored signature text.
pub fn parse_signature(armored: &str) -> Result<SignaturePacket, PgpError> {
    let data = dearmor(armored)?;
    parse_packets(&data)?
        .into_iter()
        .find_map(|p| match p.packet {
            Packet::Signature(s) => Some(s),
            _ => None,
        })
        .ok_or(PgpError::NoSignature)
}

fn canonical_text(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + payload.len() / 32);
    let mut prev = 0u8;
    for &b in payload {
        if b == b'\n' && prev != b'\r' {
            out.push(b'\r');
        }
        out.push(b);
        prev = b;
    }
    out
}

fn signature_digest(sig: &SignaturePacket, payload: &[u8]) -> Result<Vec<u8>, PgpError> {
    let canonical;
    let data = match sig.sig_type {
        0x00 => payload,
        0x01 => {
            canonical = canonical_text(payload);
            &canonical
        }
        other => return Err(PgpError::Unsupported(format!("signature type {other:#04x}"))),
    };
    let mut trailer = vec![0x04, 0xFF];
    trailer.extend_from_slice(&(sig.hashed_prefix.len() as u32).to_be_bytes());
    Ok(match sig.hash_algorithm {
        HashAlgorithm::Sha256 => {
            let mut h = Sha256::new();
            h.update(data);
            h.update(&sig.hashed_prefix);
            h.update(&trailer);
            h.finalize().to_vec()
        }
        HashAlgorithm::Sha512 => {
            let mut h = Sha512::new();
            h.update(data);
            h.update(&sig.hashed_prefix);
            h.update(&trailer);
            h.finalize().to_vec()
        }
        other => return Err(PgpError::Unsupported(format!("digest algorithm {other}"))),
    })
}

fn left_pad(value: &[u8], len: usize) -> Option<Vec<u8>> {
    if value.len() > len {
        return None;
    }
    let mut out = vec![0u8; len - value.len()];
    out.extend_from_slice(value);
    Some(out)
}

fn check_math(sig: &SignaturePacket, key: &PublicKey, digest: &[u8]) -> Result<(), PgpError> {
    if sig.pubkey_algorithm != key.algorithm
        && !(matches!(sig.pubkey_algorithm, packet::ALGO_RSA | packet::ALGO_RSA_SIGN_ONLY)
            && matches!(key.material, KeyMaterial::Rsa { .. }))
    {
        return Err(PgpError::BadSignature);
    }
    match (&key.material, &sig.material) {
        (KeyMaterial::Ed25519 { point }, SignatureMaterial::EdDsa { r, s }) => {
            let vk = VerifyingKey::from_bytes(point).map_err(|_| PgpError::BadSignature)?;
            let mut raw = left_pad(r, 32).ok_or(PgpError::BadSignature)?;
            raw.extend(left_pad(s, 32).ok_or(PgpError::BadSignature)?);
            let sig = EdSignature::from_slice(&raw).map_err(|_| PgpError::BadSignature)?;
            vk.verify_strict(digest, &sig).map_err(|_| PgpError::BadSignature)
        }
        (KeyMaterial::Rsa { n, e }, SignatureMaterial::Rsa(value)) => {
            let public = RsaPublicKey::new_with_max_size(BigUint::from_bytes_be(n), BigUint::from_bytes_be(e), 16384)
                .map_err(|_| PgpError::Unsupported("RSA key parameters".into()))?;
            let k = n.iter().skip_while(|&&b| b == 0).count();
            let padded = left_pad(value, k).ok_or(PgpError::BadSignature)?;
            let scheme = match sig.hash_algorithm {
                HashAlgorithm::Sha256 => Pkcs1v15Sign::new::<Sha256>(),
                HashAlgorithm::Sha512 => Pkcs1v15Sign::new::<Sha512>(),
                other => return Err(PgpError::Unsupported(format!("digest algorithm {other}"))),
            };
            public.verify(scheme, digest, &padded).map_err(|_| PgpError::BadSignature)
        }
        (KeyMaterial::Unsupported { algorithm }, _) => {
            Err(PgpError::Unsupported(format!("public-key algorithm {algorithm}")))
        }
        _ => Err(PgpError::Unsupported(format!("public-key algorithm {}", sig.pubkey_algorithm))),
    }
}

/// Verifies `sig` over `payload`, returning both the signing key and its primary.
pub fn verify_detailed(sig: &SignaturePacket, payload: &[u8], keyring: &Keyring) -> Result<Verified, PgpError> {
    if sig.hash_algorithm.is_weak() {
        return Err(PgpError::WeakDigest(sig.hash_algorithm));
    }
    if !matches!(sig.hash_algorithm, HashAlgorithm::Sha256 | HashAlgorithm::Sha512) {
        return Err(PgpError::Unsupported(format!("digest algorithm {}", sig.hash_algorithm)));
    }
    if !matches!(sig.pubkey_algorithm, packet::ALGO_EDDSA | packet::ALGO_RSA | packet::ALGO_RSA_SIGN_ONLY) {
        return Err(PgpError::Unsupported(format!("public-key algorithm {}", sig.pubkey_algorithm)));
    }
    let digest = signature_digest(sig, payload)?;

    let mut candidates: Vec<&PublicKey> = Vec::new();
    if let Some(key) = sig.issuer_fingerprint().and_then(|fp| keyring.get(&fp)) {
        candidates.push(key);
    } else if let Some(id) = sig.issuer_key_id() {
        candidates.extend(keyring.by_key_id(id).iter().filter_map(|fp| keyring.get(fp)));
    }
    if candidates.is_empty() {
        let issuer = sig
            .issuer_fingerprint()
            .map(|fp| fp.to_string())
            .or_else(|| sig.issuer_key_id().map(|id| id.to_string()))
            .unwrap_or_else(|| "(no issuer)".into());
        return Err(PgpError::UnknownKey(issuer));
    }
    if digest[..2] != sig.left16 {
        return Err(PgpError::BadSignature);
    }
    let mut last = PgpError::BadSignature;
    for key in candidates {
        match check_math(sig, key, &digest) {
            Ok(()) => return Ok(Verified { primary: key.primary_fingerprint, signing_key: key.fingerprint }),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Verifies `sig` over `payload`; returns the primary fingerprint of the signer.
pub fn verify(sig: &SignaturePacket, payload: &[u8], keyring: &Keyring) -> Result<Fingerprint, PgpError> {
    verify_detailed(sig, payload, keyring).map(|v| v.primary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_text_forms() {
        let spaced: Fingerprint = "CABB A931 C0FF EEC6 900D 0CFB 090B 1199 3D9A EBB5".parse().unwrap();
        let compact: Fingerprint = "cabba931c0ffeec6900d0cfb090b11993d9aebb5".parse().unwrap();
        assert_eq!(spaced, compact);
        assert_eq!(spaced.to_string(), "CABB A931 C0FF EEC6 900D 0CFB 090B 1199 3D9A EBB5");
        assert_eq!(spaced.key_id().to_string(), "090B11993D9AEBB5");
        assert!("CABB A931".parse::<Fingerprint>().is_err());
        assert!("XABB A931 C0FF EEC6 900D 0CFB 090B 1199 3D9A EBB5".parse::<Fingerprint>().is_err());
    }

    #[test]
    fn text_canonicalization() {
        assert_eq!(canonical_text(b"a\nb\r\nc"), b"a\r\nb\r\nc");
    }

    #[test]
    fn keyring_preserves_key_id_collisions() {
        let mut a = [1u8; 20];
        let mut b = [2u8; 20];
        a[12..].copy_from_slice(&[9; 8]);
        b[12..].copy_from_slice(&[9; 8]);
        let mk = |fp: [u8; 20]| PublicKey {
            version: 4,
            algorithm: 22,
            creation_time: 0,
            material: KeyMaterial::Unsupported { algorithm: 22 },
            fingerprint: Fingerprint(fp),
            primary_fingerprint: Fingerprint(fp),
        };
        let ring = Keyring::from_keys([mk(a), mk(b), mk(a)]);
        assert_eq!(ring.len(), 2);
        assert_eq!(ring.by_key_id(Fingerprint(a).key_id()).len(), 2);
    }

    #[test]
    fn user_id_only_has_no_key() {
        let data = encode_packet(packet::TAG_USER_ID, b"Alice <a@x>");
        assert_eq!(load_keys(&data), Err(PgpError::NoKeyFound));
    }
}
