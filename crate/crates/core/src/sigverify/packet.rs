//! Packet framing and the key and signature packet bodies we understand.

use sha1::{Digest, Sha1};

use super::{Fingerprint, HashAlgorithm, KeyId, PgpError};

pub const TAG_SIGNATURE: u8 = 2;
pub const TAG_PUBLIC_KEY: u8 = 6;
pub const TAG_USER_ID: u8 = 13;
pub const TAG_PUBLIC_SUBKEY: u8 = 14;

pub const ALGO_RSA: u8 = 1;
pub const ALGO_RSA_SIGN_ONLY: u8 = 3;
pub const ALGO_EDDSA: u8 = 22;

/// DER OID of Ed25519 as used in EdDSA key packets (1.3.6.1.4.1.11591.15.1).
pub const ED25519_OID: &[u8] = &[0x2B, 0x06, 0x01, 0x04, 0x01, 0xDA, 0x47, 0x0F, 0x01];

pub const SUBPACKET_CREATION_TIME: u8 = 2;
pub const SUBPACKET_KEY_EXPIRATION: u8 = 9;
pub const SUBPACKET_ISSUER: u8 = 16;
pub const SUBPACKET_ISSUER_FINGERPRINT: u8 = 33;

/// Position of a packet within the input, in the terms used by packet dumps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PacketHeader {
    pub tag: u8,
    pub offset: usize,
    pub header_len: usize,
    pub body_len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Packet {
    PublicKey(KeyPacket),
    PublicSubkey(KeyPacket),
    Signature(SignaturePacket),
    UserId(Vec<u8>),
    /// Any other packet type; its body is skipped.
    Other(u8),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedPacket {
    pub header: PacketHeader,
    pub packet: Packet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KeyMaterial {
    Rsa {
        n: Vec<u8>,
        e: Vec<u8>,
    },
    Ed25519 {
        point: [u8; 32],
    },
    /// Algorithms outside the verification subset (encryption subkeys, ECDSA, DSA...).
    Unsupported {
        algorithm: u8,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPacket {
    pub version: u8,
    pub creation_time: u32,
    pub algorithm: u8,
    pub material: KeyMaterial,
    pub fingerprint: Fingerprint,
    /// Packet body, as hashed for the fingerprint.
    pub body: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Subpacket {
    CreationTime(u32),
    KeyExpiration(u32),
    Issuer(KeyId),
    IssuerFingerprint(Fingerprint),
    Other { kind: u8, critical: bool, data: Vec<u8> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SignatureMaterial {
    Rsa(Vec<u8>),
    EdDsa { r: Vec<u8>, s: Vec<u8> },
    Unsupported,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignaturePacket {
    pub version: u8,
    pub sig_type: u8,
    pub pubkey_algorithm: u8,
    pub hash_algorithm: HashAlgorithm,
    pub hashed_subpackets: Vec<Subpacket>,
    pub unhashed_subpackets: Vec<Subpacket>,
    pub left16: [u8; 2],
    pub material: SignatureMaterial,
    /// Body bytes from the version octet through the hashed subpacket area:
    /// the part of the packet covered by the digest.
    pub hashed_prefix: Vec<u8>,
}

impl SignaturePacket {
    /// Signature creation time. Parsed for diagnostics only.
    pub fn creation_time(&self) -> Option<u32> {
        self.hashed_subpackets.iter().find_map(|s| match s {
            Subpacket::CreationTime(t) => Some(*t),
            _ => None,
        })
    }

    pub fn issuer_fingerprint(&self) -> Option<Fingerprint> {
        self.hashed_subpackets.iter().find_map(|s| match s {
            Subpacket::IssuerFingerprint(fp) => Some(*fp),
            _ => None,
        })
    }

    /// Issuer key id from either subpacket area (unhashed first, where
    /// common tooling puts it).
    pub fn issuer_key_id(&self) -> Option<KeyId> {
        self.unhashed_subpackets.iter().chain(self.hashed_subpackets.iter()).find_map(|s| match s {
            Subpacket::Issuer(id) => Some(*id),
            _ => None,
        })
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], PgpError> {
        let end = self.pos.checked_add(n).ok_or(PgpError::Truncated)?;
        let out = self.data.get(self.pos..end).ok_or(PgpError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, PgpError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, PgpError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, PgpError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn mpi(&mut self) -> Result<Vec<u8>, PgpError> {
        let bits = self.u16()? as usize;
        Ok(self.take(bits.div_ceil(8))?.to_vec())
    }

    fn rest(&mut self) -> &'a [u8] {
        let out = &self.data[self.pos..];
        self.pos = self.data.len();
        out
    }
}

/// Reads one packet header at `data[offset..]`: returns (tag, header_len, body_len).
fn read_header(data: &[u8], offset: usize) -> Result<(u8, usize, usize), PgpError> {
    let mut r = Reader::new(&data[offset..]);
    let ctb = r.u8()?;
    if ctb & 0x80 == 0 {
        return Err(PgpError::Malformed(format!("invalid packet tag byte {ctb:#04x} at offset {offset}")));
    }
    if ctb & 0x40 != 0 {
        let tag = ctb & 0x3f;
        let first = r.u8()? as usize;
        let len = match first {
            0..=191 => first,
            192..=223 => ((first - 192) << 8) + r.u8()? as usize + 192,
            255 => r.u32()? as usize,
            _ => return Err(PgpError::Unsupported("partial body lengths".into())),
        };
        Ok((tag, r.pos, len))
    } else {
        let tag = (ctb >> 2) & 0x0f;
        let len = match ctb & 0x03 {
            0 => r.u8()? as usize,
            1 => r.u16()? as usize,
            2 => r.u32()? as usize,
            _ => data.len() - offset - 1,
        };
        Ok((tag, r.pos, len))
    }
}

/// Splits `data` into packets, decoding the types we understand.
pub fn parse_packets(data: &[u8]) -> Result<Vec<ParsedPacket>, PgpError> {
    split_packets(data, true)
}

/// Like [`parse_packets`]; with `decode_signatures` false, signature
/// packets are framed but their bodies are not decoded.
pub(crate) fn split_packets(data: &[u8], decode_signatures: bool) -> Result<Vec<ParsedPacket>, PgpError> {
    let mut out = Vec::new();
    let mut offset = 0;
    while offset < data.len() {
        let (tag, header_len, body_len) = read_header(data, offset)?;
        let start = offset + header_len;
        let body = start.checked_add(body_len).and_then(|end| data.get(start..end)).ok_or(PgpError::Truncated)?;
        let packet = match tag {
            TAG_PUBLIC_KEY => Packet::PublicKey(parse_key(body)?),
            TAG_PUBLIC_SUBKEY => Packet::PublicSubkey(parse_key(body)?),
            TAG_SIGNATURE if decode_signatures => Packet::Signature(parse_signature(body)?),
            TAG_USER_ID => Packet::UserId(body.to_vec()),
            other => Packet::Other(other),
        };
        out.push(ParsedPacket { header: PacketHeader { tag, offset, header_len, body_len }, packet });
        offset = start + body_len;
    }
    Ok(out)
}

/// Fingerprint of a v4 key packet body: SHA-1 over 0x99, the two-octet
/// body length, and the body.
pub fn fingerprint_of(body: &[u8]) -> Result<Fingerprint, PgpError> {
    match body.first() {
        None => return Err(PgpError::Truncated),
        Some(4) => {}
        Some(v) => return Err(PgpError::Unsupported(format!("version {v} key"))),
    }
    let len = u16::try_from(body.len()).map_err(|_| PgpError::Malformed("key packet too long".into()))?;
    let mut hasher = Sha1::new();
    hasher.update([0x99]);
    hasher.update(len.to_be_bytes());
    hasher.update(body);
    Ok(Fingerprint::from_bytes(hasher.finalize().into()))
}

fn parse_key(body: &[u8]) -> Result<KeyPacket, PgpError> {
    let mut r = Reader::new(body);
    let version = r.u8()?;
    if version != 4 {
        return Err(PgpError::Unsupported(format!("version {version} key")));
    }
    let creation_time = r.u32()?;
    let algorithm = r.u8()?;
    let material = match algorithm {
        ALGO_RSA | ALGO_RSA_SIGN_ONLY => {
            let n = r.mpi()?;
            let e = r.mpi()?;
            KeyMaterial::Rsa { n, e }
        }
        ALGO_EDDSA => {
            let oid_len = r.u8()? as usize;
            let oid = r.take(oid_len)?;
            let point = r.mpi()?;
            match (oid == ED25519_OID, point.split_first()) {
                (true, Some((0x40, rest))) if rest.len() == 32 => {
                    KeyMaterial::Ed25519 { point: rest.try_into().expect("length checked") }
                }
                (true, _) => return Err(PgpError::Malformed("bad Ed25519 point encoding".into())),
                (false, _) => KeyMaterial::Unsupported { algorithm },
            }
        }
        _ => {
            r.rest();
            KeyMaterial::Unsupported { algorithm }
        }
    };
    Ok(KeyPacket {
        version,
        creation_time,
        algorithm,
        material,
        fingerprint: fingerprint_of(body)?,
        body: body.to_vec(),
    })
}

fn parse_subpackets(area: &[u8]) -> Result<Vec<Subpacket>, PgpError> {
    let mut r = Reader::new(area);
    let mut out = Vec::new();
    while r.pos < area.len() {
        let first = r.u8()? as usize;
        let len = match first {
            0..=191 => first,
            192..=254 => ((first - 192) << 8) + r.u8()? as usize + 192,
            _ => r.u32()? as usize,
        };
        if len == 0 {
            return Err(PgpError::Malformed("empty subpacket".into()));
        }
        let body = r.take(len)?;
        let kind = body[0] & 0x7f;
        let critical = body[0] & 0x80 != 0;
        let data = &body[1..];
        let sub = match (kind, data.len()) {
            (SUBPACKET_CREATION_TIME, 4) => Subpacket::CreationTime(u32::from_be_bytes(data.try_into().unwrap())),
            (SUBPACKET_KEY_EXPIRATION, 4) => Subpacket::KeyExpiration(u32::from_be_bytes(data.try_into().unwrap())),
            (SUBPACKET_ISSUER, 8) => Subpacket::Issuer(KeyId(u64::from_be_bytes(data.try_into().unwrap()))),
            (SUBPACKET_ISSUER_FINGERPRINT, 21) if data[0] == 4 => {
                Subpacket::IssuerFingerprint(Fingerprint::from_bytes(data[1..].try_into().unwrap()))
            }
            _ => Subpacket::Other { kind, critical, data: data.to_vec() },
        };
        out.push(sub);
    }
    Ok(out)
}

fn parse_signature(body: &[u8]) -> Result<SignaturePacket, PgpError> {
    let mut r = Reader::new(body);
    let version = r.u8()?;
    if version != 4 {
        return Err(PgpError::Unsupported(format!("version {version} signature")));
    }
    let sig_type = r.u8()?;
    let pubkey_algorithm = r.u8()?;
    let hash_algorithm = HashAlgorithm::from_id(r.u8()?);
    let hashed_len = r.u16()? as usize;
    let hashed_area = r.take(hashed_len)?;
    let hashed_prefix = body[..r.pos].to_vec();
    let unhashed_len = r.u16()? as usize;
    let unhashed_area = r.take(unhashed_len)?;
    let left = r.take(2)?;
    let material = match pubkey_algorithm {
        ALGO_RSA | ALGO_RSA_SIGN_ONLY => SignatureMaterial::Rsa(r.mpi()?),
        ALGO_EDDSA => {
            let r_val = r.mpi()?;
            let s_val = r.mpi()?;
            SignatureMaterial::EdDsa { r: r_val, s: s_val }
        }
        _ => {
            r.rest();
            SignatureMaterial::Unsupported
        }
    };
    if r.pos != body.len() {
        return Err(PgpError::Malformed("trailing bytes in signature packet".into()));
    }
    Ok(SignaturePacket {
        version,
        sig_type,
        pubkey_algorithm,
        hash_algorithm,
        hashed_subpackets: parse_subpackets(hashed_area)?,
        unhashed_subpackets: parse_subpackets(unhashed_area)?,
        left16: [left[0], left[1]],
        material,
        hashed_prefix,
    })
}

/// Serializes a packet with a new-format header.
pub fn encode_packet(tag: u8, body: &[u8]) -> Vec<u8> {
    let mut out = vec![0xC0 | tag];
    let len = body.len();
    if len < 192 {
        out.push(len as u8);
    } else if len < 8384 {
        let v = len - 192;
        out.push(((v >> 8) + 192) as u8);
        out.push((v & 0xff) as u8);
    } else {
        out.push(0xff);
        out.extend_from_slice(&(len as u32).to_be_bytes());
    }
    out.extend_from_slice(body);
    out
}

/// Encodes a big-endian integer as an MPI (leading zero bits stripped).
pub fn encode_mpi(value: &[u8]) -> Vec<u8> {
    let start = value.iter().position(|&b| b != 0).unwrap_or(value.len());
    let v = &value[start..];
    let bits = match v.first() {
        None => 0,
        Some(&b) => (v.len() - 1) * 8 + (8 - b.leading_zeros() as usize),
    };
    let mut out = (bits as u16).to_be_bytes().to_vec();
    out.extend_from_slice(v);
    out
}
