//! ASCII armor: base64 with an optional CRC-24 trailer.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;

use super::PgpError;

const CRC24_INIT: u32 = 0x00B7_04CE;
const CRC24_POLY: u32 = 0x0186_4CFB;

pub fn crc24(data: &[u8]) -> u32 {
    let mut crc = CRC24_INIT;
    for &b in data {
        crc ^= (b as u32) << 16;
        for _ in 0..8 {
            crc <<= 1;
            if crc & 0x0100_0000 != 0 {
                crc ^= CRC24_POLY;
            }
        }
    }
    crc & 0x00FF_FFFF
}

/// A decoded armor block and its label (e.g. `PGP SIGNATURE`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArmorBlock {
    pub label: String,
    pub data: Vec<u8>,
}

fn bad(msg: &str) -> PgpError {
    PgpError::BadArmor(msg.to_string())
}

/// Decodes the first armor block in `text`.
pub fn dearmor(text: &str) -> Result<Vec<u8>, PgpError> {
    let mut blocks = dearmor_all(text)?;
    if blocks.is_empty() {
        return Err(bad("no armor block"));
    }
    Ok(blocks.swap_remove(0).data)
}

/// Decodes every armor block in `text`, in order.
pub fn dearmor_all(text: &str) -> Result<Vec<ArmorBlock>, PgpError> {
    let mut blocks = Vec::new();
    let mut lines = text.lines().map(|l| l.trim_end_matches([' ', '\t', '\r']));
    while let Some(line) = lines.next() {
        let Some(label) = line.strip_prefix("-----BEGIN ").and_then(|l| l.strip_suffix("-----")) else {
            continue;
        };
        if !label.starts_with("PGP ") {
            return Err(bad("not an OpenPGP armor block"));
        }
        let end_marker = format!("-----END {label}-----");
        let mut in_headers = true;
        let mut body = String::new();
        let mut checksum: Option<&str> = None;
        let mut closed = false;
        for line in lines.by_ref() {
            if line == end_marker {
                closed = true;
                break;
            }
            if in_headers {
                if line.is_empty() {
                    in_headers = false;
                    continue;
                }
                if line.contains(':') {
                    continue;
                }
                in_headers = false;
            }
            if line.is_empty() {
                continue;
            }
            if checksum.is_some() {
                return Err(bad("data after checksum line"));
            }
            if let Some(crc) = line.strip_prefix('=') {
                if crc.len() == 4 {
                    checksum = Some(crc);
                    continue;
                }
            }
            body.push_str(line);
        }
        if !closed {
            return Err(bad("missing end marker"));
        }
        let data = STANDARD.decode(body.as_bytes()).map_err(|_| bad("invalid base64"))?;
        if let Some(crc) = checksum {
            let expected = STANDARD.decode(crc).map_err(|_| bad("invalid checksum encoding"))?;
            let actual = crc24(&data).to_be_bytes();
            if expected != actual[1..] {
                return Err(PgpError::BadChecksum);
            }
        }
        blocks.push(ArmorBlock { label: label.to_string(), data });
    }
    Ok(blocks)
}

/// Encodes `data` as an armor block with the given label.
pub fn armor(label: &str, data: &[u8]) -> String {
    let encoded = STANDARD.encode(data);
    let mut out = format!("-----BEGIN {label}-----\n\n");
    for chunk in encoded.as_bytes().chunks(64) {
        out.push_str(std::str::from_utf8(chunk).expect("base64 is ASCII"));
        out.push('\n');
    }
    let crc = crc24(data).to_be_bytes();
    out.push('=');
    out.push_str(&STANDARD.encode(&crc[1..]));
    out.push('\n');
    out.push_str(&format!("-----END {label}-----\n"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn crc24_reference_value() {
        // CRC-24 of "123456789" as listed for the OpenPGP polynomial.
        assert_eq!(crc24(b"123456789"), 0x21CF02);
        assert_eq!(crc24(b""), CRC24_INIT);
    }

    #[test]
    fn rejects_missing_markers() {
        assert!(matches!(dearmor("just text"), Err(PgpError::BadArmor(_))));
        assert!(matches!(dearmor("-----BEGIN PGP SIGNATURE-----\n\nAAAA\n"), Err(PgpError::BadArmor(_))));
    }

    #[test]
    fn accepts_headers_and_missing_checksum() {
        let text = "-----BEGIN PGP SIGNATURE-----\nComment: hi\n\naGVsbG8=\n-----END PGP SIGNATURE-----\n";
        assert_eq!(dearmor(text).unwrap(), b"hello");
        let no_blank = "-----BEGIN PGP SIGNATURE-----\naGVsbG8=\n-----END PGP SIGNATURE-----";
        assert_eq!(dearmor(no_blank).unwrap(), b"hello");
    }

    #[test]
    fn corrupted_character_is_detected() {
        let text = armor("PGP SIGNATURE", b"some signature bytes here");
        let corrupted = text.replacen("c29t", "c29u", 1);
        assert_ne!(text, corrupted);
        assert!(matches!(dearmor(&corrupted), Err(PgpError::BadChecksum) | Err(PgpError::BadArmor(_))));
    }

    #[test]
    fn multiple_blocks() {
        let text = format!("{}\n{}", armor("PGP PUBLIC KEY BLOCK", b"one"), armor("PGP PUBLIC KEY BLOCK", b"two"));
        let blocks = dearmor_all(&text).unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[1].data, b"two");
    }

    proptest! {
        #[test]
        fn armor_round_trip(data in proptest::collection::vec(any::<u8>(), 0..300)) {
            prop_assert_eq!(dearmor(&armor("PGP MESSAGE", &data)).unwrap(), data);
        }
    }
}
