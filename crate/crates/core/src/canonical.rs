//! Canonical encodings and SHA3-256 digests.
//!
//! Two encodings are used: canonical JSON (sorted keys, no insignificant
//! whitespace) for ledger payloads and documents, and a length-prefixed binary
//! field encoding for signed credential and delegation bodies.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use sha3::{Digest as _, Sha3_256};
use thiserror::Error;

/// A 32-byte SHA3-256 digest, hex-encoded (lowercase) on the wire.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest32(pub [u8; 32]);

impl Digest32 {
    pub const ZERO: Digest32 = Digest32([0u8; 32]);

    pub fn of(bytes: &[u8]) -> Self {
        Self(Sha3_256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Strict decoder: exactly 64 lowercase hex characters.
    pub fn from_hex(raw: &str) -> Result<Self, CanonicalError> {
        if raw.len() != 64 || !raw.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            return Err(CanonicalError::Hex(raw.to_string()));
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(raw, &mut out).map_err(|_| CanonicalError::Hex(raw.to_string()))?;
        Ok(Self(out))
    }
}

impl fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest32({})", self.to_hex())
    }
}

impl fmt::Display for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest32 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest32 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Self::from_hex(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CanonicalError {
    #[error("not a lowercase 64-character hex digest: `{0}`")]
    Hex(String),
    #[error("truncated length-prefixed field at offset {0}")]
    Truncated(usize),
    #[error("trailing bytes after last field")]
    Trailing,
    #[error("field is not valid utf-8")]
    Utf8,
    #[error("json: {0}")]
    Json(String),
}

/// Writes `value` as canonical JSON: object keys sorted by byte order, no
/// whitespace, serde_json's shortest round-trip number formatting.
pub fn to_canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

/// Serializes any `Serialize` type through [`to_canonical_json`].
pub fn canonical_json_of<T: Serialize>(value: &T) -> Result<String, CanonicalError> {
    let v = serde_json::to_value(value).map_err(|e| CanonicalError::Json(e.to_string()))?;
    Ok(to_canonical_json(&v))
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_value(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

/// Length-prefixed field encoder: each field is a big-endian `u32` length
/// followed by the raw bytes.
#[derive(Debug, Default)]
pub struct FieldWriter {
    buf: Vec<u8>,
}

impl FieldWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, field: &[u8]) -> &mut Self {
        let len = u32::try_from(field.len()).expect("field longer than u32::MAX");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(field);
        self
    }

    pub fn str(&mut self, field: &str) -> &mut Self {
        self.bytes(field.as_bytes())
    }

    pub fn u64(&mut self, field: u64) -> &mut Self {
        self.bytes(&field.to_be_bytes())
    }

    pub fn i64(&mut self, field: i64) -> &mut Self {
        self.bytes(&field.to_be_bytes())
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Reader for [`FieldWriter`] output.
#[derive(Debug)]
pub struct FieldReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> FieldReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], CanonicalError> {
        let start = self.pos;
        let header = self
            .buf
            .get(start..start + 4)
            .ok_or(CanonicalError::Truncated(start))?;
        let len = u32::from_be_bytes(header.try_into().expect("4 bytes")) as usize;
        let body = self
            .buf
            .get(start + 4..start + 4 + len)
            .ok_or(CanonicalError::Truncated(start))?;
        self.pos = start + 4 + len;
        Ok(body)
    }

    pub fn str(&mut self) -> Result<&'a str, CanonicalError> {
        std::str::from_utf8(self.bytes()?).map_err(|_| CanonicalError::Utf8)
    }

    pub fn u64(&mut self) -> Result<u64, CanonicalError> {
        let at = self.pos;
        let raw: [u8; 8] = self
            .bytes()?
            .try_into()
            .map_err(|_| CanonicalError::Truncated(at))?;
        Ok(u64::from_be_bytes(raw))
    }

    pub fn i64(&mut self) -> Result<i64, CanonicalError> {
        let at = self.pos;
        let raw: [u8; 8] = self
            .bytes()?
            .try_into()
            .map_err(|_| CanonicalError::Truncated(at))?;
        Ok(i64::from_be_bytes(raw))
    }

    pub fn finish(self) -> Result<(), CanonicalError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(CanonicalError::Trailing)
        }
    }
}
