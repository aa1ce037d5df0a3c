//! 128-bit content fingerprints used for duplicate detection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::pddl::{serialize_problem, Problem};
use crate::symbol::Symbol;

/// Placeholder substituted for the problem name before hashing, so the
/// index a problem happens to be emitted at does not affect its identity.
pub const NORMALIZED_PROBLEM_NAME: &str = "problem";

/// SHA-256 truncated to its first 16 bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint([u8; 16]);

impl Fingerprint {
    pub fn of(bytes: &[u8]) -> Self {
        let digest = Sha256::digest(bytes);
        let mut out = [0u8; 16];
        out.copy_from_slice(&digest[..16]);
        Fingerprint(out)
    }

    /// Hash of several byte strings, each length-prefixed so that
    /// boundaries cannot shift between parts.
    pub fn of_parts(parts: &[&[u8]]) -> Self {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        let digest = h.finalize();
        let mut out = [0u8; 16];
        out.copy_from_slice(&digest[..16]);
        Fingerprint(out)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid fingerprint {0:?}: expected 32 hex digits")]
pub struct ParseFingerprintError(pub String);

impl FromStr for Fingerprint {
    type Err = ParseFingerprintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseFingerprintError(s.to_string());
        if s.len() != 32 || !s.is_ascii() {
            return Err(err());
        }
        let mut out = [0u8; 16];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| err())?;
        }
        Ok(Fingerprint(out))
    }
}

impl Serialize for Fingerprint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fingerprint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fingerprint of the canonical serialization with the problem name normalized.
pub fn problem_fingerprint(p: &Problem) -> Fingerprint {
    let mut p = p.clone();
    p.name = Symbol::new(NORMALIZED_PROBLEM_NAME).expect("valid symbol");
    Fingerprint::of(serialize_problem(&p).as_bytes())
}

/// Replaces the name in the first `(problem NAME)` header of PDDL text.
///
/// Works on raw text so already-serialized problems can be fingerprinted
/// without reparsing; text without a header is returned unchanged.
pub fn normalize_problem_name(text: &str) -> String {
    let lower = text.to_ascii_lowercase();
    let Some(start) = lower.find("(problem") else {
        return text.to_string();
    };
    let after = start + "(problem".len();
    let rest = &text[after..];
    let name_start = after + (rest.len() - rest.trim_start().len());
    let name_end = text[name_start..]
        .find(|c: char| c.is_whitespace() || c == ')')
        .map_or(text.len(), |i| name_start + i);
    format!(
        "{}{}{}",
        &text[..name_start],
        NORMALIZED_PROBLEM_NAME,
        &text[name_end..]
    )
}
