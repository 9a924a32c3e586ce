//! Canonical JSON encoding shared by every on-disk format.
//!
//! Canonical form: object keys sorted, two-space indentation, `\n` line
//! ends, a trailing newline, and floats printed as the shortest decimal
//! that round-trips to the same binary64 value.

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::FormatError;

/// Serialize `value` to canonical JSON text.
///
/// Going through `serde_json::Value` sorts every object's keys, because the
/// default `Map` is ordered.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String, FormatError> {
    let tree = serde_json::to_value(value).map_err(|e| FormatError::Encode(e.to_string()))?;
    let mut text =
        serde_json::to_string_pretty(&tree).map_err(|e| FormatError::Encode(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Parse JSON text, reporting syntax errors with their line and column.
pub fn parse_json(text: &str) -> Result<serde_json::Value, FormatError> {
    serde_json::from_str(text).map_err(|e| FormatError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Decode an already-parsed tree into a typed document. Shape errors are
/// schema violations, not syntax errors.
pub fn from_tree<T: DeserializeOwned>(tree: serde_json::Value) -> Result<T, FormatError> {
    serde_json::from_value(tree).map_err(|e| FormatError::Schema(e.to_string()))
}

/// Check the `format` tag of a document before decoding it.
pub fn expect_format(tree: &serde_json::Value, expected: &str) -> Result<(), FormatError> {
    match tree.get("format").and_then(|f| f.as_str()) {
        Some(found) if found == expected => Ok(()),
        Some(found) => Err(FormatError::Schema(format!(
            "format is `{found}`, expected `{expected}`"
        ))),
        None => Err(FormatError::Schema(format!(
            "missing `format` field (expected `{expected}`)"
        ))),
    }
}

/// Lowercase hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Content hash of a value: SHA-256 over its canonical encoding.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> Result<String, FormatError> {
    Ok(sha256_hex(to_canonical_string(value)?.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted_and_indented() {
        let text = to_canonical_string(&json!({"b": 1, "a": [1.5, 2]})).unwrap();
        assert_eq!(text, "{\n  \"a\": [\n    1.5,\n    2\n  ],\n  \"b\": 1\n}\n");
    }

    #[test]
    fn floats_use_shortest_round_trip() {
        for x in [0.1f64, 1.0 / 3.0, 60.0 / 3.6, 1e-300, -2.5e21] {
            let text = to_canonical_string(&x).unwrap();
            let back: f64 = serde_json::from_str(&text).unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
        assert_eq!(to_canonical_string(&0.1).unwrap(), "0.1\n");
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_json("{\n  \"a\": ,\n}") {
            Err(FormatError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hash_is_hex_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
