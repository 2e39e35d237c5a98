//! Text normalization and whitespace tokenization shared by chunking,
//! embedding and context-length statistics.

use std::borrow::Cow;

use unicode_normalization::{is_nfc_quick, IsNormalized, UnicodeNormalization};

fn nfc(text: &str) -> Cow<'_, str> {
    if is_nfc_quick(text.chars()) == IsNormalized::Yes {
        Cow::Borrowed(text)
    } else {
        Cow::Owned(text.nfc().collect())
    }
}

/// NFC-normalizes `text` and collapses every whitespace run to a single space.
pub fn normalize(text: &str) -> String {
    let nfc = nfc(text);
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Tokens are maximal runs of non-whitespace characters after normalization.
pub fn tokens(text: &str) -> Vec<String> {
    let nfc = nfc(text);
    nfc.split_whitespace().map(str::to_owned).collect()
}

pub fn token_count(text: &str) -> usize {
    let nfc = nfc(text);
    nfc.split_whitespace().count()
}

/// Canonical comparison form: trimmed, case-folded, internal whitespace collapsed.
pub fn canonical(text: &str) -> String {
    normalize(text).to_lowercase()
}

/// 64-bit FNV-1a over `bytes`, starting from `offset_basis ^ seed`.
pub fn fnv1a64(bytes: &[u8], seed: u64) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET ^ seed;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}
