//! Content hashing and the signature provider.
//!
//! Signatures are deterministic (same key and message always produce the
//! same bytes) and key pairs derive deterministically from a 32-byte seed.
//! Both properties are load-bearing: chunk self-selection seeds come from
//! signature bytes, and trace-secret proofs derive key pairs from hashes.

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use sha2::{Digest, Sha256};
use std::fmt;

pub const HASH_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 32;
pub const SECRET_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;

/// 32-byte content hash.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HashValue(pub [u8; HASH_LEN]);

impl HashValue {
    pub const ZERO: HashValue = HashValue([0u8; HASH_LEN]);

    pub fn as_bytes(&self) -> &[u8; HASH_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex_encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Option<HashValue> {
        let bytes = hex_decode(s)?;
        let arr: [u8; HASH_LEN] = bytes.try_into().ok()?;
        Some(HashValue(arr))
    }
}

impl fmt::Debug for HashValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HashValue({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for HashValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// SHA-256 of a byte string.
pub fn hash_bytes(data: &[u8]) -> HashValue {
    let mut hasher = Sha256::new();
    hasher.update(data);
    HashValue(hasher.finalize().into())
}

/// SHA-256 over the concatenation of several byte strings.
pub fn hash_concat(parts: &[&[u8]]) -> HashValue {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p);
    }
    HashValue(hasher.finalize().into())
}

/// Incremental hasher for trace secrets and long streams.
pub struct IncrementalHasher(Sha256);

impl IncrementalHasher {
    pub fn new() -> Self {
        IncrementalHasher(Sha256::new())
    }

    pub fn update(&mut self, data: &[u8]) {
        self.0.update(data);
    }

    pub fn finish(self) -> HashValue {
        HashValue(self.0.finalize().into())
    }
}

impl Default for IncrementalHasher {
    fn default() -> Self {
        Self::new()
    }
}

/// Public half of a signing key pair. Opaque bytes; may be malformed,
/// in which case every verification against it fails.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_LEN]);

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", &hex_encode(&self.0)[..16])
    }
}

/// Secret half of a signing key pair.
#[derive(Clone)]
pub struct SecretKey(pub [u8; SECRET_KEY_LEN]);

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignatureBytes(pub [u8; SIGNATURE_LEN]);

impl fmt::Debug for SignatureBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", &hex_encode(&self.0)[..16])
    }
}

#[derive(Clone, Debug)]
pub struct Keypair {
    pub public: PublicKey,
    pub secret: SecretKey,
}

/// Derives a key pair deterministically from a 32-byte seed.
pub fn keypair_from_seed(seed: &[u8; 32]) -> Keypair {
    let signing = SigningKey::from_bytes(seed);
    Keypair {
        public: PublicKey(signing.verifying_key().to_bytes()),
        secret: SecretKey(*seed),
    }
}

/// Deterministic signature over `message`.
pub fn sign(secret: &SecretKey, message: &[u8]) -> SignatureBytes {
    let signing = SigningKey::from_bytes(&secret.0);
    SignatureBytes(signing.sign(message).to_bytes())
}

/// Signature check. Malformed keys or signatures yield `false`, never a panic.
pub fn verify(public: &PublicKey, message: &[u8], signature: &SignatureBytes) -> bool {
    let Ok(key) = VerifyingKey::from_bytes(&public.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
    key.verify(message, &sig).is_ok()
}

pub fn hex_encode(bytes: &[u8]) -> String {
    const TABLE: &[u8; 16] = b"0123456789abcdef";
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push(TABLE[(b >> 4) as usize] as char);
        out.push(TABLE[(b & 0xf) as usize] as char);
    }
    out
}

pub fn hex_decode(s: &str) -> Option<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return None;
    }
    let nibble = |c: u8| -> Option<u8> {
        match c {
            b'0'..=b'9' => Some(c - b'0'),
            b'a'..=b'f' => Some(c - b'a' + 10),
            b'A'..=b'F' => Some(c - b'A' + 10),
            _ => None,
        }
    };
    let raw = s.as_bytes();
    let mut out = Vec::with_capacity(s.len() / 2);
    for pair in raw.chunks(2) {
        out.push(nibble(pair[0])? << 4 | nibble(pair[1])?);
    }
    Some(out)
}

// Hex string serde for the fixed-width byte newtypes.
macro_rules! hex_serde {
    ($ty:ty, $len:expr) => {
        impl serde::Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&hex_encode(&self.0))
            }
        }
        impl<'de> serde::Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                let bytes = hex_decode(&s)
                    .ok_or_else(|| serde::de::Error::custom("invalid hex string"))?;
                let arr: [u8; $len] = bytes
                    .try_into()
                    .map_err(|_| serde::de::Error::custom("wrong byte length"))?;
                Ok(Self(arr))
            }
        }
    };
}

hex_serde!(HashValue, HASH_LEN);
hex_serde!(PublicKey, PUBLIC_KEY_LEN);
hex_serde!(SignatureBytes, SIGNATURE_LEN);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_verify_round_trip() {
        let kp = keypair_from_seed(&[7u8; 32]);
        let sig = sign(&kp.secret, b"hello");
        assert!(verify(&kp.public, b"hello", &sig));
    }

    #[test]
    fn verify_rejects_wrong_message() {
        let kp = keypair_from_seed(&[7u8; 32]);
        let sig = sign(&kp.secret, b"hello");
        assert!(!verify(&kp.public, b"other", &sig));
    }

    #[test]
    fn keypair_from_seed_is_deterministic() {
        let a = keypair_from_seed(&[42u8; 32]);
        let b = keypair_from_seed(&[42u8; 32]);
        assert_eq!(a.public, b.public);
        assert_eq!(a.secret.0, b.secret.0);
    }

    #[test]
    fn signing_is_deterministic() {
        let kp = keypair_from_seed(&[1u8; 32]);
        assert_eq!(sign(&kp.secret, b"m"), sign(&kp.secret, b"m"));
    }

    #[test]
    fn malformed_public_key_fails_closed() {
        // Not every 32-byte string decodes to a curve point.
        let bogus = PublicKey([0xff; 32]);
        let kp = keypair_from_seed(&[9u8; 32]);
        let sig = sign(&kp.secret, b"m");
        assert!(!verify(&bogus, b"m", &sig));
    }

    #[test]
    fn hex_round_trip() {
        let h = hash_bytes(b"abc");
        assert_eq!(HashValue::from_hex(&h.to_hex()), Some(h));
        assert_eq!(hex_decode("0g"), None);
    }
}
