//! Canonical binary encoding of domain records.
//!
//! The encoding is injective and deterministic: integers are big-endian
//! fixed width, sequences and strings carry a u32 length prefix, maps are
//! sorted by key, and struct fields follow a fixed declared order. Content
//! hashes and signatures are computed over these bytes, and the same bytes
//! are the on-disk fixture format.

use crate::crypto::{
    hash_bytes, HashValue, PublicKey, SignatureBytes, HASH_LEN, PUBLIC_KEY_LEN, SIGNATURE_LEN,
};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("unexpected end of input at offset {0}")]
    UnexpectedEnd(usize),
    #[error("invalid enum tag {tag} for {what}")]
    InvalidTag { what: &'static str, tag: u8 },
    #[error("invalid utf-8 in string field")]
    InvalidUtf8,
    #[error("trailing bytes after decode ({0} left)")]
    TrailingBytes(usize),
    #[error("declared length {0} exceeds remaining input")]
    LengthOverrun(u64),
}

/// Cursor over an input slice for decoding.
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::UnexpectedEnd(self.pos));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn i64(&mut self) -> Result<i64, CodecError> {
        Ok(i64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Sequence length prefix, bounds-checked against the remaining input so
    /// hostile prefixes cannot trigger huge allocations.
    pub fn seq_len(&mut self) -> Result<usize, CodecError> {
        let len = self.u32()? as usize;
        if len > self.remaining() {
            return Err(CodecError::LengthOverrun(len as u64));
        }
        Ok(len)
    }
}

/// Canonical encode/decode. Implementations fix the byte layout of one record.
pub trait Canonical: Sized {
    fn write(&self, out: &mut Vec<u8>);
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError>;

    fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write(&mut out);
        out
    }

    /// Content hash over the canonical bytes.
    fn content_hash(&self) -> HashValue {
        hash_bytes(&self.canonical_bytes())
    }

    /// Decode requiring the whole input to be consumed.
    fn decode_exact(data: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(data);
        let value = Self::read(&mut r)?;
        if r.remaining() != 0 {
            return Err(CodecError::TrailingBytes(r.remaining()));
        }
        Ok(value)
    }
}

impl Canonical for u8 {
    fn write(&self, out: &mut Vec<u8>) {
        out.push(*self);
    }
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        r.u8()
    }
}

impl Canonical for u32 {
    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_be_bytes());
    }
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        r.u32()
    }
}

impl Canonical for u64 {
    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_be_bytes());
    }
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        r.u64()
    }
}

impl Canonical for i64 {
    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_be_bytes());
    }
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        r.i64()
    }
}

impl Canonical for String {
    fn write(&self, out: &mut Vec<u8>) {
        (self.len() as u32).write(out);
        out.extend_from_slice(self.as_bytes());
    }
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let len = r.seq_len()?;
        let bytes = r.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| CodecError::InvalidUtf8)
    }
}

impl<T: Canonical> Canonical for Vec<T> {
    fn write(&self, out: &mut Vec<u8>) {
        (self.len() as u32).write(out);
        for item in self {
            item.write(out);
        }
    }
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let len = r.seq_len()?;
        let mut items = Vec::with_capacity(len.min(4096));
        for _ in 0..len {
            items.push(T::read(r)?);
        }
        Ok(items)
    }
}

impl<T: Canonical> Canonical for Option<T> {
    fn write(&self, out: &mut Vec<u8>) {
        match self {
            None => out.push(0),
            Some(v) => {
                out.push(1);
                v.write(out);
            }
        }
    }
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match r.u8()? {
            0 => Ok(None),
            1 => Ok(Some(T::read(r)?)),
            tag => Err(CodecError::InvalidTag {
                what: "Option",
                tag,
            }),
        }
    }
}

impl Canonical for HashValue {
    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(HashValue(r.take(HASH_LEN)?.try_into().unwrap()))
    }
}

impl Canonical for PublicKey {
    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(PublicKey(r.take(PUBLIC_KEY_LEN)?.try_into().unwrap()))
    }
}

impl Canonical for SignatureBytes {
    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(SignatureBytes(r.take(SIGNATURE_LEN)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_round_trip() {
        let mut out = Vec::new();
        42u64.write(&mut out);
        (-7i64).write(&mut out);
        "reg".to_string().write(&mut out);
        vec![1u32, 2, 3].write(&mut out);
        Some(HashValue::ZERO).write(&mut out);

        let mut r = Reader::new(&out);
        assert_eq!(u64::read(&mut r).unwrap(), 42);
        assert_eq!(i64::read(&mut r).unwrap(), -7);
        assert_eq!(String::read(&mut r).unwrap(), "reg");
        assert_eq!(Vec::<u32>::read(&mut r).unwrap(), vec![1, 2, 3]);
        assert_eq!(Option::<HashValue>::read(&mut r).unwrap(), Some(HashValue::ZERO));
        assert_eq!(r.remaining(), 0);
    }

    #[test]
    fn truncated_input_is_an_error() {
        let bytes = 42u64.canonical_bytes();
        let mut r = Reader::new(&bytes[..4]);
        assert!(matches!(u64::read(&mut r), Err(CodecError::UnexpectedEnd(_))));
    }

    #[test]
    fn hostile_length_prefix_is_rejected() {
        // Claims 2^32-1 elements with no payload.
        let data = [0xff, 0xff, 0xff, 0xff];
        assert!(matches!(
            Vec::<u64>::decode_exact(&data),
            Err(CodecError::LengthOverrun(_))
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = 1u32.canonical_bytes();
        bytes.push(0);
        assert!(matches!(
            u32::decode_exact(&bytes),
            Err(CodecError::TrailingBytes(1))
        ));
    }
}
