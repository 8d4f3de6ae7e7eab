use std::fmt;
use std::str::FromStr;

/// Append-only bit sequence packed MSB-first into bytes. Pad bits after
/// `len` in the last byte are always zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitVector {
    bytes: Vec<u8>,
    len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitVectorError {
    /// `len` needs a different number of bytes than were supplied.
    LengthMismatch { bytes: usize, len_bits: usize },
    NonZeroPadding,
}

impl fmt::Display for BitVectorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LengthMismatch { bytes, len_bits } => {
                write!(f, "{len_bits} bits cannot be stored in exactly {bytes} bytes")
            }
            Self::NonZeroPadding => f.write_str("padding bits after the last used bit are not zero"),
        }
    }
}

impl std::error::Error for BitVectorError {}

impl BitVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self { bytes: Vec::with_capacity(bits.div_ceil(8)), len: 0 }
    }

    /// Rebuilds a vector from packed bytes, checking the padding invariant.
    pub fn from_parts(bytes: Vec<u8>, len: usize) -> Result<Self, BitVectorError> {
        if bytes.len() != len.div_ceil(8) {
            return Err(BitVectorError::LengthMismatch { bytes: bytes.len(), len_bits: len });
        }
        let used = len % 8;
        if used != 0 {
            let last = bytes[bytes.len() - 1];
            if last & (0xFF >> used) != 0 {
                return Err(BitVectorError::NonZeroPadding);
            }
        }
        Ok(Self { bytes, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            let last = self.bytes.len() - 1;
            self.bytes[last] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    /// Appends the low `width` bits of `code`, most significant first.
    pub fn push_bits(&mut self, code: u64, width: u8) {
        debug_assert!(width <= 64);
        for shift in (0..width).rev() {
            self.push((code >> shift) & 1 == 1);
        }
    }

    pub fn get(&self, index: usize) -> Option<bool> {
        (index < self.len).then(|| self.bytes[index / 8] & (0x80 >> (index % 8)) != 0)
    }

    /// Drops bits past `len`, re-zeroing the padding.
    pub fn truncate(&mut self, len: usize) {
        if len >= self.len {
            return;
        }
        self.len = len;
        self.bytes.truncate(len.div_ceil(8));
        if !len.is_multiple_of(8) {
            let last = self.bytes.len() - 1;
            self.bytes[last] &= !(0xFF >> (len % 8));
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.bytes[i / 8] & (0x80 >> (i % 8)) != 0)
    }
}

/// `"0100"`-style rendering.
impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in self.iter() {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitVector {
    type Err = char;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut v = BitVector::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => v.push(false),
                '1' => v.push(true),
                other => return Err(other),
            }
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packs_msb_first() {
        let v: BitVector = "0100".parse().unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v.as_bytes(), &[0b0100_0000]);
        assert_eq!(v.to_string(), "0100");

        let mut w = BitVector::new();
        w.push_bits(0b101, 3);
        w.push_bits(0xFF, 8);
        assert_eq!(w.to_string(), "10111111111");
        assert_eq!(w.as_bytes(), &[0b1011_1111, 0b1110_0000]);
        assert_eq!(w.get(0), Some(true));
        assert_eq!(w.get(1), Some(false));
        assert_eq!(w.get(11), None);
    }

    #[test]
    fn from_parts_checks_invariants() {
        assert!(BitVector::from_parts(vec![], 0).unwrap().is_empty());
        assert_eq!(
            BitVector::from_parts(vec![0x40], 9),
            Err(BitVectorError::LengthMismatch { bytes: 1, len_bits: 9 })
        );
        assert_eq!(BitVector::from_parts(vec![0x41], 4), Err(BitVectorError::NonZeroPadding));
        assert_eq!(BitVector::from_parts(vec![0x40], 4).unwrap().to_string(), "0100");
    }

    #[test]
    fn truncate_rezeroes_padding() {
        let mut v: BitVector = "1111111111".parse().unwrap();
        v.truncate(9);
        assert_eq!(v.as_bytes(), &[0xFF, 0x80]);
        v.truncate(3);
        assert_eq!(v.as_bytes(), &[0xE0]);
        assert_eq!(BitVector::from_parts(v.as_bytes().to_vec(), 3).unwrap(), v);
    }
}
