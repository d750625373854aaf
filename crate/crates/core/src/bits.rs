//! Fixed-length bit vector packed into `u64` words, LSB first.

use crate::error::{Error, Result};

const WORD: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; len.div_ceil(WORD)] }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self { len, words: vec![u64::MAX; len.div_ceil(WORD)] };
        v.clear_tail();
        v
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v = Self::zeros(len);
        for i in indices {
            if i >= len {
                return Err(Error::IndexOutOfRange { item: i, n: len });
            }
            v.set(i, true);
        }
        Ok(v)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn any(&self) -> bool {
        self.words.iter().any(|&w| w != 0)
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn and_count(&self, other: &Self) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Returns the unique set bit of `self & other`, if exactly one exists.
    pub fn sole_common(&self, other: &Self) -> Option<usize> {
        let mut found = None;
        for (w, (a, b)) in self.words.iter().zip(&other.words).enumerate() {
            let x = a & b;
            if x == 0 {
                continue;
            }
            if found.is_some() || x & (x - 1) != 0 {
                return None;
            }
            found = Some(w * WORD + x.trailing_zeros() as usize);
        }
        found
    }

    pub fn or_assign(&mut self, other: &Self) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn and_assign(&mut self, other: &Self) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn and_not_assign(&mut self, other: &Self) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn not(&self) -> Self {
        let mut v = Self { len: self.len, words: self.words.iter().map(|w| !w).collect() };
        v.clear_tail();
        v
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut x = word;
            std::iter::from_fn(move || {
                if x == 0 {
                    return None;
                }
                let bit = x.trailing_zeros() as usize;
                x &= x - 1;
                Some(w * WORD + bit)
            })
        })
    }

    /// Little-endian byte hex: bit `i` is bit `i % 8` of byte `i / 8`.
    pub fn to_hex(&self) -> String {
        let bytes: Vec<u8> = self
            .words
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(self.len.div_ceil(8))
            .collect();
        hex::encode(bytes)
    }

    pub fn from_hex(len: usize, s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Domain(format!("bad hex row: {e}")))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Dimension(format!(
                "hex row has {} bytes, expected {} for {len} bits",
                bytes.len(),
                len.div_ceil(8)
            )));
        }
        let mut v = Self::zeros(len);
        for (i, chunk) in bytes.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            v.words[i] = u64::from_le_bytes(buf);
        }
        let before = v.words.clone();
        v.clear_tail();
        if before != v.words {
            return Err(Error::Domain("hex row sets bits past its length".into()));
        }
        Ok(v)
    }
}
