use std::fmt;

/// Values of all nodes at one time point, packed 64 per word.
///
/// Bit `i` holds node `i`. Bits past `n` in the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct NetworkState {
    words: Vec<u64>,
    n: usize,
}

impl NetworkState {
    pub fn zeros(n: usize) -> Self {
        Self {
            words: vec![0; n.div_ceil(64)],
            n,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    /// Decodes an integer state index; node `i` is bit `i` of `index`.
    pub fn from_index(n: usize, index: u64) -> Self {
        assert!(n <= 64, "integer encoding only covers up to 64 nodes");
        let mut s = Self::zeros(n);
        if n > 0 {
            s.words[0] = if n == 64 { index } else { index & ((1 << n) - 1) };
        }
        s
    }

    pub fn to_index(&self) -> u64 {
        assert!(self.n <= 64, "integer encoding only covers up to 64 nodes");
        self.words.first().copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.n);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.n);
        let mask = 1u64 << (i & 63);
        if value {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.n);
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    /// Clears the padding bits of the last word.
    pub(crate) fn mask_tail(&mut self) {
        let rem = self.n & 63;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn xor(&self, other: &NetworkState) -> NetworkState {
        assert_eq!(self.n, other.n);
        NetworkState {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
            n: self.n,
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.n).map(|i| self.get(i))
    }
}

impl fmt::Debug for NetworkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NetworkState(")?;
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        write!(f, ")")
    }
}
