use std::ops::Range;

/// Append-only packed bit sequence used for abstracted trajectories.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitSeq {
    words: Vec<u64>,
    len: u64,
}

/// Transition counts over consecutive pairs of a bit range.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransitionCounts {
    /// Pairs whose first element is 0.
    pub from_zero: u64,
    /// Pairs whose first element is 1.
    pub from_one: u64,
    pub zero_to_one: u64,
    pub one_to_zero: u64,
}

impl std::ops::AddAssign for TransitionCounts {
    fn add_assign(&mut self, o: Self) {
        self.from_zero += o.from_zero;
        self.from_one += o.from_one;
        self.zero_to_one += o.zero_to_one;
        self.one_to_zero += o.one_to_zero;
    }
}

impl BitSeq {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut s = Self::new();
        for b in bits {
            s.push(b);
        }
        s
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn reserve(&mut self, additional: u64) {
        let words = (self.len + additional).div_ceil(64) as usize;
        self.words.reserve(words.saturating_sub(self.words.len()));
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        let off = (self.len & 63) as u32;
        if off == 0 {
            self.words.push(bit as u64);
        } else if bit {
            *self.words.last_mut().expect("non-empty") |= 1u64 << off;
        }
        self.len += 1;
    }

    #[inline]
    pub fn get(&self, i: u64) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        (self.words[(i >> 6) as usize] >> (i & 63)) & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    /// The 64 bits starting at `start`, zero past the end.
    #[inline]
    fn window(&self, start: u64) -> u64 {
        let wi = (start >> 6) as usize;
        let off = (start & 63) as u32;
        let lo = self.words.get(wi).copied().unwrap_or(0) >> off;
        if off == 0 {
            lo
        } else {
            lo | self.words.get(wi + 1).copied().unwrap_or(0) << (64 - off)
        }
    }

    fn check(&self, r: &Range<u64>) {
        assert!(
            r.start <= r.end && r.end <= self.len,
            "range {r:?} out of bounds for length {}",
            self.len
        );
    }

    pub fn count_ones(&self, r: Range<u64>) -> u64 {
        self.check(&r);
        let mut total = 0u64;
        let mut pos = r.start;
        while pos < r.end {
            let take = (r.end - pos).min(64);
            let mask = if take == 64 { u64::MAX } else { (1u64 << take) - 1 };
            total += (self.window(pos) & mask).count_ones() as u64;
            pos += take;
        }
        total
    }

    /// Counts the transitions between elements `j` and `j + 1` for all
    /// `j, j + 1` inside `r`.
    pub fn transitions(&self, r: Range<u64>) -> TransitionCounts {
        self.check(&r);
        let mut c = TransitionCounts::default();
        if r.end - r.start < 2 {
            return c;
        }
        let last = r.end - 1;
        let mut pos = r.start;
        while pos < last {
            let take = (last - pos).min(64);
            let mask = if take == 64 { u64::MAX } else { (1u64 << take) - 1 };
            let x = self.window(pos) & mask;
            let y = self.window(pos + 1) & mask;
            let ones = x.count_ones() as u64;
            c.from_one += ones;
            c.from_zero += take - ones;
            c.zero_to_one += (!x & y & mask).count_ones() as u64;
            c.one_to_zero += (x & !y).count_ones() as u64;
            pos += take;
        }
        c
    }

    /// Means of consecutive `size`-blocks covering `r`; `r` must be a
    /// multiple of `size` long.
    pub fn block_means(&self, r: Range<u64>, size: u64, out: &mut Vec<f64>) {
        assert!(size > 0 && (r.end - r.start) % size == 0);
        let mut pos = r.start;
        while pos < r.end {
            out.push(self.count_ones(pos..pos + size) as f64 / size as f64);
            pos += size;
        }
    }
}
