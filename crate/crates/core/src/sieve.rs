//! Exact prime counting in half-open windows via a segmented sieve.
//!
//! Windows may sit at offsets up to 10¹⁴; only primes up to the square
//! root of the window end are needed, so a [`BasePrimeTable`] built once
//! per run suffices for an entire scan. Within a window the sieve works
//! on cache-sized segments with an odd-only bitmap (multiples of 2 are
//! never represented).

use crate::{Error, Result};

/// Number of odd slots per segment: 256 Ki odds = 32 KiB of bitmap,
/// covering 2²⁰ integers. Correctness does not depend on this value.
const SEGMENT_ODDS: usize = 1 << 18;

/// A half-open integer window `[start, start + length)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    start: u64,
    length: u64,
}

impl Window {
    /// Creates a window covering `start ≤ n < start + length`.
    ///
    /// Fails if `start + length` overflows `u64` (the arithmetic width
    /// leaves ample headroom above 10¹⁴ + 10¹⁰).
    pub fn new(start: u64, length: u64) -> Result<Self> {
        start.checked_add(length).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "window end overflows: start={start}, length={length}"
            ))
        })?;
        Ok(Self { start, length })
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn length(&self) -> u64 {
        self.length
    }

    /// Exclusive end of the window.
    pub fn end(&self) -> u64 {
        self.start + self.length
    }
}

/// All primes up to `limit`, in increasing order starting at 2.
///
/// Immutable after construction and freely shareable across threads;
/// certifies exact counts for any window ending at or below `limit²`.
#[derive(Debug, Clone)]
pub struct BasePrimeTable {
    limit: u64,
    primes: Vec<u32>,
}

impl BasePrimeTable {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    /// Largest window end this table can certify: `limit²`.
    pub fn certified_end(&self) -> u128 {
        self.limit as u128 * self.limit as u128
    }
}

/// Builds the table of all primes `≤ limit` with a classic sieve.
pub fn build_base_primes(limit: u64) -> Result<BasePrimeTable> {
    if limit < 2 {
        return Err(Error::InvalidArgument(format!(
            "base-prime limit must be ≥ 2, got {limit}"
        )));
    }
    if limit > u32::MAX as u64 {
        return Err(Error::InvalidArgument(format!(
            "base-prime limit {limit} exceeds supported maximum {}",
            u32::MAX
        )));
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut p = 2usize;
    while p * p <= n {
        if !composite[p] {
            let mut c = p * p;
            while c <= n {
                composite[c] = true;
                c += p;
            }
        }
        p += 1;
    }
    let primes: Vec<u32> = (2..=n)
        .filter(|&i| !composite[i])
        .map(|i| i as u32)
        .collect();
    Ok(BasePrimeTable { limit, primes })
}

/// Counts primes in `window` exactly.
///
/// Requires `table.limit² ≥ window end`; an insufficient table is an
/// error, never a silently wrong count.
pub fn count_primes(window: Window, table: &BasePrimeTable) -> Result<u64> {
    if window.length == 0 {
        return Ok(0);
    }
    let counts = count_tiled(window.start, window.length, 1, table)?;
    Ok(counts[0])
}

/// Counts primes in `m` contiguous windows of length `h` starting at
/// `first_start`, sieving the whole span `[first_start, first_start + m·h)`
/// once.
///
/// Equivalent to calling [`count_primes`] on each window (additivity of
/// half-open windows); one pass over the span keeps per-prime state across
/// segments instead of rebuilding it per window.
pub fn count_tiled(first_start: u64, h: u64, m: u64, table: &BasePrimeTable) -> Result<Vec<u64>> {
    if h == 0 || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "tiled count needs h ≥ 1 and m ≥ 1, got h={h}, m={m}"
        )));
    }
    let span = h
        .checked_mul(m)
        .ok_or_else(|| Error::InvalidArgument(format!("span m·h overflows: m={m}, h={h}")))?;
    let end = first_start.checked_add(span).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "span end overflows: start={first_start}, span={span}"
        ))
    })?;
    // Keeping ends below 2⁶³ lets the marking loop advance multiples
    // without overflow checks; far above the 10¹⁴ + 10¹⁰ working range.
    if end > (1u64 << 63) {
        return Err(Error::InvalidArgument(format!(
            "window end {end} exceeds the sieve bound 2^63"
        )));
    }
    if table.certified_end() < end as u128 {
        return Err(Error::InsufficientTable {
            limit: table.limit,
            window_end: end,
        });
    }

    let mut counts = vec![0u64; m as usize];
    let mut sieve = SpanSieve::new(first_start, end, table);
    while let Some(segment) = sieve.next_segment() {
        // Attribute the segment's surviving odd slots to the windows it
        // overlaps. Window k covers [first_start + k·h, first_start + (k+1)·h).
        let mut k = (segment.lo.saturating_sub(first_start)) / h;
        loop {
            let win_lo = first_start + k * h;
            let win_hi = win_lo + h;
            if win_lo >= segment.hi {
                break;
            }
            let lo = win_lo.max(segment.lo);
            let hi = win_hi.min(segment.hi);
            counts[k as usize] += segment.count_odd_primes(lo, hi);
            if win_hi >= segment.hi {
                break;
            }
            k += 1;
        }
    }

    // 2 is the one prime invisible to the odd-only bitmap.
    if first_start <= 2 && 2 < end {
        let k = (2 - first_start) / h;
        counts[k as usize] += 1;
    }
    Ok(counts)
}

/// One sieved segment: bit i of `words` is 1 iff `base + 2i` has no base
/// prime factor (i.e. is prime, given the table precondition), for odd
/// `base + 2i` within `[lo, hi)`.
struct Segment<'a> {
    lo: u64,
    hi: u64,
    base: u64,
    words: &'a [u64],
}

impl Segment<'_> {
    /// Counts surviving odd slots with values in `[lo, hi) ⊆ [self.lo, self.hi)`.
    fn count_odd_primes(&self, lo: u64, hi: u64) -> u64 {
        if hi <= lo {
            return 0;
        }
        // Index of the first odd ≥ lo and one past the last odd < hi.
        let first_odd = lo | 1;
        if first_odd >= hi {
            return 0;
        }
        let i0 = ((first_odd - self.base) / 2) as usize;
        let i1 = ((hi - self.base).div_ceil(2)) as usize;
        count_bits(self.words, i0, i1)
    }
}

/// Popcount of bits `[i0, i1)` of a bitmap.
fn count_bits(words: &[u64], i0: usize, i1: usize) -> u64 {
    if i0 >= i1 {
        return 0;
    }
    let (w0, b0) = (i0 / 64, i0 % 64);
    let (w1, b1) = (i1 / 64, i1 % 64);
    if w0 == w1 {
        let mask = (u64::MAX << b0) & (u64::MAX >> (64 - b1));
        return (words[w0] & mask).count_ones() as u64;
    }
    let mut total = (words[w0] & (u64::MAX << b0)).count_ones() as u64;
    for w in &words[w0 + 1..w1] {
        total += w.count_ones() as u64;
    }
    if b1 > 0 {
        total += (words[w1] & (u64::MAX >> (64 - b1))).count_ones() as u64;
    }
    total
}

/// Segment-at-a-time sieve over `[lo, hi)` keeping per-prime positions
/// across segments.
struct SpanSieve<'a> {
    hi: u64,
    /// Odd base primes that can mark within `[lo, hi)`, i.e. p² < hi.
    primes: &'a [u32],
    /// `next[j]`: smallest unmarked odd multiple of `primes[j]` not yet
    /// processed; always ≥ p² and ≥ the current segment start.
    next: Vec<u64>,
    seg_lo: u64,
    words: Vec<u64>,
}

impl<'a> SpanSieve<'a> {
    fn new(lo: u64, hi: u64, table: &'a BasePrimeTable) -> Self {
        // Keep only odd primes with p² < hi; larger ones never mark.
        let mut active = table.primes.len();
        for (j, &p) in table.primes.iter().enumerate() {
            if (p as u128) * (p as u128) >= hi as u128 {
                active = j;
                break;
            }
        }
        let primes = &table.primes[..active];
        let mut next = Vec::with_capacity(primes.len());
        for &p in primes {
            if p == 2 {
                next.push(u64::MAX); // multiples of 2 are not represented
                continue;
            }
            let p = p as u64;
            let mut mult = if lo <= p { p * p } else { lo.div_ceil(p) * p };
            if mult < p * p {
                mult = p * p;
            }
            if mult % 2 == 0 {
                mult += p;
            }
            next.push(mult);
        }
        SpanSieve {
            hi,
            primes,
            next,
            seg_lo: lo,
            words: vec![0u64; SEGMENT_ODDS / 64],
        }
    }

    fn next_segment(&mut self) -> Option<Segment<'_>> {
        if self.seg_lo >= self.hi {
            return None;
        }
        let seg_lo = self.seg_lo;
        let seg_hi = self.hi.min(seg_lo + (2 * SEGMENT_ODDS) as u64);
        self.seg_lo = seg_hi;

        let base = seg_lo | 1; // value of bit 0
        let n_odds = if base >= seg_hi {
            0
        } else {
            ((seg_hi - base).div_ceil(2)) as usize
        };
        let n_words = n_odds.div_ceil(64);
        for w in &mut self.words[..n_words] {
            *w = u64::MAX;
        }
        // Clear slack bits past the end so whole-word popcounts stay exact.
        if n_odds % 64 != 0 && n_words > 0 {
            self.words[n_words - 1] = u64::MAX >> (64 - n_odds % 64);
        }

        for (j, &p) in self.primes.iter().enumerate() {
            if p == 2 {
                continue;
            }
            let p = p as u64;
            let mut mult = self.next[j];
            if mult >= seg_hi {
                continue;
            }
            let step = 2 * p;
            let words = &mut self.words[..n_words];
            while mult < seg_hi {
                let idx = ((mult - base) / 2) as usize;
                words[idx / 64] &= !(1u64 << (idx % 64));
                mult += step;
            }
            self.next[j] = mult;
        }

        // 1 is not prime; it is never marked by any p ≥ 3.
        if base == 1 && n_odds > 0 {
            self.words[0] &= !1u64;
        }

        Some(Segment {
            lo: seg_lo,
            hi: seg_hi,
            base,
            words: &self.words[..n_words],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_prime_trial(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2u64;
        while d * d <= n {
            if n.is_multiple_of(d) {
                return false;
            }
            d += 1;
        }
        true
    }

    fn count_trial(start: u64, length: u64) -> u64 {
        (start..start + length)
            .filter(|&n| is_prime_trial(n))
            .count() as u64
    }

    #[test]
    fn base_primes_small() {
        let t = build_base_primes(10).unwrap();
        assert_eq!(t.primes(), &[2, 3, 5, 7]);
    }

    #[test]
    fn base_primes_hundred() {
        let t = build_base_primes(100).unwrap();
        let expected: Vec<u32> = (2..=100)
            .filter(|&n| is_prime_trial(n as u64))
            .map(|n| n as u32)
            .collect();
        assert_eq!(t.primes().len(), 25);
        assert_eq!(t.primes(), expected.as_slice());
    }

    #[test]
    fn base_primes_limit_below_two() {
        assert!(matches!(
            build_base_primes(1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            build_base_primes(0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn count_fourteen_sixteen_is_zero() {
        let t = build_base_primes(100).unwrap();
        let w = Window::new(14, 2).unwrap();
        assert_eq!(count_primes(w, &t).unwrap(), 0);
    }

    #[test]
    fn count_empty_window() {
        let t = build_base_primes(100).unwrap();
        let w = Window::new(0, 0).unwrap();
        assert_eq!(count_primes(w, &t).unwrap(), 0);
    }

    #[test]
    fn count_hundred_to_two_hundred() {
        let t = build_base_primes(100).unwrap();
        let w = Window::new(100, 100).unwrap();
        // Trial-division oracle over the window gives 21.
        assert_eq!(count_trial(100, 100), 21);
        assert_eq!(count_primes(w, &t).unwrap(), 21);
    }

    #[test]
    fn count_from_zero_includes_two() {
        let t = build_base_primes(100).unwrap();
        for end in [1u64, 2, 3, 4, 5, 30, 100] {
            let w = Window::new(0, end).unwrap();
            assert_eq!(
                count_primes(w, &t).unwrap(),
                count_trial(0, end),
                "end={end}"
            );
        }
    }

    #[test]
    fn count_matches_trial_division_everywhere_small() {
        let t = build_base_primes(1000).unwrap();
        for start in [0u64, 1, 2, 3, 10, 89, 97, 100, 113, 1000, 9973] {
            for len in [0u64, 1, 2, 3, 17, 100, 256] {
                let w = Window::new(start, len).unwrap();
                assert_eq!(
                    count_primes(w, &t).unwrap(),
                    count_trial(start, len),
                    "window [{start}, {})",
                    start + len
                );
            }
        }
    }

    #[test]
    fn insufficient_table_is_an_error() {
        let t = build_base_primes(10).unwrap();
        let w = Window::new(100, 10).unwrap();
        assert!(matches!(
            count_primes(w, &t),
            Err(Error::InsufficientTable { .. })
        ));
    }

    #[test]
    fn window_beyond_sieve_bound_is_an_error() {
        let t = build_base_primes(10).unwrap();
        let w = Window::new(u64::MAX - 10, 5).unwrap();
        assert!(matches!(
            count_primes(w, &t),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn count_spanning_many_segments() {
        // Span wider than one segment (2^20 integers per segment).
        let t = build_base_primes(2000).unwrap();
        let len = (2 * SEGMENT_ODDS as u64) * 2 + 12345;
        let w = Window::new(3, len).unwrap();
        let direct = count_primes(w, &t).unwrap();
        // π below ~2.1M via the table at higher limit as reference.
        let t2 = build_base_primes(3_000_000).unwrap();
        let reference = t2
            .primes()
            .iter()
            .filter(|&&p| (p as u64) >= 3 && (p as u64) < 3 + len)
            .count() as u64;
        assert_eq!(direct, reference);
    }

    #[test]
    fn tiled_equals_per_window() {
        let t = build_base_primes(1000).unwrap();
        let (start, h, m) = (90u64, 7u64, 23u64);
        let tiled = count_tiled(start, h, m, &t).unwrap();
        for (k, &c) in tiled.iter().enumerate() {
            let w = Window::new(start + k as u64 * h, h).unwrap();
            assert_eq!(c, count_primes(w, &t).unwrap(), "window {k}");
        }
    }

    #[test]
    fn additivity_of_adjacent_windows() {
        let t = build_base_primes(1000).unwrap();
        for (a, b, c) in [
            (0u64, 50u64, 120u64),
            (10, 10, 10),
            (89, 90, 997),
            (2, 3, 5),
        ] {
            let whole = count_primes(Window::new(a, c - a).unwrap(), &t).unwrap();
            let left = count_primes(Window::new(a, b - a).unwrap(), &t).unwrap();
            let right = count_primes(Window::new(b, c - b).unwrap(), &t).unwrap();
            assert_eq!(whole, left + right, "[{a},{b},{c})");
        }
    }
}
