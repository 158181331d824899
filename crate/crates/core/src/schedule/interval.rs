//! Half-open intervals on the periodic time wheel `[0, period)`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// `[start, start + len)` taken modulo the period. `start < period` and
/// `len <= period` always hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: u32,
    pub len: u32,
}

impl Interval {
    /// Builds an interval from a possibly negative or wrapped start time.
    pub fn wrapped(start: i64, len: u32, period: u32) -> Self {
        debug_assert!(len <= period);
        Self {
            start: start.rem_euclid(period as i64) as u32,
            len,
        }
    }

    /// End point before reduction modulo the period; may exceed the period.
    pub fn end_unwrapped(&self) -> u64 {
        self.start as u64 + self.len as u64
    }

    pub fn wraps(&self, period: u32) -> bool {
        self.end_unwrapped() > period as u64
    }

    /// The interval as one or two non-wrapping `[lo, hi)` pieces.
    pub fn segments(&self, period: u32) -> ([u32; 2], Option<[u32; 2]>) {
        let end = self.end_unwrapped();
        if end <= period as u64 {
            ([self.start, end as u32], None)
        } else {
            ([self.start, period], Some([0, (end - period as u64) as u32]))
        }
    }

    pub fn overlaps(&self, other: &Interval, period: u32) -> bool {
        if self.len == 0 || other.len == 0 {
            return false;
        }
        let p = period as u64;
        let d = (other.start as u64 + p - self.start as u64) % p;
        let e = (self.start as u64 + p - other.start as u64) % p;
        d < self.len as u64 || e < other.len as u64
    }

    /// Forward shift that moves an interval starting at `self.start` past the
    /// end of `blocking`.
    pub fn advance_past(&self, blocking: &Interval, period: u32) -> u32 {
        let p = period as u64;
        let end = blocking.end_unwrapped() % p;
        let d = (end + p - self.start as u64) % p;
        if d == 0 {
            period
        } else {
            d as u32
        }
    }

    /// Returns the interval grown by `before` and `after` on either side.
    pub fn padded(&self, before: u32, after: u32, period: u32) -> Self {
        let len = (self.len as u64 + before as u64 + after as u64).min(period as u64) as u32;
        Self::wrapped(self.start as i64 - before as i64, len, period)
    }

    pub fn contains(&self, t: u32, period: u32) -> bool {
        let p = period as u64;
        ((t as u64 + p - self.start as u64) % p) < self.len as u64
    }
}

/// Length of the union of periodic intervals.
pub fn union_length(intervals: impl IntoIterator<Item = Interval>, period: u32) -> u64 {
    let mut segs: Vec<[u32; 2]> = Vec::new();
    for iv in intervals {
        if iv.len == 0 {
            continue;
        }
        let (a, b) = iv.segments(period);
        segs.push(a);
        if let Some(b) = b {
            segs.push(b);
        }
    }
    segs.sort_unstable();
    let mut total = 0u64;
    let mut cur: Option<[u32; 2]> = None;
    for s in segs {
        match cur {
            Some(ref mut c) if s[0] <= c[1] => c[1] = c[1].max(s[1]),
            _ => {
                if let Some(c) = cur {
                    total += (c[1] - c[0]) as u64;
                }
                cur = Some(s);
            }
        }
    }
    if let Some(c) = cur {
        total += (c[1] - c[0]) as u64;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    const P: u32 = 1000;

    fn dense(iv: &Interval) -> Vec<bool> {
        let mut v = vec![false; P as usize];
        for k in 0..iv.len {
            v[((iv.start + k) % P) as usize] = true;
        }
        v
    }

    #[test]
    fn wrap_split() {
        let iv = Interval::wrapped(-50, 100, P);
        assert_eq!(iv.start, 950);
        assert_eq!(iv.segments(P), ([950, 1000], Some([0, 50])));
        assert!(iv.contains(10, P) && iv.contains(999, P) && !iv.contains(50, P));
    }

    #[test]
    fn advance_clears_block() {
        let a = Interval { start: 990, len: 20 };
        let b = Interval { start: 995, len: 15 };
        let adv = a.advance_past(&b, P);
        assert_eq!(adv, 20);
        let moved = Interval::wrapped(a.start as i64 + adv as i64, a.len, P);
        assert!(!moved.overlaps(&b, P));
    }

    proptest! {
        #[test]
        fn overlap_matches_dense(s1 in 0u32..P, l1 in 0u32..=P, s2 in 0u32..P, l2 in 0u32..=P) {
            let (a, b) = (Interval { start: s1, len: l1 }, Interval { start: s2, len: l2 });
            let (da, db) = (dense(&a), dense(&b));
            let expect = da.iter().zip(&db).any(|(x, y)| *x && *y);
            prop_assert_eq!(a.overlaps(&b, P), expect);
            prop_assert_eq!(b.overlaps(&a, P), expect);
        }

        #[test]
        fn union_matches_dense(ivs in proptest::collection::vec((0u32..P, 0u32..300), 0..20)) {
            let ivs: Vec<Interval> = ivs.into_iter().map(|(s, l)| Interval { start: s, len: l }).collect();
            let mut d = vec![false; P as usize];
            for iv in &ivs {
                for (k, x) in dense(iv).into_iter().enumerate() {
                    d[k] |= x;
                }
            }
            prop_assert_eq!(union_length(ivs.iter().copied(), P), d.iter().filter(|x| **x).count() as u64);
        }
    }
}
