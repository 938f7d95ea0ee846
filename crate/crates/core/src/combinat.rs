//! Sensor-subset enumeration in canonical (lexicographic) order.
//!
//! Subsets of `{1,…,q}` are ordered lexicographically on their sorted index
//! tuples, e.g. for q=4, m=2: {1,2},{1,3},{1,4},{2,3},{2,4},{3,4}. The
//! 1-based position of a subset in this sequence is its *ordinal* and is the
//! `j` in every candidate superscript `x^{(j)}` downstream.

use std::fmt;

use thiserror::Error;

/// Hard cap on sensor counts; keeps every binomial exact in `u64`.
pub const MAX_SENSORS: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CombinatError {
    #[error("sensor count {q} exceeds the supported maximum of {MAX_SENSORS}")]
    TooManySensors { q: usize },
    #[error("subset size {m} exceeds sensor count {q}")]
    SizeExceedsSensorCount { m: usize, q: usize },
    #[error("sensor index {index} is out of range 1..={q}")]
    IndexOutOfRange { index: usize, q: usize },
    #[error("sensor indices must be 1-based; got 0")]
    ZeroIndex,
    #[error("guarantee check requires s + tau <= q - 1 (got q={q}, s={s}, tau={tau})")]
    GuaranteeDomain { q: usize, s: usize, tau: usize },
}

/// A sorted, duplicate-free set of 1-based sensor indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SensorSet(Vec<usize>);

impl SensorSet {
    /// Builds a set from arbitrary 1-based indices; sorts and deduplicates.
    pub fn new(mut indices: Vec<usize>) -> Result<Self, CombinatError> {
        if indices.contains(&0) {
            return Err(CombinatError::ZeroIndex);
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(SensorSet(indices))
    }

    /// The empty set (no sensors deleted / attacked).
    pub fn empty() -> Self {
        SensorSet(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn is_subset_of(&self, other: &SensorSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Largest index in the set, if any.
    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }

    /// Checks that every index lies in `1..=q`.
    pub fn validate_for(&self, q: usize) -> Result<(), CombinatError> {
        match self.max() {
            Some(max) if max > q => Err(CombinatError::IndexOutOfRange { index: max, q }),
            _ => Ok(()),
        }
    }

    /// The indices of `{1,…,q}` not in this set, in increasing order.
    pub fn complement(&self, q: usize) -> SensorSet {
        SensorSet((1..=q).filter(|&i| !self.contains(i)).collect())
    }
}

impl fmt::Display for SensorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (pos, idx) in self.0.iter().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{idx}")?;
        }
        write!(f, "}}")
    }
}

impl From<SensorSet> for Vec<usize> {
    fn from(s: SensorSet) -> Vec<usize> {
        s.0
    }
}

/// A subset paired with its 1-based ordinal in the canonical enumeration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetIndex {
    pub ordinal: u64,
    pub set: SensorSet,
}

/// Exact binomial coefficient C(p, k).
///
/// Returns 0 when `k > p`; since C(p,k) ≥ 1 everywhere else, a zero result
/// unambiguously signals the out-of-range case. Exact for `p ≤ 32` (see
/// [`MAX_SENSORS`]); this crate never calls it with larger `p`.
pub fn choose(p: usize, k: usize) -> u64 {
    if k > p {
        return 0;
    }
    let k = k.min(p - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        // Multiply before dividing: acc * (p - i) is always divisible by i + 1
        // because the running product is a binomial coefficient.
        acc = acc * (p - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Lazy iterator over all size-`m` subsets of `{1,…,q}` in canonical order.
#[derive(Clone, Debug)]
pub struct Subsets {
    q: usize,
    next: Option<Vec<usize>>,
    ordinal: u64,
    total: u64,
}

impl Iterator for Subsets {
    type Item = SubsetIndex;

    fn next(&mut self) -> Option<SubsetIndex> {
        let current = self.next.take()?;
        self.ordinal += 1;
        let item = SubsetIndex {
            ordinal: self.ordinal,
            set: SensorSet(current.clone()),
        };
        self.next = advance(current, self.q);
        Some(item)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.total - self.ordinal) as usize;
        (left, Some(left))
    }
}

/// Steps a sorted index tuple to its lexicographic successor, or `None` at
/// the last subset.
fn advance(mut set: Vec<usize>, q: usize) -> Option<Vec<usize>> {
    let m = set.len();
    if m == 0 {
        return None;
    }
    // Find the rightmost index that can still be incremented.
    let mut i = m;
    while i > 0 {
        i -= 1;
        if set[i] < q - (m - 1 - i) {
            set[i] += 1;
            for j in i + 1..m {
                set[j] = set[j - 1] + 1;
            }
            return Some(set);
        }
    }
    None
}

/// Enumerates all size-`m` subsets of `{1,…,q}` lazily, ordinals `1…C(q,m)`.
pub fn enumerate_subsets(q: usize, m: usize) -> Result<Subsets, CombinatError> {
    if q > MAX_SENSORS {
        return Err(CombinatError::TooManySensors { q });
    }
    if m > q {
        return Err(CombinatError::SizeExceedsSensorCount { m, q });
    }
    Ok(Subsets {
        q,
        next: Some((1..=m).collect()),
        ordinal: 0,
        total: choose(q, m),
    })
}

/// Majority-cluster guarantee: with `C(q, s+τ)` candidate estimates of which
/// at least `C(q−s, τ)` equal the true state, a strict majority is certain
/// when `C(q, s+τ) < 2·C(q−s, τ)`; no adversary can then force a tie.
pub fn sesvs_guarantee_holds(q: usize, s: usize, tau: usize) -> Result<bool, CombinatError> {
    if q > MAX_SENSORS {
        return Err(CombinatError::TooManySensors { q });
    }
    if tau == 0 || s + tau > q.saturating_sub(1) {
        return Err(CombinatError::GuaranteeDomain { q, s, tau });
    }
    Ok(choose(q, s + tau) < 2 * choose(q - s, tau))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets(q: usize, m: usize) -> Vec<Vec<usize>> {
        enumerate_subsets(q, m)
            .unwrap()
            .map(|s| s.set.as_slice().to_vec())
            .collect()
    }

    #[test]
    fn four_choose_two_listing() {
        assert_eq!(
            sets(4, 2),
            vec![
                vec![1, 2],
                vec![1, 3],
                vec![1, 4],
                vec![2, 3],
                vec![2, 4],
                vec![3, 4]
            ]
        );
    }

    #[test]
    fn six_choose_five_prefix() {
        let s = sets(6, 5);
        assert_eq!(s[0], vec![1, 2, 3, 4, 5]);
        assert_eq!(s[1], vec![1, 2, 3, 4, 6]);
        assert_eq!(s[2], vec![1, 2, 3, 5, 6]);
        assert_eq!(s[3], vec![1, 2, 4, 5, 6]);
        assert_eq!(s[4], vec![1, 3, 4, 5, 6]);
        assert_eq!(s[5], vec![2, 3, 4, 5, 6]);
    }

    #[test]
    fn empty_subset_is_enumerated_once() {
        let s = sets(3, 0);
        assert_eq!(s, vec![Vec::<usize>::new()]);
    }

    #[test]
    fn ordinals_are_one_based_and_dense() {
        let subs: Vec<_> = enumerate_subsets(5, 3).unwrap().collect();
        assert_eq!(subs.len() as u64, choose(5, 3));
        for (i, s) in subs.iter().enumerate() {
            assert_eq!(s.ordinal, i as u64 + 1);
        }
    }

    #[test]
    fn size_exceeding_q_is_rejected() {
        assert_eq!(
            enumerate_subsets(3, 4).unwrap_err(),
            CombinatError::SizeExceedsSensorCount { m: 4, q: 3 }
        );
        assert!(matches!(
            enumerate_subsets(40, 2).unwrap_err(),
            CombinatError::TooManySensors { q: 40 }
        ));
    }

    #[test]
    fn choose_values() {
        assert_eq!(choose(6, 5), 6);
        assert_eq!(choose(7, 5), 21);
        assert_eq!(choose(9, 0), 1);
        assert_eq!(choose(0, 0), 1);
        assert_eq!(choose(3, 5), 0);
        assert_eq!(choose(32, 16), 601_080_390);
    }

    #[test]
    fn guarantee_examples() {
        assert_eq!(sesvs_guarantee_holds(3, 1, 1), Ok(true));
        assert_eq!(sesvs_guarantee_holds(6, 4, 1), Ok(false));
        assert_eq!(sesvs_guarantee_holds(7, 4, 1), Ok(false));
        // Degenerate domains are rejected, not answered.
        assert!(sesvs_guarantee_holds(6, 5, 1).is_err());
        assert!(sesvs_guarantee_holds(6, 4, 0).is_err());
    }

    #[test]
    fn sensor_set_normalizes() {
        let s = SensorSet::new(vec![4, 1, 4, 3]).unwrap();
        assert_eq!(s.as_slice(), &[1, 3, 4]);
        assert_eq!(s.to_string(), "{1,3,4}");
        assert_eq!(s.complement(6).as_slice(), &[2, 5, 6]);
        assert_eq!(SensorSet::new(vec![0, 2]), Err(CombinatError::ZeroIndex));
    }
}
