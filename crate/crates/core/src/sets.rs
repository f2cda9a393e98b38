//! Vertex sets, binomial coefficients and combinatorial-number-system ranking.
//!
//! A [`VertexSet`] is a strictly increasing list of 0-based indices. Ranks
//! follow the colex order: the rank of `{c_1 < c_2 < ... < c_k}` is
//! `sum_i C(c_i, i)`.

use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexSet(Vec<u32>);

impl VertexSet {
    pub fn empty() -> Self {
        VertexSet(Vec::new())
    }

    /// Builds a set from arbitrary indices, sorting them. Returns `None` on duplicates.
    pub fn new(mut items: Vec<u32>) -> Option<Self> {
        items.sort_unstable();
        if items.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        Some(VertexSet(items))
    }

    /// Wraps an already strictly increasing list.
    pub fn from_sorted(items: Vec<u32>) -> Self {
        debug_assert!(items.windows(2).all(|w| w[0] < w[1]));
        VertexSet(items)
    }

    pub fn singleton(v: u32) -> Self {
        VertexSet(vec![v])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, v: u32) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn last(&self) -> Option<u32> {
        self.0.last().copied()
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() {
            if j == b.len() {
                return false;
            }
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Less => return false,
            }
        }
        true
    }

    pub fn intersection_len(&self, other: &VertexSet) -> usize {
        let (mut i, mut j, mut count) = (0, 0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Equal => {
                    count += 1;
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
            }
        }
        count
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        self.intersection_len(other) == 0
    }

    pub fn symmetric_difference(&self, other: &VertexSet) -> VertexSet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        VertexSet(out)
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        let mut out: Vec<u32> = self.0.iter().chain(other.0.iter()).copied().collect();
        out.sort_unstable();
        out.dedup();
        VertexSet(out)
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        VertexSet(self.0.iter().copied().filter(|v| !other.contains(*v)).collect())
    }

    /// Bit mask of the members; all members must be below 64.
    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0u64, |m, &v| m | (1u64 << v))
    }

    /// Same set with every index shifted by `+1`, for 1-based files.
    pub fn to_one_based(&self) -> Vec<u32> {
        self.0.iter().map(|v| v + 1).collect()
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.0
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.iter()).finish()
    }
}

impl From<&[u32]> for VertexSet {
    fn from(items: &[u32]) -> Self {
        VertexSet::new(items.to_vec()).expect("duplicate vertex")
    }
}

impl<const N: usize> From<[u32; N]> for VertexSet {
    fn from(items: [u32; N]) -> Self {
        VertexSet::new(items.to_vec()).expect("duplicate vertex")
    }
}

pub fn symmetric_difference(s: &VertexSet, t: &VertexSet) -> VertexSet {
    s.symmetric_difference(t)
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Binomial coefficient in `u64`, `None` on overflow.
pub fn binomial_u64(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Table of `C(a, b)` for `a <= max_n`, `b <= max_k`, saturating at `u64::MAX`.
#[derive(Clone, Debug)]
pub struct BinomialTable {
    max_k: usize,
    rows: Vec<u64>,
}

impl BinomialTable {
    pub fn new(max_n: usize, max_k: usize) -> Self {
        let width = max_k + 1;
        let mut rows = vec![0u64; (max_n + 1) * width];
        for a in 0..=max_n {
            rows[a * width] = 1;
            for b in 1..=max_k.min(a) {
                let left = rows[(a - 1) * width + b - 1];
                let up = if b < a { rows[(a - 1) * width + b] } else { 0 };
                rows[a * width + b] = left.saturating_add(up);
            }
        }
        BinomialTable { max_k, rows }
    }

    pub fn get(&self, n: usize, k: usize) -> u64 {
        if k > n || k > self.max_k {
            return 0;
        }
        self.rows[n * (self.max_k + 1) + k]
    }
}

/// Colex rank of a sorted subset.
pub fn rank_subset(set: &[u32], table: &BinomialTable) -> u64 {
    set.iter()
        .enumerate()
        .map(|(i, &c)| table.get(c as usize, i + 1))
        .sum()
}

/// Inverse of [`rank_subset`] for a `k`-subset of `[0, n)`.
pub fn unrank_subset(mut rank: u64, n: usize, k: usize, table: &BinomialTable) -> Vec<u32> {
    let mut out = vec![0u32; k];
    let mut upper = n;
    for i in (1..=k).rev() {
        // largest c < upper with C(c, i) <= rank
        let mut c = upper - 1;
        while table.get(c, i) > rank {
            c -= 1;
        }
        out[i - 1] = c as u32;
        rank -= table.get(c, i);
        upper = c;
    }
    out
}

/// Lexicographic iterator over the `k`-subsets of a sorted pool.
#[derive(Clone, Debug)]
pub struct Combinations {
    pool: Vec<u32>,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(pool: Vec<u32>, k: usize) -> Self {
        let done = k > pool.len();
        Combinations {
            pool,
            idx: (0..k).collect(),
            done,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        if self.done {
            return None;
        }
        let item = self.idx.iter().map(|&i| self.pool[i]).collect();
        let k = self.idx.len();
        let n = self.pool.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(item)
    }
}

pub fn combinations(pool: &[u32], k: usize) -> Combinations {
    Combinations::new(pool.to_vec(), k)
}

/// All `k`-subsets of `[0, n)` in lexicographic order.
pub fn subsets_of_range(n: usize, k: usize) -> impl Iterator<Item = VertexSet> {
    Combinations::new((0..n as u32).collect(), k).map(VertexSet::from_sorted)
}
