//! Kikuchi graphs over set-indexed vertex spaces.
//!
//! Four variants are built, each as a label-sorted edge list:
//!
//! * `BasicEven`: vertices are `ell`-subsets, `S ~ T` iff `S (+) T = C`, `|C|` even.
//! * `NaiveOdd`: left `ell`-subsets, right `(ell+1)`-subsets, `S (+) T = C`.
//! * `RegularCs`: vertices are pairs `(S_1, S_2)` of `ell`-subsets; the edge
//!   set of a label `(i, j, u, C_1, C_2)` is `S_1 (+) T_1 = C_1`, `S_2 (+) T_2 = C_2`.
//! * `Bipartite`: left `(S_1, S_2)` with `S_1` an `ell`-subset of `[n]` and
//!   `S_2` an `ell`-subset of the label registry, right `(T_1, T_2)` with sizes
//!   `ell+1-s` and `ell+1`; the edge set of `(C, p)` is `S_1 (+) T_1 = C`,
//!   `|S_1 /\ C| = (q-1)/2` and `S_2 (+) T_2 = {p}`.
//!
//! Vertices are stored as ranks: each component is ranked in the
//! combinatorial number system and the components are combined mixed-radix.
//! For every label, the quadratic form of the lifted assignment equals the
//! per-label edge count `D` times the label's monomial.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{BipartiteXorInstance, XorInstance};
use crate::sets::{binomial, combinations, rank_subset, unrank_subset, BinomialTable, VertexSet};
use crate::spectral::CsrMatrix;

/// Spaces whose implied dense matrix has at most this many entries may be
/// materialized as dense vectors.
pub const DENSE_ENTRY_LIMIT: u64 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    BasicEven,
    NaiveOdd,
    RegularCs,
    Bipartite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ground {
    /// Subsets of the original variables `[n]`.
    Vertices,
    /// Subsets of the heavy-set label registry.
    Labels,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceComponent {
    pub ground: Ground,
    pub ground_size: usize,
    pub subset_size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexSpace {
    pub components: Vec<SpaceComponent>,
}

impl VertexSpace {
    pub fn new(components: Vec<SpaceComponent>) -> Self {
        VertexSpace { components }
    }

    fn single(ground: Ground, ground_size: usize, subset_size: usize) -> Self {
        VertexSpace::new(vec![SpaceComponent {
            ground,
            ground_size,
            subset_size,
        }])
    }

    /// Exact number of vertices, the product of the component binomials.
    pub fn cardinality(&self) -> BigUint {
        self.components
            .iter()
            .map(|c| binomial(c.ground_size as u64, c.subset_size as u64))
            .product()
    }

    pub fn cardinality_u64(&self) -> Option<u64> {
        self.cardinality().to_u64()
    }

    pub fn ranker(&self) -> Result<Ranker> {
        let max_n = self.components.iter().map(|c| c.ground_size).max().unwrap_or(0);
        let max_k = self.components.iter().map(|c| c.subset_size).max().unwrap_or(0);
        let table = BinomialTable::new(max_n, max_k);
        let mut radices = Vec::with_capacity(self.components.len());
        for c in &self.components {
            radices.push(
                crate::sets::binomial_u64(c.ground_size as u64, c.subset_size as u64)
                    .ok_or(Error::RankOverflow)?,
            );
        }
        radices
            .iter()
            .try_fold(1u64, |acc, &r| acc.checked_mul(r.max(1)))
            .ok_or(Error::RankOverflow)?;
        Ok(Ranker {
            components: self.components.clone(),
            radices,
            table,
        })
    }
}

/// Mixed-radix ranking of subset tuples.
#[derive(Clone, Debug)]
pub struct Ranker {
    components: Vec<SpaceComponent>,
    radices: Vec<u64>,
    table: BinomialTable,
}

impl Ranker {
    pub fn rank(&self, parts: &[&VertexSet]) -> u64 {
        debug_assert_eq!(parts.len(), self.components.len());
        let mut rank = 0u64;
        let mut scale = 1u64;
        for (j, part) in parts.iter().enumerate() {
            debug_assert_eq!(part.len(), self.components[j].subset_size);
            rank += rank_subset(part.as_slice(), &self.table) * scale;
            scale *= self.radices[j];
        }
        rank
    }

    pub fn unrank(&self, mut rank: u64) -> Vec<VertexSet> {
        self.components
            .iter()
            .zip(&self.radices)
            .map(|(c, &radix)| {
                let r = if radix == 0 { 0 } else { rank % radix };
                rank = if radix == 0 { 0 } else { rank / radix };
                VertexSet::from_sorted(unrank_subset(r, c.ground_size, c.subset_size, &self.table))
            })
            .collect()
    }

    pub fn components(&self) -> &[SpaceComponent] {
        &self.components
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelKind {
    /// A single constraint `C` of `H_i` (basic even and naive odd variants).
    Constraint { i: usize, edge: VertexSet },
    /// A Cauchy–Schwarz pair: `(u, C_1) in H_i`, `(u, C_2) in H_j`.
    Paired {
        i: usize,
        j: usize,
        u: u32,
        c1: VertexSet,
        c2: VertexSet,
    },
    /// A bipartite constraint `(C, p)` of `H_i^(s)`.
    Bipartite { i: usize, left: VertexSet, p: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeLabel {
    /// Rademacher group the label belongs to (the message index `i`).
    pub group: usize,
    #[serde(flatten)]
    pub kind: LabelKind,
}

impl EdgeLabel {
    pub fn sign(&self, b: &[i8]) -> i8 {
        match &self.kind {
            LabelKind::Constraint { i, .. } | LabelKind::Bipartite { i, .. } => b[*i],
            LabelKind::Paired { i, j, .. } => b[*i] * b[*j],
        }
    }

    /// Unsigned monomial of the label under `(x, y)`.
    pub fn monomial(&self, x: &[i8], y: Option<&[i8]>) -> i64 {
        let prod = |set: &VertexSet| set.iter().fold(1i64, |a, v| a * x[v as usize] as i64);
        match &self.kind {
            LabelKind::Constraint { edge, .. } => prod(edge),
            LabelKind::Paired { c1, c2, .. } => prod(c1) * prod(c2),
            LabelKind::Bipartite { left, p, .. } => {
                prod(left) * y.expect("bipartite monomial needs y")[*p] as i64
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub left: u64,
    pub right: u64,
    pub label: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KikuchiGraph {
    pub variant: Variant,
    pub ell: usize,
    pub q: usize,
    pub left: VertexSpace,
    pub right: VertexSpace,
    pub labels: Vec<EdgeLabel>,
    /// Edges sorted by label, then by `(left, right)`.
    pub edges: Vec<Edge>,
    /// `edges[label_offsets[l]..label_offsets[l+1]]` are the edges of label `l`.
    pub label_offsets: Vec<usize>,
    /// Closed-form per-label edge count `D`.
    pub per_label: BigUint,
    pub symmetric: bool,
    pub num_groups: usize,
}

/// Per-constraint `(S, T)` pairs with `S = A u R`, `T = (C \ A) u R`, where
/// `A` ranges over `half`-subsets of `C` and `R` over `(ell - half)`-subsets of `[n] \ C`.
fn split_pairs(c: &VertexSet, half: usize, n: usize, ell: usize) -> Vec<(VertexSet, VertexSet)> {
    if half > c.len() || ell < half {
        return Vec::new();
    }
    let outside: Vec<u32> = (0..n as u32).filter(|v| !c.contains(*v)).collect();
    let rest: Vec<Vec<u32>> = combinations(&outside, ell - half).collect();
    let mut out = Vec::new();
    for a in combinations(c.as_slice(), half) {
        let a = VertexSet::from_sorted(a);
        let ca = c.difference(&a);
        for r in &rest {
            let r = VertexSet::from_sorted(r.clone());
            out.push((a.union(&r), ca.union(&r)));
        }
    }
    out
}

fn check_ell(ell: usize, min: usize, what: &str) -> Result<()> {
    if ell < min {
        return Err(Error::InvalidParameters(format!(
            "{what} needs ell >= {min}, got ell = {ell}"
        )));
    }
    Ok(())
}

pub fn basic_even_spaces(n: usize, ell: usize) -> (VertexSpace, VertexSpace) {
    let s = VertexSpace::single(Ground::Vertices, n, ell);
    (s.clone(), s)
}

pub fn naive_odd_spaces(n: usize, ell: usize) -> (VertexSpace, VertexSpace) {
    (
        VertexSpace::single(Ground::Vertices, n, ell),
        VertexSpace::single(Ground::Vertices, n, ell + 1),
    )
}

pub fn regular_cs_spaces(n: usize, ell: usize) -> (VertexSpace, VertexSpace) {
    let comp = SpaceComponent {
        ground: Ground::Vertices,
        ground_size: n,
        subset_size: ell,
    };
    let s = VertexSpace::new(vec![comp, comp]);
    (s.clone(), s)
}

pub fn bipartite_spaces(n: usize, ell: usize, s: usize, num_labels: usize) -> (VertexSpace, VertexSpace) {
    let left = VertexSpace::new(vec![
        SpaceComponent {
            ground: Ground::Vertices,
            ground_size: n,
            subset_size: ell,
        },
        SpaceComponent {
            ground: Ground::Labels,
            ground_size: num_labels,
            subset_size: ell,
        },
    ]);
    let right = VertexSpace::new(vec![
        SpaceComponent {
            ground: Ground::Vertices,
            ground_size: n,
            subset_size: (ell + 1).saturating_sub(s),
        },
        SpaceComponent {
            ground: Ground::Labels,
            ground_size: num_labels,
            subset_size: ell + 1,
        },
    ]);
    (left, right)
}

fn sub(a: usize, b: usize) -> Option<u64> {
    a.checked_sub(b).map(|v| v as u64)
}

fn binom_or_zero(n: Option<u64>, k: Option<u64>) -> BigUint {
    match (n, k) {
        (Some(n), Some(k)) => binomial(n, k),
        _ => BigUint::zero(),
    }
}

/// `C(q, q/2) C(n-q, ell-q/2)`.
pub fn d_basic_even(q: usize, n: usize, ell: usize) -> BigUint {
    binomial(q as u64, (q / 2) as u64) * binom_or_zero(sub(n, q), sub(ell, q / 2))
}

/// `C(q, (q-1)/2) C(n-q, ell-(q-1)/2)`.
pub fn d_naive_odd(q: usize, n: usize, ell: usize) -> BigUint {
    let h = (q - 1) / 2;
    binomial(q as u64, h as u64) * binom_or_zero(sub(n, q), sub(ell, h))
}

/// `C(q-1, (q-1)/2)^2 C(n-(q-1), ell-(q-1)/2)^2`.
pub fn d_regular_cs(q: usize, n: usize, ell: usize) -> BigUint {
    let h = (q - 1) / 2;
    let one = binomial((q - 1) as u64, h as u64) * binom_or_zero(sub(n, q - 1), sub(ell, h));
    &one * &one
}

/// `C(q-s, (q-1)/2) C(n-(q-s), ell-(q-1)/2) C(|P_s|-1, ell)`.
pub fn d_bipartite(q: usize, s: usize, n: usize, ell: usize, num_labels: usize) -> BigUint {
    let h = (q - 1) / 2;
    let width = q.saturating_sub(s);
    binom_or_zero(Some(width as u64), Some(h as u64))
        * binom_or_zero(sub(n, width), sub(ell, h))
        * binom_or_zero(sub(num_labels, 1), Some(ell as u64))
}

/// Edges of the basic even-arity Kikuchi graph of one constraint, as ranked pairs.
pub fn build_basic_even(c: &VertexSet, n: usize, ell: usize) -> Result<Vec<(u64, u64)>> {
    let q = c.len();
    if q % 2 == 1 {
        return Err(Error::InvalidParameters(
            "the basic Kikuchi graph has no edges for odd |C|".into(),
        ));
    }
    check_ell(ell, q / 2, "basic_even")?;
    let (l, _) = basic_even_spaces(n, ell);
    let ranker = l.ranker()?;
    let mut edges: Vec<(u64, u64)> = split_pairs(c, q / 2, n, ell)
        .iter()
        .map(|(s, t)| (ranker.rank(&[s]), ranker.rank(&[t])))
        .collect();
    edges.sort_unstable();
    Ok(edges)
}

/// Edges of the naive imbalanced graph: `|S| = ell`, `|T| = ell + 1`, `S (+) T = C`.
pub fn build_naive_odd(c: &VertexSet, n: usize, ell: usize) -> Result<Vec<(u64, u64)>> {
    let q = c.len();
    if q.is_multiple_of(2) {
        return Err(Error::InvalidParameters("naive_odd needs odd |C|".into()));
    }
    check_ell(ell, (q - 1) / 2, "naive_odd")?;
    let (l, r) = naive_odd_spaces(n, ell);
    let (lr, rr) = (l.ranker()?, r.ranker()?);
    let mut edges: Vec<(u64, u64)> = split_pairs(c, (q - 1) / 2, n, ell)
        .iter()
        .map(|(s, t)| (lr.rank(&[s]), rr.rank(&[t])))
        .collect();
    edges.sort_unstable();
    Ok(edges)
}

/// Edges for one Cauchy–Schwarz label `(u, C_1, C_2)` with `|C_1| = |C_2| = q - 1`.
pub fn build_regular_cs(c1: &VertexSet, c2: &VertexSet, n: usize, ell: usize) -> Result<Vec<(u64, u64)>> {
    if c1.len() != c2.len() || c1.len() % 2 == 1 {
        return Err(Error::InvalidParameters(
            "regular_cs needs |C_1| = |C_2| even".into(),
        ));
    }
    let h = c1.len() / 2;
    check_ell(ell, h, "regular_cs")?;
    let (space, _) = regular_cs_spaces(n, ell);
    let ranker = space.ranker()?;
    let first = split_pairs(c1, h, n, ell);
    let second = split_pairs(c2, h, n, ell);
    let mut edges = Vec::with_capacity(first.len() * second.len());
    for (s1, t1) in &first {
        for (s2, t2) in &second {
            edges.push((ranker.rank(&[s1, s2]), ranker.rank(&[t1, t2])));
        }
    }
    edges.sort_unstable();
    Ok(edges)
}

/// Edges for one bipartite constraint `(C, p)` with `|C| = q - s`.
pub fn build_bipartite(
    c: &VertexSet,
    p: usize,
    q: usize,
    s: usize,
    n: usize,
    ell: usize,
    num_labels: usize,
) -> Result<Vec<(u64, u64)>> {
    if num_labels == 0 || p >= num_labels {
        return Err(Error::UnknownLabel {
            label: p,
            len: num_labels,
        });
    }
    if c.len() + s != q {
        return Err(Error::InvalidParameters(format!(
            "bipartite constraint has |C| = {}, expected q - s = {}",
            c.len(),
            q - s
        )));
    }
    let h = (q - 1) / 2;
    check_ell(ell, h, "bipartite")?;
    let (l, r) = bipartite_spaces(n, ell, s, num_labels);
    let (lr, rr) = (l.ranker()?, r.ranker()?);
    // |S_1 /\ C| = (q-1)/2 forces |T_1 /\ C| = q - s - (q-1)/2 = (q+1)/2 - s
    let first = split_pairs(c, h, n, ell);
    let others: Vec<u32> = (0..num_labels as u32).filter(|&o| o as usize != p).collect();
    let p_set = VertexSet::singleton(p as u32);
    let mut edges = Vec::new();
    for s2 in combinations(&others, ell) {
        let s2 = VertexSet::from_sorted(s2);
        let t2 = s2.union(&p_set);
        for (s1, t1) in &first {
            edges.push((lr.rank(&[s1, &s2]), rr.rank(&[t1, &t2])));
        }
    }
    edges.sort_unstable();
    Ok(edges)
}

fn finish_graph(
    variant: Variant,
    ell: usize,
    q: usize,
    spaces: (VertexSpace, VertexSpace),
    labels: Vec<EdgeLabel>,
    per_label_edges: Vec<Vec<(u64, u64)>>,
    per_label: BigUint,
    num_groups: usize,
) -> KikuchiGraph {
    let mut label_offsets = Vec::with_capacity(labels.len() + 1);
    label_offsets.push(0);
    let total: usize = per_label_edges.iter().map(Vec::len).sum();
    let mut edges = Vec::with_capacity(total);
    for (l, es) in per_label_edges.into_iter().enumerate() {
        edges.extend(es.into_iter().map(|(left, right)| Edge {
            left,
            right,
            label: l as u32,
        }));
        label_offsets.push(edges.len());
    }
    KikuchiGraph {
        variant,
        ell,
        q,
        left: spaces.0,
        right: spaces.1,
        labels,
        edges,
        label_offsets,
        per_label,
        symmetric: matches!(variant, Variant::BasicEven | Variant::RegularCs),
        num_groups,
    }
}

/// Basic even-arity graph of a whole instance, one label per constraint.
pub fn assemble_basic_even(inst: &XorInstance, ell: usize) -> Result<KikuchiGraph> {
    if inst.q % 2 == 1 {
        return Err(Error::InvalidParameters("basic_even needs even q".into()));
    }
    let labels = constraint_labels(inst);
    let per_label_edges = labels
        .par_iter()
        .map(|l| match &l.kind {
            LabelKind::Constraint { edge, .. } => build_basic_even(edge, inst.n, ell),
            _ => unreachable!(),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish_graph(
        Variant::BasicEven,
        ell,
        inst.q,
        basic_even_spaces(inst.n, ell),
        labels,
        per_label_edges,
        d_basic_even(inst.q, inst.n, ell),
        inst.k(),
    ))
}

/// Naive imbalanced odd-arity graph of a whole instance.
pub fn assemble_naive_odd(inst: &XorInstance, ell: usize) -> Result<KikuchiGraph> {
    let labels = constraint_labels(inst);
    let per_label_edges = labels
        .par_iter()
        .map(|l| match &l.kind {
            LabelKind::Constraint { edge, .. } => build_naive_odd(edge, inst.n, ell),
            _ => unreachable!(),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish_graph(
        Variant::NaiveOdd,
        ell,
        inst.q,
        naive_odd_spaces(inst.n, ell),
        labels,
        per_label_edges,
        d_naive_odd(inst.q, inst.n, ell),
        inst.k(),
    ))
}

fn constraint_labels(inst: &XorInstance) -> Vec<EdgeLabel> {
    inst.hypergraphs
        .iter()
        .enumerate()
        .flat_map(|(i, h)| {
            h.iter().map(move |c| EdgeLabel {
                group: i,
                kind: LabelKind::Constraint { i, edge: c.clone() },
            })
        })
        .collect()
}

/// Regular Cauchy–Schwarz graph from a list of `Paired` labels.
pub fn assemble_regular_cs(
    n: usize,
    q: usize,
    k: usize,
    labels: Vec<EdgeLabel>,
    ell: usize,
) -> Result<KikuchiGraph> {
    let per_label_edges = labels
        .par_iter()
        .map(|l| match &l.kind {
            LabelKind::Paired { c1, c2, .. } => build_regular_cs(c1, c2, n, ell),
            _ => Err(Error::InvalidParameters("regular_cs takes paired labels".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish_graph(
        Variant::RegularCs,
        ell,
        q,
        regular_cs_spaces(n, ell),
        labels,
        per_label_edges,
        d_regular_cs(q, n, ell),
        k,
    ))
}

/// Imbalanced bipartite graph of a decomposed piece; groups are the message indices.
pub fn assemble_bipartite(piece: &BipartiteXorInstance, ell: usize) -> Result<KikuchiGraph> {
    let labels: Vec<EdgeLabel> = piece
        .hypergraphs
        .iter()
        .enumerate()
        .flat_map(|(i, h)| {
            h.iter().map(move |e| EdgeLabel {
                group: i,
                kind: LabelKind::Bipartite {
                    i,
                    left: e.left.clone(),
                    p: e.label,
                },
            })
        })
        .collect();
    let per_label_edges = labels
        .par_iter()
        .map(|l| match &l.kind {
            LabelKind::Bipartite { left, p, .. } => build_bipartite(
                left,
                *p,
                piece.q,
                piece.s,
                piece.n,
                ell,
                piece.num_labels(),
            ),
            _ => unreachable!(),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish_graph(
        Variant::Bipartite,
        ell,
        piece.q,
        bipartite_spaces(piece.n, ell, piece.s, piece.num_labels()),
        labels,
        per_label_edges,
        d_bipartite(piece.q, piece.s, piece.n, ell, piece.num_labels()),
        piece.k(),
    ))
}

/// Product of assignment entries over every set in a vertex tuple.
pub fn lift_assignment(parts: &[VertexSet], components: &[SpaceComponent], x: &[i8], y: Option<&[i8]>) -> i8 {
    parts
        .iter()
        .zip(components)
        .fold(1i8, |acc, (set, comp)| {
            let values = match comp.ground {
                Ground::Vertices => x,
                Ground::Labels => y.expect("label component needs y"),
            };
            set.iter().fold(acc, |a, v| a * values[v as usize])
        })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadraticForm {
    /// `sum over edges of sign(label) * lift(left) * lift(right)`.
    pub total: i64,
    /// Unsigned per-label sums.
    pub per_label: Vec<i64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Apply {
    /// `A v`: input on the right space, output on the left.
    Forward,
    /// `A^T v`: input on the left space, output on the right.
    Transpose,
}

impl KikuchiGraph {
    /// Same graph metadata with no edges.
    pub fn clone_without_edges(&self) -> KikuchiGraph {
        KikuchiGraph {
            variant: self.variant,
            ell: self.ell,
            q: self.q,
            left: self.left.clone(),
            right: self.right.clone(),
            labels: self.labels.clone(),
            edges: Vec::new(),
            label_offsets: vec![0; self.labels.len() + 1],
            per_label: self.per_label.clone(),
            symmetric: self.symmetric,
            num_groups: self.num_groups,
        }
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn label_edges(&self, label: usize) -> &[Edge] {
        &self.edges[self.label_offsets[label]..self.label_offsets[label + 1]]
    }

    pub fn label_count(&self, label: usize) -> usize {
        self.label_offsets[label + 1] - self.label_offsets[label]
    }

    pub fn label_signs(&self, b: &[i8]) -> Vec<f64> {
        self.labels.iter().map(|l| l.sign(b) as f64).collect()
    }

    /// `N_L * N_R`, the number of entries of the dense matrix.
    pub fn dense_entries(&self) -> BigUint {
        self.left.cardinality() * self.right.cardinality()
    }

    /// Re-checks the defining predicate of every stored edge.
    pub fn verify_edges(&self, s: usize) -> Result<()> {
        let (lr, rr) = (self.left.ranker()?, self.right.ranker()?);
        let half = (self.q.saturating_sub(1)) / 2;
        for (l, label) in self.labels.iter().enumerate() {
            for e in self.label_edges(l) {
                let (sv, tv) = (lr.unrank(e.left), rr.unrank(e.right));
                let ok = match (&label.kind, self.variant) {
                    (LabelKind::Constraint { edge, .. }, Variant::BasicEven | Variant::NaiveOdd) => {
                        sv[0].symmetric_difference(&tv[0]) == *edge
                    }
                    (LabelKind::Paired { c1, c2, .. }, Variant::RegularCs) => {
                        sv[0].symmetric_difference(&tv[0]) == *c1 && sv[1].symmetric_difference(&tv[1]) == *c2
                    }
                    (LabelKind::Bipartite { left, p, .. }, Variant::Bipartite) => {
                        let _ = s;
                        sv[0].symmetric_difference(&tv[0]) == *left
                            && sv[0].intersection_len(left) == half
                            && sv[1].symmetric_difference(&tv[1]) == VertexSet::singleton(*p as u32)
                    }
                    _ => false,
                };
                if !ok {
                    return Err(Error::InvalidInstance(format!(
                        "edge {e:?} violates the predicate of label {l}"
                    )));
                }
                if self.symmetric && e.left == e.right {
                    return Err(Error::InvalidInstance(format!("self-loop at label {l}")));
                }
            }
        }
        Ok(())
    }

    /// Exact quadratic form `z^T A w` of lifted assignments.
    pub fn quadratic_form(&self, b: &[i8], x: &[i8], y: Option<&[i8]>) -> Result<QuadraticForm> {
        let (lr, rr) = (self.left.ranker()?, self.right.ranker()?);
        let mut left_cache: HashMap<u64, i8> = HashMap::new();
        let mut right_cache: HashMap<u64, i8> = HashMap::new();
        let mut per_label = vec![0i64; self.labels.len()];
        let mut total = 0i64;
        for (l, label) in self.labels.iter().enumerate() {
            let sign = label.sign(b) as i64;
            let mut acc = 0i64;
            for e in self.label_edges(l) {
                let zl = *left_cache
                    .entry(e.left)
                    .or_insert_with(|| lift_assignment(&lr.unrank(e.left), lr.components(), x, y));
                let zr = *right_cache
                    .entry(e.right)
                    .or_insert_with(|| lift_assignment(&rr.unrank(e.right), rr.components(), x, y));
                acc += (zl * zr) as i64;
            }
            per_label[l] = acc;
            total += sign * acc;
        }
        Ok(QuadraticForm { total, per_label })
    }

    /// Dense `A v` or `A^T v` with signs from `b`, streaming edges.
    pub fn matvec(&self, b: &[i8], v: &[f64], apply: Apply) -> Result<Vec<f64>> {
        if self.dense_entries() > BigUint::from(DENSE_ENTRY_LIMIT) {
            return Err(Error::InvalidParameters(
                "dense matvec refused: use matvec_sparse".into(),
            ));
        }
        let (nl, nr) = (
            self.left.cardinality_u64().ok_or(Error::RankOverflow)? as usize,
            self.right.cardinality_u64().ok_or(Error::RankOverflow)? as usize,
        );
        let (n_in, n_out) = match apply {
            Apply::Forward => (nr, nl),
            Apply::Transpose => (nl, nr),
        };
        if v.len() != n_in {
            return Err(Error::Dimension {
                what: "matvec input",
                got: v.len(),
                expected: n_in,
            });
        }
        let signs = self.label_signs(b);
        let mut out = vec![0.0; n_out];
        for e in &self.edges {
            let w = signs[e.label as usize];
            match apply {
                Apply::Forward => out[e.left as usize] += w * v[e.right as usize],
                Apply::Transpose => out[e.right as usize] += w * v[e.left as usize],
            }
        }
        Ok(out)
    }

    /// Matrix-free `A v` on a sparse input, touching only edges at the support.
    pub fn matvec_sparse(&self, b: &[i8], v: &HashMap<u64, f64>, apply: Apply) -> HashMap<u64, f64> {
        let signs = self.label_signs(b);
        let mut index: HashMap<u64, Vec<usize>> = HashMap::new();
        for (idx, e) in self.edges.iter().enumerate() {
            let key = match apply {
                Apply::Forward => e.right,
                Apply::Transpose => e.left,
            };
            if v.contains_key(&key) {
                index.entry(key).or_default().push(idx);
            }
        }
        let mut out = HashMap::new();
        for (key, ids) in index {
            let val = v[&key];
            for idx in ids {
                let e = self.edges[idx];
                let target = match apply {
                    Apply::Forward => e.left,
                    Apply::Transpose => e.right,
                };
                *out.entry(target).or_insert(0.0) += signs[e.label as usize] * val;
            }
        }
        out
    }

    /// Compressed sparse view over the vertices actually touched by edges.
    pub fn compress(&self) -> CompressedGraph {
        CompressedGraph::new(self)
    }
}

/// A CSR pattern over touched vertices, reusable across sign vectors.
#[derive(Clone, Debug)]
pub struct CompressedGraph {
    pub rows: Vec<u64>,
    pub cols: Vec<u64>,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    /// `(position in CSR, label)` for every edge.
    contributions: Vec<(u32, u32)>,
    label_groups: Vec<usize>,
    num_groups: usize,
}

impl CompressedGraph {
    fn new(g: &KikuchiGraph) -> Self {
        let mut rows: Vec<u64> = g.edges.iter().map(|e| e.left).collect();
        rows.sort_unstable();
        rows.dedup();
        let mut cols: Vec<u64> = g.edges.iter().map(|e| e.right).collect();
        cols.sort_unstable();
        cols.dedup();
        let row_of: HashMap<u64, u32> = rows.iter().enumerate().map(|(i, &r)| (r, i as u32)).collect();
        let col_of: HashMap<u64, u32> = cols.iter().enumerate().map(|(i, &c)| (c, i as u32)).collect();
        let mut triples: Vec<(u32, u32, u32)> = g
            .edges
            .iter()
            .map(|e| (row_of[&e.left], col_of[&e.right], e.label))
            .collect();
        triples.sort_unstable();
        let mut indptr = vec![0usize; rows.len() + 1];
        let mut indices = Vec::new();
        let mut contributions = Vec::with_capacity(triples.len());
        let mut last: Option<(u32, u32)> = None;
        for &(r, c, l) in &triples {
            if last != Some((r, c)) {
                indices.push(c);
                indptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
            contributions.push(((indices.len() - 1) as u32, l));
        }
        for i in 0..rows.len() {
            indptr[i + 1] += indptr[i];
        }
        CompressedGraph {
            rows,
            cols,
            indptr,
            indices,
            contributions,
            label_groups: g.labels.iter().map(|l| l.group).collect(),
            num_groups: g.num_groups,
        }
    }

    fn with_values(&self, values: Vec<f64>) -> CsrMatrix {
        CsrMatrix::from_parts(self.rows.len(), self.cols.len(), self.indptr.clone(), self.indices.clone(), values)
    }

    /// `sum_label w_label A_label`.
    pub fn weighted(&self, label_weights: &[f64]) -> CsrMatrix {
        let mut values = vec![0.0; self.indices.len()];
        for &(pos, l) in &self.contributions {
            values[pos as usize] += label_weights[l as usize];
        }
        self.with_values(values)
    }

    /// Unsigned group matrices `|B_g|` (entry = number of the group's edges at that position).
    pub fn group_matrices(&self) -> Vec<CsrMatrix> {
        let mut per_group: Vec<Vec<f64>> = Vec::new();
        let mut used = vec![false; self.num_groups];
        for &(_, l) in &self.contributions {
            used[self.label_groups[l as usize]] = true;
        }
        let mut slot = vec![usize::MAX; self.num_groups];
        for (g, &u) in used.iter().enumerate() {
            if u {
                slot[g] = per_group.len();
                per_group.push(vec![0.0; self.indices.len()]);
            }
        }
        for &(pos, l) in &self.contributions {
            per_group[slot[self.label_groups[l as usize]]][pos as usize] += 1.0;
        }
        per_group.into_iter().map(|v| self.with_values(v).pruned_zeros()).collect()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}
