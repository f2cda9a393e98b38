//! Greedy heavy-set decomposition of a hypergraph-matching instance.
//!
//! A set `Q` with `2 <= |Q| <= (q+1)/2` is heavy when it lies in more than
//! `d_{|Q|}` hyperedges of the combined multiset `H' = U_i H'_i`. Heavy sets
//! are promoted to labels from the largest size down; each promotion moves
//! `floor(d_t) + 1` hyperedges `C` into the bipartite piece as `(C \ Q, p_Q)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{
    eval_phi, eval_psi_bipartite, validate_matching, BipartiteHyperedge, BipartiteXorInstance,
    HypergraphMatching, XorInstance,
};
use crate::sets::{combinations, VertexSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub ell: usize,
    /// `d_t` for `t = 2..=(q+1)/2`.
    pub d: BTreeMap<usize, f64>,
    /// Whether `k >= 4 ell`, the regime the bounds are tuned for.
    pub k_at_least_4ell: bool,
    /// Whether `d_{(q+1)/2} >= 1`.
    pub smallest_at_least_one: bool,
}

impl Thresholds {
    pub fn get(&self, t: usize) -> f64 {
        self.d[&t]
    }

    pub fn max_size(&self) -> usize {
        self.d.keys().next_back().copied().unwrap_or(1)
    }
}

/// `ell = floor(n^{1-2/q} delta^{-2/q})` clamped to `[1, n]`, and
/// `d_t = (ell/n)^{t-3/2} k`.
pub fn compute_thresholds(n: usize, k: usize, q: usize, delta: f64) -> Result<Thresholds> {
    if n == 0 || k == 0 || q < 3 || q.is_multiple_of(2) || !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameters(format!(
            "thresholds need n, k >= 1, odd q >= 3, delta in (0, 1]; got n={n}, k={k}, q={q}, delta={delta}"
        )));
    }
    let qf = q as f64;
    let raw = (n as f64).powf(1.0 - 2.0 / qf) * delta.powf(-2.0 / qf);
    // guard against 4 - 1e-15 style rounding of exact cube roots
    let ell = ((raw + 1e-9).floor() as usize).clamp(1, n);
    let ratio = ell as f64 / n as f64;
    let d: BTreeMap<usize, f64> = (2..=q.div_ceil(2))
        .map(|t| (t, ratio.powf(t as f64 - 1.5) * k as f64))
        .collect();
    let smallest = *d.values().next_back().unwrap();
    Ok(Thresholds {
        ell,
        d,
        k_at_least_4ell: k >= 4 * ell,
        smallest_at_least_one: smallest >= 1.0,
    })
}

/// Where an original hyperedge `H_i[position]` ended up.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "dest", rename_all = "snake_case")]
pub enum Destination {
    Leftover { index: usize },
    Piece { s: usize, index: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposedInstance {
    pub thresholds: Thresholds,
    pub leftover: XorInstance,
    /// One bipartite instance per `s = 2..=(q+1)/2`, possibly empty.
    pub pieces: BTreeMap<usize, BipartiteXorInstance>,
    /// `provenance[i][pos]` for every original hyperedge.
    pub provenance: Vec<Vec<Destination>>,
}

impl DecomposedInstance {
    pub fn piece_edges(&self) -> usize {
        self.pieces.values().map(BipartiteXorInstance::total_edges).sum()
    }
}

type EdgeId = (usize, usize);

/// Runs the greedy algorithm. Ties are broken deterministically: the
/// lexicographically smallest heavy set is promoted first and the
/// `floor(d_t)+1` hyperedges with smallest `(i, position)` are moved.
pub fn decompose(inst: &XorInstance, thr: &Thresholds) -> Result<DecomposedInstance> {
    inst.validate()?;
    let q = inst.q;
    let k = inst.k();
    let top = q.div_ceil(2);
    let mut alive: Vec<Vec<bool>> = inst.hypergraphs.iter().map(|h| vec![true; h.len()]).collect();
    let mut moved: BTreeMap<usize, Vec<(EdgeId, usize)>> = BTreeMap::new();
    let mut registries: BTreeMap<usize, Vec<VertexSet>> = BTreeMap::new();

    for t in (2..=top).rev() {
        let dt = thr.get(t);
        let take = dt.floor() as usize + 1;
        // t-subset -> alive edges containing it
        let mut index: HashMap<VertexSet, BTreeSet<EdgeId>> = HashMap::new();
        for (i, h) in inst.hypergraphs.iter().enumerate() {
            for (pos, c) in h.iter().enumerate() {
                if !alive[i][pos] {
                    continue;
                }
                for sub in combinations(c.as_slice(), t) {
                    index.entry(VertexSet::from_sorted(sub)).or_default().insert((i, pos));
                }
            }
        }
        let mut heavy: BTreeSet<VertexSet> = index
            .iter()
            .filter(|(_, es)| es.len() as f64 > dt)
            .map(|(qs, _)| qs.clone())
            .collect();
        let registry = registries.entry(t).or_default();
        while let Some(qset) = heavy.pop_first() {
            let label = registry.len();
            registry.push(qset.clone());
            let chosen: Vec<EdgeId> = index[&qset].iter().take(take).copied().collect();
            debug_assert_eq!(chosen.len(), take);
            for id in chosen {
                alive[id.0][id.1] = false;
                moved.entry(t).or_default().push((id, label));
                for sub in combinations(inst.hypergraphs[id.0].edges[id.1].as_slice(), t) {
                    let key = VertexSet::from_sorted(sub);
                    let entry = index.get_mut(&key).expect("indexed");
                    entry.remove(&id);
                    if entry.len() as f64 <= dt {
                        heavy.remove(&key);
                    }
                }
            }
        }
    }

    let mut provenance: Vec<Vec<Destination>> = inst
        .hypergraphs
        .iter()
        .map(|h| vec![Destination::Leftover { index: 0 }; h.len()])
        .collect();
    let mut leftover = Vec::with_capacity(k);
    for (i, h) in inst.hypergraphs.iter().enumerate() {
        let mut edges = Vec::new();
        for (pos, c) in h.iter().enumerate() {
            if alive[i][pos] {
                provenance[i][pos] = Destination::Leftover { index: edges.len() };
                edges.push(c.clone());
            }
        }
        leftover.push(HypergraphMatching::new(edges));
    }

    let mut pieces = BTreeMap::new();
    for s in 2..=top {
        let registry = registries.remove(&s).unwrap_or_default();
        let mut hypergraphs: Vec<Vec<BipartiteHyperedge>> = vec![Vec::new(); k];
        let mut entries = moved.remove(&s).unwrap_or_default();
        entries.sort();
        for ((i, pos), label) in entries {
            let c = &inst.hypergraphs[i].edges[pos];
            provenance[i][pos] = Destination::Piece {
                s,
                index: hypergraphs[i].len(),
            };
            hypergraphs[i].push(BipartiteHyperedge {
                left: c.difference(&registry[label]),
                label,
            });
        }
        pieces.insert(
            s,
            BipartiteXorInstance {
                n: inst.n,
                q,
                s,
                delta: inst.delta,
                registry,
                hypergraphs,
                signs: inst.signs.clone(),
            },
        );
    }

    Ok(DecomposedInstance {
        thresholds: thr.clone(),
        leftover: XorInstance {
            n: inst.n,
            q,
            delta: inst.delta,
            hypergraphs: leftover,
            signs: inst.signs.clone(),
        },
        pieces,
        provenance,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// Violations per decomposition property (1)..(5), plus conservation.
    pub violations: BTreeMap<String, Vec<String>>,
    /// Measured `|P_s| * d_s / |H|` per `s`, to compare with the crude `2^q`.
    pub registry_ratio: BTreeMap<usize, f64>,
}

impl DecompositionReport {
    pub fn passed(&self) -> bool {
        self.violations.values().all(Vec::is_empty)
    }

    fn push(&mut self, key: &str, msg: String) {
        self.violations.entry(key.to_string()).or_default().push(msg);
    }
}

/// Checks the five decomposition properties and the conservation identity.
pub fn verify_decomposition(
    original: &XorInstance,
    dec: &DecomposedInstance,
    thr: &Thresholds,
) -> DecompositionReport {
    let mut report = DecompositionReport::default();
    for key in ["1_shape", "2_subset", "3_bijection", "4_regularity", "5_matching", "conservation"] {
        report.violations.insert(key.to_string(), Vec::new());
    }
    let q = original.q;
    let k = original.k();
    let top = q.div_ceil(2);
    let total = original.total_edges();

    // (1) shape, registry labels and |P_s| bound
    for (&s, piece) in &dec.pieces {
        if s < 2 || s > top {
            report.push("1_shape", format!("unexpected piece s = {s}"));
        }
        for (p, set) in piece.registry.iter().enumerate() {
            if set.len() != s {
                report.push("1_shape", format!("label {p} of P_{s} has size {}", set.len()));
            }
        }
        for (i, h) in piece.hypergraphs.iter().enumerate() {
            for e in h {
                if e.left.len() != q - s || e.label >= piece.registry.len() {
                    report.push("1_shape", format!("bad edge {:?} in H_{}^({s})", e, i + 1));
                }
            }
        }
        let ds = thr.get(s);
        let bound = 2f64.powi(q as i32) * total as f64 / ds;
        if piece.registry.len() as f64 > bound {
            report.push(
                "1_shape",
                format!("|P_{s}| = {} exceeds 2^q |H| / d_s = {bound}", piece.registry.len()),
            );
        }
        if total > 0 {
            report
                .registry_ratio
                .insert(s, piece.registry.len() as f64 * ds / total as f64);
        }
    }

    // (2) leftover is a sub-multiset of each H_i
    if dec.leftover.k() != k {
        report.push("2_subset", format!("leftover has {} hypergraphs, expected {k}", dec.leftover.k()));
    }
    for (i, h) in dec.leftover.hypergraphs.iter().enumerate().take(k) {
        for c in h.iter() {
            if !original.hypergraphs[i].edges.contains(c) {
                report.push("2_subset", format!("{c:?} in H'_{} is not in H_{}", i + 1, i + 1));
            }
        }
    }

    // (3) one-to-one correspondence, reconstructing C = C' U p
    for i in 0..k.min(dec.leftover.k()) {
        let mut reconstructed: Vec<VertexSet> = dec.leftover.hypergraphs[i].edges.clone();
        for (&s, piece) in &dec.pieces {
            if let Some(h) = piece.hypergraphs.get(i) {
                for e in h {
                    match piece.registry.get(e.label) {
                        Some(p) if e.left.is_disjoint(p) => reconstructed.push(e.left.union(p)),
                        _ => report.push("3_bijection", format!("edge {e:?} of H_{}^({s}) cannot be reconstructed", i + 1)),
                    }
                }
            }
        }
        let mut want = original.hypergraphs[i].edges.clone();
        want.sort();
        reconstructed.sort();
        if want != reconstructed {
            report.push(
                "3_bijection",
                format!("H_{}: reconstructed multiset differs from the original", i + 1),
            );
        }
        let parts = dec.leftover.hypergraphs[i].len()
            + dec.pieces.values().map(|p| p.hypergraphs.get(i).map_or(0, Vec::len)).sum::<usize>();
        if parts != original.hypergraphs[i].len() {
            report.push(
                "conservation",
                format!("|H_{}| = {} but parts sum to {parts}", i + 1, original.hypergraphs[i].len()),
            );
        }
    }

    // (4) no heavy set left, by a full degree scan of H'
    let mut counts: HashMap<VertexSet, usize> = HashMap::new();
    for c in dec.leftover.all_edges() {
        for t in 2..=top {
            for sub in combinations(c.as_slice(), t) {
                *counts.entry(VertexSet::from_sorted(sub)).or_default() += 1;
            }
        }
    }
    let mut heavy: Vec<_> = counts
        .into_iter()
        .filter(|(qs, d)| *d as f64 > thr.get(qs.len()))
        .collect();
    heavy.sort();
    for (qs, d) in heavy {
        report.push("4_regularity", format!("{qs:?} has degree {d} > d_{}", qs.len()));
    }

    // (5) matchings stay matchings
    if original.hypergraphs.iter().all(|h| validate_matching(h).is_ok()) {
        for (i, h) in dec.leftover.hypergraphs.iter().enumerate() {
            if validate_matching(h).is_err() {
                report.push("5_matching", format!("H'_{} is not a matching", i + 1));
            }
        }
        for (&s, piece) in &dec.pieces {
            for (i, h) in piece.hypergraphs.iter().enumerate() {
                let lefts = HypergraphMatching::new(h.iter().map(|e| e.left.clone()).collect());
                let mut labels: Vec<usize> = h.iter().map(|e| e.label).collect();
                labels.sort_unstable();
                labels.dedup();
                if validate_matching(&lefts).is_err() || labels.len() != h.len() {
                    report.push("5_matching", format!("H_{}^({s}) is not a bipartite matching", i + 1));
                }
            }
        }
    }
    report
}

/// Checks `Phi_b(x) = Psi_b(x) + sum_s Psi^(s)_b(x, y)` with `y_p = prod_{v in p} x_v`.
pub fn recombination_check(
    original: &XorInstance,
    dec: &DecomposedInstance,
    b: &[i8],
    x: &[i8],
) -> Result<bool> {
    let lhs = eval_phi(original, b, x)?;
    let mut rhs = eval_phi(&dec.leftover, b, x)?;
    for piece in dec.pieces.values() {
        let y: Vec<i8> = piece
            .registry
            .iter()
            .map(|p| p.iter().fold(1i8, |acc, v| acc * x[v as usize]))
            .collect();
        rhs += eval_psi_bipartite(piece, b, x, &y)?;
    }
    Ok(lhs == rhs)
}
