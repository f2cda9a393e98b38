//! Row pruning of Kikuchi graphs to approximately regular subgraphs, and
//! the conditional first-moment diagnostics that justify it.
//!
//! Per group, every vertex whose group degree exceeds `gamma * d` is marked
//! heavy and every edge touching a heavy vertex is dropped. Each label is then
//! trimmed to the common survivor count `D'` by dropping its largest edges.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::mean_stderr;
use crate::kikuchi::{Edge, KikuchiGraph, Variant};

pub const DEFAULT_GAMMA: f64 = 8.0;
/// Conditional moments are computed over every edge when `D` is at most this.
pub const EXHAUSTIVE_MOMENT_LIMIT: usize = 100_000;

fn ratio_to_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

fn big(u: &BigUint) -> BigInt {
    BigInt::from(u.clone())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    /// Left (row) target; equals `right` for symmetric graphs.
    #[serde(with = "rational_text")]
    pub left: BigRational,
    #[serde(with = "rational_text")]
    pub right: BigRational,
    pub left_f64: f64,
    pub right_f64: f64,
}

mod rational_text {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Target degrees: `m k D / N` for the regular graph and `(m D / N_L, m D / N_R)`
/// otherwise, where `m = max_i |H_i|` is the measured `delta n`.
pub fn target_degrees(graph: &KikuchiGraph, m: usize) -> Targets {
    let d = big(&graph.per_label) * BigInt::from(m);
    let (nl, nr) = (big(&graph.left.cardinality()), big(&graph.right.cardinality()));
    let frac = |num: BigInt, den: &BigInt| {
        if den.is_zero() {
            BigRational::zero()
        } else {
            BigRational::new(num, den.clone())
        }
    };
    let (left, right) = match graph.variant {
        Variant::RegularCs => {
            let t = frac(d * BigInt::from(graph.num_groups), &nl);
            (t.clone(), t)
        }
        _ => (frac(d.clone(), &nl), frac(d, &nr)),
    };
    Targets {
        left_f64: ratio_to_f64(&left),
        right_f64: ratio_to_f64(&right),
        left,
        right,
    }
}

/// The degree-bound shapes with constant 1: `(l/n)^{q-1} m k` for the regular
/// graph, `(l/n)^{(q-1)/2} m` for the bipartite left side and
/// `(l/n)^{(q+1)/2-s} (l/|P|) m` for the bipartite right side.
pub fn analytic_shape(graph: &KikuchiGraph, n: usize, m: usize, s: usize, num_labels: usize, side: Side) -> f64 {
    let r = graph.ell as f64 / n as f64;
    let q = graph.q as f64;
    match (graph.variant, side) {
        (Variant::RegularCs, _) => r.powf(q - 1.0) * m as f64 * graph.num_groups as f64,
        (Variant::Bipartite, Side::Right) => {
            r.powf((q + 1.0) / 2.0 - s as f64) * (graph.ell as f64 / num_labels.max(1) as f64) * m as f64
        }
        _ => r.powf((q - 1.0) / 2.0) * m as f64,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    /// A uniformly random endpoint.
    Either,
}

/// Per-group vertex degrees on each side.
#[derive(Clone, Debug, Default)]
pub struct DegreeProfile {
    pub left: Vec<HashMap<u64, usize>>,
    pub right: Vec<HashMap<u64, usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeSummary {
    pub max_left: usize,
    pub max_right: usize,
    pub mean_left_touched: f64,
    pub mean_right_touched: f64,
    /// `histogram[d]` = number of left vertices of degree `d`, summed over groups.
    pub left_histogram: Vec<usize>,
}

impl DegreeProfile {
    pub fn new(graph: &KikuchiGraph) -> Self {
        let mut left = vec![HashMap::new(); graph.num_groups];
        let mut right = vec![HashMap::new(); graph.num_groups];
        for e in &graph.edges {
            let g = graph.labels[e.label as usize].group;
            *left[g].entry(e.left).or_insert(0) += 1;
            *right[g].entry(e.right).or_insert(0) += 1;
        }
        DegreeProfile { left, right }
    }

    pub fn summary(&self) -> DegreeSummary {
        let stats = |maps: &[HashMap<u64, usize>]| {
            let max = maps.iter().flat_map(|m| m.values()).copied().max().unwrap_or(0);
            let count: usize = maps.iter().map(HashMap::len).sum();
            let total: usize = maps.iter().flat_map(|m| m.values()).sum();
            (max, if count == 0 { 0.0 } else { total as f64 / count as f64 })
        };
        let (max_left, mean_left_touched) = stats(&self.left);
        let (max_right, mean_right_touched) = stats(&self.right);
        let mut left_histogram = vec![0usize; max_left + 1];
        for d in self.left.iter().flat_map(|m| m.values()) {
            left_histogram[*d] += 1;
        }
        DegreeSummary {
            max_left,
            max_right,
            mean_left_touched,
            mean_right_touched,
            left_histogram,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPruneStats {
    pub group: usize,
    pub heavy_left: usize,
    pub heavy_right: usize,
    pub max_left_before: usize,
    pub max_right_before: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub gamma: f64,
    #[serde(rename = "D")]
    pub d: String,
    #[serde(rename = "D_prime")]
    pub d_prime: usize,
    /// `D' / D`; at least 1/2 is expected on large instances.
    pub ratio: f64,
    pub half_kept: bool,
    pub heavy_left: usize,
    pub heavy_right: usize,
    pub dropped_heavy: usize,
    pub dropped_trim: usize,
    pub targets: Targets,
    pub per_group: Vec<GroupPruneStats>,
}

#[derive(Clone, Debug)]
pub struct PrunedGraph {
    /// The pruned graph; `per_label` is `D'` and every label has `D'` edges.
    pub graph: KikuchiGraph,
    pub report: PruneReport,
}

impl PrunedGraph {
    pub fn d_prime(&self) -> usize {
        self.report.d_prime
    }
}

fn exceeds(deg: usize, cap: &BigRational) -> bool {
    BigRational::from_integer(BigInt::from(deg)) > *cap
}

/// Single-pass pruning with cap constant `gamma`.
pub fn prune(graph: &KikuchiGraph, targets: &Targets, gamma: f64) -> Result<PrunedGraph> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameters(format!("gamma must be positive, got {gamma}")));
    }
    let g = BigRational::from_float(gamma).expect("finite gamma");
    let (cap_left, cap_right) = (&g * &targets.left, &g * &targets.right);
    let profile = DegreeProfile::new(graph);
    let symmetric = graph.symmetric;

    let mut per_group = Vec::with_capacity(graph.num_groups);
    let mut heavy_left: Vec<std::collections::HashSet<u64>> = Vec::with_capacity(graph.num_groups);
    let mut heavy_right: Vec<std::collections::HashSet<u64>> = Vec::with_capacity(graph.num_groups);
    for grp in 0..graph.num_groups {
        let mut hl: std::collections::HashSet<u64> = profile.left[grp]
            .iter()
            .filter(|(_, &d)| exceeds(d, &cap_left))
            .map(|(&v, _)| v)
            .collect();
        let mut hr: std::collections::HashSet<u64> = profile.right[grp]
            .iter()
            .filter(|(_, &d)| exceeds(d, &cap_right))
            .map(|(&v, _)| v)
            .collect();
        if symmetric {
            // both sides share the vertex set; a heavy vertex is removed as row and column
            let union: std::collections::HashSet<u64> = hl.union(&hr).copied().collect();
            hl = union.clone();
            hr = union;
        }
        per_group.push(GroupPruneStats {
            group: grp,
            heavy_left: hl.len(),
            heavy_right: hr.len(),
            max_left_before: profile.left[grp].values().copied().max().unwrap_or(0),
            max_right_before: profile.right[grp].values().copied().max().unwrap_or(0),
        });
        heavy_left.push(hl);
        heavy_right.push(hr);
    }

    let survivors: Vec<Vec<Edge>> = (0..graph.num_labels())
        .into_par_iter()
        .map(|l| {
            let grp = graph.labels[l].group;
            graph
                .label_edges(l)
                .iter()
                .filter(|e| !heavy_left[grp].contains(&e.left) && !heavy_right[grp].contains(&e.right))
                .copied()
                .collect()
        })
        .collect();
    let d_prime = survivors.iter().map(Vec::len).min().unwrap_or_else(|| graph.per_label.to_usize().unwrap_or(0));
    if d_prime == 0 && graph.num_labels() > 0 {
        return Err(Error::PruneExhausted { gamma });
    }
    let dropped_heavy = graph.num_edges() - survivors.iter().map(Vec::len).sum::<usize>();

    let trimmed: Vec<Vec<Edge>> = survivors
        .into_par_iter()
        .map(|mut es| {
            if symmetric {
                // keep swap-closed pairs, smallest pairs first
                let mut pairs: Vec<(u64, u64)> = es
                    .iter()
                    .filter(|e| e.left < e.right)
                    .map(|e| (e.left, e.right))
                    .collect();
                pairs.sort_unstable();
                pairs.truncate(d_prime / 2);
                let label = es.first().map(|e| e.label).unwrap_or(0);
                let mut out: Vec<Edge> = pairs
                    .iter()
                    .flat_map(|&(a, b)| {
                        [Edge { left: a, right: b, label }, Edge { left: b, right: a, label }]
                    })
                    .collect();
                out.sort_unstable();
                out
            } else {
                es.sort_unstable();
                es.truncate(d_prime);
                es
            }
        })
        .collect();

    let mut edges = Vec::with_capacity(trimmed.iter().map(Vec::len).sum());
    let mut label_offsets = vec![0usize];
    for es in trimmed {
        edges.extend(es);
        label_offsets.push(edges.len());
    }
    let dropped_trim = graph.num_edges() - dropped_heavy - edges.len();
    let d_original = graph.per_label.clone();
    let ratio = if d_original.is_zero() {
        1.0
    } else {
        d_prime as f64 / d_original.to_f64().unwrap_or(f64::INFINITY)
    };
    let pruned = KikuchiGraph {
        edges,
        label_offsets,
        per_label: BigUint::from(d_prime),
        ..graph.clone_without_edges()
    };
    let report = PruneReport {
        gamma,
        d: d_original.to_string(),
        d_prime,
        ratio,
        half_kept: BigUint::from(2 * d_prime) >= d_original,
        heavy_left: per_group.iter().map(|s| s.heavy_left).sum(),
        heavy_right: per_group.iter().map(|s| s.heavy_right).sum(),
        dropped_heavy,
        dropped_trim,
        targets: targets.clone(),
        per_group,
    };
    Ok(PrunedGraph { graph: pruned, report })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PruneCheck {
    pub subgraph: bool,
    pub equalized: bool,
    pub capped: bool,
    pub symmetric: bool,
    pub max_left: usize,
    pub max_right: usize,
}

impl PruneCheck {
    pub fn passed(&self) -> bool {
        self.subgraph && self.equalized && self.capped && self.symmetric
    }
}

/// Checks `B` against `A`: label-preserving subgraph, exactly `D'` edges per
/// label, group degrees within the caps, and swap symmetry where required.
pub fn check_pruned(original: &KikuchiGraph, pruned: &PrunedGraph) -> PruneCheck {
    let b = &pruned.graph;
    let d_prime = pruned.d_prime();
    let subgraph = b.num_labels() == original.num_labels()
        && (0..b.num_labels()).all(|l| {
            let all = original.label_edges(l);
            b.label_edges(l).iter().all(|e| all.binary_search(e).is_ok())
        });
    let equalized = (0..b.num_labels()).all(|l| b.label_count(l) == d_prime);
    let profile = DegreeProfile::new(b);
    let g = BigRational::from_float(pruned.report.gamma).expect("finite gamma");
    let t = &pruned.report.targets;
    let (cap_left, cap_right) = (&g * &t.left, &g * &t.right);
    let summary = profile.summary();
    let capped = profile.left.iter().flat_map(|m| m.values()).all(|&d| !exceeds(d, &cap_left))
        && profile.right.iter().flat_map(|m| m.values()).all(|&d| !exceeds(d, &cap_right));
    let symmetric = !b.symmetric
        || (0..b.num_labels()).all(|l| {
            let es = b.label_edges(l);
            es.iter().all(|e| {
                es.binary_search(&Edge {
                    left: e.right,
                    right: e.left,
                    label: e.label,
                })
                .is_ok()
            })
        });
    PruneCheck {
        subgraph,
        equalized,
        capped,
        symmetric,
        max_left: summary.max_left,
        max_right: summary.max_right,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub mean: f64,
    pub stderr: f64,
    pub exhaustive: bool,
    pub samples: usize,
}

/// Mean group degree of the endpoint of a uniformly random edge of `label`.
pub fn conditional_degree_moment(
    graph: &KikuchiGraph,
    label: usize,
    side: Side,
    samples: usize,
    seed: u64,
) -> Result<MomentReport> {
    if label >= graph.num_labels() {
        return Err(Error::UnknownLabel {
            label,
            len: graph.num_labels(),
        });
    }
    let edges = graph.label_edges(label);
    if edges.is_empty() {
        return Err(Error::InvalidParameters(format!("label {label} has no edges")));
    }
    let group = graph.labels[label].group;
    let mut left_deg: HashMap<u64, usize> = HashMap::new();
    let mut right_deg: HashMap<u64, usize> = HashMap::new();
    for l in 0..graph.num_labels() {
        if graph.labels[l].group != group {
            continue;
        }
        for e in graph.label_edges(l) {
            *left_deg.entry(e.left).or_insert(0) += 1;
            *right_deg.entry(e.right).or_insert(0) += 1;
        }
    }
    let degree = |e: &Edge, use_left: bool| -> f64 {
        if use_left {
            left_deg[&e.left] as f64
        } else {
            right_deg[&e.right] as f64
        }
    };
    if edges.len() <= EXHAUSTIVE_MOMENT_LIMIT {
        let values: Vec<f64> = match side {
            Side::Left => edges.iter().map(|e| degree(e, true)).collect(),
            Side::Right => edges.iter().map(|e| degree(e, false)).collect(),
            Side::Either => edges
                .iter()
                .map(|e| (degree(e, true) + degree(e, false)) / 2.0)
                .collect(),
        };
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        return Ok(MomentReport {
            mean,
            stderr: 0.0,
            exhaustive: true,
            samples: values.len(),
        });
    }
    if samples == 0 {
        return Err(Error::InvalidParameters("samples must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..samples)
        .map(|_| {
            let e = &edges[rng.gen_range(0..edges.len())];
            let use_left = match side {
                Side::Left => true,
                Side::Right => false,
                Side::Either => rng.gen::<bool>(),
            };
            degree(e, use_left)
        })
        .collect();
    let (mean, stderr) = mean_stderr(&values);
    Ok(MomentReport {
        mean,
        stderr,
        exhaustive: false,
        samples,
    })
}

/// Largest per-label `(moment - 1)` over every label, per side.
pub fn max_moment_excess(graph: &KikuchiGraph, side: Side, samples: usize, seed: u64) -> Result<BTreeMap<usize, f64>> {
    let mut out = BTreeMap::new();
    for l in 0..graph.num_labels() {
        if graph.label_count(l) == 0 {
            continue;
        }
        let m = conditional_degree_moment(graph, l, side, samples, seed ^ l as u64)?;
        let entry = out.entry(graph.labels[l].group).or_insert(f64::NEG_INFINITY);
        *entry = f64::max(*entry, m.mean - 1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{HypergraphMatching, XorInstance};
    use crate::kikuchi::assemble_naive_odd;
    use crate::sets::VertexSet;

    fn graph(edges: Vec<Vec<[u32; 3]>>, n: usize, ell: usize) -> KikuchiGraph {
        let hs = edges
            .into_iter()
            .map(|h| HypergraphMatching::new(h.into_iter().map(VertexSet::from).collect()))
            .collect();
        let inst = XorInstance::new(n, 3, 0.5, hs, None).unwrap();
        assemble_naive_odd(&inst, ell).unwrap()
    }

    #[test]
    fn single_constraint_untouched() {
        let g = graph(vec![vec![[0, 1, 2]]], 6, 1);
        let t = target_degrees(&g, 1);
        let p = prune(&g, &t, DEFAULT_GAMMA).unwrap();
        assert_eq!(BigUint::from(p.d_prime()), g.per_label);
        assert!(check_pruned(&g, &p).passed());
        let m = conditional_degree_moment(&g, 0, Side::Left, 10, 0).unwrap();
        assert_eq!(m.mean, 1.0);
    }

    #[test]
    fn target_matches_counting() {
        let g = graph(vec![vec![[0, 1, 2], [3, 4, 5]]], 7, 1);
        let t = target_degrees(&g, 2);
        // group edge count / N_L
        let expect = BigRational::new(BigInt::from(g.num_edges()), big(&g.left.cardinality()));
        assert_eq!(t.left, expect);
    }

    #[test]
    fn heavy_vertex_is_pruned() {
        // many constraints through vertex 0 in one group is impossible (matching),
        // so use a tiny gamma to force pruning of the busiest vertices
        let g = graph(vec![vec![[0, 1, 2], [3, 4, 5]], vec![[0, 3, 6]]], 7, 1);
        let t = target_degrees(&g, 2);
        let loose = prune(&g, &t, 100.0).unwrap();
        assert_eq!(loose.d_prime(), 3);
        let tight = prune(&g, &t, 0.3);
        match tight {
            Ok(p) => {
                assert!(p.d_prime() <= loose.d_prime());
                assert!(check_pruned(&g, &p).passed());
            }
            Err(e) => assert!(matches!(e, Error::PruneExhausted { .. })),
        }
    }

    #[test]
    fn gamma_monotone() {
        let g = graph(vec![vec![[0, 1, 2], [3, 4, 5]], vec![[0, 3, 6], [1, 4, 7]], vec![[2, 5, 8]]], 9, 2);
        let t = target_degrees(&g, 2);
        let mut last = 0;
        for gamma in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let d = prune(&g, &t, gamma).map(|p| p.d_prime()).unwrap_or(0);
            assert!(d >= last);
            last = d;
        }
    }
}
