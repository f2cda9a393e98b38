//! Refutation certificates.
//!
//! For the regular part, `q^2 val(Psi_b)^2 <= n (q sum_i |H_i| + 4 E_{(L,R)} val(f_{L,R}))`
//! and `val(f_{L,R}) <= (N / D') ||B||_2` on the pruned Cauchy–Schwarz graph.
//! The expectation over partitions is taken exactly over a balanced family:
//! `L_a = {i : <a, i+1> = 0}` for `a` in `GF(2)^m`, in which every ordered pair
//! `(i, j)` lands in `L x R` for exactly a quarter of the family.
//!
//! For a bipartite piece, `val(Psi^(s)_b) <= (sqrt(N_L N_R) / D') ||B||_2`.
//! Every part is also capped by its trivial bound (its number of constraints),
//! and the combined bound on `val(Phi_b)` is the sum of the parts.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decompose::{compute_thresholds, decompose, Thresholds};
use crate::error::{Error, Result};
use crate::format::{BipartiteFile, InstanceFile};
use crate::instance::{
    brute_force_val, brute_force_val_bipartite, BipartiteXorInstance, XorInstance, DEFAULT_EXHAUSTIVE_LIMIT,
};
use crate::kikuchi::{
    assemble_bipartite, assemble_regular_cs, bipartite_spaces, d_bipartite, d_regular_cs, regular_cs_spaces,
    EdgeLabel, KikuchiGraph, LabelKind, VertexSpace,
};
use crate::prune::{check_pruned, prune, target_degrees, PruneCheck, PruneReport, DEFAULT_GAMMA};
use crate::sets::{combinations, VertexSet};
use crate::spectral::{
    khintchine_bound, khintchine_sigma, sign_vectors, spectral_norm, NormOptions, SigmaReport, DEFAULT_TRIALS,
    EXHAUSTIVE_GROUP_LIMIT,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_EPSILON: f64 = 0.1;
/// Kikuchi levels are lowered until a graph has at most this many edges.
pub const DEFAULT_EDGE_BUDGET: usize = 250_000;
/// Relative slack in the bound's favor when comparing with exact values.
pub const SOUNDNESS_GUARD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum PartitionScheme {
    /// The GF(2) family; its average equals the expectation over uniform partitions.
    Balanced,
    /// Independent uniform partitions; the averaged bound is then not certified.
    Random { count: usize },
}

#[derive(Clone, Debug)]
pub struct RefuteOptions {
    pub epsilon: f64,
    pub gamma: f64,
    pub trials: usize,
    pub seed: u64,
    pub ell: Option<usize>,
    pub edge_budget: usize,
    pub partitions: PartitionScheme,
    /// Enumerate all `2^k` sign vectors regardless of `k`.
    pub exhaustive_signs: bool,
    pub norm: NormOptions,
}

impl Default for RefuteOptions {
    fn default() -> Self {
        RefuteOptions {
            epsilon: DEFAULT_EPSILON,
            gamma: DEFAULT_GAMMA,
            trials: DEFAULT_TRIALS,
            seed: 7,
            ell: None,
            edge_budget: DEFAULT_EDGE_BUDGET,
            partitions: PartitionScheme::Balanced,
            exhaustive_signs: false,
            norm: NormOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl Partition {
    pub fn new(left: Vec<usize>, right: Vec<usize>, k: usize) -> Result<Self> {
        let mut seen = vec![false; k];
        for &i in left.iter().chain(&right) {
            if i >= k || seen[i] {
                return Err(Error::InvalidParameters(format!(
                    "partition index {i} repeated or outside 0..{k}"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameters("partition does not cover [k]".into()));
        }
        Ok(Partition { left, right })
    }

    fn side_map(&self, k: usize) -> Vec<Option<bool>> {
        let mut out = vec![None; k];
        for &i in &self.left {
            out[i] = Some(true);
        }
        for &j in &self.right {
            out[j] = Some(false);
        }
        out
    }
}

/// `{L_a : a in GF(2)^m}` with `L_a = {i : <a, i+1> = 0}` and `m = ceil(log2(k+1))`.
pub fn balanced_partitions(k: usize) -> Vec<Partition> {
    let m = (usize::BITS - k.leading_zeros()) as usize;
    (0..1usize << m)
        .map(|a| {
            let (left, right): (Vec<usize>, Vec<usize>) =
                (0..k).partition(|&i| (a & (i + 1)).count_ones() % 2 == 0);
            Partition { left, right }
        })
        .collect()
}

pub fn random_partitions(k: usize, count: usize, seed: u64) -> Vec<Partition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (left, right): (Vec<usize>, Vec<usize>) = (0..k).partition(|_| rng.gen::<bool>());
            Partition { left, right }
        })
        .collect()
}

/// Labels `(i, j, u, C_1, C_2)` for `i in L`, `j in R`, `(u, C_1) in H_i`, `(u, C_2) in H_j`.
pub fn cauchy_schwarz_pairs(inst: &XorInstance, partition: &Partition) -> Vec<EdgeLabel> {
    // vertex -> edge of H_j containing it
    let owners: Vec<HashMap<u32, &VertexSet>> = inst
        .hypergraphs
        .iter()
        .map(|h| h.iter().flat_map(|c| c.iter().map(move |v| (v, c))).collect())
        .collect();
    let mut right = partition.right.clone();
    right.sort_unstable();
    let mut left = partition.left.clone();
    left.sort_unstable();
    let mut labels = Vec::new();
    for &i in &left {
        for c in inst.hypergraphs[i].iter() {
            for u in c.iter() {
                let c1 = c.difference(&VertexSet::singleton(u));
                for &j in &right {
                    if let Some(c2) = owners[j].get(&u) {
                        labels.push(EdgeLabel {
                            group: i,
                            kind: LabelKind::Paired {
                                i,
                                j,
                                u,
                                c1: c1.clone(),
                                c2: c2.difference(&VertexSet::singleton(u)),
                            },
                        });
                    }
                }
            }
        }
    }
    labels
}

/// Direct evaluation of `f_{L,R}(x)`.
pub fn eval_f(inst: &XorInstance, partition: &Partition, b: &[i8], x: &[i8]) -> i64 {
    let side = partition.side_map(inst.k());
    let mut total = 0i64;
    for (i, hi) in inst.hypergraphs.iter().enumerate() {
        if side[i] != Some(true) {
            continue;
        }
        for (j, hj) in inst.hypergraphs.iter().enumerate() {
            if side[j] != Some(false) {
                continue;
            }
            for c in hi.iter() {
                for c2 in hj.iter() {
                    for u in c.iter().filter(|&u| c2.contains(u)) {
                        let mono: i64 = c
                            .iter()
                            .chain(c2.iter())
                            .filter(|&v| v != u)
                            .map(|v| x[v as usize] as i64)
                            .product();
                        total += (b[i] * b[j]) as i64 * mono;
                    }
                }
            }
        }
    }
    total
}

/// Errors with the smallest heavy set if some `Q` with `2 <= |Q| <= (q+1)/2` has degree above `d_|Q|`.
pub fn check_regular(inst: &XorInstance, thr: &Thresholds) -> Result<()> {
    for (&t, &dt) in &thr.d {
        let mut counts: HashMap<VertexSet, usize> = HashMap::new();
        for c in inst.all_edges() {
            for sub in combinations(c.as_slice(), t) {
                *counts.entry(VertexSet::from_sorted(sub)).or_insert(0) += 1;
            }
        }
        if let Some((set, &degree)) = counts.iter().filter(|(_, &d)| d as f64 > dt).min_by(|a, b| a.0.cmp(b.0)) {
            return Err(Error::NotRegular {
                set: set.as_slice().to_vec(),
                degree,
                threshold: dt,
            });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartStatus {
    /// Spectral bound available for every sign vector.
    Certified,
    /// No labels: the part is identically zero.
    Empty,
    /// Only the trivial count bound applies (pruning failed or no usable level).
    Trivial,
}

/// Everything measured on one pruned Kikuchi graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPart {
    pub status: PartStatus,
    pub note: Option<String>,
    pub num_labels: usize,
    pub ell: Option<usize>,
    #[serde(rename = "D")]
    pub d: String,
    #[serde(rename = "D_prime")]
    pub d_prime: usize,
    pub n_left: String,
    pub n_right: String,
    pub rows_touched: usize,
    pub cols_touched: usize,
    pub prune: Option<PruneReport>,
    pub prune_check: Option<PruneCheck>,
    pub sigma: Option<SigmaReport>,
    /// `sqrt(2 sigma^2 ln(rows + cols))`, bounding `E_b ||B||_2`.
    pub khintchine_norm: f64,
    /// Realized `||B(b)||_2` for every sign vector of the certificate.
    pub norms: Vec<f64>,
    pub mean_norm: f64,
    pub all_converged: bool,
}

fn parse_big(s: &str) -> f64 {
    s.parse::<BigUint>().ok().and_then(|v| v.to_f64()).unwrap_or(f64::INFINITY)
}

impl SpectralPart {
    fn without_graph(status: PartStatus, note: Option<String>, num_labels: usize, ell: Option<usize>) -> Self {
        SpectralPart {
            status,
            note,
            num_labels,
            ell,
            d: "0".into(),
            d_prime: 0,
            n_left: "0".into(),
            n_right: "0".into(),
            rows_touched: 0,
            cols_touched: 0,
            prune: None,
            prune_check: None,
            sigma: None,
            khintchine_norm: 0.0,
            norms: Vec::new(),
            mean_norm: 0.0,
            all_converged: true,
        }
    }

    /// `sqrt(N_L N_R) / D'`, equal to `N / D'` on square graphs.
    pub fn scale(&self) -> f64 {
        (parse_big(&self.n_left) * parse_big(&self.n_right)).sqrt() / self.d_prime as f64
    }

    /// Certified bound on the part's value for sign vector `idx`, capped by `trivial`.
    pub fn value_bound(&self, idx: usize, trivial: f64) -> f64 {
        match self.status {
            PartStatus::Empty => 0.0,
            PartStatus::Trivial => trivial,
            PartStatus::Certified => (self.scale() * self.norms[idx]).min(trivial),
        }
    }

    /// Bound on the expectation over signs via the matrix Khintchine inequality.
    pub fn expected_bound(&self, trivial: f64) -> f64 {
        match self.status {
            PartStatus::Empty => 0.0,
            PartStatus::Trivial => trivial,
            PartStatus::Certified => (self.scale() * self.khintchine_norm).min(trivial),
        }
    }
}

/// Largest usable level in `[min, formula]` (or the override) whose graph fits the budget.
fn choose_ell<F>(formula: usize, min: usize, override_ell: Option<usize>, budget: usize, cost: F) -> Option<usize>
where
    F: Fn(usize) -> Option<BigUint>,
{
    if let Some(l) = override_ell {
        return (l >= min && cost(l).is_some()).then_some(l);
    }
    (min..=formula)
        .rev()
        .find(|&l| cost(l).is_some_and(|edges| edges <= BigUint::from(budget)))
}

fn spaces_fit(l: &VertexSpace, r: &VertexSpace) -> bool {
    l.ranker().is_ok() && r.ranker().is_ok()
}

fn analyse_graph(graph: KikuchiGraph, m: usize, opts: &RefuteOptions, signs: &[Vec<i8>]) -> SpectralPart {
    let num_labels = graph.num_labels();
    let ell = Some(graph.ell);
    if num_labels == 0 {
        return SpectralPart::without_graph(PartStatus::Empty, None, 0, ell);
    }
    let targets = target_degrees(&graph, m);
    let pruned = match prune(&graph, &targets, opts.gamma) {
        Ok(p) => p,
        Err(e) => {
            return SpectralPart::without_graph(PartStatus::Trivial, Some(e.to_string()), num_labels, ell);
        }
    };
    let prune_check = check_pruned(&graph, &pruned);
    let b = &pruned.graph;
    let compressed = b.compress();
    let groups = compressed.group_matrices();
    let sigma = khintchine_sigma(&groups, &opts.norm).expect("groups share one compressed shape");
    let (rows, cols) = (compressed.rows.len(), compressed.cols.len());
    let khintchine_norm = khintchine_bound(sigma.sigma2, rows as f64, cols as f64);
    let estimates: Vec<_> = signs
        .par_iter()
        .map(|s| spectral_norm(&compressed.weighted(&b.label_signs(s)), &opts.norm))
        .collect();
    let norms: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let mean_norm = norms.iter().sum::<f64>() / norms.len().max(1) as f64;
    SpectralPart {
        status: PartStatus::Certified,
        note: None,
        num_labels,
        ell,
        d: graph.per_label.to_string(),
        d_prime: pruned.d_prime(),
        n_left: b.left.cardinality().to_string(),
        n_right: b.right.cardinality().to_string(),
        rows_touched: rows,
        cols_touched: cols,
        prune: Some(pruned.report.clone()),
        prune_check: Some(prune_check),
        sigma: Some(sigma),
        khintchine_norm,
        norms,
        mean_norm,
        all_converged: estimates.iter().all(|e| e.converged),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionRecord {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub part: SpectralPart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularPart {
    pub n: usize,
    pub q: usize,
    /// `sum_i |H_i|` of the regular instance.
    pub total_edges: usize,
    pub certified_partitions: bool,
    pub partitions: Vec<PartitionRecord>,
    pub per_b: Vec<f64>,
    pub khintchine_bound: f64,
    pub empirical_bound: f64,
    /// Per-b bound from the single best partition, informational only.
    pub best_single_partition_mean: f64,
    /// `n sqrt(delta k) (k l ln n)^{1/4}` with constant 1.
    pub analytic_shape: f64,
}

/// `min(sqrt(n (q T + 4 F)) / q, T)`.
pub fn regular_chain(n: usize, q: usize, total_edges: usize, mean_f: f64) -> f64 {
    let t = total_edges as f64;
    let (n, q) = (n as f64, q as f64);
    ((n * (q * t + 4.0 * mean_f)).sqrt() / q).min(t)
}

impl RegularPart {
    fn mean_f(&self, idx: usize) -> f64 {
        let parts = &self.partitions;
        parts.iter().map(|p| p.part.value_bound(idx, p.part.num_labels as f64)).sum::<f64>() / parts.len() as f64
    }

    pub fn recompute_per_b(&self, num_signs: usize) -> Vec<f64> {
        (0..num_signs)
            .map(|idx| regular_chain(self.n, self.q, self.total_edges, self.mean_f(idx)))
            .collect()
    }
}

fn regular_part(
    inst: &XorInstance,
    formula_ell: usize,
    opts: &RefuteOptions,
    signs: &[Vec<i8>],
    warnings: &mut Vec<String>,
) -> Result<RegularPart> {
    let (n, q, k) = (inst.n, inst.q, inst.k());
    let m = inst.max_matching_size();
    let partitions = match &opts.partitions {
        PartitionScheme::Balanced => balanced_partitions(k),
        PartitionScheme::Random { count } => {
            warnings.push("random partitions: the averaged regular bound is not certified".into());
            random_partitions(k, (*count).max(1), opts.seed)
        }
    };
    let min_ell = (q - 1) / 2;
    let mut records = Vec::with_capacity(partitions.len());
    for p in partitions {
        let labels = cauchy_schwarz_pairs(inst, &p);
        let num_labels = labels.len();
        let part = if num_labels == 0 {
            SpectralPart::without_graph(PartStatus::Empty, None, 0, None)
        } else {
            let cost = |l: usize| {
                let (a, b) = regular_cs_spaces(n, l);
                let d = d_regular_cs(q, n, l);
                (d > BigUint::from(0u32) && spaces_fit(&a, &b)).then(|| d * BigUint::from(num_labels))
            };
            match choose_ell(formula_ell, min_ell, opts.ell, opts.edge_budget, cost) {
                Some(l) => analyse_graph(assemble_regular_cs(n, q, k, labels, l)?, m, opts, signs),
                None => {
                    warnings.push(format!(
                        "regular part: no Kikuchi level fits the edge budget for partition L={:?}",
                        p.left
                    ));
                    SpectralPart::without_graph(PartStatus::Trivial, Some("no usable level".into()), num_labels, None)
                }
            }
        };
        if let Some(pr) = &part.prune {
            if !pr.half_kept {
                warnings.push(format!("regular part: pruning kept D'/D = {:.3} < 1/2", pr.ratio));
            }
        }
        records.push(PartitionRecord {
            left: p.left,
            right: p.right,
            part,
        });
    }
    let total_edges = inst.total_edges();
    let mut part = RegularPart {
        n,
        q,
        total_edges,
        certified_partitions: opts.partitions == PartitionScheme::Balanced,
        partitions: records,
        per_b: Vec::new(),
        khintchine_bound: 0.0,
        empirical_bound: 0.0,
        best_single_partition_mean: 0.0,
        analytic_shape: {
            let delta = m as f64 / n as f64;
            let ell = formula_ell as f64;
            n as f64 * (delta * k as f64).sqrt() * (k as f64 * ell * (n as f64).ln().max(1.0)).powf(0.25)
        },
    };
    part.per_b = part.recompute_per_b(signs.len());
    let mean_kf = part
        .partitions
        .iter()
        .map(|p| p.part.expected_bound(p.part.num_labels as f64))
        .sum::<f64>()
        / part.partitions.len() as f64;
    part.khintchine_bound = regular_chain(n, q, total_edges, mean_kf);
    part.empirical_bound = mean(&part.per_b);
    part.best_single_partition_mean = part
        .partitions
        .iter()
        .map(|p| {
            let per: Vec<f64> = (0..signs.len())
                .map(|idx| regular_chain(n, q, total_edges, p.part.value_bound(idx, p.part.num_labels as f64)))
                .collect();
            mean(&per)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(part)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BipartitePart {
    pub s: usize,
    pub num_registry_labels: usize,
    /// `sum_i |H_i^(s)|`.
    pub total_edges: usize,
    pub part: SpectralPart,
    pub per_b: Vec<f64>,
    pub khintchine_bound: f64,
    pub empirical_bound: f64,
    /// `l d_s`, reported when `|P_s| < 4 l`.
    pub analytic_ell_ds: Option<f64>,
    /// `delta n sqrt(k l ln n)` with constant 1.
    pub analytic_shape: f64,
}

impl BipartitePart {
    pub fn recompute_per_b(&self, num_signs: usize) -> Vec<f64> {
        (0..num_signs)
            .map(|idx| self.part.value_bound(idx, self.total_edges as f64))
            .collect()
    }
}

fn bipartite_part(
    piece: &BipartiteXorInstance,
    formula_ell: usize,
    thresholds: Option<&Thresholds>,
    opts: &RefuteOptions,
    signs: &[Vec<i8>],
    warnings: &mut Vec<String>,
) -> Result<BipartitePart> {
    let (n, q, s) = (piece.n, piece.q, piece.s);
    let labels = piece.num_labels();
    let total_edges = piece.total_edges();
    let m = piece.max_matching_size();
    let part = if total_edges == 0 {
        SpectralPart::without_graph(PartStatus::Empty, None, 0, None)
    } else {
        let cost = |l: usize| {
            let (a, b) = bipartite_spaces(n, l, s, labels);
            let d = d_bipartite(q, s, n, l, labels);
            (d > BigUint::from(0u32) && spaces_fit(&a, &b)).then(|| d * BigUint::from(total_edges))
        };
        match choose_ell(formula_ell, (q - 1) / 2, opts.ell, opts.edge_budget, cost) {
            Some(l) => analyse_graph(assemble_bipartite(piece, l)?, m, opts, signs),
            None => {
                warnings.push(format!("piece s={s}: no Kikuchi level with D > 0 fits; trivial bound used"));
                SpectralPart::without_graph(PartStatus::Trivial, Some("no usable level".into()), total_edges, None)
            }
        }
    };
    if let Some(pr) = &part.prune {
        if !pr.half_kept {
            warnings.push(format!("piece s={s}: pruning kept D'/D = {:.3} < 1/2", pr.ratio));
        }
    }
    let analytic_ell_ds = thresholds
        .filter(|t| labels < 4 * t.ell)
        .and_then(|t| t.d.get(&s).map(|ds| t.ell as f64 * ds));
    let mut out = BipartitePart {
        s,
        num_registry_labels: labels,
        total_edges,
        part,
        per_b: Vec::new(),
        khintchine_bound: 0.0,
        empirical_bound: 0.0,
        analytic_ell_ds,
        analytic_shape: m as f64 * ((piece.k() * formula_ell) as f64 * (n as f64).ln().max(1.0)).sqrt(),
    };
    out.per_b = out.recompute_per_b(signs.len());
    out.khintchine_bound = out.part.expected_bound(total_edges as f64);
    out.empirical_bound = mean(&out.per_b);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Regular,
    Bipartite,
    Combined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum EmbeddedInstance {
    Xor(InstanceFile),
    Bipartite(BipartiteFile),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateParams {
    pub n: usize,
    pub k: usize,
    pub q: usize,
    pub s: Option<usize>,
    /// `max_i |H_i|`.
    pub m: usize,
    pub delta_measured: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub trials: usize,
    pub seed: u64,
    pub ell_override: Option<usize>,
    pub edge_budget: usize,
    pub thresholds: Option<Thresholds>,
    pub partitions: PartitionScheme,
    pub log_base: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub refuted: bool,
    pub epsilon: f64,
    /// `epsilon * sum_i |H_i|`, a lower bound on `E_b val(Phi_b)` for an LDC.
    pub threshold: f64,
    /// `epsilon delta n k`.
    pub eps_delta_n_k: f64,
    pub verdict_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub timestamp: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema_version: u32,
    pub tool_version: String,
    pub kind: CertificateKind,
    pub params: CertificateParams,
    pub instance: EmbeddedInstance,
    pub signs: Vec<Vec<i8>>,
    pub signs_exhaustive: bool,
    pub regular: Option<RegularPart>,
    pub pieces: Vec<BipartitePart>,
    /// Realized combined bound on `val` for each sign vector.
    pub per_b_bound: Vec<f64>,
    pub khintchine_bound: f64,
    /// Mean of `per_b_bound`; exact expectation when the signs are exhaustive.
    pub empirical_bound: f64,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
}

impl Certificate {
    /// Per-b combined bounds recomputed from the stored components.
    pub fn recompute_per_b(&self) -> Vec<f64> {
        let count = self.signs.len();
        let mut out = match &self.regular {
            Some(r) => r.recompute_per_b(count),
            None => vec![0.0; count],
        };
        for piece in &self.pieces {
            for (o, v) in out.iter_mut().zip(piece.recompute_per_b(count)) {
                *o += v;
            }
        }
        out
    }

    /// JSON without the metadata block, for byte comparisons.
    pub fn canonical_json(&self) -> Result<String> {
        let mut c = self.clone();
        c.metadata = None;
        Ok(serde_json::to_string_pretty(&c)?)
    }

    pub fn total_edges(&self) -> usize {
        match &self.instance {
            EmbeddedInstance::Xor(f) => f.hypergraphs.iter().map(Vec::len).sum(),
            EmbeddedInstance::Bipartite(f) => f.hypergraphs.iter().map(Vec::len).sum(),
        }
    }
}

fn signs_for(k: usize, opts: &RefuteOptions) -> (Vec<Vec<i8>>, bool) {
    let limit = if opts.exhaustive_signs && k <= DEFAULT_EXHAUSTIVE_LIMIT {
        k
    } else {
        EXHAUSTIVE_GROUP_LIMIT
    };
    sign_vectors(k, limit, opts.trials, opts.seed)
}

struct Assembly {
    kind: CertificateKind,
    instance: EmbeddedInstance,
    params: CertificateParams,
    signs: Vec<Vec<i8>>,
    exhaustive: bool,
    regular: Option<RegularPart>,
    pieces: Vec<BipartitePart>,
    warnings: Vec<String>,
}

fn finish(a: Assembly) -> Certificate {
    let count = a.signs.len();
    let mut per_b = match &a.regular {
        Some(r) => r.per_b.clone(),
        None => vec![0.0; count],
    };
    for piece in &a.pieces {
        for (o, v) in per_b.iter_mut().zip(&piece.per_b) {
            *o += v;
        }
    }
    let khintchine = a.regular.as_ref().map_or(0.0, |r| r.khintchine_bound)
        + a.pieces.iter().map(|p| p.khintchine_bound).sum::<f64>();
    let empirical = mean(&per_b);
    let certified_empirical = a.exhaustive && a.regular.as_ref().is_none_or(|r| r.certified_partitions);
    let verdict_bound = if certified_empirical {
        khintchine.min(empirical)
    } else {
        khintchine
    };
    let total: usize = match &a.instance {
        EmbeddedInstance::Xor(f) => f.hypergraphs.iter().map(Vec::len).sum(),
        EmbeddedInstance::Bipartite(f) => f.hypergraphs.iter().map(Vec::len).sum(),
    };
    let p = &a.params;
    let threshold = p.epsilon * total as f64;
    let verdict = Verdict {
        refuted: verdict_bound < threshold,
        epsilon: p.epsilon,
        threshold,
        eps_delta_n_k: p.epsilon * p.delta_measured * p.n as f64 * p.k as f64,
        verdict_bound,
    };
    Certificate {
        schema_version: SCHEMA_VERSION,
        tool_version: crate::TOOL_VERSION.to_string(),
        kind: a.kind,
        params: a.params,
        instance: a.instance,
        signs: a.signs,
        signs_exhaustive: a.exhaustive,
        regular: a.regular,
        pieces: a.pieces,
        per_b_bound: per_b,
        khintchine_bound: khintchine,
        empirical_bound: empirical,
        verdict,
        warnings: a.warnings,
        metadata: None,
    }
}

fn params_for(n: usize, k: usize, q: usize, s: Option<usize>, m: usize, thr: Option<Thresholds>, opts: &RefuteOptions) -> CertificateParams {
    CertificateParams {
        n,
        k,
        q,
        s,
        m,
        delta_measured: if n == 0 { 0.0 } else { m as f64 / n as f64 },
        epsilon: opts.epsilon,
        gamma: opts.gamma,
        trials: opts.trials,
        seed: opts.seed,
        ell_override: opts.ell,
        edge_budget: opts.edge_budget,
        thresholds: thr,
        partitions: opts.partitions.clone(),
        log_base: "natural".into(),
    }
}

fn measured_thresholds(inst: &XorInstance) -> Result<Option<Thresholds>> {
    let m = inst.max_matching_size();
    if m == 0 {
        return Ok(None);
    }
    compute_thresholds(inst.n, inst.k(), inst.q, m as f64 / inst.n as f64).map(Some)
}

fn check_odd(q: usize) -> Result<()> {
    if q < 3 || q.is_multiple_of(2) {
        return Err(Error::InvalidParameters(format!("refutation needs odd q >= 3, got q = {q}")));
    }
    Ok(())
}

/// Cauchy–Schwarz refutation of an instance that already satisfies the regularity condition.
pub fn refute_regular(inst: &XorInstance, opts: &RefuteOptions) -> Result<Certificate> {
    check_odd(inst.q)?;
    inst.validate()?;
    let thr = measured_thresholds(inst)?;
    if let Some(t) = &thr {
        check_regular(inst, t)?;
    }
    let (signs, exhaustive) = signs_for(inst.k(), opts);
    let mut warnings = Vec::new();
    let formula = thr.as_ref().map_or(1, |t| t.ell);
    let regular = regular_part(inst, formula, opts, &signs, &mut warnings)?;
    Ok(finish(Assembly {
        kind: CertificateKind::Regular,
        instance: EmbeddedInstance::Xor(InstanceFile::from_instance(inst)),
        params: params_for(inst.n, inst.k(), inst.q, None, inst.max_matching_size(), thr, opts),
        signs,
        exhaustive,
        regular: Some(regular),
        pieces: Vec::new(),
        warnings,
    }))
}

/// Refutation of one bipartite piece; the level defaults to the threshold formula on the piece.
pub fn refute_bipartite(piece: &BipartiteXorInstance, opts: &RefuteOptions) -> Result<Certificate> {
    check_odd(piece.q)?;
    piece.validate()?;
    let m = piece.max_matching_size();
    let thr = if m == 0 {
        None
    } else {
        Some(compute_thresholds(piece.n, piece.k(), piece.q, m as f64 / piece.n as f64)?)
    };
    let (signs, exhaustive) = signs_for(piece.k(), opts);
    let mut warnings = Vec::new();
    let formula = thr.as_ref().map_or(1, |t| t.ell);
    let part = bipartite_part(piece, formula, None, opts, &signs, &mut warnings)?;
    Ok(finish(Assembly {
        kind: CertificateKind::Bipartite,
        instance: EmbeddedInstance::Bipartite(BipartiteFile::from_instance(piece)),
        params: params_for(piece.n, piece.k(), piece.q, Some(piece.s), m, thr, opts),
        signs,
        exhaustive,
        regular: None,
        pieces: vec![part],
        warnings,
    }))
}

/// Decomposes, refutes the regular leftover and every bipartite piece, and sums the bounds.
pub fn refute_full(inst: &XorInstance, opts: &RefuteOptions) -> Result<Certificate> {
    check_odd(inst.q)?;
    inst.validate()?;
    let (signs, exhaustive) = signs_for(inst.k(), opts);
    let m = inst.max_matching_size();
    let thr = measured_thresholds(inst)?;
    let mut warnings = Vec::new();
    let (regular, pieces) = match &thr {
        None => (
            regular_part(inst, 1, opts, &signs, &mut warnings)?,
            Vec::new(),
        ),
        Some(t) => {
            let dec = decompose(inst, t)?;
            if let Err(e) = check_regular(&dec.leftover, t) {
                warnings.push(format!("leftover failed the regularity check: {e}"));
            }
            let regular = regular_part(&dec.leftover, t.ell, opts, &signs, &mut warnings)?;
            let mut pieces = Vec::new();
            for piece in dec.pieces.values() {
                pieces.push(bipartite_part(piece, t.ell, Some(t), opts, &signs, &mut warnings)?);
            }
            (regular, pieces)
        }
    };
    Ok(finish(Assembly {
        kind: CertificateKind::Combined,
        instance: EmbeddedInstance::Xor(InstanceFile::from_instance(inst)),
        params: params_for(inst.n, inst.k(), inst.q, None, m, thr, opts),
        signs,
        exhaustive,
        regular: Some(regular),
        pieces,
        warnings,
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundnessEntry {
    pub b: Vec<i8>,
    pub val: i64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub entries: Vec<SoundnessEntry>,
    /// Stored per-b bounds agree with the recomputation from components.
    pub consistent: bool,
    pub passed: bool,
}

/// For every sign vector of the certificate, recomputes the realized bound
/// from the stored components and compares it with the brute-force value.
pub fn soundness_check(cert: &Certificate, limit: usize) -> Result<SoundnessReport> {
    let bounds = cert.recompute_per_b();
    let consistent = bounds.len() == cert.per_b_bound.len()
        && bounds
            .iter()
            .zip(&cert.per_b_bound)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0));
    enum Oracle {
        Xor(XorInstance),
        Bip(BipartiteXorInstance),
    }
    let oracle = match &cert.instance {
        EmbeddedInstance::Xor(f) => Oracle::Xor(f.to_instance()?),
        EmbeddedInstance::Bipartite(f) => Oracle::Bip(f.to_instance()?),
    };
    let entries = cert
        .signs
        .par_iter()
        .zip(bounds.par_iter())
        .map(|(b, &bound)| {
            let val = match &oracle {
                Oracle::Xor(inst) => brute_force_val(inst, b, limit)?.value,
                Oracle::Bip(inst) => brute_force_val_bipartite(inst, b, limit)?.value,
            };
            Ok(SoundnessEntry {
                b: b.clone(),
                val,
                bound,
                ok: bound * (1.0 + SOUNDNESS_GUARD) >= val as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = consistent && entries.iter().all(|e| e.ok);
    Ok(SoundnessReport {
        entries,
        consistent,
        passed,
    })
}

pub fn soundness_check_default(cert: &Certificate) -> Result<SoundnessReport> {
    soundness_check(cert, DEFAULT_EXHAUSTIVE_LIMIT)
}
