//! XOR instances built from hypergraph matchings.
//!
//! Two shapes are supported: the `q`-uniform instance whose polynomial is
//! `Phi_b(x) = sum_i b_i sum_{C in H_i} prod_{v in C} x_v`, and the bipartite
//! instance produced by heavy-set decomposition, where each hyperedge `(C, p)`
//! carries an extra label variable `y_p`.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sets::VertexSet;

/// Default cap on the number of variables scanned by the brute-force oracle.
pub const DEFAULT_EXHAUSTIVE_LIMIT: usize = 24;

/// `expected_val` enumerates every sign vector when `k` is at most this.
pub const EXHAUSTIVE_SIGN_LIMIT: usize = 16;

pub type Hyperedge = VertexSet;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypergraphMatching {
    pub edges: Vec<Hyperedge>,
}

/// First pair of intersecting edges found by [`validate_matching`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchingViolation {
    pub first: usize,
    pub second: usize,
    pub vertex: u32,
}

impl HypergraphMatching {
    pub fn new(edges: Vec<Hyperedge>) -> Self {
        HypergraphMatching { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Hyperedge> {
        self.edges.iter()
    }
}

/// Checks pairwise disjointness; on failure names the colliding pair.
pub fn validate_matching(h: &HypergraphMatching) -> std::result::Result<(), MatchingViolation> {
    let mut owner = std::collections::HashMap::new();
    for (idx, edge) in h.edges.iter().enumerate() {
        for v in edge.iter() {
            if let Some(&first) = owner.get(&v) {
                return Err(MatchingViolation {
                    first,
                    second: idx,
                    vertex: v,
                });
            }
            owner.insert(v, idx);
        }
    }
    Ok(())
}

/// Number of hyperedges containing `q`, counted with multiplicity.
pub fn degree<'a, I>(edges: I, q: &VertexSet) -> usize
where
    I: IntoIterator<Item = &'a Hyperedge>,
{
    edges.into_iter().filter(|c| q.is_subset(c)).count()
}

fn check_signs(signs: &[i8], k: usize) -> Result<()> {
    if signs.len() != k {
        return Err(Error::Dimension {
            what: "signs",
            got: signs.len(),
            expected: k,
        });
    }
    if signs.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidParameters("signs must be +1 or -1".into()));
    }
    Ok(())
}

/// Sign vector whose `i`-th entry is `-1` iff bit `i` of `index` is set.
pub fn signs_from_index(index: u64, k: usize) -> Vec<i8> {
    (0..k).map(|i| if index >> i & 1 == 1 { -1 } else { 1 }).collect()
}

pub fn random_signs<R: Rng>(rng: &mut R, k: usize) -> Vec<i8> {
    (0..k).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XorInstance {
    pub n: usize,
    pub q: usize,
    pub delta: f64,
    pub hypergraphs: Vec<HypergraphMatching>,
    pub signs: Option<Vec<i8>>,
}

impl XorInstance {
    /// Validates uniformity, index range and the matching property.
    pub fn new(
        n: usize,
        q: usize,
        delta: f64,
        hypergraphs: Vec<HypergraphMatching>,
        signs: Option<Vec<i8>>,
    ) -> Result<Self> {
        let inst = XorInstance {
            n,
            q,
            delta,
            hypergraphs,
            signs,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidInstance("q must be positive".into()));
        }
        for (i, h) in self.hypergraphs.iter().enumerate() {
            for c in h.iter() {
                if c.len() != self.q {
                    return Err(Error::InvalidInstance(format!(
                        "hyperedge {c:?} of H_{} has size {}, expected {}",
                        i + 1,
                        c.len(),
                        self.q
                    )));
                }
                if c.last().is_some_and(|m| m as usize >= self.n) {
                    return Err(Error::InvalidInstance(format!(
                        "hyperedge {c:?} of H_{} leaves [n]",
                        i + 1
                    )));
                }
            }
            if let Err(v) = validate_matching(h) {
                return Err(Error::InvalidInstance(format!(
                    "H_{} is not a matching: edges {} and {} share vertex {}",
                    i + 1,
                    v.first + 1,
                    v.second + 1,
                    v.vertex + 1
                )));
            }
        }
        if let Some(b) = &self.signs {
            check_signs(b, self.k())?;
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.hypergraphs.len()
    }

    pub fn total_edges(&self) -> usize {
        self.hypergraphs.iter().map(HypergraphMatching::len).sum()
    }

    pub fn max_matching_size(&self) -> usize {
        self.hypergraphs.iter().map(HypergraphMatching::len).max().unwrap_or(0)
    }

    /// `max_i |H_i| / n`, the measured matching density.
    pub fn measured_delta(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.max_matching_size() as f64 / self.n as f64
        }
    }

    pub fn all_edges(&self) -> impl Iterator<Item = &Hyperedge> {
        self.hypergraphs.iter().flat_map(|h| h.iter())
    }

    /// Signed monomials of `Phi_b` over the `n` variables.
    fn monomials(&self, b: &[i8]) -> Vec<(i64, Vec<usize>)> {
        let mut terms = Vec::with_capacity(self.total_edges());
        for (i, h) in self.hypergraphs.iter().enumerate() {
            for c in h.iter() {
                terms.push((b[i] as i64, c.iter().map(|v| v as usize).collect()));
            }
        }
        terms
    }
}

/// Exact value of `Phi_b(x)`.
pub fn eval_phi(inst: &XorInstance, b: &[i8], x: &[i8]) -> Result<i64> {
    check_signs(b, inst.k())?;
    if x.len() != inst.n {
        return Err(Error::Dimension {
            what: "x",
            got: x.len(),
            expected: inst.n,
        });
    }
    let mut total = 0i64;
    for (i, h) in inst.hypergraphs.iter().enumerate() {
        for c in h.iter() {
            total += b[i] as i64 * monomial(x, c);
        }
    }
    Ok(total)
}

pub(crate) fn monomial(x: &[i8], set: &VertexSet) -> i64 {
    set.iter().fold(1i64, |acc, v| acc * x[v as usize] as i64)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BipartiteHyperedge {
    pub left: VertexSet,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BipartiteXorInstance {
    pub n: usize,
    pub q: usize,
    pub s: usize,
    pub delta: f64,
    /// Label `p` is the heavy `s`-subset `registry[p]` of `[n]`.
    pub registry: Vec<VertexSet>,
    pub hypergraphs: Vec<Vec<BipartiteHyperedge>>,
    pub signs: Option<Vec<i8>>,
}

impl BipartiteXorInstance {
    pub fn validate(&self) -> Result<()> {
        if self.q < self.s {
            return Err(Error::InvalidInstance(format!(
                "s = {} exceeds q = {}",
                self.s, self.q
            )));
        }
        let mut seen = HashSet::new();
        for p in &self.registry {
            if p.len() != self.s || p.last().is_some_and(|m| m as usize >= self.n) {
                return Err(Error::InvalidInstance(format!("bad registry label {p:?}")));
            }
            if !seen.insert(p.clone()) {
                return Err(Error::InvalidInstance(format!("duplicate registry label {p:?}")));
            }
        }
        for (i, h) in self.hypergraphs.iter().enumerate() {
            let mut used_vertices = HashSet::new();
            let mut used_labels = HashSet::new();
            for e in h {
                if e.label >= self.registry.len() {
                    return Err(Error::UnknownLabel {
                        label: e.label,
                        len: self.registry.len(),
                    });
                }
                if e.left.len() != self.q - self.s
                    || e.left.last().is_some_and(|m| m as usize >= self.n)
                {
                    return Err(Error::InvalidInstance(format!(
                        "bipartite hyperedge {:?} of H_{} has a bad left side",
                        e.left,
                        i + 1
                    )));
                }
                if !used_labels.insert(e.label) || !e.left.iter().all(|v| used_vertices.insert(v)) {
                    return Err(Error::InvalidInstance(format!(
                        "H_{}^({}) is not a bipartite matching",
                        i + 1,
                        self.s
                    )));
                }
            }
        }
        if let Some(b) = &self.signs {
            check_signs(b, self.k())?;
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.hypergraphs.len()
    }

    pub fn num_labels(&self) -> usize {
        self.registry.len()
    }

    pub fn total_edges(&self) -> usize {
        self.hypergraphs.iter().map(Vec::len).sum()
    }

    pub fn max_matching_size(&self) -> usize {
        self.hypergraphs.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.total_edges() == 0
    }

    /// Monomials over `n + |P_s|` variables; label `p` is variable `n + p`.
    fn monomials(&self, b: &[i8]) -> Vec<(i64, Vec<usize>)> {
        let mut terms = Vec::with_capacity(self.total_edges());
        for (i, h) in self.hypergraphs.iter().enumerate() {
            for e in h {
                let mut vars: Vec<usize> = e.left.iter().map(|v| v as usize).collect();
                vars.push(self.n + e.label);
                terms.push((b[i] as i64, vars));
            }
        }
        terms
    }
}

/// Exact value of `Psi^(s)_b(x, y)`.
pub fn eval_psi_bipartite(inst: &BipartiteXorInstance, b: &[i8], x: &[i8], y: &[i8]) -> Result<i64> {
    check_signs(b, inst.k())?;
    if x.len() != inst.n {
        return Err(Error::Dimension {
            what: "x",
            got: x.len(),
            expected: inst.n,
        });
    }
    if y.len() != inst.num_labels() {
        return Err(Error::Dimension {
            what: "y",
            got: y.len(),
            expected: inst.num_labels(),
        });
    }
    let mut total = 0i64;
    for (i, h) in inst.hypergraphs.iter().enumerate() {
        for e in h {
            let yp = *y.get(e.label).ok_or(Error::UnknownLabel {
                label: e.label,
                len: y.len(),
            })?;
            total += b[i] as i64 * yp as i64 * monomial(x, &e.left);
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub x: Vec<i8>,
    pub y: Option<Vec<i8>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleValue {
    pub value: i64,
    pub argmax: Assignment,
}

/// Maximum of a signed multilinear polynomial over `{-1,1}^vars` by a Gray-code scan.
fn max_over_cube(vars: usize, terms: &[(i64, Vec<usize>)]) -> (i64, u64) {
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); vars];
    for (t, (_, vs)) in terms.iter().enumerate() {
        for &v in vs {
            incident[v].push(t);
        }
    }
    let mut current: Vec<i64> = terms.iter().map(|(c, _)| *c).collect();
    let mut value: i64 = current.iter().sum();
    let mut best = value;
    let mut best_mask = 0u64;
    let mut mask = 0u64;
    for step in 1u64..(1u64 << vars) {
        let v = step.trailing_zeros() as usize;
        mask ^= 1 << v;
        for &t in &incident[v] {
            value -= 2 * current[t];
            current[t] = -current[t];
        }
        if value > best {
            best = value;
            best_mask = mask;
        }
    }
    (best, best_mask)
}

fn mask_to_signs(mask: u64, start: usize, len: usize) -> Vec<i8> {
    (start..start + len)
        .map(|v| if mask >> v & 1 == 1 { -1 } else { 1 })
        .collect()
}

/// Exact `val(Phi_b)` by exhaustive scan over `x`.
pub fn brute_force_val(inst: &XorInstance, b: &[i8], limit: usize) -> Result<OracleValue> {
    check_signs(b, inst.k())?;
    if inst.n > limit || inst.n > 63 {
        return Err(Error::ExhaustiveLimit {
            vars: inst.n,
            limit: limit.min(63),
        });
    }
    let (value, mask) = max_over_cube(inst.n, &inst.monomials(b));
    Ok(OracleValue {
        value,
        argmax: Assignment {
            x: mask_to_signs(mask, 0, inst.n),
            y: None,
        },
    })
}

/// Exact `val(Psi^(s)_b)`, maximizing jointly over `(x, y)`.
pub fn brute_force_val_bipartite(
    inst: &BipartiteXorInstance,
    b: &[i8],
    limit: usize,
) -> Result<OracleValue> {
    check_signs(b, inst.k())?;
    let vars = inst.n + inst.num_labels();
    if vars > limit || vars > 63 {
        return Err(Error::ExhaustiveLimit {
            vars,
            limit: limit.min(63),
        });
    }
    let (value, mask) = max_over_cube(vars, &inst.monomials(b));
    Ok(OracleValue {
        value,
        argmax: Assignment {
            x: mask_to_signs(mask, 0, inst.n),
            y: Some(mask_to_signs(mask, inst.n, inst.num_labels())),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedValue {
    pub mean: f64,
    pub stderr: f64,
    pub exhaustive: bool,
    pub samples: usize,
}

pub(crate) fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// `E_b[val(Phi_b)]` over uniform signs: exhaustive for `k <= 16`, else `trials` samples.
pub fn expected_val(inst: &XorInstance, trials: usize, seed: u64, limit: usize) -> Result<ExpectedValue> {
    let k = inst.k();
    let exhaustive = k <= EXHAUSTIVE_SIGN_LIMIT;
    let values: Vec<f64> = if exhaustive {
        (0..1u64 << k)
            .map(|idx| brute_force_val(inst, &signs_from_index(idx, k), limit).map(|v| v.value as f64))
            .collect::<Result<_>>()?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..trials.max(1))
            .map(|_| {
                let b = random_signs(&mut rng, k);
                brute_force_val(inst, &b, limit).map(|v| v.value as f64)
            })
            .collect::<Result<_>>()?
    };
    let (mean, stderr) = if exhaustive {
        (mean_stderr(&values).0, 0.0)
    } else {
        mean_stderr(&values)
    };
    Ok(ExpectedValue {
        mean,
        stderr,
        exhaustive,
        samples: values.len(),
    })
}

fn matching_size(n: usize, q: usize, delta: f64) -> Result<usize> {
    if q == 0 || n == 0 || !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameters(format!(
            "need n, q >= 1 and delta in (0, 1], got n={n}, q={q}, delta={delta}"
        )));
    }
    let m = (delta * n as f64 + 1e-9).floor() as usize;
    if m * q > n {
        return Err(Error::Infeasible(format!(
            "{m} disjoint {q}-sets do not fit in {n} vertices"
        )));
    }
    Ok(m)
}

fn random_matching<R: Rng>(rng: &mut R, n: usize, q: usize, m: usize) -> HypergraphMatching {
    let mut vertices: Vec<u32> = (0..n as u32).collect();
    vertices.shuffle(rng);
    let edges = vertices[..m * q]
        .chunks(q)
        .map(|c| VertexSet::new(c.to_vec()).expect("distinct"))
        .collect();
    HypergraphMatching { edges }
}

/// `k` independent uniform `q`-uniform matchings of size `floor(delta n)`.
pub fn generate_random_matching_instance(
    n: usize,
    q: usize,
    k: usize,
    delta: f64,
    seed: u64,
) -> Result<XorInstance> {
    let m = matching_size(n, q, delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hypergraphs = (0..k).map(|_| random_matching(&mut rng, n, q, m)).collect();
    XorInstance::new(n, q, delta, hypergraphs, None)
}

/// A random bipartite instance: `num_labels` distinct random `s`-subsets as
/// the registry, and per `i` a bipartite matching of `floor(delta n)` edges
/// with disjoint left sets and distinct labels.
pub fn generate_random_bipartite_instance(
    n: usize,
    q: usize,
    s: usize,
    k: usize,
    delta: f64,
    num_labels: usize,
    seed: u64,
) -> Result<BipartiteXorInstance> {
    if s > q {
        return Err(Error::InvalidParameters(format!("s = {s} exceeds q = {q}")));
    }
    let width = q - s;
    let m = if width == 0 {
        (delta * n as f64 + 1e-9).floor() as usize
    } else {
        matching_size(n, width, delta)?
    };
    if m > num_labels {
        return Err(Error::Infeasible(format!(
            "{m} distinct labels needed per matching, registry has {num_labels}"
        )));
    }
    let available = crate::sets::binomial_u64(n as u64, s as u64).unwrap_or(u64::MAX);
    if (num_labels as u64) > available {
        return Err(Error::Infeasible(format!(
            "{num_labels} distinct {s}-subsets of [{n}] do not exist"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut registry = Vec::with_capacity(num_labels);
    let mut seen = HashSet::new();
    let pool: Vec<u32> = (0..n as u32).collect();
    while registry.len() < num_labels {
        let mut pick: Vec<u32> = pool.choose_multiple(&mut rng, s).copied().collect();
        pick.sort_unstable();
        let set = VertexSet::from_sorted(pick);
        if seen.insert(set.clone()) {
            registry.push(set);
        }
    }
    let labels: Vec<usize> = (0..num_labels).collect();
    let hypergraphs = (0..k)
        .map(|_| {
            let lefts = random_matching(&mut rng, n, width.max(1), if width == 0 { 0 } else { m });
            let chosen: Vec<usize> = labels.choose_multiple(&mut rng, m).copied().collect();
            let mut edges: Vec<BipartiteHyperedge> = if width == 0 {
                chosen
                    .into_iter()
                    .map(|label| BipartiteHyperedge {
                        left: VertexSet::empty(),
                        label,
                    })
                    .collect()
            } else {
                lefts
                    .edges
                    .into_iter()
                    .zip(chosen)
                    .map(|(left, label)| BipartiteHyperedge { left, label })
                    .collect()
            };
            edges.sort();
            edges
        })
        .collect();
    let inst = BipartiteXorInstance {
        n,
        q,
        s,
        delta,
        registry,
        hypergraphs,
        signs: None,
    };
    inst.validate()?;
    Ok(inst)
}

/// A linear code `C(b)_v = (-1)^{<G_v, m(b)>}` over GF(2), `m_i = [b_i = -1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedCode {
    pub k: usize,
    pub n: usize,
    /// Row-major `k x n` generator matrix.
    pub generator: Vec<Vec<u8>>,
}

impl PlantedCode {
    pub fn encode(&self, b: &[i8]) -> Vec<i8> {
        (0..self.n)
            .map(|v| {
                let parity = (0..self.k)
                    .filter(|&i| b[i] == -1)
                    .fold(0u8, |acc, i| acc ^ self.generator[i][v]);
                if parity == 1 {
                    -1
                } else {
                    1
                }
            })
            .collect()
    }

    fn column(&self, v: usize) -> u64 {
        (0..self.k).fold(0u64, |acc, i| acc | (self.generator[i][v] as u64) << i)
    }

    pub fn rank(&self) -> usize {
        let mut basis: Vec<u64> = Vec::new();
        for v in 0..self.n {
            let mut c = self.column(v);
            for &bv in &basis {
                c = c.min(c ^ bv);
            }
            if c != 0 {
                basis.push(c);
                basis.sort_unstable_by(|a, b| b.cmp(a));
            }
        }
        basis.len()
    }
}

const PLANTED_ATTEMPTS: usize = 64;
const PLANTED_SUBSET_CAP: u64 = 2_000_000;

/// Random full-rank linear code plus, per message bit `i`, a matching of
/// `q`-sets whose generator columns sum to `e_i`, so `C(b)` satisfies every
/// constraint for every `b`.
pub fn generate_planted_linear_instance(
    n: usize,
    q: usize,
    k: usize,
    delta: f64,
    seed: u64,
) -> Result<(XorInstance, PlantedCode)> {
    let m = matching_size(n, q, delta)?;
    if k > n || k > 63 {
        return Err(Error::Infeasible(format!(
            "a full-rank {k} x {n} generator needs k <= n (and k <= 63)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = crate::sets::binomial_u64(n as u64, q as u64).unwrap_or(u64::MAX);
    for _ in 0..PLANTED_ATTEMPTS {
        let generator: Vec<Vec<u8>> = (0..k)
            .map(|_| (0..n).map(|_| rng.gen_range(0..2u8)).collect())
            .collect();
        let code = PlantedCode { k, n, generator };
        if code.rank() < k {
            continue;
        }
        let columns: Vec<u64> = (0..n).map(|v| code.column(v)).collect();
        let mut supports: Vec<Vec<Vec<u32>>> = vec![Vec::new(); k];
        let mut record = |set: Vec<u32>| {
            let sum = set.iter().fold(0u64, |acc, &v| acc ^ columns[v as usize]);
            if sum.count_ones() == 1 {
                let i = sum.trailing_zeros() as usize;
                supports[i].push(set);
            }
        };
        if total <= PLANTED_SUBSET_CAP {
            for set in crate::sets::combinations(&(0..n as u32).collect::<Vec<_>>(), q) {
                record(set);
            }
        } else {
            let pool: Vec<u32> = (0..n as u32).collect();
            for _ in 0..PLANTED_SUBSET_CAP {
                let mut set: Vec<u32> = pool.choose_multiple(&mut rng, q).copied().collect();
                set.sort_unstable();
                record(set);
            }
            for s in supports.iter_mut() {
                s.sort();
                s.dedup();
            }
        }
        let mut hypergraphs = Vec::with_capacity(k);
        for cands in supports.iter_mut() {
            cands.shuffle(&mut rng);
            let mut used = vec![false; n];
            let mut edges = Vec::with_capacity(m);
            for set in cands.iter() {
                if edges.len() == m {
                    break;
                }
                if set.iter().all(|&v| !used[v as usize]) {
                    set.iter().for_each(|&v| used[v as usize] = true);
                    edges.push(VertexSet::from_sorted(set.clone()));
                }
            }
            if edges.len() < m {
                break;
            }
            hypergraphs.push(HypergraphMatching { edges });
        }
        if hypergraphs.len() == k {
            let inst = XorInstance::new(n, q, delta, hypergraphs, None)?;
            return Ok((inst, code));
        }
    }
    Err(Error::Infeasible(format!(
        "no planted {q}-query code with k={k}, n={n}, matching size {m} found in {PLANTED_ATTEMPTS} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(n: usize, q: usize, hs: Vec<Vec<Vec<u32>>>) -> XorInstance {
        let hypergraphs = hs
            .into_iter()
            .map(|h| HypergraphMatching::new(h.into_iter().map(|e| VertexSet::new(e).unwrap()).collect()))
            .collect();
        XorInstance::new(n, q, 0.25, hypergraphs, None).unwrap()
    }

    #[test]
    fn degree_examples() {
        let h = [VertexSet::from([1, 2, 3]), VertexSet::from([1, 4, 5])];
        assert_eq!(degree(&h, &VertexSet::from([1])), 2);
        assert_eq!(degree(&h, &VertexSet::from([1, 2])), 1);
        assert_eq!(degree(&[], &VertexSet::from([1])), 0);
    }

    #[test]
    fn matching_validation() {
        let ok = HypergraphMatching::new(vec![VertexSet::from([1, 2, 3]), VertexSet::from([4, 5, 6])]);
        assert!(validate_matching(&ok).is_ok());
        let bad = HypergraphMatching::new(vec![VertexSet::from([1, 2, 3]), VertexSet::from([3, 4, 5])]);
        let v = validate_matching(&bad).unwrap_err();
        assert_eq!((v.first, v.second, v.vertex), (0, 1, 3));
        assert!(validate_matching(&HypergraphMatching::default()).is_ok());
    }

    #[test]
    fn phi_examples() {
        let one = inst(3, 3, vec![vec![vec![0, 1, 2]]]);
        assert_eq!(eval_phi(&one, &[1], &[1, 1, 1]).unwrap(), 1);
        assert_eq!(eval_phi(&one, &[-1], &[1, 1, 1]).unwrap(), -1);
        let two = inst(5, 3, vec![vec![vec![0, 1, 2]], vec![vec![0, 3, 4]]]);
        assert_eq!(eval_phi(&two, &[1, 1], &[-1, 1, 1, 1, 1]).unwrap(), -2);
        assert!(matches!(
            eval_phi(&two, &[1], &[1; 5]),
            Err(Error::Dimension { what: "signs", .. })
        ));
        assert!(eval_phi(&two, &[1, 1], &[1; 4]).is_err());
    }

    #[test]
    fn instance_rejects_non_matching() {
        let hs = vec![HypergraphMatching::new(vec![
            VertexSet::from([0, 1, 2]),
            VertexSet::from([2, 3, 4]),
        ])];
        assert!(XorInstance::new(5, 3, 0.5, hs, None).is_err());
    }

    fn single_bipartite(label_sign: i8) -> i64 {
        let bi = BipartiteXorInstance {
            n: 2,
            q: 3,
            s: 2,
            delta: 0.5,
            registry: vec![VertexSet::from([0, 1])],
            hypergraphs: vec![vec![BipartiteHyperedge {
                left: VertexSet::from([0]),
                label: 0,
            }]],
            signs: None,
        };
        bi.validate().unwrap();
        eval_psi_bipartite(&bi, &[1], &[1, 1], &[label_sign]).unwrap()
    }

    #[test]
    fn psi_examples() {
        assert_eq!(single_bipartite(1), 1);
        assert_eq!(single_bipartite(-1), -1);
    }

    #[test]
    fn psi_two_edges_sum() {
        let bi = BipartiteXorInstance {
            n: 4,
            q: 3,
            s: 2,
            delta: 0.5,
            registry: vec![VertexSet::from([0, 1]), VertexSet::from([2, 3])],
            hypergraphs: vec![
                vec![BipartiteHyperedge { left: VertexSet::from([0]), label: 0 }],
                vec![BipartiteHyperedge { left: VertexSet::from([3]), label: 1 }],
            ],
            signs: None,
        };
        bi.validate().unwrap();
        // b = (+1, -1), x_0 = -1, x_3 = +1, y = (+1, -1): (-1) + (-1)(-1)(+1) = 0
        let v = eval_psi_bipartite(&bi, &[1, -1], &[-1, 1, 1, 1], &[1, -1]).unwrap();
        assert_eq!(v, 0);
        // x_0 = +1 makes both monomials +1
        let v = eval_psi_bipartite(&bi, &[1, -1], &[1, 1, 1, 1], &[1, -1]).unwrap();
        assert_eq!(v, 2);
        assert!(matches!(
            eval_psi_bipartite(&bi, &[1, 1], &[1; 4], &[1]),
            Err(Error::Dimension { what: "y", .. })
        ));
    }

    #[test]
    fn brute_force_single_edge() {
        let one = inst(3, 3, vec![vec![vec![0, 1, 2]]]);
        for b in [[1i8], [-1]] {
            let v = brute_force_val(&one, &b, DEFAULT_EXHAUSTIVE_LIMIT).unwrap();
            assert_eq!(v.value, 1);
            assert_eq!(eval_phi(&one, &b, &v.argmax.x).unwrap(), 1);
        }
        let e = expected_val(&one, 10, 0, DEFAULT_EXHAUSTIVE_LIMIT).unwrap();
        assert_eq!(e.mean, 1.0);
        assert!(e.exhaustive);
    }

    #[test]
    fn brute_force_refuses_past_limit() {
        let big = generate_random_matching_instance(30, 3, 2, 0.2, 1).unwrap();
        assert!(matches!(
            brute_force_val(&big, &[1, 1], DEFAULT_EXHAUSTIVE_LIMIT),
            Err(Error::ExhaustiveLimit { vars: 30, .. })
        ));
    }

    #[test]
    fn random_instance_shape_and_determinism() {
        let a = generate_random_matching_instance(12, 3, 4, 0.25, 9).unwrap();
        let b = generate_random_matching_instance(12, 3, 4, 0.25, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.k(), 4);
        for h in &a.hypergraphs {
            assert_eq!(h.len(), 3);
            assert!(validate_matching(h).is_ok());
        }
        assert!(generate_random_matching_instance(12, 3, 2, 1.0, 0).is_err());
    }

    #[test]
    fn planted_instance_satisfied_by_codeword() {
        let (inst, code) = generate_planted_linear_instance(12, 3, 3, 0.25, 4).unwrap();
        assert_eq!(code.rank(), 3);
        let total = inst.total_edges() as i64;
        for idx in 0..8u64 {
            let b = signs_from_index(idx, 3);
            let x = code.encode(&b);
            assert_eq!(eval_phi(&inst, &b, &x).unwrap(), total);
            assert_eq!(brute_force_val(&inst, &b, 24).unwrap().value, total);
        }
        let again = generate_planted_linear_instance(12, 3, 3, 0.25, 4).unwrap();
        assert_eq!(again.0, inst);
    }

    #[test]
    fn random_bipartite_instance_is_valid() {
        let bi = generate_random_bipartite_instance(10, 3, 2, 3, 0.8, 8, 5).unwrap();
        assert_eq!(bi.num_labels(), 8);
        for h in &bi.hypergraphs {
            assert_eq!(h.len(), 8);
        }
        let flat = generate_random_bipartite_instance(6, 5, 3, 2, 0.5, 4, 1).unwrap();
        assert!(flat.hypergraphs.iter().all(|h| h.iter().all(|e| e.left.len() == 2)));
    }
}
