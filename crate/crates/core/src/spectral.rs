//! Spectral norms of sparse matrices, the matrix Khintchine bound and
//! Monte Carlo estimates of expected Rademacher-series norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{mean_stderr, random_signs, signs_from_index};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_TRIALS: usize = 200;
/// `estimate_expected_norm` enumerates all sign vectors up to this many groups.
pub const EXHAUSTIVE_GROUP_LIMIT: usize = 12;
/// Gram matrices up to this side length are diagonalized directly.
const DENSE_GRAM_LIMIT: usize = 96;
const PAR_ROWS: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_parts(nrows: usize, ncols: usize, indptr: Vec<usize>, indices: Vec<u32>, values: Vec<f64>) -> Self {
        assert_eq!(indptr.len(), nrows + 1);
        assert_eq!(indices.len(), values.len());
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices: Vec<u32> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last = None;
        for (r, c, v) in sorted {
            assert!(r < nrows && c < ncols, "triplet out of range");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c as u32);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix::from_parts(nrows, ncols, indptr, indices, values).pruned_zeros()
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix::from_parts(nrows, ncols, vec![0; nrows + 1], Vec::new(), Vec::new())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Drops explicitly stored zeros.
    pub fn pruned_zeros(self) -> Self {
        if self.values.iter().all(|&v| v != 0.0) {
            return self;
        }
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.nrows {
            for idx in self.indptr[r]..self.indptr[r + 1] {
                if self.values[idx] != 0.0 {
                    indices.push(self.indices[idx]);
                    values.push(self.values[idx]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        CsrMatrix::from_parts(self.nrows, self.ncols, indptr, indices, values)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |idx| (r, self.indices[idx] as usize, self.values[idx]))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            out[r][c] += v;
        }
        out
    }

    /// `A v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.ncols);
        let row = |r: usize| -> f64 {
            (self.indptr[r]..self.indptr[r + 1])
                .map(|idx| self.values[idx] * v[self.indices[idx] as usize])
                .sum()
        };
        if self.nrows >= PAR_ROWS {
            (0..self.nrows).into_par_iter().map(row).collect()
        } else {
            (0..self.nrows).map(row).collect()
        }
    }

    /// `A^T v`.
    pub fn matvec_transpose(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            let vr = v[r];
            if vr == 0.0 {
                continue;
            }
            for idx in self.indptr[r]..self.indptr[r + 1] {
                out[self.indices[idx] as usize] += self.values[idx] * vr;
            }
        }
        out
    }

    pub fn row_l1(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| self.values[self.indptr[r]..self.indptr[r + 1]].iter().map(|v| v.abs()).sum())
            .collect()
    }

    pub fn col_l1(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (_, c, v) in self.triplets() {
            out[c] += v.abs();
        }
        out
    }

    pub fn max_row_l1(&self) -> f64 {
        self.row_l1().into_iter().fold(0.0, f64::max)
    }

    pub fn max_col_l1(&self) -> f64 {
        self.col_l1().into_iter().fold(0.0, f64::max)
    }

    /// `sqrt(max row L1 * max col L1)`, an upper bound on the spectral norm.
    pub fn schur_bound(&self) -> f64 {
        (self.max_row_l1() * self.max_col_l1()).sqrt()
    }

    /// `sum_i c_i M_i` over matrices of equal shape.
    pub fn linear_combination(mats: &[CsrMatrix], coeffs: &[f64]) -> Result<CsrMatrix> {
        let Some(first) = mats.first() else {
            return Err(Error::InvalidParameters("empty linear combination".into()));
        };
        if mats.len() != coeffs.len() {
            return Err(Error::Dimension {
                what: "coefficients",
                got: coeffs.len(),
                expected: mats.len(),
            });
        }
        let (nr, nc) = (first.nrows, first.ncols);
        let mut triplets = Vec::new();
        for (m, &c) in mats.iter().zip(coeffs) {
            if m.nrows != nr || m.ncols != nc {
                return Err(Error::Dimension {
                    what: "group matrix rows",
                    got: m.nrows,
                    expected: nr,
                });
            }
            triplets.extend(m.triplets().map(|(r, col, v)| (r, col, c * v)));
        }
        Ok(CsrMatrix::from_triplets(nr, nc, &triplets))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    DenseExact,
    PowerIteration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub method: NormMethod,
    pub iterations: usize,
    /// `||M v - lambda v|| / lambda` for the returned eigenpair of the Gram matrix.
    pub residual: f64,
    pub tolerance: f64,
    pub converged: bool,
    /// Rayleigh quotients never decreased across iterations.
    pub monotone: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct NormOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Use the dense Gram eigen-solver when the smaller side is small enough.
    pub allow_dense: bool,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0x5eed,
            allow_dense: true,
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct PowerResult {
    lambda: f64,
    iterations: usize,
    residual: f64,
    converged: bool,
    monotone: bool,
}

/// Top eigenvalue of a PSD operator by power iteration from `start`.
fn power_psd<F>(op: &F, start: Vec<f64>, tol: f64, max_iters: usize) -> PowerResult
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut v = start;
    let nv = norm2(&v);
    if nv == 0.0 {
        return PowerResult {
            lambda: 0.0,
            iterations: 0,
            residual: 0.0,
            converged: true,
            monotone: true,
        };
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut w = op(&v);
    let mut lambda = dot(&v, &w);
    let mut monotone = true;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iters {
        let nw = norm2(&w);
        if nw == 0.0 {
            return PowerResult {
                lambda: 0.0,
                iterations: it,
                residual: 0.0,
                converged: true,
                monotone,
            };
        }
        residual = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt() / lambda.max(f64::MIN_POSITIVE);
        if residual <= tol {
            return PowerResult {
                lambda,
                iterations: it,
                residual,
                converged: true,
                monotone,
            };
        }
        v = w.iter().map(|x| x / nw).collect();
        w = op(&v);
        let next = dot(&v, &w);
        if next < lambda * (1.0 - 1e-12) {
            monotone = false;
        }
        lambda = next;
    }
    PowerResult {
        lambda,
        iterations: max_iters,
        residual,
        converged: false,
        monotone,
    }
}

/// Largest eigenvalue of a symmetric dense matrix by cyclic Jacobi rotations.
fn jacobi_top_eigenvalue(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::NEG_INFINITY, f64::max)
}

fn random_unit_start(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Top eigenvalue of a PSD operator on `R^dim`: all-ones start plus one seeded random restart.
pub fn psd_top_eigenvalue<F>(dim: usize, op: F, opts: &NormOptions) -> (f64, NormEstimate)
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let a = power_psd(&op, vec![1.0; dim], opts.tol, opts.max_iters);
    let b = power_psd(&op, random_unit_start(dim, opts.seed), opts.tol, opts.max_iters);
    let best = if b.lambda > a.lambda { &b } else { &a };
    let lambda = best.lambda.max(0.0);
    (
        lambda,
        NormEstimate {
            value: lambda,
            method: NormMethod::PowerIteration,
            iterations: a.iterations + b.iterations,
            residual: best.residual,
            tolerance: opts.tol,
            converged: a.converged && b.converged,
            monotone: a.monotone && b.monotone,
        },
    )
}

/// Power iteration on `A^T A` only, regardless of size.
pub fn power_iteration_norm(a: &CsrMatrix, opts: &NormOptions) -> NormEstimate {
    let (lambda, mut est) = psd_top_eigenvalue(a.ncols(), |v| a.matvec_transpose(&a.matvec(v)), opts);
    est.value = lambda.sqrt();
    est
}

fn gram_dense(a: &CsrMatrix) -> Vec<Vec<f64>> {
    let dense = a.to_dense();
    if a.nrows() <= a.ncols() {
        (0..a.nrows())
            .map(|i| (0..a.nrows()).map(|j| dot(&dense[i], &dense[j])).collect())
            .collect()
    } else {
        (0..a.ncols())
            .map(|i| (0..a.ncols()).map(|j| (0..a.nrows()).map(|r| dense[r][i] * dense[r][j]).sum()).collect())
            .collect()
    }
}

/// `||A||_2`. Small matrices go through a dense Gram eigen-solve; the rest
/// through power iteration on `A^T A`.
pub fn spectral_norm(a: &CsrMatrix, opts: &NormOptions) -> NormEstimate {
    if a.nnz() == 0 {
        return NormEstimate {
            value: 0.0,
            method: NormMethod::DenseExact,
            iterations: 0,
            residual: 0.0,
            tolerance: opts.tol,
            converged: true,
            monotone: true,
        };
    }
    let est = if opts.allow_dense && a.nrows().min(a.ncols()) <= DENSE_GRAM_LIMIT {
        NormEstimate {
            value: jacobi_top_eigenvalue(gram_dense(a)).max(0.0).sqrt(),
            method: NormMethod::DenseExact,
            iterations: 0,
            residual: 0.0,
            tolerance: opts.tol,
            converged: true,
            monotone: true,
        }
    } else {
        power_iteration_norm(a, opts)
    };
    debug_assert!(est.value <= a.schur_bound() * (1.0 + 1e-9) + 1e-12);
    est
}

/// `max_{unit v, w} |v^T A w|` lower-bounded by random probes.
pub fn probe_lower_bound(a: &CsrMatrix, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..probes {
        let w: Vec<f64> = (0..a.ncols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..a.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (nv, nw) = (norm2(&v), norm2(&w));
        if nv > 0.0 && nw > 0.0 {
            best = best.max(dot(&v, &a.matvec(&w)).abs() / (nv * nw));
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaReport {
    pub sigma2: f64,
    /// `||sum_i B_i B_i^T||_2`.
    pub row_gram: f64,
    /// `||sum_i B_i^T B_i||_2`.
    pub col_gram: f64,
    /// `k * max row degree * max column degree`.
    pub proxy: f64,
    pub converged: bool,
}

/// `sigma^2 = max(||sum B_i B_i^T||, ||sum B_i^T B_i||)` over group matrices of equal shape.
pub fn khintchine_sigma(groups: &[CsrMatrix], opts: &NormOptions) -> Result<SigmaReport> {
    let Some(first) = groups.first() else {
        return Ok(SigmaReport {
            sigma2: 0.0,
            row_gram: 0.0,
            col_gram: 0.0,
            proxy: 0.0,
            converged: true,
        });
    };
    let (nr, nc) = (first.nrows(), first.ncols());
    if let Some(bad) = groups.iter().find(|g| g.nrows() != nr || g.ncols() != nc) {
        return Err(Error::Dimension {
            what: "group matrix shape",
            got: bad.nrows(),
            expected: nr,
        });
    }
    let row_op = |v: &[f64]| {
        let mut out = vec![0.0; nr];
        for g in groups {
            for (o, x) in out.iter_mut().zip(g.matvec(&g.matvec_transpose(v))) {
                *o += x;
            }
        }
        out
    };
    let col_op = |v: &[f64]| {
        let mut out = vec![0.0; nc];
        for g in groups {
            for (o, x) in out.iter_mut().zip(g.matvec_transpose(&g.matvec(v))) {
                *o += x;
            }
        }
        out
    };
    let (row_gram, re) = psd_top_eigenvalue(nr, row_op, opts);
    let (col_gram, ce) = psd_top_eigenvalue(nc, col_op, opts);
    let max_row = groups.iter().map(CsrMatrix::max_row_l1).fold(0.0, f64::max);
    let max_col = groups.iter().map(CsrMatrix::max_col_l1).fold(0.0, f64::max);
    Ok(SigmaReport {
        sigma2: row_gram.max(col_gram),
        row_gram,
        col_gram,
        proxy: groups.len() as f64 * max_row * max_col,
        converged: re.converged && ce.converged,
    })
}

/// `sqrt(2 sigma^2 ln(d1 + d2))`.
pub fn khintchine_bound(sigma2: f64, d1: f64, d2: f64) -> f64 {
    (2.0 * sigma2 * (d1 + d2).ln()).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedNorm {
    pub mean: f64,
    pub stderr: f64,
    pub exhaustive: bool,
    pub samples: usize,
    pub all_converged: bool,
}

/// Sign vectors used for an expectation over `k` Rademacher signs: all `2^k`
/// when `k <= limit`, else `trials` draws with per-trial seeds.
pub fn sign_vectors(k: usize, limit: usize, trials: usize, seed: u64) -> (Vec<Vec<i8>>, bool) {
    if k <= limit {
        ((0..1u64 << k).map(|idx| signs_from_index(idx, k)).collect(), true)
    } else {
        let draws = (0..trials as u64)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ t.wrapping_mul(0x9e37_79b9_7f4a_7c15));
                random_signs(&mut rng, k)
            })
            .collect();
        (draws, false)
    }
}

/// `E_b ||sum_i b_i B_i||_2`.
pub fn estimate_expected_norm(groups: &[CsrMatrix], trials: usize, seed: u64, opts: &NormOptions) -> Result<ExpectedNorm> {
    if trials == 0 {
        return Err(Error::InvalidParameters("trials must be >= 1".into()));
    }
    if groups.is_empty() {
        return Ok(ExpectedNorm {
            mean: 0.0,
            stderr: 0.0,
            exhaustive: true,
            samples: 1,
            all_converged: true,
        });
    }
    let (draws, exhaustive) = sign_vectors(groups.len(), EXHAUSTIVE_GROUP_LIMIT, trials, seed);
    let results = draws
        .par_iter()
        .map(|b| {
            let coeffs: Vec<f64> = b.iter().map(|&s| s as f64).collect();
            CsrMatrix::linear_combination(groups, &coeffs).map(|m| spectral_norm(&m, opts))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = results.iter().map(|e| e.value).collect();
    let (mean, stderr) = if exhaustive {
        (values.iter().sum::<f64>() / values.len() as f64, 0.0)
    } else {
        mean_stderr(&values)
    };
    Ok(ExpectedNorm {
        mean,
        stderr,
        exhaustive,
        samples: values.len(),
        all_converged: results.iter().all(|e| e.converged),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn permutation_has_norm_one() {
        let t: Vec<_> = (0..7).map(|i| (i, (3 * i + 1) % 7, 1.0)).collect();
        let m = CsrMatrix::from_triplets(7, 7, &t);
        assert!(close(spectral_norm(&m, &NormOptions::default()).value, 1.0, 1e-12));
        assert!(close(power_iteration_norm(&m, &NormOptions::default()).value, 1.0, 1e-9));
    }

    #[test]
    fn all_ones_block() {
        let t: Vec<_> = (0..3).flat_map(|r| (0..5).map(move |c| (r + 1, c + 2, 1.0))).collect();
        let m = CsrMatrix::from_triplets(6, 9, &t);
        let expect = 15f64.sqrt();
        assert!(close(spectral_norm(&m, &NormOptions::default()).value, expect, 1e-12));
        let p = power_iteration_norm(&m, &NormOptions::default());
        assert!(close(p.value, expect, 1e-9) && p.converged && p.monotone);
    }

    #[test]
    fn jacobi_diagonalizes_known_matrix() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        assert!(close(jacobi_top_eigenvalue(vec![vec![2.0, 1.0], vec![1.0, 2.0]]), 3.0, 1e-14));
    }

    #[test]
    fn sigma_examples() {
        let single = CsrMatrix::from_triplets(3, 3, &[(0, 1, 1.0)]);
        let r = khintchine_sigma(&[single], &NormOptions::default()).unwrap();
        assert!(close(r.sigma2, 1.0, 1e-9));
        // k groups each the same perfect matching: sum B B^T = k I
        let k = 4;
        let groups: Vec<_> = (0..k).map(|_| CsrMatrix::from_triplets(3, 3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)])).collect();
        let r = khintchine_sigma(&groups, &NormOptions::default()).unwrap();
        assert!(close(r.sigma2, k as f64, 1e-9));
        assert!(r.proxy >= r.sigma2 * (1.0 - 1e-9));
    }

    #[test]
    fn khintchine_bound_values() {
        assert!(close(khintchine_bound(1.0, 1.0, 1.0), (2.0 * 2f64.ln()).sqrt(), 1e-15));
        assert_eq!(khintchine_bound(0.0, 3.0, 4.0), 0.0);
        assert!(close(khintchine_bound(4.0, 3.0, 4.0), 2.0 * khintchine_bound(1.0, 3.0, 4.0), 1e-15));
    }

    #[test]
    fn expected_norm_sign_cases() {
        let b = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 2, 2.0), (0, 2, 1.0)]);
        let nb = spectral_norm(&b, &NormOptions::default()).value;
        let one = estimate_expected_norm(std::slice::from_ref(&b), 10, 1, &NormOptions::default()).unwrap();
        assert!(close(one.mean, nb, 1e-12) && one.stderr == 0.0);
        // B and B: sign patterns give 2B, 0, 0, -2B
        let two = estimate_expected_norm(&[b.clone(), b.clone()], 10, 1, &NormOptions::default()).unwrap();
        assert!(close(two.mean, nb, 1e-12));
    }

    #[test]
    fn probes_never_exceed_norm() {
        let t = [(0, 0, 1.0), (0, 1, -2.0), (1, 1, 0.5), (2, 0, 3.0)];
        let m = CsrMatrix::from_triplets(3, 2, &t);
        let nrm = spectral_norm(&m, &NormOptions::default()).value;
        assert!(probe_lower_bound(&m, 50, 3) <= nrm * (1.0 + 1e-12));
        assert!(nrm <= m.schur_bound() * (1.0 + 1e-12));
    }
}
