//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::time::Instant;

use kikuchi::decompose::{compute_thresholds, decompose, recombination_check, verify_decomposition};
use kikuchi::instance::{
    brute_force_val, eval_phi, eval_psi_bipartite, generate_planted_linear_instance,
    generate_random_bipartite_instance, generate_random_matching_instance, random_signs, signs_from_index,
    BipartiteXorInstance, XorInstance, DEFAULT_EXHAUSTIVE_LIMIT,
};
use kikuchi::kikuchi::{
    assemble_basic_even, assemble_bipartite, assemble_naive_odd, assemble_regular_cs, basic_even_spaces,
    bipartite_spaces, build_basic_even, build_bipartite, build_naive_odd, build_regular_cs, d_basic_even,
    d_bipartite, d_naive_odd, d_regular_cs, naive_odd_spaces, regular_cs_spaces, KikuchiGraph, VertexSpace,
};
use kikuchi::prune::{analytic_shape, conditional_degree_moment, prune, target_degrees, Side, DEFAULT_GAMMA};
use kikuchi::refute::{
    balanced_partitions, cauchy_schwarz_pairs, eval_f, refute_full, soundness_check, Certificate, PartStatus,
    RefuteOptions,
};
use kikuchi::sets::VertexSet;
use kikuchi::spectral::{
    estimate_expected_norm, khintchine_bound, khintchine_sigma, power_iteration_norm, CsrMatrix, NormOptions,
};
use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn random_set<R: Rng>(rng: &mut R, n: usize, size: usize) -> VertexSet {
    let pool: Vec<u32> = (0..n as u32).collect();
    VertexSet::new(pool.choose_multiple(rng, size).copied().collect()).unwrap()
}

fn all_left(space: &VertexSpace) -> impl Iterator<Item = Vec<VertexSet>> {
    let ranker = space.ranker().unwrap();
    let count = space.cardinality_u64().unwrap();
    (0..count).map(move |r| ranker.unrank(r))
}

/// Oracle edge list: scan the whole left space and test the defining predicate.
fn oracle_edges(
    left: &VertexSpace,
    right: &VertexSpace,
    pred: impl Fn(&[VertexSet]) -> Option<Vec<VertexSet>>,
) -> Vec<(u64, u64)> {
    let (lr, rr) = (left.ranker().unwrap(), right.ranker().unwrap());
    let mut out: Vec<(u64, u64)> = all_left(left)
        .filter_map(|s| {
            pred(&s).map(|t| {
                let sref: Vec<&VertexSet> = s.iter().collect();
                let tref: Vec<&VertexSet> = t.iter().collect();
                (lr.rank(&sref), rr.rank(&tref))
            })
        })
        .collect();
    out.sort_unstable();
    out
}

fn criterion_1() -> Outcome {
    let cases = 600u64;
    let failures: Vec<String> = (0..cases)
        .into_par_iter()
        .filter_map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + case);
            let q = [3usize, 5, 7][rng.gen_range(0..3)];
            let h = (q - 1) / 2;
            let ell = rng.gen_range(h..=3usize.max(h));
            let variant = case % 4;
            let (built, closed, oracle) = match variant {
                0 => {
                    let n = rng.gen_range(q + 1..=14);
                    let c = random_set(&mut rng, n, q - 1);
                    let (l, r) = basic_even_spaces(n, ell);
                    let oracle = oracle_edges(&l, &r, |s| {
                        let t = s[0].symmetric_difference(&c);
                        (t.len() == ell).then(|| vec![t])
                    });
                    (build_basic_even(&c, n, ell).unwrap(), d_basic_even(q - 1, n, ell), oracle)
                }
                1 => {
                    let n = rng.gen_range(q + 1..=14);
                    let c = random_set(&mut rng, n, q);
                    let (l, r) = naive_odd_spaces(n, ell);
                    let oracle = oracle_edges(&l, &r, |s| {
                        let t = s[0].symmetric_difference(&c);
                        (t.len() == ell + 1).then(|| vec![t])
                    });
                    (build_naive_odd(&c, n, ell).unwrap(), d_naive_odd(q, n, ell), oracle)
                }
                2 => {
                    let n = rng.gen_range(q + 1..=12);
                    let c1 = random_set(&mut rng, n, q - 1);
                    let c2 = random_set(&mut rng, n, q - 1);
                    let (l, r) = regular_cs_spaces(n, ell);
                    let oracle = oracle_edges(&l, &r, |s| {
                        let t1 = s[0].symmetric_difference(&c1);
                        let t2 = s[1].symmetric_difference(&c2);
                        (t1.len() == ell && t2.len() == ell).then(|| vec![t1, t2])
                    });
                    (build_regular_cs(&c1, &c2, n, ell).unwrap(), d_regular_cs(q, n, ell), oracle)
                }
                _ => {
                    let n = rng.gen_range(q + 1..=14);
                    let s = rng.gen_range(2..=q.div_ceil(2));
                    let labels = rng.gen_range(1..=8usize);
                    let p = rng.gen_range(0..labels);
                    let c = random_set(&mut rng, n, q - s);
                    let (l, r) = bipartite_spaces(n, ell, s, labels);
                    let p_set = VertexSet::singleton(p as u32);
                    let oracle = oracle_edges(&l, &r, |sv| {
                        let t1 = sv[0].symmetric_difference(&c);
                        (sv[0].intersection_len(&c) == h && t1.len() == ell + 1 - s && !sv[1].contains(p as u32))
                            .then(|| vec![t1, sv[1].union(&p_set)])
                    });
                    (build_bipartite(&c, p, q, s, n, ell, labels).unwrap(), d_bipartite(q, s, n, ell, labels), oracle)
                }
            };
            let ok = BigUint::from(built.len()) == closed && built == oracle;
            (!ok).then(|| format!("case {case} variant {variant}: built {} oracle {} closed {closed}", built.len(), oracle.len()))
        })
        .collect();
    outcome(
        failures.is_empty(),
        format!("{cases} constraints, {} mismatches{}", failures.len(), failures.first().map(|f| format!(": {f}")).unwrap_or_default()),
    )
}

fn random_x<R: Rng>(rng: &mut R, n: usize) -> Vec<i8> {
    random_signs(rng, n)
}

/// Checks per-label and total forms of `graph` with edge count `d` per label.
fn form_identity<R: Rng>(
    graph: &KikuchiGraph,
    rng: &mut R,
    k: usize,
    n: usize,
    labels: usize,
    total: impl Fn(&[i8], &[i8], Option<&[i8]>) -> i64,
) -> bool {
    let d = graph.per_label.to_i64().unwrap();
    (0..100).all(|_| {
        let b = random_signs(rng, k);
        let x = random_x(rng, n);
        let y = random_signs(rng, labels.max(1));
        let y_opt = (labels > 0).then_some(y.as_slice());
        let form = graph.quadratic_form(&b, &x, y_opt).unwrap();
        let per_label_ok = graph
            .labels
            .iter()
            .zip(&form.per_label)
            .all(|(l, &v)| v == d * l.monomial(&x, y_opt));
        per_label_ok && form.total == d * total(&b, &x, y_opt)
    })
}

fn criterion_2() -> Outcome {
    let results: Vec<(String, bool)> = (0..32u64)
        .into_par_iter()
        .flat_map_iter(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(2000 + t);
            let mut out = Vec::new();
            match t % 4 {
                0 | 1 => {
                    let (q, n, ell) = if t % 4 == 0 { (3, 8, 1 + (t as usize / 4) % 2) } else { (5, 10, 2) };
                    let inst = generate_random_matching_instance(n, q, 3, 2.0 / n as f64, t).unwrap();
                    for p in balanced_partitions(inst.k()).into_iter().skip(1).take(2) {
                        let labels = cauchy_schwarz_pairs(&inst, &p);
                        let g = assemble_regular_cs(n, q, inst.k(), labels, ell).unwrap();
                        let ok = form_identity(&g, &mut rng, inst.k(), n, 0, |b, x, _| eval_f(&inst, &p, b, x));
                        out.push((format!("regular q={q} ell={ell}"), ok));
                        let m = inst.max_matching_size();
                        if let Ok(pr) = prune(&g, &target_degrees(&g, m), 1.0) {
                            let ok = form_identity(&pr.graph, &mut rng, inst.k(), n, 0, |b, x, _| eval_f(&inst, &p, b, x));
                            out.push((format!("pruned regular q={q}"), ok));
                        }
                    }
                }
                2 => {
                    let (q, s, n, ell) = [(3, 2, 8, 1), (3, 2, 8, 2), (5, 2, 10, 2), (5, 3, 10, 2)][(t as usize / 4) % 4];
                    let piece = generate_random_bipartite_instance(n, q, s, 3, 2.0 / n as f64, 5, t).unwrap();
                    let g = assemble_bipartite(&piece, ell).unwrap();
                    let labels = piece.num_labels();
                    let ok = form_identity(&g, &mut rng, 3, n, labels, |b, x, y| {
                        eval_psi_bipartite(&piece, b, x, y.unwrap()).unwrap()
                    });
                    out.push((format!("bipartite q={q} s={s} ell={ell}"), ok));
                    let m = piece.max_matching_size();
                    if let Ok(pr) = prune(&g, &target_degrees(&g, m), 1.0) {
                        let ok = form_identity(&pr.graph, &mut rng, 3, n, labels, |b, x, y| {
                            eval_psi_bipartite(&piece, b, x, y.unwrap()).unwrap()
                        });
                        out.push(("pruned bipartite".into(), ok));
                    }
                }
                _ => {
                    let even = generate_random_matching_instance(9, 4, 3, 2.0 / 9.0, t).unwrap();
                    let g = assemble_basic_even(&even, 2).unwrap();
                    let ok = form_identity(&g, &mut rng, 3, 9, 0, |b, x, _| eval_phi(&even, b, x).unwrap());
                    out.push(("basic_even q=4".into(), ok));
                    let odd = generate_random_matching_instance(9, 3, 3, 2.0 / 9.0, t).unwrap();
                    let g = assemble_naive_odd(&odd, 2).unwrap();
                    let ok = form_identity(&g, &mut rng, 3, 9, 0, |b, x, _| eval_phi(&odd, b, x).unwrap());
                    out.push(("naive_odd q=3".into(), ok));
                }
            }
            out
        })
        .collect();
    let bad: Vec<&String> = results.iter().filter(|(_, ok)| !ok).map(|(n, _)| n).collect();
    outcome(
        bad.is_empty(),
        format!("{} graphs x 100 assignments, {} failures{}", results.len(), bad.len(), bad.first().map(|b| format!(": {b}")).unwrap_or_default()),
    )
}

fn criterion_3() -> Outcome {
    let results: Vec<(bool, bool, usize)> = (0..200u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(3000 + t);
            let q = [3usize, 5, 7][t as usize % 3];
            let n = rng.gen_range(2 * q..=16);
            let k = rng.gen_range(3..=10);
            let m = rng.gen_range(2..=(n / q).min(4));
            let inst = generate_random_matching_instance(n, q, k, m as f64 / n as f64, t).unwrap();
            let thr = compute_thresholds(n, k, q, inst.measured_delta()).unwrap();
            let dec = decompose(&inst, &thr).unwrap();
            let report = verify_decomposition(&inst, &dec, &thr);
            let recombined = (0..100).all(|_| {
                let b = random_signs(&mut rng, k);
                let x = random_signs(&mut rng, n);
                recombination_check(&inst, &dec, &b, &x).unwrap()
            });
            (report.passed(), recombined, dec.piece_edges())
        })
        .collect();
    let props = results.iter().filter(|r| r.0).count();
    let recomb = results.iter().filter(|r| r.1).count();
    let with_pieces = results.iter().filter(|r| r.2 > 0).count();
    outcome(
        props == 200 && recomb == 200,
        format!("200 instances: properties {props}/200, recombination {recomb}/200, {with_pieces} with heavy sets"),
    )
}

#[derive(Default)]
struct PruneTally {
    parts: usize,
    passed: usize,
    ratios: Vec<f64>,
}

fn tally(cert: &Certificate, t: &mut PruneTally) {
    let mut parts: Vec<&kikuchi::refute::SpectralPart> = cert.pieces.iter().map(|p| &p.part).collect();
    if let Some(r) = &cert.regular {
        parts.extend(r.partitions.iter().map(|p| &p.part));
    }
    for part in parts.into_iter().filter(|p| p.status == PartStatus::Certified) {
        t.parts += 1;
        if part.prune_check.as_ref().is_some_and(|c| c.passed()) {
            t.passed += 1;
        }
        if let Some(r) = &part.prune {
            t.ratios.push(r.ratio);
        }
    }
}

fn pipeline_options(q: usize, seed: u64) -> RefuteOptions {
    RefuteOptions {
        ell: Some(if q == 3 { 1 } else { 2 }),
        seed,
        exhaustive_signs: true,
        ..RefuteOptions::default()
    }
}

fn soundness_instances() -> Vec<(XorInstance, RefuteOptions)> {
    (0..60u64)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(4000 + t);
            let (q, n, k) = if t < 50 {
                (3, rng.gen_range(8..=14), rng.gen_range(2..=6))
            } else {
                (5, rng.gen_range(10..=12), rng.gen_range(2..=5))
            };
            let m = rng.gen_range(2..=(n / q).min(4));
            let inst = generate_random_matching_instance(n, q, k, m as f64 / n as f64, t).unwrap();
            (inst, pipeline_options(q, t))
        })
        .collect()
}

fn criterion_4(prunes: &mut PruneTally) -> Outcome {
    let runs: Vec<(Certificate, bool, bool, f64)> = soundness_instances()
        .par_iter()
        .map(|(inst, opts)| {
            let cert = refute_full(inst, opts).unwrap();
            let report = soundness_check(&cert, DEFAULT_EXHAUSTIVE_LIMIT).unwrap();
            let expected: f64 = report.entries.iter().map(|e| e.val as f64).sum::<f64>() / report.entries.len() as f64;
            let expectation_ok = cert.khintchine_bound * (1.0 + 1e-6) >= expected && cert.empirical_bound * (1.0 + 1e-6) >= expected;
            let min_slack = report
                .entries
                .iter()
                .map(|e| e.bound - e.val as f64)
                .fold(f64::INFINITY, f64::min);
            (cert, report.passed, expectation_ok, min_slack)
        })
        .collect();
    let sound = runs.iter().filter(|r| r.1).count();
    let expect = runs.iter().filter(|r| r.2).count();
    let checks: usize = runs.iter().map(|r| r.0.signs.len()).sum();
    let slack = runs.iter().map(|r| r.3).fold(f64::INFINITY, f64::min);
    for r in &runs {
        tally(&r.0, prunes);
    }
    outcome(
        sound == runs.len() && expect == runs.len(),
        format!(
            "{} instances, {checks} sign vectors: per-b sound {sound}/{}, expectation bounds {expect}/{}, min slack {slack:.3}",
            runs.len(),
            runs.len(),
            runs.len()
        ),
    )
}

fn group_families() -> Vec<Vec<CsrMatrix>> {
    (0..50u64)
        .into_par_iter()
        .map(|t| {
            let graph = if t % 2 == 0 {
                let piece: BipartiteXorInstance =
                    generate_random_bipartite_instance(9, 3, 2, 3 + (t as usize % 5), 3.0 / 9.0, 6, t).unwrap();
                assemble_bipartite(&piece, 2).unwrap()
            } else {
                let inst = generate_random_matching_instance(10, 3, 4 + (t as usize % 4), 0.3, t).unwrap();
                let p = &balanced_partitions(inst.k())[1];
                assemble_regular_cs(10, 3, inst.k(), cauchy_schwarz_pairs(&inst, p), 1).unwrap()
            };
            let m = 3;
            let pruned = prune(&graph, &target_degrees(&graph, m), DEFAULT_GAMMA)
                .map(|p| p.graph)
                .unwrap_or(graph);
            pruned.compress().group_matrices()
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let opts = NormOptions::default();
    let results: Vec<(f64, f64)> = group_families()
        .par_iter()
        .enumerate()
        .map(|(t, groups)| {
            let sigma = khintchine_sigma(groups, &opts).unwrap();
            let (rows, cols) = groups.first().map_or((1, 1), |g| (g.nrows(), g.ncols()));
            let bound = khintchine_bound(sigma.sigma2, rows as f64, cols as f64);
            let mean = estimate_expected_norm(groups, 200, t as u64, &opts).unwrap().mean;
            (mean, bound)
        })
        .collect();
    let ok = results.iter().filter(|(m, b)| *m <= *b * (1.0 + 1e-9)).count();
    let worst = results.iter().map(|(m, b)| m / b).fold(0.0, f64::max);
    outcome(ok == results.len(), format!("{ok}/{} families, max mean/bound {worst:.3}", results.len()))
}

fn criterion_6(prunes: &mut PruneTally) -> Outcome {
    let runs: Vec<(bool, bool, bool)> = (0..20u64)
        .into_par_iter()
        .map(|t| {
            let k = 3 + (t as usize % 3);
            let m = if k <= 4 { 3 } else { 2 };
            let (inst, code) = generate_planted_linear_instance(14, 3, k, m as f64 / 14.0, 6000 + t).unwrap();
            let total = inst.total_edges() as i64;
            let planted_ok = (0..1u64 << k).all(|idx| {
                let b = signs_from_index(idx, k);
                brute_force_val(&inst, &b, DEFAULT_EXHAUSTIVE_LIMIT).unwrap().value == total
                    && eval_phi(&inst, &b, &code.encode(&b)).unwrap() == total
            });
            let opts = RefuteOptions {
                epsilon: 0.5,
                ..pipeline_options(3, t)
            };
            let cert = refute_full(&inst, &opts).unwrap();
            let sound = soundness_check(&cert, DEFAULT_EXHAUSTIVE_LIMIT).unwrap().passed;
            (planted_ok, !cert.verdict.refuted, sound)
        })
        .collect();
    let planted = runs.iter().filter(|r| r.0).count();
    let not_refuted = runs.iter().filter(|r| r.1).count();
    let sound = runs.iter().filter(|r| r.2).count();
    for t in 0..20u64 {
        let k = 3 + (t as usize % 3);
        let m = if k <= 4 { 3 } else { 2 };
        let (inst, _) = generate_planted_linear_instance(14, 3, k, m as f64 / 14.0, 6000 + t).unwrap();
        let opts = RefuteOptions {
            epsilon: 0.5,
            ..pipeline_options(3, t)
        };
        tally(&refute_full(&inst, &opts).unwrap(), prunes);
    }
    outcome(
        planted == 20 && not_refuted == 20 && sound == 20,
        format!("20 planted: val = sum|H_i| {planted}/20, not refuted {not_refuted}/20, sound {sound}/20"),
    )
}

fn criterion_7(prunes: &PruneTally) -> Outcome {
    let n = prunes.ratios.len().max(1) as f64;
    let mean_ratio = prunes.ratios.iter().sum::<f64>() / n;
    let min_ratio = prunes.ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let half = prunes.ratios.iter().filter(|&&r| r >= 0.5).count();
    outcome(
        prunes.parts > 0 && prunes.passed == prunes.parts,
        format!(
            "{}/{} pruned graphs pass (cap, D' per label, subgraph, symmetry); D'/D mean {mean_ratio:.3}, min {min_ratio:.3}, >= 1/2 in {half}",
            prunes.passed, prunes.parts
        ),
    )
}

fn criterion_8() -> Outcome {
    let cases: Vec<(bool, f64)> = (0..20u64)
        .into_par_iter()
        .flat_map_iter(|t| {
            let n = 9 + (t as usize % 4);
            let m = n / 3 + 1;
            let piece = generate_random_bipartite_instance(n, 3, 2, 3, m as f64 / n as f64, 8, 8000 + t).unwrap();
            let g = assemble_bipartite(&piece, 3).unwrap();
            let m = piece.max_matching_size();
            [Side::Left, Side::Right]
                .into_iter()
                .map(|side| {
                    let shape = analytic_shape(&g, n, m, 2, piece.num_labels(), side);
                    assert!(shape > 1.0, "analytic shape {shape} must exceed 1");
                    let excess = (0..g.num_labels())
                        .map(|l| conditional_degree_moment(&g, l, side, 2000, t).unwrap().mean - 1.0)
                        .fold(f64::NEG_INFINITY, f64::max);
                    (excess <= 32.0 * shape, excess / shape)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let within = cases.iter().filter(|c| c.0).count();
    let worst = cases.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        within * 100 >= 95 * cases.len(),
        format!("{within}/{} (piece, side) cases within 32x the analytic shape; largest measured constant {worst:.3}", cases.len()),
    )
}

fn criterion_9() -> Outcome {
    let opts = NormOptions {
        allow_dense: false,
        ..NormOptions::default()
    };
    let errors: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(9000 + t);
            let rows = rng.gen_range(5..=150);
            let cols = rng.gen_range(5..=150);
            let nnz = rng.gen_range(1..=(rows * cols / 2).clamp(1, 10_000));
            let triplets: Vec<(usize, usize, f64)> = (0..nnz)
                .map(|_| (rng.gen_range(0..rows), rng.gen_range(0..cols), rng.gen_range(-1.0..1.0)))
                .collect();
            let a = CsrMatrix::from_triplets(rows, cols, &triplets);
            let est = power_iteration_norm(&a, &opts);
            let dense = DMatrix::from_fn(rows, cols, |r, c| a.to_dense()[r][c]);
            let oracle = dense.singular_values().max();
            (est.value - oracle).abs() / oracle.max(1e-300)
        })
        .collect();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let ok = errors.iter().filter(|&&e| e <= 1e-7).count();
    outcome(ok == 100, format!("{ok}/100 matrices within 1e-7, worst relative error {worst:.2e}"))
}

fn criterion_10() -> Outcome {
    let mut inputs: Vec<(XorInstance, RefuteOptions)> = soundness_instances().into_iter().step_by(6).collect();
    for t in 0..3u64 {
        let (inst, _) = generate_planted_linear_instance(14, 3, 4, 3.0 / 14.0, 6000 + t).unwrap();
        inputs.push((inst, pipeline_options(3, t)));
    }
    let digest = |runs: &[(XorInstance, RefuteOptions)]| -> Vec<String> {
        runs.par_iter()
            .map(|(inst, opts)| refute_full(inst, opts).unwrap().canonical_json().unwrap())
            .collect()
    };
    let first = digest(&inputs);
    let second = digest(&inputs);
    let same = first.iter().zip(&second).filter(|(a, b)| a == b).count();
    let distinct: BTreeSet<&String> = first.iter().collect();
    outcome(
        same == inputs.len(),
        format!("{same}/{} certificates byte-identical across runs ({} distinct)", inputs.len(), distinct.len()),
    )
}

fn main() {
    let start = Instant::now();
    let mut prunes = PruneTally::default();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        println!(
            "criterion {id:>2} [{}] {name}: {} ({:.1}s)",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        results.push((id, name, o));
    };
    run(1, "edge-count exactness", &mut criterion_1);
    run(2, "quadratic-form identity", &mut criterion_2);
    run(3, "decomposition properties", &mut criterion_3);
    run(4, "certificate soundness", &mut || criterion_4(&mut prunes));
    run(5, "matrix Khintchine", &mut criterion_5);
    run(6, "planted non-refutation", &mut || criterion_6(&mut prunes));
    run(7, "pruning contract", &mut || criterion_7(&prunes));
    run(8, "conditional-moment shape", &mut criterion_8);
    run(9, "spectral-norm oracle", &mut criterion_9);
    run(10, "determinism", &mut criterion_10);
    let passed = results.iter().filter(|r| r.2.passed).count();
    println!("acceptance: {passed}/{} criteria passed in {:.1}s", results.len(), start.elapsed().as_secs_f64());
    if passed != results.len() {
        std::process::exit(1);
    }
}
