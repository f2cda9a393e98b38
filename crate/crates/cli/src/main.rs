use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use kikuchi::decompose::{compute_thresholds, decompose, recombination_check, verify_decomposition};
use kikuchi::format::{read_instance, read_json, write_json, DecomposedFile, InstanceFile};
use kikuchi::instance::{
    brute_force_val, expected_val, generate_planted_linear_instance, generate_random_matching_instance,
    random_signs, signs_from_index, XorInstance, DEFAULT_EXHAUSTIVE_LIMIT,
};
use kikuchi::kikuchi::{
    assemble_basic_even, assemble_bipartite, assemble_naive_odd, assemble_regular_cs, KikuchiGraph,
};
use kikuchi::refute::{
    balanced_partitions, cauchy_schwarz_pairs, refute_bipartite, refute_full, refute_regular, soundness_check,
    Certificate, CertificateKind, EmbeddedInstance, Metadata, Partition, PartitionScheme, RefuteOptions,
    DEFAULT_EDGE_BUDGET, DEFAULT_EPSILON,
};
use kikuchi::{Error, TOOL_VERSION};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "kikuchi", version, about = "Spectral refutation of XOR instances from hypergraph matchings")]
struct Cli {
    /// Worker thread cap.
    #[arg(long, global = true, env = "KIKUCHI_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random or planted instance.
    Gen(GenArgs),
    /// Split an instance into a regular leftover and bipartite pieces.
    Decompose(DecomposeArgs),
    /// Build one Kikuchi graph and dump its edge list.
    Build(BuildArgs),
    /// Produce a refutation certificate.
    Refute(RefuteArgs),
    /// Brute-force values of an instance.
    Oracle(OracleArgs),
    /// Compare every per-b bound of a certificate with the brute-force value.
    Soundness(SoundnessArgs),
    /// Refute a range of k and write a CSV.
    Sweep(SweepArgs),
    /// Re-check an instance/certificate pair end to end.
    Verify(VerifyArgs),
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    q: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Plant a linear code satisfying every constraint; writes `<out>.code.json`.
    #[arg(long)]
    planted: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct DecomposeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum VariantArg {
    BasicEven,
    NaiveOdd,
    RegularCs,
    Bipartite,
}

#[derive(Args, Serialize)]
struct BuildArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    variant: VariantArg,
    #[arg(long)]
    ell: usize,
    /// Piece to build for the bipartite variant.
    #[arg(long)]
    s: Option<usize>,
    /// Index into the balanced partition family for `regular-cs`.
    #[arg(long, default_value_t = 1)]
    partition: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Serialize)]
struct RefuteParams {
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = kikuchi::prune::DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = kikuchi::spectral::DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Fixed Kikuchi level instead of the threshold formula.
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_EDGE_BUDGET)]
    edge_budget: usize,
    /// Enumerate all 2^k sign vectors (k <= 24).
    #[arg(long)]
    exhaustive_signs: bool,
    /// Use this many uniform random partitions instead of the balanced family.
    #[arg(long)]
    random_partitions: Option<usize>,
}

impl RefuteParams {
    fn options(&self) -> Result<RefuteOptions, Fail> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Fail::config(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        if !(self.gamma >= 1.0) {
            return Err(Fail::config(format!("gamma must be >= 1, got {}", self.gamma)));
        }
        if self.trials == 0 {
            return Err(Fail::config("trials must be positive"));
        }
        Ok(RefuteOptions {
            epsilon: self.epsilon,
            gamma: self.gamma,
            trials: self.trials,
            seed: self.seed,
            ell: self.ell,
            edge_budget: self.edge_budget,
            partitions: match self.random_partitions {
                Some(count) => PartitionScheme::Random { count },
                None => PartitionScheme::Balanced,
            },
            exhaustive_signs: self.exhaustive_signs,
            ..RefuteOptions::default()
        })
    }
}

#[derive(Args, Serialize)]
struct RefuteArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    params: RefuteParams,
    /// Refute the instance as already regular, skipping decomposition.
    #[arg(long)]
    regular_only: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct OracleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated sign vector, e.g. `1,-1,1`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "all_b")]
    b: Option<String>,
    /// Every sign vector.
    #[arg(long)]
    all_b: bool,
    /// Monte Carlo estimate of the expectation over b.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_LIMIT)]
    limit: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SoundnessArgs {
    #[arg(long)]
    cert: PathBuf,
    /// Regenerate the certificate over all 2^k sign vectors first if needed.
    #[arg(long)]
    exhaustive_b: bool,
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_LIMIT)]
    limit: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    q: usize,
    #[arg(long)]
    delta: f64,
    /// Comma-separated k values.
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    /// Comma-separated instance seeds.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    #[arg(long)]
    planted: bool,
    #[command(flatten)]
    params: RefuteParams,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    cert: PathBuf,
    /// Random assignments per identity check.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_LIMIT)]
    limit: usize,
}

#[derive(Debug)]
enum Fail {
    Verify(String),
    Config(anyhow::Error),
    Io(anyhow::Error),
}

impl Fail {
    fn config(msg: impl Into<String>) -> Self {
        Fail::Config(anyhow!(msg.into()))
    }

    fn code(&self) -> u8 {
        match self {
            Fail::Verify(_) => 1,
            Fail::Config(_) => 2,
            Fail::Io(_) => 3,
        }
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Fail::Io(e.into()),
            other => Fail::Config(other.into()),
        }
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::Io(e.into())
    }
}

fn with_path(path: &Path) -> impl FnOnce(Error) -> Fail + '_ {
    move |e| match Fail::from(e) {
        Fail::Io(err) => Fail::Io(err.context(path.display().to_string())),
        Fail::Config(err) => Fail::Config(err.context(path.display().to_string())),
        other => other,
    }
}

fn timestamp() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("unix:{secs}")
}

fn config_value<T: Serialize>(command: &str, args: &T) -> serde_json::Value {
    serde_json::json!({ "command": command, "args": args })
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), Fail> {
    match out {
        Some(path) => write_json(path, value).map_err(with_path(path)),
        None => {
            let text = serde_json::to_string_pretty(value).map_err(|e| Fail::Config(e.into()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn load_instance(path: &Path) -> Result<XorInstance, Fail> {
    read_instance(path).map_err(with_path(path))
}

fn load_cert(path: &Path) -> Result<Certificate, Fail> {
    read_json(path).map_err(with_path(path))
}

fn cmd_gen(args: &GenArgs) -> Result<(), Fail> {
    if args.q < 2 || args.n < args.q || args.k == 0 {
        return Err(Fail::config(format!(
            "need 2 <= q <= n and k >= 1 (n = {}, q = {}, k = {})",
            args.n, args.q, args.k
        )));
    }
    let (inst, code) = if args.planted {
        let (inst, code) = generate_planted_linear_instance(args.n, args.q, args.k, args.delta, args.seed)?;
        (inst, Some(code))
    } else {
        (generate_random_matching_instance(args.n, args.q, args.k, args.delta, args.seed)?, None)
    };
    let mut file = InstanceFile::from_instance(&inst);
    file.tool_version = Some(TOOL_VERSION.to_string());
    file.config = Some(config_value("gen", args));
    write_json(&args.out, &file).map_err(with_path(&args.out))?;
    if let Some(code) = code {
        let sidecar = sidecar_path(&args.out);
        let body = serde_json::json!({
            "tool_version": TOOL_VERSION,
            "config": config_value("gen", args),
            "code": code,
        });
        write_json(&sidecar, &body).map_err(with_path(&sidecar))?;
    }
    println!(
        "n={} q={} k={} matching sizes={:?} measured delta={:.4}",
        inst.n,
        inst.q,
        inst.k(),
        inst.hypergraphs.iter().map(|h| h.len()).collect::<Vec<_>>(),
        inst.measured_delta()
    );
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".code.json");
    out.with_file_name(name)
}

fn cmd_decompose(args: &DecomposeArgs) -> Result<(), Fail> {
    let inst = load_instance(&args.input)?;
    let thr = compute_thresholds(inst.n, inst.k(), inst.q, inst.measured_delta())?;
    let dec = decompose(&inst, &thr)?;
    write_json(&args.out, &DecomposedFile::from_decomposed(&dec)).map_err(with_path(&args.out))?;
    println!(
        "ell={} leftover edges={} pieces={}",
        thr.ell,
        dec.leftover.total_edges(),
        dec.pieces
            .iter()
            .map(|(s, p)| format!("s={s}:{} edges/{} labels", p.total_edges(), p.num_labels()))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}

#[derive(Serialize)]
struct GraphDump<'a> {
    tool_version: &'a str,
    config: serde_json::Value,
    variant: kikuchi::kikuchi::Variant,
    ell: usize,
    per_label: String,
    left: &'a kikuchi::kikuchi::VertexSpace,
    right: &'a kikuchi::kikuchi::VertexSpace,
    num_labels: usize,
    edges: Vec<(u64, u64, u32)>,
}

fn build_graph(args: &BuildArgs, inst: &XorInstance) -> Result<KikuchiGraph, Fail> {
    let graph = match args.variant {
        VariantArg::BasicEven => assemble_basic_even(inst, args.ell)?,
        VariantArg::NaiveOdd => assemble_naive_odd(inst, args.ell)?,
        VariantArg::RegularCs => {
            let family = balanced_partitions(inst.k());
            let p = family.get(args.partition).ok_or_else(|| {
                Fail::config(format!("partition index {} outside 0..{}", args.partition, family.len()))
            })?;
            assemble_regular_cs(inst.n, inst.q, inst.k(), cauchy_schwarz_pairs(inst, p), args.ell)?
        }
        VariantArg::Bipartite => {
            let s = args.s.ok_or_else(|| Fail::config("the bipartite variant needs --s"))?;
            let thr = compute_thresholds(inst.n, inst.k(), inst.q, inst.measured_delta())?;
            let dec = decompose(&inst.clone(), &thr)?;
            let piece = dec
                .pieces
                .get(&s)
                .ok_or_else(|| Fail::config(format!("the decomposition has no piece with s = {s}")))?;
            assemble_bipartite(piece, args.ell)?
        }
    };
    Ok(graph)
}

fn cmd_build(args: &BuildArgs) -> Result<(), Fail> {
    let inst = load_instance(&args.input)?;
    let graph = build_graph(args, &inst)?;
    let dump = GraphDump {
        tool_version: TOOL_VERSION,
        config: config_value("build", args),
        variant: graph.variant,
        ell: graph.ell,
        per_label: graph.per_label.to_string(),
        left: &graph.left,
        right: &graph.right,
        num_labels: graph.num_labels(),
        edges: graph.edges.iter().map(|e| (e.left, e.right, e.label)).collect(),
    };
    match &args.out {
        Some(path) => {
            write_json(path, &dump).map_err(with_path(path))?;
            println!(
                "{:?} ell={} labels={} D={} edges={}",
                graph.variant,
                graph.ell,
                graph.num_labels(),
                graph.per_label,
                graph.num_edges()
            );
            Ok(())
        }
        None => emit(None, &dump),
    }
}

fn refute_instance(inst: &XorInstance, opts: &RefuteOptions, regular_only: bool) -> Result<Certificate, Fail> {
    let mut cert = if regular_only {
        refute_regular(inst, opts)?
    } else {
        refute_full(inst, opts)?
    };
    cert.metadata = Some(Metadata { timestamp: timestamp() });
    Ok(cert)
}

fn print_verdict(cert: &Certificate) {
    let v = &cert.verdict;
    println!(
        "bound={:.4} (khintchine {:.4}, empirical {:.4}) threshold={:.4} eps*delta*n*k={:.4} -> {}",
        v.verdict_bound,
        cert.khintchine_bound,
        cert.empirical_bound,
        v.threshold,
        v.eps_delta_n_k,
        if v.refuted { "refuted" } else { "not refuted" }
    );
    for w in &cert.warnings {
        eprintln!("warning: {w}");
    }
}

fn cmd_refute(args: &RefuteArgs) -> Result<(), Fail> {
    let opts = args.params.options()?;
    let inst = load_instance(&args.input)?;
    let cert = refute_instance(&inst, &opts, args.regular_only)?;
    write_json(&args.out, &cert).map_err(with_path(&args.out))?;
    print_verdict(&cert);
    Ok(())
}

fn parse_signs(text: &str, k: usize) -> Result<Vec<i8>, Fail> {
    let b: Vec<i8> = text
        .split(',')
        .map(|t| match t.trim() {
            "1" | "+1" => Ok(1),
            "-1" => Ok(-1),
            other => Err(Fail::config(format!("sign entries must be 1 or -1, got {other:?}"))),
        })
        .collect::<Result<_, _>>()?;
    if b.len() != k {
        return Err(Fail::config(format!("sign vector has {} entries, instance has k = {k}", b.len())));
    }
    Ok(b)
}

#[derive(Serialize)]
struct OracleRow {
    b: Vec<i8>,
    val: i64,
    argmax: Vec<i8>,
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), Fail> {
    let inst = load_instance(&args.input)?;
    let k = inst.k();
    let signs: Vec<Vec<i8>> = if args.all_b {
        if k > args.limit {
            return Err(Fail::config(format!("k = {k} exceeds the enumeration limit {}", args.limit)));
        }
        (0..1u64 << k).map(|i| signs_from_index(i, k)).collect()
    } else if let Some(text) = &args.b {
        vec![parse_signs(text, k)?]
    } else {
        Vec::new()
    };
    let rows = signs
        .into_iter()
        .map(|b| {
            let v = brute_force_val(&inst, &b, args.limit)?;
            Ok(OracleRow { b, val: v.value, argmax: v.argmax.x })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let expected = match args.trials {
        Some(t) => Some(expected_val(&inst, t, args.seed, args.limit)?),
        None => None,
    };
    let body = serde_json::json!({
        "tool_version": TOOL_VERSION,
        "config": config_value("oracle", args),
        "total_edges": inst.total_edges(),
        "values": rows,
        "expected": expected,
    });
    emit(args.out.as_deref(), &body)
}

fn options_from_cert(cert: &Certificate) -> RefuteOptions {
    let p = &cert.params;
    RefuteOptions {
        epsilon: p.epsilon,
        gamma: p.gamma,
        trials: p.trials,
        seed: p.seed,
        ell: p.ell_override,
        edge_budget: p.edge_budget,
        partitions: p.partitions.clone(),
        exhaustive_signs: cert.signs_exhaustive && cert.signs.len() == 1usize << cert.params.k,
        ..RefuteOptions::default()
    }
}

/// Recomputes the certificate from its embedded instance and recorded parameters.
fn rerun(cert: &Certificate, opts: &RefuteOptions) -> Result<Certificate, Fail> {
    let out = match (&cert.instance, cert.kind) {
        (EmbeddedInstance::Xor(f), CertificateKind::Regular) => refute_regular(&f.to_instance()?, opts)?,
        (EmbeddedInstance::Xor(f), _) => refute_full(&f.to_instance()?, opts)?,
        (EmbeddedInstance::Bipartite(f), _) => refute_bipartite(&f.to_instance()?, opts)?,
    };
    Ok(out)
}

fn cmd_soundness(args: &SoundnessArgs) -> Result<(), Fail> {
    let mut cert = load_cert(&args.cert)?;
    let k = cert.params.k;
    if args.exhaustive_b && cert.signs.len() as u64 != 1u64 << k.min(63) {
        if k > args.limit {
            return Err(Fail::config(format!("k = {k} exceeds the enumeration limit {}", args.limit)));
        }
        let opts = RefuteOptions {
            exhaustive_signs: true,
            ..options_from_cert(&cert)
        };
        cert = rerun(&cert, &opts)?;
    }
    let report = soundness_check(&cert, args.limit)?;
    let failed = report.entries.iter().filter(|e| !e.ok).count();
    println!(
        "{} sign vectors checked, {} violations, stored bounds {}",
        report.entries.len(),
        failed,
        if report.consistent { "consistent" } else { "INCONSISTENT" }
    );
    if let Some(path) = &args.out {
        write_json(path, &report).map_err(with_path(path))?;
    }
    if !report.passed {
        let first = report.entries.iter().find(|e| !e.ok);
        return Err(Fail::Verify(match first {
            Some(e) => format!("bound {} < val {} at b = {:?}", e.bound, e.val, e.b),
            None => "stored per-b bounds disagree with their components".into(),
        }));
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Fail> {
    let opts = args.params.options()?;
    let mut writer = csv::Writer::from_path(&args.out).map_err(|e| Fail::Io(anyhow!(e).context(args.out.display().to_string())))?;
    writer
        .write_record([
            "k", "seed", "planted", "n", "q", "delta_measured", "total_edges", "combined_bound", "khintchine_bound",
            "empirical_bound", "eps_delta_n_k", "ratio", "verdict", "error",
        ])
        .map_err(|e| Fail::Io(e.into()))?;
    let mut planted_refuted = Vec::new();
    for &k in &args.k {
        for &seed in &args.seeds {
            let generated = if args.planted {
                generate_planted_linear_instance(args.n, args.q, k, args.delta, seed).map(|(i, _)| i)
            } else {
                generate_random_matching_instance(args.n, args.q, k, args.delta, seed)
            };
            let row = generated.and_then(|inst| refute_full(&inst, &opts).map(|c| (inst, c)));
            let record: Vec<String> = match row {
                Ok((inst, cert)) => {
                    let dnk = inst.measured_delta() * inst.n as f64 * k as f64;
                    if args.planted && cert.verdict.refuted {
                        planted_refuted.push((k, seed));
                    }
                    vec![
                        k.to_string(),
                        seed.to_string(),
                        args.planted.to_string(),
                        inst.n.to_string(),
                        inst.q.to_string(),
                        inst.measured_delta().to_string(),
                        inst.total_edges().to_string(),
                        cert.verdict.verdict_bound.to_string(),
                        cert.khintchine_bound.to_string(),
                        cert.empirical_bound.to_string(),
                        cert.verdict.eps_delta_n_k.to_string(),
                        (cert.verdict.verdict_bound / dnk).to_string(),
                        if cert.verdict.refuted { "refuted" } else { "not refuted" }.into(),
                        String::new(),
                    ]
                }
                Err(e) => {
                    let mut r = vec![k.to_string(), seed.to_string(), args.planted.to_string()];
                    r.extend(std::iter::repeat_n(String::new(), 10));
                    r.push(e.to_string());
                    r
                }
            };
            writer.write_record(&record).map_err(|e| Fail::Io(e.into()))?;
            println!("{}", record.join(","));
        }
    }
    writer.flush()?;
    if !planted_refuted.is_empty() {
        return Err(Fail::Verify(format!("planted instances refuted at (k, seed) = {planted_refuted:?}")));
    }
    Ok(())
}

fn check_graph(graph: &KikuchiGraph, k: usize, samples: usize, rng: &mut ChaCha8Rng, what: &str) -> Result<(), Fail> {
    graph.verify_edges(0).map_err(|e| Fail::Verify(format!("{what}: {e}")))?;
    let d = graph.per_label.clone();
    if let Some(l) = (0..graph.num_labels()).find(|&l| num_bigint::BigUint::from(graph.label_count(l)) != d) {
        return Err(Fail::Verify(format!(
            "{what}: label {l} has {} edges, closed form gives {d}",
            graph.label_count(l)
        )));
    }
    let d: i64 = d.try_into().map_err(|_| Fail::Verify(format!("{what}: D too large")))?;
    let n = graph.left.components.iter().find(|c| c.ground == kikuchi::kikuchi::Ground::Vertices).map_or(0, |c| c.ground_size);
    let labels = graph
        .left
        .components
        .iter()
        .find(|c| c.ground == kikuchi::kikuchi::Ground::Labels)
        .map_or(0, |c| c.ground_size);
    for _ in 0..samples {
        let b = random_signs(rng, k);
        let x = random_signs(rng, n);
        let y = random_signs(rng, labels.max(1));
        let y = (labels > 0).then_some(y.as_slice());
        let form = graph.quadratic_form(&b, &x, y)?;
        if let Some(l) = graph.labels.iter().zip(&form.per_label).position(|(lab, &v)| v != d * lab.monomial(&x, y)) {
            return Err(Fail::Verify(format!("{what}: quadratic form of label {l} differs from D times its monomial")));
        }
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Fail> {
    let inst = load_instance(&args.instance)?;
    let cert = load_cert(&args.cert)?;
    let EmbeddedInstance::Xor(embedded) = &cert.instance else {
        return Err(Fail::Verify("certificate does not embed an XOR instance".into()));
    };
    if embedded.to_instance()?.hypergraphs != inst.hypergraphs {
        return Err(Fail::Verify("certificate was issued for a different instance".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cert.params.seed);
    let k = inst.k();
    let mut regular = inst.clone();
    let mut pieces = Default::default();
    if let Some(thr) = &cert.params.thresholds {
        if cert.kind == CertificateKind::Combined {
            let dec = decompose(&inst, thr)?;
            let report = verify_decomposition(&inst, &dec, thr);
            if let Some((key, v)) = report.violations.iter().find(|(_, v)| !v.is_empty()) {
                return Err(Fail::Verify(format!("decomposition property {key}: {}", v[0])));
            }
            for _ in 0..args.samples {
                let b = random_signs(&mut rng, k);
                let x = random_signs(&mut rng, inst.n);
                if !recombination_check(&inst, &dec, &b, &x)? {
                    return Err(Fail::Verify(format!("recombination identity fails at b = {b:?}")));
                }
            }
            regular = dec.leftover;
            pieces = dec.pieces;
        }
    }
    println!("decomposition: ok");
    if let Some(r) = &cert.regular {
        for rec in &r.partitions {
            if let Some(ell) = rec.part.ell.filter(|_| rec.part.num_labels > 0) {
                let p = Partition::new(rec.left.clone(), rec.right.clone(), k)?;
                let g = assemble_regular_cs(regular.n, regular.q, k, cauchy_schwarz_pairs(&regular, &p), ell)?;
                check_graph(&g, k, args.samples, &mut rng, &format!("regular partition L={:?}", rec.left))?;
            }
        }
    }
    for piece in &cert.pieces {
        if let Some(ell) = piece.part.ell.filter(|_| piece.total_edges > 0) {
            let source = pieces
                .get(&piece.s)
                .ok_or_else(|| Fail::Verify(format!("certificate lists piece s={} absent from the decomposition", piece.s)))?;
            let g = assemble_bipartite(source, ell)?;
            check_graph(&g, k, args.samples, &mut rng, &format!("piece s={}", piece.s))?;
        }
    }
    println!("kikuchi graphs: ok");
    let report = soundness_check(&cert, args.limit)?;
    if !report.consistent {
        return Err(Fail::Verify("stored per-b bounds disagree with their components".into()));
    }
    if let Some(e) = report.entries.iter().find(|e| !e.ok) {
        return Err(Fail::Verify(format!("bound {} < val {} at b = {:?}", e.bound, e.val, e.b)));
    }
    println!("soundness: ok ({} sign vectors)", report.entries.len());
    let again = rerun(&cert, &options_from_cert(&cert))?;
    let (a, b) = (again.canonical_json()?, cert.canonical_json()?);
    if a != b {
        return Err(Fail::Verify("re-running the refutation does not reproduce the certificate".into()));
    }
    println!("reproduction: ok");
    Ok(())
}

fn run(cli: Cli) -> Result<(), Fail> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Fail::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Fail::Config(e.into()))?;
    }
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Build(a) => cmd_build(a),
        Command::Refute(a) => cmd_refute(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Soundness(a) => cmd_soundness(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = std::io::stdout().flush();
            match &f {
                Fail::Verify(msg) => eprintln!("verification failed: {msg}"),
                Fail::Config(e) => eprintln!("error: {e:#}"),
                Fail::Io(e) => eprintln!("I/O error: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}
