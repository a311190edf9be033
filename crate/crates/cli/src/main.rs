//! Command-line front end: generate benchmark instances, reproduce the
//! competitive-ratio table at configurable scale, and run the
//! concentration diagnostics.
//!
//! Everything is deterministic given `--seed`: per-permutation seeds are
//! derived as `seed ⊕ splitmix64(permIndex)`, so adding permutations or
//! instances never changes earlier ones.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use online_alloc::algorithms::{dla_run_opts, esa_run_opts, krtv_run_opts, ola_run_opts};
use online_alloc::diagnostics::{self, TraceKind};
use online_alloc::generators::{self, mix, Rng, WorstCaseSpec};
use online_alloc::{offline_optimum, Instance, RunOptions, RunResult};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "online-alloc",
    about = "Online resource allocation benchmarks and diagnostics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run algorithms over random arrival orders and report mean
    /// competitive ratios and per-permutation times.
    Bench(BenchArgs),
    /// Generate a worst-case instance file.
    Gen(GenArgs),
    /// Concentration diagnostics: potential traces, event frequencies,
    /// exhaustive martingale checks.
    Diag(DiagArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Generator spec `d=<int>,c=<float>` for the adversarial multiset.
    #[arg(long, value_name = "SPEC", conflicts_with = "instance")]
    gen: Option<String>,
    /// Path to an instance JSON file.
    #[arg(long, value_name = "FILE")]
    instance: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Algorithms to run: esa, ola, dla, krtv, krtv<K> (comma separated
    /// or repeated).
    #[arg(long = "alg", value_delimiter = ',', required = true)]
    algorithms: Vec<String>,
    /// Epsilon values for esa/ola/dla (comma separated or repeated).
    #[arg(long = "eps", value_delimiter = ',', default_values_t = vec![0.05])]
    eps: Vec<f64>,
    /// Permutations per instance.
    #[arg(long, default_value_t = 100)]
    perms: usize,
    /// Independently generated instances (only with --gen).
    #[arg(long, default_value_t = 1)]
    instances: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Override the bid-to-budget bound fed to esa.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: hardware parallelism; the
    /// ONLINE_ALLOC_THREADS environment variable overrides this flag).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct GenArgs {
    /// Number of mask bits; the instance has 2^d resources.
    #[arg(long)]
    d: u32,
    /// Budget per resource.
    #[arg(long)]
    c: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output path for the instance JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum)]
    kind: DiagKind,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    /// Bid-to-budget bound (default: derived from the instance).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 500)]
    perms: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Item count for the exhaustive martingale check (at most 6).
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// CSV output path for traces (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DiagKind {
    /// Mean trace of the exponential potential over permutations.
    Phi,
    /// Monte-Carlo bad-event frequencies against analytic bounds.
    Events,
    /// Exhaustive martingale identity check on a tiny instance.
    Martingale,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Md,
}

#[derive(Clone, Copy, PartialEq)]
enum Algorithm {
    Esa,
    Ola,
    Dla,
    Krtv(usize),
}

impl Algorithm {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "esa" => Ok(Algorithm::Esa),
            "ola" => Ok(Algorithm::Ola),
            "dla" => Ok(Algorithm::Dla),
            _ => {
                if let Some(rest) = s.strip_prefix("krtv") {
                    let period = if rest.is_empty() {
                        1
                    } else {
                        rest.parse::<usize>()
                            .with_context(|| format!("bad krtv period in `{s}`"))?
                    };
                    if period == 0 {
                        bail!("krtv period must be at least 1");
                    }
                    Ok(Algorithm::Krtv(period))
                } else {
                    bail!("unknown algorithm `{s}` (expected esa, ola, dla, krtv, krtv<K>)")
                }
            }
        }
    }

    fn name(&self) -> String {
        match self {
            Algorithm::Esa => "esa".into(),
            Algorithm::Ola => "ola".into(),
            Algorithm::Dla => "dla".into(),
            Algorithm::Krtv(1) => "krtv".into(),
            Algorithm::Krtv(k) => format!("krtv{k}"),
        }
    }

    fn uses_eps(&self) -> bool {
        !matches!(self, Algorithm::Krtv(_))
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(args) => bench(args),
        Command::Gen(args) => gen(args),
        Command::Diag(args) => diag(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// Instance sources
// ---------------------------------------------------------------------------

fn parse_gen_spec(spec: &str, seed: u64) -> Result<WorstCaseSpec> {
    let mut d: Option<u32> = None;
    let mut c: Option<f64> = None;
    for part in spec.split(',') {
        let (key, value) = part
            .split_once('=')
            .with_context(|| format!("expected key=value in `{part}`"))?;
        match key.trim() {
            "d" => d = Some(value.trim().parse().context("bad d")?),
            "c" => c = Some(value.trim().parse().context("bad c")?),
            other => bail!("unknown generator key `{other}`"),
        }
    }
    let (d, c) = (
        d.context("generator spec needs d=<int>")?,
        c.context("generator spec needs c=<float>")?,
    );
    WorstCaseSpec::new(d, c, seed).map_err(|e| anyhow::anyhow!(e))
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read instance file {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("cannot parse instance file {}", path.display()))
}

/// The instances a bench run operates on, with a label and per-instance
/// seeds. Generated instances draw their seeds sequentially from a root
/// stream, so increasing --instances never changes earlier ones.
fn resolve_instances(
    source: &SourceArgs,
    count: usize,
    seed: u64,
) -> Result<(String, Vec<(Instance, u64)>)> {
    match (&source.gen, &source.instance) {
        (Some(spec_str), None) => {
            let mut root = Rng::new(seed);
            let mut out = Vec::with_capacity(count);
            let mut label = String::new();
            for _ in 0..count {
                let inst_seed = root.next_u64();
                let spec = parse_gen_spec(spec_str, inst_seed)?;
                label = format!("d{}c{}", spec.d, spec.c);
                out.push((generators::build_worst_case(&spec), inst_seed));
            }
            Ok((label, out))
        }
        (None, Some(path)) => {
            if count != 1 {
                bail!("--instances requires --gen");
            }
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "instance".into());
            Ok((label, vec![(load_instance(path)?, seed)]))
        }
        _ => bail!("exactly one of --gen or --instance is required"),
    }
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchRow {
    algorithm: String,
    eps: Option<f64>,
    mean_cr: f64,
    std_cr: f64,
    mean_time_s: f64,
    perms: usize,
}

fn bench(args: BenchArgs) -> Result<()> {
    if args.perms == 0 {
        bail!("--perms must be at least 1");
    }
    if args.instances == 0 {
        bail!("--instances must be at least 1");
    }
    for &e in &args.eps {
        if !(e > 0.0 && e < 1.0) {
            bail!("--eps values must lie in (0, 1), got {e}");
        }
    }
    let algorithms: Vec<Algorithm> = args
        .algorithms
        .iter()
        .map(|s| Algorithm::parse(s))
        .collect::<Result<_>>()?;

    let (label, instances) = resolve_instances(&args.source, args.instances, args.seed)?;

    // (algorithm, eps) row keys; krtv variants ignore eps.
    let mut keys: Vec<(Algorithm, Option<f64>)> = Vec::new();
    for alg in &algorithms {
        if alg.uses_eps() {
            for &e in &args.eps {
                keys.push((*alg, Some(e)));
            }
        } else {
            keys.push((*alg, None));
        }
    }

    let pool = build_pool(args.threads)?;
    let mut rows = Vec::with_capacity(keys.len());
    for (alg, eps) in keys {
        let mut crs: Vec<f64> = Vec::with_capacity(instances.len() * args.perms);
        let mut times: Vec<f64> = Vec::with_capacity(crs.capacity());
        for (inst, inst_seed) in &instances {
            let off = offline_optimum(inst)?;
            if off.p_star <= 0.0 {
                bail!("offline optimum is not positive; competitive ratios undefined");
            }
            let gamma = match args.gamma {
                Some(g) => g,
                None => inst.gamma_bound(off.p_star)?.gamma,
            };
            let per_perm: Vec<(f64, f64)> = pool.install(|| {
                (0..args.perms)
                    .into_par_iter()
                    .map(|j| {
                        let perm_seed = inst_seed ^ mix(j as u64);
                        let mut rng = Rng::new(perm_seed);
                        let perm = generators::sample_permutation(inst.n(), &mut rng);
                        let opts = RunOptions::with_noise_seed(perm_seed);
                        let run: RunResult = match (alg, eps) {
                            (Algorithm::Esa, Some(e)) => {
                                esa_run_opts(inst, &perm, e, gamma, opts).map(|(r, _)| r)
                            }
                            (Algorithm::Ola, Some(e)) => {
                                ola_run_opts(inst, &perm, e, opts).map(|(r, _)| r)
                            }
                            (Algorithm::Dla, Some(e)) => {
                                dla_run_opts(inst, &perm, e, opts).map(|(r, _)| r)
                            }
                            (Algorithm::Krtv(p), _) => {
                                krtv_run_opts(inst, &perm, p, opts).map(|(r, _)| r)
                            }
                            _ => unreachable!("eps-keyed rows always carry eps"),
                        }
                        .expect("benchmark run failed");
                        assert!(run.feasible, "guarded run reported infeasible");
                        (run.objective / off.p_star, run.elapsed)
                    })
                    .collect()
            });
            for (cr, t) in per_perm {
                crs.push(cr);
                times.push(t);
            }
        }
        let (mean_cr, std_cr) = mean_std(&crs);
        let mean_time_s = times.iter().sum::<f64>() / times.len() as f64;
        rows.push(BenchRow {
            algorithm: alg.name(),
            eps,
            mean_cr,
            std_cr,
            mean_time_s,
            perms: args.perms,
        });
    }

    let report = match args.format {
        OutputFormat::Csv => render_csv(&label, &rows),
        OutputFormat::Md => render_md(&label, &rows),
    };
    emit(args.out.as_deref(), &report)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn render_csv(label: &str, rows: &[BenchRow]) -> String {
    let mut out = String::from("instance,algorithm,eps,mean_cr,std_cr,mean_time_s,perms\n");
    for r in rows {
        let eps = r.eps.map_or_else(|| "na".into(), |e| format!("{e}"));
        let _ = writeln!(
            out,
            "{label},{},{eps},{:.6},{:.6},{:.6},{}",
            r.algorithm, r.mean_cr, r.std_cr, r.mean_time_s, r.perms
        );
    }
    out
}

fn render_md(label: &str, rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| algorithm | eps | {label} CR | {label} time (s) |");
    let _ = writeln!(out, "|---|---|---|---|");
    for r in rows {
        let eps = r.eps.map_or_else(|| "n/a".into(), |e| format!("{e}"));
        let _ = writeln!(
            out,
            "| {} | {eps} | {:.2} | {:.4} |",
            r.algorithm, r.mean_cr, r.mean_time_s
        );
    }
    out
}

fn build_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let from_env = std::env::var("ONLINE_ALLOC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = from_env.or(threads) {
        builder = builder.num_threads(t);
    }
    builder.build().context("cannot build worker pool")
}

fn emit(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content)
            .with_context(|| format!("cannot write output to {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

fn gen(args: GenArgs) -> Result<()> {
    let spec = WorstCaseSpec::new(args.d, args.c, args.seed).map_err(|e| anyhow::anyhow!(e))?;
    let instance = generators::build_worst_case(&spec);
    let json = serde_json::to_string(&instance)?;
    fs::write(&args.out, json)
        .with_context(|| format!("cannot write instance to {}", args.out.display()))?;
    println!(
        "wrote {}: n = {}, m = {}, k = {}, gamma = {}",
        args.out.display(),
        instance.n(),
        instance.m(),
        instance.k(),
        spec.gamma()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// diag
// ---------------------------------------------------------------------------

fn diag(args: DiagArgs) -> Result<()> {
    match args.kind {
        DiagKind::Martingale => diag_martingale(&args),
        DiagKind::Phi => diag_phi(&args),
        DiagKind::Events => diag_events(&args),
    }
}

fn diag_instance(args: &DiagArgs) -> Result<(Instance, f64)> {
    match (&args.source.gen, &args.source.instance) {
        (Some(spec_str), None) => {
            let spec = parse_gen_spec(spec_str, args.seed)?;
            let gamma = args.gamma.unwrap_or_else(|| spec.gamma());
            Ok((generators::build_worst_case(&spec), gamma))
        }
        (None, Some(path)) => {
            let inst = load_instance(path)?;
            let gamma = match args.gamma {
                Some(g) => g,
                None => {
                    let off = offline_optimum(&inst)?;
                    inst.gamma_bound(off.p_star.max(f64::MIN_POSITIVE))?.gamma
                }
            };
            Ok((inst, gamma))
        }
        _ => bail!("exactly one of --gen or --instance is required"),
    }
}

fn diag_martingale(args: &DiagArgs) -> Result<()> {
    if args.n > 6 {
        bail!("exhaustive enumeration needs --n at most 6");
    }
    let inst = generators::random_linear_instance(args.n, 2, 1, 0.8, args.seed);
    let off = offline_optimum(&inst)?;
    let dev = diagnostics::exhaustive_martingale_deviation(&inst, &off.decisions, off.p_star)?;
    let verdict = if dev < 1e-12 { "pass" } else { "fail" };
    println!("exact: {verdict} (n = {}, max deviation {dev:.3e})", args.n);
    if verdict == "fail" {
        std::process::exit(1);
    }
    Ok(())
}

fn diag_phi(args: &DiagArgs) -> Result<()> {
    let (inst, gamma) = diag_instance(args)?;
    let off = offline_optimum(&inst)?;
    let mut mean: Vec<f64> = Vec::new();
    let mut start_t = 0;
    for j in 0..args.perms {
        let mut rng = Rng::new(args.seed ^ mix(j as u64));
        let perm = generators::sample_permutation(inst.n(), &mut rng);
        let tr = diagnostics::phi_trace(&inst, &perm, args.eps, gamma, &off.decisions, off.p_star)?;
        debug_assert_eq!(tr.kind, TraceKind::Potential);
        start_t = tr.start_t;
        if mean.is_empty() {
            mean = vec![0.0; tr.values.len()];
        }
        for (m, v) in mean.iter_mut().zip(&tr.values) {
            *m += v / args.perms as f64;
        }
    }
    let mut csv = String::from("t,value\n");
    for (i, v) in mean.iter().enumerate() {
        let _ = writeln!(csv, "{},{v:.9}", start_t + i);
    }
    emit(args.out.as_deref(), &csv)?;
    let start = mean.first().copied().unwrap_or(0.0);
    let end = mean.last().copied().unwrap_or(0.0);
    eprintln!(
        "potential: start {start:.3} (= 2m), final mean {end:.3} over {} permutations (bound 2m = {})",
        args.perms,
        2 * inst.m()
    );
    Ok(())
}

fn diag_events(args: &DiagArgs) -> Result<()> {
    let (inst, gamma) = diag_instance(args)?;
    let stats = diagnostics::event_stats(&inst, args.eps, gamma, args.perms, args.seed)?;
    let flag = |b: f64| if diagnostics::is_vacuous(b) { " (vacuous)" } else { "" };
    let mut table = String::new();
    let _ = writeln!(table, "perms                 {}", stats.perms);
    let _ = writeln!(
        table,
        "resource_union_freq   {:.4}   bound {:.4}{}",
        stats.resource_union_freq,
        stats.resource_union_bound,
        flag(stats.resource_union_bound)
    );
    let _ = writeln!(
        table,
        "utility_union_freq    {:.4}   bound {:.4}{}",
        stats.utility_union_freq,
        stats.utility_union_bound,
        flag(stats.utility_union_bound)
    );
    for (h, (lo, hi)) in stats
        .estimate_low_freq
        .iter()
        .zip(&stats.estimate_high_freq)
        .enumerate()
    {
        let _ = writeln!(
            table,
            "estimate_level_{h}      low {:.4} (bound {:.4}{})   high {:.4} (bound {:.4}{})",
            lo,
            stats.estimate_low_bound,
            flag(stats.estimate_low_bound),
            hi,
            stats.estimate_high_bound,
            flag(stats.estimate_high_bound)
        );
    }
    if let Some(f) = stats.overload_freq {
        let _ = writeln!(
            table,
            "overload_freq         {:.4}   bound {:.4}",
            f, stats.overload_bound
        );
    }
    print!("{table}");
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&stats)?;
        fs::write(path, json)
            .with_context(|| format!("cannot write stats to {}", path.display()))?;
    }
    Ok(())
}
