use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mpcp_core::igp::{check_ranking_invariance, RankingCheck};
use mpcp_core::planner::full_horizon_factorization;
use mpcp_core::solver::{SolveReport, Solver, SolverError};
use mpcp_core::workbench::instance::{instance_to_json, read_instance_dir};
use mpcp_core::workbench::{generate_instance, read_instance, run_bench, Budget, GeneratorConfig, InstanceError};

const EXIT_VALIDATION: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

/// Multi-period p-center planning with time-dependent travel times.
#[derive(Parser)]
#[command(name = "mpcp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic instances.
    Gen(GenArgs),
    /// Solve one instance with the two-phase heuristic.
    Solve(SolveArgs),
    /// Lower bound: every period solved on its own.
    Lb(LbArgs),
    /// Sweep a directory of instances over p and K; prints CSV.
    Bench(BenchArgs),
    /// Validate an instance and report arc ranking invariance.
    Check(CheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
    /// Back-to-back congestion windows, each around its own hotspot.
    Crossing,
    /// One network-wide congestion profile.
    Common,
    /// Constant travel times.
    Static,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 50)]
    nodes: usize,
    /// Number of interior grid instants.
    #[arg(long, short = 'm', default_value_t = 120)]
    instants: usize,
    #[arg(long, value_enum, default_value_t = PatternArg::Crossing)]
    pattern: PatternArg,
    /// Override the share of time-dependent arcs.
    #[arg(long)]
    td_fraction: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of instances (seeds seed, seed+1, ...).
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Output file (single instance) or directory (with --count > 1).
    /// Prints to stdout when omitted and count is 1.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    p: usize,
    /// Relocation budget: a number or `all`.
    #[arg(long, short = 'k')]
    k: Budget,
    /// Also certify the relocation plan.
    #[arg(long)]
    certify: bool,
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct LbArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "5,10")]
    p: Vec<usize>,
    #[arg(long, short = 'k', value_delimiter = ',', default_value = "0,2,4,6,8,10,all")]
    k: Vec<Budget>,
    /// Write the CSV here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<InstanceError>() {
            if e.is_invalid_content() {
                return EXIT_VALIDATION;
            }
        }
        if let Some(SolverError::BadP { .. } | SolverError::BadK { .. }) = cause.downcast_ref::<SolverError>() {
            return EXIT_INFEASIBLE;
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => gen(args),
        Command::Solve(args) => solve(args),
        Command::Lb(args) => lb(args),
        Command::Bench(args) => bench(args),
        Command::Check(args) => check(args),
    }
}

fn gen(args: GenArgs) -> Result<()> {
    if args.count == 0 {
        bail!("--count must be positive");
    }
    let config = |seed| {
        let mut c = match args.pattern {
            PatternArg::Crossing => GeneratorConfig::crossing(args.nodes, args.instants, seed),
            PatternArg::Common => GeneratorConfig::common(args.nodes, args.instants, seed),
            PatternArg::Static => GeneratorConfig::static_times(args.nodes, args.instants, seed),
        };
        if let Some(f) = args.td_fraction {
            c.td_fraction = f;
        }
        c
    };
    if args.count == 1 {
        let inst = generate_instance(&config(args.seed))?;
        let text = instance_to_json(&inst);
        match &args.out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
            None => writeln!(io::stdout().lock(), "{text}").context("writing to stdout")?,
        }
        return Ok(());
    }
    let Some(dir) = args.out.as_ref() else {
        bail!("--out <DIR> is required with --count > 1")
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for seed in args.seed..args.seed + args.count {
        let inst = generate_instance(&config(seed))?;
        let path = dir.join(format!("{}.json", inst.name));
        fs::write(&path, instance_to_json(&inst)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn report_json(r: &SolveReport, net_m: usize) -> serde_json::Value {
    let s = &r.solution;
    json!({
        "K": s.plan.len(),
        "M": net_m,
        "objective": s.objective,
        "lower_bound": r.lower_bound,
        "reference": r.reference,
        "gap": r.gap,
        "gain": r.gain,
        "exact_reference": r.exact_reference,
        "exact_gain": r.exact_gain,
        "relocations": s.relocations,
        "relocation_nodes": s.plan.nodes(),
        "blocks": s.plan.blocks().zip(s.plan.blocks().map(|b| s.locations[b.start].open().to_vec()))
            .map(|(b, open)| json!({"periods": [b.start, b.end], "open": open}))
            .collect::<Vec<_>>(),
        "radii": s.radii,
        "plan_value": r.plan_value,
        "certificate": r.certificate.as_ref().map(|c| json!({
            "delta": c.delta,
            "block_deltas": c.block_deltas,
            "invariant_blocks": c.rankings.iter().map(RankingCheck::is_invariant).collect::<Vec<_>>(),
            "optimal": c.optimal,
        })),
        "timings": r.timings,
    })
}

fn solve(args: SolveArgs) -> Result<()> {
    let inst = read_instance(&args.instance)?;
    let net = &inst.network;
    let m = net.horizon().num_instants();
    let k = args.k.resolve(m);
    let solver = Solver::new(net)?;
    let r = solver.solve(args.p, k, args.certify)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report_json(&r, m))?);
    } else if args.csv {
        println!("p,K,gap,phase1_s,phase2_s,total_s,gain");
        let t = r.timings;
        println!(
            "{},{},{},{},{},{},{}",
            args.p, k, r.gap, t.phase1_s, t.phase2_s, t.total_s, r.gain
        );
    } else {
        let s = &r.solution;
        println!("instance     {}", inst.name);
        println!("p / K / M    {} / {} / {}", args.p, k, m);
        println!("objective    {:.6}", s.objective);
        println!("lower bound  {:.6}", r.lower_bound);
        println!("gap          {:.6}", r.gap);
        println!("gain         {:.6}", r.gain);
        if let (Some(reference), Some(gain)) = (r.exact_reference, r.exact_gain) {
            println!("exact K=0    {reference:.6} (gain {gain:.6})");
        }
        println!("relocations  {} at nodes {:?}", s.relocations, s.plan.nodes());
        for b in s.plan.blocks() {
            let ids: Vec<&str> = s.locations[b.start]
                .open()
                .iter()
                .map(|&i| net.facilities()[i].as_str())
                .collect();
            println!("  periods {:>4}..{:<4} open {}", b.start, b.end, ids.join(" "));
        }
        if let Some(c) = &r.certificate {
            println!("certificate  delta {:.6}, optimal {}", c.delta, c.optimal);
            for (k, check) in c.rankings.iter().enumerate() {
                if let RankingCheck::Crossing {
                    first,
                    second,
                    period_a,
                    period_b,
                } = check
                {
                    println!(
                        "  block {k}: arcs {first} and {second} swap order between periods {period_a} and {period_b}"
                    );
                }
            }
        }
        let t = r.timings;
        println!(
            "time         phase I {:.3}s, phase II {:.3}s, total {:.3}s",
            t.phase1_s, t.phase2_s, t.total_s
        );
    }
    Ok(())
}

fn lb(args: LbArgs) -> Result<()> {
    let inst = read_instance(&args.instance)?;
    let solver = Solver::new(&inst.network)?;
    let radii = solver.period_optima(args.p)?;
    let total: f64 = radii.iter().sum();
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({ "lower_bound": total, "period_radii": radii }))?
        );
    } else {
        println!("{total}");
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut instances = Vec::new();
    for (path, inst) in read_instance_dir(&args.dir)? {
        instances.push(inst.with_context(|| format!("loading {}", path.display()))?);
    }
    if instances.is_empty() {
        bail!("no *.json instances in {}", args.dir.display());
    }
    let report = run_bench(&instances, &args.p, &args.k);
    for f in &report.failures {
        eprintln!("cell failed: {} p={} K={}: {}", f.instance, f.p, f.budget, f.message);
    }
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            report.write_csv(file)?;
        }
        None => report.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

fn check(args: CheckArgs) -> Result<()> {
    let inst = read_instance(&args.instance)?;
    let net = &inst.network;
    let solver = Solver::new(net)?;
    let periods: Vec<usize> = (0..net.horizon().num_periods()).collect();
    let ranking = check_ranking_invariance(solver.table(), &periods);
    let delta = full_horizon_factorization(net).map(|f| f.big_delta);
    if args.json {
        let out = json!({
            "name": inst.name,
            "facilities": net.num_facilities(),
            "customers": net.num_customers(),
            "instants": net.horizon().num_instants(),
            "valid": true,
            "delta": delta.as_ref().ok(),
            "ranking_invariant": ranking.is_invariant(),
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!(
            "{}: valid ({} facilities, {} customers, M = {})",
            inst.name,
            net.num_facilities(),
            net.num_customers(),
            net.horizon().num_instants()
        );
        match &delta {
            Ok(d) => println!("delta {d:.6}"),
            Err(e) => println!("delta unavailable: {e}"),
        }
        match ranking {
            RankingCheck::Invariant => println!("arc ranking invariant over the whole horizon"),
            RankingCheck::Crossing {
                first,
                second,
                period_a,
                period_b,
            } => {
                let (a, b) = (net.arc_id(first), net.arc_id(second));
                println!(
                    "ranking crossing: ({}, {}) vs ({}, {}) between periods {period_a} and {period_b}",
                    net.facilities()[a.facility],
                    net.customers()[a.customer],
                    net.facilities()[b.facility],
                    net.customers()[b.customer],
                );
            }
        }
    }
    Ok(())
}
