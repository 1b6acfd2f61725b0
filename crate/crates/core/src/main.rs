use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use ttpcd::engine::{Mode, RunConfig, ZMinMode};
use ttpcd::experiment::{compare_summary_sets, load_summaries, run_experiment, ExperimentSpec, Metric};
use ttpcd::generate::{generate_instance, GeneratorConfig};
use ttpcd::packing::PolicyKind;
use ttpcd::qd::GridConfig;
use ttpcd::tsp::TspGaConfig;

#[derive(Parser)]
#[command(
    name = "ttpcd",
    version,
    about = "Co-evolutionary diversity optimisation for the traveling thief problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (instance, mode, policy, seed) combination.
    Run(RunArgs),
    /// Compare two or more sets of run summaries.
    Compare(CompareArgs),
    /// Write a random instance in the benchmark format.
    GenInstance(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Instance files or glob patterns.
    #[arg(long, required = true, num_args = 1..)]
    instance: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "coea")]
    mode: Vec<Mode>,
    #[arg(long, value_delimiter = ',', default_value = "gamma2")]
    policy: Vec<PolicyKind>,
    /// Seeds: comma separated values or half-open ranges like 0..10.
    #[arg(long, env = "TTPCD_SEED", default_value = "0")]
    seeds: String,
    /// Global budget in evaluations per item.
    #[arg(long, default_value_t = 1_000_000)]
    budget_mult: u64,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha1: f64,
    #[arg(long, default_value_t = 0.20)]
    alpha2: f64,
    #[arg(long, default_value_t = 20)]
    delta1: usize,
    #[arg(long, default_value_t = 20)]
    delta2: usize,
    #[arg(long, default_value_t = 50)]
    mu: usize,
    #[arg(long, default_value = "dynamic")]
    zmin_mode: ZMinMode,
    /// Tour GA population size.
    #[arg(long, default_value_t = 100)]
    tsp_pop: usize,
    /// Tour GA crossovers per city.
    #[arg(long, default_value_t = 2000)]
    tsp_crossovers: usize,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Two or more summary globs, one per result set.
    #[arg(required = true, num_args = 2..)]
    sets: Vec<String>,
    #[arg(long, default_value = "h")]
    metric: Metric,
    #[arg(long, default_value_t = 0.05)]
    significance: f64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, env = "TTPCD_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.3)]
    capacity_factor: f64,
    #[arg(long)]
    correlated: bool,
    #[arg(long)]
    name: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
            if a >= b {
                bail!("empty seed range {part:?}");
            }
            seeds.extend(a..b);
        } else {
            seeds.push(part.parse().with_context(|| format!("bad seed {part:?}"))?);
        }
    }
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    Ok(seeds)
}

fn expand_instances(patterns: &[String]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in patterns {
        let matches: Vec<PathBuf> = glob::glob(p)?.filter_map(Result::ok).collect();
        if matches.is_empty() {
            // kept so the cell is reported as failed
            out.push(PathBuf::from(p));
        } else {
            out.extend(matches);
        }
    }
    Ok(out)
}

fn cmd_run(a: RunArgs) -> anyhow::Result<ExitCode> {
    let spec = ExperimentSpec {
        instances: expand_instances(&a.instance)?,
        modes: a.mode,
        policies: a.policy,
        seeds: parse_seeds(&a.seeds)?,
        base: RunConfig {
            budget_multiplier: a.budget_mult,
            alpha: a.alpha,
            mu: a.mu,
            grid: GridConfig {
                alpha1: a.alpha1,
                alpha2: a.alpha2,
                delta1: a.delta1,
                delta2: a.delta2,
            },
            zmin_mode: a.zmin_mode,
            tsp: TspGaConfig {
                population_size: a.tsp_pop,
                crossovers_per_city: a.tsp_crossovers,
                restarts: 1,
            },
            ..RunConfig::default()
        },
        out_dir: a.out,
        jobs: a
            .jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
    };
    let entries = run_experiment(&spec)?;
    let mut failed = 0;
    for e in &entries {
        if e.status == "ok" {
            println!("{} {} {} s{}: {}", e.instance, e.mode, e.policy, e.seed, e.summary);
        } else {
            failed += 1;
            eprintln!("{} {} {} s{}: {}", e.instance, e.mode, e.policy, e.seed, e.status);
        }
    }
    Ok(if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_compare(a: CompareArgs) -> anyhow::Result<ExitCode> {
    let mut sides = Vec::new();
    for pattern in &a.sets {
        let runs = load_summaries(pattern)?;
        if runs.len() < 2 {
            bail!("{pattern:?} matched {} summaries, need at least 2", runs.len());
        }
        sides.push((pattern.clone(), runs));
    }
    let report = compare_summary_sets(&sides, a.metric, a.significance)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.render());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(a: GenArgs) -> anyhow::Result<ExitCode> {
    let inst = generate_instance(&GeneratorConfig {
        n: a.n,
        m: a.m,
        seed: a.seed,
        capacity_factor: a.capacity_factor,
        correlated: a.correlated,
        name: a.name,
    })?;
    match a.out {
        Some(path) => std::fs::write(&path, inst.to_text()).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", inst.to_text()),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::GenInstance(a) => cmd_gen(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
