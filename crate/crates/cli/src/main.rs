use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sagex_core::checks::CheckSet;
use sagex_core::harness::{
    det_precondition_holds, hard_instance, lower_bound, run_trials, summarize, verify, AlgoChoice,
    ExperimentConfig, GraphSource, HarnessError, MaxSteps, TrialOutcome,
};
use sagex_core::PortGraph;
use serde::Serialize;
use thiserror::Error;

const NO_STAGE5_RULE: &str = "no-stage5-rule";

#[derive(Parser)]
#[command(name = "sagex", version)]
#[command(about = "Simulate self-stabilizing single-agent exploration of port-numbered graphs")]
struct Cli {
    /// Worker threads (default: one per core)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trials from sampled initial configurations and emit one record per trial
    Run {
        #[command(flatten)]
        algo: AlgoArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value = "auto")]
        max_steps: MaxSteps,
        /// `all`, `none`, or a comma-separated list; `no-stage5-rule` turns off
        /// the stale-black-node rule of `--algo det`
        #[arg(long, default_value = "all")]
        checks: String,
        #[arg(long, value_enum, default_value_t = Format::Jsonl)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every initial configuration, or a large sample when there are too many
    Verify {
        #[command(flatten)]
        algo: AlgoArgs,
        #[command(flatten)]
        input: InputArgs,
        /// Largest configuration space enumerated exhaustively
        #[arg(long, default_value_t = 1_000_000)]
        budget: u128,
        /// Sampled configurations when the space exceeds the budget
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value = "auto")]
        max_steps: MaxSteps,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split the edge the algorithm is least likely to cross early; writes the graph and a JSON sidecar
    HardInstance {
        #[command(flatten)]
        algo: AlgoArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the hard instance and compare its mean cover time with (m - 1) / 4
    Lowerbound {
        #[command(flatten)]
        algo: AlgoArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = 2000)]
        trials: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a graph in the port-graph text format
    Gen {
        #[arg(long)]
        graph: GraphSource,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct AlgoArgs {
    #[arg(long, value_enum)]
    algo: AlgoName,
    /// Number of colors for `ran`
    #[arg(long)]
    c: Option<u32>,
    /// Depth parameter for `det`
    #[arg(long)]
    k: Option<u32>,
}

#[derive(Args)]
struct InputArgs {
    /// `family:NAME,key=value,...[,seed=S]` or `file:PATH`
    #[arg(long)]
    graph: GraphSource,
    #[arg(long, env = "SAGEX_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoName {
    Ran,
    Det,
    Srw,
    Rotor,
}

impl AlgoName {
    fn as_str(self) -> &'static str {
        match self {
            AlgoName::Ran => "ran",
            AlgoName::Det => "det",
            AlgoName::Srw => "srw",
            AlgoName::Rotor => "rotor",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

enum Verdict {
    Clean,
    Failed,
}

impl AlgoArgs {
    fn choice(&self) -> Result<AlgoChoice, CliError> {
        Ok(AlgoChoice::from_parts(self.algo.as_str(), self.c, self.k)?)
    }
}

fn parse_checks(list: &str, algo: &mut AlgoChoice) -> Result<CheckSet, CliError> {
    let mut names = Vec::new();
    for item in list.split(',').map(str::trim) {
        if item != NO_STAGE5_RULE {
            names.push(item);
            continue;
        }
        match algo {
            AlgoChoice::Det { stale_black_rule, .. } => *stale_black_rule = false,
            _ => return Err(CliError::Usage(format!("{NO_STAGE5_RULE} applies to --algo det only"))),
        }
    }
    let rest = names.join(",");
    let set = if rest.is_empty() { CheckSet::all() } else { CheckSet::parse(&rest).map_err(CliError::Usage)? };
    Ok(set)
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|source| write_error(path, source))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_error(path: &Path, source: io::Error) -> CliError {
    CliError::Write { path: path.display().to_string(), source }
}

fn out_name(out: Option<&Path>) -> String {
    out.map_or_else(|| "stdout".to_string(), |p| p.display().to_string())
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut w = sink(out)?;
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    writeln!(w, "{text}")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Write { path: out_name(out), source: e })
}

fn write_records(outcomes: &[TrialOutcome], format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let io_err = |e| CliError::Write { path: out_name(out), source: e };
    match format {
        Format::Jsonl => {
            let mut w = sink(out)?;
            for o in outcomes {
                let line = serde_json::to_string(&o.record).expect("records serialize");
                writeln!(w, "{line}").map_err(io_err)?;
            }
            w.flush().map_err(io_err)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink(out)?);
            for o in outcomes {
                w.serialize(&o.record)?;
            }
            w.flush().map_err(io_err)
        }
    }
}

fn load(input: &InputArgs) -> Result<PortGraph, CliError> {
    Ok(input.graph.load()?)
}

fn cmd_run(
    algo: &AlgoArgs,
    input: &InputArgs,
    trials: u64,
    max_steps: MaxSteps,
    checks: &str,
    format: Format,
    out: Option<&Path>,
) -> Result<Verdict, CliError> {
    let mut choice = algo.choice()?;
    let checks = parse_checks(checks, &mut choice)?;
    let g = load(input)?;
    let cfg = ExperimentConfig { algo: choice, trials, seed: input.seed, max_steps, checks };
    cfg.validate()?;
    if let AlgoChoice::Det { k, .. } = choice {
        if !det_precondition_holds(k, g.diameter()) {
            eprintln!("notice: k + 1 < D = {}; invariant checks are skipped", g.diameter());
        }
    }
    let outcomes = run_trials(&cfg, &g)?;
    write_records(&outcomes, format, out)?;

    let s = summarize(&outcomes);
    let fmt_opt = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
    eprintln!(
        "{choice}: n={} m={} D={} trials={} covered={} cutoffs={} violations={} mean={} median={} max={}",
        g.n(),
        g.m(),
        g.diameter(),
        s.trials,
        s.covered,
        s.cutoffs,
        s.violations,
        s.mean_cover.map_or_else(|| "-".to_string(), |m| format!("{m:.1}")),
        fmt_opt(s.median_cover),
        fmt_opt(s.max_cover),
    );
    let mut failed = false;
    for o in &outcomes {
        let r = &o.record;
        for v in &o.violations {
            failed = true;
            eprintln!("violation: seed {} trial {} trace_hash {}: {v}", r.seed, r.trial, r.trace_hash);
        }
        if r.cover_step.is_none() {
            failed = true;
            eprintln!("cutoff: seed {} trial {} after {} moves", r.seed, r.trial, r.moves);
        }
    }
    Ok(if failed { Verdict::Failed } else { Verdict::Clean })
}

fn cmd_verify(
    algo: &AlgoArgs,
    input: &InputArgs,
    budget: u128,
    samples: u64,
    max_steps: MaxSteps,
    out: Option<&Path>,
) -> Result<Verdict, CliError> {
    let choice = algo.choice()?;
    let g = load(input)?;
    let report = verify(&choice, &g, budget, samples, input.seed, max_steps)?;
    for notice in &report.notices {
        eprintln!("notice: {notice}");
    }
    write_json(&report, out)?;
    let checked = match choice {
        AlgoChoice::Det { k, .. } => det_precondition_holds(k, g.diameter()),
        _ => true,
    };
    if let Some(v) = &report.first_violation {
        eprintln!("violation: seed {} {v}", input.seed);
    }
    let failed = report.violations > 0 || (checked && report.cutoffs > 0);
    Ok(if failed { Verdict::Failed } else { Verdict::Clean })
}

fn cmd_hard_instance(
    algo: &AlgoArgs,
    input: &InputArgs,
    start: usize,
    trials: u64,
    out: &Path,
) -> Result<Verdict, CliError> {
    let choice = algo.choice()?;
    let g = load(input)?;
    let hi = hard_instance(&choice, &g, start, trials, input.seed)?;
    std::fs::write(out, hi.graph.to_text()).map_err(|e| write_error(out, e))?;
    let sidecar = PathBuf::from(format!("{}.json", out.display()));
    write_json(&hi, Some(&sidecar))?;
    eprintln!(
        "split edge {}-{} (crossing estimate {:.3}); n={} m={} written to {} and {}",
        hi.removed_edge.0,
        hi.removed_edge.1,
        hi.est_traverse_prob,
        hi.graph.n(),
        hi.graph.m(),
        out.display(),
        sidecar.display()
    );
    Ok(Verdict::Clean)
}

fn cmd_lowerbound(
    algo: &AlgoArgs,
    input: &InputArgs,
    start: usize,
    trials: u64,
    out: Option<&Path>,
) -> Result<Verdict, CliError> {
    let choice = algo.choice()?;
    let g = load(input)?;
    let report = lower_bound(&choice, &g, start, trials, input.seed)?;
    write_json(&report, out)?;
    eprintln!(
        "{}: mean cover {:.1} over {} runs, (m-1)/4 = {:.2}",
        report.algo, report.mean_cover, report.trials, report.bound
    );
    Ok(if report.cutoffs > 0 { Verdict::Failed } else { Verdict::Clean })
}

fn cmd_gen(graph: &GraphSource, out: Option<&Path>) -> Result<Verdict, CliError> {
    let g = graph.load()?;
    let mut w = sink(out)?;
    w.write_all(g.to_text().as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Write { path: out_name(out), source: e })?;
    eprintln!("n={} m={} D={}", g.n(), g.m(), g.diameter());
    Ok(Verdict::Clean)
}

fn dispatch(cli: Cli) -> Result<Verdict, CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("jobs must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Run { algo, input, trials, max_steps, checks, format, out } => {
            cmd_run(algo, input, *trials, *max_steps, checks, *format, out.as_deref())
        }
        Command::Verify { algo, input, budget, samples, max_steps, out } => {
            cmd_verify(algo, input, *budget, *samples, *max_steps, out.as_deref())
        }
        Command::HardInstance { algo, input, start, trials, out } => {
            cmd_hard_instance(algo, input, *start, *trials, out)
        }
        Command::Lowerbound { algo, input, start, trials, out } => {
            cmd_lowerbound(algo, input, *start, *trials, out.as_deref())
        }
        Command::Gen { graph, out } => cmd_gen(graph, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(Verdict::Clean) => ExitCode::SUCCESS,
        Ok(Verdict::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
