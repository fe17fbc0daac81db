//! Batched experiments: trial dispatch, per-trial records, exhaustive or
//! sampled verification, and the lower-bound measurement.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::adversary::{build_hard_instance, hard_instance_init, lift_config, AdversaryError, HardInstance};
use crate::baselines::{rotor_spec, srw_spec};
use crate::checks::{phase_budget, CheckSet, DetChecker, DetStats, RanChecker, RanStats, Violation};
use crate::det::{det_spec, DetSpec};
use crate::generate::{generate, Family};
use crate::graph::{GraphError, PortGraph};
use crate::ran::{ran_spec, RanSpec};
use crate::rng::trial_seed;
use crate::sim::{
    config_space_size, default_max_steps, enumerate_initial_configs, run, run_observed,
    sample_initial_config, Algorithm, Configuration, RunOptions, RunResult, SimError,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("cannot read graph file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgoChoice {
    Ran { c: u32 },
    Det { k: u32, stale_black_rule: bool },
    Srw,
    Rotor,
}

impl AlgoChoice {
    /// Builds the choice from CLI-style pieces, validating parameters.
    pub fn from_parts(name: &str, c: Option<u32>, k: Option<u32>) -> Result<Self, HarnessError> {
        match name {
            "ran" => {
                let c = c.ok_or_else(|| HarnessError::Config("--algo ran requires --c".into()))?;
                ran_spec(c).map_err(|_| HarnessError::Config("c must be ≥ 2".into()))?;
                Ok(AlgoChoice::Ran { c })
            }
            "det" => {
                let k = k.ok_or_else(|| HarnessError::Config("--algo det requires --k".into()))?;
                det_spec(k).map_err(|_| HarnessError::Config("k must be ≥ 1".into()))?;
                Ok(AlgoChoice::Det { k, stale_black_rule: true })
            }
            "srw" => Ok(AlgoChoice::Srw),
            "rotor" => Ok(AlgoChoice::Rotor),
            other => Err(HarnessError::Config(format!(
                "unknown algorithm {other:?} (expected ran, det, srw or rotor)"
            ))),
        }
    }

    pub fn ran(&self) -> Option<RanSpec> {
        match *self {
            AlgoChoice::Ran { c } => ran_spec(c).ok(),
            _ => None,
        }
    }

    pub fn det(&self) -> Option<DetSpec> {
        match *self {
            AlgoChoice::Det { k, stale_black_rule } => {
                det_spec(k).ok().map(|s| s.with_stale_black_rule(stale_black_rule))
            }
            _ => None,
        }
    }
}

impl fmt::Display for AlgoChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AlgoChoice::Ran { c } => write!(f, "ran(c={c})"),
            AlgoChoice::Det { k, .. } => write!(f, "det(k={k})"),
            AlgoChoice::Srw => f.write_str("srw"),
            AlgoChoice::Rotor => f.write_str("rotor"),
        }
    }
}

/// `family:NAME,key=value,...[,seed=S]` or `file:PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphSource {
    Family { family: Family, seed: u64 },
    File(PathBuf),
}

impl FromStr for GraphSource {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(GraphSource::File(PathBuf::from(path)));
        }
        let Some(spec) = s.strip_prefix("family:") else {
            return Err(HarnessError::Config(format!(
                "graph must be family:NAME,... or file:PATH, got {s:?}"
            )));
        };
        let mut seed = 0;
        let mut rest = Vec::new();
        for part in spec.split(',') {
            match part.trim().strip_prefix("seed=") {
                Some(v) => {
                    seed = v
                        .parse()
                        .map_err(|_| HarnessError::Config(format!("bad graph seed {v:?}")))?
                }
                None => rest.push(part),
            }
        }
        Ok(GraphSource::Family { family: rest.join(",").parse()?, seed })
    }
}

impl GraphSource {
    pub fn load(&self) -> Result<PortGraph, HarnessError> {
        match self {
            GraphSource::Family { family, seed } => Ok(generate(family, *seed)?),
            GraphSource::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|source| HarnessError::Io { path: path.clone(), source })?;
                Ok(text.parse()?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxSteps {
    Auto,
    Fixed(u64),
}

impl MaxSteps {
    pub fn resolve(self, g: &PortGraph) -> u64 {
        match self {
            MaxSteps::Auto => default_max_steps(g),
            MaxSteps::Fixed(s) => s,
        }
    }
}

impl FromStr for MaxSteps {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(MaxSteps::Auto);
        }
        match s.parse::<u64>() {
            Ok(v) if v > 0 => Ok(MaxSteps::Fixed(v)),
            _ => Err(HarnessError::Config(format!("--max-steps must be auto or a positive integer, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub algo: AlgoChoice,
    pub trials: u64,
    pub seed: u64,
    pub max_steps: MaxSteps,
    pub checks: CheckSet,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Watermark stored in every record.
    pub fn checks_label(&self) -> String {
        match self.algo {
            AlgoChoice::Det { stale_black_rule: false, .. } => format!("{},no-stage5-rule", self.checks),
            _ => self.checks.to_string(),
        }
    }
}

/// One line of output per trial; the key set is the same for every algorithm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub algo: String,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "D")]
    pub diameter: usize,
    pub seed: u64,
    pub trial: u64,
    pub cover_step: Option<u64>,
    pub moves: u64,
    pub color_changes: u64,
    pub phase_resets: u64,
    pub errors_raised: u64,
    pub trace_hash: String,
    pub violations: usize,
    pub checks: String,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub violations: Vec<Violation>,
    pub ran_stats: Option<RanStats>,
    pub det_stats: Option<DetStats>,
}

impl TrialOutcome {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.record.cover_step.is_some()
    }
}

/// Graph facts shared by every trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphInfo {
    pub n: usize,
    pub m: usize,
    pub diameter: usize,
}

impl GraphInfo {
    pub fn of(g: &PortGraph) -> Self {
        GraphInfo { n: g.n(), m: g.m(), diameter: g.diameter() }
    }
}

/// Correctness of the phased BFS is only claimed for `k ≥ D - 1`.
pub fn det_precondition_holds(k: u32, diameter: usize) -> bool {
    k as usize + 1 >= diameter
}

/// Seeds for trial `trial`: one for the initial configuration, one for the run.
pub fn trial_seeds(seed: u64, trial: u64) -> (u64, u64) {
    let base = trial_seed(seed, trial);
    (trial_seed(base, 0), trial_seed(base, 1))
}

fn make_record(
    label: &str,
    cfg: &ExperimentConfig,
    info: GraphInfo,
    trial: u64,
    res: &RunResult,
    violations: usize,
) -> TrialRecord {
    TrialRecord {
        algo: label.to_string(),
        n: info.n,
        m: info.m,
        diameter: info.diameter,
        seed: cfg.seed,
        trial,
        cover_step: res.cover_step,
        moves: res.moves_taken,
        color_changes: res.color_changes,
        phase_resets: res.phase_resets,
        errors_raised: res.errors_raised,
        trace_hash: format!("{:016x}", res.trace_hash),
        violations,
        checks: cfg.checks_label(),
    }
}

/// Runs `init` under `cfg.algo` with every applicable checker attached.
pub fn run_checked(
    cfg: &ExperimentConfig,
    g: &PortGraph,
    info: GraphInfo,
    trial: u64,
    init: AnyConfig,
    run_seed: u64,
) -> Result<TrialOutcome, HarnessError> {
    let opts = RunOptions::new(cfg.max_steps.resolve(g));
    let label = cfg.algo.to_string();
    let outcome = match init {
        AnyConfig::Ran(spec, c) => {
            let mut checker = RanChecker::new(g, cfg.checks);
            let (res, _) = run_observed(&spec, g, c, &opts, run_seed, &mut [&mut checker])?;
            checker.finish(&res);
            TrialOutcome {
                record: make_record(&label, cfg, info, trial, &res, checker.violations.len()),
                violations: checker.violations,
                ran_stats: Some(checker.stats),
                det_stats: None,
            }
        }
        AnyConfig::Det(spec, c) => {
            let checks = if det_precondition_holds(spec.k(), info.diameter) {
                cfg.checks
            } else {
                CheckSet::none()
            };
            let mut checker = DetChecker::new(g, &spec, checks);
            let (res, _) = run_observed(&spec, g, c, &opts, run_seed, &mut [&mut checker])?;
            checker.finish(&res);
            TrialOutcome {
                record: make_record(&label, cfg, info, trial, &res, checker.violations.len()),
                violations: checker.violations,
                ran_stats: None,
                det_stats: Some(checker.stats),
            }
        }
        AnyConfig::Srw(c) => {
            let res = run(&srw_spec(), g, &c, &opts, run_seed)?;
            plain_outcome(&label, cfg, info, trial, &res)
        }
        AnyConfig::Rotor(c) => {
            let res = run(&rotor_spec(), g, &c, &opts, run_seed)?;
            plain_outcome(&label, cfg, info, trial, &res)
        }
    };
    Ok(outcome)
}

fn plain_outcome(
    label: &str,
    cfg: &ExperimentConfig,
    info: GraphInfo,
    trial: u64,
    res: &RunResult,
) -> TrialOutcome {
    TrialOutcome {
        record: make_record(label, cfg, info, trial, res, 0),
        violations: Vec::new(),
        ran_stats: None,
        det_stats: None,
    }
}

/// An initial configuration of any supported algorithm.
#[derive(Debug, Clone)]
pub enum AnyConfig {
    Ran(RanSpec, Configuration<RanSpec>),
    Det(DetSpec, Configuration<DetSpec>),
    Srw(Configuration<crate::baselines::SrwSpec>),
    Rotor(Configuration<crate::baselines::RotorSpec>),
}

fn sample_any(algo: &AlgoChoice, g: &PortGraph, seed: u64) -> AnyConfig {
    match algo {
        AlgoChoice::Ran { .. } => {
            let spec = algo.ran().expect("validated");
            AnyConfig::Ran(spec, sample_initial_config(&spec, g, seed))
        }
        AlgoChoice::Det { .. } => {
            let spec = algo.det().expect("validated");
            AnyConfig::Det(spec, sample_initial_config(&spec, g, seed))
        }
        AlgoChoice::Srw => AnyConfig::Srw(sample_initial_config(&srw_spec(), g, seed)),
        AlgoChoice::Rotor => AnyConfig::Rotor(sample_initial_config(&rotor_spec(), g, seed)),
    }
}

/// One sampled trial; a pure function of `(cfg, g, trial)`.
pub fn run_trial(cfg: &ExperimentConfig, g: &PortGraph, info: GraphInfo, trial: u64) -> Result<TrialOutcome, HarnessError> {
    let (config_seed, run_seed) = trial_seeds(cfg.seed, trial);
    run_checked(cfg, g, info, trial, sample_any(&cfg.algo, g, config_seed), run_seed)
}

/// Every trial of `cfg`, in trial order, run on the current rayon pool.
pub fn run_trials(cfg: &ExperimentConfig, g: &PortGraph) -> Result<Vec<TrialOutcome>, HarnessError> {
    cfg.validate()?;
    let info = GraphInfo::of(g);
    (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, g, info, t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub covered: usize,
    pub cutoffs: usize,
    pub violations: usize,
    pub mean_cover: Option<f64>,
    pub median_cover: Option<u64>,
    pub max_cover: Option<u64>,
}

pub fn summarize(outcomes: &[TrialOutcome]) -> Summary {
    let mut covers: Vec<u64> = outcomes.iter().filter_map(|o| o.record.cover_step).collect();
    covers.sort_unstable();
    let mean = (!covers.is_empty())
        .then(|| covers.iter().map(|&c| c as f64).sum::<f64>() / covers.len() as f64);
    Summary {
        trials: outcomes.len(),
        covered: covers.len(),
        cutoffs: outcomes.len() - covers.len(),
        violations: outcomes.iter().map(|o| o.violations.len()).sum(),
        mean_cover: mean,
        median_cover: covers.get(covers.len().saturating_sub(1) / 2).copied(),
        max_cover: covers.last().copied(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub algo: String,
    pub mode: VerifyMode,
    pub configs: u64,
    pub notices: Vec<String>,
    pub violations: usize,
    pub cutoffs: usize,
    pub first_violation: Option<String>,
    pub worst_cover: Option<u64>,
    /// Name and value of the bound the worst case is compared with.
    pub bound_name: String,
    pub bound: Option<u64>,
    /// Largest observed ratio to `bound` (for the colored DFT: longest
    /// segment over `8m + n`).
    pub binding_constant: Option<f64>,
}

/// Checks `algo` on `g` from every configuration when the space fits in
/// `budget`, otherwise from `samples` sampled configurations.
pub fn verify(
    algo: &AlgoChoice,
    g: &PortGraph,
    budget: u128,
    samples: u64,
    seed: u64,
    max_steps: MaxSteps,
) -> Result<VerifyReport, HarnessError> {
    let info = GraphInfo::of(g);
    let cfg = ExperimentConfig { algo: *algo, trials: 1, seed, max_steps, checks: CheckSet::all() };
    let mut notices = Vec::new();
    let space = match algo {
        AlgoChoice::Ran { .. } => config_space_size(&algo.ran().unwrap(), g),
        AlgoChoice::Det { .. } => config_space_size(&algo.det().unwrap(), g),
        AlgoChoice::Srw => config_space_size(&srw_spec(), g),
        AlgoChoice::Rotor => config_space_size(&rotor_spec(), g),
    };
    let exhaustive = matches!(space, Some(s) if s <= budget);
    if !exhaustive {
        let size = space.map_or_else(|| "more than 2^128".to_string(), |s| s.to_string());
        notices.push(format!(
            "configuration space ({size}) exceeds budget {budget}; sampling {samples} configurations"
        ));
    }
    if let AlgoChoice::Det { k, .. } = algo {
        if !det_precondition_holds(*k, info.diameter) {
            notices.push(format!(
                "precondition k ≥ D - 1 fails (k = {k}, D = {}); assertions skipped",
                info.diameter
            ));
        }
    }
    let outcomes: Vec<TrialOutcome> = if exhaustive {
        let configs: Vec<AnyConfig> = match algo {
            AlgoChoice::Ran { .. } => {
                let spec = algo.ran().unwrap();
                enumerate_initial_configs(&spec, g, budget)?.map(|c| AnyConfig::Ran(spec, c)).collect()
            }
            AlgoChoice::Det { .. } => {
                let spec = algo.det().unwrap();
                enumerate_initial_configs(&spec, g, budget)?.map(|c| AnyConfig::Det(spec, c)).collect()
            }
            AlgoChoice::Srw => enumerate_initial_configs(&srw_spec(), g, budget)?.map(AnyConfig::Srw).collect(),
            AlgoChoice::Rotor => {
                enumerate_initial_configs(&rotor_spec(), g, budget)?.map(AnyConfig::Rotor).collect()
            }
        };
        configs
            .into_par_iter()
            .enumerate()
            .map(|(i, c)| run_checked(&cfg, g, info, i as u64, c, trial_seeds(seed, i as u64).1))
            .collect::<Result<_, _>>()?
    } else {
        (0..samples).into_par_iter().map(|t| run_trial(&cfg, g, info, t)).collect::<Result<_, _>>()?
    };

    let summary = summarize(&outcomes);
    let first_violation = outcomes.iter().find_map(|o| {
        o.violations.first().map(|v| format!("trial {}: {v}", o.record.trial))
    });
    let (m, n, d) = (info.m as u64, info.n as u64, info.diameter as u64);
    let (bound_name, bound, binding_constant) = match algo {
        AlgoChoice::Ran { .. } => {
            let seg = outcomes
                .iter()
                .filter_map(|o| o.ran_stats.as_ref().map(|s| s.longest_segment))
                .max()
                .unwrap_or(0);
            ("8m+n".to_string(), Some(8 * m + n), Some(seg as f64 / (8 * m + n) as f64))
        }
        AlgoChoice::Det { .. } => {
            let budget = phase_budget(g);
            let worst = outcomes
                .iter()
                .filter_map(|o| o.det_stats.as_ref().and_then(|s| s.first_reset))
                .max()
                .unwrap_or(0);
            ("m+nD (first reset)".to_string(), Some(budget / 50), Some(worst as f64 / (budget / 50) as f64))
        }
        AlgoChoice::Rotor => {
            let b = 4 * m * d;
            ("4mD".to_string(), Some(b), summary.max_cover.map(|c| c as f64 / b.max(1) as f64))
        }
        AlgoChoice::Srw => ("none".to_string(), None, None),
    };
    let mut violations = summary.violations;
    if let (AlgoChoice::Rotor, Some(b)) = (algo, bound) {
        violations += outcomes.iter().filter(|o| o.record.cover_step.is_some_and(|c| c > b)).count();
    }
    Ok(VerifyReport {
        algo: algo.to_string(),
        mode: if exhaustive { VerifyMode::Exhaustive } else { VerifyMode::Sampled },
        configs: outcomes.len() as u64,
        notices,
        violations,
        cutoffs: summary.cutoffs,
        first_violation,
        worst_cover: summary.max_cover,
        bound_name,
        bound,
        binding_constant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub algo: String,
    pub instance: HardInstance,
    pub n: usize,
    pub m: usize,
    pub trials: u64,
    pub mean_cover: f64,
    pub cutoffs: u64,
    /// `(m - 1) / 4` on the output graph.
    pub bound: f64,
}

fn lower_bound_for<A: Algorithm>(
    spec: &A,
    g_prime: &PortGraph,
    start: usize,
    trials: u64,
    seed: u64,
) -> Result<LowerBoundReport, HarnessError> {
    let instance = build_hard_instance(spec, g_prime, start, trials, seed)?;
    let base = hard_instance_init(spec, g_prime, start, seed);
    let init = lift_config(spec, &base, seed);
    let g = &instance.graph;
    let opts = RunOptions::for_graph(g);
    let covers: Vec<Option<u64>> = (0..trials)
        .into_par_iter()
        .map(|t| run(spec, g, &init, &opts, trial_seeds(seed, t).1).map(|r| r.cover_step))
        .collect::<Result<_, _>>()?;
    let done: Vec<u64> = covers.iter().flatten().copied().collect();
    let mean = done.iter().map(|&c| c as f64).sum::<f64>() / done.len().max(1) as f64;
    Ok(LowerBoundReport {
        algo: spec.name(),
        n: g.n(),
        m: g.m(),
        trials,
        mean_cover: mean,
        cutoffs: (covers.len() - done.len()) as u64,
        bound: (g.m() as f64 - 1.0) / 4.0,
        instance,
    })
}

/// Builds the hard instance for `algo` from `g_prime` and measures the mean
/// cover time on it.
pub fn lower_bound(
    algo: &AlgoChoice,
    g_prime: &PortGraph,
    start: usize,
    trials: u64,
    seed: u64,
) -> Result<LowerBoundReport, HarnessError> {
    match algo {
        AlgoChoice::Ran { .. } => lower_bound_for(&algo.ran().unwrap(), g_prime, start, trials, seed),
        AlgoChoice::Det { .. } => lower_bound_for(&algo.det().unwrap(), g_prime, start, trials, seed),
        AlgoChoice::Srw => lower_bound_for(&srw_spec(), g_prime, start, trials, seed),
        AlgoChoice::Rotor => lower_bound_for(&rotor_spec(), g_prime, start, trials, seed),
    }
}

/// Hard instance alone, without the cover measurement.
pub fn hard_instance(
    algo: &AlgoChoice,
    g_prime: &PortGraph,
    start: usize,
    trials: u64,
    seed: u64,
) -> Result<HardInstance, HarnessError> {
    let hi = match algo {
        AlgoChoice::Ran { .. } => build_hard_instance(&algo.ran().unwrap(), g_prime, start, trials, seed),
        AlgoChoice::Det { .. } => build_hard_instance(&algo.det().unwrap(), g_prime, start, trials, seed),
        AlgoChoice::Srw => build_hard_instance(&srw_spec(), g_prime, start, trials, seed),
        AlgoChoice::Rotor => build_hard_instance(&rotor_spec(), g_prime, start, trials, seed),
    }?;
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_graph_sources() {
        let src: GraphSource = "family:random_connected,n=32,m=64,seed=4".parse().unwrap();
        assert_eq!(
            src,
            GraphSource::Family { family: Family::RandomConnected { n: 32, m: 64 }, seed: 4 }
        );
        assert_eq!("file:g.pg".parse::<GraphSource>().unwrap(), GraphSource::File("g.pg".into()));
        assert!("clique:4".parse::<GraphSource>().is_err());
    }

    #[test]
    fn algo_validation_messages() {
        let err = AlgoChoice::from_parts("ran", Some(1), None).unwrap_err();
        assert_eq!(err.to_string(), "c must be ≥ 2");
        assert!(AlgoChoice::from_parts("det", None, Some(0)).is_err());
        assert!(AlgoChoice::from_parts("bfs", None, None).is_err());
    }

    #[test]
    fn max_steps_parse() {
        assert_eq!("auto".parse::<MaxSteps>().unwrap(), MaxSteps::Auto);
        assert_eq!("12".parse::<MaxSteps>().unwrap(), MaxSteps::Fixed(12));
        assert!("0".parse::<MaxSteps>().is_err());
    }

    #[test]
    fn trials_are_order_independent() {
        let g = generate(&Family::Cycle { n: 8 }, 1).unwrap();
        let cfg = ExperimentConfig {
            algo: AlgoChoice::Ran { c: 3 },
            trials: 6,
            seed: 11,
            max_steps: MaxSteps::Auto,
            checks: CheckSet::all(),
        };
        let all = run_trials(&cfg, &g).unwrap();
        let one = run_trial(&cfg, &g, GraphInfo::of(&g), 4).unwrap();
        assert_eq!(all[4].record, one.record);
    }
}
