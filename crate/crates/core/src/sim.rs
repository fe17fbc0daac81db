//! The single-agent machine model.
//!
//! A configuration is the agent's position and in-port, its state, and one
//! whiteboard per node. Each step invokes the algorithm's transition rule
//! once at the current node (on arrival, or at the very start) and then
//! migrates through the returned port. Moves are the unit of time: covering
//! the start node costs zero moves.

use std::fmt::Debug;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{NodeSet, PortGraph};
use crate::rng::RngStream;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("transition left its declared domain at step {step}: {detail}")]
    DomainViolation { step: u64, detail: String },
    #[error("max_steps must be positive")]
    ZeroMaxSteps,
    #[error("configuration space has {} configurations, over budget {budget}",
        size.map_or_else(|| "more than 2^128".to_string(), |s| s.to_string()))]
    BudgetExceeded { size: Option<u128>, budget: u128 },
    #[error("invalid algorithm parameter: {0}")]
    InvalidParam(String),
    #[error("unsupported graph: {0}")]
    Unsupported(String),
}

/// Migration kinds. The first three belong to the colored DFT; the rest tag
/// the walks and the phased BFS so traces stay readable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Forward,
    BackI,
    BackII,
    Walk,
    InitOut,
    InitBack,
    TreeDown,
    TreeUp,
    ExpandOut,
    ExpandBack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetCause {
    Error,
    NothingFound,
    Wrap,
}

/// Inconsistencies the phased BFS can detect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCause {
    DistMismatch,
    ParentInChild,
    ParentPortMismatch,
    ChildPortMissing,
    StaleBlackNode,
}

/// Local notifications a transition emits; the engine turns them into
/// [`Event`]s carrying node ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    ColorChange { color: u32 },
    DftStart { color: u32 },
    PhaseReset { cause: ResetCause },
    /// End of one circulation (stage 1..=5) or of initialization (stage 0).
    StageDone { phase: u32, stage: u8, found: bool, error: bool },
    Error { cause: ErrorCause },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Migration {
    pub port: usize,
    pub kind: MoveKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MoveRecord {
    pub from: usize,
    pub to: usize,
    pub out_port: usize,
    pub in_port: usize,
    pub kind: MoveKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Move(MoveRecord),
    ColorChange { node: usize, color: u32 },
    PhaseReset { node: usize, cause: ResetCause },
    ErrorRaised { node: usize, cause: ErrorCause },
    /// `marked` holds the nodes already carrying the new color, read before
    /// the start node is recolored.
    DftStart { node: usize, color: u32, marked: NodeSet },
    DftEnd { node: usize },
    StageDone {
        node: usize,
        phase: u32,
        stage: u8,
        moves: u64,
        found: bool,
        error_cause: Option<ErrorCause>,
    },
}

/// What a transition may touch besides its state: randomness and signals.
pub struct StepContext<'a> {
    rng: &'a mut RngStream,
    signals: &'a mut Vec<Signal>,
}

impl<'a> StepContext<'a> {
    pub fn new(rng: &'a mut RngStream, signals: &'a mut Vec<Signal>) -> Self {
        StepContext { rng, signals }
    }

    pub fn rng(&mut self) -> &mut RngStream {
        self.rng
    }

    pub fn emit(&mut self, signal: Signal) {
        self.signals.push(signal);
    }
}

/// A program `(transition, agent states, whiteboard states per degree)`.
///
/// Domains are finite and indexable so initial configurations can be
/// sampled uniformly or enumerated exhaustively.
pub trait Algorithm: Sync {
    type Agent: Clone + PartialEq + Debug + Send + Sync;
    type Board: Clone + PartialEq + Debug + Send + Sync;

    fn name(&self) -> String;
    fn is_randomized(&self) -> bool;

    fn agent_domain_size(&self) -> u128;
    fn agent_state(&self, index: u128) -> Self::Agent;
    fn agent_in_domain(&self, agent: &Self::Agent) -> bool;

    fn board_domain_size(&self, degree: usize) -> u128;
    fn board_state(&self, degree: usize, index: u128) -> Self::Board;
    fn board_in_domain(&self, degree: usize, board: &Self::Board) -> bool;

    /// One invocation of the rule at a node of degree `degree` entered via
    /// `in_port`. Updates `agent` and `board` in place and returns the exit.
    fn transition(
        &self,
        degree: usize,
        in_port: usize,
        agent: &mut Self::Agent,
        board: &mut Self::Board,
        ctx: &mut StepContext<'_>,
    ) -> Migration;

    /// Color stored on a whiteboard, for algorithms that color nodes.
    fn board_color(&self, _board: &Self::Board) -> Option<u32> {
        None
    }

    fn check_graph(&self, _g: &PortGraph) -> Result<(), SimError> {
        Ok(())
    }
}

pub struct Configuration<A: Algorithm> {
    pub pos: usize,
    pub in_port: usize,
    pub agent: A::Agent,
    pub boards: Vec<A::Board>,
}

// derives would demand bounds on `A` itself
impl<A: Algorithm> Clone for Configuration<A> {
    fn clone(&self) -> Self {
        Configuration {
            pos: self.pos,
            in_port: self.in_port,
            agent: self.agent.clone(),
            boards: self.boards.clone(),
        }
    }
}

impl<A: Algorithm> PartialEq for Configuration<A> {
    fn eq(&self, other: &Self) -> bool {
        self.pos == other.pos
            && self.in_port == other.in_port
            && self.agent == other.agent
            && self.boards == other.boards
    }
}

impl<A: Algorithm> Debug for Configuration<A> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Configuration")
            .field("pos", &self.pos)
            .field("in_port", &self.in_port)
            .field("agent", &self.agent)
            .field("boards", &self.boards)
            .finish()
    }
}

impl<A: Algorithm> Configuration<A> {
    pub fn validate(&self, spec: &A, g: &PortGraph) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.pos >= g.n() {
            return bad(format!("position {} outside graph", self.pos));
        }
        let deg = g.degree(self.pos);
        if self.in_port >= deg.max(1) {
            return bad(format!("in-port {} invalid at degree {deg}", self.in_port));
        }
        if self.boards.len() != g.n() {
            return bad(format!("{} whiteboards for {} nodes", self.boards.len(), g.n()));
        }
        if !spec.agent_in_domain(&self.agent) {
            return bad(format!("agent state {:?} outside domain", self.agent));
        }
        for (v, b) in self.boards.iter().enumerate() {
            if !spec.board_in_domain(g.degree(v), b) {
                return bad(format!("whiteboard of node {v} outside domain: {b:?}"));
            }
        }
        Ok(())
    }
}

/// Applies one transition and migration. Returns the record and the
/// whiteboard of the departure node as it was before the transition.
fn apply<A: Algorithm>(
    spec: &A,
    g: &PortGraph,
    cfg: &mut Configuration<A>,
    rng: &mut RngStream,
    signals: &mut Vec<Signal>,
    step_no: u64,
) -> Result<(MoveRecord, A::Board), SimError> {
    let from = cfg.pos;
    let deg = g.degree(from);
    let before = cfg.boards[from].clone();
    let mut board = before.clone();
    let draws = rng.counter();
    let mig = {
        let mut ctx = StepContext { rng, signals };
        spec.transition(deg, cfg.in_port, &mut cfg.agent, &mut board, &mut ctx)
    };
    let violation = |detail: String| SimError::DomainViolation { step: step_no, detail };
    if !spec.is_randomized() && rng.counter() != draws {
        return Err(violation("deterministic transition consumed randomness".into()));
    }
    if mig.port >= deg {
        return Err(violation(format!("exit port {} at degree {deg}", mig.port)));
    }
    if !spec.agent_in_domain(&cfg.agent) {
        return Err(violation(format!("agent state {:?}", cfg.agent)));
    }
    if !spec.board_in_domain(deg, &board) {
        return Err(violation(format!("whiteboard {board:?} at node {from}")));
    }
    cfg.boards[from] = board;
    let (to, back) = g.neighbor(from, mig.port);
    debug_assert_eq!(g.neighbor(to, back), (from, mig.port));
    cfg.pos = to;
    cfg.in_port = back;
    Ok((MoveRecord { from, to, out_port: mig.port, in_port: back, kind: mig.kind }, before))
}

/// One transition plus migration, updating `cfg` in place.
pub fn step<A: Algorithm>(
    spec: &A,
    g: &PortGraph,
    cfg: &mut Configuration<A>,
    rng: &mut RngStream,
) -> Result<(MoveRecord, Vec<Signal>), SimError> {
    if g.degree(cfg.pos) == 0 {
        return Err(SimError::InvalidConfig("agent on an isolated node cannot move".into()));
    }
    let mut signals = Vec::new();
    let (rec, _) = apply(spec, g, cfg, rng, &mut signals, 0)?;
    Ok((rec, signals))
}

/// Watches a run step by step; used for invariant checking.
pub trait Observer<A: Algorithm> {
    fn on_start(&mut self, _g: &PortGraph, _cfg: &Configuration<A>) {}

    /// Called after move number `step` (1-based) with the events it produced.
    fn on_step(&mut self, g: &PortGraph, step: u64, events: &[Event], cfg: &Configuration<A>);

    /// Keeps the run going after cover until the observer has what it needs.
    fn wants_more(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub max_steps: u64,
    pub record_events: bool,
    /// Extra moves to simulate after cover.
    pub post_cover_steps: u64,
}

impl RunOptions {
    pub fn new(max_steps: u64) -> Self {
        RunOptions { max_steps, record_events: false, post_cover_steps: 0 }
    }

    /// Default cutoff `64 (mD + m + nD)` for `g`.
    pub fn for_graph(g: &PortGraph) -> Self {
        RunOptions::new(default_max_steps(g))
    }

    pub fn recording(mut self) -> Self {
        self.record_events = true;
        self
    }
}

pub fn default_max_steps(g: &PortGraph) -> u64 {
    let (n, m, d) = (g.n() as u64, g.m() as u64, g.diameter() as u64);
    64 * (m * d + m + n * d).max(1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub moves_taken: u64,
    /// First move count at which every node has been visited; `None` on cutoff.
    pub cover_step: Option<u64>,
    pub visited: NodeSet,
    pub events: Vec<Event>,
    pub trace_hash: u64,
    pub color_changes: u64,
    pub phase_resets: u64,
    pub errors_raised: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over `(from, to, out_port)` of every move, each as little-endian u64.
#[derive(Debug, Clone, Copy)]
pub struct TraceHasher(u64);

impl Default for TraceHasher {
    fn default() -> Self {
        TraceHasher(FNV_OFFSET)
    }
}

impl TraceHasher {
    pub fn push(&mut self, rec: &MoveRecord) {
        for word in [rec.from as u64, rec.to as u64, rec.out_port as u64] {
            for byte in word.to_le_bytes() {
                self.0 = (self.0 ^ u64::from(byte)).wrapping_mul(FNV_PRIME);
            }
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

pub fn run<A: Algorithm>(
    spec: &A,
    g: &PortGraph,
    init: &Configuration<A>,
    opts: &RunOptions,
    seed: u64,
) -> Result<RunResult, SimError> {
    run_observed(spec, g, init.clone(), opts, seed, &mut []).map(|(r, _)| r)
}

/// Runs until cover (plus any post-cover horizon the options or observers
/// request) or until `max_steps` moves. Returns the final configuration too.
pub fn run_observed<A: Algorithm>(
    spec: &A,
    g: &PortGraph,
    mut cfg: Configuration<A>,
    opts: &RunOptions,
    seed: u64,
    observers: &mut [&mut dyn Observer<A>],
) -> Result<(RunResult, Configuration<A>), SimError> {
    if opts.max_steps == 0 {
        return Err(SimError::ZeroMaxSteps);
    }
    spec.check_graph(g)?;
    cfg.validate(spec, g)?;
    let n = g.n();
    let mut rng = RngStream::new(seed);
    let mut visited = NodeSet::new(n);
    visited.insert(cfg.pos);
    let mut result = RunResult {
        moves_taken: 0,
        cover_step: (n == 1).then_some(0),
        visited: NodeSet::new(n),
        events: Vec::new(),
        trace_hash: 0,
        color_changes: 0,
        phase_resets: 0,
        errors_raised: 0,
    };
    for obs in observers.iter_mut() {
        obs.on_start(g, &cfg);
    }
    let mut hasher = TraceHasher::default();
    let mut signals = Vec::new();
    let mut events = Vec::new();
    let mut dft_open = false;
    let mut stage_moves = 0u64;
    let mut stage_error: Option<ErrorCause> = None;

    while result.moves_taken < opts.max_steps && n > 1 {
        if let Some(c) = result.cover_step {
            let horizon_done = result.moves_taken >= c + opts.post_cover_steps;
            if horizon_done && !observers.iter().any(|o| o.wants_more()) {
                break;
            }
        }
        let step_no = result.moves_taken + 1;
        signals.clear();
        events.clear();
        let here = cfg.pos;
        let (rec, before) = apply(spec, g, &mut cfg, &mut rng, &mut signals, step_no)?;
        result.moves_taken = step_no;
        stage_moves += 1;
        for &sig in &signals {
            match sig {
                Signal::ColorChange { color } => {
                    result.color_changes += 1;
                    events.push(Event::ColorChange { node: here, color });
                }
                Signal::DftStart { color } => {
                    if dft_open {
                        events.push(Event::DftEnd { node: here });
                    }
                    dft_open = true;
                    let mut marked = NodeSet::new(n);
                    for (v, b) in cfg.boards.iter().enumerate() {
                        let b = if v == here { &before } else { b };
                        if spec.board_color(b) == Some(color) {
                            marked.insert(v);
                        }
                    }
                    events.push(Event::DftStart { node: here, color, marked });
                }
                Signal::PhaseReset { cause } => {
                    result.phase_resets += 1;
                    events.push(Event::PhaseReset { node: here, cause });
                }
                Signal::Error { cause } => {
                    result.errors_raised += 1;
                    stage_error = Some(cause);
                    events.push(Event::ErrorRaised { node: here, cause });
                }
                Signal::StageDone { phase, stage, found, error } => {
                    // the migration that follows belongs to the next stage
                    events.push(Event::StageDone {
                        node: here,
                        phase,
                        stage,
                        moves: stage_moves - 1,
                        found,
                        error_cause: if error { stage_error } else { None },
                    });
                    stage_moves = 1;
                    stage_error = None;
                }
            }
        }
        events.push(Event::Move(rec));
        hasher.push(&rec);
        if visited.insert(rec.to) && visited.is_full() {
            result.cover_step = Some(step_no);
        }
        for obs in observers.iter_mut() {
            obs.on_step(g, step_no, &events, &cfg);
        }
        if opts.record_events {
            result.events.append(&mut events);
        }
    }
    result.visited = visited;
    result.trace_hash = hasher.finish();
    Ok((result, cfg))
}

/// Draws `in_port`, agent state and every whiteboard (in node order) for an
/// agent placed at `pos`.
pub fn sample_config_at<A: Algorithm>(
    spec: &A,
    g: &PortGraph,
    pos: usize,
    rng: &mut RngStream,
) -> Configuration<A> {
    let in_port = rng.below_usize(g.degree(pos).max(1));
    let agent = spec.agent_state(rng.below_u128(spec.agent_domain_size()));
    let boards = (0..g.n())
        .map(|v| {
            let d = g.degree(v);
            spec.board_state(d, rng.below_u128(spec.board_domain_size(d)))
        })
        .collect();
    Configuration { pos, in_port, agent, boards }
}

/// Uniform independent draw of every component of a configuration.
pub fn sample_initial_config<A: Algorithm>(spec: &A, g: &PortGraph, seed: u64) -> Configuration<A> {
    let mut rng = RngStream::new(seed);
    let pos = rng.below_usize(g.n());
    sample_config_at(spec, g, pos, &mut rng)
}

/// Size of the configuration space, `None` if it overflows `u128`.
pub fn config_space_size<A: Algorithm>(spec: &A, g: &PortGraph) -> Option<u128> {
    let placements: u128 = (0..g.n()).map(|v| g.degree(v).max(1) as u128).sum();
    let mut total = placements.checked_mul(spec.agent_domain_size())?;
    for v in 0..g.n() {
        total = total.checked_mul(spec.board_domain_size(g.degree(v)))?;
    }
    Some(total)
}

/// Every configuration exactly once, lexicographic in
/// `(pos, in_port, agent, boards[0], ..., boards[n-1])`.
pub fn enumerate_initial_configs<'a, A: Algorithm>(
    spec: &'a A,
    g: &'a PortGraph,
    budget: u128,
) -> Result<ConfigEnumerator<'a, A>, SimError> {
    let size = config_space_size(spec, g);
    match size {
        Some(s) if s <= budget => {}
        _ => return Err(SimError::BudgetExceeded { size, budget }),
    }
    let placements: Vec<(usize, usize)> = (0..g.n())
        .flat_map(|v| (0..g.degree(v).max(1)).map(move |q| (v, q)))
        .collect();
    let mut radix = vec![placements.len() as u128, spec.agent_domain_size()];
    radix.extend((0..g.n()).map(|v| spec.board_domain_size(g.degree(v))));
    Ok(ConfigEnumerator {
        spec,
        g,
        placements,
        digits: vec![0; radix.len()],
        radix,
        done: false,
    })
}

pub struct ConfigEnumerator<'a, A: Algorithm> {
    spec: &'a A,
    g: &'a PortGraph,
    placements: Vec<(usize, usize)>,
    radix: Vec<u128>,
    digits: Vec<u128>,
    done: bool,
}

impl<A: Algorithm> Iterator for ConfigEnumerator<'_, A> {
    type Item = Configuration<A>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let (pos, in_port) = self.placements[self.digits[0] as usize];
        let cfg = Configuration {
            pos,
            in_port,
            agent: self.spec.agent_state(self.digits[1]),
            boards: (0..self.g.n())
                .map(|v| self.spec.board_state(self.g.degree(v), self.digits[v + 2]))
                .collect(),
        };
        self.done = true;
        for i in (0..self.digits.len()).rev() {
            self.digits[i] += 1;
            if self.digits[i] < self.radix[i] {
                self.done = false;
                break;
            }
            self.digits[i] = 0;
        }
        Some(cfg)
    }
}
