//! Runtime invariant checkers, attached to runs as observers.
//!
//! Each checker records violations instead of panicking so a harness can
//! report every failing run with the seed that reproduces it.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::det::{tree_snapshot, Color, DetPc, DetSpec};
use crate::graph::{NodeSet, PortGraph};
use crate::ran::RanSpec;
use crate::sim::{Configuration, Event, MoveKind, Observer, RunResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Segment,
    DftCoverage,
    BackOrder,
    ColorCap,
    CoverBound,
    FreshColor,
    FirstReset,
    PostResetCover,
    TreeSpan,
    NoError,
    ColorDiscipline,
    CirculationCost,
    ResetSite,
}

impl Check {
    pub const ALL: [Check; 13] = [
        Check::Segment,
        Check::DftCoverage,
        Check::BackOrder,
        Check::ColorCap,
        Check::CoverBound,
        Check::FreshColor,
        Check::FirstReset,
        Check::PostResetCover,
        Check::TreeSpan,
        Check::NoError,
        Check::ColorDiscipline,
        Check::CirculationCost,
        Check::ResetSite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Segment => "segment",
            Check::DftCoverage => "dft-coverage",
            Check::BackOrder => "back-order",
            Check::ColorCap => "color-cap",
            Check::CoverBound => "cover-bound",
            Check::FreshColor => "fresh-color",
            Check::FirstReset => "first-reset",
            Check::PostResetCover => "post-reset-cover",
            Check::TreeSpan => "tree-span",
            Check::NoError => "no-error",
            Check::ColorDiscipline => "color-discipline",
            Check::CirculationCost => "circulation-cost",
            Check::ResetSite => "reset-site",
        }
    }

    fn bit(self) -> u32 {
        1 << self as u32
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown check `{s}`"))
    }
}

/// A set of enabled checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckSet(u32);

impl CheckSet {
    pub fn all() -> Self {
        CheckSet(Check::ALL.iter().fold(0, |acc, c| acc | c.bit()))
    }

    pub fn none() -> Self {
        CheckSet(0)
    }

    pub fn contains(self, c: Check) -> bool {
        self.0 & c.bit() != 0
    }

    pub fn with(self, c: Check) -> Self {
        CheckSet(self.0 | c.bit())
    }

    pub fn without(self, c: Check) -> Self {
        CheckSet(self.0 & !c.bit())
    }

    pub fn is_all(self) -> bool {
        self == CheckSet::all()
    }

    pub fn iter(self) -> impl Iterator<Item = Check> {
        Check::ALL.into_iter().filter(move |c| self.contains(*c))
    }

    /// `all`, `none`, or a comma-separated list of check names.
    pub fn parse(list: &str) -> Result<Self, String> {
        match list.trim() {
            "all" => Ok(CheckSet::all()),
            "none" | "" => Ok(CheckSet::none()),
            items => items
                .split(',')
                .map(|s| s.trim().parse::<Check>())
                .try_fold(CheckSet::none(), |set, c| Ok(set.with(c?))),
        }
    }
}

impl fmt::Display for CheckSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_all() {
            return f.write_str("all");
        }
        if self.0 == 0 {
            return f.write_str("none");
        }
        let names: Vec<_> = self.iter().map(Check::name).collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub check: Check,
    pub step: u64,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at move {}: {}", self.check, self.step, self.detail)
    }
}

/// Per-run observations behind the fresh-color statistics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RanStats {
    /// Freshness (no node carried the new color) of each DFT start, in order.
    pub fresh_starts: Vec<bool>,
    /// DFT starts at or before the cover move.
    pub dfts_to_cover: u64,
    pub longest_segment: u64,
    pub completed_dfts: u64,
}

struct OpenDft {
    start: usize,
    region: NodeSet,
    fresh: bool,
    seen: NodeSet,
}

/// Checks the colored-DFT invariants of one run.
pub struct RanChecker {
    enabled: CheckSet,
    n: usize,
    diameter: usize,
    segment_bound: u64,
    segment_start: u64,
    color_changes: u64,
    visited: NodeSet,
    covered: bool,
    dft: Option<OpenDft>,
    /// Target of the outstanding forward move out of each node.
    pending: Vec<Option<usize>>,
    last_forward: Option<(usize, usize)>,
    min_dft_starts: usize,
    pub stats: RanStats,
    pub violations: Vec<Violation>,
}

impl RanChecker {
    pub fn new(g: &PortGraph, enabled: CheckSet) -> Self {
        let n = g.n();
        RanChecker {
            enabled,
            n,
            diameter: g.diameter(),
            segment_bound: 8 * g.m() as u64 + n as u64,
            segment_start: 1,
            color_changes: 0,
            visited: NodeSet::new(n),
            covered: false,
            dft: None,
            pending: vec![None; n],
            last_forward: None,
            min_dft_starts: 0,
            stats: RanStats::default(),
            violations: Vec::new(),
        }
    }

    /// Keeps the run going after cover until `count` DFTs have started.
    pub fn wanting_dft_starts(mut self, count: usize) -> Self {
        self.min_dft_starts = count;
        self
    }

    /// `(D + 2)(8m + n)`.
    pub fn cover_bound(&self) -> u64 {
        (self.diameter as u64 + 2) * self.segment_bound
    }

    fn flag(&mut self, check: Check, step: u64, detail: String) {
        if self.enabled.contains(check) {
            self.violations.push(Violation { check, step, detail });
        }
    }

    fn close_segment(&mut self, step: u64, len: u64) {
        self.stats.longest_segment = self.stats.longest_segment.max(len);
        if len > self.segment_bound {
            let bound = self.segment_bound;
            self.flag(Check::Segment, step, format!("segment of {len} moves exceeds 8m+n = {bound}"));
        }
    }

    fn end_dft(&mut self, g: &PortGraph, step: u64, node: usize) {
        let Some(dft) = self.dft.take() else { return };
        self.stats.completed_dfts += 1;
        if node != dft.start {
            self.flag(
                Check::DftCoverage,
                step,
                format!("DFT started at {} ended at {node}", dft.start),
            );
        }
        let required = g.closed_neighborhood(&dft.region);
        if !dft.seen.is_superset(&required) {
            let missed = required.difference(&dft.seen);
            self.flag(Check::DftCoverage, step, format!("DFT missed {missed:?} of R ∪ N(R)"));
        }
        if dft.fresh && !dft.seen.is_full() {
            let missed = self.n - dft.seen.len();
            self.flag(Check::FreshColor, step, format!("fresh-color DFT left {missed} nodes unvisited"));
        }
    }

    /// Final checks once the run is over.
    pub fn finish(&mut self, result: &RunResult) {
        let open = result.moves_taken + 1 - self.segment_start;
        self.close_segment(result.moves_taken, open);
        let bound = self.cover_bound();
        match result.cover_step {
            Some(c) if c > bound => {
                self.flag(Check::CoverBound, c, format!("cover after {c} > (D+2)(8m+n) = {bound}"))
            }
            None if result.moves_taken > bound => self.flag(
                Check::CoverBound,
                result.moves_taken,
                format!("no cover within {} moves, bound {bound}", result.moves_taken),
            ),
            _ => {}
        }
    }
}

impl Observer<RanSpec> for RanChecker {
    fn on_start(&mut self, _g: &PortGraph, cfg: &Configuration<RanSpec>) {
        self.visited.insert(cfg.pos);
        self.covered = self.visited.is_full();
    }

    fn on_step(&mut self, g: &PortGraph, step: u64, events: &[Event], _cfg: &Configuration<RanSpec>) {
        for ev in events {
            match ev {
                Event::ColorChange { .. } => {
                    self.close_segment(step, step - self.segment_start);
                    self.segment_start = step;
                    self.color_changes += 1;
                    if self.color_changes == self.diameter as u64 + 1 && !self.covered {
                        let d = self.diameter;
                        self.flag(
                            Check::ColorCap,
                            step,
                            format!("color change number {} (D+1 = {}) before cover", d + 1, d + 1),
                        );
                    }
                }
                Event::DftEnd { node } => self.end_dft(g, step, *node),
                Event::DftStart { node, marked, .. } => {
                    let fresh = marked.is_empty();
                    let mut blocking = marked.clone();
                    blocking.remove(*node);
                    let region = g
                        .component_excluding(*node, &blocking)
                        .expect("start node was removed from the blocking set");
                    let mut seen = NodeSet::new(self.n);
                    seen.insert(*node);
                    self.stats.fresh_starts.push(fresh);
                    if !self.covered {
                        self.stats.dfts_to_cover += 1;
                    }
                    self.dft = Some(OpenDft { start: *node, region, fresh, seen });
                }
                Event::Move(rec) => {
                    if let Some(dft) = &mut self.dft {
                        dft.seen.insert(rec.to);
                    }
                    match rec.kind {
                        MoveKind::Forward => self.last_forward = Some((rec.from, rec.to)),
                        MoveKind::BackI => {
                            // a bounced forward never opened a subtree
                            if self.last_forward == Some((rec.to, rec.from)) {
                                self.pending[rec.to] = None;
                            }
                            self.last_forward = None;
                        }
                        MoveKind::BackII => {
                            self.last_forward = None;
                            match self.pending[rec.to] {
                                Some(u) if u != rec.from => self.flag(
                                    Check::BackOrder,
                                    step,
                                    format!(
                                        "type-II return to {} from {} while its forward move to {u} is open",
                                        rec.to, rec.from
                                    ),
                                ),
                                _ => {}
                            }
                            self.pending[rec.to] = None;
                        }
                        _ => {}
                    }
                    if rec.kind == MoveKind::Forward {
                        self.pending[rec.from] = Some(rec.to);
                    }
                    if self.visited.insert(rec.to) && self.visited.is_full() {
                        self.covered = true;
                    }
                }
                _ => {}
            }
        }
    }

    fn wants_more(&self) -> bool {
        self.stats.fresh_starts.len() < self.min_dft_starts
    }
}

/// Per-run measurements of the phased BFS.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DetStats {
    /// Move count before the first phase reset (the reset happens inside
    /// the transition preceding this move).
    pub first_reset: Option<u64>,
    pub root: Option<usize>,
    pub cover_step: Option<u64>,
    /// Stage-5 stale-black errors, with the phase they were raised in.
    pub stale_black_phases: Vec<u32>,
    /// Phases completed after the first reset.
    pub phases_completed: u64,
    /// Largest phase value reached.
    pub max_phase: u32,
}

/// Checks the phased-BFS invariants of one run.
pub struct DetChecker {
    enabled: CheckSet,
    k: u32,
    budget: u64,
    dist_from_root: Vec<usize>,
    visited: NodeSet,
    phase_before: Option<u32>,
    stage_tree_moves: u64,
    pub stats: DetStats,
    pub violations: Vec<Violation>,
}

impl DetChecker {
    pub fn new(g: &PortGraph, spec: &DetSpec, enabled: CheckSet) -> Self {
        DetChecker {
            enabled,
            k: spec.k(),
            budget: phase_budget(g),
            dist_from_root: Vec::new(),
            visited: NodeSet::new(g.n()),
            phase_before: None,
            stage_tree_moves: 0,
            stats: DetStats::default(),
            violations: Vec::new(),
        }
    }

    fn flag(&mut self, check: Check, step: u64, detail: String) {
        if self.enabled.contains(check) {
            self.violations.push(Violation { check, step, detail });
        }
    }

    fn stabilized(&self) -> bool {
        self.stats.first_reset.is_some()
    }

    fn check_tree(&mut self, g: &PortGraph, step: u64, phase: u32, cfg: &Configuration<DetSpec>) {
        let root = self.stats.root.expect("stabilized");
        let radius = phase as usize + 1;
        let expected = g.ball(root, radius);
        let tree = tree_snapshot(g, &cfg.boards);
        let span = tree.component(root);
        if span != expected {
            self.flag(
                Check::TreeSpan,
                step,
                format!(
                    "after phase {phase} the tree at {root} spans {span:?}, expected N_{radius} = {expected:?}"
                ),
            );
            return;
        }
        if !tree.component_consistent(root) {
            self.flag(Check::TreeSpan, step, format!("inconsistent child pointers after phase {phase}"));
            return;
        }
        let Some(depths) = tree.depths_from(root) else {
            self.flag(Check::TreeSpan, step, format!("tree at {root} is not rooted after phase {phase}"));
            return;
        };
        for v in expected.iter() {
            let d = self.dist_from_root[v];
            let want = (d as u32).min(self.k);
            if depths[v] != Some(d) || cfg.boards[v].dist != want {
                self.flag(
                    Check::TreeSpan,
                    step,
                    format!(
                        "node {v}: depth {:?}, board dist {}, BFS distance {d}",
                        depths[v], cfg.boards[v].dist
                    ),
                );
                return;
            }
        }
    }

    fn check_black_ring(&mut self, step: u64, phase: u32, cfg: &Configuration<DetSpec>) {
        for v in 0..cfg.boards.len() {
            let d = self.dist_from_root[v];
            if (d as u64) < u64::from(phase) && cfg.boards[v].clr != Color::B {
                self.flag(
                    Check::ColorDiscipline,
                    step,
                    format!("node {v} at distance {d} is {:?} in stage 5 of phase {phase}", cfg.boards[v].clr),
                );
                return;
            }
        }
    }

    pub fn finish(&mut self, result: &RunResult) {
        self.stats.cover_step = result.cover_step;
        let budget = self.budget;
        match self.stats.first_reset {
            Some(r) if r > budget => {
                self.flag(Check::FirstReset, r, format!("first reset after {r} moves > {budget}"))
            }
            None if result.moves_taken > budget => self.flag(
                Check::FirstReset,
                result.moves_taken,
                format!("no reset within {} moves, bound {budget}", result.moves_taken),
            ),
            _ => {}
        }
        if let Some(r) = self.stats.first_reset {
            let after = match result.cover_step {
                Some(c) => c.saturating_sub(r),
                None => result.moves_taken - r,
            };
            if after > budget || (result.cover_step.is_none() && result.moves_taken > r) {
                self.flag(
                    Check::PostResetCover,
                    r,
                    format!("cover took {after} moves after the first reset, bound {budget}"),
                );
            }
        }
    }
}

/// `50 (m + nD)`.
pub fn phase_budget(g: &PortGraph) -> u64 {
    50 * (g.m() as u64 + g.n() as u64 * g.diameter() as u64)
}

impl Observer<DetSpec> for DetChecker {
    fn on_start(&mut self, _g: &PortGraph, cfg: &Configuration<DetSpec>) {
        self.visited.insert(cfg.pos);
        self.phase_before = Some(cfg.agent.phase);
    }

    fn on_step(&mut self, g: &PortGraph, step: u64, events: &[Event], cfg: &Configuration<DetSpec>) {
        let covered = self.visited.is_full();
        for ev in events {
            match ev {
                Event::PhaseReset { node, cause } => {
                    if let Some(root) = self.stats.root {
                        if *node != root {
                            self.flag(
                                Check::ResetSite,
                                step,
                                format!("{cause:?} reset at {node}, tree root is {root}"),
                            );
                        }
                    } else {
                        self.stats.first_reset = Some(step - 1);
                        self.stats.root = Some(*node);
                        self.dist_from_root = g.bfs_distances(*node);
                    }
                }
                Event::ErrorRaised { cause, .. } => {
                    let phase = self.phase_before.unwrap_or(cfg.agent.phase);
                    if *cause == crate::sim::ErrorCause::StaleBlackNode {
                        self.stats.stale_black_phases.push(phase);
                    }
                    if self.stabilized() && !covered {
                        self.flag(Check::NoError, step, format!("{cause:?} raised in phase {phase}"));
                    }
                }
                Event::StageDone { phase, stage, .. } => {
                    let tree_moves = std::mem::take(&mut self.stage_tree_moves);
                    self.stats.max_phase = self.stats.max_phase.max(*phase);
                    if !self.stabilized() {
                        continue;
                    }
                    match stage {
                        0 => {
                            self.stats.phases_completed += 1;
                            self.check_tree(g, step, 0, cfg);
                        }
                        5 => {
                            self.stats.phases_completed += 1;
                            self.check_tree(g, step, *phase, cfg);
                        }
                        // the same transition already starts stage 5
                        4 => self.check_black_ring(step, *phase, cfg),
                        _ => {}
                    }
                    if *stage >= 1 {
                        let root = self.stats.root.expect("stabilized");
                        let t = g.ball(root, *phase as usize).len() as u64;
                        if tree_moves > 2 * t - 2 {
                            self.flag(
                                Check::CirculationCost,
                                step,
                                format!(
                                    "stage {stage} of phase {phase}: {tree_moves} tree moves on {t} nodes"
                                ),
                            );
                        }
                    }
                }
                Event::Move(rec) => {
                    if matches!(rec.kind, MoveKind::TreeDown | MoveKind::TreeUp) {
                        self.stage_tree_moves += 1;
                    }
                    if self.stabilized()
                        && rec.kind == MoveKind::ExpandOut
                        && cfg.agent.stage == 5
                        && cfg.agent.pc == DetPc::ExpandOut
                    {
                        let d = self.dist_from_root[rec.to] as u64;
                        let phase = cfg.agent.phase;
                        if d < u64::from(phase) && cfg.boards[rec.to].clr != Color::B {
                            self.flag(
                                Check::ColorDiscipline,
                                step,
                                format!("stage-5 visit to {} at distance {d} found it non-black", rec.to),
                            );
                        }
                    }
                    self.visited.insert(rec.to);
                }
                _ => {}
            }
        }
        self.phase_before = Some(cfg.agent.phase);
    }

    fn wants_more(&self) -> bool {
        !self.stabilized()
    }
}
