//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;
use sagex_core::adversary::{stale_tree_k, stale_tree_config, lollipop_worst_case};
use sagex_core::baselines::{rotor_spec, srw_spec};
use sagex_core::checks::{phase_budget, Check, CheckSet, DetChecker, RanChecker, Violation};
use sagex_core::det::det_spec;
use sagex_core::generate::{generate, Family};
use sagex_core::graph::PortGraph;
use sagex_core::harness::{
    lower_bound, run_trial, trial_seeds, AlgoChoice, ExperimentConfig, GraphInfo, MaxSteps,
};
use sagex_core::ran::ran_spec;
use sagex_core::sim::{
    enumerate_initial_configs, run, run_observed, sample_initial_config, Configuration, Event,
    RunOptions,
};

const CONFIGS: u64 = 500;
const SEED: u64 = 1;

fn desk_suite() -> Vec<(Family, PortGraph)> {
    [
        Family::Path { n: 8 },
        Family::Cycle { n: 12 },
        Family::Clique { n: 8 },
        Family::Grid { rows: 5, cols: 5 },
        Family::Star { n: 16 },
        Family::Lollipop { a: 8, b: 8 },
        Family::RandomConnected { n: 32, m: 64 },
        Family::RandomConnected { n: 48, m: 128 },
    ]
    .into_iter()
    .map(|f| {
        let g = generate(&f, SEED).expect("suite graph");
        (f, g)
    })
    .collect()
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Violations of the colored-DFT checkers over the suite, per check, for
/// c in {2, 3, 8}. Runs continue two segment bounds past cover so more
/// DFTs are completed and checked.
struct RanSweep {
    runs: u64,
    cutoffs: u64,
    violations: Vec<(String, Violation)>,
    longest_segment_ratio: f64,
    worst_cover_ratio: f64,
    dft_ends: u64,
}

fn ran_sweep(suite: &[(Family, PortGraph)]) -> RanSweep {
    let mut sweep = RanSweep {
        runs: 0,
        cutoffs: 0,
        violations: Vec::new(),
        longest_segment_ratio: 0.0,
        worst_cover_ratio: 0.0,
        dft_ends: 0,
    };
    for (family, g) in suite {
        let seg = (8 * g.m() + g.n()) as u64;
        let opts = RunOptions { post_cover_steps: 2 * seg, ..RunOptions::for_graph(g) };
        for c in [2, 3, 8] {
            let spec = ran_spec(c).unwrap();
            let results: Vec<_> = (0..CONFIGS)
                .into_par_iter()
                .map(|t| {
                    let (cs, rs) = trial_seeds(SEED, t);
                    let init = sample_initial_config(&spec, g, cs);
                    let mut checker = RanChecker::new(g, CheckSet::all());
                    let (res, _) = run_observed(&spec, g, init, &opts, rs, &mut [&mut checker]).unwrap();
                    checker.finish(&res);
                    (res.cover_step, checker)
                })
                .collect();
            for (cover, checker) in results {
                sweep.runs += 1;
                sweep.dft_ends += checker.stats.completed_dfts;
                sweep.longest_segment_ratio =
                    sweep.longest_segment_ratio.max(checker.stats.longest_segment as f64 / seg as f64);
                match cover {
                    Some(cv) => {
                        sweep.worst_cover_ratio =
                            sweep.worst_cover_ratio.max(cv as f64 / checker.cover_bound() as f64)
                    }
                    None => sweep.cutoffs += 1,
                }
                let label = format!("{family} c={c}");
                sweep.violations.extend(checker.violations.into_iter().map(|v| (label.clone(), v)));
            }
        }
    }
    sweep
}

fn ran_criterion(sweep: &RanSweep, checks: &[Check], what: &str) -> Verdict {
    let bad: Vec<_> = sweep.violations.iter().filter(|(_, v)| checks.contains(&v.check)).collect();
    let mut detail = format!("{} runs, {} violations", sweep.runs, bad.len());
    if let Some((label, v)) = bad.first() {
        detail += &format!(", first: {label}: {v}");
    }
    detail += &format!("; {what}");
    verdict(bad.is_empty() && sweep.cutoffs == 0, detail)
}

fn criterion_5(suite: &[(Family, PortGraph)]) -> Verdict {
    const RUNS: u64 = 2000;
    let mut worst_fresh = f64::INFINITY;
    let mut worst_mean = 0.0f64;
    let mut notes = Vec::new();
    for (family, g) in suite {
        let spec = ran_spec(2 * g.n() as u32).unwrap();
        let opts = RunOptions::for_graph(g);
        let stats: Vec<_> = (0..RUNS)
            .into_par_iter()
            .map(|t| {
                let (cs, rs) = trial_seeds(SEED + 5, t);
                let init = sample_initial_config(&spec, g, cs);
                let mut checker = RanChecker::new(g, CheckSet::all()).wanting_dft_starts(2);
                let (res, _) = run_observed(&spec, g, init, &opts, rs, &mut [&mut checker]).unwrap();
                assert!(res.cover_step.is_some());
                checker.stats
            })
            .collect();
        let firsts: Vec<bool> =
            stats.iter().flat_map(|s| s.fresh_starts.iter().take(2).copied()).collect();
        let fresh = firsts.iter().filter(|&&f| f).count() as f64 / firsts.len() as f64;
        let mean = stats.iter().map(|s| s.dfts_to_cover as f64).sum::<f64>() / RUNS as f64;
        worst_fresh = worst_fresh.min(fresh);
        worst_mean = worst_mean.max(mean);
        notes.push(format!("{family}: {fresh:.2}/{mean:.2}"));
    }
    verdict(
        worst_fresh >= 0.40 && worst_mean <= 4.0,
        format!(
            "c = 2n, {RUNS} runs per graph; min fresh share of first two DFTs {worst_fresh:.3} (≥ 0.40), \
             max mean DFTs to cover {worst_mean:.3} (≤ 4) [{}]",
            notes.join(", ")
        ),
    )
}

struct DetSweep {
    runs: u64,
    cutoffs: u64,
    violations: Vec<(String, Violation)>,
    first_reset_const: f64,
    post_reset_const: f64,
    phases_checked: u64,
}

fn det_sweep(suite: &[(Family, PortGraph)]) -> DetSweep {
    let mut sweep = DetSweep {
        runs: 0,
        cutoffs: 0,
        violations: Vec::new(),
        first_reset_const: 0.0,
        post_reset_const: 0.0,
        phases_checked: 0,
    };
    for (family, g) in suite {
        let d = g.diameter() as u32;
        let unit = (phase_budget(g) / 50) as f64;
        for k in [d.saturating_sub(1).max(1), d + 5] {
            let spec = det_spec(k).unwrap();
            let opts = RunOptions::for_graph(g);
            let results: Vec<_> = (0..CONFIGS)
                .into_par_iter()
                .map(|t| {
                    let (cs, rs) = trial_seeds(SEED, t);
                    let init = sample_initial_config(&spec, g, cs);
                    let mut checker = DetChecker::new(g, &spec, CheckSet::all());
                    let (res, _) = run_observed(&spec, g, init, &opts, rs, &mut [&mut checker]).unwrap();
                    checker.finish(&res);
                    checker
                })
                .collect();
            for checker in results {
                sweep.runs += 1;
                let st = &checker.stats;
                sweep.phases_checked += st.phases_completed;
                match (st.cover_step, st.first_reset) {
                    (Some(c), Some(r)) => {
                        sweep.first_reset_const = sweep.first_reset_const.max(r as f64 / unit);
                        sweep.post_reset_const =
                            sweep.post_reset_const.max(c.saturating_sub(r) as f64 / unit);
                    }
                    _ => sweep.cutoffs += 1,
                }
                let label = format!("{family} k={k}");
                sweep.violations.extend(checker.violations.into_iter().map(|v| (label.clone(), v)));
            }
        }
    }
    sweep
}

fn det_criterion(sweep: &DetSweep, checks: &[Check], extra: String) -> Verdict {
    let bad: Vec<_> = sweep.violations.iter().filter(|(_, v)| checks.contains(&v.check)).collect();
    let mut detail = format!("{} runs, {} cutoffs, {} violations", sweep.runs, sweep.cutoffs, bad.len());
    if let Some((label, v)) = bad.first() {
        detail += &format!(", first: {label}: {v}");
    }
    detail += &format!("; {extra}");
    verdict(bad.is_empty() && sweep.cutoffs == 0, detail)
}

fn criterion_8() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [6usize, 12, 16] {
        let (g, init) = stale_tree_config(n).unwrap();
        let opts = RunOptions::for_graph(&g).recording();

        let spec = det_spec(stale_tree_k(n)).unwrap();
        let mut checker = DetChecker::new(&g, &spec, CheckSet::none());
        let (res, _) = run_observed(&spec, &g, init.clone(), &opts, 0, &mut [&mut checker]).unwrap();
        let fired = checker.stats.stale_black_phases.first().copied();
        let covered = res.cover_step.is_some();

        let off = spec.with_stale_black_rule(false);
        let res = run(&off, &g, &init, &opts, 0).unwrap();
        let further = phase_at_cover(&res.events, res.cover_step, init.agent.phase)
            .and_then(|p| fired.map(|f| p + 1 - f));
        let pass = fired == Some(3) && covered && further.is_some_and(|p| p >= n as u32 - 4);
        ok &= pass;
        let show = |x: Option<u32>| x.map_or_else(|| "none".to_string(), |v| v.to_string());
        notes.push(format!(
            "n={n}: rule fires in phase {}, without it {} phases until cover (≥ {})",
            show(fired),
            show(further),
            n - 4
        ));
    }
    verdict(ok, notes.join("; "))
}

/// Phase the agent is in when the cover move happens, `None` if a reset
/// comes first.
fn phase_at_cover(events: &[Event], cover: Option<u64>, start_phase: u32) -> Option<u32> {
    let cover = cover?;
    let mut moves = 0;
    let mut phase = start_phase;
    for ev in events {
        match ev {
            Event::StageDone { phase: p, stage: 5, .. } if *p == phase => phase += 1,
            Event::PhaseReset { .. } => return None,
            Event::Move(_) => {
                moves += 1;
                if moves == cover {
                    return Some(phase);
                }
            }
            _ => {}
        }
    }
    None
}

fn criterion_9() -> Verdict {
    let spec = ran_spec(2).unwrap();
    let mut ratios = Vec::new();
    for n in [12usize, 16, 24] {
        let (g, init) = lollipop_worst_case(n / 2, n / 2).unwrap();
        let res = run(&spec, &g, &init, &RunOptions::for_graph(&g), 0).unwrap();
        match res.cover_step {
            Some(c) => ratios.push((n, c as f64 / (n * n) as f64)),
            None => return verdict(false, format!("n={n}: no cover")),
        }
    }
    let increasing = ratios.windows(2).all(|w| w[1].1 > w[0].1);
    let text: Vec<_> = ratios.iter().map(|(n, r)| format!("n={n}: {r:.3}")).collect();
    verdict(increasing, format!("cover/n² {}", text.join(", ")))
}

fn criterion_10() -> Verdict {
    // m' = 120 needs at least 16 nodes
    let base = generate(&Family::RandomConnected { n: 16, m: 120 }, SEED).unwrap();
    let report = lower_bound(&AlgoChoice::Srw, &base, 0, 2000, SEED).unwrap();
    let threshold = 0.9 * report.bound;
    verdict(
        report.mean_cover >= threshold && report.cutoffs == 0,
        format!(
            "hard instance n={}, m={}, split edge {:?} (est. crossing probability {:.3}); mean cover {:.1} over {} runs ≥ 0.9·(m−1)/4 = {threshold:.1}",
            report.n,
            report.m,
            report.instance.removed_edge,
            report.instance.est_traverse_prob,
            report.mean_cover,
            report.trials
        ),
    )
}

fn criterion_11() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for family in [Family::Path { n: 3 }, Family::Path { n: 4 }, Family::Cycle { n: 4 }, Family::Clique { n: 4 }] {
        let g = generate(&family, SEED).unwrap();
        let bound = 4 * (g.m() * g.diameter()) as u64;
        let mut worst = 0;
        let mut count = 0;
        for cfg in enumerate_initial_configs(&rotor_spec(), &g, 1 << 20).unwrap() {
            count += 1;
            match run(&rotor_spec(), &g, &cfg, &RunOptions::for_graph(&g), 0).unwrap().cover_step {
                Some(c) => worst = worst.max(c),
                None => worst = u64::MAX,
            }
        }
        ok &= worst <= bound;
        notes.push(format!("{family}: {count} configs, worst {worst} ≤ {bound}"));
    }
    let g = generate(&Family::Path { n: 3 }, SEED).unwrap();
    let end = (0..3).find(|&v| g.degree(v) == 1).unwrap();
    let init: Configuration<_> = Configuration { pos: end, in_port: 0, agent: (), boards: vec![(); 3] };
    let opts = RunOptions::for_graph(&g);
    let total: u64 = (0..100_000u64)
        .into_par_iter()
        .map(|s| run(&srw_spec(), &g, &init, &opts, s).unwrap().cover_step.unwrap())
        .sum();
    let mean = total as f64 / 100_000.0;
    ok &= (mean - 4.0).abs() <= 0.1;
    notes.push(format!("SRW on P3 from an end: mean {mean:.3} (4.0 ± 0.1)"));
    verdict(ok, notes.join("; "))
}

/// Golden trace hashes on random_connected(n=16, m=32) with graph seed 7,
/// run seed 2024, trial 0.
const GOLDEN: [(AlgoChoice, &str); 5] = [
    (AlgoChoice::Ran { c: 2 }, "acc591d2ddc13948"),
    (AlgoChoice::Ran { c: 4 }, "7161e5ae72477bac"),
    (AlgoChoice::Det { k: 3, stale_black_rule: true }, "0986531c149e414f"),
    (AlgoChoice::Srw, "e874c054ba545c2b"),
    (AlgoChoice::Rotor, "f2b09d01eb2f7887"),
];

fn criterion_12() -> Verdict {
    let g = generate(&Family::RandomConnected { n: 16, m: 32 }, 7).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for (algo, want) in GOLDEN {
        let cfg = ExperimentConfig {
            algo,
            trials: 1,
            seed: 2024,
            max_steps: MaxSteps::Auto,
            checks: CheckSet::all(),
        };
        let got = run_trial(&cfg, &g, GraphInfo::of(&g), 0).unwrap().record.trace_hash;
        let again = run_trial(&cfg, &g, GraphInfo::of(&g), 0).unwrap().record.trace_hash;
        let pass = got == want && again == got;
        ok &= pass;
        notes.push(format!("{algo}: {got}{}", if pass { "" } else { " (MISMATCH)" }));
    }
    verdict(ok, notes.join(", "))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let suite = desk_suite();
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();

    let ran = ran_sweep(&suite);
    results.push((
        1,
        "randomized DFT segment bound",
        ran_criterion(&ran, &[Check::Segment], &format!("longest segment {:.3}·(8m+n)", ran.longest_segment_ratio)),
    ));
    results.push((
        2,
        "randomized DFT coverage",
        ran_criterion(&ran, &[Check::DftCoverage, Check::FreshColor], &format!("{} DFT ends checked", ran.dft_ends)),
    ));
    results.push((
        3,
        "randomized DFT color-change cap",
        ran_criterion(
            &ran,
            &[Check::ColorCap, Check::CoverBound],
            &format!("worst cover {:.3}·(D+2)(8m+n)", ran.worst_cover_ratio),
        ),
    ));
    results.push((4, "randomized DFT back-order", ran_criterion(&ran, &[Check::BackOrder], "move tags checked every step")));
    results.push((5, "randomized DFT large-c fresh colors", criterion_5(&suite)));

    let det = det_sweep(&suite);
    results.push((
        6,
        "phased BFS correctness",
        det_criterion(
            &det,
            &[Check::FirstReset, Check::PostResetCover],
            format!(
                "max first reset {:.2}·(m+nD), max cover after it {:.2}·(m+nD) (limit 50)",
                det.first_reset_const, det.post_reset_const
            ),
        ),
    ));
    results.push((
        7,
        "phased BFS stabilized tree",
        det_criterion(
            &det,
            &[Check::TreeSpan, Check::NoError, Check::ColorDiscipline, Check::CirculationCost, Check::ResetSite],
            format!("{} completed phases checked", det.phases_checked),
        ),
    ));
    results.push((8, "stale-black-node rule", criterion_8()));
    results.push((9, "two-color lollipop blow-up", criterion_9()));
    results.push((10, "lower-bound gadget", criterion_10()));
    results.push((11, "baselines", criterion_11()));
    results.push((12, "golden trace hashes", criterion_12()));

    let mut failed = 0;
    for (id, name, v) in &results {
        if !v.pass {
            failed += 1;
        }
        println!("{} criterion {id:>2} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
