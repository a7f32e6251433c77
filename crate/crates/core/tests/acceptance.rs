//! End-to-end acceptance checks at desktop scale. Each test prints one
//! `PASS` / `FAIL` line to stderr (uncaptured) and then asserts.

use std::io::Write;
use std::time::{Duration, Instant};

use herding_core::analysis::{calibration_coverage, ccdf, compare_tail_shape, fit_power_law_auto};
use herding_core::engine::{rescale_returns, run, ReturnSeries, RunSummary, SimConfig};
use herding_core::ez_baseline::{ez_run, EzConfig};
use herding_core::meanfield::{solve_stationary, stationary_oracle, SolverOptions};
use herding_core::strategy::VoteMode;
use herding_core::sweep::{grid, run_all};
use herding_core::voting::{
    decision_probabilities, fragment_split, p_frg_exact, p_frg_oracle, ConsensusParameter, Decision,
};

const DESK_AGENTS: usize = 10_000;
const DESK_STEPS: u64 = 1_000_000;

fn report(id: u32, ok: bool, detail: &str) {
    let line = format!("{} criterion {id}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn info(id: u32, detail: &str) {
    let _ = std::io::stderr().write_all(format!("INFO criterion {id}: {detail}\n").as_bytes());
}

fn x(v: f64) -> ConsensusParameter {
    ConsensusParameter::new(v).unwrap()
}

fn desk(xv: f64, mode: VoteMode) -> SimConfig {
    let mut c = SimConfig::new(DESK_AGENTS, xv, DESK_STEPS).unwrap();
    c.vote_mode = mode;
    c
}

fn abs_sizes(series: &ReturnSeries) -> Vec<f64> {
    series.trade_sizes().into_iter().filter(|v| *v > 0).map(|v| v as f64).collect()
}

#[test]
fn criterion_01_fragmentation_probability_exact() {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for xv in [0.34, 0.35, 0.37, 0.41, 0.45, 0.47, 0.499] {
        for s in 1..=12 {
            worst = worst.max((p_frg_exact(s, x(xv)) - p_frg_oracle(s, x(xv)).unwrap()).abs());
        }
    }
    let elapsed = t.elapsed();
    let ok = worst <= 1e-12 && elapsed < Duration::from_secs(10);
    report(1, ok, &format!("max |p_frg - enumeration| = {worst:.3e} (tol 1e-12), {elapsed:.2?}"));
    assert!(ok);
}

#[test]
fn criterion_02_engine_decision_frequencies() {
    let t = Instant::now();
    let mut c = SimConfig::new(100, 0.41, DESK_STEPS).unwrap();
    c.vote_mode = VoteMode::IidUniform;
    let (_, summary) = run(&c).unwrap();
    let mut checked = 0;
    let mut worst_z = 0.0f64;
    for (s, counts) in summary.decisions_by_size.iter().enumerate() {
        let n: u64 = counts.iter().sum();
        if n < 1000 {
            continue;
        }
        let p = decision_probabilities(s as u32, x(0.41));
        for d in [Decision::Buy, Decision::Sell, Decision::Merge, Decision::Fragment] {
            let expected = p.of(d);
            let freq = counts[d.index()] as f64 / n as f64;
            let sd = (expected * (1.0 - expected) / n as f64).sqrt();
            let z = if sd > 0.0 { (freq - expected).abs() / sd } else if freq == expected { 0.0 } else { f64::INFINITY };
            worst_z = worst_z.max(z);
            checked += 1;
        }
    }
    let elapsed = t.elapsed();
    let ok = checked > 0 && worst_z <= 3.0 && elapsed < Duration::from_secs(30);
    report(2, ok, &format!("{checked} (size, decision) cells, max |z| = {worst_z:.2} (tol 3), {elapsed:.2?}"));
    assert!(ok);
}

#[test]
fn criterion_03_mean_field_solution() {
    let t = Instant::now();
    let xs = [0.37, 0.41, 0.47];

    let mut oracle_worst = 0.0f64;
    let mut worst_case = (0, 0.0);
    for n in 2..=6 {
        for &xv in &xs {
            let (d, _) = solve_stationary(n, x(xv), SolverOptions::default()).unwrap();
            let exact = stationary_oracle(n, x(xv)).unwrap();
            for s in 1..=n {
                let diff = (d.get(s) - exact.get(s)).abs();
                if diff > oracle_worst {
                    oracle_worst = diff;
                    worst_case = (n, xv);
                }
            }
        }
    }

    let mut sim_worst = 0.0f64;
    let mut compared = 0;
    for &xv in &xs {
        let (d, _) = solve_stationary(100, x(xv), SolverOptions::default()).unwrap();
        let mut c = SimConfig::new(100, xv, 10_000_000).unwrap();
        c.vote_mode = VoteMode::IidUniform;
        let (_, summary) = run(&c).unwrap();
        for s in 1..=100 {
            let predicted = d.get(s);
            if predicted >= 0.1 {
                sim_worst = sim_worst.max((summary.mean_size_counts[s] - predicted).abs() / predicted);
                compared += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    let oracle_ok = oracle_worst <= 1e-6;
    let sim_ok = sim_worst <= 0.05;
    let ok = oracle_ok && sim_ok && elapsed < Duration::from_secs(300);
    report(
        3,
        ok,
        &format!(
            "vs exact chain N<=6: max diff {oracle_worst:.3e} at N={}, x={} (tol 1e-6) [{}]; \
             vs simulation N=100: max rel err {sim_worst:.4} over {compared} sizes (tol 0.05) [{}]; {elapsed:.2?}",
            worst_case.0,
            worst_case.1,
            if oracle_ok { "ok" } else { "fail" },
            if sim_ok { "ok" } else { "fail" },
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_04_ez_exponent() {
    let t = Instant::now();
    let (series, _) = ez_run(&EzConfig::new(DESK_AGENTS, DESK_STEPS)).unwrap();
    let (fit, _) = fit_power_law_auto(&abs_sizes(&series)).unwrap();
    let elapsed = t.elapsed();
    let ok = (1.3..=1.7).contains(&fit.alpha_density) && elapsed < Duration::from_secs(60);
    report(
        4,
        ok,
        &format!(
            "density exponent {:.3} +- {:.3} (r_min {}, {} points; range [1.3, 1.7]), {elapsed:.2?}",
            fit.alpha_density, fit.stderr, fit.r_min, fit.n_tail
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_05_limit_exponent() {
    let (series, _) = run(&desk(0.335, VoteMode::IidUniform)).unwrap();
    let fit = fit_power_law_auto(&abs_sizes(&series));
    let ok = fit.as_ref().is_ok_and(|(f, _)| (1.2..=1.8).contains(&f.alpha_density));
    let detail = match &fit {
        Ok((f, _)) => format!(
            "x=0.335 density exponent {:.3} +- {:.3} (r_min {}, {} points; range [1.2, 1.8])",
            f.alpha_density, f.stderr, f.r_min, f.n_tail
        ),
        Err(e) => format!("x=0.335 no fit: {e}"),
    };
    report(5, ok, &detail);

    let (series, summary) = run(&desk(0.335, VoteMode::StrategyDriven)).unwrap();
    match fit_power_law_auto(&abs_sizes(&series)) {
        Ok((f, _)) => info(5, &format!("strategy-driven votes: exponent {:.3} +- {:.3}", f.alpha_density, f.stderr)),
        Err(e) => info(
            5,
            &format!("strategy-driven votes: no fit ({e}); trade fraction {:.3}, final groups {:?}",
                summary.trade_fraction, summary.final_histogram.len()),
        ),
    }
    assert!(ok);
}

#[test]
fn criterion_06_cutoff_shape() {
    let t = Instant::now();
    let xs = [0.37, 0.41, 0.47];
    let base = desk(0.41, VoteMode::IidUniform);
    let jobs = grid(&base, &xs, 1, 1).unwrap();
    let results = run_all(&jobs, 3).unwrap();
    let mut masses = Vec::new();
    let mut curves = Vec::new();
    for (series, _) in &results {
        let curve = ccdf(&rescale_returns(series, 2).unwrap()).unwrap();
        masses.push(curve.tail_mass(50));
        curves.push(curve);
    }
    let decreasing = masses.windows(2).all(|w| w[0] > w[1]);
    let shape = compare_tail_shape(&curves[2], 50);
    let exp_better = shape.as_ref().is_ok_and(|s| s.prefers_exponential());
    let elapsed = t.elapsed();
    let ok = decreasing && exp_better && elapsed < Duration::from_secs(300);
    let shape_detail = match &shape {
        Ok(s) => format!(
            "x=0.47 beyond 50: exponential rss {:.4} vs power-law rss {:.4} over {} points",
            s.exponential_rss, s.power_law_rss, s.n_points
        ),
        Err(e) => format!(
            "x=0.47 beyond 50: no comparison possible ({e}); largest rescaled |r| = {}",
            curves[2].points.last().map_or(0, |p| p.0)
        ),
    };
    report(
        6,
        ok,
        &format!(
            "P(|r|>=50) at x={xs:?}: [{:.3e}, {:.3e}, {:.3e}] strictly decreasing = {decreasing}; {shape_detail}; {elapsed:.2?}",
            masses[0], masses[1], masses[2]
        ),
    );
    assert!(ok);
}

/// Smallest size at which the time-averaged per-group size distribution
/// reaches cumulative probability `q`.
fn group_size_quantile(summary: &RunSummary, q: f64) -> usize {
    let total: f64 = summary.mean_size_counts.iter().sum();
    let mut acc = 0.0;
    for (s, n) in summary.mean_size_counts.iter().enumerate() {
        acc += n;
        if acc >= q * total {
            return s;
        }
    }
    summary.mean_size_counts.len() - 1
}

#[test]
fn criterion_07_small_groups_trade() {
    let (series, summary) = run(&desk(0.41, VoteMode::IidUniform)).unwrap();
    let p99 = group_size_quantile(&summary, 0.99);
    let sizes = series.trade_sizes();
    let trades: Vec<u64> = sizes.into_iter().filter(|s| *s > 0).collect();
    let below = trades.iter().filter(|s| (**s as usize) < p99).count() as f64 / trades.len() as f64;
    let largest = trades.iter().copied().max().unwrap_or(0);
    let impossible = trades
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .filter(|s| fragment_split(*s as u32, x(0.41)).consensus < 1e-6)
        .count();
    let ok = below >= 0.9 && impossible == 0;
    report(
        7,
        ok,
        &format!(
            "{:.4} of {} trades from groups below the 99th size percentile {p99} (tol 0.9); \
             largest trading group {largest}; trades from sizes with consensus < 1e-6: {impossible}",
            below,
            trades.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_trade_frequency() {
    let (_, summary) = run(&desk(0.37, VoteMode::IidUniform)).unwrap();
    let ok = (0.3..=0.7).contains(&summary.trade_fraction);
    report(8, ok, &format!("trade fraction {:.4} at x=0.37 (range [0.3, 0.7])", summary.trade_fraction));
    let (_, s) = run(&desk(0.37, VoteMode::StrategyDriven)).unwrap();
    info(8, &format!("strategy-driven votes: trade fraction {:.4}", s.trade_fraction));
    assert!(ok);
}

fn artifact_bytes(series: &ReturnSeries, summary: &RunSummary) -> Vec<u8> {
    let mut bytes = Vec::new();
    series.write_binary(&mut bytes).unwrap();
    bytes.extend(serde_json::to_vec(summary).unwrap());
    bytes
}

#[test]
fn criterion_09_determinism_and_speed() {
    let mut timings = Vec::new();
    let mut identical = true;
    for mode in [VoteMode::StrategyDriven, VoteMode::IidUniform] {
        let cfg = desk(0.37, mode);
        let t = Instant::now();
        let (a, sa) = run(&cfg).unwrap();
        timings.push(t.elapsed());
        let (b, sb) = run(&cfg).unwrap();
        identical &= artifact_bytes(&a, &sa) == artifact_bytes(&b, &sb);
    }
    let (e1, s1) = ez_run(&EzConfig::new(DESK_AGENTS, DESK_STEPS)).unwrap();
    let (e2, s2) = ez_run(&EzConfig::new(DESK_AGENTS, DESK_STEPS)).unwrap();
    identical &= artifact_bytes(&e1, &s1) == artifact_bytes(&e2, &s2);

    let mut base = SimConfig::new(2000, 0.41, 200_000).unwrap();
    base.vote_mode = VoteMode::IidUniform;
    let jobs = grid(&base, &[0.37, 0.41, 0.47], 2, 3).unwrap();
    let one = run_all(&jobs, 1).unwrap();
    let many = run_all(&jobs, 4).unwrap();
    let workers_ok = one.iter().zip(&many).all(|(a, b)| artifact_bytes(&a.0, &a.1) == artifact_bytes(&b.0, &b.1));

    let fast = timings.iter().all(|t| *t < Duration::from_secs(60));
    let ok = identical && workers_ok && fast;
    report(
        9,
        ok,
        &format!(
            "byte-identical reruns = {identical}; 1 vs 4 workers identical = {workers_ok}; \
             N=1e4 x 1e6 steps took {:.2?} (strategy) / {:.2?} (iid), limit 60s",
            timings[0], timings[1]
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_estimator_calibration() {
    let mut coverages = Vec::new();
    for (i, alpha) in [1.2, 1.5, 2.0, 2.5].into_iter().enumerate() {
        coverages.push((alpha, calibration_coverage(alpha, 1000, 1000, 1000 + i as u64).unwrap()));
    }
    let ok = coverages.iter().all(|(_, c)| *c >= 0.95);
    let detail: Vec<String> = coverages.iter().map(|(a, c)| format!("alpha {a}: {c:.3}")).collect();
    report(10, ok, &format!("3-SE coverage over 1000 trials of 1000 points: {} (tol 0.95)", detail.join(", ")));
    assert!(ok);
}
