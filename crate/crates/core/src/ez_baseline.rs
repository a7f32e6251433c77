//! Pairwise-merging herding baseline.
//!
//! Each step picks one agent. With probability `a` its group trades `±s`
//! (fair sign) and disperses into singletons; otherwise the group merges with
//! the group of a second, distinct, uniformly chosen agent. Picking a partner
//! already in the same group is a no-op.


use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{check_partition, stopwatch, stream_rng, Occupancy, ReturnSeries, RunSummary, StepEvent, DYNAMICS_STREAM};
use crate::error::{Error, Result};
use crate::population::{AgentId, Partition};
use crate::voting::Decision;

pub const DEFAULT_TRADE_PROBABILITY: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EzConfig {
    pub n_agents: usize,
    pub a: f64,
    pub total_steps: u64,
    pub equilibration_steps: u64,
    pub seed: u64,
}

impl EzConfig {
    /// Defaults: `a = 0.01`, 10% equilibration, seed 1.
    pub fn new(n_agents: usize, total_steps: u64) -> Self {
        Self { n_agents, a: DEFAULT_TRADE_PROBABILITY, total_steps, equilibration_steps: total_steps / 10, seed: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(Error::InvalidArgument(format!("n_agents must be at least 2, got {}", self.n_agents)));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::InvalidArgument(format!("trade probability must lie in (0, 1), got {}", self.a)));
        }
        if self.equilibration_steps >= self.total_steps {
            return Err(Error::InvalidArgument("equilibration_steps must be below total_steps".into()));
        }
        Ok(())
    }
}

/// One update. `a` is used as given, so `a = 1` (trades only) and `a = 0`
/// (merges only) are available as limiting cases. The returned event has
/// `step = 0`.
pub fn ez_step<R: Rng + ?Sized>(partition: &mut Partition, a: f64, rng: &mut R) -> StepEvent {
    step_observed(partition, a, rng, 0, &mut |_, _| {})
}

fn step_observed<R: Rng + ?Sized>(
    partition: &mut Partition,
    a: f64,
    rng: &mut R,
    step: u64,
    observe: &mut dyn FnMut(&Partition, usize),
) -> StepEvent {
    let agent = partition.pick_random_agent(rng);
    let (g, size) = partition.group_of(agent);
    if rng.random_bool(a) {
        let decision = if rng.random_bool(0.5) { Decision::Buy } else { Decision::Sell };
        let ret = if decision == Decision::Buy { size as i64 } else { -(size as i64) };
        if size > 1 {
            observe(partition, size);
            observe(partition, 1);
            partition.fragment_group(g).expect("live group");
        }
        return StepEvent { step, decision, group_size: size as u32, ret, noop: false };
    }

    let n = partition.n_agents() as u32;
    let mut noop = true;
    if n > 1 {
        // uniform over the other n - 1 agents
        let mut j = rng.random_range(0..n - 1);
        if j >= agent.0 {
            j += 1;
        }
        let (h, other_size) = partition.group_of(AgentId(j));
        if h != g {
            observe(partition, size);
            observe(partition, other_size);
            observe(partition, size + other_size);
            partition.merge_groups(g, h).expect("distinct live groups");
            noop = false;
        }
    }
    StepEvent { step, decision: Decision::Merge, group_size: size as u32, ret: 0, noop }
}

/// Run the baseline from all singletons. Returns the post-equilibration
/// return series.
pub fn ez_run(cfg: &EzConfig) -> Result<(ReturnSeries, RunSummary)> {
    cfg.validate()?;
    let elapsed = stopwatch();
    let n = cfg.n_agents;
    let mut partition = Partition::new_all_singletons(n)?;
    let mut rng = stream_rng(cfg.seed, DYNAMICS_STREAM);
    let mut series = Vec::with_capacity((cfg.total_steps - cfg.equilibration_steps) as usize);
    let mut decision_counts = [0u64; 4];
    let mut by_size = vec![[0u64; 4]; n + 1];
    let mut noop_merges = 0;
    let mut occupancy = Occupancy::new(n, cfg.equilibration_steps + 1);

    for t in 0..cfg.total_steps {
        let ev = step_observed(&mut partition, cfg.a, &mut rng, t, &mut |p, s| {
            occupancy.touch(s, p.size_counts()[s], t + 1)
        });
        decision_counts[ev.decision.index()] += 1;
        by_size[ev.group_size as usize][ev.decision.index()] += 1;
        noop_merges += ev.noop as u64;
        if t >= cfg.equilibration_steps {
            series.push(ev.ret);
        }
        check_partition(&partition, t + 1);
    }

    let trades = decision_counts[0] + decision_counts[1];
    let summary = RunSummary {
        steps: cfg.total_steps,
        decision_counts,
        noop_merges,
        trade_fraction: trades as f64 / cfg.total_steps.max(1) as f64,
        final_histogram: partition.size_histogram().into_iter().collect(),
        mean_size_counts: occupancy.finish(partition.size_counts(), cfg.total_steps + 1),
        decisions_by_size: by_size,
        wall_time_secs: elapsed(),
    };
    Ok((ReturnSeries(series), summary))
}
