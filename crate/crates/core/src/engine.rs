//! The stochastic update loop.
//!
//! One time step picks one agent. Its group votes, the vote is classified,
//! and the partition changes accordingly:
//!
//! * buy / sell: return `+s` / `-s`, the group stays together;
//! * fragment: the group dissolves into singletons;
//! * merge: the group joins the group of a uniformly random agent outside
//!   it (a no-op when the group already spans the whole population).
//!
//! The price history only moves on trades.
//!
//! Random streams: a run seeds one ChaCha8 generator and splits it into
//! stream 0 (strategy assignment, agent 0 first) and stream 1 (dynamics).

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{AgentId, GroupId, Partition};
use crate::strategy::{assign_strategies, sample_uniform_tally, History, StrategyTable, VoteMode, MAX_MEMORY};
use crate::voting::{decide, ConsensusParameter, Decision, VoteTally};

pub const STRATEGY_STREAM: u64 = 0;
pub const DYNAMICS_STREAM: u64 = 1;

/// Seeded generator positioned on one of the run's streams.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_agents: usize,
    pub x: ConsensusParameter,
    pub total_steps: u64,
    pub equilibration_steps: u64,
    pub memory: usize,
    pub initial_history: Vec<u8>,
    pub vote_mode: VoteMode,
    pub seed: u64,
    pub rescale_k: usize,
    /// Trading groups disperse into singletons, as in the herding baseline.
    /// Not part of the consensus model; off by default.
    pub disperse_on_trade: bool,
}

impl SimConfig {
    pub fn new(n_agents: usize, x: f64, total_steps: u64) -> Result<Self> {
        Ok(Self {
            n_agents,
            x: ConsensusParameter::new(x)?,
            total_steps,
            equilibration_steps: total_steps / 10,
            memory: 2,
            initial_history: vec![1, 1],
            vote_mode: VoteMode::StrategyDriven,
            seed: 1,
            rescale_k: 2,
            disperse_on_trade: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(Error::InvalidArgument("n_agents must be at least 2".into()));
        }
        if self.equilibration_steps >= self.total_steps {
            return Err(Error::InvalidArgument("equilibration_steps must be below total_steps".into()));
        }
        if self.memory == 0 || self.memory > MAX_MEMORY {
            return Err(Error::InvalidArgument(format!("memory_m must be in 1..={MAX_MEMORY}")));
        }
        if self.initial_history.len() != self.memory {
            return Err(Error::InvalidArgument("initial_history length must equal memory_m".into()));
        }
        if self.rescale_k == 0 {
            return Err(Error::InvalidArgument("rescale_k must be at least 1".into()));
        }
        History::new(&self.initial_history)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvent {
    pub step: u64,
    pub decision: Decision,
    pub group_size: u32,
    /// `±group_size` on trades, else 0.
    pub ret: i64,
    /// A merge with nowhere to go.
    pub noop: bool,
}

/// Signed trade size per time step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnSeries(pub Vec<i64>);

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[i64] {
        &self.0
    }

    /// Nonzero absolute returns.
    pub fn trade_sizes(&self) -> Vec<u64> {
        self.0.iter().filter(|r| **r != 0).map(|r| r.unsigned_abs()).collect()
    }

    /// One signed integer per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.0 {
            writeln!(w, "{r}")?;
        }
        Ok(())
    }

    pub fn read_text(text: &str) -> Result<Self> {
        text.lines()
            .enumerate()
            .map(|(i, l)| l.trim().parse().map_err(|_| Error::Format(format!("line {}: not an integer", i + 1))))
            .collect::<Result<Vec<i64>>>()
            .map(Self)
    }

    /// Little-endian `u64` count followed by that many little-endian `i64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.0.len() as u64).to_le_bytes())?;
        for r in &self.0 {
            w.write_all(&r.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let len = u64::from_le_bytes(word) as usize;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != len * 8 {
            return Err(Error::Format(format!("header says {len} values, payload holds {} bytes", bytes.len())));
        }
        Ok(Self(bytes.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().expect("8 bytes"))).collect()))
    }
}

/// Sum non-overlapping windows of `k` consecutive returns; a trailing partial
/// window is dropped.
pub fn rescale_returns(series: &ReturnSeries, k: usize) -> Result<ReturnSeries> {
    if k == 0 {
        return Err(Error::InvalidArgument("rescale factor must be at least 1".into()));
    }
    Ok(ReturnSeries(series.0.chunks_exact(k).map(|w| w.iter().sum()).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: u64,
    /// Indexed by `Decision::index()`: buy, sell, merge, fragment.
    pub decision_counts: [u64; 4],
    pub noop_merges: u64,
    pub trade_fraction: f64,
    /// `(size, groups)` at the end of the run.
    pub final_histogram: Vec<(usize, u64)>,
    /// Time-averaged number of groups per size after equilibration; index = size.
    pub mean_size_counts: Vec<f64>,
    /// Decision counts per acting group size over the whole run; index = size.
    pub decisions_by_size: Vec<[u64; 4]>,
    /// Not serialized, so saved summaries are reproducible.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Time-integral of the per-size group counts, updated lazily per size.
#[derive(Debug, Clone)]
pub(crate) struct Occupancy {
    area: Vec<f64>,
    since: Vec<u64>,
    start: u64,
}

impl Occupancy {
    pub(crate) fn new(n: usize, start: u64) -> Self {
        Self { area: vec![0.0; n + 1], since: vec![start; n + 1], start }
    }

    /// Close the interval during which size `s` held `count` groups.
    pub(crate) fn touch(&mut self, s: usize, count: u64, now: u64) {
        let from = self.since[s].max(self.start);
        if now > from {
            self.area[s] += count as f64 * (now - from) as f64;
        }
        self.since[s] = now.max(self.start);
    }

    pub(crate) fn finish(mut self, counts: &[u64], end: u64) -> Vec<f64> {
        for (s, &c) in counts.iter().enumerate() {
            self.touch(s, c, end);
        }
        let span = end.saturating_sub(self.start).max(1) as f64;
        self.area.iter().map(|a| a / span).collect()
    }
}

/// Full simulation state: partition, strategies, history and random stream.
pub struct Simulation {
    partition: Partition,
    x: ConsensusParameter,
    mode: VoteMode,
    history: History,
    strategies: Vec<StrategyTable>,
    // per slot, per history index: (buy, sell, wait) counts of the members
    tallies: Vec<[u32; 3]>,
    n_hist: usize,
    rng: ChaCha8Rng,
    step: u64,
    disperse_on_trade: bool,
    scratch: Vec<u32>,
}

impl Simulation {
    /// Build the initial state: all singletons, strategies drawn from the
    /// strategy stream (only in strategy-driven mode).
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        let partition = Partition::new_all_singletons(cfg.n_agents)?;
        let history = History::new(&cfg.initial_history)?;
        if history.memory() != cfg.memory {
            return Err(Error::InvalidArgument("initial_history length must equal memory_m".into()));
        }
        let n_hist = 1usize << cfg.memory;
        let (strategies, tallies) = match cfg.vote_mode {
            VoteMode::StrategyDriven => {
                let mut srng = stream_rng(cfg.seed, STRATEGY_STREAM);
                let strategies = assign_strategies(cfg.n_agents, cfg.memory, &mut srng);
                let mut tallies = vec![[0u32; 3]; cfg.n_agents * n_hist];
                for (a, st) in strategies.iter().enumerate() {
                    let slot = partition.group_of(AgentId(a as u32)).0.slot();
                    for (h, action) in st.actions().iter().enumerate() {
                        tallies[slot * n_hist + h][*action as usize] += 1;
                    }
                }
                (strategies, tallies)
            }
            VoteMode::IidUniform => (Vec::new(), Vec::new()),
        };
        Ok(Self {
            partition,
            x: cfg.x,
            mode: cfg.vote_mode,
            history,
            strategies,
            tallies,
            n_hist,
            rng: stream_rng(cfg.seed, DYNAMICS_STREAM),
            step: 0,
            disperse_on_trade: cfg.disperse_on_trade,
            scratch: Vec::new(),
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn history(&self) -> History {
        self.history
    }

    pub fn strategies(&self) -> &[StrategyTable] {
        &self.strategies
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Current tally of a group. Strategy-driven polls are read from the
    /// per-group aggregate and consume no randomness.
    pub fn poll(&mut self, g: GroupId, size: u32) -> VoteTally {
        match self.mode {
            VoteMode::StrategyDriven => {
                let [buy, sell, wait] = self.tallies[g.slot() * self.n_hist + self.history.index()];
                VoteTally::new(buy, sell, wait)
            }
            VoteMode::IidUniform => sample_uniform_tally(size, &mut self.rng),
        }
    }

    fn fold_tallies(&mut self, into: usize, from: usize) {
        if self.mode != VoteMode::StrategyDriven {
            return;
        }
        for h in 0..self.n_hist {
            let src = self.tallies[from * self.n_hist + h];
            let dst = &mut self.tallies[into * self.n_hist + h];
            for i in 0..3 {
                dst[i] += src[i];
            }
        }
    }

    fn reset_singletons(&mut self) {
        if self.mode != VoteMode::StrategyDriven {
            return;
        }
        for i in 0..self.scratch.len() {
            let a = self.scratch[i];
            let slot = self.partition.group_of(AgentId(a)).0.slot();
            let base = slot * self.n_hist;
            for (h, action) in self.strategies[a as usize].actions().iter().enumerate() {
                let mut t = [0u32; 3];
                t[*action as usize] = 1;
                self.tallies[base + h] = t;
            }
        }
    }

    fn fragment(&mut self, g: GroupId) {
        self.scratch.clear();
        self.scratch.extend_from_slice(self.partition.members(g).expect("live group"));
        self.partition.fragment_group(g).expect("live group");
        self.reset_singletons();
    }

    /// Advance one time step.
    pub fn step(&mut self) -> StepEvent {
        self.step_observed(&mut |_, _| {})
    }

    // `observe(partition, size)` runs before each change to the count of
    // groups of that size; used for time averages.
    fn step_observed(&mut self, observe: &mut dyn FnMut(&Partition, usize)) -> StepEvent {
        let step = self.step;
        self.step += 1;
        let agent = self.partition.pick_random_agent(&mut self.rng);
        let (g, size) = self.partition.group_of(agent);
        let tally = self.poll(g, size as u32);
        let decision = decide(tally, self.x, &mut self.rng);
        let mut ret = 0i64;
        let mut noop = false;

        match decision {
            Decision::Buy | Decision::Sell => {
                ret = if decision == Decision::Buy { size as i64 } else { -(size as i64) };
                self.history = self.history.update(ret);
                if self.disperse_on_trade && size > 1 {
                    observe(&self.partition, size);
                    observe(&self.partition, 1);
                    self.fragment(g);
                }
            }
            Decision::Fragment => {
                observe(&self.partition, size);
                observe(&self.partition, 1);
                self.fragment(g);
            }
            Decision::Merge => {
                if size == self.partition.n_agents() {
                    noop = true;
                } else {
                    let other = loop {
                        let b = self.partition.pick_random_agent(&mut self.rng);
                        if !self.partition.same_group(agent, b) {
                            break b;
                        }
                    };
                    let (h, other_size) = self.partition.group_of(other);
                    observe(&self.partition, size);
                    observe(&self.partition, other_size);
                    observe(&self.partition, size + other_size);
                    let merged = self.partition.merge_groups(g, h).expect("distinct live groups");
                    let retired = if merged.slot() == g.slot() { h.slot() } else { g.slot() };
                    self.fold_tallies(merged.slot(), retired);
                }
            }
        }
        StepEvent { step, decision, group_size: size as u32, ret, noop }
    }
}

pub(crate) fn check_partition(p: &Partition, step: u64) {
    // full scan in debug builds, amortised to O(1) per step
    if cfg!(debug_assertions) && step % p.n_agents().max(1) as u64 == 0 {
        p.check_invariants().expect("partition invariant");
    }
    if step % 10_000 == 0 {
        assert_eq!(p.checksum(), p.n_agents() as u64, "group sizes no longer sum to N at step {step}");
    }
}

/// Run a full simulation. Returns the post-equilibration return series.
pub fn run(cfg: &SimConfig) -> Result<(ReturnSeries, RunSummary)> {
    run_observed(cfg, |_| {})
}

/// As [`run`], also handing every step event to `on_event`.
pub fn run_observed(cfg: &SimConfig, mut on_event: impl FnMut(&StepEvent)) -> Result<(ReturnSeries, RunSummary)> {
    cfg.validate()?;
    let elapsed = stopwatch();
    let mut sim = Simulation::new(cfg)?;
    let n = cfg.n_agents;
    let mut series = Vec::with_capacity((cfg.total_steps - cfg.equilibration_steps) as usize);
    let mut decision_counts = [0u64; 4];
    let mut by_size = vec![[0u64; 4]; n + 1];
    let mut noop_merges = 0;
    // the state after step t is sampled at time t + 1
    let mut occupancy = Occupancy::new(n, cfg.equilibration_steps + 1);

    for t in 0..cfg.total_steps {
        let ev = sim.step_observed(&mut |p, s| occupancy.touch(s, p.size_counts()[s], t + 1));
        decision_counts[ev.decision.index()] += 1;
        by_size[ev.group_size as usize][ev.decision.index()] += 1;
        noop_merges += ev.noop as u64;
        if t >= cfg.equilibration_steps {
            series.push(ev.ret);
        }
        on_event(&ev);
        check_partition(&sim.partition, t + 1);
    }

    let trades = decision_counts[0] + decision_counts[1];
    let summary = RunSummary {
        steps: cfg.total_steps,
        decision_counts,
        noop_merges,
        trade_fraction: trades as f64 / cfg.total_steps as f64,
        final_histogram: sim.partition.size_histogram().into_iter().collect(),
        mean_size_counts: occupancy.finish(sim.partition.size_counts(), cfg.total_steps + 1),
        decisions_by_size: by_size,
        wall_time_secs: elapsed(),
    };
    Ok((ReturnSeries(series), summary))
}

/// Seconds since the call. Always zero on wasm32-unknown-unknown, which has no clock.
#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
pub(crate) fn stopwatch() -> impl Fn() -> f64 {
    let started = std::time::Instant::now();
    move || started.elapsed().as_secs_f64()
}

#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
pub(crate) fn stopwatch() -> impl Fn() -> f64 {
    || 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voting::p_frg_exact;

    fn cfg(n: usize, x: f64, steps: u64) -> SimConfig {
        SimConfig::new(n, x, steps).unwrap()
    }

    #[test]
    fn rescale_examples() {
        let s = ReturnSeries(vec![3, 0, -5, 2]);
        assert_eq!(rescale_returns(&s, 2).unwrap(), ReturnSeries(vec![3, -3]));
        assert_eq!(rescale_returns(&s, 1).unwrap(), s);
        let five = ReturnSeries(vec![1, 2, 3, 4, 5]);
        assert_eq!(rescale_returns(&five, 2).unwrap().len(), 2);
        assert!(rescale_returns(&s, 0).is_err());
    }

    #[test]
    fn series_formats() {
        let s = ReturnSeries(vec![3, 0, -5, i64::MIN, i64::MAX]);
        let mut bin = Vec::new();
        s.write_binary(&mut bin).unwrap();
        assert_eq!(&bin[..8], &5u64.to_le_bytes());
        assert_eq!(&bin[16..24], &0i64.to_le_bytes());
        assert_eq!(ReturnSeries::read_binary(bin.as_slice()).unwrap(), s);
        assert!(ReturnSeries::read_binary(&bin[..20]).is_err());

        let mut text = Vec::new();
        s.write_text(&mut text).unwrap();
        let text = String::from_utf8(text).unwrap();
        assert!(text.starts_with("3\n0\n-5\n"));
        assert_eq!(ReturnSeries::read_text(&text).unwrap(), s);
    }

    #[test]
    fn single_agent_merge_is_noop() {
        let mut c = cfg(2, 0.4, 10);
        c.n_agents = 1;
        c.vote_mode = VoteMode::IidUniform;
        let mut sim = Simulation::new(&c).unwrap();
        let mut merges = 0;
        for _ in 0..200 {
            let ev = sim.step();
            assert_ne!(ev.decision, Decision::Fragment);
            if ev.decision == Decision::Merge {
                assert!(ev.noop);
                merges += 1;
            }
            assert_eq!(sim.partition().n_groups(), 1);
        }
        assert!(merges > 0);
    }

    #[test]
    fn invariants_every_step() {
        for mode in [VoteMode::StrategyDriven, VoteMode::IidUniform] {
            for disperse in [false, true] {
                let mut c = cfg(60, 0.41, 10);
                c.vote_mode = mode;
                c.disperse_on_trade = disperse;
                let mut sim = Simulation::new(&c).unwrap();
                for _ in 0..5000 {
                    let ev = sim.step();
                    sim.partition().check_invariants().unwrap();
                    if ev.decision.is_trade() {
                        assert_eq!(ev.ret.unsigned_abs(), ev.group_size as u64);
                    } else {
                        assert_eq!(ev.ret, 0);
                    }
                    assert!(!(ev.decision == Decision::Fragment && ev.group_size == 1));
                }
            }
        }
    }

    #[test]
    fn strategy_tallies_track_members() {
        let c = cfg(40, 0.41, 10);
        let mut sim = Simulation::new(&c).unwrap();
        for _ in 0..3000 {
            sim.step();
            let groups: Vec<(GroupId, Vec<u32>)> =
                sim.partition().groups().map(|(g, m)| (g, m.to_vec())).collect();
            for (g, members) in groups {
                let h = sim.history();
                let expect =
                    crate::strategy::poll_group(&members, sim.strategies(), h, VoteMode::StrategyDriven, &mut stream_rng(0, 9))
                        .unwrap();
                assert_eq!(sim.poll(g, members.len() as u32), expect);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        for mode in [VoteMode::StrategyDriven, VoteMode::IidUniform] {
            let mut c = cfg(500, 0.41, 20_000);
            c.vote_mode = mode;
            let (a, sa) = run(&c).unwrap();
            let (b, sb) = run(&c).unwrap();
            assert_eq!(a, b);
            assert_eq!(sa.decision_counts, sb.decision_counts);
            c.seed = 2;
            assert_ne!(run(&c).unwrap().0, a);
        }
    }

    #[test]
    fn summary_bookkeeping() {
        let mut c = cfg(200, 0.41, 30_000);
        c.equilibration_steps = c.total_steps - 1;
        let (series, s) = run(&c).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(s.decision_counts.iter().sum::<u64>(), c.total_steps);
        let per_size: u64 = s.decisions_by_size.iter().flatten().sum();
        assert_eq!(per_size, c.total_steps);
        let mass: usize = s.final_histogram.iter().map(|(size, n)| size * *n as usize).sum();
        assert_eq!(mass, 200);
    }

    #[test]
    fn occupancy_average_is_mass_preserving() {
        let mut c = cfg(100, 0.41, 50_000);
        c.vote_mode = VoteMode::IidUniform;
        let (_, s) = run(&c).unwrap();
        let mass: f64 = s.mean_size_counts.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
        assert!((mass - 100.0).abs() < 1e-9, "{mass}");
    }

    #[test]
    fn invalid_configs() {
        let mut c = cfg(10, 0.4, 100);
        c.equilibration_steps = 100;
        assert!(run(&c).is_err());
        let mut c = cfg(10, 0.4, 100);
        c.memory = 3;
        assert!(run(&c).is_err());
        assert!(run(&cfg(1, 0.4, 100)).is_err());
    }

    #[test]
    fn conditional_frequencies_small() {
        // 2e5 steps, iid votes: fragment frequency at size 3 close to 2/9
        let mut c = cfg(30, 0.41, 200_000);
        c.vote_mode = VoteMode::IidUniform;
        let (_, s) = run(&c).unwrap();
        let row = s.decisions_by_size[3];
        let total: u64 = row.iter().sum();
        assert!(total > 1000);
        let p = p_frg_exact(3, c.x);
        let sigma = (p * (1.0 - p) / total as f64).sqrt();
        assert!((row[3] as f64 / total as f64 - p).abs() < 4.0 * sigma);
        assert_eq!(s.decisions_by_size[1][3], 0);
    }
}
