//! Global information channel: the shared price-movement history and each
//! agent's fixed strategy table.
//!
//! Strategies have no score and never change after assignment, so an agent
//! with a given table always casts the same vote for the same history.

use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voting::{Action, VoteTally};

pub const MAX_MEMORY: usize = 16;

/// The last `m` price movements (1 = up, 0 = down), most recent last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct History {
    // most recent movement in the lowest bit
    bits: u32,
    m: u8,
}

impl History {
    pub fn new(movements: &[u8]) -> Result<Self> {
        let m = movements.len();
        if m == 0 || m > MAX_MEMORY {
            return Err(Error::InvalidArgument(format!("memory length must be in 1..={MAX_MEMORY}, got {m}")));
        }
        let mut bits = 0u32;
        for &b in movements {
            if b > 1 {
                return Err(Error::InvalidArgument(format!("history symbols are 0 or 1, got {b}")));
            }
            bits = (bits << 1) | b as u32;
        }
        Ok(Self { bits, m: m as u8 })
    }

    /// All-up history of length `m`.
    pub fn all_up(m: usize) -> Result<Self> {
        Self::new(&vec![1; m])
    }

    pub fn memory(&self) -> usize {
        self.m as usize
    }

    /// Index of this history in a strategy table.
    pub fn index(&self) -> usize {
        self.bits as usize
    }

    pub fn movements(&self) -> Vec<u8> {
        (0..self.m).rev().map(|i| ((self.bits >> i) & 1) as u8).collect()
    }

    /// Shift in the sign of a net return. A zero return leaves the history
    /// unchanged: the price did not move.
    pub fn update(self, net_return: i64) -> Self {
        let bit = match net_return.signum() {
            1 => 1,
            -1 => 0,
            _ => return self,
        };
        let mask = (1u32 << self.m) - 1;
        Self { bits: ((self.bits << 1) | bit) & mask, m: self.m }
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.movements().iter().map(u8::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

pub fn update_history(h: History, net_return: i64) -> History {
    h.update(net_return)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StrategyTable {
    actions: Vec<Action>,
    m: usize,
}

impl StrategyTable {
    pub fn constant(m: usize, action: Action) -> Self {
        Self { actions: vec![action; 1 << m], m }
    }

    pub fn from_actions(actions: Vec<Action>) -> Result<Self> {
        let len = actions.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::InvalidArgument(format!("table length {len} is not 2^m with m >= 1")));
        }
        Ok(Self { m: len.trailing_zeros() as usize, actions })
    }

    pub fn memory(&self) -> usize {
        self.m
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn vote(&self, h: History) -> Result<Action> {
        if h.memory() != self.m {
            return Err(Error::HistoryLength { expected: self.m, got: h.memory() });
        }
        Ok(self.actions[h.index()])
    }
}

/// Each of the `2^m` entries drawn independently and uniformly, in history
/// index order.
pub fn random_strategy<R: Rng + ?Sized>(m: usize, rng: &mut R) -> StrategyTable {
    let actions = (0..1usize << m).map(|_| Action::from_index(rng.random_range(0..3))).collect();
    StrategyTable { actions, m }
}

/// Draw one table per agent: agent 0 first, then agent 1, and so on.
pub fn assign_strategies<R: Rng + ?Sized>(n_agents: usize, m: usize, rng: &mut R) -> Vec<StrategyTable> {
    (0..n_agents).map(|_| random_strategy(m, rng)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteMode {
    /// Members vote their strategy table entry for the current history.
    #[default]
    StrategyDriven,
    /// Fresh independent uniform votes on every poll.
    IidUniform,
}

impl std::str::FromStr for VoteMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strategy_driven" | "strategy" => Ok(Self::StrategyDriven),
            "iid_uniform" | "iid" => Ok(Self::IidUniform),
            other => Err(Error::InvalidArgument(format!("unknown vote mode {other:?}"))),
        }
    }
}

pub fn poll_group<R: Rng + ?Sized>(
    members: &[u32],
    strategies: &[StrategyTable],
    h: History,
    mode: VoteMode,
    rng: &mut R,
) -> Result<VoteTally> {
    if members.is_empty() {
        return Err(Error::InvalidArgument("cannot poll an empty group".into()));
    }
    let mut tally = VoteTally::default();
    match mode {
        VoteMode::StrategyDriven => {
            for &a in members {
                tally.add(strategies[a as usize].vote(h)?);
            }
        }
        VoteMode::IidUniform => {
            for _ in members {
                tally.add(Action::from_index(rng.random_range(0..3)));
            }
        }
    }
    Ok(tally)
}

/// Multinomial(s; 1/3, 1/3, 1/3) tally, drawn as two binomials. Same law as
/// `s` independent uniform votes at O(1) cost in `s`.
pub fn sample_uniform_tally<R: Rng + ?Sized>(s: u32, rng: &mut R) -> VoteTally {
    let buy = Binomial::new(s as u64, 1.0 / 3.0).expect("valid binomial").sample(rng) as u32;
    let sell = Binomial::new((s - buy) as u64, 0.5).expect("valid binomial").sample(rng) as u32;
    VoteTally::new(buy, sell, s - buy - sell)
}
