//! Stationary mean-field group-size distribution.
//!
//! `n[s]` is the average number of groups of size `s`. Per time step an agent
//! is picked uniformly, so the acting group has size `s` with probability
//! `s n[s] / N`. It then
//!
//! * fragments with probability `p_frg(s)` (`s >= 2`), giving `s` singletons;
//! * merges with probability `p_merge(s)` into the group of a random agent,
//!   which lies in a group of size `t` with probability `t n[t] / N`;
//! * trades otherwise, which leaves the partition unchanged.
//!
//! The stationary balance per size `k` reads
//!
//! ```text
//! 0 = - (k/N) p_frg(k) [k >= 2] n_k
//!     - (k/N) [ p_merge(k) A_k + B_k ] n_k
//!     + sum_{s=1}^{k-1} (s n_s / N) p_merge(s) ((k-s) n_{k-s} / N)
//!     + [k = 1] sum_{s>=2} s (s n_s / N) p_frg(s)
//!
//! A_k = sum_{t <= N-k} t n_t / N          (merge target fits)
//! B_k = sum_{s <= N-k} (s n_s / N) p_merge(s)
//! ```
//!
//! A merge that would exceed `N` agents cannot happen and is dropped, the
//! same way the simulation treats a population-wide group. Gains for size `k`
//! only involve smaller sizes, so one sweep from `k = 1` upward solves each
//! equation for `n_k` with `A`, `B` frozen from the previous sweep.
//!
//! The singleton gain carries `s^2`: a size-`s` group is picked with weight
//! `s n_s / N` and releases `s` singletons when it fragments.
//!
//! Fluctuations are ignored by construction. The exact Markov chain on
//! partitions ([`stationary_oracle`]) keeps them, so the two differ at small
//! `N`; the gap closes as `N` grows.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voting::{ConsensusParameter, DecisionProbabilities, FragmentationTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSizeDistribution {
    /// `n[s]` for `s = 0..=N`; `n[0]` is unused and zero.
    n: Vec<f64>,
}

impl GroupSizeDistribution {
    pub fn from_counts(n: Vec<f64>) -> Result<Self> {
        if n.len() < 2 {
            return Err(Error::InvalidArgument("distribution needs support on [1, N] with N >= 1".into()));
        }
        if n.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("group counts must be finite and nonnegative".into()));
        }
        let mut n = n;
        n[0] = 0.0;
        Ok(Self { n })
    }

    pub fn n_agents(&self) -> usize {
        self.n.len() - 1
    }

    /// Groups of size `s`.
    pub fn get(&self, s: usize) -> f64 {
        self.n.get(s).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.n
    }

    /// `sum_s s n_s`, which equals `N` for a valid distribution.
    pub fn mass(&self) -> f64 {
        self.n.iter().enumerate().map(|(s, v)| s as f64 * v).sum()
    }

    pub fn total_groups(&self) -> f64 {
        self.n.iter().sum()
    }

    /// Two columns, `size n_s`, with a header line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "size\tn_s")?;
        for (s, v) in self.n.iter().enumerate().skip(1) {
            writeln!(w, "{s}\t{v:.17e}")?;
        }
        Ok(())
    }

    pub fn read_text(text: &str) -> Result<Self> {
        let mut n = vec![0.0];
        for (i, line) in text.lines().enumerate().skip(1) {
            let mut cols = line.split('\t');
            let (Some(s), Some(v)) = (cols.next(), cols.next()) else {
                return Err(Error::Format(format!("line {}: expected two columns", i + 1)));
            };
            let s: usize = s.trim().parse().map_err(|_| Error::Format(format!("line {}: bad size", i + 1)))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::Format(format!("line {}: bad value", i + 1)))?;
            if s != n.len() {
                return Err(Error::Format(format!("line {}: sizes must run 1, 2, ... in order", i + 1)));
            }
            n.push(v);
        }
        Self::from_counts(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    /// Max-norm of the stationary balance violation.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Weight of the new sweep when blending with the previous iterate.
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-13, max_iterations: 1_000_000, damping: 0.5 }
    }
}

fn rate_table(n_agents: usize, x: ConsensusParameter) -> Vec<DecisionProbabilities> {
    let mut table = FragmentationTable::new(x, n_agents);
    (0..=n_agents as u32)
        .map(|s| {
            if s == 0 {
                DecisionProbabilities { fragment: 0.0, buy: 0.0, sell: 0.0, merge: 0.0 }
            } else {
                table.probabilities(s)
            }
        })
        .collect()
}

/// Net stationary flow into each size class, per time step. Index 0 is
/// unused. Mass-weighted flows cancel: `sum_s s * r[s] = 0`.
pub fn balance_residual(d: &GroupSizeDistribution, x: ConsensusParameter) -> Vec<f64> {
    let rates = rate_table(d.n_agents(), x);
    residual_with(&d.n, &rates)
}

fn residual_with(n: &[f64], rates: &[DecisionProbabilities]) -> Vec<f64> {
    let big_n = n.len() - 1;
    let nf = big_n as f64;
    let mut flow = vec![0.0; n.len()];
    for s in 1..=big_n {
        if n[s] == 0.0 {
            continue;
        }
        let pick = s as f64 * n[s] / nf;
        if s >= 2 {
            let f = pick * rates[s].fragment;
            flow[s] -= f;
            flow[1] += s as f64 * f;
        }
        let m = pick * rates[s].merge;
        if m == 0.0 {
            continue;
        }
        for t in 1..=big_n - s {
            let r = m * t as f64 * n[t] / nf;
            flow[s] -= r;
            flow[t] -= r;
            flow[s + t] += r;
        }
    }
    flow
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

pub fn solve_stationary(
    n_agents: usize,
    x: ConsensusParameter,
    opts: SolverOptions,
) -> Result<(GroupSizeDistribution, SolverReport)> {
    if n_agents < 2 {
        return Err(Error::InvalidArgument("mean-field solve needs N >= 2".into()));
    }
    if x.value() <= 1.0 / 3.0 {
        return Err(Error::InvalidArgument(format!("mean-field solve needs x > 1/3, got {}", x.value())));
    }
    if !(opts.tolerance > 0.0) || !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidArgument("tolerance must be > 0 and damping in (0, 1]".into()));
    }
    let rates = rate_table(n_agents, x);
    let big_n = n_agents;
    let nf = big_n as f64;
    // keeps the update finite when a size class has no outflow at all
    let shift = 1e-3 / nf;

    let mut n = vec![0.0; big_n + 1];
    n[1] = nf;
    let mut next = vec![0.0; big_n + 1];
    let mut residual = max_abs(&residual_with(&n, &rates));
    let mut iterations = 0;

    while residual > opts.tolerance && iterations < opts.max_iterations {
        iterations += 1;

        // prefix sums over the previous iterate
        let mut target_mass = vec![0.0; big_n + 1]; // sum_{t<=j} t n_t / N
        let mut actor_merge = vec![0.0; big_n + 1]; // sum_{s<=j} (s n_s / N) p_merge(s)
        for j in 1..=big_n {
            let w = j as f64 * n[j] / nf;
            target_mass[j] = target_mass[j - 1] + w;
            actor_merge[j] = actor_merge[j - 1] + w * rates[j].merge;
        }
        let singleton_gain: f64 =
            (2..=big_n).map(|s| s as f64 * (s as f64 * n[s] / nf) * rates[s].fragment).sum();

        for k in 1..=big_n {
            let kf = k as f64;
            let gain = if k == 1 {
                singleton_gain
            } else {
                (1..k)
                    .map(|s| (s as f64 * next[s] / nf) * rates[s].merge * ((k - s) as f64 * next[k - s] / nf))
                    .sum()
            };
            let frag = if k >= 2 { rates[k].fragment } else { 0.0 };
            let loss = kf / nf * (frag + rates[k].merge * target_mass[big_n - k] + actor_merge[big_n - k]);
            let solved = (gain + shift * n[k]) / (loss + shift);
            next[k] = (1.0 - opts.damping) * n[k] + opts.damping * solved;
        }

        let mass: f64 = next.iter().enumerate().map(|(s, v)| s as f64 * v).sum();
        let scale = nf / mass;
        for (dst, src) in n.iter_mut().zip(&next) {
            *dst = src * scale;
        }
        residual = max_abs(&residual_with(&n, &rates));
    }

    let report = SolverReport { iterations, residual, converged: residual <= opts.tolerance };
    Ok((GroupSizeDistribution { n }, report))
}

/// Largest population accepted by [`stationary_oracle`].
pub const ORACLE_MAX_AGENTS: usize = 8;

/// Integer partitions of `n` in non-increasing part order.
pub fn integer_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, max: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 0 {
            out.push(prefix.clone());
            return;
        }
        for p in (1..=n.min(max)).rev() {
            prefix.push(p);
            rec(n - p, p, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

fn canonical(mut parts: Vec<usize>) -> Vec<usize> {
    parts.sort_unstable_by(|a, b| b.cmp(a));
    parts
}

fn remove_one(parts: &[usize], s: usize) -> Vec<usize> {
    let mut out = parts.to_vec();
    let i = out.iter().position(|&p| p == s).expect("part present");
    out.remove(i);
    out
}

/// Transition matrix of the chain on group-size compositions, following the
/// simulation rules exactly: uniform agent pick, i.i.d. decision
/// probabilities, merge target uniform over agents outside the acting group.
pub fn transition_matrix(n_agents: usize, x: ConsensusParameter) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
    let states = integer_partitions(n_agents);
    let index: HashMap<Vec<usize>, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let rates = rate_table(n_agents, x);
    let nf = n_agents as f64;
    let mut p = vec![vec![0.0; states.len()]; states.len()];

    for (i, lambda) in states.iter().enumerate() {
        let mut mult: Vec<(usize, usize)> = Vec::new();
        for &s in lambda {
            match mult.last_mut() {
                Some((v, c)) if *v == s => *c += 1,
                _ => mult.push((s, 1)),
            }
        }
        for &(s, m) in &mult {
            let pick = (s * m) as f64 / nf;
            let r = rates[s];
            let mut stay = pick * (r.buy + r.sell);
            if r.fragment > 0.0 {
                let mut next = remove_one(lambda, s);
                next.extend(std::iter::repeat_n(1, s));
                p[i][index[&canonical(next)]] += pick * r.fragment;
            }
            if s == n_agents {
                stay += pick * r.merge;
            } else {
                let rest = remove_one(lambda, s);
                let outside = (n_agents - s) as f64;
                let mut seen = Vec::new();
                for &t in &rest {
                    if seen.contains(&t) {
                        continue;
                    }
                    seen.push(t);
                    let count = rest.iter().filter(|&&u| u == t).count();
                    let mut next = remove_one(&rest, t);
                    next.push(s + t);
                    p[i][index[&canonical(next)]] += pick * r.merge * (t * count) as f64 / outside;
                }
            }
            p[i][i] += stay;
        }
    }
    (states, p)
}

/// Exact stationary expectation of `n_s` for a tiny population.
pub fn stationary_oracle(n_agents: usize, x: ConsensusParameter) -> Result<GroupSizeDistribution> {
    if n_agents == 0 {
        return Err(Error::InvalidArgument("oracle needs N >= 1".into()));
    }
    if n_agents > ORACLE_MAX_AGENTS {
        return Err(Error::InvalidArgument(format!(
            "oracle enumerates partitions only up to N = {ORACLE_MAX_AGENTS}, got {n_agents}"
        )));
    }
    let (states, p) = transition_matrix(n_agents, x);
    let k = states.len();
    // (P^T - I) pi = 0 with the last row replaced by sum(pi) = 1
    let mut a = vec![vec![0.0; k + 1]; k];
    for (r, row) in a.iter_mut().enumerate() {
        for c in 0..k {
            row[c] = p[c][r] - if r == c { 1.0 } else { 0.0 };
        }
    }
    for c in 0..k {
        a[k - 1][c] = 1.0;
    }
    a[k - 1][k] = 1.0;
    let pi = gauss_solve(a)?;

    let mut n = vec![0.0; n_agents + 1];
    for (weight, lambda) in pi.iter().zip(&states) {
        for &s in lambda {
            n[s] += weight;
        }
    }
    Ok(GroupSizeDistribution { n })
}

// Augmented-matrix Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>) -> Result<Vec<f64>> {
    let k = a.len();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty");
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::InvalidArgument("singular stationary system".into()));
        }
        a.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=k {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Ok((0..k).map(|i| a[i][k] / a[i][i]).collect())
}
