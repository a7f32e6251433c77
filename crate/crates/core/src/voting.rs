//! Group decisions under a relative-majority consensus threshold.
//!
//! A group of size `s` polls its members (buy / sell / wait). The threshold
//! is the real number `T = x * s`; integer vote counts are compared against
//! it without rounding. If every count is below `T` the group fragments.
//! Otherwise the largest count wins, and ties between options that share the
//! largest count are broken uniformly at random.
//!
//! With i.i.d. uniform votes the buy, sell and merge outcomes are
//! exchangeable, so everything follows from the fragmentation probability,
//! which is a finite sum of multinomial terms over the region where all three
//! counts are below `T`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of a group that must agree before it acts.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ConsensusParameter(f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `x <= 1/3`: the top count always reaches the threshold.
    NoFragmentation,
    /// `1/3 < x <= 1/2`: the operational regime of the model.
    RelativeMajority,
    /// `x > 1/2`: only an absolute majority can act.
    AbsoluteMajority,
}

impl ConsensusParameter {
    pub fn new(x: f64) -> Result<Self> {
        if x.is_finite() && x > 0.0 && x < 1.0 {
            Ok(Self(x))
        } else {
            Err(Error::InvalidArgument(format!("consensus parameter must lie in (0, 1), got {x}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn regime(self) -> Regime {
        if self.0 <= 1.0 / 3.0 {
            Regime::NoFragmentation
        } else if self.0 <= 0.5 {
            Regime::RelativeMajority
        } else {
            Regime::AbsoluteMajority
        }
    }
}

impl TryFrom<f64> for ConsensusParameter {
    type Error = Error;
    fn try_from(x: f64) -> Result<Self> {
        Self::new(x)
    }
}

impl From<ConsensusParameter> for f64 {
    fn from(x: ConsensusParameter) -> f64 {
        x.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Buy,
    Sell,
    Wait,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Buy, Action::Sell, Action::Wait];

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Buy,
    Sell,
    Merge,
    Fragment,
}

impl Decision {
    pub const ALL: [Decision; 4] = [Decision::Buy, Decision::Sell, Decision::Merge, Decision::Fragment];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_trade(self) -> bool {
        matches!(self, Decision::Buy | Decision::Sell)
    }

    fn from_action(a: Action) -> Self {
        match a {
            Action::Buy => Decision::Buy,
            Action::Sell => Decision::Sell,
            Action::Wait => Decision::Merge,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoteTally {
    pub buy: u32,
    pub sell: u32,
    pub wait: u32,
}

impl VoteTally {
    pub fn new(buy: u32, sell: u32, wait: u32) -> Self {
        Self { buy, sell, wait }
    }

    pub fn size(&self) -> u32 {
        self.buy + self.sell + self.wait
    }

    fn counts(&self) -> [u32; 3] {
        [self.buy, self.sell, self.wait]
    }

    pub fn add(&mut self, action: Action) {
        match action {
            Action::Buy => self.buy += 1,
            Action::Sell => self.sell += 1,
            Action::Wait => self.wait += 1,
        }
    }
}

/// `T = x * s`.
pub fn threshold(s: u32, x: ConsensusParameter) -> f64 {
    x.0 * s as f64
}

fn meets(count: u32, t: f64) -> bool {
    count as f64 >= t
}

/// Largest count that is still strictly below the threshold, or `None` when
/// even zero meets it.
fn max_count_below(s: u32, x: ConsensusParameter) -> Option<u32> {
    let t = threshold(s, x);
    let mut c = t.floor().min(s as f64) as i64;
    while c >= 0 && meets(c as u32, t) {
        c -= 1;
    }
    (c >= 0).then_some(c as u32)
}

/// Deterministic part of the decision: either fragmentation or the set of
/// options tied at the top count (which is at or above the threshold).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Fragment,
    /// Winning actions; `len` of them are meaningful, in `Action::ALL` order.
    Consensus { winners: [Action; 3], len: usize },
}

pub fn classify(tally: VoteTally, x: ConsensusParameter) -> Outcome {
    let t = threshold(tally.size(), x);
    let counts = tally.counts();
    let top = counts.into_iter().max().unwrap_or(0);
    if !meets(top, t) {
        return Outcome::Fragment;
    }
    let mut winners = [Action::Buy; 3];
    let mut len = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c == top {
            winners[len] = Action::from_index(i);
            len += 1;
        }
    }
    Outcome::Consensus { winners, len }
}

/// Classify a tally and resolve ties with `rng`. The stream is only consumed
/// when two or three options tie.
pub fn decide<R: Rng + ?Sized>(tally: VoteTally, x: ConsensusParameter, rng: &mut R) -> Decision {
    match classify(tally, x) {
        Outcome::Fragment => Decision::Fragment,
        Outcome::Consensus { winners, len: 1 } => Decision::from_action(winners[0]),
        Outcome::Consensus { winners, len } => Decision::from_action(winners[rng.random_range(0..len)]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionProbabilities {
    pub fragment: f64,
    pub buy: f64,
    pub sell: f64,
    pub merge: f64,
}

impl DecisionProbabilities {
    pub fn of(self, d: Decision) -> f64 {
        match d {
            Decision::Buy => self.buy,
            Decision::Sell => self.sell,
            Decision::Merge => self.merge,
            Decision::Fragment => self.fragment,
        }
    }
}

/// Log-multinomial helper. `ln k!` is split as `k ln k - k + g(k)` and the
/// large `k ln k` parts are recombined as relative entropies through `ln_1p`,
/// which avoids cancelling numbers of size `s ln s` against each other.
#[derive(Debug, Clone)]
pub struct LogFactorials {
    // g(k) = ln k! - (k ln k - k), with g(0) = 0
    g: Vec<f64>,
}

impl LogFactorials {
    pub fn new(n: usize) -> Self {
        Self { g: (0..=n).map(stirling_remainder).collect() }
    }

    pub fn max_n(&self) -> usize {
        self.g.len() - 1
    }

    /// `ln k!`.
    pub fn ln_factorial(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            let kf = k as f64;
            kf * kf.ln() - kf + self.g[k]
        }
    }

    /// `ln( s! / (prod c_i!) * prod p_i^c_i )` for counts summing to `s`,
    /// where `p_i = weight_i / total_weight`.
    fn ln_multinomial(&self, counts: &[usize], weights: &[f64]) -> f64 {
        let s: usize = counts.iter().sum();
        let total: f64 = weights.iter().sum();
        let sf = s as f64;
        let mut out = self.g[s];
        for (&c, &w) in counts.iter().zip(weights) {
            out -= self.g[c];
            if c > 0 {
                // c * ln(c / (s p))
                let expected = sf * w / total;
                let cf = c as f64;
                out -= cf * ((cf - expected) / expected).ln_1p();
            }
        }
        out
    }
}

fn stirling_remainder(k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let kf = k as f64;
    if k < 20 {
        let fact: u64 = (1..=k as u64).product();
        (fact as f64).ln() - (kf * kf.ln() - kf)
    } else {
        let inv = 1.0 / kf;
        let inv2 = inv * inv;
        0.5 * (2.0 * std::f64::consts::PI * kf).ln()
            + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }

    fn scale(&mut self, f: f64) {
        self.sum *= f;
        self.comp *= f;
    }
}

/// Streaming log-sum-exp with compensated accumulation.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    shift: f64,
    acc: NeumaierSum,
}

impl LogSum {
    fn new() -> Self {
        Self { shift: f64::NEG_INFINITY, acc: NeumaierSum::default() }
    }

    fn add(&mut self, log_term: f64) {
        if log_term > self.shift {
            if self.shift.is_finite() {
                self.acc.scale((self.shift - log_term).exp());
            }
            self.shift = log_term;
        }
        self.acc.add((log_term - self.shift).exp());
    }

    fn ln(&self) -> f64 {
        if self.shift.is_finite() {
            self.shift + self.acc.value().ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

// Terms this many nats below the running total are dropped (e^-50 ~ 2e-22).
const PRUNE_NATS: f64 = 50.0;

/// Fragmentation probability and its complement, each summed directly over
/// its own region so that neither loses precision by subtraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FragmentSplit {
    pub fragment: f64,
    pub consensus: f64,
}

/// Exact split for i.i.d. uniform votes among `s` members.
pub fn fragment_split(s: u32, x: ConsensusParameter) -> FragmentSplit {
    let lnf = LogFactorials::new(s as usize);
    fragment_split_with(s, x, &lnf)
}

pub fn fragment_split_with(s: u32, x: ConsensusParameter, lnf: &LogFactorials) -> FragmentSplit {
    let Some(cmax) = max_count_below(s, x) else {
        return FragmentSplit { fragment: 0.0, consensus: 1.0 };
    };
    if (3 * cmax as u64) < s as u64 {
        return FragmentSplit { fragment: 0.0, consensus: 1.0 };
    }

    let n = s as usize;
    let cmax = cmax as usize;
    // row w carries total mass C(n, w) (1/3)^w (2/3)^(n - w)
    let row_mass = |w: usize| lnf.ln_multinomial(&[w, n - w], &[1.0, 2.0]);
    let term = |w: usize, b: usize| lnf.ln_multinomial(&[w, b, n - w - b], &[1.0, 1.0, 1.0]);

    let mut frag = LogSum::new();
    let mut cons = LogSum::new();
    let slack = ((n + 1) as f64).ln();

    // Row w splits b in [0, n - w] into a fragmenting middle band (when
    // w itself is below the threshold) and consensus on either side.
    let visit_row = |w: usize, frag: &mut LogSum, cons: &mut LogSum| {
        let rest = n - w;
        let peak = rest / 2;
        let band = (w <= cmax).then(|| (rest.saturating_sub(cmax), cmax.min(rest)));
        match band {
            Some((lo, hi)) if lo <= hi => {
                sum_segment(lo, hi, peak, |b| term(w, b), frag, slack);
                if lo > 0 {
                    sum_segment(0, lo - 1, peak, |b| term(w, b), cons, slack);
                }
                if hi < rest {
                    sum_segment(hi + 1, rest, peak, |b| term(w, b), cons, slack);
                }
            }
            _ => sum_segment(0, rest, peak, |b| term(w, b), cons, slack),
        }
    };

    // Rows are unimodal in w around s/3; walk outward and stop once the
    // whole remaining tail is negligible against both running totals.
    let mode = n / 3;
    visit_row(mode, &mut frag, &mut cons);
    for dir in [-1i64, 1] {
        let mut w = mode as i64 + dir;
        while w >= 0 && w <= n as i64 {
            let wu = w as usize;
            let bound = row_mass(wu) + slack;
            if bound < frag.ln() - PRUNE_NATS && bound < cons.ln() - PRUNE_NATS {
                break;
            }
            visit_row(wu, &mut frag, &mut cons);
            w += dir;
        }
    }
    FragmentSplit { fragment: frag.ln().exp().min(1.0), consensus: cons.ln().exp().min(1.0) }
}

// Binomial-shaped terms in b peak at `peak`; start from the closest point of
// [lo, hi] and walk outward while terms still matter.
fn sum_segment(lo: usize, hi: usize, peak: usize, term: impl Fn(usize) -> f64, acc: &mut LogSum, slack: f64) {
    let start = peak.clamp(lo, hi);
    let first = term(start);
    acc.add(first);
    let mut b = start;
    while b > lo {
        b -= 1;
        let t = term(b);
        acc.add(t);
        if t + slack < acc.ln() - PRUNE_NATS {
            break;
        }
    }
    let mut b = start;
    while b < hi {
        b += 1;
        let t = term(b);
        acc.add(t);
        if t + slack < acc.ln() - PRUNE_NATS {
            break;
        }
    }
}

/// Probability that a group of size `s` with i.i.d. uniform votes fragments.
pub fn p_frg_exact(s: u32, x: ConsensusParameter) -> f64 {
    fragment_split(s, x).fragment
}

pub fn decision_probabilities(s: u32, x: ConsensusParameter) -> DecisionProbabilities {
    probabilities_from_split(fragment_split(s, x))
}

fn probabilities_from_split(split: FragmentSplit) -> DecisionProbabilities {
    let share = split.consensus / 3.0;
    DecisionProbabilities { fragment: split.fragment, buy: share, sell: share, merge: share }
}

/// Largest group size accepted by [`p_frg_oracle`].
pub const ORACLE_MAX_SIZE: u32 = 14;

/// Fragmentation probability by walking every one of the `3^s` vote
/// assignments and applying [`classify`]. Returns `(fragmenting, 3^s)`.
pub fn p_frg_oracle_count(s: u32, x: ConsensusParameter) -> Result<(u64, u64)> {
    if s > ORACLE_MAX_SIZE {
        return Err(Error::TooLargeForOracle(s as usize));
    }
    let total = 3u64.pow(s);
    let mut votes = vec![0u8; s as usize];
    let mut tally = VoteTally::new(s, 0, 0);
    let mut hits = 0u64;
    for i in 0..total {
        if i > 0 {
            // base-3 increment, keeping the tally in step
            for v in votes.iter_mut() {
                let old = Action::from_index(*v as usize);
                *v = (*v + 1) % 3;
                let new = Action::from_index(*v as usize);
                match old {
                    Action::Buy => tally.buy -= 1,
                    Action::Sell => tally.sell -= 1,
                    Action::Wait => tally.wait -= 1,
                }
                tally.add(new);
                if *v != 0 {
                    break;
                }
            }
        }
        if classify(tally, x) == Outcome::Fragment {
            hits += 1;
        }
    }
    Ok((hits, total))
}

pub fn p_frg_oracle(s: u32, x: ConsensusParameter) -> Result<f64> {
    let (hits, total) = p_frg_oracle_count(s, x)?;
    Ok(hits as f64 / total as f64)
}

/// Lazily filled per-size cache of decision probabilities for one `x`.
/// Owned by a single worker; build one per thread.
#[derive(Debug, Clone)]
pub struct FragmentationTable {
    x: ConsensusParameter,
    lnf: LogFactorials,
    entries: Vec<Option<FragmentSplit>>,
}

impl FragmentationTable {
    pub fn new(x: ConsensusParameter, max_size: usize) -> Self {
        Self { x, lnf: LogFactorials::new(max_size), entries: vec![None; max_size + 1] }
    }

    pub fn x(&self) -> ConsensusParameter {
        self.x
    }

    pub fn split(&mut self, s: u32) -> FragmentSplit {
        let i = s as usize;
        if i >= self.entries.len() {
            self.lnf = LogFactorials::new(i);
            self.entries.resize(i + 1, None);
        }
        if let Some(v) = self.entries[i] {
            return v;
        }
        let v = fragment_split_with(s, self.x, &self.lnf);
        self.entries[i] = Some(v);
        v
    }

    pub fn probabilities(&mut self, s: u32) -> DecisionProbabilities {
        probabilities_from_split(self.split(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn x(v: f64) -> ConsensusParameter {
        ConsensusParameter::new(v).unwrap()
    }

    #[test]
    fn threshold_is_exact_product() {
        assert_eq!(threshold(5, x(0.40)), 2.0);
        assert_eq!(threshold(1, x(0.47)), 0.47);
        assert_eq!(threshold(10_000, x(0.37)), 3700.0);
    }

    #[test]
    fn parameter_bounds_and_regimes() {
        assert!(ConsensusParameter::new(0.0).is_err());
        assert!(ConsensusParameter::new(1.0).is_err());
        assert!(ConsensusParameter::new(f64::NAN).is_err());
        assert_eq!(x(0.3).regime(), Regime::NoFragmentation);
        assert_eq!(x(0.41).regime(), Regime::RelativeMajority);
        assert_eq!(x(0.9).regime(), Regime::AbsoluteMajority);
    }

    #[test]
    fn decide_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(decide(VoteTally::new(3, 1, 1), x(0.4), &mut rng), Decision::Buy);
        assert_eq!(decide(VoteTally::new(1, 1, 1), x(0.4), &mut rng), Decision::Fragment);
        assert_eq!(decide(VoteTally::new(1, 1, 3), x(0.4), &mut rng), Decision::Merge);
        // counts equal to an integral threshold reach consensus: buy/merge tie
        let d = decide(VoteTally::new(2, 1, 2), x(0.4), &mut rng);
        assert!(matches!(d, Decision::Buy | Decision::Merge));
        assert_eq!(classify(VoteTally::new(2, 0, 3), x(0.4)), Outcome::Consensus {
            winners: [Action::Wait, Action::Buy, Action::Buy],
            len: 1
        });
    }

    #[test]
    fn tie_is_split_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 100_000;
        let mut buys = 0;
        for _ in 0..trials {
            match decide(VoteTally::new(2, 2, 0), x(0.4), &mut rng) {
                Decision::Buy => buys += 1,
                Decision::Sell => {}
                d => panic!("unexpected {d:?}"),
            }
        }
        let sigma = (trials as f64 * 0.25).sqrt();
        assert!((buys as f64 - trials as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn three_way_tie_uses_all_options() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut seen = [0u32; 4];
        for _ in 0..3000 {
            seen[decide(VoteTally::new(2, 2, 2), x(0.3), &mut rng).index()] += 1;
        }
        assert!(seen[..3].iter().all(|&c| c > 900));
        assert_eq!(seen[3], 0);
    }

    #[test]
    fn buy_sell_relabeling() {
        let xs = [0.34, 0.4, 0.47];
        for &xv in &xs {
            for b in 0..6u32 {
                for s in 0..6u32 {
                    for w in 0..6u32 {
                        if b + s + w == 0 {
                            continue;
                        }
                        let a = classify(VoteTally::new(b, s, w), x(xv));
                        let swapped = classify(VoteTally::new(s, b, w), x(xv));
                        let relabel = |o: Outcome| match o {
                            Outcome::Fragment => vec![],
                            Outcome::Consensus { winners, len } => {
                                let mut v: Vec<_> = winners[..len]
                                    .iter()
                                    .map(|a| match a {
                                        Action::Buy => Action::Sell,
                                        Action::Sell => Action::Buy,
                                        Action::Wait => Action::Wait,
                                    })
                                    .collect();
                                v.sort();
                                v
                            }
                        };
                        let plain = |o: Outcome| match o {
                            Outcome::Fragment => vec![],
                            Outcome::Consensus { winners, len } => {
                                let mut v = winners[..len].to_vec();
                                v.sort();
                                v
                            }
                        };
                        assert_eq!(plain(swapped), relabel(a));
                        assert_eq!(a == Outcome::Fragment, swapped == Outcome::Fragment);
                    }
                }
            }
        }
    }

    #[test]
    fn p_frg_small_cases() {
        assert_eq!(p_frg_exact(1, x(0.4)), 0.0);
        assert_eq!(p_frg_exact(1, x(0.99)), 0.0);
        assert_eq!(p_frg_exact(2, x(0.4)), 0.0);
        assert!((p_frg_exact(3, x(0.4)) - 2.0 / 9.0).abs() < 1e-15);
        assert!((p_frg_exact(6, x(0.4)) - 90.0 / 729.0).abs() < 1e-15);
        assert_eq!(p_frg_oracle_count(3, x(0.4)).unwrap(), (6, 27));
        assert_eq!(p_frg_oracle(1, x(0.4)).unwrap(), 0.0);
        assert!(p_frg_oracle(15, x(0.4)).is_err());
    }

    #[test]
    fn matches_oracle_at_twelve() {
        for &xv in &[0.35, 0.37, 0.41, 0.45, 0.47] {
            let exact = p_frg_exact(12, x(xv));
            let oracle = p_frg_oracle(12, x(xv)).unwrap();
            assert!((exact - oracle).abs() < 1e-12, "x={xv}: {exact} vs {oracle}");
        }
    }

    #[test]
    fn decision_probability_examples() {
        let p = decision_probabilities(1, x(0.4));
        assert_eq!((p.fragment, p.buy, p.sell, p.merge), (0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0));
        let p = decision_probabilities(3, x(0.4));
        assert!((p.fragment - 2.0 / 9.0).abs() < 1e-15);
        for v in [p.buy, p.sell, p.merge] {
            assert!((v - 7.0 / 27.0).abs() < 1e-15);
        }
    }

    #[test]
    fn completeness_on_grid() {
        let mut sizes: Vec<u32> = (1..=200).collect();
        sizes.extend([257, 500, 1000, 2048, 5000, 10_000]);
        for &xv in &[0.34, 0.37, 0.41, 0.45, 0.47, 0.499, 0.6, 0.9] {
            let mut table = FragmentationTable::new(x(xv), 16);
            for &s in &sizes {
                let p = table.probabilities(s);
                let sum = p.fragment + p.buy + p.sell + p.merge;
                assert!((sum - 1.0).abs() < 1e-12, "s={s} x={xv} sum={sum}");
                assert!((0.0..=1.0).contains(&p.fragment));
            }
        }
    }

    #[test]
    fn consensus_tail_is_exponential() {
        // log(1 - p_frg) at x = 0.47 falls linearly for large s
        let xv = x(0.47);
        let mut table = FragmentationTable::new(xv, 1000);
        let pts: Vec<(f64, f64)> =
            (100..=1000).step_by(10).map(|s| (s as f64, table.split(s).consensus.ln())).collect();
        // lattice effects of the integer threshold allow small local rises,
        // but every 100-step stride is strictly downhill
        assert!(pts.iter().zip(pts.iter().skip(10)).all(|(a, b)| b.1 < a.1));
        let n = pts.len() as f64;
        let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        let slope = sxy / sxx;
        let r2 = sxy * sxy / (sxx * syy);
        assert!(slope < 0.0);
        assert!(r2 > 0.99, "r2 = {r2}");
    }

    #[test]
    fn symmetric_outcomes_from_uniform_tallies() {
        // 10^6 uniform polls of a size-9 group at x = 0.41
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (s, xv) = (9u32, x(0.41));
        let trials = 1_000_000u32;
        let mut counts = [0u32; 4];
        for _ in 0..trials {
            let mut t = VoteTally::default();
            for _ in 0..s {
                t.add(Action::from_index(rng.random_range(0..3)));
            }
            counts[decide(t, xv, &mut rng).index()] += 1;
        }
        let p = decision_probabilities(s, xv);
        let sigma = (trials as f64 * p.buy * (1.0 - p.buy)).sqrt();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let diff = (counts[a] as f64 - counts[b] as f64).abs();
            assert!(diff < 3.0 * sigma * 2f64.sqrt(), "{counts:?}");
        }
        let frg = counts[3] as f64 / trials as f64;
        let sf = (p.fragment * (1.0 - p.fragment) / trials as f64).sqrt();
        assert!((frg - p.fragment).abs() < 3.0 * sf);
    }
}
