//! Partition of a fixed agent population into disjoint groups.
//!
//! Each agent stores the slot of the group it belongs to; each slot stores a
//! dense member list. Merging moves the smaller list into the larger one, so
//! a merge costs `O(min(s1, s2))`. Fragmenting a group of size `s` touches
//! each of its members once. Union-find is not an option here because groups
//! must be able to split apart again.
//!
//! Group handles carry a generation counter. Every merge or fragment bumps
//! the generation of the slots involved, so stale handles are detected
//! instead of silently aliasing a different group.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub u32);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Opaque handle for a live group. Slots are recycled, generations are not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupId {
    slot: u32,
    generation: u32,
}

impl GroupId {
    /// Dense index of the slot behind this handle, usable for side tables.
    pub fn slot(self) -> usize {
        self.slot as usize
    }
}

#[derive(Debug, Clone, Default)]
struct Slot {
    members: Vec<u32>,
    generation: u32,
    live: bool,
}

#[derive(Debug, Clone)]
pub struct Partition {
    group_of_agent: Vec<u32>,
    slots: Vec<Slot>,
    free: Vec<u32>,
    // size_counts[s] = number of live groups of size s
    size_counts: Vec<u64>,
    n_groups: usize,
}

// Member lists above this capacity are released when their slot is freed.
const SHRINK_ABOVE: usize = 64;

impl Partition {
    /// Every agent in its own group.
    pub fn new_all_singletons(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("partition needs at least one agent".into()));
        }
        if n > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("{n} agents exceed the u32 index space")));
        }
        let slots = (0..n as u32)
            .map(|a| Slot { members: vec![a], generation: 0, live: true })
            .collect();
        let mut size_counts = vec![0; n + 1];
        size_counts[1] = n as u64;
        Ok(Self {
            group_of_agent: (0..n as u32).collect(),
            slots,
            free: Vec::new(),
            size_counts,
            n_groups: n,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.group_of_agent.len()
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    /// Upper bound (exclusive) on `GroupId::slot` values.
    pub fn slot_capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn pick_random_agent<R: Rng + ?Sized>(&self, rng: &mut R) -> AgentId {
        AgentId(rng.random_range(0..self.group_of_agent.len() as u32))
    }

    pub fn group_of(&self, agent: AgentId) -> (GroupId, usize) {
        let slot = self.group_of_agent[agent.index()];
        let s = &self.slots[slot as usize];
        (GroupId { slot, generation: s.generation }, s.members.len())
    }

    pub fn is_live(&self, g: GroupId) -> bool {
        self.slots
            .get(g.slot())
            .is_some_and(|s| s.live && s.generation == g.generation)
    }

    pub fn size(&self, g: GroupId) -> Result<usize> {
        self.check_live(g)?;
        Ok(self.slots[g.slot()].members.len())
    }

    pub fn members(&self, g: GroupId) -> Result<&[u32]> {
        self.check_live(g)?;
        Ok(&self.slots[g.slot()].members)
    }

    /// Whether two agents currently share a group.
    pub fn same_group(&self, a: AgentId, b: AgentId) -> bool {
        self.group_of_agent[a.index()] == self.group_of_agent[b.index()]
    }

    /// Live groups in slot order.
    pub fn groups(&self) -> impl Iterator<Item = (GroupId, &[u32])> {
        self.slots.iter().enumerate().filter(|(_, s)| s.live).map(|(i, s)| {
            (GroupId { slot: i as u32, generation: s.generation }, s.members.as_slice())
        })
    }

    fn check_live(&self, g: GroupId) -> Result<()> {
        if self.is_live(g) {
            Ok(())
        } else {
            Err(Error::StaleGroup)
        }
    }

    /// Merge two distinct live groups. Both handles are retired; the returned
    /// handle names the union.
    pub fn merge_groups(&mut self, g1: GroupId, g2: GroupId) -> Result<GroupId> {
        self.check_live(g1)?;
        self.check_live(g2)?;
        if g1.slot == g2.slot {
            return Err(Error::SelfMerge);
        }
        let (s1, s2) = (self.slots[g1.slot()].members.len(), self.slots[g2.slot()].members.len());
        let (keep, gone) = if s1 >= s2 { (g1.slot, g2.slot) } else { (g2.slot, g1.slot) };

        let moved = std::mem::take(&mut self.slots[gone as usize].members);
        for &a in &moved {
            self.group_of_agent[a as usize] = keep;
        }
        let kept = &mut self.slots[keep as usize];
        kept.members.extend_from_slice(&moved);
        kept.generation = kept.generation.wrapping_add(1);
        let merged = GroupId { slot: keep, generation: kept.generation };

        let mut moved = moved;
        moved.clear();
        self.release_slot(gone, moved);

        self.size_counts[s1] -= 1;
        self.size_counts[s2] -= 1;
        self.size_counts[s1 + s2] += 1;
        self.n_groups -= 1;
        Ok(merged)
    }

    fn release_slot(&mut self, slot: u32, mut buf: Vec<u32>) {
        if buf.capacity() > SHRINK_ABOVE {
            buf = Vec::new();
        }
        let s = &mut self.slots[slot as usize];
        s.members = buf;
        s.live = false;
        s.generation = s.generation.wrapping_add(1);
        self.free.push(slot);
    }

    /// Break a live group into singletons. Returns the number of singletons
    /// produced (the former group size).
    pub fn fragment_group(&mut self, g: GroupId) -> Result<usize> {
        self.check_live(g)?;
        let size = self.slots[g.slot()].members.len();
        if size == 1 {
            return Ok(1);
        }
        let mut members = std::mem::take(&mut self.slots[g.slot()].members);
        // The first member keeps the old slot under a fresh generation.
        for &a in &members[1..] {
            let slot = match self.free.pop() {
                Some(slot) => slot,
                None => {
                    self.slots.push(Slot::default());
                    (self.slots.len() - 1) as u32
                }
            };
            let s = &mut self.slots[slot as usize];
            s.members.clear();
            s.members.push(a);
            s.live = true;
            self.group_of_agent[a as usize] = slot;
        }
        members.truncate(1);
        if members.capacity() > SHRINK_ABOVE {
            members.shrink_to(4);
        }
        let s = &mut self.slots[g.slot()];
        s.members = members;
        s.generation = s.generation.wrapping_add(1);

        self.size_counts[size] -= 1;
        self.size_counts[1] += size as u64;
        self.n_groups += size - 1;
        Ok(size)
    }

    /// Number of live groups of each size, maintained incrementally.
    /// Index `s` holds the count for size `s`; index 0 is always zero.
    pub fn size_counts(&self) -> &[u64] {
        &self.size_counts
    }

    pub fn size_histogram(&self) -> BTreeMap<usize, u64> {
        self.size_counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| (s, c))
            .collect()
    }

    /// Full consistency scan. Used by tests and debug-mode checks.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n_agents();
        let mut seen = vec![false; n];
        let mut total = 0usize;
        let mut groups = 0usize;
        let mut counts = vec![0u64; n + 1];
        for (i, s) in self.slots.iter().enumerate() {
            if !s.live {
                continue;
            }
            if s.members.is_empty() {
                return Err(Error::Invariant(format!("slot {i} is live but empty")));
            }
            for &a in &s.members {
                if std::mem::replace(&mut seen[a as usize], true) {
                    return Err(Error::Invariant(format!("agent {a} appears twice")));
                }
                if self.group_of_agent[a as usize] as usize != i {
                    return Err(Error::Invariant(format!("agent {a} points at the wrong slot")));
                }
            }
            total += s.members.len();
            groups += 1;
            counts[s.members.len()] += 1;
        }
        if total != n {
            return Err(Error::Invariant(format!("group sizes sum to {total}, expected {n}")));
        }
        if groups != self.n_groups || counts != self.size_counts {
            return Err(Error::Invariant("cached size histogram out of sync".into()));
        }
        Ok(())
    }

    /// Cheap order-independent fingerprint of the size histogram.
    pub fn checksum(&self) -> u64 {
        self.size_counts
            .iter()
            .enumerate()
            .fold(0u64, |acc, (s, &c)| acc.wrapping_add((s as u64).wrapping_mul(c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn group(p: &Partition, a: u32) -> GroupId {
        p.group_of(AgentId(a)).0
    }

    #[test]
    fn singletons() {
        let p = Partition::new_all_singletons(1).unwrap();
        assert_eq!(p.group_of(AgentId(0)).1, 1);
        let p = Partition::new_all_singletons(5).unwrap();
        assert_eq!(p.size_histogram(), BTreeMap::from([(1, 5)]));
        let p = Partition::new_all_singletons(100_000).unwrap();
        assert_eq!(p.size_histogram(), BTreeMap::from([(1, 100_000)]));
        p.check_invariants().unwrap();
        assert!(Partition::new_all_singletons(0).is_err());
    }

    #[test]
    fn merge_sizes_add() {
        let mut p = Partition::new_all_singletons(10).unwrap();
        let g = p.merge_groups(group(&p, 0), group(&p, 1)).unwrap();
        assert_eq!(p.size(g).unwrap(), 2);
        // build a 4 and a 7
        for a in 2..4 {
            p.merge_groups(group(&p, 0), group(&p, a)).unwrap();
        }
        let mut seven = group(&p, 4);
        for a in 5..10 {
            seven = p.merge_groups(seven, group(&p, a)).unwrap();
        }
        let seven = p.merge_groups(seven, group(&p, 9)).err();
        assert!(matches!(seven, Some(Error::SelfMerge)));
        assert_eq!(p.size(group(&p, 0)).unwrap(), 4);
        assert_eq!(p.size(group(&p, 4)).unwrap(), 6);
        p.check_invariants().unwrap();
    }

    #[test]
    fn merge_retires_both_handles() {
        let mut p = Partition::new_all_singletons(11).unwrap();
        for a in 1..4 {
            p.merge_groups(group(&p, 0), group(&p, a)).unwrap();
        }
        for a in 5..11 {
            p.merge_groups(group(&p, 4), group(&p, a)).unwrap();
        }
        let (g1, g2) = (group(&p, 0), group(&p, 4));
        assert_eq!((p.size(g1).unwrap(), p.size(g2).unwrap()), (4, 7));
        let merged = p.merge_groups(g1, g2).unwrap();
        assert!(!p.is_live(g1) && !p.is_live(g2));
        assert_ne!(merged, g1);
        assert_ne!(merged, g2);
        for a in 0..11 {
            assert_eq!(p.group_of(AgentId(a)), (merged, 11));
        }
        assert!(matches!(p.size(g1), Err(Error::StaleGroup)));
        assert_eq!(p.size_histogram(), BTreeMap::from([(11, 1)]));
    }

    #[test]
    fn stable_handle_without_moves() {
        let mut p = Partition::new_all_singletons(4).unwrap();
        let g = group(&p, 3);
        p.merge_groups(group(&p, 0), group(&p, 1)).unwrap();
        assert_eq!(group(&p, 3), g);
    }

    #[test]
    fn fragment_to_singletons() {
        let mut p = Partition::new_all_singletons(10).unwrap();
        assert_eq!(p.fragment_group(group(&p, 0)).unwrap(), 1);
        for a in 1..6 {
            p.merge_groups(group(&p, 0), group(&p, a)).unwrap();
        }
        assert_eq!(p.size_histogram(), BTreeMap::from([(1, 4), (6, 1)]));
        let g = group(&p, 0);
        assert_eq!(p.fragment_group(g).unwrap(), 6);
        assert!(!p.is_live(g));
        assert_eq!(p.size_histogram(), BTreeMap::from([(1, 10)]));
        p.check_invariants().unwrap();
    }

    #[test]
    fn histogram_of_mixed_partition() {
        // {3,3,2,1,1} in N = 10
        let mut p = Partition::new_all_singletons(10).unwrap();
        for (a, b) in [(0, 1), (0, 2), (3, 4), (3, 5), (6, 7)] {
            p.merge_groups(group(&p, a), group(&p, b)).unwrap();
        }
        assert_eq!(p.size_histogram(), BTreeMap::from([(1, 2), (2, 1), (3, 2)]));
        p.check_invariants().unwrap();
    }

    #[test]
    fn uniform_pick_small() {
        let p = Partition::new_all_singletons(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..100).all(|_| p.pick_random_agent(&mut rng) == AgentId(0)));

        let p = Partition::new_all_singletons(3).unwrap();
        let draws = 300_000;
        let mut counts = [0u32; 3];
        for _ in 0..draws {
            counts[p.pick_random_agent(&mut rng).index()] += 1;
        }
        let expect = draws as f64 / 3.0;
        let sigma = (draws as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in counts {
            assert!((c as f64 - expect).abs() < 3.0 * sigma, "{counts:?}");
        }

        let p = Partition::new_all_singletons(10_000).unwrap();
        assert!((0..1000).all(|_| p.pick_random_agent(&mut rng).index() < 10_000));
    }

    #[test]
    fn uniform_pick_chi_square() {
        // 10^6 draws over N = 100, chi-square with 99 dof.
        let p = Partition::new_all_singletons(100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 1_000_000u32;
        let mut counts = vec![0u32; 100];
        for _ in 0..draws {
            counts[p.pick_random_agent(&mut rng).index()] += 1;
        }
        let e = draws as f64 / 100.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // upper 0.001 critical value of chi-square(99)
        assert!(chi2 < 148.23, "chi2 = {chi2}");
    }
}
