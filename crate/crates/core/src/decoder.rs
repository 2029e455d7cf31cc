//! Iterative interference cancellation (peeling) over a frame graph.
//!
//! A slot with exactly one connected user is a singleton: that user is decoded,
//! and its copies are subtracted from every slot it occupies. Decoding stops
//! when no singleton remains. The final resolved set does not depend on the
//! order singletons are processed in, so [`peel`] uses parallel rounds and
//! [`peel_random_order`] exists to check that claim.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::frame::FrameGraph;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    /// `resolved[u]` for every user of the decoded graph.
    pub resolved: Vec<bool>,
    /// Unresolved users with all their edges.
    pub residual: FrameGraph,
    /// Indices (in the decoded graph) of the residual's users, in order.
    pub residual_users: Vec<usize>,
    /// Number of peeling rounds; a round resolves every singleton present at its start.
    pub iterations: usize,
}

impl DecodeOutcome {
    pub fn resolved_count(&self) -> usize {
        self.resolved.iter().filter(|&&r| r).count()
    }

    pub fn unresolved_count(&self) -> usize {
        self.resolved.len() - self.resolved_count()
    }
}

/// Which degree groups unresolved users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegreeKeying {
    /// Received (post-erasure) degree.
    #[default]
    Induced,
    /// Degree chosen by the user before erasures.
    Original,
}

impl DegreeKeying {
    pub fn as_str(&self) -> &'static str {
        match self {
            DegreeKeying::Induced => "induced",
            DegreeKeying::Original => "original",
        }
    }

    pub fn degree_of(&self, graph: &FrameGraph, user: usize) -> usize {
        match self {
            DegreeKeying::Induced => graph.induced_degree(user),
            DegreeKeying::Original => graph.original_degree(user),
        }
    }
}

/// Occupancy counters plus an XOR of user ids per slot; when a slot holds one
/// user the XOR is that user's id.
struct SlotState {
    count: Vec<u32>,
    xor: Vec<u32>,
}

impl SlotState {
    fn new(graph: &FrameGraph) -> Self {
        let n = graph.slot_count();
        let mut count = vec![0u32; n];
        let mut xor = vec![0u32; n];
        for u in 0..graph.user_count() {
            for &s in graph.user_slots(u) {
                count[s as usize] += 1;
                xor[s as usize] ^= u as u32;
            }
        }
        Self { count, xor }
    }

    /// Removes `user`'s edges and reports slots that became singletons.
    fn cancel(&mut self, graph: &FrameGraph, user: usize, mut on_singleton: impl FnMut(u32)) {
        for &s in graph.user_slots(user) {
            let i = s as usize;
            self.count[i] -= 1;
            self.xor[i] ^= user as u32;
            if self.count[i] == 1 {
                on_singleton(s);
            }
        }
    }
}

fn finish(graph: &FrameGraph, resolved: Vec<bool>, iterations: usize) -> DecodeOutcome {
    let residual_users: Vec<usize> = (0..resolved.len()).filter(|&u| !resolved[u]).collect();
    DecodeOutcome { residual: graph.subgraph(&residual_users), residual_users, resolved, iterations }
}

/// Decodes a frame by successive interference cancellation.
pub fn peel(graph: &FrameGraph) -> DecodeOutcome {
    let mut state = SlotState::new(graph);
    let mut resolved = vec![false; graph.user_count()];
    let mut frontier: Vec<u32> = (0..graph.slot_count() as u32).filter(|&s| state.count[s as usize] == 1).collect();
    let mut next = Vec::new();
    let mut rounds = 0;
    while !frontier.is_empty() {
        rounds += 1;
        next.clear();
        for &s in &frontier {
            // stale entries: the slot was emptied earlier in this round
            if state.count[s as usize] != 1 {
                continue;
            }
            let user = state.xor[s as usize] as usize;
            resolved[user] = true;
            state.cancel(graph, user, |t| next.push(t));
        }
        std::mem::swap(&mut frontier, &mut next);
    }
    finish(graph, resolved, rounds)
}

/// Peels one singleton at a time, choosing uniformly among pending singletons.
/// `iterations` counts resolved users.
pub fn peel_random_order<R: Rng + ?Sized>(graph: &FrameGraph, rng: &mut R) -> DecodeOutcome {
    let mut state = SlotState::new(graph);
    let mut resolved = vec![false; graph.user_count()];
    let mut pending: Vec<u32> = (0..graph.slot_count() as u32).filter(|&s| state.count[s as usize] == 1).collect();
    let mut steps = 0;
    while !pending.is_empty() {
        let s = pending.swap_remove(rng.random_range(0..pending.len()));
        if state.count[s as usize] != 1 {
            continue;
        }
        let user = state.xor[s as usize] as usize;
        resolved[user] = true;
        steps += 1;
        state.cancel(graph, user, |t| pending.push(t));
    }
    finish(graph, resolved, steps)
}

/// Unresolved users per degree under `keying`; the vector covers degrees `0..=max`.
pub fn unresolved_counts(graph: &FrameGraph, outcome: &DecodeOutcome, keying: DegreeKeying) -> Vec<usize> {
    let mut counts: Vec<usize> = Vec::new();
    for &u in &outcome.residual_users {
        let d = keying.degree_of(graph, u);
        if counts.len() <= d {
            counts.resize(d + 1, 0);
        }
        counts[d] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::frame_stream;

    fn graph(n: usize, users: &[&[usize]]) -> FrameGraph {
        FrameGraph::from_slot_sets(n, users).unwrap()
    }

    #[test]
    fn singleton_user_resolves() {
        let out = peel(&graph(3, &[&[0]]));
        assert_eq!(out.resolved, vec![true]);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.residual.user_count(), 0);
    }

    #[test]
    fn double_pair_is_stuck() {
        let g = graph(4, &[&[1, 2], &[1, 2]]);
        let out = peel(&g);
        assert_eq!(out.resolved, vec![false, false]);
        assert_eq!(out.residual, g);
        assert_eq!(out.iterations, 0);
        assert_eq!(unresolved_counts(&g, &out, DegreeKeying::Induced), vec![0, 0, 2]);
    }

    #[test]
    fn chain_peels_completely() {
        let g = graph(4, &[&[1, 2], &[2, 3]]);
        let out = peel(&g);
        assert_eq!(out.resolved, vec![true, true]);
        assert!(unresolved_counts(&g, &out, DegreeKeying::Induced).iter().all(|&c| c == 0));
    }

    #[test]
    fn cascade_counts_rounds() {
        // slot 0 singleton -> user 0; then slot 1 singleton -> user 1; then slot 2 -> user 2
        let g = graph(4, &[&[0, 1], &[1, 2], &[2, 3, 1]]);
        let out = peel(&g);
        assert!(out.resolved.iter().all(|&r| r));
        assert!(out.iterations >= 2);
    }

    #[test]
    fn degree_zero_never_resolved() {
        let g = FrameGraph::from_users(5, &[(3, vec![]), (1, vec![2])]).unwrap();
        let out = peel(&g);
        assert_eq!(out.resolved, vec![false, true]);
        assert_eq!(unresolved_counts(&g, &out, DegreeKeying::Induced), vec![1]);
        assert_eq!(unresolved_counts(&g, &out, DegreeKeying::Original), vec![0, 0, 0, 1]);
    }

    #[test]
    fn residual_has_no_singletons_on_random_frames() {
        use crate::distributions::{ChannelModel, DegreeDistribution};
        use crate::frame::{FrameConfig, FrameSampler};
        let dist: DegreeDistribution = "1:0.1,2:0.5,3:0.4".parse().unwrap();
        let cfg = FrameConfig::new(60, 50, dist, ChannelModel::new(0.05).unwrap());
        let sampler = FrameSampler::new(&cfg).unwrap();
        for f in 0..500 {
            let g = sampler.sample(&mut frame_stream(11, 0, f));
            let out = peel(&g);
            assert!(out.residual.slot_occupancy().iter().all(|&c| c != 1));
            let mut rng = frame_stream(12, 0, f);
            assert_eq!(peel_random_order(&g, &mut rng).resolved, out.resolved);
        }
    }
}
