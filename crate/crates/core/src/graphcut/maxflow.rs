//! Augmenting-path max-flow with search-tree reuse (two trees grown from the
//! terminals, kept alive across augmentations and repaired by adoption).

use std::collections::VecDeque;

const NONE: usize = usize::MAX;
const TERMINAL: usize = usize::MAX - 1;
const ORPHAN: usize = usize::MAX - 2;
const INFINITE_DIST: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct MaxFlow {
    // per node
    first: Vec<usize>,
    parent: Vec<usize>,
    tr_cap: Vec<f64>,
    is_sink: Vec<bool>,
    dist: Vec<u64>,
    ts: Vec<u64>,
    queued: Vec<bool>,
    // per arc; arcs come in pairs, `a ^ 1` is the reverse of `a`
    head: Vec<usize>,
    next: Vec<usize>,
    r_cap: Vec<f64>,

    active: VecDeque<usize>,
    orphans: VecDeque<usize>,
    time: u64,
    flow: f64,
    augmentations: usize,
}

impl MaxFlow {
    pub fn new(nodes: usize, edge_hint: usize) -> Self {
        Self {
            first: vec![NONE; nodes],
            parent: vec![NONE; nodes],
            tr_cap: vec![0.0; nodes],
            is_sink: vec![false; nodes],
            dist: vec![0; nodes],
            ts: vec![0; nodes],
            queued: vec![false; nodes],
            head: Vec::with_capacity(2 * edge_hint),
            next: Vec::with_capacity(2 * edge_hint),
            r_cap: Vec::with_capacity(2 * edge_hint),
            active: VecDeque::new(),
            orphans: VecDeque::new(),
            time: 0,
            flow: 0.0,
            augmentations: 0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.first.len()
    }

    /// Adds capacity from the source to `i` and from `i` to the sink. The
    /// common part is routed immediately.
    pub fn add_terminal(&mut self, i: usize, source_cap: f64, sink_cap: f64) {
        let (mut cs, mut ct) = (source_cap, sink_cap);
        let delta = self.tr_cap[i];
        if delta > 0.0 {
            cs += delta;
        } else {
            ct -= delta;
        }
        self.flow += cs.min(ct);
        self.tr_cap[i] = cs - ct;
    }

    pub fn add_edge(&mut self, i: usize, j: usize, cap: f64, rev_cap: f64) {
        debug_assert!(i != j);
        let a = self.head.len();
        self.head.push(j);
        self.next.push(self.first[i]);
        self.r_cap.push(cap);
        self.first[i] = a;
        self.head.push(i);
        self.next.push(self.first[j]);
        self.r_cap.push(rev_cap);
        self.first[j] = a + 1;
    }

    pub fn augmentations(&self) -> usize {
        self.augmentations
    }

    fn arcs(&self, i: usize) -> ArcIter<'_> {
        ArcIter { next: &self.next, cur: self.first[i] }
    }

    fn set_active(&mut self, i: usize) {
        if !self.queued[i] {
            self.queued[i] = true;
            self.active.push_back(i);
        }
    }

    fn next_active(&mut self) -> Option<usize> {
        while let Some(i) = self.active.pop_front() {
            self.queued[i] = false;
            if self.parent[i] != NONE {
                return Some(i);
            }
        }
        None
    }

    fn set_orphan_front(&mut self, i: usize) {
        self.parent[i] = ORPHAN;
        self.orphans.push_front(i);
    }

    fn set_orphan_rear(&mut self, i: usize) {
        self.parent[i] = ORPHAN;
        self.orphans.push_back(i);
    }

    /// Runs to completion and returns the total flow, which equals the
    /// minimum cut value including the constants folded in by `add_terminal`.
    pub fn solve(&mut self) -> f64 {
        for i in 0..self.node_count() {
            if self.tr_cap[i] > 0.0 {
                self.is_sink[i] = false;
                self.parent[i] = TERMINAL;
                self.set_active(i);
                self.dist[i] = 1;
            } else if self.tr_cap[i] < 0.0 {
                self.is_sink[i] = true;
                self.parent[i] = TERMINAL;
                self.set_active(i);
                self.dist[i] = 1;
            } else {
                self.parent[i] = NONE;
            }
        }

        let mut current: Option<usize> = None;
        loop {
            let mut node = None;
            if let Some(i) = current.take() {
                self.queued[i] = false;
                if self.parent[i] != NONE {
                    node = Some(i);
                }
            }
            let i = match node.or_else(|| self.next_active()) {
                Some(i) => i,
                None => break,
            };

            let mut bridge = NONE;
            let mut cursor = self.first[i];
            while cursor != NONE {
                let a = cursor;
                cursor = self.next[a];
                let j = self.head[a];
                if !self.is_sink[i] {
                    if self.r_cap[a] <= 0.0 {
                        continue;
                    }
                    if self.parent[j] == NONE {
                        self.adopt_grown(j, i, a ^ 1, false);
                    } else if self.is_sink[j] {
                        bridge = a;
                        break;
                    } else if self.ts[j] <= self.ts[i] && self.dist[j] > self.dist[i] {
                        self.reparent(j, i, a ^ 1);
                    }
                } else {
                    if self.r_cap[a ^ 1] <= 0.0 {
                        continue;
                    }
                    if self.parent[j] == NONE {
                        self.adopt_grown(j, i, a ^ 1, true);
                    } else if !self.is_sink[j] {
                        bridge = a ^ 1;
                        break;
                    } else if self.ts[j] <= self.ts[i] && self.dist[j] > self.dist[i] {
                        self.reparent(j, i, a ^ 1);
                    }
                }
            }

            self.time += 1;
            if bridge != NONE {
                // keep growing from `i` next round; the flag stops it being queued twice
                self.queued[i] = true;
                current = Some(i);
                self.augment(bridge);
                while let Some(o) = self.orphans.pop_front() {
                    if self.is_sink[o] {
                        self.process_orphan(o, true);
                    } else {
                        self.process_orphan(o, false);
                    }
                }
            }
        }
        self.flow
    }

    fn adopt_grown(&mut self, j: usize, from: usize, arc: usize, sink: bool) {
        self.is_sink[j] = sink;
        self.parent[j] = arc;
        self.ts[j] = self.ts[from];
        self.dist[j] = self.dist[from] + 1;
        self.set_active(j);
    }

    fn reparent(&mut self, j: usize, from: usize, arc: usize) {
        self.parent[j] = arc;
        self.ts[j] = self.ts[from];
        self.dist[j] = self.dist[from] + 1;
    }

    /// `middle` goes from a source-tree node to a sink-tree node.
    fn augment(&mut self, middle: usize) {
        let mut bottleneck = self.r_cap[middle];
        let mut i = self.head[middle ^ 1];
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.r_cap[a ^ 1]);
            i = self.head[a];
        }
        bottleneck = bottleneck.min(self.tr_cap[i]);
        let mut i = self.head[middle];
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.r_cap[a]);
            i = self.head[a];
        }
        bottleneck = bottleneck.min(-self.tr_cap[i]);

        self.r_cap[middle ^ 1] += bottleneck;
        self.r_cap[middle] -= bottleneck;

        let mut i = self.head[middle ^ 1];
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            self.r_cap[a] += bottleneck;
            self.r_cap[a ^ 1] -= bottleneck;
            let up = self.head[a];
            if self.r_cap[a ^ 1] <= 0.0 {
                self.set_orphan_front(i);
            }
            i = up;
        }
        self.tr_cap[i] -= bottleneck;
        if self.tr_cap[i] <= 0.0 {
            self.set_orphan_front(i);
        }

        let mut i = self.head[middle];
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            self.r_cap[a ^ 1] += bottleneck;
            self.r_cap[a] -= bottleneck;
            let up = self.head[a];
            if self.r_cap[a] <= 0.0 {
                self.set_orphan_front(i);
            }
            i = up;
        }
        self.tr_cap[i] += bottleneck;
        if self.tr_cap[i] >= 0.0 {
            self.set_orphan_front(i);
        }

        self.flow += bottleneck;
        self.augmentations += 1;
    }

    /// Residual capacity along `a0` in the direction flow would travel
    /// towards the orphan's terminal.
    fn feeds(&self, a0: usize, sink: bool) -> bool {
        if sink {
            self.r_cap[a0] > 0.0
        } else {
            self.r_cap[a0 ^ 1] > 0.0
        }
    }

    fn process_orphan(&mut self, i: usize, sink: bool) {
        let mut best_arc = NONE;
        let mut best_dist = INFINITE_DIST;

        let mut cursor = self.first[i];
        while cursor != NONE {
            let a0 = cursor;
            cursor = self.next[a0];
            if !self.feeds(a0, sink) {
                continue;
            }
            let mut j = self.head[a0];
            if self.is_sink[j] != sink || self.parent[j] == NONE {
                continue;
            }
            // walk to the root to make sure j is still attached to a terminal
            let mut d: u64 = 0;
            loop {
                if self.ts[j] == self.time {
                    d = d.saturating_add(self.dist[j]);
                    break;
                }
                let a = self.parent[j];
                d += 1;
                if a == TERMINAL {
                    self.ts[j] = self.time;
                    self.dist[j] = 1;
                    break;
                }
                if a == ORPHAN {
                    d = INFINITE_DIST;
                    break;
                }
                j = self.head[a];
            }
            if d < INFINITE_DIST {
                if d < best_dist {
                    best_arc = a0;
                    best_dist = d;
                }
                let mut j = self.head[a0];
                while self.ts[j] != self.time {
                    self.ts[j] = self.time;
                    self.dist[j] = d;
                    d = d.saturating_sub(1);
                    j = self.head[self.parent[j]];
                }
            }
        }

        if best_arc != NONE {
            self.parent[i] = best_arc;
            self.ts[i] = self.time;
            self.dist[i] = best_dist + 1;
            return;
        }

        self.parent[i] = NONE;
        let mut cursor = self.first[i];
        while cursor != NONE {
            let a0 = cursor;
            cursor = self.next[a0];
            let j = self.head[a0];
            let a = self.parent[j];
            if self.is_sink[j] != sink || a == NONE {
                continue;
            }
            if self.feeds(a0, sink) {
                self.set_active(j);
            }
            if a != TERMINAL && a != ORPHAN && self.head[a] == i {
                self.set_orphan_rear(j);
            }
        }
    }

    /// Nodes reachable from the source in the residual graph after `solve`.
    /// This is the minimum cut with the smallest source side.
    pub fn source_side(&self) -> Vec<bool> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&i| self.tr_cap[i] > 0.0).collect();
        for &i in &stack {
            seen[i] = true;
        }
        while let Some(i) = stack.pop() {
            for a in self.arcs(i) {
                let j = self.head[a];
                if !seen[j] && self.r_cap[a] > 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    }
}

struct ArcIter<'a> {
    next: &'a [usize],
    cur: usize,
}

impl Iterator for ArcIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.cur == NONE {
            return None;
        }
        let a = self.cur;
        self.cur = self.next[a];
        Some(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cut value of a source-side set on the original capacities.
    fn cut_value(n: usize, terminals: &[(f64, f64)], edges: &[(usize, usize, f64, f64)], side: &[bool]) -> f64 {
        let mut v = 0.0;
        for i in 0..n {
            v += if side[i] { terminals[i].1 } else { terminals[i].0 };
        }
        for &(i, j, c, r) in edges {
            if side[i] && !side[j] {
                v += c;
            }
            if side[j] && !side[i] {
                v += r;
            }
        }
        v
    }

    #[test]
    fn textbook_network() {
        // s->0 (3), s->1 (2), 0->1 (1), 0->t (2), 1->t (3): max flow 5
        let mut g = MaxFlow::new(2, 1);
        g.add_terminal(0, 3.0, 2.0);
        g.add_terminal(1, 2.0, 3.0);
        g.add_edge(0, 1, 1.0, 0.0);
        assert_eq!(g.solve(), 5.0);
    }

    #[test]
    fn random_graphs_match_brute_force_cut() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let n = rng.random_range(1..9);
            let terminals: Vec<(f64, f64)> =
                (0..n).map(|_| (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0))).collect();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(0.5) {
                        edges.push((i, j, rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)));
                    }
                }
            }
            let mut g = MaxFlow::new(n, edges.len());
            for (i, &(s, t)) in terminals.iter().enumerate() {
                g.add_terminal(i, s, t);
            }
            for &(i, j, c, r) in &edges {
                g.add_edge(i, j, c, r);
            }
            let flow = g.solve();
            let best = (0..1u32 << n)
                .map(|m| {
                    let side: Vec<bool> = (0..n).map(|i| m >> i & 1 == 1).collect();
                    cut_value(n, &terminals, &edges, &side)
                })
                .fold(f64::INFINITY, f64::min);
            let side = g.source_side();
            assert!((flow - best).abs() <= 1e-9 * best.max(1.0), "{flow} vs {best}");
            assert!((cut_value(n, &terminals, &edges, &side) - best).abs() <= 1e-9 * best.max(1.0));
        }
    }
}
