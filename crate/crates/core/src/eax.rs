//! EAX-1AB edge-assembly crossover.
//!
//! The offspring starts as a copy of parent A. One AB-cycle (a closed walk
//! alternating between A-only and B-only edges) is applied: its A edges are
//! removed and its B edges inserted. Any resulting sub-tours are then joined
//! pairwise, smallest first, by the cheapest 2-edge exchange.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::instance::{Tour, TtpInstance};

const NONE: usize = usize::MAX;

/// Cities above which the merge search only looks near each removed edge.
pub const DEFAULT_NEIGHBOUR_THRESHOLD: usize = 500;
pub const DEFAULT_NEIGHBOURS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parent {
    A,
    B,
}

/// Alternating cycle; edge `k` joins `vertices[k]` and `vertices[k + 1]`
/// (wrapping) and comes from parent A when `k` is even, B when odd.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbCycle {
    vertices: Vec<usize>,
}

impl AbCycle {
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Number of edges (always even, at least 4).
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, Parent)> + '_ {
        let l = self.vertices.len();
        (0..l).map(move |k| {
            let (u, v) = (self.vertices[k], self.vertices[(k + 1) % l]);
            let origin = if k % 2 == 0 { Parent::A } else { Parent::B };
            (u, v, origin)
        })
    }
}

/// Up to two remaining incident edges of a vertex.
#[derive(Clone, Copy)]
struct Slots {
    v: [usize; 2],
    len: u8,
}

impl Slots {
    const EMPTY: Slots = Slots { v: [NONE; 2], len: 0 };

    fn push(&mut self, x: usize) {
        self.v[self.len as usize] = x;
        self.len += 1;
    }

    fn remove(&mut self, x: usize) {
        if self.v[0] == x {
            self.v[0] = self.v[1];
        } else {
            debug_assert_eq!(self.v[1], x);
        }
        self.v[1] = NONE;
        self.len -= 1;
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self.len {
            1 => self.v[0],
            _ => self.v[rng.random_range(0..2)],
        }
    }
}

pub(crate) fn adjacency(tour: &Tour) -> Vec<[usize; 2]> {
    let c = tour.cities();
    let n = c.len();
    let mut adj = vec![[NONE; 2]; n];
    for i in 0..n {
        adj[c[i]] = [c[(i + n - 1) % n], c[(i + 1) % n]];
    }
    adj
}

/// Decomposes the symmetric difference of the parents' edge sets into
/// AB-cycles. Identical parents give no cycles.
pub fn build_ab_cycles<R: Rng + ?Sized>(parent_a: &Tour, parent_b: &Tour, rng: &mut R) -> Vec<AbCycle> {
    let n = parent_a.len();
    assert_eq!(n, parent_b.len(), "parents differ in size");
    let adj_a = adjacency(parent_a);
    let adj_b = adjacency(parent_b);
    let mut rem = [vec![Slots::EMPTY; n], vec![Slots::EMPTY; n]];
    for v in 0..n {
        for &w in &adj_a[v] {
            if !adj_b[v].contains(&w) {
                rem[0][v].push(w);
            }
        }
        for &w in &adj_b[v] {
            if !adj_a[v].contains(&w) {
                rem[1][v].push(w);
            }
        }
    }

    let mut starts: Vec<usize> = (0..n).filter(|&v| rem[0][v].len > 0).collect();
    starts.shuffle(rng);

    let mut cycles = Vec::new();
    let mut path: Vec<usize> = Vec::new();
    // last path position of each vertex, per position parity
    let mut pos = [vec![NONE; n], vec![NONE; n]];
    for v0 in starts {
        if rem[0][v0].len == 0 {
            continue;
        }
        path.clear();
        path.push(v0);
        pos[0][v0] = 0;
        loop {
            let e = path.len() - 1;
            let cur = path[e];
            let side = e % 2;
            if rem[side][cur].len == 0 {
                debug_assert_eq!(path.len(), 1);
                break;
            }
            let next = rem[side][cur].pick(rng);
            rem[side][cur].remove(next);
            rem[side][next].remove(cur);
            path.push(next);
            let at = e + 1;
            let parity = at % 2;
            let j = pos[parity][next];
            if j < at && path[j] == next {
                let mut cyc = path[j..at].to_vec();
                if j % 2 == 1 {
                    // make the first edge an A edge
                    cyc.rotate_left(1);
                }
                cycles.push(AbCycle { vertices: cyc });
                path.truncate(j + 1);
            } else {
                pos[parity][next] = at;
            }
            if path.len() == 1 && rem[0][v0].len == 0 {
                break;
            }
        }
    }
    cycles
}

/// A 2-regular graph on all cities, possibly split into several sub-tours.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntermediateTour {
    adj: Vec<[usize; 2]>,
    subtours: Vec<Vec<usize>>,
}

impl IntermediateTour {
    /// Builds from explicit neighbour pairs; `None` unless every city has two
    /// distinct neighbours and the relation is symmetric.
    pub fn from_adjacency(adj: Vec<[usize; 2]>) -> Option<Self> {
        let n = adj.len();
        for (v, &[a, b]) in adj.iter().enumerate() {
            if a >= n || b >= n || a == b || a == v || b == v {
                return None;
            }
            if !adj[a].contains(&v) || !adj[b].contains(&v) {
                return None;
            }
        }
        let subtours = trace_subtours(&adj);
        Some(IntermediateTour { adj, subtours })
    }

    pub fn adjacency(&self) -> &[[usize; 2]] {
        &self.adj
    }

    /// Each sub-tour as a cyclic city sequence.
    pub fn subtours(&self) -> &[Vec<usize>] {
        &self.subtours
    }

    pub fn subtour_count(&self) -> usize {
        self.subtours.len()
    }

    pub fn edge_set(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self
            .adj
            .iter()
            .enumerate()
            .flat_map(|(v, ns)| ns.iter().filter(move |&&w| v < w).map(move |&w| (v, w)))
            .collect();
        e.sort_unstable();
        e
    }
}

fn trace_from(adj: &[[usize; 2]], start: usize) -> Vec<usize> {
    let mut seq = vec![start];
    let mut prev = start;
    let mut cur = adj[start][0];
    while cur != start {
        seq.push(cur);
        let next = if adj[cur][0] != prev { adj[cur][0] } else { adj[cur][1] };
        prev = cur;
        cur = next;
    }
    seq
}

fn trace_subtours(adj: &[[usize; 2]]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; adj.len()];
    let mut out = Vec::new();
    for s in 0..adj.len() {
        if !seen[s] {
            let seq = trace_from(adj, s);
            for &c in &seq {
                seen[c] = true;
            }
            out.push(seq);
        }
    }
    out
}

fn replace(slot: &mut [usize; 2], old: usize, new: usize) {
    if slot[0] == old {
        slot[0] = new;
    } else {
        debug_assert_eq!(slot[1], old);
        slot[1] = new;
    }
}

/// Removes the cycle's A edges from parent A and inserts its B edges.
pub fn apply_ab_cycle(parent_a: &Tour, cycle: &AbCycle) -> IntermediateTour {
    let mut adj = adjacency(parent_a);
    for (u, v, origin) in cycle.edges() {
        if origin == Parent::A {
            replace(&mut adj[u], v, NONE);
            replace(&mut adj[v], u, NONE);
        }
    }
    for (u, v, origin) in cycle.edges() {
        if origin == Parent::B {
            replace(&mut adj[u], NONE, v);
            replace(&mut adj[v], NONE, u);
        }
    }
    let subtours = trace_subtours(&adj);
    IntermediateTour { adj, subtours }
}

/// EAX-1AB with precomputed neighbour lists for large instances.
#[derive(Debug, Clone)]
pub struct EaxCrossover {
    neighbours: Option<Vec<Vec<usize>>>,
}

impl EaxCrossover {
    pub fn new(inst: &TtpInstance) -> Self {
        Self::with_threshold(inst, DEFAULT_NEIGHBOUR_THRESHOLD, DEFAULT_NEIGHBOURS)
    }

    /// Restrict merge candidates to `k` nearest neighbours once `n > threshold`.
    pub fn with_threshold(inst: &TtpInstance, threshold: usize, k: usize) -> Self {
        let n = inst.num_cities();
        let neighbours = (n > threshold).then(|| nearest_neighbours(inst, k));
        EaxCrossover { neighbours }
    }

    pub fn crossover<R: Rng + ?Sized>(
        &self,
        inst: &TtpInstance,
        parent_a: &Tour,
        parent_b: &Tour,
        rng: &mut R,
    ) -> Tour {
        let cycles = build_ab_cycles(parent_a, parent_b, rng);
        if cycles.is_empty() {
            return parent_a.clone();
        }
        let cycle = &cycles[rng.random_range(0..cycles.len())];
        let intermediate = apply_ab_cycle(parent_a, cycle);
        self.merge(inst, &intermediate)
    }

    pub fn merge(&self, inst: &TtpInstance, intermediate: &IntermediateTour) -> Tour {
        let n = intermediate.adj.len();
        let mut adj = intermediate.adj.clone();
        let mut subs = intermediate.subtours.clone();
        let mut comp = vec![0usize; n];
        for (k, s) in subs.iter().enumerate() {
            for &c in s {
                comp[c] = k;
            }
        }
        let d = |u: usize, v: usize| inst.distance(u, v);

        while subs.len() > 1 {
            let r = (0..subs.len()).min_by_key(|&k| subs[k].len()).unwrap();
            let mut best = (f64::INFINITY, NONE, NONE, NONE, NONE);
            let mut consider = |a: usize, a2: usize, b: usize, b2: usize| {
                let base = -d(a, a2) - d(b, b2);
                let straight = base + d(a, b) + d(a2, b2);
                if straight < best.0 {
                    best = (straight, a, a2, b, b2);
                }
                let crossed = base + d(a, b2) + d(a2, b);
                if crossed < best.0 {
                    best = (crossed, a, a2, b2, b);
                }
            };
            let ring = &subs[r];
            let mut found = false;
            if let Some(nb) = &self.neighbours {
                for i in 0..ring.len() {
                    let (a, a2) = (ring[i], ring[(i + 1) % ring.len()]);
                    for c in [a, a2] {
                        for &w in &nb[c] {
                            if comp[w] == comp[a] {
                                continue;
                            }
                            for w2 in adj[w] {
                                consider(a, a2, w, w2);
                                found = true;
                            }
                        }
                    }
                }
            }
            if !found {
                for i in 0..ring.len() {
                    let (a, a2) = (ring[i], ring[(i + 1) % ring.len()]);
                    for (k, other) in subs.iter().enumerate() {
                        if k == r {
                            continue;
                        }
                        for q in 0..other.len() {
                            consider(a, a2, other[q], other[(q + 1) % other.len()]);
                        }
                    }
                }
            }
            // remove (a,a2),(b,b2); add (a,b),(a2,b2)
            let (_, a, a2, b, b2) = best;
            let t = comp[b];
            replace(&mut adj[a], a2, b);
            replace(&mut adj[a2], a, b2);
            replace(&mut adj[b], b2, a);
            replace(&mut adj[b2], b, a2);

            let merged = trace_from(&adj, a);
            let (lo, hi) = (r.min(t), r.max(t));
            subs.swap_remove(hi);
            subs.swap_remove(lo);
            subs.push(merged);
            // swap_remove moved tail entries; relabel everything touched
            for (k, s) in subs.iter().enumerate() {
                for &c in s {
                    comp[c] = k;
                }
            }
        }

        let seq = trace_from(&adj, 0);
        Tour::from_vec_unchecked(seq)
    }
}

fn nearest_neighbours(inst: &TtpInstance, k: usize) -> Vec<Vec<usize>> {
    let n = inst.num_cities();
    (0..n)
        .map(|u| {
            let mut others: Vec<usize> = (0..n).filter(|&v| v != u).collect();
            let k = k.min(others.len());
            others.select_nth_unstable_by(k.saturating_sub(1), |&a, &b| {
                inst.distance(u, a).total_cmp(&inst.distance(u, b)).then(a.cmp(&b))
            });
            others.truncate(k);
            others.sort_by(|&a, &b| inst.distance(u, a).total_cmp(&inst.distance(u, b)).then(a.cmp(&b)));
            others
        })
        .collect()
}

/// Joins all sub-tours into one Hamiltonian tour (default merge settings).
pub fn merge_subtours(inst: &TtpInstance, intermediate: &IntermediateTour) -> Tour {
    EaxCrossover::new(inst).merge(inst, intermediate)
}

/// One EAX-1AB offspring of `parent_a` and `parent_b`.
///
/// Builds neighbour lists on every call for instances above the neighbour
/// threshold; hold an [`EaxCrossover`] instead when calling repeatedly.
pub fn eax_1ab<R: Rng + ?Sized>(inst: &TtpInstance, parent_a: &Tour, parent_b: &Tour, rng: &mut R) -> Tour {
    EaxCrossover::new(inst).crossover(inst, parent_a, parent_b, rng)
}

/// True when `tour` is one Hamiltonian cycle starting at city 0.
pub fn is_valid_tour(tour: &Tour, n: usize) -> bool {
    Tour::new(tour.cities().to_vec()).is_ok() && tour.len() == n
}
