//! Entropy-maximising population with a quality threshold.
//!
//! Edge and item frequencies are kept incrementally together with a
//! histogram of the frequency values. Entropy is evaluated from the
//! histogram as `Σ_c (h_c c / T) ln(T / c)`, so its summation order does not
//! depend on member order, and removing one member only shifts the
//! histogram entries of the keys it touches.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Solution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entropy {
    pub edge: f64,
    pub item: f64,
    pub total: f64,
}

impl Entropy {
    const ZERO: Entropy = Entropy {
        edge: 0.0,
        item: 0.0,
        total: 0.0,
    };

    fn new(edge: f64, item: f64) -> Self {
        Entropy {
            edge,
            item,
            total: edge + item,
        }
    }
}

/// Shannon entropy of a frequency table given `hist[c]` = keys with count c.
fn histogram_entropy(hist: &[u64], total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    hist.iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &h)| h > 0)
        .map(|(c, &h)| (h as f64 * c as f64 / t) * (t / c as f64).ln())
        .sum()
}

fn shift(hist: &mut Vec<u64>, from: u32, to: u32) {
    let (from, to) = (from as usize, to as usize);
    if hist.len() <= from.max(to) {
        hist.resize(from.max(to) + 1, 0);
    }
    if from > 0 {
        hist[from] -= 1;
    }
    if to > 0 {
        hist[to] += 1;
    }
}

/// Edge and item occurrence counts over a set of solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTables {
    /// `edges[u]` lists `(v, count)` for undirected edges `(u, v)` with `u < v`.
    edges: Vec<Vec<(u32, u32)>>,
    items: Vec<u32>,
    edge_total: u64,
    item_total: u64,
    /// `edge_hist[c]` = number of edges with count c (index 0 unused).
    edge_hist: Vec<u64>,
    item_hist: Vec<u64>,
}

impl FrequencyTables {
    pub fn new(n: usize, m: usize) -> Self {
        FrequencyTables {
            edges: vec![Vec::new(); n],
            items: vec![0; m],
            edge_total: 0,
            item_total: 0,
            edge_hist: vec![0; 2],
            item_hist: vec![0; 2],
        }
    }

    pub fn edge_total(&self) -> u64 {
        self.edge_total
    }

    pub fn item_total(&self) -> u64 {
        self.item_total
    }

    pub fn edge_count(&self, u: usize, v: usize) -> u32 {
        let (a, b) = (u.min(v), u.max(v));
        self.edges[a].iter().find(|e| e.0 as usize == b).map_or(0, |e| e.1)
    }

    pub fn item_count(&self, j: usize) -> u32 {
        self.items[j]
    }

    /// Present edges as `(u, v, count)` with `u < v`, sorted.
    pub fn edge_counts(&self) -> Vec<(usize, usize, u32)> {
        let mut out: Vec<_> = self
            .edges
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().map(move |&(v, c)| (u, v as usize, c)))
            .collect();
        out.sort_unstable();
        out
    }

    fn bump_edge(&mut self, u: usize, v: usize, up: bool) {
        let (a, b) = (u.min(v), u.max(v) as u32);
        let list = &mut self.edges[a];
        let (old, new) = match list.iter().position(|e| e.0 == b) {
            Some(p) if up => {
                list[p].1 += 1;
                (list[p].1 - 1, list[p].1)
            }
            Some(p) => {
                list[p].1 -= 1;
                let c = list[p].1;
                if c == 0 {
                    list.swap_remove(p);
                }
                (c + 1, c)
            }
            None => {
                assert!(up, "removing absent edge ({u}, {v})");
                list.push((b, 1));
                (0, 1)
            }
        };
        shift(&mut self.edge_hist, old, new);
    }

    fn bump_item(&mut self, j: usize, up: bool) {
        let old = self.items[j];
        assert!(up || old > 0, "removing absent item {j}");
        let new = if up { old + 1 } else { old - 1 };
        self.items[j] = new;
        shift(&mut self.item_hist, old, new);
        if up {
            self.item_total += 1;
        } else {
            self.item_total -= 1;
        }
    }

    pub fn add(&mut self, s: &Solution) {
        for (u, v) in s.tour().edges() {
            self.bump_edge(u, v, true);
        }
        self.edge_total += s.tour().len() as u64;
        for j in s.packing().selected() {
            self.bump_item(j, true);
        }
    }

    pub fn remove(&mut self, s: &Solution) {
        for (u, v) in s.tour().edges() {
            self.bump_edge(u, v, false);
        }
        self.edge_total -= s.tour().len() as u64;
        for j in s.packing().selected() {
            self.bump_item(j, false);
        }
    }

    pub fn entropy(&self) -> Entropy {
        Entropy::new(
            histogram_entropy(&self.edge_hist, self.edge_total),
            histogram_entropy(&self.item_hist, self.item_total),
        )
    }

    /// Entropy after removing `member`; `scratch` is reused between calls.
    fn entropy_without(&self, member: &Member, scratch: &mut Vec<u64>) -> Entropy {
        scratch.clone_from(&self.edge_hist);
        for &(u, v) in &member.edges {
            let c = self.edge_count(u, v);
            shift(scratch, c, c - 1);
        }
        let edge = histogram_entropy(scratch, self.edge_total - member.edges.len() as u64);
        scratch.clone_from(&self.item_hist);
        for &j in &member.items {
            let c = self.items[j];
            shift(scratch, c, c - 1);
        }
        let item = histogram_entropy(scratch, self.item_total - member.items.len() as u64);
        Entropy::new(edge, item)
    }
}

#[derive(Debug, Clone)]
struct Member {
    solution: Solution,
    /// Undirected edges, cached for contribution queries.
    edges: Vec<(usize, usize)>,
    items: Vec<usize>,
}

impl Member {
    fn new(solution: Solution) -> Self {
        let edges = solution.tour().edge_set();
        let items = solution.packing().selected().collect();
        Member { solution, edges, items }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OfferOutcome {
    AddedBelowCapacity,
    ReplacedWorst,
    RejectedQuality,
    RejectedDiversity,
}

impl OfferOutcome {
    pub fn accepted(self) -> bool {
        matches!(self, OfferOutcome::AddedBelowCapacity | OfferOutcome::ReplacedWorst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FrequencyRecord {
    Edge { u: usize, v: usize, count: u32 },
    Item { item: usize, count: u32 },
}

/// The EDO population P2.
#[derive(Debug, Clone)]
pub struct EdoPopulation {
    mu: usize,
    z_min: f64,
    members: Vec<Member>,
    tables: FrequencyTables,
}

impl EdoPopulation {
    pub fn new(mu: usize, n: usize, m: usize, z_min: f64) -> Result<Self> {
        if mu == 0 {
            return Err(Error::InvalidArgument("mu must be >= 1".into()));
        }
        Ok(EdoPopulation {
            mu,
            z_min,
            members: Vec::with_capacity(mu + 1),
            tables: FrequencyTables::new(n, m),
        })
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn z_min(&self) -> f64 {
        self.z_min
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() >= self.mu
    }

    pub fn tables(&self) -> &FrequencyTables {
        &self.tables
    }

    pub fn members(&self) -> impl Iterator<Item = &Solution> {
        self.members.iter().map(|m| &m.solution)
    }

    pub fn member(&self, k: usize) -> Option<&Solution> {
        self.members.get(k).map(|m| &m.solution)
    }

    pub fn random_member<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&Solution> {
        if self.members.is_empty() {
            return None;
        }
        Some(&self.members[rng.random_range(0..self.members.len())].solution)
    }

    pub fn best_z(&self) -> Option<f64> {
        self.members.iter().map(|m| m.solution.z()).reduce(f64::max)
    }

    /// (H_e, H_i, H). Errors on an empty population.
    pub fn entropy(&self) -> Result<Entropy> {
        if self.members.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        Ok(self.tables.entropy())
    }

    /// Entropy, or zero for an empty population.
    pub fn entropy_or_zero(&self) -> Entropy {
        self.entropy().unwrap_or(Entropy::ZERO)
    }

    /// H(P) − H(P \ {member k}).
    pub fn contribution(&self, k: usize) -> Result<f64> {
        let member = self.members.get(k).ok_or(Error::UnknownMember(k))?;
        let whole = self.tables.entropy().total;
        Ok(whole - self.tables.entropy_without(member, &mut Vec::new()).total)
    }

    fn push(&mut self, s: Solution) {
        self.tables.add(&s);
        self.members.push(Member::new(s));
    }

    fn remove_at(&mut self, k: usize) -> Solution {
        let m = self.members.swap_remove(k);
        self.tables.remove(&m.solution);
        m.solution
    }

    /// Survival selection for one offspring.
    pub fn offer<R: Rng + ?Sized>(&mut self, candidate: Solution, rng: &mut R) -> OfferOutcome {
        if candidate.z() < self.z_min {
            return OfferOutcome::RejectedQuality;
        }
        if self.members.len() < self.mu {
            self.push(candidate);
            return OfferOutcome::AddedBelowCapacity;
        }
        self.push(candidate);
        let cand = self.members.len() - 1;
        let victim = self.least_contributor(rng);
        self.remove_at(victim);
        if victim == cand {
            OfferOutcome::RejectedDiversity
        } else {
            OfferOutcome::ReplacedWorst
        }
    }

    /// Index whose removal leaves the highest entropy; ties uniformly at random.
    fn least_contributor<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut scratch = Vec::new();
        let mut best = f64::NEG_INFINITY;
        let mut ties: Vec<usize> = Vec::new();
        for (k, m) in self.members.iter().enumerate() {
            let h = self.tables.entropy_without(m, &mut scratch).total;
            if h > best {
                best = h;
                ties.clear();
                ties.push(k);
            } else if h == best {
                ties.push(k);
            }
        }
        ties[rng.random_range(0..ties.len())]
    }

    /// Raises z_min and purges members below it; returns how many left.
    pub fn raise_threshold(&mut self, new_z_min: f64) -> usize {
        debug_assert!(new_z_min >= self.z_min);
        self.z_min = new_z_min;
        let mut removed = 0;
        let mut k = 0;
        while k < self.members.len() {
            if self.members[k].solution.z() < new_z_min {
                self.remove_at(k);
                removed += 1;
            } else {
                k += 1;
            }
        }
        removed
    }

    /// Edge records (1-based cities) followed by item records (1-based items).
    pub fn export_frequencies(&self) -> Vec<FrequencyRecord> {
        let edges = self
            .tables
            .edge_counts()
            .into_iter()
            .map(|(u, v, count)| FrequencyRecord::Edge {
                u: u + 1,
                v: v + 1,
                count,
            });
        let items = self
            .tables
            .items
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(j, &count)| FrequencyRecord::Item { item: j + 1, count });
        edges.chain(items).collect()
    }

    /// Frequency CSV: `type,key_a,key_b,count`.
    pub fn write_frequency_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["type", "key_a", "key_b", "count"])?;
        for r in self.export_frequencies() {
            match r {
                FrequencyRecord::Edge { u, v, count } => {
                    w.write_record(["edge", &u.to_string(), &v.to_string(), &count.to_string()])?
                }
                FrequencyRecord::Item { item, count } => {
                    w.write_record(["item", &item.to_string(), "", &count.to_string()])?
                }
            }
        }
        w.flush().map_err(|e| Error::io("<frequency csv>", e))?;
        Ok(())
    }

    /// From-scratch recount of the tables; used by tests and debug checks.
    pub fn recount(&self) -> FrequencyTables {
        let n = self.tables.edges.len();
        let mut t = FrequencyTables::new(n, self.tables.items.len());
        for m in &self.members {
            t.add(&m.solution);
        }
        t
    }

    pub fn tables_consistent(&self) -> bool {
        let fresh = self.recount();
        let trim = |h: &[u64]| h[..h.iter().rposition(|&x| x > 0).map_or(0, |p| p + 1)].to_vec();
        fresh.edge_counts() == self.tables.edge_counts()
            && fresh.items == self.tables.items
            && trim(&fresh.edge_hist) == trim(&self.tables.edge_hist)
            && trim(&fresh.item_hist) == trim(&self.tables.item_hist)
            && fresh.edge_total == self.tables.edge_total
            && fresh.item_total == self.tables.item_total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{PackingList, Scores, Tour};
    use crate::tsp::random_tour;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn sol(tour: Vec<usize>, items: &[usize], m: usize, z: f64) -> Solution {
        Solution::from_parts(
            Tour::new(tour).unwrap(),
            PackingList::from_indices(m, items),
            Scores { f: 0.0, g: 0.0, z },
        )
    }

    /// Direct −Σ p ln p over recounted frequencies.
    fn oracle_entropy(members: &[Solution]) -> (f64, f64) {
        let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut items: BTreeMap<usize, f64> = BTreeMap::new();
        for s in members {
            for e in s.tour().edges() {
                *edges.entry(e).or_default() += 1.0;
            }
            for j in s.packing().selected() {
                *items.entry(j).or_default() += 1.0;
            }
        }
        let h = |map: Vec<f64>| {
            let t: f64 = map.iter().sum();
            map.iter().map(|&f| -(f / t) * (f / t).ln()).sum::<f64>()
        };
        (h(edges.into_values().collect()), h(items.into_values().collect()))
    }

    #[test]
    fn identical_members_give_ln_n() {
        let mut pop = EdoPopulation::new(3, 4, 2, f64::NEG_INFINITY).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..3 {
            pop.offer(sol(vec![0, 1, 2, 3], &[0], 2, 1.0), &mut rng);
        }
        let h = pop.entropy().unwrap();
        assert_eq!(pop.tables().edge_total(), 12);
        assert_eq!(h.edge, 4f64.ln());
        assert_eq!(h.item, 0.0);
    }

    #[test]
    fn disjoint_members_give_ln_n_mu() {
        // two edge-disjoint Hamiltonian cycles on K5 cover all 10 edges
        let mut pop = EdoPopulation::new(2, 5, 1, f64::NEG_INFINITY).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        pop.offer(sol(vec![0, 1, 2, 3, 4], &[], 1, 1.0), &mut rng);
        pop.offer(sol(vec![0, 2, 4, 1, 3], &[], 1, 1.0), &mut rng);
        assert_eq!(pop.entropy().unwrap().edge, 10f64.ln());
    }

    #[test]
    fn worked_entropy_example() {
        // n=4 tours sharing exactly two edges: (0,1) and (2,3)
        let mut pop = EdoPopulation::new(2, 4, 2, f64::NEG_INFINITY).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = sol(vec![0, 1, 2, 3], &[0], 2, 1.0);
        let b = sol(vec![0, 1, 3, 2], &[0, 1], 2, 1.0);
        let shared = a
            .tour()
            .edge_set()
            .iter()
            .filter(|e| b.tour().edge_set().contains(e))
            .count();
        assert_eq!(shared, 2);
        pop.offer(a, &mut rng);
        pop.offer(b, &mut rng);
        let h = pop.entropy().unwrap();
        let he = -2.0 * (2.0 / 8.0) * (2.0f64 / 8.0).ln() - 4.0 * (1.0 / 8.0) * (1.0f64 / 8.0).ln();
        let hi = -(2.0 / 3.0) * (2.0f64 / 3.0).ln() - (1.0 / 3.0) * (1.0f64 / 3.0).ln();
        assert_relative_eq!(h.edge, he, max_relative = 1e-12);
        assert_relative_eq!(h.item, hi, max_relative = 1e-12);
        assert!((h.edge - 1.7329).abs() < 1e-4);
        assert!((h.item - 0.6365).abs() < 1e-4);
        assert_relative_eq!(h.total, he + hi, max_relative = 1e-12);
    }

    #[test]
    fn empty_population_errors() {
        let pop = EdoPopulation::new(3, 4, 2, 0.0).unwrap();
        assert!(matches!(pop.entropy(), Err(Error::EmptyPopulation)));
        assert!(matches!(pop.contribution(0), Err(Error::UnknownMember(0))));
        assert!(pop.export_frequencies().is_empty());
        assert!(EdoPopulation::new(0, 4, 2, 0.0).is_err());
    }

    #[test]
    fn single_member_contributes_everything() {
        let mut pop = EdoPopulation::new(1, 5, 3, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        pop.offer(sol(vec![0, 2, 1, 4, 3], &[0, 2], 3, 1.0), &mut rng);
        assert_eq!(pop.contribution(0).unwrap(), pop.entropy().unwrap().total);
    }

    #[test]
    fn duplicates_contribute_least() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let mut pop = EdoPopulation::new(4, 7, 5, f64::NEG_INFINITY).unwrap();
            let base = sol(random_tour(7, &mut rng).cities().to_vec(), &[0, 1], 5, 1.0);
            pop.offer(base.clone(), &mut rng);
            pop.offer(base, &mut rng);
            pop.offer(sol(random_tour(7, &mut rng).cities().to_vec(), &[2], 5, 1.0), &mut rng);
            pop.offer(
                sol(random_tour(7, &mut rng).cities().to_vec(), &[3, 4], 5, 1.0),
                &mut rng,
            );
            let c: Vec<f64> = (0..4).map(|k| pop.contribution(k).unwrap()).collect();
            assert!(c[0] <= c[2] + 1e-12 && c[0] <= c[3] + 1e-12, "{c:?}");
            assert!((c[0] - c[1]).abs() < 1e-12);
        }
    }

    fn random_solution(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Solution {
        let items: Vec<usize> = (0..m).filter(|_| rng.random_bool(0.3)).collect();
        sol(
            random_tour(n, rng).cities().to_vec(),
            &items,
            m,
            rng.random_range(0.0..100.0),
        )
    }

    #[test]
    fn contributions_match_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.random_range(4..12);
            let m = rng.random_range(1..8);
            let mu = rng.random_range(1..8);
            let mut pop = EdoPopulation::new(mu, n, m, f64::NEG_INFINITY).unwrap();
            for _ in 0..mu {
                pop.offer(random_solution(n, m, &mut rng), &mut rng);
            }
            let all: Vec<Solution> = pop.members().cloned().collect();
            let (he, hi) = oracle_entropy(&all);
            for k in 0..all.len() {
                let mut rest = all.clone();
                rest.remove(k);
                let (re, ri) = if rest.is_empty() {
                    (0.0, 0.0)
                } else {
                    oracle_entropy(&rest)
                };
                let expect = (he + hi) - (re + ri);
                assert!((pop.contribution(k).unwrap() - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn offer_removes_least_contributor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (n, m, mu) = (8, 6, 5);
            let mut pop = EdoPopulation::new(mu, n, m, f64::NEG_INFINITY).unwrap();
            for _ in 0..mu {
                pop.offer(random_solution(n, m, &mut rng), &mut rng);
            }
            let before: Vec<Solution> = pop.members().cloned().collect();
            let cand = random_solution(n, m, &mut rng);
            let mut pool = before.clone();
            pool.push(cand.clone());
            let best_remaining = (0..pool.len())
                .map(|k| {
                    let mut rest = pool.clone();
                    rest.remove(k);
                    let (e, i) = oracle_entropy(&rest);
                    e + i
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let outcome = pop.offer(cand, &mut rng);
            assert!(matches!(
                outcome,
                OfferOutcome::ReplacedWorst | OfferOutcome::RejectedDiversity
            ));
            assert_eq!(pop.len(), mu);
            let h = pop.entropy().unwrap().total;
            assert!((h - best_remaining).abs() < 1e-9);
        }
    }

    #[test]
    fn offer_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pop = EdoPopulation::new(2, 5, 1, 10.0).unwrap();
        let x = vec![0, 1, 2, 3, 4];
        let y = vec![0, 2, 4, 1, 3];
        let between = vec![0, 1, 3, 2, 4];
        assert_eq!(
            pop.offer(sol(x.clone(), &[], 1, 10.0 - 1e-9), &mut rng),
            OfferOutcome::RejectedQuality
        );
        assert_eq!(
            pop.offer(sol(x.clone(), &[], 1, 10.0), &mut rng),
            OfferOutcome::AddedBelowCapacity
        );
        assert_eq!(
            pop.offer(sol(x.clone(), &[], 1, 12.0), &mut rng),
            OfferOutcome::AddedBelowCapacity
        );
        assert_eq!(
            pop.offer(sol(y.clone(), &[], 1, 11.0), &mut rng),
            OfferOutcome::ReplacedWorst
        );
        assert_eq!(
            pop.offer(sol(between, &[], 1, 50.0), &mut rng),
            OfferOutcome::RejectedDiversity
        );
        let mut tours: Vec<Vec<usize>> = pop.members().map(|s| s.tour().cities().to_vec()).collect();
        tours.sort();
        assert_eq!(tours, vec![x, y]);
        assert_eq!(pop.entropy().unwrap().edge, 10f64.ln());
    }

    #[test]
    fn raise_threshold_filters_by_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pop = EdoPopulation::new(20, 9, 4, f64::NEG_INFINITY).unwrap();
        for _ in 0..20 {
            pop.offer(random_solution(9, 4, &mut rng), &mut rng);
        }
        assert_eq!(pop.raise_threshold(f64::NEG_INFINITY), 0);
        let mut zs: Vec<f64> = pop.members().map(|s| s.z()).collect();
        zs.sort_by(f64::total_cmp);
        let median = zs[10];
        let expect_kept: Vec<f64> = zs.iter().copied().filter(|&z| z >= median).collect();
        let removed = pop.raise_threshold(median);
        assert_eq!(removed, 20 - expect_kept.len());
        let mut kept: Vec<f64> = pop.members().map(|s| s.z()).collect();
        kept.sort_by(f64::total_cmp);
        assert_eq!(kept, expect_kept);
        assert!(pop.tables_consistent());
        let left = pop.len();
        assert_eq!(pop.raise_threshold(1e9), left);
        assert!(pop.is_empty());
    }

    #[test]
    fn frequency_export() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut pop = EdoPopulation::new(3, 5, 3, f64::NEG_INFINITY).unwrap();
        let s = sol(vec![0, 3, 1, 4, 2], &[1], 3, 1.0);
        for _ in 0..3 {
            pop.offer(s.clone(), &mut rng);
        }
        let recs = pop.export_frequencies();
        let edges: Vec<_> = recs
            .iter()
            .filter(|r| matches!(r, FrequencyRecord::Edge { .. }))
            .collect();
        assert_eq!(edges.len(), 5);
        assert!(edges
            .iter()
            .all(|r| matches!(r, FrequencyRecord::Edge { count: 3, .. })));
        assert_eq!(recs.last(), Some(&FrequencyRecord::Item { item: 2, count: 3 }));

        let mut pop = EdoPopulation::new(10, 9, 6, f64::NEG_INFINITY).unwrap();
        for _ in 0..10 {
            pop.offer(random_solution(9, 6, &mut rng), &mut rng);
        }
        let (mut es, mut is) = (0u64, 0u64);
        for r in pop.export_frequencies() {
            match r {
                FrequencyRecord::Edge { count, .. } => es += count as u64,
                FrequencyRecord::Item { count, .. } => is += count as u64,
            }
        }
        assert_eq!(es, pop.tables().edge_total());
        assert_eq!(is, pop.tables().item_total());
        let mut buf = Vec::new();
        pop.write_frequency_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("type,key_a,key_b,count\n"));
        assert!(text.lines().any(|l| l.starts_with("item,") && l.contains(",,")));
    }

    #[test]
    fn random_operation_sequences_keep_tables_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, m) = (10, 8);
        let mut pop = EdoPopulation::new(6, n, m, 0.0).unwrap();
        let mut threshold = 0.0;
        for step in 0..1000 {
            if step % 10 == 9 {
                threshold += 2.0;
                pop.raise_threshold(threshold);
            } else {
                let mut s = random_solution(n, m, &mut rng);
                s = sol(
                    s.tour().cities().to_vec(),
                    &s.packing().selected().collect::<Vec<_>>(),
                    m,
                    threshold + rng.random_range(0.0..30.0),
                );
                pop.offer(s, &mut rng);
            }
            assert!(pop.tables_consistent());
            assert_eq!(pop.tables().edge_total(), (n * pop.len()) as u64);
            if !pop.is_empty() {
                let all: Vec<Solution> = pop.members().cloned().collect();
                let (he, hi) = oracle_entropy(&all);
                let h = pop.entropy().unwrap();
                assert!((h.edge - he).abs() < 1e-9 && (h.item - hi).abs() < 1e-9);
            }
        }
    }
}
