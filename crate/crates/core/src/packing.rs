//! Inner (1+1) EA over packing lists for a fixed tour, and the self-adaptive
//! control of its running time.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{PackingList, Scores, Tour, TourEvaluator, TtpInstance};

pub const F1: f64 = 0.5;
pub const F2: f64 = 1.2;
pub const GAMMA_MIN: f64 = 1.0;
pub const GAMMA_MAX: f64 = 10.0;
pub const GAMMA_PRIME_MIN: f64 = 0.1;
pub const GAMMA_PRIME_MAX: f64 = 1.0;
/// Fixed policy budget per item.
pub const FIXED_EVALS_PER_ITEM: u64 = 2;
/// Adaptation interval length per item.
pub const INTERVAL_EVALS_PER_ITEM: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Fixed,
    Gamma1,
    Gamma2,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Fixed, PolicyKind::Gamma1, PolicyKind::Gamma2];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Fixed => "fixed",
            PolicyKind::Gamma1 => "gamma1",
            PolicyKind::Gamma2 => "gamma2",
        }
    }

    /// Lower and upper bound of the adapted factor.
    pub fn bounds(self) -> Option<(f64, f64)> {
        match self {
            PolicyKind::Fixed => None,
            PolicyKind::Gamma1 => Some((GAMMA_MIN, GAMMA_MAX)),
            PolicyKind::Gamma2 => Some((GAMMA_PRIME_MIN, GAMMA_PRIME_MAX)),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(PolicyKind::Fixed),
            "gamma1" => Ok(PolicyKind::Gamma1),
            "gamma2" => Ok(PolicyKind::Gamma2),
            other => Err(Error::InvalidArgument(format!("unknown policy {other:?}"))),
        }
    }
}

/// When the inner EA stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TerminationPolicy {
    /// t = 2m evaluations.
    Fixed,
    /// t = gamma * m evaluations.
    Gamma1 { gamma: f64 },
    /// Stop after gamma' * m consecutive non-improving evaluations.
    Gamma2 { gamma_prime: f64 },
}

fn scaled(factor: f64, m: usize) -> u64 {
    ((factor * m as f64).ceil() as u64).max(1)
}

impl TerminationPolicy {
    pub fn kind(&self) -> PolicyKind {
        match self {
            TerminationPolicy::Fixed => PolicyKind::Fixed,
            TerminationPolicy::Gamma1 { .. } => PolicyKind::Gamma1,
            TerminationPolicy::Gamma2 { .. } => PolicyKind::Gamma2,
        }
    }

    /// Total evaluation cap, if the policy has one.
    pub fn evaluation_limit(&self, m: usize) -> Option<u64> {
        match *self {
            TerminationPolicy::Fixed => Some(FIXED_EVALS_PER_ITEM * m as u64),
            TerminationPolicy::Gamma1 { gamma } => Some(scaled(gamma, m)),
            TerminationPolicy::Gamma2 { .. } => None,
        }
    }

    /// Consecutive failures that end the run, if the policy uses stagnation.
    pub fn stagnation_limit(&self, m: usize) -> Option<u64> {
        match *self {
            TerminationPolicy::Gamma2 { gamma_prime } => Some(scaled(gamma_prime, m)),
            _ => None,
        }
    }
}

/// Self-adaptation bookkeeping for Gamma1 / Gamma2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationState {
    pub kind: PolicyKind,
    /// gamma or gamma'; unused for the fixed policy.
    pub value: f64,
    /// u, evaluations per interval.
    pub interval_len: u64,
    /// Global evaluation count at which the current interval ends.
    pub next_boundary: u64,
    /// Best z of the QD archive when the current interval began.
    pub interval_start_z: f64,
}

impl AdaptationState {
    /// Starts at the upper bound of the factor; the first interval begins at
    /// `start_evals`.
    pub fn new(kind: PolicyKind, m: usize, start_evals: u64, start_z: f64) -> Self {
        let interval_len = INTERVAL_EVALS_PER_ITEM * m as u64;
        AdaptationState {
            kind,
            value: kind.bounds().map_or(0.0, |(_, hi)| hi),
            interval_len,
            next_boundary: start_evals + interval_len,
            interval_start_z: start_z,
        }
    }

    pub fn policy(&self) -> TerminationPolicy {
        match self.kind {
            PolicyKind::Fixed => TerminationPolicy::Fixed,
            PolicyKind::Gamma1 => TerminationPolicy::Gamma1 { gamma: self.value },
            PolicyKind::Gamma2 => TerminationPolicy::Gamma2 {
                gamma_prime: self.value,
            },
        }
    }

    /// Closes every interval that ended at or before `evaluations`.
    /// Returns the number of boundaries crossed.
    pub fn advance(&mut self, evaluations: u64, z_best: f64) -> u64 {
        let mut crossed = 0;
        while evaluations >= self.next_boundary {
            let success = z_best > self.interval_start_z;
            *self = update_gamma(self, success);
            self.interval_start_z = z_best;
            self.next_boundary += self.interval_len;
            crossed += 1;
        }
        crossed
    }
}

/// gamma <- max(gamma F1, min) on success, min(gamma F2, max) on failure.
pub fn update_gamma(state: &AdaptationState, interval_was_success: bool) -> AdaptationState {
    let mut next = state.clone();
    if let Some((lo, hi)) = state.kind.bounds() {
        next.value = if interval_was_success {
            (state.value * F1).max(lo)
        } else {
            (state.value * F2).min(hi)
        };
    }
    next
}

/// Indices to flip: each with probability 1/m, redrawn until non-empty.
pub fn sample_flips<R: Rng + ?Sized>(m: usize, rng: &mut R, out: &mut Vec<usize>) {
    out.clear();
    if m == 0 {
        return;
    }
    let gaps = Geometric::new(1.0 / m as f64).expect("1/m is a probability");
    while out.is_empty() {
        let mut idx = 0u64;
        loop {
            idx += gaps.sample(rng);
            if idx >= m as u64 {
                break;
            }
            out.push(idx as usize);
            idx += 1;
        }
    }
}

/// Standard bit-flip mutation; never returns its input unchanged.
pub fn bit_flip<R: Rng + ?Sized>(y: &PackingList, rng: &mut R) -> PackingList {
    let mut flips = Vec::new();
    sample_flips(y.len(), rng, &mut flips);
    let mut out = y.clone();
    for &j in &flips {
        out.flip(j);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackingOutcome {
    pub packing: PackingList,
    /// Scores of `packing`; `None` only when no evaluation was allowed.
    pub scores: Option<Scores>,
    pub evaluations: u64,
}

/// Runs the (1+1) EA from `seed` on `tour`. The seed's own evaluation
/// counts toward both the policy cap and `budget`.
pub fn optimize_packing<R: Rng + ?Sized>(
    inst: &TtpInstance,
    tour: &Tour,
    seed: &PackingList,
    policy: &TerminationPolicy,
    budget: u64,
    rng: &mut R,
) -> Result<PackingOutcome> {
    let m = inst.num_items();
    let (_, weight) = inst.packing_profit_weight(seed);
    if weight > inst.capacity() {
        return Err(Error::Infeasible {
            weight,
            capacity: inst.capacity(),
        });
    }
    if budget == 0 {
        return Ok(PackingOutcome {
            packing: seed.clone(),
            scores: None,
            evaluations: 0,
        });
    }
    let cap = policy.evaluation_limit(m).unwrap_or(u64::MAX).min(budget);
    let stall_limit = policy.stagnation_limit(m).unwrap_or(u64::MAX);

    let mut eval = TourEvaluator::new(inst, tour);
    let mut current = seed.clone();
    let mut best = eval.scores(&current)?;
    let mut used = 1;
    let mut stall = 0;
    let mut flips = Vec::new();
    while used < cap && stall < stall_limit {
        sample_flips(m, rng, &mut flips);
        for &j in &flips {
            current.flip(j);
        }
        used += 1;
        match eval.scores(&current) {
            Ok(s) if s.z > best.z => {
                best = s;
                stall = 0;
            }
            _ => {
                for &j in &flips {
                    current.flip(j);
                }
                stall += 1;
            }
        }
    }
    Ok(PackingOutcome {
        packing: current,
        scores: Some(best),
        evaluations: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{EdgeWeightType, InstanceData, Item};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(items: Vec<Item>, capacity: f64, n: usize, rng: &mut ChaCha8Rng) -> TtpInstance {
        TtpInstance::try_from(InstanceData {
            name: "pk".into(),
            knapsack_data_type: String::new(),
            coords: (0..n)
                .map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
                .collect(),
            edge_weight_type: EdgeWeightType::Ceil2d,
            items,
            capacity,
            min_speed: 0.1,
            max_speed: 1.0,
            renting_ratio: 0.2,
        })
        .unwrap()
    }

    fn state(kind: PolicyKind, value: f64) -> AdaptationState {
        AdaptationState {
            value,
            ..AdaptationState::new(kind, 10, 0, 0.0)
        }
    }

    #[test]
    fn gamma_updates() {
        assert_eq!(update_gamma(&state(PolicyKind::Gamma1, 4.0), true).value, 2.0);
        assert_eq!(update_gamma(&state(PolicyKind::Gamma1, 1.0), true).value, 1.0);
        assert_eq!(update_gamma(&state(PolicyKind::Gamma1, 9.0), false).value, 10.0);
        assert_eq!(update_gamma(&state(PolicyKind::Gamma2, 0.1), true).value, 0.1);
        assert_eq!(update_gamma(&state(PolicyKind::Gamma2, 0.9), false).value, 1.0);
        assert_eq!(
            update_gamma(&state(PolicyKind::Fixed, 0.0), false).policy(),
            TerminationPolicy::Fixed
        );
    }

    #[test]
    fn scripted_trace() {
        let mut s = state(PolicyKind::Gamma1, 4.0);
        let mut trace = Vec::new();
        for success in [true, false, false, true] {
            s = update_gamma(&s, success);
            trace.push(s.value);
        }
        let expect = [2.0, 2.4, 2.88, 1.44];
        for (got, want) in trace.iter().zip(expect) {
            assert_relative_eq!(*got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn initial_values_are_upper_bounds() {
        assert_eq!(AdaptationState::new(PolicyKind::Gamma1, 5, 0, 0.0).value, 10.0);
        assert_eq!(AdaptationState::new(PolicyKind::Gamma2, 5, 0, 0.0).value, 1.0);
    }

    #[test]
    fn advance_counts_interval_boundaries() {
        let mut s = AdaptationState::new(PolicyKind::Gamma1, 1, 100, 5.0);
        assert_eq!(s.interval_len, 2000);
        assert_eq!(s.advance(2099, 9.0), 0);
        assert_eq!(s.advance(2100, 9.0), 1);
        assert_eq!(s.value, 5.0);
        assert_eq!(s.interval_start_z, 9.0);
        assert_eq!(s.advance(4100, 9.0), 1);
        assert_eq!(s.value, 6.0);
        assert_eq!(s.advance(10_000, 9.0), 2);
    }

    #[test]
    fn zero_budget_returns_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = instance(
            vec![Item {
                profit: 5.0,
                weight: 1.0,
                city: 1,
            }],
            3.0,
            4,
            &mut rng,
        );
        let seed = PackingList::empty(1);
        let out = optimize_packing(&inst, &Tour::identity(4), &seed, &TerminationPolicy::Fixed, 0, &mut rng).unwrap();
        assert_eq!(out.packing, seed);
        assert_eq!(out.evaluations, 0);
        assert!(out.scores.is_none());
    }

    #[test]
    fn infeasible_seed_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = instance(
            vec![Item {
                profit: 5.0,
                weight: 4.0,
                city: 1,
            }],
            3.0,
            4,
            &mut rng,
        );
        let seed = PackingList::from_bits(vec![true]);
        assert!(optimize_packing(
            &inst,
            &Tour::identity(4),
            &seed,
            &TerminationPolicy::Fixed,
            10,
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn single_improving_item_is_always_taken() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = instance(
            vec![Item {
                profit: 1000.0,
                weight: 1.0,
                city: 2,
            }],
            3.0,
            4,
            &mut rng,
        );
        let tour = Tour::identity(4);
        let with = inst.ttp_objective(&tour, &PackingList::from_bits(vec![true])).unwrap();
        let without = inst.ttp_objective(&tour, &PackingList::empty(1)).unwrap();
        assert!(with > without);
        for _ in 0..20 {
            let out = optimize_packing(
                &inst,
                &tour,
                &PackingList::empty(1),
                &TerminationPolicy::Fixed,
                100,
                &mut rng,
            )
            .unwrap();
            assert_eq!(out.packing.bits(), &[true]);
            assert_eq!(out.evaluations, 2);
        }
    }

    #[test]
    fn bit_flip_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let one = PackingList::empty(1);
        for _ in 0..100 {
            assert_eq!(bit_flip(&one, &mut rng).bits(), &[true]);
        }
        let y = PackingList::empty(1000);
        let mut flips = Vec::new();
        let mut total = 0usize;
        let samples = 100_000;
        for _ in 0..samples {
            sample_flips(1000, &mut rng, &mut flips);
            total += flips.len();
        }
        let mean = total as f64 / samples as f64;
        // conditioned on >= 1 flip the mean is 1/(1-(1-1/m)^m) ~ 1.58; the
        // unconditioned Binomial(m, 1/m) mean is 1
        let expect = 1.0 / (1.0 - (1.0 - 1e-3f64).powi(1000));
        assert!((mean - expect).abs() / expect < 0.05, "mean {mean}");
        assert_eq!(bit_flip(&y, &mut rng).len(), 1000);
    }

    #[test]
    fn policy_caps_and_monotone_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let m = rng.random_range(1..20);
            let items = (0..m)
                .map(|j| Item {
                    profit: rng.random_range(1.0..100.0),
                    weight: rng.random_range(1.0..50.0),
                    city: 1 + j % 5,
                })
                .collect();
            let inst = instance(items, 100.0, 6, &mut rng);
            let tour = Tour::identity(6);
            let seed = PackingList::empty(m);
            let z0 = inst.ttp_objective(&tour, &seed).unwrap();
            for policy in [
                TerminationPolicy::Fixed,
                TerminationPolicy::Gamma1 { gamma: 3.3 },
                TerminationPolicy::Gamma2 { gamma_prime: 0.5 },
            ] {
                let budget = rng.random_range(1..200);
                let out = optimize_packing(&inst, &tour, &seed, &policy, budget, &mut rng).unwrap();
                assert!(out.evaluations <= budget);
                if let Some(limit) = policy.evaluation_limit(m) {
                    assert!(out.evaluations <= limit);
                }
                let s = out.scores.unwrap();
                assert!(s.z >= z0);
                assert!(inst.is_feasible(&out.packing));
                assert_relative_eq!(
                    s.z,
                    inst.ttp_objective(&tour, &out.packing).unwrap(),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn gamma2_stops_after_stagnation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // nothing fits, so every mutant is rejected
        let items = (0..10)
            .map(|j| Item {
                profit: 1.0,
                weight: 50.0,
                city: 1 + j % 3,
            })
            .collect();
        let inst = instance(items, 10.0, 4, &mut rng);
        let policy = TerminationPolicy::Gamma2 { gamma_prime: 0.3 };
        let out = optimize_packing(
            &inst,
            &Tour::identity(4),
            &PackingList::empty(10),
            &policy,
            1000,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.evaluations, 1 + 3);
    }

    fn all_packings(m: usize) -> impl Iterator<Item = PackingList> {
        (0u32..1 << m).map(move |mask| PackingList::from_bits((0..m).map(|j| mask >> j & 1 == 1).collect()))
    }

    #[test]
    fn reaches_top_three_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut hits = 0;
        for _ in 0..100 {
            let m = rng.random_range(2..=8);
            let n = rng.random_range(3..=6);
            let items = (0..m)
                .map(|j| Item {
                    profit: rng.random_range(1..100) as f64,
                    weight: rng.random_range(1..30) as f64,
                    city: 1 + j % (n - 1),
                })
                .collect();
            let inst = instance(items, 60.0, n, &mut rng);
            let tour = Tour::identity(n);
            let mut zs: Vec<f64> = all_packings(m)
                .filter_map(|y| inst.ttp_objective(&tour, &y).ok())
                .collect();
            zs.sort_by(|a, b| b.total_cmp(a));
            zs.dedup();
            let third = zs[zs.len().min(3) - 1];
            let policy = TerminationPolicy::Gamma1 { gamma: 10.0 };
            let out = optimize_packing(&inst, &tour, &PackingList::empty(m), &policy, 10_000, &mut rng).unwrap();
            if out.scores.unwrap().z >= third {
                hits += 1;
            }
        }
        assert!(hits >= 90, "{hits}/100");
    }

    #[test]
    fn policy_kind_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.as_str().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("gamma3".parse::<PolicyKind>().is_err());
    }
}
