//! Steady-state EAX genetic algorithm for the TSP component.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eax::EaxCrossover;
use crate::error::{Error, Result};
use crate::instance::{Tour, TtpInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TspGaConfig {
    pub population_size: usize,
    /// Crossovers per restart, as a multiple of the city count.
    pub crossovers_per_city: usize,
    pub restarts: usize,
}

impl Default for TspGaConfig {
    fn default() -> Self {
        TspGaConfig {
            population_size: 100,
            crossovers_per_city: 2000,
            restarts: 1,
        }
    }
}

impl TspGaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::InvalidArgument("TSP population size must be >= 2".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("TSP restarts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TspResult {
    pub f_star: f64,
    pub best: Tour,
    /// Final population of the restart that produced `best`.
    pub tour_pool: Vec<Tour>,
    /// Best length after each crossover of the winning restart.
    pub trace: Vec<f64>,
}

/// Greedy nearest-neighbour tour from `start`.
pub fn nearest_neighbour_tour(inst: &TtpInstance, start: usize) -> Tour {
    let n = inst.num_cities();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = start;
    visited[cur] = true;
    order.push(cur);
    for _ in 1..n {
        let next = (0..n)
            .filter(|&v| !visited[v])
            .min_by(|&a, &b| inst.distance(cur, a).total_cmp(&inst.distance(cur, b)))
            .unwrap();
        visited[next] = true;
        order.push(next);
        cur = next;
    }
    Tour::from_cycle(order).expect("nearest-neighbour order is a permutation")
}

pub fn random_tour<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Tour {
    let mut rest: Vec<usize> = (1..n).collect();
    rest.shuffle(rng);
    let mut v = Vec::with_capacity(n);
    v.push(0);
    v.extend(rest);
    Tour::from_vec_unchecked(v)
}

pub fn solve_tsp<R: Rng + ?Sized>(inst: &TtpInstance, config: &TspGaConfig, rng: &mut R) -> Result<TspResult> {
    config.validate()?;
    let eax = EaxCrossover::new(inst);
    let mut best: Option<TspResult> = None;
    for _ in 0..config.restarts {
        let run = one_restart(inst, config, &eax, rng);
        if best.as_ref().is_none_or(|b| run.f_star < b.f_star) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

fn one_restart<R: Rng + ?Sized>(
    inst: &TtpInstance,
    config: &TspGaConfig,
    eax: &EaxCrossover,
    rng: &mut R,
) -> TspResult {
    let n = inst.num_cities();
    let size = config.population_size;
    let mut pop: Vec<Tour> = (0..size)
        .map(|k| {
            if k == 0 {
                nearest_neighbour_tour(inst, 0)
            } else if k % 2 == 0 {
                nearest_neighbour_tour(inst, rng.random_range(0..n))
            } else {
                random_tour(n, rng)
            }
        })
        .collect();
    let mut len: Vec<f64> = pop.iter().map(|t| inst.tour_length(t)).collect();
    let mut best = len.iter().copied().fold(f64::INFINITY, f64::min);
    let budget = config.crossovers_per_city.saturating_mul(n);
    let mut trace = Vec::with_capacity(budget);
    for _ in 0..budget {
        let i = rng.random_range(0..size);
        let mut j = rng.random_range(0..size - 1);
        if j >= i {
            j += 1;
        }
        let child = eax.crossover(inst, &pop[i], &pop[j], rng);
        let child_len = inst.tour_length(&child);
        let worst = (0..size).max_by(|&a, &b| len[a].total_cmp(&len[b])).unwrap();
        if child_len < len[worst] {
            pop[worst] = child;
            len[worst] = child_len;
            best = best.min(child_len);
        }
        trace.push(best);
    }
    let k = (0..size).min_by(|&a, &b| len[a].total_cmp(&len[b])).unwrap();
    TspResult {
        f_star: len[k],
        best: pop[k].clone(),
        tour_pool: pop,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{EdgeWeightType, InstanceData, Item};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geometric(coords: Vec<(f64, f64)>) -> TtpInstance {
        TtpInstance::try_from(InstanceData {
            name: "geo".into(),
            knapsack_data_type: String::new(),
            items: vec![Item {
                profit: 1.0,
                weight: 1.0,
                city: 1,
            }],
            coords,
            edge_weight_type: EdgeWeightType::Euc2d,
            capacity: 1.0,
            min_speed: 0.1,
            max_speed: 1.0,
            renting_ratio: 1.0,
        })
        .unwrap()
    }

    fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permutations(items, k + 1, out);
            items.swap(k, i);
        }
    }

    fn exhaustive_optimum(inst: &TtpInstance) -> f64 {
        let mut rest: Vec<usize> = (1..inst.num_cities()).collect();
        let mut perms = Vec::new();
        permutations(&mut rest, 0, &mut perms);
        perms
            .into_iter()
            .map(|p| {
                let mut v = vec![0];
                v.extend(p);
                inst.tour_length(&Tour::new(v).unwrap())
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn small_config() -> TspGaConfig {
        TspGaConfig {
            population_size: 20,
            crossovers_per_city: 200,
            restarts: 1,
        }
    }

    #[test]
    fn circle_of_eight_is_solved() {
        let coords: Vec<_> = (0..8)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 8.0;
                (500.0 + 400.0 * a.cos(), 500.0 + 400.0 * a.sin())
            })
            .collect();
        // scramble city labels so the identity is not the answer
        let order = [0, 5, 2, 7, 4, 1, 6, 3];
        let inst = geometric(order.iter().map(|&k| coords[k]).collect());
        let opt = exhaustive_optimum(&inst);
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = solve_tsp(&inst, &small_config(), &mut rng).unwrap();
            assert_eq!(r.f_star, opt, "seed {seed}");
        }
    }

    #[test]
    fn four_cities_always_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let inst = geometric(
                (0..4)
                    .map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
                    .collect(),
            );
            let r = solve_tsp(&inst, &small_config(), &mut rng).unwrap();
            assert_eq!(r.f_star, exhaustive_optimum(&inst));
        }
    }

    #[test]
    fn beats_nearest_neighbour_and_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let inst = geometric(
                (0..30)
                    .map(|_| (rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0)))
                    .collect(),
            );
            let r = solve_tsp(&inst, &small_config(), &mut rng).unwrap();
            let nn = inst.tour_length(&nearest_neighbour_tour(&inst, 0));
            assert!(r.f_star <= nn);
            assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
            assert!(r.tour_pool.iter().all(|t| Tour::new(t.cities().to_vec()).is_ok()));
            let pool_min = r
                .tour_pool
                .iter()
                .map(|t| inst.tour_length(t))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(pool_min, r.f_star);
        }
    }

    #[test]
    fn rejects_tiny_population() {
        let inst = geometric(vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        let cfg = TspGaConfig {
            population_size: 1,
            ..small_config()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(solve_tsp(&inst, &cfg, &mut rng).is_err());
    }
}
