//! Random desk-scale instances in the benchmark text format.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::{EdgeWeightType, InstanceData, Item, TtpInstance};
use crate::kp::greedy_packing;
use crate::tsp::nearest_neighbour_tour;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// W = capacity_factor * total item weight.
    pub capacity_factor: f64,
    /// Strongly correlated items (p = w + 100) instead of uncorrelated.
    pub correlated: bool,
    pub name: Option<String>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n: 20,
            m: 19,
            seed: 0,
            capacity_factor: 0.3,
            correlated: false,
            name: None,
        }
    }
}

/// Coordinates uniform in [0, 1000]^2, integer profits and weights in
/// [1, 1000], items dealt round-robin to cities 2..n.
///
/// The renting ratio is chosen so that the nearest-neighbour tour with the
/// greedy packing scores z = 0.
pub fn generate_instance(cfg: &GeneratorConfig) -> Result<TtpInstance> {
    if cfg.n < 3 {
        return Err(Error::InvalidArgument(format!("n must be >= 3, got {}", cfg.n)));
    }
    if cfg.m < 1 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    if !(cfg.capacity_factor > 0.0 && cfg.capacity_factor.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "capacity factor must be positive, got {}",
            cfg.capacity_factor
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let coords: Vec<(f64, f64)> = (0..cfg.n)
        .map(|_| (rng.random_range(0..=1000) as f64, rng.random_range(0..=1000) as f64))
        .collect();
    let items: Vec<Item> = (0..cfg.m)
        .map(|j| {
            let weight = rng.random_range(1..=1000) as f64;
            let profit = if cfg.correlated {
                weight + 100.0
            } else {
                rng.random_range(1..=1000) as f64
            };
            Item {
                profit,
                weight,
                city: 1 + j % (cfg.n - 1),
            }
        })
        .collect();
    let total: f64 = items.iter().map(|it| it.weight).sum();
    let capacity = (cfg.capacity_factor * total).floor().max(1.0);
    let kind = if cfg.correlated {
        "bounded strongly corr"
    } else {
        "uncorrelated"
    };
    let name = cfg
        .name
        .clone()
        .unwrap_or_else(|| format!("gen_n{}_m{}_s{}", cfg.n, cfg.m, cfg.seed));
    let mut data = InstanceData {
        name,
        knapsack_data_type: kind.to_string(),
        coords,
        edge_weight_type: EdgeWeightType::Ceil2d,
        items,
        capacity,
        min_speed: 0.1,
        max_speed: 1.0,
        renting_ratio: 1.0,
    };

    let probe = TtpInstance::try_from(data.clone())?;
    let tour = nearest_neighbour_tour(&probe, 0);
    let packing = greedy_packing(&probe);
    let (g, _) = probe.packing_profit_weight(&packing);
    let time = g - probe.ttp_objective(&tour, &packing)?;
    if g > 0.0 && time > 0.0 {
        data.renting_ratio = ((g / time) * 100.0).round() / 100.0;
    }
    TtpInstance::try_from(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        let inst = generate_instance(&GeneratorConfig {
            n: 5,
            m: 4,
            seed: 7,
            ..Default::default()
        })
        .unwrap();
        let back = TtpInstance::parse(&inst.to_text()).unwrap();
        assert_eq!(back.num_cities(), 5);
        assert_eq!(back.num_items(), 4);
        assert_eq!(back.data(), inst.data());
    }

    #[test]
    fn zero_capacity_factor_rejected() {
        let cfg = GeneratorConfig {
            capacity_factor: 0.0,
            ..Default::default()
        };
        assert!(matches!(generate_instance(&cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn same_seed_same_text() {
        let cfg = GeneratorConfig {
            n: 12,
            m: 30,
            seed: 3,
            correlated: true,
            ..Default::default()
        };
        assert_eq!(
            generate_instance(&cfg).unwrap().to_text(),
            generate_instance(&cfg).unwrap().to_text()
        );
    }

    #[test]
    fn items_dealt_round_robin() {
        let inst = generate_instance(&GeneratorConfig {
            n: 4,
            m: 7,
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        let cities: Vec<usize> = inst.items().iter().map(|it| it.city).collect();
        assert_eq!(cities, vec![1, 2, 3, 1, 2, 3, 1]);
        for it in inst.items() {
            assert!((1.0..=1000.0).contains(&it.weight));
        }
    }

    #[test]
    fn nearest_neighbour_with_greedy_is_near_zero() {
        let inst = generate_instance(&GeneratorConfig {
            n: 30,
            m: 29,
            seed: 5,
            ..Default::default()
        })
        .unwrap();
        let z = inst
            .ttp_objective(&nearest_neighbour_tour(&inst, 0), &greedy_packing(&inst))
            .unwrap();
        let (g, _) = inst.packing_profit_weight(&greedy_packing(&inst));
        assert!(z.abs() < 0.01 * g, "z = {z}, g = {g}");
    }
}
