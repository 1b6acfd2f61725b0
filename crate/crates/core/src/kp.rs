//! Exact 0/1 knapsack by dynamic programming over capacity, with a greedy
//! fallback for capacities too large for the decision table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{PackingList, TtpInstance};

/// Default size limit for the DP decision table.
pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpResult {
    pub g_star: f64,
    pub selection: PackingList,
    /// False when produced by the greedy fallback.
    pub optimal: bool,
}

fn integral(x: f64) -> Option<u64> {
    (x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64).then_some(x as u64)
}

/// Bytes needed by the decision table of [`solve_kp`].
pub fn table_bytes(inst: &TtpInstance) -> Result<u128> {
    let cap =
        integral(inst.capacity()).ok_or_else(|| Error::FractionalWeights(format!("capacity {}", inst.capacity())))?;
    Ok(inst.num_items() as u128 * (cap as u128 + 1).div_ceil(8))
}

/// Exact optimum with the default memory budget.
pub fn solve_kp(inst: &TtpInstance) -> Result<KpResult> {
    solve_kp_with_budget(inst, DEFAULT_MEMORY_BUDGET)
}

pub fn solve_kp_with_budget(inst: &TtpInstance, budget: u64) -> Result<KpResult> {
    let cap =
        integral(inst.capacity()).ok_or_else(|| Error::FractionalWeights(format!("capacity {}", inst.capacity())))?;
    let weights = inst
        .items()
        .iter()
        .enumerate()
        .map(|(j, it)| {
            integral(it.weight).ok_or_else(|| Error::FractionalWeights(format!("item {} weight {}", j + 1, it.weight)))
        })
        .collect::<Result<Vec<_>>>()?;
    let required = table_bytes(inst)?;
    if required > budget as u128 {
        return Err(Error::KnapsackCapacity { required, budget });
    }
    let cap = cap as usize;
    let m = weights.len();
    let row_words = (cap + 1).div_ceil(64);
    // take[j] bit c: item j improves the best profit at capacity c
    let mut take = vec![0u64; m * row_words];
    let mut best = vec![0.0f64; cap + 1];
    for (j, (&w, it)) in weights.iter().zip(inst.items()).enumerate() {
        let Ok(w) = usize::try_from(w) else { continue };
        if w > cap {
            continue;
        }
        let row = &mut take[j * row_words..(j + 1) * row_words];
        for c in (w..=cap).rev() {
            let with = best[c - w] + it.profit;
            if with > best[c] {
                best[c] = with;
                row[c / 64] |= 1 << (c % 64);
            }
        }
    }
    let mut selection = PackingList::empty(m);
    let mut c = cap;
    for j in (0..m).rev() {
        if take[j * row_words + c / 64] >> (c % 64) & 1 == 1 {
            selection.set(j, true);
            c -= weights[j] as usize;
        }
    }
    Ok(KpResult {
        g_star: best[cap],
        selection,
        optimal: true,
    })
}

/// Greedy by profit/weight ratio, then the better of that packing and the
/// single most profitable item that fits. Always feasible; at least half of
/// the optimum.
pub fn solve_kp_greedy(inst: &TtpInstance) -> KpResult {
    let selection = greedy_packing(inst);
    let greedy_profit = inst.packing_profit_weight(&selection).0;
    let best_single = inst
        .items()
        .iter()
        .enumerate()
        .filter(|(_, it)| it.weight <= inst.capacity())
        .max_by(|a, b| a.1.profit.total_cmp(&b.1.profit));
    let (g_star, selection) = match best_single {
        Some((j, it)) if it.profit > greedy_profit => (it.profit, PackingList::from_indices(inst.num_items(), &[j])),
        _ => (greedy_profit, selection),
    };
    KpResult {
        g_star,
        selection,
        optimal: false,
    }
}

/// Exact DP when it fits in `budget`, greedy otherwise.
pub fn solve_kp_or_greedy(inst: &TtpInstance, budget: u64) -> Result<KpResult> {
    match solve_kp_with_budget(inst, budget) {
        Err(Error::KnapsackCapacity { .. } | Error::FractionalWeights(_)) => Ok(solve_kp_greedy(inst)),
        other => other,
    }
}

/// Items in decreasing profit/weight order, added while they fit.
pub fn greedy_packing(inst: &TtpInstance) -> PackingList {
    let items = inst.items();
    let mut order: Vec<usize> = (0..items.len()).collect();
    let ratio = |j: usize| {
        let it = &items[j];
        if it.weight == 0.0 {
            f64::INFINITY
        } else {
            it.profit / it.weight
        }
    };
    order.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)).then(a.cmp(&b)));
    let mut y = PackingList::empty(items.len());
    let mut load = 0.0;
    for j in order {
        if load + items[j].weight <= inst.capacity() {
            load += items[j].weight;
            y.set(j, true);
        }
    }
    y
}
