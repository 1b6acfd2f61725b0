//! Rank-based tests for comparing result sets.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest combined sample size handled by exact enumeration.
pub const EXACT_LIMIT: usize = 12;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    ExactEnumeration,
    NormalApproximation,
    ChiSquareApproximation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub sizes: Vec<usize>,
}

/// Alternative hypothesis for the two-sample test, stated for `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sided {
    /// `a` tends to be smaller than `b`.
    Less,
    /// `a` tends to be larger than `b`.
    Greater,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MwMethod {
    /// Exact when the combined size is at most [`EXACT_LIMIT`].
    #[default]
    Auto,
    Exact,
    Normal,
}

/// Midranks (1-based) of the pooled sample, plus the tie correction
/// term sum(t^3 - t).
fn midranks(pooled: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = r;
        }
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    (ranks, ties)
}

fn check_samples(groups: &[&[f64]]) -> Result<()> {
    for g in groups {
        if g.is_empty() {
            return Err(Error::InvalidArgument("every sample must be non-empty".into()));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("samples must be finite".into()));
        }
    }
    Ok(())
}

/// Kruskal-Wallis H with tie correction and a chi-square p-value.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument("need at least two groups".into()));
    }
    let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
    check_samples(&refs)?;
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let n = pooled.len() as f64;
    let (ranks, ties) = midranks(&pooled);
    let correction = 1.0 - ties / (n * n * n - n);
    let result = |statistic, p_value| TestResult {
        statistic,
        p_value,
        method: TestMethod::ChiSquareApproximation,
        sizes: sizes.clone(),
    };
    if correction <= EPS {
        return Ok(result(0.0, 1.0));
    }
    let mut offset = 0;
    let mut sum = 0.0;
    for &k in &sizes {
        let r: f64 = ranks[offset..offset + k].iter().sum();
        sum += r * r / k as f64;
        offset += k;
    }
    let h = ((12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction).max(0.0);
    let chi = ChiSquared::new((groups.len() - 1) as f64).expect("k >= 2");
    Ok(result(h, chi.sf(h).clamp(0.0, 1.0)))
}

pub fn mann_whitney_u(a: &[f64], b: &[f64], sided: Sided) -> Result<TestResult> {
    mann_whitney_u_with(a, b, sided, MwMethod::Auto)
}

/// U counts pairs with `a` above `b`, ties as one half.
pub fn mann_whitney_u_with(a: &[f64], b: &[f64], sided: Sided, method: MwMethod) -> Result<TestResult> {
    check_samples(&[a, b])?;
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let shift = (na * (na + 1)) as f64 / 2.0;
    let u = ranks[..na].iter().sum::<f64>() - shift;
    let exact = match method {
        MwMethod::Auto => na + nb <= EXACT_LIMIT,
        MwMethod::Exact => true,
        MwMethod::Normal => false,
    };
    if exact && na + nb > 24 {
        return Err(Error::InvalidArgument(
            "exact enumeration limited to 24 observations".into(),
        ));
    }
    let p_value = if exact {
        exact_p(&ranks, na, u, sided, shift)
    } else {
        normal_p(na as f64, nb as f64, u, ties, sided)
    };
    Ok(TestResult {
        statistic: u,
        p_value: p_value.clamp(0.0, 1.0),
        method: if exact {
            TestMethod::ExactEnumeration
        } else {
            TestMethod::NormalApproximation
        },
        sizes: vec![na, nb],
    })
}

/// Enumerates every assignment of the pooled midranks to group `a`.
fn exact_p(ranks: &[f64], na: usize, u_obs: f64, sided: Sided, shift: f64) -> f64 {
    let n = ranks.len();
    let mean = (na * (n - na)) as f64 / 2.0;
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let r: f64 = (0..n).filter(|&k| mask & (1 << k) != 0).map(|k| ranks[k]).sum();
        let u = r - shift;
        total += 1;
        let extreme = match sided {
            Sided::Less => u <= u_obs + EPS,
            Sided::Greater => u >= u_obs - EPS,
            Sided::TwoSided => (u - mean).abs() >= (u_obs - mean).abs() - EPS,
        };
        hits += extreme as u64;
    }
    hits as f64 / total as f64
}

fn normal_p(na: f64, nb: f64, u: f64, ties: f64, sided: Sided) -> f64 {
    let n = na + nb;
    let mean = na * nb / 2.0;
    let var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= EPS {
        return 1.0;
    }
    let sd = var.sqrt();
    let z = Normal::standard();
    match sided {
        Sided::Less => z.cdf((u - mean + 0.5) / sd),
        Sided::Greater => z.sf((u - mean - 0.5) / sd),
        Sided::TwoSided => {
            let d = ((u - mean).abs() - 0.5).max(0.0);
            2.0 * z.sf(d / sd)
        }
    }
}

/// `p_i < alpha / count` for each p-value.
pub fn bonferroni(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let threshold = alpha / p_values.len().max(1) as f64;
    p_values.iter().map(|&p| p < threshold).collect()
}
