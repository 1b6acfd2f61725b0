//! MAP-Elites archive over the (tour length, profit) behaviour space.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Solution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub delta1: usize,
    pub delta2: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            alpha1: 0.05,
            alpha2: 0.20,
            delta1: 20,
            delta2: 20,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha1 > 0.0 && self.alpha2 > 0.0 && self.alpha2 <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "grid window thresholds out of range: alpha1={} alpha2={}",
                self.alpha1, self.alpha2
            )));
        }
        if self.delta1 == 0 || self.delta2 == 0 {
            return Err(Error::InvalidArgument("grid resolution must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InsertOutcome {
    Inserted,
    Replaced,
    RejectedWorse,
    OutOfWindow,
}

impl InsertOutcome {
    pub fn stored(self) -> bool {
        matches!(self, InsertOutcome::Inserted | InsertOutcome::Replaced)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    /// 1-based along the tour-length axis.
    pub i: usize,
    /// 1-based along the profit axis.
    pub j: usize,
    pub f: f64,
    pub g: f64,
    pub z: f64,
}

/// δ1 × δ2 elitist archive anchored at (f*, g*).
#[derive(Debug, Clone)]
pub struct QdGrid {
    f_star: f64,
    g_star: f64,
    config: GridConfig,
    f_width: f64,
    g_width: f64,
    g_low: f64,
    cells: Vec<Option<Solution>>,
    occupied: Vec<usize>,
}

/// Locates `x` among `count` half-open bins starting at `low`, the last
/// one closed. Bin bounds are always `low + k * width`.
fn bin(x: f64, low: f64, width: f64, count: usize) -> Option<usize> {
    let bound = |k: usize| low + k as f64 * width;
    if x < low || x > bound(count) {
        return None;
    }
    let mut k = (((x - low) / width).floor() as usize).min(count - 1);
    while k > 0 && x < bound(k) {
        k -= 1;
    }
    while k + 1 < count && x >= bound(k + 1) {
        k += 1;
    }
    Some(k)
}

impl QdGrid {
    pub fn new(f_star: f64, g_star: f64, config: GridConfig) -> Result<Self> {
        config.validate()?;
        if !(f_star > 0.0 && g_star > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid needs positive references, got f*={f_star} g*={g_star}"
            )));
        }
        Ok(QdGrid {
            f_star,
            g_star,
            config,
            f_width: config.alpha1 * f_star / config.delta1 as f64,
            g_width: config.alpha2 * g_star / config.delta2 as f64,
            g_low: (1.0 - config.alpha2) * g_star,
            cells: vec![None; config.delta1 * config.delta2],
            occupied: Vec::new(),
        })
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn g_star(&self) -> f64 {
        self.g_star
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    /// Interval `[lo, hi)` of tour lengths for 1-based column `i`.
    pub fn f_bounds(&self, i: usize) -> (f64, f64) {
        let lo = |k: usize| self.f_star + k as f64 * self.f_width;
        (lo(i - 1), lo(i))
    }

    /// Interval `[lo, hi)` of profits for 1-based row `j`.
    pub fn g_bounds(&self, j: usize) -> (f64, f64) {
        let lo = |k: usize| self.g_low + k as f64 * self.g_width;
        (lo(j - 1), lo(j))
    }

    /// 1-based cell of a behaviour descriptor, `None` outside the window.
    /// Tour lengths below f* fall into the first column.
    pub fn cell_index(&self, f: f64, g: f64) -> Option<(usize, usize)> {
        let f = f.max(self.f_star);
        let i = bin(f, self.f_star, self.f_width, self.config.delta1)?;
        let j = bin(g, self.g_low, self.g_width, self.config.delta2)?;
        Some((i + 1, j + 1))
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.config.delta2 + (j - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&Solution> {
        self.cells[self.slot(i, j)].as_ref()
    }

    pub fn try_insert(&mut self, candidate: Solution) -> InsertOutcome {
        let Some((i, j)) = self.cell_index(candidate.f(), candidate.g()) else {
            return InsertOutcome::OutOfWindow;
        };
        let k = self.slot(i, j);
        match &mut self.cells[k] {
            None => {
                self.cells[k] = Some(candidate);
                self.occupied.push(k);
                InsertOutcome::Inserted
            }
            Some(incumbent) if candidate.z() > incumbent.z() => {
                *incumbent = candidate;
                InsertOutcome::Replaced
            }
            Some(_) => InsertOutcome::RejectedWorse,
        }
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.cells.len()
    }

    /// Occupied solutions in insertion order of their cells.
    pub fn solutions(&self) -> impl Iterator<Item = &Solution> {
        self.occupied.iter().map(|&k| self.cells[k].as_ref().expect("occupied"))
    }

    pub fn random_member<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&Solution> {
        if self.occupied.is_empty() {
            return None;
        }
        let k = self.occupied[rng.random_range(0..self.occupied.len())];
        self.cells[k].as_ref()
    }

    /// Highest-z occupant (first in cell order on ties).
    pub fn best_solution(&self) -> Option<&Solution> {
        self.cells
            .iter()
            .flatten()
            .fold(None, |best: Option<&Solution>, s| match best {
                Some(b) if b.z() >= s.z() => Some(b),
                _ => Some(s),
            })
    }

    /// One record per occupied cell, ordered by (i, j).
    pub fn export_map(&self) -> Vec<CellRecord> {
        let d2 = self.config.delta2;
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(k, c)| {
                c.as_ref().map(|s| CellRecord {
                    i: k / d2 + 1,
                    j: k % d2 + 1,
                    f: s.f(),
                    g: s.g(),
                    z: s.z(),
                })
            })
            .collect()
    }

    /// Map CSV: `i,j,f,g,z`.
    pub fn write_map_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "f", "g", "z"])?;
        for r in self.export_map() {
            w.serialize((r.i, r.j, r.f, r.g, r.z))?;
        }
        w.flush().map_err(|e| Error::io("<map csv>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{PackingList, Scores, Tour};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn sol(f: f64, g: f64, z: f64) -> Solution {
        Solution::from_parts(Tour::identity(3), PackingList::empty(1), Scores { f, g, z })
    }

    fn grid(f_star: f64, g_star: f64, a1: f64, a2: f64, d: usize) -> QdGrid {
        QdGrid::new(
            f_star,
            g_star,
            GridConfig {
                alpha1: a1,
                alpha2: a2,
                delta1: d,
                delta2: d,
            },
        )
        .unwrap()
    }

    #[test]
    fn cell_index_examples() {
        let g = grid(1000.0, 500.0, 0.1, 0.2, 10);
        assert_eq!(g.cell_index(1024.9, 500.0), Some((3, 10)));
        assert_eq!(g.cell_index(1000.0, 455.0), Some((1, 6)));
        assert_eq!(g.cell_index(1000.0, 450.0), Some((1, 6)));
        assert_eq!(g.cell_index(1000.0, 400.0), Some((1, 1)));
        assert_eq!(g.cell_index(1100.0, 400.0), Some((10, 1)));
        assert_eq!(g.cell_index(1200.0, 480.0), None);
        assert_eq!(g.cell_index(1000.0, 399.9), None);
        assert_eq!(g.cell_index(1000.0, 500.1), None);
        assert_eq!(g.cell_index(900.0, 480.0), Some((1, 9)));
    }

    #[test]
    fn rejects_bad_references() {
        assert!(QdGrid::new(0.0, 1.0, GridConfig::default()).is_err());
        let bad = GridConfig {
            delta1: 0,
            ..GridConfig::default()
        };
        assert!(QdGrid::new(1.0, 1.0, bad).is_err());
    }

    #[test]
    fn insert_outcomes() {
        let mut g = grid(1000.0, 500.0, 0.1, 0.2, 10);
        assert_eq!(g.try_insert(sol(1001.0, 499.0, 10.0)), InsertOutcome::Inserted);
        assert_eq!(g.try_insert(sol(1002.0, 498.0, 12.0)), InsertOutcome::Replaced);
        assert_eq!(g.try_insert(sol(1003.0, 497.0, 11.0)), InsertOutcome::RejectedWorse);
        assert_eq!(g.try_insert(sol(1003.0, 497.0, 12.0)), InsertOutcome::RejectedWorse);
        assert_eq!(g.try_insert(sol(2000.0, 497.0, 99.0)), InsertOutcome::OutOfWindow);
        assert_eq!(g.len(), 1);
        assert_eq!(g.get(1, 10).unwrap().z(), 12.0);
    }

    #[test]
    fn best_and_export() {
        let mut g = grid(1000.0, 500.0, 0.1, 0.2, 10);
        assert!(g.best_solution().is_none());
        assert!(g.export_map().is_empty());
        g.try_insert(sol(1001.0, 499.0, 10.0));
        assert_eq!(g.best_solution().unwrap().z(), 10.0);
        g.try_insert(sol(1051.0, 451.0, 30.0));
        g.try_insert(sol(1099.0, 401.0, 20.0));
        let recs = g.export_map();
        assert_eq!(recs.len(), 3);
        assert_eq!(g.best_solution().unwrap().z(), 30.0);
        for r in &recs {
            assert_eq!(g.cell_index(r.f, r.g), Some((r.i, r.j)));
        }
        let mut buf = Vec::new();
        g.write_map_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("i,j,f,g,z\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn shadow_map_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut g = grid(1000.0, 500.0, 0.1, 0.2, 7);
        let mut shadow: HashMap<(usize, usize), f64> = HashMap::new();
        let mut best = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let s = sol(
                rng.random_range(990.0..1110.0),
                rng.random_range(390.0..505.0),
                rng.random_range(-50.0..50.0),
            );
            if let Some(c) = g.cell_index(s.f(), s.g()) {
                let e = shadow.entry(c).or_insert(f64::NEG_INFINITY);
                *e = e.max(s.z());
                best = best.max(s.z());
            }
            g.try_insert(s);
            assert!(g.len() <= g.capacity());
        }
        assert_eq!(g.len(), shadow.len());
        for (&(i, j), &z) in &shadow {
            assert_eq!(g.get(i, j).unwrap().z(), z);
        }
        assert_eq!(g.best_solution().unwrap().z(), best);
    }

    #[test]
    fn window_tiles_without_gaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = grid(1234.5, 678.9, 0.05, 0.2, 20);
        for _ in 0..10_000 {
            let f = rng.random_range(1234.5..=1234.5 * 1.05);
            let gg = rng.random_range(678.9 * 0.8..=678.9);
            let (i, j) = g.cell_index(f, gg).expect("inside window");
            let (flo, fhi) = g.f_bounds(i);
            let (glo, ghi) = g.g_bounds(j);
            assert!(f >= flo && (f < fhi || i == 20));
            assert!(gg >= glo && (gg < ghi || j == 20));
        }
        // exact bounds land in the upper cell
        for k in 1..20 {
            assert_eq!(g.cell_index(g.f_bounds(k).1, 678.9).unwrap().0, k + 1);
            assert_eq!(g.cell_index(1234.5, g.g_bounds(k).1).unwrap().1, k + 1);
        }
        assert_eq!(g.cell_index(g.f_bounds(20).1, g.g_bounds(20).1), Some((20, 20)));
    }
}
