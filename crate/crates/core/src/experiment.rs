//! Experiment matrices, per-run artifacts and statistical comparison of
//! result sets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run, Mode, RunConfig, RunResult, RunSummary};
use crate::error::{Error, Result};
use crate::instance::TtpInstance;
use crate::packing::PolicyKind;
use crate::stats::{bonferroni, kruskal_wallis, mann_whitney_u, Sided, TestResult};

pub const INDEX_FILE: &str = "index.csv";

/// One (instance, mode, policy, seed) cell per combination.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub instances: Vec<PathBuf>,
    pub modes: Vec<Mode>,
    pub policies: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
    /// Mode, policy and seed are overwritten per cell.
    pub base: RunConfig,
    pub out_dir: PathBuf,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub instance: PathBuf,
    pub mode: Mode,
    pub policy: PolicyKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub instance: String,
    pub mode: Mode,
    pub policy: PolicyKind,
    pub seed: u64,
    pub status: String,
    /// Summary file name, relative to the output directory.
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactPaths {
    pub log: PathBuf,
    pub map: PathBuf,
    pub frequencies: PathBuf,
    pub summary: PathBuf,
}

pub fn artifact_stem(instance: &str, mode: Mode, policy: PolicyKind, seed: u64) -> String {
    let clean: String = instance
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{clean}_{mode}_{policy}_s{seed}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes `<stem>.log.csv`, `.map.csv`, `.freq.csv` and `.summary.json`.
pub fn write_artifacts(result: &RunResult, out_dir: &Path) -> Result<ArtifactPaths> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let c = &result.config;
    let stem = artifact_stem(&result.instance_name, c.mode, c.policy, c.seed);
    let paths = ArtifactPaths {
        log: out_dir.join(format!("{stem}.log.csv")),
        map: out_dir.join(format!("{stem}.map.csv")),
        frequencies: out_dir.join(format!("{stem}.freq.csv")),
        summary: out_dir.join(format!("{stem}.summary.json")),
    };
    result.log.write_csv(create(&paths.log)?)?;
    result.grid.write_map_csv(create(&paths.map)?)?;
    result.population.write_frequency_csv(create(&paths.frequencies)?)?;
    serde_json::to_writer_pretty(create(&paths.summary)?, &result.summary())?;
    Ok(paths)
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(Error::InvalidArgument(format!("need at least one {what}")));
        if self.instances.is_empty() {
            return empty("instance");
        }
        if self.modes.is_empty() {
            return empty("mode");
        }
        if self.policies.is_empty() {
            return empty("policy");
        }
        if self.seeds.is_empty() {
            return empty("seed");
        }
        self.base.validate()
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for instance in &self.instances {
            for &mode in &self.modes {
                for &policy in &self.policies {
                    for &seed in &self.seeds {
                        cells.push(Cell {
                            instance: instance.clone(),
                            mode,
                            policy,
                            seed,
                        });
                    }
                }
            }
        }
        cells
    }
}

fn run_cell(spec: &ExperimentSpec, cell: &Cell, loaded: &BTreeMap<PathBuf, Result<TtpInstance, String>>) -> IndexEntry {
    let mut entry = IndexEntry {
        instance: cell.instance.display().to_string(),
        mode: cell.mode,
        policy: cell.policy,
        seed: cell.seed,
        status: "ok".into(),
        summary: String::new(),
    };
    let outcome = match &loaded[&cell.instance] {
        Err(msg) => Err(msg.clone()),
        Ok(inst) => {
            let config = RunConfig {
                mode: cell.mode,
                policy: cell.policy,
                seed: cell.seed,
                ..spec.base.clone()
            };
            entry.instance = inst.name().to_string();
            run(inst, &config)
                .and_then(|r| write_artifacts(&r, &spec.out_dir))
                .map_err(|e| e.to_string())
        }
    };
    match outcome {
        Ok(paths) => {
            let name = paths.summary.file_name().expect("summary has a file name");
            entry.summary = name.to_string_lossy().into_owned();
        }
        Err(msg) => entry.status = format!("failed: {msg}"),
    }
    entry
}

/// Runs every cell on a pool of `jobs` workers, then writes the index.
/// Failed cells are recorded in the index; the others still run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<IndexEntry>> {
    spec.validate()?;
    std::fs::create_dir_all(&spec.out_dir).map_err(|e| Error::io(&spec.out_dir, e))?;
    let loaded: BTreeMap<PathBuf, Result<TtpInstance, String>> = spec
        .instances
        .iter()
        .map(|p| (p.clone(), TtpInstance::load(p).map_err(|e| e.to_string())))
        .collect();
    let cells = spec.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let entries: Vec<IndexEntry> = pool.install(|| cells.par_iter().map(|c| run_cell(spec, c, &loaded)).collect());

    let index = spec.out_dir.join(INDEX_FILE);
    let mut w = csv::Writer::from_writer(create(&index)?);
    for e in &entries {
        w.serialize(e)?;
    }
    w.flush().map_err(|e| Error::io(&index, e))?;
    Ok(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// Final entropy of P2.
    H,
    /// Best objective value.
    Z,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h" | "entropy" => Ok(Metric::H),
            "z" => Ok(Metric::Z),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

impl Metric {
    pub fn of(self, s: &RunSummary) -> f64 {
        match self {
            Metric::H => s.final_entropy.total,
            Metric::Z => s.best.as_ref().map_or(s.z_best, |b| b.z),
        }
    }
}

pub fn load_summaries(pattern: &str) -> Result<Vec<RunSummary>> {
    let paths = glob::glob(pattern).map_err(|e| Error::InvalidArgument(format!("bad glob {pattern:?}: {e}")))?;
    let mut out = Vec::new();
    for p in paths {
        let p = p.map_err(|e| {
            let path = e.path().to_path_buf();
            Error::io(path, e.into())
        })?;
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        out.push(serde_json::from_str(&text)?);
    }
    Ok(out)
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        (v[k - 1] + v[k]) / 2.0
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pairwise outcome for group `i` against group `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Better,
    Worse,
    NoDifference,
}

impl Relation {
    pub fn symbol(self) -> char {
        match self {
            Relation::Better => '+',
            Relation::Worse => '-',
            Relation::NoDifference => '*',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub label: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// `(other group index, relation)`, 1-based indices.
    pub relations: Vec<(usize, Relation)>,
}

impl GroupStats {
    /// Per-group notation such as `2+3*`.
    pub fn notation(&self) -> String {
        self.relations
            .iter()
            .map(|(j, r)| format!("{j}{}", r.symbol()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub groups: Vec<GroupStats>,
    pub omnibus: Option<TestResult>,
    /// `(i, j, p)` for each tested pair, 1-based.
    pub pairwise: Vec<(usize, usize, f64)>,
}

/// Higher values are better. Two groups use one Mann-Whitney test at
/// `alpha`; more groups add a Kruskal-Wallis omnibus test and Bonferroni
/// corrected pairwise tests.
pub fn compare_samples(groups: &[(String, Vec<f64>)], alpha: f64) -> Result<Comparison> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument("need at least two groups to compare".into()));
    }
    for (label, xs) in groups {
        if xs.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "group {label:?} needs at least 2 samples, has {}",
                xs.len()
            )));
        }
    }
    let k = groups.len();
    let omnibus = if k > 2 {
        let samples: Vec<Vec<f64>> = groups.iter().map(|(_, xs)| xs.clone()).collect();
        Some(kruskal_wallis(&samples)?)
    } else {
        None
    };
    let mut pairwise = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let r = mann_whitney_u(&groups[i].1, &groups[j].1, Sided::TwoSided)?;
            pairwise.push((i + 1, j + 1, r.p_value));
        }
    }
    let ps: Vec<f64> = pairwise.iter().map(|t| t.2).collect();
    let significant = bonferroni(&ps, alpha);
    let mut stats: Vec<GroupStats> = groups
        .iter()
        .map(|(label, xs)| GroupStats {
            label: label.clone(),
            n: xs.len(),
            mean: mean(xs),
            median: median(xs),
            relations: Vec::new(),
        })
        .collect();
    for (&(i, j, _), &sig) in pairwise.iter().zip(&significant) {
        let (a, b) = (&stats[i - 1], &stats[j - 1]);
        let i_better = (a.median, a.mean) > (b.median, b.mean);
        let (ri, rj) = match (sig, i_better) {
            (false, _) => (Relation::NoDifference, Relation::NoDifference),
            (true, true) => (Relation::Better, Relation::Worse),
            (true, false) => (Relation::Worse, Relation::Better),
        };
        stats[i - 1].relations.push((j, ri));
        stats[j - 1].relations.push((i, rj));
    }
    for s in &mut stats {
        s.relations.sort_by_key(|r| r.0);
    }
    Ok(Comparison {
        groups: stats,
        omnibus,
        pairwise,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub metric: Metric,
    pub labels: Vec<String>,
    /// Keyed by instance name.
    pub instances: BTreeMap<String, Comparison>,
}

/// Groups each side's summaries by instance and compares per instance.
/// Every side must cover the same instances.
pub fn compare_summary_sets(sides: &[(String, Vec<RunSummary>)], metric: Metric, alpha: f64) -> Result<CompareReport> {
    let by_instance: Vec<BTreeMap<String, Vec<f64>>> = sides
        .iter()
        .map(|(_, runs)| {
            let mut m: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for s in runs {
                m.entry(s.instance.clone()).or_default().push(metric.of(s));
            }
            m
        })
        .collect();
    let Some(first) = by_instance.first() else {
        return Err(Error::InvalidArgument("no result sets given".into()));
    };
    let mut problems = Vec::new();
    for (k, m) in by_instance.iter().enumerate().skip(1) {
        for name in first.keys().filter(|n| !m.contains_key(*n)) {
            problems.push(format!("{name} missing from {}", sides[k].0));
        }
        for name in m.keys().filter(|n| !first.contains_key(*n)) {
            problems.push(format!("{name} missing from {}", sides[0].0));
        }
    }
    if !problems.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "mismatched instances: {}",
            problems.join("; ")
        )));
    }
    let mut instances = BTreeMap::new();
    for name in first.keys() {
        let groups: Vec<(String, Vec<f64>)> = sides
            .iter()
            .zip(&by_instance)
            .map(|((label, _), m)| (label.clone(), m[name].clone()))
            .collect();
        instances.insert(name.clone(), compare_samples(&groups, alpha)?);
    }
    Ok(CompareReport {
        metric,
        labels: sides.iter().map(|(l, _)| l.clone()).collect(),
        instances,
    })
}

impl CompareReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, l) in self.labels.iter().enumerate() {
            let _ = writeln!(s, "({}) {l}", k + 1);
        }
        let _ = writeln!(s, "metric: {:?}", self.metric);
        for (name, c) in &self.instances {
            let _ = writeln!(s, "{name}");
            if let Some(o) = &c.omnibus {
                let _ = writeln!(s, "  kruskal-wallis H = {:.4}, p = {:.4}", o.statistic, o.p_value);
            }
            for (i, j, p) in &c.pairwise {
                let _ = writeln!(s, "  mann-whitney ({i}) vs ({j}): p = {p:.4}");
            }
            for (k, g) in c.groups.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "  ({}) n={} mean={:.6} median={:.6} {}",
                    k + 1,
                    g.n,
                    g.mean,
                    g.median,
                    g.notation()
                );
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn groups(sets: &[&[f64]]) -> Vec<(String, Vec<f64>)> {
        sets.iter()
            .enumerate()
            .map(|(k, xs)| (format!("g{}", k + 1), xs.to_vec()))
            .collect()
    }

    #[test]
    fn identical_sets_show_no_difference() {
        let c = compare_samples(&groups(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]), 0.05).unwrap();
        assert_eq!(c.groups[0].notation(), "2*");
        assert_eq!(c.groups[1].notation(), "1*");
    }

    #[test]
    fn separated_sets_favour_the_larger() {
        let a: Vec<f64> = (1..=10).map(f64::from).collect();
        let b: Vec<f64> = (11..=20).map(f64::from).collect();
        let c = compare_samples(&groups(&[&a, &b]), 0.05).unwrap();
        assert!(c.pairwise[0].2 <= 0.001);
        assert_eq!(c.groups[1].notation(), "1+");
        assert_eq!(c.groups[0].notation(), "2-");
    }

    #[test]
    fn three_groups_use_corrected_threshold() {
        // 5+5 exact two-sided minimum p is 2/252, below 0.05/3.
        let low = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mid = [6.0, 7.0, 8.0, 9.0, 10.0];
        let high = [11.0, 12.0, 13.0, 14.0, 15.0];
        let c = compare_samples(&groups(&[&low, &mid, &high]), 0.05).unwrap();
        assert!(c.omnibus.is_some());
        assert_eq!(c.groups[2].notation(), "1+2+");
        assert_eq!(c.groups[0].notation(), "2-3-");
    }

    #[test]
    fn overlap_that_passes_alpha_but_not_alpha_over_three() {
        // Exact two-sided p for these 4+4 sets is 0.0286.
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let two = compare_samples(&groups(&[&a, &b]), 0.05).unwrap();
        assert_eq!(two.groups[1].notation(), "1+");
        let three = compare_samples(&groups(&[&a, &b, &[4.5, 5.5, 6.5, 7.5]]), 0.05).unwrap();
        assert_eq!(three.groups[1].notation(), "1*3*");
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(compare_samples(&groups(&[&[1.0], &[2.0, 3.0]]), 0.05).is_err());
    }

    #[test]
    fn stems_are_deterministic() {
        assert_eq!(
            artifact_stem("eil51 n50", Mode::CoEa, PolicyKind::Gamma2, 3),
            "eil51_n50_coea_gamma2_s3"
        );
    }
}
