//! The co-evolutionary loop: a MAP-Elites archive (P1) and an entropy
//! population (P2) fed by the same bi-level offspring.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eax::EaxCrossover;
use crate::edo::{EdoPopulation, Entropy};
use crate::error::{Error, Result};
use crate::instance::{PackingList, Solution, Tour, TtpInstance};
use crate::kp::{self, greedy_packing};
use crate::packing::{optimize_packing, AdaptationState, PolicyKind, TerminationPolicy};
use crate::qd::{GridConfig, QdGrid};
use crate::tsp::{solve_tsp, TspGaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "coea")]
    CoEa,
    #[serde(rename = "qd")]
    QdOnly,
    #[serde(rename = "edo")]
    EdoOnly,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::CoEa => "coea",
            Mode::QdOnly => "qd",
            Mode::EdoOnly => "edo",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "coea" | "co-ea" => Ok(Mode::CoEa),
            "qd" => Ok(Mode::QdOnly),
            "edo" => Ok(Mode::EdoOnly),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZMinMode {
    /// z_min follows the best z seen so far.
    Dynamic,
    /// z_min is frozen after initialisation.
    Fixed,
}

impl FromStr for ZMinMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dynamic" => Ok(ZMinMode::Dynamic),
            "fixed" => Ok(ZMinMode::Fixed),
            other => Err(Error::InvalidArgument(format!("unknown z_min mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Global budget is `budget_multiplier * m` objective evaluations.
    pub budget_multiplier: u64,
    /// Quality fraction: z_min = Z_best - alpha * |Z_best|.
    pub alpha: f64,
    pub policy: PolicyKind,
    pub mu: usize,
    pub grid: GridConfig,
    pub mode: Mode,
    pub zmin_mode: ZMinMode,
    pub seed: u64,
    pub tsp: TspGaConfig,
    pub kp_memory_budget: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            budget_multiplier: 1_000_000,
            alpha: 0.1,
            policy: PolicyKind::Gamma2,
            mu: 50,
            grid: GridConfig::default(),
            mode: Mode::CoEa,
            zmin_mode: ZMinMode::Dynamic,
            seed: 0,
            tsp: TspGaConfig::default(),
            kp_memory_budget: kp::DEFAULT_MEMORY_BUDGET,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget_multiplier == 0 {
            return Err(Error::InvalidArgument("budget multiplier must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.mu == 0 {
            return Err(Error::InvalidArgument("mu must be >= 1".into()));
        }
        self.grid.validate()?;
        self.tsp.validate()
    }

    pub fn budget(&self, inst: &TtpInstance) -> u64 {
        self.budget_multiplier.saturating_mul(inst.num_items() as u64)
    }
}

/// Quality threshold derived from the best known objective value.
pub fn quality_threshold(z_best: f64, alpha: f64) -> f64 {
    z_best - alpha * z_best.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub evals: u64,
    pub z_best: f64,
    pub h_p2: f64,
    pub p2_size: usize,
    pub grid_occupancy: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<LogRecord>,
}

impl RunLog {
    /// `evals,z_best,h_p2,p2_size,grid_occupancy`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["evals", "z_best", "h_p2", "p2_size", "grid_occupancy"])?;
        for r in &self.records {
            w.serialize((r.evals, r.z_best, r.h_p2, r.p2_size, r.grid_occupancy))?;
        }
        w.flush().map_err(|e| Error::io("<run log csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// State after initialisation.
#[derive(Debug, Clone)]
pub struct Initialized {
    pub grid: QdGrid,
    pub population: EdoPopulation,
    pub tour_pool: Vec<Tour>,
    pub f_star: f64,
    pub g_star: f64,
    pub kp_optimal: bool,
    pub evaluations: u64,
    pub adaptation: AdaptationState,
}

/// Computes f* and g*, then builds P1 from the GA's final tours.
pub fn initialize<R: Rng + ?Sized>(inst: &TtpInstance, config: &RunConfig, rng: &mut R) -> Result<Initialized> {
    config.validate()?;
    let budget = config.budget(inst);
    let tsp = solve_tsp(inst, &config.tsp, rng)?;
    let kp = kp::solve_kp_or_greedy(inst, config.kp_memory_budget)?;
    let mut grid = QdGrid::new(tsp.f_star, kp.g_star, config.grid)?;
    let m = inst.num_items();
    let adaptation = AdaptationState::new(config.policy, m, 0, f64::NEG_INFINITY);
    let policy = adaptation.policy();
    let seed = greedy_packing(inst);

    let mut evaluations = 0;
    for tour in &tsp.tour_pool {
        if evaluations >= budget {
            break;
        }
        let out = optimize_packing(inst, tour, &seed, &policy, budget - evaluations, rng)?;
        evaluations += out.evaluations;
        let scores = out.scores.expect("budget was positive");
        grid.try_insert(Solution::from_parts(tour.clone(), out.packing, scores));
    }
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let z_best = grid.best_solution().map(Solution::z).expect("non-empty");
    let adaptation = AdaptationState::new(config.policy, m, evaluations, z_best);
    let population = EdoPopulation::new(config.mu, inst.num_cities(), m, quality_threshold(z_best, config.alpha))?;
    Ok(Initialized {
        grid,
        population,
        tour_pool: tsp.tour_pool,
        f_star: tsp.f_star,
        g_star: kp.g_star,
        kp_optimal: kp.optimal,
        evaluations,
        adaptation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Qd,
    Edo,
}

/// One parent: P1 or P2 with equal probability (P1 when P2 is empty),
/// then a uniform member.
pub fn pick_parent<'a, R: Rng + ?Sized>(
    grid: &'a QdGrid,
    pop: &'a EdoPopulation,
    rng: &mut R,
) -> (Source, &'a Solution) {
    if !pop.is_empty() && rng.random_bool(0.5) {
        (Source::Edo, pop.random_member(rng).expect("non-empty"))
    } else {
        (
            Source::Qd,
            grid.random_member(rng)
                .expect("grid is never empty after initialisation"),
        )
    }
}

pub fn select_parents<R: Rng + ?Sized>(grid: &QdGrid, pop: &EdoPopulation, rng: &mut R) -> (Solution, Solution) {
    let a = pick_parent(grid, pop, rng).1.clone();
    let b = pick_parent(grid, pop, rng).1.clone();
    (a, b)
}

/// EDO baseline selection: P2 once it is full, the frozen archive before.
fn select_parents_edo<R: Rng + ?Sized>(grid: &QdGrid, pop: &EdoPopulation, rng: &mut R) -> (Solution, Solution) {
    let mut one = || {
        if pop.is_full() {
            pop.random_member(rng).expect("full").clone()
        } else {
            grid.random_member(rng).expect("non-empty").clone()
        }
    };
    let a = one();
    let b = one();
    (a, b)
}

/// Drops items by increasing profit/weight until the packing fits.
fn repair(inst: &TtpInstance, mut y: PackingList) -> PackingList {
    let (_, mut weight) = inst.packing_profit_weight(&y);
    if weight <= inst.capacity() {
        return y;
    }
    let items = inst.items();
    let mut chosen: Vec<usize> = y.selected().collect();
    chosen.sort_by(|&a, &b| {
        let r = |j: usize| items[j].profit / items[j].weight.max(f64::MIN_POSITIVE);
        r(a).total_cmp(&r(b)).then(a.cmp(&b))
    });
    for j in chosen {
        if weight <= inst.capacity() {
            break;
        }
        y.set(j, false);
        weight -= items[j].weight;
    }
    y
}

/// Crossover on the tours, then the inner EA seeded with parent one's packing.
pub fn generate_offspring<R: Rng + ?Sized>(
    inst: &TtpInstance,
    eax: &EaxCrossover,
    parents: (&Solution, &Solution),
    policy: &TerminationPolicy,
    budget: u64,
    rng: &mut R,
) -> Result<(Solution, u64)> {
    let tour = eax.crossover(inst, parents.0.tour(), parents.1.tour(), rng);
    let seed = repair(inst, parents.0.packing().clone());
    let out = optimize_packing(inst, &tour, &seed, policy, budget, rng)?;
    match out.scores {
        Some(scores) => Ok((Solution::from_parts(tour, out.packing, scores), out.evaluations)),
        None => Ok((Solution::evaluate(inst, tour, out.packing)?, 1)),
    }
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: RunConfig,
    pub instance_name: String,
    pub log: RunLog,
    pub grid: QdGrid,
    pub population: EdoPopulation,
    pub f_star: f64,
    pub g_star: f64,
    pub kp_optimal: bool,
    pub budget: u64,
    pub init_evaluations: u64,
    pub evaluations: u64,
    pub z_best: f64,
    pub adaptation: AdaptationState,
    pub offspring: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSolution {
    /// 1-based city order.
    pub tour: Vec<usize>,
    /// 1-based selected items.
    pub items: Vec<usize>,
    pub f: f64,
    pub g: f64,
    pub z: f64,
}

impl From<&Solution> for BestSolution {
    fn from(s: &Solution) -> Self {
        BestSolution {
            tour: s.tour().to_one_based(),
            items: s.packing().selected().map(|j| j + 1).collect(),
            f: s.f(),
            g: s.g(),
            z: s.z(),
        }
    }
}

/// Final-state JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub instance: String,
    pub mode: Mode,
    pub policy: PolicyKind,
    pub seed: u64,
    pub config: RunConfig,
    pub budget: u64,
    pub evaluations: u64,
    pub init_evaluations: u64,
    pub offspring: u64,
    pub f_star: f64,
    pub g_star: f64,
    pub kp_optimal: bool,
    pub z_best: f64,
    pub z_min: f64,
    pub final_entropy: Entropy,
    pub p2_size: usize,
    pub grid_occupancy: usize,
    pub final_policy_value: f64,
    pub best: Option<BestSolution>,
}

impl RunResult {
    /// Best solution across both archives.
    pub fn best_solution(&self) -> Option<&Solution> {
        self.grid
            .solutions()
            .chain(self.population.members())
            .fold(None, |best: Option<&Solution>, s| match best {
                Some(b) if b.z() >= s.z() => Some(b),
                _ => Some(s),
            })
    }

    pub fn final_entropy(&self) -> Entropy {
        self.population.entropy_or_zero()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            instance: self.instance_name.clone(),
            mode: self.config.mode,
            policy: self.config.policy,
            seed: self.config.seed,
            config: self.config.clone(),
            budget: self.budget,
            evaluations: self.evaluations,
            init_evaluations: self.init_evaluations,
            offspring: self.offspring,
            f_star: self.f_star,
            g_star: self.g_star,
            kp_optimal: self.kp_optimal,
            z_best: self.z_best,
            z_min: self.population.z_min(),
            final_entropy: self.final_entropy(),
            p2_size: self.population.len(),
            grid_occupancy: self.grid.len(),
            final_policy_value: self.adaptation.value,
            best: self.best_solution().map(BestSolution::from),
        }
    }
}

fn snapshot(evals: u64, z_best: f64, grid: &QdGrid, pop: &EdoPopulation) -> LogRecord {
    LogRecord {
        evals,
        z_best,
        h_p2: pop.entropy_or_zero().total,
        p2_size: pop.len(),
        grid_occupancy: grid.len(),
    }
}

/// Runs one seeded experiment to budget exhaustion.
pub fn run(inst: &TtpInstance, config: &RunConfig) -> Result<RunResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = initialize(inst, config, &mut rng)?;
    let budget = config.budget(inst);
    let eax = EaxCrossover::new(inst);
    let Initialized {
        mut grid,
        population: mut pop,
        f_star,
        g_star,
        kp_optimal,
        evaluations: init_evaluations,
        mut adaptation,
        ..
    } = init;
    let mut evaluations = init_evaluations;
    let mut z_best = grid.best_solution().map(Solution::z).expect("non-empty");
    let mut log = RunLog {
        records: vec![snapshot(evaluations, z_best, &grid, &pop)],
    };
    let mut offspring_count = 0;

    while evaluations < budget {
        let parents = match config.mode {
            Mode::EdoOnly => select_parents_edo(&grid, &pop, &mut rng),
            _ => select_parents(&grid, &pop, &mut rng),
        };
        let (child, used) = generate_offspring(
            inst,
            &eax,
            (&parents.0, &parents.1),
            &adaptation.policy(),
            budget - evaluations,
            &mut rng,
        )?;
        evaluations += used;
        offspring_count += 1;

        if config.mode != Mode::EdoOnly {
            if grid.try_insert(child.clone()).stored() && child.z() > z_best {
                z_best = child.z();
            }
            debug_assert_eq!(Some(z_best), grid.best_solution().map(Solution::z));
        }
        if config.zmin_mode == ZMinMode::Dynamic {
            let t = quality_threshold(z_best, config.alpha);
            if t > pop.z_min() {
                pop.raise_threshold(t);
            }
        }
        if config.mode != Mode::QdOnly {
            let z = child.z();
            let accepted = pop.offer(child, &mut rng).accepted();
            if config.mode == Mode::EdoOnly && accepted && z > z_best {
                z_best = z;
                if config.zmin_mode == ZMinMode::Dynamic {
                    pop.raise_threshold(quality_threshold(z_best, config.alpha));
                }
            }
            debug_assert!(pop.tables_consistent());
        }

        if adaptation.advance(evaluations, z_best) > 0 {
            log.records.push(snapshot(evaluations, z_best, &grid, &pop));
        }
    }
    if log.records.last().is_some_and(|r| r.evals < evaluations) {
        log.records.push(snapshot(evaluations, z_best, &grid, &pop));
    }

    Ok(RunResult {
        config: config.clone(),
        instance_name: inst.name().to_string(),
        log,
        grid,
        population: pop,
        f_star,
        g_star,
        kp_optimal,
        budget,
        init_evaluations,
        evaluations,
        z_best,
        adaptation,
        offspring: offspring_count,
    })
}
