//! C ABI over the `ttpcd` library.
//!
//! Instances and run results are opaque heap handles released with their
//! `_free` function. Every fallible call returns a [`TtpcdStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`ttpcd_last_error_message`]. Tours cross the boundary 1-based, packings
//! as one byte per item (0 or 1).

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ttpcd::engine::{self, Mode, RunConfig, RunResult, ZMinMode};
use ttpcd::experiment::write_artifacts;
use ttpcd::packing::PolicyKind;
use ttpcd::qd::GridConfig;
use ttpcd::tsp::TspGaConfig;
use ttpcd::{Error, PackingList, Solution, Tour, TtpInstance};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtpcdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Io = 4,
    Infeasible = 5,
    InvalidArgument = 6,
    EmptyGrid = 7,
    KnapsackCapacity = 8,
    BufferTooSmall = 9,
    OutOfRange = 10,
    Internal = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtpcdMode {
    Coea = 0,
    QdOnly = 1,
    EdoOnly = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtpcdPolicy {
    Fixed = 0,
    Gamma1 = 1,
    Gamma2 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtpcdZminMode {
    Dynamic = 0,
    Fixed = 1,
}

/// Opaque instance handle.
pub struct TtpcdInstance(TtpInstance);

/// Opaque run result handle.
pub struct TtpcdRunResult(RunResult);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtpcdScores {
    /// Tour length.
    pub f: f64,
    /// Packing profit.
    pub g: f64,
    /// TTP objective.
    pub z: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtpcdEntropy {
    pub edge: f64,
    pub item: f64,
    pub total: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtpcdLogRecord {
    pub evals: u64,
    pub z_best: f64,
    pub h_p2: f64,
    pub p2_size: usize,
    pub grid_occupancy: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtpcdRunConfig {
    pub budget_multiplier: u64,
    pub alpha: f64,
    pub policy: TtpcdPolicy,
    pub mu: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub delta1: usize,
    pub delta2: usize,
    pub mode: TtpcdMode,
    pub zmin_mode: TtpcdZminMode,
    pub seed: u64,
    pub tsp_population: usize,
    pub tsp_crossovers_per_city: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> TtpcdStatus {
    match err {
        Error::Parse(_) => TtpcdStatus::Parse,
        Error::Io { .. } => TtpcdStatus::Io,
        Error::Infeasible { .. } => TtpcdStatus::Infeasible,
        Error::KnapsackCapacity { .. } => TtpcdStatus::KnapsackCapacity,
        Error::EmptyGrid => TtpcdStatus::EmptyGrid,
        _ => TtpcdStatus::InvalidArgument,
    }
}

fn fail(status: TtpcdStatus, msg: impl Into<String>) -> TtpcdStatus {
    set_error(msg);
    status
}

fn from_core(err: Error) -> TtpcdStatus {
    fail(status_of(&err), err.to_string())
}

/// Runs `f`, turning panics into [`TtpcdStatus::Internal`].
fn guard(f: impl FnOnce() -> TtpcdStatus) -> TtpcdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(TtpcdStatus::Internal, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, TtpcdStatus> {
    if p.is_null() {
        return Err(fail(TtpcdStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TtpcdStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], TtpcdStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(TtpcdStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! handle {
    ($p:expr, $what:literal) => {
        match unsafe { $p.as_ref() } {
            Some(h) => h,
            None => return fail(TtpcdStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn ttpcd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ttpcd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub unsafe extern "C" fn ttpcd_instance_parse(text: *const c_char, out: *mut *mut TtpcdInstance) -> TtpcdStatus {
    guard(|| {
        if out.is_null() {
            return fail(TtpcdStatus::NullPointer, "out is null");
        }
        let text = try_ffi!(str_arg(text, "text"));
        match TtpInstance::parse(text) {
            Ok(inst) => {
                *out = Box::into_raw(Box::new(TtpcdInstance(inst)));
                TtpcdStatus::Ok
            }
            Err(e) => from_core(e.into()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ttpcd_instance_load(path: *const c_char, out: *mut *mut TtpcdInstance) -> TtpcdStatus {
    guard(|| {
        if out.is_null() {
            return fail(TtpcdStatus::NullPointer, "out is null");
        }
        let path = try_ffi!(str_arg(path, "path"));
        match TtpInstance::load(path) {
            Ok(inst) => {
                *out = Box::into_raw(Box::new(TtpcdInstance(inst)));
                TtpcdStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Accepts null.
#[no_mangle]
pub unsafe extern "C" fn ttpcd_instance_free(inst: *mut TtpcdInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ttpcd_instance_num_cities(inst: *const TtpcdInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.0.num_cities())
}

/// 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ttpcd_instance_num_items(inst: *const TtpcdInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.0.num_items())
}

unsafe fn read_solution(
    inst: &TtpInstance,
    tour: *const usize,
    tour_len: usize,
    packing: *const u8,
    packing_len: usize,
) -> Result<(Tour, PackingList), TtpcdStatus> {
    let labels = slice_arg(tour, tour_len, "tour")?;
    let bits = slice_arg(packing, packing_len, "packing")?;
    if tour_len != inst.num_cities() {
        return Err(fail(
            TtpcdStatus::InvalidArgument,
            format!("tour has {tour_len} cities, instance has {}", inst.num_cities()),
        ));
    }
    if packing_len != inst.num_items() {
        return Err(fail(
            TtpcdStatus::InvalidArgument,
            format!(
                "packing has {packing_len} entries, instance has {} items",
                inst.num_items()
            ),
        ));
    }
    let tour = Tour::from_one_based(labels).map_err(from_core)?;
    Ok((tour, PackingList::from_bits(bits.iter().map(|&b| b != 0).collect())))
}

/// Scores a 1-based tour starting at city 1 and a 0/1 packing.
#[no_mangle]
pub unsafe extern "C" fn ttpcd_evaluate(
    inst: *const TtpcdInstance,
    tour: *const usize,
    tour_len: usize,
    packing: *const u8,
    packing_len: usize,
    out: *mut TtpcdScores,
) -> TtpcdStatus {
    guard(|| {
        let inst = &handle!(inst, "instance").0;
        if out.is_null() {
            return fail(TtpcdStatus::NullPointer, "out is null");
        }
        let (tour, packing) = try_ffi!(read_solution(inst, tour, tour_len, packing, packing_len));
        match Solution::evaluate(inst, tour, packing) {
            Ok(s) => {
                *out = TtpcdScores {
                    f: s.f(),
                    g: s.g(),
                    z: s.z(),
                };
                TtpcdStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Optimal knapsack profit. `selection` may be null; otherwise it receives
/// `selection_len` (= number of items) 0/1 bytes.
#[no_mangle]
pub unsafe extern "C" fn ttpcd_solve_kp(
    inst: *const TtpcdInstance,
    g_star: *mut f64,
    selection: *mut u8,
    selection_len: usize,
) -> TtpcdStatus {
    guard(|| {
        let inst = &handle!(inst, "instance").0;
        if g_star.is_null() {
            return fail(TtpcdStatus::NullPointer, "g_star is null");
        }
        if !selection.is_null() && selection_len < inst.num_items() {
            return fail(
                TtpcdStatus::BufferTooSmall,
                format!("selection needs {} bytes", inst.num_items()),
            );
        }
        match ttpcd::kp::solve_kp(inst) {
            Ok(r) => {
                *g_star = r.g_star;
                if !selection.is_null() {
                    for (j, &b) in r.selection.bits().iter().enumerate() {
                        *selection.add(j) = b as u8;
                    }
                }
                TtpcdStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

#[no_mangle]
pub extern "C" fn ttpcd_run_config_default() -> TtpcdRunConfig {
    let c = RunConfig::default();
    TtpcdRunConfig {
        budget_multiplier: c.budget_multiplier,
        alpha: c.alpha,
        policy: TtpcdPolicy::Gamma2,
        mu: c.mu,
        alpha1: c.grid.alpha1,
        alpha2: c.grid.alpha2,
        delta1: c.grid.delta1,
        delta2: c.grid.delta2,
        mode: TtpcdMode::Coea,
        zmin_mode: TtpcdZminMode::Dynamic,
        seed: c.seed,
        tsp_population: c.tsp.population_size,
        tsp_crossovers_per_city: c.tsp.crossovers_per_city,
    }
}

impl From<&TtpcdRunConfig> for RunConfig {
    fn from(c: &TtpcdRunConfig) -> Self {
        RunConfig {
            budget_multiplier: c.budget_multiplier,
            alpha: c.alpha,
            policy: match c.policy {
                TtpcdPolicy::Fixed => PolicyKind::Fixed,
                TtpcdPolicy::Gamma1 => PolicyKind::Gamma1,
                TtpcdPolicy::Gamma2 => PolicyKind::Gamma2,
            },
            mu: c.mu,
            grid: GridConfig {
                alpha1: c.alpha1,
                alpha2: c.alpha2,
                delta1: c.delta1,
                delta2: c.delta2,
            },
            mode: match c.mode {
                TtpcdMode::Coea => Mode::CoEa,
                TtpcdMode::QdOnly => Mode::QdOnly,
                TtpcdMode::EdoOnly => Mode::EdoOnly,
            },
            zmin_mode: match c.zmin_mode {
                TtpcdZminMode::Dynamic => ZMinMode::Dynamic,
                TtpcdZminMode::Fixed => ZMinMode::Fixed,
            },
            seed: c.seed,
            tsp: TspGaConfig {
                population_size: c.tsp_population,
                crossovers_per_city: c.tsp_crossovers_per_city,
                restarts: 1,
            },
            ..RunConfig::default()
        }
    }
}

/// Runs one experiment to budget exhaustion.
#[no_mangle]
pub unsafe extern "C" fn ttpcd_run(
    inst: *const TtpcdInstance,
    config: *const TtpcdRunConfig,
    out: *mut *mut TtpcdRunResult,
) -> TtpcdStatus {
    guard(|| {
        let inst = &handle!(inst, "instance").0;
        let config = RunConfig::from(handle!(config, "config"));
        if out.is_null() {
            return fail(TtpcdStatus::NullPointer, "out is null");
        }
        match engine::run(inst, &config) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(TtpcdRunResult(r)));
                TtpcdStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Accepts null.
#[no_mangle]
pub unsafe extern "C" fn ttpcd_run_result_free(result: *mut TtpcdRunResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ttpcd_run_result_evaluations(result: *const TtpcdRunResult) -> u64 {
    result.as_ref().map_or(0, |r| r.0.evaluations)
}

/// Scores of the best solution across both archives.
#[no_mangle]
pub unsafe extern "C" fn ttpcd_run_result_best(result: *const TtpcdRunResult, out: *mut TtpcdScores) -> TtpcdStatus {
    guard(|| {
        let r = &handle!(result, "result").0;
        if out.is_null() {
            return fail(TtpcdStatus::NullPointer, "out is null");
        }
        let Some(best) = r.best_solution() else {
            return fail(TtpcdStatus::OutOfRange, "run has no solutions");
        };
        *out = TtpcdScores {
            f: best.f(),
            g: best.g(),
            z: best.z(),
        };
        TtpcdStatus::Ok
    })
}

/// Copies the best tour (1-based) into `buf`. `written` receives the tour
/// length even when the buffer is too small.
#[no_mangle]
pub unsafe extern "C" fn ttpcd_run_result_best_tour(
    result: *const TtpcdRunResult,
    buf: *mut usize,
    buf_len: usize,
    written: *mut usize,
) -> TtpcdStatus {
    guard(|| {
        let r = &handle!(result, "result").0;
        let Some(best) = r.best_solution() else {
            return fail(TtpcdStatus::OutOfRange, "run has no solutions");
        };
        let tour = best.tour().to_one_based();
        if !written.is_null() {
            *written = tour.len();
        }
        if buf_len < tour.len() {
            return fail(TtpcdStatus::BufferTooSmall, format!("tour needs {} slots", tour.len()));
        }
        if buf.is_null() {
            return fail(TtpcdStatus::NullPointer, "buf is null");
        }
        ptr::copy_nonoverlapping(tour.as_ptr(), buf, tour.len());
        TtpcdStatus::Ok
    })
}

/// Final entropy of the diversity population (zeros when it is empty).
#[no_mangle]
pub unsafe extern "C" fn ttpcd_run_result_entropy(
    result: *const TtpcdRunResult,
    out: *mut TtpcdEntropy,
) -> TtpcdStatus {
    guard(|| {
        let r = &handle!(result, "result").0;
        if out.is_null() {
            return fail(TtpcdStatus::NullPointer, "out is null");
        }
        let h = r.final_entropy();
        *out = TtpcdEntropy {
            edge: h.edge,
            item: h.item,
            total: h.total,
        };
        TtpcdStatus::Ok
    })
}

/// 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ttpcd_run_result_log_len(result: *const TtpcdRunResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.log.records.len())
}

#[no_mangle]
pub unsafe extern "C" fn ttpcd_run_result_log_record(
    result: *const TtpcdRunResult,
    index: usize,
    out: *mut TtpcdLogRecord,
) -> TtpcdStatus {
    guard(|| {
        let r = &handle!(result, "result").0;
        if out.is_null() {
            return fail(TtpcdStatus::NullPointer, "out is null");
        }
        let Some(rec) = r.log.records.get(index) else {
            return fail(
                TtpcdStatus::OutOfRange,
                format!("log has {} records", r.log.records.len()),
            );
        };
        *out = TtpcdLogRecord {
            evals: rec.evals,
            z_best: rec.z_best,
            h_p2: rec.h_p2,
            p2_size: rec.p2_size,
            grid_occupancy: rec.grid_occupancy,
        };
        TtpcdStatus::Ok
    })
}

/// Writes the log, map, frequency and summary files into `dir`.
#[no_mangle]
pub unsafe extern "C" fn ttpcd_run_result_write_artifacts(
    result: *const TtpcdRunResult,
    dir: *const c_char,
) -> TtpcdStatus {
    guard(|| {
        let r = &handle!(result, "result").0;
        let dir = try_ffi!(str_arg(dir, "dir"));
        match write_artifacts(r, Path::new(dir)) {
            Ok(_) => TtpcdStatus::Ok,
            Err(e) => from_core(e),
        }
    })
}
