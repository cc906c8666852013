//! C ABI over the socnav stack.
//!
//! Objects cross the boundary as opaque handles created by `sn_*_new` or
//! `sn_*_load` and released with the matching `sn_*_free`. Every fallible
//! call returns an [`SnStatus`]; on failure [`sn_last_error`] describes the
//! most recent error on the calling thread. Absent metric values are NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use socnav::costmap::{CostmapStack, SocialEntityAttr};
use socnav::error::Error;
use socnav::geometry::Vec2;
use socnav::grid::GridGeometry;
use socnav::harness::{run_episode, EpisodeOptions};
use socnav::metrics::EpisodeReport;
use socnav::modulator::ModulatorConfig;
use socnav::planner::plan_global_path;
use socnav::world::{load_scenario, ScenarioSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    OutOfBounds = 6,
    NoPath = 7,
    Timeout = 8,
    Transport = 9,
    Log = 10,
    BufferTooSmall = 11,
    Panic = 99,
}

/// A validated scenario.
pub struct SnScenario(Arc<ScenarioSpec>);

/// A finished episode.
pub struct SnReport(EpisodeReport);

/// A layered costmap.
pub struct SnCostmap(CostmapStack);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SnMetrics {
    pub success: bool,
    pub collided: bool,
    pub curvature: f64,
    pub smoothness_score: f64,
    pub subject_score: f64,
    pub region_score: f64,
    pub band_fraction: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> SnStatus {
    match e {
        Error::Io { .. } => SnStatus::Io,
        Error::Parse { .. } => SnStatus::Parse,
        Error::Validation(_) | Error::UnknownParam(_) | Error::Schema { .. } => SnStatus::Validation,
        Error::OutOfBounds { .. } => SnStatus::OutOfBounds,
        Error::NoPath => SnStatus::NoPath,
        Error::Timeout(_) => SnStatus::Timeout,
        Error::Transport(_) => SnStatus::Transport,
        Error::Log(_) => SnStatus::Log,
    }
}

/// Runs `f`, recording any error or panic for [`sn_last_error`].
fn guard(f: impl FnOnce() -> Result<(), SnStatus>) -> SnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SnStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            SnStatus::Panic
        }
    }
}

fn fail(e: Error) -> SnStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> SnStatus {
    set_error(format!("`{what}` is null"));
    SnStatus::NullArgument
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SnStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("`{what}` is not valid UTF-8"));
        SnStatus::InvalidUtf8
    })
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, SnStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

fn nan_if_none(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sn_scenario_load(path: *const c_char, out: *mut *mut SnScenario) -> SnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let spec = load_scenario(path).map_err(fail)?;
        *out = Box::into_raw(Box::new(SnScenario(Arc::new(spec))));
        Ok(())
    })
}

/// # Safety
/// `s` must come from [`sn_scenario_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sn_scenario_free(s: *mut SnScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn sn_scenario_pedestrian_count(s: *const SnScenario) -> usize {
    s.as_ref().map_or(0, |s| s.0.pedestrians.len())
}

/// Runs one episode with the bundled scripted rules.
///
/// # Safety
/// `s` must be a live scenario handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sn_run_episode(
    s: *const SnScenario,
    seed: u64,
    latency_s: f64,
    out: *mut *mut SnReport,
) -> SnStatus {
    guard(|| {
        let s = obj(s, "scenario")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = ModulatorConfig { injected_latency: latency_s, ..ModulatorConfig::default() };
        let report = run_episode(s.0.clone(), &cfg, seed, &EpisodeOptions::default()).map_err(fail)?;
        *out = Box::into_raw(Box::new(SnReport(report)));
        Ok(())
    })
}

/// # Safety
/// `r` must come from [`sn_run_episode`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sn_report_free(r: *mut SnReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `r` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn sn_report_ticks(r: *const SnReport) -> usize {
    r.as_ref().map_or(0, |r| r.0.ticks())
}

/// # Safety
/// `r` must be a live report handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sn_report_metrics(r: *const SnReport, out: *mut SnMetrics) -> SnStatus {
    guard(|| {
        let r = obj(r, "report")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = r.0.metrics;
        *out = SnMetrics {
            success: m.success,
            collided: m.collided,
            curvature: nan_if_none(m.curvature),
            smoothness_score: nan_if_none(m.smoothness_score),
            subject_score: nan_if_none(m.subject_score),
            region_score: nan_if_none(m.region_score),
            band_fraction: nan_if_none(m.band_fraction),
        };
        Ok(())
    })
}

/// The report as JSON. Release with [`sn_string_free`].
///
/// # Safety
/// `r` must be a live report handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sn_report_json(r: *const SnReport, out: *mut *mut c_char) -> SnStatus {
    guard(|| {
        let r = obj(r, "report")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string(&r.0).map_err(|e| fail(Error::Log(e.to_string())))?;
        *out = CString::new(json).map_err(|e| fail(Error::Log(e.to_string())))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// An empty costmap with its origin at (0, 0), or null on invalid sizes.
#[no_mangle]
pub extern "C" fn sn_costmap_new(width: usize, height: usize, resolution: f64) -> *mut SnCostmap {
    let made = catch_unwind(|| {
        if width == 0 || height == 0 || resolution <= 0.0 || !resolution.is_finite() {
            set_error("costmap needs positive width, height and resolution");
            return ptr::null_mut();
        }
        let g = GridGeometry::new(resolution, Vec2::ZERO, width, height);
        Box::into_raw(Box::new(SnCostmap(CostmapStack::new(g))))
    });
    made.unwrap_or_else(|_| {
        set_error("internal panic");
        ptr::null_mut()
    })
}

/// # Safety
/// `c` must come from [`sn_costmap_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sn_costmap_free(c: *mut SnCostmap) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Marks a cell lethal in the static layer.
///
/// # Safety
/// `c` must be a live costmap handle.
#[no_mangle]
pub unsafe extern "C" fn sn_costmap_set_obstacle(c: *mut SnCostmap, x: f64, y: f64) -> SnStatus {
    guard(|| {
        let c = c.as_mut().ok_or_else(|| null("costmap"))?;
        let g = *c.0.geometry();
        let (i, j) = g.world_to_cell(Vec2::new(x, y)).ok_or_else(|| fail(Error::OutOfBounds { x, y }))?;
        c.0.static_layer_mut()[g.index(i, j)] = socnav::costmap::LETHAL;
        Ok(())
    })
}

/// Replaces the social layer with one decaying marker per entry of the
/// parallel arrays, then merges the layers.
///
/// # Safety
/// `c` must be a live costmap handle; each array holds `n` values.
#[no_mangle]
pub unsafe extern "C" fn sn_costmap_set_markers(
    c: *mut SnCostmap,
    xs: *const f64,
    ys: *const f64,
    costs: *const f64,
    radii: *const f64,
    decays: *const f64,
    n: usize,
) -> SnStatus {
    guard(|| {
        let c = c.as_mut().ok_or_else(|| null("costmap"))?;
        let slice = |p: *const f64, what: &str| -> Result<&[f64], SnStatus> {
            match (p.is_null(), n) {
                (_, 0) => Ok(&[]),
                (true, _) => Err(null(what)),
                (false, _) => Ok(std::slice::from_raw_parts(p, n)),
            }
        };
        let (xs, ys, costs, radii, decays) = (
            slice(xs, "xs")?,
            slice(ys, "ys")?,
            slice(costs, "costs")?,
            slice(radii, "radii")?,
            slice(decays, "decays")?,
        );
        let markers: Vec<SocialEntityAttr> = (0..n)
            .map(|k| SocialEntityAttr {
                entity_id: format!("marker_{k}"),
                class_label: "marker".into(),
                cost_value: costs[k],
                inflation_radius: radii[k],
                decay_rate: decays[k],
                band: None,
                position: Some(Vec2::new(xs[k], ys[k])),
                footprint: None,
            })
            .collect();
        c.0.apply_social_entities(&markers).map_err(fail)?;
        c.0.merge_layers();
        Ok(())
    })
}

/// Merged cost at a world point.
///
/// # Safety
/// `c` must be a live costmap handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sn_costmap_cost_at(c: *const SnCostmap, x: f64, y: f64, out: *mut u8) -> SnStatus {
    guard(|| {
        let c = obj(c, "costmap")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = c.0.cost_at(Vec2::new(x, y)).ok_or_else(|| fail(Error::OutOfBounds { x, y }))?;
        Ok(())
    })
}

/// Plans over the merged grid and writes waypoints as `x0, y0, x1, y1, ...`
/// into `xy`, which holds `capacity` points. `len` receives the point count;
/// if it exceeds `capacity` nothing is written and
/// [`SnStatus::BufferTooSmall`] is returned.
///
/// # Safety
/// `c` must be a live costmap handle; `xy` holds `2 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sn_costmap_plan(
    c: *const SnCostmap,
    sx: f64,
    sy: f64,
    gx: f64,
    gy: f64,
    xy: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> SnStatus {
    guard(|| {
        let c = obj(c, "costmap")?;
        if len.is_null() {
            return Err(null("len"));
        }
        let path = plan_global_path(&c.0, Vec2::new(sx, sy), Vec2::new(gx, gy)).map_err(fail)?;
        *len = path.len();
        if path.len() > capacity {
            set_error(format!("path has {} points, buffer holds {capacity}", path.len()));
            return Err(SnStatus::BufferTooSmall);
        }
        if xy.is_null() && !path.is_empty() {
            return Err(null("xy"));
        }
        for (k, p) in path.iter().enumerate() {
            *xy.add(2 * k) = p.x;
            *xy.add(2 * k + 1) = p.y;
        }
        Ok(())
    })
}
