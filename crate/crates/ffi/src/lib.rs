//! C ABI over `cpre_core`.
//!
//! Objects live behind opaque handles created by `*_new`/`*_sample`
//! functions and released by the matching `*_free`. Every fallible call
//! returns a [`CpreStatus`]; on failure the message is kept per thread and
//! can be copied out with [`cpre_last_error`]. Panics never cross the
//! boundary: they come back as [`CpreStatus::Panic`].
//!
//! Strings are NUL-terminated UTF-8. Output buffers follow one convention:
//! the call stores the needed length (without the terminator for strings)
//! in `*out_len` and fails with [`CpreStatus::BufferTooSmall`] when `cap`
//! is not enough, so callers can retry with a larger buffer.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cpre_core::environment::{DistSpec, EnvMode, Environment};
use cpre_core::graphical::{evolve, Constraint, GraphicalRep, Trajectory};
use cpre_core::lattice::{Rect, Site};
use cpre_core::stats::StreamId;
use cpre_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpreStatus {
    Ok = 0,
    NullPointer = 1,
    /// A string argument is not valid UTF-8.
    InvalidUtf8 = 2,
    /// A distribution spec, site, document or parameter was rejected.
    InvalidArgument = 3,
    /// A site or time lies outside the object's window.
    OutOfWindow = 4,
    /// The route geometry cannot be laid out.
    Geometry = 5,
    WindowTooLarge = 6,
    BufferTooSmall = 7,
    Io = 8,
    Panic = 9,
}

/// A lattice site `re + im·i` with `im >= 0`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CpreSite {
    pub re: i64,
    pub im: i64,
}

/// A Monte Carlo estimate with its 95% Wilson interval.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CpreEstimate {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub trials: u64,
}

/// Opaque edge-rate environment.
pub struct CpreEnv(Environment);

/// Opaque graphical representation on a finite space-time window.
pub struct CpreRep(GraphicalRep);

/// Opaque event log of one run.
pub struct CpreTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> CpreStatus {
    match e {
        Error::Window(_) | Error::HalfSpace(_) | Error::Constraint(_) => CpreStatus::OutOfWindow,
        Error::Geom(_) => CpreStatus::Geometry,
        Error::WindowTooLarge(_) => CpreStatus::WindowTooLarge,
        Error::Io { .. } => CpreStatus::Io,
        _ => CpreStatus::InvalidArgument,
    }
}

struct Fail(CpreStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        Fail(status_of(&e), e.to_string())
    }
}

type Res<T> = Result<T, Fail>;

/// Runs `f` with panics caught and failures recorded.
fn guard(f: impl FnOnce() -> Res<()>) -> CpreStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CpreStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            CpreStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(CpreStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Res<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CpreStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Res<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn sites_arg(p: *const CpreSite, n: usize) -> Res<Vec<Site>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null("sites"));
    }
    std::slice::from_raw_parts(p, n)
        .iter()
        .map(|s| Site::new(s.re, s.im).map_err(Fail::from))
        .collect()
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Res<()> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Copies `s` plus a terminator into `buf`; `*out_len` gets `s.len()`.
unsafe fn put_str(s: &str, buf: *mut c_char, cap: usize, out_len: *mut usize) -> Res<()> {
    put(out_len, s.len(), "out_len")?;
    if cap < s.len() + 1 {
        return Err(Fail(
            CpreStatus::BufferTooSmall,
            format!("need {} bytes, got {cap}", s.len() + 1),
        ));
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

fn rect(x0: i64, y0: i64, x1: i64, y1: i64) -> Res<Rect> {
    let r = Rect::finite(x0, y0, x1, y1);
    if r.is_empty() {
        return Err(Fail(CpreStatus::InvalidArgument, format!("rectangle {x0},{y0},{x1},{y1} is empty")));
    }
    Ok(r)
}

/// Library version, static and NUL-terminated.
#[no_mangle]
pub extern "C" fn cpre_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf`.
#[no_mangle]
pub unsafe extern "C" fn cpre_last_error(buf: *mut c_char, cap: usize, out_len: *mut usize) -> CpreStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    // reporting must not overwrite the message being reported
    match put_str(&msg, buf, cap, out_len) {
        Ok(()) => CpreStatus::Ok,
        Err(Fail(code, _)) => code,
    }
}

/// Environment from a spec such as `point(2.0)` or `zero_or(3.0,0.5)`.
#[no_mangle]
pub unsafe extern "C" fn cpre_env_new(spec: *const c_char, seed: u64, out: *mut *mut CpreEnv) -> CpreStatus {
    guard(|| {
        let spec: DistSpec = str_arg(spec, "spec")?.parse()?;
        let env = Environment::new(spec, seed)?;
        put(out, Box::into_raw(Box::new(CpreEnv(env))), "out")
    })
}

/// Environment from a document written by [`cpre_env_export`].
#[no_mangle]
pub unsafe extern "C" fn cpre_env_import(doc: *const c_char, out: *mut *mut CpreEnv) -> CpreStatus {
    guard(|| {
        let env = Environment::import(str_arg(doc, "doc")?)?;
        put(out, Box::into_raw(Box::new(CpreEnv(env))), "out")
    })
}

/// Text export of every edge inside the rectangle `x0,y0 .. x1,y1`.
#[no_mangle]
pub unsafe extern "C" fn cpre_env_export(
    env: *const CpreEnv,
    x0: i64,
    y0: i64,
    x1: i64,
    y1: i64,
    buf: *mut c_char,
    cap: usize,
    out_len: *mut usize,
) -> CpreStatus {
    guard(|| {
        let doc = obj(env, "env")?.0.export(&rect(x0, y0, x1, y1)?)?;
        put_str(&doc, buf, cap, out_len)
    })
}

/// Rate of the edge between two neighbouring sites.
#[no_mangle]
pub unsafe extern "C" fn cpre_env_rate(env: *const CpreEnv, x: CpreSite, y: CpreSite, out: *mut f64) -> CpreStatus {
    guard(|| {
        let e = obj(env, "env")?;
        let r = e.0.rate_between(Site::new(x.re, x.im)?, Site::new(y.re, y.im)?)?;
        put(out, r, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn cpre_env_free(env: *mut CpreEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Samples death marks and arrows on the rectangle up to `horizon`. Equal
/// `(env, rectangle, horizon, seed)` give equal reps.
#[no_mangle]
pub unsafe extern "C" fn cpre_rep_sample(
    env: *const CpreEnv,
    x0: i64,
    y0: i64,
    x1: i64,
    y1: i64,
    horizon: f64,
    seed: u64,
    out: *mut *mut CpreRep,
) -> CpreStatus {
    guard(|| {
        let e = obj(env, "env")?;
        let rep = GraphicalRep::sample(&e.0, &rect(x0, y0, x1, y1)?, horizon, &StreamId::root(seed))?;
        put(out, Box::into_raw(Box::new(CpreRep(rep))), "out")
    })
}

/// Number of marks (deaths and arrows) in the rep.
#[no_mangle]
pub unsafe extern "C" fn cpre_rep_mark_count(rep: *const CpreRep, out: *mut usize) -> CpreStatus {
    guard(|| put(out, obj(rep, "rep")?.0.mark_count(), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn cpre_rep_free(rep: *mut CpreRep) {
    if !rep.is_null() {
        drop(Box::from_raw(rep));
    }
}

/// Runs the process from `initial` (at time 0) up to `until`.
#[no_mangle]
pub unsafe extern "C" fn cpre_evolve(
    rep: *const CpreRep,
    initial: *const CpreSite,
    n: usize,
    until: f64,
    out: *mut *mut CpreTrajectory,
) -> CpreStatus {
    guard(|| {
        let r = obj(rep, "rep")?;
        let a = sites_arg(initial, n)?;
        let t = evolve(&r.0, &a, &Constraint::Unconstrained, until)?;
        put(out, Box::into_raw(Box::new(CpreTrajectory(t))), "out")
    })
}

/// The infected set at time `t`, sorted; `*out_len` gets its size.
#[no_mangle]
pub unsafe extern "C" fn cpre_trajectory_sites_at(
    traj: *const CpreTrajectory,
    t: f64,
    buf: *mut CpreSite,
    cap: usize,
    out_len: *mut usize,
) -> CpreStatus {
    guard(|| {
        let sites = obj(traj, "trajectory")?.0.infected_at(t);
        put(out_len, sites.len(), "out_len")?;
        if cap < sites.len() {
            return Err(Fail(CpreStatus::BufferTooSmall, format!("need {} sites, got {cap}", sites.len())));
        }
        if sites.is_empty() {
            return Ok(());
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        for (i, s) in sites.iter().enumerate() {
            buf.add(i).write(CpreSite { re: s.re(), im: s.im() });
        }
        Ok(())
    })
}

/// Number of recorded infections and recoveries.
#[no_mangle]
pub unsafe extern "C" fn cpre_trajectory_event_count(traj: *const CpreTrajectory, out: *mut usize) -> CpreStatus {
    guard(|| put(out, obj(traj, "trajectory")?.0.log.len(), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn cpre_trajectory_free(traj: *mut CpreTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// `P(ξ_T ≠ ∅)` from `initial`. With `annealed` false the environment is
/// `env`; otherwise every trial draws its own from `env`'s distribution.
/// The region is sized automatically around `initial`.
#[no_mangle]
pub unsafe extern "C" fn cpre_survival(
    env: *const CpreEnv,
    annealed: bool,
    initial: *const CpreSite,
    n: usize,
    horizon: f64,
    trials: u64,
    seed: u64,
    threads: usize,
    out: *mut CpreEstimate,
) -> CpreStatus {
    guard(|| {
        let e = obj(env, "env")?;
        let a = sites_arg(initial, n)?;
        let mode = if annealed {
            EnvMode::Annealed(e.0.spec())
        } else {
            EnvMode::Quenched(e.0.clone())
        };
        let est = cpre_core::convergence::estimate_survival(&mode, &a, horizon, trials, &StreamId::root(seed), threads.max(1))?;
        let w = est.estimate;
        put(
            out,
            CpreEstimate {
                point: w.point,
                lo: w.lo,
                hi: w.hi,
                trials: w.n,
            },
            "out",
        )
    })
}
