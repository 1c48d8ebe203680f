//! C ABI over `teachkit`.
//!
//! Every fallible function returns a [`TkStatus`]; on failure a description is
//! available from [`tk_last_error`] on the same thread. Sessions stores and
//! trajectories are opaque handles that must be released with their `_free`
//! function. Arrays of via points are laid out `{q1, v1, q2, v2}`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use teachkit::dynamics::{rollout, PendulumParams, State, Trajectory};
use teachkit::learner::{build_feature_matrix, ridge_fit, ActionVector, SkillParams};
use teachkit::session::{EventLog, Group, SessionStore, StoreConfig, ViaPointPair};
use teachkit::teaching::{risk_derivative, risk_variance, score_states};
use teachkit::Error;

/// Result codes shared by all fallible functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TkStatus {
    TkOk = 0,
    TkErrNull = 1,
    TkErrDomain = 2,
    TkErrSingular = 3,
    TkErrDivergence = 4,
    TkErrUnknownSession = 5,
    TkErrSessionComplete = 6,
    TkErrInvalidPoints = 7,
    TkErrBuffer = 8,
    TkErrInternal = 9,
    TkErrPanic = 10,
}

/// Session group for [`tk_store_create_session`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TkGroup {
    TkGroupAssign = 0,
    TkGroupTarget = 1,
    TkGroupControl = 2,
}

/// Opaque teaching-session store.
pub struct TkStore {
    inner: SessionStore,
}

/// Opaque sampled trajectory.
pub struct TkTrajectory {
    inner: Trajectory,
}

/// Outcome of a committed phase.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TkCommitResult {
    pub phase: u8,
    pub stiffness: f64,
    pub damping: f64,
    pub score: f64,
    pub rmse: f64,
    pub l2: f64,
    pub diverged: bool,
    /// True when this commit finished the session.
    pub done: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> TkStatus {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::UnknownSkill(_) | Error::EmptyGrid => {
            TkStatus::TkErrDomain
        }
        Error::Singular { .. } => TkStatus::TkErrSingular,
        Error::Divergence { .. } => TkStatus::TkErrDivergence,
        Error::UnknownSession(_) => TkStatus::TkErrUnknownSession,
        Error::SessionComplete(_) => TkStatus::TkErrSessionComplete,
        Error::InvalidPoints(_) => TkStatus::TkErrInvalidPoints,
        _ => TkStatus::TkErrInternal,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F>(f: F) -> TkStatus
where
    F: FnOnce() -> Result<(), TkStatus>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TkStatus::TkOk,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            TkStatus::TkErrPanic
        }
    }
}

fn check(r: teachkit::Result<()>) -> Result<(), TkStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn lift<T>(r: teachkit::Result<T>) -> Result<T, TkStatus> {
    match r {
        Ok(v) => Ok(v),
        Err(e) => {
            set_error(e.to_string());
            Err(status_of(&e))
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), TkStatus> {
    if p.is_null() {
        set_error(format!("`{what}` is null"));
        Err(TkStatus::TkErrNull)
    } else {
        Ok(())
    }
}

unsafe fn read_points(points: *const f64) -> [State; 2] {
    let p = std::slice::from_raw_parts(points, 4);
    [State::new(p[0], p[1]), State::new(p[2], p[3])]
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, TkStatus> {
    non_null(s, what)?;
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error(format!("`{what}` is not UTF-8"));
        TkStatus::TkErrDomain
    })
}

/// Message for the most recent failure on this thread, or null.
///
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn tk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Teaching-quality score (0 to 100) of two via points.
#[no_mangle]
pub extern "C" fn tk_teaching_score(q1: f64, v1: f64, q2: f64, v2: f64) -> f64 {
    score_states([State::new(q1, v1), State::new(q2, v2)])
}

/// Ridge fit from two via points and their actions.
///
/// # Safety
/// `points` must hold 4 doubles, `actions` 2, and `out_w` room for 2
/// (stiffness, damping).
#[no_mangle]
pub unsafe extern "C" fn tk_ridge_fit(
    points: *const f64,
    actions: *const f64,
    lambda: f64,
    out_w: *mut f64,
) -> TkStatus {
    guard(|| {
        non_null(points, "points")?;
        non_null(actions, "actions")?;
        non_null(out_w, "out_w")?;
        let phi = build_feature_matrix(read_points(points));
        let u = ActionVector([*actions, *actions.add(1)]);
        let w = lift(ridge_fit(&phi, &u, lambda))?;
        *out_w = w.stiffness;
        *out_w.add(1) = w.damping;
        Ok(())
    })
}

/// Variance part of the teaching risk for the canonical pair at `omega`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tk_risk_variance(
    omega: f64,
    sigma: f64,
    lambda: f64,
    out: *mut f64,
) -> TkStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = lift(risk_variance(omega, sigma, lambda))?;
        Ok(())
    })
}

/// Derivative of [`tk_risk_variance`] with respect to `omega`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tk_risk_derivative(
    omega: f64,
    sigma: f64,
    lambda: f64,
    out: *mut f64,
) -> TkStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = lift(risk_derivative(omega, sigma, lambda))?;
        Ok(())
    })
}

/// Simulates the skill `(stiffness, damping)` on the default pendulum.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle owned by
/// the caller.
#[no_mangle]
pub unsafe extern "C" fn tk_rollout(
    stiffness: f64,
    damping: f64,
    q0: f64,
    v0: f64,
    duration: f64,
    out: *mut *mut TkTrajectory,
) -> TkStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let w = SkillParams::new(stiffness, damping);
        let traj = lift(rollout(
            &w,
            State::new(q0, v0),
            duration,
            &PendulumParams::default(),
        ))?;
        *out = Box::into_raw(Box::new(TkTrajectory { inner: traj }));
        Ok(())
    })
}

/// Number of states in `traj` (0 for null).
///
/// # Safety
/// `traj` must be null or a live handle from [`tk_rollout`].
#[no_mangle]
pub unsafe extern "C" fn tk_trajectory_len(traj: *const TkTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.len())
}

/// State `index` of `traj` and the torque applied from it.
///
/// # Safety
/// `traj` must be a live handle; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tk_trajectory_get(
    traj: *const TkTrajectory,
    index: usize,
    angle: *mut f64,
    velocity: *mut f64,
    torque: *mut f64,
) -> TkStatus {
    guard(|| {
        non_null(traj, "traj")?;
        non_null(angle, "angle")?;
        non_null(velocity, "velocity")?;
        non_null(torque, "torque")?;
        let t = &(*traj).inner;
        let Some(s) = t.states.get(index) else {
            set_error(format!("index {index} out of range (len {})", t.len()));
            return Err(TkStatus::TkErrDomain);
        };
        *angle = s.angle;
        *velocity = s.velocity;
        *torque = t
            .torques
            .get(index)
            .or_else(|| t.torques.last())
            .copied()
            .unwrap_or(0.0);
        Ok(())
    })
}

/// Releases a trajectory. Null is ignored.
///
/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tk_trajectory_free(traj: *mut TkTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Creates an in-memory session store without an event log.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tk_store_new(
    seed: u64,
    noise_sigma: f64,
    out: *mut *mut TkStore,
) -> TkStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            set_error(format!(
                "noise sigma must be finite and non-negative, got {noise_sigma}"
            ));
            return Err(TkStatus::TkErrDomain);
        }
        let config = StoreConfig {
            seed,
            noise_sigma,
            ..StoreConfig::default()
        };
        let inner = SessionStore::new(config, EventLog::discard());
        *out = Box::into_raw(Box::new(TkStore { inner }));
        Ok(())
    })
}

/// Releases a store. Null is ignored.
///
/// # Safety
/// `store` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tk_store_free(store: *mut TkStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Creates a session and copies its NUL-terminated id into `id_buf`.
///
/// Ids are 32 characters, so `id_len` of 33 always suffices.
///
/// # Safety
/// `store` must be live; `id_buf` must hold `id_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn tk_store_create_session(
    store: *const TkStore,
    group: TkGroup,
    id_buf: *mut c_char,
    id_len: usize,
) -> TkStatus {
    guard(|| {
        non_null(store, "store")?;
        non_null(id_buf, "id_buf")?;
        let group = match group {
            TkGroup::TkGroupAssign => None,
            TkGroup::TkGroupTarget => Some(Group::Target),
            TkGroup::TkGroupControl => Some(Group::Control),
        };
        let session = lift((*store).inner.create_session(group))?;
        let id = session.id.as_bytes();
        if id.len() + 1 > id_len {
            set_error(format!("id buffer needs {} bytes", id.len() + 1));
            return Err(TkStatus::TkErrBuffer);
        }
        ptr::copy_nonoverlapping(id.as_ptr().cast::<c_char>(), id_buf, id.len());
        *id_buf.add(id.len()) = 0;
        Ok(())
    })
}

/// Validates via points for the session's current phase without committing.
///
/// `out_has_score` is set only in guided phases, in which case `out_score`
/// receives the teaching score; otherwise `out_score` is left untouched.
/// Invalid points return `TK_ERR_INVALID_POINTS`.
///
/// # Safety
/// `store` must be live, `id` a C string, `points` 4 doubles, and both
/// output pointers valid.
#[no_mangle]
pub unsafe extern "C" fn tk_store_preview(
    store: *const TkStore,
    id: *const c_char,
    points: *const f64,
    out_has_score: *mut bool,
    out_score: *mut f64,
) -> TkStatus {
    guard(|| {
        non_null(store, "store")?;
        non_null(points, "points")?;
        non_null(out_has_score, "out_has_score")?;
        non_null(out_score, "out_score")?;
        let id = read_str(id, "id")?;
        let [a, b] = read_points(points);
        let preview = lift((*store).inner.preview(id, &ViaPointPair::new(a, b)))?;
        if !preview.valid {
            return check(Err(Error::InvalidPoints(preview.errors)));
        }
        *out_has_score = preview.score.is_some();
        if let Some(score) = preview.score {
            *out_score = score;
        }
        Ok(())
    })
}

/// Commits via points for the session's current phase.
///
/// # Safety
/// `store` must be live, `id` a C string, `points` 4 doubles, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tk_store_commit(
    store: *const TkStore,
    id: *const c_char,
    points: *const f64,
    out: *mut TkCommitResult,
) -> TkStatus {
    guard(|| {
        non_null(store, "store")?;
        non_null(points, "points")?;
        non_null(out, "out")?;
        let id = read_str(id, "id")?;
        let [a, b] = read_points(points);
        let outcome = lift((*store).inner.commit(id, &ViaPointPair::new(a, b)))?;
        let r = &outcome.result;
        *out = TkCommitResult {
            phase: r.phase,
            stiffness: r.w_hat.stiffness,
            damping: r.w_hat.damping,
            score: r.score,
            rmse: r.rmse,
            l2: r.l2,
            diverged: r.diverged,
            done: outcome.next_phase.is_none(),
        };
        Ok(())
    })
}
