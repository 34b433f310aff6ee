//! C interface to lagrangekit.
//!
//! Objects are opaque handles created by `lk_*_new` and released by the
//! matching `lk_*_free`. Every fallible call returns an [`LkStatus`]; on
//! failure a message is available from [`lk_last_error_message`] on the
//! same thread. No call unwinds across the boundary.
//!
//! Problems are evaluated through an [`LkOracle`]: two callbacks that
//! fill an evaluation or gradient sink through the `lk_eval_*` and
//! `lk_grad_*` setters.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lagrangekit::checkpoint::{self, CheckpointError};
use lagrangekit::{
    CmpState, ConstrainedOptimizer, ConstrainedProblem, ConstraintGroup, ConstraintType,
    DualKind, DualOptimizer, Error, Formulation, Gradients, Oracle, OracleError, PenaltyCoefficient, PrimalKind,
    PrimalOptimizer, Scheme,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A NaN or infinity was produced or supplied.
    Numerical = 3,
    /// The oracle reported failure or returned inconsistent data.
    Evaluation = 4,
    SignatureMismatch = 5,
    CorruptCheckpoint = 6,
    Io = 7,
    BufferTooSmall = 8,
    NotFound = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LkConstraintType {
    Inequality = 0,
    Equality = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LkFormulation {
    Lagrangian = 0,
    AugmentedLagrangian = 1,
    QuadraticPenalty = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LkScheme {
    Simultaneous = 0,
    AlternatingPrimalDual = 1,
    AlternatingDualPrimal = 2,
    Extragradient = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LkPrimalKind {
    Gd = 0,
    Momentum = 1,
    Adam = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LkDualKind {
    GradientAscent = 0,
    NuPi = 1,
}

/// Optimizer settings. Fields that do not apply to the chosen kinds are
/// ignored.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LkOptimizerConfig {
    pub scheme: LkScheme,
    /// Non-zero: alternating primal-dual reuses the pre-step violations.
    pub reuse_violations: c_int,
    pub primal_kind: LkPrimalKind,
    pub lr_primal: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub dual_kind: LkDualKind,
    pub lr_dual: f64,
    pub kp: f64,
    pub nu: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LkRollInfo {
    pub loss: f64,
    pub primal_lagrangian: f64,
    pub dual_lagrangian: f64,
}

/// Fills `out` with the loss and constraint violations at `x`. Return 0
/// on success.
pub type LkEvaluateFn = Option<unsafe extern "C" fn(user_data: *mut c_void, x: *const f64, dim: usize, out: *mut LkEvaluation) -> c_int>;

/// Fills `out` with the loss gradient and one gradient row per violation
/// entry. Return 0 on success.
pub type LkGradientsFn = Option<unsafe extern "C" fn(user_data: *mut c_void, x: *const f64, dim: usize, out: *mut LkGradients) -> c_int>;

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LkOracle {
    pub user_data: *mut c_void,
    pub dim: usize,
    pub evaluate: LkEvaluateFn,
    pub gradients: LkGradientsFn,
}

pub struct LkProblem {
    inner: ConstrainedProblem,
}

pub struct LkOptimizer {
    inner: ConstrainedOptimizer,
}

/// Evaluation sink passed to `LkEvaluateFn`.
pub struct LkEvaluation {
    state: CmpState,
}

/// Gradient sink passed to `LkGradientsFn`.
pub struct LkGradients {
    grads: Gradients,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: LkStatus, msg: impl Into<String>) -> LkStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> LkStatus {
    match e {
        _ if e.is_numerical() => LkStatus::Numerical,
        Error::Evaluation { .. } => LkStatus::Evaluation,
        Error::Checkpoint(CheckpointError::SignatureMismatch { .. }) => LkStatus::SignatureMismatch,
        Error::Checkpoint(_) => LkStatus::CorruptCheckpoint,
        Error::Io(_) => LkStatus::Io,
        Error::UnknownGroup(_) => LkStatus::NotFound,
        _ => LkStatus::InvalidArgument,
    }
}

fn from_error(e: Error) -> LkStatus {
    fail(status_of(&e), e.to_string())
}

/// Runs `f`, converting panics into [`LkStatus::Panic`].
fn guard(f: impl FnOnce() -> LkStatus) -> LkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(LkStatus::Panic, "internal panic"),
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

unsafe fn string(ptr: *const c_char) -> Result<String, LkStatus> {
    if ptr.is_null() {
        return Err(fail(LkStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(LkStatus::InvalidArgument, "string is not valid UTF-8"))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $( if $p.is_null() { return fail(LkStatus::NullPointer, concat!("`", stringify!($p), "` is null")); } )+
    };
}

/// Copies the last error message on this thread into `buf` (NUL
/// terminated, truncated to fit) and returns its full length in bytes.
#[no_mangle]
pub unsafe extern "C" fn lk_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn lk_problem_new(x0: *const f64, dim: usize, out: *mut *mut LkProblem) -> LkStatus {
    guard(|| {
        non_null!(out);
        let x = try_status!(slice(x0, dim).ok_or_else(|| fail(LkStatus::NullPointer, "`x0` is null")));
        let inner = try_status!(ConstrainedProblem::new(x.to_vec()).map_err(from_error));
        *out = Box::into_raw(Box::new(LkProblem { inner }));
        LkStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn lk_problem_free(problem: *mut LkProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Registers a constraint group. `penalty` is the initial coefficient
/// for penalized formulations and ignored for the plain Lagrangian.
#[no_mangle]
pub unsafe extern "C" fn lk_problem_add_group(
    problem: *mut LkProblem,
    id: *const c_char,
    constraint_type: LkConstraintType,
    size: usize,
    formulation: LkFormulation,
    penalty: f64,
) -> LkStatus {
    guard(|| {
        non_null!(problem);
        let id = try_status!(string(id));
        let ty = match constraint_type {
            LkConstraintType::Inequality => ConstraintType::Inequality,
            LkConstraintType::Equality => ConstraintType::Equality,
        };
        let formulation = match formulation {
            LkFormulation::Lagrangian => Formulation::Lagrangian,
            LkFormulation::AugmentedLagrangian => Formulation::AugmentedLagrangian,
            LkFormulation::QuadraticPenalty => Formulation::QuadraticPenalty,
        };
        let mut group = ConstraintGroup::new(id, ty, size, formulation);
        if formulation.has_penalty() {
            let c = try_status!(PenaltyCoefficient::scalar(penalty).map_err(from_error));
            group = group.with_penalty(c);
        }
        try_status!((*problem).inner.register_group(group).map_err(from_error));
        LkStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn lk_problem_dim(problem: *const LkProblem) -> usize {
    if problem.is_null() {
        0
    } else {
        (*problem).inner.dim()
    }
}

/// Copies the primal point into `out[0..len]`; `len` must equal the
/// dimension.
#[no_mangle]
pub unsafe extern "C" fn lk_problem_x(problem: *const LkProblem, out: *mut f64, len: usize) -> LkStatus {
    guard(|| {
        non_null!(problem, out);
        let x = (*problem).inner.x();
        if len != x.len() {
            return fail(LkStatus::BufferTooSmall, format!("need {} values, got {len}", x.len()));
        }
        ptr::copy_nonoverlapping(x.as_ptr(), out, len);
        LkStatus::Ok
    })
}

/// Copies the multipliers of group `id` into `out[0..len]`.
#[no_mangle]
pub unsafe extern "C" fn lk_problem_multiplier(
    problem: *const LkProblem,
    id: *const c_char,
    out: *mut f64,
    len: usize,
) -> LkStatus {
    guard(|| {
        non_null!(problem, out);
        let id = try_status!(string(id));
        let Some(group) = (*problem).inner.group(&id) else {
            return fail(LkStatus::NotFound, format!("no group `{id}`"));
        };
        let Some(m) = group.multiplier() else {
            return fail(LkStatus::NotFound, format!("group `{id}` has no multiplier"));
        };
        if len != m.len() {
            return fail(LkStatus::BufferTooSmall, format!("need {} values, got {len}", m.len()));
        }
        ptr::copy_nonoverlapping(m.values().as_ptr(), out, len);
        LkStatus::Ok
    })
}

fn build_optimizer(cfg: &LkOptimizerConfig) -> Result<ConstrainedOptimizer, Error> {
    let scheme = match cfg.scheme {
        LkScheme::Simultaneous => Scheme::Simultaneous,
        LkScheme::AlternatingPrimalDual => Scheme::AlternatingPrimalDual,
        LkScheme::AlternatingDualPrimal => Scheme::AlternatingDualPrimal,
        LkScheme::Extragradient => Scheme::Extragradient,
    };
    let primal_kind = match cfg.primal_kind {
        LkPrimalKind::Gd => PrimalKind::Gd,
        LkPrimalKind::Momentum => PrimalKind::Momentum { beta: cfg.momentum },
        LkPrimalKind::Adam => PrimalKind::AdamLike {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
        },
    };
    let dual_kind = match cfg.dual_kind {
        LkDualKind::GradientAscent => DualKind::GradientAscent,
        LkDualKind::NuPi => DualKind::NuPi { kp: cfg.kp, nu: cfg.nu },
    };
    Ok(ConstrainedOptimizer::new(
        scheme,
        PrimalOptimizer::new(primal_kind, cfg.lr_primal)?,
        DualOptimizer::new(dual_kind, cfg.lr_dual)?,
    )
    .with_reused_violations(cfg.reuse_violations != 0))
}

/// A config with gradient descent, gradient ascent, the simultaneous
/// scheme, learning rates 0.01 and the usual Adam/momentum constants.
#[no_mangle]
pub extern "C" fn lk_optimizer_config_default() -> LkOptimizerConfig {
    LkOptimizerConfig {
        scheme: LkScheme::Simultaneous,
        reuse_violations: 0,
        primal_kind: LkPrimalKind::Gd,
        lr_primal: 0.01,
        momentum: 0.9,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
        dual_kind: LkDualKind::GradientAscent,
        lr_dual: 0.01,
        kp: 0.0,
        nu: 0.0,
    }
}

#[no_mangle]
pub unsafe extern "C" fn lk_optimizer_new(config: *const LkOptimizerConfig, out: *mut *mut LkOptimizer) -> LkStatus {
    guard(|| {
        non_null!(config, out);
        let inner = try_status!(build_optimizer(&*config).map_err(from_error));
        *out = Box::into_raw(Box::new(LkOptimizer { inner }));
        LkStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn lk_optimizer_free(optimizer: *mut LkOptimizer) {
    if !optimizer.is_null() {
        drop(Box::from_raw(optimizer));
    }
}

#[no_mangle]
pub unsafe extern "C" fn lk_eval_set_loss(eval: *mut LkEvaluation, loss: f64) -> LkStatus {
    non_null!(eval);
    (*eval).state.loss = loss;
    LkStatus::Ok
}

/// Records the violation of group `id` (`g(x)` or `h(x)`).
#[no_mangle]
pub unsafe extern "C" fn lk_eval_set_violation(
    eval: *mut LkEvaluation,
    id: *const c_char,
    values: *const f64,
    len: usize,
) -> LkStatus {
    guard(|| {
        non_null!(eval);
        let id = try_status!(string(id));
        let v = try_status!(slice(values, len).ok_or_else(|| fail(LkStatus::NullPointer, "`values` is null")));
        let entry = (*eval).state.observed_constraints.entry(id).or_default();
        entry.violation = v.to_vec();
        LkStatus::Ok
    })
}

/// Records a strict (non-differentiable) measurement for group `id`; it
/// drives the dual update while the violation drives the primal one.
#[no_mangle]
pub unsafe extern "C" fn lk_eval_set_strict_violation(
    eval: *mut LkEvaluation,
    id: *const c_char,
    values: *const f64,
    len: usize,
) -> LkStatus {
    guard(|| {
        non_null!(eval);
        let id = try_status!(string(id));
        let v = try_status!(slice(values, len).ok_or_else(|| fail(LkStatus::NullPointer, "`values` is null")));
        let entry = (*eval).state.observed_constraints.entry(id).or_default();
        entry.strict_violation = Some(v.to_vec());
        LkStatus::Ok
    })
}

/// Marks which entries of group `id` the violation refers to.
#[no_mangle]
pub unsafe extern "C" fn lk_eval_set_indices(
    eval: *mut LkEvaluation,
    id: *const c_char,
    indices: *const usize,
    len: usize,
) -> LkStatus {
    guard(|| {
        non_null!(eval);
        let id = try_status!(string(id));
        if indices.is_null() && len > 0 {
            return fail(LkStatus::NullPointer, "`indices` is null");
        }
        let idx = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(indices, len).to_vec()
        };
        let entry = (*eval).state.observed_constraints.entry(id).or_default();
        entry.observed_indices = Some(idx);
        LkStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn lk_grad_set_loss(grads: *mut LkGradients, values: *const f64, len: usize) -> LkStatus {
    guard(|| {
        non_null!(grads);
        let v = try_status!(slice(values, len).ok_or_else(|| fail(LkStatus::NullPointer, "`values` is null")));
        (*grads).grads.loss = v.to_vec();
        LkStatus::Ok
    })
}

/// Records the gradient rows of group `id`, row-major `rows x dim`.
#[no_mangle]
pub unsafe extern "C" fn lk_grad_set_constraint(
    grads: *mut LkGradients,
    id: *const c_char,
    values: *const f64,
    rows: usize,
    dim: usize,
) -> LkStatus {
    guard(|| {
        non_null!(grads);
        let id = try_status!(string(id));
        let Some(total) = rows.checked_mul(dim) else {
            return fail(LkStatus::InvalidArgument, "gradient size overflows");
        };
        let v = try_status!(slice(values, total).ok_or_else(|| fail(LkStatus::NullPointer, "`values` is null")));
        let matrix = if dim == 0 {
            vec![Vec::new(); rows]
        } else {
            v.chunks(dim).map(<[f64]>::to_vec).collect()
        };
        (*grads).grads.constraints.insert(id, matrix);
        LkStatus::Ok
    })
}

struct CallbackOracle(LkOracle);

impl Oracle for CallbackOracle {
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn evaluate(&self, x: &[f64]) -> Result<CmpState, OracleError> {
        let f = self.0.evaluate.ok_or_else(|| OracleError("no evaluate callback".into()))?;
        let mut sink = LkEvaluation {
            state: CmpState::new(f64::NAN),
        };
        let rc = unsafe { f(self.0.user_data, x.as_ptr(), x.len(), &mut sink) };
        if rc != 0 {
            return Err(OracleError(format!("evaluate callback returned {rc}")));
        }
        Ok(sink.state)
    }

    fn gradients(&self, x: &[f64], _: &CmpState) -> Result<Gradients, OracleError> {
        let f = self.0.gradients.ok_or_else(|| OracleError("no gradients callback".into()))?;
        let mut sink = LkGradients {
            grads: Gradients::default(),
        };
        let rc = unsafe { f(self.0.user_data, x.as_ptr(), x.len(), &mut sink) };
        if rc != 0 {
            return Err(OracleError(format!("gradients callback returned {rc}")));
        }
        Ok(sink.grads)
    }
}

/// One optimizer step. On failure neither handle is modified. `info`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn lk_roll(
    problem: *mut LkProblem,
    optimizer: *mut LkOptimizer,
    oracle: *const LkOracle,
    info: *mut LkRollInfo,
) -> LkStatus {
    guard(|| {
        non_null!(problem, optimizer, oracle);
        let oracle = CallbackOracle(*oracle);
        let out = try_status!((*optimizer)
            .inner
            .roll(&mut (*problem).inner, &oracle)
            .map_err(from_error));
        if !info.is_null() {
            *info = LkRollInfo {
                loss: out.loss,
                primal_lagrangian: out.primal_lagrangian,
                dual_lagrangian: out.dual_lagrangian,
            };
        }
        LkStatus::Ok
    })
}

/// Writes a checkpoint atomically.
#[no_mangle]
pub unsafe extern "C" fn lk_checkpoint_save(
    problem: *const LkProblem,
    optimizer: *const LkOptimizer,
    step: u64,
    path: *const c_char,
) -> LkStatus {
    guard(|| {
        non_null!(problem, optimizer);
        let path = try_status!(string(path));
        try_status!(checkpoint::save(&(*problem).inner, &(*optimizer).inner, step, path).map_err(from_error));
        LkStatus::Ok
    })
}

/// Restores a checkpoint into existing handles built with the same
/// groups and optimizer kinds. `step` (may be null) receives the saved
/// step counter. Nothing is modified on failure.
#[no_mangle]
pub unsafe extern "C" fn lk_checkpoint_load(
    path: *const c_char,
    problem: *mut LkProblem,
    optimizer: *mut LkOptimizer,
    step: *mut u64,
) -> LkStatus {
    guard(|| {
        non_null!(problem, optimizer);
        let path = try_status!(string(path));
        let s = try_status!(
            checkpoint::load(path, &mut (*problem).inner, &mut (*optimizer).inner).map_err(from_error)
        );
        if !step.is_null() {
            *step = s;
        }
        LkStatus::Ok
    })
}
