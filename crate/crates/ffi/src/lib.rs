//! C ABI for the techmix engine.
//!
//! Every function returns a [`TmStatus`]. On failure the message is kept in
//! thread-local storage and read with [`tm_last_error`]. Objects cross the
//! boundary as opaque handles owned by the caller and released with the
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use techmix::bma::{log_marginal_likelihood, run_bma, BmaConfig, BmaResult, GPriorKind, GPriorSpec, ModelId, ModelPrior, Sampler};
use techmix::cluster::{cut, dtw_series, hac_average_linkage, Dendrogram, DistanceMatrix, DtwOptions};
use techmix::panel::{ColumnKind, PanelDesign, VarMeta};
use techmix::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Input = 3,
    Design = 4,
    Singular = 5,
    Precision = 6,
    Capacity = 7,
    Mixing = 8,
    Window = 9,
    Other = 10,
    Panic = 11,
}

pub const TM_PRIOR_UIP: i32 = 0;
pub const TM_PRIOR_BRIC: i32 = 1;
pub const TM_PRIOR_HYPER_UIP: i32 = 2;

pub const TM_MODEL_PRIOR_UNIFORM: i32 = 0;
pub const TM_MODEL_PRIOR_BETA_BINOMIAL: i32 = 1;

pub const TM_SAMPLER_MCMC: i32 = 0;
pub const TM_SAMPLER_ENUMERATE: i32 = 1;

/// Model-averaging settings. Fill with [`tm_bma_default_options`] first.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TmBmaOptions {
    pub g_prior: i32,
    /// Hyper-g parameter; NaN selects the UIP-matched default.
    pub hyper_a: f64,
    pub model_prior: i32,
    pub heredity: bool,
    pub sampler: i32,
    pub iters: u64,
    pub burnin: u64,
    pub seed: u64,
}

/// Opaque regression design.
pub struct TmDesign(PanelDesign);

/// Opaque model-averaging result.
pub struct TmBma(BmaResult);

/// Opaque average-linkage dendrogram.
pub struct TmDendrogram(Dendrogram);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TmStatus {
    match e {
        Error::Input(_) | Error::Catalogue(_) | Error::Config(_) => TmStatus::Input,
        Error::Design { .. } => TmStatus::Design,
        Error::SingularModel(_) => TmStatus::Singular,
        Error::Precision { .. } => TmStatus::Precision,
        Error::Capacity { .. } => TmStatus::Capacity,
        Error::MixingFailure { .. } => TmStatus::Mixing,
        Error::Window(_) => TmStatus::Window,
        _ => TmStatus::Other,
    }
}

type FfiResult = Result<(), (TmStatus, String)>;

fn invalid(msg: impl Into<String>) -> (TmStatus, String) {
    (TmStatus::InvalidArgument, msg.into())
}

fn engine(e: Error) -> (TmStatus, String) {
    (status_of(&e), e.to_string())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> FfiResult) -> TmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TmStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TmStatus::Panic
        }
    }
}

fn nonnull<T>(p: *const T, name: &str) -> Result<(), (TmStatus, String)> {
    if p.is_null() {
        Err((TmStatus::NullPointer, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be non-null and valid for `len` reads, or `len` must be zero.
unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (TmStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    nonnull(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn tm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tm_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// DTW distance between two row-major series of `dim`-vectors.
/// A negative `window` leaves the alignment unconstrained.
///
/// # Safety
/// `a` and `b` must hold `len_a * dim` and `len_b * dim` doubles; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn tm_dtw_distance(
    a: *const f64,
    len_a: usize,
    b: *const f64,
    len_b: usize,
    dim: usize,
    window: i64,
    normalize: bool,
    out: *mut f64,
) -> TmStatus {
    guard(|| {
        nonnull(out, "out")?;
        if dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        let a = slice(a, len_a.checked_mul(dim).ok_or_else(|| invalid("length overflow"))?, "a")?;
        let b = slice(b, len_b.checked_mul(dim).ok_or_else(|| invalid("length overflow"))?, "b")?;
        let rows_a: Vec<&[f64]> = a.chunks(dim).collect();
        let rows_b: Vec<&[f64]> = b.chunks(dim).collect();
        let opts = DtwOptions {
            window: usize::try_from(window).ok(),
            normalize,
        };
        *out = dtw_series(&rows_a, &rows_b, opts).map_err(engine)?;
        Ok(())
    })
}

/// Builds a year-demeaned design from `n` outcomes and a column-major
/// `n × k` regressor block. `parents` is null or holds `2k` entries: the
/// two main-effect columns of each interaction column, `-1` for plain
/// columns.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tm_design_new(
    y: *const f64,
    x: *const f64,
    years: *const i32,
    n: usize,
    k: usize,
    parents: *const i64,
    out: *mut *mut TmDesign,
) -> TmStatus {
    guard(|| {
        nonnull(out, "out")?;
        let y = slice(y, n, "y")?.to_vec();
        let x = slice(x, n.checked_mul(k).ok_or_else(|| invalid("length overflow"))?, "x")?;
        let years = slice(years, n, "years")?.to_vec();
        let parents = if parents.is_null() { None } else { Some(slice(parents, 2 * k, "parents")?) };
        let columns: Vec<Vec<f64>> = if n == 0 { vec![Vec::new(); k] } else { x.chunks(n).map(<[f64]>::to_vec).collect() };
        let meta = (0..k)
            .map(|j| {
                let name = format!("x{j}");
                match parents.map(|p| (p[2 * j], p[2 * j + 1])) {
                    None | Some((-1, -1)) => Ok(VarMeta::new(name, ColumnKind::FirmControl)),
                    Some((a, b)) => match (usize::try_from(a), usize::try_from(b)) {
                        (Ok(a), Ok(b)) => Ok(VarMeta::interaction(name, a, b)),
                        _ => Err(invalid(format!("column {j}: parents ({a}, {b}) must both be -1 or both valid"))),
                    },
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let design = PanelDesign::from_columns(y, columns, meta, years).map_err(engine)?;
        *out = Box::into_raw(Box::new(TmDesign(design)));
        Ok(())
    })
}

/// # Safety
/// `design` must come from [`tm_design_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tm_design_free(design: *mut TmDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

fn g_prior_kind(code: i32) -> Result<GPriorKind, (TmStatus, String)> {
    match code {
        TM_PRIOR_UIP => Ok(GPriorKind::Uip),
        TM_PRIOR_BRIC => Ok(GPriorKind::Bric),
        TM_PRIOR_HYPER_UIP => Ok(GPriorKind::HyperUip),
        c => Err(invalid(format!("unknown g-prior code {c}"))),
    }
}

fn hyper_a(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

/// Log marginal likelihood, relative to the null model, of the model with
/// columns `cols`.
///
/// # Safety
/// `design` must be a live handle, `cols` valid for `n_cols` reads and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tm_log_marginal_likelihood(
    design: *const TmDesign,
    cols: *const usize,
    n_cols: usize,
    g_prior: i32,
    hyper_a_value: f64,
    out: *mut f64,
) -> TmStatus {
    guard(|| {
        nonnull(design, "design")?;
        nonnull(out, "out")?;
        let d = &(*design).0;
        let cols = slice(cols, n_cols, "cols")?;
        if let Some(&c) = cols.iter().find(|&&c| c >= d.n_vars()) {
            return Err(invalid(format!("column {c} out of range for {} columns", d.n_vars())));
        }
        let prior = GPriorSpec::resolve(g_prior_kind(g_prior)?, d.n_obs, d.n_vars(), hyper_a(hyper_a_value)).map_err(engine)?;
        *out = log_marginal_likelihood(d, ModelId::from_columns(cols), &prior).map_err(engine)?;
        Ok(())
    })
}

/// Default settings: hyper-g (UIP-matched), beta-binomial model
/// prior, strong heredity, MCMC with 200,000 iterations and 20,000 burn-in.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tm_bma_default_options(out: *mut TmBmaOptions) -> TmStatus {
    guard(|| {
        nonnull(out, "out")?;
        let d = BmaConfig::default();
        *out = TmBmaOptions {
            g_prior: TM_PRIOR_HYPER_UIP,
            hyper_a: f64::NAN,
            model_prior: TM_MODEL_PRIOR_BETA_BINOMIAL,
            heredity: d.heredity,
            sampler: TM_SAMPLER_MCMC,
            iters: d.iters as u64,
            burnin: d.burnin as u64,
            seed: d.seed,
        };
        Ok(())
    })
}

/// Runs model averaging on `design`.
///
/// # Safety
/// `design` must be a live handle, `opts` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tm_bma_run(design: *const TmDesign, opts: *const TmBmaOptions, out: *mut *mut TmBma) -> TmStatus {
    guard(|| {
        nonnull(design, "design")?;
        nonnull(opts, "opts")?;
        nonnull(out, "out")?;
        let o = *opts;
        let cfg = BmaConfig {
            g_prior: g_prior_kind(o.g_prior)?,
            hyper_a: hyper_a(o.hyper_a),
            model_prior: match o.model_prior {
                TM_MODEL_PRIOR_UNIFORM => ModelPrior::Uniform,
                TM_MODEL_PRIOR_BETA_BINOMIAL => ModelPrior::BetaBinomial,
                c => return Err(invalid(format!("unknown model prior code {c}"))),
            },
            heredity: o.heredity,
            sampler: match o.sampler {
                TM_SAMPLER_MCMC => Sampler::Mcmc,
                TM_SAMPLER_ENUMERATE => Sampler::Enumerate,
                c => return Err(invalid(format!("unknown sampler code {c}"))),
            },
            iters: usize::try_from(o.iters).map_err(|_| invalid("iters too large"))?,
            burnin: usize::try_from(o.burnin).map_err(|_| invalid("burnin too large"))?,
            seed: o.seed,
        };
        let result = run_bma(&(*design).0, &cfg).map_err(engine)?;
        *out = Box::into_raw(Box::new(TmBma(result)));
        Ok(())
    })
}

/// Number of candidate regressors in a result.
///
/// # Safety
/// `bma` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn tm_bma_n_vars(bma: *const TmBma) -> usize {
    if bma.is_null() {
        return 0;
    }
    (*bma).0.variables.len()
}

/// Number of models carrying posterior mass in a result.
///
/// # Safety
/// `bma` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn tm_bma_n_models(bma: *const TmBma) -> usize {
    if bma.is_null() {
        return 0;
    }
    (*bma).0.models.len()
}

unsafe fn copy_field(bma: *const TmBma, out: *mut f64, len: usize, f: impl Fn(&techmix::bma::VariableSummary) -> f64) -> TmStatus {
    guard(|| {
        nonnull(bma, "bma")?;
        nonnull(out, "out")?;
        let vars = &(*bma).0.variables;
        if len < vars.len() {
            return Err(invalid(format!("buffer holds {len} values, {} needed", vars.len())));
        }
        let out = std::slice::from_raw_parts_mut(out, vars.len());
        for (o, v) in out.iter_mut().zip(vars) {
            *o = f(v);
        }
        Ok(())
    })
}

/// Posterior inclusion probabilities, one per regressor.
///
/// # Safety
/// `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tm_bma_pip(bma: *const TmBma, out: *mut f64, len: usize) -> TmStatus {
    copy_field(bma, out, len, |v| v.pip)
}

/// Unconditional posterior means, one per regressor.
///
/// # Safety
/// `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tm_bma_post_mean(bma: *const TmBma, out: *mut f64, len: usize) -> TmStatus {
    copy_field(bma, out, len, |v| v.post_mean_uncond)
}

/// Unconditional posterior standard deviations, one per regressor.
///
/// # Safety
/// `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tm_bma_post_sd(bma: *const TmBma, out: *mut f64, len: usize) -> TmStatus {
    copy_field(bma, out, len, |v| v.post_sd_uncond)
}

/// # Safety
/// `bma` must come from [`tm_bma_run`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tm_bma_free(bma: *mut TmBma) {
    if !bma.is_null() {
        drop(Box::from_raw(bma));
    }
}

/// Average-linkage clustering of a row-major `n × n` distance matrix.
///
/// # Safety
/// `dist` must hold `n * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tm_hac_average(dist: *const f64, n: usize, out: *mut *mut TmDendrogram) -> TmStatus {
    guard(|| {
        nonnull(out, "out")?;
        let data = slice(dist, n.checked_mul(n).ok_or_else(|| invalid("length overflow"))?, "dist")?.to_vec();
        let m = DistanceMatrix::from_rows((0..n).map(|i| i.to_string()).collect(), data).map_err(engine)?;
        let d = hac_average_linkage(&m).map_err(engine)?;
        *out = Box::into_raw(Box::new(TmDendrogram(d)));
        Ok(())
    })
}

/// Number of merges (`n - 1` for `n` leaves).
///
/// # Safety
/// `d` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn tm_dendrogram_n_merges(d: *const TmDendrogram) -> usize {
    if d.is_null() {
        return 0;
    }
    (*d).0.merges.len()
}

/// Copies the merge sequence. Leaves are nodes `0..n`; merge `s` creates
/// node `n + s`.
///
/// # Safety
/// Each output must be writable for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn tm_dendrogram_merges(
    d: *const TmDendrogram,
    left: *mut usize,
    right: *mut usize,
    height: *mut f64,
    len: usize,
) -> TmStatus {
    guard(|| {
        nonnull(d, "d")?;
        nonnull(left, "left")?;
        nonnull(right, "right")?;
        nonnull(height, "height")?;
        let merges = &(*d).0.merges;
        if len < merges.len() {
            return Err(invalid(format!("buffers hold {len} merges, {} needed", merges.len())));
        }
        for (i, m) in merges.iter().enumerate() {
            *left.add(i) = m.left;
            *right.add(i) = m.right;
            *height.add(i) = m.height;
        }
        Ok(())
    })
}

/// Flat labels for a cut into `k` clusters.
///
/// # Safety
/// `labels` must be writable for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn tm_dendrogram_cut(d: *const TmDendrogram, k: usize, labels: *mut usize, len: usize) -> TmStatus {
    guard(|| {
        nonnull(d, "d")?;
        nonnull(labels, "labels")?;
        let dendro = &(*d).0;
        if len < dendro.n_leaves() {
            return Err(invalid(format!("buffer holds {len} labels, {} needed", dendro.n_leaves())));
        }
        let l = cut(dendro, k).map_err(engine)?;
        ptr::copy_nonoverlapping(l.as_ptr(), labels, l.len());
        Ok(())
    })
}

/// # Safety
/// `d` must come from [`tm_hac_average`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tm_dendrogram_free(d: *mut TmDendrogram) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}
