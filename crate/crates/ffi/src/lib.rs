//! C interface to `deltaconv`.
//!
//! Every entry point returns a [`DcStatus`]; on failure the message is kept
//! per thread and read with [`dc_last_error_message`]. Arrays are row-major
//! `double`. A scalar field over `n` points with `c` channels has `n × c`
//! entries; a vector field has `2n × c`, rows `2i` and `2i + 1` holding the
//! `u` and `v` coefficients of point `i`.
//!
//! Handles are immutable once built and may be shared between threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use deltaconv::{
    build_knn_graph, build_operator_set, build_tangent_frames, deltaconv_forward, estimate_normals,
    input_vector_features, DeltaConvParams, Error, Features, KnnGraph, OperatorSet, PointCloud,
    ScalarField, Vec3, VectorField,
};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcStatus {
    Ok = 0,
    InvalidArgument = 1,
    InvalidInput = 2,
    ShapeMismatch = 3,
    /// Degenerate neighborhood, ill-conditioned fit or degenerate patch.
    Numerical = 4,
    NullPointer = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Operators of a built set.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcOperator {
    /// Raw gradient, `2N × N`.
    G = 0,
    /// ℓ∞-normalized gradient.
    GHat = 1,
    /// Per-point 90° rotation, `2N × 2N`.
    J = 2,
    /// Raw divergence, `N × 2N`.
    D = 3,
    DHat = 4,
    Curl = 5,
    /// Hodge Laplacian on vectors, `2N × 2N`.
    L = 6,
    /// Laplace–Beltrami on scalars, `N × N`.
    Lb = 7,
}

impl DcOperator {
    fn name(self) -> &'static str {
        OperatorSet::NAMES[self as usize]
    }
}

/// Summary of a built operator set.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcInfo {
    pub n_points: usize,
    pub k: usize,
    pub lambda: f64,
    pub grad_norm: f64,
    pub div_norm: f64,
}

/// Operators plus the neighbor graph they were built on.
pub struct DcOperatorSet {
    graph: KnnGraph,
    ops: OperatorSet,
}

/// Block parameters.
pub struct DcParams {
    params: DeltaConvParams,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

enum Failure {
    Core(Error),
    Status(DcStatus, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn status_of(e: &Error) -> DcStatus {
    match e {
        _ if e.is_numerical() => DcStatus::Numerical,
        Error::InvalidArgument(_) | Error::Precondition(_) => DcStatus::InvalidArgument,
        Error::ShapeMismatch { .. } => DcStatus::ShapeMismatch,
        _ => DcStatus::InvalidInput,
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(DcStatus::NullPointer, format!("{what} is null"))
}

/// Run `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DcStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DcStatus::Panic
        }
    }
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn slice_mut<'a, T>(data: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(data, len))
}

fn points(data: &[f64]) -> Vec<Vec3> {
    data.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

unsafe fn handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, Failure> {
    h.as_ref().ok_or_else(|| null(what))
}

/// Build the operator set of `n_points` positions (`n_points × 3`).
///
/// `normals` may be null, in which case normals are estimated by PCA over
/// the same `k` neighbors. On success `*out` owns a handle to release with
/// [`dc_operator_set_free`].
///
/// # Safety
/// `positions` (and `normals` if not null) must hold `3 * n_points` doubles;
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_operator_set_build(
    positions: *const f64,
    normals: *const f64,
    n_points: usize,
    k: usize,
    lambda: f64,
    out: *mut *mut DcOperatorSet,
) -> DcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let positions = points(slice(positions, 3 * n_points, "positions")?);
        let cloud = if normals.is_null() {
            let bare = PointCloud::new(positions)?;
            let graph = build_knn_graph(&bare, k)?;
            estimate_normals(&bare, &graph)?
        } else {
            PointCloud::with_normals(positions, points(slice(normals, 3 * n_points, "normals")?))?
        };
        let graph = build_knn_graph(&cloud, k)?;
        let frames = build_tangent_frames(&cloud)?;
        let ops = build_operator_set(&cloud, &graph, &frames, lambda)?;
        *out = Box::into_raw(Box::new(DcOperatorSet { graph, ops }));
        Ok(())
    })
}

/// Release a handle from [`dc_operator_set_build`]. Null is ignored.
///
/// # Safety
/// `set` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dc_operator_set_free(set: *mut DcOperatorSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// # Safety
/// `set` must be a live handle and `info` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_operator_set_info(set: *const DcOperatorSet, info: *mut DcInfo) -> DcStatus {
    guard(|| {
        let set = handle(set, "set")?;
        let info = info.as_mut().ok_or_else(|| null("info"))?;
        let meta = &set.ops.meta;
        *info = DcInfo {
            n_points: meta.n,
            k: meta.k,
            lambda: meta.lambda,
            grad_norm: meta.grad_norm,
            div_norm: meta.div_norm,
        };
        Ok(())
    })
}

/// Shape and stored-entry count of one operator.
///
/// # Safety
/// `set` must be a live handle; the outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_operator_shape(
    set: *const DcOperatorSet,
    op: DcOperator,
    rows: *mut usize,
    cols: *mut usize,
    nnz: *mut usize,
) -> DcStatus {
    guard(|| {
        let m = handle(set, "set")?.ops.lookup(op.name())?;
        if rows.is_null() || cols.is_null() || nnz.is_null() {
            return Err(null("shape output"));
        }
        (*rows, *cols, *nnz) = (m.rows(), m.cols(), m.nnz());
        Ok(())
    })
}

/// Copy the entries of one operator in row-major order (0-based indices).
/// Each output buffer must hold `capacity >= nnz` elements.
///
/// # Safety
/// `set` must be a live handle; each buffer must hold `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn dc_operator_triplets(
    set: *const DcOperatorSet,
    op: DcOperator,
    row_idx: *mut usize,
    col_idx: *mut usize,
    values: *mut f64,
    capacity: usize,
) -> DcStatus {
    guard(|| {
        let m = handle(set, "set")?.ops.lookup(op.name())?;
        if capacity < m.nnz() {
            return Err(Failure::Status(
                DcStatus::BufferTooSmall,
                format!("{} has {} entries, capacity {capacity}", op.name(), m.nnz()),
            ));
        }
        let nnz = m.nnz();
        let (r, c, v) = (
            slice_mut(row_idx, nnz, "row_idx")?,
            slice_mut(col_idx, nnz, "col_idx")?,
            slice_mut(values, nnz, "values")?,
        );
        for (t, (i, j, x)) in m.triplets().enumerate() {
            (r[t], c[t], v[t]) = (i, j, x);
        }
        Ok(())
    })
}

/// `out = op · x` for `x` with `cols(op) × channels` entries; `out` receives
/// `rows(op) × channels`.
///
/// # Safety
/// `set` must be a live handle and the buffers sized as above.
#[no_mangle]
pub unsafe extern "C" fn dc_apply(
    set: *const DcOperatorSet,
    op: DcOperator,
    x: *const f64,
    channels: usize,
    out: *mut f64,
) -> DcStatus {
    guard(|| {
        let m = handle(set, "set")?.ops.lookup(op.name())?;
        let input = Features::from_row_major(m.cols(), channels, slice(x, m.cols() * channels, "x")?.to_vec())?;
        let result = m.apply(&input)?;
        slice_mut(out, m.rows() * channels, "out")?.copy_from_slice(result.as_slice());
        Ok(())
    })
}

/// Initial vector features `Ĝ x0`: `x0` is `N × channels`, `out` is
/// `2N × channels`.
///
/// # Safety
/// `set` must be a live handle and the buffers sized as above.
#[no_mangle]
pub unsafe extern "C" fn dc_input_vector_features(
    set: *const DcOperatorSet,
    x0: *const f64,
    channels: usize,
    out: *mut f64,
) -> DcStatus {
    guard(|| {
        let set = handle(set, "set")?;
        let n = set.ops.n_points();
        let x0 = ScalarField(Features::from_row_major(n, channels, slice(x0, n * channels, "x0")?.to_vec())?);
        let v = input_vector_features(&x0, &set.ops)?;
        slice_mut(out, 2 * n * channels, "out")?.copy_from_slice(v.0.as_slice());
        Ok(())
    })
}

/// Parse block parameters from a NUL-terminated JSON string.
///
/// # Safety
/// `json` must be a valid C string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_params_from_json(json: *const c_char, out: *mut *mut DcParams) -> DcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Error::InvalidInput("parameters are not UTF-8".into()))?;
        let params = DeltaConvParams::from_json(text)?;
        *out = Box::into_raw(Box::new(DcParams { params }));
        Ok(())
    })
}

/// Release a handle from [`dc_params_from_json`]. Null is ignored.
///
/// # Safety
/// `params` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dc_params_free(params: *mut DcParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Scalar and vector output channel counts of a block.
///
/// # Safety
/// `params` must be a live handle; the outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_params_output_channels(
    params: *const DcParams,
    scalar_channels: *mut usize,
    vector_channels: *mut usize,
) -> DcStatus {
    guard(|| {
        let p = &handle(params, "params")?.params;
        if scalar_channels.is_null() || vector_channels.is_null() {
            return Err(null("channel output"));
        }
        (*scalar_channels, *vector_channels) = (p.c_out(), p.vector_out());
        Ok(())
    })
}

/// One block forward pass.
///
/// `x` is `N × c_x`. `v` is `2N × c_v`, or null to start from `Ĝ x`, in
/// which case `c_v` must equal `c_x`. Outputs are `N × c_out` and
/// `2N × v_out` per [`dc_params_output_channels`].
///
/// # Safety
/// Handles must be live and the buffers sized as above.
#[no_mangle]
pub unsafe extern "C" fn dc_forward(
    set: *const DcOperatorSet,
    params: *const DcParams,
    x: *const f64,
    c_x: usize,
    v: *const f64,
    c_v: usize,
    x_out: *mut f64,
    v_out: *mut f64,
) -> DcStatus {
    guard(|| {
        let set = handle(set, "set")?;
        let params = &handle(params, "params")?.params;
        let n = set.ops.n_points();
        let x = ScalarField(Features::from_row_major(n, c_x, slice(x, n * c_x, "x")?.to_vec())?);
        let v = if v.is_null() {
            if c_v != c_x {
                return Err(Error::InvalidArgument(format!(
                    "without vector inputs c_v must equal c_x ({c_v} != {c_x})"
                ))
                .into());
            }
            input_vector_features(&x, &set.ops)?
        } else {
            VectorField::new(Features::from_row_major(2 * n, c_v, slice(v, 2 * n * c_v, "v")?.to_vec())?)?
        };
        let (xs, vs) = deltaconv_forward(&x, &v, &set.ops, &set.graph, params)?;
        slice_mut(x_out, n * params.c_out(), "x_out")?.copy_from_slice(xs.0.as_slice());
        slice_mut(v_out, 2 * n * params.vector_out(), "v_out")?.copy_from_slice(vs.0.as_slice());
        Ok(())
    })
}

/// Copy the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dc_last_error_message(buf: *mut c_char, len: usize) -> usize {
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
