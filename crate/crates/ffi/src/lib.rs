//! C ABI over `mpi_fusion`.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free`. Every function returns an [`MfStatus`]; on failure
//! [`mf_last_error_message`] describes the error for the calling thread.
//! Buffers are caller-allocated, row-major, `f64`, with explicit lengths.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use mpi_fusion::bundle::{export_mpi, import_mpi};
use mpi_fusion::eval::psnr;
use mpi_fusion::fusion::{render_novel_view, BlendMode, IrregularParams};
use mpi_fusion::geometry::{Camera, Intrinsics, Pose};
use mpi_fusion::image::Image;
use mpi_fusion::mpi::{render_mpi, Mpi};
use mpi_fusion::sampling::{capture_plan, CapturePlanRequest, PlanTarget};
use mpi_fusion::Error;
use nalgebra::{Matrix3, Vector3};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    /// A caller buffer has the wrong length.
    BufferSize = 5,
    Infeasible = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfBlendKind {
    Irregular = 0,
    Grid = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfPlanTarget {
    /// `target_value` is the rendering width in pixels.
    Width = 0,
    /// `target_value` is the number of views.
    Views = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MfCapturePlan {
    pub views: u64,
    pub per_side: u64,
    /// Meters.
    pub delta_u: f64,
    pub width_px: u64,
    pub focal_px: f64,
    /// Pixels between adjacent views at the nearest depth.
    pub max_disparity: f64,
    pub planes: u64,
    pub render_ops_per_mpi: u64,
    pub storage_samples: u64,
}

pub struct MfCamera(Camera);

pub struct MfMpi(Mpi);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Failure = (MfStatus, String);

fn status_of(e: &Error) -> MfStatus {
    match e {
        Error::Io { .. } => MfStatus::Io,
        Error::Format { .. } | Error::Parse { .. } | Error::Image { .. } | Error::Json(_) => {
            MfStatus::Format
        }
        Error::Infeasible { .. } => MfStatus::Infeasible,
        _ => MfStatus::InvalidArgument,
    }
}

fn core(e: Error) -> Failure {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> Failure {
    (MfStatus::NullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MfStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn path(p: *const c_char) -> Result<PathBuf, Failure> {
    let s = deref(p, "path")?;
    let s = CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (MfStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
    Ok(PathBuf::from(s))
}

fn check_len(got: usize, want: usize, name: &str) -> Result<(), Failure> {
    if got != want {
        return Err((
            MfStatus::BufferSize,
            format!("{name} holds {got} values, expected {want}"),
        ));
    }
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or null after a
/// successful call. Valid until the next call into this library.
#[no_mangle]
pub extern "C" fn mf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a camera. `rotation` is the row-major 3x3 camera-to-world
/// rotation and `center` the camera position in world coordinates.
///
/// # Safety
/// `rotation` must point to 9 doubles, `center` to 3, `out` to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_camera_new(
    focal_px: f64,
    width: u32,
    height: u32,
    principal_x: f64,
    principal_y: f64,
    rotation: *const f64,
    center: *const f64,
    out: *mut *mut MfCamera,
) -> MfStatus {
    guard(|| {
        let r = slice(rotation, 9, "rotation")?;
        let c = slice(center, 3, "center")?;
        let intr = Intrinsics::new(
            focal_px,
            width as usize,
            height as usize,
            principal_x,
            principal_y,
        )
        .map_err(core)?;
        let pose =
            Pose::new(Matrix3::from_row_slice(r), Vector3::new(c[0], c[1], c[2])).map_err(core)?;
        put(out, MfCamera(Camera::new(intr, pose)))
    })
}

/// # Safety
/// `camera` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mf_camera_free(camera: *mut MfCamera) {
    if !camera.is_null() {
        drop(Box::from_raw(camera));
    }
}

/// Builds an MPI from `planes` straight-alpha RGBA `f32` planes stored far
/// to near, each `height x width x 4`, with ascending `disparities`.
///
/// # Safety
/// `rgba` must hold `planes * width * height * 4` floats and `disparities`
/// `planes` doubles for the camera's raster.
#[no_mangle]
pub unsafe extern "C" fn mf_mpi_new(
    camera: *const MfCamera,
    disparities: *const f64,
    planes: usize,
    rgba: *const f32,
    rgba_len: usize,
    out: *mut *mut MfMpi,
) -> MfStatus {
    guard(|| {
        let cam = deref(camera, "camera")?.0;
        let (w, h) = (cam.width(), cam.height());
        check_len(rgba_len, planes * w * h * 4, "rgba")?;
        let disps = slice(disparities, planes, "disparities")?.to_vec();
        let data = slice(rgba, rgba_len, "rgba")?;
        let slices = data
            .chunks_exact(w * h * 4)
            .map(|c| Image::from_vec(w, h, 4, c.to_vec()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(core)?;
        put(out, MfMpi(Mpi::new(cam, disps, slices).map_err(core)?))
    })
}

/// Reads an MPI bundle file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_mpi_import(path_utf8: *const c_char, out: *mut *mut MfMpi) -> MfStatus {
    guard(|| {
        let p = path(path_utf8)?;
        put(out, MfMpi(import_mpi(p).map_err(core)?))
    })
}

/// Writes an MPI bundle file.
///
/// # Safety
/// `mpi` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mf_mpi_export(mpi: *const MfMpi, path_utf8: *const c_char) -> MfStatus {
    guard(|| {
        let m = deref(mpi, "mpi")?;
        export_mpi(&m.0, path(path_utf8)?).map_err(core)
    })
}

/// # Safety
/// `mpi` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mf_mpi_free(mpi: *mut MfMpi) {
    if !mpi.is_null() {
        drop(Box::from_raw(mpi));
    }
}

/// # Safety
/// `mpi` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_mpi_dims(
    mpi: *const MfMpi,
    width: *mut u32,
    height: *mut u32,
    planes: *mut u32,
) -> MfStatus {
    guard(|| {
        let m = &deref(mpi, "mpi")?.0;
        if width.is_null() || height.is_null() || planes.is_null() {
            return Err(null("dimension output"));
        }
        *width = m.width() as u32;
        *height = m.height() as u32;
        *planes = m.plane_count() as u32;
        Ok(())
    })
}

/// Copy of the MPI's reference camera.
///
/// # Safety
/// `mpi` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_mpi_camera(mpi: *const MfMpi, out: *mut *mut MfCamera) -> MfStatus {
    guard(|| {
        let m = deref(mpi, "mpi")?;
        put(out, MfCamera(*m.0.camera()))
    })
}

/// Renders one MPI into `target`: premultiplied RGB (`W*H*3`) and
/// accumulated alpha (`W*H`) on the target raster. `alpha` may be null.
///
/// # Safety
/// Handles must be live; buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mf_mpi_render(
    mpi: *const MfMpi,
    target: *const MfCamera,
    rgb: *mut f64,
    rgb_len: usize,
    alpha: *mut f64,
    alpha_len: usize,
) -> MfStatus {
    guard(|| {
        let m = &deref(mpi, "mpi")?.0;
        let t = &deref(target, "target")?.0;
        let n = t.width() * t.height();
        check_len(rgb_len, n * 3, "rgb")?;
        let out = render_mpi(m, t);
        slice_mut(rgb, rgb_len, "rgb")?.copy_from_slice(out.rgb.data());
        if !alpha.is_null() {
            check_len(alpha_len, n, "alpha")?;
            slice_mut(alpha, alpha_len, "alpha")?.copy_from_slice(out.alpha.data());
        }
        Ok(())
    })
}

/// Blends `count` MPIs into `target`. Irregular mode uses `neighbors`
/// nearest MPIs with the falloff derived from the first MPI's focal length,
/// plane count and nearest depth; grid mode ignores `neighbors`.
/// `coverage` (`W*H`) may be null.
///
/// # Safety
/// `mpis` must hold `count` live handles; buffers must hold the stated
/// lengths.
#[no_mangle]
pub unsafe extern "C" fn mf_render_novel_view(
    mpis: *const *const MfMpi,
    count: usize,
    target: *const MfCamera,
    blend: MfBlendKind,
    neighbors: usize,
    rgb: *mut f64,
    rgb_len: usize,
    coverage: *mut f64,
    coverage_len: usize,
) -> MfStatus {
    guard(|| {
        let handles = slice(mpis, count, "mpis")?;
        let list = handles
            .iter()
            .map(|&p| deref(p, "mpi handle").map(|m| m.0.clone()))
            .collect::<Result<Vec<Mpi>, _>>()?;
        let first = list
            .first()
            .ok_or_else(|| (MfStatus::InvalidArgument, "no MPIs given".to_string()))?;
        let t = &deref(target, "target")?.0;
        let n = t.width() * t.height();
        check_len(rgb_len, n * 3, "rgb")?;
        let mode = match blend {
            MfBlendKind::Grid => BlendMode::GridBilinear,
            MfBlendKind::Irregular => {
                let mut p = IrregularParams::new(
                    first.camera().intrinsics.focal_px,
                    first.plane_count(),
                    first.z_min(),
                );
                p.neighbors = neighbors;
                BlendMode::IrregularExponential(p)
            }
        };
        let view = render_novel_view(&list, t, &mode).map_err(core)?;
        slice_mut(rgb, rgb_len, "rgb")?.copy_from_slice(view.rgb.data());
        if !coverage.is_null() {
            check_len(coverage_len, n, "coverage")?;
            slice_mut(coverage, coverage_len, "coverage")?.copy_from_slice(view.coverage.data());
        }
        Ok(())
    })
}

/// Capture plan for a square view plane of side `side` meters.
/// `max_disparity <= 0` selects the default cap of 64 px.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_capture_plan(
    theta_rad: f64,
    side: f64,
    z_min: f64,
    target: MfPlanTarget,
    target_value: u64,
    max_disparity: f64,
    out: *mut MfCapturePlan,
) -> MfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = match target {
            MfPlanTarget::Width => PlanTarget::Width(target_value as usize),
            MfPlanTarget::Views => PlanTarget::Views(target_value),
        };
        let mut req = CapturePlanRequest::new(theta_rad, side, z_min, t);
        if max_disparity > 0.0 {
            req.max_disparity = max_disparity;
        }
        let p = capture_plan(&req).map_err(core)?;
        *out = MfCapturePlan {
            views: p.views,
            per_side: p.per_side,
            delta_u: p.delta_u,
            width_px: p.width_px as u64,
            focal_px: p.focal_px,
            max_disparity: p.max_disparity,
            planes: p.planes as u64,
            render_ops_per_mpi: p.render_ops_per_mpi,
            storage_samples: p.storage_samples,
        };
        Ok(())
    })
}

/// PSNR in dB of two `W*H*channels` images with data range 1; identical
/// images give +infinity.
///
/// # Safety
/// `a` and `b` must each hold `width * height * channels` doubles.
#[no_mangle]
pub unsafe extern "C" fn mf_psnr(
    a: *const f64,
    b: *const f64,
    width: u32,
    height: u32,
    channels: u32,
    out: *mut f64,
) -> MfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (w, h, c) = (width as usize, height as usize, channels as usize);
        let n = w * h * c;
        let img = |p, name| -> Result<Image<f64>, Failure> {
            Image::from_vec(w, h, c, slice(p, n, name)?.to_vec()).map_err(core)
        };
        *out = psnr(&img(a, "a")?, &img(b, "b")?).map_err(core)?;
        Ok(())
    })
}
