use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use mpi_fusion_ffi::*;

const IDENTITY: [f64; 9] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];

fn camera(x: f64) -> *mut MfCamera {
    camera_at(x, 0.0)
}

fn camera_at(x: f64, y: f64) -> *mut MfCamera {
    let mut cam = ptr::null_mut();
    let center = [x, y, 0.0];
    let s = unsafe {
        mf_camera_new(
            10.0,
            6,
            4,
            2.5,
            1.5,
            IDENTITY.as_ptr(),
            center.as_ptr(),
            &mut cam,
        )
    };
    assert_eq!(s, MfStatus::Ok);
    cam
}

fn last_error() -> String {
    let p = mf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Two planes: an opaque far backdrop and a half-transparent near plane.
fn two_plane_mpi(cam: *const MfCamera) -> *mut MfMpi {
    let n = 6 * 4;
    let mut rgba = Vec::with_capacity(2 * n * 4);
    for _ in 0..n {
        rgba.extend_from_slice(&[0.2f32, 0.4, 0.6, 1.0]);
    }
    for _ in 0..n {
        rgba.extend_from_slice(&[1.0f32, 0.0, 0.0, 0.5]);
    }
    let disps = [0.25, 1.0];
    let mut mpi = ptr::null_mut();
    let s = unsafe { mf_mpi_new(cam, disps.as_ptr(), 2, rgba.as_ptr(), rgba.len(), &mut mpi) };
    assert_eq!(s, MfStatus::Ok);
    mpi
}

#[test]
fn render_matches_hand_composite() {
    let cam = camera(0.0);
    let mpi = two_plane_mpi(cam);
    let (mut w, mut h, mut d) = (0, 0, 0);
    assert_eq!(
        unsafe { mf_mpi_dims(mpi, &mut w, &mut h, &mut d) },
        MfStatus::Ok
    );
    assert_eq!((w, h, d), (6, 4, 2));
    let mut rgb = vec![0.0; 6 * 4 * 3];
    let mut alpha = vec![0.0; 6 * 4];
    let s = unsafe {
        mf_mpi_render(
            mpi,
            cam,
            rgb.as_mut_ptr(),
            rgb.len(),
            alpha.as_mut_ptr(),
            alpha.len(),
        )
    };
    assert_eq!(s, MfStatus::Ok);
    // near (1, 0, 0) at 0.5 over opaque (0.2, 0.4, 0.6)
    let expect = [0.5 + 0.5 * 0.2, 0.5 * 0.4, 0.5 * 0.6];
    for px in rgb.chunks(3) {
        for k in 0..3 {
            assert!((px[k] - expect[k]).abs() < 1e-7);
        }
    }
    assert!(alpha.iter().all(|&a| (a - 1.0).abs() < 1e-12));
    unsafe {
        mf_mpi_free(mpi);
        mf_camera_free(cam);
    }
}

#[test]
fn export_import_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = CString::new(dir.path().join("a.mpib").to_str().unwrap()).unwrap();
    let cam = camera(0.3);
    let mpi = two_plane_mpi(cam);
    assert_eq!(unsafe { mf_mpi_export(mpi, file.as_ptr()) }, MfStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(
        unsafe { mf_mpi_import(file.as_ptr(), &mut back) },
        MfStatus::Ok
    );
    let mut back_cam = ptr::null_mut();
    assert_eq!(unsafe { mf_mpi_camera(back, &mut back_cam) }, MfStatus::Ok);

    let target = camera(0.35);
    let mut a = vec![0.0; 72];
    let mut b = vec![0.0; 72];
    unsafe {
        assert_eq!(
            mf_mpi_render(mpi, target, a.as_mut_ptr(), 72, ptr::null_mut(), 0),
            MfStatus::Ok
        );
        assert_eq!(
            mf_mpi_render(back, target, b.as_mut_ptr(), 72, ptr::null_mut(), 0),
            MfStatus::Ok
        );
    }
    assert_eq!(a, b);
    unsafe {
        for m in [mpi, back] {
            mf_mpi_free(m);
        }
        for c in [cam, back_cam, target] {
            mf_camera_free(c);
        }
    }
}

#[test]
fn novel_view_blends_and_reports_coverage() {
    let cams = [
        camera_at(0.0, 0.0),
        camera_at(0.2, 0.0),
        camera_at(0.0, 0.2),
        camera_at(0.2, 0.2),
    ];
    let mpis = cams.map(|c| two_plane_mpi(c));
    let list: Vec<*const MfMpi> = mpis.iter().map(|&m| m as *const MfMpi).collect();
    let target = camera_at(0.1, 0.05);
    let mut rgb = vec![0.0; 72];
    let mut coverage = vec![0.0; 24];
    for kind in [MfBlendKind::Irregular, MfBlendKind::Grid] {
        let s = unsafe {
            mf_render_novel_view(
                list.as_ptr(),
                list.len(),
                target,
                kind,
                5,
                rgb.as_mut_ptr(),
                72,
                coverage.as_mut_ptr(),
                24,
            )
        };
        assert_eq!(s, MfStatus::Ok, "{kind:?}: {}", last_error());
        assert!(coverage.iter().all(|c| (0.0..=1.0 + 1e-12).contains(c)));
    }
    unsafe {
        for m in mpis {
            mf_mpi_free(m);
        }
        for c in cams {
            mf_camera_free(c);
        }
        mf_camera_free(target);
    }
}

#[test]
fn plan_example() {
    let mut plan = MfCapturePlan::default();
    let s = unsafe {
        mf_capture_plan(
            64f64.to_radians(),
            0.5,
            1.0,
            MfPlanTarget::Width,
            500,
            0.0,
            &mut plan,
        )
    };
    assert_eq!(s, MfStatus::Ok);
    assert_eq!((plan.views, plan.per_side, plan.width_px), (16, 4, 500));
    assert!(plan.max_disparity <= 64.0);
}

#[test]
fn errors_set_status_and_message() {
    let mut cam = ptr::null_mut();
    let center = [0.0; 3];
    let s = unsafe { mf_camera_new(10.0, 6, 4, 2.5, 1.5, ptr::null(), center.as_ptr(), &mut cam) };
    assert_eq!(s, MfStatus::NullPointer);
    assert!(last_error().contains("rotation"));

    let mirror = [-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let s = unsafe {
        mf_camera_new(
            10.0,
            6,
            4,
            2.5,
            1.5,
            mirror.as_ptr(),
            center.as_ptr(),
            &mut cam,
        )
    };
    assert_eq!(s, MfStatus::InvalidArgument);

    let missing = CString::new("/nonexistent/dir/x.mpib").unwrap();
    let mut mpi = ptr::null_mut();
    assert_eq!(
        unsafe { mf_mpi_import(missing.as_ptr(), &mut mpi) },
        MfStatus::Io
    );
    assert!(mpi.is_null());

    let mut plan = MfCapturePlan::default();
    let s = unsafe { mf_capture_plan(0.0, 0.5, 1.0, MfPlanTarget::Width, 500, 0.0, &mut plan) };
    assert_eq!(s, MfStatus::InvalidArgument);

    let a = [0.0; 4];
    let mut db = 0.0;
    assert_eq!(
        unsafe { mf_psnr(a.as_ptr(), a.as_ptr(), 2, 2, 1, &mut db) },
        MfStatus::Ok
    );
    assert!(db.is_infinite());
    assert!(
        mf_last_error_message().is_null(),
        "success clears the error"
    );
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libmpi_fusion_ffi.a");
    assert!(lib.is_file(), "static library missing at {}", lib.display());
    let out_dir = tempfile::tempdir().unwrap();
    let exe = out_dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-D_DEFAULT_SOURCE", "-I"])
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler runs");
    assert!(status.success(), "C build failed");
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "smoke exited {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
