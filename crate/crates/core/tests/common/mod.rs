//! Helpers shared by the integration tests: an independent per-ray
//! compositing oracle and random fixtures.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use mpi_fusion::build::{grid_cameras, heldout_cameras, SceneLayer};
use mpi_fusion::geometry::{Camera, Intrinsics, Pose};
use mpi_fusion::image::Image;
use mpi_fusion::mpi::{disparity_planes, Mpi};
use nalgebra::{Rotation3, Vector3};
use rand::Rng;

/// Straight RGBA texel, zero outside the plane.
fn texel(plane: &Image<f32>, x: i64, y: i64) -> [f64; 4] {
    if x < 0 || y < 0 || x >= plane.width() as i64 || y >= plane.height() as i64 {
        return [0.0; 4];
    }
    let p = plane.pixel(x as usize, y as usize);
    [p[0] as f64, p[1] as f64, p[2] as f64, p[3] as f64]
}

/// Premultiplied bilinear sample; transparent outside the pixel-center grid.
fn premultiplied_bilinear(plane: &Image<f32>, u: f64, v: f64) -> [f64; 4] {
    let (max_u, max_v) = ((plane.width() - 1) as f64, (plane.height() - 1) as f64);
    let tol = 1e-9;
    if u < -tol || v < -tol || u > max_u + tol || v > max_v + tol {
        return [0.0; 4];
    }
    let (u, v) = (u.clamp(0.0, max_u), v.clamp(0.0, max_v));
    let (x0, y0) = (u.floor(), v.floor());
    let (fx, fy) = (u - x0, v - y0);
    let mut out = [0.0; 4];
    for (dx, dy, w) in [
        (0, 0, (1.0 - fx) * (1.0 - fy)),
        (1, 0, fx * (1.0 - fy)),
        (0, 1, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    ] {
        let t = texel(plane, x0 as i64 + dx, y0 as i64 + dy);
        for k in 0..3 {
            out[k] += w * t[k] * t[3];
        }
        out[3] += w * t[3];
    }
    out
}

fn camera_ray(cam: &Camera, x: f64, y: f64) -> (Vector3<f64>, Vector3<f64>) {
    let k = &cam.intrinsics;
    let local = Vector3::new(
        (x - k.principal_x) / k.focal_px,
        (y - k.principal_y) / k.focal_px,
        1.0,
    );
    (*cam.pose.translation(), cam.pose.rotation() * local)
}

/// Per-ray render of `mpi` into `target`: intersect every target ray with
/// each plane, project into the reference camera, sample, and composite
/// far to near. Returns premultiplied RGB and accumulated alpha.
pub fn oracle_render(mpi: &Mpi, target: &Camera) -> (Image<f64>, Image<f64>) {
    let reference = mpi.camera();
    let rt = reference.pose.rotation().transpose();
    let rc = *reference.pose.translation();
    let k = &reference.intrinsics;
    let (w, h) = (target.width(), target.height());
    let mut rgb = Image::new(w, h, 3);
    let mut alpha = Image::new(w, h, 1);
    for y in 0..h {
        for x in 0..w {
            let (o, d) = camera_ray(target, x as f64, y as f64);
            let (o, d) = (rt * (o - rc), rt * d);
            let mut acc = [0.0f64; 4];
            for (plane, &disp) in mpi.planes().iter().zip(mpi.disparities()) {
                let p = if disp == 0.0 {
                    if d.z <= 0.0 {
                        continue;
                    }
                    d
                } else {
                    let t = (1.0 / disp - o.z) / d.z;
                    if !(t > 0.0) {
                        continue;
                    }
                    o + d * t
                };
                let u = k.focal_px * p.x / p.z + k.principal_x;
                let v = k.focal_px * p.y / p.z + k.principal_y;
                let s = premultiplied_bilinear(plane, u, v);
                for c in 0..4 {
                    acc[c] = s[c] + (1.0 - s[3]) * acc[c];
                }
            }
            rgb.pixel_mut(x, y).copy_from_slice(&acc[..3]);
            alpha.pixel_mut(x, y)[0] = acc[3];
        }
    }
    (rgb, alpha)
}

pub fn max_abs_diff(a: &Image<f64>, b: &Image<f64>) -> f64 {
    assert_eq!(a.dims(), b.dims());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn random_mpi<R: Rng>(rng: &mut R, w: usize, h: usize, planes: usize) -> Mpi {
    let focal = rng.gen_range(0.8..1.5) * w as f64;
    let cam = Camera::new(Intrinsics::centered(focal, w, h).unwrap(), Pose::identity());
    let z_min = rng.gen_range(0.5..2.0);
    let z_max = z_min * rng.gen_range(2.0..20.0);
    let disps = disparity_planes(planes, z_min, z_max).unwrap();
    let slices = (0..planes)
        .map(|_| {
            Image::from_fn(w, h, 4, |_, _, p| {
                for v in p.iter_mut().take(3) {
                    *v = rng.gen();
                }
                // a mix of empty, opaque and partial texels
                p[3] = match rng.gen_range(0..4) {
                    0 => 0.0,
                    1 => 1.0,
                    _ => rng.gen(),
                };
            })
        })
        .collect();
    Mpi::new(cam, disps, slices).unwrap()
}

/// A target near the reference: a few centimeters off, a few degrees turned.
pub fn nearby_target<R: Rng>(rng: &mut R, mpi: &Mpi) -> Camera {
    let t = Vector3::new(
        rng.gen_range(-0.1..0.1),
        rng.gen_range(-0.1..0.1),
        rng.gen_range(-0.1..0.1),
    );
    let r = Rotation3::from_euler_angles(
        rng.gen_range(-0.05..0.05),
        rng.gen_range(-0.05..0.05),
        rng.gen_range(-0.05..0.05),
    );
    Camera::new(mpi.camera().intrinsics, Pose::from_rotation(r, t).unwrap())
}

/// Flat straight-RGBA layer.
pub fn flat_layer(depth: f64, rgba: [f32; 4], extent: [f64; 4]) -> SceneLayer {
    SceneLayer::new(depth, Image::filled(2, 2, &rgba), extent).unwrap()
}

/// Capture grid and held-out targets for a given adjacent-view disparity.
pub fn grid_setup(
    intr: Intrinsics,
    per_side: usize,
    dmax: f64,
    z_min: f64,
    targets: usize,
    seed: u64,
) -> (Vec<Camera>, Vec<Camera>) {
    let spacing = dmax * z_min / intr.focal_px;
    (
        grid_cameras(intr, per_side, spacing).unwrap(),
        heldout_cameras(intr, per_side, spacing, targets, seed).unwrap(),
    )
}

/// The MPI stored in `tests/data/golden_2x2x1.mpib`.
pub fn golden_mpi() -> Mpi {
    let cam = Camera::new(
        Intrinsics::new(2.5, 2, 2, 0.5, 0.5).unwrap(),
        Pose::from_translation(Vector3::new(0.25, -0.5, 1.0)),
    );
    let plane = Image::from_vec(2, 2, 4, (0..16).map(|i| i as f32 / 16.0).collect()).unwrap();
    Mpi::new(cam, vec![0.5], vec![plane]).unwrap()
}
