//! Multiplane images and their rendering.
//!
//! An [`Mpi`] is a stack of fronto-parallel straight-alpha RGBA planes placed
//! linearly in disparity inside a reference camera frustum. Plane 0 is the
//! farthest. Rendering warps every plane into the target view through its
//! plane homography, resamples it bilinearly in premultiplied space, and
//! composites far to near with the over operator.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Camera, PlaneWarp};
use crate::image::{Image, Sample};

/// Disparities (1/m) sampled linearly from `1/z_max` up to `1/z_min`,
/// both endpoints included. A single plane sits at `1/z_min`.
pub fn disparity_planes(count: usize, z_min: f64, z_max: f64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("plane count must be at least 1"));
    }
    if !(z_min.is_finite() && z_min > 0.0) {
        return Err(Error::invalid(format!(
            "z_min must be positive and finite, got {z_min}"
        )));
    }
    if !(z_max > z_min) {
        return Err(Error::invalid(format!(
            "z_max ({z_max}) must exceed z_min ({z_min})"
        )));
    }
    let near = 1.0 / z_min;
    if count == 1 {
        return Ok(vec![near]);
    }
    let far = if z_max.is_infinite() {
        0.0
    } else {
        1.0 / z_max
    };
    let step = (near - far) / (count - 1) as f64;
    let mut out: Vec<f64> = (0..count).map(|i| far + step * i as f64).collect();
    out[count - 1] = near;
    Ok(out)
}

/// Index of the plane whose disparity is closest to `disparity`.
/// Ties go to the farther plane.
pub fn nearest_plane(disparities: &[f64], disparity: f64) -> usize {
    let mut best = 0;
    let mut best_err = f64::INFINITY;
    for (i, &d) in disparities.iter().enumerate() {
        let err = (d - disparity).abs();
        if err < best_err {
            best = i;
            best_err = err;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mpi {
    camera: Camera,
    disparities: Vec<f64>,
    planes: Vec<Image<f32>>,
}

impl Mpi {
    pub fn new(camera: Camera, disparities: Vec<f64>, planes: Vec<Image<f32>>) -> Result<Self> {
        if disparities.is_empty() {
            return Err(Error::invalid("an MPI needs at least one plane"));
        }
        if disparities.len() != planes.len() {
            return Err(Error::invalid(format!(
                "{} disparities but {} planes",
                disparities.len(),
                planes.len()
            )));
        }
        if disparities.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::invalid(
                "disparities must be finite and non-negative",
            ));
        }
        if disparities.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("disparities must be strictly increasing"));
        }
        let (w, h) = (camera.width(), camera.height());
        for (i, p) in planes.iter().enumerate() {
            if p.dims() != (w, h, 4) {
                return Err(Error::invalid(format!(
                    "plane {i} is {:?}, expected {w}x{h}x4",
                    p.dims()
                )));
            }
            if let Some(v) = p.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid(format!(
                    "plane {i} has a sample {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            camera,
            disparities,
            planes,
        })
    }

    /// Fully transparent MPI.
    pub fn empty(camera: Camera, disparities: Vec<f64>) -> Result<Self> {
        let planes = vec![Image::new(camera.width(), camera.height(), 4); disparities.len()];
        Self::new(camera, disparities, planes)
    }

    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn disparities(&self) -> &[f64] {
        &self.disparities
    }

    pub fn planes(&self) -> &[Image<f32>] {
        &self.planes
    }

    pub fn plane_count(&self) -> usize {
        self.planes.len()
    }

    pub fn width(&self) -> usize {
        self.camera.width()
    }

    pub fn height(&self) -> usize {
        self.camera.height()
    }

    pub fn z_min(&self) -> f64 {
        1.0 / self.disparities[self.disparities.len() - 1]
    }

    /// Infinite when the farthest plane has zero disparity.
    pub fn z_max(&self) -> f64 {
        let d = self.disparities[0];
        if d == 0.0 {
            f64::INFINITY
        } else {
            1.0 / d
        }
    }

    /// Composite of the planes seen from the reference camera itself.
    pub fn self_composite(&self) -> RenderOutput {
        composite_over(&self.planes).expect("planes share dimensions by construction")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    /// Premultiplied composite color, 3 channels.
    pub rgb: Image<f64>,
    /// Accumulated opacity, 1 channel.
    pub alpha: Image<f64>,
}

impl RenderOutput {
    pub fn width(&self) -> usize {
        self.rgb.width()
    }

    pub fn height(&self) -> usize {
        self.rgb.height()
    }

    /// Color composited over an opaque background.
    pub fn over_background(&self, background: [f64; 3]) -> Image<f64> {
        Image::from_fn(self.width(), self.height(), 3, |x, y, out| {
            let a = self.alpha.get(x, y, 0);
            let c = self.rgb.pixel(x, y);
            for k in 0..3 {
                out[k] = c[k] + (1.0 - a) * background[k];
            }
        })
    }
}

/// Premultiplied RGBA sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Premultiplied {
    pub rgb: [f64; 3],
    pub alpha: f64,
}

impl Premultiplied {
    pub const TRANSPARENT: Self = Self {
        rgb: [0.0; 3],
        alpha: 0.0,
    };

    #[inline]
    pub fn from_straight(rgba: &[f64]) -> Self {
        let a = rgba[3];
        Self {
            rgb: [rgba[0] * a, rgba[1] * a, rgba[2] * a],
            alpha: a,
        }
    }

    /// `self` over `back`.
    #[inline]
    pub fn over(self, back: Self) -> Self {
        let t = 1.0 - self.alpha;
        Self {
            rgb: [
                self.rgb[0] + back.rgb[0] * t,
                self.rgb[1] + back.rgb[1] * t,
                self.rgb[2] + back.rgb[2] * t,
            ],
            alpha: self.alpha + back.alpha * t,
        }
    }
}

/// Over-composites straight-alpha RGBA planes given back to front.
pub fn composite_over<T: Sample>(planes_back_to_front: &[Image<T>]) -> Result<RenderOutput> {
    let first = planes_back_to_front
        .first()
        .ok_or_else(|| Error::invalid("nothing to composite"))?;
    let (w, h, c) = first.dims();
    if c != 4 {
        return Err(Error::invalid(format!(
            "expected RGBA planes, got {c} channels"
        )));
    }
    if let Some(p) = planes_back_to_front.iter().find(|p| p.dims() != (w, h, 4)) {
        return Err(Error::invalid(format!(
            "plane dimensions differ: {:?} vs {:?}",
            p.dims(),
            first.dims()
        )));
    }
    let mut acc = vec![Premultiplied::TRANSPARENT; w * h];
    let mut px = [0.0f64; 4];
    for plane in planes_back_to_front {
        for (i, a) in acc.iter_mut().enumerate() {
            let src = &plane.data()[i * 4..i * 4 + 4];
            for k in 0..4 {
                px[k] = src[k].to_f64();
            }
            *a = Premultiplied::from_straight(&px).over(*a);
        }
    }
    Ok(finish(w, h, &acc))
}

fn finish(w: usize, h: usize, acc: &[Premultiplied]) -> RenderOutput {
    let mut rgb = Image::new(w, h, 3);
    let mut alpha = Image::new(w, h, 1);
    for (i, a) in acc.iter().enumerate() {
        let out = &mut rgb.data_mut()[i * 3..i * 3 + 3];
        for k in 0..3 {
            out[k] = a.rgb[k].clamp(0.0, 1.0);
        }
        alpha.data_mut()[i] = a.alpha.clamp(0.0, 1.0);
    }
    RenderOutput { rgb, alpha }
}

/// Bilinear sample of a straight-alpha RGBA plane in premultiplied space.
///
/// Samples outside `[0, W-1] x [0, H-1]` (up to 1e-9) are transparent.
#[inline]
pub fn sample_premultiplied<T: Sample>(plane: &Image<T>, x: f64, y: f64) -> Premultiplied {
    const EDGE: f64 = 1e-9;
    let (w, h) = (plane.width() as isize, plane.height() as isize);
    let (max_x, max_y) = ((w - 1) as f64, (h - 1) as f64);
    if !(x >= -EDGE && y >= -EDGE && x <= max_x + EDGE && y <= max_y + EDGE) {
        return Premultiplied::TRANSPARENT;
    }
    let (x, y) = (x.clamp(0.0, max_x), y.clamp(0.0, max_y));
    let xf = x.floor();
    let yf = y.floor();
    let fx = x - xf;
    let fy = y - yf;
    let (x0, y0) = (xf as isize, yf as isize);
    let mut out = Premultiplied::TRANSPARENT;
    let taps = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ];
    for (tx, ty, wt) in taps {
        if wt == 0.0 || tx < 0 || ty < 0 || tx >= w || ty >= h {
            continue;
        }
        let p = plane.pixel(tx as usize, ty as usize);
        let a = p[3].to_f64();
        out.rgb[0] += wt * (p[0].to_f64() * a);
        out.rgb[1] += wt * (p[1].to_f64() * a);
        out.rgb[2] += wt * (p[2].to_f64() * a);
        out.alpha += wt * a;
    }
    out
}

/// Work counters of one MPI render.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderStats {
    /// (target pixel, plane) pairs resampled and composited.
    pub plane_pixels: u64,
    /// Planes dropped because they pass through the target center.
    pub skipped_planes: u32,
}

pub fn render_mpi(mpi: &Mpi, target: &Camera) -> RenderOutput {
    render_mpi_with_stats(mpi, target).0
}

pub fn render_mpi_with_stats(mpi: &Mpi, target: &Camera) -> (RenderOutput, RenderStats) {
    let (w, h) = (target.width(), target.height());
    let mut stats = RenderStats::default();
    let same_view = *target == mpi.camera;
    let warps: Vec<(usize, PlaneWarp)> = mpi
        .disparities
        .iter()
        .enumerate()
        .filter_map(|(i, &d)| {
            let warp = if same_view {
                Some(PlaneWarp::identity())
            } else {
                PlaneWarp::new(&mpi.camera, target, d)
            };
            match warp {
                Some(w) => Some((i, w)),
                None => {
                    log::warn!("skipping MPI plane {i} (disparity {d}): it passes through the target center");
                    stats.skipped_planes += 1;
                    None
                }
            }
        })
        .collect();
    stats.plane_pixels = (w * h) as u64 * warps.len() as u64;

    let mut acc = vec![Premultiplied::TRANSPARENT; w * h];
    acc.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let yf = y as f64;
        for (i, warp) in &warps {
            let plane = &mpi.planes[*i];
            for (x, a) in row.iter_mut().enumerate() {
                let s = match warp.apply(x as f64, yf) {
                    Some((u, v)) => sample_premultiplied(plane, u, v),
                    None => continue,
                };
                *a = s.over(*a);
            }
        }
    });
    (finish(w, h, &acc), stats)
}
