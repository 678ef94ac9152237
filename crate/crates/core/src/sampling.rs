//! View-sampling bounds and capture planning.
//!
//! Splitting a scene into `D` disparity layers that each carry their own
//! opacity lets the camera spacing grow `D` times beyond the occlusion-aware
//! Nyquist interval, limited by the requirement that every point stays inside
//! at least two neighboring frustums. In image space this reads
//! `d_max <= min(D, W / 2)` for the disparity of the nearest point between
//! adjacent views.

use crate::error::{Error, Result};

/// Empirical disparity ceiling (pixels) between adjacent captured views.
pub const DEFAULT_MAX_EMPIRICAL_DISPARITY: f64 = 64.0;

/// Camera and scene description used by the sampling bounds.
///
/// Only the ratio `pixel_m / focal_m` enters the image-space results, but
/// both are kept in meters to mirror the physical setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    /// Plane count `D` of each MPI.
    pub planes: usize,
    /// Image width `W` in pixels.
    pub width_px: f64,
    /// Focal length `f` in meters.
    pub focal_m: f64,
    /// Pixel pitch `delta_x` in meters.
    pub pixel_m: f64,
    /// Highest spatial frequency `B_x` of the continuous light field
    /// (cycles/m). `None` means unbounded, leaving the sensor as the limit.
    pub band_limit: Option<f64>,
    pub z_min: f64,
    /// May be `f64::INFINITY`.
    pub z_max: f64,
}

impl SamplingConfig {
    pub fn new(
        planes: usize,
        width_px: f64,
        focal_m: f64,
        pixel_m: f64,
        z_min: f64,
        z_max: f64,
    ) -> Result<Self> {
        let cfg = Self {
            planes,
            width_px,
            focal_m,
            pixel_m,
            band_limit: None,
            z_min,
            z_max,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sensor geometry from a horizontal field of view (radians); the pixel
    /// pitch follows from `W * delta_x / f = 2 tan(theta / 2)`.
    pub fn from_fov(
        planes: usize,
        width_px: f64,
        fov_x: f64,
        focal_m: f64,
        z_min: f64,
        z_max: f64,
    ) -> Result<Self> {
        if !(fov_x > 0.0 && fov_x < std::f64::consts::PI) {
            return Err(Error::invalid(format!(
                "field of view {fov_x} rad out of (0, pi)"
            )));
        }
        let pixel_m = 2.0 * focal_m * (fov_x / 2.0).tan() / width_px;
        Self::new(planes, width_px, focal_m, pixel_m, z_min, z_max)
    }

    pub fn with_band_limit(mut self, band_limit: f64) -> Result<Self> {
        self.band_limit = Some(band_limit);
        self.validate()?;
        Ok(self)
    }

    pub fn with_planes(mut self, planes: usize) -> Result<Self> {
        self.planes = planes;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        if self.planes == 0 {
            return Err(Error::invalid("plane count must be at least 1"));
        }
        positive(self.width_px, "W")?;
        positive(self.focal_m, "f")?;
        positive(self.pixel_m, "delta_x")?;
        positive(self.z_min, "z_min")?;
        if let Some(b) = self.band_limit {
            positive(b, "B_x")?;
        }
        if self.z_max.is_nan() || self.z_max < self.z_min {
            return Err(Error::invalid(format!(
                "z_max ({}) must not be below z_min ({})",
                self.z_max, self.z_min
            )));
        }
        Ok(())
    }

    /// `K_x = min(B_x, 1 / (2 delta_x))`.
    pub fn spatial_frequency(&self) -> f64 {
        let sensor = 1.0 / (2.0 * self.pixel_m);
        self.band_limit.map_or(sensor, |b| b.min(sensor))
    }

    /// Focal length in pixels, `f / delta_x`.
    pub fn focal_px(&self) -> f64 {
        self.focal_m / self.pixel_m
    }

    fn disparity_span(&self) -> Result<f64> {
        let far = if self.z_max.is_infinite() {
            0.0
        } else {
            1.0 / self.z_max
        };
        let span = 1.0 / self.z_min - far;
        if span <= 0.0 {
            return Err(Error::DegenerateScene(format!(
                "z_min = z_max = {}: a single depth needs no view sampling (unbounded interval)",
                self.z_min
            )));
        }
        Ok(span)
    }

    /// Pixel disparity of the nearest point between views `delta_u` apart.
    pub fn max_disparity_at(&self, delta_u: f64) -> f64 {
        delta_u * self.focal_m / (self.pixel_m * self.z_min)
    }
}

/// Occlusion-aware Nyquist camera spacing for a single layer (meters).
pub fn nyquist_interval(cfg: &SamplingConfig) -> Result<f64> {
    let span = cfg.disparity_span()?;
    Ok(1.0 / (2.0 * cfg.spatial_frequency() * cfg.focal_m * span))
}

/// Camera spacing allowed by `D` opacity-carrying layers: `D` times Nyquist.
pub fn mpi_interval(cfg: &SamplingConfig) -> Result<f64> {
    Ok(cfg.planes as f64 * nyquist_interval(cfg)?)
}

/// Spacing that keeps every scene point inside two neighboring frustums.
pub fn fov_interval(cfg: &SamplingConfig) -> f64 {
    cfg.width_px * cfg.pixel_m * cfg.z_min / (2.0 * cfg.focal_m)
}

pub fn max_interval(cfg: &SamplingConfig) -> Result<f64> {
    Ok(mpi_interval(cfg)?.min(fov_interval(cfg)))
}

/// Largest admissible nearest-point disparity between adjacent views, in pixels.
pub fn disparity_bound(planes: usize, width_px: f64) -> f64 {
    (planes as f64).min(width_px / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanTarget {
    /// Fix the rendering width, solve the view count.
    Width(usize),
    /// Fix the view count, solve the widest admissible rendering width.
    Views(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapturePlanRequest {
    /// Horizontal field of view (radians).
    pub theta: f64,
    /// Side length of the square view plane (meters).
    pub side: f64,
    pub z_min: f64,
    pub target: PlanTarget,
    pub max_disparity: f64,
    /// Densest grid the user will capture, if bounded.
    pub max_views: Option<u64>,
}

impl CapturePlanRequest {
    pub fn new(theta: f64, side: f64, z_min: f64, target: PlanTarget) -> Self {
        Self {
            theta,
            side,
            z_min,
            target,
            max_disparity: DEFAULT_MAX_EMPIRICAL_DISPARITY,
            max_views: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < std::f64::consts::PI) {
            return Err(Error::invalid(format!(
                "theta {} rad out of (0, pi)",
                self.theta
            )));
        }
        if !(self.side.is_finite() && self.side >= 0.0) {
            return Err(Error::invalid(format!(
                "view-plane side must be >= 0, got {}",
                self.side
            )));
        }
        if !(self.z_min.is_finite() && self.z_min > 0.0) {
            return Err(Error::invalid(format!(
                "z_min must be positive, got {}",
                self.z_min
            )));
        }
        if !(self.max_disparity.is_finite() && self.max_disparity >= 1.0) {
            return Err(Error::invalid("max disparity must be at least 1 px"));
        }
        match self.target {
            PlanTarget::Width(0) => Err(Error::invalid("width must be positive")),
            PlanTarget::Views(0) => Err(Error::invalid("view count must be positive")),
            PlanTarget::Views(_) if self.side == 0.0 => Err(Error::invalid(
                "solving for width needs a positive view-plane side",
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapturePlan {
    pub views: u64,
    /// Views per side of the square grid.
    pub per_side: u64,
    /// Grid spacing in meters.
    pub delta_u: f64,
    pub width_px: usize,
    pub focal_px: f64,
    /// Nearest-point disparity between adjacent views, pixels.
    pub max_disparity: f64,
    /// Recommended plane count, `ceil(max_disparity)`.
    pub planes: usize,
    /// View-plane coordinates (meters), row-major, centered on the origin.
    pub positions: Vec<(f64, f64)>,
    pub render_ops_per_mpi: u64,
    pub storage_samples: u64,
}

impl CapturePlan {
    pub fn to_key_values(&self) -> String {
        format!(
            "views={}\ngrid={}x{}\ndelta_u={}\nwidth={}\nfocal_px={}\nd_max={}\nplanes={}\n\
             render_ops_per_mpi={}\nstorage_samples={}\n",
            self.views,
            self.per_side,
            self.per_side,
            self.delta_u,
            self.width_px,
            self.focal_px,
            self.max_disparity,
            self.planes,
            self.render_ops_per_mpi,
            self.storage_samples
        )
    }

    pub fn positions_csv(&self) -> String {
        let mut s = String::from("x,y\n");
        for (x, y) in &self.positions {
            s.push_str(&format!("{x},{y}\n"));
        }
        s
    }
}

fn ceil_sqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r < n {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

fn ceil_tol(v: f64) -> f64 {
    (v - 1e-9).ceil()
}

fn focal_from_fov(width: f64, theta: f64) -> f64 {
    width / (2.0 * (theta / 2.0).tan())
}

/// Solves the free variable of a capture request.
///
/// The grid is square with `per_side = ceil(sqrt(N))` views per side spaced
/// `S / per_side` apart (cell centered), so the nearest-point disparity
/// between neighbors never exceeds the empirical cap, nor half the width.
pub fn capture_plan(req: &CapturePlanRequest) -> Result<CapturePlan> {
    req.validate()?;
    let tan_half = (req.theta / 2.0).tan();
    // neighbors closer than z_min * tan(theta / 2) keep points in two frustums
    let fov_side = ceil_tol(req.side / (req.z_min * tan_half)).max(2.0) as u64;

    let (per_side, width) = match req.target {
        PlanTarget::Width(w) => {
            let focal = focal_from_fov(w as f64, req.theta);
            let needed = req.side * focal / (req.z_min * req.max_disparity);
            let per_side = (ceil_tol(needed).max(2.0) as u64).max(fov_side);
            if let Some(limit) = req.max_views {
                if per_side * per_side > limit {
                    return Err(Error::Infeasible {
                        reason: format!(
                            "width {w} needs a {per_side}x{per_side} grid but at most {limit} views are allowed"
                        ),
                        min_views: per_side * per_side,
                    });
                }
            }
            (per_side, w)
        }
        PlanTarget::Views(n) => {
            let per_side = ceil_sqrt(n).max(2);
            if per_side < fov_side {
                return Err(Error::Infeasible {
                    reason: format!(
                        "{per_side} views per side leave scene points outside neighboring frustums"
                    ),
                    min_views: fov_side * fov_side,
                });
            }
            let limit = req.max_disparity * per_side as f64 * req.z_min * 2.0 * tan_half / req.side;
            let w = (limit + 1e-9).floor();
            if w < 1.0 {
                let min_side =
                    ceil_tol(req.side / (req.max_disparity * req.z_min * 2.0 * tan_half));
                return Err(Error::Infeasible {
                    reason: "no positive width satisfies the disparity cap".into(),
                    min_views: (min_side as u64).pow(2),
                });
            }
            (per_side, w as usize)
        }
    };

    let views = per_side * per_side;
    let delta_u = req.side / per_side as f64;
    let focal_px = focal_from_fov(width as f64, req.theta);
    let max_disparity = delta_u * focal_px / req.z_min;
    let planes = ceil_tol(max_disparity).max(1.0) as usize;
    let half = req.side / 2.0;
    let positions = (0..per_side)
        .flat_map(|j| {
            (0..per_side).map(move |i| {
                (
                    -half + (i as f64 + 0.5) * delta_u,
                    -half + (j as f64 + 0.5) * delta_u,
                )
            })
        })
        .collect();
    let per_mpi = (width as u64).pow(2) * planes as u64;
    Ok(CapturePlan {
        views,
        per_side,
        delta_u,
        width_px: width,
        focal_px,
        max_disparity,
        planes,
        positions,
        render_ops_per_mpi: per_mpi,
        storage_samples: per_mpi * views,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complexity {
    pub planes: usize,
    /// Plane-pixels composited per rendered MPI, `W^2 D`.
    pub render_ops_per_mpi: u64,
    /// Stored plane samples over all MPIs, `W^2 D N`.
    pub storage_samples: u64,
    /// `W^3 S / (2 sqrt(N) z_min tan(theta/2))`.
    pub render_ops_closed_form: f64,
    /// `W^3 S sqrt(N) / (2 z_min tan(theta/2))`.
    pub storage_closed_form: f64,
}

/// Rendering and storage cost of a `width x width` capture of `views` views,
/// with `D` set to the disparity between grid neighbors.
pub fn complexity(
    width: usize,
    views: u64,
    side: f64,
    z_min: f64,
    theta: f64,
) -> Result<Complexity> {
    if width == 0 || views == 0 {
        return Err(Error::invalid("width and view count must be positive"));
    }
    if !(side > 0.0 && z_min > 0.0 && theta > 0.0 && theta < std::f64::consts::PI) {
        return Err(Error::invalid(
            "side, z_min and theta must be positive (theta < pi)",
        ));
    }
    let tan_half = (theta / 2.0).tan();
    let per_side = ceil_sqrt(views);
    let delta_u = side / per_side as f64;
    let d_max = delta_u * focal_from_fov(width as f64, theta) / z_min;
    let planes = ceil_tol(d_max).max(1.0) as usize;
    let w = width as f64;
    let render_cf = w.powi(3) * side / (2.0 * (views as f64).sqrt() * z_min * tan_half);
    let per_mpi = (width as u64).pow(2) * planes as u64;
    Ok(Complexity {
        planes,
        render_ops_per_mpi: per_mpi,
        storage_samples: per_mpi * views,
        render_ops_closed_form: render_cf,
        storage_closed_form: render_cf * views as f64,
    })
}
