//! Blending renderings from neighboring MPIs into one novel view.
//!
//! Each neighbor `k` contributes its render `(C_k, alpha_k)` with a scalar
//! weight `w_k`. Per pixel the fused color is
//! `sum(w_k * alpha_k * C_k) / sum(w_k * alpha_k)`, so content an MPI never
//! saw (low accumulated alpha) is filled in by the others.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Camera, Pose};
use crate::image::Image;
use crate::mpi::{render_mpi_with_stats, Mpi, RenderOutput, RenderStats};

/// Denominator guard for the alpha-modulated blend.
pub const COVERAGE_EPSILON: f64 = 1e-6;
pub const DEFAULT_IRREGULAR_NEIGHBORS: usize = 5;
const LATTICE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrregularParams {
    pub focal_px: f64,
    pub planes: usize,
    pub z_min: f64,
    pub neighbors: usize,
}

impl IrregularParams {
    pub fn new(focal_px: f64, planes: usize, z_min: f64) -> Self {
        Self {
            focal_px,
            planes,
            z_min,
            neighbors: DEFAULT_IRREGULAR_NEIGHBORS,
        }
    }

    /// Falloff rate in 1/m: `focal_px / (D * z_min)`.
    pub fn gamma(&self) -> Result<f64> {
        if !(self.focal_px > 0.0 && self.z_min > 0.0 && self.planes >= 1) {
            return Err(Error::invalid(format!(
                "gamma needs focal_px > 0, D >= 1, z_min > 0 (got {}, {}, {})",
                self.focal_px, self.planes, self.z_min
            )));
        }
        Ok(self.focal_px / (self.planes as f64 * self.z_min))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlendMode {
    /// Bilinear weights over the four corners of the enclosing lattice cell.
    GridBilinear,
    /// `exp(-gamma * distance)` over the nearest MPIs.
    IrregularExponential(IrregularParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlendKind {
    GridBilinear,
    IrregularExponential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlendWeights {
    /// `(mpi index, unnormalized weight)`.
    pub entries: Vec<(usize, f64)>,
    pub kind: BlendKind,
    /// Set in irregular mode.
    pub gamma: Option<f64>,
}

impl BlendWeights {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::invalid("blend weights are empty"));
        }
        if self.entries.iter().any(|e| !e.1.is_finite() || e.1 < 0.0) {
            return Err(Error::invalid(
                "blend weights must be finite and non-negative",
            ));
        }
        if !self.entries.iter().any(|e| e.1 > 0.0) {
            return Err(Error::invalid("at least one blend weight must be positive"));
        }
        Ok(())
    }
}

pub fn blend_weights(target: &Pose, mpi_poses: &[Pose], mode: &BlendMode) -> Result<BlendWeights> {
    if mpi_poses.is_empty() {
        return Err(Error::invalid("no MPI poses to blend"));
    }
    if target.translation().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("target translation is not finite"));
    }
    match mode {
        BlendMode::IrregularExponential(p) => irregular_weights(target, mpi_poses, p),
        BlendMode::GridBilinear => grid_weights(target, mpi_poses),
    }
}

fn irregular_weights(
    target: &Pose,
    poses: &[Pose],
    params: &IrregularParams,
) -> Result<BlendWeights> {
    let gamma = params.gamma()?;
    if params.neighbors == 0 {
        return Err(Error::invalid("neighbor count must be positive"));
    }
    let t = target.translation();
    let mut by_dist: Vec<(usize, f64)> = poses
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (p.translation() - t).norm()))
        .collect();
    // stable sort keeps the lowest index first among equal distances
    by_dist.sort_by(|a, b| a.1.total_cmp(&b.1));
    by_dist.truncate(params.neighbors.min(poses.len()));
    let mut entries: Vec<(usize, f64)> = by_dist
        .iter()
        .map(|&(i, d)| (i, (-gamma * d).exp()))
        .collect();
    // exp underflow far outside the capture: keep the nearest alive
    if entries.iter().all(|e| e.1 == 0.0) {
        entries[0].1 = f64::MIN_POSITIVE;
    }
    Ok(BlendWeights {
        entries,
        kind: BlendKind::IrregularExponential,
        gamma: Some(gamma),
    })
}

/// Axis-aligned planar lattice recovered from camera centers.
#[derive(Debug, Clone)]
pub struct Lattice {
    /// World axes spanning the lattice plane.
    pub axes: [usize; 2],
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub counts: [usize; 2],
    /// `nodes[j * counts[0] + i]` is the MPI index at lattice node `(i, j)`.
    pub nodes: Vec<usize>,
}

fn cluster(values: &mut [f64]) -> Vec<f64> {
    values.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::new();
    for &v in values.iter() {
        match out.last() {
            Some(&last) if (v - last).abs() <= LATTICE_TOL => {}
            _ => out.push(v),
        }
    }
    out
}

impl Lattice {
    pub fn detect(poses: &[Pose]) -> Result<Self> {
        let uniques: Vec<Vec<f64>> = (0..3)
            .map(|a| cluster(&mut poses.iter().map(|p| p.translation()[a]).collect::<Vec<_>>()))
            .collect();
        let varying: Vec<usize> = (0..3).filter(|&a| uniques[a].len() > 1).collect();
        if varying.len() != 2 {
            return Err(Error::Mode(format!(
                "grid blending needs camera centers on an axis-aligned plane spanning two axes; \
                 found {} varying axes",
                varying.len()
            )));
        }
        let axes = [varying[0], varying[1]];
        let mut origin = [0.0; 2];
        let mut spacing = [0.0; 2];
        let mut counts = [0; 2];
        for (k, &a) in axes.iter().enumerate() {
            let u = &uniques[a];
            let step = (u[u.len() - 1] - u[0]) / (u.len() - 1) as f64;
            for (i, &v) in u.iter().enumerate() {
                if (v - (u[0] + step * i as f64)).abs() > LATTICE_TOL {
                    return Err(Error::Mode(format!(
                        "camera centers are not evenly spaced along axis {a}"
                    )));
                }
            }
            origin[k] = u[0];
            spacing[k] = step;
            counts[k] = u.len();
        }
        if counts[0] * counts[1] != poses.len() {
            return Err(Error::Mode(format!(
                "{} poses do not fill a {}x{} lattice",
                poses.len(),
                counts[0],
                counts[1]
            )));
        }
        let mut nodes = vec![usize::MAX; poses.len()];
        for (idx, p) in poses.iter().enumerate() {
            let t = p.translation();
            let i = ((t[axes[0]] - origin[0]) / spacing[0]).round() as usize;
            let j = ((t[axes[1]] - origin[1]) / spacing[1]).round() as usize;
            let slot = &mut nodes[j * counts[0] + i];
            if *slot != usize::MAX {
                return Err(Error::Mode(format!(
                    "poses {} and {idx} share a lattice node",
                    *slot
                )));
            }
            *slot = idx;
        }
        Ok(Self {
            axes,
            origin,
            spacing,
            counts,
            nodes,
        })
    }

    fn cell(&self, k: usize, coord: f64) -> (usize, f64) {
        let f =
            ((coord - self.origin[k]) / self.spacing[k]).clamp(0.0, (self.counts[k] - 1) as f64);
        let i0 = (f.floor() as usize).min(self.counts[k] - 2);
        (i0, f - i0 as f64)
    }
}

fn grid_weights(target: &Pose, poses: &[Pose]) -> Result<BlendWeights> {
    let lattice = Lattice::detect(poses)?;
    let t = target.translation();
    let (i0, fx) = lattice.cell(0, t[lattice.axes[0]]);
    let (j0, fy) = lattice.cell(1, t[lattice.axes[1]]);
    let n = lattice.counts[0];
    let node = |i: usize, j: usize| lattice.nodes[j * n + i];
    let entries = vec![
        (node(i0, j0), (1.0 - fx) * (1.0 - fy)),
        (node(i0 + 1, j0), fx * (1.0 - fy)),
        (node(i0, j0 + 1), (1.0 - fx) * fy),
        (node(i0 + 1, j0 + 1), fx * fy),
    ];
    Ok(BlendWeights {
        entries,
        kind: BlendKind::GridBilinear,
        gamma: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedView {
    pub rgb: Image<f64>,
    /// Normalized `sum(w * alpha)`; 0 marks pixels that used the
    /// unmodulated fallback.
    pub coverage: Image<f64>,
}

impl FusedView {
    pub fn fallback_fraction(&self) -> f64 {
        let n = self.coverage.data().len();
        self.coverage.data().iter().filter(|&&c| c == 0.0).count() as f64 / n as f64
    }
}

/// Alpha-modulated blend of `renders`, aligned one-to-one with `weights.entries`.
pub fn fuse(renders: &[RenderOutput], weights: &BlendWeights) -> Result<FusedView> {
    fuse_impl(renders, weights, true)
}

/// Blend ignoring accumulated alpha (every `alpha_k` taken as 1).
pub fn fuse_unmodulated(renders: &[RenderOutput], weights: &BlendWeights) -> Result<FusedView> {
    fuse_impl(renders, weights, false)
}

fn fuse_impl(
    renders: &[RenderOutput],
    weights: &BlendWeights,
    modulate: bool,
) -> Result<FusedView> {
    let first = renders
        .first()
        .ok_or_else(|| Error::invalid("no renders to fuse"))?;
    if renders.len() != weights.entries.len() {
        return Err(Error::invalid(format!(
            "{} renders but {} weights",
            renders.len(),
            weights.entries.len()
        )));
    }
    weights.validate()?;
    let (w, h) = (first.width(), first.height());
    if renders.iter().any(|r| r.width() != w || r.height() != h) {
        return Err(Error::invalid("renders differ in size"));
    }
    // the blend is invariant to a common weight scale
    let total: f64 = weights.entries.iter().map(|e| e.1).sum();
    let wts: Vec<f64> = weights.entries.iter().map(|e| e.1 / total).collect();

    let mut rgb = Image::new(w, h, 3);
    let mut coverage = Image::new(w, h, 1);
    rgb.data_mut()
        .par_chunks_mut(3)
        .zip(coverage.data_mut().par_iter_mut())
        .enumerate()
        .for_each(|(i, (out, cov))| {
            let mut num = [0.0; 3];
            let mut den = 0.0;
            for (r, &wk) in renders.iter().zip(&wts) {
                let a = if modulate { r.alpha.data()[i] } else { 1.0 };
                let c = &r.rgb.data()[i * 3..i * 3 + 3];
                let wa = wk * a;
                for k in 0..3 {
                    num[k] += wa * c[k];
                }
                den += wa;
            }
            if den >= COVERAGE_EPSILON {
                for k in 0..3 {
                    out[k] = (num[k] / den).clamp(0.0, 1.0);
                }
                *cov = den;
            } else {
                let mut num = [0.0; 3];
                for (r, &wk) in renders.iter().zip(&wts) {
                    let c = &r.rgb.data()[i * 3..i * 3 + 3];
                    for k in 0..3 {
                        num[k] += wk * c[k];
                    }
                }
                for k in 0..3 {
                    out[k] = num[k].clamp(0.0, 1.0);
                }
                *cov = 0.0;
            }
        });
    Ok(FusedView { rgb, coverage })
}

/// Renders of the blend neighbors of `target`, aligned with the returned weights.
pub fn render_neighbors(
    mpis: &[Mpi],
    target: &Camera,
    mode: &BlendMode,
) -> Result<(BlendWeights, Vec<RenderOutput>, RenderStats)> {
    let poses: Vec<Pose> = mpis.iter().map(|m| m.camera().pose).collect();
    let weights = blend_weights(&target.pose, &poses, mode)?;
    let results: Vec<(RenderOutput, RenderStats)> = weights
        .entries
        .par_iter()
        .map(|&(k, _)| render_mpi_with_stats(&mpis[k], target))
        .collect();
    let mut stats = RenderStats::default();
    let renders = results
        .into_iter()
        .map(|(r, s)| {
            stats.plane_pixels += s.plane_pixels;
            stats.skipped_planes += s.skipped_planes;
            r
        })
        .collect();
    Ok((weights, renders, stats))
}

pub fn render_novel_view(mpis: &[Mpi], target: &Camera, mode: &BlendMode) -> Result<FusedView> {
    let (weights, renders, _) = render_neighbors(mpis, target, mode)?;
    fuse(&renders, &weights)
}
