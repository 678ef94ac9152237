//! Image quality metrics, the light field interpolation baseline, ablated
//! renderers and epipolar slices.

use rayon::prelude::*;

use crate::build::PosedImage;
use crate::error::{Error, Result};
use crate::fusion::{
    blend_weights, fuse, fuse_unmodulated, render_neighbors, render_novel_view, BlendMode,
};
use crate::geometry::{Camera, PlaneWarp, Pose};
use crate::image::Image;
use crate::mpi::{render_mpi, Mpi, RenderOutput};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_same(a: &Image<f64>, b: &Image<f64>) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::invalid(format!(
            "image shapes differ: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    if a.data().is_empty() {
        return Err(Error::invalid("empty images"));
    }
    Ok(())
}

pub fn mse(a: &Image<f64>, b: &Image<f64>) -> Result<f64> {
    check_same(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data().len() as f64)
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

/// PSNR in dB for data range 1; identical images give `f64::INFINITY`.
pub fn psnr(a: &Image<f64>, b: &Image<f64>) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

/// PSNR over pixels where `mask` exceeds `threshold`.
pub fn psnr_masked(
    a: &Image<f64>,
    b: &Image<f64>,
    mask: &Image<f64>,
    threshold: f64,
) -> Result<f64> {
    check_same(a, b)?;
    if mask.width() != a.width() || mask.height() != a.height() || mask.channels() != 1 {
        return Err(Error::invalid(
            "mask must be single-channel and match the images",
        ));
    }
    let c = a.channels();
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, m) in mask.data().iter().enumerate() {
        if *m > threshold {
            for k in 0..c {
                let e = a.data()[i * c + k] - b.data()[i * c + k];
                sum += e * e;
            }
            n += c;
        }
    }
    if n == 0 {
        return Err(Error::invalid("mask selects no pixels"));
    }
    Ok(psnr_from_mse(sum / n as f64))
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut w: Vec<f64> = (0..SSIM_WINDOW * SSIM_WINDOW)
        .map(|i| {
            let dx = (i % SSIM_WINDOW) as f64 - r;
            let dy = (i / SSIM_WINDOW) as f64 - r;
            (-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Mean SSIM over all window positions fully inside the image, computed on
/// Rec. 601 luma with an 11x11 Gaussian window (sigma 1.5).
pub fn ssim(a: &Image<f64>, b: &Image<f64>) -> Result<f64> {
    check_same(a, b)?;
    let (la, lb) = (a.luma(), b.luma());
    let (w, h) = (la.width(), la.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels"
        )));
    }
    let win = gaussian_window();
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let (nx, ny) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);
    let total: f64 = (0..ny)
        .into_par_iter()
        .map(|oy| {
            let mut row_sum = 0.0;
            for ox in 0..nx {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for j in 0..SSIM_WINDOW {
                    for i in 0..SSIM_WINDOW {
                        let g = win[j * SSIM_WINDOW + i];
                        let va = la.get(ox + i, oy + j, 0);
                        let vb = lb.get(ox + i, oy + j, 0);
                        ma += g * va;
                        mb += g * vb;
                        saa += g * va * va;
                        sbb += g * vb * vb;
                        sab += g * va * vb;
                    }
                }
                let va = saa - ma * ma;
                let vb = sbb - mb * mb;
                let cov = sab - ma * mb;
                row_sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
            row_sum
        })
        .sum();
    Ok(total / (nx * ny) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMetric {
    pub frame: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub frames: Vec<FrameMetric>,
}

impl MetricReport {
    pub fn push(&mut self, frame: usize, rendered: &Image<f64>, truth: &Image<f64>) -> Result<()> {
        self.frames.push(FrameMetric {
            frame,
            psnr: psnr(rendered, truth)?,
            ssim: ssim(rendered, truth)?,
        });
        Ok(())
    }

    /// Mean PSNR over frames; infinite if any frame is identical.
    pub fn mean_psnr(&self) -> f64 {
        self.frames.iter().map(|f| f.psnr).sum::<f64>() / self.frames.len() as f64
    }

    pub fn mean_ssim(&self) -> f64 {
        self.frames.iter().map(|f| f.ssim).sum::<f64>() / self.frames.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame,psnr,ssim\n");
        for f in &self.frames {
            s.push_str(&format!("{},{:.6},{:.6}\n", f.frame, f.psnr, f.ssim));
        }
        s
    }
}

/// Average of the extreme scene disparities, `(1/z_min + 1/z_max) / 2`.
pub fn mean_scene_disparity(z_min: f64, z_max: f64) -> f64 {
    let far = if z_max.is_infinite() {
        0.0
    } else {
        1.0 / z_max
    };
    0.5 * (1.0 / z_min + far)
}

/// Warps `src` onto the target raster through its plane at `disparity`;
/// alpha is the in-bounds mask.
pub fn reproject_view(src: &PosedImage, target: &Camera, disparity: f64) -> RenderOutput {
    let (w, h) = (target.width(), target.height());
    let mut rgb = Image::new(w, h, 3);
    let mut alpha = Image::new(w, h, 1);
    if let Some(warp) = PlaneWarp::new(&src.camera, target, disparity) {
        let mut px = [0.0; 3];
        for y in 0..h {
            for x in 0..w {
                if let Some((u, v)) = warp.apply(x as f64, y as f64) {
                    if src.image.sample_bilinear_inside(u, v, &mut px) {
                        rgb.pixel_mut(x, y).copy_from_slice(&px);
                        alpha.pixel_mut(x, y)[0] = 1.0;
                    }
                }
            }
        }
    }
    RenderOutput { rgb, alpha }
}

/// Light field interpolation: neighbors reprojected through one plane at
/// `mean_disparity`, blended with the MPI blending weights.
pub fn lfi_render(
    sources: &[PosedImage],
    target: &Camera,
    mean_disparity: f64,
    mode: &BlendMode,
) -> Result<Image<f64>> {
    if !(mean_disparity.is_finite() && mean_disparity >= 0.0) {
        return Err(Error::invalid(
            "mean disparity must be finite and non-negative",
        ));
    }
    let poses: Vec<Pose> = sources.iter().map(|s| s.camera.pose).collect();
    let weights = blend_weights(&target.pose, &poses, mode)?;
    let renders: Vec<RenderOutput> = weights
        .entries
        .par_iter()
        .map(|&(k, _)| reproject_view(&sources[k], target, mean_disparity))
        .collect();
    Ok(fuse(&renders, &weights)?.rgb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    /// Nearest MPI only.
    Single,
    /// Neighbors blended without accumulated-alpha modulation.
    Average,
    /// Alpha-modulated blending.
    Full,
}

pub fn ablation_render(
    mpis: &[Mpi],
    target: &Camera,
    ablation: Ablation,
    mode: &BlendMode,
) -> Result<Image<f64>> {
    match ablation {
        Ablation::Full => Ok(render_novel_view(mpis, target, mode)?.rgb),
        Ablation::Average => {
            let (weights, renders, _) = render_neighbors(mpis, target, mode)?;
            Ok(fuse_unmodulated(&renders, &weights)?.rgb)
        }
        Ablation::Single => {
            let t = target.pose.translation();
            let nearest = mpis
                .iter()
                .enumerate()
                .map(|(i, m)| (i, (m.camera().center() - t).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .ok_or_else(|| Error::invalid("no MPIs"))?
                .0;
            Ok(render_mpi(&mpis[nearest], target).rgb)
        }
    }
}

/// Stacks row `row` of every frame into a `frames x W` image.
pub fn epipolar_slice(frames: &[Image<f64>], row: usize) -> Result<Image<f64>> {
    let first = frames.first().ok_or_else(|| Error::invalid("no frames"))?;
    if frames.iter().any(|f| f.dims() != first.dims()) {
        return Err(Error::invalid("frames differ in shape"));
    }
    if row >= first.height() {
        return Err(Error::invalid(format!(
            "row {row} out of range (height {})",
            first.height()
        )));
    }
    let mut data = Vec::with_capacity(frames.len() * first.width() * first.channels());
    for f in frames {
        data.extend_from_slice(f.row(row));
    }
    Image::from_vec(first.width(), frames.len(), first.channels(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(n: usize, invert: bool) -> Image<f64> {
        Image::from_fn(n, n, 1, |x, y, p| {
            let on = (x + y) % 2 == 0;
            p[0] = if on != invert { 1.0 } else { 0.0 };
        })
    }

    #[test]
    fn psnr_examples() {
        let a = Image::filled(4, 4, &[0.5, 0.5, 0.5]);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = Image::filled(4, 4, &[0.6, 0.6, 0.6]);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        let z = Image::filled(4, 4, &[0.0; 3]);
        let o = Image::filled(4, 4, &[1.0; 3]);
        assert_eq!(psnr(&z, &o).unwrap(), 0.0);
        assert!(psnr(&a, &Image::filled(3, 4, &[0.5; 3])).is_err());
    }

    #[test]
    fn ssim_examples() {
        let a = Image::from_fn(16, 16, 3, |x, y, p| {
            p.copy_from_slice(&[x as f64 / 15.0, y as f64 / 15.0, 0.3]);
        });
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let zero = Image::filled(12, 12, &[0.0]);
        let one = Image::filled(12, 12, &[1.0]);
        let c1 = 1e-4;
        assert!((ssim(&zero, &one).unwrap() - c1 / (1.0 + c1)).abs() < 1e-12);
        assert!(ssim(
            &Image::filled(10, 20, &[0.0]),
            &Image::filled(10, 20, &[0.0])
        )
        .is_err());
    }

    #[test]
    fn ssim_checkerboard_matches_brute_force() {
        let (a, b) = (checkerboard(11, false), checkerboard(11, true));
        // single window: direct formula
        let win = gaussian_window();
        let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, g) in win.iter().enumerate() {
            let (va, vb) = (a.data()[i], b.data()[i]);
            ma += g * va;
            mb += g * vb;
            saa += g * va * va;
            sbb += g * vb * vb;
            sab += g * va * vb;
        }
        let (c1, c2) = (1e-4, 9e-4);
        let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
        let expect =
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        let got = ssim(&a, &b).unwrap();
        assert!(got < 0.0, "{got}");
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn metric_csv() {
        let mut r = MetricReport::default();
        let a = Image::filled(12, 12, &[0.5, 0.5, 0.5]);
        r.push(0, &a, &a).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("frame,psnr,ssim\n0,inf,1.000000"), "{csv}");
    }

    #[test]
    fn masked_psnr_ignores_unmasked() {
        let a = Image::from_vec(2, 1, 1, vec![0.0, 0.0]).unwrap();
        let b = Image::from_vec(2, 1, 1, vec![0.1, 1.0]).unwrap();
        let m = Image::from_vec(2, 1, 1, vec![1.0, 0.0]).unwrap();
        assert!((psnr_masked(&a, &b, &m, 0.5).unwrap() - 20.0).abs() < 1e-9);
        let none = Image::from_vec(2, 1, 1, vec![0.0, 0.0]).unwrap();
        assert!(psnr_masked(&a, &b, &none, 0.5).is_err());
    }

    #[test]
    fn epipolar_slice_shape_and_errors() {
        let frames: Vec<Image<f64>> = (0..3)
            .map(|i| Image::from_fn(4, 2, 1, |x, y, p| p[0] = (i * 100 + y * 10 + x) as f64))
            .collect();
        let s = epipolar_slice(&frames, 1).unwrap();
        assert_eq!(s.dims(), (4, 3, 1));
        assert_eq!(s.get(2, 2, 0), 212.0);
        assert!(epipolar_slice(&frames, 2).is_err());
        assert!(epipolar_slice(&[], 0).is_err());
        let same = vec![frames[0].clone(); 5];
        let s = epipolar_slice(&same, 0).unwrap();
        assert!((0..5).all(|r| s.row(r) == s.row(0)));
    }

    #[test]
    fn mean_disparity() {
        assert_eq!(mean_scene_disparity(1.0, f64::INFINITY), 0.5);
        assert_eq!(mean_scene_disparity(1.0, 4.0), 0.625);
    }
}
