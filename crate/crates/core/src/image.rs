//! Dense interleaved images and PNG I/O.
//!
//! Pixel coordinates are continuous with integer values at sample centers:
//! pixel `(x, y)` covers `[x - 0.5, x + 0.5]`. Every resampling routine in the
//! crate follows this convention.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb, Rgba};

use crate::error::{Error, Result};
use crate::util::write_atomic;

/// Scalar element of an [`Image`].
pub trait Sample: Copy + Default + PartialEq + Send + Sync + std::fmt::Debug + 'static {
    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
}

impl Sample for f32 {
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Sample for f64 {
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
}

/// Row-major, channel-interleaved image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T = f64> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Sample> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![T::default(); width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, value: &[T]) -> Self {
        let channels = value.len();
        let mut data = Vec::with_capacity(width * height * channels);
        for _ in 0..width * height {
            data.extend_from_slice(value);
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "image buffer has {} samples, expected {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, &mut [T]),
    ) -> Self {
        let mut img = Self::new(width, height, channels);
        for y in 0..height {
            for x in 0..width {
                f(x, y, img.pixel_mut(x, y));
            }
        }
        img
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [T] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn row(&self, y: usize) -> &[T] {
        let n = self.width * self.channels;
        &self.data[y * n..(y + 1) * n]
    }

    pub fn same_shape<U: Sample>(&self, other: &Image<U>) -> bool {
        self.dims() == other.dims()
    }

    pub fn map<U: Sample>(&self, f: impl Fn(T) -> U) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_f64(&self) -> Image<f64> {
        self.map(Sample::to_f64)
    }

    /// Keeps the first `n` channels of every pixel.
    pub fn take_channels(&self, n: usize) -> Image<T> {
        assert!(n <= self.channels);
        Image::from_fn(self.width, self.height, n, |x, y, px| {
            px.copy_from_slice(&self.pixel(x, y)[..n])
        })
    }

    /// Bilinear sample restricted to the image domain `[0, W-1] x [0, H-1]`.
    ///
    /// Returns `false` (leaving `out` untouched) when the point lies outside.
    pub fn sample_bilinear_inside(&self, x: f64, y: f64, out: &mut [f64]) -> bool {
        const EDGE: f64 = 1e-9;
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if !(x >= -EDGE && y >= -EDGE && x <= max_x + EDGE && y <= max_y + EDGE) {
            return false;
        }
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let (p00, p10, p01, p11) = (
            self.pixel(x0, y0),
            self.pixel(x1, y0),
            self.pixel(x0, y1),
            self.pixel(x1, y1),
        );
        for c in 0..self.channels {
            let top = p00[c].to_f64() * (1.0 - fx) + p10[c].to_f64() * fx;
            let bottom = p01[c].to_f64() * (1.0 - fx) + p11[c].to_f64() * fx;
            out[c] = top * (1.0 - fy) + bottom * fy;
        }
        true
    }
}

impl Image<f64> {
    /// Rec. 601 luma of an RGB(A) image; single-channel images pass through.
    pub fn luma(&self) -> Image<f64> {
        if self.channels == 1 {
            return self.clone();
        }
        Image::from_fn(self.width, self.height, 1, |x, y, out| {
            let p = self.pixel(x, y);
            out[0] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        })
    }
}

/// Loads a PNG as RGB in `[0, 1]`. 8- and 16-bit sources are both accepted.
pub fn load_png_rgb(path: impl AsRef<Path>) -> Result<Image<f64>> {
    load_png(path.as_ref(), 3)
}

/// Loads a PNG as straight-alpha RGBA in `[0, 1]`.
pub fn load_png_rgba(path: impl AsRef<Path>) -> Result<Image<f64>> {
    load_png(path.as_ref(), 4)
}

// Samples are k / 255 (or k / 65535) computed in f64.
fn load_png(path: &Path, channels: usize) -> Result<Image<f64>> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let wide = matches!(
        img.color().bytes_per_pixel() / img.color().channel_count(),
        2 | 4
    );
    let data: Vec<f64> = match (wide, channels) {
        (false, 3) => img
            .into_rgb8()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
        (false, _) => img
            .into_rgba8()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
        (true, 3) => img
            .into_rgb16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
        (true, _) => img
            .into_rgba16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
    };
    Image::from_vec(w, h, channels, data)
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes a 1-, 3- or 4-channel image as an 8-bit PNG.
pub fn encode_png<T: Sample>(img: &Image<T>) -> Result<Vec<u8>> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let bytes: Vec<u8> = img.data().iter().map(|v| quantize_u8(v.to_f64())).collect();
    let dynimg = match img.channels() {
        1 => DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes).unwrap()),
        3 => DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, bytes).unwrap()),
        4 => DynamicImage::ImageRgba8(ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, bytes).unwrap()),
        c => {
            return Err(Error::invalid(format!(
                "cannot encode {c}-channel image as PNG"
            )))
        }
    };
    let mut out = Cursor::new(Vec::new());
    dynimg
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: "<memory>".into(),
            source,
        })?;
    Ok(out.into_inner())
}

pub fn save_png<T: Sample>(img: &Image<T>, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_png(img)?;
    write_atomic(path.as_ref(), &bytes)
}
