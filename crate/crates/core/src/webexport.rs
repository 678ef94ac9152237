//! Static viewer bundles: a JSON manifest plus one 8-bit RGBA PNG per plane.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::BlendMode;
use crate::geometry::{Camera, CAMERA_RECORD_LEN};
use crate::image::{load_png_rgba, save_png, Image};
use crate::mpi::Mpi;
use crate::util::{read_text, write_atomic};

pub const MANIFEST_FILE: &str = "manifest.json";
/// Also documents framebuffer precision and blend state for viewers.
pub const MANIFEST_VERSION: &str =
    "1; planes=rgba8-straight; blend=premultiplied-over far-to-near; framebuffer=rgba16f";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebMpi {
    pub camera: Vec<f64>,
    /// Ascending, far to near.
    pub disparities: Vec<f64>,
    /// Relative to the bundle root, far to near.
    pub planes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebManifest {
    pub version: String,
    /// `"grid"` or `"irregular"`.
    pub blend_mode: String,
    pub neighbors: usize,
    pub focal_px: f64,
    pub planes: usize,
    pub z_min: f64,
    /// `None` for an unbounded scene.
    pub z_max: Option<f64>,
    pub gamma: Option<f64>,
    pub width: usize,
    pub height: usize,
    pub mpis: Vec<WebMpi>,
}

pub fn plane_file_name(mpi: usize, plane: usize) -> String {
    format!("mpi_{mpi}/plane_{plane:03}.png")
}

fn manifest_err(msg: impl Into<String>) -> Error {
    Error::invalid(format!("web manifest: {}", msg.into()))
}

impl WebManifest {
    pub fn validate(&self) -> Result<()> {
        if self.mpis.is_empty() {
            return Err(manifest_err("no MPIs"));
        }
        for (k, m) in self.mpis.iter().enumerate() {
            if m.camera.len() != CAMERA_RECORD_LEN {
                return Err(manifest_err(format!(
                    "mpi {k}: camera has {} fields, expected {CAMERA_RECORD_LEN}",
                    m.camera.len()
                )));
            }
            Camera::from_record(&m.camera)?;
            if m.disparities.len() != m.planes.len() || m.planes.len() != self.planes {
                return Err(manifest_err(format!(
                    "mpi {k}: {} disparities and {} planes, expected {}",
                    m.disparities.len(),
                    m.planes.len(),
                    self.planes
                )));
            }
            if m.disparities.windows(2).any(|w| w[0] >= w[1]) {
                return Err(manifest_err(format!("mpi {k}: disparities not ascending")));
            }
        }
        Ok(())
    }
}

/// Writes `<dir>/manifest.json` and the plane PNGs.
pub fn export_web(mpis: &[Mpi], mode: &BlendMode, dir: impl AsRef<Path>) -> Result<WebManifest> {
    let dir = dir.as_ref();
    let first = mpis
        .first()
        .ok_or_else(|| Error::invalid("nothing to export"))?;
    let planes = first.plane_count();
    if mpis
        .iter()
        .any(|m| m.plane_count() != planes || m.camera().intrinsics != first.camera().intrinsics)
    {
        return Err(Error::invalid(
            "exported MPIs must share intrinsics and plane count",
        ));
    }
    let (blend_mode, neighbors, gamma) = match mode {
        BlendMode::GridBilinear => ("grid", 4, None),
        BlendMode::IrregularExponential(p) => ("irregular", p.neighbors, Some(p.gamma()?)),
    };
    let mut entries = Vec::with_capacity(mpis.len());
    for (k, mpi) in mpis.iter().enumerate() {
        let sub = dir.join(format!("mpi_{k}"));
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let names: Vec<String> = (0..planes).map(|d| plane_file_name(k, d)).collect();
        for (plane, name) in mpi.planes().iter().zip(&names) {
            save_png(plane, dir.join(name))?;
        }
        entries.push(WebMpi {
            camera: mpi.camera().to_record().to_vec(),
            disparities: mpi.disparities().to_vec(),
            planes: names,
        });
    }
    let z_max = first.z_max();
    let manifest = WebManifest {
        version: MANIFEST_VERSION.to_string(),
        blend_mode: blend_mode.to_string(),
        neighbors,
        focal_px: first.camera().intrinsics.focal_px,
        planes,
        z_min: first.z_min(),
        z_max: z_max.is_finite().then_some(z_max),
        gamma,
        width: first.width(),
        height: first.height(),
        mpis: entries,
    };
    manifest.validate()?;
    let json = serde_json::to_string_pretty(&manifest)?;
    write_atomic(&dir.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(manifest)
}

/// Loads a bundle back into MPIs with 8-bit quantized planes.
pub fn import_web(dir: impl AsRef<Path>) -> Result<(WebManifest, Vec<Mpi>)> {
    let dir = dir.as_ref();
    let manifest: WebManifest = serde_json::from_str(&read_text(&dir.join(MANIFEST_FILE))?)?;
    manifest.validate()?;
    let mut mpis = Vec::with_capacity(manifest.mpis.len());
    for m in &manifest.mpis {
        let camera = Camera::from_record(&m.camera)?;
        let planes = m
            .planes
            .iter()
            .map(|name| {
                let path = dir.join(name);
                if !path.is_file() {
                    return Err(manifest_err(format!(
                        "missing plane file {}",
                        path.display()
                    )));
                }
                let img = load_png_rgba(&path)?;
                Ok(img.map(|v| v as f32))
            })
            .collect::<Result<Vec<Image<f32>>>>()?;
        mpis.push(Mpi::new(camera, m.disparities.clone(), planes)?);
    }
    Ok((manifest, mpis))
}
