//! Binary MPI bundle container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "MPIB1\n"                      6 bytes
//! W, H, D                        3 x u32
//! camera record                  17 x f64 (pose-file field order)
//! disparities (ascending)        D x f64
//! planes                         D*H*W*4 x f32, far plane first, row-major, RGBA
//! ```
//!
//! A `meta.txt` sidecar of `key=value` lines travels next to each bundle.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Camera, CAMERA_RECORD_LEN};
use crate::image::Image;
use crate::mpi::Mpi;
use crate::util::{read_file, read_text, write_atomic};

pub const MAGIC: &[u8; 6] = b"MPIB1\n";
pub const BUNDLE_FILE: &str = "mpi.bin";
pub const META_FILE: &str = "meta.txt";

/// Size in bytes of everything before the plane data.
pub fn header_len(planes: usize) -> usize {
    MAGIC.len() + 3 * 4 + CAMERA_RECORD_LEN * 8 + planes * 8
}

/// Exact encoded size of a `W x H x D` bundle.
pub fn bundle_len(width: usize, height: usize, planes: usize) -> usize {
    header_len(planes) + 16 * width * height * planes
}

pub fn encode_mpi(mpi: &Mpi) -> Vec<u8> {
    let (w, h, d) = (mpi.width(), mpi.height(), mpi.plane_count());
    let mut out = Vec::with_capacity(bundle_len(w, h, d));
    out.extend_from_slice(MAGIC);
    for v in [w, h, d] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in mpi.camera().to_record() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in mpi.disparities() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for plane in mpi.planes() {
        for v in plane.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.buf.len() as u64,
                message: format!(
                    "truncated while reading {what}: need {n} bytes at offset {}, file ends at {}",
                    self.pos,
                    self.buf.len()
                ),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn err(&self, at: usize, message: impl Into<String>) -> Error {
        Error::Format {
            offset: at as u64,
            message: message.into(),
        }
    }
}

pub fn decode_mpi(bytes: &[u8]) -> Result<Mpi> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(MAGIC.len(), "magic")?;
    if magic != MAGIC {
        let at = magic
            .iter()
            .zip(MAGIC)
            .position(|(a, b)| a != b)
            .unwrap_or(0);
        return Err(r.err(at, "bad magic, expected \"MPIB1\\n\""));
    }
    let dims_at = r.pos;
    let w = r.u32("width")? as usize;
    let h = r.u32("height")? as usize;
    let d = r.u32("plane count")? as usize;
    if w == 0 || h == 0 || d == 0 {
        return Err(r.err(dims_at, format!("zero dimension in header {w}x{h}x{d}")));
    }
    let cam_at = r.pos;
    let mut rec = [0.0; CAMERA_RECORD_LEN];
    for v in rec.iter_mut() {
        *v = r.f64("camera record")?;
    }
    let camera =
        Camera::from_record(&rec).map_err(|e| r.err(cam_at, format!("camera record: {e}")))?;
    if camera.width() != w || camera.height() != h {
        return Err(r.err(
            cam_at,
            format!(
                "camera raster {}x{} disagrees with header {w}x{h}",
                camera.width(),
                camera.height()
            ),
        ));
    }
    let disp_at = r.pos;
    let disparities = (0..d)
        .map(|_| r.f64("disparities"))
        .collect::<Result<Vec<_>>>()?;
    let expected = (d as u64) * (h as u64) * (w as u64) * 16;
    let remaining = (bytes.len() - r.pos) as u64;
    if remaining < expected {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!(
                "truncated plane data: need {expected} bytes from offset {}, only {remaining} present",
                r.pos
            ),
        });
    }
    if remaining > expected {
        return Err(r.err(r.pos + expected as usize, "trailing bytes after plane data"));
    }
    let planes_at = r.pos;
    let mut planes = Vec::with_capacity(d);
    for _ in 0..d {
        let raw = r.take(w * h * 16, "planes")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        planes.push(Image::from_vec(w, h, 4, data)?);
    }
    Mpi::new(camera, disparities, planes).map_err(|e| {
        let at = if e.to_string().contains("disparit") {
            disp_at
        } else {
            planes_at
        };
        r.err(at, e.to_string())
    })
}

pub fn export_mpi(mpi: &Mpi, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_mpi(mpi))
}

pub fn import_mpi(path: impl AsRef<Path>) -> Result<Mpi> {
    decode_mpi(&read_file(path.as_ref())?)
}

/// Contents of the `meta.txt` sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct MpiMeta {
    pub z_min: f64,
    pub z_max: f64,
    pub source: String,
    /// Unrecognized keys, preserved.
    pub extra: BTreeMap<String, String>,
}

impl MpiMeta {
    pub fn for_mpi(mpi: &Mpi, source: impl Into<String>) -> Self {
        Self {
            z_min: mpi.z_min(),
            z_max: mpi.z_max(),
            source: source.into(),
            extra: BTreeMap::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "z_min={}\nz_max={}\nsource={}\n",
            self.z_min, self.z_max, self.source
        );
        for (k, v) in &self.extra {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut num = |key: &str| -> Result<f64> {
            let v = map.remove(key).ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: 0,
                message: format!("missing key {key}"),
            })?;
            v.parse().map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                line: 0,
                message: format!("{key} is not a number: {v:?}"),
            })
        };
        let z_min = num("z_min")?;
        let z_max = num("z_max")?;
        let source = map.remove("source").unwrap_or_default();
        Ok(Self {
            z_min,
            z_max,
            source,
            extra: map,
        })
    }
}

/// Writes `<dir>/mpi.bin` and `<dir>/meta.txt`.
pub fn export_mpi_dir(mpi: &Mpi, meta: &MpiMeta, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    export_mpi(mpi, dir.join(BUNDLE_FILE))?;
    write_atomic(&dir.join(META_FILE), meta.to_text().as_bytes())
}

pub fn import_mpi_dir(dir: impl AsRef<Path>) -> Result<(Mpi, MpiMeta)> {
    let dir = dir.as_ref();
    let mpi = import_mpi(dir.join(BUNDLE_FILE))?;
    let meta_path = dir.join(META_FILE);
    let meta = if meta_path.exists() {
        MpiMeta::parse(&read_text(&meta_path)?, &meta_path)?
    } else {
        MpiMeta::for_mpi(&mpi, "")
    };
    Ok((mpi, meta))
}
