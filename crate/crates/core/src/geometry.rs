//! Pinhole cameras, rigid poses and plane-induced homographies.
//!
//! Poses are camera-to-world: the columns of `rotation` are the camera axes
//! expressed in world coordinates and `translation` is the camera center. The
//! camera looks down its +z axis, +x to the right and +y down the image.

use std::path::Path;

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::util::read_text;

/// Number of decimal fields in one camera record of a pose file.
pub const CAMERA_RECORD_LEN: usize = 17;

const ORTHONORMAL_TOL: f64 = 1e-9;
/// Pose files written with a handful of decimals are snapped to the nearest
/// rotation when they deviate by less than this.
const POSE_FILE_SNAP_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub focal_px: f64,
    pub width_px: usize,
    pub height_px: usize,
    pub principal_x: f64,
    pub principal_y: f64,
}

impl Intrinsics {
    pub fn new(
        focal_px: f64,
        width_px: usize,
        height_px: usize,
        principal_x: f64,
        principal_y: f64,
    ) -> Result<Self> {
        if !(focal_px.is_finite() && focal_px > 0.0) {
            return Err(Error::invalid(format!(
                "focal length must be positive, got {focal_px}"
            )));
        }
        if width_px == 0 || height_px == 0 {
            return Err(Error::invalid("image dimensions must be at least 1 pixel"));
        }
        if !(principal_x.is_finite() && principal_y.is_finite()) {
            return Err(Error::invalid("principal point must be finite"));
        }
        Ok(Self {
            focal_px,
            width_px,
            height_px,
            principal_x,
            principal_y,
        })
    }

    /// Principal point at the raster center, `((W-1)/2, (H-1)/2)`.
    pub fn centered(focal_px: f64, width_px: usize, height_px: usize) -> Result<Self> {
        Self::new(
            focal_px,
            width_px,
            height_px,
            (width_px as f64 - 1.0) / 2.0,
            (height_px as f64 - 1.0) / 2.0,
        )
    }

    /// Intrinsics for a horizontal field of view given in radians.
    pub fn from_fov(fov_x: f64, width_px: usize, height_px: usize) -> Result<Self> {
        if !(fov_x > 0.0 && fov_x < std::f64::consts::PI) {
            return Err(Error::invalid(format!(
                "field of view {fov_x} rad out of (0, pi)"
            )));
        }
        Self::centered(
            width_px as f64 / (2.0 * (fov_x / 2.0).tan()),
            width_px,
            height_px,
        )
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.focal_px,
            0.0,
            self.principal_x,
            0.0,
            self.focal_px,
            self.principal_y,
            0.0,
            0.0,
            1.0,
        )
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        let inv_f = 1.0 / self.focal_px;
        Matrix3::new(
            inv_f,
            0.0,
            -self.principal_x * inv_f,
            0.0,
            inv_f,
            -self.principal_y * inv_f,
            0.0,
            0.0,
            1.0,
        )
    }

    pub fn pixel_count(&self) -> usize {
        self.width_px * self.height_px
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if rotation
            .iter()
            .chain(translation.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("pose contains non-finite values"));
        }
        let err = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        if err > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "rotation is not orthonormal (max deviation {err:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Identity orientation with the camera center at `center`.
    pub fn from_translation(center: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: center,
        }
    }

    pub fn from_rotation(rotation: Rotation3<f64>, center: Vector3<f64>) -> Result<Self> {
        Self::new(*rotation.matrix(), center)
    }

    /// Builds a pose after snapping a nearly-orthonormal matrix to the closest
    /// rotation. Used for text inputs with truncated decimals.
    pub fn new_snapped(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let err = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        if !err.is_finite() || err > POSE_FILE_SNAP_TOL {
            return Err(Error::invalid(format!(
                "rotation is not orthonormal (max deviation {err:e})"
            )));
        }
        if rotation.determinant() <= 0.0 {
            return Err(Error::invalid("rotation determinant must be positive"));
        }
        let snapped = Rotation3::from_matrix_eps(&rotation, 1e-15, 100, Rotation3::identity());
        Self::new(*snapped.matrix(), translation)
    }

    #[inline]
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    #[inline]
    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn same_orientation(&self, other: &Pose, tol: f64) -> bool {
        (self.rotation - other.rotation).abs().max() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub pose: Pose,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, pose: Pose) -> Self {
        Self { intrinsics, pose }
    }

    #[inline]
    pub fn center(&self) -> Vector3<f64> {
        self.pose.translation
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width_px
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height_px
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.pose.rotation.transpose() * (p - self.pose.translation)
    }

    pub fn camera_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.pose.rotation * p + self.pose.translation
    }

    /// Projects a world point, returning the pixel and its camera-space depth.
    pub fn project(&self, world_point: &Vector3<f64>) -> Result<(Vector2<f64>, f64)> {
        if world_point.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("world point must be finite"));
        }
        let pc = self.world_to_camera(world_point);
        if pc.z <= 0.0 {
            return Err(Error::BehindCamera { z: pc.z });
        }
        let k = &self.intrinsics;
        let px = Vector2::new(
            k.principal_x + k.focal_px * pc.x / pc.z,
            k.principal_y + k.focal_px * pc.y / pc.z,
        );
        Ok((px, pc.z))
    }

    /// World point seen at `pixel` whose camera-space depth is `depth`.
    pub fn unproject(&self, pixel: &Vector2<f64>, depth: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        let pc = Vector3::new(
            (pixel.x - k.principal_x) / k.focal_px * depth,
            (pixel.y - k.principal_y) / k.focal_px * depth,
            depth,
        );
        self.camera_to_world(&pc)
    }

    /// World-space direction (unnormalized, unit camera z) of the ray through `pixel`.
    pub fn ray_direction(&self, pixel: &Vector2<f64>) -> Vector3<f64> {
        let k = &self.intrinsics;
        self.pose.rotation
            * Vector3::new(
                (pixel.x - k.principal_x) / k.focal_px,
                (pixel.y - k.principal_y) / k.focal_px,
                1.0,
            )
    }

    /// `W H focal cx cy r00..r22 tx ty tz`
    pub fn to_record(&self) -> [f64; CAMERA_RECORD_LEN] {
        let k = &self.intrinsics;
        let r = &self.pose.rotation;
        let t = &self.pose.translation;
        [
            k.width_px as f64,
            k.height_px as f64,
            k.focal_px,
            k.principal_x,
            k.principal_y,
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.x,
            t.y,
            t.z,
        ]
    }

    /// Inverse of [`Camera::to_record`]. Rotations must be orthonormal to 1e-9.
    pub fn from_record(rec: &[f64]) -> Result<Self> {
        let (intrinsics, rotation, translation) = split_record(rec)?;
        Ok(Self::new(intrinsics, Pose::new(rotation, translation)?))
    }

    fn from_record_snapped(rec: &[f64]) -> Result<Self> {
        let (intrinsics, rotation, translation) = split_record(rec)?;
        Ok(Self::new(
            intrinsics,
            Pose::new_snapped(rotation, translation)?,
        ))
    }
}

fn split_record(rec: &[f64]) -> Result<(Intrinsics, Matrix3<f64>, Vector3<f64>)> {
    if rec.len() != CAMERA_RECORD_LEN {
        return Err(Error::invalid(format!(
            "camera record needs {CAMERA_RECORD_LEN} fields, got {}",
            rec.len()
        )));
    }
    let dim = |v: f64, what: &str| -> Result<usize> {
        if v.fract() != 0.0 || v < 1.0 || v > u32::MAX as f64 {
            return Err(Error::invalid(format!(
                "{what} must be a positive integer, got {v}"
            )));
        }
        Ok(v as usize)
    };
    let intrinsics = Intrinsics::new(
        rec[2],
        dim(rec[0], "width")?,
        dim(rec[1], "height")?,
        rec[3],
        rec[4],
    )?;
    let rotation = Matrix3::new(
        rec[5], rec[6], rec[7], rec[8], rec[9], rec[10], rec[11], rec[12], rec[13],
    );
    let translation = Vector3::new(rec[14], rec[15], rec[16]);
    Ok((intrinsics, rotation, translation))
}

/// Homography taking homogeneous reference pixels to target pixels through
/// the fronto-parallel reference plane at depth `1 / disparity`.
///
/// `disparity = 0` selects the plane at infinity. The matrix is returned
/// unnormalized so that the third homogeneous coordinate keeps its sign: a
/// reference pixel maps in front of the target camera exactly when that
/// coordinate is positive.
pub fn plane_homography(
    reference: &Camera,
    target: &Camera,
    disparity: f64,
) -> Result<Matrix3<f64>> {
    if !disparity.is_finite() || disparity < 0.0 {
        return Err(Error::invalid(format!(
            "disparity must be finite and >= 0, got {disparity}"
        )));
    }
    let m = plane_motion(reference, target, disparity);
    let h = target.intrinsics.matrix() * m * reference.intrinsics.inverse_matrix();
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("homography is not finite"));
    }
    Ok(h)
}

/// `R + t n^T d`, mapping reference camera coordinates of points on the plane
/// to target camera coordinates.
fn plane_motion(reference: &Camera, target: &Camera, disparity: f64) -> Matrix3<f64> {
    let rt = target.pose.rotation.transpose();
    let r = rt * reference.pose.rotation;
    let t = rt * (reference.pose.translation - target.pose.translation);
    let mut m = r;
    for row in 0..3 {
        m[(row, 2)] += t[row] * disparity;
    }
    m
}

/// Inverse warp from target pixels back onto one reference plane.
///
/// For a target pixel `(x, y, 1)`, `map * [x, y, 1]` is the homogeneous
/// reference pixel; the target ray meets the plane in front of the target
/// camera iff its third coordinate is positive.
#[derive(Debug, Clone, Copy)]
pub struct PlaneWarp {
    map: Matrix3<f64>,
}

impl PlaneWarp {
    /// `None` when the plane passes through the target center.
    pub fn new(reference: &Camera, target: &Camera, disparity: f64) -> Option<Self> {
        let m = plane_motion(reference, target, disparity);
        let det = m.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return None;
        }
        let m_inv = m.try_inverse()?;
        let map = reference.intrinsics.matrix() * m_inv * target.intrinsics.inverse_matrix();
        if map.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Self { map })
    }

    pub fn identity() -> Self {
        Self {
            map: Matrix3::identity(),
        }
    }

    /// Reference pixel hit by the ray through target pixel `(x, y)`.
    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let m = &self.map;
        let w = m[(2, 0)] * x + m[(2, 1)] * y + m[(2, 2)];
        if w <= 0.0 {
            return None;
        }
        let u = m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)];
        let v = m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)];
        Some((u / w, v / w))
    }
}

/// Pixel shift of a fronto-parallel point at `depth` between two cameras:
/// `|c_a - c_b| * focal_px / depth`, using `cam_a`'s focal length.
pub fn pixel_disparity(cam_a: &Camera, cam_b: &Camera, depth: f64) -> Result<f64> {
    if !(depth.is_finite() && depth > 0.0) {
        return Err(Error::invalid(format!(
            "depth must be positive, got {depth}"
        )));
    }
    if !cam_a.pose.same_orientation(&cam_b.pose, 1e-9) {
        log::warn!(
            "pixel_disparity on cameras with differing orientation; baseline-only value returned"
        );
    }
    let baseline = (cam_a.center() - cam_b.center()).norm();
    Ok(baseline * cam_a.intrinsics.focal_px / depth)
}

/// Parses a pose file body. `origin` is only used in error messages.
pub fn parse_pose_text(text: &str, origin: &Path) -> Result<Vec<Camera>> {
    let mut cams = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|e| parse_err(format!("bad number {tok:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if fields.len() != CAMERA_RECORD_LEN {
            return Err(parse_err(format!(
                "expected {CAMERA_RECORD_LEN} fields, found {}",
                fields.len()
            )));
        }
        cams.push(Camera::from_record_snapped(&fields).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(cams)
}

pub fn read_pose_file(path: impl AsRef<Path>) -> Result<Vec<Camera>> {
    let path = path.as_ref();
    parse_pose_text(&read_text(path)?, path)
}

pub fn format_pose_file(cams: &[Camera]) -> String {
    let mut out =
        String::from("# W H focal_px cx cy r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz\n");
    for cam in cams {
        let rec = cam.to_record();
        let fields: Vec<String> = rec.iter().map(|v| format!("{v}")).collect();
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}
