//! Camera paths through keyframes.

use nalgebra::{Rotation3, UnitQuaternion};

use crate::error::{Error, Result};
use crate::geometry::{Camera, Pose};

/// Keyframes interpolated with linear translation and quaternion slerp.
///
/// Every segment contributes `samples_per_segment` frames starting at its
/// first keyframe; the final keyframe closes the path. A single keyframe
/// yields one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewPath {
    keyframes: Vec<Camera>,
    samples_per_segment: usize,
}

impl ViewPath {
    pub fn new(keyframes: Vec<Camera>, samples_per_segment: usize) -> Result<Self> {
        if keyframes.is_empty() {
            return Err(Error::invalid("a view path needs at least one keyframe"));
        }
        if samples_per_segment == 0 {
            return Err(Error::invalid("samples per segment must be at least 1"));
        }
        let k0 = keyframes[0].intrinsics;
        if keyframes.iter().any(|k| k.intrinsics != k0) {
            return Err(Error::invalid("keyframes must share intrinsics"));
        }
        Ok(Self {
            keyframes,
            samples_per_segment,
        })
    }

    pub fn keyframes(&self) -> &[Camera] {
        &self.keyframes
    }

    pub fn frame_count(&self) -> usize {
        (self.keyframes.len() - 1) * self.samples_per_segment + 1
    }

    pub fn frame(&self, index: usize) -> Result<Camera> {
        if index >= self.frame_count() {
            return Err(Error::invalid(format!("frame {index} out of range")));
        }
        let seg = index / self.samples_per_segment;
        if seg + 1 >= self.keyframes.len() {
            return Ok(*self.keyframes.last().unwrap());
        }
        let t = (index % self.samples_per_segment) as f64 / self.samples_per_segment as f64;
        let (a, b) = (&self.keyframes[seg], &self.keyframes[seg + 1]);
        let qa = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            *a.pose.rotation(),
        ));
        let qb = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            *b.pose.rotation(),
        ));
        let q = qa
            .try_slerp(&qb, t, 1e-12)
            .unwrap_or(if t < 0.5 { qa } else { qb });
        let c = a.center().lerp(&b.center(), t);
        Ok(Camera::new(
            a.intrinsics,
            Pose::from_rotation(q.to_rotation_matrix(), c)?,
        ))
    }

    pub fn cameras(&self) -> Result<Vec<Camera>> {
        (0..self.frame_count()).map(|i| self.frame(i)).collect()
    }
}
