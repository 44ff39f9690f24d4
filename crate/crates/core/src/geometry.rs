//! Rotation and rigid-transform primitives.
//!
//! Quaternions are stored as `(w, x, y, z)` and canonicalized to `w >= 0`
//! after every producing operation, so logs never contain both `q` and `-q`
//! for the same rotation. Angles are radians, lengths are meters.

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Positions and directions.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Tolerance used when validating externally supplied rotations.
pub const ROTATION_INPUT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid rotation: orthonormality error {orthonormality_error:e}, det {determinant}")]
    InvalidRotation {
        orthonormality_error: f64,
        determinant: f64,
    },
    #[error("invalid quaternion: norm {norm}")]
    InvalidQuaternion { norm: f64 },
    #[error("non-finite value")]
    NonFinite,
}

/// A 3x3 rotation matrix, orthonormal with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotMat(Matrix3<f64>);

impl RotMat {
    pub const IDENTITY: RotMat = RotMat(Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0));

    /// Validates `m` against [`ROTATION_INPUT_TOLERANCE`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let err = orthonormality_error(&m);
        let det = m.determinant();
        if err > ROTATION_INPUT_TOLERANCE || (det - 1.0).abs() > ROTATION_INPUT_TOLERANCE {
            return Err(GeometryError::InvalidRotation {
                orthonormality_error: err,
                determinant: det,
            });
        }
        Ok(RotMat(m))
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        Self::from_matrix(Matrix3::from_row_slice(&[
            rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
            rows[2][1], rows[2][2],
        ]))
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        UnitQuat::from_axis_angle(axis, angle).to_rotation()
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn column(&self, i: usize) -> Vec3 {
        self.0.column(i).into_owned()
    }

    pub fn transpose(&self) -> RotMat {
        RotMat(self.0.transpose())
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    /// Largest elementwise deviation of `RᵀR` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }
}

fn orthonormality_error(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).amax()
}

impl Default for RotMat {
    fn default() -> Self {
        RotMat::IDENTITY
    }
}

impl std::ops::Mul for RotMat {
    type Output = RotMat;
    fn mul(self, rhs: RotMat) -> RotMat {
        RotMat(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vec3> for RotMat {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl std::ops::Mul<&Vec3> for &RotMat {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Serialize for RotMat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RotMat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        RotMat::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// An orthonormal 3x3 matrix with determinant ±1, for frame changes that may
/// flip handedness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameChange(Matrix3<f64>);

impl FrameChange {
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let err = orthonormality_error(&m);
        let det = m.determinant();
        if err > ROTATION_INPUT_TOLERANCE || (det.abs() - 1.0).abs() > ROTATION_INPUT_TOLERANCE {
            return Err(GeometryError::InvalidRotation {
                orthonormality_error: err,
                determinant: det,
            });
        }
        Ok(FrameChange(m))
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        Self::from_matrix(Matrix3::from_row_slice(&rows.concat()))
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        RotMat(self.0).rows()
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> FrameChange {
        FrameChange(self.0.transpose())
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn is_reflection(&self) -> bool {
        self.determinant() < 0.0
    }
}

impl Default for FrameChange {
    fn default() -> Self {
        FrameChange(Matrix3::identity())
    }
}

impl From<RotMat> for FrameChange {
    fn from(r: RotMat) -> Self {
        FrameChange(r.0)
    }
}

impl std::ops::Mul<&Vec3> for &FrameChange {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl std::ops::Mul<Vec3> for FrameChange {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Serialize for FrameChange {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FrameChange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        FrameChange::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// A unit quaternion in `(w, x, y, z)` order with `w >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuat(Quaternion<f64>);

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat(Quaternion::new(1.0, 0.0, 0.0, 0.0));

    /// Accepts components whose norm is within [`ROTATION_INPUT_TOLERANCE`] of one,
    /// then renormalizes.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let q = Quaternion::new(w, x, y, z);
        if q.coords.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let norm = q.norm();
        if (norm - 1.0).abs() > ROTATION_INPUT_TOLERANCE {
            return Err(GeometryError::InvalidQuaternion { norm });
        }
        Ok(Self::normalized(q))
    }

    pub fn from_array(wxyz: [f64; 4]) -> Result<Self, GeometryError> {
        Self::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3])
    }

    /// Normalizes and canonicalizes an arbitrary non-zero quaternion.
    fn normalized(q: Quaternion<f64>) -> Self {
        let mut q = q / q.norm();
        let flip = if q.w != 0.0 {
            q.w < 0.0
        } else {
            let v = q.imag();
            let lead = [v.x, v.y, v.z].into_iter().find(|c| *c != 0.0).unwrap_or(0.0);
            lead < 0.0
        };
        if flip {
            q = -q;
        }
        UnitQuat(q)
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return UnitQuat::IDENTITY;
        }
        let (s, c) = (angle * 0.5).sin_cos();
        let a = axis / n;
        Self::normalized(Quaternion::new(c, a.x * s, a.y * s, a.z * s))
    }

    pub fn w(&self) -> f64 {
        self.0.w
    }
    pub fn x(&self) -> f64 {
        self.0.i
    }
    pub fn y(&self) -> f64 {
        self.0.j
    }
    pub fn z(&self) -> f64 {
        self.0.k
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.0.w, self.0.i, self.0.j, self.0.k]
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn conjugate(&self) -> UnitQuat {
        Self::normalized(self.0.conjugate())
    }

    pub fn dot(&self, other: &UnitQuat) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        UnitQuaternion::new_unchecked(self.0) * v
    }

    pub fn to_rotation(&self) -> RotMat {
        matrix_from_quat(self)
    }

    pub fn from_rotation(m: &RotMat) -> UnitQuat {
        let r = Rotation3::from_matrix_unchecked(m.0);
        Self::normalized(UnitQuaternion::from_rotation_matrix(&r).into_inner())
    }
}

impl Default for UnitQuat {
    fn default() -> Self {
        UnitQuat::IDENTITY
    }
}

impl std::ops::Mul for UnitQuat {
    type Output = UnitQuat;
    fn mul(self, rhs: UnitQuat) -> UnitQuat {
        UnitQuat::normalized(self.0 * rhs.0)
    }
}

impl Serialize for UnitQuat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for UnitQuat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let a = <[f64; 4]>::deserialize(d)?;
        UnitQuat::from_array(a).map_err(serde::de::Error::custom)
    }
}

/// Rigid transform: position plus orientation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: UnitQuat) -> Self {
        Pose {
            position,
            orientation,
        }
    }
}

/// Validating conversion from a raw matrix.
pub fn quat_from_matrix(m: &Matrix3<f64>) -> Result<UnitQuat, GeometryError> {
    RotMat::from_matrix(*m).map(|r| UnitQuat::from_rotation(&r))
}

pub fn matrix_from_quat(q: &UnitQuat) -> RotMat {
    RotMat(UnitQuaternion::new_unchecked(q.0).to_rotation_matrix().into_inner())
}

/// Minimal rotation angle between two orientations, in `[0, π]`.
pub fn geodesic_distance(a: &UnitQuat, b: &UnitQuat) -> f64 {
    let rel = a.0.conjugate() * b.0;
    2.0 * rel.imag().norm().atan2(rel.w.abs())
}

/// In-plane rotation about the gripper approach (z) axis.
pub fn delta_r_inplane(theta1: f64) -> RotMat {
    let (s, c) = theta1.sin_cos();
    RotMat(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
}

/// Pitch rotation about the gripper lateral (y) axis.
pub fn delta_r_pitch(theta2: f64) -> RotMat {
    let (s, c) = theta2.sin_cos();
    RotMat(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
}

/// Rotates `current` toward `target` along the shortest arc by at most
/// `omega * dt` radians. Returns the target itself and `true` once it is
/// within reach.
pub fn slerp_step(current: &UnitQuat, target: &UnitQuat, omega: f64, dt: f64) -> (UnitQuat, bool) {
    let max_step = omega * dt;
    let d = geodesic_distance(current, target);
    if d <= max_step {
        return (*target, true);
    }
    let mut rel = current.0.conjugate() * target.0;
    if rel.w < 0.0 {
        rel = -rel;
    }
    let axis = rel.imag();
    let step = UnitQuat::from_axis_angle(&axis, max_step);
    (*current * step, false)
}

pub fn hadamard_scale(s: &Vec3, p: &Vec3) -> Vec3 {
    s.component_mul(p)
}
