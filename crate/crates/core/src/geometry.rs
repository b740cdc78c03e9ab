// Copyright 2026 The altgrasp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Rigid-body primitives: 3-vectors, sign-canonical unit quaternions, poses,
//! spherical interpolation and the two grasp-ranking distances.
//!
//! Quaternions are always stored normalized and sign-canonical (`w >= 0`, and
//! when `w == 0` the first nonzero vector component is positive). Every
//! rotation-level operation is insensitive to the `q` / `-q` double cover.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Maximum deviation from unit norm accepted by [`UnitQuaternion::new`].
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Below this relative rotation angle (rad) SLERP degrades to normalized lerp.
pub const SLERP_SMALL_ANGLE: f64 = 1e-6;

/// Within this distance (rad) of a half-turn the SLERP geodesic is treated as
/// ambiguous and resolved with a fixed axis orientation.
pub const SLERP_ANTIPODAL_BAND: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("quaternion norm {norm} is not within {UNIT_NORM_TOLERANCE} of 1")]
    NonUnitQuaternion { norm: f64 },
    #[error("quaternion has zero norm or non-finite components")]
    DegenerateQuaternion,
    #[error("vector has non-finite components")]
    NonFinite,
    #[error("rotation axis has zero length")]
    ZeroAxis,
    #[error("interpolation parameter {0} is outside [0, 1]")]
    AlphaOutOfRange(f64),
}

/// Cartesian 3-vector. Positions are in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Builds a vector, rejecting NaN and infinities.
    pub fn try_new(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let v = Self::new(x, y, z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(GeometryError::NonFinite)
        }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction, or `None` for a zero vector.
    pub fn normalized(&self) -> Option<Vec3> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(*self * (1.0 / n))
        } else {
            None
        }
    }

    /// Point on the segment from `self` to `other` at fraction `t`.
    pub fn lerp(&self, other: &Vec3, t: f64) -> Vec3 {
        *self + (*other - *self) * t
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, rhs: Vec3) {
        *self = *self + rhs;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Serialize for Vec3 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(deserializer)?;
        Vec3::try_new(x, y, z).map_err(D::Error::custom)
    }
}

/// Unit quaternion `(w, x, y, z)` representing a rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuaternion {
    pub const fn identity() -> Self {
        Self {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    /// Accepts components whose norm is already within
    /// [`UNIT_NORM_TOLERANCE`] of 1; the result is renormalized and
    /// sign-canonicalized.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let norm = raw_norm(w, x, y, z);
        if !norm.is_finite() {
            return Err(GeometryError::DegenerateQuaternion);
        }
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(GeometryError::NonUnitQuaternion { norm });
        }
        Ok(Self::from_normed(w, x, y, z, norm))
    }

    /// Normalizes any finite, nonzero 4-vector.
    pub fn normalize(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let norm = raw_norm(w, x, y, z);
        if !norm.is_finite() || norm == 0.0 {
            return Err(GeometryError::DegenerateQuaternion);
        }
        Ok(Self::from_normed(w, x, y, z, norm))
    }

    // Components already unit up to rounding are kept as they are, so that
    // rebuilding a quaternion from its own components is lossless.
    fn from_normed(w: f64, x: f64, y: f64, z: f64, norm: f64) -> Self {
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            Self::from_raw_unchecked(w, x, y, z)
        } else {
            Self::from_raw_unchecked(w / norm, x / norm, y / norm, z / norm)
        }
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self, GeometryError> {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Rotation of `angle` radians about `axis` (any nonzero length).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, GeometryError> {
        if !axis.is_finite() || !angle.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let u = axis.normalized().ok_or(GeometryError::ZeroAxis)?;
        let (s, c) = (0.5 * angle).sin_cos();
        Self::normalize(c, u.x * s, u.y * s, u.z * s)
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self::from_raw_unchecked(c, s, 0.0, 0.0)
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self::from_raw_unchecked(c, 0.0, s, 0.0)
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self::from_raw_unchecked(c, 0.0, 0.0, s)
    }

    /// Exponential map: rotation by `|v|` radians about `v`.
    pub fn from_rotation_vector(v: Vec3) -> Self {
        let angle = v.norm();
        if angle < 1e-12 {
            let h = v * 0.5;
            return Self::normalize(1.0, h.x, h.y, h.z).unwrap_or_default();
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let u = v * (1.0 / angle);
        Self::from_raw_unchecked(c, u.x * s, u.y * s, u.z * s)
    }

    /// Logarithm map; the returned vector has length in `[0, pi]`.
    pub fn to_rotation_vector(&self) -> Vec3 {
        let v = self.vector();
        let s = v.norm();
        if s < 1e-12 {
            return v * 2.0;
        }
        let angle = 2.0 * s.atan2(self.w.abs());
        let sign = if self.w < 0.0 { -1.0 } else { 1.0 };
        v * (sign * angle / s)
    }

    /// Rotation whose columns are the given orthonormal basis vectors.
    pub fn from_basis(x_axis: Vec3, y_axis: Vec3, z_axis: Vec3) -> Result<Self, GeometryError> {
        let m = [
            [x_axis.x, y_axis.x, z_axis.x],
            [x_axis.y, y_axis.y, z_axis.y],
            [x_axis.z, y_axis.z, z_axis.z],
        ];
        Self::from_rotation_matrix(&m)
    }

    /// Shepperd's method on a row-major rotation matrix.
    pub fn from_rotation_matrix(m: &[[f64; 3]; 3]) -> Result<Self, GeometryError> {
        let trace = m[0][0] + m[1][1] + m[2][2];
        let (w, x, y, z) = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            (
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            (
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            (
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            (
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            )
        };
        Self::normalize(w, x, y, z)
    }

    /// Row-major rotation matrix.
    pub fn to_rotation_matrix(&self) -> [[f64; 3]; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Components in `(w, x, y, z)` order.
    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn dot(&self, other: &UnitQuaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn inverse(&self) -> Self {
        Self::from_raw_unchecked(self.w, -self.x, -self.y, -self.z)
    }

    /// Rotates a vector.
    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let u = self.vector();
        let t = u.cross(&v) * 2.0;
        v + t * self.w + u.cross(&t)
    }

    /// Rotated x, y and z unit axes.
    pub fn axis_x(&self) -> Vec3 {
        self.rotate(Vec3::X)
    }
    pub fn axis_y(&self) -> Vec3 {
        self.rotate(Vec3::Y)
    }
    pub fn axis_z(&self) -> Vec3 {
        self.rotate(Vec3::Z)
    }

    /// Hamilton product without renormalization or sign canonicalization.
    fn product_raw(&self, rhs: &UnitQuaternion) -> [f64; 4] {
        let (a, b) = (self, rhs);
        [
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        ]
    }

    fn from_raw_unchecked(w: f64, x: f64, y: f64, z: f64) -> Self {
        let flip = if w != 0.0 {
            w < 0.0
        } else if x != 0.0 {
            x < 0.0
        } else if y != 0.0 {
            y < 0.0
        } else {
            z < 0.0
        };
        // Adding 0.0 maps -0.0 to +0.0 so equal rotations compare bitwise equal.
        if flip {
            Self {
                w: -w + 0.0,
                x: -x + 0.0,
                y: -y + 0.0,
                z: -z + 0.0,
            }
        } else {
            Self {
                w: w + 0.0,
                x: x + 0.0,
                y: y + 0.0,
                z: z + 0.0,
            }
        }
    }
}

fn raw_norm(w: f64, x: f64, y: f64, z: f64) -> f64 {
    (w * w + x * x + y * y + z * z).sqrt()
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    /// Composition: `(a * b).rotate(v) == a.rotate(b.rotate(v))`.
    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        let [w, x, y, z] = self.product_raw(&rhs);
        Self::from_normed(w, x, y, z, raw_norm(w, x, y, z))
    }
}

impl fmt::Display for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.w, self.x, self.y, self.z)
    }
}

impl Serialize for UnitQuaternion {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for UnitQuaternion {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let a = <[f64; 4]>::deserialize(deserializer)?;
        UnitQuaternion::from_array(a).map_err(D::Error::custom)
    }
}

/// Rigid-body pose: position in meters plus orientation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    #[serde(rename = "p")]
    pub position: Vec3,
    #[serde(rename = "q")]
    pub orientation: UnitQuaternion,
}

impl Pose {
    pub fn new(position: Vec3, orientation: UnitQuaternion) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_position(position: Vec3) -> Self {
        Self::new(position, UnitQuaternion::identity())
    }

    /// `self * other`: applies `other` in the frame of `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.position + self.orientation.rotate(other.position),
            self.orientation * other.orientation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose::new(-inv.rotate(self.position), inv)
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.position + self.orientation.rotate(p)
    }
}

/// Spherical linear interpolation from `q0` (at `alpha = 0`) to `q1`
/// (at `alpha = 1`) along the shorter arc.
///
/// The rotation angle from `q0` to the result is exactly `alpha` times the
/// angle from `q0` to `q1`. Below [`SLERP_SMALL_ANGLE`] a normalized lerp is
/// used. Within [`SLERP_ANTIPODAL_BAND`] of a half-turn the relative rotation
/// axis is sign-canonicalized so the chosen arc is fixed.
pub fn slerp(
    q0: &UnitQuaternion,
    q1: &UnitQuaternion,
    alpha: f64,
) -> Result<UnitQuaternion, GeometryError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(GeometryError::AlphaOutOfRange(alpha));
    }
    if alpha == 0.0 {
        return Ok(*q0);
    }
    if alpha == 1.0 {
        return Ok(*q1);
    }
    let mut rel = q0.inverse().product_raw(q1);
    if rel[0] < 0.0 {
        rel = rel.map(|c| -c);
    }
    let axis = Vec3::new(rel[1], rel[2], rel[3]);
    let s = axis.norm();
    let angle = 2.0 * s.atan2(rel[0]);

    if angle < SLERP_SMALL_ANGLE {
        let sign = if q0.dot(q1) < 0.0 { -1.0 } else { 1.0 };
        let a = q0.to_array();
        let b = q1.to_array();
        let [w, x, y, z]: [f64; 4] =
            std::array::from_fn(|i| (1.0 - alpha) * a[i] + alpha * sign * b[i]);
        return UnitQuaternion::normalize(w, x, y, z);
    }

    let mut u = axis * (1.0 / s);
    let mut angle = angle;
    if std::f64::consts::PI - angle < SLERP_ANTIPODAL_BAND {
        let first = [u.x, u.y, u.z]
            .into_iter()
            .find(|c| c.abs() > 1e-12)
            .unwrap_or(1.0);
        if first < 0.0 {
            // Same rotation, opposite arc: rotate the other way round.
            u = -u;
            angle = 2.0 * std::f64::consts::PI - angle;
        }
    }
    let (sh, ch) = (0.5 * alpha * angle).sin_cos();
    let step = UnitQuaternion::from_raw_unchecked(ch, u.x * sh, u.y * sh, u.z * sh);
    Ok(*q0 * step)
}

/// Chord distance `min(|qa + qb|, |qa - qb|)` between two orientations, in
/// `[0, sqrt(2)]`.
pub fn angular_chord_distance(qa: &UnitQuaternion, qb: &UnitQuaternion) -> f64 {
    let a = qa.to_array();
    let b = qb.to_array();
    let mut plus = 0.0;
    let mut minus = 0.0;
    for i in 0..4 {
        plus += (a[i] + b[i]) * (a[i] + b[i]);
        minus += (a[i] - b[i]) * (a[i] - b[i]);
    }
    plus.sqrt().min(minus.sqrt())
}

/// Euclidean distance between two points.
pub fn linear_distance(pa: &Vec3, pb: &Vec3) -> f64 {
    (*pa - *pb).norm()
}

/// Rotation angle of `qa^-1 * qb`, in `[0, pi]`.
pub fn rotation_angle_between(qa: &UnitQuaternion, qb: &UnitQuaternion) -> f64 {
    let rel = qa.inverse().product_raw(qb);
    let s = Vec3::new(rel[1], rel[2], rel[3]).norm();
    2.0 * s.atan2(rel[0].abs())
}
