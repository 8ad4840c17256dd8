//! Rotation and spherical-coordinate mathematics.
//!
//! Conventions used throughout the crate:
//!
//! * Quaternions use the Hamilton product and are stored as `(w, x, y, z)`.
//! * An attitude quaternion for frame `F` rotates vectors expressed in `F`
//!   into ICRF coordinates: `v_icrf = q.rotate(&v_f)`. Composition
//!   `a * b` applies `b` first.
//! * Camera frames have `+z` along the boresight, `+x` along increasing
//!   pixel column `u` and `+y` along increasing pixel row `v`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

pub const ARCSEC_PER_RAD: f64 = 180.0 * 3600.0 / PI;

const UNIT_AXIS_TOL: f64 = 1e-9;
const DEGENERATE_TWIST_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("swing-twist decomposition undefined: half-turn perpendicular to the twist axis")]
    DegenerateDecomposition,
}

#[inline]
pub fn arcsec_to_rad(arcsec: f64) -> f64 {
    arcsec / ARCSEC_PER_RAD
}

#[inline]
pub fn rad_to_arcsec(rad: f64) -> f64 {
    rad * ARCSEC_PER_RAD
}

/// Skew-symmetric cross-product matrix, `skew(a) * b == a.cross(&b)`.
pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Angle between two unit vectors in `[0, π]`.
///
/// Uses `atan2(|a×b|, a·b)`, which keeps full relative precision down to
/// milliarcsecond separations where `acos` of the dot product does not.
pub fn angular_separation(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// A rotation stored as a unit quaternion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    /// Builds a quaternion from raw components, normalizing them.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-300 {
            return Err(GeometryError::InvalidArgument(format!(
                "quaternion ({w}, {x}, {y}, {z}) cannot be normalized"
            )));
        }
        Ok(Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    fn normalized(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    /// Rotation by `angle` radians about the unit vector `axis` (right-hand rule).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Result<Self, GeometryError> {
        let n = axis.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_AXIS_TOL {
            return Err(GeometryError::InvalidArgument(format!(
                "rotation axis must be unit length, got norm {n}"
            )));
        }
        if !angle.is_finite() {
            return Err(GeometryError::InvalidArgument(format!(
                "rotation angle must be finite, got {angle}"
            )));
        }
        let (s, c) = (0.5 * angle).sin_cos();
        Ok(Self::normalized(c, axis.x * s, axis.y * s, axis.z * s))
    }

    /// Exponential map: rotation about `v / |v|` by `|v|` radians.
    pub fn from_rotation_vector(v: &Vec3) -> Self {
        let theta = v.norm();
        if theta < 1e-8 {
            // Second-order series of sin(θ/2)/θ and cos(θ/2).
            let k = 0.5 - theta * theta / 48.0;
            return Self::normalized(1.0 - theta * theta / 8.0, v.x * k, v.y * k, v.z * k);
        }
        let (s, c) = (0.5 * theta).sin_cos();
        let k = s / theta;
        Self::normalized(c, v.x * k, v.y * k, v.z * k)
    }

    /// Logarithm map, returning the shortest rotation vector (norm ≤ π).
    pub fn to_rotation_vector(&self) -> Vec3 {
        let q = self.canonical();
        let v = q.vector();
        let s = v.norm();
        if s < 1e-300 {
            return Vec3::zeros();
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    /// Rotation taking the camera frame described by a boresight pointing and
    /// roll into ICRF. At zero roll the camera `+x` axis points toward
    /// increasing right ascension (east) and `+y = z × x`.
    pub fn from_pointing(ra_deg: f64, dec_deg: f64, roll_deg: f64) -> Result<Self, GeometryError> {
        let boresight = SkyCoord::new(ra_deg, dec_deg)?.to_unit();
        let ra = ra_deg.to_radians();
        let east = Vec3::new(-ra.sin(), ra.cos(), 0.0);
        let north = boresight.cross(&east);
        let (s, c) = roll_deg.to_radians().sin_cos();
        let x_axis = east * c + north * s;
        let y_axis = boresight.cross(&x_axis);
        Ok(Self::from_matrix(&Matrix3::from_columns(&[
            x_axis, y_axis, boresight,
        ])))
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

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    /// Components in serialization order `(w, x, y, z)`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn inverse(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Hamilton product `self * rhs`, renormalized.
    pub fn compose(&self, rhs: &Self) -> Self {
        let (a, b) = (self, rhs);
        Self::normalized(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        let u = self.vector();
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(&t)
    }

    /// Rotation matrix `R` with `R * v == self.rotate(&v)`.
    pub fn to_matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Converts a proper rotation matrix (Shepperd's method).
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        if trace > m[(0, 0)] && trace > m[(1, 1)] && trace > m[(2, 2)] {
            let s = (1.0 + trace).sqrt() * 2.0;
            Self::normalized(
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            Self::normalized(
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            Self::normalized(
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            Self::normalized(
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        }
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        2.0 * self.vector().norm().atan2(self.w.abs())
    }

    /// Angle of the relative rotation `self⁻¹ * other`.
    pub fn angle_to(&self, other: &Self) -> f64 {
        self.inverse().compose(other).angle()
    }

    /// Sign-canonical representative: `w ≥ 0`, ties broken by the first
    /// nonzero vector component being positive.
    pub fn canonical(&self) -> Self {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else if self.x != 0.0 {
            self.x < 0.0
        } else if self.y != 0.0 {
            self.y < 0.0
        } else {
            self.z < 0.0
        };
        if flip {
            Self {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            *self
        }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        self.compose(&rhs)
    }
}

impl Mul<&UnitQuaternion> for &UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, rhs: &UnitQuaternion) -> UnitQuaternion {
        self.compose(rhs)
    }
}

impl fmt::Display for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.canonical();
        write!(f, "({}, {}, {}, {})", c.w, c.x, c.y, c.z)
    }
}

/// Result of factoring `q = swing * twist` about an axis.
#[derive(Clone, Copy, Debug)]
pub struct SwingTwist {
    pub swing: UnitQuaternion,
    pub twist: UnitQuaternion,
    /// Rotation angle of the swing, `[0, π]` radians.
    pub across: f64,
    /// Signed twist angle about the axis, `(−π, π]` radians.
    pub about: f64,
}

/// Splits `q` into a twist about `axis` followed by a swing whose rotation
/// axis is perpendicular to `axis`.
pub fn swing_twist_decompose(q: &UnitQuaternion, axis: &Vec3) -> Result<SwingTwist, GeometryError> {
    let n = axis.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_AXIS_TOL {
        return Err(GeometryError::InvalidArgument(format!(
            "twist axis must be unit length, got norm {n}"
        )));
    }
    let p = q.vector().dot(axis);
    let twist_norm = (q.w * q.w + p * p).sqrt();
    if twist_norm <= DEGENERATE_TWIST_TOL {
        return Err(GeometryError::DegenerateDecomposition);
    }
    let twist = UnitQuaternion::normalized(q.w, p * axis.x, p * axis.y, p * axis.z);
    let swing = q.compose(&twist.inverse());

    let mut about = 2.0 * p.atan2(q.w);
    if about > PI {
        about -= 2.0 * PI;
    } else if about <= -PI {
        about += 2.0 * PI;
    }
    Ok(SwingTwist {
        swing,
        twist,
        across: swing.angle(),
        about,
    })
}

/// Equatorial coordinates in degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkyCoord {
    pub ra_deg: f64,
    pub dec_deg: f64,
}

impl SkyCoord {
    /// Wraps `ra` into `[0, 360)`; rejects declinations outside `[−90, 90]`.
    pub fn new(ra_deg: f64, dec_deg: f64) -> Result<Self, GeometryError> {
        if !ra_deg.is_finite() || !dec_deg.is_finite() || dec_deg.abs() > 90.0 {
            return Err(GeometryError::InvalidArgument(format!(
                "declination must lie in [-90, 90], got {dec_deg} (ra {ra_deg})"
            )));
        }
        let mut ra = ra_deg.rem_euclid(360.0);
        if ra >= 360.0 {
            ra = 0.0;
        }
        Ok(Self {
            ra_deg: ra,
            dec_deg,
        })
    }

    pub fn to_unit(&self) -> Vec3 {
        let (sr, cr) = self.ra_deg.to_radians().sin_cos();
        let (sd, cd) = self.dec_deg.to_radians().sin_cos();
        Vec3::new(cd * cr, cd * sr, sd)
    }

    /// Inverse of [`SkyCoord::to_unit`]; `ra` is 0 exactly at the poles.
    pub fn from_unit(v: &Vec3) -> Self {
        let rho = v.x.hypot(v.y);
        let dec = v.z.atan2(rho).to_degrees();
        let ra = if rho == 0.0 {
            0.0
        } else {
            let r = v.y.atan2(v.x).to_degrees().rem_euclid(360.0);
            if r >= 360.0 {
                0.0
            } else {
                r
            }
        };
        Self {
            ra_deg: ra,
            dec_deg: dec,
        }
    }
}
