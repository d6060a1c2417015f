use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Real, Vector3};

/// Unit quaternion in scalar-first order `(w, x, y, z)` representing a
/// rotation.
///
/// Values are kept in canonical form: `w >= 0`, and when `w == 0` (a half-turn,
/// where `q` and `-q` are the same rotation) the first nonzero component of
/// `(x, y, z)` is positive. Canonical form makes the double cover unambiguous,
/// which pins down serialization bytes and the sign of the log map at `pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuaternionError {
    #[error("quaternion components must be finite, got ({w}, {x}, {y}, {z})")]
    NonFinite { w: f64, x: f64, y: f64, z: f64 },
    #[error("quaternion norm {norm} is too far from 1 to normalize")]
    Degenerate { norm: f64 },
    #[error("quaternion norm deviates from 1 by {deviation}, tolerance {tolerance}")]
    NotUnit { deviation: f64, tolerance: f64 },
}

impl<T: Real> Quaternion<T> {
    /// No rotation.
    pub fn identity() -> Self {
        Self {
            w: T::one(),
            x: T::zero(),
            y: T::zero(),
            z: T::zero(),
        }
    }

    /// Builds a unit quaternion from raw components, normalizing and
    /// canonicalizing. Rejects non-finite input and norms so far from 1 that
    /// normalization would amplify noise into a made-up rotation.
    pub fn try_new_unit(w: T, x: T, y: T, z: T) -> Result<Self, QuaternionError> {
        let to64 = |v: T| v.to_f64().unwrap_or(f64::NAN);
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(QuaternionError::NonFinite {
                w: to64(w),
                x: to64(x),
                y: to64(y),
                z: to64(z),
            });
        }
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        let lo = T::from_f64_lossy(1e-3);
        let hi = T::from_f64_lossy(1e3);
        if norm < lo || norm > hi {
            return Err(QuaternionError::Degenerate {
                norm: to64(norm),
            });
        }
        let q = Self {
            w: w / norm,
            x: x / norm,
            y: y / norm,
            z: z / norm,
        };
        Ok(q.canonicalized())
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: Vector3<T>, angle: T) -> Result<Self, QuaternionError> {
        let n = axis.norm();
        if n == T::zero() {
            return Err(QuaternionError::Degenerate { norm: 0.0 });
        }
        let half = angle / T::from_f64_lossy(2.0);
        let s = half.sin() / n;
        Self::try_new_unit(half.cos(), axis.x * s, axis.y * s, axis.z * s)
    }

    /// `|  ||q|| - 1 |`, used by load-time validation.
    pub fn unit_norm_error(&self) -> T {
        let norm =
            (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        (norm - T::one()).abs()
    }

    pub fn validate_unit(&self, tolerance: T) -> Result<(), QuaternionError> {
        let deviation = self.unit_norm_error();
        if deviation > tolerance {
            Err(QuaternionError::NotUnit {
                deviation: deviation.to_f64().unwrap_or(f64::NAN),
                tolerance: tolerance.to_f64().unwrap_or(f64::NAN),
            })
        } else {
            Ok(())
        }
    }

    /// Flips signs so the representative of the double cover is unique.
    pub fn canonicalized(mut self) -> Self {
        let flip = if self.w < T::zero() {
            true
        } else if self.w > T::zero() {
            false
        } else {
            // Half-turn: decide by the first nonzero axis component.
            self.w = T::zero(); // normalizes -0.0
            let first = [self.x, self.y, self.z]
                .into_iter()
                .find(|c| *c != T::zero());
            matches!(first, Some(c) if c < T::zero())
        };
        if flip {
            Self {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            self
        }
    }

    /// Renormalizes against drift and restores canonical form. Intended for
    /// integration loops; assumes the input is already near-unit.
    pub fn renormalized(self) -> Self {
        let norm =
            (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        Self {
            w: self.w / norm,
            x: self.x / norm,
            y: self.y / norm,
            z: self.z / norm,
        }
        .canonicalized()
    }

    pub fn conjugate(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Inverse of a unit quaternion (its conjugate).
    pub fn inverse(&self) -> Self {
        self.conjugate()
    }

    /// 4D inner product; `|dot|` is the cosine of half the angle between the
    /// rotations.
    pub fn dot(&self, other: &Self) -> T {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Hamilton product `self * other` (apply `other` first).
    pub fn mul(&self, other: &Self) -> Self {
        Self {
            w: self.w * other.w - self.x * other.x - self.y * other.y - self.z * other.z,
            x: self.w * other.x + self.x * other.w + self.y * other.z - self.z * other.y,
            y: self.w * other.y - self.x * other.z + self.y * other.w + self.z * other.x,
            z: self.w * other.z + self.x * other.y - self.y * other.x + self.z * other.w,
        }
    }

    /// Geodesic angle to `other` in radians, in `[0, pi]`.
    ///
    /// Uses `2 * acos(|<q1, q2>|)`, which is invariant under the sign
    /// ambiguity of the double cover.
    pub fn angle_to(&self, other: &Self) -> T {
        let d = self.dot(other).abs();
        let clamped = if d > T::one() { T::one() } else { d };
        T::from_f64_lossy(2.0) * clamped.acos()
    }

    /// Log map: rotation vector `angle * axis` of the shortest arc, with
    /// `angle` in `[0, pi]` for canonical input. The sign at exactly `pi` is
    /// fixed by canonical form.
    pub fn log_vector(&self) -> Vector3<T> {
        let q = self.canonicalized();
        let v = Vector3::new(q.x, q.y, q.z);
        let vn = v.norm();
        if vn < T::from_f64_lossy(1e-12) {
            // First-order expansion around the identity.
            return v.scale(T::from_f64_lossy(2.0) / q.w);
        }
        let angle = T::from_f64_lossy(2.0) * vn.atan2(q.w);
        v.scale(angle / vn)
    }

    /// Exponential map: rotation vector to unit quaternion.
    pub fn exp_vector(u: Vector3<T>) -> Self {
        let angle = u.norm();
        let half = angle / T::from_f64_lossy(2.0);
        let k = if angle < T::from_f64_lossy(1e-8) {
            // sin(a/2)/a expanded for small a.
            T::from_f64_lossy(0.5) - angle * angle / T::from_f64_lossy(48.0)
        } else {
            half.sin() / angle
        };
        Self {
            w: half.cos(),
            x: u.x * k,
            y: u.y * k,
            z: u.z * k,
        }
        .renormalized()
    }

    /// Spherical linear interpolation along a shortest arc.
    ///
    /// Exact at the endpoints; interior values are unit and canonical.
    pub fn slerp(&self, other: &Self, u: T) -> Self {
        if u == T::zero() {
            return *self;
        }
        if u == T::one() {
            return *other;
        }
        let mut b = *other;
        let mut d = self.dot(other);
        if d < T::zero() {
            b = Self {
                w: -b.w,
                x: -b.x,
                y: -b.y,
                z: -b.z,
            };
            d = -d;
        }
        if d > T::one() - T::from_f64_lossy(1e-10) {
            // Nearly parallel: linear blend, renormalized.
            let one_minus = T::one() - u;
            return Self {
                w: self.w * one_minus + b.w * u,
                x: self.x * one_minus + b.x * u,
                y: self.y * one_minus + b.y * u,
                z: self.z * one_minus + b.z * u,
            }
            .renormalized();
        }
        let theta = d.acos();
        let sin_theta = theta.sin();
        let ka = ((T::one() - u) * theta).sin() / sin_theta;
        let kb = (u * theta).sin() / sin_theta;
        Self {
            w: self.w * ka + b.w * kb,
            x: self.x * ka + b.x * kb,
            y: self.y * ka + b.y * kb,
            z: self.z * ka + b.z * kb,
        }
        .renormalized()
    }
}
