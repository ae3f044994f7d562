//! Hyperbolic geometry of the unit disc and the upper half-plane.
//!
//! The metric is normalized with density `1/(1-|z|^2)` (curvature -4), so
//! `omega(0, r) = artanh(r)`. Every distance in this crate uses that
//! convention; translation lengths and hyperbolic steps are half of the
//! values obtained with the curvature -1 metric.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default minimum distance to the unit circle accepted for disc points.
pub const BOUNDARY_EPS: f64 = 1e-13;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `1 - |z|^2`, computed as `(1-|z|)(1+|z|)` to keep relative accuracy near the circle.
#[inline]
pub fn one_minus_abs2(z: Complex64) -> f64 {
    let r = z.norm();
    (1.0 - r) * (1.0 + r)
}

/// A point of the open unit disc, kept at least `BOUNDARY_EPS` away from the circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Complex64", into = "Complex64")]
pub struct DiscPoint(Complex64);

impl DiscPoint {
    pub fn new(z: Complex64) -> Result<Self> {
        Self::with_margin(z, BOUNDARY_EPS)
    }

    pub fn with_margin(z: Complex64, eps: f64) -> Result<Self> {
        if z.re.is_finite() && z.im.is_finite() && z.norm() < 1.0 - eps {
            Ok(DiscPoint(z))
        } else {
            Err(Error::OutsideDisc(z, eps))
        }
    }

    pub fn real(x: f64) -> Result<Self> {
        Self::new(Complex64::new(x, 0.0))
    }

    pub fn origin() -> Self {
        DiscPoint(Complex64::new(0.0, 0.0))
    }

    /// Pulls a boundary-grazing point back to radius `1 - BOUNDARY_EPS`.
    /// The flag reports whether clamping happened.
    pub fn clamped(z: Complex64) -> (Self, bool) {
        let r = z.norm();
        let max = 1.0 - BOUNDARY_EPS;
        if r < max {
            (DiscPoint(z), false)
        } else if r == 0.0 || !r.is_finite() {
            (DiscPoint(Complex64::new(max, 0.0)), true)
        } else {
            (DiscPoint(z * (max / r)), true)
        }
    }

    #[inline]
    pub fn value(self) -> Complex64 {
        self.0
    }
}

impl TryFrom<Complex64> for DiscPoint {
    type Error = Error;
    fn try_from(z: Complex64) -> Result<Self> {
        DiscPoint::new(z)
    }
}

impl From<DiscPoint> for Complex64 {
    fn from(p: DiscPoint) -> Complex64 {
        p.0
    }
}

/// A point of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Complex64", into = "Complex64")]
pub struct HalfPlanePoint(Complex64);

impl HalfPlanePoint {
    pub fn new(z: Complex64) -> Result<Self> {
        if z.re.is_finite() && z.im.is_finite() && z.im > BOUNDARY_EPS {
            Ok(HalfPlanePoint(z))
        } else {
            Err(Error::OutsideHalfPlane(z, BOUNDARY_EPS))
        }
    }

    pub fn i() -> Self {
        HalfPlanePoint(I)
    }

    #[inline]
    pub fn value(self) -> Complex64 {
        self.0
    }
}

impl TryFrom<Complex64> for HalfPlanePoint {
    type Error = Error;
    fn try_from(z: Complex64) -> Result<Self> {
        HalfPlanePoint::new(z)
    }
}

impl From<HalfPlanePoint> for Complex64 {
    fn from(p: HalfPlanePoint) -> Complex64 {
        p.0
    }
}

/// Pseudo-hyperbolic distance `|z-w| / |1 - z conj(w)|`.
#[inline]
pub fn pseudo_distance(z: Complex64, w: Complex64) -> f64 {
    let num = (z - w).norm();
    if num == 0.0 {
        return 0.0;
    }
    let den = (Complex64::new(1.0, 0.0) - z * w.conj()).norm();
    (num / den).min(1.0)
}

/// Hyperbolic distance between raw complex numbers assumed to lie in the disc.
#[inline]
pub fn omega(z: Complex64, w: Complex64) -> f64 {
    pseudo_distance(z, w).atanh()
}

/// Hyperbolic distance between two disc points.
pub fn disc_distance(z: DiscPoint, w: DiscPoint) -> f64 {
    omega(z.0, w.0)
}

/// `sinh omega(z, w)` from the closed form `|z-w| / sqrt((1-|z|^2)(1-|w|^2))`.
pub fn sinh_omega(z: Complex64, w: Complex64) -> f64 {
    (z - w).norm() / (one_minus_abs2(z) * one_minus_abs2(w)).sqrt()
}

/// `cosh omega(z, w)` from the closed form `|1-z conj(w)| / sqrt((1-|z|^2)(1-|w|^2))`.
pub fn cosh_omega(z: Complex64, w: Complex64) -> f64 {
    (Complex64::new(1.0, 0.0) - z * w.conj()).norm() / (one_minus_abs2(z) * one_minus_abs2(w)).sqrt()
}

/// Density of the hyperbolic metric, `1/(1-|z|^2)`.
pub fn metric_density(z: DiscPoint) -> f64 {
    1.0 / one_minus_abs2(z.0)
}

/// Cayley transform from the upper half-plane onto the disc, `(z-i)/(z+i)`.
pub fn cayley(z: HalfPlanePoint) -> DiscPoint {
    let (p, _) = DiscPoint::clamped(cayley_raw(z.0));
    p
}

/// Inverse Cayley transform, `i(1+z)/(1-z)`.
pub fn cayley_inv(z: DiscPoint) -> HalfPlanePoint {
    let w = cayley_inv_raw(z.0);
    HalfPlanePoint(Complex64::new(w.re, w.im.max(f64::MIN_POSITIVE)))
}

#[inline]
pub fn cayley_raw(z: Complex64) -> Complex64 {
    (z - I) / (z + I)
}

#[inline]
pub fn cayley_inv_raw(z: Complex64) -> Complex64 {
    I * (1.0 + z) / (1.0 - z)
}

/// Hyperbolic distance in the half-plane, measured through the Cayley transform.
pub fn halfplane_distance(z: HalfPlanePoint, w: HalfPlanePoint) -> f64 {
    omega(cayley_raw(z.0), cayley_raw(w.0))
}

/// Closed hyperbolic disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicBall {
    pub center: DiscPoint,
    pub radius: f64,
}

impl HyperbolicBall {
    pub fn new(center: DiscPoint, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("ball radius {radius} must be finite and >= 0")));
        }
        Ok(HyperbolicBall { center, radius })
    }

    pub fn contains(&self, z: DiscPoint) -> bool {
        self.contains_raw(z.value())
    }

    pub fn contains_raw(&self, z: Complex64) -> bool {
        omega(self.center.value(), z) <= self.radius + 1e-12
    }

    /// Points of the ball: the center plus `rings` concentric hyperbolic circles
    /// of `per_ring` points each, the last ring on the boundary of the ball.
    pub fn sample(&self, rings: usize, per_ring: usize) -> Vec<Complex64> {
        let c = self.center.value();
        let mut out = vec![c];
        for k in 1..=rings {
            let rho = (self.radius * k as f64 / rings as f64).tanh();
            for j in 0..per_ring {
                let t = std::f64::consts::TAU * j as f64 / per_ring as f64;
                let u = Complex64::from_polar(rho, t);
                // translate the Euclidean circle |u| = rho to the ball center
                out.push((u + c) / (1.0 + c.conj() * u));
            }
        }
        out
    }
}

/// Shorthand used throughout the crate and its tests.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
