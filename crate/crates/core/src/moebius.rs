//! Möbius transformations as normalized 2x2 complex matrices.
//!
//! A map is stored through its `det = 1` representative with a canonical
//! phase: the first nonzero entry has nonnegative real part. Matrices that
//! differ by a sign still describe the same map, so comparisons go through
//! [`matrix_distance`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DiscPoint, HalfPlanePoint};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance for the structural disc-automorphism test.
pub const DISC_STRUCTURE_TOL: f64 = 1e-10;
/// `| |tr| - 2 |` below this is classified parabolic.
pub const PARABOLIC_TOL: f64 = 1e-9;

/// Which domain a map is known to preserve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Disc,
    HalfPlane,
    Generic,
}

impl DomainTag {
    fn name(self) -> &'static str {
        match self {
            DomainTag::Disc => "disc",
            DomainTag::HalfPlane => "half_plane",
            DomainTag::Generic => "generic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoebiusMap {
    m: [Complex64; 4],
    tag: DomainTag,
}

fn normalize(m: [Complex64; 4]) -> Result<[Complex64; 4]> {
    let det = m[0] * m[3] - m[1] * m[2];
    let scale = m.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if !(det.norm() > 1e-300) || !(scale.is_finite()) || det.norm() <= 1e-28 * scale * scale {
        return Err(Error::SingularMatrix(det));
    }
    let s = det.sqrt();
    let mut out = m.map(|x| x / s);
    if let Some(first) = out.iter().find(|x| x.norm() > 1e-15) {
        if first.re < 0.0 || (first.re == 0.0 && first.im < 0.0) {
            out = out.map(|x| -x);
        }
    }
    Ok(out)
}

/// Frobenius distance between normalized representatives, minimized over the sign ambiguity.
pub fn matrix_distance(f: &MoebiusMap, g: &MoebiusMap) -> f64 {
    let diff = |s: f64| {
        f.m.iter()
            .zip(g.m.iter())
            .map(|(a, b)| (a - b * s).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    diff(1.0).min(diff(-1.0))
}

/// Residual of the form `[[a, b], [conj b, conj a]]` for a det-1 matrix (0 for disc automorphisms).
fn disc_structure_residual(m: &[Complex64; 4]) -> f64 {
    let r = |s: f64| (m[3] - m[0].conj() * s).norm().max((m[2] - m[1].conj() * s).norm());
    r(1.0).min(r(-1.0))
}

fn half_plane_residual(m: &[Complex64; 4]) -> f64 {
    // a det-1 real matrix, up to an overall factor of i when det < 0 sneaks in
    m.iter().map(|x| x.im.abs()).fold(0.0, f64::max)
}

impl MoebiusMap {
    /// Builds `z -> (az+b)/(cz+d)`, checking the structure implied by `tag`.
    pub fn from_matrix(a: Complex64, b: Complex64, c: Complex64, d: Complex64, tag: DomainTag) -> Result<Self> {
        let m = normalize([a, b, c, d])?;
        match tag {
            DomainTag::Disc => {
                let res = disc_structure_residual(&m);
                if res > DISC_STRUCTURE_TOL {
                    return Err(Error::NotDiscAutomorphism(res));
                }
            }
            DomainTag::HalfPlane => {
                let res = half_plane_residual(&m);
                if res > DISC_STRUCTURE_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not a real matrix with positive determinant (residual {res:e})"
                    )));
                }
            }
            DomainTag::Generic => {}
        }
        Ok(MoebiusMap { m, tag })
    }

    /// Like [`from_matrix`](Self::from_matrix) but infers `Disc` when the structure allows it.
    pub fn infer(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let m = normalize([a, b, c, d])?;
        let tag = if disc_structure_residual(&m) <= DISC_STRUCTURE_TOL {
            DomainTag::Disc
        } else {
            DomainTag::Generic
        };
        Ok(MoebiusMap { m, tag })
    }

    pub fn identity(tag: DomainTag) -> Self {
        MoebiusMap { m: [ONE, ZERO, ZERO, ONE], tag }
    }

    /// `z -> e^{i theta} (z + a) / (1 + conj(a) z)`, so that `0 -> e^{i theta} a`.
    pub fn disc_auto(a: DiscPoint, theta: f64) -> Self {
        Self::disc_auto_raw(a.value(), theta)
    }

    pub(crate) fn disc_auto_raw(a: Complex64, theta: f64) -> Self {
        let e = Complex64::from_polar(1.0, theta);
        // normalize() cannot fail: det = e^{i theta}(1 - |a|^2) != 0 for |a| < 1
        let m = normalize([e, e * a, a.conj(), ONE]).expect("disc automorphism matrix is regular");
        MoebiusMap { m, tag: DomainTag::Disc }
    }

    /// Rotation `z -> e^{i theta} z`.
    pub fn rotation(theta: f64) -> Self {
        Self::disc_auto_raw(ZERO, theta)
    }

    /// A half-plane automorphism `z -> (az+b)/(cz+d)` with real entries and `ad - bc > 0`.
    pub fn half_plane(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if !(a * d - b * c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "half-plane automorphism needs ad - bc > 0, got {}",
                a * d - b * c
            )));
        }
        Self::from_matrix(a.into(), b.into(), c.into(), d.into(), DomainTag::HalfPlane)
    }

    pub fn matrix(&self) -> [Complex64; 4] {
        self.m
    }

    pub fn tag(&self) -> DomainTag {
        self.tag
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0] + self.m[3]
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        matrix_distance(self, &MoebiusMap::identity(self.tag)) < tol
    }

    pub fn apply(&self, z: Complex64) -> Result<Complex64> {
        let [a, b, c, d] = self.m;
        let den = c * z + d;
        if den.norm() < 1e-300 {
            return Err(Error::Pole(z));
        }
        Ok((a * z + b) / den)
    }

    /// Evaluation without the pole check; for disc automorphisms on the closed disc.
    #[inline]
    pub(crate) fn apply_unchecked(&self, z: Complex64) -> Complex64 {
        let [a, b, c, d] = self.m;
        (a * z + b) / (c * z + d)
    }

    /// Image of a disc point under a disc automorphism (clamped if rounding pushes it out).
    pub fn apply_disc(&self, z: DiscPoint) -> Result<DiscPoint> {
        if self.tag != DomainTag::Disc {
            return Err(Error::IncompatibleDomains(self.tag.name(), "disc"));
        }
        Ok(DiscPoint::clamped(self.apply_unchecked(z.value())).0)
    }

    pub fn apply_half_plane(&self, z: HalfPlanePoint) -> Result<HalfPlanePoint> {
        if self.tag != DomainTag::HalfPlane {
            return Err(Error::IncompatibleDomains(self.tag.name(), "half_plane"));
        }
        HalfPlanePoint::new(self.apply(z.value())?)
    }

    /// Complex derivative `(ad - bc)/(cz + d)^2`.
    pub fn deriv(&self, z: Complex64) -> Result<Complex64> {
        let [_, _, c, d] = self.m;
        let den = c * z + d;
        if den.norm() < 1e-300 {
            return Err(Error::Pole(z));
        }
        Ok(1.0 / (den * den))
    }

    #[inline]
    pub(crate) fn deriv_unchecked(&self, z: Complex64) -> Complex64 {
        let [_, _, c, d] = self.m;
        let den = c * z + d;
        1.0 / (den * den)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &MoebiusMap) -> Result<MoebiusMap> {
        let tag = match (self.tag, inner.tag) {
            (x, y) if x == y => x,
            (DomainTag::Generic, _) | (_, DomainTag::Generic) => DomainTag::Generic,
            (x, y) => return Err(Error::IncompatibleDomains(x.name(), y.name())),
        };
        let [a, b, c, d] = self.m;
        let [e, f, g, h] = inner.m;
        let m = normalize([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])?;
        Ok(MoebiusMap { m, tag })
    }

    pub fn inverse(&self) -> MoebiusMap {
        let [a, b, c, d] = self.m;
        let m = normalize([d, -b, -c, a]).expect("inverse of a regular matrix is regular");
        MoebiusMap { m, tag: self.tag }
    }

    /// The Möbius map sending `z1, z2, z3` to `w1, w2, w3` (distinct points).
    pub fn from_three_points(z: [Complex64; 3], w: [Complex64; 3]) -> Result<MoebiusMap> {
        // sends p1, p2, p3 to 0, infinity, 1
        let normal = |p: [Complex64; 3]| {
            let [p1, p2, p3] = p;
            MoebiusMap::from_matrix(p2 - p3, -p1 * (p2 - p3), p1 - p3, -p2 * (p1 - p3), DomainTag::Generic)
        };
        let a = normal(z)?;
        let b = normal(w)?;
        let m = b.inverse().compose(&a)?.matrix();
        MoebiusMap::infer(m[0], m[1], m[2], m[3])
    }

    /// `self^k` by repeated squaring.
    pub fn power(&self, mut k: u64) -> MoebiusMap {
        let mut acc = MoebiusMap::identity(self.tag);
        let mut base = *self;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.compose(&base).expect("same tag");
            }
            base = base.compose(&base).expect("same tag");
            k >>= 1;
        }
        acc
    }

    /// Conjugates a half-plane map to the disc through the Cayley transform.
    pub fn to_disc(&self) -> Result<MoebiusMap> {
        match self.tag {
            DomainTag::Disc => Ok(*self),
            DomainTag::HalfPlane => {
                let c = MoebiusMap { m: [ONE, -I, ONE, I], tag: DomainTag::Generic };
                let c_inv = MoebiusMap { m: [I, I, -ONE, ONE], tag: DomainTag::Generic };
                let g = c.compose(&MoebiusMap { tag: DomainTag::Generic, ..*self })?.compose(&c_inv)?;
                let [a, b, cc, d] = g.m;
                // rounding can leave tiny structural noise; project onto the disc form
                let alpha = (a + d.conj()) * 0.5;
                let beta = (b + cc.conj()) * 0.5;
                MoebiusMap::from_matrix(alpha, beta, beta.conj(), alpha.conj(), DomainTag::Disc)
            }
            DomainTag::Generic => Err(Error::IncompatibleDomains("generic", "disc")),
        }
    }

    /// Structural residual against the disc-automorphism form.
    pub fn disc_residual(&self) -> f64 {
        disc_structure_residual(&self.m)
    }

    fn require_disc(&self) -> Result<MoebiusMap> {
        match self.tag {
            DomainTag::Disc => Ok(*self),
            DomainTag::HalfPlane => self.to_disc(),
            DomainTag::Generic => {
                let res = self.disc_residual();
                if res <= DISC_STRUCTURE_TOL {
                    Ok(MoebiusMap { tag: DomainTag::Disc, ..*self })
                } else {
                    Err(Error::NotDiscAutomorphism(res))
                }
            }
        }
    }

    /// Classification of a disc automorphism (half-plane maps are transported first).
    pub fn classify_auto(&self) -> Result<AutClass> {
        let g = self.require_disc()?;
        if g.is_identity(1e-12) {
            return Ok(AutClass {
                kind: AutKind::Identity,
                fixed_points: vec![],
                translation_length: 0.0,
                rotation_angle: 0.0,
                borderline: false,
            });
        }
        let [a, b, c, d] = g.m;
        let abs_tr = (a + d).re.abs();
        let gap = abs_tr - 2.0;
        if gap.abs() <= PARABOLIC_TOL {
            let z = (a - d) / (2.0 * c);
            return Ok(AutClass {
                kind: AutKind::Parabolic,
                fixed_points: vec![z / z.norm()],
                translation_length: 0.0,
                rotation_angle: 0.0,
                borderline: gap.abs() > 1e-12,
            });
        }
        if gap < 0.0 {
            let p = if c.norm() < 1e-15 {
                ZERO
            } else {
                let (r1, r2) = quadratic_roots(c, d - a, -b);
                if r1.norm() <= r2.norm() {
                    r1
                } else {
                    r2
                }
            };
            let angle = principal_angle(g.deriv_unchecked(p).arg());
            return Ok(AutClass {
                kind: AutKind::Elliptic,
                fixed_points: vec![p],
                translation_length: 0.0,
                rotation_angle: angle,
                borderline: false,
            });
        }
        let (r1, r2) = quadratic_roots(c, d - a, -b);
        let (r1, r2) = (r1 / r1.norm(), r2 / r2.norm());
        // attracting point first
        let (att, rep) = if g.deriv_unchecked(r1).norm() < 1.0 { (r1, r2) } else { (r2, r1) };
        Ok(AutClass {
            kind: AutKind::Hyperbolic,
            fixed_points: vec![att, rep],
            translation_length: (abs_tr / 2.0).acosh(),
            rotation_angle: 0.0,
            borderline: false,
        })
    }

    /// A k-th root in the one-parameter subgroup through `self` (principal branch).
    pub fn kth_root(&self, k: u32) -> Result<MoebiusMap> {
        if k == 0 {
            return Err(Error::InvalidArgument("kth_root needs k >= 1".into()));
        }
        let g = self.require_disc()?;
        if k == 1 {
            return Ok(g);
        }
        let class = g.classify_auto()?;
        let kf = k as f64;
        match class.kind {
            AutKind::Identity => Ok(MoebiusMap::identity(DomainTag::Disc)),
            AutKind::Elliptic => {
                let t = MoebiusMap::disc_auto_raw(class.fixed_points[0], 0.0);
                let r = MoebiusMap::rotation(class.rotation_angle / kf);
                t.compose(&r)?.compose(&t.inverse())
            }
            AutKind::Parabolic => {
                let m = g.positive_trace();
                let n = [m[0] - ONE, m[1], m[2], m[3] - ONE];
                let root = [ONE + n[0] / kf, n[1] / kf, n[2] / kf, ONE + n[3] / kf];
                MoebiusMap::from_matrix(root[0], root[1], root[2], root[3], DomainTag::Disc)
            }
            AutKind::Hyperbolic => {
                let m = g.positive_trace();
                let s = ((m[0] + m[3]).re / 2.0).acosh();
                let p = (s / kf).sinh() / s.sinh();
                let q = (s - s / kf).sinh() / s.sinh();
                MoebiusMap::from_matrix(
                    m[0] * p + q,
                    m[1] * p,
                    m[2] * p,
                    m[3] * p + q,
                    DomainTag::Disc,
                )
            }
        }
    }

    fn positive_trace(&self) -> [Complex64; 4] {
        if (self.m[0] + self.m[3]).re < 0.0 {
            self.m.map(|x| -x)
        } else {
            self.m
        }
    }

    /// `sup_{|z| <= radius} |g(z) - z|`, sampled on the circle `|z| = radius`
    /// (the maximum of a holomorphic function sits on the boundary).
    pub fn deviation_on_disc(&self, radius: f64) -> f64 {
        const SAMPLES: usize = 720;
        (0..SAMPLES)
            .map(|j| {
                let z = Complex64::from_polar(radius, 2.0 * PI * j as f64 / SAMPLES as f64);
                (self.apply_unchecked(z) - z).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn principal_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Roots of `a z^2 + b z + c` with the cancellation-free formula.
fn quadratic_roots(a: Complex64, b: Complex64, c: Complex64) -> (Complex64, Complex64) {
    let disc = (b * b - 4.0 * a * c).sqrt();
    let q = if (b.conj() * disc).re >= 0.0 { -(b + disc) / 2.0 } else { -(b - disc) / 2.0 };
    if q.norm() == 0.0 {
        return (ZERO, ZERO);
    }
    (q / a, c / q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutKind {
    Identity,
    Elliptic,
    Parabolic,
    Hyperbolic,
}

/// Classification of a disc automorphism.
///
/// Elliptic maps carry their interior fixed point, parabolic maps their
/// boundary fixed point, hyperbolic maps `[attracting, repelling]`.
/// `translation_length` is `min_z omega(z, g z)` for hyperbolic maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutClass {
    pub kind: AutKind,
    pub fixed_points: Vec<Complex64>,
    pub translation_length: f64,
    /// `arg g'(p)` at the interior fixed point, in `(-pi, pi]` (elliptic only).
    pub rotation_angle: f64,
    /// Set when `|tr|` was within the parabolic tolerance but not exactly 2.
    pub borderline: bool,
}

#[derive(Serialize, Deserialize)]
struct MoebiusJson {
    kind: String,
    matrix: [[f64; 2]; 4],
}

impl Serialize for MoebiusMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MoebiusJson {
            kind: "mobius".into(),
            matrix: self.m.map(|x| [x.re, x.im]),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MoebiusMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MoebiusJson::deserialize(d)?;
        if j.kind != "mobius" {
            return Err(serde::de::Error::custom(format!("expected kind \"mobius\", got \"{}\"", j.kind)));
        }
        let [a, b, c, dd] = j.matrix.map(|[re, im]| Complex64::new(re, im));
        MoebiusMap::infer(a, b, c, dd).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{c64, omega};

    fn hyp(a: f64) -> MoebiusMap {
        MoebiusMap::disc_auto(DiscPoint::real(a).unwrap(), 0.0)
    }

    #[test]
    fn disc_auto_examples() {
        let id = MoebiusMap::disc_auto(DiscPoint::origin(), 0.0);
        assert!(id.is_identity(1e-15));
        let g = hyp(0.5);
        assert!((g.apply(c64(0.0, 0.0)).unwrap() - c64(0.5, 0.0)).norm() < 1e-15);
        assert!(g.apply(c64(-0.5, 0.0)).unwrap().norm() < 1e-15);
        let r = MoebiusMap::rotation(PI / 2.0);
        assert!((r.apply(c64(0.3, 0.1)).unwrap() - c64(0.0, 1.0) * c64(0.3, 0.1)).norm() < 1e-15);
        assert_eq!(r.classify_auto().unwrap().kind, AutKind::Elliptic);
    }

    #[test]
    fn gamma_zero_is_rotated_center() {
        let a = c64(0.2, -0.3);
        let g = MoebiusMap::disc_auto_raw(a, 0.7);
        let expect = Complex64::from_polar(1.0, 0.7) * a;
        assert!((g.apply(c64(0.0, 0.0)).unwrap() - expect).norm() < 1e-15);
    }

    #[test]
    fn compose_inverse_deriv() {
        let f = hyp(0.5);
        let id = MoebiusMap::identity(DomainTag::Disc);
        assert!(matrix_distance(&id.compose(&f).unwrap(), &f) < 1e-15);
        // solve (x + 0.5)/(1 + 0.5 x) = 0.5  =>  x = 0
        assert!(f.inverse().apply(c64(0.5, 0.0)).unwrap().norm() < 1e-15);
        assert!((f.deriv(c64(0.0, 0.0)).unwrap() - c64(0.75, 0.0)).norm() < 1e-15);
        assert!(f.compose(&f.inverse()).unwrap().is_identity(1e-14));
    }

    #[test]
    fn pole_is_reported() {
        let g = MoebiusMap::from_matrix(ZERO, ONE, ONE, ZERO, DomainTag::Generic).unwrap();
        assert!(matches!(g.apply(ZERO), Err(Error::Pole(_))));
        assert!(matches!(g.deriv(ZERO), Err(Error::Pole(_))));
    }

    #[test]
    fn mixing_domains_is_rejected() {
        let hp = MoebiusMap::half_plane(1.0, 1.0, 0.0, 1.0).unwrap();
        assert!(hyp(0.3).compose(&hp).is_err());
        assert!(MoebiusMap::from_matrix(ONE, ONE, ZERO, ONE, DomainTag::Disc).is_err());
        assert!(MoebiusMap::from_matrix(ONE, ONE, ONE, ONE, DomainTag::Generic).is_err());
    }

    #[test]
    fn classify_examples() {
        let c = MoebiusMap::rotation(PI / 2.0).classify_auto().unwrap();
        assert_eq!(c.kind, AutKind::Elliptic);
        assert!(c.fixed_points[0].norm() < 1e-15);
        assert!((c.rotation_angle - PI / 2.0).abs() < 1e-14);

        let g = hyp(0.5);
        let c = g.classify_auto().unwrap();
        assert_eq!(c.kind, AutKind::Hyperbolic);
        assert!((c.fixed_points[0] - c64(1.0, 0.0)).norm() < 1e-12);
        assert!((c.fixed_points[1] - c64(-1.0, 0.0)).norm() < 1e-12);
        // gamma'(1) = (1 - a)/(1 + a) = 1/3
        assert!((g.deriv(c.fixed_points[0]).unwrap().re - 1.0 / 3.0).abs() < 1e-12);
        // translation length is min omega(z, g z), attained on the axis: omega(0, 0.5)
        assert!((c.translation_length - 0.5f64.atanh()).abs() < 1e-14);

        let t = MoebiusMap::half_plane(1.0, 1.0, 0.0, 1.0).unwrap();
        let c = t.classify_auto().unwrap();
        assert_eq!(c.kind, AutKind::Parabolic);
        assert!((c.fixed_points[0] - c64(1.0, 0.0)).norm() < 1e-12);
        assert!(!c.borderline);

        assert_eq!(MoebiusMap::identity(DomainTag::Disc).classify_auto().unwrap().kind, AutKind::Identity);
        let generic = MoebiusMap::from_matrix(ONE, c64(0.5, 0.0), ZERO, ONE, DomainTag::Generic).unwrap();
        assert!(matches!(generic.classify_auto(), Err(Error::NotDiscAutomorphism(_))));
    }

    #[test]
    fn translation_length_matches_minimum_displacement() {
        let g = MoebiusMap::disc_auto_raw(c64(0.3, 0.4), 0.3);
        let c = g.classify_auto().unwrap();
        assert_eq!(c.kind, AutKind::Hyperbolic);
        // brute-force min over a fine polar grid
        let mut best = f64::INFINITY;
        for i in 0..400 {
            for j in 0..400 {
                let z = Complex64::from_polar(0.99 * i as f64 / 400.0, 2.0 * PI * j as f64 / 400.0);
                best = best.min(omega(z, g.apply(z).unwrap()));
            }
        }
        assert!(best >= c.translation_length - 1e-12);
        assert!(best - c.translation_length < 1e-3);
    }

    #[test]
    fn kth_root_examples() {
        let id = MoebiusMap::identity(DomainTag::Disc);
        assert!(id.kth_root(5).unwrap().is_identity(1e-15));
        let r = MoebiusMap::rotation(PI).kth_root(2).unwrap();
        assert!(matrix_distance(&r, &MoebiusMap::rotation(PI / 2.0)) < 1e-14);
        let g = MoebiusMap::disc_auto_raw(c64(0.4, -0.2), 0.3);
        let t = g.classify_auto().unwrap().translation_length;
        let root = g.kth_root(3).unwrap();
        let rc = root.classify_auto().unwrap();
        assert_eq!(rc.kind, AutKind::Hyperbolic);
        assert!((rc.translation_length - t / 3.0).abs() < 1e-12);
        assert!(matrix_distance(&root.power(3), &g) < 1e-12);
        assert!(g.kth_root(0).is_err());
    }

    #[test]
    fn parabolic_root_uses_unipotent_formula() {
        let p = MoebiusMap::half_plane(1.0, 1.0, 0.0, 1.0).unwrap().to_disc().unwrap();
        let r = p.kth_root(7).unwrap();
        assert_eq!(r.classify_auto().unwrap().kind, AutKind::Parabolic);
        assert!(matrix_distance(&r.power(7), &p) < 1e-12);
    }

    #[test]
    fn roots_shrink_towards_identity() {
        let g = MoebiusMap::disc_auto_raw(c64(0.5, 0.5), 2.0);
        let mut prev = f64::INFINITY;
        for k in [1u32, 2, 4, 8, 16, 64, 256, 1024] {
            let dev = g.kth_root(k).unwrap().deviation_on_disc(0.9);
            assert!(dev < prev);
            prev = dev;
        }
        assert!(prev < 0.01);
    }

    #[test]
    fn rotation_deviation_formula() {
        for theta in [0.1, 0.5, 1.0, 2.0] {
            let d = MoebiusMap::rotation(theta).deviation_on_disc(0.9);
            assert!((d - 2.0 * (theta / 2.0).sin() * 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn three_point_fit() {
        let g = MoebiusMap::disc_auto_raw(c64(0.2, -0.4), 0.9);
        let z = [c64(0.1, 0.0), c64(-0.3, 0.2), c64(0.0, 0.5)];
        let w = z.map(|p| g.apply(p).unwrap());
        let fit = MoebiusMap::from_three_points(z, w).unwrap();
        assert!(matrix_distance(&fit, &g) < 1e-12);
        assert_eq!(fit.tag(), DomainTag::Disc);
    }

    #[test]
    fn json_shape() {
        let g = hyp(0.5);
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.starts_with("{\"kind\":\"mobius\",\"matrix\":[["));
        let back: MoebiusMap = serde_json::from_str(&s).unwrap();
        assert!(matrix_distance(&back, &g) < 1e-15);
        assert_eq!(back.tag(), DomainTag::Disc);
        assert!(serde_json::from_str::<MoebiusMap>("{\"kind\":\"scale\",\"matrix\":[[1,0],[0,0],[0,0],[1,0]]}").is_err());
    }
}
