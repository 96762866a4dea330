//! Upper half-plane geometry in curvature −1.
//!
//! Points live in ℍ = { x + iy : y > 0 }. Isometries are real Möbius maps
//! normalized to determinant one, geodesics are vertical lines or semicircles
//! centered on the real axis, and the unit-speed geodesic flow is evaluated in
//! closed form by conjugating the standard vertical geodesic `t ↦ i·eᵗ`.
//!
//! Every quantity here (distances, flow times, areas) uses curvature −1.
//! Conversion to other curvature conventions happens in [`crate::oseledets`].

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("point ({x}, {y}) is not in the upper half-plane")]
    NotInHalfPlane { x: f64, y: f64 },
    #[error("Möbius image degenerated to ({x}, {y})")]
    Degenerate { x: f64, y: f64 },
    #[error("matrix has non-positive determinant {det}")]
    BadDeterminant { det: f64 },
    #[error("negative ball radius {0}")]
    NegativeRadius(f64),
    #[error("geodesic is tangent to or starts on the side (parameter {t})")]
    Tangency { t: f64 },
}

pub type Result<T> = std::result::Result<T, GeomError>;

/// Numerical tolerances used by predicates and property checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Membership and degeneracy predicates.
    pub membership: f64,
    /// Flow-property comparisons.
    pub flow: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            membership: 1e-12,
            flow: 1e-9,
        }
    }
}

/// A point of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HPoint {
    pub x: f64,
    pub y: f64,
}

impl HPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && y > 0.0) {
            return Err(GeomError::NotInHalfPlane { x, y });
        }
        Ok(Self { x, y })
    }

    /// The point `i`.
    pub const I: HPoint = HPoint { x: 0.0, y: 1.0 };

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }
}

impl fmt::Display for HPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}i", self.x, self.y)
    }
}

/// Hyperbolic distance `2·asinh(|z − w| / (2√(y_z y_w)))`.
///
/// This form stays accurate for nearby points where the `acosh` formula loses
/// half its digits.
pub fn hyp_dist(z: HPoint, w: HPoint) -> f64 {
    let dx = z.x - w.x;
    let dy = z.y - w.y;
    let chord = (dx * dx + dy * dy).sqrt();
    2.0 * (chord / (2.0 * (z.y * w.y).sqrt())).asinh()
}

/// Area of a hyperbolic disk of radius `t`: `4π·sinh²(t/2)`.
pub fn ball_volume(t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(GeomError::NegativeRadius(t));
    }
    let s = (t / 2.0).sinh();
    Ok(4.0 * PI * s * s)
}

/// Euclidean description of the hyperbolic disk `D_t(center)`: the center
/// and radius of the Euclidean circle bounding it.
pub fn ball_euclidean(ball: &BallSpec) -> (Complex64, f64) {
    let c = ball.center;
    (
        Complex64::new(c.x, c.y * ball.radius.cosh()),
        c.y * ball.radius.sinh(),
    )
}

/// A real Möbius transformation `z ↦ (az + b)/(cz + d)` with `ad − bc = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mobius {
    pub const IDENTITY: Mobius = Mobius {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    /// Builds a transformation from any matrix of positive determinant,
    /// rescaling it to determinant one.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det > 0.0 && det.is_finite()) {
            return Err(GeomError::BadDeterminant { det });
        }
        let k = det.sqrt().recip();
        Ok(Self {
            a: a * k,
            b: b * k,
            c: c * k,
            d: d * k,
        })
    }

    pub fn translation(t: f64) -> Self {
        Self {
            a: 1.0,
            b: t,
            c: 0.0,
            d: 1.0,
        }
    }

    /// `z ↦ λz` for `λ > 0`.
    pub fn dilation(lambda: f64) -> Self {
        let s = lambda.sqrt();
        Self {
            a: s,
            b: 0.0,
            c: 0.0,
            d: s.recip(),
        }
    }

    /// Rotation about `i`; turns tangent vectors at `i` by `2φ`.
    fn rotation_at_i(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Self {
            a: c,
            b: s,
            c: -s,
            d: c,
        }
    }

    /// The isometry taking `i` to `p` by translation and dilation only.
    pub fn moving_i_to(p: HPoint) -> Self {
        Self::translation(p.x) * Self::dilation(p.y)
    }

    /// Counterclockwise rotation by `angle` about `center`.
    pub fn rotation_about(center: HPoint, angle: f64) -> Self {
        let f = Self::moving_i_to(center);
        f * Self::rotation_at_i(angle / 2.0) * f.inverse()
    }

    /// The isometry sending `(i, upward)` to the given unit tangent vector.
    pub fn frame(ut: UnitTangent) -> Self {
        Self::moving_i_to(ut.base) * Self::rotation_at_i((ut.angle - FRAC_PI_2) / 2.0)
    }

    pub fn inverse(self) -> Self {
        Self {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    pub fn det(self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(self) -> f64 {
        self.a + self.d
    }

    /// Rescales so the determinant is exactly one again.
    #[must_use]
    pub fn renormalized(self) -> Self {
        let k = self.det().sqrt().recip();
        Self {
            a: self.a * k,
            b: self.b * k,
            c: self.c * k,
            d: self.d * k,
        }
    }

    /// Same transformation in `PSL₂`, i.e. equality up to overall sign.
    pub fn projectively_close(self, other: Mobius, tol: f64) -> bool {
        let plus = (self.a - other.a).abs()
            + (self.b - other.b).abs()
            + (self.c - other.c).abs()
            + (self.d - other.d).abs();
        let minus = (self.a + other.a).abs()
            + (self.b + other.b).abs()
            + (self.c + other.c).abs()
            + (self.d + other.d).abs();
        plus.min(minus) < tol
    }

    pub fn apply(self, z: HPoint) -> Result<HPoint> {
        let qr = self.c * z.x + self.d;
        let qi = self.c * z.y;
        let q2 = qr * qr + qi * qi;
        let y = z.y * self.det() / q2;
        let x = ((self.a * z.x + self.b) * qr + self.a * self.c * z.y * z.y) / q2;
        if !(x.is_finite() && y.is_finite()) || y <= 0.0 {
            return Err(GeomError::Degenerate { x, y });
        }
        Ok(HPoint { x, y })
    }

    /// Action on the closed upper half-plane and boundary as a complex number;
    /// `None` stands for the point at infinity.
    pub fn apply_boundary(self, x: Option<f64>) -> Option<f64> {
        match x {
            None => (self.c != 0.0).then(|| self.a / self.c),
            Some(x) => {
                let den = self.c * x + self.d;
                (den != 0.0).then(|| (self.a * x + self.b) / den)
            }
        }
    }

    /// Argument of the derivative `1/(cz + d)²` at `z`.
    pub fn derivative_arg(self, z: HPoint) -> f64 {
        -2.0 * (self.c * z.y).atan2(self.c * z.x + self.d)
    }

    /// Push-forward of a unit tangent vector.
    pub fn apply_tangent(self, ut: UnitTangent) -> Result<UnitTangent> {
        Ok(UnitTangent::new(
            self.apply(ut.base)?,
            ut.angle + self.derivative_arg(ut.base),
        ))
    }

    pub fn to_matrix(self) -> [[f64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }
}

impl Mul for Mobius {
    type Output = Mobius;

    fn mul(self, o: Mobius) -> Mobius {
        Mobius {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
        .renormalized()
    }
}

/// A point of the unit tangent bundle: base point and direction angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitTangent {
    pub base: HPoint,
    /// Radians in `[0, 2π)`, measured counterclockwise from the positive real
    /// direction.
    pub angle: f64,
}

impl UnitTangent {
    pub fn new(base: HPoint, angle: f64) -> Self {
        let mut a = angle.rem_euclid(TAU);
        if a >= TAU {
            a = 0.0;
        }
        Self { base, angle: a }
    }
}

/// Smallest signed difference between two angles, in `(−π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Unit-speed geodesic flow `g_t`.
pub fn geodesic_flow(ut: UnitTangent, t: f64) -> UnitTangent {
    if t == 0.0 {
        return ut;
    }
    let m = Mobius::frame(ut);
    let w = HPoint { x: 0.0, y: t.exp() };
    let base = m
        .apply(w)
        .expect("frame maps of finite tangent vectors are non-degenerate");
    UnitTangent::new(base, FRAC_PI_2 + m.derivative_arg(w))
}

/// The full geodesic carrying a side or arc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Carrier {
    Vertical { x: f64 },
    Circle { center: f64, radius: f64 },
}

impl Carrier {
    /// The geodesic through two distinct points.
    pub fn through(p: HPoint, q: HPoint) -> Self {
        let scale = 1.0 + p.x.abs().max(q.x.abs());
        if (p.x - q.x).abs() <= 1e-15 * scale {
            return Carrier::Vertical {
                x: 0.5 * (p.x + q.x),
            };
        }
        let center = (p.x * p.x + p.y * p.y - q.x * q.x - q.y * q.y) / (2.0 * (p.x - q.x));
        let radius = ((p.x - center).powi(2) + p.y * p.y).sqrt();
        Carrier::Circle { center, radius }
    }

    /// `sinh` of the signed hyperbolic distance from `z` to this geodesic.
    /// Positive to the right of a vertical line and outside a semicircle.
    pub fn signed_sinh_dist(&self, z: HPoint) -> f64 {
        match *self {
            Carrier::Vertical { x } => (z.x - x) / z.y,
            Carrier::Circle { center, radius } => {
                let dx = z.x - center;
                (dx * dx + z.y * z.y - radius * radius) / (2.0 * radius * z.y)
            }
        }
    }
}

/// A geodesic segment between two distinct points; the sides of polygons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub p: HPoint,
    pub q: HPoint,
}

impl Segment {
    pub fn new(p: HPoint, q: HPoint) -> Self {
        Self { p, q }
    }

    pub fn carrier(&self) -> Carrier {
        Carrier::through(self.p, self.q)
    }

    pub fn length(&self) -> f64 {
        hyp_dist(self.p, self.q)
    }

    /// The point at hyperbolic arc length `s` from `p` toward `q`.
    pub fn point_at(&self, s: f64) -> HPoint {
        geodesic_flow(direction_towards(self.p, self.q), s).base
    }

    pub fn midpoint(&self) -> HPoint {
        self.point_at(0.5 * self.length())
    }

    pub fn reversed(&self) -> Self {
        Self {
            p: self.q,
            q: self.p,
        }
    }
}

/// Unit tangent at `p` pointing along the geodesic toward `q`.
pub fn direction_towards(p: HPoint, q: HPoint) -> UnitTangent {
    let m = Mobius::moving_i_to(p);
    let q_local = m.inverse().apply(q).expect("finite point");
    UnitTangent::new(p, direction_from_i(q_local))
}

/// Angle at `i` of the geodesic heading to `q`.
fn direction_from_i(q: HPoint) -> f64 {
    // The geodesic from i to q leaves i tangent to the circle through i and q
    // centered on the real axis. For a circle centered at c the tangent at i is
    // perpendicular to (i − c) = (−c, 1).
    match Carrier::through(HPoint::I, q) {
        Carrier::Vertical { .. } => {
            if q.y >= 1.0 {
                FRAC_PI_2
            } else {
                -FRAC_PI_2
            }
        }
        Carrier::Circle { center, .. } => {
            // Candidate tangents (1, c) and (−1, −c); pick the one moving
            // toward q.
            let t = (1.0, center);
            let towards = (q.x) * t.0 + (q.y - 1.0) * t.1;
            if towards >= 0.0 {
                t.1.atan2(t.0)
            } else {
                (-t.1).atan2(-t.0)
            }
        }
    }
}

/// An oriented geodesic arc of finite or infinite length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicArc {
    pub start: UnitTangent,
    pub length: f64,
}

impl GeodesicArc {
    pub fn new(start: UnitTangent, length: f64) -> Self {
        Self { start, length }
    }

    pub fn ray(start: UnitTangent) -> Self {
        Self {
            start,
            length: f64::INFINITY,
        }
    }

    pub fn point_at(&self, t: f64) -> HPoint {
        geodesic_flow(self.start, t).base
    }

    /// Closed-form carrier: the image of the imaginary axis under the frame
    /// map of the start vector.
    pub fn carrier(&self) -> Carrier {
        let m = Mobius::frame(self.start);
        match (m.apply_boundary(Some(0.0)), m.apply_boundary(None)) {
            (Some(e0), Some(e1)) => Carrier::Circle {
                center: 0.5 * (e0 + e1),
                radius: 0.5 * (e0 - e1).abs(),
            },
            (None, Some(x)) | (Some(x), None) => Carrier::Vertical { x },
            (None, None) => unreachable!("a Möbius map fixes at most one of 0, ∞ at infinity"),
        }
    }
}

/// Where an arc meets a side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideCrossing {
    /// Arc-length parameter along the arc.
    pub t: f64,
    pub point: HPoint,
    /// The crossing lies within the vertex tolerance of a side endpoint.
    pub near_vertex: bool,
}

/// First crossing of an oriented arc with a geodesic segment.
///
/// Works in the frame of the arc's start vector, where the arc is the upward
/// imaginary axis; the crossing parameter is then `log` of the height at
/// which the side's carrier meets that axis. Returns `Ok(None)` if the arc
/// misses the segment and [`GeomError::Tangency`] if the arc starts on the
/// side's carrier or runs along it.
pub fn arc_side_crossing(
    arc: &GeodesicArc,
    side: &Segment,
    membership_tol: f64,
    vertex_tol: f64,
) -> Result<Option<SideCrossing>> {
    let frame = Mobius::frame(arc.start);
    let inv = frame.inverse();
    let p = inv.apply(side.p)?;
    let q = inv.apply(side.q)?;
    let (t, hit) = match Carrier::through(p, q) {
        Carrier::Vertical { x } => {
            if (x / p.y.min(q.y)).abs() < membership_tol {
                return Err(GeomError::Tangency { t: 0.0 });
            }
            return Ok(None);
        }
        Carrier::Circle { center, radius } => {
            let h = (radius - center) * (radius + center);
            if h <= 0.0 {
                return Ok(None);
            }
            let y0 = h.sqrt();
            (y0.ln(), HPoint { x: 0.0, y: y0 })
        }
    };
    if t.abs() <= membership_tol.max(1e-10) {
        return Err(GeomError::Tangency { t });
    }
    if t < 0.0 || t > arc.length {
        return Ok(None);
    }
    let near_vertex = hyp_dist(hit, p).min(hyp_dist(hit, q)) < vertex_tol;
    let (lo, hi) = if p.x < q.x { (p.x, q.x) } else { (q.x, p.x) };
    if !near_vertex && !(lo <= 0.0 && 0.0 <= hi) {
        return Ok(None);
    }
    Ok(Some(SideCrossing {
        t,
        point: frame.apply(hit)?,
        near_vertex,
    }))
}

/// A hyperbolic disk `D_t(center)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallSpec {
    pub center: HPoint,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: HPoint, radius: f64) -> Result<Self> {
        if radius < 0.0 || radius.is_nan() {
            return Err(GeomError::NegativeRadius(radius));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, z: HPoint) -> bool {
        hyp_dist(self.center, z) <= self.radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> HPoint {
        HPoint::new(x, y).unwrap()
    }

    #[test]
    fn mobius_examples() {
        assert_eq!(Mobius::IDENTITY.apply(HPoint::I).unwrap(), HPoint::I);
        assert_eq!(Mobius::translation(1.0).apply(HPoint::I).unwrap(), p(1.0, 1.0));
        let s = Mobius::new(0.0, -1.0, 1.0, 0.0).unwrap();
        let z = s.apply(HPoint::I).unwrap();
        assert!((z.x).abs() < 1e-15 && (z.y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_lower_half_plane_and_bad_det() {
        assert!(HPoint::new(0.0, -1.0).is_err());
        assert!(HPoint::new(f64::NAN, 1.0).is_err());
        assert!(Mobius::new(0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn distance_along_imaginary_axis_matches_quadrature() {
        // ∫_1^2 dy / y by composite Simpson.
        let n = 2000;
        let h = 1.0 / n as f64;
        let f = |y: f64| 1.0 / y;
        let mut s = f(1.0) + f(2.0);
        for k in 1..n {
            let y = 1.0 + k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(y);
        }
        let oracle = s * h / 3.0;
        assert!((oracle - 0.693147).abs() < 1e-6);
        assert!((hyp_dist(HPoint::I, p(0.0, 2.0)) - oracle).abs() < 1e-10);
        assert_eq!(hyp_dist(HPoint::I, HPoint::I), 0.0);
    }

    #[test]
    fn flow_up_the_imaginary_axis() {
        // Oracle: RK4 on the geodesic equations x'' = 2x'y'/y, y'' = (y'² − x'²)/y
        // from (0,1) with unit-speed velocity (0,1).
        let rhs = |s: [f64; 4]| {
            let [_, y, vx, vy] = s;
            [vx, vy, 2.0 * vx * vy / y, (vy * vy - vx * vx) / y]
        };
        let mut s = [0.0, 1.0, 0.0, 1.0];
        let t_end = 2f64.ln();
        let n = 4000;
        let h = t_end / n as f64;
        for _ in 0..n {
            let add = |a: [f64; 4], b: [f64; 4], k: f64| {
                [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2], a[3] + k * b[3]]
            };
            let k1 = rhs(s);
            let k2 = rhs(add(s, k1, h / 2.0));
            let k3 = rhs(add(s, k2, h / 2.0));
            let k4 = rhs(add(s, k3, h));
            for i in 0..4 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let out = geodesic_flow(UnitTangent::new(HPoint::I, FRAC_PI_2), t_end);
        assert!((out.base.x - s[0]).abs() < 1e-10);
        assert!((out.base.y - s[1]).abs() < 1e-10);
        assert!((out.base.y - 2.0).abs() < 1e-12);
        assert!(angle_diff(out.angle, FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn flow_matches_integrated_geodesic_in_general_direction() {
        let ut = UnitTangent::new(p(0.3, 0.7), 2.1);
        let rhs = |s: [f64; 4]| {
            let [_, y, vx, vy] = s;
            [vx, vy, 2.0 * vx * vy / y, (vy * vy - vx * vx) / y]
        };
        let y0 = ut.base.y;
        let mut s = [ut.base.x, y0, y0 * ut.angle.cos(), y0 * ut.angle.sin()];
        let n = 20000;
        let h = 1.5 / n as f64;
        for _ in 0..n {
            let add = |a: [f64; 4], b: [f64; 4], k: f64| {
                [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2], a[3] + k * b[3]]
            };
            let k1 = rhs(s);
            let k2 = rhs(add(s, k1, h / 2.0));
            let k3 = rhs(add(s, k2, h / 2.0));
            let k4 = rhs(add(s, k3, h));
            for i in 0..4 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let out = geodesic_flow(ut, 1.5);
        assert!((out.base.x - s[0]).abs() < 1e-9, "{out:?} vs {s:?}");
        assert!((out.base.y - s[1]).abs() < 1e-9);
        assert!(angle_diff(out.angle, s[3].atan2(s[2])).abs() < 1e-9);
    }

    #[test]
    fn ball_volume_values() {
        assert_eq!(ball_volume(0.0).unwrap(), 0.0);
        assert!(ball_volume(-1.0).is_err());
        let ratio = ball_volume(20.0).unwrap() / ball_volume(10.0).unwrap();
        assert!((ratio / 10f64.exp() - 1.0).abs() < 0.05);
    }

    #[test]
    fn ball_volume_matches_monte_carlo_area() {
        use rand::{Rng, SeedableRng};
        // In coordinates (x, v = −1/y) the area form dx dy / y² is dx dv, so
        // uniform hits in the bounding box measure hyperbolic area directly.
        let ball = BallSpec::new(HPoint::I, 2.0).unwrap();
        let (c, r) = ball_euclidean(&ball);
        let (x0, x1) = (c.re - r, c.re + r);
        let (v0, v1) = (-1.0 / (c.im - r), -1.0 / (c.im + r));
        let box_area = (x1 - x0) * (v1 - v0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 2_000_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let x = rng.gen_range(x0..x1);
            let v = rng.gen_range(v0..v1);
            if ball.contains(HPoint { x, y: -1.0 / v }) {
                hits += 1;
            }
        }
        let area = box_area * hits as f64 / n as f64;
        let exact = ball_volume(2.0).unwrap();
        assert!((area / exact - 1.0).abs() < 0.01, "{area} vs {exact}");
    }

    #[test]
    fn crossing_examples() {
        let up = GeodesicArc::ray(UnitTangent::new(HPoint::I, FRAC_PI_2));
        let far = Segment::new(p(10.0, 1.0), p(11.0, 1.0));
        assert_eq!(arc_side_crossing(&up, &far, 1e-12, 1e-9).unwrap(), None);

        // Side on the unit semicircle through i: the arc starts on it.
        let on_unit = Segment::new(p(-0.1, (1.0f64 - 0.01).sqrt()), p(0.1, (1.0f64 - 0.01).sqrt()));
        assert!(matches!(
            arc_side_crossing(&up, &on_unit, 1e-12, 1e-9),
            Err(GeomError::Tangency { .. })
        ));
    }

    #[test]
    fn crossing_agrees_with_bisection() {
        let arc = GeodesicArc::ray(UnitTangent::new(p(0.2, 1.1), 0.9));
        let side = Segment::new(p(1.0, 0.5), p(2.0, 2.5));
        let hit = arc_side_crossing(&arc, &side, 1e-12, 1e-9)
            .unwrap()
            .expect("crosses");
        let carrier = side.carrier();
        let f = |t: f64| carrier.signed_sinh_dist(arc.point_at(t));
        let (mut lo, mut hi) = (0.0, 10.0);
        assert!(f(lo).signum() != f(hi).signum());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == f(lo).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((hit.t - 0.5 * (lo + hi)).abs() < 1e-10);
    }

    #[test]
    fn arc_carrier_contains_flowed_points() {
        let arc = GeodesicArc::ray(UnitTangent::new(p(-0.4, 0.6), 4.0));
        let c = arc.carrier();
        for k in 0..10 {
            let z = arc.point_at(k as f64 * 0.7 - 3.0);
            assert!(c.signed_sinh_dist(z).abs() < 1e-9);
        }
    }

    #[test]
    fn segment_point_at_lies_on_segment() {
        let s = Segment::new(p(-1.0, 0.5), p(0.7, 2.0));
        let m = s.midpoint();
        assert!((hyp_dist(s.p, m) - hyp_dist(m, s.q)).abs() < 1e-12);
        assert!(s.carrier().signed_sinh_dist(m).abs() < 1e-12);
        let r = Mobius::rotation_about(p(0.1, 0.9), 1.0);
        assert!((r.apply(p(0.1, 0.9)).unwrap().x - 0.1).abs() < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn point() -> impl Strategy<Value = HPoint> {
            (-3.0..3.0f64, 0.2..4.0f64).prop_map(|(x, y)| HPoint { x, y })
        }

        fn mobius() -> impl Strategy<Value = Mobius> {
            (point(), 0.0..TAU, -1.5..1.5f64).prop_map(|(z, a, t)| {
                Mobius::frame(UnitTangent::new(z, a)) * Mobius::dilation(t.exp())
            })
        }

        proptest! {
            #[test]
            fn isometry(m in mobius(), z in point(), w in point()) {
                let d0 = hyp_dist(z, w);
                let d1 = hyp_dist(m.apply(z).unwrap(), m.apply(w).unwrap());
                prop_assert!((d0 - d1).abs() < 1e-10 * (1.0 + d0));
            }

            #[test]
            fn group_law(m1 in mobius(), m2 in mobius(), z in point()) {
                let a = (m1 * m2).apply(z).unwrap();
                let b = m1.apply(m2.apply(z).unwrap()).unwrap();
                prop_assert!(hyp_dist(a, b) < 1e-10);
                prop_assert!(((m1 * m2).det() - 1.0).abs() < 1e-12);
            }

            #[test]
            fn flow_is_a_flow(z in point(), a in 0.0..TAU, s in -3.0..3.0f64, t in -3.0..3.0f64) {
                let ut = UnitTangent::new(z, a);
                let one = geodesic_flow(ut, s + t);
                let two = geodesic_flow(geodesic_flow(ut, t), s);
                prop_assert!(hyp_dist(one.base, two.base) < 1e-9);
                prop_assert!(angle_diff(one.angle, two.angle).abs() < 1e-9);
                let back = geodesic_flow(geodesic_flow(ut, t), -t);
                prop_assert!(hyp_dist(back.base, ut.base) < 1e-9);
                prop_assert!(angle_diff(back.angle, ut.angle).abs() < 1e-9);
            }

            #[test]
            fn unit_speed(z in point(), a in 0.0..TAU, t in -5.0..5.0f64) {
                let ut = UnitTangent::new(z, a);
                let d = hyp_dist(ut.base, geodesic_flow(ut, t).base);
                prop_assert!((d - t.abs()).abs() < 1e-9);
            }

            #[test]
            fn ball_volume_increasing_convex(t in 0.01..15.0f64) {
                let h = 1e-3 * t;
                let (a, b, c) = (ball_volume(t - h).unwrap(), ball_volume(t).unwrap(), ball_volume(t + h).unwrap());
                prop_assert!(a < b && b < c);
                prop_assert!(a + c - 2.0 * b > 0.0);
            }
        }
    }
}
