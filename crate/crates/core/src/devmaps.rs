//! Developing maps `ℍ → Pᵐ` and their bad loci.
//!
//! A developing map is `ρ`-equivariant: `s(γz) = ρ(γ)·s(z)` projectively.
//! The bad locus of a covector `u` is the set of `z` with `⟨u, s(z)⟩ = 0`.
//! Three kinds are built in:
//!
//! * the identity chart `z ↦ [z : 1]` of the uniformizing representation;
//! * Veronese curves for symmetric powers;
//! * solutions of `u″ + ½φu = 0` for a user-supplied quadratic differential.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2};
use thiserror::Error;

use crate::hypgeo::{ball_euclidean, hyp_dist, BallSpec, GeomError, HPoint};
use crate::linrep::{sym_power, Cx, RepError, Representation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DevError {
    #[error("covector has no nonzero coordinate")]
    ZeroCovector,
    #[error("covector has {got} coordinates, target needs {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("step size underflow near {at}")]
    Stiffness { at: HPoint },
    #[error("path needs at least two points")]
    ShortPath,
    #[error("developing map of kind {0} does not support this operation")]
    Unsupported(&'static str),
    #[error("veronese degree must be at least 2, got {0}")]
    Degree(usize),
    #[error("winding-number subdivision did not resolve all zeros at depth {depth}")]
    Unresolved { depth: usize },
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Rep(#[from] RepError),
}

pub type Result<T> = std::result::Result<T, DevError>;

/// A holomorphic quadratic differential `φ` on `ℍ`, as a pure evaluator.
pub type Phi = Arc<dyn Fn(Cx) -> Cx + Send + Sync>;

/// Relative tolerance of the embedded Runge–Kutta integrator.
pub const ODE_RTOL: f64 = 1e-10;

/// A solution frame `[[u₁, u₂], [u₁′, u₂′]]` of `u″ + ½φu = 0` at `base`.
#[derive(Clone)]
pub struct OdeDev {
    pub phi: Phi,
    pub base: HPoint,
    pub frame: Matrix2<Cx>,
}

impl fmt::Debug for OdeDev {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeDev")
            .field("base", &self.base)
            .field("frame", &self.frame)
            .finish_non_exhaustive()
    }
}

impl OdeDev {
    /// Solutions `(z, 1)` at `base` when `φ = 0`.
    pub fn standard_frame(base: HPoint) -> Matrix2<Cx> {
        let one = Cx::new(1.0, 0.0);
        let zero = Cx::new(0.0, 0.0);
        Matrix2::new(base.to_complex(), one, one, zero)
    }
}

#[derive(Debug, Clone)]
pub enum DevKind {
    Identity,
    /// `Sym^{n−1}` of the identity chart, in `Pⁿ⁻¹`.
    Veronese(usize),
    Ode(OdeDev),
}

impl DevKind {
    pub fn name(&self) -> &'static str {
        match self {
            DevKind::Identity => "identity",
            DevKind::Veronese(_) => "veronese",
            DevKind::Ode(_) => "ode",
        }
    }
}

/// An equivariant map into projective space.
#[derive(Debug, Clone)]
pub struct DevelopingMap {
    pub kind: DevKind,
    /// The representation acting on the target, when known.
    pub rep: Option<Representation>,
}

impl DevelopingMap {
    /// Homogeneous coordinates of the target dimension.
    pub fn target_len(&self) -> usize {
        match &self.kind {
            DevKind::Identity | DevKind::Ode(_) => 2,
            DevKind::Veronese(n) => *n,
        }
    }

    /// Homogeneous coordinates of `s(z)`.
    pub fn eval(&self, z: HPoint) -> Result<Vec<Cx>> {
        match &self.kind {
            DevKind::Identity => Ok(vec![z.to_complex(), Cx::new(1.0, 0.0)]),
            DevKind::Veronese(n) => Ok(veronese_vector(z.to_complex(), n - 1)),
            DevKind::Ode(ode) => {
                let frame = integrate(&ode.phi, ode.base, z, ode.frame)?;
                Ok(vec![frame[(0, 0)], frame[(0, 1)]])
            }
        }
    }
}

/// `(binom(k, j)·z^{k−j})_j`: the image of `(z, 1)^{⊗k}` in the monomial
/// basis used by `sym_matrix`, so that `Symᵏ(A)·v(z) ∝ v(Az)`.
pub fn veronese_vector(z: Cx, k: usize) -> Vec<Cx> {
    let mut binom = 1.0;
    (0..=k)
        .map(|j| {
            let v = z.powu((k - j) as u32) * binom;
            binom = binom * (k - j) as f64 / (j + 1) as f64;
            v
        })
        .collect()
}

pub fn identity_dev(rep2: &Representation) -> Result<DevelopingMap> {
    if rep2.n() != 2 {
        return Err(DevError::Dimension {
            expected: 2,
            got: rep2.n(),
        });
    }
    Ok(DevelopingMap {
        kind: DevKind::Identity,
        rep: Some(rep2.clone()),
    })
}

/// The Veronese curve in `Pⁿ⁻¹`, equivariant under `Sym^{n−1}(rep2)`.
pub fn veronese_dev(n: usize, rep2: Option<&Representation>) -> Result<DevelopingMap> {
    if n < 2 {
        return Err(DevError::Degree(n));
    }
    let rep = rep2.map(|r| sym_power(r, n - 1)).transpose()?;
    Ok(DevelopingMap {
        kind: DevKind::Veronese(n),
        rep,
    })
}

pub fn ode_dev(phi: Phi, base: HPoint, frame: Matrix2<Cx>, rep: Option<Representation>) -> DevelopingMap {
    DevelopingMap {
        kind: DevKind::Ode(OdeDev { phi, base, frame }),
        rep,
    }
}

/// Sine of the angle between two complex lines.
pub fn projective_distance(a: &[Cx], b: &[Cx]) -> f64 {
    let va = DVector::from_column_slice(a).normalize();
    let vb = DVector::from_column_slice(b).normalize();
    let along = &va * va.dotc(&vb);
    (vb - along).norm().min(1.0)
}

/// A hyperplane `ker u` in the target, in homogeneous coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Covector(Vec<Cx>);

impl Covector {
    pub fn new(coords: Vec<Cx>) -> Result<Self> {
        if coords.iter().all(|c| c.norm() == 0.0) {
            return Err(DevError::ZeroCovector);
        }
        Ok(Self(coords))
    }

    /// `[1 : −w]` in `P¹`, whose bad locus under the identity chart is `{w}`.
    pub fn at_point(w: Cx) -> Self {
        Self(vec![Cx::new(1.0, 0.0), -w])
    }

    /// The covector `u` with `⟨u, v(z)⟩ = p(z)` for the Veronese curve of
    /// degree `k`, given the coefficients of `p` in ascending order.
    pub fn from_polynomial(coeffs: &[Cx], k: usize) -> Result<Self> {
        if coeffs.len() > k + 1 {
            return Err(DevError::Dimension {
                expected: k + 1,
                got: coeffs.len(),
            });
        }
        let mut binom = 1.0;
        let u = (0..=k)
            .map(|j| {
                let c = coeffs.get(k - j).copied().unwrap_or_default() / binom;
                binom = binom * (k - j) as f64 / (j + 1) as f64;
                c
            })
            .collect();
        Self::new(u)
    }

    pub fn coords(&self) -> &[Cx] {
        &self.0
    }

    pub fn scaled(&self, c: Cx) -> Self {
        Self(self.0.iter().map(|x| x * c).collect())
    }

    /// `⟨u, v⟩ = Σ uᵢvᵢ`.
    pub fn pair(&self, v: &[Cx]) -> Cx {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Transports a solution frame along the straight segment `from → to`.
fn integrate(phi: &Phi, from: HPoint, to: HPoint, frame: Matrix2<Cx>) -> Result<Matrix2<Cx>> {
    let z0 = from.to_complex();
    let dz = to.to_complex() - z0;
    if dz.norm() == 0.0 {
        return Ok(frame);
    }
    let rhs = |s: f64, y: &Matrix2<Cx>| -> Matrix2<Cx> {
        let p = phi(z0 + dz * s);
        let zero = Cx::new(0.0, 0.0);
        let a = Matrix2::new(zero, dz, -dz * p * 0.5, zero);
        a * y
    };
    let mut s = 0.0;
    let mut y = frame;
    // Step bounded by a quarter of the segment.
    let h_max: f64 = 0.25;
    let mut h = h_max;
    while s < 1.0 {
        h = h.min(1.0 - s);
        let mut k: [Matrix2<Cx>; 7] = [Matrix2::zeros(); 7];
        for i in 0..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(i) {
                yi += kj * Cx::new(DP_A[i][j] * h, 0.0);
            }
            k[i] = rhs(s + DP_C[i] * h, &yi);
        }
        let mut y5 = y;
        let mut y4 = y;
        for i in 0..7 {
            y5 += k[i] * Cx::new(DP_B5[i] * h, 0.0);
            y4 += k[i] * Cx::new(DP_B4[i] * h, 0.0);
        }
        let scale = y.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        let err = (y5 - y4).iter().map(|c| c.norm()).fold(0.0, f64::max) / (ODE_RTOL * scale);
        if !err.is_finite() {
            return Err(DevError::Stiffness {
                at: HPoint::from_complex(z0 + dz * s).unwrap_or(from),
            });
        }
        if err <= 1.0 {
            s += h;
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(h_max);
        if h < 1e-14 {
            return Err(DevError::Stiffness {
                at: HPoint::from_complex(z0 + dz * s).unwrap_or(from),
            });
        }
    }
    Ok(y)
}

/// Developing values along a polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct OdePath {
    pub points: Vec<HPoint>,
    /// Solution frames at each path vertex.
    pub frames: Vec<Matrix2<Cx>>,
    /// `[u₁ : u₂]` at each vertex.
    pub dev: Vec<[Cx; 2]>,
    /// Largest relative change of the Wronskian `det` along the path.
    pub wronskian_drift: f64,
}

impl OdePath {
    /// `frame_end · frame_start⁻¹`, the transport from start to end.
    pub fn transport(&self) -> Matrix2<Cx> {
        let first = self.frames[0];
        let last = self.frames[self.frames.len() - 1];
        last * first.try_inverse().expect("Wronskian is nonzero")
    }
}

/// Integrates `u″ + ½φu = 0` along `path` from `init` at `path[0]`.
pub fn ode_develop(phi: &Phi, init: Matrix2<Cx>, path: &[HPoint]) -> Result<OdePath> {
    if path.len() < 2 {
        return Err(DevError::ShortPath);
    }
    let w0 = init.determinant();
    let mut frames = vec![init];
    let mut drift: f64 = 0.0;
    for pair in path.windows(2) {
        let next = integrate(phi, pair[0], pair[1], *frames.last().expect("nonempty"))?;
        drift = drift.max((next.determinant() - w0).norm() / w0.norm());
        frames.push(next);
    }
    let dev = frames.iter().map(|f| [f[(0, 0)], f[(0, 1)]]).collect();
    Ok(OdePath {
        points: path.to_vec(),
        frames,
        dev,
        wronskian_drift: drift,
    })
}

/// Bad points found in a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BadCount {
    pub count: usize,
    /// Some zero lies within tolerance of the ball boundary, so the count is
    /// uncertain by one per flagged point.
    pub ambiguous: usize,
    pub points: Vec<HPoint>,
}

/// Distance tolerance for boundary ambiguity.
pub const BOUNDARY_TOL: f64 = 1e-9;

fn classify_points(candidates: impl IntoIterator<Item = HPoint>, ball: &BallSpec) -> BadCount {
    let mut out = BadCount {
        count: 0,
        ambiguous: 0,
        points: Vec::new(),
    };
    for z in candidates {
        let d = hyp_dist(ball.center, z);
        if (d - ball.radius).abs() <= BOUNDARY_TOL {
            out.ambiguous += 1;
        }
        if d <= ball.radius {
            out.count += 1;
            out.points.push(z);
        }
    }
    out
}

/// Zeros of `⟨u, s(z)⟩` in the closed ball, without multiplicity.
pub fn bad_locus_count(dev: &DevelopingMap, u: &Covector, ball: &BallSpec) -> Result<BadCount> {
    let m = dev.target_len();
    if u.coords().len() != m {
        return Err(DevError::Dimension {
            expected: m,
            got: u.coords().len(),
        });
    }
    Ok(classify_points(bad_points(dev, u, Some(ball))?, ball))
}

/// All bad points in `ℍ` when they are finitely many and computable in
/// closed form (identity and Veronese kinds).
pub fn bad_points_closed_form(dev: &DevelopingMap, u: &Covector) -> Result<Vec<HPoint>> {
    match dev.kind {
        DevKind::Ode(_) => Err(DevError::Unsupported("ode")),
        _ => bad_points(dev, u, None),
    }
}

fn bad_points(dev: &DevelopingMap, u: &Covector, ball: Option<&BallSpec>) -> Result<Vec<HPoint>> {
    match &dev.kind {
        DevKind::Identity => {
            let [a, b] = [u.coords()[0], u.coords()[1]];
            if a.norm() == 0.0 {
                return Ok(vec![]);
            }
            Ok(HPoint::from_complex(-b / a).into_iter().collect())
        }
        DevKind::Veronese(n) => {
            let k = n - 1;
            // p(z) = Σ u_j binom(k, j) z^{k−j}, coefficients descending.
            let v = veronese_vector(Cx::new(1.0, 0.0), k);
            let desc: Vec<Cx> = u.coords().iter().zip(&v).map(|(a, b)| a * b).collect();
            Ok(polynomial_roots(&desc)
                .into_iter()
                .filter_map(|z| HPoint::from_complex(z).ok())
                .collect())
        }
        DevKind::Ode(_) => {
            let ball = ball.ok_or(DevError::Unsupported("ode"))?;
            winding_zeros(dev, u, ball)
        }
    }
}

/// Distinct roots of a polynomial with coefficients in descending order.
pub fn polynomial_roots(desc: &[Cx]) -> Vec<Cx> {
    let lead = desc.iter().position(|c| c.norm() > 0.0);
    let Some(lead) = lead else { return vec![] };
    let c = &desc[lead..];
    let deg = c.len() - 1;
    if deg == 0 {
        return vec![];
    }
    let mut comp = DMatrix::<Cx>::zeros(deg, deg);
    for j in 0..deg {
        comp[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..deg {
        comp[(i, i - 1)] = Cx::new(1.0, 0.0);
    }
    let mut roots: Vec<Cx> = match comp.schur().eigenvalues() {
        Some(ev) => ev.iter().copied().collect(),
        None => return vec![],
    };
    // Polish with Newton steps, then merge repeated roots.
    let eval = |z: Cx| c.iter().fold(Cx::new(0.0, 0.0), |acc, &a| acc * z + a);
    let deriv = |z: Cx| {
        c[..deg]
            .iter()
            .enumerate()
            .fold(Cx::new(0.0, 0.0), |acc, (i, &a)| acc * z + a * (deg - i) as f64)
    };
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let d = deriv(*r);
            if d.norm() == 0.0 {
                break;
            }
            let step = eval(*r) / d;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    let mut distinct: Vec<Cx> = Vec::new();
    for r in roots {
        if !distinct.iter().any(|d| (d - r).norm() < 1e-6 * (1.0 + r.norm())) {
            distinct.push(r);
        }
    }
    distinct
}

/// Zeros of the holomorphic function `z ↦ ⟨u, s(z)⟩` in the ball by
/// winding numbers over dyadic cells.
fn winding_zeros(dev: &DevelopingMap, u: &Covector, ball: &BallSpec) -> Result<Vec<HPoint>> {
    let DevKind::Ode(ode) = &dev.kind else {
        return Err(DevError::Unsupported(dev.kind.name()));
    };
    let (c, r) = ball_euclidean(ball);
    // Transport the frame once to the Euclidean center, then develop locally.
    let center = HPoint::from_complex(c)?;
    let frame_c = integrate(&ode.phi, ode.base, center, ode.frame)?;
    let f = |z: Cx| -> Result<Cx> {
        let p = HPoint::from_complex(z)?;
        let fr = integrate(&ode.phi, center, p, frame_c)?;
        Ok(u.pair(&[fr[(0, 0)], fr[(0, 1)]]))
    };
    let min_size = 1e-7 * r.max(1e-300);
    let max_depth = 40;
    let mut zeros = Vec::new();
    let mut stack = vec![(c - Cx::new(r, r), 2.0 * r, 0usize)];
    while let Some((corner, size, depth)) = stack.pop() {
        // Skip cells entirely outside the disk.
        let nearest = Cx::new(
            c.re.clamp(corner.re, corner.re + size),
            c.im.clamp(corner.im, corner.im + size),
        );
        if (nearest - c).norm() > r {
            continue;
        }
        let w = cell_winding(&f, corner, size)?;
        if w == 0 {
            continue;
        }
        if size <= min_size {
            zeros.push(corner + Cx::new(size / 2.0, size / 2.0));
            continue;
        }
        if depth >= max_depth {
            return Err(DevError::Unresolved { depth });
        }
        let h = size / 2.0;
        for (dx, dy) in [(0.0, 0.0), (h, 0.0), (0.0, h), (h, h)] {
            stack.push((corner + Cx::new(dx, dy), h, depth + 1));
        }
    }
    let mut pts: Vec<HPoint> = Vec::new();
    for z in zeros {
        let p = HPoint::from_complex(z)?;
        if !pts.iter().any(|q| hyp_dist(*q, p) < 1e-5) {
            pts.push(p);
        }
    }
    Ok(pts)
}

/// Winding number of `f` around the square boundary, refining each edge
/// until consecutive phase increments stay below `π/2`.
fn cell_winding(f: &impl Fn(Cx) -> Result<Cx>, corner: Cx, size: f64) -> Result<i64> {
    let corners = [
        corner,
        corner + Cx::new(size, 0.0),
        corner + Cx::new(size, size),
        corner + Cx::new(0.0, size),
    ];
    let mut total = 0.0;
    for i in 0..4 {
        let (a, b) = (corners[i], corners[(i + 1) % 4]);
        total += edge_phase(f, a, b, f(a)?, f(b)?, 0)?;
    }
    Ok((total / std::f64::consts::TAU).round() as i64)
}

fn edge_phase(f: &impl Fn(Cx) -> Result<Cx>, a: Cx, b: Cx, fa: Cx, fb: Cx, depth: usize) -> Result<f64> {
    let d = (fb / fa).arg();
    if (d.abs() < std::f64::consts::FRAC_PI_2 && depth >= 2) || depth > 30 {
        return Ok(d);
    }
    let m = (a + b) / 2.0;
    let fm = f(m)?;
    Ok(edge_phase(f, a, m, fa, fm, depth + 1)? + edge_phase(f, m, b, fm, fb, depth + 1)?)
}
