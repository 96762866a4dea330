//! Cocompact Fuchsian groups with explicit fundamental polygons.
//!
//! Two families are built in:
//!
//! * triangle groups `Δ(p, q, r)`: the fundamental domain is the hyperbolic
//!   triangle with angles `π/p, π/q, π/r` doubled along one side, a
//!   quadrilateral whose two pairs of sides are glued by the rotations about
//!   the two vertices of the doubling side;
//! * closed surface groups of genus `g`: the regular `4g`-gon with vertex
//!   angle `2π/4g`, glued by the pattern `a₁ b₁ a₁⁻¹ b₁⁻¹ ⋯`.
//!
//! The geodesic coding ray-traces a unit tangent vector through the polygon.
//! Whenever the ray leaves through a side it is pulled back by that side's
//! pairing, and the pairing's generator letter is appended to the stream.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

use crate::hypgeo::{
    self, arc_side_crossing, direction_towards, geodesic_flow, hyp_dist, Carrier, GeodesicArc,
    GeomError, HPoint, Mobius, Segment, UnitTangent,
};
use crate::linrep::{self, eval_word, Cx, Field, MatrixN, RepError, Representation};
use crate::word::Word;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuchsianError {
    #[error("invalid group spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Rep(#[from] RepError),
    #[error("pull-back did not converge within {0} steps")]
    NonConvergence(usize),
    #[error("geodesic direction stays degenerate after {retries} perturbations")]
    DegenerateDirection { retries: usize },
    #[error("ray left the fundamental domain without crossing a side")]
    Escaped,
    #[error("orbit enumeration exceeded the budget of {budget} tiles ({found} orbit points found so far)")]
    Budget { budget: usize, found: usize },
    #[error("bending is degenerate: {0}")]
    DegenerateBending(String),
    #[error("{0} is only defined for {1}")]
    Unsupported(&'static str, &'static str),
}

pub type Result<T> = std::result::Result<T, FuchsianError>;

/// Which cocompact group to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupSpec {
    Triangle { p: u32, q: u32, r: u32 },
    Surface { genus: u32 },
}

impl GroupSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GroupSpec::Triangle { p, q, r } => {
                if p < 2 || q < 2 || r < 2 {
                    return Err(FuchsianError::Spec(format!(
                        "triangle orders must be ≥ 2, got {p},{q},{r}"
                    )));
                }
                // 1/p + 1/q + 1/r < 1  ⇔  qr + pr + pq < pqr
                let (p, q, r) = (p as u64, q as u64, r as u64);
                if q * r + p * r + p * q >= p * q * r {
                    return Err(FuchsianError::Spec(format!(
                        "triangle {p},{q},{r} is not hyperbolic"
                    )));
                }
                Ok(())
            }
            GroupSpec::Surface { genus } => {
                if genus < 2 {
                    return Err(FuchsianError::Spec(format!("surface genus must be ≥ 2, got {genus}")));
                }
                Ok(())
            }
        }
    }

    /// Hyperbolic area of the quotient, by Gauss–Bonnet.
    pub fn covolume(&self) -> f64 {
        match *self {
            GroupSpec::Triangle { p, q, r } => {
                2.0 * (PI - PI / p as f64 - PI / q as f64 - PI / r as f64)
            }
            GroupSpec::Surface { genus } => 4.0 * PI * (genus as f64 - 1.0),
        }
    }
}

impl FromStr for GroupSpec {
    type Err = FuchsianError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || FuchsianError::Spec(format!("expected triangle:p,q,r or surface:g, got {s:?}"));
        let (kind, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let nums = args
            .split(',')
            .map(|t| t.trim().parse::<u32>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let spec = match (kind, nums.as_slice()) {
            ("triangle", &[p, q, r]) => GroupSpec::Triangle { p, q, r },
            ("surface", &[genus]) => GroupSpec::Surface { genus },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::Triangle { p, q, r } => write!(f, "triangle:{p},{q},{r}"),
            GroupSpec::Surface { genus } => write!(f, "surface:{genus}"),
        }
    }
}

/// One side of the fundamental polygon together with its gluing.
#[derive(Debug, Clone, PartialEq)]
pub struct Side {
    pub segment: Segment,
    pub carrier: Carrier,
    pub partner: usize,
    /// Maps this side onto its partner, reversing boundary orientation, and
    /// the polygon onto its neighbor across the partner side.
    pub pairing: Mobius,
    /// Generator letter whose image is `pairing`.
    pub letter: i32,
    interior_sign: f64,
}

/// A convex fundamental polygon with side pairings.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalDomain {
    pub vertices: Vec<HPoint>,
    pub sides: Vec<Side>,
    pub interior_point: HPoint,
    /// Distance from the interior point to the boundary.
    pub inradius: f64,
    /// Distance from the interior point to the farthest vertex.
    pub circumradius: f64,
    /// Upper bound on side crossings per unit of flow time.
    pub crossing_rate: usize,
}

/// Tolerance used for side membership.
pub const SIDE_TOL: f64 = 1e-10;
/// Crossings closer than this to a vertex trigger an angular perturbation.
pub const VERTEX_TOL: f64 = 1e-9;

impl FundamentalDomain {
    /// Closed-polygon membership.
    pub fn contains(&self, z: HPoint) -> bool {
        self.violated_side(z, SIDE_TOL).is_none()
    }

    /// Index of a side whose carrier separates `z` from the interior.
    fn violated_side(&self, z: HPoint, tol: f64) -> Option<usize> {
        self.sides
            .iter()
            .position(|s| s.carrier.signed_sinh_dist(z) * s.interior_sign < -tol)
    }

    /// Uniform sample with respect to hyperbolic area.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> HPoint {
        let cr = self.circumradius.cosh();
        loop {
            let u: f64 = rng.gen();
            let r = (1.0 + u * (cr - 1.0)).acosh();
            let theta = rng.gen_range(0.0..TAU);
            let z = geodesic_flow(UnitTangent::new(self.interior_point, theta), r).base;
            if self.contains(z) {
                return z;
            }
        }
    }

    /// Hyperbolic area via the angle-defect formula.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut angle_sum = 0.0;
        for i in 0..n {
            let v = self.vertices[i];
            let next = self.vertices[(i + 1) % n];
            let prev = self.vertices[(i + n - 1) % n];
            let a = direction_towards(v, next).angle;
            let b = direction_towards(v, prev).angle;
            angle_sum += (b - a).rem_euclid(TAU);
        }
        (n as f64 - 2.0) * PI - angle_sum
    }
}

/// A built-in cocompact group: polygon, generators and relations.
#[derive(Debug, Clone, PartialEq)]
pub struct FuchsianGroup {
    pub spec: GroupSpec,
    pub domain: FundamentalDomain,
    pub generators: Vec<Mobius>,
    pub relations: Vec<Word>,
}

fn rotation_ccw_about(center: HPoint, angle: f64) -> Mobius {
    Mobius::rotation_about(center, angle)
}

/// The orientation-preserving isometry taking the oriented segment
/// `from.p → from.q` to `to.p → to.q`.
fn segment_isometry(from: &Segment, to: &Segment) -> Mobius {
    let f1 = Mobius::frame(direction_towards(from.p, from.q));
    let f2 = Mobius::frame(direction_towards(to.p, to.q));
    f2 * f1.inverse()
}

/// Evaluates a word in the real Möbius generators.
pub fn eval_word_mobius(generators: &[Mobius], w: &Word) -> Mobius {
    w.letters().iter().fold(Mobius::IDENTITY, |m, &l| {
        let g = generators[l.unsigned_abs() as usize - 1];
        m * if l > 0 { g } else { g.inverse() }
    })
}

/// Constructs the polygon, generators and relations for `spec`.
pub fn build_group(spec: GroupSpec) -> Result<FuchsianGroup> {
    spec.validate()?;
    let (vertices, generators, relations, partners) = match spec {
        GroupSpec::Triangle { p, q, r } => triangle_polygon(p, q, r)?,
        GroupSpec::Surface { genus } => surface_polygon(genus),
    };
    assemble(spec, vertices, generators, relations, &partners)
}

type PolygonData = (Vec<HPoint>, Vec<Mobius>, Vec<Word>, Vec<usize>);

fn triangle_polygon(p: u32, q: u32, r: u32) -> Result<PolygonData> {
    let (al, be, ga) = (PI / p as f64, PI / q as f64, PI / r as f64);
    // Side lengths from the angle form of the hyperbolic law of cosines.
    let ab = ((ga.cos() + al.cos() * be.cos()) / (al.sin() * be.sin())).acosh();
    let ac = ((be.cos() + al.cos() * ga.cos()) / (al.sin() * ga.sin())).acosh();
    let a = HPoint::I;
    let theta0 = 0.0;
    let b = geodesic_flow(UnitTangent::new(a, theta0), ab).base;
    let c = geodesic_flow(UnitTangent::new(a, theta0 + al), ac).base;
    let c_refl = geodesic_flow(UnitTangent::new(a, theta0 - al), ac).base;

    // Incenter of the quadrilateral A, C', B, C: it lies on the symmetry
    // axis AB; maximize the distance to the four side carriers along it.
    let quad = [a, c_refl, b, c];
    let carriers: Vec<Carrier> = (0..4)
        .map(|i| Carrier::through(quad[i], quad[(i + 1) % 4]))
        .collect();
    let axis = Segment::new(a, b);
    let clearance = |s: f64| {
        let z = axis.point_at(s);
        carriers
            .iter()
            .map(|c| c.signed_sinh_dist(z).abs().asinh())
            .fold(f64::INFINITY, f64::min)
    };
    let (mut lo, mut hi) = (0.0, ab);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if clearance(m1) < clearance(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let incenter = axis.point_at(0.5 * (lo + hi));
    let to_i = Mobius::moving_i_to(incenter).inverse();
    let moved = quad.map(|z| to_i.apply(z).expect("isometry"));
    let [a, c_refl, b, c] = moved;
    let gens = vec![
        rotation_ccw_about(a, 2.0 * al),
        rotation_ccw_about(b, 2.0 * be),
        rotation_ccw_about(c, 2.0 * ga),
    ];
    let relations = vec![
        Word::power(1, p as usize),
        Word::power(2, q as usize),
        Word::power(3, r as usize),
        Word::new(vec![1, 2, 3]),
    ];
    // Sides: A→C', C'→B, B→C, C→A. The rotation about A glues sides 0 and 3,
    // the rotation about B glues sides 1 and 2.
    Ok((vec![a, c_refl, b, c], gens, relations, vec![3, 2, 1, 0]))
}

fn surface_polygon(genus: u32) -> PolygonData {
    let n = 4 * genus as usize;
    let cot = (PI / n as f64).tan().recip();
    let circum = (cot * cot).acosh();
    let vertices: Vec<HPoint> = (0..n)
        .map(|k| {
            let theta = TAU * k as f64 / n as f64;
            geodesic_flow(UnitTangent::new(HPoint::I, theta), circum).base
        })
        .collect();
    let seg = |j: usize| Segment::new(vertices[j], vertices[(j + 1) % n]);
    // Side labels a_k, b_k, a_k⁻¹, b_k⁻¹ on sides 4k .. 4k+3. The generator a_k
    // maps side 4k+2 onto side 4k; b_k maps side 4k+1 onto side 4k+3.
    let mut gens = Vec::with_capacity(2 * genus as usize);
    for k in 0..genus as usize {
        let j = 4 * k;
        gens.push(segment_isometry(&seg(j + 2), &seg(j).reversed()));
        gens.push(segment_isometry(&seg(j + 1), &seg(j + 3).reversed()));
    }
    let relation = Word::new(
        (0..genus as i32)
            .flat_map(|k| Word::commutator(2 * k + 1, 2 * k + 2).letters().to_vec())
            .collect(),
    );
    let partners = (0..n)
        .map(|j| match j % 4 {
            0 | 1 => j + 2,
            _ => j - 2,
        })
        .collect();
    (vertices, gens, vec![relation], partners)
}

fn assemble(
    spec: GroupSpec,
    vertices: Vec<HPoint>,
    generators: Vec<Mobius>,
    relations: Vec<Word>,
    partners: &[usize],
) -> Result<FuchsianGroup> {
    let n = vertices.len();
    let interior_point = HPoint::I;
    let mut sides = Vec::with_capacity(n);
    for j in 0..n {
        let segment = Segment::new(vertices[j], vertices[(j + 1) % n]);
        let k = partners[j];
        let partner_seg = Segment::new(vertices[k], vertices[(k + 1) % n]);
        let geometric = segment_isometry(&segment, &partner_seg.reversed());
        let (letter, pairing) = (1..=generators.len() as i32)
            .flat_map(|l| [l, -l])
            .map(|l| {
                let g = generators[l.unsigned_abs() as usize - 1];
                (l, if l > 0 { g } else { g.inverse() })
            })
            .find(|(_, g)| g.projectively_close(geometric, 1e-9))
            .ok_or_else(|| {
                FuchsianError::Spec(format!("side {j} pairing is not a generator image"))
            })?;
        let carrier = segment.carrier();
        let interior_sign = carrier.signed_sinh_dist(interior_point).signum();
        sides.push(Side {
            segment,
            carrier,
            partner: k,
            pairing,
            letter,
            interior_sign,
        });
    }
    let inradius = sides
        .iter()
        .map(|s| s.carrier.signed_sinh_dist(interior_point).abs().asinh())
        .fold(f64::INFINITY, f64::min);
    let circumradius = vertices
        .iter()
        .map(|&v| hyp_dist(interior_point, v))
        .fold(0.0, f64::max);
    let mut domain = FundamentalDomain {
        vertices,
        sides,
        interior_point,
        inradius,
        circumradius,
        crossing_rate: usize::MAX,
    };
    // A unit geodesic segment starting in the polygon stays within
    // 1 + circumradius of the interior point, and meets every convex tile at
    // most once, so it crosses at most as many sides as there are tiles whose
    // interior point lies within 1 + 2·circumradius.
    domain.crossing_rate = enumerate_tiles(&domain, interior_point, 1.0 + 2.0 * circumradius, 1 << 22)?
        .len();
    Ok(FuchsianGroup {
        spec,
        domain,
        generators,
        relations,
    })
}

impl FuchsianGroup {
    pub fn covolume(&self) -> f64 {
        self.spec.covolume()
    }

    /// The tautological representation into `SL₂(ℝ)`; relations close up to
    /// sign for triangle groups.
    pub fn uniformizing_rep(&self) -> Representation {
        let mats: Vec<[[f64; 2]; 2]> = self.generators.iter().map(|g| g.to_matrix()).collect();
        let projective = matches!(self.spec, GroupSpec::Triangle { .. });
        Representation::from_real_2x2(
            format!("fuchsian {}", self.spec),
            &mats,
            self.relations.clone(),
            projective,
        )
        .expect("SL2 matrices are invertible")
        .with_label(format!("fuchsian {}", self.spec))
    }

    pub fn trivial_rep(&self, n: usize) -> Representation {
        Representation::trivial(n, self.generators.len(), self.relations.clone())
    }

    /// A finite unitary image of `Δ(3,3,4)`: generators of orders 3, 3, 4
    /// with `abc = 1` among the rotations of the 4-cube, as signed 4×4
    /// permutation matrices. The rotations of the ordinary cube cannot carry
    /// these orders, since the product of two 3-cycles in `S₄` is even.
    pub fn unitary_cube_rep(&self) -> Result<Representation> {
        if self.spec != (GroupSpec::Triangle { p: 3, q: 3, r: 4 }) {
            return Err(FuchsianError::Unsupported("the cube representation", "triangle:3,3,4"));
        }
        let rots = hypercube_rotations();
        let order = |m: &IntMat| {
            let mut acc = *m;
            for k in 1..=24 {
                if acc == INT_IDENTITY {
                    return k;
                }
                acc = int_mul(&acc, m);
            }
            0
        };
        let to_mat = |m: &IntMat| MatrixN::from_fn(4, 4, |i, j| Cx::new(m[i][j] as f64, 0.0));
        let (a, b) = rots
            .iter()
            .filter(|a| order(a) == 3)
            .flat_map(|a| rots.iter().filter(|b| order(b) == 3).map(move |b| (a, b)))
            .find(|(a, b)| {
                let ab = int_mul(a, b);
                order(&ab) == 4
            })
            .expect("the 4-cube rotation group contains such a pair");
        let c = int_transpose(&int_mul(a, b));
        Ok(Representation::new(
            "unitary-cube triangle:3,3,4",
            Field::Real,
            vec![to_mat(a), to_mat(b), to_mat(&c)],
            self.relations.clone(),
            false,
        )?)
    }
}

type IntMat = [[i32; 4]; 4];

const INT_IDENTITY: IntMat = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]];

fn int_mul(a: &IntMat, b: &IntMat) -> IntMat {
    let mut out = [[0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn int_transpose(a: &IntMat) -> IntMat {
    let mut out = [[0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// The 192 signed permutation matrices of determinant one.
fn hypercube_rotations() -> Vec<IntMat> {
    let mut out = Vec::new();
    let mut perm = [0usize, 1, 2, 3];
    let mut perms = Vec::new();
    permutations(&mut perm, 0, &mut perms);
    for (perm, parity) in perms {
        for signs in 0..16u32 {
            let mut m = [[0; 4]; 4];
            for (row, &col) in perm.iter().enumerate() {
                m[row][col] = if signs >> row & 1 == 1 { -1 } else { 1 };
            }
            let sign_parity = signs.count_ones() % 2;
            if (parity + sign_parity) % 2 == 0 {
                out.push(m);
            }
        }
    }
    out
}

fn permutations(p: &mut [usize; 4], k: usize, out: &mut Vec<([usize; 4], u32)>) {
    if k == p.len() {
        let inversions = (0..4)
            .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
            .filter(|&(i, j)| p[i] > p[j])
            .count();
        out.push((*p, inversions as u32 % 2));
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, out);
        p.swap(k, i);
    }
}

/// One side crossing of a coded geodesic.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeCrossing {
    /// Flow time at the crossing, curvature −1 arc length from the start.
    pub time: f64,
    /// The pairing applied to pull the ray back, as a one-letter word.
    pub word: Word,
    pub side: usize,
}

/// The sequence of sides crossed by a geodesic, with pairing letters.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingStream {
    pub crossings: Vec<CodeCrossing>,
    pub total_time: f64,
    /// State at `total_time`, pulled back into the polygon.
    pub final_state: UnitTangent,
    /// Angular perturbations applied at vertex hits, as `(time, ε)`.
    pub perturbations: Vec<(f64, f64)>,
}

impl CodingStream {
    pub fn letters(&self) -> impl Iterator<Item = i32> + '_ {
        self.crossings.iter().map(|c| c.word.letters()[0])
    }
}

enum Exit {
    Side(usize, hypgeo::SideCrossing),
    Vertex,
    None,
}

fn next_exit(dom: &FundamentalDomain, state: UnitTangent, skip: Option<usize>, max_len: f64) -> Exit {
    let arc = GeodesicArc::new(state, max_len);
    let mut best: Option<(usize, hypgeo::SideCrossing)> = None;
    for (j, side) in dom.sides.iter().enumerate() {
        if Some(j) == skip {
            continue;
        }
        match arc_side_crossing(&arc, &side.segment, 1e-12, VERTEX_TOL) {
            Ok(Some(c)) => {
                if c.near_vertex {
                    return Exit::Vertex;
                }
                if let Some((_, b)) = &best {
                    if (b.t - c.t).abs() < VERTEX_TOL {
                        return Exit::Vertex;
                    }
                }
                if best.as_ref().is_none_or(|(_, b)| c.t < b.t) {
                    best = Some((j, c));
                }
            }
            Ok(None) => {}
            Err(_) => {
                // Starting on this side's carrier: harmless if heading inward.
                let probe = geodesic_flow(state, 1e-6).base;
                if side.carrier.signed_sinh_dist(probe) * side.interior_sign <= 1e-12 {
                    return Exit::Vertex;
                }
            }
        }
    }
    match best {
        Some((j, c)) => Exit::Side(j, c),
        None => Exit::None,
    }
}

/// Ray-traces the geodesic of `ut` for flow time `total`.
///
/// `ut.base` must lie in the closed polygon.
pub fn code_geodesic(dom: &FundamentalDomain, ut: UnitTangent, total: f64) -> Result<CodingStream> {
    trace(dom, ut, total, None)
}

fn trace(
    dom: &FundamentalDomain,
    ut: UnitTangent,
    total: f64,
    mut skip: Option<usize>,
) -> Result<CodingStream> {
    let max_crossings = dom.crossing_rate.saturating_mul(total.ceil() as usize + 1);
    let mut state = ut;
    let mut elapsed = 0.0;
    let mut crossings = Vec::new();
    let mut perturbations = Vec::new();
    let mut retries = 0usize;
    let mut eps = 1e-9;
    // State before the most recent crossing, for backing out of a vertex.
    let mut checkpoint: Option<(UnitTangent, f64, Option<usize>)> = None;
    loop {
        let remaining = total - elapsed;
        match next_exit(dom, state, skip, f64::INFINITY) {
            Exit::Side(j, c) => {
                if c.t >= remaining {
                    break;
                }
                let side = &dom.sides[j];
                checkpoint = Some((state, elapsed, skip));
                let at = geodesic_flow(state, c.t);
                state = side.pairing.apply_tangent(at)?;
                elapsed += c.t;
                crossings.push(CodeCrossing {
                    time: elapsed,
                    word: Word::letter(side.letter),
                    side: j,
                });
                skip = Some(side.partner);
                retries = 0;
                eps = 1e-9;
                if crossings.len() > max_crossings {
                    return Err(FuchsianError::NonConvergence(max_crossings));
                }
            }
            Exit::Vertex => {
                if retries >= 3 {
                    return Err(FuchsianError::DegenerateDirection { retries });
                }
                // Already sitting on a vertex: turning in place cannot help,
                // so redo the previous leg with the perturbed direction.
                if dom.vertices.iter().any(|&v| hyp_dist(v, state.base) < 1e-6) {
                    if let Some((prev, t0, prev_skip)) = checkpoint.take() {
                        state = prev;
                        elapsed = t0;
                        skip = prev_skip;
                        crossings.pop();
                    }
                }
                state = UnitTangent::new(state.base, state.angle + eps);
                perturbations.push((elapsed, eps));
                retries += 1;
                eps *= 100.0;
            }
            Exit::None => return Err(FuchsianError::Escaped),
        }
    }
    Ok(CodingStream {
        crossings,
        total_time: total,
        final_state: geodesic_flow(state, total - elapsed),
        perturbations,
    })
}

/// Moves `z` into the closed polygon, returning `(z′, w)` with `w(z′) = z`.
///
/// The word comes from the tiles crossed by the geodesic segment from the
/// interior point to `z`. The point itself is recomputed by applying the
/// inverse word to `z`, since the tracked tangent vector loses accuracy
/// exponentially along the way; a few greedy pairing steps then absorb any
/// rounding across a side.
pub fn pull_back(dom: &FundamentalDomain, z: HPoint) -> Result<(HPoint, Word)> {
    if dom.contains(z) {
        return Ok((z, Word::empty()));
    }
    let dist = hyp_dist(dom.interior_point, z);
    let bound = (10.0 * (1.0 + dist / dom.inradius)).ceil() as usize;
    let mut word = None;
    for attempt in 0..4 {
        let start = if attempt == 0 {
            dom.interior_point
        } else {
            let ut = UnitTangent::new(dom.interior_point, attempt as f64);
            geodesic_flow(ut, 1e-3 * attempt as f64 * dom.inradius).base
        };
        match trace(dom, direction_towards(start, z), hyp_dist(start, z), None) {
            Ok(stream) => {
                // z = h₁ h₂ ⋯ h_m (z′) where h_j is the inverse of the j-th pairing.
                word = Some(Word::new(stream.letters().map(|l| -l).collect()));
                break;
            }
            Err(FuchsianError::DegenerateDirection { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let mut word = word.ok_or(FuchsianError::NonConvergence(bound))?;
    if word.len() > bound {
        return Err(FuchsianError::NonConvergence(bound));
    }
    let pairing_of = |l: i32| -> Mobius {
        let side = dom.sides.iter().find(|s| s.letter == l).expect("every letter labels a side");
        side.pairing
    };
    let h = word.letters().iter().fold(Mobius::IDENTITY, |m, &l| m * pairing_of(l));
    let mut zp = h.inverse().apply(z)?;
    let mut steps = 0;
    while let Some(k) = dom.violated_side(zp, SIDE_TOL) {
        steps += 1;
        if word.len() + steps > bound {
            return Err(FuchsianError::NonConvergence(bound));
        }
        zp = dom.sides[k].pairing.apply(zp)?;
        word.push(-dom.sides[k].letter);
    }
    Ok((zp, word))
}

/// Hash of a point at a given hyperbolic resolution.
fn cell_key(z: HPoint, res: f64) -> (i64, i64) {
    ((z.x / (z.y * res)).floor() as i64, (z.y.ln() / res).floor() as i64)
}

/// Grid of points keyed by hyperbolic neighborhoods, for deduplication.
struct PointGrid {
    res: f64,
    cells: HashMap<(i64, i64), Vec<u32>>,
}

impl PointGrid {
    fn new(res: f64) -> Self {
        Self {
            res,
            cells: HashMap::new(),
        }
    }

    fn find(&self, z: HPoint, points: &[HPoint], tol: f64) -> Option<u32> {
        let (kx, ky) = cell_key(z, self.res);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(v) = self.cells.get(&(kx + dx, ky + dy)) {
                    if let Some(&i) = v.iter().find(|&&i| hyp_dist(points[i as usize], z) < tol) {
                        return Some(i);
                    }
                }
            }
        }
        None
    }

    fn insert(&mut self, z: HPoint, idx: u32) {
        self.cells.entry(cell_key(z, self.res)).or_default().push(idx);
    }
}

/// A tile `gP` discovered by breadth-first search.
#[derive(Debug, Clone, Copy)]
struct Tile {
    element: Mobius,
    parent: u32,
    letter: i32,
}

/// All tiles `gP` with `d(z0, g·interior) ≤ radius`, by breadth-first search
/// over side adjacency.
fn enumerate_tiles(
    dom: &FundamentalDomain,
    z0: HPoint,
    radius: f64,
    budget: usize,
) -> Result<Vec<Tile>> {
    let ip = dom.interior_point;
    let mut tiles = vec![Tile {
        element: Mobius::IDENTITY,
        parent: u32::MAX,
        letter: 0,
    }];
    let mut centers = vec![ip];
    let mut grid = PointGrid::new(0.25 * dom.inradius);
    grid.insert(ip, 0);
    let mut queue = VecDeque::from([0u32]);
    while let Some(i) = queue.pop_front() {
        let g = tiles[i as usize].element;
        for side in &dom.sides {
            let h = g * side.pairing;
            let c = h.apply(ip)?;
            if hyp_dist(z0, c) > radius {
                continue;
            }
            if grid.find(c, &centers, 1e-3 * dom.inradius).is_some() {
                continue;
            }
            if tiles.len() >= budget {
                return Err(FuchsianError::Budget {
                    budget,
                    found: tiles.len(),
                });
            }
            let idx = tiles.len() as u32;
            tiles.push(Tile {
                element: h,
                parent: i,
                letter: side.letter,
            });
            centers.push(c);
            grid.insert(c, idx);
            queue.push_back(idx);
        }
    }
    Ok(tiles)
}

fn tile_word(tiles: &[Tile], mut i: u32) -> Word {
    let mut letters = Vec::new();
    while tiles[i as usize].parent != u32::MAX {
        letters.push(tiles[i as usize].letter);
        i = tiles[i as usize].parent;
    }
    letters.reverse();
    Word::new(letters)
}

/// Default tile budget for orbit enumeration.
pub const ORBIT_BUDGET: usize = 40_000_000;

/// The orbit points `γz₀` within distance `t_max` of `z₀`, each once, with a
/// word `γ` for each. `z₀` must lie in the closed polygon.
pub fn orbit_points(
    dom: &FundamentalDomain,
    z0: HPoint,
    t_max: f64,
) -> Result<Vec<(HPoint, Word)>> {
    let (tiles, points) = orbit_core(dom, z0, t_max, ORBIT_BUDGET)?;
    Ok(points
        .into_iter()
        .map(|(z, i)| (z, tile_word(&tiles, i)))
        .collect())
}

/// Like [`orbit_points`] without materializing words, and with an explicit
/// tile budget.
pub fn orbit_point_set(
    dom: &FundamentalDomain,
    z0: HPoint,
    t_max: f64,
    budget: usize,
) -> Result<Vec<HPoint>> {
    Ok(orbit_core(dom, z0, t_max, budget)?
        .1
        .into_iter()
        .map(|(z, _)| z)
        .collect())
}

fn orbit_core(
    dom: &FundamentalDomain,
    z0: HPoint,
    t_max: f64,
    budget: usize,
) -> Result<(Vec<Tile>, Vec<(HPoint, u32)>)> {
    if !dom.contains(z0) {
        return Err(FuchsianError::Spec(format!("orbit base point {z0} is outside the polygon")));
    }
    let margin = dom.circumradius + 1e-9;
    let tiles = enumerate_tiles(dom, z0, t_max + margin, budget)?;
    let mut pts: Vec<HPoint> = Vec::new();
    let mut out = Vec::new();
    let mut grid = PointGrid::new(0.25 * dom.inradius);
    for (i, tile) in tiles.iter().enumerate() {
        let z = tile.element.apply(z0)?;
        if hyp_dist(z0, z) > t_max {
            continue;
        }
        // Cone points have nontrivial stabilizers; keep each point once.
        if grid.find(z, &pts, 1e-7).is_some() {
            continue;
        }
        grid.insert(z, pts.len() as u32);
        pts.push(z);
        out.push((z, i as u32));
    }
    Ok((tiles, out))
}

/// How a surface group splits as an amalgam along a separating curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BendSplitting {
    /// 1-based generator indices on the side that gets conjugated.
    pub second_side: Vec<usize>,
    /// The splitting curve as a word.
    pub curve: Word,
}

impl BendSplitting {
    /// Genus `g` surface group with relation `∏[a_k, b_k]`: cut along
    /// `[a₁, b₁]`, conjugating `a₂, b₂, …, a_g, b_g`.
    pub fn surface_default(genus: u32) -> Self {
        Self {
            second_side: (3..=2 * genus as usize).collect(),
            curve: Word::commutator(1, 2),
        }
    }
}

/// Conjugates the second side of the amalgam by `exp(s·X)`, where `X` spans
/// the centralizer of `ρ(curve)` with eigenvalues `±1/2` along the
/// eigenvectors of `ρ(curve)`. Real `s` is a twist by hyperbolic distance
/// `s` along the axis, imaginary `s` bends by angle `Im s`.
pub fn bend_representation(
    rep: &Representation,
    splitting: &BendSplitting,
    s: Cx,
) -> Result<Representation> {
    bend_impl(rep, splitting, s, 0.0)
}

/// Globally conjugate to [`bend_representation`]: the first side is
/// conjugated by `exp(−s·X/2)` and the second by `exp(s·X/2)`. Entries grow
/// like `e^{|s|/2}` instead of `e^{|s|}`, which keeps long sweeps accurate.
pub fn bend_representation_balanced(
    rep: &Representation,
    splitting: &BendSplitting,
    s: Cx,
) -> Result<Representation> {
    bend_impl(rep, splitting, s, 0.5)
}

fn bend_impl(
    rep: &Representation,
    splitting: &BendSplitting,
    s: Cx,
    first_share: f64,
) -> Result<Representation> {
    if rep.n() != 2 {
        return Err(FuchsianError::DegenerateBending("bending needs a rank-2 representation".into()));
    }
    if let Some(&bad) = splitting
        .second_side
        .iter()
        .find(|&&g| g == 0 || g > rep.generator_count())
    {
        return Err(FuchsianError::DegenerateBending(format!("generator {bad} does not exist")));
    }
    if s == Cx::new(0.0, 0.0) {
        return Ok(rep.clone());
    }
    let c = eval_word(rep, &splitting.curve)?;
    let tr = c.trace();
    let det = c.determinant();
    let disc = (tr * tr - 4.0 * det).sqrt();
    if disc.norm() < 1e-8 * (1.0 + tr.norm()) {
        return Err(FuchsianError::DegenerateBending(
            "curve image is parabolic or central".into(),
        ));
    }
    let (l1, l2) = ((tr + disc) / 2.0, (tr - disc) / 2.0);
    let eigvec = |l: Cx| {
        let (a, b, cc, d) = (c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]);
        let v1 = (b, l - a);
        let v2 = (l - d, cc);
        if v1.0.norm() + v1.1.norm() >= v2.0.norm() + v2.1.norm() {
            v1
        } else {
            v2
        }
    };
    let (e1, e2) = (eigvec(l1), eigvec(l2));
    let e = DMatrix::from_row_slice(2, 2, &[e1.0, e2.0, e1.1, e2.1]);
    let e_inv = e
        .clone()
        .try_inverse()
        .ok_or_else(|| FuchsianError::DegenerateBending("eigenvectors are dependent".into()))?;
    let cond = e.norm() * e_inv.norm();
    if !(cond < 1e8) {
        return Err(FuchsianError::DegenerateBending(format!(
            "eigenbasis condition number {cond:e}"
        )));
    }
    let exp_x = |t: Cx| {
        let h = t / 2.0;
        let zero = Cx::new(0.0, 0.0);
        let d = DMatrix::from_row_slice(2, 2, &[h.exp(), zero, zero, (-h).exp()]);
        let d_inv = DMatrix::from_row_slice(2, 2, &[(-h).exp(), zero, zero, h.exp()]);
        (&e * d * &e_inv, &e * d_inv * &e_inv)
    };
    let (y2, y2_inv) = exp_x(s * (1.0 - first_share));
    let (y1, y1_inv) = exp_x(-s * first_share);
    let gens: Vec<MatrixN> = rep
        .generators()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            if splitting.second_side.contains(&(i + 1)) {
                &y2 * g * &y2_inv
            } else if first_share != 0.0 {
                &y1 * g * &y1_inv
            } else {
                g.clone()
            }
        })
        .collect();
    let field = if gens.iter().flatten().any(|z| z.im.abs() > 1e-15) {
        Field::Complex
    } else {
        rep.field()
    };
    Ok(rep
        .with_generators(gens, field)?
        .with_label(format!("bend({}{:+}i) {}", s.re, s.im, rep.label())))
}

/// Residual of the relations evaluated as Möbius maps (sign-insensitive).
pub fn mobius_relation_residual(group: &FuchsianGroup) -> f64 {
    group
        .relations
        .iter()
        .map(|w| {
            let m = eval_word_mobius(&group.generators, w);
            let plus = (m.a - 1.0).abs() + m.b.abs() + m.c.abs() + (m.d - 1.0).abs();
            let minus = (m.a + 1.0).abs() + m.b.abs() + m.c.abs() + (m.d + 1.0).abs();
            plus.min(minus)
        })
        .fold(0.0, f64::max)
}

/// Re-export for callers that want the sign-aware check on the
/// uniformizing representation.
pub fn check_uniformizing(group: &FuchsianGroup) -> linrep::RelationReport {
    linrep::check_relations(&group.uniformizing_rep())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t334() -> FuchsianGroup {
        build_group("triangle:3,3,4".parse().unwrap()).unwrap()
    }

    fn genus2() -> FuchsianGroup {
        build_group("surface:2".parse().unwrap()).unwrap()
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "triangle:2,3,7".parse::<GroupSpec>().unwrap(),
            GroupSpec::Triangle { p: 2, q: 3, r: 7 }
        );
        assert_eq!("surface:3".parse::<GroupSpec>().unwrap(), GroupSpec::Surface { genus: 3 });
        for bad in ["triangle:2,3,6", "triangle:3,3,3", "surface:1", "torus:2", "triangle:3,4", "triangle:1,5,5"] {
            assert!(bad.parse::<GroupSpec>().is_err(), "{bad}");
        }
        let spec: GroupSpec = "triangle:3,3,4".parse().unwrap();
        assert_eq!(spec.to_string(), "triangle:3,3,4");
    }

    #[test]
    fn triangle_334_relations_and_area() {
        let g = t334();
        assert!(mobius_relation_residual(&g) < 1e-9);
        assert!(check_uniformizing(&g).passes(1e-9));
        assert!((g.domain.area() - PI / 6.0).abs() < 1e-9);
        assert!((g.covolume() - PI / 6.0).abs() < 1e-15);
        assert!(g.domain.contains(g.domain.interior_point));
    }

    #[test]
    fn other_triangles_close_up() {
        for spec in ["triangle:2,3,7", "triangle:2,4,5", "triangle:4,4,4", "triangle:3,5,5"] {
            let g = build_group(spec.parse().unwrap()).unwrap();
            assert!(mobius_relation_residual(&g) < 1e-9, "{spec}");
            assert!((g.domain.area() - g.covolume()).abs() < 1e-9, "{spec}");
        }
    }

    #[test]
    fn surface_relation_is_exact_in_sl2() {
        for genus in [2, 3] {
            let g = build_group(GroupSpec::Surface { genus }).unwrap();
            let rep = g.uniformizing_rep();
            assert!(!rep.projective());
            assert!(linrep::check_relations(&rep).passes(1e-9), "genus {genus}");
            assert!((g.domain.area() - 4.0 * PI * (genus as f64 - 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn pairings_map_sides_to_partners() {
        for g in [t334(), genus2()] {
            let dom = &g.domain;
            for side in &dom.sides {
                let partner = &dom.sides[side.partner];
                assert_eq!(dom.sides[side.partner].partner, dom.sides.iter().position(|s| s == side).unwrap());
                for k in 0..=20 {
                    let z = side.segment.point_at(side.segment.length() * k as f64 / 20.0);
                    let w = side.pairing.apply(z).unwrap();
                    assert!(partner.carrier.signed_sinh_dist(w).abs() < 1e-9);
                }
                // The neighbor tile lies across the partner side.
                let moved = side.pairing.apply(dom.interior_point).unwrap();
                assert!(partner.carrier.signed_sinh_dist(moved) * partner.interior_sign < 0.0);
            }
        }
    }

    #[test]
    fn cube_rep_is_unitary_and_exact() {
        let g = t334();
        let rep = g.unitary_cube_rep().unwrap();
        assert_eq!(linrep::check_relations(&rep).max_residual, 0.0);
        assert_eq!(linrep::classify(&rep, 200), linrep::Classification::Unitary);
        assert!(genus2().unitary_cube_rep().is_err());
    }

    #[test]
    fn coding_is_consistent_with_the_unfolded_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for g in [t334(), genus2()] {
            let dom = &g.domain;
            for _ in 0..20 {
                let z = dom.sample_point(&mut rng);
                let ut = UnitTangent::new(z, rng.gen_range(0.0..TAU));
                let total = 5.0;
                let stream = code_geodesic(dom, ut, total).unwrap();
                let mut last = 0.0;
                for c in &stream.crossings {
                    assert!(c.time > last && c.time <= total);
                    last = c.time;
                }
                assert!(stream.crossings.len() <= dom.crossing_rate * 5);
                assert!(dom.contains(stream.final_state.base));
                let w = Word::new(stream.letters().map(|l| -l).collect());
                let h = eval_word_mobius(&g.generators, &w);
                let unfolded = h.apply_tangent(stream.final_state).unwrap();
                let direct = geodesic_flow(ut, total);
                assert!(hyp_dist(unfolded.base, direct.base) < 1e-6);
                assert!(hypgeo::angle_diff(unfolded.angle, direct.angle).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn crossing_count_per_unit_time_is_bounded() {
        let g = t334();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let z = g.domain.sample_point(&mut rng);
            let ut = UnitTangent::new(z, rng.gen_range(0.0..TAU));
            let stream = code_geodesic(&g.domain, ut, 1.0).unwrap();
            assert!(stream.crossings.len() <= g.domain.crossing_rate);
        }
    }

    #[test]
    fn pull_back_lands_in_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in [t334(), genus2()] {
            for _ in 0..30 {
                let ut = UnitTangent::new(HPoint::I, rng.gen_range(0.0..TAU));
                let z = geodesic_flow(ut, rng.gen_range(0.0..8.0)).base;
                let (zp, w) = pull_back(&g.domain, z).unwrap();
                assert!(g.domain.contains(zp));
                let back = eval_word_mobius(&g.generators, &w).apply(zp).unwrap();
                assert!(hyp_dist(back, z) < 1e-7, "{back} vs {z}");
            }
            let (same, w) = pull_back(&g.domain, g.domain.interior_point).unwrap();
            assert_eq!(same, g.domain.interior_point);
            assert!(w.is_empty());
        }
    }

    /// Orbit points found by multiplying generators word by word.
    fn brute_orbit(g: &FuchsianGroup, z0: HPoint, t: f64, max_len: usize) -> Vec<HPoint> {
        let mut found: Vec<HPoint> = vec![z0];
        let mut frontier = vec![Mobius::IDENTITY];
        let mut seen = vec![Mobius::IDENTITY];
        let probe = HPoint { x: 0.123, y: 0.877 };
        let letters: Vec<i32> = (1..=g.generators.len() as i32).flat_map(|l| [l, -l]).collect();
        for _ in 0..max_len {
            let mut next = Vec::new();
            for m in &frontier {
                for &l in &letters {
                    let h = *m * eval_word_mobius(&g.generators, &Word::letter(l));
                    let hp = h.apply(probe).unwrap();
                    // Elements far from the identity cannot come back within reach.
                    if hyp_dist(probe, hp) > t + 2.0 * g.domain.circumradius + 2.0 {
                        continue;
                    }
                    if seen.iter().any(|s| hyp_dist(s.apply(probe).unwrap(), hp) < 1e-6) {
                        continue;
                    }
                    seen.push(h);
                    next.push(h);
                    let z = h.apply(z0).unwrap();
                    if hyp_dist(z0, z) <= t && !found.iter().any(|f| hyp_dist(*f, z) < 1e-7) {
                        found.push(z);
                    }
                }
            }
            frontier = next;
        }
        found
    }

    #[test]
    fn orbit_points_match_brute_force() {
        let g = t334();
        let z0 = HPoint { x: 0.05, y: 1.03 };
        assert!(g.domain.contains(z0));
        let t = 2.5;
        let pts = orbit_points(&g.domain, z0, t).unwrap();
        let brute = brute_orbit(&g, z0, t, 30);
        assert_eq!(pts.len(), brute.len());
        for (z, w) in &pts {
            assert!(hyp_dist(z0, *z) <= t);
            let img = eval_word_mobius(&g.generators, w).apply(z0).unwrap();
            assert!(hyp_dist(img, *z) < 1e-8);
        }
    }

    #[test]
    fn orbit_count_grows_like_volume() {
        let g = t334();
        let z0 = HPoint { x: 0.05, y: 1.03 };
        let t = 8.0;
        let n = orbit_point_set(&g.domain, z0, t, ORBIT_BUDGET).unwrap().len() as f64;
        let expected = hypgeo::ball_volume(t).unwrap() / g.covolume();
        assert!((n / expected - 1.0).abs() < 0.1, "{n} vs {expected}");
    }

    #[test]
    fn orbit_budget_is_enforced() {
        let g = t334();
        let err = orbit_point_set(&g.domain, g.domain.interior_point, 8.0, 100).unwrap_err();
        assert!(matches!(err, FuchsianError::Budget { budget: 100, .. }));
    }

    #[test]
    fn bending_preserves_relations_and_the_curve() {
        let g = genus2();
        let rep = g.uniformizing_rep();
        let split = BendSplitting::surface_default(2);
        assert_eq!(bend_representation(&rep, &split, Cx::new(0.0, 0.0)).unwrap(), rep);
        for s in [Cx::new(0.4, 0.0), Cx::new(0.0, 0.7), Cx::new(-0.3, 0.25)] {
            let bent = bend_representation(&rep, &split, s).unwrap();
            assert!(linrep::check_relations(&bent).passes(1e-9), "{s}");
            let c0 = eval_word(&rep, &split.curve).unwrap();
            let c1 = eval_word(&bent, &split.curve).unwrap();
            assert!((c0 - c1).norm() < 1e-9);
            assert_eq!(bent.field() == Field::Complex, s.im != 0.0);
            assert!(bent.generators()[2] != rep.generators()[2]);
            assert_eq!(bent.generators()[0], rep.generators()[0]);
        }
    }

    #[test]
    fn balanced_bending_is_globally_conjugate() {
        let g = genus2();
        let rep = g.uniformizing_rep();
        let split = BendSplitting::surface_default(2);
        let s = Cx::new(6.0, 0.5);
        let plain = bend_representation(&rep, &split, s).unwrap();
        let balanced = bend_representation_balanced(&rep, &split, s).unwrap();
        assert!(linrep::check_relations(&balanced).passes(1e-8));
        for w in [Word::new(vec![1, 3]), Word::new(vec![2, -4, 3]), Word::commutator(1, 4)] {
            let a = eval_word(&plain, &w).unwrap().trace();
            let b = eval_word(&balanced, &w).unwrap().trace();
            assert!((a - b).norm() < 1e-6 * (1.0 + a.norm()), "{w}");
        }
        let big = |r: &Representation| r.generators().iter().map(|m| m.norm()).fold(0.0, f64::max);
        assert!(big(&balanced) < big(&plain));
    }

    #[test]
    fn bending_rejects_degenerate_input() {
        let g = genus2();
        let triv = g.trivial_rep(2);
        let split = BendSplitting::surface_default(2);
        assert!(matches!(
            bend_representation(&triv, &split, Cx::new(0.1, 0.0)),
            Err(FuchsianError::DegenerateBending(_))
        ));
        let bad = BendSplitting { second_side: vec![9], curve: Word::commutator(1, 2) };
        assert!(bend_representation(&g.uniformizing_rep(), &bad, Cx::new(0.1, 0.0)).is_err());
    }

    #[test]
    fn orbit_at_radius_zero_and_monotone() {
        let g = t334();
        let z0 = HPoint { x: 0.05, y: 1.03 };
        let pts = orbit_points(&g.domain, z0, 0.0).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].0, z0);
        assert!(pts[0].1.is_empty());
        let mut last = 0;
        for t in [0.5, 1.0, 2.0, 3.0, 4.0] {
            let n = orbit_point_set(&g.domain, z0, t, ORBIT_BUDGET).unwrap().len();
            assert!(n >= last);
            last = n;
        }
    }

    #[test]
    fn pull_back_of_single_pairing() {
        let g = t334();
        let dom = &g.domain;
        for side in &dom.sides {
            let z = side.pairing.apply(dom.interior_point).unwrap();
            let (zp, w) = pull_back(dom, z).unwrap();
            assert!(hyp_dist(zp, dom.interior_point) < 1e-9);
            let m = eval_word_mobius(&g.generators, &w);
            assert!(m.projectively_close(side.pairing, 1e-9));
        }
    }

    #[test]
    fn pull_back_round_trip_on_random_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst = 0.0f64;
        for g in [t334(), genus2()] {
            let ngen = g.generators.len() as i32;
            for _ in 0..1000 {
                let len = rng.gen_range(0..=10);
                let w = Word::new(
                    (0..len)
                        .map(|_| rng.gen_range(1..=ngen) * if rng.gen() { 1 } else { -1 })
                        .collect(),
                );
                let z0 = g.domain.sample_point(&mut rng);
                let z = eval_word_mobius(&g.generators, &w).apply(z0).unwrap();
                let (zp, back) = pull_back(&g.domain, z).unwrap();
                // A point at distance d from i is only pinned down to about
                // ε·e^d by its f64 coordinates; long genus-2 words reach d ≈ 25.
                let tol = 1e-7 + 1e-14 * hyp_dist(HPoint::I, z).exp();
                if g.spec == (GroupSpec::Triangle { p: 3, q: 3, r: 4 }) {
                    worst = worst.max(hyp_dist(zp, z0));
                }
                assert!(hyp_dist(zp, z0) < tol, "{zp} vs {z0} for {w}");
                let again = eval_word_mobius(&g.generators, &back).apply(zp).unwrap();
                assert!(hyp_dist(again, z) < tol);
            }
        }
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn short_ray_has_empty_code() {
        let g = t334();
        let ut = UnitTangent::new(g.domain.interior_point, 0.3);
        let stream = code_geodesic(&g.domain, ut, 0.5 * g.domain.inradius).unwrap();
        assert!(stream.crossings.is_empty());
    }

    #[test]
    fn first_crossing_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for g in [t334(), genus2()] {
            let dom = &g.domain;
            for _ in 0..20 {
                let ut = UnitTangent::new(dom.sample_point(&mut rng), rng.gen_range(0.0..TAU));
                let stream = code_geodesic(dom, ut, 2.0 * dom.circumradius + 1.0).unwrap();
                let first = &stream.crossings[0];
                let mut t = 0.0;
                let side = loop {
                    t += 1e-4;
                    let z = geodesic_flow(ut, t).base;
                    if let Some(j) = dom.violated_side(z, 0.0) {
                        break j;
                    }
                };
                assert_eq!(side, first.side);
                assert!((t - first.time).abs() <= 1e-4 + 1e-12);
            }
        }
    }

    #[test]
    fn coding_concatenates() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = genus2();
        let dom = &g.domain;
        for _ in 0..10 {
            let ut = UnitTangent::new(dom.sample_point(&mut rng), rng.gen_range(0.0..TAU));
            let (t1, t2) = (2.3, 3.1);
            let whole = code_geodesic(dom, ut, t1 + t2).unwrap();
            let head = code_geodesic(dom, ut, t1).unwrap();
            let tail = code_geodesic(dom, head.final_state, t2).unwrap();
            let joined: Vec<(f64, i32)> = head
                .crossings
                .iter()
                .map(|c| (c.time, c.word.letters()[0]))
                .chain(tail.crossings.iter().map(|c| (c.time + t1, c.word.letters()[0])))
                .collect();
            assert_eq!(whole.crossings.len(), joined.len());
            for (c, (t, l)) in whole.crossings.iter().zip(joined) {
                assert_eq!(c.word.letters()[0], l);
                assert!((c.time - t).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn coding_is_invariant_under_the_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = t334();
        let dom = &g.domain;
        for _ in 0..10 {
            let ut = UnitTangent::new(dom.sample_point(&mut rng), rng.gen_range(0.0..TAU));
            let h = eval_word_mobius(&g.generators, &Word::new(vec![1, -2, 1, 3, 2]));
            let moved = h.apply_tangent(ut).unwrap();
            let (_, w) = pull_back(dom, moved.base).unwrap();
            let back = eval_word_mobius(&g.generators, &w).inverse().apply_tangent(moved).unwrap();
            let a = code_geodesic(dom, ut, 6.0).unwrap();
            let b = code_geodesic(dom, back, 6.0).unwrap();
            assert_eq!(a.letters().collect::<Vec<_>>(), b.letters().collect::<Vec<_>>());
        }
    }

    #[test]
    fn aiming_at_a_vertex_is_perturbed() {
        let g = t334();
        let dom = &g.domain;
        let ut = direction_towards(dom.interior_point, dom.vertices[1]);
        let stream = code_geodesic(dom, ut, 3.0).unwrap();
        assert!(!stream.perturbations.is_empty());
        assert_eq!(stream.perturbations[0].1, 1e-9);
    }

    #[test]
    fn imaginary_bending_changes_crossing_traces() {
        let g = genus2();
        let rep = g.uniformizing_rep();
        let split = BendSplitting::surface_default(2);
        let bent = bend_representation(&rep, &split, Cx::new(0.0, 0.5)).unwrap();
        let w = Word::new(vec![1, 3]);
        let t0 = eval_word(&rep, &w).unwrap().trace();
        let t1 = eval_word(&bent, &w).unwrap().trace();
        assert!((t0 - t1).norm() > 1e-6);
        for s in [Cx::new(2.0, 0.0), Cx::new(0.0, 2.0), Cx::new(1.2, -1.5)] {
            let b = bend_representation(&rep, &split, s).unwrap();
            assert!(linrep::check_relations(&b).passes(1e-8));
        }
    }
}
