//! Height functions, exact height-field correlations and smeared pairings.
//!
//! Faces of the axis-aligned lattice are indexed by their lower-left corner
//! (m, n), so the face centre is (m + 1/2, n + 1/2). The base face (0, 0)
//! carries height 0 and is an a-face; a-faces are the faces with m, n even.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;

use crate::asymptotics::ScalingParams;
use crate::error::{Error, Result};
use crate::kernel_exact::{corr_kernel, edge_covariance, ia_prefetch, kinv_indices, WeightParams};
use crate::lattice::{EdgeDimer, VertexG};
use crate::par;
use crate::special_functions::k0_k1;

/// A face of the axis-aligned lattice, by lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Face {
    pub m: i64,
    pub n: i64,
}

impl Face {
    pub const BASE: Face = Face { m: 0, n: 0 };

    pub fn new(m: i64, n: i64) -> Self {
        Self { m, n }
    }

    pub fn centre(&self) -> (f64, f64) {
        (self.m as f64 + 0.5, self.n as f64 + 0.5)
    }

    pub fn is_a_face(&self) -> bool {
        self.m.rem_euclid(2) == 0 && self.n.rem_euclid(2) == 0
    }

    pub fn step(&self, d: Direction) -> Face {
        let (dm, dn) = d.delta();
        Face::new(self.m + dm, self.n + dn)
    }
}

/// A face bounded by four weight-a edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AFace(Face);

impl AFace {
    pub const BASE: AFace = AFace(Face::BASE);

    pub fn new(m: i64, n: i64) -> Result<Self> {
        let f = Face::new(m, n);
        if !f.is_a_face() {
            return Err(Error::Parity(format!("face ({m}, {n}) is not an a-face; both corners must be even")));
        }
        Ok(Self(f))
    }

    pub fn face(&self) -> Face {
        self.0
    }

    /// Centre of the face in the rotated picture; both coordinates are odd
    /// and sum to 2 mod 4.
    pub fn rotated_centre(&self) -> (i64, i64) {
        let (m, n) = (self.0.m, self.0.n);
        (m + n + 1, n - m + 1)
    }

    /// The a-face two steps away along `axis`.
    pub fn shifted(&self, axis: Axis) -> AFace {
        match axis {
            Axis::Horizontal => AFace(Face::new(self.0.m + 2, self.0.n)),
            Axis::Vertical => AFace(Face::new(self.0.m, self.0.n + 2)),
        }
    }
}

impl fmt::Display for AFace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a-face({}, {})", self.0.m, self.0.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Right,
    Left,
    Up,
    Down,
}

impl Direction {
    fn delta(self) -> (i64, i64) {
        match self {
            Direction::Right => (1, 0),
            Direction::Left => (-1, 0),
            Direction::Up => (0, 1),
            Direction::Down => (0, -1),
        }
    }

    pub fn reverse(self) -> Direction {
        match self {
            Direction::Right => Direction::Left,
            Direction::Left => Direction::Right,
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

/// Coordinate direction of a derivative: ∂0 is horizontal, ∂1 vertical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Horizontal,
    Vertical,
}

impl Axis {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(Axis::Horizontal),
            1 => Ok(Axis::Vertical),
            _ => Err(Error::domain(format!("derivative index must be 0 or 1, got {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Axis::Horizontal => 0,
            Axis::Vertical => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    First,
    Second,
}

/// One transversal edge crossing. `sign` is +1 when the white vertex is on
/// the right of the direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crossing {
    pub edge: EdgeDimer,
    pub sign: i8,
    pub role: Role,
}

/// The edge crossed when leaving `face` in direction `d`.
pub fn crossing(face: Face, d: Direction) -> (EdgeDimer, i8) {
    let (m, n) = (face.m, face.n);
    let (v1, v2, right) = match d {
        Direction::Right => ((m + 1, n), (m + 1, n + 1), (m + 1, n)),
        Direction::Left => ((m, n), (m, n + 1), (m, n + 1)),
        Direction::Up => ((m, n + 1), (m + 1, n + 1), (m + 1, n + 1)),
        Direction::Down => ((m, n), (m + 1, n), (m, n)),
    };
    let black_first = (v1.0 + v1.1).rem_euclid(2) == 0;
    let (b, w) = if black_first { (v1, v2) } else { (v2, v1) };
    let edge = EdgeDimer::new(VertexG::from_tilde(b), VertexG::from_tilde(w)).expect("lattice neighbours");
    let sign = if right == w { 1 } else { -1 };
    (edge, sign)
}

/// Height change across an edge: ±3/4 with a dimer, ∓1/4 without.
pub fn height_increment(sign: i8, occupied: bool) -> f64 {
    let ind = if occupied { 1.0 } else { 0.0 };
    sign as f64 * (ind - 0.25)
}

/// A lattice path of unit steps between faces.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightPath {
    start: Face,
    end: Face,
    crossings: Vec<Crossing>,
}

impl HeightPath {
    pub fn from_steps(start: Face, steps: &[Direction]) -> Self {
        let mut face = start;
        let mut crossings = Vec::with_capacity(steps.len());
        for (k, &d) in steps.iter().enumerate() {
            let (edge, sign) = crossing(face, d);
            let role = if k % 2 == 0 { Role::First } else { Role::Second };
            crossings.push(Crossing { edge, sign, role });
            face = face.step(d);
        }
        Self {
            start,
            end: face,
            crossings,
        }
    }

    /// L-shaped path: horizontal leg first.
    pub fn horizontal_first(from: Face, to: Face) -> Self {
        Self::from_steps(from, &l_steps(from, to, true))
    }

    /// L-shaped path: vertical leg first.
    pub fn vertical_first(from: Face, to: Face) -> Self {
        Self::from_steps(from, &l_steps(from, to, false))
    }

    pub fn start(&self) -> Face {
        self.start
    }

    pub fn end(&self) -> Face {
        self.end
    }

    pub fn crossings(&self) -> &[Crossing] {
        &self.crossings
    }

    /// True when the path runs between a-faces in straight segments of
    /// length two.
    pub fn is_a_face_path(&self) -> bool {
        if !self.start.is_a_face() || self.crossings.len() % 2 == 1 {
            return false;
        }
        let mut face = self.start;
        let mut dirs = Vec::new();
        for c in &self.crossings {
            let next = [Direction::Right, Direction::Left, Direction::Up, Direction::Down]
                .into_iter()
                .find(|&d| crossing(face, d).0 == c.edge);
            match next {
                Some(d) => {
                    dirs.push(d);
                    face = face.step(d);
                }
                None => return false,
            }
        }
        dirs.chunks(2).all(|p| p[0] == p[1])
    }
}

fn l_steps(from: Face, to: Face, horizontal_first: bool) -> Vec<Direction> {
    let dm = to.m - from.m;
    let dn = to.n - from.n;
    let h = std::iter::repeat_n(if dm > 0 { Direction::Right } else { Direction::Left }, dm.unsigned_abs() as usize);
    let v = std::iter::repeat_n(if dn > 0 { Direction::Up } else { Direction::Down }, dn.unsigned_abs() as usize);
    if horizontal_first {
        h.chain(v).collect()
    } else {
        v.chain(h).collect()
    }
}

/// A linear functional constant + Σ coef · 1_e of the dimer configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeightExpr {
    pub constant: f64,
    pub terms: BTreeMap<EdgeDimer, f64>,
}

impl HeightExpr {
    /// The height change along `path`.
    pub fn from_path(path: &HeightPath) -> Self {
        let mut e = Self::default();
        for c in &path.crossings {
            let s = c.sign as f64;
            *e.terms.entry(c.edge).or_insert(0.0) += s;
            e.constant -= 0.25 * s;
        }
        e.prune();
        e
    }

    pub fn add_scaled(&mut self, other: &HeightExpr, c: f64) {
        self.constant += c * other.constant;
        for (e, v) in &other.terms {
            *self.terms.entry(*e).or_insert(0.0) += c * v;
        }
    }

    fn prune(&mut self) {
        self.terms.retain(|_, v| *v != 0.0);
    }

    /// Value on a configuration given as a set of occupied edges.
    pub fn evaluate(&self, occupied: &BTreeSet<EdgeDimer>) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .filter(|(e, _)| occupied.contains(e))
                .map(|(_, v)| v)
                .sum::<f64>()
    }

    pub fn edges(&self) -> Vec<EdgeDimer> {
        self.terms.keys().copied().collect()
    }
}

/// Height of `face` relative to the base face, along the canonical path.
pub fn height_expr(face: Face) -> HeightExpr {
    HeightExpr::from_path(&HeightPath::horizontal_first(Face::BASE, face))
}

/// 2ε·∂_i h^a(x) = h^a(x + 2ê_i) − h^a(x).
pub fn derivative_expr(x: AFace, axis: Axis) -> HeightExpr {
    HeightExpr::from_path(&HeightPath::horizontal_first(x.face(), x.shifted(axis).face()))
}

fn prefetch_pairs(left: &[EdgeDimer], right: &[EdgeDimer], p: &WeightParams) -> Result<()> {
    let mut idx = BTreeSet::new();
    for e in left.iter().chain(right) {
        idx.extend(kinv_indices(&e.white, &e.black)?);
    }
    for e in left {
        for f in right {
            idx.extend(kinv_indices(&f.white, &e.black)?);
            idx.extend(kinv_indices(&e.white, &f.black)?);
        }
    }
    let idx: Vec<(i64, i64)> = idx.into_iter().collect();
    ia_prefetch(&idx, p)
}

/// E[X] for a linear functional X.
pub fn expr_mean(x: &HeightExpr, p: &WeightParams) -> Result<f64> {
    let edges = x.edges();
    prefetch_pairs(&edges, &[], p)?;
    let mut s = x.constant;
    for (e, c) in &x.terms {
        s += c * corr_kernel(e, e, p)?.re;
    }
    Ok(s)
}

/// Cov(X, Y) = Σ c_e c_f Cov(1_e, 1_f).
pub fn expr_covariance(x: &HeightExpr, y: &HeightExpr, p: &WeightParams) -> Result<f64> {
    let left: Vec<(EdgeDimer, f64)> = x.terms.iter().map(|(e, c)| (*e, *c)).collect();
    let right: Vec<(EdgeDimer, f64)> = y.terms.iter().map(|(e, c)| (*e, *c)).collect();
    let le: Vec<EdgeDimer> = left.iter().map(|t| t.0).collect();
    let re: Vec<EdgeDimer> = right.iter().map(|t| t.0).collect();
    prefetch_pairs(&le, &re, p)?;
    let rows = par::map(&left, |(e, c)| -> Result<f64> {
        let mut s = 0.0;
        for (f, d) in &right {
            s += d * edge_covariance(e, f, p)?;
        }
        Ok(c * s)
    });
    let mut total = 0.0;
    for r in rows {
        total += r?;
    }
    Ok(total)
}

/// E[X Y] = Cov(X, Y) + E[X] E[Y].
pub fn expr_second_moment(x: &HeightExpr, y: &HeightExpr, p: &WeightParams) -> Result<f64> {
    Ok(expr_covariance(x, y, p)? + expr_mean(x, p)? * expr_mean(y, p)?)
}

/// E_a[h^a(x1) h^a(x2)] along canonical paths from the base face.
pub fn a_height_cov_exact(x1: AFace, x2: AFace, p: &WeightParams) -> Result<f64> {
    if x1 == x2 {
        return Err(Error::domain(format!("{x1} repeated; need distinct a-faces")));
    }
    expr_second_moment(&height_expr(x1.face()), &height_expr(x2.face()), p)
}

/// E_a[∂_i h^a(x1) ∂_j h^a(x2)] with lattice spacing ε and a = 1 − λε.
pub fn deriv_corr_exact(i: Axis, j: Axis, x1: AFace, x2: AFace, s: &ScalingParams) -> Result<f64> {
    if x1 == x2 {
        return Err(Error::domain("zero separation"));
    }
    let p = s.weights();
    let d1 = derivative_expr(x1, i);
    let d2 = derivative_expr(x2, j);
    let v = expr_second_moment(&d1, &d2, &p)?;
    Ok(v / (4.0 * s.eps * s.eps))
}

/// Pair of a-faces with x1 − x2 = (x, y)/ε, x2 at the base face.
pub fn scaled_a_faces(x: f64, y: f64, eps: f64) -> Result<(AFace, AFace)> {
    let step = |v: f64| -> Result<i64> {
        let q = v / eps;
        let r = q.round();
        if (q - r).abs() > 1e-9 || (r as i64).rem_euclid(2) != 0 {
            return Err(Error::Schedule(format!("{v}/{eps} is not an even integer")));
        }
        Ok(r as i64)
    };
    Ok((AFace::new(step(x)?, step(y)?)?, AFace::BASE))
}

/// Closed-form limits of E[∂_i h^a ∂_j h^a] at separation (x, y):
/// x horizontal, y vertical.
pub fn deriv_corr_limit(i: Axis, j: Axis, x: f64, y: f64, lambda: f64) -> Result<f64> {
    let z2 = x * x + y * y;
    if z2 == 0.0 {
        return Err(Error::domain("zero separation"));
    }
    let (k0, k1) = k0_k1(lambda * z2.sqrt() / std::f64::consts::SQRT_2)?;
    let pref = lambda * lambda / (4.0 * PI * PI);
    Ok(match (i, j) {
        (Axis::Vertical, Axis::Vertical) => pref * (-k0 * k0 + (x * x - y * y) / z2 * k1 * k1),
        (Axis::Horizontal, Axis::Horizontal) => pref * (-k0 * k0 + (y * y - x * x) / z2 * k1 * k1),
        _ => -lambda * lambda * x * y / (2.0 * PI * PI * z2) * k1 * k1,
    })
}

/// Smooth compactly supported bump amplitude · exp(−1/(1 − |x − c|²/R²)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    centre: (f64, f64),
    radius: f64,
    amplitude: f64,
}

impl Bump {
    pub fn new(centre: (f64, f64), radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0) || !amplitude.is_finite() || !centre.0.is_finite() || !centre.1.is_finite() {
            return Err(Error::domain(format!("bump needs radius > 0 and finite data, got R = {radius}")));
        }
        Ok(Self {
            centre,
            radius,
            amplitude,
        })
    }

    pub fn centre(&self) -> (f64, f64) {
        self.centre
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    fn local(&self, x: (f64, f64)) -> Option<(f64, f64, f64)> {
        let u = (x.0 - self.centre.0) / self.radius;
        let v = (x.1 - self.centre.1) / self.radius;
        let r2 = u * u + v * v;
        (r2 < 1.0).then_some((u, v, r2))
    }

    pub fn value(&self, x: (f64, f64)) -> f64 {
        match self.local(x) {
            Some((_, _, r2)) => self.amplitude * (-1.0 / (1.0 - r2)).exp(),
            None => 0.0,
        }
    }

    /// (∂0 b, ∂1 b).
    pub fn gradient(&self, x: (f64, f64)) -> (f64, f64) {
        match self.local(x) {
            Some((u, v, r2)) => {
                let q = 1.0 - r2;
                let g = -self.amplitude * (-1.0 / q).exp() * 2.0 / (q * q * self.radius);
                (g * u, g * v)
            }
            None => (0.0, 0.0),
        }
    }
}

/// A test function: a bump, or c0·∂0 b + c1·∂1 b for a bump b.
///
/// The directional form decomposes as ∂g + ∂̄h with g = (c1 + i c0) b and
/// h the complex conjugate of g, both supported on the bump's disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    Bump(Bump),
    Directional { bump: Bump, c0: f64, c1: f64 },
}

impl TestFunction {
    pub fn bump(centre: (f64, f64), radius: f64, amplitude: f64) -> Result<Self> {
        Ok(Self::Bump(Bump::new(centre, radius, amplitude)?))
    }

    pub fn directional(centre: (f64, f64), radius: f64, c0: f64, c1: f64) -> Result<Self> {
        Ok(Self::Directional {
            bump: Bump::new(centre, radius, 1.0)?,
            c0,
            c1,
        })
    }

    pub fn base_bump(&self) -> Bump {
        match self {
            Self::Bump(b) | Self::Directional { bump: b, .. } => *b,
        }
    }

    pub fn centre(&self) -> (f64, f64) {
        self.base_bump().centre
    }

    pub fn radius(&self) -> f64 {
        self.base_bump().radius
    }

    pub fn value(&self, x: (f64, f64)) -> f64 {
        match self {
            Self::Bump(b) => b.value(x),
            Self::Directional { bump, c0, c1 } => {
                let g = bump.gradient(x);
                c0 * g.0 + c1 * g.1
            }
        }
    }

    /// (∂f, ∂̄f) with ∂ = (−i∂0 + ∂1)/2, for the bump form.
    pub fn wirtinger(&self, x: (f64, f64)) -> Option<(num_complex::Complex64, num_complex::Complex64)> {
        match self {
            Self::Bump(b) => {
                let (d0, d1) = b.gradient(x);
                Some((
                    num_complex::Complex64::new(d1, -d0) * 0.5,
                    num_complex::Complex64::new(d1, d0) * 0.5,
                ))
            }
            Self::Directional { .. } => None,
        }
    }

    /// Multiplies the function by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        match *self {
            Self::Bump(b) => Self::Bump(Bump { amplitude: b.amplitude * c, ..b }),
            Self::Directional { bump, c0, c1 } => Self::Directional {
                bump,
                c0: c0 * c,
                c1: c1 * c,
            },
        }
    }

    pub fn supports_overlap(&self, other: &TestFunction) -> bool {
        let (a, b) = (self.centre(), other.centre());
        (a.0 - b.0).hypot(a.1 - b.1) < self.radius() + other.radius()
    }

    /// Both functions are directional bumps with disjoint discs.
    pub fn is_condition_one_pair(&self, other: &TestFunction) -> bool {
        matches!(self, Self::Directional { .. })
            && matches!(other, Self::Directional { .. })
            && !self.supports_overlap(other)
    }
}

/// Which smeared field to pair against test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmearedField {
    /// (2ε)² Σ over a-faces of h^a(x/ε) f(x).
    AHeight,
    /// ε² Σ over all faces of h(x/ε) f(x).
    FullHeight,
    /// (2ε)² Σ over a-faces of ∂_i h^a(x/ε) f1(x), paired with ∂_j in f2.
    Derivative(Axis, Axis),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmearedValue {
    pub value: f64,
    pub covariance: f64,
    pub mean1: f64,
    pub mean2: f64,
    pub edges1: usize,
    pub edges2: usize,
    pub supports_overlap: bool,
}

fn face_range(lo: f64, hi: f64, scale: f64) -> std::ops::RangeInclusive<i64> {
    ((lo / scale).floor() as i64 - 1)..=((hi / scale).ceil() as i64 + 1)
}

/// Aggregates Σ_x weight(x) · f(x) · X(x) into one linear functional.
fn smear(f: &TestFunction, eps: f64, field: SmearedField, axis: Option<Axis>) -> HeightExpr {
    let (c, r) = (f.centre(), f.radius());
    let mut total = HeightExpr::default();
    match field {
        SmearedField::FullHeight => {
            let w = eps * eps;
            for m in face_range(c.0 - r, c.0 + r, eps) {
                for n in face_range(c.1 - r, c.1 + r, eps) {
                    let face = Face::new(m, n);
                    let (u, v) = face.centre();
                    let fv = f.value((eps * u, eps * v));
                    if fv != 0.0 {
                        total.add_scaled(&height_expr(face), w * fv);
                    }
                }
            }
        }
        SmearedField::AHeight | SmearedField::Derivative(..) => {
            let w = 4.0 * eps * eps;
            let two = 2.0 * eps;
            for i in face_range(c.0 - r, c.0 + r, two) {
                for j in face_range(c.1 - r, c.1 + r, two) {
                    let x = AFace(Face::new(2 * i, 2 * j));
                    let (u, v) = x.face().centre();
                    let fv = f.value((eps * u, eps * v));
                    if fv == 0.0 {
                        continue;
                    }
                    match axis {
                        None => total.add_scaled(&height_expr(x.face()), w * fv),
                        Some(ax) => total.add_scaled(&derivative_expr(x, ax), w * fv / two),
                    }
                }
            }
        }
    }
    total.prune();
    total
}

/// E_a[field(f1) · field(f2)] as an exact finite lattice sum.
pub fn smeared_two_point(
    f1: &TestFunction,
    f2: &TestFunction,
    s: &ScalingParams,
    field: SmearedField,
) -> Result<SmearedValue> {
    let p = s.weights();
    let (ax1, ax2) = match field {
        SmearedField::Derivative(i, j) => (Some(i), Some(j)),
        _ => (None, None),
    };
    let x1 = smear(f1, s.eps, field, ax1);
    let x2 = smear(f2, s.eps, field, ax2);
    let covariance = expr_covariance(&x1, &x2, &p)?;
    let mean1 = expr_mean(&x1, &p)?;
    let mean2 = expr_mean(&x2, &p)?;
    Ok(SmearedValue {
        value: covariance + mean1 * mean2,
        covariance,
        mean1,
        mean2,
        edges1: x1.terms.len(),
        edges2: x2.terms.len(),
        supports_overlap: f1.supports_overlap(f2),
    })
}

/// ∫∫ b1(x) b2(y) k(x, y) dx dy for the deriv_corr_limit kernel, the
/// continuum value that the derivative-field pairing of two bumps tends to.
pub fn deriv_limit_pairing(i: Axis, j: Axis, b1: &Bump, b2: &Bump, lambda: f64, n: usize) -> Result<f64> {
    let pts1 = disc_nodes(b1, n);
    let pts2 = disc_nodes(b2, n);
    let rows = par::map(&pts1, |&(x, wx)| -> Result<f64> {
        let mut s = 0.0;
        for &(y, wy) in &pts2 {
            s += wy * deriv_corr_limit(i, j, x.0 - y.0, x.1 - y.1, lambda)?;
        }
        Ok(wx * s)
    });
    rows.into_iter().sum()
}

/// Midpoint nodes of an n × n grid over the bump's bounding square, with
/// weights cell area × bump value; nodes outside the support are dropped.
pub(crate) fn disc_nodes(b: &Bump, n: usize) -> Vec<((f64, f64), f64)> {
    let h = 2.0 * b.radius / n as f64;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let x = (b.centre.0 - b.radius + (i as f64 + 0.5) * h, b.centre.1 - b.radius + (j as f64 + 0.5) * h);
            let v = b.value(x);
            if v != 0.0 {
                out.push((x, v * h * h));
            }
        }
    }
    out
}
