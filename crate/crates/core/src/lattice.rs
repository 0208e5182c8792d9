//! The free rank-2 lattice `Gamma(2)` acting on the upper half-plane.
//!
//! Generators are `a: z -> z + 2` and `b: z -> z / (2z + 1)`. Group elements
//! are handled as reduced words, so orbit bookkeeping is exact; the
//! half-plane chart is tied to the hyperboloid model of `H^2_R` through an
//! explicit isometry, with `i` as the origin.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use num_complex::Complex64;
use thiserror::Error;

use crate::boundary::{busemann, BoundaryPoint};
use crate::falgebra::Field;
use crate::hypspace::{GeometryError, HVec, Point};
use crate::par::{map_indexed, map_slice, Exec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("cannot parse word `{0}`")]
    Parse(String),
    #[error("unknown group fixture `{0}` (available: gamma2)")]
    UnknownGroup(String),
    #[error("horoball tests need a real hyperbolic space")]
    NotReal,
    #[error("point is not in the upper half-plane")]
    OffChart,
}

/// Named group fixture; only `gamma2` exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupFixture {
    Gamma2,
}

impl FromStr for GroupFixture {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "gamma2" => Ok(GroupFixture::Gamma2),
            other => Err(LatticeError::UnknownGroup(other.to_string())),
        }
    }
}

impl fmt::Display for GroupFixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("gamma2")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    A,
    AInv,
    B,
    BInv,
}

impl Letter {
    /// Canonical order `a, a^-1, b, b^-1`.
    pub const ALL: [Letter; 4] = [Letter::A, Letter::AInv, Letter::B, Letter::BInv];

    pub fn inverse(self) -> Letter {
        match self {
            Letter::A => Letter::AInv,
            Letter::AInv => Letter::A,
            Letter::B => Letter::BInv,
            Letter::BInv => Letter::B,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Letter {
        Letter::ALL[i]
    }

    pub fn matrix(self) -> IsometryH2 {
        match self {
            Letter::A => IsometryH2::new(1.0, 2.0, 0.0, 1.0),
            Letter::AInv => IsometryH2::new(1.0, -2.0, 0.0, 1.0),
            Letter::B => IsometryH2::new(1.0, 0.0, 2.0, 1.0),
            Letter::BInv => IsometryH2::new(1.0, 0.0, -2.0, 1.0),
        }
    }

    /// Image of `i`.
    pub fn image_of_i(self) -> Complex64 {
        match self {
            Letter::A => Complex64::new(2.0, 1.0),
            Letter::AInv => Complex64::new(-2.0, 1.0),
            Letter::B => Complex64::new(0.4, 0.2),
            Letter::BInv => Complex64::new(-0.4, 0.2),
        }
    }
}

/// A freely reduced word in `a, b` and their inverses.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(l: Letter) -> Self {
        Word(vec![l])
    }

    /// Free reduction of an arbitrary letter sequence.
    pub fn reduce(letters: &[Letter]) -> Self {
        let mut out: Vec<Letter> = Vec::with_capacity(letters.len());
        for &l in letters {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|w| w[1] != w[0].inverse())
    }

    pub fn last(&self) -> Option<Letter> {
        self.0.last().copied()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    /// Reduced product `self * other`.
    pub fn mul(&self, other: &Word) -> Word {
        let mut out = self.0.clone();
        for &l in &other.0 {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    pub fn power(l: Letter, n: i64) -> Word {
        let l = if n < 0 { l.inverse() } else { l };
        Word(vec![l; n.unsigned_abs() as usize])
    }

    /// Letterwise swap `a <-> a^-1`, `b <-> b^-1`: conjugation by `z -> -conj(z)`.
    pub fn mirrored(&self) -> Word {
        Word(self.0.iter().map(|l| l.inverse()).collect())
    }

    pub fn evaluate(&self) -> IsometryH2 {
        self.0.iter().fold(IsometryH2::identity(), |acc, l| acc.mul(&l.matrix()))
    }
}

impl Ord for Word {
    /// Shortlex order: length first, then letters in canonical order.
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("e");
        }
        let mut i = 0;
        while i < self.0.len() {
            let l = self.0[i];
            let mut j = i;
            while j < self.0.len() && self.0[j] == l {
                j += 1;
            }
            let name = match l {
                Letter::A | Letter::AInv => 'a',
                Letter::B | Letter::BInv => 'b',
            };
            let n = (j - i) as i64 * if matches!(l, Letter::AInv | Letter::BInv) { -1 } else { 1 };
            if n == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{name}^{n}")?;
            }
            i = j;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = LatticeError;

    /// Accepts `e`, or generators `a`, `b` with optional integer exponents,
    /// e.g. `ab^-1`, `a^3b^-2a`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "e" {
            return Ok(Word::empty());
        }
        let err = || LatticeError::Parse(s.to_string());
        let bytes = s.as_bytes();
        let mut letters = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let gen = match bytes[i] {
                b'a' => Letter::A,
                b'b' => Letter::B,
                _ => return Err(err()),
            };
            i += 1;
            let mut exp: i64 = 1;
            if i < bytes.len() && bytes[i] == b'^' {
                i += 1;
                let start = i;
                if i < bytes.len() && bytes[i] == b'-' {
                    i += 1;
                }
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                exp = s[start..i].parse().map_err(|_| err())?;
            }
            letters.extend(Word::power(gen, exp).0);
        }
        Ok(Word::reduce(&letters))
    }
}

impl serde::Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All reduced words of length `<= n` in shortlex order; `2 * 3^n - 1` of them.
pub fn words_up_to(n: usize) -> Vec<Word> {
    let mut all = vec![Word::empty()];
    let mut frontier = vec![Word::empty()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(frontier.len() * 3 + 4);
        for w in &frontier {
            for l in Letter::ALL {
                if w.last() != Some(l.inverse()) {
                    let mut v = w.0.clone();
                    v.push(l);
                    next.push(Word(v));
                }
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all
}

/// `z -> (a z + b) / (c z + d)` with `ad - bc = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsometryH2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl IsometryH2 {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        IsometryH2 { a, b, c, d }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 1.0)
    }

    pub fn mul(&self, o: &IsometryH2) -> IsometryH2 {
        IsometryH2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn inverse(&self) -> IsometryH2 {
        IsometryH2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (z * self.a + self.b) / (z * self.c + self.d)
    }

    pub fn apply_boundary(&self, t: HalfPlaneBoundary) -> HalfPlaneBoundary {
        match t {
            HalfPlaneBoundary::Infinity if self.c == 0.0 => HalfPlaneBoundary::Infinity,
            HalfPlaneBoundary::Infinity => HalfPlaneBoundary::Real(self.a / self.c),
            HalfPlaneBoundary::Real(x) => {
                let den = self.c * x + self.d;
                if den == 0.0 {
                    HalfPlaneBoundary::Infinity
                } else {
                    HalfPlaneBoundary::Real((self.a * x + self.b) / den)
                }
            }
        }
    }

    pub fn max_abs_diff(&self, o: &IsometryH2) -> f64 {
        [self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d].iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// The same isometry as a form-preserving map of the hyperboloid lift,
    /// solved from the images of three independent points.
    pub fn to_lorentz(&self) -> Matrix3<f64> {
        let pts = [Complex64::new(0.0, 1.0), Complex64::new(0.0, 2.0), Complex64::new(1.0, 1.0)];
        let cols = |zs: [Complex64; 3]| {
            Matrix3::from_columns(&zs.map(|z| {
                let l = hyperboloid_reals(z);
                nalgebra::Vector3::new(l[0], l[1], l[2])
            }))
        };
        let src = cols(pts);
        let dst = cols(pts.map(|z| self.apply(z)));
        dst * src.try_inverse().expect("independent reference points")
    }
}

/// A boundary point of the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HalfPlaneBoundary {
    Infinity,
    Real(f64),
}

fn hyperboloid_reals(z: Complex64) -> [f64; 3] {
    let (x, y) = (z.re, z.im);
    let r = x * x + y * y;
    [(r - 1.0) / (2.0 * y), x / y, (r + 1.0) / (2.0 * y)]
}

/// Chart isometry from the half-plane to the hyperboloid, `i -> (0, 0, 1)`.
/// The lift is normalized exactly, so far points skip the timelike test.
pub fn to_hyperboloid(z: Complex64) -> Point {
    Point::from_normalized(HVec::from_reals(Field::R, &hyperboloid_reals(z)))
}

pub fn from_hyperboloid(p: &Point) -> Result<Complex64, LatticeError> {
    if p.field() != Field::R || p.k() != 2 {
        return Err(LatticeError::NotReal);
    }
    let l = p.lift().reals();
    // The lift may sit on either sheet.
    let s = if l[2] < 0.0 { -1.0 } else { 1.0 };
    let y = 1.0 / (s * (l[2] - l[0]));
    Ok(Complex64::new(s * l[1] * y, y))
}

/// Boundary point normalized against the origin `i`.
pub fn boundary_point(t: HalfPlaneBoundary) -> BoundaryPoint {
    let lift = match t {
        HalfPlaneBoundary::Infinity => [1.0, 0.0, 1.0],
        HalfPlaneBoundary::Real(x) => {
            let n = x * x + 1.0;
            [(x * x - 1.0) / n, 2.0 * x / n, 1.0]
        }
    };
    BoundaryPoint::from_null(HVec::from_reals(Field::R, &lift), &origin()).expect("null by construction")
}

pub fn from_boundary_point(xi: &BoundaryPoint) -> HalfPlaneBoundary {
    let l = xi.lift().reals();
    let den = l[2] - l[0];
    if den.abs() <= 1e-14 * l[2].abs() {
        HalfPlaneBoundary::Infinity
    } else {
        HalfPlaneBoundary::Real(l[1] / den)
    }
}

/// The origin `i` in the hyperboloid model.
pub fn origin() -> Point {
    to_hyperboloid(Complex64::new(0.0, 1.0))
}

/// Disk chart centred at `i`: `(X1 + i X2) / (1 + X0)`.
pub fn to_disk(z: Complex64) -> Complex64 {
    let [x1, x2, x0] = hyperboloid_reals(z);
    Complex64::new(x1, x2) / (1.0 + x0)
}

/// Hyperbolic distance in the half-plane, `sinh(d/2) = |z - w| / (2 sqrt(Im z Im w))`.
pub fn halfplane_distance(z: Complex64, w: Complex64) -> f64 {
    2.0 * ((z - w).norm() / (2.0 * (z.im * w.im).sqrt())).asinh()
}

pub fn halfplane_cosh_distance(z: Complex64, w: Complex64) -> f64 {
    1.0 + (z - w).norm_sqr() / (2.0 * z.im * w.im)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitPoint {
    pub word: Word,
    pub point: Complex64,
}

/// Orbit of `x0` under all reduced words of length `<= n`, shortlex order.
pub fn orbit(x0: Complex64, n: usize, exec: Exec) -> Vec<OrbitPoint> {
    let words = words_up_to(n);
    map_slice(exec, &words, |w| OrbitPoint { word: w.clone(), point: w.evaluate().apply(x0) })
}

/// Orbit points as `(word length, hyperboloid point)` candidates.
pub fn graded_points(orbit: &[OrbitPoint]) -> Vec<(u32, Point)> {
    orbit.iter().map(|o| (o.word.len() as u32, to_hyperboloid(o.point))).collect()
}

/// Minimal pairwise distance and an index pair attaining it.
pub fn orbit_separation(orbit: &[OrbitPoint], exec: Exec) -> (f64, (usize, usize)) {
    let n = orbit.len();
    let rows = map_indexed(exec, n as u64, |i| {
        let i = i as usize;
        let mut best = (f64::INFINITY, (i, i));
        for j in i + 1..n {
            let c = halfplane_cosh_distance(orbit[i].point, orbit[j].point);
            if c < best.0 {
                best = (c, (i, j));
            }
        }
        best
    });
    let (c, pair) = rows.into_iter().fold((f64::INFINITY, (0, 0)), |a, b| if b.0 < a.0 { b } else { a });
    let d = if c.is_finite() { halfplane_distance(orbit[pair.0].point, orbit[pair.1].point) } else { c };
    (d, pair)
}

/// Indices attaining the minimum of `b_xi` over the points (ties within
/// `1e-9`) and the minimum itself.
pub fn busemann_min_over_orbit(xi: &BoundaryPoint, points: &[Point]) -> (Vec<usize>, f64) {
    let vals: Vec<f64> = points.iter().map(|p| busemann(p, xi)).collect();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let idx = vals.iter().enumerate().filter(|(_, v)| **v <= min + 1e-9).map(|(i, _)| i).collect();
    (idx, min)
}

/// Horoball `{ b_xi < -level }` with `b_xi` vanishing at the origin `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Horoball {
    pub center: BoundaryPoint,
    pub level: f64,
}

impl Horoball {
    pub fn new(center: BoundaryPoint, level: f64) -> Self {
        Horoball { center, level }
    }

    pub fn contains(&self, x: &Point) -> bool {
        busemann(x, &self.center) < -self.level
    }

    /// `xi e^level`, so the horoball is `{ |<x, s>| < 1 }`.
    pub fn scaled_center(&self) -> HVec {
        self.center.lift().scale(self.level.exp())
    }

    pub fn image(&self, g: &IsometryH2) -> Result<Horoball, LatticeError> {
        let s = self.scaled_center();
        let v = g.to_lorentz() * nalgebra::Vector3::from_column_slice(&s.reals());
        let lift = HVec::from_reals(Field::R, v.as_slice());
        let level = origin().lift().form(&lift).abs().ln();
        Ok(Horoball { center: BoundaryPoint::from_null(lift, &origin())?, level })
    }

    pub fn same_as(&self, other: &Horoball) -> bool {
        self.center.coincides(&other.center) && (self.level - other.level).abs() <= 1e-9
    }

    /// Open horoballs in a real hyperbolic space meet iff `|<s1, s2>| < 2`.
    pub fn intersects(&self, other: &Horoball) -> Result<bool, LatticeError> {
        if self.center.space().field != Field::R {
            return Err(LatticeError::NotReal);
        }
        let p = self.scaled_center().form(&other.scaled_center()).abs();
        Ok(p < 2.0 * (1.0 - 1e-12))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreciseInvariance {
    /// Word length the check covers; nothing is claimed beyond it.
    pub verified_to: usize,
    pub words_checked: usize,
    /// First word (shortlex) with `gB != B` but `gB` meeting `B`.
    pub witness: Option<Word>,
}

impl PreciseInvariance {
    pub fn holds(&self) -> bool {
        self.witness.is_none()
    }
}

/// Checks `gB meets B => gB = B` over all reduced words of length `<= n`.
pub fn horoball_precisely_invariant(ball: &Horoball, n: usize) -> Result<PreciseInvariance, LatticeError> {
    let words = words_up_to(n);
    for w in &words {
        let img = ball.image(&w.evaluate())?;
        if !img.same_as(ball) && img.intersects(ball)? {
            return Ok(PreciseInvariance { verified_to: n, words_checked: words.len(), witness: Some(w.clone()) });
        }
    }
    Ok(PreciseInvariance { verified_to: n, words_checked: words.len(), witness: None })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitSetDirections {
    /// Disk-chart angles in `[0, 2 pi)`, sorted.
    pub angles: Vec<f64>,
    pub max_gap: f64,
}

/// Directions at `x0` (the disk origin) of the orbit points other than `x0`,
/// with the largest angular gap between consecutive directions.
pub fn limit_set_directions(orbit: &[OrbitPoint], x0: Complex64) -> LimitSetDirections {
    let center = to_disk(x0);
    let mut angles: Vec<f64> = orbit
        .iter()
        .filter(|o| halfplane_distance(o.point, x0) > 1e-12)
        .map(|o| {
            let a = (to_disk(o.point) - center).arg();
            if a < 0.0 {
                a + std::f64::consts::TAU
            } else {
                a
            }
        })
        .collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    let max_gap = match angles.len() {
        0 => std::f64::consts::TAU,
        n => {
            let wrap = angles[0] + std::f64::consts::TAU - angles[n - 1];
            angles.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max)
        }
    };
    LimitSetDirections { angles, max_gap }
}

/// Moves `z` into the Dirichlet domain of `Gamma(2)` at `i` (bounded by
/// `|Re z| = 1` and `|z -+ 1/2| = 1/2`): returns `(g, z')` with `z = g z'`
/// and `i` a nearest orbit point of `z'`.
pub fn reduce_to_domain(z: Complex64) -> (Word, Complex64) {
    let mut g = Vec::new();
    let mut z = z;
    if z.re.abs() > 1.0 {
        let n = (z.re / 2.0).round();
        z.re -= 2.0 * n;
        g.extend(Word::power(Letter::A, n as i64).0);
    }
    let i = Complex64::new(0.0, 1.0);
    loop {
        let here = halfplane_cosh_distance(z, i);
        let mut best: Option<(Letter, f64)> = None;
        for l in Letter::ALL {
            let c = halfplane_cosh_distance(z, l.image_of_i());
            if c < here * (1.0 - 1e-14) && best.is_none_or(|(_, b)| c < b) {
                best = Some((l, c));
            }
        }
        match best {
            Some((l, _)) => {
                z = l.inverse().matrix().apply(z);
                g.push(l);
            }
            None => break,
        }
    }
    (Word::reduce(&g), z)
}
