//! Projective models of `H^k_F` for `F in {R, C, H}`.
//!
//! Points are negative lines in the right `F`-vector space `F^{k+1}` with the
//! Hermitian form
//!
//! ```text
//! <z, w> = sum_{i<=k} conj(z_i) w_i - conj(z_{k+1}) w_{k+1}
//! ```
//!
//! which is conjugate-linear in the first slot and `F`-linear (on the right)
//! in the second. Lifts are stored with `<z, z> = -1` and the metric is
//! `cosh d(x, y) = |<x, y>|`, so real planes have curvature `-1` and `F`-lines
//! curvature `-4`. Lifts are never phase-canonicalized; every comparison goes
//! through `|<., .>|`.

use std::io::{self, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use thiserror::Error;

use crate::falgebra::{Field, Scalar};

/// Tolerance for algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Tolerance for predicates evaluated on Monte Carlo output.
pub const MC_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("field mismatch: {0} vs {1}")]
    FieldMismatch(Field, Field),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("lift is not timelike (<z,z> = {0})")]
    NotTimelike(f64),
    #[error("vector is not null (<xi,xi> = {0})")]
    NotNull(f64),
    #[error("points coincide (distance {0:e})")]
    CoincidentPoints(f64),
    #[error("vector is not horizontal at the base point (|<x,u>| = {0:e})")]
    NotHorizontal(f64),
    #[error("vector is not a unit tangent (<u,u> = {0})")]
    NotUnit(f64),
    #[error("vectors are not perpendicular (Re<v,u> = {0:e})")]
    NotPerpendicular(f64),
    #[error("projected lift has non-negative norm {0}")]
    ProjectionAtInfinity(f64),
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

/// A vector in `F^{k+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HVec {
    field: Field,
    comps: Vec<Scalar>,
}

impl HVec {
    pub fn new(field: Field, comps: Vec<Scalar>) -> Self {
        debug_assert!(comps.iter().all(|c| c.field() == field));
        HVec { field, comps }
    }

    pub fn zeros(field: Field, len: usize) -> Self {
        HVec { field, comps: vec![Scalar::zero(field); len] }
    }

    /// Unit coordinate vector `e_idx * unit`.
    pub fn coordinate(field: Field, len: usize, idx: usize, unit: Scalar) -> Self {
        let mut v = Self::zeros(field, len);
        v.comps[idx] = unit;
        v
    }

    /// From `len * d` reals, `d` per coordinate.
    pub fn from_reals(field: Field, reals: &[f64]) -> Self {
        let d = field.dim();
        assert_eq!(reals.len() % d, 0);
        let comps = reals.chunks(d).map(|c| Scalar::from_slice(field, c)).collect();
        HVec { field, comps }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn comps(&self) -> &[Scalar] {
        &self.comps
    }

    pub fn reals(&self) -> Vec<f64> {
        self.comps.iter().flat_map(|c| c.components().to_vec()).collect()
    }

    /// The Hermitian form of signature `(k, 1)`.
    pub fn form(&self, other: &HVec) -> Scalar {
        debug_assert_eq!(self.len(), other.len());
        let n = self.len();
        let mut acc = Scalar::zero(self.field);
        for i in 0..n - 1 {
            acc = acc + self.comps[i].conj() * other.comps[i];
        }
        acc - self.comps[n - 1].conj() * other.comps[n - 1]
    }

    /// Real part of the form; a real inner product on horizontal vectors.
    pub fn re_form(&self, other: &HVec) -> f64 {
        self.form(other).re()
    }

    pub fn euclid_norm_sqr(&self) -> f64 {
        self.comps.iter().map(Scalar::norm_sqr).sum()
    }

    /// Right scalar multiplication `v * a`.
    pub fn mul_right(&self, a: Scalar) -> HVec {
        HVec { field: self.field, comps: self.comps.iter().map(|&c| c * a).collect() }
    }

    pub fn scale(&self, s: f64) -> HVec {
        HVec { field: self.field, comps: self.comps.iter().map(|c| c.scale(s)).collect() }
    }

    pub fn add(&self, other: &HVec) -> HVec {
        HVec { field: self.field, comps: self.comps.iter().zip(&other.comps).map(|(&a, &b)| a + b).collect() }
    }

    pub fn sub(&self, other: &HVec) -> HVec {
        HVec { field: self.field, comps: self.comps.iter().zip(&other.comps).map(|(&a, &b)| a - b).collect() }
    }

    pub fn axpy(&self, a: f64, other: &HVec) -> HVec {
        self.add(&other.scale(a))
    }
}

/// The space `H^k_F`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Space {
    pub field: Field,
    pub k: usize,
}

impl Space {
    pub fn new(field: Field, k: usize) -> Result<Self, GeometryError> {
        if k == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        Ok(Space { field, k })
    }

    /// Real dimension `m = k d`.
    pub fn real_dim(&self) -> usize {
        self.k * self.field.dim()
    }

    pub fn lift_len(&self) -> usize {
        self.k + 1
    }

    /// The standard origin `e_{k+1}`.
    pub fn origin(&self) -> Point {
        let lift = HVec::coordinate(self.field, self.k + 1, self.k, Scalar::one(self.field));
        Point { k: self.k, lift }
    }

    /// Horizontal unit vector at `base` in a random direction.
    pub fn random_unit_tangent<R: Rng + ?Sized>(&self, base: &Point, rng: &mut R) -> Tangent {
        loop {
            let reals: Vec<f64> = (0..(self.k + 1) * self.field.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if let Ok(t) = Tangent::horizontal(base, &HVec::from_reals(self.field, &reals)) {
                return t;
            }
        }
    }

    /// Point at distance uniform in `[0, max_radius]` from `base`.
    pub fn random_point_near<R: Rng + ?Sized>(&self, base: &Point, max_radius: f64, rng: &mut R) -> Point {
        let v = self.random_unit_tangent(base, rng);
        geodesic(&v, rng.gen_range(0.0..max_radius))
    }

    pub fn random_point<R: Rng + ?Sized>(&self, max_radius: f64, rng: &mut R) -> Point {
        self.random_point_near(&self.origin(), max_radius, rng)
    }
}

/// A point of `H^k_F` as a normalized lift.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    k: usize,
    lift: HVec,
}

impl Point {
    /// Normalizes an arbitrary timelike lift to `<z, z> = -1`.
    pub fn from_lift(lift: HVec) -> Result<Point, GeometryError> {
        if lift.len() < 2 {
            return Err(GeometryError::ZeroDimension);
        }
        let n = lift.re_form(&lift);
        if n >= -1e-14 * lift.euclid_norm_sqr() {
            return Err(GeometryError::NotTimelike(n));
        }
        Ok(Point { k: lift.len() - 1, lift: lift.scale(1.0 / (-n).sqrt()) })
    }

    pub(crate) fn from_normalized(lift: HVec) -> Point {
        Point { k: lift.len() - 1, lift }
    }

    pub fn from_reals(field: Field, reals: &[f64]) -> Result<Point, GeometryError> {
        Self::from_lift(HVec::from_reals(field, reals))
    }

    pub fn field(&self) -> Field {
        self.lift.field
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn space(&self) -> Space {
        Space { field: self.field(), k: self.k }
    }

    pub fn lift(&self) -> &HVec {
        &self.lift
    }

    /// `|<z,z> + 1|` relative to the lift's Euclidean size; lifts far from
    /// the origin carry absolute rounding of order `eps * |z|^2`.
    pub fn norm_residual(&self) -> f64 {
        (self.lift.re_form(&self.lift) + 1.0).abs() / self.lift.euclid_norm_sqr().max(1.0)
    }

    fn check_compatible(&self, other: &Point) -> Result<(), GeometryError> {
        if self.field() != other.field() {
            return Err(GeometryError::FieldMismatch(self.field(), other.field()));
        }
        if self.k != other.k {
            return Err(GeometryError::DimMismatch(self.k, other.k));
        }
        Ok(())
    }
}

/// Unit horizontal tangent vector: `<base, dir> = 0`, `<dir, dir> = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tangent {
    base: Point,
    dir: HVec,
}

impl Tangent {
    pub fn new(base: Point, dir: HVec) -> Result<Tangent, GeometryError> {
        let scale = dir.euclid_norm_sqr().max(1.0) * base.lift.euclid_norm_sqr().max(1.0);
        let h = base.lift.form(&dir).abs();
        if h > 1e-12 * scale.sqrt() {
            return Err(GeometryError::NotHorizontal(h));
        }
        let n = dir.re_form(&dir);
        if (n - 1.0).abs() > 1e-12 * scale {
            return Err(GeometryError::NotUnit(n));
        }
        Ok(Tangent { base, dir })
    }

    /// Horizontal part of `raw` at `base`, scaled to unit length.
    pub fn horizontal(base: &Point, raw: &HVec) -> Result<Tangent, GeometryError> {
        let h = horizontal_part(base, raw);
        let n = h.re_form(&h);
        if n <= 1e-24 * raw.euclid_norm_sqr().max(1.0) {
            return Err(GeometryError::NotUnit(n));
        }
        Ok(Tangent { base: base.clone(), dir: h.scale(1.0 / n.sqrt()) })
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn dir(&self) -> &HVec {
        &self.dir
    }

    pub fn reversed(&self) -> Tangent {
        Tangent { base: self.base.clone(), dir: self.dir.scale(-1.0) }
    }
}

/// `raw + base <base, raw>`: removes the component along the base line.
pub fn horizontal_part(base: &Point, raw: &HVec) -> HVec {
    raw.add(&base.lift.mul_right(base.lift.form(raw)))
}

/// `cosh d(x, y) = |<x, y>|`.
pub fn cosh_distance(x: &Point, y: &Point) -> Result<f64, GeometryError> {
    x.check_compatible(y)?;
    Ok(x.lift.form(&y.lift).abs().max(1.0))
}

pub fn distance(x: &Point, y: &Point) -> Result<f64, GeometryError> {
    x.check_compatible(y)?;
    let a = x.lift.form(&y.lift);
    let c = a.abs();
    if c >= 2.0 {
        return Ok(c.acosh());
    }
    // Near the diagonal use |x - y lambda|^2 = 4 sinh^2(d/2) with the phase
    // lambda chosen so that <x, y lambda> is real and negative.
    let lambda = if c == 0.0 { Scalar::one(x.field()) } else { a.conj().scale(-1.0 / c) };
    let diff = x.lift.sub(&y.lift.mul_right(lambda));
    let s = diff.re_form(&diff).max(0.0);
    Ok(2.0 * (s.sqrt() / 2.0).asinh())
}

/// Unit-speed geodesic `t -> base cosh t + dir sinh t`.
pub fn geodesic(v: &Tangent, t: f64) -> Point {
    Point::from_normalized(v.base.lift.scale(t.cosh()).add(&v.dir.scale(t.sinh())))
}

/// Velocity of [`geodesic`] at time `t`, as a unit tangent there.
pub fn geodesic_velocity(v: &Tangent, t: f64) -> Tangent {
    Tangent { base: geodesic(v, t), dir: v.base.lift.scale(t.sinh()).add(&v.dir.scale(t.cosh())) }
}

/// Totally geodesic `F`-line `P(span_F{p, w})`.
#[derive(Clone, Debug, PartialEq)]
pub struct FLine {
    frame: Tangent,
}

impl FLine {
    pub fn from_tangent(v: Tangent) -> FLine {
        FLine { frame: v }
    }

    pub fn base(&self) -> &Point {
        &self.frame.base
    }

    pub fn frame(&self) -> &Tangent {
        &self.frame
    }

    /// Membership: the projection moves `z` by at most `tol`.
    pub fn contains(&self, z: &Point, tol: f64) -> Result<bool, GeometryError> {
        let p = project(z, self)?;
        Ok(distance(z, &p)? <= tol)
    }
}

/// The `F`-line spanned by two distinct points.
pub fn fline(x: &Point, y: &Point) -> Result<FLine, GeometryError> {
    let d = distance(x, y)?;
    if d <= 1e-12 {
        return Err(GeometryError::CoincidentPoints(d));
    }
    // Rephase y so the frame direction points at it.
    let a = x.lift.form(&y.lift).scale(-1.0);
    let y_aligned = y.lift.mul_right(a.inv().map_err(|_| GeometryError::CoincidentPoints(d))?);
    Ok(FLine { frame: Tangent::horizontal(x, &y_aligned)? })
}

/// Nearest-point projection onto an `F`-line.
pub fn project(z: &Point, line: &FLine) -> Result<Point, GeometryError> {
    z.check_compatible(&line.frame.base)?;
    let p = &line.frame.base.lift;
    let w = &line.frame.dir;
    let proj = p.mul_right(-p.form(&z.lift)).add(&w.mul_right(w.form(&z.lift)));
    let perp = z.lift.sub(&proj);
    if perp.re_form(&perp) <= 1e-26 * z.lift.euclid_norm_sqr().max(1.0) {
        return Ok(z.clone());
    }
    let n = -proj.re_form(&proj);
    if n <= 0.0 {
        return Err(GeometryError::ProjectionAtInfinity(-n));
    }
    Ok(Point::from_normalized(proj.scale(1.0 / n.sqrt())))
}

/// Is `z` equidistant from `y1` and `y2` up to `tol`?
pub fn bisector_contains(z: &Point, y1: &Point, y2: &Point, tol: f64) -> Result<bool, GeometryError> {
    Ok(bisector_defect(z, y1, y2)?.abs() <= tol)
}

/// `d(z, y1) - d(z, y2)`.
pub fn bisector_defect(z: &Point, y1: &Point, y2: &Point) -> Result<f64, GeometryError> {
    let sep = distance(y1, y2)?;
    if sep <= 1e-12 {
        return Err(GeometryError::CoincidentPoints(sep));
    }
    Ok(distance(z, y1)? - distance(z, y2)?)
}

/// `cosh d(z, y1) - cosh d(z, y2)`; scales by `cosh d(z, pi z)` under the
/// projection onto the `F`-line through `y1, y2`.
pub fn bisector_cosh_defect(z: &Point, y1: &Point, y2: &Point) -> Result<f64, GeometryError> {
    Ok(cosh_distance(z, y1)? - cosh_distance(z, y2)?)
}

/// Splits a tangent vector `u` perpendicular to `v` into the part `u1`
/// orthogonal to the `F`-line direction and `u2 = v Im<v, u>` inside it.
pub fn tangent_decompose(v: &Tangent, u: &HVec) -> Result<(HVec, HVec), GeometryError> {
    let scale = u.euclid_norm_sqr().sqrt().max(1.0) * v.base.lift.euclid_norm_sqr().sqrt();
    let h = v.base.lift.form(u).abs();
    if h > 1e-9 * scale {
        return Err(GeometryError::NotHorizontal(h));
    }
    let a = v.dir.form(u);
    if a.re().abs() > 1e-9 * scale {
        return Err(GeometryError::NotPerpendicular(a.re()));
    }
    let u2 = v.dir.mul_right(a.im());
    let u1 = u.sub(&u2);
    Ok((u1, u2))
}

/// `R(u, v) v = -u1 - 4 u2`.
pub fn curvature_endomorphism(v: &Tangent, u: &HVec) -> Result<HVec, GeometryError> {
    let (u1, u2) = tangent_decompose(v, u)?;
    Ok(u1.scale(-1.0).sub(&u2.scale(4.0)))
}

/// Real orthonormal basis (for `Re<.,.>`) of the horizontal space at `base`.
pub fn horizontal_basis(base: &Point) -> Vec<HVec> {
    let space = base.space();
    let mut basis: Vec<HVec> = Vec::with_capacity(space.real_dim());
    for idx in 0..space.lift_len() {
        for unit in 0..space.field.dim() {
            let raw = HVec::coordinate(space.field, space.lift_len(), idx, Scalar::basis(space.field, unit));
            let h = horizontal_part(base, &raw);
            if let Some(e) = gram_schmidt_step(&basis, &h) {
                basis.push(e);
            }
        }
    }
    basis
}

fn gram_schmidt_step(basis: &[HVec], raw: &HVec) -> Option<HVec> {
    let mut h = raw.clone();
    // Two passes keep the basis orthonormal to rounding.
    for _ in 0..2 {
        for e in basis {
            h = h.axpy(-e.re_form(&h), e);
        }
    }
    let n = h.re_form(&h);
    (n > 1e-10).then(|| h.scale(1.0 / n.sqrt()))
}

/// Eigenvalues (ascending) of `u -> R(u, v) v` on the real orthogonal
/// complement of `v` in the horizontal space.
pub fn curvature_spectrum(v: &Tangent) -> Result<Vec<f64>, GeometryError> {
    let mut basis = vec![v.dir.clone()];
    for e in horizontal_basis(&v.base) {
        if let Some(f) = gram_schmidt_step(&basis, &e) {
            basis.push(f);
        }
    }
    let perp = &basis[1..];
    let n = perp.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let images = perp.iter().map(|e| curvature_endomorphism(v, e)).collect::<Result<Vec<_>, _>>()?;
    let mat = DMatrix::from_fn(n, n, |a, b| perp[a].re_form(&images[b]));
    let sym = (&mat + mat.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    Ok(eig)
}

/// Form-preserving linear map acting on the left of `F^{k+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Isometry {
    field: Field,
    n: usize,
    m: Vec<Scalar>,
}

impl Isometry {
    pub fn identity(space: Space) -> Self {
        let n = space.lift_len();
        let mut m = vec![Scalar::zero(space.field); n * n];
        for i in 0..n {
            m[i * n + i] = Scalar::one(space.field);
        }
        Isometry { field: space.field, n, m }
    }

    pub fn apply_vec(&self, v: &HVec) -> HVec {
        let comps = (0..self.n)
            .map(|i| (0..self.n).fold(Scalar::zero(self.field), |acc, j| acc + self.m[i * self.n + j] * v.comps[j]))
            .collect();
        HVec::new(self.field, comps)
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::from_normalized(self.apply_vec(&p.lift))
    }

    pub fn compose(&self, other: &Isometry) -> Isometry {
        let n = self.n;
        let mut m = vec![Scalar::zero(self.field); n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] =
                    (0..n).fold(Scalar::zero(self.field), |acc, l| acc + self.m[i * n + l] * other.m[l * n + j]);
            }
        }
        Isometry { field: self.field, n, m }
    }

    /// Largest deviation of `<Ae_i, Ae_j>` from the form on the basis.
    pub fn form_residual(&self) -> f64 {
        let cols: Vec<HVec> =
            (0..self.n).map(|j| HVec::new(self.field, (0..self.n).map(|i| self.m[i * self.n + j]).collect())).collect();
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let mut expected = Scalar::zero(self.field);
                if i == j {
                    expected = Scalar::real(self.field, if i + 1 == self.n { -1.0 } else { 1.0 });
                }
                worst = worst.max((cols[i].form(&cols[j]) - expected).abs());
            }
        }
        worst
    }

    /// Product of random unit diagonal factors, spacelike rotations and boosts.
    pub fn random<R: Rng + ?Sized>(space: Space, rng: &mut R, factors: usize) -> Isometry {
        let n = space.lift_len();
        let mut acc = Isometry::identity(space);
        for _ in 0..factors {
            let mut g = Isometry::identity(space);
            match rng.gen_range(0..3) {
                0 => {
                    for i in 0..n {
                        let mut c = [0.0; 4];
                        for x in c.iter_mut().take(space.field.dim()) {
                            *x = rng.gen_range(-1.0..1.0);
                        }
                        let s = Scalar::new(space.field, c);
                        let s = if s.abs() < 1e-3 { Scalar::one(space.field) } else { s.scale(1.0 / s.abs()) };
                        g.m[i * n + i] = s;
                    }
                }
                1 if n > 2 => {
                    let i = rng.gen_range(0..n - 1);
                    let j = (i + rng.gen_range(1..n - 1)) % (n - 1);
                    let th: f64 = rng.gen_range(-3.0..3.0);
                    g.m[i * n + i] = Scalar::real(space.field, th.cos());
                    g.m[i * n + j] = Scalar::real(space.field, -th.sin());
                    g.m[j * n + i] = Scalar::real(space.field, th.sin());
                    g.m[j * n + j] = Scalar::real(space.field, th.cos());
                }
                _ => {
                    let i = rng.gen_range(0..n - 1);
                    let t = n - 1;
                    let a: f64 = rng.gen_range(-1.0..1.0);
                    g.m[i * n + i] = Scalar::real(space.field, a.cosh());
                    g.m[i * n + t] = Scalar::real(space.field, a.sinh());
                    g.m[t * n + i] = Scalar::real(space.field, a.sinh());
                    g.m[t * n + t] = Scalar::real(space.field, a.cosh());
                }
            }
            acc = g.compose(&acc);
        }
        acc
    }
}

/// Writes points as CSV: `field,k`, the `(k+1) d` real lift components, then
/// one optional extra column (e.g. a foliation coordinate).
pub fn write_points_csv<W: Write>(out: &mut W, points: &[Point], extra: Option<(&str, &[f64])>) -> io::Result<()> {
    writeln!(out, "# schema=hyperwalk-points/1")?;
    let Some(first) = points.first() else {
        return Ok(());
    };
    let ncomp = first.lift.len() * first.field().dim();
    let mut header = String::from("field,k");
    for c in 0..ncomp {
        header.push_str(&format!(",c{c}"));
    }
    if let Some((name, _)) = extra {
        header.push(',');
        header.push_str(name);
    }
    writeln!(out, "{header}")?;
    for (idx, p) in points.iter().enumerate() {
        let mut row = format!("{},{}", p.field(), p.k);
        for x in p.lift.reals() {
            row.push_str(&format!(",{x:.17e}"));
        }
        if let Some((_, vals)) = extra {
            row.push_str(&format!(",{:.17e}", vals[idx]));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn real_pt(field: Field, reals: &[f64]) -> Point {
        Point::from_reals(field, reals).unwrap()
    }

    fn c(re: f64, im: f64) -> Scalar {
        Scalar::new(Field::C, [re, im, 0.0, 0.0])
    }

    #[test]
    fn distance_examples() {
        let x = real_pt(Field::R, &[0.0, 0.0, 1.0]);
        assert_eq!(distance(&x, &x).unwrap(), 0.0);
        let y = real_pt(Field::R, &[0.0, 1f64.sinh(), 1f64.cosh()]);
        assert!((distance(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let z = real_pt(Field::C, &[0.0, 0.0, 1.0, 0.0]);
        let w = real_pt(Field::C, &[0.5, 0.0, 1.0, 0.0]);
        // |<z,w>| / sqrt(<z,z><w,w>) = 1 / sqrt(0.75)
        assert!((cosh_distance(&z, &w).unwrap() - 1.1547005383792517).abs() < 1e-15);
        assert!((distance(&z, &w).unwrap() - 0.5f64.atanh()).abs() < 1e-15);
        assert!((distance(&z, &w).unwrap() - 0.5493061443340549).abs() < 1e-12);
    }

    #[test]
    fn mismatched_spaces_rejected() {
        let x = Space::new(Field::C, 2).unwrap().origin();
        let y = Space::new(Field::H, 2).unwrap().origin();
        let z = Space::new(Field::C, 3).unwrap().origin();
        assert!(matches!(distance(&x, &y), Err(GeometryError::FieldMismatch(..))));
        assert!(matches!(distance(&x, &z), Err(GeometryError::DimMismatch(..))));
        assert!(matches!(Space::new(Field::R, 0), Err(GeometryError::ZeroDimension)));
    }

    #[test]
    fn numeric_geodesic_length_matches_distance() {
        // Riemannian length of the straight segment in the curvature -4 disk
        // ds = |dz| / (1 - |z|^2) from 0 to 0.5.
        let n = 20_000;
        let h = 0.5 / n as f64;
        let len: f64 = (0..n)
            .map(|i| {
                let r = (i as f64 + 0.5) * h;
                h / (1.0 - r * r)
            })
            .sum();
        assert!((len - 0.5493061443340549).abs() < 1e-9);
    }

    #[test]
    fn geodesic_examples() {
        let base = real_pt(Field::R, &[0.0, 0.0, 1.0]);
        let v = Tangent::new(base.clone(), HVec::from_reals(Field::R, &[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(geodesic(&v, 0.0), base);
        let p = geodesic(&v, 1.0);
        assert_eq!(p.lift().reals(), vec![0.0, 1f64.sinh(), 1f64.cosh()]);

        // CH^1: disk coordinate z1/z2 = tanh t.
        let b = real_pt(Field::C, &[0.0, 0.0, 1.0, 0.0]);
        let v = Tangent::new(b, HVec::new(Field::C, vec![c(1.0, 0.0), c(0.0, 0.0)])).unwrap();
        for t in [0.1, 0.7, 2.0] {
            let p = geodesic(&v, t);
            let disk = p.lift().comps()[0] * p.lift().comps()[1].inv().unwrap();
            assert!((disk - c(t.tanh(), 0.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn geodesic_unit_speed() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for field in Field::ALL {
            let space = Space::new(field, 2).unwrap();
            for _ in 0..50 {
                let v = space.random_unit_tangent(&space.random_point(1.0, &mut rng), &mut rng);
                // From the base point out to |t| = 20 the lifts stay well
                // conditioned for this pair.
                let t = rng.gen_range(-20.0..20.0);
                let d = distance(&geodesic(&v, 0.0), &geodesic(&v, t)).unwrap();
                assert!((d - t.abs()).abs() <= 1e-10 * t.abs().max(1.0), "{d} vs {t}");
                let s = -t.signum() * rng.gen_range(0.0..20.0);
                let d = distance(&geodesic(&v, s), &geodesic(&v, t)).unwrap();
                assert!((d - (t - s).abs()).abs() <= 1e-10 * (t - s).abs().max(1.0));
                let (s, t) = (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
                let d = distance(&geodesic(&v, s), &geodesic(&v, t)).unwrap();
                assert!((d - (t - s).abs()).abs() <= 1e-10, "{s} {t} {d}");
            }
        }
    }

    #[test]
    fn fline_examples() {
        let x = real_pt(Field::R, &[0.0, 0.0, 1.0]);
        let y = real_pt(Field::R, &[0.3, -0.2, 1.0]);
        let line = fline(&x, &y).unwrap();
        // Real case: the F-line is the geodesic through x and y.
        let v = line.frame().clone();
        let d = distance(&x, &y).unwrap();
        assert!(distance(&geodesic(&v, d), &y).unwrap() < 1e-12);

        let x = real_pt(Field::C, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let y = real_pt(Field::C, &[1f64.sinh(), 0.0, 0.0, 0.0, 1f64.cosh(), 0.0]);
        let line = fline(&x, &y).unwrap();
        let e1i = real_pt(Field::C, &[0.0, 0.4, 0.0, 0.0, 1.0, 0.0]);
        assert!(line.contains(&e1i, 1e-12).unwrap());
        let off = real_pt(Field::C, &[0.0, 0.0, 0.4, 0.0, 1.0, 0.0]);
        assert!(!line.contains(&off, 1e-6).unwrap());
        assert!(matches!(fline(&x, &x), Err(GeometryError::CoincidentPoints(_))));
    }

    #[test]
    fn fline_contains_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for field in Field::ALL {
            let space = Space::new(field, 3).unwrap();
            let x = space.random_point(2.0, &mut rng);
            let y = space.random_point(2.0, &mut rng);
            let line = fline(&x, &y).unwrap();
            let mid = geodesic(line.frame(), distance(&x, &y).unwrap() / 2.0);
            assert!(line.contains(&mid, 1e-10).unwrap());
            assert!(line.contains(&y, 1e-10).unwrap());
        }
    }

    #[test]
    fn projection_example() {
        // z = cosh(1) (sinh 1, 0, cosh 1) + sinh(1) e_2, at distance 1 from
        // its projection.
        let (s1, c1) = (1f64.sinh(), 1f64.cosh());
        let z = real_pt(Field::C, &[s1 * c1, 0.0, s1, 0.0, c1 * c1, 0.0]);
        assert!((c1 * c1 - 2.3810978).abs() < 1e-7 && (s1 - 1.1752012).abs() < 1e-7);
        let x = real_pt(Field::C, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let y = real_pt(Field::C, &[1.0, 0.0, 0.0, 0.0, 2f64.sqrt(), 0.0]);
        let line = fline(&x, &y).unwrap();
        let pz = project(&z, &line).unwrap();
        let expected = real_pt(Field::C, &[1f64.sinh(), 0.0, 0.0, 0.0, 1f64.cosh(), 0.0]);
        assert!(distance(&pz, &expected).unwrap() < 1e-12);
        assert!((distance(&z, &pz).unwrap() - 1.0).abs() < 1e-12);
        let czx = cosh_distance(&x, &z).unwrap();
        let rhs = cosh_distance(&x, &pz).unwrap() * cosh_distance(&pz, &z).unwrap();
        assert!((czx - 2.3810978).abs() < 1e-6);
        assert!((czx - rhs).abs() < 1e-6);
        assert!((cosh_distance(&x, &pz).unwrap() - 1.5430806).abs() < 1e-6);
        assert!((cosh_distance(&pz, &z).unwrap() - 1.5430806).abs() < 1e-6);
        // Idempotent, and exact on L.
        assert_eq!(project(&pz, &line).unwrap(), pz);
    }

    #[test]
    fn projection_minimizes_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for field in Field::ALL {
            let space = Space::new(field, 2).unwrap();
            for _ in 0..20 {
                let line = fline(&space.random_point(1.5, &mut rng), &space.random_point(1.5, &mut rng)).unwrap();
                let z = space.random_point(2.5, &mut rng);
                let pz = project(&z, &line).unwrap();
                let dz = distance(&z, &pz).unwrap();
                let ppz = project(&pz, &line).unwrap();
                assert!(distance(&ppz, &pz).unwrap() <= 1e-10);
                for _ in 0..100 {
                    // Random point of L: geodesic from the base in a direction
                    // inside span_F{w}.
                    let mut coeff = [0.0; 4];
                    for c in coeff.iter_mut().take(field.dim()) {
                        *c = rng.gen_range(-1.0..1.0);
                    }
                    let dir = line.frame().dir().mul_right(Scalar::new(field, coeff));
                    let t = Tangent::horizontal(line.base(), &dir).unwrap();
                    let w = geodesic(&t, rng.gen_range(-3.0..3.0));
                    assert!(dz <= distance(&z, &w).unwrap() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn bisector_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let space = Space::new(Field::H, 2).unwrap();
        let y1 = space.random_point(1.0, &mut rng);
        let y2 = space.random_point(1.0, &mut rng);
        let line = fline(&y1, &y2).unwrap();
        let mid = geodesic(line.frame(), distance(&y1, &y2).unwrap() / 2.0);
        assert!(bisector_contains(&mid, &y1, &y2, 1e-9).unwrap());
        assert!(!bisector_contains(&y1, &y1, &y2, 1e-9).unwrap());
        assert!(bisector_contains(&y1, &y1, &y1, 1e-9).is_err());
        for _ in 0..200 {
            let z = space.random_point(2.0, &mut rng);
            let pz = project(&z, &line).unwrap();
            let a = bisector_contains(&z, &y1, &y2, 0.05).unwrap();
            let b = bisector_contains(&pz, &y1, &y2, 0.05).unwrap();
            let dz = bisector_cosh_defect(&z, &y1, &y2).unwrap();
            let dp = bisector_cosh_defect(&pz, &y1, &y2).unwrap();
            let scale = cosh_distance(&z, &pz).unwrap();
            assert!((dz - scale * dp).abs() <= 1e-9 * scale.max(dz.abs()));
            // Strictly equal signs away from the tolerance band.
            if dz.abs() > 1e-9 {
                assert_eq!(dz.signum(), dp.signum());
            }
            let _ = (a, b);
        }
    }

    #[test]
    fn tangent_decompose_examples() {
        let x = real_pt(Field::C, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let v = Tangent::new(x.clone(), HVec::new(Field::C, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])).unwrap();
        let vi = HVec::new(Field::C, vec![c(0.0, 0.7), c(0.0, 0.0), c(0.0, 0.0)]);
        let (u1, u2) = tangent_decompose(&v, &vi).unwrap();
        assert!(u1.euclid_norm_sqr() < 1e-30);
        assert_eq!(u2, vi);
        let u = HVec::new(Field::C, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let (u1, u2) = tangent_decompose(&v, &u).unwrap();
        assert_eq!(u1, u);
        assert!(u2.euclid_norm_sqr() < 1e-30);
        let bad = HVec::new(Field::C, vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(tangent_decompose(&v, &bad), Err(GeometryError::NotPerpendicular(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let space = Space::new(Field::R, 3).unwrap();
        let p = space.random_point(1.0, &mut rng);
        let v = space.random_unit_tangent(&p, &mut rng);
        for e in horizontal_basis(&p) {
            let u = e.axpy(-v.dir().re_form(&e), v.dir());
            let (_, u2) = tangent_decompose(&v, &u).unwrap();
            assert!(u2.euclid_norm_sqr() < 1e-28);
        }
    }

    #[test]
    fn curvature_examples() {
        let x = real_pt(Field::C, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let v = Tangent::new(x, HVec::new(Field::C, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])).unwrap();
        let u = HVec::new(Field::C, vec![c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(curvature_endomorphism(&v, &u).unwrap(), u.scale(-4.0));
        let u = HVec::new(Field::C, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(curvature_endomorphism(&v, &u).unwrap(), u.scale(-1.0));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let space = Space::new(Field::H, 1).unwrap();
        let v = space.random_unit_tangent(&space.random_point(1.0, &mut rng), &mut rng);
        let spec = curvature_spectrum(&v).unwrap();
        assert_eq!(spec.len(), 3);
        assert!(spec.iter().all(|e| (e + 4.0).abs() < 1e-10));
    }

    #[test]
    fn jacobi_growth_matches_spectrum() {
        // Geodesic deviation: initial separation eps along u grows like
        // sinh(t) for eigenvalue -1 and sinh(2t)/2 for eigenvalue -4.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let space = Space::new(Field::C, 2).unwrap();
        let p = space.random_point(1.0, &mut rng);
        let v = space.random_unit_tangent(&p, &mut rng);
        let i = Scalar::basis(Field::C, 1);
        let u2 = v.dir().mul_right(i);
        let basis = horizontal_basis(&p);
        let mut u1 = basis[0].clone();
        for e in [v.dir().clone(), u2.clone()] {
            u1 = u1.axpy(-e.re_form(&u1), &e);
        }
        let u1 = u1.scale(1.0 / u1.re_form(&u1).sqrt());
        let eps = 1e-6;
        let t: f64 = 1.0;
        for (u, expect) in [(u1, t.sinh()), (u2, (2.0 * t).sinh() / 2.0)] {
            let w = Tangent::horizontal(&p, &v.dir().axpy(eps, &u)).unwrap();
            let growth = distance(&geodesic(&v, t), &geodesic(&w, t)).unwrap() / eps;
            assert!((growth - expect).abs() < 1e-4 * expect, "{growth} vs {expect}");
        }
    }

    #[test]
    fn right_triangles_in_fline() {
        // Legs s, t along real-orthogonal directions of an F-line: curvature -4.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for field in [Field::C, Field::H] {
            let space = Space::new(field, 2).unwrap();
            for _ in 0..20 {
                let v = space.random_unit_tangent(&space.random_point(1.0, &mut rng), &mut rng);
                let w = Tangent::new(v.base().clone(), v.dir().mul_right(Scalar::basis(field, 1))).unwrap();
                let (s, t) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
                let d = distance(&geodesic(&v, s), &geodesic(&w, t)).unwrap();
                let lhs = (2.0 * d).cosh();
                let rhs = (2.0 * s).cosh() * (2.0 * t).cosh();
                assert!((lhs - rhs).abs() <= 1e-9 * rhs);
            }
        }
    }

    #[test]
    fn isometries_preserve_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for field in Field::ALL {
            for k in 1..=3 {
                let space = Space::new(field, k).unwrap();
                let g = Isometry::random(space, &mut rng, 12);
                assert!(g.form_residual() < 1e-10);
                for _ in 0..20 {
                    let x = space.random_point(2.0, &mut rng);
                    let y = space.random_point(2.0, &mut rng);
                    let d0 = distance(&x, &y).unwrap();
                    let d1 = distance(&g.apply(&x), &g.apply(&y)).unwrap();
                    assert!((d0 - d1).abs() <= 1e-9, "{field} {k}: {d0} {d1}");
                }
            }
        }
    }

    #[test]
    fn csv_layout() {
        let space = Space::new(Field::C, 2).unwrap();
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &[space.origin()], Some(("t", &[0.5]))).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "field,k,c0,c1,c2,c3,c4,c5,t");
        assert_eq!(lines[2].split(',').count(), 9);
        assert!(lines[2].starts_with("C,2,"));
    }
}
