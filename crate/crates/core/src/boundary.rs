//! Boundary points, Busemann functions and boundary Martin kernels.
//!
//! A boundary point is a null line in `F^{k+1}`. Its lift is scaled so that
//! `|<x0, xi>| = 1` for a chosen origin `x0`; with that normalization the
//! Busemann function vanishing at `x0` is simply `b(x) = log |<x, xi>|` and
//! the Martin kernel is `K(x, xi) = exp(-h b(x))` with `h = m + d - 2`.

use rand::Rng;
use thiserror::Error;

use crate::hypspace::{distance, geodesic, FLine, GeometryError, HVec, Point, Space, Tangent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("boundary points coincide")]
    SamePoint,
    #[error("empty orbit")]
    EmptyOrbit,
    #[error("no separating orbit point at this truncation (best margin {best:e})")]
    NoWitness { best: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryPoint {
    lift: HVec,
}

impl BoundaryPoint {
    /// Scales a null vector so that `|<origin, xi>| = 1`.
    pub fn from_null(lift: HVec, origin: &Point) -> Result<Self, GeometryError> {
        let n = lift.re_form(&lift);
        if n.abs() > 1e-10 * lift.euclid_norm_sqr() {
            return Err(GeometryError::NotNull(n));
        }
        let s = origin.lift().form(&lift).abs();
        if s == 0.0 {
            return Err(GeometryError::NotNull(n));
        }
        Ok(BoundaryPoint { lift: lift.scale(1.0 / s) })
    }

    /// Forward endpoint `c(+inf)` of the geodesic with initial velocity `v`.
    pub fn toward(v: &Tangent, origin: &Point) -> Result<Self, GeometryError> {
        Self::from_null(v.base().lift().add(v.dir()), origin)
    }

    /// Endpoint seen from `origin` in a random direction.
    pub fn random<R: Rng + ?Sized>(space: Space, origin: &Point, rng: &mut R) -> Self {
        let v = space.random_unit_tangent(origin, rng);
        Self::toward(&v, origin).expect("base + unit horizontal is null")
    }

    /// Same point, Busemann normalization moved to `origin`.
    pub fn normalized_at(&self, origin: &Point) -> Self {
        let s = origin.lift().form(&self.lift).abs();
        BoundaryPoint { lift: self.lift.scale(1.0 / s) }
    }

    pub fn lift(&self) -> &HVec {
        &self.lift
    }

    pub fn space(&self) -> Space {
        Space { field: self.lift.field(), k: self.lift.len() - 1 }
    }

    /// Null lines coincide iff their lifts are orthogonal.
    pub fn coincides(&self, other: &BoundaryPoint) -> bool {
        self.lift.form(&other.lift).abs() <= 1e-12
    }

    /// `Re <xi, xi>`, zero up to rounding.
    pub fn null_residual(&self) -> f64 {
        self.lift.re_form(&self.lift).abs()
    }
}

/// `h = m + d - 2`, computed from `(k, d)` every time.
pub fn volume_entropy(space: Space) -> f64 {
    (space.real_dim() + space.field.dim()) as f64 - 2.0
}

/// Busemann function of `xi`, zero at the point `xi` is normalized against.
pub fn busemann(x: &Point, xi: &BoundaryPoint) -> f64 {
    x.lift().form(&xi.lift).abs().ln()
}

/// `d(x, c(t)) - t` along the ray `c` from `origin` to `xi`.
pub fn busemann_limit_oracle(x: &Point, xi: &BoundaryPoint, origin: &Point, t: f64) -> Result<f64, GeometryError> {
    let ray = ray_to(origin, xi)?;
    Ok(distance(x, &geodesic(&ray, t))? - t)
}

/// Unit tangent at `origin` pointing at `xi`.
pub fn ray_to(origin: &Point, xi: &BoundaryPoint) -> Result<Tangent, GeometryError> {
    let a = origin.lift().form(&xi.lift);
    let scaled = xi.lift.mul_right(a.inv().map_err(|_| GeometryError::NotNull(0.0))?.scale(-1.0));
    Tangent::new(origin.clone(), scaled.sub(origin.lift()))
}

pub fn martin_kernel(x: &Point, xi: &BoundaryPoint) -> f64 {
    (-volume_entropy(x.space()) * busemann(x, xi)).exp()
}

/// Complete unit-speed geodesic with its two endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicLine {
    frame: Tangent,
}

impl GeodesicLine {
    pub fn new(frame: Tangent) -> Self {
        GeodesicLine { frame }
    }

    /// The geodesic from `xi = c(-inf)` to `eta = c(+inf)`.
    pub fn between(xi: &BoundaryPoint, eta: &BoundaryPoint) -> Result<Self, BoundaryError> {
        let a = xi.lift.form(&eta.lift);
        if a.abs() <= 1e-12 {
            return Err(BoundaryError::SamePoint);
        }
        let eta = eta.lift.mul_right(a.inv().expect("nonzero").scale(-0.5));
        let base = Point::from_lift(xi.lift.add(&eta))?;
        let dir = eta.sub(&xi.lift).scale(1.0 / base_scale(&xi.lift, &eta));
        Ok(GeodesicLine { frame: Tangent::new(base, dir)? })
    }

    pub fn frame(&self) -> &Tangent {
        &self.frame
    }

    pub fn at(&self, t: f64) -> Point {
        geodesic(&self.frame, t)
    }

    /// `c(-inf)`, normalized at `c(0)`.
    pub fn start(&self) -> BoundaryPoint {
        BoundaryPoint { lift: self.frame.base().lift().sub(self.frame.dir()) }
    }

    /// `c(+inf)`, normalized at `c(0)`.
    pub fn end(&self) -> BoundaryPoint {
        BoundaryPoint { lift: self.frame.base().lift().add(self.frame.dir()) }
    }

    /// The `F`-line containing the geodesic.
    pub fn fline(&self) -> FLine {
        FLine::from_tangent(self.frame.clone())
    }
}

// `xi + eta` has norm `-1` by construction; the unit direction needs the
// same scale, which is 1 up to rounding.
fn base_scale(xi: &HVec, eta: &HVec) -> f64 {
    (-xi.add(eta).re_form(&xi.add(eta))).sqrt()
}

/// Leaf index `t` with `z in N_t`: `(b_xi(z) - b_eta(z)) / 2`, both Busemann
/// functions normalized at `c(0)`.
pub fn foliation_coordinate(z: &Point, line: &GeodesicLine) -> f64 {
    (busemann(z, &line.start()) - busemann(z, &line.end())) / 2.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct Separation {
    /// Index into the candidate list.
    pub index: usize,
    pub point: Point,
    /// `|b_xi(x) - b_eta(x)|` at the witness.
    pub margin: f64,
}

/// Finds an orbit point where `b_xi` and `b_eta` differ, certifying that the
/// kernels `K(., xi)` and `K(., eta)` differ on the orbit.
///
/// Candidates carry a shell index (word length). Shells are scanned in
/// increasing order and the first shell containing a point with margin above
/// `tol` yields its maximizer; ties go to the earliest candidate.
pub fn separating_orbit_point(
    xi: &BoundaryPoint,
    eta: &BoundaryPoint,
    candidates: &[(u32, Point)],
    tol: f64,
) -> Result<Separation, BoundaryError> {
    if xi.coincides(eta) {
        return Err(BoundaryError::SamePoint);
    }
    if candidates.is_empty() {
        return Err(BoundaryError::EmptyOrbit);
    }
    let mut shells: Vec<u32> = candidates.iter().map(|(s, _)| *s).collect();
    shells.sort_unstable();
    shells.dedup();
    let mut best = 0.0f64;
    for shell in shells {
        let mut winner: Option<(usize, f64)> = None;
        for (idx, (s, p)) in candidates.iter().enumerate() {
            if *s != shell {
                continue;
            }
            let m = (busemann(p, xi) - busemann(p, eta)).abs();
            best = best.max(m);
            if m > tol && winner.is_none_or(|(_, w)| m > w + 1e-12) {
                winner = Some((idx, m));
            }
        }
        if let Some((index, margin)) = winner {
            return Ok(Separation { index, point: candidates[index].1.clone(), margin });
        }
    }
    Err(BoundaryError::NoWitness { best })
}

/// Global maximizer of `|b_xi - b_eta|` over a point list.
pub fn max_separation(xi: &BoundaryPoint, eta: &BoundaryPoint, points: &[Point]) -> Result<Separation, BoundaryError> {
    if points.is_empty() {
        return Err(BoundaryError::EmptyOrbit);
    }
    let (index, margin) = points
        .iter()
        .map(|p| (busemann(p, xi) - busemann(p, eta)).abs())
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });
    Ok(Separation { index, point: points[index].clone(), margin })
}
