//! Brownian motion on the hyperbolic plane through conformal invariance.
//!
//! A hyperbolic ball in the half-plane is a Euclidean disk, and a Möbius map
//! sends it to the unit disk with its center at `0`. Exit points are drawn
//! exactly: a uniform angle pushed through the disk automorphism that moves
//! `0` to the image of the start point. No time discretization is involved;
//! every functional here is invariant under time change, so the choice of
//! generator normalization never enters.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::lattice::{halfplane_distance, reduce_to_domain, Word};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrownianError {
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("point is not in the upper half-plane")]
    OffChart,
    #[error("start point lies outside the ball (disk modulus {0})")]
    Outside(f64),
    #[error("point is not on the ball boundary (disk modulus {0})")]
    NotOnBoundary(f64),
    #[error("need 0 < r_F < R_V, got r_F = {r_f}, R_V = {r_v}")]
    RadiiOrder { r_f: f64, r_v: f64 },
    #[error("Green's function has a pole at distance 0")]
    Pole,
    #[error("walk-on-spheres budget of {steps} steps exhausted at site {site}, local point {point}")]
    Budget { steps: usize, site: Word, point: Complex64 },
}

/// Möbius map sending a hyperbolic ball onto the unit disk, center to `0`:
/// `w = ((z - c) / (z - conj c)) / tanh(R / 2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Uniformizer {
    c: Complex64,
    s: f64,
}

impl Uniformizer {
    pub fn to_disk(&self, z: Complex64) -> Complex64 {
        (z - self.c) / (z - self.c.conj()) / self.s
    }

    pub fn from_disk(&self, w: Complex64) -> Complex64 {
        let u = w * self.s;
        (self.c - u * self.c.conj()) / (1.0 - u)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallDomain {
    center: Complex64,
    radius: f64,
    e_center: Complex64,
    e_radius: f64,
}

impl BallDomain {
    pub fn new(center: Complex64, radius: f64) -> Result<Self, BrownianError> {
        if !(radius > 0.0) {
            return Err(BrownianError::NonPositiveRadius(radius));
        }
        if !(center.im > 0.0) {
            return Err(BrownianError::OffChart);
        }
        Ok(BallDomain {
            center,
            radius,
            e_center: Complex64::new(center.re, center.im * radius.cosh()),
            e_radius: center.im * radius.sinh(),
        })
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn euclid_center(&self) -> Complex64 {
        self.e_center
    }

    pub fn euclid_radius(&self) -> f64 {
        self.e_radius
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.im > 0.0 && halfplane_distance(z, self.center) < self.radius
    }

    pub fn contains_euclid(&self, z: Complex64) -> bool {
        (z - self.e_center).norm() < self.e_radius
    }

    pub fn uniformizer(&self) -> Uniformizer {
        Uniformizer { c: self.center, s: (self.radius / 2.0).tanh() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExitSample {
    pub point: Complex64,
    /// The same point in the uniformized disk (on the unit circle).
    pub disk: Complex64,
}

/// Exact draw from the exit law of the ball started at `y`.
pub fn exit_sample<R: Rng + ?Sized>(y: Complex64, v: &BallDomain, rng: &mut R) -> Result<ExitSample, BrownianError> {
    let u = v.uniformizer();
    let yh = u.to_disk(y);
    if !(yh.norm() < 1.0) {
        return Err(BrownianError::Outside(yh.norm()));
    }
    let e = Complex64::from_polar(1.0, rng.gen::<f64>() * TAU);
    let disk = (e + yh) / (1.0 + yh.conj() * e);
    let disk = disk / disk.norm();
    Ok(ExitSample { point: u.from_disk(disk), disk })
}

/// `d eps_y / d eps_center` at the boundary point `w`: the disk Poisson
/// kernel `(1 - |y|^2) / |y - w|^2` in uniformized coordinates.
pub fn exit_density_ratio(y: Complex64, v: &BallDomain, w: Complex64) -> Result<f64, BrownianError> {
    let u = v.uniformizer();
    let wh = u.to_disk(w);
    if (wh.norm() - 1.0).abs() > 1e-9 {
        return Err(BrownianError::NotOnBoundary(wh.norm()));
    }
    let yh = u.to_disk(y);
    if !(yh.norm() < 1.0) {
        return Err(BrownianError::Outside(yh.norm()));
    }
    Ok((1.0 - yh.norm_sqr()) / (yh - wh).norm_sqr())
}

/// Uniformized radius of the inner ball, `tanh(r_F / 2) / tanh(R_V / 2)`.
pub fn harnack_rho(r_f: f64, r_v: f64) -> Result<f64, BrownianError> {
    if !(r_f > 0.0 && r_f < r_v) {
        return Err(BrownianError::RadiiOrder { r_f, r_v });
    }
    Ok((r_f / 2.0).tanh() / (r_v / 2.0).tanh())
}

/// Sharp bound on `d eps_y / d eps_x` for `y` within `r_F` of the center.
pub fn harnack_constant(r_f: f64, r_v: f64) -> Result<f64, BrownianError> {
    let rho = harnack_rho(r_f, r_v)?;
    Ok((1.0 + rho) / (1.0 - rho))
}

/// `G(d) = -(1 / 2 pi) log tanh(d / 2)`.
pub fn green_h2(dist: f64) -> Result<f64, BrownianError> {
    if !(dist > 0.0) {
        return Err(BrownianError::Pole);
    }
    Ok(-(dist / 2.0).tanh().ln() / TAU)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WosConfig {
    /// Radius of each `F_x`.
    pub r_f: f64,
    /// Stop once within this distance of `F`.
    pub shell: f64,
    /// Largest step ball.
    pub cap: f64,
    pub max_steps: usize,
}

impl WosConfig {
    pub fn new(r_f: f64) -> Self {
        WosConfig { r_f, shell: 1e-3 * r_f, cap: 2.0, max_steps: 100_000 }
    }
}

/// Where a walk met `F`: the site `g` and a point on `dF` around `i`, so the
/// global hit point is `g` applied to `local`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hit {
    pub site: Word,
    pub local: Complex64,
    pub steps: usize,
}

/// Radial projection onto the sphere of radius `r` about `i`.
pub fn project_to_sphere(z: Complex64, r: f64) -> Complex64 {
    let u = BallDomain::new(Complex64::new(0.0, 1.0), r).expect("positive radius").uniformizer();
    let w = u.to_disk(z);
    let n = w.norm();
    let dir = if n > 0.0 { w / n } else { Complex64::new(1.0, 0.0) };
    u.from_disk(dir)
}

/// Walk-on-spheres from `site` applied to `local` until within `shell` of
/// `F = union of B(g i, r_F)`. The state is kept as a site plus a point in the
/// Dirichlet domain at `i`, where `i` is the nearest orbit point, so the
/// distance to `F` is `d(z, i) - r_F` and no global coordinates are needed.
pub fn walk_on_spheres_until_hit_f<R: Rng + ?Sized>(
    site: &Word,
    local: Complex64,
    cfg: &WosConfig,
    rng: &mut R,
    mut trace: Option<&mut Vec<(Word, Complex64)>>,
) -> Result<Hit, BrownianError> {
    if !(local.im > 0.0) {
        return Err(BrownianError::OffChart);
    }
    let i = Complex64::new(0.0, 1.0);
    let (mut g, mut z) = (site.clone(), local);
    for step in 0..=cfg.max_steps {
        let (h, zr) = reduce_to_domain(z);
        if !h.is_empty() {
            g = g.mul(&h);
        }
        z = zr;
        if let Some(t) = trace.as_deref_mut() {
            t.push((g.clone(), z));
        }
        let gap = halfplane_distance(z, i) - cfg.r_f;
        if gap <= cfg.shell {
            return Ok(Hit { site: g, local: project_to_sphere(z, cfg.r_f), steps: step });
        }
        if step == cfg.max_steps {
            break;
        }
        let ball = BallDomain::new(z, gap.min(cfg.cap))?;
        z = exit_sample(z, &ball, rng)?.point;
    }
    Err(BrownianError::Budget { steps: cfg.max_steps, site: g, point: z })
}

/// Whether a walk from `z` reaches the inner sphere `d(., i) = eps` before
/// the outer sphere `d(., i) = r_outer`, by walk-on-spheres in the annulus.
pub fn annulus_hits_inner<R: Rng + ?Sized>(z: Complex64, eps: f64, r_outer: f64, shell: f64, rng: &mut R) -> bool {
    let i = Complex64::new(0.0, 1.0);
    let mut z = z;
    loop {
        let d = halfplane_distance(z, i);
        let (inner, outer) = (d - eps, r_outer - d);
        if inner <= shell {
            return true;
        }
        if outer <= shell {
            return false;
        }
        let ball = BallDomain::new(z, inner.min(outer)).expect("positive radius");
        z = exit_sample(z, &ball, rng).expect("center is inside").point;
    }
}

/// Probability of reaching the `eps`-sphere before the `r_outer`-sphere from
/// distance `d`: `(G(d) - G(R)) / (G(eps) - G(R))`.
pub fn annulus_hit_probability(d: f64, eps: f64, r_outer: f64) -> f64 {
    let g = |t: f64| green_h2(t).expect("positive distance");
    (g(d) - g(r_outer)) / (g(eps) - g(r_outer))
}

/// Point at distance `r` from `i` in direction `theta` (disk chart at `i`).
pub fn sphere_point(r: f64, theta: f64) -> Complex64 {
    let u = BallDomain::new(Complex64::new(0.0, 1.0), r).expect("positive radius").uniformizer();
    u.from_disk(Complex64::from_polar(1.0, theta))
}

/// Poisson kernel of the unit disk, normalized to a probability density in
/// the boundary angle.
pub fn poisson_density(y: Complex64, phi: f64) -> f64 {
    (1.0 - y.norm_sqr()) / (Complex64::from_polar(1.0, phi) - y).norm_sqr() / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    /// Upper 1% point of chi-square via Wilson-Hilferty.
    fn chi2_crit_01(df: f64) -> f64 {
        let z = 2.326_347_874;
        let a = 2.0 / (9.0 * df);
        df * (1.0 - a + z * a.sqrt()).powi(3)
    }

    #[test]
    fn ball_descriptions_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = BallDomain::new(c(0.3, 0.7), 0.8).unwrap();
        for _ in 0..10_000 {
            let z = c(rng.gen_range(-2.0..2.0), rng.gen_range(0.01..3.0));
            let d = halfplane_distance(z, v.center());
            if (d - v.radius()).abs() > 1e-9 {
                assert_eq!(v.contains(z), v.contains_euclid(z));
            }
        }
        assert!(BallDomain::new(c(0.0, 1.0), 0.0).is_err());
        assert!(BallDomain::new(c(0.0, -1.0), 1.0).is_err());
    }

    #[test]
    fn uniformizer_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = BallDomain::new(c(0.0, 1.0), 0.9).unwrap();
        let u = v.uniformizer();
        assert!(u.to_disk(c(0.0, 1.0)).norm() < 1e-16);
        for _ in 0..100 {
            let th = rng.gen_range(0.0..TAU);
            let w = Complex64::from_polar(1.0, th);
            let z = u.from_disk(w);
            assert!((u.to_disk(z) - w).norm() < 1e-12);
            assert!((halfplane_distance(z, v.center()) - v.radius()).abs() < 1e-10);
        }
        // Disk automorphism z -> -conj(z) about i is a reflection of the image.
        let z = c(0.2, 0.8);
        let (p, q) = (u.to_disk(z), u.to_disk(c(-0.2, 0.8)));
        assert!((p.norm() - q.norm()).abs() < 1e-14);
    }

    #[test]
    fn exit_samples_on_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = BallDomain::new(c(1.0, 2.0), 1.3).unwrap();
        for _ in 0..1000 {
            let s = exit_sample(c(1.3, 2.5), &v, &mut rng).unwrap();
            assert!((halfplane_distance(s.point, v.center()) - v.radius()).abs() < 1e-10);
        }
        assert!(matches!(exit_sample(c(9.0, 1.0), &v, &mut rng), Err(BrownianError::Outside(_))));
    }

    #[test]
    fn exit_law_matches_poisson_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = BallDomain::new(c(0.0, 1.0), 1.0).unwrap();
        let u = v.uniformizer();
        let y = u.from_disk(c(0.35, -0.4));
        let yh = u.to_disk(y);
        let bins = 40;
        let n = 100_000;
        let mut counts = vec![0u64; bins];
        for _ in 0..n {
            let s = exit_sample(y, &v, &mut rng).unwrap();
            let a = s.disk.arg().rem_euclid(TAU);
            counts[((a / TAU * bins as f64) as usize).min(bins - 1)] += 1;
        }
        // Simpson quadrature of the Poisson kernel per bin.
        let mut chi2 = 0.0;
        for (k, &obs) in counts.iter().enumerate() {
            let (a, b) = (TAU * k as f64 / bins as f64, TAU * (k + 1) as f64 / bins as f64);
            let m = 200;
            let h = (b - a) / m as f64;
            let mut s = poisson_density(yh, a) + poisson_density(yh, b);
            for j in 1..m {
                s += poisson_density(yh, a + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
            }
            let exp = s * h / 3.0 * n as f64;
            chi2 += (obs as f64 - exp).powi(2) / exp;
        }
        assert!(chi2 < chi2_crit_01((bins - 1) as f64), "chi2 = {chi2}");
    }

    #[test]
    fn exit_from_center_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = BallDomain::new(c(-0.5, 0.3), 0.6).unwrap();
        let n = 40_000;
        let mean: Complex64 =
            (0..n).map(|_| exit_sample(v.center(), &v, &mut rng).unwrap().disk).sum::<Complex64>() / n as f64;
        assert!(mean.norm() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn optional_stopping_for_arc_measure() {
        // Harmonic measure of (-1, 1) seen from z is (arg(z - 1) - arg(z + 1)) / pi.
        let h = |z: Complex64| ((z - 1.0).arg() - (z + 1.0).arg()) / PI;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = BallDomain::new(c(0.4, 1.2), 1.5).unwrap();
        let y = c(0.7, 1.0);
        let n = 50_000;
        let xs: Vec<f64> = (0..n).map(|_| h(exit_sample(y, &v, &mut rng).unwrap().point)).collect();
        let (m, se) = crate::walk::mean_stderr(&xs);
        assert!((m - h(y)).abs() <= 3.0 * se, "{m} {} {se}", h(y));
    }

    #[test]
    fn density_ratio_examples() {
        let v = BallDomain::new(c(0.0, 1.0), 1.2).unwrap();
        let u = v.uniformizer();
        let w = u.from_disk(c(0.0, 1.0));
        assert!((exit_density_ratio(v.center(), &v, w).unwrap() - 1.0).abs() < 1e-12);
        let y = u.from_disk(c(0.5, 0.0));
        let anti = u.from_disk(c(-1.0, 0.0));
        assert!((exit_density_ratio(y, &v, anti).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let near = u.from_disk(c(1.0, 0.0));
        assert!((exit_density_ratio(y, &v, near).unwrap() - 3.0).abs() < 1e-10);
        assert!(matches!(exit_density_ratio(y, &v, c(0.0, 1.0)), Err(BrownianError::NotOnBoundary(_))));
    }

    #[test]
    fn harnack_examples() {
        assert!(harnack_constant(1e-9, 1.0).unwrap() - 1.0 < 1e-8);
        // rho = 1/2 when tanh(r/2) = tanh(R/2) / 2.
        let r_v: f64 = 1.0;
        let r_f = 2.0 * ((r_v / 2.0).tanh() / 2.0).atanh();
        assert!((harnack_constant(r_f, r_v).unwrap() - 3.0).abs() < 1e-12);
        assert!(harnack_constant(1.0, 0.5).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (r_f, r_v) = (0.3, 0.9);
        let cst = harnack_constant(r_f, r_v).unwrap();
        let v = BallDomain::new(c(0.0, 1.0), r_v).unwrap();
        let u = v.uniformizer();
        for _ in 0..100_000 {
            let y = sphere_point(rng.gen_range(0.0..r_f), rng.gen_range(0.0..TAU));
            let w = u.from_disk(Complex64::from_polar(1.0, rng.gen_range(0.0..TAU)));
            let r = exit_density_ratio(y, &v, w).unwrap();
            assert!(r < cst && r > 1.0 / cst);
        }
    }

    #[test]
    fn green_examples() {
        assert_eq!(green_h2(0.0), Err(BrownianError::Pole));
        let d: f64 = 1e-6;
        assert!((green_h2(d).unwrap() + (d / 2.0).ln() / TAU).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for k in 1..50 {
            let g = green_h2(0.2 * k as f64).unwrap();
            assert!(g < prev && g > 0.0);
            prev = g;
        }
        assert!(green_h2(40.0).unwrap() < 1e-15);
    }

    #[test]
    fn annulus_hitting_matches_green_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (eps, r_out) = (0.05, 1.5);
        for d in [0.2, 0.6] {
            let n = 20_000;
            let hits = (0..n)
                .filter(|_| annulus_hits_inner(sphere_point(d, rng.gen_range(0.0..TAU)), eps, r_out, 1e-4, &mut rng))
                .count();
            let p = hits as f64 / n as f64;
            let exact = annulus_hit_probability(d, eps, r_out);
            assert!((p - exact).abs() <= 0.05 * exact, "{p} vs {exact}");
        }
    }

    #[test]
    fn walk_on_spheres_examples() {
        let cfg = WosConfig::new(0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let hit = walk_on_spheres_until_hit_f(&Word::empty(), c(0.0, 1.05), &cfg, &mut rng, None).unwrap();
        assert_eq!(hit.steps, 0);
        assert!(hit.site.is_empty());
        assert!((halfplane_distance(hit.local, c(0.0, 1.0)) - 0.2).abs() < 1e-10);

        let mut trace = Vec::new();
        let start = c(0.9, 0.6);
        let hit = walk_on_spheres_until_hit_f(&"ab".parse().unwrap(), start, &cfg, &mut rng, Some(&mut trace)).unwrap();
        assert!(hit.steps > 0);
        assert_eq!(trace.len(), hit.steps + 1);
        assert!((halfplane_distance(hit.local, c(0.0, 1.0)) - 0.2).abs() < 1e-10);

        let tiny = WosConfig { max_steps: 1, ..cfg };
        let far = walk_on_spheres_until_hit_f(&Word::empty(), c(0.5, 40.0), &tiny, &mut rng, None);
        assert!(matches!(far, Err(BrownianError::Budget { steps: 1, .. })));
    }

    fn site_frequencies(seed: u64, shell: f64, n: usize) -> BTreeMap<Word, f64> {
        let cfg = WosConfig { shell, ..WosConfig::new(0.2) };
        let mut counts: BTreeMap<Word, f64> = BTreeMap::new();
        for r in 0..n as u64 {
            let mut rng = crate::par::stream_rng(seed, r);
            let h = walk_on_spheres_until_hit_f(&Word::empty(), c(0.5, 0.9), &cfg, &mut rng, None).unwrap();
            *counts.entry(h.site).or_default() += 1.0 / n as f64;
        }
        counts
    }

    fn agree(a: &BTreeMap<Word, f64>, b: &BTreeMap<Word, f64>, n: f64) -> bool {
        a.keys().chain(b.keys()).all(|k| {
            let (p, q) = (a.get(k).copied().unwrap_or(0.0), b.get(k).copied().unwrap_or(0.0));
            let s = ((p * (1.0 - p) + q * (1.0 - q)) / n).sqrt();
            (p - q).abs() <= 3.0 * s + 2.0 / n
        })
    }

    #[test]
    fn hit_sites_reproducible_and_stable_in_shell() {
        let n = 4000;
        let a = site_frequencies(1, 2e-4, n);
        let b = site_frequencies(2, 2e-4, n);
        let c = site_frequencies(3, 2e-3, n);
        assert!(agree(&a, &b, n as f64));
        assert!(agree(&a, &c, n as f64));
        assert_eq!(site_frequencies(1, 2e-4, 200), site_frequencies(1, 2e-4, 200));
    }
}
