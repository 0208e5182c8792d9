//! Property checks with pinned tolerances, shared by the command-line driver
//! and the acceptance target. Every check is seeded and deterministic.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::boundary::{
    busemann, busemann_limit_oracle, martin_kernel, separating_orbit_point, volume_entropy, BoundaryPoint,
};
use crate::brownian::{exit_density_ratio, sphere_point, BallDomain};
use crate::falgebra::{Field, Scalar};
use crate::hypspace::{
    bisector_cosh_defect, cosh_distance, curvature_spectrum, distance, fline, geodesic, geodesic_velocity, project,
    GeometryError, Isometry, Point, Space, Tangent,
};
use crate::lattice::{
    boundary_point, busemann_min_over_orbit, graded_points, orbit, origin, to_hyperboloid, HalfPlaneBoundary,
    OrbitPoint, Word,
};
use crate::lyossul::{
    build_ls_data, center_exit_angles, empirical_harmonicity, harmonic_measure_arc, ks_two_sample, ls_discretize,
    recurrence_test, reflection_asymmetry, LSData, LsConfig, LsError, LsRun, MeasureMetadata, RadialConfig, TEST_ARCS,
};
use crate::par::{stream_rng, Exec};
use crate::walk::{harmonicity_defect, is_nondegenerate, site, GreenConfig, GreenTable, MeasureFamily};

/// Outcome of one property check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub passed: bool,
    /// The quantity compared against `tolerance` (worst case over instances).
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn new(id: impl Into<String>, passed: bool, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Check { id: id.into(), passed, value, tolerance, detail: detail.into() }
    }

    /// `value <= tolerance`.
    fn at_most(id: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self::new(id, value <= tolerance, value, tolerance, detail)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} value={:.3e} tol={:.1e} {}", self.id, self.value, self.tolerance, self.detail)
    }
}

fn label(space: Space) -> String {
    format!("{},{}", space.field, space.k)
}

/// `H^k_F` for every field and `k = 1, 2, 3`.
pub fn standard_spaces() -> Vec<Space> {
    Field::ALL.iter().flat_map(|&f| (1..=3).map(move |k| Space { field: f, k })).collect()
}

fn rng_for(seed: u64, tag: &str, space: Option<Space>) -> ChaCha8Rng {
    // Streams are keyed by a stable hash of the check name and the space.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let extra = space.map(label).unwrap_or_default();
    for b in tag.bytes().chain(extra.bytes()) {
        h = (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3);
    }
    stream_rng(seed, h)
}

/// `cosh d(y, z) = cosh d(y, pi z) cosh d(pi z, z)` for `y` on the `F`-line.
pub fn projection_identity(space: Space, n: usize, seed: u64) -> Result<Check, GeometryError> {
    let mut rng = rng_for(seed, "projection", Some(space));
    let mut worst = 0.0f64;
    for _ in 0..n {
        let (y1, y2) = (space.random_point(2.0, &mut rng), space.random_point(2.0, &mut rng));
        let line = fline(&y1, &y2)?;
        let y = project(&space.random_point(2.0, &mut rng), &line)?;
        let z = space.random_point(2.0, &mut rng);
        let pz = project(&z, &line)?;
        let r = cosh_distance(&y, &z)? - cosh_distance(&y, &pz)? * cosh_distance(&pz, &z)?;
        worst = worst.max(r.abs());
    }
    Ok(Check::at_most(format!("geometry.projection_identity[{}]", label(space)), worst, 1e-9, format!("{n} instances")))
}

/// Eigenvalues of `u -> R(u, v) v`: `-4` with multiplicity `d - 1`, `-1` with `m - d`.
pub fn curvature_check(space: Space, n: usize, seed: u64) -> Result<Check, GeometryError> {
    let mut rng = rng_for(seed, "curvature", Some(space));
    let d = space.field.dim();
    let mut expected = vec![-4.0; d - 1];
    expected.extend(vec![-1.0; space.real_dim() - d]);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let x = space.random_point(2.0, &mut rng);
        let v = space.random_unit_tangent(&x, &mut rng);
        let eig = curvature_spectrum(&v)?;
        if eig.len() != expected.len() {
            return Ok(Check::new(
                format!("geometry.curvature_spectrum[{}]", label(space)),
                false,
                f64::INFINITY,
                1e-8,
                format!("expected {} eigenvalues, got {}", expected.len(), eig.len()),
            ));
        }
        for (a, b) in eig.iter().zip(&expected) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(Check::at_most(
        format!("geometry.curvature_spectrum[{}]", label(space)),
        worst,
        1e-8,
        format!("{n} instances, -4 x{}, -1 x{}", d - 1, space.real_dim() - d),
    ))
}

/// A point whose projection onto `L(y1, y2)` is on the bisector: move from
/// the midpoint inside `L` orthogonally to the segment, then off `L`
/// along a normal direction.
pub fn bisector_sample(space: Space, y1: &Point, y2: &Point, rng: &mut impl Rng) -> Result<Point, GeometryError> {
    let line = fline(y1, y2)?;
    let frame = line.frame();
    let half = distance(y1, y2)? / 2.0;
    let m = geodesic(frame, half);
    let v = geodesic_velocity(frame, half);
    let mut za = m.clone();
    if space.field != Field::R {
        let mut q = [0.0; 4];
        for c in q.iter_mut().take(space.field.dim()).skip(1) {
            *c = rng.gen_range(-1.0..1.0);
        }
        let q = Scalar::new(space.field, q);
        let q = q.scale(1.0 / q.abs());
        za = geodesic(&Tangent::new(m, v.dir().mul_right(q))?, rng.gen_range(-1.0..1.0));
    }
    if space.k == 1 {
        return Ok(za);
    }
    let (p0, w0) = (frame.base().lift(), frame.dir());
    let reals: Vec<f64> = (0..(space.k + 1) * space.field.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let r = crate::hypspace::HVec::from_reals(space.field, &reals);
    let normal = r.add(&p0.mul_right(p0.form(&r))).sub(&w0.mul_right(w0.form(&r)));
    let nn = normal.re_form(&normal);
    let dir = normal.scale(1.0 / nn.sqrt());
    Ok(geodesic(&Tangent::new(za, dir)?, rng.gen_range(0.0..1.5)))
}

/// Bisector membership of `z` agrees with that of `pi z` when the tolerance
/// on the `cosh`-defect is scaled by `cosh d(z, pi z)`.
pub fn bisector_equivalence(space: Space, n: usize, tol: f64, seed: u64) -> Result<Check, GeometryError> {
    let mut rng = rng_for(seed, "bisector", Some(space));
    let (mut mismatches, mut on_bisector) = (0usize, 0usize);
    let mut worst = 0.0f64;
    for i in 0..n {
        let (y1, y2) = (space.random_point(2.0, &mut rng), space.random_point(2.0, &mut rng));
        let line = fline(&y1, &y2)?;
        let constructed = i % 2 == 0;
        let z =
            if constructed { bisector_sample(space, &y1, &y2, &mut rng)? } else { space.random_point(2.5, &mut rng) };
        let pz = project(&z, &line)?;
        let c = cosh_distance(&z, &pz)?;
        let (dz, dp) = (bisector_cosh_defect(&z, &y1, &y2)?, bisector_cosh_defect(&pz, &y1, &y2)?);
        worst = worst.max((dz - c * dp).abs() / c);
        let (mz, mp) = (dz.abs() <= tol * c, dp.abs() <= tol);
        if mz != mp || (constructed && !mz) {
            mismatches += 1;
        }
        on_bisector += usize::from(mz);
    }
    Ok(Check::new(
        format!("geometry.bisector_equivalence[{}]", label(space)),
        mismatches == 0 && worst <= tol,
        worst,
        tol,
        format!("{n} triples, {on_bisector} on the bisector, {mismatches} mismatches"),
    ))
}

/// Distances are unchanged by random form-preserving maps.
pub fn isometry_invariance(space: Space, n: usize, seed: u64) -> Result<Check, GeometryError> {
    let mut rng = rng_for(seed, "isometry", Some(space));
    let mut worst = 0.0f64;
    for _ in 0..n {
        let g = Isometry::random(space, &mut rng, 4);
        let (x, y) = (space.random_point(2.0, &mut rng), space.random_point(2.0, &mut rng));
        worst = worst.max((distance(&g.apply(&x), &g.apply(&y))? - distance(&x, &y)?).abs());
    }
    Ok(Check::at_most(format!("geometry.isometry_invariance[{}]", label(space)), worst, 1e-9, format!("{n} pairs")))
}

/// Closed-form Busemann function against `d(x, c(20)) - 20`.
pub fn busemann_oracle(space: Space, n: usize, seed: u64) -> Result<Check, GeometryError> {
    let mut rng = rng_for(seed, "busemann", Some(space));
    let o = space.origin();
    let mut worst = 0.0f64;
    for _ in 0..n {
        let xi = BoundaryPoint::random(space, &o, &mut rng);
        let x = space.random_point(3.0, &mut rng);
        worst = worst.max((busemann_limit_oracle(&x, &xi, &o, 20.0)? - busemann(&x, &xi)).abs());
    }
    Ok(Check::at_most(
        format!("boundary.busemann_oracle[{}]", label(space)),
        worst,
        1e-6,
        format!("{n} instances, t = 20"),
    ))
}

/// `K(x, xi)` on `H^2_R` against the disk Poisson kernel `(1 - |x|^2) / |x - xi|^2`.
pub fn poisson_kernel_match(n: usize, seed: u64) -> Check {
    let space = Space { field: Field::R, k: 2 };
    let mut rng = rng_for(seed, "poisson", None);
    let o = space.origin();
    let mut worst = 0.0f64;
    for _ in 0..n {
        let xi = BoundaryPoint::random(space, &o, &mut rng);
        let x = space.random_point(3.0, &mut rng);
        let l = x.lift().reals();
        let xd = Complex64::new(l[0], l[1]) / (1.0 + l[2]);
        let e = xi.lift().reals();
        let ed = Complex64::new(e[0], e[1]) / e[2];
        let poisson = (1.0 - xd.norm_sqr()) / (xd - ed).norm_sqr();
        worst = worst.max((martin_kernel(&x, &xi) - poisson).abs() / poisson);
    }
    Check::at_most("boundary.poisson_kernel[R,2]", worst, 1e-9, format!("{n} instances, relative"))
}

/// `h = m + d - 2` for the three planes.
pub fn exponent_table() -> Check {
    let got: Vec<f64> = Field::ALL.iter().map(|&f| volume_entropy(Space { field: f, k: 2 })).collect();
    let err = got.iter().zip([1.0, 4.0, 10.0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Check::at_most("boundary.kernel_exponents", err, 0.0, format!("H2_R, CH2, HH2 -> {got:?}"))
}

/// Separating orbit points for random boundary pairs, plus the `(inf, 0)` fixture.
pub fn separation_checks(pairs: usize, depth: usize, seed: u64, exec: Exec) -> Vec<Check> {
    let space = Space { field: Field::R, k: 2 };
    let o = origin();
    let cands = graded_points(&orbit(Complex64::new(0.0, 1.0), depth, exec));
    let mut rng = rng_for(seed, "separation", None);
    let (mut found, mut min_margin) = (0usize, f64::INFINITY);
    let mut tried = 0usize;
    while tried < pairs {
        let (xi, eta) = (BoundaryPoint::random(space, &o, &mut rng), BoundaryPoint::random(space, &o, &mut rng));
        if xi.coincides(&eta) {
            continue;
        }
        tried += 1;
        if let Ok(s) = separating_orbit_point(&xi, &eta, &cands, 1e-3) {
            found += 1;
            min_margin = min_margin.min(s.margin);
        }
    }
    let random = Check::new(
        "boundary.separation_random",
        found == pairs,
        min_margin,
        1e-3,
        format!("{found}/{pairs} pairs separated on the depth-{depth} orbit; value is the smallest margin"),
    );
    vec![random, separation_fixture(exec)]
}

/// The pair `(inf, 0)` on the depth-4 orbit: witness `2 + i` with margin `log 5`.
pub fn separation_fixture(exec: Exec) -> Check {
    let fixture_cands = graded_points(&orbit(Complex64::new(0.0, 1.0), 4, exec));
    let (inf, zero) = (boundary_point(HalfPlaneBoundary::Infinity), boundary_point(HalfPlaneBoundary::Real(0.0)));
    match separating_orbit_point(&inf, &zero, &fixture_cands, 1e-3) {
        Ok(s) => {
            let z = crate::lattice::from_hyperboloid(&s.point).unwrap_or_default();
            let err = (s.margin - 5f64.ln()).abs();
            Check::at_most("boundary.separation_fixture", err, 1e-12, format!("witness {z}, margin {}", s.margin))
        }
        Err(e) => Check::new("boundary.separation_fixture", false, f64::INFINITY, 1e-12, e.to_string()),
    }
}

/// A random finite-support measure containing all four generators.
pub fn random_measure(rng: &mut impl Rng) -> MeasureFamily {
    let mut entries: Vec<(Word, f64)> =
        crate::lattice::Letter::ALL.iter().map(|&l| (Word::letter(l), rng.gen_range(0.2..1.0))).collect();
    for _ in 0..rng.gen_range(0..4) {
        let len = rng.gen_range(2..=3);
        let letters: Vec<_> = (0..len).map(|_| crate::lattice::Letter::from_index(rng.gen_range(0..4))).collect();
        let w = Word::reduce(&letters);
        if !w.is_empty() {
            entries.push((w, rng.gen_range(0.05..0.5)));
        }
    }
    let total: f64 = entries.iter().map(|e| e.1).sum();
    MeasureFamily::new(entries.into_iter().map(|(w, p)| (w, p / total))).expect("normalized")
}

/// Cusps of `Gamma(2)` as boundary points.
pub fn cusps() -> [(&'static str, HalfPlaneBoundary); 3] {
    [("inf", HalfPlaneBoundary::Infinity), ("0", HalfPlaneBoundary::Real(0.0)), ("1", HalfPlaneBoundary::Real(1.0))]
}

/// Defect of the uniform measure at `e` for the cusp at infinity, and strict
/// negativity at every truncated Busemann minimizer for random measures.
pub fn cusp_defect_checks(n_measures: usize, depth: usize, seed: u64, exec: Exec) -> Vec<Check> {
    let inf = boundary_point(HalfPlaneBoundary::Infinity);
    let d = harmonicity_defect(&MeasureFamily::uniform_generators(), &inf, &Word::empty());
    let uniform = Check::at_most("walk.cusp_defect_uniform", (d + 0.4).abs(), 1e-12, format!("defect {d}"));

    let orb = orbit(Complex64::new(0.0, 1.0), depth, exec);
    let pts: Vec<Point> = orb.iter().map(|o| to_hyperboloid(o.point)).collect();
    let minimizers: Vec<(BoundaryPoint, Vec<Word>)> = cusps()
        .iter()
        .map(|(_, c)| {
            let xi = boundary_point(*c);
            let (idx, _) = busemann_min_over_orbit(&xi, &pts);
            (xi, idx.into_iter().map(|i| orb[i].word.clone()).collect())
        })
        .collect();
    let mut rng = rng_for(seed, "cusp-defect", None);
    let (mut worst, mut evaluated, mut degenerate) = (f64::NEG_INFINITY, 0usize, 0usize);
    for _ in 0..n_measures {
        let mu = random_measure(&mut rng);
        let nd = is_nondegenerate(&mu, 3);
        if !(nd.semigroup_reach && nd.generates_group) {
            degenerate += 1;
        }
        for (xi, words) in &minimizers {
            for w in words {
                worst = worst.max(harmonicity_defect(&mu, xi, w));
                evaluated += 1;
            }
        }
    }
    let random = Check::new(
        "walk.cusp_defect_negative",
        worst < 0.0 && degenerate == 0,
        worst,
        0.0,
        format!(
            "{n_measures} measures x {evaluated} minimizer evaluations over cusps inf, 0, 1 (depth {depth}); value is the largest defect"
        ),
    );
    vec![uniform, random]
}

/// Truncated SRW Green's function on `F_2` against `3/2` and `1/2`.
pub fn green_srw_check(horizon: usize, ball_radius: usize, tol: f64, exec: Exec) -> Check {
    let t = GreenTable::compute(
        &MeasureFamily::uniform_generators(),
        GreenConfig { horizon, ball_radius, prune: 1e-15 },
        exec,
    );
    let e = Word::empty();
    let gee = t.g(&e, &e).expect("in ball").value;
    let gea = t.g(&e, &Word::letter(crate::lattice::Letter::A)).expect("in ball").value;
    let err = (gee - 1.5).abs().max((gea - 0.5).abs());
    Check::at_most(
        format!("walk.green_srw[N={horizon}]"),
        err,
        tol,
        format!("g(e,e) = {gee:.12}, g(e,a) = {gea:.12}, ball radius {ball_radius}"),
    )
}

/// Ball data with `r_F = 0.1 s0`, `R_V = 0.4 s0` for the orbit separation `s0`.
pub fn default_ls_data(orbit_pts: &[OrbitPoint], radial: &RadialConfig, exec: Exec) -> Result<LSData, LsError> {
    let (s0, _) = crate::lattice::orbit_separation(orbit_pts, exec);
    build_ls_data(orbit_pts, 0.1 * s0, 0.4 * s0, radial, exec)
}

/// Axiom checks for ball data: containment and disjointness, the Harnack
/// bound on sampled density ratios, the radial certificate and recurrence.
pub fn ls_data_checks(
    data: &LSData,
    orbit_pts: &[OrbitPoint],
    ratio_samples: usize,
    recurrence_trials: u64,
    seed: u64,
    exec: Exec,
) -> Vec<Check> {
    let mut out = Vec::new();
    let d2 = data.r_f + data.r_v < data.separation;
    out.push(Check::new(
        "ls.d1_d2",
        data.r_f > 0.0 && data.r_f < data.r_v && d2,
        data.r_f + data.r_v,
        data.separation,
        format!("r_F = {:.6}, R_V = {:.6}, separation {:.6}", data.r_f, data.r_v, data.separation),
    ));
    let too_big = build_ls_data(orbit_pts, data.separation / 2.0, data.separation, &RadialConfig::default(), exec);
    out.push(Check::new(
        "ls.d2_rejects_overlap",
        matches!(too_big, Err(LsError::Overlap { .. })),
        0.0,
        0.0,
        match too_big {
            Err(e) => e.to_string(),
            Ok(_) => "overlapping radii accepted".into(),
        },
    ));

    let v = BallDomain::new(Complex64::new(0.0, 1.0), data.r_v).expect("positive radius");
    let u = v.uniformizer();
    let mut rng = rng_for(seed, "harnack", None);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..ratio_samples {
        let y = sphere_point(data.r_f * rng.gen::<f64>().sqrt().max(1e-12), rng.gen_range(0.0..TAU));
        let w = u.from_disk(Complex64::from_polar(1.0, rng.gen_range(0.0..TAU)));
        let r = exit_density_ratio(y, &v, w).expect("valid sample");
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let c = data.harnack;
    out.push(Check::new(
        "ls.d4_harnack",
        lo > 1.0 / c && hi < c,
        hi,
        c,
        format!("{ratio_samples} ratios in [{lo:.6}, {hi:.6}], bounds ({:.6}, {c:.6})", 1.0 / c),
    ));
    let cert = &data.certificate;
    out.push(Check::at_most(
        "ls.d5_radial",
        cert.max_z,
        3.0,
        format!(
            "8 points x {} samples, pooled {:.5}, closed form {:.5} (max z vs closed form {:.2})",
            cert.samples_per_point, cert.pooled, cert.expected, cert.max_z_expected
        ),
    ));
    let rec = recurrence_test(data, recurrence_trials, 100_000, seed, exec);
    out.push(Check::new(
        "ls.d3_recurrence",
        rec.fraction >= 0.99,
        rec.fraction,
        0.99,
        format!("{}/{} walks reached F within 100000 steps", rec.hits, rec.trials),
    ));
    out
}

/// Serialized measure for byte comparisons.
pub fn measure_bytes(data: &LSData, run: &LsRun, seed: u64) -> Vec<u8> {
    let mut buf = Vec::new();
    run.measure.write_jsonl(&mut buf, &MeasureMetadata::new(data, seed, &run.measure)).expect("in-memory write");
    buf
}

/// Discretization checks: truncation, bounded-harmonic residuals, the
/// accepted-exit law and reproducibility.
pub fn ls_run_checks(data: &LSData, runs: u64, seed: u64, exec: Exec) -> Result<(LsRun, Vec<Check>), LsError> {
    let cfg = LsConfig::default();
    let run = ls_discretize(data, &cfg, runs, seed, exec)?;
    let mut out = Vec::new();
    let tm = run.measure.truncation_mass();
    out.push(Check::new(
        "ls.truncation",
        tm < 0.01,
        tm,
        0.01,
        format!("{} of {runs} runs truncated", run.measure.truncated()),
    ));
    for arc in TEST_ARCS {
        let h = empirical_harmonicity(&run.measure, |w| harmonic_measure_arc(site(w), arc).expect("valid arc"), true);
        out.push(Check::at_most(
            format!("ls.harmonic_residual[{arc:?}]"),
            h.z_score.abs(),
            3.0,
            format!("residual {:.3e} +- {:.3e}", h.residual, h.stderr),
        ));
    }
    let accepted: Vec<f64> = run.accepted_angles().into_iter().take(10_000).collect();
    let direct = center_exit_angles(data.r_v, accepted.len() as u64, seed ^ 0x5eed, exec);
    let ks = ks_two_sample(&accepted, &direct);
    out.push(Check::new(
        "ls.accepted_exit_law",
        ks.p_value > 0.01 && accepted.len() >= 10_000,
        ks.p_value,
        0.01,
        format!("two-sample KS on {} accepted exits, D = {:.4}", accepted.len(), ks.statistic),
    ));
    let again = ls_discretize(data, &cfg, runs, seed, exec)?;
    let same = measure_bytes(data, &run, seed) == measure_bytes(data, &again, seed);
    out.push(Check::new("ls.reproducible", same, 0.0, 0.0, "rerun with the same seed is byte-identical"));
    let asym = reflection_asymmetry(&run.measure);
    let d = &run.diagnostics;
    out.push(Check::new(
        "ls.acceptance_bounds",
        d.min_accept > 1.0 / (data.harnack * data.harnack) && d.max_accept <= 1.0,
        d.acceptance_rate,
        d.acceptance_expected,
        format!(
            "per-encounter acceptance in [{:.4}, {:.4}], rate {:.4} vs 1/C = {:.4}; reflection asymmetry max z {asym:.2}; tail mass beyond length 6: {:.2e}",
            d.min_accept,
            d.max_accept,
            d.acceptance_rate,
            d.acceptance_expected,
            run.measure.tail_mass(6)
        ),
    ));
    Ok((run, out))
}
