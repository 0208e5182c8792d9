//! Command implementations. Each returns its primary output and optional
//! sidecar files as bytes; nothing here touches the filesystem except
//! reading an input measure.

use std::fs::File;
use std::io::{BufReader, Write};

use num_complex::Complex64;
use serde_json::{json, Value};
use thiserror::Error;

use hyperwalk::boundary::{
    foliation_coordinate, martin_kernel, separating_orbit_point, volume_entropy, BoundaryPoint, GeodesicLine,
};
use hyperwalk::hypspace::{curvature_spectrum, distance, fline, write_points_csv, GeometryError, Point};
use hyperwalk::lattice::{
    boundary_point, busemann_min_over_orbit, from_boundary_point, from_hyperboloid, graded_points, orbit,
    to_hyperboloid, words_up_to, HalfPlaneBoundary, OrbitPoint, Word,
};
use hyperwalk::lyossul::{
    center_exit_angles, empirical_harmonicity, harmonic_measure_arc, ks_two_sample, ls_discretize, moment_entropy,
    reflection_asymmetry, LSData, LsConfig, LsError, MeasureMetadata, RadialConfig, TEST_ARCS,
};
use hyperwalk::par::{stream_rng, Exec};
use hyperwalk::suite::{self, Check};
use hyperwalk::walk::{
    harmonicity_defect, is_nondegenerate, site, write_green_csv, GreenConfig, GreenTable, MeasureFamily, WalkError,
};
use hyperwalk::Space;

use crate::config::RunConfig;

pub const REPORT_SCHEMA: &str = "hyperwalk-report/1";
pub const TRACE_SCHEMA: &str = "hyperwalk-trace/1";

/// Orbit truncation used for ball data; the separation is attained by short words.
const LS_ORBIT_DEPTH: usize = 4;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Ls(#[from] LsError),
    #[error("cannot read measure {path}: {source}")]
    Measure { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    VerifyGeometry,
    RootsCheck,
    BisectorCloud,
    WalkGreen,
    CuspDefect,
    Separate,
    LsCheck,
    LsRun,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyGeometry => "verify-geometry",
            Command::RootsCheck => "roots-check",
            Command::BisectorCloud => "bisector-cloud",
            Command::WalkGreen => "walk-green",
            Command::CuspDefect => "cusp-defect",
            Command::Separate => "separate",
            Command::LsCheck => "ls-check",
            Command::LsRun => "ls-run",
            Command::Report => "report",
        }
    }
}

pub struct Outcome {
    pub primary: Vec<u8>,
    /// `(extension, bytes)`, written next to `--out`.
    pub sidecars: Vec<(&'static str, Vec<u8>)>,
    pub checks: Vec<Check>,
    /// Whether failed checks make the process exit non-zero.
    pub strict: bool,
}

fn report(cmd: Command, cfg: &RunConfig, checks: &[Check], data: Value) -> Vec<u8> {
    let doc = json!({
        "schema": REPORT_SCHEMA,
        "command": cmd.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config": cfg,
        "passed": checks.iter().all(|c| c.passed),
        "checks": checks,
        "data": data,
    });
    let mut out = serde_json::to_vec_pretty(&doc).expect("report serializes");
    out.push(b'\n');
    out
}

fn outcome(cmd: Command, cfg: &RunConfig, checks: Vec<Check>, data: Value) -> Outcome {
    Outcome { primary: report(cmd, cfg, &checks, data), sidecars: Vec::new(), checks, strict: true }
}

fn space(cfg: &RunConfig) -> Space {
    Space { field: cfg.field, k: cfg.dim }
}

fn boundary_label(b: HalfPlaneBoundary) -> Value {
    match b {
        HalfPlaneBoundary::Infinity => json!("inf"),
        HalfPlaneBoundary::Real(x) => json!(x),
    }
}

fn load_measure(cfg: &RunConfig) -> Result<(MeasureFamily, String), CommandError> {
    match &cfg.measure {
        None => Ok((MeasureFamily::uniform_generators(), "uniform generators".into())),
        Some(p) => {
            let path = p.display().to_string();
            let f = File::open(p).map_err(|source| CommandError::Measure { path: path.clone(), source })?;
            Ok((MeasureFamily::read_jsonl(BufReader::new(f))?, path))
        }
    }
}

pub fn run(cmd: Command, cfg: &RunConfig, exec: Exec) -> Result<Outcome, CommandError> {
    match cmd {
        Command::VerifyGeometry => verify_geometry(cfg),
        Command::RootsCheck => roots_check(cfg),
        Command::BisectorCloud => bisector_cloud(cfg),
        Command::WalkGreen => walk_green(cfg, exec),
        Command::CuspDefect => cusp_defect(cfg, exec),
        Command::Separate => separate(cfg, exec),
        Command::LsCheck => ls_check(cfg, exec),
        Command::LsRun => ls_run(cfg, exec),
        Command::Report => full_report(cfg, exec),
    }
}

fn verify_geometry(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let s = space(cfg);
    let n = cfg.samples.unwrap_or(1000) as usize;
    let checks = vec![
        suite::projection_identity(s, n, cfg.seed)?,
        suite::curvature_check(s, (n / 10).max(1), cfg.seed)?,
        suite::bisector_equivalence(s, n, cfg.tol.unwrap_or(1e-9), cfg.seed)?,
        suite::isometry_invariance(s, n, cfg.seed)?,
        suite::busemann_oracle(s, n, cfg.seed)?,
    ];
    let data = json!({ "space": format!("H^{}_{}", s.k, s.field), "real_dim": s.real_dim() });
    Ok(outcome(Command::VerifyGeometry, cfg, checks, data))
}

fn roots_check(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let s = space(cfg);
    let n = cfg.samples.unwrap_or(100) as usize;
    let checks = vec![suite::curvature_check(s, n, cfg.seed)?, suite::exponent_table()];
    let mut rng = stream_rng(cfg.seed, 0);
    let x = s.random_point(2.0, &mut rng);
    let sample = curvature_spectrum(&s.random_unit_tangent(&x, &mut rng))?;
    let (m, d) = (s.real_dim(), s.field.dim());
    let data = json!({
        "real_dim": m,
        "field_dim": d,
        "multiplicity_minus_4": d - 1,
        "multiplicity_minus_1": m - d,
        "volume_entropy": volume_entropy(s),
        "sample_spectrum": sample,
    });
    Ok(outcome(Command::RootsCheck, cfg, checks, data))
}

/// Points on the bisector of two random points, with their leaf coordinate
/// along the geodesic through the pair.
fn bisector_cloud(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let s = space(cfg);
    let n = cfg.samples.unwrap_or(1000) as usize;
    let mut rng = stream_rng(cfg.seed, 0);
    let (y1, y2) = (s.random_point(2.0, &mut rng), s.random_point(2.0, &mut rng));
    let line = GeodesicLine::new(fline(&y1, &y2)?.frame().clone());
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let z = suite::bisector_sample(s, &y1, &y2, &mut rng)?;
        worst = worst.max((distance(&z, &y1)? - distance(&z, &y2)?).abs());
        pts.push(z);
    }
    let t: Vec<f64> = pts.iter().map(|z| foliation_coordinate(z, &line)).collect();
    let mut csv = Vec::new();
    write_points_csv(&mut csv, &pts, Some(("t", &t))).expect("in-memory write");
    let check = Check {
        id: format!("geometry.bisector_cloud[{},{}]", s.field, s.k),
        passed: worst <= 1e-9,
        value: worst,
        tolerance: 1e-9,
        detail: format!("{n} points, largest |d(z,y1) - d(z,y2)|"),
    };
    Ok(Outcome { primary: csv, sidecars: Vec::new(), checks: vec![check], strict: true })
}

fn walk_green(cfg: &RunConfig, exec: Exec) -> Result<Outcome, CommandError> {
    let (mu, label) = load_measure(cfg)?;
    let gcfg = GreenConfig { horizon: cfg.horizon, ball_radius: cfg.ball_radius, ..GreenConfig::default() };
    let table = GreenTable::compute(&mu, gcfg, exec);
    let e = Word::empty();
    let mut rows = Vec::new();
    for y in words_up_to(2) {
        rows.push((e.clone(), y.clone(), cfg.horizon, table.g(&e, &y)?.value));
    }
    let mut csv = Vec::new();
    write_green_csv(&mut csv, &rows).expect("in-memory write");
    let mut checks = Vec::new();
    if cfg.measure.is_none() {
        let tol = cfg.tol.unwrap_or(1e-6);
        let (gee, gea) = (rows[0].3, rows[1].3);
        let err = (gee - 1.5).abs().max((gea - 0.5).abs());
        checks.push(Check {
            id: format!("walk.green_srw[N={}]", cfg.horizon),
            passed: err <= tol,
            value: err,
            tolerance: tol,
            detail: format!("g(e,e) = {gee:.12}, g(e,a) = {gea:.12}"),
        });
    }
    let data = json!({
        "measure": label,
        "nondegeneracy": is_nondegenerate(&mu, 3),
        "diagnostics": table.diagnostics(),
        "green_from_e": rows.iter().map(|r| json!({ "y": r.1, "value": r.3 })).collect::<Vec<_>>(),
    });
    let mut out = outcome(Command::WalkGreen, cfg, checks, data);
    out.sidecars.push(("green.csv", csv));
    Ok(out)
}

fn cusp_defect(cfg: &RunConfig, exec: Exec) -> Result<Outcome, CommandError> {
    let (mu, label) = load_measure(cfg)?;
    let nd = is_nondegenerate(&mu, 3);
    let degenerate = !(nd.semigroup_reach && nd.generates_group);
    let orb = orbit(Complex64::new(0.0, 1.0), cfg.depth, exec);
    let pts: Vec<Point> = orb.iter().map(|o| to_hyperboloid(o.point)).collect();
    let mut checks = vec![Check {
        id: "walk.nondegenerate".into(),
        passed: !degenerate,
        value: f64::from(u8::from(degenerate)),
        tolerance: 0.0,
        detail: format!("semigroup reach {}, generates group {}", nd.semigroup_reach, nd.generates_group),
    }];
    let mut cusps = Vec::new();
    for (name, c) in suite::cusps() {
        let xi = boundary_point(c);
        let (idx, min) = busemann_min_over_orbit(&xi, &pts);
        let words: Vec<&Word> = idx.iter().map(|&i| &orb[i].word).collect();
        let defects: Vec<f64> = words.iter().map(|w| harmonicity_defect(&mu, &xi, w)).collect();
        let inconclusive = words.iter().all(|w| w.len() >= cfg.depth);
        let worst = defects.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check {
            id: format!("walk.cusp_defect[{name}]"),
            passed: worst < 0.0 && !degenerate && !inconclusive,
            value: worst,
            tolerance: 0.0,
            detail: format!("{} minimizers at depth {}", words.len(), cfg.depth),
        });
        cusps.push(json!({
            "cusp": name,
            "min_busemann": min,
            "inconclusive": inconclusive,
            "minimizers": words.iter().zip(&defects).map(|(w, d)| json!({ "word": w, "defect": d })).collect::<Vec<_>>(),
        }));
    }
    let data = json!({ "measure": label, "nondegeneracy": nd, "degenerate": degenerate, "cusps": cusps });
    Ok(outcome(Command::CuspDefect, cfg, checks, data))
}

fn separate(cfg: &RunConfig, exec: Exec) -> Result<Outcome, CommandError> {
    let n = cfg.samples.unwrap_or(100);
    let s = Space { field: hyperwalk::Field::R, k: 2 };
    let orb = orbit(Complex64::new(0.0, 1.0), cfg.depth, exec);
    let cands = graded_points(&orb);
    let o = hyperwalk::lattice::origin();
    let mut rng = stream_rng(cfg.seed, 0);
    let (mut pairs, mut skipped, mut found) = (Vec::new(), 0u64, 0u64);
    let mut min_margin = f64::INFINITY;
    for _ in 0..n {
        let (xi, eta) = (BoundaryPoint::random(s, &o, &mut rng), BoundaryPoint::random(s, &o, &mut rng));
        let ends = json!([boundary_label(from_boundary_point(&xi)), boundary_label(from_boundary_point(&eta))]);
        if xi.coincides(&eta) {
            skipped += 1;
            continue;
        }
        match separating_orbit_point(&xi, &eta, &cands, 1e-3) {
            Ok(sep) => {
                found += 1;
                min_margin = min_margin.min(sep.margin);
                let z = from_hyperboloid(&sep.point).unwrap_or_default();
                pairs.push(json!({
                    "pair": ends,
                    "witness": orb[sep.index].word,
                    "x": z.re,
                    "y": z.im,
                    "margin": sep.margin,
                }));
            }
            Err(e) => pairs.push(json!({ "pair": ends, "inconclusive": e.to_string() })),
        }
    }
    let compared = n - skipped;
    let checks = vec![
        Check {
            id: "boundary.separation_random".into(),
            passed: found == compared,
            value: min_margin,
            tolerance: 1e-3,
            detail: format!("{found}/{compared} pairs separated at depth {}; value is the smallest margin", cfg.depth),
        },
        suite::separation_fixture(exec),
    ];
    let data = json!({ "depth": cfg.depth, "skipped_equal": skipped, "pairs": pairs });
    Ok(outcome(Command::Separate, cfg, checks, data))
}

fn ls_data(cfg: &RunConfig, exec: Exec) -> Result<(Vec<OrbitPoint>, LSData), CommandError> {
    let orb = orbit(Complex64::new(0.0, 1.0), LS_ORBIT_DEPTH, exec);
    let radial = RadialConfig { seed: cfg.seed, ..RadialConfig::default() };
    let data = match (cfg.r_f, cfg.r_v) {
        (None, None) => suite::default_ls_data(&orb, &radial, exec)?,
        (Some(f), Some(v)) => hyperwalk::lyossul::build_ls_data(&orb, f, v, &radial, exec)?,
        _ => return Err(CommandError::Usage("r_f and r_v must be given together".into())),
    };
    Ok((orb, data))
}

fn ls_check(cfg: &RunConfig, exec: Exec) -> Result<Outcome, CommandError> {
    let (orb, data) = ls_data(cfg, exec)?;
    let n = cfg.samples.unwrap_or(100_000) as usize;
    let checks = suite::ls_data_checks(&data, &orb, n, 1000, cfg.seed, exec);
    Ok(outcome(Command::LsCheck, cfg, checks, json!({ "ls_data": data })))
}

fn ls_run(cfg: &RunConfig, exec: Exec) -> Result<Outcome, CommandError> {
    let (_, data) = ls_data(cfg, exec)?;
    let ls_cfg = LsConfig { trace_runs: if cfg.trace { cfg.trace_runs } else { 0 }, ..LsConfig::default() };
    let run = ls_discretize(&data, &ls_cfg, cfg.runs, cfg.seed, exec)?;
    let m = &run.measure;
    if m.entries().is_empty() {
        return Err(LsError::EmptyMeasure.into());
    }
    let mut checks = vec![Check {
        id: "ls.truncation".into(),
        passed: m.truncation_mass() < 0.01,
        value: m.truncation_mass(),
        tolerance: 0.01,
        detail: format!("{} of {} runs truncated", m.truncated(), m.runs()),
    }];
    let mut residuals = Vec::new();
    for arc in TEST_ARCS {
        let h = empirical_harmonicity(m, |w| harmonic_measure_arc(site(w), arc).expect("valid arc"), true);
        checks.push(Check {
            id: format!("ls.harmonic_residual[{arc:?}]"),
            passed: h.z_score.abs() <= 3.0,
            value: h.z_score.abs(),
            tolerance: 3.0,
            detail: format!("residual {:.3e} +- {:.3e}", h.residual, h.stderr),
        });
        residuals.push(json!({ "arc": arc, "harmonicity": h }));
    }
    let inf = boundary_point(HalfPlaneBoundary::Infinity);
    let kernel = empirical_harmonicity(m, |w| martin_kernel(&to_hyperboloid(site(w)), &inf), false);
    let accepted: Vec<f64> = run.accepted_angles().into_iter().take(10_000).collect();
    let direct = center_exit_angles(data.r_v, accepted.len() as u64, cfg.seed ^ 0x5eed, exec);
    let ks = ks_two_sample(&accepted, &direct);
    checks.push(Check {
        id: "ls.accepted_exit_law".into(),
        passed: ks.p_value > 0.01,
        value: ks.p_value,
        tolerance: 0.01,
        detail: format!("two-sample KS on {} accepted exits, D = {:.4}", accepted.len(), ks.statistic),
    });
    let data_json = json!({
        "ls_data": data,
        "diagnostics": run.diagnostics,
        "residuals": residuals,
        "kernel_at_infinity": kernel,
        "moment_entropy": moment_entropy(m)?,
        "reflection_asymmetry": reflection_asymmetry(m),
        "support_size": m.entries().len(),
        "tail_mass_beyond_6": m.tail_mass(6),
    });
    let mut out = outcome(Command::LsRun, cfg, checks, data_json);
    let mut jsonl = Vec::new();
    m.write_jsonl(&mut jsonl, &MeasureMetadata::new(&data, cfg.seed, m)).expect("in-memory write");
    out.sidecars.push(("measure.jsonl", jsonl));
    if cfg.trace {
        out.sidecars.push(("trace.csv", trace_csv(&run.outcomes)));
    }
    Ok(out)
}

fn trace_csv(outcomes: &[hyperwalk::lyossul::RunOutcome]) -> Vec<u8> {
    let mut buf = Vec::new();
    writeln!(buf, "# schema={TRACE_SCHEMA}").unwrap();
    writeln!(buf, "path_id,step,x,y").unwrap();
    for (id, o) in outcomes.iter().enumerate().filter(|(_, o)| !o.path.is_empty()) {
        for (step, (w, local)) in o.path.iter().enumerate() {
            let z = w.evaluate().apply(*local);
            writeln!(buf, "{id},{step},{:.17e},{:.17e}", z.re, z.im).unwrap();
        }
    }
    buf
}

/// Every suite at once. Failures are recorded in the report, not in the exit code.
fn full_report(cfg: &RunConfig, exec: Exec) -> Result<Outcome, CommandError> {
    let n = cfg.samples.unwrap_or(1000) as usize;
    let mut checks = Vec::new();
    for s in suite::standard_spaces() {
        checks.push(suite::projection_identity(s, n, cfg.seed)?);
        checks.push(suite::curvature_check(s, (n / 10).max(1), cfg.seed)?);
        checks.push(suite::bisector_equivalence(s, n, cfg.tol.unwrap_or(1e-9), cfg.seed)?);
        checks.push(suite::busemann_oracle(s, (n / 5).max(1), cfg.seed)?);
    }
    checks.push(suite::poisson_kernel_match(n, cfg.seed));
    checks.push(suite::exponent_table());
    checks.extend(suite::separation_checks(100, cfg.depth, cfg.seed, exec));
    checks.extend(suite::cusp_defect_checks(20, cfg.depth, cfg.seed, exec));
    let (orb, data) = ls_data(cfg, exec)?;
    checks.extend(suite::ls_data_checks(&data, &orb, 100 * n, 1000, cfg.seed, exec));
    checks.extend(suite::ls_run_checks(&data, cfg.runs, cfg.seed, exec)?.1);
    checks.push(suite::green_srw_check(cfg.horizon, cfg.ball_radius, 1e-6, exec));
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect();
    let data = json!({ "total": checks.len(), "failed": failed });
    let mut out = outcome(Command::Report, cfg, checks, data);
    out.strict = false;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cusp_defect_flags_cyclic_measure() {
        let dir = std::env::temp_dir().join("hyperwalk-cli-cyclic.jsonl");
        std::fs::write(&dir, "{\"word\":\"a\",\"p\":0.5}\n{\"word\":\"a^-1\",\"p\":0.5}\n").unwrap();
        let cfg = RunConfig { measure: Some(dir.clone()), depth: 5, ..RunConfig::default() };
        let out = cusp_defect(&cfg, Exec::Sequential).unwrap();
        assert!(!out.checks[0].passed);
        let doc: Value = serde_json::from_slice(&out.primary).unwrap();
        assert_eq!(doc["data"]["degenerate"], json!(true));
        let d = doc["data"]["cusps"][0]["minimizers"][0]["defect"].as_f64().unwrap();
        assert!(d.abs() < 1e-12);
        std::fs::remove_file(dir).ok();
    }

    #[test]
    fn uniform_cusp_defect_is_minus_four_tenths() {
        let cfg = RunConfig { depth: 5, ..RunConfig::default() };
        let out = cusp_defect(&cfg, Exec::Sequential).unwrap();
        assert!(out.checks.iter().all(|c| c.passed));
        let doc: Value = serde_json::from_slice(&out.primary).unwrap();
        let e = &doc["data"]["cusps"][0]["minimizers"]
            .as_array()
            .unwrap()
            .iter()
            .find(|m| m["word"] == json!("e"))
            .unwrap()["defect"];
        assert!((e.as_f64().unwrap() + 0.4).abs() < 1e-12);
    }
}
