//! Balanced ball data over the `Gamma(2)` orbit of `i` and the discretization
//! loop that turns Brownian paths into a random walk on the orbit.
//!
//! Each site `x` carries concentric balls `F_x = B(x, r_F)` inside
//! `V_x = B(x, R_V)`. A path is run by walk-on-spheres until it meets some
//! `F_y`, an exit point `w'` is drawn from `V_y`, and the encounter is kept
//! with probability `(1 / C) / (d eps_y / d eps_x)(w')`. Accepted exits are
//! then distributed as the exit law from the center, so the recorded sites
//! form a Markov chain whose step law is the same at every site.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::brownian::{
    annulus_hit_probability, annulus_hits_inner, exit_density_ratio, exit_sample, green_h2, harnack_constant,
    harnack_rho, sphere_point, walk_on_spheres_until_hit_f, BallDomain, BrownianError, WosConfig,
};
use crate::lattice::{halfplane_distance, orbit_separation, OrbitPoint, Word};
use crate::par::{map_indexed, stream_rng, Exec};
use crate::walk::{mean_stderr, site, MeasureFamily, WalkError};

#[derive(Debug, Error)]
pub enum LsError {
    #[error(transparent)]
    Brownian(#[from] BrownianError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error("radii need 0 < r_F < R_V, got r_F = {r_f}, R_V = {r_v}")]
    Radii { r_f: f64, r_v: f64 },
    #[error("r_F + R_V = {sum} is not below the orbit separation {separation} (pair {a}, {b})")]
    Overlap { sum: f64, separation: f64, a: Word, b: Word },
    #[error("radial certificate failed: largest deviation {max_z:.2} standard errors")]
    Unbalanced { max_z: f64 },
    #[error("empty measure: no runs requested")]
    NoRuns,
    #[error("empirical measure has no recorded sites")]
    EmptyMeasure,
    #[error("arc endpoints must satisfy a < b")]
    DegenerateArc,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Monte Carlo check that the domain Green's function of `V_x` with pole `x`
/// is constant on `dF_x`: from 8 equally spaced points of `dF_x`, the chance
/// of reaching `B(x, eps)` before leaving `V_x` is proportional to it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialCertificate {
    pub eps: f64,
    pub samples_per_point: u64,
    /// `(hit probability, standard error)` per boundary point.
    pub points: Vec<(f64, f64)>,
    pub pooled: f64,
    /// Closed form `(G(r_F) - G(R_V)) / (G(eps) - G(R_V))`.
    pub expected: f64,
    /// Largest `|p_j - pooled| / se_j`.
    pub max_z: f64,
    /// Largest `|p_j - expected| / se_j`, reported only.
    pub max_z_expected: f64,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadialConfig {
    /// Inner radius as a fraction of `r_F`.
    pub eps_fraction: f64,
    pub samples_per_point: u64,
    pub seed: u64,
}

impl Default for RadialConfig {
    fn default() -> Self {
        RadialConfig { eps_fraction: 0.25, samples_per_point: 4000, seed: 0 }
    }
}

pub fn radial_certificate(r_f: f64, r_v: f64, cfg: &RadialConfig, exec: Exec) -> RadialCertificate {
    let eps = cfg.eps_fraction * r_f;
    let shell = 1e-4 * eps;
    let n = cfg.samples_per_point;
    let hits = map_indexed(exec, 8 * n, |k| {
        let j = k / n;
        let mut rng = stream_rng(cfg.seed, k);
        let start = sphere_point(r_f, TAU * j as f64 / 8.0);
        annulus_hits_inner(start, eps, r_v, shell, &mut rng)
    });
    let points: Vec<(f64, f64)> = hits
        .chunks(n as usize)
        .map(|c| {
            let p = c.iter().filter(|h| **h).count() as f64 / n as f64;
            (p, (p * (1.0 - p) / n as f64).sqrt())
        })
        .collect();
    let pooled = points.iter().map(|p| p.0).sum::<f64>() / 8.0;
    let expected = annulus_hit_probability(r_f, eps, r_v);
    let z =
        |target: f64| points.iter().map(|(p, se)| (p - target).abs() / se.max(1.0 / n as f64)).fold(0.0f64, f64::max);
    let (max_z, max_z_expected) = (z(pooled), z(expected));
    RadialCertificate {
        eps,
        samples_per_point: n,
        points,
        pooled,
        expected,
        max_z,
        max_z_expected,
        passed: max_z <= 3.0,
    }
}

/// Ball data `(F, V)` over the orbit of `i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LSData {
    /// Minimal distance between distinct orbit points.
    pub separation: f64,
    pub separation_pair: (Word, Word),
    pub r_f: f64,
    pub r_v: f64,
    /// Uniformized radius of `F_x` inside `V_x`.
    pub rho: f64,
    pub harnack: f64,
    /// `G_V(z, x)` on `dF_x`, Monte Carlo `(estimate, standard error)`.
    pub balance: (f64, f64),
    pub balance_exact: f64,
    pub certificate: RadialCertificate,
}

/// Validates the radii against the orbit and attaches the Harnack constant
/// and the radial certificate. Recurrence is tested separately.
pub fn build_ls_data(
    orbit: &[OrbitPoint],
    r_f: f64,
    r_v: f64,
    radial: &RadialConfig,
    exec: Exec,
) -> Result<LSData, LsError> {
    if !(r_f > 0.0 && r_f < r_v) {
        return Err(LsError::Radii { r_f, r_v });
    }
    let (separation, (a, b)) = orbit_separation(orbit, exec);
    let pair = (orbit[a].word.clone(), orbit[b].word.clone());
    if r_f + r_v >= separation {
        return Err(LsError::Overlap { sum: r_f + r_v, separation, a: pair.0, b: pair.1 });
    }
    let rho = harnack_rho(r_f, r_v)?;
    let harnack = harnack_constant(r_f, r_v)?;
    let certificate = radial_certificate(r_f, r_v, radial, exec);
    let g = |d: f64| green_h2(d).expect("positive radius");
    let scale = g(certificate.eps) - g(r_v);
    let se = (certificate.points.iter().map(|p| p.1 * p.1).sum::<f64>()).sqrt() / 8.0;
    Ok(LSData {
        separation,
        separation_pair: pair,
        r_f,
        r_v,
        rho,
        harnack,
        balance: (certificate.pooled * scale, se * scale),
        balance_exact: g(r_f) - g(r_v),
        certificate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LsConfig {
    /// Sites recorded per run; the first defines the measure.
    pub n_records: usize,
    /// Walk-on-spheres steps allowed per run.
    pub budget: usize,
    /// Hit shell as a fraction of `r_F`.
    pub shell_fraction: f64,
    pub cap: f64,
    /// Runs whose paths are kept for tracing.
    pub trace_runs: u64,
}

impl Default for LsConfig {
    fn default() -> Self {
        LsConfig { n_records: 1, budget: 100_000, shell_fraction: 1e-3, cap: 2.0, trace_runs: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub sites: Vec<Word>,
    pub truncated: bool,
    pub encounters: u32,
    pub steps: usize,
    /// Disk-chart angles of accepted exits.
    pub accepted_angles: Vec<f64>,
    pub min_accept: f64,
    pub max_accept: f64,
    /// `(site, local point)` after every step, for traced runs.
    pub path: Vec<(Word, Complex64)>,
}

fn run_once(data: &LSData, cfg: &LsConfig, rng: &mut impl Rng, traced: bool) -> Result<RunOutcome, LsError> {
    let v = BallDomain::new(I, data.r_v)?;
    let wos = WosConfig { r_f: data.r_f, shell: cfg.shell_fraction * data.r_f, cap: cfg.cap, max_steps: cfg.budget };
    let mut out = RunOutcome {
        sites: Vec::with_capacity(cfg.n_records),
        truncated: false,
        encounters: 0,
        steps: 0,
        accepted_angles: Vec::new(),
        min_accept: f64::INFINITY,
        max_accept: 0.0,
        path: Vec::new(),
    };
    let mut g = Word::empty();
    let mut z = exit_sample(I, &v, rng)?.point;
    let lo = 1.0 / (data.harnack * data.harnack);
    while out.sites.len() < cfg.n_records {
        let left = cfg.budget - out.steps;
        let budgeted = WosConfig { max_steps: left, ..wos };
        let hit = match walk_on_spheres_until_hit_f(&g, z, &budgeted, rng, traced.then_some(&mut out.path)) {
            Ok(h) => h,
            Err(BrownianError::Budget { .. }) => {
                out.truncated = true;
                out.steps = cfg.budget;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        out.steps += hit.steps;
        out.encounters += 1;
        let ex = exit_sample(hit.local, &v, rng)?;
        let ratio = exit_density_ratio(hit.local, &v, ex.point)?;
        let accept = 1.0 / (data.harnack * ratio);
        assert!(
            accept > lo * (1.0 - 1e-9) && accept <= 1.0 + 1e-9,
            "acceptance probability {accept} outside (1/C^2, 1]"
        );
        out.min_accept = out.min_accept.min(accept);
        out.max_accept = out.max_accept.max(accept);
        if rng.gen::<f64>() < accept {
            out.sites.push(hit.site.clone());
            out.accepted_angles.push(ex.disk.arg().rem_euclid(TAU));
        }
        g = hit.site;
        z = ex.point;
    }
    Ok(out)
}

/// Empirical law of the first recorded site.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    counts: BTreeMap<Word, u64>,
    first: Vec<Option<Word>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureEntry {
    pub word: Word,
    pub p: f64,
    pub stderr: f64,
}

impl EmpiricalMeasure {
    /// `first[r]` is the first recorded site of run `r`, `None` if truncated.
    pub fn from_first_sites(first: Vec<Option<Word>>) -> Self {
        let mut counts = BTreeMap::new();
        for w in first.iter().flatten() {
            *counts.entry(w.clone()).or_insert(0) += 1;
        }
        EmpiricalMeasure { counts, first }
    }

    pub fn runs(&self) -> u64 {
        self.first.len() as u64
    }

    pub fn truncated(&self) -> u64 {
        self.first.iter().filter(|w| w.is_none()).count() as u64
    }

    pub fn truncation_mass(&self) -> f64 {
        self.truncated() as f64 / self.runs().max(1) as f64
    }

    pub fn first_sites(&self) -> &[Option<Word>] {
        &self.first
    }

    pub fn p(&self, w: &Word) -> f64 {
        self.counts.get(w).copied().unwrap_or(0) as f64 / self.runs().max(1) as f64
    }

    pub fn entries(&self) -> Vec<MeasureEntry> {
        let n = self.runs() as f64;
        self.counts
            .iter()
            .map(|(w, &c)| {
                let p = c as f64 / n;
                MeasureEntry { word: w.clone(), p, stderr: (p * (1.0 - p) / n).sqrt() }
            })
            .collect()
    }

    /// Mass on words longer than `len`.
    pub fn tail_mass(&self, len: usize) -> f64 {
        self.counts.iter().filter(|(w, _)| w.len() > len).map(|(_, c)| *c).sum::<u64>() as f64
            / self.runs().max(1) as f64
    }

    /// Renormalized over completed runs, as a step law for the walk module.
    pub fn to_family(&self) -> Result<MeasureFamily, LsError> {
        let done = self.runs() - self.truncated();
        if done == 0 {
            return Err(LsError::EmptyMeasure);
        }
        let entries: Vec<(Word, f64)> = self.counts.iter().map(|(w, &c)| (w.clone(), c as f64 / done as f64)).collect();
        let total: f64 = entries.iter().map(|e| e.1).sum();
        Ok(MeasureFamily::new(entries.into_iter().map(|(w, p)| (w, p / total)))?)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W, meta: &MeasureMetadata) -> std::io::Result<()> {
        writeln!(out, "{}", serde_json::to_string(meta).expect("serializable"))?;
        for e in self.entries() {
            writeln!(out, "{}", serde_json::to_string(&e).expect("serializable"))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureMetadata {
    pub schema: &'static str,
    pub seed: u64,
    pub r_f: f64,
    pub r_v: f64,
    pub harnack: f64,
    pub runs: u64,
    pub truncation_mass: f64,
}

impl MeasureMetadata {
    pub fn new(data: &LSData, seed: u64, m: &EmpiricalMeasure) -> Self {
        MeasureMetadata {
            schema: "hyperwalk-measure/1",
            seed,
            r_f: data.r_f,
            r_v: data.r_v,
            harnack: data.harnack,
            runs: m.runs(),
            truncation_mass: m.truncation_mass(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LsDiagnostics {
    pub runs: u64,
    pub truncated: u64,
    pub encounters: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    /// Exact per-encounter acceptance probability `1 / C`.
    pub acceptance_expected: f64,
    pub min_accept: f64,
    pub max_accept: f64,
    pub mean_steps: f64,
}

#[derive(Clone, Debug)]
pub struct LsRun {
    pub measure: EmpiricalMeasure,
    pub outcomes: Vec<RunOutcome>,
    pub diagnostics: LsDiagnostics,
}

impl LsRun {
    pub fn accepted_angles(&self) -> Vec<f64> {
        self.outcomes.iter().flat_map(|o| o.accepted_angles.iter().copied()).collect()
    }
}

/// Runs the discretization loop `n_runs` times; run `r` uses stream `(seed, r)`.
pub fn ls_discretize(data: &LSData, cfg: &LsConfig, n_runs: u64, seed: u64, exec: Exec) -> Result<LsRun, LsError> {
    if n_runs == 0 {
        return Err(LsError::NoRuns);
    }
    if !data.certificate.passed {
        return Err(LsError::Unbalanced { max_z: data.certificate.max_z });
    }
    let outcomes = map_indexed(exec, n_runs, |r| {
        let mut rng = stream_rng(seed, r);
        run_once(data, cfg, &mut rng, r < cfg.trace_runs)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let first = outcomes.iter().map(|o| o.sites.first().cloned()).collect();
    let encounters: u64 = outcomes.iter().map(|o| u64::from(o.encounters)).sum();
    let accepted: u64 = outcomes.iter().map(|o| o.accepted_angles.len() as u64).sum();
    let diagnostics = LsDiagnostics {
        runs: n_runs,
        truncated: outcomes.iter().filter(|o| o.truncated).count() as u64,
        encounters,
        accepted,
        acceptance_rate: accepted as f64 / encounters.max(1) as f64,
        acceptance_expected: 1.0 / data.harnack,
        min_accept: outcomes.iter().map(|o| o.min_accept).fold(f64::INFINITY, f64::min),
        max_accept: outcomes.iter().map(|o| o.max_accept).fold(0.0, f64::max),
        mean_steps: outcomes.iter().map(|o| o.steps as f64).sum::<f64>() / n_runs as f64,
    };
    Ok(LsRun { measure: EmpiricalMeasure::from_first_sites(first), outcomes, diagnostics })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RecurrenceResult {
    pub trials: u64,
    pub hits: u64,
    pub fraction: f64,
}

/// Fraction of walks started within distance 3 of the orbit that reach `F`
/// within `budget` steps.
pub fn recurrence_test(data: &LSData, trials: u64, budget: usize, seed: u64, exec: Exec) -> RecurrenceResult {
    let wos = WosConfig { max_steps: budget, ..WosConfig::new(data.r_f) };
    let hits = map_indexed(exec, trials, |r| {
        let mut rng = stream_rng(seed, r);
        let start = sphere_point(rng.gen_range(1e-9..3.0), rng.gen_range(0.0..TAU));
        walk_on_spheres_until_hit_f(&Word::empty(), start, &wos, &mut rng, None).is_ok()
    })
    .into_iter()
    .filter(|h| *h)
    .count() as u64;
    RecurrenceResult { trials, hits, fraction: hits as f64 / trials.max(1) as f64 }
}

/// Boundary interval of the half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Arc {
    Finite(f64, f64),
    /// `(a, +inf)`
    ToInfinity(f64),
    /// `(-inf, b)`
    FromInfinity(f64),
}

/// Harmonic measure of the arc seen from `z`: the angle it subtends over `pi`.
pub fn harmonic_measure_arc(z: Complex64, arc: Arc) -> Result<f64, LsError> {
    let ang = |t: f64| (z - t).arg();
    let v = match arc {
        Arc::Finite(a, b) if a < b => (ang(b) - ang(a)) / std::f64::consts::PI,
        Arc::Finite(..) => return Err(LsError::DegenerateArc),
        Arc::ToInfinity(a) => (std::f64::consts::PI - ang(a)) / std::f64::consts::PI,
        Arc::FromInfinity(b) => ang(b) / std::f64::consts::PI,
    };
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Harmonicity {
    pub residual: f64,
    pub stderr: f64,
    pub z_score: f64,
    /// Unbounded test functions make the residual sensitive to the unobserved tail.
    pub tail_flag: bool,
}

/// `sum_y mu(y) h(y) - h(x0)`; truncated runs contribute `0`, so `h = 1`
/// returns minus the truncation mass.
pub fn empirical_harmonicity(m: &EmpiricalMeasure, h: impl Fn(&Word) -> f64, bounded: bool) -> Harmonicity {
    let vals: Vec<f64> = m.first_sites().iter().map(|w| w.as_ref().map_or(0.0, &h)).collect();
    let (mean, se) = mean_stderr(&vals);
    let residual = mean - h(&Word::empty());
    let z_score = if se > 0.0 {
        residual / se
    } else if residual == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Harmonicity { residual, stderr: se, z_score, tail_flag: !bounded }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentEntropy {
    /// Truncation estimate of `sum mu(y) d(x0, y)`.
    pub moment: f64,
    pub moment_stderr: f64,
    /// Plug-in estimate of `-sum mu log mu` over the observed support.
    pub entropy: f64,
    pub entropy_stderr: f64,
}

pub fn moment_entropy(m: &EmpiricalMeasure) -> Result<MomentEntropy, LsError> {
    let entries = m.entries();
    if entries.is_empty() {
        return Err(LsError::EmptyMeasure);
    }
    let vals: Vec<f64> =
        m.first_sites().iter().map(|w| w.as_ref().map_or(0.0, |w| halfplane_distance(I, site(w)))).collect();
    let (moment, moment_stderr) = mean_stderr(&vals);
    let entropy: f64 = entries.iter().map(|e| -e.p * e.p.ln()).sum();
    let second: f64 = entries.iter().map(|e| e.p * e.p.ln().powi(2)).sum();
    let entropy_stderr = ((second - entropy * entropy).max(0.0) / m.runs() as f64).sqrt();
    Ok(MomentEntropy { moment, moment_stderr, entropy, entropy_stderr })
}

/// Largest `|p(w) - p(mirror w)| / se` over observed words, for the
/// reflection `z -> -conj(z)` that fixes `i` and the ball data.
pub fn reflection_asymmetry(m: &EmpiricalMeasure) -> f64 {
    let n = m.runs() as f64;
    m.entries()
        .iter()
        .map(|e| {
            let q = m.p(&e.word.mirrored());
            let se = ((e.p * (1.0 - e.p) + q * (1.0 - q)) / n).sqrt().max(1.0 / n);
            (e.p - q).abs() / se
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    KsResult { statistic: d, p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d) }
}

/// `Q(l) = 2 sum_{j >= 1} (-1)^(j-1) exp(-2 j^2 l^2)`.
fn kolmogorov_q(l: f64) -> f64 {
    if l < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let term = sign * (-2.0 * (j * j) as f64 * l * l).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Reference draws from the exit law at the center, as disk angles.
pub fn center_exit_angles(r_v: f64, n: u64, seed: u64, exec: Exec) -> Vec<f64> {
    let v = BallDomain::new(I, r_v).expect("positive radius");
    map_indexed(exec, n, |r| {
        let mut rng = stream_rng(seed, r);
        exit_sample(I, &v, &mut rng).expect("center is inside").disk.arg().rem_euclid(TAU)
    })
}

/// Five boundary arcs used as bounded harmonic test functions.
pub const TEST_ARCS: [Arc; 5] = [
    Arc::Finite(-1.0, 1.0),
    Arc::ToInfinity(0.0),
    Arc::FromInfinity(-0.5),
    Arc::Finite(0.25, 3.0),
    Arc::Finite(-3.0, -0.2),
];
