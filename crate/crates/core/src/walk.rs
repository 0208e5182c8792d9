//! Equivariant random walks on the `Gamma(2)` orbit, indexed by reduced words.
//!
//! A family `mu` is given by its base law on words; the walk at `g` steps to
//! `g w` with probability `mu(w)`. Green's functions are computed by a
//! deterministic sum over the first `N` convolution powers on a dense ball of
//! reduced words, which makes equivariance `g(x, y) = g(e, x^-1 y)` exact.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{martin_kernel, BoundaryPoint};
use crate::brownian::green_h2;
use crate::lattice::{halfplane_distance, to_hyperboloid, Letter, Word};
use crate::par::{map_indexed, stream_rng, zip_chunks_mut, Exec};

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("measure is empty")]
    Empty,
    #[error("probability {p} for `{word}` is negative or not finite")]
    BadWeight { word: Word, p: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("word `{0}` lies outside the ball of radius {1}")]
    OutsideBall(Word, usize),
    #[error("Green's function vanishes at `{0}` for this horizon; increase it")]
    ZeroDenominator(Word),
    #[error("pair ({0}, {1}) hits a pole of the Green's function")]
    Pole(Word, Word),
    #[error("measure line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Base law `mu_{x0}` on words. Entries are merged and kept in shortlex order.
#[derive(Clone, Debug)]
pub struct MeasureFamily {
    base: Vec<(Word, f64)>,
    sampler: WeightedIndex<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureLine {
    word: Word,
    p: f64,
}

impl MeasureFamily {
    pub fn new(entries: impl IntoIterator<Item = (Word, f64)>) -> Result<Self, WalkError> {
        let mut merged: BTreeMap<Word, f64> = BTreeMap::new();
        for (w, p) in entries {
            if !p.is_finite() || p < 0.0 {
                return Err(WalkError::BadWeight { word: w, p });
            }
            *merged.entry(w).or_insert(0.0) += p;
        }
        merged.retain(|_, p| *p > 0.0);
        if merged.is_empty() {
            return Err(WalkError::Empty);
        }
        let total: f64 = merged.values().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(WalkError::NotNormalized(total));
        }
        let base: Vec<(Word, f64)> = merged.into_iter().collect();
        let sampler = WeightedIndex::new(base.iter().map(|(_, p)| *p)).map_err(|_| WalkError::Empty)?;
        Ok(MeasureFamily { base, sampler })
    }

    /// Simple random walk: uniform on `a, a^-1, b, b^-1`.
    pub fn uniform_generators() -> Self {
        Self::new(Letter::ALL.map(|l| (Word::letter(l), 0.25))).expect("valid")
    }

    pub fn delta(w: Word) -> Self {
        Self::new([(w, 1.0)]).expect("valid")
    }

    pub fn base(&self) -> &[(Word, f64)] {
        &self.base
    }

    pub fn prob(&self, w: &Word) -> f64 {
        self.base.iter().find(|(u, _)| u == w).map_or(0.0, |(_, p)| *p)
    }

    pub fn max_len(&self) -> usize {
        self.base.iter().map(|(w, _)| w.len()).max().unwrap_or(0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.base.iter().all(|(w, p)| (self.prob(&w.inverse()) - p).abs() <= 1e-12)
    }

    pub fn step_sample<R: Rng + ?Sized>(&self, at: &Word, rng: &mut R) -> Word {
        at.mul(&self.base[self.sampler.sample(rng)].0)
    }

    /// Reads `{"word": ..., "p": ...}` lines; blank lines are skipped.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, WalkError> {
        let mut entries = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let m: MeasureLine =
                serde_json::from_str(&line).map_err(|e| WalkError::Parse { line: i + 1, msg: e.to_string() })?;
            entries.push((m.word, m.p));
        }
        Self::new(entries)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (w, p) in &self.base {
            let line = serde_json::to_string(&MeasureLine { word: w.clone(), p: *p }).expect("serializable");
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Dense indexing of reduced words of length `<= radius` in shortlex order.
///
/// A word `l1 ... ln` gets code `l1 * 3^(n-1) + sum of digits`, where each
/// later letter contributes its rank among the three letters allowed after
/// its predecessor. Parents and children are then index arithmetic.
#[derive(Clone, Debug)]
pub struct WordBall {
    radius: usize,
    offsets: Vec<usize>,
    last: Vec<u8>,
    lens: Vec<u8>,
}

const NO_LETTER: u8 = u8::MAX;

fn rank_after(prev: Letter, t: Letter) -> usize {
    t.index() - usize::from(prev.inverse().index() < t.index())
}

fn allowed_after(prev: Letter, digit: usize) -> Letter {
    let skip = prev.inverse().index();
    Letter::from_index(if digit < skip { digit } else { digit + 1 })
}

impl WordBall {
    pub fn new(radius: usize) -> Self {
        let mut offsets = vec![0usize, 1];
        for l in 1..=radius {
            offsets.push(2 * 3usize.pow(l as u32) - 1);
        }
        let size = offsets[radius + 1];
        let mut last = vec![NO_LETTER; size];
        let mut lens = vec![0u8; size];
        for l in 1..=radius {
            for idx in offsets[l]..offsets[l + 1] {
                let code = idx - offsets[l];
                lens[idx] = l as u8;
                last[idx] = if l == 1 {
                    code as u8
                } else {
                    let parent = offsets[l - 1] + code / 3;
                    allowed_after(Letter::from_index(last[parent] as usize), code % 3).index() as u8
                };
            }
        }
        WordBall { radius, offsets, last, lens }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn size(&self) -> usize {
        self.last.len()
    }

    /// Number of words of length `<= l` (clamped to the ball).
    pub fn count_up_to(&self, l: usize) -> usize {
        self.offsets[l.min(self.radius) + 1]
    }

    pub fn len_of(&self, idx: usize) -> usize {
        self.lens[idx] as usize
    }

    pub fn index_of(&self, w: &Word) -> Option<usize> {
        let letters = w.letters();
        if letters.len() > self.radius {
            return None;
        }
        let Some(&first) = letters.first() else { return Some(0) };
        let mut code = first.index();
        for pair in letters.windows(2) {
            code = code * 3 + rank_after(pair[0], pair[1]);
        }
        Some(self.offsets[letters.len()] + code)
    }

    pub fn word_at(&self, idx: usize) -> Word {
        let mut letters = Vec::with_capacity(self.len_of(idx));
        let mut i = idx;
        while let Some(p) = self.parent(i) {
            letters.push(Letter::from_index(self.last[i] as usize));
            i = p;
        }
        letters.reverse();
        Word::reduce(&letters)
    }

    pub fn parent(&self, idx: usize) -> Option<usize> {
        match self.len_of(idx) {
            0 => None,
            1 => Some(0),
            l => Some(self.offsets[l - 1] + (idx - self.offsets[l]) / 3),
        }
    }

    /// Index of `w t`, or `None` when it leaves the ball.
    #[inline]
    pub fn mul_letter(&self, idx: usize, t: Letter) -> Option<usize> {
        let l = self.len_of(idx);
        if l == 0 {
            return if self.radius == 0 { None } else { Some(1 + t.index()) };
        }
        let last = Letter::from_index(self.last[idx] as usize);
        if last == t.inverse() {
            return self.parent(idx);
        }
        if l == self.radius {
            return None;
        }
        let code = idx - self.offsets[l];
        Some(self.offsets[l + 1] + code * 3 + rank_after(last, t))
    }

    /// Index of `w u`. Lengths along the way first shrink, then grow, so once
    /// the ball is left the product stays outside.
    #[inline]
    pub fn mul_word(&self, idx: usize, u: &[Letter]) -> Option<usize> {
        u.iter().try_fold(idx, |i, &t| self.mul_letter(i, t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenConfig {
    pub horizon: usize,
    pub ball_radius: usize,
    /// Per-word probabilities below this are dropped after each step.
    pub prune: f64,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig { horizon: 60, ball_radius: 14, prune: 1e-15 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenDiagnostics {
    pub horizon: usize,
    pub ball_radius: usize,
    /// Mass of `mu^N` still inside the ball.
    pub mass_tracked: f64,
    /// Cumulative mass that stepped out of the ball and was discarded.
    pub escaped_mass: f64,
    /// Cumulative mass removed by the per-word threshold.
    pub pruned_mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenEstimate {
    pub value: f64,
    pub horizon: usize,
    pub diagnostics: GreenDiagnostics,
}

/// `sum_{n <= N} mu^(n)(e, w)` for every `w` in the ball.
#[derive(Clone, Debug)]
pub struct GreenTable {
    ball: WordBall,
    values: Vec<f64>,
    diagnostics: GreenDiagnostics,
}

const CHUNK: usize = 1 << 14;

impl GreenTable {
    pub fn compute(mu: &MeasureFamily, cfg: GreenConfig, exec: Exec) -> Self {
        let ball = WordBall::new(cfg.ball_radius);
        let size = ball.size();
        // Pull form: next(w) = sum_s mu(s) cur(w s^-1).
        let pulls: Vec<(Vec<Letter>, f64)> =
            mu.base().iter().map(|(w, p)| (w.inverse().letters().to_vec(), *p)).collect();
        let step_len = mu.max_len();

        let mut cur = vec![0.0f64; size];
        let mut next = vec![0.0f64; size];
        let mut values = vec![0.0f64; size];
        cur[0] = 1.0;
        values[0] = 1.0;
        let (mut escaped, mut pruned, mut mass) = (0.0, 0.0, 1.0);
        let mut reach = 0usize;

        for _ in 0..cfg.horizon {
            reach = (reach + step_len).min(cfg.ball_radius);
            let active = ball.count_up_to(reach);
            let src = &cur;
            let parts = zip_chunks_mut(exec, &mut next[..active], &mut values[..active], CHUNK, |off, nx, acc| {
                let (mut kept, mut cut) = (0.0, 0.0);
                for (j, (n, g)) in nx.iter_mut().zip(acc.iter_mut()).enumerate() {
                    let w = off + j;
                    let mut v = 0.0;
                    for (u, p) in &pulls {
                        if let Some(i) = ball.mul_word(w, u) {
                            v += p * src[i];
                        }
                    }
                    if v < cfg.prune {
                        cut += v;
                        v = 0.0;
                    }
                    kept += v;
                    *n = v;
                    *g += v;
                }
                (kept, cut)
            });
            let kept: f64 = parts.iter().map(|p| p.0).sum();
            let cut: f64 = parts.iter().map(|p| p.1).sum();
            escaped += (mass - kept - cut).max(0.0);
            pruned += cut;
            mass = kept;
            std::mem::swap(&mut cur, &mut next);
        }
        let diagnostics = GreenDiagnostics {
            horizon: cfg.horizon,
            ball_radius: cfg.ball_radius,
            mass_tracked: mass,
            escaped_mass: escaped,
            pruned_mass: pruned,
        };
        GreenTable { ball, values, diagnostics }
    }

    pub fn ball(&self) -> &WordBall {
        &self.ball
    }

    pub fn diagnostics(&self) -> GreenDiagnostics {
        self.diagnostics
    }

    /// `g(x, y) = g(e, x^-1 y)`.
    pub fn g(&self, x: &Word, y: &Word) -> Result<GreenEstimate, WalkError> {
        let rel = x.inverse().mul(y);
        let idx = self.ball.index_of(&rel).ok_or(WalkError::OutsideBall(rel, self.ball.radius))?;
        Ok(GreenEstimate { value: self.values[idx], horizon: self.diagnostics.horizon, diagnostics: self.diagnostics })
    }

    /// `k(x, y) = g(x, y) / g(e, y)`.
    pub fn martin_k(&self, x: &Word, y: &Word) -> Result<f64, WalkError> {
        let den = self.g(&Word::empty(), y)?.value;
        if den == 0.0 {
            return Err(WalkError::ZeroDenominator(y.clone()));
        }
        Ok(self.g(x, y)?.value / den)
    }
}

/// One-off Green's function with the default ball.
pub fn green(mu: &MeasureFamily, x: &Word, y: &Word, horizon: usize) -> Result<GreenEstimate, WalkError> {
    let cfg = GreenConfig { horizon, ..GreenConfig::default() };
    GreenTable::compute(mu, cfg, Exec::default()).g(x, y)
}

pub fn martin_k(mu: &MeasureFamily, x: &Word, y: &Word, horizon: usize) -> Result<f64, WalkError> {
    let cfg = GreenConfig { horizon, ..GreenConfig::default() };
    GreenTable::compute(mu, cfg, Exec::default()).martin_k(x, y)
}

/// Visits to `y` within `horizon` steps from `x`, averaged over runs:
/// `(mean, standard error)`.
pub fn green_monte_carlo(
    mu: &MeasureFamily,
    x: &Word,
    y: &Word,
    horizon: usize,
    runs: u64,
    seed: u64,
    exec: Exec,
) -> (f64, f64) {
    let visits = map_indexed(exec, runs, |r| {
        let mut rng = stream_rng(seed, r);
        let mut at = x.clone();
        let mut n = u32::from(at == *y);
        for _ in 0..horizon {
            at = mu.step_sample(&at, &mut rng);
            n += u32::from(at == *y);
        }
        f64::from(n)
    });
    mean_stderr(&visits)
}

pub(crate) fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Orbit point `w i` in the half-plane.
pub fn site(w: &Word) -> Complex64 {
    w.evaluate().apply(Complex64::new(0.0, 1.0))
}

/// `sum_y mu_x(y) K(y, xi) - K(x, xi)` on the orbit of `i`.
pub fn harmonicity_defect(mu: &MeasureFamily, xi: &BoundaryPoint, x: &Word) -> f64 {
    let k = |w: &Word| martin_kernel(&to_hyperboloid(site(w)), xi);
    let avg: f64 = mu.base().iter().map(|(s, p)| p * k(&x.mul(s))).sum();
    avg - k(x)
}

/// Largest `|k(x, y) - G(x, y) / G(x0, y)|` over the pairs, with `G` the
/// hyperbolic-plane Green's function evaluated on orbit points.
pub fn adaptedness_deviation(table: &GreenTable, pairs: &[(Word, Word)]) -> Result<f64, WalkError> {
    let e = Word::empty();
    let mut worst = 0.0f64;
    for (x, y) in pairs {
        if y == x || *y == e {
            return Err(WalkError::Pole(x.clone(), y.clone()));
        }
        let discrete = table.martin_k(x, y)?;
        let (px, py, p0) = (site(x), site(y), site(&e));
        let g = |a: Complex64, b: Complex64| green_h2(halfplane_distance(a, b)).expect("distinct orbit points");
        let manifold = g(px, py) / g(p0, py);
        worst = worst.max((discrete - manifold).abs());
    }
    Ok(worst)
}

/// Both readings of non-degeneracy at a truncation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Nondegeneracy {
    pub truncation: usize,
    /// Every word of length `<= min(N, 3)` lies in the support of some `mu^(n)`, `n <= N`.
    pub semigroup_reach: bool,
    /// Short words missed by the semigroup reading, if any (shortlex, first few).
    pub unreached: Vec<Word>,
    /// The support generates the whole free group.
    pub generates_group: bool,
}

pub fn is_nondegenerate(mu: &MeasureFamily, n: usize) -> Nondegeneracy {
    let target = n.min(3);
    let support: Vec<&Word> = mu.base().iter().map(|(w, _)| w).collect();
    let mut seen: HashSet<Word> = HashSet::from([Word::empty()]);
    let mut frontier = vec![Word::empty()];
    for _ in 0..n {
        let mut next = Vec::new();
        for w in &frontier {
            for s in &support {
                let v = w.mul(s);
                if seen.insert(v.clone()) {
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    let unreached: Vec<Word> =
        crate::lattice::words_up_to(target).into_iter().filter(|w| !seen.contains(w)).take(8).collect();
    Nondegeneracy {
        truncation: n,
        semigroup_reach: unreached.is_empty(),
        unreached,
        generates_group: generates_free_group(support.into_iter()),
    }
}

/// Stallings folding: the words generate `F(a, b)` iff their folded core
/// graph is a single vertex carrying an `a`-loop and a `b`-loop.
pub fn generates_free_group<'a>(words: impl Iterator<Item = &'a Word>) -> bool {
    // Directed edges labelled 0 (a) or 1 (b); inverse letters traverse backwards.
    let mut edges: Vec<(usize, u8, usize)> = Vec::new();
    let mut vertices = 1usize;
    for w in words {
        let letters = w.letters();
        if letters.is_empty() {
            continue;
        }
        let mut at = 0usize;
        for (i, &l) in letters.iter().enumerate() {
            let to = if i + 1 == letters.len() {
                0
            } else {
                vertices += 1;
                vertices - 1
            };
            match l {
                Letter::A => edges.push((at, 0, to)),
                Letter::B => edges.push((at, 1, to)),
                Letter::AInv => edges.push((to, 0, at)),
                Letter::BInv => edges.push((to, 1, at)),
            }
            at = to;
        }
    }
    let mut parent: Vec<usize> = (0..vertices).collect();
    fn find(p: &mut [usize], mut v: usize) -> usize {
        while p[v] != v {
            p[v] = p[p[v]];
            v = p[v];
        }
        v
    }
    loop {
        let mut merged = false;
        let mut out: HashMap<(usize, u8), usize> = HashMap::new();
        let mut inc: HashMap<(usize, u8), usize> = HashMap::new();
        for &(s, lab, t) in &edges {
            let (s, t) = (find(&mut parent, s), find(&mut parent, t));
            for (map, key, val) in [(&mut out, (s, lab), t), (&mut inc, (t, lab), s)] {
                match map.get(&key) {
                    Some(&other) => {
                        let (a, b) = (find(&mut parent, other), find(&mut parent, val));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                            merged = true;
                        }
                    }
                    None => {
                        map.insert(key, val);
                    }
                }
            }
        }
        if !merged {
            break;
        }
    }
    let roots: HashSet<usize> = (0..vertices).map(|v| find(&mut parent, v)).collect();
    let labels: HashSet<u8> = edges.iter().map(|e| e.1).collect();
    roots.len() == 1 && labels.len() == 2
}

/// Green table rows as CSV.
pub fn write_green_csv<W: Write>(mut out: W, rows: &[(Word, Word, usize, f64)]) -> std::io::Result<()> {
    writeln!(out, "# schema=hyperwalk-green/1")?;
    writeln!(out, "x,y,N,value")?;
    for (x, y, n, v) in rows {
        writeln!(out, "{x},{y},{n},{v:.17e}")?;
    }
    Ok(())
}
