//! Direction sets, popularity and empirical checks of the rectangle
//! covering lemmas, all measured by counting points of an `n x n` grid.

use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fields::{FieldSpec, USpec};
use crate::geometry::{comparable, Rect};
use crate::rng::{rng_stream, sub_seed};

/// Default comparability constant.
pub const C_COMPARABLE: f64 = 10.0;

/// Slopes `u(h(x))` on the grid, plus a sorted copy for popularity queries.
#[derive(Clone, Debug)]
pub struct CoverGrid {
    pub n: usize,
    pub slopes: Vec<f64>,
    sorted: Vec<f64>,
}

impl CoverGrid {
    pub fn new(spec: &FieldSpec, n: usize) -> Result<Self> {
        if n < 16 {
            return invalid(format!("cover grid too small: {n}"));
        }
        let slopes = spec.slope_map(n);
        let mut sorted = slopes.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(CoverGrid { n, slopes, sorted })
    }

    fn cell(&self) -> f64 {
        1.0 / (self.n * self.n) as f64
    }

    /// Measure of `{x : u(h(x)) ∈ [lo, hi]}`.
    pub fn slope_measure(&self, lo: f64, hi: f64) -> f64 {
        let a = self.sorted.partition_point(|&s| s < lo);
        let b = self.sorted.partition_point(|&s| s <= hi);
        (b - a) as f64 * self.cell()
    }

    /// Visits the flat index of every grid point of `r`.
    pub fn raster(&self, r: &Rect, mut visit: impl FnMut(usize)) {
        let n = self.n as f64;
        let (el, es) = r.frame();
        let (hl, hw) = (0.5 * r.l, 0.5 * r.w);
        let ext1 = hl * el[0].abs() + hw * es[0].abs();
        let i_lo = ((r.center[0] - ext1) * n).ceil() as i64;
        let i_hi = ((r.center[0] + ext1) * n).floor() as i64;
        for i in i_lo..=i_hi {
            let d1 = i as f64 / n - r.center[0];
            // |d1 el0 + d2 el1| <= hl and |-d1 el1 + d2 el0| <= hw, el0 > 0
            let mut lo = (d1 * el[1] - hw) / el[0];
            let mut hi = (d1 * el[1] + hw) / el[0];
            if el[1] != 0.0 {
                let a = (-hl - d1 * el[0]) / el[1];
                let b = (hl - d1 * el[0]) / el[1];
                lo = lo.max(a.min(b));
                hi = hi.min(a.max(b));
            } else if d1.abs() > hl {
                continue;
            }
            let j_lo = ((r.center[1] + lo) * n - 1e-9).ceil() as i64;
            let j_hi = ((r.center[1] + hi) * n + 1e-9).floor() as i64;
            let row = i.rem_euclid(self.n as i64) as usize * self.n;
            for j in j_lo..=j_hi {
                visit(row + j.rem_euclid(self.n as i64) as usize);
            }
        }
    }

    /// Number of grid points in `r`, counted once each.
    pub fn count(&self, r: &Rect) -> usize {
        let mut c = 0;
        self.raster(r, |_| c += 1);
        c
    }

    /// Grid points of `E(R)`.
    pub fn e_of(&self, r: &Rect) -> Vec<usize> {
        let (lo, hi) = r.ex();
        let mut out = Vec::new();
        self.raster(r, |p| {
            let s = self.slopes[p];
            if s >= lo && s <= hi {
                out.push(p);
            }
        });
        out
    }

    /// `|{x : u(h(x)) ∈ EX(R)}| / |R|`.
    pub fn popularity(&self, r: &Rect) -> f64 {
        let (lo, hi) = r.ex();
        self.slope_measure(lo, hi) / r.area()
    }

    /// Measure of `∪ rects` by rasterization.
    pub fn union_measure(&self, rects: &[Rect]) -> f64 {
        let mut hit = vec![false; self.n * self.n];
        for r in rects {
            self.raster(r, |p| hit[p] = true);
        }
        hit.iter().filter(|&&b| b).count() as f64 * self.cell()
    }

    /// Rasterized indicator of a set.
    pub fn mask(&self, set: &Shapes) -> Vec<bool> {
        let mut m = vec![false; self.n * self.n];
        for r in &set.rects {
            self.raster(r, |p| m[p] = true);
        }
        let n = self.n as f64;
        for d in &set.disks {
            let rad = d.radius;
            let (i_lo, i_hi) = (((d.center[0] - rad) * n).ceil() as i64, ((d.center[0] + rad) * n).floor() as i64);
            for i in i_lo..=i_hi {
                let dx = i as f64 / n - d.center[0];
                let h = (rad * rad - dx * dx).max(0.0).sqrt();
                let (j_lo, j_hi) = (((d.center[1] - h) * n).ceil() as i64, ((d.center[1] + h) * n).floor() as i64);
                let row = i.rem_euclid(self.n as i64) as usize * self.n;
                for j in j_lo..=j_hi {
                    m[row + j.rem_euclid(self.n as i64) as usize] = true;
                }
            }
        }
        m
    }

    pub fn measure(&self, mask: &[bool]) -> f64 {
        mask.iter().filter(|&&b| b).count() as f64 * self.cell()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
}

/// A set given as a union of rectangles and disks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Shapes {
    #[serde(default)]
    pub rects: Vec<Rect>,
    #[serde(default)]
    pub disks: Vec<Disk>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lemma {
    /// Pairwise incomparable rectangles of one width.
    Incomparable,
    /// `|E(R) ∩ G| >= delta |G|`.
    Density,
    /// `pop_R >= sigma`, `|H ∩ R| >= delta |R|`.
    Population,
}

impl Lemma {
    pub const ALL: [Lemma; 3] = [Lemma::Incomparable, Lemma::Density, Lemma::Population];

    pub fn name(&self) -> &'static str {
        match self {
            Lemma::Incomparable => "incomparable",
            Lemma::Density => "density",
            Lemma::Population => "population",
        }
    }
}

impl std::str::FromStr for Lemma {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "incomparable" => Ok(Lemma::Incomparable),
            "density" => Ok(Lemma::Density),
            "population" => Ok(Lemma::Population),
            _ => invalid(format!("unknown lemma '{s}'")),
        }
    }
}

/// Claimed hypothesis parameters. Missing ones are taken from the data
/// (the largest value for which the hypothesis holds).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverParams {
    pub delta: Option<f64>,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
}

fn default_exponent() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub spec: FieldSpec,
    pub rects: Vec<Rect>,
    #[serde(default)]
    pub g: Shapes,
    #[serde(default)]
    pub h: Shapes,
    #[serde(default)]
    pub f: Shapes,
    #[serde(default)]
    pub params: CoverParams,
    /// Exponent of the density lemma.
    #[serde(default = "default_exponent")]
    pub q: f64,
    /// Exponent of the incomparable lemma.
    #[serde(default = "default_exponent")]
    pub p: f64,
    #[serde(default)]
    pub comparable_c: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub lemma: Lemma,
    pub seed: u64,
    pub ratio: f64,
    pub hypotheses_ok: bool,
    pub rects_used: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub notes: String,
}

/// Widths offered by the generator: `2^-9 .. 2^-5`.
pub const WIDTH_EXPONENTS: std::ops::RangeInclusive<i32> = 5..=9;
pub const MAX_RECTS: usize = 64;

impl Scenario {
    /// Random scenario; everything below is a function of `seed`.
    pub fn random(seed: u64) -> Result<Self> {
        let mut rng = rng_stream(seed, 7, 0);
        let pt = |rng: &mut rand_chacha::ChaCha8Rng| [rng.random::<f64>(), rng.random::<f64>()];
        // slope ranges wide enough that most directions are popular somewhere
        let u = if rng.random::<f64>() < 0.3 {
            let k = rng.random_range(4..=8usize);
            let mut breaks: Vec<f64> = (0..k).map(|i| (i as f64 + rng.random_range(0.0..0.9)) / k as f64).collect();
            breaks.sort_by(f64::total_cmp);
            USpec::steps(breaks, (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
        } else {
            let r1 = rng.random_range(0.6..0.9);
            let r2 = rng.random_range(0.0..1.0 - r1);
            let (p1, p2) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
            USpec::Smooth(vec![[1.0, r1 * p1.cos(), r1 * p1.sin()], [2.0, r2 * p2.cos(), r2 * p2.sin()]])
        };
        let eps0 = if rng.random::<f64>() < 0.5 { 0.0 } else { rng.random_range(0.0..0.08) };
        let spec = FieldSpec::sinusoidal(eps0, u)?;
        let count = rng.random_range(1..=MAX_RECTS);
        let common_w = rng.random_range(WIDTH_EXPONENTS);
        let mut rects = Vec::with_capacity(count);
        for _ in 0..50 * count {
            if rects.len() == count {
                break;
            }
            let e = if rng.random::<f64>() < 0.5 { common_w } else { rng.random_range(WIDTH_EXPONENTS) };
            let w = (-e as f64).exp2();
            let l = (w * rng.random_range(1.0..64.0)).min(0.5);
            let r = Rect::new(pt(&mut rng), l, w, rng.random_range(-1.0..1.0))?;
            if points_somewhere(&spec, &r) {
                rects.push(r);
            }
        }
        let blob = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut s = Shapes::default();
            for r in &rects {
                if rng.random::<f64>() < 0.7 {
                    s.rects.push(r.dilate(rng.random_range(1.0..2.0)));
                }
            }
            for _ in 0..rng.random_range(1..=4) {
                s.disks.push(Disk { center: pt(rng), radius: rng.random_range(0.02..0.2) });
            }
            s
        };
        let g = blob(&mut rng);
        let h = blob(&mut rng);
        let f = blob(&mut rng);
        Ok(Scenario {
            seed,
            spec,
            rects,
            g,
            h,
            f,
            params: CoverParams::default(),
            q: 2.0,
            p: 2.0,
            comparable_c: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        for r in &self.rects {
            Rect::new(r.center, r.l, r.w, r.slope)?;
        }
        if !(self.q > 1.0) || !(self.p >= 1.0) {
            return invalid(format!("bad exponents q={} p={}", self.q, self.p));
        }
        if self.comparable_c.is_some_and(|c| !(c >= 1.0)) {
            return invalid("comparability constant below 1");
        }
        Ok(())
    }
}

/// Whether `E(R)` is nonempty on a `33 x 5` mesh of `R` (independent of
/// any counting grid).
pub fn points_somewhere(spec: &FieldSpec, r: &Rect) -> bool {
    let (el, es) = r.frame();
    let (lo, hi) = r.ex();
    (0..=32).any(|a| {
        (0..=4).any(|b| {
            let p = r.l * (a as f64 / 32.0 - 0.5);
            let q = r.w * (b as f64 / 4.0 - 0.5);
            let x = [
                (r.center[0] + p * el[0] + q * es[0]).rem_euclid(1.0),
                (r.center[1] + p * el[1] + q * es[1]).rem_euclid(1.0),
            ];
            let s = spec.slope_at(x);
            s >= lo && s <= hi
        })
    })
}

/// Rectangles of the most common width (largest on ties), greedily thinned
/// to a pairwise incomparable family in input order.
pub fn incomparable_subfamily(rects: &[Rect], c: f64) -> Result<Vec<Rect>> {
    let mut widths: Vec<f64> = rects.iter().map(|r| r.w).collect();
    widths.sort_by(f64::total_cmp);
    widths.dedup();
    let Some(&w) = widths
        .iter()
        .rev()
        .max_by_key(|&&w| rects.iter().filter(|r| r.w == w).count())
    else {
        return Ok(Vec::new());
    };
    let mut kept: Vec<Rect> = Vec::new();
    for r in rects.iter().filter(|r| r.w == w) {
        let mut ok = true;
        for k in &kept {
            if comparable(r, k, c)? || comparable(k, r, c)? {
                ok = false;
                break;
            }
        }
        if ok {
            kept.push(*r);
        }
    }
    Ok(kept)
}

fn check_claim(claimed: Option<f64>, measured: f64, what: &str, notes: &mut Vec<String>) -> (f64, bool) {
    match claimed {
        Some(c) if c > measured => {
            notes.push(format!("{what} claimed {c} but data gives {measured}"));
            (c, false)
        }
        Some(c) if !(c > 0.0) => {
            notes.push(format!("{what} must be positive"));
            (c, false)
        }
        Some(c) => (c, true),
        None => (measured, measured > 0.0),
    }
}

/// Both sides of the chosen lemma, measured on `grid`.
pub fn verify_covering(sc: &Scenario, which: Lemma, grid: &CoverGrid) -> Result<CoverReport> {
    sc.validate()?;
    let mut notes = Vec::new();
    let c = sc.comparable_c.unwrap_or(C_COMPARABLE);
    let cell = 1.0 / (grid.n * grid.n) as f64;
    let hit = |mask: &[bool], r: &Rect| {
        let mut k = 0usize;
        grid.raster(r, |p| k += mask[p] as usize);
        k as f64 * cell
    };
    let report = |rects: usize, lhs: f64, rhs: f64, ok: bool, notes: Vec<String>| CoverReport {
        lemma: which,
        seed: sc.seed,
        ratio: if lhs == 0.0 { 0.0 } else { lhs / rhs },
        hypotheses_ok: ok,
        rects_used: rects,
        lhs,
        rhs,
        notes: notes.join("; "),
    };
    if sc.rects.is_empty() {
        return Ok(report(0, 0.0, 1.0, true, notes));
    }
    // rectangles whose hypothesis quantity vanishes on this grid are left
    // out: the lemma applies to every subfamily
    let keep = |rects: Vec<Rect>, positive: &dyn Fn(&Rect) -> bool, notes: &mut Vec<String>| {
        let before = rects.len();
        let kept: Vec<Rect> = rects.into_iter().filter(|r| positive(r)).collect();
        if kept.len() < before {
            notes.push(format!("dropped {} degenerate rectangles", before - kept.len()));
        }
        kept
    };
    match which {
        Lemma::Incomparable => {
            let rects = incomparable_subfamily(&sc.rects, c)?;
            if rects.len() < sc.rects.len() {
                notes.push(format!("kept {} of {} rectangles", rects.len(), sc.rects.len()));
            }
            let f = grid.mask(&sc.f);
            let f_meas = grid.measure(&f);
            let rects = keep(rects, &|r| grid.popularity(r) > 0.0 && hit(&f, r) > 0.0, &mut notes);
            if rects.is_empty() {
                return Ok(report(0, 0.0, 1.0, false, notes));
            }
            let delta = rects.iter().map(|r| grid.popularity(r)).fold(f64::INFINITY, f64::min);
            let lambda = rects.iter().map(|r| hit(&f, r) / r.area()).fold(f64::INFINITY, f64::min).min(1.0);
            let (delta, ok1) = check_claim(sc.params.delta, delta, "delta", &mut notes);
            let (lambda, ok2) = check_claim(sc.params.lambda, lambda, "lambda", &mut notes);
            let lhs: f64 = rects.iter().map(Rect::area).sum();
            let rhs = f_meas / (delta * lambda.powf(sc.p));
            Ok(report(rects.len(), lhs, rhs, ok1 && ok2, notes))
        }
        Lemma::Density => {
            let g = grid.mask(&sc.g);
            let g_meas = grid.measure(&g);
            let eg = |r: &Rect| grid.e_of(r).iter().filter(|&&p| g[p]).count() as f64 * cell;
            let rects = keep(sc.rects.clone(), &|r| eg(r) > 0.0, &mut notes);
            if rects.is_empty() {
                return Ok(report(0, 0.0, 1.0, false, notes));
            }
            let delta = rects.iter().map(|r| eg(r) / g_meas).fold(f64::INFINITY, f64::min);
            let (delta, ok) = check_claim(sc.params.delta, delta, "delta", &mut notes);
            let lhs = grid.union_measure(&rects);
            let rhs = g_meas / delta.powf(sc.q);
            Ok(report(rects.len(), lhs, rhs, ok, notes))
        }
        Lemma::Population => {
            let h = grid.mask(&sc.h);
            let h_meas = grid.measure(&h);
            let rects = keep(sc.rects.clone(), &|r| grid.popularity(r) > 0.0 && hit(&h, r) > 0.0, &mut notes);
            if rects.is_empty() {
                return Ok(report(0, 0.0, 1.0, false, notes));
            }
            let sigma = rects.iter().map(|r| grid.popularity(r)).fold(f64::INFINITY, f64::min).min(1.0);
            let delta = rects.iter().map(|r| hit(&h, r) / r.area()).fold(f64::INFINITY, f64::min).min(1.0);
            let (sigma, ok1) = check_claim(sc.params.sigma, sigma, "sigma", &mut notes);
            let (delta, ok2) = check_claim(sc.params.delta, delta, "delta", &mut notes);
            let lhs = grid.union_measure(&rects);
            let rhs = h_meas / (sigma * delta * delta);
            Ok(report(rects.len(), lhs, rhs, ok1 && ok2, notes))
        }
    }
}

/// Per-lemma maximum ratio over hypothesis-satisfying scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub n: usize,
    pub scenarios: usize,
    pub lemma: Lemma,
    pub max_ratio: f64,
    pub argmax_seed: u64,
    pub satisfied: usize,
}

/// Scenario seeds of a corpus: `sub_seed(seed, 8, i)`.
pub fn corpus_seeds(seed: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| sub_seed(seed, 8, i)).collect()
}

/// Runs every lemma on every scenario at grid size `n`.
pub fn run_corpus(scenarios: &[Scenario], n: usize) -> Result<(Vec<CoverReport>, Vec<CorpusSummary>)> {
    let rows: Vec<Vec<CoverReport>> = scenarios
        .par_iter()
        .map(|sc| {
            let grid = CoverGrid::new(&sc.spec, n)?;
            Lemma::ALL.iter().map(|&l| verify_covering(sc, l, &grid)).collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<CoverReport> = rows.into_iter().flatten().collect();
    let summaries = Lemma::ALL
        .iter()
        .map(|&lemma| {
            let mut best = (0.0, 0);
            let mut satisfied = 0;
            for r in rows.iter().filter(|r| r.lemma == lemma && r.hypotheses_ok) {
                satisfied += 1;
                if r.ratio > best.0 {
                    best = (r.ratio, r.seed);
                }
            }
            CorpusSummary { n, scenarios: scenarios.len(), lemma, max_ratio: best.0, argmax_seed: best.1, satisfied }
        })
        .collect();
    Ok((rows, summaries))
}
