//! Norm estimation and the named experiments.
//!
//! Numerics can only exhibit lower bounds for operator norms, so every
//! experiment reports the largest observed ratio together with how much it
//! moves when the grid is refined. Inputs are trigonometric polynomials
//! drawn from `sub_seed(seed, INPUT_STREAM, trial)` in a band that fits the
//! coarsest grid, so the same trial is the same function on every grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapted::{curve_filter, AdaptedGrid};
use crate::beta::{curve_beta, weighted_beta_sum, LipschitzProfile};
use crate::bumps::{psi, psi_repro, LPFamily};
use crate::covering::{corpus_seeds, run_corpus, CorpusSummary, CoverReport, Lemma, Scenario};
use crate::error::{invalid, Error, Result};
use crate::fields::FieldSpec;
use crate::geometry::Rect;
use crate::grid::{log2, random_bandlimited, remove_row_means, ConeSpec, GridFunction2D, OffgridSampler};
use crate::ops::{hv_bands, Operator};
use crate::rng::sub_seed;
use crate::tiles::{frozen_packet, Tile, TileSetConfig};
use crate::transforms::{carleson_rhs, commutator_assembly, h_v_with, l_max, HvOptions, CARLESON_L_MIN};

pub const REPORT_NOTE: &str = "ratios are empirical lower bounds on operator norms; \
     acceptance binds the maximum ratio and its change under grid refinement";

pub const INPUT_STREAM: u64 = 1;
pub const DEFAULT_TRIALS: usize = 64;
pub const POWER_MAX_ITER: usize = 50;
pub const POWER_TOL: f64 = 1e-4;
/// Norms below this count as zero in the unperturbed commutator run.
pub const NULL_LEVEL: f64 = 5e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    EnsembleMax,
    PowerP,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ensemble_max" => Ok(Method::EnsembleMax),
            "power_p" => Ok(Method::PowerP),
            _ => invalid(format!("unknown method '{s}'")),
        }
    }
}

/// Random inputs: cone half-angle slope and dyadic `xi2` band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputFamily {
    pub cone: f64,
    pub band: (i32, i32),
    #[serde(default)]
    pub row_mean_zero: bool,
}

impl InputFamily {
    /// Widest band that fits an `n` grid.
    pub fn full(n: usize) -> Self {
        InputFamily { cone: 1.0, band: (0, log2(n) - 2), row_mean_zero: false }
    }

    pub fn input(&self, seed: u64, trial: usize, n: usize) -> Result<GridFunction2D> {
        let f = random_bandlimited(sub_seed(seed, INPUT_STREAM, trial as u64), n, ConeSpec::new(self.cone)?, self.band)?;
        if self.row_mean_zero {
            remove_row_means(&f)
        } else {
            Ok(f)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment: String,
    pub seed: u64,
    pub n: usize,
    pub p: f64,
    pub l: Option<i32>,
    pub in_norm: f64,
    pub out_norm: f64,
    pub ratio: f64,
}

pub const CSV_HEADER: [&str; 8] = ["experiment", "seed", "n", "p", "l", "in_norm", "out_norm", "ratio"];

impl TrialRecord {
    pub fn new(experiment: &str, seed: u64, n: usize, p: f64, l: Option<i32>, in_norm: f64, out_norm: f64) -> Self {
        TrialRecord { experiment: experiment.into(), seed, n, p, l, in_norm, out_norm, ratio: out_norm / in_norm }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub op: String,
    pub p: f64,
    pub n: usize,
    pub method: Method,
    pub value: f64,
    pub trials: usize,
    pub seed: u64,
    pub ensemble_max: f64,
    pub iterations: usize,
}

fn ratio_p(op: &Operator, f: &GridFunction2D, p: f64) -> Result<(f64, f64, GridFunction2D)> {
    let tf = op.apply(f)?;
    Ok((f.lp_norm(p)?, tf.lp_norm(p)?, tf))
}

/// `|z|^e z/|z|` pointwise.
fn signed_power(f: &GridFunction2D, e: f64) -> GridFunction2D {
    GridFunction2D {
        n: f.n,
        values: f
            .values
            .iter()
            .map(|&z| {
                let r = z.norm();
                if r == 0.0 {
                    z
                } else {
                    z * (r.powf(e) / r)
                }
            })
            .collect(),
    }
}

/// Lower bound for `||op||_{p -> p}`.
pub fn estimate_norm(
    op: &Operator,
    p: f64,
    trials: usize,
    seed: u64,
    method: Method,
    family: InputFamily,
) -> Result<(NormEstimate, Vec<TrialRecord>)> {
    if trials == 0 {
        return invalid("need at least one trial");
    }
    if !(p > 1.0 && p.is_finite()) {
        return invalid(format!("p = {p} outside (1, inf)"));
    }
    if method == Method::PowerP && !op.has_adjoint() {
        return Err(Error::Unsupported(format!("power iteration needs the adjoint of {}", op.id)));
    }
    let name = op.id.to_string();
    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let f = family.input(seed, t, op.n)?;
            let (a, b, _) = ratio_p(op, &f, p).map_err(|e| e.context(format!("{name} trial {t}")))?;
            Ok(TrialRecord::new(&name, sub_seed(seed, INPUT_STREAM, t as u64), op.n, p, None, a, b))
        })
        .collect::<Result<_>>()?;
    let (best_t, ens) = records
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (t, r)| if r.ratio > acc.1 { (t, r.ratio) } else { acc });
    let mut value = ens;
    let mut iterations = 0;
    if method == Method::PowerP {
        let q = p / (p - 1.0);
        let mut f = family.input(seed, best_t, op.n)?;
        let mut prev = ens;
        for it in 0..POWER_MAX_ITER {
            let tf = op.apply(&f)?;
            let back = op.apply_adjoint(&signed_power(&tf, p - 1.0))?;
            let next = signed_power(&back, q - 1.0);
            let nrm = next.lp_norm(p)?;
            if nrm == 0.0 || !nrm.is_finite() {
                break;
            }
            f = next.scale(crate::C64::new(1.0 / nrm, 0.0));
            let (a, b, _) = ratio_p(op, &f, p).map_err(|e| e.context(format!("{name} power step {it}")))?;
            let r = b / a;
            iterations = it + 1;
            value = value.max(r);
            if (r - prev).abs() < POWER_TOL {
                break;
            }
            prev = r;
        }
    }
    Ok((
        NormEstimate { op: name, p, n: op.n, method, value, trials, seed, ensemble_max: ens, iterations },
        records,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub l_values: Vec<i32>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of `log2 norm`.
    pub residual: f64,
}

/// Least squares of `log2 norm` against `l`.
pub fn fit_decay(l_values: &[i32], norms: &[f64]) -> Result<DecayFit> {
    if l_values.len() != norms.len() {
        return invalid("one norm per scale");
    }
    if l_values.len() < 4 {
        return invalid(format!("decay fit needs at least 4 points, got {}", l_values.len()));
    }
    if let Some(bad) = norms.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return invalid(format!("decay fit needs positive norms, got {bad}"));
    }
    let xs: Vec<f64> = l_values.iter().map(|&l| l as f64).collect();
    let ys: Vec<f64> = norms.iter().map(|v| v.log2()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return invalid("decay fit needs distinct scales");
    }
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(DecayFit {
        l_values: l_values.to_vec(),
        norms: norms.to_vec(),
        slope,
        intercept,
        residual: (ss / m).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Commutator,
    Square,
    AdaptedLp,
    Carleson,
    PointwiseBeta,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Commutator => "commutator",
            ExperimentKind::Square => "square",
            ExperimentKind::AdaptedLp => "adapted-lp",
            ExperimentKind::Carleson => "carleson",
            ExperimentKind::PointwiseBeta => "pointwise-beta",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_plain(s)
    }
}

fn serde_plain(s: &str) -> Result<ExperimentKind> {
    [
        ExperimentKind::Commutator,
        ExperimentKind::Square,
        ExperimentKind::AdaptedLp,
        ExperimentKind::Carleson,
        ExperimentKind::PointwiseBeta,
    ]
    .into_iter()
    .find(|k| k.name() == s)
    .ok_or_else(|| Error::Invalid(format!("unknown experiment '{s}'")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PList {
    One(f64),
    Many(Vec<f64>),
}

impl PList {
    pub fn values(&self) -> Vec<f64> {
        match self {
            PList::One(p) => vec![*p],
            PList::Many(v) => v.clone(),
        }
    }
}

fn default_p() -> PList {
    PList::One(2.0)
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

/// Experiment JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub spec: FieldSpec,
    #[serde(default = "default_p")]
    pub p: PList,
    pub n: usize,
    #[serde(default)]
    pub l_list: Vec<i32>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
    /// Second grid for stability; defaults to `2n` where the experiment
    /// reports stability.
    #[serde(default)]
    pub compare_n: Option<usize>,
    /// Input family; defaults to the full band of the coarser grid.
    #[serde(default)]
    pub inputs: Option<InputFamily>,
    #[serde(default)]
    pub l_min: Option<i32>,
    /// Pointwise-beta tiles.
    #[serde(default)]
    pub tiles: Option<TileSetConfig>,
    /// Pointwise-beta curve offsets `t = h(c_s) + offset * w_s`.
    #[serde(default)]
    pub t_offsets: Option<Vec<f64>>,
    #[serde(default)]
    pub j0_max: Option<u32>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        crate::grid::check_n(self.n)?;
        if let Some(m) = self.compare_n {
            crate::grid::check_n(m)?;
        }
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        for p in self.p.values() {
            if !(p > 1.0 && p.is_finite()) {
                return invalid(format!("p = {p} outside (1, inf)"));
            }
        }
        let fam = self.family();
        if (1usize << fam.band.1.max(0)) > self.grids().into_iter().min().unwrap_or(self.n) / 4 {
            return invalid("input band does not fit the grid");
        }
        match self.experiment {
            ExperimentKind::Commutator => {
                if self.l_list.len() < 4 {
                    return invalid(format!("commutator decay needs at least 4 scales, got {}", self.l_list.len()));
                }
                if self.l_list.iter().any(|&l| l < 0) {
                    return invalid("commutator scales must be >= 0");
                }
                if self.spec.u.classes().is_none() {
                    return Err(Error::Unsupported("commutator needs a slope function with finitely many values".into()));
                }
            }
            ExperimentKind::Carleson => {
                if self.spec.eps0 != 0.0 {
                    return invalid("the Carleson experiment needs eps0 = 0");
                }
            }
            ExperimentKind::PointwiseBeta => {
                self.tile_family()?.tiles()?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Grid sizes the experiment runs on.
    pub fn grids(&self) -> Vec<usize> {
        match self.experiment {
            ExperimentKind::Square | ExperimentKind::AdaptedLp | ExperimentKind::PointwiseBeta => {
                vec![self.n, self.compare_n.unwrap_or(2 * self.n)]
            }
            _ => match self.compare_n {
                Some(m) => vec![self.n, m],
                None => vec![self.n],
            },
        }
    }

    pub fn family(&self) -> InputFamily {
        self.inputs.unwrap_or_else(|| {
            let coarse = self.grids().into_iter().min().unwrap_or(self.n).max(16);
            InputFamily::full(coarse)
        })
    }

    pub fn hv_options(&self) -> HvOptions {
        HvOptions { l_min: self.l_min.unwrap_or(HvOptions::default().l_min) }
    }

    pub fn tile_family(&self) -> Result<TileSetConfig> {
        Ok(self.tiles.clone().unwrap_or(TileSetConfig { l: 1, k_list: vec![3, 4], omega_indices: vec![4], pos_window: [5, 5] }))
    }

    /// Human-readable plan (for dry runs).
    pub fn plan(&self) -> String {
        let fam = self.family();
        let mut s = format!(
            "experiment {}\ngrids {:?}\np {:?}\ntrials {}\nseed {}\ninputs cone {} band [{}, {}]\n",
            self.experiment.name(),
            self.grids(),
            self.p.values(),
            self.trials,
            self.seed,
            fam.cone,
            fam.band.0,
            fam.band.1
        );
        if !self.l_list.is_empty() {
            s += &format!("l_list {:?}\n", self.l_list);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub label: String,
    pub p: f64,
    pub l: Option<i32>,
    pub n: usize,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub experiment: String,
    pub note: String,
    pub seed: u64,
    pub n: usize,
    pub grids: Vec<usize>,
    pub max: f64,
    pub mean: f64,
    pub groups: Vec<GroupStat>,
    /// One fit per `p` (commutator only).
    pub fits: Vec<(f64, DecayFit)>,
    pub slope: Option<f64>,
    /// Largest relative change of a reported extreme between the grids.
    pub stability: Option<f64>,
    /// Unperturbed field (`h = x1`): commutator norms are residue and no
    /// slope is fitted; pointwise rows are scaled deviations, not ratios.
    pub null_run: bool,
    pub warnings: Vec<String>,
    pub skipped: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub summary: ExperimentSummary,
}

fn group_stats(records: &[TrialRecord]) -> Vec<GroupStat> {
    let mut groups: Vec<GroupStat> = Vec::new();
    for r in records {
        let pos = groups
            .iter()
            .position(|g| g.label == r.experiment && g.p == r.p && g.l == r.l && g.n == r.n);
        let g = match pos {
            Some(i) => &mut groups[i],
            None => {
                groups.push(GroupStat {
                    label: r.experiment.clone(),
                    p: r.p,
                    l: r.l,
                    n: r.n,
                    count: 0,
                    min: f64::INFINITY,
                    max: f64::NEG_INFINITY,
                    mean: 0.0,
                });
                groups.last_mut().unwrap()
            }
        };
        g.count += 1;
        g.min = g.min.min(r.ratio);
        g.max = g.max.max(r.ratio);
        g.mean += r.ratio;
    }
    for g in &mut groups {
        g.mean /= g.count as f64;
    }
    groups
}

fn rel_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (b - a).abs() / a.abs().max(b.abs())
    }
}

/// Largest relative change of `min` and `max` (or just `max`) between the
/// first grid and every other grid, over matching groups.
fn stability(groups: &[GroupStat], grids: &[usize], with_min: bool) -> Option<f64> {
    if grids.len() < 2 {
        return None;
    }
    let mut worst: f64 = 0.0;
    for g in groups.iter().filter(|g| g.n == grids[0]) {
        for h in groups.iter().filter(|h| h.n != grids[0] && h.label == g.label && h.p == g.p && h.l == g.l) {
            worst = worst.max(rel_change(g.max, h.max));
            if with_min {
                worst = worst.max(rel_change(g.min, h.min));
            }
        }
    }
    Some(worst)
}

fn summary(cfg: &ExperimentConfig, records: &[TrialRecord], with_min: bool) -> ExperimentSummary {
    let groups = group_stats(records);
    let grids = cfg.grids();
    let main: Vec<f64> = records.iter().filter(|r| r.n == cfg.n).map(|r| r.ratio).collect();
    let max = main.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = main.iter().sum::<f64>() / main.len().max(1) as f64;
    ExperimentSummary {
        experiment: cfg.experiment.name().into(),
        note: REPORT_NOTE.into(),
        seed: cfg.seed,
        n: cfg.n,
        stability: stability(&groups, &grids, with_min),
        grids,
        max,
        mean,
        groups,
        fits: Vec::new(),
        slope: None,
        null_run: false,
        warnings: Vec::new(),
        skipped: Vec::new(),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::Commutator => run_commutator_decay(cfg),
        ExperimentKind::Square => run_square_function(cfg),
        ExperimentKind::AdaptedLp => run_adapted_lp(cfg),
        ExperimentKind::Carleson => run_carleson(cfg),
        ExperimentKind::PointwiseBeta => run_pointwise_beta(cfg),
    }
}

fn trial_seed(cfg: &ExperimentConfig, t: usize) -> u64 {
    sub_seed(cfg.seed, INPUT_STREAM, t as u64)
}

/// `||Comm_l f||_p / ||f||_p` per scale; decay fitted over `l >= 1`.
pub fn run_commutator_decay(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let name = cfg.experiment.name();
    let fam = cfg.family();
    let ps = cfg.p.values();
    let opts = cfg.hv_options();
    let mut records = Vec::new();
    for n in cfg.grids() {
        let ag = AdaptedGrid::new(&cfg.spec, n)?;
        let rows: Vec<Vec<TrialRecord>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let f = fam.input(cfg.seed, t, n)?;
                let mut out = Vec::new();
                for &l in &cfg.l_list {
                    let c = commutator_assembly(&ag, &f, &cfg.spec, l, opts)
                        .map_err(|e| e.context(format!("commutator l={l} trial {t}")))?;
                    for &p in &ps {
                        out.push(TrialRecord::new(name, trial_seed(cfg, t), n, p, Some(l), f.lp_norm(p)?, c.lp_norm(p)?));
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        records.extend(rows.into_iter().flatten());
    }
    let mut sum = summary(cfg, &records, false);
    sum.null_run = cfg.spec.is_unperturbed();
    if sum.null_run {
        sum.warnings.push("unperturbed field; slope not meaningful".into());
        if records.iter().any(|r| r.ratio > NULL_LEVEL) {
            sum.warnings.push(format!("null run has norms above {NULL_LEVEL}"));
        }
    } else {
        for &p in &ps {
            let (ls, norms): (Vec<i32>, Vec<f64>) = sum
                .groups
                .iter()
                .filter(|g| g.n == cfg.n && g.p == p && g.l.is_some_and(|l| l >= 1))
                .map(|g| (g.l.unwrap(), g.max))
                .unzip();
            match fit_decay(&ls, &norms) {
                Ok(fit) => sum.fits.push((p, fit)),
                Err(e) => sum.warnings.push(format!("p = {p}: {e}")),
            }
        }
        sum.slope = sum.fits.iter().find(|(p, _)| *p == 2.0).or(sum.fits.first()).map(|(_, f)| f.slope);
    }
    Ok(ExperimentOutput { records, summary: sum })
}

fn square_fn(parts: &[GridFunction2D]) -> GridFunction2D {
    let n = parts[0].n;
    let values = (0..n * n)
        .map(|q| crate::C64::new(parts.iter().map(|g| g.values[q].norm_sqr()).sum::<f64>().sqrt(), 0.0))
        .collect();
    GridFunction2D { n, values }
}

fn p_warnings(ps: &[f64]) -> Vec<String> {
    ps.iter()
        .filter(|&&p| p <= 1.5)
        .map(|p| format!("p = {p} is at or below 3/2; exploratory run"))
        .collect()
}

/// `||(sum_k |H_v P_k f|^2)^(1/2)||_p / ||f||_p`.
pub fn run_square_function(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let name = cfg.experiment.name();
    let fam = cfg.family();
    let ps = cfg.p.values();
    let opts = cfg.hv_options();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for n in cfg.grids() {
        let rows: Vec<Option<Vec<TrialRecord>>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let f = fam.input(cfg.seed, t, n)?;
                if f.l2_norm() == 0.0 {
                    return Ok(None);
                }
                let sq = square_fn(&hv_bands(&f, &cfg.spec, opts).map_err(|e| e.context(format!("trial {t}")))?);
                ps.iter()
                    .map(|&p| Ok(TrialRecord::new(name, trial_seed(cfg, t), n, p, None, f.lp_norm(p)?, sq.lp_norm(p)?)))
                    .collect::<Result<Vec<_>>>()
                    .map(Some)
            })
            .collect::<Result<_>>()?;
        for (t, r) in rows.into_iter().enumerate() {
            match r {
                Some(v) => records.extend(v),
                None => skipped.push(format!("n = {n} trial {t}: zero input")),
            }
        }
    }
    let mut sum = summary(cfg, &records, false);
    sum.warnings = p_warnings(&ps);
    sum.skipped = skipped;
    Ok(ExperimentOutput { records, summary: sum })
}

/// Square functions of `P~_k f` and `P~_k^* f`; the bracket is `[min, max]`.
pub fn run_adapted_lp(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let fam = cfg.family();
    let ps = cfg.p.values();
    let mut records = Vec::new();
    for n in cfg.grids() {
        let ag = AdaptedGrid::new(&cfg.spec, n)?;
        let symbols: Vec<_> = LPFamily::for_grid(n).iter().map(|k| move |s| psi(k, s)).collect();
        let rows: Vec<Vec<TrialRecord>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let f = fam.input(cfg.seed, t, n)?;
                let fwd = ag.apply_bank(&[&f], &symbols)?;
                let adj = ag.apply_adjoint_bank(&f, &symbols)?;
                let (sf, sa) = (square_fn(&fwd), square_fn(&adj));
                let mut out = Vec::new();
                for &p in &ps {
                    let nf = f.lp_norm(p)?;
                    out.push(TrialRecord::new("adapted-lp", trial_seed(cfg, t), n, p, None, nf, sf.lp_norm(p)?));
                    out.push(TrialRecord::new("adapted-lp-adjoint", trial_seed(cfg, t), n, p, None, nf, sa.lp_norm(p)?));
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        records.extend(rows.into_iter().flatten());
    }
    Ok(ExperimentOutput { summary: summary(cfg, &records, true), records })
}

/// `C / c` of each bracket group.
pub fn bracket_ratios(sum: &ExperimentSummary) -> Vec<(String, f64, usize, f64)> {
    sum.groups.iter().map(|g| (g.label.clone(), g.p, g.n, g.max / g.min)).collect()
}

/// Multiplier side `||H_v f||_2` against the physical-side norm.
pub fn run_carleson(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let name = cfg.experiment.name();
    let fam = cfg.family();
    let mut records = Vec::new();
    for n in cfg.grids() {
        let hi = l_max(n);
        let rows: Vec<TrialRecord> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let f = fam.input(cfg.seed, t, n)?;
                let lhs = h_v_with(&f, &cfg.spec, HvOptions { l_min: CARLESON_L_MIN })?.l2_norm();
                let rhs = carleson_rhs(&f, &cfg.spec, CARLESON_L_MIN, hi).map_err(|e| e.context(format!("trial {t}")))?;
                Ok(TrialRecord::new(name, trial_seed(cfg, t), n, 2.0, None, lhs, rhs))
            })
            .collect::<Result<_>>()?;
        records.extend(rows);
    }
    Ok(ExperimentOutput { summary: summary(cfg, &records, true), records })
}

/// Largest relative Carleson gap `|rhs/lhs - 1|` in a record set.
pub fn max_gap(records: &[TrialRecord]) -> f64 {
    records.iter().map(|r| (r.ratio - 1.0).abs()).fold(0.0, f64::max)
}

/// Rectangle of a tile.
pub fn tile_rect(s: &Tile) -> Rect {
    Rect { center: s.center(), l: s.length(), w: s.width(), slope: s.slope() }
}

/// `max |phi - P#_k phi|` over points of `Γ_t` inside the adapted tile, for
/// the packet frozen at `v_t`. `None` if the curve misses the tile.
pub fn pointwise_lhs(spec: &FieldSpec, s: &Tile, t: f64, n: usize) -> Result<Option<f64>> {
    let phi = frozen_packet(s, spec, t, n)?;
    let sampler = OffgridSampler::new(&phi);
    let ar = spec.adapted_rectangle(&tile_rect(s));
    let cf = curve_filter(
        spec,
        t,
        0.0,
        4 * n,
        |y| sampler.sample([y[0].rem_euclid(1.0), y[1].rem_euclid(1.0)]),
        |x| psi_repro(s.k, x),
    )?;
    let mut best: Option<f64> = None;
    for ((y, raw), filt) in cf.points.iter().zip(&cf.raw).zip(&cf.filtered) {
        if ar.contains([y[0].rem_euclid(1.0), y[1].rem_euclid(1.0)]) {
            let d = (raw - filt).norm();
            best = Some(best.map_or(d, |b: f64| b.max(d)));
        }
    }
    Ok(best)
}

/// `2^(-3l/2) 2^k`.
pub fn pointwise_scale(s: &Tile) -> f64 {
    (s.k as f64 - 1.5 * s.l() as f64).exp2()
}

/// Number of `sigma` samples used to locate `J(t, s)`.
pub const INTERVAL_SAMPLES: usize = 4096;
pub const DEFAULT_J0_MAX: u32 = 8;

/// Ratio of the pointwise deviation to the beta bound over `(t, s)` pairs.
/// Unperturbed fields have a zero bound; those runs record the deviation
/// divided by `2^(-3l/2) 2^k` under the label `pointwise-beta-null`.
/// Rows carry `p = inf` (sup over the curve) and the pair index as seed.
pub fn run_pointwise_beta(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let tiles = cfg.tile_family()?.tiles()?;
    let offsets = cfg.t_offsets.clone().unwrap_or_else(|| vec![0.0]);
    let j0_max = cfg.j0_max.unwrap_or(DEFAULT_J0_MAX);
    let null = cfg.spec.is_unperturbed();
    let pairs: Vec<(Tile, f64)> = tiles
        .iter()
        .flat_map(|s| offsets.iter().map(move |&o| (*s, cfg.spec.h(s.center()) + o * s.width())))
        .collect();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    // the bound does not depend on the grid
    let bounds: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|(s, t)| {
            if null {
                return Ok(pointwise_scale(s));
            }
            let cb = curve_beta(&cfg.spec, *t, s, j0_max, INTERVAL_SAMPLES)?;
            Ok(pointwise_scale(s) * weighted_beta_sum(&cb.betas))
        })
        .collect();
    let label = if null { "pointwise-beta-null" } else { "pointwise-beta" };
    for n in cfg.grids() {
        let rows: Vec<std::result::Result<TrialRecord, String>> = pairs
            .par_iter()
            .zip(&bounds)
            .enumerate()
            .map(|(q, ((s, t), bound))| {
                let tag = format!("pair {q} (k={}, l={}, pos={:?}, t={t})", s.k, s.l(), s.pos);
                let rhs = match bound {
                    Ok(b) if *b > 0.0 => *b,
                    Ok(_) => return Err(format!("{tag}: zero bound")),
                    Err(e) => return Err(format!("{tag}: {e}")),
                };
                match pointwise_lhs(&cfg.spec, s, *t, n) {
                    Ok(Some(lhs)) => Ok(TrialRecord::new(label, q as u64, n, f64::INFINITY, Some(s.l()), rhs, lhs)),
                    Ok(None) => Err(format!("{tag}: curve misses the tile on n = {n}")),
                    Err(e) => Err(format!("{tag}: {e}")),
                }
            })
            .collect();
        for r in rows {
            match r {
                Ok(rec) => records.push(rec),
                Err(msg) => skipped.push(msg),
            }
        }
    }
    let mut sum = summary(cfg, &records, false);
    sum.skipped = skipped;
    sum.null_run = null;
    if null {
        sum.warnings.push("unperturbed field; rows are LHS / 2^(k-3l/2), not ratios".into());
    }
    Ok(ExperimentOutput { records, summary: sum })
}

/// Empirical Carleson constants of a Lipschitz corpus at several node counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaCorpusReport {
    pub seed: u64,
    pub count: usize,
    pub j0_list: Vec<u32>,
    /// `(m, max over corpus and j0 of carleson_sum / (j0^3 lip^2))`
    pub constants: Vec<(u32, f64)>,
    /// Largest relative change of the constant between consecutive `m`.
    pub drift: f64,
}

pub fn run_beta_corpus(seed: u64, count: usize, m_list: &[u32], j0_list: &[u32]) -> Result<BetaCorpusReport> {
    if m_list.is_empty() || j0_list.is_empty() || count == 0 {
        return invalid("beta corpus needs node counts, j0 values and profiles");
    }
    let profiles: Vec<LipschitzProfile> =
        (0..count as u64).map(|i| LipschitzProfile::random(sub_seed(seed, 9, i))).collect();
    let constants: Vec<(u32, f64)> = m_list
        .iter()
        .map(|&m| {
            let worst = profiles
                .par_iter()
                .map(|p| {
                    let a = p.sample(m)?;
                    j0_list
                        .iter()
                        .map(|&j0| crate::beta::carleson_constant(&a, j0))
                        .try_fold(0.0f64, |acc, c| c.map(|c| acc.max(c)))
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            Ok((m, worst))
        })
        .collect::<Result<_>>()?;
    let drift = constants.windows(2).map(|w| rel_change(w[0].1, w[1].1)).fold(0.0, f64::max);
    Ok(BetaCorpusReport { seed, count, j0_list: j0_list.to_vec(), constants, drift })
}

/// Covering corpus at several grid sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverCorpusReport {
    pub seed: u64,
    pub scenarios: usize,
    pub summaries: Vec<CorpusSummary>,
    /// Per lemma, the relative change of the corpus maximum across grids.
    pub stability: Vec<(Lemma, f64)>,
}

pub fn run_cover_corpus(seed: u64, count: usize, grids: &[usize]) -> Result<(CoverCorpusReport, Vec<CoverReport>)> {
    let scenarios: Vec<Scenario> = corpus_seeds(seed, count).into_iter().map(Scenario::random).collect::<Result<_>>()?;
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for &n in grids {
        let (r, s) = run_corpus(&scenarios, n)?;
        rows.extend(r);
        summaries.extend(s);
    }
    let stability = Lemma::ALL
        .iter()
        .map(|&l| {
            let maxima: Vec<f64> = summaries.iter().filter(|s| s.lemma == l).map(|s| s.max_ratio).collect();
            let worst = maxima.iter().skip(1).map(|&m| rel_change(maxima[0], m)).fold(0.0, f64::max);
            (l, worst)
        })
        .collect();
    Ok((CoverCorpusReport { seed, scenarios: count, summaries, stability }, rows))
}
