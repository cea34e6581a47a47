//! `lh`: build fields, apply operators, estimate norms and run experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.
//! Nothing is written unless the whole command succeeds.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use lh_core::beta::{BetaTable, LipschitzProfile, LipschitzSample};
use lh_core::covering::{verify_covering, CoverGrid, Lemma, Scenario};
use lh_core::fields::FieldSpec;
use lh_core::grid::{check_n, random_bandlimited, ConeSpec, GridFunction2D};
use lh_core::harness::{
    estimate_norm, run_beta_corpus, run_cover_corpus, run_experiment, ExperimentConfig, ExperimentKind, InputFamily,
    Method, TrialRecord,
};
use lh_core::ops::Operator;
use lh_core::tiles::{coefficients, curved_packet, curved_support_window, support_leakage, wave_packet, TileSetConfig};

#[derive(Parser)]
#[command(name = "lh", version, about = "Directional Hilbert transform toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// JSON config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (or file for `op apply`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Worker threads (falls back to LH_THREADS, then all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Validate and print the plan without computing
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Field specs: `make` dumps slopes and level curves, `check` validates
    Field {
        #[arg(value_parser = ["make", "check"])]
        action: String,
    },
    /// Apply an operator to a grid dump
    Op {
        #[arg(value_parser = ["apply"])]
        action: Option<String>,
        /// Operator id, e.g. Hv, Pk:4, POmega:l=2,i=5
        #[arg(long)]
        id: String,
        #[arg(long = "in")]
        input: PathBuf,
        /// Also write the result as CSV (i, j, re, im) next to the dump
        #[arg(long)]
        csv: bool,
    },
    /// Lower bound for an operator norm
    Norm {
        #[arg(value_parser = ["estimate"])]
        action: String,
        #[arg(long)]
        id: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 64)]
        trials: usize,
        #[arg(long, default_value = "ensemble_max")]
        method: String,
    },
    /// Run an experiment; the kind defaults to the one named in the config
    Exp {
        #[arg(value_parser = ["commutator", "square", "adapted-lp", "carleson", "pointwise-beta"])]
        kind: Option<String>,
    },
    /// Beta tables and the Lipschitz corpus
    Beta {
        #[arg(value_parser = ["table", "corpus"])]
        action: String,
    },
    /// Covering-lemma verifiers
    Cover {
        #[arg(value_parser = ["verify", "corpus"])]
        action: String,
    },
    /// Tile coefficients and packet checks
    Tiles {
        #[arg(value_parser = ["dump", "check"])]
        action: String,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Numerical(String),
}

impl From<lh_core::Error> for Failure {
    fn from(e: lh_core::Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

type Res<T> = Result<T, Failure>;

fn cfg_err(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

/// Files produced by a command, written only after it succeeds.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
    stdout: String,
}

impl Outputs {
    fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    fn say(&mut self, line: impl AsRef<str>) {
        self.stdout.push_str(line.as_ref());
        self.stdout.push('\n');
    }

    fn commit(self) -> Res<()> {
        for (path, bytes) in &self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Failure::Numerical(format!("{}: {e}", dir.display())))?;
            }
            fs::write(path, bytes).map_err(|e| Failure::Numerical(format!("{}: {e}", path.display())))?;
        }
        print!("{}", self.stdout);
        Ok(())
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Res<T> {
    let text = fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))
}

fn need_config(c: &Common) -> Res<&Path> {
    c.config.as_deref().ok_or_else(|| cfg_err("--config is required"))
}

fn out_dir(c: &Common) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn json_bytes<T: Serialize>(v: &T) -> Res<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn csv_bytes<T: Serialize>(rows: &[T], header: Option<&[&str]>) -> Res<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(header.is_none()).from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h).map_err(|e| Failure::Numerical(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| Failure::Numerical(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Failure::Numerical(e.to_string()))
}

fn grid_csv(f: &GridFunction2D) -> Res<Vec<u8>> {
    let rows: Vec<(usize, usize, f64, f64)> =
        (0..f.n * f.n).map(|q| (q / f.n, q % f.n, f.values[q].re, f.values[q].im)).collect();
    csv_bytes(&rows, Some(&["i", "j", "re", "im"]))
}

/// Field config: a bare spec or `{spec, n, curves}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum FieldConfig {
    Wrapped {
        spec: FieldSpec,
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        curves: Option<Vec<f64>>,
    },
    Bare(FieldSpec),
}

fn load_field(c: &Common) -> Res<(FieldSpec, usize, Vec<f64>)> {
    let (spec, n, curves) = match read_json::<FieldConfig>(need_config(c)?)? {
        FieldConfig::Wrapped { spec, n, curves } => (spec, n, curves),
        FieldConfig::Bare(spec) => (spec, None, None),
    };
    spec.validate()?;
    let n = c.n.or(n).unwrap_or(128);
    check_n(n)?;
    let curves = curves.unwrap_or_else(|| (0..8).map(|i| i as f64 / 8.0).collect());
    Ok((spec, n, curves))
}

fn cmd_field(c: &Common, action: &str) -> Res<Outputs> {
    let (spec, n, curves) = load_field(c)?;
    let mut out = Outputs::default();
    let dev = spec.max_grad_deviation(256);
    let steepest = curves
        .iter()
        .map(|&t| spec.level_curve(t, 256).map(|lc| lc.max_slope()))
        .collect::<lh_core::Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.say(format!("field ok: eps0 = {}, |grad h - e1| <= {dev:.3e}, level-curve slope <= {steepest:.3e}", spec.eps0));
    if c.dry_run || action == "check" {
        if c.dry_run {
            out.say(format!("plan: slope and level maps on n = {n}, {} level curves", curves.len()));
        }
        return Ok(out);
    }
    let slopes = spec.slope_map(n);
    let hs = spec.h_map(n);
    let rows: Vec<(usize, usize, f64, f64)> = (0..n * n).map(|q| (q / n, q % n, hs[q], slopes[q])).collect();
    let mut curve_rows = Vec::new();
    for &t in &curves {
        for s in spec.level_curve(t, n)?.samples {
            curve_rows.push((t, s[0], s[1]));
        }
    }
    let dir = out_dir(c);
    out.add(dir.join("field.json"), json_bytes(&spec)?);
    out.add(dir.join("field_grid.csv"), csv_bytes(&rows, Some(&["i", "j", "h", "slope"]))?);
    out.add(dir.join("level_curves.csv"), csv_bytes(&curve_rows, Some(&["t", "x2", "x1"]))?);
    Ok(out)
}

fn cmd_op(c: &Common, id: &str, input: &Path, csv: bool) -> Res<Outputs> {
    let spec = match &c.config {
        Some(_) => load_field(c)?.0,
        None => FieldSpec::one_variable(lh_core::fields::USpec::constant(0.0))?,
    };
    let bytes = fs::read(input).map_err(|e| cfg_err(format!("{}: {e}", input.display())))?;
    let f = GridFunction2D::from_lhg2_bytes(&bytes)?;
    let op = Operator::parse(id, spec, f.n)?;
    let target = c.out.clone().ok_or_else(|| cfg_err("--out is required"))?;
    let mut out = Outputs::default();
    if c.dry_run {
        out.say(format!("plan: apply {} on n = {} from {} to {}", op.id, f.n, input.display(), target.display()));
        return Ok(out);
    }
    let g = op.apply(&f)?;
    if !g.is_finite() {
        return Err(Failure::Numerical(format!("{} produced non-finite values", op.id)));
    }
    out.add(target.clone(), g.to_lhg2_bytes());
    if csv {
        out.add(target.with_extension("csv"), grid_csv(&g)?);
    }
    Ok(out)
}

fn cmd_norm(c: &Common, id: &str, p: f64, trials: usize, method: &str) -> Res<Outputs> {
    let (spec, n, _) = load_field(c)?;
    let method: Method = method.parse()?;
    let op = Operator::parse(id, spec, n)?;
    let seed = c.seed.unwrap_or(0);
    let mut out = Outputs::default();
    if c.dry_run {
        out.say(format!("plan: {method:?} norm of {} at p = {p}, n = {n}, {trials} trials, seed {seed}", op.id));
        return Ok(out);
    }
    let (est, records) = estimate_norm(&op, p, trials, seed, method, InputFamily::full(n))?;
    out.say(format!("{} p={} n={} value={:.6e}", est.op, est.p, est.n, est.value));
    let dir = out_dir(c);
    out.add(dir.join("trials.csv"), csv_bytes(&records, None)?);
    out.add(dir.join("norm.json"), json_bytes(&est)?);
    Ok(out)
}

fn cmd_exp(c: &Common, kind: Option<&str>) -> Res<Outputs> {
    let mut cfg: ExperimentConfig = read_json(need_config(c)?)?;
    let kind: ExperimentKind = match kind {
        Some(k) => k.parse()?,
        None => cfg.experiment,
    };
    if cfg.experiment != kind {
        return Err(cfg_err(format!("config describes '{}', not '{}'", cfg.experiment.name(), kind.name())));
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.n {
        cfg.n = n;
    }
    cfg.validate()?;
    let mut out = Outputs::default();
    if c.dry_run {
        out.say(cfg.plan());
        return Ok(out);
    }
    let res = run_experiment(&cfg)?;
    let s = &res.summary;
    out.say(format!("{}: max {:.6e} mean {:.6e}", s.experiment, s.max, s.mean));
    if let Some(slope) = s.slope {
        out.say(format!("slope {slope:.4}"));
    }
    if let Some(st) = s.stability {
        out.say(format!("stability {st:.4}"));
    }
    let dir = c.out.clone().or_else(|| cfg.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    out.add(dir.join(format!("{}.csv", kind.name())), csv_bytes::<TrialRecord>(&res.records, None)?);
    out.add(dir.join(format!("{}_summary.json", kind.name())), json_bytes(s)?);
    Ok(out)
}

/// `{values}` or `{profile_seed, m}`, plus `j0_max`; or a corpus
/// `{seed, count, m_list, j0_list}`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BetaConfig {
    #[serde(default)]
    values: Option<Vec<f64>>,
    #[serde(default)]
    profile_seed: Option<u64>,
    #[serde(default)]
    m: Option<u32>,
    #[serde(default)]
    j0_max: Option<u32>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    count: Option<usize>,
    #[serde(default)]
    m_list: Option<Vec<u32>>,
    #[serde(default)]
    j0_list: Option<Vec<u32>>,
}

fn cmd_beta(c: &Common, action: &str) -> Res<Outputs> {
    let cfg: BetaConfig = read_json(need_config(c)?)?;
    let mut out = Outputs::default();
    let dir = out_dir(c);
    if action == "corpus" {
        let seed = c.seed.or(cfg.seed).unwrap_or(0);
        let count = cfg.count.unwrap_or(32);
        let m_list = cfg.m_list.unwrap_or_else(|| vec![8, 9]);
        let j0_list = cfg.j0_list.unwrap_or_else(|| vec![1, 2, 4]);
        if c.dry_run {
            out.say(format!("plan: {count} profiles, seed {seed}, m {m_list:?}, j0 {j0_list:?}"));
            return Ok(out);
        }
        let rep = run_beta_corpus(seed, count, &m_list, &j0_list)?;
        for (m, k) in &rep.constants {
            out.say(format!("m = {m}: carleson constant {k:.6e}"));
        }
        out.say(format!("drift {:.4}", rep.drift));
        out.add(dir.join("beta_corpus.json"), json_bytes(&rep)?);
        return Ok(out);
    }
    let j0_max = cfg.j0_max.unwrap_or(4);
    let sample = match (cfg.values, cfg.profile_seed) {
        (Some(v), None) => LipschitzSample::new(v)?,
        (None, Some(s)) => LipschitzProfile::random(s).sample(cfg.m.unwrap_or(8))?,
        _ => return Err(cfg_err("beta table needs exactly one of 'values' or 'profile_seed'")),
    };
    if c.dry_run {
        out.say(format!("plan: beta table on {} nodes, j0 <= {j0_max}", sample.values.len()));
        return Ok(out);
    }
    let table = BetaTable::build(&sample, j0_max)?;
    out.say(format!("{} rows, lip = {:.6e}", table.rows.len(), sample.lip));
    out.add(dir.join("beta_table.csv"), csv_bytes(&table.rows, None)?);
    Ok(out)
}

#[derive(Serialize)]
struct CoverRow {
    lemma: &'static str,
    seed: u64,
    n: usize,
    ratio: f64,
    hypotheses_ok: bool,
}

/// A single scenario (verified on `n`, default 512) or a corpus
/// `{seed, count, grids}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum CoverConfig {
    Corpus {
        corpus: CorpusConfig,
    },
    Single {
        #[serde(flatten)]
        scenario: Scenario,
        #[serde(default)]
        n: Option<usize>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_scenarios")]
    count: usize,
    #[serde(default = "default_cover_grids")]
    grids: Vec<usize>,
}

fn default_scenarios() -> usize {
    200
}

fn default_cover_grids() -> Vec<usize> {
    vec![512, 1024]
}

fn cmd_cover(c: &Common, action: &str) -> Res<Outputs> {
    let cfg: CoverConfig = read_json(need_config(c)?)?;
    let mut out = Outputs::default();
    let dir = out_dir(c);
    match (action, cfg) {
        ("verify", CoverConfig::Single { scenario, n }) => {
            scenario.validate()?;
            let n = c.n.or(n).unwrap_or(512);
            check_n(n)?;
            if c.dry_run {
                out.say(format!("plan: {} rectangles on n = {n}, lemmas incomparable/density/population", scenario.rects.len()));
                return Ok(out);
            }
            let grid = CoverGrid::new(&scenario.spec, n)?;
            let mut rows = Vec::new();
            for l in Lemma::ALL {
                let r = verify_covering(&scenario, l, &grid)?;
                out.say(format!("{}: ratio {:.6e} hypotheses_ok {} {}", l.name(), r.ratio, r.hypotheses_ok, r.notes));
                rows.push(CoverRow { lemma: l.name(), seed: r.seed, n, ratio: r.ratio, hypotheses_ok: r.hypotheses_ok });
            }
            out.add(dir.join("cover.csv"), csv_bytes(&rows, None)?);
        }
        ("corpus", CoverConfig::Corpus { corpus }) => {
            let seed = c.seed.unwrap_or(corpus.seed);
            for &n in &corpus.grids {
                check_n(n)?;
            }
            if c.dry_run {
                out.say(format!("plan: {} scenarios, seed {seed}, grids {:?}", corpus.count, corpus.grids));
                return Ok(out);
            }
            let (rep, reports) = run_cover_corpus(seed, corpus.count, &corpus.grids)?;
            let per = reports.len() / corpus.grids.len().max(1);
            let rows: Vec<CoverRow> = reports
                .iter()
                .enumerate()
                .map(|(q, r)| CoverRow {
                    lemma: r.lemma.name(),
                    seed: r.seed,
                    n: corpus.grids[q / per.max(1)],
                    ratio: r.ratio,
                    hypotheses_ok: r.hypotheses_ok,
                })
                .collect();
            for (l, s) in &rep.stability {
                out.say(format!("{}: grid change {s:.4}", l.name()));
            }
            out.add(dir.join("cover.csv"), csv_bytes(&rows, None)?);
            out.add(dir.join("cover_summary.json"), json_bytes(&rep)?);
        }
        ("verify", _) => return Err(cfg_err("cover verify expects a scenario")),
        _ => return Err(cfg_err("cover corpus expects {\"corpus\": {...}}")),
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TilesConfig {
    spec: FieldSpec,
    #[serde(default)]
    n: Option<usize>,
    tiles: TileSetConfig,
    /// Seed of the random input whose coefficients are dumped.
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct CoeffRow {
    k: i32,
    l: i32,
    i_omega: i64,
    pos1: i64,
    pos2: i64,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct TileCheckRow {
    k: i32,
    l: i32,
    i_omega: i64,
    pos1: i64,
    pos2: i64,
    l2_norm: f64,
    leakage_omega2: f64,
    leakage_support: f64,
}

fn cmd_tiles(c: &Common, action: &str) -> Res<Outputs> {
    let cfg: TilesConfig = read_json(need_config(c)?)?;
    cfg.spec.validate()?;
    let n = c.n.or(cfg.n).unwrap_or(128);
    check_n(n)?;
    let tiles = cfg.tiles.tiles()?;
    let mut out = Outputs::default();
    if c.dry_run {
        out.say(format!("plan: {} tiles on n = {n}", tiles.len()));
        return Ok(out);
    }
    let dir = out_dir(c);
    if action == "dump" {
        let seed = c.seed.or(cfg.seed).unwrap_or(0);
        let band = (0, lh_core::grid::log2(n) - 2);
        let f = random_bandlimited(seed, n, ConeSpec::default(), band)?;
        let coeffs = coefficients(&f, &tiles)?;
        let rows: Vec<CoeffRow> = tiles
            .iter()
            .zip(&coeffs)
            .map(|(s, v)| CoeffRow { k: s.k, l: s.l(), i_omega: s.omega.i, pos1: s.pos[0], pos2: s.pos[1], re: v.re, im: v.im })
            .collect();
        out.say(format!("{} coefficients", rows.len()));
        out.add(dir.join("tile_coefficients.csv"), csv_bytes(&rows, None)?);
        return Ok(out);
    }
    let rows: Vec<TileCheckRow> = tiles
        .iter()
        .map(|s| {
            let flat = wave_packet(s, n)?;
            let curved = curved_packet(s, &cfg.spec, n)?;
            let peak = flat.sup_norm();
            Ok(TileCheckRow {
                k: s.k,
                l: s.l(),
                i_omega: s.omega.i,
                pos1: s.pos[0],
                pos2: s.pos[1],
                l2_norm: flat.l2_norm(),
                leakage_omega2: support_leakage(&curved, &cfg.spec, s.omega.omega2(), peak),
                leakage_support: support_leakage(&curved, &cfg.spec, curved_support_window(s), peak),
            })
        })
        .collect::<lh_core::Result<_>>()?;
    let worst_norm = rows.iter().map(|r| (r.l2_norm - 1.0).abs()).fold(0.0, f64::max);
    let worst_leak = rows.iter().map(|r| r.leakage_omega2).fold(0.0, f64::max);
    out.say(format!("{} tiles: max |norm - 1| {worst_norm:.3e}, max leakage outside omega2 {worst_leak:.3e}", rows.len()));
    out.add(dir.join("tile_check.csv"), csv_bytes(&rows, None)?);
    Ok(out)
}

fn threads(c: &Common) -> Res<Option<usize>> {
    if let Some(t) = c.threads {
        return Ok(Some(t));
    }
    match std::env::var("LH_THREADS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| cfg_err(format!("LH_THREADS='{v}' is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Res<()> {
    let c = &cli.common;
    if let Some(t) = threads(c)? {
        if t == 0 {
            return Err(cfg_err("thread count must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Numerical(e.to_string()))?;
    }
    let out = match &cli.cmd {
        Cmd::Field { action } => cmd_field(c, action)?,
        Cmd::Op { id, input, csv, .. } => cmd_op(c, id, input, *csv)?,
        Cmd::Norm { id, p, trials, method, .. } => cmd_norm(c, id, *p, *trials, method)?,
        Cmd::Exp { kind } => cmd_exp(c, kind.as_deref())?,
        Cmd::Beta { action } => cmd_beta(c, action)?,
        Cmd::Cover { action } => cmd_cover(c, action)?,
        Cmd::Tiles { action } => cmd_tiles(c, action)?,
    };
    out.commit()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}
