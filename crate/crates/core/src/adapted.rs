//! Projections adapted to the level curves of `h`.
//!
//! `Ptilde f(x)` filters the restriction of `f` to `Γ_t`, `t = h(x)`, in the
//! coordinate `sigma = y . v_t^perp`. Points of `Γ_t` are labelled by
//! `theta = y2 - a y1` (`a = u(t)`), which is `sqrt(1+a^2) sigma` and has
//! period 1 along the curve, so the filter is the Fourier multiplier
//! `symbol(sqrt(1+a^2) m)` in `theta`.
//!
//! The operator is discretized on nodes `(t_j, theta_m)`: sample the input
//! at the curve points (`S`), filter each row by FFT (`D`), and interpolate
//! the rows back to the grid in `(t, theta)` (`I`). The adjoint is the exact
//! transpose `S^H D I^H`.
//!
//! With piecewise-constant `u` every slope class gets its own rows, and the
//! input may differ per class: class masks are constant along each `Γ_t`,
//! so masking before or after the filter is the same thing.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::fft::{self, freq};
use crate::fields::FieldSpec;
use crate::grid::{oversample, oversample_adjoint, GridFunction2D, OVERSAMPLE};
use crate::interp::stencil;
use crate::C64;

/// Stencil of the curve sampler (on the oversampled grid).
pub const NODE_ORDER: usize = 8;
/// Stencil of the back-interpolation in `(t, theta)`.
pub const BACK_ORDER: usize = 8;
/// Node densities per grid cell in `t` and `theta`.
pub const T_DENSITY: usize = 4;
pub const THETA_DENSITY: usize = 4;

#[derive(Clone, Debug)]
enum Slopes {
    Classes(Vec<f64>),
    Smooth,
}

#[derive(Clone, Debug)]
struct Row {
    class: usize,
    a: f64,
    /// `(y1, y2)` of every node.
    nodes: Vec<[f64; 2]>,
}

/// Node geometry for one `(spec, n)` pair; reusable across inputs and symbols.
#[derive(Clone, Debug)]
pub struct AdaptedGrid {
    pub n: usize,
    pub m: usize,
    dt: f64,
    t0: f64,
    nt: usize,
    slopes: Slopes,
    rows: Vec<Row>,
    /// `row_of[class * nt + j]`
    row_of: Vec<Option<usize>>,
    point_class: Vec<usize>,
    point_t: Vec<f64>,
    point_theta: Vec<f64>,
}

impl AdaptedGrid {
    pub fn new(spec: &FieldSpec, n: usize) -> Result<Self> {
        crate::grid::check_n(n)?;
        let m = THETA_DENSITY * n;
        let dt = 1.0 / (T_DENSITY * n) as f64;
        let slopes = match spec.u.classes() {
            Some(c) => Slopes::Classes(c),
            None => Slopes::Smooth,
        };
        let n_classes = match &slopes {
            Slopes::Classes(c) => c.len(),
            Slopes::Smooth => 1,
        };
        let h = spec.h_map(n);
        let (lo, hi) = h.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let half = BACK_ORDER as i64 / 2;
        let j_lo = (lo / dt).floor() as i64 - half - 1;
        let j_hi = (hi / dt).floor() as i64 + half + 2;
        let t0 = j_lo as f64 * dt;
        let nt = (j_hi - j_lo + 1) as usize;

        let mut point_class = vec![0usize; n * n];
        let mut point_theta = vec![0.0; n * n];
        let mut needed = vec![false; n_classes * nt];
        let mut w = [0.0; BACK_ORDER];
        for i in 0..n {
            for jj in 0..n {
                let p = i * n + jj;
                let x = [i as f64 / n as f64, jj as f64 / n as f64];
                let t = h[p];
                let (c, a) = match &slopes {
                    Slopes::Classes(cl) => {
                        let c = spec.u.class_of(t, cl);
                        (c, cl[c])
                    }
                    Slopes::Smooth => (0, spec.u.eval(t)),
                };
                point_class[p] = c;
                let th = x[1] - a * x[0];
                point_theta[p] = th - th.floor();
                let base = stencil((t - t0) / dt, BACK_ORDER, &mut w);
                for q in 0..BACK_ORDER as i64 {
                    let j = base + q;
                    if j < 0 || j as usize >= nt {
                        return invalid("adapted node range too small");
                    }
                    needed[c * nt + j as usize] = true;
                }
            }
        }

        let keys: Vec<(usize, usize)> = (0..n_classes)
            .flat_map(|c| (0..nt).map(move |j| (c, j)))
            .filter(|&(c, j)| needed[c * nt + j])
            .collect();
        let rows = keys
            .par_iter()
            .map(|&(c, j)| {
                let t = t0 + j as f64 * dt;
                let a = match &slopes {
                    Slopes::Classes(cl) => cl[c],
                    Slopes::Smooth => spec.u.eval(t),
                };
                let nodes = (0..m)
                    .map(|q| {
                        let th = q as f64 / m as f64;
                        let s = spec.solve_on_line(t, th, a)?;
                        Ok([s, th + a * s])
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Row { class: c, a, nodes })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut row_of = vec![None; n_classes * nt];
        for (r, &(c, j)) in keys.iter().enumerate() {
            row_of[c * nt + j] = Some(r);
        }
        Ok(AdaptedGrid { n, m, dt, t0, nt, slopes, rows, row_of, point_class, point_t: h, point_theta })
    }

    pub fn n_classes(&self) -> usize {
        match &self.slopes {
            Slopes::Classes(c) => c.len(),
            Slopes::Smooth => 1,
        }
    }

    /// Slope of each class (empty for smooth `u`).
    pub fn class_slopes(&self) -> Vec<f64> {
        match &self.slopes {
            Slopes::Classes(c) => c.clone(),
            Slopes::Smooth => Vec::new(),
        }
    }

    pub fn point_class(&self) -> &[usize] {
        &self.point_class
    }

    pub fn node_count(&self) -> usize {
        self.rows.len() * self.m
    }

    fn filter_rows(&self, rows: &mut [Vec<C64>], symbol: &(impl Fn(f64) -> f64 + Sync)) {
        self.row_spectra(rows);
        self.shape_spectra(rows, symbol);
    }

    fn row_spectra(&self, rows: &mut [Vec<C64>]) {
        let fwd = fft::plan(self.m, false);
        rows.par_iter_mut().for_each(|vals| {
            let mut scratch = vec![C64::default(); fwd.get_inplace_scratch_len()];
            fwd.process_with_scratch(vals, &mut scratch);
        });
    }

    // Multiply row spectra by the symbol and transform back.
    fn shape_spectra(&self, rows: &mut [Vec<C64>], symbol: &(impl Fn(f64) -> f64 + Sync)) {
        let m = self.m;
        let inv = fft::plan(m, true);
        rows.par_iter_mut().zip(self.rows.par_iter()).for_each(|(vals, row)| {
            let c = (1.0 + row.a * row.a).sqrt();
            let mut scratch = vec![C64::default(); inv.get_inplace_scratch_len()];
            for (mu, v) in vals.iter_mut().enumerate() {
                *v *= symbol(c * freq(mu, m) as f64) / m as f64;
            }
            inv.process_with_scratch(vals, &mut scratch);
        });
    }

    fn check_inputs(&self, inputs: &[&GridFunction2D]) -> Result<()> {
        if inputs.len() != 1 && inputs.len() != self.n_classes() {
            return invalid(format!(
                "adapted projection takes 1 or {} inputs, got {}",
                self.n_classes(),
                inputs.len()
            ));
        }
        if inputs.iter().any(|f| f.n != self.n) {
            return invalid("input grid size does not match the adapted grid");
        }
        Ok(())
    }

    /// Apply the adapted filter with multiplier `symbol` in the normalized
    /// curve coordinate. `inputs` holds one function for all classes or one
    /// per class; the output at `x` uses the input of the class of `x`.
    pub fn apply(&self, inputs: &[&GridFunction2D], symbol: impl Fn(f64) -> f64 + Sync) -> Result<GridFunction2D> {
        let mut rows = self.sample_rows(inputs)?;
        self.filter_rows(&mut rows, &symbol);
        Ok(self.interpolate_back(&rows))
    }

    /// [`AdaptedGrid::apply`] for several symbols, sampling the inputs once.
    pub fn apply_bank<S: Fn(f64) -> f64 + Sync>(&self, inputs: &[&GridFunction2D], symbols: &[S]) -> Result<Vec<GridFunction2D>> {
        let mut spectra = self.sample_rows(inputs)?;
        self.row_spectra(&mut spectra);
        Ok(symbols
            .iter()
            .map(|symbol| {
                let mut rows = spectra.clone();
                self.shape_spectra(&mut rows, symbol);
                self.interpolate_back(&rows)
            })
            .collect())
    }

    fn sample_rows(&self, inputs: &[&GridFunction2D]) -> Result<Vec<Vec<C64>>> {
        self.check_inputs(inputs)?;
        let fm = self.n * OVERSAMPLE;
        let fines: Vec<Vec<C64>> = inputs.iter().map(|f| oversample(f, OVERSAMPLE)).collect();
        Ok(self
            .rows
            .par_iter()
            .map(|row| {
                let fine = &fines[if fines.len() == 1 { 0 } else { row.class }];
                row.nodes.iter().map(|&y| sample8(fine, fm, y)).collect()
            })
            .collect())
    }

    fn interpolate_back(&self, rows: &[Vec<C64>]) -> GridFunction2D {
        let n = self.n;
        let mut out = vec![C64::default(); n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, chunk)| {
            let mut wt = [0.0; BACK_ORDER];
            let mut wth = [0.0; BACK_ORDER];
            for (jj, o) in chunk.iter_mut().enumerate() {
                let p = i * n + jj;
                let (bt, bth) = self.back_stencil(p, &mut wt, &mut wth);
                let c = self.point_class[p];
                let mut acc = C64::default();
                for (q, &wq) in wt.iter().enumerate() {
                    if wq == 0.0 {
                        continue;
                    }
                    let r = self.row_of[c * self.nt + (bt + q as i64) as usize].expect("row built");
                    let vals = &rows[r];
                    let mut s = C64::default();
                    for (e, &we) in wth.iter().enumerate() {
                        if we != 0.0 {
                            s += vals[(bth + e as i64).rem_euclid(self.m as i64) as usize] * we;
                        }
                    }
                    acc += s * wq;
                }
                *o = acc;
            }
        });
        GridFunction2D { n, values: out }
    }

    fn back_stencil(&self, p: usize, wt: &mut [f64], wth: &mut [f64]) -> (i64, i64) {
        let bt = stencil((self.point_t[p] - self.t0) / self.dt, BACK_ORDER, wt);
        let bth = stencil(self.point_theta[p] * self.m as f64, BACK_ORDER, wth);
        (bt, bth)
    }

    /// Exact transpose of [`AdaptedGrid::apply`] for a single shared input.
    pub fn apply_adjoint(&self, g: &GridFunction2D, symbol: impl Fn(f64) -> f64 + Sync) -> Result<GridFunction2D> {
        let mut rows = self.gather_rows(g)?;
        self.filter_rows(&mut rows, &symbol);
        Ok(self.scatter_out(&rows))
    }

    /// [`AdaptedGrid::apply_adjoint`] for several symbols, gathering `g` once.
    pub fn apply_adjoint_bank<S: Fn(f64) -> f64 + Sync>(&self, g: &GridFunction2D, symbols: &[S]) -> Result<Vec<GridFunction2D>> {
        let mut spectra = self.gather_rows(g)?;
        self.row_spectra(&mut spectra);
        Ok(symbols
            .iter()
            .map(|symbol| {
                let mut rows = spectra.clone();
                self.shape_spectra(&mut rows, symbol);
                self.scatter_out(&rows)
            })
            .collect())
    }

    fn gather_rows(&self, g: &GridFunction2D) -> Result<Vec<Vec<C64>>> {
        self.check_inputs(&[g])?;
        let n = self.n;
        let m = self.m;
        let mut rows: Vec<Vec<C64>> = vec![vec![C64::default(); m]; self.rows.len()];
        let mut wt = [0.0; BACK_ORDER];
        let mut wth = [0.0; BACK_ORDER];
        for p in 0..n * n {
            let v = g.values[p];
            let (bt, bth) = self.back_stencil(p, &mut wt, &mut wth);
            let c = self.point_class[p];
            for (q, &wq) in wt.iter().enumerate() {
                if wq == 0.0 {
                    continue;
                }
                let r = self.row_of[c * self.nt + (bt + q as i64) as usize].expect("row built");
                for (e, &we) in wth.iter().enumerate() {
                    if we != 0.0 {
                        rows[r][(bth + e as i64).rem_euclid(m as i64) as usize] += v * (wq * we);
                    }
                }
            }
        }
        Ok(rows)
    }

    fn scatter_out(&self, rows: &[Vec<C64>]) -> GridFunction2D {
        let fm = self.n * OVERSAMPLE;
        let mut fine = vec![C64::default(); fm * fm];
        for (row, vals) in self.rows.iter().zip(rows) {
            for (&y, &v) in row.nodes.iter().zip(vals) {
                scatter8(&mut fine, fm, y, v);
            }
        }
        oversample_adjoint(&fine, self.n, OVERSAMPLE)
    }
}

fn sample8(fine: &[C64], m: usize, y: [f64; 2]) -> C64 {
    crate::grid::sample_fine(fine, m, NODE_ORDER, [y[0] - y[0].floor(), y[1] - y[1].floor()])
}

fn scatter8(fine: &mut [C64], m: usize, y: [f64; 2], v: C64) {
    let mut w1 = [0.0; NODE_ORDER];
    let mut w2 = [0.0; NODE_ORDER];
    let x = [y[0] - y[0].floor(), y[1] - y[1].floor()];
    let b1 = stencil(x[0] * m as f64, NODE_ORDER, &mut w1);
    let b2 = stencil(x[1] * m as f64, NODE_ORDER, &mut w2);
    let mi = m as i64;
    for p in 0..NODE_ORDER {
        if w1[p] == 0.0 {
            continue;
        }
        let row = (b1 + p as i64).rem_euclid(mi) as usize * m;
        for q in 0..NODE_ORDER {
            if w2[q] != 0.0 {
                fine[row + (b2 + q as i64).rem_euclid(mi) as usize] += v * (w1[p] * w2[q]);
            }
        }
    }
}

/// One level curve filtered directly: `g` sampled at `m_nodes` points of
/// `Γ_t` with `theta = theta0 + q/m_nodes`, filtered by `symbol`.
#[derive(Clone, Debug)]
pub struct CurveFilter {
    pub t: f64,
    pub a: f64,
    pub points: Vec<[f64; 2]>,
    pub raw: Vec<C64>,
    pub filtered: Vec<C64>,
}

pub fn curve_filter(
    spec: &FieldSpec,
    t: f64,
    theta0: f64,
    m_nodes: usize,
    eval: impl Fn([f64; 2]) -> C64 + Sync,
    symbol: impl Fn(f64) -> f64,
) -> Result<CurveFilter> {
    let a = spec.u.eval(t);
    let points = (0..m_nodes)
        .into_par_iter()
        .map(|q| {
            let th = theta0 + q as f64 / m_nodes as f64;
            let s = spec.solve_on_line(t, th, a)?;
            Ok([s, th + a * s])
        })
        .collect::<Result<Vec<_>>>()?;
    let raw: Vec<C64> = points.par_iter().map(|&y| eval(y)).collect();
    let mut filtered = raw.clone();
    let c = (1.0 + a * a).sqrt();
    fft::plan(m_nodes, false).process(&mut filtered);
    for (mu, v) in filtered.iter_mut().enumerate() {
        *v *= symbol(c * freq(mu, m_nodes) as f64) / m_nodes as f64;
    }
    fft::plan(m_nodes, true).process(&mut filtered);
    Ok(CurveFilter { t, a, points, raw, filtered })
}
