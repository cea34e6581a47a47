//! The operators: cone and LP projections, `H_l`, `H_v`, slope-band
//! projections, the Carleson-side fiber computation, and the main and
//! commutator terms.
//!
//! `H_l f(x) = int check(psi_l^+)(t) f(x - t v(x)) dt` acts on a single mode
//! as the multiplier `psi_l^+(xi . v)`. Whenever `u` takes finitely many
//! values this is evaluated exactly as a bank of Fourier multipliers, one per
//! slope class, selected pointwise by the class of `u(h(x))`. For smooth `u`
//! the per-point symbol is summed directly over the (sparse) spectrum.
//! The literal quadrature in `t` is kept as [`h_l_quadrature`].

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::adapted::AdaptedGrid;
use crate::bumps::{psi, psi_plus, psi_plus_check, psi_plus_sum, psi_repro, LPFamily};
use crate::error::{invalid, Error, Result};
use crate::fft::{self, freq};
use crate::fields::FieldSpec;
use crate::grid::{log2, multiplier_apply, multiplier_apply_real, ConeSpec, GridFunction2D, OffgridSampler};
use crate::tiles::DyadicInterval;
use crate::C64;

/// Default lowest one-sided scale in `H_v`.
pub const L_MIN_DEFAULT: i32 = -8;

/// Highest one-sided scale resolvable on an `n` grid (`2^-l >= 2/n`).
pub fn l_max(n: usize) -> i32 {
    log2(n) - 1
}

pub fn cone_project(f: &GridFunction2D, cone: ConeSpec) -> Result<GridFunction2D> {
    multiplier_apply_real(f, |a, b| if cone.contains(a as i64, b as i64) { 1.0 } else { 0.0 })
}

pub fn p_k(f: &GridFunction2D, k: i32) -> Result<GridFunction2D> {
    let fam = LPFamily::for_grid(f.n);
    if !fam.contains(k) {
        return invalid(format!("k = {k} outside [{}, {}] for n = {}", fam.k_min, fam.k_max, f.n));
    }
    multiplier_apply_real(f, |_, x2| psi(k, x2))
}

/// Multiplier `beta_omega(xi1/xi2)`, zero on the `xi2 = 0` row.
pub fn p_omega(f: &GridFunction2D, w: &DyadicInterval) -> Result<GridFunction2D> {
    multiplier_apply_real(f, |a, b| if b == 0.0 { 0.0 } else { w.beta_omega(a / b) })
}

/// Symbol of the truncated `H_v` at `eta = xi . v`.
#[inline]
pub fn hv_symbol(l_min: i32, l_max: i32, eta: f64) -> f64 {
    -1.0 + 2.0 * psi_plus_sum(l_min, l_max, eta)
}

/// Slope classes of a field on the grid.
#[derive(Clone, Debug)]
pub struct SlopeClasses {
    pub values: Vec<f64>,
    pub index: Vec<usize>,
}

impl SlopeClasses {
    pub fn new(spec: &FieldSpec, n: usize) -> Option<Self> {
        let values = spec.u.classes()?;
        let index = spec
            .h_map(n)
            .into_iter()
            .map(|t| spec.u.class_of(t, &values))
            .collect();
        Some(SlopeClasses { values, index })
    }
}

/// Per class `c`, the full-grid function `m(a_c, xi) f`.
pub fn class_outputs(
    f: &GridFunction2D,
    classes: &SlopeClasses,
    symbol: &(impl Fn(f64, f64, f64) -> C64 + Sync),
) -> Result<Vec<GridFunction2D>> {
    let s = f.spectrum();
    classes
        .values
        .iter()
        .map(|&a| {
            let mut sc = s.clone();
            sc.apply(&|x1, x2| symbol(a, x1, x2))?;
            Ok(sc.to_grid())
        })
        .collect()
}

fn select(parts: &[GridFunction2D], index: &[usize]) -> GridFunction2D {
    let n = parts[0].n;
    let values = index.iter().enumerate().map(|(p, &c)| parts[c].values[p]).collect();
    GridFunction2D { n, values }
}

/// `out(x) = sum_xi c_xi symbol(a(x), xi) exp(2 pi i xi . x)` summed
/// directly over the coefficients above rounding level.
pub fn pointwise_symbol(
    f: &GridFunction2D,
    slopes: &[f64],
    symbol: &(impl Fn(f64, f64, f64) -> C64 + Sync),
) -> GridFunction2D {
    let n = f.n;
    let s = f.spectrum();
    let peak = s.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let support: Vec<(i64, i64, C64)> = s
        .coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 1e-15 * peak)
        .map(|(q, &c)| (freq(q / n, n), freq(q % n, n), c))
        .collect();
    let roots: Vec<C64> = (0..n).map(|q| C64::from_polar(1.0, 2.0 * PI * q as f64 / n as f64)).collect();
    let mut out = vec![C64::default(); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, o) in row.iter_mut().enumerate() {
            let a = slopes[i * n + j];
            let mut acc = C64::default();
            for &(x1, x2, c) in &support {
                let ph = (x1 * i as i64 + x2 * j as i64).rem_euclid(n as i64) as usize;
                acc += c * roots[ph] * symbol(a, x1 as f64, x2 as f64);
            }
            *o = acc;
        }
    });
    GridFunction2D { n, values: out }
}

/// `out(x) = (m(u(h(x)), .) f)(x)` for a slope-dependent symbol `m(a, xi1, xi2)`.
pub fn field_multiplier(
    f: &GridFunction2D,
    spec: &FieldSpec,
    symbol: impl Fn(f64, f64, f64) -> C64 + Sync,
) -> Result<GridFunction2D> {
    match SlopeClasses::new(spec, f.n) {
        Some(cl) => Ok(select(&class_outputs(f, &cl, &symbol)?, &cl.index)),
        None => {
            let out = pointwise_symbol(f, &spec.slope_map(f.n), &symbol);
            if !out.is_finite() {
                return Err(Error::Numerical("field multiplier produced non-finite values".into()));
            }
            Ok(out)
        }
    }
}

fn check_scale(n: usize, l: i32) -> Result<()> {
    if l > l_max(n) {
        return Err(Error::Domain(format!("scale 2^-{l} is below 2/n for n = {n}")));
    }
    Ok(())
}

pub fn h_l(f: &GridFunction2D, spec: &FieldSpec, l: i32) -> Result<GridFunction2D> {
    check_scale(f.n, l)?;
    field_multiplier(f, spec, |a, x1, x2| C64::new(psi_plus(l, x1 + a * x2), 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadParams {
    /// Points per `2^-l`.
    pub q: usize,
    /// Window half-width in units of `2^-l`.
    pub window: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        QuadParams { q: 16, window: 64.0 }
    }
}

/// Trapezoid weights `(t_m, dt * check(psi_l^+)(t_m))`. The step also
/// resolves the largest frequency `band` along the line, so the periodic
/// trapezoid sum does not alias.
pub fn h_l_weights(l: i32, band: f64, qp: QuadParams) -> Vec<(f64, C64)> {
    let scale = (-l as f64).exp2();
    let dt = (scale / qp.q as f64).min(1.0 / (band + 3.0 * (l as f64).exp2()));
    let m = (qp.window * scale / dt).ceil() as i64;
    (-m..=m)
        .map(|q| {
            let t = q as f64 * dt;
            (t, psi_plus_check(l, t) * dt)
        })
        .collect()
}

/// `H_l` by quadrature along `t -> x - t v(x)` with off-grid sampling.
pub fn h_l_quadrature(f: &GridFunction2D, spec: &FieldSpec, l: i32, qp: QuadParams) -> Result<GridFunction2D> {
    let n = f.n;
    check_scale(n, l)?;
    let s = f.spectrum();
    let band = s
        .coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(q, _)| (freq(q / n, n).abs() + freq(q % n, n).abs()) as f64)
        .fold(0.0, f64::max);
    let weights = h_l_weights(l, band, qp);
    let smp = OffgridSampler::new(f);
    let slopes = spec.slope_map(n);
    let mut out = vec![C64::default(); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, o) in row.iter_mut().enumerate() {
            let a = slopes[i * n + j];
            let x = [i as f64 / n as f64, j as f64 / n as f64];
            let mut acc = C64::default();
            for &(t, w) in &weights {
                let y = [(x[0] - t).rem_euclid(1.0), (x[1] - t * a).rem_euclid(1.0)];
                acc += smp.sample(y) * w;
            }
            *o = acc;
        }
    });
    Ok(GridFunction2D { n, values: out })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HvOptions {
    pub l_min: i32,
}

impl Default for HvOptions {
    fn default() -> Self {
        HvOptions { l_min: L_MIN_DEFAULT }
    }
}

/// `-f + 2 sum_{l_min}^{l_max} H_l f`.
pub fn h_v_with(f: &GridFunction2D, spec: &FieldSpec, opts: HvOptions) -> Result<GridFunction2D> {
    let (lo, hi) = (opts.l_min, l_max(f.n));
    if lo > hi {
        return invalid(format!("l_min {lo} above l_max {hi}"));
    }
    field_multiplier(f, spec, |a, x1, x2| C64::new(hv_symbol(lo, hi, x1 + a * x2), 0.0))
}

pub fn h_v(f: &GridFunction2D, spec: &FieldSpec) -> Result<GridFunction2D> {
    h_v_with(f, spec, HvOptions::default())
}

/// Principal value `(i/pi) p.v. int f(x - t v) dt/t` for the constant
/// field `v = (1, a)` with integer `a`, so the line closes after one period
/// and the kernel folds to `pi cot(pi t)`. Midpoint rule on `nodes`
/// offsets `(m + 1/2)/nodes`, symmetric about the excluded point `t = 0`.
pub fn pv_direct(f: &GridFunction2D, a: i64, nodes: usize) -> Result<GridFunction2D> {
    if nodes < 2 || nodes % 2 != 0 {
        return invalid("pv_direct needs an even node count");
    }
    let n = f.n;
    let smp = OffgridSampler::new(f);
    let kern: Vec<(f64, f64)> = (0..nodes)
        .map(|m| {
            let t = (m as f64 + 0.5) / nodes as f64 - 0.5;
            (t, PI / (PI * t).tan() / nodes as f64)
        })
        .collect();
    let mut out = vec![C64::default(); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, o) in row.iter_mut().enumerate() {
            let x = [i as f64 / n as f64, j as f64 / n as f64];
            let mut acc = C64::default();
            for &(t, w) in &kern {
                let y = [(x[0] - t).rem_euclid(1.0), (x[1] - t * a as f64).rem_euclid(1.0)];
                acc += smp.sample(y) * w;
            }
            *o = acc * C64::new(0.0, 1.0 / PI);
        }
    });
    Ok(GridFunction2D { n, values: out })
}

/// Lowest scale used on both sides of the Carleson identity.
pub const CARLESON_L_MIN: i32 = -1;

/// Relative gap between `||H_v f||_2` (multiplier side) and the norm of
/// `int fhat(x1 - t, xi2) exp(-2 pi i u(x1) t xi2) K(t) dt` computed fiber by
/// fiber in physical space, for `eps0 = 0`.
pub fn carleson_identity_gap(f: &GridFunction2D, spec: &FieldSpec) -> Result<f64> {
    if spec.eps0 != 0.0 {
        return invalid("the Carleson identity needs a one-variable field (eps0 = 0)");
    }
    let n = f.n;
    let lo = CARLESON_L_MIN;
    let hi = l_max(n);
    let lhs = h_v_with(f, spec, HvOptions { l_min: lo })?.l2_norm();
    let rhs = carleson_rhs(f, spec, lo, hi)?;
    if lhs == 0.0 {
        return Ok(if rhs == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((lhs - rhs).abs() / lhs)
}

/// Physical-side norm; see [`carleson_identity_gap`].
pub fn carleson_rhs(f: &GridFunction2D, spec: &FieldSpec, lo: i32, hi: i32) -> Result<f64> {
    let n = f.n;
    let big = 2 * n;
    // partial transform in x2: fib[i*n + b] = coefficient of exp(2 pi i xi2 x2)
    let mut fib = f.values.clone();
    fft::rows(&mut fib, n, false);
    fib.iter_mut().for_each(|v| *v /= n as f64);

    // K(t) = 2 sum_l check(psi_l^+)(t), folded onto [0,1): T[m][j] = K(s_m + j)
    let reach = |l: i32| (150.0 * (-l as f64).exp2()).ceil() as i64 + 1;
    let jr = reach(lo);
    let width = (2 * jr + 1) as usize;
    let table: Vec<Vec<C64>> = (0..big)
        .into_par_iter()
        .map(|m| {
            let s = m as f64 / big as f64;
            let mut row = vec![C64::default(); width];
            for l in lo..=hi {
                let r = reach(l);
                for j in -r..=r {
                    row[(j + jr) as usize] += psi_plus_check(l, s + j as f64) * 2.0;
                }
            }
            row
        })
        .collect();

    let slopes: Vec<f64> = (0..n).map(|i| spec.u.eval(i as f64 / n as f64)).collect();
    // fibers are independent; sum of squares reduced in b order
    let fiber_sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|b| {
            let xi2 = freq(b, n) as f64;
            let mut col: Vec<C64> = (0..n).map(|i| fib[i * n + b]).collect();
            // upsample the fiber to `big` points in x1
            fft::plan(n, false).process(&mut col);
            let mut up = vec![C64::default(); big];
            for (q, v) in col.iter().enumerate() {
                up[crate::fft::bin(freq(q, n), big)] = *v / n as f64;
            }
            fft::plan(big, true).process(&mut up);
            let mut kernels: Vec<(f64, Vec<C64>)> = Vec::new();
            let mut acc = 0.0;
            for i in 0..n {
                let a = slopes[i];
                let kidx = match kernels.iter().position(|(aa, _)| *aa == a) {
                    Some(p) => p,
                    None => {
                        kernels.push((a, folded_kernel(&table, jr, a * xi2, big)));
                        kernels.len() - 1
                    }
                };
                let k = &kernels[kidx].1;
                let mut conv = C64::default();
                for (m, km) in k.iter().enumerate() {
                    conv += up[(2 * i + big - m) % big] * *km;
                }
                let v = conv / big as f64 - fib[i * n + b];
                acc += v.norm_sqr();
            }
            acc
        })
        .collect();
    let total: f64 = fiber_sums.iter().sum();
    Ok((total / n as f64).sqrt())
}

fn folded_kernel(table: &[Vec<C64>], jr: i64, freq_shift: f64, big: usize) -> Vec<C64> {
    let omega = C64::from_polar(1.0, -2.0 * PI * freq_shift);
    let mut powers = Vec::with_capacity(table[0].len());
    for j in -jr..=jr {
        powers.push(omega.powi(j as i32));
    }
    table
        .iter()
        .enumerate()
        .map(|(m, row)| {
            let s = m as f64 / big as f64;
            let mut acc = C64::default();
            for (v, w) in row.iter().zip(&powers) {
                acc += v * w;
            }
            acc * C64::from_polar(1.0, -2.0 * PI * freq_shift * s)
        })
        .collect()
}

/// Symbol of `H_{k-l} P_k` for slope `a`.
#[inline]
fn hp_symbol(k: i32, l: i32, a: f64, x1: f64, x2: f64) -> f64 {
    psi_plus(k - l, x1 + a * x2) * psi(k, x2)
}

/// Scales `k` of the LP family for which `H_{k-l}` is resolvable.
pub fn commutator_scales(n: usize, l: i32, opts: HvOptions) -> Vec<i32> {
    LPFamily::for_grid(n)
        .iter()
        .filter(|&k| k - l >= opts.l_min && k - l <= l_max(n))
        .collect()
}

fn need_classes(spec: &FieldSpec, n: usize) -> Result<SlopeClasses> {
    SlopeClasses::new(spec, n).ok_or_else(|| {
        Error::Unsupported("main and commutator terms need a slope function with finitely many values".into())
    })
}

/// `sum_k (I - Psharp_k) H_{k-l} P_k f` with `Psharp_k` the reproducing
/// adapted projection (symbol 1 on `[2^(k-2), 2^(k+2)]`).
pub fn commutator_term_on(ag: &AdaptedGrid, f: &GridFunction2D, spec: &FieldSpec, l: i32) -> Result<GridFunction2D> {
    commutator_assembly(ag, f, spec, l, HvOptions::default())
}

pub fn commutator_term(f: &GridFunction2D, spec: &FieldSpec, l: i32) -> Result<GridFunction2D> {
    if l < 0 {
        return invalid(format!("commutator term needs l >= 0, got {l}"));
    }
    let ag = AdaptedGrid::new(spec, f.n)?;
    commutator_term_on(&ag, f, spec, l)
}

/// Same as [`commutator_term_on`] for any integer `l`, restricted to the
/// scales admitted by `opts`.
pub fn commutator_assembly(
    ag: &AdaptedGrid,
    f: &GridFunction2D,
    spec: &FieldSpec,
    l: i32,
    opts: HvOptions,
) -> Result<GridFunction2D> {
    let n = f.n;
    let cl = need_classes(spec, n)?;
    let mut out = GridFunction2D::zeros(n);
    for k in commutator_scales(n, l, opts) {
        let parts = class_outputs(f, &cl, &|a, x1, x2| C64::new(hp_symbol(k, l, a, x1, x2), 0.0))?;
        let refs: Vec<&GridFunction2D> = parts.iter().collect();
        let proj = ag.apply(&refs, |s| psi_repro(k, s))?;
        out.add_assign(&select(&parts, &cl.index).sub(&proj));
    }
    Ok(out)
}

/// `sum_k Psharp_k H_v P_k f`.
pub fn main_term_on(ag: &AdaptedGrid, f: &GridFunction2D, spec: &FieldSpec, opts: HvOptions) -> Result<GridFunction2D> {
    let n = f.n;
    let cl = need_classes(spec, n)?;
    let hi = l_max(n);
    let mut out = GridFunction2D::zeros(n);
    for k in LPFamily::for_grid(n).iter() {
        let parts = class_outputs(f, &cl, &|a, x1, x2| {
            C64::new(hv_symbol(opts.l_min, hi, x1 + a * x2) * psi(k, x2), 0.0)
        })?;
        let refs: Vec<&GridFunction2D> = parts.iter().collect();
        out.add_assign(&ag.apply(&refs, |s| psi_repro(k, s))?);
    }
    Ok(out)
}

pub fn main_term(f: &GridFunction2D, spec: &FieldSpec) -> Result<GridFunction2D> {
    let ag = AdaptedGrid::new(spec, f.n)?;
    main_term_on(&ag, f, spec, HvOptions::default())
}

/// `sum_k (I - Psharp_k) P_k f`, the part of the split that vanishes when
/// the adapted projections reproduce the vertical bands exactly.
pub fn lp_defect_on(ag: &AdaptedGrid, f: &GridFunction2D) -> Result<GridFunction2D> {
    let mut out = GridFunction2D::zeros(f.n);
    for k in LPFamily::for_grid(f.n).iter() {
        let pk = p_k(f, k)?;
        let proj = ag.apply(&[&pk], |s| psi_repro(k, s))?;
        out.add_assign(&pk.sub(&proj));
    }
    Ok(out)
}

/// `sum_k H_v P_k f`.
pub fn hv_lp_sum(f: &GridFunction2D, spec: &FieldSpec, opts: HvOptions) -> Result<GridFunction2D> {
    let hi = l_max(f.n);
    let fam = LPFamily::for_grid(f.n);
    field_multiplier(f, spec, |a, x1, x2| {
        let s: f64 = fam.iter().map(|k| psi(k, x2)).sum();
        C64::new(hv_symbol(opts.l_min, hi, x1 + a * x2) * s, 0.0)
    })
}

/// Row Hilbert multiplier `sgn(xi1)` (the constant field `(1,0)`).
pub fn row_hilbert(f: &GridFunction2D) -> Result<GridFunction2D> {
    multiplier_apply(f, |x1, _| C64::new(x1.signum() * (x1 != 0.0) as i32 as f64, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::USpec;
    use crate::grid::{random_bandlimited, remove_row_means};

    fn cone() -> ConeSpec {
        ConeSpec::default()
    }

    #[test]
    fn cone_projection_cases() {
        let n = 32;
        let up = GridFunction2D::mode(n, 0, 5);
        assert!(cone_project(&up, cone()).unwrap().rel_l2(&up) < 1e-14);
        let side = GridFunction2D::mode(n, 5, 0);
        assert!(cone_project(&side, cone()).unwrap().l2_norm() < 1e-14);
        let f = random_bandlimited(1, n, ConeSpec::new(1.0).unwrap(), (0, 3)).unwrap();
        let once = cone_project(&f, ConeSpec::new(0.5).unwrap()).unwrap();
        let twice = cone_project(&once, ConeSpec::new(0.5).unwrap()).unwrap();
        assert!(once.rel_l2(&twice) < 1e-14);
    }

    #[test]
    fn p_k_examples() {
        let n = 64;
        let k = 3;
        let on = GridFunction2D::mode(n, 1, 8);
        assert!(p_k(&on, k).unwrap().rel_l2(&on) < 1e-13);
        let mid = GridFunction2D::mode(n, 1, 12);
        let got = p_k(&mid, k).unwrap();
        assert!(got.rel_l2(&mid.scale(C64::new(crate::bumps::psi0(1.5), 0.0))) < 1e-13);
        let zero = GridFunction2D::mode(n, 3, 0);
        assert!(p_k(&zero, 1).unwrap().l2_norm() < 1e-14);
        assert!(p_k(&zero, 9).is_err());
    }

    #[test]
    fn h_l_on_constant_field_is_multiplier() {
        let spec = FieldSpec::one_variable(USpec::constant(0.0)).unwrap();
        let f = GridFunction2D::mode(32, 3, 2);
        let got = h_l(&f, &spec, 1).unwrap();
        let want = f.scale(C64::new(crate::bumps::psi_plus(1, 3.0), 0.0));
        assert!(got.rel_l2(&want) < 1e-13);
        assert!(h_l(&f, &spec, 5).is_err());
    }

    #[test]
    fn quadrature_matches_bank_and_trig_sum() {
        let n = 32;
        let f = random_bandlimited(4, n, cone(), (0, 2)).unwrap();
        let spec = FieldSpec::sinusoidal(0.05, USpec::steps(vec![0.0, 0.5], vec![0.5, -0.25])).unwrap();
        for &l in &[0, 2] {
            let qp = QuadParams { q: 16, window: 48.0 };
            let quad = h_l_quadrature(&f, &spec, l, qp).unwrap();
            let bank = h_l(&f, &spec, l).unwrap();
            assert!(quad.rel_l2(&bank) < 1e-6, "l={l}: {}", quad.rel_l2(&bank));
        }
        // smooth u: quadrature against the direct per-point trigonometric sum
        let smooth = FieldSpec::sinusoidal(0.05, USpec::Smooth(vec![[1.0, 0.5, 0.3]])).unwrap();
        let quad = h_l_quadrature(&f, &smooth, 1, QuadParams { q: 16, window: 48.0 }).unwrap();
        let direct = h_l(&f, &smooth, 1).unwrap();
        assert!(quad.rel_l2(&direct) < 1e-6, "{}", quad.rel_l2(&direct));
    }

    #[test]
    fn constant_field_hv_is_isometry_and_matches_pv() {
        let n = 64;
        let spec = FieldSpec::one_variable(USpec::constant(0.0)).unwrap();
        let f = remove_row_means(&random_bandlimited(7, n, cone(), (0, 3)).unwrap()).unwrap();
        let hv = h_v(&f, &spec).unwrap();
        assert!((hv.l2_norm() / f.l2_norm() - 1.0).abs() < 1e-6);
        assert!(hv.rel_l2(&row_hilbert(&f).unwrap()) < 1e-12);
        let pv = pv_direct(&f, 0, 2 * n).unwrap();
        assert!(pv.rel_l2(&hv) < 1e-3, "{}", pv.rel_l2(&hv));
        // integer slope 1
        let s1 = FieldSpec::one_variable(USpec::constant(1.0)).unwrap();
        let g = multiplier_apply_real(&f, |a, b| if a + b == 0.0 { 0.0 } else { 1.0 }).unwrap();
        let pv1 = pv_direct(&g, 1, 2 * n).unwrap();
        assert!(pv1.rel_l2(&h_v(&g, &s1).unwrap()) < 1e-3);
    }

    #[test]
    fn one_variable_commutation_is_exact() {
        let n = 64;
        let spec = FieldSpec::one_variable(USpec::steps(vec![0.0, 0.5], vec![0.5, -0.5])).unwrap();
        let f = random_bandlimited(2, n, cone(), (0, 4)).unwrap();
        for k in 0..=4 {
            let a = h_v(&p_k(&f, k).unwrap(), &spec).unwrap();
            let b = p_k(&h_v(&f, &spec).unwrap(), k).unwrap();
            assert!(a.sub(&b).l2_norm() < 1e-12);
        }
    }

    #[test]
    fn carleson_gap_small() {
        let n = 32;
        let f = random_bandlimited(5, n, cone(), (0, 3)).unwrap();
        let zero_u = FieldSpec::one_variable(USpec::constant(0.0)).unwrap();
        assert!(carleson_identity_gap(&f, &zero_u).unwrap() < 1e-6);
        let two = FieldSpec::one_variable(USpec::steps(vec![0.2, 0.7], vec![0.6, -0.3])).unwrap();
        assert!(carleson_identity_gap(&f, &two).unwrap() < 1e-3);
        assert_eq!(carleson_identity_gap(&GridFunction2D::zeros(n), &two).unwrap(), 0.0);
        let bent = FieldSpec::sinusoidal(0.05, USpec::constant(0.0)).unwrap();
        assert!(carleson_identity_gap(&f, &bent).is_err());
    }

    #[test]
    fn split_reconstructs_hv_lp_sum() {
        let n = 32;
        let spec = FieldSpec::sinusoidal(0.05, USpec::steps(vec![0.0, 0.5], vec![0.3, -0.4])).unwrap();
        let f = random_bandlimited(8, n, cone(), (0, 3)).unwrap();
        let ag = AdaptedGrid::new(&spec, n).unwrap();
        let opts = HvOptions::default();
        let mut rebuilt = main_term_on(&ag, &f, &spec, opts).unwrap();
        rebuilt = rebuilt.sub(&lp_defect_on(&ag, &f).unwrap());
        let fam = LPFamily::for_grid(n);
        let l_lo = fam.k_min - l_max(n);
        let l_hi = fam.k_max - opts.l_min;
        for l in l_lo..=l_hi {
            let c = commutator_assembly(&ag, &f, &spec, l, opts).unwrap();
            rebuilt = rebuilt.add(&c.scale(C64::new(2.0, 0.0)));
        }
        let direct = hv_lp_sum(&f, &spec, opts).unwrap();
        assert!(rebuilt.rel_l2(&direct) < 1e-6, "{}", rebuilt.rel_l2(&direct));
    }

    #[test]
    fn unperturbed_main_term_matches_direct() {
        let n = 32;
        let spec = FieldSpec::one_variable(USpec::constant(0.0)).unwrap();
        let f = random_bandlimited(3, n, cone(), (0, 3)).unwrap();
        let got = main_term(&f, &spec).unwrap();
        let mut want = GridFunction2D::zeros(n);
        for k in LPFamily::for_grid(n).iter() {
            let hp = h_v(&p_k(&f, k).unwrap(), &spec).unwrap();
            want.add_assign(&multiplier_apply_real(&hp, |_, x2| psi_repro(k, x2)).unwrap());
        }
        assert!(got.rel_l2(&want) < 1e-6);
        assert!(commutator_term(&f, &spec, 2).unwrap().l2_norm() < 1e-12);
        assert!(main_term(&GridFunction2D::zeros(n), &spec).unwrap().l2_norm() == 0.0);
    }
}
