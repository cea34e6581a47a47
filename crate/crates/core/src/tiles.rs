//! Slope intervals, tiles, wave packets and their curved versions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bumps::{beta, beta_tilde, psi_plus};
use crate::error::{invalid, Result};
use crate::fft::freq;
use crate::fields::FieldSpec;
use crate::geometry::torus_delta;
use crate::grid::{GridFunction2D, Spectrum2D};
use crate::transforms::{field_multiplier, l_max};
use crate::C64;

/// Offset `c` in `beta_omega(x) = beta(2^(l+c) (x - c_{omega_1}))`.
pub const C_OMEGA: i32 = 3;

/// `[-2 + i 2^-l, -2 + (i+1) 2^-l)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub l: i32,
    pub i: i64,
}

impl DyadicInterval {
    pub fn new(l: i32, i: i64) -> Result<Self> {
        if l < 0 || l > 40 || i < 0 || i >= 4i64 << l {
            return invalid(format!("no dyadic interval l={l}, i={i} inside [-2, 2]"));
        }
        Ok(DyadicInterval { l, i })
    }

    /// The interval of generation `l` containing `x`.
    pub fn containing(l: i32, x: f64) -> Result<Self> {
        Self::new(l, ((x + 2.0) * (l as f64).exp2()).floor() as i64)
    }

    pub fn len(&self) -> f64 {
        (-self.l as f64).exp2()
    }

    pub fn left(&self) -> f64 {
        -2.0 + self.i as f64 * self.len()
    }

    pub fn right(&self) -> f64 {
        self.left() + self.len()
    }

    pub fn center(&self) -> f64 {
        self.left() + 0.5 * self.len()
    }

    /// Right half.
    pub fn omega1(&self) -> (f64, f64) {
        (self.center(), self.right())
    }

    /// Left half.
    pub fn omega2(&self) -> (f64, f64) {
        (self.left(), self.center())
    }

    pub fn c_omega1(&self) -> f64 {
        self.center() + 0.25 * self.len()
    }

    pub fn beta_omega(&self, x: f64) -> f64 {
        beta(((self.l + C_OMEGA) as f64).exp2() * (x - self.c_omega1()))
    }
}

/// `beta_tilde(2^-k xi2) beta_omega(xi1/xi2)`.
pub fn multiplier_value(k: i32, w: &DyadicInterval, xi1: f64, xi2: f64) -> f64 {
    if xi2 == 0.0 {
        return 0.0;
    }
    beta_tilde(xi2 * (-k as f64).exp2()) * w.beta_omega(xi1 / xi2)
}

pub fn make_multiplier(k: i32, w: DyadicInterval) -> impl Fn(f64, f64) -> f64 + Sync + Send {
    move |xi1, xi2| multiplier_value(k, &w, xi1, xi2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tile {
    pub k: i32,
    pub omega: DyadicInterval,
    pub pos: [i64; 2],
}

impl Tile {
    pub fn l(&self) -> i32 {
        self.omega.l
    }

    pub fn width(&self) -> f64 {
        (-self.k as f64).exp2()
    }

    pub fn length(&self) -> f64 {
        ((self.l() - self.k) as f64).exp2()
    }

    pub fn area(&self) -> f64 {
        self.width() * self.length()
    }

    /// Slope of the long side.
    pub fn slope(&self) -> f64 {
        -self.omega.center()
    }

    /// Unit vectors along the long and short sides.
    pub fn frame(&self) -> ([f64; 2], [f64; 2]) {
        let s = self.slope();
        let c = (1.0 + s * s).sqrt();
        ([1.0 / c, s / c], [-s / c, 1.0 / c])
    }

    pub fn center(&self) -> [f64; 2] {
        let (el, es) = self.frame();
        let a = self.pos[0] as f64 * self.length();
        let b = self.pos[1] as f64 * self.width();
        let p = [a * el[0] + b * es[0], a * el[1] + b * es[1]];
        [p[0].rem_euclid(1.0), p[1].rem_euclid(1.0)]
    }

    /// Coordinates of `x` in the tile frame, relative to the centre.
    pub fn local(&self, x: [f64; 2]) -> [f64; 2] {
        let d = torus_delta(x, self.center());
        let (el, es) = self.frame();
        [d[0] * el[0] + d[1] * el[1], d[0] * es[0] + d[1] * es[1]]
    }

    /// Scale of the one-sided piece that curves the packet.
    pub fn curve_scale(&self) -> i32 {
        self.k - self.l()
    }
}

/// Frequencies where the tile multiplier can be nonzero lie below this bound.
fn max_freq(k: i32, w: &DyadicInterval) -> f64 {
    let top = 2.5 * (k as f64).exp2();
    let reach = w.c_omega1().abs() + 0.25 * w.len();
    top * reach.max(1.0)
}

/// Unnormalized spectrum `sqrt(m)` translated to the tile centre.
fn packet_spectrum(s: &Tile, n: usize) -> Result<Spectrum2D> {
    if max_freq(s.k, &s.omega) >= n as f64 / 2.0 {
        return invalid(format!("tile k={} l={} not resolvable on n={n}", s.k, s.l()));
    }
    let c = s.center();
    let mut sp = Spectrum2D::zeros(n);
    for a in 0..n {
        let x1 = freq(a, n) as f64;
        for b in 0..n {
            let x2 = freq(b, n) as f64;
            let m = multiplier_value(s.k, &s.omega, x1, x2);
            if m > 0.0 {
                sp.coeffs[a * n + b] = C64::from_polar(m.sqrt(), -2.0 * PI * (x1 * c[0] + x2 * c[1]));
            }
        }
    }
    let norm = sp.l2_norm_sqr().sqrt();
    if norm == 0.0 {
        return invalid(format!("tile k={} l={} has no grid frequencies", s.k, s.l()));
    }
    sp.coeffs.iter_mut().for_each(|v| *v /= norm);
    Ok(sp)
}

pub fn wave_packet_spectrum(s: &Tile, n: usize) -> Result<Spectrum2D> {
    packet_spectrum(s, n)
}

/// L2-normalized packet with `|hat phi|^2` proportional to the multiplier.
pub fn wave_packet(s: &Tile, n: usize) -> Result<GridFunction2D> {
    Ok(packet_spectrum(s, n)?.to_grid())
}

fn check_curve_scale(s: &Tile, n: usize) -> Result<()> {
    if s.curve_scale() > l_max(n) {
        return invalid(format!("curve scale {} not resolvable on n={n}", s.curve_scale()));
    }
    Ok(())
}

/// `int check(psi_s)(t) phi_s(x - t v(x)) dt` with `psi_s = psi_{k-l}^+`.
pub fn curved_packet(s: &Tile, spec: &FieldSpec, n: usize) -> Result<GridFunction2D> {
    check_curve_scale(s, n)?;
    curve(&wave_packet(s, n)?, s.curve_scale(), spec)
}

/// Curving operator applied to any input (linear in the input).
pub fn curve(f: &GridFunction2D, scale: i32, spec: &FieldSpec) -> Result<GridFunction2D> {
    field_multiplier(f, spec, |a, x1, x2| C64::new(psi_plus(scale, x1 + a * x2), 0.0))
}

/// Packet curved along the constant direction `v_t = (1, u(t))`.
pub fn frozen_packet(s: &Tile, spec: &FieldSpec, t: f64, n: usize) -> Result<GridFunction2D> {
    check_curve_scale(s, n)?;
    let a = spec.u.eval(t);
    let sc = s.curve_scale();
    crate::grid::multiplier_apply_real(&wave_packet(s, n)?, |x1, x2| psi_plus(sc, x1 + a * x2))
}

/// Slopes `-u(h(x))` at which the curved packet can be nonzero, read off
/// the cutoff supports: `xi1/xi2 ∈ c_ω1 ± 2^-l/4`, `xi2 ∈ 2^k [1/2, 5/2]`
/// and `xi1 + a xi2 ∈ 2^(k-l) [1/2, 2]` give
/// `-a ∈ [c_ω1 - 4.25 2^-l, c_ω1 + 0.05 2^-l]`.
pub fn curved_support_window(s: &Tile) -> (f64, f64) {
    let h = (-s.l() as f64).exp2();
    let c = s.omega.c_omega1();
    (c - 4.25 * h, c + 0.05 * h)
}

/// `sup |f|` over grid points with `-u(h(x))` outside `window`, relative to
/// `scale` (the flat packet's peak: a tile the field never feeds has a curved
/// packet that is pure round-off, so its own peak is no reference).
pub fn support_leakage(f: &GridFunction2D, spec: &FieldSpec, window: (f64, f64), scale: f64) -> f64 {
    let slopes = spec.slope_map(f.n);
    let off = f
        .values
        .iter()
        .zip(&slopes)
        .filter(|(_, &a)| -a < window.0 || -a > window.1)
        .map(|(v, _)| v.norm())
        .fold(0.0, f64::max);
    off / scale
}

/// `|s|^-1/2 / (1 + (d_long/l_s)^2 + (d_short/w_s)^2)^5`.
pub fn chi_weight(s: &Tile, x: [f64; 2]) -> f64 {
    let p = s.local(x);
    let r = 1.0 + (p[0] / s.length()).powi(2) + (p[1] / s.width()).powi(2);
    s.area().powf(-0.5) / r.powi(5)
}

/// Tile family from `{l, k_list, omega_indices, pos_window}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileSetConfig {
    pub l: i32,
    pub k_list: Vec<i32>,
    pub omega_indices: Vec<i64>,
    /// Lattice indices `0..pos_window` in each direction.
    pub pos_window: [i64; 2],
}

impl TileSetConfig {
    pub fn tiles(&self) -> Result<Vec<Tile>> {
        let mut out = Vec::new();
        for &k in &self.k_list {
            for &i in &self.omega_indices {
                let omega = DyadicInterval::new(self.l, i)?;
                for p1 in 0..self.pos_window[0] {
                    for p2 in 0..self.pos_window[1] {
                        out.push(Tile { k, omega, pos: [p1, p2] });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `<f, phi_s>` on the grid measure, via Parseval.
pub fn coefficients(f: &GridFunction2D, tiles: &[Tile]) -> Result<Vec<C64>> {
    let fs = f.spectrum();
    tiles
        .iter()
        .map(|s| {
            let ps = packet_spectrum(s, f.n)?;
            Ok(fs.coeffs.iter().zip(&ps.coeffs).map(|(a, b)| a * b.conj()).sum())
        })
        .collect()
}

/// `sum_s c_s phi_s` with curved packets. Packets sharing a curve scale
/// are summed first and curved once.
pub fn model_sum(coeffs: &[C64], tiles: &[Tile], spec: &FieldSpec, n: usize) -> Result<GridFunction2D> {
    if coeffs.len() != tiles.len() {
        return invalid("one coefficient per tile");
    }
    let mut scales: Vec<i32> = tiles.iter().map(|s| s.curve_scale()).collect();
    scales.sort_unstable();
    scales.dedup();
    let mut out = GridFunction2D::zeros(n);
    for sc in scales {
        let mut flat = Spectrum2D::zeros(n);
        for (s, c) in tiles.iter().zip(coeffs) {
            if s.curve_scale() == sc {
                check_curve_scale(s, n)?;
                let ps = packet_spectrum(s, n)?;
                flat.coeffs.iter_mut().zip(&ps.coeffs).for_each(|(a, b)| *a += b * c);
            }
        }
        out.add_assign(&curve(&flat.to_grid(), sc, spec)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::USpec;

    fn tile(k: i32, l: i32, i: i64, pos: [i64; 2]) -> Tile {
        Tile { k, omega: DyadicInterval::new(l, i).unwrap(), pos }
    }

    #[test]
    fn dyadic_interval_geometry() {
        let w = DyadicInterval::new(2, 9).unwrap();
        assert_eq!(w.left(), 0.25);
        assert_eq!(w.right(), 0.5);
        assert_eq!(w.omega1(), (0.375, 0.5));
        assert_eq!(w.omega2(), (0.25, 0.375));
        assert_eq!(w.beta_omega(w.c_omega1()), 1.0);
        assert_eq!(w.beta_omega(w.c_omega1() + 2f64.powi(-4)), 0.0);
        assert!(DyadicInterval::new(1, 8).is_err());
        assert_eq!(DyadicInterval::containing(2, 0.3).unwrap(), w);
    }

    #[test]
    fn multiplier_plateau_and_support() {
        let w = DyadicInterval::new(1, 4).unwrap();
        let k = 3;
        let x2 = 8.0 * 1.5;
        assert_eq!(multiplier_value(k, &w, w.c_omega1() * x2, x2), 1.0);
        assert_eq!(multiplier_value(k, &w, 0.0, 2.0), 0.0);
        let m = make_multiplier(k, w);
        for a in -40..40 {
            for b in -40..40 {
                assert!(m(a as f64, b as f64) >= 0.0);
            }
        }
    }

    #[test]
    fn packets_are_normalized_translates() {
        let n = 64;
        let a = wave_packet(&tile(3, 1, 5, [0, 0]), n).unwrap();
        assert!((a.l2_norm() - 1.0).abs() < 1e-12);
        let s = tile(3, 1, 5, [1, 2]);
        let b = wave_packet(&s, n).unwrap();
        let c = s.center();
        let shifted = crate::grid::multiplier_apply(&a, |x1, x2| C64::from_polar(1.0, -2.0 * PI * (x1 * c[0] + x2 * c[1]))).unwrap();
        assert!(b.rel_l2(&shifted) < 1e-12);
        // spectrum inside the multiplier support
        let sp = b.spectrum();
        let outside: f64 = sp
            .coeffs
            .iter()
            .enumerate()
            .filter(|(q, _)| multiplier_value(3, &s.omega, freq(q / n, n) as f64, freq(q % n, n) as f64) == 0.0)
            .map(|(_, v)| v.norm_sqr())
            .sum();
        assert!(outside < 1e-20);
    }

    #[test]
    fn chi_weight_values() {
        let s = tile(3, 1, 5, [2, 1]);
        let c = s.center();
        assert!((chi_weight(&s, c) - s.area().powf(-0.5)).abs() < 1e-12);
        let (el, _) = s.frame();
        let x = [c[0] + s.length() * el[0], c[1] + s.length() * el[1]];
        assert!((chi_weight(&s, x) - s.area().powf(-0.5) / 32.0).abs() < 1e-9);
    }

    #[test]
    fn frozen_agrees_with_curved_on_level_curve() {
        let n = 64;
        let spec = crate::fields::FieldSpec::sinusoidal(0.05, USpec::steps(vec![0.0, 0.5], vec![0.25, -0.5])).unwrap();
        let s = tile(3, 1, 3, [1, 1]);
        let curved = curved_packet(&s, &spec, n).unwrap();
        let t = 0.3;
        let frozen = frozen_packet(&s, &spec, t, n).unwrap();
        // compare on grid points whose level lies in the same slope class
        let a = spec.u.eval(t);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = [i as f64 / n as f64, j as f64 / n as f64];
                if spec.slope_at(x) == a {
                    worst = worst.max((curved.at(i, j) - frozen.at(i, j)).norm());
                }
            }
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn curved_packets_vanish_outside_support_window() {
        let n = 128;
        let spec = crate::fields::FieldSpec::one_variable(USpec::steps(
            vec![0.0, 0.25, 0.5, 0.75],
            vec![0.9, 0.3, -0.2, -0.8],
        ))
        .unwrap();
        for s in [tile(3, 1, 3, [1, 0]), tile(3, 1, 4, [0, 2]), tile(4, 2, 7, [1, 1])] {
            let c = curved_packet(&s, &spec, n).unwrap();
            let peak = wave_packet(&s, n).unwrap().sup_norm();
            assert!(c.sup_norm() > 1e-3 * peak);
            assert!(support_leakage(&c, &spec, curved_support_window(&s), peak) < 1e-12);
        }
    }

    #[test]
    fn coefficients_and_model_sum() {
        let n = 64;
        let spec = crate::fields::FieldSpec::one_variable(USpec::constant(0.0)).unwrap();
        let s0 = tile(3, 1, 5, [0, 1]);
        let f = wave_packet(&s0, n).unwrap();
        let c = coefficients(&f, &[s0]).unwrap();
        assert!((c[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        // a packet in the opposite xi2 half-plane is orthogonal
        let g = f.values.iter().map(|v| v.conj()).collect();
        let g = GridFunction2D::new(n, g).unwrap();
        assert!(coefficients(&g, &[s0]).unwrap()[0].norm() < 1e-12);
        assert_eq!(model_sum(&[], &[], &spec, n).unwrap().l2_norm(), 0.0);
        let single = model_sum(&[C64::new(0.5, 0.0)], &[s0], &spec, n).unwrap();
        let want = curved_packet(&s0, &spec, n).unwrap().scale(C64::new(0.5, 0.0));
        assert!(single.rel_l2(&want) < 1e-12);
    }
}
