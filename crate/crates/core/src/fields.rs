//! The field `v(x) = (1, u(h(x)))` with `h(x) = x1 + eps0 g(x)`.
//!
//! `g` is a real trigonometric polynomial, so `h(x1+1, x2) = h + 1` and
//! `h(x1, x2+1) = h`. Every level set `{h = t}` is a graph over `x2`
//! because `d1 h >= 1 - eps0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{torus_delta, Rect};

pub const EPS0_MAX: f64 = 0.1;
pub const ROOT_TOL: f64 = 1e-12;
pub const ROOT_MAX_ITER: usize = 100;

/// Slope function `u`, 1-periodic with values in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "lowercase")]
pub enum USpec {
    /// `[[m, a_m, b_m], ...]`: `u(t) = sum a_m cos(2 pi m t) + b_m sin(2 pi m t)`.
    Smooth(Vec<[f64; 3]>),
    /// Right-continuous steps: `values[i]` on `[breaks[i], breaks[i+1])`,
    /// wrapping around the period.
    Steps { breaks: Vec<f64>, values: Vec<f64> },
}

impl USpec {
    pub fn constant(a: f64) -> Self {
        USpec::Smooth(vec![[0.0, a, 0.0]])
    }

    pub fn steps(breaks: Vec<f64>, values: Vec<f64>) -> Self {
        USpec::Steps { breaks, values }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            USpec::Smooth(terms) => terms
                .iter()
                .map(|&[m, a, b]| {
                    let ph = 2.0 * PI * m * t;
                    a * ph.cos() + b * ph.sin()
                })
                .sum(),
            USpec::Steps { values, .. } => values[self.step_index(t).unwrap_or(0)],
        }
    }

    fn step_index(&self, t: f64) -> Option<usize> {
        match self {
            USpec::Steps { breaks, .. } => {
                let tau = t - t.floor();
                // last break <= tau; before the first break we are still in
                // the last step of the previous period
                let p = breaks.partition_point(|&b| b <= tau);
                Some(if p == 0 { breaks.len() - 1 } else { p - 1 })
            }
            USpec::Smooth(_) => None,
        }
    }

    /// Distinct slopes if `u` takes finitely many values.
    pub fn classes(&self) -> Option<Vec<f64>> {
        match self {
            USpec::Steps { values, .. } => {
                let mut v = values.clone();
                v.sort_by(f64::total_cmp);
                v.dedup();
                Some(v)
            }
            USpec::Smooth(terms) => {
                if terms.iter().all(|&[m, a, b]| m == 0.0 || (a == 0.0 && b == 0.0)) {
                    Some(vec![self.eval(0.0)])
                } else {
                    None
                }
            }
        }
    }

    /// Index into [`USpec::classes`] of the slope at `t`.
    pub fn class_of(&self, t: f64, classes: &[f64]) -> usize {
        let a = self.eval(t);
        classes.iter().position(|&c| c == a).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            USpec::Smooth(terms) => {
                if terms.is_empty() {
                    return invalid("smooth u needs at least one term");
                }
                for &[m, a, b] in terms {
                    if m < 0.0 || m.fract() != 0.0 || !a.is_finite() || !b.is_finite() {
                        return invalid(format!("bad smooth u term [{m}, {a}, {b}]"));
                    }
                }
                let bound: f64 = terms.iter().map(|&[_, a, b]| a.abs() + b.abs()).sum();
                if bound > 1.0 {
                    let peak = (0..4096)
                        .map(|i| self.eval(i as f64 / 4096.0).abs())
                        .fold(0.0, f64::max);
                    if peak > 1.0 + 1e-12 {
                        return invalid(format!("sup |u| = {peak} exceeds 1"));
                    }
                }
            }
            USpec::Steps { breaks, values } => {
                if breaks.is_empty() || breaks.len() != values.len() {
                    return invalid("steps u needs equal, nonempty breaks and values");
                }
                if breaks.windows(2).any(|w| !(w[0] < w[1]))
                    || breaks.iter().any(|&b| !(0.0..1.0).contains(&b))
                {
                    return invalid("step breaks must increase inside [0, 1)");
                }
                if values.iter().any(|v| !(v.abs() <= 1.0)) {
                    return invalid("step values must lie in [-1, 1]");
                }
            }
        }
        Ok(())
    }
}

/// Field specification. JSON: `{eps0, g_coeffs: [[k1,k2,re,im],...], u}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub eps0: f64,
    #[serde(default)]
    pub g_coeffs: Vec<[f64; 4]>,
    pub u: USpec,
}

impl FieldSpec {
    pub fn new(eps0: f64, g_coeffs: Vec<[f64; 4]>, u: USpec) -> Result<Self> {
        let s = FieldSpec { eps0, g_coeffs, u };
        s.validate()?;
        Ok(s)
    }

    /// `h(x) = x1`, `u` as given.
    pub fn one_variable(u: USpec) -> Result<Self> {
        Self::new(0.0, Vec::new(), u)
    }

    /// `g(x) = sin(2 pi x2) / (2 pi)`.
    pub fn sinusoidal(eps0: f64, u: USpec) -> Result<Self> {
        Self::new(eps0, vec![[0.0, 1.0, 0.0, -1.0 / (2.0 * PI)]], u)
    }

    /// `h = x1`: no perturbation reaches the level curves.
    pub fn is_unperturbed(&self) -> bool {
        self.eps0 == 0.0 || self.g_coeffs.iter().all(|c| c[2] == 0.0 && c[3] == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=EPS0_MAX).contains(&self.eps0) {
            return invalid(format!("eps0 = {} outside [0, {EPS0_MAX}]", self.eps0));
        }
        for c in &self.g_coeffs {
            if c[0].fract() != 0.0 || c[1].fract() != 0.0 || !c[2].is_finite() || !c[3].is_finite() {
                return invalid(format!("bad g coefficient {c:?}"));
            }
        }
        self.u.validate()?;
        // cheap sufficient bound first, dense check only if it fails
        if self.grad_g_bound() > 1.0 + 1e-12 {
            let dev = self.max_grad_deviation(256);
            if dev > self.eps0 * (1.0 + 1e-9) {
                return invalid(format!("|grad h - (1,0)| reaches {dev} > eps0"));
            }
        }
        Ok(())
    }

    fn grad_g_bound(&self) -> f64 {
        self.g_coeffs
            .iter()
            .map(|c| 2.0 * PI * c[0].hypot(c[1]) * c[2].hypot(c[3]))
            .sum()
    }

    /// Upper bound for `|g|`.
    pub fn g_bound(&self) -> f64 {
        self.g_coeffs.iter().map(|c| c[2].hypot(c[3])).sum()
    }

    pub fn g(&self, x: [f64; 2]) -> f64 {
        self.g_coeffs
            .iter()
            .map(|c| {
                let ph = 2.0 * PI * (c[0] * x[0] + c[1] * x[1]);
                c[2] * ph.cos() - c[3] * ph.sin()
            })
            .sum()
    }

    pub fn grad_g(&self, x: [f64; 2]) -> [f64; 2] {
        let mut d = [0.0; 2];
        for c in &self.g_coeffs {
            let ph = 2.0 * PI * (c[0] * x[0] + c[1] * x[1]);
            let s = -2.0 * PI * (c[2] * ph.sin() + c[3] * ph.cos());
            d[0] += s * c[0];
            d[1] += s * c[1];
        }
        d
    }

    pub fn h(&self, x: [f64; 2]) -> f64 {
        x[0] + self.eps0 * self.g(x)
    }

    pub fn grad_h(&self, x: [f64; 2]) -> [f64; 2] {
        let d = self.grad_g(x);
        [1.0 + self.eps0 * d[0], self.eps0 * d[1]]
    }

    /// `max |grad h - (1,0)|` over a `probes x probes` grid.
    pub fn max_grad_deviation(&self, probes: usize) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..probes {
            for j in 0..probes {
                let d = self.grad_g([i as f64 / probes as f64, j as f64 / probes as f64]);
                m = m.max(self.eps0 * d[0].hypot(d[1]));
            }
        }
        m
    }

    pub fn slope_at(&self, x: [f64; 2]) -> f64 {
        self.u.eval(self.h(x))
    }

    pub fn vector_at(&self, x: [f64; 2]) -> [f64; 2] {
        [1.0, self.slope_at(x)]
    }

    /// Direction `(-a, 1)/|(-a, 1)|` orthogonal to `v_t`.
    pub fn v_perp(a: f64) -> [f64; 2] {
        let c = (1.0 + a * a).sqrt();
        [-a / c, 1.0 / c]
    }

    /// The unique `x1` with `h(x1, x2) = t`.
    pub fn solve_x1(&self, t: f64, x2: f64) -> Result<f64> {
        if self.eps0 == 0.0 || self.g_coeffs.is_empty() {
            return Ok(t);
        }
        let b = self.eps0 * self.g_bound() + 1e-12;
        solve_increasing(
            |s| {
                let x = [s, x2];
                (self.h(x) - t, self.grad_h(x)[0])
            },
            t - b,
            t + b,
        )
    }

    /// Point of `Γ_t` with `y2 - a y1 = theta`; returns `y1`.
    pub fn solve_on_line(&self, t: f64, theta: f64, a: f64) -> Result<f64> {
        if self.eps0 == 0.0 || self.g_coeffs.is_empty() {
            return Ok(t);
        }
        let b = self.eps0 * self.g_bound() + 1e-12;
        solve_increasing(
            |s| {
                let x = [s, theta + a * s];
                let d = self.grad_h(x);
                (self.h(x) - t, d[0] + a * d[1])
            },
            t - b,
            t + b,
        )
    }

    /// Signed displacement `d` with `z - d v_t ∈ Γ_t`.
    pub fn h_t(&self, t: f64, z: [f64; 2]) -> Result<f64> {
        let a = self.u.eval(t);
        if self.eps0 == 0.0 || self.g_coeffs.is_empty() {
            return Ok(z[0] - t);
        }
        let b = self.eps0 * self.g_bound() + 1e-12;
        let c = z[0] - t;
        // phi(d) = t - h(z - d v) is increasing in d
        solve_increasing(
            |d| {
                let x = [z[0] - d, z[1] - d * a];
                let g = self.grad_h(x);
                (t - self.h(x), g[0] + a * g[1])
            },
            c - b,
            c + b,
        )
    }

    pub fn level_curve(&self, t: f64, n_samples: usize) -> Result<LevelCurve> {
        if n_samples < 16 {
            return invalid(format!("level curve needs >= 16 samples, got {n_samples}"));
        }
        let samples = (0..n_samples)
            .map(|j| {
                let x2 = j as f64 / n_samples as f64;
                Ok([x2, self.solve_x1(t, x2)?])
            })
            .collect::<Result<Vec<_>>>()?;
        let a = self.u.eval(t);
        Ok(LevelCurve { t, samples, v: [1.0, a], v_perp: Self::v_perp(a) })
    }

    /// Values of `u(h(x))` on the `n x n` grid, row-major.
    pub fn slope_map(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.slope_at([i as f64 / n as f64, j as f64 / n as f64]));
            }
        }
        out
    }

    /// Values of `h` on the grid, row-major.
    pub fn h_map(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.h([i as f64 / n as f64, j as f64 / n as f64]));
            }
        }
        out
    }

    pub fn adapted_rectangle(&self, r: &Rect) -> AdaptedRect {
        let (el, es) = r.frame();
        let per_side = 256;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        // d1 h > 0, so h has no interior extrema and the boundary suffices
        for side in 0..4 {
            for m in 0..=per_side {
                let s = m as f64 / per_side as f64 - 0.5;
                let (a, b) = match side {
                    0 => (s, -0.5),
                    1 => (s, 0.5),
                    2 => (-0.5, s),
                    _ => (0.5, s),
                };
                let p = [
                    r.center[0] + a * r.l * el[0] + b * r.w * es[0],
                    r.center[1] + a * r.l * el[1] + b * r.w * es[1],
                ];
                let v = self.h(p);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let k = r.slope;
        let b0 = r.center[1] - k * r.center[0];
        let half = 0.5 * r.w * (1.0 + k * k).sqrt();
        AdaptedRect { spec: self.clone(), rect: *r, h_lo: lo, h_hi: hi, b_lo: b0 - half, b_hi: b0 + half }
    }
}

/// Safeguarded Newton for an increasing function bracketed by `[lo, hi]`.
pub fn solve_increasing(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64) -> Result<f64> {
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::NonConvergence(format!("root not bracketed in [{lo}, {hi}]")));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..ROOT_MAX_ITER {
        let (fx, dfx) = f(x);
        if fx.abs() <= ROOT_TOL {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        x = if dfx > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence(format!("no convergence after {ROOT_MAX_ITER} iterations")))
}

/// `Γ_t` as a graph `x1 = g_t(x2)`; samples are `[x2, x1]` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelCurve {
    pub t: f64,
    pub samples: Vec<[f64; 2]>,
    pub v: [f64; 2],
    pub v_perp: [f64; 2],
}

impl LevelCurve {
    /// Largest difference quotient of the sampled graph, including the wrap.
    pub fn max_slope(&self) -> f64 {
        let m = self.samples.len();
        (0..m)
            .map(|j| {
                let a = self.samples[j];
                let b = self.samples[(j + 1) % m];
                let dx2 = if j + 1 == m { b[0] + 1.0 - a[0] } else { b[0] - a[0] };
                (b[1] - a[1]).abs() / dx2
            })
            .fold(0.0, f64::max)
    }
}

/// `{x : h(x) ∈ h(R)}` intersected with the slab between the long-side lines.
#[derive(Clone, Debug)]
pub struct AdaptedRect {
    pub spec: FieldSpec,
    pub rect: Rect,
    pub h_lo: f64,
    pub h_hi: f64,
    pub b_lo: f64,
    pub b_hi: f64,
}

impl AdaptedRect {
    pub fn contains(&self, x: [f64; 2]) -> bool {
        let d = torus_delta(x, self.rect.center);
        let y = [self.rect.center[0] + d[0], self.rect.center[1] + d[1]];
        let tol = 1e-12;
        let hv = self.spec.h(y);
        let b = y[1] - self.rect.slope * y[0];
        hv >= self.h_lo - tol && hv <= self.h_hi + tol && b >= self.b_lo - tol && b <= self.b_hi + tol
    }

    /// Grid-counted area.
    pub fn area(&self, n: usize) -> f64 {
        let mut c = 0usize;
        for i in 0..n {
            for j in 0..n {
                if self.contains([i as f64 / n as f64, j as f64 / n as f64]) {
                    c += 1;
                }
            }
        }
        c as f64 / (n * n) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wavy() -> FieldSpec {
        FieldSpec::new(
            0.05,
            vec![[1.0, 1.0, 0.03, 0.01], [0.0, 2.0, -0.02, 0.015], [1.0, -1.0, 0.0, 0.02]],
            USpec::Smooth(vec![[0.0, 0.1, 0.0], [1.0, 0.4, 0.3]]),
        )
        .unwrap()
    }

    #[test]
    fn json_round_trip() {
        let s = FieldSpec::sinusoidal(0.05, USpec::steps(vec![0.0, 0.5], vec![0.5, -0.5])).unwrap();
        let txt = serde_json::to_string(&s).unwrap();
        assert!(txt.contains("\"type\":\"steps\""));
        let back: FieldSpec = serde_json::from_str(&txt).unwrap();
        assert_eq!(back, s);
        let smooth: FieldSpec =
            serde_json::from_str(r#"{"eps0":0.0,"g_coeffs":[],"u":{"type":"smooth","data":[[1,0.5,0.0]]}}"#).unwrap();
        assert!((smooth.u.eval(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        assert!(FieldSpec::new(0.2, vec![], USpec::constant(0.0)).is_err());
        assert!(FieldSpec::new(0.05, vec![], USpec::constant(1.5)).is_err());
        assert!(FieldSpec::new(0.05, vec![[0.0, 3.0, 1.0, 0.0]], USpec::constant(0.0)).is_err());
        assert!(FieldSpec::new(0.05, vec![], USpec::steps(vec![0.5, 0.2], vec![0.0, 0.0])).is_err());
    }

    #[test]
    fn steps_are_right_continuous_and_periodic() {
        let u = USpec::steps(vec![0.25, 0.75], vec![0.5, -0.5]);
        assert_eq!(u.eval(0.25), 0.5);
        assert_eq!(u.eval(0.2499), -0.5);
        assert_eq!(u.eval(0.75), -0.5);
        assert_eq!(u.eval(1.3), 0.5);
        assert_eq!(u.eval(-0.5), 0.5);
        assert_eq!(u.classes().unwrap(), vec![-0.5, 0.5]);
    }

    #[test]
    fn quasi_periodicity_and_gradient_bound() {
        let s = wavy();
        for &(a, b) in &[(0.1, 0.7), (0.33, 0.21), (0.9, 0.05)] {
            assert!((s.h([a + 1.0, b]) - s.h([a, b]) - 1.0).abs() < 1e-12);
            assert!((s.h([a, b + 1.0]) - s.h([a, b])).abs() < 1e-12);
        }
        assert!(s.max_grad_deviation(1024) <= s.eps0);
    }

    #[test]
    fn unperturbed_level_curve_is_vertical() {
        let s = FieldSpec::one_variable(USpec::constant(0.3)).unwrap();
        let c = s.level_curve(0.37, 32).unwrap();
        assert!(c.samples.iter().all(|p| p[1] == 0.37));
        assert_eq!(s.h_t(0.2, [0.7, 0.4]).unwrap(), 0.7 - 0.2);
    }

    #[test]
    fn sinusoidal_level_curve_closed_form() {
        let s = FieldSpec::sinusoidal(0.05, USpec::constant(0.0)).unwrap();
        let c = s.level_curve(0.0, 64).unwrap();
        for p in &c.samples {
            let exact = -0.05 * (2.0 * PI * p[0]).sin() / (2.0 * PI);
            assert!((p[1] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn level_curve_residual_and_slope() {
        let s = wavy();
        for &t in &[0.0, 0.3, 0.77] {
            let c = s.level_curve(t, 256).unwrap();
            for p in &c.samples {
                assert!((s.h([p[1], p[0]]) - t).abs() <= 1e-10);
                assert!(s.h_t(t, [p[1], p[0]]).unwrap().abs() <= 1e-9);
                assert!((s.slope_at([p[1], p[0]]) - s.u.eval(t)).abs() <= 1e-8);
            }
            assert!(c.max_slope() <= s.eps0 / (1.0 - s.eps0) + 1e-6);
        }
    }

    #[test]
    fn h_t_additive_along_v_and_gradient_comparable_to_one() {
        let s = wavy();
        let t = 0.41;
        let v = [1.0, s.u.eval(t)];
        for i in 0..100 {
            let z = [(i as f64 * 0.137) % 1.0, (i as f64 * 0.291) % 1.0];
            let d = -0.2 + 0.4 * (i as f64 / 99.0);
            let base = s.h_t(t, z).unwrap();
            let moved = s.h_t(t, [z[0] + d * v[0], z[1] + d * v[1]]).unwrap();
            assert!((moved - base - d).abs() < 1e-8);
            let e = 1e-6;
            let g1 = (s.h_t(t, [z[0] + e, z[1]]).unwrap() - s.h_t(t, [z[0] - e, z[1]]).unwrap()) / (2.0 * e);
            let g2 = (s.h_t(t, [z[0], z[1] + e]).unwrap() - s.h_t(t, [z[0], z[1] - e]).unwrap()) / (2.0 * e);
            let g = g1.hypot(g2);
            assert!((0.5..=2.0).contains(&g), "grad h_t = {g}");
        }
    }

    #[test]
    fn adapted_rectangle_contains_and_compares() {
        let s = wavy();
        let n = 512;
        for (k, &(c, l, w, slope)) in
            [([0.3, 0.6], 0.25, 0.03, 0.4), ([0.95, 0.1], 0.1, 0.02, -0.8), ([0.5, 0.5], 0.4, 0.05, 0.0)]
                .iter()
                .enumerate()
        {
            let r = Rect::new(c, l, w, slope).unwrap();
            let ar = s.adapted_rectangle(&r);
            let mut inside = 0;
            for i in 0..n {
                for j in 0..n {
                    let x = [i as f64 / n as f64, j as f64 / n as f64];
                    if r.contains(x) {
                        inside += 1;
                        assert!(ar.contains(x), "case {k}");
                    }
                }
            }
            let ratio = ar.area(n) / (inside as f64 / (n * n) as f64);
            assert!((0.25..=4.0).contains(&ratio), "case {k}: {ratio}");
        }
    }

    #[test]
    fn unperturbed_adapted_rectangle_is_parallelogram() {
        let s = FieldSpec::one_variable(USpec::constant(0.0)).unwrap();
        let r = Rect::new([0.5, 0.5], 0.2, 0.02, 0.5).unwrap();
        let ar = s.adapted_rectangle(&r);
        let (el, es) = r.frame();
        let half = 0.5 * (0.2 * el[0] + 0.02 * es[0].abs());
        assert!((ar.h_lo - (0.5 - half)).abs() < 1e-12);
        assert!((ar.h_hi - (0.5 + half)).abs() < 1e-12);
        assert!(ar.contains([0.5 + 0.9 * half, 0.5 + 0.5 * 0.9 * half]));
        assert!(!ar.contains([0.5 + 1.1 * half, 0.5 + 0.5 * 1.1 * half]));
        assert!(!ar.contains([0.5, 0.6]));
    }
}
