//! Complex samples on the periodic unit torus and their Fourier side.
//!
//! Sample `(i, j)` sits at `x = (i/n, j/n)` and is stored at `values[i*n + j]`,
//! so `i` runs along `x1` and `j` along `x2`. Fourier coefficients follow
//! `f(x) = sum_xi c_xi exp(2 pi i xi.x)` with `c = DFT(f) / n^2` and
//! `xi in [-n/2, n/2)^2`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::{self, bin, freq};
use crate::interp::stencil;
use crate::rng::rng_for;
use crate::C64;

pub const MIN_N: usize = 16;
pub const MAX_N: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction2D {
    pub n: usize,
    pub values: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum2D {
    pub n: usize,
    /// FFT bin order: `coeffs[bin(xi1)*n + bin(xi2)]`.
    pub coeffs: Vec<C64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub half_angle_slope: f64,
}

impl Default for ConeSpec {
    fn default() -> Self {
        ConeSpec { half_angle_slope: 1.0 }
    }
}

impl ConeSpec {
    pub fn new(half_angle_slope: f64) -> Result<Self> {
        if !(half_angle_slope > 0.0 && half_angle_slope <= 1.0) {
            return invalid(format!("cone slope {half_angle_slope} outside (0,1]"));
        }
        Ok(ConeSpec { half_angle_slope })
    }

    pub fn contains(&self, xi1: i64, xi2: i64) -> bool {
        xi2 != 0 && (xi1.abs() as f64) <= self.half_angle_slope * xi2.abs() as f64
    }
}

pub fn check_n(n: usize) -> Result<()> {
    if !n.is_power_of_two() || !(MIN_N..=MAX_N).contains(&n) {
        return invalid(format!("grid size {n} must be a power of two in [{MIN_N}, {MAX_N}]"));
    }
    Ok(())
}

pub fn log2(n: usize) -> i32 {
    n.trailing_zeros() as i32
}

impl GridFunction2D {
    pub fn new(n: usize, values: Vec<C64>) -> Result<Self> {
        check_n(n)?;
        if values.len() != n * n {
            return invalid(format!("expected {} values, got {}", n * n, values.len()));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numerical("grid contains non-finite values".into()));
        }
        Ok(GridFunction2D { n, values })
    }

    pub fn zeros(n: usize) -> Self {
        GridFunction2D { n, values: vec![C64::default(); n * n] }
    }

    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> C64 + Sync) -> Self {
        let h = 1.0 / n as f64;
        let mut values = vec![C64::default(); n * n];
        values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(i as f64 * h, j as f64 * h);
            }
        });
        GridFunction2D { n, values }
    }

    /// Pure mode `exp(2 pi i (xi1 x1 + xi2 x2))`.
    pub fn mode(n: usize, xi1: i64, xi2: i64) -> Self {
        let mut s = Spectrum2D::zeros(n);
        s.set(xi1, xi2, C64::new(1.0, 0.0));
        s.to_grid()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.values[i * self.n + j]
    }

    pub fn spectrum(&self) -> Spectrum2D {
        let mut c = self.values.clone();
        fft::fft2(&mut c, self.n, false);
        let s = 1.0 / (self.n * self.n) as f64;
        c.par_iter_mut().for_each(|v| *v *= s);
        Spectrum2D { n: self.n, coeffs: c }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s / (self.n * self.n) as f64).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `n^-2 sum f conj(g)`.
    pub fn inner(&self, g: &GridFunction2D) -> C64 {
        let s: C64 = self.values.iter().zip(&g.values).map(|(a, b)| a * b.conj()).sum();
        s / (self.n * self.n) as f64
    }

    pub fn scale(&self, c: C64) -> Self {
        GridFunction2D { n: self.n, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, g: &GridFunction2D) -> Self {
        let values = self.values.iter().zip(&g.values).map(|(a, b)| a + b).collect();
        GridFunction2D { n: self.n, values }
    }

    pub fn sub(&self, g: &GridFunction2D) -> Self {
        let values = self.values.iter().zip(&g.values).map(|(a, b)| a - b).collect();
        GridFunction2D { n: self.n, values }
    }

    pub fn add_assign(&mut self, g: &GridFunction2D) {
        for (a, b) in self.values.iter_mut().zip(&g.values) {
            *a += b;
        }
    }

    /// Relative L2 distance `|self - g| / |g|` (0 when both vanish).
    pub fn rel_l2(&self, g: &GridFunction2D) -> f64 {
        let d = self.sub(g).l2_norm();
        let r = g.l2_norm();
        if r == 0.0 {
            d
        } else {
            d / r
        }
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm(self, p)
    }

    /// Little-endian dump: "LHG2", u32 n, 8 zero bytes, then (re, im) f64 pairs.
    pub fn to_lhg2_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 16 * self.values.len());
        out.extend_from_slice(b"LHG2");
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&[0u8; 8]);
        for v in &self.values {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }

    pub fn from_lhg2_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != b"LHG2" {
            return invalid("not an LHG2 grid dump");
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        check_n(n)?;
        if bytes.len() != 16 + 16 * n * n {
            return invalid(format!("LHG2 payload length does not match n={n}"));
        }
        let values = bytes[16..]
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        GridFunction2D::new(n, values)
    }
}

impl Spectrum2D {
    pub fn zeros(n: usize) -> Self {
        Spectrum2D { n, coeffs: vec![C64::default(); n * n] }
    }

    #[inline]
    pub fn get(&self, xi1: i64, xi2: i64) -> C64 {
        self.coeffs[bin(xi1, self.n) * self.n + bin(xi2, self.n)]
    }

    #[inline]
    pub fn set(&mut self, xi1: i64, xi2: i64, v: C64) {
        let n = self.n;
        self.coeffs[bin(xi1, n) * n + bin(xi2, n)] = v;
    }

    /// `sum |c|^2`, equal to the grid L2 norm squared by Parseval.
    pub fn l2_norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn to_grid(&self) -> GridFunction2D {
        let mut v = self.coeffs.clone();
        fft::fft2(&mut v, self.n, true);
        GridFunction2D { n: self.n, values: v }
    }

    /// Multiply by a symbol evaluated at the integer frequencies.
    pub fn apply(&mut self, m: &(impl Fn(f64, f64) -> C64 + Sync)) -> Result<()> {
        let n = self.n;
        let bad = self
            .coeffs
            .par_chunks_mut(n)
            .enumerate()
            .map(|(a, row)| {
                let xi1 = freq(a, n) as f64;
                let mut bad = false;
                for (b, c) in row.iter_mut().enumerate() {
                    let s = m(xi1, freq(b, n) as f64);
                    if !s.re.is_finite() || !s.im.is_finite() {
                        bad = true;
                    }
                    *c *= s;
                }
                bad
            })
            .reduce(|| false, |x, y| x || y);
        if bad {
            return Err(Error::Numerical("multiplier produced non-finite values".into()));
        }
        Ok(())
    }
}

/// `(n^-2 sum |f|^p)^(1/p)` for finite `p > 1`.
pub fn lp_norm(f: &GridFunction2D, p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("lp_norm needs finite p > 1, got {p}")));
    }
    let s: f64 = f.values.iter().map(|v| v.norm().powf(p)).sum();
    Ok((s / (f.n * f.n) as f64).powf(1.0 / p))
}

/// Apply the Fourier multiplier `m(xi1, xi2)`; exact at grid frequencies.
pub fn multiplier_apply(
    f: &GridFunction2D,
    m: impl Fn(f64, f64) -> C64 + Sync,
) -> Result<GridFunction2D> {
    let mut s = f.spectrum();
    s.apply(&m)?;
    Ok(s.to_grid())
}

/// Real-symbol convenience wrapper.
pub fn multiplier_apply_real(
    f: &GridFunction2D,
    m: impl Fn(f64, f64) -> f64 + Sync,
) -> Result<GridFunction2D> {
    multiplier_apply(f, |a, b| C64::new(m(a, b), 0.0))
}

/// Spectrally oversampled copy of a grid function with local Lagrange
/// interpolation on the fine grid.
#[derive(Clone, Debug)]
pub struct OffgridSampler {
    pub n: usize,
    pub factor: usize,
    pub order: usize,
    fine_n: usize,
    fine: Vec<C64>,
}

pub const OVERSAMPLE: usize = 4;
pub const SAMPLE_ORDER: usize = 10;

/// Zero-padded spectral refinement of `f` to an `(factor*n)^2` grid.
pub fn oversample(f: &GridFunction2D, factor: usize) -> Vec<C64> {
    let n = f.n;
    let m = n * factor;
    let s = f.spectrum();
    let mut big = vec![C64::default(); m * m];
    for a in 0..n {
        let ra = bin(freq(a, n), m);
        for b in 0..n {
            big[ra * m + bin(freq(b, n), m)] = s.coeffs[a * n + b];
        }
    }
    fft::fft2(&mut big, m, true);
    big
}

/// Transpose of [`oversample`] with respect to the plain sums on both grids
/// (the coarse side then divided by nothing further): returns `O^H g`.
pub fn oversample_adjoint(fine: &[C64], n: usize, factor: usize) -> GridFunction2D {
    let m = n * factor;
    let mut big = fine.to_vec();
    fft::fft2(&mut big, m, false);
    let mut small = vec![C64::default(); n * n];
    for a in 0..n {
        let ra = bin(freq(a, n), m);
        for b in 0..n {
            small[a * n + b] = big[ra * m + bin(freq(b, n), m)];
        }
    }
    fft::fft2(&mut small, n, true);
    let s = 1.0 / (n * n) as f64;
    small.iter_mut().for_each(|v| *v *= s);
    GridFunction2D { n, values: small }
}

impl OffgridSampler {
    pub fn new(f: &GridFunction2D) -> Self {
        Self::with_params(f, OVERSAMPLE, SAMPLE_ORDER)
    }

    pub fn with_params(f: &GridFunction2D, factor: usize, order: usize) -> Self {
        let fine = oversample(f, factor);
        OffgridSampler { n: f.n, factor, order, fine_n: f.n * factor, fine }
    }

    pub fn fine(&self) -> &[C64] {
        &self.fine
    }

    pub fn fine_n(&self) -> usize {
        self.fine_n
    }

    pub fn sample(&self, x: [f64; 2]) -> C64 {
        sample_fine(&self.fine, self.fine_n, self.order, x)
    }
}

/// Tensor Lagrange interpolation on a periodic `m x m` grid at torus point `x`.
pub fn sample_fine(fine: &[C64], m: usize, order: usize, x: [f64; 2]) -> C64 {
    let mut w1 = [0.0; 16];
    let mut w2 = [0.0; 16];
    let b1 = stencil(x[0] * m as f64, order, &mut w1);
    let b2 = stencil(x[1] * m as f64, order, &mut w2);
    let mi = m as i64;
    let mut cols = [0usize; 16];
    for (q, c) in cols[..order].iter_mut().enumerate() {
        *c = (b2 + q as i64).rem_euclid(mi) as usize;
    }
    let mut acc = C64::default();
    for p in 0..order {
        if w1[p] == 0.0 {
            continue;
        }
        let row = &fine[(b1 + p as i64).rem_euclid(mi) as usize * m..][..m];
        let mut r = C64::default();
        for q in 0..order {
            r += row[cols[q]] * w2[q];
        }
        acc += r * w1[p];
    }
    acc
}

/// One-off off-grid evaluation; build an [`OffgridSampler`] for many probes.
pub fn sample_offgrid(f: &GridFunction2D, x: [f64; 2]) -> C64 {
    OffgridSampler::new(f).sample(x)
}

/// Direct trigonometric sum of the grid interpolant at `x`.
pub fn trig_eval(s: &Spectrum2D, x: [f64; 2]) -> C64 {
    let n = s.n;
    let mut acc = C64::default();
    for a in 0..n {
        let xi1 = freq(a, n) as f64;
        for b in 0..n {
            let c = s.coeffs[a * n + b];
            if c != C64::default() {
                let ph = 2.0 * std::f64::consts::PI * (xi1 * x[0] + freq(b, n) as f64 * x[1]);
                acc += c * C64::from_polar(1.0, ph);
            }
        }
    }
    acc
}

/// Admissible frequencies of [`random_bandlimited`] in generation order. The
/// order does not depend on `n`, so the same seed gives the same
/// trigonometric polynomial on every grid that can hold it.
pub fn band_frequencies(cone: ConeSpec, band: (i32, i32)) -> Vec<(i64, i64)> {
    let lo = 1i64 << band.0;
    let hi = 1i64 << band.1;
    let mut out = Vec::new();
    for xi2 in -hi..=hi {
        if xi2.abs() < lo {
            continue;
        }
        let w = (cone.half_angle_slope * xi2.abs() as f64 + 1e-9).floor() as i64;
        for xi1 in -w..=w {
            out.push((xi1, xi2));
        }
    }
    out
}

/// Unit-L2 random function with spectrum in the cone and the dyadic band
/// `2^k_lo <= |xi2| <= 2^k_hi`; coefficients are iid complex Gaussians.
pub fn random_bandlimited(
    seed: u64,
    n: usize,
    cone: ConeSpec,
    band: (i32, i32),
) -> Result<GridFunction2D> {
    check_n(n)?;
    if band.0 < 0 || band.0 > band.1 {
        return invalid(format!("bad band [{}, {}]", band.0, band.1));
    }
    if (1usize << band.1) > n / 4 {
        return invalid(format!("band top 2^{} exceeds n/4 = {}", band.1, n / 4));
    }
    let freqs = band_frequencies(cone, band);
    if freqs.is_empty() {
        return invalid("no admissible frequencies");
    }
    let mut rng = rng_for(seed);
    let mut s = Spectrum2D::zeros(n);
    for &(a, b) in &freqs {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        s.set(a, b, C64::new(re, im));
    }
    let norm = s.l2_norm_sqr().sqrt();
    s.coeffs.iter_mut().for_each(|c| *c /= norm);
    Ok(s.to_grid())
}

/// Drop every `xi1 = 0` mode (zero mean along each horizontal line) and
/// renormalize to unit L2.
pub fn remove_row_means(f: &GridFunction2D) -> Result<GridFunction2D> {
    let g = multiplier_apply_real(f, |a, _| if a == 0.0 { 0.0 } else { 1.0 })?;
    let nrm = g.l2_norm();
    if nrm == 0.0 {
        return invalid("function has only xi1 = 0 modes");
    }
    Ok(g.scale(C64::new(1.0 / nrm, 0.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetry {
    /// `x1 -> lambda x1`
    A,
    /// `x2 -> lambda x2`
    B,
    /// shear `x2 -> x2 + lambda x1`
    C,
    /// shear `x1 -> x1 + lambda x2`
    D,
}

impl std::str::FromStr for Symmetry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(Symmetry::A),
            "B" => Ok(Symmetry::B),
            "C" => Ok(Symmetry::C),
            "D" => Ok(Symmetry::D),
            _ => invalid(format!("unknown symmetry {s}")),
        }
    }
}

/// Jacobian of the change of variables (the plane L^p norm scales by
/// `jacobian^(-1/p)`; on the torus the norm is unchanged).
pub fn symmetry_jacobian(which: Symmetry, lambda: f64) -> f64 {
    match which {
        Symmetry::A | Symmetry::B => lambda,
        Symmetry::C | Symmetry::D => 1.0,
    }
}

/// Resample `f` after a lattice-preserving linear change of variables.
/// A/B: `g(x) = f(lambda x1, x2)` / `f(x1, lambda x2)` with `lambda = 2^j`,
/// `j >= 0`. C/D: `g(x) = f(x1, x2 - lambda x1)` / `f(x1 - lambda x2, x2)`
/// with integer `lambda`, which sends the mode `(xi1, xi2)` to
/// `(xi1 - lambda xi2, xi2)` (C) or `(xi1, xi2 - lambda xi1)` (D).
pub fn apply_symmetry(f: &GridFunction2D, which: Symmetry, lambda: f64) -> Result<GridFunction2D> {
    let n = f.n;
    let ni = n as i64;
    match which {
        Symmetry::A | Symmetry::B => {
            let ok = lambda >= 1.0 && lambda.fract() == 0.0 && (lambda as u64).is_power_of_two();
            if !ok {
                return invalid(format!("dilation factor {lambda} must be 2^j with j >= 0"));
            }
            let l = lambda as i64;
            Ok(GridFunction2D::from_index(n, |i, j| {
                let (i, j) = (i as i64, j as i64);
                let (a, b) = if which == Symmetry::A { (i * l, j) } else { (i, j * l) };
                f.at(a.rem_euclid(ni) as usize, b.rem_euclid(ni) as usize)
            }))
        }
        Symmetry::C | Symmetry::D => {
            if lambda.fract() != 0.0 || !lambda.is_finite() {
                return invalid(format!("shear {lambda} must be an integer to keep the torus lattice"));
            }
            let l = lambda as i64;
            Ok(GridFunction2D::from_index(n, |i, j| {
                let (i, j) = (i as i64, j as i64);
                let (a, b) = if which == Symmetry::C { (i, j - l * i) } else { (i - l * j, j) };
                f.at(a.rem_euclid(ni) as usize, b.rem_euclid(ni) as usize)
            }))
        }
    }
}

impl GridFunction2D {
    pub fn from_index(n: usize, f: impl Fn(usize, usize) -> C64 + Sync) -> Self {
        let mut values = vec![C64::default(); n * n];
        values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(i, j);
            }
        });
        GridFunction2D { n, values }
    }
}
