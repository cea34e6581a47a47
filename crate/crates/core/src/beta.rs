//! Jones beta numbers of sampled Lipschitz graphs and of level curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::FieldSpec;
use crate::tiles::Tile;

/// `A` on `2^m + 1` equispaced nodes of `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzSample {
    pub values: Vec<f64>,
    pub lip: f64,
}

impl LipschitzSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let cells = values.len().saturating_sub(1);
        if cells < 2 || !cells.is_power_of_two() {
            return invalid(format!("need 2^m + 1 nodes, got {}", values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("non-finite sample");
        }
        let h = 1.0 / cells as f64;
        let lip = values.windows(2).map(|w| (w[1] - w[0]).abs() / h).fold(0.0, f64::max);
        Ok(LipschitzSample { values, lip })
    }

    pub fn from_fn(m: u32, a: impl Fn(f64) -> f64) -> Result<Self> {
        let cells = 1usize << m;
        Self::new((0..=cells).map(|i| a(i as f64 / cells as f64)).collect())
    }

    pub fn cells(&self) -> usize {
        self.values.len() - 1
    }

    pub fn levels(&self) -> u32 {
        self.cells().trailing_zeros()
    }

    fn h(&self) -> f64 {
        1.0 / self.cells() as f64
    }

    fn x(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    /// Linear interpolation (exact at nodes).
    pub fn eval(&self, x: f64) -> f64 {
        let p = (x / self.h()).clamp(0.0, self.cells() as f64);
        let i = (p.floor() as usize).min(self.cells() - 1);
        let f = p - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// Node indices in `[lo, hi] ∩ [0, 1]`.
    fn nodes_in(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
        let c = self.cells() as f64;
        let a = (lo.max(0.0) * c - 1e-9).ceil().max(0.0) as usize;
        let b = ((hi.min(1.0) * c + 1e-9).floor() as usize).min(self.cells());
        a..=b
    }
}

/// `[q 2^-j, (q+1) 2^-j]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicI {
    pub j: u32,
    pub q: u64,
}

impl DyadicI {
    pub fn len(&self) -> f64 {
        (-(self.j as f64)).exp2()
    }

    pub fn left(&self) -> f64 {
        self.q as f64 * self.len()
    }

    pub fn center(&self) -> f64 {
        self.left() + 0.5 * self.len()
    }

    pub fn contains(&self, other: &DyadicI) -> bool {
        other.j >= self.j && (other.q >> (other.j - self.j)) == self.q
    }
}

/// Least-squares slope of the nodes in `3I ∩ [0,1]`.
pub fn average_slope(a: &LipschitzSample, i: DyadicI) -> Result<f64> {
    let c = i.center();
    let r = 1.5 * i.len();
    let nodes = a.nodes_in(c - r, c + r);
    if nodes.clone().count() < 2 {
        return invalid("fewer than two nodes in 3I");
    }
    let (mut sx, mut sy, mut cnt) = (0.0, 0.0, 0.0);
    for k in nodes.clone() {
        sx += a.x(k);
        sy += a.values[k];
        cnt += 1.0;
    }
    let (mx, my) = (sx / cnt, sy / cnt);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for k in nodes {
        let dx = a.x(k) - mx;
        sxy += dx * (a.values[k] - my);
        sxx += dx * dx;
    }
    Ok(sxy / sxx)
}

fn beta_with(a: &LipschitzSample, i: DyadicI, alpha: f64, j0: u32) -> f64 {
    let c = i.center();
    let ac = a.eval(c);
    let r = 1.5 * j0 as f64 * i.len();
    a.nodes_in(c - r, c + r)
        .map(|k| (a.values[k] - ac - alpha * (a.x(k) - c)).abs())
        .fold(0.0, f64::max)
        / i.len()
}

/// `max_{x in 3 j0 I} |A(x) - A(c_I) - alpha_I (x - c_I)| / |I|`, window
/// clipped to `[0, 1]`.
pub fn beta_j0(a: &LipschitzSample, i: DyadicI, j0: u32) -> Result<f64> {
    if j0 == 0 {
        return invalid("j0 must be at least 1");
    }
    Ok(beta_with(a, i, average_slope(a, i)?, j0))
}

/// Finest level used in Carleson sums: every interval keeps three nodes.
pub fn finest_level(a: &LipschitzSample) -> u32 {
    a.levels() - 1
}

/// `(1/|J|) sum_{I ⊂ J} beta_j0(I)^2 |I|` over dyadic `I` down to the
/// finest level.
pub fn carleson_sum(a: &LipschitzSample, jj: DyadicI, j0: u32) -> Result<f64> {
    let fin = finest_level(a);
    if jj.j > fin {
        return invalid("J finer than the node resolution");
    }
    let mut total = 0.0;
    for lev in jj.j..=fin {
        let span = 1u64 << (lev - jj.j);
        for q in jj.q * span..(jj.q + 1) * span {
            let i = DyadicI { j: lev, q };
            let b = beta_j0(a, i, j0)?;
            total += b * b * i.len();
        }
    }
    Ok(total / jj.len())
}

/// `max_J carleson_sum(J) / (j0^3 lip^2)` over all dyadic `J`.
pub fn carleson_constant(a: &LipschitzSample, j0: u32) -> Result<f64> {
    if a.lip == 0.0 {
        return Ok(0.0);
    }
    let table = BetaTable::build(a, j0)?;
    let fin = finest_level(a);
    // bottom-up partial sums
    let mut best: f64 = 0.0;
    let mut below: Vec<f64> = Vec::new();
    for lev in (0..=fin).rev() {
        let count = 1usize << lev;
        let cur: Vec<f64> = (0..count)
            .map(|q| {
                let b = table.beta(DyadicI { j: lev, q: q as u64 }, j0);
                let own = b * b * (-(lev as f64)).exp2();
                own + if below.is_empty() { 0.0 } else { below[2 * q] + below[2 * q + 1] }
            })
            .collect();
        for s in &cur {
            best = best.max(s * (lev as f64).exp2());
        }
        below = cur;
    }
    Ok(best / (j0.pow(3) as f64 * a.lip * a.lip))
}

/// Continuum Lipschitz profile on `[0, 1]`: a piecewise-linear part with
/// knots off the dyadic grid plus a small trigonometric part, scaled so
/// that `|A'| <= 1`. Sampling the same profile at `2^m + 1` and
/// `2^(m+1) + 1` nodes gives a node-doubling pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProfile {
    pub knots: Vec<f64>,
    pub slopes: Vec<f64>,
    /// `(frequency, amplitude, phase)`
    pub waves: Vec<(f64, f64, f64)>,
}

impl LipschitzProfile {
    pub fn random(seed: u64) -> Self {
        use rand::Rng;
        let mut rng = crate::rng::rng_for(seed);
        let pieces = rng.random_range(2..=6usize);
        let mut knots: Vec<f64> = (0..pieces - 1).map(|_| rng.random_range(0.05..0.95)).collect();
        knots.sort_by(f64::total_cmp);
        let slopes: Vec<f64> = (0..pieces).map(|_| rng.random_range(-0.6..0.6)).collect();
        let waves: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                let f = rng.random_range(1..=6) as f64;
                let amp = rng.random_range(0.0..0.4) / (2.0 * std::f64::consts::PI * f) / 3.0;
                (f, amp, rng.random_range(0.0..std::f64::consts::TAU))
            })
            .collect();
        LipschitzProfile { knots, slopes, waves }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut y = 0.0;
        let mut left = 0.0;
        for (i, &sl) in self.slopes.iter().enumerate() {
            let right = self.knots.get(i).copied().unwrap_or(f64::INFINITY);
            if x > left {
                y += sl * (x.min(right) - left);
            }
            left = right;
        }
        for &(f, a, ph) in &self.waves {
            y += a * (std::f64::consts::TAU * f * x + ph).sin();
        }
        y
    }

    pub fn sample(&self, m: u32) -> Result<LipschitzSample> {
        LipschitzSample::from_fn(m, |x| self.eval(x))
    }
}

/// `alpha_I` and `beta_j0(I)` for every dyadic `I` down to the finest level.
#[derive(Clone, Debug)]
pub struct BetaTable {
    pub j0_max: u32,
    pub rows: Vec<BetaRow>,
    offsets: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaRow {
    #[serde(rename = "I_left")]
    pub i_left: f64,
    #[serde(rename = "I_len")]
    pub i_len: f64,
    pub j0: u32,
    pub alpha: f64,
    pub beta: f64,
}

impl BetaTable {
    pub fn build(a: &LipschitzSample, j0_max: u32) -> Result<Self> {
        if j0_max == 0 {
            return invalid("j0 must be at least 1");
        }
        let fin = finest_level(a);
        let ids: Vec<DyadicI> = (0..=fin)
            .flat_map(|j| (0..1u64 << j).map(move |q| DyadicI { j, q }))
            .collect();
        let rows: Vec<BetaRow> = ids
            .par_iter()
            .map(|&i| {
                let alpha = average_slope(a, i)?;
                Ok((1..=j0_max)
                    .map(|j0| BetaRow { i_left: i.left(), i_len: i.len(), j0, alpha, beta: beta_with(a, i, alpha, j0) })
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let offsets = (0..=fin).map(|j| ((1usize << j) - 1) * j0_max as usize).collect();
        Ok(BetaTable { j0_max, rows, offsets })
    }

    pub fn beta(&self, i: DyadicI, j0: u32) -> f64 {
        self.rows[self.offsets[i.j as usize] + i.q as usize * self.j0_max as usize + (j0 - 1) as usize].beta
    }
}

/// L2-normalized Haar function of `J` on the `2^m` cells of `[0,1]`
/// (values at cell midpoints): `+|J|^-1/2` on the left half, `-` on the right.
pub fn haar(jj: DyadicI, m: u32) -> Result<Vec<f64>> {
    if jj.j + 1 > m {
        return invalid("J must span at least two cells");
    }
    let cells = 1usize << m;
    let per = cells >> jj.j;
    let start = jj.q as usize * per;
    let amp = jj.len().powf(-0.5);
    let mut v = vec![0.0; cells];
    for (k, x) in v[start..start + per].iter_mut().enumerate() {
        *x = if k < per / 2 { amp } else { -amp };
    }
    Ok(v)
}

/// Interval of the real line (for the curve beta rule).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn overlap(&self, o: &Interval) -> f64 {
        (self.hi.min(o.hi) - self.lo.max(o.lo)).max(0.0)
    }
}

/// Dyadic `J^D` with `8|J| < |J^D| <= 16|J|` and `|J^D ∩ J| >= |J|/2`;
/// the leftmost if two qualify.
pub fn dyadic_cover(j: Interval) -> Result<Interval> {
    let len = j.len();
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::Invalid("degenerate interval J".into()));
    }
    // 2^e in (8|J|, 16|J|]
    let e = (16.0 * len).log2().floor();
    let mut size = e.exp2();
    if size <= 8.0 * len {
        size *= 2.0;
    }
    let first = (j.lo / size).floor() as i64;
    for q in first..=first + 1 {
        let cand = Interval { lo: q as f64 * size, hi: (q + 1) as f64 * size };
        if cand.overlap(&j) >= 0.5 * len {
            return Ok(cand);
        }
    }
    Err(Error::Invalid("no admissible dyadic interval".into()))
}

/// Points per `|J^D|` used to sample the curve graph.
pub const CURVE_NODES: usize = 64;

/// Result of [`curve_beta`].
#[derive(Clone, Debug, PartialEq)]
pub struct CurveBeta {
    pub j: Interval,
    pub jd: Interval,
    /// `beta_{j0}(J^D)` for `j0 = 1..=j0_max`.
    pub betas: Vec<f64>,
}

/// Point of `Γ_t` at normalized coordinate `sigma` (`theta = c sigma`).
fn curve_point(spec: &FieldSpec, t: f64, a: f64, sigma: f64) -> Result<[f64; 2]> {
    let th = (1.0 + a * a).sqrt() * sigma;
    let s = spec.solve_on_line(t, th, a)?;
    Ok([s, th + a * s])
}

/// The `sigma`-range of `Γ_t ∩ s~` (sampled on `samples` points across one
/// period around the tile).
pub fn curve_tile_interval(spec: &FieldSpec, t: f64, s: &Tile, samples: usize) -> Result<Option<Interval>> {
    let rect = crate::geometry::Rect { center: s.center(), l: s.length(), w: s.width(), slope: s.slope() };
    let ar = spec.adapted_rectangle(&rect);
    let a = spec.u.eval(t);
    let c = (1.0 + a * a).sqrt();
    let centre = s.center();
    let sig0 = (centre[1] - a * centre[0]) / c;
    let half = 0.5 / c;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for q in 0..=samples {
        let sig = sig0 - half + 2.0 * half * q as f64 / samples as f64;
        let y = curve_point(spec, t, a, sig)?;
        if ar.contains([y[0].rem_euclid(1.0), y[1].rem_euclid(1.0)]) {
            lo = lo.min(sig);
            hi = hi.max(sig);
        }
    }
    Ok(if lo < hi { Some(Interval { lo, hi }) } else { None })
}

/// `J(t,s)`, `J^D(t,s)` and the betas of the graph `A_t(sigma) = y . v_t/|v_t|`
/// over `J^D`. Windows are not clipped: the curve is defined on the whole line.
pub fn curve_beta(spec: &FieldSpec, t: f64, s: &Tile, j0_max: u32, samples: usize) -> Result<CurveBeta> {
    let j = curve_tile_interval(spec, t, s, samples)?
        .ok_or_else(|| Error::Invalid("level curve misses the adapted tile".into()))?;
    let jd = dyadic_cover(j)?;
    let betas = interval_betas(spec, t, jd, j0_max)?;
    Ok(CurveBeta { j, jd, betas })
}

/// Betas of `A_t` on the dyadic interval `jd` for `j0 = 1..=j0_max`.
pub fn interval_betas(spec: &FieldSpec, t: f64, jd: Interval, j0_max: u32) -> Result<Vec<f64>> {
    let a = spec.u.eval(t);
    let c = (1.0 + a * a).sqrt();
    let vhat = [1.0 / c, a / c];
    let len = jd.len();
    let centre = 0.5 * (jd.lo + jd.hi);
    let h = len / CURVE_NODES as f64;
    let reach = (1.5 * j0_max as f64 * CURVE_NODES as f64).round() as i64;
    let graph = |k: i64| -> Result<(f64, f64)> {
        let sig = centre + k as f64 * h;
        let y = curve_point(spec, t, a, sig)?;
        Ok((sig, y[0] * vhat[0] + y[1] * vhat[1]))
    };
    let pts: Vec<(f64, f64)> = (-reach..=reach).map(graph).collect::<Result<_>>()?;
    let mid = reach as usize;
    let a_c = pts[mid].1;
    let r3 = (1.5 * CURVE_NODES as f64).round() as usize;
    let fit = &pts[mid - r3..=mid + r3];
    let n = fit.len() as f64;
    let mx = fit.iter().map(|p| p.0).sum::<f64>() / n;
    let my = fit.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = fit.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let alpha = sxy / sxx;
    Ok((1..=j0_max)
        .map(|j0| {
            let r = (1.5 * j0 as f64 * CURVE_NODES as f64).round() as usize;
            pts[mid - r..=mid + r]
                .iter()
                .map(|p| (p.1 - a_c - alpha * (p.0 - centre)).abs())
                .fold(0.0, f64::max)
                / len
        })
        .collect())
}

/// `<j0>^-n` weighting of the pointwise bound.
pub const BETA_DECAY_N: i32 = 10;

pub fn japanese(j0: u32) -> f64 {
    (1.0 + (j0 * j0) as f64).sqrt()
}

/// `sum_{j0} beta_{j0} / <j0>^N`.
pub fn weighted_beta_sum(betas: &[f64]) -> f64 {
    betas
        .iter()
        .enumerate()
        .map(|(i, b)| b / japanese(i as u32 + 1).powi(BETA_DECAY_N))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::USpec;
    use crate::tiles::DyadicInterval;

    #[test]
    fn linear_functions_have_zero_beta() {
        let a = LipschitzSample::from_fn(6, |x| 0.7 * x - 0.2).unwrap();
        for j in 0..5 {
            for q in 0..1u64 << j {
                let i = DyadicI { j, q };
                assert!((average_slope(&a, i).unwrap() - 0.7).abs() < 1e-12);
                for j0 in 1..4 {
                    assert!(beta_j0(&a, i, j0).unwrap() < 1e-13);
                }
            }
        }
        assert!(carleson_sum(&a, DyadicI { j: 0, q: 0 }, 2).unwrap() < 1e-24);
    }

    #[test]
    fn symmetric_kink_has_zero_slope() {
        let a = LipschitzSample::from_fn(6, |x| (x - 0.5).abs()).unwrap();
        let i = DyadicI { j: 2, q: 1 };
        // 3I around [1/4,1/2] is [0, 3/4]: not symmetric about 1/2, so use
        // the interval centred at 1/2 one level up
        let centred = DyadicI { j: 0, q: 0 };
        assert!(average_slope(&a, centred).unwrap().abs() < 1e-12);
        // exhaustive scan oracle for I = [1/4, 1/2], j0 = 1
        let alpha = {
            let xs: Vec<f64> = (0..=48).map(|k| k as f64 / 64.0).collect();
            let ys: Vec<f64> = xs.iter().map(|x| (x - 0.5).abs()).collect();
            let mx = xs.iter().sum::<f64>() / xs.len() as f64;
            let my = ys.iter().sum::<f64>() / ys.len() as f64;
            let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
            num / den
        };
        assert!((average_slope(&a, i).unwrap() - alpha).abs() < 1e-12);
        let mut want: f64 = 0.0;
        for k in 0..=48 {
            let x = k as f64 / 64.0;
            want = want.max(((x - 0.5).abs() - 0.125 - alpha * (x - 0.375)).abs());
        }
        assert!((beta_j0(&a, i, 1).unwrap() - want / 0.25).abs() < 1e-12);
    }

    #[test]
    fn normal_equations_oracle() {
        let a = LipschitzSample::from_fn(6, |x| (7.0 * x).sin() * 0.1 + x * x).unwrap();
        let i = DyadicI { j: 3, q: 5 };
        // 3I = [0.5, 0.875]
        let (mut s1, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 32..=56 {
            let x = k as f64 / 64.0;
            let y = a.values[k];
            s1 += 1.0;
            sx += x;
            sxx += x * x;
            sy += y;
            sxy += x * y;
        }
        let slope = (s1 * sxy - sx * sy) / (s1 * sxx - sx * sx);
        assert!((average_slope(&a, i).unwrap() - slope).abs() < 1e-10);
    }

    #[test]
    fn windows_grow_with_j0() {
        let a = LipschitzSample::from_fn(7, |x| (9.0 * x).cos() * 0.2).unwrap();
        let i = DyadicI { j: 3, q: 2 };
        let mut prev = 0.0;
        for j0 in 1..6 {
            let b = beta_j0(&a, i, j0).unwrap();
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn profile_is_one_lipschitz_and_stable_under_doubling() {
        for seed in 0..8 {
            let p = LipschitzProfile::random(seed);
            let a = p.sample(8).unwrap();
            let b = p.sample(9).unwrap();
            assert!(a.lip <= 1.0 + 1e-12 && b.lip <= 1.0 + 1e-12);
            for k in 0..=256 {
                assert_eq!(a.values[k], b.values[2 * k]);
            }
        }
    }

    #[test]
    fn carleson_constant_matches_direct_sums() {
        let a = LipschitzProfile::random(3).sample(6).unwrap();
        let mut want: f64 = 0.0;
        for j in 0..=finest_level(&a) {
            for q in 0..1u64 << j {
                want = want.max(carleson_sum(&a, DyadicI { j, q }, 2).unwrap());
            }
        }
        let got = carleson_constant(&a, 2).unwrap() * 8.0 * a.lip * a.lip;
        assert!((got - want).abs() < 1e-12 * want.max(1.0));
    }

    #[test]
    fn haar_orthonormal() {
        let m = 6;
        let h = 1.0 / 64.0;
        let ids: Vec<DyadicI> = (0..4).flat_map(|j| (0..1u64 << j).map(move |q| DyadicI { j, q })).collect();
        for a in &ids {
            let va = haar(*a, m).unwrap();
            assert!((va.iter().map(|x| x * x * h).sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(va.iter().sum::<f64>().abs() * h < 1e-12);
            for b in &ids {
                if a != b {
                    let vb = haar(*b, m).unwrap();
                    assert!(va.iter().zip(&vb).map(|(x, y)| x * y * h).sum::<f64>().abs() < 1e-12);
                }
            }
        }
        assert!(haar(DyadicI { j: 6, q: 0 }, 6).is_err());
    }

    #[test]
    fn dyadic_cover_rule() {
        for &(lo, hi) in &[(0.1, 0.13), (0.49, 0.51), (-0.3, -0.21), (0.0, 0.0625)] {
            let j = Interval { lo, hi };
            let d = dyadic_cover(j).unwrap();
            let r = d.len() / j.len();
            assert!(r > 8.0 && r <= 16.0);
            assert!(d.overlap(&j) >= 0.5 * j.len());
            let q = d.lo / d.len();
            assert!((q - q.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn straight_curves_have_zero_beta() {
        let spec = FieldSpec::one_variable(USpec::constant(0.3)).unwrap();
        let s = Tile { k: 4, omega: DyadicInterval::new(1, 3).unwrap(), pos: [1, 2] };
        let t = spec.h(s.center());
        let cb = curve_beta(&spec, t, &s, 4, 2048).unwrap();
        assert!(cb.betas.iter().all(|&b| b < 1e-12));
        let r = cb.jd.len() / cb.j.len();
        assert!(r > 8.0 && r <= 16.0);
    }

    #[test]
    fn sinusoidal_curve_beta_matches_brute_force() {
        let spec = FieldSpec::sinusoidal(0.05, USpec::constant(0.0)).unwrap();
        let jd = Interval { lo: 0.25, hi: 0.5 };
        let betas = interval_betas(&spec, 0.1, jd, 3).unwrap();
        // u = 0: sigma = x2 and A = x1 = 0.1 - 0.05 sin(2 pi x2)/(2 pi)
        let graph = |x: f64| 0.1 - 0.05 * (2.0 * std::f64::consts::PI * x).sin() / (2.0 * std::f64::consts::PI);
        let h = 0.25 / 64.0;
        let xs: Vec<f64> = (-96..=96).map(|k| 0.375 + k as f64 * h).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| graph(x)).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let alpha = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        for j0 in 1..=3u32 {
            let r = 96 * j0 as i64;
            let mut want: f64 = 0.0;
            for k in -r..=r {
                let x = 0.375 + k as f64 * h;
                want = want.max((graph(x) - graph(0.375) - alpha * (x - 0.375)).abs());
            }
            assert!((betas[j0 as usize - 1] - want / 0.25).abs() < 1e-8);
        }
    }
}
