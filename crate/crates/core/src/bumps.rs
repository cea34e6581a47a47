//! Smooth cutoffs and the dyadic families built from them.
//!
//! `chi` is 1 on [-1,1] and 0 outside [-2,2], with the transition
//! `e(1-s)/(e(1-s)+e(s))`, `e(s) = exp(-1/s)`, `s = |t|-1`. Then
//! `psi0(t) = chi(t) - chi(2t)` lives on `1/2 <= |t| <= 2` and
//! `sum_{k=a}^{b} psi0(2^-k t) = chi(2^-b t) - chi(2^(1-a) t)`, which is
//! exactly 1 on `2^a <= |t| <= 2^b`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{invalid, Result};
use crate::interp::stencil;
use crate::C64;

#[inline]
fn e(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// 1 for `s <= 0`, 0 for `s >= 1`, smooth in between.
#[inline]
pub fn step_down(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let a = e(1.0 - s);
        a / (a + e(s))
    }
}

#[inline]
pub fn chi(t: f64) -> f64 {
    step_down(t.abs() - 1.0)
}

#[inline]
pub fn psi0(t: f64) -> f64 {
    chi(t) - chi(2.0 * t)
}

/// `psi_k(t) = psi0(2^-k t)` (two-sided, even).
#[inline]
pub fn psi(k: i32, t: f64) -> f64 {
    psi0(t * (-k as f64).exp2())
}

/// One-sided family: `psi_l` restricted to `t > 0`.
#[inline]
pub fn psi_plus(l: i32, t: f64) -> f64 {
    if t > 0.0 {
        psi(l, t)
    } else {
        0.0
    }
}

/// Plain sum of `psi_k(t)` over `k_min..=k_max`.
pub fn psi_sum(k_min: i32, k_max: i32, t: f64) -> f64 {
    (k_min..=k_max).map(|k| psi(k, t)).sum()
}

/// Sum of the one-sided pieces over `l_min..=l_max`, in closed telescoped form.
#[inline]
pub fn psi_plus_sum(l_min: i32, l_max: i32, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        chi(t * (-l_max as f64).exp2()) - chi(t * ((1 - l_min) as f64).exp2())
    }
}

/// Half-width of the reproducing window used by the adapted projection in
/// the commutator and pointwise experiments.
pub const REPRO_SPAN: i32 = 2;

/// `sum_{|j| <= REPRO_SPAN} psi_{k+j}(t)`, equal to 1 on
/// `2^(k-2) <= |t| <= 2^(k+2)`.
#[inline]
pub fn psi_repro(k: i32, t: f64) -> f64 {
    chi(t * (-(k + REPRO_SPAN) as f64).exp2()) - chi(t * ((1 - (k - REPRO_SPAN)) as f64).exp2())
}

/// `beta = b^2` with `b = chi`, so `beta = 1` on [-1,1], 0 outside [-2,2]
/// and `sqrt(beta) = chi` is smooth.
#[inline]
pub fn beta(x: f64) -> f64 {
    let b = chi(x);
    b * b
}

#[inline]
pub fn sqrt_beta(x: f64) -> f64 {
    chi(x)
}

/// 1 on [1,2], 0 outside [1/2, 5/2].
#[inline]
pub fn beta_tilde(x: f64) -> f64 {
    if x <= 1.0 {
        step_down(2.0 * (1.0 - x))
    } else {
        step_down(2.0 * (x - 2.0))
    }
}

/// Dyadic scales `k_min..=k_max` for the vertical LP projections.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LPFamily {
    pub k_min: i32,
    pub k_max: i32,
}

impl LPFamily {
    /// All scales usable on an `n` grid: `0 <= k`, `2^k_max <= n/4`.
    pub fn for_grid(n: usize) -> Self {
        LPFamily { k_min: 0, k_max: crate::grid::log2(n) - 2 }
    }

    pub fn new(k_min: i32, k_max: i32, n: usize) -> Result<Self> {
        let full = Self::for_grid(n);
        if k_min > k_max || k_min < full.k_min || k_max > full.k_max {
            return invalid(format!(
                "k range [{k_min}, {k_max}] not inside [{}, {}] for n={n}",
                full.k_min, full.k_max
            ));
        }
        Ok(LPFamily { k_min, k_max })
    }

    pub fn contains(&self, k: i32) -> bool {
        (self.k_min..=self.k_max).contains(&k)
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> {
        self.k_min..=self.k_max
    }
}

// Inverse transform of the one-sided psi0, tabulated after demodulating by
// the band centre so the tabulated function is slowly varying.
const CHECK_STEP: f64 = 1.0 / 32.0;
const CHECK_RANGE: f64 = 160.0;
const CHECK_CENTRE: f64 = 1.25;
const CHECK_ORDER: usize = 10;

fn check_table() -> &'static Vec<C64> {
    static TABLE: OnceLock<Vec<C64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let nodes = 4096;
        let (a, b) = (0.5, 2.0);
        let h = (b - a) / nodes as f64;
        let taus: Vec<(f64, f64)> = (1..nodes)
            .map(|i| {
                let tau = a + i as f64 * h;
                (tau - CHECK_CENTRE, psi0(tau) * h)
            })
            .collect();
        let count = (2.0 * CHECK_RANGE / CHECK_STEP) as usize + 1;
        (0..count)
            .map(|m| {
                let t = -CHECK_RANGE + m as f64 * CHECK_STEP;
                taus.iter()
                    .map(|&(d, w)| C64::from_polar(w, 2.0 * PI * t * d))
                    .sum()
            })
            .collect()
    })
}

/// `int psi0(tau) exp(2 pi i t tau) d tau` over `tau > 0`, for `|t| <= 150`;
/// zero beyond (the tail there is below 1e-12).
pub fn psi0_plus_check(t: f64) -> C64 {
    if t.abs() > CHECK_RANGE - 10.0 {
        return C64::default();
    }
    let table = check_table();
    let mut w = [0.0; CHECK_ORDER];
    let base = stencil((t + CHECK_RANGE) / CHECK_STEP, CHECK_ORDER, &mut w);
    let mut acc = C64::default();
    for (p, wp) in w.iter().enumerate() {
        acc += table[(base + p as i64) as usize] * *wp;
    }
    acc * C64::from_polar(1.0, 2.0 * PI * CHECK_CENTRE * t)
}

/// `check(psi_l^+)(t) = 2^l check(psi0^+)(2^l t)`.
pub fn psi_plus_check(l: i32, t: f64) -> C64 {
    let s = (l as f64).exp2();
    psi0_plus_check(s * t) * s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_plateau_and_support() {
        assert_eq!(chi(0.0), 1.0);
        assert_eq!(chi(1.0), 1.0);
        assert_eq!(chi(-1.0), 1.0);
        assert_eq!(chi(2.0), 0.0);
        assert_eq!(chi(2.5), 0.0);
        assert!((chi(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn psi0_support_and_values() {
        assert_eq!(psi0(0.0), 0.0);
        assert_eq!(psi0(0.5), 0.0);
        assert_eq!(psi0(2.0), 0.0);
        assert_eq!(psi0(1.0), 1.0);
        assert!((psi0(1.5) - 0.5).abs() < 1e-15);
        assert_eq!(psi0(-1.2), psi0(1.2));
    }

    #[test]
    fn telescoping_is_exact() {
        for i in 0..2000 {
            let t = 1.0 + i as f64 * (64.0 - 1.0) / 1999.0;
            assert!((psi_sum(0, 6, t) - 1.0).abs() < 1e-12, "t={t}");
            assert!((psi_sum(0, 6, -t) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_sided_closed_form_matches_sum() {
        for i in 1..500 {
            let t = i as f64 * 0.13;
            let direct: f64 = (-3..=5).map(|l| psi_plus(l, t)).sum();
            assert!((psi_plus_sum(-3, 5, t) - direct).abs() < 1e-13);
            assert_eq!(psi_plus_sum(-3, 5, -t), 0.0);
        }
    }

    #[test]
    fn repro_window() {
        for k in 1..5 {
            let direct = |t: f64| (k - REPRO_SPAN..=k + REPRO_SPAN).map(|j| psi(j, t)).sum::<f64>();
            for i in 0..300 {
                let t = 0.01 + i as f64 * 0.3;
                assert!((psi_repro(k, t) - direct(t)).abs() < 1e-13);
            }
            let lo = (k as f64 - 2.0).exp2();
            let hi = (k as f64 + 2.0).exp2();
            for i in 0..=100 {
                let t = lo + (hi - lo) * i as f64 / 100.0;
                assert!((psi_repro(k, t) - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn beta_family() {
        assert_eq!(beta(0.9), 1.0);
        assert_eq!(beta(2.0), 0.0);
        assert!((sqrt_beta(1.3).powi(2) - beta(1.3)).abs() < 1e-15);
        assert_eq!(beta_tilde(1.0), 1.0);
        assert_eq!(beta_tilde(1.7), 1.0);
        assert_eq!(beta_tilde(2.0), 1.0);
        assert_eq!(beta_tilde(0.5), 0.0);
        assert_eq!(beta_tilde(2.5), 0.0);
        assert!(beta_tilde(0.75) > 0.0 && beta_tilde(0.75) < 1.0);
    }

    #[test]
    fn inverse_transform_against_direct_quadrature() {
        // independent midpoint rule on a different node set
        for &t in &[0.0, 0.3, -1.7, 5.25, 12.0, -33.3] {
            let m = 20000;
            let h = 1.5 / m as f64;
            let mut direct = C64::default();
            for i in 0..m {
                let tau = 0.5 + (i as f64 + 0.5) * h;
                direct += C64::from_polar(psi0(tau) * h, 2.0 * PI * t * tau);
            }
            assert!((psi0_plus_check(t) - direct).norm() < 1e-10, "t={t}");
        }
    }
}
