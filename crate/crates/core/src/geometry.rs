//! Tilted rectangles on the torus.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Minimum-image displacement on the unit torus, components in `[-1/2, 1/2)`.
#[inline]
pub fn torus_delta(x: [f64; 2], c: [f64; 2]) -> [f64; 2] {
    let w = |d: f64| d - (d + 0.5).floor();
    [w(x[0] - c[0]), w(x[1] - c[1])]
}

/// Rectangle with long side of slope `slope` (direction `(1, slope)`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: [f64; 2],
    pub l: f64,
    pub w: f64,
    pub slope: f64,
}

impl Rect {
    pub fn new(center: [f64; 2], l: f64, w: f64, slope: f64) -> Result<Self> {
        if !(w > 0.0 && w <= l && l < 1.0) || !slope.is_finite() || slope.abs() > 2.0 {
            return invalid(format!("bad rectangle l={l} w={w} slope={slope}"));
        }
        Ok(Rect { center, l, w, slope })
    }

    /// Unit vectors along the long and short sides.
    pub fn frame(&self) -> ([f64; 2], [f64; 2]) {
        let c = (1.0 + self.slope * self.slope).sqrt();
        ([1.0 / c, self.slope / c], [-self.slope / c, 1.0 / c])
    }

    pub fn area(&self) -> f64 {
        self.l * self.w
    }

    /// Coordinates of `x` (nearest periodic copy) in the rectangle frame.
    pub fn local(&self, x: [f64; 2]) -> [f64; 2] {
        let d = torus_delta(x, self.center);
        let (el, es) = self.frame();
        [d[0] * el[0] + d[1] * el[1], d[0] * es[0] + d[1] * es[1]]
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let p = self.local(x);
        p[0].abs() <= 0.5 * self.l && p[1].abs() <= 0.5 * self.w
    }

    /// Corners in the plane (not reduced mod 1).
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (el, es) = self.frame();
        let mut out = [[0.0; 2]; 4];
        for (i, (a, b)) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)].iter().enumerate() {
            for d in 0..2 {
                out[i][d] = self.center[d] + 0.5 * (a * self.l * el[d] + b * self.w * es[d]);
            }
        }
        out
    }

    /// Slope uncertainty interval: width `w/l` centred at the slope.
    pub fn ex(&self) -> (f64, f64) {
        let h = 0.5 * self.w / self.l;
        (self.slope - h, self.slope + h)
    }

    pub fn dilate(&self, c: f64) -> Rect {
        Rect { l: self.l * c, w: self.w * c, ..*self }
    }
}

/// `R1` and `R2` are comparable if `R1 ⊂ C R2` (tested on corners) and
/// `EX(R2) ⊂ EX(R1)`.
pub fn comparable(r1: &Rect, r2: &Rect, c: f64) -> Result<bool> {
    if !(c >= 1.0) {
        return invalid(format!("comparability constant {c} < 1"));
    }
    let big = r2.dilate(c);
    let tol = 1e-12;
    let inside = r1.corners().iter().all(|&p| {
        let q = big.local(p);
        q[0].abs() <= 0.5 * big.l + tol && q[1].abs() <= 0.5 * big.w + tol
    });
    let (a1, b1) = r1.ex();
    let (a2, b2) = r2.ex();
    Ok(inside && a1 <= a2 + tol && b2 <= b1 + tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn containment_and_ex() {
        let r = Rect::new([0.5, 0.5], 0.2, 0.05, 0.5).unwrap();
        assert!(r.contains([0.5, 0.5]));
        assert!(r.contains([0.55, 0.525]));
        assert!(!r.contains([0.5, 0.6]));
        let (a, b) = r.ex();
        assert!((b - a - 0.25).abs() < 1e-15);
        // wraps across the seam
        let s = Rect::new([0.99, 0.0], 0.1, 0.02, 0.0).unwrap();
        assert!(s.contains([0.02, 0.999]));
    }

    #[test]
    fn comparability_cases() {
        let r = Rect::new([0.3, 0.3], 0.1, 0.01, 0.2).unwrap();
        assert!(comparable(&r, &r, 1.0).unwrap());
        let far = Rect::new([0.8, 0.8], 0.1, 0.01, 0.2).unwrap();
        assert!(!comparable(&r, &far, 2.0).unwrap());
        // small rect inside a big one: geometric containment holds, but the
        // big rect has the narrower EX only one way round
        let big = Rect::new([0.3, 0.3], 0.4, 0.02, 0.2).unwrap();
        assert!(comparable(&r, &big, 1.0).unwrap());
        assert!(!comparable(&big, &r, 10.0).unwrap());
        assert!(comparable(&r, &r, 0.5).is_err());
    }
}
