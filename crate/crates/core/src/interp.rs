//! Local Lagrange interpolation on uniform periodic grids.

/// Weights of the `order`-point Lagrange stencil for a point at fractional
/// offset `frac` in `[0,1)` from node 0. The stencil covers nodes
/// `-(order/2-1) ..= order/2`, so `w[j]` belongs to node `j - (order/2 - 1)`.
pub fn lagrange_weights(frac: f64, order: usize, w: &mut [f64]) {
    debug_assert!(order >= 2 && order % 2 == 0 && w.len() >= order);
    let off = (order / 2 - 1) as f64;
    if frac == 0.0 {
        w[..order].fill(0.0);
        w[order / 2 - 1] = 1.0;
        return;
    }
    // product form: w_j = prod_{m != j} (frac - x_m) / (x_j - x_m), where
    // the denominator is (-1)^(order-1-j) j! (order-1-j)!
    let mut full = 1.0;
    for m in 0..order {
        full *= frac - (m as f64 - off);
    }
    let mut fact = [1.0; 17];
    for i in 1..order {
        fact[i] = fact[i - 1] * i as f64;
    }
    for j in 0..order {
        let sign = if (order - 1 - j) % 2 == 0 { 1.0 } else { -1.0 };
        let denom = sign * fact[j] * fact[order - 1 - j];
        w[j] = full / ((frac - (j as f64 - off)) * denom);
    }
}

/// Splits a coordinate measured in grid cells into the first stencil index
/// (possibly negative, unwrapped) and the stencil weights.
#[inline]
pub fn stencil(pos: f64, order: usize, w: &mut [f64]) -> i64 {
    let base = pos.floor();
    lagrange_weights(pos - base, order, w);
    base as i64 - (order as i64 / 2 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_polynomials_up_to_degree() {
        let mut w = [0.0; 8];
        for &frac in &[0.1, 0.37, 0.5, 0.93] {
            lagrange_weights(frac, 8, &mut w);
            for deg in 0..8 {
                let s: f64 = (0..8)
                    .map(|j| w[j] * ((j as f64 - 3.0).powi(deg)))
                    .sum();
                assert!((s - frac.powi(deg)).abs() < 1e-9, "deg {deg} frac {frac}");
            }
        }
    }

    #[test]
    fn node_is_exact() {
        let mut w = [0.0; 10];
        let base = stencil(7.0, 10, &mut w);
        assert_eq!(base, 3);
        assert_eq!(w[4], 1.0);
        assert_eq!(w.iter().filter(|&&x| x != 0.0).count(), 1);
    }
}
