//! Thin wrappers over rustfft: cached plans, row-batched 1-D transforms and
//! square 2-D transforms. All transforms here are unnormalized.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::C64;

type Plan = Arc<dyn Fft<f64>>;

fn plans() -> &'static Mutex<HashMap<(usize, bool), Plan>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Plan>>> = OnceLock::new();
    PLANS.get_or_init(|| Mutex::new(HashMap::new()))
}

pub fn plan(len: usize, inverse: bool) -> Plan {
    let mut map = plans().lock().unwrap();
    map.entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// Transform every contiguous row of length `len` in `data`.
pub fn rows(data: &mut [C64], len: usize, inverse: bool) {
    let p = plan(len, inverse);
    // batches keep scratch allocation off the per-row path
    let batch = (4096 / len).max(1) * len;
    data.par_chunks_mut(batch).for_each(|chunk| {
        let mut scratch = vec![C64::default(); p.get_inplace_scratch_len()];
        p.process_with_scratch(chunk, &mut scratch);
    });
}

pub fn transpose(data: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::default(); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = data[i * n + j];
        }
    });
    out
}

/// In-place unnormalized 2-D transform of an `n x n` row-major array.
pub fn fft2(data: &mut Vec<C64>, n: usize, inverse: bool) {
    rows(data, n, inverse);
    let mut t = transpose(data, n);
    rows(&mut t, n, inverse);
    *data = transpose(&t, n);
}

/// Signed frequency of FFT bin `k` for length `n`, in `[-n/2, n/2)`.
#[inline]
pub fn freq(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// FFT bin of signed frequency `xi` for length `n`.
#[inline]
pub fn bin(xi: i64, n: usize) -> usize {
    xi.rem_euclid(n as i64) as usize
}
