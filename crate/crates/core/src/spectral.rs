//! FFT plumbing on top of rustfft with a per-thread plan cache.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized forward DFT, X_k = sum_j x_j e^{-2 pi i jk/n}.
pub fn fft(buf: &mut [C64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// Inverse DFT including the 1/n factor.
pub fn ifft(buf: &mut [C64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
    let s = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= s;
    }
}

/// Signed mode number of wrap-around index `k` for length `n`.
/// The Nyquist slot k = n/2 maps to -n/2.
#[inline]
pub fn signed_mode(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Trigonometric interpolation of periodic samples onto a grid `factor` times finer.
/// The Nyquist coefficient is split evenly between +-n/2 so real data stays real.
pub fn refine(samples: &[C64], factor: usize) -> Vec<C64> {
    let n = samples.len();
    if factor == 1 {
        return samples.to_vec();
    }
    let mut spec = samples.to_vec();
    fft(&mut spec);
    let m = n * factor;
    let mut out = vec![C64::new(0.0, 0.0); m];
    let half = n / 2;
    out[..half].copy_from_slice(&spec[..half]);
    out[m - half + 1..].copy_from_slice(&spec[half + 1..]);
    out[half] = spec[half] * 0.5;
    out[m - half] = spec[half] * 0.5;
    ifft(&mut out);
    for v in out.iter_mut() {
        *v *= factor as f64;
    }
    out
}
