//! Linear convolution kernels shared by the tape's `conv1d_same` primitive
//! and by the plain (non-differentiable) filtering paths.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

// Below this many multiply-adds the direct loop beats FFT setup cost.
const DIRECT_LIMIT: usize = 1 << 16;

/// Full linear convolution, output length `a.len() + b.len() - 1`.
pub fn full_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().saturating_mul(b.len()) <= DIRECT_LIMIT {
        direct(a, b)
    } else {
        fft(a, b)
    }
}

fn direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

fn fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n_out = a.len() + b.len() - 1;
    let n = n_out.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut fa: Vec<Complex<f64>> = a.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fa.resize(n, Complex::new(0.0, 0.0));
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fb.resize(n, Complex::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..n_out].iter().map(|c| c.re * scale).collect()
}

/// Same-length filtering with zero padding of `(k - 1) / 2` on each side:
/// `out[t] = sum_j kernel[j] * signal[t + j - c]`, `c = (k - 1) / 2`.
///
/// The kernel length must be odd.
pub fn filter_same(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    debug_assert!(kernel.len() % 2 == 1);
    let c = (kernel.len() - 1) / 2;
    let rev: Vec<f64> = kernel.iter().rev().copied().collect();
    let full = full_convolve(signal, &rev);
    full[c..c + signal.len()].to_vec()
}

/// Gradients of [`filter_same`] with respect to signal and kernel.
pub fn filter_same_backward(signal: &[f64], kernel: &[f64], dout: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let t = signal.len();
    let k = kernel.len();
    let c = (k - 1) / 2;

    let full = full_convolve(dout, kernel);
    let dsignal = full[c..c + t].to_vec();

    let dout_rev: Vec<f64> = dout.iter().rev().copied().collect();
    let corr = full_convolve(signal, &dout_rev);
    // dk[j] = corr[j - c + t - 1] when that index exists.
    let mut dkernel = vec![0.0; k];
    for (j, d) in dkernel.iter_mut().enumerate() {
        let idx = j as isize - c as isize + t as isize - 1;
        if idx >= 0 && (idx as usize) < corr.len() {
            *d = corr[idx as usize];
        }
    }
    (dsignal, dkernel)
}
