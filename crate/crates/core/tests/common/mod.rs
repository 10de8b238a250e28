//! Test-only oracles: central finite differences and brute-force metrics.
//! Nothing here calls into the implementation paths it is used to check,
//! except to evaluate the forward function being differentiated.
#![allow(dead_code)]

pub mod gradcheck;
pub mod oracle_suite;

use gsalign::diffcore::{DiffError, ParamStore, Tape, Var};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;

/// `||a - b|| / max(||a||, ||b||)`, with a floor so all-zero gradients compare
/// as equal.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

pub type Build<'a> = dyn Fn(&mut Tape, &[Var]) -> Result<Var, DiffError> + 'a;

/// Evaluates `sum(weights * build(inputs))` on a fresh tape.
fn eval(build: &Build, inputs: &[(Vec<usize>, Vec<f64>)], weights: &[f64]) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|(s, v)| tape.constant(s, v.clone()).unwrap()).collect();
    let out = build(&mut tape, &vars).unwrap();
    tape.value(out).iter().zip(weights).map(|(a, b)| a * b).sum()
}

/// Maximum relative error between analytic and central-difference gradients
/// over all inputs for one random instance.
pub fn check_inputs(build: &Build, inputs: &[(Vec<usize>, Vec<f64>)], rng: &mut impl Rng) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|(s, v)| tape.constant(s, v.clone()).unwrap()).collect();
    let out = build(&mut tape, &vars).unwrap();
    let n_out = tape.value(out).len();
    let weights: Vec<f64> = (0..n_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w = tape.constant(&[n_out], weights.clone()).unwrap();
    let flat = tape.reshape(out, &[n_out]).unwrap();
    let prod = tape.mul(flat, w).unwrap();
    let loss = tape.sum(prod);
    let grads = tape.gradients(loss).unwrap();

    let mut worst: f64 = 0.0;
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.wrt(*v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; inputs[i].1.len()]);
        let mut numeric = vec![0.0; analytic.len()];
        for (j, slot) in numeric.iter_mut().enumerate() {
            let mut plus = inputs.to_vec();
            plus[i].1[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[i].1[j] -= FD_STEP;
            *slot = (eval(build, &plus, &weights) - eval(build, &minus, &weights)) / (2.0 * FD_STEP);
        }
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    worst
}

/// Analytic gradient of `loss(store)` with respect to every parameter versus
/// central differences; returns the worst relative error.
pub fn check_params(store: &ParamStore, loss: &dyn Fn(&mut Tape, &ParamStore) -> Var) -> f64 {
    let mut work = store.clone();
    work.zero_grad();
    let mut tape = Tape::new();
    let l = loss(&mut tape, &work);
    tape.backward(l, &mut work).unwrap();

    let value = |s: &ParamStore| {
        let mut t = Tape::new();
        let l = loss(&mut t, s);
        t.scalar(l)
    };
    let mut worst: f64 = 0.0;
    for id in store.ids() {
        let analytic = work.get(id).grad().unwrap().to_vec();
        let mut numeric = vec![0.0; analytic.len()];
        for (j, slot) in numeric.iter_mut().enumerate() {
            let mut plus = store.clone();
            plus.get_mut(id).values_mut()[j] += FD_STEP;
            let mut minus = store.clone();
            minus.get_mut(id).values_mut()[j] -= FD_STEP;
            *slot = (value(&plus) - value(&minus)) / (2.0 * FD_STEP);
        }
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    worst
}

pub fn uniform_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Smooth random sequence (sum of a few random sinusoids plus noise).
pub fn smooth_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let comps: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| (rng.gen_range(0.005..0.05), rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.2..1.0)))
        .collect();
    (0..n)
        .map(|t| {
            comps.iter().map(|(f, p, a)| a * (t as f64 * f * std::f64::consts::TAU + p).sin()).sum::<f64>() * 0.3 + rng.gen_range(-0.05..0.05)
        })
        .collect()
}

// ---- brute-force metric oracles -------------------------------------------

pub fn oracle_mean(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v;
    }
    s / x.len() as f64
}

/// Sample-by-sample textbook Pearson with explicit sums of squares.
pub fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let mx = oracle_mean(x);
    let my = oracle_mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx).powi(2);
        syy += (y[i] - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// CCC written through rho and standard deviations as in its defining form.
pub fn oracle_ccc(x: &[f64], y: &[f64]) -> f64 {
    let mx = oracle_mean(x);
    let my = oracle_mean(y);
    let n = x.len() as f64;
    let sx = (x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n).sqrt();
    let rho = oracle_pearson(x, y);
    2.0 * rho * sx * sy / (sx * sx + sy * sy + (mx - my).powi(2))
}

/// Per-lag loop: build each shifted pair explicitly, then average.
pub fn oracle_cross_ccc(x: &[f64], y: &[f64], lags: &[usize]) -> f64 {
    let mut total = 0.0;
    for &k in lags {
        let xs: Vec<f64> = (k..x.len()).map(|i| x[i]).collect();
        let ys: Vec<f64> = (0..x.len() - k).map(|i| y[i]).collect();
        total += oracle_ccc(&xs, &ys);
    }
    total / lags.len() as f64
}

/// Pairwise standardized alpha via the general k-item formula with k = 2 on
/// z-scored traces: alpha = k/(k-1) * (1 - sum var_i / var_total).
pub fn oracle_pairwise_alpha(traces: &[Vec<f64>]) -> f64 {
    let z = |x: &[f64]| {
        let m = oracle_mean(x);
        let s = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
        x.iter().map(|v| (v - m) / s).collect::<Vec<f64>>()
    };
    let var = |x: &[f64]| {
        let m = oracle_mean(x);
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
    };
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..traces.len() {
        for j in i + 1..traces.len() {
            let a = z(&traces[i]);
            let b = z(&traces[j]);
            let sum: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
            total += 2.0 * (1.0 - (var(&a) + var(&b)) / var(&sum));
            count += 1;
        }
    }
    total / count as f64
}

/// atanh via its logarithmic closed form.
pub fn oracle_atanh(r: f64) -> f64 {
    0.5 * ((1.0 + r) / (1.0 - r)).ln()
}
