//! Metric oracle comparisons and Sinc frequency-response checks, shared by
//! the oracle tests and the acceptance run.

use std::f64::consts::PI;

use gsalign::diffcore::{ParamStore, Tape};
use gsalign::layers::SincLayer;
use gsalign::metrics::{ccc, cross_ccc, fisher_alpha_comparison, fisher_z, pairwise_cronbach_alpha, pearson, LagGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub const PAIRS: usize = 1000;
pub const METRIC_TOL: f64 = 1e-10;

/// Worst absolute discrepancy per metric over `PAIRS` random sequence pairs.
pub fn metric_discrepancies() -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let grid = LagGrid::new(0.1, 1.0, 100.0).unwrap();
    let lags = grid.lags_samples();
    let mut worst = [0.0f64; 6];
    for i in 0..PAIRS {
        let n = rng.gen_range(120..400);
        let (x, y) = if i % 2 == 0 {
            (uniform_vec(&mut rng, n, -1.0, 1.0), uniform_vec(&mut rng, n, -1.0, 1.0))
        } else {
            let x = smooth_vec(&mut rng, n);
            let y: Vec<f64> = x.iter().map(|v| 0.7 * v + rng.gen_range(-0.2..0.2)).collect();
            (x, y)
        };
        let upd = |w: &mut f64, a: f64, b: f64| *w = w.max((a - b).abs());
        upd(&mut worst[0], ccc(&x, &y).unwrap(), oracle_ccc(&x, &y));
        upd(&mut worst[1], pearson(&x, &y).unwrap(), oracle_pearson(&x, &y));
        upd(&mut worst[2], cross_ccc(&x, &y, &grid).unwrap(), oracle_cross_ccc(&x, &y, &lags));
        let z = uniform_vec(&mut rng, n, -1.0, 1.0);
        let traces = vec![x.clone(), y.clone(), z];
        upd(
            &mut worst[3],
            pairwise_cronbach_alpha(&traces).unwrap(),
            oracle_pairwise_alpha(&traces),
        );
        let r = pearson(&x, &y).unwrap();
        upd(&mut worst[4], fisher_z(r), oracle_atanh(r));

        // paired t statistic on z differences, by hand
        let k = rng.gen_range(3..12);
        let a = uniform_vec(&mut rng, k, -0.9, 0.9);
        let b = uniform_vec(&mut rng, k, -0.9, 0.9);
        let d: Vec<f64> = a.iter().zip(&b).map(|(p, q)| oracle_atanh(*q) - oracle_atanh(*p)).collect();
        let m = oracle_mean(&d);
        let s = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k as f64 - 1.0)).sqrt();
        let t = m / (s / (k as f64).sqrt());
        upd(&mut worst[5], fisher_alpha_comparison(&a, &b).unwrap().t, t);
    }
    vec![
        ("ccc", worst[0]),
        ("pearson", worst[1]),
        ("cross_ccc", worst[2]),
        ("pairwise_alpha", worst[3]),
        ("fisher_z", worst[4]),
        ("fisher_paired_t", worst[5]),
    ]
}

/// Hand-computed anchors: (name, got, expected, tolerance).
pub fn anchored_examples() -> Vec<(&'static str, f64, f64, f64)> {
    // a, b zero-mean, unit-variance and orthogonal, so y has r = 0.5 with a
    let a = [1.0, -1.0, 1.0, -1.0];
    let b = [1.0, 1.0, -1.0, -1.0];
    let y: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * p + 0.75f64.sqrt() * q).collect();
    vec![
        ("ccc", ccc(&[0., 1., 2.], &[1., 2., 3.]).unwrap(), 4.0 / 7.0, 1e-12),
        ("pearson", pearson(&[1., 2., 3., 4.], &[1., 3., 2., 4.]).unwrap(), 0.8, 1e-12),
        ("alpha", pairwise_cronbach_alpha(&[a.to_vec(), y]).unwrap(), 2.0 / 3.0, 1e-12),
        ("atanh", fisher_z(0.5), 0.5493, 1e-4),
    ]
}

pub const SINC_FS: f64 = 100.0;
pub const SINC_SPAN_S: f64 = 20.0;
pub const SINC_FC: f64 = 2.0;

/// Interior peak amplitude of the trainable Sinc layer's response to a 10 s
/// sine (or a constant when `freq == 0`), over the middle 5 s.
pub fn sinc_interior_gain(freq: f64) -> f64 {
    let mut store = ParamStore::new();
    let layer = SincLayer::with_cutoff(&mut store, "s", SINC_FS, SINC_SPAN_S, SINC_FC).unwrap();
    let n = (10.0 * SINC_FS) as usize;
    let x: Vec<f64> = (0..n)
        .map(|i| if freq == 0.0 { 1.0 } else { (2.0 * PI * freq * i as f64 / SINC_FS).sin() })
        .collect();
    let mut tape = Tape::new();
    let xv = tape.constant(&[n], x).unwrap();
    let y = layer.forward(&mut tape, &store, xv).unwrap();
    tape.value(y)[n / 4..3 * n / 4].iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Zero-frequency gain of the layer's kernel (sum of taps).
pub fn sinc_dc_gain() -> f64 {
    let mut store = ParamStore::new();
    let layer = SincLayer::with_cutoff(&mut store, "s", SINC_FS, SINC_SPAN_S, SINC_FC).unwrap();
    let mut tape = Tape::new();
    let k = layer.kernel(&mut tape, &store).unwrap();
    tape.value(k).iter().sum()
}
