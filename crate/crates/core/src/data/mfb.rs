//! Log Mel-filterbank features: 25 ms Hamming frames every 10 ms, magnitude
//! spectrum, 40 triangular unit-peak filters evenly spaced on the mel scale
//! between 0 Hz and Nyquist, natural log with a floor of 1e-10.

use std::f64::consts::PI;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::trace::FeatureMatrix;

use super::DataError;

pub const N_FILTERS: usize = 40;
pub const WINDOW_S: f64 = 0.025;
pub const HOP_S: f64 = 0.010;
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Edge frequencies (Hz) of the filterbank: `N_FILTERS + 2` points.
fn mel_edges(rate: f64) -> Vec<f64> {
    let top = hz_to_mel(rate / 2.0);
    (0..N_FILTERS + 2)
        .map(|i| mel_to_hz(top * i as f64 / (N_FILTERS + 1) as f64))
        .collect()
}

/// Center frequency of each filter in Hz.
pub fn filter_centers(rate: f64) -> Vec<f64> {
    mel_edges(rate)[1..=N_FILTERS].to_vec()
}

/// Number of frames for `n_samples` at `rate`; depends only on length.
pub fn frame_count(n_samples: usize, rate: u32) -> usize {
    let (win, hop) = frame_geometry(rate);
    if n_samples < win {
        0
    } else {
        (n_samples - win) / hop + 1
    }
}

fn frame_geometry(rate: u32) -> (usize, usize) {
    let r = rate as f64;
    ((WINDOW_S * r).round() as usize, (HOP_S * r).round() as usize)
}

/// Triangular weights, `N_FILTERS x (nfft / 2 + 1)`.
fn filterbank(rate: f64, nfft: usize) -> Vec<Vec<f64>> {
    let edges = mel_edges(rate);
    let bins = nfft / 2 + 1;
    (0..N_FILTERS)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * rate / nfft as f64;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Extracts 40 log Mel-filterbank coefficients per 10 ms frame.
pub fn extract_mfb(samples: &[f64], rate: u32) -> Result<FeatureMatrix, DataError> {
    if rate < 8000 {
        return Err(DataError::Invalid(format!("audio rate {rate} Hz is below 8000 Hz")));
    }
    let (win, hop) = frame_geometry(rate);
    let frames = frame_count(samples.len(), rate);
    if frames == 0 {
        return Err(DataError::TooShort {
            what: "audio (shorter than one 25 ms window)",
            len: samples.len(),
        });
    }
    let nfft = win.next_power_of_two();
    let window: Vec<f64> = (0..win).map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (win - 1) as f64).cos()).collect();
    let bank = filterbank(rate as f64, nfft);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);

    let mut data = Vec::with_capacity(frames * N_FILTERS);
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    let mut mag = vec![0.0; nfft / 2 + 1];
    for f in 0..frames {
        let start = f * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < win {
                Complex::new(samples[start + i] * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        for (m, c) in mag.iter_mut().zip(&buf) {
            *m = c.norm();
        }
        for filt in &bank {
            let e: f64 = filt.iter().zip(&mag).map(|(w, m)| w * m).sum();
            data.push(e.max(LOG_FLOOR).ln());
        }
    }
    Ok(FeatureMatrix::new(data, N_FILTERS, 1.0 / HOP_S).expect("non-empty frames"))
}

/// Reads 16-bit PCM mono WAV, scaled to [-1, 1).
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32), DataError> {
    let mut reader = hound::WavReader::open(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(DataError::Invalid(format!(
            "{}: expected 16-bit PCM mono, got {} channel(s), {} bits",
            path.display(),
            spec.channels,
            spec.bits_per_sample
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| DataError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
    Ok((samples, spec.sample_rate))
}
