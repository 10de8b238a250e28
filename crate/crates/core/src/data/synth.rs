//! Seeded synthetic corpora with a known latent signal and known annotator
//! delays.
//!
//! The latent is Gaussian noise low-passed at `latent_bandwidth_hz` and scaled
//! to a peak magnitude of 1. Feature column 0 is the latent plus noise; the
//! other columns are fixed random affine copies of it plus noise. Annotator
//! `n` reports `clip(scale_n * latent(t - delay_n(t)) + offset_n + noise)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffcore::conv;
use crate::layers::sinc_kernel;
use crate::trace::{AnnotationSet, FeatureMatrix};

use super::resample::interpolate_at;
use super::{DataError, GroundTruth, Partition, Recording};

/// Span of the low-pass kernel used to band-limit the latent.
const LATENT_KERNEL_SPAN_S: f64 = 20.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelaySegment {
    pub start_s: f64,
    pub delay_s: f64,
}

/// Reaction delay of one annotator, in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelayProfile {
    Constant(f64),
    /// Piecewise-constant delay; each segment holds from its start until the
    /// next one. Times before the first segment use the first delay.
    Piecewise(Vec<DelaySegment>),
}

impl DelayProfile {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            DelayProfile::Constant(d) => *d,
            DelayProfile::Piecewise(segs) => segs
                .iter()
                .take_while(|s| s.start_s <= t)
                .last()
                .or(segs.first())
                .map_or(0.0, |s| s.delay_s),
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            DelayProfile::Constant(d) => vec![*d],
            DelayProfile::Piecewise(segs) => segs.iter().map(|s| s.delay_s).collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values().into_iter().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_annotators: usize,
    pub duration_s: f64,
    pub sample_rate: f64,
    pub latent_bandwidth_hz: f64,
    pub delays: Vec<DelayProfile>,
    pub scales: Vec<f64>,
    pub offsets: Vec<f64>,
    pub noise_std: f64,
    pub n_features: usize,
    pub feature_noise_std: f64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    /// Largest delay the alignment lag grid can represent.
    pub max_lag_s: f64,
}

impl Default for SynthSpec {
    /// Five annotators with constant delays from 0.4 s to 1.2 s, annotation
    /// noise 0.1, 20/8/8 recordings of 60 s at 100 Hz.
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            n_annotators: 5,
            duration_s: 60.0,
            sample_rate: 100.0,
            latent_bandwidth_hz: 0.5,
            delays: [0.4, 0.6, 0.8, 1.0, 1.2].into_iter().map(DelayProfile::Constant).collect(),
            scales: vec![1.0, 0.8, 1.2, 0.9, 1.1],
            offsets: vec![0.0, 0.05, -0.05, 0.1, -0.1],
            noise_std: 0.1,
            n_features: 40,
            feature_noise_std: 0.5,
            n_train: 20,
            n_dev: 8,
            n_test: 8,
            max_lag_s: 10.0,
        }
    }
}

impl SynthSpec {
    /// Annotations equal the latent and features are noiseless affine copies
    /// of it, so the target is an exact linear function of the features.
    pub fn trivial() -> Self {
        SynthSpec {
            delays: vec![DelayProfile::Constant(0.0); 5],
            scales: vec![1.0; 5],
            offsets: vec![0.0; 5],
            noise_std: 0.0,
            feature_noise_std: 0.0,
            ..SynthSpec::default()
        }
    }

    /// No delays and no annotation noise, but the default feature noise.
    pub fn zero_delay_clean() -> Self {
        SynthSpec {
            feature_noise_std: SynthSpec::default().feature_noise_std,
            ..SynthSpec::trivial()
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::InvalidSpec(m));
        let n = self.n_annotators;
        if n == 0 {
            return bad("n_annotators must be positive".into());
        }
        for (name, len) in [("delays", self.delays.len()), ("scales", self.scales.len()), ("offsets", self.offsets.len())] {
            if len != n {
                return bad(format!("{name} has {len} entries for {n} annotators"));
            }
        }
        if !(self.duration_s > 0.0) || !(self.sample_rate > 0.0) || !(self.latent_bandwidth_hz > 0.0) {
            return bad("duration, sample rate and latent bandwidth must be positive".into());
        }
        if self.latent_bandwidth_hz > self.sample_rate / 2.0 {
            return bad(format!("latent bandwidth {} Hz exceeds Nyquist", self.latent_bandwidth_hz));
        }
        if !(self.noise_std >= 0.0) || !(self.feature_noise_std >= 0.0) {
            return bad("noise levels must be non-negative".into());
        }
        if self.n_features == 0 {
            return bad("n_features must be positive".into());
        }
        if self.n_train == 0 || self.n_dev == 0 {
            return bad("need at least one train and one dev recording".into());
        }
        for (i, d) in self.delays.iter().enumerate() {
            for v in d.values() {
                if !(v >= 0.0) {
                    return bad(format!("annotator {} has negative delay {v} s", i + 1));
                }
                if v > self.max_lag_s {
                    return bad(format!(
                        "annotator {} delay {v} s exceeds the {} s lag grid",
                        i + 1,
                        self.max_lag_s
                    ));
                }
            }
            if let DelayProfile::Piecewise(segs) = d {
                if segs.is_empty() {
                    return bad(format!("annotator {} has an empty delay profile", i + 1));
                }
            }
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        (self.duration_s * self.sample_rate).round() as usize
    }
}

/// Generates every recording of the corpus: train, then dev, then test.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Vec<Recording>, DataError> {
    spec.validate()?;
    let mut corpus_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gains: Vec<f64> = (1..spec.n_features).map(|_| corpus_rng.sample(StandardNormal)).collect();
    let biases: Vec<f64> = (1..spec.n_features).map(|_| 0.5 * corpus_rng.sample::<f64, _>(StandardNormal)).collect();

    let parts = [
        (Partition::Train, spec.n_train),
        (Partition::Dev, spec.n_dev),
        (Partition::Test, spec.n_test),
    ];
    let mut out = Vec::new();
    let mut stream = 0u64;
    for (partition, count) in parts {
        for i in 0..count {
            stream += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(stream);
            out.push(one_recording(spec, &gains, &biases, format!("{partition}_{i:02}"), partition, &mut rng)?);
        }
    }
    Ok(out)
}

fn one_recording(
    spec: &SynthSpec,
    gains: &[f64],
    biases: &[f64],
    id: String,
    partition: Partition,
    rng: &mut ChaCha8Rng,
) -> Result<Recording, DataError> {
    let fs = spec.sample_rate;
    let frames = spec.frames();
    let max_delay = spec.delays.iter().map(DelayProfile::max).fold(0.0, f64::max);
    let preroll = (max_delay * fs).ceil() as usize + 1;

    let kernel = sinc_kernel(spec.latent_bandwidth_hz, fs, LATENT_KERNEL_SPAN_S);
    let half = kernel.len() / 2;
    let noise: Vec<f64> = (0..preroll + frames + 2 * half).map(|_| rng.sample(StandardNormal)).collect();
    let filtered = conv::filter_same(&noise, &kernel);
    let mut latent_full = filtered[half..half + preroll + frames].to_vec();
    let peak = latent_full.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    latent_full.iter_mut().for_each(|v| *v /= peak);
    let latent = latent_full[preroll..].to_vec();
    let pre_s = preroll as f64 / fs;

    let d = spec.n_features;
    let mut feats = Vec::with_capacity(frames * d);
    for &l in &latent {
        feats.push(l + spec.feature_noise_std * rng.sample::<f64, _>(StandardNormal));
        for (g, b) in gains.iter().zip(biases) {
            feats.push(g * l + b + spec.feature_noise_std * rng.sample::<f64, _>(StandardNormal));
        }
    }

    let mut traces = Vec::with_capacity(spec.n_annotators);
    let mut delay_curves = Vec::with_capacity(spec.n_annotators);
    for n in 0..spec.n_annotators {
        let mut trace = Vec::with_capacity(frames);
        let mut curve = Vec::with_capacity(frames);
        for t in 0..frames {
            let time = t as f64 / fs;
            let delay = spec.delays[n].at(time);
            let source = interpolate_at(&latent_full, fs, time + pre_s - delay);
            let v = spec.scales[n] * source + spec.offsets[n] + spec.noise_std * rng.sample::<f64, _>(StandardNormal);
            trace.push(v.clamp(-1.0, 1.0));
            curve.push(delay);
        }
        traces.push(trace);
        delay_curves.push(curve);
    }

    Ok(Recording {
        id,
        partition,
        features: FeatureMatrix::new(feats, d, fs).expect("synthetic features are well formed"),
        annotations: AnnotationSet::new(traces, fs).expect("synthetic traces share one length"),
        truth: Some(GroundTruth {
            latent,
            delays: delay_curves,
        }),
    })
}
