use log::warn;

use crate::trace::FeatureMatrix;

use super::{DataError, Partition, Recording};

const MIN_STD: f64 = 1e-8;

/// Per-column mean and standard deviation fitted on training frames.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on the concatenation of all frames of `mats`.
    pub fn fit(mats: &[&FeatureMatrix]) -> Result<Self, DataError> {
        let first = mats.first().ok_or(DataError::Invalid("no training recordings to standardize on".into()))?;
        let dims = first.dims();
        if let Some(m) = mats.iter().find(|m| m.dims() != dims) {
            return Err(DataError::Invalid(format!("feature width {} differs from {dims}", m.dims())));
        }
        let frames: usize = mats.iter().map(|m| m.frames()).sum();
        let n = frames as f64;
        let mut mean = vec![0.0; dims];
        for m in mats {
            for row in m.data().chunks(dims) {
                for (a, v) in mean.iter_mut().zip(row) {
                    *a += v;
                }
            }
        }
        mean.iter_mut().for_each(|v| *v /= n);
        let mut var = vec![0.0; dims];
        for m in mats {
            for row in m.data().chunks(dims) {
                for ((a, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                    *a += (v - mu) * (v - mu);
                }
            }
        }
        let std = var
            .iter()
            .enumerate()
            .map(|(d, v)| {
                let s = (v / n).sqrt();
                if s < MIN_STD {
                    warn!("feature column {d} has zero variance on the training partition; std clamped to {MIN_STD}");
                    MIN_STD
                } else {
                    s
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, m: &mut FeatureMatrix) {
        let dims = m.dims();
        for row in m.data_mut().chunks_mut(dims) {
            for ((v, mu), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - mu) / s;
            }
        }
    }
}

/// Fits on the training partition and standardizes every recording with
/// those statistics.
pub fn standardize(recordings: &mut [Recording]) -> Result<Standardizer, DataError> {
    let stats = {
        let train: Vec<&FeatureMatrix> = recordings
            .iter()
            .filter(|r| r.partition == Partition::Train)
            .map(|r| &r.features)
            .collect();
        Standardizer::fit(&train)?
    };
    for r in recordings.iter_mut() {
        stats.apply(&mut r.features);
    }
    Ok(stats)
}
