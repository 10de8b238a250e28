//! Time-series containers shared across the pipeline.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("sample rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("annotator {index} has {len} samples, expected {expected}")]
    Ragged { index: usize, len: usize, expected: usize },
    #[error("feature matrix has {len} values, not a multiple of {cols} columns")]
    BadMatrix { len: usize, cols: usize },
    #[error("empty {0}")]
    Empty(&'static str),
}

/// A uniformly sampled real-valued series.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSequence {
    pub values: Vec<f64>,
    pub sample_rate: f64,
}

impl TraceSequence {
    pub fn new(values: Vec<f64>, sample_rate: f64) -> Result<Self, TraceError> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(TraceError::BadRate(sample_rate));
        }
        Ok(TraceSequence { values, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.values.len() as f64 / self.sample_rate
    }

    /// Time stamp of sample `i` in seconds.
    pub fn time_at(&self, i: usize) -> f64 {
        i as f64 / self.sample_rate
    }
}

impl AsRef<[f64]> for TraceSequence {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// N annotator traces of equal length for one recording and one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationSet {
    traces: Vec<Vec<f64>>,
    sample_rate: f64,
}

impl AnnotationSet {
    pub fn new(traces: Vec<Vec<f64>>, sample_rate: f64) -> Result<Self, TraceError> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(TraceError::BadRate(sample_rate));
        }
        let first = traces.first().ok_or(TraceError::Empty("annotation set"))?;
        let expected = first.len();
        if expected == 0 {
            return Err(TraceError::Empty("annotation trace"));
        }
        for (index, t) in traces.iter().enumerate() {
            if t.len() != expected {
                return Err(TraceError::Ragged {
                    index,
                    len: t.len(),
                    expected,
                });
            }
        }
        Ok(AnnotationSet { traces, sample_rate })
    }

    pub fn num_annotators(&self) -> usize {
        self.traces.len()
    }

    pub fn len(&self) -> usize {
        self.traces[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn traces(&self) -> &[Vec<f64>] {
        &self.traces
    }

    pub fn trace(&self, n: usize) -> &[f64] {
        &self.traces[n]
    }

    /// Keeps the first `len` samples of every trace.
    pub fn truncate(&mut self, len: usize) {
        for t in &mut self.traces {
            t.truncate(len);
        }
    }

    /// Plain per-sample average over annotators: the baseline gold standard.
    pub fn mean_trace(&self) -> TraceSequence {
        let n = self.traces.len() as f64;
        let values = (0..self.len())
            .map(|t| self.traces.iter().map(|tr| tr[t]).sum::<f64>() / n)
            .collect();
        TraceSequence {
            values,
            sample_rate: self.sample_rate,
        }
    }
}

/// Row-major `frames x dims` matrix of acoustic descriptors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    dims: usize,
    pub frame_rate: f64,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, dims: usize, frame_rate: f64) -> Result<Self, TraceError> {
        if dims == 0 || data.is_empty() {
            return Err(TraceError::Empty("feature matrix"));
        }
        if !data.len().is_multiple_of(dims) {
            return Err(TraceError::BadMatrix { len: data.len(), cols: dims });
        }
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(TraceError::BadRate(frame_rate));
        }
        Ok(FeatureMatrix { data, dims, frame_rate })
    }

    pub fn frames(&self) -> usize {
        self.data.len() / self.dims
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dims..(t + 1) * self.dims]
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        self.data.iter().skip(d).step_by(self.dims).copied().collect()
    }

    pub fn truncate(&mut self, frames: usize) {
        self.data.truncate(frames * self.dims);
    }
}
