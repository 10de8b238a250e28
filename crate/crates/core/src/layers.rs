//! Network building blocks. Each layer owns [`ParamId`]s into a caller's
//! [`ParamStore`] and records its forward pass on a [`Tape`].

use std::f64::consts::PI;

use log::warn;
use rand::Rng;

use crate::diffcore::{conv, DiffError, ParamId, ParamStore, Tape, Var};

fn uniform(rng: &mut impl Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
}

/// Frame-wise affine map `y[t] = x[t] W + b`, weight stored `[in, out]`.
#[derive(Clone, Debug)]
pub struct LinearLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl LinearLayer {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Result<Self, DiffError> {
        let weight = store.add(format!("{name}.weight"), &[in_dim, out_dim], uniform(rng, in_dim * out_dim, in_dim))?;
        let bias = store.add(format!("{name}.bias"), &[out_dim], vec![0.0; out_dim])?;
        Ok(LinearLayer {
            weight,
            bias,
            in_dim,
            out_dim,
        })
    }

    /// Binds to existing parameters named `{name}.weight` / `{name}.bias`.
    pub fn from_store(store: &ParamStore, name: &str) -> Result<Self, DiffError> {
        let weight = find(store, &format!("{name}.weight"))?;
        let bias = find(store, &format!("{name}.bias"))?;
        let shape = store.get(weight).shape();
        if shape.len() != 2 || store.get(bias).shape() != [shape[1]] {
            return Err(DiffError::ShapeMismatch {
                op: "linear",
                left: shape.to_vec(),
                right: store.get(bias).shape().to_vec(),
            });
        }
        Ok(LinearLayer {
            weight,
            bias,
            in_dim: shape[0],
            out_dim: shape[1],
        })
    }

    /// `x [.., in] -> [.., out]`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, DiffError> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(x, w)?;
        tape.add_row(xw, b)
    }
}

pub(crate) fn find(store: &ParamStore, name: &str) -> Result<ParamId, DiffError> {
    store
        .find(name)
        .ok_or_else(|| DiffError::InvalidArgument(format!("missing parameter `{name}`")))
}

/// Parameters of one GRU direction, gate columns ordered `[r | z | n]`.
#[derive(Clone, Debug)]
pub struct GruCell {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
}

impl GruCell {
    fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Result<Self, DiffError> {
        Ok(GruCell {
            w_x: store.add(format!("{name}.w_x"), &[input, 3 * hidden], uniform(rng, input * 3 * hidden, input))?,
            w_h: store.add(format!("{name}.w_h"), &[hidden, 3 * hidden], uniform(rng, hidden * 3 * hidden, hidden))?,
            bias: store.add(format!("{name}.bias"), &[3 * hidden], vec![0.0; 3 * hidden])?,
        })
    }

    fn from_store(store: &ParamStore, name: &str) -> Result<Self, DiffError> {
        Ok(GruCell {
            w_x: find(store, &format!("{name}.w_x"))?,
            w_h: find(store, &format!("{name}.w_h"))?,
            bias: find(store, &format!("{name}.bias"))?,
        })
    }

    fn scan(&self, tape: &mut Tape, store: &ParamStore, x: Var, reverse: bool) -> Result<Var, DiffError> {
        let wx = tape.param(store, self.w_x);
        let wh = tape.param(store, self.w_h);
        let b = tape.param(store, self.bias);
        tape.gru_scan(x, wx, wh, b, reverse)
    }
}

/// Bidirectional GRU; each step's output is `[forward | backward]` states.
#[derive(Clone, Debug)]
pub struct BiGru {
    pub forward_cell: GruCell,
    pub backward_cell: GruCell,
    pub input: usize,
    pub hidden: usize,
}

impl BiGru {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Result<Self, DiffError> {
        if hidden == 0 || input == 0 {
            return Err(DiffError::InvalidArgument("GRU sizes must be positive".into()));
        }
        Ok(BiGru {
            forward_cell: GruCell::new(store, &format!("{name}.fwd"), input, hidden, rng)?,
            backward_cell: GruCell::new(store, &format!("{name}.bwd"), input, hidden, rng)?,
            input,
            hidden,
        })
    }

    pub fn from_store(store: &ParamStore, name: &str) -> Result<Self, DiffError> {
        let forward_cell = GruCell::from_store(store, &format!("{name}.fwd"))?;
        let backward_cell = GruCell::from_store(store, &format!("{name}.bwd"))?;
        let shape = store.get(forward_cell.w_x).shape();
        Ok(BiGru {
            input: shape[0],
            hidden: shape[1] / 3,
            forward_cell,
            backward_cell,
        })
    }

    /// `x [batch, steps, input] -> [batch, steps, 2 * hidden]`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, DiffError> {
        let shape = tape.shape(x);
        if shape.len() != 3 || shape[2] != self.input {
            return Err(DiffError::ShapeMismatch {
                op: "bigru",
                left: shape.to_vec(),
                right: vec![0, 0, self.input],
            });
        }
        let f = self.forward_cell.scan(tape, store, x, false)?;
        let b = self.backward_cell.scan(tape, store, x, true)?;
        tape.concat(&[f, b], 2)
    }
}

/// Ideal low-pass taps at offsets `m = -span*fs/2 ..= span*fs/2`, time
/// `n = m / fs`: `sin(2 pi fc n) / (pi n fs)`, with the `n = 0` tap set to
/// its limit `2 fc / fs`.
///
/// `fc` outside `(0, fs/2]` is clamped with a warning.
pub fn sinc_kernel(fc: f64, fs: f64, span_s: f64) -> Vec<f64> {
    let fc = clamp_cutoff(fc, fs);
    let half = half_width(fs, span_s);
    (-(half as i64)..=half as i64)
        .map(|m| {
            if m == 0 {
                2.0 * fc / fs
            } else {
                let n = m as f64 / fs;
                (2.0 * PI * fc * n).sin() / (PI * n * fs)
            }
        })
        .collect()
}

fn half_width(fs: f64, span_s: f64) -> usize {
    (span_s * fs / 2.0).round() as usize
}

fn clamp_cutoff(fc: f64, fs: f64) -> f64 {
    let nyquist = fs / 2.0;
    if fc > 0.0 && fc <= nyquist {
        return fc;
    }
    let clamped = if fc.is_nan() || fc <= 0.0 { 1e-6 * nyquist } else { nyquist };
    warn!("cutoff {fc} Hz outside (0, {nyquist}] Hz; clamped to {clamped}");
    clamped
}

/// Non-differentiable same-length Sinc filtering of one signal.
pub fn sinc_filter(signal: &[f64], fc: f64, fs: f64, span_s: f64) -> Vec<f64> {
    conv::filter_same(signal, &sinc_kernel(fc, fs, span_s))
}

/// Convolution with a Sinc low-pass kernel whose cutoff is trainable.
///
/// The cutoff is stored as a raw logit: `fc = (fs / 2) * sigmoid(raw)`, which
/// keeps it inside `(0, fs/2)` whatever the optimizer does.
#[derive(Clone, Debug)]
pub struct SincLayer {
    pub raw_cutoff: ParamId,
    pub fs: f64,
    pub span_s: f64,
}

impl SincLayer {
    pub const DEFAULT_SPAN_S: f64 = 20.0;

    /// Cutoff initialised to `fs / 1000`.
    pub fn new(store: &mut ParamStore, name: &str, fs: f64, span_s: f64) -> Result<Self, DiffError> {
        Self::with_cutoff(store, name, fs, span_s, fs / 1000.0)
    }

    pub fn with_cutoff(store: &mut ParamStore, name: &str, fs: f64, span_s: f64, fc: f64) -> Result<Self, DiffError> {
        if !(fs > 0.0) || !(span_s > 0.0) {
            return Err(DiffError::InvalidArgument(format!("sinc layer needs fs > 0 and span > 0, got {fs}, {span_s}")));
        }
        let p = clamp_cutoff(fc, fs) / (fs / 2.0);
        let p = p.min(1.0 - 1e-12);
        let raw = (p / (1.0 - p)).ln();
        let raw_cutoff = store.add(format!("{name}.raw_cutoff"), &[1], vec![raw])?;
        Ok(SincLayer { raw_cutoff, fs, span_s })
    }

    pub fn from_store(store: &ParamStore, name: &str, fs: f64, span_s: f64) -> Result<Self, DiffError> {
        Ok(SincLayer {
            raw_cutoff: find(store, &format!("{name}.raw_cutoff"))?,
            fs,
            span_s,
        })
    }

    /// Current cutoff in Hz.
    pub fn cutoff(&self, store: &ParamStore) -> f64 {
        let raw = store.get(self.raw_cutoff).values()[0];
        self.fs / 2.0 * crate::diffcore::sigmoid(raw)
    }

    pub fn kernel_len(&self) -> usize {
        2 * half_width(self.fs, self.span_s) + 1
    }

    /// Records the kernel taps as a function of the trainable cutoff.
    pub fn kernel(&self, tape: &mut Tape, store: &ParamStore) -> Result<Var, DiffError> {
        let half = half_width(self.fs, self.span_s) as i64;
        let k = self.kernel_len();
        let raw = tape.param(store, self.raw_cutoff);
        let sig = tape.sigmoid(raw);
        let fc = tape.scale(sig, self.fs / 2.0);

        let mut phase = Vec::with_capacity(k);
        let mut inv = Vec::with_capacity(k);
        let mut center = Vec::with_capacity(k);
        for m in -half..=half {
            let n = m as f64 / self.fs;
            phase.push(2.0 * PI * n);
            inv.push(if m == 0 { 0.0 } else { 1.0 / (PI * n * self.fs) });
            center.push(if m == 0 { 2.0 / self.fs } else { 0.0 });
        }
        let phase = tape.constant(&[k], phase)?;
        let inv = tape.constant(&[k], inv)?;
        let center = tape.constant(&[k], center)?;

        let arg = tape.scale_by(phase, fc)?;
        let s = tape.sin(arg);
        let side = tape.mul(s, inv)?;
        let mid = tape.scale_by(center, fc)?;
        tape.add(side, mid)
    }

    /// Filters a single signal `[t]`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, DiffError> {
        let k = self.kernel(tape, store)?;
        tape.conv1d_same(x, k)
    }

    /// Filters every column of `x [t, c]` independently with one shared
    /// cutoff.
    pub fn forward_columns(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, DiffError> {
        let shape = tape.shape(x).to_vec();
        if shape.len() != 2 {
            return Err(DiffError::ShapeMismatch {
                op: "sinc_columns",
                left: shape,
                right: vec![0, 0],
            });
        }
        let (t, c) = (shape[0], shape[1]);
        let k = self.kernel(tape, store)?;
        let mut cols = Vec::with_capacity(c);
        for j in 0..c {
            let col = tape.narrow(x, 1, j, 1)?;
            let col = tape.reshape(col, &[t])?;
            let filtered = tape.conv1d_same(col, k)?;
            cols.push(tape.reshape(filtered, &[t, 1])?);
        }
        tape.concat(&cols, 1)
    }
}

/// Per-annotator logits; `softmax(logits)` weights the fused trace.
#[derive(Clone, Debug)]
pub struct FusionWeights {
    pub logits: ParamId,
    pub count: usize,
}

impl FusionWeights {
    /// Zero logits: uniform weights.
    pub fn new(store: &mut ParamStore, name: &str, count: usize) -> Result<Self, DiffError> {
        let logits = store.add(format!("{name}.logits"), &[count], vec![0.0; count])?;
        Ok(FusionWeights { logits, count })
    }

    pub fn from_store(store: &ParamStore, name: &str) -> Result<Self, DiffError> {
        let logits = find(store, &format!("{name}.logits"))?;
        Ok(FusionWeights {
            logits,
            count: store.get(logits).numel(),
        })
    }

    pub fn weights(&self, store: &ParamStore) -> Vec<f64> {
        softmax(store.get(self.logits).values())
    }

    /// `corrected [n, t] -> gs [t]`, `gs[t] = sum_n w[n] corrected[n][t]`.
    pub fn fuse(&self, tape: &mut Tape, store: &ParamStore, corrected: Var) -> Result<Var, DiffError> {
        let shape = tape.shape(corrected).to_vec();
        if shape.len() != 2 || shape[0] != self.count {
            return Err(DiffError::ShapeMismatch {
                op: "fuse",
                left: shape,
                right: vec![self.count, 0],
            });
        }
        let logits = tape.param(store, self.logits);
        let w = tape.softmax(logits);
        let w = tape.reshape(w, &[1, self.count])?;
        let gs = tape.matmul(w, corrected)?;
        tape.reshape(gs, &[shape[1]])
    }
}

/// Numerically stable softmax of a plain slice.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
