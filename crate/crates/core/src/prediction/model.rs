use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

use crate::diffcore::{DiffError, ParamStore, Tape, Var};
use crate::layers::{LinearLayer, SincLayer};
use crate::modelio::ModelFile;
use crate::trace::{FeatureMatrix, TraceSequence};

use super::{PredictError, Variant};

pub const PREDICTOR_KIND: &str = "predictor";

#[derive(Clone, Debug)]
pub struct PredictorModel {
    pub variant: Variant,
    pub store: ParamStore,
    /// One cutoff shared by every feature column.
    pub input_sinc: Option<SincLayer>,
    pub head: LinearLayer,
    pub output_sinc: Option<SincLayer>,
    pub sample_rate: f64,
}

impl PredictorModel {
    /// Zero head, so the first update follows the target's covariance with
    /// the features; Sinc cutoffs start at `fs / 1000`.
    pub fn new(variant: Variant, feature_dims: usize, sample_rate: f64, rng: &mut impl Rng) -> Result<Self, PredictError> {
        Self::with_span(variant, feature_dims, sample_rate, SincLayer::DEFAULT_SPAN_S, rng)
    }

    pub fn with_span(
        variant: Variant,
        feature_dims: usize,
        sample_rate: f64,
        span_s: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, PredictError> {
        if feature_dims == 0 {
            return Err(PredictError::Config("need at least one feature".into()));
        }
        let mut store = ParamStore::new();
        let head = LinearLayer::new(&mut store, "head", feature_dims, 1, rng)?;
        store.get_mut(head.weight).values_mut().fill(0.0);
        let (input_sinc, output_sinc) = match variant {
            Variant::Lt => (None, None),
            Variant::Slts => (
                Some(SincLayer::new(&mut store, "sinc_feature", sample_rate, span_s)?),
                Some(SincLayer::new(&mut store, "sinc_prediction", sample_rate, span_s)?),
            ),
        };
        Ok(PredictorModel {
            variant,
            store,
            input_sinc,
            head,
            output_sinc,
            sample_rate,
        })
    }

    pub fn feature_dims(&self) -> usize {
        self.head.in_dim
    }

    pub fn fc_feature(&self) -> Option<f64> {
        self.input_sinc.as_ref().map(|s| s.cutoff(&self.store))
    }

    pub fn fc_prediction(&self) -> Option<f64> {
        self.output_sinc.as_ref().map(|s| s.cutoff(&self.store))
    }

    /// Records the prediction `[t]`.
    ///
    /// The input Sinc layer filters every column with the same kernel, and
    /// filtering commutes with the head's projection, so the features are
    /// projected first and the single projected channel is filtered.
    pub fn forward(&self, tape: &mut Tape, features: &FeatureMatrix) -> Result<Var, PredictError> {
        if features.dims() != self.feature_dims() {
            return Err(PredictError::Input(format!(
                "model expects {} feature dimensions, got {}",
                self.feature_dims(),
                features.dims()
            )));
        }
        let t = features.frames();
        let x = tape.constant(&[t, features.dims()], features.data().to_vec())?;
        let pre = match &self.input_sinc {
            None => self.head.forward(tape, &self.store, x)?,
            Some(sinc) => {
                let w = tape.param(&self.store, self.head.weight);
                let b = tape.param(&self.store, self.head.bias);
                let proj = tape.matmul(x, w)?;
                let proj = tape.reshape(proj, &[t])?;
                let smooth = sinc.forward(tape, &self.store, proj)?;
                let smooth = tape.reshape(smooth, &[t, 1])?;
                tape.add_row(smooth, b)?
            }
        };
        let pre = tape.reshape(pre, &[t])?;
        let y = tape.tanh(pre);
        Ok(match &self.output_sinc {
            None => y,
            Some(sinc) => sinc.forward(tape, &self.store, y)?,
        })
    }

    pub fn predict(&self, features: &FeatureMatrix) -> Result<TraceSequence, PredictError> {
        let mut tape = Tape::new();
        let y = self.forward(&mut tape, features)?;
        TraceSequence::new(tape.value(y).to_vec(), features.frame_rate).map_err(|e| PredictError::Input(e.to_string()))
    }

    pub fn to_file(&self) -> ModelFile {
        let mut meta = BTreeMap::new();
        meta.insert("variant".to_string(), self.variant.to_string());
        meta.insert("sample_rate".to_string(), self.sample_rate.to_string());
        if let Some(s) = &self.input_sinc {
            meta.insert("span_s".to_string(), s.span_s.to_string());
        }
        ModelFile {
            kind: PREDICTOR_KIND.to_string(),
            meta,
            params: self.store.clone(),
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self, PredictError> {
        file.expect_kind(PREDICTOR_KIND)?;
        let variant: Variant = file
            .meta
            .get("variant")
            .ok_or_else(|| PredictError::Input("model file lacks a variant".into()))?
            .parse()?;
        let sample_rate: f64 = file.meta_parse("sample_rate")?;
        let store = file.params.clone();
        let head = LinearLayer::from_store(&store, "head")?;
        if head.out_dim != 1 {
            return Err(DiffError::InvalidArgument("predictor head must have one output".into()).into());
        }
        let (input_sinc, output_sinc) = match variant {
            Variant::Lt => (None, None),
            Variant::Slts => {
                let span: f64 = file.meta_parse("span_s")?;
                (
                    Some(SincLayer::from_store(&store, "sinc_feature", sample_rate, span)?),
                    Some(SincLayer::from_store(&store, "sinc_prediction", sample_rate, span)?),
                )
            }
        };
        Ok(PredictorModel {
            variant,
            store,
            input_sinc,
            head,
            output_sinc,
            sample_rate,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), PredictError> {
        Ok(self.to_file().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, PredictError> {
        Self::from_file(ModelFile::load(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::sinc_kernel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rustfft::num_complex::Complex;
    use rustfft::FftPlanner;

    fn features(t: usize, d: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..t * d)
            .map(|i| rng.gen_range(-1.5..1.5) + ((i / d) as f64 * 0.05 * (1 + i % d) as f64).sin())
            .collect();
        FeatureMatrix::new(data, d, 100.0).unwrap()
    }

    fn set_cutoff(model: &mut PredictorModel, fc_in: f64, fc_out: f64) {
        for (sinc, fc) in [(model.input_sinc.clone().unwrap(), fc_in), (model.output_sinc.clone().unwrap(), fc_out)] {
            let p = fc / (sinc.fs / 2.0);
            model.store.get_mut(sinc.raw_cutoff).values_mut()[0] = (p / (1.0 - p)).ln();
        }
    }

    fn randomize_head(model: &mut PredictorModel, rng: &mut impl Rng) {
        let w = model.head.weight;
        model.store.get_mut(w).values_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }

    #[test]
    fn zero_lt_predicts_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = PredictorModel::new(Variant::Lt, 4, 100.0, &mut rng).unwrap();
        assert!(m.predict(&features(50, 4, 1)).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lt_is_bounded_and_length_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = PredictorModel::new(Variant::Lt, 3, 100.0, &mut rng).unwrap();
        let w = m.head.weight;
        m.store.get_mut(w).values_mut().copy_from_slice(&[1.0, -1.5, 1.0]);
        let p = m.predict(&features(400, 3, 3)).unwrap();
        assert_eq!(p.len(), 400);
        assert!(p.values.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn slts_starts_at_one_thousandth_of_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = PredictorModel::new(Variant::Slts, 2, 100.0, &mut rng).unwrap();
        assert!((m.fc_feature().unwrap() - 0.1).abs() < 1e-12);
        assert!((m.fc_prediction().unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(PredictorModel::new(Variant::Lt, 2, 100.0, &mut rng).unwrap().fc_feature(), None);
    }

    #[test]
    fn projection_first_equals_filtering_every_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = PredictorModel::with_span(Variant::Slts, 5, 100.0, 4.0, &mut rng).unwrap();
        set_cutoff(&mut m, 3.0, 7.0);
        randomize_head(&mut m, &mut rng);
        let b = m.head.bias;
        m.store.get_mut(b).values_mut()[0] = 0.3;
        let f = features(700, 5, 6);
        let fast = m.predict(&f).unwrap();

        let mut tape = Tape::new();
        let x = tape.constant(&[700, 5], f.data().to_vec()).unwrap();
        let sinc_in = m.input_sinc.as_ref().unwrap();
        let filtered = sinc_in.forward_columns(&mut tape, &m.store, x).unwrap();
        let pre = m.head.forward(&mut tape, &m.store, filtered).unwrap();
        let pre = tape.reshape(pre, &[700]).unwrap();
        let y = tape.tanh(pre);
        let out = m.output_sinc.as_ref().unwrap().forward(&mut tape, &m.store, y).unwrap();
        for (a, b) in fast.values.iter().zip(tape.value(out)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn slts_output_bounded_by_kernel_l1() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut m = PredictorModel::new(Variant::Slts, 3, 100.0, &mut rng).unwrap();
        set_cutoff(&mut m, 5.0, 2.0);
        let w = m.head.weight;
        m.store.get_mut(w).values_mut().copy_from_slice(&[20.0, -20.0, 20.0]);
        let l1: f64 = sinc_kernel(2.0, 100.0, 20.0).iter().map(|k| k.abs()).sum();
        let p = m.predict(&features(3000, 3, 8)).unwrap();
        assert!(p.values.iter().all(|v| v.abs() <= l1));
    }

    #[test]
    fn low_output_cutoff_leaves_little_energy_above_twice_cutoff() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = PredictorModel::new(Variant::Slts, 4, 100.0, &mut rng).unwrap();
        set_cutoff(&mut m, 10.0, 0.1);
        randomize_head(&mut m, &mut rng);
        let f = features(6000, 4, 10);
        let p = m.predict(&f).unwrap().values;
        // interior: drop half a kernel span at each end
        let interior: Vec<f64> = p[1000..5000].to_vec();
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        let n = interior.len();
        let hann = |i: usize| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
        let mut buf: Vec<Complex<f64>> = interior.iter().enumerate().map(|(i, v)| Complex::new((v - mean) * hann(i), 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let (mut high, mut total) = (0.0, 0.0);
        for (k, c) in buf.iter().enumerate().take(n / 2 + 1) {
            let freq = k as f64 * 100.0 / n as f64;
            total += c.norm_sqr();
            if freq > 0.2 {
                high += c.norm_sqr();
            }
        }
        assert!(high / total < 0.05, "ratio {}", high / total);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = PredictorModel::new(Variant::Lt, 3, 100.0, &mut rng).unwrap();
        assert!(matches!(m.predict(&features(10, 4, 1)), Err(PredictError::Input(_))));
    }

    #[test]
    fn save_load_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut m = PredictorModel::with_span(Variant::Slts, 3, 100.0, 2.0, &mut rng).unwrap();
        set_cutoff(&mut m, 1.5, 0.7);
        randomize_head(&mut m, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        m.save(&path).unwrap();
        let back = PredictorModel::load(&path).unwrap();
        assert_eq!(back.variant, Variant::Slts);
        let f = features(300, 3, 13);
        assert_eq!(back.predict(&f).unwrap(), m.predict(&f).unwrap());
    }
}
