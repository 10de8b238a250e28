use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

use crate::diffcore::{DiffError, ParamStore, Tape, Var};
use crate::layers::{BiGru, FusionWeights, LinearLayer};
use crate::modelio::ModelFile;
use crate::trace::{AnnotationSet, FeatureMatrix, TraceSequence};

use super::{AlignError, AlignerOutput};

pub const ALIGNER_KIND: &str = "aligner";

/// Corrector (shared BiGRU + linear head applied to each annotator), fusion
/// weights, and frame-wise predictor, with parameters in one store.
#[derive(Clone, Debug)]
pub struct AlignerModel {
    pub store: ParamStore,
    pub corrector: BiGru,
    pub head: LinearLayer,
    pub fusion: FusionWeights,
    pub predictor: LinearLayer,
    pub hidden_size: usize,
}

/// The two halves of the joint loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossTerms {
    /// `1 - mean_n CrossCCC(original_n, corrected_n)`.
    pub shape: f64,
    /// `1 - CCC(prediction, gs)`.
    pub sync: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.shape + self.sync
    }
}

impl AlignerModel {
    pub fn new(n_annotators: usize, feature_dims: usize, hidden_size: usize, rng: &mut impl Rng) -> Result<Self, AlignError> {
        if n_annotators == 0 || feature_dims == 0 {
            return Err(AlignError::Config("need at least one annotator and one feature".into()));
        }
        let mut store = ParamStore::new();
        let corrector = BiGru::new(&mut store, "corrector.gru", 1, hidden_size, rng)?;
        let head = LinearLayer::new(&mut store, "corrector.head", 2 * hidden_size, 1, rng)?;
        let fusion = FusionWeights::new(&mut store, "fusion", n_annotators)?;
        let predictor = LinearLayer::new(&mut store, "predictor", feature_dims, 1, rng)?;
        store.get_mut(predictor.weight).values_mut().fill(0.0);
        let mut model = AlignerModel {
            store,
            corrector,
            head,
            fusion,
            predictor,
            hidden_size,
        };
        model.fit_identity()?;
        Ok(model)
    }

    /// Rescales the head by the least-squares fit of a -1..1 ramp onto the
    /// untrained corrector's response to it, so training starts from an
    /// approximate identity map.
    fn fit_identity(&mut self) -> Result<(), AlignError> {
        const PROBE: usize = 64;
        let ramp: Vec<f64> = (0..PROBE).map(|i| -1.0 + 2.0 * i as f64 / (PROBE - 1) as f64).collect();
        let mut tape = Tape::new();
        let x = tape.constant(&[1, PROBE, 1], ramp.clone())?;
        let h = self.corrector.forward(&mut tape, &self.store, x)?;
        let y = self.head.forward(&mut tape, &self.store, h)?;
        let m = crate::metrics::pair_moments(tape.value(y), &ramp);
        if m.var_x <= 0.0 {
            return Ok(());
        }
        let gain = m.cov / m.var_x;
        let shift = m.mean_y - gain * m.mean_x;
        let bias0 = self.store.get(self.head.bias).values()[0];
        self.store.get_mut(self.head.weight).values_mut().iter_mut().for_each(|w| *w *= gain);
        self.store.get_mut(self.head.bias).values_mut()[0] = gain * bias0 + shift;
        Ok(())
    }

    pub fn n_annotators(&self) -> usize {
        self.fusion.count
    }

    pub fn feature_dims(&self) -> usize {
        self.predictor.in_dim
    }

    fn check_annotators(&self, annotations: &AnnotationSet) -> Result<(), AlignError> {
        if annotations.num_annotators() != self.n_annotators() {
            return Err(AlignError::AnnotatorCount {
                expected: self.n_annotators(),
                found: annotations.num_annotators(),
            });
        }
        Ok(())
    }

    /// Records `[n, t]` corrected traces. Each annotator goes through the
    /// shared corrector on its own; features never enter here.
    pub fn corrector_forward(&self, tape: &mut Tape, annotations: &AnnotationSet) -> Result<Var, AlignError> {
        let (n, t) = (annotations.num_annotators(), annotations.len());
        let flat: Vec<f64> = annotations.traces().iter().flatten().copied().collect();
        let x = tape.constant(&[n, t, 1], flat)?;
        let h = self.corrector.forward(tape, &self.store, x)?;
        let y = self.head.forward(tape, &self.store, h)?;
        Ok(tape.reshape(y, &[n, t])?)
    }

    /// Frame-wise prediction `[t]` from features `[t, d]`.
    pub fn predictor_forward(&self, tape: &mut Tape, features: &FeatureMatrix) -> Result<Var, AlignError> {
        if features.dims() != self.feature_dims() {
            return Err(AlignError::Input(format!(
                "model expects {} feature dimensions, got {}",
                self.feature_dims(),
                features.dims()
            )));
        }
        let x = tape.constant(&[features.frames(), features.dims()], features.data().to_vec())?;
        let y = self.predictor.forward(tape, &self.store, x)?;
        Ok(tape.reshape(y, &[features.frames()])?)
    }

    /// Records the joint loss and returns `(loss, gs, corrected)` handles.
    pub fn joint_loss(
        &self,
        tape: &mut Tape,
        annotations: &AnnotationSet,
        features: &FeatureMatrix,
        lags: &[usize],
    ) -> Result<(Var, LossTerms), AlignError> {
        self.check_annotators(annotations)?;
        if annotations.len() != features.frames() {
            return Err(AlignError::Input(format!(
                "annotations have {} frames but features have {}",
                annotations.len(),
                features.frames()
            )));
        }
        let (n, t) = (annotations.num_annotators(), annotations.len());
        let corrected = self.corrector_forward(tape, annotations)?;
        let mut shape_sum: Option<Var> = None;
        for a in 0..n {
            let orig = tape.constant(&[t], annotations.trace(a).to_vec())?;
            let row = tape.narrow(corrected, 0, a, 1)?;
            let row = tape.reshape(row, &[t])?;
            let c = tape.cross_ccc(orig, row, lags)?;
            shape_sum = Some(match shape_sum {
                Some(s) => tape.add(s, c)?,
                None => c,
            });
        }
        let mean_cross = tape.scale(shape_sum.expect("at least one annotator"), 1.0 / n as f64);
        let shape_term = tape.scale(mean_cross, -1.0);
        let shape_term = tape.offset(shape_term, 1.0);

        let gs = self.fusion.fuse(tape, &self.store, corrected)?;
        let pred = self.predictor_forward(tape, features)?;
        let c = tape.ccc(pred, gs)?;
        let sync_term = tape.scale(c, -1.0);
        let sync_term = tape.offset(sync_term, 1.0);
        let loss = tape.add(shape_term, sync_term)?;
        let terms = LossTerms {
            shape: tape.scalar(shape_term),
            sync: tape.scalar(sync_term),
        };
        Ok((loss, terms))
    }

    /// Evaluates the joint loss without keeping gradients.
    pub fn loss_terms(&self, annotations: &AnnotationSet, features: &FeatureMatrix, lags: &[usize]) -> Result<LossTerms, AlignError> {
        let mut tape = Tape::new();
        Ok(self.joint_loss(&mut tape, annotations, features, lags)?.1)
    }

    /// Corrected traces, plain values.
    pub fn correct(&self, annotations: &AnnotationSet) -> Result<Vec<Vec<f64>>, AlignError> {
        self.check_annotators(annotations)?;
        let mut tape = Tape::new();
        let c = self.corrector_forward(&mut tape, annotations)?;
        Ok(tape.value(c).chunks(annotations.len()).map(<[f64]>::to_vec).collect())
    }

    pub fn infer(&self, annotations: &AnnotationSet, features: &FeatureMatrix) -> Result<AlignerOutput, AlignError> {
        self.check_annotators(annotations)?;
        let rate = annotations.sample_rate();
        let mut tape = Tape::new();
        let c = self.corrector_forward(&mut tape, annotations)?;
        let gs = self.fusion.fuse(&mut tape, &self.store, c)?;
        let pred = self.predictor_forward(&mut tape, features)?;
        let seq = |v: &[f64]| TraceSequence::new(v.to_vec(), rate).map_err(|e| AlignError::Input(e.to_string()));
        Ok(AlignerOutput {
            corrected: tape.value(c).chunks(annotations.len()).map(<[f64]>::to_vec).collect(),
            gold_standard: seq(tape.value(gs))?,
            prediction: seq(tape.value(pred))?,
        })
    }

    pub fn to_file(&self) -> ModelFile {
        let mut meta = BTreeMap::new();
        meta.insert("hidden_size".to_string(), self.hidden_size.to_string());
        meta.insert("annotators".to_string(), self.n_annotators().to_string());
        meta.insert("feature_dims".to_string(), self.feature_dims().to_string());
        ModelFile {
            kind: ALIGNER_KIND.to_string(),
            meta,
            params: self.store.clone(),
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self, AlignError> {
        file.expect_kind(ALIGNER_KIND)?;
        let store = file.params;
        let corrector = BiGru::from_store(&store, "corrector.gru")?;
        let head = LinearLayer::from_store(&store, "corrector.head")?;
        let fusion = FusionWeights::from_store(&store, "fusion")?;
        let predictor = LinearLayer::from_store(&store, "predictor")?;
        if head.in_dim != 2 * corrector.hidden || head.out_dim != 1 || predictor.out_dim != 1 || corrector.input != 1 {
            return Err(DiffError::InvalidArgument("inconsistent aligner parameter shapes".into()).into());
        }
        Ok(AlignerModel {
            hidden_size: corrector.hidden,
            store,
            corrector,
            head,
            fusion,
            predictor,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), AlignError> {
        Ok(self.to_file().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, AlignError> {
        Self::from_file(ModelFile::load(path)?)
    }
}
