use std::path::Path;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Partition, Recording};
use crate::diffcore::{Adam, DiffError, Tape};
use crate::trace::{AnnotationSet, TraceSequence};

use super::{AlignError, AlignerModel, AlignerOutput, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    /// 0 is the untrained model.
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainedAligner {
    /// Parameters from the epoch with the lowest development loss.
    pub model: AlignerModel,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_dev_loss: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignedRecording {
    pub id: String,
    pub partition: Partition,
    pub output: AlignerOutput,
}

fn tag(epoch: usize, rec: &Recording) -> impl Fn(AlignError) -> AlignError + '_ {
    move |e| match e {
        AlignError::Diff(source @ DiffError::Degenerate(_)) => AlignError::Degenerate {
            epoch,
            recording: rec.id.clone(),
            source,
        },
        other => other,
    }
}

fn check_corpus(recordings: &[Recording]) -> Result<(usize, usize), AlignError> {
    let first = recordings.first().ok_or(AlignError::MissingPartition("train"))?;
    let n = first.annotations.num_annotators();
    let d = first.features.dims();
    for r in recordings {
        if r.annotations.num_annotators() != n {
            return Err(AlignError::AnnotatorCount {
                expected: n,
                found: r.annotations.num_annotators(),
            });
        }
        if r.features.dims() != d {
            return Err(AlignError::Input(format!("`{}` has {} feature dimensions, expected {d}", r.id, r.features.dims())));
        }
        if r.annotations.len() != r.features.frames() {
            return Err(AlignError::Input(format!("`{}`: annotations and features differ in length", r.id)));
        }
    }
    Ok((n, d))
}

fn mean_loss(model: &AlignerModel, recs: &[&Recording], lags: &[usize], epoch: usize) -> Result<f64, AlignError> {
    let mut total = 0.0;
    for r in recs {
        let l = model.loss_terms(&r.annotations, &r.features, lags).map_err(tag(epoch, r))?.total();
        if !l.is_finite() {
            return Err(AlignError::Diverged {
                epoch,
                recording: r.id.clone(),
                loss: l,
            });
        }
        total += l;
    }
    Ok(total / recs.len() as f64)
}

/// Trains one aligner with one Adam step per training recording, visiting
/// recordings in a seeded shuffled order, and stops once the development
/// loss has not improved for `config.patience` epochs.
pub fn train_aligner(recordings: &[Recording], config: &TrainConfig, seed: u64) -> Result<TrainedAligner, AlignError> {
    train_aligner_observed(recordings, config, seed, &mut |_, _| {})
}

/// [`train_aligner`] calling `observe` after every epoch, including the
/// untrained epoch 0.
pub fn train_aligner_observed(
    recordings: &[Recording],
    config: &TrainConfig,
    seed: u64,
    observe: &mut dyn FnMut(&EpochStats, &AlignerModel),
) -> Result<TrainedAligner, AlignError> {
    config.validate()?;
    let train: Vec<&Recording> = recordings.iter().filter(|r| r.partition == Partition::Train).collect();
    let dev: Vec<&Recording> = recordings.iter().filter(|r| r.partition == Partition::Dev).collect();
    if train.is_empty() {
        return Err(AlignError::MissingPartition("train"));
    }
    if dev.is_empty() {
        return Err(AlignError::MissingPartition("development"));
    }
    let (n, d) = check_corpus(recordings)?;
    let lags = config.lag_grid(train[0].sample_rate())?.lags_samples();

    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order_rng = ChaCha8Rng::seed_from_u64(seed);
    order_rng.set_stream(1);
    let mut model = AlignerModel::new(n, d, config.hidden_size, &mut init_rng)?;
    let mut adam = Adam::new(config.learning_rate);

    let initial = mean_loss(&model, &dev, &lags, 0)?;
    let mut history = vec![EpochStats {
        epoch: 0,
        train_loss: mean_loss(&model, &train, &lags, 0)?,
        dev_loss: initial,
    }];
    observe(&history[0], &model);
    let mut best = (0, initial, model.store.clone());
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut order_rng);
        let mut train_total = 0.0;
        for &i in &order {
            let rec = train[i];
            let mut tape = Tape::new();
            let (loss, terms) = model
                .joint_loss(&mut tape, &rec.annotations, &rec.features, &lags)
                .map_err(tag(epoch, rec))?;
            let value = terms.total();
            let diverged = || AlignError::Diverged {
                epoch,
                recording: rec.id.clone(),
                loss: value,
            };
            if !value.is_finite() {
                return Err(diverged());
            }
            tape.backward(loss, &mut model.store)?;
            adam.step(&mut model.store).map_err(|e| match e {
                DiffError::NonFiniteGradient { .. } => diverged(),
                other => other.into(),
            })?;
            train_total += value;
        }
        let dev_loss = mean_loss(&model, &dev, &lags, epoch)?;
        let stats = EpochStats {
            epoch,
            train_loss: train_total / train.len() as f64,
            dev_loss,
        };
        debug!("aligner seed {seed} epoch {epoch}: train {:.5} dev {:.5}", stats.train_loss, dev_loss);
        observe(&stats, &model);
        history.push(stats);
        if dev_loss < best.1 {
            best = (epoch, dev_loss, model.store.clone());
        } else if epoch - best.0 >= config.patience {
            break;
        }
    }
    info!(
        "aligner seed {seed}: best dev loss {:.5} at epoch {} of {}",
        best.1,
        best.0,
        history.len() - 1
    );
    model.store = best.2;
    model.store.zero_grad();
    Ok(TrainedAligner {
        model,
        history,
        best_epoch: best.0,
        best_dev_loss: best.1,
        seed,
    })
}

/// Corrector then fusion; features are not needed.
pub fn generate_gold_standard(model: &AlignerModel, annotations: &AnnotationSet) -> Result<TraceSequence, AlignError> {
    let corrected = model.correct(annotations)?;
    let w = model.fusion.weights(&model.store);
    let gs = (0..annotations.len())
        .map(|t| corrected.iter().zip(&w).map(|(c, w)| w * c[t]).sum())
        .collect();
    TraceSequence::new(gs, annotations.sample_rate()).map_err(|e| AlignError::Input(e.to_string()))
}

pub fn align_recordings(model: &AlignerModel, recordings: &[Recording]) -> Result<Vec<AlignedRecording>, AlignError> {
    recordings
        .iter()
        .map(|r| {
            Ok(AlignedRecording {
                id: r.id.clone(),
                partition: r.partition,
                output: model.infer(&r.annotations, &r.features)?,
            })
        })
        .collect()
}

/// `time_s,gs,corrected_1..N` at the gold standard's rate.
pub fn write_gs_csv(path: &Path, output: &AlignerOutput) -> Result<(), AlignError> {
    let io = |e: csv::Error| AlignError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["time_s".to_string(), "gs".to_string()];
    header.extend((1..=output.corrected.len()).map(|n| format!("corrected_{n}")));
    w.write_record(&header).map_err(io)?;
    let gs = &output.gold_standard;
    for t in 0..gs.len() {
        let mut row = vec![gs.time_at(t).to_string(), gs.values[t].to_string()];
        row.extend(output.corrected.iter().map(|c| c[t].to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| AlignError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}
