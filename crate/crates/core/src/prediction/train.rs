use std::path::Path;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alignment::TrainConfig;
use crate::data::{Partition, Recording};
use crate::diffcore::{Adam, DiffError, Tape};
use crate::metrics::ccc;
use crate::trace::TraceSequence;

use super::{PredictError, PredictorModel, TargetGs, Variant};

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorEpoch {
    /// 0 is the untrained model.
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_ccc: f64,
    pub fc_feature: Option<f64>,
    pub fc_prediction: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainedPredictor {
    /// Parameters from the epoch with the highest development CCC.
    pub model: PredictorModel,
    pub history: Vec<PredictorEpoch>,
    pub best_epoch: usize,
    pub best_dev_ccc: f64,
    pub seed: u64,
}

/// One row of the comparison table, aggregated over seeded runs.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationRow {
    pub target_gs: TargetGs,
    pub variant: Variant,
    /// Test recording ids and their CCC averaged over runs.
    pub per_subject: Vec<(String, f64)>,
    /// Unweighted mean over test recordings of each run.
    pub run_means: Vec<f64>,
    pub mean_ccc: f64,
    /// Final cutoffs averaged over runs; SLTS only.
    pub fc_feature: Option<f64>,
    pub fc_prediction: Option<f64>,
}

impl EvaluationRow {
    pub fn std_ccc(&self) -> f64 {
        let n = self.run_means.len() as f64;
        let m = self.run_means.iter().sum::<f64>() / n;
        (self.run_means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
    }
}

/// All runs of one variant against one target, plus the aggregated row.
#[derive(Clone, Debug)]
pub struct VariantResult {
    pub row: EvaluationRow,
    pub runs: Vec<TrainedPredictor>,
}

fn tag(epoch: usize, id: &str) -> impl Fn(PredictError) -> PredictError + '_ {
    move |e| match e {
        PredictError::Diff(source @ DiffError::Degenerate(_)) => PredictError::Degenerate {
            epoch,
            recording: id.to_string(),
            source,
        },
        other => other,
    }
}

fn check_targets(recordings: &[Recording], targets: &[TraceSequence]) -> Result<(), PredictError> {
    if recordings.len() != targets.len() {
        return Err(PredictError::Input(format!(
            "{} recordings but {} targets",
            recordings.len(),
            targets.len()
        )));
    }
    for (r, t) in recordings.iter().zip(targets) {
        if r.features.frames() != t.len() {
            return Err(PredictError::Input(format!(
                "`{}`: {} feature frames but {} target samples",
                r.id,
                r.features.frames(),
                t.len()
            )));
        }
    }
    Ok(())
}

/// CCC of the prediction against the target for every recording in
/// `partition`.
pub fn evaluate(
    model: &PredictorModel,
    recordings: &[Recording],
    targets: &[TraceSequence],
    partition: Partition,
) -> Result<Vec<(String, f64)>, PredictError> {
    check_targets(recordings, targets)?;
    recordings
        .iter()
        .zip(targets)
        .filter(|(r, _)| r.partition == partition)
        .map(|(r, t)| {
            let p = model.predict(&r.features)?;
            Ok((r.id.clone(), ccc(&p.values, &t.values)?))
        })
        .collect()
}

fn mean_of(scores: &[(String, f64)]) -> f64 {
    scores.iter().map(|s| s.1).sum::<f64>() / scores.len() as f64
}

/// Minimizes `1 - CCC(prediction, target)` with one Adam step per training
/// recording and keeps the epoch with the best mean development CCC.
pub fn train_predictor(
    recordings: &[Recording],
    targets: &[TraceSequence],
    variant: Variant,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainedPredictor, PredictError> {
    config.validate().map_err(|e| PredictError::Config(e.to_string()))?;
    check_targets(recordings, targets)?;
    let train: Vec<usize> = (0..recordings.len()).filter(|&i| recordings[i].partition == Partition::Train).collect();
    if train.is_empty() {
        return Err(PredictError::MissingPartition("train"));
    }
    if !recordings.iter().any(|r| r.partition == Partition::Dev) {
        return Err(PredictError::MissingPartition("development"));
    }
    let first = &recordings[train[0]];
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order_rng = ChaCha8Rng::seed_from_u64(seed);
    order_rng.set_stream(1);
    let mut model = PredictorModel::new(variant, first.features.dims(), first.sample_rate(), &mut init_rng)?;
    let mut adam = Adam::new(config.learning_rate);

    let dev_ccc = |m: &PredictorModel, epoch: usize| -> Result<f64, PredictError> {
        let s = evaluate(m, recordings, targets, Partition::Dev).map_err(tag(epoch, "dev"))?;
        Ok(mean_of(&s))
    };
    let initial = dev_ccc(&model, 0)?;
    let initial_train = evaluate(&model, recordings, targets, Partition::Train).map_err(tag(0, "train"))?;
    let mut history = vec![PredictorEpoch {
        epoch: 0,
        train_loss: 1.0 - mean_of(&initial_train),
        dev_ccc: initial,
        fc_feature: model.fc_feature(),
        fc_prediction: model.fc_prediction(),
    }];
    let mut best = (0, initial, model.store.clone());
    let mut order = train.clone();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut order_rng);
        let mut total = 0.0;
        for &i in &order {
            let rec = &recordings[i];
            let mut tape = Tape::new();
            let pred = model.forward(&mut tape, &rec.features)?;
            let target = tape.constant(&[targets[i].len()], targets[i].values.clone())?;
            let c = tape.ccc(pred, target).map_err(|e| tag(epoch, &rec.id)(e.into()))?;
            let neg = tape.scale(c, -1.0);
            let loss = tape.offset(neg, 1.0);
            let value = tape.scalar(loss);
            let diverged = || PredictError::Diverged {
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
            total += value;
        }
        let dev = dev_ccc(&model, epoch)?;
        let stats = PredictorEpoch {
            epoch,
            train_loss: total / train.len() as f64,
            dev_ccc: dev,
            fc_feature: model.fc_feature(),
            fc_prediction: model.fc_prediction(),
        };
        debug!(
            "{variant} seed {seed} epoch {epoch}: train {:.5} dev ccc {dev:.5} fc {:?}/{:?}",
            stats.train_loss, stats.fc_feature, stats.fc_prediction
        );
        history.push(stats);
        if dev > best.1 {
            best = (epoch, dev, model.store.clone());
        } else if epoch - best.0 >= config.patience {
            break;
        }
    }
    info!("{variant} seed {seed}: best dev CCC {:.5} at epoch {}", best.1, best.0);
    model.store = best.2;
    model.store.zero_grad();
    Ok(TrainedPredictor {
        model,
        history,
        best_epoch: best.0,
        best_dev_ccc: best.1,
        seed,
    })
}

/// Trains `config.runs` seeded predictors and aggregates their test scores.
pub fn evaluate_variant(
    recordings: &[Recording],
    targets: &[TraceSequence],
    target_gs: TargetGs,
    variant: Variant,
    config: &TrainConfig,
) -> Result<VariantResult, PredictError> {
    let runs = (0..config.runs)
        .map(|r| train_predictor(recordings, targets, variant, config, config.run_seed(r)))
        .collect::<Result<Vec<_>, _>>()?;
    aggregate(recordings, targets, target_gs, variant, runs)
}

impl VariantResult {
    /// Aggregates already-trained runs; used when runs are trained
    /// elsewhere, e.g. in parallel.
    pub fn from_runs(
        recordings: &[Recording],
        targets: &[TraceSequence],
        target_gs: TargetGs,
        variant: Variant,
        runs: Vec<TrainedPredictor>,
    ) -> Result<Self, PredictError> {
        aggregate(recordings, targets, target_gs, variant, runs)
    }
}

fn aggregate(
    recordings: &[Recording],
    targets: &[TraceSequence],
    target_gs: TargetGs,
    variant: Variant,
    runs: Vec<TrainedPredictor>,
) -> Result<VariantResult, PredictError> {
    if runs.is_empty() {
        return Err(PredictError::Config("no runs to aggregate".into()));
    }
    let scores = runs
        .iter()
        .map(|r| evaluate(&r.model, recordings, targets, Partition::Test))
        .collect::<Result<Vec<_>, _>>()?;
    if scores[0].is_empty() {
        return Err(PredictError::MissingPartition("test"));
    }
    let n = runs.len() as f64;
    let per_subject: Vec<(String, f64)> = (0..scores[0].len())
        .map(|i| (scores[0][i].0.clone(), scores.iter().map(|s| s[i].1).sum::<f64>() / n))
        .collect();
    let run_means: Vec<f64> = scores.iter().map(|s| mean_of(s)).collect();
    let avg = |f: &dyn Fn(&TrainedPredictor) -> Option<f64>| -> Option<f64> {
        runs.iter().map(f).sum::<Option<f64>>().map(|s| s / n)
    };
    let row = EvaluationRow {
        target_gs,
        variant,
        mean_ccc: mean_of(&per_subject),
        per_subject,
        run_means,
        fc_feature: avg(&|r| r.model.fc_feature()),
        fc_prediction: avg(&|r| r.model.fc_prediction()),
    };
    Ok(VariantResult { row, runs })
}

/// The four rows {baseline, generated} x {LT, SLTS}, in that order.
pub fn compare_targets(
    recordings: &[Recording],
    baseline: &[TraceSequence],
    generated: &[TraceSequence],
    config: &TrainConfig,
) -> Result<Vec<EvaluationRow>, PredictError> {
    let mut rows = Vec::with_capacity(4);
    for (kind, targets) in [(TargetGs::Baseline, baseline), (TargetGs::Generated, generated)] {
        for variant in [Variant::Lt, Variant::Slts] {
            rows.push(evaluate_variant(recordings, targets, kind, variant, config)?.row);
        }
    }
    Ok(rows)
}

fn io_err(path: &Path) -> impl Fn(csv::Error) -> PredictError + '_ {
    move |e| PredictError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// `time_s,prediction,target`.
pub fn write_predictions_csv(path: &Path, prediction: &TraceSequence, target: &TraceSequence) -> Result<(), PredictError> {
    if prediction.len() != target.len() {
        return Err(PredictError::Input("prediction and target lengths differ".into()));
    }
    let mut w = csv::Writer::from_path(path).map_err(io_err(path))?;
    w.write_record(["time_s", "prediction", "target"]).map_err(io_err(path))?;
    for t in 0..prediction.len() {
        w.write_record([
            prediction.time_at(t).to_string(),
            prediction.values[t].to_string(),
            target.values[t].to_string(),
        ])
        .map_err(io_err(path))?;
    }
    w.flush().map_err(|e| PredictError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// One line per row: target, model, mean/std/min/max CCC over runs, run
/// count, and the learned cutoffs (empty for LT).
pub fn write_comparison_csv(path: &Path, rows: &[EvaluationRow]) -> Result<(), PredictError> {
    let mut w = csv::Writer::from_path(path).map_err(io_err(path))?;
    w.write_record([
        "target_gs",
        "model",
        "mean_ccc",
        "std_ccc",
        "min_ccc",
        "max_ccc",
        "runs",
        "fc_feature",
        "fc_prediction",
    ])
    .map_err(io_err(path))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let min = r.run_means.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = r.run_means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        w.write_record([
            r.target_gs.to_string(),
            r.variant.to_string(),
            r.mean_ccc.to_string(),
            r.std_ccc().to_string(),
            min.to_string(),
            max.to_string(),
            r.run_means.len().to_string(),
            opt(r.fc_feature),
            opt(r.fc_prediction),
        ])
        .map_err(io_err(path))?;
    }
    w.flush().map_err(|e| PredictError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}
