use std::path::{Path, PathBuf};

use clap::Args;
use gsalign::data::{Partition, Recording};
use gsalign::prediction::{
    evaluate, train_predictor, write_comparison_csv, write_predictions_csv, TargetGs, TrainedPredictor, Variant, VariantResult,
};
use gsalign::TraceSequence;
use rayon::prelude::*;

use crate::config::{load_standardized, run_seeds, thread_pool, train_config};
use crate::failure::Failure;
use crate::manifest::{create_dir, RunManifest};
use crate::table::{opt, Columns, Table};
use crate::{Common, GsChoice, VariantArg};

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Corpus manifest, or a directory containing `manifest.tsv`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Prediction target.
    #[arg(long, value_enum)]
    pub gs: GsChoice,
    #[arg(long, value_enum)]
    pub variant: VariantArg,
    /// Directory of `{id}.csv` gold-standard exports from `align`; required
    /// for `--gs generated`.
    #[arg(long)]
    pub gs_dir: Option<PathBuf>,
}

/// Reads the `gs` column of every recording's export.
pub fn read_generated(dir: &Path, recs: &[Recording]) -> Result<Vec<TraceSequence>, Failure> {
    recs.iter()
        .map(|r| {
            let path = dir.join(format!("{}.csv", r.id));
            if !path.is_file() {
                return Err(Failure::missing_gs(format!("no gold standard for `{}` at {}", r.id, path.display())));
            }
            let cols = Columns::read(&path)?;
            let gs = cols
                .column("gs")
                .ok_or_else(|| Failure::invalid(format!("{}: no `gs` column", path.display())))?;
            if gs.len() != r.len() {
                return Err(Failure::invalid(format!(
                    "{}: {} gold-standard samples for a {}-frame recording",
                    path.display(),
                    gs.len(),
                    r.len()
                )));
            }
            TraceSequence::new(gs, r.sample_rate()).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
        })
        .collect()
}

fn write_history(path: &Path, run: &TrainedPredictor) -> Result<(), Failure> {
    let mut t = Table::new(&["epoch", "train_loss", "dev_ccc", "fc_feature", "fc_prediction"]);
    for h in &run.history {
        t.row(&[
            h.epoch.to_string(),
            h.train_loss.to_string(),
            h.dev_ccc.to_string(),
            opt(h.fc_feature),
            opt(h.fc_prediction),
        ]);
    }
    t.write(path)
}

pub fn run(common: &Common, args: &PredictArgs) -> Result<(), Failure> {
    let cfg = train_config(common)?;
    let seeds = run_seeds(&cfg);
    let (target_gs, variant) = (
        match args.gs {
            GsChoice::Baseline => TargetGs::Baseline,
            GsChoice::Generated => TargetGs::Generated,
        },
        match args.variant {
            VariantArg::Lt => Variant::Lt,
            VariantArg::Slts => Variant::Slts,
        },
    );
    let mut manifest = RunManifest::new(
        "predict",
        &serde_json::json!({ "train": cfg, "gs": target_gs.to_string(), "variant": variant.to_string() }),
        seeds.clone(),
    );
    manifest.input(&args.corpus);
    let recs = load_standardized(&args.corpus)?;
    let targets = match target_gs {
        TargetGs::Baseline => recs.iter().map(|r| r.annotations.mean_trace()).collect(),
        TargetGs::Generated => {
            let dir = args
                .gs_dir
                .as_ref()
                .ok_or_else(|| Failure::missing_gs("--gs generated needs --gs-dir with exported gold standards"))?;
            manifest.input(dir);
            read_generated(dir, &recs)?
        }
    };
    manifest.stage("load");

    let pool = thread_pool(common.jobs)?;
    let runs: Vec<TrainedPredictor> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| train_predictor(&recs, &targets, variant, &cfg, s))
            .collect::<Result<Vec<_>, _>>()
    })?;
    manifest.stage("train");

    let out = &common.out;
    create_dir(&out.join("models"))?;
    create_dir(&out.join("predictions"))?;
    let mut runs_table = Table::new(&["run", "seed", "best_epoch", "best_dev_ccc", "test_mean_ccc", "fc_feature", "fc_prediction"]);
    for (r, run) in runs.iter().enumerate() {
        let model_path = out.join("models").join(format!("predictor_run{r}.bin"));
        run.model.save(&model_path)?;
        manifest.output(model_path);
        let hist = out.join(format!("history_run{r}.csv"));
        write_history(&hist, run)?;
        manifest.output(hist);
        let scores = evaluate(&run.model, &recs, &targets, Partition::Test)?;
        let mean = scores.iter().map(|s| s.1).sum::<f64>() / scores.len().max(1) as f64;
        runs_table.row(&[
            r.to_string(),
            run.seed.to_string(),
            run.best_epoch.to_string(),
            run.best_dev_ccc.to_string(),
            mean.to_string(),
            opt(run.model.fc_feature()),
            opt(run.model.fc_prediction()),
        ]);
    }
    runs_table.write(&out.join("runs.csv"))?;
    manifest.output(out.join("runs.csv"));

    // exported traces come from the run with the best development CCC
    let best = (0..runs.len()).fold(0, |b, i| if runs[i].best_dev_ccc > runs[b].best_dev_ccc { i } else { b });
    for (r, t) in recs.iter().zip(&targets).filter(|(r, _)| r.partition == Partition::Test) {
        let p = out.join("predictions").join(format!("{}.csv", r.id));
        let pred = runs[best].model.predict(&r.features)?;
        write_predictions_csv(&p, &pred, t)?;
    }
    manifest.output(out.join("predictions"));

    let result = VariantResult::from_runs(&recs, &targets, target_gs, variant, runs)?;
    write_comparison_csv(&out.join("evaluation.csv"), std::slice::from_ref(&result.row))?;
    let mut subjects = Table::new(&["id", "ccc"]);
    for (id, c) in &result.row.per_subject {
        subjects.row(&[id.clone(), c.to_string()]);
    }
    subjects.write(&out.join("per_subject.csv"))?;
    manifest.output(out.join("evaluation.csv"));
    manifest.output(out.join("per_subject.csv"));
    manifest.stage("evaluate");
    manifest.write(out)?;
    log::info!("{target_gs} {variant}: mean test CCC {:.4}", result.row.mean_ccc);
    Ok(())
}
