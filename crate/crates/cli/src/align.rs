use std::path::{Path, PathBuf};

use clap::Args;
use gsalign::alignment::{align_recordings, train_aligner, write_gs_csv, AlignedRecording, TrainedAligner};
use gsalign::data::{Partition, Recording};
use gsalign::metrics::{fisher_alpha_comparison, pairwise_cronbach_alpha, pearson};
use rayon::prelude::*;

use crate::config::{load_standardized, run_seeds, thread_pool, train_config};
use crate::failure::Failure;
use crate::manifest::{create_dir, RunManifest};
use crate::table::Table;
use crate::Common;

#[derive(Args, Debug)]
pub struct AlignArgs {
    /// Corpus manifest, or a directory containing `manifest.tsv`.
    #[arg(long)]
    pub corpus: PathBuf,
}

/// Recordings the agreement and correlation summaries are computed on: the
/// test partition, or everything if there is none.
fn report_set(recs: &[AlignedRecording]) -> Vec<usize> {
    let test: Vec<usize> = (0..recs.len()).filter(|&i| recs[i].partition == Partition::Test).collect();
    if test.is_empty() {
        (0..recs.len()).collect()
    } else {
        test
    }
}

/// The run with the lowest development loss; ties go to the earlier run.
pub fn select_run(runs: &[TrainedAligner]) -> usize {
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.best_dev_loss < runs[best].best_dev_loss {
            best = i;
        }
    }
    best
}

fn write_history(path: &Path, run: &TrainedAligner) -> Result<(), Failure> {
    let mut t = Table::new(&["epoch", "train_loss", "dev_loss"]);
    for h in &run.history {
        t.row(&[h.epoch.to_string(), h.train_loss.to_string(), h.dev_loss.to_string()]);
    }
    t.write(path)
}

pub fn run(common: &Common, args: &AlignArgs) -> Result<(), Failure> {
    let cfg = train_config(common)?;
    let seeds = run_seeds(&cfg);
    let mut manifest = RunManifest::new("align", &cfg, seeds.clone());
    manifest.input(&args.corpus);
    let recs = load_standardized(&args.corpus)?;
    manifest.stage("load");

    let pool = thread_pool(common.jobs)?;
    let runs: Vec<TrainedAligner> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| train_aligner(&recs, &cfg, s))
            .collect::<Result<Vec<_>, _>>()
    })?;
    manifest.stage("train");

    let out = &common.out;
    create_dir(&out.join("models"))?;
    create_dir(&out.join("gs"))?;
    let mut runs_table = Table::new(&["run", "seed", "best_epoch", "best_dev_loss", "selected"]);
    let selected = select_run(&runs);
    for (r, run) in runs.iter().enumerate() {
        let model_path = out.join("models").join(format!("aligner_run{r}.bin"));
        run.model.save(&model_path)?;
        manifest.output(model_path);
        let hist = out.join(format!("history_run{r}.csv"));
        write_history(&hist, run)?;
        manifest.output(hist);
        runs_table.row(&[
            r.to_string(),
            run.seed.to_string(),
            run.best_epoch.to_string(),
            run.best_dev_loss.to_string(),
            (r == selected).to_string(),
        ]);
    }
    runs_table.write(&out.join("runs.csv"))?;
    manifest.output(out.join("runs.csv"));

    let aligned_runs: Vec<Vec<AlignedRecording>> = runs
        .iter()
        .map(|run| align_recordings(&run.model, &recs))
        .collect::<Result<_, _>>()?;
    let aligned = &aligned_runs[selected];
    for a in aligned {
        let p = out.join("gs").join(format!("{}.csv", a.id));
        write_gs_csv(&p, &a.output)?;
    }
    manifest.output(out.join("gs"));
    manifest.stage("export");

    write_reports(out, &recs, &aligned_runs, selected, &mut manifest)?;
    manifest.stage("report");
    manifest.write(out)
}

fn write_reports(
    out: &Path,
    recs: &[Recording],
    aligned_runs: &[Vec<AlignedRecording>],
    selected: usize,
    manifest: &mut RunManifest,
) -> Result<(), Failure> {
    let idx = report_set(&aligned_runs[0]);
    let baseline: Vec<f64> = idx
        .iter()
        .map(|&i| pairwise_cronbach_alpha(recs[i].annotations.traces()))
        .collect::<Result<_, _>>()
        .map_err(Failure::invalid)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let mut summary = Table::new(&["run", "baseline_alpha", "generated_alpha", "mean_z_diff", "t", "p_one_tailed"]);
    let mut per_run_alpha = Vec::new();
    for (r, aligned) in aligned_runs.iter().enumerate() {
        let generated: Vec<f64> = idx
            .iter()
            .map(|&i| pairwise_cronbach_alpha(&aligned[i].output.corrected))
            .collect::<Result<_, _>>()
            .map_err(Failure::invalid)?;
        let (z, t, p) = match fisher_alpha_comparison(&baseline, &generated) {
            Ok(c) => (c.mean_z_diff.to_string(), c.t.to_string(), c.p_one_tailed.to_string()),
            Err(_) => Default::default(),
        };
        summary.row(&[r.to_string(), mean(&baseline).to_string(), mean(&generated).to_string(), z, t, p]);
        per_run_alpha.push(generated);
    }
    let means: Vec<f64> = per_run_alpha.iter().map(|g| mean(g)).collect();
    summary.row(&[
        "mean".into(),
        mean(&baseline).to_string(),
        mean(&means).to_string(),
        String::new(),
        String::new(),
        String::new(),
    ]);
    summary.write(&out.join("agreement_summary.csv"))?;
    manifest.output(out.join("agreement_summary.csv"));

    let mut agreement = Table::new(&["id", "partition", "baseline_alpha", "generated_alpha"]);
    let mut corr = Table::new(&["id", "partition", "baseline_pearson", "generated_pearson"]);
    for (k, &i) in idx.iter().enumerate() {
        let a = &aligned_runs[selected][i];
        agreement.row(&[
            a.id.clone(),
            a.partition.to_string(),
            baseline[k].to_string(),
            per_run_alpha[selected][k].to_string(),
        ]);
        let driver = recs[i].features.column(0);
        let base = pearson(&recs[i].annotations.mean_trace().values, &driver).map_err(Failure::invalid)?;
        let gen = pearson(&a.output.gold_standard.values, &driver).map_err(Failure::invalid)?;
        corr.row(&[a.id.clone(), a.partition.to_string(), base.to_string(), gen.to_string()]);
    }
    agreement.write(&out.join("agreement.csv"))?;
    corr.write(&out.join("pearson.csv"))?;
    manifest.output(out.join("agreement.csv"));
    manifest.output(out.join("pearson.csv"));
    Ok(())
}
