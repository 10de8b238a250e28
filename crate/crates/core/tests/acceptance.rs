//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Training-heavy criteria share one set of aligner
//! runs on the default synthetic corpus.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::gradcheck;
use common::oracle_suite::*;
use gsalign::alignment::{generate_gold_standard, train_aligner, write_gs_csv, TrainConfig, TrainedAligner};
use gsalign::data::{generate_synthetic, standardize, write_corpus, Partition, Recording, SynthSpec};
use gsalign::metrics::{cross_ccc_profile, fisher_alpha_comparison, pairwise_cronbach_alpha, pearson, LagGrid};
use gsalign::prediction::{evaluate_variant, write_comparison_csv, write_predictions_csv, TargetGs, Variant, VariantResult};
use gsalign::TraceSequence;

const RUNS: usize = 5;
/// Aligner width for the acceptance runs; keeps the suite within budget on
/// one core.
const HIDDEN: usize = 8;

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn record(&mut self, id: usize, name: &str, pass: bool, detail: String) {
        let line = format!("{} criterion {id} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((pass, line));
    }
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn gradient_correctness(report: &mut Report) {
    let t = Instant::now();
    let checks = gradcheck::all_checks();
    let elapsed = secs(t);
    let mut pass = elapsed < 120.0;
    let mut worst_name = String::new();
    let mut worst_ratio: f64 = 0.0;
    for c in &checks {
        pass &= c.passed() && c.trials >= 100;
        if !c.passed() {
            eprintln!("  gradient check {} failed: {:e} (tol {:e})", c.name, c.worst, c.tol);
        }
        let ratio = c.worst / c.tol;
        if ratio >= worst_ratio {
            worst_ratio = ratio;
            worst_name = format!("{} {:.1e}/{:.0e}", c.name, c.worst, c.tol);
        }
    }
    report.record(
        1,
        "gradient correctness",
        pass,
        format!("{} checks x {} instances, closest {worst_name}, {elapsed:.1}s", checks.len(), gradcheck::TRIALS),
    );
}

fn metric_oracles(report: &mut Report) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, worst) in metric_discrepancies() {
        pass &= worst < METRIC_TOL;
        parts.push(format!("{name} {worst:.1e}"));
    }
    for (name, got, want, tol) in anchored_examples() {
        let ok = (got - want).abs() < tol;
        pass &= ok;
        if !ok {
            parts.push(format!("anchor {name} {got} != {want}"));
        }
    }
    report.record(2, "metric oracles", pass, format!("{PAIRS} pairs, {}; anchors checked", parts.join(", ")));
}

fn sinc_behavior(report: &mut Report) {
    let high = sinc_interior_gain(4.0);
    let low = sinc_interior_gain(1.0);
    let dc = sinc_dc_gain();
    let pass = high < 0.1 && (low - 1.0).abs() < 0.1 && (dc - 1.0).abs() < 0.01;
    report.record(3, "sinc filter", pass, format!("4 Hz gain {high:.4}, 1 Hz gain {low:.4}, DC gain {dc:.4}"));
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn test_recordings(recs: &[Recording]) -> Vec<&Recording> {
    recs.iter().filter(|r| r.partition == Partition::Test).collect()
}

fn alignment_recovery(report: &mut Report, recs: &[Recording], runs: &[TrainedAligner]) {
    let test = test_recordings(recs);
    let baseline = mean(
        &test
            .iter()
            .map(|r| pearson(&r.annotations.mean_trace().values, &r.features.column(0)).unwrap())
            .collect::<Vec<_>>(),
    );
    let generated: Vec<f64> = runs
        .iter()
        .map(|run| {
            mean(
                &test
                    .iter()
                    .map(|r| {
                        let gs = generate_gold_standard(&run.model, &r.annotations).unwrap();
                        pearson(&gs.values, &r.features.column(0)).unwrap()
                    })
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let improved = generated.iter().filter(|&&g| g > baseline).count();
    let gain = mean(&generated) - baseline;
    let pass = improved >= 4 && gain >= 0.1;
    let per_run: Vec<String> = generated.iter().map(|g| format!("{g:.3}")).collect();
    report.record(
        4,
        "alignment recovery",
        pass,
        format!(
            "baseline Pearson {baseline:.3}, generated [{}], {improved}/{} runs improve, mean gain {gain:.3}",
            per_run.join(", "),
            runs.len()
        ),
    );
}

fn agreement(report: &mut Report, recs: &[Recording], runs: &[TrainedAligner], zero_delay_alpha: f64) {
    let test = test_recordings(recs);
    let base: Vec<f64> = test.iter().map(|r| pairwise_cronbach_alpha(r.annotations.traces()).unwrap()).collect();
    let mut corrected_means = Vec::new();
    let mut ps = Vec::new();
    for run in runs {
        let corrected: Vec<f64> = test
            .iter()
            .map(|r| {
                let out = run.model.infer(&r.annotations, &r.features).unwrap();
                pairwise_cronbach_alpha(&out.corrected).unwrap()
            })
            .collect();
        ps.push(fisher_alpha_comparison(&base, &corrected).unwrap().p_one_tailed);
        corrected_means.push(mean(&corrected));
    }
    let base_mean = mean(&base);
    let corr_mean = mean(&corrected_means);
    let pass = corr_mean >= base_mean && (zero_delay_alpha - 1.0).abs() <= 0.02;
    let p_text: Vec<String> = ps.iter().map(|p| format!("{p:.3}")).collect();
    report.record(
        5,
        "agreement",
        pass,
        format!(
            "alpha baseline {base_mean:.4}, corrected {corr_mean:.4} (Fisher one-tailed p per run [{}]); zero-delay alpha {zero_delay_alpha:.4}",
            p_text.join(", ")
        ),
    );
}

fn shape_preservation(report: &mut Report, recs: &[Recording], runs: &[TrainedAligner]) {
    let grid = LagGrid::standard(recs[0].sample_rate());
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for run in runs {
        for r in recs {
            let out = run.model.infer(&r.annotations, &r.features).unwrap();
            for (n, c) in out.corrected.iter().enumerate() {
                let profile = cross_ccc_profile(r.annotations.trace(n), c, &grid).unwrap();
                worst = worst.min(profile.into_iter().fold(f64::NEG_INFINITY, f64::max));
                count += 1;
            }
        }
    }
    report.record(
        6,
        "shape preservation",
        worst >= 0.5,
        format!("worst max-lag CCC {worst:.4} over {count} corrected annotations"),
    );
}

fn predictor_effects(report: &mut Report, rows: &BTreeMap<(TargetGs, Variant), VariantResult>, trivial_lt: f64) {
    let m = |g, v| rows[&(g, v)].row.mean_ccc;
    let mut pass = trivial_lt > 0.95;
    for g in [TargetGs::Baseline, TargetGs::Generated] {
        pass &= m(g, Variant::Slts) >= m(g, Variant::Lt);
    }
    for v in [Variant::Lt, Variant::Slts] {
        pass &= m(TargetGs::Generated, v) >= m(TargetGs::Baseline, v);
    }
    let cells: Vec<String> = rows.keys().map(|&(g, v)| format!("{g}/{v} {:.4}", m(g, v))).collect();
    report.record(
        7,
        "predictor effects",
        pass,
        format!("mean test CCC {}; trivial LT {trivial_lt:.4}", cells.join(", ")),
    );
}

fn curriculum(report: &mut Report, rows: &BTreeMap<(TargetGs, Variant), VariantResult>) {
    let mut start_ok = true;
    let mut range_ok = true;
    let mut moved = false;
    let mut finals = Vec::new();
    for ((_, v), res) in rows {
        if *v != Variant::Slts {
            continue;
        }
        for run in &res.runs {
            let first = &run.history[0];
            for fc in [first.fc_feature, first.fc_prediction] {
                start_ok &= fc.is_some_and(|f| (f - 0.1).abs() < 1e-9);
            }
            for h in &run.history {
                for fc in [h.fc_feature, h.fc_prediction].into_iter().flatten() {
                    range_ok &= fc > 0.0 && fc <= 50.0;
                }
            }
            let end = run.model.fc_feature().unwrap();
            moved |= end > 0.1;
            finals.push(format!("{end:.3}"));
        }
    }
    report.record(
        8,
        "curriculum start",
        start_ok && range_ok && moved,
        format!(
            "starts at 0.1 Hz: {start_ok}, within (0, 50] Hz: {range_ok}, final fc_feature per run [{}]",
            finals.join(", ")
        ),
    );
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Synthesis, alignment and prediction on a small corpus, writing every CSV
/// product into `dir`.
fn small_pipeline(dir: &Path) {
    let spec = SynthSpec {
        duration_s: 20.0,
        n_features: 5,
        n_train: 3,
        n_dev: 2,
        n_test: 2,
        max_lag_s: 2.0,
        seed: 7,
        ..SynthSpec::default()
    };
    let mut recs = generate_synthetic(&spec).unwrap();
    write_corpus(&dir.join("corpus"), &recs).unwrap();
    standardize(&mut recs).unwrap();
    let cfg = TrainConfig {
        hidden_size: 4,
        max_epochs: 3,
        patience: 2,
        max_lag_s: 2.0,
        runs: 2,
        ..TrainConfig::default()
    };
    let aligner = train_aligner(&recs, &cfg, cfg.run_seed(0)).unwrap();
    let mut gs = Vec::new();
    for r in &recs {
        let out = aligner.model.infer(&r.annotations, &r.features).unwrap();
        write_gs_csv(&dir.join(format!("{}_gs.csv", r.id)), &out).unwrap();
        gs.push(out.gold_standard);
    }
    let res = evaluate_variant(&recs, &gs, TargetGs::Generated, Variant::Slts, &cfg).unwrap();
    write_comparison_csv(&dir.join("comparison.csv"), &[res.row]).unwrap();
    for r in recs.iter().filter(|r| r.partition == Partition::Test) {
        let target = &gs[recs.iter().position(|q| q.id == r.id).unwrap()];
        let pred = res.runs[0].model.predict(&r.features).unwrap();
        write_predictions_csv(&dir.join(format!("{}_pred.csv", r.id)), &pred, target).unwrap();
    }
}

fn reproducibility(report: &mut Report) {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    small_pipeline(a.path());
    small_pipeline(b.path());
    let fa = files_under(a.path());
    let fb = files_under(b.path());
    let csvs = fa.keys().filter(|p| p.extension().is_some_and(|e| e == "csv")).count();
    let pass = !fa.is_empty() && fa == fb;
    report.record(9, "reproducibility", pass, format!("{} files ({csvs} CSV) byte-identical across reruns: {pass}", fa.len()));
}

fn main() {
    let start = Instant::now();
    let mut report = Report { lines: Vec::new() };

    gradient_correctness(&mut report);
    metric_oracles(&mut report);
    sinc_behavior(&mut report);

    let mut recs = generate_synthetic(&SynthSpec::default()).unwrap();
    standardize(&mut recs).unwrap();
    let cfg = TrainConfig {
        hidden_size: HIDDEN,
        runs: RUNS,
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let runs: Vec<TrainedAligner> = (0..RUNS)
        .map(|r| {
            let run = train_aligner(&recs, &cfg, cfg.run_seed(r)).unwrap();
            eprintln!(
                "  aligner run {r}: best epoch {} of {}, dev loss {:.4}, {:.0}s elapsed",
                run.best_epoch,
                run.history.len() - 1,
                run.best_dev_loss,
                secs(t)
            );
            run
        })
        .collect();

    let mut zero = generate_synthetic(&SynthSpec::zero_delay_clean()).unwrap();
    standardize(&mut zero).unwrap();
    let zero_run = train_aligner(&zero, &cfg, cfg.run_seed(0)).unwrap();
    let zero_alpha = mean(
        &test_recordings(&zero)
            .iter()
            .map(|r| pairwise_cronbach_alpha(&zero_run.model.infer(&r.annotations, &r.features).unwrap().corrected).unwrap())
            .collect::<Vec<_>>(),
    );

    alignment_recovery(&mut report, &recs, &runs);
    agreement(&mut report, &recs, &runs, zero_alpha);
    shape_preservation(&mut report, &recs, &runs);

    // the generated GS comes from the run with the lowest development loss
    let best = runs.iter().min_by(|a, b| a.best_dev_loss.total_cmp(&b.best_dev_loss)).unwrap();
    let baseline: Vec<TraceSequence> = recs.iter().map(|r| r.annotations.mean_trace()).collect();
    let generated: Vec<TraceSequence> = recs
        .iter()
        .map(|r| generate_gold_standard(&best.model, &r.annotations).unwrap())
        .collect();
    let mut rows = BTreeMap::new();
    for (g, targets) in [(TargetGs::Baseline, &baseline), (TargetGs::Generated, &generated)] {
        for v in [Variant::Lt, Variant::Slts] {
            let t = Instant::now();
            let res = evaluate_variant(&recs, targets, g, v, &cfg).unwrap();
            eprintln!("  predictor {g}/{v}: mean CCC {:.4}, {:.0}s", res.row.mean_ccc, secs(t));
            rows.insert((g, v), res);
        }
    }
    let mut trivial = generate_synthetic(&SynthSpec::trivial()).unwrap();
    standardize(&mut trivial).unwrap();
    let trivial_targets: Vec<TraceSequence> = trivial.iter().map(|r| r.annotations.mean_trace()).collect();
    let trivial_lt = evaluate_variant(&trivial, &trivial_targets, TargetGs::Baseline, Variant::Lt, &cfg)
        .unwrap()
        .row
        .mean_ccc;

    predictor_effects(&mut report, &rows, trivial_lt);
    curriculum(&mut report, &rows);
    reproducibility(&mut report);

    let failed = report.lines.iter().filter(|l| !l.0).count();
    println!(
        "{} of {} criteria passed in {:.0}s",
        report.lines.len() - failed,
        report.lines.len(),
        secs(start)
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
