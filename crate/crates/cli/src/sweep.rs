use std::path::PathBuf;

use clap::Args;
use gsalign::alignment::{train_aligner, TrainConfig};
use rayon::prelude::*;

use crate::config::{load_standardized, run_seeds, thread_pool, train_config};
use crate::failure::Failure;
use crate::manifest::{create_dir, RunManifest};
use crate::table::Table;
use crate::Common;

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Hidden sizes to compare, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32, 64, 128, 256, 512])]
    pub sizes: Vec<usize>,
}

/// Sorted, deduplicated sizes.
pub fn normalize_sizes(sizes: &[usize]) -> Result<Vec<usize>, Failure> {
    let mut s = sizes.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.is_empty() || s[0] == 0 {
        return Err(Failure::invalid("hidden sizes must be positive and at least one is required"));
    }
    Ok(s)
}

/// Index of the lowest loss; on ties the smaller size (earlier index) wins.
pub fn select(losses: &[f64]) -> usize {
    (0..losses.len()).fold(0, |b, i| if losses[i] < losses[b] { i } else { b })
}

pub fn run(common: &Common, args: &SweepArgs) -> Result<(), Failure> {
    let cfg = train_config(common)?;
    let sizes = normalize_sizes(&args.sizes)?;
    let seeds = run_seeds(&cfg);
    let mut manifest = RunManifest::new("sweep", &serde_json::json!({ "train": cfg, "sizes": sizes }), seeds.clone());
    manifest.input(&args.corpus);
    let recs = load_standardized(&args.corpus)?;
    manifest.stage("load");

    let jobs: Vec<(usize, u64)> = sizes.iter().flat_map(|&h| seeds.iter().map(move |&s| (h, s))).collect();
    let pool = thread_pool(common.jobs)?;
    let results: Vec<(f64, usize)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(h, s)| {
                let c = TrainConfig {
                    hidden_size: h,
                    ..cfg.clone()
                };
                train_aligner(&recs, &c, s).map(|r| (r.best_dev_loss, r.best_epoch))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    manifest.stage("train");

    let n = seeds.len();
    let losses: Vec<f64> = results.chunks(n).map(|c| c.iter().map(|r| r.0).sum::<f64>() / n as f64).collect();
    let chosen = select(&losses);
    let mut table = Table::new(&["hidden_size", "best_dev_loss", "min_dev_loss", "runs", "selected"]);
    for (k, &h) in sizes.iter().enumerate() {
        let chunk = &results[k * n..(k + 1) * n];
        let min = chunk.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        table.row(&[h.to_string(), losses[k].to_string(), min.to_string(), n.to_string(), (k == chosen).to_string()]);
    }
    create_dir(&common.out)?;
    table.write(&common.out.join("sweep.csv"))?;
    manifest.output(common.out.join("sweep.csv"));
    manifest.stage("report");
    manifest.write(&common.out)?;
    log::info!("selected hidden size {}", sizes[chosen]);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_are_sorted_and_deduplicated() {
        assert_eq!(normalize_sizes(&[32, 8, 32, 16]).unwrap(), vec![8, 16, 32]);
        assert!(normalize_sizes(&[]).is_err());
        assert!(normalize_sizes(&[0, 8]).is_err());
    }

    #[test]
    fn ties_pick_the_smaller_size() {
        assert_eq!(select(&[0.5, 0.4, 0.4]), 1);
        assert_eq!(select(&[0.3]), 0);
    }
}
