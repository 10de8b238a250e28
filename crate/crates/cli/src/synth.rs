use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use gsalign::data::{generate_synthetic, write_corpus, SynthSpec};

use crate::config::read_file_config;
use crate::failure::Failure;
use crate::manifest::{create_dir, RunManifest};
use crate::Common;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Preset {
    Default,
    Trivial,
    ZeroDelay,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// TOML synthetic spec; overrides the config file's [synth] table.
    pub spec: Option<PathBuf>,
    /// Starting spec when neither a spec file nor a [synth] table is given.
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    pub preset: Preset,
}

fn resolve_spec(common: &Common, args: &SynthArgs) -> Result<SynthSpec, Failure> {
    let mut spec = if let Some(path) = &args.spec {
        let text = fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?
    } else if let Some(s) = read_file_config(common.config.as_deref())?.synth {
        s
    } else {
        match args.preset {
            Preset::Default => SynthSpec::default(),
            Preset::Trivial => SynthSpec::trivial(),
            Preset::ZeroDelay => SynthSpec::zero_delay_clean(),
        }
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn run(common: &Common, args: &SynthArgs) -> Result<(), Failure> {
    let spec = resolve_spec(common, args)?;
    let mut manifest = RunManifest::new("synth", &spec, vec![spec.seed]);
    if let Some(p) = &args.spec {
        manifest.input(p);
    }
    let recs = generate_synthetic(&spec)?;
    manifest.stage("generate");
    create_dir(&common.out)?;
    let corpus_manifest = write_corpus(&common.out, &recs)?;
    manifest.output(corpus_manifest);
    manifest.stage("write");
    manifest.write(&common.out)?;
    log::info!("wrote {} recordings to {}", recs.len(), common.out.display());
    Ok(())
}
