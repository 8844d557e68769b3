//! Config file handling and flag merging.
//!
//! Every key of the run config file is optional and named exactly after
//! the corresponding engine field; flags win over file values, which win
//! over defaults. `data_schema` picks how `--data` files are read, either
//! as a preset name or an inline table.

use std::path::Path;

use serde::Deserialize;

use driftcast_core::forecast::ModelKind;
use driftcast_core::ingest::{schema_preset, CsvSchema, SynthParams};
use driftcast_core::protocol::{Strategy, TimingMode};
use driftcast_core::pseudo::PseudoMode;
use driftcast_core::RunConfig64;

use crate::CliError;

/// Schema selection: `data_schema = "nasa"` or an inline table.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SchemaChoice {
    Preset(String),
    Inline(CsvSchema<f64>),
}

impl SchemaChoice {
    pub fn resolve(&self) -> Result<CsvSchema<f64>, CliError> {
        match self {
            SchemaChoice::Preset(name) => {
                schema_preset(name).map_err(|e| CliError::Config(e.to_string()))
            }
            SchemaChoice::Inline(schema) => {
                schema.validate().map_err(|e| CliError::Config(e.to_string()))?;
                Ok(schema.clone())
            }
        }
    }
}

/// The TOML config file: run keys at the top level, plus the data schema
/// and an optional `[synth]` table of custom generator parameters.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub n: Option<usize>,
    pub h: Option<usize>,
    pub warmup_fraction: Option<f64>,
    pub warmup_epochs: Option<usize>,
    pub warmup_lr: Option<f64>,
    pub eta0: Option<f64>,
    pub inner_update_epochs: Option<usize>,
    pub strategy: Option<Strategy>,
    pub pseudo_mode: Option<PseudoMode>,
    pub model: Option<ModelKind>,
    pub mlp_hidden: Option<usize>,
    pub rnn_hidden: Option<usize>,
    pub rnn_dropout: Option<f64>,
    pub seed: Option<u64>,
    pub timing: Option<TimingMode>,
    pub pretrain_series: Option<String>,
    pub data_schema: Option<SchemaChoice>,
    pub synth: Option<SynthParams<f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("parsing {}: {e}", path.display())))
    }

    /// Folds the file's run keys over the defaults.
    pub fn apply(&self, config: &mut RunConfig64) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        set!(
            n,
            h,
            warmup_fraction,
            warmup_epochs,
            warmup_lr,
            eta0,
            inner_update_epochs,
            strategy,
            pseudo_mode,
            model,
            mlp_hidden,
            rnn_hidden,
            rnn_dropout,
            seed,
            timing
        );
        if let Some(p) = &self.pretrain_series {
            config.pretrain_series = Some(p.clone());
        }
    }
}

/// Shared override flags, applied after the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// RNG seed for weights, warm-up shuffling, and dropout.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Update strategy: pseudo, pseudo-gamma, delayed, or frozen.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Forecaster: mlp, rnn, persistence, or linear.
    #[arg(long)]
    pub model: Option<String>,
    /// Input window length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Forecast horizon.
    #[arg(long)]
    pub h: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig64) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(s) = &self.strategy {
            config.strategy = s.parse().map_err(|e: driftcast_core::Error| {
                CliError::Config(e.to_string())
            })?;
        }
        if let Some(m) = &self.model {
            config.model = m.parse().map_err(|e: driftcast_core::Error| {
                CliError::Config(e.to_string())
            })?;
        }
        if let Some(n) = self.n {
            config.n = n;
        }
        if let Some(h) = self.h {
            config.h = h;
        }
        Ok(())
    }
}

/// Builds the effective run config from an optional file plus flags.
pub fn effective_config(
    config_path: Option<&Path>,
    overrides: &Overrides,
) -> Result<(RunConfig64, FileConfig), CliError> {
    let file = match config_path {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut config = RunConfig64::default();
    file.apply(&mut config);
    overrides.apply(&mut config)?;
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok((config, file))
}

/// Parses a sweep grid: either comma-separated values ("5,10,20") or an
/// inclusive range with an optional step ("2..20 step 2").
pub fn parse_grid(spec: &str) -> Result<Vec<usize>, CliError> {
    let spec = spec.trim();
    let usage = |detail: String| CliError::Config(format!("grid `{spec}`: {detail}"));
    if spec.is_empty() {
        return Err(usage("empty grid".into()));
    }
    if spec.contains("..") {
        let mut tokens = spec.split_whitespace();
        let range = tokens.next().expect("nonempty spec");
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| usage("malformed range".into()))?;
        let lo: usize = lo.trim().parse().map_err(|_| usage(format!("bad start `{lo}`")))?;
        let hi: usize = hi.trim().parse().map_err(|_| usage(format!("bad end `{hi}`")))?;
        let step = match (tokens.next(), tokens.next(), tokens.next()) {
            (None, _, _) => 1,
            (Some("step"), Some(s), None) => {
                s.parse().map_err(|_| usage(format!("bad step `{s}`")))?
            }
            _ => return Err(usage("expected `LO..HI` or `LO..HI step S`".into())),
        };
        if step == 0 {
            return Err(usage("step must be positive".into()));
        }
        if lo > hi {
            return Err(usage(format!("start {lo} exceeds end {hi}")));
        }
        return Ok((lo..=hi).step_by(step).collect());
    }
    spec.split(',')
        .map(|token| {
            let token = token.trim();
            token.parse().map_err(|_| usage(format!("bad value `{token}`")))
        })
        .collect()
}
