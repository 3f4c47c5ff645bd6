use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    Off,
    Mix,
    PretrainPhases,
}

/// Every knob of a run. Loaded from a TOML file, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grammar: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub augment: AugmentMode,
    /// Sample the code-generation verb per table entry instead of always
    /// using the default prefix.
    pub rotate_verbs: bool,
    pub subtokenize: bool,
    pub hidden: usize,
    pub embed: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Auxiliary-only epochs before the main task under `pretrain_phases`.
    pub pretrain_epochs: usize,
    pub lr: f64,
    pub beam: usize,
    pub seed: u64,
    pub val_fraction: f64,
    pub min_count: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grammar: None,
            train: None,
            val: None,
            test: None,
            table: None,
            augment: AugmentMode::Off,
            rotate_verbs: false,
            subtokenize: true,
            hidden: 256,
            embed: 128,
            batch_size: 32,
            epochs: 300,
            pretrain_epochs: 100,
            lr: 1e-3,
            beam: 5,
            seed: 0,
            val_fraction: 0.1,
            min_count: 1,
        }
    }
}

/// Flags that override [`RunConfig`] fields.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// ASDL grammar file (defaults to the built-in JavaScript grammar)
    #[arg(long, global = true)]
    pub grammar: Option<PathBuf>,
    #[arg(long, global = true)]
    pub train: Option<PathBuf>,
    #[arg(long, global = true)]
    pub val: Option<PathBuf>,
    #[arg(long, global = true)]
    pub test: Option<PathBuf>,
    /// Variable semantic table (JSON Lines with `name` and `semantic`)
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub augment: Option<AugmentMode>,
    #[arg(long, global = true)]
    pub rotate_verbs: Option<bool>,
    #[arg(long, global = true)]
    pub subtokenize: Option<bool>,
    #[arg(long, global = true)]
    pub hidden: Option<usize>,
    #[arg(long, global = true)]
    pub embed: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub beam: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub val_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub min_count: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("bad config: {e}")))
    }

    /// The file at `path` (or the defaults) with `o` applied on top.
    pub fn load(path: Option<&Path>, o: &Overrides) -> Result<RunConfig, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                RunConfig::from_toml(&text)?
            }
            None => RunConfig::default(),
        };
        cfg.apply(o);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if let Some(v) = &o.$f {
                    self.$f = v.clone();
                }
            )*};
        }
        macro_rules! take_opt {
            ($($f:ident),*) => {$(
                if o.$f.is_some() {
                    self.$f = o.$f.clone();
                }
            )*};
        }
        take_opt!(grammar, train, val, test, table);
        take!(
            augment,
            rotate_verbs,
            subtokenize,
            hidden,
            embed,
            batch_size,
            epochs,
            pretrain_epochs,
            lr,
            beam,
            seed,
            val_fraction,
            min_count
        );
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Usage(m.to_string()));
        if self.hidden == 0 || self.embed == 0 {
            return bad("hidden and embed must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch-size must be positive");
        }
        if self.beam == 0 {
            return bad("beam must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be a positive number");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val-fraction must be in [0, 1)");
        }
        if self.min_count == 0 {
            return bad("min-count must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reported_hyperparameters() {
        let c = RunConfig::default();
        assert_eq!(
            (c.hidden, c.embed, c.batch_size, c.epochs, c.beam),
            (256, 128, 32, 300, 5)
        );
        assert_eq!(c.lr, 1e-3);
        assert_eq!(c.val_fraction, 0.1);
        assert!(c.subtokenize);
    }

    #[test]
    fn flags_override_file() {
        let mut c = RunConfig::from_toml("hidden = 64\nepochs = 10\naugment = \"mix\"\n").unwrap();
        assert_eq!((c.hidden, c.epochs, c.augment), (64, 10, AugmentMode::Mix));
        c.apply(&Overrides {
            epochs: Some(3),
            ..Overrides::default()
        });
        assert_eq!((c.hidden, c.epochs), (64, 3));
        assert!(RunConfig::from_toml("hiden = 1").is_err());
    }
}
