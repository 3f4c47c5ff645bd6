//! Auxiliary training data built from a variable semantic table.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsfront::is_identifier;
use crate::prep::{Example, Provenance, Record, Vocabulary};

pub const DEFAULT_CG_PREFIX: &str = "展示";

/// Display verbs sampled per entry when prefix rotation is on.
pub const CG_VERBS: [&str; 3] = ["展示", "显示", "动态展示"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SemanticEntry {
    pub name: String,
    pub semantic: String,
}

impl SemanticEntry {
    pub fn new(name: impl Into<String>, semantic: impl Into<String>) -> SemanticEntry {
        SemanticEntry {
            name: name.into(),
            semantic: semantic.into(),
        }
    }

    fn problem(&self) -> Option<String> {
        if !is_identifier(&self.name) {
            Some(format!("`{}` is not a valid identifier", self.name))
        } else if self.semantic.trim().is_empty() {
            Some(format!("`{}` has an empty semantic", self.name))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CgOptions {
    pub prefix: String,
    /// Seed for sampling a verb from [`CG_VERBS`] per entry; `None` always
    /// uses `prefix`.
    pub rotate_seed: Option<u64>,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            prefix: DEFAULT_CG_PREFIX.to_string(),
            rotate_seed: None,
        }
    }
}

/// Built records plus the warnings for skipped entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Built {
    pub records: Vec<Record>,
    pub skipped: Vec<String>,
}

fn valid_entries<'a>(
    entries: &'a [SemanticEntry],
    skipped: &mut Vec<String>,
) -> Vec<&'a SemanticEntry> {
    entries
        .iter()
        .filter(|e| match e.problem() {
            Some(p) => {
                log::warn!("skipping semantic entry: {p}");
                skipped.push(p);
                false
            }
            None => true,
        })
        .collect()
}

/// Code-generation rewrite: `展示<semantic>` paired with `{name;}`.
pub fn build_cg_task(entries: &[SemanticEntry], opts: &CgOptions) -> Built {
    let mut built = Built::default();
    let mut rng = opts.rotate_seed.map(ChaCha8Rng::seed_from_u64);
    for e in valid_entries(entries, &mut built.skipped) {
        let verb = match rng.as_mut() {
            Some(r) => CG_VERBS.choose(r).copied().unwrap_or(DEFAULT_CG_PREFIX),
            None => opts.prefix.as_str(),
        };
        let mut r = Record::new(format!("{verb}{}", e.semantic), format!("{{{};}}", e.name));
        r.provenance = Provenance::AuxCg;
        built.records.push(r);
    }
    built
}

/// Variable prediction pairs: the semantic alone against the bare name.
/// Duplicate (name, semantic) pairs are kept once.
pub fn build_vp_task(entries: &[SemanticEntry]) -> Built {
    let mut built = Built::default();
    let mut seen = HashSet::new();
    for e in valid_entries(entries, &mut built.skipped) {
        if !seen.insert((&e.name, &e.semantic)) {
            continue;
        }
        let mut r = Record::new(e.semantic.clone(), e.name.clone());
        r.provenance = Provenance::AuxVp;
        built.records.push(r);
    }
    built
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    Mix,
    PretrainPhases,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phase {
    pub name: &'static str,
    pub examples: Vec<Example>,
    pub epochs: usize,
}

/// Ordered training phases. Within a phase the pool is reshuffled every
/// epoch by the trainer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub phases: Vec<Phase>,
}

impl Schedule {
    pub fn single(examples: Vec<Example>, epochs: usize) -> Schedule {
        Schedule {
            phases: vec![Phase {
                name: "main",
                examples,
                epochs,
            }],
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.phases.iter().map(|p| p.epochs).sum()
    }
}

/// A corpus together with the vocabulary it was indexed against, if any.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub examples: Vec<Example>,
    pub vocab: Option<Vocabulary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseEpochs {
    pub pretrain: usize,
    pub finetune: usize,
}

impl Default for PhaseEpochs {
    fn default() -> Self {
        PhaseEpochs {
            pretrain: 100,
            finetune: 300,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MergeError {
    #[error("main and auxiliary corpora were indexed with different vocabularies")]
    VocabularyMismatch,
}

/// Combines the main task with auxiliary data. `Mix` pools everything for
/// `phases.finetune` epochs; `PretrainPhases` trains on the auxiliary data
/// first and then on the main task alone.
pub fn merge_tasks(
    main: Corpus,
    aux: Corpus,
    mode: MergeMode,
    phases: PhaseEpochs,
) -> Result<Schedule, MergeError> {
    if let (Some(a), Some(b)) = (&main.vocab, &aux.vocab) {
        if a != b {
            return Err(MergeError::VocabularyMismatch);
        }
    }
    Ok(match mode {
        MergeMode::Mix => {
            let mut pool = main.examples;
            pool.extend(aux.examples);
            Schedule::single(pool, phases.finetune)
        }
        MergeMode::PretrainPhases => Schedule {
            phases: vec![
                Phase {
                    name: "pretrain",
                    examples: aux.examples,
                    epochs: phases.pretrain,
                },
                Phase {
                    name: "finetune",
                    examples: main.examples,
                    epochs: phases.finetune,
                },
            ],
        },
    })
}
