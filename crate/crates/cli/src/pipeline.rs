//! The steps shared by the subcommands: corpus preparation, training and
//! scoring.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use subtranx::augment::{
    build_cg_task, merge_tasks, CgOptions, Corpus, MergeMode, PhaseEpochs, Schedule, SemanticEntry,
};
use subtranx::grammar::Grammar;
use subtranx::jsfront::{canonicalize, parse_js, print_js, to_abstract, to_concrete};
use subtranx::metrics::{evaluate, EvalItem, EvalReport};
use subtranx::neural::{train, Model, NetConfig, TrainConfig, TrainOutcome};
use subtranx::prep::{
    build_vocab, placeholder, preprocess_record, restore_code, tokenize_description, Category,
    Example, Record, MAX_PLACEHOLDERS,
};
use subtranx::transit::{oracle_actions, replay};

use crate::config::{AugmentMode, RunConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropped {
    /// 1-based record number.
    pub line: usize,
    pub code: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unmatched {
    pub line: usize,
    pub literals: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepReport {
    pub read: usize,
    pub kept: usize,
    pub dropped: Vec<Dropped>,
    pub unmatched: Vec<Unmatched>,
}

/// Preprocesses every record, dropping the ones whose code fails.
pub fn preprocess_all(records: &[Record]) -> (Vec<Record>, PrepReport) {
    let mut out = Vec::new();
    let mut report = PrepReport {
        read: records.len(),
        ..PrepReport::default()
    };
    for (i, r) in records.iter().enumerate() {
        match preprocess_record(r) {
            Ok(p) => {
                if !p.unmatched.is_empty() {
                    report.unmatched.push(Unmatched {
                        line: i + 1,
                        literals: p.unmatched,
                    });
                }
                out.push(p.record);
            }
            Err(e) => {
                log::warn!("record {}: {e}", i + 1);
                report.dropped.push(Dropped {
                    line: i + 1,
                    code: r.code.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    report.kept = out.len();
    (out, report)
}

pub fn examples(records: &[Record]) -> Vec<Example> {
    records.iter().map(Example::from_record).collect()
}

/// Holds out the last `fraction` of a seeded shuffle for validation.
pub fn split_validation<T>(mut items: Vec<T>, fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (items.len() as f64 * fraction).round() as usize;
    let val = items.split_off(items.len() - n_val.min(items.len()));
    (items, val)
}

/// Code-generation rewrites of the semantic table, preprocessed like the
/// main corpus.
pub fn aux_examples(table: &[SemanticEntry], rotate_seed: Option<u64>) -> Vec<Example> {
    let opts = CgOptions {
        rotate_seed,
        ..CgOptions::default()
    };
    let built = build_cg_task(table, &opts);
    let (records, report) = preprocess_all(&built.records);
    if !report.dropped.is_empty() {
        log::warn!("{} auxiliary records dropped", report.dropped.len());
    }
    examples(&records)
}

/// Vocabulary over the main and auxiliary examples, a fresh model and the
/// training schedule implied by `cfg.augment`.
pub fn setup(
    cfg: &RunConfig,
    g: &Grammar,
    main: Vec<Example>,
    table: Option<&[SemanticEntry]>,
) -> Result<(Model, Schedule), CliError> {
    let aux = match (cfg.augment, table) {
        (AugmentMode::Off, _) => Vec::new(),
        (_, Some(t)) => aux_examples(t, cfg.rotate_verbs.then_some(cfg.seed)),
        (_, None) => return Err(CliError::Usage("augmentation needs --table".into())),
    };
    let mut all = main.clone();
    all.extend(aux.iter().cloned());
    let vocab = build_vocab(&all, cfg.min_count, g, cfg.subtokenize);
    let net = NetConfig {
        embed: cfg.embed,
        hidden: cfg.hidden,
    };
    let model = Model::new(net, vocab, g, cfg.subtokenize, cfg.seed);
    let phases = PhaseEpochs {
        pretrain: cfg.pretrain_epochs,
        finetune: cfg.epochs,
    };
    let mode = match cfg.augment {
        AugmentMode::PretrainPhases => MergeMode::PretrainPhases,
        _ => MergeMode::Mix,
    };
    let corpus = |examples| Corpus {
        examples,
        vocab: None,
    };
    let schedule = merge_tasks(corpus(main), corpus(aux), mode, phases)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    Ok((model, schedule))
}

pub fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        batch_size: cfg.batch_size,
        lr: cfg.lr,
        seed: cfg.seed,
        ..TrainConfig::default()
    }
}

pub fn fit(
    cfg: &RunConfig,
    g: &Grammar,
    main: Vec<Example>,
    val: &[Example],
    table: Option<&[SemanticEntry]>,
) -> Result<TrainOutcome, CliError> {
    let (model, schedule) = setup(cfg, g, main, table)?;
    log::info!(
        "{} parameters, vocabulary {}",
        model.param_count(),
        model.vocab.len()
    );
    Ok(train(model, &schedule, val, g, &train_config(cfg))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub code: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub description: String,
    pub reference: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
    pub candidates: Vec<Scored>,
}

/// Beam search over every example.
pub fn predict(
    model: &Model,
    g: &Grammar,
    examples: &[Example],
    width: usize,
) -> Result<Vec<Prediction>, CliError> {
    let mut out = Vec::with_capacity(examples.len());
    for ex in examples {
        let candidates = if ex.description.is_empty() {
            Vec::new()
        } else {
            model
                .beam_decode(&ex.description, g, width)?
                .into_iter()
                .map(|c| Scored {
                    code: c.code,
                    score: c.score,
                })
                .collect()
        };
        out.push(Prediction {
            description: ex.description.concat(),
            reference: ex.code.clone(),
            category: ex.category,
            candidates,
        });
    }
    Ok(out)
}

pub fn score(predictions: &[Prediction], k: usize) -> Result<EvalReport, CliError> {
    let items: Vec<EvalItem> = predictions
        .iter()
        .map(|p| EvalItem {
            candidates: p.candidates.iter().map(|c| c.code.clone()).collect(),
            reference: p.reference.clone(),
            category: p.category,
        })
        .collect();
    evaluate(&items, k).map_err(|e| CliError::Data(e.to_string()))
}

const OPENERS: [(char, char); 4] = [('\'', '\''), ('"', '"'), ('‘', '’'), ('“', '”')];

/// Replaces quoted spans of a free-form description by placeholders, for
/// generation without a reference code. Returns the placeholder map.
pub fn mask_quoted(description: &str) -> (String, BTreeMap<String, String>) {
    let mut out = String::new();
    let mut map = BTreeMap::new();
    let mut rest = description;
    while let Some((start, open)) = rest
        .char_indices()
        .find(|(_, c)| OPENERS.iter().any(|(o, _)| o == c))
    {
        let close = OPENERS
            .iter()
            .find(|(o, _)| *o == open)
            .map(|(_, c)| *c)
            .unwrap_or(open);
        let body = &rest[start + open.len_utf8()..];
        let Some(end) = body.find(close) else { break };
        let text = &body[..end];
        out.push_str(&rest[..start + open.len_utf8()]);
        if text.trim().is_empty() || map.len() == MAX_PLACEHOLDERS {
            out.push_str(text);
        } else {
            let key = placeholder(map.len() + 1);
            out.push_str(&key);
            map.insert(key, text.to_string());
        }
        out.push(close);
        rest = &body[end + close.len_utf8()..];
    }
    out.push_str(rest);
    (out, map)
}

/// Generation from raw text: quoted spans are masked, and restored in the
/// returned candidates.
pub fn generate(
    model: &Model,
    g: &Grammar,
    description: &str,
    width: usize,
) -> Result<Vec<Scored>, CliError> {
    let (masked, map) = mask_quoted(description);
    let tokens = tokenize_description(&masked);
    if tokens.is_empty() {
        return Err(CliError::Data("empty description".into()));
    }
    let cands = model.beam_decode(&tokens, g, width)?;
    cands
        .into_iter()
        .map(|c| {
            let code =
                restore_code(&c.code, &map).map_err(|e| CliError::Internal(e.to_string()))?;
            Ok(Scored {
                code,
                score: c.score,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoundTripError {
    /// The input is not code the front end and grammar accept.
    Input(String),
    /// A stage disagreed with another.
    Invariant(String),
}

/// parse → abstract → oracle actions → replay → concrete → print, checking
/// that the printed form is a fixed point. Returns the canonical text.
pub fn roundtrip(code: &str, g: &Grammar, subtokenize: bool) -> Result<String, RoundTripError> {
    let input = |e: &dyn std::fmt::Display| RoundTripError::Input(e.to_string());
    let bad = |e: &dyn std::fmt::Display| RoundTripError::Invariant(e.to_string());
    let canonical = canonicalize(code).map_err(|e| input(&e))?;
    let tree =
        to_abstract(&parse_js(&canonical).map_err(|e| bad(&e))?, g).map_err(|e| input(&e))?;
    let actions = oracle_actions(&tree, g, subtokenize).map_err(|e| input(&e))?;
    let rebuilt = replay(&actions, g).map_err(|e| bad(&e))?;
    if rebuilt != tree {
        return Err(bad(&"replayed tree differs from the parsed tree"));
    }
    let printed = print_js(&to_concrete(&rebuilt, g).map_err(|e| bad(&e))?);
    if printed != canonical {
        return Err(bad(&format!(
            "printed `{printed}` but expected `{canonical}`"
        )));
    }
    Ok(printed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoted_spans_are_masked() {
        let (m, map) = mask_quoted("动态展示火车头标题，兜底显示'春运火车票'");
        assert_eq!(m, "动态展示火车头标题，兜底显示'<STR1>'");
        assert_eq!(map["<STR1>"], "春运火车票");
        let (m, map) = mask_quoted("显示‘满xx使用’和“ ”");
        assert_eq!(m, "显示‘<STR1>’和“ ”");
        assert_eq!(map.len(), 1);
        assert_eq!(mask_quoted("no 'end").0, "no 'end");
    }

    #[test]
    fn split_is_seeded_tail() {
        let (a, b) = split_validation((0..20).collect(), 0.1, 4);
        assert_eq!((a.len(), b.len()), (18, 2));
        assert_eq!(
            split_validation((0..20).collect::<Vec<_>>(), 0.1, 4),
            (a, b)
        );
    }

    #[test]
    fn table2_round_trips() {
        let g = Grammar::javascript();
        for code in [
            "{contentType === 'live' ? liveTimeDesc : marketingTimeDesc}",
            "{ user && user.nick || \" \" }",
            "{`优惠券已抵扣${discountPrice}元`}",
            "{data.coinShowPrice.split(\".\")[1]}",
        ] {
            roundtrip(code, &g, true).unwrap();
            roundtrip(code, &g, false).unwrap();
        }
        assert!(matches!(
            roundtrip("{a +}", &g, true),
            Err(RoundTripError::Input(_))
        ));
    }
}
