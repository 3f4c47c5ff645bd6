//! The encoder-decoder network: a bidirectional LSTM over description
//! tokens and an LSTM decoder over grammar actions with attention, parent
//! feeding and a generate/copy mixture for subtokens.

mod beam;
mod net;
pub mod tape;
mod train;

use std::io::{Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::Grammar;
use crate::prep::Vocabulary;
use crate::transit::TransitError;
use tape::{Param, ParamId, ParamSet};

pub use beam::Candidate;
pub use net::Choice;
pub use train::{train, write_loss_curve, EpochLoss, Instance, TrainConfig, TrainOutcome};

pub const CHECKPOINT_FORMAT: &str = "subtranx-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub embed: usize,
    pub hidden: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            embed: 128,
            hidden: 256,
        }
    }
}

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("empty input description")]
    EmptyInput,
    #[error("non-finite loss at epoch {epoch} (example {example})")]
    NonFiniteLoss { epoch: usize, example: usize },
    #[error("parameters became non-finite at epoch {0}")]
    NonFiniteParams(usize),
    #[error(transparent)]
    Transit(#[from] TransitError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint was built for a different grammar")]
    GrammarMismatch,
    #[error("no trainable examples")]
    NoExamples,
}

/// Parameter handles, looked up by name.
#[derive(Debug, Clone)]
struct Ids {
    tok_embed: ParamId,
    ctor_embed: ParamId,
    field_embed: ParamId,
    enc_fw_w: ParamId,
    enc_fw_b: ParamId,
    enc_bw_w: ParamId,
    enc_bw_b: ParamId,
    init_w: ParamId,
    init_b: ParamId,
    dec_w: ParamId,
    dec_b: ParamId,
    att_w: ParamId,
    comb_w: ParamId,
    ac_w: ParamId,
    ac_b: ParamId,
    gen_w: ParamId,
    gen_out: ParamId,
    gen_b: ParamId,
    copy_w: ParamId,
    gate_w: ParamId,
    gate_b: ParamId,
}

#[derive(Clone, Copy)]
enum Init {
    Embedding,
    Xavier,
    Zero,
    /// Zero except the forget-gate block, which starts at one.
    LstmBias,
}

/// `(name, rows, cols, init)` for every parameter.
fn layout(
    cfg: NetConfig,
    vocab: usize,
    ctors: usize,
    fields: usize,
) -> Vec<(&'static str, usize, usize, Init)> {
    let (e, h) = (cfg.embed, cfg.hidden);
    vec![
        ("tok_embed", vocab, e, Init::Embedding),
        ("ctor_embed", ctors + 1, e, Init::Embedding),
        ("field_embed", fields, e, Init::Embedding),
        ("enc_fw_w", 4 * h, e + h, Init::Xavier),
        ("enc_fw_b", 4 * h, 1, Init::LstmBias),
        ("enc_bw_w", 4 * h, e + h, Init::Xavier),
        ("enc_bw_b", 4 * h, 1, Init::LstmBias),
        ("init_w", h, 2 * h, Init::Xavier),
        ("init_b", h, 1, Init::Zero),
        ("dec_w", 4 * h, 2 * e + 3 * h, Init::Xavier),
        ("dec_b", 4 * h, 1, Init::LstmBias),
        ("att_w", 2 * h, h, Init::Xavier),
        ("comb_w", h, 3 * h, Init::Xavier),
        ("ac_w", e, h, Init::Xavier),
        ("ac_b", ctors + 1, 1, Init::Zero),
        ("gen_w", e, h, Init::Xavier),
        ("gen_out", vocab + 1, e, Init::Embedding),
        ("gen_b", vocab + 1, 1, Init::Zero),
        ("copy_w", 2 * h, h, Init::Xavier),
        ("gate_w", 2, h, Init::Xavier),
        ("gate_b", 2, 1, Init::Zero),
    ]
}

/// All learnable parameters together with the vocabulary and settings they
/// were trained with.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: NetConfig,
    pub subtokenize: bool,
    pub vocab: Vocabulary,
    pub params: ParamSet,
    ids: Ids,
    ctors: usize,
    fields: usize,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: NetConfig,
    subtokenize: bool,
    field_slots: usize,
    run: serde_json::Value,
    vocab: Vocabulary,
    params: Vec<Param>,
}

impl Model {
    /// Fresh parameters: uniform(-0.1, 0.1) embeddings, Xavier-uniform
    /// matrices, zero biases with forget gates at +1.
    pub fn new(
        config: NetConfig,
        vocab: Vocabulary,
        g: &Grammar,
        subtokenize: bool,
        seed: u64,
    ) -> Model {
        let ctors = g.constructors().len();
        let fields = g.field_slots();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::default();
        for (name, rows, cols, init) in layout(config, vocab.len(), ctors, fields) {
            let mut p = Param::zeros(name, rows, cols);
            match init {
                Init::Embedding => p
                    .data
                    .iter_mut()
                    .for_each(|x| *x = rng.gen_range(-0.1..0.1)),
                Init::Xavier => {
                    let limit = (6.0 / (rows + cols) as f64).sqrt();
                    p.data
                        .iter_mut()
                        .for_each(|x| *x = rng.gen_range(-limit..limit));
                }
                Init::Zero => {}
                Init::LstmBias => {
                    let h = rows / 4;
                    p.data[h..2 * h].iter_mut().for_each(|x| *x = 1.0);
                }
            }
            params.add(p);
        }
        let ids = Ids::resolve(&params).expect("layout names are complete");
        Model {
            config,
            subtokenize,
            vocab,
            params,
            ids,
            ctors,
            fields,
        }
    }

    pub fn check_grammar(&self, g: &Grammar) -> Result<(), NeuralError> {
        if self.vocab.matches_grammar(g) && g.field_slots() == self.fields {
            Ok(())
        } else {
            Err(NeuralError::GrammarMismatch)
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.params.iter().map(|p| p.data.len()).sum()
    }

    /// Writes a versioned JSON checkpoint; `run` is echoed verbatim.
    pub fn save(&self, w: impl Write, run: serde_json::Value) -> Result<(), NeuralError> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: self.config,
            subtokenize: self.subtokenize,
            field_slots: self.fields,
            run,
            vocab: self.vocab.clone(),
            params: self.params.params.clone(),
        };
        serde_json::to_writer(w, &ck).map_err(|e| NeuralError::Checkpoint(e.to_string()))
    }

    /// Reads a checkpoint, returning the model and the echoed run settings.
    pub fn load(r: impl Read) -> Result<(Model, serde_json::Value), NeuralError> {
        let ck: Checkpoint =
            serde_json::from_reader(r).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(NeuralError::Checkpoint(format!(
                "unknown format `{}`",
                ck.format
            )));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(NeuralError::Checkpoint(format!(
                "unsupported version {}",
                ck.version
            )));
        }
        let ctors = ck.vocab.constructors().len();
        let params = ParamSet { params: ck.params };
        let expected = layout(ck.config, ck.vocab.len(), ctors, ck.field_slots);
        if expected.len() != params.params.len() {
            return Err(NeuralError::Checkpoint(
                "parameter count differs from layout".into(),
            ));
        }
        for ((name, rows, cols, _), p) in expected.iter().zip(&params.params) {
            if p.name != *name || p.rows != *rows || p.cols != *cols || p.data.len() != rows * cols
            {
                return Err(NeuralError::Checkpoint(format!(
                    "bad shape for `{}`",
                    p.name
                )));
            }
        }
        let ids = Ids::resolve(&params)
            .ok_or_else(|| NeuralError::Checkpoint("missing parameter".into()))?;
        let model = Model {
            config: ck.config,
            subtokenize: ck.subtokenize,
            vocab: ck.vocab,
            params,
            ids,
            ctors,
            fields: ck.field_slots,
        };
        Ok((model, ck.run))
    }
}

impl Ids {
    fn resolve(ps: &ParamSet) -> Option<Ids> {
        let f = |n: &str| ps.find(n);
        Some(Ids {
            tok_embed: f("tok_embed")?,
            ctor_embed: f("ctor_embed")?,
            field_embed: f("field_embed")?,
            enc_fw_w: f("enc_fw_w")?,
            enc_fw_b: f("enc_fw_b")?,
            enc_bw_w: f("enc_bw_w")?,
            enc_bw_b: f("enc_bw_b")?,
            init_w: f("init_w")?,
            init_b: f("init_b")?,
            dec_w: f("dec_w")?,
            dec_b: f("dec_b")?,
            att_w: f("att_w")?,
            comb_w: f("comb_w")?,
            ac_w: f("ac_w")?,
            ac_b: f("ac_b")?,
            gen_w: f("gen_w")?,
            gen_out: f("gen_out")?,
            gen_b: f("gen_b")?,
            copy_w: f("copy_w")?,
            gate_w: f("gate_w")?,
            gate_b: f("gate_b")?,
        })
    }
}

#[cfg(test)]
mod tests;
