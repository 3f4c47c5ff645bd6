use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Grads, Tape};
use super::{Model, NeuralError};
use crate::augment::Schedule;
use crate::grammar::Grammar;
use crate::jsfront::{parse_js, to_abstract};
use crate::prep::{Example, Provenance};
use crate::transit::{oracle_actions, Action};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    /// Global gradient-norm clip.
    pub clip: f64,
    pub seed: u64,
    /// Ends a phase early once its mean training NLL drops below this.
    #[serde(default)]
    pub stop_below: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            lr: 1e-3,
            clip: 5.0,
            seed: 0,
            stop_below: None,
        }
    }
}

/// A description paired with its oracle derivation.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub tokens: Vec<String>,
    pub actions: Vec<Action>,
}

impl Instance {
    /// `None` for bare-name (variable prediction) examples and for codes the
    /// grammar cannot derive.
    pub fn from_example(ex: &Example, g: &Grammar, subtokenize: bool) -> Option<Instance> {
        if ex.provenance == Provenance::AuxVp || ex.description.is_empty() {
            return None;
        }
        let tree = parse_js(&ex.code).ok()?;
        let tree = to_abstract(&tree, g).ok()?;
        let actions = oracle_actions(&tree, g, subtokenize).ok()?;
        Some(Instance {
            tokens: ex.description.clone(),
            actions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: Option<f64>,
}

pub fn write_loss_curve(mut w: impl Write, curve: &[EpochLoss]) -> std::io::Result<()> {
    writeln!(w, "epoch,train_nll,val_nll")?;
    for e in curve {
        match e.val_nll {
            Some(v) => writeln!(w, "{},{},{}", e.epoch, e.train_nll, v)?,
            None => writeln!(w, "{},{},", e.epoch, e.train_nll)?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub curve: Vec<EpochLoss>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub skipped: usize,
}

struct Adam {
    m: Grads,
    v: Grads,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, model: &mut Model, grads: &Grads, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (k, p) in model.params.params.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m.g[k], &mut self.v.g[k], &grads.g[k]);
            for i in 0..p.data.len() {
                m[i] = Self::B1 * m[i] + (1.0 - Self::B1) * g[i];
                v[i] = Self::B2 * v[i] + (1.0 - Self::B2) * g[i] * g[i];
                p.data[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

fn mean_nll(model: &Model, data: &[Instance], g: &Grammar) -> Result<f64, NeuralError> {
    let mut total = 0.0;
    for inst in data {
        let mut t = Tape::new(&model.params);
        let loss = model.sequence_nll(&mut t, &inst.tokens, &inst.actions, g)?;
        total += t.scalar(loss);
    }
    Ok(total / data.len().max(1) as f64)
}

fn instances(examples: &[Example], g: &Grammar, split: bool, skipped: &mut usize) -> Vec<Instance> {
    examples
        .iter()
        .filter_map(|ex| {
            let inst = Instance::from_example(ex, g, split);
            if inst.is_none() {
                *skipped += 1;
                log::warn!("skipping example without a derivation: {}", ex.code);
            }
            inst
        })
        .collect()
}

/// Minimizes the action NLL over every phase of `schedule` with Adam. The
/// parameters of the epoch with the lowest validation NLL are kept (the
/// last epoch's when `val` is empty).
pub fn train(
    mut model: Model,
    schedule: &Schedule,
    val: &[Example],
    g: &Grammar,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, NeuralError> {
    model.check_grammar(g)?;
    let split = model.subtokenize;
    let mut skipped = 0;
    let phases: Vec<(Vec<Instance>, usize)> = schedule
        .phases
        .iter()
        .map(|p| (instances(&p.examples, g, split, &mut skipped), p.epochs))
        .collect();
    if phases.iter().all(|(d, _)| d.is_empty()) {
        return Err(NeuralError::NoExamples);
    }
    let val: Vec<Instance> = val
        .iter()
        .filter_map(|ex| Instance::from_example(ex, g, split))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam {
        m: model.params.zero_grads(),
        v: model.params.zero_grads(),
        t: 0,
    };
    let mut grads = model.params.zero_grads();
    let mut curve = Vec::new();
    let mut best: Option<(f64, usize, super::ParamSet)> = None;
    let mut epoch = 0;
    for (data, epochs) in &phases {
        if data.is_empty() {
            continue;
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        for _ in 0..*epochs {
            epoch += 1;
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in order.chunks(cfg.batch_size.max(1)) {
                grads.zero();
                for &i in batch {
                    let inst = &data[i];
                    let loss = model.loss_and_grads(&inst.tokens, &inst.actions, g, &mut grads)?;
                    if !loss.is_finite() {
                        return Err(NeuralError::NonFiniteLoss { epoch, example: i });
                    }
                    total += loss;
                }
                grads.scale(1.0 / batch.len() as f64);
                let norm = grads.norm();
                if norm > cfg.clip {
                    grads.scale(cfg.clip / norm);
                }
                adam.step(&mut model, &grads, cfg.lr);
            }
            if !model.params.is_finite() {
                return Err(NeuralError::NonFiniteParams(epoch));
            }
            let train_nll = total / data.len() as f64;
            let val_nll = if val.is_empty() {
                None
            } else {
                Some(mean_nll(&model, &val, g)?)
            };
            log::info!("epoch {epoch}: train {train_nll:.4} val {val_nll:?}");
            curve.push(EpochLoss {
                epoch,
                train_nll,
                val_nll,
            });
            if let Some(v) = val_nll {
                if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
                    best = Some((v, epoch, model.params.clone()));
                }
            }
            if cfg.stop_below.is_some_and(|s| train_nll < s) {
                break;
            }
        }
    }
    let best_epoch = match best {
        Some((_, e, params)) => {
            model.params = params;
            e
        }
        None => epoch,
    };
    Ok(TrainOutcome {
        model,
        curve,
        best_epoch,
        skipped,
    })
}
