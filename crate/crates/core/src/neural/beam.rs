use std::cmp::Ordering;

use super::net::{Choice, DecState, Encoded};
use super::tape::Tape;
use super::{Model, NeuralError};
use crate::grammar::Grammar;
use crate::jsfront::{print_js, to_concrete, AbstractNode};
use crate::transit::{Action, FrontierState, MAX_ACTIONS};

/// A finished derivation that converted to legal JavaScript.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub code: String,
    /// Sum of per-step log-probabilities.
    pub score: f64,
    pub actions: Vec<Action>,
    pub tree: AbstractNode,
}

#[derive(Clone)]
struct Hyp {
    fs: FrontierState,
    st: DecState,
    actions: Vec<Action>,
    score: f64,
}

/// One scored extension of a live hypothesis.
struct Ext {
    score: f64,
    logp: f64,
    hyp: usize,
    order: usize,
    action: Action,
}

fn rank(a: &Ext, b: &Ext) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(b.logp.total_cmp(&a.logp))
        .then(a.hyp.cmp(&b.hyp))
        .then(a.order.cmp(&b.order))
}

enum Outcome {
    Live(Hyp),
    Done(Candidate),
    Dropped,
}

impl Model {
    /// Scored, legal extensions of `h`, plus the advanced decoder state they
    /// share.
    fn expand(
        &self,
        t: &mut Tape,
        enc: &Encoded,
        h: &Hyp,
        g: &Grammar,
    ) -> (DecState, Vec<(Action, f64)>) {
        let front = h.fs.frontier(g).expect("live hypotheses are incomplete");
        let legal = h.fs.legal_actions(g);
        let next = self.advance(t, enc, &h.st, &front);
        let heads = self.heads(t, enc, &next, &legal);
        let exts = self
            .distribution(t, enc, &heads, &legal)
            .into_iter()
            .filter_map(|(c, p)| match c {
                Choice::Action(a) if p > 0.0 => Some((a, p.ln())),
                _ => None,
            })
            .collect();
        (next, exts)
    }

    fn step_hyp(
        &self,
        t: &mut Tape,
        g: &Grammar,
        h: &Hyp,
        next: &DecState,
        action: Action,
        logp: f64,
    ) -> Outcome {
        let mut fs = h.fs.clone();
        if fs.apply(&action, g).is_err() {
            return Outcome::Dropped;
        }
        let st = self.commit(t, next.clone(), &action);
        let mut actions = h.actions.clone();
        actions.push(action);
        let score = h.score + logp;
        if let Some(tree) = fs.tree() {
            return match to_concrete(tree, g) {
                Ok(node) => Outcome::Done(Candidate {
                    code: print_js(&node),
                    score,
                    actions,
                    tree: tree.clone(),
                }),
                Err(e) => {
                    log::debug!("discarding illegal hypothesis: {e}");
                    Outcome::Dropped
                }
            };
        }
        if fs.steps() >= MAX_ACTIONS {
            return Outcome::Dropped;
        }
        Outcome::Live(Hyp {
            fs,
            st,
            actions,
            score,
        })
    }

    /// Grammar-constrained beam search. Completed hypotheses whose tree is
    /// not legal JavaScript are dropped and still use up their beam slot.
    pub fn beam_decode(
        &self,
        tokens: &[String],
        g: &Grammar,
        width: usize,
    ) -> Result<Vec<Candidate>, NeuralError> {
        let mut t = Tape::new(&self.params);
        let enc = self.encode(&mut t, tokens)?;
        let st = self.initial_state(&mut t, &enc);
        let mut live = vec![Hyp {
            fs: FrontierState::new(),
            st,
            actions: Vec::new(),
            score: 0.0,
        }];
        let mut finished: Vec<Candidate> = Vec::new();
        while !live.is_empty() && finished.len() < width {
            let mut nexts = Vec::with_capacity(live.len());
            let mut exts = Vec::new();
            for (hi, h) in live.iter().enumerate() {
                let (next, options) = self.expand(&mut t, &enc, h, g);
                nexts.push(next);
                for (order, (action, logp)) in options.into_iter().enumerate() {
                    exts.push(Ext {
                        score: h.score + logp,
                        logp,
                        hyp: hi,
                        order,
                        action,
                    });
                }
            }
            exts.sort_by(rank);
            exts.truncate(width - finished.len());
            let mut survivors = Vec::new();
            for e in exts {
                match self.step_hyp(&mut t, g, &live[e.hyp], &nexts[e.hyp], e.action, e.logp) {
                    Outcome::Live(h) => survivors.push(h),
                    Outcome::Done(c) => finished.push(c),
                    Outcome::Dropped => {}
                }
            }
            live = survivors;
        }
        finished.sort_by(|a, b| b.score.total_cmp(&a.score));
        Ok(finished)
    }

    /// Picks the most probable legal action at every step.
    pub fn greedy_decode(
        &self,
        tokens: &[String],
        g: &Grammar,
    ) -> Result<Option<Candidate>, NeuralError> {
        let mut t = Tape::new(&self.params);
        let enc = self.encode(&mut t, tokens)?;
        let st = self.initial_state(&mut t, &enc);
        let mut h = Hyp {
            fs: FrontierState::new(),
            st,
            actions: Vec::new(),
            score: 0.0,
        };
        loop {
            let (next, options) = self.expand(&mut t, &enc, &h, g);
            let mut best: Option<(Action, f64)> = None;
            for (a, logp) in options {
                if best.as_ref().is_none_or(|(_, b)| logp > *b) {
                    best = Some((a, logp));
                }
            }
            let Some((action, logp)) = best else {
                return Ok(None);
            };
            match self.step_hyp(&mut t, g, &h, &next, action, logp) {
                Outcome::Live(n) => h = n,
                Outcome::Done(c) => return Ok(Some(c)),
                Outcome::Dropped => return Ok(None),
            }
        }
    }
}
