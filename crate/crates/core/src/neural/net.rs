use super::tape::{NodeId, Tape};
use super::{Model, NeuralError};
use crate::grammar::Grammar;
use crate::prep::Vocabulary;
use crate::transit::{Action, Frontier, FrontierState, LegalActions};

const EOT_ID: usize = 2;
const SOS_ID: usize = 3;
const EOS_ID: usize = 4;

pub(super) struct Encoded {
    pub hs: Vec<NodeId>,
    pub tokens: Vec<String>,
    s0: NodeId,
    c0: NodeId,
}

/// Recurrent decoder state of one partial derivation.
#[derive(Debug, Clone)]
pub(super) struct DecState {
    s: NodeId,
    c: NodeId,
    att: NodeId,
    prev: NodeId,
    /// Attentional vector of every step so far, for parent feeding.
    history: Vec<NodeId>,
}

/// Output heads of one step, each a probability vector.
pub(super) enum Heads {
    Composite {
        probs: NodeId,
    },
    Primitive {
        gen: NodeId,
        copy: NodeId,
        gate: NodeId,
    },
}

/// One entry of a step distribution. `Unknown` is the mass the generator
/// puts on `<unk>`, which decoding never emits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Choice {
    Action(Action),
    Unknown,
}

impl Model {
    fn lstm(
        &self,
        t: &mut Tape,
        w: super::ParamId,
        b: super::ParamId,
        x: NodeId,
        h: NodeId,
        c: NodeId,
    ) -> (NodeId, NodeId) {
        let hid = self.config.hidden;
        let xin = t.concat(&[x, h]);
        let z = t.matvec(w, xin);
        let z = t.bias(z, b);
        let i = t.slice(z, 0, hid);
        let i = t.sigmoid(i);
        let f = t.slice(z, hid, hid);
        let f = t.sigmoid(f);
        let g = t.slice(z, 2 * hid, hid);
        let g = t.tanh(g);
        let o = t.slice(z, 3 * hid, hid);
        let o = t.sigmoid(o);
        let keep = t.mul(f, c);
        let write = t.mul(i, g);
        let c2 = t.add(keep, write);
        let tc = t.tanh(c2);
        let h2 = t.mul(o, tc);
        (h2, c2)
    }

    pub(super) fn encode(&self, t: &mut Tape, tokens: &[String]) -> Result<Encoded, NeuralError> {
        if tokens.is_empty() {
            return Err(NeuralError::EmptyInput);
        }
        let ids = &self.ids;
        let hid = self.config.hidden;
        let xs: Vec<NodeId> = tokens
            .iter()
            .map(|tok| t.row(ids.tok_embed, self.vocab.id(tok)))
            .collect();
        let (mut h, mut c) = (t.zeros(hid), t.zeros(hid));
        let mut fw = Vec::with_capacity(xs.len());
        for &x in &xs {
            (h, c) = self.lstm(t, ids.enc_fw_w, ids.enc_fw_b, x, h, c);
            fw.push(h);
        }
        let c_fw = c;
        let (mut h, mut c) = (t.zeros(hid), t.zeros(hid));
        let mut bw = vec![0; xs.len()];
        for (i, &x) in xs.iter().enumerate().rev() {
            (h, c) = self.lstm(t, ids.enc_bw_w, ids.enc_bw_b, x, h, c);
            bw[i] = h;
        }
        let c_bw = c;
        let hs = fw
            .iter()
            .zip(&bw)
            .map(|(&f, &b)| t.concat(&[f, b]))
            .collect();
        let finals = t.concat(&[c_fw, c_bw]);
        let c0 = t.matvec(ids.init_w, finals);
        let c0 = t.bias(c0, ids.init_b);
        let c0 = t.tanh(c0);
        let s0 = t.tanh(c0);
        Ok(Encoded {
            hs,
            tokens: tokens.to_vec(),
            s0,
            c0,
        })
    }

    pub(super) fn initial_state(&self, t: &mut Tape, enc: &Encoded) -> DecState {
        DecState {
            s: enc.s0,
            c: enc.c0,
            att: t.zeros(self.config.hidden),
            prev: t.zeros(self.config.embed),
            history: Vec::new(),
        }
    }

    /// Runs the decoder cell for the step whose frontier is `front` and
    /// returns the state with its new attentional vector (not yet pushed to
    /// the history).
    pub(super) fn advance(
        &self,
        t: &mut Tape,
        enc: &Encoded,
        st: &DecState,
        front: &Frontier,
    ) -> DecState {
        let ids = &self.ids;
        let (field, parent) = match front.parent_step {
            None => (t.zeros(self.config.embed), t.zeros(self.config.hidden)),
            Some(k) => (t.row(ids.field_embed, front.field.0), st.history[k]),
        };
        let x = t.concat(&[st.prev, st.att, field, parent]);
        let (s, c) = self.lstm(t, ids.dec_w, ids.dec_b, x, st.s, st.c);
        let u = t.matvec(ids.att_w, s);
        let scores = t.dots(&enc.hs, u);
        let alpha = t.softmax(scores);
        let ctx = t.weighted_sum(&enc.hs, alpha);
        let joined = t.concat(&[ctx, s]);
        let att = t.matvec(ids.comb_w, joined);
        let att = t.tanh(att);
        DecState {
            s,
            c,
            att,
            prev: st.prev,
            history: st.history.clone(),
        }
    }

    /// Records that `action` was taken from the state `advance` produced.
    pub(super) fn commit(&self, t: &mut Tape, mut st: DecState, action: &Action) -> DecState {
        let ids = &self.ids;
        st.prev = match action {
            Action::ApplyConstr(c) => t.row(ids.ctor_embed, c.0),
            Action::Reduce => t.row(ids.ctor_embed, self.ctors),
            Action::GenSubtoken(v) => t.row(ids.tok_embed, self.vocab.id(v)),
        };
        st.history.push(st.att);
        st
    }

    fn gen_mask(&self, legal: &LegalActions) -> Vec<bool> {
        let v = self.vocab.len();
        let mut mask = vec![true; v + 1];
        let rule = legal.tokens.expect("primitive frontier");
        mask[Vocabulary::PAD_ID] = false;
        mask[EOT_ID] = rule.eot;
        mask[SOS_ID] = rule.sos;
        mask[EOS_ID] = rule.eos;
        mask[v] = legal.reduce;
        mask
    }

    pub(super) fn heads(
        &self,
        t: &mut Tape,
        enc: &Encoded,
        st: &DecState,
        legal: &LegalActions,
    ) -> Heads {
        let ids = &self.ids;
        if legal.tokens.is_none() {
            let mut mask = vec![false; self.ctors + 1];
            for c in &legal.constructors {
                mask[c.0] = true;
            }
            mask[self.ctors] = legal.reduce;
            let q = t.matvec(ids.ac_w, st.att);
            let logits = t.rows_dot(ids.ctor_embed, q, ids.ac_b);
            return Heads::Composite {
                probs: t.masked_softmax(logits, &mask),
            };
        }
        let q = t.matvec(ids.gen_w, st.att);
        let logits = t.rows_dot(ids.gen_out, q, ids.gen_b);
        let gen = t.masked_softmax(logits, &self.gen_mask(legal));
        let u = t.matvec(ids.copy_w, st.att);
        let scores = t.dots(&enc.hs, u);
        let copy = t.softmax(scores);
        let z = t.matvec(ids.gate_w, st.att);
        let z = t.bias(z, ids.gate_b);
        let gate = t.softmax(z);
        Heads::Primitive { gen, copy, gate }
    }

    fn copy_positions(enc: &Encoded, tok: &str) -> Vec<usize> {
        enc.tokens
            .iter()
            .enumerate()
            .filter(|(_, x)| *x == tok)
            .map(|(i, _)| i)
            .collect()
    }

    /// Generator index for `tok`, or `None` when only copying can produce it.
    fn gen_index(&self, tok: &str, copyable: bool) -> Option<usize> {
        match self.vocab.get(tok) {
            Some(i) => Some(i),
            None if copyable => None,
            None => Some(Vocabulary::UNK_ID),
        }
    }

    /// `-log p(action)` under `heads`.
    pub(super) fn action_nll(
        &self,
        t: &mut Tape,
        enc: &Encoded,
        heads: &Heads,
        action: &Action,
    ) -> NodeId {
        match (heads, action) {
            (Heads::Composite { probs }, Action::ApplyConstr(c)) => {
                let p = t.gather_sum(*probs, &[c.0]);
                t.neg_log(p)
            }
            (Heads::Composite { probs }, Action::Reduce) => {
                let p = t.gather_sum(*probs, &[self.ctors]);
                t.neg_log(p)
            }
            (Heads::Primitive { gen, gate, .. }, Action::Reduce) => {
                let pg = t.gather_sum(*gen, &[self.vocab.len()]);
                let g0 = t.gather_sum(*gate, &[0]);
                let p = t.mul(g0, pg);
                t.neg_log(p)
            }
            (Heads::Primitive { gen, copy, gate }, Action::GenSubtoken(tok)) => {
                let positions = Self::copy_positions(enc, tok);
                let mut parts = Vec::new();
                if let Some(i) = self.gen_index(tok, !positions.is_empty()) {
                    let pg = t.gather_sum(*gen, &[i]);
                    let g0 = t.gather_sum(*gate, &[0]);
                    parts.push(t.mul(g0, pg));
                }
                if !positions.is_empty() {
                    let pc = t.gather_sum(*copy, &positions);
                    let g1 = t.gather_sum(*gate, &[1]);
                    parts.push(t.mul(g1, pc));
                }
                let p = if parts.len() == 1 {
                    parts[0]
                } else {
                    t.sum(&parts)
                };
                t.neg_log(p)
            }
            (Heads::Composite { .. }, Action::GenSubtoken(_))
            | (Heads::Primitive { .. }, Action::ApplyConstr(_)) => {
                unreachable!("action kind was checked against the legal set")
            }
        }
    }

    /// Every legal outcome of one step with its probability, in a fixed
    /// order: constructors by index then `Reduce`; or vocabulary entries by
    /// index, `Reduce`, then out-of-vocabulary copies by first position.
    pub(super) fn distribution(
        &self,
        t: &Tape,
        enc: &Encoded,
        heads: &Heads,
        legal: &LegalActions,
    ) -> Vec<(Choice, f64)> {
        match heads {
            Heads::Composite { probs } => {
                let p = t.value(*probs);
                let mut out: Vec<(Choice, f64)> = legal
                    .constructors
                    .iter()
                    .map(|c| (Choice::Action(Action::ApplyConstr(*c)), p[c.0]))
                    .collect();
                if legal.reduce {
                    out.push((Choice::Action(Action::Reduce), p[self.ctors]));
                }
                out
            }
            Heads::Primitive { gen, copy, gate } => {
                let (pg, pc, gv) = (t.value(*gen), t.value(*copy), t.value(*gate));
                let v = self.vocab.len();
                let mut copy_in_vocab = vec![0.0; v];
                let mut oov: Vec<(&str, f64)> = Vec::new();
                for (i, tok) in enc.tokens.iter().enumerate() {
                    match self.vocab.get(tok) {
                        Some(j) => copy_in_vocab[j] += pc[i],
                        None => match oov.iter_mut().find(|(s, _)| *s == tok) {
                            Some(e) => e.1 += pc[i],
                            None => oov.push((tok, pc[i])),
                        },
                    }
                }
                let mask = self.gen_mask(legal);
                let mut out = Vec::new();
                for j in 0..v {
                    if !mask[j] {
                        continue;
                    }
                    let mut p = gv[0] * pg[j];
                    if copy_in_vocab[j] > 0.0 {
                        p += gv[1] * copy_in_vocab[j];
                    }
                    let choice = if j == Vocabulary::UNK_ID {
                        Choice::Unknown
                    } else {
                        Choice::Action(Action::GenSubtoken(self.vocab.token(j).to_string()))
                    };
                    out.push((choice, p));
                }
                if legal.reduce {
                    out.push((Choice::Action(Action::Reduce), gv[0] * pg[v]));
                }
                for (tok, c) in oov {
                    out.push((
                        Choice::Action(Action::GenSubtoken(tok.to_string())),
                        gv[1] * c,
                    ));
                }
                out
            }
        }
    }

    /// Teacher-forced negative log-likelihood of `actions`; returns the
    /// scalar loss node.
    pub(super) fn sequence_nll(
        &self,
        t: &mut Tape,
        tokens: &[String],
        actions: &[Action],
        g: &Grammar,
    ) -> Result<NodeId, NeuralError> {
        let enc = self.encode(t, tokens)?;
        let mut st = self.initial_state(t, &enc);
        let mut fs = FrontierState::new();
        let mut losses = Vec::with_capacity(actions.len());
        for a in actions {
            let front =
                fs.frontier(g)
                    .ok_or(crate::transit::TransitError::IncompleteDerivation(
                        fs.steps(),
                    ))?;
            let legal = fs.legal_actions(g);
            fs.apply(a, g)?;
            let next = self.advance(t, &enc, &st, &front);
            let heads = self.heads(t, &enc, &next, &legal);
            losses.push(self.action_nll(t, &enc, &heads, a));
            st = self.commit(t, next, a);
        }
        if !fs.is_complete() {
            return Err(crate::transit::TransitError::IncompleteDerivation(actions.len()).into());
        }
        Ok(t.sum(&losses))
    }

    /// Distribution of the action following `prefix`.
    pub fn next_distribution(
        &self,
        tokens: &[String],
        prefix: &[Action],
        g: &Grammar,
    ) -> Result<Vec<(Choice, f64)>, NeuralError> {
        let mut t = Tape::new(&self.params);
        let enc = self.encode(&mut t, tokens)?;
        let mut st = self.initial_state(&mut t, &enc);
        let mut fs = FrontierState::new();
        for a in prefix {
            let front =
                fs.frontier(g)
                    .ok_or(crate::transit::TransitError::IncompleteDerivation(
                        fs.steps(),
                    ))?;
            fs.apply(a, g)?;
            let next = self.advance(&mut t, &enc, &st, &front);
            st = self.commit(&mut t, next, a);
        }
        let Some(front) = fs.frontier(g) else {
            return Ok(Vec::new());
        };
        let legal = fs.legal_actions(g);
        let next = self.advance(&mut t, &enc, &st, &front);
        let heads = self.heads(&mut t, &enc, &next, &legal);
        Ok(self.distribution(&t, &enc, &heads, &legal))
    }

    /// `log p(actions | tokens)` by teacher forcing.
    pub fn score_actions(
        &self,
        tokens: &[String],
        actions: &[Action],
        g: &Grammar,
    ) -> Result<f64, NeuralError> {
        let mut t = Tape::new(&self.params);
        let loss = self.sequence_nll(&mut t, tokens, actions, g)?;
        Ok(-t.scalar(loss))
    }

    /// Teacher-forced loss and its parameter gradients, added to `grads`.
    pub fn loss_and_grads(
        &self,
        tokens: &[String],
        actions: &[Action],
        g: &Grammar,
        grads: &mut super::tape::Grads,
    ) -> Result<f64, NeuralError> {
        let mut t = Tape::new(&self.params);
        let loss = self.sequence_nll(&mut t, tokens, actions, g)?;
        t.backward(loss, grads);
        Ok(t.scalar(loss))
    }
}
