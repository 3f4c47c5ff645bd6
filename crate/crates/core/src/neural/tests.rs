use rand::Rng;

use super::*;
use crate::augment::Schedule;
use crate::jsfront::{parse_js, to_abstract};
use crate::prep::{build_vocab, Example, Record};
use crate::transit::{oracle_actions, Action};

fn example(desc: &str, code: &str) -> Example {
    Example::from_record(&Record::new(desc, code))
}

fn actions(code: &str, g: &Grammar) -> Vec<Action> {
    oracle_actions(&to_abstract(&parse_js(code).unwrap(), g).unwrap(), g, true).unwrap()
}

fn tiny() -> (Grammar, Model) {
    let g = Grammar::javascript();
    let vocab = build_vocab(&[example("展示a xx", "{pic || '<STR1>';}")], 1, &g, true);
    assert_eq!(vocab.len(), 20);
    let m = Model::new(
        NetConfig {
            embed: 4,
            hidden: 8,
        },
        vocab,
        &g,
        true,
        7,
    );
    (g, m)
}

/// Instances covering constructor steps, generated and copied subtokens,
/// `<unk>` targets, string runs and `Reduce` in both head kinds.
fn tiny_data(g: &Grammar) -> Vec<(Vec<String>, Vec<Action>)> {
    [
        ("展示a xx", "{pic || '<STR1>';}"),
        ("展示 zzz", "{zzz;}"),
        ("a", "{{qq;} break;}"),
        ("xx a", "{f(null, xx);}"),
    ]
    .iter()
    .map(|(d, c)| (crate::prep::tokenize_description(d), actions(c, g)))
    .collect()
}

#[test]
fn gradients_match_finite_differences() {
    let (g, mut m) = tiny();
    // Fresh parameters leave attention nearly uniform and its gradients
    // down at the finite-difference noise floor.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in &mut m.params.params {
        p.data
            .iter_mut()
            .for_each(|x| *x = rng.gen_range(-0.5..0.5));
    }
    let data = tiny_data(&g);
    let total = |m: &Model| -> f64 {
        data.iter()
            .map(|(t, a)| -m.score_actions(t, a, &g).unwrap())
            .sum()
    };
    let mut grads = m.params.zero_grads();
    for (t, a) in &data {
        m.loss_and_grads(t, a, &g, &mut grads).unwrap();
    }
    let eps = 1e-5;
    for k in 0..m.params.params.len() {
        let mut diff = 0.0;
        let mut scale = 0.0f64;
        for i in 0..m.params.params[k].data.len() {
            let orig = m.params.params[k].data[i];
            m.params.params[k].data[i] = orig + eps;
            let up = total(&m);
            m.params.params[k].data[i] = orig - eps;
            let down = total(&m);
            m.params.params[k].data[i] = orig;
            let num = (up - down) / (2.0 * eps);
            let ana = grads.g[k][i];
            diff += (num - ana).powi(2);
            scale = scale.max(num.abs()).max(ana.abs());
        }
        let name = &m.params.params[k].name;
        let rel = diff.sqrt() / scale.max(1e-12);
        assert!(rel < 1e-3, "{name}: relative error {rel}");
    }
}

#[test]
fn step_distributions_are_normalized() {
    let (g, m) = tiny();
    for (tokens, acts) in tiny_data(&g) {
        for k in 0..acts.len() {
            let dist = m.next_distribution(&tokens, &acts[..k], &g).unwrap();
            let sum: f64 = dist.iter().map(|(_, p)| p).sum();
            assert!((sum - 1.0).abs() < 1e-9, "step {k}: {sum}");
            assert!(dist
                .iter()
                .any(|(c, _)| *c == Choice::Action(acts[k].clone()) || *c == Choice::Unknown));
        }
    }
}

#[test]
fn constructor_steps_only_offer_legal_constructors() {
    let (g, m) = tiny();
    let tokens = vec!["a".to_string()];
    let acts = actions("{a;}", &g);
    let dist = m.next_distribution(&tokens, &acts[..2], &g).unwrap();
    let expr = g.ctor_ids_for_type("expr").unwrap();
    assert_eq!(dist.len(), expr.len());
    for (c, _) in dist {
        match c {
            Choice::Action(Action::ApplyConstr(id)) => assert!(expr.contains(&id)),
            other => panic!("unexpected {other:?}"),
        }
    }
}

#[test]
fn memorizes_one_example() {
    let g = Grammar::javascript();
    let ex = example("展示图片链接", "{picUrl;}");
    let vocab = build_vocab(std::slice::from_ref(&ex), 1, &g, true);
    let m = Model::new(
        NetConfig {
            embed: 16,
            hidden: 16,
        },
        vocab,
        &g,
        true,
        1,
    );
    let cfg = TrainConfig {
        batch_size: 1,
        lr: 0.01,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train(m, &Schedule::single(vec![ex.clone()], 200), &[], &g, &cfg).unwrap();
    let last = out.curve.last().unwrap().train_nll;
    assert!(last < 0.01, "final loss {last}");
    let best = out.model.beam_decode(&ex.description, &g, 5).unwrap();
    assert_eq!(best[0].code, "{picUrl;}");
}

#[test]
fn initial_loss_near_uniform_baseline() {
    let (g, m) = tiny();
    for (tokens, acts) in tiny_data(&g) {
        let mut fs = crate::transit::FrontierState::new();
        let mut baseline = 0.0;
        for a in &acts {
            let legal = fs.legal_actions(&g);
            let p = match (legal.tokens, a) {
                (None, _) => 1.0 / (legal.constructors.len() + usize::from(legal.reduce)) as f64,
                (Some(rule), a) => {
                    let gen_size = m.vocab.len() - 4
                        + usize::from(rule.eot)
                        + usize::from(rule.sos)
                        + usize::from(rule.eos)
                        + usize::from(legal.reduce);
                    let copies = match a {
                        Action::GenSubtoken(s) => tokens.iter().filter(|t| *t == s).count(),
                        _ => 0,
                    };
                    let in_vocab = match a {
                        Action::GenSubtoken(s) => m.vocab.get(s).is_some() || copies == 0,
                        _ => true,
                    };
                    let gen = if in_vocab { 0.5 / gen_size as f64 } else { 0.0 };
                    gen + 0.5 * copies as f64 / tokens.len() as f64
                }
            };
            baseline -= p.ln();
            fs.apply(a, &g).unwrap();
        }
        let nll = -m.score_actions(&tokens, &acts, &g).unwrap();
        assert!(
            (nll - baseline).abs() <= 0.2 * baseline,
            "initial NLL {nll} vs baseline {baseline}"
        );
    }
}

#[test]
fn copy_path_supplies_oov_tokens() {
    let (g, mut m) = tiny();
    let tokens: Vec<String> = ["展", "示", "trainHead"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let acts = actions("{trainHead;}", &g);
    // Subtoken splitting would break `trainHead`; feed it as one piece.
    let prefix: Vec<Action> = acts[..3].to_vec();
    let target = Choice::Action(Action::gen("trainHead"));
    let prob = |m: &Model| {
        m.next_distribution(&tokens, &prefix, &g)
            .unwrap()
            .into_iter()
            .find(|(c, _)| *c == target)
            .map_or(0.0, |(_, p)| p)
    };
    let mixed = prob(&m);
    assert!(mixed > 0.0);
    let gate = m.params.find("gate_b").unwrap();
    m.params.get_mut(gate).data = vec![-50.0, 50.0];
    let copy_only = prob(&m);
    assert!(copy_only > mixed);
    m.params.get_mut(gate).data = vec![50.0, -50.0];
    assert!(prob(&m) < 1e-12);
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let (g, m) = tiny();
    let mut buf = Vec::new();
    m.save(&mut buf, serde_json::json!({"seed": 7})).unwrap();
    let (back, run) = Model::load(&buf[..]).unwrap();
    assert_eq!(run["seed"], 7);
    assert_eq!(back.params, m.params);
    let (tokens, acts) = &tiny_data(&g)[0];
    assert_eq!(
        back.score_actions(tokens, acts, &g).unwrap().to_bits(),
        m.score_actions(tokens, acts, &g).unwrap().to_bits()
    );
    let mut other = Grammar::javascript();
    other = crate::grammar::parse_asdl(&other.to_asdl().replace("TypeOf", "Void")).unwrap();
    assert!(matches!(
        back.check_grammar(&other),
        Err(NeuralError::GrammarMismatch)
    ));
    assert!(Model::load(&b"{}"[..]).is_err());
}

#[test]
fn beam_invariants_on_untrained_model() {
    let (g, m) = tiny();
    let tokens = crate::prep::tokenize_description("展示a xx");
    let beam = m.beam_decode(&tokens, &g, 5).unwrap();
    assert!(beam.len() <= 5);
    for w in beam.windows(2) {
        assert!(w[0].score >= w[1].score);
    }
    for c in &beam {
        let s = m.score_actions(&tokens, &c.actions, &g).unwrap();
        assert!((s - c.score).abs() < 1e-9);
    }
    let greedy = m.greedy_decode(&tokens, &g).unwrap();
    let one = m.beam_decode(&tokens, &g, 1).unwrap();
    assert_eq!(greedy.map(|c| c.code), one.first().map(|c| c.code.clone()));
    assert!(matches!(
        m.beam_decode(&[], &g, 5),
        Err(NeuralError::EmptyInput)
    ));
}
