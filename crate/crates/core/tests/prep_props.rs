mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use subtranx::jsfront::{
    canonicalize, is_identifier, parse_js, print_js, ConcreteNode, LiteralValue,
};
use subtranx::prep::subtoken::{join_subtokens, subtokenize};
use subtranx::prep::{
    is_placeholder, preprocess_record, replace_string_literals, restore_code, restore_description,
    simplify_member_access, tokenize_description, tokenize_description_spans, Record,
};

fn placeholders(tokens: impl IntoIterator<Item = String>) -> BTreeSet<String> {
    tokens.into_iter().filter(|t| is_placeholder(t)).collect()
}

fn code_placeholders(code: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    parse_js(code).unwrap().walk(&mut |n| match n {
        ConcreteNode::Literal {
            value: LiteralValue::String(s),
        } if is_placeholder(s) => {
            out.insert(s.clone());
        }
        ConcreteNode::TemplateLiteral { quasis, .. } => {
            out.extend(quasis.iter().filter(|q| is_placeholder(q)).cloned());
        }
        _ => {}
    });
    out
}

fn string_constants(code: &str) -> Vec<String> {
    let mut out = Vec::new();
    parse_js(code).unwrap().walk(&mut |n| match n {
        ConcreteNode::Literal {
            value: LiteralValue::String(s),
        } => out.push(s.clone()),
        ConcreteNode::TemplateLiteral { quasis, .. } => out.extend(quasis.iter().cloned()),
        _ => {}
    });
    out
}

/// A record whose description quotes some of the code's string constants
/// between Chinese filler text.
fn record(seed: u64) -> Record {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let code = print_js(&common::program(&mut rng, 3));
    let fillers = [
        "显示",
        "如果",
        "兜底",
        "否则展示",
        "为",
        "，",
        " xx ",
        "abc",
    ];
    let mut desc = String::new();
    for c in string_constants(&code) {
        desc.push_str(fillers.choose(&mut rng).unwrap());
        if rand::Rng::gen_bool(&mut rng, 0.8) {
            desc.push_str(&c);
        }
    }
    desc.push_str(fillers.choose(&mut rng).unwrap());
    Record::new(desc, code)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn subtokens_join_back(parts in prop::collection::vec("[a-z][a-z0-9]{0,5}|[A-Z][a-z0-9]{0,4}|[A-Z]{2,3}", 1..5), snake in any::<bool>()) {
        let ident = if snake { parts.join("_").to_lowercase() } else { parts.concat() };
        prop_assume!(is_identifier(&ident) && !ident.contains("__"));
        let pieces = subtokenize(&ident);
        prop_assert!(pieces[1..].iter().all(|p| p.starts_with("##")));
        prop_assert_eq!(join_subtokens(&pieces), ident);
    }

    #[test]
    fn description_tokens_keep_content(text in "[展示图片a-zA-Z0-9_ ，。'‘’<>STR1-9]{0,30}") {
        let tokens = tokenize_description(&text);
        let without_space: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(tokens.concat(), without_space);
        for (tok, span) in tokenize_description_spans(&text) {
            prop_assert_eq!(&text[span], tok);
        }
    }

    #[test]
    fn placeholder_soundness(seed in any::<u64>()) {
        let r = record(seed);
        let rep = replace_string_literals(&r.description, &r.code).unwrap();
        prop_assert_eq!(
            placeholders(tokenize_description(&rep.description)),
            code_placeholders(&rep.code)
        );
        prop_assert_eq!(restore_description(&rep.description, &rep.placeholder_map), r.description.clone());
        prop_assert_eq!(restore_code(&rep.code, &rep.placeholder_map).unwrap(), canonicalize(&r.code).unwrap());
    }

    #[test]
    fn preprocessing_is_idempotent(seed in any::<u64>()) {
        let once = preprocess_record(&record(seed)).unwrap().record;
        let twice = preprocess_record(&once).unwrap().record;
        prop_assert_eq!(&twice, &once);
        prop_assert_eq!(simplify_member_access(&once.code).unwrap(), once.code);
    }
}
