//! Exact match, BLEU, edit similarity and variable-usage scores.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsfront::{self, parse_js};
use crate::prep::Category;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("{0} predictions for {1} references")]
    LengthMismatch(usize, usize),
}

fn canonical(code: &str) -> Option<String> {
    jsfront::canonicalize(code).ok()
}

/// `(top1, topk)` over the first `k` candidates, compared in canonical form.
/// Unparseable candidates never match.
pub fn exact_match<S: AsRef<str>>(candidates: &[S], reference: &str, k: usize) -> (bool, bool) {
    let Some(reference) = canonical(reference) else {
        return (false, false);
    };
    let hits: Vec<bool> = candidates
        .iter()
        .take(k)
        .map(|c| canonical(c.as_ref()).as_deref() == Some(reference.as_str()))
        .collect();
    (hits.first().copied().unwrap_or(false), hits.contains(&true))
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU-4 with uniform weights and no smoothing, as a percentage.
pub fn corpus_bleu(
    predictions: &[Vec<String>],
    references: &[Vec<String>],
) -> Result<f64, MetricsError> {
    if predictions.len() != references.len() {
        return Err(MetricsError::LengthMismatch(
            predictions.len(),
            references.len(),
        ));
    }
    if predictions.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut pred_len, mut ref_len) = (0usize, 0usize);
    for (p, r) in predictions.iter().zip(references) {
        pred_len += p.len();
        ref_len += r.len();
        for n in 1..=4 {
            let rc = ngram_counts(r, n);
            for (gram, c) in ngram_counts(p, n) {
                matched[n - 1] += c.min(rc.get(gram).copied().unwrap_or(0));
            }
            total[n - 1] += p.len().saturating_sub(n - 1);
        }
    }
    if matched.contains(&0) {
        return Ok(0.0);
    }
    let log_precision: f64 = (0..4)
        .map(|i| (matched[i] as f64 / total[i] as f64).ln())
        .sum::<f64>()
        / 4.0;
    let bp = if pred_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / pred_len as f64).exp()
    };
    Ok(100.0 * bp * log_precision.exp())
}

/// Character-level Levenshtein distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `100 * (1 - distance / max_len)`; two empty strings score 100.
pub fn edit_similarity(prediction: &str, reference: &str) -> f64 {
    let longest = prediction.chars().count().max(reference.chars().count());
    if longest == 0 {
        return 100.0;
    }
    100.0 * (1.0 - levenshtein(prediction, reference) as f64 / longest as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl std::ops::AddAssign for VarCounts {
    fn add_assign(&mut self, o: VarCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

impl VarCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn identifier_bag(code: &str) -> Option<HashMap<String, usize>> {
    let tree = parse_js(code).ok()?;
    let mut bag = HashMap::new();
    for name in tree.identifiers() {
        *bag.entry(name.to_string()).or_insert(0) += 1;
    }
    Some(bag)
}

/// Multiset overlap of the identifier leaves of `prediction` and
/// `reference`.
pub fn variable_usage(prediction: Option<&str>, reference: &str) -> VarCounts {
    let reference = identifier_bag(reference).unwrap_or_default();
    let ref_total: usize = reference.values().sum();
    let Some(pred) = prediction.and_then(identifier_bag) else {
        return VarCounts {
            tp: 0,
            fp: 0,
            fn_: ref_total,
        };
    };
    let tp: usize = pred
        .iter()
        .map(|(name, c)| (*c).min(reference.get(name).copied().unwrap_or(0)))
        .sum();
    VarCounts {
        tp,
        fp: pred.values().sum::<usize>() - tp,
        fn_: ref_total - tp,
    }
}

/// One scored test example: ranked candidates against a reference.
#[derive(Debug, Clone)]
pub struct EvalItem {
    pub candidates: Vec<String>,
    pub reference: String,
    pub category: Option<Category>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub count: usize,
    pub acc_1: f64,
    pub acc_k: f64,
    pub bleu: f64,
    pub edit_sim: f64,
    pub var_precision: f64,
    pub var_recall: f64,
    pub var_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    #[serde(flatten)]
    pub overall: Scores,
    pub per_category: BTreeMap<Category, Scores>,
}

fn code_tokens(code: &str) -> Vec<String> {
    jsfront::tokenize(code)
        .unwrap_or_else(|_| code.split_whitespace().map(str::to_string).collect())
}

fn score(items: &[&EvalItem], k: usize) -> Scores {
    let mut top1 = 0;
    let mut topk = 0;
    let mut preds = Vec::new();
    let mut refs = Vec::new();
    let mut edit = 0.0;
    let mut vars = VarCounts::default();
    for item in items {
        let (a, b) = exact_match(&item.candidates, &item.reference, k);
        top1 += usize::from(a);
        topk += usize::from(b);
        let reference = canonical(&item.reference).unwrap_or_else(|| item.reference.clone());
        let best = item
            .candidates
            .first()
            .map(|c| canonical(c).unwrap_or_else(|| c.clone()));
        let best_text = best.clone().unwrap_or_default();
        preds.push(code_tokens(&best_text));
        refs.push(code_tokens(&reference));
        edit += edit_similarity(&best_text, &reference);
        vars += variable_usage(best.as_deref(), &reference);
    }
    let n = items.len().max(1) as f64;
    Scores {
        count: items.len(),
        acc_1: 100.0 * top1 as f64 / n,
        acc_k: 100.0 * topk as f64 / n,
        bleu: corpus_bleu(&preds, &refs).unwrap_or(0.0),
        edit_sim: edit / n,
        var_precision: 100.0 * vars.precision(),
        var_recall: 100.0 * vars.recall(),
        var_f1: 100.0 * vars.f1(),
    }
}

/// Scores `items` overall and per category; `k` is the top-k cutoff.
pub fn evaluate(items: &[EvalItem], k: usize) -> Result<EvalReport, MetricsError> {
    if items.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let all: Vec<&EvalItem> = items.iter().collect();
    let mut per_category = BTreeMap::new();
    for cat in Category::ALL {
        let subset: Vec<&EvalItem> = items.iter().filter(|i| i.category == Some(cat)).collect();
        if !subset.is_empty() {
            per_category.insert(cat, score(&subset, k));
        }
    }
    Ok(EvalReport {
        k,
        overall: score(&all, k),
        per_category,
    })
}

impl EvalReport {
    /// Plain-text table, one row for the whole set and one per category.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let acc_k = format!("Acc-{}", self.k);
        let _ = writeln!(
            out,
            "{:<8} {:>6} {:>7} {:>7} {:>7} {:>8} {:>7} {:>7} {:>7}",
            "split", "n", "Acc-1", acc_k, "BLEU", "EditSim", "VarP", "VarR", "VarF1"
        );
        let mut row = |name: &str, s: &Scores| {
            let _ = writeln!(
                out,
                "{:<8} {:>6} {:>7.2} {:>7.2} {:>7.2} {:>8.2} {:>7.2} {:>7.2} {:>7.2}",
                name,
                s.count,
                s.acc_1,
                s.acc_k,
                s.bleu,
                s.edit_sim,
                s.var_precision,
                s.var_recall,
                s.var_f1
            );
        };
        row("all", &self.overall);
        for (cat, s) in &self.per_category {
            row(cat.as_str(), s);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn exact_match_cases() {
        assert_eq!(exact_match(&["{a || b;}"], "{a||b}", 5), (true, true));
        assert_eq!(exact_match(&["{b || a;}"], "{a || b;}", 5), (false, false));
        let c = ["x", "y", "{a;}", "z", "w"];
        assert_eq!(exact_match(&c, "a", 5), (false, true));
        assert_eq!(exact_match(&c, "a", 2), (false, false));
        assert_eq!(exact_match(&["{a ||"], "{a;}", 5), (false, false));
        assert_eq!(exact_match::<&str>(&[], "{a;}", 5), (false, false));
    }

    #[test]
    fn bleu_brevity_penalty() {
        let b = corpus_bleu(&[toks("a b c d")], &[toks("a b c d e")]).unwrap();
        assert!((b - 100.0 * (1.0f64 - 5.0 / 4.0).exp()).abs() < 1e-9);
        assert!((b - 77.88).abs() < 0.01);
        assert_eq!(
            corpus_bleu(&[toks("a b c d")], &[toks("a b c d")]).unwrap(),
            100.0
        );
        assert_eq!(
            corpus_bleu(&[toks("a b c")], &[toks("a b c")]).unwrap(),
            0.0
        );
        assert_eq!(corpus_bleu(&[], &[]), Err(MetricsError::EmptyCorpus));
    }

    #[test]
    fn edit_similarity_cases() {
        assert_eq!(edit_similarity("abc", "abc"), 100.0);
        assert!((edit_similarity("abc", "abd") - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(edit_similarity("", "abc"), 0.0);
        assert_eq!(edit_similarity("", ""), 100.0);
        assert_eq!(levenshtein("展示", "显示"), 1);
    }

    #[test]
    fn variable_usage_cases() {
        assert_eq!(
            variable_usage(Some("{picUrl;}"), "{picUrl;}"),
            VarCounts {
                tp: 1,
                fp: 0,
                fn_: 0
            }
        );
        assert_eq!(
            variable_usage(
                Some("{downTitle || '<STR1>';}"),
                "{trainHeadTitle || '<STR1>';}"
            ),
            VarCounts {
                tp: 0,
                fp: 1,
                fn_: 1
            }
        );
        assert_eq!(
            variable_usage(Some("{a + a;}"), "{a;}"),
            VarCounts {
                tp: 1,
                fp: 1,
                fn_: 0
            }
        );
        assert_eq!(
            variable_usage(Some("{a +"), "{a + b;}"),
            VarCounts {
                tp: 0,
                fp: 0,
                fn_: 2
            }
        );
        assert_eq!(
            variable_usage(Some("{price.split('.')[1];}"), "{price.split('.')[1];}").tp,
            2
        );
    }

    #[test]
    fn f1_conventions() {
        assert_eq!(VarCounts::default().f1(), 0.0);
        let c = VarCounts {
            tp: 1,
            fp: 1,
            fn_: 3,
        };
        let (p, r) = (c.precision(), c.recall());
        assert!((c.f1() - 2.0 * p * r / (p + r)).abs() < 1e-12);
    }

    #[test]
    fn perfect_report() {
        let items: Vec<EvalItem> = ["{a || '<STR1>';}", "{x ? y : z;}"]
            .iter()
            .zip([Category::OLE, Category::CE])
            .map(|(c, cat)| EvalItem {
                candidates: vec![c.to_string()],
                reference: c.to_string(),
                category: Some(cat),
            })
            .collect();
        let r = evaluate(&items, 5).unwrap();
        assert_eq!(r.overall.acc_1, 100.0);
        assert_eq!(r.overall.bleu, 100.0);
        assert_eq!(r.overall.edit_sim, 100.0);
        assert_eq!(r.per_category.len(), 2);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["acc_1"], 100.0);
        assert!(json["per_category"]["CE"].is_object());
        assert!(r.to_table().contains("Acc-5"));
    }
}
