//! Template-instantiated corpora for desk-scale experiments.
//!
//! Identifiers are camelCase compounds of lexicon words and their semantics
//! the concatenated Chinese glosses. Held-out identifiers are word pairs
//! with at least one `RARE` word, so outside the semantic table they never
//! occur in training data.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use subtranx::augment::SemanticEntry;
use subtranx::prep::{Category, Record};

use crate::CliError;

const COMMON: &[(&str, &str)] = &[
    ("user", "用户"),
    ("shop", "店铺"),
    ("price", "价格"),
    ("title", "标题"),
    ("count", "数量"),
    ("time", "时间"),
    ("status", "状态"),
    ("name", "名称"),
    ("pic", "图片"),
    ("url", "链接"),
    ("live", "直播"),
    ("room", "房间"),
    ("coupon", "优惠"),
    ("fee", "费用"),
    ("start", "起步"),
    ("end", "截止"),
    ("desc", "描述"),
    ("order", "订单"),
    ("item", "商品"),
    ("label", "标签"),
    ("text", "文本"),
    ("tip", "提醒"),
    ("total", "总计"),
    ("stock", "库存"),
    ("level", "等级"),
    ("score", "分数"),
    ("city", "城市"),
    ("date", "日期"),
    ("icon", "图标"),
    ("logo", "标志"),
    ("brand", "品牌"),
    ("member", "会员"),
    ("point", "积分"),
    ("gift", "礼品"),
    ("card", "卡片"),
    ("seat", "座位"),
    ("page", "页面"),
    ("rank", "排名"),
    ("nick", "昵称"),
    ("amount", "金额"),
];

const RARE: &[(&str, &str)] = &[
    ("flight", "航班"),
    ("hotel", "酒店"),
    ("movie", "电影"),
    ("weather", "天气"),
    ("game", "游戏"),
    ("pet", "宠物"),
    ("car", "汽车"),
    ("coffee", "咖啡"),
    ("fruit", "水果"),
    ("flower", "鲜花"),
    ("book", "图书"),
    ("sport", "运动"),
    ("health", "健康"),
    ("school", "学校"),
    ("exam", "考试"),
    ("tax", "税务"),
    ("fund", "基金"),
    ("garden", "花园"),
    ("island", "海岛"),
    ("river", "河流"),
];

/// String constants; none is a substring of another or of template text.
const LITERALS: &[&str] = &[
    "暂无",
    "免费",
    "已售罄",
    "春运火车票",
    "满",
    "起用",
    "元",
    "今日特价",
    "限时",
    "包邮",
    "新品",
    "热卖",
    "即将开始",
    "已结束",
    "立即抢购",
    "查看更多",
    "已领取",
    "剩余",
    "件",
    "折",
];

const VERBS: &[&str] = &["展示", "显示", "动态展示"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// Training records per category.
    pub counts: BTreeMap<Category, usize>,
    /// Test records; each uses exactly one held-out identifier. Categories
    /// are drawn in proportion to `counts`.
    pub test: usize,
    pub heldout: usize,
    /// Distinct identifiers the training records draw from.
    pub main_pool: usize,
    pub table_size: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            counts: Category::ALL.iter().map(|&c| (c, 50)).collect(),
            test: 50,
            heldout: 50,
            main_pool: 120,
            table_size: 500,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn uniform(per_category: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            counts: Category::ALL.iter().map(|&c| (c, per_category)).collect(),
            seed,
            ..SynthSpec::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthCorpus {
    pub train: Vec<Record>,
    pub test: Vec<Record>,
    pub table: Vec<SemanticEntry>,
    pub heldout: Vec<String>,
}

#[derive(Debug, Clone)]
struct Ident {
    name: String,
    semantic: String,
}

fn compound(words: &[(&str, &str)]) -> Ident {
    let mut name = String::new();
    let mut semantic = String::new();
    for (i, (w, s)) in words.iter().enumerate() {
        if i == 0 {
            name.push_str(w);
        } else {
            let mut cs = w.chars();
            name.extend(cs.next().map(|c| c.to_ascii_uppercase()));
            name.push_str(cs.as_str());
        }
        semantic.push_str(s);
    }
    Ident { name, semantic }
}

/// Single words and ordered pairs of distinct words.
fn pool(words: &[(&str, &str)]) -> Vec<Ident> {
    let mut out: Vec<Ident> = words.iter().map(|w| compound(&[*w])).collect();
    for a in words {
        for b in words {
            if a != b {
                out.push(compound(&[*a, *b]));
            }
        }
    }
    out
}

/// Ordered pairs of distinct words with at least one from `RARE`.
fn rare_pairs() -> Vec<Ident> {
    let all: Vec<(&str, &str)> = RARE.iter().chain(COMMON).copied().collect();
    let mut out = Vec::new();
    for a in &all {
        for b in &all {
            if a != b && (RARE.contains(a) || RARE.contains(b)) {
                out.push(compound(&[*a, *b]));
            }
        }
    }
    out
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    common: &'a [Ident],
}

impl Gen<'_> {
    fn literal(&mut self) -> &'static str {
        LITERALS.choose(&mut self.rng).copied().unwrap_or("暂无")
    }

    fn ident(&mut self) -> Ident {
        self.common
            .choose(&mut self.rng)
            .cloned()
            .expect("pool is non-empty")
    }

    /// One record of `cat`, with `held` in a random identifier slot.
    fn record(&mut self, cat: Category, held: Option<&Ident>) -> (Record, Vec<String>) {
        let slots = match cat {
            Category::CE => 3,
            _ => 1,
        };
        let at = self.rng.gen_range(0..slots);
        let ids: Vec<Ident> = (0..slots)
            .map(|i| match held {
                Some(h) if i == at => h.clone(),
                _ => self.ident(),
            })
            .collect();
        let verb = VERBS.choose(&mut self.rng).copied().unwrap_or("展示");
        let (desc, code) = match cat {
            Category::OLE => {
                let lit = self.literal();
                (
                    format!("{verb}{}，兜底显示'{lit}'", ids[0].semantic),
                    format!("{{{} || '{lit}';}}", ids[0].name),
                )
            }
            Category::STE => {
                let a = self.literal();
                let mut b = self.literal();
                while b == a {
                    b = self.literal();
                }
                (
                    format!("显示'{a}xx{b}'，xx为{}", ids[0].semantic),
                    format!("{{'{a}' + {} + '{b}';}}", ids[0].name),
                )
            }
            Category::CE => {
                let lit = self.literal();
                (
                    format!(
                        "如果{}为'{lit}'则{verb}{}，否则{verb}{}",
                        ids[0].semantic, ids[1].semantic, ids[2].semantic
                    ),
                    format!(
                        "{{{} === '{lit}' ? {} : {};}}",
                        ids[0].name, ids[1].name, ids[2].name
                    ),
                )
            }
            Category::DPE => {
                let n = self.rng.gen_range(1..=2);
                let digits = ["一", "两"][n - 1];
                (
                    format!("{verb}{}，保留{digits}位小数", ids[0].semantic),
                    format!("{{{}.toFixed({n});}}", ids[0].name),
                )
            }
        };
        let mut r = Record::new(desc, code);
        r.category = Some(cat);
        (r, ids.into_iter().map(|i| i.name).collect())
    }
}

/// Builds training and held-out test records plus a semantic table holding
/// every identifier used in training, all held-out identifiers and random
/// fillers up to `table_size`.
pub fn synthesize(spec: &SynthSpec) -> Result<SynthCorpus, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut common = pool(COMMON);
    let mut rare = rare_pairs();
    if spec.main_pool == 0 || spec.main_pool > common.len() {
        return Err(CliError::Usage(format!(
            "main pool must hold between 1 and {} identifiers",
            common.len()
        )));
    }
    if spec.heldout > rare.len() {
        return Err(CliError::Usage(format!(
            "at most {} held-out identifiers are available",
            rare.len()
        )));
    }
    if spec.test > 0 && spec.heldout == 0 {
        return Err(CliError::Usage(
            "test records need held-out identifiers".into(),
        ));
    }
    rare.shuffle(&mut rng);
    let held: Vec<Ident> = rare[..spec.heldout].to_vec();
    common.shuffle(&mut rng);
    let spare = common.split_off(spec.main_pool);

    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(rng.gen()),
        common: &common,
    };
    let mut train = Vec::new();
    let mut used = BTreeSet::new();
    for (&cat, &n) in &spec.counts {
        for _ in 0..n {
            let (r, ids) = g.record(cat, None);
            used.extend(ids);
            train.push(r);
        }
    }
    train.shuffle(&mut g.rng);
    let mut test = Vec::new();
    for i in 0..spec.test {
        let cat = match spec
            .counts
            .iter()
            .collect::<Vec<_>>()
            .choose_weighted(&mut g.rng, |(_, &n)| n)
        {
            Ok((&c, _)) => c,
            Err(_) => *Category::ALL.choose(&mut g.rng).expect("four categories"),
        };
        let (r, _) = g.record(cat, Some(&held[i % held.len()]));
        test.push(r);
    }

    let semantic_of: BTreeMap<&str, &str> = common
        .iter()
        .map(|i| (i.name.as_str(), i.semantic.as_str()))
        .collect();
    let mut table: Vec<SemanticEntry> = used
        .iter()
        .map(|n| SemanticEntry::new(n.clone(), semantic_of[n.as_str()]))
        .collect();
    table.extend(
        held.iter()
            .map(|i| SemanticEntry::new(&i.name, &i.semantic)),
    );
    if table.len() > spec.table_size {
        return Err(CliError::Usage(format!(
            "table size {} is below the {} identifiers in use",
            spec.table_size,
            table.len()
        )));
    }
    // Rare vocabulary goes first so every held-out subtoken is backed by
    // several table entries, single words included.
    let mut unused: Vec<Ident> = RARE.iter().map(|w| compound(&[*w])).collect();
    unused.extend(rare[spec.heldout..].iter().cloned());
    let mut rest: Vec<Ident> = common
        .iter()
        .filter(|i| !used.contains(&i.name))
        .cloned()
        .collect();
    rest.extend(spare);
    rest.shuffle(&mut g.rng);
    unused.extend(rest);
    let extra = spec.table_size - table.len();
    if extra > unused.len() {
        return Err(CliError::Usage(
            "identifier pool is smaller than the table size".into(),
        ));
    }
    table.extend(
        unused[..extra]
            .iter()
            .map(|i| SemanticEntry::new(&i.name, &i.semantic)),
    );
    table.shuffle(&mut g.rng);

    Ok(SynthCorpus {
        train,
        test,
        table,
        heldout: held.into_iter().map(|i| i.name).collect(),
    })
}

#[cfg(test)]
mod tests {
    use subtranx::jsfront::parse_js;
    use subtranx::prep::{is_placeholder, preprocess_record, tokenize_description};

    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let spec = SynthSpec::default();
        let a = synthesize(&spec).unwrap();
        assert_eq!(a, synthesize(&spec).unwrap());
        assert_eq!(a.train.len(), 200);
        assert_eq!(a.test.len(), 50);
        assert_eq!(a.table.len(), 500);
        let names: BTreeSet<&str> = a.table.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names.len(), 500);
    }

    #[test]
    fn heldout_identifiers_stay_out_of_training() {
        let c = synthesize(&SynthSpec::default()).unwrap();
        let held: BTreeSet<&str> = c.heldout.iter().map(String::as_str).collect();
        for r in &c.train {
            let tree = parse_js(&r.code).unwrap();
            assert!(tree.identifiers().iter().all(|i| !held.contains(*i)));
        }
        for r in &c.test {
            let tree = parse_js(&r.code).unwrap();
            let n = tree
                .identifiers()
                .iter()
                .filter(|i| held.contains(*i))
                .count();
            assert_eq!(n, 1, "{}", r.code);
        }
        let table: BTreeSet<&str> = c.table.iter().map(|e| e.name.as_str()).collect();
        assert!(held.is_subset(&table));
    }

    #[test]
    fn literals_are_fully_replaced() {
        let c = synthesize(&SynthSpec::uniform(30, 3)).unwrap();
        for r in c.train.iter().chain(&c.test) {
            let p = preprocess_record(r).unwrap();
            assert!(p.unmatched.is_empty(), "{r:?}");
            let desc: BTreeSet<String> = tokenize_description(&p.record.description)
                .into_iter()
                .filter(|t| is_placeholder(t))
                .collect();
            assert_eq!(desc.len(), p.record.literals.len(), "{:?}", p.record);
            assert!(!p
                .record
                .code
                .contains(|c: char| ('\u{4e00}'..='\u{9fff}').contains(&c)));
        }
    }

    #[test]
    fn ole_shape() {
        let c = synthesize(&SynthSpec {
            counts: [(Category::OLE, 5)].into_iter().collect(),
            test: 0,
            ..SynthSpec::default()
        })
        .unwrap();
        for r in &c.train {
            let p = preprocess_record(r).unwrap().record;
            let (name, rest) = p.code.split_once(" || ").unwrap();
            assert!(name.starts_with('{'));
            assert_eq!(rest, "'<STR1>';}");
        }
    }

    #[test]
    fn pool_limits() {
        let spec = SynthSpec {
            heldout: 10_000,
            ..SynthSpec::default()
        };
        assert!(synthesize(&spec).is_err());
        let spec = SynthSpec {
            table_size: 10,
            ..SynthSpec::default()
        };
        assert!(synthesize(&spec).is_err());
    }
}
