mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use subtranx::grammar::Grammar;
use subtranx::jsfront::{canonicalize, parse_js, print_js, to_abstract, to_concrete};
use subtranx::transit::{oracle_actions, replay};

fn check(code: &str, g: &Grammar) -> Result<(), String> {
    let tree = parse_js(code).map_err(|e| format!("{code}: {e}"))?;
    let abs = to_abstract(&tree, g).map_err(|e| format!("{code}: {e}"))?;
    for split in [true, false] {
        let actions = oracle_actions(&abs, g, split).map_err(|e| format!("{code}: {e}"))?;
        let back = replay(&actions, g).map_err(|e| format!("{code}: {e}"))?;
        if back != abs {
            return Err(format!("{code}: replay differs (split {split})"));
        }
        let conc = to_concrete(&back, g).map_err(|e| format!("{code}: {e}"))?;
        if conc != tree {
            return Err(format!("{code}: concrete tree differs"));
        }
        let printed = print_js(&conc);
        if printed != code {
            return Err(format!("printed `{printed}`, expected `{code}`"));
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_programs_reach_a_fixed_point(seed in any::<u64>(), depth in 0usize..5) {
        let g = Grammar::javascript();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = common::program(&mut rng, depth);
        let code = print_js(&tree);
        prop_assert_eq!(parse_js(&code).map_err(|e| TestCaseError::fail(e.to_string()))?, tree, "{}", code);
        check(&code, &g).map_err(TestCaseError::fail)?;
        prop_assert_eq!(canonicalize(&code).unwrap(), code);
    }

    #[test]
    fn canonicalization_is_idempotent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let code = print_js(&common::program(&mut rng, 3));
        let spaced = code.replace(' ', "  ").replace('\'', "\"");
        if let Ok(once) = canonicalize(&spaced) {
            prop_assert_eq!(canonicalize(&once).unwrap(), once);
        }
    }
}

#[test]
fn worked_examples_round_trip() {
    let g = Grammar::javascript();
    let sources = [
        "{contentType === 'live' ? liveTimeDesc : marketingTimeDesc}",
        "{ user && user.nick || \" \" }",
        "{`优惠券已抵扣${discountPrice}元`}",
        "{data.coinShowPrice.split(\".\")[1]}",
        "{isLucky?\"恭喜你押中啦\":\"很遗憾未押中\"}",
        "{'满' + startFee + '使用'}",
        "{'<STR1>' + startFee + '<STR2>'}",
        "{isLucky ? '<STR1>' : '<STR2>'}",
        "{trainHeadTitle || '春运火车票'}",
        "{downTitle || '春运火车票'}",
        "{trainHeadTitle || '<STR1>';}",
        "{picUrl;}",
    ];
    for src in sources {
        let canonical = canonicalize(src).unwrap();
        check(&canonical, &g).unwrap();
    }
}
