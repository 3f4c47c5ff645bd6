use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn subtranx(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subtranx"))
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_lines(path: &Path, lines: &[Value]) {
    let text: String = lines.iter().map(|v| v.to_string() + "\n").collect();
    std::fs::write(path, text).unwrap();
}

fn record(desc: &str, code: &str) -> Value {
    serde_json::json!({ "description": desc, "code": code })
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&subtranx(&[], d)), 1);
    assert_eq!(code(&subtranx(&["--help"], d)), 0);
    assert_eq!(code(&subtranx(&["train", "--out", "m", "--bogus"], d)), 1);
    // Missing corpus path is a usage error; a missing file is a data error.
    assert_eq!(code(&subtranx(&["train", "--out", "m"], d)), 1);
    assert_eq!(
        code(&subtranx(
            &["preprocess", "--input", "nope.jsonl", "--out", "o.jsonl"],
            d
        )),
        2
    );
    assert_eq!(
        code(&subtranx(&["--lr", "-1", "roundtrip", "--input", "x"], d)),
        1
    );
    std::fs::write(d.join("bad.json"), "{}").unwrap();
    assert_eq!(
        code(&subtranx(
            &["generate", "--checkpoint", "bad.json", "--description", "x"],
            d
        )),
        2
    );
    write_lines(&d.join("broken.jsonl"), &[record("x", "{a +;}")]);
    let o = subtranx(&["roundtrip", "--input", "broken.jsonl"], d);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("0/1 passed"));
}

#[test]
fn preprocess_reports_drops_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_lines(
        &d.join("raw.jsonl"),
        &[
            record(
                "展示直播时间描述，兜底显示'春运火车票'",
                "{ liveTimeDesc || \"春运火车票\" }",
            ),
            record("坏的", "{a ==== b}"),
            record("展示商品价格保留两位小数", "{item.price.toFixed(2)}"),
        ],
    );
    let o = subtranx(
        &["preprocess", "--input", "raw.jsonl", "--out", "once.jsonl"],
        d,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&d.join("once.jsonl.report.json"));
    assert_eq!(report["read"], 3);
    assert_eq!(report["kept"], 2);
    assert_eq!(report["dropped"][0]["line"], 2);
    let once = std::fs::read_to_string(d.join("once.jsonl")).unwrap();
    assert!(once.contains("{liveTimeDesc || '<STR1>';}"), "{once}");
    assert!(once.contains("{price.toFixed(2);}"), "{once}");
    assert_eq!(
        code(&subtranx(
            &[
                "preprocess",
                "--input",
                "once.jsonl",
                "--out",
                "twice.jsonl"
            ],
            d
        )),
        0
    );
    assert_eq!(
        once,
        std::fs::read_to_string(d.join("twice.jsonl")).unwrap()
    );
    assert!(d.join("once.jsonl.manifest.json").exists());
}

#[test]
fn roundtrip_worked_examples() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_lines(
        &d.join("t2.jsonl"),
        &[
            record(
                "a",
                "{contentType === 'live' ? liveTimeDesc : marketingTimeDesc}",
            ),
            record("b", "{ user && user.nick || \" \" }"),
            record("c", "{`优惠券已抵扣${discountPrice}元`}"),
            record("d", "{data.coinShowPrice.split(\".\")[1]}"),
        ],
    );
    let o = subtranx(&["roundtrip", "--input", "t2.jsonl"], d);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).ends_with("4/4 passed\n"));
    assert!(d.join("t2.jsonl.roundtrip.json").exists());
}

#[test]
fn synth_corpus_round_trips_and_manifest_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "synth",
        "--out-dir",
        "syn",
        "--per-category",
        "50",
        "--test-count",
        "10",
        "--heldout",
        "10",
    ];
    assert_eq!(code(&subtranx(&args, d)), 0);
    let first = std::fs::read(d.join("syn/manifest.json")).unwrap();
    let train = std::fs::read(d.join("syn/train.jsonl")).unwrap();
    assert_eq!(code(&subtranx(&args, d)), 0);
    assert_eq!(first, std::fs::read(d.join("syn/manifest.json")).unwrap());
    assert_eq!(train, std::fs::read(d.join("syn/train.jsonl")).unwrap());
    let o = subtranx(&["roundtrip", "--input", "syn/train.jsonl"], d);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).ends_with("200/200 passed\n"));
    let held = std::fs::read_to_string(d.join("syn/heldout.txt")).unwrap();
    assert_eq!(held.lines().count(), 10);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.toml"), "hidden = 8\nembed = 4\nseed = 3\n").unwrap();
    let o = subtranx(
        &[
            "--config",
            "run.toml",
            "--hidden",
            "6",
            "synth",
            "--out-dir",
            "s",
            "--per-category",
            "2",
        ],
        d,
    );
    assert_eq!(code(&o), 0);
    let m = read_json(&d.join("s/manifest.json"));
    assert_eq!(m["config"]["hidden"], 6);
    assert_eq!(m["config"]["embed"], 4);
    assert_eq!(m["seed"], 3);
    std::fs::write(d.join("bad.toml"), "hiden = 8\n").unwrap();
    assert_eq!(
        code(&subtranx(
            &["--config", "bad.toml", "roundtrip", "--input", "x"],
            d
        )),
        1
    );
}

#[test]
fn train_generate_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_lines(&d.join("data.jsonl"), &[record("展示图片链接", "{picUrl}")]);
    let common = [
        "--train",
        "data.jsonl",
        "--test",
        "data.jsonl",
        "--hidden",
        "16",
        "--embed",
        "16",
    ];
    let train = |out: &str| {
        let mut args = common.to_vec();
        args.extend([
            "--epochs",
            "200",
            "--lr",
            "0.01",
            "--batch-size",
            "1",
            "--seed",
            "1",
            "train",
            "--out",
            out,
        ]);
        subtranx(&args, d)
    };
    let o = train("m");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["model.json", "loss.csv", "manifest.json"] {
        assert!(d.join("m").join(f).exists(), "{f}");
    }
    // Same seed, same bytes.
    assert_eq!(code(&train("m2")), 0);
    assert_eq!(
        std::fs::read(d.join("m/model.json")).unwrap(),
        std::fs::read(d.join("m2/model.json")).unwrap()
    );

    let o = subtranx(
        &[
            "generate",
            "--checkpoint",
            "m/model.json",
            "--description",
            "展示图片链接",
        ],
        d,
    );
    assert_eq!(code(&o), 0);
    let lines: Vec<(f64, String)> = stdout(&o)
        .lines()
        .map(|l| {
            let (s, c) = l.split_once('\t').unwrap();
            (s.parse().unwrap(), c.to_string())
        })
        .collect();
    assert!(!lines.is_empty() && lines.len() <= 5);
    assert_eq!(lines[0].1, "{picUrl;}");
    assert!(lines.windows(2).all(|w| w[0].0 >= w[1].0));

    let mut args = common.to_vec();
    args.extend(["eval", "--checkpoint", "m/model.json", "--out", "ev"]);
    assert_eq!(code(&subtranx(&args, d)), 0);
    let report = read_json(&d.join("ev/report.json"));
    assert_eq!(report["acc_1"], 100.0);
    assert_eq!(report["edit_sim"], 100.0);
    assert!(d.join("ev/predictions.jsonl").exists() && d.join("ev/report.txt").exists());
}
