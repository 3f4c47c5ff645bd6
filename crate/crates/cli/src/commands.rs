use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use subtranx::augment::{build_cg_task, build_vp_task, CgOptions, SemanticEntry};
use subtranx::grammar::{parse_asdl, Grammar};
use subtranx::neural::{write_loss_curve, Model};
use subtranx::prep::{read_jsonl, write_jsonl, Record};

use crate::config::{Overrides, RunConfig};
use crate::manifest::{beside, Manifest};
use crate::pipeline::{self, RoundTripError};
use crate::synth::{synthesize, SynthSpec};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "subtranx",
    version,
    about = "Natural language to JavaScript logic expressions"
)]
pub struct Cli {
    /// TOML run configuration; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Where to write the run manifest (each command has a default)
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Canonicalize, replace string literals and simplify member access
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON report of dropped records (default: <out>.report.json)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write a template-generated corpus and semantic table
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        /// TOML synthesis spec
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Training records per category
        #[arg(long)]
        per_category: Option<usize>,
        #[arg(long)]
        test_count: Option<usize>,
        #[arg(long)]
        heldout: Option<usize>,
        #[arg(long)]
        table_size: Option<usize>,
    },
    /// Auxiliary-task data from a semantic table
    Augment {
        #[command(subcommand)]
        action: AugmentAction,
    },
    /// Train a model and write a checkpoint and loss curve
    Train {
        #[arg(long)]
        out: PathBuf,
    },
    /// Print ranked candidates for a description (or each stdin line)
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        description: Option<String>,
    },
    /// Score a checkpoint on the test corpus
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the parse/derive/replay/print fixed point for every record
    Roundtrip {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum AugmentAction {
    Build {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_enum)]
        task: AuxTask,
        #[arg(long)]
        out: PathBuf,
        /// Sample the display verb per entry instead of a fixed prefix
        #[arg(long)]
        rotate_verbs: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AuxTask {
    Cg,
    Vp,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let manifest_at = |default: PathBuf| cli.manifest.clone().unwrap_or(default);
    match cli.command {
        Command::Preprocess { input, out, report } => {
            let report = report.unwrap_or_else(|| beside(&out, "report"));
            preprocess(
                &cfg,
                &input,
                &out,
                &report,
                &manifest_at(beside(&out, "manifest")),
            )
        }
        Command::Synth {
            out_dir,
            spec,
            per_category,
            test_count,
            heldout,
            table_size,
        } => {
            let mut s = match &spec {
                Some(p) => toml::from_str(&read_text(p)?)
                    .map_err(|e| CliError::Usage(format!("bad spec: {e}")))?,
                None => SynthSpec::default(),
            };
            s.seed = cfg.seed;
            if let Some(n) = per_category {
                s.counts.values_mut().for_each(|c| *c = n);
            }
            s.test = test_count.unwrap_or(s.test);
            s.heldout = heldout.unwrap_or(s.heldout);
            s.table_size = table_size.unwrap_or(s.table_size);
            let m = manifest_at(out_dir.join("manifest.json"));
            synth(&cfg, &s, spec.as_deref(), &out_dir, &m)
        }
        Command::Augment {
            action:
                AugmentAction::Build {
                    table,
                    task,
                    out,
                    rotate_verbs,
                },
        } => {
            let m = manifest_at(beside(&out, "manifest"));
            augment_build(&cfg, &table, task, rotate_verbs, &out, &m)
        }
        Command::Train { out } => train(&cfg, &out, &manifest_at(out.join("manifest.json"))),
        Command::Generate {
            checkpoint,
            description,
        } => {
            let m = manifest_at(beside(&checkpoint, "generate"));
            generate(&cfg, &checkpoint, description.as_deref(), &m)
        }
        Command::Eval { checkpoint, out } => eval(
            &cfg,
            &checkpoint,
            &out,
            &manifest_at(out.join("manifest.json")),
        ),
        Command::Roundtrip { input } => {
            let m = manifest_at(beside(&input, "roundtrip"));
            roundtrip(&cfg, &input, &m)
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_jsonl(BufReader::new(f)).map_err(|e| CliError::io(path, e))
}

fn write_records<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_jsonl(&mut w, items).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn grammar(cfg: &RunConfig, m: &mut Manifest) -> Result<Grammar, CliError> {
    match &cfg.grammar {
        Some(p) => {
            m.input(p)?;
            parse_asdl(&read_text(p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        }
        None => Ok(Grammar::javascript()),
    }
}

fn load_checkpoint(path: &Path, g: &Grammar, m: &mut Manifest) -> Result<Model, CliError> {
    m.input(path)?;
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let (model, _) = Model::load(BufReader::new(f))?;
    model.check_grammar(g)?;
    Ok(model)
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    p.as_deref()
        .ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

pub fn preprocess(
    cfg: &RunConfig,
    input: &Path,
    out: &Path,
    report: &Path,
    manifest: &Path,
) -> Result<(), CliError> {
    let mut m = Manifest::new("preprocess", cfg);
    m.input(input)?;
    let records: Vec<Record> = read_records(input)?;
    let (kept, rep) = pipeline::preprocess_all(&records);
    write_records(out, &kept)?;
    write_json(report, &rep)?;
    eprintln!(
        "{} of {} records kept, {} dropped",
        rep.kept,
        rep.read,
        rep.dropped.len()
    );
    for d in &rep.dropped {
        eprintln!("  dropped record {}: {}", d.line, d.error);
    }
    m.output(out);
    m.output(report);
    m.write(manifest)
}

pub fn synth(
    cfg: &RunConfig,
    s: &SynthSpec,
    spec: Option<&Path>,
    dir: &Path,
    manifest: &Path,
) -> Result<(), CliError> {
    let mut m = Manifest::new("synth", cfg);
    if let Some(p) = spec {
        m.input(p)?;
    }
    let corpus = synthesize(s)?;
    create_dir(dir)?;
    let files = [("train.jsonl", &corpus.train), ("test.jsonl", &corpus.test)];
    for (name, records) in files {
        write_records(&dir.join(name), records)?;
        m.output(&dir.join(name));
    }
    write_records(&dir.join("table.jsonl"), &corpus.table)?;
    m.output(&dir.join("table.jsonl"));
    let held = dir.join("heldout.txt");
    std::fs::write(&held, corpus.heldout.join("\n") + "\n").map_err(|e| CliError::io(&held, e))?;
    m.output(&held);
    m.write(manifest)
}

pub fn augment_build(
    cfg: &RunConfig,
    table: &Path,
    task: AuxTask,
    rotate: bool,
    out: &Path,
    manifest: &Path,
) -> Result<(), CliError> {
    let mut m = Manifest::new("augment build", cfg);
    m.input(table)?;
    let entries: Vec<SemanticEntry> = read_records(table)?;
    let built = match task {
        AuxTask::Cg => {
            let opts = CgOptions {
                rotate_seed: rotate.then_some(cfg.seed),
                ..CgOptions::default()
            };
            build_cg_task(&entries, &opts)
        }
        AuxTask::Vp => build_vp_task(&entries),
    };
    for s in &built.skipped {
        eprintln!("skipped: {s}");
    }
    write_records(out, &built.records)?;
    m.output(out);
    m.write(manifest)
}

pub fn train(cfg: &RunConfig, out: &Path, manifest: &Path) -> Result<(), CliError> {
    let mut m = Manifest::new("train", cfg);
    let g = grammar(cfg, &mut m)?;
    let train_path = required(&cfg.train, "train")?;
    m.input(train_path)?;
    let (records, rep) = pipeline::preprocess_all(&read_records(train_path)?);
    if !rep.dropped.is_empty() {
        eprintln!("{} training records dropped", rep.dropped.len());
    }
    let (main, val) = match &cfg.val {
        Some(p) => {
            m.input(p)?;
            let (val, _) = pipeline::preprocess_all(&read_records(p)?);
            (pipeline::examples(&records), pipeline::examples(&val))
        }
        None => {
            pipeline::split_validation(pipeline::examples(&records), cfg.val_fraction, cfg.seed)
        }
    };
    let table: Option<Vec<SemanticEntry>> = match &cfg.table {
        Some(p) => {
            m.input(p)?;
            Some(read_records(p)?)
        }
        None => None,
    };
    let outcome = pipeline::fit(cfg, &g, main, &val, table.as_deref())?;
    create_dir(out)?;
    let ck = out.join("model.json");
    let f = File::create(&ck).map_err(|e| CliError::io(&ck, e))?;
    let run = serde_json::to_value(cfg).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut w = BufWriter::new(f);
    outcome.model.save(&mut w, run)?;
    w.flush().map_err(|e| CliError::io(&ck, e))?;
    let curve = out.join("loss.csv");
    let f = File::create(&curve).map_err(|e| CliError::io(&curve, e))?;
    write_loss_curve(BufWriter::new(f), &outcome.curve).map_err(|e| CliError::io(&curve, e))?;
    eprintln!(
        "trained {} epochs, kept epoch {}, {} examples skipped",
        outcome.curve.len(),
        outcome.best_epoch,
        outcome.skipped
    );
    m.output(&ck);
    m.output(&curve);
    m.write(manifest)
}

pub fn generate(
    cfg: &RunConfig,
    checkpoint: &Path,
    description: Option<&str>,
    manifest: &Path,
) -> Result<(), CliError> {
    let mut m = Manifest::new("generate", cfg);
    let g = grammar(cfg, &mut m)?;
    let model = load_checkpoint(checkpoint, &g, &mut m)?;
    let inputs: Vec<String> = match description {
        Some(d) => vec![d.to_string()],
        None => std::io::stdin()
            .lock()
            .lines()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Data(format!("stdin: {e}")))?
            .into_iter()
            .filter(|l| !l.trim().is_empty())
            .collect(),
    };
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let mut emit = |text: String| match w.write_all(text.as_bytes()) {
        Ok(()) => Ok(true),
        // Reader went away (`| head`); stop quietly.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(false),
        Err(e) => Err(CliError::Data(e.to_string())),
    };
    'outer: for (i, d) in inputs.iter().enumerate() {
        if i > 0 && !emit("\n".into())? {
            break;
        }
        let cands = pipeline::generate(&model, &g, d, cfg.beam)?;
        if cands.is_empty() {
            eprintln!("no legal candidate for: {d}");
        }
        for c in cands {
            if !emit(format!("{:.6}\t{}\n", c.score, c.code))? {
                break 'outer;
            }
        }
    }
    m.write(manifest)
}

pub fn eval(
    cfg: &RunConfig,
    checkpoint: &Path,
    out: &Path,
    manifest: &Path,
) -> Result<(), CliError> {
    let mut m = Manifest::new("eval", cfg);
    let g = grammar(cfg, &mut m)?;
    let model = load_checkpoint(checkpoint, &g, &mut m)?;
    let test = required(&cfg.test, "test")?;
    m.input(test)?;
    let (records, _) = pipeline::preprocess_all(&read_records(test)?);
    let preds = pipeline::predict(&model, &g, &pipeline::examples(&records), cfg.beam)?;
    let report = pipeline::score(&preds, cfg.beam)?;
    create_dir(out)?;
    let paths = [
        out.join("report.json"),
        out.join("report.txt"),
        out.join("predictions.jsonl"),
    ];
    write_json(&paths[0], &report)?;
    std::fs::write(&paths[1], report.to_table()).map_err(|e| CliError::io(&paths[1], e))?;
    write_records(&paths[2], &preds)?;
    print!("{}", report.to_table());
    for p in &paths {
        m.output(p);
    }
    m.write(manifest)
}

pub fn roundtrip(cfg: &RunConfig, input: &Path, manifest: &Path) -> Result<(), CliError> {
    let mut m = Manifest::new("roundtrip", cfg);
    let g = grammar(cfg, &mut m)?;
    m.input(input)?;
    let records: Vec<Record> = read_records(input)?;
    let (mut bad_input, mut broken) = (0, 0);
    for (i, r) in records.iter().enumerate() {
        match pipeline::roundtrip(&r.code, &g, cfg.subtokenize) {
            Ok(_) => println!("ok\t{}", i + 1),
            Err(RoundTripError::Input(e)) => {
                bad_input += 1;
                println!("skip\t{}\t{e}", i + 1);
            }
            Err(RoundTripError::Invariant(e)) => {
                broken += 1;
                println!("FAIL\t{}\t{e}", i + 1);
            }
        }
    }
    let passed = records.len() - bad_input - broken;
    println!("{passed}/{} passed", records.len());
    m.write(manifest)?;
    if broken > 0 {
        Err(CliError::Internal(format!(
            "{broken} records broke the round trip"
        )))
    } else if bad_input > 0 {
        Err(CliError::Data(format!(
            "{bad_input} records could not be parsed"
        )))
    } else {
        Ok(())
    }
}
