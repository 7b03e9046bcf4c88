mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context as _};
use clap::{Parser, Subcommand};
use protofsm_core::annotation::{parse_annotated, Paragraph};
use protofsm_core::checker::{check, instrument_adversary, parse_properties, to_smv, Verdict};
use protofsm_core::dsl::load_dsl_rules;
use protofsm_core::lexicon::{build_lexicon, Lexicon};
use protofsm_core::logic::Logic;
use protofsm_core::metrics::{diff_fsm, score, split_for_scoring, Deviation};
use protofsm_core::pipeline::extract;
use protofsm_core::synth::{emit_graph, parse_graph, Fsm, Model};
use serde::Serialize;

use config::{Overrides, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "protofsm",
    version,
    about = "Protocol state machines from annotated specification text"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate an annotated corpus into per-participant FSMs.
    Extract {
        corpus: PathBuf,
        /// Output directory for the model, graphs and reports.
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    /// Check LTL properties against a model, optionally under an adversary.
    Check {
        model: PathBuf,
        properties: PathBuf,
        /// Write verdicts and traces as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Also write the model and properties as NuSMV input.
        #[arg(long)]
        smv: Option<PathBuf>,
    },
    /// Score an inferred model against a gold model.
    Score {
        gold: PathBuf,
        inferred: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Report behavioural deviations of a subject model from a reference.
    Diff {
        reference: PathBuf,
        subject: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// List keyword candidates mined from a corpus that the lexicon lacks.
    LexiconCandidates { corpus: PathBuf },
}

enum Outcome {
    Done,
    /// A checked property was violated.
    Violated,
}

/// Exit status by failing stage.
#[derive(Clone, Copy, Debug)]
enum Stage {
    Usage = 2,
    Parse = 3,
    Translate = 4,
    Check = 5,
    Score = 6,
}

struct Failure {
    stage: Stage,
    error: anyhow::Error,
}

trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> StageExt<T> for Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            stage,
            error: e.into(),
        })
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .stage(Stage::Usage)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .stage(Stage::Usage)
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn line_col(text: &str, pos: usize) -> (usize, usize) {
    let before = &text[..pos.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

fn load_corpus(path: &Path) -> Result<Vec<Paragraph>, Failure> {
    let text = read(path)?;
    parse_annotated(&text).map_err(|e| {
        let (l, c) = line_col(&text, e.pos());
        Failure {
            stage: Stage::Parse,
            error: anyhow!("{}:{l}:{c}: {e}", path.display()),
        }
    })
}

fn load_lexicon(cfg: &PipelineConfig) -> Result<Lexicon, Failure> {
    Lexicon::parse(&read(&cfg.lexicon)?)
        .with_context(|| cfg.lexicon.display().to_string())
        .stage(Stage::Parse)
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    Model::from_json(&read(path)?)
        .with_context(|| path.display().to_string())
        .stage(Stage::Parse)
}

/// FSMs from a model JSON, one DOT file, or a directory of DOT files.
fn load_fsms(path: &Path) -> Result<Vec<Fsm>, Failure> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| path.display().to_string())
            .stage(Stage::Usage)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "dot"))
            .collect();
        files.sort();
        let mut out = Vec::new();
        for f in files {
            out.extend(load_fsms(&f)?);
        }
        return Ok(out);
    }
    if path.extension().is_some_and(|x| x == "dot") {
        let f = parse_graph(&read(path)?)
            .with_context(|| path.display().to_string())
            .stage(Stage::Parse)?;
        return Ok(vec![f]);
    }
    Ok(load_model(path)?.fsms)
}

fn cmd_extract(cfg: &PipelineConfig, corpus: &Path, out: &Path) -> Result<Outcome, Failure> {
    let paragraphs = load_corpus(corpus)?;
    let lexicon = load_lexicon(cfg)?;
    let rules = load_dsl_rules(&read(&cfg.rules)?)
        .with_context(|| cfg.rules.display().to_string())
        .stage(Stage::Parse)?;
    let x = extract(
        &paragraphs,
        &lexicon,
        &rules,
        &cfg.extract_options(),
        cfg.limits(),
        cfg.exec(),
    )
    .with_context(|| corpus.display().to_string())
    .stage(Stage::Translate)?;
    fs::create_dir_all(out)
        .with_context(|| out.display().to_string())
        .stage(Stage::Usage)?;
    write(&out.join("model.json"), &(x.model.to_json() + "\n"))?;
    for f in &x.model.fsms {
        write(&out.join(format!("{}.dot", f.participant)), &emit_graph(f))?;
    }
    write(&out.join("blocks.json"), &json(&x.blocks))?;
    write(&out.join("spans.json"), &json(&x.spans))?;
    write(&out.join("diagnostics.json"), &json(&x.diagnostics))?;
    let mut table = String::new();
    for b in &x.blocks {
        for t in &b.transitions {
            let to = t.to.as_deref().unwrap_or(&t.from);
            writeln!(
                table,
                "{}\t{}\t{} -> {to}\t{}\t{}",
                b.id, t.participant, t.from, t.condition, t.actions
            )
            .unwrap();
        }
    }
    write(&out.join("transitions.tsv"), &table)?;
    print!("{table}");
    let skipped = x.skipped().count();
    let recovered = x.spans.iter().filter(|s| s.recovered).count();
    eprintln!(
        "{} blocks, {} transitions, {} skipped spans, {} recovered actions, {} diagnostics",
        x.blocks.len(),
        x.model
            .fsms
            .iter()
            .map(|f| f.transitions.len())
            .sum::<usize>(),
        skipped,
        recovered,
        x.diagnostics.len()
    );
    Ok(Outcome::Done)
}

fn cmd_check(
    cfg: &PipelineConfig,
    model: &Path,
    properties: &Path,
    json_out: Option<&Path>,
    smv: Option<&Path>,
) -> Result<Outcome, Failure> {
    let mut m = load_model(model)?;
    let text = read(properties)?;
    let props = parse_properties(&text).map_err(|(line, e)| Failure {
        stage: Stage::Parse,
        error: anyhow!("{}:{line}: {e}", properties.display()),
    })?;
    if let Some(p) = smv {
        write(p, &to_smv(&m, &props))?;
    }
    if !cfg.capabilities.is_empty() {
        m = instrument_adversary(&m, &cfg.adversary());
    }
    let mut reports = Vec::new();
    let mut violated = false;
    for p in &props {
        let r = check(&m, p, &cfg.check_options())
            .with_context(|| format!("property `{}`", p.name))
            .stage(Stage::Check)?;
        match &r.verdict {
            Verdict::Proven => println!("{}: proven ({} states)", r.property, r.states),
            Verdict::HoldsWithinBound { bound } => {
                println!(
                    "{}: holds within bound {bound} ({} states)",
                    r.property, r.states
                )
            }
            Verdict::Violated { trace } => {
                violated = true;
                println!("{}: violated in {} steps", r.property, trace.len());
                print!("{trace}");
            }
        }
        reports.push(r);
    }
    if let Some(p) = json_out {
        write(p, &json(&reports))?;
    }
    Ok(if violated {
        Outcome::Violated
    } else {
        Outcome::Done
    })
}

fn cmd_score(
    cfg: &PipelineConfig,
    gold: &Path,
    inferred: &Path,
    json_out: Option<&Path>,
) -> Result<Outcome, Failure> {
    let logic = Logic::new(cfg.limits()).with_exec(cfg.exec());
    let split = |fsms: Vec<Fsm>| -> Result<Vec<_>, Failure> {
        let mut out = Vec::new();
        for f in &fsms {
            out.extend(
                split_for_scoring(f, &logic)
                    .with_context(|| format!("participant `{}`", f.participant))
                    .stage(Stage::Score)?,
            );
        }
        Ok(out)
    };
    let g = split(load_fsms(gold)?)?;
    let i = split(load_fsms(inferred)?)?;
    let r = score(&g, &i, cfg.exec());
    print!("{}", r.to_table());
    if let Some(p) = json_out {
        write(p, &json(&r))?;
    }
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct DiffEntry {
    participant: String,
    deviations: Vec<Deviation>,
}

fn cmd_diff(
    cfg: &PipelineConfig,
    reference: &Path,
    subject: &Path,
    json_out: Option<&Path>,
) -> Result<Outcome, Failure> {
    let logic = Logic::new(cfg.limits()).with_exec(cfg.exec());
    let r = load_fsms(reference)?;
    let s = load_fsms(subject)?;
    let mut names: Vec<&str> = r.iter().chain(&s).map(|f| f.participant.as_str()).collect();
    names.sort();
    names.dedup();
    let empty = |p: &str| Fsm {
        participant: p.to_string(),
        states: vec![],
        initial: String::new(),
        transitions: vec![],
    };
    let mut entries = Vec::new();
    for p in names {
        let a = r
            .iter()
            .find(|f| f.participant == p)
            .cloned()
            .unwrap_or_else(|| empty(p));
        let b = s
            .iter()
            .find(|f| f.participant == p)
            .cloned()
            .unwrap_or_else(|| empty(p));
        let deviations = diff_fsm(&a, &b, &logic)
            .with_context(|| format!("participant `{p}`"))
            .stage(Stage::Score)?;
        println!("{p}: {} deviations", deviations.len());
        for d in &deviations {
            match d {
                Deviation::MissingState { state } => println!("  missing state {state}"),
                Deviation::ExtraState { state } => println!("  extra state {state}"),
                Deviation::Behaviour {
                    state,
                    assignment,
                    expected,
                    actual,
                    ..
                } => {
                    let a: Vec<String> =
                        assignment.iter().map(|(v, x)| format!("{v}={x}")).collect();
                    println!(
                        "  in {state} with {}: expected {expected}, got {actual}",
                        a.join(" ")
                    );
                }
            }
        }
        entries.push(DiffEntry {
            participant: p.to_string(),
            deviations,
        });
    }
    if let Some(p) = json_out {
        write(p, &json(&entries))?;
    }
    Ok(Outcome::Done)
}

fn cmd_candidates(cfg: &PipelineConfig, corpus: &Path) -> Result<Outcome, Failure> {
    let paragraphs = load_corpus(corpus)?;
    let lexicon = build_lexicon(load_lexicon(cfg)?, &paragraphs);
    let mined: Vec<_> = lexicon.mined().cloned().collect();
    let only = Lexicon::from_entries(mined).stage(Stage::Parse)?;
    print!("{}", only.to_text());
    Ok(Outcome::Done)
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    let cfg = PipelineConfig::load(&cli.overrides).stage(Stage::Usage)?;
    match &cli.command {
        Command::Extract { corpus, out } => cmd_extract(&cfg, corpus, out),
        Command::Check {
            model,
            properties,
            json,
            smv,
        } => cmd_check(&cfg, model, properties, json.as_deref(), smv.as_deref()),
        Command::Score {
            gold,
            inferred,
            json,
        } => cmd_score(&cfg, gold, inferred, json.as_deref()),
        Command::Diff {
            reference,
            subject,
            json,
        } => cmd_diff(&cfg, reference, subject, json.as_deref()),
        Command::LexiconCandidates { corpus } => cmd_candidates(&cfg, corpus),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Violated) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.stage as u8)
        }
    }
}
