//! Command-line interface.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use elicit_core::elicitation::{Answer, Question, Reply, Session, Verdict, CHECKLIST};
use serde_json::{json, Value};

use crate::document::{Model, ModelDocument};
use crate::error::{CliError, Result};
use crate::ops::{self, FlowScript, SeriesPatch};
use crate::query::{self, QueryRequest};
use crate::store;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "elicit", version, about = "Build and check graphical models with domain experts")]
pub struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Fixed timestamp for transcript records (RFC 3339); defaults to now.
    #[arg(long, global = true)]
    pub timestamp: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a model document and check its invariants.
    Validate { file: PathBuf },
    /// Test a separation statement.
    Query(QueryArgs),
    /// List the questions an elicitation session would ask.
    Questions { file: PathBuf },
    /// Question an expert about a model and revise it from the answers.
    Elicit(ElicitArgs),
    /// One-step-ahead forecasts and residuals for a dynamic model.
    Forecast(ForecastArgs),
    /// Inspect or intervene on a flow graph.
    Flow {
        file: PathBuf,
        #[command(subcommand)]
        action: FlowCommand,
    },
    /// Recommend a model class from a short checklist.
    Advise {
        /// JSON object of replies by checklist key; prompts on stdin otherwise.
        #[arg(long)]
        answers: Option<PathBuf>,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "elicit-store")]
        store: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    pub file: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub y: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub given: Vec<String>,
    /// CEG positions to test as a fine cut.
    #[arg(long, value_delimiter = ',')]
    pub cut: Option<Vec<usize>>,
    /// CEG stages to test as a cut.
    #[arg(long, value_delimiter = ',')]
    pub stages: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct ElicitArgs {
    pub file: PathBuf,
    /// Answer script, one answer per line; stdin when omitted.
    #[arg(long)]
    pub answers: Option<PathBuf>,
    /// Write the transcript here (JSON lines).
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Replay a transcript before asking anything new.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Write the revised model here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub add_series: Option<PathBuf>,
    /// Write the patched model here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum FlowCommand {
    /// Every source-to-site path.
    Paths,
    /// Mass held by each actor.
    States {
        #[arg(long)]
        masses: Option<PathBuf>,
    },
    /// Apply an action script.
    Intervene {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        masses: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// What a command produced: both renderings plus the exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub json: Value,
    pub code: i32,
}

impl Output {
    fn ok(text: String, json: Value) -> Self {
        Output { text, json, code: 0 }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.text.clone(),
            Format::Json => serde_json::to_string_pretty(&self.json).expect("json"),
        }
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

/// Runs everything except `serve`. `input` feeds interactive prompts,
/// which are written to `prompt`.
pub fn execute(cli: &Cli, input: &mut dyn BufRead, prompt: &mut dyn Write) -> Result<Output> {
    let ts = cli.timestamp.clone();
    let clock = move || ts.clone().unwrap_or_else(now);
    match &cli.command {
        Command::Validate { file } => validate(file),
        Command::Query(args) => query_cmd(args),
        Command::Questions { file } => questions(file),
        Command::Elicit(args) => elicit(args, input, prompt, &clock),
        Command::Forecast(args) => forecast(args),
        Command::Flow { file, action } => flow(file, action),
        Command::Advise { answers } => advise(answers.as_deref(), input, prompt),
        Command::Serve { .. } => Err(CliError::Usage("serve runs from the binary".into())),
    }
}

fn validate(file: &Path) -> Result<Output> {
    let doc = ModelDocument::read(file)?;
    let model = doc.load()?;
    let detail = match &model {
        Model::Dag(d) => format!("{} nodes, {} edges", d.nodes().len(), d.edges().len()),
        Model::StagedTree(t) => format!("{} vertices, {} stages", t.tree().vertices().len(), t.stages().len()),
        Model::Ceg { ceg, .. } => format!("{} positions, {} edges", ceg.positions().len(), ceg.edges().len()),
        Model::Mdm(m) => format!("{} series", m.nodes.len()),
        Model::Flow(g) => format!("{} levels, {} paths", g.level_count(), g.enumerate_paths().len()),
    };
    let hash = model.hash();
    Ok(Output::ok(
        format!("valid {} ({detail})\nmodel hash {hash}", model.kind()),
        json!({ "valid": true, "kind": model.kind(), "model_hash": hash, "summary": detail }),
    ))
}

fn query_cmd(a: &QueryArgs) -> Result<Output> {
    let model = ModelDocument::read(&a.file)?.load()?;
    let req = QueryRequest { x: a.x.clone(), y: a.y.clone(), given: a.given.clone(), positions: a.cut.clone(), stages: a.stages.clone() };
    let r = query::run(&model, &req)?;
    Ok(Output { text: r.render(), json: to_value(&r), code: if r.separated() { 0 } else { 1 } })
}

fn questions(file: &Path) -> Result<Output> {
    let model = ModelDocument::read(file)?.load()?;
    let session = Session::new("questions", model.session_model())?;
    let qs = session.questions();
    let text = qs.iter().map(|q| format!("[{}] {}: {}", q.status.name(), q.id, q.text)).collect::<Vec<_>>().join("\n");
    Ok(Output::ok(text, to_value(&qs)))
}

/// One parsed line of an answer script.
#[derive(Debug, Clone, PartialEq)]
pub enum Reaction {
    Answer(Verdict, Option<(String, String)>, Option<String>),
    Quit,
    Skip,
}

/// `i`, `u`, `r FROM TO`, or `q`; a rationale may follow ` -- `; `#` lines
/// and blank lines are skipped.
pub fn parse_reaction(line: &str) -> Result<Reaction> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(Reaction::Skip);
    }
    let (body, rationale) = match line.split_once(" -- ") {
        Some((b, r)) => (b.trim(), Some(r.trim().to_string())),
        None => (line, None),
    };
    let words: Vec<&str> = body.split_whitespace().collect();
    let verdict = match words[0].to_ascii_lowercase().as_str() {
        "q" | "quit" => return Ok(Reaction::Quit),
        "i" | "irrelevant" => Verdict::Irrelevant,
        "r" | "relevant" => Verdict::Relevant,
        "u" | "unsure" => Verdict::Unsure,
        w => return Err(CliError::Usage(format!("unknown answer {w:?}; use i, r FROM TO, u or q"))),
    };
    let edge = match (verdict, &words[1..]) {
        (_, []) => None,
        (Verdict::Relevant, [from, to]) | (Verdict::Relevant, [from, "->", to]) => Some((from.to_string(), to.to_string())),
        _ => return Err(CliError::Usage(format!("cannot read {body:?}; use i, r FROM TO, u or q"))),
    };
    Ok(Reaction::Answer(verdict, edge, rationale))
}

fn describe(q: &Question) -> String {
    let mut s = format!("{}\n  ({})", q.text, q.id);
    if !q.orientations.is_empty() {
        let opts: Vec<String> = q
            .orientations
            .iter()
            .map(|o| match &o.cycle {
                Some(c) => format!("r {} {}  (closes cycle {})", o.from, o.to, c.join(" -> ")),
                None => format!("r {} {}", o.from, o.to),
            })
            .collect();
        s += &format!("\n  answer i, u, q or {}", opts.join(" | "));
    } else {
        s += "\n  answer i, r, u or q";
    }
    s
}

/// Asks questions until none are left, the input ends or the expert quits.
/// A rejected answer is reported and the same question asked again.
pub fn elicit_loop(session: &mut Session, input: &mut dyn BufRead, prompt: &mut dyn Write, clock: &dyn Fn() -> String) -> Result<()> {
    let p = |prompt: &mut dyn Write, s: &str| writeln!(prompt, "{s}").map_err(|e| CliError::io("<prompt>", e));
    loop {
        let Some(q) = session.next_question(&clock()) else {
            p(prompt, "no open questions")?;
            return Ok(());
        };
        p(prompt, &describe(&q))?;
        let reaction = loop {
            let mut line = String::new();
            if input.read_line(&mut line).map_err(|e| CliError::io("<answers>", e))? == 0 {
                break Reaction::Quit;
            }
            match parse_reaction(&line) {
                Ok(Reaction::Skip) => continue,
                Ok(r) => break r,
                Err(e) => p(prompt, &e.to_string())?,
            }
        };
        let Reaction::Answer(verdict, edge, rationale) = reaction else {
            return Ok(());
        };
        let mut answer = Answer::new(&q.id, verdict);
        answer.rationale = rationale;
        if let Some((from, to)) = edge {
            answer = answer.with_edge(from, to);
        }
        match session.apply_answer(&answer, &clock()) {
            Ok(outcome) => {
                if let Some(op) = &outcome.revision {
                    p(prompt, &format!("revised: {}", serde_json::to_string(op).expect("json")))?;
                }
                if let Some(a) = &outcome.advisory {
                    p(prompt, &format!("advisory: {}", a.message))?;
                }
            }
            Err(e) => p(prompt, &format!("rejected: {e}"))?,
        }
    }
}

fn elicit(a: &ElicitArgs, stdin: &mut dyn BufRead, prompt: &mut dyn Write, clock: &dyn Fn() -> String) -> Result<Output> {
    let doc = ModelDocument::read(&a.file)?;
    let model = doc.load()?;
    let mut session = match &a.replay {
        Some(t) => Session::replay("cli", model.session_model(), &store::read_transcript(t)?)?,
        None => Session::new("cli", model.session_model())?,
    };
    let result = match &a.answers {
        Some(path) => {
            let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
            elicit_loop(&mut session, &mut std::io::BufReader::new(f), prompt, clock)
        }
        None => elicit_loop(&mut session, stdin, prompt, clock),
    };
    // Keep whatever was recorded, even when the loop failed.
    if let Some(t) = &a.transcript {
        write(t, &store::transcript_text(session.transcript()))?;
    }
    result?;
    let revised = Model::from_session(session.model(), &model)?;
    if let Some(out) = &a.out {
        ModelDocument::from_model(&revised, doc.metadata.clone()).write(out)?;
    }
    let report = session.report();
    let mut text = format!("model hash {}\n{} revision(s), {} confirmed statement(s)", report.model_hash, report.revisions, report.confirmed.len());
    for (label, qs) in [("open", &report.open), ("parked", &report.parked)] {
        for q in qs {
            text += &format!("\n{label}: {}", q.id);
        }
    }
    let json = json!({
        "report": report,
        "transcript": session.transcript(),
        "document": ModelDocument::from_model(&revised, doc.metadata),
    });
    Ok(Output::ok(text, json))
}

fn forecast(a: &ForecastArgs) -> Result<Output> {
    let doc = ModelDocument::read(&a.file)?;
    let Model::Mdm(spec) = doc.load()? else {
        return Err(CliError::Usage(format!("forecast needs an mdm document, not {}", doc.kind())));
    };
    let patch: Option<SeriesPatch> = match &a.add_series {
        Some(p) => Some(serde_json::from_str(&read(p)?).map_err(|e| CliError::Document(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let (used, report) = ops::forecast(&spec, &read(&a.data)?, patch.as_ref())?;
    if let Some(out) = &a.out {
        ModelDocument::from_model(&Model::Mdm(used), doc.metadata).write(out)?;
    }
    Ok(Output::ok(report.csv().trim_end().to_string(), to_value(&report)))
}

fn flow(file: &Path, cmd: &FlowCommand) -> Result<Output> {
    let doc = ModelDocument::read(file)?;
    let Model::Flow(g) = doc.load()? else {
        return Err(CliError::Usage(format!("flow needs a flow_graph document, not {}", doc.kind())));
    };
    match cmd {
        FlowCommand::Paths => {
            let paths: Vec<Vec<String>> = g.enumerate_paths().iter().map(|p| g.path_labels(p)).collect();
            let text = paths.iter().enumerate().map(|(i, p)| format!("pi({}) {}", i + 1, p.join(" > "))).collect::<Vec<_>>().join("\n");
            Ok(Output::ok(text, json!({ "count": paths.len(), "paths": paths })))
        }
        FlowCommand::States { masses } => {
            let groups = match masses {
                Some(m) => crate::data::read_masses(&read(m)?, &g)?,
                None => BTreeMap::from([(None, ops::flows_or_uniform(&g, None)?)]),
            };
            let mut states = Vec::new();
            let mut text = Vec::new();
            let mut conserved = true;
            for (t, flows) in &groups {
                let s = ops::flow_state(&g, flows, *t)?;
                conserved &= s.conservation.conserved;
                text.push(render_state(&g, &s));
                states.push(s);
            }
            Ok(Output { text: text.join("\n\n"), json: to_value(&states), code: if conserved { 0 } else { 1 } })
        }
        FlowCommand::Intervene { script, masses, out } => {
            let actions = FlowScript::parse(&read(script)?)?;
            let masses = masses.as_deref().map(read).transpose()?;
            let flows = ops::flows_or_uniform(&g, masses.as_deref())?;
            let (g2, _, report) = ops::intervene_all(&g, &flows, &actions)?;
            let revised = ModelDocument::from_model(&Model::Flow(g2.clone()), doc.metadata);
            if let Some(out) = out {
                revised.write(out)?;
            }
            let mut text = String::new();
            for (i, d) in report.diffs.iter().enumerate() {
                text += &format!("action {}:\n", i + 1);
                for e in &d.edges_added {
                    text += &format!("  + {} -> {}\n", e.from, e.to);
                }
                for e in &d.edges_removed {
                    text += &format!("  - {} -> {}\n", e.from, e.to);
                }
                for m in &d.actors_merged {
                    text += &format!("  merged {} into {}\n", m.from.join(", "), m.into);
                }
                for a in &d.actors_added {
                    text += &format!("  new actor {} (level {})\n", a.label, a.level);
                }
                for a in &d.actors_removed {
                    text += &format!("  removed actor {} (level {})\n", a.label, a.level);
                }
            }
            text += &render_state(&g2, &report.after);
            let json = json!({ "report": report, "document": revised });
            Ok(Output::ok(text, json))
        }
    }
}

fn render_state(g: &elicit_core::flow::FlowGraph, s: &ops::FlowState) -> String {
    let mut out = match s.states.t {
        Some(t) => format!("t = {t}"),
        None => String::new(),
    };
    for (l, masses) in s.states.levels.iter().enumerate() {
        let cells: Vec<String> = masses.iter().enumerate().map(|(j, m)| format!("{}={}", g.levels()[l][j], m)).collect();
        if !out.is_empty() {
            out.push('\n');
        }
        out += &format!("level {} (total {}): {}", l + 1, s.conservation.totals[l], cells.join(", "));
    }
    out += if s.conservation.conserved { "\nconserved" } else { "\nNOT conserved" };
    out
}

fn advise(answers: Option<&Path>, input: &mut dyn BufRead, prompt: &mut dyn Write) -> Result<Output> {
    let replies = match answers {
        Some(p) => {
            let v: Value = serde_json::from_str(&read(p)?).map_err(|e| CliError::Document(e.to_string()))?;
            ops::parse_replies(&v)?
        }
        None => prompt_replies(input, prompt)?,
    };
    let r = ops::advise(&replies)?;
    Ok(Output::ok(ops::render_recommendation(&r), to_value(&r)))
}

/// Blank means no reply, which the advisor reads as "no".
fn prompt_replies(input: &mut dyn BufRead, prompt: &mut dyn Write) -> Result<BTreeMap<String, Reply>> {
    let mut out = BTreeMap::new();
    for item in CHECKLIST.iter() {
        loop {
            write!(prompt, "{} [y/n/u] ", item.question).map_err(|e| CliError::io("<prompt>", e))?;
            prompt.flush().ok();
            let mut line = String::new();
            if input.read_line(&mut line).map_err(|e| CliError::io("<stdin>", e))? == 0 || line.trim().is_empty() {
                break;
            }
            match ops::parse_reply(&line) {
                Some(r) => {
                    out.insert(item.key.to_string(), r);
                    break;
                }
                None => writeln!(prompt, "answer y, n or u").map_err(|e| CliError::io("<prompt>", e))?,
            }
        }
    }
    Ok(out)
}
