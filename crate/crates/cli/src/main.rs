use clap::{Args, Parser, Subcommand, ValueEnum};
use einshift::dynamics::orbit;
use einshift::io::{from_json, orbit_csv, to_json, JordanDoc, LiftDoc, MatrixDoc, NamedLift, PointDoc};
use einshift::lift::default_anchor;
use einshift::linalg::jordan_decompose;
use einshift::samples::named_example;
use einshift::survey::{classify_both, summarize, survey, Report};
use einshift::verify::run_suite;
use einshift::{Budgets, Error, RunConfig};
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "einshift", version, about = "Classify conformal maps of the Einstein static universe")]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Default)]
struct GlobalOpts {
    /// Sphere dimension (the group is O(2, n+1)).
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    tol_group: Option<f64>,
    #[arg(long, global = true)]
    tol_cluster: Option<f64>,
    #[arg(long, global = true)]
    j_max: Option<usize>,
    #[arg(long, global = true)]
    k_max: Option<usize>,
    /// Sphere grid size for escaping certificates.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run both classifiers on lift JSON documents.
    Classify {
        /// Input file; stdin when absent or `-`.
        input: Option<PathBuf>,
    },
    /// Jordan decomposition of a matrix JSON document.
    Decompose { input: Option<PathBuf> },
    /// Orbit of a point as CSV (`k,t,z0,..`); `--k-max` sets the number of steps (default 100).
    Orbit {
        /// Lift JSON file; stdin when absent or `-`.
        input: Option<PathBuf>,
        /// Start point as inline JSON `{"t":..,"z":[..]}` or a file path.
        #[arg(long)]
        point: Option<String>,
    },
    /// Classify a seeded corpus of random lifts and summarize.
    Random {
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Force this deck power instead of sampling from -2..=2.
        #[arg(long, allow_hyphen_values = true)]
        deck_power: Option<i64>,
        /// Print only the summary line.
        #[arg(long)]
        summary_only: bool,
    },
    /// Run a property suite: linalg, causal, lift, dichotomy, bridge or all.
    Verify { suite: String },
    /// Emit a worked example: nonsubgroup, deck, homothety or translation.
    Example { name: String },
}

/// Keys accepted in the `EINSHIFT_CONFIG` file; flags override them.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    n: Option<usize>,
    seed: Option<u64>,
    #[serde(alias = "tol_group")]
    tol_group: Option<f64>,
    #[serde(alias = "tol_cluster")]
    tol_cluster: Option<f64>,
    #[serde(alias = "j_max")]
    j_max: Option<usize>,
    #[serde(alias = "k_max")]
    k_max: Option<usize>,
    grid: Option<usize>,
    out: Option<PathBuf>,
    format: Option<Format>,
    tol: Option<einshift::Tolerances>,
    budgets: Option<Budgets>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Input(_) => 2,
            Error::Indeterminate(_) => 3,
            Error::Continuation { .. } => 4,
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn load_file_config() -> CliResult<FileConfig> {
    let Ok(path) = std::env::var("EINSHIFT_CONFIG") else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::new(2, format!("cannot read {path}: {e}")))?;
    let parsed = if path.ends_with(".json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| Failure::new(2, format!("invalid config {path}: {e}")))
}

struct Settings {
    cfg: RunConfig,
    out: Option<PathBuf>,
    format: Option<Format>,
}

fn settings(opts: &GlobalOpts) -> CliResult<Settings> {
    let file = load_file_config()?;
    let mut cfg = RunConfig::default();
    if let Some(t) = file.tol {
        cfg.tol = t;
    }
    if let Some(b) = file.budgets {
        cfg.budgets = b;
    }
    cfg.n = opts.n.or(file.n).unwrap_or(cfg.n);
    cfg.seed = opts.seed.or(file.seed).unwrap_or(cfg.seed);
    if let Some(v) = opts.tol_group.or(file.tol_group) {
        cfg.tol.group = v;
    }
    if let Some(v) = opts.tol_cluster.or(file.tol_cluster) {
        cfg.tol.cluster = v;
    }
    if let Some(v) = opts.j_max.or(file.j_max) {
        cfg.budgets.j_max = v;
    }
    if let Some(v) = opts.k_max.or(file.k_max) {
        cfg.budgets.k_max = v;
    }
    if let Some(v) = opts.grid.or(file.grid) {
        cfg.budgets.grid = Some(v);
    }
    cfg.validate()?;
    Ok(Settings { cfg, out: opts.out.clone().or(file.out), format: opts.format.or(file.format) })
}

fn read_input(path: Option<&Path>) -> CliResult<String> {
    match path {
        Some(p) if p != Path::new("-") => {
            std::fs::read_to_string(p).map_err(|e| Failure::new(2, format!("cannot read {}: {e}", p.display())))
        }
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| Failure::new(2, format!("cannot read stdin: {e}")))?;
            Ok(s)
        }
    }
}

/// Whitespace-separated JSON documents; arrays are flattened.
fn documents(text: &str) -> CliResult<Vec<serde_json::Value>> {
    let mut out = Vec::new();
    for v in serde_json::Deserializer::from_str(text).into_iter::<serde_json::Value>() {
        match v.map_err(|e| Failure::new(2, format!("schema violation: {e}")))? {
            serde_json::Value::Array(items) => out.extend(items),
            other => out.push(other),
        }
    }
    if out.is_empty() {
        return Err(Failure::new(2, "no JSON document in input"));
    }
    Ok(out)
}

/// A bare lift document or one wrapped as `{"name", "lift"}`.
fn parse_lift(v: serde_json::Value) -> CliResult<(Option<String>, LiftDoc)> {
    let text = v.to_string();
    if v.get("lift").is_some() {
        let named: NamedLift = from_json(&text)?;
        Ok((Some(named.name), named.lift))
    } else {
        Ok((None, from_json(&text)?))
    }
}

#[derive(Serialize)]
struct ClassifyOut<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    kind: Option<&'static str>,
    confidence: Option<einshift::dynamics::Confidence>,
    certificate: Option<&'a einshift::dynamics::Certificate>,
    agree: Option<bool>,
    essential: Option<bool>,
    essential_reason: Option<&'static str>,
    base_class: Option<einshift::linalg::MatrixClass>,
    dynamic: &'a einshift::survey::ClassifierOutcome,
    algebraic: &'a einshift::survey::ClassifierOutcome,
    budgets: Budgets,
}

fn chosen(rep: &Report) -> Option<&einshift::dynamics::Classification> {
    let k = rep.kind?;
    // escaping verdicts read best with the dynamic power-and-margin certificate
    let (first, second) = if k.is_escaping() { (&rep.dynamic, &rep.algebraic) } else { (&rep.algebraic, &rep.dynamic) };
    [first.certified(), second.certified(), first.result.as_ref(), second.result.as_ref()]
        .into_iter()
        .flatten()
        .find(|c| c.kind == k)
}

/// Exit status implied by the classifier outcomes of one report.
fn report_code(rep: &Report) -> u8 {
    let kinds = [rep.dynamic.error_kind, rep.algebraic.error_kind];
    if kinds.contains(&Some("indeterminate")) {
        3
    } else if kinds.contains(&Some("continuation")) {
        4
    } else if kinds.contains(&Some("input")) {
        2
    } else if kinds.iter().any(Option::is_some) || rep.kind.is_none() {
        1
    } else {
        0
    }
}

fn cmd_classify(s: &Settings, input: Option<&Path>) -> CliResult<(String, u8)> {
    let mut lines = Vec::new();
    let mut code = 0;
    for v in documents(&read_input(input)?)? {
        let (name, doc) = parse_lift(v)?;
        let mut cfg = s.cfg;
        cfg.n = doc.base.n;
        let phi = doc.to_lift(&cfg.tol)?;
        let rep = classify_both(&phi, &cfg);
        code = code.max(report_code(&rep));
        let pick = chosen(&rep);
        let out = ClassifyOut {
            name,
            kind: rep.kind.map(|k| k.name()),
            confidence: pick.map(|c| c.confidence),
            certificate: pick.map(|c| &c.certificate),
            agree: rep.agree,
            essential: rep.essential,
            essential_reason: rep.essential_reason,
            base_class: rep.base_class,
            dynamic: &rep.dynamic,
            algebraic: &rep.algebraic,
            budgets: cfg.budgets,
        };
        lines.push(to_json(&out));
    }
    Ok((lines.join("\n") + "\n", code))
}

fn cmd_decompose(s: &Settings, input: Option<&Path>) -> CliResult<String> {
    let mut lines = Vec::new();
    for v in documents(&read_input(input)?)? {
        let doc: MatrixDoc = from_json(&v.to_string())?;
        let a = doc.to_element(&s.cfg.tol)?;
        let parts = jordan_decompose(&a, &s.cfg.tol)?;
        lines.push(to_json(&JordanDoc::new(&a, &parts, &s.cfg.tol)?));
    }
    Ok(lines.join("\n") + "\n")
}

fn cmd_orbit(s: &Settings, input: Option<&Path>, point: Option<&str>, steps: usize) -> CliResult<String> {
    let docs = documents(&read_input(input)?)?;
    if docs.len() != 1 {
        return Err(Failure::new(2, "orbit takes exactly one lift document"));
    }
    let (_, doc) = parse_lift(docs.into_iter().next().expect("one document"))?;
    let phi = doc.to_lift(&s.cfg.tol)?;
    let start = match point {
        None => default_anchor(phi.n()),
        Some(p) => {
            let text = if p.trim_start().starts_with('{') {
                p.to_string()
            } else {
                std::fs::read_to_string(p).map_err(|e| Failure::new(2, format!("cannot read {p}: {e}")))?
            };
            from_json::<PointDoc>(&text)?.to_point()?
        }
    };
    if start.z.len() != phi.n() + 1 {
        return Err(Failure::new(2, "point dimension does not match the lift"));
    }
    let trace = orbit(&phi, &start, steps)?;
    Ok(match s.format.unwrap_or(Format::Csv) {
        Format::Csv => orbit_csv(&trace),
        Format::Json => to_json(&trace) + "\n",
    })
}

fn cmd_random(s: &Settings, count: usize, scale: f64, deck_power: Option<i64>, summary_only: bool) -> CliResult<String> {
    if count == 0 {
        return Err(Failure::new(2, "count must be at least 1"));
    }
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Failure::new(2, "scale must be a nonnegative number"));
    }
    let records = survey(count, scale, s.cfg.seed, deck_power, &s.cfg);
    let mut out = String::new();
    if !summary_only {
        for r in &records {
            out.push_str(&to_json(r));
            out.push('\n');
        }
    }
    #[derive(Serialize)]
    struct SummaryLine<T: Serialize> {
        summary: T,
    }
    out.push_str(&to_json(&SummaryLine { summary: summarize(&records) }));
    out.push('\n');
    Ok(out)
}

fn run(cli: Cli) -> CliResult<(String, u8, Option<PathBuf>)> {
    let s = settings(&cli.opts)?;
    if s.format == Some(Format::Csv) && !matches!(cli.cmd, Command::Orbit { .. }) {
        return Err(Failure::new(2, "csv output is only available for orbit"));
    }
    let (text, code) = match &cli.cmd {
        Command::Classify { input } => cmd_classify(&s, input.as_deref())?,
        Command::Decompose { input } => (cmd_decompose(&s, input.as_deref())?, 0),
        Command::Orbit { input, point } => {
            let steps = cli.opts.k_max.unwrap_or(100);
            (cmd_orbit(&s, input.as_deref(), point.as_deref(), steps)?, 0)
        }
        Command::Random { count, scale, deck_power, summary_only } => {
            (cmd_random(&s, *count, *scale, *deck_power, *summary_only)?, 0)
        }
        Command::Verify { suite } => {
            let rep = run_suite(suite, &s.cfg)?;
            (to_json(&rep) + "\n", if rep.pass { 0 } else { 1 })
        }
        Command::Example { name } => {
            let lifts = named_example(name, s.cfg.n, &s.cfg.tol)?;
            let lines: Vec<String> = lifts
                .iter()
                .map(|(name, l)| to_json(&NamedLift { name: name.clone(), lift: LiftDoc::from_lift(l) }))
                .collect();
            (lines.join("\n") + "\n", 0)
        }
    };
    Ok((text, code, s.out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((text, code, out)) => {
            let written = match out {
                Some(p) => std::fs::write(&p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
