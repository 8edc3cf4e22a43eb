use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twistshear::experiments::{run, ExperimentConfig, ExperimentKind, ExperimentOutput};
use twistshear::penalty::PenaltyKind;
use twistshear::report::{InvariantReport, SCHEMA_VERSION};
use twistshear::Error;

#[derive(Parser, Debug)]
#[command(name = "twistshear", version, about = "Twist and shear equilibria: solve, check, render")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form twist on the annulus a < |x| < b.
    TwistExplicit(RunArgs),
    /// Penalized twist by shooting.
    TwistPenalized(RunArgs),
    /// Weak shear problem on the square.
    ShearWeak(RunArgs),
    /// Strong shear problem with mixed boundary conditions.
    ShearStrong(RunArgs),
    /// Run a suite of default experiments.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[command(flatten)]
        args: RunArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Emit {
    Csv,
    Json,
    Svg,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Inner radius.
    #[arg(long)]
    a: Option<f64>,
    /// Outer radius.
    #[arg(long)]
    b: Option<f64>,
    /// Winding number.
    #[arg(long = "N", id = "winding")]
    winding: Option<u32>,
    /// Grid resolution for the shear problems (even, >= 16).
    #[arg(long)]
    n: Option<usize>,
    /// default or negcontrol.
    #[arg(long)]
    penalty: Option<PenaltyKind>,
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Artifacts to write, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    emit: Option<Vec<Emit>>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file with any of the fields above; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Mirror of the flags for `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    a: Option<f64>,
    b: Option<f64>,
    #[serde(rename = "N")]
    winding: Option<u32>,
    n: Option<usize>,
    penalty: Option<PenaltyKind>,
    tol: Option<f64>,
    out: Option<PathBuf>,
    emit: Option<Vec<Emit>>,
    seed: Option<u64>,
}

struct Resolved {
    cfg: ExperimentConfig,
    out: PathBuf,
    emit: Vec<Emit>,
}

fn resolve(args: &RunArgs) -> Result<Resolved, String> {
    let file = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            serde_json::from_str::<FileConfig>(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => FileConfig::default(),
    };
    let d = ExperimentConfig::default();
    let cfg = ExperimentConfig {
        a: args.a.or(file.a).unwrap_or(d.a),
        b: args.b.or(file.b).unwrap_or(d.b),
        winding: args.winding.or(file.winding).unwrap_or(d.winding),
        n: args.n.or(file.n).unwrap_or(d.n),
        penalty: args.penalty.or(file.penalty).unwrap_or(d.penalty),
        tol: args.tol.or(file.tol),
        seed: args.seed.or(file.seed).unwrap_or(d.seed),
        battery: d.battery,
    };
    Ok(Resolved {
        cfg,
        out: args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
        emit: args.emit.clone().or(file.emit).unwrap_or_else(|| vec![Emit::Csv, Emit::Json, Emit::Svg]),
    })
}

/// Report of a run that could not finish.
fn diagnostic(kind: ExperimentKind, cfg: &ExperimentConfig, err: &Error) -> ExperimentOutput {
    let config = serde_json::to_value(cfg).unwrap_or_default();
    let mut report = InvariantReport::new(kind.name(), cfg.seed, config);
    report.fail_with(err.to_string());
    ExperimentOutput { report, artifacts: Vec::new() }
}

fn execute(kind: ExperimentKind, cfg: &ExperimentConfig) -> ExperimentOutput {
    run(kind, cfg).unwrap_or_else(|e| diagnostic(kind, cfg, &e))
}

fn write_output(dir: &Path, out: &ExperimentOutput, emit: &[Emit]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    if emit.contains(&Emit::Json) {
        fs::write(dir.join("report.json"), out.report.to_json())?;
    }
    for a in &out.artifacts {
        let wanted = match Path::new(&a.name).extension().and_then(|e| e.to_str()) {
            Some("csv") => Emit::Csv,
            Some("svg") => Emit::Svg,
            _ => Emit::Json,
        };
        if emit.contains(&wanted) {
            fs::write(dir.join(&a.name), &a.contents)?;
        }
    }
    Ok(())
}

fn summarize(label: &str, r: &InvariantReport) {
    let failed: Vec<&str> = r.entries.iter().filter(|e| !e.pass).map(|e| e.claim.as_str()).collect();
    let status = if r.pass { "PASS" } else { "FAIL" };
    println!("{status} {label}: {}/{} checks", r.entries.len() - failed.len(), r.entries.len());
    for f in failed {
        println!("  failed: {f}");
    }
    if let Some(e) = &r.error {
        println!("  error: {e}");
    }
}

fn exit_for(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn single(kind: ExperimentKind, args: &RunArgs) -> ExitCode {
    let r = match resolve(args) {
        Ok(r) => r,
        Err(e) => return usage_error(&e),
    };
    if let Err(e) = r.cfg.validate(kind) {
        return usage_error(&e.to_string());
    }
    let out = execute(kind, &r.cfg);
    if let Err(e) = write_output(&r.out, &out, &r.emit) {
        eprintln!("error: writing {}: {e}", r.out.display());
        return ExitCode::from(1);
    }
    summarize(kind.name(), &out.report);
    exit_for(out.report.pass)
}

#[derive(Serialize)]
struct SuiteEntry {
    name: String,
    experiment: &'static str,
    pass: bool,
    checks: usize,
    failed: Vec<String>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SuiteReport {
    schema: u32,
    suite: &'static str,
    seed: u64,
    experiments: Vec<SuiteEntry>,
    pass: bool,
}

fn suite_plan(base: &ExperimentConfig) -> Vec<(String, ExperimentKind, ExperimentConfig)> {
    let mut plan = Vec::new();
    for n in 1..=5 {
        let cfg = ExperimentConfig { winding: n, ..base.clone() };
        plan.push((format!("twist-explicit-N{n}"), ExperimentKind::TwistExplicit, cfg));
    }
    for n in 1..=2 {
        let cfg = ExperimentConfig { winding: n, penalty: PenaltyKind::Default, ..base.clone() };
        plan.push((format!("twist-penalized-N{n}"), ExperimentKind::TwistPenalized, cfg));
    }
    plan.push((format!("shear-weak-n{}", base.n), ExperimentKind::ShearWeak, base.clone()));
    for p in [PenaltyKind::Default, PenaltyKind::NegControl] {
        let cfg = ExperimentConfig { penalty: p, ..base.clone() };
        plan.push((format!("shear-strong-{p}-n{}", base.n), ExperimentKind::ShearStrong, cfg));
    }
    plan.push(("kernel".to_string(), ExperimentKind::Kernel, base.clone()));
    plan
}

fn verify(args: &RunArgs) -> ExitCode {
    let r = match resolve(args) {
        Ok(r) => r,
        Err(e) => return usage_error(&e),
    };
    let plan = suite_plan(&r.cfg);
    for (name, kind, cfg) in &plan {
        if let Err(e) = cfg.validate(*kind) {
            return usage_error(&format!("{name}: {e}"));
        }
    }
    let outputs: Vec<ExperimentOutput> = plan.par_iter().map(|(_, kind, cfg)| execute(*kind, cfg)).collect();
    let mut entries = Vec::new();
    for ((name, kind, _), out) in plan.iter().zip(&outputs) {
        if let Err(e) = write_output(&r.out.join(name), out, &r.emit) {
            eprintln!("error: writing {name}: {e}");
            return ExitCode::from(1);
        }
        summarize(name, &out.report);
        entries.push(SuiteEntry {
            name: name.clone(),
            experiment: kind.name(),
            pass: out.report.pass,
            checks: out.report.entries.len(),
            failed: out.report.entries.iter().filter(|e| !e.pass).map(|e| e.claim.clone()).collect(),
            error: out.report.error.clone(),
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    let agg = SuiteReport { schema: SCHEMA_VERSION, suite: "all", seed: r.cfg.seed, experiments: entries, pass };
    let mut text = serde_json::to_string_pretty(&agg).expect("suite report serializes");
    text.push('\n');
    if let Err(e) = fs::create_dir_all(&r.out).and_then(|_| fs::write(r.out.join("report.json"), text)) {
        eprintln!("error: writing aggregate report: {e}");
        return ExitCode::from(1);
    }
    println!("{} suite all", if pass { "PASS" } else { "FAIL" });
    exit_for(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::TwistExplicit(a) => single(ExperimentKind::TwistExplicit, a),
        Command::TwistPenalized(a) => single(ExperimentKind::TwistPenalized, a),
        Command::ShearWeak(a) => single(ExperimentKind::ShearWeak, a),
        Command::ShearStrong(a) => single(ExperimentKind::ShearStrong, a),
        Command::Verify { suite: Suite::All, args } => verify(args),
    }
}
