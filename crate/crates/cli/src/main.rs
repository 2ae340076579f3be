//! `leofl`: contact plans, single runs and policy comparisons from a scenario file.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use leofl_core::export::{
    plan_summary, write_comparison, write_contact_plan, write_metrics, write_plan_summary, write_schedule,
    RunSummary,
};
use leofl_core::scenario::bundled;
use leofl_core::{compare_runs, run_simulation, Overrides, Policy, ScenarioConfig};

#[derive(Parser)]
#[command(name = "leofl", version, about = "Federated learning over LEO satellite contact windows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the contact plan and a per-satellite pass summary.
    Plan(Common),
    /// Simulate one policy and write metrics, schedule and summary.
    Run {
        #[command(flatten)]
        common: Common,
        /// Policy to run instead of the one in the scenario.
        #[arg(long)]
        policy: Option<Policy>,
    },
    /// Simulate several policies on identical inputs and tabulate them.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Policy to include; repeat for each (at least two).
        #[arg(long = "policy", required = true)]
        policies: Vec<Policy>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file, or `bundled:NAME` for a built-in scenario.
    #[arg(long)]
    scenario: String,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Local training time in seconds.
    #[arg(long = "tl")]
    train_time: Option<f64>,
    /// Simulated horizon in hours.
    #[arg(long = "horizon")]
    horizon_h: Option<f64>,
}

enum Failure {
    Invalid(String),
    Internal(String),
}

impl From<leofl_core::Error> for Failure {
    fn from(e: leofl_core::Error) -> Self {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

const BUNDLED: [(&str, &str); 3] = [
    ("bremen_10sat.plan", bundled::BREMEN_10SAT_PLAN),
    ("bremen_10sat.fedsat", bundled::BREMEN_10SAT_FEDSAT),
    ("bremen_10sat.schedule", bundled::BREMEN_10SAT_SCHEDULE),
];

fn load(common: &Common, policy: Option<Policy>) -> Outcome<ScenarioConfig> {
    let text = match common.scenario.strip_prefix("bundled:") {
        Some(name) => BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| t.to_string())
            .ok_or_else(|| {
                let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
                Failure::Invalid(format!("unknown bundled scenario `{name}` (have: {})", names.join(", ")))
            })?,
        None => fs::read_to_string(&common.scenario)
            .map_err(|e| Failure::Invalid(format!("{}: {e}", common.scenario)))?,
    };
    let mut cfg = ScenarioConfig::parse(&text)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", common.scenario)))?;
    cfg.apply(&Overrides {
        seed: common.seed,
        policy,
        train_time_s: common.train_time,
        horizon_h: common.horizon_h,
    });
    Ok(cfg)
}

/// Files are rendered in memory first so a failing command leaves nothing behind.
struct Output {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Output {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, path: impl Into<PathBuf>, render: impl FnOnce(&mut Vec<u8>) -> leofl_core::Result<()>) -> Outcome<()> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.files.push((path.into(), buf));
        Ok(())
    }

    fn write(self, root: &Path) -> Outcome<()> {
        for (rel, bytes) in self.files {
            let path = root.join(rel);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| Failure::Internal(format!("{}: {e}", dir.display())))?;
            }
            fs::write(&path, bytes).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn toml_text(s: leofl_core::Result<String>) -> impl FnOnce(&mut Vec<u8>) -> leofl_core::Result<()> {
    move |b| {
        b.extend_from_slice(s?.as_bytes());
        Ok(())
    }
}

fn fmt_hours(t: Option<f64>) -> String {
    t.map(|s| format!("{:.2} h", s / 3600.0)).unwrap_or_else(|| "not reached".into())
}

fn cmd_plan(common: &Common) -> Outcome<()> {
    let scenario = load(common, None)?.build()?;
    let plan = scenario.contact_plan()?;
    let rows = plan_summary(&plan, &scenario);
    let mut out = Output::new();
    out.add("contact_plan.csv", |b| write_contact_plan(&plan, b))?;
    out.add("plan_summary.csv", |b| write_plan_summary(&rows, b))?;
    out.write(&common.out)?;
    println!(
        "{} satellites, {} passes over {:.1} h",
        plan.satellite_count(),
        plan.pass_count(),
        scenario.horizon / 3600.0
    );
    for r in &rows {
        let mean = r.mean_duration_s.map(|m| format!("{m:.0} s")).unwrap_or_else(|| "-".into());
        println!("  S{:<3} {:>6.0} km  {:>3} passes  mean {mean}", r.satellite, r.altitude_km, r.passes);
    }
    Ok(())
}

fn cmd_run(common: &Common, policy: Option<Policy>) -> Outcome<()> {
    let cfg = load(common, policy)?;
    let scenario = cfg.build()?;
    let run = run_simulation(&scenario)?;
    let summary = RunSummary::new(&scenario, &run);
    let mut out = Output::new();
    out.add("scenario.toml", toml_text(cfg.to_toml()))?;
    out.add("contact_plan.csv", |b| write_contact_plan(&run.plan, b))?;
    out.add("schedule.csv", |b| write_schedule(&run.schedule, b))?;
    out.add("metrics.csv", |b| write_metrics(&run.log, b))?;
    out.add("summary.toml", toml_text(summary.to_toml()))?;
    out.write(&common.out)?;
    println!(
        "{}: {} uploads, final accuracy {:.4}, threshold {} reached at {}",
        summary.policy,
        summary.uploads,
        summary.final_accuracy.unwrap_or(f64::NAN),
        summary.threshold.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into()),
        fmt_hours(summary.time_to_threshold_s)
    );
    Ok(())
}

fn cmd_compare(common: &Common, policies: &[Policy]) -> Outcome<()> {
    if policies.len() < 2 {
        return Err(Failure::Invalid("compare needs at least two --policy values".into()));
    }
    let base = load(common, None)?;
    let scenarios = policies
        .iter()
        .map(|&p| {
            let mut cfg = base.clone();
            cfg.apply(&Overrides { policy: Some(p), ..Default::default() });
            cfg.build()
        })
        .collect::<leofl_core::Result<Vec<_>>>()?;
    let cmp = compare_runs(&scenarios)?;

    let mut out = Output::new();
    out.add("scenario.toml", toml_text(base.to_toml()))?;
    out.add("contact_plan.csv", |b| write_contact_plan(&cmp.runs[0].plan, b))?;
    out.add("comparison.csv", |b| write_comparison(&cmp, b))?;
    let mut used: Vec<String> = Vec::new();
    for (scenario, run) in scenarios.iter().zip(&cmp.runs) {
        let mut dir = run.policy.name().to_string();
        let repeats = used.iter().filter(|d| d.starts_with(run.policy.name())).count();
        if repeats > 0 {
            dir = format!("{dir}-{}", repeats + 1);
        }
        let shared = leofl_core::Scenario { accuracy_threshold: Some(cmp.threshold), ..scenario.clone() };
        let summary = RunSummary::new(&shared, run);
        let dir_path = PathBuf::from(&dir);
        out.add(dir_path.join("schedule.csv"), |b| write_schedule(&run.schedule, b))?;
        out.add(dir_path.join("metrics.csv"), |b| write_metrics(&run.log, b))?;
        out.add(dir_path.join("summary.toml"), toml_text(summary.to_toml()))?;
        used.push(dir);
    }
    out.write(&common.out)?;

    println!("threshold accuracy {:.4}", cmp.threshold);
    for r in &cmp.rows {
        println!(
            "  {:<15} reached at {:<12} final {:.4}  mean staleness {}",
            r.policy.name(),
            fmt_hours(r.time_to_threshold),
            r.final_accuracy,
            r.mean_time_staleness.map(|s| format!("{s:.0} s")).unwrap_or_else(|| "-".into())
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan(common) => cmd_plan(common),
        Command::Run { common, policy } => cmd_run(common, *policy),
        Command::Compare { common, policies } => cmd_compare(common, policies),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}
