mod output;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use sftlab_core::scenario::{apply_override, ScenarioFile};

#[derive(Parser)]
#[command(
    name = "sftlab",
    version,
    about = "Pressure, rate-function, and large-deviation audits on subshifts of finite type"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Executes a scenario's task list and writes one CSV and one JSON
    /// report per task, plus a run summary.
    Run {
        /// Path to the scenario JSON document.
        scenario: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Replaces the seed recorded in the scenario (default 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Dotted-path document overrides, e.g. `--set tasks.0.delta=0.05`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn main() -> ExitCode {
    if let Ok(raw) = std::env::var("SFTLAB_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = sftlab_core::exec::configure_threads(n) {
                    eprintln!("warning: thread configuration failed: {e}");
                }
            }
            _ => eprintln!("warning: ignoring non-numeric SFTLAB_THREADS={raw}"),
        }
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out, seed, set } => {
            match run(&scenario, &out, seed, &set) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(1),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}

/// Loads, overrides, validates, and executes the scenario. Returns whether
/// every task passed; hard errors (parse, validation, I/O) bubble up.
fn run(
    scenario_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    sets: &[String],
) -> Result<bool, String> {
    let text = std::fs::read_to_string(scenario_path)
        .map_err(|e| format!("cannot read {}: {e}", scenario_path.display()))?;
    let mut doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        format!("scenario parse error at line {}, column {}: {e}", e.line(), e.column())
    })?;
    for kv in sets {
        let (path, value) = kv
            .split_once('=')
            .ok_or_else(|| format!("override \"{kv}\" is not of the form key=value"))?;
        apply_override(&mut doc, path, value).map_err(|e| e.to_string())?;
    }
    if let Some(s) = seed {
        doc["seed"] = json!(s);
    }
    let file: ScenarioFile =
        serde_json::from_value(doc).map_err(|e| format!("scenario schema error: {e}"))?;
    let scenario = file.build().map_err(|e| e.to_string())?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;

    let mut entries = Vec::new();
    let mut all_pass = true;
    for (index, task) in scenario.tasks.iter().enumerate() {
        let kind = task.kind();
        let csv_name = format!("task-{index}-{kind}.csv");
        let json_name = format!("task-{index}-{kind}.json");
        match tasks::execute(&scenario, task) {
            Ok(outcome) => {
                output::write_atomic(out_dir, &csv_name, outcome.csv.as_bytes())
                    .map_err(|e| e.to_string())?;
                let body = serde_json::to_string_pretty(&outcome.json)
                    .map_err(|e| e.to_string())?;
                output::write_atomic(out_dir, &json_name, body.as_bytes())
                    .map_err(|e| e.to_string())?;
                if outcome.pass == Some(false) {
                    all_pass = false;
                }
                entries.push(json!({
                    "index": index,
                    "kind": kind,
                    "pass": outcome.pass,
                    "csv": csv_name,
                    "json": json_name,
                    "error": null,
                }));
            }
            Err(e) => {
                all_pass = false;
                entries.push(json!({
                    "index": index,
                    "kind": kind,
                    "pass": false,
                    "csv": null,
                    "json": null,
                    "error": e.to_string(),
                }));
            }
        }
    }
    let summary = json!({
        "seed": scenario.seed,
        "tasks": entries,
        "pass": all_pass,
    });
    let body = serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?;
    output::write_atomic(out_dir, "summary.json", body.as_bytes())
        .map_err(|e| e.to_string())?;
    Ok(all_pass)
}
