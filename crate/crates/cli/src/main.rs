use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Stdio};
use std::thread;

use clap::{Parser, Subcommand};
use lccl_core::harness::bundled;
use lccl_core::harness::replay::diff_reports;
use lccl_core::harness::report::{emit_comparison, emit_report, summary_csv};
use lccl_core::{load_scenario, replay, run_scenario, ReportFormat, RunError, RunReport, ScenarioConfig, ScenarioError};

const EXIT_RUNTIME: u8 = 1;
const EXIT_VALIDATION: u8 = 2;

#[derive(Parser)]
#[command(name = "lccl", version, about = "Cluster revocation list simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario file, or a bundled scenario by name.
    Run {
        /// Path to a scenario TOML file, or one of: example_b, priority_race, empty
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// End time in seconds
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        /// Directory for the report (and trace); prints to stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write trace.ndjson into the output directory
        #[arg(long, requires = "out")]
        trace: bool,
        #[arg(long, default_value = "json")]
        format: ReportFormat,
    },
    /// Run every *.toml in a directory, each in its own process.
    Sweep {
        dir: PathBuf,
        /// Results go to <out>/<scenario file stem>/
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        trace: bool,
        #[arg(long, default_value = "json")]
        format: ReportFormat,
    },
    /// Recount a report from a trace file.
    Replay {
        trace: PathBuf,
        /// Compare the recount against this report.json
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl ToString) -> Self {
        Failure { code: EXIT_VALIDATION, message: message.to_string() }
    }

    fn runtime(message: impl ToString) -> Self {
        Failure { code: EXIT_RUNTIME, message: message.to_string() }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::validation(e)
    }
}

fn resolve(scenario: &str) -> Result<ScenarioConfig, Failure> {
    let path = Path::new(scenario);
    if !path.exists() {
        if let Some(cfg) = bundled::bundled(scenario) {
            return Ok(cfg);
        }
    }
    Ok(load_scenario(path)?)
}

fn run(
    scenario: &str,
    seed: Option<u64>,
    t_end: Option<f64>,
    out: Option<&Path>,
    trace: bool,
    format: ReportFormat,
) -> Result<(), Failure> {
    let mut cfg = resolve(scenario)?;
    if let Some(seed) = seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(t) = t_end {
        cfg = cfg.with_t_end(t)?;
    }
    let output = match run_scenario(&cfg) {
        Ok(o) => o,
        Err(RunError::Engine { error, trace_prefix }) => {
            if let (Some(dir), true) = (out, trace) {
                let _ = fs::create_dir_all(dir);
                let _ = fs::write(dir.join("trace.partial.ndjson"), trace_prefix.join("\n") + "\n");
            }
            return Err(Failure::runtime(format!("{}: {error}", cfg.name())));
        }
    };
    match out {
        None => match format {
            ReportFormat::Json => println!("{}", output.report.to_json()),
            ReportFormat::Csv => print!("{}", summary_csv(&output.report).map_err(Failure::runtime)?),
        },
        Some(dir) => {
            let mut written = emit_report(&output.report, format, dir).map_err(Failure::runtime)?;
            if trace {
                let path = dir.join("trace.ndjson");
                output.write_trace(&path).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
                written.push(path);
            }
            print!("{}", emit_comparison(&output.report));
            for p in written {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn sweep(dir: &Path, out: &Path, jobs: Option<usize>, trace: bool, format: ReportFormat) -> Result<(), Failure> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::validation(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::validation(format!("no .toml scenarios in {}", dir.display())));
    }
    let exe = std::env::current_exe().map_err(Failure::runtime)?;
    let jobs = jobs
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let fmt = match format {
        ReportFormat::Json => "json",
        ReportFormat::Csv => "csv",
    };

    let mut results: Vec<(PathBuf, Option<i32>)> = Vec::new();
    for batch in files.chunks(jobs) {
        let children: Vec<_> = batch
            .iter()
            .map(|file| {
                let stem = file.file_stem().unwrap_or_default();
                let mut cmd = Command::new(&exe);
                cmd.arg("run").arg(file).arg("--out").arg(out.join(stem)).arg("--format").arg(fmt);
                if trace {
                    cmd.arg("--trace");
                }
                cmd.stdout(Stdio::piped()).stderr(Stdio::piped());
                (file.clone(), cmd.spawn())
            })
            .collect();
        for (file, child) in children {
            match child.and_then(|c| c.wait_with_output()) {
                Ok(o) => {
                    if !o.status.success() {
                        eprint!("{}", String::from_utf8_lossy(&o.stderr));
                    }
                    results.push((file, o.status.code()));
                }
                Err(e) => {
                    eprintln!("{}: cannot start run: {e}", file.display());
                    results.push((file, None));
                }
            }
        }
    }

    let mut worst = 0u8;
    for (file, code) in &results {
        let status = match code {
            Some(0) => "ok".to_string(),
            Some(c) => format!("exit {c}"),
            None => "killed".to_string(),
        };
        println!("{:<40} {status}", file.display());
        let c = match code {
            Some(0) => 0,
            Some(2) => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        };
        // a runtime failure outranks a validation failure
        worst = match (worst, c) {
            (EXIT_RUNTIME, _) | (_, EXIT_RUNTIME) => EXIT_RUNTIME,
            (a, b) => a.max(b),
        };
    }
    let failed = results.iter().filter(|(_, c)| *c != Some(0)).count();
    println!("{} scenarios, {failed} failed", results.len());
    if worst == 0 {
        Ok(())
    } else {
        Err(Failure { code: worst, message: format!("{failed} of {} runs failed", results.len()) })
    }
}

fn replay_cmd(trace: &Path, report: Option<&Path>) -> Result<(), Failure> {
    let text = fs::read_to_string(trace).map_err(|e| Failure::validation(format!("{}: {e}", trace.display())))?;
    let recount = replay(&text).map_err(|e| Failure::validation(format!("{}: {e}", trace.display())))?;
    let Some(path) = report else {
        println!("{}", recount.to_json());
        return Ok(());
    };
    let stored = fs::read_to_string(path).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    if stored.trim_end() == recount.to_json() {
        println!("recount matches {}", path.display());
        return Ok(());
    }
    let parsed = RunReport::from_json(&stored).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    let diff = diff_reports(&parsed, &recount);
    for d in &diff {
        println!("{d}");
    }
    Err(Failure::runtime(format!("recount differs from {} in {} fields", path.display(), diff.len().max(1))))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run { scenario, seed, t_end, out, trace, format } => run(&scenario, seed, t_end, out.as_deref(), trace, format),
        Cmd::Sweep { dir, out, jobs, trace, format } => sweep(&dir, &out, jobs, trace, format),
        Cmd::Replay { trace, report } => replay_cmd(&trace, report.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
