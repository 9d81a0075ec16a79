//! `ptr-accountant`: privacy curves, accounting comparisons, sensitivity
//! reports, training simulations and audits as CSV or JSON.
//!
//! Exit codes: 0 on success, 2 for usage, config or input errors, 3 when
//! the numerical machinery fails.

mod args;
mod error;
mod jobs;
mod output;

use clap::Parser;
use serde_json::json;

use crate::args::{Cli, Command, Destinations};
use crate::error::{from_value, CliError, CliResult};
use crate::jobs::Job;
use crate::output::{emit, read_manifest, timestamp, trace_path_for, Payload, RunManifest};

/// Caps the worker pool for parallel sweeps.
const THREADS_ENV: &str = "PTR_ACCOUNTANT_THREADS";

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))
}

fn resolve(command: Command) -> CliResult<(Job, Destinations)> {
    let simple = |job: CliResult<Job>, out: args::OutArgs| -> CliResult<(Job, Destinations)> {
        Ok((job?, Destinations { out: out.out, trace: None }))
    };
    match command {
        Command::RdpCurve(a) => simple(a.resolve(), a.out),
        Command::CompareFig1(a) => simple(a.resolve(), a.out),
        Command::CompareFig2(a) => simple(a.resolve(), a.out),
        Command::ComposeFig3(a) => simple(a.resolve(), a.out),
        Command::DeltaMargin(a) => simple(a.resolve(), a.out),
        Command::Audit(a) => simple(a.resolve(), a.out),
        Command::TrainSim(a) => Ok((a.resolve()?, a.destinations())),
        Command::Replay(a) => {
            let manifest = read_manifest(&a.manifest)?;
            let tagged = json!({ "command": manifest.command, "params": manifest.params });
            let job: Job = from_value(tagged, &a.manifest.display().to_string())?;
            Ok((job, Destinations { out: a.out, trace: a.trace }))
        }
    }
}

fn execute(job: &Job, dest: &Destinations) -> CliResult<()> {
    let tagged = serde_json::to_value(job).expect("job serializes");
    let manifest = RunManifest {
        command: tagged["command"].as_str().expect("tagged job").to_string(),
        params: tagged["params"].clone(),
        seed: job.seed(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: timestamp()?,
    };
    let output = job.run()?;
    emit(&output.main.render(&manifest), dest.out.as_deref())?;
    if let Some(trace) = output.trace {
        let path = dest.trace.clone().or_else(|| dest.out.as_deref().map(trace_path_for));
        if let Some(path) = path {
            emit(&Payload::Csv(trace).render(&manifest), Some(&path))?;
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = configure_threads()
        .and_then(|_| resolve(cli.command))
        .and_then(|(job, dest)| execute(&job, &dest));
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
