//! `critdet`: named experiments for radial critical metrics of regularized
//! determinants on `S^4` and `R^4`.
//!
//! Every run writes its CSV/JSON files plus a `manifest.json` holding the
//! resolved settings and a SHA-256 digest of each file.
//!
//! # Usage
//!
//! ```text
//! critdet disc --coeffs paneitz --grid 9 --out runs/disc
//! critdet eps-bar --coeffs half-torsion --bracket 0,10 --tol 1e-6
//! critdet replay runs/disc/manifest.json
//! ```
//!
//! Exit status: 0 success, 2 bad arguments or parameters outside the
//! domain, 3 numerical failure, 4 failed verification or replay mismatch.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Map};

/// Command-line tree.
mod args;
/// Subcommand bodies.
mod commands;
/// Error to exit-status mapping.
mod failure;
/// Manifest and atomic file output.
mod output;
/// Key-value configuration.
mod settings;

use args::{Cli, Command};
use failure::{bad_args, check_failed, Failure};
use output::{write_atomic, OutputDir, RunManifest};
use settings::Settings;

fn strip_location_flags(argv: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--out" || a == "--config" {
            it.next();
        } else if !(a.starts_with("--out=") || a.starts_with("--config=")) {
            out.push(a.clone());
        }
    }
    out
}

/// Runs one command and writes its manifest.  `settings` replaces the
/// `--config` file when replaying.
fn execute(cli: &Cli, argv: &[String], settings: Option<Settings>) -> Result<RunManifest, Failure> {
    let started = Instant::now();
    let g = &cli.global;
    let settings = match (settings, &g.config) {
        (Some(s), _) => s,
        (None, Some(p)) => Settings::load(p)?,
        (None, None) => Settings::default(),
    };
    let (coeffs, choice) = settings::coefficients(g, &settings)?;
    let name = cli.command.name();
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("out").join(name));
    let mut ctx = commands::Ctx {
        global: g,
        settings: &settings,
        coeffs,
        out: OutputDir::create(dir)?,
        params: Map::new(),
    };
    let outcome = commands::run(&mut ctx, &cli.command)?;
    let manifest = RunManifest {
        command: name.to_string(),
        argv: strip_location_flags(argv),
        config: settings.entries.clone(),
        coefficients: Some(choice),
        parameters: ctx.params,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_s: started.elapsed().as_secs_f64(),
        outputs: Vec::new(),
    };
    let dir = ctx.out.path().to_path_buf();
    let manifest = ctx.out.finish(manifest)?;
    if !g.quiet {
        println!("{name}: {} [{}]", outcome.summary, dir.display());
    }
    match outcome.failed {
        Some(msg) => Err(check_failed(msg)),
        None => Ok(manifest),
    }
}

fn replay(cli: &Cli, path: &std::path::Path) -> Result<(), Failure> {
    let old = RunManifest::load(path)?;
    if old.command == "replay" {
        return Err(bad_args("cannot replay a replay"));
    }
    let dir = match &cli.global.out {
        Some(d) => d.clone(),
        None => path.parent().unwrap_or(std::path::Path::new(".")).join("replay"),
    };
    let mut argv = vec!["critdet".to_string()];
    argv.extend(old.argv.iter().cloned());
    argv.extend(["--out".to_string(), dir.display().to_string()]);
    if cli.global.quiet && !argv.iter().any(|a| a == "--quiet" || a == "-q") {
        argv.push("--quiet".into());
    }
    let inner = Cli::try_parse_from(&argv).map_err(|e| bad_args(format!("manifest argv: {e}")))?;
    let new = execute(&inner, &old.argv, Some(Settings { entries: old.config.clone() }))?;

    let mismatched: Vec<String> = old
        .outputs
        .iter()
        .filter(|o| !new.outputs.iter().any(|n| n == *o))
        .map(|o| o.file.clone())
        .chain(
            new.outputs
                .iter()
                .filter(|n| !old.outputs.iter().any(|o| o.file == n.file))
                .map(|n| n.file.clone()),
        )
        .collect();
    let report = json!({
        "manifest": path.display().to_string(),
        "files": old.outputs.len(),
        "identical": mismatched.is_empty(),
        "mismatched": mismatched,
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_atomic(&dir.join("replay.json"), text.as_bytes())?;
    if !mismatched.is_empty() {
        return Err(check_failed(format!("replay differs in {}", mismatched.join(", "))));
    }
    if !cli.global.quiet {
        println!("replay: {} files identical", old.outputs.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&raw) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Replay(r) => replay(&cli, &r.manifest),
        _ => execute(&cli, &raw[1..], None).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn location_flags_are_dropped() {
        let argv: Vec<String> =
            ["shoot", "--out", "d", "--eps", "0.1", "--config=c.txt"].iter().map(|s| s.to_string()).collect();
        assert_eq!(strip_location_flags(&argv), ["shoot", "--eps", "0.1"]);
    }
}
