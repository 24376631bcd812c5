//! Command-line driver.
//!
//! Every subcommand reads an optional TOML file, applies flag overrides, and
//! writes `records.csv` plus `manifest.json` (and any extra artifacts) under
//! `<out>/<command>/<hash>/`, where the hash covers the resolved
//! configuration and seed.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use self::config::parse_value;

#[derive(Parser, Debug)]
#[command(name = "cartan-lab", version, about = "Cartan-type estimates for Riesz transforms of discrete measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite an existing output directory.
    #[arg(long)]
    force: bool,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Suppress normal output; errors and flags still go to stderr.
    #[arg(long)]
    quiet: bool,
    /// Extra `key=value` override, value in TOML or JSON syntax. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the critical content scale.
    Mh {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gauge: Option<String>,
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        d: Option<String>,
        #[arg(long)]
        kappa: Option<String>,
        #[arg(long = "N")]
        n: Option<String>,
    },
    /// Truncated and maximal transforms on points or a grid.
    Riesz {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        measure: Option<String>,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        points: Option<String>,
    },
    /// Operator norms at fixed truncations and their supremum.
    Opnorm {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        measure: Option<String>,
        #[arg(long)]
        eps: Option<String>,
    },
    /// Wolff potentials, their support supremum and the energy.
    Wolff {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        measure: Option<String>,
        #[arg(long)]
        queries: Option<String>,
    },
    /// Content bracket of a dyadic cell set.
    Content {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gauge: Option<String>,
        #[arg(long)]
        d: Option<String>,
        #[arg(long)]
        cells: Option<String>,
    },
    /// Capacity functionals of nonnegative measures.
    Capacity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        measure: Option<String>,
    },
    /// Content of superlevel sets against the critical scale.
    CartanUpper {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        configs: Option<String>,
    },
    /// Randomized Cantor construction and its level statistics.
    CartanLower {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gauge: Option<String>,
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        d: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        trials: Option<String>,
    },
    /// Far-separated masses with `s ≥ d`.
    LargeS {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gauge: Option<String>,
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        atoms: Option<String>,
        #[arg(long)]
        p: Option<String>,
    },
}

type Runner = fn(toml::Table, u64) -> Result<commands::Run>;

impl Command {
    fn split(self) -> (&'static str, Runner, Common, Vec<(&'static str, Option<String>)>) {
        use commands as c;
        match self {
            Command::Mh { common, gauge, s, d, kappa, n } => {
                ("mh", c::mh, common, vec![("gauge", gauge), ("s", s), ("d", d), ("kappa", kappa), ("N", n)])
            }
            Command::Riesz { common, s, measure, eps, points } => (
                "riesz",
                c::riesz,
                common,
                vec![("s", s), ("measure", measure), ("eps", eps), ("points", points)],
            ),
            Command::Opnorm { common, s, measure, eps } => {
                ("opnorm", c::opnorm, common, vec![("s", s), ("measure", measure), ("eps", eps)])
            }
            Command::Wolff { common, s, measure, queries } => {
                ("wolff", c::wolff, common, vec![("s", s), ("measure", measure), ("queries", queries)])
            }
            Command::Content { common, gauge, d, cells } => {
                ("content", c::content, common, vec![("gauge", gauge), ("d", d), ("cells", cells)])
            }
            Command::Capacity { common, s, measure } => {
                ("capacity", c::capacity, common, vec![("s", s), ("measures", measure)])
            }
            Command::CartanUpper { common, configs } => {
                ("cartan-upper", c::cartan_upper, common, vec![("configs", configs)])
            }
            Command::CartanLower { common, gauge, s, d, n, trials } => (
                "cartan-lower",
                c::cartan_lower,
                common,
                vec![("gauge", gauge), ("s", s), ("d", d), ("n", n), ("trials", trials)],
            ),
            Command::LargeS { common, gauge, s, atoms, p } => {
                ("large-s", c::large_s, common, vec![("gauge", gauge), ("s", s), ("atoms", atoms), ("p", p)])
            }
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    package: &'static str,
    version: &'static str,
    config_hash: &'a str,
    seed: u64,
    config: &'a serde_json::Value,
    outputs: Vec<&'a str>,
    flags: &'a [String],
    float_format: &'static str,
}

/// Runs the CLI on `args` (program name first) and returns the exit code:
/// 0 on success, 2 on configuration errors, 3 when numerical-failure flags
/// were raised or a numerical routine failed.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok((dir, run, quiet)) => {
            if !quiet {
                for m in &run.messages {
                    println!("{m}");
                }
                println!("{}", dir.display());
            }
            if run.flags.is_empty() {
                0
            } else {
                for f in &run.flags {
                    eprintln!("flag: {f}");
                }
                3
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } | Error::NonBracketable(_) | Error::DivergentIntegral(_) | Error::Construction(_) => 3,
        _ => 2,
    }
}

fn execute(cli: Cli) -> Result<(PathBuf, commands::Run, bool)> {
    let (name, runner, common, flags) = cli.command.split();
    let mut table = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("reading {}: {e}", p.display())))?;
            toml::from_str::<toml::Table>(&text).map_err(|e| Error::Config(format!("{}: {}", p.display(), e.message())))?
        }
        None => toml::Table::new(),
    };
    for (key, value) in flags {
        if let Some(v) = value {
            table.insert(key.to_string(), parse_value(&v));
        }
    }
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("`--set {kv}`: expected KEY=VALUE")))?;
        table.insert(k.trim().to_string(), parse_value(v.trim()));
    }
    let file_seed = match table.remove("seed") {
        Some(v) => Some(
            v.as_integer()
                .and_then(|i| u64::try_from(i).ok())
                .ok_or_else(|| Error::Config("`seed` must be a nonnegative integer".into()))?,
        ),
        None => None,
    };
    let seed = common.seed.or(file_seed).unwrap_or(0);
    let run = runner(table, seed)?;
    let hash = config_hash(name, seed, &run.config)?;
    let dir = common.out.join(name).join(&hash);
    write_outputs(&dir, common.force, name, seed, &hash, &run)?;
    Ok((dir, run, common.quiet))
}

fn config_hash(name: &str, seed: u64, config: &serde_json::Value) -> Result<String> {
    let canonical = serde_json::to_string(&serde_json::json!({ "command": name, "seed": seed, "config": config }))
        .map_err(|e| Error::Io(e.to_string()))?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(hex::encode(&digest[..8]))
}

fn write_outputs(dir: &Path, force: bool, name: &str, seed: u64, hash: &str, run: &commands::Run) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", dir.display()));
    if dir.exists() {
        if !force {
            return Err(Error::Config(format!("{} exists; pass --force to overwrite", dir.display())));
        }
        fs::remove_dir_all(dir).map_err(io)?;
    }
    fs::create_dir_all(dir).map_err(io)?;
    for (file, bytes) in &run.files {
        fs::write(dir.join(file), bytes).map_err(io)?;
    }
    let manifest = Manifest {
        command: name,
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_hash: hash,
        seed,
        config: &run.config,
        outputs: run.files.iter().map(|(f, _)| *f).collect(),
        flags: &run.flags,
        float_format: "17 significant digits",
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    bytes.push(b'\n');
    fs::write(dir.join("manifest.json"), bytes).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read_records(out: &Path, cmd: &str) -> String {
        let sub = out.join(cmd);
        let dir = fs::read_dir(&sub).unwrap().next().unwrap().unwrap().path();
        fs::read_to_string(dir.join("records.csv")).unwrap()
    }

    #[test]
    fn mh_power_example_gives_half() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().to_str().unwrap();
        let code = run_cli([
            "cartan-lab", "mh", "--gauge", "power:2", "--s", "1", "--d", "2", "--kappa", "1", "--N", "2", "--out", out,
        ]);
        assert_eq!(code, 0);
        let text = read_records(tmp.path(), "mh");
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        let m: f64 = row[5].parse().unwrap();
        assert!((m - 0.5).abs() < 1e-12, "{text}");
    }

    #[test]
    fn missing_gauge_is_a_config_error() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().to_str().unwrap();
        assert_eq!(run_cli(["cartan-lab", "mh", "--s", "1", "--d", "2", "--kappa", "1", "--N", "2", "--out", out]), 2);
        assert_eq!(run_cli(["cartan-lab", "mh", "--bogus", "1"]), 2);
    }

    #[test]
    fn existing_output_needs_force() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().to_str().unwrap();
        let args = ["cartan-lab", "mh", "--gauge", "power:1.5", "--s", "1", "--d", "2", "--kappa", "1", "--N", "8", "--out", out];
        assert_eq!(run_cli(args), 0);
        assert_eq!(run_cli(args), 2);
        let mut forced = args.to_vec();
        forced.push("--force");
        assert_eq!(run_cli(forced), 0);
    }
}
