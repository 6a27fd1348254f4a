//! Command-line driver: runs one experiment, writes its reports, and exits
//! 0 on pass, 2 when a bounded-ratio check fails, 1 on any error.

mod config;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;

use config::Config;

pub const EXPERIMENTS: [&str; 10] = [
    "simulate",
    "strichartz-scan",
    "bilinear-check",
    "loss-check",
    "gain-check",
    "holder-check",
    "linear-check",
    "counting-check",
    "conservation-check",
    "perturbation-check",
];

#[derive(Debug, Parser)]
#[command(name = "kfl", version, about = "Spectral Boltzmann solver and estimate lab")]
struct Cli {
    /// One of: simulate, strichartz-scan, bilinear-check, loss-check,
    /// gain-check, holder-check, linear-check, counting-check,
    /// conservation-check, perturbation-check
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(EXPERIMENTS))]
    experiment: String,

    /// INI file layered over the built-in defaults
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master seed; overrides `[run] seed`
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,

    /// Output directory (default: $KFL_OUT_DIR, then ./kfl-out)
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Print the merged configuration for the experiment and exit
    #[arg(long)]
    print_config: bool,

    /// Per-experiment overrides as `--key value` or `--key=value`
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let key = arg.strip_prefix("--").ok_or_else(|| anyhow!("expected `--key value`, got `{arg}`"))?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        } else {
            let value = it.next().ok_or_else(|| anyhow!("override `--{key}` has no value"))?;
            out.push((key.to_string(), value.clone()));
        }
    }
    Ok(out)
}

impl Cli {
    /// Global flags written after the first override land in the trailing
    /// list; move them back to their fields.
    fn absorb_globals(&mut self) -> Result<()> {
        let mut rest = Vec::new();
        let mut it = std::mem::take(&mut self.overrides).into_iter();
        while let Some(arg) = it.next() {
            let (flag, inline) = match arg.split_once('=') {
                Some((f, v)) => (f.to_string(), Some(v.to_string())),
                None => (arg.clone(), None),
            };
            if flag == "--print-config" && inline.is_none() {
                self.print_config = true;
                continue;
            }
            if !["--config", "--seed", "--jobs", "--out-dir"].contains(&flag.as_str()) {
                rest.push(arg);
                continue;
            }
            let value = match inline {
                Some(v) => v,
                None => it.next().ok_or_else(|| anyhow!("{flag} needs a value"))?,
            };
            match flag.as_str() {
                "--config" => self.config = Some(value.into()),
                "--seed" => self.seed = Some(value.parse().with_context(|| format!("--seed {value}"))?),
                "--jobs" => self.jobs = Some(value.parse().with_context(|| format!("--jobs {value}"))?),
                _ => self.out_dir = Some(value.into()),
            }
        }
        self.overrides = rest;
        Ok(())
    }
}

fn resolve_config(cli: &Cli) -> Result<Config> {
    let mut cfg = Config::defaults();
    if let Some(path) = &cli.config {
        cfg.merge_file(path)?;
    }
    for (key, value) in parse_overrides(&cli.overrides)? {
        let section = if key == "seed" { "run" } else { cli.experiment.as_str() };
        cfg.set(section, &key, &value).with_context(|| format!("override --{key}"))?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("run", "seed", &seed.to_string())?;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| std::env::var_os("KFL_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("kfl-out"))
}

fn run(mut cli: Cli) -> Result<bool> {
    cli.absorb_globals()?;
    let cli = &cli;
    let cfg = resolve_config(cli)?;
    if cli.print_config {
        println!("version = {}", cfg.version());
        for line in cfg.dump(&cli.experiment) {
            println!("{line}");
        }
        return Ok(true);
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let dir = out_dir(cli);
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let start = Instant::now();
    let reports = experiments::run(&cli.experiment, &cfg, &dir)?;
    let secs = start.elapsed().as_secs_f64();
    let mut passed = true;
    for mut report in reports {
        report.wall_clock_secs = secs;
        let (csv, _) = report.write(&dir)?;
        let verdict = if report.passed { "pass" } else { "FAIL" };
        println!("{}: {verdict} ({} rows, max ratio {:.4}) -> {}", report.experiment, report.rows.len(), report.max_ratio(), csv.display());
        for (k, v) in &report.summary {
            println!("  {k} = {v}");
        }
        passed &= report.passed;
    }
    println!("{} finished in {secs:.1}s", cli.experiment);
    Ok(passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_accept_both_spellings() {
        let args: Vec<String> = ["--N", "1", "--K=2", "--gauge_shift", "-3,4"].iter().map(|s| s.to_string()).collect();
        let o = parse_overrides(&args).unwrap();
        assert_eq!(o[1], ("K".into(), "2".into()));
        assert_eq!(o[2].1, "-3,4");
        assert!(parse_overrides(&["N".to_string()]).is_err());
        assert!(parse_overrides(&["--N".to_string()]).is_err());
    }

    #[test]
    fn globals_after_overrides_are_recovered() {
        let mut cli = Cli::parse_from(["kfl", "counting-check", "--N", "1", "--out-dir", "o", "--seed=3", "--K", "2"]);
        cli.absorb_globals().unwrap();
        assert_eq!(cli.out_dir, Some(PathBuf::from("o")));
        assert_eq!(cli.seed, Some(3));
        assert_eq!(cli.overrides, ["--N", "1", "--K", "2"]);
    }
}
