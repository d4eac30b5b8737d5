use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use progpoly::formats::FpValue;
use progpoly::generator::generate;
use progpoly::validator::{self, ConvergenceSpec};
use progpoly::{CompiledFunction, FpFormat, GeneratorConfig, RoundingMode};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "progpoly", version, about = "Progressive polynomial generation and checking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an artifact from a TOML generator config.
    Gen {
        config: PathBuf,
        /// Output directory for `<function>.json` and `<function>.report.json`.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write `<function>.c`.
        #[arg(long)]
        emit_source: bool,
    },
    /// Exhaustively compare an artifact with the oracle.
    Check {
        artifact: PathBuf,
        /// Format to check, e.g. `fp(16,8)` or `bfloat16`; without it every
        /// rung is checked with its own term count.
        #[arg(long)]
        fmt: Option<String>,
        #[arg(long, default_value = "rn,ra,rz,ru,rd")]
        modes: String,
        /// Serve every format with the top rung's full term count.
        #[arg(long)]
        full: bool,
        /// Directory for oracle result tables.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check `fp(k,E)` for a range of `k` with full term count.
    Sweep {
        artifact: PathBuf,
        #[arg(long)]
        from: Option<u32>,
        #[arg(long)]
        to: Option<u32>,
        #[arg(long, default_value = "rn,ra,rz,ru,rd")]
        modes: String,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Iteration statistics of the sampling loop on synthetic instances.
    BenchConvergence {
        spec: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Re-export an artifact, optionally with C source.
    Export {
        artifact: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        emit_source: bool,
    },
    /// Evaluate hex-encoded inputs of `--fmt`.
    Eval {
        artifact: PathBuf,
        #[arg(long)]
        fmt: String,
        #[arg(long, default_value = "rn")]
        mode: String,
        /// Use this rung instead of the smallest covering one.
        #[arg(long)]
        rung: Option<usize>,
        inputs: Vec<String>,
    },
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let s = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, s + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{s}"),
    }
    Ok(())
}

fn load(path: &Path) -> Result<CompiledFunction> {
    CompiledFunction::load(path).with_context(|| format!("loading {}", path.display()))
}

fn summarize(report: &progpoly::ConformanceReport) {
    for e in &report.entries {
        eprintln!(
            "{} {:>14} {} rung {} ({} terms): {} inputs, {} mismatches",
            if e.pass { "PASS" } else { "FAIL" },
            e.format.name(),
            e.mode,
            e.rung,
            e.terms,
            e.total,
            e.mismatch_count
        );
    }
    for n in &report.notes {
        eprintln!("FAIL {n}");
    }
}

fn parse_encoding(s: &str, fmt: FpFormat) -> Result<FpValue> {
    let t = s.trim_start_matches("0x").trim_start_matches("0X");
    let bits = u64::from_str_radix(t, 16).with_context(|| format!("bad hex input {s:?}"))?;
    if bits >= fmt.encoding_count() {
        bail!("{s} is not an encoding of {}", fmt.name());
    }
    Ok(fmt.value(bits))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen { config, out, emit_source } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg: GeneratorConfig = toml::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
            let (poly, report) = generate(&cfg)?;
            let cf = CompiledFunction::new(poly)?;
            let stem = cf.function().name();
            let files = cf.export(&out, stem, emit_source)?;
            emit(&report, Some(&out.join(format!("{stem}.report.json"))))?;
            let terms: Vec<String> = cf.ladder().iter().map(|r| format!("{}:{}", r.format.name(), r.terms)).collect();
            eprintln!(
                "{stem}: terms [{}], {} sub-domains, {} special cases, {} iterations, {:.1}s",
                terms.join(", "),
                cf.poly.coefficients.len(),
                cf.poly.special_cases.len(),
                report.iterations,
                report.wall_time_secs
            );
            for f in files {
                eprintln!("wrote {} ({} bytes)", f.display(), std::fs::metadata(&f)?.len());
            }
            Ok(true)
        }
        Command::Check { artifact, fmt, modes, full, cache, json } => {
            let cf = load(&artifact)?;
            let modes = RoundingMode::parse_list(&modes)?;
            let report = match fmt {
                None => validator::check_progressive(&cf, cache.as_deref())?,
                Some(f) => {
                    let fmt: FpFormat = f.parse()?;
                    let rung = if full { cf.top_rung() } else { cf.rung_for(fmt)? };
                    validator::check_with_rung(&cf, fmt, &modes, rung, cache.as_deref())?
                }
            };
            summarize(&report);
            emit(&report, json.as_deref())?;
            Ok(report.pass)
        }
        Command::Sweep { artifact, from, to, modes, json } => {
            let cf = load(&artifact)?;
            let modes = RoundingMode::parse_list(&modes)?;
            let range = validator::sweep_range(&cf);
            let range = from.unwrap_or(*range.start())..=to.unwrap_or(*range.end());
            let report = validator::sweep(&cf, range, &modes)?;
            summarize(&report);
            emit(&report, json.as_deref())?;
            Ok(report.pass)
        }
        Command::BenchConvergence { spec, json } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let spec: ConvergenceSpec = toml::from_str(&text)?;
            let stats = validator::convergence_bench(&spec);
            for s in &stats {
                eprintln!(
                    "{} k={} n={}: {}/{} converged, median {} iterations (bound {:.0}), lucky {:.3} (floor {:.3})",
                    if s.pass { "PASS" } else { "FAIL" },
                    s.k,
                    s.n,
                    s.successes,
                    s.runs,
                    s.median_iterations,
                    s.bound,
                    s.lucky_fraction,
                    s.lucky_floor
                );
            }
            emit(&stats, json.as_deref())?;
            Ok(stats.iter().all(|s| s.pass))
        }
        Command::Export { artifact, out, emit_source } => {
            let cf = load(&artifact)?;
            for f in cf.export(&out, cf.function().name(), emit_source)? {
                eprintln!("wrote {} ({} bytes)", f.display(), std::fs::metadata(&f)?.len());
            }
            Ok(true)
        }
        Command::Eval { artifact, fmt, mode, rung, inputs } => {
            let cf = load(&artifact)?;
            let fmt: FpFormat = fmt.parse()?;
            let mode: RoundingMode = mode.parse()?;
            let rung = match rung {
                Some(r) if r < cf.ladder().len() => r,
                Some(r) => bail!("artifact has no rung {r}"),
                None => cf.rung_for(fmt)?,
            };
            for s in inputs {
                let x = parse_encoding(&s, fmt)?;
                let y = cf.evaluate_rung(x.to_f64(), fmt, mode, rung);
                println!("{} {}", x.hex(), y.hex());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
