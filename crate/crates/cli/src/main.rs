use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use demon_ledger::io;
use demon_ledger::protocol::ProtocolSpec;
use demon_ledger::report::{csv_header, RunReport};
use demon_ledger::scenarios::{self, ErasureMode, PointerClass, ScenarioConfig};
use demon_ledger::search::{random_search, random_search_to_csv, SearchConfig};

#[derive(Parser)]
#[command(name = "demon-ledger", version, about = "Work and information ledgers for feedback-control and erasure protocols")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioName {
    Szilard,
    Counterexample,
    ViolatingErasure,
    RankCheck,
    Null,
    PartialErasure,
}

#[derive(Clone, Copy, ValueEnum)]
enum ErasureArg {
    Reset,
    ScrambleOnly,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a protocol file and report ledgers and verdicts.
    Run {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        /// Report information quantities in bits.
        #[arg(long)]
        bits: bool,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a protocol file for structural problems only.
    Verify { path: PathBuf },
    /// Build and run a named protocol.
    Scenario {
        #[arg(value_enum)]
        name: ScenarioName,
        #[arg(long, default_value_t = 8)]
        stages: usize,
        #[arg(long, default_value_t = 2)]
        memory_rank: usize,
        #[arg(long)]
        memory_dim: Option<usize>,
        #[arg(long, default_value_t = 1)]
        sectors: usize,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the generated protocol file here.
        #[arg(long)]
        emit: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        #[arg(long)]
        bits: bool,
    },
    /// Seeded random search over protocols.
    Search {
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dimension caps `A,M,K`.
        #[arg(long, default_value = "3,3,3")]
        dims: String,
        /// `all` or a comma-separated list of luders, bistochastic-non-luders,
        /// nuclear, generic.
        #[arg(long, default_value = "all")]
        pointer_class: String,
        #[arg(long, value_enum, default_value = "reset")]
        erasure: ErasureArg,
        #[arg(long, default_value_t = 20)]
        max_recorded: usize,
        /// Search report (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Per-sample CSV; defaults to the report path with a .csv extension.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

type CliResult<T> = Result<T, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn write_out(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn render(report: RunReport, format: Format, bits: bool) -> CliResult<String> {
    let report = if bits { report.in_bits() } else { report };
    Ok(match format {
        Format::Table => report.to_table(),
        Format::Json => serde_json::to_string_pretty(&report).map_err(err)? + "\n",
        Format::Csv => format!("{}\n{}\n", csv_header(), report.csv_row()),
    })
}

fn cmd_run(path: &Path, format: Format, bits: bool, out: Option<&Path>) -> CliResult<()> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let text = String::from_utf8(bytes.clone()).map_err(err)?;
    let spec = io::load_str(&text).map_err(err)?;
    let report = RunReport::evaluate(&spec, &path.display().to_string(), &bytes).map_err(err)?;
    write_out(&render(report, format, bits)?, out)
}

fn cmd_verify(path: &Path) -> CliResult<bool> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let spec = match io::parse_str(&text) {
        Ok(s) => s,
        Err(e) => {
            println!("FAIL  {e}");
            return Ok(false);
        }
    };
    let issues = spec.issues();
    if issues.is_empty() {
        println!("ok    {}", path.display());
    }
    for i in &issues {
        println!("FAIL  {}: {}", i.location, i.message);
    }
    Ok(issues.is_empty())
}

fn emit(spec: &ProtocolSpec, path: Option<&Path>) -> CliResult<Vec<u8>> {
    let text = io::to_string_pretty(spec);
    if let Some(p) = path {
        std::fs::write(p, &text).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(text.into_bytes())
}

fn cmd_scenario(
    name: ScenarioName,
    cfg: ScenarioConfig,
    emit_to: Option<&Path>,
    format: Format,
    bits: bool,
) -> CliResult<()> {
    let spec = match name {
        ScenarioName::Szilard => scenarios::build_szilard(&cfg),
        ScenarioName::Counterexample => scenarios::build_counterexample(&cfg),
        ScenarioName::ViolatingErasure => scenarios::build_counterexample(&cfg)
            .and_then(|base| scenarios::build_violating_feedback_erasure(&base, cfg.stages)),
        ScenarioName::Null => scenarios::build_null(cfg.beta),
        ScenarioName::PartialErasure => scenarios::random_partial_erasure(cfg.seed),
        ScenarioName::RankCheck => {
            let diag: Vec<f64> = match cfg.memory_rank {
                1 => vec![1.0, 0.0],
                2 => vec![0.7, 0.3],
                r => return Err(format!("rank-check supports a qubit memory of rank 1 or 2, got {r}")),
            };
            let scheme = scenarios::cnot_scheme(&diag).map_err(err)?;
            let d = scenarios::rank_bound_check(&scheme, &[1, 1]).map_err(err)?;
            let text = match format {
                Format::Table => format!(
                    "memory rank        {}\nbound              {}\nbound holds        {}\neffects independent {}\nKraus ranks        {:?}\nefficient          {}\nconsistent         {}\n",
                    d.memory_rank, d.bound, d.bound_holds, d.effects_independent, d.kraus_ranks, d.efficient, d.consistent
                ),
                _ => serde_json::to_string_pretty(&d).map_err(err)? + "\n",
            };
            return write_out(&text, None);
        }
    }
    .map_err(err)?;
    let bytes = emit(&spec, emit_to)?;
    let source = format!("scenario:{}", spec.name);
    let report = RunReport::evaluate(&spec, &source, &bytes).map_err(err)?;
    write_out(&render(report, format, bits)?, None)
}

fn parse_classes(s: &str) -> CliResult<Vec<PointerClass>> {
    if s == "all" {
        return Ok(PointerClass::ALL.to_vec());
    }
    s.split(',')
        .map(|c| PointerClass::parse(c.trim()).ok_or_else(|| format!("unknown pointer class {c}")))
        .collect()
}

fn parse_dims(s: &str) -> CliResult<(usize, usize, usize)> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("--dims {s}: {e}")))
        .collect::<CliResult<_>>()?;
    match v.as_slice() {
        [a, m, k] if *a >= 2 && *m >= 2 && *k >= 2 => Ok((*a, *m, *k)),
        _ => Err(format!("--dims expects three caps A,M,K each >= 2, got {s}")),
    }
}

fn run(cli: Cli) -> CliResult<bool> {
    match cli.cmd {
        Cmd::Run {
            path,
            format,
            bits,
            out,
        } => cmd_run(&path, format, bits, out.as_deref()).map(|_| true),
        Cmd::Verify { path } => cmd_verify(&path),
        Cmd::Scenario {
            name,
            stages,
            memory_rank,
            memory_dim,
            sectors,
            beta,
            seed,
            emit,
            format,
            bits,
        } => {
            let cfg = ScenarioConfig {
                beta,
                stages,
                sectors,
                memory_rank,
                memory_dim,
                outcome: 0,
                seed,
            };
            cmd_scenario(name, cfg, emit.as_deref(), format, bits).map(|_| true)
        }
        Cmd::Search {
            samples,
            seed,
            dims,
            pointer_class,
            erasure,
            max_recorded,
            out,
            csv,
        } => {
            let (a, m, k) = parse_dims(&dims)?;
            let cfg = SearchConfig {
                samples,
                seed,
                max_dim_a: a,
                max_dim_m: m,
                max_outcomes: k,
                classes: parse_classes(&pointer_class)?,
                erasure: match erasure {
                    ErasureArg::Reset => ErasureMode::Reset,
                    ErasureArg::ScrambleOnly => ErasureMode::ScrambleOnly,
                },
                max_recorded,
            };
            let csv = csv.unwrap_or_else(|| out.with_extension("csv"));
            let report = if csv.as_os_str() == "-" {
                random_search(&cfg, |_| {}).map_err(err)?
            } else {
                random_search_to_csv(&cfg, &csv).map_err(err)?
            };
            let text = serde_json::to_string_pretty(&report).map_err(err)? + "\n";
            write_out(&text, Some(&out))?;
            for (class, st) in &report.strata {
                eprintln!(
                    "{class:<24} samples {:>5}  errors {:>3}  entropy decreases {:>4}  recorded {:>3}",
                    st.samples,
                    st.errors,
                    st.entropy_decrease_count,
                    st.recorded.len()
                );
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
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
