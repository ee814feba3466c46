use std::fs;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bkb_cli::bench::{render_summary, run_benchmark, BenchConfig, Profile, CSV_HEADER};
use bkb_cli::{
    cmd_gen, cmd_heuristic, cmd_oracle, cmd_solve, cmd_validate, CliError, CmdOutput, GlobalOpts,
    HeuristicKind,
};
use bkb_core::gen::GenParams;
use bkb_core::oracle::OracleLimits;
use bkb_core::search::SearchLimits;

#[derive(Parser)]
#[command(
    name = "bkb",
    version,
    about = "Belief revision over Bayesian knowledge bases: validate, cost tables, best-first search, exhaustive oracle, instance generation, benchmarks"
)]
struct Cli {
    /// Seed for anything randomized (generation, evidence sampling).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Machine-readable CSV on stdout instead of prose.
    #[arg(long, global = true)]
    csv: bool,
    /// Print nothing to stdout; rely on exit codes and output files.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a knowledge base file against the structural rules.
    Validate {
        file: String,
        /// Accept zero-weight supports.
        #[arg(long)]
        allow_zero_weights: bool,
    },
    /// Compute the cost-sharing table for given evidence and verify it.
    Heuristic {
        file: String,
        /// Evidence as var=state (or a bare single-state variable); may
        /// repeat. Evidence lines in the file are used too.
        #[arg(long = "evidence")]
        evidence: Vec<String>,
        /// Verification tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        /// Also print each component's linear program.
        #[arg(long)]
        dump_lp: bool,
        #[arg(long)]
        allow_zero_weights: bool,
    },
    /// Search for the k cheapest explanations of the evidence.
    Solve {
        file: String,
        #[arg(long = "evidence")]
        evidence: Vec<String>,
        /// How many solutions to find.
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Cost model steering the search.
        #[arg(long, value_enum, default_value_t = HeuristicArg::CostSharing)]
        heuristic: HeuristicArg,
        /// Stop after creating this many states.
        #[arg(long)]
        max_states: Option<usize>,
        /// Stop after this much wall time.
        #[arg(long)]
        max_seconds: Option<f64>,
        /// Log every pop, generation, and emission.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        allow_zero_weights: bool,
    },
    /// Enumerate explanations exhaustively (small instances only).
    Oracle {
        file: String,
        #[arg(long = "evidence")]
        evidence: Vec<String>,
        /// Print every inference instead of just the cheapest.
        #[arg(long, conflicts_with = "min")]
        list: bool,
        /// Print only the cheapest inference (the default).
        #[arg(long)]
        min: bool,
        /// Backtracking step budget; 0 means unlimited.
        #[arg(long, default_value_t = 10_000_000)]
        max_steps: u64,
        /// Skip explanations needing more supports than this.
        #[arg(long)]
        max_supports: Option<usize>,
        #[arg(long)]
        allow_zero_weights: bool,
    },
    /// Generate a random instance and write it as a BKB file.
    Gen {
        /// Output path for the generated file.
        out: String,
        /// Parameter preset; explicit flags below override nothing when
        /// a profile is chosen.
        #[arg(long, value_enum)]
        profile: Option<ProfileArg>,
        #[arg(long, default_value_t = 6)]
        variables: usize,
        /// States per variable, as N or LO..HI.
        #[arg(long, default_value = "1..2", value_parser = parse_urange)]
        states: (usize, usize),
        /// Supports per i-node, as N or LO..HI.
        #[arg(long, default_value = "1..2", value_parser = parse_urange)]
        supports: (usize, usize),
        /// Tails per support, as N or LO..HI.
        #[arg(long, default_value = "0..2", value_parser = parse_urange)]
        tails: (usize, usize),
        /// Support weights, as W or LO..HI.
        #[arg(long, default_value = "0.5..8", value_parser = parse_frange)]
        weights: (f64, f64),
        /// Arc-pair reversals to attempt.
        #[arg(long, default_value_t = 3)]
        cycle_pairs: usize,
        /// Evidence declarations to sample into the file.
        #[arg(long, default_value_t = 0)]
        evidence_count: usize,
        /// Retry generation until the graph really contains a cycle.
        #[arg(long)]
        cyclic: bool,
    },
    /// Generate a suite and compare both heuristics on it.
    Bench {
        #[arg(long, default_value_t = 10)]
        instances: usize,
        #[arg(long, value_enum, default_value_t = ProfileArg::Desk)]
        profile: ProfileArg,
        #[arg(long, default_value_t = 2)]
        evidence_count: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 150_000)]
        max_states: usize,
        #[arg(long, default_value_t = 10.0)]
        max_seconds: f64,
        /// Write the full CSV here; stdout then carries the summary only.
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HeuristicArg {
    CostSharing,
    CostSoFar,
}

impl From<HeuristicArg> for HeuristicKind {
    fn from(value: HeuristicArg) -> Self {
        match value {
            HeuristicArg::CostSharing => HeuristicKind::CostSharing,
            HeuristicArg::CostSoFar => HeuristicKind::CostSoFar,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProfileArg {
    Desk,
    Bench,
}

impl From<ProfileArg> for Profile {
    fn from(value: ProfileArg) -> Self {
        match value {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Bench => Profile::Bench,
        }
    }
}

fn parse_urange(text: &str) -> Result<(usize, usize), String> {
    parse_range(text, |s| s.parse::<usize>().map_err(|e| e.to_string()))
}

fn parse_frange(text: &str) -> Result<(f64, f64), String> {
    parse_range(text, |s| s.parse::<f64>().map_err(|e| e.to_string()))
}

fn parse_range<T: Copy + PartialOrd>(
    text: &str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<(T, T), String> {
    let (lo, hi) = match text.split_once("..") {
        Some((lo, hi)) => (parse(lo.trim())?, parse(hi.trim())?),
        None => {
            let v = parse(text.trim())?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(format!("empty range {text}"));
    }
    Ok((lo, hi))
}

fn dispatch(cli: Cli) -> Result<CmdOutput, CliError> {
    let opts = GlobalOpts {
        seed: cli.seed,
        csv: cli.csv,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Validate {
            file,
            allow_zero_weights,
        } => cmd_validate(&file, allow_zero_weights, &opts),
        Command::Heuristic {
            file,
            evidence,
            tolerance,
            dump_lp,
            allow_zero_weights,
        } => cmd_heuristic(&file, &evidence, tolerance, dump_lp, allow_zero_weights, &opts),
        Command::Solve {
            file,
            evidence,
            k,
            heuristic,
            max_states,
            max_seconds,
            trace,
            allow_zero_weights,
        } => {
            let limits = SearchLimits {
                max_states,
                max_seconds,
            };
            cmd_solve(
                &file,
                &evidence,
                k,
                heuristic.into(),
                &limits,
                trace,
                allow_zero_weights,
                &opts,
            )
        }
        Command::Oracle {
            file,
            evidence,
            list,
            min: _,
            max_steps,
            max_supports,
            allow_zero_weights,
        } => {
            let limits = OracleLimits {
                max_supports,
                max_steps: (max_steps > 0).then_some(max_steps),
            };
            cmd_oracle(&file, &evidence, list, &limits, allow_zero_weights, &opts)
        }
        Command::Gen {
            out,
            profile,
            variables,
            states,
            supports,
            tails,
            weights,
            cycle_pairs,
            evidence_count,
            cyclic,
        } => {
            let params = match profile {
                Some(ProfileArg::Desk) => bkb_core::gen::desk_params(opts.seed),
                Some(ProfileArg::Bench) => bkb_core::gen::bench_params(opts.seed),
                None => GenParams {
                    variable_count: variables,
                    states_per_variable: states,
                    supports_per_inode: supports,
                    tail_size: tails,
                    weight_range: weights,
                    cycle_pairs,
                    seed: opts.seed,
                },
            };
            cmd_gen(&out, params, evidence_count, cyclic, &opts)
        }
        Command::Bench {
            instances,
            profile,
            evidence_count,
            k,
            max_states,
            max_seconds,
            out,
        } => {
            let config = BenchConfig {
                instances,
                profile: profile.into(),
                evidence_count,
                k,
                limits: SearchLimits {
                    max_states: Some(max_states),
                    max_seconds: Some(max_seconds),
                },
                seed: opts.seed,
            };
            let records = run_benchmark(&config);
            let summary = render_summary(&records);
            let mut csv = String::with_capacity(records.len() * 64);
            csv.push_str(CSV_HEADER);
            csv.push('\n');
            for r in &records {
                csv.push_str(&r.csv_row());
                csv.push('\n');
            }
            csv.push_str(&summary);
            let text = match out {
                Some(path) => {
                    fs::write(&path, &csv).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
                    summary
                }
                None => csv,
            };
            Ok(CmdOutput { text, code: 0 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let quiet = cli.quiet;
    match dispatch(cli) {
        Ok(output) => {
            if !quiet && !output.text.is_empty() {
                print!("{}", output.text);
            }
            ExitCode::from(output.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
