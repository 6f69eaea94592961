//! `dmtl`: command-line front end of the reasoner.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dmtl::analysis::{dependency_info, relevant_rules};
use dmtl::automata::{consistent_with, AutomataConfig, Automaton};
use dmtl::bench::{generate_dataset, generate_queries, run_bench, write_dataset, GeneratorSpec};
use dmtl::materialisation::{materialise, Status};
use dmtl::pipeline::{check_entailment, PipelineConfig};
use dmtl::{parse_dataset, parse_fact, parse_program, Error, Fact, FactStore, Program, Symbol};
use serde_json::json;

const GRAMMAR: &str = "\
Programs (.dmtl) hold rules ended by `.`:

  Head :- Lit, ..., Lit .
  Head  ::= BOTTOM | Atom | BOXMINUS I Head | BOXPLUS I Head
  Lit   ::= TOP | BOTTOM | Atom | DIAMONDMINUS I Lit | DIAMONDPLUS I Lit
          | BOXMINUS I Lit | BOXPLUS I Lit | Lit SINCE I Lit | Lit UNTIL I Lit | ( Lit )
  Atom  ::= Pred | Pred(t1,...,tn)   variables start with an upper-case letter
  I     ::= [a,b] | (a,b] | [a,b) | (a,b)   with 0 <= a <= b, b may be +inf

Datasets (.dtf) hold one fact per line, `#` starts a comment:

  Pred(c1,...,cn)@[a,b]      endpoints are integers, decimals or fractions,
                             or -inf / +inf

Exit status: 0 when an answer was computed, 1 on usage errors, 2 when an
input cannot be read or parsed, 3 when a configured limit stopped the run.";

#[derive(Parser)]
#[command(name = "dmtl", version, about = "DatalogMTL reasoning by materialisation and automata", after_long_help = GRAMMAR)]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    #[arg(short, long)]
    program: PathBuf,
    #[arg(short, long)]
    data: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a fact is entailed.
    Check {
        #[command(flatten)]
        input: Input,
        /// The query, e.g. 'P(a)@[1,2]'.
        #[arg(short, long)]
        fact: String,
        #[arg(long)]
        json: bool,
        /// Run materialisation first and the automaton afterwards.
        #[arg(long)]
        sequential: bool,
        /// Rounds materialisation may spend before leaving the answer to the automaton.
        #[arg(long)]
        max_rounds: Option<usize>,
        #[arg(long)]
        max_states: Option<usize>,
    },
    /// Materialise and print the resulting dataset.
    Materialize {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        max_rounds: Option<usize>,
        #[arg(long)]
        json: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decide whether the program and dataset have a model.
    Consistency {
        #[command(flatten)]
        input: Input,
        /// Print a model window and the explored state graph in DOT.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        max_states: Option<usize>,
    },
    /// Print the predicate dependency graph in DOT.
    Analyze {
        #[arg(short, long)]
        program: PathBuf,
        /// Also report the rules relevant to this predicate.
        #[arg(long)]
        predicate: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic dataset from a JSON specification.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Overrides the seed of the specification.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time entailment checks and count fact types.
    Bench {
        #[command(flatten)]
        input: Input,
        #[arg(short, long, required_unless_present = "random_queries", conflicts_with = "random_queries")]
        queries: Option<PathBuf>,
        /// Sample this many queries from the dataset instead.
        #[arg(long)]
        random_queries: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        json: bool,
    },
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

fn load_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { code: 2, message: format!("{}: {e}", path.display()) }
}

fn limit(e: Error) -> Failure {
    let code = match e {
        Error::StateLimit(_) | Error::Cancelled => 3,
        _ => 1,
    };
    Failure { code, message: e.to_string() }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| load_error(path, e))
}

fn load_program(path: &Path) -> Result<Program, Failure> {
    parse_program(&read(path)?).map_err(|e| load_error(path, e))
}

fn load_facts(path: &Path) -> Result<Vec<Fact>, Failure> {
    parse_dataset(&read(path)?).map_err(|e| load_error(path, e))
}

fn load(input: &Input) -> Result<(Program, Vec<Fact>), Failure> {
    Ok((load_program(&input.program)?, load_facts(&input.data)?))
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure { code: 2, message: format!("{}: {e}", p.display()) }),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(Failure { code: 2, message: e.to_string() })
                }
                _ => Ok(()),
            }
        }
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serialisable") + "\n"
}

fn pipeline_config(sequential: bool, max_rounds: Option<usize>, max_states: Option<usize>) -> PipelineConfig {
    let mut config = if sequential { PipelineConfig::sequential() } else { PipelineConfig::concurrent() };
    if max_rounds.is_some() {
        config.round_budget = max_rounds;
    }
    config.automata.max_states = max_states;
    config
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Check { input, fact, json, sequential, max_rounds, max_states } => {
            let (program, data) = load(&input)?;
            let query = parse_fact(&fact).map_err(|e| Failure { code: 2, message: format!("--fact: {e}") })?;
            let config = pipeline_config(sequential, max_rounds, max_states);
            let result = check_entailment(&program, &FactStore::from_facts(data), &query, &config).map_err(limit)?;
            if json {
                emit(None, &pretty(&result))
            } else {
                emit(None, &format!("{}\n", result.answer))
            }
        }
        Command::Materialize { input, max_rounds, json, output } => {
            let (program, data) = load(&input)?;
            let out = materialise(&program, &FactStore::from_facts(data), max_rounds, None);
            let text = if json {
                let facts: Vec<String> = out.store.facts().iter().map(|f| f.to_string()).collect();
                let bottom: Vec<String> = out.store.bottom_intervals().iter().map(|i| i.to_string()).collect();
                pretty(&json!({
                    "status": out.status,
                    "rounds": out.rounds,
                    "coalescingTime": out.coalescing_time.as_secs_f64(),
                    "facts": facts,
                    "bottom": bottom,
                }))
            } else {
                out.store.dump()
            };
            emit(output.as_deref(), &text)?;
            tracing::info!(rounds = out.rounds, status = ?out.status, "materialisation finished");
            if out.status == Status::RoundLimit {
                return Err(Failure { code: 3, message: format!("round limit reached after {} rounds", out.rounds) });
            }
            Ok(())
        }
        Command::Consistency { input, trace, json, max_states } => {
            let (program, data) = load(&input)?;
            let config = AutomataConfig { max_states, trace, ..AutomataConfig::default() };
            let report = consistent_with(&program, &data, None, &config, None).map_err(limit)?;
            let window = if trace && report.consistent {
                let automaton = Automaton::new(&program, &data, None, config.clone());
                automaton.span_model(None).map_err(limit)?.map(|w| {
                    let grid = automaton.grid();
                    w.letters
                        .iter()
                        .zip(w.ruler_intervals(grid))
                        .filter(|(l, _)| !l.is_empty())
                        .map(|(l, ri)| {
                            let atoms: Vec<String> = l.iter().map(|m| m.to_string()).collect();
                            format!("{ri}: {}", atoms.join(", "))
                        })
                        .collect::<Vec<_>>()
                })
            } else {
                None
            };
            if json {
                emit(None, &pretty(&json!({ "report": report, "window": window })))
            } else {
                let mut text = format!("{}\n", report.consistent);
                if let Some(lines) = window {
                    text.push_str("# model window\n");
                    for l in lines {
                        text.push_str(&format!("# {l}\n"));
                    }
                }
                if let Some(dot) = &report.dot {
                    text.push_str(dot);
                }
                emit(None, &text)
            }
        }
        Command::Analyze { program, predicate, json } => {
            let program = load_program(&program)?;
            let info = dependency_info(&program);
            let relevant = predicate.as_deref().map(|p| relevant_rules(&program, &Symbol::new(p)));
            if json {
                let name = |i: &usize| info.predicates[*i].to_string();
                let components: Vec<Vec<String>> = info.sccs.iter().map(|c| c.iter().map(name).collect()).collect();
                let edges: Vec<[String; 2]> = info.edges.iter().map(|(a, b)| [name(a), name(b)]).collect();
                let recursive: Vec<String> = info.recursive.iter().map(|s| s.to_string()).collect();
                let relevant: Option<Vec<String>> = relevant.map(|r| r.rules.iter().map(|r| r.to_string()).collect());
                emit(
                    None,
                    &pretty(&json!({
                        "predicates": info.predicates.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                        "edges": edges,
                        "components": components,
                        "recursive": recursive,
                        "relevantRules": relevant,
                    })),
                )
            } else {
                let mut text = info.to_dot();
                if let Some(r) = relevant {
                    text.push_str(&format!("// {} relevant rules\n", r.len()));
                    for rule in &r.rules {
                        text.push_str(&format!("// {rule}\n"));
                    }
                }
                emit(None, &text)
            }
        }
        Command::Generate { spec, output, seed } => {
            let mut s: GeneratorSpec = serde_json::from_str(&read(&spec)?).map_err(|e| load_error(&spec, e))?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let facts = generate_dataset(&s).map_err(|e| load_error(&spec, e))?;
            emit(output.as_deref(), &write_dataset(&facts))
        }
        Command::Bench { input, queries, random_queries, seed, sequential, json } => {
            let (program, data) = load(&input)?;
            let queries = match (queries, random_queries) {
                (Some(path), _) => load_facts(&path)?,
                (None, Some(n)) => {
                    generate_queries(&program, &data, n, seed).map_err(|e| load_error(&input.data, e))?
                }
                (None, None) => unreachable!("enforced by the argument parser"),
            };
            let config = pipeline_config(sequential, None, None);
            let report = run_bench(&program, &FactStore::from_facts(data), &queries, &config).map_err(limit)?;
            emit(None, &if json { pretty(&report) } else { report.table() })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| level.into()))
        .with_writer(std::io::stderr)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
