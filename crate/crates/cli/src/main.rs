use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use promptvm::codec::{build_prompt, readout, tokenize, Token};
use promptvm::harness::{self, BenchOptions, CorpusConfig, HarnessError};
use promptvm::numerics::{Backend, ExactBackend, FloatBackend, FloatMode, PrecisionConfig, GUARD_BITS_ENV};
use promptvm::ptm::{self, format_bits, parse_bits, Program, DEFAULT_FUEL};
use promptvm::tm::{ptm_to_tm2, tm2_to_ptm, TuringMachine};
use promptvm::transformer::{self, BackendChoice, Transformer};

#[derive(Parser)]
#[command(name = "promptvm", version, about = "Run 2-PTM programs on a fixed hardmax Transformer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a two-tape TM to 2-PTM assembly, or back with --direction=ptm2tm.
    Compile {
        #[arg(long, conflicts_with = "program")]
        tm: Option<PathBuf>,
        #[arg(long)]
        program: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Direction::Tm2ptm)]
        direction: Direction,
    },
    /// Run a program with the interpreter.
    RunPtm {
        #[command(flatten)]
        run: RunArgs,
        /// Write the step trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Print the prompt of a program.
    BuildPrompt {
        #[arg(long)]
        program: PathBuf,
    },
    /// Print the tokenized input.
    Tokenize {
        #[arg(long, default_value = "")]
        input: String,
    },
    /// Generate the chain of thought with the Transformer.
    Generate {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        numeric: NumericArgs,
        /// Write hidden states as JSON lines keyed by position and channel.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Differential checks over a corpus directory.
    Verify {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
    },
    /// Per-run cost table.
    Bench {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
        #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
        out: OutFormat,
        #[arg(long, env = GUARD_BITS_ENV)]
        guard_bits: Option<u32>,
        /// Skip the minimal-bits search.
        #[arg(long)]
        skip_bits: bool,
        /// Include wall time (makes the output nondeterministic).
        #[arg(long)]
        timing: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Tm2ptm,
    Ptm2tm,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Exact,
    Float,
}

#[derive(Args)]
struct RunArgs {
    /// A `.ptm` program, or a `.tm` machine compiled on the fly.
    #[arg(long)]
    program: PathBuf,
    #[arg(long, default_value = "")]
    input: String,
    #[arg(long, default_value_t = DEFAULT_FUEL)]
    fuel: u64,
}

#[derive(Args)]
struct NumericArgs {
    #[arg(long, value_enum, default_value_t = BackendArg::Exact)]
    backend: BackendArg,
    /// Significant bits of the float backend.
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long, env = GUARD_BITS_ENV)]
    guard_bits: Option<u32>,
}

#[derive(Args)]
struct CorpusArgs {
    /// Directory of `.ptm` and `.tm` files; the built-in corpus if omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = CorpusConfig::default().random_programs)]
    random_programs: usize,
}

impl CorpusArgs {
    fn load(&self) -> Result<Vec<harness::Case>, HarnessError> {
        let cfg = CorpusConfig { seed: self.seed, random_programs: self.random_programs, ..CorpusConfig::default() };
        match &self.corpus {
            Some(dir) => harness::load_corpus(dir, &cfg),
            None => harness::builtin_corpus(&cfg),
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a HarnessError,
    message: String,
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, HarnessError> {
    let text = read(path)?;
    if path.extension().and_then(|e| e.to_str()) == Some("tm") {
        Ok(tm2_to_ptm(&TuringMachine::parse(&text)?)?)
    } else {
        Ok(Program::parse(&text)?)
    }
}

fn bits(s: &str) -> Result<Vec<bool>, HarnessError> {
    parse_bits(s).map_err(|e| HarnessError::Measurement(format!("--input: {e}")))
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path).map(BufWriter::new).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn write_hidden_states<B: Backend>(
    t: &Transformer,
    b: B,
    context: &[Token],
    generated: &[Token],
    path: &Path,
) -> Result<(), HarnessError> {
    let mut all = context.to_vec();
    // The final `$` is never fed back.
    all.extend(&generated[..generated.len().saturating_sub(1)]);
    let states = t.forward(b.clone(), &all)?;
    let mut w = create(path)?;
    transformer::write_trace_jsonl(t.config(), &b, &states, &mut w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Compile { tm, program, direction } => match (direction, tm, program) {
            (Direction::Tm2ptm, Some(path), None) => {
                let m = TuringMachine::parse(&read(&path)?)?;
                writeln!(stdout, "{}", tm2_to_ptm(&m)?)?;
            }
            (Direction::Ptm2tm, None, Some(path)) => {
                let p = Program::parse(&read(&path)?)?;
                write!(stdout, "{}", ptm_to_tm2(&p))?;
            }
            _ => {
                return Err(HarnessError::Measurement(
                    "compile takes --tm FILE, or --direction=ptm2tm --program FILE".into(),
                ))
            }
        },
        Command::RunPtm { run, trace } => {
            let p = load_program(&run.program)?;
            let r = ptm::run(&p, &bits(&run.input)?, run.fuel)?;
            if let Some(path) = trace {
                let mut w = create(&path)?;
                ptm::write_trace_jsonl(&r.trace, &mut w)?;
                w.flush()?;
            }
            writeln!(stdout, "{}", format_bits(&r.output))?;
            eprintln!("steps: {}", r.steps);
        }
        Command::BuildPrompt { program } => {
            writeln!(stdout, "{}", build_prompt(&load_program(&program)?))?;
        }
        Command::Tokenize { input } => {
            writeln!(stdout, "{}", tokenize(&bits(&input)?))?;
        }
        Command::Generate { run, numeric, trace } => {
            let p = load_program(&run.program)?;
            let context = build_prompt(&p).concat(&tokenize(&bits(&run.input)?));
            let t = Transformer::new();
            let mut precision = PrecisionConfig::default().with_env_override();
            if let Some(g) = numeric.guard_bits {
                precision.guard_bits = g;
            }
            if let Some(b) = numeric.bits {
                precision = PrecisionConfig::new(b, precision.guard_bits, precision.max_escalations)
                    .map_err(|e| HarnessError::Transformer(e.into()))?;
            }
            let choice = match numeric.backend {
                BackendArg::Exact => BackendChoice::Exact,
                BackendArg::Float => BackendChoice::Float { precision, mode: FloatMode::Rounded },
            };
            let g = t.generate_with(choice, context.tokens(), run.fuel)?;
            writeln!(stdout, "{}", g.tokens)?;
            eprintln!("backend: {}{}", g.backend, if g.fell_back { " (fell back)" } else { "" });
            if let Ok(out) = readout(g.tokens.tokens()) {
                eprintln!("readout: {}", format_bits(&out));
            }
            if let Some(path) = trace {
                match numeric.backend {
                    BackendArg::Exact => write_hidden_states(&t, ExactBackend, context.tokens(), g.tokens.tokens(), &path)?,
                    BackendArg::Float => write_hidden_states(
                        &t,
                        FloatBackend::rounded(precision.significant_bits, precision.guard_bits),
                        context.tokens(),
                        g.tokens.tokens(),
                        &path,
                    )?,
                }
            }
        }
        Command::Verify { corpus, fuel } => {
            let cases = corpus.load()?;
            let summary = harness::verify(&Transformer::new(), &cases, fuel)?;
            serde_json::to_writer_pretty(&mut stdout, &summary).map_err(|e| HarnessError::Io(e.to_string()))?;
            writeln!(stdout)?;
            return Ok(summary.ok());
        }
        Command::Bench { corpus, fuel, out, guard_bits, skip_bits, timing } => {
            let cases = corpus.load()?;
            let mut opts = BenchOptions { fuel, min_bits: !skip_bits, timing, ..BenchOptions::default() };
            if let Some(g) = guard_bits {
                opts.guard_bits = g;
            }
            let reports = harness::bench(&Transformer::new(), &cases, &opts)?;
            match out {
                OutFormat::Csv => write!(stdout, "{}", harness::reports_csv(&reports)?)?,
                OutFormat::Json => {
                    let doc = serde_json::json!({
                        "note": harness::CSV_HEADER_NOTE.trim_start_matches("# "),
                        "seed": corpus.seed,
                        "guard_bits": opts.guard_bits,
                        "runs": reports,
                    });
                    serde_json::to_writer_pretty(&mut stdout, &doc).map_err(|e| HarnessError::Io(e.to_string()))?;
                    writeln!(stdout)?;
                }
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            let report = ErrorReport { message: e.to_string(), error: &e };
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| format!("{{\"message\":{:?}}}", report.message)));
            ExitCode::FAILURE
        }
    }
}
