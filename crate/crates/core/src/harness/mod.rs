//! Corpus runs, differential checks and the CoT-length and precision
//! measurements.

mod corpus;
mod fit;

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::codec::{build_prompt, cot_with_run, readout, tokenize, CodecError, TokenStream};
use crate::numerics::{ExactBackend, FloatBackend, PrecisionConfig};
use crate::ptm::{format_bits, Program, PtmError};
use crate::tm::{ptm_to_tm2, tm_run, TmError, BLOCK};
use crate::transformer::{Session, Transformer, TransformerError};

pub use corpus::{builtin_corpus, load_corpus, random_cases, Case, CorpusConfig, Source};
pub use fit::{linear_fit, LinearFit};

#[derive(Debug, Error, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum HarnessError {
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Ptm(#[from] PtmError),
    #[error(transparent)]
    Tm(#[from] TmError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Transformer(#[from] TransformerError),
    #[error("{0}")]
    Measurement(String),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

/// Measured cost and agreement of one (program, input) run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub program: String,
    pub input: String,
    pub n: usize,
    pub ptm_steps: u64,
    pub cot_tokens: usize,
    /// Smallest significant-bit count at which the float backend reproduces
    /// the exact run.
    pub min_bits: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
    pub oracle_match: bool,
    pub readout_match: bool,
}

/// Outcome of every differential check on one (program, input) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseCheck {
    pub program: String,
    pub input: String,
    pub oracle_match: bool,
    pub readout_match: bool,
    pub ptm_steps: u64,
    /// Steps of the source machine, for compiled cases.
    pub tm_steps: Option<u64>,
    /// Compiled cases only: the TM and the compiled program agree, and the
    /// program takes at most `9 t + 9` steps for `t` TM steps.
    pub compiled_agrees: Option<bool>,
    /// `ptm_to_tm2` takes exactly as many steps and gives the same output.
    pub tm_sim: bool,
    pub error: Option<String>,
}

impl CaseCheck {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.oracle_match && self.readout_match && self.compiled_agrees != Some(false) && self.tm_sim
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub programs: usize,
    pub runs: usize,
    pub failed: usize,
    /// Program lengths of compiled cases are `27 K + 1`.
    pub layout_ok: bool,
    pub failures: Vec<CaseCheck>,
    /// Every check, in corpus order.
    #[serde(skip)]
    pub checks: Vec<CaseCheck>,
}

impl VerifySummary {
    pub fn ok(&self) -> bool {
        self.failed == 0 && self.layout_ok
    }
}

/// Runs the Transformer on `prompt · tokenize(x)` and compares against the
/// interpreter.
struct Run {
    generated: TokenStream,
    oracle: TokenStream,
    output: Vec<bool>,
    steps: u64,
}

fn run_exact(base: &Session<ExactBackend>, program: &Program, input: &[bool], fuel: u64) -> Result<Run, HarnessError> {
    let (oracle, result) = cot_with_run(program, input, fuel)?;
    let mut s = base.clone();
    for &t in tokenize(input).tokens() {
        s.push(t)?;
    }
    let generated = s.generate(fuel.saturating_mul(8))?;
    Ok(Run { generated, oracle, output: result.output, steps: result.steps })
}

fn work_items(corpus: &[Case]) -> Vec<(usize, usize)> {
    corpus.iter().enumerate().flat_map(|(c, case)| (0..case.inputs.len()).map(move |i| (c, i))).collect()
}

fn prepared(t: &Transformer, corpus: &[Case]) -> Result<Vec<Session<ExactBackend>>, HarnessError> {
    corpus
        .par_iter()
        .map(|c| Ok(t.prepare(ExactBackend, build_prompt(&c.program).tokens())?))
        .collect()
}

fn check_one(case: &Case, base: &Session<ExactBackend>, input: &[bool], fuel: u64) -> CaseCheck {
    let mut check = CaseCheck {
        program: case.id.clone(),
        input: format_bits(input),
        oracle_match: false,
        readout_match: false,
        ptm_steps: 0,
        tm_steps: None,
        compiled_agrees: None,
        tm_sim: false,
        error: None,
    };
    let result = (|| -> Result<(), HarnessError> {
        let run = run_exact(base, &case.program, input, fuel)?;
        check.oracle_match = run.generated == run.oracle;
        check.readout_match = readout(run.generated.tokens()).ok().as_ref() == Some(&run.output);
        check.ptm_steps = run.steps;
        if let Some(m) = &case.machine {
            let (out, tm_steps) = tm_run(m, input, fuel)?;
            check.tm_steps = Some(tm_steps);
            check.compiled_agrees = Some(out == run.output && run.steps <= 9 * tm_steps + 9);
        }
        let (out, steps) = tm_run(&ptm_to_tm2(&case.program), input, fuel)?;
        check.tm_sim = out == run.output && steps == run.steps;
        Ok(())
    })();
    if let Err(e) = result {
        check.error = Some(e.to_string());
    }
    check
}

/// Every differential check on every (program, input) pair of the corpus,
/// under the exact backend.
pub fn verify(t: &Transformer, corpus: &[Case], fuel: u64) -> Result<VerifySummary, HarnessError> {
    let bases = prepared(t, corpus)?;
    let checks: Vec<CaseCheck> = work_items(corpus)
        .into_par_iter()
        .map(|(c, i)| check_one(&corpus[c], &bases[c], &corpus[c].inputs[i], fuel))
        .collect();
    let layout_ok = corpus
        .iter()
        .filter_map(|c| c.machine.as_ref().map(|m| (c, m)))
        .all(|(c, m)| c.program.len() == BLOCK * m.halt_state() + 1);
    let failures: Vec<CaseCheck> = checks.iter().filter(|c| !c.passed()).cloned().collect();
    Ok(VerifySummary { programs: corpus.len(), runs: checks.len(), failed: failures.len(), layout_ok, failures, checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchOptions {
    pub fuel: u64,
    /// Binary-search the minimal significant bits for each run.
    pub min_bits: bool,
    pub guard_bits: u32,
    pub timing: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            fuel: crate::ptm::DEFAULT_FUEL,
            min_bits: true,
            guard_bits: PrecisionConfig::default().with_env_override().guard_bits,
            timing: false,
        }
    }
}

/// One report per (program, input), in corpus order.
pub fn bench(t: &Transformer, corpus: &[Case], opts: &BenchOptions) -> Result<Vec<RunReport>, HarnessError> {
    let bases = prepared(t, corpus)?;
    work_items(corpus)
        .into_par_iter()
        .map(|(c, i)| {
            let case = &corpus[c];
            let input = &case.inputs[i];
            let start = Instant::now();
            let run = run_exact(&bases[c], &case.program, input, opts.fuel)?;
            let wall_ms = opts.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
            let min_bits = if opts.min_bits {
                Some(min_sufficient_bits(t, &case.program, input, &run.generated, opts.guard_bits)?)
            } else {
                None
            };
            Ok(RunReport {
                program: case.id.clone(),
                input: format_bits(input),
                n: input.len(),
                ptm_steps: run.steps,
                cot_tokens: run.generated.len(),
                min_bits,
                wall_ms,
                oracle_match: run.generated == run.oracle,
                readout_match: readout(run.generated.tokens()).ok().as_ref() == Some(&run.output),
            })
        })
        .collect()
}

pub const CSV_HEADER_NOTE: &str = "# measured by this implementation";

pub fn reports_csv(reports: &[RunReport]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let timing = reports.iter().any(|r| r.wall_ms.is_some());
    let mut header = vec!["program", "input", "n", "ptm_steps", "cot_tokens", "min_bits"];
    if timing {
        header.push("wall_ms");
    }
    header.extend(["oracle_match", "readout_match"]);
    w.write_record(&header).map_err(|e| HarnessError::Io(e.to_string()))?;
    for r in reports {
        let mut row = vec![
            r.program.clone(),
            r.input.clone(),
            r.n.to_string(),
            r.ptm_steps.to_string(),
            r.cot_tokens.to_string(),
            r.min_bits.map(|b| b.to_string()).unwrap_or_default(),
        ];
        if timing {
            row.push(r.wall_ms.map(|t| format!("{t:.3}")).unwrap_or_default());
        }
        row.extend([r.oracle_match.to_string(), r.readout_match.to_string()]);
        w.write_record(&row).map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| HarnessError::Io(e.to_string()))?;
    Ok(format!("{CSV_HEADER_NOTE}\n{}", String::from_utf8_lossy(&body)))
}

/// Smallest significant-bit count (rounded float mode, no escalation) at
/// which generation reproduces `expected` token for token. Assumes success
/// is monotone in the bit count.
pub fn min_sufficient_bits(
    t: &Transformer,
    program: &Program,
    input: &[bool],
    expected: &TokenStream,
    guard_bits: u32,
) -> Result<u32, HarnessError> {
    let context = build_prompt(program).concat(&tokenize(input));
    let fuel = expected.len() as u64;
    let ok = |bits: u32| match t.generate(FloatBackend::rounded(bits, guard_bits), context.tokens(), fuel) {
        Ok(out) => out == *expected,
        Err(_) => false,
    };
    let mut lo = PrecisionConfig::MIN_SIGNIFICANT_BITS;
    if ok(lo) {
        return Ok(lo);
    }
    let mut hi = lo * 2;
    while !ok(hi) {
        lo = hi;
        hi *= 2;
        if hi > 4096 {
            return Err(HarnessError::Measurement("no bit count up to 4096 reproduces the exact run".into()));
        }
    }
    // ok(hi) and !ok(lo)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CotRow {
    pub n: usize,
    pub input: String,
    pub ptm_steps: u64,
    pub cot_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CotGrowth {
    pub program: String,
    pub rows: Vec<CotRow>,
    /// Least squares of CoT tokens on 2-PTM steps.
    pub fit: Option<LinearFit>,
    /// Intercept raised so that every row lies on or below the fitted slope.
    pub bound_intercept: Option<f64>,
    pub warnings: Vec<String>,
}

/// CoT length against 2-PTM steps for the inputs `family(n)`, `n` in `ns`.
/// Runs that exhaust `fuel` are dropped with a warning.
pub fn measure_cot_growth(
    t: &Transformer,
    id: &str,
    program: &Program,
    family: impl Fn(usize) -> Vec<bool> + Sync,
    ns: &[usize],
    fuel: u64,
) -> Result<CotGrowth, HarnessError> {
    let base = t.prepare(ExactBackend, build_prompt(program).tokens())?;
    let results: Vec<Result<CotRow, String>> = ns
        .par_iter()
        .map(|&n| {
            let x = family(n);
            match run_exact(&base, program, &x, fuel) {
                Ok(run) if run.generated == run.oracle => Ok(CotRow {
                    n,
                    input: format_bits(&x),
                    ptm_steps: run.steps,
                    cot_tokens: run.generated.len(),
                }),
                Ok(_) => Err(format!("n = {n}: generated stream differs from the oracle")),
                Err(e) => Err(format!("n = {n}: {e}")),
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(w) => warnings.push(w),
        }
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.ptm_steps as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.cot_tokens as f64).collect();
    let fit = linear_fit(&xs, &ys);
    let bound_intercept = fit.as_ref().map(|f| f.bound_intercept(&xs, &ys));
    Ok(CotGrowth { program: id.into(), rows, fit, bound_intercept, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionRow {
    pub n: usize,
    pub input: String,
    /// Prompt, input and generated tokens.
    pub total_len: usize,
    pub bits: u32,
}

/// Bits at `total_len` and at the first measured length at least twice it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingCheck {
    pub from_len: usize,
    pub to_len: usize,
    pub from_bits: u32,
    pub to_bits: u32,
    pub allowed: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionGrowth {
    pub program: String,
    pub guard_bits: u32,
    pub rows: Vec<PrecisionRow>,
    /// Least squares of bits on `log2(total_len)`.
    pub fit: Option<LinearFit>,
    /// `a` such that `bits <= a + b log2(I)` holds on every row.
    pub bound_intercept: Option<f64>,
    pub doubling: Vec<DoublingCheck>,
}

impl PrecisionGrowth {
    pub fn doubling_ok(&self) -> bool {
        self.doubling.iter().all(|d| d.ok)
    }
}

/// Slack, in bits, allowed on top of the fitted slope when the length doubles.
pub const DOUBLING_SLACK: f64 = 2.0;

/// Minimal float bits against total length for the inputs `family(n)`.
pub fn measure_precision_growth(
    t: &Transformer,
    id: &str,
    program: &Program,
    family: impl Fn(usize) -> Vec<bool> + Sync,
    ns: &[usize],
    guard_bits: u32,
    fuel: u64,
) -> Result<PrecisionGrowth, HarnessError> {
    let base = t.prepare(ExactBackend, build_prompt(program).tokens())?;
    let prompt_len = base.len();
    let rows: Vec<PrecisionRow> = ns
        .par_iter()
        .map(|&n| {
            let x = family(n);
            let run = run_exact(&base, program, &x, fuel)?;
            let bits = min_sufficient_bits(t, program, &x, &run.generated, guard_bits)?;
            Ok(PrecisionRow {
                n,
                input: format_bits(&x),
                total_len: prompt_len + tokenize(&x).len() + run.generated.len(),
                bits,
            })
        })
        .collect::<Result<_, HarnessError>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| (r.total_len as f64).log2()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.bits as f64).collect();
    let fit = linear_fit(&xs, &ys);
    let bound_intercept = fit.as_ref().map(|f| f.bound_intercept(&xs, &ys));
    let slope = fit.as_ref().map_or(0.0, |f| f.slope.max(0.0));
    let mut doubling = Vec::new();
    for r in &rows {
        let next = rows.iter().filter(|s| s.total_len >= 2 * r.total_len).min_by_key(|s| s.total_len);
        if let Some(s) = next {
            let allowed = slope * (s.total_len as f64 / r.total_len as f64).log2() + DOUBLING_SLACK;
            doubling.push(DoublingCheck {
                from_len: r.total_len,
                to_len: s.total_len,
                from_bits: r.bits,
                to_bits: s.bits,
                allowed,
                ok: s.bits as f64 - r.bits as f64 <= allowed,
            });
        }
    }
    Ok(PrecisionGrowth { program: id.into(), guard_bits, rows, fit, bound_intercept, doubling })
}
