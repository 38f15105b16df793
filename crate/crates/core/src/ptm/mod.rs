//! Two-tape Post-Turing machines: instructions, programs and the reference
//! interpreter.

mod machine;
mod program;
mod random;

use serde::Serialize;
use thiserror::Error;

pub use machine::{init_state, run, run_quiet, write_trace_jsonl, MachineState, RunResult, SparseTape, StepRecord};
pub use program::{format_program, parse_program, Dir, Instruction, Program, Tape};
pub use random::{random_program, RandomProgramConfig};

pub const DEFAULT_FUEL: u64 = 1_000_000;

/// The balanced-bracket recognizer used as the running example.
pub const DYCK_SOURCE: &str = "A?14 A0 AL A0 AL A?1 AR AR A1 AR BL B?13 A1 # AR A?19 B1 BR B!21 BL B!24 \
B0 AR B!0 AL AR AR A?25 A0 AL A0 AL A?28 AR AR A1 #";

pub fn dyck_program() -> Program {
    Program::parse(DYCK_SOURCE).expect("built-in program parses")
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PtmError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("empty program")]
    EmptyProgram,
    #[error("instruction {index} jumps to itself")]
    SelfGoto { index: usize },
    #[error("instruction {index} jumps to {target}, outside 0..{len}")]
    TargetOutOfRange { index: usize, target: usize, len: usize },
    #[error("program counter {pc} ran past the last instruction ({len} instructions)")]
    PcOutOfRange { pc: usize, len: usize },
    #[error("machine already halted")]
    Halted,
    #[error("fuel exhausted after {fuel} steps")]
    FuelExhausted { fuel: u64 },
}

/// `S(0) = 10`, `S(1) = 11`.
pub fn shannon_encode(bits: &[bool]) -> Vec<bool> {
    bits.iter().flat_map(|&b| [true, b]).collect()
}

/// Inverse of [`shannon_encode`]; stops at the first pair starting with 0.
pub fn shannon_decode(bits: &[bool]) -> Vec<bool> {
    bits.chunks(2).take_while(|p| p[0] && p.len() == 2).map(|p| p[1]).collect()
}

/// Parses a string of `0`/`1` characters.
pub fn parse_bits(s: &str) -> Result<Vec<bool>, String> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(format!("`{s}` is not a bit string")),
        })
        .collect()
}

pub fn format_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// All bit strings of length `0..=max_len`, shortest first.
pub fn all_inputs(max_len: usize) -> Vec<Vec<bool>> {
    let mut out = Vec::new();
    for n in 0..=max_len {
        for v in 0..(1u64 << n) {
            out.push((0..n).map(|i| v >> (n - 1 - i) & 1 == 1).collect());
        }
    }
    out
}
