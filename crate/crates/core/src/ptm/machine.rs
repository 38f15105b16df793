use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::program::{Instruction, Program, Tape};
use super::{shannon_encode, PtmError};

/// A bi-infinite binary tape. Cells never written read as 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SparseTape {
    cells: HashMap<i64, bool>,
}

impl SparseTape {
    pub fn get(&self, i: i64) -> bool {
        self.cells.get(&i).copied().unwrap_or(false)
    }

    pub fn set(&mut self, i: i64, b: bool) {
        self.cells.insert(i, b);
    }

    /// Cells `from..from+len`.
    pub fn read_range(&self, from: i64, len: usize) -> Vec<bool> {
        (0..len as i64).map(|d| self.get(from + d)).collect()
    }

    /// Bits from cell 0 up to the first blank pair, undone from the Shannon encoding.
    pub fn decode_from_origin(&self) -> Vec<bool> {
        let mut out = Vec::new();
        let mut i = 0;
        while self.get(i) {
            out.push(self.get(i + 1));
            i += 2;
        }
        out
    }

    pub fn written(&self) -> impl Iterator<Item = (i64, bool)> + '_ {
        self.cells.iter().map(|(&k, &v)| (k, v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineState {
    pub tapes: [SparseTape; 2],
    pub heads: [i64; 2],
    pub pc: usize,
    pub halted: bool,
    pub step_count: u64,
}

/// The quadruple `(j, ι_j, c_A, c_B)` of one executed step, plus the heads
/// before the step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub pc: usize,
    pub instr: Instruction,
    pub head_a: i64,
    pub head_b: i64,
    pub read_a: u8,
    pub read_b: u8,
}

impl StepRecord {
    /// Whether a goto step jumped.
    pub fn jumped(&self) -> bool {
        match self.instr {
            Instruction::GotoIfZero(t, _) => self.read(t) == 0,
            Instruction::GotoIfOne(t, _) => self.read(t) == 1,
            _ => false,
        }
    }

    pub fn read(&self, t: Tape) -> u8 {
        match t {
            Tape::A => self.read_a,
            Tape::B => self.read_b,
        }
    }
}

impl MachineState {
    /// Writes `S(input)` to tape A starting at cell 0.
    pub fn new(input: &[bool]) -> Self {
        let mut a = SparseTape::default();
        for (i, b) in shannon_encode(input).into_iter().enumerate() {
            a.set(i as i64, b);
        }
        MachineState { tapes: [a, SparseTape::default()], heads: [0, 0], pc: 0, halted: false, step_count: 0 }
    }

    pub fn read(&self, t: Tape) -> bool {
        self.tapes[t.index()].get(self.heads[t.index()])
    }

    pub fn output(&self) -> Vec<bool> {
        self.tapes[0].decode_from_origin()
    }

    pub fn step(&mut self, program: &Program) -> Result<StepRecord, PtmError> {
        if self.halted {
            return Err(PtmError::Halted);
        }
        let ins = *program.get(self.pc).ok_or(PtmError::PcOutOfRange { pc: self.pc, len: program.len() })?;
        let rec = StepRecord {
            step: self.step_count,
            pc: self.pc,
            instr: ins,
            head_a: self.heads[0],
            head_b: self.heads[1],
            read_a: self.read(Tape::A) as u8,
            read_b: self.read(Tape::B) as u8,
        };
        let mut next = self.pc + 1;
        match ins {
            Instruction::Halt => {
                self.halted = true;
                next = self.pc;
            }
            Instruction::Move(t, d) => self.heads[t.index()] += d.delta(),
            Instruction::Write(t, b) => {
                let h = self.heads[t.index()];
                self.tapes[t.index()].set(h, b);
            }
            Instruction::GotoIfZero(t, k) => {
                if !self.read(t) {
                    next = k;
                }
            }
            Instruction::GotoIfOne(t, k) => {
                if self.read(t) {
                    next = k;
                }
            }
        }
        self.pc = next;
        self.step_count += 1;
        Ok(rec)
    }

    /// Steps until halt without recording a trace. Returns the steps taken.
    pub fn run_to_halt(&mut self, program: &Program, fuel: u64) -> Result<u64, PtmError> {
        let start = self.step_count;
        while !self.halted {
            if self.step_count - start >= fuel {
                return Err(PtmError::FuelExhausted { fuel });
            }
            self.step(program)?;
        }
        Ok(self.step_count - start)
    }
}

pub fn init_state(input: &[bool]) -> MachineState {
    MachineState::new(input)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub output: Vec<bool>,
    pub trace: Vec<StepRecord>,
    /// Executed steps, counting the final `#`.
    pub steps: u64,
    pub state: MachineState,
}

/// Runs `program` on `input`, recording every step. The halting `#` counts
/// as a step.
pub fn run(program: &Program, input: &[bool], fuel: u64) -> Result<RunResult, PtmError> {
    let mut state = MachineState::new(input);
    let mut trace = Vec::new();
    while !state.halted {
        if state.step_count >= fuel {
            return Err(PtmError::FuelExhausted { fuel });
        }
        trace.push(state.step(program)?);
    }
    Ok(RunResult { output: state.output(), steps: state.step_count, trace, state })
}

/// Output and step count only.
pub fn run_quiet(program: &Program, input: &[bool], fuel: u64) -> Result<(Vec<bool>, u64), PtmError> {
    let mut state = MachineState::new(input);
    let steps = state.run_to_halt(program, fuel)?;
    Ok((state.output(), steps))
}

/// One JSON object per line.
pub fn write_trace_jsonl<W: Write>(trace: &[StepRecord], mut w: W) -> std::io::Result<()> {
    for r in trace {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    Ok(())
}
