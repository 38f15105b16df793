use super::machine::{Move, Transition, TuringMachine};
use super::TmError;
use crate::ptm::{Dir, Instruction, Program, Tape};

pub const BLOCK: usize = 27;

/// Instruction offsets of the four `η` blocks inside a state block, indexed
/// by `2 c_A + c_B`.
pub const ETA_OFFSETS: [usize; 4] = [2, 8, 15, 21];

fn eta(t: &Transition) -> [Instruction; 6] {
    let mut out = [Instruction::Halt; 6];
    for (i, tape) in [Tape::A, Tape::B].into_iter().enumerate() {
        let (w, d) = t.actions[i];
        out[2 * i] = Instruction::Write(tape, w);
        out[2 * i + 1] = match d {
            Move::L => Instruction::Move(tape, Dir::L),
            Move::R => Instruction::Move(tape, Dir::R),
            Move::S => Instruction::Write(tape, w),
        };
    }
    out[4] = Instruction::GotoIfZero(Tape::A, BLOCK * t.next);
    out[5] = Instruction::GotoIfOne(Tape::A, BLOCK * t.next);
    out
}

/// Compiles a two-tape machine with `K` non-halt states into a program of
/// length `27K + 1`.
pub fn tm2_to_ptm(machine: &TuringMachine) -> Result<Program, TmError> {
    if machine.num_tapes() != 2 {
        return Err(TmError::Invalid(format!("expected 2 tapes, got {}", machine.num_tapes())));
    }
    let k = machine.halt_state();
    let mut ins = Vec::with_capacity(BLOCK * k + 1);
    for q in 0..k {
        let base = BLOCK * q;
        let d = |a: bool, b: bool| eta(machine.transition(q, &[a, b]));
        ins.push(Instruction::GotoIfOne(Tape::A, base + 14));
        ins.push(Instruction::GotoIfOne(Tape::B, base + 8));
        ins.extend(d(false, false));
        ins.extend(d(false, true));
        ins.push(Instruction::GotoIfOne(Tape::B, base + 21));
        ins.extend(d(true, false));
        ins.extend(d(true, true));
    }
    ins.push(Instruction::Halt);
    Program::new(ins).map_err(|e| TmError::Invalid(e.to_string()))
}

/// One state per instruction plus a halt state; each program step is one
/// machine transition. Falling off the end of the program halts the machine.
pub fn ptm_to_tm2(program: &Program) -> TuringMachine {
    let n = program.len();
    TuringMachine::new(2, n, |j, reads| {
        let keep = |i: usize| (reads[i], Move::S);
        let mut actions = vec![keep(0), keep(1)];
        let next = match program.instructions()[j] {
            Instruction::Halt => n,
            Instruction::Move(t, d) => {
                actions[t.index()].1 = if d == Dir::L { Move::L } else { Move::R };
                j + 1
            }
            Instruction::Write(t, b) => {
                actions[t.index()].0 = b;
                j + 1
            }
            Instruction::GotoIfZero(t, k) => {
                if reads[t.index()] {
                    j + 1
                } else {
                    k
                }
            }
            Instruction::GotoIfOne(t, k) => {
                if reads[t.index()] {
                    k
                } else {
                    j + 1
                }
            }
        };
        Transition { next, actions }
    })
    .expect("program states form a valid machine")
}
