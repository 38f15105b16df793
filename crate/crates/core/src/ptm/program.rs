use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PtmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tape {
    A,
    B,
}

impl Tape {
    pub fn index(self) -> usize {
        match self {
            Tape::A => 0,
            Tape::B => 1,
        }
    }

    pub fn from_index(i: usize) -> Tape {
        if i == 0 {
            Tape::A
        } else {
            Tape::B
        }
    }

    pub fn letter(self) -> char {
        match self {
            Tape::A => 'A',
            Tape::B => 'B',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dir {
    L,
    R,
}

impl Dir {
    pub fn delta(self) -> i64 {
        match self {
            Dir::L => -1,
            Dir::R => 1,
        }
    }
}

/// One 2-PTM instruction. Goto targets are absolute instruction indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    Halt,
    Move(Tape, Dir),
    Write(Tape, bool),
    /// `τ!k`: jump to `k` when the cell under the head of `τ` is 0.
    GotoIfZero(Tape, usize),
    /// `τ?k`: jump to `k` when the cell under the head of `τ` is 1.
    GotoIfOne(Tape, usize),
}

impl Instruction {
    pub fn target(&self) -> Option<usize> {
        match *self {
            Instruction::GotoIfZero(_, k) | Instruction::GotoIfOne(_, k) => Some(k),
            _ => None,
        }
    }

    pub fn is_goto(&self) -> bool {
        self.target().is_some()
    }

    pub fn with_target(self, k: usize) -> Self {
        match self {
            Instruction::GotoIfZero(t, _) => Instruction::GotoIfZero(t, k),
            Instruction::GotoIfOne(t, _) => Instruction::GotoIfOne(t, k),
            other => other,
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Instruction::Halt => write!(f, "#"),
            Instruction::Move(t, d) => write!(f, "{}{:?}", t.letter(), d),
            Instruction::Write(t, b) => write!(f, "{}{}", t.letter(), b as u8),
            Instruction::GotoIfZero(t, k) => write!(f, "{}!{k}", t.letter()),
            Instruction::GotoIfOne(t, k) => write!(f, "{}?{k}", t.letter()),
        }
    }
}

impl FromStr for Instruction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "#" {
            return Ok(Instruction::Halt);
        }
        let mut chars = s.chars();
        let tape = match chars.next() {
            Some('A') => Tape::A,
            Some('B') => Tape::B,
            _ => return Err(format!("unknown instruction `{s}`")),
        };
        let op = chars.next().ok_or_else(|| format!("unknown instruction `{s}`"))?;
        let rest = chars.as_str();
        let target = || -> Result<usize, String> {
            if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
                return Err(format!("bad goto target in `{s}`"));
            }
            rest.parse().map_err(|_| format!("goto target out of range in `{s}`"))
        };
        let plain = |i: Instruction| if rest.is_empty() { Ok(i) } else { Err(format!("unknown instruction `{s}`")) };
        match op {
            'L' => plain(Instruction::Move(tape, Dir::L)),
            'R' => plain(Instruction::Move(tape, Dir::R)),
            '0' => plain(Instruction::Write(tape, false)),
            '1' => plain(Instruction::Write(tape, true)),
            '!' => Ok(Instruction::GotoIfZero(tape, target()?)),
            '?' => Ok(Instruction::GotoIfOne(tape, target()?)),
            _ => Err(format!("unknown instruction `{s}`")),
        }
    }
}

impl Serialize for Instruction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Instruction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A validated, nonempty instruction sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    instructions: Vec<Instruction>,
}

impl Program {
    pub fn new(instructions: Vec<Instruction>) -> Result<Self, PtmError> {
        if instructions.is_empty() {
            return Err(PtmError::EmptyProgram);
        }
        for (j, ins) in instructions.iter().enumerate() {
            if let Some(k) = ins.target() {
                if k == j {
                    return Err(PtmError::SelfGoto { index: j });
                }
                if k >= instructions.len() {
                    return Err(PtmError::TargetOutOfRange { index: j, target: k, len: instructions.len() });
                }
            }
        }
        Ok(Program { instructions })
    }

    /// Parses whitespace-separated mnemonics. `;` starts a comment that runs
    /// to the end of the line.
    pub fn parse(text: &str) -> Result<Self, PtmError> {
        let mut out = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let code = line.split(';').next().unwrap_or("");
            let mut col = 0;
            for word in code.split_inclusive(char::is_whitespace) {
                let tok = word.trim_end();
                if !tok.is_empty() {
                    let ins = tok.parse().map_err(|message| PtmError::Syntax {
                        line: ln + 1,
                        column: col + 1,
                        message,
                    })?;
                    out.push(ins);
                }
                col += word.chars().count();
            }
        }
        Program::new(out)
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, j: usize) -> Option<&Instruction> {
        self.instructions.get(j)
    }
}

/// Space-separated assembly on a single line; parses back to the same program.
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, ins) in self.instructions.iter().enumerate() {
            if j > 0 {
                write!(f, " ")?;
            }
            write!(f, "{ins}")?;
        }
        Ok(())
    }
}

impl FromStr for Program {
    type Err = PtmError;

    fn from_str(s: &str) -> Result<Self, PtmError> {
        Program::parse(s)
    }
}

pub fn format_program(p: &Program) -> String {
    p.to_string()
}

pub fn parse_program(text: &str) -> Result<Program, PtmError> {
    Program::parse(text)
}
