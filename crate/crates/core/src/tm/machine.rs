use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::TmError;
use crate::ptm::{shannon_encode, SparseTape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    L,
    S,
    R,
}

impl Move {
    pub fn delta(self) -> i64 {
        match self {
            Move::L => -1,
            Move::S => 0,
            Move::R => 1,
        }
    }

    fn letter(self) -> char {
        match self {
            Move::L => 'L',
            Move::S => 'S',
            Move::R => 'R',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub next: usize,
    /// `(write, move)` per tape.
    pub actions: Vec<(bool, Move)>,
}

/// A binary multi-tape machine with states `0..=K`, start 0 and halt `K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TuringMachine {
    num_tapes: usize,
    halt: usize,
    /// Indexed by `state << num_tapes | symbols`, where tape `i`'s symbol is
    /// bit `num_tapes - 1 - i`.
    table: Vec<Transition>,
}

fn symbol_index(reads: &[bool]) -> usize {
    reads.iter().fold(0, |acc, &b| acc << 1 | b as usize)
}

impl TuringMachine {
    /// `delta(q, reads)` must be given for every non-halt state and every
    /// symbol vector.
    pub fn new(
        num_tapes: usize,
        halt: usize,
        mut delta: impl FnMut(usize, &[bool]) -> Transition,
    ) -> Result<Self, TmError> {
        if num_tapes == 0 || num_tapes > 8 {
            return Err(TmError::Invalid(format!("unsupported tape count {num_tapes}")));
        }
        if halt == 0 {
            return Err(TmError::Invalid("halt state must differ from the start state".into()));
        }
        let mut table = Vec::with_capacity(halt << num_tapes);
        for q in 0..halt {
            for s in 0..1usize << num_tapes {
                let reads: Vec<bool> = (0..num_tapes).map(|i| s >> (num_tapes - 1 - i) & 1 == 1).collect();
                let t = delta(q, &reads);
                if t.next > halt {
                    return Err(TmError::Invalid(format!("state {q} moves to unknown state {}", t.next)));
                }
                if t.actions.len() != num_tapes {
                    return Err(TmError::Invalid(format!("state {q} has the wrong number of tape actions")));
                }
                table.push(t);
            }
        }
        Ok(TuringMachine { num_tapes, halt, table })
    }

    pub fn num_tapes(&self) -> usize {
        self.num_tapes
    }

    /// `K`, which is also the number of non-halt states.
    pub fn halt_state(&self) -> usize {
        self.halt
    }

    pub fn transition(&self, q: usize, reads: &[bool]) -> &Transition {
        &self.table[q << self.num_tapes | symbol_index(reads)]
    }

    /// Reads the line format: `tapes m`, `start s`, `halt h`, then
    /// `q r0..r(m-1) -> q' w0d0 .. w(m-1)d(m-1)` with `d` one of `L`, `S`, `R`.
    /// State names are arbitrary words; `;` starts a comment.
    pub fn parse(text: &str) -> Result<Self, TmError> {
        RawMachine::parse(text)?.normalize()
    }
}

impl fmt::Display for TuringMachine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tapes {}", self.num_tapes)?;
        writeln!(f, "start 0")?;
        writeln!(f, "halt {}", self.halt)?;
        for q in 0..self.halt {
            for s in 0..1usize << self.num_tapes {
                let t = &self.table[q << self.num_tapes | s];
                write!(f, "{q} ")?;
                for i in 0..self.num_tapes {
                    write!(f, "{}", s >> (self.num_tapes - 1 - i) & 1)?;
                }
                write!(f, " -> {}", t.next)?;
                for (w, d) in &t.actions {
                    write!(f, " {}{}", *w as u8, d.letter())?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// A parsed machine file before states are renumbered.
#[derive(Debug, Clone)]
pub struct RawMachine {
    pub num_tapes: usize,
    pub start: String,
    pub halt: String,
    pub rules: Vec<(String, Vec<bool>, String, Vec<(bool, Move)>)>,
}

impl RawMachine {
    pub fn parse(text: &str) -> Result<Self, TmError> {
        let mut num_tapes = None;
        let mut start = None;
        let mut halt = None;
        let mut rules = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let err = |m: &str| TmError::Syntax { line: n + 1, message: m.into() };
            let line = line.split(';').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            match words[0] {
                "tapes" | "start" | "halt" => {
                    if words.len() != 2 {
                        return Err(err(&format!("`{}` takes one argument", words[0])));
                    }
                    match words[0] {
                        "tapes" => num_tapes = Some(words[1].parse::<usize>().map_err(|_| err("bad tape count"))?),
                        "start" => start = Some(words[1].to_string()),
                        _ => halt = Some(words[1].to_string()),
                    }
                }
                _ => {
                    let m = num_tapes.ok_or_else(|| err("`tapes` must come before transitions"))?;
                    if words.len() != 4 + m || words[2] != "->" {
                        return Err(err("expected `q reads -> q' actions`"));
                    }
                    let reads = words[1]
                        .chars()
                        .map(|c| match c {
                            '0' => Ok(false),
                            '1' => Ok(true),
                            _ => Err(err("read symbols must be 0 or 1")),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    if reads.len() != m {
                        return Err(err("one read symbol per tape"));
                    }
                    let mut actions = Vec::with_capacity(m);
                    for w in &words[4..] {
                        let mut c = w.chars();
                        let bit = match c.next() {
                            Some('0') => false,
                            Some('1') => true,
                            _ => return Err(err("action must start with 0 or 1")),
                        };
                        let mv = match (c.next(), c.next()) {
                            (Some('L'), None) => Move::L,
                            (Some('S'), None) => Move::S,
                            (Some('R'), None) => Move::R,
                            _ => return Err(err("action must end with L, S or R")),
                        };
                        actions.push((bit, mv));
                    }
                    rules.push((words[0].to_string(), reads, words[3].to_string(), actions));
                }
            }
        }
        Ok(RawMachine {
            num_tapes: num_tapes.ok_or(TmError::Syntax { line: 0, message: "missing `tapes`".into() })?,
            start: start.unwrap_or_else(|| "0".into()),
            halt: halt.ok_or(TmError::Syntax { line: 0, message: "missing `halt`".into() })?,
            rules,
        })
    }

    /// Renumbers states: start becomes 0, halt becomes `K`, the rest keep
    /// their order of first appearance.
    pub fn normalize(&self) -> Result<TuringMachine, TmError> {
        if self.start == self.halt {
            return Err(TmError::Invalid("start and halt states coincide".into()));
        }
        let mut order = vec![self.start.clone()];
        for (q, _, q2, _) in &self.rules {
            for s in [q, q2] {
                if *s != self.halt && !order.contains(s) {
                    order.push(s.clone());
                }
            }
        }
        let halt = order.len();
        let id: HashMap<&str, usize> = order
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .chain([(self.halt.as_str(), halt)])
            .collect();
        let mut table: HashMap<(usize, usize), Transition> = HashMap::new();
        for (q, reads, q2, actions) in &self.rules {
            let from = id[q.as_str()];
            if from == halt {
                return Err(TmError::Invalid("transition out of the halt state".into()));
            }
            let t = Transition { next: id[q2.as_str()], actions: actions.clone() };
            if table.insert((from, symbol_index(reads)), t).is_some() {
                return Err(TmError::Invalid(format!("duplicate transition for state `{q}`")));
            }
        }
        let mut missing = None;
        let tm = TuringMachine::new(self.num_tapes, halt, |q, reads| {
            table.get(&(q, symbol_index(reads))).cloned().unwrap_or_else(|| {
                missing.get_or_insert((q, reads.to_vec()));
                Transition { next: halt, actions: vec![(false, Move::S); self.num_tapes] }
            })
        })?;
        if let Some((q, reads)) = missing {
            let r: String = reads.iter().map(|&b| if b { '1' } else { '0' }).collect();
            return Err(TmError::Invalid(format!("no transition for state `{}` reading {r}", order[q])));
        }
        Ok(tm)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TmState {
    pub tapes: Vec<SparseTape>,
    pub heads: Vec<i64>,
    pub state: usize,
    pub step_count: u64,
}

impl TmState {
    pub fn new(machine: &TuringMachine, input: &[bool]) -> Self {
        let mut tapes = vec![SparseTape::default(); machine.num_tapes()];
        for (i, b) in shannon_encode(input).into_iter().enumerate() {
            tapes[0].set(i as i64, b);
        }
        TmState { tapes, heads: vec![0; machine.num_tapes()], state: 0, step_count: 0 }
    }

    pub fn halted(&self, machine: &TuringMachine) -> bool {
        self.state == machine.halt_state()
    }

    pub fn step(&mut self, machine: &TuringMachine) {
        let reads: Vec<bool> = self.tapes.iter().zip(&self.heads).map(|(t, &h)| t.get(h)).collect();
        let t = machine.transition(self.state, &reads);
        for (i, &(w, d)) in t.actions.iter().enumerate() {
            self.tapes[i].set(self.heads[i], w);
            self.heads[i] += d.delta();
        }
        self.state = t.next;
        self.step_count += 1;
    }
}

/// Output (`S^{-1}` of tape 0 from cell 0) and the number of transitions.
pub fn tm_run(machine: &TuringMachine, input: &[bool], fuel: u64) -> Result<(Vec<bool>, u64), TmError> {
    let mut s = TmState::new(machine, input);
    while !s.halted(machine) {
        if s.step_count >= fuel {
            return Err(TmError::FuelExhausted { fuel });
        }
        s.step(machine);
    }
    Ok((s.tapes[0].decode_from_origin(), s.step_count))
}
