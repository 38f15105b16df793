//! Multi-tape Turing machines and the compilers between two-tape machines
//! and 2-PTM programs.

mod compile;
mod machine;

use serde::Serialize;
use thiserror::Error;

pub use compile::{ptm_to_tm2, tm2_to_ptm, BLOCK, ETA_OFFSETS};
pub use machine::{tm_run, Move, RawMachine, TmState, Transition, TuringMachine};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum TmError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid machine: {0}")]
    Invalid(String),
    #[error("fuel exhausted after {fuel} transitions")]
    FuelExhausted { fuel: u64 },
}

/// The hand-built two-tape machines shipped in `corpus/`.
pub fn builtin_machines() -> Vec<(&'static str, TuringMachine)> {
    [
        ("bitflip", include_str!("../../../../corpus/bitflip.tm")),
        ("append_one", include_str!("../../../../corpus/append_one.tm")),
        ("parity", include_str!("../../../../corpus/parity.tm")),
        ("copy", include_str!("../../../../corpus/copy.tm")),
    ]
    .into_iter()
    .map(|(name, src)| (name, TuringMachine::parse(src).expect("built-in machine parses")))
    .collect()
}

pub fn builtin_machine(name: &str) -> Option<TuringMachine> {
    builtin_machines().into_iter().find(|(n, _)| *n == name).map(|(_, m)| m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ptm::{all_inputs, parse_bits, run_quiet};

    #[test]
    fn parity_example() {
        let m = builtin_machine("parity").unwrap();
        assert_eq!(m.halt_state(), 5);
        let (out, steps) = tm_run(&m, &parse_bits("0110").unwrap(), 1000).unwrap();
        assert_eq!(out, parse_bits("0").unwrap());
        assert_eq!(steps, 4 * 4 + 4);
    }

    #[test]
    fn compiled_layout() {
        let src = "tapes 2\nstart run\nhalt done\nrun 00 -> done 0S 0S\nrun 01 -> done 0S 1S\nrun 10 -> done 1S 0S\nrun 11 -> done 1S 1S\n";
        let m = TuringMachine::parse(src).unwrap();
        let p = tm2_to_ptm(&m).unwrap();
        assert_eq!(p.len(), 28);
        assert_eq!(p.instructions()[0].to_string(), "A?14");
    }

    #[test]
    fn copy_doubles_the_input() {
        let m = builtin_machine("copy").unwrap();
        for x in all_inputs(6) {
            let (out, steps) = tm_run(&m, &x, 1000).unwrap();
            assert_eq!(out, [x.clone(), x.clone()].concat());
            assert_eq!(steps, 6 * x.len() as u64 + 5);
        }
    }

    #[test]
    fn machine_text_round_trip() {
        for (_, m) in builtin_machines() {
            assert_eq!(TuringMachine::parse(&m.to_string()).unwrap(), m);
        }
    }

    #[test]
    fn compiled_bitflip_agrees() {
        let m = builtin_machine("bitflip").unwrap();
        let p = tm2_to_ptm(&m).unwrap();
        for x in all_inputs(5) {
            let (out, steps) = tm_run(&m, &x, 1000).unwrap();
            let (pout, psteps) = run_quiet(&p, &x, 10_000).unwrap();
            assert_eq!(out, pout);
            assert!(psteps <= 9 * steps + 9);
        }
    }

    #[test]
    fn missing_transition_is_rejected() {
        let src = "tapes 2\nstart a\nhalt h\na 00 -> h 0S 0S\n";
        assert!(matches!(TuringMachine::parse(src), Err(TmError::Invalid(_))));
    }
}
