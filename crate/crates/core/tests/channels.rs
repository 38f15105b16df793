//! Channel-level properties of the construction under the exact backend.

use promptvm::codec::{build_prompt, cot_with_run, encode_step, tokenize, Token};
use promptvm::numerics::{Backend, ExactBackend, Rational};
use promptvm::ptm::{dyck_program, parse_bits, Program};
use promptvm::tm::{builtin_machine, tm2_to_ptm};
use promptvm::transformer::{decode_state, DecodedState, Transformer};

const FUEL: u64 = 100_000;

const BOOLEAN: &[&str] = &[
    "after delim",
    "is A write",
    "is B write",
    "A write",
    "B write",
    "is inst",
    "is goto cond",
    "is rec start",
    "is rec end",
    "is rec goto",
    "is read key",
    "A retr",
    "B retr",
    "A not found",
    "B not found",
    "A val",
    "B val",
    "read0 not found",
    "read1 not found",
    "read0 val",
    "read1 val",
    "sat A!",
    "sat B!",
    "sat A?",
    "sat B?",
    "token is =",
    "token is /",
    "token is AL",
    "token is BR",
    "token is A0",
    "token is B1",
    "token is -",
    "token is +",
    "token is @",
    "token is :",
];

fn cases() -> Vec<(Program, Vec<bool>)> {
    let parity = tm2_to_ptm(&builtin_machine("parity").unwrap()).unwrap();
    vec![
        (dyck_program(), vec![]),
        (dyck_program(), parse_bits("0011").unwrap()),
        (dyck_program(), parse_bits("10").unwrap()),
        (parity, parse_bits("101").unwrap()),
        (Program::parse("B1 BR B0 BL B?6 A0 AR A1 #").unwrap(), parse_bits("1").unwrap()),
    ]
}

/// Hidden states for the full run: context plus every generated token but
/// the final `$`.
fn states(t: &Transformer, p: &Program, x: &[bool]) -> (Vec<Token>, usize, Vec<Vec<promptvm::numerics::Surd>>) {
    let (cot, _) = cot_with_run(p, x, FUEL).unwrap();
    let mut all = build_prompt(p).concat(&tokenize(x)).0;
    let context_len = all.len();
    all.extend(&cot.tokens()[..cot.len() - 1]);
    let s = t.forward(ExactBackend, &all).unwrap();
    (all, context_len, s)
}

#[test]
fn boolean_channels_are_zero_or_one() {
    let t = Transformer::new();
    let b = ExactBackend;
    let (zero, one) = (Rational::ZERO, Rational::ONE);
    for (p, x) in cases() {
        let (_, _, states) = states(&t, &p, &x);
        for name in BOOLEAN {
            let c = t.config().channel(name).unwrap_or_else(|| panic!("no channel {name}"));
            for (i, s) in states.iter().enumerate() {
                let v = b.to_rational(&s[c]);
                assert!(v == Some(zero.clone()) || v == Some(one.clone()), "{name} at {i} is {}", b.render(&s[c]));
            }
        }
    }
}

#[test]
fn state_decodes_to_the_interpreter_state() {
    let t = Transformer::new();
    for (p, x) in cases() {
        let (_, context_len, states) = states(&t, &p, &x);
        let (_, run) = cot_with_run(&p, &x, FUEL).unwrap();
        // Position of the last token of each step's encoding; step k starts
        // from the state decoded just before its first token.
        let mut end = context_len - 1;
        for rec in &run.trace {
            let got = decode_state(t.config(), &ExactBackend, &states[end]).unwrap();
            let want = DecodedState { pc: rec.pc as i64, head_a: rec.head_a, head_b: rec.head_b };
            assert_eq!(got, want, "before step {} of {p}", rec.step);
            end += encode_step(rec).len();
        }
    }
}

#[test]
fn record_bias_marks_goto_records() {
    let t = Transformer::new();
    let b = ExactBackend;
    let bias = t.config().channel("prog rec bias").unwrap();
    let (all, context_len, states) = states(&t, &dyck_program(), &parse_bits("0011").unwrap());
    let three = b.from_int(3);
    let mut in_goto = false;
    let mut seen_inside = 0;
    for i in context_len..all.len() {
        // From `=` through the last displacement token; `@` closes the record.
        match all[i] {
            Token::Eq => in_goto = true,
            Token::At => in_goto = false,
            _ => {}
        }
        let ord = b.compare(&states[i][bias], &three).unwrap();
        if in_goto {
            seen_inside += 1;
            assert_eq!(ord, std::cmp::Ordering::Less, "bias at {i} inside a goto record");
        } else {
            assert_eq!(ord, std::cmp::Ordering::Equal, "bias at {i} outside goto records");
        }
    }
    assert!(seen_inside > 0);
}

#[test]
fn prompt_channels_of_the_dyck_example() {
    let t = Transformer::new();
    let b = ExactBackend;
    let prompt = build_prompt(&dyck_program());
    let states = t.forward(ExactBackend, prompt.tokens()).unwrap();
    let at = |i: usize, name: &str| b.to_rational(&states[i][t.config().channel(name).unwrap()]).unwrap();
    assert_eq!(prompt.tokens()[1], Token::AIf);
    assert_eq!(at(1, "is inst"), Rational::ONE);
    assert_eq!(at(1, "is goto cond"), Rational::ONE);
    // The closing `$` is the delimiter itself.
    let last = prompt.len() - 1;
    assert_eq!(prompt.tokens()[last], Token::Dollar);
    for i in 0..last {
        assert_eq!(at(i, "after delim"), Rational::ZERO);
    }
    assert_eq!(at(last, "after delim"), Rational::ONE);
}

#[test]
fn unwritten_cell_is_not_found() {
    let t = Transformer::new();
    let b = ExactBackend;
    // `/ A0 AL` leaves head A on cell -1, which was never written.
    let mut ctx = build_prompt(&dyck_program()).0;
    for _ in 0..3 {
        let next = t.next_token(ExactBackend, &ctx).unwrap();
        ctx.push(next);
    }
    assert_eq!(ctx[ctx.len() - 3..], [Token::Slash, Token::A0, Token::AL]);
    let states = t.forward(ExactBackend, &ctx).unwrap();
    let last = states.last().unwrap();
    let ch = |name: &str| b.to_rational(&last[t.config().channel(name).unwrap()]).unwrap();
    assert_eq!(ch("after delim"), Rational::ONE);
    assert_eq!(ch("A not found"), Rational::ONE);
    assert_eq!(ch("A val"), Rational::ZERO);
}

#[test]
fn embedding_of_the_first_position() {
    let t = Transformer::new();
    let b = ExactBackend;
    let x = t.embed(&b, &[Token::Caret]).unwrap();
    let e = &t.config().embedding;
    // p_0 = 1 - 3 / sqrt(2 * 5)
    let p0 = b.sub(&b.from_int(1), &b.div(&b.from_int(3), &b.sqrt(&b.from_int(10)).unwrap()).unwrap()).unwrap();
    assert_eq!(b.compare(&x[0][e.positional], &p0).unwrap(), std::cmp::Ordering::Equal);
    assert_eq!(b.to_rational(&x[0][e.one_hot[Token::Caret.id() as usize]]), Some(Rational::ONE));
}
