use promptvm::codec::{build_prompt, cot_oracle, readout, tokenize, Token, TokenStream};
use promptvm::numerics::ExactBackend;
use promptvm::ptm::{dyck_program, parse_bits, Program};
use promptvm::transformer::Transformer;

fn context(p: &Program, x: &[bool]) -> Vec<Token> {
    build_prompt(p).concat(&tokenize(x)).0
}

#[test]
fn dyck_on_empty_input() {
    let t = Transformer::new();
    let out = t.generate(ExactBackend, &context(&dyck_program(), &[]), 1000).unwrap();
    assert_eq!(out.to_string(), "/ A0 AL A0 AL / AR AR A1 AR BL / A1 : 1 $");
    assert_eq!(readout(out.tokens()).unwrap(), vec![true]);
}

#[test]
fn dyck_on_01() {
    let t = Transformer::new();
    let p = dyck_program();
    let x = parse_bits("01").unwrap();
    let out = t.generate(ExactBackend, &context(&p, &x), 10_000).unwrap();
    assert_eq!(out, cot_oracle(&p, &x, 10_000).unwrap());
}

#[test]
fn single_halt() {
    let t = Transformer::new();
    let p = Program::parse("#").unwrap();
    let out: TokenStream = t.generate(ExactBackend, &context(&p, &[]), 10).unwrap();
    assert_eq!(out.to_string(), ": $");
}
