//! Token alphabet and the encodings between programs, inputs, executions
//! and token streams.

mod token;

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::ptm::{self, Instruction, Program, PtmError, RunResult};

pub use token::{TapeOp, Token, TokenStream};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum CodecError {
    #[error("malformed prompt at token {position}: {message}")]
    MalformedPrompt { position: usize, message: String },
    #[error("malformed chain of thought: {0}")]
    MalformedCot(String),
    #[error("malformed stream file: {0}")]
    MalformedStreamFile(String),
    #[error(transparent)]
    Ptm(#[from] PtmError),
}

/// `ι_j` for moves, writes and `#`; `σ (±)^{|k-j|} @` for gotos.
pub fn encode_instruction(j: usize, ins: &Instruction) -> TokenStream {
    let mut out = vec![Token::of_instruction(ins)];
    if let Some(k) = ins.target() {
        push_displacement(&mut out, j, k);
    }
    TokenStream(out)
}

fn push_displacement(out: &mut Vec<Token>, j: usize, k: usize) {
    let sign = if k < j { Token::Minus } else { Token::Plus };
    out.extend(std::iter::repeat(sign).take(k.abs_diff(j)));
    out.push(Token::At);
}

/// `^ P(0, ι_0) ... P(|ι|-1, ι_{|ι|-1}) $`
pub fn build_prompt(program: &Program) -> TokenStream {
    let mut out = TokenStream(vec![Token::Caret]);
    for (j, ins) in program.instructions().iter().enumerate() {
        out.extend(&encode_instruction(j, ins));
    }
    out.push(Token::Dollar);
    out
}

/// Recovers the program from a prompt. Returns it with the index one past
/// the closing `$`.
pub fn parse_prompt(tokens: &[Token]) -> Result<(Program, usize), CodecError> {
    let bad = |position: usize, message: &str| CodecError::MalformedPrompt { position, message: message.into() };
    if tokens.first() != Some(&Token::Caret) {
        return Err(bad(0, "prompt must start with ^"));
    }
    let mut ins = Vec::new();
    let mut i = 1;
    loop {
        let t = *tokens.get(i).ok_or_else(|| bad(i, "missing closing $"))?;
        let j = ins.len();
        i += 1;
        let parsed = match t {
            Token::Dollar => break,
            Token::Halt => Instruction::Halt,
            Token::ANot | Token::BNot | Token::AIf | Token::BIf => {
                let sign = *tokens.get(i).ok_or_else(|| bad(i, "goto without displacement"))?;
                if sign != Token::Plus && sign != Token::Minus {
                    return Err(bad(i, "goto must be followed by + or -"));
                }
                let start = i;
                while tokens.get(i) == Some(&sign) {
                    i += 1;
                }
                if tokens.get(i) != Some(&Token::At) {
                    return Err(bad(i, "goto displacement must end with @"));
                }
                let n = i - start;
                i += 1;
                let k = if sign == Token::Plus {
                    j + n
                } else {
                    j.checked_sub(n).ok_or_else(|| bad(start, "goto before instruction 0"))?
                };
                let tape = if matches!(t, Token::ANot | Token::AIf) { ptm::Tape::A } else { ptm::Tape::B };
                if matches!(t, Token::ANot | Token::BNot) {
                    Instruction::GotoIfZero(tape, k)
                } else {
                    Instruction::GotoIfOne(tape, k)
                }
            }
            other => match other.tape_op() {
                Some((tape, TapeOp::Move(d))) => Instruction::Move(tape, d),
                Some((tape, TapeOp::Write(b))) => Instruction::Write(tape, b),
                None => return Err(bad(i - 1, &format!("unexpected token {other} in prompt"))),
            },
        };
        ins.push(parsed);
    }
    let program = Program::new(ins).map_err(|e| bad(i, &e.to_string()))?;
    Ok((program, i))
}

/// `ε` for the empty input, else `Z(x) = AR^{2|x|} E(x_{n-1}) ... E(x_0)`
/// followed by the imaginary goto `= -^{|Z(x)|} @`.
pub fn tokenize(input: &[bool]) -> TokenStream {
    if input.is_empty() {
        return TokenStream::new();
    }
    let mut z = vec![Token::AR; 2 * input.len()];
    for &b in input.iter().rev() {
        if b {
            z.extend([Token::AL, Token::A1, Token::AL, Token::A1]);
        } else {
            z.extend([Token::AL, Token::AL, Token::A1]);
        }
    }
    let n = z.len();
    z.push(Token::Eq);
    z.extend(std::iter::repeat(Token::Minus).take(n));
    z.push(Token::At);
    TokenStream(z)
}

/// Inverse of [`tokenize`]; errors on streams `tokenize` cannot produce.
pub fn detokenize(tokens: &[Token]) -> Result<Vec<bool>, CodecError> {
    let bad = || CodecError::MalformedPrompt { position: 0, message: "input segment is not a tokenized input".into() };
    if tokens.is_empty() {
        return Ok(Vec::new());
    }
    let ar = tokens.iter().take_while(|&&t| t == Token::AR).count();
    if ar == 0 || ar % 2 == 1 {
        return Err(bad());
    }
    let mut bits = Vec::with_capacity(ar / 2);
    let mut i = ar;
    for _ in 0..ar / 2 {
        match tokens.get(i..i + 3) {
            Some([Token::AL, Token::A1, Token::AL]) => {
                bits.push(true);
                i += 4;
            }
            Some([Token::AL, Token::AL, Token::A1]) => {
                bits.push(false);
                i += 3;
            }
            _ => return Err(bad()),
        }
    }
    bits.reverse();
    if tokenize(&bits).tokens() != tokens {
        return Err(bad());
    }
    Ok(bits)
}

/// CoT tokens of one executed step. `#` maps to `:`; the output and `$`
/// are appended by [`cot_oracle`].
pub fn encode_step(rec: &ptm::StepRecord) -> Vec<Token> {
    match rec.instr {
        Instruction::Halt => vec![Token::Colon],
        ins @ (Instruction::Move(..) | Instruction::Write(..)) => vec![Token::of_instruction(&ins)],
        ins => {
            if rec.jumped() {
                let mut out = vec![Token::Eq];
                push_displacement(&mut out, rec.pc, ins.target().expect("goto"));
                out
            } else {
                vec![Token::Slash]
            }
        }
    }
}

/// The chain of thought the Transformer must produce, with the run behind it.
pub fn cot_with_run(program: &Program, input: &[bool], fuel: u64) -> Result<(TokenStream, RunResult), CodecError> {
    let run = ptm::run(program, input, fuel)?;
    let mut out = Vec::new();
    for rec in &run.trace {
        out.extend(encode_step(rec));
    }
    out.extend(run.output.iter().map(|&b| if b { Token::One } else { Token::Zero }));
    out.push(Token::Dollar);
    Ok((TokenStream(out), run))
}

pub fn cot_oracle(program: &Program, input: &[bool], fuel: u64) -> Result<TokenStream, CodecError> {
    cot_with_run(program, input, fuel).map(|(s, _)| s)
}

/// Bits between the last `:` and the final `$`, scanning leftwards.
pub fn readout(cot: &[Token]) -> Result<Vec<bool>, CodecError> {
    if cot.last() != Some(&Token::Dollar) {
        return Err(CodecError::MalformedCot("stream does not end with $".into()));
    }
    let mut bits = Vec::new();
    let mut i = cot.len() - 1;
    loop {
        i = i.checked_sub(1).ok_or_else(|| CodecError::MalformedCot("no : before the final $".into()))?;
        match cot[i] {
            Token::Colon => break,
            Token::Zero => bits.push(false),
            Token::One => bits.push(true),
            t => return Err(CodecError::MalformedCot(format!("token {t} inside the output segment"))),
        }
    }
    bits.reverse();
    Ok(bits)
}

/// A stream with its segment boundaries: `[0, prompt_end)` is the prompt,
/// `[prompt_end, input_end)` the tokenized input, the rest generated tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamFile {
    pub tokens: TokenStream,
    pub prompt_end: usize,
    pub input_end: usize,
}

impl StreamFile {
    const MAGIC: &'static str = "tokens v1";

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} prompt_end={} input_end={}", Self::MAGIC, self.prompt_end, self.input_end);
        let _ = writeln!(s, "{}", self.tokens);
        s
    }

    pub fn parse(text: &str) -> Result<Self, CodecError> {
        let bad = |m: &str| CodecError::MalformedStreamFile(m.into());
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))?;
        let rest = header.strip_prefix(Self::MAGIC).ok_or_else(|| bad("missing `tokens v1` header"))?;
        let (mut prompt_end, mut input_end) = (None, None);
        for field in rest.split_whitespace() {
            let (k, v) = field.split_once('=').ok_or_else(|| bad("header fields must be key=value"))?;
            let v: usize = v.parse().map_err(|_| bad("header value is not a number"))?;
            match k {
                "prompt_end" => prompt_end = Some(v),
                "input_end" => input_end = Some(v),
                _ => return Err(bad(&format!("unknown header field `{k}`"))),
            }
        }
        let tokens: TokenStream = lines.collect::<Vec<_>>().join(" ").parse().map_err(|e: String| bad(&e))?;
        let prompt_end = prompt_end.ok_or_else(|| bad("missing prompt_end"))?;
        let input_end = input_end.ok_or_else(|| bad("missing input_end"))?;
        if prompt_end > input_end || input_end > tokens.len() {
            return Err(bad("segment boundaries out of order"));
        }
        Ok(StreamFile { tokens, prompt_end, input_end })
    }

    pub fn prompt(&self) -> &[Token] {
        &self.tokens.0[..self.prompt_end]
    }

    pub fn input(&self) -> &[Token] {
        &self.tokens.0[self.prompt_end..self.input_end]
    }

    pub fn generated(&self) -> &[Token] {
        &self.tokens.0[self.input_end..]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ptm::{dyck_program, parse_bits};

    fn ts(s: &str) -> TokenStream {
        s.parse().unwrap()
    }

    #[test]
    fn token_ids_follow_alphabet_order() {
        assert_eq!(Token::ALL.len(), Token::COUNT);
        for (i, t) in Token::ALL.iter().enumerate() {
            assert_eq!(t.id() as usize, i);
            assert_eq!(t.text().parse::<Token>().unwrap(), *t);
        }
        assert_eq!(Token::One.id(), 22);
    }

    #[test]
    fn tokenize_01() {
        let expected = ts("AR AR AR AR AL A1 AL A1 AL AL A1 = - - - - - - - - - - - @");
        assert_eq!(tokenize(&parse_bits("01").unwrap()), expected);
        assert_eq!(tokenize(&[]), TokenStream::new());
    }

    #[test]
    fn detokenize_inverts_tokenize() {
        for x in crate::ptm::all_inputs(6) {
            assert_eq!(detokenize(tokenize(&x).tokens()).unwrap(), x);
        }
        assert!(detokenize(ts("AR AR AL AL A1").tokens()).is_err());
        assert!(detokenize(ts("AR").tokens()).is_err());
    }

    #[test]
    fn dyck_cot_on_empty_input() {
        let cot = cot_oracle(&dyck_program(), &[], 1000).unwrap();
        assert_eq!(cot.to_string(), "/ A0 AL A0 AL / AR AR A1 AR BL / A1 : 1 $");
        assert_eq!(readout(cot.tokens()).unwrap(), vec![true]);
    }

    #[test]
    fn readout_errors() {
        assert!(readout(ts("1 0").tokens()).is_err());
        assert!(readout(ts("1 $").tokens()).is_err());
        assert_eq!(readout(ts(": $").tokens()).unwrap(), Vec::<bool>::new());
    }

    #[test]
    fn stream_file_round_trip() {
        let f = StreamFile { tokens: ts("^ # $ : $"), prompt_end: 3, input_end: 3 };
        assert_eq!(StreamFile::parse(&f.render()).unwrap(), f);
    }
}
