use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ptm::{Dir, Instruction, Tape};

/// The 23-symbol alphabet. Discriminants are the integer token ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Token {
    Halt = 0,
    AL,
    BL,
    AR,
    BR,
    A0,
    B0,
    A1,
    B1,
    ANot,
    BNot,
    AIf,
    BIf,
    Minus,
    Plus,
    At,
    Caret,
    Dollar,
    Slash,
    Eq,
    Colon,
    Zero,
    One,
}

impl Token {
    pub const COUNT: usize = 23;

    pub const ALL: [Token; 23] = [
        Token::Halt,
        Token::AL,
        Token::BL,
        Token::AR,
        Token::BR,
        Token::A0,
        Token::B0,
        Token::A1,
        Token::B1,
        Token::ANot,
        Token::BNot,
        Token::AIf,
        Token::BIf,
        Token::Minus,
        Token::Plus,
        Token::At,
        Token::Caret,
        Token::Dollar,
        Token::Slash,
        Token::Eq,
        Token::Colon,
        Token::Zero,
        Token::One,
    ];

    const TEXT: [&'static str; 23] = [
        "#", "AL", "BL", "AR", "BR", "A0", "B0", "A1", "B1", "A!", "B!", "A?", "B?", "-", "+", "@", "^", "$", "/",
        "=", ":", "0", "1",
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Token> {
        Token::ALL.get(id as usize).copied()
    }

    pub fn text(self) -> &'static str {
        Token::TEXT[self as usize]
    }

    /// Token of a move or write instruction.
    pub fn op(tape: Tape, op: TapeOp) -> Token {
        match (tape, op) {
            (Tape::A, TapeOp::Move(Dir::L)) => Token::AL,
            (Tape::B, TapeOp::Move(Dir::L)) => Token::BL,
            (Tape::A, TapeOp::Move(Dir::R)) => Token::AR,
            (Tape::B, TapeOp::Move(Dir::R)) => Token::BR,
            (Tape::A, TapeOp::Write(false)) => Token::A0,
            (Tape::B, TapeOp::Write(false)) => Token::B0,
            (Tape::A, TapeOp::Write(true)) => Token::A1,
            (Tape::B, TapeOp::Write(true)) => Token::B1,
        }
    }

    /// The tape operation a token stands for, if any.
    pub fn tape_op(self) -> Option<(Tape, TapeOp)> {
        Some(match self {
            Token::AL => (Tape::A, TapeOp::Move(Dir::L)),
            Token::BL => (Tape::B, TapeOp::Move(Dir::L)),
            Token::AR => (Tape::A, TapeOp::Move(Dir::R)),
            Token::BR => (Tape::B, TapeOp::Move(Dir::R)),
            Token::A0 => (Tape::A, TapeOp::Write(false)),
            Token::B0 => (Tape::B, TapeOp::Write(false)),
            Token::A1 => (Tape::A, TapeOp::Write(true)),
            Token::B1 => (Tape::B, TapeOp::Write(true)),
            _ => return None,
        })
    }

    /// Opening token of an instruction's encoding.
    pub fn of_instruction(ins: &Instruction) -> Token {
        match *ins {
            Instruction::Halt => Token::Halt,
            Instruction::Move(t, d) => Token::op(t, TapeOp::Move(d)),
            Instruction::Write(t, b) => Token::op(t, TapeOp::Write(b)),
            Instruction::GotoIfZero(Tape::A, _) => Token::ANot,
            Instruction::GotoIfZero(Tape::B, _) => Token::BNot,
            Instruction::GotoIfOne(Tape::A, _) => Token::AIf,
            Instruction::GotoIfOne(Tape::B, _) => Token::BIf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TapeOp {
    Move(Dir),
    Write(bool),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.text())
    }
}

impl FromStr for Token {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Token::TEXT
            .iter()
            .position(|t| *t == s)
            .map(|i| Token::ALL[i])
            .ok_or_else(|| format!("unknown token `{s}`"))
    }
}

impl Serialize for Token {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.text())
    }
}

impl<'de> Deserialize<'de> for Token {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A sequence of tokens; text form is space-separated mnemonics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenStream(pub Vec<Token>);

impl TokenStream {
    pub fn new() -> Self {
        TokenStream(Vec::new())
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, t: Token) {
        self.0.push(t);
    }

    pub fn extend(&mut self, other: &TokenStream) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn concat(&self, other: &TokenStream) -> TokenStream {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        TokenStream(v)
    }

    pub fn ids(&self) -> Vec<u8> {
        self.0.iter().map(|t| t.id()).collect()
    }

    pub fn from_ids(ids: &[u8]) -> Result<Self, String> {
        ids.iter()
            .map(|&i| Token::from_id(i).ok_or_else(|| format!("token id {i} out of range")))
            .collect::<Result<_, _>>()
            .map(TokenStream)
    }
}

impl From<Vec<Token>> for TokenStream {
    fn from(v: Vec<Token>) -> Self {
        TokenStream(v)
    }
}

impl fmt::Display for TokenStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t.text())?;
        }
        Ok(())
    }
}

impl FromStr for TokenStream {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split_whitespace().map(str::parse).collect::<Result<_, _>>().map(TokenStream)
    }
}
