//! A fixed decoder-only Transformer with hardmax attention that executes
//! the 2-PTM program written in its prompt, one chain-of-thought token per
//! step.

mod build;
mod config;
mod engine;
pub mod gadgets;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, CodecError, Token, TokenStream};
use crate::numerics::{Backend, ExactBackend, FloatBackend, FloatMode, NumericError, PrecisionConfig};

pub use build::build_config;
pub use config::{Affine, Embedding, Head, Layer, Op, Readout, ReluTerm, TransformerConfig, FORMAT, VERSION};
pub use engine::Session;
pub use gadgets::{gadget_and, gadget_equal, gadget_farthest_retrieval, gadget_not, gadget_or, hardmax_attend};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum TransformerError {
    #[error("malformed context: {0}")]
    MalformedContext(CodecError),
    #[error("empty context")]
    EmptyContext,
    #[error("the context already ends with a generated $")]
    Finished,
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("no unique next token at position {position}: {tokens:?}")]
    AmbiguousArgmax { position: usize, tokens: Vec<String> },
    #[error("fuel exhausted after {fuel} generated tokens")]
    FuelExhausted { fuel: u64 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl TransformerError {
    pub fn is_precision(&self) -> bool {
        matches!(self, TransformerError::Numeric(NumericError::PrecisionExhausted(_)))
    }
}

/// Checks that `tokens` is a well-formed prompt followed by tokens a run
/// can produce. Returns the prompt length.
pub fn check_context(tokens: &[Token]) -> Result<usize, TransformerError> {
    if tokens.is_empty() {
        return Err(TransformerError::EmptyContext);
    }
    let (_, end) = codec::parse_prompt(tokens).map_err(TransformerError::MalformedContext)?;
    for (i, t) in tokens.iter().enumerate().skip(end) {
        match t {
            Token::Caret | Token::Halt => {
                return Err(TransformerError::MalformedContext(CodecError::MalformedPrompt {
                    position: i,
                    message: format!("token {t} cannot follow the prompt"),
                }))
            }
            Token::Dollar => return Err(TransformerError::Finished),
            _ => {}
        }
    }
    Ok(end)
}

#[derive(Debug, Clone)]
pub struct Transformer {
    config: Arc<TransformerConfig>,
    plan: Arc<engine::Plan>,
}

impl Default for Transformer {
    fn default() -> Self {
        Self::new()
    }
}

impl Transformer {
    pub fn new() -> Self {
        Self::from_config(build_config()).expect("the construction validates")
    }

    pub fn from_config(config: TransformerConfig) -> Result<Self, TransformerError> {
        if config.format != FORMAT || config.version != VERSION {
            return Err(TransformerError::InvalidConfig(format!(
                "unsupported format {} v{}",
                config.format, config.version
            )));
        }
        config.validate().map_err(TransformerError::InvalidConfig)?;
        let plan = Arc::new(engine::Plan::new(&config));
        Ok(Transformer { config: Arc::new(config), plan })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    pub fn config_json(&self) -> String {
        self.config.to_json()
    }

    pub fn session<B: Backend>(&self, backend: B) -> Session<B> {
        Session::new(self.config.clone(), &self.plan, backend)
    }

    /// Embedding only: one-hot token block and `p_i`, every other channel 0.
    pub fn embed<B: Backend>(&self, b: &B, tokens: &[Token]) -> Result<Vec<Vec<B::Scalar>>, TransformerError> {
        if tokens.is_empty() {
            return Err(TransformerError::EmptyContext);
        }
        let e = &self.config.embedding;
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut x = vec![b.zero(); self.config.channels.len()];
                x[e.one_hot[t.id() as usize]] = b.from_int(1);
                x[e.positional] = b.positional(i)?;
                Ok(x)
            })
            .collect()
    }

    /// Hidden states of every position after all layers.
    pub fn forward<B: Backend>(&self, backend: B, tokens: &[Token]) -> Result<Vec<Vec<B::Scalar>>, TransformerError> {
        check_context(tokens)?;
        let mut s = self.session(backend);
        s.keep_states();
        for &t in tokens {
            s.push(t)?;
        }
        Ok(s.states().unwrap_or_default().to_vec())
    }

    /// A session that has consumed `prompt`, to be cloned once per input.
    pub fn prepare<B: Backend>(&self, backend: B, prompt: &[Token]) -> Result<Session<B>, TransformerError> {
        let end = check_context(prompt)?;
        if end != prompt.len() {
            return Err(TransformerError::MalformedContext(CodecError::MalformedPrompt {
                position: end,
                message: "tokens after the prompt".into(),
            }));
        }
        let mut s = self.session(backend);
        for &t in prompt {
            s.push(t)?;
        }
        Ok(s)
    }

    pub fn next_token<B: Backend>(&self, backend: B, context: &[Token]) -> Result<Token, TransformerError> {
        check_context(context)?;
        let mut s = self.session(backend);
        for &t in context {
            s.push(t)?;
        }
        s.predict()
    }

    /// Generates from `build_prompt(P) · tokenize(x)` until a generated `$`;
    /// returns the generated tokens only.
    pub fn generate<B: Backend>(&self, backend: B, context: &[Token], fuel: u64) -> Result<TokenStream, TransformerError> {
        let end = check_context(context)?;
        codec::detokenize(&context[end..]).map_err(TransformerError::MalformedContext)?;
        let mut s = self.session(backend);
        for &t in context {
            s.push(t)?;
        }
        s.generate(fuel)
    }

    /// [`Transformer::generate`] with a backend chosen at run time. The float
    /// backend doubles its significant bits after each precision failure and
    /// falls back to exact arithmetic once its escalations are used up.
    pub fn generate_with(&self, choice: BackendChoice, context: &[Token], fuel: u64) -> Result<Generation, TransformerError> {
        match choice {
            BackendChoice::Exact => Ok(Generation {
                tokens: self.generate(ExactBackend, context, fuel)?,
                backend: ExactBackend.label(),
                fell_back: false,
            }),
            BackendChoice::Float { precision, mode } => {
                let mut sig = precision.significant_bits;
                for _ in 0..=precision.max_escalations {
                    let b = FloatBackend { significant_bits: sig, guard_bits: precision.guard_bits, mode };
                    match self.generate(b, context, fuel) {
                        Err(e) if e.is_precision() => sig = sig.saturating_mul(2),
                        other => return other.map(|tokens| Generation { tokens, backend: b.label(), fell_back: false }),
                    }
                }
                Ok(Generation {
                    tokens: self.generate(ExactBackend, context, fuel)?,
                    backend: ExactBackend.label(),
                    fell_back: true,
                })
            }
        }
    }
}

impl<B: Backend> Session<B> {
    /// Predicts and appends tokens until a generated `$`, which is returned
    /// but not fed back.
    pub fn generate(&mut self, fuel: u64) -> Result<TokenStream, TransformerError> {
        let mut out = Vec::new();
        loop {
            if out.len() as u64 >= fuel {
                return Err(TransformerError::FuelExhausted { fuel });
            }
            let t = self.predict()?;
            out.push(t);
            if t == Token::Dollar {
                return Ok(TokenStream(out));
            }
            self.push(t)?;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum BackendChoice {
    Exact,
    Float { precision: PrecisionConfig, mode: FloatMode },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Generation {
    pub tokens: TokenStream,
    /// Label of the backend that produced `tokens`.
    pub backend: String,
    pub fell_back: bool,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    pos: usize,
    channel: &'a str,
    value: String,
    approx: f64,
}

/// One JSON line per (position, channel).
pub fn write_trace_jsonl<B: Backend, W: Write>(
    config: &TransformerConfig,
    b: &B,
    states: &[Vec<B::Scalar>],
    mut w: W,
) -> std::io::Result<()> {
    for (pos, x) in states.iter().enumerate() {
        for (channel, v) in config.channels.iter().zip(x) {
            let line = TraceLine { pos, channel, value: b.render(v), approx: b.approx(v) };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Machine state read back from a hidden state: the program pointer and
/// the two head positions, each stored as `(k, 1)/sqrt(k^2 + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DecodedState {
    pub pc: i64,
    pub head_a: i64,
    pub head_b: i64,
}

pub fn decode_state<B: Backend>(config: &TransformerConfig, b: &B, x: &[B::Scalar]) -> Option<DecodedState> {
    let counter = |norm: &str, one: &str| -> Option<i64> {
        let (n, o) = (&x[config.channel(norm)?], &x[config.channel(one)?]);
        let r = b.div(n, o).ok()?;
        match b.to_rational(&r) {
            Some(q) if q.is_integer() => q.numer().try_into().ok(),
            Some(_) => None,
            None => Some(b.approx(&r).round() as i64),
        }
    };
    Some(DecodedState {
        pc: counter("prog cur norm", "prog cur one norm")?,
        head_a: counter("A cur norm", "A cur one norm")?,
        head_b: counter("B cur norm", "B cur one norm")?,
    })
}
