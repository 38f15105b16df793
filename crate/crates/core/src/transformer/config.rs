use serde::{Deserialize, Serialize};

use crate::numerics::{Rational, Sim};

/// `bias + Σ w · x[ch]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Affine {
    #[serde(default = "zero", skip_serializing_if = "Rational::is_zero")]
    pub bias: Rational,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<(usize, Rational)>,
}

fn zero() -> Rational {
    Rational::ZERO
}

impl Affine {
    pub fn constant(c: i64) -> Self {
        Affine { bias: Rational::from_int(c), terms: Vec::new() }
    }

    pub fn var(ch: usize) -> Self {
        Affine { bias: Rational::ZERO, terms: vec![(ch, Rational::ONE)] }
    }

    pub fn plus(mut self, ch: usize, w: Rational) -> Self {
        self.terms.push((ch, w));
        self
    }

    pub fn add(self, ch: usize) -> Self {
        self.plus(ch, Rational::ONE)
    }

    pub fn sub(self, ch: usize) -> Self {
        self.plus(ch, Rational::from_int(-1))
    }

    pub fn with_bias(mut self, b: i64) -> Self {
        self.bias = Rational::from_int(b);
        self
    }

    pub fn channels(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().map(|(c, _)| *c)
    }

    fn weights(&self) -> impl Iterator<Item = &Rational> {
        std::iter::once(&self.bias).chain(self.terms.iter().map(|(_, w)| w))
    }
}

/// One hardmax attention head. Query and key have one affine map per
/// dimension; the head writes the attended average of `value` into `out`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Head {
    pub name: String,
    pub query: Vec<Affine>,
    pub key: Vec<Affine>,
    pub value: Vec<usize>,
    pub out: Vec<usize>,
    pub sim: Sim,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReluTerm {
    pub coef: Rational,
    pub arg: Affine,
}

/// Position-wise operations, applied in order after the layer's heads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    /// `out = linear + Σ coef · ReLU(arg)`.
    Relu { out: usize, linear: Affine, relus: Vec<ReluTerm> },
    /// `outs = LN(inputs)`.
    LayerNorm { outs: Vec<usize>, inputs: Vec<Affine> },
}

impl Op {
    pub fn outputs(&self) -> Vec<usize> {
        match self {
            Op::Relu { out, .. } => vec![*out],
            Op::LayerNorm { outs, .. } => outs.clone(),
        }
    }

    pub fn inputs(&self) -> Vec<usize> {
        match self {
            Op::Relu { linear, relus, .. } => {
                linear.channels().chain(relus.iter().flat_map(|r| r.arg.channels())).collect()
            }
            Op::LayerNorm { inputs, .. } => inputs.iter().flat_map(|a| a.channels()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub heads: Vec<Head>,
    pub ops: Vec<Op>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    /// Channel of the one-hot indicator, per token id.
    pub one_hot: Vec<usize>,
    /// Channel holding `p_i`.
    pub positional: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Readout {
    /// `(token, channel)` pairs; the next token is the strict argmax.
    pub candidates: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub format: String,
    pub version: u32,
    pub tokens: Vec<String>,
    /// Channel names; the index is the hidden dimension.
    pub channels: Vec<String>,
    pub embedding: Embedding,
    pub layers: Vec<Layer>,
    pub readout: Readout,
}

pub const FORMAT: &str = "promptvm-transformer";
pub const VERSION: u32 = 1;

fn allowed_weight(w: &Rational) -> bool {
    let a = w.abs();
    a.is_zero() || a == Rational::new(1, 2) || a == Rational::ONE || a == Rational::from_int(2) || a == Rational::from_int(3)
}

impl TransformerConfig {
    pub fn channel(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, String> {
        let c: TransformerConfig = serde_json::from_str(s).map_err(|e| e.to_string())?;
        c.validate()?;
        Ok(c)
    }

    /// Every numeric parameter, in serialization order.
    pub fn weights(&self) -> Vec<Rational> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for h in &layer.heads {
                for a in h.query.iter().chain(&h.key) {
                    out.extend(a.weights().cloned());
                }
                if let Sim::Min(c) = &h.sim {
                    out.push(c.clone());
                }
            }
            for op in &layer.ops {
                match op {
                    Op::Relu { linear, relus, .. } => {
                        out.extend(linear.weights().cloned());
                        for r in relus {
                            out.push(r.coef.clone());
                            out.extend(r.arg.weights().cloned());
                        }
                    }
                    Op::LayerNorm { inputs, .. } => {
                        for a in inputs {
                            out.extend(a.weights().cloned());
                        }
                    }
                }
            }
        }
        out
    }

    /// Checks that every channel is written exactly once and read only after
    /// it is written, that heads of a layer read only earlier layers, and
    /// that every weight has magnitude in {0, 1/2, 1, 2, 3}.
    pub fn validate(&self) -> Result<(), String> {
        let d = self.channels.len();
        let mut written = vec![false; d];
        let write = |written: &mut Vec<bool>, c: usize, what: &str| -> Result<(), String> {
            if c >= d {
                return Err(format!("{what} writes channel {c}, outside 0..{d}"));
            }
            if std::mem::replace(&mut written[c], true) {
                return Err(format!("channel `{}` written twice", self.channels[c]));
            }
            Ok(())
        };
        if self.embedding.one_hot.len() != self.tokens.len() {
            return Err("one-hot block does not match the alphabet".into());
        }
        for &c in &self.embedding.one_hot {
            write(&mut written, c, "embedding")?;
        }
        write(&mut written, self.embedding.positional, "embedding")?;
        let mut readable = written.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            for h in &layer.heads {
                if h.query.len() != h.key.len() || h.value.len() != h.out.len() {
                    return Err(format!("head `{}` has mismatched dimensions", h.name));
                }
                let reads = h.query.iter().chain(&h.key).flat_map(|a| a.channels()).chain(h.value.iter().copied());
                for c in reads {
                    if c >= d || !readable[c] {
                        return Err(format!("head `{}` in layer {l} reads a channel not yet computed", h.name));
                    }
                }
            }
            for h in &layer.heads {
                for &c in &h.out {
                    write(&mut written, c, &h.name)?;
                }
            }
            for c in 0..d {
                readable[c] = written[c];
            }
            for op in &layer.ops {
                for c in op.inputs() {
                    if c >= d || !readable[c] {
                        return Err(format!("op in layer {l} reads channel {c} before it is computed"));
                    }
                }
                for c in op.outputs() {
                    write(&mut written, c, "op")?;
                    readable[c] = true;
                }
            }
        }
        if let Some(c) = written.iter().position(|w| !w) {
            return Err(format!("channel `{}` is never written", self.channels[c]));
        }
        for (_, c) in &self.readout.candidates {
            if *c >= d {
                return Err("readout channel out of range".into());
            }
        }
        if let Some(w) = self.weights().into_iter().find(|w| !allowed_weight(w)) {
            return Err(format!("weight {w} outside {{0, 1/2, 1, 2, 3}}"));
        }
        Ok(())
    }
}
