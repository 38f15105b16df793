use std::collections::HashMap;

use super::config::{Affine, Embedding, Head, Layer, Op, Readout, ReluTerm, TransformerConfig, FORMAT, VERSION};
use crate::codec::Token;
use crate::numerics::{Rational, Sim};

const MOVES_AND_WRITES: [&str; 8] = ["AL", "BL", "AR", "BR", "A0", "B0", "A1", "B1"];
const GOTOS: [&str; 4] = ["A!", "B!", "A?", "B?"];
const INSTRUCTIONS: [&str; 13] = ["#", "AL", "BL", "AR", "BR", "A0", "B0", "A1", "B1", "A!", "B!", "A?", "B?"];
/// Tokens the fetch head can copy out of the prompt.
const FETCHED: [&str; 16] = ["#", "AL", "BL", "AR", "BR", "A0", "B0", "A1", "B1", "A!", "B!", "A?", "B?", "-", "+", "@"];

struct Builder {
    channels: Vec<String>,
    index: HashMap<String, usize>,
    layers: Vec<Layer>,
}

fn r(n: i64) -> Rational {
    Rational::from_int(n)
}

fn one() -> Affine {
    Affine::constant(1)
}

fn is(tok: &str) -> String {
    format!("is {tok}")
}

impl Builder {
    fn new_channel(&mut self, name: &str) -> usize {
        let c = self.channels.len();
        assert!(self.index.insert(name.to_string(), c).is_none(), "duplicate channel {name}");
        self.channels.push(name.to_string());
        c
    }

    fn ch(&self, name: &str) -> usize {
        *self.index.get(name).unwrap_or_else(|| panic!("unknown channel {name}"))
    }

    /// `Σ names`.
    fn sum(&self, names: &[&str]) -> Affine {
        names.iter().fold(Affine::constant(0), |a, n| a.add(self.ch(n)))
    }

    fn var(&self, name: &str) -> Affine {
        Affine::var(self.ch(name))
    }

    fn begin_layer(&mut self) {
        self.layers.push(Layer { heads: Vec::new(), ops: Vec::new() });
    }

    fn head(&mut self, name: &str, query: Vec<Affine>, key: Vec<Affine>, value: &[&str], out: &[&str], sim: Sim) {
        let value = value.iter().map(|v| self.ch(v)).collect();
        let out = out.iter().map(|o| self.new_channel(o)).collect();
        let h = Head { name: name.to_string(), query, key, value, out, sim };
        self.layers.last_mut().unwrap().heads.push(h);
    }

    /// `out = linear + Σ coef · ReLU(arg)`.
    fn relu(&mut self, out: &str, linear: Affine, relus: Vec<(Rational, Affine)>) {
        let out = self.new_channel(out);
        let relus = relus.into_iter().map(|(coef, arg)| ReluTerm { coef, arg }).collect();
        self.layers.last_mut().unwrap().ops.push(Op::Relu { out, linear, relus });
    }

    fn linear(&mut self, out: &str, linear: Affine) {
        self.relu(out, linear, Vec::new());
    }

    /// `ReLU(Σ names + after delim - 1)`: one of `names` at a position past
    /// the prompt.
    fn gated(&self, names: &[&str]) -> Affine {
        self.sum(names).add(self.ch("after delim")).with_bias(-1)
    }

    fn layer_norm(&mut self, outs: &[&str], inputs: Vec<Affine>) {
        let outs = outs.iter().map(|o| self.new_channel(o)).collect();
        self.layers.last_mut().unwrap().ops.push(Op::LayerNorm { outs, inputs });
    }

    /// `out = ReLU(LN(x - y)) + ReLU(LN(y - x))`, 1 exactly when `x ≠ y`.
    fn not_equal(&mut self, out: &str, x: &str, y: &str) {
        let (pos, neg) = (format!("{out} +"), format!("{out} -"));
        self.layer_norm(&[&pos], vec![self.var(x).sub(self.ch(y))]);
        self.layer_norm(&[&neg], vec![self.var(y).sub(self.ch(x))]);
        self.relu(out, Affine::constant(0), vec![(r(1), self.var(&pos)), (r(1), self.var(&neg))]);
    }

    /// Retrieves the last value written to tape A or B at the cell given by
    /// the query channels.
    fn retrieval(&mut self, name: &str, tape: char, cur: &str, cur_one: &str) {
        let q = vec![one(), self.var(cur), self.var(cur_one), self.var("p")];
        let k = vec![
            self.var(&format!("is {tape} write")),
            self.var(&format!("{tape} cur norm")),
            self.var(&format!("{tape} cur one norm")),
            Affine::constant(0).sub(self.ch("pos1")),
        ];
        let value = [format!("{tape} write"), format!("{tape} cur norm"), format!("is {tape} write")];
        let out = [format!("{name} retr"), format!("{name} retr cur norm"), format!("{name} retr is write")];
        let value: Vec<&str> = value.iter().map(String::as_str).collect();
        let out: Vec<&str> = out.iter().map(String::as_str).collect();
        self.head(name, q, k, &value, &out, Sim::Identity);
    }

    /// Not-found flag and the retrieved bit, zero when the cell was never
    /// written.
    fn retrieval_value(&mut self, name: &str, cur: &str) {
        let nf = format!("{name} not found");
        self.not_equal(&nf, cur, &format!("{name} retr cur norm"));
        let arg = self
            .var(&format!("{name} retr"))
            .sub(self.ch(&nf))
            .add(self.ch(&format!("{name} retr is write")))
            .with_bias(-1);
        self.relu(&format!("{name} val"), Affine::constant(0), vec![(r(1), arg)]);
    }
}

/// The fixed five-layer network executing any program given in its prompt.
pub fn build_config() -> TransformerConfig {
    let mut b = Builder { channels: Vec::new(), index: HashMap::new(), layers: Vec::new() };
    let one_hot: Vec<usize> = Token::ALL.iter().map(|t| b.new_channel(&is(t.text()))).collect();
    let positional = b.new_channel("p");
    let is_all = |names: &[&str]| names.iter().map(|n| is(n)).collect::<Vec<_>>();

    // Layer 1: position, delimiter and per-token indicators.
    b.begin_layer();
    b.head("pos1", vec![one()], vec![one()], &["is ^"], &["pos1"], Sim::Identity);
    b.head("after delim", vec![one()], vec![one()], &["is $"], &["after delim disc"], Sim::Identity);
    b.layer_norm(&["pos2", "pos3"], vec![one(), b.var("pos1")]);
    b.layer_norm(&["after delim"], vec![b.var("after delim disc")]);
    for t in ['A', 'B'] {
        let (w0, w1, l, rt) = (format!("is {t}0"), format!("is {t}1"), format!("is {t}L"), format!("is {t}R"));
        b.relu(&format!("is {t} write"), Affine::constant(0), vec![(r(1), b.gated(&[&w0, &w1]))]);
        b.relu(&format!("{t} write"), Affine::constant(0), vec![(r(1), b.gated(&[&w1]))]);
        b.relu(&format!("{t} move"), Affine::constant(0), vec![(r(1), b.gated(&[&rt])), (r(-1), b.gated(&[&l]))]);
    }
    let inst = is_all(&INSTRUCTIONS);
    let inst: Vec<&str> = inst.iter().map(String::as_str).collect();
    b.relu("is inst", Affine::constant(0), vec![(r(1), b.sum(&inst).sub(b.ch("after delim")))]);
    let gotos = is_all(&GOTOS);
    let gotos: Vec<&str> = gotos.iter().map(String::as_str).collect();
    b.linear("is goto cond", b.sum(&gotos));
    b.relu(
        "prog move",
        Affine::constant(0),
        vec![(r(1), b.gated(&["is +"])), (r(-1), b.gated(&["is -"]))],
    );
    let mw = is_all(&MOVES_AND_WRITES);
    let mw: Vec<&str> = mw.iter().map(String::as_str).collect();
    let with = |extra: &[&'static str]| -> Vec<&str> { mw.iter().copied().chain(extra.iter().copied()).collect() };
    b.relu("is rec start", b.var("is ^"), vec![(r(1), b.gated(&with(&["is /", "is ="])))]);
    b.relu("is rec end", Affine::constant(0), vec![(r(1), b.gated(&with(&["is $", "is @"])))]);
    b.relu("is rec goto", Affine::constant(0), vec![(r(1), b.gated(&["is =", "is -", "is +"]))]);
    b.relu(
        "prog cur move",
        Affine::constant(0),
        vec![(r(1), b.gated(&with(&["is /", "is +"]))), (r(-1), b.gated(&["is -"]))],
    );
    b.linear("is read key", b.sum(&["is :", "is 0", "is 1"]));
    let twice_bits = || Affine::constant(0).plus(b.ch("is 0"), r(2)).plus(b.ch("is 1"), r(2));
    let (shift0, shift1) = (twice_bits(), twice_bits().add(b.ch("is :")));
    b.linear("read cur0 shift", shift0);
    b.linear("read cur1 shift", shift1);

    // Layer 2: head positions, instruction indices and record counters.
    b.begin_layer();
    for t in ['A', 'B'] {
        let (m, d) = (format!("{t} move"), format!("{t} cur disc"));
        b.head(&d, vec![one()], vec![one()], &[&m], &[&d], Sim::Identity);
    }
    b.head("prog idx disc raw", vec![one()], vec![one()], &["is inst"], &["prog idx disc raw"], Sim::Identity);
    b.head("prog move disc", vec![one()], vec![one()], &["prog move"], &["prog move disc"], Sim::Identity);
    b.head(
        "prog rec one disc",
        vec![one()],
        vec![b.var("is rec start")],
        &["is ^"],
        &["prog rec one disc"],
        Sim::Identity,
    );
    b.head(
        "read disc",
        vec![one()],
        vec![b.var("is read key")],
        &["read cur0 shift", "read cur1 shift", "is :"],
        &["read cur0 disc", "read cur1 disc", "read one disc"],
        Sim::Identity,
    );
    for t in ['A', 'B'] {
        let d = format!("{t} cur disc");
        b.layer_norm(&[&format!("{t} cur norm"), &format!("{t} cur one norm")], vec![b.var(&d), b.var("pos1")]);
    }
    b.linear("prog idx disc", b.var("prog idx disc raw").sub(b.ch("pos1")));
    b.layer_norm(&["prog idx norm", "prog idx one norm"], vec![b.var("prog idx disc"), b.var("pos1")]);
    b.layer_norm(&["prog move norm", "prog move one norm"], vec![b.var("prog move disc"), b.var("pos1")]);
    b.layer_norm(&["prog rec norm", "prog rec one norm"], vec![one(), b.var("prog rec one disc")]);
    for k in ["0", "1"] {
        b.layer_norm(
            &[&format!("read cur{k} norm"), &format!("read cur{k} one norm")],
            vec![b.var(&format!("read cur{k} disc")), b.var("read one disc")],
        );
    }

    // Layer 3: tape retrieval, goto offsets, record bias and output bits.
    b.begin_layer();
    b.retrieval("A", 'A', "A cur norm", "A cur one norm");
    b.retrieval("B", 'B', "B cur norm", "B cur one norm");
    b.head(
        "goto one disc",
        vec![one()],
        vec![b.var("prog idx norm")],
        &["is goto cond"],
        &["goto one disc"],
        Sim::Identity,
    );
    b.head(
        "prog tmp one disc",
        vec![one()],
        vec![Affine::constant(0).sub(b.ch("prog rec one disc"))],
        &["is ="],
        &["prog tmp one disc"],
        Sim::Identity,
    );
    b.head(
        "prog rec diff",
        vec![b.var("prog rec norm"), b.var("prog rec one norm")],
        vec![b.var("pos2"), b.var("pos3")],
        &["p"],
        &["prog rec diff"],
        Sim::Identity,
    );
    b.retrieval("read0", 'A', "read cur0 norm", "read cur0 one norm");
    b.retrieval("read1", 'A', "read cur1 norm", "read cur1 one norm");
    b.retrieval_value("A", "A cur norm");
    b.retrieval_value("B", "B cur norm");
    b.layer_norm(
        &["goto idx norm raw", "goto one norm raw"],
        vec![one().sub(b.ch("goto one disc")), b.var("goto one disc")],
    );
    b.linear("goto idx norm", b.var("goto idx norm raw").add(b.ch("is goto cond")));
    b.linear("goto one norm", b.var("goto one norm raw").sub(b.ch("is goto cond")));
    b.layer_norm(&["prog tmp norm raw", "prog tmp one norm raw"], vec![one(), b.var("prog tmp one disc")]);
    b.relu(
        "prog tmp norm",
        b.var("is rec end"),
        vec![(r(1), b.var("prog tmp norm raw").sub(b.ch("is rec end")))],
    );
    b.relu(
        "prog tmp one norm",
        Affine::constant(0),
        vec![(r(1), b.var("prog tmp one norm raw").sub(b.ch("is rec end")))],
    );
    b.relu(
        "prog rec bias",
        Affine::constant(3),
        vec![(
            Rational::new(-1, 2),
            b.var("prog rec diff").plus(b.ch("is rec goto"), r(2)).with_bias(-2),
        )],
    );
    b.retrieval_value("read0", "read cur0 norm");
    b.retrieval_value("read1", "read cur1 norm");
    b.relu(
        "token is 0",
        Affine::constant(0),
        vec![(r(2), b.var("is read key").add(b.ch("read0 val")).sub(b.ch("read1 val")).with_bias(-1))],
    );
    b.relu(
        "token is 1",
        Affine::constant(0),
        vec![(r(2), b.var("is read key").add(b.ch("read0 val")).add(b.ch("read1 val")).with_bias(-2))],
    );
    b.relu("token is $", Affine::constant(0), vec![(r(2), b.var("is read key").sub(b.ch("read0 val")))]);

    // Layer 4: the program pointer, cumulative moves outside the current
    // goto record.
    b.begin_layer();
    b.head(
        "prog cur",
        vec![b.var("prog rec bias"), Affine::constant(0).sub(b.ch("prog rec norm")), Affine::constant(0).sub(b.ch("prog rec one norm"))],
        vec![one(), b.var("prog rec norm"), b.var("prog rec one norm")],
        &["prog cur move", "is ^"],
        &["prog cur disc", "prog cur one disc"],
        Sim::Min(r(2)),
    );
    b.layer_norm(&["prog cur norm", "prog cur one norm"], vec![b.var("prog cur disc"), b.var("prog cur one disc")]);

    // Layer 5: fetch the next prompt token and resolve gotos.
    b.begin_layer();
    let fetched_in = is_all(&FETCHED);
    let fetched_out: Vec<String> =
        FETCHED.iter().map(|t| if *t == "#" { "token is :".to_string() } else { format!("token is {t}") }).collect();
    let fetched_in: Vec<&str> = fetched_in.iter().map(String::as_str).collect();
    let fetched_out: Vec<&str> = fetched_out.iter().map(String::as_str).collect();
    b.head(
        "fetch",
        vec![
            b.var("prog cur norm"),
            b.var("prog cur one norm"),
            b.var("prog tmp norm"),
            b.var("prog tmp one norm"),
            b.var("p"),
            Affine::constant(-1),
        ],
        vec![
            b.var("prog idx norm"),
            b.var("prog idx one norm"),
            b.var("goto idx norm"),
            b.var("goto one norm"),
            b.var("pos1"),
            one(),
        ],
        &fetched_in,
        &fetched_out,
        Sim::Identity,
    );
    for t in ['A', 'B'] {
        let val = format!("{t} val");
        b.relu(
            &format!("sat {t}!"),
            Affine::constant(0),
            vec![(r(1), b.var(&format!("token is {t}!")).sub(b.ch(&val)))],
        );
        b.relu(
            &format!("sat {t}?"),
            Affine::constant(0),
            vec![(r(1), b.var(&format!("token is {t}?")).add(b.ch(&val)).with_bias(-1))],
        );
    }
    b.linear("token is =", b.sum(&["sat A!", "sat B!", "sat A?", "sat B?"]));
    b.linear(
        "token is /",
        b.sum(&["token is A!", "token is B!", "token is A?", "token is B?"]).sub(b.ch("token is =")),
    );

    let candidates = ["AL", "BL", "AR", "BR", "A0", "B0", "A1", "B1", "/", "=", "-", "+", "@", ":", "0", "1", "$"]
        .iter()
        .map(|t| (t.to_string(), b.ch(&format!("token is {t}"))))
        .collect();
    let config = TransformerConfig {
        format: FORMAT.to_string(),
        version: VERSION,
        tokens: Token::ALL.iter().map(|t| t.text().to_string()).collect(),
        channels: b.channels,
        embedding: Embedding { one_hot, positional },
        layers: b.layers,
        readout: Readout { candidates },
    };
    debug_assert_eq!(config.validate(), Ok(()));
    config
}
