use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Arc;

use super::config::{Affine, Head, Op, TransformerConfig};
use super::TransformerError;
use crate::codec::Token;
use crate::numerics::{Backend, NumericError, Rational, Sim};

/// Per-head facts the engine derives once from the config.
#[derive(Debug, Clone)]
pub(crate) struct Plan {
    /// `(key dimension, sign)` when that key dimension is `±pos1`, which is
    /// strictly monotone in the position and lets equal-key positions share a
    /// group ordered by position.
    pos_dims: Vec<Option<(usize, i32)>>,
}

impl Plan {
    pub(crate) fn new(config: &TransformerConfig) -> Plan {
        // A channel holding 1/(i+1): the uniform average of the indicator of
        // the token that may only occur at position 0.
        let caret = config.tokens.iter().position(|t| t == "^").map(|i| config.embedding.one_hot[i]);
        let mut pos1 = None;
        for layer in &config.layers {
            for h in &layer.heads {
                let constant = |a: &Vec<Affine>| a.iter().all(|x| x.terms.is_empty());
                if constant(&h.query) && constant(&h.key) && h.value.len() == 1 && Some(h.value[0]) == caret {
                    pos1 = Some(h.out[0]);
                }
            }
        }
        let mut pos_dims = Vec::new();
        for layer in &config.layers {
            for h in &layer.heads {
                pos_dims.push(match (&h.sim, pos1) {
                    (Sim::Identity, Some(p)) => h.key.iter().enumerate().find_map(|(d, a)| match a.terms.as_slice() {
                        [(c, w)] if *c == p && a.bias.is_zero() && w.abs() == Rational::ONE => Some((d, w.signum())),
                        _ => None,
                    }),
                    _ => None,
                });
            }
        }
        Plan { pos_dims }
    }
}

#[derive(Debug, Clone)]
struct Group<S> {
    class: Vec<S>,
    first: usize,
    second: Option<usize>,
    last: usize,
    prev_last: Option<usize>,
    count: usize,
    sum: Vec<S>,
    /// Member positions; kept instead of `sum` when the head has a
    /// positional key dimension.
    members: Vec<usize>,
}

/// Keys and values seen so far by one head, grouped by key (without the
/// positional dimension, if any).
#[derive(Debug, Clone)]
struct HeadCache<B: Backend> {
    pos_dim: Option<(usize, i32)>,
    groups: Vec<Group<B::Scalar>>,
    index: HashMap<B::Key, usize>,
    pos_key: Vec<B::Scalar>,
    pos_approx: Vec<f64>,
    pos_values: Vec<Vec<B::Scalar>>,
    /// Full key of every position, for heads with a positional dimension.
    pos_full: Vec<Vec<B::Scalar>>,
    /// Present while the head's keys are 2-D unit vectors on an arc
    /// shorter than a half turn.
    arc: Option<ArcIndex>,
    /// Group keys in f64, row-major, for screening.
    flat: Vec<f64>,
    /// Largest `|k_d|` seen per non-positional key dimension.
    abs_max: Vec<f64>,
    /// Approximate positional key of each group's first and last member.
    first_approx: Vec<f64>,
    last_approx: Vec<f64>,
}

enum Winners {
    Groups(Vec<usize>),
    Positions(Vec<usize>),
}

fn add_into<B: Backend>(b: &B, acc: &mut [B::Scalar], v: &[B::Scalar]) -> Result<(), NumericError> {
    for (a, x) in acc.iter_mut().zip(v) {
        if b.is_zero(x) {
            continue;
        }
        *a = if b.is_zero(a) { x.clone() } else { b.add(a, x)? };
    }
    Ok(())
}

/// Sign of `x`, from the approximation when it is nonzero.
fn sign<B: Backend>(b: &B, x: &B::Scalar) -> Result<i32, NumericError> {
    let a = b.approx(x);
    if a != 0.0 {
        return Ok(if a > 0.0 { 1 } else { -1 });
    }
    Ok(match b.compare(x, &b.zero())? {
        Ordering::Greater => 1,
        Ordering::Less => -1,
        Ordering::Equal => 0,
    })
}

impl<B: Backend> HeadCache<B> {
    fn new(pos_dim: Option<(usize, i32)>) -> Self {
        HeadCache {
            pos_dim,
            groups: Vec::new(),
            index: HashMap::new(),
            pos_key: Vec::new(),
            pos_approx: Vec::new(),
            pos_values: Vec::new(),
            pos_full: Vec::new(),
            arc: pos_dim.is_none().then(ArcIndex::default),
            flat: Vec::new(),
            abs_max: Vec::new(),
            first_approx: Vec::new(),
            last_approx: Vec::new(),
        }
    }

    fn insert(&mut self, b: &B, mut key: Vec<B::Scalar>, value: Vec<B::Scalar>, pos: usize) -> Result<(), TransformerError> {
        if let Some((d, sign)) = self.pos_dim {
            self.pos_full.push(key.clone());
            let pk = key.remove(d);
            let expected = Rational::new(sign as i64, pos as i64 + 1);
            if b.to_rational(&pk).as_ref() != Some(&expected) {
                return Err(TransformerError::Internal(format!(
                    "positional key at {pos} is {}, expected {expected}",
                    b.render(&pk)
                )));
            }
            self.pos_approx.push(b.approx(&pk));
            self.pos_key.push(pk);
            self.pos_values.push(value.clone());
        }
        let gkey = b.key(&key);
        let gid = match gkey.as_ref().and_then(|k| self.index.get(k)) {
            Some(&g) => g,
            None => {
                let g = self.groups.len();
                let row: Vec<f64> = key.iter().map(|x| b.approx(x)).collect();
                if let Some(arc) = &mut self.arc {
                    if !arc.insert(&row, g) {
                        self.arc = None;
                    }
                }
                self.abs_max.resize(row.len(), 0.0);
                for (m, x) in self.abs_max.iter_mut().zip(&row) {
                    *m = m.max(x.abs());
                }
                self.flat.extend(row);
                let pa = self.pos_approx.last().copied().unwrap_or(0.0);
                self.first_approx.push(pa);
                self.last_approx.push(pa);
                self.groups.push(Group {
                    class: key,
                    first: pos,
                    second: None,
                    last: pos,
                    prev_last: None,
                    count: 0,
                    sum: vec![b.zero(); value.len()],
                    members: Vec::new(),
                });
                if let Some(k) = gkey {
                    self.index.insert(k, g);
                }
                g
            }
        };
        let g = &mut self.groups[gid];
        if g.count > 0 {
            if g.second.is_none() {
                g.second = Some(pos);
            }
            g.prev_last = Some(g.last);
            g.last = pos;
            if let Some(&pa) = self.pos_approx.last() {
                self.last_approx[gid] = pa;
            }
        }
        g.count += 1;
        if self.pos_dim.is_some() {
            g.members.push(pos);
        } else {
            add_into(b, &mut g.sum, &value)?;
        }
        Ok(())
    }

    fn full_key<'a>(&'a self, g: &'a Group<B::Scalar>, pos: usize) -> &'a [B::Scalar] {
        if self.pos_dim.is_some() {
            &self.pos_full[pos]
        } else {
            &g.class
        }
    }

    fn attend(&self, b: &B, q: &[B::Scalar], sim: &Sim) -> Result<Vec<B::Scalar>, TransformerError> {
        let qa: Vec<f64> = q.iter().map(|x| b.approx(x)).collect();
        let (dir, class_q): (i32, Vec<f64>) = match self.pos_dim {
            Some((d, coef)) => {
                let mut cq = qa.clone();
                cq.remove(d);
                (sign(b, &q[d])? * coef, cq)
            }
            None => (0, qa.clone()),
        };
        let cd = class_q.len();
        let pos_q = match self.pos_dim {
            Some((d, _)) if dir != 0 => qa[d],
            _ => 0.0,
        };
        let reps = if dir > 0 { &self.first_approx } else { &self.last_approx };
        let score = |g: usize| -> f64 {
            let row = &self.flat[g * cd..(g + 1) * cd];
            let s: f64 = class_q.iter().zip(row).map(|(a, c)| a * c).sum();
            if pos_q != 0.0 { s + pos_q * reps[g] } else { s }
        };
        // Screening error is relative to the size of the terms of q . k,
        // not to the score itself.
        let bound = pos_q.abs() + class_q.iter().zip(&self.abs_max).map(|(a, m)| a.abs() * m).sum::<f64>();
        let slack = b.screen_tolerance() * (1.0 + bound);
        let winners = match sim {
            Sim::Min(cap) => {
                let scores: Vec<f64> = (0..self.groups.len()).map(score).collect();
                let c = cap.to_f64();
                let slack = slack.max(b.screen_tolerance() * (1.0 + c.abs()));
                let cap_s = b.from_rational(cap);
                let mut at_cap = Vec::new();
                for (g, &s) in scores.iter().enumerate() {
                    if s >= c + slack {
                        at_cap.push(g);
                    } else if s > c - slack {
                        let full = self.full_key(&self.groups[g], self.groups[g].first);
                        if b.compare(&b.dot(q, full)?, &cap_s)? != Ordering::Less {
                            at_cap.push(g);
                        }
                    }
                }
                if at_cap.is_empty() {
                    self.argmax(b, q, near_max(scores.iter().copied().enumerate(), slack), dir)?
                } else {
                    Winners::Groups(at_cap)
                }
            }
            Sim::Identity => {
                let cands = match &self.arc {
                    Some(arc) if class_q.len() == 2 => arc.near_max(&class_q, &score, slack),
                    _ => None,
                };
                let cands = cands.unwrap_or_else(|| {
                    let scores: Vec<f64> = if cd == 0 {
                        reps.iter().map(|r| pos_q * r).collect()
                    } else {
                        self.flat
                            .chunks_exact(cd)
                            .zip(reps)
                            .map(|(row, r)| class_q.iter().zip(row).map(|(a, c)| a * c).sum::<f64>() + pos_q * r)
                            .collect()
                    };
                    near_max(scores.iter().copied().enumerate(), slack)
                });
                self.argmax(b, q, cands, dir)?
            }
        };
        match winners {
            Winners::Positions(ps) => {
                if ps.len() == 1 {
                    return Ok(self.pos_values[ps[0]].clone());
                }
                let mut acc = self.pos_values[ps[0]].clone();
                for &p in &ps[1..] {
                    add_into(b, &mut acc, &self.pos_values[p])?;
                }
                Ok(divide(b, acc, ps.len())?)
            }
            Winners::Groups(gs) => self.group_average(b, &gs),
        }
    }

    /// Exact argmax over the screened groups `cands`.
    fn argmax(&self, b: &B, q: &[B::Scalar], cands: Vec<usize>, dir: i32) -> Result<Winners, TransformerError> {
        // (group, position); the runner-up inside a group is kept so that a
        // backend unable to separate neighbours reports it.
        let mut entries: Vec<(usize, usize)> = Vec::new();
        for g in cands {
            let grp = &self.groups[g];
            match dir {
                0 => entries.push((g, grp.first)),
                d => {
                    let (r, n) = if d > 0 { (grp.first, grp.second) } else { (grp.last, grp.prev_last) };
                    entries.push((g, r));
                    if let Some(n) = n {
                        entries.push((g, n));
                    }
                }
            }
        }
        let picked: Vec<usize> = if entries.len() == 1 {
            vec![0]
        } else {
            let keys: Vec<&[B::Scalar]> = entries.iter().map(|&(g, p)| self.full_key(&self.groups[g], p)).collect();
            b.select_max(q, &keys, &Sim::Identity)?
        };
        if dir == 0 {
            return Ok(Winners::Groups(picked.into_iter().map(|i| entries[i].0).collect()));
        }
        let mut out = Vec::with_capacity(picked.len());
        for i in picked {
            let (g, p) = entries[i];
            let grp = &self.groups[g];
            if p != if dir > 0 { grp.first } else { grp.last } {
                return Err(NumericError::PrecisionExhausted(format!(
                    "attention prefers position {p} over an equal key at a better position"
                ))
                .into());
            }
            out.push(p);
        }
        Ok(Winners::Positions(out))
    }

    fn group_average(&self, b: &B, gs: &[usize]) -> Result<Vec<B::Scalar>, TransformerError> {
        if self.pos_dim.is_some() {
            let mut acc = vec![b.zero(); self.pos_values.first().map_or(0, Vec::len)];
            let mut count = 0;
            for &g in gs {
                for &p in &self.groups[g].members {
                    add_into(b, &mut acc, &self.pos_values[p])?;
                    count += 1;
                }
            }
            return Ok(divide(b, acc, count)?);
        }
        if let [g] = gs {
            let g = &self.groups[*g];
            return Ok(divide(b, g.sum.clone(), g.count)?);
        }
        let mut acc = self.groups[gs[0]].sum.clone();
        let mut count = self.groups[gs[0]].count;
        for &g in &gs[1..] {
            add_into(b, &mut acc, &self.groups[g].sum)?;
            count += self.groups[g].count;
        }
        Ok(divide(b, acc, count)?)
    }
}

/// Groups whose screening score is within `slack` of the maximum.
fn near_max(scores: impl Iterator<Item = (usize, f64)> + Clone, slack: f64) -> Vec<usize> {
    let max = scores.clone().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    scores.filter(|s| s.1 >= max - slack).map(|s| s.0).collect()
}

/// Groups of a head with 2-D unit keys, sorted by angle. While the angles
/// span less than a half turn, `q . k` along the sorted order is monotone,
/// single-peaked at the query's angle or single-troughed, so the groups
/// near the maximum form runs around the ends and the query's angle.
#[derive(Debug, Clone, Default)]
struct ArcIndex {
    sorted: Vec<(f64, usize)>,
}

impl ArcIndex {
    const MAX_SPAN: f64 = 3.0;

    /// False once the keys stop fitting the index.
    fn insert(&mut self, key: &[f64], g: usize) -> bool {
        let [x, y] = key else { return false };
        if ((x * x + y * y).sqrt() - 1.0).abs() > 1e-9 {
            return false;
        }
        let a = y.atan2(*x);
        let at = self.sorted.partition_point(|e| e.0 < a);
        self.sorted.insert(at, (a, g));
        self.sorted[self.sorted.len() - 1].0 - self.sorted[0].0 < Self::MAX_SPAN
    }

    fn near_max(&self, q: &[f64], score: &impl Fn(usize) -> f64, slack: f64) -> Option<Vec<usize>> {
        let n = self.sorted.len();
        if n == 0 || q.iter().all(|x| x.abs() < 1e-200) {
            return None;
        }
        let phi = q[1].atan2(q[0]);
        let mut seeds = vec![0, n - 1];
        for a in [phi, phi + std::f64::consts::TAU, phi - std::f64::consts::TAU] {
            let i = self.sorted.partition_point(|e| e.0 < a);
            seeds.extend([i.saturating_sub(1), i.min(n - 1)]);
        }
        let s = |i: usize| score(self.sorted[i].1);
        let max = seeds.iter().map(|&i| s(i)).fold(f64::NEG_INFINITY, f64::max);
        let floor = max - slack;
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for &seed in &seeds {
            if s(seed) < floor {
                continue;
            }
            let mut lo = seed;
            while lo > 0 && s(lo - 1) >= floor {
                lo -= 1;
            }
            let mut hi = seed;
            while hi + 1 < n && s(hi + 1) >= floor {
                hi += 1;
            }
            for i in lo..=hi {
                if seen.insert(i) {
                    out.push(self.sorted[i].1);
                }
            }
        }
        out.sort_unstable();
        Some(out)
    }
}

fn divide<B: Backend>(b: &B, v: Vec<B::Scalar>, n: usize) -> Result<Vec<B::Scalar>, NumericError> {
    if n == 1 {
        return Ok(v);
    }
    let d = b.from_int(n as i64);
    v.iter().map(|x| b.div(x, &d)).collect()
}

fn scaled<B: Backend>(b: &B, w: &Rational, x: &B::Scalar) -> Result<Option<B::Scalar>, NumericError> {
    Ok(if *w == Rational::ONE {
        Some(x.clone())
    } else if w.is_zero() {
        None
    } else if *w == Rational::from_int(-1) {
        Some(b.neg(x))
    } else {
        Some(b.mul(&b.from_rational(w), x)?)
    })
}

pub(crate) fn eval_affine<B: Backend>(b: &B, a: &Affine, x: &[B::Scalar]) -> Result<B::Scalar, NumericError> {
    let mut acc = (!a.bias.is_zero()).then(|| b.from_rational(&a.bias));
    for (c, w) in &a.terms {
        if b.is_zero(&x[*c]) {
            continue;
        }
        if let Some(t) = scaled(b, w, &x[*c])? {
            acc = Some(match acc {
                None => t,
                Some(v) => b.add(&v, &t)?,
            });
        }
    }
    Ok(acc.unwrap_or_else(|| b.zero()))
}

fn apply_op<B: Backend>(b: &B, op: &Op, x: &mut [B::Scalar]) -> Result<(), NumericError> {
    match op {
        Op::Relu { out, linear, relus } => {
            let mut v = eval_affine(b, linear, x)?;
            for r in relus {
                let y = b.relu(&eval_affine(b, &r.arg, x)?)?;
                if b.is_zero(&y) {
                    continue;
                }
                if let Some(t) = scaled(b, &r.coef, &y)? {
                    v = if b.is_zero(&v) { t } else { b.add(&v, &t)? };
                }
            }
            x[*out] = v;
        }
        Op::LayerNorm { outs, inputs } => {
            let v = inputs.iter().map(|a| eval_affine(b, a, x)).collect::<Result<Vec<_>, _>>()?;
            for (o, y) in outs.iter().zip(b.layer_norm(&v)?) {
                x[*o] = y;
            }
        }
    }
    Ok(())
}

/// A forward pass over a growing token stream. Each pushed token is
/// processed once; attention reads the per-head caches of earlier positions.
#[derive(Debug, Clone)]
pub struct Session<B: Backend> {
    config: Arc<TransformerConfig>,
    backend: B,
    heads: Vec<HeadCache<B>>,
    tokens: Vec<Token>,
    last: Option<Vec<B::Scalar>>,
    states: Option<Vec<Vec<B::Scalar>>>,
}

impl<B: Backend> Session<B> {
    pub(crate) fn new(config: Arc<TransformerConfig>, plan: &Plan, backend: B) -> Self {
        let mut heads = Vec::new();
        let all: Vec<&Head> = config.layers.iter().flat_map(|l| &l.heads).collect();
        for pd in plan.pos_dims.iter().take(all.len()) {
            heads.push(HeadCache::new(*pd));
        }
        Session { config, backend, heads, tokens: Vec::new(), last: None, states: None }
    }

    /// Keeps every position's hidden state for traces and inspection.
    pub fn keep_states(&mut self) {
        if self.states.is_none() {
            self.states = Some(Vec::new());
        }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Hidden state of the last position.
    pub fn last_state(&self) -> Option<&[B::Scalar]> {
        self.last.as_deref()
    }

    /// Hidden states of all positions since [`Session::keep_states`].
    pub fn states(&self) -> Option<&[Vec<B::Scalar>]> {
        self.states.as_deref()
    }

    pub fn push(&mut self, token: Token) -> Result<(), TransformerError> {
        let b = &self.backend;
        let cfg = &*self.config;
        let i = self.tokens.len();
        let mut x = vec![b.zero(); cfg.channels.len()];
        x[cfg.embedding.one_hot[token.id() as usize]] = b.from_int(1);
        let p = b.positional(i)?;
        // Clones share the cached approximation only once it exists.
        b.approx(&p);
        x[cfg.embedding.positional] = p;
        let mut hi = 0;
        for layer in &cfg.layers {
            let mut outs = Vec::with_capacity(layer.heads.len());
            for h in &layer.heads {
                let q = h.query.iter().map(|a| eval_affine(b, a, &x)).collect::<Result<Vec<_>, _>>()?;
                let k = h.key.iter().map(|a| eval_affine(b, a, &x)).collect::<Result<Vec<_>, _>>()?;
                let v = h.value.iter().map(|&c| x[c].clone()).collect();
                self.heads[hi].insert(b, k, v, i)?;
                outs.push(self.heads[hi].attend(b, &q, &h.sim)?);
                hi += 1;
            }
            for (h, out) in layer.heads.iter().zip(outs) {
                for (&c, y) in h.out.iter().zip(out) {
                    x[c] = y;
                }
            }
            for op in &layer.ops {
                apply_op(b, op, &mut x)?;
            }
        }
        self.tokens.push(token);
        if let Some(s) = &mut self.states {
            s.push(x.clone());
        }
        self.last = Some(x);
        Ok(())
    }

    /// Strict argmax over the readout candidates at the last position.
    pub fn predict(&self) -> Result<Token, TransformerError> {
        let b = &self.backend;
        let x = self.last.as_ref().ok_or_else(|| TransformerError::EmptyContext)?;
        let cands = &self.config.readout.candidates;
        let mut best = 0;
        for j in 1..cands.len() {
            if b.compare(&x[cands[j].1], &x[cands[best].1])? == Ordering::Greater {
                best = j;
            }
        }
        let mut tied = vec![cands[best].0.clone()];
        for (j, (name, c)) in cands.iter().enumerate() {
            if j != best && b.compare(&x[*c], &x[cands[best].1])? != Ordering::Less {
                tied.push(name.clone());
            }
        }
        if tied.len() > 1 {
            return Err(TransformerError::AmbiguousArgmax { position: self.tokens.len() - 1, tokens: tied });
        }
        cands[best].0.parse::<Token>().map_err(TransformerError::Internal)
    }

    /// Value of a named channel at the last position.
    pub fn channel(&self, name: &str) -> Option<&B::Scalar> {
        let c = self.config.channel(name)?;
        self.last.as_ref().map(|x| &x[c])
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn arc_index_matches_full_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let span = rng.gen_range(0.0..2.9);
            let lo = rng.gen_range(-3.1..3.1 - span);
            let n = rng.gen_range(1..60);
            let mut idx = ArcIndex::default();
            let mut keys: Vec<[f64; 2]> = Vec::new();
            for g in 0..n {
                // Repeated angles exercise ties.
                let a: f64 = match keys.last() {
                    Some(k) if rng.gen_bool(0.2) => k[1].atan2(k[0]),
                    _ => lo + rng.gen_range(0.0..=span),
                };
                let k = [a.cos(), a.sin()];
                assert!(idx.insert(&k, g));
                keys.push(k);
            }
            for _ in 0..20 {
                let q = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                let score = |g: usize| q[0] * keys[g][0] + q[1] * keys[g][1];
                let slack = 1e-3 * rng.gen_range(0.0..1.0);
                let got = idx.near_max(&q, &score, slack).unwrap();
                let want = near_max((0..n).map(|g| (g, score(g))), slack);
                assert_eq!(got, want);
            }
        }
    }
}
