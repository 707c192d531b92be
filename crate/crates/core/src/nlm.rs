//! LSTM language model with optional topic composition.
//!
//! Each step runs a stack of plain four-gate LSTM layers. Topic-aware
//! variants concatenate the top-layer output `o` with a topic context `c`
//! and project it: `ô = sigmoid([o; c]ᵀ W^p + b^p)`. The next word is
//! predicted with `softmax(ôᵀ U + a)`; the plain LSTM-LM predicts from `o`
//! directly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Sequence;
use crate::error::{Error, Result};
use crate::numcore::{Graph, SeededRng, Tensor, Var};
use crate::topics::TopicBundle;

/// Which topic representation is composed with the LSTM output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariantKind {
    #[serde(rename = "lstm")]
    LstmLm,
    #[serde(rename = "lta")]
    Lta,
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "leta")]
    Leta,
}

impl VariantKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VariantKind::LstmLm => "lstm",
            VariantKind::Lta => "lta",
            VariantKind::Eta => "eta",
            VariantKind::Leta => "leta",
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" | "lstm-lm" | "lstm_lm" => Ok(VariantKind::LstmLm),
            "lta" => Ok(VariantKind::Lta),
            "eta" => Ok(VariantKind::Eta),
            "leta" => Ok(VariantKind::Leta),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// A model configuration: representation kind plus sentence-level topics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub kind: VariantKind,
    #[serde(default)]
    pub sdt: bool,
}

impl Variant {
    pub const LSTM: Variant = Variant {
        kind: VariantKind::LstmLm,
        sdt: false,
    };

    pub fn new(kind: VariantKind, sdt: bool) -> Result<Self> {
        let v = Variant { kind, sdt };
        v.validate()?;
        Ok(v)
    }

    /// The six topic-aware configurations.
    pub fn all_composite() -> [Variant; 6] {
        let mk = |kind, sdt| Variant { kind, sdt };
        [
            mk(VariantKind::Lta, false),
            mk(VariantKind::Eta, false),
            mk(VariantKind::Leta, false),
            mk(VariantKind::Lta, true),
            mk(VariantKind::Eta, true),
            mk(VariantKind::Leta, true),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == VariantKind::LstmLm && self.sdt {
            return Err(Error::Config("the plain LSTM-LM variant cannot use sentence topics".into()));
        }
        Ok(())
    }

    pub fn uses_topics(&self) -> bool {
        self.kind != VariantKind::LstmLm
    }

    pub fn uses_ltr(&self) -> bool {
        matches!(self.kind, VariantKind::Lta | VariantKind::Leta)
    }

    pub fn uses_etr(&self) -> bool {
        matches!(self.kind, VariantKind::Eta | VariantKind::Leta)
    }

    /// Length of the topic context `c`; `None` for the plain LSTM-LM.
    pub fn context_dim(&self, topics: usize, embed_dim: usize) -> Option<usize> {
        let one = match self.kind {
            VariantKind::LstmLm => return None,
            VariantKind::Lta => topics,
            VariantKind::Eta => embed_dim,
            VariantKind::Leta => topics + embed_dim,
        };
        Some(if self.sdt { 2 * one } else { one })
    }

    pub fn label(&self) -> String {
        let base = match self.kind {
            VariantKind::LstmLm => "LSTM-LM",
            VariantKind::Lta => "LTA-NLM",
            VariantKind::Eta => "ETA-NLM",
            VariantKind::Leta => "LETA-NLM",
        };
        if self.sdt {
            format!("{base}+SDT")
        } else {
            base.to_owned()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    /// `[4H, in + H]`, gate blocks ordered input, forget, candidate, output.
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlmParams {
    /// `[D_in, V]`.
    pub input_embedding: Tensor,
    pub layers: Vec<LstmLayer>,
    /// `U`, `[H, V]`.
    pub output_weight: Tensor,
    /// `a`, `[V]`.
    pub output_bias: Tensor,
    /// `W^p`, `[H + dim(c), H]`; absent for the plain LSTM-LM.
    pub proj_weight: Option<Tensor>,
    pub proj_bias: Option<Tensor>,
}

impl NlmParams {
    pub fn init(
        vocab: usize,
        input_dim: usize,
        hidden: usize,
        layers: usize,
        context_dim: Option<usize>,
        rng: &mut SeededRng,
    ) -> Self {
        let r = crate::ntm::INIT_RANGE;
        let input_embedding = rng.uniform_tensor(&[input_dim, vocab], -r, r);
        let layers = (0..layers)
            .map(|l| {
                let inp = if l == 0 { input_dim } else { hidden };
                LstmLayer {
                    weight: rng.uniform_tensor(&[4 * hidden, inp + hidden], -r, r),
                    bias: Tensor::zeros(&[4 * hidden]),
                }
            })
            .collect();
        let output_weight = rng.uniform_tensor(&[hidden, vocab], -r, r);
        let (proj_weight, proj_bias) = match context_dim {
            Some(c) => (
                Some(rng.uniform_tensor(&[hidden + c, hidden], -r, r)),
                Some(Tensor::zeros(&[hidden])),
            ),
            None => (None, None),
        };
        NlmParams {
            input_embedding,
            layers,
            output_weight,
            output_bias: Tensor::zeros(&[vocab]),
            proj_weight,
            proj_bias,
        }
    }

    pub fn hidden(&self) -> usize {
        self.output_weight.rows()
    }

    pub fn vocab_size(&self) -> usize {
        self.output_weight.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.input_embedding.rows()
    }

    pub fn context_dim(&self) -> Option<usize> {
        self.proj_weight.as_ref().map(|w| w.rows() - self.hidden())
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("input_embedding".to_owned(), &self.input_embedding)];
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("lstm.{l}.weight"), &layer.weight));
            out.push((format!("lstm.{l}.bias"), &layer.bias));
        }
        out.push(("output_weight".into(), &self.output_weight));
        out.push(("output_bias".into(), &self.output_bias));
        if let (Some(w), Some(b)) = (&self.proj_weight, &self.proj_bias) {
            out.push(("proj_weight".into(), w));
            out.push(("proj_bias".into(), b));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.input_embedding];
        for layer in &mut self.layers {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        out.push(&mut self.output_weight);
        out.push(&mut self.output_bias);
        if let (Some(w), Some(b)) = (&mut self.proj_weight, &mut self.proj_bias) {
            out.push(w);
            out.push(b);
        }
        out
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> NlmVars {
        let input_embedding = g.leaf(self.input_embedding.clone(), trainable);
        let layers = self
            .layers
            .iter()
            .map(|l| (g.leaf(l.weight.clone(), trainable), g.leaf(l.bias.clone(), trainable)))
            .collect();
        let output_weight = g.leaf(self.output_weight.clone(), trainable);
        let output_bias = g.leaf(self.output_bias.clone(), trainable);
        let proj = match (&self.proj_weight, &self.proj_bias) {
            (Some(w), Some(b)) => Some((g.leaf(w.clone(), trainable), g.leaf(b.clone(), trainable))),
            _ => None,
        };
        NlmVars {
            input_embedding,
            layers,
            output_weight,
            output_bias,
            proj,
        }
    }
}

/// Graph handles of bound [`NlmParams`].
#[derive(Debug, Clone)]
pub struct NlmVars {
    pub input_embedding: Var,
    pub layers: Vec<(Var, Var)>,
    pub output_weight: Var,
    pub output_bias: Var,
    pub proj: Option<(Var, Var)>,
}

impl NlmVars {
    /// Same order as [`NlmParams::named`].
    pub fn all(&self) -> Vec<Var> {
        let mut out = vec![self.input_embedding];
        for &(w, b) in &self.layers {
            out.push(w);
            out.push(b);
        }
        out.push(self.output_weight);
        out.push(self.output_bias);
        if let Some((w, b)) = self.proj {
            out.push(w);
            out.push(b);
        }
        out
    }
}

/// Inverted dropout; a no-op without an rng or with `p == 0`.
pub struct Dropout<'a> {
    pub p: f64,
    pub rng: Option<&'a mut SeededRng>,
}

impl<'a> Dropout<'a> {
    pub fn off() -> Dropout<'static> {
        Dropout { p: 0.0, rng: None }
    }

    pub fn train(p: f64, rng: &'a mut SeededRng) -> Self {
        Dropout { p, rng: Some(rng) }
    }

    pub fn apply(&mut self, g: &mut Graph, x: Var) -> Result<Var> {
        let Some(rng) = self.rng.as_deref_mut() else {
            return Ok(x);
        };
        if self.p <= 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - self.p;
        let n = g.value(x).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 })
            .collect();
        let m = g.constant(Tensor::vector(mask));
        g.mul(x, m)
    }
}

/// Hidden and cell state of every layer.
#[derive(Debug, Clone)]
pub struct LstmState {
    pub hidden: Vec<Var>,
    pub cell: Vec<Var>,
}

impl LstmState {
    pub fn zeros(g: &mut Graph, layers: usize, hidden: usize) -> Self {
        LstmState {
            hidden: (0..layers).map(|_| g.constant(Tensor::zeros(&[hidden]))).collect(),
            cell: (0..layers).map(|_| g.constant(Tensor::zeros(&[hidden]))).collect(),
        }
    }
}

/// One LSTM cell update. Returns the new hidden and cell state.
pub fn lstm_cell(g: &mut Graph, weight: Var, bias: Var, x: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
    let hidden = g.value(h_prev).len();
    let xh = g.concat(&[x, h_prev])?;
    let z = g.matvec(weight, xh)?;
    let z = g.add(z, bias)?;
    let zi = g.slice(z, 0, hidden)?;
    let zf = g.slice(z, hidden, hidden)?;
    let zg = g.slice(z, 2 * hidden, hidden)?;
    let zo = g.slice(z, 3 * hidden, hidden)?;
    let i = g.sigmoid(zi)?;
    let f = g.sigmoid(zf)?;
    let cand = g.tanh(zg)?;
    let o = g.sigmoid(zo)?;
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c)?;
    let h = g.mul(o, tc)?;
    Ok((h, c))
}

/// Feeds word `input` through every layer. Returns the top-layer output
/// (after dropout) and the new state.
pub fn lstm_step(
    g: &mut Graph,
    vars: &NlmVars,
    state: &LstmState,
    input: usize,
    dropout: &mut Dropout<'_>,
) -> Result<(Var, LstmState)> {
    let mut x = g.column(vars.input_embedding, input)?;
    let mut next = LstmState {
        hidden: Vec::with_capacity(vars.layers.len()),
        cell: Vec::with_capacity(vars.layers.len()),
    };
    for (l, &(w, b)) in vars.layers.iter().enumerate() {
        if l > 0 {
            x = dropout.apply(g, x)?;
        }
        let (h, c) = lstm_cell(g, w, b, x, state.hidden[l], state.cell[l])?;
        next.hidden.push(h);
        next.cell.push(c);
        x = h;
    }
    let o = dropout.apply(g, x)?;
    Ok((o, next))
}

/// `sigmoid([o; c]ᵀ W^p + b^p)`.
pub fn compose(g: &mut Graph, o: Var, c: Var, proj_weight: Var, proj_bias: Var) -> Result<Var> {
    let oc = g.concat(&[o, c])?;
    let pre = g.vecmat(oc, proj_weight)?;
    let pre = g.add(pre, proj_bias)?;
    g.sigmoid(pre)
}

/// `log softmax(ôᵀ U + a)`.
pub fn predict_log_probs(g: &mut Graph, o_hat: Var, output_weight: Var, output_bias: Var) -> Result<Var> {
    let logits = g.vecmat(o_hat, output_weight)?;
    let logits = g.add(logits, output_bias)?;
    g.log_softmax(logits)
}

/// Topic representations of one view, as graph nodes.
#[derive(Debug, Clone, Copy)]
pub struct ContextVars {
    pub ltr: Option<Var>,
    pub etr: Option<Var>,
}

fn missing(what: &str) -> Error {
    Error::Invalid(format!("variant needs the {what} representation"))
}

/// Assembles the composition context `c` for a variant. Sentence-level
/// pieces interleave as `[h_doc; h_sent; z_doc; z_sent]`.
pub fn build_context(
    g: &mut Graph,
    variant: Variant,
    doc: &ContextVars,
    sentence: Option<&ContextVars>,
) -> Result<Option<Var>> {
    if !variant.uses_topics() {
        return Ok(None);
    }
    if variant.sdt != sentence.is_some() {
        return Err(Error::Invalid(if variant.sdt {
            "sentence-level topic bundle required for +SDT".into()
        } else {
            "sentence-level topic bundle given without +SDT".into()
        }));
    }
    let mut parts = Vec::with_capacity(4);
    if variant.uses_ltr() {
        parts.push(doc.ltr.ok_or_else(|| missing("latent"))?);
        if let Some(s) = sentence {
            parts.push(s.ltr.ok_or_else(|| missing("latent"))?);
        }
    }
    if variant.uses_etr() {
        parts.push(doc.etr.ok_or_else(|| missing("explainable"))?);
        if let Some(s) = sentence {
            parts.push(s.etr.ok_or_else(|| missing("explainable"))?);
        }
    }
    if parts.len() == 1 {
        Ok(Some(parts[0]))
    } else {
        Ok(Some(g.concat(&parts)?))
    }
}

/// Value-level [`build_context`] over [`TopicBundle`]s.
pub fn context_from_bundles(variant: Variant, doc: &TopicBundle, sentence: Option<&TopicBundle>) -> Result<Option<Tensor>> {
    let mut g = Graph::new();
    let bind = |g: &mut Graph, b: &TopicBundle| ContextVars {
        ltr: Some(g.constant(b.ltr.clone())),
        etr: Some(g.constant(b.etr.clone())),
    };
    let d = bind(&mut g, doc);
    let s = sentence.map(|b| bind(&mut g, b));
    Ok(build_context(&mut g, variant, &d, s.as_ref())?.map(|v| g.value(v).clone()))
}

/// Output distribution for one step: composes with `context` when the
/// model has a projection.
pub fn step_log_probs(g: &mut Graph, vars: &NlmVars, o: Var, context: Option<Var>) -> Result<Var> {
    let o_hat = match (vars.proj, context) {
        (Some((w, b)), Some(c)) => compose(g, o, c, w, b)?,
        (None, None) => o,
        (Some(_), None) => return Err(Error::Invalid("composite model needs a topic context".into())),
        (None, Some(_)) => return Err(Error::Invalid("plain LSTM-LM takes no topic context".into())),
    };
    predict_log_probs(g, o_hat, vars.output_weight, vars.output_bias)
}

/// Negative log-likelihood of the unmasked targets of `seq`.
///
/// `contexts` holds one context per position, a single shared context, or
/// nothing for the plain LSTM-LM.
pub fn nlm_loss(
    g: &mut Graph,
    vars: &NlmVars,
    seq: &Sequence,
    contexts: &[Var],
    dropout: &mut Dropout<'_>,
) -> Result<Var> {
    if seq.active_positions() == 0 {
        return Err(Error::Empty("sequence has no unmasked positions".into()));
    }
    if !(contexts.is_empty() || contexts.len() == 1 || contexts.len() == seq.len()) {
        return Err(Error::dim(
            "nlm_loss",
            format!("{} contexts for {} positions", contexts.len(), seq.len()),
        ));
    }
    let hidden = g.value(vars.output_weight).rows();
    let mut state = LstmState::zeros(g, vars.layers.len(), hidden);
    let mut total: Option<Var> = None;
    for m in 0..seq.len() {
        let (o, next) = lstm_step(g, vars, &state, seq.inputs[m], dropout)?;
        state = next;
        if !seq.mask[m] {
            continue;
        }
        let ctx = match contexts.len() {
            0 => None,
            1 => Some(contexts[0]),
            _ => Some(contexts[m]),
        };
        let lp = step_log_probs(g, vars, o, ctx)?;
        let picked = g.pick(lp, seq.targets[m])?;
        total = Some(match total {
            Some(t) => g.sub(t, picked)?,
            None => g.neg(picked)?,
        });
    }
    Ok(total.expect("at least one active position"))
}
