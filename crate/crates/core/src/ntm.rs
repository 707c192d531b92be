//! Variational neural topic model over bag-of-words vectors.
//!
//! Encoder: `π = sigmoid(W_enc v + b_enc)`, `μ = l1(π)`,
//! `σ = softplus(l2(π)) + 1e-6`. The latent `h = μ + ε ⊙ σ` is passed
//! through the output transform `g` (identity by default) and decoded with
//! a softmax over the vocabulary: `p(word i | h) = softmax(hᵀ W + b)_i`.
//! The loss is the negative single-sample ELBO, `KLD - Σ_i v_i log p(i | h)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Graph, SeededRng, Tensor, Var};

/// Lower bound added to the softplus so σ stays strictly positive.
pub const SIGMA_FLOOR: f64 = 1e-6;
/// Half-width of the uniform weight initialisation.
pub const INIT_RANGE: f64 = 0.05;

/// Transform applied to the sampled latent before it is used anywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentTransform {
    #[default]
    Identity,
    Sigmoid,
    Tanh,
}

/// Source of the reparameterisation noise.
pub enum Noise<'a> {
    /// Evaluation: `h = μ`.
    Mean,
    Sample(&'a mut SeededRng),
    /// Test hook: a fixed `ε`.
    Fixed(&'a [f64]),
}

impl Noise<'_> {
    pub fn reborrow(&mut self) -> Noise<'_> {
        match self {
            Noise::Mean => Noise::Mean,
            Noise::Sample(r) => Noise::Sample(r),
            Noise::Fixed(e) => Noise::Fixed(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NtmParams {
    pub encoder_weight: Tensor,
    pub encoder_bias: Tensor,
    pub mu_weight: Tensor,
    pub mu_bias: Tensor,
    pub sigma_weight: Tensor,
    pub sigma_bias: Tensor,
    /// Topic-word matrix `W`, `[K, Z]`.
    pub topic_word: Tensor,
    /// Decoder bias `b`, `[Z]`.
    pub word_bias: Tensor,
}

pub const NTM_PARAM_NAMES: [&str; 8] = [
    "encoder_weight",
    "encoder_bias",
    "mu_weight",
    "mu_bias",
    "sigma_weight",
    "sigma_bias",
    "topic_word",
    "word_bias",
];

impl NtmParams {
    pub fn init(vocab_size: usize, topics: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let mut w = |r: usize, c: usize| rng.uniform_tensor(&[r, c], -INIT_RANGE, INIT_RANGE);
        let encoder_weight = w(hidden, vocab_size);
        let mu_weight = w(topics, hidden);
        let sigma_weight = w(topics, hidden);
        let topic_word = w(topics, vocab_size);
        NtmParams {
            encoder_weight,
            encoder_bias: Tensor::zeros(&[hidden]),
            mu_weight,
            mu_bias: Tensor::zeros(&[topics]),
            sigma_weight,
            sigma_bias: Tensor::zeros(&[topics]),
            topic_word,
            word_bias: Tensor::zeros(&[vocab_size]),
        }
    }

    pub fn topics(&self) -> usize {
        self.topic_word.rows()
    }

    pub fn vocab_size(&self) -> usize {
        self.topic_word.cols()
    }

    pub fn hidden(&self) -> usize {
        self.encoder_bias.len()
    }

    pub fn tensors(&self) -> [&Tensor; 8] {
        [
            &self.encoder_weight,
            &self.encoder_bias,
            &self.mu_weight,
            &self.mu_bias,
            &self.sigma_weight,
            &self.sigma_bias,
            &self.topic_word,
            &self.word_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 8] {
        [
            &mut self.encoder_weight,
            &mut self.encoder_bias,
            &mut self.mu_weight,
            &mut self.mu_bias,
            &mut self.sigma_weight,
            &mut self.sigma_bias,
            &mut self.topic_word,
            &mut self.word_bias,
        ]
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> NtmVars {
        let [a, b, c, d, e, f, w, bias] = self.tensors().map(|t| g.leaf(t.clone(), trainable));
        NtmVars {
            encoder_weight: a,
            encoder_bias: b,
            mu_weight: c,
            mu_bias: d,
            sigma_weight: e,
            sigma_bias: f,
            topic_word: w,
            word_bias: bias,
        }
    }
}

/// Graph handles of bound [`NtmParams`], in [`NTM_PARAM_NAMES`] order.
#[derive(Debug, Clone, Copy)]
pub struct NtmVars {
    pub encoder_weight: Var,
    pub encoder_bias: Var,
    pub mu_weight: Var,
    pub mu_bias: Var,
    pub sigma_weight: Var,
    pub sigma_bias: Var,
    pub topic_word: Var,
    pub word_bias: Var,
}

impl NtmVars {
    pub fn all(&self) -> [Var; 8] {
        [
            self.encoder_weight,
            self.encoder_bias,
            self.mu_weight,
            self.mu_bias,
            self.sigma_weight,
            self.sigma_bias,
            self.topic_word,
            self.word_bias,
        ]
    }
}

/// Posterior quantities recorded on a graph.
#[derive(Debug, Clone, Copy)]
pub struct Posterior {
    pub mu: Var,
    pub sigma: Var,
    /// The transformed latent `g(h)`.
    pub h: Var,
    pub kld: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorStats {
    pub mu: Tensor,
    pub sigma: Tensor,
    pub h: Tensor,
    pub kld: f64,
}

fn affine(g: &mut Graph, w: Var, b: Var, x: Var) -> Result<Var> {
    let wx = g.matvec(w, x)?;
    g.add(wx, b)
}

/// `KL(N(μ, diag σ²) || N(0, I))` on the graph.
pub fn kl_divergence_var(g: &mut Graph, mu: Var, sigma: Var) -> Result<Var> {
    let k = g.value(mu).len() as f64;
    let mu2 = g.square(mu)?;
    let s2 = g.square(sigma)?;
    let quad = g.add(mu2, s2)?;
    let half = g.scale(quad, 0.5)?;
    let log_sigma = g.log(sigma)?;
    let terms = g.sub(half, log_sigma)?;
    let total = g.sum(terms)?;
    g.add_scalar(total, -0.5 * k)
}

/// Encodes `v` into a posterior and draws the latent.
pub fn encode(
    g: &mut Graph,
    vars: &NtmVars,
    v: Var,
    noise: Noise<'_>,
    transform: LatentTransform,
) -> Result<Posterior> {
    let pre = affine(g, vars.encoder_weight, vars.encoder_bias, v)?;
    let pi = g.sigmoid(pre)?;
    let mu = affine(g, vars.mu_weight, vars.mu_bias, pi)?;
    let raw = affine(g, vars.sigma_weight, vars.sigma_bias, pi)?;
    let soft = g.softplus(raw)?;
    let sigma = g.add_scalar(soft, SIGMA_FLOOR)?;
    let k = g.value(mu).len();
    let h = match noise {
        Noise::Mean => mu,
        Noise::Sample(rng) => {
            let eps = g.constant(crate::numcore::gaussian_sample(rng, &[k]));
            let scaled = g.mul(eps, sigma)?;
            g.add(mu, scaled)?
        }
        Noise::Fixed(eps) => {
            if eps.len() != k {
                return Err(Error::dim("encode", format!("fixed noise of length {} for K={k}", eps.len())));
            }
            let eps = g.constant(Tensor::vector(eps.to_vec()));
            let scaled = g.mul(eps, sigma)?;
            g.add(mu, scaled)?
        }
    };
    let h = match transform {
        LatentTransform::Identity => h,
        LatentTransform::Sigmoid => g.sigmoid(h)?,
        LatentTransform::Tanh => g.tanh(h)?,
    };
    let kld = kl_divergence_var(g, mu, sigma)?;
    Ok(Posterior { mu, sigma, h, kld })
}

/// `log softmax(hᵀ W + b)` over the topic-model vocabulary.
pub fn decode_log_probs_var(g: &mut Graph, vars: &NtmVars, h: Var) -> Result<Var> {
    let logits = g.vecmat(h, vars.topic_word)?;
    let logits = g.add(logits, vars.word_bias)?;
    g.log_softmax(logits)
}

/// Negative ELBO for one bag of words, averaged over `samples` draws when
/// sampling. Returns the loss and the posterior of the first draw.
pub fn elbo_loss_var(
    g: &mut Graph,
    vars: &NtmVars,
    bow: &Tensor,
    mut noise: Noise<'_>,
    transform: LatentTransform,
    samples: usize,
) -> Result<(Var, Posterior)> {
    let v = g.constant(bow.clone());
    let draws = match noise {
        Noise::Sample(_) => samples.max(1),
        _ => 1,
    };
    let mut first = None;
    let mut total: Option<Var> = None;
    for _ in 0..draws {
        let post = encode(g, vars, v, noise.reborrow(), transform)?;
        let log_probs = decode_log_probs_var(g, vars, post.h)?;
        let rec = g.dot(v, log_probs)?;
        let loss = g.sub(post.kld, rec)?;
        total = Some(match total {
            Some(t) => g.add(t, loss)?,
            None => loss,
        });
        first.get_or_insert(post);
    }
    let mut loss = total.expect("at least one draw");
    if draws > 1 {
        loss = g.scale(loss, 1.0 / draws as f64)?;
    }
    Ok((loss, first.expect("at least one draw")))
}

fn check_bow(params: &NtmParams, v: &Tensor) -> Result<()> {
    if v.shape() != [params.vocab_size()] {
        return Err(Error::dim(
            "ntm",
            format!("bag of words {:?} for vocabulary of {}", v.shape(), params.vocab_size()),
        ));
    }
    Ok(())
}

pub fn sample_h(params: &NtmParams, v: &Tensor, noise: Noise<'_>, transform: LatentTransform) -> Result<PosteriorStats> {
    check_bow(params, v)?;
    let mut g = Graph::with_checks(true);
    let vars = params.bind(&mut g, false);
    let vv = g.constant(v.clone());
    let p = encode(&mut g, &vars, vv, noise, transform)?;
    Ok(PosteriorStats {
        mu: g.value(p.mu).clone(),
        sigma: g.value(p.sigma).clone(),
        h: g.value(p.h).clone(),
        kld: g.scalar(p.kld),
    })
}

/// Closed-form KL divergence to the standard normal prior.
pub fn kl_divergence(mu: &[f64], sigma: &[f64]) -> Result<f64> {
    if mu.len() != sigma.len() {
        return Err(Error::dim("kl_divergence", format!("{} vs {}", mu.len(), sigma.len())));
    }
    if let Some(s) = sigma.iter().find(|&&s| s <= 0.0 || !s.is_finite()) {
        return Err(Error::Domain {
            op: "kl_divergence",
            detail: format!("sigma must be positive, got {s}"),
        });
    }
    Ok(-0.5
        * mu
            .iter()
            .zip(sigma)
            .map(|(m, s)| 1.0 + (s * s).ln() - m * m - s * s)
            .sum::<f64>())
}

pub fn decode_log_probs(params: &NtmParams, h: &Tensor) -> Result<Tensor> {
    let mut g = Graph::with_checks(true);
    let vars = params.bind(&mut g, false);
    let hv = g.constant(h.clone());
    let out = decode_log_probs_var(&mut g, &vars, hv)?;
    Ok(g.value(out).clone())
}

pub fn ntm_loss(params: &NtmParams, v: &Tensor, noise: Noise<'_>, transform: LatentTransform) -> Result<f64> {
    check_bow(params, v)?;
    let mut g = Graph::with_checks(true);
    let vars = params.bind(&mut g, false);
    let (loss, _) = elbo_loss_var(&mut g, &vars, v, noise, transform, 1)?;
    Ok(g.scalar(loss))
}

/// `exp(Σ loss / Σ N_d)` over bags of words, evaluated at `h = μ`.
pub fn ntm_perplexity(params: &NtmParams, bows: &[Tensor], transform: LatentTransform) -> Result<f64> {
    if bows.is_empty() {
        return Err(Error::Empty("no documents for NTM perplexity".into()));
    }
    let mut loss = 0.0;
    let mut words = 0.0;
    for v in bows {
        loss += ntm_loss(params, v, Noise::Mean, transform)?;
        words += v.sum();
    }
    if words <= 0.0 {
        return Err(Error::Empty("zero total word count".into()));
    }
    Ok((loss / words).exp())
}
