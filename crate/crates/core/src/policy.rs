//! Tabular autoregressive policy over a small vocabulary.
//!
//! Each prompt class owns one logit row per context state, where the
//! context state is the last `context_order` tokens (positions before the
//! start of the response read as token 0). The next-token distribution is
//! the softmax of that row, so sequence log-probabilities and their
//! gradients are exact and the whole response space can be enumerated.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad_analysis::VectorGradients;
use crate::rewards::ResponseStats;

/// Upper bound on `vocab_size^max_len` so exhaustive enumeration stays cheap.
pub const MAX_ENUMERATION: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabSpec {
    pub vocab_size: usize,
    pub context_order: usize,
    pub max_len: usize,
}

impl VocabSpec {
    pub fn new(vocab_size: usize, context_order: usize, max_len: usize) -> Result<Self> {
        let spec = Self {
            vocab_size,
            context_order,
            max_len,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::Config(format!(
                "vocab_size must be >= 2, got {}",
                self.vocab_size
            )));
        }
        if self.max_len < 1 {
            return Err(Error::Config("max_len must be >= 1".into()));
        }
        match checked_pow(self.vocab_size, self.max_len) {
            Some(n) if n <= MAX_ENUMERATION => {}
            _ => {
                return Err(Error::Config(format!(
                    "vocab_size^max_len = {}^{} exceeds {MAX_ENUMERATION}",
                    self.vocab_size, self.max_len
                )))
            }
        }
        if checked_pow(self.vocab_size, self.context_order).is_none_or(|n| n > MAX_ENUMERATION) {
            return Err(Error::Config(format!(
                "context_order {} gives too many context states",
                self.context_order
            )));
        }
        Ok(())
    }

    /// Number of context states, `vocab_size^context_order`.
    pub fn num_states(&self) -> usize {
        self.vocab_size.pow(self.context_order as u32)
    }

    /// Logit entries per prompt class.
    pub fn params_per_class(&self) -> usize {
        self.num_states() * self.vocab_size
    }
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    base.checked_pow(u32::try_from(exp).ok()?)
}

/// A preference triplet over token ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PreferenceExample {
    pub prompt_class: usize,
    pub y_w: Vec<usize>,
    pub y_l: Vec<usize>,
}

impl PreferenceExample {
    pub fn new(prompt_class: usize, y_w: Vec<usize>, y_l: Vec<usize>) -> Result<Self> {
        let ex = Self {
            prompt_class,
            y_w,
            y_l,
        };
        ex.check_shape()?;
        Ok(ex)
    }

    /// Structural checks that need no vocabulary.
    pub fn check_shape(&self) -> Result<()> {
        if self.y_w.is_empty() || self.y_l.is_empty() {
            return Err(Error::InvalidInput("responses must be non-empty".into()));
        }
        if self.y_w == self.y_l {
            return Err(Error::InvalidInput(
                "preferred and dispreferred responses are identical".into(),
            ));
        }
        Ok(())
    }

    /// Full checks against a vocabulary and number of prompt classes.
    pub fn validate(&self, spec: &VocabSpec, prompt_classes: usize) -> Result<()> {
        self.check_shape()?;
        if self.prompt_class >= prompt_classes {
            return Err(Error::InvalidInput(format!(
                "prompt_class {} out of range (< {prompt_classes})",
                self.prompt_class
            )));
        }
        for y in [&self.y_w, &self.y_l] {
            check_sequence(spec, y)?;
        }
        Ok(())
    }
}

fn check_sequence(spec: &VocabSpec, y: &[usize]) -> Result<()> {
    if y.is_empty() || y.len() > spec.max_len {
        return Err(Error::InvalidInput(format!(
            "response length {} outside 1..={}",
            y.len(),
            spec.max_len
        )));
    }
    if let Some(&t) = y.iter().find(|&&t| t >= spec.vocab_size) {
        return Err(Error::InvalidInput(format!(
            "token {t} out of range (vocab_size {})",
            spec.vocab_size
        )));
    }
    Ok(())
}

/// Logits of the tabular policy, laid out `[prompt_class][state][token]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    spec: VocabSpec,
    prompt_classes: usize,
    logits: Vec<f64>,
}

impl PolicyParams {
    pub fn new(spec: VocabSpec, prompt_classes: usize, logits: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if prompt_classes == 0 {
            return Err(Error::Config("prompt_classes must be >= 1".into()));
        }
        let expected = prompt_classes * spec.params_per_class();
        if logits.len() != expected {
            return Err(Error::InvalidInput(format!(
                "expected {expected} logits, got {}",
                logits.len()
            )));
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("policy logit"));
        }
        Ok(Self {
            spec,
            prompt_classes,
            logits,
        })
    }

    /// The uniform policy.
    pub fn zeros(spec: VocabSpec, prompt_classes: usize) -> Result<Self> {
        Self::new(spec, prompt_classes, vec![0.0; prompt_classes * spec.params_per_class()])
    }

    /// Logits drawn uniformly from `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(
        spec: VocabSpec,
        prompt_classes: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let n = prompt_classes * spec.params_per_class();
        let logits = (0..n).map(|_| rng.random_range(-scale..=scale)).collect();
        Self::new(spec, prompt_classes, logits)
    }

    pub fn spec(&self) -> &VocabSpec {
        &self.spec
    }

    pub fn prompt_classes(&self) -> usize {
        self.prompt_classes
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn num_params(&self) -> usize {
        self.logits.len()
    }

    /// Replace the logits, keeping the shape.
    pub fn with_logits(&self, logits: Vec<f64>) -> Result<Self> {
        Self::new(self.spec, self.prompt_classes, logits)
    }

    pub(crate) fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    fn check(&self, prompt_class: usize, y: &[usize]) -> Result<()> {
        if prompt_class >= self.prompt_classes {
            return Err(Error::InvalidInput(format!(
                "prompt_class {prompt_class} out of range (< {})",
                self.prompt_classes
            )));
        }
        check_sequence(&self.spec, y)
    }

    /// Offset of the logit row used at position `pos` of `y`.
    fn row_offset(&self, prompt_class: usize, y: &[usize], pos: usize) -> usize {
        let v = self.spec.vocab_size;
        let mut state = 0;
        for back in (1..=self.spec.context_order).rev() {
            let tok = if pos >= back { y[pos - back] } else { 0 };
            state = state * v + tok;
        }
        (prompt_class * self.spec.num_states() + state) * v
    }

    fn log_normalizer(row: &[f64]) -> f64 {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    }

    /// `log pi(y | prompt_class)`.
    pub fn seq_logprob(&self, prompt_class: usize, y: &[usize]) -> Result<f64> {
        self.check(prompt_class, y)?;
        let v = self.spec.vocab_size;
        let mut total = 0.0;
        for (pos, &tok) in y.iter().enumerate() {
            let off = self.row_offset(prompt_class, y, pos);
            let row = &self.logits[off..off + v];
            total += row[tok] - Self::log_normalizer(row);
        }
        // rounding in the normalizer can leave +1e-17 on saturated rows
        Ok(total.min(0.0))
    }

    /// Add `scale * grad log pi(y)` into `out` and return `log pi(y)`.
    pub fn accumulate_grad_logprob(
        &self,
        prompt_class: usize,
        y: &[usize],
        scale: f64,
        out: &mut [f64],
    ) -> Result<f64> {
        self.check(prompt_class, y)?;
        if out.len() != self.logits.len() {
            return Err(Error::InvalidInput("gradient buffer has the wrong length".into()));
        }
        let v = self.spec.vocab_size;
        let mut total = 0.0;
        for (pos, &tok) in y.iter().enumerate() {
            let off = self.row_offset(prompt_class, y, pos);
            let row = &self.logits[off..off + v];
            let lse = Self::log_normalizer(row);
            total += row[tok] - lse;
            for (j, x) in row.iter().enumerate() {
                out[off + j] -= scale * (x - lse).exp();
            }
            out[off + tok] += scale;
        }
        Ok(total.min(0.0))
    }

    /// Exact `grad log pi(y)` over every logit.
    pub fn grad_seq_logprob(&self, prompt_class: usize, y: &[usize]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.logits.len()];
        self.accumulate_grad_logprob(prompt_class, y, 1.0, &mut g)?;
        Ok(g)
    }

    /// Exact `grad pi(y) = pi(y) * grad log pi(y)`.
    pub fn grad_seq_prob(&self, prompt_class: usize, y: &[usize]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.logits.len()];
        let lp = self.accumulate_grad_logprob(prompt_class, y, 1.0, &mut g)?;
        let p = lp.exp();
        g.iter_mut().for_each(|x| *x *= p);
        Ok(g)
    }

    pub fn response_stats(&self, prompt_class: usize, y: &[usize]) -> Result<ResponseStats> {
        ResponseStats::new(self.seq_logprob(prompt_class, y)?, y.len())
    }

    /// `grad pi_w`, `grad pi_l`, their inner product and `|grad pi_w|^2`.
    pub fn vector_gradients(&self, example: &PreferenceExample) -> Result<VectorGradients> {
        example.validate(&self.spec, self.prompt_classes)?;
        let gw = self.grad_seq_prob(example.prompt_class, &example.y_w)?;
        let gl = self.grad_seq_prob(example.prompt_class, &example.y_l)?;
        VectorGradients::new(gw, gl)
    }

    /// Serialize as text: one header line naming the shape, then one logit
    /// per line in row-major order.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# vocab_size={} context_order={} max_len={} prompt_classes={}\n",
            self.spec.vocab_size, self.spec.context_order, self.spec.max_len, self.prompt_classes
        );
        for x in &self.logits {
            let _ = writeln!(out, "{x:?}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|h| h.strip_prefix('#'))
            .ok_or_else(|| Error::InvalidInput("missing policy header line".into()))?;
        let mut fields = [None; 4];
        const KEYS: [&str; 4] = ["vocab_size", "context_order", "max_len", "prompt_classes"];
        for token in header.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("malformed header token `{token}`")))?;
            let idx = KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| Error::InvalidInput(format!("unknown header key `{key}`")))?;
            let parsed = value
                .parse::<usize>()
                .map_err(|e| Error::InvalidInput(format!("header `{key}`: {e}")))?;
            fields[idx] = Some(parsed);
        }
        let get = |i: usize| {
            fields[i].ok_or_else(|| Error::InvalidInput(format!("header is missing `{}`", KEYS[i])))
        };
        let spec = VocabSpec::new(get(0)?, get(1)?, get(2)?)?;
        let logits = lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("logit line {}: {e}", i + 2)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(spec, get(3)?, logits)
    }
}

/// Call `f` on every token sequence of length `len` over `vocab_size`
/// tokens, in lexicographic order.
pub fn for_each_sequence(vocab_size: usize, len: usize, mut f: impl FnMut(&[usize])) {
    let mut seq = vec![0usize; len];
    loop {
        f(&seq);
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            seq[i] += 1;
            if seq[i] < vocab_size {
                break;
            }
            seq[i] = 0;
        }
    }
}
