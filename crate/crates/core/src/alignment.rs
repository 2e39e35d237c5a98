//! Preference alignment at desk scale: the supervised, preference and total
//! losses, a logistic preference scorer trained in two phases, and context
//! length statistics for polished prompts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::PreferenceRecord;
use crate::gateway::{Gateway, GatewayError};
use crate::knowledge::{Embedder, KnowledgeError};
use crate::prompts::{PromptError, PromptRegistry, PromptSections, TaskKind};
use crate::rng::stream;
use crate::text::token_count;

/// Lower clamp for probabilities inside logarithms.
pub const EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("training data must contain both chosen and rejected examples")]
    DegenerateData,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("feature dimension {found} does not match scorer dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("corrupt scorer file {path}: {reason}")]
    CorruptScorer { path: String, reason: String },
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn check_lengths(probs: &[f64], labels: &[f64]) -> Result<(), AlignmentError> {
    if probs.is_empty() {
        return Err(AlignmentError::DomainError("no examples".into()));
    }
    if probs.len() != labels.len() {
        return Err(AlignmentError::DomainError(format!(
            "{} probabilities for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Supervised loss `-(1/N) sum y_i ln p_i`. Examples with `y_i = 0` do not
/// contribute.
pub fn loss_sft(probs: &[f64], labels: &[f64]) -> Result<f64, AlignmentError> {
    check_lengths(probs, labels)?;
    let mut sum = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        if y == 0.0 {
            continue;
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(AlignmentError::DomainError(format!("probability {p} outside (0, 1]")));
        }
        sum += y * p.ln();
    }
    Ok(-sum / probs.len() as f64)
}

/// Binary cross-entropy with probabilities clamped to `[EPSILON, 1 - EPSILON]`.
pub fn loss_pa(probs: &[f64], labels: &[f64]) -> Result<f64, AlignmentError> {
    check_lengths(probs, labels)?;
    let sum: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(EPSILON, 1.0 - EPSILON);
            y * p.ln() + (1.0 - y) * (1.0 - p).ln()
        })
        .sum();
    Ok(-sum / probs.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight of the context-rule term.
    pub alpha: f64,
    /// Weight of the preference term.
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 1.0 }
    }
}

impl LossWeights {
    pub fn check(&self) -> Result<(), AlignmentError> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(AlignmentError::InvalidWeights(format!("{name} = {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_sft: f64,
    pub l_cr: f64,
    pub l_pa: f64,
    pub l_total: f64,
}

pub fn loss_total(l_sft: f64, l_cr: f64, l_pa: f64, weights: &LossWeights) -> LossBreakdown {
    LossBreakdown {
        l_sft,
        l_cr,
        l_pa,
        l_total: l_sft + weights.alpha * l_cr + weights.beta * l_pa,
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One scored completion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub features: Vec<f64>,
    /// 1 for chosen, 0 for rejected.
    pub label: f64,
    /// Index of the preference pair this example belongs to.
    pub pair: usize,
    /// Optional rule-applicability label for the context-rule term.
    pub rule_label: Option<f64>,
}

/// Loss value and gradient with respect to `(weights, bias)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGradient {
    pub value: f64,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LossGradient {
    fn zero(dimension: usize) -> Self {
        Self {
            value: 0.0,
            weights: vec![0.0; dimension],
            bias: 0.0,
        }
    }
}

/// Pluggable context-rule interaction term.
pub trait ContextRuleLoss: Send + Sync {
    fn name(&self) -> &str;

    fn evaluate(&self, scorer: &PreferenceScorer, examples: &[TrainingExample]) -> LossGradient;
}

/// Contributes nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroRuleLoss;

impl ContextRuleLoss for ZeroRuleLoss {
    fn name(&self) -> &str {
        "zero"
    }

    fn evaluate(&self, scorer: &PreferenceScorer, _: &[TrainingExample]) -> LossGradient {
        LossGradient::zero(scorer.dimension())
    }
}

/// Cross-entropy of the scorer's probability against each example's
/// rule-applicability label; unlabeled examples are skipped.
#[derive(Clone, Copy, Debug, Default)]
pub struct RuleApplicabilityLoss;

impl ContextRuleLoss for RuleApplicabilityLoss {
    fn name(&self) -> &str {
        "rule-applicability"
    }

    fn evaluate(&self, scorer: &PreferenceScorer, examples: &[TrainingExample]) -> LossGradient {
        let labeled: Vec<(&TrainingExample, f64)> = examples
            .iter()
            .filter_map(|e| e.rule_label.map(|y| (e, y)))
            .collect();
        if labeled.is_empty() {
            return LossGradient::zero(scorer.dimension());
        }
        bce_gradient(scorer, labeled.into_iter())
    }
}

/// Mean clamped BCE of `sigmoid(score)` and its gradient.
fn bce_gradient<'a>(
    scorer: &PreferenceScorer,
    items: impl Iterator<Item = (&'a TrainingExample, f64)>,
) -> LossGradient {
    let mut g = LossGradient::zero(scorer.dimension());
    let mut n = 0usize;
    for (e, y) in items {
        let p = scorer.probability(&e.features);
        let pc = p.clamp(EPSILON, 1.0 - EPSILON);
        g.value -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
        let r = p - y;
        for (gw, x) in g.weights.iter_mut().zip(&e.features) {
            *gw += r * x;
        }
        g.bias += r;
        n += 1;
    }
    if n > 0 {
        let n = n as f64;
        g.value /= n;
        g.weights.iter_mut().for_each(|w| *w /= n);
        g.bias /= n;
    }
    g
}

/// Preference loss over all examples and its gradient.
pub fn pa_gradient(scorer: &PreferenceScorer, examples: &[TrainingExample]) -> LossGradient {
    bce_gradient(scorer, examples.iter().map(|e| (e, e.label)))
}

/// Supervised loss over the chosen examples, normalized by the number of
/// chosen examples, and its gradient.
pub fn sft_gradient(scorer: &PreferenceScorer, examples: &[TrainingExample]) -> LossGradient {
    let mut g = LossGradient::zero(scorer.dimension());
    let chosen: Vec<&TrainingExample> = examples.iter().filter(|e| e.label > 0.0).collect();
    if chosen.is_empty() {
        return g;
    }
    for e in &chosen {
        let p = scorer.probability(&e.features);
        g.value -= p.max(EPSILON).ln();
        let r = p - 1.0;
        for (gw, x) in g.weights.iter_mut().zip(&e.features) {
            *gw += r * x;
        }
        g.bias += r;
    }
    let n = chosen.len() as f64;
    g.value /= n;
    g.weights.iter_mut().for_each(|w| *w /= n);
    g.bias /= n;
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Sft,
    Align,
}

/// Losses at the start of an epoch, before its update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub phase: Phase,
    pub epoch: usize,
    pub losses: LossBreakdown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceScorer {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub training_log: Vec<EpochLog>,
}

impl PreferenceScorer {
    pub fn zeros(dimension: usize) -> Self {
        Self {
            weights: vec![0.0; dimension],
            bias: 0.0,
            training_log: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn score(&self, features: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>()
    }

    pub fn probability(&self, features: &[f64]) -> f64 {
        sigmoid(self.score(features))
    }

    fn step(&mut self, g: &LossGradient, learning_rate: f64) {
        for (w, d) in self.weights.iter_mut().zip(&g.weights) {
            *w -= learning_rate * d;
        }
        self.bias -= learning_rate * g.bias;
    }

    /// Binary file: `SCR1`, u32 LE dimension, f64 LE bias, f64 LE weights.
    pub fn save(&self, path: &Path) -> Result<(), AlignmentError> {
        let mut bytes = Vec::with_capacity(16 + 8 * self.weights.len());
        bytes.extend_from_slice(b"SCR1");
        bytes.extend_from_slice(&(self.weights.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&self.bias.to_le_bytes());
        for w in &self.weights {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        fs::write(path, bytes).map_err(|e| io_error(path, e))
    }

    /// Loads weights and bias; the training log is not part of the file.
    pub fn load(path: &Path) -> Result<Self, AlignmentError> {
        let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
        let corrupt = |reason: &str| AlignmentError::CorruptScorer {
            path: path.display().to_string(),
            reason: reason.to_owned(),
        };
        if bytes.len() < 16 || &bytes[..4] != b"SCR1" {
            return Err(corrupt("bad header"));
        }
        let dimension = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        if bytes.len() != 16 + 8 * dimension {
            return Err(corrupt("length does not match dimension"));
        }
        let f = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        Ok(Self {
            bias: f(8),
            weights: (0..dimension).map(|i| f(16 + 8 * i)).collect(),
            training_log: Vec::new(),
        })
    }

    pub fn training_log_jsonl(&self) -> String {
        self.training_log
            .iter()
            .map(|e| serde_json::to_string(e).expect("log serializes") + "\n")
            .collect()
    }
}

fn io_error(path: &Path, source: std::io::Error) -> AlignmentError {
    AlignmentError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub sft_epochs: usize,
    pub align_epochs: usize,
    pub learning_rate: f64,
    /// Half-width of the uniform initial weights; 0 starts from zeros.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            sft_epochs: 10,
            align_epochs: 10,
            learning_rate: 0.5,
            init_scale: 0.01,
            seed: 42,
        }
    }
}

/// Chosen and rejected examples of every record, with features taken from
/// the embedding of prompt and completion. A `rule_applicable` meta value of
/// `0` or `1` becomes the rule label.
pub fn preference_examples(
    records: &[PreferenceRecord],
    embedder: &dyn Embedder,
) -> Result<Vec<TrainingExample>, AlignmentError> {
    let mut texts = Vec::with_capacity(2 * records.len());
    for r in records {
        texts.push(format!("{}\n{}", r.prompt_text, r.chosen_text));
        texts.push(format!("{}\n{}", r.prompt_text, r.rejected_text));
    }
    let vectors = embedder.embed_batch(&texts)?;
    Ok(vectors
        .chunks(2)
        .zip(records)
        .enumerate()
        .flat_map(|(pair, (v, r))| {
            let rule_label = r.meta.get("rule_applicable").and_then(|s| match s.as_str() {
                "1" => Some(1.0),
                "0" => Some(0.0),
                _ => None,
            });
            [(0usize, 1.0), (1usize, 0.0)].map(|(i, label)| TrainingExample {
                features: v[i].values().to_vec(),
                label,
                pair,
                rule_label,
            })
        })
        .collect())
}

/// Full-batch gradient descent: `sft_epochs` on the supervised loss of the
/// chosen examples, then `align_epochs` on the total loss.
pub fn train_on_examples(
    examples: &[TrainingExample],
    config: &TrainConfig,
    rule_loss: &dyn ContextRuleLoss,
) -> Result<PreferenceScorer, AlignmentError> {
    config.weights.check()?;
    let has = |label: f64| examples.iter().any(|e| e.label == label);
    if !(has(1.0) && has(0.0)) {
        return Err(AlignmentError::DegenerateData);
    }
    let dimension = examples[0].features.len();
    if let Some(bad) = examples.iter().find(|e| e.features.len() != dimension) {
        return Err(AlignmentError::DimensionMismatch {
            expected: dimension,
            found: bad.features.len(),
        });
    }
    let mut scorer = PreferenceScorer::zeros(dimension);
    if config.init_scale > 0.0 {
        let mut rng = stream(config.seed, "scorer/init");
        for w in &mut scorer.weights {
            *w = rng.random_range(-config.init_scale..=config.init_scale);
        }
    }

    for epoch in 0..config.sft_epochs {
        let sft = sft_gradient(&scorer, examples);
        let losses = loss_total(sft.value, 0.0, 0.0, &LossWeights { alpha: 0.0, beta: 0.0 });
        scorer.training_log.push(EpochLog {
            phase: Phase::Sft,
            epoch,
            losses,
        });
        scorer.step(&sft, config.learning_rate);
    }

    let w = config.weights;
    for epoch in 0..config.align_epochs {
        let sft = sft_gradient(&scorer, examples);
        let cr = rule_loss.evaluate(&scorer, examples);
        let pa = pa_gradient(&scorer, examples);
        let losses = loss_total(sft.value, cr.value, pa.value, &w);
        let mut total = LossGradient::zero(dimension);
        for (i, g) in total.weights.iter_mut().enumerate() {
            *g = sft.weights[i] + w.alpha * cr.weights[i] + w.beta * pa.weights[i];
        }
        total.bias = sft.bias + w.alpha * cr.bias + w.beta * pa.bias;
        scorer.training_log.push(EpochLog {
            phase: Phase::Align,
            epoch,
            losses,
        });
        scorer.step(&total, config.learning_rate);
    }
    Ok(scorer)
}

pub fn train_scorer(
    records: &[PreferenceRecord],
    embedder: &dyn Embedder,
    config: &TrainConfig,
    rule_loss: &dyn ContextRuleLoss,
) -> Result<PreferenceScorer, AlignmentError> {
    if records.is_empty() {
        return Err(AlignmentError::DegenerateData);
    }
    let examples = preference_examples(records, embedder)?;
    train_on_examples(&examples, config, rule_loss)
}

/// Fraction of pairs whose chosen example outscores the rejected one.
pub fn pairwise_accuracy(scorer: &PreferenceScorer, examples: &[TrainingExample]) -> f64 {
    let mut pairs: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for e in examples {
        let slot = pairs.entry(e.pair).or_default();
        let s = Some(scorer.score(&e.features));
        if e.label > 0.0 {
            slot.0 = s;
        } else {
            slot.1 = s;
        }
    }
    let complete: Vec<(f64, f64)> = pairs.values().filter_map(|(c, r)| Some(((*c)?, (*r)?))).collect();
    if complete.is_empty() {
        return 0.0;
    }
    complete.iter().filter(|(c, r)| c > r).count() as f64 / complete.len() as f64
}

/// Token-count samples of raw and polished contexts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthSamples {
    pub raw: Vec<usize>,
    pub polished: Vec<usize>,
}

pub fn mean(samples: &[usize]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|&s| s as f64).sum::<f64>() / samples.len() as f64
}

pub fn median(samples: &[usize]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut s = samples.to_vec();
    s.sort_unstable();
    let mid = s.len() / 2;
    if s.len() % 2 == 1 {
        s[mid] as f64
    } else {
        (s[mid - 1] + s[mid]) as f64 / 2.0
    }
}

/// Counts per bin of width `bin_width`, keyed by bin start.
pub fn histogram(samples: &[usize], bin_width: usize) -> BTreeMap<usize, usize> {
    let w = bin_width.max(1);
    let mut h = BTreeMap::new();
    for &s in samples {
        *h.entry(s / w * w).or_insert(0) += 1;
    }
    h
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContextLengthStats {
    pub per_kind: BTreeMap<TaskKind, LengthSamples>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthSummary {
    pub kind: TaskKind,
    pub count: usize,
    pub raw_mean: f64,
    pub raw_median: f64,
    pub polished_mean: f64,
    pub polished_median: f64,
}

impl ContextLengthStats {
    pub fn record(&mut self, kind: TaskKind, raw: usize, polished: usize) {
        let s = self.per_kind.entry(kind).or_default();
        s.raw.push(raw);
        s.polished.push(polished);
    }

    pub fn summaries(&self) -> Vec<LengthSummary> {
        self.per_kind
            .iter()
            .map(|(kind, s)| LengthSummary {
                kind: *kind,
                count: s.raw.len(),
                raw_mean: mean(&s.raw),
                raw_median: median(&s.raw),
                polished_mean: mean(&s.polished),
                polished_median: median(&s.polished),
            })
            .collect()
    }

    /// Two-column `bin<TAB>count` text for the raw or polished samples.
    pub fn histogram_text(&self, kind: TaskKind, polished: bool, bin_width: usize) -> String {
        let Some(s) = self.per_kind.get(&kind) else {
            return String::new();
        };
        let samples = if polished { &s.polished } else { &s.raw };
        let mut out = String::new();
        for (bin, count) in histogram(samples, bin_width) {
            let _ = writeln!(out, "{bin}\t{count}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("stats serialize");
        s.push('\n');
        s
    }
}

/// Sends the polishing prompt wrapping `sections` and records the token
/// counts of the rendered sections and of the reply under `source_kind`.
pub fn polish_context(
    gateway: &Gateway,
    registry: &PromptRegistry,
    source_kind: TaskKind,
    key: Option<&str>,
    sections: &PromptSections,
    stats: &mut ContextLengthStats,
) -> Result<String, AlignmentError> {
    let prompt = registry.build_task_prompt(TaskKind::Polish, sections, &[], 1)?;
    let exchange = gateway.complete_keyed(key, &prompt.system_text, &prompt.user_text)?;
    let polished = exchange.response_text.unwrap_or_default();
    stats.record(source_kind, token_count(&sections.render()), token_count(&polished));
    Ok(polished)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sft_examples() {
        assert_eq!(loss_sft(&[1.0], &[1.0]).unwrap(), 0.0);
        let v = loss_sft(&[0.5, 0.25], &[1.0, 1.0]).unwrap();
        // Independent recomputation: -(ln 0.5 + ln 0.25) / 2 = 1.5 ln 2.
        assert!(close(v, 1.5 * std::f64::consts::LN_2, 1e-12));
        assert!(close(v, 1.039721, 1e-6));
        assert_eq!(loss_sft(&[0.3, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(loss_sft(&[0.0], &[1.0]), Err(AlignmentError::DomainError(_))));
    }

    #[test]
    fn pa_examples() {
        assert!(close(loss_pa(&[0.5], &[1.0]).unwrap(), std::f64::consts::LN_2, 1e-12));
        assert!(close(loss_pa(&[0.9], &[1.0]).unwrap(), 0.105361, 1e-6));
        assert!(close(loss_pa(&[0.9], &[0.0]).unwrap(), 2.302585, 1e-6));
        assert!(loss_pa(&[0.0], &[1.0]).unwrap().is_finite());
        for p in [0.01, 0.3, 0.77] {
            for y in [0.0, 1.0] {
                let a = loss_pa(&[p], &[y]).unwrap();
                let b = loss_pa(&[1.0 - p], &[1.0 - y]).unwrap();
                assert!(close(a, b, 1e-12) && a >= 0.0);
            }
        }
    }

    #[test]
    fn total_examples() {
        let w = LossWeights::default();
        assert_eq!(loss_total(1.0, 0.0, 0.5, &w).l_total, 1.5);
        assert_eq!(loss_total(1.0, 3.0, 0.5, &LossWeights { alpha: 0.0, beta: 0.0 }).l_total, 1.0);
        assert!(close(loss_total(1.039721, 0.2, 0.693147, &w).l_total, 1.832868, 1e-9));
    }

    fn toy() -> Vec<TrainingExample> {
        (0..6)
            .map(|i| TrainingExample {
                features: vec![if i % 2 == 0 { 1.0 } else { -1.0 }, 0.5, (i as f64) * 0.1],
                label: if i % 2 == 0 { 1.0 } else { 0.0 },
                pair: i / 2,
                rule_label: None,
            })
            .collect()
    }

    #[test]
    fn pa_gradient_matches_finite_differences() {
        let examples = toy();
        let mut rng = stream(7, "grad");
        let h = 1e-6;
        for _ in 0..100 {
            let mut scorer = PreferenceScorer::zeros(3);
            for w in &mut scorer.weights {
                *w = rng.random_range(-2.0..2.0);
            }
            scorer.bias = rng.random_range(-1.0..1.0);
            let analytic = pa_gradient(&scorer, &examples);
            let mut numeric = Vec::new();
            for i in 0..=3 {
                let shifted = |delta: f64| {
                    let mut s = scorer.clone();
                    if i < 3 {
                        s.weights[i] += delta;
                    } else {
                        s.bias += delta;
                    }
                    pa_gradient(&s, &examples).value
                };
                numeric.push((shifted(h) - shifted(-h)) / (2.0 * h));
            }
            let mut a = analytic.weights.clone();
            a.push(analytic.bias);
            let diff: f64 = a.iter().zip(&numeric).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            assert!(diff / scale < 1e-5, "relative error {}", diff / scale);
        }
    }

    #[test]
    fn zero_learning_rate_is_inert() {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            init_scale: 0.0,
            ..Default::default()
        };
        let s = train_on_examples(&toy(), &cfg, &ZeroRuleLoss).unwrap();
        assert!(s.weights.iter().all(|w| *w == 0.0) && s.bias == 0.0);
        let align: Vec<f64> = s
            .training_log
            .iter()
            .filter(|e| e.phase == Phase::Align)
            .map(|e| e.losses.l_total)
            .collect();
        assert!(align.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn degenerate_rejected() {
        let only_chosen: Vec<_> = toy().into_iter().filter(|e| e.label == 1.0).collect();
        assert!(matches!(
            train_on_examples(&only_chosen, &TrainConfig::default(), &ZeroRuleLoss),
            Err(AlignmentError::DegenerateData)
        ));
    }

    #[test]
    fn rule_loss_uses_labels() {
        let mut ex = toy();
        let s = PreferenceScorer::zeros(3);
        assert_eq!(RuleApplicabilityLoss.evaluate(&s, &ex).value, 0.0);
        ex[0].rule_label = Some(1.0);
        assert!(close(RuleApplicabilityLoss.evaluate(&s, &ex).value, std::f64::consts::LN_2, 1e-12));
    }

    #[test]
    fn scorer_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scorer.bin");
        let s = train_on_examples(&toy(), &TrainConfig::default(), &ZeroRuleLoss).unwrap();
        s.save(&path).unwrap();
        let back = PreferenceScorer::load(&path).unwrap();
        assert_eq!((back.weights, back.bias), (s.weights, s.bias));
        fs::write(&path, b"nope").unwrap();
        assert!(matches!(PreferenceScorer::load(&path), Err(AlignmentError::CorruptScorer { .. })));
    }

    #[test]
    fn stats_recount() {
        let mut st = ContextLengthStats::default();
        for (raw, pol) in [(10, 7), (25, 20), (31, 30), (4, 4)] {
            st.record(TaskKind::AP, raw, pol);
        }
        let sum = &st.summaries()[0];
        assert_eq!(sum.count, 4);
        assert!(close(sum.raw_mean, 17.5, 1e-12));
        assert!(close(sum.raw_median, 17.5, 1e-12));
        assert_eq!(st.histogram_text(TaskKind::AP, false, 10), "0\t1\n10\t1\n20\t1\n30\t1\n");
    }
}
