//! Confidence-ordered multi-mask decoding into a top-25 candidate list.
//!
//! For each mask count `n` in `1..=N` the prompt gets `n` masks. Every
//! hypothesis commits one mask per step: the unfilled position whose best
//! token has the highest logit (lowest index on ties). Intermediate steps
//! branch on that position's top `W` tokens and prune the beam back to `W`;
//! the last step expands every returned token. A hypothesis scores the mean
//! log-softmax of its committed tokens, each normalized over the top-V list
//! returned at its step. A position with an empty top list cannot be filled
//! and ends its hypothesis.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{normalize_surface, Entity};
use crate::prompt::{build_query, PromptTemplate};
use crate::scorer::{MaskPosition, Scorer, ScorerError, ScorerInfo, TokenId};

pub const RANK_CAP: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub max_masks: usize,
    pub beam_width: usize,
    pub top_v: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            max_masks: 5,
            beam_width: 5,
            top_v: 50,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.max_masks == 0 || self.beam_width == 0 {
            return Err(DecodeError::Config("max masks and beam width must be at least 1".into()));
        }
        if self.top_v < self.beam_width.max(RANK_CAP) {
            return Err(DecodeError::Config(format!(
                "top-v {} must be at least max(beam width, {RANK_CAP})",
                self.top_v
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("input of {len} tokens exceeds the scorer limit of {max}")]
    TooLong { len: usize, max: usize },
    #[error("query with {expected} masks tokenized to {found} mask tokens")]
    MaskCount { expected: usize, found: usize },
    #[error("invalid decode config: {0}")]
    Config(String),
    #[error(transparent)]
    Scorer(ScorerError),
}

impl From<ScorerError> for DecodeError {
    fn from(e: ScorerError) -> Self {
        match e {
            ScorerError::TooLong { len, max } => DecodeError::TooLong { len, max },
            other => DecodeError::Scorer(other),
        }
    }
}

/// One committed token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fill {
    /// Mask ordinal within the prompt (0 = leftmost mask).
    pub slot: usize,
    /// Offset in the token sequence.
    pub position: usize,
    pub token: TokenId,
    pub surface: String,
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub n_masks: usize,
    /// Fills in commit order.
    pub fills: Vec<Fill>,
}

impl Hypothesis {
    pub fn score(&self) -> f64 {
        if self.fills.is_empty() {
            return f64::NEG_INFINITY;
        }
        self.fills.iter().map(|f| f.log_prob).sum::<f64>() / self.fills.len() as f64
    }

    /// Slots in the order they were filled.
    pub fn fill_order(&self) -> Vec<usize> {
        self.fills.iter().map(|f| f.slot).collect()
    }

    /// Filled pieces in sequence order, detokenized.
    pub fn text(&self) -> String {
        let mut fills: Vec<&Fill> = self.fills.iter().collect();
        fills.sort_by_key(|f| f.position);
        let pieces: Vec<&str> = fills.iter().map(|f| f.surface.as_str()).collect();
        detokenize(&pieces)
    }

    fn token_key(&self) -> Vec<(usize, TokenId)> {
        let mut key: Vec<(usize, TokenId)> = self.fills.iter().map(|f| (f.position, f.token)).collect();
        key.sort_unstable();
        key
    }
}

/// Joins subword pieces. Pieces marked with `Ġ` or `▁` start a new word
/// (byte-BPE / sentencepiece); otherwise pieces are words and `##` marks a
/// continuation (WordPiece).
pub fn detokenize(pieces: &[&str]) -> String {
    let marked = |p: &str| p.starts_with('Ġ') || p.starts_with('▁');
    let bpe = pieces.iter().any(|p| marked(p));
    let mut out = String::new();
    for piece in pieces {
        if bpe {
            match piece.strip_prefix('Ġ').or_else(|| piece.strip_prefix('▁')) {
                Some(rest) => {
                    out.push(' ');
                    out.push_str(rest);
                }
                None => out.push_str(piece),
            }
        } else if let Some(rest) = piece.strip_prefix("##") {
            out.push_str(rest);
        } else {
            out.push(' ');
            out.push_str(piece);
        }
    }
    out.trim().to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub score: f64,
}

/// At most 25 normalized, distinct candidates, best first, ties broken by
/// string order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub candidates: Vec<Candidate>,
}

fn by_score_then_text(a: &Candidate, b: &Candidate) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.text.cmp(&b.text))
}

impl RankedList {
    pub fn from_scored<I, S>(scored: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut best: BTreeMap<String, f64> = BTreeMap::new();
        for (text, score) in scored {
            let norm = normalize_surface(text.as_ref());
            if norm.is_empty() {
                continue;
            }
            best.entry(norm)
                .and_modify(|s| {
                    if score > *s {
                        *s = score
                    }
                })
                .or_insert(score);
        }
        let mut candidates: Vec<Candidate> = best.into_iter().map(|(text, score)| Candidate { text, score }).collect();
        candidates.sort_by(by_score_then_text);
        candidates.truncate(RANK_CAP);
        RankedList { candidates }
    }

    pub fn from_hypotheses(hyps: &[Hypothesis]) -> Self {
        RankedList::from_scored(hyps.iter().map(|h| (h.text(), h.score())))
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.text.as_str())
    }

    /// 0-based position of the first candidate naming `entity`, or 25.
    pub fn rank_of(&self, entity: &Entity) -> usize {
        self.candidates
            .iter()
            .position(|c| entity.matches_surface(&c.text))
            .unwrap_or(RANK_CAP)
    }

    pub fn is_well_formed(&self) -> bool {
        self.candidates.len() <= RANK_CAP
            && self.candidates.windows(2).all(|w| by_score_then_text(&w[0], &w[1]) == Ordering::Less)
    }
}

pub fn rank_of(ranked: &RankedList, entity: &Entity) -> usize {
    ranked.rank_of(entity)
}

struct Partial {
    ids: Vec<TokenId>,
    hyp: Hypothesis,
    sum: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// The position to commit next, or `None` if some unfilled mask has no
/// candidates at all.
fn most_confident(positions: &[MaskPosition]) -> Option<&MaskPosition> {
    let mut best: Option<&MaskPosition> = None;
    for p in positions {
        let top = p.top.first()?;
        if best.is_none_or(|b| top.logit > b.top[0].logit) {
            best = Some(p);
        }
    }
    best
}

/// Tokenizes the `n`-mask query and returns its ids and mask offsets.
fn encode(
    scorer: &dyn Scorer,
    info: &ScorerInfo,
    text: &str,
    n: usize,
) -> Result<(Vec<TokenId>, Vec<usize>), DecodeError> {
    let ids: Vec<TokenId> = scorer.tokenize(text)?.into_iter().map(|t| t.id).collect();
    if ids.len() > info.max_input_length {
        return Err(DecodeError::TooLong {
            len: ids.len(),
            max: info.max_input_length,
        });
    }
    let slots: Vec<usize> = ids
        .iter()
        .enumerate()
        .filter(|(_, &id)| id == info.mask_token_id)
        .map(|(i, _)| i)
        .collect();
    if slots.len() != n {
        return Err(DecodeError::MaskCount {
            expected: n,
            found: slots.len(),
        });
    }
    Ok((ids, slots))
}

fn decode_sequence(
    scorer: &dyn Scorer,
    ids: Vec<TokenId>,
    slots: &[usize],
    config: &DecodeConfig,
) -> Result<Vec<Hypothesis>, DecodeError> {
    let n = slots.len();
    let mut beam = vec![Partial {
        ids,
        hyp: Hypothesis {
            n_masks: n,
            fills: Vec::new(),
        },
        sum: 0.0,
    }];
    for step in 0..n {
        let last = step + 1 == n;
        let mut next = Vec::new();
        for partial in &beam {
            let positions = scorer.mask_logits(&partial.ids, config.top_v)?;
            let Some(pos) = most_confident(&positions) else {
                continue;
            };
            let lse = log_sum_exp(pos.top.iter().map(|t| t.logit));
            let branch = if last { pos.top.len() } else { config.beam_width.min(pos.top.len()) };
            let slot = slots
                .iter()
                .position(|&s| s == pos.index)
                .ok_or_else(|| ScorerError::Protocol(format!("position {} is not a mask", pos.index)))?;
            for tok in &pos.top[..branch] {
                let log_prob = tok.logit - lse;
                let mut ids = partial.ids.clone();
                ids[pos.index] = tok.id;
                let mut hyp = partial.hyp.clone();
                hyp.fills.push(Fill {
                    slot,
                    position: pos.index,
                    token: tok.id,
                    surface: tok.surface.clone(),
                    log_prob,
                });
                next.push(Partial {
                    ids,
                    hyp,
                    sum: partial.sum + log_prob,
                });
            }
        }
        if !last {
            next.sort_by(|a, b| {
                b.sum
                    .total_cmp(&a.sum)
                    .then_with(|| a.hyp.token_key().cmp(&b.hyp.token_key()))
            });
            next.truncate(config.beam_width);
        }
        beam = next;
    }
    Ok(beam.into_iter().map(|p| p.hyp).collect())
}

/// Every complete hypothesis for mask counts `1..=N`. All `N` queries are
/// length-checked before any scoring.
pub fn decode_hypotheses(
    scorer: &dyn Scorer,
    info: &ScorerInfo,
    template: &PromptTemplate,
    subject: &str,
    context: &str,
    config: &DecodeConfig,
) -> Result<Vec<Hypothesis>, DecodeError> {
    config.validate()?;
    let mut encoded = Vec::with_capacity(config.max_masks);
    for n in 1..=config.max_masks {
        let query = build_query(template, subject, context, &info.mask_token, n);
        encoded.push(encode(scorer, info, &query.text(), n)?);
    }
    let mut pool = Vec::new();
    for (ids, slots) in encoded {
        pool.extend(decode_sequence(scorer, ids, &slots, config)?);
    }
    Ok(pool)
}

pub fn confidence_decode(
    scorer: &dyn Scorer,
    info: &ScorerInfo,
    template: &PromptTemplate,
    subject: &str,
    context: &str,
    config: &DecodeConfig,
) -> Result<RankedList, DecodeError> {
    let pool = decode_hypotheses(scorer, info, template, subject, context, config)?;
    Ok(RankedList::from_hypotheses(&pool))
}
