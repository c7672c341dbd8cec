//! Masked-LM scorer contract.
//!
//! A scorer owns tokenization and returns, for every mask position of a token
//! sequence, its top-V tokens sorted by logit. The engine never embeds a
//! tokenizer; the HTTP client and the synthetic oracle both implement
//! [`Scorer`].

pub mod conformance;
pub mod http;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conformance::{run_conformance, ConformanceReport};
pub use http::HttpScorer;

pub type TokenId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerInfo {
    pub model_id: String,
    pub mask_token: String,
    pub mask_token_id: TokenId,
    pub max_input_length: usize,
    pub vocab_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUnit {
    pub id: TokenId,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredToken {
    pub id: TokenId,
    pub surface: String,
    pub logit: f64,
}

/// Top-V candidates for the mask at sequence offset `index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPosition {
    pub index: usize,
    pub top: Vec<ScoredToken>,
}

/// Whether a scorer may receive overlapping requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Concurrency {
    Concurrent,
    Serial,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error("scorer unreachable at {url}: {message}")]
    Unreachable { url: String, message: String },
    #[error("scorer still loading after {attempts} attempts")]
    Loading { attempts: usize },
    #[error("input of {len} tokens exceeds the scorer limit of {max}")]
    TooLong { len: usize, max: usize },
    #[error("token sequence contains no mask token")]
    NoMask,
    #[error("unknown token id {0}")]
    UnknownToken(TokenId),
    #[error("scorer returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed scorer response: {0}")]
    Protocol(String),
}

impl ScorerError {
    /// Errors that mean the scorer cannot be used at all, as opposed to one
    /// bad request.
    pub fn is_unreachable(&self) -> bool {
        matches!(self, ScorerError::Unreachable { .. } | ScorerError::Loading { .. })
    }
}

pub trait Scorer: Send + Sync {
    fn info(&self) -> Result<ScorerInfo, ScorerError>;

    fn tokenize(&self, text: &str) -> Result<Vec<TokenUnit>, ScorerError>;

    /// One entry per mask position in ascending index order, each sorted by
    /// logit descending and at most `top_v` long.
    fn mask_logits(&self, token_ids: &[TokenId], top_v: usize) -> Result<Vec<MaskPosition>, ScorerError>;

    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn info(&self) -> Result<ScorerInfo, ScorerError> {
        (**self).info()
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenUnit>, ScorerError> {
        (**self).tokenize(text)
    }

    fn mask_logits(&self, token_ids: &[TokenId], top_v: usize) -> Result<Vec<MaskPosition>, ScorerError> {
        (**self).mask_logits(token_ids, top_v)
    }

    fn concurrency(&self) -> Concurrency {
        (**self).concurrency()
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn info(&self) -> Result<ScorerInfo, ScorerError> {
        (**self).info()
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenUnit>, ScorerError> {
        (**self).tokenize(text)
    }

    fn mask_logits(&self, token_ids: &[TokenId], top_v: usize) -> Result<Vec<MaskPosition>, ScorerError> {
        (**self).mask_logits(token_ids, top_v)
    }

    fn concurrency(&self) -> Concurrency {
        (**self).concurrency()
    }
}

/// Checks the shape rules every `mask_logits` response must satisfy.
pub fn validate_positions(
    token_ids: &[TokenId],
    mask_token_id: TokenId,
    positions: &[MaskPosition],
    top_v: usize,
) -> Result<(), ScorerError> {
    let masks: Vec<usize> = token_ids
        .iter()
        .enumerate()
        .filter(|(_, &id)| id == mask_token_id)
        .map(|(i, _)| i)
        .collect();
    let got: Vec<usize> = positions.iter().map(|p| p.index).collect();
    if got != masks {
        return Err(ScorerError::Protocol(format!(
            "expected mask positions {masks:?}, got {got:?}"
        )));
    }
    for p in positions {
        if p.top.len() > top_v {
            return Err(ScorerError::Protocol(format!(
                "position {} has {} entries, more than top_v={top_v}",
                p.index,
                p.top.len()
            )));
        }
        if let Some(bad) = p.top.iter().find(|t| !t.logit.is_finite()) {
            return Err(ScorerError::Protocol(format!(
                "non-finite logit for token {} at position {}",
                bad.id, p.index
            )));
        }
        if p.top.windows(2).any(|w| w[0].logit < w[1].logit) {
            return Err(ScorerError::Protocol(format!(
                "position {} is not sorted by logit",
                p.index
            )));
        }
    }
    Ok(())
}
