//! Blocking JSON/HTTP client for a scorer sidecar.
//!
//! Endpoints: `GET /v1/info`, `POST /v1/tokenize {text}`,
//! `POST /v1/logits {token_ids, top_v}`. A 503 means the model is still
//! loading; the client waits (honoring `Retry-After`) and retries.

use std::sync::OnceLock;
use std::time::Duration;

use reqwest::blocking::{Client, RequestBuilder, Response};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    validate_positions, Concurrency, MaskPosition, Scorer, ScorerError, ScorerInfo, TokenId, TokenUnit,
};

#[derive(Debug)]
pub struct HttpScorer {
    base: String,
    client: Client,
    max_attempts: usize,
    retry_delay: Duration,
    concurrency: Concurrency,
    info: OnceLock<ScorerInfo>,
}

#[derive(Serialize)]
struct TokenizeRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct TokenizeResponse {
    tokens: Vec<TokenUnit>,
}

#[derive(Serialize)]
struct LogitsRequest<'a> {
    token_ids: &'a [TokenId],
    top_v: usize,
}

#[derive(Deserialize)]
struct LogitsResponse {
    positions: Vec<MaskPosition>,
}

impl HttpScorer {
    pub fn new(base_url: &str) -> Result<Self, ScorerError> {
        let client = Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ScorerError::Unreachable {
                url: base_url.to_string(),
                message: e.to_string(),
            })?;
        Ok(HttpScorer {
            base: base_url.trim_end_matches('/').to_string(),
            client,
            max_attempts: 30,
            retry_delay: Duration::from_secs(1),
            concurrency: Concurrency::Concurrent,
            info: OnceLock::new(),
        })
    }

    /// How often to retry while the sidecar answers 503, and the wait used
    /// when it sends no `Retry-After`.
    pub fn with_retry(mut self, max_attempts: usize, delay: Duration) -> Self {
        self.max_attempts = max_attempts.max(1);
        self.retry_delay = delay;
        self
    }

    pub fn with_concurrency(mut self, concurrency: Concurrency) -> Self {
        self.concurrency = concurrency;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn send(&self, make: impl Fn() -> RequestBuilder) -> Result<Response, ScorerError> {
        for attempt in 1..=self.max_attempts {
            let resp = make().send().map_err(|e| ScorerError::Unreachable {
                url: self.base.clone(),
                message: e.to_string(),
            })?;
            if resp.status() != StatusCode::SERVICE_UNAVAILABLE {
                return Ok(resp);
            }
            if attempt < self.max_attempts {
                let wait = resp
                    .headers()
                    .get(reqwest::header::RETRY_AFTER)
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .map(|secs| Duration::from_secs(secs).min(Duration::from_secs(30)))
                    .unwrap_or(self.retry_delay);
                log::info!("scorer loading (attempt {attempt}), retrying in {wait:?}");
                std::thread::sleep(wait);
            }
        }
        Err(ScorerError::Loading {
            attempts: self.max_attempts,
        })
    }

    fn decode<T: DeserializeOwned>(resp: Response) -> Result<T, ScorerError> {
        let status = resp.status();
        let body = resp.text().map_err(|e| ScorerError::Protocol(e.to_string()))?;
        if !status.is_success() {
            return Err(ScorerError::Http {
                status: status.as_u16(),
                body,
            });
        }
        serde_json::from_str(&body).map_err(|e| ScorerError::Protocol(format!("{e}: {body}")))
    }
}

impl Scorer for HttpScorer {
    fn info(&self) -> Result<ScorerInfo, ScorerError> {
        if let Some(info) = self.info.get() {
            return Ok(info.clone());
        }
        let resp = self.send(|| self.client.get(self.url("/v1/info")))?;
        let info: ScorerInfo = Self::decode(resp)?;
        if info.max_input_length == 0 || info.mask_token_id as usize >= info.vocab_size {
            return Err(ScorerError::Protocol(format!("inconsistent scorer info {info:?}")));
        }
        Ok(self.info.get_or_init(|| info).clone())
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenUnit>, ScorerError> {
        let resp = self.send(|| {
            self.client
                .post(self.url("/v1/tokenize"))
                .json(&TokenizeRequest { text })
        })?;
        let parsed: TokenizeResponse = Self::decode(resp)?;
        Ok(parsed.tokens)
    }

    fn mask_logits(&self, token_ids: &[TokenId], top_v: usize) -> Result<Vec<MaskPosition>, ScorerError> {
        let info = self.info()?;
        if !token_ids.contains(&info.mask_token_id) {
            return Err(ScorerError::NoMask);
        }
        if token_ids.len() > info.max_input_length {
            return Err(ScorerError::TooLong {
                len: token_ids.len(),
                max: info.max_input_length,
            });
        }
        let resp = self.send(|| {
            self.client
                .post(self.url("/v1/logits"))
                .json(&LogitsRequest { token_ids, top_v })
        })?;
        if resp.status() == StatusCode::PAYLOAD_TOO_LARGE {
            return Err(ScorerError::TooLong {
                len: token_ids.len(),
                max: info.max_input_length,
            });
        }
        let parsed: LogitsResponse = Self::decode(resp)?;
        validate_positions(token_ids, info.mask_token_id, &parsed.positions, top_v)?;
        Ok(parsed.positions)
    }

    fn concurrency(&self) -> Concurrency {
        self.concurrency
    }
}
