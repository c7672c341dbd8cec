//! Cloze prompt templates and masked query construction.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::Triple;

pub const SUBJECT_SLOT: &str = "[X]";
pub const OBJECT_SLOT: &str = "[Y]";
pub const DEFAULT_PATTERN: &str = "[X] has symptoms such as [Y].";

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template for {relation:?} must contain exactly one {slot} (found {found})")]
    SlotCount {
        relation: String,
        slot: &'static str,
        found: usize,
    },
    #[error("template for {0:?} is empty")]
    Empty(String),
    #[error("no template for relation {0:?}")]
    MissingRelation(String),
    #[error("cannot read template file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template file {path} is not a JSON object of relation -> pattern: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub relation: String,
    pub pattern: String,
}

impl PromptTemplate {
    pub fn new(relation: impl Into<String>, pattern: impl Into<String>) -> Result<Self, TemplateError> {
        let relation = relation.into();
        let pattern = pattern.into();
        if pattern.trim().is_empty() {
            return Err(TemplateError::Empty(relation));
        }
        for slot in [SUBJECT_SLOT, OBJECT_SLOT] {
            let found = pattern.matches(slot).count();
            if found != 1 {
                return Err(TemplateError::SlotCount { relation, slot, found });
            }
        }
        Ok(PromptTemplate { relation, pattern })
    }

    pub fn has_symptom() -> Self {
        PromptTemplate::new(Triple::RELATION, DEFAULT_PATTERN).expect("default pattern is valid")
    }

    /// Pattern with the subject filled and the object slot replaced by
    /// `n_masks` space-separated mask markers.
    pub fn fill(&self, subject: &str, mask_marker: &str, n_masks: usize) -> String {
        let masks = vec![mask_marker; n_masks].join(" ");
        self.pattern.replace(SUBJECT_SLOT, subject).replace(OBJECT_SLOT, &masks)
    }
}

/// Loads a JSON object mapping relation names to patterns and returns the
/// template for `relation`.
pub fn load_template(path: impl AsRef<Path>, relation: &str) -> Result<PromptTemplate, TemplateError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let map: BTreeMap<String, String> = serde_json::from_str(&text).map_err(|source| TemplateError::Json {
        path: path.display().to_string(),
        source,
    })?;
    let pattern = map
        .get(relation)
        .ok_or_else(|| TemplateError::MissingRelation(relation.to_string()))?;
    PromptTemplate::new(relation, pattern.clone())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedQuery {
    pub context_text: String,
    pub prompt_text: String,
    pub n_masks: usize,
}

impl MaskedQuery {
    /// Model input: context first, then the prompt.
    pub fn text(&self) -> String {
        if self.context_text.is_empty() {
            self.prompt_text.clone()
        } else {
            format!("{} {}", self.context_text, self.prompt_text)
        }
    }
}

pub fn build_query(
    template: &PromptTemplate,
    subject: &str,
    context: &str,
    mask_marker: &str,
    n_masks: usize,
) -> MaskedQuery {
    assert!(n_masks >= 1, "a query needs at least one mask");
    MaskedQuery {
        context_text: context.trim().to_string(),
        prompt_text: template.fill(subject, mask_marker, n_masks),
        n_masks,
    }
}
