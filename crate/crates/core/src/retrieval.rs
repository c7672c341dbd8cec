//! Two-stage note retrieval for a `(disease, has_symptom, symptom)` triple.
//!
//! D1 keeps notes whose Assessment mentions the disease and no other KB
//! disease. D2 keeps the D1 notes whose Subjective mentions the symptom.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{EntityId, EntityKind, KnowledgeBase, Triple};
use crate::soap::{Corpus, Mention};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RetrievalError {
    #[error("unknown disease id {0}")]
    UnknownDisease(EntityId),
    #[error("unknown symptom id {0}")]
    UnknownSymptom(EntityId),
}

/// A triple paired with one retrieved note.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeInstance {
    pub triple: Triple,
    pub note_id: String,
    /// First subjective mention of the triple's object.
    pub target_mention: Mention,
}

impl ProbeInstance {
    pub fn key(&self) -> InstanceKey {
        InstanceKey {
            disease: self.triple.subject.clone(),
            symptom: self.triple.object.clone(),
            note_id: self.note_id.clone(),
        }
    }
}

/// Total order used for records and reports.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceKey {
    pub disease: EntityId,
    pub symptom: EntityId,
    pub note_id: String,
}

impl std::fmt::Display for InstanceKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}|{}|{}", self.disease, self.symptom, self.note_id)
    }
}

impl std::str::FromStr for InstanceKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(3, '|');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(d), Some(sy), Some(n)) if !d.is_empty() && !sy.is_empty() && !n.is_empty() => Ok(InstanceKey {
                disease: d.into(),
                symptom: sy.into(),
                note_id: n.to_string(),
            }),
            _ => Err(format!("instance key must look like DISEASE|SYMPTOM|NOTE, got {s:?}")),
        }
    }
}

pub fn filter_d1(corpus: &Corpus, disease: &EntityId, kb: &KnowledgeBase) -> Result<BTreeSet<String>, RetrievalError> {
    if kb.expect_kind(disease, EntityKind::Disease).is_none() {
        return Err(RetrievalError::UnknownDisease(disease.clone()));
    }
    Ok(corpus
        .iter()
        .filter(|(_, note)| {
            !note.diseases.is_empty() && note.diseases.iter().all(|m| &m.entity == disease)
        })
        .map(|(id, _)| id.clone())
        .collect())
}

pub fn filter_d2(
    d1: &BTreeSet<String>,
    corpus: &Corpus,
    symptom: &EntityId,
    kb: &KnowledgeBase,
) -> Result<BTreeSet<String>, RetrievalError> {
    if kb.expect_kind(symptom, EntityKind::Symptom).is_none() {
        return Err(RetrievalError::UnknownSymptom(symptom.clone()));
    }
    Ok(d1
        .iter()
        .filter(|id| {
            corpus
                .get(*id)
                .is_some_and(|n| n.symptoms.iter().any(|m| &m.entity == symptom))
        })
        .cloned()
        .collect())
}

/// Per-triple retrieval counts for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleRetrieval {
    pub subject: EntityId,
    pub object: EntityId,
    pub d1: usize,
    pub d2: usize,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalManifest {
    pub note_cap: usize,
    pub corpus_size: usize,
    pub triples: Vec<TripleRetrieval>,
    pub triples_without_instances: usize,
    pub total_instances: usize,
}

/// Pairs every triple with its D2 notes (lowest note ids first, up to
/// `note_cap` per triple; 0 means no cap).
pub fn build_instances(kb: &KnowledgeBase, corpus: &Corpus, note_cap: usize) -> (Vec<ProbeInstance>, RetrievalManifest) {
    let mut d1_cache: BTreeMap<&EntityId, BTreeSet<String>> = BTreeMap::new();
    let mut instances = Vec::new();
    let mut rows = Vec::new();
    for triple in kb.triples() {
        let d1 = d1_cache
            .entry(&triple.subject)
            .or_insert_with(|| filter_d1(corpus, &triple.subject, kb).expect("triple subjects are diseases"));
        let d2 = filter_d2(d1, corpus, &triple.object, kb).expect("triple objects are symptoms");
        let take = if note_cap == 0 { d2.len() } else { note_cap.min(d2.len()) };
        for note_id in d2.iter().take(take) {
            let target_mention = corpus[note_id]
                .symptoms
                .iter()
                .find(|m| m.entity == triple.object)
                .cloned()
                .expect("D2 note mentions the symptom");
            instances.push(ProbeInstance {
                triple: triple.clone(),
                note_id: note_id.clone(),
                target_mention,
            });
        }
        rows.push(TripleRetrieval {
            subject: triple.subject.clone(),
            object: triple.object.clone(),
            d1: d1.len(),
            d2: d2.len(),
            instances: take,
        });
    }
    instances.sort_by_key(|i| i.key());
    let manifest = RetrievalManifest {
        note_cap,
        corpus_size: corpus.len(),
        triples_without_instances: rows.iter().filter(|r| r.instances == 0).count(),
        total_instances: instances.len(),
        triples: rows,
    };
    (instances, manifest)
}
