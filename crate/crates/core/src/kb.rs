//! Knowledge base of diseases, symptoms and gold `has_symptom` triples.
//!
//! The on-disk format is a single JSON document:
//!
//! ```json
//! { "entities": [{"id": "D1", "kind": "disease", "name": "nasal polyp", "aliases": []}],
//!   "triples":  [{"subject": "D1", "object": "S1"}] }
//! ```
//!
//! The relation is implicit; only `has_symptom` is supported.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::soap::lexicon::Lexicon;

/// Opaque, non-empty entity identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Disease,
    Symptom,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityKind::Disease => f.write_str("disease"),
            EntityKind::Symptom => f.write_str("symptom"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

impl Entity {
    /// Normalized surface forms: the canonical name plus every alias.
    pub fn surfaces(&self) -> BTreeSet<String> {
        std::iter::once(&self.name)
            .chain(self.aliases.iter())
            .map(|s| normalize_surface(s))
            .collect()
    }

    pub fn matches_surface(&self, normalized: &str) -> bool {
        normalize_surface(&self.name) == normalized
            || self.aliases.iter().any(|a| normalize_surface(a) == normalized)
    }
}

/// A `(disease, has_symptom, symptom)` fact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: EntityId,
    pub object: EntityId,
}

impl Triple {
    pub const RELATION: &'static str = "has_symptom";

    pub fn new(subject: impl Into<EntityId>, object: impl Into<EntityId>) -> Self {
        Triple {
            subject: subject.into(),
            object: object.into(),
        }
    }
}

impl From<String> for EntityId {
    fn from(s: String) -> Self {
        EntityId(s)
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("cannot read KB file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("KB file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{location}: malformed record: {message}")]
    Malformed { location: String, message: String },
    #[error("{location}: duplicate entity id {id}")]
    DuplicateId { location: String, id: EntityId },
    #[error("{location}: {kind} entities {first} and {second} share the normalized surface {surface:?}")]
    SurfaceCollision {
        location: String,
        kind: EntityKind,
        first: EntityId,
        second: EntityId,
        surface: String,
    },
    #[error("{location}: triple references unknown entity {id}")]
    UnknownEntity { location: String, id: EntityId },
    #[error("{location}: triple endpoint {id} is a {found}, expected a {expected}")]
    WrongKind {
        location: String,
        id: EntityId,
        expected: EntityKind,
        found: EntityKind,
    },
    #[error("{location}: duplicate triple ({subject}, {object})")]
    DuplicateTriple {
        location: String,
        subject: EntityId,
        object: EntityId,
    },
}

#[derive(Deserialize)]
struct RawKb {
    entities: Vec<serde_json::Value>,
    #[serde(default)]
    triples: Vec<serde_json::Value>,
}

#[derive(Serialize)]
struct KbFile<'a> {
    entities: Vec<&'a Entity>,
    triples: Vec<&'a Triple>,
}

/// Immutable after construction; share freely across threads.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    entities: BTreeMap<EntityId, Entity>,
    triples: BTreeSet<Triple>,
    gold_index: BTreeMap<EntityId, BTreeSet<EntityId>>,
    disease_lexicon: Lexicon,
    symptom_lexicon: Lexicon,
}

impl KnowledgeBase {
    /// Validates and indexes entities and triples.
    pub fn new(entities: Vec<Entity>, triples: Vec<Triple>) -> Result<Self, KbError> {
        let mut by_id = BTreeMap::new();
        let mut surface_owner: BTreeMap<(EntityKind, String), EntityId> = BTreeMap::new();
        for (i, entity) in entities.into_iter().enumerate() {
            let location = format!("entities[{i}]");
            if entity.id.as_str().is_empty() {
                return Err(KbError::Malformed {
                    location,
                    message: "empty id".into(),
                });
            }
            if by_id.contains_key(&entity.id) {
                return Err(KbError::DuplicateId {
                    location,
                    id: entity.id,
                });
            }
            for raw in std::iter::once(&entity.name).chain(entity.aliases.iter()) {
                let surface = normalize_surface(raw);
                if surface.is_empty() {
                    return Err(KbError::Malformed {
                        location,
                        message: format!("surface {raw:?} normalizes to the empty string"),
                    });
                }
                match surface_owner.get(&(entity.kind, surface.clone())) {
                    Some(owner) if owner != &entity.id => {
                        return Err(KbError::SurfaceCollision {
                            location,
                            kind: entity.kind,
                            first: owner.clone(),
                            second: entity.id.clone(),
                            surface,
                        });
                    }
                    _ => {
                        surface_owner.insert((entity.kind, surface), entity.id.clone());
                    }
                }
            }
            by_id.insert(entity.id.clone(), entity);
        }

        let mut triple_set = BTreeSet::new();
        let mut gold_index: BTreeMap<EntityId, BTreeSet<EntityId>> = BTreeMap::new();
        for (i, triple) in triples.into_iter().enumerate() {
            let location = format!("triples[{i}]");
            for (id, expected) in [
                (&triple.subject, EntityKind::Disease),
                (&triple.object, EntityKind::Symptom),
            ] {
                let entity = by_id.get(id).ok_or_else(|| KbError::UnknownEntity {
                    location: location.clone(),
                    id: id.clone(),
                })?;
                if entity.kind != expected {
                    return Err(KbError::WrongKind {
                        location,
                        id: id.clone(),
                        expected,
                        found: entity.kind,
                    });
                }
            }
            if !triple_set.insert(triple.clone()) {
                return Err(KbError::DuplicateTriple {
                    location,
                    subject: triple.subject,
                    object: triple.object,
                });
            }
            gold_index
                .entry(triple.subject)
                .or_default()
                .insert(triple.object);
        }

        let disease_lexicon = Lexicon::build(
            by_id
                .values()
                .filter(|e| e.kind == EntityKind::Disease)
                .map(|e| (e.id.clone(), e.surfaces())),
        );
        let symptom_lexicon = Lexicon::build(
            by_id
                .values()
                .filter(|e| e.kind == EntityKind::Symptom)
                .map(|e| (e.id.clone(), e.surfaces())),
        );

        Ok(KnowledgeBase {
            entities: by_id,
            triples: triple_set,
            gold_index,
            disease_lexicon,
            symptom_lexicon,
        })
    }

    pub fn from_json_str(json: &str) -> Result<Self, KbError> {
        let raw: RawKb = serde_json::from_str(json)?;
        let entities = raw
            .entities
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                serde_json::from_value::<Entity>(v).map_err(|e| KbError::Malformed {
                    location: format!("entities[{i}]"),
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let triples = raw
            .triples
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                serde_json::from_value::<Triple>(v).map_err(|e| KbError::Malformed {
                    location: format!("triples[{i}]"),
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        KnowledgeBase::new(entities, triples)
    }

    pub fn to_json_string(&self) -> String {
        let file = KbFile {
            entities: self.entities.values().collect(),
            triples: self.triples.iter().collect(),
        };
        serde_json::to_string_pretty(&file).expect("KB serializes")
    }

    pub fn entity(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entities_of(&self, kind: EntityKind) -> impl Iterator<Item = &Entity> {
        self.entities.values().filter(move |e| e.kind == kind)
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn n_triples(&self) -> usize {
        self.triples.len()
    }

    /// Gold symptom ids of a disease; empty for unknown ids.
    pub fn gold(&self, disease: &EntityId) -> &BTreeSet<EntityId> {
        static EMPTY: BTreeSet<EntityId> = BTreeSet::new();
        self.gold_index.get(disease).unwrap_or(&EMPTY)
    }

    pub fn is_gold(&self, disease: &EntityId, symptom: &EntityId) -> bool {
        self.gold(disease).contains(symptom)
    }

    pub fn gold_index(&self) -> &BTreeMap<EntityId, BTreeSet<EntityId>> {
        &self.gold_index
    }

    pub fn lexicon(&self, kind: EntityKind) -> &Lexicon {
        match kind {
            EntityKind::Disease => &self.disease_lexicon,
            EntityKind::Symptom => &self.symptom_lexicon,
        }
    }

    /// Looks up an id and checks its kind.
    pub fn expect_kind(&self, id: &EntityId, kind: EntityKind) -> Option<&Entity> {
        self.entities.get(id).filter(|e| e.kind == kind)
    }
}

pub fn load_kb(path: impl AsRef<Path>) -> Result<KnowledgeBase, KbError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.display().to_string(),
        source,
    })?;
    KnowledgeBase::from_json_str(&text)
}

fn is_edge_punct(c: char) -> bool {
    c.is_whitespace()
        || c.is_ascii_punctuation()
        || matches!(c, '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}' | '¡' | '¿' | '«' | '»' | '·')
}

/// Lowercases, strips punctuation and whitespace at both ends, and collapses
/// internal whitespace runs to one space. Internal punctuation ("x-ray") is kept.
pub fn normalize_surface(text: &str) -> String {
    let lower = text.to_lowercase();
    let trimmed = lower.trim_matches(is_edge_punct);
    let mut out = String::with_capacity(trimmed.len());
    for (i, word) in trimmed.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}
