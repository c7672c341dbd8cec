//! Deterministic closed-form scorer over a planted synthetic vocabulary.
//!
//! Vocabulary ids: `[MASK]` = 0, `[UNK]` = 1, then disease tokens, symptom
//! tokens and generic tokens in declaration order. Text is split into
//! alphanumeric words (looked up lowercased), single punctuation characters
//! and literal `[MASK]` markers; anything outside the vocabulary is `[UNK]`.
//!
//! For a query whose rightmost disease name is `d`, with context set `C` (the
//! symptoms whose full token sequence occurs among the query's tokens), token
//! `t` at offset `j` of symptom `s` scores
//!
//! ```text
//! strength(d, s) + bonus(s) + salience(s, j) + jitter(t)
//! bonus(s) = λ · (1 + μ · π(s) · Σ_{u ∈ C, u ≠ s} π(u))   if s ∈ C, else 0
//! ```
//!
//! where `π` is the sign of the planted strength (0 when unplanted) and
//! `jitter(t) < 1e-6` is keyed on the planted seed. A generic token scores
//! `prior + jitter`. A token is only offered at a mask where its whole
//! symptom fits: every covered slot is a mask or already holds the matching
//! token, and the tokens just outside the span are neither masks nor answer
//! tokens. Disease tokens, `[UNK]` and `[MASK]` are never offered.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::EntityId;
use crate::scorer::{MaskPosition, ScoredToken, Scorer, ScorerError, ScorerInfo, TokenId, TokenUnit};

pub const MASK_TOKEN: &str = "[MASK]";
pub const UNK_TOKEN: &str = "[UNK]";
pub const MASK_ID: TokenId = 0;
pub const UNK_ID: TokenId = 1;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("cannot read planted knowledge {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("planted knowledge is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid planted knowledge: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedDisease {
    pub id: EntityId,
    pub name: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSymptom {
    pub id: EntityId,
    pub name: String,
    pub tokens: Vec<String>,
    /// Per-token offset; empty means all zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub salience: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericToken {
    pub token: String,
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    pub symptom: EntityId,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedKnowledge {
    pub seed: u64,
    /// λ: bonus for symptoms present in the context.
    pub copy_bias: f64,
    /// μ: how strongly the bonus follows agreement with the other context
    /// symptoms.
    #[serde(default)]
    pub agreement: f64,
    /// ρ used when the table was sampled; informational.
    #[serde(default)]
    pub known_fraction: f64,
    pub max_input_length: usize,
    pub diseases: Vec<PlantedDisease>,
    pub symptoms: Vec<PlantedSymptom>,
    #[serde(default)]
    pub generics: Vec<GenericToken>,
    /// Disease id to associations, strictly decreasing by strength.
    pub knowledge: BTreeMap<EntityId, Vec<Association>>,
}

impl PlantedKnowledge {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, OracleError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| OracleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn strength(&self, disease: &EntityId, symptom: &EntityId) -> f64 {
        self.knowledge
            .get(disease)
            .and_then(|list| list.iter().find(|a| &a.symptom == symptom))
            .map_or(0.0, |a| a.strength)
    }
}

/// Seed-keyed tie-break in `[0, 1e-6)`.
pub fn jitter(seed: u64, token: TokenId) -> f64 {
    fn splitmix64(x: u64) -> u64 {
        let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let bits = splitmix64(seed ^ splitmix64(token as u64)) >> 11;
    bits as f64 / (1u64 << 53) as f64 * 1e-6
}

pub fn sign(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Words of `text` as the oracle tokenizer sees them (lowercased, no
/// punctuation, no masks).
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokenKind {
    Special,
    Disease,
    Symptom { symptom: usize, offset: usize },
    Generic(usize),
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    kinds: Vec<TokenKind>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    fn build(planted: &PlantedKnowledge) -> Result<Self, OracleError> {
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            kinds: Vec::new(),
            index: HashMap::new(),
        };
        vocab.push(MASK_TOKEN, TokenKind::Special)?;
        vocab.push(UNK_TOKEN, TokenKind::Special)?;
        for d in &planted.diseases {
            for t in &d.tokens {
                // disease names may share words such as "syndrome"
                if !vocab.index.contains_key(t) {
                    vocab.push(t, TokenKind::Disease)?;
                }
            }
        }
        for (si, s) in planted.symptoms.iter().enumerate() {
            for (offset, t) in s.tokens.iter().enumerate() {
                vocab.push(t, TokenKind::Symptom { symptom: si, offset })?;
            }
        }
        for (gi, g) in planted.generics.iter().enumerate() {
            vocab.push(&g.token, TokenKind::Generic(gi))?;
        }
        Ok(vocab)
    }

    fn push(&mut self, token: &str, kind: TokenKind) -> Result<(), OracleError> {
        if kind != TokenKind::Special && (token.is_empty() || words(token) != [token.to_string()]) {
            return Err(OracleError::Invalid(format!(
                "token {token:?} must be a single lowercase alphanumeric word"
            )));
        }
        if self.index.contains_key(token) {
            return Err(OracleError::Invalid(format!("token {token:?} is used twice")));
        }
        self.index.insert(token.to_string(), self.tokens.len() as TokenId);
        self.tokens.push(token.to_string());
        self.kinds.push(kind);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    fn is_answer(&self, id: TokenId) -> bool {
        matches!(
            self.kinds[id as usize],
            TokenKind::Symptom { .. } | TokenKind::Generic(_)
        )
    }
}

#[derive(Debug, Clone)]
pub struct OracleScorer {
    planted: PlantedKnowledge,
    vocab: Vocabulary,
    disease_seqs: Vec<Vec<TokenId>>,
    symptom_seqs: Vec<Vec<TokenId>>,
    saliences: Vec<Vec<f64>>,
    /// Per disease: symptom index -> strength.
    strengths: Vec<HashMap<usize, f64>>,
}

impl OracleScorer {
    pub fn new(planted: PlantedKnowledge) -> Result<Self, OracleError> {
        let invalid = |m: String| Err(OracleError::Invalid(m));
        if planted.max_input_length == 0 {
            return invalid("max_input_length must be positive".into());
        }
        if !planted.copy_bias.is_finite() || planted.copy_bias < 0.0 || !planted.agreement.is_finite() {
            return invalid("copy_bias must be finite and >= 0, agreement finite".into());
        }
        let vocab = Vocabulary::build(&planted)?;
        let ids = |tokens: &[String]| -> Vec<TokenId> { tokens.iter().map(|t| vocab.index[t]).collect() };
        let mut disease_pos = HashMap::new();
        let mut disease_seqs = Vec::new();
        for (i, d) in planted.diseases.iter().enumerate() {
            if d.tokens.is_empty() || words(&d.name) != d.tokens {
                return invalid(format!("disease {} tokens must be the words of its name", d.id));
            }
            if disease_pos.insert(d.id.clone(), i).is_some() {
                return invalid(format!("duplicate disease {}", d.id));
            }
            disease_seqs.push(ids(&d.tokens));
        }
        let mut symptom_pos = HashMap::new();
        let mut symptom_seqs = Vec::new();
        let mut saliences = Vec::new();
        for (i, s) in planted.symptoms.iter().enumerate() {
            if s.tokens.is_empty() || words(&s.name) != s.tokens {
                return invalid(format!("symptom {} tokens must be the words of its name", s.id));
            }
            if !s.salience.is_empty() && s.salience.len() != s.tokens.len() {
                return invalid(format!("symptom {} salience length differs from token count", s.id));
            }
            if s.salience.iter().any(|x| !x.is_finite()) {
                return invalid(format!("symptom {} has a non-finite salience", s.id));
            }
            if symptom_pos.insert(s.id.clone(), i).is_some() {
                return invalid(format!("duplicate symptom {}", s.id));
            }
            symptom_seqs.push(ids(&s.tokens));
            saliences.push(if s.salience.is_empty() {
                vec![0.0; s.tokens.len()]
            } else {
                s.salience.clone()
            });
        }
        if planted.generics.iter().any(|g| !g.prior.is_finite()) {
            return invalid("generic priors must be finite".into());
        }
        let mut strengths = vec![HashMap::new(); planted.diseases.len()];
        for (d, list) in &planted.knowledge {
            let &di = disease_pos
                .get(d)
                .ok_or_else(|| OracleError::Invalid(format!("knowledge for unknown disease {d}")))?;
            for w in list.windows(2) {
                if !(w[0].strength > w[1].strength) {
                    return invalid(format!("strengths for {d} are not strictly decreasing"));
                }
            }
            for a in list {
                let &si = symptom_pos
                    .get(&a.symptom)
                    .ok_or_else(|| OracleError::Invalid(format!("knowledge for unknown symptom {}", a.symptom)))?;
                if !a.strength.is_finite() || a.strength == 0.0 {
                    return invalid(format!("strength of ({d}, {}) must be finite and non-zero", a.symptom));
                }
                if strengths[di].insert(si, a.strength).is_some() {
                    return invalid(format!("({d}, {}) listed twice", a.symptom));
                }
            }
        }
        Ok(OracleScorer {
            planted,
            vocab,
            disease_seqs,
            symptom_seqs,
            saliences,
            strengths,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, OracleError> {
        OracleScorer::new(PlantedKnowledge::load(path)?)
    }

    pub fn planted(&self) -> &PlantedKnowledge {
        &self.planted
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn occurs_at(ids: &[TokenId], seq: &[TokenId], at: usize) -> bool {
        ids.len() >= at + seq.len() && ids[at..at + seq.len()] == *seq
    }

    /// Index of the disease whose name occurs rightmost in `ids`.
    fn find_disease(&self, ids: &[TokenId]) -> Option<usize> {
        (0..ids.len())
            .rev()
            .find_map(|at| (0..self.disease_seqs.len()).find(|&d| Self::occurs_at(ids, &self.disease_seqs[d], at)))
    }

    fn context_set(&self, ids: &[TokenId]) -> BTreeSet<usize> {
        let mut found = BTreeSet::new();
        for (at, &id) in ids.iter().enumerate() {
            if let TokenKind::Symptom { symptom, offset: 0 } = self.vocab.kinds[id as usize] {
                if Self::occurs_at(ids, &self.symptom_seqs[symptom], at) {
                    found.insert(symptom);
                }
            }
        }
        found
    }

    fn strength(&self, disease: Option<usize>, symptom: usize) -> f64 {
        disease
            .and_then(|d| self.strengths[d].get(&symptom).copied())
            .unwrap_or(0.0)
    }

    /// Symptom-level score before salience and jitter.
    fn base_logit(&self, disease: Option<usize>, symptom: usize, context: &BTreeSet<usize>) -> f64 {
        let strength = self.strength(disease, symptom);
        if !context.contains(&symptom) {
            return strength;
        }
        let agreement: i64 = context
            .iter()
            .filter(|&&u| u != symptom)
            .map(|&u| sign(self.strength(disease, u)))
            .sum();
        let pi = sign(strength);
        strength + self.planted.copy_bias * (1.0 + self.planted.agreement * (pi * agreement) as f64)
    }

    fn flank_ok(&self, ids: &[TokenId], pos: Option<usize>) -> bool {
        match pos {
            None => true,
            Some(p) if p >= ids.len() => true,
            Some(p) => ids[p] != MASK_ID && !self.vocab.is_answer(ids[p]),
        }
    }

    /// Whether `seq` can occupy `ids[start..start + seq.len()]`.
    fn fits(&self, ids: &[TokenId], seq: &[TokenId], start: usize) -> bool {
        start + seq.len() <= ids.len()
            && seq
                .iter()
                .enumerate()
                .all(|(o, &t)| ids[start + o] == MASK_ID || ids[start + o] == t)
            && self.flank_ok(ids, start.checked_sub(1))
            && self.flank_ok(ids, Some(start + seq.len()))
    }

    /// Every offered `(token, logit)` at mask offset `p`, unsorted.
    fn candidates_at(
        &self,
        ids: &[TokenId],
        p: usize,
        disease: Option<usize>,
        context: &BTreeSet<usize>,
    ) -> Vec<(TokenId, f64)> {
        let seed = self.planted.seed;
        let mut out = Vec::new();
        for (s, seq) in self.symptom_seqs.iter().enumerate() {
            for (j, &tok) in seq.iter().enumerate() {
                if j > p || !self.fits(ids, seq, p - j) {
                    continue;
                }
                let logit = self.base_logit(disease, s, context) + self.saliences[s][j] + jitter(seed, tok);
                out.push((tok, logit));
            }
        }
        for (g, generic) in self.planted.generics.iter().enumerate() {
            let tok = self.vocab.index[&generic.token];
            debug_assert_eq!(self.vocab.kinds[tok as usize], TokenKind::Generic(g));
            if self.flank_ok(ids, p.checked_sub(1)) && self.flank_ok(ids, Some(p + 1)) {
                out.push((tok, generic.prior + jitter(seed, tok)));
            }
        }
        out
    }
}

impl Scorer for OracleScorer {
    fn info(&self) -> Result<ScorerInfo, ScorerError> {
        Ok(ScorerInfo {
            model_id: "oracle".into(),
            mask_token: MASK_TOKEN.into(),
            mask_token_id: MASK_ID,
            max_input_length: self.planted.max_input_length,
            vocab_size: self.vocab.len(),
        })
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenUnit>, ScorerError> {
        let mut out = Vec::new();
        let mut rest = text;
        while let Some(c) = rest.chars().next() {
            if rest.starts_with(MASK_TOKEN) {
                out.push(TokenUnit {
                    id: MASK_ID,
                    surface: MASK_TOKEN.into(),
                });
                rest = &rest[MASK_TOKEN.len()..];
            } else if c.is_whitespace() {
                rest = &rest[c.len_utf8()..];
            } else if c.is_alphanumeric() {
                let end = rest.find(|c: char| !c.is_alphanumeric()).unwrap_or(rest.len());
                let word = &rest[..end];
                let id = self.vocab.id(&word.to_lowercase()).unwrap_or(UNK_ID);
                // special tokens are only reachable through the literal marker
                let id = if id == MASK_ID { UNK_ID } else { id };
                out.push(TokenUnit {
                    id,
                    surface: word.to_string(),
                });
                rest = &rest[end..];
            } else {
                out.push(TokenUnit {
                    id: UNK_ID,
                    surface: c.to_string(),
                });
                rest = &rest[c.len_utf8()..];
            }
        }
        Ok(out)
    }

    fn mask_logits(&self, ids: &[TokenId], top_v: usize) -> Result<Vec<MaskPosition>, ScorerError> {
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= self.vocab.len()) {
            return Err(ScorerError::UnknownToken(bad));
        }
        if !ids.contains(&MASK_ID) {
            return Err(ScorerError::NoMask);
        }
        if ids.len() > self.planted.max_input_length {
            return Err(ScorerError::TooLong {
                len: ids.len(),
                max: self.planted.max_input_length,
            });
        }
        let disease = self.find_disease(ids);
        let context = self.context_set(ids);
        Ok(ids
            .iter()
            .enumerate()
            .filter(|(_, &id)| id == MASK_ID)
            .map(|(index, _)| {
                let mut cands = self.candidates_at(ids, index, disease, &context);
                cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                cands.truncate(top_v);
                MaskPosition {
                    index,
                    top: cands
                        .into_iter()
                        .map(|(id, logit)| ScoredToken {
                            id,
                            surface: self.vocab.tokens[id as usize].clone(),
                            logit,
                        })
                        .collect(),
                }
            })
            .collect())
    }
}

/// Per-mask top-V for a token sequence under `planted`.
pub fn oracle_logits(
    planted: &PlantedKnowledge,
    token_ids: &[TokenId],
    top_v: usize,
) -> Result<Vec<MaskPosition>, ScorerError> {
    let scorer = OracleScorer::new(planted.clone()).map_err(|e| ScorerError::Protocol(e.to_string()))?;
    scorer.mask_logits(token_ids, top_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::run_conformance;

    fn symptom(id: &str, name: &str) -> PlantedSymptom {
        PlantedSymptom {
            id: id.into(),
            name: name.into(),
            tokens: words(name),
            salience: vec![],
        }
    }

    fn planted(knowledge: &[(&str, f64)]) -> PlantedKnowledge {
        PlantedKnowledge {
            seed: 11,
            copy_bias: 2.0,
            agreement: 0.0,
            known_fraction: 1.0,
            max_input_length: 32,
            diseases: vec![PlantedDisease {
                id: "D1".into(),
                name: "flu".into(),
                tokens: vec!["flu".into()],
            }],
            symptoms: vec![
                symptom("S1", "fever"),
                symptom("S2", "cough"),
                symptom("S3", "rash"),
                symptom("S4", "sore throat"),
            ],
            generics: vec![],
            knowledge: [(
                EntityId::from("D1"),
                knowledge
                    .iter()
                    .map(|(s, v)| Association {
                        symptom: (*s).into(),
                        strength: *v,
                    })
                    .collect(),
            )]
            .into(),
        }
    }

    fn ids(scorer: &OracleScorer, text: &str) -> Vec<TokenId> {
        scorer.tokenize(text).unwrap().into_iter().map(|t| t.id).collect()
    }

    fn logit_of(top: &[ScoredToken], surface: &str) -> f64 {
        top.iter().find(|t| t.surface == surface).unwrap().logit
    }

    #[test]
    fn rule_examples() {
        let scorer = OracleScorer::new(planted(&[("S1", 3.0), ("S3", 2.5)])).unwrap();
        let q = ids(&scorer, "cough and rash. flu has symptoms such as [MASK].");
        let pos = scorer.mask_logits(&q, 50).unwrap();
        assert_eq!(pos.len(), 1);
        let top = &pos[0].top;
        // remembered, not in context
        assert!((logit_of(top, "fever") - 3.0).abs() < 1e-6);
        // unremembered, in context
        assert!((logit_of(top, "cough") - 2.0).abs() < 1e-6);
        // remembered and in context
        assert!((logit_of(top, "rash") - 4.5).abs() < 1e-6);
        let order: Vec<&str> = top.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(order, ["rash", "fever", "cough"]);
    }

    #[test]
    fn agreement_scales_the_bonus() {
        let mut p = planted(&[("S1", 1.0), ("S2", 0.5), ("S3", -0.5)]);
        p.agreement = 1.0;
        let scorer = OracleScorer::new(p).unwrap();
        let q = ids(&scorer, "fever cough rash flu [MASK]");
        let top = &scorer.mask_logits(&q, 10).unwrap()[0].top;
        // fever: 1 + 2(1 + (1 - 1)) = 3; cough: 0.5 + 2 = 2.5; rash: -0.5 + 2(1 - 2) = -2.5
        assert!((logit_of(top, "fever") - 3.0).abs() < 1e-6);
        assert!((logit_of(top, "cough") - 2.5).abs() < 1e-6);
        assert!((logit_of(top, "rash") + 2.5).abs() < 1e-6);
    }

    #[test]
    fn two_token_symptom_needs_room() {
        let scorer = OracleScorer::new(planted(&[("S4", 1.0)])).unwrap();
        let single = scorer.mask_logits(&ids(&scorer, "flu [MASK] ."), 50).unwrap();
        assert!(single[0].top.iter().all(|t| t.surface != "sore" && t.surface != "throat"));

        let double = scorer.mask_logits(&ids(&scorer, "flu [MASK] [MASK] ."), 50).unwrap();
        let first: Vec<&str> = double[0].top.iter().map(|t| t.surface.as_str()).collect();
        let second: Vec<&str> = double[1].top.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!((first.as_slice(), second.as_slice()), (&["sore"][..], &["throat"][..]));

        let filled = scorer.mask_logits(&ids(&scorer, "flu sore [MASK] ."), 50).unwrap();
        assert_eq!(filled[0].top.len(), 1);
        assert_eq!(filled[0].top[0].surface, "throat");
        let wrong = scorer.mask_logits(&ids(&scorer, "flu fever [MASK] ."), 50).unwrap();
        assert!(wrong[0].top.is_empty());
    }

    #[test]
    fn tokenizer_and_errors() {
        let scorer = OracleScorer::new(planted(&[])).unwrap();
        let units = scorer.tokenize("Flu, [MASK]zzz").unwrap();
        let got: Vec<(TokenId, &str)> = units.iter().map(|u| (u.id, u.surface.as_str())).collect();
        let flu = scorer.vocabulary().id("flu").unwrap();
        assert_eq!(got, [(flu, "Flu"), (UNK_ID, ","), (MASK_ID, "[MASK]"), (UNK_ID, "zzz")]);
        assert!(matches!(scorer.mask_logits(&[flu], 5), Err(ScorerError::NoMask)));
        assert!(matches!(scorer.mask_logits(&[0, 999], 5), Err(ScorerError::UnknownToken(999))));
        assert!(matches!(
            scorer.mask_logits(&[0; 33], 5),
            Err(ScorerError::TooLong { len: 33, max: 32 })
        ));
    }

    #[test]
    fn jitter_is_small_and_keyed() {
        for t in 0..1000 {
            let j = jitter(5, t);
            assert!((0.0..1e-6).contains(&j));
            assert_eq!(j, jitter(5, t));
        }
        assert_ne!(jitter(5, 3), jitter(6, 3));
    }

    #[test]
    fn rejects_bad_tables() {
        let mut p = planted(&[("S1", 1.0), ("S2", 1.0)]);
        assert!(matches!(OracleScorer::new(p.clone()), Err(OracleError::Invalid(_))));
        p.knowledge.clear();
        p.symptoms.push(symptom("S5", "fever"));
        assert!(matches!(OracleScorer::new(p.clone()), Err(OracleError::Invalid(_))));
        p.symptoms.pop();
        p.symptoms[0].tokens = vec!["Fever".into()];
        assert!(OracleScorer::new(p).is_err());
    }

    #[test]
    fn passes_conformance() {
        let scorer = OracleScorer::new(planted(&[("S1", 1.0)])).unwrap();
        let report = run_conformance(&scorer, "flu with fever and sore throat", 50);
        assert!(report.passed(), "{report}");
    }
}
