//! Synthetic KB and note corpus with planted knowledge, a closed-form oracle
//! scorer over the same vocabulary, and a brute-force reference for the
//! expected tables.

pub mod oracle;
pub mod reference;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{Entity, EntityId, EntityKind, KnowledgeBase, Triple};
use crate::soap::{RejectReason, SoapNote};

pub use oracle::{
    jitter, oracle_logits, Association, GenericToken, OracleError, OracleScorer, PlantedDisease, PlantedKnowledge,
    PlantedSymptom, Vocabulary,
};
pub use reference::{reference_metrics, reference_ranking, ReferenceConfig, ReferenceError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("spec is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path, source: std::io::Error) -> SynthError {
    SynthError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Generator parameters. Every field has a default, so `{}` is a valid spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_diseases: usize,
    pub n_symptoms: usize,
    pub n_notes: usize,
    /// Inclusive range of gold symptoms per disease.
    pub gold_per_disease: [usize; 2],
    /// Inclusive range of symptom mentions per note.
    pub mentions_per_note: [usize; 2],
    /// Share of each note's mentions that are not gold for its disease.
    pub incorrect_fraction: f64,
    /// Share of symptoms named by two words instead of one.
    pub multi_token_fraction: f64,
    pub n_generics: usize,
    pub generic_prior: [f64; 2],
    /// Range of planted strength magnitudes.
    pub strength: [f64; 2],
    /// ρ: chance that a gold pair (and, with `negative_knowledge`, a non-gold
    /// pair) gets a planted strength.
    pub known_fraction: f64,
    /// λ
    pub copy_bias: f64,
    /// μ
    pub agreement: f64,
    pub negative_knowledge: bool,
    pub seed: u64,
    pub max_input_length: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_diseases: 20,
            n_symptoms: 100,
            n_notes: 200,
            gold_per_disease: [3, 8],
            mentions_per_note: [3, 10],
            incorrect_fraction: 0.5,
            multi_token_fraction: 0.0,
            n_generics: 5,
            generic_prior: [1.0, 1.9],
            strength: [0.2, 1.8],
            known_fraction: 0.5,
            copy_bias: 2.0,
            agreement: 1.0,
            negative_knowledge: true,
            seed: 0,
            max_input_length: 512,
        }
    }
}

impl SynthSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |m: &str| Err(SynthError::Invalid(m.to_string()));
        if self.n_diseases == 0 || self.n_symptoms == 0 || self.n_notes == 0 {
            return invalid("counts must be at least 1");
        }
        let [g_lo, g_hi] = self.gold_per_disease;
        let [m_lo, m_hi] = self.mentions_per_note;
        if g_lo == 0 || g_lo > g_hi || m_lo == 0 || m_lo > m_hi {
            return invalid("ranges must be non-empty and start at 1 or more");
        }
        for (name, f) in [
            ("incorrect_fraction", self.incorrect_fraction),
            ("multi_token_fraction", self.multi_token_fraction),
            ("known_fraction", self.known_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(SynthError::Invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        let [s_lo, s_hi] = self.strength;
        if !(s_lo > 0.0 && s_lo <= s_hi && s_hi.is_finite()) {
            return invalid("strength range must be positive and ordered");
        }
        let [p_lo, p_hi] = self.generic_prior;
        if !(p_lo <= p_hi && p_lo.is_finite() && p_hi.is_finite()) {
            return invalid("generic_prior range must be finite and ordered");
        }
        if !(self.copy_bias >= 0.0 && self.copy_bias.is_finite() && self.agreement.is_finite()) {
            return invalid("copy_bias must be finite and >= 0");
        }
        if self.max_input_length == 0 {
            return invalid("max_input_length must be positive");
        }
        if g_hi > self.n_symptoms {
            return Err(SynthError::Infeasible(format!(
                "{g_hi} gold symptoms per disease but only {} symptoms",
                self.n_symptoms
            )));
        }
        if m_hi > self.n_symptoms {
            return Err(SynthError::Infeasible(format!(
                "{m_hi} mentions per note but only {} symptoms",
                self.n_symptoms
            )));
        }
        let ninc = self.incorrect_count(m_hi);
        if ninc > self.n_symptoms - g_hi {
            return Err(SynthError::Infeasible(format!(
                "{ninc} incorrect mentions needed but a disease may have only {} non-gold symptoms",
                self.n_symptoms - g_hi
            )));
        }
        Ok(())
    }

    fn incorrect_count(&self, mentions: usize) -> usize {
        (self.incorrect_fraction * mentions as f64).round() as usize
    }
}

/// One generated note, already split into sections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticNote {
    pub id: String,
    pub subjective: String,
    pub objective: String,
    pub assessment: String,
    pub plan: String,
}

impl SyntheticNote {
    pub fn to_soap(&self) -> Result<SoapNote, RejectReason> {
        SoapNote::from_sections(
            self.id.clone(),
            &self.subjective,
            &self.objective,
            &self.assessment,
            &self.plan,
        )
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub kb: KnowledgeBase,
    pub notes: Vec<SyntheticNote>,
    pub planted: PlantedKnowledge,
}

impl SyntheticCorpus {
    pub fn notes_jsonl(&self) -> String {
        self.notes
            .iter()
            .map(|n| serde_json::to_string(n).expect("note serializes") + "\n")
            .collect()
    }

    pub fn planted_json(&self) -> String {
        serde_json::to_string_pretty(&self.planted).expect("planted knowledge serializes") + "\n"
    }

    /// Writes `kb.json`, `notes.jsonl` and `planted.json` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(), SynthError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        for (name, body) in [
            ("kb.json", self.kb.to_json_string() + "\n"),
            ("notes.jsonl", self.notes_jsonl()),
            ("planted.json", self.planted_json()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        }
        Ok(())
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

const MENTION_TEMPLATES: &[&str] = &[
    "The patient reports {}.",
    "Complains of {} for several days.",
    "Also notes {} at night.",
    "A family member mentions {}.",
    "Describes intermittent {}.",
    "Reports {} after meals.",
];

const OPENERS: &[&str] = &[
    "Seen today for a routine visit.",
    "Presents for follow up.",
    "Here with a family member.",
];

fn words_of_templates() -> BTreeSet<String> {
    MENTION_TEMPLATES
        .iter()
        .chain(OPENERS)
        .chain(&["Vitals within normal limits.", "Follow up in two weeks.", "The patient has syndrome."])
        .flat_map(|t| oracle::words(t))
        .collect()
}

/// Pronounceable lowercase word that is not an English template word.
fn nonce_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    (0..syllables)
        .flat_map(|_| {
            [
                CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char,
                VOWELS[rng.random_range(0..VOWELS.len())] as char,
            ]
        })
        .collect()
}

fn unit(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn sample<T: Clone>(rng: &mut ChaCha8Rng, pool: &[T], k: usize) -> Vec<T> {
    let mut pool = pool.to_vec();
    pool.shuffle(rng);
    pool.truncate(k);
    pool
}

fn width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len().max(2)
}

/// Builds the KB, notes and planted knowledge for `spec`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticCorpus, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let reserved = words_of_templates();
    let mut used = BTreeSet::new();
    let mut fresh = |rng: &mut ChaCha8Rng| loop {
        let w = nonce_word(rng, 3);
        if !reserved.contains(&w) && used.insert(w.clone()) {
            return w;
        }
    };

    let dw = width(spec.n_diseases);
    let diseases: Vec<PlantedDisease> = (0..spec.n_diseases)
        .map(|i| {
            let word = fresh(&mut rng);
            PlantedDisease {
                id: EntityId::new(format!("D{i:0dw$}")),
                name: format!("{word} syndrome"),
                tokens: vec![word, "syndrome".into()],
            }
        })
        .collect();

    let sw = width(spec.n_symptoms);
    let symptoms: Vec<PlantedSymptom> = (0..spec.n_symptoms)
        .map(|i| {
            let two = rng.random::<f64>() < spec.multi_token_fraction;
            let tokens: Vec<String> = if two {
                vec![fresh(&mut rng), fresh(&mut rng)]
            } else {
                vec![fresh(&mut rng)]
            };
            let salience = if two {
                tokens.iter().map(|_| unit(&mut rng, [0.0, 0.5])).collect()
            } else {
                Vec::new()
            };
            PlantedSymptom {
                id: EntityId::new(format!("S{i:0sw$}")),
                name: tokens.join(" "),
                tokens,
                salience,
            }
        })
        .collect();

    let generics: Vec<GenericToken> = (0..spec.n_generics)
        .map(|_| GenericToken {
            token: fresh(&mut rng),
            prior: unit(&mut rng, spec.generic_prior),
        })
        .collect();

    let all_symptoms: Vec<usize> = (0..spec.n_symptoms).collect();
    let gold: Vec<Vec<usize>> = (0..spec.n_diseases)
        .map(|_| {
            let n = rng.random_range(spec.gold_per_disease[0]..=spec.gold_per_disease[1]);
            let mut g = sample(&mut rng, &all_symptoms, n);
            g.sort_unstable();
            g
        })
        .collect();

    let mut knowledge = BTreeMap::new();
    for (d, disease) in diseases.iter().enumerate() {
        let mut list = Vec::new();
        for s in 0..spec.n_symptoms {
            let is_gold = gold[d].binary_search(&s).is_ok();
            if !is_gold && !spec.negative_knowledge {
                continue;
            }
            if rng.random::<f64>() < spec.known_fraction {
                let magnitude = unit(&mut rng, spec.strength);
                list.push(Association {
                    symptom: symptoms[s].id.clone(),
                    strength: if is_gold { magnitude } else { -magnitude },
                });
            }
        }
        list.sort_by(|a, b| b.strength.total_cmp(&a.strength));
        if list.windows(2).any(|w| w[0].strength == w[1].strength) {
            return Err(SynthError::Infeasible("sampled strengths collide; try another seed".into()));
        }
        if !list.is_empty() {
            knowledge.insert(disease.id.clone(), list);
        }
    }

    let mut notes = Vec::with_capacity(spec.n_notes);
    let nw = width(spec.n_notes).max(4);
    for i in 0..spec.n_notes {
        let d = i % spec.n_diseases;
        let m = rng.random_range(spec.mentions_per_note[0]..=spec.mentions_per_note[1]);
        let ninc = spec.incorrect_count(m);
        let ncor = m.saturating_sub(ninc).min(gold[d].len()).max(1);
        let non_gold: Vec<usize> = all_symptoms
            .iter()
            .copied()
            .filter(|s| gold[d].binary_search(s).is_err())
            .collect();
        let mut mentioned = sample(&mut rng, &gold[d], ncor);
        mentioned.extend(sample(&mut rng, &non_gold, ninc));
        mentioned.shuffle(&mut rng);

        let mut sentences = vec![OPENERS[rng.random_range(0..OPENERS.len())].to_string()];
        for &s in &mentioned {
            let template = MENTION_TEMPLATES[rng.random_range(0..MENTION_TEMPLATES.len())];
            sentences.push(template.replace("{}", &symptoms[s].name));
        }
        notes.push(SyntheticNote {
            id: format!("note-{i:0nw$}"),
            subjective: sentences.join(" "),
            objective: "Vitals within normal limits.".into(),
            assessment: format!("The patient has {}.", diseases[d].name),
            plan: "Follow up in two weeks.".into(),
        });
    }

    let mut entities: Vec<Entity> = diseases
        .iter()
        .map(|d| Entity {
            id: d.id.clone(),
            kind: EntityKind::Disease,
            name: d.name.clone(),
            aliases: vec![],
        })
        .collect();
    entities.extend(symptoms.iter().map(|s| Entity {
        id: s.id.clone(),
        kind: EntityKind::Symptom,
        name: s.name.clone(),
        aliases: vec![],
    }));
    let triples = gold
        .iter()
        .enumerate()
        .flat_map(|(d, g)| g.iter().map(move |&s| (d, s)))
        .map(|(d, s)| Triple::new(diseases[d].id.clone(), symptoms[s].id.clone()))
        .collect();
    let kb = KnowledgeBase::new(entities, triples).map_err(|e| SynthError::Invalid(e.to_string()))?;

    let planted = PlantedKnowledge {
        seed: spec.seed,
        copy_bias: spec.copy_bias,
        agreement: spec.agreement,
        known_fraction: spec.known_fraction,
        max_input_length: spec.max_input_length,
        diseases,
        symptoms,
        generics,
        knowledge,
    };
    Ok(SyntheticCorpus { kb, notes, planted })
}
