//! Brute-force expected tables for an oracle-scored run.
//!
//! Everything here is recomputed from the planted knowledge: note selection
//! by word scan, the closed-form ranking of the whole vocabulary, rank and
//! accuracy bookkeeping, and exact means. Only the segment plan is shared
//! with the pipeline. Valid for single-token symptom vocabularies.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::Ratio;
use thiserror::Error;

use super::oracle::{jitter, sign, words, PlantedKnowledge, MASK_TOKEN};
use crate::kb::{EntityId, KnowledgeBase};
use crate::metrics::{
    Aggregates, Comparison, Condition, ConditionAccuracy, Exact, RankChangeTable, Split, TransitionStats,
};
use crate::prompt::{OBJECT_SLOT, SUBJECT_SLOT};
use crate::soap::Corpus;
use crate::windowing::{segment_subjective, WindowError};

const CAP: usize = 25;

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("symptom {0} has more than one token; the closed form covers single-token symptoms only")]
    MultiToken(EntityId),
    #[error("note {note}: {source}")]
    Window {
        note: String,
        #[source]
        source: WindowError,
    },
    #[error("no instance has an evaluable window")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceConfig {
    pub note_cap: usize,
    /// 0 means every segment.
    pub max_windows: usize,
    /// Longest mask run the pipeline would query; bounds the length check.
    pub max_masks: usize,
    pub pattern: String,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            note_cap: 3,
            max_windows: 0,
            max_masks: 5,
            pattern: crate::prompt::DEFAULT_PATTERN.to_string(),
        }
    }
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Token count under the oracle tokenizer.
fn token_count(text: &str) -> usize {
    let mut n = 0;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if let Some(after) = rest.strip_prefix(MASK_TOKEN) {
            n += 1;
            rest = after;
        } else if c.is_alphanumeric() {
            n += 1;
            rest = rest.trim_start_matches(char::is_alphanumeric);
        } else {
            n += usize::from(!c.is_whitespace());
            rest = &rest[c.len_utf8()..];
        }
    }
    n
}

struct Closed<'a> {
    planted: &'a PlantedKnowledge,
    token_id: HashMap<&'a str, u32>,
    strengths: BTreeMap<(&'a EntityId, &'a EntityId), f64>,
}

impl<'a> Closed<'a> {
    fn new(planted: &'a PlantedKnowledge) -> Result<Self, ReferenceError> {
        if let Some(s) = planted.symptoms.iter().find(|s| s.tokens.len() != 1) {
            return Err(ReferenceError::MultiToken(s.id.clone()));
        }
        let mut token_id = HashMap::new();
        let mut next = 2u32;
        let tokens = planted
            .diseases
            .iter()
            .flat_map(|d| d.tokens.iter())
            .chain(planted.symptoms.iter().flat_map(|s| s.tokens.iter()))
            .chain(planted.generics.iter().map(|g| &g.token));
        for t in tokens {
            token_id.entry(t.as_str()).or_insert_with(|| {
                next += 1;
                next - 1
            });
        }
        let strengths = planted
            .knowledge
            .iter()
            .flat_map(|(d, list)| list.iter().map(move |a| ((d, &a.symptom), a.strength)))
            .collect();
        Ok(Closed {
            planted,
            token_id,
            strengths,
        })
    }

    fn strength(&self, d: &EntityId, s: &EntityId) -> f64 {
        self.strengths.get(&(d, s)).copied().unwrap_or(0.0)
    }

    /// The 25 best `(surface, symptom)` entries; generics carry no symptom.
    fn ranking(&self, d: &EntityId, context: &BTreeSet<&EntityId>) -> Vec<(String, Option<EntityId>)> {
        let p = self.planted;
        let mut all: Vec<(f64, &str, Option<&EntityId>)> = Vec::new();
        for s in &p.symptoms {
            let strength = self.strength(d, &s.id);
            let base = if context.contains(&s.id) {
                let others: i64 = context
                    .iter()
                    .filter(|u| ***u != s.id)
                    .map(|u| sign(self.strength(d, u)))
                    .sum();
                strength + p.copy_bias * (1.0 + p.agreement * (sign(strength) * others) as f64)
            } else {
                strength
            };
            let token = s.tokens[0].as_str();
            let salience = s.salience.first().copied().unwrap_or(0.0);
            all.push((base + salience + jitter(p.seed, self.token_id[token]), token, Some(&s.id)));
        }
        for g in &p.generics {
            let token = g.token.as_str();
            all.push((g.prior + jitter(p.seed, self.token_id[token]), token, None));
        }
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        all.into_iter()
            .take(CAP)
            .map(|(_, t, s)| (t.to_string(), s.cloned()))
            .collect()
    }
}

fn rank(list: &[(String, Option<EntityId>)], s: &EntityId) -> i64 {
    list.iter().position(|(_, e)| e.as_ref() == Some(s)).unwrap_or(CAP) as i64
}

/// Top-25 surfaces for `disease` with `context` symptoms present, best first.
pub fn reference_ranking(
    planted: &PlantedKnowledge,
    disease: &EntityId,
    context: &BTreeSet<EntityId>,
) -> Result<Vec<String>, ReferenceError> {
    let closed = Closed::new(planted)?;
    let context = context.iter().collect();
    Ok(closed.ranking(disease, &context).into_iter().map(|(t, _)| t).collect())
}

#[derive(Default, Clone, Copy)]
struct Mean {
    sum: Ratio<i128>,
    n: i128,
}

impl Mean {
    fn add(&mut self, x: Ratio<i128>) {
        self.sum += x;
        self.n += 1;
    }

    fn get(&self) -> Option<Exact> {
        (self.n > 0).then(|| Exact(self.sum / self.n))
    }
}

#[derive(Default, Clone, Copy)]
struct Sides {
    cor: Mean,
    inc: Mean,
}

impl Sides {
    fn side(&mut self, correct: bool) -> &mut Mean {
        if correct {
            &mut self.cor
        } else {
            &mut self.inc
        }
    }

    fn split(&self) -> Split {
        Split {
            correct: self.cor.get(),
            incorrect: self.inc.get(),
            n_correct: self.cor.n as u64,
            n_incorrect: self.inc.n as u64,
        }
    }
}

fn int(x: i64) -> Ratio<i128> {
    Ratio::from_integer(x as i128)
}

/// Expected aggregates for running the pipeline on `corpus` with an oracle
/// scorer built from `planted`.
pub fn reference_metrics(
    planted: &PlantedKnowledge,
    corpus: &Corpus,
    kb: &KnowledgeBase,
    config: &ReferenceConfig,
) -> Result<Aggregates, ReferenceError> {
    let closed = Closed::new(planted)?;
    let disease_words: Vec<(&EntityId, Vec<String>, &str)> = planted
        .diseases
        .iter()
        .map(|d| (&d.id, words(&d.name), d.name.as_str()))
        .collect();
    let symptom_words: Vec<(&EntityId, Vec<String>)> = planted.symptoms.iter().map(|s| (&s.id, words(&s.name))).collect();
    let masks = vec![MASK_TOKEN; config.max_masks.max(1)].join(" ");

    // flags are (acc1, acc5); transition counters are [n, g1, l1, g5, l5]
    let mut cond: BTreeMap<Condition, (Mean, Mean)> = BTreeMap::new();
    let mut trans: BTreeMap<Comparison, [i128; 5]> = BTreeMap::new();
    let (mut target, mut added, mut cor_ex, mut inc_ex, mut rank_added, mut rank_ex) =
        (Sides::default(), Sides::default(), Sides::default(), Sides::default(), Sides::default(), Sides::default());
    let (mut n_instances, mut n_windows) = (0u64, 0u64);

    for (d, _, d_name) in &disease_words {
        let d1: Vec<&String> = corpus
            .iter()
            .filter(|(_, n)| {
                let a = words(&n.note.assessment);
                let present: Vec<_> = disease_words.iter().filter(|(_, w, _)| contains_run(&a, w)).collect();
                present.len() == 1 && present[0].0 == *d
            })
            .map(|(id, _)| id)
            .collect();
        let gold = kb.gold(d);
        let prompt = config.pattern.replace(SUBJECT_SLOT, d_name).replace(OBJECT_SLOT, &masks);
        let no_ctx_list = closed.ranking(d, &BTreeSet::new());
        let flags = |list: &[(String, Option<EntityId>)]| {
            let hit = |k: usize| list.iter().take(k).any(|(_, e)| e.as_ref().is_some_and(|e| gold.contains(e)));
            (hit(1), hit(5))
        };
        for s in gold {
            let s_words = &symptom_words.iter().find(|(id, _)| *id == s).expect("gold symptom is planted").1;
            let mut d2: Vec<&String> = d1
                .iter()
                .copied()
                .filter(|id| contains_run(&words(&corpus[*id].note.subjective), s_words))
                .collect();
            d2.sort();
            if config.note_cap > 0 {
                d2.truncate(config.note_cap);
            }
            for id in d2 {
                let note = &corpus[id];
                let subjective = &note.note.subjective;
                let mention = note.symptoms.iter().find(|m| &m.entity == s).expect("mention found");
                let plan = segment_subjective(subjective, &note.symptoms, mention).map_err(|source| {
                    ReferenceError::Window {
                        note: id.clone(),
                        source,
                    }
                })?;
                if token_count(&prompt) > planted.max_input_length {
                    continue;
                }
                let n_seg = plan.segments.len();
                let k_max = if config.max_windows == 0 { n_seg } else { config.max_windows.min(n_seg) };

                let mut prev = no_ctx_list.clone();
                let nc = flags(&no_ctx_list);
                let mut window_flags = Vec::new();
                let mut added_order: Vec<&EntityId> = Vec::new();
                for k in 1..=k_max {
                    let mut picked: Vec<usize> = plan.order[..k].to_vec();
                    picked.sort_unstable();
                    let lo = plan.segments[picked[0]].start;
                    let hi = plan.segments[picked[k - 1]].end;
                    let text = subjective[lo..hi].trim();
                    if token_count(&format!("{text} {prompt}")) > planted.max_input_length {
                        break;
                    }
                    added_order.push(&plan.segments[plan.order[k - 1]].symptom);
                    let ctx_words = words(text);
                    let context: BTreeSet<&EntityId> = symptom_words
                        .iter()
                        .filter(|(_, w)| contains_run(&ctx_words, w))
                        .map(|(id, _)| *id)
                        .collect();
                    let list = closed.ranking(d, &context);
                    window_flags.push(flags(&list));

                    let add = added_order[k - 1];
                    let correct = gold.contains(add);
                    let delta = |e: &EntityId| rank(&list, e) - rank(&prev, e);
                    target.side(correct).add(int(delta(s)));
                    rank_added.side(correct).add(int(rank(&list, add)));
                    if k > 1 {
                        added.side(correct).add(int(delta(add)));
                        let existing = &added_order[1..k - 1];
                        let (mut c, mut i) = (Mean::default(), Mean::default());
                        for e in existing {
                            if gold.contains(*e) {
                                c.add(int(delta(e)));
                                rank_ex.cor.add(int(rank(&list, e)));
                            } else {
                                i.add(int(delta(e)));
                                rank_ex.inc.add(int(rank(&list, e)));
                            }
                        }
                        if let Some(m) = c.get() {
                            cor_ex.side(correct).add(m.0);
                        }
                        if let Some(m) = i.get() {
                            inc_ex.side(correct).add(m.0);
                        }
                    }
                    prev = list;
                }
                if window_flags.is_empty() {
                    continue;
                }
                n_instances += 1;
                n_windows += window_flags.len() as u64;
                let mut push = |c: Condition, f: (bool, bool)| {
                    let e = cond.entry(c).or_default();
                    e.0.add(int(f.0 as i64));
                    e.1.add(int(f.1 as i64));
                };
                push(Condition::NoContext, nc);
                push(Condition::Segment1, window_flags[0]);
                for &f in &window_flags {
                    push(Condition::AvgAllSegments, f);
                }
                let mut count = |c: Comparison, a: (bool, bool), b: (bool, bool)| {
                    let t = trans.entry(c).or_default();
                    t[0] += 1;
                    t[1] += (!a.0 && b.0) as i128;
                    t[2] += (a.0 && !b.0) as i128;
                    t[3] += (!a.1 && b.1) as i128;
                    t[4] += (a.1 && !b.1) as i128;
                };
                count(Comparison::NoContextToSegment1, nc, window_flags[0]);
                for &f in &window_flags {
                    count(Comparison::NoContextToAvg, nc, f);
                }
                for &f in &window_flags[1..] {
                    count(Comparison::Segment1ToAvg, window_flags[0], f);
                }
            }
        }
    }
    if n_instances == 0 {
        return Err(ReferenceError::Empty);
    }
    let zero = Exact(Ratio::from_integer(0));
    let conditions = Condition::ALL
        .iter()
        .map(|&c| {
            let (a1, a5) = cond.get(&c).copied().unwrap_or_default();
            ConditionAccuracy {
                condition: c,
                acc1: a1.get().unwrap_or(zero),
                acc5: a5.get().unwrap_or(zero),
                n: a1.n as u64,
            }
        })
        .collect();
    let transitions = Comparison::ALL
        .iter()
        .map(|&c| {
            let t = trans.get(&c).copied().unwrap_or_default();
            let r = |x: i128| if t[0] == 0 { zero } else { Exact(Ratio::new(x, t[0])) };
            TransitionStats {
                comparison: c,
                gained_acc1: r(t[1]),
                lost_acc1: r(t[2]),
                gained_acc5: r(t[3]),
                lost_acc5: r(t[4]),
                n: t[0] as u64,
            }
        })
        .collect();
    Ok(Aggregates {
        instances: n_instances,
        windows: n_windows,
        conditions,
        transitions,
        rank_change: RankChangeTable {
            target: target.split(),
            added: added.split(),
            correct_existing: cor_ex.split(),
            incorrect_existing: inc_ex.split(),
            rank_added: rank_added.split(),
            rank_existing: rank_ex.split(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{Entity, EntityKind, Triple};
    use crate::soap::corpus::ingest_sectioned;
    use crate::soap::{HeaderConfig, SoapNote};
    use crate::synth::oracle::{Association, PlantedDisease, PlantedSymptom};

    fn planted(copy_bias: f64, knowledge: &[(&str, f64)]) -> PlantedKnowledge {
        let symptom = |id: &str, name: &str| PlantedSymptom {
            id: id.into(),
            name: name.into(),
            tokens: vec![name.into()],
            salience: vec![],
        };
        PlantedKnowledge {
            seed: 1,
            copy_bias,
            agreement: 0.0,
            known_fraction: 1.0,
            max_input_length: 64,
            diseases: vec![PlantedDisease {
                id: "D1".into(),
                name: "flu".into(),
                tokens: vec!["flu".into()],
            }],
            symptoms: vec![symptom("S1", "fever"), symptom("S2", "cough"), symptom("S3", "rash")],
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

    fn world(subjective: &str) -> (KnowledgeBase, Corpus) {
        let e = |id: &str, kind, name: &str| Entity {
            id: id.into(),
            kind,
            name: name.into(),
            aliases: vec![],
        };
        let kb = KnowledgeBase::new(
            vec![
                e("D1", EntityKind::Disease, "flu"),
                e("S1", EntityKind::Symptom, "fever"),
                e("S2", EntityKind::Symptom, "cough"),
                e("S3", EntityKind::Symptom, "rash"),
            ],
            vec![Triple::new("D1", "S1"), Triple::new("D1", "S2")],
        )
        .unwrap();
        let note = SoapNote::from_sections("n1", subjective, "", "flu", "");
        let corpus = ingest_sectioned([("n1".to_string(), note)], &kb, &HeaderConfig::default())
            .unwrap()
            .corpus;
        (kb, corpus)
    }

    #[test]
    fn hand_checked_single_window() {
        // fever 2.0 > cough 1.0 > rash 0 with no context; "rash" in context
        // gains λ = 3 and jumps to the top.
        let p = planted(3.0, &[("S1", 2.0), ("S2", 1.0)]);
        let (kb, corpus) = world("cough");
        assert_eq!(
            reference_ranking(&p, &"D1".into(), &BTreeSet::new()).unwrap(),
            ["fever", "cough", "rash"]
        );
        let agg = reference_metrics(&p, &corpus, &kb, &ReferenceConfig::default()).unwrap();
        // one instance (D1, S2), one window; cough 1+3 = 4 overtakes fever
        assert_eq!((agg.instances, agg.windows), (1, 1));
        let nc = agg.condition(Condition::NoContext);
        assert_eq!((nc.acc1, nc.acc5), (Exact::from(1), Exact::from(1)));
        let t = &agg.rank_change.target;
        assert_eq!((t.correct, t.n_correct, t.n_incorrect), (Some(Exact::from(-1)), 1, 0));
        assert_eq!(agg.rank_change.rank_added.correct, Some(Exact::from(0)));
        assert_eq!(agg.rank_change.added.n_correct, 0);
    }

    #[test]
    fn no_copy_bias_means_context_changes_nothing() {
        let p = planted(0.0, &[("S1", 2.0), ("S2", 1.0), ("S3", 0.5)]);
        let (kb, corpus) = world("rash, then fever. cough at night");
        let agg = reference_metrics(&p, &corpus, &kb, &ReferenceConfig::default()).unwrap();
        for split in [&agg.rank_change.target, &agg.rank_change.added] {
            for side in [split.correct, split.incorrect].into_iter().flatten() {
                assert_eq!(side, Exact::zero());
            }
        }
        for c in Comparison::ALL {
            let t = agg.transition(c);
            assert_eq!((t.gained_acc1, t.lost_acc1), (Exact::zero(), Exact::zero()));
        }
    }

    #[test]
    fn large_copy_bias_without_knowledge_copies_context() {
        let p = planted(100.0, &[]);
        let closed = Closed::new(&p).unwrap();
        let (s1, s3) = (EntityId::from("S1"), EntityId::from("S3"));
        let ctx = BTreeSet::from([&s1, &s3]);
        let list = closed.ranking(&"D1".into(), &ctx);
        let head: BTreeSet<&str> = list[..2].iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(head, BTreeSet::from(["fever", "rash"]));
        let j = |t: &str| jitter(1, closed.token_id[t]);
        assert!(j(&list[0].0) > j(&list[1].0));
    }

    #[test]
    fn multi_token_vocabulary_rejected() {
        let mut p = planted(1.0, &[]);
        p.symptoms[0].name = "high fever".into();
        p.symptoms[0].tokens = vec!["high".into(), "fever".into()];
        assert!(matches!(
            reference_ranking(&p, &"D1".into(), &BTreeSet::new()),
            Err(ReferenceError::MultiToken(_))
        ));
    }

    #[test]
    fn counts_tokens_like_the_oracle() {
        assert_eq!(token_count("Flu has symptoms such as [MASK] [MASK]."), 8);
        assert_eq!(token_count("  a,b  "), 3);
        assert_eq!(token_count(""), 0);
    }
}
