//! Accuracy, transition and rank-change statistics.
//!
//! All means are exact rationals, so aggregation does not depend on record
//! order and two independent implementations can be compared with `==`.

pub mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::decode::{RankedList, RANK_CAP};
use crate::kb::{Entity, EntityId};
use crate::windowing::Window;

pub use report::{render_report, ReportFormat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no records to aggregate")]
    Empty,
    #[error("window {k} does not add exactly one new symptom")]
    NotOneNewSymptom { k: usize },
    #[error("no rank recorded for {entity} at window {k}")]
    MissingRank { entity: EntityId, k: usize },
}

/// Exact rational value, serialized as `"p/q"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub Ratio<i128>);

impl Exact {
    pub fn new(numer: i128, denom: i128) -> Self {
        Exact(Ratio::new(numer, denom))
    }

    pub fn zero() -> Self {
        Exact(Ratio::from_integer(0))
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl From<i64> for Exact {
    fn from(v: i64) -> Self {
        Exact(Ratio::from_integer(v as i128))
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Exact {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("not a rational: {s:?}");
        match s.split_once('/') {
            Some((n, d)) => {
                let n: i128 = n.trim().parse().map_err(|_| bad())?;
                let d: i128 = d.trim().parse().map_err(|_| bad())?;
                if d == 0 {
                    return Err(bad());
                }
                Ok(Exact::new(n, d))
            }
            None => Ok(Exact::new(s.trim().parse().map_err(|_| bad())?, 1)),
        }
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Running exact mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeanAcc {
    sum: Ratio<i128>,
    n: u64,
}

impl Default for MeanAcc {
    fn default() -> Self {
        MeanAcc {
            sum: Ratio::from_integer(0),
            n: 0,
        }
    }
}

impl MeanAcc {
    pub fn push(&mut self, value: Exact) {
        self.sum += value.0;
        self.n += 1;
    }

    pub fn push_int(&mut self, value: i64) {
        self.push(Exact::from(value));
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> Option<Exact> {
        (self.n > 0).then(|| Exact(self.sum / Ratio::from_integer(self.n as i128)))
    }

    /// Mean, or 0 when nothing was pushed.
    pub fn mean_or_zero(&self) -> Exact {
        self.mean().unwrap_or_else(Exact::zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AccFlags {
    pub acc1: bool,
    pub acc5: bool,
}

/// True iff one of the first `k` candidates names a gold entity.
pub fn acc_at_k<'a>(ranked: &RankedList, gold: impl IntoIterator<Item = &'a Entity> + Clone, k: usize) -> bool {
    ranked
        .candidates
        .iter()
        .take(k)
        .any(|c| gold.clone().into_iter().any(|e| e.matches_surface(&c.text)))
}

pub fn acc_flags<'a>(ranked: &RankedList, gold: impl IntoIterator<Item = &'a Entity> + Clone) -> AccFlags {
    AccFlags {
        acc1: acc_at_k(ranked, gold.clone(), 1),
        acc5: acc_at_k(ranked, gold, 5),
    }
}

/// What one added window did to the ranks of the window's symptoms.
/// Deltas are `current - previous`; negative means the rank improved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankChangeEvent {
    pub k: usize,
    pub added: EntityId,
    pub added_is_correct: bool,
    pub delta_target: i64,
    /// Absent at k = 1, where the added symptom is the target itself.
    pub delta_added: Option<i64>,
    pub rank_added: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta_correct_avg: Option<Exact>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta_incorrect_avg: Option<Exact>,
    /// Current ranks of earlier-added gold symptoms other than the target.
    pub existing_correct_ranks: Vec<usize>,
    /// Current ranks of earlier-added non-gold symptoms.
    pub existing_incorrect_ranks: Vec<usize>,
}

fn rank_in(ranks: &BTreeMap<EntityId, usize>, entity: &EntityId, k: usize) -> Result<i64, MetricsError> {
    ranks
        .get(entity)
        .map(|&r| r as i64)
        .ok_or_else(|| MetricsError::MissingRank {
            entity: entity.clone(),
            k,
        })
}

/// `prev` holds the ranks before the window was added (the no-context ranks
/// for k = 1). The window's first symptom is the target and its last the
/// newly added one.
pub fn record_rank_change(
    prev: &BTreeMap<EntityId, usize>,
    curr: &BTreeMap<EntityId, usize>,
    window: &Window,
    gold: &BTreeSet<EntityId>,
) -> Result<RankChangeEvent, MetricsError> {
    let k = window.k;
    let distinct: BTreeSet<&EntityId> = window.symptoms.iter().collect();
    if window.symptoms.len() != k || distinct.len() != k || window.symptoms.last() != Some(&window.added_symptom) {
        return Err(MetricsError::NotOneNewSymptom { k });
    }
    let target = &window.symptoms[0];
    let added = &window.added_symptom;
    let delta = |e: &EntityId| -> Result<i64, MetricsError> { Ok(rank_in(curr, e, k)? - rank_in(prev, e, k - 1)?) };

    let mut cor = MeanAcc::default();
    let mut inc = MeanAcc::default();
    let mut existing_correct_ranks = Vec::new();
    let mut existing_incorrect_ranks = Vec::new();
    let existing = window.symptoms.get(1..k.saturating_sub(1)).unwrap_or(&[]);
    for s in existing {
        let d = delta(s)?;
        let r = rank_in(curr, s, k)? as usize;
        if gold.contains(s) {
            cor.push_int(d);
            existing_correct_ranks.push(r);
        } else {
            inc.push_int(d);
            existing_incorrect_ranks.push(r);
        }
    }
    Ok(RankChangeEvent {
        k,
        added: added.clone(),
        added_is_correct: gold.contains(added),
        delta_target: delta(target)?,
        delta_added: if k == 1 { None } else { Some(delta(added)?) },
        rank_added: rank_in(curr, added, k)? as usize,
        delta_correct_avg: cor.mean(),
        delta_incorrect_avg: inc.mean(),
        existing_correct_ranks,
        existing_incorrect_ranks,
    })
}

/// The metric-relevant part of one probed instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceOutcome {
    pub no_context: AccFlags,
    /// Evaluated windows, k = 1, 2, ...
    pub windows: Vec<AccFlags>,
    pub events: Vec<RankChangeEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    NoContext,
    Segment1,
    AvgAllSegments,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::NoContext, Condition::Segment1, Condition::AvgAllSegments];

    pub fn label(self) -> &'static str {
        match self {
            Condition::NoContext => "no context",
            Condition::Segment1 => "segment1",
            Condition::AvgAllSegments => "avg all segments",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    NoContextToSegment1,
    NoContextToAvg,
    Segment1ToAvg,
}

impl Comparison {
    pub const ALL: [Comparison; 3] = [
        Comparison::NoContextToSegment1,
        Comparison::NoContextToAvg,
        Comparison::Segment1ToAvg,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Comparison::NoContextToSegment1 => "no context → segment 1",
            Comparison::NoContextToAvg => "no context → avg all segments",
            Comparison::Segment1ToAvg => "segment 1 → avg all segments",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionAccuracy {
    pub condition: Condition,
    pub acc1: Exact,
    pub acc5: Exact,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionStats {
    pub comparison: Comparison,
    pub gained_acc1: Exact,
    pub lost_acc1: Exact,
    pub gained_acc5: Exact,
    pub lost_acc5: Exact,
    pub n: u64,
}

/// A statistic split by the correctness of the added (or, for existing
/// ranks, the existing) symptom. `None` when the split is empty.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Split {
    pub correct: Option<Exact>,
    pub incorrect: Option<Exact>,
    pub n_correct: u64,
    pub n_incorrect: u64,
}

impl Split {
    fn from_accs(correct: &MeanAcc, incorrect: &MeanAcc) -> Self {
        Split {
            correct: correct.mean(),
            incorrect: incorrect.mean(),
            n_correct: correct.n(),
            n_incorrect: incorrect.n(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RankChangeTable {
    pub target: Split,
    pub added: Split,
    pub correct_existing: Split,
    pub incorrect_existing: Split,
    pub rank_added: Split,
    pub rank_existing: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregates {
    pub instances: u64,
    pub windows: u64,
    pub conditions: Vec<ConditionAccuracy>,
    pub transitions: Vec<TransitionStats>,
    pub rank_change: RankChangeTable,
}

impl Aggregates {
    pub fn condition(&self, c: Condition) -> &ConditionAccuracy {
        self.conditions.iter().find(|r| r.condition == c).expect("all conditions present")
    }

    pub fn transition(&self, c: Comparison) -> &TransitionStats {
        self.transitions.iter().find(|r| r.comparison == c).expect("all comparisons present")
    }
}

/// Per-event `(before, after)` flag pairs for a comparison.
fn transition_events(o: &InstanceOutcome, comparison: Comparison) -> Vec<(AccFlags, AccFlags)> {
    match comparison {
        Comparison::NoContextToSegment1 => o.windows.first().map(|w| (o.no_context, *w)).into_iter().collect(),
        Comparison::NoContextToAvg => o.windows.iter().map(|w| (o.no_context, *w)).collect(),
        Comparison::Segment1ToAvg => match o.windows.first() {
            Some(s1) => o.windows[1..].iter().map(|w| (*s1, *w)).collect(),
            None => Vec::new(),
        },
    }
}

pub fn transition_ratios(outcomes: &[InstanceOutcome], comparison: Comparison) -> Result<TransitionStats, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (mut g1, mut l1, mut g5, mut l5, mut n) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for o in outcomes {
        for (a, b) in transition_events(o, comparison) {
            n += 1;
            g1 += (!a.acc1 && b.acc1) as i128;
            l1 += (a.acc1 && !b.acc1) as i128;
            g5 += (!a.acc5 && b.acc5) as i128;
            l5 += (a.acc5 && !b.acc5) as i128;
        }
    }
    let ratio = |c: i128| if n == 0 { Exact::zero() } else { Exact::new(c, n) };
    Ok(TransitionStats {
        comparison,
        gained_acc1: ratio(g1),
        lost_acc1: ratio(l1),
        gained_acc5: ratio(g5),
        lost_acc5: ratio(l5),
        n: n as u64,
    })
}

fn condition_accuracy(outcomes: &[InstanceOutcome], condition: Condition) -> ConditionAccuracy {
    let (mut a1, mut a5) = (MeanAcc::default(), MeanAcc::default());
    let mut push = |f: &AccFlags| {
        a1.push_int(f.acc1 as i64);
        a5.push_int(f.acc5 as i64);
    };
    for o in outcomes {
        match condition {
            Condition::NoContext => push(&o.no_context),
            Condition::Segment1 => o.windows.first().into_iter().for_each(&mut push),
            Condition::AvgAllSegments => o.windows.iter().for_each(&mut push),
        }
    }
    ConditionAccuracy {
        condition,
        acc1: a1.mean_or_zero(),
        acc5: a5.mean_or_zero(),
        n: a1.n(),
    }
}

pub fn rank_change_table<'a>(events: impl IntoIterator<Item = &'a RankChangeEvent>) -> RankChangeTable {
    #[derive(Default)]
    struct Pair {
        c: MeanAcc,
        i: MeanAcc,
    }
    impl Pair {
        fn side(&mut self, correct: bool) -> &mut MeanAcc {
            if correct {
                &mut self.c
            } else {
                &mut self.i
            }
        }
        fn split(&self) -> Split {
            Split::from_accs(&self.c, &self.i)
        }
    }
    let (mut target, mut added, mut cor, mut inc, mut rank_added, mut rank_existing) =
        (Pair::default(), Pair::default(), Pair::default(), Pair::default(), Pair::default(), Pair::default());
    for e in events {
        let side = e.added_is_correct;
        target.side(side).push_int(e.delta_target);
        if let Some(d) = e.delta_added {
            added.side(side).push_int(d);
        }
        if let Some(d) = e.delta_correct_avg {
            cor.side(side).push(d);
        }
        if let Some(d) = e.delta_incorrect_avg {
            inc.side(side).push(d);
        }
        rank_added.side(side).push_int(e.rank_added as i64);
        for &r in &e.existing_correct_ranks {
            rank_existing.c.push_int(r as i64);
        }
        for &r in &e.existing_incorrect_ranks {
            rank_existing.i.push_int(r as i64);
        }
    }
    RankChangeTable {
        target: target.split(),
        added: added.split(),
        correct_existing: cor.split(),
        incorrect_existing: inc.split(),
        rank_added: rank_added.split(),
        rank_existing: rank_existing.split(),
    }
}

/// Tables 1-3 over every instance with at least one evaluated window.
pub fn aggregate(outcomes: &[InstanceOutcome]) -> Result<Aggregates, MetricsError> {
    let used: Vec<InstanceOutcome> = outcomes.iter().filter(|o| !o.windows.is_empty()).cloned().collect();
    if used.is_empty() {
        return Err(MetricsError::Empty);
    }
    let transitions = Comparison::ALL
        .iter()
        .map(|&c| transition_ratios(&used, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Aggregates {
        instances: used.len() as u64,
        windows: used.iter().map(|o| o.windows.len() as u64).sum(),
        conditions: Condition::ALL.iter().map(|&c| condition_accuracy(&used, c)).collect(),
        transitions,
        rank_change: rank_change_table(used.iter().flat_map(|o| o.events.iter())),
    })
}

/// Sanity bound on stored ranks.
pub fn rank_in_range(rank: usize) -> bool {
    rank <= RANK_CAP
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::RankedList;
    use crate::kb::EntityKind;
    use proptest::prelude::*;

    fn ent(name: &str) -> Entity {
        Entity {
            id: name.into(),
            kind: EntityKind::Symptom,
            name: name.into(),
            aliases: vec![],
        }
    }

    fn flags(acc1: bool, acc5: bool) -> AccFlags {
        AccFlags { acc1, acc5 }
    }

    fn outcome(nc: bool, windows: &[bool]) -> InstanceOutcome {
        InstanceOutcome {
            no_context: flags(nc, nc),
            windows: windows.iter().map(|&w| flags(w, w)).collect(),
            events: vec![],
        }
    }

    #[test]
    fn acc_at_k_definition() {
        let ranked = RankedList::from_scored([("a", 3.0), ("b", 2.0), ("c", 1.0)]);
        let gold = [ent("b")];
        assert!(!acc_at_k(&ranked, &gold, 1));
        assert!(acc_at_k(&ranked, &gold, 5));
        assert!(!acc_at_k(&RankedList::default(), &gold, 5));
        // any gold symptom counts, not only the probed one
        let gold = [ent("z"), ent("a")];
        assert_eq!(acc_flags(&ranked, &gold), flags(true, true));
    }

    #[test]
    fn transition_counting() {
        let t = transition_ratios(&[outcome(false, &[true, true, false])], Comparison::NoContextToAvg).unwrap();
        assert_eq!((t.gained_acc1, t.lost_acc1, t.n), (Exact::new(2, 3), Exact::zero(), 3));
        let t = transition_ratios(&[outcome(true, &[false, false])], Comparison::NoContextToAvg).unwrap();
        assert_eq!((t.gained_acc1, t.lost_acc1), (Exact::zero(), Exact::from(1)));
        let t = transition_ratios(&[outcome(false, &[true, false, true])], Comparison::Segment1ToAvg).unwrap();
        assert_eq!((t.gained_acc1, t.lost_acc1, t.n), (Exact::zero(), Exact::new(1, 2), 2));
        let t = transition_ratios(&[outcome(false, &[true]), outcome(true, &[true])], Comparison::NoContextToSegment1)
            .unwrap();
        assert_eq!((t.gained_acc1, t.n), (Exact::new(1, 2), 2));
        let t = transition_ratios(&[outcome(false, &[true])], Comparison::Segment1ToAvg).unwrap();
        assert_eq!((t.n, t.gained_acc1), (0, Exact::zero()));
        assert_eq!(transition_ratios(&[], Comparison::Segment1ToAvg), Err(MetricsError::Empty));
    }

    #[test]
    fn condition_means() {
        let agg = aggregate(&[outcome(false, &[true, false])]).unwrap();
        assert_eq!(agg.condition(Condition::NoContext).acc1, Exact::zero());
        assert_eq!(agg.condition(Condition::Segment1).acc1, Exact::from(1));
        assert_eq!(agg.condition(Condition::AvgAllSegments).acc1, Exact::new(1, 2));
        assert_eq!(agg.condition(Condition::AvgAllSegments).n, 2);
        assert_eq!(aggregate(&[outcome(true, &[])]), Err(MetricsError::Empty));
    }

    fn window(symptoms: &[&str]) -> Window {
        Window {
            k: symptoms.len(),
            segments: (0..symptoms.len()).collect(),
            text: String::new(),
            symptoms: symptoms.iter().map(|s| EntityId::from(*s)).collect(),
            added_symptom: EntityId::from(*symptoms.last().unwrap()),
        }
    }

    fn ranks(pairs: &[(&str, usize)]) -> BTreeMap<EntityId, usize> {
        pairs.iter().map(|(e, r)| (EntityId::from(*e), *r)).collect()
    }

    #[test]
    fn rank_change_event() {
        let gold: BTreeSet<EntityId> = ["t", "c"].into_iter().map(EntityId::from).collect();
        // k = 1: target 5 -> 3
        let e = record_rank_change(&ranks(&[("t", 5)]), &ranks(&[("t", 3)]), &window(&["t"]), &gold).unwrap();
        assert_eq!(e.delta_target, -2);
        assert_eq!(e.delta_added, None);
        assert_eq!(e.rank_added, 3);
        assert!(e.added_is_correct);
        assert_eq!((e.delta_correct_avg, e.delta_incorrect_avg), (None, None));

        // k = 3: existing c (correct) and x (incorrect) then add y (incorrect)
        let prev = ranks(&[("t", 1), ("c", 2), ("x", 25), ("y", 25)]);
        let curr = ranks(&[("t", 2), ("c", 4), ("x", 0), ("y", 1)]);
        let e = record_rank_change(&prev, &curr, &window(&["t", "c", "x", "y"]), &gold).unwrap();
        assert!(!e.added_is_correct);
        assert_eq!(e.delta_target, 1);
        assert_eq!(e.delta_added, Some(-24));
        assert_eq!(e.rank_added, 1);
        assert_eq!(e.delta_correct_avg, Some(Exact::from(2)));
        assert_eq!(e.delta_incorrect_avg, Some(Exact::from(-25)));
        assert_eq!(e.existing_correct_ranks, vec![4]);
        assert_eq!(e.existing_incorrect_ranks, vec![0]);

        // added enters at rank 0
        let e = record_rank_change(
            &ranks(&[("t", 3), ("c", 25)]),
            &ranks(&[("t", 3), ("c", 0)]),
            &window(&["t", "c"]),
            &gold,
        )
        .unwrap();
        assert_eq!(e.rank_added, 0);
        assert_eq!(e.delta_incorrect_avg, None);
        assert_eq!(e.delta_correct_avg, None);
    }

    #[test]
    fn rank_change_errors() {
        let gold = BTreeSet::new();
        let mut w = window(&["t", "a"]);
        w.symptoms.push(EntityId::from("a"));
        w.k = 3;
        assert_eq!(
            record_rank_change(&ranks(&[]), &ranks(&[]), &w, &gold),
            Err(MetricsError::NotOneNewSymptom { k: 3 })
        );
        assert!(matches!(
            record_rank_change(&ranks(&[]), &ranks(&[("t", 1)]), &window(&["t"]), &gold),
            Err(MetricsError::MissingRank { .. })
        ));
    }

    #[test]
    fn table_splits_and_omits_empty_categories() {
        let gold: BTreeSet<EntityId> = ["t", "c"].into_iter().map(EntityId::from).collect();
        let e1 = record_rank_change(&ranks(&[("t", 5)]), &ranks(&[("t", 3)]), &window(&["t"]), &gold).unwrap();
        let e2 = record_rank_change(
            &ranks(&[("t", 3), ("x", 25)]),
            &ranks(&[("t", 4), ("x", 10)]),
            &window(&["t", "x"]),
            &gold,
        )
        .unwrap();
        let table = rank_change_table([&e1, &e2]);
        assert_eq!(table.target.correct, Some(Exact::from(-2)));
        assert_eq!(table.target.incorrect, Some(Exact::from(1)));
        assert_eq!(table.added.correct, None);
        assert_eq!(table.added.incorrect, Some(Exact::from(-15)));
        assert_eq!(table.correct_existing, Split::default());
        assert_eq!(table.rank_added.correct, Some(Exact::from(3)));
        assert_eq!(table.rank_added.incorrect, Some(Exact::from(10)));
    }

    #[test]
    fn exact_round_trip() {
        for s in ["1/3", "-7/2", "5", "0"] {
            let e: Exact = s.parse().unwrap();
            assert_eq!(e.to_string(), s);
            let json = serde_json::to_string(&e).unwrap();
            assert_eq!(serde_json::from_str::<Exact>(&json).unwrap(), e);
        }
        assert!("1/0".parse::<Exact>().is_err());
        assert!("x".parse::<Exact>().is_err());
    }

    fn arb_outcome() -> impl Strategy<Value = InstanceOutcome> {
        let f = (any::<bool>(), any::<bool>()).prop_map(|(a1, a5)| flags(a1, a1 || a5));
        (f.clone(), prop::collection::vec(f, 0..6)).prop_map(|(nc, windows)| InstanceOutcome {
            no_context: nc,
            windows,
            events: vec![],
        })
    }

    proptest! {
        #[test]
        fn aggregation_is_order_free(mut outs in prop::collection::vec(arb_outcome(), 1..12), seed in any::<u64>()) {
            prop_assume!(outs.iter().any(|o| !o.windows.is_empty()));
            let a = aggregate(&outs).unwrap();
            let n = outs.len();
            outs.rotate_left((seed as usize) % n);
            outs.reverse();
            prop_assert_eq!(aggregate(&outs).unwrap(), a);
        }

        #[test]
        fn acc_and_transition_bounds(outs in prop::collection::vec(arb_outcome(), 1..12)) {
            prop_assume!(outs.iter().any(|o| !o.windows.is_empty()));
            let a = aggregate(&outs).unwrap();
            for row in &a.conditions {
                prop_assert!(row.acc1 <= row.acc5);
            }
            for t in &a.transitions {
                prop_assert!(t.gained_acc1.0 + t.lost_acc1.0 <= Ratio::from_integer(1));
                prop_assert!(t.gained_acc5.0 + t.lost_acc5.0 <= Ratio::from_integer(1));
            }
        }
    }
}
