//! Symptom-centered segmentation of the Subjective section and the
//! segment-by-segment window ladder around the target symptom.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::EntityId;
use crate::soap::{first_mentions, Mention};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WindowError {
    #[error("subjective section has no symptom mentions")]
    NoMentions,
    #[error("target mention {entity}@{start} is not among the section's first mentions")]
    TargetNotFound { entity: EntityId, start: usize },
    #[error("mentions overlap or are out of order at offset {0}")]
    UnsortedMentions(usize),
    #[error("window size {k} outside 1..={max}")]
    WindowOutOfRange { k: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub index: usize,
    /// Byte span `[start, end)` in the subjective text.
    pub start: usize,
    pub end: usize,
    pub symptom: EntityId,
    pub mention_start: usize,
    pub mention_end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub segments: Vec<Segment>,
    pub target_index: usize,
    /// Addition order; `order[i]` is the segment labeled `S{i+1}`.
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub k: usize,
    /// Selected segment indices in document order.
    pub segments: Vec<usize>,
    pub text: String,
    /// Window symptoms in addition order; the last one is `added_symptom`.
    pub symptoms: Vec<EntityId>,
    pub added_symptom: EntityId,
}

impl Window {
    pub fn contains(&self, entity: &EntityId) -> bool {
        self.symptoms.contains(entity)
    }
}

/// Places the cut between two mentions: the whitespace char nearest the
/// gap midpoint (lower index on ties), else the midpoint itself.
fn boundary(text: &str, gap_start: usize, gap_end: usize) -> usize {
    let mid = (gap_start + gap_end) / 2;
    let best = text[gap_start..gap_end]
        .char_indices()
        .filter(|(_, c)| c.is_whitespace())
        .map(|(i, _)| gap_start + i)
        .min_by_key(|&i| (i.abs_diff(mid), i));
    match best {
        Some(i) => i,
        None => {
            let mut m = mid;
            while !text.is_char_boundary(m) {
                m -= 1;
            }
            m
        }
    }
}

/// Splits `subjective` into one segment per first-mentioned symptom.
pub fn segment_subjective(subjective: &str, mentions: &[Mention], target: &Mention) -> Result<SegmentPlan, WindowError> {
    let mentions = first_mentions(mentions);
    if mentions.is_empty() {
        return Err(WindowError::NoMentions);
    }
    for pair in mentions.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(WindowError::UnsortedMentions(pair[1].start));
        }
    }
    let target_index = mentions
        .iter()
        .position(|m| m.entity == target.entity && m.start == target.start)
        .ok_or_else(|| WindowError::TargetNotFound {
            entity: target.entity.clone(),
            start: target.start,
        })?;
    let mut cuts = vec![0];
    for pair in mentions.windows(2) {
        cuts.push(boundary(subjective, pair[0].end, pair[1].start));
    }
    cuts.push(subjective.len());
    let segments = mentions
        .iter()
        .enumerate()
        .map(|(i, m)| Segment {
            index: i,
            start: cuts[i],
            end: cuts[i + 1],
            symptom: m.entity.clone(),
            mention_start: m.start,
            mention_end: m.end,
        })
        .collect::<Vec<_>>();
    let order = expansion_order(segments.len(), target_index);
    Ok(SegmentPlan {
        segments,
        target_index,
        order,
    })
}

/// Target first, then alternate nearest-left, nearest-right outward; once a
/// side runs out the other side continues alone.
pub fn expansion_order(n_segments: usize, target: usize) -> Vec<usize> {
    assert!(target < n_segments, "target {target} out of {n_segments} segments");
    let mut order = vec![target];
    let (mut left, mut right) = (target, target + 1);
    while order.len() < n_segments {
        if left > 0 {
            left -= 1;
            order.push(left);
        }
        if right < n_segments {
            order.push(right);
            right += 1;
        }
    }
    order
}

impl SegmentPlan {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segment_text<'a>(&self, subjective: &'a str, index: usize) -> &'a str {
        let s = &self.segments[index];
        &subjective[s.start..s.end]
    }

    /// Window of the first `k` segments in addition order. Selected segments
    /// always form one contiguous run, so the text is a single slice.
    pub fn window(&self, subjective: &str, k: usize) -> Result<Window, WindowError> {
        if k == 0 || k > self.len() {
            return Err(WindowError::WindowOutOfRange { k, max: self.len() });
        }
        let mut selected = self.order[..k].to_vec();
        selected.sort_unstable();
        let (first, last) = (selected[0], selected[k - 1]);
        debug_assert_eq!(last - first + 1, k);
        let text = subjective[self.segments[first].start..self.segments[last].end]
            .trim()
            .to_string();
        let symptoms: Vec<EntityId> = self.order[..k]
            .iter()
            .map(|&i| self.segments[i].symptom.clone())
            .collect();
        Ok(Window {
            k,
            segments: selected,
            text,
            added_symptom: symptoms[k - 1].clone(),
            symptoms,
        })
    }

    /// Addition labels (`S1`, `S2`, ...) of the first `k` segments, listed in
    /// document order.
    pub fn labels(&self, k: usize) -> Vec<String> {
        let mut pairs: Vec<(usize, usize)> = self.order[..k.min(self.len())]
            .iter()
            .enumerate()
            .map(|(rank, &seg)| (seg, rank + 1))
            .collect();
        pairs.sort_unstable();
        pairs.into_iter().map(|(_, label)| format!("S{label}")).collect()
    }
}

pub fn window_text(plan: &SegmentPlan, subjective: &str, k: usize) -> Result<Window, WindowError> {
    plan.window(subjective, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soap::SectionKind;
    use proptest::prelude::*;

    fn mention(id: &str, start: usize, end: usize) -> Mention {
        Mention {
            entity: id.into(),
            start,
            end,
            section: SectionKind::Subjective,
        }
    }

    #[test]
    fn two_mention_boundary() {
        let text = "aaa cough bbb fever ccc";
        let ms = [mention("cough", 4, 9), mention("fever", 14, 19)];
        let plan = segment_subjective(text, &ms, &ms[1]).unwrap();
        // midpoint 11 is 2 away from both spaces (9 and 13); the lower wins
        assert_eq!((plan.segments[0].start, plan.segments[0].end), (0, 9));
        assert_eq!((plan.segments[1].start, plan.segments[1].end), (9, 23));
        assert_eq!(plan.target_index, 1);
        assert_eq!(plan.window(text, 1).unwrap().text, "bbb fever ccc");
        assert_eq!(plan.window(text, 2).unwrap().text, text);
    }

    #[test]
    fn boundary_without_whitespace() {
        assert_eq!(boundary("cough,,,,fever", 5, 9), 7);
        assert_eq!(boundary("ab", 1, 1), 1);
        // midpoint lands inside a two-byte char
        assert_eq!(boundary("x\u{e9}\u{e9}y", 1, 5), 3);
        assert_eq!(boundary("x\u{e9}y", 1, 3), 1);
    }

    #[test]
    fn single_mention_spans_everything() {
        let text = "  only cough here ";
        let ms = [mention("cough", 7, 12)];
        let plan = segment_subjective(text, &ms, &ms[0]).unwrap();
        assert_eq!(plan.len(), 1);
        assert_eq!((plan.segments[0].start, plan.segments[0].end), (0, text.len()));
        assert_eq!(plan.window(text, 1).unwrap().text, "only cough here");
    }

    #[test]
    fn eleven_segments_target_is_s1() {
        let words: Vec<String> = (0..11).map(|i| format!("s{i:02}")).collect();
        let text = words.join(" ");
        let ms: Vec<Mention> = (0..11).map(|i| mention(&words[i], i * 4, i * 4 + 3)).collect();
        let plan = segment_subjective(&text, &ms, &ms[6]).unwrap();
        assert_eq!(plan.len(), 11);
        assert_eq!(plan.order[0], 6);
        assert_eq!(plan.labels(1), vec!["S1"]);
        assert_eq!(plan.labels(4), vec!["S4", "S2", "S1", "S3"]);
    }

    #[test]
    fn expansion_orders() {
        assert_eq!(expansion_order(5, 2), vec![2, 1, 3, 0, 4]);
        assert_eq!(expansion_order(5, 0), vec![0, 1, 2, 3, 4]);
        assert_eq!(expansion_order(7, 5), vec![5, 4, 6, 3, 2, 1, 0]);
        assert_eq!(expansion_order(1, 0), vec![0]);
    }

    #[test]
    fn window_renders_in_document_order() {
        let text = "a0 a1 a2 a3 a4";
        let ms: Vec<Mention> = (0..5).map(|i| mention(&format!("a{i}"), i * 3, i * 3 + 2)).collect();
        let plan = segment_subjective(text, &ms, &ms[2]).unwrap();
        let w = plan.window(text, 3).unwrap();
        assert_eq!(w.segments, vec![1, 2, 3]);
        assert_eq!(w.text, "a1 a2 a3");
        assert_eq!(w.added_symptom.as_str(), "a3");
        assert_eq!(w.symptoms.iter().map(|s| s.as_str()).collect::<Vec<_>>(), vec!["a2", "a1", "a3"]);
        assert_eq!(
            plan.window(text, 0),
            Err(WindowError::WindowOutOfRange { k: 0, max: 5 })
        );
        assert!(plan.window(text, 6).is_err());
    }

    #[test]
    fn duplicate_mentions_use_first() {
        let text = "cough fever cough";
        let ms = [mention("c", 0, 5), mention("f", 6, 11), mention("c", 12, 17)];
        let plan = segment_subjective(text, &ms, &ms[0]).unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan.segments[1].end, text.len());
        assert_eq!(
            segment_subjective(text, &ms, &ms[2]),
            Err(WindowError::TargetNotFound {
                entity: "c".into(),
                start: 12
            })
        );
    }

    #[test]
    fn errors() {
        assert_eq!(
            segment_subjective("nothing", &[], &mention("x", 0, 1)),
            Err(WindowError::NoMentions)
        );
        let ms = [mention("a", 0, 4), mention("b", 2, 6)];
        assert_eq!(
            segment_subjective("abcdefg", &ms, &ms[0]),
            Err(WindowError::UnsortedMentions(2))
        );
    }

    /// Random note: words `w{i}` (symptoms, distinct) interleaved with filler.
    fn arb_note() -> impl Strategy<Value = (String, Vec<Mention>, usize)> {
        (1usize..12, prop::collection::vec(("[ .,x]{0,4}", 0usize..3), 13)).prop_flat_map(|(n, fillers)| {
            let mut text = String::new();
            let mut ms = Vec::new();
            for i in 0..n {
                let (fill, spaces) = &fillers[i];
                text.push_str(fill);
                text.push_str(&" ".repeat(*spaces + 1));
                let start = text.len();
                text.push_str(&format!("w{i}"));
                ms.push(mention(&format!("w{i}"), start, text.len()));
            }
            text.push_str(&fillers[12].0);
            (Just(text), Just(ms), 0..n)
        })
    }

    proptest! {
        #[test]
        fn order_prefixes_are_intervals(n in 1usize..40, t in 0usize..40) {
            let t = t % n;
            let order = expansion_order(n, t);
            let mut sorted = order.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(order[0], t);
            for k in 1..=n {
                let lo = *order[..k].iter().min().unwrap();
                let hi = *order[..k].iter().max().unwrap();
                prop_assert_eq!(hi - lo + 1, k);
                prop_assert!(lo <= t && t <= hi);
            }
        }

        #[test]
        fn segments_partition_and_ladder_grows((text, ms, t) in arb_note()) {
            let plan = segment_subjective(&text, &ms, &ms[t]).unwrap();
            prop_assert_eq!(plan.segments[0].start, 0);
            prop_assert_eq!(plan.segments.last().unwrap().end, text.len());
            for pair in plan.segments.windows(2) {
                prop_assert_eq!(pair[0].end, pair[1].start);
            }
            for s in &plan.segments {
                prop_assert!(s.start <= s.mention_start && s.mention_end <= s.end);
                let inside = ms.iter().filter(|m| m.start >= s.start && m.end <= s.end).count();
                prop_assert_eq!(inside, 1);
            }
            let mut prev: Option<Window> = None;
            for k in 1..=plan.len() {
                let w = plan.window(&text, k).unwrap();
                prop_assert_eq!(w.symptoms.len(), k);
                if let Some(p) = &prev {
                    prop_assert_eq!(&w.symptoms[..k - 1], &p.symptoms[..]);
                    prop_assert!(!p.symptoms.contains(&w.added_symptom));
                    prop_assert!(p.segments.iter().all(|s| w.segments.contains(s)));
                    prop_assert!(w.text.contains(p.text.as_str()));
                }
                prev = Some(w);
            }
            prop_assert_eq!(prev.unwrap().text, text.trim());
        }

        #[test]
        fn resegmenting_full_text_is_stable((text, ms, t) in arb_note()) {
            let plan = segment_subjective(&text, &ms, &ms[t]).unwrap();
            let rebuilt: String = (0..plan.len()).map(|i| plan.segment_text(&text, i)).collect();
            prop_assert_eq!(&rebuilt, &text);
            let again = segment_subjective(&rebuilt, &ms, &ms[t]).unwrap();
            prop_assert_eq!(again, plan);
        }
    }
}
