//! Dictionary matcher over normalized entity surfaces.
//!
//! Surfaces are stored in a character trie. Matching is case-insensitive,
//! requires non-alphanumeric characters (or text edges) on both sides of a
//! match, and lets a single space in a surface match any run of whitespace in
//! the text. Overlapping candidates are resolved leftmost-longest.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::kb::EntityId;
use crate::soap::SectionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    Char(char),
    Space,
}

#[derive(Debug, Clone, Default)]
struct Node {
    children: BTreeMap<Edge, usize>,
    terminal: Option<EntityId>,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    nodes: Vec<Node>,
    n_surfaces: usize,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon {
            nodes: vec![Node::default()],
            n_surfaces: 0,
        }
    }
}

/// One detected entity occurrence inside a section's text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mention {
    pub entity: EntityId,
    /// Byte offset into the section text.
    pub start: usize,
    /// Exclusive byte offset.
    pub end: usize,
    pub section: SectionKind,
}

/// A raw dictionary hit before overlap resolution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Hit {
    pub start: usize,
    pub end: usize,
    pub entity: EntityId,
}

impl Lexicon {
    /// Surfaces must already be normalized. When two entities share a surface
    /// the first one inserted keeps it.
    pub fn build<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (EntityId, BTreeSet<String>)>,
    {
        let mut lex = Lexicon::default();
        for (id, surfaces) in entries {
            for surface in surfaces {
                lex.insert(&surface, &id);
            }
        }
        lex
    }

    fn insert(&mut self, surface: &str, id: &EntityId) {
        if surface.is_empty() {
            return;
        }
        let mut node = 0;
        for c in surface.chars() {
            let edge = if c == ' ' { Edge::Space } else { Edge::Char(c) };
            node = match self.nodes[node].children.get(&edge) {
                Some(&next) => next,
                None => {
                    self.nodes.push(Node::default());
                    let next = self.nodes.len() - 1;
                    self.nodes[node].children.insert(edge, next);
                    next
                }
            };
        }
        if self.nodes[node].terminal.is_none() {
            self.nodes[node].terminal = Some(id.clone());
            self.n_surfaces += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.n_surfaces
    }

    pub fn is_empty(&self) -> bool {
        self.n_surfaces == 0
    }

    /// Every boundary-delimited surface occurrence, overlaps included,
    /// sorted by `(start, end)`.
    pub fn all_hits(&self, text: &str) -> Vec<Hit> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut hits = Vec::new();
        for (ci, &(start, _)) in chars.iter().enumerate() {
            if ci > 0 && chars[ci - 1].1.is_alphanumeric() {
                continue;
            }
            self.walk(text, &chars, ci, start, &mut hits);
        }
        hits.sort();
        hits
    }

    fn walk(&self, text: &str, chars: &[(usize, char)], from: usize, start: usize, hits: &mut Vec<Hit>) {
        let mut node = 0;
        let mut ci = from;
        while ci < chars.len() {
            let c = chars[ci].1;
            if c.is_whitespace() {
                match self.nodes[node].children.get(&Edge::Space) {
                    Some(&next) => node = next,
                    None => return,
                }
                while ci < chars.len() && chars[ci].1.is_whitespace() {
                    ci += 1;
                }
                // a surface never ends in a space, so no terminal check here
                continue;
            }
            for lc in c.to_lowercase() {
                match self.nodes[node].children.get(&Edge::Char(lc)) {
                    Some(&next) => node = next,
                    None => return,
                }
            }
            ci += 1;
            if let Some(id) = &self.nodes[node].terminal {
                let at_boundary = ci == chars.len() || !chars[ci].1.is_alphanumeric();
                if at_boundary {
                    let end = if ci == chars.len() { text.len() } else { chars[ci].0 };
                    hits.push(Hit {
                        start,
                        end,
                        entity: id.clone(),
                    });
                }
            }
        }
    }
}

/// Keeps the leftmost hit, preferring the longest at equal starts, and drops
/// anything overlapping an already selected hit.
pub fn leftmost_longest(mut hits: Vec<Hit>) -> Vec<Hit> {
    hits.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    let mut out: Vec<Hit> = Vec::new();
    for hit in hits {
        if out.last().is_none_or(|last| hit.start >= last.end) {
            out.push(hit);
        }
    }
    out
}

/// Case-insensitive, word-boundary dictionary matching with leftmost-longest
/// overlap resolution. Output is sorted by start offset.
pub fn find_mentions(text: &str, lexicon: &Lexicon, section: SectionKind) -> Vec<Mention> {
    leftmost_longest(lexicon.all_hits(text))
        .into_iter()
        .map(|h| Mention {
            entity: h.entity,
            start: h.start,
            end: h.end,
            section,
        })
        .collect()
}

/// First mention of every entity, in document order.
pub fn first_mentions(mentions: &[Mention]) -> Vec<Mention> {
    let mut seen = BTreeSet::new();
    mentions
        .iter()
        .filter(|m| seen.insert(m.entity.clone()))
        .cloned()
        .collect()
}
