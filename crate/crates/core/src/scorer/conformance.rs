//! Contract checks that any scorer (oracle or sidecar) must pass.

use std::fmt;

use serde::Serialize;

use super::{validate_positions, Scorer};
use crate::decode::detokenize;
use crate::kb::normalize_surface;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ConformanceReport {
    pub checks: Vec<Check>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    fn record(&mut self, name: &'static str, result: Result<(), String>) {
        let (passed, detail) = match result {
            Ok(()) => (true, String::new()),
            Err(d) => (false, d),
        };
        self.checks.push(Check { name, passed, detail });
    }
}

impl fmt::Display for ConformanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            write!(f, "{mark} {}", c.name)?;
            if !c.detail.is_empty() {
                write!(f, ": {}", c.detail)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Runs every contract check. `probe` should be plain text (words and
/// spaces) the scorer's tokenizer can represent.
pub fn run_conformance(scorer: &dyn Scorer, probe: &str, top_v: usize) -> ConformanceReport {
    let mut report = ConformanceReport::default();

    let info = match (scorer.info(), scorer.info()) {
        (Ok(a), Ok(b)) => {
            report.record(
                "info stable",
                if a == b { Ok(()) } else { Err(format!("{a:?} != {b:?}")) },
            );
            report.record(
                "info consistent",
                if a.max_input_length > 0 && (a.mask_token_id as usize) < a.vocab_size {
                    Ok(())
                } else {
                    Err(format!("{a:?}"))
                },
            );
            a
        }
        (Err(e), _) | (_, Err(e)) => {
            report.record("info stable", Err(e.to_string()));
            return report;
        }
    };

    report.record(
        "tokenize empty",
        match scorer.tokenize("") {
            Ok(t) if t.is_empty() => Ok(()),
            Ok(t) => Err(format!("{} tokens for empty text", t.len())),
            Err(e) => Err(e.to_string()),
        },
    );

    report.record(
        "tokenize round-trip",
        match scorer.tokenize(probe) {
            Ok(tokens) if tokens.is_empty() => Err("no tokens for non-empty text".into()),
            Ok(tokens) => {
                let surfaces: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
                let back = normalize_surface(&detokenize(&surfaces));
                let want = normalize_surface(probe);
                if back == want {
                    Ok(())
                } else {
                    Err(format!("{back:?} != {want:?}"))
                }
            }
            Err(e) => Err(e.to_string()),
        },
    );

    let masked = format!("{probe} {} {}", info.mask_token, info.mask_token);
    let ids: Vec<u32> = match scorer.tokenize(&masked) {
        Ok(tokens) => tokens.iter().map(|t| t.id).collect(),
        Err(e) => {
            report.record("mask passthrough", Err(e.to_string()));
            return report;
        }
    };
    let n_masks = ids.iter().filter(|&&id| id == info.mask_token_id).count();
    report.record(
        "mask passthrough",
        if n_masks == 2 {
            Ok(())
        } else {
            Err(format!("expected 2 mask ids, found {n_masks}"))
        },
    );

    let first = scorer.mask_logits(&ids, top_v);
    report.record(
        "logits shape",
        match &first {
            Ok(positions) => {
                validate_positions(&ids, info.mask_token_id, positions, top_v).map_err(|e| e.to_string())
            }
            Err(e) => Err(e.to_string()),
        },
    );
    let second = scorer.mask_logits(&ids, top_v);
    report.record(
        "logits deterministic",
        match (&first, &second) {
            (Ok(a), Ok(b)) if a == b => Ok(()),
            (Ok(_), Ok(_)) => Err("two identical requests returned different logits".into()),
            (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
        },
    );

    let unmasked: Vec<u32> = ids.iter().copied().filter(|&id| id != info.mask_token_id).collect();
    report.record(
        "no-mask rejected",
        match scorer.mask_logits(&unmasked, top_v) {
            Err(_) => Ok(()),
            Ok(_) => Err("sequence without a mask was accepted".into()),
        },
    );

    report
}
