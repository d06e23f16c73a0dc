use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::Serialize;

/// One search event. Serialized as a JSON object tagged by `event`;
/// `state` is the hex hash of the state the event happened in and `depth`
/// the number of enclosing compound expansions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceEvent {
    Expand {
        depth: usize,
        state: String,
        task: String,
    },
    MethodApplied {
        depth: usize,
        state: String,
        task: String,
        method: String,
        binding: BTreeMap<String, String>,
        subtasks: Vec<String>,
    },
    OracleQuery {
        depth: usize,
        state: String,
        task: String,
        call: usize,
    },
    OracleAnswer {
        depth: usize,
        state: String,
        task: String,
        source: String,
        subtasks: Vec<String>,
    },
    OracleFailure {
        depth: usize,
        state: String,
        task: String,
        kind: String,
        detail: String,
    },
    VerifierPass {
        depth: usize,
        state: String,
        task: String,
    },
    VerifierFail {
        depth: usize,
        state: String,
        task: String,
    },
    Apply {
        depth: usize,
        state: String,
        action: String,
    },
    ApplyFail {
        depth: usize,
        state: String,
        action: String,
    },
    Backtrack {
        depth: usize,
        state: String,
        task: String,
        from: String,
    },
    LoopCut {
        depth: usize,
        state: String,
        task: String,
    },
    LimitHit {
        depth: usize,
        state: String,
        task: String,
        limit: String,
    },
    Solution {
        actions: Vec<String>,
        segments: Vec<usize>,
    },
    NoPlan {
        reason: String,
    },
}

impl TraceEvent {
    pub fn name(&self) -> &'static str {
        match self {
            TraceEvent::Expand { .. } => "expand",
            TraceEvent::MethodApplied { .. } => "method-applied",
            TraceEvent::OracleQuery { .. } => "oracle-query",
            TraceEvent::OracleAnswer { .. } => "oracle-answer",
            TraceEvent::OracleFailure { .. } => "oracle-failure",
            TraceEvent::VerifierPass { .. } => "verifier-pass",
            TraceEvent::VerifierFail { .. } => "verifier-fail",
            TraceEvent::Apply { .. } => "apply",
            TraceEvent::ApplyFail { .. } => "apply-fail",
            TraceEvent::Backtrack { .. } => "backtrack",
            TraceEvent::LoopCut { .. } => "loop-cut",
            TraceEvent::LimitHit { .. } => "limit-hit",
            TraceEvent::Solution { .. } => "solution",
            TraceEvent::NoPlan { .. } => "no-plan",
        }
    }
}

/// Writes events as JSON lines.
pub fn write_jsonl<W: Write>(mut out: W, events: &[TraceEvent]) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e).map_err(io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_is_tagged_and_kebab_cased() {
        let mut buf = Vec::new();
        write_jsonl(
            &mut buf,
            &[
                TraceEvent::LoopCut {
                    depth: 2,
                    state: "00ff".into(),
                    task: "t(a)".into(),
                },
                TraceEvent::VerifierPass {
                    depth: 0,
                    state: "00".into(),
                    task: "t(a)".into(),
                },
            ],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            r#"{"event":"loop-cut","depth":2,"state":"00ff","task":"t(a)"}"#
        );
        assert!(lines[1].starts_with(r#"{"event":"verifier-pass""#));
    }
}
