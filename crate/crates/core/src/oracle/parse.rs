use std::fmt;

use crate::domain::{Domain, GroundTask, TaskInstance};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ParsePolicy {
    /// Any bad line rejects the whole response.
    #[default]
    Strict,
    /// Bad lines are dropped and reported.
    Salvage,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RejectedLine {
    /// 1-based line number.
    pub line: usize,
    pub text: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub rejected: Vec<RejectedLine>,
}

impl fmt::Display for ParseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.rejected.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "line {}: {} (`{}`)", r.line, r.reason, r.text)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseOutcome {
    pub tasks: Vec<GroundTask>,
    pub report: ParseReport,
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_line(line: &str, domain: &Domain) -> Result<GroundTask, String> {
    let Some(open) = line.find('(') else {
        return Err("not of the form name(arg, ...)".into());
    };
    if !line.ends_with(')') {
        return Err("not of the form name(arg, ...)".into());
    }
    let name = line[..open].trim_end();
    let inner = &line[open + 1..line.len() - 1];
    if !is_ident(name) || inner.contains('(') || inner.contains(')') {
        return Err("not of the form name(arg, ...)".into());
    }
    let args: Vec<String> = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(|a| a.trim().to_string()).collect()
    };
    let Some(schema) = domain.action(name) else {
        return Err(format!("unknown operator `{name}`"));
    };
    if schema.params.len() != args.len() {
        return Err(format!(
            "`{name}` takes {} argument(s), got {}",
            schema.params.len(),
            args.len()
        ));
    }
    for a in &args {
        if !is_ident(a) || !domain.is_constant(a) {
            return Err(format!("undeclared constant `{a}`"));
        }
    }
    Ok(GroundTask::Primitive(TaskInstance {
        name: name.to_string(),
        args,
    }))
}

/// Reads one `operator(arg, ...)` per non-blank line. Only declared
/// operators with matching arity over declared constants are accepted.
pub fn parse_predicates(
    text: &str,
    domain: &Domain,
    policy: ParsePolicy,
) -> Result<ParseOutcome, ParseReport> {
    let mut tasks = Vec::new();
    let mut report = ParseReport::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match parse_line(line, domain) {
            Ok(t) => tasks.push(t),
            Err(reason) => report.rejected.push(RejectedLine {
                line: i + 1,
                text: line.to_string(),
                reason,
            }),
        }
    }
    if policy == ParsePolicy::Strict && !report.rejected.is_empty() {
        return Err(report);
    }
    Ok(ParseOutcome { tasks, report })
}
