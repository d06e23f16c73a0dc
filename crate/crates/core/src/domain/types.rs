use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// An argument position: a declared object or a `?`-prefixed variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Constant(String),
    Variable(String),
}

impl Term {
    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Constant(c) => f.write_str(c),
            Term::Variable(v) => write!(f, "?{v}"),
        }
    }
}

/// A predicate applied to terms. The predicate may name a base predicate or an axiom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_variable())
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Variable(v) => Some(v.as_str()),
            Term::Constant(_) => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_call(f, &self.predicate, self.args.iter())
    }
}

/// A ground atom. Ordering is by predicate, then arguments, which gives the
/// canonical state ordering.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Fact {
    pub fn new(predicate: impl Into<String>, args: &[&str]) -> Self {
        Fact {
            predicate: predicate.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_call(f, &self.predicate, self.args.iter())
    }
}

pub(crate) fn write_call<T: fmt::Display>(
    f: &mut fmt::Formatter<'_>,
    name: &str,
    args: impl Iterator<Item = T>,
) -> fmt::Result {
    f.write_str(name)?;
    f.write_str("(")?;
    for (i, a) in args.enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

/// Precondition or effect entry: a possibly negated atom. When the atom names
/// an axiom it is evaluated through the axiom body.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal {
            positive: true,
            atom,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal {
            positive: false,
            atom,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("not ")?;
        }
        write!(f, "{}", self.atom)
    }
}

/// A literal whose atom has been grounded.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundLiteral {
    pub positive: bool,
    pub fact: Fact,
}

impl fmt::Display for GroundLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("not ")?;
        }
        write!(f, "{}", self.fact)
    }
}

/// Axiom body. Quantifiers range over the declared objects of a type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    ForAll {
        var: String,
        ty: String,
        body: Box<Formula>,
    },
    Exists {
        var: String,
        ty: String,
        body: Box<Formula>,
    },
}

impl Formula {
    pub(crate) fn atoms(&self, out: &mut Vec<Atom>) {
        match self {
            Formula::Atom(a) => out.push(a.clone()),
            Formula::Not(b) => b.atoms(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.atoms(out)),
            Formula::ForAll { body, .. } | Formula::Exists { body, .. } => body.atoms(out),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(b) => write!(f, "not {}", Parens(b)),
            Formula::And(fs) => join_formulas(f, fs, " and "),
            Formula::Or(fs) => join_formulas(f, fs, " or "),
            Formula::ForAll { var, ty, body } => {
                write!(f, "forall ?{var} - {ty}: {}", Parens(body))
            }
            Formula::Exists { var, ty, body } => {
                write!(f, "exists ?{var} - {ty}: {}", Parens(body))
            }
        }
    }
}

struct Parens<'a>(&'a Formula);

impl fmt::Display for Parens<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Formula::Atom(_) | Formula::Not(_) => write!(f, "{}", self.0),
            other => write!(f, "({other})"),
        }
    }
}

fn join_formulas(f: &mut fmt::Formatter<'_>, fs: &[Formula], sep: &str) -> fmt::Result {
    for (i, x) in fs.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{}", Parens(x))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Axiom {
    pub name: String,
    pub params: Vec<String>,
    pub body: Formula,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_call(f, &self.name, self.params.iter().map(|p| format!("?{p}")))?;
        write!(f, " := {}", self.body)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<String>,
    pub preconditions: Vec<Literal>,
    pub add: Vec<Atom>,
    pub delete: Vec<Atom>,
}

/// A compound task with (preconditions, effects) semantics. Effects are only
/// ever checked, never applied.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompoundTaskSchema {
    pub name: String,
    pub params: Vec<String>,
    pub preconditions: Vec<Literal>,
    pub effects: Vec<Literal>,
}

/// A subtask pattern inside a method body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskTemplate {
    pub name: String,
    pub args: Vec<Term>,
}

impl fmt::Display for TaskTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_call(f, &self.name, self.args.iter())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Method {
    pub name: String,
    /// Head pattern; repeated variables or constants restrict which task
    /// instances the method unifies with.
    pub task: TaskTemplate,
    pub extra_params: Vec<String>,
    pub preconditions: Vec<Literal>,
    pub subtasks: Vec<TaskTemplate>,
}

/// A task name applied to constants.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskInstance {
    pub name: String,
    pub args: Vec<String>,
}

impl TaskInstance {
    pub fn new(name: impl Into<String>, args: &[&str]) -> Self {
        TaskInstance {
            name: name.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for TaskInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_call(f, &self.name, self.args.iter())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroundTask {
    Primitive(TaskInstance),
    Compound(TaskInstance),
    /// Effect-free primitive whose preconditions are the effects of the
    /// wrapped compound task.
    Verifier(TaskInstance),
}

impl GroundTask {
    pub fn instance(&self) -> &TaskInstance {
        match self {
            GroundTask::Primitive(t) | GroundTask::Compound(t) | GroundTask::Verifier(t) => t,
        }
    }

    pub fn is_compound(&self) -> bool {
        matches!(self, GroundTask::Compound(_))
    }

    pub fn is_verifier(&self) -> bool {
        matches!(self, GroundTask::Verifier(_))
    }
}

impl fmt::Display for GroundTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundTask::Primitive(t) | GroundTask::Compound(t) => write!(f, "{t}"),
            GroundTask::Verifier(t) => write!(f, "verify[{t}]"),
        }
    }
}

/// Variable assignment, ordered by variable name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Binding(BTreeMap<String, String>);

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&str> {
        self.0.get(var).map(String::as_str)
    }

    pub fn insert(&mut self, var: impl Into<String>, value: impl Into<String>) {
        self.0.insert(var.into(), value.into());
    }

    pub fn with(mut self, var: &str, value: &str) -> Self {
        self.insert(var, value);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.0
    }
}

impl FromIterator<(String, String)> for Binding {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        Binding(iter.into_iter().collect())
    }
}

/// Stable 64-bit digest of a state's canonical serialization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateHash(pub u64);

impl fmt::Display for StateHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// A finite set of ground atoms under the closed-world assumption.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct State {
    facts: BTreeSet<Fact>,
}

impl State {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains(fact)
    }

    pub fn insert(&mut self, fact: Fact) -> bool {
        self.facts.insert(fact)
    }

    pub fn remove(&mut self, fact: &Fact) -> bool {
        self.facts.remove(fact)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Facts in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = &Fact> {
        self.facts.iter()
    }

    /// Facts with the given predicate, sorted by arguments.
    pub fn with_predicate<'a>(&'a self, predicate: &'a str) -> impl Iterator<Item = &'a Fact> + 'a {
        let start = Fact {
            predicate: predicate.to_string(),
            args: Vec::new(),
        };
        self.facts
            .range(start..)
            .take_while(move |f| f.predicate == predicate)
    }

    /// Sorted, newline-free serialization: `f1;f2;...`.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (i, f) in self.facts.iter().enumerate() {
            if i > 0 {
                out.push(';');
            }
            out.push_str(&f.to_string());
        }
        out
    }

    pub fn hash(&self) -> StateHash {
        let digest = Sha256::digest(self.canonical().as_bytes());
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        StateHash(u64::from_be_bytes(bytes))
    }
}

impl FromIterator<Fact> for State {
    fn from_iter<I: IntoIterator<Item = Fact>>(iter: I) -> Self {
        State {
            facts: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, fact) in self.facts.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{fact}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_is_a_set() {
        let mut s = State::new();
        assert!(s.insert(Fact::new("at", &["t1", "l1"])));
        assert!(!s.insert(Fact::new("at", &["t1", "l1"])));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn canonical_form_ignores_insertion_order() {
        let a: State = [
            Fact::new("b", &["x"]),
            Fact::new("a", &["y"]),
            Fact::new("a", &["x"]),
        ]
        .into_iter()
        .collect();
        let b: State = [
            Fact::new("a", &["x"]),
            Fact::new("b", &["x"]),
            Fact::new("a", &["y"]),
        ]
        .into_iter()
        .collect();
        assert_eq!(a.canonical(), "a(x);a(y);b(x)");
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn predicate_range_is_sorted_and_exact() {
        let s: State = [
            Fact::new("at", &["truck9", "dest"]),
            Fact::new("at", &["truck2", "ap2"]),
            Fact::new("atx", &["a", "b"]),
            Fact::new("as", &["z"]),
        ]
        .into_iter()
        .collect();
        let got: Vec<String> = s.with_predicate("at").map(|f| f.to_string()).collect();
        assert_eq!(got, vec!["at(truck2,ap2)", "at(truck9,dest)"]);
    }

    #[test]
    fn verifier_display_wraps_task() {
        let t = GroundTask::Verifier(TaskInstance::new("truckTransport", &["p1", "s1", "d1"]));
        assert_eq!(t.to_string(), "verify[truckTransport(p1,s1,d1)]");
    }
}
