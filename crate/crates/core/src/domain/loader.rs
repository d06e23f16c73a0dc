//! JSON domain and problem files.
//!
//! Domain files carry `predicates` (name to arity), `objects` (type to
//! constants), `axioms`, `actions`, `compound_tasks`, and `methods`; problem
//! files carry `initial_state` and `task_list`, plus optional extra
//! `objects`. Atoms, literals, and formulas are written in the text syntax
//! of [`super::syntax`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Deserialize;
use thiserror::Error;

use super::syntax::{parse_atom, parse_formula, parse_literal, SyntaxError};
use super::types::{
    ActionSchema, Atom, Axiom, CompoundTaskSchema, Fact, Formula, Literal, Method, State,
    TaskInstance, TaskTemplate, Term,
};
use super::{Domain, Problem};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("malformed file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{context}: {source}")]
    Syntax {
        context: String,
        #[source]
        source: SyntaxError,
    },
    #[error("{context}: `{symbol}` takes {expected} argument(s), got {found}")]
    Arity {
        context: String,
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("{context}: undeclared {kind} `{symbol}`")]
    Undeclared {
        context: String,
        kind: &'static str,
        symbol: String,
    },
    #[error("duplicate {kind} `{symbol}`")]
    Duplicate { kind: &'static str, symbol: String },
    #[error("axioms depend on each other cyclically: {}", .0.join(" -> "))]
    CyclicAxioms(Vec<String>),
    #[error("{context}: variable ?{var} is not bound")]
    UnboundVariable { context: String, var: String },
    #[error("{context}: `{text}` must be ground")]
    NotGround { context: String, text: String },
    #[error("{context}: {message}")]
    Invalid { context: String, message: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainFile {
    name: String,
    #[serde(default)]
    #[allow(dead_code)]
    provenance: Option<serde_json::Value>,
    predicates: BTreeMap<String, usize>,
    #[serde(default)]
    objects: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    axioms: Vec<AxiomFile>,
    actions: Vec<ActionFile>,
    #[serde(default)]
    compound_tasks: Vec<CompoundFile>,
    #[serde(default)]
    methods: Vec<MethodFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AxiomFile {
    head: String,
    body: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionFile {
    head: String,
    #[serde(default)]
    preconditions: Vec<String>,
    #[serde(default)]
    add: Vec<String>,
    #[serde(default)]
    delete: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompoundFile {
    head: String,
    #[serde(default)]
    preconditions: Vec<String>,
    #[serde(default)]
    effects: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MethodFile {
    name: String,
    task: String,
    #[serde(default)]
    extra_params: Vec<String>,
    #[serde(default)]
    preconditions: Vec<String>,
    #[serde(default)]
    subtasks: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    name: String,
    #[serde(default)]
    #[allow(dead_code)]
    provenance: Option<serde_json::Value>,
    #[serde(default)]
    objects: BTreeMap<String, Vec<String>>,
    initial_state: Vec<String>,
    task_list: Vec<String>,
}

fn syntax<T>(context: &str, r: Result<T, SyntaxError>) -> Result<T, LoadError> {
    r.map_err(|source| LoadError::Syntax {
        context: context.to_string(),
        source,
    })
}

/// Parses `name(?a, ?b)` where every argument is a distinct variable.
fn parse_head(context: &str, text: &str) -> Result<(String, Vec<String>), LoadError> {
    let atom = syntax(context, parse_atom(text))?;
    let mut params = Vec::new();
    for t in atom.args {
        match t {
            Term::Variable(v) if !params.contains(&v) => params.push(v),
            Term::Variable(v) => {
                return Err(LoadError::Invalid {
                    context: context.to_string(),
                    message: format!("parameter ?{v} repeated"),
                })
            }
            Term::Constant(c) => {
                return Err(LoadError::Invalid {
                    context: context.to_string(),
                    message: format!("parameter `{c}` must be a ?variable"),
                })
            }
        }
    }
    Ok((atom.predicate, params))
}

fn parse_var(context: &str, text: &str) -> Result<String, LoadError> {
    text.strip_prefix('?')
        .filter(|v| !v.is_empty() && v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
        .map(str::to_string)
        .ok_or_else(|| LoadError::Invalid {
            context: context.to_string(),
            message: format!("`{text}` is not a ?variable"),
        })
}

struct Checker<'a> {
    predicates: &'a BTreeMap<String, usize>,
    axiom_arity: &'a HashMap<String, usize>,
    constants: &'a BTreeSet<String>,
}

impl Checker<'_> {
    /// Validates predicate, arity, and constants of an atom. Returns whether
    /// the atom refers to an axiom.
    fn atom(&self, context: &str, atom: &Atom, allow_axiom: bool) -> Result<bool, LoadError> {
        let (arity, is_axiom) = match self.predicates.get(&atom.predicate) {
            Some(&n) => (n, false),
            None => match self.axiom_arity.get(&atom.predicate) {
                Some(&n) if allow_axiom => (n, true),
                Some(_) => {
                    return Err(LoadError::Invalid {
                        context: context.to_string(),
                        message: format!("axiom `{}` cannot be added or deleted", atom.predicate),
                    })
                }
                None => {
                    return Err(LoadError::Undeclared {
                        context: context.to_string(),
                        kind: "predicate",
                        symbol: atom.predicate.clone(),
                    })
                }
            },
        };
        if arity != atom.args.len() {
            return Err(LoadError::Arity {
                context: context.to_string(),
                symbol: atom.predicate.clone(),
                expected: arity,
                found: atom.args.len(),
            });
        }
        for t in &atom.args {
            if let Term::Constant(c) = t {
                if !self.constants.contains(c) {
                    return Err(LoadError::Undeclared {
                        context: context.to_string(),
                        kind: "constant",
                        symbol: c.clone(),
                    });
                }
            }
        }
        Ok(is_axiom)
    }

    fn vars_in_scope(context: &str, atom: &Atom, scope: &[String]) -> Result<(), LoadError> {
        for v in atom.variables() {
            if !scope.iter().any(|s| s == v) {
                return Err(LoadError::UnboundVariable {
                    context: context.to_string(),
                    var: v.to_string(),
                });
            }
        }
        Ok(())
    }

    fn literals(
        &self,
        context: &str,
        texts: &[String],
        scope: &[String],
    ) -> Result<Vec<Literal>, LoadError> {
        texts
            .iter()
            .enumerate()
            .map(|(i, text)| {
                let ctx = format!("{context} #{}", i + 1);
                let lit = syntax(&ctx, parse_literal(text))?;
                self.atom(&ctx, &lit.atom, true)?;
                Self::vars_in_scope(&ctx, &lit.atom, scope)?;
                Ok(lit)
            })
            .collect()
    }

    fn formula(
        &self,
        context: &str,
        f: &Formula,
        scope: &mut Vec<String>,
        objects: &BTreeMap<String, Vec<String>>,
    ) -> Result<(), LoadError> {
        match f {
            Formula::Atom(a) => {
                self.atom(context, a, true)?;
                Self::vars_in_scope(context, a, scope)
            }
            Formula::Not(b) => self.formula(context, b, scope, objects),
            Formula::And(fs) | Formula::Or(fs) => fs
                .iter()
                .try_for_each(|x| self.formula(context, x, scope, objects)),
            Formula::ForAll { var, ty, body } | Formula::Exists { var, ty, body } => {
                if !objects.contains_key(ty) {
                    return Err(LoadError::Undeclared {
                        context: context.to_string(),
                        kind: "object type",
                        symbol: ty.clone(),
                    });
                }
                scope.push(var.clone());
                let r = self.formula(context, body, scope, objects);
                scope.pop();
                r
            }
        }
    }
}

fn check_unique<'a>(
    kind: &'static str,
    names: impl Iterator<Item = &'a str>,
) -> Result<(), LoadError> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(LoadError::Duplicate {
                kind,
                symbol: n.to_string(),
            });
        }
    }
    Ok(())
}

fn check_axioms_acyclic(axioms: &[Axiom]) -> Result<(), LoadError> {
    let index: HashMap<&str, usize> = axioms
        .iter()
        .enumerate()
        .map(|(i, a)| (a.name.as_str(), i))
        .collect();
    let deps: Vec<Vec<usize>> = axioms
        .iter()
        .map(|a| {
            let mut atoms = Vec::new();
            a.body.atoms(&mut atoms);
            let mut d: Vec<usize> = atoms
                .iter()
                .filter_map(|at| index.get(at.predicate.as_str()).copied())
                .collect();
            d.sort_unstable();
            d.dedup();
            d
        })
        .collect();

    // 0 = unvisited, 1 = on stack, 2 = done
    fn visit(
        i: usize,
        deps: &[Vec<usize>],
        mark: &mut [u8],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        mark[i] = 1;
        stack.push(i);
        for &j in &deps[i] {
            if mark[j] == 1 {
                let start = stack.iter().position(|&k| k == j).unwrap();
                let mut cycle = stack[start..].to_vec();
                cycle.push(j);
                return Some(cycle);
            }
            if mark[j] == 0 {
                if let Some(c) = visit(j, deps, mark, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        mark[i] = 2;
        None
    }

    let mut mark = vec![0u8; axioms.len()];
    for i in 0..axioms.len() {
        if mark[i] == 0 {
            if let Some(cycle) = visit(i, &deps, &mut mark, &mut Vec::new()) {
                return Err(LoadError::CyclicAxioms(
                    cycle.into_iter().map(|k| axioms[k].name.clone()).collect(),
                ));
            }
        }
    }
    Ok(())
}

/// Parses and validates a domain file.
pub fn load_domain(text: &str) -> Result<Domain, LoadError> {
    let file: DomainFile = serde_json::from_str(text)?;

    let mut objects = file.objects;
    for list in objects.values_mut() {
        list.sort();
        list.dedup();
    }
    let constants: BTreeSet<String> = objects.values().flatten().cloned().collect();
    for c in &constants {
        if c.is_empty() || !c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_') {
            return Err(LoadError::Invalid {
                context: "objects".into(),
                message: format!("`{c}` is not a valid object name"),
            });
        }
    }

    // Axiom heads first so every later condition can reference them.
    let mut axiom_heads = Vec::new();
    for (i, a) in file.axioms.iter().enumerate() {
        let ctx = format!("axiom #{}", i + 1);
        axiom_heads.push(parse_head(&ctx, &a.head)?);
    }
    check_unique("axiom", axiom_heads.iter().map(|(n, _)| n.as_str()))?;
    for (name, _) in &axiom_heads {
        if file.predicates.contains_key(name) {
            return Err(LoadError::Duplicate {
                kind: "predicate/axiom name",
                symbol: name.clone(),
            });
        }
    }
    let axiom_arity: HashMap<String, usize> = axiom_heads
        .iter()
        .map(|(n, p)| (n.clone(), p.len()))
        .collect();

    let checker = Checker {
        predicates: &file.predicates,
        axiom_arity: &axiom_arity,
        constants: &constants,
    };

    let mut axioms = Vec::new();
    for ((name, params), a) in axiom_heads.into_iter().zip(&file.axioms) {
        let ctx = format!("axiom {name}");
        let body = syntax(&ctx, parse_formula(&a.body))?;
        let mut scope = params.clone();
        checker.formula(&ctx, &body, &mut scope, &objects)?;
        axioms.push(Axiom { name, params, body });
    }
    check_axioms_acyclic(&axioms)?;

    let mut actions = Vec::new();
    for (i, a) in file.actions.iter().enumerate() {
        let (name, params) = parse_head(&format!("action #{}", i + 1), &a.head)?;
        let ctx = format!("action {name}");
        let preconditions =
            checker.literals(&format!("{ctx} precondition"), &a.preconditions, &params)?;
        let effect_atoms = |kind: &str, texts: &[String]| -> Result<Vec<Atom>, LoadError> {
            texts
                .iter()
                .map(|t| {
                    let c = format!("{ctx} {kind}");
                    let atom = syntax(&c, parse_atom(t))?;
                    checker.atom(&c, &atom, false)?;
                    Checker::vars_in_scope(&c, &atom, &params)?;
                    Ok(atom)
                })
                .collect()
        };
        let add = effect_atoms("add", &a.add)?;
        let delete = effect_atoms("delete", &a.delete)?;
        actions.push(ActionSchema {
            name,
            params,
            preconditions,
            add,
            delete,
        });
    }

    let mut compound_tasks = Vec::new();
    for (i, c) in file.compound_tasks.iter().enumerate() {
        let (name, params) = parse_head(&format!("compound task #{}", i + 1), &c.head)?;
        let ctx = format!("compound task {name}");
        let preconditions =
            checker.literals(&format!("{ctx} precondition"), &c.preconditions, &params)?;
        let effects = checker.literals(&format!("{ctx} effect"), &c.effects, &params)?;
        compound_tasks.push(CompoundTaskSchema {
            name,
            params,
            preconditions,
            effects,
        });
    }

    check_unique(
        "task name",
        actions
            .iter()
            .map(|a| a.name.as_str())
            .chain(compound_tasks.iter().map(|c| c.name.as_str())),
    )?;

    let task_arity: HashMap<&str, usize> = actions
        .iter()
        .map(|a| (a.name.as_str(), a.params.len()))
        .chain(
            compound_tasks
                .iter()
                .map(|c| (c.name.as_str(), c.params.len())),
        )
        .collect();
    let compound_arity: HashMap<&str, usize> = compound_tasks
        .iter()
        .map(|c| (c.name.as_str(), c.params.len()))
        .collect();

    let mut methods = Vec::new();
    for m in &file.methods {
        let ctx = format!("method {}", m.name);
        let head = syntax(&ctx, parse_atom(&m.task))?;
        let Some(&arity) = compound_arity.get(head.predicate.as_str()) else {
            return Err(LoadError::Undeclared {
                context: ctx,
                kind: "compound task",
                symbol: head.predicate,
            });
        };
        if arity != head.args.len() {
            return Err(LoadError::Arity {
                context: ctx,
                symbol: head.predicate,
                expected: arity,
                found: head.args.len(),
            });
        }
        for t in &head.args {
            if let Term::Constant(c) = t {
                if !constants.contains(c) {
                    return Err(LoadError::Undeclared {
                        context: ctx,
                        kind: "constant",
                        symbol: c.clone(),
                    });
                }
            }
        }
        let mut extra = Vec::new();
        for e in &m.extra_params {
            extra.push(parse_var(&ctx, e)?);
        }

        // Variables bound so far, in binding order: head, then each positive
        // literal in turn. Negative literals need all their variables bound.
        let mut bound: Vec<String> = head.variables().map(str::to_string).collect();
        bound.dedup();
        let mut preconditions = Vec::new();
        for (i, text) in m.preconditions.iter().enumerate() {
            let c = format!("{ctx} precondition #{}", i + 1);
            let lit = syntax(&c, parse_literal(text))?;
            checker.atom(&c, &lit.atom, true)?;
            for v in lit.atom.variables() {
                if bound.iter().any(|b| b == v) {
                    continue;
                }
                if !lit.positive {
                    return Err(LoadError::UnboundVariable {
                        context: c,
                        var: v.to_string(),
                    });
                }
                if !extra.iter().any(|e| e == v) {
                    return Err(LoadError::Invalid {
                        context: c,
                        message: format!(
                            "?{v} is neither a task parameter nor listed in extra_params"
                        ),
                    });
                }
                bound.push(v.to_string());
            }
            preconditions.push(lit);
        }
        for e in &extra {
            if !bound.contains(e) {
                return Err(LoadError::UnboundVariable {
                    context: format!("{ctx} extra_params"),
                    var: e.clone(),
                });
            }
        }

        let mut subtasks = Vec::new();
        for (i, text) in m.subtasks.iter().enumerate() {
            let c = format!("{ctx} subtask #{}", i + 1);
            let atom = syntax(&c, parse_atom(text))?;
            let Some(&arity) = task_arity.get(atom.predicate.as_str()) else {
                return Err(LoadError::Undeclared {
                    context: c,
                    kind: "task",
                    symbol: atom.predicate,
                });
            };
            if arity != atom.args.len() {
                return Err(LoadError::Arity {
                    context: c,
                    symbol: atom.predicate,
                    expected: arity,
                    found: atom.args.len(),
                });
            }
            for t in &atom.args {
                match t {
                    Term::Variable(v) if !bound.contains(v) => {
                        return Err(LoadError::UnboundVariable {
                            context: c,
                            var: v.clone(),
                        })
                    }
                    Term::Constant(k) if !constants.contains(k) => {
                        return Err(LoadError::Undeclared {
                            context: c,
                            kind: "constant",
                            symbol: k.clone(),
                        })
                    }
                    _ => {}
                }
            }
            subtasks.push(TaskTemplate {
                name: atom.predicate,
                args: atom.args,
            });
        }

        methods.push(Method {
            name: m.name.clone(),
            task: TaskTemplate {
                name: head.predicate,
                args: head.args,
            },
            extra_params: extra,
            preconditions,
            subtasks,
        });
    }
    check_unique("method", methods.iter().map(|m| m.name.as_str()))?;

    let axiom_index = axioms
        .iter()
        .enumerate()
        .map(|(i, a)| (a.name.clone(), i))
        .collect();
    let action_index = actions
        .iter()
        .enumerate()
        .map(|(i, a)| (a.name.clone(), i))
        .collect();
    let compound_index = compound_tasks
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.clone(), i))
        .collect();

    Ok(Domain {
        name: file.name,
        predicates: file.predicates,
        objects,
        constants: constants.into_iter().collect(),
        axioms,
        actions,
        compound_tasks,
        methods,
        axiom_index,
        action_index,
        compound_index,
    })
}

fn ground_atom_text(
    context: &str,
    text: &str,
    domain: &Domain,
) -> Result<(String, Vec<String>), LoadError> {
    let atom = syntax(context, parse_atom(text))?;
    let mut args = Vec::new();
    for t in atom.args {
        match t {
            Term::Constant(c) if domain.is_constant(&c) => args.push(c),
            Term::Constant(c) => {
                return Err(LoadError::Undeclared {
                    context: context.to_string(),
                    kind: "constant",
                    symbol: c,
                })
            }
            Term::Variable(_) => {
                return Err(LoadError::NotGround {
                    context: context.to_string(),
                    text: text.to_string(),
                })
            }
        }
    }
    Ok((atom.predicate, args))
}

/// Parses a problem file against `domain`. Problem-level objects are
/// validated together with the domain's; see [`load_instance`] to obtain
/// the merged domain.
pub fn load_problem(domain: &Domain, text: &str) -> Result<Problem, LoadError> {
    let file: ProblemFile = serde_json::from_str(text)?;
    let mut merged = domain.clone();
    merged.add_objects(&file.objects);

    let mut state = State::new();
    for (i, text) in file.initial_state.iter().enumerate() {
        let ctx = format!("initial_state #{}", i + 1);
        let (predicate, args) = ground_atom_text(&ctx, text, &merged)?;
        match merged.predicates().get(&predicate) {
            Some(&n) if n == args.len() => {}
            Some(&n) => {
                return Err(LoadError::Arity {
                    context: ctx,
                    symbol: predicate,
                    expected: n,
                    found: args.len(),
                })
            }
            None => {
                return Err(LoadError::Undeclared {
                    context: ctx,
                    kind: "predicate",
                    symbol: predicate,
                })
            }
        }
        state.insert(Fact { predicate, args });
    }

    let mut tasks = Vec::new();
    for (i, text) in file.task_list.iter().enumerate() {
        let ctx = format!("task_list #{}", i + 1);
        let (name, args) = ground_atom_text(&ctx, text, &merged)?;
        let task = merged
            .ground_task(TaskInstance { name, args })
            .map_err(|e| LoadError::Invalid {
                context: ctx,
                message: e.to_string(),
            })?;
        tasks.push(task);
    }

    Ok(Problem {
        name: file.name,
        objects: file.objects,
        initial_state: state,
        tasks,
    })
}

/// Loads a domain and a problem, returning the domain extended with the
/// problem's objects.
pub fn load_instance(
    domain_text: &str,
    problem_text: &str,
) -> Result<(Domain, Problem), LoadError> {
    let mut domain = load_domain(domain_text)?;
    let problem = load_problem(&domain, problem_text)?;
    domain.add_objects(&problem.objects);
    Ok((domain, problem))
}
