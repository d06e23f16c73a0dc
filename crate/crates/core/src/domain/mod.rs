//! Domain model: terms, states, action schemas, compound tasks with
//! (preconditions, effects) semantics, methods, and axioms, plus the
//! grounding and state-transition machinery the planner and validator share.

mod eval;
mod loader;
mod ops;
pub mod syntax;
mod types;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

pub use eval::{evaluate, satisfiers};
pub use loader::{load_domain, load_instance, load_problem, LoadError};
pub use ops::{
    applicable_decompositions, apply_action, ground_literals, make_verifier, Decomposition,
    Transition,
};
pub use types::{
    ActionSchema, Atom, Axiom, Binding, CompoundTaskSchema, Fact, Formula, GroundLiteral,
    GroundTask, Literal, Method, State, StateHash, TaskInstance, TaskTemplate, Term,
};

/// Errors raised while evaluating conditions or applying tasks against a
/// loaded domain. A well-formed domain only produces these for tasks that
/// did not come through the loader or the oracle parser.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("variable ?{0} is unbound")]
    UnboundVariable(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("no action schema matches `{0}`")]
    UnknownAction(String),
    #[error("no compound task matches `{0}`")]
    UnknownTask(String),
    #[error("compound task `{0}` declares no effects; it cannot be verified")]
    MissingSemantics(String),
    #[error("`{0}` is not a primitive task")]
    NotPrimitive(String),
    #[error("`{0}` is not a compound task")]
    NotCompound(String),
    #[error("unknown object type `{0}`")]
    UnknownType(String),
}

/// A validated planning domain. Construct through [`load_domain`].
#[derive(Clone, Debug)]
pub struct Domain {
    name: String,
    predicates: BTreeMap<String, usize>,
    objects: BTreeMap<String, Vec<String>>,
    constants: Vec<String>,
    axioms: Vec<Axiom>,
    actions: Vec<ActionSchema>,
    compound_tasks: Vec<CompoundTaskSchema>,
    methods: Vec<Method>,
    axiom_index: HashMap<String, usize>,
    action_index: HashMap<String, usize>,
    compound_index: HashMap<String, usize>,
}

impl Domain {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn predicates(&self) -> &BTreeMap<String, usize> {
        &self.predicates
    }

    /// Objects grouped by type; each list is sorted.
    pub fn objects(&self) -> &BTreeMap<String, Vec<String>> {
        &self.objects
    }

    pub fn objects_of(&self, ty: &str) -> Option<&[String]> {
        self.objects.get(ty).map(Vec::as_slice)
    }

    /// Every declared constant, sorted and deduplicated.
    pub fn constants(&self) -> &[String] {
        &self.constants
    }

    pub fn is_constant(&self, name: &str) -> bool {
        self.constants
            .binary_search_by(|c| c.as_str().cmp(name))
            .is_ok()
    }

    pub fn axioms(&self) -> &[Axiom] {
        &self.axioms
    }

    pub fn axiom(&self, name: &str) -> Option<&Axiom> {
        self.axiom_index.get(name).map(|&i| &self.axioms[i])
    }

    pub fn actions(&self) -> &[ActionSchema] {
        &self.actions
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.action_index.get(name).map(|&i| &self.actions[i])
    }

    pub fn compound_tasks(&self) -> &[CompoundTaskSchema] {
        &self.compound_tasks
    }

    pub fn compound_task(&self, name: &str) -> Option<&CompoundTaskSchema> {
        self.compound_index
            .get(name)
            .map(|&i| &self.compound_tasks[i])
    }

    /// All methods in file order.
    pub fn methods(&self) -> &[Method] {
        &self.methods
    }

    pub fn methods_for<'a>(&'a self, task: &'a str) -> impl Iterator<Item = &'a Method> + 'a {
        self.methods.iter().filter(move |m| m.task.name == task)
    }

    /// Classifies a task instance by looking up its name.
    pub fn ground_task(&self, instance: TaskInstance) -> Result<GroundTask, DomainError> {
        if let Some(a) = self.action(&instance.name) {
            if a.params.len() == instance.args.len() {
                return Ok(GroundTask::Primitive(instance));
            }
            return Err(DomainError::UnknownAction(instance.to_string()));
        }
        if let Some(c) = self.compound_task(&instance.name) {
            if c.params.len() == instance.args.len() {
                return Ok(GroundTask::Compound(instance));
            }
        }
        Err(DomainError::UnknownTask(instance.to_string()))
    }

    /// Keeps only the methods for which `keep` returns true.
    pub fn retain_methods(&mut self, keep: impl FnMut(&Method) -> bool) {
        self.methods.retain(keep);
    }

    /// Adds typed objects, e.g. those declared by a problem file.
    pub fn add_objects(&mut self, extra: &BTreeMap<String, Vec<String>>) {
        for (ty, names) in extra {
            let list = self.objects.entry(ty.clone()).or_default();
            list.extend(names.iter().cloned());
            list.sort();
            list.dedup();
        }
        let all: BTreeSet<String> = self.objects.values().flatten().cloned().collect();
        self.constants = all.into_iter().collect();
    }
}

/// Initial state plus the ordered task list to accomplish.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub name: String,
    pub objects: BTreeMap<String, Vec<String>>,
    pub initial_state: State,
    pub tasks: Vec<GroundTask>,
}
