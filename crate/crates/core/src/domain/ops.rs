use super::eval::{evaluate, ground_atom, satisfiers, unify};
use super::types::{Binding, GroundLiteral, GroundTask, Literal, Method, State, TaskInstance};
use super::{Domain, DomainError};

/// Result of applying a primitive task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transition {
    Applied(State),
    Inapplicable,
}

impl Transition {
    pub fn into_state(self) -> Option<State> {
        match self {
            Transition::Applied(s) => Some(s),
            Transition::Inapplicable => None,
        }
    }
}

fn bind_params(params: &[String], args: &[String]) -> Binding {
    params.iter().cloned().zip(args.iter().cloned()).collect()
}

/// Applies a primitive or verifier task. `state` is never modified; the
/// successor is `(state - delete) + add`. A ground instance whose add and
/// delete lists overlap is treated as inapplicable.
pub fn apply_action(
    domain: &Domain,
    state: &State,
    task: &GroundTask,
) -> Result<Transition, DomainError> {
    match task {
        GroundTask::Compound(t) => Err(DomainError::NotPrimitive(t.to_string())),
        GroundTask::Verifier(t) => {
            let schema = domain
                .compound_task(&t.name)
                .filter(|c| c.params.len() == t.args.len())
                .ok_or_else(|| DomainError::UnknownTask(t.to_string()))?;
            if schema.effects.is_empty() {
                return Err(DomainError::MissingSemantics(t.to_string()));
            }
            let b = bind_params(&schema.params, &t.args);
            for eff in &schema.effects {
                if !evaluate(domain, state, eff, &b)? {
                    return Ok(Transition::Inapplicable);
                }
            }
            Ok(Transition::Applied(state.clone()))
        }
        GroundTask::Primitive(t) => {
            let schema = domain
                .action(&t.name)
                .filter(|a| a.params.len() == t.args.len())
                .ok_or_else(|| DomainError::UnknownAction(t.to_string()))?;
            let b = bind_params(&schema.params, &t.args);
            for pre in &schema.preconditions {
                if !evaluate(domain, state, pre, &b)? {
                    return Ok(Transition::Inapplicable);
                }
            }
            let add = schema
                .add
                .iter()
                .map(|a| ground_atom(a, &b))
                .collect::<Result<Vec<_>, _>>()?;
            let delete = schema
                .delete
                .iter()
                .map(|a| ground_atom(a, &b))
                .collect::<Result<Vec<_>, _>>()?;
            if add.iter().any(|f| delete.contains(f)) {
                return Ok(Transition::Inapplicable);
            }
            let mut next = state.clone();
            for f in &delete {
                next.remove(f);
            }
            for f in add {
                next.insert(f);
            }
            Ok(Transition::Applied(next))
        }
    }
}

/// One applicable instance of a method.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub method: String,
    pub binding: Binding,
    pub subtasks: Vec<GroundTask>,
}

/// Every (method, binding) pair that decomposes `task` in `state`, in
/// method-list order and then satisfier order.
pub fn applicable_decompositions(
    domain: &Domain,
    state: &State,
    task: &TaskInstance,
    methods: &[Method],
) -> Result<Vec<Decomposition>, DomainError> {
    if domain.compound_task(&task.name).is_none() {
        return Err(DomainError::NotCompound(task.to_string()));
    }
    let mut out = Vec::new();
    for m in methods.iter().filter(|m| m.task.name == task.name) {
        let Some(seed) = unify(&m.task.args, &task.args, &Binding::new()) else {
            continue;
        };
        for binding in satisfiers(domain, state, &m.preconditions, &seed)? {
            let subtasks = m
                .subtasks
                .iter()
                .map(|tpl| {
                    let fact = ground_atom(
                        &super::types::Atom {
                            predicate: tpl.name.clone(),
                            args: tpl.args.clone(),
                        },
                        &binding,
                    )?;
                    domain.ground_task(TaskInstance {
                        name: fact.predicate,
                        args: fact.args,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.push(Decomposition {
                method: m.name.clone(),
                binding,
                subtasks,
            });
        }
    }
    Ok(out)
}

/// Builds the verifier for a compound task: an effect-free primitive whose
/// preconditions are the task's grounded effects.
pub fn make_verifier(domain: &Domain, task: &GroundTask) -> Result<GroundTask, DomainError> {
    let GroundTask::Compound(t) = task else {
        return Err(DomainError::NotCompound(task.to_string()));
    };
    let schema = domain
        .compound_task(&t.name)
        .filter(|c| c.params.len() == t.args.len())
        .ok_or_else(|| DomainError::UnknownTask(t.to_string()))?;
    if schema.effects.is_empty() {
        return Err(DomainError::MissingSemantics(t.to_string()));
    }
    Ok(GroundTask::Verifier(t.clone()))
}

/// Grounds literals with the given parameter assignment.
pub fn ground_literals(
    literals: &[Literal],
    params: &[String],
    args: &[String],
) -> Result<Vec<GroundLiteral>, DomainError> {
    let b = bind_params(params, args);
    literals
        .iter()
        .map(|l| {
            Ok(GroundLiteral {
                positive: l.positive,
                fact: ground_atom(&l.atom, &b)?,
            })
        })
        .collect()
}
