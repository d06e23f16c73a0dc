//! Independent plan checker.
//!
//! A plan satisfies a task list when it can be cut into one contiguous
//! segment per task such that each segment executes from the state the
//! previous one left behind and, for a compound task, ends in a state where
//! the task's effects hold. A primitive task is satisfied only by the
//! one-action segment consisting of itself.
//!
//! This module uses nothing from the planner or the oracle.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::domain::{
    apply_action, evaluate, Binding, Domain, DomainError, GroundTask, State, Transition,
};

/// Largest plan [`find_split`] will search exhaustively.
pub const MAX_SPLIT_SEARCH: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Execution {
    Completed(State),
    /// Index of the first inapplicable action.
    FailedAt(usize),
}

/// Applies `plan` left to right.
pub fn execute(
    domain: &Domain,
    state: &State,
    plan: &[GroundTask],
) -> Result<Execution, DomainError> {
    let mut current = state.clone();
    for (i, a) in plan.iter().enumerate() {
        match apply_action(domain, &current, a)? {
            Transition::Applied(next) => current = next,
            Transition::Inapplicable => return Ok(Execution::FailedAt(i)),
        }
    }
    Ok(Execution::Completed(current))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "kebab-case")]
pub enum Position {
    Action(usize),
    Task(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cause {
    InapplicableAction,
    EffectsUnsatisfied,
    PrefixMismatch,
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cause::InapplicableAction => "inapplicable-action",
            Cause::EffectsUnsatisfied => "effects-unsatisfied",
            Cause::PrefixMismatch => "prefix-mismatch",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub position: Position,
    pub cause: Cause,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub accepted: bool,
    pub failure: Option<Failure>,
}

impl Verdict {
    fn accept() -> Self {
        Verdict {
            accepted: true,
            failure: None,
        }
    }

    fn reject(position: Position, cause: Cause) -> Self {
        Verdict {
            accepted: false,
            failure: Some(Failure { position, cause }),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.failure {
            None => f.write_str("accepted"),
            Some(Failure { position, cause }) => {
                let at = match position {
                    Position::Action(i) => format!("action {i}"),
                    Position::Task(i) => format!("task {i}"),
                };
                write!(f, "rejected: {cause} at {at}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("task list may not contain verifier `{0}`")]
    VerifierTask(String),
    #[error("exhaustive split search is limited to {MAX_SPLIT_SEARCH} actions, plan has {0}")]
    TooLong(usize),
}

/// Whether `effects` of compound `task` hold in `state`.
fn effects_hold(
    domain: &Domain,
    state: &State,
    task: &GroundTask,
) -> Result<bool, ValidationError> {
    let t = task.instance();
    let schema = domain
        .compound_task(&t.name)
        .filter(|c| c.params.len() == t.args.len())
        .ok_or_else(|| DomainError::UnknownTask(t.to_string()))?;
    let binding: Binding = schema
        .params
        .iter()
        .cloned()
        .zip(t.args.iter().cloned())
        .collect();
    for eff in &schema.effects {
        if !evaluate(domain, state, eff, &binding)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks one task against one segment starting at plan offset `offset`.
fn check_segment(
    domain: &Domain,
    state: &State,
    index: usize,
    task: &GroundTask,
    segment: &[GroundTask],
    offset: usize,
) -> Result<Result<State, Verdict>, ValidationError> {
    match task {
        GroundTask::Verifier(t) => Err(ValidationError::VerifierTask(t.to_string())),
        GroundTask::Primitive(_) => {
            if segment.len() != 1 || &segment[0] != task {
                return Ok(Err(Verdict::reject(
                    Position::Task(index),
                    Cause::PrefixMismatch,
                )));
            }
            Ok(match apply_action(domain, state, task)? {
                Transition::Applied(next) => Ok(next),
                Transition::Inapplicable => Err(Verdict::reject(
                    Position::Action(offset),
                    Cause::InapplicableAction,
                )),
            })
        }
        GroundTask::Compound(_) => match execute(domain, state, segment)? {
            Execution::FailedAt(i) => Ok(Err(Verdict::reject(
                Position::Action(offset + i),
                Cause::InapplicableAction,
            ))),
            Execution::Completed(next) => {
                if effects_hold(domain, &next, task)? {
                    Ok(Ok(next))
                } else {
                    Ok(Err(Verdict::reject(
                        Position::Task(index),
                        Cause::EffectsUnsatisfied,
                    )))
                }
            }
        },
    }
}

/// Checks `plan` against `tasks` using the given segment lengths, one per
/// task.
pub fn satisfies(
    domain: &Domain,
    state: &State,
    tasks: &[GroundTask],
    plan: &[GroundTask],
    segments: &[usize],
) -> Result<Verdict, ValidationError> {
    if segments.len() != tasks.len() || segments.iter().sum::<usize>() != plan.len() {
        return Ok(Verdict::reject(
            Position::Task(segments.len().min(tasks.len())),
            Cause::PrefixMismatch,
        ));
    }
    let mut current = state.clone();
    let mut offset = 0;
    for (i, (task, &len)) in tasks.iter().zip(segments).enumerate() {
        let segment = &plan[offset..offset + len];
        match check_segment(domain, &current, i, task, segment, offset)? {
            Ok(next) => current = next,
            Err(verdict) => return Ok(verdict),
        }
        offset += len;
    }
    Ok(Verdict::accept())
}

/// Searches every way of cutting `plan` into per-task segments and returns
/// the first that satisfies `tasks`, shortest first segments first.
pub fn find_split(
    domain: &Domain,
    state: &State,
    tasks: &[GroundTask],
    plan: &[GroundTask],
) -> Result<Option<Vec<usize>>, ValidationError> {
    if plan.len() > MAX_SPLIT_SEARCH {
        return Err(ValidationError::TooLong(plan.len()));
    }
    let mut lens = Vec::with_capacity(tasks.len());
    if search(domain, state, tasks, plan, 0, &mut lens)? {
        Ok(Some(lens))
    } else {
        Ok(None)
    }
}

fn search(
    domain: &Domain,
    state: &State,
    tasks: &[GroundTask],
    plan: &[GroundTask],
    offset: usize,
    lens: &mut Vec<usize>,
) -> Result<bool, ValidationError> {
    let Some((task, rest)) = tasks.split_first() else {
        return Ok(offset == plan.len());
    };
    let remaining = plan.len() - offset;
    let min = if rest.is_empty() { remaining } else { 0 };
    for len in min..=remaining {
        let segment = &plan[offset..offset + len];
        if let Ok(next) = check_segment(domain, state, lens.len(), task, segment, offset)? {
            lens.push(len);
            if search(domain, &next, rest, plan, offset + len, lens)? {
                return Ok(true);
            }
            lens.pop();
        }
    }
    Ok(false)
}
