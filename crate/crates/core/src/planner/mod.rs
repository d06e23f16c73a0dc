//! Ordered depth-first task decomposition with verifier injection, oracle
//! fallback and a global loop guard.
//!
//! The search keeps an agenda of ground tasks. Primitive tasks (verifiers
//! included) are applied in order. A compound task is first expanded with
//! every applicable method instance; if none of those lead to a plan, the
//! oracle is asked once for a primitive sequence. Whatever the source, the
//! subtasks are followed by the compound task's verifier before the rest of
//! the agenda, so a wrong decomposition can never end up in a plan.

mod trace;

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::domain::{
    applicable_decompositions, apply_action, make_verifier, Domain, DomainError, GroundTask,
    Problem, State, StateHash, TaskInstance, Transition,
};
use crate::oracle::{DecompositionOracle, OracleFailure, OracleRequest};

pub use trace::{write_jsonl, TraceEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Maximum nesting of compound expansions.
    pub depth_limit: usize,
    /// Maximum number of oracle queries per search.
    pub oracle_budget: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            depth_limit: 200,
            oracle_budget: 25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoPlanReason {
    /// Every alternative was tried and failed.
    Exhausted,
    /// A branch was pruned because a (state, compound task) pair recurred.
    LoopCut,
    /// The oracle could not be queried (budget spent or transport down).
    OracleBudget,
    /// A branch hit the nesting limit.
    DepthLimit,
}

impl fmt::Display for NoPlanReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoPlanReason::Exhausted => "exhausted",
            NoPlanReason::LoopCut => "loop-cut",
            NoPlanReason::OracleBudget => "oracle-budget",
            NoPlanReason::DepthLimit => "depth-limit",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub oracle_calls: usize,
    /// Agenda entries popped.
    pub nodes_expanded: usize,
    pub oracle_failures: usize,
    pub transport_failures: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExpansionSource {
    Method(String),
    Oracle,
}

impl fmt::Display for ExpansionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpansionSource::Method(m) => f.write_str(m),
            ExpansionSource::Oracle => f.write_str("oracle"),
        }
    }
}

/// A compound-task expansion on the successful path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expansion {
    pub id: usize,
    pub parent: Option<usize>,
    pub task: TaskInstance,
    pub source: ExpansionSource,
    /// Index of the top-level task this expansion belongs to.
    pub root: usize,
    /// Index into [`Plan::steps`] of the first step it produced.
    pub start: usize,
}

/// An applied primitive or verifier task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub task: GroundTask,
    pub root: usize,
    /// The expansion that introduced it; `None` for top-level primitives.
    pub parent: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plan {
    /// Every applied task in order, verifiers included.
    pub steps: Vec<Step>,
    /// Number of non-verifier actions contributed by each top-level task.
    pub segments: Vec<usize>,
    /// Successful expansions in the order they were made.
    pub derivation: Vec<Expansion>,
}

impl Plan {
    /// The plan proper: applied primitive tasks without verifiers.
    pub fn actions(&self) -> Vec<GroundTask> {
        self.steps
            .iter()
            .filter(|s| !s.task.is_verifier())
            .map(|s| s.task.clone())
            .collect()
    }

    pub fn used_method(&self, method: &str) -> bool {
        self.derivation
            .iter()
            .any(|e| matches!(&e.source, ExpansionSource::Method(m) if m == method))
    }

    pub fn expanded_task(&self, task: &str) -> bool {
        self.derivation.iter().any(|e| e.task.name == task)
    }

    pub fn oracle_expansions(&self) -> usize {
        self.derivation
            .iter()
            .filter(|e| e.source == ExpansionSource::Oracle)
            .count()
    }

    /// Indented text rendering of the derivation, one node per line.
    pub fn render_tree(&self) -> String {
        let mut out = String::new();
        self.render_children(None, 0, &mut out);
        out
    }

    fn render_children(&self, parent: Option<usize>, indent: usize, out: &mut String) {
        let mut children: Vec<(usize, Option<&Expansion>, Option<&Step>)> = Vec::new();
        for e in self.derivation.iter().filter(|e| e.parent == parent) {
            children.push((e.start, Some(e), None));
        }
        for (i, s) in self
            .steps
            .iter()
            .enumerate()
            .filter(|(_, s)| s.parent == parent)
        {
            children.push((i, None, Some(s)));
        }
        children.sort_by_key(|c| c.0);
        for (_, e, s) in children {
            out.push_str(&"  ".repeat(indent));
            if let Some(e) = e {
                out.push_str(&format!("{} [{}]\n", e.task, e.source));
                self.render_children(Some(e.id), indent + 1, out);
            } else if let Some(s) = s {
                out.push_str(&format!("{}\n", s.task));
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Plan(Plan),
    NoPlan(NoPlanReason),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanResult {
    pub outcome: Outcome,
    pub stats: Stats,
    /// Empty unless tracing was requested.
    pub trace: Vec<TraceEvent>,
}

impl PlanResult {
    pub fn plan(&self) -> Option<&Plan> {
        match &self.outcome {
            Outcome::Plan(p) => Some(p),
            Outcome::NoPlan(_) => None,
        }
    }

    pub fn is_plan(&self) -> bool {
        self.plan().is_some()
    }

    pub fn no_plan_reason(&self) -> Option<NoPlanReason> {
        match self.outcome {
            Outcome::NoPlan(r) => Some(r),
            Outcome::Plan(_) => None,
        }
    }
}

pub struct Planner<'a> {
    domain: &'a Domain,
    oracle: &'a dyn DecompositionOracle,
    limits: Limits,
    record_trace: bool,
}

impl<'a> Planner<'a> {
    pub fn new(domain: &'a Domain, oracle: &'a dyn DecompositionOracle) -> Self {
        Planner {
            domain,
            oracle,
            limits: Limits::default(),
            record_trace: false,
        }
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }

    pub fn plan_problem(&self, problem: &Problem) -> Result<PlanResult, DomainError> {
        self.plan(&problem.initial_state, &problem.tasks)
    }

    /// Searches for a plan for `tasks` from `state`.
    pub fn plan(&self, state: &State, tasks: &[GroundTask]) -> Result<PlanResult, DomainError> {
        let mut search = Search {
            domain: self.domain,
            oracle: self.oracle,
            limits: self.limits,
            record: self.record_trace,
            visited: HashSet::new(),
            stats: Stats::default(),
            trace: Vec::new(),
            next_id: 0,
            hit_loop: false,
            hit_budget: false,
            hit_depth: false,
        };
        let agenda: Vec<Item> = tasks
            .iter()
            .enumerate()
            .rev()
            .map(|(root, task)| Item {
                task: task.clone(),
                root,
                parent: None,
                depth: 0,
            })
            .collect();
        let found = search.seek(state.clone(), agenda, Vec::new())?;
        let outcome = match found {
            Some(mut success) => {
                success.derivation.sort_by_key(|e| e.id);
                let mut segments = vec![0; tasks.len()];
                for s in success.steps.iter().filter(|s| !s.task.is_verifier()) {
                    segments[s.root] += 1;
                }
                let plan = Plan {
                    steps: success.steps,
                    segments,
                    derivation: success.derivation,
                };
                if search.record {
                    search.trace.push(TraceEvent::Solution {
                        actions: plan.actions().iter().map(|a| a.to_string()).collect(),
                        segments: plan.segments.clone(),
                    });
                }
                Outcome::Plan(plan)
            }
            None => {
                let reason = if search.hit_loop {
                    NoPlanReason::LoopCut
                } else if search.hit_budget {
                    NoPlanReason::OracleBudget
                } else if search.hit_depth {
                    NoPlanReason::DepthLimit
                } else {
                    NoPlanReason::Exhausted
                };
                if search.record {
                    search.trace.push(TraceEvent::NoPlan {
                        reason: reason.to_string(),
                    });
                }
                Outcome::NoPlan(reason)
            }
        };
        Ok(PlanResult {
            outcome,
            stats: search.stats,
            trace: search.trace,
        })
    }
}

#[derive(Clone, Debug)]
struct Item {
    task: GroundTask,
    root: usize,
    parent: Option<usize>,
    depth: usize,
}

struct Success {
    steps: Vec<Step>,
    derivation: Vec<Expansion>,
}

struct Search<'a> {
    domain: &'a Domain,
    oracle: &'a dyn DecompositionOracle,
    limits: Limits,
    record: bool,
    visited: HashSet<(StateHash, TaskInstance)>,
    stats: Stats,
    trace: Vec<TraceEvent>,
    next_id: usize,
    hit_loop: bool,
    hit_budget: bool,
    hit_depth: bool,
}

impl Search<'_> {
    fn emit(&mut self, event: impl FnOnce() -> TraceEvent) {
        if self.record {
            self.trace.push(event());
        }
    }

    /// Runs the agenda (top of stack last) to completion or failure.
    fn seek(
        &mut self,
        mut state: State,
        mut agenda: Vec<Item>,
        mut steps: Vec<Step>,
    ) -> Result<Option<Success>, DomainError> {
        while let Some(item) = agenda.pop() {
            self.stats.nodes_expanded += 1;
            if item.task.is_compound() {
                return self.expand(state, item, agenda, steps);
            }
            let transition = apply_action(self.domain, &state, &item.task)?;
            let verifier = item.task.is_verifier();
            let depth = item.depth;
            let hash = state.hash().to_string();
            let name = || item.task.instance().to_string();
            match transition {
                Transition::Applied(next) => {
                    self.emit(|| match verifier {
                        true => TraceEvent::VerifierPass {
                            depth,
                            state: hash,
                            task: name(),
                        },
                        false => TraceEvent::Apply {
                            depth,
                            state: hash,
                            action: name(),
                        },
                    });
                    state = next;
                    steps.push(Step {
                        task: item.task,
                        root: item.root,
                        parent: item.parent,
                    });
                }
                Transition::Inapplicable => {
                    self.emit(|| match verifier {
                        true => TraceEvent::VerifierFail {
                            depth,
                            state: hash,
                            task: name(),
                        },
                        false => TraceEvent::ApplyFail {
                            depth,
                            state: hash,
                            action: name(),
                        },
                    });
                    return Ok(None);
                }
            }
        }
        Ok(Some(Success {
            steps,
            derivation: Vec::new(),
        }))
    }

    fn expand(
        &mut self,
        state: State,
        item: Item,
        agenda: Vec<Item>,
        steps: Vec<Step>,
    ) -> Result<Option<Success>, DomainError> {
        let GroundTask::Compound(task) = &item.task else {
            unreachable!("expand is only called on compound tasks");
        };
        let depth = item.depth;
        let hash = state.hash();
        if depth >= self.limits.depth_limit {
            self.hit_depth = true;
            self.emit(|| TraceEvent::LimitHit {
                depth,
                state: hash.to_string(),
                task: task.to_string(),
                limit: "depth".into(),
            });
            return Ok(None);
        }
        if !self.visited.insert((hash, task.clone())) {
            self.hit_loop = true;
            self.emit(|| TraceEvent::LoopCut {
                depth,
                state: hash.to_string(),
                task: task.to_string(),
            });
            return Ok(None);
        }
        self.emit(|| TraceEvent::Expand {
            depth,
            state: hash.to_string(),
            task: task.to_string(),
        });
        let id = self.next_id;
        self.next_id += 1;
        let verifier = make_verifier(self.domain, &item.task)?;
        let child = |t: GroundTask| Item {
            task: t,
            root: item.root,
            parent: Some(id),
            depth: depth + 1,
        };
        let record = |source: ExpansionSource| Expansion {
            id,
            parent: item.parent,
            task: task.clone(),
            source,
            root: item.root,
            start: steps.len(),
        };

        let decompositions =
            applicable_decompositions(self.domain, &state, task, self.domain.methods())?;
        for d in decompositions {
            self.emit(|| TraceEvent::MethodApplied {
                depth,
                state: hash.to_string(),
                task: task.to_string(),
                method: d.method.clone(),
                binding: d.binding.as_map().clone(),
                subtasks: d.subtasks.iter().map(|t| t.to_string()).collect(),
            });
            let mut next = agenda.clone();
            next.push(child(verifier.clone()));
            next.extend(d.subtasks.into_iter().rev().map(child));
            if let Some(mut found) = self.seek(state.clone(), next, steps.clone())? {
                found
                    .derivation
                    .push(record(ExpansionSource::Method(d.method)));
                return Ok(Some(found));
            }
            self.emit(|| TraceEvent::Backtrack {
                depth,
                state: hash.to_string(),
                task: task.to_string(),
                from: d.method.clone(),
            });
        }

        if self.stats.oracle_calls >= self.limits.oracle_budget {
            self.hit_budget = true;
            self.emit(|| TraceEvent::LimitHit {
                depth,
                state: hash.to_string(),
                task: task.to_string(),
                limit: "oracle-budget".into(),
            });
            return Ok(None);
        }
        self.stats.oracle_calls += 1;
        let call = self.stats.oracle_calls;
        self.emit(|| TraceEvent::OracleQuery {
            depth,
            state: hash.to_string(),
            task: task.to_string(),
            call,
        });
        let request = OracleRequest::new(self.domain, &state, task)?;
        let answer = self.oracle.decompose(&request).and_then(|r| {
            match r
                .tasks
                .iter()
                .find(|t| !matches!(t, GroundTask::Primitive(_)))
            {
                Some(t) => Err(OracleFailure::NoAnswer(format!("non-primitive task {t}"))),
                None => Ok(r),
            }
        });
        match answer {
            Ok(response) => {
                self.emit(|| TraceEvent::OracleAnswer {
                    depth,
                    state: hash.to_string(),
                    task: task.to_string(),
                    source: response.source.to_string(),
                    subtasks: response.tasks.iter().map(|t| t.to_string()).collect(),
                });
                let mut next = agenda;
                next.push(child(verifier));
                next.extend(response.tasks.into_iter().rev().map(child));
                if let Some(mut found) = self.seek(state, next, steps.clone())? {
                    found.derivation.push(record(ExpansionSource::Oracle));
                    return Ok(Some(found));
                }
                self.emit(|| TraceEvent::Backtrack {
                    depth,
                    state: hash.to_string(),
                    task: task.to_string(),
                    from: "oracle".into(),
                });
            }
            Err(failure) => {
                self.stats.oracle_failures += 1;
                match failure {
                    OracleFailure::Transport(_) => {
                        self.stats.transport_failures += 1;
                        self.hit_budget = true;
                    }
                    OracleFailure::BudgetExhausted => self.hit_budget = true,
                    OracleFailure::Unparseable(_) | OracleFailure::NoAnswer(_) => {}
                }
                self.emit(|| TraceEvent::OracleFailure {
                    depth,
                    state: hash.to_string(),
                    task: task.to_string(),
                    kind: failure.kind().into(),
                    detail: failure.to_string(),
                });
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::load_instance;
    use crate::oracle::{FailingOracle, ScriptedOracle};

    const DOMAIN: &str = r#"{
      "name": "toy",
      "predicates": {"at": 2, "open": 1},
      "objects": {"thing": ["box"], "place": ["a", "b", "c"]},
      "actions": [
        {"head": "push(?x, ?f, ?t)", "preconditions": ["at(?x, ?f)"], "add": ["at(?x, ?t)"], "delete": ["at(?x, ?f)"]},
        {"head": "jump(?x, ?f, ?t)", "preconditions": ["at(?x, ?f)", "open(?t)"], "add": ["at(?x, ?t)"], "delete": ["at(?x, ?f)"]}
      ],
      "compound_tasks": [{"head": "move(?x, ?t)", "effects": ["at(?x, ?t)"]}],
      "methods": [
        {"name": "wrong", "task": "move(?x, ?t)", "extra_params": ["?f"], "preconditions": ["at(?x, ?f)"], "subtasks": ["push(?x, ?f, c)"]},
        {"name": "right", "task": "move(?x, ?t)", "extra_params": ["?f"], "preconditions": ["at(?x, ?f)"], "subtasks": ["push(?x, ?f, ?t)"]}
      ]
    }"#;

    fn instance(tasks: &str) -> (Domain, Problem) {
        load_instance(
            DOMAIN,
            &format!(r#"{{"name": "p", "initial_state": ["at(box, a)"], "task_list": [{tasks}]}}"#),
        )
        .unwrap()
    }

    #[test]
    fn empty_task_list_gives_empty_plan() {
        let (d, p) = instance("");
        let r = Planner::new(&d, &FailingOracle).plan_problem(&p).unwrap();
        assert_eq!(r.plan().unwrap().actions(), vec![]);
        assert_eq!(r.stats.oracle_calls, 0);
    }

    #[test]
    fn failed_verifier_moves_on_to_next_method() {
        let (d, p) = instance(r#""move(box, b)""#);
        let r = Planner::new(&d, &FailingOracle)
            .with_trace(true)
            .plan_problem(&p)
            .unwrap();
        let plan = r.plan().unwrap();
        let names: Vec<String> = plan.actions().iter().map(|t| t.to_string()).collect();
        assert_eq!(names, ["push(box,a,b)"]);
        assert!(plan.used_method("right"));
        assert!(!plan.used_method("wrong"));
        let kinds: Vec<&str> = r.trace.iter().map(|e| e.name()).collect();
        assert_eq!(
            kinds,
            [
                "expand",
                "method-applied",
                "apply",
                "verifier-fail",
                "backtrack",
                "method-applied",
                "apply",
                "verifier-pass",
                "solution"
            ]
        );
    }

    #[test]
    fn inapplicable_primitive_fails() {
        let (d, p) = instance(r#""push(box, b, c)""#);
        let r = Planner::new(&d, &FailingOracle).plan_problem(&p).unwrap();
        assert_eq!(r.no_plan_reason(), Some(NoPlanReason::Exhausted));
    }

    #[test]
    fn oracle_fills_in_when_methods_are_missing() {
        let (mut d, p) = instance(r#""move(box, c)""#);
        d.retain_methods(|_| false);
        let fixture = r#"{"decompositions": [{"task": "move(box, c)", "subtasks": ["push(box, a, b)", "push(box, b, c)"]}]}"#;
        let oracle = ScriptedOracle::from_json(fixture, &d).unwrap();
        let r = Planner::new(&d, &oracle).plan_problem(&p).unwrap();
        let plan = r.plan().unwrap();
        assert_eq!(plan.actions().len(), 2);
        assert_eq!(plan.oracle_expansions(), 1);
        assert_eq!(r.stats.oracle_calls, 1);
        assert_eq!(plan.segments, [2]);
        assert_eq!(
            plan.render_tree(),
            "move(box,c) [oracle]\n  push(box,a,b)\n  push(box,b,c)\n  verify[move(box,c)]\n"
        );
    }

    #[test]
    fn budget_zero_reports_oracle_budget() {
        let (mut d, p) = instance(r#""move(box, c)""#);
        d.retain_methods(|_| false);
        let r = Planner::new(&d, &FailingOracle)
            .with_limits(Limits {
                depth_limit: 10,
                oracle_budget: 0,
            })
            .plan_problem(&p)
            .unwrap();
        assert_eq!(r.no_plan_reason(), Some(NoPlanReason::OracleBudget));
        assert_eq!(r.stats.oracle_calls, 0);
    }
}
