//! Two-stage prompt chain. Stage 1 asks for a free-form sub-task breakdown;
//! stage 2 asks the model to map that breakdown onto operator predicates,
//! one per line.

use std::fmt::Write as _;

use crate::domain::{ActionSchema, Axiom};

use super::{join, OracleRequest};

/// Bumped whenever the prompt text or renderings change; part of every
/// cache fingerprint.
pub const PROMPT_VERSION: &str = "htn-prompt-v1";

pub const SYSTEM_PROMPT: &str = "You are an AI planner specializing in HTN planning.";

/// A system message plus a single user message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

impl Prompt {
    /// Flat text form, used for golden files and cache records.
    pub fn to_text(&self) -> String {
        format!("[system]\n{}\n[user]\n{}\n", self.system, self.user)
    }
}

/// Operator listing as readable pseudo-code, one block per schema, in
/// domain order.
pub fn render_operators(actions: &[ActionSchema]) -> String {
    let mut out = String::new();
    for a in actions {
        out.push('\n');
        let params: Vec<String> = a.params.iter().map(|p| format!("?{p}")).collect();
        let _ = writeln!(out, "operator {}({}):", a.name, params.join(", "));
        let _ = writeln!(
            out,
            "    preconditions: {}",
            or_none(&join(&a.preconditions))
        );
        let _ = writeln!(out, "    add: {}", or_none(&join(&a.add)));
        let _ = write!(out, "    delete: {}", or_none(&join(&a.delete)));
    }
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

/// Axiom definitions, one per line; empty when there are none.
pub fn render_axioms(axioms: &[Axiom]) -> String {
    let mut out = String::new();
    for a in axioms {
        let _ = write!(out, "\n{a}");
    }
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

fn or_none(s: &str) -> &str {
    if s.is_empty() {
        "none"
    } else {
        s
    }
}

fn state_text(request: &OracleRequest<'_>) -> String {
    let facts: Vec<String> = request.state.iter().map(|f| f.to_string()).collect();
    or_none(&facts.join(", ")).to_string()
}

pub fn build_prompt_stage1(request: &OracleRequest<'_>) -> Prompt {
    let operators = render_operators(request.domain.actions());
    let axioms = render_axioms(request.domain.axioms());
    let mut user = String::new();
    user.push_str(
        "The domain is defined by the following operators (each defined as a  Python function):",
    );
    user.push_str(&operators);
    user.push_str(". Some of the preconditions in the operators are defined by the following python functions: ");
    user.push_str(&axioms);
    user.push_str(". Provide the Sub-Tasks Breakdown for the following task: ");
    user.push_str(&request.task.to_string());
    user.push_str(". Here are the preconditions of the task: ");
    user.push_str(or_none(&join(&request.preconditions)));
    user.push_str(". Here are the effects of the task: ");
    user.push_str(or_none(&join(&request.effects)));
    user.push_str(". Here is the current state: ");
    user.push_str(&state_text(request));
    user.push_str(" Provide a complete and logically valid decomposition using the operators and functions provided.");
    user.push_str(" Do not invent new operators. Your output should be a step-by-step list of sub-tasks in logical order,");
    user.push_str(" using arguments ground in the current state.");
    Prompt {
        system: SYSTEM_PROMPT.to_string(),
        user,
    }
}

/// The follow-up prompt; `stage1_response` is the assistant text returned
/// for [`build_prompt_stage1`].
pub fn build_prompt_stage2(request: &OracleRequest<'_>, stage1_response: &str) -> Prompt {
    let operators = render_operators(request.domain.actions());
    let axioms = render_axioms(request.domain.axioms());
    let mut user = String::new();
    user.push_str(". You generated the following response:");
    user.push_str(stage1_response);
    user.push_str("to my request to provide the Sub-Tasks Breakdown for the following task: ");
    user.push_str(&request.task.to_string());
    user.push_str(". I also gave you the preconditions of the task: ");
    user.push_str(or_none(&join(&request.preconditions)));
    user.push_str(" and the effects of the task: ");
    user.push_str(or_none(&join(&request.effects)));
    user.push_str(".and gave you the state: ");
    user.push_str(&state_text(request));
    user.push_str("and gave you the domain  defined by the following operators (each defined as a  Python function):");
    user.push_str(&operators);
    user.push_str(". I also gave you the following python functions which are called to check some preconditions and to check some effects: ");
    user.push_str(&axioms);
    user.push_str(". As a follow-up, can you map  the subtasks you generated with the operators I provided, please? please list the operator names as predicates,");
    user.push_str(" for the match you generate use only the predicate names of the operators and the arguments in your sub-task breakdown");
    user.push_str(" Always respond with a compact, machine-readable format using predicate form. ");
    user.push_str(" Avoid explanations or extra text unless explicitly requested. ");
    user.push_str(" When generating your output, list only the predicates in the form: ");
    user.push_str(" predicate(arg1, arg2, ...)");
    user.push_str(" where predicate is name of an operator I provided");
    user.push_str(
        " Separate predicates by newlines. Do not include explanations, headings, or descriptions.",
    );
    user.push_str(
        " Use only the operator names I provided. Ensure that every predicate corresponds exactly",
    );
    user.push_str(
        " to one of those operators and that all arguments match those in your sub-task breakdown",
    );
    Prompt {
        system: SYSTEM_PROMPT.to_string(),
        user,
    }
}
