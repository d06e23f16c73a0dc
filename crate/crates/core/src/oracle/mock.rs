use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::domain::syntax::{parse_atom, parse_literal};
use crate::domain::{
    apply_action, evaluate, satisfiers, Binding, Domain, GroundTask, Literal, State, TaskInstance,
    Term, Transition,
};

use super::parse::{parse_predicates, ParsePolicy};
use super::{DecompositionOracle, OracleFailure, OracleRequest, OracleResponse, ResponseSource};

fn render(tasks: &[GroundTask]) -> String {
    tasks.iter().map(|t| format!("{t}\n")).collect()
}

fn mock_response(tasks: Vec<GroundTask>) -> OracleResponse {
    let text = render(&tasks);
    OracleResponse {
        tasks,
        prompts: (String::new(), String::new()),
        raw: (String::new(), text),
        source: ResponseSource::Mock,
    }
}

/// Always fails; with it attached the planner behaves like a plain HTN
/// planner.
#[derive(Clone, Copy, Debug, Default)]
pub struct FailingOracle;

impl DecompositionOracle for FailingOracle {
    fn decompose(&self, _request: &OracleRequest<'_>) -> Result<OracleResponse, OracleFailure> {
        Err(OracleFailure::BudgetExhausted)
    }

    fn describe(&self) -> String {
        "failing".into()
    }
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("malformed fixture: {0}")]
    Json(#[from] serde_json::Error),
    #[error("fixture entry #{entry}: {message}")]
    Entry { entry: usize, message: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureFile {
    decompositions: Vec<FixtureEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureEntry {
    task: String,
    #[serde(default)]
    when: Vec<String>,
    subtasks: Vec<String>,
}

#[derive(Clone, Debug)]
struct Script {
    task: TaskInstance,
    when: Vec<Literal>,
    tasks: Vec<GroundTask>,
}

/// Answers from a fixture mapping ground compound tasks to primitive
/// sequences. An entry may carry `when` conditions on the request state;
/// the first matching entry wins.
#[derive(Clone, Debug)]
pub struct ScriptedOracle {
    scripts: Vec<Script>,
}

impl ScriptedOracle {
    pub fn from_json(text: &str, domain: &Domain) -> Result<Self, FixtureError> {
        let file: FixtureFile = serde_json::from_str(text)?;
        let mut scripts = Vec::new();
        for (i, e) in file.decompositions.into_iter().enumerate() {
            let entry = i + 1;
            let err = |message: String| FixtureError::Entry { entry, message };
            let atom = parse_atom(&e.task).map_err(|x| err(x.to_string()))?;
            let mut args = Vec::new();
            for t in atom.args {
                match t {
                    Term::Constant(c) if domain.is_constant(&c) => args.push(c),
                    other => return Err(err(format!("`{other}` is not a declared constant"))),
                }
            }
            let task = TaskInstance {
                name: atom.predicate,
                args,
            };
            match domain.ground_task(task.clone()) {
                Ok(GroundTask::Compound(_)) => {}
                _ => return Err(err(format!("`{task}` is not a compound task"))),
            }
            let when = e
                .when
                .iter()
                .map(|w| {
                    let l = parse_literal(w).map_err(|x| err(x.to_string()))?;
                    if !l.atom.is_ground() {
                        return Err(err(format!("`{w}` must be ground")));
                    }
                    Ok(l)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let tasks = parse_predicates(&e.subtasks.join("\n"), domain, ParsePolicy::Strict)
                .map_err(|r| err(r.to_string()))?
                .tasks;
            scripts.push(Script { task, when, tasks });
        }
        Ok(ScriptedOracle { scripts })
    }

    pub fn len(&self) -> usize {
        self.scripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scripts.is_empty()
    }
}

impl DecompositionOracle for ScriptedOracle {
    fn decompose(&self, request: &OracleRequest<'_>) -> Result<OracleResponse, OracleFailure> {
        for s in self.scripts.iter().filter(|s| s.task == request.task) {
            let mut ok = true;
            for w in &s.when {
                match evaluate(request.domain, request.state, w, &Binding::new()) {
                    Ok(true) => {}
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return Ok(mock_response(s.tasks.clone()));
            }
        }
        Err(OracleFailure::NoAnswer(format!(
            "no scripted decomposition for {}",
            request.task
        )))
    }

    fn describe(&self) -> String {
        "scripted".into()
    }
}

/// Seeded generator of schema-valid but otherwise arbitrary primitive
/// sequences. Each step is, with probability `bias`, drawn from the actions
/// applicable in a simulated state (so some answers are plausible), and
/// otherwise drawn uniformly over schemas and constants.
///
/// The generator for a request is seeded from `seed` and the request
/// fingerprint, so answers are reproducible across runs and platforms.
#[derive(Clone, Debug)]
pub struct AdversarialOracle {
    seed: u64,
    max_len: usize,
    bias: f64,
}

impl AdversarialOracle {
    pub fn new(seed: u64) -> Self {
        AdversarialOracle {
            seed,
            max_len: 8,
            bias: 0.6,
        }
    }

    pub fn with_max_len(mut self, max_len: usize) -> Self {
        self.max_len = max_len;
        self
    }

    pub fn with_bias(mut self, bias: f64) -> Self {
        self.bias = bias.clamp(0.0, 1.0);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn applicable(domain: &Domain, state: &State) -> Vec<GroundTask> {
        let mut out = Vec::new();
        for a in domain.actions() {
            let Ok(bindings) = satisfiers(domain, state, &a.preconditions, &Binding::new()) else {
                continue;
            };
            for b in bindings {
                let Some(args) = a
                    .params
                    .iter()
                    .map(|p| b.get(p).map(str::to_string))
                    .collect::<Option<Vec<_>>>()
                else {
                    continue;
                };
                let t = GroundTask::Primitive(TaskInstance {
                    name: a.name.clone(),
                    args,
                });
                if let Ok(Transition::Applied(_)) = apply_action(domain, state, &t) {
                    out.push(t);
                }
            }
        }
        out
    }

    fn random_action(domain: &Domain, rng: &mut ChaCha8Rng) -> Option<GroundTask> {
        let actions = domain.actions();
        let constants = domain.constants();
        if actions.is_empty() || constants.is_empty() {
            return None;
        }
        let a = &actions[rng.gen_range(0..actions.len())];
        let args = (0..a.params.len())
            .map(|_| constants[rng.gen_range(0..constants.len())].clone())
            .collect();
        Some(GroundTask::Primitive(TaskInstance {
            name: a.name.clone(),
            args,
        }))
    }

    /// The sequence this oracle answers for `request`.
    pub fn sample(&self, request: &OracleRequest<'_>) -> Vec<GroundTask> {
        let fp = request.fingerprint();
        let mut salt = [0u8; 8];
        hex::decode_to_slice(&fp[..16], &mut salt).expect("fingerprint is hex");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ u64::from_be_bytes(salt));

        let len = rng.gen_range(0..=self.max_len);
        let mut sim = request.state.clone();
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let pick = if rng.gen_bool(self.bias) {
                let options = Self::applicable(request.domain, &sim);
                if options.is_empty() {
                    Self::random_action(request.domain, &mut rng)
                } else {
                    Some(options[rng.gen_range(0..options.len())].clone())
                }
            } else {
                Self::random_action(request.domain, &mut rng)
            };
            let Some(t) = pick else { break };
            if let Ok(Transition::Applied(next)) = apply_action(request.domain, &sim, &t) {
                sim = next;
            }
            out.push(t);
        }
        out
    }
}

impl DecompositionOracle for AdversarialOracle {
    fn decompose(&self, request: &OracleRequest<'_>) -> Result<OracleResponse, OracleFailure> {
        Ok(mock_response(self.sample(request)))
    }

    fn describe(&self) -> String {
        format!("adversarial:{}", self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{load_domain, Fact};

    const DOMAIN: &str = r#"{
      "name": "air",
      "predicates": {"at": 2, "plane": 1, "package": 1},
      "objects": {"plane": ["plane1"], "package": ["pck"], "airport": ["ap1", "ap2"]},
      "actions": [
        {"head": "loadPlane(?a, ?p, ?l)", "preconditions": ["plane(?a)", "package(?p)", "at(?a, ?l)", "at(?p, ?l)"],
         "add": ["at(?p, ?a)"], "delete": ["at(?p, ?l)"]},
        {"head": "fly(?a, ?s, ?d)", "preconditions": ["plane(?a)", "at(?a, ?s)"],
         "add": ["at(?a, ?d)"], "delete": ["at(?a, ?s)"]},
        {"head": "unloadPlane(?a, ?p, ?l)", "preconditions": ["plane(?a)", "at(?a, ?l)", "at(?p, ?a)"],
         "add": ["at(?p, ?l)"], "delete": ["at(?p, ?a)"]}
      ],
      "compound_tasks": [{"head": "planeTransport(?p, ?s, ?d)", "effects": ["at(?p, ?d)"]}]
    }"#;

    fn state() -> State {
        [
            Fact::new("at", &["pck", "ap1"]),
            Fact::new("at", &["plane1", "ap1"]),
            Fact::new("plane", &["plane1"]),
            Fact::new("package", &["pck"]),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn scripted_answers_plane_transport() {
        let d = load_domain(DOMAIN).unwrap();
        let o = ScriptedOracle::from_json(
            r#"{"decompositions": [
                {"task": "planeTransport(pck, ap1, ap2)", "when": ["at(plane1, ap2)"], "subtasks": []},
                {"task": "planeTransport(pck, ap1, ap2)",
                 "subtasks": ["loadPlane(plane1, pck, ap1)", "fly(plane1, ap1, ap2)", "unloadPlane(plane1, pck, ap2)"]}
            ]}"#,
            &d,
        )
        .unwrap();
        let s = state();
        let req = OracleRequest::new(
            &d,
            &s,
            &TaskInstance::new("planeTransport", &["pck", "ap1", "ap2"]),
        )
        .unwrap();
        let r = o.decompose(&req).unwrap();
        let got: Vec<String> = r.tasks.iter().map(|t| t.to_string()).collect();
        assert_eq!(
            got,
            [
                "loadPlane(plane1,pck,ap1)",
                "fly(plane1,ap1,ap2)",
                "unloadPlane(plane1,pck,ap2)"
            ]
        );
        assert_eq!(r.source, ResponseSource::Mock);

        let other = OracleRequest::new(
            &d,
            &s,
            &TaskInstance::new("planeTransport", &["pck", "ap2", "ap1"]),
        )
        .unwrap();
        assert!(matches!(
            o.decompose(&other),
            Err(OracleFailure::NoAnswer(_))
        ));
    }

    #[test]
    fn fixture_validation() {
        let d = load_domain(DOMAIN).unwrap();
        for bad in [
            r#"{"decompositions": [{"task": "fly(plane1, ap1, ap2)", "subtasks": []}]}"#,
            r#"{"decompositions": [{"task": "planeTransport(pck, ap1, moon)", "subtasks": []}]}"#,
            r#"{"decompositions": [{"task": "planeTransport(pck, ap1, ap2)", "subtasks": ["teleport(pck)"]}]}"#,
        ] {
            assert!(ScriptedOracle::from_json(bad, &d).is_err(), "{bad}");
        }
    }

    #[test]
    fn failing_oracle_fails() {
        let d = load_domain(DOMAIN).unwrap();
        let s = state();
        let req = OracleRequest::new(
            &d,
            &s,
            &TaskInstance::new("planeTransport", &["pck", "ap1", "ap2"]),
        )
        .unwrap();
        assert_eq!(
            FailingOracle.decompose(&req),
            Err(OracleFailure::BudgetExhausted)
        );
    }

    #[test]
    fn adversarial_is_reproducible_and_schema_valid() {
        let d = load_domain(DOMAIN).unwrap();
        let s = state();
        let req = OracleRequest::new(
            &d,
            &s,
            &TaskInstance::new("planeTransport", &["pck", "ap1", "ap2"]),
        )
        .unwrap();
        let a = AdversarialOracle::new(42);
        let first = a.sample(&req);
        assert_eq!(first, AdversarialOracle::new(42).sample(&req));
        for t in &first {
            let inst = t.instance();
            let schema = d.action(&inst.name).unwrap();
            assert_eq!(schema.params.len(), inst.args.len());
            assert!(inst.args.iter().all(|c| d.is_constant(c)));
        }
        // different seeds explore different sequences
        let distinct: std::collections::HashSet<Vec<GroundTask>> = (0..20)
            .map(|seed| AdversarialOracle::new(seed).sample(&req))
            .collect();
        assert!(distinct.len() > 5);
    }
}
