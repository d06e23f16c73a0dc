//! The ablation experiment: run a bundle's prototypical problem under every
//! knowledge ablation, with a bounded number of attempts per cell, and
//! re-check every plan with the validator.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::domain::{Domain, DomainError, Problem};
use crate::domains::DomainBundle;
use crate::oracle::DecompositionOracle;
use crate::planner::{write_jsonl, Limits, Outcome, PlanResult, Planner};
use crate::validator::{satisfies, ValidationError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Ablation {
    Full,
    Unsolvable,
    /// Removes the `index`-th (0-based) method of `task`.
    MethodRemoved {
        task: String,
        index: usize,
        method: String,
    },
    NoMethods {
        task: String,
    },
    NoModel,
}

impl Ablation {
    /// Every cell for `domain`, in report order.
    pub fn matrix(domain: &Domain) -> Vec<Ablation> {
        let mut cells = vec![Ablation::Full, Ablation::Unsolvable];
        for c in domain.compound_tasks() {
            for (index, m) in domain.methods_for(&c.name).enumerate() {
                cells.push(Ablation::MethodRemoved {
                    task: c.name.clone(),
                    index,
                    method: m.name.clone(),
                });
            }
        }
        for c in domain.compound_tasks() {
            cells.push(Ablation::NoMethods {
                task: c.name.clone(),
            });
        }
        cells.push(Ablation::NoModel);
        cells
    }

    /// The domain and problem this cell runs on.
    pub fn apply(&self, bundle: &DomainBundle) -> (Domain, Problem) {
        let mut domain = bundle.domain.clone();
        let problem = match self {
            Ablation::Unsolvable => bundle.unsolvable.clone(),
            _ => bundle.prototypical.clone(),
        };
        match self {
            Ablation::Full | Ablation::Unsolvable => {}
            Ablation::MethodRemoved { method, .. } => domain.retain_methods(|m| &m.name != method),
            Ablation::NoMethods { task } => domain.retain_methods(|m| &m.task.name != task),
            Ablation::NoModel => domain.retain_methods(|_| false),
        }
        (domain, problem)
    }

    pub fn label(&self) -> String {
        match self {
            Ablation::Full => "full domain".into(),
            Ablation::Unsolvable => "unsolvable".into(),
            Ablation::MethodRemoved { task, index, .. } => format!("{task} without M{}", index + 1),
            Ablation::NoMethods { task } => format!("{task} without methods"),
            Ablation::NoModel => "no methods at all".into(),
        }
    }

    fn slug(&self) -> String {
        match self {
            Ablation::Full => "full".into(),
            Ablation::Unsolvable => "unsolvable".into(),
            Ablation::MethodRemoved { task, index, .. } => format!("{task}-m{}", index + 1),
            Ablation::NoMethods { task } => format!("{task}-none"),
            Ablation::NoModel => "no-model".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub retries: usize,
    pub limits: Limits,
    pub jobs: usize,
    /// Where plan and trace artifacts go, if anywhere.
    pub out_dir: Option<PathBuf>,
    pub trace: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            retries: 5,
            limits: Limits::default(),
            jobs: 1,
            out_dir: None,
            trace: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Attempt {
    pub oracle_calls: usize,
    /// `plan` or the no-plan reason.
    pub outcome: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub domain: String,
    pub ablation: Ablation,
    pub solved: bool,
    pub attempts: Vec<Attempt>,
    /// True when a deterministic oracle made attempts after the first
    /// redundant; their outcomes are copied from attempt 1.
    pub short_circuited: bool,
    pub plan: Option<Vec<String>>,
}

impl Cell {
    /// `✓(0)`, `X(5,5)` and so on.
    pub fn mark(&self) -> String {
        let counts: Vec<String> = self
            .attempts
            .iter()
            .map(|a| a.oracle_calls.to_string())
            .collect();
        format!(
            "{}({})",
            if self.solved { "✓" } else { "X" },
            counts.join(",")
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExperimentReport {
    pub oracle: String,
    pub retries: usize,
    pub cells: Vec<Cell>,
}

impl ExperimentReport {
    pub fn to_table(&self) -> String {
        let width = self
            .cells
            .iter()
            .map(|c| c.ablation.label().chars().count())
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let mut current = "";
        for c in &self.cells {
            if c.domain != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                current = &c.domain;
                let _ = writeln!(out, "{current}");
            }
            let _ = writeln!(out, "  {:<width$}  {}", c.ablation.label(), c.mark());
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("soundness violation in {domain} / {cell}: the validator rejected the emitted plan ({verdict})")]
    SoundnessViolation {
        domain: String,
        cell: String,
        verdict: String,
        plan: Vec<String>,
    },
    #[error("writing artifacts: {0}")]
    Io(#[from] io::Error),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

/// Runs one cell: up to `config.retries` attempts, stopping at the first
/// plan.
pub fn run_cell(
    bundle: &DomainBundle,
    ablation: &Ablation,
    oracle: &dyn DecompositionOracle,
    config: &ExperimentConfig,
) -> Result<Cell, ExperimentError> {
    let (domain, problem) = ablation.apply(bundle);
    let planner = Planner::new(&domain, oracle)
        .with_limits(config.limits)
        .with_trace(config.trace);
    let mut attempts = Vec::new();
    let mut short_circuited = false;
    let mut plan = None;
    let mut last: Option<PlanResult> = None;
    for attempt in 1..=config.retries.max(1) {
        let result = planner.plan_problem(&problem)?;
        let outcome = match &result.outcome {
            Outcome::Plan(_) => "plan".to_string(),
            Outcome::NoPlan(r) => r.to_string(),
        };
        attempts.push(Attempt {
            oracle_calls: result.stats.oracle_calls,
            outcome,
        });
        if let Outcome::Plan(p) = &result.outcome {
            let actions = p.actions();
            let verdict = satisfies(
                &domain,
                &problem.initial_state,
                &problem.tasks,
                &actions,
                &p.segments,
            )?;
            if !verdict.accepted {
                return Err(ExperimentError::SoundnessViolation {
                    domain: bundle.name.to_string(),
                    cell: ablation.label(),
                    verdict: verdict.to_string(),
                    plan: actions.iter().map(|a| a.to_string()).collect(),
                });
            }
            plan = Some(actions.iter().map(|a| a.to_string()).collect::<Vec<_>>());
            last = Some(result);
            break;
        }
        last = Some(result);
        if attempt == 1 && oracle.is_deterministic() && config.retries > 1 {
            tracing::info!(
                domain = %bundle.name,
                cell = %ablation.label(),
                "deterministic oracle: repeating attempt 1's outcome for the remaining {} attempts",
                config.retries - 1
            );
            short_circuited = true;
            let first = attempts[0].clone();
            attempts.resize(config.retries, first);
            break;
        }
    }
    if let (Some(dir), Some(result)) = (&config.out_dir, &last) {
        write_artifacts(dir, bundle, ablation, result, plan.as_deref(), config.trace)?;
    }
    Ok(Cell {
        domain: bundle.name.to_string(),
        ablation: ablation.clone(),
        solved: plan.is_some(),
        attempts,
        short_circuited,
        plan,
    })
}

fn write_artifacts(
    dir: &Path,
    bundle: &DomainBundle,
    ablation: &Ablation,
    result: &PlanResult,
    plan: Option<&[String]>,
    trace: bool,
) -> io::Result<()> {
    let dir = dir.join(bundle.name.as_str());
    fs::create_dir_all(&dir)?;
    let slug = ablation.slug();
    if let Some(plan) = plan {
        let mut text = plan.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        fs::write(dir.join(format!("{slug}.plan")), text)?;
    }
    if trace {
        let f = fs::File::create(dir.join(format!("{slug}.trace.jsonl")))?;
        write_jsonl(io::BufWriter::new(f), &result.trace)?;
    }
    Ok(())
}

/// Runs every cell of every bundle, `config.jobs` cells at a time. Cell
/// order in the report is independent of scheduling.
pub fn run_experiment(
    bundles: &[DomainBundle],
    oracle: &dyn DecompositionOracle,
    config: &ExperimentConfig,
) -> Result<ExperimentReport, ExperimentError> {
    let work: Vec<(&DomainBundle, Ablation)> = bundles
        .iter()
        .flat_map(|b| Ablation::matrix(&b.domain).into_iter().map(move |a| (b, a)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let cells = pool.install(|| {
        work.par_iter()
            .map(|(b, a)| run_cell(b, a, oracle, config))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(ExperimentReport {
        oracle: oracle.describe(),
        retries: config.retries,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{load_bundle, BundleName};
    use crate::oracle::FailingOracle;

    #[test]
    fn matrix_order_and_labels() {
        let b = load_bundle(BundleName::Logistics).unwrap();
        let labels: Vec<String> = Ablation::matrix(&b.domain)
            .iter()
            .map(Ablation::label)
            .collect();
        assert_eq!(labels[0], "full domain");
        assert_eq!(labels[1], "unsolvable");
        assert_eq!(labels[2], "truckTransport without M1");
        assert_eq!(labels.last().unwrap(), "no methods at all");
        // 8 method-removed cells + 3 no-methods cells
        assert_eq!(labels.len(), 2 + 8 + 3 + 1);
    }

    #[test]
    fn method_removed_leaves_the_others() {
        let b = load_bundle(BundleName::Logistics).unwrap();
        let a = Ablation::MethodRemoved {
            task: "planeTransport".into(),
            index: 1,
            method: "planeTransportM2".into(),
        };
        let (d, _) = a.apply(&b);
        assert_eq!(d.methods().len(), b.domain.methods().len() - 1);
        assert!(d.methods().iter().all(|m| m.name != "planeTransportM2"));
    }

    #[test]
    fn single_retry_with_failing_oracle_is_one_attempt() {
        let b = load_bundle(BundleName::Logistics).unwrap();
        let cfg = ExperimentConfig {
            retries: 1,
            ..Default::default()
        };
        let cell = run_cell(
            &b,
            &Ablation::NoMethods {
                task: "planeTransport".into(),
            },
            &FailingOracle,
            &cfg,
        )
        .unwrap();
        assert!(!cell.solved);
        assert_eq!(cell.attempts.len(), 1);
        // planeTransport, then truckTransport on backtracking, then transportPackage
        assert_eq!(cell.mark(), "X(3)");
    }

    #[test]
    fn deterministic_oracle_short_circuits() {
        let b = load_bundle(BundleName::Logistics).unwrap();
        let cell = run_cell(
            &b,
            &Ablation::Unsolvable,
            &FailingOracle,
            &ExperimentConfig::default(),
        )
        .unwrap();
        assert!(cell.short_circuited);
        assert_eq!(cell.attempts.len(), 5);
        assert!(cell.attempts.iter().all(|a| a == &cell.attempts[0]));
    }
}
