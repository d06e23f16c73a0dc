mod args;
mod exit;
mod oracle;

use std::fs;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use htn_core::domain::{load_domain, load_problem, Domain, Problem};
use htn_core::domains::{load_bundle, BundleName, DomainBundle};
use htn_core::experiment::{run_experiment, ExperimentConfig, ExperimentError, ExperimentReport};
use htn_core::oracle::{parse_predicates, ExchangeCache, ParsePolicy};
use htn_core::planner::{write_jsonl, Limits, Outcome, Planner};
use htn_core::validator::{find_split, satisfies, MAX_SPLIT_SEARCH};
use serde_json::json;
use tracing_subscriber::EnvFilter;

use args::{
    CacheCommand, Cli, Command, ExperimentArgs, InstanceArgs, LimitArgs, PlanArgs, ValidateArgs,
};
use exit::{CliError, Code};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)),
        )
        .with_writer(io::stderr)
        .init();

    let result = match cli.command {
        Command::Plan(a) => plan(a),
        Command::Validate(a) => validate(a),
        Command::Experiment(a) => experiment(a),
        Command::Cache { command } => cache(command),
        Command::Bundles => bundles(),
    };
    match result {
        Ok(code) => code.into(),
        Err(e) => {
            eprintln!("htn: {e}");
            e.code.into()
        }
    }
}

struct Instance {
    bundle: Option<DomainBundle>,
    domain: Domain,
    problem: Problem,
}

fn read(path: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::load(format!("{path}: {e}")))
}

fn bundle(name: &str) -> Result<DomainBundle, CliError> {
    let name: BundleName = name
        .parse()
        .map_err(|e: htn_core::domains::UnknownBundle| CliError::usage(e.to_string()))?;
    load_bundle(name).map_err(|e| CliError::load(e.to_string()))
}

fn load(args: &InstanceArgs) -> Result<Instance, CliError> {
    let b = match args.domain.parse::<BundleName>() {
        Ok(_) => Some(bundle(&args.domain)?),
        Err(_) => None,
    };
    let mut domain = match &b {
        Some(b) => b.domain.clone(),
        None => load_domain(&fs::read_to_string(&args.domain).map_err(|e| {
            CliError::load(format!(
                "{}: not a bundle (logistics, household, rescue) and not a readable file: {e}",
                args.domain
            ))
        })?)
        .map_err(|e| CliError::load(format!("{}: {e}", args.domain)))?,
    };
    let problem = match (args.problem.as_deref(), &b) {
        (None, Some(b)) => b.prototypical.clone(),
        (Some("unsolvable"), Some(b)) => b.unsolvable.clone(),
        (None | Some("unsolvable"), None) => {
            return Err(CliError::usage("a domain file needs --problem <file>"));
        }
        (Some(path), _) => load_problem(&domain, &read(path)?)
            .map_err(|e| CliError::load(format!("{path}: {e}")))?,
    };
    domain.add_objects(&problem.objects);
    Ok(Instance {
        bundle: b,
        domain,
        problem,
    })
}

fn limits(a: &LimitArgs) -> Limits {
    Limits {
        depth_limit: a.depth_limit,
        oracle_budget: a.oracle_budget,
    }
}

fn ablate(domain: &mut Domain, specs: &[String]) -> Result<(), CliError> {
    for spec in specs {
        match spec.split_once(':') {
            Some(("method", name)) => {
                if !domain.methods().iter().any(|m| m.name == name) {
                    return Err(CliError::usage(format!("no method named `{name}`")));
                }
                domain.retain_methods(|m| m.name != name);
            }
            Some(("task", name)) => {
                if domain.compound_task(name).is_none() {
                    return Err(CliError::usage(format!("no compound task named `{name}`")));
                }
                domain.retain_methods(|m| m.task.name != name);
            }
            None if spec == "no-model" => domain.retain_methods(|_| false),
            _ => {
                return Err(CliError::usage(format!(
                    "bad --ablate `{spec}` (expected method:<name>, task:<name> or no-model)"
                )))
            }
        }
    }
    Ok(())
}

fn plan(a: PlanArgs) -> Result<Code, CliError> {
    let mut inst = load(&a.instance)?;
    ablate(&mut inst.domain, &a.ablate)?;
    let oracle = oracle::build(&a.oracle, &inst.domain, inst.bundle.as_ref())?;
    let result = Planner::new(&inst.domain, oracle.as_ref())
        .with_limits(limits(&a.limits))
        .with_trace(a.trace.is_some())
        .plan_problem(&inst.problem)
        .map_err(|e| CliError::load(e.to_string()))?;
    if let Some(path) = &a.trace {
        let f = fs::File::create(path)?;
        write_jsonl(io::BufWriter::new(f), &result.trace)?;
    }
    let stats = result.stats;
    match &result.outcome {
        Outcome::Plan(p) => {
            let actions = p.actions();
            let verdict = satisfies(
                &inst.domain,
                &inst.problem.initial_state,
                &inst.problem.tasks,
                &actions,
                &p.segments,
            )
            .map_err(|e| CliError::load(e.to_string()))?;
            if !verdict.accepted {
                return Err(CliError::new(
                    Code::Soundness,
                    format!("emitted plan failed validation: {verdict}"),
                ));
            }
            if a.tree {
                eprint!("{}", p.render_tree());
            }
            let lines: Vec<String> = actions.iter().map(|t| t.to_string()).collect();
            if a.json {
                let summary = json!({
                    "outcome": "plan",
                    "actions": lines,
                    "segments": p.segments,
                    "stats": stats,
                    "oracle": oracle.describe(),
                });
                println!(
                    "{}",
                    serde_json::to_string_pretty(&summary).expect("json value")
                );
            } else {
                let mut text = format!("# segments: {}\n", join(&p.segments));
                for l in &lines {
                    text.push_str(l);
                    text.push('\n');
                }
                match &a.plan_out {
                    Some(path) => fs::write(path, text)?,
                    None => io::stdout().write_all(text.as_bytes())?,
                }
            }
            eprintln!(
                "plan: {} actions, {} oracle calls, {} nodes",
                lines.len(),
                stats.oracle_calls,
                stats.nodes_expanded
            );
            Ok(Code::Ok)
        }
        Outcome::NoPlan(reason) => {
            if a.json {
                let summary = json!({
                    "outcome": "no-plan",
                    "reason": reason.to_string(),
                    "stats": stats,
                    "oracle": oracle.describe(),
                });
                println!(
                    "{}",
                    serde_json::to_string_pretty(&summary).expect("json value")
                );
            }
            eprintln!(
                "no plan: {reason} ({} oracle calls, {} nodes)",
                stats.oracle_calls, stats.nodes_expanded
            );
            if stats.transport_failures > 0 {
                return Err(CliError::new(
                    Code::Transport,
                    format!("{} oracle transport failures", stats.transport_failures),
                ));
            }
            Ok(Code::NoPlan)
        }
    }
}

fn join(xs: &[usize]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Reads a plan file; a `# segments: a,b` header supplies segment lengths.
fn read_plan(text: &str) -> (String, Option<Vec<usize>>) {
    let mut body = String::new();
    let mut segments = None;
    for line in text.lines() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix('#') {
            if let Some(list) = rest.trim().strip_prefix("segments:") {
                segments = list
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.trim().parse().ok())
                    .collect::<Option<Vec<usize>>>();
            }
            body.push('\n');
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    (body, segments)
}

fn validate(a: ValidateArgs) -> Result<Code, CliError> {
    let inst = load(&a.instance)?;
    let text = read(&a.plan.to_string_lossy())?;
    let (body, header_segments) = read_plan(&text);
    let actions = parse_predicates(&body, &inst.domain, ParsePolicy::Strict)
        .map_err(|r| CliError::load(format!("{}: {r}", a.plan.display())))?
        .tasks;
    let segments = match a.segments.or(header_segments) {
        Some(s) => s,
        None => {
            if actions.len() > MAX_SPLIT_SEARCH {
                return Err(CliError::usage(format!(
                    "plan has {} actions; pass --segments for plans over {MAX_SPLIT_SEARCH}",
                    actions.len()
                )));
            }
            match find_split(
                &inst.domain,
                &inst.problem.initial_state,
                &inst.problem.tasks,
                &actions,
            )
            .map_err(|e| CliError::load(e.to_string()))?
            {
                Some(s) => s,
                None => {
                    println!("rejected: no split of the plan satisfies the task list");
                    return Ok(Code::NoPlan);
                }
            }
        }
    };
    let verdict = satisfies(
        &inst.domain,
        &inst.problem.initial_state,
        &inst.problem.tasks,
        &actions,
        &segments,
    )
    .map_err(|e| CliError::load(e.to_string()))?;
    println!("{verdict} (segments {})", join(&segments));
    Ok(if verdict.accepted {
        Code::Ok
    } else {
        Code::NoPlan
    })
}

fn experiment(a: ExperimentArgs) -> Result<Code, CliError> {
    let names: Vec<String> = if a.domain.is_empty() {
        BundleName::ALL.iter().map(|b| b.to_string()).collect()
    } else {
        a.domain.clone()
    };
    let config = ExperimentConfig {
        retries: a.retries,
        limits: limits(&a.limits),
        jobs: a.jobs,
        out_dir: a.out.clone(),
        trace: a.trace,
    };
    let mut report: Option<ExperimentReport> = None;
    for name in &names {
        let b = bundle(name)?;
        let oracle = oracle::build(&a.oracle, &b.domain, Some(&b))?;
        tracing::info!(domain = %b.name, oracle = %oracle.describe(), "running ablation matrix");
        let part = run_experiment(std::slice::from_ref(&b), oracle.as_ref(), &config).map_err(
            |e| match e {
                ExperimentError::SoundnessViolation { .. } => {
                    CliError::new(Code::Soundness, e.to_string())
                }
                ExperimentError::Pool(_) => CliError::usage(e.to_string()),
                other => CliError::load(other.to_string()),
            },
        )?;
        match &mut report {
            None => report = Some(part),
            Some(r) => r.cells.extend(part.cells),
        }
    }
    let report = report.expect("at least one bundle");
    print!("{}", report.to_table());
    if let Some(path) = &a.report {
        fs::write(path, report.to_json())?;
    }
    Ok(Code::Ok)
}

fn cache(command: CacheCommand) -> Result<Code, CliError> {
    match command {
        CacheCommand::Inspect { file, full } => {
            let cache = ExchangeCache::open(&file)
                .map_err(|e| CliError::load(format!("{}: {e}", file.display())))?;
            println!("{} records", cache.len());
            for r in cache.records() {
                println!(
                    "{}  {}  -> {}",
                    &r.fingerprint[..12.min(r.fingerprint.len())],
                    r.task,
                    r.tasks.join(" ")
                );
                if full {
                    for (p, resp) in r.prompts.iter().zip(&r.responses) {
                        println!("--- prompt\n{p}\n--- response\n{resp}");
                    }
                }
            }
            Ok(Code::Ok)
        }
    }
}

fn bundles() -> Result<Code, CliError> {
    for name in BundleName::ALL {
        let b = load_bundle(name).map_err(|e| CliError::load(e.to_string()))?;
        println!(
            "{:<10} {} actions, {} compound tasks, {} methods, {} axioms",
            name.as_str(),
            b.domain.actions().len(),
            b.domain.compound_tasks().len(),
            b.domain.methods().len(),
            b.domain.axioms().len()
        );
    }
    Ok(Code::Ok)
}
