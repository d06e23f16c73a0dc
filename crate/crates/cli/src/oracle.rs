use std::fs;

use htn_core::domain::Domain;
use htn_core::domains::DomainBundle;
use htn_core::oracle::{
    AdversarialOracle, CachingOracle, DecompositionOracle, ExchangeCache, FailingOracle, LlmConfig,
    LlmOracle, ScriptedOracle,
};

use crate::args::OracleArgs;
use crate::exit::{CliError, Code};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleSpec {
    Failing,
    Scripted(Option<String>),
    Adversarial(u64),
    Live,
}

impl OracleSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let (kind, arg) = match text.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (text, None),
        };
        match (kind, arg) {
            ("failing", None) => Ok(OracleSpec::Failing),
            ("live", None) => Ok(OracleSpec::Live),
            ("scripted", file) => Ok(OracleSpec::Scripted(file.map(str::to_string))),
            ("adversarial", Some(seed)) => seed
                .parse()
                .map(OracleSpec::Adversarial)
                .map_err(|_| CliError::usage(format!("adversarial seed `{seed}` is not a number"))),
            _ => Err(CliError::usage(format!(
                "unknown oracle `{text}` (expected failing, scripted[:file], adversarial:<seed> or live)"
            ))),
        }
    }
}

/// Builds the oracle for one domain. `bundle` supplies the default scripted
/// fixture.
pub fn build(
    args: &OracleArgs,
    domain: &Domain,
    bundle: Option<&DomainBundle>,
) -> Result<Box<dyn DecompositionOracle>, CliError> {
    if args.replay_only {
        let path = args.cache.as_ref().expect("clap enforces --cache");
        let cache = ExchangeCache::open(path)
            .map_err(|e| CliError::load(format!("{}: {e}", path.display())))?;
        return Ok(Box::new(CachingOracle::replay(cache)));
    }
    let inner: Box<dyn DecompositionOracle> = match OracleSpec::parse(&args.oracle)? {
        OracleSpec::Failing => Box::new(FailingOracle),
        OracleSpec::Adversarial(seed) => Box::new(AdversarialOracle::new(seed)),
        OracleSpec::Scripted(Some(file)) => {
            let text =
                fs::read_to_string(&file).map_err(|e| CliError::load(format!("{file}: {e}")))?;
            let o = ScriptedOracle::from_json(&text, domain)
                .map_err(|e| CliError::load(format!("{file}: {e}")))?;
            Box::new(o)
        }
        OracleSpec::Scripted(None) => match bundle {
            Some(b) => Box::new(b.scripted_oracle()),
            None => {
                return Err(CliError::usage(
                    "`scripted` without a file needs a bundled domain",
                ))
            }
        },
        OracleSpec::Live => {
            let config =
                LlmConfig::from_env().map_err(|e| CliError::new(Code::Transport, e.to_string()))?;
            Box::new(LlmOracle::from_config(config))
        }
    };
    match &args.cache {
        None => Ok(inner),
        Some(path) => {
            let cache = ExchangeCache::open(path)
                .map_err(|e| CliError::load(format!("{}: {e}", path.display())))?;
            Ok(Box::new(CachingOracle::new(inner, cache)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_specs() {
        assert_eq!(OracleSpec::parse("failing").unwrap(), OracleSpec::Failing);
        assert_eq!(
            OracleSpec::parse("adversarial:7").unwrap(),
            OracleSpec::Adversarial(7)
        );
        assert_eq!(
            OracleSpec::parse("scripted").unwrap(),
            OracleSpec::Scripted(None)
        );
        assert_eq!(
            OracleSpec::parse("scripted:x.json").unwrap(),
            OracleSpec::Scripted(Some("x.json".into()))
        );
        assert!(OracleSpec::parse("adversarial:x").is_err());
        assert!(OracleSpec::parse("gpt").is_err());
        assert!(OracleSpec::parse("live:now").is_err());
    }
}
