//! The bundled evaluation domains: logistics transportation, a household
//! robot, and drone search-and-rescue. Each bundle has a prototypical
//! problem solvable with the full method set, an unsolvable variant that
//! lacks one initial condition, and a scripted oracle fixture answering
//! every compound task the prototypical problem can raise.

use std::fmt;
use std::str::FromStr;

use crate::domain::{
    ground_literals, load_domain, load_problem, Domain, DomainError, GroundLiteral, GroundTask,
    LoadError, Problem,
};
use crate::oracle::{FixtureError, ScriptedOracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BundleName {
    Logistics,
    Household,
    Rescue,
}

impl BundleName {
    pub const ALL: [BundleName; 3] = [
        BundleName::Logistics,
        BundleName::Household,
        BundleName::Rescue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BundleName::Logistics => "logistics",
            BundleName::Household => "household",
            BundleName::Rescue => "rescue",
        }
    }

    fn files(self) -> BundleFiles {
        macro_rules! files {
            ($dir:literal) => {
                BundleFiles {
                    domain: include_str!(concat!("../data/", $dir, "/domain.json")),
                    problem: include_str!(concat!("../data/", $dir, "/problem.json")),
                    unsolvable: include_str!(concat!("../data/", $dir, "/unsolvable.json")),
                    oracle: include_str!(concat!("../data/", $dir, "/oracle.json")),
                }
            };
        }
        match self {
            BundleName::Logistics => files!("logistics"),
            BundleName::Household => files!("household"),
            BundleName::Rescue => files!("rescue"),
        }
    }
}

impl fmt::Display for BundleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownBundle(pub String);

impl fmt::Display for UnknownBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown domain bundle `{}` (expected logistics, household or rescue)",
            self.0
        )
    }
}

impl std::error::Error for UnknownBundle {}

impl FromStr for BundleName {
    type Err = UnknownBundle;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BundleName::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| UnknownBundle(s.to_string()))
    }
}

/// Raw JSON texts of a bundle.
#[derive(Clone, Copy, Debug)]
pub struct BundleFiles {
    pub domain: &'static str,
    pub problem: &'static str,
    pub unsolvable: &'static str,
    pub oracle: &'static str,
}

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Clone, Debug)]
pub struct DomainBundle {
    pub name: BundleName,
    pub domain: Domain,
    pub prototypical: Problem,
    pub unsolvable: Problem,
    pub files: BundleFiles,
}

impl DomainBundle {
    /// A fresh scripted oracle built from the bundle's fixture.
    pub fn scripted_oracle(&self) -> ScriptedOracle {
        ScriptedOracle::from_json(self.files.oracle, &self.domain)
            .expect("bundle fixture was validated by load_bundle")
    }

    /// Grounded effects of the prototypical problem's top-level compound
    /// tasks.
    pub fn expected_top_level_effects(&self) -> Vec<GroundLiteral> {
        let mut out = Vec::new();
        for t in &self.prototypical.tasks {
            if let GroundTask::Compound(t) = t {
                let schema = self
                    .domain
                    .compound_task(&t.name)
                    .expect("loader checked task names");
                out.extend(
                    ground_literals(&schema.effects, &schema.params, &t.args)
                        .expect("loader checked effect variables"),
                );
            }
        }
        out
    }
}

pub fn load_bundle(name: BundleName) -> Result<DomainBundle, BundleError> {
    let files = name.files();
    let domain = load_domain(files.domain)?;
    let prototypical = load_problem(&domain, files.problem)?;
    let unsolvable = load_problem(&domain, files.unsolvable)?;
    ScriptedOracle::from_json(files.oracle, &domain)?;
    Ok(DomainBundle {
        name,
        domain,
        prototypical,
        unsolvable,
        files,
    })
}
