//! Sound hierarchical task network planning.
//!
//! Compound tasks are decomposed with hand-written methods; when no method
//! leads to a plan, a [`oracle::DecompositionOracle`] proposes a primitive
//! task sequence. Every decomposition is followed by a verifier task that
//! checks the compound task's effects, so emitted plans are correct even
//! when the oracle is wrong.

pub mod domain;
pub mod domains;
pub mod experiment;
pub mod oracle;
pub mod planner;
pub mod validator;
