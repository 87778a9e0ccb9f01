//! Amalgamation-type properties of ages: checks, certificates and the two
//! explicit counterexamples.

pub mod age;
pub mod cert;
pub mod search;

pub use age::{AgeDescriptor, AgeKind};
pub use cert::{Certificate, Equality, Fact, NamedMap, Verdict};
pub use search::{extend_into, Budget, ExtendOutcome, Extension};
pub mod checks;

pub use checks::{amalgam_candidates, check_aepn, check_aepn_with, check_ap, check_hap, check_hapn, validate_aepn, AepInstance, HapInstance, HapnInstance, Strategy};
pub mod counter;

pub use counter::{chains_counterexample, urysohn_counterexample, ChainsCase, UrysohnChain};
