//! Finite relational structures, amalgamation, Fraïssé limits and polymorphism
//! clones of homogeneous structures.

pub mod ageprops;
pub mod construct;
pub mod error;
pub mod fraisse;
pub mod funspace;
pub mod json;
pub mod morph;
pub mod par;
pub mod relcore;
pub mod upoly;

pub use error::{Error, Result};
pub use morph::{Kind, Morphism, Violation};
pub use relcore::{Elem, MetricSpace, Signature, Structure, Tuple, Q};
