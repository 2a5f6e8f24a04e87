//! Product sets, isoperimetric numbers, atoms and fragments for finite
//! subsets of concrete torsion-free groups, with verifiers for the classical
//! inequalities on small product sets.

pub mod error;
pub mod explorer;
pub mod group;
pub mod iso;
pub mod laws;
pub mod report;
pub mod setops;

pub use error::{Error, Result};
pub use explorer::{Campaign, RunRecord};
pub use group::{Element, Group};
pub use iso::{Certificate, IsoConfig, IsoInstance, IsoResult};
pub use laws::BoundMode;
pub use report::{LawId, LawReport, Slack, Verdict, Witness};
pub use setops::{FiniteSubset, ProgressionDescriptor};
