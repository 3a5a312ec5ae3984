//! A dependency-resolution engine built around a small core calculus.
//!
//! Packages are name-version pairs, dependencies map a package to a name and
//! a set of acceptable versions, and a resolution is a set of packages that
//! contains the root, closes every dependency and selects at most one version
//! per name. Richer dependency languages (conflicts, concurrent versions,
//! features, formulae, virtual packages) are lowered to this core and their
//! resolutions lifted back.

pub mod buildgraph;
pub mod calculus;
pub mod error;
pub mod ext;
pub mod frontends;
pub mod name;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod restricted;
pub mod sat;
pub mod text;
pub mod versions;

pub use calculus::{
    compare_resolutions, maximal_resolutions, validate_resolution, CoreInstance, Dependency,
    Outcome, Repository, Resolution, ResolutionOrder,
};
pub use error::{Error, Result};
pub use name::{versions, GranToken, NumericVersion, Package, PackageName, Version, VersionSet};
pub use oracle::{enumerate_resolutions, Oracle};
pub use report::{Rule, ValidityReport, Violation};
