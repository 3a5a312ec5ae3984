//! Document formats: the JSON interchange format and two small ecosystem
//! dialects modelled on Debian control files and Cargo manifests.

pub mod cargo;
pub mod debian;
pub mod json;

use std::fmt;
use std::str::FromStr;

use crate::calculus::Repository;
use crate::error::{Error, Result};
use crate::name::{Package, PackageName, Version, VersionSet};
use crate::pipeline::{ExtendedInstance, ExtensionTag};
use crate::versions::{compare_versions, CmpOp, VersionFormula};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dialect {
    Json,
    Debian,
    Cargo,
}

impl Dialect {
    pub const ALL: [Dialect; 3] = [Dialect::Json, Dialect::Debian, Dialect::Cargo];

    /// Extensions a document in this dialect can state directly.
    pub fn supports(self, tag: ExtensionTag) -> bool {
        use ExtensionTag::*;
        match self {
            Dialect::Json => true,
            Dialect::Debian => matches!(tag, VersionFormulae | Conflicts | PackageFormulae | Virtual),
            Dialect::Cargo => matches!(tag, VersionFormulae | Features | Concurrent),
        }
    }

    pub fn parse(self, text: &str) -> Result<ExtendedInstance> {
        match self {
            Dialect::Json => json::parse_repo(text),
            Dialect::Debian => debian::parse_debctl(text),
            Dialect::Cargo => cargo::parse_cargotoml(text),
        }
    }

    pub fn emit(self, inst: &ExtendedInstance) -> Result<String> {
        match self {
            Dialect::Json => json::emit_repo(inst),
            Dialect::Debian => debian::emit_debctl(inst),
            Dialect::Cargo => cargo::emit_cargotoml(inst),
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dialect::Json => "json",
            Dialect::Debian => "debian",
            Dialect::Cargo => "cargo",
        })
    }
}

impl FromStr for Dialect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dialect::ALL
            .into_iter()
            .find(|d| d.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown dialect {s:?}")))
    }
}

/// The reserved root, or the reserved root renamed by a concurrent lowering.
pub(crate) fn is_rooted(name: &PackageName) -> bool {
    match name {
        PackageName::Root => true,
        PackageName::Granular { base, .. } => is_rooted(base),
        _ => false,
    }
}

/// The rooted package of an ecosystem document, adding the reserved root
/// when the document has none.
pub(crate) fn find_root(repo: &mut Repository) -> Result<Package> {
    let rooted: Vec<Package> = repo.packages().filter(|p| is_rooted(&p.name)).collect();
    match rooted.as_slice() {
        [] => {
            repo.insert(Package::root());
            Ok(Package::root())
        }
        [r] => Ok(r.clone()),
        _ => Err(Error::invalid("a document may contain only one root package")),
    }
}

/// The root an ecosystem emitter writes, or an error when the instance's
/// root is an ordinary package, which these dialects cannot single out.
pub(crate) fn emitted_root(inst: &ExtendedInstance, dialect: Dialect) -> Result<()> {
    if is_rooted(&inst.root.name) {
        Ok(())
    } else {
        Err(Error::Emit(format!("{dialect} documents cannot make {} the root", inst.root)))
    }
}

/// Whether a package must appear in an ecosystem document: everything but
/// a reserved root with nothing to say.
pub(crate) fn emits_package(inst: &ExtendedInstance, p: &Package) -> bool {
    if !p.is_root() {
        return true;
    }
    inst.deps.iter().any(|d| d.from == *p)
        || inst.version_formulae.iter().any(|d| d.from == *p)
        || inst.formulae.iter().any(|d| d.from == *p)
        || inst.conflicts.iter().any(|c| c.from == *p)
        || inst.peers.iter().any(|d| d.from == *p)
        || inst.optional.iter().any(|d| d.from == *p)
        || inst.singular.iter().any(|d| d.from == *p)
}

/// A version set described by comparisons against the existing versions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum SetShape {
    All,
    Exact(Version),
    /// Comparisons whose conjunction selects the set.
    Range(Vec<(CmpOp, Version)>),
    /// Not describable by one conjunction.
    Scattered(Vec<Version>),
}

fn sort_numeric(vs: &VersionSet) -> Option<Vec<Version>> {
    let mut out: Vec<Version> = vs.iter().cloned().collect();
    if out.iter().any(|v| v.as_numeric().is_none()) {
        return None;
    }
    out.sort_by(|a, b| compare_versions(a, b).expect("numeric"));
    Some(out)
}

/// Classifies `set` relative to the existing versions `all`.
pub(crate) fn shape(set: &VersionSet, all: &VersionSet) -> SetShape {
    let set: VersionSet = set.intersection(all).cloned().collect();
    if set == *all {
        return SetShape::All;
    }
    if set.len() == 1 {
        return SetShape::Exact(set.into_iter().next().expect("one element"));
    }
    let Some(order) = sort_numeric(all) else {
        return SetShape::Scattered(set.into_iter().collect());
    };
    let inside: Vec<bool> = order.iter().map(|v| set.contains(v)).collect();
    let first = inside.iter().position(|b| *b);
    let last = inside.iter().rposition(|b| *b);
    match (first, last) {
        (None, _) | (_, None) => SetShape::Range(vec![(CmpOp::Lt, order[0].clone())]),
        (Some(lo), Some(hi)) if inside[lo..=hi].iter().all(|b| *b) => {
            let mut cmps = Vec::new();
            if lo > 0 {
                cmps.push((CmpOp::Ge, order[lo].clone()));
            }
            if hi + 1 < order.len() {
                cmps.push((CmpOp::Le, order[hi].clone()));
            }
            SetShape::Range(cmps)
        }
        _ => SetShape::Scattered(set.into_iter().collect()),
    }
}

/// The comparisons of a formula that is a conjunction of comparisons.
pub(crate) fn conjuncts(phi: &VersionFormula) -> Option<Vec<(CmpOp, Version)>> {
    match phi {
        VersionFormula::Top => Some(Vec::new()),
        VersionFormula::Cmp(op, v) => Some(vec![(*op, v.clone())]),
        VersionFormula::And(l, r) => {
            let mut out = conjuncts(l)?;
            out.extend(conjuncts(r)?);
            Some(out)
        }
        VersionFormula::Or(..) => None,
    }
}

/// Conjunction of comparisons; the empty conjunction is `Top`.
pub(crate) fn conjunction(cmps: impl IntoIterator<Item = (CmpOp, Version)>) -> VersionFormula {
    cmps.into_iter()
        .map(|(op, v)| VersionFormula::Cmp(op, v))
        .reduce(VersionFormula::and)
        .unwrap_or(VersionFormula::Top)
}
