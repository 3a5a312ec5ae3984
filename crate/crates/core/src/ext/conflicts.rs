//! Conflicts: a selected package excludes some versions of a name.
//!
//! Lowering introduces one guard name per conflicting `(name, versions)`
//! pair, with versions `#0` and `#1`. The declarer needs `#1` and every
//! excluded package needs `#0`, so version uniqueness keeps them apart.

use std::collections::BTreeSet;
use std::fmt;

use crate::calculus::{check_subset, validate_resolution, CoreInstance, Dependency, Resolution};
use crate::error::{Error, Result};
use crate::name::{DisplaySet, Package, PackageName, Version, VersionSet};
use crate::report::{Rule, ValidityReport};

/// `from` conflicts with every version of `on` in `versions`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Conflict {
    pub from: Package,
    pub on: PackageName,
    pub versions: VersionSet,
}

impl Conflict {
    pub fn new(from: Package, on: PackageName, versions: VersionSet) -> Self {
        Conflict { from, on, versions }
    }

    pub fn guard(&self) -> PackageName {
        PackageName::guard(self.on.clone(), self.versions.clone())
    }

    pub fn excludes(&self, p: &Package) -> bool {
        p.name == self.on && self.versions.contains(&p.version)
    }
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} conflicts {} {}", self.from, self.on, DisplaySet(&self.versions))
    }
}

fn check_declarers(inst: &CoreInstance, conflicts: &[Conflict]) -> Result<()> {
    check_subset(inst.repo(), conflicts.iter().map(|c| &c.from))
}

/// Core validity plus: no selected package conflicts with another selected one.
pub fn validate_conflict_resolution(
    inst: &CoreInstance,
    conflicts: &[Conflict],
    s: &Resolution,
) -> Result<ValidityReport> {
    check_declarers(inst, conflicts)?;
    let mut report = validate_resolution(inst, s)?;
    for c in conflicts.iter().filter(|c| s.contains(&c.from)) {
        for p in s.iter().filter(|p| c.excludes(p)) {
            report.push(
                Rule::ConflictAvoidance,
                vec![c.from.clone(), p.clone()],
                format!("{c}, but {p} is selected"),
            );
        }
    }
    Ok(report.finish())
}

pub fn lower_conflicts(inst: &CoreInstance, conflicts: &[Conflict]) -> Result<CoreInstance> {
    check_declarers(inst, conflicts)?;
    let mut repo = inst.repo().clone();
    let mut deps: Vec<Dependency> = inst.deps().to_vec();
    for c in conflicts {
        let guard = c.guard();
        repo.insert(Package::new(guard.clone(), Version::Marker0));
        repo.insert(Package::new(guard.clone(), Version::Marker1));
        deps.push(Dependency::new(c.from.clone(), guard.clone(), [Version::Marker1].into()));
        for u in c.versions.intersection(inst.repo().versions(&c.on)) {
            deps.push(Dependency::new(
                Package::new(c.on.clone(), u.clone()),
                guard.clone(),
                [Version::Marker0].into(),
            ));
        }
    }
    CoreInstance::new(repo, deps, inst.root().clone())
}

/// Drops the guard packages from a resolution of the lowered instance.
pub fn lift_conflict_resolution(
    s: &Resolution,
    inst: &CoreInstance,
    conflicts: &[Conflict],
) -> Result<Resolution> {
    let lowered = lower_conflicts(inst, conflicts)?;
    let report = validate_resolution(&lowered, s)?;
    if !report.is_valid() {
        return Err(Error::invalid(format!("not a resolution of the lowered instance: {report}")));
    }
    Ok(s.iter().filter(|p| inst.repo().contains(p)).cloned().collect())
}

/// Adds the guard versions that a conflict-free resolution needs.
pub fn embed_conflict_resolution(
    s: &Resolution,
    inst: &CoreInstance,
    conflicts: &[Conflict],
) -> Result<Resolution> {
    let report = validate_conflict_resolution(inst, conflicts, s)?;
    if !report.is_valid() {
        return Err(Error::invalid(format!("not a conflict resolution: {report}")));
    }
    let mut out: BTreeSet<Package> = s.selected().clone();
    for c in conflicts {
        if s.contains(&c.from) {
            out.insert(Package::new(c.guard(), Version::Marker1));
        }
        if s.iter().any(|p| c.excludes(p)) {
            out.insert(Package::new(c.guard(), Version::Marker0));
        }
    }
    Ok(Resolution::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::Repository;
    use crate::name::versions;

    fn conflict_example() -> (CoreInstance, Vec<Conflict>) {
        let repo: Repository = [Package::atom("A", "1"), Package::atom("B", "1"), Package::atom("B", "2")]
            .into_iter()
            .collect();
        let inst =
            CoreInstance::with_query(repo, [], [(PackageName::atom("A"), versions(&["1"]))]).unwrap();
        let gamma = vec![Conflict::new(Package::atom("A", "1"), PackageName::atom("B"), versions(&["1", "2"]))];
        (inst, gamma)
    }

    fn set(ps: &[Package]) -> Resolution {
        ps.iter().cloned().collect()
    }

    #[test]
    fn conflict_example_reduction() {
        let (inst, gamma) = conflict_example();
        let lowered = lower_conflicts(&inst, &gamma).unwrap();
        let guard = PackageName::guard(PackageName::atom("B"), versions(&["1", "2"]));
        let added: Vec<String> = lowered
            .deps()
            .iter()
            .filter(|d| !inst.deps().contains(d))
            .map(ToString::to_string)
            .collect();
        assert_eq!(
            added,
            [
                format!("A@1 -> {guard} {{#1}}"),
                format!("B@1 -> {guard} {{#0}}"),
                format!("B@2 -> {guard} {{#0}}"),
            ]
        );
    }

    #[test]
    fn avoidance() {
        let (inst, gamma) = conflict_example();
        let ok = set(&[Package::root(), Package::atom("A", "1")]);
        assert!(validate_conflict_resolution(&inst, &gamma, &ok).unwrap().is_valid());
        let bad = set(&[Package::root(), Package::atom("A", "1"), Package::atom("B", "1")]);
        let report = validate_conflict_resolution(&inst, &gamma, &bad).unwrap();
        assert!(report.has(Rule::ConflictAvoidance));
        assert!(validate_conflict_resolution(&inst, &[], &bad).unwrap().is_valid());
    }

    #[test]
    fn lift_and_embed() {
        let (inst, gamma) = conflict_example();
        let guard = gamma[0].guard();
        let ok = set(&[Package::root(), Package::atom("A", "1")]);
        let core = embed_conflict_resolution(&ok, &inst, &gamma).unwrap();
        assert_eq!(core, set(&[Package::root(), Package::atom("A", "1"), Package::new(guard, Version::Marker1)]));
        assert_eq!(lift_conflict_resolution(&core, &inst, &gamma).unwrap(), ok);
    }

    #[test]
    fn separate_guard_families() {
        let (inst, _) = conflict_example();
        let gamma = [
            Conflict::new(Package::atom("A", "1"), PackageName::atom("B"), versions(&["1"])),
            Conflict::new(Package::atom("A", "1"), PackageName::atom("B"), versions(&["2"])),
        ];
        let lowered = lower_conflicts(&inst, &gamma).unwrap();
        assert_eq!(lowered.repo().len(), inst.repo().len() + 4);
    }
}
