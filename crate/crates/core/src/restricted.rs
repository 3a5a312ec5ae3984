//! Resolvers for restricted dependency languages that avoid the general
//! search: lower-bound-only constraints (minimal version selection and its
//! latest-version variant), resolution without version uniqueness, and
//! dependencies on single packages.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::calculus::{check_subset, CoreInstance, Dependency, Outcome, Repository, Resolution};
use crate::error::{Error, Result};
use crate::name::{Package, PackageName, Version};

/// `from` needs some version of `on` at least `min`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MinBoundDependency {
    pub from: Package,
    pub on: PackageName,
    pub min: Version,
}

impl MinBoundDependency {
    pub fn new(from: Package, on: PackageName, min: Version) -> Self {
        MinBoundDependency { from, on, min }
    }

    /// The equivalent set dependency over the versions of `repo`.
    pub fn to_dependency(&self, repo: &Repository) -> Dependency {
        let vs = repo
            .versions(&self.on)
            .iter()
            .filter(|v| at_least(v, &self.min))
            .cloned()
            .collect();
        Dependency::new(self.from.clone(), self.on.clone(), vs)
    }
}

impl fmt::Display for MinBoundDependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} >={}", self.from, self.on, self.min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MvsPolicy {
    /// The largest lower bound that applies to each name.
    Minimum,
    /// The newest version of each reachable name.
    Latest,
}

fn at_least(v: &Version, min: &Version) -> bool {
    matches!((v.as_numeric(), min.as_numeric()), (Some(a), Some(b)) if a >= b)
}

fn check_min_bounds(repo: &Repository, mdeps: &[MinBoundDependency], root: &Package) -> Result<()> {
    check_subset(repo, std::iter::once(root).chain(mdeps.iter().map(|d| &d.from)))?;
    match mdeps.iter().find(|d| d.min.as_numeric().is_none()) {
        Some(d) => Err(Error::invalid(format!("{d}: lower bound must be numeric"))),
        None => Ok(()),
    }
}

/// The core instance whose dependencies accept every version above each bound.
pub fn min_bound_instance(
    repo: &Repository,
    mdeps: &[MinBoundDependency],
    root: &Package,
) -> Result<CoreInstance> {
    check_min_bounds(repo, mdeps, root)?;
    let deps = mdeps.iter().map(|d| d.to_dependency(repo));
    CoreInstance::new(repo.clone(), deps, root.clone())
}

/// Resolves lower-bound dependencies without search.
///
/// `Minimum` follows every requirement reachable from the root, each
/// requirement naming the smallest existing version meeting its bound, and
/// then keeps the largest requirement per name. `Latest` picks the newest
/// version of each name reachable through the picked packages.
pub fn mvs_resolve(
    repo: &Repository,
    mdeps: &[MinBoundDependency],
    root: &Package,
    policy: MvsPolicy,
) -> Result<Outcome<Resolution>> {
    check_min_bounds(repo, mdeps, root)?;
    let mut by_from: HashMap<&Package, Vec<&MinBoundDependency>> = HashMap::new();
    for d in mdeps {
        by_from.entry(&d.from).or_default().push(d);
    }
    let out = match policy {
        MvsPolicy::Minimum => minimum(repo, &by_from, root),
        MvsPolicy::Latest => latest(repo, &by_from, root),
    };
    Ok(match out {
        Ok(s) => Outcome::Resolved(s),
        Err(reason) => Outcome::Unresolvable(reason),
    })
}

fn lowest_meeting(repo: &Repository, d: &MinBoundDependency) -> std::result::Result<Version, String> {
    repo.versions(&d.on)
        .iter()
        .filter(|v| at_least(v, &d.min))
        .min_by(|a, b| a.as_numeric().cmp(&b.as_numeric()))
        .cloned()
        .ok_or_else(|| format!("unresolvable: no version of {} satisfies {d}", d.on))
}

fn newest(repo: &Repository, name: &PackageName) -> Option<Version> {
    repo.versions(name)
        .iter()
        .filter(|v| v.as_numeric().is_some())
        .max_by(|a, b| a.as_numeric().cmp(&b.as_numeric()))
        .cloned()
}

fn minimum(
    repo: &Repository,
    by_from: &HashMap<&Package, Vec<&MinBoundDependency>>,
    root: &Package,
) -> std::result::Result<Resolution, String> {
    let mut seen: BTreeSet<Package> = BTreeSet::from([root.clone()]);
    let mut queue = VecDeque::from([root.clone()]);
    let mut chosen: BTreeMap<PackageName, Version> = BTreeMap::new();
    while let Some(p) = queue.pop_front() {
        for d in by_from.get(&p).into_iter().flatten() {
            let v = lowest_meeting(repo, d)?;
            let slot = chosen.entry(d.on.clone()).or_insert_with(|| v.clone());
            if v.as_numeric() > slot.as_numeric() {
                *slot = v.clone();
            }
            let next = Package::new(d.on.clone(), v);
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    if let Some(v) = chosen.get(&root.name) {
        if *v != root.version {
            return Err(format!("unresolvable: the root {root} is required at {v}"));
        }
    }
    Ok(std::iter::once(root.clone())
        .chain(chosen.into_iter().map(|(n, v)| Package::new(n, v)))
        .collect())
}

fn latest(
    repo: &Repository,
    by_from: &HashMap<&Package, Vec<&MinBoundDependency>>,
    root: &Package,
) -> std::result::Result<Resolution, String> {
    let mut chosen: BTreeMap<PackageName, Version> =
        BTreeMap::from([(root.name.clone(), root.version.clone())]);
    let mut queue = VecDeque::from([root.clone()]);
    while let Some(p) = queue.pop_front() {
        for d in by_from.get(&p).into_iter().flatten() {
            let v = match chosen.get(&d.on) {
                Some(v) => v.clone(),
                None => {
                    let v = newest(repo, &d.on).ok_or_else(|| {
                        format!("unresolvable: no version of {} satisfies {d}", d.on)
                    })?;
                    chosen.insert(d.on.clone(), v.clone());
                    queue.push_back(Package::new(d.on.clone(), v.clone()));
                    v
                }
            };
            if !at_least(&v, &d.min) {
                return Err(format!("unresolvable: {}@{v} does not satisfy {d}", d.on));
            }
        }
    }
    Ok(chosen.into_iter().map(|(n, v)| Package::new(n, v)).collect())
}

/// Follows every dependency from the root, taking the highest acceptable
/// version each time. Several versions of a name may be selected.
pub fn multiversion_greedy_resolve(inst: &CoreInstance) -> Outcome<Resolution> {
    let mut seen: BTreeSet<Package> = BTreeSet::from([inst.root().clone()]);
    let mut stack = vec![inst.root().clone()];
    while let Some(p) = stack.pop() {
        for d in inst.deps_of(&p).iter().rev() {
            let Some(v) = d.versions.last() else {
                return Outcome::Unresolvable(format!("unresolvable: {d} has no acceptable version"));
            };
            let next = Package::new(d.on.clone(), v.clone());
            if seen.insert(next.clone()) {
                stack.push(next);
            }
        }
    }
    Outcome::Resolved(Resolution::new(seen))
}

/// `from` needs exactly `to`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SingularDependency {
    pub from: Package,
    pub to: Package,
}

impl SingularDependency {
    pub fn new(from: Package, to: Package) -> Self {
        SingularDependency { from, to }
    }

    pub fn to_dependency(&self) -> Dependency {
        Dependency::new(
            self.from.clone(),
            self.to.name.clone(),
            [self.to.version.clone()].into(),
        )
    }
}

/// The core instance with a singleton version set per dependency.
pub fn singular_instance(
    repo: &Repository,
    sdeps: &[SingularDependency],
    root: &Package,
) -> Result<CoreInstance> {
    CoreInstance::new(repo.clone(), sdeps.iter().map(SingularDependency::to_dependency), root.clone())
}

/// The closure of the root under the dependencies, if it selects one
/// version per name.
pub fn singular_resolve(
    repo: &Repository,
    sdeps: &[SingularDependency],
    root: &Package,
) -> Result<Outcome<Resolution>> {
    check_subset(
        repo,
        std::iter::once(root).chain(sdeps.iter().flat_map(|d| [&d.from, &d.to])),
    )?;
    let mut by_from: HashMap<&Package, Vec<&Package>> = HashMap::new();
    for d in sdeps {
        by_from.entry(&d.from).or_default().push(&d.to);
    }
    let mut seen: BTreeSet<Package> = BTreeSet::from([root.clone()]);
    let mut queue = VecDeque::from([root]);
    while let Some(p) = queue.pop_front() {
        for &q in by_from.get(p).into_iter().flatten() {
            if seen.insert(q.clone()) {
                queue.push_back(q);
            }
        }
    }
    let mut by_name: BTreeMap<&PackageName, &Package> = BTreeMap::new();
    for p in &seen {
        if let Some(other) = by_name.insert(&p.name, p) {
            return Ok(Outcome::Unresolvable(format!(
                "unresolvable: both {other} and {p} are required"
            )));
        }
    }
    Ok(Outcome::Resolved(Resolution::new(seen)))
}
