//! The core calculus: repositories, dependencies, instances and resolutions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::name::{DisplaySet, Package, PackageName, Version, VersionSet};
use crate::report::{Rule, ValidityReport};
use crate::versions::compare_versions;

/// The set of packages that exist, indexed by name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Repository {
    by_name: BTreeMap<PackageName, VersionSet>,
}

static EMPTY: VersionSet = VersionSet::new();

impl Repository {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the package was already present.
    pub fn insert(&mut self, p: Package) -> bool {
        self.by_name.entry(p.name).or_default().insert(p.version)
    }

    pub fn contains(&self, p: &Package) -> bool {
        self.by_name.get(&p.name).is_some_and(|vs| vs.contains(&p.version))
    }

    /// `V_n`: the versions of `name` that exist. Empty for unknown names.
    pub fn versions(&self, name: &PackageName) -> &VersionSet {
        self.by_name.get(name).unwrap_or(&EMPTY)
    }

    pub fn names(&self) -> impl Iterator<Item = &PackageName> {
        self.by_name.keys()
    }

    pub fn packages(&self) -> impl Iterator<Item = Package> + '_ {
        self.by_name
            .iter()
            .flat_map(|(n, vs)| vs.iter().map(move |v| Package::new(n.clone(), v.clone())))
    }

    pub fn len(&self) -> usize {
        self.by_name.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }

    pub fn extend(&mut self, packages: impl IntoIterator<Item = Package>) {
        for p in packages {
            self.insert(p);
        }
    }
}

impl FromIterator<Package> for Repository {
    fn from_iter<I: IntoIterator<Item = Package>>(iter: I) -> Self {
        let mut repo = Repository::new();
        repo.extend(iter);
        repo
    }
}

/// `from` depends on `on` with any version in `versions`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dependency {
    pub from: Package,
    pub on: PackageName,
    pub versions: VersionSet,
}

impl Dependency {
    pub fn new(from: Package, on: PackageName, versions: VersionSet) -> Self {
        Dependency { from, on, versions }
    }

    pub fn satisfied_by(&self, p: &Package) -> bool {
        p.name == self.on && self.versions.contains(&p.version)
    }
}

impl fmt::Display for Dependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} {}", self.from, self.on, DisplaySet(&self.versions))
    }
}

/// A repository, a dependency relation and a root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreInstance {
    repo: Repository,
    /// Sorted and deduplicated, so dependencies of one package are contiguous.
    deps: Vec<Dependency>,
    root: Package,
}

impl CoreInstance {
    /// Builds an instance, checking that every referenced package exists.
    pub fn new(
        repo: Repository,
        deps: impl IntoIterator<Item = Dependency>,
        root: Package,
    ) -> Result<Self> {
        let deps: BTreeSet<Dependency> = deps.into_iter().collect();
        if !repo.contains(&root) {
            return Err(Error::invalid(format!("root {root} is not in the repository")));
        }
        for p in repo.packages() {
            if p.version == Version::Wildcard {
                return Err(Error::invalid(format!("{p}: wildcard versions cannot exist")));
            }
        }
        for d in &deps {
            if !repo.contains(&d.from) {
                return Err(Error::invalid(format!("{d}: depender is not in the repository")));
            }
            for u in &d.versions {
                if !repo.versions(&d.on).contains(u) {
                    return Err(Error::invalid(format!(
                        "{d}: dependee {}@{u} is not in the repository",
                        d.on
                    )));
                }
            }
        }
        Ok(CoreInstance {
            repo,
            deps: deps.into_iter().collect(),
            root,
        })
    }

    /// Injects the reserved root package, whose dependencies are the query.
    pub fn with_query(
        mut repo: Repository,
        deps: impl IntoIterator<Item = Dependency>,
        query: impl IntoIterator<Item = (PackageName, VersionSet)>,
    ) -> Result<Self> {
        let root = Package::root();
        repo.insert(root.clone());
        let query = query
            .into_iter()
            .map(|(on, vs)| Dependency::new(root.clone(), on, vs));
        let deps: Vec<Dependency> = deps.into_iter().chain(query).collect();
        Self::new(repo, deps, root)
    }

    pub fn repo(&self) -> &Repository {
        &self.repo
    }

    pub fn deps(&self) -> &[Dependency] {
        &self.deps
    }

    pub fn root(&self) -> &Package {
        &self.root
    }

    /// The dependencies declared by `p`, in canonical order.
    pub fn deps_of(&self, p: &Package) -> &[Dependency] {
        let lo = self.deps.partition_point(|d| d.from < *p);
        let hi = self.deps.partition_point(|d| d.from <= *p);
        &self.deps[lo..hi]
    }

    /// The immediate dependencies of the root.
    pub fn query(&self) -> &[Dependency] {
        self.deps_of(&self.root)
    }

    /// Dependencies with an empty version set; they can never be satisfied.
    pub fn warnings(&self) -> Vec<String> {
        self.deps
            .iter()
            .filter(|d| d.versions.is_empty())
            .map(|d| format!("{d}: empty version set is unsatisfiable"))
            .collect()
    }
}

impl fmt::Display for CoreInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "root {}", self.root)?;
        for d in &self.deps {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

/// A selected set of packages.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Resolution(BTreeSet<Package>);

impl Resolution {
    pub fn new(selected: BTreeSet<Package>) -> Self {
        Resolution(selected)
    }

    pub fn selected(&self) -> &BTreeSet<Package> {
        &self.0
    }

    pub fn into_inner(self) -> BTreeSet<Package> {
        self.0
    }

    pub fn contains(&self, p: &Package) -> bool {
        self.0.contains(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Package> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Selected versions of `name`.
    pub fn versions_of<'a>(&'a self, name: &'a PackageName) -> impl Iterator<Item = &'a Version> {
        self.0.iter().filter(move |p| p.name == *name).map(|p| &p.version)
    }

    pub fn satisfies(&self, d: &Dependency) -> bool {
        d.versions
            .iter()
            .any(|v| self.0.contains(&Package::new(d.on.clone(), v.clone())))
    }
}

impl FromIterator<Package> for Resolution {
    fn from_iter<I: IntoIterator<Item = Package>>(iter: I) -> Self {
        Resolution(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Resolution {
    type Item = &'a Package;
    type IntoIter = std::collections::btree_set::Iter<'a, Package>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("}")
    }
}

/// The result of a resolver: unresolvable instances are an ordinary answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome<T> {
    Resolved(T),
    Unresolvable(String),
}

impl<T> Outcome<T> {
    pub fn is_resolved(&self) -> bool {
        matches!(self, Outcome::Resolved(_))
    }

    pub fn resolved(self) -> Option<T> {
        match self {
            Outcome::Resolved(t) => Some(t),
            Outcome::Unresolvable(_) => None,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Outcome<U> {
        match self {
            Outcome::Resolved(t) => Outcome::Resolved(f(t)),
            Outcome::Unresolvable(why) => Outcome::Unresolvable(why),
        }
    }
}

pub(crate) fn check_subset<'a>(
    repo: &Repository,
    selected: impl IntoIterator<Item = &'a Package>,
) -> Result<()> {
    for p in selected {
        if !repo.contains(p) {
            return Err(Error::invalid(format!("{p} is not in the repository")));
        }
    }
    Ok(())
}

pub(crate) fn check_uniqueness<'a>(
    report: &mut ValidityReport,
    selected: impl IntoIterator<Item = &'a Package>,
) {
    let mut seen: BTreeMap<&PackageName, &Package> = BTreeMap::new();
    for p in selected {
        if let Some(prev) = seen.insert(&p.name, p) {
            report.push(
                Rule::VersionUniqueness,
                vec![prev.clone(), p.clone()],
                format!("{prev} and {p} share a name"),
            );
        }
    }
}

pub(crate) fn check_root(report: &mut ValidityReport, root: &Package, present: bool) {
    if !present {
        report.push(Rule::RootInclusion, vec![root.clone()], format!("root {root} is not selected"));
    }
}

/// Checks root inclusion, dependency closure and version uniqueness.
pub fn validate_resolution(inst: &CoreInstance, s: &Resolution) -> Result<ValidityReport> {
    check_subset(inst.repo(), s)?;
    let mut report = ValidityReport::default();
    check_root(&mut report, inst.root(), s.contains(inst.root()));
    for p in s {
        for d in inst.deps_of(p) {
            if !s.satisfies(d) {
                report.push(Rule::DependencyClosure, vec![p.clone()], format!("{d} is unsatisfied"));
            }
        }
    }
    check_uniqueness(&mut report, s);
    Ok(report.finish())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResolutionOrder {
    LEq,
    GEq,
    Eq,
    Incomparable,
}

/// `s1 <= s2` iff every package of `s2` has a same-name package in `s1`
/// whose version is no greater.
fn leq(s1: &Resolution, s2: &Resolution) -> Result<bool> {
    for p2 in s2 {
        let mut found = false;
        for v1 in s1.versions_of(&p2.name) {
            if compare_versions(v1, &p2.version)? != Ordering::Greater {
                found = true;
                break;
            }
        }
        if !found {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn compare_resolutions(s1: &Resolution, s2: &Resolution) -> Result<ResolutionOrder> {
    Ok(match (leq(s1, s2)?, leq(s2, s1)?) {
        (true, true) => ResolutionOrder::Eq,
        (true, false) => ResolutionOrder::LEq,
        (false, true) => ResolutionOrder::GEq,
        (false, false) => ResolutionOrder::Incomparable,
    })
}

/// The resolutions with no strictly fresher resolution in `rs`.
pub fn maximal_resolutions(rs: &[Resolution]) -> Result<Vec<Resolution>> {
    let mut out = Vec::new();
    for s in rs {
        let mut dominated = false;
        for t in rs {
            if compare_resolutions(s, t)? == ResolutionOrder::LEq {
                dominated = true;
                break;
            }
        }
        if !dominated {
            out.push(s.clone());
        }
    }
    Ok(out)
}
