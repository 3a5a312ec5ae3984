//! Virtual packages: a package may provide a name, at one version or at
//! every version (`*`), and satisfy dependencies on that name.
//!
//! A dependency with at least one applicable provider is routed through a
//! choice name owned by the depender. Each choice version encodes either a
//! provider or a real version of the name and depends on exactly that.

use std::collections::BTreeSet;
use std::fmt;

use crate::calculus::{
    check_root, check_subset, check_uniqueness, validate_resolution, CoreInstance, Dependency,
    Repository, Resolution,
};
use crate::error::{Error, Result};
use crate::name::{Package, PackageName, Version, VersionSet};
use crate::report::{Rule, ValidityReport};

/// `provider` provides `name` at `version`, which may be [`Version::Wildcard`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Provides {
    pub provider: Package,
    pub name: PackageName,
    pub version: Version,
}

impl Provides {
    pub fn new(provider: Package, name: PackageName, version: Version) -> Self {
        Provides { provider, name, version }
    }

    /// Whether this provision can satisfy a dependency on `(on, vs)`.
    pub fn matches(&self, on: &PackageName, vs: &VersionSet) -> bool {
        self.name == *on && (self.version == Version::Wildcard || vs.contains(&self.version))
    }
}

impl fmt::Display for Provides {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} provides {}@{}", self.provider, self.name, self.version)
    }
}

/// Pairs `(provider, depender)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProviderRelation(BTreeSet<(Package, Package)>);

impl ProviderRelation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, provider: Package, depender: Package) -> bool {
        self.0.insert((provider, depender))
    }

    pub fn contains(&self, provider: &Package, depender: &Package) -> bool {
        self.0.contains(&(provider.clone(), depender.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Package, Package)> {
        self.0.iter()
    }

    pub fn providers_for<'a>(&'a self, depender: &'a Package) -> impl Iterator<Item = &'a Package> {
        self.0.iter().filter(move |(_, d)| d == depender).map(|(p, _)| p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(Package, Package)> for ProviderRelation {
    fn from_iter<I: IntoIterator<Item = (Package, Package)>>(iter: I) -> Self {
        ProviderRelation(iter.into_iter().collect())
    }
}

impl fmt::Display for ProviderRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.0.iter().map(|(m, p)| format!("{m} for {p}")).collect();
        write!(f, "{{{}}}", items.join(", "))
    }
}

/// Dependencies may name packages that do not exist, such as purely
/// virtual names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VirtualInstance {
    repo: Repository,
    deps: Vec<Dependency>,
    root: Package,
    provides: Vec<Provides>,
}

impl VirtualInstance {
    /// Providers must exist, and a package may have at most one dependency
    /// that some provider applies to, since the provider relation does not
    /// say which dependency a provider serves.
    pub fn new(
        repo: Repository,
        deps: impl IntoIterator<Item = Dependency>,
        root: Package,
        provides: impl IntoIterator<Item = Provides>,
    ) -> Result<Self> {
        let deps: Vec<Dependency> = deps.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let provides: Vec<Provides> = provides.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        check_subset(&repo, std::iter::once(&root))?;
        check_subset(&repo, deps.iter().map(|d| &d.from))?;
        check_subset(&repo, provides.iter().map(|t| &t.provider))?;
        if provides.iter().any(|t| t.name == PackageName::Root) {
            return Err(Error::invalid("the root name cannot be provided"));
        }
        let mut seen = BTreeSet::new();
        for d in deps.iter().filter(|d| routed(d, &provides)) {
            if !seen.insert(&d.from) {
                return Err(Error::invalid(format!(
                    "{} has more than one dependency that a provider can satisfy",
                    d.from
                )));
            }
        }
        Ok(VirtualInstance { repo, deps, root, provides })
    }

    pub fn from_core(inst: &CoreInstance, provides: impl IntoIterator<Item = Provides>) -> Result<Self> {
        Self::new(inst.repo().clone(), inst.deps().to_vec(), inst.root().clone(), provides)
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

    pub fn provides(&self) -> &[Provides] {
        &self.provides
    }

    pub fn deps_of<'a>(&'a self, p: &'a Package) -> impl Iterator<Item = &'a Dependency> {
        self.deps.iter().filter(move |d| d.from == *p)
    }

    fn routed_deps_of<'a>(&'a self, p: &'a Package) -> impl Iterator<Item = &'a Dependency> {
        self.deps_of(p).filter(|d| routed(d, &self.provides))
    }
}

/// Whether `q` is itself a direct match for the dependency.
fn direct(d: &Dependency, q: &Package) -> bool {
    d.satisfied_by(q)
}

/// Providers that may satisfy `d` other than by being a direct match.
fn applicable<'a>(d: &'a Dependency, provides: &'a [Provides]) -> impl Iterator<Item = &'a Package> {
    provides
        .iter()
        .filter(move |t| t.matches(&d.on, &d.versions) && !direct(d, &t.provider))
        .map(|t| &t.provider)
}

fn routed(d: &Dependency, provides: &[Provides]) -> bool {
    applicable(d, provides).next().is_some()
}

/// Each dependency of a selected package is met by a selected real match,
/// or by exactly one selected provider recorded in `rho`.
pub fn validate_virtual(
    inst: &VirtualInstance,
    s: &Resolution,
    rho: &ProviderRelation,
) -> Result<ValidityReport> {
    check_subset(inst.repo(), s)?;
    let mut report = ValidityReport::default();
    check_root(&mut report, inst.root(), s.contains(inst.root()));
    for (m, p) in rho.iter() {
        let witnessed = s.contains(m)
            && s.contains(p)
            && inst.deps_of(p).any(|d| applicable(d, &inst.provides).any(|q| q == m));
        if !witnessed {
            report.push(Rule::Unwitnessed, vec![m.clone(), p.clone()], format!("{m} is not a provider {p} can use"));
        }
    }
    for p in s {
        for d in inst.deps_of(p) {
            let chosen: Vec<&Package> = applicable(d, &inst.provides)
                .filter(|m| s.contains(m) && rho.contains(m, p))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let ok = match chosen.len() {
                0 => s.iter().any(|q| direct(d, q)),
                1 => true,
                _ => false,
            };
            if !ok {
                let mut witnesses = vec![p.clone()];
                witnesses.extend(chosen.iter().map(|m| (*m).clone()));
                report.push(Rule::VirtualClosure, witnesses, format!("{d} has {} recorded providers and no single match", chosen.len()));
            }
        }
    }
    check_uniqueness(&mut report, s);
    Ok(report.finish())
}

fn choice(p: &Package, on: &PackageName) -> PackageName {
    PackageName::choice(p.clone(), on.clone())
}

fn encoded(p: &Package) -> Version {
    Version::Encoded(Box::new(p.clone()))
}

/// The packages a routed dependency may choose between.
fn targets(inst: &VirtualInstance, d: &Dependency) -> BTreeSet<Package> {
    let real = d
        .versions
        .intersection(inst.repo().versions(&d.on))
        .map(|u| Package::new(d.on.clone(), u.clone()));
    applicable(d, &inst.provides).cloned().chain(real).collect()
}

pub fn lower_virtual(inst: &VirtualInstance) -> Result<CoreInstance> {
    let mut repo: Repository = inst.repo().clone();
    let mut deps = Vec::new();
    for d in inst.deps() {
        if !routed(d, &inst.provides) {
            let vs = d.versions.intersection(inst.repo().versions(&d.on)).cloned().collect();
            deps.push(Dependency::new(d.from.clone(), d.on.clone(), vs));
            continue;
        }
        let c = choice(&d.from, &d.on);
        let ts = targets(inst, d);
        deps.push(Dependency::new(d.from.clone(), c.clone(), ts.iter().map(encoded).collect()));
        for t in ts {
            let cv = Package::new(c.clone(), encoded(&t));
            repo.insert(cv.clone());
            deps.push(Dependency::new(cv, t.name.clone(), [t.version.clone()].into()));
        }
    }
    CoreInstance::new(repo, deps, inst.root().clone())
}

pub fn lift_virtual(
    s: &Resolution,
    inst: &VirtualInstance,
) -> Result<(Resolution, ProviderRelation)> {
    let lowered = lower_virtual(inst)?;
    let report = validate_resolution(&lowered, s)?;
    if !report.is_valid() {
        return Err(Error::invalid(format!("not a resolution of the lowered instance: {report}")));
    }
    let sp: Resolution = s.iter().filter(|p| inst.repo().contains(p)).cloned().collect();
    let mut rho = ProviderRelation::new();
    for p in &sp {
        for d in inst.routed_deps_of(p) {
            for v in s.versions_of(&choice(p, &d.on)) {
                if let Version::Encoded(m) = v {
                    if !direct(d, m) {
                        rho.insert((**m).clone(), p.clone());
                    }
                }
            }
        }
    }
    Ok((sp, rho))
}

/// A recorded provider takes precedence over a real match for the same
/// dependency, so each choice name gets exactly one version.
pub fn embed_virtual(
    sp: &Resolution,
    rho: &ProviderRelation,
    inst: &VirtualInstance,
) -> Result<Resolution> {
    let report = validate_virtual(inst, sp, rho)?;
    if !report.is_valid() {
        return Err(Error::invalid(format!("not a virtual resolution: {report}")));
    }
    let mut out: BTreeSet<Package> = sp.selected().clone();
    for p in sp {
        for d in inst.routed_deps_of(p) {
            let c = choice(p, &d.on);
            let by_provider = applicable(d, &inst.provides).find(|m| rho.contains(m, p));
            let target = by_provider.or_else(|| sp.iter().find(|q| direct(d, q)));
            if let Some(t) = target {
                out.insert(Package::new(c, encoded(t)));
            }
        }
    }
    Ok(Resolution::new(out))
}
