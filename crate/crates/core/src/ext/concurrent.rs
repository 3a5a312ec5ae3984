//! Concurrent versions: several versions of a name may be selected as long
//! as their granularities differ, and every dependency is answered by exactly
//! one recorded child.
//!
//! Lowering moves the granularity into the name, so core version uniqueness
//! enforces distinct granularities. A dependency whose versions span several
//! granularities goes through an intermediate package whose versions are
//! those granularities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::calculus::{check_root, check_subset, validate_resolution, CoreInstance, Dependency, Resolution};
use crate::error::{Error, Result};
use crate::name::{GranToken, Package, PackageName, Version, VersionSet};
use crate::report::{Rule, ValidityReport};

/// Maps a version to the class within which versions exclude each other.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Granularity {
    /// Every version is its own class.
    Identity,
    /// The first numeric segment.
    Major,
    /// A single class: ordinary version uniqueness.
    Constant,
    Table(BTreeMap<Version, GranToken>),
}

impl Granularity {
    pub fn apply(&self, v: &Version) -> Result<GranToken> {
        match self {
            Granularity::Identity => Ok(GranToken::of(v.clone())),
            Granularity::Constant => Ok(GranToken::Epsilon),
            Granularity::Major => match v.as_numeric() {
                Some(n) => Ok(GranToken::of(Version::num(&n.major().to_string()))),
                None => Err(Error::invalid(format!("major granularity of non-numeric version {v}"))),
            },
            Granularity::Table(t) => t
                .get(v)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("granularity table has no entry for {v}"))),
        }
    }

    /// The granularity of a package. The reserved root is always `eps`.
    pub fn of(&self, p: &Package) -> Result<GranToken> {
        if p.name == PackageName::Root {
            Ok(GranToken::Epsilon)
        } else {
            self.apply(&p.version)
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Granularity::Identity => f.write_str("identity"),
            Granularity::Major => f.write_str("major"),
            Granularity::Constant => f.write_str("epsilon"),
            Granularity::Table(t) => {
                f.write_str("{")?;
                for (i, (v, g)) in t.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}:{g}")?;
                }
                f.write_str("}")
            }
        }
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Granularity::Identity),
            "major" => Ok(Granularity::Major),
            "epsilon" | "constant" => Ok(Granularity::Constant),
            other => Err(Error::invalid(format!(
                "unknown granularity `{other}`, expected identity, major or epsilon"
            ))),
        }
    }
}

/// `(child, parent)` pairs: the parent's dependency is answered by the child.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParentRelation(BTreeSet<(Package, Package)>);

impl ParentRelation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, child: Package, parent: Package) -> bool {
        self.0.insert((child, parent))
    }

    pub fn contains(&self, child: &Package, parent: &Package) -> bool {
        self.0.contains(&(child.clone(), parent.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Package, &Package)> {
        self.0.iter().map(|(c, p)| (c, p))
    }

    pub fn parents_of<'a>(&'a self, child: &'a Package) -> impl Iterator<Item = &'a Package> {
        self.iter().filter(move |(c, _)| *c == child).map(|(_, p)| p)
    }

    /// The children recorded for `parent`'s dependency `d`.
    pub fn children_for<'a>(&'a self, d: &'a Dependency) -> impl Iterator<Item = &'a Package> {
        self.iter()
            .filter(move |(c, p)| **p == d.from && d.satisfied_by(c))
            .map(|(c, _)| c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(Package, Package)> for ParentRelation {
    fn from_iter<I: IntoIterator<Item = (Package, Package)>>(iter: I) -> Self {
        ParentRelation(iter.into_iter().collect())
    }
}

impl fmt::Display for ParentRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (c, p)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c} <- {p}")?;
        }
        f.write_str("}")
    }
}

/// The lowered name of `p`: its granularity moves into the name.
pub(crate) fn rename(p: &Package, g: &Granularity) -> Result<Package> {
    Ok(Package::new(PackageName::granular(p.name.clone(), g.of(p)?), p.version.clone()))
}

/// Rejects instances the lowering cannot represent: a granularity that is
/// undefined on some version, or two dependencies of one package on one name
/// (they would share an intermediate).
pub(crate) fn check_instance(inst: &CoreInstance, g: &Granularity) -> Result<()> {
    for p in inst.repo().packages() {
        g.of(&p)?;
    }
    let mut seen = BTreeSet::new();
    for d in inst.deps() {
        if !seen.insert((&d.from, &d.on)) {
            return Err(Error::invalid(format!(
                "{} has more than one dependency on {}",
                d.from, d.on
            )));
        }
    }
    Ok(())
}

/// Granularities of a dependency's versions, grouped.
pub(crate) fn split(d: &Dependency, g: &Granularity) -> Result<BTreeMap<GranToken, VersionSet>> {
    let mut out: BTreeMap<GranToken, VersionSet> = BTreeMap::new();
    for u in &d.versions {
        out.entry(g.apply(u)?).or_default().insert(u.clone());
    }
    Ok(out)
}

/// Root inclusion, parent closure and version granularity.
pub(crate) fn concurrent_report(
    inst: &CoreInstance,
    g: &Granularity,
    s: &Resolution,
    pi: &ParentRelation,
) -> Result<ValidityReport> {
    check_subset(inst.repo(), s)?;
    let mut report = ValidityReport::default();
    check_root(&mut report, inst.root(), s.contains(inst.root()));
    for (c, p) in pi.iter() {
        if !s.contains(c) || !s.contains(p) {
            report.push(Rule::Unwitnessed, vec![c.clone(), p.clone()], format!("parent edge {c} <- {p} leaves the resolution"));
        }
    }
    for p in s {
        for d in inst.deps_of(p) {
            let n = pi.children_for(d).filter(|c| s.contains(c)).count();
            if n != 1 {
                report.push(
                    Rule::ParentClosure,
                    vec![p.clone()],
                    format!("{d} has {n} recorded children, expected exactly one"),
                );
            }
        }
    }
    let mut by_name: BTreeMap<&PackageName, Vec<&Package>> = BTreeMap::new();
    for p in s {
        by_name.entry(&p.name).or_default().push(p);
    }
    for group in by_name.values() {
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                if g.of(a)? == g.of(b)? {
                    report.push(
                        Rule::VersionGranularity,
                        vec![(*a).clone(), (*b).clone()],
                        format!("{a} and {b} share granularity {}", g.of(a)?),
                    );
                }
            }
        }
    }
    Ok(report)
}

pub fn validate_concurrent(
    inst: &CoreInstance,
    g: &Granularity,
    s: &Resolution,
    pi: &ParentRelation,
) -> Result<ValidityReport> {
    check_instance(inst, g)?;
    Ok(concurrent_report(inst, g, s, pi)?.finish())
}

pub fn lower_concurrent(inst: &CoreInstance, g: &Granularity) -> Result<CoreInstance> {
    check_instance(inst, g)?;
    let mut repo = inst
        .repo()
        .packages()
        .map(|p| rename(&p, g))
        .collect::<Result<crate::calculus::Repository>>()?;
    let mut deps = Vec::new();
    for d in inst.deps() {
        let from = rename(&d.from, g)?;
        let classes = split(d, g)?;
        if classes.len() == 1 {
            let (w, vs) = classes.into_iter().next().expect("one class");
            deps.push(Dependency::new(from, PackageName::granular(d.on.clone(), w), vs));
            continue;
        }
        let i = PackageName::intermediate(d.from.clone(), d.on.clone());
        let mut ws = VersionSet::new();
        for (w, vs) in classes {
            let iw = Package::new(i.clone(), Version::Gran(w.clone()));
            repo.insert(iw.clone());
            ws.insert(iw.version.clone());
            deps.push(Dependency::new(iw, PackageName::granular(d.on.clone(), w), vs));
        }
        deps.push(Dependency::new(from, i, ws));
    }
    CoreInstance::new(repo, deps, rename(inst.root(), g)?)
}

/// The original packages among the lowered ones.
pub(crate) fn unrename(s: &Resolution) -> Resolution {
    s.iter()
        .filter_map(|p| match &p.name {
            PackageName::Granular { base, .. } => Some(Package::new((**base).clone(), p.version.clone())),
            _ => None,
        })
        .collect()
}

pub(crate) fn require_valid(report: &ValidityReport, what: &str) -> Result<()> {
    if report.is_valid() {
        Ok(())
    } else {
        Err(Error::invalid(format!("not a {what}: {report}")))
    }
}

/// Strips granular names and reads the parent relation off the selected
/// intermediates and direct dependencies.
pub fn lift_concurrent(
    s: &Resolution,
    inst: &CoreInstance,
    g: &Granularity,
) -> Result<(Resolution, ParentRelation)> {
    let lowered = lower_concurrent(inst, g)?;
    require_valid(&validate_resolution(&lowered, s)?, "resolution of the lowered instance")?;
    let sc = unrename(s);
    let mut pi = ParentRelation::new();
    for p in &sc {
        for d in inst.deps_of(p) {
            let classes = split(d, g)?;
            let grans: Vec<GranToken> = if classes.len() == 1 {
                classes.into_keys().collect()
            } else {
                let i = PackageName::intermediate(p.clone(), d.on.clone());
                s.versions_of(&i)
                    .filter_map(|v| match v {
                        Version::Gran(w) => Some(w.clone()),
                        _ => None,
                    })
                    .collect()
            };
            for w in grans {
                let name = PackageName::granular(d.on.clone(), w);
                for u in s.versions_of(&name).filter(|u| d.versions.contains(u)) {
                    pi.insert(Package::new(d.on.clone(), u.clone()), p.clone());
                }
            }
        }
    }
    Ok((sc, pi))
}

pub fn embed_concurrent(
    sc: &Resolution,
    pi: &ParentRelation,
    inst: &CoreInstance,
    g: &Granularity,
) -> Result<Resolution> {
    require_valid(&validate_concurrent(inst, g, sc, pi)?, "concurrent resolution")?;
    let mut out = BTreeSet::new();
    for p in sc {
        out.insert(rename(p, g)?);
        for d in inst.deps_of(p) {
            if split(d, g)?.len() < 2 {
                continue;
            }
            let i = PackageName::intermediate(p.clone(), d.on.clone());
            for c in pi.children_for(d).filter(|c| sc.contains(c)) {
                out.insert(Package::new(i.clone(), Version::Gran(g.apply(&c.version)?)));
            }
        }
    }
    Ok(Resolution::new(out))
}
