//! Peer dependencies on top of concurrent versions: a child may constrain
//! which version of a name its parent picks for that name.
//!
//! Every dependency goes through an intermediate package whose versions are
//! the full versions of the target, so a sibling's peer constraint can
//! restrict the parent's exact choice.

use std::collections::BTreeSet;
use std::fmt;

use crate::calculus::{check_subset, validate_resolution, CoreInstance, Dependency, Repository, Resolution};
use crate::error::Result;
use crate::name::{DisplaySet, Package, PackageName, Version, VersionSet};
use crate::report::{Rule, ValidityReport};

use super::concurrent::{
    check_instance, concurrent_report, rename, require_valid, unrename, Granularity, ParentRelation,
};

/// A parent of `from` that depends on `on` must pick a version in `versions`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeerDependency {
    pub from: Package,
    pub on: PackageName,
    pub versions: VersionSet,
}

impl PeerDependency {
    pub fn new(from: Package, on: PackageName, versions: VersionSet) -> Self {
        PeerDependency { from, on, versions }
    }
}

impl fmt::Display for PeerDependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} peers {} {}", self.from, self.on, DisplaySet(&self.versions))
    }
}

fn check_peers(inst: &CoreInstance, peers: &[PeerDependency], g: &Granularity) -> Result<()> {
    check_instance(inst, g)?;
    check_subset(inst.repo(), peers.iter().map(|t| &t.from))
}

/// Concurrent validity plus: when a child has a peer dependency on a name
/// its parent also depends on, the child the parent recorded for that name
/// must satisfy both constraints.
pub fn validate_peer(
    inst: &CoreInstance,
    peers: &[PeerDependency],
    g: &Granularity,
    s: &Resolution,
    pi: &ParentRelation,
) -> Result<ValidityReport> {
    check_peers(inst, peers, g)?;
    let mut report = concurrent_report(inst, g, s, pi)?;
    for t in peers.iter().filter(|t| s.contains(&t.from)) {
        for q in pi.parents_of(&t.from) {
            let Some(d) = inst.deps_of(q).iter().find(|d| d.on == t.on) else {
                continue;
            };
            for c in pi.children_for(d).filter(|c| s.contains(c)) {
                if !t.versions.contains(&c.version) {
                    report.push(
                        Rule::PeerSatisfaction,
                        vec![t.from.clone(), q.clone(), c.clone()],
                        format!("{t}, but its parent {q} picked {c}"),
                    );
                }
            }
        }
    }
    Ok(report.finish())
}

fn intermediate(p: &Package, on: &PackageName) -> PackageName {
    PackageName::intermediate(p.clone(), on.clone())
}

/// Adds `(i, u)` pinned to the lowered `(on, u)`.
fn pin(
    repo: &mut Repository,
    deps: &mut Vec<Dependency>,
    g: &Granularity,
    i: &PackageName,
    on: &PackageName,
    u: &Version,
) -> Result<()> {
    let iu = Package::new(i.clone(), u.clone());
    repo.insert(iu.clone());
    let target = rename(&Package::new(on.clone(), u.clone()), g)?;
    deps.push(Dependency::new(iu, target.name, [u.clone()].into()));
    Ok(())
}

pub fn lower_peer(
    inst: &CoreInstance,
    peers: &[PeerDependency],
    g: &Granularity,
) -> Result<CoreInstance> {
    check_peers(inst, peers, g)?;
    let mut repo = inst
        .repo()
        .packages()
        .map(|p| rename(&p, g))
        .collect::<Result<Repository>>()?;
    let mut deps = Vec::new();
    for d in inst.deps() {
        let i = intermediate(&d.from, &d.on);
        for u in &d.versions {
            pin(&mut repo, &mut deps, g, &i, &d.on, u)?;
        }
        deps.push(Dependency::new(rename(&d.from, g)?, i.clone(), d.versions.clone()));
        // Siblings with a peer dependency on this target constrain the choice.
        for sib in inst.deps_of(&d.from) {
            let o = intermediate(&d.from, &sib.on);
            for u in &sib.versions {
                let child = Package::new(sib.on.clone(), u.clone());
                for t in peers.iter().filter(|t| t.from == child && t.on == d.on) {
                    let ws: VersionSet =
                        t.versions.intersection(inst.repo().versions(&d.on)).cloned().collect();
                    for w in &ws {
                        pin(&mut repo, &mut deps, g, &i, &d.on, w)?;
                    }
                    deps.push(Dependency::new(Package::new(o.clone(), u.clone()), i.clone(), ws));
                }
            }
        }
    }
    CoreInstance::new(repo, deps, rename(inst.root(), g)?)
}

pub fn lift_peer(
    s: &Resolution,
    inst: &CoreInstance,
    peers: &[PeerDependency],
    g: &Granularity,
) -> Result<(Resolution, ParentRelation)> {
    let lowered = lower_peer(inst, peers, g)?;
    require_valid(&validate_resolution(&lowered, s)?, "resolution of the lowered instance")?;
    let sc = unrename(s);
    let mut pi = ParentRelation::new();
    for p in &sc {
        for d in inst.deps_of(p) {
            let i = intermediate(p, &d.on);
            for u in s.versions_of(&i).filter(|u| d.versions.contains(u)) {
                let child = Package::new(d.on.clone(), u.clone());
                if s.contains(&rename(&child, g)?) {
                    pi.insert(child, p.clone());
                }
            }
        }
    }
    Ok((sc, pi))
}

pub fn embed_peer(
    sc: &Resolution,
    pi: &ParentRelation,
    inst: &CoreInstance,
    peers: &[PeerDependency],
    g: &Granularity,
) -> Result<Resolution> {
    require_valid(&validate_peer(inst, peers, g, sc, pi)?, "peer resolution")?;
    let mut out = BTreeSet::new();
    for p in sc {
        out.insert(rename(p, g)?);
        for d in inst.deps_of(p) {
            for c in pi.children_for(d).filter(|c| sc.contains(c)) {
                out.insert(Package::new(intermediate(p, &d.on), c.version.clone()));
            }
        }
    }
    Ok(Resolution::new(out))
}
