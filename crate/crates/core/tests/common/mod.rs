//! Seeded instance generators and brute-force reference enumerators.
//!
//! The reference enumerators walk every candidate selection (and witness)
//! and keep those that pass a check written here from the definitions. Each
//! candidate is also run through the library validator, and any
//! disagreement panics, so the validators are exercised as a side effect.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;

use pkgcalc::ext::concurrent::{validate_concurrent, Granularity, ParentRelation};
use pkgcalc::ext::conflicts::{validate_conflict_resolution, Conflict};
use pkgcalc::ext::features::{
    validate_feature_resolution, AdditionalDependency, FeatureDependency, FeatureModel, FeatureResolution, FeatureSet,
};
use pkgcalc::ext::formulae::{
    validate_formula_resolution, FormulaDep, FormulaInstance, PackageFormula, VarAssignment, VariableDecl,
};
use pkgcalc::ext::peer::{validate_peer, PeerDependency};
use pkgcalc::ext::provides::{validate_virtual, ProviderRelation, Provides, VirtualInstance};
use pkgcalc::pipeline::validate_concurrent_feature;
use pkgcalc::versions::{CmpOp, FormulaDependency, VersionFormula};
use pkgcalc::{
    validate_resolution, CoreInstance, Dependency, Oracle, Package, PackageName, Repository, Resolution, Version,
    VersionSet,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NAMES: [&str; 6] = ["A", "B", "C", "D", "E", "F"];
/// Two majors, so that `Major` differs from both `Identity` and `Constant`.
pub const POOL: [&str; 3] = ["1.0", "1.1", "2.0"];
pub const FEATURES: [&str; 2] = ["x", "y"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pkg(n: &str, v: &str) -> Package {
    Package::atom(n, v)
}

pub fn name(n: &str) -> PackageName {
    PackageName::atom(n)
}

pub fn set(vs: &[&str]) -> VersionSet {
    pkgcalc::versions(vs)
}

pub fn resolution(ps: impl IntoIterator<Item = Package>) -> Resolution {
    ps.into_iter().collect()
}

#[derive(Clone, Copy, Debug)]
pub struct Limits {
    pub names: usize,
    pub versions: usize,
    /// Cap on the number of non-root packages.
    pub packages: usize,
    /// Dependencies per package.
    pub deps: usize,
}

impl Limits {
    pub const SMALL: Limits = Limits { names: 6, versions: 3, packages: 12, deps: 2 };
    pub const MULTI: Limits = Limits { names: 5, versions: 3, packages: 9, deps: 2 };
    pub const TINY: Limits = Limits { names: 4, versions: 2, packages: 6, deps: 2 };
}

pub fn random_repo(r: &mut ChaCha8Rng, lim: Limits) -> Repository {
    loop {
        let k = r.random_range(2..=lim.names);
        let mut repo = Repository::new();
        for n in &NAMES[..k] {
            let count = r.random_range(1..=lim.versions);
            for v in POOL.choose_multiple(r, count) {
                repo.insert(pkg(n, v));
            }
        }
        if repo.len() <= lim.packages {
            return repo;
        }
    }
}

pub fn random_subset(r: &mut ChaCha8Rng, from: &VersionSet) -> VersionSet {
    loop {
        let out: VersionSet = from.iter().filter(|_| r.random_bool(0.6)).cloned().collect();
        if !out.is_empty() {
            return out;
        }
    }
}

fn other_names(repo: &Repository, not: &PackageName) -> Vec<PackageName> {
    repo.names().filter(|n| *n != not && **n != PackageName::Root).cloned().collect()
}

/// Targets for up to `k` dependencies of `from`, on distinct other names.
pub fn random_targets(r: &mut ChaCha8Rng, repo: &Repository, from: &Package, k: usize) -> Vec<(PackageName, VersionSet)> {
    let names = other_names(repo, &from.name);
    let k = r.random_range(0..=k.min(names.len()));
    names.choose_multiple(r, k).map(|n| (n.clone(), random_subset(r, repo.versions(n)))).collect()
}

/// The root depends on one or two names; every other package on up to
/// `lim.deps` distinct other names.
pub fn random_deps(r: &mut ChaCha8Rng, repo: &Repository, lim: Limits) -> Vec<Dependency> {
    let root = Package::root();
    let names = other_names(repo, &PackageName::Root);
    let q = r.random_range(1..=2.min(names.len()));
    let mut deps: Vec<Dependency> = names
        .choose_multiple(r, q)
        .map(|n| Dependency::new(root.clone(), n.clone(), random_subset(r, repo.versions(n))))
        .collect();
    for p in repo.packages().filter(|p| !p.is_root()).collect::<Vec<_>>() {
        for (on, vs) in random_targets(r, repo, &p, lim.deps) {
            deps.push(Dependency::new(p.clone(), on, vs));
        }
    }
    deps
}

pub fn random_core(r: &mut ChaCha8Rng, lim: Limits) -> CoreInstance {
    let mut repo = random_repo(r, lim);
    repo.insert(Package::root());
    let deps = random_deps(r, &repo, lim);
    CoreInstance::new(repo, deps, Package::root()).expect("generated instance is well formed")
}

pub fn random_granularity(r: &mut ChaCha8Rng) -> Granularity {
    [Granularity::Identity, Granularity::Major, Granularity::Constant].choose(r).unwrap().clone()
}

pub fn random_conflicts(r: &mut ChaCha8Rng, inst: &CoreInstance) -> Vec<Conflict> {
    let pkgs: Vec<Package> = inst.repo().packages().collect();
    let k = r.random_range(1..=3);
    (0..k)
        .filter_map(|_| {
            let from = pkgs.choose(r)?.clone();
            let (on, vs) = random_targets(r, inst.repo(), &from, 1).pop()?;
            Some(Conflict::new(from, on, vs))
        })
        .collect()
}

pub fn random_peers(r: &mut ChaCha8Rng, inst: &CoreInstance) -> Vec<PeerDependency> {
    let pkgs: Vec<Package> = inst.repo().packages().filter(|p| !p.is_root()).collect();
    let k = r.random_range(1..=3);
    (0..k)
        .filter_map(|_| {
            let from = pkgs.choose(r)?.clone();
            let (on, vs) = random_targets(r, inst.repo(), &from, 1).pop()?;
            Some(PeerDependency::new(from, on, vs))
        })
        .collect()
}

pub fn random_version_formula(r: &mut ChaCha8Rng, depth: usize) -> VersionFormula {
    if depth == 0 || r.random_bool(0.5) {
        if r.random_bool(0.1) {
            return VersionFormula::Top;
        }
        let op = *[CmpOp::Ge, CmpOp::Gt, CmpOp::Le, CmpOp::Lt, CmpOp::Eq, CmpOp::Ne].choose(r).unwrap();
        let c = *["0.9", "1.0", "1.1", "1.5", "2.0", "3"].choose(r).unwrap();
        return VersionFormula::cmp(op, c);
    }
    let l = random_version_formula(r, depth - 1);
    let rhs = random_version_formula(r, depth - 1);
    if r.random_bool(0.5) {
        l.and(rhs)
    } else {
        l.or(rhs)
    }
}

/// Formula dependencies in place of the plain ones of a random instance.
pub fn random_formula_deps(r: &mut ChaCha8Rng, inst: &CoreInstance) -> Vec<FormulaDependency> {
    inst.deps()
        .iter()
        .map(|d| {
            let phi = if d.from.is_root() { VersionFormula::Top } else { random_version_formula(r, 2) };
            FormulaDependency::new(d.from.clone(), d.on.clone(), phi)
        })
        .collect()
}

/// Some of the features that every version in `vs` supports.
fn required(r: &mut ChaCha8Rng, support: &BTreeMap<Package, FeatureSet>, on: &PackageName, vs: &VersionSet) -> Vec<String> {
    FEATURES
        .iter()
        .map(|f| f.to_string())
        .filter(|f| vs.iter().all(|v| support[&Package::new(on.clone(), v.clone())].contains(f)))
        .filter(|_| r.random_bool(0.5))
        .collect()
}

/// A feature model over a random repository. Required features are drawn
/// from those every acceptable version supports.
pub fn random_feature_model(r: &mut ChaCha8Rng, lim: Limits, features: usize) -> FeatureModel {
    loop {
        let mut repo = random_repo(r, lim);
        let mut support: BTreeMap<Package, FeatureSet> = BTreeMap::new();
        for p in repo.packages() {
            let fs: FeatureSet = FEATURES[..features].iter().filter(|_| r.random_bool(0.5)).map(|f| f.to_string()).collect();
            support.insert(p, fs);
        }
        let plain = random_deps(r, &repo, lim);
        let mut fdeps = Vec::new();
        for d in &plain {
            let fs = required(r, &support, &d.on, &d.versions);
            let fs: Vec<&str> = fs.iter().map(String::as_str).collect();
            fdeps.push(FeatureDependency::new(d.from.clone(), d.on.clone(), d.versions.clone(), &fs));
        }
        let mut adeps = Vec::new();
        for (p, fs) in &support {
            for f in fs {
                if !r.random_bool(0.4) {
                    continue;
                }
                let taken: BTreeSet<&PackageName> = plain.iter().filter(|d| d.from == *p).map(|d| &d.on).collect();
                let Some((on, vs)) = random_targets(r, &repo, p, 1).pop().filter(|(on, _)| !taken.contains(on)) else {
                    continue;
                };
                let req = required(r, &support, &on, &vs);
                let req: Vec<&str> = req.iter().map(String::as_str).collect();
                adeps.push(AdditionalDependency::new(p.clone(), f, on, vs, &req));
            }
        }
        repo.insert(Package::root());
        let support = support.into_iter().flat_map(|(p, fs)| fs.into_iter().map(move |f| (p.clone(), f)));
        if let Ok(model) = FeatureModel::new(repo, Package::root(), support, fdeps, adeps) {
            return model;
        }
    }
}

pub const GLOBALS: [(&str, [&str; 2]); 1] = [("os", ["linux", "mac"])];
pub const LOCALS: [(&str, [&str; 2]); 1] = [("opt", ["off", "on"])];

pub fn variable_decl() -> VariableDecl {
    let owned = |vars: &[(&str, [&str; 2])]| -> Vec<(String, Vec<String>)> {
        vars.iter().map(|(v, d)| (v.to_string(), d.iter().map(|c| c.to_string()).collect())).collect()
    };
    VariableDecl::new(owned(&GLOBALS), owned(&LOCALS)).unwrap()
}

pub fn random_package_formula(r: &mut ChaCha8Rng, repo: &Repository, from: &Package, depth: usize, variables: bool) -> PackageFormula {
    if depth == 0 || r.random_bool(0.4) {
        if variables && r.random_bool(0.3) {
            let op = *[CmpOp::Eq, CmpOp::Ne, CmpOp::Ge].choose(r).unwrap();
            return if r.random_bool(0.5) {
                let (var, dom) = GLOBALS[0];
                PackageFormula::global(var, op, dom.choose(r).unwrap())
            } else {
                let (var, dom) = LOCALS[0];
                PackageFormula::local(var, op, dom.choose(r).unwrap())
            };
        }
        let names = other_names(repo, &from.name);
        let on = names.choose(r).unwrap().clone();
        let vs = random_subset(r, repo.versions(&on));
        return PackageFormula::dep(on, vs);
    }
    match r.random_range(0..3) {
        0 => random_package_formula(r, repo, from, depth - 1, variables).not(),
        1 => random_package_formula(r, repo, from, depth - 1, variables)
            .and(random_package_formula(r, repo, from, depth - 1, variables)),
        _ => random_package_formula(r, repo, from, depth - 1, variables)
            .or(random_package_formula(r, repo, from, depth - 1, variables)),
    }
}

pub fn random_formula_instance(r: &mut ChaCha8Rng, lim: Limits, variables: bool) -> FormulaInstance {
    let mut repo = random_repo(r, lim);
    repo.insert(Package::root());
    let root = Package::root();
    let names = other_names(&repo, &PackageName::Root);
    let on = names.choose(r).unwrap().clone();
    let mut deps = vec![FormulaDep::new(root.clone(), PackageFormula::dep(on.clone(), random_subset(r, repo.versions(&on))))];
    for p in repo.packages().filter(|p| !p.is_root()).collect::<Vec<_>>() {
        if r.random_bool(0.6) {
            deps.push(FormulaDep::new(p.clone(), random_package_formula(r, &repo, &p, 2, variables)));
        }
    }
    if variables && r.random_bool(0.5) {
        deps.push(FormulaDep::new(root.clone(), random_package_formula(r, &repo, &root, 1, true)));
    }
    let decl = variables.then(variable_decl);
    FormulaInstance::new(repo, root, deps, decl).expect("generated formula instance is well formed")
}

/// Dependencies may name `V`, which only providers supply.
pub fn random_virtual_instance(r: &mut ChaCha8Rng, lim: Limits) -> VirtualInstance {
    loop {
        let core = random_core(r, lim);
        let pkgs: Vec<Package> = core.repo().packages().filter(|p| !p.is_root()).collect();
        let mut deps = core.deps().to_vec();
        if r.random_bool(0.7) {
            let from = pkgs.choose(r).unwrap().clone();
            if !deps.iter().any(|d| d.from == from) {
                deps.push(Dependency::new(from, name("V"), set(&["1"])));
            } else {
                deps.push(Dependency::new(Package::root(), name("V"), set(&["1"])));
            }
        }
        let mut provides = Vec::new();
        for _ in 0..r.random_range(1..=3) {
            let provider = pkgs.choose(r).unwrap().clone();
            let (pname, version) = if r.random_bool(0.5) {
                (name("V"), if r.random_bool(0.5) { Version::Wildcard } else { Version::num(["1", "2"].choose(r).unwrap()) })
            } else {
                let n = other_names(core.repo(), &provider.name);
                let n = n.choose(r).unwrap().clone();
                let v = if r.random_bool(0.3) { Version::Wildcard } else { Version::num(POOL.choose(r).unwrap()) };
                (n, v)
            };
            provides.push(Provides::new(provider, pname, version));
        }
        if let Ok(vi) = VirtualInstance::new(core.repo().clone(), deps, Package::root(), provides) {
            return vi;
        }
    }
}

// ---- reference semantics ----

fn segments(v: &Version) -> Vec<u64> {
    v.to_string().split('.').map(|s| s.parse().expect("numeric segment")).collect()
}

/// Numeric comparison with missing segments read as zero.
pub fn ref_cmp(a: &Version, b: &Version) -> Ordering {
    let (a, b) = (segments(a), segments(b));
    let n = a.len().max(b.len());
    let at = |x: &Vec<u64>, i: usize| x.get(i).copied().unwrap_or(0);
    (0..n).map(|i| at(&a, i).cmp(&at(&b, i))).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

pub fn ref_matches(phi: &VersionFormula, v: &Version) -> bool {
    match phi {
        VersionFormula::Top => true,
        VersionFormula::And(l, r) => ref_matches(l, v) && ref_matches(r, v),
        VersionFormula::Or(l, r) => ref_matches(l, v) || ref_matches(r, v),
        VersionFormula::Cmp(CmpOp::Eq, c) => v == c,
        VersionFormula::Cmp(CmpOp::Ne, c) => v != c,
        VersionFormula::Cmp(op, c) => {
            let o = ref_cmp(v, c);
            match op {
                CmpOp::Ge => o != Ordering::Less,
                CmpOp::Gt => o == Ordering::Greater,
                CmpOp::Le => o != Ordering::Greater,
                CmpOp::Lt => o == Ordering::Less,
                _ => unreachable!(),
            }
        }
    }
}

pub fn ref_gran(g: &Granularity, p: &Package) -> String {
    if p.is_root() {
        return "eps".into();
    }
    match g {
        Granularity::Identity => p.version.to_string(),
        Granularity::Major => segments(&p.version)[0].to_string(),
        Granularity::Constant => "eps".into(),
        Granularity::Table(_) => unimplemented!("tables are not generated"),
    }
}

pub fn unique_names<'a>(s: impl IntoIterator<Item = &'a Package>) -> bool {
    let mut seen = BTreeSet::new();
    s.into_iter().all(|p| seen.insert(&p.name))
}

pub fn granular<'a>(g: &Granularity, s: impl IntoIterator<Item = &'a Package>) -> bool {
    let mut seen = BTreeSet::new();
    s.into_iter().all(|p| seen.insert((&p.name, ref_gran(g, p))))
}

pub fn has_match(s: &BTreeSet<Package>, on: &PackageName, vs: &VersionSet) -> bool {
    s.iter().any(|p| p.name == *on && vs.contains(&p.version))
}

pub fn core_ok(inst: &CoreInstance, s: &BTreeSet<Package>) -> bool {
    s.contains(inst.root())
        && unique_names(s)
        && inst.deps().iter().filter(|d| s.contains(&d.from)).all(|d| has_match(s, &d.on, &d.versions))
}

fn product<T: Clone>(options: &[Vec<T>]) -> Vec<Vec<T>> {
    options.iter().fold(vec![Vec::new()], |acc, opts| {
        acc.iter().flat_map(|prefix| opts.iter().map(move |o| {
            let mut next = prefix.clone();
            next.push(o.clone());
            next
        })).collect()
    })
}

/// Every selection with at most one version per name that contains `root`.
pub fn unique_selections(repo: &Repository, root: &Package) -> Vec<BTreeSet<Package>> {
    let options: Vec<Vec<Option<Package>>> = repo
        .names()
        .map(|n| {
            let all = repo.versions(n).iter().map(|v| Some(Package::new(n.clone(), v.clone())));
            if *n == root.name {
                vec![Some(root.clone())]
            } else {
                std::iter::once(None).chain(all).collect()
            }
        })
        .collect();
    product(&options).into_iter().map(|c| c.into_iter().flatten().collect()).collect()
}

/// Every subset of the repository that contains `root`.
pub fn all_selections(repo: &Repository, root: &Package) -> Vec<BTreeSet<Package>> {
    let rest: Vec<Package> = repo.packages().filter(|p| p != root).collect();
    assert!(rest.len() <= 16, "too many packages for subset enumeration");
    (0u32..1 << rest.len())
        .map(|mask| {
            let mut s: BTreeSet<Package> = rest.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, p)| p.clone()).collect();
            s.insert(root.clone());
            s
        })
        .collect()
}

fn agree(ours: bool, theirs: bool, what: impl Debug) {
    assert_eq!(ours, theirs, "reference and library validator disagree on {what:?}");
}

pub fn ref_core(inst: &CoreInstance) -> BTreeSet<Resolution> {
    let mut out = BTreeSet::new();
    for s in unique_selections(inst.repo(), inst.root()) {
        let ok = core_ok(inst, &s);
        let s = Resolution::new(s);
        agree(ok, validate_resolution(inst, &s).unwrap().is_valid(), &s);
        if ok {
            out.insert(s);
        }
    }
    out
}

pub fn ref_version_formulae(repo: &Repository, fdeps: &[FormulaDependency], root: &Package) -> BTreeSet<Resolution> {
    unique_selections(repo, root)
        .into_iter()
        .filter(|s| {
            fdeps.iter().filter(|d| s.contains(&d.from)).all(|d| {
                s.iter().any(|p| p.name == d.on && ref_matches(&d.formula, &p.version))
            })
        })
        .map(Resolution::new)
        .collect()
}

pub fn ref_conflicts(inst: &CoreInstance, conflicts: &[Conflict]) -> BTreeSet<Resolution> {
    let mut out = BTreeSet::new();
    for s in unique_selections(inst.repo(), inst.root()) {
        let ok = core_ok(inst, &s)
            && conflicts.iter().filter(|c| s.contains(&c.from)).all(|c| !has_match(&s, &c.on, &c.versions));
        let s = Resolution::new(s);
        agree(ok, validate_conflict_resolution(inst, conflicts, &s).unwrap().is_valid(), &s);
        if ok {
            out.insert(s);
        }
    }
    out
}

/// Concurrent resolutions with their parent relations; with `peers`
/// non-empty, peer resolutions.
pub fn ref_concurrent(inst: &CoreInstance, g: &Granularity, peers: &[PeerDependency]) -> BTreeSet<(Resolution, ParentRelation)> {
    let mut out = BTreeSet::new();
    for s in all_selections(inst.repo(), inst.root()) {
        if !granular(g, &s) {
            continue;
        }
        let slots: Vec<&Dependency> = inst.deps().iter().filter(|d| s.contains(&d.from)).collect();
        let options: Vec<Vec<Package>> = slots
            .iter()
            .map(|d| s.iter().filter(|c| c.name == d.on && d.versions.contains(&c.version)).cloned().collect())
            .collect();
        if options.iter().any(Vec::is_empty) {
            continue;
        }
        for choice in product(&options) {
            let pi: ParentRelation = slots.iter().zip(&choice).map(|(d, c)| (c.clone(), d.from.clone())).collect();
            let picked = |q: &Package, on: &PackageName| {
                slots.iter().zip(&choice).find(|(d, _)| d.from == *q && d.on == *on).map(|(_, c)| c)
            };
            let peers_ok = peers.iter().filter(|t| s.contains(&t.from)).all(|t| {
                pi.parents_of(&t.from).all(|q| picked(q, &t.on).is_none_or(|c| t.versions.contains(&c.version)))
            });
            let sr = Resolution::new(s.clone());
            let lib = if peers.is_empty() {
                validate_concurrent(inst, g, &sr, &pi)
            } else {
                validate_peer(inst, peers, g, &sr, &pi)
            };
            agree(peers_ok, lib.unwrap().is_valid(), (&sr, &pi));
            if peers_ok {
                out.insert((sr, pi));
            }
        }
    }
    out
}

fn feature_choices(model: &FeatureModel, s: &BTreeSet<Package>) -> Vec<FeatureResolution> {
    let options: Vec<Vec<(Package, FeatureSet)>> = s
        .iter()
        .map(|p| {
            let supported: Vec<&String> = model.features_of(p).iter().collect();
            (0u32..1 << supported.len())
                .map(|mask| {
                    let fs = supported.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, f)| (*f).clone()).collect();
                    (p.clone(), fs)
                })
                .collect()
        })
        .collect();
    product(&options).into_iter().map(|c| c.into_iter().collect()).collect()
}

fn carried(sf: &FeatureResolution, on: &PackageName, vs: &VersionSet, fs: &FeatureSet) -> Vec<Package> {
    sf.iter().filter(|(c, cf)| c.name == *on && vs.contains(&c.version) && fs.is_subset(cf)).map(|(c, _)| c.clone()).collect()
}

/// Feature-parameterised and additional dependencies active for `p`.
fn active<'a>(model: &'a FeatureModel, p: &Package, fs: &FeatureSet) -> Vec<&'a FeatureDependency> {
    let own = model.fdeps().iter().filter(|d| d.from == *p);
    let extra = model.adeps().iter().filter(|a| a.from == *p && fs.contains(&a.feature)).map(|a| &a.dep);
    own.chain(extra).collect()
}

pub fn ref_features(model: &FeatureModel) -> BTreeSet<FeatureResolution> {
    let mut out = BTreeSet::new();
    for s in unique_selections(model.repo(), model.root()) {
        for sf in feature_choices(model, &s) {
            let ok = sf.get(model.root()).is_some_and(BTreeSet::is_empty)
                && sf.iter().all(|(p, fs)| {
                    active(model, p, fs).iter().all(|d| !carried(&sf, &d.on, &d.versions, &d.features).is_empty())
                });
            agree(ok, validate_feature_resolution(model, &sf).unwrap().is_valid(), &sf);
            if ok {
                out.insert(sf);
            }
        }
    }
    out
}

pub fn ref_concurrent_features(model: &FeatureModel, g: &Granularity) -> BTreeSet<(FeatureResolution, ParentRelation)> {
    let mut out = BTreeSet::new();
    for s in all_selections(model.repo(), model.root()) {
        if !granular(g, &s) {
            continue;
        }
        for sf in feature_choices(model, &s) {
            if !sf.get(model.root()).is_some_and(BTreeSet::is_empty) {
                continue;
            }
            let mut slots = Vec::new();
            for (p, fs) in sf.iter() {
                slots.extend(active(model, p, fs).into_iter().map(|d| (p.clone(), d)));
            }
            let options: Vec<Vec<Package>> =
                slots.iter().map(|(_, d)| carried(&sf, &d.on, &d.versions, &d.features)).collect();
            if options.iter().any(Vec::is_empty) {
                continue;
            }
            for choice in product(&options) {
                let pi: ParentRelation = slots.iter().zip(&choice).map(|((p, _), c)| (c.clone(), p.clone())).collect();
                agree(true, validate_concurrent_feature(model, g, &sf, &pi).unwrap().is_valid(), (&sf, &pi));
                out.insert((sf.clone(), pi));
            }
        }
    }
    out
}

pub fn ref_eval(psi: &PackageFormula, s: &BTreeSet<Package>, sigma: &VarAssignment, from: &Package, decl: &VariableDecl) -> bool {
    let holds = |domain: &[String], have: Option<&String>, op: CmpOp, value: &str| {
        let pos = |c: &str| domain.iter().position(|x| x == c).expect("declared value");
        have.is_some_and(|c| op.holds(pos(c).cmp(&pos(value))))
    };
    match psi {
        PackageFormula::Dep { on, versions } => has_match(s, on, versions),
        PackageFormula::And(l, r) => ref_eval(l, s, sigma, from, decl) && ref_eval(r, s, sigma, from, decl),
        PackageFormula::Or(l, r) => ref_eval(l, s, sigma, from, decl) || ref_eval(r, s, sigma, from, decl),
        PackageFormula::Not(inner) => !ref_eval(inner, s, sigma, from, decl),
        PackageFormula::Global { var, op, value } => {
            holds(decl.global_domain(var).unwrap(), sigma.globals.get(var), *op, value)
        }
        PackageFormula::Local { var, op, value } => {
            holds(decl.local_domain(var).unwrap(), sigma.locals.get(&(var.clone(), from.clone())), *op, value)
        }
    }
}

fn local_vars(psi: &PackageFormula, out: &mut BTreeSet<String>) {
    match psi {
        PackageFormula::Local { var, .. } => {
            out.insert(var.clone());
        }
        PackageFormula::And(l, r) | PackageFormula::Or(l, r) => {
            local_vars(l, out);
            local_vars(r, out);
        }
        PackageFormula::Not(inner) => local_vars(inner, out),
        _ => {}
    }
}

/// Resolutions with assignments covering every global and each local that
/// a selected package's formula mentions.
pub fn ref_formulae(inst: &FormulaInstance) -> BTreeSet<(Resolution, VarAssignment)> {
    let decl = inst.decl();
    let mut out = BTreeSet::new();
    for s in unique_selections(inst.repo(), inst.root()) {
        let mut keys: Vec<(String, Vec<String>)> = decl.globals().map(|(g, d)| (format!("${g}"), d.clone())).collect();
        let mut locals = BTreeSet::new();
        for d in inst.deps().iter().filter(|d| s.contains(&d.from)) {
            let mut vars = BTreeSet::new();
            local_vars(&d.formula, &mut vars);
            locals.extend(vars.into_iter().map(|v| (v, d.from.clone())));
        }
        let local_keys: Vec<(String, Package)> = locals.into_iter().collect();
        keys.extend(local_keys.iter().map(|(v, _)| (v.clone(), decl.local_domain(v).unwrap().to_vec())));
        let options: Vec<Vec<String>> = keys.iter().map(|(_, d)| d.clone()).collect();
        let globals: Vec<String> = decl.globals().map(|(g, _)| g.clone()).collect();
        for values in product(&options) {
            let mut sigma = VarAssignment::new();
            for (g, c) in globals.iter().zip(&values) {
                sigma.set_global(g, c);
            }
            for ((v, p), c) in local_keys.iter().zip(&values[globals.len()..]) {
                sigma.set_local(v, p.clone(), c);
            }
            let ok = unique_names(&s)
                && inst.deps().iter().filter(|d| s.contains(&d.from)).all(|d| ref_eval(&d.formula, &s, &sigma, &d.from, decl));
            let sr = Resolution::new(s.clone());
            agree(ok, validate_formula_resolution(inst, &sr, &sigma).unwrap().is_valid(), (&sr, &sigma));
            if ok {
                out.insert((sr, sigma));
            }
        }
    }
    out
}

/// A provision that can stand in for `d`: right name, an acceptable or
/// wildcard version, and a provider that is not itself a real match.
fn stands_in(t: &Provides, d: &Dependency) -> bool {
    t.name == d.on
        && (t.version == Version::Wildcard || d.versions.contains(&t.version))
        && !(t.provider.name == d.on && d.versions.contains(&t.provider.version))
}

pub fn ref_virtual(inst: &VirtualInstance) -> BTreeSet<(Resolution, ProviderRelation)> {
    let mut out = BTreeSet::new();
    for s in unique_selections(inst.repo(), inst.root()) {
        let slots: Vec<&Dependency> = inst.deps().iter().filter(|d| s.contains(&d.from)).collect();
        let options: Vec<Vec<Option<Package>>> = slots
            .iter()
            .map(|d| {
                let real = has_match(&s, &d.on, &d.versions).then_some(None);
                let providers: BTreeSet<Package> = inst
                    .provides()
                    .iter()
                    .filter(|t| stands_in(t, d) && s.contains(&t.provider))
                    .map(|t| t.provider.clone())
                    .collect();
                real.into_iter().chain(providers.into_iter().map(Some)).collect()
            })
            .collect();
        if options.iter().any(Vec::is_empty) {
            continue;
        }
        for choice in product(&options) {
            let mut rho = ProviderRelation::new();
            for (d, m) in slots.iter().zip(&choice) {
                if let Some(m) = m {
                    rho.insert(m.clone(), d.from.clone());
                }
            }
            let sr = Resolution::new(s.clone());
            agree(true, validate_virtual(inst, &sr, &rho).unwrap().is_valid(), (&sr, &rho));
            out.insert((sr, rho));
        }
    }
    out
}

// ---- round trips ----

pub fn enumerate(core: &CoreInstance) -> Vec<Resolution> {
    Oracle::with_bound(10_000).enumerate(core).expect("oracle enumeration")
}

/// Compares the lift image of the lowered instance's resolutions with the
/// reference set, and checks that embedding each reference element gives
/// a valid core resolution that lifts back to it.
pub fn round_trip<E: Ord + Clone + Debug>(
    expected: &BTreeSet<E>,
    lowered: &CoreInstance,
    lift: impl Fn(&Resolution) -> E,
    embed: impl Fn(&E) -> Resolution,
) -> Result<(), String> {
    let image: BTreeSet<E> = enumerate(lowered).iter().map(&lift).collect();
    if image != *expected {
        let missing: Vec<_> = expected.difference(&image).take(2).collect();
        let extra: Vec<_> = image.difference(expected).take(2).collect();
        return Err(format!("lift image differs: missing {missing:?}, extra {extra:?}"));
    }
    for e in expected {
        let core = embed(e);
        let report = validate_resolution(lowered, &core).map_err(|err| err.to_string())?;
        if !report.is_valid() {
            return Err(format!("embedding of {e:?} is invalid: {report}"));
        }
        if lift(&core) != *e {
            return Err(format!("lift does not invert embed on {e:?}"));
        }
    }
    Ok(())
}
