//! Features: dependencies may require named features of their target, and a
//! selected feature may bring further dependencies.
//!
//! Lowering adds one gate package per supported `(package, feature)`, with
//! the same version as the package. A gate depends on its package, carries
//! the feature's additional dependencies, and is what feature-requiring
//! dependencies point at.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::calculus::{
    check_subset, check_uniqueness, validate_resolution, CoreInstance, Dependency, Repository,
    Resolution,
};
use crate::error::{Error, Result};
use crate::name::{DisplaySet, Package, PackageName, VersionSet};
use crate::report::{Rule, ValidityReport};

pub type FeatureSet = BTreeSet<String>;

fn show_features(fs: &FeatureSet) -> String {
    let items: Vec<&str> = fs.iter().map(String::as_str).collect();
    format!("[{}]", items.join(","))
}

/// `from` depends on `on` at one of `versions`, with at least `features`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureDependency {
    pub from: Package,
    pub on: PackageName,
    pub versions: VersionSet,
    pub features: FeatureSet,
}

impl FeatureDependency {
    pub fn new(from: Package, on: PackageName, versions: VersionSet, features: &[&str]) -> Self {
        let features = features.iter().map(|f| f.to_string()).collect();
        FeatureDependency { from, on, versions, features }
    }
}

impl fmt::Display for FeatureDependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} {}", self.from, self.on, DisplaySet(&self.versions))?;
        if !self.features.is_empty() {
            write!(f, " {}", show_features(&self.features))?;
        }
        Ok(())
    }
}

/// A dependency that applies only while `from` is selected with `feature`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AdditionalDependency {
    pub from: Package,
    pub feature: String,
    pub dep: FeatureDependency,
}

impl AdditionalDependency {
    pub fn new(from: Package, feature: &str, on: PackageName, versions: VersionSet, features: &[&str]) -> Self {
        AdditionalDependency {
            dep: FeatureDependency::new(from.clone(), on, versions, features),
            from,
            feature: feature.to_string(),
        }
    }
}

impl fmt::Display for AdditionalDependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.feature, self.dep)
    }
}

/// A repository with features, their dependencies and a root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureModel {
    repo: Repository,
    root: Package,
    support: BTreeMap<Package, FeatureSet>,
    fdeps: Vec<FeatureDependency>,
    adeps: Vec<AdditionalDependency>,
}

impl FeatureModel {
    /// Checks that every endpoint exists, that required features are
    /// supported by every acceptable version, that additional dependencies
    /// hang off supported features, and that the root supports none.
    pub fn new(
        repo: Repository,
        root: Package,
        support: impl IntoIterator<Item = (Package, String)>,
        fdeps: impl IntoIterator<Item = FeatureDependency>,
        adeps: impl IntoIterator<Item = AdditionalDependency>,
    ) -> Result<Self> {
        let mut by_pkg: BTreeMap<Package, FeatureSet> = BTreeMap::new();
        for (p, f) in support {
            crate::name::check_label("feature", &f)?;
            by_pkg.entry(p).or_default().insert(f);
        }
        let fdeps: Vec<FeatureDependency> =
            fdeps.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let adeps: Vec<AdditionalDependency> =
            adeps.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let model = FeatureModel { repo, root, support: by_pkg, fdeps, adeps };
        check_subset(&model.repo, std::iter::once(&model.root).chain(model.support.keys()))?;
        if model.support.contains_key(&model.root) {
            return Err(Error::invalid(format!("root {} cannot support features", model.root)));
        }
        for a in &model.adeps {
            if !model.supports(&a.from, &a.feature) {
                return Err(Error::invalid(format!("{a}: {} does not support {}", a.from, a.feature)));
            }
        }
        for d in model.fdeps.iter().chain(model.adeps.iter().map(|a| &a.dep)) {
            check_subset(&model.repo, [&d.from])?;
            for u in &d.versions {
                let target = Package::new(d.on.clone(), u.clone());
                check_subset(&model.repo, [&target])?;
                if let Some(f) = d.features.iter().find(|f| !model.supports(&target, f)) {
                    return Err(Error::invalid(format!("{d}: {target} does not support {f}")));
                }
            }
        }
        Ok(model)
    }

    /// A model without features: plain dependencies only.
    pub fn from_core(inst: &CoreInstance) -> Self {
        FeatureModel {
            repo: inst.repo().clone(),
            root: inst.root().clone(),
            support: BTreeMap::new(),
            fdeps: inst
                .deps()
                .iter()
                .map(|d| FeatureDependency { from: d.from.clone(), on: d.on.clone(), versions: d.versions.clone(), features: FeatureSet::new() })
                .collect(),
            adeps: Vec::new(),
        }
    }

    pub fn repo(&self) -> &Repository {
        &self.repo
    }

    pub fn root(&self) -> &Package {
        &self.root
    }

    pub fn fdeps(&self) -> &[FeatureDependency] {
        &self.fdeps
    }

    pub fn adeps(&self) -> &[AdditionalDependency] {
        &self.adeps
    }

    pub fn support(&self) -> impl Iterator<Item = (&Package, &String)> {
        self.support.iter().flat_map(|(p, fs)| fs.iter().map(move |f| (p, f)))
    }

    /// The features `p` supports.
    pub fn features_of(&self, p: &Package) -> &FeatureSet {
        static EMPTY: FeatureSet = FeatureSet::new();
        self.support.get(p).unwrap_or(&EMPTY)
    }

    pub fn supports(&self, p: &Package, f: &str) -> bool {
        self.features_of(p).contains(f)
    }

    /// Every feature name used anywhere in the model.
    pub fn features(&self) -> FeatureSet {
        self.support.values().flatten().cloned().collect()
    }
}

/// Selected packages, each with its selected features.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureResolution(BTreeMap<Package, FeatureSet>);

impl FeatureResolution {
    pub fn new() -> Self {
        Self::default()
    }

    /// Selects `p`, adding `fs` to its features.
    pub fn insert(&mut self, p: Package, fs: impl IntoIterator<Item = String>) {
        self.0.entry(p).or_default().extend(fs);
    }

    pub fn get(&self, p: &Package) -> Option<&FeatureSet> {
        self.0.get(p)
    }

    pub fn contains(&self, p: &Package) -> bool {
        self.0.contains_key(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Package, &FeatureSet)> {
        self.0.iter()
    }

    pub fn packages(&self) -> Resolution {
        self.0.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Whether some version of `on` in `vs` is selected with at least `fs`.
    pub fn satisfies(&self, on: &PackageName, vs: &VersionSet, fs: &FeatureSet) -> bool {
        vs.iter().any(|v| {
            self.0
                .get(&Package::new(on.clone(), v.clone()))
                .is_some_and(|sel| sel.is_superset(fs))
        })
    }
}

impl FromIterator<(Package, FeatureSet)> for FeatureResolution {
    fn from_iter<I: IntoIterator<Item = (Package, FeatureSet)>>(iter: I) -> Self {
        let mut out = FeatureResolution::new();
        for (p, fs) in iter {
            out.insert(p, fs);
        }
        out
    }
}

impl fmt::Display for FeatureResolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (p, fs)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
            if !fs.is_empty() {
                write!(f, "{}", show_features(fs))?;
            }
        }
        f.write_str("}")
    }
}

pub(crate) fn feature_report(model: &FeatureModel, sf: &FeatureResolution) -> Result<ValidityReport> {
    check_subset(&model.repo, sf.0.keys())?;
    let mut report = ValidityReport::default();
    match sf.get(&model.root) {
        Some(fs) if fs.is_empty() => {}
        Some(fs) => report.push(
            Rule::RootInclusion,
            vec![model.root.clone()],
            format!("root {} is selected with features {}", model.root, show_features(fs)),
        ),
        None => report.push(Rule::RootInclusion, vec![model.root.clone()], format!("root {} is not selected", model.root)),
    }
    for (p, fs) in sf.iter() {
        for f in fs.iter().filter(|f| !model.supports(p, f)) {
            report.push(Rule::Unwitnessed, vec![p.clone()], format!("{p} does not support feature {f}"));
        }
    }
    for d in &model.fdeps {
        if sf.contains(&d.from) && !sf.satisfies(&d.on, &d.versions, &d.features) {
            report.push(Rule::FeatureClosure, vec![d.from.clone()], format!("{d} is unsatisfied"));
        }
    }
    for a in &model.adeps {
        let active = sf.get(&a.from).is_some_and(|fs| fs.contains(&a.feature));
        if active && !sf.satisfies(&a.dep.on, &a.dep.versions, &a.dep.features) {
            report.push(Rule::AdditionalClosure, vec![a.from.clone()], format!("{a} is unsatisfied"));
        }
    }
    let mut by_name: BTreeMap<&PackageName, (&Package, &FeatureSet)> = BTreeMap::new();
    for (p, fs) in sf.iter() {
        if let Some((q, gs)) = by_name.insert(&p.name, (p, fs)) {
            if gs != fs {
                report.push(
                    Rule::FeatureUnification,
                    vec![q.clone(), p.clone()],
                    format!("{q} and {p} carry different features"),
                );
            }
        }
    }
    check_uniqueness(&mut report, sf.0.keys());
    Ok(report)
}

/// Root inclusion with no features, closure of feature-parameterised and
/// additional dependencies, feature unification, version uniqueness, and
/// every selected feature supported.
pub fn validate_feature_resolution(model: &FeatureModel, sf: &FeatureResolution) -> Result<ValidityReport> {
    Ok(feature_report(model, sf)?.finish())
}

pub fn gate(p: &Package, f: &str) -> Package {
    Package::new(PackageName::gate(p.name.clone(), f), p.version.clone())
}

/// The core dependencies for `d` declared by `from`.
fn lower_dep(from: &Package, d: &FeatureDependency, out: &mut Vec<Dependency>) {
    if d.features.is_empty() {
        out.push(Dependency::new(from.clone(), d.on.clone(), d.versions.clone()));
    }
    for f in &d.features {
        out.push(Dependency::new(from.clone(), PackageName::gate(d.on.clone(), f), d.versions.clone()));
    }
}

pub fn lower_features(model: &FeatureModel) -> Result<CoreInstance> {
    let mut repo = model.repo.clone();
    let mut deps = Vec::new();
    for (p, f) in model.support() {
        let g = gate(p, f);
        repo.insert(g.clone());
        deps.push(Dependency::new(g, p.name.clone(), [p.version.clone()].into()));
    }
    for d in &model.fdeps {
        lower_dep(&d.from, d, &mut deps);
    }
    for a in &model.adeps {
        lower_dep(&gate(&a.from, &a.feature), &a.dep, &mut deps);
    }
    CoreInstance::new(repo, deps, model.root.clone())
}

/// Reads each package's features off its selected gates.
pub fn lift_feature_resolution(s: &Resolution, model: &FeatureModel) -> Result<FeatureResolution> {
    let lowered = lower_features(model)?;
    let report = validate_resolution(&lowered, s)?;
    if !report.is_valid() {
        return Err(Error::invalid(format!("not a resolution of the lowered instance: {report}")));
    }
    Ok(s.iter()
        .filter(|p| model.repo.contains(p))
        .map(|p| {
            let fs = model.features_of(p).iter().filter(|f| s.contains(&gate(p, f))).cloned().collect();
            (p.clone(), fs)
        })
        .collect())
}

/// The selected packages plus one gate per selected feature.
pub fn embed_feature_resolution(sf: &FeatureResolution, model: &FeatureModel) -> Result<Resolution> {
    let report = validate_feature_resolution(model, sf)?;
    if !report.is_valid() {
        return Err(Error::invalid(format!("not a feature resolution: {report}")));
    }
    Ok(sf
        .iter()
        .flat_map(|(p, fs)| std::iter::once(p.clone()).chain(fs.iter().map(|f| gate(p, f))))
        .collect())
}
