//! Features composed with concurrent versions: the feature lowering runs
//! first and the concurrent lowering runs on its output.
//!
//! Feature gates keep the version of their package, so granularity passes
//! through. Parent edges found on gates are mapped back to their packages.

use std::collections::BTreeSet;

use crate::calculus::{check_root, check_subset, CoreInstance, Dependency, Resolution};
use crate::error::{Error, Result};
use crate::ext::concurrent::{embed_concurrent, lift_concurrent, lower_concurrent, split, Granularity, ParentRelation};
use crate::ext::features::{gate, lower_features, FeatureDependency, FeatureModel, FeatureResolution, FeatureSet};
use crate::name::{Package, PackageName};
use crate::report::{Rule, ValidityReport};

/// The dependencies a selected package must answer: its own, and those of
/// its selected features. The first component is the core depender.
fn active<'a>(model: &'a FeatureModel, p: &'a Package, fs: &'a FeatureSet) -> Vec<(Package, &'a FeatureDependency)> {
    let own = model.fdeps().iter().filter(|d| d.from == *p).map(|d| (p.clone(), d));
    let extra = model
        .adeps()
        .iter()
        .filter(|a| a.from == *p && fs.contains(&a.feature))
        .map(|a| (gate(p, &a.feature), &a.dep));
    own.chain(extra).collect()
}

/// Each package's dependencies, including those of all its features, must
/// target distinct names, and a dependency requiring several features must
/// stay within one granularity class.
pub fn check_concurrent_feature(model: &FeatureModel, g: &Granularity) -> Result<()> {
    for p in model.repo().packages() {
        g.of(&p)?;
        let mut seen = BTreeSet::new();
        let own = model.fdeps().iter().filter(|d| d.from == p);
        let extra = model.adeps().iter().filter(|a| a.from == p).map(|a| &a.dep);
        for d in own.chain(extra) {
            if !seen.insert(&d.on) {
                return Err(Error::invalid(format!("{p} has more than one dependency on {}", d.on)));
            }
            let plain = Dependency::new(d.from.clone(), d.on.clone(), d.versions.clone());
            if d.features.len() > 1 && split(&plain, g)?.len() > 1 {
                return Err(Error::invalid(format!(
                    "{d}: several features over several granularities cannot be lowered"
                )));
            }
        }
    }
    Ok(())
}

/// Root inclusion with no features, every feature supported, feature and
/// additional-dependency closure, parent closure with the child carrying
/// the required features, and version granularity in place of uniqueness.
pub fn validate_concurrent_feature(
    model: &FeatureModel,
    g: &Granularity,
    sf: &FeatureResolution,
    pi: &ParentRelation,
) -> Result<ValidityReport> {
    check_concurrent_feature(model, g)?;
    check_subset(model.repo(), sf.iter().map(|(p, _)| p))?;
    let mut report = ValidityReport::default();
    let root = model.root();
    check_root(&mut report, root, sf.get(root).is_some_and(|fs| fs.is_empty()));
    for (p, fs) in sf.iter() {
        for f in fs.iter().filter(|f| !model.supports(p, f)) {
            report.push(Rule::Unwitnessed, vec![p.clone()], format!("{p} does not support feature {f}"));
        }
    }
    let mut witnessed = BTreeSet::new();
    for (p, fs) in sf.iter() {
        for (_, d) in active(model, p, fs) {
            if !sf.satisfies(&d.on, &d.versions, &d.features) {
                let rule = if d.from == *p && model.fdeps().contains(d) { Rule::FeatureClosure } else { Rule::AdditionalClosure };
                report.push(rule, vec![p.clone()], format!("{d} is unsatisfied"));
            }
            let children: Vec<&Package> = sf
                .iter()
                .map(|(q, _)| q)
                .filter(|c| c.name == d.on && d.versions.contains(&c.version) && pi.contains(c, p))
                .collect();
            witnessed.extend(children.iter().map(|c| ((*c).clone(), p.clone())));
            let carries = |c: &Package| sf.get(c).is_some_and(|cf| d.features.is_subset(cf));
            if children.len() != 1 || !carries(children[0]) {
                report.push(
                    Rule::ParentClosure,
                    vec![p.clone()],
                    format!("{d} needs exactly one recorded child with its features, found {}", children.len()),
                );
            }
        }
    }
    for (c, p) in pi.iter().filter(|(c, p)| !witnessed.contains(&((*c).clone(), (*p).clone()))) {
        report.push(Rule::Unwitnessed, vec![c.clone(), p.clone()], format!("parent edge {c} <- {p} answers no dependency"));
    }
    let selected: Vec<&Package> = sf.iter().map(|(p, _)| p).collect();
    for (i, a) in selected.iter().enumerate() {
        for b in selected[i + 1..].iter().filter(|b| b.name == a.name) {
            if g.of(a)? == g.of(b)? {
                report.push(Rule::VersionGranularity, vec![(*a).clone(), (*b).clone()], format!("{a} and {b} share granularity {}", g.of(a)?));
            }
        }
    }
    Ok(report.finish())
}

pub fn lower_concurrent_feature(model: &FeatureModel, g: &Granularity) -> Result<CoreInstance> {
    check_concurrent_feature(model, g)?;
    lower_concurrent(&lower_features(model)?, g)
}

fn ungate(p: &Package) -> Package {
    match &p.name {
        PackageName::FeatureGate { base, .. } => Package::new((**base).clone(), p.version.clone()),
        _ => p.clone(),
    }
}

/// Features read off the gates of a concurrent resolution of the
/// feature-lowered instance, with parent edges mapped back to packages.
pub(crate) fn features_from_gates(
    sc: &Resolution,
    pic: &ParentRelation,
    model: &FeatureModel,
) -> (FeatureResolution, ParentRelation) {
    let sf: FeatureResolution = sc
        .iter()
        .filter(|p| model.repo().contains(p))
        .map(|p| {
            let fs: FeatureSet = model.features_of(p).iter().filter(|f| sc.contains(&gate(p, f))).cloned().collect();
            (p.clone(), fs)
        })
        .collect();
    let pi = pic
        .iter()
        // A gate's own edge to its package carries no information.
        .filter(|(c, p)| !(matches!(p.name, PackageName::FeatureGate { .. }) && ungate(p) == **c))
        .map(|(c, p)| (ungate(c), ungate(p)))
        .collect();
    (sf, pi)
}

/// Lifts through the concurrent lowering, then reads features off the gates.
pub fn lift_concurrent_feature(
    s: &Resolution,
    model: &FeatureModel,
    g: &Granularity,
) -> Result<(FeatureResolution, ParentRelation)> {
    check_concurrent_feature(model, g)?;
    let (sc, pic) = lift_concurrent(s, &lower_features(model)?, g)?;
    Ok(features_from_gates(&sc, &pic, model))
}

pub fn embed_concurrent_feature(
    sf: &FeatureResolution,
    pi: &ParentRelation,
    model: &FeatureModel,
    g: &Granularity,
) -> Result<Resolution> {
    let report = validate_concurrent_feature(model, g, sf, pi)?;
    if !report.is_valid() {
        return Err(Error::invalid(format!("not a concurrent feature resolution: {report}")));
    }
    let mut sc = BTreeSet::new();
    let mut pic = ParentRelation::new();
    for (p, fs) in sf.iter() {
        sc.insert(p.clone());
        for f in fs {
            sc.insert(gate(p, f));
            pic.insert(p.clone(), gate(p, f));
        }
        for (depender, d) in active(model, p, fs) {
            let child = sf
                .iter()
                .map(|(q, _)| q)
                .find(|c| c.name == d.on && d.versions.contains(&c.version) && pi.contains(c, p))
                .expect("validated parent closure");
            if d.features.is_empty() {
                pic.insert(child.clone(), depender.clone());
            }
            for f in &d.features {
                pic.insert(gate(child, f), depender.clone());
            }
        }
    }
    embed_concurrent(&Resolution::new(sc), &pic, &lower_features(model)?, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::Repository;
    use crate::name::versions;
    use crate::oracle::Oracle;
    use crate::validate_resolution;

    fn pkg(n: &str, v: &str) -> Package {
        Package::atom(n, v)
    }

    fn on(n: &str) -> PackageName {
        PackageName::atom(n)
    }

    fn shared_dependency() -> FeatureModel {
        let repo: Repository =
            [pkg("A", "1"), pkg("B", "1"), pkg("C", "1"), pkg("D", "1"), pkg("D", "2"), pkg("D", "3")].into_iter().collect();
        let support = [("1", "alpha"), ("2", "alpha"), ("2", "beta"), ("3", "beta")]
            .iter()
            .map(|(v, f)| (pkg("D", v), f.to_string()));
        let fdeps = [
            FeatureDependency::new(pkg("A", "1"), on("B"), versions(&["1"]), &[]),
            FeatureDependency::new(pkg("A", "1"), on("C"), versions(&["1"]), &[]),
            FeatureDependency::new(pkg("B", "1"), on("D"), versions(&["1", "2"]), &["alpha"]),
            FeatureDependency::new(pkg("C", "1"), on("D"), versions(&["2", "3"]), &["beta"]),
        ];
        FeatureModel::new(repo, pkg("A", "1"), support, fdeps, []).unwrap()
    }

    #[test]
    fn shared_dependency_lowers_to_twelve_dependencies() {
        let lowered = lower_concurrent_feature(&shared_dependency(), &Granularity::Identity).unwrap();
        let text: BTreeSet<String> = lowered.deps().iter().map(ToString::to_string).collect();
        let expected: BTreeSet<String> = [
            "gran<A,1>@1 -> gran<B,1> {1}",
            "gran<A,1>@1 -> gran<C,1> {1}",
            "gran<B,1>@1 -> inter<B@1,feat<D,alpha>> {g:1,g:2}",
            "gran<C,1>@1 -> inter<C@1,feat<D,beta>> {g:2,g:3}",
            "inter<B@1,feat<D,alpha>>@g:1 -> gran<feat<D,alpha>,1> {1}",
            "inter<B@1,feat<D,alpha>>@g:2 -> gran<feat<D,alpha>,2> {2}",
            "inter<C@1,feat<D,beta>>@g:2 -> gran<feat<D,beta>,2> {2}",
            "inter<C@1,feat<D,beta>>@g:3 -> gran<feat<D,beta>,3> {3}",
            "gran<feat<D,alpha>,1>@1 -> gran<D,1> {1}",
            "gran<feat<D,alpha>,2>@2 -> gran<D,2> {2}",
            "gran<feat<D,beta>,2>@2 -> gran<D,2> {2}",
            "gran<feat<D,beta>,3>@3 -> gran<D,3> {3}",
        ]
        .into_iter()
        .map(String::from)
        .collect();
        let extra: Vec<_> = text.difference(&expected).collect();
        assert!(extra.is_empty(), "unexpected {extra:?}");
        assert_eq!(text, expected);
    }

    fn pairing() -> (FeatureResolution, ParentRelation) {
        let mut sf = FeatureResolution::new();
        for n in ["A", "B", "C"] {
            sf.insert(pkg(n, "1"), []);
        }
        sf.insert(pkg("D", "1"), ["alpha".to_string()]);
        sf.insert(pkg("D", "3"), ["beta".to_string()]);
        let pi = [
            (pkg("B", "1"), pkg("A", "1")),
            (pkg("C", "1"), pkg("A", "1")),
            (pkg("D", "1"), pkg("B", "1")),
            (pkg("D", "3"), pkg("C", "1")),
        ]
        .into_iter()
        .collect();
        (sf, pi)
    }

    #[test]
    fn validity() {
        let model = shared_dependency();
        let (sf, pi) = pairing();
        assert!(validate_concurrent_feature(&model, &Granularity::Identity, &sf, &pi).unwrap().is_valid());
        let mut shared = FeatureResolution::new();
        for n in ["A", "B", "C"] {
            shared.insert(pkg(n, "1"), []);
        }
        shared.insert(pkg("D", "2"), ["alpha".to_string()]);
        let wrong: ParentRelation = [(pkg("B", "1"), pkg("A", "1")), (pkg("C", "1"), pkg("A", "1")), (pkg("D", "2"), pkg("B", "1")), (pkg("D", "2"), pkg("C", "1"))]
            .into_iter()
            .collect();
        let report = validate_concurrent_feature(&model, &Granularity::Identity, &shared, &wrong).unwrap();
        assert!(report.has(Rule::ParentClosure));
    }

    #[test]
    fn round_trip() {
        let model = shared_dependency();
        let g = Granularity::Identity;
        let lowered = lower_concurrent_feature(&model, &g).unwrap();
        let (sf, pi) = pairing();
        let core = embed_concurrent_feature(&sf, &pi, &model, &g).unwrap();
        assert!(validate_resolution(&lowered, &core).unwrap().is_valid());
        assert_eq!(lift_concurrent_feature(&core, &model, &g).unwrap(), (sf, pi));
        for s in Oracle::with_bound(40).enumerate(&lowered).unwrap() {
            let (sf, pi) = lift_concurrent_feature(&s, &model, &g).unwrap();
            assert!(validate_concurrent_feature(&model, &g, &sf, &pi).unwrap().is_valid(), "{sf} {pi}");
        }
    }
}
