//! Lowering an instance that uses several extensions through a stack of
//! passes, and lifting core resolutions back through the same stack.

pub mod compose;
pub mod stack;
pub mod translate;

use std::collections::BTreeSet;

use crate::buildgraph::OptionalDependency;
use crate::calculus::{validate_resolution, CoreInstance, Dependency, Repository, Resolution};
use crate::error::{Error, Result};
use crate::ext::concurrent::{
    lift_concurrent, lower_concurrent, rename, unrename, validate_concurrent, Granularity, ParentRelation,
};
use crate::ext::conflicts::{lift_conflict_resolution, lower_conflicts, validate_conflict_resolution, Conflict};
use crate::ext::features::{
    lift_feature_resolution, lower_features, validate_feature_resolution, AdditionalDependency, FeatureDependency,
    FeatureModel, FeatureResolution,
};
use crate::ext::formulae::{
    lift_formula_resolution, lower_formulae, validate_formula_resolution, FormulaDep, FormulaInstance,
    PackageFormula, VarAssignment, VariableDecl,
};
use crate::ext::peer::{lift_peer, lower_peer, validate_peer, PeerDependency};
use crate::ext::provides::{lift_virtual, lower_virtual, validate_virtual, ProviderRelation, Provides, VirtualInstance};
use crate::report::ValidityReport;
use crate::name::{GranToken, Package, PackageName, VersionSet};
use crate::restricted::SingularDependency;
use crate::versions::{eval_formula, FormulaDependency};

pub use compose::{
    embed_concurrent_feature, lift_concurrent_feature, lower_concurrent_feature, validate_concurrent_feature,
};
pub use stack::{validate_order, validate_stack, ExtensionStack, ExtensionTag};

/// Feature support and feature-parameterised dependencies. Plain
/// dependencies of the instance count as requiring no features.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureSpec {
    pub support: Vec<(Package, String)>,
    pub fdeps: Vec<FeatureDependency>,
    pub adeps: Vec<AdditionalDependency>,
}

/// One requirement of a query: an explicit version set or a formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QueryItem {
    Versions(PackageName, VersionSet),
    Formula(PackageName, crate::versions::VersionFormula),
}

/// A repository, a root, plain dependencies, and the relations of every
/// extension the instance uses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendedInstance {
    pub repo: Repository,
    pub root: Package,
    pub deps: Vec<Dependency>,
    pub version_formulae: Vec<FormulaDependency>,
    pub conflicts: Vec<Conflict>,
    pub granularity: Option<Granularity>,
    pub peers: Vec<PeerDependency>,
    pub features: Option<FeatureSpec>,
    pub formulae: Vec<FormulaDep>,
    pub variables: Option<VariableDecl>,
    pub provides: Vec<Provides>,
    pub optional: Vec<OptionalDependency>,
    pub singular: Vec<SingularDependency>,
}

impl ExtendedInstance {
    pub fn new(repo: Repository, root: Package) -> Self {
        ExtendedInstance {
            repo,
            root,
            deps: Vec::new(),
            version_formulae: Vec::new(),
            conflicts: Vec::new(),
            granularity: None,
            peers: Vec::new(),
            features: None,
            formulae: Vec::new(),
            variables: None,
            provides: Vec::new(),
            optional: Vec::new(),
            singular: Vec::new(),
        }
    }

    pub fn from_core(inst: &CoreInstance) -> Self {
        let mut out = Self::new(inst.repo().clone(), inst.root().clone());
        out.deps = inst.deps().to_vec();
        out
    }

    /// Replaces the root by the reserved root, whose dependencies are `query`.
    pub fn with_query(mut self, query: impl IntoIterator<Item = QueryItem>) -> Self {
        let root = Package::root();
        let old = std::mem::replace(&mut self.root, root.clone());
        if old.is_root() {
            self.deps.retain(|d| d.from != root);
            self.version_formulae.retain(|d| d.from != root);
        }
        self.repo.insert(root.clone());
        for q in query {
            match q {
                QueryItem::Versions(on, vs) => self.deps.push(Dependency::new(root.clone(), on, vs)),
                QueryItem::Formula(on, phi) => self.version_formulae.push(FormulaDependency::new(root.clone(), on, phi)),
            }
        }
        self
    }

    /// Sorts and deduplicates every relation, so equal instances compare equal.
    pub fn canonicalize(&mut self) {
        fn norm<T: Ord>(v: &mut Vec<T>) {
            v.sort();
            v.dedup();
        }
        norm(&mut self.deps);
        norm(&mut self.version_formulae);
        norm(&mut self.conflicts);
        norm(&mut self.peers);
        norm(&mut self.formulae);
        norm(&mut self.provides);
        norm(&mut self.optional);
        norm(&mut self.singular);
        if let Some(spec) = self.features.as_mut() {
            norm(&mut spec.support);
            norm(&mut spec.fdeps);
            norm(&mut spec.adeps);
        }
    }

    /// The extensions whose relations are non-empty.
    pub fn uses(&self) -> BTreeSet<ExtensionTag> {
        use ExtensionTag::*;
        let mut out = BTreeSet::new();
        let mut mark = |used: bool, t| {
            if used {
                out.insert(t);
            }
        };
        mark(!self.version_formulae.is_empty(), VersionFormulae);
        mark(!self.conflicts.is_empty(), Conflicts);
        mark(self.granularity.is_some(), Concurrent);
        mark(!self.peers.is_empty(), Peer);
        mark(self.features.is_some(), Features);
        mark(!self.formulae.is_empty(), PackageFormulae);
        mark(self.variables.as_ref().is_some_and(|d| !d.is_empty()), VariableFormulae);
        mark(!self.provides.is_empty(), Virtual);
        mark(!self.optional.is_empty(), Optional);
        mark(!self.singular.is_empty(), Singular);
        out
    }

    /// The stack that lowers exactly the extensions in use, in the default order.
    pub fn default_stack(&self) -> ExtensionStack {
        let mut tags = self.uses();
        if tags.contains(&ExtensionTag::VariableFormulae) {
            tags.insert(ExtensionTag::PackageFormulae);
        }
        if tags.contains(&ExtensionTag::Peer) {
            tags.insert(ExtensionTag::Concurrent);
        }
        ExtensionStack::canonical(tags)
    }

    /// The feature model over `core`, whose dependencies all require no features.
    fn feature_model(&self, core: &CoreInstance) -> Result<FeatureModel> {
        let spec = self.features.clone().unwrap_or_default();
        let plain = core.deps().iter().map(|d| FeatureDependency::new(d.from.clone(), d.on.clone(), d.versions.clone(), &[]));
        FeatureModel::new(
            core.repo().clone(),
            core.root().clone(),
            spec.support,
            plain.chain(spec.fdeps),
            spec.adeps,
        )
    }
}

/// What each pass needs in order to lift a resolution back through it.
#[derive(Clone, Debug)]
enum Pass {
    Virtual(VirtualInstance),
    Features(FeatureModel),
    Concurrent { input: CoreInstance, g: Granularity, peers: Vec<PeerDependency> },
    Conflicts { input: CoreInstance, conflicts: Vec<Conflict> },
    Formulae(FormulaInstance),
}

/// A core instance and the trail needed to lift its resolutions.
#[derive(Clone, Debug)]
pub struct LoweredBundle {
    pub core: CoreInstance,
    pub stack: ExtensionStack,
    trail: Vec<Pass>,
}

/// A resolution with whatever witnesses the stack's extensions call for.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtendedResolution {
    pub selected: Resolution,
    pub features: Option<FeatureResolution>,
    pub parents: Option<ParentRelation>,
    pub providers: Option<ProviderRelation>,
    pub assignment: Option<VarAssignment>,
}

/// Splits an atom by granularity class into a disjunction of atoms on the
/// lowered names.
fn rename_atom(on: &PackageName, vs: &VersionSet, repo: &Repository, g: &Granularity) -> Result<PackageFormula> {
    let mut classes: std::collections::BTreeMap<GranToken, VersionSet> = Default::default();
    for u in vs.intersection(repo.versions(on)) {
        classes.entry(g.apply(u)?).or_default().insert(u.clone());
    }
    let mut atoms = classes.into_iter().map(|(w, vs)| PackageFormula::dep(PackageName::granular(on.clone(), w), vs));
    let Some(first) = atoms.next() else {
        return Ok(PackageFormula::dep(PackageName::granular(on.clone(), GranToken::Epsilon), VersionSet::new()));
    };
    Ok(atoms.fold(first, PackageFormula::or))
}

fn rename_formula(psi: &PackageFormula, repo: &Repository, g: &Granularity) -> Result<PackageFormula> {
    Ok(match psi {
        PackageFormula::Dep { on, versions } => rename_atom(on, versions, repo, g)?,
        PackageFormula::And(l, r) => rename_formula(l, repo, g)?.and(rename_formula(r, repo, g)?),
        PackageFormula::Or(l, r) => rename_formula(l, repo, g)?.or(rename_formula(r, repo, g)?),
        PackageFormula::Not(inner) => rename_formula(inner, repo, g)?.not(),
        other => other.clone(),
    })
}

fn rename_conflict(c: &Conflict, repo: &Repository, g: &Granularity) -> Result<Vec<Conflict>> {
    let from = rename(&c.from, g)?;
    let mut classes: std::collections::BTreeMap<GranToken, VersionSet> = Default::default();
    for u in c.versions.intersection(repo.versions(&c.on)) {
        classes.entry(g.apply(u)?).or_default().insert(u.clone());
    }
    Ok(classes
        .into_iter()
        .map(|(w, vs)| Conflict::new(from.clone(), PackageName::granular(c.on.clone(), w), vs))
        .collect())
}

/// Runs the passes of `stack` over `inst`.
pub fn lower_stack(inst: &ExtendedInstance, stack: &ExtensionStack) -> Result<LoweredBundle> {
    use ExtensionTag::*;
    validate_stack(stack, inst)?;
    let mut deps = inst.deps.clone();
    for d in &inst.version_formulae {
        d.formula.check()?;
        deps.push(Dependency::new(d.from.clone(), d.on.clone(), eval_formula(&d.formula, &d.on, &inst.repo)));
    }
    deps.extend(inst.singular.iter().map(SingularDependency::to_dependency));
    let mut trail = Vec::new();
    let mut core = if stack.contains(Virtual) {
        let vi = VirtualInstance::new(inst.repo.clone(), deps, inst.root.clone(), inst.provides.clone())?;
        let core = lower_virtual(&vi)?;
        trail.push(Pass::Virtual(vi));
        core
    } else {
        CoreInstance::new(inst.repo.clone(), deps, inst.root.clone())?
    };
    let mut conflicts = inst.conflicts.clone();
    let mut formulae = inst.formulae.clone();
    for tag in stack.tags() {
        match tag {
            Features => {
                let model = inst.feature_model(&core)?;
                core = lower_features(&model)?;
                trail.push(Pass::Features(model));
            }
            Concurrent => {
                let g = inst
                    .granularity
                    .clone()
                    .ok_or_else(|| Error::invalid("a concurrent pass needs a granularity"))?;
                if let Some(Pass::Features(model)) = trail.last() {
                    compose::check_concurrent_feature(model, &g)?;
                }
                let peers = if stack.contains(Peer) { inst.peers.clone() } else { Vec::new() };
                let input = core;
                core = if peers.is_empty() { lower_concurrent(&input, &g)? } else { lower_peer(&input, &peers, &g)? };
                conflicts = conflicts
                    .iter()
                    .map(|c| rename_conflict(c, input.repo(), &g))
                    .collect::<Result<Vec<_>>>()?
                    .concat();
                formulae = formulae
                    .iter()
                    .map(|d| Ok(FormulaDep::new(rename(&d.from, &g)?, rename_formula(&d.formula, input.repo(), &g)?)))
                    .collect::<Result<_>>()?;
                trail.push(Pass::Concurrent { input, g, peers });
            }
            Conflicts => {
                let input = core;
                core = lower_conflicts(&input, &conflicts)?;
                trail.push(Pass::Conflicts { input, conflicts: conflicts.clone() });
            }
            PackageFormulae => {
                let fi = FormulaInstance::from_core(&core, formulae.clone(), inst.variables.clone())?;
                core = lower_formulae(&fi)?;
                trail.push(Pass::Formulae(fi));
            }
            VersionFormulae | Virtual | Peer | VariableFormulae | Optional | Singular => {}
        }
    }
    Ok(LoweredBundle { core, stack: stack.clone(), trail })
}

/// Lifts a core resolution back through the passes in reverse order.
pub fn lift_stack(s: &Resolution, bundle: &LoweredBundle) -> Result<ExtendedResolution> {
    let mut out = ExtendedResolution::default();
    let mut cur = s.clone();
    let mut passes = bundle.trail.iter().rev().peekable();
    while let Some(pass) = passes.next() {
        match pass {
            Pass::Formulae(fi) => {
                let (sp, sigma) = lift_formula_resolution(&cur, fi)?;
                cur = sp;
                out.assignment = Some(sigma);
            }
            Pass::Conflicts { input, conflicts } => {
                cur = lift_conflict_resolution(&cur, input, conflicts)?;
            }
            Pass::Concurrent { input, g, peers } => {
                let (sc, pic) =
                    if peers.is_empty() { lift_concurrent(&cur, input, g)? } else { lift_peer(&cur, input, peers, g)? };
                if let Some(sigma) = out.assignment.as_mut() {
                    sigma.locals = std::mem::take(&mut sigma.locals)
                        .into_iter()
                        .map(|((l, p), c)| {
                            let base = unrename(&Resolution::from_iter([p.clone()])).into_inner().pop_first();
                            ((l, base.unwrap_or(p)), c)
                        })
                        .collect();
                }
                if let Some(Pass::Features(model)) = passes.peek() {
                    let (sf, pi) = compose::features_from_gates(&sc, &pic, model);
                    cur = sf.packages();
                    out.features = Some(sf);
                    out.parents = Some(pi);
                    passes.next();
                } else {
                    cur = sc;
                    out.parents = Some(pic);
                }
            }
            Pass::Features(model) => {
                let sf = lift_feature_resolution(&cur, model)?;
                cur = sf.packages();
                out.features = Some(sf);
            }
            Pass::Virtual(vi) => {
                let (sp, rho) = lift_virtual(&cur, vi)?;
                cur = sp;
                out.providers = Some(rho);
            }
        }
    }
    out.selected = cur;
    Ok(out)
}

/// Checks an extended resolution against the instance a bundle was lowered
/// from. Stacks with one witness-carrying pass are supported, plus features
/// followed by concurrent versions.
pub fn validate_extended(bundle: &LoweredBundle, r: &ExtendedResolution) -> Result<ValidityReport> {
    let s = &r.selected;
    let parents = r.parents.clone().unwrap_or_default();
    let features = || {
        r.features.clone().unwrap_or_else(|| {
            let mut sf = FeatureResolution::new();
            for p in s {
                sf.insert(p.clone(), []);
            }
            sf
        })
    };
    match bundle.trail.as_slice() {
        [] => validate_resolution(&bundle.core, s),
        [Pass::Virtual(vi)] => validate_virtual(vi, s, &r.providers.clone().unwrap_or_default()),
        [Pass::Features(model)] => validate_feature_resolution(model, &features()),
        [Pass::Features(model), Pass::Concurrent { g, .. }] => validate_concurrent_feature(model, g, &features(), &parents),
        [Pass::Concurrent { input, g, peers }] if peers.is_empty() => validate_concurrent(input, g, s, &parents),
        [Pass::Concurrent { input, g, peers }] => validate_peer(input, peers, g, s, &parents),
        [Pass::Conflicts { input, conflicts }] => validate_conflict_resolution(input, conflicts, s),
        [Pass::Formulae(fi)] => validate_formula_resolution(fi, s, &r.assignment.clone().unwrap_or_default()),
        _ => Err(Error::invalid(format!("resolutions of the stack [{}] cannot be validated directly", bundle.stack))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext::conflicts::lower_conflicts;
    use crate::name::versions;
    use crate::oracle::Oracle;

    fn pkg(n: &str, v: &str) -> Package {
        Package::atom(n, v)
    }

    #[test]
    fn empty_stack_is_identity() {
        let repo: Repository = [pkg("A", "1"), pkg("B", "1")].into_iter().collect();
        let core = CoreInstance::new(repo, [Dependency::new(pkg("A", "1"), PackageName::atom("B"), versions(&["1"]))], pkg("A", "1")).unwrap();
        let bundle = lower_stack(&ExtendedInstance::from_core(&core), &ExtensionStack::default()).unwrap();
        assert_eq!(bundle.core, core);
        let s: Resolution = [pkg("A", "1"), pkg("B", "1")].into_iter().collect();
        assert_eq!(lift_stack(&s, &bundle).unwrap().selected, s);
    }

    #[test]
    fn conflicts_pass_matches_direct_lowering() {
        let repo: Repository = [pkg("A", "1"), pkg("B", "1"), pkg("B", "2")].into_iter().collect();
        let core = CoreInstance::new(repo, [], pkg("A", "1")).unwrap();
        let mut inst = ExtendedInstance::from_core(&core);
        inst.conflicts = vec![Conflict::new(pkg("A", "1"), PackageName::atom("B"), versions(&["1", "2"]))];
        let bundle = lower_stack(&inst, &inst.default_stack()).unwrap();
        assert_eq!(bundle.core, lower_conflicts(&core, &inst.conflicts).unwrap());
    }

    #[test]
    fn concurrent_then_conflicts() {
        let repo: Repository = [pkg("A", "1"), pkg("B", "1"), pkg("B", "2"), pkg("C", "1")].into_iter().collect();
        let deps = [
            Dependency::new(pkg("A", "1"), PackageName::atom("B"), versions(&["1"])),
            Dependency::new(pkg("A", "1"), PackageName::atom("C"), versions(&["1"])),
            Dependency::new(pkg("C", "1"), PackageName::atom("B"), versions(&["2"])),
        ];
        let core = CoreInstance::new(repo, deps, pkg("A", "1")).unwrap();
        let mut inst = ExtendedInstance::from_core(&core);
        inst.granularity = Some(Granularity::Identity);
        let stack = ExtensionStack::new([ExtensionTag::Concurrent, ExtensionTag::Conflicts]);
        let plain = lower_stack(&inst, &stack).unwrap();
        assert!(Oracle::default().find_one(&plain.core).unwrap().is_some());
        inst.conflicts = vec![Conflict::new(pkg("C", "1"), PackageName::atom("B"), versions(&["1"]))];
        let bundle = lower_stack(&inst, &stack).unwrap();
        assert!(Oracle::default().find_one(&bundle.core).unwrap().is_none());
        let guards: Vec<_> = bundle.core.repo().names().filter(|n| matches!(n, PackageName::ConflictGuard { .. })).collect();
        assert_eq!(guards.len(), 1);
    }
}
