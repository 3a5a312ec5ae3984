//! The JSON interchange format.
//!
//! Packages are written `name@version`, version sets `{1,2}`, and formulae
//! in the textual syntax of [`crate::text`]. Every collection is emitted
//! sorted and object keys appear in alphabetical order, so emission is
//! canonical.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::buildgraph::{CycleReport, OptionalDependency};
use crate::calculus::{Dependency, Repository, Resolution};
use crate::error::{Error, Result};
use crate::ext::concurrent::{Granularity, ParentRelation};
use crate::ext::conflicts::Conflict;
use crate::ext::features::{AdditionalDependency, FeatureDependency, FeatureResolution, FeatureSet};
use crate::ext::formulae::{FormulaDep, VarAssignment, VariableDecl};
use crate::ext::peer::PeerDependency;
use crate::ext::provides::{ProviderRelation, Provides};
use crate::name::{DisplaySet, GranToken, Package, PackageName};
use crate::pipeline::{ExtendedInstance, ExtendedResolution, FeatureSpec, QueryItem};
use crate::restricted::SingularDependency;
use crate::text::{parse_name, parse_package, parse_package_formula, parse_version, parse_version_formula, parse_version_set};
use crate::versions::FormulaDependency;

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependencyDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
    pub from: String,
    pub on: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub versions: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationDoc {
    pub from: String,
    pub on: String,
    pub versions: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportDoc {
    pub feature: String,
    pub package: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDepDoc {
    /// For additional dependencies: the feature that enables it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<String>,
    pub from: String,
    pub on: String,
    pub versions: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub adeps: Vec<FeatureDepDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fdeps: Vec<FeatureDepDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub support: Vec<SupportDoc>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulaDoc {
    pub formula: String,
    pub from: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariablesDoc {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub globals: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub locals: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvidesDoc {
    pub name: String,
    pub provider: String,
    pub version: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularDoc {
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryItemDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
    pub on: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub versions: Option<String>,
}

/// The immediate dependencies of the reserved root.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryDocument {
    pub query: Vec<QueryItemDoc>,
}

/// A repository with every relation an instance may carry. Without a
/// `root`, the reserved root is added and `query` lists its dependencies.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepoDocument {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflicts: Vec<RelationDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dependencies: Vec<DependencyDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeaturesDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub formulae: Vec<FormulaDoc>,
    /// `identity`, `major`, `constant`, or a table such as `{1:1,2.0:2}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub optional: Vec<RelationDoc>,
    pub packages: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub peer: Vec<RelationDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provides: Vec<ProvidesDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub query: Vec<QueryItemDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub singular: Vec<SingularDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variables: Option<VariablesDoc>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalDoc {
    pub package: String,
    pub value: String,
    pub var: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentDoc {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub globals: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub locals: Vec<LocalDoc>,
}

/// A resolution and whichever witnesses accompany it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<AssignmentDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build_order: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<BTreeMap<String, Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parents: Option<Vec<[String; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub providers: Option<Vec<[String; 2]>>,
    pub selected: Vec<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub unresolvable: bool,
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}

fn to_text<T: Serialize>(doc: &T) -> Result<String> {
    let mut out = serde_json::to_string_pretty(doc).map_err(|e| Error::Emit(e.to_string()))?;
    out.push('\n');
    Ok(out)
}

fn sorted<T: ToString>(items: impl IntoIterator<Item = T>) -> Vec<String> {
    let mut out: Vec<String> = items.into_iter().map(|t| t.to_string()).collect();
    out.sort();
    out.dedup();
    out
}

fn relation(from: &Package, on: &PackageName, vs: &crate::name::VersionSet) -> RelationDoc {
    RelationDoc { from: from.to_string(), on: on.to_string(), versions: DisplaySet(vs).to_string() }
}

pub fn parse_granularity(text: &str) -> Result<Granularity> {
    match text.trim() {
        "identity" => Ok(Granularity::Identity),
        "major" => Ok(Granularity::Major),
        "constant" | "epsilon" => Ok(Granularity::Constant),
        t if t.starts_with('{') && t.ends_with('}') => {
            let body = &t[1..t.len() - 1];
            let mut table = BTreeMap::new();
            for entry in body.split(',').map(str::trim).filter(|e| !e.is_empty()) {
                let (v, g) = entry
                    .rsplit_once(':')
                    .ok_or_else(|| Error::invalid(format!("granularity entry {entry:?} needs `version:token`")))?;
                let token = match g.trim() {
                    "eps" => GranToken::Epsilon,
                    g => GranToken::of(parse_version(g)?),
                };
                table.insert(parse_version(v.trim())?, token);
            }
            Ok(Granularity::Table(table))
        }
        other => Err(Error::invalid(format!("unknown granularity {other:?}"))),
    }
}

pub fn granularity_text(g: &Granularity) -> String {
    match g {
        Granularity::Constant => "constant".into(),
        other => other.to_string(),
    }
}

fn query_item(q: &QueryItemDoc) -> Result<QueryItem> {
    let on = parse_name(&q.on)?;
    match (&q.versions, &q.formula) {
        (Some(vs), None) => Ok(QueryItem::Versions(on, parse_version_set(vs)?)),
        (None, Some(phi)) => Ok(QueryItem::Formula(on, parse_version_formula(phi)?)),
        _ => Err(Error::invalid(format!("query item on {} needs exactly one of versions or formula", q.on))),
    }
}

impl QueryDocument {
    pub fn items(&self) -> Result<Vec<QueryItem>> {
        self.query.iter().map(query_item).collect()
    }
}

pub fn parse_query(text: &str) -> Result<QueryDocument> {
    serde_json::from_str(text).map_err(json_error)
}

pub fn emit_query(doc: &QueryDocument) -> Result<String> {
    to_text(doc)
}

impl RepoDocument {
    pub fn to_instance(&self) -> Result<ExtendedInstance> {
        if self.packages.is_empty() {
            return Err(Error::invalid("a repository document needs at least one package"));
        }
        let repo: Repository = self.packages.iter().map(|p| parse_package(p)).collect::<Result<_>>()?;
        let pkg = |s: &str| parse_package(s);
        let root = match &self.root {
            Some(r) => {
                if !self.query.is_empty() {
                    return Err(Error::invalid("a document with a root cannot also carry a query"));
                }
                pkg(r)?
            }
            None => Package::root(),
        };
        let mut inst = ExtendedInstance::new(repo, root);
        for d in &self.dependencies {
            let (from, on) = (pkg(&d.from)?, parse_name(&d.on)?);
            match (&d.versions, &d.formula) {
                (Some(vs), None) => inst.deps.push(Dependency::new(from, on, parse_version_set(vs)?)),
                (None, Some(phi)) => inst.version_formulae.push(FormulaDependency::new(from, on, parse_version_formula(phi)?)),
                _ => {
                    return Err(Error::invalid(format!(
                        "dependency {} -> {} needs exactly one of versions or formula",
                        d.from, d.on
                    )))
                }
            }
        }
        for c in &self.conflicts {
            inst.conflicts.push(Conflict::new(pkg(&c.from)?, parse_name(&c.on)?, parse_version_set(&c.versions)?));
        }
        inst.granularity = self.granularity.as_deref().map(parse_granularity).transpose()?;
        for p in &self.peer {
            inst.peers.push(PeerDependency::new(pkg(&p.from)?, parse_name(&p.on)?, parse_version_set(&p.versions)?));
        }
        if let Some(f) = &self.features {
            let mut spec = FeatureSpec::default();
            for s in &f.support {
                spec.support.push((pkg(&s.package)?, s.feature.clone()));
            }
            for d in &f.fdeps {
                if d.feature.is_some() {
                    return Err(Error::invalid("feature dependencies do not name an enabling feature"));
                }
                let fs: Vec<&str> = d.features.iter().map(String::as_str).collect();
                spec.fdeps.push(FeatureDependency::new(pkg(&d.from)?, parse_name(&d.on)?, parse_version_set(&d.versions)?, &fs));
            }
            for d in &f.adeps {
                let feature = d
                    .feature
                    .as_deref()
                    .ok_or_else(|| Error::invalid("an additional dependency needs its enabling feature"))?;
                let fs: Vec<&str> = d.features.iter().map(String::as_str).collect();
                spec.adeps.push(AdditionalDependency::new(
                    pkg(&d.from)?,
                    feature,
                    parse_name(&d.on)?,
                    parse_version_set(&d.versions)?,
                    &fs,
                ));
            }
            inst.features = Some(spec);
        }
        for f in &self.formulae {
            inst.formulae.push(FormulaDep::new(pkg(&f.from)?, parse_package_formula(&f.formula)?));
        }
        if let Some(v) = &self.variables {
            inst.variables = Some(VariableDecl::new(v.globals.clone(), v.locals.clone())?);
        }
        for t in &self.provides {
            inst.provides.push(Provides::new(pkg(&t.provider)?, parse_name(&t.name)?, parse_version(&t.version)?));
        }
        for o in &self.optional {
            inst.optional.push(OptionalDependency::new(pkg(&o.from)?, parse_name(&o.on)?, parse_version_set(&o.versions)?));
        }
        for s in &self.singular {
            inst.singular.push(SingularDependency::new(pkg(&s.from)?, pkg(&s.to)?));
        }
        if self.root.is_none() {
            let query = self.query.iter().map(query_item).collect::<Result<Vec<_>>>()?;
            inst = inst.with_query(query);
        }
        inst.canonicalize();
        Ok(inst)
    }

    pub fn from_instance(inst: &ExtendedInstance) -> Self {
        let mut inst = inst.clone();
        inst.canonicalize();
        let inst = &inst;
        let reserved = inst.root.is_root();
        let from_root = |p: &Package| reserved && p == &inst.root;
        let mut doc = RepoDocument {
            packages: sorted(inst.repo.packages().filter(|p| !from_root(p))),
            root: (!reserved).then(|| inst.root.to_string()),
            granularity: inst.granularity.as_ref().map(granularity_text),
            ..Default::default()
        };
        for d in &inst.deps {
            let versions = Some(DisplaySet(&d.versions).to_string());
            if from_root(&d.from) {
                doc.query.push(QueryItemDoc { on: d.on.to_string(), versions, formula: None });
            } else {
                doc.dependencies.push(DependencyDoc { from: d.from.to_string(), on: d.on.to_string(), versions, formula: None });
            }
        }
        for d in &inst.version_formulae {
            let formula = Some(d.formula.to_string());
            if from_root(&d.from) {
                doc.query.push(QueryItemDoc { on: d.on.to_string(), versions: None, formula });
            } else {
                doc.dependencies.push(DependencyDoc { from: d.from.to_string(), on: d.on.to_string(), versions: None, formula });
            }
        }
        doc.conflicts = inst.conflicts.iter().map(|c| relation(&c.from, &c.on, &c.versions)).collect();
        doc.peer = inst.peers.iter().map(|p| relation(&p.from, &p.on, &p.versions)).collect();
        doc.optional = inst.optional.iter().map(|o| relation(&o.from, &o.on, &o.versions)).collect();
        doc.features = inst.features.as_ref().map(|spec| {
            let fdep = |d: &FeatureDependency, feature: Option<&String>| FeatureDepDoc {
                feature: feature.cloned(),
                features: d.features.iter().cloned().collect(),
                from: d.from.to_string(),
                on: d.on.to_string(),
                versions: DisplaySet(&d.versions).to_string(),
            };
            FeaturesDoc {
                support: spec
                    .support
                    .iter()
                    .map(|(p, f)| SupportDoc { feature: f.clone(), package: p.to_string() })
                    .collect(),
                fdeps: spec.fdeps.iter().map(|d| fdep(d, None)).collect(),
                adeps: spec.adeps.iter().map(|a| fdep(&a.dep, Some(&a.feature))).collect(),
            }
        });
        doc.formulae = inst
            .formulae
            .iter()
            .map(|f| FormulaDoc { formula: f.formula.to_string(), from: f.from.to_string() })
            .collect();
        doc.variables = inst.variables.as_ref().filter(|v| !v.is_empty()).map(|v| VariablesDoc {
            globals: v.globals().map(|(k, d)| (k.clone(), d.clone())).collect(),
            locals: v.locals().map(|(k, d)| (k.clone(), d.clone())).collect(),
        });
        doc.provides = inst
            .provides
            .iter()
            .map(|t| ProvidesDoc { name: t.name.to_string(), provider: t.provider.to_string(), version: t.version.to_string() })
            .collect();
        doc.singular = inst.singular.iter().map(|s| SingularDoc { from: s.from.to_string(), to: s.to.to_string() }).collect();
        doc.sort();
        doc
    }

    fn sort(&mut self) {
        fn by_key<T, K: Ord>(v: &mut Vec<T>, key: impl Fn(&T) -> K) {
            v.sort_by_key(|t| key(t));
        }
        by_key(&mut self.dependencies, |d| (d.from.clone(), d.on.clone(), d.versions.clone(), d.formula.clone()));
        by_key(&mut self.query, |d| (d.on.clone(), d.versions.clone(), d.formula.clone()));
        for v in [&mut self.conflicts, &mut self.peer, &mut self.optional] {
            by_key(v, |r| (r.from.clone(), r.on.clone(), r.versions.clone()));
        }
        if let Some(f) = self.features.as_mut() {
            by_key(&mut f.support, |s| (s.package.clone(), s.feature.clone()));
            for v in [&mut f.fdeps, &mut f.adeps] {
                by_key(v, |d| (d.from.clone(), d.feature.clone(), d.on.clone(), d.versions.clone(), d.features.clone()));
            }
        }
        by_key(&mut self.formulae, |f| (f.from.clone(), f.formula.clone()));
        by_key(&mut self.provides, |t| (t.provider.clone(), t.name.clone(), t.version.clone()));
        by_key(&mut self.singular, |s| (s.from.clone(), s.to.clone()));
    }
}

pub fn parse_repo_document(text: &str) -> Result<RepoDocument> {
    serde_json::from_str(text).map_err(json_error)
}

pub fn parse_repo(text: &str) -> Result<ExtendedInstance> {
    parse_repo_document(text)?.to_instance()
}

pub fn emit_repo(inst: &ExtendedInstance) -> Result<String> {
    to_text(&RepoDocument::from_instance(inst))
}

impl ResolutionDocument {
    pub fn from_selected(s: &Resolution) -> Self {
        ResolutionDocument { selected: sorted(s.iter()), ..Default::default() }
    }

    pub fn unresolvable() -> Self {
        ResolutionDocument { unresolvable: true, ..Default::default() }
    }

    pub fn from_extended(r: &ExtendedResolution) -> Self {
        let mut doc = Self::from_selected(&r.selected);
        doc.features = r.features.as_ref().map(|sf| {
            sf.iter().map(|(p, fs)| (p.to_string(), fs.iter().cloned().collect())).collect()
        });
        doc.parents = r.parents.as_ref().map(|pi| {
            let mut out: Vec<[String; 2]> = pi.iter().map(|(c, p)| [c.to_string(), p.to_string()]).collect();
            out.sort();
            out
        });
        doc.providers = r.providers.as_ref().map(|rho| {
            let mut out: Vec<[String; 2]> = rho.iter().map(|(t, d)| [t.to_string(), d.to_string()]).collect();
            out.sort();
            out
        });
        doc.assignment = r.assignment.as_ref().map(|sigma| {
            let mut locals: Vec<LocalDoc> = sigma
                .locals
                .iter()
                .map(|((var, p), value)| LocalDoc { package: p.to_string(), value: value.clone(), var: var.clone() })
                .collect();
            locals.sort_by(|a, b| (&a.package, &a.var).cmp(&(&b.package, &b.var)));
            AssignmentDoc { globals: sigma.globals.clone(), locals }
        });
        doc
    }

    pub fn with_build_order(mut self, order: std::result::Result<Vec<Package>, CycleReport>) -> Self {
        match order {
            Ok(order) => self.build_order = Some(order.iter().map(ToString::to_string).collect()),
            Err(cycle) => self.cycle = Some(cycle.packages.iter().map(ToString::to_string).collect()),
        }
        self
    }

    pub fn selected(&self) -> Result<Resolution> {
        self.selected.iter().map(|p| parse_package(p)).collect()
    }

    pub fn to_extended(&self) -> Result<ExtendedResolution> {
        let pair = |[a, b]: &[String; 2]| -> Result<(Package, Package)> { Ok((parse_package(a)?, parse_package(b)?)) };
        let features = self
            .features
            .as_ref()
            .map(|m| {
                m.iter()
                    .map(|(p, fs)| Ok((parse_package(p)?, fs.iter().cloned().collect::<FeatureSet>())))
                    .collect::<Result<FeatureResolution>>()
            })
            .transpose()?;
        let parents = self
            .parents
            .as_ref()
            .map(|v| v.iter().map(pair).collect::<Result<ParentRelation>>())
            .transpose()?;
        let providers = self
            .providers
            .as_ref()
            .map(|v| v.iter().map(pair).collect::<Result<ProviderRelation>>())
            .transpose()?;
        let assignment = self
            .assignment
            .as_ref()
            .map(|a| {
                let mut sigma = VarAssignment::new();
                for (g, c) in &a.globals {
                    sigma.set_global(g, c);
                }
                for l in &a.locals {
                    sigma.set_local(&l.var, parse_package(&l.package)?, &l.value);
                }
                Ok::<_, Error>(sigma)
            })
            .transpose()?;
        Ok(ExtendedResolution { selected: self.selected()?, features, parents, providers, assignment })
    }
}

pub fn parse_resolution(text: &str) -> Result<ResolutionDocument> {
    serde_json::from_str(text).map_err(json_error)
}

pub fn emit_resolution(doc: &ResolutionDocument) -> Result<String> {
    to_text(doc)
}
