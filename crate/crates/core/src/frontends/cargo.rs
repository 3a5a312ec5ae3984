//! A subset of Cargo manifests, several to a document.
//!
//! A document is a sequence of manifests, each introduced by a comment line
//! `# <dir>/Cargo.toml`. Every manifest has `[package]` with `name` and
//! `version`, an optional `[dependencies]` table and an optional
//! `[features]` table. Text before the first manifest may set
//! `granularity`; it defaults to `major`.
//!
//! Requirements are comma-separated comparisons: `=v`, `>=v`, `>v`, `<=v`,
//! `<v`, `^v`, `~v`, a bare `v` (caret) or `*`. Feature entries are
//! `dep:X`, `X/f`, or the name of another feature of the same package.

use std::collections::{BTreeMap, BTreeSet};

use toml::{Table, Value};

use crate::calculus::{Dependency, Repository};
use crate::error::{Error, Result};
use crate::ext::concurrent::Granularity;
use crate::ext::features::{AdditionalDependency, FeatureDependency};
use crate::name::{Package, PackageName, Version, VersionSet};
use crate::pipeline::{ExtendedInstance, FeatureSpec};
use crate::text::{parse_name, parse_version};
use crate::versions::{eval_formula, CmpOp, FormulaDependency, VersionFormula};

use super::json::{granularity_text, parse_granularity};
use super::{conjuncts, emits_package, emitted_root, find_root, shape, Dialect, SetShape};

fn header(line: &str) -> bool {
    let line = line.trim();
    line.starts_with('#') && line.ends_with("/Cargo.toml")
}

/// Byte ranges of the preamble and each manifest.
fn chunks(src: &str) -> (std::ops::Range<usize>, Vec<std::ops::Range<usize>>) {
    let mut starts = Vec::new();
    let mut offset = 0;
    for line in src.split_inclusive('\n') {
        if header(line) {
            starts.push(offset);
        }
        offset += line.len();
    }
    if starts.is_empty() {
        return (0..0, vec![0..src.len()]);
    }
    let preamble = 0..starts[0];
    let mut ends: Vec<usize> = starts[1..].to_vec();
    ends.push(src.len());
    (preamble, starts.into_iter().zip(ends).map(|(s, e)| s..e).collect())
}

fn toml_error(src: &str, base: usize, e: toml::de::Error) -> Error {
    let at = e.span().map_or(base, |s| base + s.start);
    Error::parse_at(src, at, e.message().to_string())
}

fn parse_table(src: &str, range: std::ops::Range<usize>) -> Result<Table> {
    src[range.clone()].parse::<Table>().map_err(|e| toml_error(src, range.start, e))
}

fn expect_str<'a>(v: &'a Value, what: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| Error::invalid(format!("{what} must be a string")))
}

fn expect_strings(v: &Value, what: &str) -> Result<Vec<String>> {
    v.as_array()
        .ok_or_else(|| Error::invalid(format!("{what} must be an array of strings")))?
        .iter()
        .map(|s| expect_str(s, what).map(str::to_string))
        .collect()
}

/// The comparisons selecting `req`, numeric bound arithmetic included.
fn comparator(text: &str) -> Result<VersionFormula> {
    let text = text.trim();
    if text == "*" {
        return Ok(VersionFormula::Top);
    }
    for (sym, op) in [(">=", CmpOp::Ge), ("<=", CmpOp::Le), (">", CmpOp::Gt), ("<", CmpOp::Lt), ("=", CmpOp::Eq)] {
        if let Some(v) = text.strip_prefix(sym) {
            return Ok(VersionFormula::Cmp(op, parse_version(v.trim())?));
        }
    }
    let (tilde, v) = match (text.strip_prefix('~'), text.strip_prefix('^')) {
        (Some(v), _) => (true, v),
        (_, Some(v)) => (false, v),
        _ => (false, text),
    };
    let v = parse_version(v.trim())?;
    let segs = v
        .as_numeric()
        .ok_or_else(|| Error::invalid(format!("{text}: ranges need numeric versions")))?
        .segments()
        .to_vec();
    // Index of the segment that is bumped for the exclusive upper bound.
    let bump = if tilde {
        segs.len().min(2) - 1
    } else {
        segs.iter().position(|s| *s != 0).unwrap_or(segs.len() - 1)
    };
    let mut upper: Vec<u64> = segs[..=bump].to_vec();
    upper[bump] += 1;
    let upper: Vec<String> = upper.iter().map(u64::to_string).collect();
    Ok(VersionFormula::Cmp(CmpOp::Ge, v).and(VersionFormula::Cmp(CmpOp::Lt, parse_version(&upper.join("."))?)))
}

pub fn parse_requirement(text: &str) -> Result<VersionFormula> {
    let parts: Vec<VersionFormula> = text.split(',').map(comparator).collect::<Result<_>>()?;
    Ok(parts.into_iter().reduce(VersionFormula::and).expect("split yields one part"))
}

#[derive(Clone, Debug)]
struct DepEntry {
    on: PackageName,
    req: VersionFormula,
    features: Vec<String>,
    optional: bool,
}

struct Manifest {
    package: Package,
    deps: Vec<DepEntry>,
    features: BTreeMap<String, Vec<String>>,
}

fn manifest(table: Table) -> Result<Manifest> {
    let mut package = None;
    let mut deps = Vec::new();
    let mut features = BTreeMap::new();
    for (key, value) in table {
        match key.as_str() {
            "package" => {
                let t = value.as_table().ok_or_else(|| Error::invalid("[package] must be a table"))?;
                let mut name = None;
                let mut version = None;
                for (k, v) in t {
                    match k.as_str() {
                        "name" => name = Some(parse_name(expect_str(v, "package.name")?)?),
                        "version" => version = Some(parse_version(expect_str(v, "package.version")?)?),
                        other => return Err(Error::invalid(format!("unsupported package key `{other}`"))),
                    }
                }
                match (name, version) {
                    (Some(n), Some(v)) => package = Some(Package::new(n, v)),
                    _ => return Err(Error::invalid("[package] needs both name and version")),
                }
            }
            "dependencies" => {
                let t = value.as_table().ok_or_else(|| Error::invalid("[dependencies] must be a table"))?;
                for (name, spec) in t {
                    let on = parse_name(name)?;
                    let entry = match spec {
                        Value::String(req) => DepEntry { on, req: parse_requirement(req)?, features: Vec::new(), optional: false },
                        Value::Table(t) => {
                            let mut entry = DepEntry { on, req: VersionFormula::Top, features: Vec::new(), optional: false };
                            for (k, v) in t {
                                match k.as_str() {
                                    "version" => entry.req = parse_requirement(expect_str(v, "version")?)?,
                                    "features" => entry.features = expect_strings(v, "features")?,
                                    "optional" => {
                                        entry.optional = v.as_bool().ok_or_else(|| Error::invalid("optional must be a boolean"))?
                                    }
                                    other => return Err(Error::invalid(format!("unsupported dependency key `{other}`"))),
                                }
                            }
                            entry
                        }
                        _ => return Err(Error::invalid(format!("dependency {name} must be a string or a table"))),
                    };
                    deps.push(entry);
                }
            }
            "features" => {
                let t = value.as_table().ok_or_else(|| Error::invalid("[features] must be a table"))?;
                for (f, entries) in t {
                    crate::name::check_label("feature", f)?;
                    features.insert(f.clone(), expect_strings(entries, "feature entries")?);
                }
            }
            other => return Err(Error::invalid(format!("unsupported manifest section `{other}`"))),
        }
    }
    let package = package.ok_or_else(|| Error::invalid("manifest without [package]"))?;
    Ok(Manifest { package, deps, features })
}

/// Explicit set or, for numeric constants, the formula itself.
fn resolve_req(req: &VersionFormula, on: &PackageName, repo: &Repository) -> Result<std::result::Result<VersionFormula, VersionSet>> {
    if req.check().is_ok() {
        return Ok(Ok(req.clone()));
    }
    match conjuncts(req) {
        Some(cmps) if cmps.iter().all(|(op, _)| *op == CmpOp::Eq) => Ok(Err(eval_formula(req, on, repo))),
        _ => Err(Error::invalid(format!("{on}: only `=` applies to non-numeric versions"))),
    }
}

pub fn parse_cargotoml(src: &str) -> Result<ExtendedInstance> {
    let (preamble, ranges) = chunks(src);
    let mut granularity = Granularity::Major;
    for (k, v) in parse_table(src, preamble)? {
        match k.as_str() {
            "granularity" => granularity = parse_granularity(expect_str(&v, "granularity")?)?,
            other => return Err(Error::invalid(format!("unsupported top-level key `{other}`"))),
        }
    }
    let mut manifests = Vec::new();
    let mut repo = Repository::new();
    for range in ranges {
        let start = range.start;
        let m = manifest(parse_table(src, range)?).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::parse_at(src, start, msg),
            other => other,
        })?;
        if !repo.insert(m.package.clone()) {
            return Err(Error::parse_at(src, start, format!("{} is declared twice", m.package)));
        }
        manifests.push(m);
    }
    let root = find_root(&mut repo)?;
    let mut inst = ExtendedInstance::new(repo, root);
    inst.granularity = Some(granularity);
    let mut spec = FeatureSpec::default();
    for m in &manifests {
        let p = &m.package;
        let by_name: BTreeMap<&PackageName, &DepEntry> = m.deps.iter().map(|d| (&d.on, d)).collect();
        for d in m.deps.iter().filter(|d| !d.optional) {
            let req = resolve_req(&d.req, &d.on, &inst.repo)?;
            if d.features.is_empty() {
                match req {
                    Ok(phi) => inst.version_formulae.push(FormulaDependency::new(p.clone(), d.on.clone(), phi)),
                    Err(vs) => inst.deps.push(Dependency::new(p.clone(), d.on.clone(), vs)),
                }
            } else {
                let fs: Vec<&str> = d.features.iter().map(String::as_str).collect();
                let vs = match req {
                    Ok(phi) => eval_formula(&phi, &d.on, &inst.repo),
                    Err(vs) => vs,
                };
                spec.fdeps.push(FeatureDependency::new(p.clone(), d.on.clone(), vs, &fs));
            }
        }
        let mut referenced = BTreeSet::new();
        for (f, entries) in &m.features {
            spec.support.push((p.clone(), f.clone()));
            // Target name -> required features, merged across entries.
            let mut targets: BTreeMap<PackageName, BTreeSet<String>> = BTreeMap::new();
            for e in entries {
                if let Some(dep) = e.strip_prefix("dep:") {
                    let on = parse_name(dep)?;
                    referenced.insert(on.clone());
                    targets.entry(on).or_default();
                } else if let Some((dep, feat)) = e.split_once('/') {
                    let on = parse_name(dep.trim_end_matches('?'))?;
                    referenced.insert(on.clone());
                    targets.entry(on).or_default().insert(feat.to_string());
                } else {
                    if !m.features.contains_key(e) {
                        return Err(Error::invalid(format!("feature {f} of {p} enables unknown feature {e}")));
                    }
                    targets.entry(p.name.clone()).or_default().insert(e.clone());
                }
            }
            for (on, mut fs) in targets {
                let vs = if on == p.name {
                    VersionSet::from([p.version.clone()])
                } else {
                    let d = by_name
                        .get(&on)
                        .ok_or_else(|| Error::invalid(format!("feature {f} of {p} names undeclared dependency {on}")))?;
                    fs.extend(d.features.iter().cloned());
                    match resolve_req(&d.req, &on, &inst.repo)? {
                        Ok(phi) => eval_formula(&phi, &on, &inst.repo),
                        Err(vs) => vs,
                    }
                };
                let fs: Vec<&str> = fs.iter().map(String::as_str).collect();
                spec.adeps.push(AdditionalDependency::new(p.clone(), f, on, vs, &fs));
            }
        }
        // An optional dependency no feature mentions gets a feature of its own name.
        for d in m.deps.iter().filter(|d| d.optional && !referenced.contains(&d.on)) {
            let PackageName::Atom(f) = &d.on else {
                return Err(Error::invalid(format!("optional dependency {} needs a feature naming it", d.on)));
            };
            spec.support.push((p.clone(), f.clone()));
            let vs = match resolve_req(&d.req, &d.on, &inst.repo)? {
                Ok(phi) => eval_formula(&phi, &d.on, &inst.repo),
                Err(vs) => vs,
            };
            let fs: Vec<&str> = d.features.iter().map(String::as_str).collect();
            spec.adeps.push(AdditionalDependency::new(p.clone(), f, d.on.clone(), vs, &fs));
        }
    }
    if !spec.support.is_empty() || !spec.fdeps.is_empty() {
        inst.features = Some(spec);
    }
    inst.canonicalize();
    Ok(inst)
}

/// A requirement string selecting exactly `set` among `all`.
fn set_requirement(on: &PackageName, set: &VersionSet, all: &VersionSet) -> Result<String> {
    let show = |cmps: &[(CmpOp, Version)]| {
        cmps.iter().map(|(op, v)| format!("{op}{v}")).collect::<Vec<_>>().join(", ")
    };
    match shape(set, all) {
        SetShape::All => Ok("*".into()),
        SetShape::Exact(v) => Ok(format!("={v}")),
        SetShape::Range(cmps) => Ok(show(&cmps)),
        SetShape::Scattered(vs) => Err(Error::Emit(format!(
            "{on}: the versions {} form no single Cargo requirement",
            crate::name::DisplaySet(&vs.into_iter().collect())
        ))),
    }
}

fn formula_requirement(d: &FormulaDependency, repo: &Repository) -> Result<String> {
    match conjuncts(&d.formula).filter(|c| c.iter().all(|(op, _)| *op != CmpOp::Ne)) {
        Some(cmps) if cmps.is_empty() => Ok("*".into()),
        Some(cmps) => Ok(cmps.iter().map(|(op, v)| format!("{op}{v}")).collect::<Vec<_>>().join(", ")),
        None => set_requirement(&d.on, &eval_formula(&d.formula, &d.on, repo), repo.versions(&d.on)),
    }
}

fn reject_unsupported(inst: &ExtendedInstance) -> Result<()> {
    if let Some(t) = inst.uses().into_iter().find(|t| !Dialect::Cargo.supports(*t)) {
        return Err(Error::Emit(format!("cargo documents cannot express {t}")));
    }
    Ok(())
}

fn insert_dep(deps: &mut Table, on: &PackageName, value: Value) -> Result<()> {
    if deps.insert(on.to_string(), value).is_some() {
        return Err(Error::Emit(format!("two dependencies on {on} cannot share one manifest")));
    }
    Ok(())
}

pub fn emit_cargotoml(inst: &ExtendedInstance) -> Result<String> {
    reject_unsupported(inst)?;
    emitted_root(inst, Dialect::Cargo)?;
    let repo = &inst.repo;
    let mut out = String::new();
    let g = inst.granularity.clone().unwrap_or(Granularity::Constant);
    if g != Granularity::Major {
        out.push_str(&format!("granularity = {}\n\n", Value::String(granularity_text(&g))));
    }
    let spec = inst.features.clone().unwrap_or_default();
    let mut manifests = Vec::new();
    for p in repo.packages().filter(|p| emits_package(inst, p)) {
        let mut deps = Table::new();
        // Plain and formula dependencies on one name are merged by intersection.
        let mut plain: BTreeMap<&PackageName, Vec<String>> = BTreeMap::new();
        let mut sets: BTreeMap<&PackageName, VersionSet> = BTreeMap::new();
        for d in inst.version_formulae.iter().filter(|d| d.from == p) {
            plain.entry(&d.on).or_default().push(formula_requirement(d, repo)?);
            let s = eval_formula(&d.formula, &d.on, repo);
            sets.entry(&d.on).and_modify(|acc| acc.retain(|v| s.contains(v))).or_insert(s);
        }
        for d in inst.deps.iter().filter(|d| d.from == p) {
            plain.entry(&d.on).or_default().push(set_requirement(&d.on, &d.versions, repo.versions(&d.on))?);
            sets.entry(&d.on).and_modify(|acc| acc.retain(|v| d.versions.contains(v))).or_insert(d.versions.clone());
        }
        for (on, reqs) in plain {
            let req = match reqs.as_slice() {
                [one] => one.clone(),
                _ => set_requirement(on, &sets[on], repo.versions(on))?,
            };
            insert_dep(&mut deps, on, Value::String(req))?;
        }
        for d in spec.fdeps.iter().filter(|d| d.from == p) {
            let mut t = Table::new();
            t.insert("version".into(), Value::String(set_requirement(&d.on, &d.versions, repo.versions(&d.on))?));
            if !d.features.is_empty() {
                t.insert("features".into(), Value::Array(d.features.iter().cloned().map(Value::String).collect()));
            }
            insert_dep(&mut deps, &d.on, Value::Table(t))?;
        }
        let mut features = Table::new();
        for (_, f) in spec.support.iter().filter(|(q, _)| *q == p) {
            features.insert(f.clone(), Value::Array(Vec::new()));
        }
        for a in spec.adeps.iter().filter(|a| a.from == p) {
            let d = &a.dep;
            let mut entries: Vec<String> = Vec::new();
            if d.on == p.name && d.versions == VersionSet::from([p.version.clone()]) && !d.features.is_empty() {
                entries.extend(d.features.iter().cloned());
            } else {
                let mut t = Table::new();
                t.insert("version".into(), Value::String(set_requirement(&d.on, &d.versions, repo.versions(&d.on))?));
                t.insert("optional".into(), Value::Boolean(true));
                insert_dep(&mut deps, &d.on, Value::Table(t))?;
                entries.push(format!("dep:{}", d.on));
                entries.extend(d.features.iter().map(|g| format!("{}/{g}", d.on)));
            }
            let slot = features.entry(a.feature.clone()).or_insert_with(|| Value::Array(Vec::new()));
            if let Value::Array(items) = slot {
                items.extend(entries.into_iter().map(Value::String));
            }
        }
        let mut package = Table::new();
        package.insert("name".into(), Value::String(p.name.to_string()));
        package.insert("version".into(), Value::String(p.version.to_string()));
        let mut doc = Table::new();
        doc.insert("package".into(), Value::Table(package));
        if !deps.is_empty() {
            doc.insert("dependencies".into(), Value::Table(deps));
        }
        if !features.is_empty() {
            doc.insert("features".into(), Value::Table(features));
        }
        let body = toml::to_string(&doc).map_err(|e| Error::Emit(e.to_string()))?;
        let dir = match &p.name {
            PackageName::Atom(n) => format!("{n}-{}", p.version),
            PackageName::Root => "<root>".to_string(),
            _ => "synthetic".to_string(),
        };
        manifests.push(format!("# {dir}/Cargo.toml\n{body}"));
    }
    out.push_str(&manifests.join("\n"));
    Ok(out)
}
