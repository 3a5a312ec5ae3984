//! A subset of Debian control files.
//!
//! Paragraphs carry `Package`, `Version` (required), and optionally
//! `Depends`, `Conflicts` and `Provides`. Relations use the operators
//! `=`, `>=`, `<=`, `<<` and `>>`; `|` separates alternatives. Clauses on
//! the same name within one `Depends` field are conjoined, and a clause
//! with alternatives becomes a package formula. An unversioned `Provides`
//! entry provides every version.

use std::collections::BTreeMap;

use crate::calculus::{Dependency, Repository};
use crate::error::{Error, Result};
use crate::ext::conflicts::Conflict;
use crate::ext::formulae::{FormulaDep, PackageFormula};
use crate::ext::provides::Provides;
use crate::name::{Package, PackageName, Version, VersionSet};
use crate::pipeline::ExtendedInstance;
use crate::text::Parser;
use crate::versions::{eval_formula, CmpOp, FormulaDependency, VersionFormula};

use super::{conjuncts, conjunction, emits_package, emitted_root, find_root, shape, Dialect, SetShape};

type Cmp = (CmpOp, Version);

#[derive(Clone, Debug)]
struct Alt {
    name: PackageName,
    cmp: Option<Cmp>,
    pos: usize,
}

#[derive(Debug, Default)]
struct Paragraph {
    package: Option<(PackageName, usize)>,
    version: Option<Version>,
    depends: Vec<Vec<Alt>>,
    conflicts: Vec<Vec<Alt>>,
    provides: Vec<Vec<Alt>>,
}

const OPERATORS: [(&str, CmpOp); 5] =
    [(">=", CmpOp::Ge), ("<=", CmpOp::Le), ("<<", CmpOp::Lt), (">>", CmpOp::Gt), ("=", CmpOp::Eq)];

fn op_symbol(op: CmpOp) -> Option<&'static str> {
    OPERATORS.iter().find(|(_, o)| *o == op).map(|(s, _)| *s)
}

/// Parses the relation list in `src[start..end]`.
fn relations(src: &str, start: usize, end: usize) -> Result<Vec<Vec<Alt>>> {
    let field = &src[..end];
    let mut p = Parser::at(field, start);
    let mut clauses = Vec::new();
    p.skip_ws();
    if p.pos() == end {
        return Ok(clauses);
    }
    let mut clause = Vec::new();
    loop {
        p.skip_ws();
        let pos = p.pos();
        let name = p.name()?;
        p.skip_ws();
        let cmp = if p.eat("(") {
            p.skip_ws();
            let op = OPERATORS
                .iter()
                .find(|(s, _)| p.eat(s))
                .map(|(_, op)| *op)
                .ok_or_else(|| p.error("expected one of =, >=, <=, <<, >>"))?;
            p.skip_ws();
            let v = p.version()?;
            p.skip_ws();
            if !p.eat(")") {
                return Err(p.error("expected `)`"));
            }
            Some((op, v))
        } else {
            None
        };
        clause.push(Alt { name, cmp, pos });
        p.skip_ws();
        if p.eat("|") {
            continue;
        }
        clauses.push(std::mem::take(&mut clause));
        if p.pos() == end {
            return Ok(clauses);
        }
        if !p.eat(",") {
            return Err(p.error("expected `,`, `|` or the end of the field"));
        }
    }
}

fn paragraphs(src: &str) -> Result<Vec<Paragraph>> {
    let mut out = Vec::new();
    let mut current: Option<Paragraph> = None;
    // (field name, line start, value start, value end)
    let mut fields: Vec<(&str, usize, usize, usize)> = Vec::new();
    let mut flush = |fields: &mut Vec<(&str, usize, usize, usize)>, current: &mut Option<Paragraph>| -> Result<()> {
        let Some(mut para) = current.take() else { return Ok(()) };
        let first = fields.first().map_or(0, |f| f.1);
        for (name, at, start, end) in fields.drain(..) {
            let value = src[start..end].trim();
            match name {
                "Package" => para.package = Some((crate::text::parse_name(value).map_err(|_| Error::parse_at(src, start, "bad package name"))?, at)),
                "Version" => para.version = Some(crate::text::parse_version(value).map_err(|_| Error::parse_at(src, start, "bad version"))?),
                "Depends" => para.depends = relations(src, start, end)?,
                "Conflicts" => para.conflicts = relations(src, start, end)?,
                "Provides" => para.provides = relations(src, start, end)?,
                other => return Err(Error::parse_at(src, at, format!("unsupported field `{other}`"))),
            }
        }
        if para.package.is_none() {
            return Err(Error::parse_at(src, first, "paragraph without a Package field"));
        }
        out.push(para);
        Ok(())
    };
    let mut offset = 0;
    for line in src.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let body = line.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() {
            flush(&mut fields, &mut current)?;
            continue;
        }
        if body.starts_with('#') {
            continue;
        }
        if body.starts_with([' ', '\t']) {
            let Some(last) = fields.last_mut() else {
                return Err(Error::parse_at(src, start, "continuation line outside a field"));
            };
            last.3 = start + body.len();
            continue;
        }
        let colon = body.find(':').ok_or_else(|| Error::parse_at(src, start, "expected `Field: value`"))?;
        let name = &body[..colon];
        if fields.iter().any(|f| f.0 == name) {
            return Err(Error::parse_at(src, start, format!("duplicate field `{name}`")));
        }
        current.get_or_insert_with(Paragraph::default);
        fields.push((name, start, start + colon + 1, start + body.len()));
    }
    flush(&mut fields, &mut current)?;
    Ok(out)
}

fn eval(cmp: &Option<Cmp>, name: &PackageName, repo: &Repository) -> VersionSet {
    match cmp {
        None => repo.versions(name).clone(),
        Some((op, v)) => eval_formula(&VersionFormula::Cmp(*op, v.clone()), name, repo),
    }
}

pub fn parse_debctl(src: &str) -> Result<ExtendedInstance> {
    let paras = paragraphs(src)?;
    if paras.is_empty() {
        return Err(Error::parse_at(src, 0, "no paragraphs"));
    }
    let mut repo = Repository::new();
    let mut owners = Vec::new();
    for para in &paras {
        let (name, at) = para.package.clone().expect("checked");
        let version = para
            .version
            .clone()
            .ok_or_else(|| Error::parse_at(src, at, format!("package {name} has no Version field")))?;
        let p = Package::new(name, version);
        if !repo.insert(p.clone()) {
            return Err(Error::parse_at(src, at, format!("{p} is declared twice")));
        }
        owners.push(p);
    }
    let root = find_root(&mut repo)?;
    let mut inst = ExtendedInstance::new(repo, root);
    for (para, p) in paras.iter().zip(&owners) {
        let mut merged: BTreeMap<PackageName, Vec<&Alt>> = BTreeMap::new();
        for clause in &para.depends {
            match clause.as_slice() {
                [alt] => merged.entry(alt.name.clone()).or_default().push(alt),
                alts => {
                    let atoms = alts.iter().map(|a| PackageFormula::dep(a.name.clone(), eval(&a.cmp, &a.name, &inst.repo)));
                    let psi = atoms.reduce(PackageFormula::or).expect("a clause has alternatives");
                    inst.formulae.push(FormulaDep::new(p.clone(), psi));
                }
            }
        }
        for (name, alts) in merged {
            let cmps: Vec<Cmp> = alts.iter().filter_map(|a| a.cmp.clone()).collect();
            if cmps.iter().all(|(_, v)| v.as_numeric().is_some()) {
                inst.version_formulae.push(FormulaDependency::new(p.clone(), name, conjunction(cmps)));
            } else {
                let mut set = inst.repo.versions(&name).clone();
                for a in alts {
                    if matches!(&a.cmp, Some((op, v)) if *op != CmpOp::Eq && v.as_numeric().is_none()) {
                        return Err(Error::parse_at(src, a.pos, "only `=` applies to non-numeric versions"));
                    }
                    let s = eval(&a.cmp, &name, &inst.repo);
                    set.retain(|v| s.contains(v));
                }
                inst.deps.push(Dependency::new(p.clone(), name, set));
            }
        }
        for clause in &para.conflicts {
            let [alt] = clause.as_slice() else {
                return Err(Error::parse_at(src, clause[0].pos, "alternatives are not allowed in Conflicts"));
            };
            inst.conflicts.push(Conflict::new(p.clone(), alt.name.clone(), eval(&alt.cmp, &alt.name, &inst.repo)));
        }
        for clause in &para.provides {
            let [alt] = clause.as_slice() else {
                return Err(Error::parse_at(src, clause[0].pos, "alternatives are not allowed in Provides"));
            };
            let version = match &alt.cmp {
                None => Version::Wildcard,
                Some((CmpOp::Eq, v)) => v.clone(),
                Some(_) => return Err(Error::parse_at(src, alt.pos, "Provides accepts only `=`")),
            };
            inst.provides.push(Provides::new(p.clone(), alt.name.clone(), version));
        }
    }
    inst.canonicalize();
    Ok(inst)
}

fn relation(name: &PackageName, cmp: Option<&Cmp>) -> String {
    match cmp {
        None => name.to_string(),
        Some((op, v)) => format!("{name} ({} {v})", op_symbol(*op).expect("debian operator")),
    }
}

/// Alternatives that together select exactly `set`, or `None` for the empty set.
fn alternatives(name: &PackageName, set: &VersionSet, all: &VersionSet) -> Option<Vec<String>> {
    let set: VersionSet = set.intersection(all).cloned().collect();
    if set.is_empty() && !all.is_empty() {
        return None;
    }
    Some(match shape(&set, all) {
        SetShape::All => vec![relation(name, None)],
        SetShape::Exact(v) => vec![relation(name, Some(&(CmpOp::Eq, v)))],
        SetShape::Range(c) if c.len() == 1 => vec![relation(name, Some(&c[0]))],
        _ => set.into_iter().map(|v| relation(name, Some(&(CmpOp::Eq, v)))).collect(),
    })
}

/// Clauses whose conjunction selects exactly `set`.
fn set_clauses(name: &PackageName, set: &VersionSet, all: &VersionSet) -> Vec<String> {
    match shape(set, all) {
        SetShape::All => vec![relation(name, None)],
        SetShape::Exact(v) => vec![relation(name, Some(&(CmpOp::Eq, v)))],
        SetShape::Range(cmps) => cmps.iter().map(|c| relation(name, Some(c))).collect(),
        SetShape::Scattered(vs) => {
            vec![vs.into_iter().map(|v| relation(name, Some(&(CmpOp::Eq, v)))).collect::<Vec<_>>().join(" | ")]
        }
    }
}

fn flatten_and<'a>(psi: &'a PackageFormula, out: &mut Vec<&'a PackageFormula>) {
    match psi {
        PackageFormula::And(l, r) => {
            flatten_and(l, out);
            flatten_and(r, out);
        }
        other => out.push(other),
    }
}

fn flatten_or<'a>(psi: &'a PackageFormula, out: &mut Vec<&'a PackageFormula>) {
    match psi {
        PackageFormula::Or(l, r) => {
            flatten_or(l, out);
            flatten_or(r, out);
        }
        other => out.push(other),
    }
}

fn formula_clauses(d: &FormulaDep, repo: &Repository) -> Result<Vec<String>> {
    let mut conjuncts = Vec::new();
    flatten_and(&d.formula, &mut conjuncts);
    let mut out = Vec::new();
    for c in conjuncts {
        let mut atoms = Vec::new();
        flatten_or(c, &mut atoms);
        let mut alts = Vec::new();
        for a in atoms {
            let PackageFormula::Dep { on, versions } = a else {
                return Err(Error::Emit(format!("{}: only disjunctions of packages fit a Depends field", d.formula)));
            };
            alts.extend(alternatives(on, versions, repo.versions(on)).into_iter().flatten());
        }
        if alts.is_empty() {
            return Err(Error::Emit(format!("{}: an unsatisfiable clause has no Debian spelling", d.formula)));
        }
        out.push(alts.join(" | "));
    }
    Ok(out)
}

fn reject_unsupported(inst: &ExtendedInstance) -> Result<()> {
    let tags = inst.uses();
    if let Some(t) = tags.into_iter().find(|t| !Dialect::Debian.supports(*t)) {
        return Err(Error::Emit(format!("debian documents cannot express {t}")));
    }
    Ok(())
}

fn clause_name(clause: &str) -> &str {
    clause.split([' ', ',']).next().unwrap_or(clause)
}

pub fn emit_debctl(inst: &ExtendedInstance) -> Result<String> {
    reject_unsupported(inst)?;
    emitted_root(inst, Dialect::Debian)?;
    let repo = &inst.repo;
    let mut paras = Vec::new();
    for p in repo.packages().filter(|p| emits_package(inst, p)) {
        let mut depends = Vec::new();
        for d in inst.version_formulae.iter().filter(|d| d.from == p) {
            match conjuncts(&d.formula).filter(|c| c.iter().all(|(op, _)| op_symbol(*op).is_some())) {
                Some(cmps) if cmps.is_empty() => depends.push(relation(&d.on, None)),
                Some(cmps) => depends.extend(cmps.iter().map(|c| relation(&d.on, Some(c)))),
                None => depends.extend(set_clauses(&d.on, &eval_formula(&d.formula, &d.on, repo), repo.versions(&d.on))),
            }
        }
        for d in inst.deps.iter().filter(|d| d.from == p) {
            depends.extend(set_clauses(&d.on, &d.versions, repo.versions(&d.on)));
        }
        for d in inst.formulae.iter().filter(|d| d.from == p) {
            depends.extend(formula_clauses(d, repo)?);
        }
        let mut conflicts = Vec::new();
        for c in inst.conflicts.iter().filter(|c| c.from == p) {
            conflicts.extend(alternatives(&c.on, &c.versions, repo.versions(&c.on)).into_iter().flatten());
        }
        let provides: Vec<String> = inst
            .provides
            .iter()
            .filter(|t| t.provider == p)
            .map(|t| match &t.version {
                Version::Wildcard => relation(&t.name, None),
                v => relation(&t.name, Some(&(CmpOp::Eq, v.clone()))),
            })
            .collect();
        // Parsing may move a clause between relations, so clauses are emitted
        // grouped by target name, keeping their order within a name.
        for items in [&mut depends, &mut conflicts] {
            items.sort_by(|a, b| clause_name(a).cmp(clause_name(b)));
            items.dedup();
        }
        let mut text = format!("Package: {}\nVersion: {}\n", p.name, p.version);
        for (field, items) in [("Depends", depends), ("Conflicts", conflicts), ("Provides", provides)] {
            if !items.is_empty() {
                text.push_str(&format!("{field}: {}\n", items.join(", ")));
            }
        }
        paras.push(text);
    }
    Ok(paras.join("\n"))
}
