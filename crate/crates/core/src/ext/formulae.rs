//! Formula dependencies: a package may depend on a boolean combination of
//! version-set atoms and, optionally, comparisons on global and per-package
//! variables.
//!
//! Lowering first pushes negations down to atoms. Each disjunction becomes
//! a node package with versions `#0` (left) and `#1` (right), whose two
//! versions carry the encodings of the two sides. A negated atom uses a
//! conflict guard. A variable becomes a package whose versions are its
//! values, and a comparison becomes a dependency on the values satisfying it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::calculus::{
    check_root, check_subset, check_uniqueness, validate_resolution, CoreInstance, Dependency,
    Repository, Resolution,
};
use crate::error::{Error, Result};
use crate::name::{check_label, DisplaySet, FormulaNodeId, Package, PackageName, Version, VersionSet};
use crate::report::{Rule, ValidityReport};
use crate::versions::CmpOp;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PackageFormula {
    Dep { on: PackageName, versions: VersionSet },
    And(Box<PackageFormula>, Box<PackageFormula>),
    Or(Box<PackageFormula>, Box<PackageFormula>),
    Not(Box<PackageFormula>),
    Global { var: String, op: CmpOp, value: String },
    Local { var: String, op: CmpOp, value: String },
}

impl PackageFormula {
    pub fn dep(on: PackageName, versions: VersionSet) -> Self {
        PackageFormula::Dep { on, versions }
    }

    pub fn and(self, rhs: PackageFormula) -> Self {
        PackageFormula::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: PackageFormula) -> Self {
        PackageFormula::Or(Box::new(self), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        PackageFormula::Not(Box::new(self))
    }

    pub fn global(var: &str, op: CmpOp, value: &str) -> Self {
        PackageFormula::Global { var: var.to_string(), op, value: value.to_string() }
    }

    pub fn local(var: &str, op: CmpOp, value: &str) -> Self {
        PackageFormula::Local { var: var.to_string(), op, value: value.to_string() }
    }

    /// Negation pushed to the atoms. Negated comparisons flip their operator;
    /// the only remaining `Not`s wrap `Dep` atoms.
    pub fn nnf(&self) -> PackageFormula {
        self.nnf_with(false)
    }

    fn nnf_with(&self, negate: bool) -> PackageFormula {
        use PackageFormula::*;
        match (self, negate) {
            (Dep { .. }, false) => self.clone(),
            (Dep { .. }, true) => Not(Box::new(self.clone())),
            (Not(inner), _) => inner.nnf_with(!negate),
            (And(l, r), false) => And(Box::new(l.nnf_with(false)), Box::new(r.nnf_with(false))),
            (And(l, r), true) => Or(Box::new(l.nnf_with(true)), Box::new(r.nnf_with(true))),
            (Or(l, r), false) => Or(Box::new(l.nnf_with(false)), Box::new(r.nnf_with(false))),
            (Or(l, r), true) => And(Box::new(l.nnf_with(true)), Box::new(r.nnf_with(true))),
            (Global { var, op, value }, n) => Global {
                var: var.clone(),
                op: if n { op.complement() } else { *op },
                value: value.clone(),
            },
            (Local { var, op, value }, n) => Local {
                var: var.clone(),
                op: if n { op.complement() } else { *op },
                value: value.clone(),
            },
        }
    }

    fn walk<'a>(&'a self, out: &mut Vec<&'a PackageFormula>) {
        out.push(self);
        match self {
            PackageFormula::And(l, r) | PackageFormula::Or(l, r) => {
                l.walk(out);
                r.walk(out);
            }
            PackageFormula::Not(inner) => inner.walk(out),
            _ => {}
        }
    }

    /// Every subformula, this one first.
    pub fn subformulae(&self) -> Vec<&PackageFormula> {
        let mut out = Vec::new();
        self.walk(&mut out);
        out
    }

    pub fn mentions_variables(&self) -> bool {
        self.subformulae()
            .iter()
            .any(|f| matches!(f, PackageFormula::Global { .. } | PackageFormula::Local { .. }))
    }

    fn locals(&self) -> BTreeSet<&str> {
        self.subformulae()
            .into_iter()
            .filter_map(|f| match f {
                PackageFormula::Local { var, .. } => Some(var.as_str()),
                _ => None,
            })
            .collect()
    }
}

impl fmt::Display for PackageFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PackageFormula::Dep { on, versions } => write!(f, "{on}@{}", DisplaySet(versions)),
            PackageFormula::And(l, r) => write!(f, "({l} & {r})"),
            PackageFormula::Or(l, r) => write!(f, "({l} | {r})"),
            PackageFormula::Not(inner) => write!(f, "!{inner}"),
            PackageFormula::Global { var, op, value } => write!(f, "${var} {op} {value}"),
            PackageFormula::Local { var, op, value } => write!(f, "%{var} {op} {value}"),
        }
    }
}

/// Declared variables, each with its ordered domain of values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VariableDecl {
    globals: BTreeMap<String, Vec<String>>,
    locals: BTreeMap<String, Vec<String>>,
}

fn check_domain(var: &str, domain: &[String]) -> Result<()> {
    check_label("variable", var)?;
    if domain.is_empty() {
        return Err(Error::invalid(format!("variable {var} has an empty domain")));
    }
    let mut seen = BTreeSet::new();
    for c in domain {
        check_label("value", c)?;
        if !seen.insert(c) {
            return Err(Error::invalid(format!("variable {var} lists {c} twice")));
        }
    }
    Ok(())
}

impl VariableDecl {
    pub fn new(
        globals: impl IntoIterator<Item = (String, Vec<String>)>,
        locals: impl IntoIterator<Item = (String, Vec<String>)>,
    ) -> Result<Self> {
        let globals: BTreeMap<_, _> = globals.into_iter().collect();
        let locals: BTreeMap<_, _> = locals.into_iter().collect();
        for (var, domain) in globals.iter().chain(&locals) {
            check_domain(var, domain)?;
        }
        Ok(VariableDecl { globals, locals })
    }

    pub fn globals(&self) -> impl Iterator<Item = (&String, &Vec<String>)> {
        self.globals.iter()
    }

    pub fn locals(&self) -> impl Iterator<Item = (&String, &Vec<String>)> {
        self.locals.iter()
    }

    pub fn global_domain(&self, var: &str) -> Option<&[String]> {
        self.globals.get(var).map(Vec::as_slice)
    }

    pub fn local_domain(&self, var: &str) -> Option<&[String]> {
        self.locals.get(var).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.globals.is_empty() && self.locals.is_empty()
    }
}

fn position(domain: &[String], value: &str) -> Option<usize> {
    domain.iter().position(|c| c == value)
}

/// The domain values `c'` with `c' op c` under the domain order.
fn passing<'a>(domain: &'a [String], op: CmpOp, value: &str) -> Result<Vec<&'a String>> {
    let at = position(domain, value)
        .ok_or_else(|| Error::invalid(format!("{value} is not a declared value")))?;
    Ok(domain.iter().enumerate().filter(|(i, _)| op.holds(i.cmp(&at))).map(|(_, c)| c).collect())
}

/// Values for every global, and for locals of particular packages.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarAssignment {
    pub globals: BTreeMap<String, String>,
    pub locals: BTreeMap<(String, Package), String>,
}

impl VarAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_global(&mut self, var: &str, value: &str) {
        self.globals.insert(var.to_string(), value.to_string());
    }

    pub fn set_local(&mut self, var: &str, pkg: Package, value: &str) {
        self.locals.insert((var.to_string(), pkg), value.to_string());
    }

    pub fn is_empty(&self) -> bool {
        self.globals.is_empty() && self.locals.is_empty()
    }
}

impl fmt::Display for VarAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut items: Vec<String> = self.globals.iter().map(|(g, c)| format!("${g}={c}")).collect();
        items.extend(self.locals.iter().map(|((l, p), c)| format!("{p}%{l}={c}")));
        write!(f, "{{{}}}", items.join(", "))
    }
}

/// `from` depends on `formula`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FormulaDep {
    pub from: Package,
    pub formula: PackageFormula,
}

impl FormulaDep {
    pub fn new(from: Package, formula: PackageFormula) -> Self {
        FormulaDep { from, formula }
    }
}

impl fmt::Display for FormulaDep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.from, self.formula)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormulaInstance {
    repo: Repository,
    root: Package,
    deps: Vec<FormulaDep>,
    decl: VariableDecl,
}

impl FormulaInstance {
    /// Checks that dependers exist and every variable a formula mentions is
    /// declared with the compared value in its domain.
    pub fn new(
        repo: Repository,
        root: Package,
        deps: impl IntoIterator<Item = FormulaDep>,
        decl: Option<VariableDecl>,
    ) -> Result<Self> {
        let deps: Vec<FormulaDep> = deps.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let decl = decl.unwrap_or_default();
        check_subset(&repo, std::iter::once(&root).chain(deps.iter().map(|d| &d.from)))?;
        for d in &deps {
            for f in d.formula.subformulae() {
                let (domain, var, value) = match f {
                    PackageFormula::Global { var, value, .. } => (decl.global_domain(var), var, value),
                    PackageFormula::Local { var, value, .. } => (decl.local_domain(var), var, value),
                    _ => continue,
                };
                let domain = domain.ok_or_else(|| Error::invalid(format!("{d}: undeclared variable {var}")))?;
                if position(domain, value).is_none() {
                    return Err(Error::invalid(format!("{d}: {value} is not a value of {var}")));
                }
            }
        }
        Ok(FormulaInstance { repo, root, deps, decl })
    }

    /// Every core dependency becomes an atom.
    pub fn from_core(inst: &CoreInstance, extra: impl IntoIterator<Item = FormulaDep>, decl: Option<VariableDecl>) -> Result<Self> {
        let base = inst
            .deps()
            .iter()
            .map(|d| FormulaDep::new(d.from.clone(), PackageFormula::dep(d.on.clone(), d.versions.clone())));
        Self::new(inst.repo().clone(), inst.root().clone(), base.chain(extra), decl)
    }

    pub fn repo(&self) -> &Repository {
        &self.repo
    }

    pub fn root(&self) -> &Package {
        &self.root
    }

    pub fn deps(&self) -> &[FormulaDep] {
        &self.deps
    }

    pub fn decl(&self) -> &VariableDecl {
        &self.decl
    }

    fn deps_of<'a>(&'a self, p: &'a Package) -> impl Iterator<Item = &'a FormulaDep> {
        self.deps.iter().filter(move |d| d.from == *p)
    }

    /// The locals each package's formulae mention.
    fn local_uses(&self) -> BTreeSet<(String, Package)> {
        self.deps
            .iter()
            .flat_map(|d| d.formula.locals().into_iter().map(|l| (l.to_string(), d.from.clone())))
            .collect()
    }
}

impl fmt::Display for FormulaInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "root {}", self.root)?;
        for d in &self.deps {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Whether `s` (with `sigma` over `decl`) satisfies `psi` declared by `from`.
pub fn satisfies(
    s: &Resolution,
    sigma: &VarAssignment,
    decl: &VariableDecl,
    from: &Package,
    psi: &PackageFormula,
) -> Result<bool> {
    Ok(match psi {
        PackageFormula::Dep { on, versions } => s.versions_of(on).any(|v| versions.contains(v)),
        PackageFormula::And(l, r) => {
            satisfies(s, sigma, decl, from, l)? && satisfies(s, sigma, decl, from, r)?
        }
        PackageFormula::Or(l, r) => {
            satisfies(s, sigma, decl, from, l)? || satisfies(s, sigma, decl, from, r)?
        }
        PackageFormula::Not(inner) => !satisfies(s, sigma, decl, from, inner)?,
        PackageFormula::Global { var, op, value } => {
            let domain = decl.global_domain(var).ok_or_else(|| Error::invalid(format!("undeclared variable ${var}")))?;
            let assigned = sigma.globals.get(var).ok_or_else(|| Error::invalid(format!("${var} is unassigned")))?;
            compare(domain, assigned, *op, value)?
        }
        PackageFormula::Local { var, op, value } => {
            let domain = decl.local_domain(var).ok_or_else(|| Error::invalid(format!("undeclared variable %{var}")))?;
            let assigned = sigma
                .locals
                .get(&(var.clone(), from.clone()))
                .ok_or_else(|| Error::invalid(format!("%{var} of {from} is unassigned")))?;
            compare(domain, assigned, *op, value)?
        }
    })
}

fn compare(domain: &[String], assigned: &str, op: CmpOp, value: &str) -> Result<bool> {
    let a = position(domain, assigned).ok_or_else(|| Error::invalid(format!("{assigned} is not a declared value")))?;
    let b = position(domain, value).ok_or_else(|| Error::invalid(format!("{value} is not a declared value")))?;
    Ok(op.holds(a.cmp(&b)))
}

/// Root inclusion, formula closure and version uniqueness. With variables,
/// `sigma` must assign every global, and each local of every selected
/// package that mentions it, and nothing else.
pub fn validate_formula_resolution(
    inst: &FormulaInstance,
    s: &Resolution,
    sigma: &VarAssignment,
) -> Result<ValidityReport> {
    check_subset(&inst.repo, s)?;
    let mut report = ValidityReport::default();
    check_root(&mut report, &inst.root, s.contains(&inst.root));
    let mut complete = true;
    for (g, domain) in inst.decl.globals() {
        match sigma.globals.get(g) {
            Some(c) if position(domain, c).is_some() => {}
            other => {
                complete = false;
                report.push(Rule::Unwitnessed, vec![], format!("${g} has no declared value (got {other:?})"));
            }
        }
    }
    for g in sigma.globals.keys().filter(|g| inst.decl.global_domain(g).is_none()) {
        report.push(Rule::Unwitnessed, vec![], format!("${g} is not declared"));
    }
    let needed: BTreeSet<(String, Package)> =
        inst.local_uses().into_iter().filter(|(_, p)| s.contains(p)).collect();
    for key in &needed {
        let domain = inst.decl.local_domain(&key.0).unwrap_or(&[]);
        match sigma.locals.get(key) {
            Some(c) if position(domain, c).is_some() => {}
            _ => {
                complete = false;
                report.push(Rule::Unwitnessed, vec![key.1.clone()], format!("%{} of {} has no declared value", key.0, key.1));
            }
        }
    }
    for (key, _) in sigma.locals.iter().filter(|(k, _)| !needed.contains(k)) {
        report.push(Rule::Unwitnessed, vec![key.1.clone()], format!("%{} of {} is assigned but unused", key.0, key.1));
    }
    if complete {
        for p in s {
            for d in inst.deps_of(p) {
                if !satisfies(s, sigma, &inst.decl, p, &d.formula)? {
                    report.push(Rule::FormulaClosure, vec![p.clone()], format!("{d} is unsatisfied"));
                }
            }
        }
    }
    check_uniqueness(&mut report, s);
    Ok(report.finish())
}

fn disjunction(origin: &Package, formula: &PackageFormula) -> PackageName {
    PackageName::Disjunction(Box::new(FormulaNodeId { origin: origin.clone(), formula: formula.clone() }))
}

fn existing(repo: &Repository, on: &PackageName, vs: &VersionSet) -> VersionSet {
    vs.intersection(repo.versions(on)).cloned().collect()
}

fn negation_guard(repo: &Repository, on: &PackageName, vs: &VersionSet) -> PackageName {
    PackageName::guard(on.clone(), existing(repo, on, vs))
}

fn local_var(origin: &Package, var: &str) -> PackageName {
    PackageName::LocalVar { pkg: Box::new(origin.clone()), var: var.to_string() }
}

fn values<'a>(cs: impl IntoIterator<Item = &'a String>) -> VersionSet {
    cs.into_iter().map(|c| Version::value(c.as_str())).collect()
}

struct Encoder<'a> {
    inst: &'a FormulaInstance,
    repo: Repository,
    deps: Vec<Dependency>,
}

impl Encoder<'_> {
    /// Encodes NNF `psi`, required by `at`, for a formula declared by `origin`.
    fn encode(&mut self, origin: &Package, at: &Package, psi: &PackageFormula) -> Result<()> {
        let decl = &self.inst.decl;
        match psi {
            PackageFormula::Dep { on, versions } => {
                let vs = existing(&self.inst.repo, on, versions);
                self.deps.push(Dependency::new(at.clone(), on.clone(), vs));
            }
            PackageFormula::Not(inner) => {
                let PackageFormula::Dep { on, versions } = &**inner else {
                    unreachable!("negation normal form negates atoms only")
                };
                let guard = negation_guard(&self.inst.repo, on, versions);
                self.repo.insert(Package::new(guard.clone(), Version::Marker0));
                self.repo.insert(Package::new(guard.clone(), Version::Marker1));
                self.deps.push(Dependency::new(at.clone(), guard.clone(), [Version::Marker1].into()));
                for u in existing(&self.inst.repo, on, versions) {
                    self.deps.push(Dependency::new(Package::new(on.clone(), u), guard.clone(), [Version::Marker0].into()));
                }
            }
            PackageFormula::And(l, r) => {
                self.encode(origin, at, l)?;
                self.encode(origin, at, r)?;
            }
            PackageFormula::Or(l, r) => {
                let node = disjunction(origin, psi);
                let left = Package::new(node.clone(), Version::Marker0);
                let right = Package::new(node.clone(), Version::Marker1);
                self.repo.insert(left.clone());
                self.repo.insert(right.clone());
                self.deps.push(Dependency::new(at.clone(), node, [Version::Marker0, Version::Marker1].into()));
                self.encode(origin, &left, l)?;
                self.encode(origin, &right, r)?;
            }
            PackageFormula::Global { var, op, value } => {
                let domain = decl.global_domain(var).expect("checked at construction");
                let vs = values(passing(domain, *op, value)?);
                self.deps.push(Dependency::new(at.clone(), PackageName::GlobalVar(var.clone()), vs));
            }
            PackageFormula::Local { var, op, value } => {
                let domain = decl.local_domain(var).expect("checked at construction");
                let vs = values(passing(domain, *op, value)?);
                self.deps.push(Dependency::new(at.clone(), local_var(origin, var), vs));
            }
        }
        Ok(())
    }
}

/// Lowers to the core. The root depends on every global over its whole
/// domain, and every package mentioning a local depends on its own copy of
/// that local, so a resolution always determines the assignment.
pub fn lower_formulae(inst: &FormulaInstance) -> Result<CoreInstance> {
    let mut enc = Encoder { inst, repo: inst.repo.clone(), deps: Vec::new() };
    for (g, domain) in inst.decl.globals() {
        let name = PackageName::GlobalVar(g.clone());
        enc.repo.extend(domain.iter().map(|c| Package::new(name.clone(), Version::value(c.as_str()))));
        enc.deps.push(Dependency::new(inst.root.clone(), name, values(domain)));
    }
    for (l, p) in inst.local_uses() {
        let name = local_var(&p, &l);
        let domain = inst.decl.local_domain(&l).expect("checked at construction");
        enc.repo.extend(domain.iter().map(|c| Package::new(name.clone(), Version::value(c.as_str()))));
        enc.deps.push(Dependency::new(p.clone(), name, values(domain)));
    }
    for d in &inst.deps {
        enc.encode(&d.from, &d.from, &d.formula.nnf())?;
    }
    CoreInstance::new(enc.repo, enc.deps, inst.root.clone())
}

fn witness_nnf(
    inst: &FormulaInstance,
    s: &Resolution,
    sigma: &VarAssignment,
    origin: &Package,
    psi: &PackageFormula,
    out: &mut BTreeSet<Package>,
) -> Result<()> {
    match psi {
        PackageFormula::Not(inner) => {
            if let PackageFormula::Dep { on, versions } = &**inner {
                out.insert(Package::new(negation_guard(&inst.repo, on, versions), Version::Marker1));
            }
        }
        PackageFormula::And(l, r) => {
            witness_nnf(inst, s, sigma, origin, l, out)?;
            witness_nnf(inst, s, sigma, origin, r, out)?;
        }
        PackageFormula::Or(l, r) => {
            let node = disjunction(origin, psi);
            if satisfies(s, sigma, &inst.decl, origin, l)? {
                out.insert(Package::new(node, Version::Marker0));
                witness_nnf(inst, s, sigma, origin, l, out)?;
            } else {
                out.insert(Package::new(node, Version::Marker1));
                witness_nnf(inst, s, sigma, origin, r, out)?;
            }
        }
        _ => {}
    }
    Ok(())
}

/// The synthetic packages that witness `from`'s formula `psi` in the
/// lowered instance, taking the left disjunct whenever it holds.
pub fn witness_set(
    inst: &FormulaInstance,
    s: &Resolution,
    sigma: &VarAssignment,
    from: &Package,
    psi: &PackageFormula,
) -> Result<BTreeSet<Package>> {
    if !satisfies(s, sigma, &inst.decl, from, psi)? {
        return Err(Error::invalid(format!("{from} -> {psi} is not satisfied")));
    }
    let mut out = BTreeSet::new();
    witness_nnf(inst, s, sigma, from, &psi.nnf(), &mut out)?;
    Ok(out)
}

/// Keeps the original packages and reads the assignment off the selected
/// variable packages. Locals of unselected packages are dropped.
pub fn lift_formula_resolution(s: &Resolution, inst: &FormulaInstance) -> Result<(Resolution, VarAssignment)> {
    let lowered = lower_formulae(inst)?;
    let report = validate_resolution(&lowered, s)?;
    if !report.is_valid() {
        return Err(Error::invalid(format!("not a resolution of the lowered instance: {report}")));
    }
    let sp: Resolution = s.iter().filter(|p| inst.repo.contains(p)).cloned().collect();
    let mut sigma = VarAssignment::new();
    for p in s {
        let Version::Value(c) = &p.version else { continue };
        match &p.name {
            PackageName::GlobalVar(g) => sigma.set_global(g, c),
            PackageName::LocalVar { pkg, var } if sp.contains(pkg) => sigma.set_local(var, (**pkg).clone(), c),
            _ => {}
        }
    }
    Ok((sp, sigma))
}

pub fn embed_formula_resolution(sp: &Resolution, sigma: &VarAssignment, inst: &FormulaInstance) -> Result<Resolution> {
    let report = validate_formula_resolution(inst, sp, sigma)?;
    if !report.is_valid() {
        return Err(Error::invalid(format!("not a formula resolution: {report}")));
    }
    let mut out: BTreeSet<Package> = sp.selected().clone();
    for p in sp {
        for d in inst.deps_of(p) {
            out.extend(witness_set(inst, sp, sigma, p, &d.formula)?);
        }
    }
    // Negated atoms in branches not taken still tie their targets to `#0`.
    for d in &inst.deps {
        for f in d.formula.nnf().subformulae() {
            if let PackageFormula::Not(inner) = f {
                if let PackageFormula::Dep { on, versions } = &**inner {
                    if sp.versions_of(on).any(|v| versions.contains(v)) {
                        out.insert(Package::new(negation_guard(&inst.repo, on, versions), Version::Marker0));
                    }
                }
            }
        }
    }
    for (g, c) in &sigma.globals {
        out.insert(Package::new(PackageName::GlobalVar(g.clone()), Version::value(c.as_str())));
    }
    for ((l, p), c) in &sigma.locals {
        out.insert(Package::new(local_var(p, l), Version::value(c.as_str())));
    }
    Ok(Resolution::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::name::versions;
    use crate::text::parse_package_formula;

    fn pkg(n: &str, v: &str) -> Package {
        Package::atom(n, v)
    }

    fn d1() -> FormulaInstance {
        let repo: Repository = [pkg("A", "1"), pkg("B", "1"), pkg("B", "2"), pkg("C", "1")].into_iter().collect();
        let psi = parse_package_formula("(B@{2} & C@{1}) | (B@{1} & !C@{1})").unwrap();
        FormulaInstance::new(repo, pkg("A", "1"), [FormulaDep::new(pkg("A", "1"), psi)], None).unwrap()
    }

    fn set(ps: &[Package]) -> Resolution {
        ps.iter().cloned().collect()
    }

    #[test]
    fn satisfaction_rules() {
        let inst = d1();
        let psi = &inst.deps()[0].formula;
        let none = VarAssignment::new();
        let decl = VariableDecl::default();
        let left = set(&[pkg("A", "1"), pkg("B", "2"), pkg("C", "1")]);
        assert!(satisfies(&left, &none, &decl, &pkg("A", "1"), psi).unwrap());
        let right = set(&[pkg("A", "1"), pkg("B", "1")]);
        assert!(satisfies(&right, &none, &decl, &pkg("A", "1"), psi).unwrap());
        let empty = PackageFormula::dep(PackageName::atom("B"), VersionSet::new());
        assert!(!satisfies(&left, &none, &decl, &pkg("A", "1"), &empty).unwrap());
    }

    #[test]
    fn d1_lowering_shape() {
        let inst = d1();
        let lowered = lower_formulae(&inst).unwrap();
        let synthetic: BTreeSet<&PackageName> = lowered.repo().names().filter(|n| n.is_synthetic()).collect();
        assert_eq!(synthetic.len(), 2);
        assert!(synthetic.iter().any(|n| matches!(n, PackageName::Disjunction(_))));
        assert!(synthetic.contains(&PackageName::guard(PackageName::atom("C"), versions(&["1"]))));
    }

    #[test]
    fn double_negation_and_atoms() {
        let repo: Repository = [pkg("A", "1"), pkg("B", "1")].into_iter().collect();
        let atom = parse_package_formula("B@{1}").unwrap();
        let twice = parse_package_formula("!!B@{1}").unwrap();
        let a = FormulaInstance::new(repo.clone(), pkg("A", "1"), [FormulaDep::new(pkg("A", "1"), atom)], None).unwrap();
        let b = FormulaInstance::new(repo, pkg("A", "1"), [FormulaDep::new(pkg("A", "1"), twice)], None).unwrap();
        let la = lower_formulae(&a).unwrap();
        assert_eq!(la.deps().len(), 1);
        assert_eq!(la.repo().len(), 2);
        assert_eq!(la, lower_formulae(&b).unwrap());
    }

    #[test]
    fn d1_round_trip() {
        let inst = d1();
        let none = VarAssignment::new();
        for sp in [set(&[pkg("A", "1"), pkg("B", "2"), pkg("C", "1")]), set(&[pkg("A", "1"), pkg("B", "1")])] {
            assert!(validate_formula_resolution(&inst, &sp, &none).unwrap().is_valid());
            let core = embed_formula_resolution(&sp, &none, &inst).unwrap();
            assert_eq!(lift_formula_resolution(&core, &inst).unwrap(), (sp, none.clone()));
        }
        let bad = set(&[pkg("A", "1"), pkg("B", "1"), pkg("C", "1")]);
        assert!(validate_formula_resolution(&inst, &bad, &none).unwrap().has(Rule::FormulaClosure));
    }

    #[test]
    fn variables() {
        let repo: Repository = [pkg("A", "1"), pkg("F", "1")].into_iter().collect();
        let decl = VariableDecl::new(
            [("os".to_string(), vec!["linux".to_string(), "macos".to_string()])],
            [("arch".to_string(), vec!["x86".to_string(), "arm".to_string()])],
        )
        .unwrap();
        // Filtered dependency: F only on linux, and only on arm.
        let psi = parse_package_formula("!$os = linux | (F@{1} & $os = linux & %arch >= arm)").unwrap();
        let inst = FormulaInstance::new(repo, pkg("A", "1"), [FormulaDep::new(pkg("A", "1"), psi)], Some(decl)).unwrap();
        let lowered = lower_formulae(&inst).unwrap();
        let sp = set(&[pkg("A", "1"), pkg("F", "1")]);
        let mut sigma = VarAssignment::new();
        sigma.set_global("os", "linux");
        sigma.set_local("arch", pkg("A", "1"), "arm");
        assert!(validate_formula_resolution(&inst, &sp, &sigma).unwrap().is_valid());
        let core = embed_formula_resolution(&sp, &sigma, &inst).unwrap();
        assert!(validate_resolution(&lowered, &core).unwrap().is_valid());
        assert_eq!(lift_formula_resolution(&core, &inst).unwrap(), (sp, sigma.clone()));
        sigma.set_local("arch", pkg("A", "1"), "x86");
        let sp = set(&[pkg("A", "1"), pkg("F", "1")]);
        assert!(validate_formula_resolution(&inst, &sp, &sigma).unwrap().has(Rule::FormulaClosure));
    }

    #[test]
    fn undeclared_variable_is_rejected() {
        let repo: Repository = [pkg("A", "1")].into_iter().collect();
        let psi = parse_package_formula("$os = linux").unwrap();
        assert!(FormulaInstance::new(repo, pkg("A", "1"), [FormulaDep::new(pkg("A", "1"), psi)], None).is_err());
    }
}
