use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::calculus::{CoreInstance, Dependency, Outcome, Resolution};
use crate::error::{Error, Result};
use crate::name::{Package, PackageName, Version};

use super::dpll::Solver;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit {
    pub var: Var,
    pub positive: bool,
}

impl Lit {
    pub fn pos(var: Var) -> Lit {
        Lit { var, positive: true }
    }

    pub fn neg(var: Var) -> Lit {
        Lit {
            var,
            positive: false,
        }
    }

    pub fn negate(self) -> Lit {
        Lit {
            var: self.var,
            positive: !self.positive,
        }
    }
}

/// One boolean variable per package and clauses over them. Literal order
/// within a clause is significant to the solver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfInstance {
    vars: Vec<Package>,
    clauses: Vec<Vec<Lit>>,
}

impl CnfInstance {
    /// Builds an instance over raw variables, for callers that are not
    /// encoding a package instance.
    pub fn from_clauses(num_vars: usize, clauses: Vec<Vec<Lit>>) -> Result<Self> {
        if let Some(l) = clauses.iter().flatten().find(|l| l.var.0 >= num_vars) {
            return Err(Error::invalid(format!("literal over undeclared variable {}", l.var.0)));
        }
        let vars = (0..num_vars)
            .map(|i| Package::new(PackageName::Atom(format!("x{}", i + 1)), Version::Marker1))
            .collect();
        Ok(CnfInstance { vars, clauses })
    }

    pub fn vars(&self) -> &[Package] {
        &self.vars
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    pub fn package(&self, v: Var) -> &Package {
        &self.vars[v.0]
    }

    /// Renders the clauses as DIMACS, with a comment line per variable.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.vars.iter().enumerate() {
            out.push_str(&format!("c {} {p}\n", i + 1));
        }
        out.push_str(&format!("p cnf {} {}\n", self.vars.len(), self.clauses.len()));
        for clause in &self.clauses {
            for l in clause {
                let n = l.var.0 as i64 + 1;
                out.push_str(&format!("{} ", if l.positive { n } else { -n }));
            }
            out.push_str("0\n");
        }
        out
    }
}

impl fmt::Display for CnfInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for clause in &self.clauses {
            f.write_str("(")?;
            for (i, l) in clause.iter().enumerate() {
                if i > 0 {
                    f.write_str(" | ")?;
                }
                let sign = if l.positive { "" } else { "!" };
                write!(f, "{sign}{}", self.vars[l.var.0])?;
            }
            f.write_str(")\n")?;
        }
        Ok(())
    }
}

/// A total assignment over the declared variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SatAssignment(pub Vec<bool>);

impl SatAssignment {
    pub fn value(&self, v: Var) -> bool {
        self.0[v.0]
    }

    pub fn satisfies(&self, lit: Lit) -> bool {
        self.value(lit.var) == lit.positive
    }
}

/// Orders a dependency's versions for its clause: descending by version when
/// `ordered`, otherwise canonical. Non-numeric versions keep canonical order
/// after the numeric ones.
fn clause_order(d: &Dependency, ordered: bool) -> Vec<&Version> {
    let mut vs: Vec<&Version> = d.versions.iter().collect();
    if ordered {
        vs.sort_by(|a, b| match (a.as_numeric(), b.as_numeric()) {
            (Some(x), Some(y)) => y.cmp(x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.cmp(b),
        });
    }
    vs
}

/// Dependencies in breadth-first order from the root, then the unreachable
/// ones in canonical order.
fn traversal_order(inst: &CoreInstance) -> Vec<&Dependency> {
    let mut seen: BTreeSet<Package> = BTreeSet::from([inst.root().clone()]);
    let mut queue = VecDeque::from([inst.root().clone()]);
    let mut out = Vec::new();
    let mut emitted: BTreeSet<&Dependency> = BTreeSet::new();
    while let Some(p) = queue.pop_front() {
        for d in inst.deps_of(&p) {
            out.push(d);
            emitted.insert(d);
            for v in &d.versions {
                let child = Package::new(d.on.clone(), v.clone());
                if seen.insert(child.clone()) {
                    queue.push_back(child);
                }
            }
        }
    }
    out.extend(inst.deps().iter().filter(|d| !emitted.contains(d)));
    out
}

/// Encodes root inclusion, one clause per dependency, and pairwise
/// at-most-one clauses per name.
pub fn encode(inst: &CoreInstance, ordered: bool) -> CnfInstance {
    let vars: Vec<Package> = inst.repo().packages().collect();
    let index: HashMap<&Package, Var> = vars.iter().enumerate().map(|(i, p)| (p, Var(i))).collect();
    let var_of = |name: &PackageName, v: &Version| index[&Package::new(name.clone(), v.clone())];

    let mut clauses = vec![vec![Lit::pos(index[inst.root()])]];
    for d in traversal_order(inst) {
        let mut clause = vec![Lit::neg(index[&d.from])];
        clause.extend(clause_order(d, ordered).into_iter().map(|v| Lit::pos(var_of(&d.on, v))));
        clauses.push(clause);
    }
    let mut by_name: BTreeMap<&PackageName, Vec<Var>> = BTreeMap::new();
    for (i, p) in vars.iter().enumerate() {
        by_name.entry(&p.name).or_default().push(Var(i));
    }
    for group in by_name.values() {
        for (i, &a) in group.iter().enumerate() {
            for &b in &group[i + 1..] {
                clauses.push(vec![Lit::neg(a), Lit::neg(b)]);
            }
        }
    }
    CnfInstance { vars, clauses }
}

/// The packages whose variables are true.
pub fn decode(cnf: &CnfInstance, a: &SatAssignment) -> Result<Resolution> {
    if a.0.len() != cnf.vars.len() {
        return Err(Error::invalid(format!(
            "assignment covers {} variables, expected {}",
            a.0.len(),
            cnf.vars.len()
        )));
    }
    if let Some(k) = cnf.clauses.iter().position(|c| !c.iter().any(|&l| a.satisfies(l))) {
        return Err(Error::invalid(format!("assignment falsifies clause {k}")));
    }
    Ok(cnf
        .vars
        .iter()
        .enumerate()
        .filter(|(i, _)| a.0[*i])
        .map(|(_, p)| p.clone())
        .collect())
}

/// Encodes, solves and decodes. With `prefer_fresh`, dependency clauses list
/// higher versions first, so the solver tries them first.
pub fn resolve(inst: &CoreInstance, prefer_fresh: bool) -> Result<Outcome<Resolution>> {
    let cnf = encode(inst, prefer_fresh);
    match Solver::default().solve(&cnf)? {
        Some(a) => Ok(Outcome::Resolved(decode(&cnf, &a)?)),
        None => Ok(Outcome::Unresolvable(unsat_reason(inst))),
    }
}

fn unsat_reason(inst: &CoreInstance) -> String {
    match inst.warnings().first() {
        Some(w) => format!("unresolvable: {w}"),
        None => format!("unresolvable: no resolution contains {}", inst.root()),
    }
}
