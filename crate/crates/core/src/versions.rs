//! Version ordering and version formulae.

use std::cmp::Ordering;
use std::fmt;

use crate::calculus::{CoreInstance, Dependency, Repository};
use crate::error::{Error, Result};
use crate::name::{Package, PackageName, Version, VersionSet};

/// Compares two versions. Numeric versions are totally ordered with
/// zero-padding; any other pair is comparable only when equal.
pub fn compare_versions(a: &Version, b: &Version) -> Result<Ordering> {
    match (a, b) {
        (Version::Numeric(x), Version::Numeric(y)) => Ok(x.cmp(y)),
        _ if a == b => Ok(Ordering::Equal),
        _ => Err(Error::invalid(format!("versions {a} and {b} are not comparable"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Ge,
    Gt,
    Le,
    Lt,
    Eq,
    Ne,
}

impl CmpOp {
    /// Whether `lhs op rhs` holds, given `lhs.cmp(rhs)`.
    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Ge => ord != Ordering::Less,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
        }
    }

    pub fn complement(self) -> CmpOp {
        match self {
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VersionFormula {
    Top,
    And(Box<VersionFormula>, Box<VersionFormula>),
    Or(Box<VersionFormula>, Box<VersionFormula>),
    Cmp(CmpOp, Version),
}

impl VersionFormula {
    pub fn cmp(op: CmpOp, version: &str) -> VersionFormula {
        VersionFormula::Cmp(op, Version::num(version))
    }

    pub fn and(self, rhs: VersionFormula) -> VersionFormula {
        VersionFormula::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: VersionFormula) -> VersionFormula {
        VersionFormula::Or(Box::new(self), Box::new(rhs))
    }

    /// Checks that every comparison constant is numeric.
    pub fn check(&self) -> Result<()> {
        match self {
            VersionFormula::Top => Ok(()),
            VersionFormula::And(l, r) | VersionFormula::Or(l, r) => {
                l.check()?;
                r.check()
            }
            VersionFormula::Cmp(_, Version::Numeric(_)) => Ok(()),
            VersionFormula::Cmp(_, c) => Err(Error::invalid(format!(
                "version formula constant {c} is not numeric"
            ))),
        }
    }

    /// Whether a single version satisfies the formula.
    pub fn matches(&self, v: &Version) -> bool {
        match self {
            VersionFormula::Top => true,
            VersionFormula::And(l, r) => l.matches(v) && r.matches(v),
            VersionFormula::Or(l, r) => l.matches(v) || r.matches(v),
            VersionFormula::Cmp(CmpOp::Eq, c) => v == c,
            VersionFormula::Cmp(CmpOp::Ne, c) => v != c,
            VersionFormula::Cmp(op, c) => compare_versions(v, c).is_ok_and(|o| op.holds(o)),
        }
    }
}

impl fmt::Display for VersionFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VersionFormula::Top => f.write_str("*"),
            VersionFormula::And(l, r) => write!(f, "({l} & {r})"),
            VersionFormula::Or(l, r) => write!(f, "({l} | {r})"),
            VersionFormula::Cmp(op, c) => write!(f, "{op}{c}"),
        }
    }
}

/// The semantics function: the existing versions of `n` selected by `phi`.
pub fn eval_formula(phi: &VersionFormula, n: &PackageName, repo: &Repository) -> VersionSet {
    match phi {
        VersionFormula::Top => repo.versions(n).clone(),
        VersionFormula::And(l, r) => {
            let l = eval_formula(l, n, repo);
            let r = eval_formula(r, n, repo);
            l.intersection(&r).cloned().collect()
        }
        VersionFormula::Or(l, r) => {
            let mut l = eval_formula(l, n, repo);
            l.extend(eval_formula(r, n, repo));
            l
        }
        VersionFormula::Cmp(..) => repo
            .versions(n)
            .iter()
            .filter(|v| phi.matches(v))
            .cloned()
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FormulaDependency {
    pub from: Package,
    pub on: PackageName,
    pub formula: VersionFormula,
}

impl FormulaDependency {
    pub fn new(from: Package, on: PackageName, formula: VersionFormula) -> Self {
        FormulaDependency { from, on, formula }
    }
}

/// Evaluates each formula dependency against the repository.
pub fn lower_version_formulae(
    repo: &Repository,
    fdeps: &[FormulaDependency],
    root: &Package,
) -> Result<CoreInstance> {
    let deps = fdeps
        .iter()
        .map(|d| {
            d.formula.check()?;
            Ok(Dependency::new(
                d.from.clone(),
                d.on.clone(),
                eval_formula(&d.formula, &d.on, repo),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    CoreInstance::new(repo.clone(), deps, root.clone())
}
