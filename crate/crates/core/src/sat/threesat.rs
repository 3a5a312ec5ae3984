//! 3-CNF formulae, a DIMACS reader, and the translation of a 3-CNF formula
//! into a resolution instance that is resolvable exactly when the formula is
//! satisfiable.

use std::fmt;

use crate::calculus::{CoreInstance, Dependency, Repository};
use crate::error::{Error, Result};
use crate::name::{Package, PackageName, Version, VersionSet};

/// Clauses of signed, 1-based variable indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: usize,
    pub clauses: Vec<Vec<i64>>,
}

impl Cnf {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i64>>) -> Result<Self> {
        for &l in clauses.iter().flatten() {
            if l == 0 || l.unsigned_abs() as usize > num_vars {
                return Err(Error::invalid(format!(
                    "literal {l} out of range for {num_vars} variables"
                )));
            }
        }
        Ok(Cnf { num_vars, clauses })
    }

    /// Truth-table satisfiability. Only meant for small formulae.
    pub fn brute_force_satisfiable(&self) -> bool {
        (0u64..1 << self.num_vars).any(|bits| {
            self.clauses.iter().all(|c| {
                c.iter()
                    .any(|&l| ((bits >> (l.unsigned_abs() - 1)) & 1 == 1) == (l > 0))
            })
        })
    }

    pub fn to_dimacs(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Cnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p cnf {} {}", self.num_vars, self.clauses.len())?;
        for c in &self.clauses {
            for l in c {
                write!(f, "{l} ")?;
            }
            writeln!(f, "0")?;
        }
        Ok(())
    }
}

/// Reads `p cnf V C`, then whitespace-separated literals with each clause
/// terminated by `0`. Lines starting with `c` are comments.
pub fn parse_dimacs(text: &str) -> Result<Cnf> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') || trimmed.starts_with('%') {
            continue;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(Error::parse_at(text, start, "duplicate problem line"));
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                ["p", "cnf", v, c] => v.parse().ok().zip(c.parse().ok()),
                _ => None,
            };
            header = Some(parsed.ok_or_else(|| {
                Error::parse_at(text, start, "expected `p cnf <vars> <clauses>`")
            })?);
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(Error::parse_at(text, start, "clause before problem line"));
        };
        let mut col = 0;
        for tok in line.split_whitespace() {
            col = line[col..].find(tok).map_or(col, |i| col + i);
            let at = start + col;
            let lit: i64 = tok
                .parse()
                .map_err(|_| Error::parse_at(text, at, format!("bad literal `{tok}`")))?;
            if lit == 0 {
                clauses.push(std::mem::take(&mut current));
            } else if lit.unsigned_abs() as usize > num_vars {
                return Err(Error::parse_at(text, at, format!("variable {lit} exceeds {num_vars}")));
            } else {
                current.push(lit);
            }
            col += tok.len();
        }
    }
    let Some((num_vars, num_clauses)) = header else {
        return Err(Error::parse_at(text, text.len(), "missing problem line"));
    };
    if !current.is_empty() {
        return Err(Error::parse_at(text, text.len(), "last clause is not terminated by 0"));
    }
    if clauses.len() != num_clauses {
        return Err(Error::parse_at(
            text,
            text.len(),
            format!("header declares {num_clauses} clauses, found {}", clauses.len()),
        ));
    }
    Cnf::new(num_vars, clauses)
}

fn var_name(i: u64) -> PackageName {
    PackageName::Atom(format!("x{i}"))
}

fn polarity(positive: bool) -> Version {
    Version::value(if positive { "T" } else { "F" })
}

fn literal(l: i64) -> Version {
    Version::value(&format!("{}{}", if l > 0 { '+' } else { '-' }, l.unsigned_abs()))
}

/// Variables become `x<i>` with versions `val:T`/`val:F`; clause `j` becomes
/// `c<j>` with one version per literal (`val:+i`, `val:-i`). The root
/// depends on every clause family, and each literal version depends on the
/// matching polarity of its variable.
pub fn gen_from_3cnf(cnf: &Cnf) -> Result<CoreInstance> {
    let mut repo = Repository::new();
    let root = Package::root();
    repo.insert(root.clone());
    for i in 1..=cnf.num_vars as u64 {
        repo.insert(Package::new(var_name(i), polarity(true)));
        repo.insert(Package::new(var_name(i), polarity(false)));
    }
    let mut deps = Vec::new();
    for (j, clause) in cnf.clauses.iter().enumerate() {
        if clause.len() != 3 {
            return Err(Error::invalid(format!(
                "clause {} has {} literals, expected 3",
                j + 1,
                clause.len()
            )));
        }
        let name = PackageName::Atom(format!("c{}", j + 1));
        let lits: VersionSet = clause.iter().map(|&l| literal(l)).collect();
        for &l in clause {
            let x = l.unsigned_abs();
            if l == 0 || x as usize > cnf.num_vars {
                return Err(Error::invalid(format!("literal {l} out of range")));
            }
            let pkg = Package::new(name.clone(), literal(l));
            repo.insert(pkg.clone());
            deps.push(Dependency::new(pkg, var_name(x), [polarity(l > 0)].into()));
        }
        deps.push(Dependency::new(root.clone(), name, lits));
    }
    CoreInstance::new(repo, deps, root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Oracle;
    use crate::sat::resolve;

    #[test]
    fn dimacs_round_trip() {
        let text = "c example\np cnf 3 2\n1 -2 3 0\n-1 2\n -3 0\n";
        let cnf = parse_dimacs(text).unwrap();
        assert_eq!(cnf.clauses, vec![vec![1, -2, 3], vec![-1, 2, -3]]);
        assert_eq!(parse_dimacs(&cnf.to_dimacs()).unwrap(), cnf);
    }

    #[test]
    fn dimacs_errors() {
        assert!(parse_dimacs("1 2 0\n").is_err());
        assert!(parse_dimacs("p cnf 2 1\n1 3 0\n").is_err());
        assert!(parse_dimacs("p cnf 2 1\n1 2\n").is_err());
        assert!(matches!(
            parse_dimacs("p cnf 2 1\n1 x 0\n"),
            Err(Error::Parse { line: 2, column: 3, .. })
        ));
    }

    #[test]
    fn single_clause_instance() {
        let cnf = Cnf::new(3, vec![vec![1, 2, -3]]).unwrap();
        let inst = gen_from_3cnf(&cnf).unwrap();
        assert_eq!(inst.repo().versions(&PackageName::atom("c1")).len(), 3);
        for i in 1..=3 {
            assert_eq!(inst.repo().versions(&var_name(i)).len(), 2);
        }
        assert!(resolve(&inst, false).unwrap().is_resolved());
        assert!(!Oracle::with_bound(64).enumerate(&inst).unwrap().is_empty());
    }

    #[test]
    fn contradiction_is_unresolvable() {
        let cnf = Cnf::new(1, vec![vec![1, 1, 1], vec![-1, -1, -1]]).unwrap();
        assert!(!cnf.brute_force_satisfiable());
        let inst = gen_from_3cnf(&cnf).unwrap();
        assert!(!resolve(&inst, false).unwrap().is_resolved());
    }

    #[test]
    fn empty_formula_is_root_alone() {
        let inst = gen_from_3cnf(&Cnf::default()).unwrap();
        assert_eq!(inst.repo().len(), 1);
        assert!(resolve(&inst, false).unwrap().is_resolved());
    }

    #[test]
    fn rejects_short_clauses() {
        let cnf = Cnf::new(2, vec![vec![1, 2]]).unwrap();
        assert!(matches!(gen_from_3cnf(&cnf), Err(Error::InvalidInput(_))));
    }
}
