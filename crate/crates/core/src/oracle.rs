//! Brute-force enumeration of every valid resolution.
//!
//! The search assigns each name either nothing or one of its versions and
//! checks a dependency as soon as both of its names are assigned. Names are
//! visited outward from the root, so a bad choice is caught early. Pruning only removes assignments that are already
//! invalid, so the result is exactly the set of valid subsets.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::calculus::{CoreInstance, Resolution};
use crate::error::{Error, Result};
use crate::name::{Package, PackageName, Version};

pub const DEFAULT_BOUND: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Oracle {
    /// Largest repository the oracle accepts.
    pub bound: usize,
    /// Largest number of resolutions the oracle returns.
    pub limit: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle {
            bound: DEFAULT_BOUND,
            limit: usize::MAX,
        }
    }
}

/// All valid resolutions under the default repository bound, in canonical order.
pub fn enumerate_resolutions(inst: &CoreInstance, limit: usize) -> Result<Vec<Resolution>> {
    Oracle {
        limit,
        ..Oracle::default()
    }
    .enumerate(inst)
}

impl Oracle {
    pub fn with_bound(bound: usize) -> Self {
        Oracle {
            bound,
            ..Oracle::default()
        }
    }

    pub fn enumerate(&self, inst: &CoreInstance) -> Result<Vec<Resolution>> {
        let mut out = self.search(inst, None)?;
        out.sort();
        Ok(out)
    }

    /// Some valid resolution, or `None` when there is none.
    pub fn find_one(&self, inst: &CoreInstance) -> Result<Option<Resolution>> {
        Ok(self.search(inst, Some(1))?.pop())
    }

    fn search(&self, inst: &CoreInstance, stop_after: Option<usize>) -> Result<Vec<Resolution>> {
        let size = inst.repo().len();
        if size > self.bound {
            return Err(Error::LimitExceeded(format!(
                "repository has {size} packages, oracle bound is {}",
                self.bound
            )));
        }
        let names = search_order(inst);
        let index: HashMap<&PackageName, usize> =
            names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        // Each dependency is checked at the level where its last name is assigned.
        let mut checks: Vec<Vec<usize>> = vec![Vec::new(); names.len()];
        for (k, d) in inst.deps().iter().enumerate() {
            let from = index[&d.from.name];
            let level = index.get(&d.on).map_or(from, |&on| on.max(from));
            checks[level].push(k);
        }
        let mut search = Search {
            inst,
            names: &names,
            index: &index,
            checks: &checks,
            choice: vec![None; names.len()],
            out: Vec::new(),
            limit: self.limit,
            stop_after,
        };
        search.run(0)?;
        Ok(search.out)
    }
}

/// Depth-first from the root, dependers before their targets, so a selected
/// depender rules out the wrong choices of each target as soon as the target
/// is reached. Names the root cannot reach follow in canonical order.
fn search_order(inst: &CoreInstance) -> Vec<&PackageName> {
    let mut edges: BTreeMap<&PackageName, BTreeSet<&PackageName>> = BTreeMap::new();
    for d in inst.deps() {
        edges.entry(&d.from.name).or_default().insert(&d.on);
    }
    let root = &inst.root().name;
    let mut seen = BTreeSet::new();
    let mut order = Vec::new();
    for start in std::iter::once(root).chain(inst.repo().names()) {
        if inst.repo().versions(start).is_empty() && start != root || !seen.insert(start) {
            continue;
        }
        let mut stack = vec![start];
        while let Some(node) = stack.pop() {
            order.push(node);
            for &child in edges.get(node).into_iter().flatten().rev() {
                if !inst.repo().versions(child).is_empty() && seen.insert(child) {
                    stack.push(child);
                }
            }
        }
    }
    order
}

struct Search<'a> {
    inst: &'a CoreInstance,
    names: &'a [&'a PackageName],
    index: &'a HashMap<&'a PackageName, usize>,
    checks: &'a [Vec<usize>],
    choice: Vec<Option<&'a Version>>,
    out: Vec<Resolution>,
    limit: usize,
    stop_after: Option<usize>,
}

impl<'a> Search<'a> {
    fn run(&mut self, level: usize) -> Result<()> {
        if self.stop_after.is_some_and(|n| self.out.len() >= n) {
            return Ok(());
        }
        if level == self.names.len() {
            if self.out.len() == self.limit {
                return Err(Error::LimitExceeded(format!(
                    "more than {} resolutions",
                    self.limit
                )));
            }
            let s = self
                .names
                .iter()
                .zip(&self.choice)
                .filter_map(|(n, v)| v.map(|v| Package::new((*n).clone(), v.clone())))
                .collect();
            self.out.push(s);
            return Ok(());
        }
        let name = self.names[level];
        let versions = self.inst.repo().versions(name);
        let root = self.inst.root();
        let options: Vec<Option<&'a Version>> = if *name == root.name {
            vec![Some(&root.version)]
        } else {
            std::iter::once(None).chain(versions.iter().map(Some)).collect()
        };
        for option in options {
            self.choice[level] = option;
            if self.consistent(level) {
                self.run(level + 1)?;
            }
        }
        self.choice[level] = None;
        Ok(())
    }

    fn consistent(&self, level: usize) -> bool {
        self.checks[level].iter().all(|&k| {
            let d = &self.inst.deps()[k];
            let from_selected = self.choice[self.index[&d.from.name]] == Some(&d.from.version);
            if !from_selected {
                return true;
            }
            match self.index.get(&d.on) {
                Some(&on) => self.choice[on].is_some_and(|v| d.versions.contains(v)),
                None => false,
            }
        })
    }
}
