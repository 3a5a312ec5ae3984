//! Build graphs: the order in which a resolution can be installed.
//!
//! An edge `(p, q)` means `q` must be built before `p`. Optional
//! dependencies never change which packages are selected, only add edges.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::calculus::{check_subset, CoreInstance, Resolution};
use crate::error::Result;
use crate::name::{DisplaySet, Package, PackageName, VersionSet};

/// `from` uses `on` at one of `versions` when it happens to be selected.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OptionalDependency {
    pub from: Package,
    pub on: PackageName,
    pub versions: VersionSet,
}

impl OptionalDependency {
    pub fn new(from: Package, on: PackageName, versions: VersionSet) -> Self {
        OptionalDependency { from, on, versions }
    }
}

impl fmt::Display for OptionalDependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} uses {} {}", self.from, self.on, DisplaySet(&self.versions))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuildGraph {
    vertices: Resolution,
    edges: BTreeSet<(Package, Package)>,
}

/// A cycle, listed from its smallest package along the edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleReport {
    pub packages: Vec<Package>,
}

impl fmt::Display for CycleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.packages.iter().map(ToString::to_string).collect();
        write!(f, "cycle: {}", items.join(" -> "))
    }
}

/// Edges from the dependencies and optional dependencies of selected
/// packages to their selected dependees. With `include_root` false, edges
/// touching the root are left out.
pub fn build_graph(
    inst: &CoreInstance,
    optional: &[OptionalDependency],
    s: &Resolution,
    include_root: bool,
) -> Result<BuildGraph> {
    check_subset(inst.repo(), s)?;
    check_subset(inst.repo(), optional.iter().map(|o| &o.from))?;
    let required = inst.deps().iter().map(|d| (&d.from, &d.on, &d.versions));
    let optional = optional.iter().map(|o| (&o.from, &o.on, &o.versions));
    let mut edges = BTreeSet::new();
    for (from, on, vs) in required.chain(optional).filter(|(from, ..)| s.contains(from)) {
        for v in s.versions_of(on).filter(|v| vs.contains(v)) {
            edges.insert((from.clone(), Package::new(on.clone(), v.clone())));
        }
    }
    if !include_root {
        let root = inst.root();
        edges.retain(|(p, q)| p != root && q != root);
    }
    Ok(BuildGraph { vertices: s.clone(), edges })
}

impl BuildGraph {
    pub fn vertices(&self) -> &Resolution {
        &self.vertices
    }

    pub fn edges(&self) -> &BTreeSet<(Package, Package)> {
        &self.edges
    }

    pub fn has_edge(&self, from: &Package, to: &Package) -> bool {
        self.edges.contains(&(from.clone(), to.clone()))
    }

    fn successors(&self) -> BTreeMap<&Package, Vec<&Package>> {
        let mut out: BTreeMap<&Package, Vec<&Package>> = BTreeMap::new();
        for (p, q) in &self.edges {
            out.entry(p).or_default().push(q);
        }
        out
    }

    /// Dependees before dependers, ties broken by package order.
    pub fn topo_order(&self) -> std::result::Result<Vec<Package>, CycleReport> {
        let mut waiting: BTreeMap<&Package, usize> = self.vertices.iter().map(|p| (p, 0)).collect();
        let mut dependers: BTreeMap<&Package, Vec<&Package>> = BTreeMap::new();
        for (p, q) in &self.edges {
            *waiting.get_mut(p).expect("edge endpoints are vertices") += 1;
            dependers.entry(q).or_default().push(p);
        }
        let mut ready: BTreeSet<&Package> = waiting.iter().filter(|(_, n)| **n == 0).map(|(p, _)| *p).collect();
        let mut order = Vec::with_capacity(waiting.len());
        while let Some(q) = ready.pop_first() {
            order.push(q.clone());
            for p in dependers.get(q).into_iter().flatten() {
                let n = waiting.get_mut(p).expect("edge endpoints are vertices");
                *n -= 1;
                if *n == 0 {
                    ready.insert(p);
                }
            }
        }
        if order.len() == waiting.len() {
            return Ok(order);
        }
        let placed: BTreeSet<&Package> = order.iter().collect();
        Err(self.shortest_cycle(&placed))
    }

    /// The shortest cycle among unplaced vertices, preferring smaller start packages.
    fn shortest_cycle(&self, placed: &BTreeSet<&Package>) -> CycleReport {
        let succ = self.successors();
        let mut best: Option<Vec<Package>> = None;
        for start in self.vertices.iter().filter(|p| !placed.contains(p)) {
            let mut prev: BTreeMap<&Package, &Package> = BTreeMap::new();
            let mut queue = VecDeque::from([start]);
            let mut found = None;
            'bfs: while let Some(p) = queue.pop_front() {
                for &q in succ.get(p).into_iter().flatten() {
                    if placed.contains(q) {
                        continue;
                    }
                    if q == start {
                        found = Some(p);
                        break 'bfs;
                    }
                    if !prev.contains_key(q) {
                        prev.insert(q, p);
                        queue.push_back(q);
                    }
                }
            }
            let Some(mut last) = found else { continue };
            let mut path = vec![last.clone()];
            while last != start {
                last = prev[last];
                path.push(last.clone());
            }
            path.reverse();
            if best.as_ref().is_none_or(|b| path.len() < b.len()) {
                best = Some(path);
            }
        }
        CycleReport { packages: best.unwrap_or_default() }
    }

    /// Graphviz text: one node per package labelled `name version`, one edge per line.
    pub fn to_dot(&self) -> String {
        let ids: BTreeMap<&Package, usize> = self.vertices.iter().enumerate().map(|(i, p)| (p, i)).collect();
        let mut out = String::from("digraph build {\n");
        for (p, i) in &ids {
            out.push_str(&format!("  n{i} [label=\"{} {}\"];\n", escape(&p.name.to_string()), escape(&p.version.to_string())));
        }
        for (p, q) in &self.edges {
            out.push_str(&format!("  n{} -> n{};\n", ids[p], ids[q]));
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{Dependency, Repository};
    use crate::name::versions;
    use crate::oracle::Oracle;

    fn pkg(n: &str) -> Package {
        Package::atom(n, "1")
    }

    fn on(n: &str) -> PackageName {
        PackageName::atom(n)
    }

    fn example(query: &str) -> (CoreInstance, Vec<OptionalDependency>) {
        let repo: Repository = ["A", "B", "C", "D"].iter().map(|n| pkg(n)).collect();
        let deps = [
            Dependency::new(pkg("A"), on("B"), versions(&["1"])),
            Dependency::new(pkg("A"), on("D"), versions(&["1"])),
            Dependency::new(pkg("B"), on("C"), versions(&["1"])),
        ];
        let inst = CoreInstance::with_query(repo, deps, [(on(query), versions(&["1"]))]).unwrap();
        (inst, vec![OptionalDependency::new(pkg("B"), on("D"), versions(&["1"]))])
    }

    /// The unique smallest resolution.
    fn only(inst: &CoreInstance) -> Resolution {
        let all = Oracle::default().enumerate(inst).unwrap();
        let least = all.iter().map(Resolution::len).min().unwrap();
        let mut smallest = all.into_iter().filter(|s| s.len() == least);
        let s = smallest.next().unwrap();
        assert!(smallest.next().is_none());
        s
    }

    #[test]
    fn query_b() {
        let (inst, opt) = example("B");
        let s = only(&inst);
        assert_eq!(s, [Package::root(), pkg("B"), pkg("C")].into_iter().collect());
        let g = build_graph(&inst, &opt, &s, false).unwrap();
        assert_eq!(g.edges(), &BTreeSet::from([(pkg("B"), pkg("C"))]));
        assert_eq!(build_graph(&inst, &opt, &s, true).unwrap().edges().len(), 2);
    }

    #[test]
    fn query_a() {
        let (inst, opt) = example("A");
        let s = only(&inst);
        let g = build_graph(&inst, &opt, &s, true).unwrap();
        assert!(g.has_edge(&pkg("B"), &pkg("D")));
        let order = g.topo_order().unwrap();
        let at = |p: &Package| order.iter().position(|q| q == p).unwrap();
        for (p, q) in g.edges() {
            assert!(at(q) < at(p), "{q} should precede {p}");
        }
        assert_eq!(order.last(), Some(&Package::root()));
    }

    #[test]
    fn chain_and_cycle() {
        let repo: Repository = ["X", "Y", "Z"].iter().map(|n| pkg(n)).collect();
        let chain = CoreInstance::new(
            repo.clone(),
            [Dependency::new(pkg("X"), on("Y"), versions(&["1"])), Dependency::new(pkg("Y"), on("Z"), versions(&["1"]))],
            pkg("X"),
        )
        .unwrap();
        let s: Resolution = [pkg("X"), pkg("Y"), pkg("Z")].into_iter().collect();
        let g = build_graph(&chain, &[], &s, true).unwrap();
        assert_eq!(g.topo_order().unwrap(), vec![pkg("Z"), pkg("Y"), pkg("X")]);
        let cyclic = CoreInstance::new(
            repo,
            [Dependency::new(pkg("X"), on("Y"), versions(&["1"])), Dependency::new(pkg("Y"), on("X"), versions(&["1"]))],
            pkg("X"),
        )
        .unwrap();
        let s: Resolution = [pkg("X"), pkg("Y")].into_iter().collect();
        let report = build_graph(&cyclic, &[], &s, true).unwrap().topo_order().unwrap_err();
        assert_eq!(report.packages, vec![pkg("X"), pkg("Y")]);
    }

    #[test]
    fn dot_lists_every_edge() {
        let (inst, opt) = example("A");
        let g = build_graph(&inst, &opt, &only(&inst), false).unwrap();
        let dot = g.to_dot();
        assert_eq!(dot.matches(" -> ").count(), g.edges().len());
        assert!(dot.contains("label=\"B 1\""));
    }
}
