mod common;

use std::collections::BTreeSet;

use common::*;
use pkgcalc::restricted::{
    min_bound_instance, mvs_resolve, singular_instance, singular_resolve, MinBoundDependency, MvsPolicy,
    SingularDependency,
};
use pkgcalc::sat::{encode, gen_from_3cnf, resolve, solve, Cnf};
use pkgcalc::versions::eval_formula;
use pkgcalc::{validate_resolution, Oracle, Package, Repository, Resolution, VersionSet};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand_chacha::ChaCha8Rng;

fn repo_with_root(r: &mut ChaCha8Rng) -> Repository {
    let mut repo = random_repo(r, Limits::SMALL);
    repo.insert(Package::root());
    repo
}

fn random_min_bounds(r: &mut ChaCha8Rng, repo: &Repository) -> Vec<MinBoundDependency> {
    let mut out = Vec::new();
    for p in repo.packages().collect::<Vec<_>>() {
        for (on, vs) in random_targets(r, repo, &p, 2) {
            let min = vs.iter().collect::<Vec<_>>().choose(r).map(|v| (*v).clone()).unwrap();
            out.push(MinBoundDependency::new(p.clone(), on, min));
        }
    }
    out
}

fn truth_table(cnf: &Cnf) -> bool {
    (0u32..1 << cnf.num_vars).any(|bits| {
        cnf.clauses.iter().all(|c| c.iter().any(|&l| (bits >> (l.unsigned_abs() - 1) & 1 == 1) == (l > 0)))
    })
}

fn clause_strategy(vars: i64) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec((1..=vars, any::<bool>()).prop_map(|(v, pos)| if pos { v } else { -v }), 3)
}

fn cnf_strategy() -> impl Strategy<Value = Cnf> {
    (3i64..=6).prop_flat_map(|n| {
        prop::collection::vec(clause_strategy(n), 1..=8).prop_map(move |cs| Cnf::new(n as usize, cs).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn formula_connectives_are_set_operations(seed in any::<u64>()) {
        let mut r = rng(seed);
        let repo = random_repo(&mut r, Limits::SMALL);
        let n = repo.names().next().unwrap().clone();
        let (a, b) = (random_version_formula(&mut r, 2), random_version_formula(&mut r, 2));
        let (ea, eb) = (eval_formula(&a, &n, &repo), eval_formula(&b, &n, &repo));
        let and: VersionSet = ea.intersection(&eb).cloned().collect();
        let or: VersionSet = ea.union(&eb).cloned().collect();
        prop_assert_eq!(eval_formula(&a.clone().and(b.clone()), &n, &repo), and);
        prop_assert_eq!(eval_formula(&a.clone().or(b), &n, &repo), or);
        prop_assert!(ea.is_subset(repo.versions(&n)));
        for v in repo.versions(&n) {
            prop_assert_eq!(ea.contains(v), ref_matches(&a, v));
        }
    }

    #[test]
    fn sat_resolves_exactly_when_the_oracle_finds_something(seed in any::<u64>()) {
        let inst = random_core(&mut rng(seed), Limits::SMALL);
        let any = !Oracle::default().enumerate(&inst).unwrap().is_empty();
        for ordered in [false, true] {
            let out = resolve(&inst, ordered).unwrap();
            prop_assert_eq!(out.is_resolved(), any);
            if let Some(s) = out.resolved() {
                prop_assert!(validate_resolution(&inst, &s).unwrap().is_valid());
            }
        }
    }

    #[test]
    fn ordered_encoding_keeps_satisfiability(seed in any::<u64>()) {
        let inst = random_core(&mut rng(seed), Limits::SMALL);
        let plain = solve(&encode(&inst, false)).unwrap();
        let ordered = solve(&encode(&inst, true)).unwrap();
        prop_assert_eq!(plain.is_some(), ordered.is_some());
    }

    #[test]
    fn solving_is_deterministic(seed in any::<u64>()) {
        let inst = random_core(&mut rng(seed), Limits::SMALL);
        let cnf = encode(&inst, true);
        prop_assert_eq!(solve(&cnf).unwrap(), solve(&cnf).unwrap());
        prop_assert_eq!(cnf.to_dimacs(), encode(&inst, true).to_dimacs());
    }

    #[test]
    fn three_cnf_instances_resolve_iff_satisfiable(cnf in cnf_strategy()) {
        let inst = gen_from_3cnf(&cnf).unwrap();
        let expected = truth_table(&cnf);
        prop_assert_eq!(cnf.brute_force_satisfiable(), expected);
        prop_assert_eq!(resolve(&inst, false).unwrap().is_resolved(), expected);
    }

    #[test]
    fn minimum_selection_is_below_latest(seed in any::<u64>()) {
        let mut r = rng(seed);
        let repo = repo_with_root(&mut r);
        let mdeps = random_min_bounds(&mut r, &repo);
        let root = Package::root();
        let min = mvs_resolve(&repo, &mdeps, &root, MvsPolicy::Minimum).unwrap().resolved();
        let latest = mvs_resolve(&repo, &mdeps, &root, MvsPolicy::Latest).unwrap().resolved();
        if let (Some(min), Some(latest)) = (&min, &latest) {
            for p in min.iter().filter(|p| !p.is_root()) {
                for v in latest.versions_of(&p.name) {
                    prop_assert!(ref_cmp(&p.version, v).is_le(), "{} above {}", p, v);
                }
            }
        }
        if let Some(min) = min {
            let inst = min_bound_instance(&repo, &mdeps, &root).unwrap();
            prop_assert!(core_ok(&inst, min.selected()), "{} fails closure", min);
        }
    }

    #[test]
    fn singular_resolution_matches_the_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let repo = repo_with_root(&mut r);
        let mut sdeps = Vec::new();
        for p in repo.packages().collect::<Vec<_>>() {
            for (on, vs) in random_targets(&mut r, &repo, &p, 2) {
                let v = vs.iter().collect::<Vec<_>>().choose(&mut r).map(|v| (*v).clone()).unwrap();
                sdeps.push(SingularDependency::new(p.clone(), Package::new(on, v)));
            }
        }
        let root = Package::root();
        let inst = singular_instance(&repo, &sdeps, &root).unwrap();
        let all = Oracle::default().enumerate(&inst).unwrap();
        // Singular dependencies leave no choice: the smallest resolution is the closure.
        let smallest: Option<Resolution> = all.iter().min_by_key(|s| s.len()).cloned();
        let minimal: BTreeSet<&Resolution> =
            all.iter().filter(|s| !all.iter().any(|t| t != *s && t.selected().is_subset(s.selected()))).collect();
        prop_assert!(minimal.len() <= 1);
        let got = singular_resolve(&repo, &sdeps, &root).unwrap().resolved();
        prop_assert_eq!(got, smallest);
    }
}
