//! DPLL with unit propagation and chronological backtracking.
//!
//! Decision rule: take the first clause (in instance order) that is not yet
//! satisfied and set its first unassigned literal true. Variables that are
//! still unassigned once every clause is satisfied are set false.

use crate::error::{Error, Result};

use super::cnf::{CnfInstance, Lit, SatAssignment};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Solver {
    /// Give up with `LimitExceeded` after this many conflicts.
    pub max_conflicts: Option<u64>,
}

pub fn solve(cnf: &CnfInstance) -> Result<Option<SatAssignment>> {
    Solver::default().solve(cnf)
}

struct Entry {
    lit: Lit,
    decision: bool,
    flipped: bool,
}

fn slot(l: Lit) -> usize {
    l.var.0 * 2 + usize::from(l.positive)
}

impl Solver {
    pub fn solve(&self, cnf: &CnfInstance) -> Result<Option<SatAssignment>> {
        let clauses = cnf.clauses();
        let mut occurs: Vec<Vec<usize>> = vec![Vec::new(); cnf.vars().len() * 2];
        for (k, c) in clauses.iter().enumerate() {
            for &l in c {
                occurs[slot(l)].push(k);
            }
        }
        let mut state = State {
            clauses,
            occurs,
            value: vec![None; cnf.vars().len()],
            trail: Vec::new(),
            head: 0,
        };
        for c in clauses {
            match c.as_slice() {
                [] => return Ok(None),
                [l] => {
                    if !state.imply(*l) {
                        return Ok(None);
                    }
                }
                _ => {}
            }
        }
        let mut conflicts = 0u64;
        loop {
            if !state.propagate() {
                conflicts += 1;
                if self.max_conflicts.is_some_and(|m| conflicts > m) {
                    return Err(Error::LimitExceeded(format!(
                        "solver gave up after {} conflicts",
                        conflicts - 1
                    )));
                }
                if !state.backtrack() {
                    return Ok(None);
                }
                continue;
            }
            match state.next_decision() {
                Some(l) => state.push(l, true, false),
                None => {
                    let values = state.value.iter().map(|v| v.unwrap_or(false)).collect();
                    return Ok(Some(SatAssignment(values)));
                }
            }
        }
    }
}

struct State<'a> {
    clauses: &'a [Vec<Lit>],
    /// Clauses containing each literal.
    occurs: Vec<Vec<usize>>,
    value: Vec<Option<bool>>,
    trail: Vec<Entry>,
    /// Trail entries before `head` have been propagated.
    head: usize,
}

impl State<'_> {
    fn lit_value(&self, l: Lit) -> Option<bool> {
        self.value[l.var.0].map(|v| v == l.positive)
    }

    fn push(&mut self, lit: Lit, decision: bool, flipped: bool) {
        self.value[lit.var.0] = Some(lit.positive);
        self.trail.push(Entry {
            lit,
            decision,
            flipped,
        });
    }

    /// Records an implied literal; false if it contradicts the assignment.
    fn imply(&mut self, l: Lit) -> bool {
        match self.lit_value(l) {
            Some(v) => v,
            None => {
                self.push(l, false, false);
                true
            }
        }
    }

    /// Unit propagation to a fixpoint; false on conflict.
    fn propagate(&mut self) -> bool {
        while self.head < self.trail.len() {
            let falsified = self.trail[self.head].lit.negate();
            self.head += 1;
            for i in 0..self.occurs[slot(falsified)].len() {
                let k = self.occurs[slot(falsified)][i];
                let mut unassigned = None;
                let mut open = 0;
                let mut satisfied = false;
                for &l in &self.clauses[k] {
                    match self.lit_value(l) {
                        Some(true) => {
                            satisfied = true;
                            break;
                        }
                        Some(false) => {}
                        None => {
                            open += 1;
                            unassigned = Some(l);
                        }
                    }
                }
                if satisfied {
                    continue;
                }
                match (open, unassigned) {
                    (0, _) => return false,
                    (1, Some(l)) => self.push(l, false, false),
                    _ => {}
                }
            }
        }
        true
    }

    /// Undoes assignments back to the latest unflipped decision and flips it.
    fn backtrack(&mut self) -> bool {
        while let Some(e) = self.trail.pop() {
            self.value[e.lit.var.0] = None;
            if e.decision && !e.flipped {
                self.head = self.trail.len();
                self.push(e.lit.negate(), true, true);
                return true;
            }
        }
        false
    }

    fn next_decision(&self) -> Option<Lit> {
        self.clauses
            .iter()
            .find(|c| !c.iter().any(|&l| self.lit_value(l) == Some(true)))
            .and_then(|c| c.iter().copied().find(|&l| self.lit_value(l).is_none()))
    }
}
