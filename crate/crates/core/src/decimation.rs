//! Bookkeeping shared by the decimation drivers: the set of fixed variables,
//! the instance they reduce to, per-round records and the local-search
//! completion.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::instance::{Assignment, ClauseId, Instance, Reduction, Spin, VarId};
use crate::localsearch::{walksat, WalkSatConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub y: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub fixed: usize,
    pub unfixed: usize,
    /// Unfixed variables after the round.
    pub remaining: usize,
}

/// Why decimation stopped and local search took over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Handoff {
    AllFixed,
    NoClausesLeft,
    NonConvergence,
    /// Surveys or biases carry no information.
    Paramagnetic,
    NoQualifyingVariable,
    YFloor,
    RoundLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecimationOutcome {
    pub assignment: Assignment,
    /// Energy of `assignment` on the original instance.
    pub energy: f64,
    pub rounds: Vec<RoundRecord>,
    /// Variables fixed by message passing when local search took over.
    pub fixed_by_decimation: usize,
    pub handoff: Handoff,
    /// Some fixes left a clause with no free literal and no satisfied one.
    pub contradiction: bool,
    pub walksat_flips: u64,
}

/// Fixes over an original instance together with the reduced instance.
#[derive(Debug, Clone)]
pub struct Decimation<'a> {
    original: &'a Instance,
    fixes: BTreeMap<VarId, Spin>,
    reduction: Reduction,
    /// Original variable -> reduced id, `usize::MAX` when fixed.
    reduced_var: Vec<usize>,
    /// Original clause -> reduced id, `usize::MAX` when gone.
    reduced_clause: Vec<usize>,
}

impl<'a> Decimation<'a> {
    pub fn new(original: &'a Instance) -> Self {
        let mut d = Decimation {
            original,
            fixes: BTreeMap::new(),
            reduction: original.simplify(&BTreeMap::new()),
            reduced_var: Vec::new(),
            reduced_clause: Vec::new(),
        };
        d.rebuild();
        d
    }

    fn rebuild(&mut self) {
        self.reduction = self.original.simplify(&self.fixes);
        self.reduced_var = vec![usize::MAX; self.original.num_vars()];
        for (r, &v) in self.reduction.var_map.iter().enumerate() {
            self.reduced_var[v] = r;
        }
        self.reduced_clause = vec![usize::MAX; self.original.num_clauses()];
        for (r, &c) in self.reduction.clause_map.iter().enumerate() {
            self.reduced_clause[c] = r;
        }
    }

    pub fn original(&self) -> &'a Instance {
        self.original
    }

    pub fn reduced(&self) -> &Instance {
        &self.reduction.instance
    }

    pub fn reduction(&self) -> &Reduction {
        &self.reduction
    }

    pub fn fixes(&self) -> &BTreeMap<VarId, Spin> {
        &self.fixes
    }

    pub fn num_fixed(&self) -> usize {
        self.fixes.len()
    }

    pub fn remaining(&self) -> usize {
        self.reduction.var_map.len()
    }

    /// Weight of clauses the fixes have violated outright.
    pub fn offset(&self) -> f64 {
        self.reduction.offset
    }

    pub fn original_var(&self, reduced: VarId) -> VarId {
        self.reduction.var_map[reduced]
    }

    pub fn original_clause(&self, reduced: ClauseId) -> ClauseId {
        self.reduction.clause_map[reduced]
    }

    pub fn reduced_var(&self, original: VarId) -> Option<VarId> {
        Some(self.reduced_var[original]).filter(|&r| r != usize::MAX)
    }

    pub fn reduced_clause(&self, original: ClauseId) -> Option<ClauseId> {
        Some(self.reduced_clause[original]).filter(|&r| r != usize::MAX)
    }

    /// Original (clause, variable) of an edge of the reduced instance.
    pub fn edge_key(&self, c: ClauseId, pos: usize) -> (ClauseId, VarId) {
        let lit = self.reduction.instance.clause(c).literals[pos];
        (self.original_clause(c), self.original_var(lit.var))
    }

    /// Fixes variables given by original id.
    pub fn fix(&mut self, fixes: &[(VarId, Spin)]) {
        for &(v, s) in fixes {
            self.fixes.insert(v, s);
        }
        self.rebuild();
    }

    pub fn unfix(&mut self, vars: &[VarId]) {
        for v in vars {
            self.fixes.remove(v);
        }
        self.rebuild();
    }

    /// Completes the fixes with weighted WalkSAT on the reduced instance,
    /// seeded from the reduced instance's content.
    pub fn complete(&self, ws: &WalkSatConfig) -> (Assignment, f64, u64) {
        let (values, flips) = if self.reduced().num_clauses() == 0 {
            (vec![Spin::Plus; self.remaining()], 0)
        } else {
            let r = walksat(self.reduced(), &ws.seeded_for(self.reduced()));
            (r.best.into_inner(), r.flips)
        };
        let a = self.reduction.lift(&self.fixes, &values);
        let e = self.original.energy_of(a.values());
        (a, e, flips)
    }

    /// Builds the final outcome after handing off to local search.
    pub fn finish(
        &self,
        ws: &WalkSatConfig,
        rounds: Vec<RoundRecord>,
        handoff: Handoff,
        contradiction: bool,
    ) -> DecimationOutcome {
        let (assignment, energy, walksat_flips) = self.complete(ws);
        DecimationOutcome {
            assignment,
            energy,
            rounds,
            fixed_by_decimation: self.num_fixed(),
            handoff,
            contradiction,
            walksat_flips,
        }
    }
}

/// Ranks candidates by descending score, ties by ascending id.
pub fn rank_by_score(mut scored: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}
