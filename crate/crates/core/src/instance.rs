//! Weighted CNF instances, Boolean and three-valued assignments, and the
//! cover predicates built on top of them.
//!
//! Variables take values in `{-1, +1}` ([`Spin`]). A clause member records
//! the value that *satisfies* the clause; the opposite value violates it.
//! Three-valued assignments add the "don't care" state `*` ([`ExtValue::Star`]).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type VarId = usize;
pub type ClauseId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("clause {clause}: variable {var} out of range (num_vars = {num_vars})")]
    VarOutOfRange {
        clause: ClauseId,
        var: VarId,
        num_vars: usize,
    },
    #[error("clause {clause}: variable {var} appears more than once")]
    DuplicateVar { clause: ClauseId, var: VarId },
    #[error("clause {clause}: weight {weight} must be positive and finite")]
    BadWeight { clause: ClauseId, weight: f64 },
    #[error("clause {0} has no literals")]
    EmptyClause(ClauseId),
    #[error("assignment has length {got}, instance has {expected} variables")]
    LengthMismatch { expected: usize, got: usize },
    #[error("variable {var} does not occur in clause {clause}")]
    NotAMember { var: VarId, clause: ClauseId },
}

/// A Boolean value in the `{-1, +1}` convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spin {
    Minus,
    Plus,
}

impl Spin {
    pub fn from_sign(v: i64) -> Spin {
        if v < 0 {
            Spin::Minus
        } else {
            Spin::Plus
        }
    }

    pub fn from_bool(b: bool) -> Spin {
        if b {
            Spin::Plus
        } else {
            Spin::Minus
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Spin::Minus => -1,
            Spin::Plus => 1,
        }
    }

    pub fn flip(self) -> Spin {
        match self {
            Spin::Minus => Spin::Plus,
            Spin::Plus => Spin::Minus,
        }
    }
}

/// A value of a three-valued (cover) assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExtValue {
    Minus,
    Plus,
    Star,
}

impl ExtValue {
    pub fn spin(self) -> Option<Spin> {
        match self {
            ExtValue::Minus => Some(Spin::Minus),
            ExtValue::Plus => Some(Spin::Plus),
            ExtValue::Star => None,
        }
    }

    pub fn is(self, s: Spin) -> bool {
        self.spin() == Some(s)
    }
}

impl From<Spin> for ExtValue {
    fn from(s: Spin) -> Self {
        match s {
            Spin::Minus => ExtValue::Minus,
            Spin::Plus => ExtValue::Plus,
        }
    }
}

impl fmt::Display for ExtValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExtValue::Minus => "-1",
            ExtValue::Plus => "+1",
            ExtValue::Star => "*",
        })
    }
}

/// Occurrence of a variable in a clause.
///
/// `sat` is the value of the variable that satisfies the clause. A positive
/// DIMACS literal has `sat = Plus`; the coupling `J` of the energy function is
/// `-sat`, i.e. the violating value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: VarId,
    pub sat: Spin,
}

impl Literal {
    pub fn new(var: VarId, sat: Spin) -> Self {
        Literal { var, sat }
    }

    pub fn positive(var: VarId) -> Self {
        Literal::new(var, Spin::Plus)
    }

    pub fn negative(var: VarId) -> Self {
        Literal::new(var, Spin::Minus)
    }

    /// The value that violates the clause (the coupling `J`).
    pub fn violating(self) -> Spin {
        self.sat.flip()
    }

    pub fn coupling(self) -> i8 {
        self.violating().value()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub literals: Vec<Literal>,
    pub weight: f64,
}

impl Clause {
    pub fn new(literals: Vec<Literal>, weight: f64) -> Self {
        Clause { literals, weight }
    }

    pub fn unweighted(literals: Vec<Literal>) -> Self {
        Clause::new(literals, 1.0)
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn position(&self, var: VarId) -> Option<usize> {
        self.literals.iter().position(|l| l.var == var)
    }

    pub fn is_satisfied_by(&self, x: &[Spin]) -> bool {
        self.literals.iter().any(|l| x[l.var] == l.sat)
    }
}

/// One occurrence of a variable: clause id and the position inside the clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Occurrence {
    pub clause: ClauseId,
    pub pos: usize,
}

/// Adjacency of a single variable, split by the satisfying value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarAdjacency {
    /// Clauses satisfied by `+1` (positive literal): `V+(i)`.
    pub plus: Vec<Occurrence>,
    /// Clauses satisfied by `-1` (negative literal): `V-(i)`.
    pub minus: Vec<Occurrence>,
}

impl VarAdjacency {
    pub fn by_sat(&self, s: Spin) -> &[Occurrence] {
        match s {
            Spin::Plus => &self.plus,
            Spin::Minus => &self.minus,
        }
    }

    pub fn degree(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Occurrence> {
        self.plus.iter().chain(self.minus.iter())
    }
}

/// A weighted CNF formula. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    num_vars: usize,
    clauses: Vec<Clause>,
    adjacency: Vec<VarAdjacency>,
}

impl Instance {
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self, InstanceError> {
        let mut adjacency = vec![VarAdjacency::default(); num_vars];
        for (cid, clause) in clauses.iter().enumerate() {
            if clause.literals.is_empty() {
                return Err(InstanceError::EmptyClause(cid));
            }
            if !(clause.weight.is_finite() && clause.weight > 0.0) {
                return Err(InstanceError::BadWeight {
                    clause: cid,
                    weight: clause.weight,
                });
            }
            for (pos, lit) in clause.literals.iter().enumerate() {
                if lit.var >= num_vars {
                    return Err(InstanceError::VarOutOfRange {
                        clause: cid,
                        var: lit.var,
                        num_vars,
                    });
                }
                if clause.literals[..pos].iter().any(|l| l.var == lit.var) {
                    return Err(InstanceError::DuplicateVar {
                        clause: cid,
                        var: lit.var,
                    });
                }
                let occ = Occurrence { clause: cid, pos };
                match lit.sat {
                    Spin::Plus => adjacency[lit.var].plus.push(occ),
                    Spin::Minus => adjacency[lit.var].minus.push(occ),
                }
            }
        }
        Ok(Instance {
            num_vars,
            clauses,
            adjacency,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn clause(&self, c: ClauseId) -> &Clause {
        &self.clauses[c]
    }

    pub fn adjacency(&self, v: VarId) -> &VarAdjacency {
        &self.adjacency[v]
    }

    pub fn num_edges(&self) -> usize {
        self.clauses.iter().map(Clause::len).sum()
    }

    /// Start of each clause's edges in a clause-major edge numbering; the
    /// last entry is the number of edges.
    pub fn edge_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.clauses.len() + 1);
        let mut acc = 0;
        out.push(0);
        for c in &self.clauses {
            acc += c.len();
            out.push(acc);
        }
        out
    }

    pub fn total_weight(&self) -> f64 {
        self.clauses.iter().map(|c| c.weight).fold(0.0, |a, w| a + w)
    }

    /// True when every clause weight is exactly 1.
    pub fn is_unweighted(&self) -> bool {
        self.clauses.iter().all(|c| c.weight == 1.0)
    }

    /// Same clauses with every weight replaced by 1.
    pub fn unweighted(&self) -> Instance {
        Instance {
            num_vars: self.num_vars,
            clauses: self
                .clauses
                .iter()
                .map(|c| Clause::unweighted(c.literals.clone()))
                .collect(),
            adjacency: self.adjacency.clone(),
        }
    }

    /// A 64-bit content hash, stable across platforms and runs.
    pub fn fingerprint(&self) -> u64 {
        let mut h = crate::rng::mix64(self.num_vars as u64 ^ 0x5151_7e57);
        for c in &self.clauses {
            h = crate::rng::mix64(h ^ c.weight.to_bits());
            for l in &c.literals {
                let code = ((l.var as u64) << 1) | (l.sat == Spin::Plus) as u64;
                h = crate::rng::mix64(h.wrapping_add(code));
            }
            h = crate::rng::mix64(h ^ 0xc1a0);
        }
        h
    }

    fn check_len(&self, len: usize) -> Result<(), InstanceError> {
        if len != self.num_vars {
            return Err(InstanceError::LengthMismatch {
                expected: self.num_vars,
                got: len,
            });
        }
        Ok(())
    }

    /// Total weight of clauses violated by `x`.
    pub fn energy(&self, x: &Assignment) -> Result<f64, InstanceError> {
        self.check_len(x.len())?;
        Ok(self.energy_of(x.values()))
    }

    /// Unchecked energy on a raw slice; `x.len()` must equal `num_vars`.
    pub fn energy_of(&self, x: &[Spin]) -> f64 {
        self.clauses
            .iter()
            .filter(|c| !c.is_satisfied_by(x))
            .map(|c| c.weight)
            .fold(0.0, |a, w| a + w)
    }

    pub fn violated_clauses(&self, x: &[Spin]) -> Vec<ClauseId> {
        (0..self.clauses.len())
            .filter(|&c| !self.clauses[c].is_satisfied_by(x))
            .collect()
    }

    /// Satisfied / violated / invalid status of a clause under a three-valued assignment.
    pub fn clause_status(&self, c: ClauseId, x: &ExtendedAssignment) -> ClauseStatus {
        status_of(&self.clauses[c], x.values())
    }

    /// Whether `v` is the unique satisfying variable of clause `c` under `x`.
    pub fn is_constrained(
        &self,
        v: VarId,
        c: ClauseId,
        x: &ExtendedAssignment,
    ) -> Result<bool, InstanceError> {
        let clause = &self.clauses[c];
        let pos = clause
            .position(v)
            .ok_or(InstanceError::NotAMember { var: v, clause: c })?;
        Ok(constrains(clause, pos, x.values()))
    }

    /// The clauses constraining each variable under `x`.
    pub fn parent_sets(&self, x: &ExtendedAssignment) -> ParentSets {
        let xs = x.values();
        let sets = (0..self.num_vars)
            .map(|v| {
                let mut p: Vec<ClauseId> = self.adjacency[v]
                    .iter()
                    .filter(|o| constrains(&self.clauses[o.clause], o.pos, xs))
                    .map(|o| o.clause)
                    .collect();
                p.sort_unstable();
                p
            })
            .collect();
        ParentSets { sets }
    }

    /// Every admissible parent set of variable `v`: any subset of `V+(v)` or
    /// any subset of `V-(v)` (the empty set counted once).
    pub fn admissible_parent_sets(&self, v: VarId) -> Vec<Vec<ClauseId>> {
        let adj = &self.adjacency[v];
        let mut out = vec![Vec::new()];
        for side in [&adj.plus, &adj.minus] {
            assert!(side.len() < 63, "variable {v} has too many occurrences");
            for mask in 1u64..(1u64 << side.len()) {
                out.push(
                    side.iter()
                        .enumerate()
                        .filter(|(k, _)| mask >> k & 1 == 1)
                        .map(|(_, o)| o.clause)
                        .collect(),
                );
            }
        }
        out
    }

    /// Classifies `x` as invalid, a non-cover, or a v-cover, using the
    /// violation-supported reading (see [`CoverSemantics`]).
    pub fn classify_cover(&self, x: &ExtendedAssignment) -> CoverClass {
        self.classify_cover_with(x, CoverSemantics::ViolationSupported)
    }

    pub fn classify_cover_with(&self, x: &ExtendedAssignment, sem: CoverSemantics) -> CoverClass {
        let xs = x.values();
        let mut violated = vec![false; self.clauses.len()];
        let mut v = 0.0;
        for (c, clause) in self.clauses.iter().enumerate() {
            match status_of(clause, xs) {
                ClauseStatus::Invalid => return CoverClass::NotValid,
                ClauseStatus::Violated => {
                    violated[c] = true;
                    v += clause.weight;
                }
                ClauseStatus::Satisfied => {}
            }
        }
        for (i, &xi) in xs.iter().enumerate() {
            if xi == ExtValue::Star {
                continue;
            }
            let adj = &self.adjacency[i];
            let constrained = adj
                .iter()
                .any(|o| constrains(&self.clauses[o.clause], o.pos, xs));
            let supported = constrained
                || (sem == CoverSemantics::ViolationSupported
                    && adj.iter().any(|o| violated[o.clause]));
            if !supported {
                return CoverClass::NotCover;
            }
        }
        CoverClass::VCover(v)
    }

    /// Replaces by `*` every `±1` variable that is the unique satisfier of no
    /// clause and occurs in no violated clause, scanning in ascending index
    /// order until nothing changes.
    pub fn peel(&self, x: &Assignment) -> ExtendedAssignment {
        assert_eq!(x.len(), self.num_vars, "assignment length mismatch");
        let mut ext: Vec<ExtValue> = x.values().iter().map(|&s| s.into()).collect();
        let mut pending: BTreeSet<VarId> = (0..self.num_vars).collect();
        let mut cursor = 0;
        loop {
            let next = pending
                .range(cursor..)
                .next()
                .or_else(|| pending.iter().next())
                .copied();
            let Some(v) = next else { break };
            pending.remove(&v);
            cursor = v + 1;
            if self.peelable(v, &ext) {
                ext[v] = ExtValue::Star;
                for o in self.adjacency[v].iter() {
                    for l in &self.clauses[o.clause].literals {
                        if l.var != v && ext[l.var] != ExtValue::Star {
                            pending.insert(l.var);
                        }
                    }
                }
            }
        }
        ExtendedAssignment(ext)
    }

    fn peelable(&self, v: VarId, xs: &[ExtValue]) -> bool {
        xs[v] != ExtValue::Star
            && self.adjacency[v].iter().all(|o| {
                let clause = &self.clauses[o.clause];
                status_of(clause, xs) != ClauseStatus::Violated && !constrains(clause, o.pos, xs)
            })
    }

    /// Fixes some variables and returns the reduced instance over the rest.
    ///
    /// Clauses satisfied by a fix are dropped, violating fixed literals are
    /// removed, and clauses that lose all literals contribute their weight to
    /// the offset.
    pub fn simplify(&self, fixes: &BTreeMap<VarId, Spin>) -> Reduction {
        let mut new_id = vec![usize::MAX; self.num_vars];
        let mut var_map = Vec::with_capacity(self.num_vars - fixes.len().min(self.num_vars));
        for v in 0..self.num_vars {
            if !fixes.contains_key(&v) {
                new_id[v] = var_map.len();
                var_map.push(v);
            }
        }
        let mut clauses = Vec::new();
        let mut clause_map = Vec::new();
        let mut offset = 0.0;
        'outer: for (cid, clause) in self.clauses.iter().enumerate() {
            let mut lits = Vec::with_capacity(clause.len());
            for l in &clause.literals {
                match fixes.get(&l.var) {
                    Some(&s) if s == l.sat => continue 'outer,
                    Some(_) => {}
                    None => lits.push(Literal::new(new_id[l.var], l.sat)),
                }
            }
            if lits.is_empty() {
                offset += clause.weight;
            } else {
                clauses.push(Clause::new(lits, clause.weight));
                clause_map.push(cid);
            }
        }
        let instance = Instance::new(var_map.len(), clauses)
            .expect("reduction of a valid instance is valid");
        Reduction {
            instance,
            offset,
            var_map,
            clause_map,
        }
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} variables, {} clauses, total weight {}",
            self.num_vars,
            self.clauses.len(),
            self.total_weight()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseStatus {
    Satisfied,
    Violated,
    Invalid,
}

pub(crate) fn status_of(clause: &Clause, xs: &[ExtValue]) -> ClauseStatus {
    let mut stars = 0;
    for l in &clause.literals {
        match xs[l.var] {
            ExtValue::Star => stars += 1,
            v if v.is(l.sat) => return ClauseStatus::Satisfied,
            _ => {}
        }
    }
    match stars {
        0 => ClauseStatus::Violated,
        1 => ClauseStatus::Invalid,
        _ => ClauseStatus::Satisfied,
    }
}

/// Literal at `pos` takes its satisfying value and every other literal its violating value.
pub(crate) fn constrains(clause: &Clause, pos: usize, xs: &[ExtValue]) -> bool {
    clause.literals.iter().enumerate().all(|(k, l)| {
        if k == pos {
            xs[l.var].is(l.sat)
        } else {
            xs[l.var].is(l.violating())
        }
    })
}

/// Which `±1` variables a v-cover may contain.
///
/// `Strict` requires every `±1` variable to be constrained by some clause,
/// which is exactly the support of the extended factor graph. The
/// `ViolationSupported` reading additionally accepts `±1` variables that occur
/// in a violated clause, since such variables can never be set to `*`; it is
/// the fixpoint condition of [`Instance::peel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CoverSemantics {
    Strict,
    #[default]
    ViolationSupported,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoverClass {
    NotValid,
    NotCover,
    VCover(f64),
}

/// Per-variable parent sets; each set is sorted by clause id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentSets {
    pub sets: Vec<Vec<ClauseId>>,
}

impl ParentSets {
    pub fn of(&self, v: VarId) -> &[ClauseId] {
        &self.sets[v]
    }
}

/// A full Boolean assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment(Vec<Spin>);

impl Assignment {
    pub fn new(values: Vec<Spin>) -> Self {
        Assignment(values)
    }

    pub fn all(n: usize, s: Spin) -> Self {
        Assignment(vec![s; n])
    }

    /// Assignment number `index` in lexicographic order with `-1 < +1`, the
    /// first variable being the most significant digit.
    pub fn from_index(n: usize, index: u64) -> Self {
        Assignment(
            (0..n)
                .map(|i| Spin::from_bool(index >> (n - 1 - i) & 1 == 1))
                .collect(),
        )
    }

    pub fn values(&self) -> &[Spin] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [Spin] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, v: VarId) -> Spin {
        self.0[v]
    }

    pub fn into_inner(self) -> Vec<Spin> {
        self.0
    }

    /// DIMACS-style signed literals, 1-based.
    pub fn to_dimacs_literals(&self) -> Vec<i64> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, s)| (i as i64 + 1) * s.value() as i64)
            .collect()
    }
}

/// A three-valued assignment over `{-1, +1, *}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExtendedAssignment(Vec<ExtValue>);

impl ExtendedAssignment {
    pub fn new(values: Vec<ExtValue>) -> Self {
        ExtendedAssignment(values)
    }

    pub fn all_star(n: usize) -> Self {
        ExtendedAssignment(vec![ExtValue::Star; n])
    }

    /// Configuration number `index` in base 3 with digits `(-1, +1, *)`,
    /// first variable most significant.
    pub fn from_index(n: usize, mut index: u64) -> Self {
        let mut v = vec![ExtValue::Star; n];
        for slot in v.iter_mut().rev() {
            *slot = match index % 3 {
                0 => ExtValue::Minus,
                1 => ExtValue::Plus,
                _ => ExtValue::Star,
            };
            index /= 3;
        }
        ExtendedAssignment(v)
    }

    pub fn values(&self) -> &[ExtValue] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, v: VarId) -> ExtValue {
        self.0[v]
    }

    pub fn count_stars(&self) -> usize {
        self.0.iter().filter(|&&v| v == ExtValue::Star).count()
    }
}

impl From<&Assignment> for ExtendedAssignment {
    fn from(a: &Assignment) -> Self {
        ExtendedAssignment(a.values().iter().map(|&s| s.into()).collect())
    }
}

impl fmt::Display for ExtendedAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// `x <= y` in the cover lattice: every coordinate agrees, or `x` has `*`
/// where `y` has a Boolean value.
pub fn leq(x: &ExtendedAssignment, y: &ExtendedAssignment) -> Result<bool, InstanceError> {
    if x.len() != y.len() {
        return Err(InstanceError::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(x
        .values()
        .iter()
        .zip(y.values())
        .all(|(&a, &b)| a == b || (a == ExtValue::Star && b != ExtValue::Star)))
}

/// Result of [`Instance::simplify`].
#[derive(Debug, Clone)]
pub struct Reduction {
    pub instance: Instance,
    /// Weight of clauses emptied by the fixes.
    pub offset: f64,
    /// Reduced variable id -> original variable id.
    pub var_map: Vec<VarId>,
    /// Reduced clause id -> original clause id.
    pub clause_map: Vec<ClauseId>,
}

impl Reduction {
    /// Combines the fixes with an assignment of the reduced variables.
    pub fn lift(&self, fixes: &BTreeMap<VarId, Spin>, reduced: &[Spin]) -> Assignment {
        let n = self.var_map.len() + fixes.len();
        let mut out = vec![Spin::Plus; n];
        for (&v, &s) in fixes {
            out[v] = s;
        }
        for (r, &v) in self.var_map.iter().enumerate() {
            out[v] = reduced[r];
        }
        Assignment(out)
    }
}

/// The weighted instance of the running example: three variables and six
/// clauses `(!x1 | x2)`, `(!x2 | x3)`, `(!x3 | x1)`, `(!x1 | !x2 | !x3)`,
/// `(x1 | x2 | x3)`, `(x1 | x2)` with weights 1..=6.
pub fn example_weighted() -> Instance {
    example_with_weights([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
}

/// The same six clauses with unit weights.
pub fn example_unweighted() -> Instance {
    example_with_weights([1.0; 6])
}

fn example_with_weights(w: [f64; 6]) -> Instance {
    use Literal as L;
    let clauses = vec![
        vec![L::negative(0), L::positive(1)],
        vec![L::negative(1), L::positive(2)],
        vec![L::negative(2), L::positive(0)],
        vec![L::negative(0), L::negative(1), L::negative(2)],
        vec![L::positive(0), L::positive(1), L::positive(2)],
        vec![L::positive(0), L::positive(1)],
    ];
    Instance::new(
        3,
        clauses
            .into_iter()
            .zip(w)
            .map(|(l, w)| Clause::new(l, w))
            .collect(),
    )
    .expect("example instance is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ExtValue::{Minus as M, Plus as P, Star as S};

    fn ext(v: &[ExtValue]) -> ExtendedAssignment {
        ExtendedAssignment::new(v.to_vec())
    }

    fn spins(v: &[i8]) -> Assignment {
        Assignment::new(v.iter().map(|&s| Spin::from_sign(s as i64)).collect())
    }

    #[test]
    fn satisfied_energy_is_positive_zero() {
        let inst = Instance::new(1, vec![Clause::new(vec![Literal::positive(0)], 3.0)]).unwrap();
        let e = inst.energy_of(&[Spin::Plus]);
        assert!(e == 0.0 && e.is_sign_positive());
        assert!(Instance::new(2, vec![]).unwrap().total_weight().is_sign_positive());
    }

    #[test]
    fn energy_table_of_weighted_example() {
        let inst = example_weighted();
        let cases: [([i8; 3], f64); 8] = [
            ([-1, -1, -1], 11.0),
            ([-1, -1, 1], 9.0),
            ([-1, 1, -1], 2.0),
            ([-1, 1, 1], 3.0),
            ([1, -1, -1], 1.0),
            ([1, -1, 1], 1.0),
            ([1, 1, -1], 2.0),
            ([1, 1, 1], 4.0),
        ];
        for (x, e) in cases {
            assert_eq!(inst.energy(&spins(&x)).unwrap(), e, "x = {x:?}");
        }
    }

    #[test]
    fn energy_of_empty_instance_is_zero() {
        let inst = Instance::new(4, vec![]).unwrap();
        assert_eq!(inst.energy(&Assignment::all(4, Spin::Minus)).unwrap(), 0.0);
    }

    #[test]
    fn energy_rejects_wrong_length() {
        let inst = example_weighted();
        assert!(matches!(
            inst.energy(&Assignment::all(2, Spin::Plus)),
            Err(InstanceError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn construction_rejects_malformed_clauses() {
        let dup = Clause::unweighted(vec![Literal::positive(0), Literal::negative(0)]);
        assert!(matches!(
            Instance::new(1, vec![dup]),
            Err(InstanceError::DuplicateVar { .. })
        ));
        let zero = Clause::new(vec![Literal::positive(0)], 0.0);
        assert!(matches!(
            Instance::new(1, vec![zero]),
            Err(InstanceError::BadWeight { .. })
        ));
        let out = Clause::unweighted(vec![Literal::positive(3)]);
        assert!(matches!(
            Instance::new(2, vec![out]),
            Err(InstanceError::VarOutOfRange { .. })
        ));
        assert!(matches!(
            Instance::new(2, vec![Clause::unweighted(vec![])]),
            Err(InstanceError::EmptyClause(0))
        ));
    }

    #[test]
    fn adjacency_of_example() {
        let inst = example_unweighted();
        let ids = |o: &[Occurrence]| o.iter().map(|o| o.clause).collect::<Vec<_>>();
        // V+(x1) = {b3, b5, b6}, V-(x1) = {b1, b4} (0-based ids)
        assert_eq!(ids(&inst.adjacency(0).plus), vec![2, 4, 5]);
        assert_eq!(ids(&inst.adjacency(0).minus), vec![0, 3]);
    }

    #[test]
    fn clause_status_cases() {
        let inst = example_weighted();
        // b6 = (x1 | x2) with x1 = *, x2 = -1
        assert_eq!(inst.clause_status(5, &ext(&[S, M, M])), ClauseStatus::Invalid);
        // b4 with x2 = -1 satisfying it
        assert_eq!(inst.clause_status(3, &ext(&[P, M, S])), ClauseStatus::Satisfied);
        assert_eq!(inst.clause_status(3, &ext(&[S, S, S])), ClauseStatus::Satisfied);
        assert_eq!(inst.clause_status(0, &ext(&[P, M, S])), ClauseStatus::Violated);
    }

    #[test]
    fn constrained_and_parent_sets() {
        let inst = example_weighted();
        let x = ext(&[P, M, M]);
        assert!(inst.is_constrained(0, 4, &x).unwrap());
        for o in inst.adjacency(2).iter() {
            assert!(!inst.is_constrained(2, o.clause, &x).unwrap());
        }
        // x1 = +1 violates b1
        assert!(!inst.is_constrained(0, 0, &x).unwrap());
        assert!(matches!(
            inst.is_constrained(2, 0, &x),
            Err(InstanceError::NotAMember { .. })
        ));
        let p = inst.parent_sets(&x);
        assert_eq!(p.of(0), &[4, 5]);
        assert_eq!(p.of(1), &[1]);
        assert!(p.of(2).is_empty());

        let stars = inst.parent_sets(&ExtendedAssignment::all_star(3));
        assert!(stars.sets.iter().all(Vec::is_empty));

        let unit = Instance::new(1, vec![Clause::unweighted(vec![Literal::positive(0)])]).unwrap();
        assert_eq!(unit.parent_sets(&ext(&[P])).of(0), &[0]);
    }

    #[test]
    fn classify_cover_cases() {
        let inst = example_weighted();
        assert_eq!(inst.classify_cover(&ext(&[P, M, S])), CoverClass::VCover(1.0));
        assert_eq!(inst.classify_cover(&ext(&[P, M, M])), CoverClass::NotCover);
        assert_eq!(inst.classify_cover(&ext(&[S, M, M])), CoverClass::NotValid);
        // x2 loses its only constraining clauses once x3 = *, so the strict
        // reading rejects the configuration
        assert_eq!(
            inst.classify_cover_with(&ext(&[P, M, S]), CoverSemantics::Strict),
            CoverClass::NotCover
        );
        assert_eq!(
            inst.classify_cover_with(&ext(&[M, M, M]), CoverSemantics::Strict),
            CoverClass::VCover(11.0)
        );
    }

    #[test]
    fn peel_example_solution() {
        let inst = example_weighted();
        assert_eq!(inst.peel(&spins(&[1, -1, -1])), ext(&[P, M, S]));
    }

    #[test]
    fn peel_keeps_fully_constrained_assignment() {
        // (x1 | x2), (!x1 | x2), (x1 | !x2): (+1, +1) satisfies all, each var constrained
        let inst = Instance::new(
            2,
            vec![
                Clause::unweighted(vec![Literal::negative(0), Literal::positive(1)]),
                Clause::unweighted(vec![Literal::positive(0), Literal::negative(1)]),
            ],
        )
        .unwrap();
        let x = spins(&[1, 1]);
        assert_eq!(inst.peel(&x), ExtendedAssignment::from(&x));
    }

    #[test]
    fn leq_cases() {
        assert!(leq(&ext(&[P, M, S]), &ext(&[P, M, M])).unwrap());
        assert!(leq(&ext(&[P, S]), &ext(&[P, S])).unwrap());
        assert!(!leq(&ext(&[P, S]), &ext(&[M, P])).unwrap());
        assert!(!leq(&ext(&[P, M]), &ext(&[P, S])).unwrap());
        assert!(leq(&ext(&[P]), &ext(&[P, S])).is_err());
    }

    #[test]
    fn parent_set_count_formula() {
        let inst = example_unweighted();
        for v in 0..3 {
            let a = inst.adjacency(v);
            let expected = (1usize << a.plus.len()) + (1usize << a.minus.len()) - 1;
            assert_eq!(inst.admissible_parent_sets(v).len(), expected);
        }
    }

    #[test]
    fn simplify_trivial_cases() {
        let inst = example_weighted();
        let none = inst.simplify(&BTreeMap::new());
        assert_eq!(none.instance, inst);
        assert_eq!(none.offset, 0.0);

        let x = spins(&[-1, 1, 1]);
        let all: BTreeMap<_, _> = x.values().iter().copied().enumerate().collect();
        let red = inst.simplify(&all);
        assert_eq!(red.instance.num_vars(), 0);
        assert_eq!(red.instance.num_clauses(), 0);
        assert_eq!(red.offset, inst.energy(&x).unwrap());
    }

    #[test]
    fn simplify_example_partial_fix() {
        let inst = example_weighted();
        let fixes = BTreeMap::from([(0, Spin::Plus), (1, Spin::Minus)]);
        let red = inst.simplify(&fixes);
        assert_eq!(red.var_map, vec![2]);
        assert_eq!(red.offset, 1.0);
        for s in [Spin::Minus, Spin::Plus] {
            let full = red.lift(&fixes, &[s]);
            assert_eq!(
                inst.energy(&full).unwrap(),
                red.offset + red.instance.energy_of(&[s])
            );
        }
    }

    #[test]
    fn index_round_trips() {
        assert_eq!(Assignment::from_index(3, 0b101), spins(&[1, -1, 1]));
        assert_eq!(ExtendedAssignment::from_index(2, 5), ext(&[P, S]));
    }
}
