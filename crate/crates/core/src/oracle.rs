//! Exhaustive ground truth for small instances: minimum energy, cover
//! enumeration, the explicit parent-set factor graph and exact marginals of
//! the cover distribution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bp::{BpError, FactorGraph, FactorId};
use crate::instance::{
    constrains, status_of, Assignment, ClauseId, ClauseStatus, CoverClass, CoverSemantics,
    ExtValue, ExtendedAssignment, Instance, Spin, VarId,
};

pub const MAX_ENERGY_VARS: usize = 24;
pub const MAX_COVER_VARS: usize = 14;
pub const MAX_LAMBDA_STATES: usize = 4096;
pub const MAX_FACTOR_ENTRIES: usize = 1 << 22;
/// How many minimizers [`brute_min_energy`] keeps.
pub const ARGMIN_KEEP: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{what}: {size} exceeds the limit of {limit}")]
    Capacity {
        what: &'static str,
        size: f64,
        limit: f64,
    },
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("the distribution has no mass")]
    NoMass,
    #[error(transparent)]
    Bp(#[from] BpError),
}

fn guard(what: &'static str, size: usize, limit: usize) -> Result<(), OracleError> {
    if size > limit {
        Err(OracleError::Capacity {
            what,
            size: size as f64,
            limit: limit as f64,
        })
    } else {
        Ok(())
    }
}

/// Index of a three-valued state in marginal triples ordered (-1, +1, *).
pub fn ext_index(x: ExtValue) -> usize {
    match x {
        ExtValue::Minus => 0,
        ExtValue::Plus => 1,
        ExtValue::Star => 2,
    }
}

fn same_energy(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinEnergy {
    pub min: f64,
    /// Number of minimizing assignments.
    pub count: u64,
    /// The first [`ARGMIN_KEEP`] minimizers in enumeration order.
    pub argmin: Vec<Assignment>,
}

/// Minimum energy over all `2^N` assignments, enumerated in
/// [`Assignment::from_index`] order with incremental clause bookkeeping.
pub fn brute_min_energy(inst: &Instance) -> Result<MinEnergy, OracleError> {
    let n = inst.num_vars();
    guard("variables for energy enumeration", n, MAX_ENERGY_VARS)?;
    let mut x = vec![Spin::Minus; n];
    let mut true_count: Vec<u32> = inst
        .clauses()
        .iter()
        .map(|c| c.literals.iter().filter(|l| l.sat == Spin::Minus).count() as u32)
        .collect();
    let mut energy: f64 = inst
        .clauses()
        .iter()
        .zip(&true_count)
        .filter(|(_, &t)| t == 0)
        .map(|(c, _)| c.weight)
        .fold(0.0, |a, w| a + w);
    let mut best = f64::INFINITY;
    let mut count = 0u64;
    let mut argmin = Vec::new();
    let total = 1u64 << n;
    for idx in 0..total {
        if idx > 0 {
            // Increment: the last variable is the least significant digit.
            let mut v = n;
            loop {
                v -= 1;
                let flip_to = x[v].flip();
                x[v] = flip_to;
                for o in inst.adjacency(v).iter() {
                    let c = o.clause;
                    let w = inst.clause(c).weight;
                    if inst.clause(c).literals[o.pos].sat == flip_to {
                        if true_count[c] == 0 {
                            energy -= w;
                        }
                        true_count[c] += 1;
                    } else {
                        true_count[c] -= 1;
                        if true_count[c] == 0 {
                            energy += w;
                        }
                    }
                }
                if flip_to == Spin::Plus {
                    break;
                }
            }
        }
        if best.is_infinite() || (energy < best && !same_energy(energy, best)) {
            best = inst.energy_of(&x);
            count = 0;
            argmin.clear();
        }
        if same_energy(energy, best) {
            count += 1;
            if argmin.len() < ARGMIN_KEEP {
                argmin.push(Assignment::new(x.clone()));
            }
        }
    }
    Ok(MinEnergy {
        min: best,
        count,
        argmin,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverGroup {
    pub v: f64,
    pub covers: Vec<ExtendedAssignment>,
}

/// All v-covers grouped by v, ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoverCensus {
    pub groups: Vec<CoverGroup>,
}

impl CoverCensus {
    pub fn at(&self, v: f64) -> &[ExtendedAssignment] {
        self.groups
            .iter()
            .find(|g| same_energy(g.v, v))
            .map(|g| g.covers.as_slice())
            .unwrap_or(&[])
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(|g| g.covers.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &ExtendedAssignment)> {
        self.groups
            .iter()
            .flat_map(|g| g.covers.iter().map(move |c| (g.v, c)))
    }
}

/// Scans all `3^N` three-valued configurations and keeps the v-covers.
pub fn enumerate_v_covers(
    inst: &Instance,
    sem: CoverSemantics,
) -> Result<CoverCensus, OracleError> {
    let n = inst.num_vars();
    guard("variables for cover enumeration", n, MAX_COVER_VARS)?;
    let mut groups: Vec<CoverGroup> = Vec::new();
    for idx in 0..3u64.pow(n as u32) {
        let x = ExtendedAssignment::from_index(n, idx);
        if let CoverClass::VCover(v) = inst.classify_cover_with(&x, sem) {
            match groups.iter_mut().find(|g| same_energy(g.v, v)) {
                Some(g) => g.covers.push(x),
                None => groups.push(CoverGroup { v, covers: vec![x] }),
            }
        }
    }
    groups.sort_by(|a, b| a.v.total_cmp(&b.v));
    Ok(CoverCensus { groups })
}

/// Covers whose violated weight equals the minimum energy.
pub fn min_covers(inst: &Instance, sem: CoverSemantics) -> Result<CoverGroup, OracleError> {
    let min = brute_min_energy(inst)?.min;
    let census = enumerate_v_covers(inst, sem)?;
    Ok(CoverGroup {
        v: min,
        covers: census.at(min).to_vec(),
    })
}

/// Penalty rate and the weights of unconstrained `±1` and `*` states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverDistributionParams {
    pub y: f64,
    pub omega0: f64,
    pub omega_star: f64,
}

impl CoverDistributionParams {
    /// `rho` is the weight of `*`; unconstrained `±1` states get `1 - rho`.
    pub fn new(y: f64, rho: f64) -> Result<Self, OracleError> {
        let p = CoverDistributionParams {
            y,
            omega0: 1.0 - rho,
            omega_star: rho,
        };
        p.validate()?;
        Ok(p)
    }

    /// Covers only (`rho = 1`).
    pub fn covers(y: f64) -> Self {
        CoverDistributionParams {
            y,
            omega0: 0.0,
            omega_star: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let unit = |w: f64| (0.0..=1.0).contains(&w);
        if !(self.y >= 0.0 && self.y.is_finite()) {
            return Err(OracleError::BadParams(format!("y = {} must be finite and >= 0", self.y)));
        }
        if !unit(self.omega0) || !unit(self.omega_star) {
            return Err(OracleError::BadParams("weights must lie in [0, 1]".into()));
        }
        if (self.omega0 + self.omega_star - 1.0).abs() > 1e-12 {
            return Err(OracleError::BadParams("weights must sum to 1".into()));
        }
        Ok(())
    }
}

/// A variable state of the extended graph: a value and its parent set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LambdaState {
    pub value: ExtValue,
    /// Sorted clause ids.
    pub parents: Vec<ClauseId>,
}

impl LambdaState {
    pub fn has_parent(&self, c: ClauseId) -> bool {
        self.parents.binary_search(&c).is_ok()
    }
}

/// Factor graph over (value, parent set) pairs. Clause `c` is factor `c`,
/// the unary factor of variable `v` is factor `M + v`.
#[derive(Debug, Clone)]
pub struct ExtendedGraph {
    pub graph: FactorGraph,
    pub states: Vec<Vec<LambdaState>>,
    num_clauses: usize,
}

/// Members of each message group, in the order (satisfying, violating, `*`).
pub type GroupTriple = [Option<f64>; 3];

impl ExtendedGraph {
    pub fn clause_factor(&self, c: ClauseId) -> FactorId {
        c
    }

    pub fn unary_factor(&self, v: VarId) -> FactorId {
        self.num_clauses + v
    }

    /// Sums per-state distributions onto (-1, +1, *).
    pub fn value_marginals(&self, dists: &[Vec<f64>]) -> Vec<[f64; 3]> {
        dists
            .iter()
            .zip(&self.states)
            .map(|(d, st)| {
                let mut m = [0.0; 3];
                for (p, s) in d.iter().zip(st) {
                    m[ext_index(s.value)] += p;
                }
                m
            })
            .collect()
    }

    /// Group of state `k` of the `pos`-th member of clause `c`: 0 when the
    /// variable takes its satisfying value with `c` as a parent, 1 when it
    /// takes its violating value, 2 otherwise.
    pub fn group_of(&self, inst: &Instance, c: ClauseId, pos: usize, k: usize) -> usize {
        let lit = inst.clause(c).literals[pos];
        let st = &self.states[lit.var][k];
        if st.value.is(lit.violating()) {
            1
        } else if st.value.is(lit.sat) && st.has_parent(c) {
            0
        } else {
            2
        }
    }

    /// Reads a clause-to-variable message off one representative per group.
    pub fn group_factor_message(
        &self,
        inst: &Instance,
        c: ClauseId,
        pos: usize,
        msg: &[f64],
    ) -> GroupTriple {
        let mut out = [None; 3];
        for (k, &m) in msg.iter().enumerate() {
            let g = self.group_of(inst, c, pos, k);
            out[g].get_or_insert(m);
        }
        out
    }

    /// Sums a variable-to-clause message over each group.
    pub fn group_var_message(
        &self,
        inst: &Instance,
        c: ClauseId,
        pos: usize,
        msg: &[f64],
    ) -> GroupTriple {
        let mut out = [None; 3];
        for (k, &m) in msg.iter().enumerate() {
            let g = self.group_of(inst, c, pos, k);
            *out[g].get_or_insert(0.0) += m;
        }
        out
    }
}

fn unary_weight(st: &LambdaState, p: &CoverDistributionParams) -> f64 {
    match (st.value, st.parents.is_empty()) {
        (ExtValue::Star, _) => p.omega_star,
        (_, true) => p.omega0,
        _ => 1.0,
    }
}

/// Builds the explicit extended graph, dropping variable states of zero
/// unary weight.
pub fn build_extended_graph(
    inst: &Instance,
    p: &CoverDistributionParams,
) -> Result<ExtendedGraph, OracleError> {
    p.validate()?;
    let n = inst.num_vars();
    let mut states: Vec<Vec<LambdaState>> = Vec::with_capacity(n);
    for v in 0..n {
        let adj = inst.adjacency(v);
        let size = 1usize
            .checked_shl(adj.plus.len() as u32)
            .zip(1usize.checked_shl(adj.minus.len() as u32))
            .map(|(a, b)| a + b + 1)
            .unwrap_or(usize::MAX);
        guard("states of one variable", size.saturating_sub(2), MAX_LAMBDA_STATES)?;
        let mut st = vec![LambdaState {
            value: ExtValue::Star,
            parents: vec![],
        }];
        for s in [Spin::Plus, Spin::Minus] {
            let side = adj.by_sat(s);
            for mask in 0u64..(1u64 << side.len()) {
                let mut parents: Vec<ClauseId> = side
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .map(|(_, o)| o.clause)
                    .collect();
                parents.sort_unstable();
                st.push(LambdaState {
                    value: s.into(),
                    parents,
                });
            }
        }
        st.retain(|s| unary_weight(s, p) > 0.0);
        states.push(st);
    }
    let mut graph = FactorGraph::new(states.iter().map(Vec::len).collect())?;

    for (c, clause) in inst.clauses().iter().enumerate() {
        let k = clause.len();
        // by_value[pos][value] = (state index, has c as parent)
        let by_value: Vec<[Vec<(usize, bool)>; 3]> = clause
            .literals
            .iter()
            .map(|l| {
                let mut groups: [Vec<(usize, bool)>; 3] = Default::default();
                for (idx, st) in states[l.var].iter().enumerate() {
                    groups[ext_index(st.value)].push((idx, st.has_parent(c)));
                }
                groups
            })
            .collect();
        let mut vals = vec![ExtValue::Star; n];
        let mut entries: Vec<(Vec<usize>, f64)> = Vec::new();
        for combo in 0..3usize.pow(k as u32) {
            let mut r = combo;
            let mut digits = vec![0usize; k];
            for d in digits.iter_mut().rev() {
                *d = r % 3;
                r /= 3;
            }
            if digits.iter().enumerate().any(|(pos, &d)| by_value[pos][d].is_empty()) {
                continue;
            }
            for (pos, &d) in digits.iter().enumerate() {
                vals[clause.literals[pos].var] =
                    [ExtValue::Minus, ExtValue::Plus, ExtValue::Star][d];
            }
            let val = match status_of(clause, &vals) {
                ClauseStatus::Satisfied => 1.0,
                ClauseStatus::Violated => (-clause.weight * p.y).exp(),
                ClauseStatus::Invalid => continue,
            };
            let candidates: Vec<Vec<usize>> = (0..k)
                .map(|pos| {
                    let con = constrains(clause, pos, &vals);
                    by_value[pos][digits[pos]]
                        .iter()
                        .filter(|&&(_, has)| has == con)
                        .map(|&(idx, _)| idx)
                        .collect()
                })
                .collect();
            let count: usize = candidates.iter().map(Vec::len).product();
            if count == 0 {
                continue;
            }
            guard("entries of one clause factor", entries.len() + count, MAX_FACTOR_ENTRIES)?;
            let mut pick = vec![0usize; k];
            'product: loop {
                entries.push(((0..k).map(|q| candidates[q][pick[q]]).collect(), val));
                for q in (0..k).rev() {
                    pick[q] += 1;
                    if pick[q] < candidates[q].len() {
                        continue 'product;
                    }
                    pick[q] = 0;
                }
                break;
            }
        }
        let vars = clause.literals.iter().map(|l| l.var).collect();
        graph.add_sparse_factor(vars, entries)?;
    }
    for (v, st) in states.iter().enumerate() {
        let table: Vec<f64> = st.iter().map(|s| unary_weight(s, p)).collect();
        graph.add_factor(vec![v], &table)?;
    }
    Ok(ExtendedGraph {
        graph,
        states,
        num_clauses: inst.num_clauses(),
    })
}

/// Normalized distribution of the extended graph projected onto values,
/// listing only configurations of positive mass.
///
/// Panics if a supported joint state carries parent sets other than the ones
/// the values determine, which would mean the graph is miswired.
pub fn extended_support(
    inst: &Instance,
    ext: &ExtendedGraph,
) -> Result<Vec<(ExtendedAssignment, f64)>, OracleError> {
    let mut out: Vec<(ExtendedAssignment, f64)> = Vec::new();
    let mut z = 0.0;
    ext.graph.for_each_support(|s, w| {
        let x = ExtendedAssignment::new(
            s.iter()
                .enumerate()
                .map(|(v, &k)| ext.states[v][k].value)
                .collect(),
        );
        let parents = inst.parent_sets(&x);
        for (v, &k) in s.iter().enumerate() {
            assert_eq!(ext.states[v][k].parents, parents.of(v), "inconsistent parent set");
        }
        z += w;
        out.push((x, w));
    });
    if z <= 0.0 {
        return Err(OracleError::NoMass);
    }
    for e in &mut out {
        e.1 /= z;
    }
    Ok(out)
}

/// The cover distribution by direct enumeration of three-valued
/// configurations: invalid ones get 0, the rest
/// `omega0^n0 * omega_star^n* * exp(-y v)` where `n0` counts `±1` variables
/// that constrain no clause.
pub fn cover_distribution(
    inst: &Instance,
    p: &CoverDistributionParams,
) -> Result<Vec<(ExtendedAssignment, f64)>, OracleError> {
    p.validate()?;
    let n = inst.num_vars();
    guard("variables for cover enumeration", n, MAX_COVER_VARS)?;
    // (configuration, log-free prefactor, violated weight)
    let mut terms: Vec<(ExtendedAssignment, f64, f64)> = Vec::new();
    for idx in 0..3u64.pow(n as u32) {
        let x = ExtendedAssignment::from_index(n, idx);
        let xs = x.values();
        let mut v = 0.0;
        let mut valid = true;
        for clause in inst.clauses() {
            match status_of(clause, xs) {
                ClauseStatus::Invalid => {
                    valid = false;
                    break;
                }
                ClauseStatus::Violated => v += clause.weight,
                ClauseStatus::Satisfied => {}
            }
        }
        if !valid {
            continue;
        }
        let mut pre = 1.0;
        for (i, &xi) in xs.iter().enumerate() {
            pre *= match xi {
                ExtValue::Star => p.omega_star,
                _ if inst
                    .adjacency(i)
                    .iter()
                    .any(|o| constrains(inst.clause(o.clause), o.pos, xs)) =>
                {
                    1.0
                }
                _ => p.omega0,
            };
            if pre == 0.0 {
                break;
            }
        }
        if pre > 0.0 {
            terms.push((x, pre, v));
        }
    }
    // Shift by the smallest penalty so large y cannot underflow everything.
    let vmin = terms.iter().map(|t| t.2).fold(f64::INFINITY, f64::min);
    let mut out: Vec<(ExtendedAssignment, f64)> = terms
        .into_iter()
        .map(|(x, pre, v)| (x, pre * (-(v - vmin) * p.y).exp()))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let z: f64 = out.iter().map(|e| e.1).sum();
    if !(z > 0.0) {
        return Err(OracleError::NoMass);
    }
    for e in &mut out {
        e.1 /= z;
    }
    Ok(out)
}

/// Per-variable marginals (-1, +1, *) of [`cover_distribution`].
pub fn exact_cover_marginals(
    inst: &Instance,
    p: &CoverDistributionParams,
) -> Result<Vec<[f64; 3]>, OracleError> {
    let dist = cover_distribution(inst, p)?;
    Ok(value_marginals(inst.num_vars(), &dist))
}

pub fn value_marginals(n: usize, dist: &[(ExtendedAssignment, f64)]) -> Vec<[f64; 3]> {
    let mut m = vec![[0.0; 3]; n];
    for (x, w) in dist {
        for (v, &xi) in x.values().iter().enumerate() {
            m[v][ext_index(xi)] += w;
        }
    }
    m
}

/// Marginals (-1, +1) of `exp(-y E(x))` over Boolean assignments.
pub fn boltzmann_marginals(inst: &Instance, y: f64) -> Result<Vec<[f64; 2]>, OracleError> {
    let n = inst.num_vars();
    guard("variables for energy enumeration", n, MAX_ENERGY_VARS)?;
    let energies: Vec<f64> = (0..1u64 << n)
        .map(|idx| inst.energy_of(Assignment::from_index(n, idx).values()))
        .collect();
    let emin = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut m = vec![[0.0; 2]; n];
    let mut z = 0.0;
    for (idx, e) in energies.into_iter().enumerate() {
        let w = (-(e - emin) * y).exp();
        z += w;
        let a = Assignment::from_index(n, idx as u64);
        for (v, &s) in a.values().iter().enumerate() {
            m[v][crate::bp::spin_state(s)] += w;
        }
    }
    for row in &mut m {
        row[0] /= z;
        row[1] /= z;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bp::exact_marginals;
    use crate::instance::{example_unweighted, example_weighted, Clause, Literal};
    use crate::io::{generate, GeneratorConfig};

    fn ext(s: &str) -> ExtendedAssignment {
        ExtendedAssignment::new(
            s.split(',')
                .map(|t| match t {
                    "+" => ExtValue::Plus,
                    "-" => ExtValue::Minus,
                    _ => ExtValue::Star,
                })
                .collect(),
        )
    }

    #[test]
    fn example_min_energy_and_minimizers() {
        let r = brute_min_energy(&example_weighted()).unwrap();
        assert_eq!(r.min, 1.0);
        assert_eq!(r.count, 2);
        let found: Vec<String> = r.argmin.iter().map(|a| format!("{:?}", a.to_dimacs_literals())).collect();
        assert_eq!(found, ["[1, -2, -3]", "[1, -2, 3]"]);
    }

    #[test]
    fn empty_instance_energy() {
        let r = brute_min_energy(&Instance::new(3, vec![]).unwrap()).unwrap();
        assert_eq!((r.min, r.count), (0.0, 8));
    }

    #[test]
    fn incremental_enumeration_matches_direct_energy() {
        let inst = generate(&GeneratorConfig::new(10, 4.3, 3, 2).weighted(6)).unwrap();
        let r = brute_min_energy(&inst).unwrap();
        let direct = (0..1u64 << 10)
            .map(|i| inst.energy_of(Assignment::from_index(10, i).values()))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.min, direct);
        for a in &r.argmin {
            assert_eq!(inst.energy(a).unwrap(), direct);
        }
    }

    #[test]
    fn min_energy_agrees_with_fix_and_reduce() {
        // Fixing the first variable both ways and minimizing the rest must
        // recover the same optimum.
        let inst = generate(&GeneratorConfig::new(10, 4.5, 3, 8)).unwrap();
        let full = brute_min_energy(&inst).unwrap().min;
        let split = [Spin::Minus, Spin::Plus]
            .into_iter()
            .map(|s| {
                let red = inst.simplify(&[(0, s)].into_iter().collect());
                red.offset + brute_min_energy(&red.instance).unwrap().min
            })
            .fold(f64::INFINITY, f64::min);
        assert_eq!(full, split);
    }

    #[test]
    fn unique_min_cover_of_the_example() {
        let g = min_covers(&example_weighted(), CoverSemantics::ViolationSupported).unwrap();
        assert_eq!(g.v, 1.0);
        assert_eq!(g.covers, vec![ext("+,-,*")]);
    }

    #[test]
    fn example_cover_census() {
        let strict = enumerate_v_covers(&example_weighted(), CoverSemantics::Strict).unwrap();
        let vs: Vec<f64> = strict.groups.iter().map(|g| g.v).collect();
        assert_eq!(vs, [0.0, 3.0, 4.0, 11.0]);
        assert_eq!(strict.at(0.0), [ext("*,*,*")]);
        assert_eq!(strict.at(3.0), [ext("-,+,+")]);
        assert_eq!(strict.at(1.0), []);
        let loose = enumerate_v_covers(&example_weighted(), CoverSemantics::ViolationSupported).unwrap();
        assert_eq!(loose.at(1.0), [ext("+,-,*")]);
        assert_eq!(loose.at(2.0), [ext("*,+,-")]);
        for (_, x) in strict.iter() {
            assert!(loose.iter().any(|(_, y)| y == x));
        }
    }

    #[test]
    fn empty_instance_has_only_the_all_star_cover() {
        let c = enumerate_v_covers(&Instance::new(4, vec![]).unwrap(), CoverSemantics::Strict).unwrap();
        assert_eq!(c.total(), 1);
        assert_eq!(c.at(0.0), [ExtendedAssignment::all_star(4)]);
    }

    #[test]
    fn satisfying_assignments_peel_into_zero_covers() {
        for seed in 0..5 {
            let inst = generate(&GeneratorConfig::new(9, 3.0, 3, seed)).unwrap();
            let census = enumerate_v_covers(&inst, CoverSemantics::ViolationSupported).unwrap();
            let zero = census.at(0.0);
            for idx in 0..1u64 << 9 {
                let a = Assignment::from_index(9, idx);
                if inst.energy(&a).unwrap() == 0.0 {
                    assert!(zero.contains(&inst.peel(&a)));
                }
            }
        }
    }

    #[test]
    fn capacity_guards() {
        let inst = Instance::new(15, vec![]).unwrap();
        assert!(matches!(
            enumerate_v_covers(&inst, CoverSemantics::Strict),
            Err(OracleError::Capacity { .. })
        ));
        assert!(matches!(
            brute_min_energy(&Instance::new(25, vec![]).unwrap()),
            Err(OracleError::Capacity { .. })
        ));
    }

    #[test]
    fn extended_graph_of_the_example() {
        let inst = example_unweighted();
        let g = build_extended_graph(&inst, &CoverDistributionParams::covers(1.0)).unwrap();
        assert_eq!(g.graph.num_vars(), 3);
        assert_eq!(g.graph.num_factors(), 9);
        assert_eq!(
            (0..9).filter(|&f| g.graph.factor(f).arity() == 1).count(),
            3
        );
    }

    #[test]
    fn pruned_variable_cardinality() {
        use Literal as L;
        let cl = |lits| Clause::unweighted(lits);
        let inst = Instance::new(
            3,
            vec![
                cl(vec![L::positive(0), L::positive(1)]),
                cl(vec![L::positive(0), L::positive(2)]),
                cl(vec![L::positive(0), L::negative(1)]),
                cl(vec![L::negative(0), L::negative(2)]),
                cl(vec![L::negative(0), L::positive(2), L::positive(1)]),
            ],
        )
        .unwrap();
        let g = build_extended_graph(&inst, &CoverDistributionParams::covers(0.5)).unwrap();
        assert_eq!(g.graph.cardinality(0), 11);
    }

    #[test]
    fn extended_support_is_the_strict_cover_law() {
        for seed in 0..6 {
            let cfg = GeneratorConfig::new(5, 1.6, 3, seed).weighted(4);
            let inst = generate(&cfg).unwrap();
            for y in [0.5, 2.0] {
                let p = CoverDistributionParams::covers(y);
                let g = build_extended_graph(&inst, &p).unwrap();
                let mut support = extended_support(&inst, &g).unwrap();
                let mut direct = cover_distribution(&inst, &p).unwrap();
                support.sort_by(|a, b| a.0.values().cmp(b.0.values()));
                direct.sort_by(|a, b| a.0.values().cmp(b.0.values()));
                assert_eq!(support.len(), direct.len());
                for (a, b) in support.iter().zip(&direct) {
                    assert_eq!(a.0, b.0);
                    assert!((a.1 - b.1).abs() <= 1e-12 * b.1.max(1e-300) + 1e-15);
                }
            }
        }
    }

    #[test]
    fn rho_zero_reproduces_the_boltzmann_law() {
        for seed in 0..4 {
            let inst = generate(&GeneratorConfig::new(5, 2.0, 3, seed).weighted(3)).unwrap();
            let p = CoverDistributionParams::new(0.7, 0.0).unwrap();
            let g = build_extended_graph(&inst, &p).unwrap();
            let via_graph = g.value_marginals(&exact_marginals(&g.graph).unwrap());
            let direct = exact_cover_marginals(&inst, &p).unwrap();
            let boltz = boltzmann_marginals(&inst, 0.7).unwrap();
            for v in 0..5 {
                assert!(via_graph[v][2].abs() < 1e-15 && direct[v][2] == 0.0);
                for s in 0..2 {
                    assert!((via_graph[v][s] - boltz[v][s]).abs() < 1e-12);
                    assert!((direct[v][s] - boltz[v][s]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn large_y_on_the_example_concentrates_on_all_star() {
        let m = exact_cover_marginals(&example_weighted(), &CoverDistributionParams::covers(30.0)).unwrap();
        for row in m {
            assert!((row[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_covers_weigh_equally_at_y_zero() {
        let (inst, census) = (0..100)
            .map(|seed| {
                let inst = generate(&GeneratorConfig::new(8, 2.5, 3, seed)).unwrap();
                let census = enumerate_v_covers(&inst, CoverSemantics::Strict).unwrap();
                (inst, census)
            })
            .find(|(_, c)| c.at(0.0).len() > 1)
            .expect("some instance has two 0-covers");
        let dist = cover_distribution(&inst, &CoverDistributionParams::covers(0.0)).unwrap();
        let zero: Vec<f64> = dist
            .iter()
            .filter(|(x, _)| census.at(0.0).contains(x))
            .map(|e| e.1)
            .collect();
        assert!(zero.len() > 1);
        for w in &zero {
            assert!((w / zero[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn params_validation() {
        assert!(CoverDistributionParams::new(1.0, 0.3).is_ok());
        assert!(CoverDistributionParams::new(-1.0, 0.3).is_err());
        assert!(CoverDistributionParams::new(1.0, 1.3).is_err());
        let bad = CoverDistributionParams {
            y: 1.0,
            omega0: 0.5,
            omega_star: 0.6,
        };
        assert!(bad.validate().is_err());
    }
}
