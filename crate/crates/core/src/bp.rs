//! Loopy sum-product over discrete factor graphs.
//!
//! Factors keep only their non-zero entries, which is what makes the
//! parent-set graphs built by [`crate::oracle`] tractable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, Spin};
use crate::rng::Rng;

pub type FactorId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    FactorToVar,
    VarToFactor,
    Belief,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BpError {
    #[error("variable {0} is not in the graph")]
    UnknownVariable(usize),
    #[error("variable {0} has cardinality 0")]
    EmptyDomain(usize),
    #[error("variable {0} appears twice in one factor")]
    DuplicateMember(usize),
    #[error("factor table has {got} entries, expected {expected}")]
    TableSize { got: usize, expected: u64 },
    #[error("factor entry is negative or not finite")]
    BadEntry,
    #[error("factor has no positive entry")]
    AllZero,
    #[error("zero normalizer ({direction:?}) at factor {factor:?}, variable {var}")]
    Degenerate {
        direction: Direction,
        factor: Option<FactorId>,
        var: usize,
    },
    #[error("{states} joint configurations exceed the limit of {limit}")]
    Capacity { states: f64, limit: f64 },
    #[error("invalid schedule: {0}")]
    BadSchedule(&'static str),
}

#[derive(Debug, Clone)]
pub struct Factor {
    vars: Vec<usize>,
    /// Mixed-radix strides, last member fastest.
    strides: Vec<u64>,
    /// Sorted by configuration index.
    index: Vec<u64>,
    values: Vec<f64>,
    /// Member states of each entry, `vars.len()` per entry.
    states: Vec<u32>,
}

impl Factor {
    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn num_entries(&self) -> usize {
        self.values.len()
    }

    /// Non-zero entries as (member states, value).
    pub fn entries(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        let k = self.vars.len().max(1);
        self.values
            .iter()
            .enumerate()
            .map(move |(e, &v)| (&self.states[e * k..e * k + self.vars.len()], v))
    }

    /// Table value at the given member states.
    pub fn value(&self, states: &[usize]) -> f64 {
        let idx: u64 = states
            .iter()
            .zip(&self.strides)
            .map(|(&s, &st)| s as u64 * st)
            .sum();
        match self.index.binary_search(&idx) {
            Ok(e) => self.values[e],
            Err(_) => 0.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FactorGraph {
    cards: Vec<usize>,
    factors: Vec<Factor>,
    /// First edge id of each factor; edge `offset[f] + p` joins `f` and its
    /// `p`-th member.
    offsets: Vec<EdgeId>,
    num_edges: usize,
    var_edges: Vec<Vec<EdgeId>>,
    edge_ends: Vec<(FactorId, usize)>,
}

impl FactorGraph {
    pub fn new(cards: Vec<usize>) -> Result<Self, BpError> {
        if let Some(v) = cards.iter().position(|&c| c == 0) {
            return Err(BpError::EmptyDomain(v));
        }
        let n = cards.len();
        Ok(FactorGraph {
            cards,
            var_edges: vec![Vec::new(); n],
            ..Default::default()
        })
    }

    pub fn num_vars(&self) -> usize {
        self.cards.len()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn cardinality(&self, v: usize) -> usize {
        self.cards[v]
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    pub fn factor(&self, f: FactorId) -> &Factor {
        &self.factors[f]
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn edge(&self, f: FactorId, pos: usize) -> EdgeId {
        self.offsets[f] + pos
    }

    /// Edges incident to variable `v`, in order of factor creation.
    pub fn var_edges(&self, v: usize) -> &[EdgeId] {
        &self.var_edges[v]
    }

    /// (factor, member position) of an edge.
    pub fn edge_ends(&self, e: EdgeId) -> (FactorId, usize) {
        self.edge_ends[e]
    }

    fn strides_for(&self, vars: &[usize]) -> Result<(Vec<u64>, u64), BpError> {
        let mut seen = std::collections::HashSet::new();
        for &v in vars {
            if v >= self.cards.len() {
                return Err(BpError::UnknownVariable(v));
            }
            if !seen.insert(v) {
                return Err(BpError::DuplicateMember(v));
            }
        }
        let mut strides = vec![1u64; vars.len()];
        let mut size: u64 = 1;
        for p in (0..vars.len()).rev() {
            strides[p] = size;
            size = size
                .checked_mul(self.cards[vars[p]] as u64)
                .ok_or(BpError::Capacity {
                    states: f64::INFINITY,
                    limit: u64::MAX as f64,
                })?;
        }
        Ok((strides, size))
    }

    /// Adds a factor with a dense table indexed with the last member fastest.
    pub fn add_factor(&mut self, vars: Vec<usize>, table: &[f64]) -> Result<FactorId, BpError> {
        let (strides, size) = self.strides_for(&vars)?;
        if table.len() as u64 != size {
            return Err(BpError::TableSize {
                got: table.len(),
                expected: size,
            });
        }
        let mut entries = Vec::new();
        let mut states = vec![0usize; vars.len()];
        for (idx, &t) in table.iter().enumerate() {
            let mut r = idx as u64;
            for p in 0..vars.len() {
                states[p] = (r / strides[p]) as usize;
                r %= strides[p];
            }
            if t != 0.0 || !t.is_finite() {
                entries.push((states.clone(), t));
            }
        }
        self.insert(vars, strides, entries)
    }

    /// Adds a factor given only its non-zero entries. Repeated configurations
    /// are summed.
    pub fn add_sparse_factor(
        &mut self,
        vars: Vec<usize>,
        entries: Vec<(Vec<usize>, f64)>,
    ) -> Result<FactorId, BpError> {
        let (strides, _) = self.strides_for(&vars)?;
        for (s, _) in &entries {
            if s.len() != vars.len() {
                return Err(BpError::TableSize {
                    got: s.len(),
                    expected: vars.len() as u64,
                });
            }
            for (p, &x) in s.iter().enumerate() {
                if x >= self.cards[vars[p]] {
                    return Err(BpError::UnknownVariable(vars[p]));
                }
            }
        }
        self.insert(vars, strides, entries)
    }

    fn insert(
        &mut self,
        vars: Vec<usize>,
        strides: Vec<u64>,
        entries: Vec<(Vec<usize>, f64)>,
    ) -> Result<FactorId, BpError> {
        let mut keyed: Vec<(u64, Vec<usize>, f64)> = Vec::with_capacity(entries.len());
        for (s, v) in entries {
            if !(v.is_finite() && v >= 0.0) {
                return Err(BpError::BadEntry);
            }
            if v == 0.0 {
                continue;
            }
            let idx = s.iter().zip(&strides).map(|(&x, &st)| x as u64 * st).sum();
            keyed.push((idx, s, v));
        }
        keyed.sort_by_key(|k| k.0);
        let mut index: Vec<u64> = Vec::with_capacity(keyed.len());
        let mut values: Vec<f64> = Vec::with_capacity(keyed.len());
        let mut states = Vec::with_capacity(keyed.len() * vars.len());
        for (idx, s, v) in keyed {
            if index.last() == Some(&idx) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            index.push(idx);
            values.push(v);
            states.extend(s.iter().map(|&x| x as u32));
        }
        if values.is_empty() {
            return Err(BpError::AllZero);
        }
        let f = self.factors.len();
        self.offsets.push(self.num_edges);
        for (p, &v) in vars.iter().enumerate() {
            self.var_edges[v].push(self.num_edges + p);
            self.edge_ends.push((f, p));
        }
        self.num_edges += vars.len();
        self.factors.push(Factor {
            vars,
            strides,
            index,
            values,
            states,
        });
        Ok(f)
    }

    /// Number of joint configurations.
    pub fn joint_size(&self) -> f64 {
        self.cards.iter().map(|&c| c as f64).product()
    }

    /// Unnormalized weight of a joint configuration.
    pub fn weight(&self, states: &[usize]) -> f64 {
        let mut w = 1.0;
        for f in &self.factors {
            let s: Vec<usize> = f.vars.iter().map(|&v| states[v]).collect();
            w *= f.value(&s);
            if w == 0.0 {
                break;
            }
        }
        w
    }

    /// Calls `visit` on every joint configuration of positive weight.
    ///
    /// Depth-first over variables in index order. A partial configuration is
    /// abandoned as soon as the assigned members of some factor match none of
    /// its non-zero entries.
    pub fn for_each_support(&self, mut visit: impl FnMut(&[usize], f64)) {
        let n = self.cards.len();
        let mut constant = 1.0;
        // checks[d]: (factor, number of its members assigned once `d` is).
        let mut checks: Vec<Vec<(FactorId, usize)>> = vec![Vec::new(); n];
        // prefixes[f][t]: keys of the entries' first `t` members in index order.
        let mut prefixes: Vec<Vec<std::collections::HashSet<u64>>> = Vec::new();
        let mut orders: Vec<Vec<usize>> = Vec::new();
        for (f, fac) in self.factors.iter().enumerate() {
            let mut order: Vec<usize> = (0..fac.arity()).collect();
            order.sort_by_key(|&p| fac.vars[p]);
            if order.is_empty() {
                constant *= fac.values[0];
            }
            for (t, &p) in order.iter().enumerate() {
                checks[fac.vars[p]].push((f, t + 1));
            }
            let mut sets = vec![std::collections::HashSet::new(); fac.arity()];
            for (st, _) in fac.entries() {
                let mut key = 0u64;
                for (t, &p) in order.iter().enumerate() {
                    key = key * self.cards[fac.vars[p]] as u64 + st[p] as u64;
                    if t + 1 < fac.arity() {
                        sets[t + 1].insert(key);
                    }
                }
            }
            prefixes.push(sets);
            orders.push(order);
        }
        if n == 0 {
            visit(&[], constant);
            return;
        }
        let mut states = vec![0usize; n];
        let mut weights = vec![0.0; n + 1];
        weights[0] = constant;
        let mut depth = 0;
        let mut scratch = Vec::new();
        loop {
            let mut w = weights[depth];
            for &(f, t) in &checks[depth] {
                let fac = &self.factors[f];
                if t == fac.arity() {
                    scratch.clear();
                    scratch.extend(fac.vars.iter().map(|&v| states[v]));
                    w *= fac.value(&scratch);
                } else {
                    let key = orders[f][..t].iter().fold(0u64, |k, &p| {
                        k * self.cards[fac.vars[p]] as u64 + states[fac.vars[p]] as u64
                    });
                    if !prefixes[f][t].contains(&key) {
                        w = 0.0;
                    }
                }
                if w == 0.0 {
                    break;
                }
            }
            if w > 0.0 {
                if depth + 1 == n {
                    visit(&states, w);
                } else {
                    depth += 1;
                    weights[depth] = w;
                    states[depth] = 0;
                    continue;
                }
            }
            loop {
                states[depth] += 1;
                if states[depth] < self.cards[depth] {
                    break;
                }
                if depth == 0 {
                    return;
                }
                states[depth] = 0;
                depth -= 1;
            }
        }
    }
}

/// Largest joint state space [`exact_marginals`] accepts.
pub const EXACT_LIMIT: f64 = 1e7;

/// Brute-force marginals of the normalized product of all factors.
pub fn exact_marginals(g: &FactorGraph) -> Result<Vec<Vec<f64>>, BpError> {
    let states = g.joint_size();
    if states > EXACT_LIMIT {
        return Err(BpError::Capacity {
            states,
            limit: EXACT_LIMIT,
        });
    }
    let mut marg: Vec<Vec<f64>> = g.cards.iter().map(|&c| vec![0.0; c]).collect();
    let mut z = 0.0;
    g.for_each_support(|s, w| {
        z += w;
        for (v, &x) in s.iter().enumerate() {
            marg[v][x] += w;
        }
    });
    if z <= 0.0 {
        return Err(BpError::Degenerate {
            direction: Direction::Belief,
            factor: None,
            var: 0,
        });
    }
    for m in &mut marg {
        for p in m.iter_mut() {
            *p /= z;
        }
    }
    Ok(marg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleMode {
    /// Every update in a sweep reads the previous sweep's messages.
    Synchronous,
    /// Factors visited in a fresh random order each sweep, updates in place.
    RandomSequential { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub mode: ScheduleMode,
    /// Weight of the old message: `new = (1 - damping) * raw + damping * old`.
    pub damping: f64,
    pub max_sweeps: usize,
    /// Convergence threshold on the largest per-entry change in a sweep.
    pub tolerance: f64,
    /// Damping for a second attempt when the first does not converge.
    pub retry_damping: Option<f64>,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::solver(0)
    }
}

impl Schedule {
    pub fn solver(seed: u64) -> Self {
        Schedule {
            mode: ScheduleMode::RandomSequential { seed },
            damping: 0.0,
            max_sweeps: 1000,
            tolerance: 1e-3,
            retry_damping: Some(0.5),
        }
    }

    pub fn oracle() -> Self {
        Schedule {
            mode: ScheduleMode::Synchronous,
            damping: 0.0,
            max_sweeps: 1000,
            tolerance: 1e-7,
            retry_damping: Some(0.5),
        }
    }

    pub fn validate(&self) -> Result<(), BpError> {
        if !(self.tolerance > 0.0) {
            return Err(BpError::BadSchedule("tolerance must be positive"));
        }
        if self.max_sweeps == 0 {
            return Err(BpError::BadSchedule("max_sweeps must be at least 1"));
        }
        let ok = |d: f64| (0.0..1.0).contains(&d);
        if !ok(self.damping) || !self.retry_damping.is_none_or(ok) {
            return Err(BpError::BadSchedule("damping must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Same schedule with a different random order seed.
    pub fn reseeded(mut self, seed: u64) -> Self {
        if let ScheduleMode::RandomSequential { seed: s } = &mut self.mode {
            *s = seed;
        }
        self
    }
}

/// Messages on every edge, in both directions, each normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    pub to_var: Vec<Vec<f64>>,
    pub to_factor: Vec<Vec<f64>>,
}

impl MessageState {
    /// Uniform messages everywhere, except that single-member factors send
    /// their normalized table (their fixed message).
    pub fn initial(g: &FactorGraph) -> Self {
        let mut to_var = Vec::with_capacity(g.num_edges);
        let mut to_factor = Vec::with_capacity(g.num_edges);
        for e in 0..g.num_edges {
            let (f, p) = g.edge_ends[e];
            let v = g.factors[f].vars[p];
            let c = g.cards[v];
            let uniform = vec![1.0 / c as f64; c];
            to_factor.push(uniform.clone());
            if g.factors[f].arity() == 1 {
                let mut m = vec![0.0; c];
                for (s, val) in g.factors[f].entries() {
                    m[s[0] as usize] += val;
                }
                let z: f64 = m.iter().sum();
                m.iter_mut().for_each(|x| *x /= z);
                to_var.push(m);
            } else {
                to_var.push(uniform);
            }
        }
        MessageState { to_var, to_factor }
    }
}

/// Stepwise sum-product engine.
#[derive(Debug, Clone)]
pub struct BpEngine<'g> {
    g: &'g FactorGraph,
    msgs: MessageState,
}

fn normalize(m: &mut [f64]) -> bool {
    let z: f64 = m.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return false;
    }
    m.iter_mut().for_each(|x| *x /= z);
    true
}

fn blend(old: &mut [f64], raw: &[f64], damping: f64) -> f64 {
    let mut change: f64 = 0.0;
    for (o, &r) in old.iter_mut().zip(raw) {
        let n = (1.0 - damping) * r + damping * *o;
        change = change.max((n - *o).abs());
        *o = n;
    }
    change
}

impl<'g> BpEngine<'g> {
    pub fn new(g: &'g FactorGraph) -> Self {
        BpEngine {
            g,
            msgs: MessageState::initial(g),
        }
    }

    pub fn messages(&self) -> &MessageState {
        &self.msgs
    }

    /// Raw variable-to-factor message along `e`: the product of every other
    /// incoming factor message.
    fn var_message(&self, e: EdgeId, out: &mut Vec<f64>) -> Result<(), BpError> {
        let (f, p) = self.g.edge_ends[e];
        let v = self.g.factors[f].vars[p];
        out.clear();
        out.resize(self.g.cards[v], 1.0);
        for &e2 in &self.g.var_edges[v] {
            if e2 != e {
                for (o, &m) in out.iter_mut().zip(&self.msgs.to_var[e2]) {
                    *o *= m;
                }
            }
        }
        if normalize(out) {
            Ok(())
        } else {
            Err(BpError::Degenerate {
                direction: Direction::VarToFactor,
                factor: Some(f),
                var: v,
            })
        }
    }

    /// Raw factor-to-variable messages for every member of `f`.
    fn factor_messages(&self, f: FactorId) -> Result<Vec<Vec<f64>>, BpError> {
        let fac = &self.g.factors[f];
        let k = fac.arity();
        let base = self.g.offsets[f];
        let mut out: Vec<Vec<f64>> = fac.vars.iter().map(|&v| vec![0.0; self.g.cards[v]]).collect();
        let mut prefix = vec![1.0; k + 1];
        for (s, val) in fac.entries() {
            for p in 0..k {
                prefix[p + 1] = prefix[p] * self.msgs.to_factor[base + p][s[p] as usize];
            }
            let mut suffix = 1.0;
            for p in (0..k).rev() {
                out[p][s[p] as usize] += val * prefix[p] * suffix;
                suffix *= self.msgs.to_factor[base + p][s[p] as usize];
            }
        }
        for (p, m) in out.iter_mut().enumerate() {
            if !normalize(m) {
                return Err(BpError::Degenerate {
                    direction: Direction::FactorToVar,
                    factor: Some(f),
                    var: fac.vars[p],
                });
            }
        }
        Ok(out)
    }

    /// One sweep: all variable-to-factor messages from the current state, then
    /// all factor-to-variable messages from those. Returns the largest change.
    pub fn sweep_synchronous(&mut self, damping: f64) -> Result<f64, BpError> {
        let mut raw = Vec::new();
        let mut new_to_factor = Vec::with_capacity(self.g.num_edges);
        for e in 0..self.g.num_edges {
            self.var_message(e, &mut raw)?;
            new_to_factor.push(raw.clone());
        }
        let mut change: f64 = 0.0;
        for (old, new) in self.msgs.to_factor.iter_mut().zip(&new_to_factor) {
            change = change.max(blend(old, new, damping));
        }
        let mut all = Vec::with_capacity(self.g.num_factors());
        for f in 0..self.g.num_factors() {
            all.push(self.factor_messages(f)?);
        }
        for (f, msgs) in all.into_iter().enumerate() {
            for (p, m) in msgs.into_iter().enumerate() {
                let e = self.g.offsets[f] + p;
                change = change.max(blend(&mut self.msgs.to_var[e], &m, damping));
            }
        }
        Ok(change)
    }

    /// One sweep over factors in random order, updating each factor's incoming
    /// then outgoing messages in place.
    pub fn sweep_sequential(&mut self, rng: &mut Rng, damping: f64) -> Result<f64, BpError> {
        let mut order: Vec<FactorId> = (0..self.g.num_factors()).collect();
        rng.shuffle(&mut order);
        let mut change: f64 = 0.0;
        let mut raw = Vec::new();
        for f in order {
            let base = self.g.offsets[f];
            for p in 0..self.g.factors[f].arity() {
                self.var_message(base + p, &mut raw)?;
                change = change.max(blend(&mut self.msgs.to_factor[base + p], &raw, damping));
            }
            let msgs = self.factor_messages(f)?;
            for (p, m) in msgs.into_iter().enumerate() {
                change = change.max(blend(&mut self.msgs.to_var[base + p], &m, damping));
            }
        }
        Ok(change)
    }

    /// Normalized product of all incoming factor messages per variable.
    pub fn beliefs(&self) -> Result<Vec<Vec<f64>>, BpError> {
        (0..self.g.num_vars())
            .map(|v| {
                let mut b = vec![1.0; self.g.cards[v]];
                for &e in &self.g.var_edges[v] {
                    for (x, &m) in b.iter_mut().zip(&self.msgs.to_var[e]) {
                        *x *= m;
                    }
                }
                if normalize(&mut b) {
                    Ok(b)
                } else {
                    Err(BpError::Degenerate {
                        direction: Direction::Belief,
                        factor: None,
                        var: v,
                    })
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BpOutcome {
    pub converged: bool,
    pub sweeps: usize,
    pub messages: MessageState,
    pub beliefs: Vec<Vec<f64>>,
}

/// Runs sum-product to convergence or the sweep limit, retrying once with
/// damping if the schedule asks for it.
pub fn run_bp(g: &FactorGraph, s: &Schedule) -> Result<BpOutcome, BpError> {
    s.validate()?;
    let first = run_once(g, s, s.damping)?;
    match s.retry_damping {
        Some(d) if !first.converged && d != s.damping => {
            let second = run_once(g, s, d)?;
            Ok(BpOutcome {
                sweeps: first.sweeps + second.sweeps,
                ..second
            })
        }
        _ => Ok(first),
    }
}

fn run_once(g: &FactorGraph, s: &Schedule, damping: f64) -> Result<BpOutcome, BpError> {
    let mut engine = BpEngine::new(g);
    let mut rng = match s.mode {
        ScheduleMode::RandomSequential { seed } => Some(Rng::stream(seed, "bp-order")),
        ScheduleMode::Synchronous => None,
    };
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < s.max_sweeps {
        let change = match rng.as_mut() {
            Some(r) => engine.sweep_sequential(r, damping)?,
            None => engine.sweep_synchronous(damping)?,
        };
        sweeps += 1;
        if change < s.tolerance {
            converged = true;
            break;
        }
    }
    let beliefs = engine.beliefs()?;
    Ok(BpOutcome {
        converged,
        sweeps,
        messages: engine.msgs,
        beliefs,
    })
}

/// State index of a spin in graphs over Boolean variables.
pub fn spin_state(s: Spin) -> usize {
    match s {
        Spin::Minus => 0,
        Spin::Plus => 1,
    }
}

/// The Max-SAT graph: one binary variable per instance variable (state 0 is
/// -1, state 1 is +1) and one factor per clause equal to `exp(-w y)` on the
/// violating configuration and 1 elsewhere.
pub fn maxsat_graph(inst: &Instance, y: f64) -> FactorGraph {
    let mut g = FactorGraph::new(vec![2; inst.num_vars()]).expect("binary domains");
    for clause in inst.clauses() {
        let k = clause.len();
        let mut table = vec![1.0; 1 << k];
        let violating: usize = clause
            .literals
            .iter()
            .fold(0, |acc, l| (acc << 1) | spin_state(l.violating()));
        table[violating] = (-clause.weight * y).exp();
        let vars = clause.literals.iter().map(|l| l.var).collect();
        g.add_factor(vars, &table).expect("clause factor is valid");
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{example_weighted, Assignment};

    fn random_table(rng: &mut Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| 0.1 + rng.unit()).collect()
    }

    /// Star-shaped tree: x0 - x1, x1 - x2, x1 - x3, plus unary factors.
    fn tree(seed: u64) -> FactorGraph {
        let mut rng = Rng::new(seed);
        let mut g = FactorGraph::new(vec![2, 3, 2, 2]).unwrap();
        g.add_factor(vec![0, 1], &random_table(&mut rng, 6)).unwrap();
        g.add_factor(vec![1, 2], &random_table(&mut rng, 6)).unwrap();
        g.add_factor(vec![3, 1], &random_table(&mut rng, 6)).unwrap();
        g.add_factor(vec![0], &random_table(&mut rng, 2)).unwrap();
        g.add_factor(vec![2], &random_table(&mut rng, 2)).unwrap();
        g
    }

    fn linf(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn tight(mode: ScheduleMode, damping: f64) -> Schedule {
        Schedule {
            mode,
            damping,
            max_sweeps: 5000,
            tolerance: 1e-13,
            retry_damping: None,
        }
    }

    #[test]
    fn tree_beliefs_are_exact() {
        for seed in 0..5 {
            let g = tree(seed);
            let exact = exact_marginals(&g).unwrap();
            let out = run_bp(&g, &Schedule::oracle()).unwrap();
            assert!(out.converged);
            assert!(out.sweeps <= 2 * 3 + 1, "took {} sweeps", out.sweeps);
            let out = run_bp(&g, &tight(ScheduleMode::Synchronous, 0.0)).unwrap();
            assert!(linf(&out.beliefs, &exact) < 1e-10);
        }
    }

    #[test]
    fn tree_fixed_point_independent_of_schedule_and_damping() {
        let g = tree(9);
        let exact = exact_marginals(&g).unwrap();
        for (mode, d) in [
            (ScheduleMode::Synchronous, 0.3),
            (ScheduleMode::RandomSequential { seed: 4 }, 0.0),
            (ScheduleMode::RandomSequential { seed: 5 }, 0.6),
        ] {
            let out = run_bp(&g, &tight(mode, d)).unwrap();
            assert!(out.converged);
            assert!(linf(&out.beliefs, &exact) < 1e-10, "{mode:?} {d}");
        }
    }

    #[test]
    fn single_unary_factor() {
        let mut g = FactorGraph::new(vec![2]).unwrap();
        g.add_factor(vec![0], &[0.3, 0.7]).unwrap();
        let out = run_bp(&g, &Schedule::oracle()).unwrap();
        assert!((out.beliefs[0][0] - 0.3).abs() < 1e-15);
        assert!((out.beliefs[0][1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn uniform_tables_give_uniform_marginals() {
        let mut g = FactorGraph::new(vec![3, 2, 4]).unwrap();
        g.add_factor(vec![0, 1, 2], &[2.0; 24]).unwrap();
        g.add_factor(vec![2, 0], &[1.0; 12]).unwrap();
        for m in [exact_marginals(&g).unwrap(), run_bp(&g, &Schedule::oracle()).unwrap().beliefs] {
            for (v, b) in m.iter().enumerate() {
                for &p in b {
                    assert!((p - 1.0 / g.cardinality(v) as f64).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn loopy_example_matches_reference_fixed_point() {
        let inst = example_weighted();
        let g = maxsat_graph(&inst, 1.0);
        let exact = exact_marginals(&g).unwrap();
        // Cross-check the enumeration against the energy function directly.
        let mut direct = [[0.0; 2]; 3];
        let mut z = 0.0;
        for idx in 0..8 {
            let a = Assignment::from_index(3, idx);
            let w = (-inst.energy(&a).unwrap()).exp();
            z += w;
            for v in 0..3 {
                direct[v][spin_state(a.get(v))] += w;
            }
        }
        for v in 0..3 {
            for s in 0..2 {
                assert!((direct[v][s] / z - exact[v][s]).abs() < 1e-12);
            }
        }
        // Fixed point of an independent loopy BP implementation. On this
        // heavily weighted loop it sits about 0.14 away from the exact marginals.
        let reference = [
            [0.220712939384, 0.779287060616],
            [0.547747614261, 0.452252385739],
            [0.533444705205, 0.466555294795],
        ];
        let out = run_bp(&g, &Schedule::oracle()).unwrap();
        assert!(out.converged);
        for v in 0..3 {
            for s in 0..2 {
                assert!((out.beliefs[v][s] - reference[v][s]).abs() < 1e-6);
            }
        }
        assert!(linf(&out.beliefs, &exact) < 0.14);

        let g = maxsat_graph(&crate::instance::example_unweighted(), 1.0);
        let exact = exact_marginals(&g).unwrap();
        let out = run_bp(&g, &Schedule::oracle()).unwrap();
        assert!(linf(&out.beliefs, &exact) < 0.05);
    }

    #[test]
    fn messages_stay_normalized() {
        let inst = crate::io::generate(&crate::io::GeneratorConfig::new(12, 4.0, 3, 3)).unwrap();
        let g = maxsat_graph(&inst, 1.5);
        let mut engine = BpEngine::new(&g);
        let mut rng = Rng::new(1);
        for sweep in 0..20 {
            if sweep % 2 == 0 {
                engine.sweep_synchronous(0.2).unwrap();
            } else {
                engine.sweep_sequential(&mut rng, 0.0).unwrap();
            }
            let m = engine.messages();
            for msg in m.to_var.iter().chain(&m.to_factor) {
                assert!(msg.iter().all(|&x| (0.0..=1.0).contains(&x)));
                assert!((msg.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn contradiction_is_reported() {
        let mut g = FactorGraph::new(vec![2]).unwrap();
        g.add_factor(vec![0], &[1.0, 0.0]).unwrap();
        g.add_factor(vec![0], &[0.0, 1.0]).unwrap();
        let err = run_bp(&g, &Schedule::oracle()).unwrap_err();
        assert!(matches!(err, BpError::Degenerate { .. }), "{err}");
    }

    #[test]
    fn rejects_bad_factors() {
        let mut g = FactorGraph::new(vec![2, 2]).unwrap();
        assert_eq!(g.add_factor(vec![0, 1], &[1.0; 3]), Err(BpError::TableSize { got: 3, expected: 4 }));
        assert_eq!(g.add_factor(vec![0, 0], &[1.0; 4]), Err(BpError::DuplicateMember(0)));
        assert_eq!(g.add_factor(vec![0], &[0.0, 0.0]), Err(BpError::AllZero));
        assert_eq!(g.add_factor(vec![0], &[-1.0, 1.0]), Err(BpError::BadEntry));
        assert_eq!(g.add_factor(vec![2], &[1.0, 1.0]), Err(BpError::UnknownVariable(2)));
    }

    #[test]
    fn capacity_guard() {
        let g = FactorGraph::new(vec![10; 8]).unwrap();
        assert!(matches!(exact_marginals(&g), Err(BpError::Capacity { .. })));
    }

    #[test]
    fn support_enumeration_matches_dense_weights() {
        let mut rng = Rng::new(3);
        let mut g = FactorGraph::new(vec![2, 3, 2]).unwrap();
        let mut t = random_table(&mut rng, 12);
        t[5] = 0.0;
        t[0] = 0.0;
        g.add_factor(vec![0, 1, 2], &t).unwrap();
        g.add_factor(vec![2, 1], &[1.0, 0.0, 2.0, 0.5, 0.0, 1.0]).unwrap();
        let mut seen = 0;
        g.for_each_support(|s, w| {
            seen += 1;
            assert!(w > 0.0);
            assert_eq!(w, g.weight(s));
        });
        let mut expected = 0;
        for a in 0..2 {
            for b in 0..3 {
                for c in 0..2 {
                    if g.weight(&[a, b, c]) > 0.0 {
                        expected += 1;
                    }
                }
            }
        }
        assert_eq!(seen, expected);
    }
}
