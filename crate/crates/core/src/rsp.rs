//! Relaxed survey propagation: sum-product on the extended factor graph with
//! each message collapsed to three grouped values, and the decimation driver.
//!
//! Triples are ordered (s, u, *): the variable is constrained by the clause
//! to its satisfying value, takes its violating value, or neither.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bp::{run_bp, BpError, Direction, Schedule, ScheduleMode};
use crate::decimation::{rank_by_score, Decimation, DecimationOutcome, Handoff, RoundRecord};
use crate::instance::{Assignment, ClauseId, ExtValue, ExtendedAssignment, Instance, Occurrence, Spin, VarId};
use crate::localsearch::WalkSatConfig;
use crate::oracle::{build_extended_graph, CoverDistributionParams, OracleError};
use crate::rng::Rng;
use crate::sp::{edge_map, reinit};

pub type Triple = [f64; 3];

pub const S: usize = 0;
pub const U: usize = 1;
pub const STAR: usize = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RspError {
    #[error("all-zero {direction:?} message (clause {clause:?}, variable {var})")]
    Degenerate {
        direction: Direction,
        clause: Option<ClauseId>,
        var: VarId,
    },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Bp(#[from] BpError),
}

fn normalized(t: Triple) -> Option<Triple> {
    let z = t[0] + t[1] + t[2];
    (z > 0.0 && z.is_finite()).then(|| [t[0] / z, t[1] / z, t[2] / z])
}

/// Messages on every (clause, member) edge, numbered clause-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RspMessages {
    offsets: Vec<usize>,
    /// Clause to variable.
    m: Vec<Triple>,
    /// Variable to clause.
    r: Vec<Triple>,
}

impl RspMessages {
    pub fn uniform(inst: &Instance) -> Self {
        let offsets = inst.edge_offsets();
        let n = *offsets.last().unwrap();
        let t = [1.0 / 3.0; 3];
        RspMessages {
            offsets,
            m: vec![t; n],
            r: vec![t; n],
        }
    }

    pub fn random(inst: &Instance, rng: &mut Rng) -> Self {
        let mut s = RspMessages::uniform(inst);
        for t in s.m.iter_mut().chain(s.r.iter_mut()) {
            *t = random_triple(rng);
        }
        s
    }

    /// Builds messages from (to-variable, to-clause) pairs in edge order.
    pub fn from_pairs(inst: &Instance, pairs: Vec<(Triple, Triple)>) -> Self {
        let offsets = inst.edge_offsets();
        assert_eq!(*offsets.last().unwrap(), pairs.len());
        let (m, r) = pairs.into_iter().unzip();
        RspMessages { offsets, m, r }
    }

    pub fn edge(&self, c: ClauseId, pos: usize) -> usize {
        self.offsets[c] + pos
    }

    pub fn to_var(&self, c: ClauseId, pos: usize) -> Triple {
        self.m[self.edge(c, pos)]
    }

    pub fn to_clause(&self, c: ClauseId, pos: usize) -> Triple {
        self.r[self.edge(c, pos)]
    }

    pub fn max_diff(&self, other: &RspMessages) -> f64 {
        self.m
            .iter()
            .zip(&other.m)
            .chain(self.r.iter().zip(&other.r))
            .flat_map(|(a, b)| (0..3).map(move |i| (a[i] - b[i]).abs()))
            .fold(0.0, f64::max)
    }

    fn pairs(&self) -> Vec<(Triple, Triple)> {
        self.m.iter().copied().zip(self.r.iter().copied()).collect()
    }
}

fn random_triple(rng: &mut Rng) -> Triple {
    let t = [rng.unit() + 1e-12, rng.unit() + 1e-12, rng.unit() + 1e-12];
    normalized(t).unwrap()
}

fn factor_raw(weight: f64, pos: usize, incoming: &[Triple], y: f64) -> Triple {
    // z0: all others violating; z1: exactly one in group *; z2: two or more;
    // s1: exactly one constrained by the clause, the rest violating.
    let (mut z0, mut z1, mut z2, mut s1) = (1.0, 0.0, 0.0, 0.0);
    for (j, r) in incoming.iter().enumerate() {
        if j == pos {
            continue;
        }
        z2 = z2 * (r[U] + r[STAR]) + z1 * r[STAR];
        z1 = z1 * r[U] + z0 * r[STAR];
        s1 = s1 * r[U] + z0 * r[S];
        z0 *= r[U];
    }
    let penalty = if z0 == 0.0 { 0.0 } else { (-weight * y).exp() * z0 };
    [z0, z2 + s1 + penalty, z1 + z2]
}

/// Message from clause `c` to its `pos`-th member given every member's
/// incoming triple (the entry at `pos` is ignored).
pub fn factor_to_var(
    inst: &Instance,
    c: ClauseId,
    pos: usize,
    incoming: &[Triple],
    y: f64,
) -> Result<Triple, RspError> {
    let clause = inst.clause(c);
    normalized(factor_raw(clause.weight, pos, incoming, y)).ok_or(RspError::Degenerate {
        direction: Direction::FactorToVar,
        clause: Some(c),
        var: clause.literals[pos].var,
    })
}

/// Products over one side of a variable's clauses.
#[derive(Debug, Clone, Copy)]
struct Side {
    /// Product of M^u.
    u: f64,
    /// Product of M^*.
    star: f64,
    /// Product of (M^s + M^*) minus product of M^*.
    some_s: f64,
}

impl Side {
    const EMPTY: Side = Side {
        u: 1.0,
        star: 1.0,
        some_s: 0.0,
    };

    fn push(&mut self, m: Triple) {
        self.some_s = self.some_s * (m[S] + m[STAR]) + self.star * m[S];
        self.star *= m[STAR];
        self.u *= m[U];
    }
}

fn sides(
    inst: &Instance,
    v: VarId,
    exclude: Option<ClauseId>,
    m: impl Fn(&Occurrence) -> Triple,
    ops: &mut u64,
) -> (Side, Side) {
    let adj = inst.adjacency(v);
    let mut plus = Side::EMPTY;
    let mut minus = Side::EMPTY;
    for (list, side) in [(&adj.plus, &mut plus), (&adj.minus, &mut minus)] {
        for o in list.iter().filter(|o| Some(o.clause) != exclude) {
            side.push(m(o));
            *ops += 1;
        }
    }
    (plus, minus)
}

fn var_raw(
    inst: &Instance,
    v: VarId,
    c: ClauseId,
    pos: usize,
    m: impl Fn(&Occurrence) -> Triple,
    ops: &mut u64,
) -> Triple {
    let (plus, minus) = sides(inst, v, Some(c), m, ops);
    let (same, opp) = match inst.clause(c).literals[pos].sat {
        Spin::Plus => (plus, minus),
        Spin::Minus => (minus, plus),
    };
    [
        opp.u * (same.some_s + same.star),
        same.u * opp.some_s,
        opp.u * same.some_s + same.star * opp.star,
    ]
}

/// Message from variable `v` to clause `c`, given the triples from all of
/// `v`'s clauses in adjacency order (the entry for `c` is ignored).
pub fn var_to_factor(inst: &Instance, v: VarId, c: ClauseId, incoming: &[Triple]) -> Result<Triple, RspError> {
    let adj = inst.adjacency(v);
    let pos = inst.clause(c).position(v).expect("variable not in clause");
    let lookup: HashMap<ClauseId, Triple> = adj.iter().map(|o| o.clause).zip(incoming.iter().copied()).collect();
    let raw = var_raw(inst, v, c, pos, |o| lookup[&o.clause], &mut 0);
    normalized(raw).ok_or(RspError::Degenerate {
        direction: Direction::VarToFactor,
        clause: Some(c),
        var: v,
    })
}

/// Per-variable (B(-1), B(+1), B(*)).
pub fn rsp_beliefs(inst: &Instance, msgs: &RspMessages) -> Result<Vec<Triple>, RspError> {
    (0..inst.num_vars())
        .map(|v| {
            let (plus, minus) = sides(inst, v, None, |o| msgs.to_var(o.clause, o.pos), &mut 0);
            let raw = [plus.u * minus.some_s, minus.u * plus.some_s, plus.star * minus.star];
            normalized(raw).ok_or(RspError::Degenerate {
                direction: Direction::Belief,
                clause: None,
                var: v,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RspSweepStats {
    pub max_change: f64,
    /// Triples read while computing updates.
    pub ops: u64,
}

fn blend(old: &mut Triple, new: Triple, damping: f64) -> f64 {
    let mut change: f64 = 0.0;
    for i in 0..3 {
        let n = (1.0 - damping) * new[i] + damping * old[i];
        change = change.max((n - old[i]).abs());
        old[i] = n;
    }
    change
}

fn update_clause_in(
    inst: &Instance,
    msgs: &mut RspMessages,
    c: ClauseId,
    damping: f64,
    stats: &mut RspSweepStats,
) -> Result<(), RspError> {
    for (pos, lit) in inst.clause(c).literals.iter().enumerate() {
        let m = &msgs.m;
        let off = &msgs.offsets;
        let raw = var_raw(inst, lit.var, c, pos, |o| m[off[o.clause] + o.pos], &mut stats.ops);
        let new = normalized(raw).ok_or(RspError::Degenerate {
            direction: Direction::VarToFactor,
            clause: Some(c),
            var: lit.var,
        })?;
        let e = msgs.edge(c, pos);
        stats.max_change = stats.max_change.max(blend(&mut msgs.r[e], new, damping));
    }
    Ok(())
}

fn update_clause_out(
    inst: &Instance,
    msgs: &mut RspMessages,
    c: ClauseId,
    y: f64,
    damping: f64,
    stats: &mut RspSweepStats,
) -> Result<(), RspError> {
    let base = msgs.edge(c, 0);
    let k = inst.clause(c).len();
    let incoming: Vec<Triple> = msgs.r[base..base + k].to_vec();
    for pos in 0..k {
        let new = factor_to_var(inst, c, pos, &incoming, y)?;
        stats.ops += k as u64 - 1;
        stats.max_change = stats.max_change.max(blend(&mut msgs.m[base + pos], new, damping));
    }
    Ok(())
}

/// One sweep. Synchronous: every variable-to-clause message from the current
/// clause messages, then every clause-to-variable message from those.
/// Sequential: per clause in random order, its incoming then outgoing.
pub fn rsp_sweep(
    inst: &Instance,
    msgs: &mut RspMessages,
    y: f64,
    damping: f64,
    rng: Option<&mut Rng>,
) -> Result<RspSweepStats, RspError> {
    let mut stats = RspSweepStats::default();
    match rng {
        None => {
            let frozen = msgs.m.clone();
            let mut new_r = Vec::with_capacity(msgs.r.len());
            for c in 0..inst.num_clauses() {
                for (pos, lit) in inst.clause(c).literals.iter().enumerate() {
                    let off = &msgs.offsets;
                    let raw = var_raw(inst, lit.var, c, pos, |o| frozen[off[o.clause] + o.pos], &mut stats.ops);
                    new_r.push(normalized(raw).ok_or(RspError::Degenerate {
                        direction: Direction::VarToFactor,
                        clause: Some(c),
                        var: lit.var,
                    })?);
                }
            }
            for (old, new) in msgs.r.iter_mut().zip(new_r) {
                stats.max_change = stats.max_change.max(blend(old, new, damping));
            }
            for c in 0..inst.num_clauses() {
                update_clause_out(inst, msgs, c, y, damping, &mut stats)?;
            }
        }
        Some(rng) => {
            let mut order: Vec<ClauseId> = (0..inst.num_clauses()).collect();
            rng.shuffle(&mut order);
            for c in order {
                update_clause_in(inst, msgs, c, damping, &mut stats)?;
                update_clause_out(inst, msgs, c, y, damping, &mut stats)?;
            }
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone)]
pub struct RspOutcome {
    pub converged: bool,
    pub sweeps: usize,
    pub messages: RspMessages,
    pub beliefs: Vec<Triple>,
    pub ops: u64,
}

/// Iterates from `init` until the largest change drops below the schedule's
/// tolerance, retrying once with the schedule's fallback damping.
pub fn rsp_iterate(inst: &Instance, init: RspMessages, y: f64, schedule: &Schedule) -> Result<RspOutcome, RspError> {
    schedule.validate()?;
    let first = iterate_once(inst, init.clone(), y, schedule, schedule.damping)?;
    match schedule.retry_damping {
        Some(d) if !first.converged && d != schedule.damping => {
            let second = iterate_once(inst, init, y, schedule, d)?;
            Ok(RspOutcome {
                sweeps: first.sweeps + second.sweeps,
                ops: first.ops + second.ops,
                ..second
            })
        }
        _ => Ok(first),
    }
}

fn iterate_once(
    inst: &Instance,
    mut msgs: RspMessages,
    y: f64,
    schedule: &Schedule,
    damping: f64,
) -> Result<RspOutcome, RspError> {
    let mut rng = match schedule.mode {
        ScheduleMode::RandomSequential { seed } => Some(Rng::stream(seed, "rsp-order")),
        ScheduleMode::Synchronous => None,
    };
    let mut ops = 0;
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < schedule.max_sweeps {
        sweeps += 1;
        let st = rsp_sweep(inst, &mut msgs, y, damping, rng.as_mut())?;
        ops += st.ops;
        if st.max_change < schedule.tolerance {
            converged = true;
            break;
        }
    }
    let beliefs = rsp_beliefs(inst, &msgs)?;
    Ok(RspOutcome {
        converged,
        sweeps,
        messages: msgs,
        beliefs,
        ops,
    })
}

/// Runs from a random initialization drawn from `seed`.
pub fn rsp_run(inst: &Instance, y: f64, schedule: &Schedule, seed: u64) -> Result<RspOutcome, RspError> {
    let init = RspMessages::random(inst, &mut Rng::stream(seed, "init"));
    rsp_iterate(inst, init, y, schedule)
}

/// Value marginals for smoothing weight `rho` other than 1, by plain
/// sum-product on the explicit extended graph. Small instances only.
pub fn general_rho_marginals(
    inst: &Instance,
    y: f64,
    rho: f64,
    schedule: &Schedule,
) -> Result<(bool, Vec<Triple>), RspError> {
    let eg = build_extended_graph(inst, &CoverDistributionParams::new(y, rho)?)?;
    let out = run_bp(&eg.graph, schedule)?;
    Ok((out.converged, eg.value_marginals(&out.beliefs)))
}

/// Lowers y after a failed run: by 1, or by half once y is at most 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YAdaptation {
    /// Below this y the driver hands off to local search.
    pub floor: f64,
}

impl Default for YAdaptation {
    fn default() -> Self {
        YAdaptation { floor: 1e-3 }
    }
}

impl YAdaptation {
    pub fn next(&self, y: f64) -> f64 {
        if y <= 1.0 {
            y / 2.0
        } else {
            y - 1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RspConfig {
    pub y: f64,
    pub k: usize,
    pub b_min: f64,
    pub schedule: Schedule,
    pub seed: u64,
    /// Lower y on non-convergence instead of stopping.
    pub adaptation: Option<YAdaptation>,
    pub warm_start: bool,
    pub walksat: WalkSatConfig,
    /// Cap on runs of the message passing; `None` means `2 * N / k + 200`.
    pub max_rounds: Option<usize>,
}

impl Default for RspConfig {
    fn default() -> Self {
        RspConfig {
            y: 4.0,
            k: 100,
            b_min: 0.5,
            schedule: Schedule::solver(0),
            seed: 0,
            adaptation: None,
            warm_start: false,
            walksat: WalkSatConfig::default(),
            max_rounds: None,
        }
    }
}

impl RspConfig {
    /// Settings for weighted instances: start at y = 10 and adapt.
    pub fn weighted() -> Self {
        RspConfig {
            y: 10.0,
            adaptation: Some(YAdaptation::default()),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        if !(self.b_min > 0.0 && self.b_min < 1.0) {
            return Err(format!("b_min must lie in (0, 1), got {}", self.b_min));
        }
        if !(self.y >= 0.0) {
            return Err(format!("y must be non-negative, got {}", self.y));
        }
        self.schedule.validate().map_err(|e| e.to_string())
    }
}

/// Decimation: run to convergence, fix up to `k` variables whose
/// `|B(+1) - B(-1)|` exceeds `b_min`, simplify, repeat; then weighted WalkSAT.
pub fn rsp_decimate(inst: &Instance, cfg: &RspConfig) -> DecimationOutcome {
    let mut dec = Decimation::new(inst);
    let mut rounds = Vec::new();
    let mut seeds = Rng::stream(cfg.seed, "init");
    let mut previous: Option<HashMap<(ClauseId, VarId), (Triple, Triple)>> = None;
    let mut contradiction = false;
    let mut y = cfg.y;
    let k = cfg.k.max(1);
    let max_rounds = cfg.max_rounds.unwrap_or(2 * inst.num_vars() / k + 200);
    let handoff = loop {
        if dec.remaining() == 0 {
            break Handoff::AllFixed;
        }
        if dec.reduced().num_clauses() == 0 {
            break Handoff::NoClausesLeft;
        }
        if rounds.len() >= max_rounds {
            break Handoff::RoundLimit;
        }
        let red = dec.reduced();
        let mut init_rng = Rng::new(seeds.next_u64());
        let schedule = cfg.schedule.reseeded(seeds.next_u64());
        let pairs = reinit(&dec, previous.as_ref().filter(|_| cfg.warm_start), || {
            (random_triple(&mut init_rng), random_triple(&mut init_rng))
        });
        let out = rsp_iterate(red, RspMessages::from_pairs(red, pairs), y, &schedule);
        let mut record = RoundRecord {
            y,
            sweeps: out.as_ref().map_or(0, |o| o.sweeps),
            converged: false,
            fixed: 0,
            unfixed: 0,
            remaining: dec.remaining(),
        };
        let out = match out {
            Ok(o) if o.converged => o,
            _ => {
                rounds.push(record);
                match cfg.adaptation {
                    Some(a) => {
                        y = a.next(y);
                        if y < a.floor {
                            break Handoff::YFloor;
                        }
                        continue;
                    }
                    None => break Handoff::NonConvergence,
                }
            }
        };
        record.converged = true;
        previous = Some(edge_map(&dec, &out.messages.pairs()));
        let scored: Vec<(VarId, f64)> = out
            .beliefs
            .iter()
            .enumerate()
            .map(|(v, b)| (v, (b[1] - b[0]).abs()))
            .filter(|&(_, score)| score > cfg.b_min)
            .collect();
        if scored.is_empty() {
            rounds.push(record);
            break Handoff::NoQualifyingVariable;
        }
        let fixes: Vec<(VarId, Spin)> = rank_by_score(scored)
            .into_iter()
            .take(k)
            .map(|(v, _)| {
                let b = out.beliefs[v];
                (dec.original_var(v), if b[1] > b[0] { Spin::Plus } else { Spin::Minus })
            })
            .collect();
        dec.fix(&fixes);
        contradiction |= dec.offset() > 0.0;
        record.fixed = fixes.len();
        record.remaining = dec.remaining();
        rounds.push(record);
    };
    dec.finish(&cfg.walksat, rounds, handoff, contradiction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub cover: ExtendedAssignment,
    /// The peeled cover has no `*`.
    pub degenerate: bool,
}

pub fn degeneracy_report(inst: &Instance, a: &Assignment) -> DegeneracyReport {
    let cover = inst.peel(a);
    let degenerate = cover.values().iter().all(|&x| x != ExtValue::Star);
    DegeneracyReport { cover, degenerate }
}
