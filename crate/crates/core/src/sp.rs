//! Survey propagation and survey-inspired decimation for SAT.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bp::{Schedule, ScheduleMode};
use crate::decimation::{rank_by_score, Decimation, DecimationOutcome, Handoff, RoundRecord};
use crate::instance::{ClauseId, Instance, Spin, VarId};
use crate::localsearch::WalkSatConfig;
use crate::rng::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpError {
    #[error("variable {0} receives contradictory certain warnings")]
    Degenerate(VarId),
}

/// One survey per (clause, member) edge, numbered clause-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyState {
    offsets: Vec<usize>,
    eta: Vec<f64>,
}

impl SurveyState {
    pub fn constant(inst: &Instance, value: f64) -> Self {
        let offsets = inst.edge_offsets();
        let n = *offsets.last().unwrap();
        SurveyState {
            offsets,
            eta: vec![value; n],
        }
    }

    pub(crate) fn from_values(inst: &Instance, eta: Vec<f64>) -> Self {
        let offsets = inst.edge_offsets();
        assert_eq!(*offsets.last().unwrap(), eta.len());
        SurveyState { offsets, eta }
    }

    pub fn random(inst: &Instance, rng: &mut Rng) -> Self {
        let mut s = SurveyState::constant(inst, 0.0);
        s.eta.iter_mut().for_each(|e| *e = rng.unit());
        s
    }

    pub fn get(&self, c: ClauseId, pos: usize) -> f64 {
        self.eta[self.offsets[c] + pos]
    }

    pub fn set(&mut self, c: ClauseId, pos: usize, value: f64) {
        self.eta[self.offsets[c] + pos] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.eta
    }

    pub fn max(&self) -> f64 {
        self.eta.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_diff(&self, other: &SurveyState) -> f64 {
        self.eta
            .iter()
            .zip(&other.eta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepStats {
    pub max_change: f64,
    /// Incoming surveys outside [0, 1] that had to be clamped.
    pub clamped: usize,
}

/// Probabilities that a variable is forced to +1, forced to -1, or free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bias {
    pub plus: f64,
    pub minus: f64,
    pub free: f64,
}

impl Bias {
    pub fn polarization(&self) -> f64 {
        (self.plus - self.minus).abs()
    }

    pub fn preferred(&self) -> Spin {
        if self.minus > self.plus {
            Spin::Minus
        } else {
            Spin::Plus
        }
    }
}

fn clamp_unit(x: f64, clamped: &mut usize) -> f64 {
    if (0.0..=1.0).contains(&x) {
        x
    } else {
        *clamped += 1;
        if x > 1.0 {
            1.0
        } else {
            0.0
        }
    }
}

/// Products of `1 - eta` over the clauses satisfied by +1 and by -1,
/// skipping `exclude`.
fn side_products(
    inst: &Instance,
    j: VarId,
    s: &SurveyState,
    exclude: Option<ClauseId>,
    clamped: &mut usize,
) -> (f64, f64) {
    let adj = inst.adjacency(j);
    let prod = |occ: &[crate::instance::Occurrence], clamped: &mut usize| {
        occ.iter()
            .filter(|o| Some(o.clause) != exclude)
            .map(|o| 1.0 - clamp_unit(s.get(o.clause, o.pos), clamped))
            .product::<f64>()
    };
    let p = prod(&adj.plus, clamped);
    let m = prod(&adj.minus, clamped);
    (p, m)
}

/// Probability that `j` is forced to violate clause `c`, given warnings from
/// its other clauses. Zero when the normalizer vanishes.
fn cavity_violation(inst: &Instance, c: ClauseId, pos: usize, s: &SurveyState, clamped: &mut usize) -> f64 {
    let lit = inst.clause(c).literals[pos];
    let (plus, minus) = side_products(inst, lit.var, s, Some(c), clamped);
    let (same, opp) = match lit.sat {
        Spin::Plus => (plus, minus),
        Spin::Minus => (minus, plus),
    };
    let pu = (1.0 - opp) * same;
    let ps = (1.0 - same) * opp;
    let p0 = same * opp;
    let z = pu + ps + p0;
    if z > 0.0 {
        pu / z
    } else {
        0.0
    }
}

/// New surveys of clause `c` computed from `s`.
fn clause_update(inst: &Instance, c: ClauseId, s: &SurveyState, clamped: &mut usize) -> Vec<f64> {
    let k = inst.clause(c).len();
    let ratios: Vec<f64> = (0..k).map(|p| cavity_violation(inst, c, p, s, clamped)).collect();
    products_excluding_each(&ratios)
}

/// `out[i] = prod_{j != i} xs[j]`, without division.
pub(crate) fn products_excluding_each(xs: &[f64]) -> Vec<f64> {
    let k = xs.len();
    let mut out = vec![1.0; k];
    let mut acc = 1.0;
    for i in 0..k {
        out[i] = acc;
        acc *= xs[i];
    }
    acc = 1.0;
    for i in (0..k).rev() {
        out[i] *= acc;
        acc *= xs[i];
    }
    out
}

/// One sweep of survey updates. Synchronous sweeps read only the old state;
/// sequential sweeps visit clauses in `rng` order and update in place.
pub fn sp_sweep(
    inst: &Instance,
    s: &mut SurveyState,
    damping: f64,
    rng: Option<&mut Rng>,
) -> SweepStats {
    let mut stats = SweepStats::default();
    let m = inst.num_clauses();
    match rng {
        None => {
            let old = s.clone();
            for c in 0..m {
                let new = clause_update(inst, c, &old, &mut stats.clamped);
                for (p, v) in new.into_iter().enumerate() {
                    let o = old.get(c, p);
                    let n = (1.0 - damping) * v + damping * o;
                    stats.max_change = stats.max_change.max((n - o).abs());
                    s.set(c, p, n);
                }
            }
        }
        Some(rng) => {
            let mut order: Vec<ClauseId> = (0..m).collect();
            rng.shuffle(&mut order);
            for c in order {
                let new = clause_update(inst, c, s, &mut stats.clamped);
                for (p, v) in new.into_iter().enumerate() {
                    let o = s.get(c, p);
                    let n = (1.0 - damping) * v + damping * o;
                    stats.max_change = stats.max_change.max((n - o).abs());
                    s.set(c, p, n);
                }
            }
        }
    }
    stats
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpOutcome {
    pub converged: bool,
    pub sweeps: usize,
    pub surveys: SurveyState,
    pub clamped: usize,
}

/// Iterates sweeps from `init` until the change drops below the tolerance,
/// retrying once from `init` with damping if the schedule asks for it.
pub fn sp_iterate(inst: &Instance, init: SurveyState, schedule: &Schedule) -> SpOutcome {
    let first = iterate_once(inst, init.clone(), schedule, schedule.damping);
    match schedule.retry_damping {
        Some(d) if !first.converged && d != schedule.damping => {
            let second = iterate_once(inst, init, schedule, d);
            SpOutcome {
                sweeps: first.sweeps + second.sweeps,
                clamped: first.clamped + second.clamped,
                ..second
            }
        }
        _ => first,
    }
}

fn iterate_once(inst: &Instance, mut s: SurveyState, schedule: &Schedule, damping: f64) -> SpOutcome {
    let mut rng = match schedule.mode {
        ScheduleMode::RandomSequential { seed } => Some(Rng::stream(seed, "sp-order")),
        ScheduleMode::Synchronous => None,
    };
    let mut clamped = 0;
    for sweep in 1..=schedule.max_sweeps {
        let st = sp_sweep(inst, &mut s, damping, rng.as_mut());
        clamped += st.clamped;
        if st.max_change < schedule.tolerance {
            return SpOutcome {
                converged: true,
                sweeps: sweep,
                surveys: s,
                clamped,
            };
        }
    }
    SpOutcome {
        converged: false,
        sweeps: schedule.max_sweeps,
        surveys: s,
        clamped,
    }
}

/// Runs SP from surveys drawn uniformly in [0, 1] with `seed`.
pub fn sp_run(inst: &Instance, schedule: &Schedule, seed: u64) -> SpOutcome {
    let init = SurveyState::random(inst, &mut Rng::stream(seed, "init"));
    sp_iterate(inst, init, schedule)
}

pub fn sp_biases(inst: &Instance, s: &SurveyState) -> Result<Vec<Bias>, SpError> {
    let mut clamped = 0;
    (0..inst.num_vars())
        .map(|j| {
            let (pp, pm) = side_products(inst, j, s, None, &mut clamped);
            let plus = (1.0 - pp) * pm;
            let minus = (1.0 - pm) * pp;
            let free = pp * pm;
            let z = plus + minus + free;
            if z > 0.0 {
                Ok(Bias {
                    plus: plus / z,
                    minus: minus / z,
                    free: free / z,
                })
            } else {
                Err(SpError::Degenerate(j))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidConfig {
    /// Variables fixed per round.
    pub k: usize,
    pub schedule: Schedule,
    pub seed: u64,
    /// Surveys all below this count as trivial.
    pub trivial_threshold: f64,
    /// Carry surveys over between rounds instead of redrawing them.
    pub warm_start: bool,
    pub walksat: WalkSatConfig,
}

impl Default for SidConfig {
    fn default() -> Self {
        SidConfig {
            k: 100,
            schedule: Schedule::solver(0),
            seed: 0,
            trivial_threshold: 1e-3,
            warm_start: false,
            walksat: WalkSatConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidOutcome {
    pub outcome: DecimationOutcome,
    /// Whether the returned assignment satisfies every clause.
    pub satisfied: bool,
}

/// Initial surveys for the current reduced instance: either fresh random
/// values or the previous round's values where the edge still exists.
pub(crate) fn reinit<T: Copy>(
    dec: &Decimation,
    previous: Option<&HashMap<(ClauseId, VarId), T>>,
    mut fresh: impl FnMut() -> T,
) -> Vec<T> {
    let inst = dec.reduced();
    let mut out = Vec::with_capacity(inst.num_edges());
    for c in 0..inst.num_clauses() {
        for pos in 0..inst.clause(c).len() {
            let v = previous.and_then(|m| m.get(&dec.edge_key(c, pos)).copied());
            out.push(v.unwrap_or_else(&mut fresh));
        }
    }
    out
}

pub(crate) fn edge_map<T: Copy>(dec: &Decimation, values: &[T]) -> HashMap<(ClauseId, VarId), T> {
    let inst = dec.reduced();
    let mut m = HashMap::with_capacity(values.len());
    let mut e = 0;
    for c in 0..inst.num_clauses() {
        for pos in 0..inst.clause(c).len() {
            m.insert(dec.edge_key(c, pos), values[e]);
            e += 1;
        }
    }
    m
}

/// Survey-inspired decimation followed by WalkSAT on what is left.
pub fn sid(inst: &Instance, cfg: &SidConfig) -> SidOutcome {
    let mut dec = Decimation::new(inst);
    let mut rounds = Vec::new();
    let mut seeds = Rng::stream(cfg.seed, "init");
    let mut previous: Option<HashMap<(ClauseId, VarId), f64>> = None;
    let mut contradiction = false;
    let k = cfg.k.max(1);
    let handoff = loop {
        if dec.remaining() == 0 {
            break Handoff::AllFixed;
        }
        if dec.reduced().num_clauses() == 0 {
            break Handoff::NoClausesLeft;
        }
        let red = dec.reduced();
        let mut init_rng = Rng::new(seeds.next_u64());
        let init = SurveyState {
            offsets: red.edge_offsets(),
            eta: reinit(&dec, previous.as_ref().filter(|_| cfg.warm_start), || init_rng.unit()),
        };
        let schedule = cfg.schedule.reseeded(seeds.next_u64());
        let out = sp_iterate(red, init, &schedule);
        let mut record = RoundRecord {
            y: f64::INFINITY,
            sweeps: out.sweeps,
            converged: out.converged,
            fixed: 0,
            unfixed: 0,
            remaining: dec.remaining(),
        };
        if !out.converged {
            rounds.push(record);
            break Handoff::NonConvergence;
        }
        if out.surveys.max() < cfg.trivial_threshold {
            rounds.push(record);
            break Handoff::Paramagnetic;
        }
        let biases = match sp_biases(red, &out.surveys) {
            Ok(b) => b,
            Err(_) => {
                rounds.push(record);
                contradiction = true;
                break Handoff::NonConvergence;
            }
        };
        let ranked = rank_by_score(
            biases
                .iter()
                .enumerate()
                .map(|(v, b)| (v, b.polarization()))
                .collect(),
        );
        let fixes: Vec<(VarId, Spin)> = ranked
            .iter()
            .take(k)
            .map(|&(v, _)| (dec.original_var(v), biases[v].preferred()))
            .collect();
        previous = Some(edge_map(&dec, out.surveys.values()));
        dec.fix(&fixes);
        contradiction |= dec.offset() > 0.0;
        record.fixed = fixes.len();
        record.remaining = dec.remaining();
        rounds.push(record);
    };
    let outcome = dec.finish(&cfg.walksat, rounds, handoff, contradiction);
    SidOutcome {
        satisfied: outcome.energy == 0.0,
        outcome,
    }
}
