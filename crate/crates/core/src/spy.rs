//! SP-y: survey propagation with a finite penalty `exp(-2y)` per violated
//! clause, and decimation with optional backtracking for Max-SAT.
//!
//! A survey on edge (c, i) is the probability that `c` warns `i` toward the
//! value satisfying `c`. A variable's field `h` counts warnings toward +1
//! minus warnings toward -1.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bp::{Schedule, ScheduleMode};
use crate::decimation::{rank_by_score, Decimation, DecimationOutcome, Handoff, RoundRecord};
use crate::instance::{ClauseId, Instance, Spin, VarId};
use crate::localsearch::WalkSatConfig;
use crate::rng::Rng;
use crate::sp::{edge_map, products_excluding_each, reinit, Bias, SpOutcome, SurveyState, SweepStats};

/// Distribution of a field over `[min_h, min_h + probs.len())`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDistribution {
    pub min_h: i64,
    pub probs: Vec<f64>,
}

impl FieldDistribution {
    pub fn get(&self, h: i64) -> f64 {
        let i = h - self.min_h;
        if i < 0 || i as usize >= self.probs.len() {
            0.0
        } else {
            self.probs[i as usize]
        }
    }

    pub fn max_h(&self) -> i64 {
        self.min_h + self.probs.len() as i64 - 1
    }

    pub fn plus(&self) -> f64 {
        (1..=self.max_h()).map(|h| self.get(h)).sum()
    }

    pub fn minus(&self) -> f64 {
        (self.min_h..0).map(|h| self.get(h)).sum()
    }

    pub fn zero(&self) -> f64 {
        self.get(0)
    }
}

fn penalty(y: f64, n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        (-2.0 * y * n as f64).exp()
    }
}

/// Incoming warnings of `j` other than from `exclude`, in ascending clause
/// order: (probability, +1 when the warning pushes toward +1).
fn incoming(
    inst: &Instance,
    j: VarId,
    s: &SurveyState,
    exclude: Option<ClauseId>,
) -> Vec<(ClauseId, f64, i64)> {
    let mut w: Vec<(ClauseId, f64, i64)> = inst
        .adjacency(j)
        .iter()
        .filter(|o| Some(o.clause) != exclude)
        .map(|o| {
            let dir = match inst.clause(o.clause).literals[o.pos].sat {
                Spin::Plus => 1,
                Spin::Minus => -1,
            };
            (o.clause, s.get(o.clause, o.pos).clamp(0.0, 1.0), dir)
        })
        .collect();
    w.sort_by_key(|e| e.0);
    w
}

/// Field distribution of `j` built one neighbor at a time in ascending clause
/// order, multiplying by `exp(-2y)` whenever a new warning shrinks `|h|`.
pub fn field_distribution(
    inst: &Instance,
    j: VarId,
    exclude: Option<ClauseId>,
    s: &SurveyState,
    y: f64,
) -> FieldDistribution {
    let warnings = incoming(inst, j, s, exclude);
    let d = warnings.len() as i64;
    let mut p = vec![0.0; (2 * d + 1) as usize];
    p[d as usize] = 1.0;
    let pen = penalty(y, 1);
    for &(_, eta, dir) in &warnings {
        let mut next = vec![0.0; p.len()];
        for (i, &old) in p.iter().enumerate() {
            if old == 0.0 {
                continue;
            }
            next[i] += (1.0 - eta) * old;
            let t = i as i64 + dir;
            if (0..p.len() as i64).contains(&t) {
                let h = t - d;
                let shrinks = (dir > 0 && h <= 0) || (dir < 0 && h >= 0);
                next[t as usize] += eta * old * if shrinks { pen } else { 1.0 };
            }
        }
        p = next;
    }
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    FieldDistribution { min_h: -d, probs: p }
}

/// Distribution of the number of successes of independent events.
fn count_distribution(probs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut dist = vec![1.0];
    for p in probs {
        convolve(&mut dist, p);
    }
    dist
}

/// (P(h > 0), P(h < 0), P(h = 0)) from the warning counts on each side,
/// penalizing `min(H+, H-)` violated warnings.
fn combine(plus: &[f64], minus: &[f64], y: f64) -> Bias {
    let step = (-2.0 * y).exp();
    let (mut wp, mut wm, mut w0) = (0.0, 0.0, 0.0);
    let mut tail: f64 = plus.iter().sum();
    let mut pen = 1.0;
    for (b, &pb) in minus.iter().enumerate() {
        tail -= plus.get(b).copied().unwrap_or(0.0);
        wp += pb * pen * tail.max(0.0);
        pen *= step;
    }
    let mut tail: f64 = minus.iter().sum();
    let mut pen = 1.0;
    for (a, &pa) in plus.iter().enumerate() {
        let pm = minus.get(a).copied().unwrap_or(0.0);
        tail -= pm;
        wm += pa * pen * tail.max(0.0);
        w0 += pa * pen * pm;
        pen *= step;
    }
    let z = wp + wm + w0;
    Bias {
        plus: wp / z,
        minus: wm / z,
        free: w0 / z,
    }
}

fn side_counts(
    inst: &Instance,
    j: VarId,
    s: &SurveyState,
    exclude: Option<ClauseId>,
) -> (Vec<f64>, Vec<f64>) {
    let adj = inst.adjacency(j);
    let side = |occ: &[crate::instance::Occurrence]| {
        count_distribution(
            occ.iter()
                .filter(|o| Some(o.clause) != exclude)
                .map(|o| s.get(o.clause, o.pos).clamp(0.0, 1.0)),
        )
    };
    (side(&adj.plus), side(&adj.minus))
}

/// Field probabilities of `j` with clause `exclude` left out.
pub fn cavity_bias(inst: &Instance, j: VarId, exclude: Option<ClauseId>, s: &SurveyState, y: f64) -> Bias {
    let (p, m) = side_counts(inst, j, s, exclude);
    combine(&p, &m, y)
}

fn forced_to(b: &Bias, v: Spin) -> f64 {
    match v {
        Spin::Plus => b.plus,
        Spin::Minus => b.minus,
    }
}

/// Adds an independent event of probability `p` to a count distribution.
fn convolve(dist: &mut Vec<f64>, p: f64) {
    dist.push(0.0);
    for a in (1..dist.len()).rev() {
        dist[a] = dist[a] * (1.0 - p) + dist[a - 1] * p;
    }
    dist[0] *= 1.0 - p;
}

/// Inverse of [`convolve`], run from whichever end keeps errors from growing.
fn deconvolve(dist: &[f64], p: f64) -> Vec<f64> {
    let n = dist.len() - 1;
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    if p <= 0.5 {
        let mut prev = 0.0;
        for a in 0..n {
            out[a] = ((dist[a] - p * prev) / (1.0 - p)).max(0.0);
            prev = out[a];
        }
    } else {
        let mut next = 0.0;
        for a in (0..n).rev() {
            out[a] = ((dist[a + 1] - (1.0 - p) * next) / p).max(0.0);
            next = out[a];
        }
    }
    out
}

/// Per-variable warning-count distributions for both sides.
struct FieldCache {
    plus: Vec<Vec<f64>>,
    minus: Vec<Vec<f64>>,
}

impl FieldCache {
    fn build(inst: &Instance, s: &SurveyState) -> Self {
        let (plus, minus) = (0..inst.num_vars())
            .map(|j| side_counts(inst, j, s, None))
            .unzip();
        FieldCache { plus, minus }
    }

    fn side(&mut self, inst: &Instance, c: ClauseId, pos: usize) -> &mut Vec<f64> {
        let l = inst.clause(c).literals[pos];
        match l.sat {
            Spin::Plus => &mut self.plus[l.var],
            Spin::Minus => &mut self.minus[l.var],
        }
    }

    fn cavity(&self, inst: &Instance, c: ClauseId, pos: usize, eta: f64, y: f64) -> Bias {
        let l = inst.clause(c).literals[pos];
        let eta = eta.clamp(0.0, 1.0);
        match l.sat {
            Spin::Plus => combine(&deconvolve(&self.plus[l.var], eta), &self.minus[l.var], y),
            Spin::Minus => combine(&self.plus[l.var], &deconvolve(&self.minus[l.var], eta), y),
        }
    }

    fn replace(&mut self, inst: &Instance, c: ClauseId, pos: usize, old: f64, new: f64) {
        let side = self.side(inst, c, pos);
        let mut d = deconvolve(side, old.clamp(0.0, 1.0));
        convolve(&mut d, new.clamp(0.0, 1.0));
        *side = d;
    }
}

fn clause_update(inst: &Instance, c: ClauseId, s: &SurveyState, cache: &FieldCache, y: f64) -> Vec<f64> {
    let forced: Vec<f64> = inst
        .clause(c)
        .literals
        .iter()
        .enumerate()
        .map(|(pos, l)| forced_to(&cache.cavity(inst, c, pos, s.get(c, pos), y), l.violating()))
        .collect();
    products_excluding_each(&forced)
}

/// The survey on edge (c, pos) as (toward +1, toward -1, no warning).
pub fn tri_survey(inst: &Instance, s: &SurveyState, c: ClauseId, pos: usize) -> (f64, f64, f64) {
    let eta = s.get(c, pos);
    match inst.clause(c).literals[pos].sat {
        Spin::Plus => (eta, 0.0, 1.0 - eta),
        Spin::Minus => (0.0, eta, 1.0 - eta),
    }
}

pub fn spy_sweep(
    inst: &Instance,
    s: &mut SurveyState,
    y: f64,
    damping: f64,
    rng: Option<&mut Rng>,
) -> SweepStats {
    let mut stats = SweepStats::default();
    let mut cache = FieldCache::build(inst, s);
    match rng {
        None => {
            let old = s.clone();
            for c in 0..inst.num_clauses() {
                for (p, v) in clause_update(inst, c, &old, &cache, y).into_iter().enumerate() {
                    let o = old.get(c, p);
                    let n = (1.0 - damping) * v + damping * o;
                    stats.max_change = stats.max_change.max((n - o).abs());
                    s.set(c, p, n);
                }
            }
        }
        Some(rng) => {
            let mut order: Vec<ClauseId> = (0..inst.num_clauses()).collect();
            rng.shuffle(&mut order);
            for c in order {
                for (p, v) in clause_update(inst, c, s, &cache, y).into_iter().enumerate() {
                    let o = s.get(c, p);
                    let n = (1.0 - damping) * v + damping * o;
                    stats.max_change = stats.max_change.max((n - o).abs());
                    cache.replace(inst, c, p, o, n);
                    s.set(c, p, n);
                }
            }
        }
    }
    stats
}

pub fn spy_iterate(inst: &Instance, init: SurveyState, y: f64, schedule: &Schedule) -> SpOutcome {
    let first = iterate_once(inst, init.clone(), y, schedule, schedule.damping);
    match schedule.retry_damping {
        Some(d) if !first.converged && d != schedule.damping => {
            let second = iterate_once(inst, init, y, schedule, d);
            SpOutcome {
                sweeps: first.sweeps + second.sweeps,
                ..second
            }
        }
        _ => first,
    }
}

fn iterate_once(inst: &Instance, mut s: SurveyState, y: f64, schedule: &Schedule, damping: f64) -> SpOutcome {
    let mut rng = match schedule.mode {
        ScheduleMode::RandomSequential { seed } => Some(Rng::stream(seed, "spy-order")),
        ScheduleMode::Synchronous => None,
    };
    for sweep in 1..=schedule.max_sweeps {
        let st = spy_sweep(inst, &mut s, y, damping, rng.as_mut());
        if st.max_change < schedule.tolerance {
            return SpOutcome {
                converged: true,
                sweeps: sweep,
                surveys: s,
                clamped: 0,
            };
        }
    }
    SpOutcome {
        converged: false,
        sweeps: schedule.max_sweeps,
        surveys: s,
        clamped: 0,
    }
}

pub fn spy_run(inst: &Instance, y: f64, schedule: &Schedule, seed: u64) -> SpOutcome {
    let init = SurveyState::random(inst, &mut Rng::stream(seed, "init"));
    spy_iterate(inst, init, y, schedule)
}

/// Full-field probabilities of every variable.
pub fn spy_biases(inst: &Instance, s: &SurveyState, y: f64) -> Vec<Bias> {
    (0..inst.num_vars())
        .map(|j| cavity_bias(inst, j, None, s, y))
        .collect()
}

/// Bisection bounds for choosing y per round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YBisection {
    pub lo: f64,
    pub hi: f64,
    pub steps: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpyConfig {
    pub y: f64,
    pub k: usize,
    /// Probability of a backtracking step.
    pub backtrack: f64,
    pub schedule: Schedule,
    pub seed: u64,
    /// Every fixing score below this means the biases carry no information.
    pub paramagnetic_threshold: f64,
    pub warm_start: bool,
    /// Choose y by bisection each round instead of using `y`.
    pub bisection: Option<YBisection>,
    pub walksat: WalkSatConfig,
    /// Safety cap on decimation rounds; `None` means `4 * N / k + 100`.
    pub max_rounds: Option<usize>,
}

impl Default for SpyConfig {
    fn default() -> Self {
        SpyConfig {
            y: 2.0,
            k: 100,
            backtrack: 0.0,
            schedule: Schedule::solver(0),
            seed: 0,
            paramagnetic_threshold: 0.01,
            warm_start: false,
            bisection: None,
            walksat: WalkSatConfig::default(),
            max_rounds: None,
        }
    }
}

/// Largest y in `[lo, hi]` at which SP-y still converges, assuming
/// convergence is lost monotonically as y grows.
pub fn bisect_y(inst: &Instance, b: &YBisection, schedule: &Schedule, seed: u64) -> f64 {
    let converges = |y: f64| spy_run(inst, y, schedule, seed).converged;
    if converges(b.hi) {
        return b.hi;
    }
    if !converges(b.lo) {
        return b.lo;
    }
    let (mut lo, mut hi) = (b.lo, b.hi);
    for _ in 0..b.steps {
        let mid = 0.5 * (lo + hi);
        if converges(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Field probabilities of a fixed variable, from the surveys its clauses
/// would send given the current reduced instance.
fn fixed_bias(dec: &Decimation, s: &SurveyState, j: VarId, y: f64) -> Bias {
    let inst = dec.original();
    let red = dec.reduced();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for o in inst.adjacency(j).iter() {
        let clause = inst.clause(o.clause);
        let reduced_clause = dec.reduced_clause(o.clause);
        let mut eta = 1.0;
        for (pos, l) in clause.literals.iter().enumerate() {
            if pos == o.pos {
                continue;
            }
            match (dec.fixes().get(&l.var), dec.reduced_var(l.var)) {
                (Some(&v), _) if v == l.sat => {
                    eta = 0.0;
                    break;
                }
                (Some(_), _) => {}
                (None, Some(k)) => {
                    let b = cavity_bias(red, k, reduced_clause, s, y);
                    eta *= forced_to(&b, l.violating());
                }
                (None, None) => unreachable!("unfixed variable missing from the reduction"),
            }
        }
        match clause.literals[o.pos].sat {
            Spin::Plus => plus.push(eta),
            Spin::Minus => minus.push(eta),
        }
    }
    combine(
        &count_distribution(plus.into_iter()),
        &count_distribution(minus.into_iter()),
        y,
    )
}

/// Decimation driven by SP-y, unfixing variables with probability
/// `backtrack` per round, then weighted WalkSAT on the remainder.
pub fn sid_backtrack(inst: &Instance, cfg: &SpyConfig) -> DecimationOutcome {
    let mut dec = Decimation::new(inst);
    let mut rounds = Vec::new();
    let mut seeds = Rng::stream(cfg.seed, "init");
    let mut coin = Rng::stream(cfg.seed, "backtrack");
    let mut previous: Option<HashMap<(ClauseId, VarId), f64>> = None;
    let mut contradiction = false;
    let k = cfg.k.max(1);
    let max_rounds = cfg
        .max_rounds
        .unwrap_or(4 * inst.num_vars() / k + 100);
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
        let round_seed = seeds.next_u64();
        let schedule = cfg.schedule.reseeded(seeds.next_u64());
        let y = match &cfg.bisection {
            Some(b) => bisect_y(red, b, &schedule, round_seed),
            None => cfg.y,
        };
        let mut init_rng = Rng::new(round_seed);
        let values = reinit(&dec, previous.as_ref().filter(|_| cfg.warm_start), || init_rng.unit());
        let init = SurveyState::from_values(red, values);
        let out = spy_iterate(red, init, y, &schedule);
        let mut record = RoundRecord {
            y,
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
        let biases = spy_biases(red, &out.surveys, y);
        if biases.iter().all(|b| b.polarization() < cfg.paramagnetic_threshold) {
            rounds.push(record);
            break Handoff::Paramagnetic;
        }
        let mut unfix: Vec<VarId> = Vec::new();
        if coin.unit() < cfg.backtrack {
            let scored: Vec<(VarId, f64)> = dec
                .fixes()
                .iter()
                .map(|(&j, &x)| {
                    let b = fixed_bias(&dec, &out.surveys, j, y);
                    (j, -(x.value() as f64) * (b.plus - b.minus))
                })
                .filter(|&(_, score)| score > 0.0)
                .collect();
            unfix = rank_by_score(scored).into_iter().take(k).map(|e| e.0).collect();
        }
        previous = Some(edge_map(&dec, out.surveys.values()));
        if unfix.is_empty() {
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
            dec.fix(&fixes);
            record.fixed = fixes.len();
        } else {
            dec.unfix(&unfix);
            record.unfixed = unfix.len();
        }
        contradiction |= dec.offset() > 0.0;
        record.remaining = dec.remaining();
        rounds.push(record);
    };
    dec.finish(&cfg.walksat, rounds, handoff, contradiction)
}
