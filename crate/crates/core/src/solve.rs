//! One entry point over all solvers, producing a uniform run report.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bp::{maxsat_graph, run_bp, Schedule};
use crate::decimation::{rank_by_score, Decimation, DecimationOutcome, Handoff, RoundRecord};
use crate::instance::{Assignment, Instance, Spin, VarId};
use crate::localsearch::{walksat, WalkSatConfig};
use crate::rng::Rng;
use crate::rsp::{degeneracy_report, rsp_decimate, RspConfig, YAdaptation};
use crate::sp::{sid, SidConfig};
use crate::spy::{sid_backtrack, SpyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Bp,
    Sp,
    Spy,
    Rsp,
    Walksat,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Bp,
        Algorithm::Sp,
        Algorithm::Spy,
        Algorithm::Rsp,
        Algorithm::Walksat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bp => "bp",
            Algorithm::Sp => "sp",
            Algorithm::Spy => "spy",
            Algorithm::Rsp => "rsp",
            Algorithm::Walksat => "walksat",
        }
    }

    /// Default y in the algorithm's own convention.
    pub fn default_y(self, weighted: bool) -> f64 {
        match self {
            Algorithm::Rsp if weighted => 10.0,
            Algorithm::Rsp => 4.0,
            Algorithm::Spy | Algorithm::Bp => 2.0,
            Algorithm::Sp | Algorithm::Walksat => f64::INFINITY,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown algorithm '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("SP-y is unweighted; use rsp or walksat for weighted instances")]
    WeightedSpy,
    #[error("invalid option: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub algorithm: Algorithm,
    /// `None` picks [`Algorithm::default_y`].
    pub y: Option<f64>,
    pub k: usize,
    pub seed: u64,
    pub schedule: Schedule,
    /// Probability of a backtracking round (spy).
    pub backtrack: f64,
    /// Lower y on non-convergence (rsp); `None` enables it for weighted
    /// instances only.
    pub adapt_y: Option<bool>,
    /// Fixing threshold on `|P(+1) - P(-1)|` (rsp, bp).
    pub b_min: f64,
    pub warm_start: bool,
    pub walksat: WalkSatConfig,
}

impl SolveOptions {
    pub fn new(algorithm: Algorithm) -> Self {
        SolveOptions {
            algorithm,
            y: None,
            k: 100,
            seed: 0,
            schedule: Schedule::solver(0),
            backtrack: 0.0,
            adapt_y: None,
            b_min: 0.5,
            warm_start: false,
            walksat: WalkSatConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: String| Err(SolveError::Invalid(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if let Some(y) = self.y {
            if !(y >= 0.0) {
                return bad(format!("y must be non-negative, got {y}"));
            }
        }
        if !(0.0..=1.0).contains(&self.backtrack) {
            return bad(format!("backtrack probability must lie in [0, 1], got {}", self.backtrack));
        }
        if !(self.b_min > 0.0 && self.b_min < 1.0) {
            return bad(format!("b_min must lie in (0, 1), got {}", self.b_min));
        }
        if !(0.0..=1.0).contains(&self.walksat.noise) || self.walksat.tries == 0 {
            return bad("walksat noise must lie in [0, 1] and tries be positive".into());
        }
        self.schedule
            .validate()
            .map_err(|e| SolveError::Invalid(e.to_string()))
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub y: f64,
    pub rounds: Vec<RoundRecord>,
    /// Equals the instance energy of `assignment`.
    pub energy: f64,
    pub assignment: Assignment,
    /// Variables fixed by message passing before local search took over.
    pub fixed: usize,
    pub handoff: Option<Handoff>,
    pub contradiction: bool,
    pub walksat_flips: u64,
    /// The peeled cover of `assignment` contains no `*`.
    pub degenerate: bool,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn model(&self) -> Vec<i64> {
        self.assignment.to_dimacs_literals()
    }
}

pub fn solve(inst: &Instance, opts: &SolveOptions) -> Result<RunReport, SolveError> {
    opts.validate()?;
    let weighted = !inst.is_unweighted();
    if opts.algorithm == Algorithm::Spy && weighted {
        return Err(SolveError::WeightedSpy);
    }
    let start = Instant::now();
    let y = opts.y.unwrap_or(opts.algorithm.default_y(weighted));
    let schedule = opts.schedule.reseeded(Rng::stream(opts.seed, "schedule").next_u64());
    let walksat_cfg = WalkSatConfig {
        seed: Rng::stream(opts.seed, "walksat").next_u64(),
        ..opts.walksat
    };
    let out = match opts.algorithm {
        Algorithm::Walksat => {
            let r = walksat(inst, &walksat_cfg.seeded_for(inst));
            DecimationOutcome {
                energy: inst.energy_of(r.best.values()),
                assignment: r.best,
                rounds: vec![],
                fixed_by_decimation: 0,
                handoff: Handoff::AllFixed,
                contradiction: false,
                walksat_flips: r.flips,
            }
        }
        Algorithm::Sp => {
            sid(
                inst,
                &SidConfig {
                    k: opts.k,
                    schedule,
                    seed: opts.seed,
                    warm_start: opts.warm_start,
                    walksat: walksat_cfg,
                    ..SidConfig::default()
                },
            )
            .outcome
        }
        Algorithm::Spy => sid_backtrack(
            inst,
            &SpyConfig {
                y,
                k: opts.k,
                backtrack: opts.backtrack,
                schedule,
                seed: opts.seed,
                warm_start: opts.warm_start,
                walksat: walksat_cfg,
                ..SpyConfig::default()
            },
        ),
        Algorithm::Rsp => rsp_decimate(
            inst,
            &RspConfig {
                y,
                k: opts.k,
                b_min: opts.b_min,
                schedule,
                seed: opts.seed,
                adaptation: opts.adapt_y.unwrap_or(weighted).then(YAdaptation::default),
                warm_start: opts.warm_start,
                walksat: walksat_cfg,
                max_rounds: None,
            },
        ),
        Algorithm::Bp => bp_decimate(inst, y, opts.k, opts.b_min, &schedule, opts.seed, &walksat_cfg),
    };
    let handoff = (opts.algorithm != Algorithm::Walksat).then_some(out.handoff);
    let energy = inst.energy_of(out.assignment.values());
    let degenerate = degeneracy_report(inst, &out.assignment).degenerate;
    Ok(RunReport {
        algorithm: opts.algorithm,
        y,
        rounds: out.rounds,
        energy,
        assignment: out.assignment,
        fixed: out.fixed_by_decimation,
        handoff,
        contradiction: out.contradiction,
        walksat_flips: out.walksat_flips,
        degenerate,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Decimation on plain sum-product marginals of the Max-SAT graph at rate y.
pub fn bp_decimate(
    inst: &Instance,
    y: f64,
    k: usize,
    b_min: f64,
    schedule: &Schedule,
    seed: u64,
    ws: &WalkSatConfig,
) -> DecimationOutcome {
    let mut dec = Decimation::new(inst);
    let mut rounds = Vec::new();
    let mut seeds = Rng::stream(seed, "init");
    let mut contradiction = false;
    let k = k.max(1);
    let max_rounds = 2 * inst.num_vars() / k + 200;
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
        let out = run_bp(&maxsat_graph(red, y), &schedule.reseeded(seeds.next_u64()));
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
                break Handoff::NonConvergence;
            }
        };
        record.converged = true;
        let scored: Vec<(VarId, f64)> = out
            .beliefs
            .iter()
            .enumerate()
            .map(|(v, b)| (v, (b[1] - b[0]).abs()))
            .filter(|&(_, s)| s > b_min)
            .collect();
        if scored.is_empty() {
            rounds.push(record);
            break Handoff::NoQualifyingVariable;
        }
        let fixes: Vec<(VarId, Spin)> = rank_by_score(scored)
            .into_iter()
            .take(k)
            .map(|(v, _)| {
                let b = &out.beliefs[v];
                (dec.original_var(v), if b[1] > b[0] { Spin::Plus } else { Spin::Minus })
            })
            .collect();
        dec.fix(&fixes);
        contradiction |= dec.offset() > 0.0;
        record.fixed = fixes.len();
        record.remaining = dec.remaining();
        rounds.push(record);
    };
    dec.finish(ws, rounds, handoff, contradiction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{example_weighted, Clause, CoverClass, Literal};
    use crate::io::{generate, GeneratorConfig};
    use crate::oracle::brute_min_energy;

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("foo".parse::<Algorithm>().is_err());
    }

    #[test]
    fn weighted_spy_is_rejected() {
        let err = solve(&example_weighted(), &SolveOptions::new(Algorithm::Spy)).unwrap_err();
        assert_eq!(err, SolveError::WeightedSpy);
    }

    #[test]
    fn bad_options_are_rejected() {
        let inst = example_weighted();
        let mut o = SolveOptions::new(Algorithm::Rsp);
        o.k = 0;
        assert!(solve(&inst, &o).is_err());
        let mut o = SolveOptions::new(Algorithm::Rsp);
        o.b_min = 1.0;
        assert!(solve(&inst, &o).is_err());
    }

    #[test]
    fn every_solver_reaches_the_optimum_of_the_worked_example() {
        let inst = example_weighted();
        for a in Algorithm::ALL {
            let inst = if a == Algorithm::Spy { inst.unweighted() } else { inst.clone() };
            let min = brute_min_energy(&inst).unwrap().min;
            let mut o = SolveOptions::new(a);
            o.y = (a == Algorithm::Rsp).then_some(8.0);
            let r = solve(&inst, &o).unwrap();
            assert_eq!(r.energy, inst.energy(&r.assignment).unwrap());
            assert_eq!(r.energy, min, "{a}");
            assert!(matches!(inst.classify_cover(&inst.peel(&r.assignment)), CoverClass::VCover(v) if v == r.energy));
        }
    }

    #[test]
    fn trivially_satisfiable_instance() {
        let clauses = (0..10)
            .map(|i| Clause::unweighted(vec![Literal::positive(i), Literal::positive((i + 1) % 10)]))
            .collect();
        let inst = Instance::new(10, clauses).unwrap();
        for a in Algorithm::ALL {
            let r = solve(&inst, &SolveOptions::new(a)).unwrap();
            assert_eq!(r.energy, 0.0, "{a}");
        }
    }

    #[test]
    fn bp_decimation_on_a_random_instance() {
        let inst = generate(&GeneratorConfig::new(300, 4.0, 3, 3)).unwrap();
        let mut o = SolveOptions::new(Algorithm::Bp);
        o.k = 20;
        o.b_min = 0.2;
        let r = solve(&inst, &o).unwrap();
        assert_eq!(r.energy, inst.energy(&r.assignment).unwrap());
        assert!(r.fixed > 0);
    }

    #[test]
    fn same_seed_same_report() {
        let inst = generate(&GeneratorConfig::new(200, 4.5, 3, 9)).unwrap();
        for a in [Algorithm::Rsp, Algorithm::Spy, Algorithm::Sp] {
            let mut o = SolveOptions::new(a);
            o.k = 20;
            o.seed = 5;
            let x = solve(&inst, &o).unwrap();
            let y = solve(&inst, &o).unwrap();
            assert_eq!(x.assignment, y.assignment);
            assert_eq!(x.rounds, y.rounds);
        }
    }
}
