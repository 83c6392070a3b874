//! WalkSAT and weighted WalkSAT.

use serde::{Deserialize, Serialize};

use crate::instance::{Assignment, Instance, Spin, VarId};
use crate::rng::{mix64, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkSatConfig {
    /// Probability of a random-walk move.
    pub noise: f64,
    /// Flips per try; `None` means `100 * N`.
    pub max_flips: Option<u64>,
    pub tries: u32,
    pub seed: u64,
    /// Pick violated clauses with probability proportional to weight.
    pub weighted: bool,
}

impl Default for WalkSatConfig {
    fn default() -> Self {
        WalkSatConfig {
            noise: 0.5,
            max_flips: None,
            tries: 10,
            seed: 0,
            weighted: true,
        }
    }
}

impl WalkSatConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same configuration with the seed tied to the instance content, so the
    /// same (sub-)instance always gets the same answer.
    pub fn seeded_for(&self, inst: &Instance) -> Self {
        WalkSatConfig {
            seed: mix64(self.seed ^ inst.fingerprint()),
            ..*self
        }
    }

    fn flips_for(&self, n: usize) -> u64 {
        self.max_flips.unwrap_or(100 * n as u64).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkSatResult {
    pub best: Assignment,
    pub best_energy: f64,
    pub flips: u64,
}

/// Incremental bookkeeping of clause truth counts and break weights.
#[derive(Debug, Clone)]
pub struct WalkState<'a> {
    inst: &'a Instance,
    x: Vec<Spin>,
    true_count: Vec<u32>,
    /// Sum of the variable ids of the true literals; equals the critical
    /// variable whenever `true_count == 1`.
    true_sum: Vec<u64>,
    break_w: Vec<f64>,
    violated: Vec<usize>,
    violated_pos: Vec<usize>,
    tree: Fenwick,
    energy: f64,
}

const NOT_VIOLATED: usize = usize::MAX;

impl<'a> WalkState<'a> {
    pub fn new(inst: &'a Instance, x: Vec<Spin>) -> Self {
        assert_eq!(x.len(), inst.num_vars());
        let m = inst.num_clauses();
        let mut st = WalkState {
            inst,
            x,
            true_count: vec![0; m],
            true_sum: vec![0; m],
            break_w: vec![0.0; inst.num_vars()],
            violated: Vec::new(),
            violated_pos: vec![NOT_VIOLATED; m],
            tree: Fenwick::new(m),
            energy: 0.0,
        };
        for (c, clause) in inst.clauses().iter().enumerate() {
            for l in &clause.literals {
                if st.x[l.var] == l.sat {
                    st.true_count[c] += 1;
                    st.true_sum[c] += l.var as u64;
                }
            }
            match st.true_count[c] {
                0 => st.mark_violated(c),
                1 => st.break_w[st.true_sum[c] as usize] += clause.weight,
                _ => {}
            }
        }
        st
    }

    fn mark_violated(&mut self, c: usize) {
        self.violated_pos[c] = self.violated.len();
        self.violated.push(c);
        let w = self.inst.clause(c).weight;
        self.tree.add(c, w);
        self.energy += w;
    }

    fn mark_satisfied(&mut self, c: usize) {
        let pos = self.violated_pos[c];
        let last = *self.violated.last().expect("clause was violated");
        self.violated.swap_remove(pos);
        if last != c {
            self.violated_pos[last] = pos;
        }
        self.violated_pos[c] = NOT_VIOLATED;
        let w = self.inst.clause(c).weight;
        self.tree.add(c, -w);
        self.energy -= w;
    }

    pub fn assignment(&self) -> &[Spin] {
        &self.x
    }

    /// Incrementally tracked violated weight.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn num_violated(&self) -> usize {
        self.violated.len()
    }

    /// Weight of clauses that `v` alone satisfies.
    pub fn break_weight(&self, v: VarId) -> f64 {
        self.break_w[v]
    }

    /// Weight of violated clauses containing `v`.
    pub fn make_weight(&self, v: VarId) -> f64 {
        self.inst
            .adjacency(v)
            .iter()
            .filter(|o| self.true_count[o.clause] == 0)
            .map(|o| self.inst.clause(o.clause).weight)
            .fold(0.0, |a, w| a + w)
    }

    pub fn flip(&mut self, v: VarId) {
        let inst = self.inst;
        self.x[v] = self.x[v].flip();
        let now = self.x[v];
        for o in inst.adjacency(v).iter() {
            let c = o.clause;
            let lit = inst.clause(c).literals[o.pos];
            let w = inst.clause(c).weight;
            if lit.sat == now {
                self.true_count[c] += 1;
                self.true_sum[c] += v as u64;
                match self.true_count[c] {
                    1 => {
                        self.mark_satisfied(c);
                        self.break_w[v] += w;
                    }
                    2 => {
                        let other = (self.true_sum[c] - v as u64) as usize;
                        self.break_w[other] -= w;
                    }
                    _ => {}
                }
            } else {
                self.true_count[c] -= 1;
                self.true_sum[c] -= v as u64;
                match self.true_count[c] {
                    0 => {
                        self.mark_violated(c);
                        self.break_w[v] -= w;
                    }
                    1 => {
                        let crit = self.true_sum[c] as usize;
                        self.break_w[crit] += w;
                    }
                    _ => {}
                }
            }
        }
    }

    fn pick_violated(&self, rng: &mut Rng, weighted: bool) -> usize {
        if weighted {
            let total = self.tree.total();
            if total > 0.0 {
                let c = self.tree.find(rng.unit() * total);
                if c < self.violated_pos.len() && self.violated_pos[c] != NOT_VIOLATED {
                    return c;
                }
            }
        }
        self.violated[rng.index(self.violated.len())]
    }
}

/// Runs WalkSAT and returns the best assignment seen over all tries.
pub fn walksat(inst: &Instance, cfg: &WalkSatConfig) -> WalkSatResult {
    let n = inst.num_vars();
    let mut rng = Rng::stream(cfg.seed, "walksat");
    let max_flips = cfg.flips_for(n);
    let mut best: Option<(Vec<Spin>, f64)> = None;
    let mut total_flips = 0;
    for _ in 0..cfg.tries.max(1) {
        let x0: Vec<Spin> = (0..n).map(|_| Spin::from_bool(rng.coin())).collect();
        let mut st = WalkState::new(inst, x0);
        let mut try_best = (st.x.clone(), st.energy);
        let mut flips = 0;
        while flips < max_flips && !st.violated.is_empty() {
            let c = st.pick_violated(&mut rng, cfg.weighted);
            let lits = &inst.clause(c).literals;
            let v = if rng.unit() < cfg.noise {
                lits[rng.index(lits.len())].var
            } else {
                let mut chosen = lits[0].var;
                let mut best_break = f64::INFINITY;
                let mut ties = 0u64;
                for l in lits {
                    let b = st.break_w[l.var];
                    if b < best_break {
                        best_break = b;
                        chosen = l.var;
                        ties = 1;
                    } else if b == best_break {
                        ties += 1;
                        if rng.below(ties) == 0 {
                            chosen = l.var;
                        }
                    }
                }
                chosen
            };
            st.flip(v);
            flips += 1;
            if st.energy < try_best.1 - 1e-9 {
                try_best = (st.x.clone(), st.energy);
            }
        }
        total_flips += flips;
        let e = inst.energy_of(&try_best.0);
        if best.as_ref().is_none_or(|b| e < b.1) {
            best = Some((try_best.0, e));
        }
        if best.as_ref().is_some_and(|b| b.1 == 0.0) {
            break;
        }
    }
    let (x, e) = best.expect("at least one try");
    WalkSatResult {
        best: Assignment::new(x),
        best_energy: e,
        flips: total_flips,
    }
}

/// Binary indexed tree over clause weights, used for weight-proportional
/// selection of violated clauses.
#[derive(Debug, Clone)]
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick {
            tree: vec![0.0; n + 1],
        }
    }

    fn add(&mut self, idx: usize, delta: f64) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        let mut i = self.tree.len() - 1;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    /// Smallest index whose prefix sum exceeds `target`.
    fn find(&self, mut target: f64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}
