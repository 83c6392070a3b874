//! Large-y limits at non-trivial fixed points (α=4.2, where SP surveys are
//! far from zero).

use rsp_core::bp::{Schedule, ScheduleMode};
use rsp_core::io::{generate, GeneratorConfig};
use rsp_core::rsp::rsp_run;
use rsp_core::sp::{sp_biases, sp_run};
use rsp_core::spy::spy_run;

fn tight() -> Schedule {
    Schedule {
        mode: ScheduleMode::Synchronous,
        damping: 0.0,
        max_sweeps: 3000,
        tolerance: 1e-12,
        retry_damping: None,
    }
}

fn argmax(t: &[f64; 3]) -> usize {
    (0..3).max_by(|&i, &j| t[i].total_cmp(&t[j])).unwrap()
}

/// Converged runs either land on the same fixed point, agreeing on every
/// variable, or on different ones, disagreeing on most variables.
#[test]
fn relaxed_and_sp_agree_at_large_y() {
    let mut same = 0;
    for seed in 1..=4u64 {
        let inst = generate(&GeneratorConfig::new(500, 4.2, 3, seed)).unwrap();
        let sp = sp_run(&inst, &tight(), seed);
        let rsp = rsp_run(&inst, 30.0, &tight(), seed).unwrap();
        if !(sp.converged && rsp.converged) || sp.surveys.max() < 0.5 {
            continue;
        }
        let pairs: Vec<([f64; 3], [f64; 3])> = sp_biases(&inst, &sp.surveys)
            .unwrap()
            .iter()
            .zip(&rsp.beliefs)
            .map(|(b, t)| ([b.minus, b.plus, b.free], *t))
            .collect();
        let agree = pairs.iter().filter(|(w, t)| argmax(w) == argmax(t)).count();
        let gap = pairs
            .iter()
            .flat_map(|(w, t)| (0..3).map(move |i| (w[i] - t[i]).abs()))
            .fold(0.0, f64::max);
        if agree == pairs.len() {
            assert!(gap < 1e-6, "seed {seed}: gap {gap}");
            same += 1;
        } else {
            assert!(agree < pairs.len() / 2, "seed {seed}: partial agreement {agree}");
        }
    }
    assert!(same >= 1);
}

#[test]
fn spy_reproduces_sp_at_large_y() {
    let mut checked = 0;
    for seed in 1..=4u64 {
        let inst = generate(&GeneratorConfig::new(500, 4.2, 3, seed)).unwrap();
        let sp = sp_run(&inst, &tight(), seed);
        if !sp.converged || sp.surveys.max() < 0.5 {
            continue;
        }
        let spy = spy_run(&inst, 30.0, &tight(), seed);
        assert!(spy.converged, "seed {seed}");
        assert!(spy.surveys.max_diff(&sp.surveys) < 1e-8, "seed {seed}");
        checked += 1;
    }
    assert!(checked >= 2, "only {checked} non-trivial instances");
}
