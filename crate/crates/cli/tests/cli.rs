use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rsp_core::instance::{Assignment, Spin};
use rsp_core::io::parse_dimacs_str;

const EXAMPLE: &str = "p wcnf 3 6\n1 -1 2 0\n2 -2 3 0\n3 -3 1 0\n4 -1 -2 -3 0\n5 1 2 3 0\n6 1 2 0\n";

fn rsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsp")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn line<'a>(out: &'a str, prefix: &str) -> &'a str {
    out.lines().find(|l| l.starts_with(prefix)).unwrap_or_else(|| panic!("no {prefix} line in {out}"))
}

fn model(out: &str) -> Vec<i64> {
    line(out, "v ").split_whitespace().skip(1).map(|t| t.parse().unwrap()).collect()
}

#[test]
fn solve_example_rsp() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ex.wcnf", EXAMPLE);
    let report = dir.path().join("report.json");
    let o = rsp(&[
        "solve",
        "--alg",
        "rsp",
        "--y",
        "8",
        "--input",
        input.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(line(&out, "o "), "o 1");
    let m = model(&out);
    assert_eq!(&m[..2], &[1, -2]);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(json["energy"].as_f64(), Some(1.0));
    assert_eq!(json["algorithm"], "rsp");
}

#[test]
fn printed_energy_matches_printed_model() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("r.wcnf");
    let g = rsp(&[
        "generate", "--n", "60", "--alpha", "4.5", "--wmax", "4", "--seed", "3", "--out",
        input.to_str().unwrap(),
    ]);
    assert!(g.status.success());
    let inst = parse_dimacs_str(&std::fs::read_to_string(&input).unwrap()).unwrap();
    for alg in ["bp", "sp", "rsp", "walksat"] {
        let o = rsp(&["solve", "--alg", alg, "--k", "5", "--input", input.to_str().unwrap()]);
        assert!(o.status.success(), "{alg}: {}", String::from_utf8_lossy(&o.stderr));
        let out = stdout(&o);
        let m = model(&out);
        assert_eq!(m.len(), 60);
        let a = Assignment::new(m.iter().map(|&l| if l > 0 { Spin::Plus } else { Spin::Minus }).collect());
        let e: f64 = line(&out, "o ")[2..].parse().unwrap();
        assert_eq!(e, inst.energy(&a).unwrap(), "{alg}");
    }
}

#[test]
fn walksat_on_satisfiable_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "sat.cnf", "p cnf 3 2\n1 2 0\n-2 3 0\n");
    let o = rsp(&["solve", "--alg", "walksat", "--input", input.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(line(&stdout(&o), "o "), "o 0");
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let weighted = write(dir.path(), "ex.wcnf", EXAMPLE);
    let bad = write(dir.path(), "bad.cnf", "p cnf 2 1\n1 x 0\n");
    let spy = rsp(&["solve", "--alg", "spy", "--input", weighted.to_str().unwrap()]);
    assert_eq!(spy.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&spy.stderr).contains("unweighted"));
    assert_eq!(rsp(&["solve", "--input", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(rsp(&["solve", "--input", "/nonexistent/x.cnf"]).status.code(), Some(2));
    assert_eq!(rsp(&["solve", "--bogus"]).status.code(), Some(2));
    assert_eq!(rsp(&["generate", "--n", "10", "--alpha", "-1"]).status.code(), Some(2));
}

#[test]
fn generate_sizes_weights_and_reproducibility() {
    let o = rsp(&["generate", "--n", "10000", "--alpha", "4.7", "--kclause", "3", "--wmax", "1", "--seed", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("p cnf 10000 47000\n"));
    let inst = parse_dimacs_str(&text).unwrap();
    assert_eq!(inst.num_clauses(), 47000);
    assert!(inst.clauses().iter().all(|c| c.literals.len() == 3));

    let w = rsp(&["generate", "--n", "200", "--alpha", "4.6", "--wmax", "5", "--seed", "2"]);
    let inst = parse_dimacs_str(&stdout(&w)).unwrap();
    assert!(stdout(&w).starts_with("p wcnf"));
    assert!(inst.clauses().iter().all(|c| (1.0..=5.0).contains(&c.weight) && c.weight.fract() == 0.0));
    let again = rsp(&["generate", "--n", "200", "--alpha", "4.6", "--wmax", "5", "--seed", "2"]);
    assert_eq!(w.stdout, again.stdout);
}

#[test]
fn sweep_rows_and_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.cnf");
    rsp(&["generate", "--n", "150", "--alpha", "4.4", "--seed", "5", "--out", input.to_str().unwrap()]);
    let csv = dir.path().join("s.csv");
    let o = rsp(&[
        "sweep-y", "--alg", "rsp", "--k", "10", "--ys", "1:3:0.5", "--jobs", "2", "--input",
        input.to_str().unwrap(), "--out", csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "y,violations,converged,fixed");
    assert_eq!(rows.len(), 1 + 5);

    let single = rsp(&["sweep-y", "--alg", "rsp", "--k", "10", "--ys", "2", "--input", input.to_str().unwrap()]);
    let row = stdout(&single).lines().nth(1).unwrap().to_string();
    let solved = rsp(&["solve", "--alg", "rsp", "--k", "10", "--y", "2", "--input", input.to_str().unwrap()]);
    let solved = stdout(&solved);
    let e = &line(&solved, "o ")[2..];
    assert_eq!(row.split(',').nth(1).unwrap(), e);
}

#[test]
fn oracle_modes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ex.wcnf", EXAMPLE);
    let p = input.to_str().unwrap();
    let covers = rsp(&["oracle", "--input", p, "--mode", "covers"]);
    assert!(covers.status.success());
    let out = stdout(&covers);
    let mins: Vec<&str> = out.lines().filter(|l| l.starts_with("min-cover")).collect();
    assert_eq!(mins, vec!["min-cover v=1: (+1,-1,*)"]);

    let energy = stdout(&rsp(&["oracle", "--input", p, "--mode", "energy"]));
    assert_eq!(energy.lines().next(), Some("min=1, argmin count=2"));

    let marg = stdout(&rsp(&["oracle", "--input", p, "--mode", "marginals", "--y", "30"]));
    let x1: Vec<f64> = marg.lines().nth(1).unwrap().split(',').skip(1).map(|t| t.parse().unwrap()).collect();
    assert!((x1[2] - 1.0).abs() < 1e-6);

    let mut big = String::from("p cnf 15 15\n");
    for i in 1..=15 {
        big.push_str(&format!("{} {} 0\n", i, i % 15 + 1));
    }
    let big = write(dir.path(), "big.cnf", &big);
    let o = rsp(&["oracle", "--input", big.to_str().unwrap(), "--mode", "covers"]);
    assert_eq!(o.status.code(), Some(3));
}
