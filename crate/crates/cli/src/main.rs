use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use rsp_core::bp::{Schedule, ScheduleMode};
use rsp_core::instance::{CoverSemantics, Instance};
use rsp_core::io::{generate, parse_dimacs, write_dimacs, write_sweep_csv, GeneratorConfig, SweepRow};
use rsp_core::localsearch::WalkSatConfig;
use rsp_core::oracle::{
    brute_min_energy, enumerate_v_covers, exact_cover_marginals, CoverDistributionParams, OracleError,
};
use rsp_core::solve::{solve, Algorithm, RunReport, SolveOptions};

/// Message-passing solvers for (weighted) Max-SAT.
///
/// The y of `rsp` and `bp` weights a violated clause by exp(-w y); the y of
/// `spy` uses exp(-2y), so rsp's y equals twice spy's.
#[derive(Parser, Debug)]
#[command(name = "rsp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a DIMACS CNF/WCNF instance and print "o" and "v" lines.
    Solve(SolveArgs),
    /// Write a random k-SAT instance in DIMACS format.
    Generate(GenerateArgs),
    /// Solve at each y of a grid and write `y,violations,converged,fixed` CSV.
    SweepY(SweepArgs),
    /// Exhaustive answers for small instances.
    Oracle(OracleArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Alg {
    Bp,
    Sp,
    Spy,
    Rsp,
    Walksat,
}

impl From<Alg> for Algorithm {
    fn from(a: Alg) -> Self {
        match a {
            Alg::Bp => Algorithm::Bp,
            Alg::Sp => Algorithm::Sp,
            Alg::Spy => Algorithm::Spy,
            Alg::Rsp => Algorithm::Rsp,
            Alg::Walksat => Algorithm::Walksat,
        }
    }
}

#[derive(Args, Debug)]
struct SolverFlags {
    /// Instance file; `-` reads standard input.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "rsp")]
    alg: Alg,
    /// Variables fixed per decimation round.
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Convergence tolerance on the largest message change.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 1000)]
    max_sweeps: usize,
    #[arg(long, default_value_t = 0.0)]
    damping: f64,
    /// Damping for the single retry after non-convergence; 0 disables it.
    #[arg(long, default_value_t = 0.5)]
    retry_damping: f64,
    /// Update all messages in lockstep instead of clause by clause in random order.
    #[arg(long)]
    synchronous: bool,
    /// Probability of a backtracking round (spy).
    #[arg(long, default_value_t = 0.0)]
    backtrack_r: f64,
    /// Lower y when rsp fails to converge (default for weighted instances).
    #[arg(long, overrides_with = "no_adapt_y")]
    adapt_y: bool,
    /// Keep y fixed even on weighted instances.
    #[arg(long)]
    no_adapt_y: bool,
    /// Minimum |P(+1) - P(-1)| for fixing (rsp, bp).
    #[arg(long, default_value_t = 0.5)]
    b_min: f64,
    /// Carry messages across decimation rounds instead of redrawing them.
    #[arg(long)]
    warm_start: bool,
    /// WalkSAT flips per try (default 100 times the variable count).
    #[arg(long)]
    walksat_flips: Option<u64>,
    #[arg(long, default_value_t = 10)]
    walksat_tries: u32,
    #[arg(long, default_value_t = 0.5)]
    walksat_noise: f64,
}

impl SolverFlags {
    fn options(&self, y: Option<f64>) -> SolveOptions {
        let mut o = SolveOptions::new(self.alg.into());
        o.y = y;
        o.k = self.k;
        o.seed = self.seed;
        o.schedule = Schedule {
            mode: if self.synchronous {
                ScheduleMode::Synchronous
            } else {
                ScheduleMode::RandomSequential { seed: self.seed }
            },
            damping: self.damping,
            max_sweeps: self.max_sweeps,
            tolerance: self.eps,
            retry_damping: (self.retry_damping > 0.0).then_some(self.retry_damping),
        };
        o.backtrack = self.backtrack_r;
        o.adapt_y = match (self.adapt_y, self.no_adapt_y) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        };
        o.b_min = self.b_min;
        o.warm_start = self.warm_start;
        o.walksat = WalkSatConfig {
            noise: self.walksat_noise,
            max_flips: self.walksat_flips,
            tries: self.walksat_tries,
            ..WalkSatConfig::default()
        };
        o
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    flags: SolverFlags,
    /// Penalty rate (defaults: rsp 4, or 10 on weighted input; spy and bp 2).
    #[arg(long)]
    y: Option<f64>,
    /// Write the run report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 3)]
    kclause: usize,
    /// Largest clause weight; 1 writes CNF, anything larger WCNF.
    #[arg(long, default_value_t = 1)]
    wmax: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    flags: SolverFlags,
    /// Grid as start:stop:step, stop included.
    #[arg(long)]
    ys: String,
    /// Sweep points solved in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// CSV file (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Energy,
    Covers,
    Marginals,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Semantics {
    /// A ±1 variable must be the unique satisfier of some clause.
    Strict,
    /// A ±1 variable may instead sit in a violated clause.
    Violation,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, default_value_t = 1.0)]
    y: f64,
    /// Weight of `*` for unconstrained variables (1 gives the cover distribution).
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, value_enum, default_value = "violation")]
    semantics: Semantics,
}

/// Error with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 2, error }
    }
}

fn oracle_failure(e: OracleError) -> Failure {
    let code = if matches!(e, OracleError::Capacity { .. }) { 3 } else { 2 };
    Failure {
        code,
        error: e.into(),
    }
}

fn read_instance(path: &Path) -> anyhow::Result<Instance> {
    let inst = if path == Path::new("-") {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text)?;
        parse_dimacs(text.as_bytes())
    } else {
        let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        parse_dimacs(BufReader::new(f))
    };
    inst.with_context(|| format!("cannot parse {}", path.display()))
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).map_err(Into::into),
    }
}

fn format_model(lits: &[i64]) -> String {
    let mut s = String::from("v");
    for l in lits {
        s.push(' ');
        s.push_str(&l.to_string());
    }
    s
}

fn cmd_solve(args: &SolveArgs) -> Result<(), Failure> {
    let inst = read_instance(&args.flags.input)?;
    let report: RunReport = solve(&inst, &args.flags.options(args.y)).map_err(anyhow::Error::from)?;
    let energy = inst.energy(&report.assignment).map_err(anyhow::Error::from)?;
    let mut out = io::stdout().lock();
    let handoff = report.handoff.map_or("none".to_string(), |h| format!("{h:?}"));
    writeln!(out, "c {inst}").map_err(anyhow::Error::from)?;
    writeln!(
        out,
        "c algorithm {} y {} rounds {} fixed {} handoff {} degenerate {} seconds {:.3}",
        report.algorithm,
        report.y,
        report.rounds.len(),
        report.fixed,
        handoff,
        report.degenerate,
        report.wall_seconds
    )
    .map_err(anyhow::Error::from)?;
    writeln!(out, "o {energy}").map_err(anyhow::Error::from)?;
    writeln!(out, "{}", format_model(&report.model())).map_err(anyhow::Error::from)?;
    if let Some(p) = &args.out {
        let json = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
        write_output(Some(p), &json)?;
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Failure> {
    let cfg = GeneratorConfig::new(args.n, args.alpha, args.kclause, args.seed).weighted(args.wmax);
    let inst = generate(&cfg).map_err(anyhow::Error::from)?;
    write_output(args.out.as_deref(), &write_dimacs(&inst))?;
    Ok(())
}

fn parse_grid(text: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad grid '{text}'"))?;
    let (start, stop, step) = match parts[..] {
        [a] => (a, a, 1.0),
        [a, b, c] => (a, b, c),
        _ => bail!("grid must be start:stop:step, got '{text}'"),
    };
    if !(step > 0.0) || !(start >= 0.0) || stop < start || !stop.is_finite() {
        bail!("grid needs 0 <= start <= stop and step > 0, got '{text}'");
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let ys = parse_grid(&args.ys)?;
    let inst = read_instance(&args.flags.input)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(anyhow::Error::from)?;
    let rows: Vec<SweepRow> = pool.install(|| {
        ys.par_iter()
            .map(|&y| {
                let mut o = args.flags.options(Some(y));
                if o.adapt_y.is_none() {
                    o.adapt_y = Some(false);
                }
                solve(&inst, &o).map(|r| SweepRow {
                    y,
                    violations: r.energy,
                    converged: r.rounds.first().is_some_and(|x| x.converged),
                    fixed: r.fixed,
                })
            })
            .collect::<Result<_, _>>()
    })
    .map_err(anyhow::Error::from)?;
    write_output(args.out.as_deref(), &write_sweep_csv(&rows))?;
    Ok(())
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), Failure> {
    let inst = read_instance(&args.input)?;
    let mut out = String::new();
    match args.mode {
        Mode::Energy => {
            let m = brute_min_energy(&inst).map_err(oracle_failure)?;
            out.push_str(&format!("min={}, argmin count={}\n", m.min, m.count));
            for a in &m.argmin {
                out.push_str(&format!("argmin {}\n", format_model(&a.to_dimacs_literals())));
            }
        }
        Mode::Covers => {
            let sem = match args.semantics {
                Semantics::Strict => CoverSemantics::Strict,
                Semantics::Violation => CoverSemantics::ViolationSupported,
            };
            let census = enumerate_v_covers(&inst, sem).map_err(oracle_failure)?;
            let min = brute_min_energy(&inst).map_err(oracle_failure)?.min;
            for g in &census.groups {
                out.push_str(&format!("v={}: {} covers\n", g.v, g.covers.len()));
            }
            let at_min = census.at(min);
            if at_min.is_empty() {
                out.push_str(&format!("no cover at the minimum energy {min}\n"));
            }
            for c in at_min {
                out.push_str(&format!("min-cover v={min}: {c}\n"));
            }
        }
        Mode::Marginals => {
            let p = CoverDistributionParams::new(args.y, args.rho).map_err(oracle_failure)?;
            let m = exact_cover_marginals(&inst, &p).map_err(oracle_failure)?;
            out.push_str("var,minus,plus,star\n");
            for (i, t) in m.iter().enumerate() {
                out.push_str(&format!("{},{:.10},{:.10},{:.10}\n", i + 1, t[0], t[1], t[2]));
            }
        }
    }
    write_output(None, &out)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Generate(a) => cmd_generate(a),
        Command::SweepY(a) => cmd_sweep(a),
        Command::Oracle(a) => cmd_oracle(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1:3:1").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_grid("0.5:1.5:0.5").unwrap(), vec![0.5, 1.0, 1.5]);
        assert_eq!(parse_grid("2").unwrap(), vec![2.0]);
        assert!(parse_grid("3:1:1").is_err());
        assert!(parse_grid("1:2:0").is_err());
        assert!(parse_grid("a:b:c").is_err());
    }

    #[test]
    fn model_line() {
        assert_eq!(format_model(&[1, -2, 3]), "v 1 -2 3");
    }

    #[test]
    fn flags_map_to_options() {
        let cli = Cli::try_parse_from([
            "rsp", "solve", "--input", "x.cnf", "--alg", "spy", "--y", "1.5", "--k", "7", "--backtrack-r", "0.2",
            "--synchronous", "--no-adapt-y",
        ])
        .unwrap();
        let Command::Solve(a) = cli.command else { panic!() };
        let o = a.flags.options(a.y);
        assert_eq!(o.algorithm, Algorithm::Spy);
        assert_eq!((o.y, o.k, o.backtrack, o.adapt_y), (Some(1.5), 7, 0.2, Some(false)));
        assert_eq!(o.schedule.mode, ScheduleMode::Synchronous);
    }
}
