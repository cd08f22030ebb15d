//! Command-line driver behind the `rbicgstab` binary.

use std::error::Error;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::experiments::{
    example1_angles, example1_study, example2_angles, example2_study, run_sequence_with,
    SequenceOptions, StudyOutcome,
};
use crate::history::{ConvergenceHistory, RunReport};
use crate::io::{
    history_write, mm_read, mm_read_vector, mm_write_vector, recycle_load, recycle_save,
};
use crate::operator::LinearOperator;
use crate::precond::{ilutp_factor, PreconditionedOperator};
use crate::problems::{synthetic_sequence, Example2Config};
use crate::recycle::RecycleSpace;
use crate::solvers::{bicg, bicgstab, rbicg, rbicgstab, SolverConfig};
use crate::sparse::SparseMatrix;
use crate::vector::norm2;

type CliResult<T> = Result<T, Box<dyn Error>>;

#[derive(Debug, Parser)]
#[command(
    name = "rbicgstab",
    version,
    about = "Recycling BiCG / BiCGSTAB solvers and model-problem studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a Matrix Market system.
    Solve(SolveArgs),
    /// Convection-diffusion study: no recycling, right-only and left-and-right eigenvectors.
    Example1(Example1Args),
    /// Variable-coefficient study with recycle spaces harvested by RBiCG.
    Example2(Example2Args),
    /// Recycling policy against BiCGSTAB over a synthetic system sequence.
    Sequence(SequenceArgs),
    /// Cosines of principal angles between left and right invariant subspaces.
    Angles(AnglesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Bicg,
    Bicgstab,
    Rbicg,
    Rbicgstab,
}

/// Options shared by every solving subcommand; unset values fall back to
/// the subcommand's defaults.
#[derive(Debug, Clone, Args)]
struct SolverArgs {
    /// Relative residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-itn")]
    max_itn: Option<usize>,
    /// Recycle-space dimension.
    #[arg(long)]
    k: Option<usize>,
    /// Cycle length between recycle-space updates.
    #[arg(long)]
    s: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn config(&self, tol: f64, k: usize) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            tol: self.tol.unwrap_or(tol),
            max_itn: self.max_itn.unwrap_or(20_000),
            k: self.k.unwrap_or(k),
            s: self.s.unwrap_or(d.s),
            seed: self.seed,
            ..d
        }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Coefficient matrix (Matrix Market coordinate file).
    #[arg(long)]
    matrix: PathBuf,
    /// Right-hand side (Matrix Market vector); defaults to all ones.
    #[arg(long)]
    rhs: Option<PathBuf>,
    /// Dual right-hand side for bicg/rbicg; defaults to all ones.
    #[arg(long = "dual-rhs")]
    dual_rhs: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Bicgstab)]
    method: Method,
    #[command(flatten)]
    solver: SolverArgs,
    /// ILUTP drop tolerance; split preconditioning is used only when given.
    #[arg(long = "drop-tol")]
    drop_tol: Option<f64>,
    #[arg(long = "pivot-tol", default_value_t = 0.1)]
    pivot_tol: f64,
    /// Initial guess: zeros, ones, half, or a Matrix Market vector file.
    #[arg(long, default_value = "zeros")]
    x0: String,
    /// Recycle space to start from (in the coordinates of the preconditioned system).
    #[arg(long = "recycle-in")]
    recycle_in: Option<PathBuf>,
    /// Where to store the recycle space after the solve.
    #[arg(long = "recycle-out")]
    recycle_out: Option<PathBuf>,
    /// CSV file for the convergence history.
    #[arg(long = "history-out")]
    history_out: Option<PathBuf>,
    /// Matrix Market file for the solution.
    #[arg(long = "solution-out")]
    solution_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Example1Args {
    /// Grid lines per side, boundary included (42 gives n = 1600).
    #[arg(long, default_value_t = 42)]
    cells: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Directory for the three history CSVs.
    #[arg(long = "history-out")]
    history_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Example2Args {
    /// Grid lines per side, boundary included (129 gives n = 16129).
    #[arg(long, default_value_t = 129)]
    gridlines: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long = "drop-tol", default_value_t = 0.1)]
    drop_tol: f64,
    #[arg(long = "pivot-tol", default_value_t = 0.1)]
    pivot_tol: f64,
    /// Directory for the three history CSVs.
    #[arg(long = "history-out")]
    history_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SequenceArgs {
    /// Unknowns per system.
    #[arg(long, default_value_t = 4000)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    matrices: usize,
    #[arg(long = "rhs-per", default_value_t = 21)]
    rhs_per: usize,
    /// Relative size of the matrix perturbations.
    #[arg(long, default_value_t = 1e-3)]
    perturbation: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long = "drop-tol", default_value_t = 1e-4)]
    drop_tol: f64,
    #[arg(long = "pivot-tol", default_value_t = 0.1)]
    pivot_tol: f64,
    /// Recycle space to start the sequence from.
    #[arg(long = "recycle-in")]
    recycle_in: Option<PathBuf>,
    /// Where to store the recycle space after the last system.
    #[arg(long = "recycle-out")]
    recycle_out: Option<PathBuf>,
    /// Directory for the two history CSVs.
    #[arg(long = "history-out")]
    history_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Debug, Args)]
struct AnglesArgs {
    #[arg(long, value_enum, default_value_t = Which::One)]
    example: Which,
    /// Invariant-subspace dimension.
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 42)]
    cells: usize,
    #[arg(long, default_value_t = 129)]
    gridlines: usize,
    #[arg(long = "drop-tol", default_value_t = 0.1)]
    drop_tol: f64,
    #[arg(long = "pivot-tol", default_value_t = 0.1)]
    pivot_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `argv` (program name first) and runs the subcommand.
///
/// Returns 0 when every solve converged, 2 when some solve did not, and 1
/// on usage or I/O errors.
pub fn cli_run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => run_solve(&a),
        Command::Example1(a) => run_example1(&a),
        Command::Example2(a) => run_example2(&a),
        Command::Sequence(a) => run_sequence_cmd(&a),
        Command::Angles(a) => run_angles(&a),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn initial_guess(spec: &str, n: usize) -> CliResult<Vec<f64>> {
    let v = match spec {
        "zeros" => vec![0.0; n],
        "ones" => vec![1.0; n],
        "half" => vec![0.5; n],
        path => {
            let v = mm_read_vector::<f64>(path)?;
            if v.len() != n {
                return Err(format!(
                    "initial guess has length {}, the matrix has {n} rows",
                    v.len()
                )
                .into());
            }
            v
        }
    };
    Ok(v)
}

fn read_vector_or_ones(path: Option<&Path>, n: usize, what: &str) -> CliResult<Vec<f64>> {
    match path {
        None => Ok(vec![1.0; n]),
        Some(p) => {
            let v = mm_read_vector::<f64>(p)?;
            if v.len() != n {
                return Err(
                    format!("{what} has length {}, the matrix has {n} rows", v.len()).into(),
                );
            }
            Ok(v)
        }
    }
}

/// Maps between the original and the (possibly preconditioned) system.
struct Transform<'a> {
    op: Option<PreconditionedOperator<'a, f64>>,
}

impl Transform<'_> {
    fn rhs(&self, b: &[f64]) -> Vec<f64> {
        self.op
            .as_ref()
            .map_or_else(|| b.to_vec(), |p| p.transform_rhs(b))
    }
    fn initial(&self, x: &[f64]) -> Vec<f64> {
        self.op
            .as_ref()
            .map_or_else(|| x.to_vec(), |p| p.transform_initial(x))
    }
    fn dual_rhs(&self, b: &[f64]) -> Vec<f64> {
        self.op
            .as_ref()
            .map_or_else(|| b.to_vec(), |p| p.transform_dual_rhs(b))
    }
    fn dual_initial(&self, x: &[f64]) -> Vec<f64> {
        self.op
            .as_ref()
            .map_or_else(|| x.to_vec(), |p| p.transform_dual_initial(x))
    }
    fn solution(&self, y: &[f64]) -> Vec<f64> {
        self.op
            .as_ref()
            .map_or_else(|| y.to_vec(), |p| p.recover_solution(y))
    }
}

struct SolveOutput {
    y: Vec<f64>,
    history: ConvergenceHistory,
    space: Option<RecycleSpace<f64>>,
}

fn solve_with<O: LinearOperator<f64> + ?Sized>(
    op: &O,
    t: &Transform<'_>,
    args: &SolveArgs,
    b: &[f64],
    x0: &[f64],
    config: &SolverConfig,
) -> CliResult<SolveOutput> {
    let n = op.dim();
    let space = match &args.recycle_in {
        Some(p) => Some(recycle_load(p, op)?),
        None => None,
    };
    let rhs = t.rhs(b);
    let y0 = t.initial(x0);
    let dual = || -> CliResult<(Vec<f64>, Vec<f64>)> {
        let bt = read_vector_or_ones(args.dual_rhs.as_deref(), n, "dual right-hand side")?;
        Ok((t.dual_rhs(&bt), t.dual_initial(&vec![0.0; n])))
    };
    let out = match args.method {
        Method::Bicgstab => {
            let s = bicgstab(op, &rhs, &y0, config)?;
            SolveOutput {
                y: s.x,
                history: s.history,
                space,
            }
        }
        Method::Rbicgstab => {
            let space = space.unwrap_or_else(|| {
                log::warn!("rbicgstab without --recycle-in runs with an empty recycle space");
                RecycleSpace::empty(n)
            });
            let s = rbicgstab(op, &rhs, &y0, &space, config)?;
            SolveOutput {
                y: s.x,
                history: s.history,
                space: Some(space),
            }
        }
        Method::Bicg => {
            let (bt, yt0) = dual()?;
            let s = bicg(op, &rhs, &bt, &y0, &yt0, config)?;
            SolveOutput {
                y: s.x,
                history: s.history,
                space,
            }
        }
        Method::Rbicg => {
            let (bt, yt0) = dual()?;
            let s = rbicg(op, &rhs, &bt, &y0, &yt0, space.as_ref(), config)?;
            SolveOutput {
                y: s.x,
                history: s.history,
                space: Some(s.recycle),
            }
        }
    };
    Ok(out)
}

fn run_solve(args: &SolveArgs) -> CliResult<bool> {
    let a: SparseMatrix<f64> = mm_read(&args.matrix)?;
    if !a.is_square() {
        return Err(format!("matrix is {}x{}, expected square", a.nrows(), a.ncols()).into());
    }
    let n = a.nrows();
    let b = read_vector_or_ones(args.rhs.as_deref(), n, "right-hand side")?;
    let x0 = initial_guess(&args.x0, n)?;
    let config = args
        .solver
        .config(SolverConfig::default().tol, SolverConfig::default().k);
    let factors = match args.drop_tol {
        Some(d) => Some(ilutp_factor(&a, d, args.pivot_tol)?),
        None => None,
    };
    let t = Transform {
        op: match &factors {
            Some(f) => Some(PreconditionedOperator::split(&a, f)?),
            None => None,
        },
    };
    let out = match &t.op {
        Some(op) => solve_with(op, &t, args, &b, &x0, &config)?,
        None => solve_with(&a, &t, args, &b, &x0, &config)?,
    };
    let x = t.solution(&out.y);
    let ax = a.matvec(&x)?;
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    let unpre = norm2(&r) / norm2(&b).max(f64::MIN_POSITIVE);
    let h = &out.history;
    println!(
        "{:?}: {} after {} iterations, {} matvecs, true relative residual {:.3e} (unpreconditioned {:.3e})",
        args.method,
        h.status,
        h.iterations(),
        h.matvecs,
        h.true_residual,
        unpre
    );
    if let Some(p) = &args.history_out {
        let mut report = RunReport::new("solve");
        report.push(
            1,
            format!("{:?}", args.method).to_lowercase(),
            out.history.clone(),
        );
        history_write(p, &report)?;
    }
    if let Some(p) = &args.solution_out {
        mm_write_vector(p, &x)?;
    }
    if let Some(p) = &args.recycle_out {
        match &out.space {
            Some(s) if !s.is_empty() => recycle_save(p, s)?,
            _ => log::warn!("no recycle space to write"),
        }
    }
    Ok(out.history.converged())
}

fn write_study(dir: Option<&Path>, prefix: &str, o: &StudyOutcome) -> CliResult<()> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        for (name, h) in [
            ("bicgstab", &o.baseline),
            ("right", &o.right_only),
            ("left_right", &o.left_right),
        ] {
            let mut r = RunReport::new(name);
            r.push(1, name, h.clone());
            history_write(dir.join(format!("{prefix}_{name}.csv")), &r)?;
        }
    }
    Ok(())
}

fn print_study(o: &StudyOutcome) {
    for (name, h) in [
        ("no recycling", &o.baseline),
        ("right only", &o.right_only),
        ("left and right", &o.left_right),
    ] {
        println!(
            "{name:>15}: {:>5} iterations, {:>6} matvecs, {} (true residual {:.2e})",
            h.iterations(),
            h.matvecs,
            h.status,
            h.true_residual
        );
    }
}

fn run_example1(args: &Example1Args) -> CliResult<bool> {
    let config = args.solver.config(1e-10, 5);
    let o = example1_study(args.cells, config.k, &config)?;
    print_study(&o);
    write_study(args.history_out.as_deref(), "example1", &o)?;
    Ok(o.report().all_converged())
}

fn run_example2(args: &Example2Args) -> CliResult<bool> {
    let config = args.solver.config(1e-8, 20);
    let problem = Example2Config {
        gridlines: args.gridlines,
        drop_tol: args.drop_tol,
        pivot_tol: args.pivot_tol,
        ..Default::default()
    };
    let o = example2_study(&problem, &config)?;
    print_study(&o);
    write_study(args.history_out.as_deref(), "example2", &o)?;
    Ok(o.report().all_converged())
}

fn run_sequence_cmd(args: &SequenceArgs) -> CliResult<bool> {
    let config = args.solver.config(1e-8, 20);
    let seq = synthetic_sequence(
        args.n,
        args.matrices,
        args.rhs_per,
        args.perturbation,
        args.solver.seed,
    )?;
    let opts = SequenceOptions {
        solver: config,
        drop_tol: args.drop_tol,
        pivot_tol: args.pivot_tol,
    };
    let start = match &args.recycle_in {
        Some(p) => {
            let a = seq.matrix(0);
            let f = ilutp_factor(&a, args.drop_tol, args.pivot_tol)?;
            recycle_load(p, &PreconditionedOperator::split(&a, &f)?)?
        }
        None => RecycleSpace::empty(args.n),
    };
    let o = run_sequence_with(&seq, &opts, start)?;
    let (rec, base) = (o.recycling.total_matvecs(), o.baseline.total_matvecs());
    println!("systems: {}", seq.total_systems());
    println!(
        "recycling matvecs: {rec} ({:.3} s)",
        o.recycling.total_seconds()
    );
    println!(
        "bicgstab matvecs:  {base} ({:.3} s)",
        o.baseline.total_seconds()
    );
    println!("ratio: {:.3}", rec as f64 / base.max(1) as f64);
    for c in seq.change_points() {
        println!(
            "system {c:>3}: recycling {} matvecs",
            o.recycling.matvecs_at(c).unwrap_or(0)
        );
    }
    if let Some(dir) = &args.history_out {
        std::fs::create_dir_all(dir)?;
        history_write(dir.join("sequence_recycling.csv"), &o.recycling)?;
        history_write(dir.join("sequence_bicgstab.csv"), &o.baseline)?;
    }
    if let Some(p) = &args.recycle_out {
        if o.space.is_empty() {
            log::warn!("no recycle space to write");
        } else {
            recycle_save(p, &o.space)?;
        }
    }
    Ok(o.recycling.all_converged() && o.baseline.all_converged())
}

fn run_angles(args: &AnglesArgs) -> CliResult<bool> {
    let mut columns: Vec<(&str, Vec<f64>)> = Vec::new();
    if matches!(args.example, Which::One | Which::Both) {
        columns.push((
            "Example 1",
            example1_angles(args.cells, args.dim, args.seed)?,
        ));
    }
    if matches!(args.example, Which::Two | Which::Both) {
        let cfg = Example2Config {
            gridlines: args.gridlines,
            drop_tol: args.drop_tol,
            pivot_tol: args.pivot_tol,
            ..Default::default()
        };
        columns.push(("Example 2", example2_angles(&cfg, args.dim, args.seed)?));
    }
    println!(
        "{}",
        columns
            .iter()
            .map(|(h, _)| format!("{h:>10}"))
            .collect::<Vec<_>>()
            .join(" | ")
    );
    let rows = columns.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    for i in 0..rows {
        let line: Vec<String> = columns
            .iter()
            .map(|(_, c)| {
                c.get(i)
                    .map_or_else(|| " ".repeat(10), |v| format!("{v:>10.4}"))
            })
            .collect();
        println!("{}", line.join(" | "));
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::mm_write;
    use tempfile::TempDir;

    fn run(args: &[&str]) -> i32 {
        cli_run(std::iter::once("rbicgstab").chain(args.iter().copied()))
    }

    #[test]
    fn identity_system_converges_in_one_iteration() {
        let dir = TempDir::new().unwrap();
        let m = dir.path().join("i.mtx");
        mm_write(&m, &SparseMatrix::<f64>::identity(6)).unwrap();
        let h = dir.path().join("h.csv");
        let code = run(&[
            "solve",
            "--matrix",
            m.to_str().unwrap(),
            "--history-out",
            h.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(&h).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        // header, start, one iteration, summary
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("1,bicgstab,1,"));
    }

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(run(&["solve", "--bogus"]), 1);
        assert_eq!(run(&["frobnicate"]), 1);
        assert_eq!(run(&["solve", "--matrix", "/nonexistent/file.mtx"]), 1);
        assert_eq!(run(&["--help"]), 0);
    }

    #[test]
    fn non_convergence_exits_with_two() {
        let dir = TempDir::new().unwrap();
        let m = dir.path().join("a.mtx");
        let (a, _) = crate::problems::example1_operator(12).unwrap();
        mm_write(&m, &a).unwrap();
        assert_eq!(
            run(&[
                "solve",
                "--matrix",
                m.to_str().unwrap(),
                "--max-itn",
                "2",
                "--tol",
                "1e-12"
            ]),
            2
        );
    }

    #[test]
    fn every_method_solves_a_preconditioned_system() {
        let dir = TempDir::new().unwrap();
        let m = dir.path().join("a.mtx");
        let (a, b) = crate::problems::example1_operator(14).unwrap();
        mm_write(&m, &a).unwrap();
        let rhs = dir.path().join("b.mtx");
        mm_write_vector(&rhs, &b).unwrap();
        let space = dir.path().join("u.rbr");
        let common = [
            "--matrix",
            m.to_str().unwrap(),
            "--rhs",
            rhs.to_str().unwrap(),
            "--drop-tol",
            "1e-2",
            "--x0",
            "half",
        ];
        let with = |extra: &[&str]| {
            let mut v: Vec<&str> = vec!["solve"];
            v.extend_from_slice(&common);
            v.extend_from_slice(extra);
            run(&v)
        };
        assert_eq!(
            with(&[
                "--method",
                "rbicg",
                "--k",
                "4",
                "--s",
                "6",
                "--recycle-out",
                space.to_str().unwrap()
            ]),
            0
        );
        assert!(space.exists());
        let sol = dir.path().join("x.mtx");
        assert_eq!(
            with(&[
                "--method",
                "rbicgstab",
                "--recycle-in",
                space.to_str().unwrap(),
                "--solution-out",
                sol.to_str().unwrap()
            ]),
            0
        );
        let x = mm_read_vector::<f64>(&sol).unwrap();
        let ax = a.matvec(&x).unwrap();
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) <= 1e-6 * norm2(&b));
        assert_eq!(with(&["--method", "bicg"]), 0);
        assert_eq!(with(&["--method", "bicgstab"]), 0);
    }

    #[test]
    fn example1_writes_three_histories() {
        let dir = TempDir::new().unwrap();
        let out = dir.path().join("e1");
        assert_eq!(
            run(&[
                "example1",
                "--cells",
                "16",
                "--k",
                "3",
                "--history-out",
                out.to_str().unwrap()
            ]),
            0
        );
        for name in ["bicgstab", "right", "left_right"] {
            assert!(out.join(format!("example1_{name}.csv")).exists());
        }
    }

    #[test]
    fn sequence_is_deterministic_apart_from_timings() {
        let dir = TempDir::new().unwrap();
        let strip = |p: &Path| -> Vec<String> {
            std::fs::read_to_string(p)
                .unwrap()
                .lines()
                .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
                .collect()
        };
        let mut outs = Vec::new();
        for name in ["a", "b"] {
            let out = dir.path().join(name);
            let code = run(&[
                "sequence",
                "--n",
                "144",
                "--matrices",
                "2",
                "--rhs-per",
                "3",
                "--k",
                "4",
                "--s",
                "8",
                "--drop-tol",
                "1e-2",
                "--history-out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(code, 0);
            outs.push(strip(&out.join("sequence_recycling.csv")));
        }
        assert_eq!(outs[0], outs[1]);
        let summaries = outs[0].iter().filter(|l| l.contains(",final,")).count();
        assert_eq!(summaries, 6);
    }

    #[test]
    fn angles_prints_a_table() {
        assert_eq!(run(&["angles", "--cells", "14", "--dim", "4"]), 0);
    }
}
