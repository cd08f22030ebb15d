//! Convergence histories as CSV.
//!
//! Columns: `system_index,solver,iteration,resid,matvecs_cum,seconds_cum`.
//! Each system contributes one row per record, followed by a summary row
//! whose `iteration` field is `final`, whose `resid` is the relative true
//! residual of the returned solution, and whose counters are the totals
//! including the final residual check.

use std::io::Write;
use std::path::Path;

use super::IoError;
use crate::history::RunReport;

pub const HEADER: [&str; 6] = [
    "system_index",
    "solver",
    "iteration",
    "resid",
    "matvecs_cum",
    "seconds_cum",
];

/// Marker in the `iteration` column of summary rows.
pub const SUMMARY: &str = "final";

pub fn history_write_to<W: Write>(out: W, report: &RunReport) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for run in &report.runs {
        let system = run.system_index.to_string();
        for r in &run.history.records {
            w.write_record([
                system.as_str(),
                run.solver.as_str(),
                &r.iteration.to_string(),
                &format!("{:e}", r.residual),
                &r.matvecs.to_string(),
                &format!("{:.6}", r.seconds),
            ])?;
        }
        let h = &run.history;
        w.write_record([
            system.as_str(),
            run.solver.as_str(),
            SUMMARY,
            &format!("{:e}", h.true_residual),
            &h.matvecs.to_string(),
            &format!("{:.6}", h.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn history_write(path: impl AsRef<Path>, report: &RunReport) -> Result<(), IoError> {
    history_write_to(std::fs::File::create(path)?, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{bicgstab_solve, SolverConfig};
    use crate::sparse::SparseMatrix;

    fn rows(bytes: &[u8]) -> Vec<Vec<String>> {
        csv::Reader::from_reader(bytes)
            .records()
            .map(|r| r.unwrap().iter().map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        history_write_to(&mut buf, &RunReport::new("none")).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "system_index,solver,iteration,resid,matvecs_cum,seconds_cum\n"
        );
    }

    #[test]
    fn converged_solve_ends_below_tolerance() {
        let n = 30;
        let trip: Vec<_> = (0..n)
            .flat_map(|i| {
                let mut t = vec![(i, i, 4.0)];
                if i > 0 {
                    t.push((i, i - 1, -1.5));
                }
                if i + 1 < n {
                    t.push((i, i + 1, -0.5));
                }
                t
            })
            .collect();
        let a = SparseMatrix::from_triplets(n, n, &trip).unwrap();
        let cfg = SolverConfig {
            tol: 1e-9,
            ..Default::default()
        };
        let sol = bicgstab_solve(&a, &vec![1.0; n], &vec![0.0; n], None, &cfg).unwrap();
        let iterations = sol.history.records.len();
        let mut report = RunReport::new("bicgstab");
        report.push(1, "bicgstab", sol.history);
        let mut buf = Vec::new();
        history_write_to(&mut buf, &report).unwrap();
        let rows = rows(&buf);
        assert_eq!(rows.len(), iterations + 1);
        let last = rows.last().unwrap();
        assert_eq!(last[2], SUMMARY);
        assert!(last[3].parse::<f64>().unwrap() <= 1e-9);
        let mv: Vec<usize> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
        assert!(mv.windows(2).all(|w| w[0] < w[1]));
    }
}
