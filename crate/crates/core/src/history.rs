//! Per-iteration convergence records and terminal status of a solve.

use std::fmt;

/// Which quantity vanished when a solver stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakdownKind {
    /// `(r̃, r) ≈ 0`
    Serious,
    /// `(p̃, q) ≈ 0` (BiCG) or `(r̃₀, q) ≈ 0` (BiCGSTAB)
    SecondKind,
    /// `(t, t) = 0` or `ω = 0`
    Omega,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    Breakdown(BreakdownKind),
    /// The recursive residual met the tolerance but the true residual did not,
    /// even after restarting.
    Stagnated,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Converged => f.write_str("converged"),
            Status::MaxIterations => f.write_str("max_itn"),
            Status::Breakdown(BreakdownKind::Serious) => f.write_str("serious breakdown"),
            Status::Breakdown(BreakdownKind::SecondKind) => {
                f.write_str("breakdown of the second kind")
            }
            Status::Breakdown(BreakdownKind::Omega) => f.write_str("omega breakdown"),
            Status::Stagnated => f.write_str("stagnated"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Recursive residual norm relative to the right-hand side.
    pub residual: f64,
    /// Relative dual residual for two-sided solvers.
    pub dual_residual: Option<f64>,
    /// Relative true residual, where it was computed.
    pub true_residual: Option<f64>,
    /// Cumulative operator applications (forward and adjoint).
    pub matvecs: usize,
    /// Cumulative wall-clock seconds since the solve started.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceHistory {
    /// Record 0 is the starting residual; record `i` follows iteration `i`.
    pub records: Vec<IterationRecord>,
    pub status: Status,
    /// Total operator applications, including the final residual check.
    pub matvecs: usize,
    pub seconds: f64,
    /// Relative true residual of the returned solution.
    pub true_residual: f64,
    /// Number of restarts triggered by the true-residual check.
    pub restarts: usize,
}

impl ConvergenceHistory {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual)
    }
}

/// One solve inside a multi-system run.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemRun {
    /// 1-based position in the sequence.
    pub system_index: usize,
    pub solver: String,
    pub history: ConvergenceHistory,
}

/// Histories of every solve in a run, under one label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub label: String,
    pub runs: Vec<SystemRun>,
}

impl RunReport {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            runs: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        system_index: usize,
        solver: impl Into<String>,
        history: ConvergenceHistory,
    ) {
        self.runs.push(SystemRun {
            system_index,
            solver: solver.into(),
            history,
        });
    }

    pub fn total_matvecs(&self) -> usize {
        self.runs.iter().map(|r| r.history.matvecs).sum()
    }

    pub fn total_seconds(&self) -> f64 {
        self.runs.iter().map(|r| r.history.seconds).sum()
    }

    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.history.converged())
    }

    /// Matvec count of the solve at a 1-based position.
    pub fn matvecs_at(&self, system_index: usize) -> Option<usize> {
        self.runs
            .iter()
            .find(|r| r.system_index == system_index)
            .map(|r| r.history.matvecs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history(matvecs: usize, status: Status) -> ConvergenceHistory {
        ConvergenceHistory {
            records: vec![],
            status,
            matvecs,
            seconds: 0.5,
            true_residual: 0.0,
            restarts: 0,
        }
    }

    #[test]
    fn report_aggregates_equal_sum_of_parts() {
        let mut r = RunReport::new("x");
        r.push(1, "rbicg", history(10, Status::Converged));
        r.push(2, "rbicgstab", history(7, Status::MaxIterations));
        assert_eq!(r.total_matvecs(), 17);
        assert_eq!(r.total_seconds(), 1.0);
        assert!(!r.all_converged());
        assert_eq!(r.matvecs_at(2), Some(7));
        assert_eq!(r.matvecs_at(3), None);
    }

    #[test]
    fn status_names() {
        assert_eq!(
            Status::Breakdown(BreakdownKind::Omega).to_string(),
            "omega breakdown"
        );
        assert_eq!(Status::MaxIterations.to_string(), "max_itn");
    }
}
