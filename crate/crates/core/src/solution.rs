//! Solver output shared by the MMSR, MSSR and OMA paths.

use std::fmt;

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::rates::{PowerAllocation, SlackVector};
use crate::scenario::{EveCase, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Globally optimal to the configured tolerance.
    Optimal,
    /// Alternating optimization stopped improving.
    Stationary,
    Infeasible,
    /// Iteration budget exhausted; the best feasible point is returned.
    IterationCap,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Stationary => "stationary",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::IterationCap => "iteration_cap",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Iteration tolerance and budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iters: usize,
}

impl SolverOptions {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            tolerance: cfg.tolerance,
            max_iters: cfg.max_iters,
        }
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-2,
            max_iters: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// MSR or SSR in bits/s/Hz, unclamped.
    pub objective: f64,
    pub alloc: PowerAllocation,
    pub slack: SlackVector,
    /// Unclamped secrecy rate per SU.
    pub per_su_rate: Vec<f64>,
    pub per_su_actual_sop: Vec<f64>,
    /// Objective value after each iteration (bits/s/Hz).
    pub trace: Vec<f64>,
    /// Upper bound after each iteration, for bounding methods.
    pub bound_trace: Vec<f64>,
    pub status: SolveStatus,
    /// Final relative gap between bound and objective, where one exists.
    pub gap: Option<f64>,
    pub iterations: usize,
}

impl SolveResult {
    /// Evaluates rates and exact SOPs at `(alloc, slack)`; `objective` is
    /// filled with the minimum rate, callers override it for sum objectives.
    pub fn evaluate(scn: &Scenario, case: EveCase, alloc: PowerAllocation, slack: SlackVector, status: SolveStatus) -> Result<Self> {
        let per_su_rate = scn.secrecy_rates(&alloc, &slack);
        let per_su_actual_sop = scn.actual_sop(case, &alloc, &slack)?;
        let objective = per_su_rate.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            objective,
            alloc,
            slack,
            per_su_rate,
            per_su_actual_sop,
            trace: Vec::new(),
            bound_trace: Vec::new(),
            status,
            gap: None,
            iterations: 0,
        })
    }

    pub fn min_rate(&self) -> f64 {
        self.per_su_rate.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sum_rate(&self) -> f64 {
        self.per_su_rate.iter().sum()
    }

    pub fn max_actual_sop(&self) -> f64 {
        self.per_su_actual_sop.iter().copied().fold(0.0, f64::max)
    }
}
