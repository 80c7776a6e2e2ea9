//! Solution scoring: the six DIMACS error measures, the help-code
//! classification of before/after solve reports, and size/time reduction
//! statistics.

use crate::linalg::{min_eigenvalue, LinalgError};
use crate::model::{SdpProblem, Solution, SymBlockMatrix};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{what}: expected {expected}, got {actual}")]
    DimensionMismatch { what: &'static str, expected: usize, actual: usize },
    #[error("solution carries no primal matrix")]
    MissingPrimal,
    #[error(transparent)]
    Numerical(#[from] LinalgError),
}

/// The six DIMACS error measures of an approximate primal/dual pair:
/// primal residual, primal cone violation, dual residual, dual cone
/// violation, duality gap, and complementarity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimacsErrors {
    pub err1: f64,
    pub err2: f64,
    pub err3: f64,
    pub err4: f64,
    pub err5: f64,
    pub err6: f64,
}

impl DimacsErrors {
    pub fn as_array(&self) -> [f64; 6] {
        [self.err1, self.err2, self.err3, self.err4, self.err5, self.err6]
    }

    /// Largest absolute value among the six errors.
    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0f64, |m, e| m.max(e.abs()))
    }
}

/// Smallest eigenvalue of a block matrix over the cone part: the minimum
/// over per-block smallest eigenvalues and the nonnegative scalar entries.
/// Free variables carry no cone and are excluded. `None` when there are no
/// cone variables at all.
fn cone_min_eigenvalue(m: &SymBlockMatrix, problem: &SdpProblem) -> Result<Option<f64>, LinalgError> {
    let s = &problem.structure;
    let mut lambda: Option<f64> = None;
    for block in 0..s.block_count() {
        let order = s.block_order(block);
        let value = if s.is_nonneg_block(block) {
            m.get(block, 0, 0)
        } else {
            min_eigenvalue(&m.dense_block(block, order))?
        };
        lambda = Some(lambda.map_or(value, |l: f64| l.min(value)));
    }
    Ok(lambda)
}

/// Evaluate the six DIMACS errors. When the solution carries no explicit
/// dual slack, `Z := C − A*(y)` is used, which makes the dual residual
/// (err3) zero by construction; an explicit `Z` is scored against the
/// genuine residual `‖A*(y) + Z − C‖_F / (1 + ‖C‖∞)`.
pub fn dimacs_errors(problem: &SdpProblem, solution: &Solution) -> Result<DimacsErrors, MetricsError> {
    let m = problem.num_constraints();
    if solution.y.len() != m {
        return Err(MetricsError::DimensionMismatch {
            what: "dual multiplier vector",
            expected: m,
            actual: solution.y.len(),
        });
    }
    let x = solution.x.as_ref().ok_or(MetricsError::MissingPrimal)?;
    if solution.x_free.len() != problem.structure.free_count {
        return Err(MetricsError::DimensionMismatch {
            what: "free variable vector",
            expected: problem.structure.free_count,
            actual: solution.x_free.len(),
        });
    }

    let b = problem.rhs();
    let b_inf = b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let c_inf = problem.objective.max_abs();

    let mut residual_sq = 0.0;
    for (i, bi) in b.iter().enumerate() {
        let r = problem.eval_constraint(i, x, &solution.x_free) - bi;
        residual_sq += r * r;
    }
    let err1 = residual_sq.sqrt() / (1.0 + b_inf);

    let lambda_x = cone_min_eigenvalue(x, problem)?.unwrap_or(0.0);
    let err2 = (-lambda_x / (1.0 + b_inf)).max(0.0);

    // A*(y) = Σ y_i A_i; the derived slack is C − A*(y).
    let adjoint = SymBlockMatrix::linear_combination(
        &SymBlockMatrix::new(),
        solution.y.iter().zip(&problem.constraints).map(|(&yi, c)| (yi, &c.matrix)),
    );
    let (z, err3) = match &solution.z {
        Some(z) => {
            let residual = SymBlockMatrix::linear_combination(
                &adjoint,
                [(1.0, z), (-1.0, &problem.objective)],
            );
            (z.clone(), residual.frobenius() / (1.0 + c_inf))
        }
        None => {
            let z = SymBlockMatrix::linear_combination(
                &problem.objective,
                [(-1.0, &adjoint)],
            );
            (z, 0.0)
        }
    };

    let lambda_z = cone_min_eigenvalue(&z, problem)?.unwrap_or(0.0);
    let err4 = (-lambda_z / (1.0 + c_inf)).max(0.0);

    let c_dot_x = problem.eval_objective(x, &solution.x_free);
    let b_dot_y: f64 = b.iter().zip(&solution.y).map(|(bi, yi)| bi * yi).sum();
    let denom = 1.0 + c_dot_x.abs() + b_dot_y.abs();
    let err5 = (b_dot_y - c_dot_x) / denom;
    let err6 = z.inner(x) / denom;

    Ok(DimacsErrors { err1, err2, err3, err4, err5, err6 })
}

/// One solver run summarized for the help-code rules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub infeasible: bool,
    pub primal_obj: f64,
    pub dual_obj: f64,
    /// Largest absolute value of the six DIMACS errors.
    pub dimacs_max_abs: f64,
    pub out_of_memory: bool,
}

/// What happened on the preprocessed side: either a solver ran, or the sieve
/// itself certified infeasibility and no solve took place.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AfterReport {
    Solved(SolveReport),
    SieveInfeasible,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum HelpCode {
    PlusOne,
    MinusOne,
    PlusTwo,
    MinusTwo,
    PlusThree,
    OutOfMemory,
}

impl fmt::Display for HelpCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HelpCode::PlusOne => "+1",
            HelpCode::MinusOne => "-1",
            HelpCode::PlusTwo => "+2",
            HelpCode::MinusTwo => "-2",
            HelpCode::PlusThree => "+3",
            HelpCode::OutOfMemory => "MM",
        };
        f.write_str(s)
    }
}

const DIMACS_IMPROVE_FLOOR: f64 = 1e-6;
const OBJ_SHIFT_TOL: f64 = 1e-6;

/// Classify whether preprocessing helped: +1/-1 for infeasibility detection
/// gained/lost, +2/-2 for a tenfold DIMACS improvement/regression, +3 for a
/// shifted objective, MM for an out-of-memory run.
pub fn help_code(before: &SolveReport, after: &AfterReport) -> BTreeSet<HelpCode> {
    let mut codes = BTreeSet::new();
    let solved_after = match after {
        AfterReport::Solved(report) => Some(report),
        AfterReport::SieveInfeasible => None,
    };

    let plus_one = match after {
        AfterReport::SieveInfeasible => true,
        AfterReport::Solved(a) => !before.infeasible && a.infeasible,
    };
    let minus_one =
        solved_after.is_some_and(|a| before.infeasible && !a.infeasible) && !plus_one;
    if plus_one {
        codes.insert(HelpCode::PlusOne);
    }
    if minus_one {
        codes.insert(HelpCode::MinusOne);
    }

    let mut minus_two = false;
    if !plus_one && !minus_one {
        if let Some(a) = solved_after {
            if before.dimacs_max_abs > DIMACS_IMPROVE_FLOOR
                && 10.0 * a.dimacs_max_abs < before.dimacs_max_abs
            {
                codes.insert(HelpCode::PlusTwo);
            }
            if a.dimacs_max_abs > DIMACS_IMPROVE_FLOOR
                && a.dimacs_max_abs > 10.0 * before.dimacs_max_abs
            {
                codes.insert(HelpCode::MinusTwo);
                minus_two = true;
            }
        }
    }

    if !plus_one && !minus_one && !minus_two {
        if let Some(a) = solved_after {
            let shift = (before.primal_obj - a.primal_obj).abs() / (1.0 + before.primal_obj.abs());
            if shift > OBJ_SHIFT_TOL {
                codes.insert(HelpCode::PlusThree);
            }
        }
    }

    if before.out_of_memory || solved_after.is_some_and(|a| a.out_of_memory) {
        codes.insert(HelpCode::OutOfMemory);
    }
    codes
}

/// Size and time statistics of one reduction. All rates are `None` when the
/// corresponding denominator is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionStats {
    pub n_before: usize,
    pub n_after: usize,
    pub m_before: usize,
    pub m_after: usize,
    pub nnz_before: usize,
    pub nnz_after: usize,
    /// `(n_before − n_after) / n_before` as a fraction.
    pub reduction_on_n: Option<f64>,
    /// `(m_before − m_after) / m_before` as a fraction.
    pub reduction_on_m: Option<f64>,
    /// Preprocessing time as a percentage of the solve time without
    /// preprocessing.
    pub pre_vs_solve_pct: Option<f64>,
    /// `(t_solve_before − (t_pre + t_solve_after)) / t_solve_before × 100`.
    pub time_reduction_pct: Option<f64>,
}

/// The rate formulas on raw counts; `reduction_stats` extracts the counts
/// from a problem pair.
#[allow(clippy::too_many_arguments)]
pub fn rates_from_counts(
    n_before: usize,
    n_after: usize,
    m_before: usize,
    m_after: usize,
    nnz_before: usize,
    nnz_after: usize,
    t_pre: f64,
    t_solve_before: f64,
    t_solve_after: f64,
) -> ReductionStats {
    assert!(t_pre >= 0.0 && t_solve_before >= 0.0 && t_solve_after >= 0.0, "times must be nonnegative");
    let rate = |before: usize, after: usize| {
        (before > 0).then(|| (before as f64 - after as f64) / before as f64)
    };
    let pre_vs_solve_pct = (t_solve_before > 0.0).then(|| t_pre / t_solve_before * 100.0);
    let time_reduction_pct = (t_solve_before > 0.0)
        .then(|| (t_solve_before - (t_pre + t_solve_after)) / t_solve_before * 100.0);
    ReductionStats {
        n_before,
        n_after,
        m_before,
        m_after,
        nnz_before,
        nnz_after,
        reduction_on_n: rate(n_before, n_after),
        reduction_on_m: rate(m_before, m_after),
        pre_vs_solve_pct,
        time_reduction_pct,
    }
}

/// Reduction rates and timing ratios for a before/after problem pair.
/// `n` counts psd block orders plus nonnegative scalars.
pub fn reduction_stats(
    before: &SdpProblem,
    after: &SdpProblem,
    t_pre: f64,
    t_solve_before: f64,
    t_solve_after: f64,
) -> ReductionStats {
    rates_from_counts(
        before.structure.cone_dim(),
        after.structure.cone_dim(),
        before.num_constraints(),
        after.num_constraints(),
        before.constraint_nnz(),
        after.constraint_nnz(),
        t_pre,
        t_solve_before,
        t_solve_after,
    )
}
