//! Solution recovery after sieving.
//!
//! Primal recovery is zero-padding: the deleted rows and columns of `X` were
//! forced to zero, so writing zeros back yields a solution of the original
//! problem. Dual recovery extends the reduced multipliers one deleted
//! constraint at a time, last deleted first, searching integer trial values
//! until the shifted slack passes the Cholesky test.

use crate::linalg::pd_check;
use crate::model::{Certificate, SdpProblem, StepKind, SymBlockMatrix};
use thiserror::Error;

/// Free-variable dual feasibility is an equality; this is its slack.
const FREE_EQUALITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct RecoveryOptions {
    /// Diagonal shift added before the positive-definiteness test.
    pub shift: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self { shift: 1e-6 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecoveryError {
    #[error("{what}: expected {expected}, got {actual}")]
    DimensionMismatch { what: &'static str, expected: usize, actual: usize },
    #[error("certificate proves infeasibility; there is nothing to recover")]
    InfeasibleCertificate,
    #[error("ideal recovery requires an external feasibility solver")]
    SolverUnavailable,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RecoveryResult {
    /// Multipliers for every original constraint, in original order.
    Recovered { y: Vec<f64> },
    /// The certificate step whose multiplier could not be recovered.
    Failed { step_index: usize },
}

/// Pad a reduced primal matrix back to the original dimensions: surviving
/// entries are copied through the index maps, deleted rows and columns are
/// exactly zero.
pub fn pad_primal(
    x_reduced: &SymBlockMatrix,
    certificate: &Certificate,
) -> Result<SymBlockMatrix, RecoveryError> {
    let maps = &certificate.index_maps;
    let reduced = &maps.reduced_structure;
    let mut out = SymBlockMatrix::new();
    for (block, i, j, v) in x_reduced.iter() {
        if block >= reduced.block_count() || j >= reduced.block_order(block) {
            return Err(RecoveryError::DimensionMismatch {
                what: "reduced primal entry block",
                expected: reduced.block_count(),
                actual: block,
            });
        }
        let offset: usize = (0..block).map(|b| reduced.block_order(b)).sum();
        let oi = maps.coord_to_original[offset + i];
        let oj = maps.coord_to_original[offset + j];
        debug_assert_eq!(oi.block, oj.block);
        out.set(oi.block, oi.row, oj.row, v);
    }
    Ok(out)
}

/// Shifted dual feasibility test for the full problem: every psd block of
/// `C − Σ y_i A_i + shift·I` passes the Cholesky test, every nonnegative
/// slack entry exceeds `-shift`, and the free-variable part of the dual
/// identity holds to `1e-9`.
pub fn dual_slack_pd(problem: &SdpProblem, y: &[f64], shift: f64) -> bool {
    assert_eq!(y.len(), problem.num_constraints(), "multiplier length");
    dual_slack_pd_masked(problem, y, shift, None)
}

/// Same test restricted to the active coordinates of an intermediate
/// reduction stage (`active` is indexed by flat coordinate).
fn dual_slack_pd_masked(problem: &SdpProblem, y: &[f64], shift: f64, active: Option<&[bool]>) -> bool {
    let slack = SymBlockMatrix::linear_combination(
        &problem.objective,
        y.iter()
            .zip(&problem.constraints)
            .map(|(&yi, c)| (-yi, &c.matrix)),
    );
    let s = &problem.structure;
    let mut offset = 0;
    for block in 0..s.block_count() {
        let order = s.block_order(block);
        let rows: Vec<usize> = match active {
            Some(mask) => (0..order).filter(|r| mask[offset + r]).collect(),
            None => (0..order).collect(),
        };
        offset += order;
        if rows.is_empty() {
            continue;
        }
        let dense = slack.dense_block(block, order);
        let mut sub = dense.principal_submatrix(&rows);
        for r in 0..rows.len() {
            sub.add_sym(r, r, shift);
        }
        if !pd_check(&sub, 0.0).is_positive_definite() {
            return false;
        }
    }
    for f in 0..s.free_count {
        let combo: f64 = y
            .iter()
            .zip(&problem.constraints)
            .map(|(&yi, c)| yi * c.free_coeffs[f])
            .sum();
        if (combo - problem.free_objective[f]).abs() > FREE_EQUALITY_TOL {
            return false;
        }
    }
    true
}

/// The integer linesearch for one deleted constraint: try 0, -1, -2; then
/// -100; if -100 passes, scan -3, -4, ... for the largest passing value,
/// never probing below -100.
fn linesearch(mut test: impl FnMut(f64) -> bool) -> Option<f64> {
    for v in [0.0, -1.0, -2.0] {
        if test(v) {
            return Some(v);
        }
    }
    if !test(-100.0) {
        return None;
    }
    for k in 3..100 {
        let v = -(k as f64);
        if test(v) {
            return Some(v);
        }
    }
    Some(-100.0)
}

/// Extend reduced dual multipliers to the full problem, one deleted
/// constraint at a time in reverse certificate order. Constraints deleted as
/// zero constraints get multiplier 0 outright.
pub fn basic_recovery(
    problem: &SdpProblem,
    certificate: &Certificate,
    y_reduced: &[f64],
    options: &RecoveryOptions,
) -> Result<RecoveryResult, RecoveryError> {
    if certificate.steps.iter().any(|s| s.kind == StepKind::Infeasible) {
        return Err(RecoveryError::InfeasibleCertificate);
    }
    let survivors = &certificate.index_maps.constraint_to_original;
    if y_reduced.len() != survivors.len() {
        return Err(RecoveryError::DimensionMismatch {
            what: "reduced multiplier vector",
            expected: survivors.len(),
            actual: y_reduced.len(),
        });
    }
    let m = certificate.original_constraint_count;
    if problem.num_constraints() != m {
        return Err(RecoveryError::DimensionMismatch {
            what: "problem constraint count",
            expected: m,
            actual: problem.num_constraints(),
        });
    }

    let mut y = vec![0.0; m];
    for (reduced_idx, &orig) in survivors.iter().enumerate() {
        y[orig] = y_reduced[reduced_idx];
    }

    // active_before[j] = live coordinates before step j ran; the stage for
    // recovering step j's multiplier.
    let n = problem.structure.cone_dim();
    let coords = problem.structure.coordinates();
    let flat = |c: &crate::model::Coordinate| coords.binary_search(c).expect("coordinate in structure");
    let mut active = vec![true; n];
    let mut active_before: Vec<Vec<bool>> = Vec::with_capacity(certificate.steps.len());
    for step in &certificate.steps {
        active_before.push(active.clone());
        for c in &step.support {
            active[flat(c)] = false;
        }
    }

    for (j, step) in certificate.steps.iter().enumerate().rev() {
        match step.kind {
            StepKind::DeleteZeroConstraint => {
                y[step.constraint_index] = 0.0;
            }
            StepKind::ReducePsd => {
                let mask = &active_before[j];
                let idx = step.constraint_index;
                let found = linesearch(|trial| {
                    y[idx] = trial;
                    dual_slack_pd_masked(problem, &y, options.shift, Some(mask))
                });
                match found {
                    Some(v) => y[idx] = v,
                    None => return Ok(RecoveryResult::Failed { step_index: j }),
                }
            }
            StepKind::Infeasible => unreachable!("rejected above"),
        }
    }
    Ok(RecoveryResult::Recovered { y })
}

/// Caller-supplied feasibility solver for [`ideal_recovery`].
pub type IdealSolverFn = dyn Fn(&IdealRecoveryRequest<'_>) -> Option<Vec<f64>>;

/// Everything an external feasibility solver needs to attempt the joint
/// recovery of all deleted multipliers at once.
pub struct IdealRecoveryRequest<'a> {
    pub problem: &'a SdpProblem,
    pub certificate: &'a Certificate,
    /// Full-length multiplier vector with survivors filled in and deleted
    /// positions zeroed; the solver overwrites the deleted positions.
    pub fixed_y: Vec<f64>,
    /// Deleted constraint indices in certificate order; the solver returns
    /// one multiplier per entry.
    pub deleted: Vec<usize>,
}

/// Delegate the joint feasibility problem over all deleted multipliers to a
/// caller-supplied solver, then verify the returned point with the shifted
/// slack test. Without a solver this is an unsupported operation.
pub fn ideal_recovery(
    problem: &SdpProblem,
    certificate: &Certificate,
    y_reduced: &[f64],
    options: &RecoveryOptions,
    solver: Option<&IdealSolverFn>,
) -> Result<RecoveryResult, RecoveryError> {
    let solver = solver.ok_or(RecoveryError::SolverUnavailable)?;
    if certificate.steps.iter().any(|s| s.kind == StepKind::Infeasible) {
        return Err(RecoveryError::InfeasibleCertificate);
    }
    let survivors = &certificate.index_maps.constraint_to_original;
    if y_reduced.len() != survivors.len() {
        return Err(RecoveryError::DimensionMismatch {
            what: "reduced multiplier vector",
            expected: survivors.len(),
            actual: y_reduced.len(),
        });
    }
    let mut fixed_y = vec![0.0; certificate.original_constraint_count];
    for (reduced_idx, &orig) in survivors.iter().enumerate() {
        fixed_y[orig] = y_reduced[reduced_idx];
    }
    let deleted: Vec<usize> = certificate
        .steps
        .iter()
        .map(|s| s.constraint_index)
        .collect();
    let request = IdealRecoveryRequest { problem, certificate, fixed_y: fixed_y.clone(), deleted: deleted.clone() };
    let Some(values) = solver(&request) else {
        return Ok(RecoveryResult::Failed { step_index: 0 });
    };
    if values.len() != deleted.len() {
        return Err(RecoveryError::DimensionMismatch {
            what: "solver multiplier vector",
            expected: deleted.len(),
            actual: values.len(),
        });
    }
    let mut y = fixed_y;
    for (&idx, &v) in deleted.iter().zip(&values) {
        y[idx] = v;
    }
    if dual_slack_pd(problem, &y, options.shift) {
        Ok(RecoveryResult::Recovered { y })
    } else {
        Ok(RecoveryResult::Failed { step_index: 0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::linalg::min_eigenvalue;
    use crate::model::{BlockStructure, Constraint, SdpProblem};
    use crate::sieve::{sieve, SieveOptions};

    fn diag_entry(block: usize, row: usize, v: f64) -> SymBlockMatrix {
        let mut m = SymBlockMatrix::new();
        m.set(block, row, row, v);
        m
    }

    fn posgap_certificate() -> Certificate {
        let outcome = sieve(&gen::posgap(), &SieveOptions::default()).unwrap();
        outcome.certificate().clone()
    }

    #[test]
    fn pad_primal_restores_original_positions() {
        let cert = posgap_certificate();
        // Reduced optimum [[1,0],[0,0]] lives on original coordinate 1.
        let x = pad_primal(&diag_entry(0, 0, 1.0), &cert).unwrap();
        assert_eq!(x.iter().collect::<Vec<_>>(), vec![(0, 1, 1, 1.0)]);
        // An entry on reduced coordinate (1,1) maps to original (2,2).
        let x = pad_primal(&diag_entry(0, 1, 1.0), &cert).unwrap();
        assert_eq!(x.iter().collect::<Vec<_>>(), vec![(0, 2, 2, 1.0)]);
    }

    #[test]
    fn pad_primal_with_empty_certificate_is_identity() {
        let outcome = sieve(&gen::planted(1, 6, 3, 0).unwrap().0, &SieveOptions::default()).unwrap();
        let cert = outcome.certificate().clone();
        assert_eq!(cert.steps.len(), 0);
        let mut x = SymBlockMatrix::new();
        x.set(0, 0, 2, 1.5);
        x.set(0, 4, 4, 2.0);
        assert_eq!(pad_primal(&x, &cert).unwrap(), x);
        assert_eq!(pad_primal(&SymBlockMatrix::new(), &cert).unwrap(), SymBlockMatrix::new());
    }

    #[test]
    fn pad_primal_rejects_out_of_range_entries() {
        let cert = posgap_certificate();
        let mut x = SymBlockMatrix::new();
        x.set(0, 2, 2, 1.0); // reduced block has order 2
        assert!(matches!(
            pad_primal(&x, &cert),
            Err(RecoveryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pad_then_restrict_is_identity() {
        let (p, _) = gen::planted(33, 12, 9, 3).unwrap();
        let outcome = sieve(&p, &SieveOptions::default()).unwrap();
        let cert = outcome.certificate().clone();
        let reduced = outcome.reduced_problem().unwrap();
        let mut x = SymBlockMatrix::new();
        for block in 0..reduced.structure.block_count() {
            let order = reduced.structure.block_order(block);
            for i in 0..order {
                for j in i..order {
                    x.set(block, i, j, (1 + i + 2 * j + 3 * block) as f64);
                }
            }
        }
        let padded = pad_primal(&x, &cert).unwrap();
        // Restricting back through the maps recovers every entry.
        for (block, i, j, v) in x.iter() {
            let offset: usize =
                (0..block).map(|b| cert.index_maps.reduced_structure.block_order(b)).sum();
            let oi = cert.index_maps.coord_to_original[offset + i];
            let oj = cert.index_maps.coord_to_original[offset + j];
            assert_eq!(padded.get(oi.block, oi.row, oj.row), v);
        }
        assert_eq!(padded.nnz(), x.nnz());
    }

    #[test]
    fn slack_test_trivial_cases() {
        // C = I, y = 0: slack is the identity.
        let p = SdpProblem {
            structure: BlockStructure::new(vec![3], 0, 0),
            objective: {
                let mut c = SymBlockMatrix::new();
                for i in 0..3 {
                    c.set(0, i, i, 1.0);
                }
                c
            },
            free_objective: vec![],
            constraints: vec![Constraint { matrix: diag_entry(0, 0, 1.0), free_coeffs: vec![], rhs: 0.0 }],
        };
        assert!(dual_slack_pd(&p, &[0.0], 1e-6));

        // C = diag(5), A = diag(1), y = 4: slack diag(1).
        let p = SdpProblem {
            structure: BlockStructure::new(vec![1], 0, 0),
            objective: diag_entry(0, 0, 5.0),
            free_objective: vec![],
            constraints: vec![Constraint { matrix: diag_entry(0, 0, 1.0), free_coeffs: vec![], rhs: 0.0 }],
        };
        assert!(dual_slack_pd(&p, &[4.0], 1e-6));
        assert!(!dual_slack_pd(&p, &[6.0], 1e-6));
    }

    #[test]
    fn slack_test_rejects_posgap_for_every_trial() {
        let p = gen::posgap();
        for y1 in [0.0, -1.0, -2.0, -100.0] {
            assert!(!dual_slack_pd(&p, &[y1, 1.0], 1e-6), "y1 = {y1}");
        }
    }

    #[test]
    fn slack_test_checks_nonneg_and_free_parts() {
        let p = SdpProblem {
            structure: BlockStructure::new(vec![], 1, 1),
            objective: diag_entry(0, 0, 1.0),
            free_objective: vec![2.0],
            constraints: vec![Constraint {
                matrix: diag_entry(0, 0, 1.0),
                free_coeffs: vec![1.0],
                rhs: 0.0,
            }],
        };
        // Slack 1 - y in the nonneg scalar; free equality needs y = 2.
        assert!(!dual_slack_pd(&p, &[0.0], 1e-6));
        assert!(!dual_slack_pd(&p, &[2.5], 1e-6));
        let p_eq = SdpProblem { free_objective: vec![0.5], ..p.clone() };
        assert!(dual_slack_pd(&p_eq, &[0.5], 1e-6));
    }

    #[test]
    fn basic_recovery_fails_on_posgap() {
        let p = gen::posgap();
        let cert = posgap_certificate();
        let result = basic_recovery(&p, &cert, &[1.0], &RecoveryOptions::default()).unwrap();
        assert_eq!(result, RecoveryResult::Failed { step_index: 0 });
        assert_eq!(cert.steps[0].constraint_index, 0);
    }

    #[test]
    fn basic_recovery_trivial_zero_multiplier() {
        // After deleting coordinate 0 the survivor pins y2 = 2; y1 = 0
        // already leaves the slack positive definite.
        let p = SdpProblem {
            structure: BlockStructure::new(vec![2], 0, 0),
            objective: {
                let mut c = SymBlockMatrix::new();
                c.set(0, 0, 0, 1.0);
                c.set(0, 1, 1, 2.0);
                c
            },
            free_objective: vec![],
            constraints: vec![
                Constraint { matrix: diag_entry(0, 0, 1.0), free_coeffs: vec![], rhs: 0.0 },
                Constraint { matrix: diag_entry(0, 1, 1.0), free_coeffs: vec![], rhs: 1.0 },
            ],
        };
        let outcome = sieve(&p, &SieveOptions::default()).unwrap();
        let cert = outcome.certificate();
        let result = basic_recovery(&p, cert, &[2.0], &RecoveryOptions::default()).unwrap();
        assert_eq!(result, RecoveryResult::Recovered { y: vec![0.0, 2.0] });
    }

    /// Slack is positive definite iff y1 ≤ -3.5: the leading 2×2 block of
    /// C - y1·A1 - 2·A2 has determinant -y1 - 3.5 once the survivor
    /// multiplier 2 is fixed.
    fn threshold_instance() -> SdpProblem {
        let mut c = SymBlockMatrix::new();
        c.set(0, 0, 0, 0.5);
        c.set(0, 0, 1, 2.0);
        c.set(0, 1, 1, 1.0);
        c.set(0, 2, 2, 2.0);
        SdpProblem {
            structure: BlockStructure::new(vec![3], 0, 0),
            objective: c,
            free_objective: vec![],
            constraints: vec![
                Constraint { matrix: diag_entry(0, 0, 1.0), free_coeffs: vec![], rhs: 0.0 },
                Constraint { matrix: diag_entry(0, 2, 1.0), free_coeffs: vec![], rhs: 1.0 },
            ],
        }
    }

    #[test]
    fn basic_recovery_scans_down_to_the_threshold() {
        let p = threshold_instance();
        let outcome = sieve(&p, &SieveOptions::default()).unwrap();
        let cert = outcome.certificate();
        assert_eq!(cert.steps.len(), 1);
        let options = RecoveryOptions::default();
        let result = basic_recovery(&p, cert, &[2.0], &options).unwrap();
        let RecoveryResult::Recovered { y } = result else {
            panic!("expected recovery");
        };
        assert_eq!(y, vec![-4.0, 2.0]);
        assert!(dual_slack_pd(&p, &y, options.shift));
        // Independent check of the threshold via eigenvalues.
        for (y1, feasible) in [(-3.0, false), (-4.0, true)] {
            let slack = SymBlockMatrix::linear_combination(
                &p.objective,
                [(-y1, &p.constraints[0].matrix), (-2.0, &p.constraints[1].matrix)],
            );
            let mut dense = slack.dense_block(0, 3);
            for i in 0..3 {
                dense.add_sym(i, i, options.shift);
            }
            assert_eq!(min_eigenvalue(&dense).unwrap() > 0.0, feasible, "y1 = {y1}");
        }
    }

    #[test]
    fn recovered_multiplier_preserves_the_dual_objective() {
        let p = threshold_instance();
        let outcome = sieve(&p, &SieveOptions::default()).unwrap();
        let cert = outcome.certificate();
        let y_reduced = [2.0];
        let RecoveryResult::Recovered { y } =
            basic_recovery(&p, cert, &y_reduced, &RecoveryOptions::default()).unwrap()
        else {
            panic!("expected recovery");
        };
        // Deleted reducing constraints have b certified (near) zero, so the
        // objective must match the reduced dual objective up to that bound.
        let full: f64 = y.iter().zip(p.rhs()).map(|(yi, bi)| yi * bi).sum();
        let reduced_obj: f64 = cert
            .index_maps
            .constraint_to_original
            .iter()
            .zip(&y_reduced)
            .map(|(&orig, yr)| p.constraints[orig].rhs * yr)
            .sum();
        let bound: f64 = cert
            .steps
            .iter()
            .map(|s| s.b_value.abs() * y[s.constraint_index].abs())
            .sum();
        assert!((full - reduced_obj).abs() <= bound + 1e-15);
    }

    #[test]
    fn basic_recovery_rejects_infeasible_certificates() {
        let p = gen::example1();
        let outcome = sieve(&p, &SieveOptions::default()).unwrap();
        assert!(matches!(
            basic_recovery(&p, outcome.certificate(), &[], &RecoveryOptions::default()),
            Err(RecoveryError::InfeasibleCertificate)
        ));
    }

    #[test]
    fn ideal_recovery_requires_a_solver() {
        let p = gen::posgap();
        let cert = posgap_certificate();
        assert_eq!(
            ideal_recovery(&p, &cert, &[1.0], &RecoveryOptions::default(), None),
            Err(RecoveryError::SolverUnavailable)
        );
    }

    #[test]
    fn ideal_recovery_verifies_the_callback_point() {
        let p = gen::posgap();
        let cert = posgap_certificate();
        let options = RecoveryOptions::default();

        let always_fail = |_: &IdealRecoveryRequest<'_>| None;
        assert_eq!(
            ideal_recovery(&p, &cert, &[1.0], &options, Some(&always_fail)).unwrap(),
            RecoveryResult::Failed { step_index: 0 }
        );

        // A returned point that is not dual feasible is rejected.
        let bogus = |_: &IdealRecoveryRequest<'_>| Some(vec![0.0]);
        assert_eq!(
            ideal_recovery(&p, &cert, &[1.0], &options, Some(&bogus)).unwrap(),
            RecoveryResult::Failed { step_index: 0 }
        );

        // On a recoverable instance a correct callback point verifies.
        let p = threshold_instance();
        let outcome = sieve(&p, &SieveOptions::default()).unwrap();
        let good = |_: &IdealRecoveryRequest<'_>| Some(vec![-5.0]);
        let result =
            ideal_recovery(&p, outcome.certificate(), &[2.0], &options, Some(&good)).unwrap();
        assert_eq!(result, RecoveryResult::Recovered { y: vec![-5.0, 2.0] });
    }
}
