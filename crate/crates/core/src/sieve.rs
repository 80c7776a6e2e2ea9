//! The reduction loop: repeatedly find a constraint that, after a symmetric
//! permutation and an optional sign flip, reads `[D 0; 0 0] • X = b` with
//! `D ≻ 0` and `b ≤ 0`; delete it (and the rows/columns of `D`) when `b = 0`,
//! or stop with an infeasibility certificate when `b < 0`.
//!
//! Rows, columns, and constraints are only *marked* deleted while the loop
//! runs; the reduced problem is compacted once at the very end, so no
//! arithmetic is ever performed on deleted data.

use crate::linalg::{pd_check, DenseSym};
use crate::model::{
    validate, BlockStructure, Certificate, Constraint, Coordinate, IndexMaps, ReductionStep,
    SdpProblem, SieveOutcome, SieveVerdict, StepKind, SymBlockMatrix, Violation,
};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Knobs for a sieve run. The scan order is fixed: increasing constraint
/// index, restarting from the top after every deletion.
#[derive(Clone, Debug)]
pub struct SieveOptions {
    /// Tolerance-banded comparisons against `b` instead of exact ones.
    pub safe_mode: bool,
    /// Base tolerance; the treat-as-zero band is `eps·max(‖b‖∞, 1)` and the
    /// declare-infeasible threshold is `sqrt(eps)·max(‖b‖∞, 1)`.
    pub eps: f64,
    /// Optional cap on the number of certificate steps.
    pub max_iterations: Option<usize>,
}

impl Default for SieveOptions {
    fn default() -> Self {
        // 2^-52, the double-precision machine epsilon.
        Self { safe_mode: true, eps: f64::EPSILON, max_iterations: None }
    }
}

/// How one constraint looks under the current deletion masks.
#[derive(Clone, Debug, PartialEq)]
pub enum Classification {
    /// Not in reducing form (or touches a free variable).
    NotReducing,
    /// Live part is the zero matrix with rhs 0: the constraint is redundant.
    DeleteZero,
    /// `sign·(A restricted to support) ≻ 0` with rhs treated as zero.
    Reduce { sign: i8, support: Vec<Coordinate> },
    /// The constraint proves infeasibility.
    Infeasible { sign: i8 },
    /// rhs falls between the zero band and the infeasibility threshold;
    /// skipped in safe mode.
    Ambiguous,
}

/// Deletion bookkeeping: the `undeleted` constraint flags and the
/// `n × (m+1)` indicator table whose column `j < m` marks the rows that are
/// live in constraint `j` and whose last column aggregates coordinate
/// liveness across the whole problem.
#[derive(Clone, Debug)]
pub struct SieveState {
    undeleted: Vec<bool>,
    active: Vec<bool>,
    usage: IndicatorTable,
    /// Flat coordinates each constraint's stored entries touch (static).
    touched: Vec<Vec<usize>>,
    /// Stored entries of each constraint as flat endpoint pairs (static).
    entry_pairs: Vec<Vec<(usize, usize)>>,
    /// Constraints touching each coordinate (static).
    coord_constraints: Vec<Vec<usize>>,
    /// `max(‖b‖∞, 1)` over the original right-hand sides, frozen at start.
    scale: f64,
    steps: Vec<ReductionStep>,
    coords: Vec<Coordinate>,
}

#[derive(Clone, Debug)]
struct IndicatorTable {
    cols: usize,
    bits: Vec<bool>,
}

impl IndicatorTable {
    fn new(rows: usize, cols: usize) -> Self {
        Self { cols, bits: vec![false; rows * cols] }
    }

    fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c]
    }

    fn set(&mut self, r: usize, c: usize, v: bool) {
        self.bits[r * self.cols + c] = v;
    }
}

/// Work counters for complexity assertions; wall clock stays out of tests.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SieveRunStats {
    /// Full scans over the constraint list (each deletion restarts the scan).
    pub passes: usize,
    /// Positive-definiteness tests performed.
    pub pd_checks: usize,
    /// Σ order³ over all factorization attempts, a flop proxy.
    pub factor_work: usize,
}

#[derive(Debug, Error)]
pub enum SieveError {
    #[error("problem fails validation: {}", format_violations(.0))]
    InvalidProblem(Vec<Violation>),
    #[error("iteration cap of {cap} reached before the sieve finished")]
    IterationLimit { cap: usize, state: Box<SieveState> },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl SieveState {
    pub fn new(problem: &SdpProblem) -> Self {
        let m = problem.num_constraints();
        let n = problem.structure.cone_dim();
        let coords = problem.structure.coordinates();
        let flat: BTreeMap<Coordinate, usize> =
            coords.iter().enumerate().map(|(i, &c)| (c, i)).collect();

        let mut usage = IndicatorTable::new(n, m + 1);
        let mut touched = vec![Vec::new(); m];
        let mut entry_pairs = vec![Vec::new(); m];
        let mut coord_constraints = vec![Vec::new(); n];
        for (j, c) in problem.constraints.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for (block, i, k, _) in c.matrix.iter() {
                let r = flat[&Coordinate { block, row: i }];
                let t = flat[&Coordinate { block, row: k }];
                entry_pairs[j].push((r, t));
                seen.insert(r);
                seen.insert(t);
            }
            for &r in &seen {
                usage.set(r, j, true);
                coord_constraints[r].push(j);
            }
            touched[j] = seen.into_iter().collect();
        }
        for r in 0..n {
            usage.set(r, m, true);
        }

        let b_inf = problem.constraints.iter().fold(0.0f64, |acc, c| acc.max(c.rhs.abs()));
        Self {
            undeleted: vec![true; m],
            active: vec![true; n],
            usage,
            touched,
            entry_pairs,
            coord_constraints,
            scale: b_inf.max(1.0),
            steps: Vec::new(),
            coords,
        }
    }

    pub fn is_constraint_undeleted(&self, i: usize) -> bool {
        self.undeleted[i]
    }

    pub fn is_coordinate_active(&self, c: Coordinate, structure: &BlockStructure) -> bool {
        self.active[structure.flat_index(c)]
    }

    pub fn steps(&self) -> &[ReductionStep] {
        &self.steps
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn num_constraints(&self) -> usize {
        self.undeleted.len()
    }

    fn tolerances(&self, options: &SieveOptions) -> (f64, f64) {
        if options.safe_mode {
            (options.eps * self.scale, options.eps.sqrt() * self.scale)
        } else {
            (0.0, 0.0)
        }
    }

    /// Active coordinates where constraint `i` still has a live stored entry,
    /// in canonical order.
    pub fn constraint_support(&self, i: usize) -> Vec<Coordinate> {
        self.touched[i]
            .iter()
            .filter(|&&r| self.usage.get(r, i))
            .map(|&r| self.coords[r])
            .collect()
    }

    /// Dense copy of constraint `i` restricted to `support`; positions whose
    /// endpoints fall in different blocks are structural zeros.
    fn support_submatrix(&self, problem: &SdpProblem, i: usize, support: &[Coordinate]) -> DenseSym {
        let matrix = &problem.constraints[i].matrix;
        DenseSym::from_fn(support.len(), |p, q| {
            let (cp, cq) = (support[p], support[q]);
            if cp.block == cq.block {
                matrix.get(cp.block, cp.row, cq.row)
            } else {
                0.0
            }
        })
    }

    /// Classify constraint `i` under the current masks.
    pub fn classify_constraint(
        &self,
        problem: &SdpProblem,
        i: usize,
        options: &SieveOptions,
    ) -> Classification {
        self.classify_with_stats(problem, i, options, &mut SieveRunStats::default())
    }

    fn classify_with_stats(
        &self,
        problem: &SdpProblem,
        i: usize,
        options: &SieveOptions,
        stats: &mut SieveRunStats,
    ) -> Classification {
        debug_assert!(self.undeleted[i]);
        let constraint = &problem.constraints[i];
        // A free variable admits any value, so a constraint that touches one
        // can never force anything.
        if constraint.free_coeffs.iter().any(|&v| v != 0.0) {
            return Classification::NotReducing;
        }
        let (zero_tol, infeas_tol) = self.tolerances(options);
        let support = self.constraint_support(i);
        if support.is_empty() {
            // 0 = b is unconditionally inconsistent for b outside the band.
            return if constraint.rhs.abs() <= zero_tol {
                Classification::DeleteZero
            } else {
                Classification::Infeasible { sign: if constraint.rhs > 0.0 { -1 } else { 1 } }
            };
        }
        let d = self.support_submatrix(problem, i, &support);
        let work = support.len() * support.len() * support.len();
        stats.pd_checks += 1;
        stats.factor_work += work;
        let sign: i8 = if pd_check(&d, 0.0).is_positive_definite() {
            1
        } else {
            stats.pd_checks += 1;
            stats.factor_work += work;
            if pd_check(&d.negated(), 0.0).is_positive_definite() {
                -1
            } else {
                return Classification::NotReducing;
            }
        };
        let signed_b = f64::from(sign) * constraint.rhs;
        if signed_b > zero_tol {
            Classification::NotReducing
        } else if signed_b > -zero_tol {
            Classification::Reduce { sign, support }
        } else if signed_b < -infeas_tol {
            Classification::Infeasible { sign }
        } else if options.safe_mode {
            Classification::Ambiguous
        } else {
            // Exact mode has no band: this is exactly b = 0.
            Classification::Reduce { sign, support }
        }
    }

    /// Mark a `Reduce` or `DeleteZero` step as applied: the constraint is
    /// deleted, its support coordinates leave the active mask, and the
    /// indicator columns of the constraints that shared those rows are
    /// refreshed so later support queries exclude them.
    pub fn apply_reduction(&mut self, step: ReductionStep) {
        debug_assert!(step.kind != StepKind::Infeasible);
        debug_assert!(self.undeleted[step.constraint_index]);
        let idx = step.constraint_index;
        self.undeleted[idx] = false;
        for &r in &self.touched[idx] {
            self.usage.set(r, idx, false);
        }
        let m = self.num_constraints();
        let mut dirty = BTreeSet::new();
        for coord in &step.support {
            let r = self.flat(*coord);
            debug_assert!(self.active[r]);
            self.active[r] = false;
            self.usage.set(r, m, false);
            for &j in &self.coord_constraints[r] {
                if self.undeleted[j] {
                    dirty.insert(j);
                }
            }
        }
        for j in dirty {
            self.refresh_column(j);
        }
        self.steps.push(step);
    }

    fn record_infeasible(&mut self, step: ReductionStep) {
        debug_assert_eq!(step.kind, StepKind::Infeasible);
        self.steps.push(step);
    }

    fn refresh_column(&mut self, j: usize) {
        for &r in &self.touched[j] {
            self.usage.set(r, j, false);
        }
        let pairs = std::mem::take(&mut self.entry_pairs[j]);
        for &(r, t) in &pairs {
            if self.active[r] && self.active[t] {
                self.usage.set(r, j, true);
                self.usage.set(t, j, true);
            }
        }
        self.entry_pairs[j] = pairs;
    }

    fn flat(&self, c: Coordinate) -> usize {
        // coords is in canonical order, so a binary search doubles as the map.
        self.coords.binary_search(&c).expect("coordinate outside structure")
    }

    fn deleted_coordinates(&self) -> BTreeSet<Coordinate> {
        self.coords
            .iter()
            .enumerate()
            .filter(|&(r, _)| !self.active[r])
            .map(|(_, &c)| c)
            .collect()
    }

    fn deleted_constraints(&self) -> BTreeSet<usize> {
        // A constraint flagged by the final infeasible step is not deleted.
        (0..self.num_constraints()).filter(|&j| !self.undeleted[j]).collect()
    }
}

/// Index maps implied by a pair of deletion sets: blocks shrink, blocks of
/// order 0 disappear, surviving nonnegative scalars stay nonnegative, and
/// constraints are renumbered densely.
pub fn index_maps_for(
    structure: &BlockStructure,
    constraint_count: usize,
    deleted_coordinates: &BTreeSet<Coordinate>,
    deleted_constraints: &BTreeSet<usize>,
) -> IndexMaps {
    let psd_count = structure.psd_blocks.len();
    let mut coord_to_reduced = BTreeMap::new();
    let mut coord_to_original = Vec::new();
    let mut reduced_psd = Vec::new();

    for block in 0..psd_count {
        let survivors: Vec<usize> = (0..structure.block_order(block))
            .filter(|&row| !deleted_coordinates.contains(&Coordinate { block, row }))
            .collect();
        if survivors.is_empty() {
            continue;
        }
        let new_block = reduced_psd.len();
        for (new_row, &row) in survivors.iter().enumerate() {
            let orig = Coordinate { block, row };
            coord_to_reduced.insert(orig, Coordinate { block: new_block, row: new_row });
            coord_to_original.push(orig);
        }
        reduced_psd.push(survivors.len());
    }
    let mut reduced_nonneg = 0;
    for block in psd_count..structure.block_count() {
        let orig = Coordinate { block, row: 0 };
        if !deleted_coordinates.contains(&orig) {
            let new_block = reduced_psd.len() + reduced_nonneg;
            coord_to_reduced.insert(orig, Coordinate { block: new_block, row: 0 });
            coord_to_original.push(orig);
            reduced_nonneg += 1;
        }
    }
    let reduced_structure = BlockStructure::new(reduced_psd, reduced_nonneg, structure.free_count);

    let mut constraint_to_reduced = BTreeMap::new();
    let mut constraint_to_original = Vec::new();
    for j in 0..constraint_count {
        if !deleted_constraints.contains(&j) {
            constraint_to_reduced.insert(j, constraint_to_original.len());
            constraint_to_original.push(j);
        }
    }
    IndexMaps {
        reduced_structure,
        coord_to_reduced,
        coord_to_original,
        constraint_to_reduced,
        constraint_to_original,
    }
}

/// Compact the problem under the state's deletion masks.
pub fn materialize(problem: &SdpProblem, state: &SieveState) -> (SdpProblem, IndexMaps) {
    let maps = index_maps_for(
        &problem.structure,
        problem.num_constraints(),
        &state.deleted_coordinates(),
        &state.deleted_constraints(),
    );

    let remap = |matrix: &SymBlockMatrix| {
        let mut out = SymBlockMatrix::new();
        for (block, i, j, v) in matrix.iter() {
            let (ci, cj) = (Coordinate { block, row: i }, Coordinate { block, row: j });
            if let (Some(&ri), Some(&rj)) =
                (maps.coord_to_reduced.get(&ci), maps.coord_to_reduced.get(&cj))
            {
                debug_assert_eq!(ri.block, rj.block);
                out.set(ri.block, ri.row, rj.row, v);
            }
        }
        out
    };

    let constraints = maps
        .constraint_to_original
        .iter()
        .map(|&j| {
            let c = &problem.constraints[j];
            Constraint {
                matrix: remap(&c.matrix),
                free_coeffs: c.free_coeffs.clone(),
                rhs: c.rhs,
            }
        })
        .collect();

    let reduced = SdpProblem {
        structure: maps.reduced_structure.clone(),
        objective: remap(&problem.objective),
        free_objective: problem.free_objective.clone(),
        constraints,
    };
    (reduced, maps)
}

fn build_certificate(problem: &SdpProblem, state: &SieveState) -> Certificate {
    let (_, index_maps) = materialize(problem, state);
    Certificate {
        steps: state.steps.to_vec(),
        original_structure: problem.structure.clone(),
        original_constraint_count: problem.num_constraints(),
        deleted_coordinates: state.deleted_coordinates(),
        deleted_constraints: state.deleted_constraints(),
        index_maps,
    }
}

/// Run the sieve to completion. See [`sieve_with_stats`] for work counters.
pub fn sieve(problem: &SdpProblem, options: &SieveOptions) -> Result<SieveOutcome, SieveError> {
    sieve_with_stats(problem, options).map(|(outcome, _)| outcome)
}

/// Run the sieve, also returning pass/factorization counters.
pub fn sieve_with_stats(
    problem: &SdpProblem,
    options: &SieveOptions,
) -> Result<(SieveOutcome, SieveRunStats), SieveError> {
    let violations = validate(problem);
    if !violations.is_empty() {
        return Err(SieveError::InvalidProblem(violations));
    }
    let m = problem.num_constraints();
    let mut state = SieveState::new(problem);
    let mut stats = SieveRunStats::default();

    'scan: loop {
        stats.passes += 1;
        for i in 0..m {
            if !state.is_constraint_undeleted(i) {
                continue;
            }
            let class = state.classify_with_stats(problem, i, options, &mut stats);
            let rhs = problem.constraints[i].rhs;
            match class {
                Classification::NotReducing | Classification::Ambiguous => {}
                Classification::DeleteZero => {
                    check_cap(options, &state)?;
                    state.apply_reduction(ReductionStep {
                        kind: StepKind::DeleteZeroConstraint,
                        constraint_index: i,
                        sign: 1,
                        support: Vec::new(),
                        b_value: rhs,
                    });
                    continue 'scan;
                }
                Classification::Reduce { sign, support } => {
                    check_cap(options, &state)?;
                    state.apply_reduction(ReductionStep {
                        kind: StepKind::ReducePsd,
                        constraint_index: i,
                        sign,
                        support,
                        b_value: rhs,
                    });
                    continue 'scan;
                }
                Classification::Infeasible { sign } => {
                    check_cap(options, &state)?;
                    let support = state.constraint_support(i);
                    state.record_infeasible(ReductionStep {
                        kind: StepKind::Infeasible,
                        constraint_index: i,
                        sign,
                        support,
                        b_value: rhs,
                    });
                    let certificate = build_certificate(problem, &state);
                    let iteration_count = certificate.steps.len();
                    return Ok((
                        SieveOutcome {
                            verdict: SieveVerdict::Infeasible { certificate },
                            iteration_count,
                        },
                        stats,
                    ));
                }
            }
        }
        break;
    }

    let certificate = build_certificate(problem, &state);
    let (reduced, _) = materialize(problem, &state);
    let iteration_count = certificate.steps.len();
    Ok((
        SieveOutcome {
            verdict: SieveVerdict::Reduced { problem: reduced, certificate },
            iteration_count,
        },
        stats,
    ))
}

fn check_cap(options: &SieveOptions, state: &SieveState) -> Result<(), SieveError> {
    if let Some(cap) = options.max_iterations {
        if state.steps.len() >= cap {
            return Err(SieveError::IterationLimit { cap, state: Box::new(state.clone()) });
        }
    }
    Ok(())
}

/// Replay certificate steps against an empty state to rebuild the deletion
/// masks; used when a certificate is read back from disk.
pub fn replay_steps(
    structure: &BlockStructure,
    constraint_count: usize,
    steps: &[ReductionStep],
) -> (BTreeSet<Coordinate>, BTreeSet<usize>) {
    let mut coords = BTreeSet::new();
    let mut constraints = BTreeSet::new();
    for step in steps {
        match step.kind {
            StepKind::ReducePsd | StepKind::DeleteZeroConstraint => {
                debug_assert!(step.constraint_index < constraint_count);
                constraints.insert(step.constraint_index);
                for &c in &step.support {
                    debug_assert!(c.row < structure.block_order(c.block));
                    coords.insert(c);
                }
            }
            StepKind::Infeasible => {}
        }
    }
    (coords, constraints)
}
