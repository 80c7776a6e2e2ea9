//! Core data types: block structure, sparse symmetric matrices, problems,
//! solutions, and reduction certificates.
//!
//! All types here are immutable after construction and safe to share
//! read-only across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Cone layout of the variable matrix: semidefinite blocks, then nonnegative
/// scalars, plus unconstrained scalars that live outside the cone.
///
/// Nonnegative scalars are modeled as order-1 semidefinite blocks placed
/// after the listed blocks; `nonneg_count` records them separately only for
/// reporting. Free variables carry coefficient vectors instead of matrix
/// blocks, so they are not addressed by [`Coordinate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockStructure {
    /// Orders of the semidefinite blocks, each ≥ 1.
    pub psd_blocks: Vec<usize>,
    /// Number of nonnegative scalar variables (order-1 blocks after the psd blocks).
    pub nonneg_count: usize,
    /// Number of unconstrained scalar variables.
    pub free_count: usize,
}

impl BlockStructure {
    pub fn new(psd_blocks: Vec<usize>, nonneg_count: usize, free_count: usize) -> Self {
        Self { psd_blocks, nonneg_count, free_count }
    }

    /// Number of addressable blocks: psd blocks plus one per nonnegative scalar.
    pub fn block_count(&self) -> usize {
        self.psd_blocks.len() + self.nonneg_count
    }

    /// Order of a block; nonnegative scalars have order 1.
    pub fn block_order(&self, block: usize) -> usize {
        if block < self.psd_blocks.len() {
            self.psd_blocks[block]
        } else {
            1
        }
    }

    /// True for the order-1 blocks that represent nonnegative scalars.
    pub fn is_nonneg_block(&self, block: usize) -> bool {
        block >= self.psd_blocks.len()
    }

    /// Total dimension of the cone part: sum of psd orders plus nonneg count.
    pub fn cone_dim(&self) -> usize {
        self.psd_blocks.iter().sum::<usize>() + self.nonneg_count
    }

    /// Flat index of a coordinate in `0..cone_dim()`, blocks laid out in order.
    pub fn flat_index(&self, c: Coordinate) -> usize {
        let mut offset = 0;
        for b in 0..c.block {
            offset += self.block_order(b);
        }
        offset + c.row
    }

    /// All coordinates in canonical (block, row) order.
    pub fn coordinates(&self) -> Vec<Coordinate> {
        let mut out = Vec::with_capacity(self.cone_dim());
        for block in 0..self.block_count() {
            for row in 0..self.block_order(block) {
                out.push(Coordinate { block, row });
            }
        }
        out
    }
}

/// A row/column position inside one block of the variable matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coordinate {
    pub block: usize,
    pub row: usize,
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.block, self.row)
    }
}

/// Sparse symmetric matrix partitioned by blocks.
///
/// Only the upper triangle (`i ≤ j`) is stored; an off-diagonal entry denotes
/// the value at `(i, j)` and `(j, i)`. Exact zeros are never stored, so
/// support queries are exact set queries.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SymBlockMatrix {
    entries: BTreeMap<(usize, usize, usize), f64>,
}

impl SymBlockMatrix {
    pub fn new() -> Self {
        Self { entries: BTreeMap::new() }
    }

    /// Set the `(i, j)` entry of a block, symmetrizing the key and dropping
    /// exact zeros.
    pub fn set(&mut self, block: usize, i: usize, j: usize, value: f64) {
        let key = (block, i.min(j), i.max(j));
        if value == 0.0 {
            self.entries.remove(&key);
        } else {
            self.entries.insert(key, value);
        }
    }

    /// Insert an upper-triangle entry without symmetrizing; rejects `i > j`
    /// and duplicate keys. Zero values are dropped.
    pub fn insert_upper(&mut self, block: usize, i: usize, j: usize, value: f64) -> Result<(), String> {
        if i > j {
            return Err(format!("entry ({i},{j}) in block {block} is below the diagonal"));
        }
        if value == 0.0 {
            return Ok(());
        }
        if self.entries.insert((block, i, j), value).is_some() {
            return Err(format!("duplicate entry ({i},{j}) in block {block}"));
        }
        Ok(())
    }

    /// Build from raw `(block, i, j, value)` tuples with no invariant checks.
    /// Exists so `validate` has something to report on; regular construction
    /// goes through `set`/`insert_upper`.
    pub fn from_raw(entries: impl IntoIterator<Item = (usize, usize, usize, f64)>) -> Self {
        let mut m = Self::new();
        for (b, i, j, v) in entries {
            m.entries.insert((b, i, j), v);
        }
        m
    }

    pub fn get(&self, block: usize, i: usize, j: usize) -> f64 {
        self.entries
            .get(&(block, i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0.0)
    }

    /// Stored entries in canonical `(block, i, j)` order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(b, i, j), &v)| (b, i, j, v))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Trace inner product `self • other`, both matrices over the same
    /// structure. Off-diagonal stored entries count twice.
    pub fn inner(&self, other: &SymBlockMatrix) -> f64 {
        let (small, large) = if self.nnz() <= other.nnz() {
            (self, other)
        } else {
            (other, self)
        };
        let mut acc = 0.0;
        for (&(b, i, j), &v) in &small.entries {
            if let Some(&w) = large.entries.get(&(b, i, j)) {
                let weight = if i == j { 1.0 } else { 2.0 };
                acc += weight * v * w;
            }
        }
        acc
    }

    /// Largest absolute entry (the entrywise infinity norm of the full matrix).
    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Frobenius norm over the full square matrix (off-diagonals counted twice).
    pub fn frobenius(&self) -> f64 {
        let mut acc = 0.0;
        for (&(_, i, j), &v) in &self.entries {
            let weight = if i == j { 1.0 } else { 2.0 };
            acc += weight * v * v;
        }
        acc.sqrt()
    }

    /// `base + Σ coeff_k · term_k` with exact zeros pruned.
    pub fn linear_combination<'a>(
        base: &SymBlockMatrix,
        terms: impl IntoIterator<Item = (f64, &'a SymBlockMatrix)>,
    ) -> SymBlockMatrix {
        let mut acc = base.entries.clone();
        for (coeff, term) in terms {
            if coeff == 0.0 {
                continue;
            }
            for (&key, &v) in &term.entries {
                *acc.entry(key).or_insert(0.0) += coeff * v;
            }
        }
        acc.retain(|_, v| *v != 0.0);
        SymBlockMatrix { entries: acc }
    }

    /// Dense copy of one block (full symmetric storage).
    pub fn dense_block(&self, block: usize, order: usize) -> crate::linalg::DenseSym {
        let mut d = crate::linalg::DenseSym::zeros(order);
        for (&(b, i, j), &v) in self.entries.range((block, 0, 0)..(block + 1, 0, 0)) {
            debug_assert_eq!(b, block);
            d.set_sym(i, j, v);
        }
        d
    }

    /// Entries of one block, in canonical order.
    pub fn block_entries(&self, block: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries
            .range((block, 0, 0)..(block + 1, 0, 0))
            .map(|(&(_, i, j), &v)| (i, j, v))
    }
}

/// One affine constraint `A • X + fᵀ x_free = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub matrix: SymBlockMatrix,
    pub free_coeffs: Vec<f64>,
    pub rhs: f64,
}

/// Block-structured primal SDP data: objective, constraints, right-hand sides.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub structure: BlockStructure,
    pub objective: SymBlockMatrix,
    pub free_objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Right-hand sides as a vector.
    pub fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.rhs).collect()
    }

    /// Total stored nonzeros in the constraint matrices.
    pub fn constraint_nnz(&self) -> usize {
        self.constraints.iter().map(|c| c.matrix.nnz()).sum()
    }

    /// `A_i • X + fᵢᵀ x_free` for constraint `i`.
    pub fn eval_constraint(&self, i: usize, x: &SymBlockMatrix, x_free: &[f64]) -> f64 {
        let c = &self.constraints[i];
        let mut v = c.matrix.inner(x);
        for (coef, xf) in c.free_coeffs.iter().zip(x_free) {
            v += coef * xf;
        }
        v
    }

    /// `C • X + free objective ᵀ x_free`.
    pub fn eval_objective(&self, x: &SymBlockMatrix, x_free: &[f64]) -> f64 {
        let mut v = self.objective.inner(x);
        for (coef, xf) in self.free_objective.iter().zip(x_free) {
            v += coef * xf;
        }
        v
    }
}

/// A reported invariant breach; `validate` reports, it never fails.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    PsdBlockOrderZero { block: usize },
    EntryBelowDiagonal { place: &'static str, block: usize, i: usize, j: usize },
    EntryOutOfRange { place: &'static str, block: usize, i: usize, j: usize },
    EntryOffDiagonalInScalarBlock { place: &'static str, block: usize, i: usize, j: usize },
    EntryNotFinite { place: &'static str, block: usize, i: usize, j: usize },
    VectorLengthMismatch { place: String, expected: usize, actual: usize },
    RhsNotFinite { constraint: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PsdBlockOrderZero { block } => {
                write!(f, "psd block {block} has order 0")
            }
            Violation::EntryBelowDiagonal { place, block, i, j } => {
                write!(f, "{place}: entry ({i},{j}) in block {block} is below the diagonal")
            }
            Violation::EntryOutOfRange { place, block, i, j } => {
                write!(f, "{place}: entry ({i},{j}) exceeds the order of block {block}")
            }
            Violation::EntryOffDiagonalInScalarBlock { place, block, i, j } => {
                write!(f, "{place}: off-diagonal entry ({i},{j}) in scalar block {block}")
            }
            Violation::EntryNotFinite { place, block, i, j } => {
                write!(f, "{place}: entry ({i},{j}) in block {block} is not finite")
            }
            Violation::VectorLengthMismatch { place, expected, actual } => {
                write!(f, "{place}: expected length {expected}, got {actual}")
            }
            Violation::RhsNotFinite { constraint } => {
                write!(f, "right-hand side of constraint {constraint} is not finite")
            }
        }
    }
}

fn check_matrix(
    m: &SymBlockMatrix,
    structure: &BlockStructure,
    place: &'static str,
    out: &mut Vec<Violation>,
) {
    for (block, i, j, v) in m.iter() {
        if i > j {
            out.push(Violation::EntryBelowDiagonal { place, block, i, j });
            continue;
        }
        if block >= structure.block_count() || j >= structure.block_order(block) {
            out.push(Violation::EntryOutOfRange { place, block, i, j });
            continue;
        }
        if structure.is_nonneg_block(block) && i != j {
            out.push(Violation::EntryOffDiagonalInScalarBlock { place, block, i, j });
        }
        if !v.is_finite() {
            out.push(Violation::EntryNotFinite { place, block, i, j });
        }
    }
}

/// Check every type invariant of a problem. Returns an empty list iff the
/// problem is well formed.
pub fn validate(problem: &SdpProblem) -> Vec<Violation> {
    let mut out = Vec::new();
    let s = &problem.structure;
    for (block, &order) in s.psd_blocks.iter().enumerate() {
        if order == 0 {
            out.push(Violation::PsdBlockOrderZero { block });
        }
    }
    check_matrix(&problem.objective, s, "objective", &mut out);
    if problem.free_objective.len() != s.free_count {
        out.push(Violation::VectorLengthMismatch {
            place: "free objective".to_string(),
            expected: s.free_count,
            actual: problem.free_objective.len(),
        });
    }
    for (idx, c) in problem.constraints.iter().enumerate() {
        check_matrix(&c.matrix, s, "constraint", &mut out);
        if c.free_coeffs.len() != s.free_count {
            out.push(Violation::VectorLengthMismatch {
                place: format!("free coefficients of constraint {idx}"),
                expected: s.free_count,
                actual: c.free_coeffs.len(),
            });
        }
        if !c.rhs.is_finite() {
            out.push(Violation::RhsNotFinite { constraint: idx });
        }
    }
    out
}

/// Approximate primal/dual pair: primal matrix part, free part, dual
/// multipliers, and an optional explicit dual slack.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub x: Option<SymBlockMatrix>,
    pub x_free: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Option<SymBlockMatrix>,
}

impl Solution {
    pub fn dual_only(y: Vec<f64>) -> Self {
        Self { x: None, x_free: Vec::new(), y, z: None }
    }
}

/// What a certificate step did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    /// Deleted a constraint whose live part is `[D 0; 0 0] • X = 0` with
    /// `σD ≻ 0`, together with the rows and columns of `D`.
    ReducePsd,
    /// Deleted a constraint whose live part is the zero matrix with rhs 0.
    DeleteZeroConstraint,
    /// Found a constraint proving infeasibility; always the final step.
    Infeasible,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StepKind::ReducePsd => "reduce",
            StepKind::DeleteZeroConstraint => "delete-zero",
            StepKind::Infeasible => "infeasible",
        };
        f.write_str(s)
    }
}

/// One recorded reduction step, replayable against the original problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionStep {
    pub kind: StepKind,
    /// Original 0-based constraint index.
    pub constraint_index: usize,
    /// +1 or −1: the optional multiplication of both sides by −1.
    pub sign: i8,
    /// Coordinates of the positive definite submatrix, in canonical order;
    /// empty for `DeleteZeroConstraint`.
    pub support: Vec<Coordinate>,
    pub b_value: f64,
}

/// Bijections between original and reduced indexing for the survivors.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexMaps {
    pub reduced_structure: BlockStructure,
    /// Surviving original coordinate → reduced coordinate.
    pub coord_to_reduced: BTreeMap<Coordinate, Coordinate>,
    /// Reduced coordinate (canonical order) → original coordinate.
    pub coord_to_original: Vec<Coordinate>,
    /// Surviving original constraint index → reduced index.
    pub constraint_to_reduced: BTreeMap<usize, usize>,
    /// Reduced constraint index → original index.
    pub constraint_to_original: Vec<usize>,
}

/// Ordered record of reduction steps with the final deletion sets and the
/// original↔reduced index maps. Replaying the steps in order against the
/// original problem reproduces the deletion sets exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub steps: Vec<ReductionStep>,
    pub original_structure: BlockStructure,
    pub original_constraint_count: usize,
    pub deleted_coordinates: BTreeSet<Coordinate>,
    pub deleted_constraints: BTreeSet<usize>,
    pub index_maps: IndexMaps,
}

/// Result of a sieve run.
#[derive(Clone, Debug, PartialEq)]
pub enum SieveVerdict {
    /// Fully compacted reduced problem plus the certificate that produced it.
    Reduced { problem: SdpProblem, certificate: Certificate },
    /// The problem is infeasible; the certificate's final step proves it.
    Infeasible { certificate: Certificate },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SieveOutcome {
    pub verdict: SieveVerdict,
    /// Equals the number of certificate steps.
    pub iteration_count: usize,
}

impl SieveOutcome {
    pub fn certificate(&self) -> &Certificate {
        match &self.verdict {
            SieveVerdict::Reduced { certificate, .. } => certificate,
            SieveVerdict::Infeasible { certificate } => certificate,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self.verdict, SieveVerdict::Infeasible { .. })
    }

    pub fn reduced_problem(&self) -> Option<&SdpProblem> {
        match &self.verdict {
            SieveVerdict::Reduced { problem, .. } => Some(problem),
            SieveVerdict::Infeasible { .. } => None,
        }
    }
}
