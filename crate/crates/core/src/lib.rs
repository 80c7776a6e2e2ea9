//! Facial-reduction presolver for semidefinite programs in primal standard form
//!
//! ```text
//! inf  C • X
//! s.t. A_i • X = b_i   (i = 1, ..., m)
//!      X ⪰ 0
//! ```
//!
//! The presolver scans the constraints for the *reducing* pattern: after a
//! symmetric permutation and an optional sign flip, the constraint reads
//! `[D 0; 0 0] • X = b` with `D ≻ 0` and `b ≤ 0`. Such a constraint forces the
//! rows and columns of `D` to vanish in every feasible `X` (when `b = 0`), or
//! proves the problem infeasible outright (when `b < 0`). Repeating this test
//! shrinks the variable matrix, deletes constraints, and frequently certifies
//! infeasibility — all with a Cholesky factorization as the only kernel.
//!
//! The crate is organized around that loop:
//!
//! * [`model`] — block-structured problem, solution, and certificate types
//! * [`linalg`] — dense symmetric kernels (Cholesky test, smallest eigenvalue)
//! * [`sieve`] — the reduction loop with lazy-deletion bookkeeping
//! * [`recovery`] — primal zero-padding and the dual multiplier linesearch
//! * [`metrics`] — DIMACS error measures, help codes, reduction statistics
//! * [`gen`] — instance constructors and obfuscators for testing
//! * [`io`] — SDPA sparse files, solution files, certificate files
//! * [`cli`] — the `sdpsieve` command-line front end

pub mod cli;
pub mod gen;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod recovery;
pub mod sieve;

pub use model::{
    BlockStructure, Certificate, Coordinate, ReductionStep, SdpProblem, SieveOutcome,
    SieveVerdict, Solution, StepKind, SymBlockMatrix,
};
pub use sieve::{sieve, SieveOptions};
