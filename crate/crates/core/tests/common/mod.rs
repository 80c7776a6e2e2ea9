//! Shared test oracles, kept independent of the library kernels they check.
#![allow(dead_code)] // not every test target uses every helper

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdpsieve::linalg::DenseSym;
use sdpsieve::model::{BlockStructure, Constraint, SdpProblem, Solution, SymBlockMatrix};

/// All eigenvalues by plain Jacobi sweeps driven to an off-diagonal sum of
/// `1e-14·(1 + ‖M‖_F)`; written from the rotation formulas directly rather
/// than calling into the library.
pub fn jacobi_eigenvalues_oracle(m: &DenseSym) -> Vec<f64> {
    let n = m.order();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect();
    let frob: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let stop = 1e-14 * (1.0 + frob);
    for _sweep in 0..200 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q].abs();
            }
        }
        if off <= stop {
            return (0..n).map(|i| a[i][i]).collect();
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let (mut rp, mut rq) = (vec![0.0; n], vec![0.0; n]);
                for k in 0..n {
                    rp[k] = c * a[p][k] - s * a[q][k];
                    rq[k] = s * a[p][k] + c * a[q][k];
                }
                for k in 0..n {
                    a[p][k] = rp[k];
                    a[q][k] = rq[k];
                }
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
            }
        }
    }
    panic!("oracle did not converge");
}

pub fn min_eig_oracle(m: &DenseSym) -> f64 {
    jacobi_eigenvalues_oracle(m).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn random_dense_sym(rng: &mut ChaCha8Rng, order: usize) -> DenseSym {
    let raw: Vec<Vec<f64>> =
        (0..order).map(|_| (0..order).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    DenseSym::from_fn(order, |i, j| raw[i][j])
}

/// Random block-structured problem for format fuzzing: mixed psd/nonneg
/// blocks, off-diagonal entries, no free variables.
pub fn random_problem(rng: &mut ChaCha8Rng) -> SdpProblem {
    let psd: Vec<usize> = (0..rng.random_range(1..4)).map(|_| rng.random_range(1..6)).collect();
    let nonneg = rng.random_range(0..4);
    let structure = BlockStructure::new(psd, nonneg, 0);
    let m = rng.random_range(0..6);
    let objective = random_matrix(rng, &structure);
    let constraints = (0..m)
        .map(|_| Constraint {
            matrix: random_matrix(rng, &structure),
            free_coeffs: vec![],
            rhs: rng.random_range(-3.0..3.0),
        })
        .collect();
    SdpProblem { structure, objective, free_objective: vec![], constraints }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, structure: &BlockStructure) -> SymBlockMatrix {
    let mut mat = SymBlockMatrix::new();
    for block in 0..structure.block_count() {
        let order = structure.block_order(block);
        for i in 0..order {
            for j in i..order {
                if rng.random_bool(0.4) {
                    mat.set(block, i, j, rng.random_range(-5.0..5.0));
                }
            }
        }
    }
    mat
}

pub fn random_solution(rng: &mut ChaCha8Rng, problem: &SdpProblem) -> Solution {
    let structure = &problem.structure;
    Solution {
        x: rng.random_bool(0.8).then(|| random_matrix(rng, structure)),
        x_free: vec![],
        y: (0..problem.num_constraints()).map(|_| rng.random_range(-4.0..4.0)).collect(),
        z: rng.random_bool(0.4).then(|| random_matrix(rng, structure)),
    }
}

/// A diagonal toy problem with an exactly complementary primal/dual pair:
/// the optimal objective values agree and every DIMACS error is tiny.
pub fn diag_toy(seed: u64) -> (SdpProblem, Solution) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x746f79);
    let order = rng.random_range(2..5);
    let nonneg = rng.random_range(0..3);
    let structure = BlockStructure::new(vec![order], nonneg, 0);
    let coords = structure.coordinates();
    let m = rng.random_range(1..4);

    // Interior primal point on every coordinate except a few that the dual
    // slack then covers.
    let mut x = SymBlockMatrix::new();
    let mut interior = vec![true; coords.len()];
    for (idx, c) in coords.iter().enumerate() {
        if rng.random_bool(0.2) {
            interior[idx] = false;
        } else {
            x.set(c.block, c.row, c.row, rng.random_range(0.2..2.0));
        }
    }

    let constraints: Vec<Constraint> = (0..m)
        .map(|_| {
            let mut a = SymBlockMatrix::new();
            for c in &coords {
                if rng.random_bool(0.7) {
                    a.set(c.block, c.row, c.row, rng.random_range(-1.0..1.0));
                }
            }
            let rhs = a.inner(&x);
            Constraint { matrix: a, free_coeffs: vec![], rhs }
        })
        .collect();

    let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut slack = SymBlockMatrix::new();
    for (idx, c) in coords.iter().enumerate() {
        if !interior[idx] {
            slack.set(c.block, c.row, c.row, rng.random_range(0.1..1.0));
        }
    }
    let objective = SymBlockMatrix::linear_combination(
        &slack,
        y.iter().zip(&constraints).map(|(&yi, c)| (yi, &c.matrix)),
    );

    let problem = SdpProblem { structure, objective, free_objective: vec![], constraints };
    let solution = Solution { x: Some(x), x_free: vec![], y, z: None };
    (problem, solution)
}
