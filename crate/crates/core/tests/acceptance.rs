//! Acceptance suite: one test per release criterion, each printing a PASS
//! line (visible with `cargo test --test acceptance -- --nocapture`).

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdpsieve::gen;
use sdpsieve::io;
use sdpsieve::linalg::{min_eigenvalue, pd_check, DenseSym};
use sdpsieve::metrics::{dimacs_errors, help_code, AfterReport, HelpCode, SolveReport};
use sdpsieve::model::{Coordinate, Solution, StepKind, SymBlockMatrix};
use sdpsieve::recovery::{basic_recovery, pad_primal, RecoveryOptions, RecoveryResult};
use sdpsieve::sieve::{sieve, sieve_with_stats, Classification, SieveOptions, SieveState};
use std::collections::BTreeSet;
use std::time::Instant;

fn coord(block: usize, row: usize) -> Coordinate {
    Coordinate { block, row }
}

#[test]
fn criterion_01_motivating_example_infeasible_in_two_steps() {
    let p = gen::example1();
    let options = SieveOptions::default();
    sieve(&p, &options).unwrap(); // warm up before timing
    let start = Instant::now();
    let outcome = sieve(&p, &options).unwrap();
    let elapsed = start.elapsed();

    assert!(outcome.is_infeasible());
    assert_eq!(outcome.iteration_count, 2);
    let steps = &outcome.certificate().steps;
    assert_eq!(steps[0].kind, StepKind::ReducePsd);
    assert_eq!(steps[0].constraint_index, 0);
    assert_eq!(steps[0].support, vec![coord(0, 0)]);
    assert_eq!(steps[1].kind, StepKind::Infeasible);
    assert_eq!(steps[1].constraint_index, 1);
    assert_eq!(steps[1].b_value, -1.0);
    assert!(elapsed.as_micros() < 1000, "took {elapsed:?}, budget 1 ms");
    println!("ACCEPTANCE 01 PASS: infeasibility certified in 2 steps ({elapsed:?})");
}

#[test]
fn criterion_02_gap_example_reduction_padding_and_recovery() {
    let p = gen::posgap();
    let outcome = sieve(&p, &SieveOptions::default()).unwrap();
    let reduced = outcome.reduced_problem().unwrap();

    // Reduced shape: one order-2 block, a single constraint [[1,0],[0,0]] = 1,
    // objective diag(1, 0).
    assert_eq!(reduced.structure.psd_blocks, vec![2]);
    assert_eq!(reduced.structure.nonneg_count, 0);
    assert_eq!(reduced.num_constraints(), 1);
    assert_eq!(reduced.constraints[0].matrix.iter().collect::<Vec<_>>(), vec![(0, 0, 0, 1.0)]);
    assert_eq!(reduced.constraints[0].rhs, 1.0);
    assert_eq!(reduced.objective.iter().collect::<Vec<_>>(), vec![(0, 0, 0, 1.0)]);

    // The reduced optimum is forced to [[1,0],[0,0]]; padding restores the
    // original optimum, whose middle diagonal entry is 1.
    let mut x_reduced = SymBlockMatrix::new();
    x_reduced.set(0, 0, 0, 1.0);
    let x_full = pad_primal(&x_reduced, outcome.certificate()).unwrap();
    assert_eq!(x_full.iter().collect::<Vec<_>>(), vec![(0, 1, 1, 1.0)]);
    assert_eq!(p.eval_constraint(0, &x_full, &[]), 0.0);
    assert_eq!(p.eval_constraint(1, &x_full, &[]), 1.0);
    assert_eq!(p.eval_objective(&x_full, &[]), 1.0);

    // The dual linesearch must fail at the deleted constraint.
    let result =
        basic_recovery(&p, outcome.certificate(), &[1.0], &RecoveryOptions::default()).unwrap();
    assert_eq!(result, RecoveryResult::Failed { step_index: 0 });
    assert_eq!(outcome.certificate().steps[0].constraint_index, 0);
    println!("ACCEPTANCE 02 PASS: gap example reduces to the known shape; padding and recovery behave");
}

#[test]
fn criterion_03_obfuscated_instances_are_never_reduced() {
    let options = SieveOptions::default();
    let base = gen::example1();

    let transformed = gen::similarity_transform(&base, &gen::reference_transform()).unwrap();
    assert_eq!(sieve(&transformed, &options).unwrap().iteration_count, 0);

    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (t, _) = gen::random_transform(&mut rng, 3);
        let obfuscated = gen::similarity_transform(&base, &t).unwrap();
        let outcome = sieve(&obfuscated, &options).unwrap();
        assert_eq!(outcome.iteration_count, 0, "transform seed {seed}");

        let (messy, _) = gen::messy(&base, seed).unwrap();
        let outcome = sieve(&messy, &options).unwrap();
        assert_eq!(outcome.iteration_count, 0, "messy seed {seed}");
    }
    println!("ACCEPTANCE 03 PASS: 0 reductions on all 100 transformed and 100 messy instances");
}

#[test]
fn criterion_04_planted_instances_match_their_oracle() {
    let options = SieveOptions::default();
    let start = Instant::now();
    let mut chained_sizes = BTreeSet::new();
    let mut chained_plants = 0usize;
    for seed in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xacce_0004);
        let k = rng.random_range(0..=8usize);
        let n = rng.random_range((k + 2).max(10)..=50);
        let m = rng.random_range(k.max(5)..=80);
        let (p, record) = gen::planted(seed, n, m, k).unwrap();

        let outcome = sieve(&p, &options).unwrap();
        assert!(!outcome.is_infeasible(), "seed {seed}");
        let cert = outcome.certificate();
        assert_eq!(cert.deleted_constraints, record.planted_indices(), "seed {seed}");
        assert_eq!(cert.deleted_coordinates, record.planted_coordinates(), "seed {seed}");
        for step in &cert.steps {
            assert_eq!(step.kind, StepKind::ReducePsd, "fillers must survive, seed {seed}");
        }

        // Independent eigenvalue scan of every constraint against the record.
        let planted_idx = record.planted_indices();
        for (idx, c) in p.constraints.iter().enumerate() {
            if let Some(plant) = record.planted.iter().find(|pl| pl.index == idx) {
                let d = support_dense(&c.matrix, &plant.support);
                let signed = if plant.sign > 0 { d } else { d.negated() };
                assert!(common::min_eig_oracle(&signed) > 0.0, "plant pd, seed {seed}");
                chained_sizes.insert(plant.support.len());
                // A matrix entry outside the recorded support marks a chain
                // hook: the plant only becomes reducing after its
                // predecessor's rows are gone.
                let support_set: BTreeSet<Coordinate> = plant.support.iter().copied().collect();
                if full_support(&c.matrix).iter().any(|c| !support_set.contains(c)) {
                    chained_plants += 1;
                }
            } else if !planted_idx.contains(&idx) {
                let support = full_support(&c.matrix);
                let d = support_dense(&c.matrix, &support);
                let eigs = common::jacobi_eigenvalues_oracle(&d);
                let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(min < 0.0 && max > 0.0, "filler indefinite, seed {seed}");
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget 60 s");
    assert!(chained_sizes.contains(&2) || chained_sizes.contains(&3), "multi-coordinate supports occurred");
    assert!(chained_plants > 0, "chained plants occurred");
    println!(
        "ACCEPTANCE 04 PASS: 500/500 planted certificates equal the oracle \
         ({chained_plants} chained plants; {elapsed:?})"
    );
}

fn support_dense(matrix: &SymBlockMatrix, support: &[Coordinate]) -> DenseSym {
    DenseSym::from_fn(support.len(), |p, q| {
        if support[p].block == support[q].block {
            matrix.get(support[p].block, support[p].row, support[q].row)
        } else {
            0.0
        }
    })
}

fn full_support(matrix: &SymBlockMatrix) -> Vec<Coordinate> {
    let mut coords = BTreeSet::new();
    for (block, i, j, _) in matrix.iter() {
        coords.insert(coord(block, i));
        coords.insert(coord(block, j));
    }
    coords.into_iter().collect()
}

#[test]
fn criterion_05_safe_mode_bands() {
    // With ‖b‖∞ ≤ 1 the thresholds are √(2^-52) ≈ 1.4901e-8 and
    // 2^-52 ≈ 2.2204e-16.
    let options = SieveOptions::default();
    let mut p = gen::example1();
    p.constraints[1].rhs = 1.0;
    for (rhs, expected) in [
        (-1e-10, Classification::Ambiguous),
        (-1e-6, Classification::Infeasible { sign: 1 }),
        (-1e-17, Classification::Reduce { sign: 1, support: vec![coord(0, 0)] }),
    ] {
        p.constraints[0].rhs = rhs;
        let state = SieveState::new(&p);
        assert_eq!(state.classify_constraint(&p, 0, &options), expected, "b' = {rhs}");
    }
    println!("ACCEPTANCE 05 PASS: safe-mode band classifications are exact");
}

#[test]
fn criterion_06_dimacs_suite() {
    for seed in 0..100u64 {
        let (p, solution) = common::diag_toy(seed);
        let e = dimacs_errors(&p, &solution).unwrap();
        for (idx, v) in e.as_array().iter().enumerate() {
            assert!(v.abs() <= 1e-12, "toy {seed}: err{} = {v}", idx + 1);
        }
    }

    let p = gen::posgap();
    let mut x = SymBlockMatrix::new();
    x.set(0, 1, 1, 1.0);
    let pair = Solution { x: Some(x), x_free: vec![], y: vec![0.0, 0.0], z: None };
    let e = dimacs_errors(&p, &pair).unwrap();
    assert!((e.err5.abs() - 0.5).abs() <= 1e-12);

    for eps in [1e-2, 1e-3, 1e-4] {
        let x_eps = gen::posgap_eps(eps).unwrap();
        assert!((p.eval_objective(&x_eps, &[]) - 2.0 * eps).abs() <= 1e-12);
        let sol = Solution { x: Some(x_eps), x_free: vec![], y: vec![0.0, 0.0], z: None };
        let e = dimacs_errors(&p, &sol).unwrap();
        assert!((e.err1 - eps / 2.0).abs() <= 1e-12, "eps {eps}: err1 = {}", e.err1);
    }
    println!("ACCEPTANCE 06 PASS: DIMACS errors exact on toys, the gap pair, and the fake-solution family");
}

#[test]
fn criterion_07_help_code_fidelity() {
    let report = |infeasible, obj: f64, dimacs: f64| SolveReport {
        infeasible,
        primal_obj: obj,
        dual_obj: obj,
        dimacs_max_abs: dimacs,
        out_of_memory: false,
    };

    let before = report(false, 3.79e6, 2.22e1);
    assert_eq!(
        help_code(&before, &AfterReport::SieveInfeasible),
        BTreeSet::from([HelpCode::PlusOne])
    );
    let before = report(false, 6.16e-2, 1.60e-6);
    let after = AfterReport::Solved(report(false, 6.16e-2, 4.23e-8));
    assert_eq!(help_code(&before, &after), BTreeSet::from([HelpCode::PlusTwo]));
    let before = report(false, -1.01e4, 3.36e-7);
    let after = AfterReport::Solved(report(false, -1.18e4, 9.28e-2));
    assert_eq!(help_code(&before, &after), BTreeSet::from([HelpCode::MinusTwo]));

    let mut rng = ChaCha8Rng::seed_from_u64(7_007);
    for _ in 0..5000 {
        let before = report(
            rng.random_bool(0.4),
            rng.random_range(-5.0..5.0),
            10f64.powf(rng.random_range(-9.0..1.0)),
        );
        let after = if rng.random_bool(0.15) {
            AfterReport::SieveInfeasible
        } else {
            AfterReport::Solved(report(
                rng.random_bool(0.4),
                rng.random_range(-5.0..5.0),
                10f64.powf(rng.random_range(-9.0..1.0)),
            ))
        };
        let codes = help_code(&before, &after);
        assert!(!(codes.contains(&HelpCode::PlusOne) && codes.contains(&HelpCode::MinusOne)));
        assert!(!(codes.contains(&HelpCode::PlusTwo) && codes.contains(&HelpCode::MinusTwo)));
    }
    println!("ACCEPTANCE 07 PASS: published help-code rows reproduced; ±1 and ±2 mutually exclusive");
}

#[test]
fn criterion_08_feasibility_and_objective_preservation() {
    let options = SieveOptions::default();
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xacce_0008);
        let k = rng.random_range(1..=6usize);
        let n = rng.random_range((k + 2).max(8)..=40);
        let m = rng.random_range(k.max(4)..=50);
        let (p, record) = gen::planted(seed.wrapping_mul(31), n, m, k).unwrap();
        let outcome = sieve(&p, &options).unwrap();
        let reduced = outcome.reduced_problem().unwrap();
        let maps = &outcome.certificate().index_maps;

        // Restrict the witness through the index maps.
        let mut x_red = SymBlockMatrix::new();
        for (block, i, j, v) in record.witness.iter() {
            let ri = maps.coord_to_reduced[&coord(block, i)];
            let rj = maps.coord_to_reduced[&coord(block, j)];
            x_red.set(ri.block, ri.row, rj.row, v);
        }
        for (idx, c) in reduced.constraints.iter().enumerate() {
            let residual = (c.matrix.inner(&x_red) - c.rhs).abs();
            assert!(residual <= 1e-12, "seed {seed} constraint {idx}: residual {residual}");
        }
        let objective_gap =
            (p.objective.inner(&record.witness) - reduced.objective.inner(&x_red)).abs();
        assert!(objective_gap <= 1e-12, "seed {seed}: objective moved by {objective_gap}");
    }
    println!("ACCEPTANCE 08 PASS: 200/200 witnesses stay feasible with unchanged objective");
}

#[test]
fn criterion_09_linalg_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0009);
    let mut agreement_checked = 0;
    let mut produced = 0;
    while agreement_checked < 1000 {
        produced += 1;
        assert!(produced < 20_000, "sample exhaustion");
        let order = rng.random_range(1..=12);
        let m = common::random_dense_sym(&mut rng, order);
        let oracle_min = common::min_eig_oracle(&m);
        let fast_min = min_eigenvalue(&m).unwrap();
        assert!((fast_min - oracle_min).abs() < 1e-8, "min eigenvalue off: {fast_min} vs {oracle_min}");
        if oracle_min.abs() < 1e-12 {
            continue; // borderline cases are excluded from the sign agreement
        }
        agreement_checked += 1;
        assert_eq!(
            pd_check(&m, 0.0).is_positive_definite(),
            oracle_min > 0.0,
            "disagreement at order {order}"
        );
    }
    println!("ACCEPTANCE 09 PASS: 1000/1000 sign agreements; eigenvalues within 1e-8 of the oracle");
}

#[test]
fn criterion_10_io_round_trips_and_golden_bytes() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0010);
    for case in 0..200 {
        let p = common::random_problem(&mut rng);
        let text = io::write_sdpa(&p).unwrap();
        let back = io::read_sdpa(&text).unwrap();
        assert_eq!(back, p, "problem case {case}");
        assert_eq!(io::write_sdpa(&back).unwrap(), text, "problem bytes {case}");

        let sol = common::random_solution(&mut rng, &p);
        let sol_text = io::write_solution(&sol);
        let sol_back = io::read_solution(&sol_text, &p).unwrap();
        assert_eq!(sol_back, sol, "solution case {case}");

        let (planted, _) = gen::planted(case, 12, 9, (case % 4) as usize).unwrap();
        let outcome = sieve(&planted, &SieveOptions::default()).unwrap();
        let cert = outcome.certificate();
        let cert_back = io::read_certificate(&io::write_certificate(cert)).unwrap();
        assert_eq!(&cert_back, cert, "certificate case {case}");
    }

    let example1_bytes = "\
2
1
3
0.0000000000000000e0 -1.0000000000000000e0
1 1 1 1 1.0000000000000000e0
2 1 1 3 1.0000000000000000e0
2 1 2 2 1.0000000000000000e0
";
    assert_eq!(io::write_sdpa(&gen::example1()).unwrap(), example1_bytes);
    let posgap_bytes = "\
2
1
3
0.0000000000000000e0 1.0000000000000000e0
0 1 1 1 1.0000000000000000e0
0 1 2 2 1.0000000000000000e0
1 1 1 1 1.0000000000000000e0
2 1 1 3 1.0000000000000000e0
2 1 2 2 1.0000000000000000e0
";
    assert_eq!(io::write_sdpa(&gen::posgap()).unwrap(), posgap_bytes);
    println!("ACCEPTANCE 10 PASS: 200 fuzzed round-trips and golden encodings are byte-exact");
}

#[test]
fn criterion_11_scale_smoke_test() {
    let (p, record) = gen::planted(11, 300, 1000, 40).unwrap();
    assert_eq!(p.structure.psd_blocks, vec![50; 6]);
    assert_eq!(p.num_constraints(), 1000);

    let start = Instant::now();
    let (outcome, stats) = sieve_with_stats(&p, &SieveOptions::default()).unwrap();
    let elapsed = start.elapsed();

    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    assert!(outcome.iteration_count <= 1000);
    assert_eq!(outcome.iteration_count, 40);
    assert_eq!(outcome.certificate().deleted_constraints, record.planted_indices());
    // Every pass but the last applies one deletion, so the pass count is
    // bounded by min(m, n) + 1 when each step removes a coordinate.
    assert!(stats.passes <= 301, "passes = {}", stats.passes);
    println!(
        "ACCEPTANCE 11 PASS: n=300, m=1000 sieved in {elapsed:?} ({} passes, {} factorizations)",
        stats.passes, stats.pd_checks
    );
}
