//! Bit-exact file formats.
//!
//! * Problems: sparse SDPA (`.dat-s`). The file's constraint matrices become
//!   the `A_i`, its objective vector becomes `b`, and its matno-0 matrix
//!   becomes `C` — the file is read as the data of the primal problem.
//! * Solutions: a `y` line, then optional `X` and `Z` entry sections.
//! * Certificates: versioned key-value text replayable into the full
//!   [`Certificate`].
//! * Solve reports: flat key-value text for the help-code comparison.
//!
//! Readers reject malformed input instead of repairing it; writers emit one
//! canonical byte representation (entries sorted, 17 significant digits).

use crate::metrics::{AfterReport, SolveReport};
use crate::model::{
    BlockStructure, Certificate, Constraint, Coordinate, ReductionStep, SdpProblem, Solution,
    StepKind, SymBlockMatrix,
};
use crate::sieve::{index_maps_for, replay_steps};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown certificate version: expected `{CERTIFICATE_HEADER}`, got `{found}`")]
    UnknownVersion { found: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { line, message: message.into() }
}

/// 17 significant digits: enough for an exact double round-trip.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, IoError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("expected a number, got `{tok}`")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize, IoError> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("expected {what}, got `{tok}`")))
}

/// Token stream with line numbers. Commas, braces, and parentheses count as
/// whitespace, as the SDPA header convention allows.
struct Tokens {
    toks: Vec<(String, usize)>,
    pos: usize,
}

impl Tokens {
    fn new(text: &str, skip_top_comments: bool) -> Self {
        let mut toks = Vec::new();
        let mut in_comments = skip_top_comments;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if in_comments {
                let t = raw.trim_start();
                if t.starts_with('*') || t.starts_with('"') {
                    continue;
                }
                if !t.is_empty() {
                    in_comments = false;
                }
            }
            let cleaned: String = raw
                .chars()
                .map(|c| if matches!(c, ',' | '(' | ')' | '{' | '}') { ' ' } else { c })
                .collect();
            for tok in cleaned.split_whitespace() {
                toks.push((tok.to_string(), line));
            }
        }
        Self { toks, pos: 0 }
    }

    fn next(&mut self, what: &str) -> Result<(&str, usize), IoError> {
        let last_line = self.toks.last().map_or(1, |(_, l)| *l);
        match self.toks.get(self.pos) {
            Some((tok, line)) => {
                self.pos += 1;
                Ok((tok.as_str(), *line))
            }
            None => Err(parse_err(last_line, format!("unexpected end of input, expected {what}"))),
        }
    }

    fn finished(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

/// How file blocks map onto model blocks: psd blocks keep their relative
/// order; each size-k diagonal block contributes k nonnegative scalars.
enum FileBlock {
    Psd { model_block: usize, order: usize },
    Diag { first_scalar_block: usize, size: usize },
}

/// Parse a sparse SDPA problem.
pub fn read_sdpa(text: &str) -> Result<SdpProblem, IoError> {
    let mut toks = Tokens::new(text, true);
    let (tok, line) = toks.next("the number of constraints")?;
    let m = parse_usize(tok, line, "the number of constraints")?;
    let (tok, line) = toks.next("the number of blocks")?;
    let nblocks = parse_usize(tok, line, "the number of blocks")?;

    let mut sizes = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let (tok, line) = toks.next("a block size")?;
        let size: i64 = tok
            .parse()
            .map_err(|_| parse_err(line, format!("expected a block size, got `{tok}`")))?;
        if size == 0 {
            return Err(parse_err(line, "block size 0"));
        }
        sizes.push(size);
    }

    let mut psd_blocks = Vec::new();
    let mut nonneg_count = 0usize;
    let mut file_blocks = Vec::with_capacity(nblocks);
    for &size in &sizes {
        if size > 0 {
            file_blocks.push(FileBlock::Psd { model_block: psd_blocks.len(), order: size as usize });
            psd_blocks.push(size as usize);
        } else {
            file_blocks.push(FileBlock::Diag { first_scalar_block: nonneg_count, size: (-size) as usize });
            nonneg_count += (-size) as usize;
        }
    }
    let psd_count = psd_blocks.len();
    for fb in &mut file_blocks {
        if let FileBlock::Diag { first_scalar_block, .. } = fb {
            *first_scalar_block += psd_count;
        }
    }
    let structure = BlockStructure::new(psd_blocks, nonneg_count, 0);

    let mut rhs = Vec::with_capacity(m);
    for _ in 0..m {
        let (tok, line) = toks.next("a right-hand side value")?;
        rhs.push(parse_f64(tok, line)?);
    }

    let mut objective = SymBlockMatrix::new();
    let mut matrices: Vec<SymBlockMatrix> = vec![SymBlockMatrix::new(); m];
    let mut seen = BTreeSet::new();
    while !toks.finished() {
        let (tok, line) = toks.next("a matrix number")?;
        let matno = parse_usize(tok, line, "a matrix number")?;
        if matno > m {
            return Err(parse_err(line, format!("matrix number {matno} exceeds {m}")));
        }
        let (tok, line) = toks.next("a block number")?;
        let blkno = parse_usize(tok, line, "a block number")?;
        if blkno == 0 || blkno > nblocks {
            return Err(parse_err(line, format!("block number {blkno} out of range 1..={nblocks}")));
        }
        let (tok, line) = toks.next("a row index")?;
        let i = parse_usize(tok, line, "a row index")?;
        let (tok, line) = toks.next("a column index")?;
        let j = parse_usize(tok, line, "a column index")?;
        let (tok, line) = toks.next("an entry value")?;
        let value = parse_f64(tok, line)?;

        if i == 0 || j == 0 {
            return Err(parse_err(line, "entry indices are 1-based"));
        }
        if i > j {
            return Err(parse_err(line, format!("entry ({i},{j}) is below the diagonal")));
        }
        if !seen.insert((matno, blkno, i, j)) {
            return Err(parse_err(line, format!("duplicate entry ({matno},{blkno},{i},{j})")));
        }
        let (model_block, bi, bj) = match &file_blocks[blkno - 1] {
            FileBlock::Psd { model_block, order } => {
                if j > *order {
                    return Err(parse_err(line, format!("entry ({i},{j}) exceeds block order {order}")));
                }
                (*model_block, i - 1, j - 1)
            }
            FileBlock::Diag { first_scalar_block, size } => {
                if i != j {
                    return Err(parse_err(line, format!("off-diagonal entry ({i},{j}) in a diagonal block")));
                }
                if i > *size {
                    return Err(parse_err(line, format!("entry ({i},{i}) exceeds diagonal block size {size}")));
                }
                (first_scalar_block + i - 1, 0, 0)
            }
        };
        let target = if matno == 0 { &mut objective } else { &mut matrices[matno - 1] };
        target
            .insert_upper(model_block, bi, bj, value)
            .map_err(|e| parse_err(line, e))?;
    }

    let constraints = matrices
        .into_iter()
        .zip(rhs)
        .map(|(matrix, rhs)| Constraint { matrix, free_coeffs: vec![], rhs })
        .collect();
    Ok(SdpProblem { structure, objective, free_objective: vec![], constraints })
}

/// Canonical sparse SDPA text: no comments, entries sorted by
/// `(matno, blkno, i, j)`, 17 significant digits, newline-terminated.
/// Nonnegative scalars are written as one diagonal block after the psd
/// blocks. Free variables do not fit the format.
pub fn write_sdpa(problem: &SdpProblem) -> Result<String, IoError> {
    let s = &problem.structure;
    if s.free_count > 0 {
        return Err(IoError::Unsupported(
            "the SDPA sparse format cannot represent free variables".into(),
        ));
    }
    let psd_count = s.psd_blocks.len();
    let mut out = String::new();
    let m = problem.num_constraints();
    let nblocks = psd_count + usize::from(s.nonneg_count > 0);
    let _ = writeln!(out, "{m}");
    let _ = writeln!(out, "{nblocks}");
    let mut sizes: Vec<String> = s.psd_blocks.iter().map(|o| o.to_string()).collect();
    if s.nonneg_count > 0 {
        sizes.push(format!("-{}", s.nonneg_count));
    }
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = problem.constraints.iter().map(|c| fmt_f64(c.rhs)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));

    let emit = |matno: usize, matrix: &SymBlockMatrix, out: &mut String| {
        for (block, i, j, v) in matrix.iter() {
            let (blkno, fi, fj) = if block < psd_count {
                (block + 1, i + 1, j + 1)
            } else {
                let scalar = block - psd_count;
                (psd_count + 1, scalar + 1, scalar + 1)
            };
            let _ = writeln!(out, "{matno} {blkno} {fi} {fj} {}", fmt_f64(v));
        }
    };
    emit(0, &problem.objective, &mut out);
    for (idx, c) in problem.constraints.iter().enumerate() {
        emit(idx + 1, &c.matrix, &mut out);
    }
    Ok(out)
}

/// Parse a solution file against its problem: a `y` line with `m` values, an
/// optional `xfree` line, then optional `X` and `Z` sections of
/// `blkno i j value` entries (1-based model blocks, upper triangle).
pub fn read_solution(text: &str, problem: &SdpProblem) -> Result<Solution, IoError> {
    let s = &problem.structure;
    let m = problem.num_constraints();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(idx, l)| (idx + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (line_no, first) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty solution file"))?;
    let mut toks = first.split_whitespace();
    if toks.next() != Some("y") {
        return Err(parse_err(line_no, "solution must start with a `y` line"));
    }
    let y: Vec<f64> = toks
        .map(|t| parse_f64(t, line_no))
        .collect::<Result<_, _>>()?;
    if y.len() != m {
        return Err(parse_err(line_no, format!("expected {m} multipliers, got {}", y.len())));
    }

    let mut x_free = vec![0.0; s.free_count];
    let mut x: Option<SymBlockMatrix> = None;
    let mut z: Option<SymBlockMatrix> = None;
    let mut current: Option<char> = None;

    for (line_no, raw) in lines {
        let mut toks = raw.split_whitespace().peekable();
        let Some(&head) = toks.peek() else { continue };
        match head {
            "X" | "Z" => {
                toks.next();
                if toks.next().is_some() {
                    return Err(parse_err(line_no, "section markers take no arguments"));
                }
                let target = if head == "X" { &mut x } else { &mut z };
                if target.is_some() {
                    return Err(parse_err(line_no, format!("duplicate `{head}` section")));
                }
                *target = Some(SymBlockMatrix::new());
                current = Some(head.chars().next().unwrap());
            }
            "xfree" => {
                toks.next();
                let values: Vec<f64> = toks
                    .map(|t| parse_f64(t, line_no))
                    .collect::<Result<_, _>>()?;
                if values.len() != s.free_count {
                    return Err(parse_err(
                        line_no,
                        format!("expected {} free values, got {}", s.free_count, values.len()),
                    ));
                }
                x_free = values;
            }
            _ => {
                let target = match current {
                    Some('X') => x.as_mut().unwrap(),
                    Some('Z') => z.as_mut().unwrap(),
                    _ => return Err(parse_err(line_no, "entry outside an X or Z section")),
                };
                let fields: Vec<&str> = raw.split_whitespace().collect();
                if fields.len() != 4 {
                    return Err(parse_err(line_no, "entries are `blkno i j value`"));
                }
                let blkno = parse_usize(fields[0], line_no, "a block number")?;
                let i = parse_usize(fields[1], line_no, "a row index")?;
                let j = parse_usize(fields[2], line_no, "a column index")?;
                let v = parse_f64(fields[3], line_no)?;
                if blkno == 0 || blkno > s.block_count() {
                    return Err(parse_err(line_no, format!("block {blkno} out of range")));
                }
                if i == 0 || j == 0 {
                    return Err(parse_err(line_no, "entry indices are 1-based"));
                }
                if i > j {
                    return Err(parse_err(line_no, format!("entry ({i},{j}) is below the diagonal")));
                }
                if j > s.block_order(blkno - 1) {
                    return Err(parse_err(line_no, format!("entry ({i},{j}) exceeds the block order")));
                }
                target
                    .insert_upper(blkno - 1, i - 1, j - 1, v)
                    .map_err(|e| parse_err(line_no, e))?;
            }
        }
    }
    Ok(Solution { x, x_free, y, z })
}

/// Canonical solution text; the inverse of [`read_solution`].
pub fn write_solution(solution: &Solution) -> String {
    let mut out = String::new();
    let y: Vec<String> = solution.y.iter().map(|&v| fmt_f64(v)).collect();
    if y.is_empty() {
        let _ = writeln!(out, "y");
    } else {
        let _ = writeln!(out, "y {}", y.join(" "));
    }
    if !solution.x_free.is_empty() {
        let xf: Vec<String> = solution.x_free.iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(out, "xfree {}", xf.join(" "));
    }
    for (marker, matrix) in [("X", &solution.x), ("Z", &solution.z)] {
        if let Some(matrix) = matrix {
            let _ = writeln!(out, "{marker}");
            for (block, i, j, v) in matrix.iter() {
                let _ = writeln!(out, "{} {} {} {}", block + 1, i + 1, j + 1, fmt_f64(v));
            }
        }
    }
    out
}

const CERTIFICATE_HEADER: &str = "sdpsieve certificate v1";

/// Serialize a certificate: header, original dimensions, and the step list.
/// The index maps and deletion sets are reproduced by replay on read.
pub fn write_certificate(certificate: &Certificate) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CERTIFICATE_HEADER}");
    let psd: Vec<String> =
        certificate.original_structure.psd_blocks.iter().map(|o| o.to_string()).collect();
    let _ = writeln!(out, "psd {}", psd.join(" "));
    let _ = writeln!(out, "nonneg {}", certificate.original_structure.nonneg_count);
    let _ = writeln!(out, "free {}", certificate.original_structure.free_count);
    let _ = writeln!(out, "constraints {}", certificate.original_constraint_count);
    let _ = writeln!(out, "steps {}", certificate.steps.len());
    for (idx, step) in certificate.steps.iter().enumerate() {
        let support: Vec<String> = step.support.iter().map(|c| format!("{c}")).collect();
        let _ = writeln!(
            out,
            "step {idx} {} constraint {} sign {} b {} support {}",
            step.kind,
            step.constraint_index,
            if step.sign >= 0 { "+1" } else { "-1" },
            fmt_f64(step.b_value),
            support.join(" "),
        );
    }
    out
}

fn parse_step_kind(tok: &str, line: usize) -> Result<StepKind, IoError> {
    match tok {
        "reduce" => Ok(StepKind::ReducePsd),
        "delete-zero" => Ok(StepKind::DeleteZeroConstraint),
        "infeasible" => Ok(StepKind::Infeasible),
        other => Err(parse_err(line, format!("unknown step kind `{other}`"))),
    }
}

/// Parse a certificate and replay its steps to rebuild the deletion sets and
/// index maps.
pub fn read_certificate(text: &str) -> Result<Certificate, IoError> {
    let mut lines = text.lines().enumerate().map(|(idx, l)| (idx + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty certificate"))?;
    if header.trim() != CERTIFICATE_HEADER {
        return Err(IoError::UnknownVersion { found: header.trim().to_string() });
    }

    let mut expect_key = |key: &str| -> Result<(usize, Vec<String>), IoError> {
        let (line_no, raw) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("missing `{key}` line")))?;
        let mut toks = raw.split_whitespace();
        if toks.next() != Some(key) {
            return Err(parse_err(line_no, format!("expected `{key}` line, got `{raw}`")));
        }
        Ok((line_no, toks.map(str::to_string).collect()))
    };

    let (line_no, psd_toks) = expect_key("psd")?;
    let psd_blocks = psd_toks
        .iter()
        .map(|t| parse_usize(t, line_no, "a block order"))
        .collect::<Result<Vec<_>, _>>()?;
    let (line_no, toks) = expect_key("nonneg")?;
    let nonneg = single(&toks, line_no, "nonneg count")
        .and_then(|t| parse_usize(t, line_no, "nonneg count"))?;
    let (line_no, toks) = expect_key("free")?;
    let free = single(&toks, line_no, "free count")
        .and_then(|t| parse_usize(t, line_no, "free count"))?;
    let (line_no, toks) = expect_key("constraints")?;
    let constraint_count = single(&toks, line_no, "constraint count")
        .and_then(|t| parse_usize(t, line_no, "constraint count"))?;
    let (line_no, toks) = expect_key("steps")?;
    let step_count = single(&toks, line_no, "step count")
        .and_then(|t| parse_usize(t, line_no, "step count"))?;

    let structure = BlockStructure::new(psd_blocks, nonneg, free);
    let mut steps = Vec::with_capacity(step_count);
    for expected_idx in 0..step_count {
        let (line_no, raw) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("missing step {expected_idx}")))?;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.len() < 9
            || toks[0] != "step"
            || toks[3] != "constraint"
            || toks[5] != "sign"
            || toks[7] != "b"
        {
            return Err(parse_err(line_no, "malformed step line"));
        }
        let idx = parse_usize(toks[1], line_no, "a step index")?;
        if idx != expected_idx {
            return Err(parse_err(line_no, format!("expected step {expected_idx}, got {idx}")));
        }
        let kind = parse_step_kind(toks[2], line_no)?;
        let constraint_index = parse_usize(toks[4], line_no, "a constraint index")?;
        if constraint_index >= constraint_count {
            return Err(parse_err(line_no, format!("constraint index {constraint_index} out of range")));
        }
        let sign: i8 = match toks[6] {
            "+1" => 1,
            "-1" => -1,
            other => return Err(parse_err(line_no, format!("sign must be +1 or -1, got `{other}`"))),
        };
        let b_value = parse_f64(toks[8], line_no)?;
        if toks.get(9) != Some(&"support") {
            return Err(parse_err(line_no, "malformed step line: missing support"));
        }
        let mut support = Vec::new();
        for tok in &toks[10..] {
            let (b, r) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, format!("support entries are block:row, got `{tok}`")))?;
            let block = parse_usize(b, line_no, "a support block")?;
            let row = parse_usize(r, line_no, "a support row")?;
            if block >= structure.block_count() || row >= structure.block_order(block) {
                return Err(parse_err(line_no, format!("support coordinate {tok} out of range")));
            }
            support.push(Coordinate { block, row });
        }
        if kind == StepKind::ReducePsd && support.is_empty() {
            return Err(parse_err(line_no, "reduce step without a support"));
        }
        steps.push(ReductionStep { kind, constraint_index, sign, support, b_value });
    }
    if let Some((line_no, raw)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(parse_err(line_no, format!("trailing content `{raw}`")));
    }

    let (deleted_coordinates, deleted_constraints) =
        replay_steps(&structure, constraint_count, &steps);
    let index_maps =
        index_maps_for(&structure, constraint_count, &deleted_coordinates, &deleted_constraints);
    Ok(Certificate {
        steps,
        original_structure: structure,
        original_constraint_count: constraint_count,
        deleted_coordinates,
        deleted_constraints,
        index_maps,
    })
}

fn single<'a>(toks: &'a [String], line: usize, what: &str) -> Result<&'a str, IoError> {
    if toks.len() != 1 {
        return Err(parse_err(line, format!("expected exactly one {what}")));
    }
    Ok(&toks[0])
}

/// Parse a solve report: flat `key value` lines. A line `sieve_infeasible 1`
/// marks the preprocessed side as decided by the sieve alone; otherwise the
/// keys `infeasible`, `primal_obj`, `dual_obj`, `dimacs_max_abs`, and
/// `out_of_memory` are all required.
pub fn read_solve_report(text: &str) -> Result<AfterReport, IoError> {
    let mut infeasible = None;
    let mut primal_obj = None;
    let mut dual_obj = None;
    let mut dimacs_max_abs = None;
    let mut out_of_memory = None;
    let mut sieve_infeasible = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once(char::is_whitespace)
            .ok_or_else(|| parse_err(line, format!("expected `key value`, got `{trimmed}`")))?;
        let value = value.trim();
        let parse_bool = |v: &str| match v {
            "0" | "false" => Ok(false),
            "1" | "true" => Ok(true),
            other => Err(parse_err(line, format!("expected a boolean, got `{other}`"))),
        };
        match key {
            "infeasible" => infeasible = Some(parse_bool(value)?),
            "primal_obj" => primal_obj = Some(parse_f64(value, line)?),
            "dual_obj" => dual_obj = Some(parse_f64(value, line)?),
            "dimacs_max_abs" => dimacs_max_abs = Some(parse_f64(value, line)?),
            "out_of_memory" => out_of_memory = Some(parse_bool(value)?),
            "sieve_infeasible" => sieve_infeasible = parse_bool(value)?,
            other => return Err(parse_err(line, format!("unknown key `{other}`"))),
        }
    }
    if sieve_infeasible {
        return Ok(AfterReport::SieveInfeasible);
    }
    let missing = |what: &str| parse_err(0, format!("missing key `{what}`"));
    Ok(AfterReport::Solved(SolveReport {
        infeasible: infeasible.ok_or_else(|| missing("infeasible"))?,
        primal_obj: primal_obj.ok_or_else(|| missing("primal_obj"))?,
        dual_obj: dual_obj.ok_or_else(|| missing("dual_obj"))?,
        dimacs_max_abs: dimacs_max_abs.ok_or_else(|| missing("dimacs_max_abs"))?,
        out_of_memory: out_of_memory.ok_or_else(|| missing("out_of_memory"))?,
    }))
}

/// Canonical solve-report text; the inverse of [`read_solve_report`].
pub fn write_solve_report(report: &AfterReport) -> String {
    match report {
        AfterReport::SieveInfeasible => "sieve_infeasible 1\n".to_string(),
        AfterReport::Solved(r) => {
            let mut out = String::new();
            let _ = writeln!(out, "infeasible {}", u8::from(r.infeasible));
            let _ = writeln!(out, "primal_obj {}", fmt_f64(r.primal_obj));
            let _ = writeln!(out, "dual_obj {}", fmt_f64(r.dual_obj));
            let _ = writeln!(out, "dimacs_max_abs {}", fmt_f64(r.dimacs_max_abs));
            let _ = writeln!(out, "out_of_memory {}", u8::from(r.out_of_memory));
            out
        }
    }
}
