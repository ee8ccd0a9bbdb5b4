//! Problem dump in the SDPA sparse text format.
//!
//! SDPA states a problem as `min c^T x` subject to
//! `sum_i x_i F_i - F_0 >= 0`. A block here, `G_0 + sum_i x_i G_i <= 0`, is
//! therefore written with `F_0 = G_0` and `F_i = -G_i`. Box bounds and 1x1
//! blocks are collected into one diagonal block (negative size in the block
//! structure line). Indices in the file are 1-based and only the upper
//! triangle is listed:
//!
//! ```text
//! "comment
//! <m>
//! <number of blocks>
//! <block sizes>
//! <c_1 ... c_m>
//! <matrix> <block> <row> <col> <value>
//! ...
//! ```
//!
//! Reading a dump back yields an equivalent problem in which the diagonal
//! block appears as separate 1x1 blocks.

use std::fmt::Write as _;

use crate::problem::{LmiBlock, SdpProblem};
use crate::SdpError;

pub fn write_sdpa(problem: &SdpProblem) -> String {
    let blocks = problem.expanded_blocks();
    let (scalars, matrices): (Vec<&LmiBlock>, Vec<&LmiBlock>) = blocks.iter().partition(|b| b.size == 1);

    let mut out = String::new();
    let _ = writeln!(out, "\"block LMI problem: min c'x s.t. sum x_i F_i - F_0 >= 0");
    let _ = writeln!(out, "{}", problem.num_vars);
    let nblk = matrices.len() + usize::from(!scalars.is_empty());
    let _ = writeln!(out, "{nblk}");
    let mut sizes: Vec<String> = matrices.iter().map(|b| b.size.to_string()).collect();
    if !scalars.is_empty() {
        sizes.push(format!("-{}", scalars.len()));
    }
    let _ = writeln!(out, "{}", sizes.join(" "));
    let c: Vec<String> = problem.objective.iter().map(|v| format!("{v:e}")).collect();
    let _ = writeln!(out, "{}", c.join(" "));

    let mut lines: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
    for (k, blk) in matrices.iter().enumerate() {
        for (r, cidx, v) in blk.constant.iter() {
            lines.push((0, k + 1, r + 1, cidx + 1, v));
        }
        for (var, f) in &blk.coeffs {
            for (r, cidx, v) in f.iter() {
                lines.push((var + 1, k + 1, r + 1, cidx + 1, -v));
            }
        }
    }
    let diag = matrices.len() + 1;
    for (d, blk) in scalars.iter().enumerate() {
        for (_, _, v) in blk.constant.iter() {
            lines.push((0, diag, d + 1, d + 1, v));
        }
        for (var, f) in &blk.coeffs {
            for (_, _, v) in f.iter() {
                lines.push((var + 1, diag, d + 1, d + 1, -v));
            }
        }
    }
    lines.sort_by_key(|l| (l.0, l.1, l.2, l.3));
    for (mat, b, r, cidx, v) in lines {
        let _ = writeln!(out, "{mat} {b} {r} {cidx} {v:e}");
    }
    out
}

pub fn read_sdpa(text: &str) -> Result<SdpProblem, SdpError> {
    let bad = |msg: &str| SdpError::Parse(msg.to_string());
    let mut tokens = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('"') && !l.trim_start().starts_with('*'))
        .flat_map(|l| {
            l.split(|ch: char| ch.is_whitespace() || ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')')
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect::<Vec<_>>()
        });
    let mut next = |what: &str| tokens.next().ok_or_else(|| bad(&format!("missing {what}")));
    let m: usize = next("variable count")?.parse().map_err(|_| bad("variable count"))?;
    let nblk: usize = next("block count")?.parse().map_err(|_| bad("block count"))?;
    let mut sizes = Vec::with_capacity(nblk);
    for _ in 0..nblk {
        let s: i64 = next("block size")?.parse().map_err(|_| bad("block size"))?;
        if s == 0 {
            return Err(bad("zero block size"));
        }
        sizes.push(s);
    }
    let mut problem = SdpProblem::new(m);
    for i in 0..m {
        let c: f64 = next("objective")?.parse().map_err(|_| bad("objective entry"))?;
        problem.set_objective(i, c);
    }

    // Dense blocks and, for diagonal blocks, one scalar block per entry.
    let mut dense: Vec<Option<LmiBlock>> = Vec::new();
    let mut diag: Vec<Vec<LmiBlock>> = Vec::new();
    for &s in &sizes {
        if s > 0 {
            dense.push(Some(LmiBlock::new(s as usize)));
            diag.push(Vec::new());
        } else {
            dense.push(None);
            diag.push((0..(-s) as usize).map(|_| LmiBlock::new(1)).collect());
        }
    }
    let rest: Vec<String> = tokens.collect();
    if !rest.len().is_multiple_of(5) {
        return Err(bad("entry lines must have five fields"));
    }
    for e in rest.chunks(5) {
        let mat: usize = e[0].parse().map_err(|_| bad("matrix index"))?;
        let b: usize = e[1].parse().map_err(|_| bad("block index"))?;
        let r: usize = e[2].parse().map_err(|_| bad("row index"))?;
        let c: usize = e[3].parse().map_err(|_| bad("column index"))?;
        let v: f64 = e[4].parse().map_err(|_| bad("value"))?;
        if mat > m || b == 0 || b > nblk || r == 0 || c == 0 {
            return Err(bad("index out of range"));
        }
        let (r, c) = (r - 1, c - 1);
        match &mut dense[b - 1] {
            Some(blk) => {
                if r >= blk.size || c >= blk.size {
                    return Err(bad("entry outside block"));
                }
                if mat == 0 {
                    blk.add_constant(r, c, v);
                } else {
                    blk.add_coeff(mat - 1, r, c, -v);
                }
            }
            None => {
                if r != c || r >= diag[b - 1].len() {
                    return Err(bad("off-diagonal entry in diagonal block"));
                }
                let blk = &mut diag[b - 1][r];
                if mat == 0 {
                    blk.add_constant(0, 0, v);
                } else {
                    blk.add_coeff(mat - 1, 0, 0, -v);
                }
            }
        }
    }
    for (d, s) in dense.into_iter().zip(diag) {
        match d {
            Some(blk) => problem.push_block(blk),
            None => s.into_iter().for_each(|blk| problem.push_block(blk)),
        }
    }
    problem.validate()?;
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_constraint_values() {
        let mut p = SdpProblem::new(2);
        p.set_objective(0, 1.0);
        p.set_objective(1, -0.5);
        p.set_bounds(1, Some(-2.0), Some(3.0));
        let mut b = LmiBlock::new(2);
        b.add_constant(0, 0, 1.0);
        b.add_constant(0, 1, 0.25);
        b.add_coeff(0, 0, 0, -1.0);
        b.add_coeff(1, 1, 1, 2.0);
        b.add_coeff(1, 0, 1, 0.5);
        p.push_block(b);
        let text = write_sdpa(&p);
        let q = read_sdpa(&text).unwrap();
        assert_eq!(q.num_vars(), 2);
        assert_eq!(q.objective(), p.objective());
        assert_eq!(q.num_blocks(), 3);
        let x = [0.3, -1.1];
        let a = p.blocks()[0].evaluate(&x);
        let c = q.blocks()[0].evaluate(&x);
        assert!((a - c).norm() < 1e-15);
        // x_1 - 3 and -2 - x_1
        let ev: Vec<f64> = q.blocks()[1..].iter().map(|b| b.evaluate(&x)[(0, 0)]).collect();
        assert!((ev[0] - (x[1] - 3.0)).abs() < 1e-15);
        assert!((ev[1] - (-2.0 - x[1])).abs() < 1e-15);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_sdpa("1\n1\n2\n1.0\n1 1 3 1 1.0\n").is_err());
        assert!(read_sdpa("1\n").is_err());
    }
}
