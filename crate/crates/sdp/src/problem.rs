//! Problem data: a linear objective over `m` scalar variables subject to a
//! list of affine symmetric-matrix constraints `F0 + sum_i x_i F_i <= 0`
//! (negative semidefinite) plus optional box bounds.

use nalgebra::DMatrix;

use crate::SdpError;

/// Sparse symmetric matrix stored as its upper triangle (`row <= col`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymSparse {
    pub(crate) entries: Vec<(u32, u32, f64)>,
}

impl SymSparse {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from a dense matrix, reading the upper triangle. Exact zeros are
    /// dropped. The caller is responsible for passing a symmetric matrix.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut entries = Vec::new();
        for col in 0..n {
            for row in 0..=col {
                let v = m[(row, col)];
                if v != 0.0 {
                    entries.push((row as u32, col as u32, v));
                }
            }
        }
        Self { entries }
    }

    /// Adds `v` at `(i, j)` and, implicitly, at `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push((r as u32, c as u32, v));
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Iterates over stored upper-triangle entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|&(r, c, v)| (r as usize, c as usize, v))
    }

    pub(crate) fn compress(&mut self) {
        self.entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut out: Vec<(u32, u32, f64)> = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => out.push((r, c, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        self.entries = out;
    }

    pub(crate) fn scale(&mut self, s: f64) {
        for e in &mut self.entries {
            e.2 *= s;
        }
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        self.add_to_dense(&mut m, 1.0);
        m
    }

    /// `m += s * self`.
    pub(crate) fn add_to_dense(&self, m: &mut DMatrix<f64>, s: f64) {
        for &(r, c, v) in &self.entries {
            let (r, c) = (r as usize, c as usize);
            m[(r, c)] += s * v;
            if r != c {
                m[(c, r)] += s * v;
            }
        }
    }

    /// `trace(self * g)` for an arbitrary (possibly non-symmetric) `g`.
    pub(crate) fn trace_with(&self, g: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for &(r, c, v) in &self.entries {
            let (r, c) = (r as usize, c as usize);
            if r == c {
                acc += v * g[(r, r)];
            } else {
                acc += v * (g[(r, c)] + g[(c, r)]);
            }
        }
        acc
    }

    pub(crate) fn frobenius_sq(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, v)| if r == c { v * v } else { 2.0 * v * v })
            .sum()
    }

    pub(crate) fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |a, e| a.max(e.2.abs()))
    }

    pub(crate) fn max_index(&self) -> Option<usize> {
        self.entries.iter().map(|&(r, c, _)| r.max(c) as usize).max()
    }
}

/// One constraint `F0 + sum_i x_i F_i <= 0` of fixed size.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub(crate) size: usize,
    pub(crate) constant: SymSparse,
    pub(crate) coeffs: Vec<(usize, SymSparse)>,
}

impl LmiBlock {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            constant: SymSparse::new(),
            coeffs: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn constant(&self) -> &SymSparse {
        &self.constant
    }

    pub fn coefficients(&self) -> &[(usize, SymSparse)] {
        &self.coeffs
    }

    pub fn with_constant(mut self, f0: SymSparse) -> Self {
        self.constant = f0;
        self
    }

    pub fn add_constant(&mut self, i: usize, j: usize, v: f64) {
        self.constant.add(i, j, v);
    }

    pub fn set_constant_dense(&mut self, f0: &DMatrix<f64>) {
        self.constant = SymSparse::from_dense(f0);
    }

    pub fn add_coeff(&mut self, var: usize, i: usize, j: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        match self.coeffs.iter_mut().find(|(k, _)| *k == var) {
            Some((_, m)) => m.add(i, j, v),
            None => {
                let mut m = SymSparse::new();
                m.add(i, j, v);
                self.coeffs.push((var, m));
            }
        }
    }

    /// Sets the coefficient matrix of `var` from a dense symmetric matrix.
    /// An all-zero matrix leaves the variable absent from this block.
    pub fn set_coeff_dense(&mut self, var: usize, m: &DMatrix<f64>) {
        let sparse = SymSparse::from_dense(m);
        self.coeffs.retain(|(k, _)| *k != var);
        if !sparse.is_empty() {
            self.coeffs.push((var, sparse));
        }
    }

    /// Evaluates `F0 + sum_i x_i F_i` as a dense matrix.
    pub fn evaluate(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        self.constant.add_to_dense(&mut m, 1.0);
        for (var, f) in &self.coeffs {
            f.add_to_dense(&mut m, x[*var]);
        }
        m
    }

    pub(crate) fn finalize(&mut self) {
        self.constant.compress();
        for (_, m) in &mut self.coeffs {
            m.compress();
        }
        self.coeffs.retain(|(_, m)| !m.is_empty());
        self.coeffs.sort_by_key(|(k, _)| *k);
    }

    pub(crate) fn scale_factor(&self) -> f64 {
        let mut s = self.constant.max_abs();
        for (_, m) in &self.coeffs {
            s = s.max(m.max_abs());
        }
        s
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.constant.scale(s);
        for (_, m) in &mut self.coeffs {
            m.scale(s);
        }
    }
}

/// Linear objective over `num_vars` variables, minimized subject to every
/// block being negative semidefinite and the optional per-variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub(crate) num_vars: usize,
    pub(crate) objective: Vec<f64>,
    pub(crate) blocks: Vec<LmiBlock>,
    pub(crate) lower: Vec<Option<f64>>,
    pub(crate) upper: Vec<Option<f64>>,
}

impl SdpProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            blocks: Vec::new(),
            lower: vec![None; num_vars],
            upper: vec![None; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn blocks(&self) -> &[LmiBlock] {
        &self.blocks
    }

    pub fn bounds(&self, var: usize) -> (Option<f64>, Option<f64>) {
        (self.lower[var], self.upper[var])
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<f64>, upper: Option<f64>) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn push_block(&mut self, mut block: LmiBlock) {
        block.finalize();
        self.blocks.push(block);
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Total dimension of the semidefinite constraints (sum of block sizes).
    pub fn total_block_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Checks dimensional consistency.
    pub fn validate(&self) -> Result<(), SdpError> {
        if self.objective.len() != self.num_vars
            || self.lower.len() != self.num_vars
            || self.upper.len() != self.num_vars
        {
            return Err(SdpError::Dimension(
                "objective or bound vector length differs from variable count".into(),
            ));
        }
        for (k, b) in self.blocks.iter().enumerate() {
            if b.size == 0 {
                return Err(SdpError::Dimension(format!("block {k} has size zero")));
            }
            let check = |m: &SymSparse| m.max_index().is_none_or(|i| i < b.size);
            if !check(&b.constant) {
                return Err(SdpError::Dimension(format!(
                    "block {k}: constant entry outside {}x{}",
                    b.size, b.size
                )));
            }
            for (var, m) in &b.coeffs {
                if *var >= self.num_vars {
                    return Err(SdpError::Dimension(format!(
                        "block {k}: variable index {var} >= {}",
                        self.num_vars
                    )));
                }
                if !check(m) {
                    return Err(SdpError::Dimension(format!(
                        "block {k}: coefficient of variable {var} outside {}x{}",
                        b.size, b.size
                    )));
                }
            }
        }
        for i in 0..self.num_vars {
            if let (Some(l), Some(u)) = (self.lower[i], self.upper[i]) {
                if !(l <= u) {
                    return Err(SdpError::Dimension(format!(
                        "variable {i}: lower bound {l} exceeds upper bound {u}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// All constraints as blocks, with box bounds appended as 1x1 blocks.
    pub(crate) fn expanded_blocks(&self) -> Vec<LmiBlock> {
        let mut out = self.blocks.clone();
        for i in 0..self.num_vars {
            if let Some(u) = self.upper[i] {
                // x_i - u <= 0
                let mut b = LmiBlock::new(1);
                b.add_constant(0, 0, -u);
                b.add_coeff(i, 0, 0, 1.0);
                b.finalize();
                out.push(b);
            }
            if let Some(l) = self.lower[i] {
                // l - x_i <= 0
                let mut b = LmiBlock::new(1);
                b.add_constant(0, 0, l);
                b.add_coeff(i, 0, 0, -1.0);
                b.finalize();
                out.push(b);
            }
        }
        out
    }

    /// Largest eigenvalue of each block at `x` (box bounds excluded),
    /// computed with the independent Jacobi routine.
    pub fn block_max_eigenvalues(&self, x: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| crate::verify::max_eigenvalue(&b.evaluate(x)))
            .collect()
    }

    /// Worst violation of the box bounds at `x` (0 when satisfied).
    pub fn bound_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.num_vars {
            if let Some(u) = self.upper[i] {
                worst = worst.max(x[i] - u);
            }
            if let Some(l) = self.lower[i] {
                worst = worst.max(l - x[i]);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_roundtrip_and_trace() {
        let d = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, -1.0, 3.0, 0.0, 3.0, 4.0]);
        let s = SymSparse::from_dense(&d);
        assert_eq!(s.nnz(), 5);
        assert_eq!(s.to_dense(3), d);
        let g = DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        let expect = (&d * &g).trace();
        assert!((s.trace_with(&g) - expect).abs() < 1e-12);
        assert!((s.frobenius_sq() - d.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn compress_merges_duplicates() {
        let mut s = SymSparse::new();
        s.add(0, 1, 1.0);
        s.add(1, 0, 2.0);
        s.add(2, 2, 1.0);
        s.add(2, 2, -1.0);
        s.compress();
        assert_eq!(s.entries, vec![(0, 1, 3.0)]);
    }

    #[test]
    fn validate_rejects_out_of_range() {
        let mut p = SdpProblem::new(1);
        let mut b = LmiBlock::new(2);
        b.add_coeff(3, 0, 0, 1.0);
        p.push_block(b);
        assert!(p.validate().is_err());

        let mut p = SdpProblem::new(1);
        let mut b = LmiBlock::new(2);
        b.add_coeff(0, 0, 2, 1.0);
        p.push_block(b);
        assert!(p.validate().is_err());
    }

    #[test]
    fn expanded_blocks_encode_bounds() {
        let mut p = SdpProblem::new(2);
        p.set_bounds(1, Some(-1.0), Some(2.0));
        let blocks = p.expanded_blocks();
        assert_eq!(blocks.len(), 2);
        // x = (0, 3) violates the upper bound: 3 - 2 > 0
        assert!((blocks[0].evaluate(&[0.0, 3.0])[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((p.bound_violation(&[0.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
