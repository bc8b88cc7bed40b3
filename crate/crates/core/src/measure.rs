//! Scrambled block Hadamard measurement operator.
//!
//! The operator is kept in factored form: a seeded column permutation, a
//! block-diagonal matrix of Sylvester-Hadamard blocks applied via the fast
//! Walsh-Hadamard transform, and a seeded subset of rows. Entries of the
//! implied dense matrix are all +1/-1 (no `1/sqrt(B)` normalization), so a
//! measurement models hardware summation of daisy-chained taxels exactly;
//! the solver absorbs the operator scale through its Lipschitz estimate.
//!
//! Reproducibility: all randomness comes from `ChaCha8Rng::seed_from_u64`.
//! The build draws, in order, (1) a Fisher-Yates shuffle of `0..n` for the
//! column permutation and (2) a Fisher-Yates shuffle of a second `0..n`
//! index list whose first `m` entries, sorted ascending, become the
//! selected rows. Identical `(n, m, block_size, seed)` therefore rebuild
//! an identical operator on any platform.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Frame, MeasurementVector};

/// The measurement operator in factored form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbheOperator {
    n: usize,
    m: usize,
    block_size: usize,
    seed: u64,
    /// scrambled[i] = x[permutation[i]]
    permutation: Vec<usize>,
    /// Sorted ascending; indexes rows of the block-Hadamard product.
    selected_rows: Vec<usize>,
}

/// Builds the seeded operator. `block_size` must be a power of two
/// dividing `n`, and `1 <= m <= n`.
pub fn build_sbhe(n: usize, m: usize, block_size: usize, seed: u64) -> Result<SbheOperator> {
    if block_size == 0 || !block_size.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "block size must be a power of two, got {block_size}"
        )));
    }
    if n == 0 || !n.is_multiple_of(block_size) {
        return Err(Error::InvalidParameter(format!(
            "block size {block_size} does not divide signal length {n}"
        )));
    }
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!(
            "measurement count must satisfy 1 <= m <= n, got m = {m}, n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut permutation: Vec<usize> = (0..n).collect();
    permutation.shuffle(&mut rng);
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    let mut selected_rows = rows[..m].to_vec();
    selected_rows.sort_unstable();
    Ok(SbheOperator {
        n,
        m,
        block_size,
        seed,
        permutation,
        selected_rows,
    })
}

impl SbheOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_blocks(&self) -> usize {
        self.n / self.block_size
    }

    /// Column scramble: entry `i` is the taxel the i-th permuted slot
    /// reads from.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Row subset of the block-Hadamard product, sorted ascending.
    pub fn selected_rows(&self) -> &[usize] {
        &self.selected_rows
    }

    /// Measures one frame: permute, per-block fast Walsh-Hadamard
    /// transform, gather the selected rows. O(N log B).
    pub fn apply(&self, frame: &Frame) -> Result<MeasurementVector> {
        if frame.shape().n() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "frame has {} taxels, operator expects {}",
                frame.shape().n(),
                self.n
            )));
        }
        let mut scratch = vec![0.0; self.n];
        let mut out = vec![0.0; self.m];
        self.apply_slice(frame.values(), &mut scratch, &mut out);
        Ok(MeasurementVector::new(out))
    }

    /// Adjoint: scatter measurements to their rows, per-block transform
    /// (Hadamard blocks are symmetric), then undo the permutation.
    pub fn apply_adjoint(&self, y: &MeasurementVector) -> Result<Vec<f64>> {
        if y.m() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "measurement vector has {} entries, operator expects {}",
                y.m(),
                self.m
            )));
        }
        let mut scratch = vec![0.0; self.n];
        let mut out = vec![0.0; self.n];
        self.adjoint_slice(&y.values, &mut scratch, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_slice(&self, x: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(scratch.len(), self.n);
        debug_assert_eq!(out.len(), self.m);
        for (slot, &src) in scratch.iter_mut().zip(&self.permutation) {
            *slot = x[src];
        }
        for chunk in scratch.chunks_exact_mut(self.block_size) {
            fwht(chunk);
        }
        for (slot, &row) in out.iter_mut().zip(&self.selected_rows) {
            *slot = scratch[row];
        }
    }

    pub(crate) fn adjoint_slice(&self, y: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.m);
        debug_assert_eq!(scratch.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        scratch.fill(0.0);
        for (&row, &v) in self.selected_rows.iter().zip(y) {
            scratch[row] = v;
        }
        for chunk in scratch.chunks_exact_mut(self.block_size) {
            fwht(chunk);
        }
        for (&dst, &v) in self.permutation.iter().zip(scratch.iter()) {
            out[dst] = v;
        }
    }

    /// Describes the daisy-chain wiring the operator implies: per Hadamard
    /// block, the set of taxels chained together and the number of
    /// measurement rows drawn from that block.
    pub fn wiring_report(&self) -> WiringReport {
        let b = self.block_size;
        let chains = (0..self.num_blocks())
            .map(|block_id| {
                let mut taxels = self.permutation[block_id * b..(block_id + 1) * b].to_vec();
                taxels.sort_unstable();
                let lo = self.selected_rows.partition_point(|&r| r < block_id * b);
                let hi = self
                    .selected_rows
                    .partition_point(|&r| r < (block_id + 1) * b);
                WiringChain {
                    block_id,
                    taxels,
                    rows_selected: hi - lo,
                }
            })
            .collect();
        WiringReport {
            block_size: b,
            chains,
        }
    }
}

/// One daisy-chain: the taxels a Hadamard block aggregates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WiringChain {
    pub block_id: usize,
    pub taxels: Vec<usize>,
    pub rows_selected: usize,
}

/// Wiring description for a whole operator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WiringReport {
    pub block_size: usize,
    pub chains: Vec<WiringChain>,
}

impl WiringReport {
    /// CSV rows `block_id,taxel_0,...,taxel_{B-1},rows_selected`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "block_id")?;
        for i in 0..self.block_size {
            write!(w, ",taxel_{i}")?;
        }
        writeln!(w, ",rows_selected")?;
        for chain in &self.chains {
            write!(w, "{}", chain.block_id)?;
            for t in &chain.taxels {
                write!(w, ",{t}")?;
            }
            writeln!(w, ",{}", chain.rows_selected)?;
        }
        Ok(())
    }
}

/// In-place fast Walsh-Hadamard transform, natural (Sylvester) ordering.
/// `data.len()` must be a power of two.
pub(crate) fn fwht(data: &mut [f64]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        let step = h * 2;
        let mut base = 0;
        while base < n {
            for k in base..base + h {
                let a = data[k];
                let b = data[k + h];
                data[k] = a + b;
                data[k + h] = a - b;
            }
            base += step;
        }
        h = step;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridShape;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Independent oracle: materialize the dense matrix from the factored
    // form with explicit matrix products.
    fn sylvester(b: usize) -> Vec<Vec<f64>> {
        assert!(b.is_power_of_two());
        let mut h = vec![vec![1.0]];
        let mut size = 1;
        while size < b {
            let mut next = vec![vec![0.0; 2 * size]; 2 * size];
            for r in 0..size {
                for c in 0..size {
                    next[r][c] = h[r][c];
                    next[r][c + size] = h[r][c];
                    next[r + size][c] = h[r][c];
                    next[r + size][c + size] = -h[r][c];
                }
            }
            h = next;
            size *= 2;
        }
        h
    }

    fn dense_matrix(op: &SbheOperator) -> Vec<Vec<f64>> {
        let n = op.n();
        let b = op.block_size();
        let hb = sylvester(b);
        // W: block diagonal of Sylvester blocks.
        let mut w = vec![vec![0.0; n]; n];
        for blk in 0..n / b {
            for r in 0..b {
                for c in 0..b {
                    w[blk * b + r][blk * b + c] = hb[r][c];
                }
            }
        }
        // P: scrambled[i] = x[permutation[i]] means P[i][permutation[i]] = 1.
        let mut p = vec![vec![0.0; n]; n];
        for (i, &src) in op.permutation.iter().enumerate() {
            p[i][src] = 1.0;
        }
        // W * P, then keep the selected rows.
        let mut wp = vec![vec![0.0; n]; n];
        for r in 0..n {
            for k in 0..n {
                if w[r][k] != 0.0 {
                    for c in 0..n {
                        wp[r][c] += w[r][k] * p[k][c];
                    }
                }
            }
        }
        op.selected_rows.iter().map(|&r| wp[r].clone()).collect()
    }

    fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        m.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn parameter_validation() {
        assert!(build_sbhe(48, 10, 32, 0).is_err());
        assert!(build_sbhe(64, 65, 32, 0).is_err());
        assert!(build_sbhe(64, 0, 32, 0).is_err());
        assert!(build_sbhe(64, 21, 12, 0).is_err());
        assert!(build_sbhe(64, 21, 32, 0).is_ok());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = build_sbhe(64, 20, 8, 1234).unwrap();
        let b = build_sbhe(64, 20, 8, 1234).unwrap();
        assert_eq!(a, b);
        let c = build_sbhe(64, 20, 8, 1235).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn complete_h4_satisfies_phi_phit_4i() {
        // n = m = B = 4: the dense operator is H4 with permuted columns,
        // so Phi * Phi^T = 4 * I regardless of seed.
        for seed in 0..5 {
            let op = build_sbhe(4, 4, 4, seed).unwrap();
            let dense = dense_matrix(&op);
            for r in 0..4 {
                for c in 0..4 {
                    let dot: f64 = (0..4).map(|k| dense[r][k] * dense[c][k]).sum();
                    let want = if r == c { 4.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn row_sums_of_complete_h4() {
        // All-ones input is invariant under the column permutation, so the
        // measurement equals the H4 row sums (4, 0, 0, 0).
        let shape = GridShape::new(2, 2).unwrap();
        let op = build_sbhe(4, 4, 4, 99).unwrap();
        let ones = Frame::new(shape, vec![1.0; 4]).unwrap();
        let y = op.apply(&ones).unwrap();
        assert_eq!(y.values, vec![4.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_in_zero_out() {
        let shape = GridShape::new(4, 4).unwrap();
        let op = build_sbhe(16, 7, 4, 3).unwrap();
        let y = op.apply(&Frame::zeros(shape)).unwrap();
        assert!(y.values.iter().all(|&v| v == 0.0));
        let x = op
            .apply_adjoint(&MeasurementVector::new(vec![0.0; 7]))
            .unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_of_unit_measurement_is_signed_chain() {
        // With all rows kept, Phi^T e_0 is the first selected row of the
        // dense matrix: all entries +/-1 on one block's taxels. For the
        // all-ones row (row 0 of H4) that is the all-ones vector.
        let op = build_sbhe(4, 4, 4, 5).unwrap();
        let mut y = vec![0.0; 4];
        y[0] = 1.0;
        let back = op.apply_adjoint(&MeasurementVector::new(y)).unwrap();
        assert_eq!(back, vec![1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn fast_apply_matches_dense_oracle() {
        let shape = GridShape::new(4, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..4 {
            let op = build_sbhe(16, 9, 4, seed).unwrap();
            let dense = dense_matrix(&op);
            let x: Vec<f64> = (0..16).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let frame = Frame::new(shape, x.clone()).unwrap();
            let fast = op.apply(&frame).unwrap();
            let slow = mat_vec(&dense, &x);
            for (f, s) in fast.values.iter().zip(&slow) {
                assert!((f - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_rows_have_exactly_b_signed_entries() {
        for seed in 0..3 {
            let op = build_sbhe(32, 12, 8, seed).unwrap();
            let dense = dense_matrix(&op);
            for row in &dense {
                let nonzero: Vec<f64> = row.iter().copied().filter(|v| *v != 0.0).collect();
                assert_eq!(nonzero.len(), 8);
                assert!(nonzero.iter().all(|v| *v == 1.0 || *v == -1.0));
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        let shape = GridShape::new(8, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let op = build_sbhe(64, 20, 8, 21).unwrap();
        let x: Vec<f64> = (0..64).map(|_| rng.random::<f64>() - 0.5).collect();
        let y: Vec<f64> = (0..20).map(|_| rng.random::<f64>() - 0.5).collect();
        let ax = op.apply(&Frame::new(shape, x.clone()).unwrap()).unwrap();
        let aty = op.apply_adjoint(&MeasurementVector::new(y.clone())).unwrap();
        let lhs: f64 = ax.values.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn wiring_chains_partition_the_taxels() {
        let op = build_sbhe(1600, 533, 32, 0).unwrap();
        let report = op.wiring_report();
        assert_eq!(report.chains.len(), 50);
        let mut seen = vec![false; 1600];
        for chain in &report.chains {
            assert_eq!(chain.taxels.len(), 32);
            for &t in &chain.taxels {
                assert!(!seen[t], "taxel {t} appears in two chains");
                seen[t] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        let total: usize = report.chains.iter().map(|c| c.rows_selected).sum();
        assert_eq!(total, 533);

        let single = build_sbhe(4, 4, 4, 0).unwrap().wiring_report();
        assert_eq!(single.chains.len(), 1);
        assert_eq!(single.chains[0].taxels, vec![0, 1, 2, 3]);
        assert_eq!(single.chains[0].rows_selected, 4);
    }

    #[test]
    fn wiring_csv_layout() {
        let op = build_sbhe(4, 2, 2, 11).unwrap();
        let mut buf = Vec::new();
        op.wiring_report().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "block_id,taxel_0,taxel_1,rows_selected");
        assert_eq!(lines.count(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn adjoint_identity_holds_generally(
            blocks in 1usize..5,
            log_b in 0u32..4,
            seed in 0u64..500,
        ) {
            let b = 1usize << log_b;
            let n = blocks * b;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = 1 + (rng.random::<u64>() as usize) % n;
            let op = build_sbhe(n, m, b, seed).unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let y: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut scratch = vec![0.0; n];
            let mut ax = vec![0.0; m];
            op.apply_slice(&x, &mut scratch, &mut ax);
            let mut aty = vec![0.0; n];
            op.adjoint_slice(&y, &mut scratch, &mut aty);
            let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0));
        }
    }
}
