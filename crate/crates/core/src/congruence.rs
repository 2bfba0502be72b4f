//! GF(2) processing of smooth relation pairs: parity matrix construction,
//! kernel computation by Gaussian elimination on packed words, assembly of
//! congruent squares and factor extraction.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numtheory::{gcd, mod_pow, PrimeBasis};
use crate::sieve::SrPair;

/// Parity matrix of sr-pair exponent vectors over GF(2).
///
/// Row 0 carries the sign exponent; rows 1..=pi2 the prime exponents mod 2.
/// Column r is the reduced `e_tilde` of the r-th pair.
#[derive(Debug, Clone)]
pub struct ParityMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Column-major packed bits, `rows.div_ceil(64)` words per column.
    col_words: Vec<Vec<u64>>,
    /// Identifiers of the pairs behind each column.
    pub column_refs: Vec<usize>,
}

impl ParityMatrix {
    fn words_per_col(rows: usize) -> usize {
        rows.div_ceil(64)
    }

    pub fn bit(&self, row: usize, col: usize) -> bool {
        self.col_words[col][row / 64] >> (row % 64) & 1 == 1
    }

    /// Check `M tau = 0` exactly.
    pub fn kernel_member(&self, tau: &[u8]) -> bool {
        assert_eq!(tau.len(), self.cols);
        let mut acc = vec![0u64; Self::words_per_col(self.rows)];
        for (col, &t) in self.col_words.iter().zip(tau) {
            if t != 0 {
                for (a, w) in acc.iter_mut().zip(col) {
                    *a ^= w;
                }
            }
        }
        acc.iter().all(|&w| w == 0)
    }

    /// Text bitmap for debugging, one matrix row per line.
    pub fn to_bitmap(&self) -> String {
        let mut out = String::with_capacity((self.cols + 1) * self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(if self.bit(r, c) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

/// Build the (pi2 + 1) x D parity matrix from the pairs' ratio exponents.
pub fn build_parity_matrix(pairs: &[SrPair], pi2: usize) -> Result<ParityMatrix> {
    let rows = pi2 + 1;
    let wpc = ParityMatrix::words_per_col(rows);
    let mut col_words = Vec::with_capacity(pairs.len());
    for (r, pair) in pairs.iter().enumerate() {
        if pair.e_tilde.len() != pi2 {
            return Err(Error::InvalidArgument(format!(
                "pair {r} is indexed over {} primes, expected {pi2}",
                pair.e_tilde.len()
            )));
        }
        let mut words = vec![0u64; wpc];
        if pair.e_tilde_sign % 2 == 1 {
            words[0] |= 1;
        }
        for (j, &e) in pair.e_tilde.iter().enumerate() {
            if e.rem_euclid(2) == 1 {
                let row = j + 1;
                words[row / 64] |= 1 << (row % 64);
            }
        }
        col_words.push(words);
    }
    Ok(ParityMatrix {
        rows,
        cols: pairs.len(),
        col_words,
        column_refs: (0..pairs.len()).collect(),
    })
}

/// Basis of the GF(2) null space via column elimination with companion
/// tracking. Every returned vector is nonzero and satisfies `M tau = 0`;
/// an empty list means the kernel is trivial.
pub fn kernel_basis(matrix: &ParityMatrix) -> Vec<Vec<u8>> {
    let rows = matrix.rows;
    let cols = matrix.cols;
    let comp_words = cols.div_ceil(64).max(1);

    // Working copies: column bits plus companion identity over columns.
    let mut work: Vec<Vec<u64>> = matrix.col_words.clone();
    let mut comp: Vec<Vec<u64>> = (0..cols)
        .map(|c| {
            let mut v = vec![0u64; comp_words];
            v[c / 64] |= 1 << (c % 64);
            v
        })
        .collect();

    let first_set_row = |col: &[u64]| -> Option<usize> {
        col.iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    };

    let mut pivot_of_row: Vec<Option<usize>> = vec![None; rows];
    let mut kernel = Vec::new();

    for c in 0..cols {
        loop {
            let Some(r) = first_set_row(&work[c]) else { break };
            match pivot_of_row[r] {
                Some(pc) => {
                    let (a, b) = if pc < c {
                        let (lo, hi) = work.split_at_mut(c);
                        (&lo[pc], &mut hi[0])
                    } else {
                        unreachable!("pivot columns precede the current one")
                    };
                    for (x, y) in b.iter_mut().zip(a) {
                        *x ^= y;
                    }
                    let (a, b) = {
                        let (lo, hi) = comp.split_at_mut(c);
                        (&lo[pc], &mut hi[0])
                    };
                    for (x, y) in b.iter_mut().zip(a) {
                        *x ^= y;
                    }
                }
                None => {
                    pivot_of_row[r] = Some(c);
                    break;
                }
            }
        }
        if first_set_row(&work[c]).is_none() {
            let tau: Vec<u8> = (0..cols)
                .map(|i| (comp[c][i / 64] >> (i % 64) & 1) as u8)
                .collect();
            debug_assert!(matrix.kernel_member(&tau));
            kernel.push(tau);
        }
    }
    kernel
}

/// Combine the pairs selected by `tau` into residues with X^2 = Y^2 (mod N).
///
/// Under the kernel condition every accumulated exponent is even and the
/// product of all u_r * w_r is a positive perfect square, so X is assembled
/// from halved exponents and Y from the plain product of the u_r.
pub fn assemble_squares(
    tau: &[u8],
    pairs: &[SrPair],
    p2: &PrimeBasis,
    n: &BigUint,
) -> Result<(BigUint, BigUint)> {
    if tau.len() != pairs.len() {
        return Err(Error::InvalidArgument("tau length != pair count".into()));
    }
    let pi2 = p2.size();
    let mut combined = vec![0i128; pi2];
    let mut sign_sum: i128 = 0;
    let mut y = BigUint::one();

    for (pair, &t) in pairs.iter().zip(tau) {
        if t == 0 {
            continue;
        }
        if pair.e_u.exponents.len() != pi2 || pair.e_w.exponents.len() != pi2 {
            return Err(Error::InvalidArgument(
                "pair exponents indexed over a different basis".into(),
            ));
        }
        for (slot, (&eu, &ew)) in combined
            .iter_mut()
            .zip(pair.e_u.exponents.iter().zip(&pair.e_w.exponents))
        {
            *slot += eu as i128 + ew as i128;
        }
        sign_sum += pair.e_w.e0 as i128;
        y = y * &pair.u % n;
    }

    if sign_sum % 2 != 0 {
        return Err(Error::Internal(
            "odd sign parity in kernel combination".into(),
        ));
    }
    let mut x = BigUint::one();
    for (&e, &p) in combined.iter().zip(p2.primes()) {
        if e < 0 || e % 2 != 0 {
            return Err(Error::Internal(format!(
                "combined exponent {e} not an even nonnegative integer"
            )));
        }
        if e > 0 {
            let half = BigUint::from(e as u128 / 2);
            x = x * mod_pow(&BigInt::from(p), &half, n)? % n;
        }
    }
    Ok((x, y))
}

/// gcd-split of N from a congruence of squares; `None` when X = +-Y (mod N).
pub fn extract_factors(
    x: &BigUint,
    y: &BigUint,
    n: &BigUint,
) -> Result<Option<(BigUint, BigUint)>> {
    let two = BigUint::from(2u32);
    if mod_pow(&BigInt::from(x.clone()), &two, n)? != mod_pow(&BigInt::from(y.clone()), &two, n)? {
        return Err(Error::InvalidArgument(
            "X^2 and Y^2 are not congruent mod N".into(),
        ));
    }
    let xm = x % n;
    let ym = y % n;
    let sum = (&xm + &ym) % n;
    if xm == ym || sum.is_zero() {
        return Ok(None);
    }
    let g = gcd(&(xm + ym), n)?;
    if g.is_one() || &g == n {
        return Ok(None);
    }
    let other = n / &g;
    let (p, q) = if g <= other { (g, other) } else { (other, g) };
    Ok(Some((p, q)))
}

/// A successful factorization with bookkeeping about the search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorResult {
    pub p: BigUint,
    pub q: BigUint,
    pub kernel_vector_used: usize,
    pub trials: usize,
}

impl FactorResult {
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            p: String,
            q: String,
            kernel_vector_used: &'a usize,
            trials: &'a usize,
        }
        serde_json::to_string(&Doc {
            p: self.p.to_string(),
            q: self.q.to_string(),
            kernel_vector_used: &self.kernel_vector_used,
            trials: &self.trials,
        })
        .expect("serialization cannot fail")
    }
}

/// Cap on assemble/extract attempts across kernel combinations.
const COMBINATION_BUDGET: usize = 10_000;

/// Full processing: kernel basis vectors first, then pairwise sums, until a
/// nontrivial factorization appears or the combination budget runs out.
pub fn process(pairs: &[SrPair], n: &BigUint, p2: &PrimeBasis) -> Result<Option<FactorResult>> {
    if pairs.is_empty() {
        return Ok(None);
    }
    let matrix = build_parity_matrix(pairs, p2.size())?;
    let basis = kernel_basis(&matrix);
    if basis.is_empty() {
        return Ok(None);
    }

    let mut trials = 0usize;
    fn try_tau(
        tau: &[u8],
        index: usize,
        trials: &mut usize,
        pairs: &[SrPair],
        p2: &PrimeBasis,
        n: &BigUint,
    ) -> Result<Option<FactorResult>> {
        *trials += 1;
        let (x, y) = assemble_squares(tau, pairs, p2, n)?;
        Ok(extract_factors(&x, &y, n)?.map(|(p, q)| FactorResult {
            p,
            q,
            kernel_vector_used: index,
            trials: *trials,
        }))
    }

    for (i, tau) in basis.iter().enumerate() {
        if trials >= COMBINATION_BUDGET {
            return Ok(None);
        }
        if let Some(hit) = try_tau(tau, i, &mut trials, pairs, p2, n)? {
            return Ok(Some(hit));
        }
    }
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            if trials >= COMBINATION_BUDGET {
                return Ok(None);
            }
            let tau: Vec<u8> = basis[i]
                .iter()
                .zip(&basis[j])
                .map(|(a, b)| a ^ b)
                .collect();
            if tau.iter().all(|&t| t == 0) {
                continue;
            }
            let index = basis.len() + i * basis.len() + j;
            if let Some(hit) = try_tau(&tau, index, &mut trials, pairs, p2, n)? {
                return Ok(Some(hit));
            }
        }
    }
    Ok(None)
}
