//! Diagonal spin-glass encoding of the CVP rounding search.
//!
//! Each bitstring x picks a correction `kappa_j = sign(mu_j - c_j) * x_j` to
//! Babai's roundings; its energy is the exact squared Euclidean distance
//! between the corrected lattice point and the target. The quadratic form is
//! expanded once into integer QUBO coefficients so energies can be evaluated
//! and enumerated without touching the lattice again.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::lattice::{BabaiResult, CvpInstance, ReducedBasis};

/// Data to map bitstrings back to lattice coefficient vectors.
#[derive(Debug, Clone)]
pub struct BackMap {
    /// Columns of the unimodular transform U with D = B U.
    pub u: Vec<Vec<BigInt>>,
    /// Babai roundings c_j in the reduced basis.
    pub coeff_c: Vec<BigInt>,
    /// Correction directions sign(mu_j - c_j).
    pub signs: Vec<i8>,
    /// Babai's lattice point (t - g).
    pub b_cl: Vec<BigInt>,
}

/// QUBO form of the rounding cost together with its lattice back-map.
#[derive(Debug, Clone)]
pub struct DiagonalCvpHamiltonian {
    pub n: usize,
    /// Residual g = t - b_cl.
    pub g: Vec<BigInt>,
    /// Rows sign_j * d_j, each of length n + 1.
    pub d_signed: Vec<Vec<BigInt>>,
    /// Constant term ||g||^2.
    pub e0: BigInt,
    /// Linear coefficients a_j.
    pub linear: Vec<BigInt>,
    /// Symmetric quadratic coefficients w_ij (zero diagonal).
    pub quad: Vec<Vec<BigInt>>,
    pub back: BackMap,
}

/// A bitstring with its exact energy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub bits: Vec<u8>,
    pub energy: BigInt,
}

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl DiagonalCvpHamiltonian {
    /// Expand the squared-distance cost over the given residual and signed
    /// reduced vectors into QUBO coefficients.
    pub fn from_residual(
        g: Vec<BigInt>,
        d_signed: Vec<Vec<BigInt>>,
        back: BackMap,
    ) -> Result<Self> {
        let n = d_signed.len();
        let dim = g.len();
        if d_signed.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidArgument(
                "signed direction rows must match the residual dimension".into(),
            ));
        }
        if back.u.len() != n || back.coeff_c.len() != n || back.signs.len() != n {
            return Err(Error::InvalidArgument("back-map dimensions mismatch".into()));
        }
        let e0 = dot(&g, &g);
        let linear: Vec<BigInt> = d_signed
            .iter()
            .map(|d| BigInt::from(-2) * dot(&g, d) + dot(d, d))
            .collect();
        let mut quad = vec![vec![BigInt::zero(); n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let w = BigInt::from(2) * dot(&d_signed[i], &d_signed[j]);
                quad[i][j] = w.clone();
                quad[j][i] = w;
            }
        }
        Ok(Self { n, g, d_signed, e0, linear, quad, back })
    }

    /// Evaluate the energy of one bitstring.
    pub fn energy(&self, bits: &[u8]) -> Result<BigInt> {
        if bits.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "bitstring length {} != {}",
                bits.len(),
                self.n
            )));
        }
        let mut e = self.e0.clone();
        for (j, &x) in bits.iter().enumerate() {
            if x != 0 {
                e += &self.linear[j];
                for (i, &y) in bits.iter().enumerate().take(j) {
                    if y != 0 {
                        e += &self.quad[i][j];
                    }
                }
            }
        }
        debug_assert!(!e.is_negative(), "energy is a squared distance");
        Ok(e)
    }

    /// Lattice point and basis coefficients of one bitstring:
    /// `b = b_cl + sum x_j sign_j d_j` and `e = U (c + kappa)`.
    pub fn config_to_lattice_point(&self, bits: &[u8]) -> Result<(Vec<BigInt>, Vec<BigInt>)> {
        if bits.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "bitstring length {} != {}",
                bits.len(),
                self.n
            )));
        }
        let mut point = self.back.b_cl.clone();
        for (j, &x) in bits.iter().enumerate() {
            if x != 0 {
                for (slot, d) in point.iter_mut().zip(&self.d_signed[j]) {
                    *slot += d;
                }
            }
        }
        let corrected: Vec<BigInt> = self
            .back
            .coeff_c
            .iter()
            .zip(bits)
            .zip(&self.back.signs)
            .map(|((c, &x), &s)| if x != 0 { c + BigInt::from(s) } else { c.clone() })
            .collect();
        let coeffs = crate::lattice::transform_times(&self.back.u, &corrected);
        Ok((point, coeffs))
    }

    /// True when every reachable energy provably fits in i128.
    fn fits_i128(&self) -> bool {
        let mut bound = self.e0.clone();
        for a in &self.linear {
            bound += a.abs();
        }
        for row in &self.quad {
            for w in row {
                bound += w.abs();
            }
        }
        bound < (BigInt::from(i128::MAX) >> 2)
    }
}

/// Build the Hamiltonian for an instance from its reduction and Babai data.
pub fn build_hamiltonian(
    instance: &CvpInstance,
    reduced: &ReducedBasis,
    babai: &BabaiResult,
) -> Result<DiagonalCvpHamiltonian> {
    let n = instance.rank();
    if reduced.reduced.len() != n
        || reduced.reduced.first().map_or(0, Vec::len) != n + 1
        || babai.coeff_c.len() != n
    {
        return Err(Error::InvalidArgument(
            "instance, reduction and Babai result disagree on dimensions".into(),
        ));
    }
    let g: Vec<BigInt> = instance
        .target
        .iter()
        .zip(&babai.b_cl)
        .map(|(t, b)| t - b)
        .collect();
    let d_signed: Vec<Vec<BigInt>> = reduced
        .reduced
        .iter()
        .zip(&babai.sign_vector)
        .map(|(d, &s)| d.iter().map(|x| x * BigInt::from(s)).collect())
        .collect();
    let back = BackMap {
        u: reduced.u.clone(),
        coeff_c: babai.coeff_c.clone(),
        signs: babai.sign_vector.clone(),
        b_cl: babai.b_cl.clone(),
    };
    DiagonalCvpHamiltonian::from_residual(g, d_signed, back)
}

const ENUM_QUBIT_CAP: usize = 26;

/// The `k` lowest-energy bitstrings by exhaustive Gray-code enumeration,
/// ties broken by ascending lexicographic bit order.
pub fn exact_low_energy_enum(
    h: &DiagonalCvpHamiltonian,
    k: usize,
) -> Result<Vec<Configuration>> {
    if h.n > ENUM_QUBIT_CAP {
        return Err(Error::Capacity(format!(
            "exact enumeration limited to {ENUM_QUBIT_CAP} qubits, got {}",
            h.n
        )));
    }
    let total = 1u64 << h.n;
    if k as u64 > total {
        return Err(Error::InvalidArgument(format!(
            "requested {k} configurations from a space of {total}"
        )));
    }
    if k == 0 {
        return Ok(Vec::new());
    }

    let masks = if h.fits_i128() {
        let a: Vec<i128> = h.linear.iter().map(|x| x.to_i128().unwrap()).collect();
        let w: Vec<Vec<i128>> = h
            .quad
            .iter()
            .map(|row| row.iter().map(|x| x.to_i128().unwrap()).collect())
            .collect();
        enum_masks(h.n, k, h.e0.to_i128().unwrap(), &a, &w)
    } else {
        enum_masks(h.n, k, h.e0.clone(), &h.linear, &h.quad)
    }?;

    masks
        .into_iter()
        .map(|mask| {
            let bits = mask_to_bits(mask, h.n);
            let energy = h.energy(&bits)?;
            Ok(Configuration { bits, energy })
        })
        .collect()
}

pub(crate) fn mask_to_bits(mask: u32, n: usize) -> Vec<u8> {
    (0..n).map(|j| ((mask >> j) & 1) as u8).collect()
}

/// Key under which bitstrings compare lexicographically: qubit 1 is the
/// most significant position.
fn lex_key(mask: u32, n: usize) -> u32 {
    mask.reverse_bits() >> (32 - n)
}

trait EnumEnergy: Clone + Ord {
    fn add(&mut self, other: &Self);
    fn sub(&mut self, other: &Self);
    fn is_neg(&self) -> bool;
}

impl EnumEnergy for i128 {
    fn add(&mut self, other: &Self) {
        *self += other;
    }
    fn sub(&mut self, other: &Self) {
        *self -= other;
    }
    fn is_neg(&self) -> bool {
        *self < 0
    }
}

impl EnumEnergy for BigInt {
    fn add(&mut self, other: &Self) {
        *self += other;
    }
    fn sub(&mut self, other: &Self) {
        *self -= other;
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
}

/// Gray-code walk over all 2^n bitstrings keeping the k best
/// (energy, lex-order) pairs.
fn enum_masks<T: EnumEnergy>(
    n: usize,
    k: usize,
    e0: T,
    a: &[T],
    w: &[Vec<T>],
) -> Result<Vec<u32>> {
    // Max-heap of the k smallest seen so far.
    let mut heap: BinaryHeap<(T, u32, u32)> = BinaryHeap::with_capacity(k + 1);
    let mut push = |energy: T, mask: u32| -> Result<()> {
        if energy.is_neg() {
            return Err(Error::Internal(
                "negative configuration energy: arithmetic overflow".into(),
            ));
        }
        let entry = (energy, lex_key(mask, n), mask);
        if heap.len() < k {
            heap.push(entry);
        } else if let Some(top) = heap.peek() {
            if entry < *top {
                heap.pop();
                heap.push(entry);
            }
        }
        Ok(())
    };

    let mut energy = e0;
    let mut flip_gain = a.to_vec();
    let mut mask = 0u32;
    push(energy.clone(), mask)?;

    for step in 1u64..(1u64 << n) {
        let j = step.trailing_zeros() as usize;
        if mask & (1 << j) == 0 {
            mask |= 1 << j;
            energy.add(&flip_gain[j]);
            for (i, gain) in flip_gain.iter_mut().enumerate() {
                if i != j {
                    gain.add(&w[i][j]);
                }
            }
        } else {
            mask &= !(1 << j);
            energy.sub(&flip_gain[j]);
            for (i, gain) in flip_gain.iter_mut().enumerate() {
                if i != j {
                    gain.sub(&w[i][j]);
                }
            }
        }
        push(energy.clone(), mask)?;
    }

    let mut best = heap.into_vec();
    best.sort();
    Ok(best.into_iter().map(|(_, _, mask)| mask).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{babai_nearest_plane, basis_times, build_cvp_instance, lll_reduce};
    use crate::numtheory::{generate_prime_basis, generate_rsa_key};
    use crate::rng::SplitMix64;
    use num_bigint::BigInt;
    use num_traits::One;

    fn one_qubit_example() -> DiagonalCvpHamiltonian {
        let g = vec![BigInt::one(), BigInt::zero()];
        let d = vec![vec![BigInt::one(), BigInt::zero()]];
        let back = BackMap {
            u: vec![vec![BigInt::one()]],
            coeff_c: vec![BigInt::zero()],
            signs: vec![1],
            b_cl: vec![BigInt::zero(), BigInt::zero()],
        };
        DiagonalCvpHamiltonian::from_residual(g, d, back).unwrap()
    }

    fn pipeline(bits: u64, rank: usize, seed: u64) -> (CvpInstance, DiagonalCvpHamiltonian) {
        let key = generate_rsa_key(bits, seed).unwrap();
        let p1 = generate_prime_basis(rank, false).unwrap();
        let inst = build_cvp_instance(&key, &p1, 1.0, seed).unwrap();
        let red = lll_reduce(&inst.basis, 0.99).unwrap();
        let bab = babai_nearest_plane(&red, &inst.target).unwrap();
        let h = build_hamiltonian(&inst, &red, &bab).unwrap();
        (inst, h)
    }

    #[test]
    fn one_qubit_expansion() {
        let h = one_qubit_example();
        assert_eq!(h.e0, BigInt::one());
        assert_eq!(h.linear, vec![BigInt::from(-1)]);
        assert_eq!(h.energy(&[0]).unwrap(), BigInt::one());
        assert_eq!(h.energy(&[1]).unwrap(), BigInt::zero());
    }

    #[test]
    fn all_zeros_energy_is_babai_distance() {
        let (inst, h) = pipeline(16, 5, 3);
        let zeros = vec![0u8; 5];
        let expected: BigInt = inst
            .target
            .iter()
            .zip(&h.back.b_cl)
            .map(|(t, b)| {
                let d = t - b;
                &d * &d
            })
            .sum();
        assert_eq!(h.energy(&zeros).unwrap(), expected);
        assert_eq!(h.energy(&zeros).unwrap(), h.e0);
    }

    #[test]
    fn qubo_matches_direct_distance_all_bitstrings() {
        for seed in 0..8 {
            let (inst, h) = pipeline(14, 6, seed);
            for mask in 0u32..64 {
                let bits = mask_to_bits(mask, 6);
                let (point, coeffs) = h.config_to_lattice_point(&bits).unwrap();
                // B e = b exactly.
                assert_eq!(basis_times(&inst.basis, &coeffs), point);
                let direct: BigInt = inst
                    .target
                    .iter()
                    .zip(&point)
                    .map(|(t, b)| {
                        let d = t - b;
                        &d * &d
                    })
                    .sum();
                assert_eq!(h.energy(&bits).unwrap(), direct, "mask {mask} seed {seed}");
            }
        }
    }

    #[test]
    fn zero_config_maps_to_babai_point() {
        let (_, h) = pipeline(18, 5, 11);
        let (point, coeffs) = h.config_to_lattice_point(&[0; 5]).unwrap();
        assert_eq!(point, h.back.b_cl);
        assert_eq!(
            coeffs,
            crate::lattice::transform_times(&h.back.u, &h.back.coeff_c)
        );
    }

    #[test]
    fn enum_one_qubit() {
        let h = one_qubit_example();
        let out = exact_low_energy_enum(&h, 2).unwrap();
        assert_eq!(out[0].bits, vec![1]);
        assert_eq!(out[0].energy, BigInt::zero());
        assert_eq!(out[1].bits, vec![0]);
        assert_eq!(out[1].energy, BigInt::one());
    }

    #[test]
    fn enum_full_spectrum_sorted_and_complete() {
        let (_, h) = pipeline(16, 6, 5);
        let all = exact_low_energy_enum(&h, 64).unwrap();
        assert_eq!(all.len(), 64);
        for pair in all.windows(2) {
            assert!(pair[0].energy <= pair[1].energy);
            if pair[0].energy == pair[1].energy {
                assert!(pair[0].bits < pair[1].bits, "lexicographic tie-break");
            }
        }
        let mut masks: Vec<Vec<u8>> = all.iter().map(|c| c.bits.clone()).collect();
        masks.sort();
        masks.dedup();
        assert_eq!(masks.len(), 64);
        // Ground energy never exceeds the Babai (all-zeros) energy.
        assert!(all[0].energy <= h.e0);
    }

    #[test]
    fn enum_prefix_of_full_spectrum() {
        let (_, h) = pipeline(14, 5, 9);
        let all = exact_low_energy_enum(&h, 32).unwrap();
        let top = exact_low_energy_enum(&h, 7).unwrap();
        assert_eq!(&all[..7], &top[..]);
    }

    #[test]
    fn enum_rejects_oversized_requests() {
        let (_, h) = pipeline(14, 5, 1);
        assert!(matches!(
            exact_low_energy_enum(&h, 33),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn enum_qubit_cap() {
        let g = vec![BigInt::zero(); 28];
        let d: Vec<Vec<BigInt>> = (0..27).map(|_| vec![BigInt::zero(); 28]).collect();
        let back = BackMap {
            u: (0..27).map(|_| vec![BigInt::zero(); 27]).collect(),
            coeff_c: vec![BigInt::zero(); 27],
            signs: vec![1; 27],
            b_cl: vec![BigInt::zero(); 28],
        };
        let h = DiagonalCvpHamiltonian::from_residual(g, d, back).unwrap();
        assert!(matches!(exact_low_energy_enum(&h, 1), Err(Error::Capacity(_))));
    }

    #[test]
    fn qubit_relabeling_preserves_spectrum() {
        let (_, h) = pipeline(16, 6, 21);
        let n = h.n;
        let mut perm: Vec<usize> = (0..n).collect();
        SplitMix64::new(4).shuffle(&mut perm);

        let mut quad = vec![vec![BigInt::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                quad[perm[i]][perm[j]] = h.quad[i][j].clone();
            }
        }
        let mut linear = vec![BigInt::zero(); n];
        let mut d_signed = vec![Vec::new(); n];
        for j in 0..n {
            linear[perm[j]] = h.linear[j].clone();
            d_signed[perm[j]] = h.d_signed[j].clone();
        }
        let permuted = DiagonalCvpHamiltonian {
            n,
            g: h.g.clone(),
            d_signed,
            e0: h.e0.clone(),
            linear,
            quad,
            back: h.back.clone(),
        };
        let spec_a: Vec<BigInt> = exact_low_energy_enum(&h, 1 << n)
            .unwrap()
            .into_iter()
            .map(|c| c.energy)
            .collect();
        let spec_b: Vec<BigInt> = exact_low_energy_enum(&permuted, 1 << n)
            .unwrap()
            .into_iter()
            .map(|c| c.energy)
            .collect();
        assert_eq!(spec_a, spec_b);
    }

    #[test]
    fn bigint_path_agrees_with_fast_path() {
        let (_, h) = pipeline(14, 4, 2);
        let fast = exact_low_energy_enum(&h, 16).unwrap();
        let slow_masks = enum_masks(h.n, 16, h.e0.clone(), &h.linear, &h.quad).unwrap();
        let fast_masks: Vec<u32> = fast
            .iter()
            .map(|c| {
                c.bits
                    .iter()
                    .enumerate()
                    .fold(0u32, |m, (j, &b)| m | ((b as u32) << j))
            })
            .collect();
        assert_eq!(fast_masks, slow_masks);
    }
}
