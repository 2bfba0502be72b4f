//! Binary tree tensor network states over n qubits.
//!
//! The tree is a perfect binary tree over `n_pad = n.next_power_of_two()`
//! leaf slots; slots beyond the real qubit count are dummy sites of physical
//! dimension 1 (pinned to |0>) so they never contribute branches. Tensors
//! sit at internal nodes in heap order (root = 1, children of i are 2i and
//! 2i+1); bottom-layer tensors take two physical legs, every tensor has a
//! parent leg (dimension 1 at the root).
//!
//! States are kept canonical toward the root: every non-center tensor is an
//! isometry from its children legs to its parent leg, which makes norms,
//! marginals and sampling cheap.

pub mod linalg;
mod operator;
mod sample;

pub use operator::{
    expectation, ground_state_search, perturb, CvpOperator, PerturbationSpec, SearchOutcome,
};
pub use sample::{sample_distinct, SampledConfig};

use ndarray::{Array2, Array3};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

const DENSE_ORACLE_CAP: usize = 20;

/// Tree tensor network state with bond dimension capped at `m`.
#[derive(Debug, Clone)]
pub struct TtnState {
    pub(crate) n: usize,
    pub(crate) n_pad: usize,
    pub(crate) m: usize,
    /// Tensors indexed by heap node id; slot 0 is unused.
    pub(crate) tensors: Vec<Array3<f64>>,
    pub(crate) seed: u64,
}

impl TtnState {
    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn bond_limit(&self) -> usize {
        self.m
    }

    /// Largest bond dimension actually present.
    pub fn max_bond_dim(&self) -> usize {
        (2..self.n_pad)
            .map(|node| self.tensors[node].dim().2)
            .max()
            .unwrap_or(1)
    }

    pub(crate) fn node_count(&self) -> usize {
        self.n_pad
    }

    pub(crate) fn is_bottom(&self, node: usize) -> bool {
        node >= self.n_pad / 2
    }

    pub(crate) fn phys_dim(&self, site: usize) -> usize {
        if site < self.n {
            2
        } else {
            1
        }
    }

    /// Leaf slots covered by the subtree of `node`.
    pub(crate) fn site_range(&self, node: usize) -> (usize, usize) {
        let depth = node.ilog2();
        let span = self.n_pad >> depth;
        let first = (node - (1 << depth)) * span;
        (first, span)
    }

    fn real_sites_below(&self, node: usize) -> usize {
        let (first, span) = self.site_range(node);
        (first + span).min(self.n) - first.min(self.n)
    }

    /// Dimension of the bond between `node` and its parent.
    pub(crate) fn bond_dim(&self, node: usize) -> usize {
        if node <= 1 {
            return 1;
        }
        let inside = self.real_sites_below(node);
        let outside = self.n - inside;
        let cap = inside.min(outside).min(25);
        self.m.min(1 << cap).max(1)
    }

    /// (left, right, parent) leg dimensions of the tensor at `node`.
    pub(crate) fn leg_dims(&self, node: usize) -> (usize, usize, usize) {
        let dp = self.bond_dim(node);
        if self.is_bottom(node) {
            let (first, _) = self.site_range(node);
            (self.phys_dim(first), self.phys_dim(first + 1), dp)
        } else {
            (self.bond_dim(2 * node), self.bond_dim(2 * node + 1), dp)
        }
    }

    /// QR the tensor at `node` toward its parent, absorbing R upward.
    pub(crate) fn push_root_ward(&mut self, node: usize) {
        debug_assert!(node >= 2);
        let t = &self.tensors[node];
        let (dl, dr, dp) = t.dim();
        let (q, r) = linalg::qr_thin(t.as_slice().expect("standard layout"), dl * dr, dp);
        self.tensors[node] = Array3::from_shape_vec((dl, dr, dp), q).expect("shape");
        let rmat = Array2::from_shape_vec((dp, dp), r).expect("shape");
        let parent = node / 2;
        let axis = if node % 2 == 0 { 0 } else { 1 };
        self.tensors[parent] = mode_mul(&self.tensors[parent], &rmat, axis);
    }

    /// QR the tensor at `parent` toward child leg `axis`, absorbing R into
    /// that child. Used to move the canonical center down.
    pub(crate) fn push_leaf_ward(&mut self, parent: usize, axis: usize) {
        let child = 2 * parent + axis;
        debug_assert!(!self.is_bottom(parent));
        let t = &self.tensors[parent];
        let dims = t.dim();
        let dc = if axis == 0 { dims.0 } else { dims.1 };
        let flat = group_child_last(t, axis);
        let rows = dims.0 * dims.1 * dims.2 / dc;
        let (q, r) = linalg::qr_thin(&flat, rows, dc);
        self.tensors[parent] = ungroup_child_last(&q, dims, axis);
        let rmat = Array2::from_shape_vec((dc, dc), r).expect("shape");
        // R sits between the new isometry and the child's parent leg.
        self.tensors[child] = mode_mul(&self.tensors[child], &rmat, 2);
    }

    /// Replace the tensor at `parent` by a given isometry toward child leg
    /// `axis` and push the matching R factor into that child.
    pub(crate) fn install_leaf_ward(
        &mut self,
        parent: usize,
        axis: usize,
        isometry: &[f64],
        r: &Array2<f64>,
    ) {
        let child = 2 * parent + axis;
        let dims = self.tensors[parent].dim();
        self.tensors[parent] = ungroup_child_last(isometry, dims, axis);
        self.tensors[child] = mode_mul(&self.tensors[child], r, 2);
    }

    /// Bring the state into root-canonical form with unit norm.
    pub(crate) fn canonicalize_to_root(&mut self) {
        for node in (2..self.n_pad).rev() {
            self.push_root_ward(node);
        }
        let nrm = self.tensors[1].iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 0.0 {
            self.tensors[1].mapv_inplace(|x| x / nrm);
        }
    }

    /// <x|psi> by bottom-up contraction.
    pub fn amplitude(&self, bits: &[u8]) -> Result<f64> {
        if bits.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "bitstring length {} != {}",
                bits.len(),
                self.n
            )));
        }
        let mut vecs: Vec<Vec<f64>> = vec![Vec::new(); self.n_pad];
        for node in (1..self.n_pad).rev() {
            let t = &self.tensors[node];
            let (dl, dr, dp) = t.dim();
            let v = if self.is_bottom(node) {
                let (first, _) = self.site_range(node);
                let xl = if first < self.n { bits[first] as usize } else { 0 };
                let xr = if first + 1 < self.n { bits[first + 1] as usize } else { 0 };
                if xl >= dl || xr >= dr {
                    return Err(Error::InvalidArgument("bit out of range".into()));
                }
                (0..dp).map(|p| t[[xl, xr, p]]).collect::<Vec<f64>>()
            } else {
                let vl = &vecs[2 * node];
                let vr = &vecs[2 * node + 1];
                let mut v = vec![0.0; dp];
                for (a, &la) in vl.iter().enumerate() {
                    if la == 0.0 {
                        continue;
                    }
                    for (b, &rb) in vr.iter().enumerate() {
                        let c = la * rb;
                        if c == 0.0 {
                            continue;
                        }
                        for (p, slot) in v.iter_mut().enumerate() {
                            *slot += c * t[[a, b, p]];
                        }
                    }
                }
                v
            };
            vecs[node] = v;
        }
        Ok(vecs[1][0])
    }

    /// Full amplitude vector (test oracle; index has qubit 0 as the most
    /// significant bit). Guarded to small qubit counts.
    pub fn dense_amplitudes(&self) -> Result<Vec<f64>> {
        if self.n > DENSE_ORACLE_CAP {
            return Err(Error::Capacity(format!(
                "dense contraction limited to {DENSE_ORACLE_CAP} qubits"
            )));
        }
        // mats[node]: (2^{real sites below}) x dp.
        let mut mats: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.n_pad];
        for node in (1..self.n_pad).rev() {
            let t = &self.tensors[node];
            let (dl, dr, dp) = t.dim();
            let m = if self.is_bottom(node) {
                let mut m = vec![vec![0.0; dp]; dl * dr];
                for a in 0..dl {
                    for b in 0..dr {
                        for p in 0..dp {
                            m[a * dr + b][p] = t[[a, b, p]];
                        }
                    }
                }
                m
            } else {
                let ml = &mats[2 * node];
                let mr = &mats[2 * node + 1];
                let (rl, rr) = (ml.len(), mr.len());
                // tmp[sl][b][p] = sum_a ml[sl][a] t[a][b][p]
                let mut out = vec![vec![0.0; dp]; rl * rr];
                for (sl, mla) in ml.iter().enumerate() {
                    let mut tmp = vec![0.0; dr * dp];
                    for (a, &coeff) in mla.iter().enumerate() {
                        if coeff == 0.0 {
                            continue;
                        }
                        for b in 0..dr {
                            for p in 0..dp {
                                tmp[b * dp + p] += coeff * t[[a, b, p]];
                            }
                        }
                    }
                    for (sr, mrb) in mr.iter().enumerate() {
                        let slot = &mut out[sl * rr + sr];
                        for (b, &coeff) in mrb.iter().enumerate() {
                            if coeff == 0.0 {
                                continue;
                            }
                            for p in 0..dp {
                                slot[p] += coeff * tmp[b * dp + p];
                            }
                        }
                    }
                }
                out
            };
            mats[node] = m;
        }
        Ok(mats[1].iter().map(|row| row[0]).collect())
    }

    /// Binary checkpoint. Layout: magic `TTNSTATE`, then little-endian u64
    /// fields (version, n, n_pad, m, seed), then per node (ids 1..n_pad in
    /// order) three u64 leg dimensions followed by the row-major f64 data.
    pub fn save_checkpoint<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(b"TTNSTATE")?;
        for v in [1u64, self.n as u64, self.n_pad as u64, self.m as u64, self.seed] {
            out.write_all(&v.to_le_bytes())?;
        }
        for node in 1..self.n_pad {
            let t = &self.tensors[node];
            let (dl, dr, dp) = t.dim();
            for d in [dl, dr, dp] {
                out.write_all(&(d as u64).to_le_bytes())?;
            }
            for x in t.iter() {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load_checkpoint<R: Read>(input: &mut R) -> Result<TtnState> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != b"TTNSTATE" {
            return Err(Error::InvalidArgument("not a TTN checkpoint".into()));
        }
        let read_u64 = |input: &mut R| -> Result<u64> {
            let mut buf = [0u8; 8];
            input.read_exact(&mut buf)?;
            Ok(u64::from_le_bytes(buf))
        };
        let version = read_u64(input)?;
        if version != 1 {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let n = read_u64(input)? as usize;
        let n_pad = read_u64(input)? as usize;
        let m = read_u64(input)? as usize;
        let seed = read_u64(input)?;
        if n < 2 || !n_pad.is_power_of_two() || n_pad != n.next_power_of_two() {
            return Err(Error::InvalidArgument("corrupt checkpoint header".into()));
        }
        let mut tensors = vec![Array3::zeros((1, 1, 1)); n_pad];
        let probe = TtnState { n, n_pad, m, tensors: Vec::new(), seed };
        for (node, slot) in tensors.iter_mut().enumerate().take(n_pad).skip(1) {
            let dl = read_u64(input)? as usize;
            let dr = read_u64(input)? as usize;
            let dp = read_u64(input)? as usize;
            if (dl, dr, dp) != probe.leg_dims(node) {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint dimensions at node {node} do not match topology"
                )));
            }
            let mut data = vec![0.0f64; dl * dr * dp];
            for x in data.iter_mut() {
                let mut buf = [0u8; 8];
                input.read_exact(&mut buf)?;
                *x = f64::from_le_bytes(buf);
            }
            *slot = Array3::from_shape_vec((dl, dr, dp), data).expect("shape");
        }
        Ok(TtnState { n, n_pad, m, tensors, seed })
    }
}

/// Random isometric initialization, deterministic per seed.
pub fn init_ttn(n: usize, m: usize, seed: u64) -> Result<TtnState> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 qubits".into()));
    }
    if m < 1 {
        return Err(Error::InvalidArgument("bond dimension must be >= 1".into()));
    }
    let n_pad = n.next_power_of_two();
    let mut state = TtnState { n, n_pad, m, tensors: vec![Array3::zeros((1, 1, 1)); n_pad], seed };
    for node in 1..n_pad {
        let (dl, dr, dp) = state.leg_dims(node);
        let mut rng = SplitMix64::new(derive_seed(seed, node as u64));
        let data: Vec<f64> = (0..dl * dr * dp).map(|_| rng.next_normal()).collect();
        state.tensors[node] = Array3::from_shape_vec((dl, dr, dp), data).expect("shape");
    }
    state.canonicalize_to_root();
    Ok(state)
}

/// Flatten a tensor with the chosen child axis as the trailing (column)
/// index: rows run over the remaining two legs in their original order.
pub(crate) fn group_child_last(t: &Array3<f64>, axis: usize) -> Vec<f64> {
    let (dl, dr, dp) = t.dim();
    let mut flat = Vec::with_capacity(dl * dr * dp);
    if axis == 0 {
        for b in 0..dr {
            for p in 0..dp {
                for a in 0..dl {
                    flat.push(t[[a, b, p]]);
                }
            }
        }
    } else {
        for a in 0..dl {
            for p in 0..dp {
                for b in 0..dr {
                    flat.push(t[[a, b, p]]);
                }
            }
        }
    }
    flat
}

/// Inverse of [`group_child_last`].
pub(crate) fn ungroup_child_last(flat: &[f64], dims: (usize, usize, usize), axis: usize) -> Array3<f64> {
    let (dl, dr, dp) = dims;
    let mut t = Array3::zeros(dims);
    let mut idx = 0;
    if axis == 0 {
        for b in 0..dr {
            for p in 0..dp {
                for a in 0..dl {
                    t[[a, b, p]] = flat[idx];
                    idx += 1;
                }
            }
        }
    } else {
        for a in 0..dl {
            for p in 0..dp {
                for b in 0..dr {
                    t[[a, b, p]] = flat[idx];
                    idx += 1;
                }
            }
        }
    }
    t
}

/// y[.. i ..] = sum_j M[i, j] x[.. j ..] along the given axis.
pub(crate) fn mode_mul(x: &Array3<f64>, m: &Array2<f64>, axis: usize) -> Array3<f64> {
    let (da, db, dp) = x.dim();
    let (rows, cols) = m.dim();
    // Size-1 axes can carry nonstandard strides (e.g. out of `dot`).
    let xcow = x.as_standard_layout();
    let mcow = m.as_standard_layout();
    let xs = xcow.as_slice().expect("standard layout");
    let ms = mcow.as_slice().expect("standard layout");
    match axis {
        0 => {
            assert_eq!(cols, da);
            let mut out = vec![0.0f64; rows * db * dp];
            let slab = db * dp;
            for a in 0..da {
                let src = &xs[a * slab..(a + 1) * slab];
                for i in 0..rows {
                    let coeff = ms[i * cols + a];
                    if coeff == 0.0 {
                        continue;
                    }
                    let dst = &mut out[i * slab..(i + 1) * slab];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += coeff * s;
                    }
                }
            }
            Array3::from_shape_vec((rows, db, dp), out).expect("shape")
        }
        1 => {
            assert_eq!(cols, db);
            let mut out = vec![0.0f64; da * rows * dp];
            for a in 0..da {
                for b in 0..db {
                    let src = &xs[(a * db + b) * dp..(a * db + b + 1) * dp];
                    for i in 0..rows {
                        let coeff = ms[i * cols + b];
                        if coeff == 0.0 {
                            continue;
                        }
                        let dst = &mut out[(a * rows + i) * dp..(a * rows + i + 1) * dp];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += coeff * s;
                        }
                    }
                }
            }
            Array3::from_shape_vec((da, rows, dp), out).expect("shape")
        }
        2 => {
            assert_eq!(cols, dp);
            let mut out = vec![0.0f64; da * db * rows];
            for ab in 0..da * db {
                let src = &xs[ab * dp..(ab + 1) * dp];
                let dst = &mut out[ab * rows..(ab + 1) * rows];
                for (i, slot) in dst.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (j, s) in src.iter().enumerate() {
                        acc += ms[i * cols + j] * s;
                    }
                    *slot = acc;
                }
            }
            Array3::from_shape_vec((da, db, rows), out).expect("shape")
        }
        _ => unreachable!("axis must be 0, 1 or 2"),
    }
}
