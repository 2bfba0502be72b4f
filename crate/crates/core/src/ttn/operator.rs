//! Tree-structured operator for the perturbed rounding Hamiltonian and the
//! variational ground-state sweeps.
//!
//! H' = E0 + sum_j a_j n_j + sum_{i<j} w_ij n_i n_j + sum_j hx_j sigma^x_j
//! is kept as coefficient tables; every subtree summarizes itself through a
//! renormalized environment (completed-term block plus one occupation
//! operator per open site), so the set carried across any bond grows only
//! linearly with the qubit count.

use ndarray::{Array2, Array3};

use super::{linalg, mode_mul, TtnState};
use crate::error::{Error, Result};
use crate::qubo::DiagonalCvpHamiltonian;
use crate::rng::SplitMix64;

const LANCZOS_TOL: f64 = 1e-8;
const DENSE_FALLBACK_DIM: usize = 512;

/// Random transverse-field amplitudes, bounded by `alpha` times the median
/// magnitude of the QUBO linear coefficients.
#[derive(Debug, Clone)]
pub struct PerturbationSpec {
    pub h_x: Vec<f64>,
    pub alpha: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    /// Draw amplitudes uniformly from [-alpha * median|a|, +alpha * median|a|].
    pub fn generate(h: &DiagonalCvpHamiltonian, alpha: f64, seed: u64) -> Self {
        let mut mags: Vec<f64> = h.linear.iter().map(|a| big_to_f64(a).abs()).collect();
        mags.sort_by(f64::total_cmp);
        let median = if mags.is_empty() {
            0.0
        } else if mags.len() % 2 == 1 {
            mags[mags.len() / 2]
        } else {
            0.5 * (mags[mags.len() / 2 - 1] + mags[mags.len() / 2])
        };
        let scale = alpha * median;
        let mut rng = SplitMix64::new(seed);
        let h_x = (0..h.n).map(|_| (2.0 * rng.next_f64() - 1.0) * scale).collect();
        Self { h_x, alpha, seed }
    }
}

fn big_to_f64(x: &num_bigint::BigInt) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::MAX)
}

fn big_to_f64_exact(x: &num_bigint::BigInt) -> Result<f64> {
    if x.bits() > 53 {
        return Err(Error::Overflow(format!(
            "coefficient {x} exceeds the exact f64 range of the tensor engine"
        )));
    }
    Ok(big_to_f64(x))
}

/// The perturbed Hamiltonian in coefficient form, ready for tree
/// contractions.
#[derive(Debug, Clone)]
pub struct CvpOperator {
    pub n: usize,
    pub e0: f64,
    pub a: Vec<f64>,
    /// Symmetric couplings, zero diagonal.
    pub w: Vec<Vec<f64>>,
    pub hx: Vec<f64>,
}

/// Attach the transverse-field perturbation to a diagonal Hamiltonian.
pub fn perturb(h: &DiagonalCvpHamiltonian, spec: &PerturbationSpec) -> Result<CvpOperator> {
    if spec.h_x.len() != h.n {
        return Err(Error::InvalidArgument(format!(
            "perturbation has {} amplitudes for {} qubits",
            spec.h_x.len(),
            h.n
        )));
    }
    let a = h.linear.iter().map(big_to_f64_exact).collect::<Result<Vec<_>>>()?;
    let w = h
        .quad
        .iter()
        .map(|row| row.iter().map(big_to_f64_exact).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(CvpOperator {
        n: h.n,
        e0: big_to_f64_exact(&h.e0)?,
        a,
        w,
        hx: spec.h_x.clone(),
    })
}

impl CvpOperator {
    /// Diagonal (unperturbed-plus-E0) energy of a bitstring in f64.
    pub fn diag_energy(&self, bits: &[u8]) -> f64 {
        let mut e = self.e0;
        for (j, &x) in bits.iter().enumerate() {
            if x != 0 {
                e += self.a[j];
                for (i, &y) in bits.iter().enumerate().take(j) {
                    if y != 0 {
                        e += self.w[i][j];
                    }
                }
            }
        }
        e
    }

    /// Dense matrix-vector product on the full 2^n space (test oracle).
    /// State index treats qubit 0 as the most significant bit.
    pub fn apply_dense(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if n > 20 || x.len() != 1 << n {
            return Err(Error::Capacity("dense oracle limited to 20 qubits".into()));
        }
        let mut y = vec![0.0f64; x.len()];
        for idx in 0..x.len() {
            let bits: Vec<u8> = (0..n).map(|s| ((idx >> (n - 1 - s)) & 1) as u8).collect();
            let mut acc = self.diag_energy(&bits) * x[idx];
            for (j, &hj) in self.hx.iter().enumerate() {
                if hj != 0.0 {
                    acc += hj * x[idx ^ (1 << (n - 1 - j))];
                }
            }
            y[idx] = acc;
        }
        Ok(y)
    }

    /// Largest renormalized-operator set carried across any bond of the
    /// given state's tree (the tree-operator analogue of a bond dimension).
    pub fn tree_bond_dimension(&self, state: &TtnState) -> usize {
        let mut max = 0usize;
        for node in 2..state.node_count() {
            let (first, span) = state.site_range(node);
            let inside = (first + span).min(self.n) - first.min(self.n);
            let outside = self.n - inside;
            // identity + completed block + one occupation per open site.
            max = max.max(2 + inside).max(2 + outside);
        }
        max.max(2)
    }
}

/// Renormalized operators living on one leg: the completed block `h` and
/// occupation operators for every open site behind the leg.
#[derive(Debug, Clone)]
struct EnvOps {
    h: Array2<f64>,
    occ: Vec<(usize, Array2<f64>)>,
}

impl EnvOps {
    fn trivial() -> Self {
        EnvOps { h: Array2::zeros((1, 1)), occ: Vec::new() }
    }
}

fn number_op() -> Array2<f64> {
    Array2::from_shape_vec((2, 2), vec![0.0, 0.0, 0.0, 1.0]).expect("shape")
}

fn sigma_x() -> Array2<f64> {
    Array2::from_shape_vec((2, 2), vec![0.0, 1.0, 1.0, 0.0]).expect("shape")
}

/// Leg operators for a physical site (dummy sites carry nothing).
fn phys_env(op: &CvpOperator, site: usize, dim: usize) -> EnvOps {
    if dim == 1 {
        return EnvOps::trivial();
    }
    let h = number_op() * op.a[site] + sigma_x() * op.hx[site];
    EnvOps { h, occ: vec![(site, number_op())] }
}

/// sum_k w[site][k] occ_k over an occupation list, if any coupling is live.
fn coupling_sum(op: &CvpOperator, site: usize, occ: &[(usize, Array2<f64>)]) -> Option<Array2<f64>> {
    let mut out: Option<Array2<f64>> = None;
    for (other, mat) in occ {
        let wjk = op.w[site][*other];
        if wjk == 0.0 {
            continue;
        }
        match &mut out {
            Some(acc) => *acc = &*acc + &(mat * wjk),
            None => out = Some(mat * wjk),
        }
    }
    out
}

/// Contract tensor pairs over the two closed axes, leaving `open` free:
/// G[i, i'] = sum_{closed} t[.. i ..] y[.. i' ..].
fn env_contract(t: &Array3<f64>, y: &Array3<f64>, open: usize) -> Array2<f64> {
    let (da, db, dp) = t.dim();
    let dims = [da, db, dp];
    let d = dims[open];
    let mut g = Array2::zeros((d, d));
    for a in 0..da {
        for b in 0..db {
            for p in 0..dp {
                let tv = t[[a, b, p]];
                if tv == 0.0 {
                    continue;
                }
                match open {
                    0 => {
                        for i in 0..d {
                            g[[a, i]] += tv * y[[i, b, p]];
                        }
                    }
                    1 => {
                        for i in 0..d {
                            g[[b, i]] += tv * y[[a, i, p]];
                        }
                    }
                    _ => {
                        for i in 0..d {
                            g[[p, i]] += tv * y[[a, b, i]];
                        }
                    }
                }
            }
        }
    }
    g
}

/// Effective Hamiltonian on one tensor, with cross couplings pre-summed.
struct EffectiveHam {
    ea: EnvOps,
    eb: EnvOps,
    ec: EnvOps,
    /// (A-occ index, summed partner on B).
    ab: Vec<(usize, Array2<f64>)>,
    ac: Vec<(usize, Array2<f64>)>,
    bc: Vec<(usize, Array2<f64>)>,
}

impl EffectiveHam {
    fn new(op: &CvpOperator, ea: EnvOps, eb: EnvOps, ec: EnvOps) -> Self {
        let mut ab = Vec::new();
        let mut ac = Vec::new();
        let mut bc = Vec::new();
        for (idx, (site, _)) in ea.occ.iter().enumerate() {
            if let Some(wsum) = coupling_sum(op, *site, &eb.occ) {
                ab.push((idx, wsum));
            }
            if let Some(wsum) = coupling_sum(op, *site, &ec.occ) {
                ac.push((idx, wsum));
            }
        }
        for (idx, (site, _)) in eb.occ.iter().enumerate() {
            if let Some(wsum) = coupling_sum(op, *site, &ec.occ) {
                bc.push((idx, wsum));
            }
        }
        EffectiveHam { ea, eb, ec, ab, ac, bc }
    }

    fn apply(&self, x: &Array3<f64>) -> Array3<f64> {
        let mut y = mode_mul(x, &self.ea.h, 0);
        y = y + mode_mul(x, &self.eb.h, 1);
        y = y + mode_mul(x, &self.ec.h, 2);
        for (idx, wsum) in &self.ab {
            let t = mode_mul(x, &self.ea.occ[*idx].1, 0);
            y = y + mode_mul(&t, wsum, 1);
        }
        for (idx, wsum) in &self.ac {
            let t = mode_mul(x, &self.ea.occ[*idx].1, 0);
            y = y + mode_mul(&t, wsum, 2);
        }
        for (idx, wsum) in &self.bc {
            let t = mode_mul(x, &self.eb.occ[*idx].1, 1);
            y = y + mode_mul(&t, wsum, 2);
        }
        y
    }
}

/// Result of a ground-state search.
#[derive(Debug)]
pub struct SearchOutcome {
    pub state: TtnState,
    /// Energy after every local tensor update (E0 included).
    pub local_energies: Vec<f64>,
    /// Energy at the end of each sweep.
    pub sweep_energies: Vec<f64>,
}

/// Subspace-enrichment noise used on all but the final sweep. Any nonzero
/// amplitude widens the bond subspaces handed to neighboring solves (the
/// escape from product-state traps of the diagonal landscape); it is kept
/// small so the energy rise it causes stays far inside the monotonicity
/// slack.
const SWEEP_NOISE: f64 = 1e-6;

/// Relative weight of the Hamiltonian-applied center mixed into the bond
/// subspace when the center moves down during non-final sweeps.
const EXPANSION_WEIGHT: f64 = 1e-5;

struct SweepCtx<'a> {
    op: &'a CvpOperator,
    state: &'a mut TtnState,
    up: Vec<Option<EnvOps>>,
    energies: Vec<f64>,
    noise: f64,
    rng: SplitMix64,
}

impl SweepCtx<'_> {
    fn child_env(&self, node: usize, axis: usize) -> EnvOps {
        if self.state.is_bottom(node) {
            let (first, _) = self.site_pair(node, axis);
            phys_env(self.op, first, self.state.phys_dim(first))
        } else {
            self.up[2 * node + axis].clone().expect("upward env computed")
        }
    }

    fn site_pair(&self, node: usize, axis: usize) -> (usize, usize) {
        let (first, _) = self.state.site_range(node);
        (first + axis, first + axis)
    }

    /// Project child environments through the (isometric) tensor at `node`
    /// to its parent leg.
    fn make_up(&self, node: usize) -> EnvOps {
        let t = &self.state.tensors[node];
        let ea = self.child_env(node, 0);
        let eb = self.child_env(node, 1);
        let mut hy = mode_mul(t, &ea.h, 0) + mode_mul(t, &eb.h, 1);
        for (site, oa) in &ea.occ {
            if let Some(wsum) = coupling_sum(self.op, *site, &eb.occ) {
                let tmp = mode_mul(t, oa, 0);
                hy = hy + mode_mul(&tmp, &wsum, 1);
            }
        }
        let h = env_contract(t, &hy, 2);
        let mut occ = Vec::with_capacity(ea.occ.len() + eb.occ.len());
        for (site, oa) in &ea.occ {
            occ.push((*site, env_contract(t, &mode_mul(t, oa, 0), 2)));
        }
        for (site, ob) in &eb.occ {
            occ.push((*site, env_contract(t, &mode_mul(t, ob, 1), 2)));
        }
        EnvOps { h, occ }
    }

    /// Environment seen by child `axis` of `node`: sibling subtree plus
    /// everything above, projected through the tensor at `node` (which must
    /// be isometric toward that child).
    fn make_down(&self, node: usize, axis: usize, down: &EnvOps) -> EnvOps {
        let t = &self.state.tensors[node];
        let sib_axis = 1 - axis;
        let es = self.child_env(node, sib_axis);
        let mut hy = mode_mul(t, &es.h, sib_axis) + mode_mul(t, &down.h, 2);
        for (site, os) in &es.occ {
            if let Some(wsum) = coupling_sum(self.op, *site, &down.occ) {
                let tmp = mode_mul(t, os, sib_axis);
                hy = hy + mode_mul(&tmp, &wsum, 2);
            }
        }
        let h = env_contract(t, &hy, axis);
        let mut occ = Vec::with_capacity(es.occ.len() + down.occ.len());
        for (site, os) in &es.occ {
            occ.push((*site, env_contract(t, &mode_mul(t, os, sib_axis), axis)));
        }
        for (site, od) in &down.occ {
            occ.push((*site, env_contract(t, &mode_mul(t, od, 2), axis)));
        }
        EnvOps { h, occ }
    }

    /// Replace the tensor at `node` (the current center) by the lowest
    /// eigenvector of its effective Hamiltonian.
    fn solve_local(&mut self, node: usize, down: &EnvOps) -> Result<()> {
        let ea = self.child_env(node, 0);
        let eb = self.child_env(node, 1);
        let eff = EffectiveHam::new(self.op, ea, eb, down.clone());
        let t = &self.state.tensors[node];
        let dims = t.dim();
        let dim = dims.0 * dims.1 * dims.2;
        let init = t.as_slice().expect("standard layout").to_vec();

        let apply = |x: &[f64], y: &mut [f64]| {
            let xt = Array3::from_shape_vec(dims, x.to_vec()).expect("shape");
            let yt = eff.apply(&xt);
            y.copy_from_slice(yt.as_slice().expect("standard layout"));
        };

        let solved = linalg::lanczos_lowest(dim, apply, &init, LANCZOS_TOL, 48.min(dim), 6);
        let (theta, vec) = match solved {
            Some(pair) => pair,
            None if dim <= DENSE_FALLBACK_DIM => {
                // Dense fallback: materialize the operator column by column.
                let mut dense = vec![0.0f64; dim * dim];
                let mut unit = vec![0.0f64; dim];
                let mut col = vec![0.0f64; dim];
                for j in 0..dim {
                    unit[j] = 1.0;
                    let xt = Array3::from_shape_vec(dims, unit.clone()).expect("shape");
                    let yt = eff.apply(&xt);
                    col.copy_from_slice(yt.as_slice().expect("layout"));
                    for i in 0..dim {
                        dense[i * dim + j] = col[i];
                    }
                    unit[j] = 0.0;
                }
                let (vals, vecs) = linalg::jacobi_eigen(&dense, dim);
                (vals[0], vecs[0].clone())
            }
            None => return Err(Error::Eigensolve { node }),
        };

        self.state.tensors[node] = Array3::from_shape_vec(dims, vec).expect("shape");
        self.energies.push(theta + self.op.e0);
        if self.noise > 0.0 {
            let sigma = self.noise / (dim as f64).sqrt();
            let t = &mut self.state.tensors[node];
            for x in t.iter_mut() {
                *x += sigma * self.rng.next_normal();
            }
            let nrm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 0.0 {
                t.mapv_inplace(|x| x / nrm);
            }
        }
        Ok(())
    }

    /// Move the center from `node` into child `axis`, expanding the kept
    /// bond subspace with a small admixture of the Hamiltonian-applied
    /// center. A trapped (rank-deficient) bond then offers the next local
    /// solve exactly the energy-relevant directions it was missing, at the
    /// price of an O(weight^2) state perturbation.
    fn move_down_expanded(&mut self, node: usize, axis: usize, down: &EnvOps, weight: f64) {
        let t = self.state.tensors[node].clone();
        let dims = t.dim();
        let dc = if axis == 0 { dims.0 } else { dims.1 };
        let rows = dims.0 * dims.1 * dims.2 / dc;
        if rows == dc {
            // Square bond: no room to expand, plain QR.
            self.state.push_leaf_ward(node, axis);
            return;
        }
        let ea = self.child_env(node, 0);
        let eb = self.child_env(node, 1);
        let eff = EffectiveHam::new(self.op, ea, eb, down.clone());
        let ht = eff.apply(&t);

        let m2 = super::group_child_last(&t, axis);
        let mut h2 = super::group_child_last(&ht, axis);
        let hnorm = h2.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = if hnorm > 0.0 { weight / hnorm } else { 0.0 };
        for x in h2.iter_mut() {
            *x *= scale;
        }
        // G = [M | scaled HM], rows x 2dc; keep the dc dominant left
        // singular directions via the Gram matrix.
        let cols = 2 * dc;
        let mut g = vec![0.0f64; rows * cols];
        for r in 0..rows {
            for c in 0..dc {
                g[r * cols + c] = m2[r * dc + c];
                g[r * cols + dc + c] = h2[r * dc + c];
            }
        }
        let mut gram = vec![0.0f64; cols * cols];
        for i in 0..cols {
            for j in i..cols {
                let mut acc = 0.0;
                for r in 0..rows {
                    acc += g[r * cols + i] * g[r * cols + j];
                }
                gram[i * cols + j] = acc;
                gram[j * cols + i] = acc;
            }
        }
        let (vals, vecs) = linalg::jacobi_eigen(&gram, cols);
        // Largest eigenvalues last; build U = G v / sqrt(s).
        let mut u = vec![0.0f64; rows * dc];
        for k in 0..dc {
            let pick = cols - 1 - k;
            let s = vals[pick].max(0.0);
            if s < 1e-28 {
                continue;
            }
            let inv = 1.0 / s.sqrt();
            let v = &vecs[pick];
            for r in 0..rows {
                let mut acc = 0.0;
                for c in 0..cols {
                    acc += g[r * cols + c] * v[c];
                }
                u[r * dc + k] = acc * inv;
            }
        }
        // Orthonormalize against numerical drift (and fill dead columns).
        let (q, _) = linalg::qr_thin(&u, rows, dc);
        // R = Q^T M2.
        let mut rmat = Array2::zeros((dc, dc));
        for i in 0..dc {
            for j in 0..dc {
                let mut acc = 0.0;
                for r in 0..rows {
                    acc += q[r * dc + i] * m2[r * dc + j];
                }
                rmat[[i, j]] = acc;
            }
        }
        self.state.install_leaf_ward(node, axis, &q, &rmat);
    }

    /// Pre-order traversal: update this tensor, then carry the center into
    /// each internal child and recurse.
    fn visit(&mut self, node: usize, down: &EnvOps) -> Result<()> {
        self.solve_local(node, down)?;
        if !self.state.is_bottom(node) {
            for axis in 0..2 {
                let child = 2 * node + axis;
                if self.noise > 0.0 {
                    self.move_down_expanded(node, axis, down, EXPANSION_WEIGHT);
                } else {
                    self.state.push_leaf_ward(node, axis);
                }
                let child_down = self.make_down(node, axis, down);
                self.visit(child, &child_down)?;
                self.state.push_root_ward(child);
                self.up[child] = Some(self.make_up(child));
            }
        }
        Ok(())
    }
}

/// Variational single-tensor sweeps toward the ground state of `op`.
///
/// All sweeps but the last run with a decaying uniform transverse-field
/// ramp on top of `op` (plus subspace enrichment): the purely diagonal
/// landscape cannot mix configurations on its own, and the anneal is what
/// lets the sweeps leave product-state traps. The final sweep uses the
/// exact operator; its per-update eigenvalues are the reported variational
/// energies. Runs at most `sweeps` traversals, stopping early when the
/// energy change between exact sweeps drops below `tol`.
pub fn ground_state_search(
    op: &CvpOperator,
    mut state: TtnState,
    sweeps: usize,
    tol: f64,
) -> Result<SearchOutcome> {
    if op.n != state.qubits() {
        return Err(Error::InvalidArgument(format!(
            "operator has {} qubits, state has {}",
            op.n,
            state.qubits()
        )));
    }
    state.canonicalize_to_root();

    let mut mags: Vec<f64> = op.a.iter().map(|x| x.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let median = if mags.is_empty() {
        0.0
    } else if mags.len() % 2 == 1 {
        mags[mags.len() / 2]
    } else {
        0.5 * (mags[mags.len() / 2 - 1] + mags[mags.len() / 2])
    };

    let total = sweeps.max(1);
    let mut local_energies: Vec<f64> = Vec::new();
    let mut sweep_energies: Vec<f64> = Vec::new();
    for sweep in 0..total {
        let last_sweep = sweep + 1 == total;
        let ramp = if last_sweep {
            0.0
        } else {
            median * 0.5f64.powi(sweep as i32)
        };
        let op_sweep = if ramp > 0.0 {
            let mut o = op.clone();
            for h in o.hx.iter_mut() {
                *h += ramp;
            }
            o
        } else {
            op.clone()
        };

        let n_pad = state.node_count();
        let noise_seed = crate::rng::derive_seed(state.seed, 0x736e_6f69 ^ sweep as u64);
        let mut ctx = SweepCtx {
            op: &op_sweep,
            state: &mut state,
            up: vec![None; n_pad],
            energies: Vec::new(),
            noise: if last_sweep { 0.0 } else { SWEEP_NOISE },
            rng: SplitMix64::new(noise_seed),
        };
        for node in (2..n_pad).rev() {
            ctx.up[node] = Some(ctx.make_up(node));
        }
        ctx.visit(1, &EnvOps::trivial())?;
        let ramped_last = *ctx.energies.last().expect("at least one update per sweep");
        let exact_sweep = ramp == 0.0;
        if exact_sweep {
            local_energies.extend_from_slice(&ctx.energies);
        }
        drop(ctx);

        let energy = if exact_sweep { ramped_last } else { expectation(op, &state)? };
        let done = exact_sweep
            && sweep_energies
                .last()
                .is_some_and(|prev: &f64| (prev - energy).abs() <= tol);
        sweep_energies.push(energy);
        if done {
            break;
        }
    }

    // Re-normalize the root against float drift.
    let nrm = state.tensors[1].iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm > 0.0 {
        state.tensors[1].mapv_inplace(|x| x / nrm);
    }
    Ok(SearchOutcome { state, local_energies, sweep_energies })
}

/// <psi|H'|psi> for a root-canonical state (diagnostic).
pub fn expectation(op: &CvpOperator, state: &TtnState) -> Result<f64> {
    if op.n != state.qubits() {
        return Err(Error::InvalidArgument("qubit count mismatch".into()));
    }
    let mut st = state.clone();
    st.canonicalize_to_root();
    let n_pad = st.node_count();
    let mut ctx = SweepCtx {
        op,
        state: &mut st,
        up: vec![None; n_pad],
        energies: Vec::new(),
        noise: 0.0,
        rng: SplitMix64::new(0),
    };
    for node in (2..n_pad).rev() {
        ctx.up[node] = Some(ctx.make_up(node));
    }
    let ea = ctx.child_env(1, 0);
    let eb = ctx.child_env(1, 1);
    let eff = EffectiveHam::new(op, ea, eb, EnvOps::trivial());
    let t = &ctx.state.tensors[1];
    let ht = eff.apply(t);
    let e: f64 = t
        .as_slice()
        .expect("layout")
        .iter()
        .zip(ht.as_slice().expect("layout"))
        .map(|(x, y)| x * y)
        .sum();
    Ok(e + op.e0)
}
