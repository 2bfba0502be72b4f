//! Distinct-state sampling: enumerate the most probable computational
//! basis states of a TTN with their exact Born probabilities, never
//! emitting the same bitstring twice.
//!
//! The search walks the tree's conditional marginals depth first, pruning
//! any prefix whose marginal falls below a threshold (or below the k-th
//! best complete state found so far). The threshold starts near 1 and is
//! lowered geometrically until enough states or enough accumulated
//! probability has been collected, which reaches tail states with
//! probabilities many orders of magnitude below the leading ones.

use ndarray::{Array2, Array3};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use super::TtnState;
use crate::error::{Error, Result};

/// One sampled bitstring with its Born probability under the state.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledConfig {
    pub bits: Vec<u8>,
    pub probability: f64,
}

/// f64 wrapper with a total order (all values here are finite and >= 0).
#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct Collector {
    k: usize,
    theta: f64,
    /// Min-heap keeping the k most probable complete states.
    heap: BinaryHeap<Reverse<(OrdF64, Vec<u8>)>>,
    heap_prob: f64,
    visited: usize,
    cap: usize,
    aborted: bool,
    bits: Vec<u8>,
}

impl Collector {
    fn new(k: usize, theta: f64, cap: usize) -> Self {
        Self {
            k,
            theta,
            heap: BinaryHeap::with_capacity(k + 1),
            heap_prob: 0.0,
            visited: 0,
            cap,
            aborted: false,
            bits: Vec::new(),
        }
    }

    /// Prefixes at or below this marginal cannot contribute.
    fn bound(&self) -> f64 {
        if self.aborted {
            return f64::INFINITY;
        }
        if self.heap.len() == self.k {
            let kth = self.heap.peek().map_or(0.0, |Reverse((p, _))| p.0);
            self.theta.max(kth)
        } else {
            self.theta
        }
    }

    fn offer(&mut self, p: f64) {
        self.visited += 1;
        if self.visited >= self.cap {
            self.aborted = true;
        }
        let entry = Reverse((OrdF64(p), self.bits.clone()));
        if self.heap.len() < self.k {
            self.heap_prob += p;
            self.heap.push(entry);
        } else if let Some(Reverse((minp, _))) = self.heap.peek() {
            if p > minp.0 {
                self.heap_prob += p - minp.0;
                self.heap.pop();
                self.heap.push(entry);
            }
        }
    }
}

enum Leg {
    Node(usize),
    Site(usize),
}

fn child_leg(state: &TtnState, node: usize, axis: usize) -> Leg {
    if state.is_bottom(node) {
        let (first, _) = state.site_range(node);
        Leg::Site(first + axis)
    } else {
        Leg::Node(2 * node + axis)
    }
}

/// rho projected onto the left child: G[a,a'] = sum T[a,b,p] rho[p,p'] T[a',b,p'].
fn left_density(t: &Array3<f64>, rho: &Array2<f64>) -> Array2<f64> {
    let y = super::mode_mul(t, rho, 2);
    let (da, db, dp) = t.dim();
    let mut g = Array2::zeros((da, da));
    for a in 0..da {
        for a2 in 0..da {
            let mut acc = 0.0;
            for b in 0..db {
                for p in 0..dp {
                    acc += t[[a, b, p]] * y[[a2, b, p]];
                }
            }
            g[[a, a2]] = acc;
        }
    }
    g
}

/// M[b,p] = sum_a v[a] T[a,b,p].
fn collapse_left(t: &Array3<f64>, v: &[f64]) -> Array2<f64> {
    let (da, db, dp) = t.dim();
    let mut m = Array2::zeros((db, dp));
    for (a, &coeff) in v.iter().enumerate().take(da) {
        if coeff == 0.0 {
            continue;
        }
        for b in 0..db {
            for p in 0..dp {
                m[[b, p]] += coeff * t[[a, b, p]];
            }
        }
    }
    m
}

/// M rho M^T.
fn sandwich(m: &Array2<f64>, rho: &Array2<f64>) -> Array2<f64> {
    let mr = m.dot(rho);
    mr.dot(&m.t())
}

type Emit<'e> = dyn FnMut(&TtnState, &mut Collector, &[f64], f64) + 'e;

/// Enumerate assignments of the subtree behind `leg`, invoking `emit` with
/// the subtree contraction vector and the marginal probability of the
/// assignment (given everything assigned so far).
fn enum_subtree(
    state: &TtnState,
    leg: Leg,
    rho: &Array2<f64>,
    ctx: &mut Collector,
    emit: &mut Emit<'_>,
) {
    match leg {
        Leg::Site(site) => {
            let dim = state.phys_dim(site);
            if dim == 1 {
                // Dummy site: single branch, nothing recorded.
                let p = rho[[0, 0]];
                if p > ctx.bound() {
                    emit(state, ctx, &[1.0], p);
                }
                return;
            }
            for x in 0..2usize {
                let p = rho[[x, x]];
                if p > ctx.bound() {
                    let mut v = [0.0, 0.0];
                    v[x] = 1.0;
                    ctx.bits.push(x as u8);
                    emit(state, ctx, &v, p);
                    ctx.bits.pop();
                }
            }
        }
        Leg::Node(node) => {
            let t = &state.tensors[node];
            let rho_left = left_density(t, rho);
            let mut left_emit = |st: &TtnState, ctx: &mut Collector, va: &[f64], _p: f64| {
                let m = collapse_left(&st.tensors[node], va);
                let rho_right = sandwich(&m, rho);
                let mut right_emit =
                    |st: &TtnState, ctx: &mut Collector, vb: &[f64], p: f64| {
                        let dp = m.dim().1;
                        let mut v = vec![0.0f64; dp];
                        for (b, &coeff) in vb.iter().enumerate() {
                            if coeff == 0.0 {
                                continue;
                            }
                            for (slot, mv) in v.iter_mut().zip(m.row(b)) {
                                *slot += coeff * mv;
                            }
                        }
                        emit(st, ctx, &v, p);
                    };
                enum_subtree(st, child_leg(st, node, 1), &rho_right, ctx, &mut right_emit);
            };
            enum_subtree(state, child_leg(state, node, 0), &rho_left, ctx, &mut left_emit);
        }
    }
}

/// Collect up to `k` pairwise-distinct bitstrings with the largest Born
/// probabilities, stopping early once the accumulated probability of the
/// collected set reaches `p_stop`.
pub fn sample_distinct(state: &TtnState, k: usize, p_stop: f64) -> Result<Vec<SampledConfig>> {
    if k == 0 {
        return Err(Error::InvalidArgument("need k >= 1".into()));
    }
    let n = state.qubits();
    if n < 63 && (k as u128) > (1u128 << n) {
        return Err(Error::Capacity(format!(
            "requested {k} distinct states from a space of {}",
            1u128 << n
        )));
    }
    let mut st = state.clone();
    st.canonicalize_to_root();

    let cap = k.saturating_mul(16).max(1 << 14);
    let mut theta = 0.25f64;
    let root_rho = Array2::from_shape_vec((1, 1), vec![1.0]).expect("shape");

    loop {
        let mut ctx = Collector::new(k, theta, cap);
        let mut final_emit = |_st: &TtnState, ctx: &mut Collector, _v: &[f64], p: f64| {
            ctx.offer(p);
        };
        enum_subtree(&st, Leg::Node(1), &root_rho, &mut ctx, &mut final_emit);

        let enough = ctx.heap.len() >= k || ctx.heap_prob >= p_stop;
        if enough || ctx.aborted || theta < 1e-18 {
            let mut out: Vec<SampledConfig> = ctx
                .heap
                .into_sorted_vec()
                .into_iter()
                .map(|Reverse((p, bits))| SampledConfig { bits, probability: p.0 })
                .collect();
            // Descending probability, ties by ascending bitstring.
            out.sort_by(|x, y| {
                y.probability
                    .total_cmp(&x.probability)
                    .then_with(|| x.bits.cmp(&y.bits))
            });
            out.truncate(k);

            let mut seen = HashSet::with_capacity(out.len());
            for s in &out {
                if !seen.insert(s.bits.clone()) {
                    return Err(Error::Internal("duplicate bitstring sampled".into()));
                }
            }
            return Ok(out);
        }
        theta /= 64.0;
    }
}
