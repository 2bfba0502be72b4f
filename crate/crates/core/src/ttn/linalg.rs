//! Dense linear algebra used by the tree tensor network engine: thin
//! Householder QR, symmetric eigensolvers (tridiagonal QL and cyclic
//! Jacobi) and a restarted Lanczos extremal eigensolver.

/// Thin QR of a row-major `rows x cols` matrix with `rows >= cols`.
/// Returns (Q, R) with Q `rows x cols` having orthonormal columns and R
/// `cols x cols` upper triangular.
pub fn qr_thin(a: &[f64], rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(rows >= cols && a.len() == rows * cols);
    let mut work = a.to_vec();
    // Householder vectors stored below the diagonal, scaled so v[0] = 1.
    let mut betas = vec![0.0f64; cols];

    for k in 0..cols {
        let mut norm2 = 0.0;
        for i in k..rows {
            norm2 += work[i * cols + k] * work[i * cols + k];
        }
        let alpha = work[k * cols + k];
        let norm = norm2.sqrt();
        if norm == 0.0 {
            betas[k] = 0.0;
            continue;
        }
        let sign = if alpha >= 0.0 { 1.0 } else { -1.0 };
        let v0 = alpha + sign * norm;
        if v0 == 0.0 {
            betas[k] = 0.0;
            continue;
        }
        // v = (1, x[k+1..]/v0); beta = v0 / (sign * norm) adjusted below.
        for i in k + 1..rows {
            work[i * cols + k] /= v0;
        }
        betas[k] = v0 / (sign * norm);
        work[k * cols + k] = -sign * norm;

        // Apply reflector to the remaining columns.
        for j in k + 1..cols {
            let mut dot = work[k * cols + j];
            for i in k + 1..rows {
                dot += work[i * cols + k] * work[i * cols + j];
            }
            dot *= betas[k];
            work[k * cols + j] -= dot;
            for i in k + 1..rows {
                work[i * cols + j] -= dot * work[i * cols + k];
            }
        }
    }

    let mut r = vec![0.0f64; cols * cols];
    for i in 0..cols {
        for j in i..cols {
            r[i * cols + j] = work[i * cols + j];
        }
    }

    // Form thin Q by applying reflectors to the first `cols` identity columns.
    let mut q = vec![0.0f64; rows * cols];
    for j in 0..cols {
        q[j * cols + j] = 1.0;
    }
    for k in (0..cols).rev() {
        if betas[k] == 0.0 {
            continue;
        }
        for j in 0..cols {
            let mut dot = q[k * cols + j];
            for i in k + 1..rows {
                dot += work[i * cols + k] * q[i * cols + j];
            }
            dot *= betas[k];
            q[k * cols + j] -= dot;
            for i in k + 1..rows {
                q[i * cols + j] -= dot * work[i * cols + k];
            }
        }
    }
    (q, r)
}

/// Eigen-decomposition of a symmetric tridiagonal matrix by the implicit QL
/// algorithm. `diag` and `off` (off[i] couples i and i+1) are consumed.
/// Returns eigenvalues (ascending) and eigenvectors as rows.
pub fn tridiag_eigen(mut diag: Vec<f64>, mut off: Vec<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = diag.len();
    let mut z: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            row
        })
        .collect();
    if n <= 1 {
        return (diag, z);
    }
    off.push(0.0);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 64, "tridiagonal QL failed to converge");
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            for i in (l..m).rev() {
                let mut f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if r == 0.0 && m > l + 1 {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }

    // Sort ascending, carrying eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| z.iter().map(|row| row[i]).collect())
        .collect();
    (values, vectors)
}

/// Cyclic Jacobi eigensolver for small dense symmetric matrices
/// (row-major). Returns eigenvalues ascending and eigenvectors as rows.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() <= 1e-14 * (1.0 + frobenius(&m)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[x * n + x].total_cmp(&m[y * n + y]));
    let values: Vec<f64> = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
        .collect();
    (values, vectors)
}

fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Restarted Lanczos iteration for the lowest eigenpair of a symmetric
/// operator given through `apply`. Returns `None` when the residual
/// tolerance cannot be met within the restart budget.
pub fn lanczos_lowest(
    dim: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    init: &[f64],
    tol: f64,
    max_krylov: usize,
    max_restarts: usize,
) -> Option<(f64, Vec<f64>)> {
    assert_eq!(init.len(), dim);
    let mut start = init.to_vec();
    if norm(&start) < 1e-300 {
        start = vec![0.0; dim];
        start[0] = 1.0;
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for _restart in 0..max_restarts {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();

        let nrm = norm(&start);
        let mut v = start.clone();
        for x in v.iter_mut() {
            *x /= nrm;
        }
        basis.push(v);

        let mut w = vec![0.0f64; dim];
        let kmax = max_krylov.min(dim);
        for k in 0..kmax {
            apply(&basis[k], &mut w);
            let alpha = dot(&basis[k], &w);
            alphas.push(alpha);
            axpy(&mut w, -alpha, &basis[k]);
            if k > 0 {
                let beta_prev = betas[k - 1];
                axpy(&mut w, -beta_prev, &basis[k - 1]);
            }
            // Full reorthogonalization, twice for safety.
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    axpy(&mut w, -c, b);
                }
            }
            let beta = norm(&w);
            if k + 1 == kmax || beta < 1e-14 * (1.0 + alphas[0].abs()) {
                break;
            }
            betas.push(beta);
            let mut next = w.clone();
            for x in next.iter_mut() {
                *x /= beta;
            }
            basis.push(next);
        }

        let k = alphas.len();
        let (vals, vecs) = tridiag_eigen(alphas.clone(), betas.clone());
        let theta = vals[0];
        let mut ritz = vec![0.0f64; dim];
        for (coeff, b) in vecs[0].iter().take(k).zip(&basis) {
            axpy(&mut ritz, *coeff, b);
        }
        let rn = norm(&ritz);
        for x in ritz.iter_mut() {
            *x /= rn;
        }
        apply(&ritz, &mut w);
        axpy(&mut w, -theta, &ritz);
        let residual = norm(&w);

        let good = residual <= tol * theta.abs().max(1.0);
        match &best {
            Some((b, _)) if *b <= theta && !good => {}
            _ => best = Some((theta, ritz.clone())),
        }
        if good {
            return Some((theta, ritz));
        }
        start = ritz;
    }
    // Signal non-convergence; the caller decides on a dense fallback.
    let _ = best;
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize) -> Vec<f64> {
        (0..rows * cols).map(|_| rng.next_normal()).collect()
    }

    fn random_symmetric(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let x = rng.next_normal();
                a[i * n + j] = x;
                a[j * n + i] = x;
            }
        }
        a
    }

    #[test]
    fn qr_reconstructs_and_is_orthonormal() {
        let mut rng = SplitMix64::new(3);
        for &(rows, cols) in &[(4usize, 4usize), (8, 3), (16, 16), (9, 1)] {
            let a = random_matrix(&mut rng, rows, cols);
            let (q, r) = qr_thin(&a, rows, cols);
            // Q^T Q = I.
            for i in 0..cols {
                for j in 0..cols {
                    let mut d = 0.0;
                    for k in 0..rows {
                        d += q[k * cols + i] * q[k * cols + j];
                    }
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((d - expect).abs() < 1e-10, "QtQ[{i}][{j}] = {d}");
                }
            }
            // QR = A.
            for i in 0..rows {
                for j in 0..cols {
                    let mut d = 0.0;
                    for k in 0..cols {
                        d += q[i * cols + k] * r[k * cols + j];
                    }
                    assert!((d - a[i * cols + j]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn qr_handles_rank_deficiency() {
        // Second column is a multiple of the first.
        let a = vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        let (q, _r) = qr_thin(&a, 3, 2);
        for i in 0..2 {
            let mut d = 0.0;
            for k in 0..3 {
                d += q[k * 2 + i] * q[k * 2 + i];
            }
            assert!((d - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn tridiag_known_spectrum() {
        // Laplacian-like tridiagonal (2 on diag, -1 off) has eigenvalues
        // 2 - 2 cos(k pi / (n+1)).
        let n = 8;
        let (vals, vecs) = tridiag_eigen(vec![2.0; n], vec![-1.0; n - 1]);
        for (k, v) in vals.iter().enumerate() {
            let expect = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((v - expect).abs() < 1e-10);
        }
        // Eigenvector check: T v = lambda v.
        let t_apply = |x: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let mut y = 2.0 * x[i];
                    if i > 0 {
                        y -= x[i - 1];
                    }
                    if i + 1 < n {
                        y -= x[i + 1];
                    }
                    y
                })
                .collect()
        };
        for (v, vec) in vals.iter().zip(&vecs) {
            let yv = t_apply(vec);
            for (a, b) in yv.iter().zip(vec) {
                assert!((a - v * b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn jacobi_agrees_with_tridiagonal() {
        let n = 6;
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            dense[i * n + i] = 2.0;
            if i + 1 < n {
                dense[i * n + i + 1] = -1.0;
                dense[(i + 1) * n + i] = -1.0;
            }
        }
        let (jv, _) = jacobi_eigen(&dense, n);
        let (tv, _) = tridiag_eigen(vec![2.0; n], vec![-1.0; n - 1]);
        for (a, b) in jv.iter().zip(&tv) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn lanczos_matches_jacobi_on_random_symmetric() {
        let mut rng = SplitMix64::new(17);
        for n in [8usize, 24, 60] {
            let a = random_symmetric(&mut rng, n);
            let (jv, _) = jacobi_eigen(&a, n);
            let init: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
            let (theta, vec) = lanczos_lowest(
                n,
                |x, y| {
                    for i in 0..n {
                        y[i] = dot(&a[i * n..(i + 1) * n], x);
                    }
                },
                &init,
                1e-10,
                40,
                8,
            )
            .expect("lanczos converges");
            assert!((theta - jv[0]).abs() < 1e-8, "n = {n}: {theta} vs {}", jv[0]);
            assert!((norm(&vec) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn lanczos_with_large_constant_shift() {
        // Shifted spectra keep eigenvectors; tolerance is relative to theta.
        let n = 12;
        let mut rng = SplitMix64::new(5);
        let mut a = random_symmetric(&mut rng, n);
        for i in 0..n {
            a[i * n + i] += 1e7;
        }
        let (jv, _) = jacobi_eigen(&a, n);
        let init: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
        let (theta, _) = lanczos_lowest(
            n,
            |x, y| {
                for i in 0..n {
                    y[i] = dot(&a[i * n..(i + 1) * n], x);
                }
            },
            &init,
            1e-9,
            40,
            8,
        )
        .unwrap();
        assert!((theta - jv[0]).abs() / jv[0].abs() < 1e-9);
    }
}
