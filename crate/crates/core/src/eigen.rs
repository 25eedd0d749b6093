//! Top-k eigenpairs of dense symmetric matrices.
//!
//! The main solver is a block Lanczos-style Krylov method with full
//! reorthogonalization and Rayleigh-Ritz extraction. It only touches the
//! matrix through products, converges on the algebraically largest
//! eigenvalues, and is deterministic for a given start seed regardless of
//! the number of worker threads. A dense solver is kept for small matrices,
//! both as fallback and as test oracle.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest matrix the dense fallback is allowed to handle.
pub const DENSE_LIMIT: usize = 2000;

const MAX_BLOCK: usize = 16;

/// Dense symmetric matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::contract(format!(
                "{n}x{n} matrix needs {} values, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(SymMatrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `y = A x`, rows in parallel; each row is a sequential dot product.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            *yi = dot(&self.data[i * n..(i + 1) * n], x);
        });
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Residual tolerance, relative to the largest Ritz value magnitude.
    pub tol: f64,
    /// Matrix-vector product budget; `None` means `10 * n`.
    pub max_products: Option<usize>,
    /// Seed for the start block.
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-10,
            max_products: None,
            seed: 0,
        }
    }
}

/// Eigenpairs sorted by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Flips the vector so its first clearly nonzero component is positive.
pub fn canonical_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return;
    }
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Top-`k` eigenpairs via the dense symmetric QR algorithm.
pub fn top_k_dense(a: &SymMatrix, k: usize) -> Result<EigenPairs> {
    let n = a.dim();
    if k == 0 || k > n {
        return Err(Error::contract(format!("requested {k} eigenpairs of a {n}x{n} matrix")));
    }
    let m = DMatrix::from_row_slice(n, n, a.data());
    let eig = SymmetricEigen::new(m);
    Ok(sorted_pairs(eig.eigenvalues.as_slice(), |i| {
        eig.eigenvectors.column(i).iter().copied().collect()
    }, k))
}

fn sorted_pairs(values: &[f64], vector: impl Fn(usize) -> Vec<f64>, k: usize) -> EigenPairs {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k);
    EigenPairs {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: order.iter().map(|&i| vector(i)).collect(),
    }
}

struct Krylov<'a> {
    a: &'a SymMatrix,
    basis: Vec<Vec<f64>>,
    images: Vec<Vec<f64>>,
    /// Projected matrix `Q^T A Q`, grown row by row.
    h: Vec<Vec<f64>>,
    products: usize,
}

impl<'a> Krylov<'a> {
    /// Orthonormalizes `v` against the basis (two Gram-Schmidt passes).
    /// Returns `None` when `v` lies numerically inside the current span.
    fn orthonormalize(&self, mut v: Vec<f64>, extra: &[Vec<f64>]) -> Option<Vec<f64>> {
        let before = norm(&v);
        if before == 0.0 {
            return None;
        }
        for _ in 0..2 {
            for q in self.basis.iter().chain(extra) {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let after = norm(&v);
        if after <= 1e-8 * before {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= after);
        Some(v)
    }

    fn push(&mut self, q: Vec<f64>) {
        let mut aq = vec![0.0; q.len()];
        self.a.apply(&q, &mut aq);
        self.products += 1;
        let m = self.basis.len();
        let new_row: Vec<f64> = self
            .basis
            .iter()
            .map(|b| dot(b, &aq))
            .chain(std::iter::once(dot(&q, &aq)))
            .collect();
        for (i, row) in self.h.iter_mut().enumerate() {
            row.push(new_row[i]);
        }
        self.h.push(new_row);
        debug_assert_eq!(self.h.len(), m + 1);
        self.basis.push(q);
        self.images.push(aq);
    }

    /// Rayleigh-Ritz on the current basis. Returns the top-k Ritz values,
    /// their coefficient vectors, the worst relative residual and the scale.
    fn ritz(&self, k: usize) -> (Vec<f64>, Vec<Vec<f64>>, f64, f64) {
        let m = self.basis.len();
        let h = DMatrix::from_fn(m, m, |i, j| 0.5 * (self.h[i][j] + self.h[j][i]));
        let eig = SymmetricEigen::new(h);
        let scale = eig
            .eigenvalues
            .iter()
            .fold(0.0f64, |s, v| s.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let pairs = sorted_pairs(eig.eigenvalues.as_slice(), |i| {
            eig.eigenvectors.column(i).iter().copied().collect()
        }, k.min(m));
        let n = self.a.dim();
        let worst = pairs
            .values
            .par_iter()
            .zip(&pairs.vectors)
            .map(|(&theta, s)| {
                let mut r = vec![0.0; n];
                for (j, &c) in s.iter().enumerate() {
                    axpy(c, &self.images[j], &mut r);
                    axpy(-theta * c, &self.basis[j], &mut r);
                }
                norm(&r) / scale
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(0.0f64, f64::max);
        (pairs.values, pairs.vectors, worst, scale)
    }

    fn lift(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.a.dim()];
        for (q, &c) in self.basis.iter().zip(coeffs) {
            axpy(c, q, &mut y);
        }
        let nrm = norm(&y);
        if nrm > 0.0 {
            y.iter_mut().for_each(|x| *x /= nrm);
        }
        y
    }
}

/// Top-`k` eigenpairs (largest algebraic eigenvalues) by block Krylov
/// iteration with full reorthogonalization.
pub fn top_k_lanczos(a: &SymMatrix, k: usize, opts: &EigenOptions) -> Result<EigenPairs> {
    let n = a.dim();
    if k == 0 || k > n {
        return Err(Error::contract(format!("requested {k} eigenpairs of a {n}x{n} matrix")));
    }
    let budget = opts.max_products.unwrap_or(10 * n);
    let block = k.clamp(1, MAX_BLOCK).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random_block = |count: usize| -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    };

    let mut kry = Krylov {
        a,
        basis: Vec::new(),
        images: Vec::new(),
        h: Vec::new(),
        products: 0,
    };
    let mut candidates = random_block(block);
    let mut next_check = k;
    let mut worst = f64::INFINITY;
    loop {
        let mut fresh: Vec<Vec<f64>> = Vec::new();
        for v in candidates {
            if kry.basis.len() + fresh.len() == n {
                break;
            }
            if let Some(q) = kry.orthonormalize(v, &fresh) {
                fresh.push(q);
            }
        }
        if fresh.is_empty() && kry.basis.len() < n {
            // the Krylov space became invariant; continue from new random directions
            candidates = random_block(block);
            if kry.products >= budget {
                break;
            }
            continue;
        }
        let first_new = kry.basis.len();
        for q in fresh {
            kry.push(q);
        }
        let m = kry.basis.len();
        if m >= next_check || m == n {
            let (values, coeffs, w, _) = kry.ritz(k);
            worst = w;
            if w <= opts.tol || m == n {
                let vectors = coeffs.iter().map(|c| kry.lift(c)).collect();
                return Ok(EigenPairs { values, vectors });
            }
            next_check = (m + block).max(m + m / 5);
        }
        if kry.products >= budget {
            break;
        }
        candidates = kry.images[first_new..].to_vec();
    }
    Err(Error::NoConvergence {
        iterations: kry.products,
        basis: kry.basis.len(),
        residual: worst,
        tolerance: opts.tol,
    })
}

/// Iterative solve with the dense solver as fallback for small matrices.
pub fn top_k(a: &SymMatrix, k: usize, opts: &EigenOptions) -> Result<EigenPairs> {
    match top_k_lanczos(a, k, opts) {
        Err(Error::NoConvergence { .. }) if a.dim() <= DENSE_LIMIT => top_k_dense(a, k),
        other => other,
    }
}
