//! Lanczos iteration for the lowest eigenvalue of a Hermitian operator that
//! is only available through its action on vectors.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosOptions {
    /// Stop once successive lowest Ritz values differ by at most this much.
    pub tol: f64,
    pub max_iterations: usize,
    /// Seed of the pseudo-random start vector.
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 500,
            seed: 0x005e_ed1a_2c05,
        }
    }
}

/// Lowest eigenvalue of the `dim`-dimensional Hermitian operator `apply`,
/// where `apply(x, y)` must overwrite `y` with A·x.
///
/// Every new Krylov vector is reorthogonalized (twice) against the full
/// basis, so the tridiagonal projection stays faithful even after Ritz
/// values converge.
pub fn min_eigenvalue<F>(dim: usize, mut apply: F, opts: &LanczosOptions) -> Result<f64>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    if dim == 0 {
        return Err(Error::Size("lanczos on an empty space".into()));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 || opts.max_iterations == 0 {
        return Err(Error::Argument(format!(
            "lanczos needs tol > 0 and at least one iteration, got {opts:?}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);

    let steps = opts.max_iterations.min(dim);
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(steps);
    let mut alphas: Vec<f64> = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut previous = f64::INFINITY;

    for j in 0..steps {
        apply(&v, &mut w);
        let alpha = dot(&v, &w).re;
        axpy(-alpha, &v, &mut w);
        if let (Some(prev_v), Some(&beta)) = (basis.last(), betas.last()) {
            axpy(-beta, prev_v, &mut w);
        }
        basis.push(v);
        alphas.push(alpha);
        for _ in 0..2 {
            for q in &basis {
                let overlap = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= overlap * qi;
                }
            }
        }

        let ritz = tridiagonal_min_eigenvalue(&alphas, &betas);
        let beta = norm(&w);
        let scale = alphas.iter().map(|a| a.abs()).fold(ritz.abs(), f64::max).max(1.0);
        let exhausted = beta <= 1e-12 * scale || j + 1 == dim;
        if exhausted || (j > 0 && (ritz - previous).abs() <= opts.tol) {
            return Ok(ritz);
        }
        previous = ritz;
        betas.push(beta);
        v = w.iter().map(|x| x / beta).collect();
    }

    Err(Error::Convergence {
        best: previous,
        iterations: steps,
    })
}

/// Smallest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off` (length `diag.len() - 1`), by Sturm-count
/// bisection.
pub fn tridiagonal_min_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    debug_assert_eq!(off.len() + 1, diag.len());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &d) in diag.iter().enumerate() {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = off.get(i).map_or(0.0, |b| b.abs());
        lo = lo.min(d - left - right);
        hi = hi.max(d + left + right);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eigenvalues_below(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Number of eigenvalues strictly below `x` (Sturm sequence sign count).
fn eigenvalues_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for (i, &a) in diag.iter().enumerate() {
        let coupling = if i > 0 { off[i - 1] * off[i - 1] / d } else { 0.0 };
        d = a - x - coupling;
        if d == 0.0 {
            d = -f64::EPSILON * (a.abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(alpha: f64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * alpha;
    }
}
