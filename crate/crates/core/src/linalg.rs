//! Dense linear-algebra helpers shared by the problem generators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::sampling::SeededRng;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub fn gaussian_vector(n: usize, rng: &mut SeededRng) -> Vector {
    Vector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    // filled row by row so the draw order matches a row-major listing
    let mut m = Matrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = StandardNormal.sample(rng);
        }
    }
    m
}

/// Haar-distributed orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut SeededRng) -> Matrix {
    let g = gaussian_matrix(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Symmetric matrix `U diag(eigs) Uᵀ` with a random orthogonal `U`.
pub fn with_spectrum(eigs: &[f64], rng: &mut SeededRng) -> Matrix {
    let n = eigs.len();
    let u = random_orthogonal(n, rng);
    let d = Matrix::from_diagonal(&Vector::from_column_slice(eigs));
    let p = &u * d * u.transpose();
    symmetrize(&p)
}

/// Eigenvalues uniform on `[lo, hi]`, then the smallest one replaced by `floor`.
pub fn uniform_spectrum(n: usize, lo: f64, hi: f64, floor: f64, rng: &mut SeededRng) -> Vec<f64> {
    let dist = Uniform::new_inclusive(lo, hi).expect("valid eigenvalue range");
    let mut eigs: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
    let (imin, _) = eigs
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    eigs[imin] = floor;
    eigs
}

pub fn symmetrize(p: &Matrix) -> Matrix {
    (p + p.transpose()) * 0.5
}

/// `(λ_min, λ_max)` of a symmetric matrix.
pub fn eig_extremes(p: &Matrix) -> (f64, f64) {
    let eig = SymmetricEigen::new(p.clone());
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of `A Aᵀ` (zero when `A` has more rows than columns).
pub fn lambda_min_gram(a: &Matrix) -> f64 {
    let gram = a * a.transpose();
    eig_extremes(&symmetrize(&gram)).0.max(0.0)
}

pub fn dist(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm()
}
