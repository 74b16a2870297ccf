//! Dense linear-algebra helpers on top of nalgebra.
//!
//! Everything here is small-matrix machinery: the largest systems assembled
//! are the `n² × n²` Kronecker forms of Lyapunov equations, with `n` the
//! agent state dimension.

use nalgebra::{Complex, DMatrix, DVector};

use crate::scalar::{lit, Real};

/// Relative singular-value threshold below which a value counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-9;

const SCHUR_MAX_ITERATIONS: usize = 5_000;

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues<T: Real>(m: &DMatrix<T>) -> Vec<Complex<T>> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    if let Some(schur) = m
        .clone()
        .try_schur(T::default_epsilon(), SCHUR_MAX_ITERATIONS)
    {
        return schur.complex_eigenvalues().iter().copied().collect();
    }
    // The unshifted QR sweep can stall on exactly structured matrices such as
    // integer cyclic Laplacians; an orthogonal similarity breaks the symmetry.
    let n = m.nrows();
    let v = DVector::from_fn(n, |i, _| {
        lit::<T>(1.0 + 0.618_033_988_749_895 * (i as f64 + 1.0).sqrt())
    });
    let v = &v / v.norm();
    let q = DMatrix::identity(n, n) - (&v * v.transpose()) * lit::<T>(2.0);
    let rotated = &q * m * &q;
    rotated
        .clone()
        .try_schur(T::default_epsilon(), SCHUR_MAX_ITERATIONS * 10)
        .map(|s| s.complex_eigenvalues().iter().copied().collect())
        .unwrap_or_else(|| rotated.complex_eigenvalues().iter().copied().collect())
}

/// `|z|` for a complex eigenvalue.
pub fn modulus<T: Real>(z: &Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Largest real part over the spectrum, `-inf` for an empty matrix.
pub fn spectral_abscissa<T: Real>(m: &DMatrix<T>) -> T {
    eigenvalues(m)
        .into_iter()
        .map(|z| z.re)
        .fold(T::min_value().unwrap(), |a, b| if b > a { b } else { a })
}

/// Smallest real part over the spectrum, `+inf` for an empty matrix.
pub fn min_real_part<T: Real>(m: &DMatrix<T>) -> T {
    eigenvalues(m)
        .into_iter()
        .map(|z| z.re)
        .fold(T::max_value().unwrap(), |a, b| if b < a { b } else { a })
}

pub fn is_hurwitz<T: Real>(m: &DMatrix<T>) -> bool {
    spectral_abscissa(m) < T::zero()
}

/// Eigenvalues of the symmetric part `(m + mᵀ)/2`, ascending.
pub fn symmetric_eigenvalues<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    let sym = (m + m.transpose()) * lit::<T>(0.5);
    let mut ev: Vec<T> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    ev
}

pub fn sym_min_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    symmetric_eigenvalues(m)[0]
}

pub fn sym_max_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    *symmetric_eigenvalues(m).last().expect("non-empty matrix")
}

/// Singular values in descending order.
pub fn singular_values<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<T> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    sv
}

/// Induced 2-norm.
pub fn spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    singular_values(m).first().copied().unwrap_or_else(T::zero)
}

/// Number of singular values above `RANK_TOLERANCE · σ_max`.
pub fn numerical_rank<T: Real>(m: &DMatrix<T>) -> usize {
    let sv = singular_values(m);
    let Some(&largest) = sv.first() else {
        return 0;
    };
    if largest <= T::zero() {
        return 0;
    }
    let cutoff = largest * lit(RANK_TOLERANCE);
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Solves `m x = rhs` by LU; `None` when `m` is singular.
pub fn solve<T: Real>(m: &DMatrix<T>, rhs: &DMatrix<T>) -> Option<DMatrix<T>> {
    m.clone().lu().solve(rhs)
}

pub fn solve_vec<T: Real>(m: &DMatrix<T>, rhs: &DVector<T>) -> Option<DVector<T>> {
    m.clone().lu().solve(rhs)
}

/// Solves the continuous Lyapunov equation `aᵀx + x a + q = 0` through its
/// Kronecker form `(I ⊗ aᵀ + aᵀ ⊗ I) vec(x) = -vec(q)`. The result is
/// symmetrized when `q` is symmetric.
pub fn solve_lyapunov<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Option<DMatrix<T>> {
    let n = a.nrows();
    let at = a.transpose();
    let eye = DMatrix::<T>::identity(n, n);
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|&v| -v));
    let vec_x = op.lu().solve(&rhs)?;
    let x = DMatrix::from_column_slice(n, n, vec_x.as_slice());
    Some((&x + x.transpose()) * lit::<T>(0.5))
}

/// Symmetric part of a square matrix.
pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * lit::<T>(0.5)
}
