//! Dense complex linear algebra helpers.
//!
//! Thin wrappers over nalgebra that pin down the deterministic conventions
//! used everywhere else: eigenvalues sorted descending, eigenvector phases
//! normalised so the first significant coordinate is real positive, and
//! rank cutoffs relative to the largest singular value.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::tol::RANK_CUTOFF_REL;

pub type C = Complex<f64>;
pub type CMatrix = DMatrix<C>;
pub type CVector = DVector<C>;

pub fn c(re: f64, im: f64) -> C {
    Complex::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(r: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(r, cols)
}

/// Frobenius norm.
pub fn fro_norm(m: &CMatrix) -> f64 {
    m.norm()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value; 0 for empty matrices. Computed as the square
/// root of the top eigenvalue of the hermitian Gram on the smaller side.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    let e = hermitian_eigen(&gram, EigenOrder::Descending);
    e.values.first().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Flatten a matrix into a column vector (column-major storage order).
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// `<a, b> = sum conj(a_i) b_i`, conjugate-linear in the first argument.
pub fn inner(a: &CVector, b: &CVector) -> C {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Kronecker product with the left factor major: `(i,j) -> i*d2 + j`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn phase_fix_column(col: &mut nalgebra::DVectorViewMut<C>) {
    let maxmag = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let thresh = 1e-12 * (1.0 + maxmag);
    for i in 0..col.len() {
        let z = col[i];
        if z.norm() > thresh {
            let phase = z / z.norm();
            let rot = phase.conj();
            for j in 0..col.len() {
                col[j] *= rot;
            }
            return;
        }
    }
}

/// Order used when sorting eigenvalues of a factorised Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenOrder {
    Descending,
    Ascending,
}

/// Eigendecomposition of a hermitian matrix with deterministic output:
/// eigenvalues sorted (descending by default), each eigenvector rotated so
/// its first significant coordinate is real positive. The input is
/// hermitised before factorisation.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(m: &CMatrix, order: EigenOrder) -> HermitianEigen {
    assert_eq!(m.nrows(), m.ncols(), "hermitian_eigen needs a square matrix");
    let n = m.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: zeros(0, 0),
        };
    }
    let herm = (m + m.adjoint()).scale(0.5);
    let se = herm.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    match order {
        EigenOrder::Descending => {
            idx.sort_by(|&i, &j| se.eigenvalues[j].partial_cmp(&se.eigenvalues[i]).unwrap())
        }
        EigenOrder::Ascending => {
            idx.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap())
        }
    }
    let values: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = zeros(n, n);
    for (dst, &src) in idx.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
        phase_fix_column(&mut vectors.column_mut(dst));
    }
    HermitianEigen { values, vectors }
}

/// Smallest eigenvalue of the hermitian part of `m`.
pub fn min_eig_hermitian(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let e = hermitian_eigen(m, EigenOrder::Descending);
    *e.values.last().unwrap()
}

/// Thin singular value decomposition with deterministic conventions:
/// singular values descending, `u` columns phase-fixed and `v` columns
/// rotated to match, so `m ≈ u * diag(s) * v^*` always holds.
///
/// Computed by one-sided Jacobi (Hestenes) column orthogonalization, which
/// stays accurate on rank-deficient input where bidiagonalization-based
/// complex solvers can lose whole directions.
pub struct ThinSvd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

/// One-sided Jacobi on the columns of `a` (nrows >= ncols assumed
/// profitable but not required): returns `(b, v)` with `b = a v`, the
/// columns of `b` pairwise orthogonal.
fn jacobi_orthogonalize(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.ncols();
    let mut b = a.clone();
    let mut v = identity(n);
    let eps = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let bp = b.column(p);
                let bq = b.column(q);
                let app: f64 = bp.iter().map(|z| z.norm_sqr()).sum();
                let aqq: f64 = bq.iter().map(|z| z.norm_sqr()).sum();
                let apq: C = bp.iter().zip(bq.iter()).map(|(x, y)| x.conj() * y).sum();
                let g = apq.norm();
                if app == 0.0 || aqq == 0.0 || g <= eps * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = apq / g;
                let tau = (aqq - app) / (2.0 * g);
                // stable root of t^2 - 2 tau t - 1 = 0
                let t = -tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cth = 1.0 / (1.0 + t * t).sqrt();
                let sth = cth * t;
                // columns: p' = c p + s phase^- q ; q' = -s phase p + c q
                let cs = c(cth, 0.0);
                let sp = phase.conj() * sth;
                let sq = phase * sth;
                for i in 0..b.nrows() {
                    let xp = b[(i, p)];
                    let xq = b[(i, q)];
                    b[(i, p)] = xp * cs + xq * sp;
                    b[(i, q)] = xq * cs - xp * sq;
                }
                for i in 0..n {
                    let xp = v[(i, p)];
                    let xq = v[(i, q)];
                    v[(i, p)] = xp * cs + xq * sp;
                    v[(i, q)] = xq * cs - xp * sq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (b, v)
}

pub fn thin_svd(m: &CMatrix) -> ThinSvd {
    let (r, cols) = (m.nrows(), m.ncols());
    let k = r.min(cols);
    if k == 0 {
        return ThinSvd {
            u: zeros(r, 0),
            singular_values: Vec::new(),
            v: zeros(cols, 0),
        };
    }
    if r < cols {
        // work on the adjoint and swap the factors back
        let svd = thin_svd(&m.adjoint());
        return ThinSvd {
            u: svd.v,
            singular_values: svd.singular_values,
            v: svd.u,
        };
    }
    let (b, v_full) = jacobi_orthogonalize(m);
    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols).map(|j| b.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let mut u = zeros(r, k);
    let mut v = zeros(cols, k);
    let mut singular_values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        let s = norms[src];
        singular_values.push(s);
        if s > 0.0 {
            let col = b.column(src) / c(s, 0.0);
            u.set_column(dst, &col);
        }
        v.set_column(dst, &v_full.column(src));
        // rotate u to the phase convention and carry the same rotation to v
        let maxmag = u.column(dst).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let thresh = 1e-12 * (1.0 + maxmag);
        let mut rot = c(1.0, 0.0);
        for i in 0..r {
            let z = u[(i, dst)];
            if z.norm() > thresh {
                rot = (z / z.norm()).conj();
                break;
            }
        }
        for i in 0..r {
            u[(i, dst)] *= rot;
        }
        for i in 0..cols {
            v[(i, dst)] *= rot;
        }
    }
    ThinSvd {
        u,
        singular_values,
        v,
    }
}

/// Orthonormal basis of the column space, singular values above
/// `RANK_CUTOFF_REL * sigma_max` kept.
pub fn range_basis(m: &CMatrix) -> CMatrix {
    let svd = thin_svd(m);
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = RANK_CUTOFF_REL * smax;
    let rank = svd
        .singular_values
        .iter()
        .take_while(|&&s| s > cutoff && s > 0.0)
        .count();
    svd.u.columns(0, rank).into_owned()
}

pub fn rank(m: &CMatrix) -> usize {
    let svd = thin_svd(m);
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = RANK_CUTOFF_REL * smax;
    svd.singular_values
        .iter()
        .take_while(|&&s| s > cutoff && s > 0.0)
        .count()
}

/// Least squares solve `min ||A X - B||_F` via the pseudo-inverse.
/// Returns the minimum-norm solution and the residual Frobenius norm.
pub fn lstsq(a: &CMatrix, b: &CMatrix) -> (CMatrix, f64) {
    if a.ncols() == 0 {
        return (zeros(0, b.ncols()), fro_norm(b));
    }
    if a.nrows() == 0 {
        return (zeros(a.ncols(), b.ncols()), 0.0);
    }
    let svd = thin_svd(a);
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = RANK_CUTOFF_REL * smax;
    let mut ub = svd.u.adjoint() * b;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let f = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        for j in 0..ub.ncols() {
            ub[(i, j)] *= c(f, 0.0);
        }
    }
    let x = &svd.v * ub;
    let residual = fro_norm(&(a * &x - b));
    (x, residual)
}

/// For a hermitian PSD matrix `g`: rank-truncated `g^{+1/2}` together with
/// the rank and an orthonormal basis of the numerical range.
pub struct PsdPseudoSqrt {
    pub pinv_sqrt: CMatrix,
    pub rank: usize,
    pub range: CMatrix,
    pub eigenvalues: Vec<f64>,
}

pub fn psd_pseudo_sqrt(g: &CMatrix) -> PsdPseudoSqrt {
    let e = hermitian_eigen(g, EigenOrder::Descending);
    let emax = e.values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = RANK_CUTOFF_REL * emax;
    let rank = e
        .values
        .iter()
        .take_while(|&&v| v > cutoff && v > 0.0)
        .count();
    let range = e.vectors.columns(0, rank).into_owned();
    let mut pinv_sqrt = range.clone();
    for j in 0..rank {
        let f = 1.0 / e.values[j].sqrt();
        for i in 0..pinv_sqrt.nrows() {
            pinv_sqrt[(i, j)] *= c(f, 0.0);
        }
    }
    PsdPseudoSqrt {
        pinv_sqrt,
        rank,
        range,
        eigenvalues: e.values,
    }
}

/// Moore-Penrose pseudo-inverse with the relative rank cutoff.
pub fn pinv(m: &CMatrix) -> CMatrix {
    if m.nrows() == 0 || m.ncols() == 0 {
        return zeros(m.ncols(), m.nrows());
    }
    let svd = thin_svd(m);
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = RANK_CUTOFF_REL * smax;
    let mut v = svd.v.clone();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        let f = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        for i in 0..v.nrows() {
            v[(i, j)] *= c(f, 0.0);
        }
    }
    v * svd.u.adjoint()
}

/// Hermitian PSD square root via eigendecomposition, negative tail clamped.
pub fn psd_sqrt(g: &CMatrix) -> CMatrix {
    let n = g.nrows();
    if n == 0 {
        return zeros(0, 0);
    }
    let e = hermitian_eigen(g, EigenOrder::Descending);
    let mut scaled = e.vectors.clone();
    for j in 0..n {
        let f = e.values[j].max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= c(f, 0.0);
        }
    }
    &scaled * e.vectors.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} != {b}");
    }

    #[test]
    fn eigen_of_two_by_two() {
        // [[2,1],[1,2]] has eigenvalues {3,1}: trace 4, det 3.
        let m = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]);
        let e = hermitian_eigen(&m, EigenOrder::Descending);
        approx(e.values[0], 3.0, 1e-12);
        approx(e.values[1], 1.0, 1e-12);
        // reconstruction
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            2,
            e.values.iter().map(|&v| c(v, 0.0)),
        ));
        let rec = &e.vectors * d * e.vectors.adjoint();
        assert!(fro_norm(&(rec - m)) < 1e-12);
    }

    #[test]
    fn eigenvector_phase_is_fixed() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        let e = hermitian_eigen(&m, EigenOrder::Descending);
        for j in 0..2 {
            let first = e.vectors[(0, j)];
            assert!(first.im.abs() < 1e-12 && first.re > 0.0);
        }
    }

    #[test]
    fn spectral_norm_of_nilpotent() {
        // [[0,2],[0,0]] has singular values {2,0}.
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        approx(spectral_norm(&m), 2.0, 1e-12);
    }

    #[test]
    fn thin_svd_reconstructs() {
        let m = CMatrix::from_row_slice(
            3,
            2,
            &[
                c(1.0, 0.5),
                c(0.0, 0.0),
                c(2.0, -1.0),
                c(1.0, 0.0),
                c(0.0, 1.0),
                c(3.0, 0.0),
            ],
        );
        let svd = thin_svd(&m);
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            2,
            svd.singular_values.iter().map(|&s| c(s, 0.0)),
        ));
        let rec = &svd.u * d * svd.v.adjoint();
        assert!(fro_norm(&(rec - m)) < 1e-10);
        assert!(svd.singular_values[0] >= svd.singular_values[1]);
    }

    #[test]
    fn lstsq_exact_and_residual() {
        let a = CMatrix::from_row_slice(2, 1, &[c(1.0, 0.0), c(1.0, 0.0)]);
        // b in range: solvable exactly
        let b = CMatrix::from_row_slice(2, 1, &[c(2.0, 0.0), c(2.0, 0.0)]);
        let (x, r) = lstsq(&a, &b);
        approx(x[(0, 0)].re, 2.0, 1e-12);
        approx(r, 0.0, 1e-12);
        // b off range: residual is the orthogonal part
        let b2 = CMatrix::from_row_slice(2, 1, &[c(1.0, 0.0), c(-1.0, 0.0)]);
        let (_, r2) = lstsq(&a, &b2);
        approx(r2, std::f64::consts::SQRT_2, 1e-12);
    }

    #[test]
    fn pseudo_sqrt_of_rank_deficient_gram() {
        // [[1,1],[1,1]] has eigenpair (2, (1,1)/sqrt2) and rank 1.
        let g = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let p = psd_pseudo_sqrt(&g);
        assert_eq!(p.rank, 1);
        // g^{+1/2} g g^{+1/2} is the orthogonal projection onto the range
        let proj = p.pinv_sqrt.adjoint() * &g * &p.pinv_sqrt;
        assert!(fro_norm(&(proj - identity(1))) < 1e-12);
    }

    #[test]
    fn empty_matrices_are_handled() {
        let m = zeros(0, 3);
        assert_eq!(spectral_norm(&m), 0.0);
        assert_eq!(rank(&m), 0);
        let svd = thin_svd(&m);
        assert_eq!(svd.u.nrows(), 0);
        let e = hermitian_eigen(&zeros(0, 0), EigenOrder::Descending);
        assert!(e.values.is_empty());
    }

    #[test]
    fn kron_convention_left_major() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        let b = CMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(4.0, 0.0)]);
        let k = kron(&a, &b);
        // (i,j) -> i*2 + j: entry ((1,1),(1,1)) = a[1,1]*b[1,1] = 8 at (3,3)
        approx(k[(3, 3)].re, 8.0, 1e-15);
        approx(k[(0, 0)].re, 3.0, 1e-15);
    }
}
