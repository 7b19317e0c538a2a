//! Minimal Kolmogorov decompositions, reproducing-kernel views, invariant
//! dilations of *-semigroup-invariant kernels, and Stinespring dilation of
//! unital completely positive maps.
//!
//! The dilation space is realised extrinsically inside the top-level factor:
//! the Gram matrix at the maximum element is eigendecomposed, truncated at
//! the relative rank cutoff, and each level of the dilation space is the
//! column space of the factor applied to the embedded level vectors. The
//! intrinsic construction of the same spaces through the convolution pairing
//! is unitarily identical, which is exactly what `unitary_equivalence`
//! certifies.

use std::sync::Arc;

use thiserror::Error;

use crate::algebra::AlgebraError;
use crate::kernel::{
    sznagy_from_grams, CpMap, KernelError, OperatorKernel, SemigroupAction, SzNagyBound,
};
use crate::linalg::{
    c, fro_norm, hermitian_eigen, identity, kron, pinv, range_basis, zeros, CMatrix, CVector,
    EigenOrder, C,
};
use crate::operator::{LocallyBoundedOperator, OperatorError};
use crate::space::{LocalVector, LocallyHilbertSpace, SpaceError};
use crate::tol::{Tol, RANK_CUTOFF_REL};

#[derive(Debug, Error, Clone)]
pub enum DilationError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("kernel is not invariant at (s={s}, x={x}, y={y}), residual {residual:.3e}")]
    NotInvariant {
        s: String,
        x: String,
        y: String,
        residual: f64,
    },
    #[error("boundedness condition (b) fails for s={s} at level `{level}`")]
    BoundednessFails {
        s: String,
        level: String,
        witness: CVector,
    },
    #[error("operation requires a minimal decomposition")]
    NotMinimal,
    #[error("decompositions are not equivalent (residual {residual:.3e})")]
    NotEquivalent { residual: f64 },
    #[error("algebra has no unit in its span")]
    NotUnital,
    #[error("map is not completely positive: {0}")]
    NotCompletelyPositive(String),
    #[error("representation axiom violated: {axiom} residual {residual:.3e}")]
    RepresentationViolated { axiom: String, residual: f64 },
}

/// A locally Hilbert space linearisation `k(x,y) = V(x)^* V(y)` with a
/// minimality flag and the verified factorization residual.
#[derive(Debug, Clone)]
pub struct KolmogorovDecomposition {
    points: Vec<String>,
    domain: Arc<LocallyHilbertSpace>,
    dilation_space: Arc<LocallyHilbertSpace>,
    v: Vec<LocallyBoundedOperator>,
    minimal: bool,
    residual: f64,
}

impl KolmogorovDecomposition {
    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn domain(&self) -> &Arc<LocallyHilbertSpace> {
        &self.domain
    }

    pub fn dilation_space(&self) -> &Arc<LocallyHilbertSpace> {
        &self.dilation_space
    }

    /// The net `V(x) : H -> K` for point index `x`.
    pub fn v(&self, x: usize) -> &LocallyBoundedOperator {
        &self.v[x]
    }

    pub fn v_all(&self) -> &[LocallyBoundedOperator] {
        &self.v
    }

    pub fn is_minimal(&self) -> bool {
        self.minimal
    }

    /// Worst `||V(x)^* V(y) - k(x,y)||` over pairs and levels.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// The top-level factor `[V_top(x_1) | ... | V_top(x_m)]`; its Gram is
    /// the reconstructed kernel Gram.
    pub fn factor_top(&self) -> CMatrix {
        let top = self.domain.poset().maximum();
        let d = self.domain.dim(top);
        let r = self.dilation_space.dim(top);
        let mut w = zeros(r, self.points.len() * d);
        for (x, vx) in self.v.iter().enumerate() {
            let block = vx.level(top);
            for i in 0..r {
                for j in 0..d {
                    w[(i, x * d + j)] = block[(i, j)];
                }
            }
        }
        w
    }

    /// Worst factorization residual against a kernel, over pairs and levels.
    pub fn factorization_residual(&self, kernel: &OperatorKernel) -> f64 {
        let mut worst = 0.0f64;
        for x in 0..self.points.len() {
            for y in 0..self.points.len() {
                let prod = self.v[x].adjoint().compose(&self.v[y]).unwrap();
                worst = worst.max(prod.distance(kernel.value(x, y)));
            }
        }
        worst
    }

    /// Worst coherence residual over all produced nets.
    pub fn coherence_residual(&self) -> f64 {
        self.v
            .iter()
            .map(|op| op.coherence_residual())
            .fold(0.0, f64::max)
    }
}

/// Builds the minimal Kolmogorov decomposition of a PSD kernel through the
/// eigendecomposition of the top-level Gram matrix.
pub fn kolmogorov(
    kernel: &OperatorKernel,
    tol: &Tol,
) -> Result<KolmogorovDecomposition, DilationError> {
    kolmogorov_with(kernel, EigenOrder::Descending, tol)
}

/// As [`kolmogorov`], with an explicit eigenvalue ordering. The ascending
/// order reverses the tie-breaking inside the factor and produces a
/// different, unitarily equivalent, minimal decomposition.
pub fn kolmogorov_with(
    kernel: &OperatorKernel,
    order: EigenOrder,
    tol: &Tol,
) -> Result<KolmogorovDecomposition, DilationError> {
    kernel.check_positive_semidefinite(tol)?;
    let space = kernel.space().clone();
    let poset = space.poset().clone();
    let top = poset.maximum();
    let d_top = space.dim(top);
    let m = kernel.len();

    let g_top = kernel.gram(top);
    let eig = hermitian_eigen(&g_top, order);
    let emax = eig.values.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = RANK_CUTOFF_REL * emax;
    let kept: Vec<usize> = (0..eig.values.len())
        .filter(|&i| eig.values[i] > cutoff && eig.values[i] > 0.0)
        .collect();
    let r = kept.len();
    // W = D_r^{1/2} U_r^*, rows in the order the kept eigenvalues appear
    let mut w = zeros(r, m * d_top);
    for (row, &i) in kept.iter().enumerate() {
        let s = eig.values[i].sqrt();
        for col in 0..m * d_top {
            w[(row, col)] = eig.vectors[(col, i)].conj() * c(s, 0.0);
        }
    }

    build_decomposition(kernel, &space, w, tol)
}

/// Assembles the dilation space and the point maps from a top-level factor
/// `w` with `w^* w ~ G_top`.
fn build_decomposition(
    kernel: &OperatorKernel,
    space: &Arc<LocallyHilbertSpace>,
    w: CMatrix,
    tol: &Tol,
) -> Result<KolmogorovDecomposition, DilationError> {
    let poset = space.poset().clone();
    let top = poset.maximum();
    let d_top = space.dim(top);
    let m = kernel.len();
    let r = w.nrows();

    let spanning = |lam: usize| -> CMatrix {
        // [ W (delta_x (x) J_lam) ]_x, the embedded level spanning set
        let d_lam = space.dim(lam);
        let j = space.isometry(lam);
        let mut b = zeros(r, m * d_lam);
        for x in 0..m {
            let wx = w.columns(x * d_top, d_top);
            let block = wx * j;
            for i in 0..r {
                for k in 0..d_lam {
                    b[(i, x * d_lam + k)] = block[(i, k)];
                }
            }
        }
        b
    };

    let mut isometries = Vec::with_capacity(poset.len());
    for lam in 0..poset.len() {
        if lam == top {
            isometries.push(identity(r));
        } else {
            isometries.push(range_basis(&spanning(lam)));
        }
    }
    let dilation_space = Arc::new(LocallyHilbertSpace::from_ambient(
        poset.clone(),
        isometries,
        tol,
    )?);

    let mut v = Vec::with_capacity(m);
    for x in 0..m {
        let v_top = w.columns(x * d_top, d_top).into_owned();
        let levels: Vec<CMatrix> = (0..poset.len())
            .map(|lam| {
                dilation_space.isometry(lam).adjoint() * &v_top * space.isometry(lam)
            })
            .collect();
        v.push(LocallyBoundedOperator::new(
            space.clone(),
            dilation_space.clone(),
            levels,
            tol,
        )?);
    }

    let mut decomposition = KolmogorovDecomposition {
        points: kernel.points().to_vec(),
        domain: space.clone(),
        dilation_space,
        v,
        minimal: true,
        residual: 0.0,
    };
    decomposition.residual = decomposition.factorization_residual(kernel);
    Ok(decomposition)
}

/// Compresses a decomposition onto the span of `V(X)H` per level, preserving
/// the factorization; the output is minimal.
#[allow(clippy::needless_range_loop)]
pub fn minimalize(
    d: &KolmogorovDecomposition,
    tol: &Tol,
) -> Result<KolmogorovDecomposition, DilationError> {
    let poset = d.domain.poset().clone();
    let top = poset.maximum();
    let m = d.points.len();

    // per-level orthonormal bases of span{V_lam(x) h}
    let mut bases = Vec::with_capacity(poset.len());
    for lam in 0..poset.len() {
        let d_h = d.domain.dim(lam);
        let d_k = d.dilation_space.dim(lam);
        let mut b = zeros(d_k, m * d_h);
        for x in 0..m {
            let block = d.v[x].level(lam);
            for i in 0..d_k {
                for j in 0..d_h {
                    b[(i, x * d_h + j)] = block[(i, j)];
                }
            }
        }
        bases.push(range_basis(&b));
    }

    let u_top = &bases[top];
    let mut isometries = Vec::with_capacity(poset.len());
    for lam in 0..poset.len() {
        if lam == top {
            isometries.push(identity(u_top.ncols()));
        } else {
            isometries.push(u_top.adjoint() * d.dilation_space.isometry(lam) * &bases[lam]);
        }
    }
    let new_space = Arc::new(LocallyHilbertSpace::from_ambient(
        poset.clone(),
        isometries,
        tol,
    )?);

    let mut v = Vec::with_capacity(m);
    for x in 0..m {
        let levels: Vec<CMatrix> = (0..poset.len())
            .map(|lam| bases[lam].adjoint() * d.v[x].level(lam))
            .collect();
        v.push(LocallyBoundedOperator::new(
            d.domain.clone(),
            new_space.clone(),
            levels,
            tol,
        )?);
    }

    Ok(KolmogorovDecomposition {
        points: d.points.clone(),
        domain: d.domain.clone(),
        dilation_space: new_space,
        v,
        minimal: true,
        residual: d.residual,
    })
}

/// Extends a linear point action to the dilation space: the coefficient
/// matrix sends the spanning column of point `x` to the combination
/// `sum_y coeffs[y][x] V(y)`, and the extension is zero on the orthogonal
/// complement of the span (trivial when the decomposition is minimal).
pub fn extend_linear_action(
    d: &KolmogorovDecomposition,
    coeffs: &CMatrix,
    tol: &Tol,
) -> Result<LocallyBoundedOperator, DilationError> {
    let poset = d.domain.poset().clone();
    let top = poset.maximum();
    let d_top = d.domain.dim(top);
    let w = d.factor_top();
    let mixer = kron(coeffs, &identity(d_top));
    let pi_top = &w * mixer * pinv(&w);
    let levels: Vec<CMatrix> = (0..poset.len())
        .map(|lam| {
            d.dilation_space.isometry(lam).adjoint() * &pi_top * d.dilation_space.isometry(lam)
        })
        .collect();
    Ok(LocallyBoundedOperator::new(
        d.dilation_space.clone(),
        d.dilation_space.clone(),
        levels,
        tol,
    )?)
}

/// An invariant dilation triple `(K; pi; V)`: a linearisation carrying a
/// *-representation of the acting semigroup, with the verified residuals
/// and the per-`(s, level)` boundedness certificates.
#[derive(Debug, Clone)]
pub struct InvariantDilation {
    pub decomposition: KolmogorovDecomposition,
    /// `pi(s)` per semigroup element
    pub pi: Vec<LocallyBoundedOperator>,
    /// `certificates[s][lambda] = c_lambda(s)`
    pub certificates: Vec<Vec<f64>>,
    /// worst `||pi(s) V(x) - V(s.x)||`
    pub intertwining_residual: f64,
    /// worst `||pi(st) - pi(s) pi(t)||`
    pub multiplicative_residual: f64,
    /// worst `||pi(s*) - pi(s)^*||`
    pub star_residual: f64,
}

/// Dilates an invariant PSD kernel: verifies positivity, invariance and the
/// boundedness condition, builds the minimal decomposition, extends the
/// action to a *-representation and verifies the axioms exhaustively.
#[allow(clippy::needless_range_loop)]
pub fn invariant_dilation(
    kernel: &OperatorKernel,
    action: &SemigroupAction,
    tol: &Tol,
) -> Result<InvariantDilation, DilationError> {
    kernel.check_positive_semidefinite(tol)?;
    let sg = action.semigroup().clone();
    let space = kernel.space().clone();
    let mut certificates = Vec::with_capacity(sg.len());
    for s in 0..sg.len() {
        let mut per_level = Vec::with_capacity(space.levels());
        for lam in 0..space.levels() {
            let g = kernel.gram(lam);
            let gs = kernel.shifted_gram(lam, action, s);
            match sznagy_from_grams(&g, &gs, tol) {
                SzNagyBound::Finite(c_val) => per_level.push(c_val),
                SzNagyBound::Infinite { witness } => {
                    return Err(DilationError::BoundednessFails {
                        s: sg.label(s).to_string(),
                        level: space.poset().label(lam).to_string(),
                        witness,
                    });
                }
            }
        }
        certificates.push(per_level);
    }
    if let Some((s, x, y, residual)) = crate::kernel::invariance_violation(kernel, action, tol)? {
        return Err(DilationError::NotInvariant {
            s: sg.label(s).to_string(),
            x: kernel.points()[x].clone(),
            y: kernel.points()[y].clone(),
            residual,
        });
    }

    let decomposition = kolmogorov(kernel, tol)?;
    let m = kernel.len();
    let mut pi = Vec::with_capacity(sg.len());
    for s in 0..sg.len() {
        let mut perm = zeros(m, m);
        for x in 0..m {
            perm[(action.act(s, x), x)] = c(1.0, 0.0);
        }
        pi.push(extend_linear_action(&decomposition, &perm, tol)?);
    }

    // intertwining: pi(s) V(x) = V(s.x)
    let mut intertwining = 0.0f64;
    for s in 0..sg.len() {
        for x in 0..m {
            let lhs = pi[s].compose(decomposition.v(x)).unwrap();
            intertwining = intertwining.max(lhs.distance(decomposition.v(action.act(s, x))));
        }
    }
    // *-representation axioms, exhaustive over S x S
    let mut mult = 0.0f64;
    let mut star = 0.0f64;
    for s in 0..sg.len() {
        for t in 0..sg.len() {
            let lhs = pi[s].compose(&pi[t]).unwrap();
            mult = mult.max(lhs.distance(&pi[sg.mul(s, t)]));
        }
        star = star.max(pi[s].adjoint().distance(&pi[sg.star(s)]));
    }
    let scale = pi.iter().map(|p| p.sup_seminorm()).fold(1.0, f64::max);
    for (axiom, residual) in [
        ("pi(s)V(x) = V(s.x)", intertwining),
        ("pi(st) = pi(s)pi(t)", mult),
        ("pi(s*) = pi(s)*", star),
    ] {
        if !tol.ok(residual, scale * scale) {
            return Err(DilationError::RepresentationViolated {
                axiom: axiom.to_string(),
                residual,
            });
        }
    }

    Ok(InvariantDilation {
        decomposition,
        pi,
        certificates,
        intertwining_residual: intertwining,
        multiplicative_residual: mult,
        star_residual: star,
    })
}

/// Function-space view of a minimal decomposition: each dilation vector `w`
/// at level `lambda` induces `f_w(x) = V_lambda(x)^* w`, and the kernel
/// sections `k_x h` are represented by `V(x) h`.
pub struct ReproducingKernelSpace<'a> {
    decomposition: &'a KolmogorovDecomposition,
}

/// Exposes the reproducing-kernel structure of a minimal decomposition.
pub fn reproducing_kernel_space(
    d: &KolmogorovDecomposition,
) -> Result<ReproducingKernelSpace<'_>, DilationError> {
    if !d.is_minimal() {
        return Err(DilationError::NotMinimal);
    }
    Ok(ReproducingKernelSpace { decomposition: d })
}

impl<'a> ReproducingKernelSpace<'a> {
    /// Point evaluation `f_w(x)`, a vector in `H` at the level of `w`.
    pub fn evaluate(&self, w: &LocalVector, x: usize) -> Result<LocalVector, DilationError> {
        self.decomposition.dilation_space.check_vector(w)?;
        let vx = self.decomposition.v(x);
        Ok(LocalVector::new(
            w.level,
            vx.level(w.level).adjoint() * &w.coords,
        ))
    }

    /// The section `k_x h = f_{V(x) h}`, represented in the dilation space.
    pub fn kernel_section(&self, x: usize, h: &LocalVector) -> Result<LocalVector, DilationError> {
        Ok(self.decomposition.v(x).apply(h)?)
    }

    /// Inner product of two function-space elements through their dilation
    /// representatives.
    pub fn inner(&self, w1: &LocalVector, w2: &LocalVector) -> C {
        self.decomposition.dilation_space.inner_product(w1, w2)
    }

    /// Residual of the reproducing identity
    /// `<f_w, k_x h> = <f_w(x), h>` for the given data.
    pub fn reproducing_residual(
        &self,
        w: &LocalVector,
        x: usize,
        h: &LocalVector,
    ) -> Result<f64, DilationError> {
        let lhs = self.inner(w, &self.kernel_section(x, h)?);
        let fx = self.evaluate(w, x)?;
        let rhs = self.decomposition.domain.inner_product(&fx, h);
        Ok((lhs - rhs).norm())
    }
}

/// Constructs the locally unitary intertwiner between two minimal
/// decompositions of the same kernel: `U V_1(x) = V_2(x)` per level, by
/// least squares on the spanning sets, then verifies unitarity and the
/// intertwining within tolerance. Optional representations must be
/// intertwined as well.
pub fn unitary_equivalence(
    d1: &KolmogorovDecomposition,
    d2: &KolmogorovDecomposition,
    reps: Option<(&[LocallyBoundedOperator], &[LocallyBoundedOperator])>,
    tol: &Tol,
) -> Result<LocallyBoundedOperator, DilationError> {
    if !d1.is_minimal() || !d2.is_minimal() {
        return Err(DilationError::NotMinimal);
    }
    let poset = d1.domain.poset().clone();
    let m = d1.points.len();
    if d2.points.len() != m || d1.domain != d2.domain {
        return Err(DilationError::NotEquivalent { residual: f64::INFINITY });
    }
    let mut levels = Vec::with_capacity(poset.len());
    for lam in 0..poset.len() {
        let r1 = d1.dilation_space.dim(lam);
        let r2 = d2.dilation_space.dim(lam);
        if r1 != r2 {
            return Err(DilationError::NotEquivalent { residual: f64::INFINITY });
        }
        let d_h = d1.domain.dim(lam);
        let mut b1 = zeros(r1, m * d_h);
        let mut b2 = zeros(r2, m * d_h);
        for x in 0..m {
            let v1 = d1.v[x].level(lam);
            let v2 = d2.v[x].level(lam);
            for i in 0..r1 {
                for j in 0..d_h {
                    b1[(i, x * d_h + j)] = v1[(i, j)];
                }
            }
            for i in 0..r2 {
                for j in 0..d_h {
                    b2[(i, x * d_h + j)] = v2[(i, j)];
                }
            }
        }
        // solve U B1 = B2 by least squares on the adjoint system
        let (x, _) = crate::linalg::lstsq(&b1.adjoint(), &b2.adjoint());
        levels.push(x.adjoint());
    }
    let u = LocallyBoundedOperator::new(
        d1.dilation_space.clone(),
        d2.dilation_space.clone(),
        levels,
        tol,
    )?;

    // unitarity per level
    for lam in 0..poset.len() {
        let ul = u.level(lam);
        let n = ul.nrows();
        let r1 = fro_norm(&(ul.adjoint() * ul - identity(ul.ncols())));
        let r2 = fro_norm(&(ul * ul.adjoint() - identity(n)));
        if !tol.ok(r1.max(r2), 1.0) {
            return Err(DilationError::NotEquivalent { residual: r1.max(r2) });
        }
    }
    // intertwining residual
    let mut worst = 0.0f64;
    for x in 0..m {
        let lhs = u.compose(d1.v(x)).unwrap();
        worst = worst.max(lhs.distance(d2.v(x)));
    }
    if let Some((p1, p2)) = reps {
        for (a, b) in p1.iter().zip(p2.iter()) {
            let lhs = u.compose(a).unwrap();
            let rhs = b.compose(&u).unwrap();
            worst = worst.max(lhs.distance(&rhs));
        }
    }
    let scale = d1
        .v_all()
        .iter()
        .map(|v| v.sup_seminorm())
        .fold(1.0, f64::max);
    if !tol.ok(worst, scale) {
        return Err(DilationError::NotEquivalent { residual: worst });
    }
    Ok(u)
}

/// A Stinespring dilation `phi(a) = W^* pi(a) W` of a unital coherent
/// completely positive map, with its verification report.
#[derive(Debug, Clone)]
pub struct StinespringDilation {
    pub decomposition: KolmogorovDecomposition,
    /// `pi(basis_i)` for each algebra basis element
    pub pi_basis: Vec<LocallyBoundedOperator>,
    /// `W = V(1)`
    pub w: LocallyBoundedOperator,
    /// worst `||phi(a) - W^* pi(a) W||` over basis elements
    pub cp_residual: f64,
    /// worst multiplicativity residual over the generated semigroup
    pub multiplicative_residual: f64,
    /// worst `||pi(a*) - pi(a)^*||` over the generated semigroup
    pub star_residual: f64,
    /// size of the multiplicative closure used for verification
    pub semigroup_size: usize,
    /// true when the closure hit the enumeration cap
    pub semigroup_truncated: bool,
    /// `certificates[i][lambda]`: boundedness certificate of basis element i
    pub certificates: Vec<Vec<f64>>,
}

impl StinespringDilation {
    /// `pi(a)` for an element given by coefficients over the algebra basis.
    pub fn pi(&self, coeffs: &CVector) -> LocallyBoundedOperator {
        let k = self.decomposition.dilation_space().clone();
        let mut acc = LocallyBoundedOperator::zero(k.clone(), k);
        for (op, &co) in self.pi_basis.iter().zip(coeffs.iter()) {
            acc = acc.add(&op.scale(co)).unwrap();
        }
        acc
    }
}

/// Cap on the multiplicative closure enumerated during verification.
const SEMIGROUP_CAP: usize = 64;

/// Stinespring dilation for a unital algebra and a coherent CP map given on
/// the basis: builds `k(a,b) = phi(a* b)` on `X = basis U {1}`, dilates, and
/// extends the left regular action linearly to a *-representation.
#[allow(clippy::needless_range_loop)]
pub fn stinespring(phi: &CpMap, tol: &Tol) -> Result<StinespringDilation, DilationError> {
    let algebra = phi.algebra().clone();
    let id_coeffs = algebra
        .identity_coeffs()
        .ok_or(DilationError::NotUnital)?
        .clone();
    let n = algebra.dim();

    // X = basis U {1}; skip the union when the unit is itself a basis vector
    let mut points: Vec<(String, CVector)> = (0..n)
        .map(|i| {
            let mut v = CVector::zeros(n);
            v[i] = c(1.0, 0.0);
            (format!("b{i}"), v)
        })
        .collect();
    let unit_as_basis = points
        .iter()
        .position(|(_, v)| (v - &id_coeffs).norm() <= tol.span(1.0));
    let unit_index = match unit_as_basis {
        Some(i) => i,
        None => {
            points.push(("1".to_string(), id_coeffs.clone()));
            points.len() - 1
        }
    };
    let m = points.len();

    let (kernel, _) = crate::kernel::kernel_from_cp_map(phi, &points, tol)?;
    if let Err(KernelError::NotPositiveSemidefinite { level, min_eig }) =
        kernel.check_positive_semidefinite(tol)
    {
        return Err(DilationError::NotCompletelyPositive(format!(
            "kernel Gram at level `{level}` has min eigenvalue {min_eig:.3e}"
        )));
    }
    let decomposition = kolmogorov(&kernel, tol)?;

    // coefficient matrix of left multiplication by basis_i on the X span
    let mult_matrix = |a: &CVector| -> Result<CMatrix, DilationError> {
        let mut cmat = zeros(m, m);
        for (j, (_, xj)) in points.iter().enumerate() {
            let prod = algebra.product_coeffs(a, xj)?;
            for k in 0..n {
                cmat[(k, j)] = prod[k];
            }
            // the unit row stays zero: products re-express over the basis
        }
        Ok(cmat)
    };

    let mut pi_basis = Vec::with_capacity(n);
    let mut certificates = Vec::with_capacity(n);
    let target = phi.target().clone();
    for i in 0..n {
        let mut a = CVector::zeros(n);
        a[i] = c(1.0, 0.0);
        let cmat = mult_matrix(&a)?;
        // boundedness certificates for the shifted Gram (C (x) I)^* G (C (x) I)
        let mut per_level = Vec::with_capacity(target.levels());
        for lam in 0..target.levels() {
            let g = kernel.gram(lam);
            let mixer = kron(&cmat, &identity(target.dim(lam)));
            let gs = mixer.adjoint() * &g * &mixer;
            match sznagy_from_grams(&g, &gs, tol) {
                SzNagyBound::Finite(c_val) => per_level.push(c_val),
                SzNagyBound::Infinite { witness } => {
                    return Err(DilationError::BoundednessFails {
                        s: format!("b{i}"),
                        level: target.poset().label(lam).to_string(),
                        witness,
                    });
                }
            }
        }
        certificates.push(per_level);
        pi_basis.push(extend_linear_action(&decomposition, &cmat, tol)?);
    }

    let w = decomposition.v(unit_index).clone();

    // phi(a) = W^* pi(a) W on the basis
    let mut cp_residual = 0.0f64;
    for i in 0..n {
        let compressed = w.adjoint().compose(&pi_basis[i].compose(&w).unwrap()).unwrap();
        cp_residual = cp_residual.max(compressed.distance(phi.basis_image(i)));
    }

    // multiplicative closure of the basis coefficient vectors, capped
    let mut closure: Vec<CVector> = Vec::new();
    let push_unique = |v: &CVector, closure: &mut Vec<CVector>| -> bool {
        let scale = v.norm();
        if closure.iter().any(|u| (u - v).norm() <= tol.span(scale)) {
            return false;
        }
        closure.push(v.clone());
        true
    };
    for i in 0..n {
        let mut v = CVector::zeros(n);
        v[i] = c(1.0, 0.0);
        push_unique(&v, &mut closure);
    }
    push_unique(&id_coeffs, &mut closure);
    let mut truncated = false;
    loop {
        let mut added = false;
        let snapshot = closure.len();
        'pairs: for a in 0..snapshot {
            for b in 0..snapshot {
                let prod = algebra.product_coeffs(&closure[a].clone(), &closure[b].clone())?;
                if closure.len() >= SEMIGROUP_CAP {
                    truncated = true;
                    break 'pairs;
                }
                if push_unique(&prod, &mut closure) {
                    added = true;
                }
            }
        }
        if !added || truncated {
            break;
        }
    }

    let pi_of = |coeffs: &CVector| -> LocallyBoundedOperator {
        let k = decomposition.dilation_space().clone();
        let mut acc = LocallyBoundedOperator::zero(k.clone(), k);
        for (op, &co) in pi_basis.iter().zip(coeffs.iter()) {
            acc = acc.add(&op.scale(co)).unwrap();
        }
        acc
    };

    let mut mult_residual = 0.0f64;
    let mut star_residual = 0.0f64;
    for a in &closure {
        for b in &closure {
            let prod = algebra.product_coeffs(a, b)?;
            let lhs = pi_of(a).compose(&pi_of(b)).unwrap();
            mult_residual = mult_residual.max(lhs.distance(&pi_of(&prod)));
        }
        let star = algebra.star_coeffs(a)?;
        star_residual = star_residual.max(pi_of(a).adjoint().distance(&pi_of(&star)));
    }

    Ok(StinespringDilation {
        decomposition,
        pi_basis,
        w,
        cp_residual,
        multiplicative_residual: mult_residual,
        star_residual,
        semigroup_size: closure.len(),
        semigroup_truncated: truncated,
        certificates,
    })
}
