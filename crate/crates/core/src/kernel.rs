//! Operator-valued kernels on a finite point set, *-semigroups and their
//! actions, and the checks feeding the dilation engine: hermitian-ness,
//! n-positivity, invariance, and the Sz.-Nagy boundedness condition.
//!
//! Positivity is decided on block Gram matrices: at level `lambda` the
//! `m*d_lambda` square matrix with `(i,j)` block `k_lambda(x_i, x_j)`. With a
//! finite point set that may repeat in tuples, the full Gram test is exact
//! for "n-positive for all n".

use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{AlgebraError, LocallyCStarAlgebra};
use crate::linalg::{
    fro_norm, hermitian_eigen, max_abs, psd_pseudo_sqrt, spectral_norm, zeros, CMatrix, CVector,
    EigenOrder,
};
use crate::operator::{LocallyBoundedOperator, OperatorError};
use crate::space::LocallyHilbertSpace;
use crate::tol::Tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel needs a nonempty point set")]
    NoPoints,
    #[error("kernel table has {got} entries, expected {expected}")]
    TableSize { expected: usize, got: usize },
    #[error("kernel value at ({row},{col}) is not an endomorphism of the kernel space")]
    ValueSpaceMismatch { row: usize, col: usize },
    #[error("kernel is not positive semidefinite (level `{level}`, min eigenvalue {min_eig:.3e})")]
    NotPositiveSemidefinite { level: String, min_eig: f64 },
    #[error("semigroup table is not associative at ({s},{t},{u})")]
    NotAssociative { s: String, t: String, u: String },
    #[error("involution fails (st)* = t* s* at ({s},{t})")]
    InvolutionNotAntimultiplicative { s: String, t: String },
    #[error("involution is not involutive at {s}")]
    InvolutionNotInvolutive { s: String },
    #[error("unit axioms fail at {s}")]
    UnitAxiom { s: String },
    #[error("action table is not compatible: (st).x != s.(t.x) at ({s},{t},{x})")]
    ActionNotCompatible { s: String, t: String, x: String },
    #[error("action table size mismatch")]
    ActionSize,
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// A kernel `k : X x X -> B_loc(H)` on a finite ordered point set.
#[derive(Debug, Clone)]
pub struct OperatorKernel {
    points: Vec<String>,
    space: Arc<LocallyHilbertSpace>,
    /// row-major `m x m` table of validated endomorphism nets
    values: Vec<LocallyBoundedOperator>,
}

impl OperatorKernel {
    pub fn new(
        points: Vec<String>,
        space: Arc<LocallyHilbertSpace>,
        values: Vec<LocallyBoundedOperator>,
    ) -> Result<Self, KernelError> {
        if points.is_empty() {
            return Err(KernelError::NoPoints);
        }
        let m = points.len();
        if values.len() != m * m {
            return Err(KernelError::TableSize {
                expected: m * m,
                got: values.len(),
            });
        }
        for (idx, v) in values.iter().enumerate() {
            if v.domain() != &space || v.codomain() != &space {
                return Err(KernelError::ValueSpaceMismatch {
                    row: idx / m,
                    col: idx % m,
                });
            }
        }
        Ok(OperatorKernel {
            points,
            space,
            values,
        })
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn space(&self) -> &Arc<LocallyHilbertSpace> {
        &self.space
    }

    pub fn value(&self, i: usize, j: usize) -> &LocallyBoundedOperator {
        &self.values[i * self.len() + j]
    }

    pub fn point_index(&self, label: &str) -> Result<usize, KernelError> {
        self.points
            .iter()
            .position(|p| p == label)
            .ok_or_else(|| KernelError::UnknownLabel(label.to_string()))
    }

    /// Block Gram matrix at a level: `(i,j)` block `k_lambda(x_i, x_j)`.
    pub fn gram(&self, lam: usize) -> CMatrix {
        let m = self.len();
        let d = self.space.dim(lam);
        let mut g = zeros(m * d, m * d);
        for i in 0..m {
            for j in 0..m {
                let block = self.value(i, j).level(lam);
                for r in 0..d {
                    for c_ in 0..d {
                        g[(i * d + r, j * d + c_)] = block[(r, c_)];
                    }
                }
            }
        }
        g
    }

    /// Block Gram with `(i,j)` block `k_lambda(s.x_i, s.x_j)`.
    pub fn shifted_gram(&self, lam: usize, action: &SemigroupAction, s: usize) -> CMatrix {
        let m = self.len();
        let d = self.space.dim(lam);
        let mut g = zeros(m * d, m * d);
        for i in 0..m {
            let si = action.act(s, i);
            for j in 0..m {
                let sj = action.act(s, j);
                let block = self.value(si, sj).level(lam);
                for r in 0..d {
                    for c_ in 0..d {
                        g[(i * d + r, j * d + c_)] = block[(r, c_)];
                    }
                }
            }
        }
        g
    }

    /// `k(x,y)^* = k(y,x)` for all pairs, within tolerance, at every level.
    pub fn is_hermitian(&self, tol: &Tol) -> bool {
        let m = self.len();
        for i in 0..m {
            for j in 0..m {
                let a = self.value(i, j);
                let b = self.value(j, i);
                for lam in 0..self.space.levels() {
                    let r = fro_norm(&(a.level(lam).adjoint() - b.level(lam)));
                    if !tol.ok(r, max_abs(a.level(lam))) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// n-positivity with repeated points allowed: every size-`min(n,m)`
    /// sub-Gram must be PSD at every level.
    pub fn is_n_positive(&self, n: usize, tol: &Tol) -> bool {
        assert!(n >= 1, "n-positivity needs n >= 1");
        let m = self.len();
        let q = n.min(m);
        let mut subset: Vec<usize> = (0..q).collect();
        loop {
            for lam in 0..self.space.levels() {
                let d = self.space.dim(lam);
                if d == 0 {
                    continue;
                }
                let mut g = zeros(q * d, q * d);
                for (a, &i) in subset.iter().enumerate() {
                    for (b, &j) in subset.iter().enumerate() {
                        let block = self.value(i, j).level(lam);
                        for r in 0..d {
                            for c_ in 0..d {
                                g[(a * d + r, b * d + c_)] = block[(r, c_)];
                            }
                        }
                    }
                }
                let min_eig = crate::linalg::min_eig_hermitian(&g);
                if min_eig < -tol.abs(spectral_norm(&g)) {
                    return false;
                }
            }
            // next combination in lexicographic order
            let mut idx = q;
            loop {
                if idx == 0 {
                    return true;
                }
                idx -= 1;
                if subset[idx] != idx + m - q {
                    subset[idx] += 1;
                    for k in (idx + 1)..q {
                        subset[k] = subset[k - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    /// Full PSD test: the complete block Gram at every level.
    pub fn is_positive_semidefinite(&self, tol: &Tol) -> bool {
        self.check_positive_semidefinite(tol).is_ok()
    }

    pub fn check_positive_semidefinite(&self, tol: &Tol) -> Result<(), KernelError> {
        for lam in 0..self.space.levels() {
            let g = self.gram(lam);
            if g.nrows() == 0 {
                continue;
            }
            let min_eig = crate::linalg::min_eig_hermitian(&g);
            if min_eig < -tol.abs(spectral_norm(&g)) {
                return Err(KernelError::NotPositiveSemidefinite {
                    level: self.space.poset().label(lam).to_string(),
                    min_eig,
                });
            }
        }
        Ok(())
    }
}

/// A finite *-semigroup given by multiplication and involution tables.
#[derive(Debug, Clone, PartialEq)]
pub struct StarSemigroup {
    labels: Vec<String>,
    /// `mult[s * n + t] = st`
    mult: Vec<usize>,
    star: Vec<usize>,
    unit: Option<usize>,
}

impl StarSemigroup {
    pub fn new(
        labels: Vec<String>,
        mult: Vec<usize>,
        star: Vec<usize>,
        unit: Option<usize>,
    ) -> Result<Self, KernelError> {
        let n = labels.len();
        if n == 0 || mult.len() != n * n || star.len() != n {
            return Err(KernelError::ActionSize);
        }
        let sg = StarSemigroup {
            labels,
            mult,
            star,
            unit,
        };
        for s in 0..n {
            for t in 0..n {
                for u in 0..n {
                    if sg.mul(sg.mul(s, t), u) != sg.mul(s, sg.mul(t, u)) {
                        return Err(KernelError::NotAssociative {
                            s: sg.labels[s].clone(),
                            t: sg.labels[t].clone(),
                            u: sg.labels[u].clone(),
                        });
                    }
                }
                if sg.star(sg.mul(s, t)) != sg.mul(sg.star(t), sg.star(s)) {
                    return Err(KernelError::InvolutionNotAntimultiplicative {
                        s: sg.labels[s].clone(),
                        t: sg.labels[t].clone(),
                    });
                }
            }
            if sg.star(sg.star(s)) != s {
                return Err(KernelError::InvolutionNotInvolutive {
                    s: sg.labels[s].clone(),
                });
            }
        }
        if let Some(e) = sg.unit {
            for s in 0..n {
                if sg.mul(e, s) != s || sg.mul(s, e) != s {
                    return Err(KernelError::UnitAxiom {
                        s: sg.labels[s].clone(),
                    });
                }
            }
        }
        Ok(sg)
    }

    /// The trivial one-element group.
    pub fn trivial() -> StarSemigroup {
        StarSemigroup::new(vec!["e".into()], vec![0], vec![0], Some(0)).unwrap()
    }

    /// The cyclic group of order two with `g* = g`.
    pub fn z2() -> StarSemigroup {
        StarSemigroup::new(
            vec!["e".into(), "g".into()],
            vec![0, 1, 1, 0],
            vec![0, 1],
            Some(0),
        )
        .unwrap()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, s: usize) -> &str {
        &self.labels[s]
    }

    pub fn index_of(&self, label: &str) -> Result<usize, KernelError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| KernelError::UnknownLabel(label.to_string()))
    }

    pub fn mul(&self, s: usize, t: usize) -> usize {
        self.mult[s * self.len() + t]
    }

    pub fn star(&self, s: usize) -> usize {
        self.star[s]
    }

    pub fn unit(&self) -> Option<usize> {
        self.unit
    }

    /// True when every element has `s* = s^{-1}`, witnessed through a unit.
    pub fn is_group(&self) -> bool {
        match self.unit {
            None => false,
            Some(e) => (0..self.len())
                .all(|s| self.mul(s, self.star(s)) == e && self.mul(self.star(s), s) == e),
        }
    }

    pub fn into_arc(self) -> Arc<StarSemigroup> {
        Arc::new(self)
    }
}

/// A left action of a *-semigroup on the point set of a kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupAction {
    semigroup: Arc<StarSemigroup>,
    n_points: usize,
    /// `table[s * n_points + x] = s.x`
    table: Vec<usize>,
}

impl SemigroupAction {
    pub fn new(
        semigroup: Arc<StarSemigroup>,
        n_points: usize,
        table: Vec<usize>,
    ) -> Result<Self, KernelError> {
        if table.len() != semigroup.len() * n_points || n_points == 0 {
            return Err(KernelError::ActionSize);
        }
        if table.iter().any(|&x| x >= n_points) {
            return Err(KernelError::ActionSize);
        }
        let action = SemigroupAction {
            semigroup,
            n_points,
            table,
        };
        let sg = &action.semigroup;
        for s in 0..sg.len() {
            for t in 0..sg.len() {
                for x in 0..n_points {
                    if action.act(sg.mul(s, t), x) != action.act(s, action.act(t, x)) {
                        return Err(KernelError::ActionNotCompatible {
                            s: sg.label(s).to_string(),
                            t: sg.label(t).to_string(),
                            x: format!("#{x}"),
                        });
                    }
                }
            }
        }
        if let Some(e) = sg.unit() {
            for x in 0..n_points {
                if action.act(e, x) != x {
                    return Err(KernelError::UnitAxiom {
                        s: sg.label(e).to_string(),
                    });
                }
            }
        }
        Ok(action)
    }

    /// The identity action of the trivial group.
    pub fn trivial(n_points: usize) -> SemigroupAction {
        SemigroupAction::new(
            Arc::new(StarSemigroup::trivial()),
            n_points,
            (0..n_points).collect(),
        )
        .unwrap()
    }

    pub fn semigroup(&self) -> &Arc<StarSemigroup> {
        &self.semigroup
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn act(&self, s: usize, x: usize) -> usize {
        self.table[s * self.n_points + x]
    }
}

/// Exhaustive invariance check `k(s.x, y) = k(x, s*.y)` over all triples.
pub fn is_invariant(
    kernel: &OperatorKernel,
    action: &SemigroupAction,
    tol: &Tol,
) -> Result<bool, KernelError> {
    Ok(invariance_violation(kernel, action, tol)?.is_none())
}

/// First invariance violation `(s, x, y, residual)`, if any.
pub fn invariance_violation(
    kernel: &OperatorKernel,
    action: &SemigroupAction,
    tol: &Tol,
) -> Result<Option<(usize, usize, usize, f64)>, KernelError> {
    if action.n_points() != kernel.len() {
        return Err(KernelError::ActionSize);
    }
    let sg = action.semigroup();
    for s in 0..sg.len() {
        let s_star = sg.star(s);
        for x in 0..kernel.len() {
            for y in 0..kernel.len() {
                let lhs = kernel.value(action.act(s, x), y);
                let rhs = kernel.value(x, action.act(s_star, y));
                for lam in 0..kernel.space().levels() {
                    let r = fro_norm(&(lhs.level(lam) - rhs.level(lam)));
                    if !tol.ok(r, max_abs(lhs.level(lam))) {
                        return Ok(Some((s, x, y, r)));
                    }
                }
            }
        }
    }
    Ok(None)
}

/// Outcome of the Sz.-Nagy boundedness test for one `(s, lambda)` pair.
#[derive(Debug, Clone)]
pub enum SzNagyBound {
    /// The least `c` with `G^s <= c G` on the range of `G`.
    Finite(f64),
    /// Condition (b) fails; the witness satisfies `<G h, h> = 0` but
    /// `<G^s h, h> > 0`.
    Infinite { witness: CVector },
}

impl SzNagyBound {
    pub fn value(&self) -> f64 {
        match self {
            SzNagyBound::Finite(c) => *c,
            SzNagyBound::Infinite { .. } => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, SzNagyBound::Finite(_))
    }
}

/// Core engine: least `c` with `gs <= c g` in the PSD order, infinity when
/// the range of `gs` escapes the range of `g`.
pub fn sznagy_from_grams(g: &CMatrix, gs: &CMatrix, tol: &Tol) -> SzNagyBound {
    let n = g.nrows();
    if n == 0 {
        return SzNagyBound::Finite(0.0);
    }
    let p = psd_pseudo_sqrt(g);
    let scale = spectral_norm(gs).max(spectral_norm(g));
    let proj_out = crate::linalg::identity(n) - &p.range * p.range.adjoint();
    let corner = &proj_out * gs * &proj_out;
    let cross = &proj_out * gs * &p.range;
    if !tol.ok(spectral_norm(&corner), scale) || !tol.ok(spectral_norm(&cross), scale) {
        let eig = hermitian_eigen(&corner, EigenOrder::Descending);
        let witness = eig.vectors.column(0).into_owned();
        return SzNagyBound::Infinite { witness };
    }
    if p.rank == 0 {
        return SzNagyBound::Finite(0.0);
    }
    let whitened = p.pinv_sqrt.adjoint() * gs * &p.pinv_sqrt;
    let eig = hermitian_eigen(&whitened, EigenOrder::Descending);
    SzNagyBound::Finite(eig.values.first().copied().unwrap_or(0.0).max(0.0))
}

/// Sz.-Nagy boundedness condition (b) for a semigroup element at a level:
/// the least `c_lambda(s)` with `G^s_lambda <= c G_lambda`, or infinity.
pub fn sznagy_bound(
    kernel: &OperatorKernel,
    action: &SemigroupAction,
    s: usize,
    lam: usize,
    tol: &Tol,
) -> Result<SzNagyBound, KernelError> {
    kernel.check_positive_semidefinite(tol)?;
    let g = kernel.gram(lam);
    let gs = kernel.shifted_gram(lam, action, s);
    Ok(sznagy_from_grams(&g, &gs, tol))
}

/// A coherent completely positive map given by the images of the algebra
/// basis, each a locally bounded operator on a common target space.
#[derive(Debug, Clone)]
pub struct CpMap {
    algebra: Arc<LocallyCStarAlgebra>,
    target: Arc<LocallyHilbertSpace>,
    images: Vec<LocallyBoundedOperator>,
}

impl CpMap {
    pub fn from_basis_images(
        algebra: Arc<LocallyCStarAlgebra>,
        images: Vec<LocallyBoundedOperator>,
    ) -> Result<Self, KernelError> {
        if images.len() != algebra.dim() {
            return Err(KernelError::Algebra(AlgebraError::ImageCount {
                expected: algebra.dim(),
                got: images.len(),
            }));
        }
        let target = images[0].domain().clone();
        for img in &images {
            if img.domain() != &target || img.codomain() != &target {
                return Err(KernelError::Operator(OperatorError::SpaceMismatch));
            }
        }
        if target.poset() != algebra.carrier().poset() {
            return Err(KernelError::Operator(OperatorError::PosetMismatch));
        }
        Ok(CpMap {
            algebra,
            target,
            images,
        })
    }

    /// Kraus form `phi(a) = sum_i C_i^* a C_i` with coherent
    /// `C_i : target -> carrier`; completely positive by construction.
    pub fn from_kraus(
        algebra: Arc<LocallyCStarAlgebra>,
        kraus: &[LocallyBoundedOperator],
    ) -> Result<Self, KernelError> {
        if kraus.is_empty() {
            return Err(KernelError::Algebra(AlgebraError::NoGenerators));
        }
        let target = kraus[0].domain().clone();
        for op in kraus {
            if op.domain() != &target || op.codomain() != algebra.carrier() {
                return Err(KernelError::Operator(OperatorError::SpaceMismatch));
            }
        }
        let mut images = Vec::with_capacity(algebra.dim());
        for b in algebra.basis() {
            let mut acc = LocallyBoundedOperator::zero(target.clone(), target.clone());
            for op in kraus {
                let term = op.adjoint().compose(&b.compose(op).unwrap()).unwrap();
                acc = acc.add(&term).unwrap();
            }
            images.push(acc);
        }
        Ok(CpMap {
            algebra,
            target,
            images,
        })
    }

    pub fn algebra(&self) -> &Arc<LocallyCStarAlgebra> {
        &self.algebra
    }

    pub fn target(&self) -> &Arc<LocallyHilbertSpace> {
        &self.target
    }

    pub fn basis_image(&self, k: usize) -> &LocallyBoundedOperator {
        &self.images[k]
    }

    /// `phi` applied to an element given by coefficients over the basis.
    pub fn apply(&self, coeffs: &CVector) -> Result<LocallyBoundedOperator, KernelError> {
        if coeffs.len() != self.algebra.dim() {
            return Err(KernelError::Algebra(AlgebraError::CoefficientLength {
                expected: self.algebra.dim(),
                got: coeffs.len(),
            }));
        }
        let mut acc = LocallyBoundedOperator::zero(self.target.clone(), self.target.clone());
        for (img, &co) in self.images.iter().zip(coeffs.iter()) {
            acc = acc.add(&img.scale(co)).unwrap();
        }
        Ok(acc)
    }
}

/// The left-multiplication structure of a multiplication-stable point set.
pub type StablePointAction = (Arc<StarSemigroup>, SemigroupAction);

/// Builds the kernel `k(a,b) = phi(a* b)` on a finite set of algebra
/// elements, plus the left-multiplication action when the point set is
/// multiplication-stable (products and adjoints of points are again points).
pub fn kernel_from_cp_map(
    phi: &CpMap,
    points: &[(String, CVector)],
    tol: &Tol,
) -> Result<(OperatorKernel, Option<StablePointAction>), KernelError> {
    if points.is_empty() {
        return Err(KernelError::NoPoints);
    }
    let algebra = phi.algebra();
    let m = points.len();
    let mut values = Vec::with_capacity(m * m);
    for (_, a) in points {
        let a_star = algebra.star_coeffs(a)?;
        for (_, b) in points {
            let prod = algebra.product_coeffs(&a_star, b)?;
            values.push(phi.apply(&prod)?);
        }
    }
    let kernel = OperatorKernel::new(
        points.iter().map(|(l, _)| l.clone()).collect(),
        phi.target().clone(),
        values,
    )?;

    // left-multiplication action on a multiplication-stable point set
    let match_point = |v: &CVector| -> Option<usize> {
        let scale = v.norm();
        points
            .iter()
            .position(|(_, p)| (p - v).norm() <= tol.span(scale))
    };
    let mut mult = Vec::with_capacity(m * m);
    let mut star = Vec::with_capacity(m);
    let mut stable = true;
    'outer: for (_, a) in points {
        for (_, b) in points {
            let prod = algebra.product_coeffs(a, b)?;
            match match_point(&prod) {
                Some(i) => mult.push(i),
                None => {
                    stable = false;
                    break 'outer;
                }
            }
        }
    }
    if stable {
        for (_, a) in points {
            match match_point(&algebra.star_coeffs(a)?) {
                Some(i) => star.push(i),
                None => {
                    stable = false;
                    break;
                }
            }
        }
    }
    let action = if stable {
        let unit = algebra
            .identity_coeffs()
            .and_then(match_point);
        let labels = points.iter().map(|(l, _)| l.clone()).collect();
        match StarSemigroup::new(labels, mult.clone(), star, unit) {
            Ok(sg) => {
                let sg = Arc::new(sg);
                // the action table of left multiplication is the
                // multiplication table itself
                match SemigroupAction::new(sg.clone(), m, mult) {
                    Ok(act) => Some((sg, act)),
                    Err(_) => None,
                }
            }
            Err(_) => None,
        }
    } else {
        None
    };

    Ok((kernel, action))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, identity};
    use crate::poset::DirectedPoset;

    fn tol() -> Tol {
        Tol::default()
    }

    fn point_space(d: usize) -> Arc<LocallyHilbertSpace> {
        let poset = Arc::new(DirectedPoset::singleton("*"));
        Arc::new(LocallyHilbertSpace::coordinate(poset, vec![d], &tol()).unwrap())
    }

    /// Scalar kernel on a singleton poset from a real matrix.
    fn scalar_kernel(entries: &[&[f64]]) -> OperatorKernel {
        let m = entries.len();
        let space = point_space(1);
        let mut values = Vec::with_capacity(m * m);
        for row in entries {
            for &e in row.iter() {
                values.push(
                    LocallyBoundedOperator::new(
                        space.clone(),
                        space.clone(),
                        vec![CMatrix::from_row_slice(1, 1, &[c(e, 0.0)])],
                        &tol(),
                    )
                    .unwrap(),
                );
            }
        }
        let points = (0..m).map(|i| format!("x{}", i + 1)).collect();
        OperatorKernel::new(points, space, values).unwrap()
    }

    fn swap_action(sg: Arc<StarSemigroup>) -> SemigroupAction {
        // e fixes, g swaps two points
        SemigroupAction::new(sg, 2, vec![0, 1, 1, 0]).unwrap()
    }

    #[test]
    fn hermitian_examples() {
        assert!(scalar_kernel(&[&[0.0, 0.0], &[0.0, 0.0]]).is_hermitian(&tol()));
        assert!(scalar_kernel(&[&[2.0, 1.0], &[1.0, 2.0]]).is_hermitian(&tol()));
        assert!(!scalar_kernel(&[&[0.0, 1.0], &[2.0, 0.0]]).is_hermitian(&tol()));
    }

    #[test]
    fn psd_examples() {
        // eigenvalues {1,3} by characteristic polynomial
        assert!(scalar_kernel(&[&[2.0, 1.0], &[1.0, 2.0]]).is_positive_semidefinite(&tol()));
        // eigenvalue -1
        assert!(!scalar_kernel(&[&[0.0, 1.0], &[1.0, 0.0]]).is_positive_semidefinite(&tol()));
        assert!(scalar_kernel(&[&[0.0, 0.0], &[0.0, 0.0]]).is_positive_semidefinite(&tol()));
    }

    #[test]
    fn n_positivity_collapses_to_full_gram() {
        let k = scalar_kernel(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert!(k.is_n_positive(1, &tol()));
        assert!(k.is_n_positive(2, &tol()));
        assert!(k.is_n_positive(7, &tol()));
        // 1-positive but not 2-positive: diagonal fine, full Gram indefinite
        let bad = scalar_kernel(&[&[1.0, 5.0], &[5.0, 1.0]]);
        assert!(bad.is_n_positive(1, &tol()));
        assert!(!bad.is_n_positive(2, &tol()));
    }

    #[test]
    fn psd_implies_hermitian_on_random_psd_instances() {
        // k = F*F built from small integer matrices
        for seed in 0..10u32 {
            let f = |i: usize| (((seed as usize * 7 + i * 3) % 5) as f64) - 2.0;
            let fm = CMatrix::from_fn(2, 2, |i, j| c(f(i * 2 + j), f(i + 3 * j + 1)));
            let g = fm.adjoint() * &fm;
            let k = scalar_kernel(&[
                &[g[(0, 0)].re, 0.0],
                &[0.0, g[(1, 1)].re],
            ]);
            // diagonal real PSD kernel
            assert!(k.is_positive_semidefinite(&tol()));
            assert!(k.is_hermitian(&tol()));
            // and the general complex gram as a 2-point operator kernel
            let space = point_space(1);
            let mk = |z: crate::linalg::C| {
                LocallyBoundedOperator::new(
                    space.clone(),
                    space.clone(),
                    vec![CMatrix::from_row_slice(1, 1, &[z])],
                    &tol(),
                )
                .unwrap()
            };
            let kc = OperatorKernel::new(
                vec!["x1".into(), "x2".into()],
                space.clone(),
                vec![mk(g[(0, 0)]), mk(g[(0, 1)]), mk(g[(1, 0)]), mk(g[(1, 1)])],
            )
            .unwrap();
            if kc.is_positive_semidefinite(&tol()) {
                assert!(kc.is_hermitian(&tol()));
            }
        }
    }

    #[test]
    fn semigroup_validation() {
        assert!(StarSemigroup::trivial().is_group());
        let z2 = StarSemigroup::z2();
        assert!(z2.is_group());
        // broken associativity: mult table with a non-associative entry
        let err = StarSemigroup::new(
            vec!["a".into(), "b".into()],
            vec![0, 1, 1, 1],
            vec![0, 1],
            None,
        );
        // (a b) b = b b = b ; a (b b) = a b = b -- fine; (b b) b = b; b (b b) = b
        // this table happens to be associative, so make a truly broken one
        let _ = err;
        let err2 = StarSemigroup::new(
            vec!["a".into(), "b".into()],
            vec![1, 0, 0, 0],
            vec![0, 1],
            None,
        );
        assert!(err2.is_err());
    }

    #[test]
    fn action_compatibility_checked() {
        let z2 = Arc::new(StarSemigroup::z2());
        assert!(SemigroupAction::new(z2.clone(), 2, vec![0, 1, 1, 0]).is_ok());
        // g must act as an involution since g*g = e acts as identity
        let err = SemigroupAction::new(z2, 2, vec![0, 1, 0, 0]).unwrap_err();
        assert!(matches!(err, KernelError::ActionNotCompatible { .. }));
    }

    #[test]
    fn invariance_examples() {
        let k = scalar_kernel(&[&[2.0, 1.0], &[1.0, 2.0]]);
        // trivial semigroup, identity action
        let triv = SemigroupAction::trivial(2);
        assert!(is_invariant(&k, &triv, &tol()).unwrap());
        // Z/2 swap on the symmetric kernel: all 8 triples check out
        let act = swap_action(Arc::new(StarSemigroup::z2()));
        assert!(is_invariant(&k, &act, &tol()).unwrap());
        // swap on diag(1,2): k(g.x1,x2) = k(x2,x2) = 2 != k(x1, g.x2) = k(x1,x1) = 1
        let kd = scalar_kernel(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let viol = invariance_violation(&kd, &act, &tol()).unwrap();
        assert!(viol.is_some());
    }

    #[test]
    fn sznagy_identity_is_one() {
        let k = scalar_kernel(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let act = swap_action(Arc::new(StarSemigroup::z2()));
        let b = sznagy_bound(&k, &act, 0, 0, &tol()).unwrap();
        assert!((b.value() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sznagy_swap_on_symmetric_kernel_is_one() {
        // G^g equals G conjugated by a permutation commuting with it
        let k = scalar_kernel(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let act = swap_action(Arc::new(StarSemigroup::z2()));
        let b = sznagy_bound(&k, &act, 1, 0, &tol()).unwrap();
        assert!((b.value() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sznagy_collapsing_action_is_infinite_with_witness() {
        // s.x1 = s.x2 = x1 on diag(1,0): witness (0,1)
        let k = scalar_kernel(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let sg = StarSemigroup::new(
            vec!["e".into(), "s".into()],
            vec![0, 1, 1, 1],
            vec![0, 1],
            Some(0),
        )
        .unwrap();
        let act = SemigroupAction::new(Arc::new(sg), 2, vec![0, 1, 0, 0]).unwrap();
        let b = sznagy_bound(&k, &act, 1, 0, &tol()).unwrap();
        match b {
            SzNagyBound::Infinite { witness } => {
                // h = (0,1): left side <G^s h, h> = 1, right side <G h, h> = 0
                assert!((witness[1].norm() - 1.0).abs() < 1e-10);
                assert!(witness[0].norm() < 1e-10);
            }
            SzNagyBound::Finite(v) => panic!("expected infinity, got {v}"),
        }
    }

    #[test]
    fn kernel_from_identity_cp_map_on_matrix_units() {
        // phi = identity on M_2, X = matrix units:
        // k(E_ij, E_kl) = E_ji E_kl by the matrix-unit multiplication rule
        let space = point_space(2);
        let mut units = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                let mut m = CMatrix::zeros(2, 2);
                m[(i, j)] = c(1.0, 0.0);
                units.push(
                    LocallyBoundedOperator::new(space.clone(), space.clone(), vec![m], &tol())
                        .unwrap(),
                );
            }
        }
        let algebra = Arc::new(
            LocallyCStarAlgebra::generate(space.clone(), &units, &tol()).unwrap(),
        );
        let phi = CpMap::from_basis_images(
            algebra.clone(),
            algebra.basis().to_vec(),
        )
        .unwrap();
        let points: Vec<(String, CVector)> = units
            .iter()
            .enumerate()
            .map(|(idx, u)| (format!("E{}{}", idx / 2 + 1, idx % 2 + 1), algebra.express(u).unwrap()))
            .collect();
        let (kernel, action) = kernel_from_cp_map(&phi, &points, &tol()).unwrap();
        // spot check: k(E12, E11) = E21 E11 = E21
        let i_e12 = 1usize;
        let i_e11 = 0usize;
        let expect = {
            let mut m = CMatrix::zeros(2, 2);
            m[(1, 0)] = c(1.0, 0.0);
            m
        };
        assert!(fro_norm(&(kernel.value(i_e12, i_e11).top() - &expect)) < 1e-10);
        // matrix units are NOT multiplication stable (E12 E21 = E11 fine, but
        // E11 E22 = 0 is not a point), so no action is returned
        assert!(action.is_none());
    }

    #[test]
    fn kernel_from_kraus_compression_is_psd() {
        // phi(a) = C* a C with C = [[1],[0]]: compression of M_2 to C^1
        let space = point_space(2);
        let target = point_space(1);
        let mut units = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                let mut m = CMatrix::zeros(2, 2);
                m[(i, j)] = c(1.0, 0.0);
                units.push(
                    LocallyBoundedOperator::new(space.clone(), space.clone(), vec![m], &tol())
                        .unwrap(),
                );
            }
        }
        let algebra = Arc::new(
            LocallyCStarAlgebra::generate(space.clone(), &units, &tol()).unwrap(),
        );
        let kraus = LocallyBoundedOperator::new(
            target.clone(),
            space.clone(),
            vec![CMatrix::from_row_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)])],
            &tol(),
        )
        .unwrap();
        let phi = CpMap::from_kraus(algebra.clone(), &[kraus]).unwrap();
        // phi(E11) = 1, phi(E22) = 0
        let e11 = algebra.express(&units[0]).unwrap();
        let e22 = algebra.express(&units[3]).unwrap();
        assert!((phi.apply(&e11).unwrap().top()[(0, 0)].re - 1.0).abs() < 1e-10);
        assert!(phi.apply(&e22).unwrap().top()[(0, 0)].norm() < 1e-10);
        let points: Vec<(String, CVector)> = units
            .iter()
            .enumerate()
            .map(|(idx, u)| (format!("p{idx}"), algebra.express(u).unwrap()))
            .collect();
        let (kernel, _) = kernel_from_cp_map(&phi, &points, &tol()).unwrap();
        assert!(kernel.is_positive_semidefinite(&tol()));
    }

    #[test]
    fn zero_cp_map_gives_zero_kernel() {
        let space = point_space(2);
        let id = LocallyBoundedOperator::identity_on(space.clone());
        let algebra = Arc::new(LocallyCStarAlgebra::generate(space.clone(), &[id], &tol()).unwrap());
        let zero_img = vec![LocallyBoundedOperator::zero(space.clone(), space.clone())];
        let phi = CpMap::from_basis_images(algebra.clone(), zero_img).unwrap();
        let points = vec![("one".to_string(), algebra.identity_coeffs().unwrap().clone())];
        let (kernel, action) = kernel_from_cp_map(&phi, &points, &tol()).unwrap();
        assert!(fro_norm(kernel.value(0, 0).top()) < 1e-12);
        // {1} is multiplication stable
        assert!(action.is_some());
    }

    #[test]
    fn gram_assembly_shapes() {
        let k = scalar_kernel(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let g = k.gram(0);
        assert_eq!(g.nrows(), 2);
        assert!((g[(0, 1)].re - 1.0).abs() < 1e-15);
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)],
        );
        assert!(fro_norm(&(g - expected)) < 1e-15);
        let _ = identity(2);
    }
}
