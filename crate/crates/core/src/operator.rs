//! Locally bounded operators: coherent, adjoint-coherent matrix nets between
//! two locally Hilbert spaces over the same poset.
//!
//! A net `{T_lambda}` is accepted only if both coherence conditions hold for
//! every comparable pair, within tolerance:
//!
//! ```text
//! T_mu J^H_{mu,lambda} = J^K_{mu,lambda} T_lambda
//! T_mu^* J^K_{mu,lambda} = J^H_{mu,lambda} T_lambda^*
//! ```
//!
//! Validation is mandatory at construction; coherence is a checked invariant,
//! not an assumption.

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{
    c, fro_norm, hermitian_eigen, identity, kron, max_abs, psd_sqrt, spectral_norm, zeros, CMatrix,
    EigenOrder, C,
};
use crate::space::{LocalVector, LocallyHilbertSpace, SpaceError};
use crate::tol::Tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("level `{level}`: expected a {rows}x{cols} matrix, got {got_rows}x{got_cols}")]
    ShapeMismatch {
        level: String,
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("coherence violated between `{lower}` and `{upper}` (residual {residual:.3e})")]
    CoherenceViolation {
        lower: String,
        upper: String,
        residual: f64,
    },
    #[error("adjoint coherence violated between `{lower}` and `{upper}` (residual {residual:.3e})")]
    AdjointCoherenceViolation {
        lower: String,
        upper: String,
        residual: f64,
    },
    #[error("operators live over different posets")]
    PosetMismatch,
    #[error("domain/codomain spaces do not match")]
    SpaceMismatch,
    #[error("operation requires an endomorphism (domain = codomain)")]
    NotEndomorphism,
    #[error("expected {expected} level matrices, got {got}")]
    LevelCount { expected: usize, got: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// A validated coherent net of matrices `{T_lambda : H_lambda -> K_lambda}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocallyBoundedOperator {
    domain: Arc<LocallyHilbertSpace>,
    codomain: Arc<LocallyHilbertSpace>,
    levels: Vec<CMatrix>,
    /// worst coherence residual observed at validation
    coherence_residual: f64,
}

impl LocallyBoundedOperator {
    /// Validates a full net of level matrices against both coherence axioms,
    /// exhaustively over comparable pairs. Reports the worst residual.
    pub fn new(
        domain: Arc<LocallyHilbertSpace>,
        codomain: Arc<LocallyHilbertSpace>,
        levels: Vec<CMatrix>,
        tol: &Tol,
    ) -> Result<Self, OperatorError> {
        if domain.poset() != codomain.poset() {
            return Err(OperatorError::PosetMismatch);
        }
        let poset = domain.poset();
        if levels.len() != poset.len() {
            return Err(OperatorError::LevelCount {
                expected: poset.len(),
                got: levels.len(),
            });
        }
        for (lam, m) in levels.iter().enumerate() {
            if m.nrows() != codomain.dim(lam) || m.ncols() != domain.dim(lam) {
                return Err(OperatorError::ShapeMismatch {
                    level: poset.label(lam).to_string(),
                    rows: codomain.dim(lam),
                    cols: domain.dim(lam),
                    got_rows: m.nrows(),
                    got_cols: m.ncols(),
                });
            }
        }
        let mut worst = 0.0f64;
        let scale = levels.iter().map(max_abs).fold(0.0, f64::max);
        for (lam, mu) in poset.comparable_pairs() {
            if lam == mu {
                continue;
            }
            let jh = domain.connecting(lam, mu);
            let jk = codomain.connecting(lam, mu);
            let direct = &levels[mu] * &jh - &jk * &levels[lam];
            let r1 = fro_norm(&direct);
            if !tol.ok(r1, scale) {
                return Err(OperatorError::CoherenceViolation {
                    lower: poset.label(lam).to_string(),
                    upper: poset.label(mu).to_string(),
                    residual: r1,
                });
            }
            let adj = levels[mu].adjoint() * &jk - &jh * levels[lam].adjoint();
            let r2 = fro_norm(&adj);
            if !tol.ok(r2, scale) {
                return Err(OperatorError::AdjointCoherenceViolation {
                    lower: poset.label(lam).to_string(),
                    upper: poset.label(mu).to_string(),
                    residual: r2,
                });
            }
            worst = worst.max(r1).max(r2);
        }
        Ok(LocallyBoundedOperator {
            domain,
            codomain,
            levels,
            coherence_residual: worst,
        })
    }

    /// Builds the net from a top-level matrix by compression,
    /// `T_lambda = J^K_lambda^* T_top J^H_lambda`, then validates it.
    /// Fails when the top matrix does not reduce the level subspaces.
    pub fn from_top(
        domain: Arc<LocallyHilbertSpace>,
        codomain: Arc<LocallyHilbertSpace>,
        top: CMatrix,
        tol: &Tol,
    ) -> Result<Self, OperatorError> {
        if domain.poset() != codomain.poset() {
            return Err(OperatorError::PosetMismatch);
        }
        let poset = domain.poset().clone();
        let levels: Vec<CMatrix> = (0..poset.len())
            .map(|lam| codomain.isometry(lam).adjoint() * &top * domain.isometry(lam))
            .collect();
        Self::new(domain, codomain, levels, tol)
    }

    pub fn identity_on(space: Arc<LocallyHilbertSpace>) -> Self {
        let levels = (0..space.levels()).map(|l| identity(space.dim(l))).collect();
        LocallyBoundedOperator {
            domain: space.clone(),
            codomain: space,
            levels,
            coherence_residual: 0.0,
        }
    }

    pub fn zero(domain: Arc<LocallyHilbertSpace>, codomain: Arc<LocallyHilbertSpace>) -> Self {
        let levels = (0..domain.levels())
            .map(|l| zeros(codomain.dim(l), domain.dim(l)))
            .collect();
        LocallyBoundedOperator {
            domain,
            codomain,
            levels,
            coherence_residual: 0.0,
        }
    }

    pub fn domain(&self) -> &Arc<LocallyHilbertSpace> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<LocallyHilbertSpace> {
        &self.codomain
    }

    pub fn level(&self, lam: usize) -> &CMatrix {
        &self.levels[lam]
    }

    pub fn top(&self) -> &CMatrix {
        &self.levels[self.domain.poset().maximum()]
    }

    pub fn coherence_residual(&self) -> f64 {
        self.coherence_residual
    }

    pub fn is_endomorphism(&self) -> bool {
        self.domain == self.codomain
    }

    pub fn adjoint(&self) -> LocallyBoundedOperator {
        LocallyBoundedOperator {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            levels: self.levels.iter().map(|m| m.adjoint()).collect(),
            coherence_residual: self.coherence_residual,
        }
    }

    /// `self . rhs`, applying `rhs` first.
    pub fn compose(&self, rhs: &LocallyBoundedOperator) -> Result<Self, OperatorError> {
        if self.domain != rhs.codomain {
            return Err(OperatorError::SpaceMismatch);
        }
        let levels = self
            .levels
            .iter()
            .zip(rhs.levels.iter())
            .map(|(a, b)| a * b)
            .collect();
        Ok(LocallyBoundedOperator {
            domain: rhs.domain.clone(),
            codomain: self.codomain.clone(),
            levels,
            coherence_residual: self.coherence_residual.max(rhs.coherence_residual),
        })
    }

    pub fn add(&self, rhs: &LocallyBoundedOperator) -> Result<Self, OperatorError> {
        if self.domain != rhs.domain || self.codomain != rhs.codomain {
            return Err(OperatorError::SpaceMismatch);
        }
        let levels = self
            .levels
            .iter()
            .zip(rhs.levels.iter())
            .map(|(a, b)| a + b)
            .collect();
        Ok(LocallyBoundedOperator {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            levels,
            coherence_residual: self.coherence_residual.max(rhs.coherence_residual),
        })
    }

    pub fn sub(&self, rhs: &LocallyBoundedOperator) -> Result<Self, OperatorError> {
        self.add(&rhs.scale(c(-1.0, 0.0)))
    }

    pub fn scale(&self, factor: C) -> LocallyBoundedOperator {
        LocallyBoundedOperator {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            levels: self.levels.iter().map(|m| m.map(|z| z * factor)).collect(),
            coherence_residual: self.coherence_residual,
        }
    }

    pub fn apply(&self, v: &LocalVector) -> Result<LocalVector, OperatorError> {
        self.domain.check_vector(v)?;
        Ok(LocalVector::new(v.level, &self.levels[v.level] * &v.coords))
    }

    /// `q_mu(T)`: the spectral norm of the level-`mu` matrix.
    pub fn seminorm(&self, mu: usize) -> f64 {
        spectral_norm(&self.levels[mu])
    }

    /// Max of the level seminorms; exact over the finite poset.
    pub fn sup_seminorm(&self) -> f64 {
        (0..self.levels.len())
            .map(|mu| self.seminorm(mu))
            .fold(0.0, f64::max)
    }

    pub fn is_locally_selfadjoint(&self, tol: &Tol) -> Result<bool, OperatorError> {
        if !self.is_endomorphism() {
            return Err(OperatorError::NotEndomorphism);
        }
        Ok(self.levels.iter().all(|m| {
            let r = fro_norm(&(m - m.adjoint()));
            tol.ok(r, max_abs(m))
        }))
    }

    pub fn is_locally_positive(&self, tol: &Tol) -> Result<bool, OperatorError> {
        if !self.is_endomorphism() {
            return Err(OperatorError::NotEndomorphism);
        }
        if !self.is_locally_selfadjoint(tol)? {
            return Ok(false);
        }
        Ok(self.levels.iter().all(|m| {
            if m.nrows() == 0 {
                return true;
            }
            let herm = (m + m.adjoint()).scale(0.5);
            let e = hermitian_eigen(&herm, EigenOrder::Descending);
            let bound = tol.abs(spectral_norm(m));
            e.values.iter().all(|&v| v >= -bound)
        }))
    }

    pub fn is_locally_unitary(&self, tol: &Tol) -> Result<bool, OperatorError> {
        if !self.is_endomorphism() {
            return Err(OperatorError::NotEndomorphism);
        }
        Ok(self.levels.iter().all(|m| {
            let n = m.nrows();
            let r1 = fro_norm(&(m.adjoint() * m - identity(n)));
            let r2 = fro_norm(&(m * m.adjoint() - identity(n)));
            let scale = max_abs(m);
            tol.ok(r1, scale) && tol.ok(r2, scale)
        }))
    }

    /// Levelwise PSD square root of a locally positive endomorphism;
    /// the witness for `T = S^* S`.
    pub fn positive_sqrt(&self, tol: &Tol) -> Result<Self, OperatorError> {
        if !self.is_endomorphism() {
            return Err(OperatorError::NotEndomorphism);
        }
        let levels: Vec<CMatrix> = self.levels.iter().map(psd_sqrt).collect();
        Self::new(self.domain.clone(), self.codomain.clone(), levels, tol)
    }

    /// Kronecker tensor of two operators; lives on the tensor-product spaces
    /// over the product poset, level `(lambda, alpha)` matrix
    /// `T_lambda (x) S_alpha`.
    pub fn tensor(&self, rhs: &LocallyBoundedOperator, tol: &Tol) -> LocallyBoundedOperator {
        let domain = Arc::new(self.domain.tensor(rhs.domain(), tol));
        let codomain = if self.domain == self.codomain && rhs.domain == rhs.codomain {
            domain.clone()
        } else {
            Arc::new(self.codomain.tensor(rhs.codomain(), tol))
        };
        let mut levels = Vec::with_capacity(domain.levels());
        for i in 0..self.levels.len() {
            for j in 0..rhs.levels.len() {
                levels.push(kron(&self.levels[i], &rhs.levels[j]));
            }
        }
        LocallyBoundedOperator {
            domain,
            codomain,
            levels,
            coherence_residual: self.coherence_residual.max(rhs.coherence_residual),
        }
    }

    /// Distance between two nets of the same shape: worst Frobenius
    /// difference across levels.
    pub fn distance(&self, rhs: &LocallyBoundedOperator) -> f64 {
        self.levels
            .iter()
            .zip(rhs.levels.iter())
            .map(|(a, b)| fro_norm(&(a - b)))
            .fold(0.0, f64::max)
    }

    pub fn into_arc(self) -> Arc<LocallyBoundedOperator> {
        Arc::new(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poset::DirectedPoset;

    fn tol() -> Tol {
        Tol::default()
    }

    fn chain_space(dims: Vec<usize>) -> Arc<LocallyHilbertSpace> {
        let n = dims.len();
        let labels: Vec<String> = (0..n).map(|i| format!("l{i}")).collect();
        let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        let pairs: Vec<(&str, &str)> = refs.windows(2).map(|w| (w[0], w[1])).collect();
        let poset = Arc::new(DirectedPoset::new(&refs, &pairs).unwrap());
        Arc::new(LocallyHilbertSpace::coordinate(poset, dims, &tol()).unwrap())
    }

    fn mat(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_row_slice(
            rows,
            cols,
            &data.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>(),
        )
    }

    #[test]
    fn identity_net_is_valid() {
        let h = chain_space(vec![1, 2]);
        let id = LocallyBoundedOperator::identity_on(h.clone());
        let revalidated =
            LocallyBoundedOperator::new(h.clone(), h, vec![mat(1, 1, &[1.0]), identity(2)], &tol());
        assert!(revalidated.is_ok());
        assert_eq!(id.seminorm(1), 1.0);
    }

    #[test]
    fn block_diagonal_reduces_the_subspace() {
        let h = chain_space(vec![1, 2]);
        let t = LocallyBoundedOperator::new(
            h.clone(),
            h,
            vec![mat(1, 1, &[2.0]), mat(2, 2, &[2.0, 0.0, 0.0, 3.0])],
            &tol(),
        )
        .unwrap();
        assert!(t.coherence_residual() < 1e-12);
        assert_eq!(t.seminorm(1), 3.0);
    }

    #[test]
    fn upper_triangular_breaks_adjoint_coherence() {
        // T_b^* e_1 = (2,1)^T leaves span{e_1}
        let h = chain_space(vec![1, 2]);
        let err = LocallyBoundedOperator::new(
            h.clone(),
            h,
            vec![mat(1, 1, &[2.0]), mat(2, 2, &[2.0, 1.0, 0.0, 3.0])],
            &tol(),
        )
        .unwrap_err();
        assert!(matches!(err, OperatorError::AdjointCoherenceViolation { .. }));
    }

    #[test]
    fn adjoint_is_an_involution() {
        let h = chain_space(vec![1, 2]);
        let t = LocallyBoundedOperator::new(
            h.clone(),
            h.clone(),
            vec![
                CMatrix::from_row_slice(1, 1, &[c(2.0, 1.0)]),
                CMatrix::from_row_slice(
                    2,
                    2,
                    &[c(2.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -3.0)],
                ),
            ],
            &tol(),
        )
        .unwrap();
        assert_eq!(t.adjoint().adjoint(), t);
        let id = LocallyBoundedOperator::identity_on(h);
        assert_eq!(id.adjoint(), id);
    }

    #[test]
    fn compose_with_adjoint_is_locally_positive() {
        let h = chain_space(vec![1, 2]);
        let t = LocallyBoundedOperator::new(
            h.clone(),
            h,
            vec![
                CMatrix::from_row_slice(1, 1, &[c(0.4, -1.2)]),
                CMatrix::from_row_slice(
                    2,
                    2,
                    &[c(0.4, -1.2), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.5)],
                ),
            ],
            &tol(),
        )
        .unwrap();
        let prod = t.adjoint().compose(&t).unwrap();
        assert!(prod.is_locally_positive(&tol()).unwrap());
    }

    #[test]
    fn apply_respects_levels_and_coherence() {
        let h = chain_space(vec![1, 2]);
        let t = LocallyBoundedOperator::new(
            h.clone(),
            h.clone(),
            vec![mat(1, 1, &[2.0]), mat(2, 2, &[2.0, 0.0, 0.0, 3.0])],
            &tol(),
        )
        .unwrap();
        // eigenvector: diag(2,3) e_2 = 3 e_2
        let e2 = LocalVector::basis(1, 2, 1);
        let out = t.apply(&e2).unwrap();
        assert!((out.coords[1] - c(3.0, 0.0)).norm() < 1e-12);
        // coherence witness: apply low then embed = embed then apply high
        let v = LocalVector::new(0, nalgebra::DVector::from_vec(vec![c(1.5, -0.5)]));
        let low = t.apply(&v).unwrap();
        let emb_low = h.connecting(0, 1) * &low.coords;
        let emb_v = LocalVector::new(1, h.connecting(0, 1) * &v.coords);
        let high = t.apply(&emb_v).unwrap();
        assert!(fro_norm(&CMatrix::from_column_slice(
            2,
            1,
            (emb_low - high.coords).as_slice()
        )) < 1e-12);
    }

    #[test]
    fn seminorm_examples() {
        let h = chain_space(vec![2]);
        let id = LocallyBoundedOperator::identity_on(h.clone());
        assert!((id.seminorm(0) - 1.0).abs() < 1e-12);
        let d = LocallyBoundedOperator::new(
            h.clone(),
            h.clone(),
            vec![mat(2, 2, &[2.0, 0.0, 0.0, 3.0])],
            &tol(),
        )
        .unwrap();
        assert!((d.seminorm(0) - 3.0).abs() < 1e-12);
        // [[0,2],[0,0]]: singular values from T^*T eigenvalues {4,0}
        let n = LocallyBoundedOperator::new(
            h.clone(),
            h,
            vec![mat(2, 2, &[0.0, 2.0, 0.0, 0.0])],
            &tol(),
        )
        .unwrap();
        assert!((n.seminorm(0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn operator_classes_on_signature_matrix() {
        let h = chain_space(vec![2]);
        let id = LocallyBoundedOperator::identity_on(h.clone());
        assert!(id.is_locally_selfadjoint(&tol()).unwrap());
        assert!(id.is_locally_positive(&tol()).unwrap());
        assert!(id.is_locally_unitary(&tol()).unwrap());
        let sig = LocallyBoundedOperator::new(
            h.clone(),
            h,
            vec![mat(2, 2, &[1.0, 0.0, 0.0, -1.0])],
            &tol(),
        )
        .unwrap();
        assert!(sig.is_locally_selfadjoint(&tol()).unwrap());
        assert!(sig.is_locally_unitary(&tol()).unwrap());
        assert!(!sig.is_locally_positive(&tol()).unwrap());
    }

    #[test]
    fn positive_sqrt_roundtrip() {
        let h = chain_space(vec![1, 2]);
        let t = LocallyBoundedOperator::new(
            h.clone(),
            h,
            vec![mat(1, 1, &[2.0]), mat(2, 2, &[2.0, 0.0, 0.0, 5.0])],
            &tol(),
        )
        .unwrap();
        let s = t.positive_sqrt(&tol()).unwrap();
        let back = s.adjoint().compose(&s).unwrap();
        assert!(back.distance(&t) < 1e-10);
    }

    #[test]
    fn tensor_identities() {
        let h = chain_space(vec![1, 2]);
        let id = LocallyBoundedOperator::identity_on(h.clone());
        let t = LocallyBoundedOperator::new(
            h.clone(),
            h.clone(),
            vec![
                CMatrix::from_row_slice(1, 1, &[c(0.0, 2.0)]),
                CMatrix::from_row_slice(
                    2,
                    2,
                    &[c(0.0, 2.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)],
                ),
            ],
            &tol(),
        )
        .unwrap();
        let s = LocallyBoundedOperator::new(
            h.clone(),
            h,
            vec![mat(1, 1, &[1.0]), mat(2, 2, &[1.0, 0.0, 0.0, -2.0])],
            &tol(),
        )
        .unwrap();
        // I (x) I = I
        let ii = id.tensor(&id, &tol());
        let top_id = identity(4);
        assert!(fro_norm(&(ii.top() - top_id)) < 1e-12);
        // (T (x) S)^* = T^* (x) S^* entrywise
        let lhs = t.tensor(&s, &tol()).adjoint();
        let rhs = t.adjoint().tensor(&s.adjoint(), &tol());
        assert!(lhs.distance(&rhs) < 1e-12);
        // tensor satisfies the coherence axioms on the product poset
        let validated = LocallyBoundedOperator::new(
            lhs.domain().clone(),
            lhs.codomain().clone(),
            (0..lhs.domain().levels()).map(|l| lhs.level(l).clone()).collect(),
            &tol(),
        );
        assert!(validated.is_ok());
        // seminorm multiplicativity q_{(l,a)}(T x S) = q_l(T) q_a(S)
        let ts = t.tensor(&s, &tol());
        for i in 0..2 {
            for j in 0..2 {
                let lam = i * 2 + j;
                assert!((ts.seminorm(lam) - t.seminorm(i) * s.seminorm(j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn tensor_preserves_positivity() {
        let h = chain_space(vec![1, 2]);
        let t = LocallyBoundedOperator::new(
            h.clone(),
            h.clone(),
            vec![mat(1, 1, &[2.0]), mat(2, 2, &[2.0, 0.0, 0.0, 1.0])],
            &tol(),
        )
        .unwrap();
        let s = LocallyBoundedOperator::new(
            h.clone(),
            h,
            vec![mat(1, 1, &[3.0]), mat(2, 2, &[3.0, 0.0, 0.0, 0.5])],
            &tol(),
        )
        .unwrap();
        assert!(t.is_locally_positive(&tol()).unwrap());
        assert!(s.is_locally_positive(&tol()).unwrap());
        assert!(t.tensor(&s, &tol()).is_locally_positive(&tol()).unwrap());
    }

    #[test]
    fn from_top_compression_matches_levels() {
        let h = chain_space(vec![1, 2]);
        let top = mat(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let t = LocallyBoundedOperator::from_top(h.clone(), h.clone(), top, &tol()).unwrap();
        assert!((t.level(0)[(0, 0)].re - 2.0).abs() < 1e-12);
        // a top matrix that does not reduce the chain fails
        let bad = mat(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(LocallyBoundedOperator::from_top(h.clone(), h, bad, &tol()).is_err());
    }
}
