//! Locally Hilbert spaces: coherent nets of finite-dimensional complex
//! inner-product spaces over a directed poset.
//!
//! Every level embeds isometrically into the ambient space at the poset
//! maximum; the pairwise embeddings `J_{mu,lambda} = J_mu^* J_lambda` are
//! derived, never stored, so global consistency holds by construction and
//! range inclusion reduces to one projection residual per comparable pair.

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{c, fro_norm, identity, inner, kron, max_abs, CMatrix, CVector, C};
use crate::poset::DirectedPoset;
use crate::tol::Tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("level `{level}`: embedding is not isometric (residual {residual:.3e})")]
    NotIsometric { level: String, residual: f64 },
    #[error("levels `{lower}` <= `{upper}`: range inclusion fails (residual {residual:.3e})")]
    NotNested {
        lower: String,
        upper: String,
        residual: f64,
    },
    #[error("level `{level}`: expected a {rows}x{cols} embedding, got {got_rows}x{got_cols}")]
    EmbeddingShape {
        level: String,
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("levels `{lower}` <= `{upper}`: dimension {dim_lower} exceeds {dim_upper}")]
    DimensionMismatch {
        lower: String,
        upper: String,
        dim_lower: usize,
        dim_upper: usize,
    },
    #[error("level `{level}`: dimension must be positive")]
    ZeroDimension { level: String },
    #[error("embedding at the maximum element must be the identity")]
    TopNotIdentity,
    #[error("expected {expected} levels, got {got}")]
    LevelCount { expected: usize, got: usize },
    #[error("vector at level `{level}` has length {got}, expected {expected}")]
    VectorLength {
        level: String,
        expected: usize,
        got: usize,
    },
    #[error("spaces live over different posets")]
    PosetMismatch,
}

/// How the ambient isometries of a new space are specified.
pub enum Embeddings {
    /// `H_lambda` is the span of the first `d_lambda` standard basis vectors.
    Coordinate,
    /// Explicit ambient matrices `J_lambda` of shape `d_top x d_lambda`,
    /// one per poset element in iteration order.
    Explicit(Vec<CMatrix>),
}

/// A net of finite-dimensional Hilbert spaces `{H_lambda}` with coherent
/// isometric embeddings into the ambient space at the poset maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct LocallyHilbertSpace {
    poset: Arc<DirectedPoset>,
    dims: Vec<usize>,
    /// ambient isometries, `isometries[lambda]` is `d_top x d_lambda`
    isometries: Vec<CMatrix>,
}

/// A vector presented at a specific level of a locally Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalVector {
    pub level: usize,
    pub coords: CVector,
}

impl LocalVector {
    pub fn new(level: usize, coords: CVector) -> Self {
        LocalVector { level, coords }
    }

    pub fn basis(level: usize, dim: usize, k: usize) -> Self {
        let mut coords = CVector::zeros(dim);
        coords[k] = c(1.0, 0.0);
        LocalVector { level, coords }
    }
}

impl LocallyHilbertSpace {
    /// Validated constructor; dimensions must be positive.
    pub fn new(
        poset: Arc<DirectedPoset>,
        dims: Vec<usize>,
        embeddings: Embeddings,
        tol: &Tol,
    ) -> Result<Self, SpaceError> {
        if dims.len() != poset.len() {
            return Err(SpaceError::LevelCount {
                expected: poset.len(),
                got: dims.len(),
            });
        }
        for (i, &d) in dims.iter().enumerate() {
            if d == 0 {
                return Err(SpaceError::ZeroDimension {
                    level: poset.label(i).to_string(),
                });
            }
        }
        let top = poset.maximum();
        let d_top = dims[top];
        let isometries = match embeddings {
            Embeddings::Coordinate => {
                for (a, b) in poset.comparable_pairs() {
                    if dims[a] > dims[b] {
                        return Err(SpaceError::DimensionMismatch {
                            lower: poset.label(a).to_string(),
                            upper: poset.label(b).to_string(),
                            dim_lower: dims[a],
                            dim_upper: dims[b],
                        });
                    }
                }
                dims.iter()
                    .map(|&d| identity(d_top).columns(0, d).into_owned())
                    .collect()
            }
            Embeddings::Explicit(ms) => ms,
        };
        let space = LocallyHilbertSpace {
            poset,
            dims,
            isometries,
        };
        space.validate(tol)?;
        Ok(space)
    }

    /// Coordinate-model space: `H_lambda = span{e_1..e_{d_lambda}}`.
    pub fn coordinate(
        poset: Arc<DirectedPoset>,
        dims: Vec<usize>,
        tol: &Tol,
    ) -> Result<Self, SpaceError> {
        Self::new(poset, dims, Embeddings::Coordinate, tol)
    }

    /// Constructor for internally built spaces (dilation ranges), where
    /// zero-dimensional levels are legal.
    pub(crate) fn from_ambient(
        poset: Arc<DirectedPoset>,
        isometries: Vec<CMatrix>,
        tol: &Tol,
    ) -> Result<Self, SpaceError> {
        let dims = isometries.iter().map(|m| m.ncols()).collect();
        let space = LocallyHilbertSpace {
            poset,
            dims,
            isometries,
        };
        space.validate(tol)?;
        Ok(space)
    }

    fn validate(&self, tol: &Tol) -> Result<(), SpaceError> {
        let poset = &self.poset;
        let top = poset.maximum();
        let d_top = self.dims[top];
        for lam in 0..poset.len() {
            let j = &self.isometries[lam];
            if j.nrows() != d_top || j.ncols() != self.dims[lam] {
                return Err(SpaceError::EmbeddingShape {
                    level: poset.label(lam).to_string(),
                    rows: d_top,
                    cols: self.dims[lam],
                    got_rows: j.nrows(),
                    got_cols: j.ncols(),
                });
            }
            let gram = j.adjoint() * j;
            let residual = fro_norm(&(&gram - identity(self.dims[lam])));
            if !tol.ok(residual, max_abs(j)) {
                return Err(SpaceError::NotIsometric {
                    level: poset.label(lam).to_string(),
                    residual,
                });
            }
        }
        let top_res = fro_norm(&(&self.isometries[top] - identity(d_top)));
        if !tol.ok(top_res, 1.0) {
            return Err(SpaceError::TopNotIdentity);
        }
        for (lam, mu) in poset.comparable_pairs() {
            if lam == mu {
                continue;
            }
            if self.dims[lam] > self.dims[mu] {
                return Err(SpaceError::DimensionMismatch {
                    lower: poset.label(lam).to_string(),
                    upper: poset.label(mu).to_string(),
                    dim_lower: self.dims[lam],
                    dim_upper: self.dims[mu],
                });
            }
            // range(J_lam) inside range(J_mu): projection residual
            let jl = &self.isometries[lam];
            let jm = &self.isometries[mu];
            let proj = jm * (jm.adjoint() * jl);
            let residual = fro_norm(&(&proj - jl));
            if !tol.ok(residual, max_abs(jl)) {
                return Err(SpaceError::NotNested {
                    lower: poset.label(lam).to_string(),
                    upper: poset.label(mu).to_string(),
                    residual,
                });
            }
        }
        Ok(())
    }

    pub fn poset(&self) -> &Arc<DirectedPoset> {
        &self.poset
    }

    pub fn levels(&self) -> usize {
        self.poset.len()
    }

    pub fn dim(&self, level: usize) -> usize {
        self.dims[level]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn top_dim(&self) -> usize {
        self.dims[self.poset.maximum()]
    }

    /// Ambient isometry `J_lambda : H_lambda -> H_top`.
    pub fn isometry(&self, level: usize) -> &CMatrix {
        &self.isometries[level]
    }

    /// Derived embedding `J_{mu,lambda} = J_mu^* J_lambda` for `lambda <= mu`.
    pub fn connecting(&self, lam: usize, mu: usize) -> CMatrix {
        debug_assert!(self.poset.leq(lam, mu));
        self.isometries[mu].adjoint() * &self.isometries[lam]
    }

    pub fn check_vector(&self, v: &LocalVector) -> Result<(), SpaceError> {
        let expected = self.dims[v.level];
        if v.coords.len() != expected {
            return Err(SpaceError::VectorLength {
                level: self.poset.label(v.level).to_string(),
                expected,
                got: v.coords.len(),
            });
        }
        Ok(())
    }

    /// Coordinates of `v` in the ambient top-level space.
    pub fn ambient(&self, v: &LocalVector) -> CVector {
        &self.isometries[v.level] * &v.coords
    }

    /// Canonical inner product, evaluated through any common upper level;
    /// conjugate-linear in the first argument.
    pub fn inner_product(&self, u: &LocalVector, v: &LocalVector) -> C {
        inner(&self.ambient(u), &self.ambient(v))
    }

    /// Inner product evaluated at a specific common upper level `nu`;
    /// used to test independence of the chosen level.
    pub fn inner_product_at(&self, u: &LocalVector, v: &LocalVector, nu: usize) -> C {
        let ju = self.connecting(u.level, nu) * &u.coords;
        let jv = self.connecting(v.level, nu) * &v.coords;
        inner(&ju, &jv)
    }

    /// Tensor product space over the product poset, with level dims
    /// `d_lambda * d_alpha` and embeddings `J_lambda (x) J_alpha`.
    pub fn tensor(&self, other: &LocallyHilbertSpace, tol: &Tol) -> LocallyHilbertSpace {
        let poset = Arc::new(self.poset.product(other.poset()));
        let mut isometries = Vec::with_capacity(poset.len());
        for i in 0..self.poset.len() {
            for j in 0..other.poset.len() {
                isometries.push(kron(&self.isometries[i], &other.isometries[j]));
            }
        }
        LocallyHilbertSpace::from_ambient(poset, isometries, tol)
            .expect("tensor of valid spaces is valid")
    }

    /// Poset index pairs `(lambda, mu)` with `lambda <= mu`.
    pub fn comparable_pairs(&self) -> Vec<(usize, usize)> {
        self.poset.comparable_pairs()
    }

    pub fn into_arc(self) -> Arc<LocallyHilbertSpace> {
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

    fn chain2() -> Arc<DirectedPoset> {
        Arc::new(DirectedPoset::new(&["a", "b"], &[("a", "b")]).unwrap())
    }

    fn diamond() -> Arc<DirectedPoset> {
        Arc::new(
            DirectedPoset::new(
                &["a", "b", "c", "d"],
                &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")],
            )
            .unwrap(),
        )
    }

    #[test]
    fn coordinate_chain_is_valid() {
        let h = LocallyHilbertSpace::coordinate(chain2(), vec![1, 2], &tol()).unwrap();
        assert_eq!(h.top_dim(), 2);
        assert_eq!(h.dim(0), 1);
    }

    #[test]
    fn non_monotone_dims_rejected() {
        let err = LocallyHilbertSpace::coordinate(chain2(), vec![2, 1], &tol()).unwrap_err();
        assert!(matches!(err, SpaceError::DimensionMismatch { .. }));
    }

    #[test]
    fn diamond_coordinate_embeddings_multiply_out() {
        let h = LocallyHilbertSpace::coordinate(diamond(), vec![1, 2, 2, 3], &tol()).unwrap();
        // J_{d,b} is the first-two-columns embedding: J*J = I verified directly
        let j_db = h.connecting(1, 3);
        assert_eq!(j_db.ncols(), 2);
        let g = j_db.adjoint() * &j_db;
        assert!(fro_norm(&(g - identity(2))) < 1e-12);
        // transitivity J_{d,a} = J_{d,b} J_{b,a}
        let lhs = h.connecting(0, 3);
        let rhs = h.connecting(1, 3) * h.connecting(0, 1);
        assert!(fro_norm(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn explicit_non_isometry_rejected() {
        let j_a = CMatrix::from_row_slice(2, 1, &[c(1.0, 0.0), c(1.0, 0.0)]);
        let err = LocallyHilbertSpace::new(
            chain2(),
            vec![1, 2],
            Embeddings::Explicit(vec![j_a, identity(2)]),
            &tol(),
        )
        .unwrap_err();
        assert!(matches!(err, SpaceError::NotIsometric { .. }));
    }

    #[test]
    fn explicit_rotated_embedding_is_accepted() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let j_a = CMatrix::from_row_slice(2, 1, &[c(s, 0.0), c(s, 0.0)]);
        let h = LocallyHilbertSpace::new(
            chain2(),
            vec![1, 2],
            Embeddings::Explicit(vec![j_a, identity(2)]),
            &tol(),
        )
        .unwrap();
        let u = LocalVector::basis(0, 1, 0);
        let amb = h.ambient(&u);
        assert!((amb[0].re - s).abs() < 1e-12);
    }

    #[test]
    fn inner_product_examples() {
        let h = LocallyHilbertSpace::coordinate(chain2(), vec![1, 2], &tol()).unwrap();
        // unit vector at any level
        let e1a = LocalVector::basis(0, 1, 0);
        assert!((h.inner_product(&e1a, &e1a).re - 1.0).abs() < 1e-12);
        // orthogonal coordinates across levels
        let e2b = LocalVector::basis(1, 2, 1);
        assert!(h.inner_product(&e1a, &e2b).norm() < 1e-12);
        // direct sesquilinear computation: (1,i)/sqrt2 vs (1,-i)/sqrt2
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = LocalVector::new(1, CVector::from_vec(vec![c(s, 0.0), c(0.0, s)]));
        let v = LocalVector::new(1, CVector::from_vec(vec![c(s, 0.0), c(0.0, -s)]));
        assert!(h.inner_product(&u, &v).norm() < 1e-12);
    }

    #[test]
    fn inner_product_independent_of_upper_level() {
        let h = LocallyHilbertSpace::coordinate(diamond(), vec![1, 2, 2, 3], &tol()).unwrap();
        let u = LocalVector::new(1, CVector::from_vec(vec![c(1.0, 0.5), c(-0.5, 0.25)]));
        let v = LocalVector::new(2, CVector::from_vec(vec![c(0.5, -1.0), c(2.0, 0.0)]));
        let bounds = h.poset().upper_bounds(1, 2);
        assert!(bounds.len() >= 2 || bounds == vec![3]);
        let vals: Vec<C> = bounds
            .iter()
            .map(|&nu| h.inner_product_at(&u, &v, nu))
            .collect();
        for w in vals.windows(2) {
            assert!((w[0] - w[1]).norm() < 1e-12);
        }
        assert!((vals[0] - h.inner_product(&u, &v)).norm() < 1e-12);
    }

    #[test]
    fn tensor_dims_multiply_and_embeddings_are_isometric() {
        let h = LocallyHilbertSpace::coordinate(chain2(), vec![1, 2], &tol()).unwrap();
        let k = LocallyHilbertSpace::coordinate(chain2(), vec![1, 2], &tol()).unwrap();
        let t = h.tensor(&k, &tol());
        assert_eq!(t.levels(), 4);
        let mut dims = t.dims().to_vec();
        dims.sort();
        assert_eq!(dims, vec![1, 2, 2, 4]);
        // isometry (J x J')^*(J x J') = I verified by multiplication
        for lam in 0..t.levels() {
            let j = t.isometry(lam);
            let g = j.adjoint() * j;
            assert!(fro_norm(&(g - identity(t.dim(lam)))) < 1e-12);
        }
    }

    #[test]
    fn singleton_tensor_dimension() {
        let s = Arc::new(DirectedPoset::singleton("*"));
        let h = LocallyHilbertSpace::coordinate(s.clone(), vec![2], &tol()).unwrap();
        let k = LocallyHilbertSpace::coordinate(s, vec![3], &tol()).unwrap();
        let t = h.tensor(&k, &tol());
        assert_eq!(t.top_dim(), 6);
    }
}
