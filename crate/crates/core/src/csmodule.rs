//! Hilbert modules over concrete locally C*-algebras: gramian validation,
//! seminorms, the operator model built on the dilation engine, and the
//! exterior tensor product.
//!
//! The gramian convention is conjugate-linear in the first argument and
//! linear in the second, matching the block-Gram assembly used everywhere
//! else. Abstract modules carry a partial right-action table; identities
//! involving the action are verified on the defined entries and the
//! undefined ones are reported.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{AlgebraError, LocallyCStarAlgebra};
use crate::dilation::{kolmogorov, DilationError, KolmogorovDecomposition};
use crate::kernel::{KernelError, OperatorKernel};
use crate::linalg::{
    fro_norm, kron, min_eig_hermitian, spectral_norm, vectorize, zeros, CMatrix, CVector,
};
use crate::operator::{LocallyBoundedOperator, OperatorError};
use crate::space::LocallyHilbertSpace;
use crate::tol::Tol;

#[derive(Debug, Error, Clone)]
pub enum ModuleError {
    #[error("gramian is not hermitian (residual {residual:.3e})")]
    GramianNotHermitian { residual: f64 },
    #[error("gramian is not positive at level `{level}` (min eigenvalue {min_eig:.3e})")]
    GramianNotPositive { level: String, min_eig: f64 },
    #[error("action table incompatible with the gramian at generator {generator}, basis {basis} (residual {residual:.3e})")]
    ActionIncompatible {
        generator: usize,
        basis: usize,
        residual: f64,
    },
    #[error("gramian table has {got} entries, expected {expected}")]
    TableSize { expected: usize, got: usize },
    #[error("module element {index} does not map between the module spaces")]
    ElementSpaceMismatch { index: usize },
    #[error("product T^*S falls outside the algebra span (elements {i},{j})")]
    ProductOutsideAlgebra { i: usize, j: usize },
    #[error("module is not closed under the right action (element {element}, basis {basis}, residual {residual:.3e})")]
    NotActionClosed {
        element: usize,
        basis: usize,
        residual: f64,
    },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Dilation(#[from] DilationError),
}

/// A finitely presented pre-Hilbert module: generators, an algebra-valued
/// gramian given by coefficient vectors over the algebra basis, and a
/// partial right-action table `(generator, algebra basis) -> combination of
/// generators`.
#[derive(Debug, Clone)]
pub struct AbstractHilbertModule {
    algebra: Arc<LocallyCStarAlgebra>,
    generators: Vec<String>,
    /// row-major `m x m`; entry `(i,j)` holds `[e_i, e_j]` over the basis
    gramian: Vec<CVector>,
    action: HashMap<(usize, usize), CVector>,
}

/// Verification report for an abstract module.
#[derive(Debug, Clone)]
pub struct ModuleReport {
    pub hermitian_residual: f64,
    /// worst min-eigenvalue over levels (clamped to <= 0)
    pub gram_min_eig: f64,
    /// whether `[e,e] = 0` forces `e = 0` on the generated span
    pub definite: bool,
    pub action_residual: f64,
    /// `(generator, basis)` pairs without a defined action entry
    pub undefined_action: Vec<(usize, usize)>,
}

impl AbstractHilbertModule {
    pub fn new(
        algebra: Arc<LocallyCStarAlgebra>,
        generators: Vec<String>,
        gramian: Vec<CVector>,
        action: HashMap<(usize, usize), CVector>,
    ) -> Result<Self, ModuleError> {
        let m = generators.len();
        if gramian.len() != m * m {
            return Err(ModuleError::TableSize {
                expected: m * m,
                got: gramian.len(),
            });
        }
        Ok(AbstractHilbertModule {
            algebra,
            generators,
            gramian,
            action,
        })
    }

    pub fn algebra(&self) -> &Arc<LocallyCStarAlgebra> {
        &self.algebra
    }

    pub fn generators(&self) -> &[String] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn gram_entry(&self, i: usize, j: usize) -> &CVector {
        &self.gramian[i * self.len() + j]
    }

    pub fn action_entry(&self, generator: usize, basis: usize) -> Option<&CVector> {
        self.action.get(&(generator, basis))
    }

    /// `[e, e]` for `e = sum_i coeffs_i e_i`, as algebra coefficients.
    pub fn self_gram(&self, coeffs: &CVector) -> CVector {
        let mut acc = CVector::zeros(self.algebra.dim());
        for i in 0..self.len() {
            for j in 0..self.len() {
                acc += self.gram_entry(i, j) * (coeffs[i].conj() * coeffs[j]);
            }
        }
        acc
    }

    /// The module seminorm `p(e) = p_mu([e,e])^{1/2}`.
    pub fn seminorm(&self, coeffs: &CVector, mu: usize) -> Result<f64, ModuleError> {
        Ok(self.algebra.seminorm(&self.self_gram(coeffs), mu)?.sqrt())
    }

    /// Block Gram of the represented gramian at a level.
    fn block_gram(&self, lam: usize) -> Result<CMatrix, ModuleError> {
        let m = self.len();
        let d = self.algebra.carrier().dim(lam);
        let mut g = zeros(m * d, m * d);
        for i in 0..m {
            for j in 0..m {
                let block = self.algebra.level_matrix(self.gram_entry(i, j), lam)?;
                for r in 0..d {
                    for c_ in 0..d {
                        g[(i * d + r, j * d + c_)] = block[(r, c_)];
                    }
                }
            }
        }
        Ok(g)
    }
}

/// Verifies the gramian axioms and the action compatibility, reporting
/// definiteness of the gramian on the generated span.
pub fn check_module(module: &AbstractHilbertModule, tol: &Tol) -> Result<ModuleReport, ModuleError> {
    let algebra = module.algebra();
    let m = module.len();
    let top = algebra.carrier().poset().maximum();

    // hermitian: [e_i, e_j]^* = [e_j, e_i]
    let mut herm = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let starred = algebra.star_coeffs(module.gram_entry(i, j))?;
            let lhs = algebra.level_matrix(&starred, top)?;
            let rhs = algebra.level_matrix(module.gram_entry(j, i), top)?;
            scale = scale.max(fro_norm(&rhs));
            herm = herm.max(fro_norm(&(lhs - rhs)));
        }
    }
    if !tol.ok(herm, scale) {
        return Err(ModuleError::GramianNotHermitian { residual: herm });
    }

    // positivity: the represented block Gram is PSD at every level
    let mut worst_min = 0.0f64;
    for lam in 0..algebra.carrier().levels() {
        let g = module.block_gram(lam)?;
        if g.nrows() == 0 {
            continue;
        }
        let min_eig = min_eig_hermitian(&g);
        worst_min = worst_min.min(min_eig);
        if min_eig < -tol.abs(spectral_norm(&g)) {
            return Err(ModuleError::GramianNotPositive {
                level: algebra.carrier().poset().label(lam).to_string(),
                min_eig,
            });
        }
    }

    // definiteness: no nonzero c with (c (x) I) entirely inside ker(G_top)
    let g_top = module.block_gram(top)?;
    let d = algebra.carrier().dim(top);
    let mut map = zeros(m * d * d, m);
    for i in 0..m {
        let mut sel = zeros(m * d, d);
        for r in 0..d {
            sel[(i * d + r, r)] = crate::linalg::c(1.0, 0.0);
        }
        let img = &g_top * sel;
        let v = vectorize(&img);
        for (r, &z) in v.iter().enumerate() {
            map[(r, i)] = z;
        }
    }
    let definite = crate::linalg::rank(&map) == m;

    // action compatibility: [e_i, e_j . a_k] = [e_i, e_j] a_k on all defined entries
    let mut action_res = 0.0f64;
    let mut undefined = Vec::new();
    for j in 0..m {
        for k in 0..algebra.dim() {
            match module.action_entry(j, k) {
                None => undefined.push((j, k)),
                Some(combo) => {
                    let mut basis_k = CVector::zeros(algebra.dim());
                    basis_k[k] = crate::linalg::c(1.0, 0.0);
                    for i in 0..m {
                        // left side through the action table
                        let mut lhs = CVector::zeros(algebra.dim());
                        for l in 0..m {
                            lhs += module.gram_entry(i, l) * combo[l];
                        }
                        // right side through the algebra product
                        let rhs = algebra.product_coeffs(module.gram_entry(i, j), &basis_k)?;
                        let lm = algebra.level_matrix(&lhs, top)?;
                        let rm = algebra.level_matrix(&rhs, top)?;
                        let rm_norm = fro_norm(&rm);
                        let r = fro_norm(&(lm - rm));
                        if !tol.ok(r, scale.max(rm_norm)) {
                            return Err(ModuleError::ActionIncompatible {
                                generator: j,
                                basis: k,
                                residual: r,
                            });
                        }
                        action_res = action_res.max(r);
                    }
                }
            }
        }
    }

    Ok(ModuleReport {
        hermitian_residual: herm,
        gram_min_eig: worst_min.min(0.0),
        definite,
        action_residual: action_res,
        undefined_action: undefined,
    })
}

/// The operator model of an abstract module: `Phi(e_i) = V(e_i)` from the
/// Kolmogorov decomposition of the kernel `k(e_i, e_j) = phi([e_i, e_j])`,
/// where `phi` is the identity representation of the concrete algebra.
#[derive(Debug, Clone)]
pub struct OperatorModel {
    pub decomposition: KolmogorovDecomposition,
    /// `Phi(e_i) : H -> K`
    pub phi: Vec<LocallyBoundedOperator>,
    /// worst `||Phi(e_i)^* Phi(e_j) - rep([e_i, e_j])||`
    pub gram_residual: f64,
    /// worst `||Phi(e_j . a_k) - Phi(e_j) rep(a_k)||` over defined entries
    pub action_residual: f64,
    pub module_report: ModuleReport,
}

pub fn operator_model(
    module: &AbstractHilbertModule,
    tol: &Tol,
) -> Result<OperatorModel, ModuleError> {
    let report = check_module(module, tol)?;
    let algebra = module.algebra().clone();
    let space = algebra.carrier().clone();
    let m = module.len();

    let mut values = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            values.push(algebra.element(module.gram_entry(i, j))?);
        }
    }
    let kernel = OperatorKernel::new(module.generators().to_vec(), space.clone(), values)?;
    let decomposition = kolmogorov(&kernel, tol)?;
    let phi: Vec<LocallyBoundedOperator> = decomposition.v_all().to_vec();

    let gram_residual = decomposition.factorization_residual(&kernel);

    let mut action_residual = 0.0f64;
    for j in 0..m {
        for k in 0..algebra.dim() {
            if let Some(combo) = module.action_entry(j, k) {
                let mut lhs = LocallyBoundedOperator::zero(
                    space.clone(),
                    decomposition.dilation_space().clone(),
                );
                for l in 0..m {
                    lhs = lhs.add(&phi[l].scale(combo[l])).unwrap();
                }
                let mut basis_k = CVector::zeros(algebra.dim());
                basis_k[k] = crate::linalg::c(1.0, 0.0);
                let rhs = phi[j].compose(&algebra.element(&basis_k)?)?;
                action_residual = action_residual.max(lhs.distance(&rhs));
            }
        }
    }

    Ok(OperatorModel {
        decomposition,
        phi,
        gram_residual,
        action_residual,
        module_report: report,
    })
}

/// A concrete Hilbert module: locally bounded operators `H -> K` whose
/// mutual products `T^* S` land in a given algebra on `H`, closed under the
/// right action of that algebra.
#[derive(Debug, Clone)]
pub struct ConcreteHilbertModule {
    algebra: Arc<LocallyCStarAlgebra>,
    domain: Arc<LocallyHilbertSpace>,
    codomain: Arc<LocallyHilbertSpace>,
    elements: Vec<LocallyBoundedOperator>,
    /// `[T_i, T_j] = T_i^* T_j` over the algebra basis, row-major
    gramian: Vec<CVector>,
    /// right action table: `(element, algebra basis) -> combination`
    action: BTreeMap<(usize, usize), CVector>,
}

impl ConcreteHilbertModule {
    /// Validates `T^*S` membership for all pairs and the right-action
    /// closure, deriving the gramian and action tables.
    pub fn new(
        algebra: Arc<LocallyCStarAlgebra>,
        elements: Vec<LocallyBoundedOperator>,
        tol: &Tol,
    ) -> Result<Self, ModuleError> {
        assert!(!elements.is_empty(), "module needs at least one element");
        let domain = elements[0].domain().clone();
        let codomain = elements[0].codomain().clone();
        for (index, t) in elements.iter().enumerate() {
            if t.domain() != &domain || t.codomain() != &codomain {
                return Err(ModuleError::ElementSpaceMismatch { index });
            }
        }
        if &domain != algebra.carrier() {
            return Err(ModuleError::ElementSpaceMismatch { index: 0 });
        }
        let m = elements.len();
        let mut gramian = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let prod = elements[i].adjoint().compose(&elements[j])?;
                match algebra.express(&prod) {
                    Ok(coeffs) => gramian.push(coeffs),
                    Err(_) => return Err(ModuleError::ProductOutsideAlgebra { i, j }),
                }
            }
        }
        // right-action closure: T_i rep(basis_k) in span{T_j}
        let d_top = codomain.dim(codomain.poset().maximum());
        let dd = domain.dim(domain.poset().maximum());
        let mut span = zeros(d_top * dd, m);
        for (j, t) in elements.iter().enumerate() {
            span.set_column(j, &vectorize(t.top()));
        }
        let mut action = BTreeMap::new();
        for (i, t) in elements.iter().enumerate() {
            for k in 0..algebra.dim() {
                let mut basis_k = CVector::zeros(algebra.dim());
                basis_k[k] = crate::linalg::c(1.0, 0.0);
                let moved = t.compose(&algebra.element(&basis_k)?)?;
                let target = CMatrix::from_column_slice(
                    d_top * dd,
                    1,
                    vectorize(moved.top()).as_slice(),
                );
                let (x, residual) = crate::linalg::lstsq(&span, &target);
                if residual > tol.span(fro_norm(moved.top())) {
                    return Err(ModuleError::NotActionClosed {
                        element: i,
                        basis: k,
                        residual,
                    });
                }
                action.insert((i, k), CVector::from_column_slice(x.as_slice()));
            }
        }
        Ok(ConcreteHilbertModule {
            algebra,
            domain,
            codomain,
            elements,
            gramian,
            action,
        })
    }

    pub fn algebra(&self) -> &Arc<LocallyCStarAlgebra> {
        &self.algebra
    }

    pub fn domain(&self) -> &Arc<LocallyHilbertSpace> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<LocallyHilbertSpace> {
        &self.codomain
    }

    pub fn elements(&self) -> &[LocallyBoundedOperator] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn gram_entry(&self, i: usize, j: usize) -> &CVector {
        &self.gramian[i * self.len() + j]
    }

    pub fn action_entry(&self, element: usize, basis: usize) -> Option<&CVector> {
        self.action.get(&(element, basis))
    }

    /// The abstract presentation of this concrete module: total action.
    pub fn to_abstract(&self) -> AbstractHilbertModule {
        let labels = (0..self.len()).map(|i| format!("t{i}")).collect();
        let action: HashMap<(usize, usize), CVector> =
            self.action.iter().map(|(&k, v)| (k, v.clone())).collect();
        AbstractHilbertModule {
            algebra: self.algebra.clone(),
            generators: labels,
            gramian: self.gramian.clone(),
            action,
        }
    }
}

/// Report of the exterior tensor identities on elementary pairs.
#[derive(Debug, Clone)]
pub struct ExteriorTensorReport {
    /// worst `||(e (x) f)^*(e' (x) f') - [e,e'] (x) [f,f']||`
    pub gram_kron_residual: f64,
    /// worst `||(e (x) f)(a (x) b) - (ea) (x) (fb)||`
    pub action_residual: f64,
}

/// The exterior tensor product of two concrete modules over the spatial
/// tensor product of their algebras. Elements are the elementary tensors of
/// the factor elements, in left-major order; the gramian is computed
/// concretely and verified against the Kronecker of the factor gramians.
pub fn exterior_tensor(
    e: &ConcreteHilbertModule,
    f: &ConcreteHilbertModule,
    tol: &Tol,
) -> Result<(ConcreteHilbertModule, ExteriorTensorReport), ModuleError> {
    let tensor_algebra = Arc::new(e.algebra.spatial_tensor(&f.algebra, tol)?);
    let mut elements = Vec::with_capacity(e.len() * f.len());
    for t in &e.elements {
        for s in &f.elements {
            elements.push(t.tensor(s, tol));
        }
    }
    // rebuild the elements over the tensor algebra's carrier so the space
    // instances match exactly
    let carrier = tensor_algebra.carrier().clone();
    let codomain = Arc::new(e.codomain.tensor(&f.codomain, tol));
    let elements: Vec<LocallyBoundedOperator> = elements
        .into_iter()
        .map(|op| {
            LocallyBoundedOperator::new(
                carrier.clone(),
                codomain.clone(),
                (0..carrier.levels()).map(|l| op.level(l).clone()).collect(),
                tol,
            )
        })
        .collect::<Result<_, _>>()?;
    let module = ConcreteHilbertModule::new(tensor_algebra.clone(), elements, tol)?;

    // gramian identity against the Kronecker of the factor gramians
    let mut gram_res = 0.0f64;
    let e_top = e.algebra.carrier().poset().maximum();
    let f_top = f.algebra.carrier().poset().maximum();
    let t_top = carrier.poset().maximum();
    for i in 0..e.len() {
        for j in 0..f.len() {
            for k in 0..e.len() {
                for l in 0..f.len() {
                    let concrete = tensor_algebra.level_matrix(
                        module.gram_entry(i * f.len() + j, k * f.len() + l),
                        t_top,
                    )?;
                    let left = e.algebra.level_matrix(e.gram_entry(i, k), e_top)?;
                    let right = f.algebra.level_matrix(f.gram_entry(j, l), f_top)?;
                    let expected = kron(&left, &right);
                    gram_res = gram_res.max(fro_norm(&(concrete - expected)));
                }
            }
        }
    }

    // right-action identity (e (x) f)(a (x) b) = (ea) (x) (fb) on the
    // algebra bases of the factors
    let mut action_res = 0.0f64;
    for (i, t) in e.elements.iter().enumerate() {
        for (j, s) in f.elements.iter().enumerate() {
            for ka in 0..e.algebra.dim() {
                for kb in 0..f.algebra.dim() {
                    let mut ua = CVector::zeros(e.algebra.dim());
                    ua[ka] = crate::linalg::c(1.0, 0.0);
                    let mut ub = CVector::zeros(f.algebra.dim());
                    ub[kb] = crate::linalg::c(1.0, 0.0);
                    let ea = t.compose(&e.algebra.element(&ua)?)?;
                    let fb = s.compose(&f.algebra.element(&ub)?)?;
                    let rhs = ea.tensor(&fb, tol);
                    let lhs = module.elements[i * f.len() + j].compose(
                        &tensor_algebra.element(
                            &tensor_algebra
                                .express_top(&kron(
                                    &e.algebra.element(&ua)?.top().clone(),
                                    &f.algebra.element(&ub)?.top().clone(),
                                ))?,
                        )?,
                    )?;
                    let r = (0..carrier.levels())
                        .map(|lam| fro_norm(&(lhs.level(lam) - rhs.level(lam))))
                        .fold(0.0, f64::max);
                    action_res = action_res.max(r);
                }
            }
        }
    }

    Ok((
        module,
        ExteriorTensorReport {
            gram_kron_residual: gram_res,
            action_residual: action_res,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, identity};
    use crate::sample::{full_matrix_algebra, random_abstract_module, SampleRng};

    fn tol() -> Tol {
        Tol::default()
    }

    /// E = A as a module over itself: generators = basis, gramian from the
    /// structure constants, total action table.
    fn algebra_as_module(algebra: &Arc<LocallyCStarAlgebra>) -> AbstractHilbertModule {
        let n = algebra.dim();
        let mut gramian = Vec::with_capacity(n * n);
        for i in 0..n {
            let mut ei = CVector::zeros(n);
            ei[i] = c(1.0, 0.0);
            let star = algebra.star_coeffs(&ei).unwrap();
            for j in 0..n {
                let mut ej = CVector::zeros(n);
                ej[j] = c(1.0, 0.0);
                gramian.push(algebra.product_coeffs(&star, &ej).unwrap());
            }
        }
        let mut action = HashMap::new();
        for i in 0..n {
            for k in 0..n {
                let mut ei = CVector::zeros(n);
                ei[i] = c(1.0, 0.0);
                let mut ek = CVector::zeros(n);
                ek[k] = c(1.0, 0.0);
                action.insert((i, k), algebra.product_coeffs(&ei, &ek).unwrap());
            }
        }
        AbstractHilbertModule::new(
            algebra.clone(),
            (0..n).map(|i| format!("e{i}")).collect(),
            gramian,
            action,
        )
        .unwrap()
    }

    #[test]
    fn algebra_over_itself_is_a_valid_module() {
        let algebra = full_matrix_algebra(2, 1);
        let module = algebra_as_module(&algebra);
        let report = check_module(&module, &tol()).unwrap();
        assert!(report.definite);
        assert!(report.undefined_action.is_empty());
        assert!(report.action_residual < 1e-10);
    }

    #[test]
    fn indefinite_gramian_is_rejected() {
        // gramian [[1,0],[0,-1]] over C
        let algebra = full_matrix_algebra(1, 1);
        let one = algebra.identity_coeffs().unwrap().clone();
        let minus = &one * c(-1.0, 0.0);
        let zero = CVector::zeros(1);
        let module = AbstractHilbertModule::new(
            algebra,
            vec!["e1".into(), "e2".into()],
            vec![one.clone(), zero.clone(), zero, minus],
            HashMap::new(),
        )
        .unwrap();
        assert!(matches!(
            check_module(&module, &tol()),
            Err(ModuleError::GramianNotPositive { .. })
        ));
    }

    #[test]
    fn standard_gramian_on_c2_is_definite() {
        // E = C^2 over C with the standard gramian
        let algebra = full_matrix_algebra(1, 1);
        let one = algebra.identity_coeffs().unwrap().clone();
        let zero = CVector::zeros(1);
        let module = AbstractHilbertModule::new(
            algebra,
            vec!["e1".into(), "e2".into()],
            vec![one.clone(), zero.clone(), zero, one],
            HashMap::new(),
        )
        .unwrap();
        let report = check_module(&module, &tol()).unwrap();
        assert!(report.definite);
    }

    #[test]
    fn module_seminorm_matches_operator_norm() {
        // for E = M_2 over M_2, the seminorm of e equals its spectral norm
        let algebra = full_matrix_algebra(2, 1);
        let module = algebra_as_module(&algebra);
        let mut rng = SampleRng::new(5);
        for _ in 0..5 {
            let coeffs = CVector::from_iterator(4, (0..4).map(|_| rng.complex_gaussian()));
            let p = module.seminorm(&coeffs, 0).unwrap();
            let op = algebra.element(&coeffs).unwrap();
            assert!((p - op.seminorm(0)).abs() < 1e-8);
        }
        // homogeneity of the seminorm: || 2e || = 2 ||e||
        let e = CVector::from_iterator(4, (0..4).map(|_| rng.complex_gaussian()));
        let two_e = &e * c(2.0, 0.0);
        assert!(
            (module.seminorm(&two_e, 0).unwrap() - 2.0 * module.seminorm(&e, 0).unwrap()).abs()
                < 1e-8
        );
        // unit generator: [e,e] = I gives seminorm 1
        let one = algebra.identity_coeffs().unwrap().clone();
        let id_module = AbstractHilbertModule::new(
            algebra.clone(),
            vec!["u".into()],
            vec![one],
            HashMap::new(),
        )
        .unwrap();
        let mut u = CVector::zeros(1);
        u[0] = c(1.0, 0.0);
        assert!((id_module.seminorm(&u, 0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn operator_model_on_m2_over_itself() {
        let algebra = full_matrix_algebra(2, 1);
        let module = algebra_as_module(&algebra);
        let model = operator_model(&module, &tol()).unwrap();
        assert!(model.gram_residual < 1e-8, "gram residual {}", model.gram_residual);
        assert!(model.action_residual < 1e-8, "action residual {}", model.action_residual);
        // Phi(a)^* Phi(b) = a^* b for all basis pairs, checked directly
        for i in 0..4 {
            for j in 0..4 {
                let prod = model.phi[i].adjoint().compose(&model.phi[j]).unwrap();
                let expect = algebra.element(module.gram_entry(i, j)).unwrap();
                assert!(prod.distance(&expect) < 1e-8);
            }
        }
    }

    #[test]
    fn operator_model_single_isometric_column() {
        // E = C over C with [1,1] = 1: Phi(1) is a single isometric column
        let algebra = full_matrix_algebra(1, 1);
        let one = algebra.identity_coeffs().unwrap().clone();
        let module = AbstractHilbertModule::new(
            algebra,
            vec!["u".into()],
            vec![one],
            HashMap::new(),
        )
        .unwrap();
        let model = operator_model(&module, &tol()).unwrap();
        assert_eq!(model.decomposition.dilation_space().top_dim(), 1);
        let v = model.phi[0].top();
        assert!((v[(0, 0)].norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn operator_model_rank_deficient_gramian() {
        // gramian [[1,1],[1,1]] over C: Phi(e1) = Phi(e2), one-dimensional K
        let algebra = full_matrix_algebra(1, 1);
        let one = algebra.identity_coeffs().unwrap().clone();
        let module = AbstractHilbertModule::new(
            algebra,
            vec!["e1".into(), "e2".into()],
            vec![one.clone(), one.clone(), one.clone(), one],
            HashMap::new(),
        )
        .unwrap();
        let model = operator_model(&module, &tol()).unwrap();
        assert_eq!(model.decomposition.dilation_space().top_dim(), 1);
        assert!(model.phi[0].distance(&model.phi[1]) < 1e-10);
        let report = model.module_report;
        assert!(!report.definite);
    }

    #[test]
    fn random_ideal_modules_model_correctly() {
        let algebra = full_matrix_algebra(2, 1);
        for seed in 0..5u64 {
            let mut rng = SampleRng::new(100 + seed);
            let module = random_abstract_module(&algebra, 2, true, &mut rng);
            let model = operator_model(&module, &tol()).unwrap();
            let g = module.block_gram(0).unwrap();
            let bound = 1e-8 * (1.0 + crate::linalg::spectral_norm(&g));
            assert!(model.gram_residual <= bound);
            assert!(model.action_residual <= bound);
            // ideal modules have a total action table
            assert!(model.module_report.undefined_action.is_empty());
        }
    }

    #[test]
    fn concrete_module_from_algebra_elements() {
        let algebra = full_matrix_algebra(2, 1);
        let module =
            ConcreteHilbertModule::new(algebra.clone(), algebra.basis().to_vec(), &tol()).unwrap();
        assert_eq!(module.len(), 4);
        // gramian of matrix units: E_ij^* E_kl = delta_ik E_jl
        let g = module.gram_entry(0, 0);
        let rep = algebra.element(g).unwrap();
        let mut expect = zeros(2, 2);
        expect[(0, 0)] = c(1.0, 0.0);
        assert!(fro_norm(&(rep.top() - &expect)) < 1e-10);
    }

    #[test]
    fn exterior_tensor_of_one_dimensional_modules() {
        // E = F = C over C: one-dimensional module, gramian 1
        let algebra = full_matrix_algebra(1, 1);
        let id = LocallyBoundedOperator::identity_on(algebra.carrier().clone());
        let e = ConcreteHilbertModule::new(algebra.clone(), vec![id.clone()], &tol()).unwrap();
        let (t, report) = exterior_tensor(&e, &e, &tol()).unwrap();
        assert_eq!(t.len(), 1);
        assert!(report.gram_kron_residual < 1e-12);
        assert!(report.action_residual < 1e-12);
        let g = t.algebra().element(t.gram_entry(0, 0)).unwrap();
        assert!(fro_norm(&(g.top() - identity(1))) < 1e-10);
    }

    #[test]
    fn exterior_tensor_mixed_product_identity() {
        // E = M_2 over M_2, F = C^2-like module over C
        let m2 = full_matrix_algebra(2, 1);
        let e = ConcreteHilbertModule::new(m2.clone(), m2.basis().to_vec(), &tol()).unwrap();
        let c1 = full_matrix_algebra(1, 1);
        // two elements of B_loc(C, C^2): columns
        let col_space = crate::sample::coordinate_space(
            c1.carrier().poset().clone(),
            vec![2],
        );
        let col = |a: f64, b: f64| {
            LocallyBoundedOperator::new(
                c1.carrier().clone(),
                col_space.clone(),
                vec![CMatrix::from_row_slice(2, 1, &[c(a, 0.0), c(b, 0.0)])],
                &tol(),
            )
            .unwrap()
        };
        let f = ConcreteHilbertModule::new(c1.clone(), vec![col(1.0, 0.0), col(0.0, 1.0)], &tol()).unwrap();
        let (t, report) = exterior_tensor(&e, &f, &tol()).unwrap();
        assert_eq!(t.len(), 8);
        // (A (x) B)(C (x) D) = (AC) (x) (BD) computed directly
        assert!(report.gram_kron_residual < 1e-10);
        assert!(report.action_residual < 1e-10);
    }
}
