//! Scene files: one JSON document naming every object of a run.
//!
//! Complex numbers are `[re, im]` pairs; matrices are row-major arrays of
//! rows. Pair-keyed tables (`"x1,x2": ...`) must be complete. Objects are
//! resolved eagerly in dependency order, so a scene either yields a fully
//! validated object graph, a reference error, or the first construction
//! error with its context.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use prostar_core::algebra::{MatrixLevel, MatrixProjectiveSystem};
use prostar_core::csmodule::{AbstractHilbertModule, ConcreteHilbertModule};
use prostar_core::kernel::{CpMap, OperatorKernel, SemigroupAction, StarSemigroup};
use prostar_core::linalg::{c, CMatrix, CVector};
use prostar_core::operator::LocallyBoundedOperator;
use prostar_core::poset::DirectedPoset;
use prostar_core::space::{Embeddings, LocallyHilbertSpace};
use prostar_core::{LocallyCStarAlgebra, Tol};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("reference error: {0}")]
    Reference(String),
    #[error("construction of {kind} `{name}` failed: {message}")]
    Construction {
        kind: &'static str,
        name: String,
        message: String,
    },
}

impl SceneError {
    /// Exit code contract: parse and reference errors are 2, construction
    /// errors are 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            SceneError::Parse(_) | SceneError::Reference(_) => 2,
            SceneError::Construction { .. } => 1,
        }
    }
}

pub type Complex = [f64; 2];
pub type Matrix = Vec<Vec<Complex>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosetFragment {
    pub elements: Vec<String>,
    #[serde(default)]
    pub leq: Vec<(String, String)>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum EmbeddingsFragment {
    Keyword(String),
    Explicit(BTreeMap<String, Matrix>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFragment {
    pub poset: String,
    pub dims: BTreeMap<String, usize>,
    pub embeddings: EmbeddingsFragment,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorFragment {
    pub domain: String,
    #[serde(default)]
    pub codomain: Option<String>,
    pub levels: BTreeMap<String, Matrix>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraFragment {
    pub carrier: String,
    pub generators: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFragment {
    pub points: Vec<String>,
    pub space: String,
    pub values: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemigroupFragment {
    pub elements: Vec<String>,
    pub mult: BTreeMap<String, String>,
    pub star: BTreeMap<String, String>,
    #[serde(default)]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionFragment {
    pub semigroup: String,
    pub points: Vec<String>,
    pub table: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpMapFragment {
    pub algebra: String,
    /// Kraus operators `C_i : target -> carrier`; `phi(a) = sum C_i^* a C_i`
    #[serde(default)]
    pub kraus: Option<Vec<String>>,
    /// images of the algebra generators, on a common target space
    #[serde(default)]
    pub images: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemLevelFragment {
    pub dim: usize,
    pub basis: Vec<Matrix>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFragment {
    pub poset: String,
    pub levels: BTreeMap<String, SystemLevelFragment>,
    #[serde(default)]
    pub maps: BTreeMap<String, Matrix>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleFragment {
    pub algebra: String,
    /// concrete module: named operators `H -> K` in the algebra's span order
    #[serde(default)]
    pub elements: Option<Vec<String>>,
    /// abstract module: generator labels plus a gramian of named operators
    #[serde(default)]
    pub generators: Option<Vec<String>>,
    #[serde(default)]
    pub gramian: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobFragment {
    pub command: String,
    #[serde(default)]
    pub kernel: Option<String>,
    #[serde(default)]
    pub action: Option<String>,
    #[serde(default)]
    pub cp_map: Option<String>,
    #[serde(default)]
    pub system: Option<String>,
    #[serde(default)]
    pub left: Option<String>,
    #[serde(default)]
    pub right: Option<String>,
    #[serde(default)]
    pub module: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default)]
    pub posets: BTreeMap<String, PosetFragment>,
    #[serde(default)]
    pub spaces: BTreeMap<String, SpaceFragment>,
    #[serde(default)]
    pub operators: BTreeMap<String, OperatorFragment>,
    #[serde(default)]
    pub algebras: BTreeMap<String, AlgebraFragment>,
    #[serde(default)]
    pub kernels: BTreeMap<String, KernelFragment>,
    #[serde(default)]
    pub semigroups: BTreeMap<String, SemigroupFragment>,
    #[serde(default)]
    pub actions: BTreeMap<String, ActionFragment>,
    #[serde(default)]
    pub cp_maps: BTreeMap<String, CpMapFragment>,
    #[serde(default)]
    pub systems: BTreeMap<String, SystemFragment>,
    #[serde(default)]
    pub modules: BTreeMap<String, ModuleFragment>,
    pub job: Option<JobFragment>,
}

/// Fully resolved and validated object graph.
pub struct Scene {
    pub posets: BTreeMap<String, Arc<DirectedPoset>>,
    pub spaces: BTreeMap<String, Arc<LocallyHilbertSpace>>,
    pub operators: BTreeMap<String, LocallyBoundedOperator>,
    pub algebras: BTreeMap<String, Arc<LocallyCStarAlgebra>>,
    pub kernels: BTreeMap<String, OperatorKernel>,
    pub semigroups: BTreeMap<String, Arc<StarSemigroup>>,
    pub actions: BTreeMap<String, SemigroupAction>,
    pub cp_maps: BTreeMap<String, CpMap>,
    pub systems: BTreeMap<String, MatrixProjectiveSystem>,
    pub abstract_modules: BTreeMap<String, AbstractHilbertModule>,
    pub concrete_modules: BTreeMap<String, ConcreteHilbertModule>,
    pub job: Option<JobFragment>,
}

fn parse_matrix(m: &Matrix, name: &str) -> Result<CMatrix, SceneError> {
    let rows = m.len();
    let cols = m.first().map(|r| r.len()).unwrap_or(0);
    for row in m {
        if row.len() != cols {
            return Err(SceneError::Construction {
                kind: "matrix",
                name: name.to_string(),
                message: "ragged rows".into(),
            });
        }
    }
    let mut out = CMatrix::zeros(rows, cols);
    for (i, row) in m.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            out[(i, j)] = c(re, im);
        }
    }
    Ok(out)
}

fn split_pair<'a>(key: &'a str, table: &str) -> Result<(&'a str, &'a str), SceneError> {
    key.split_once(',').ok_or_else(|| {
        SceneError::Reference(format!("table `{table}` key `{key}` is not a `a,b` pair"))
    })
}

pub fn parse(text: &str) -> Result<SceneFile, SceneError> {
    serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))
}

pub fn resolve(file: SceneFile, tol: &Tol) -> Result<Scene, SceneError> {
    let mut scene = Scene {
        posets: BTreeMap::new(),
        spaces: BTreeMap::new(),
        operators: BTreeMap::new(),
        algebras: BTreeMap::new(),
        kernels: BTreeMap::new(),
        semigroups: BTreeMap::new(),
        actions: BTreeMap::new(),
        cp_maps: BTreeMap::new(),
        systems: BTreeMap::new(),
        abstract_modules: BTreeMap::new(),
        concrete_modules: BTreeMap::new(),
        job: file.job.clone(),
    };

    for (name, frag) in &file.posets {
        let poset = DirectedPoset::new(&frag.elements, &frag.leq).map_err(|e| {
            SceneError::Construction {
                kind: "poset",
                name: name.clone(),
                message: e.to_string(),
            }
        })?;
        scene.posets.insert(name.clone(), Arc::new(poset));
    }

    for (name, frag) in &file.spaces {
        let poset = scene
            .posets
            .get(&frag.poset)
            .ok_or_else(|| SceneError::Reference(format!("space `{name}`: unknown poset `{}`", frag.poset)))?
            .clone();
        let mut dims = Vec::with_capacity(poset.len());
        for lam in 0..poset.len() {
            let label = poset.label(lam);
            let d = frag.dims.get(label).ok_or_else(|| {
                SceneError::Reference(format!("space `{name}`: missing dim for level `{label}`"))
            })?;
            dims.push(*d);
        }
        let embeddings = match &frag.embeddings {
            EmbeddingsFragment::Keyword(k) if k == "coordinate" => Embeddings::Coordinate,
            EmbeddingsFragment::Keyword(k) => {
                return Err(SceneError::Reference(format!(
                    "space `{name}`: unknown embeddings keyword `{k}`"
                )))
            }
            EmbeddingsFragment::Explicit(table) => {
                let mut ms = Vec::with_capacity(poset.len());
                for lam in 0..poset.len() {
                    let label = poset.label(lam);
                    let m = table.get(label).ok_or_else(|| {
                        SceneError::Reference(format!(
                            "space `{name}`: missing embedding for level `{label}`"
                        ))
                    })?;
                    ms.push(parse_matrix(m, name)?);
                }
                Embeddings::Explicit(ms)
            }
        };
        let space = LocallyHilbertSpace::new(poset, dims, embeddings, tol).map_err(|e| {
            SceneError::Construction {
                kind: "space",
                name: name.clone(),
                message: e.to_string(),
            }
        })?;
        scene.spaces.insert(name.clone(), Arc::new(space));
    }

    for (name, frag) in &file.operators {
        let domain = scene
            .spaces
            .get(&frag.domain)
            .ok_or_else(|| SceneError::Reference(format!("operator `{name}`: unknown space `{}`", frag.domain)))?
            .clone();
        let codomain = match &frag.codomain {
            None => domain.clone(),
            Some(k) => scene
                .spaces
                .get(k)
                .ok_or_else(|| SceneError::Reference(format!("operator `{name}`: unknown space `{k}`")))?
                .clone(),
        };
        let poset = domain.poset().clone();
        let mut levels = Vec::with_capacity(poset.len());
        for lam in 0..poset.len() {
            let label = poset.label(lam);
            let m = frag.levels.get(label).ok_or_else(|| {
                SceneError::Reference(format!("operator `{name}`: missing level `{label}`"))
            })?;
            levels.push(parse_matrix(m, name)?);
        }
        let op = LocallyBoundedOperator::new(domain, codomain, levels, tol).map_err(|e| {
            SceneError::Construction {
                kind: "operator",
                name: name.clone(),
                message: e.to_string(),
            }
        })?;
        scene.operators.insert(name.clone(), op);
    }

    for (name, frag) in &file.algebras {
        let carrier = scene
            .spaces
            .get(&frag.carrier)
            .ok_or_else(|| SceneError::Reference(format!("algebra `{name}`: unknown space `{}`", frag.carrier)))?
            .clone();
        let mut gens = Vec::with_capacity(frag.generators.len());
        for g in &frag.generators {
            gens.push(
                scene
                    .operators
                    .get(g)
                    .ok_or_else(|| {
                        SceneError::Reference(format!("algebra `{name}`: unknown operator `{g}`"))
                    })?
                    .clone(),
            );
        }
        let algebra = LocallyCStarAlgebra::generate(carrier, &gens, tol).map_err(|e| {
            SceneError::Construction {
                kind: "algebra",
                name: name.clone(),
                message: e.to_string(),
            }
        })?;
        scene.algebras.insert(name.clone(), Arc::new(algebra));
    }

    for (name, frag) in &file.kernels {
        let space = scene
            .spaces
            .get(&frag.space)
            .ok_or_else(|| SceneError::Reference(format!("kernel `{name}`: unknown space `{}`", frag.space)))?
            .clone();
        let m = frag.points.len();
        let mut values = Vec::with_capacity(m * m);
        for x in &frag.points {
            for y in &frag.points {
                let key = format!("{x},{y}");
                let op_name = frag.values.get(&key).ok_or_else(|| {
                    SceneError::Reference(format!("kernel `{name}`: missing value `{key}`"))
                })?;
                values.push(
                    scene
                        .operators
                        .get(op_name)
                        .ok_or_else(|| {
                            SceneError::Reference(format!(
                                "kernel `{name}`: unknown operator `{op_name}`"
                            ))
                        })?
                        .clone(),
                );
            }
        }
        let kernel = OperatorKernel::new(frag.points.clone(), space, values).map_err(|e| {
            SceneError::Construction {
                kind: "kernel",
                name: name.clone(),
                message: e.to_string(),
            }
        })?;
        scene.kernels.insert(name.clone(), kernel);
    }

    for (name, frag) in &file.semigroups {
        let n = frag.elements.len();
        let index = |label: &str| -> Result<usize, SceneError> {
            frag.elements.iter().position(|e| e == label).ok_or_else(|| {
                SceneError::Reference(format!("semigroup `{name}`: unknown element `{label}`"))
            })
        };
        let mut mult = vec![0usize; n * n];
        for (i, s) in frag.elements.iter().enumerate() {
            for (j, t) in frag.elements.iter().enumerate() {
                let key = format!("{s},{t}");
                let target = frag.mult.get(&key).ok_or_else(|| {
                    SceneError::Reference(format!("semigroup `{name}`: missing product `{key}`"))
                })?;
                mult[i * n + j] = index(target)?;
            }
        }
        let mut star = vec![0usize; n];
        for (i, s) in frag.elements.iter().enumerate() {
            let target = frag.star.get(s).ok_or_else(|| {
                SceneError::Reference(format!("semigroup `{name}`: missing star of `{s}`"))
            })?;
            star[i] = index(target)?;
        }
        let unit = frag.unit.as_ref().map(|u| index(u)).transpose()?;
        let sg = StarSemigroup::new(frag.elements.clone(), mult, star, unit).map_err(|e| {
            SceneError::Construction {
                kind: "semigroup",
                name: name.clone(),
                message: e.to_string(),
            }
        })?;
        scene.semigroups.insert(name.clone(), Arc::new(sg));
    }

    for (name, frag) in &file.actions {
        let sg = scene
            .semigroups
            .get(&frag.semigroup)
            .ok_or_else(|| {
                SceneError::Reference(format!("action `{name}`: unknown semigroup `{}`", frag.semigroup))
            })?
            .clone();
        let m = frag.points.len();
        let point_index = |label: &str| -> Result<usize, SceneError> {
            frag.points.iter().position(|p| p == label).ok_or_else(|| {
                SceneError::Reference(format!("action `{name}`: unknown point `{label}`"))
            })
        };
        let mut table = vec![0usize; sg.len() * m];
        for s in 0..sg.len() {
            for (x, p) in frag.points.iter().enumerate() {
                let key = format!("{},{}", sg.label(s), p);
                let target = frag.table.get(&key).ok_or_else(|| {
                    SceneError::Reference(format!("action `{name}`: missing entry `{key}`"))
                })?;
                table[s * m + x] = point_index(target)?;
            }
        }
        let action = SemigroupAction::new(sg, m, table).map_err(|e| SceneError::Construction {
            kind: "action",
            name: name.clone(),
            message: e.to_string(),
        })?;
        scene.actions.insert(name.clone(), action);
    }

    for (name, frag) in &file.cp_maps {
        let algebra = scene
            .algebras
            .get(&frag.algebra)
            .ok_or_else(|| SceneError::Reference(format!("cp_map `{name}`: unknown algebra `{}`", frag.algebra)))?
            .clone();
        let cp = match (&frag.kraus, &frag.images) {
            (Some(kraus_names), None) => {
                let mut kraus = Vec::with_capacity(kraus_names.len());
                for k in kraus_names {
                    kraus.push(
                        scene
                            .operators
                            .get(k)
                            .ok_or_else(|| {
                                SceneError::Reference(format!(
                                    "cp_map `{name}`: unknown operator `{k}`"
                                ))
                            })?
                            .clone(),
                    );
                }
                CpMap::from_kraus(algebra, &kraus).map_err(|e| SceneError::Construction {
                    kind: "cp_map",
                    name: name.clone(),
                    message: e.to_string(),
                })?
            }
            (None, Some(images)) => {
                resolve_generator_images(&file, &scene, name, &frag.algebra, algebra, images, tol)?
            }
            _ => {
                return Err(SceneError::Reference(format!(
                    "cp_map `{name}`: exactly one of `kraus` or `images` is required"
                )))
            }
        };
        scene.cp_maps.insert(name.clone(), cp);
    }

    for (name, frag) in &file.systems {
        let poset = scene
            .posets
            .get(&frag.poset)
            .ok_or_else(|| SceneError::Reference(format!("system `{name}`: unknown poset `{}`", frag.poset)))?
            .clone();
        let mut levels = Vec::with_capacity(poset.len());
        for lam in 0..poset.len() {
            let label = poset.label(lam);
            let lf = frag.levels.get(label).ok_or_else(|| {
                SceneError::Reference(format!("system `{name}`: missing level `{label}`"))
            })?;
            let basis = lf
                .basis
                .iter()
                .map(|m| parse_matrix(m, name))
                .collect::<Result<Vec<_>, _>>()?;
            levels.push(MatrixLevel { dim: lf.dim, basis });
        }
        let mut maps = HashMap::new();
        for (key, m) in &frag.maps {
            let (a, b) = split_pair(key, "maps")?;
            let ia = poset.index_of(a).map_err(|e| SceneError::Reference(e.to_string()))?;
            let ib = poset.index_of(b).map_err(|e| SceneError::Reference(e.to_string()))?;
            maps.insert((ia, ib), parse_matrix(m, name)?);
        }
        let sys = MatrixProjectiveSystem::new(poset, levels, maps, tol).map_err(|e| {
            SceneError::Construction {
                kind: "system",
                name: name.clone(),
                message: e.to_string(),
            }
        })?;
        scene.systems.insert(name.clone(), sys);
    }

    for (name, frag) in &file.modules {
        let algebra = scene
            .algebras
            .get(&frag.algebra)
            .ok_or_else(|| SceneError::Reference(format!("module `{name}`: unknown algebra `{}`", frag.algebra)))?
            .clone();
        match (&frag.elements, &frag.generators, &frag.gramian) {
            (Some(element_names), None, None) => {
                let mut elements = Vec::with_capacity(element_names.len());
                for e in element_names {
                    elements.push(
                        scene
                            .operators
                            .get(e)
                            .ok_or_else(|| {
                                SceneError::Reference(format!(
                                    "module `{name}`: unknown operator `{e}`"
                                ))
                            })?
                            .clone(),
                    );
                }
                let module = ConcreteHilbertModule::new(algebra, elements, tol).map_err(|e| {
                    SceneError::Construction {
                        kind: "module",
                        name: name.clone(),
                        message: e.to_string(),
                    }
                })?;
                scene.concrete_modules.insert(name.clone(), module);
            }
            (None, Some(generators), Some(gramian)) => {
                let m = generators.len();
                let mut table = Vec::with_capacity(m * m);
                for gi in generators {
                    for gj in generators {
                        let key = format!("{gi},{gj}");
                        let op_name = gramian.get(&key).ok_or_else(|| {
                            SceneError::Reference(format!(
                                "module `{name}`: missing gramian entry `{key}`"
                            ))
                        })?;
                        let op = scene.operators.get(op_name).ok_or_else(|| {
                            SceneError::Reference(format!(
                                "module `{name}`: unknown operator `{op_name}`"
                            ))
                        })?;
                        let coeffs: CVector = algebra.express(op).map_err(|e| {
                            SceneError::Construction {
                                kind: "module",
                                name: name.clone(),
                                message: format!("gramian entry `{key}`: {e}"),
                            }
                        })?;
                        table.push(coeffs);
                    }
                }
                let module = AbstractHilbertModule::new(
                    algebra,
                    generators.clone(),
                    table,
                    HashMap::new(),
                )
                .map_err(|e| SceneError::Construction {
                    kind: "module",
                    name: name.clone(),
                    message: e.to_string(),
                })?;
                scene.abstract_modules.insert(name.clone(), module);
            }
            _ => {
                return Err(SceneError::Reference(format!(
                    "module `{name}`: needs either `elements` (concrete) or `generators` + `gramian` (abstract)"
                )))
            }
        }
    }

    Ok(scene)
}

/// Builds a CP map from images of the algebra's generators; requires the
/// generators to be a linear basis of the algebra.
fn resolve_generator_images(
    file: &SceneFile,
    scene: &Scene,
    name: &str,
    algebra_name: &str,
    algebra: Arc<LocallyCStarAlgebra>,
    images: &BTreeMap<String, String>,
    _tol: &Tol,
) -> Result<CpMap, SceneError> {
    let frag = file.algebras.get(algebra_name).ok_or_else(|| {
        SceneError::Reference(format!("cp_map `{name}`: unknown algebra `{algebra_name}`"))
    })?;
    let n = algebra.dim();
    if frag.generators.len() != n {
        return Err(SceneError::Construction {
            kind: "cp_map",
            name: name.to_string(),
            message: format!(
                "generator images determine the map only when the {} generators span the {}-dimensional algebra",
                frag.generators.len(),
                n
            ),
        });
    }
    // solve for the basis images: basis_k = sum_g x_{g,k} generator_g
    let mut gen_coeffs = CMatrix::zeros(n, n);
    for (g_idx, g) in frag.generators.iter().enumerate() {
        let op = scene.operators.get(g).unwrap();
        let coeffs = algebra.express(op).map_err(|e| SceneError::Construction {
            kind: "cp_map",
            name: name.to_string(),
            message: e.to_string(),
        })?;
        gen_coeffs.set_column(g_idx, &coeffs);
    }
    let inv = prostar_core::linalg::pinv(&gen_coeffs);
    if prostar_core::linalg::rank(&gen_coeffs) != n {
        return Err(SceneError::Construction {
            kind: "cp_map",
            name: name.to_string(),
            message: "generators are linearly dependent; images are underdetermined".into(),
        });
    }
    let mut image_ops = Vec::with_capacity(n);
    for g in &frag.generators {
        let img_name = images.get(g).ok_or_else(|| {
            SceneError::Reference(format!("cp_map `{name}`: missing image for generator `{g}`"))
        })?;
        image_ops.push(
            scene
                .operators
                .get(img_name)
                .ok_or_else(|| {
                    SceneError::Reference(format!("cp_map `{name}`: unknown operator `{img_name}`"))
                })?
                .clone(),
        );
    }
    let mut basis_images = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc = LocallyBoundedOperator::zero(
            image_ops[0].domain().clone(),
            image_ops[0].codomain().clone(),
        );
        for (g_idx, img) in image_ops.iter().enumerate() {
            // x = inv * e_k gives the generator combination of basis_k
            acc = acc.add(&img.scale(inv[(g_idx, k)])).map_err(|e| {
                SceneError::Construction {
                    kind: "cp_map",
                    name: name.to_string(),
                    message: e.to_string(),
                }
            })?;
        }
        basis_images.push(acc);
    }
    CpMap::from_basis_images(algebra, basis_images).map_err(|e| SceneError::Construction {
        kind: "cp_map",
        name: name.to_string(),
        message: e.to_string(),
    })
}
