//! Command dispatch: one scene, one command, one report.

use std::time::Instant;

use serde_json::{json, Map, Value};

use prostar_core::algebra::gelfand_naimark;
use prostar_core::csmodule::{exterior_tensor, operator_model, AbstractHilbertModule};
use prostar_core::dilation::{invariant_dilation, kolmogorov, stinespring, DilationError};
use prostar_core::linalg::CVector;
use prostar_core::space::LocallyHilbertSpace;
use prostar_core::Tol;

use crate::report::{finite, Check, Report};
use crate::scene::{parse, resolve, JobFragment, Scene, SceneError};

#[derive(Debug, Clone)]
pub struct Options {
    pub tol_scale: f64,
    pub stable: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            tol_scale: 1e-9,
            stable: false,
        }
    }
}

pub const COMMANDS: &[&str] = &[
    "validate",
    "dilate",
    "represent",
    "stinespring",
    "tensor",
    "module-embed",
    "module-tensor",
];

/// Runs a command against a scene document; returns the report and the exit
/// code per the contract: 0 pass, 1 construction/verification failure,
/// 2 parse or reference error.
pub fn run(command: &str, scene_text: &str, options: &Options) -> (Report, i32) {
    let started = Instant::now();
    let tol = Tol::new(options.tol_scale);
    let mut report = Report::new(command, options.tol_scale, options.stable);

    let outcome = execute(command, scene_text, &tol, &mut report);
    report.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok(()) => {
            let code = report.exit_code();
            (report, code)
        }
        Err(err) => {
            let code = err.exit_code();
            report.error = Some(error_value(&err));
            (report, code)
        }
    }
}

fn error_value(err: &RunError) -> Value {
    match err {
        RunError::Scene(SceneError::Parse(m)) => json!({"kind": "ParseError", "message": m}),
        RunError::Scene(SceneError::Reference(m)) => {
            json!({"kind": "ReferenceError", "message": m})
        }
        RunError::Scene(SceneError::Construction { kind, name, message }) => {
            json!({"kind": "ConstructionError", "object_kind": kind, "object": name, "message": message})
        }
        RunError::Job(m) => json!({"kind": "ReferenceError", "message": m}),
        RunError::Dilation(e) => {
            let mut obj = Map::new();
            obj.insert("kind".into(), json!(dilation_error_kind(e)));
            obj.insert("message".into(), json!(e.to_string()));
            if let DilationError::BoundednessFails { s, level, witness } = e {
                obj.insert("element".into(), json!(s));
                obj.insert("level".into(), json!(level));
                obj.insert("witness".into(), complex_vector(witness));
            }
            Value::Object(obj)
        }
        RunError::Other(m) => json!({"kind": "ConstructionError", "message": m}),
    }
}

fn dilation_error_kind(e: &DilationError) -> &'static str {
    match e {
        DilationError::Kernel(_) => "KernelNotPSD",
        DilationError::NotInvariant { .. } => "NotInvariant",
        DilationError::BoundednessFails { .. } => "BoundednessFails",
        DilationError::NotMinimal => "NotMinimal",
        DilationError::NotEquivalent { .. } => "NotEquivalent",
        DilationError::NotUnital => "NotUnital",
        DilationError::NotCompletelyPositive(_) => "NotCompletelyPositive",
        DilationError::RepresentationViolated { .. } => "RepresentationViolated",
        _ => "ConstructionError",
    }
}

enum RunError {
    Scene(SceneError),
    Job(String),
    Dilation(DilationError),
    Other(String),
}

impl RunError {
    fn exit_code(&self) -> i32 {
        match self {
            RunError::Scene(e) => e.exit_code(),
            RunError::Job(_) => 2,
            RunError::Dilation(_) | RunError::Other(_) => 1,
        }
    }
}

impl From<SceneError> for RunError {
    fn from(e: SceneError) -> Self {
        RunError::Scene(e)
    }
}

impl From<DilationError> for RunError {
    fn from(e: DilationError) -> Self {
        RunError::Dilation(e)
    }
}

fn complex_vector(v: &CVector) -> Value {
    Value::Array(v.iter().map(|z| json!([z.re, z.im])).collect())
}

fn dims_value(space: &LocallyHilbertSpace) -> Value {
    let mut map = Map::new();
    for lam in 0..space.levels() {
        map.insert(
            space.poset().label(lam).to_string(),
            json!(space.dim(lam)),
        );
    }
    Value::Object(map)
}

fn job_field<'a>(field: &'a Option<String>, name: &str) -> Result<&'a str, RunError> {
    field
        .as_deref()
        .ok_or_else(|| RunError::Job(format!("job is missing the `{name}` argument")))
}

fn execute(
    command: &str,
    scene_text: &str,
    tol: &Tol,
    report: &mut Report,
) -> Result<(), RunError> {
    let file = parse(scene_text)?;
    let job = file.job.clone();
    if let Some(j) = &job {
        if j.command != command {
            return Err(RunError::Job(format!(
                "scene job is `{}`, invoked command is `{command}`",
                j.command
            )));
        }
    }
    let scene = resolve(file, tol)?;

    match command {
        "validate" => cmd_validate(&scene, tol, report),
        "dilate" => cmd_dilate(&scene, job.as_ref(), tol, report),
        "represent" => cmd_represent(&scene, job.as_ref(), tol, report),
        "stinespring" => cmd_stinespring(&scene, job.as_ref(), tol, report),
        "tensor" => cmd_tensor(&scene, job.as_ref(), tol, report),
        "module-embed" => cmd_module_embed(&scene, job.as_ref(), tol, report),
        "module-tensor" => cmd_module_tensor(&scene, job.as_ref(), tol, report),
        other => Err(RunError::Job(format!("unknown command `{other}`"))),
    }
}

fn require_job(job: Option<&JobFragment>) -> Result<&JobFragment, RunError> {
    job.ok_or_else(|| RunError::Job("scene has no `job` section".into()))
}

fn cmd_validate(scene: &Scene, tol: &Tol, report: &mut Report) -> Result<(), RunError> {
    let mut result = Map::new();
    let mut posets = Map::new();
    for (name, p) in &scene.posets {
        report.push(Check::flag(format!("poset/{name}/valid"), true));
        posets.insert(name.clone(), json!({"elements": p.len(), "maximum": p.label(p.maximum())}));
    }
    let mut spaces = Map::new();
    for (name, s) in &scene.spaces {
        report.push(Check::flag(format!("space/{name}/valid"), true));
        spaces.insert(name.clone(), dims_value(s));
    }
    let mut operators = Map::new();
    for (name, op) in &scene.operators {
        let scale = (0..op.domain().levels())
            .map(|l| op.seminorm(l))
            .fold(0.0, f64::max);
        report.push(Check::new(
            format!("operator/{name}/coherence"),
            op.coherence_residual(),
            tol.abs(scale),
        ));
        operators.insert(
            name.clone(),
            json!({"top_seminorm": op.seminorm(op.domain().poset().maximum())}),
        );
    }
    let mut algebras = Map::new();
    for (name, a) in &scene.algebras {
        report.push(Check::new(
            format!("algebra/{name}/structure_constants"),
            a.structure_residual(),
            tol.span(1.0),
        ));
        algebras.insert(
            name.clone(),
            json!({"dim": a.dim(), "unital": a.is_unital()}),
        );
    }
    let mut kernels = Map::new();
    for (name, k) in &scene.kernels {
        let hermitian = k.is_hermitian(tol);
        let psd = k.is_positive_semidefinite(tol);
        kernels.insert(
            name.clone(),
            json!({"points": k.len(), "hermitian": hermitian, "positive_semidefinite": psd}),
        );
    }
    for name in scene.semigroups.keys() {
        report.push(Check::flag(format!("semigroup/{name}/valid"), true));
    }
    for name in scene.actions.keys() {
        report.push(Check::flag(format!("action/{name}/valid"), true));
    }
    for name in scene.systems.keys() {
        report.push(Check::flag(format!("system/{name}/valid"), true));
    }
    if !posets.is_empty() {
        result.insert("posets".into(), Value::Object(posets));
    }
    if !spaces.is_empty() {
        result.insert("spaces".into(), Value::Object(spaces));
    }
    if !operators.is_empty() {
        result.insert("operators".into(), Value::Object(operators));
    }
    if !algebras.is_empty() {
        result.insert("algebras".into(), Value::Object(algebras));
    }
    if !kernels.is_empty() {
        result.insert("kernels".into(), Value::Object(kernels));
    }
    report.result = Value::Object(result);
    Ok(())
}

fn cmd_dilate(
    scene: &Scene,
    job: Option<&JobFragment>,
    tol: &Tol,
    report: &mut Report,
) -> Result<(), RunError> {
    let job = require_job(job)?;
    let kernel_name = job_field(&job.kernel, "kernel")?;
    let kernel = scene
        .kernels
        .get(kernel_name)
        .ok_or_else(|| RunError::Job(format!("unknown kernel `{kernel_name}`")))?;
    let g_top = kernel.gram(kernel.space().poset().maximum());
    let g_norm = prostar_core::linalg::spectral_norm(&g_top);
    let factor_tol = 1e-8 * (1.0 + g_norm);

    let mut result = Map::new();
    match &job.action {
        None => {
            let d = kolmogorov(kernel, tol)?;
            report.push(Check::new("factorization", d.residual(), factor_tol));
            report.push(Check::new(
                "coherence",
                d.coherence_residual(),
                tol.abs(g_norm),
            ));
            report.push(Check::flag("minimal", d.is_minimal()));
            result.insert("rank".into(), json!(d.dilation_space().top_dim()));
            result.insert("dims".into(), dims_value(d.dilation_space()));
            result.insert("gram_norm".into(), json!(g_norm));
        }
        Some(action_name) => {
            let action = scene
                .actions
                .get(action_name)
                .ok_or_else(|| RunError::Job(format!("unknown action `{action_name}`")))?;
            let dil = invariant_dilation(kernel, action, tol)?;
            let d = &dil.decomposition;
            report.push(Check::new("factorization", d.residual(), factor_tol));
            report.push(Check::new(
                "coherence",
                d.coherence_residual()
                    .max(dil.pi.iter().map(|p| p.coherence_residual()).fold(0.0, f64::max)),
                tol.abs(g_norm),
            ));
            report.push(Check::new(
                "intertwining",
                dil.intertwining_residual,
                factor_tol,
            ));
            report.push(Check::new(
                "representation_multiplicative",
                dil.multiplicative_residual,
                factor_tol,
            ));
            report.push(Check::new(
                "representation_star",
                dil.star_residual,
                factor_tol,
            ));
            let sg = action.semigroup();
            if sg.is_group() {
                let all_unitary = dil
                    .pi
                    .iter()
                    .all(|p| p.is_locally_unitary(tol).unwrap_or(false));
                report.push(Check::flag("group_representation_unitary", all_unitary));
            }
            let mut certs = Map::new();
            for s in 0..sg.len() {
                let mut per_level = Map::new();
                for lam in 0..kernel.space().levels() {
                    per_level.insert(
                        kernel.space().poset().label(lam).to_string(),
                        finite(dil.certificates[s][lam]),
                    );
                }
                certs.insert(sg.label(s).to_string(), Value::Object(per_level));
            }
            result.insert("certificates".into(), Value::Object(certs));
            result.insert("rank".into(), json!(d.dilation_space().top_dim()));
            result.insert("dims".into(), dims_value(d.dilation_space()));
            result.insert("gram_norm".into(), json!(g_norm));
        }
    }
    report.result = Value::Object(result);
    Ok(())
}

fn cmd_represent(
    scene: &Scene,
    job: Option<&JobFragment>,
    tol: &Tol,
    report: &mut Report,
) -> Result<(), RunError> {
    let job = require_job(job)?;
    let system_name = job_field(&job.system, "system")?;
    let system = scene
        .systems
        .get(system_name)
        .ok_or_else(|| RunError::Job(format!("unknown system `{system_name}`")))?;
    let rep = gelfand_naimark(system, tol).map_err(|e| RunError::Other(e.to_string()))?;
    report.push(Check::new(
        "morphism_multiplicative",
        rep.multiplicative_residual,
        tol.abs(1.0),
    ));
    report.push(Check::new("morphism_star", rep.star_residual, tol.abs(1.0)));
    let coherence = rep
        .images
        .iter()
        .map(|op| op.coherence_residual())
        .fold(0.0, f64::max);
    report.push(Check::new("coherence", coherence, tol.abs(1.0)));
    report.push(Check::flag(
        "faithful",
        rep.faithful.iter().all(|&f| f),
    ));
    let mut result = Map::new();
    result.insert("dims".into(), dims_value(&rep.space));
    let mut faithful = Map::new();
    for (lam, &f) in rep.faithful.iter().enumerate() {
        faithful.insert(rep.space.poset().label(lam).to_string(), json!(f));
    }
    result.insert("faithful_per_level".into(), Value::Object(faithful));
    result.insert("basis_size".into(), json!(rep.images.len()));
    report.result = Value::Object(result);
    Ok(())
}

fn cmd_stinespring(
    scene: &Scene,
    job: Option<&JobFragment>,
    tol: &Tol,
    report: &mut Report,
) -> Result<(), RunError> {
    let job = require_job(job)?;
    let cp_name = job_field(&job.cp_map, "cp_map")?;
    let phi = scene
        .cp_maps
        .get(cp_name)
        .ok_or_else(|| RunError::Job(format!("unknown cp_map `{cp_name}`")))?;
    let st = stinespring(phi, tol)?;
    let scale = 1.0
        + st.pi_basis
            .iter()
            .map(|p| p.sup_seminorm())
            .fold(0.0, f64::max);
    report.push(Check::new("cp_factorization", st.cp_residual, 1e-8 * scale));
    report.push(Check::new(
        "representation_multiplicative",
        st.multiplicative_residual,
        1e-8 * scale * scale,
    ));
    report.push(Check::new(
        "representation_star",
        st.star_residual,
        1e-8 * scale,
    ));
    let coherence = st
        .pi_basis
        .iter()
        .map(|p| p.coherence_residual())
        .fold(st.decomposition.coherence_residual(), f64::max)
        .max(st.w.coherence_residual());
    report.push(Check::new("coherence", coherence, tol.abs(scale)));
    let mut result = Map::new();
    result.insert("rank".into(), json!(st.decomposition.dilation_space().top_dim()));
    result.insert("dims".into(), dims_value(st.decomposition.dilation_space()));
    result.insert("semigroup_size".into(), json!(st.semigroup_size));
    result.insert("semigroup_truncated".into(), json!(st.semigroup_truncated));
    let mut certs = Map::new();
    let space = phi.target();
    for (i, row) in st.certificates.iter().enumerate() {
        let mut per_level = Map::new();
        for (lam, &c_val) in row.iter().enumerate() {
            per_level.insert(space.poset().label(lam).to_string(), finite(c_val));
        }
        certs.insert(format!("b{i}"), Value::Object(per_level));
    }
    result.insert("certificates".into(), Value::Object(certs));
    report.result = Value::Object(result);
    Ok(())
}

fn cmd_tensor(
    scene: &Scene,
    job: Option<&JobFragment>,
    tol: &Tol,
    report: &mut Report,
) -> Result<(), RunError> {
    let job = require_job(job)?;
    let left_name = job_field(&job.left, "left")?;
    let right_name = job_field(&job.right, "right")?;
    let left = scene
        .algebras
        .get(left_name)
        .ok_or_else(|| RunError::Job(format!("unknown algebra `{left_name}`")))?;
    let right = scene
        .algebras
        .get(right_name)
        .ok_or_else(|| RunError::Job(format!("unknown algebra `{right_name}`")))?;
    let tensor = left
        .spatial_tensor(right, tol)
        .map_err(|e| RunError::Other(e.to_string()))?;
    report.push(Check::flag(
        "dimension_product",
        tensor.dim() == left.dim() * right.dim(),
    ));
    report.push(Check::new(
        "structure_constants",
        tensor.structure_residual(),
        tol.span(1.0),
    ));
    // cross-seminorms on elementary tensors of basis elements
    let mut worst = 0.0f64;
    for (i, a) in left.basis().iter().enumerate() {
        for (j, b) in right.basis().iter().enumerate() {
            let elementary = a.tensor(b, tol);
            let coeffs = tensor
                .express(&elementary)
                .map_err(|e| RunError::Other(e.to_string()))?;
            for li in 0..left.carrier().levels() {
                for lj in 0..right.carrier().levels() {
                    let lam = li * right.carrier().levels() + lj;
                    let cross = tensor
                        .seminorm(&coeffs, lam)
                        .map_err(|e| RunError::Other(e.to_string()))?;
                    let expect = a.seminorm(li) * b.seminorm(lj);
                    worst = worst.max((cross - expect).abs() / (1.0 + expect));
                }
            }
            let _ = (i, j);
        }
    }
    report.push(Check::new("cross_seminorms_relative", worst, 1e-8));
    let mut result = Map::new();
    result.insert("dim".into(), json!(tensor.dim()));
    result.insert("left_dim".into(), json!(left.dim()));
    result.insert("right_dim".into(), json!(right.dim()));
    result.insert("carrier_dims".into(), dims_value(tensor.carrier()));
    report.result = Value::Object(result);
    Ok(())
}

fn cmd_module_embed(
    scene: &Scene,
    job: Option<&JobFragment>,
    tol: &Tol,
    report: &mut Report,
) -> Result<(), RunError> {
    let job = require_job(job)?;
    let module_name = job_field(&job.module, "module")?;
    let module: AbstractHilbertModule = if let Some(m) = scene.abstract_modules.get(module_name) {
        m.clone()
    } else if let Some(m) = scene.concrete_modules.get(module_name) {
        m.to_abstract()
    } else {
        return Err(RunError::Job(format!("unknown module `{module_name}`")));
    };
    let model = operator_model(&module, tol).map_err(|e| RunError::Other(e.to_string()))?;
    let scale = 1.0
        + model
            .phi
            .iter()
            .map(|p| p.sup_seminorm())
            .fold(0.0, f64::max)
            .powi(2);
    report.push(Check::new("gramian_factorization", model.gram_residual, 1e-8 * scale));
    report.push(Check::new("module_action", model.action_residual, 1e-8 * scale));
    report.push(Check::new(
        "coherence",
        model.decomposition.coherence_residual(),
        tol.abs(scale),
    ));
    report.push(Check::new(
        "gramian_hermitian",
        model.module_report.hermitian_residual,
        tol.abs(scale),
    ));
    let mut result = Map::new();
    result.insert("rank".into(), json!(model.decomposition.dilation_space().top_dim()));
    result.insert("dims".into(), dims_value(model.decomposition.dilation_space()));
    result.insert("definite".into(), json!(model.module_report.definite));
    result.insert(
        "undefined_action_entries".into(),
        json!(model.module_report.undefined_action.len()),
    );
    report.result = Value::Object(result);
    Ok(())
}

fn cmd_module_tensor(
    scene: &Scene,
    job: Option<&JobFragment>,
    tol: &Tol,
    report: &mut Report,
) -> Result<(), RunError> {
    let job = require_job(job)?;
    let left_name = job_field(&job.left, "left")?;
    let right_name = job_field(&job.right, "right")?;
    let left = scene
        .concrete_modules
        .get(left_name)
        .ok_or_else(|| RunError::Job(format!("unknown concrete module `{left_name}`")))?;
    let right = scene
        .concrete_modules
        .get(right_name)
        .ok_or_else(|| RunError::Job(format!("unknown concrete module `{right_name}`")))?;
    let (module, ext_report) =
        exterior_tensor(left, right, tol).map_err(|e| RunError::Other(e.to_string()))?;
    report.push(Check::new(
        "gramian_kronecker",
        ext_report.gram_kron_residual,
        1e-10 * (1.0 + gram_scale(&module)),
    ));
    report.push(Check::new(
        "right_action",
        ext_report.action_residual,
        1e-8 * (1.0 + gram_scale(&module)),
    ));
    let mut result = Map::new();
    result.insert("elements".into(), json!(module.len()));
    result.insert("algebra_dim".into(), json!(module.algebra().dim()));
    result.insert("carrier_dims".into(), dims_value(module.algebra().carrier()));
    report.result = Value::Object(result);
    Ok(())
}

fn gram_scale(module: &prostar_core::csmodule::ConcreteHilbertModule) -> f64 {
    let top = module.algebra().carrier().poset().maximum();
    let mut worst = 0.0f64;
    for i in 0..module.len() {
        for j in 0..module.len() {
            if let Ok(m) = module.algebra().level_matrix(module.gram_entry(i, j), top) {
                worst = worst.max(prostar_core::linalg::spectral_norm(&m));
            }
        }
    }
    worst
}
