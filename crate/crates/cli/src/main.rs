use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use prostar_cli::engine::{run, Options};

#[derive(Parser)]
#[command(name = "prostar", about = "Coherent-net dilation engine: validate scenes, dilate kernels, represent projective systems, and tensor algebras and modules.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scene file (one JSON document)
    #[arg(long)]
    scene: PathBuf,
    /// Write the report here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tolerance scale factor for all residual checks
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Omit the wall-time field for byte-stable comparison
    #[arg(long)]
    stable: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Construct and validate every object in the scene
    Validate(RunArgs),
    /// Kolmogorov decomposition; with an action, the invariant dilation
    Dilate(RunArgs),
    /// Represent a projective system of matrix *-algebras faithfully
    Represent(RunArgs),
    /// Stinespring dilation of a unital completely positive map
    Stinespring(RunArgs),
    /// Spatial tensor product of two algebras
    Tensor(RunArgs),
    /// Operator model of a Hilbert module
    ModuleEmbed(RunArgs),
    /// Exterior tensor product of two concrete Hilbert modules
    ModuleTensor(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Validate(a) => ("validate", a),
        Command::Dilate(a) => ("dilate", a),
        Command::Represent(a) => ("represent", a),
        Command::Stinespring(a) => ("stinespring", a),
        Command::Tensor(a) => ("tensor", a),
        Command::ModuleEmbed(a) => ("module-embed", a),
        Command::ModuleTensor(a) => ("module-tensor", a),
    };
    let scene_text = match std::fs::read_to_string(&args.scene) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read scene `{}`: {e}", args.scene.display());
            return ExitCode::from(2);
        }
    };
    let options = Options {
        tol_scale: args.tol,
        stable: args.stable,
    };
    let (report, code) = run(name, &scene_text, &options);
    let rendered = report.render();
    match &args.out {
        None => print!("{rendered}"),
        Some(path) => {
            if let Err(e) = std::fs::write(path, &rendered) {
                eprintln!("error: cannot write report `{}`: {e}", path.display());
                return ExitCode::from(2);
            }
        }
    }
    ExitCode::from(code.clamp(0, u8::MAX as i32) as u8)
}
