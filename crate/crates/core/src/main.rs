use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use psbfem::io::{
    dt_study, load_case, load_expectations, run_case, size_study, study_csv, write_outputs,
    write_vtk, RunOutput, VtkFields,
};
use psbfem::mesh::{load_mesh, save_mesh, validate_mesh, MeshFormat};
use psbfem::solver::Material;
use psbfem::verification::{check_element, random_corpus};
use psbfem::Error;

/// Polyhedral scaled boundary finite element seepage analysis.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Worker threads for element computations (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a case file and write summary, monitors and VTK fields.
    Run {
        case: PathBuf,
        /// Output directory (default: ./out/<case name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Expected-values file; failed checks exit with status 3.
        #[arg(long)]
        expect: Option<PathBuf>,
    },
    /// Rerun a case over element sizes or time steps and print a CSV table.
    Convergence {
        case: PathBuf,
        /// Element sizes, e.g. 20,10,5.
        #[arg(long, value_delimiter = ',', conflicts_with = "dts")]
        sizes: Vec<f64>,
        /// Time steps for a transient case; the end time is kept.
        #[arg(long, value_delimiter = ',')]
        dts: Vec<f64>,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a mesh file for topology and geometry problems.
    ValidateMesh {
        mesh: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Compare element operators against the independent oracles.
    OracleCheck {
        /// Seed of the random polyhedron corpus.
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        count: usize,
        /// Check every element of this mesh instead of the corpus.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Write the mesh of a case as VTK, JSON or INP.
    Export {
        case: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ExportFormat::Vtk)]
        format: ExportFormat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Inp,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ExportFormat {
    Vtk,
    Json,
    Inp,
}

impl From<Format> for MeshFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => MeshFormat::Json,
            Format::Inp => MeshFormat::Inp,
        }
    }
}

enum Failure {
    Error(Error),
    Checks(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn base_dir(case: &Path) -> &Path {
    case.parent().unwrap_or(Path::new("."))
}

fn mesh_format(path: &Path, f: Option<Format>) -> Result<MeshFormat, Error> {
    f.map(Into::into)
        .or_else(|| MeshFormat::from_path(path))
        .ok_or_else(|| {
            Error::Config(format!(
                "cannot tell the format of {}; pass --format",
                path.display()
            ))
        })
}

fn report_run(out: &RunOutput) {
    println!("{}", serde_json::to_string_pretty(&out.summary).unwrap());
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { case, out, expect } => {
            let c = load_case(&case)?;
            let expectations = expect.map(load_expectations).transpose()?;
            let prepared = c.prepare(base_dir(&case))?;
            let result = run_case(&prepared)?;
            let dir = out.unwrap_or_else(|| PathBuf::from("out").join(&c.name));
            write_outputs(&prepared, &result, &dir)?;
            report_run(&result);
            if let Some(e) = expectations {
                let outcomes = e.evaluate(&result);
                let mut failed = Vec::new();
                for o in &outcomes {
                    let v = o
                        .value
                        .map_or("missing".to_string(), |v| format!("{v:.6e}"));
                    println!(
                        "{} {} = {v} (min {:?}, max {:?})",
                        if o.passed { "PASS" } else { "FAIL" },
                        o.metric,
                        o.min,
                        o.max
                    );
                    if !o.passed {
                        failed.push(o.metric.clone());
                    }
                }
                std::fs::write(
                    dir.join("checks.json"),
                    serde_json::to_string_pretty(&outcomes).unwrap() + "\n",
                )
                .map_err(|e| Error::Config(format!("cannot write checks.json: {e}")))?;
                if !failed.is_empty() {
                    return Err(Failure::Checks(format!(
                        "failed checks: {}",
                        failed.join(", ")
                    )));
                }
            }
            Ok(())
        }
        Command::Convergence {
            case,
            sizes,
            dts,
            out,
        } => {
            let c = load_case(&case)?;
            let prepared = c.prepare(base_dir(&case))?;
            let table = match (sizes.is_empty(), dts.is_empty()) {
                (false, true) => {
                    study_csv(&size_study(&prepared, base_dir(&case), &sizes)?, "size")
                }
                (true, false) => study_csv(&dt_study(&prepared, &dts)?, "dt"),
                _ => return Err(Error::Config("give either --sizes or --dts".into()).into()),
            };
            // Scratch copy of every table, for later comparison.
            if let Ok(dir) = std::env::var("PSBFEM_SCRATCH_DIR") {
                let path = Path::new(&dir).join(format!("{}_convergence.csv", c.name));
                std::fs::create_dir_all(&dir)
                    .and_then(|_| std::fs::write(&path, &table))
                    .map_err(|e| Error::Config(format!("scratch directory {dir}: {e}")))?;
            }
            match out {
                Some(p) => std::fs::write(&p, &table)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
                None => print!("{table}"),
            }
            Ok(())
        }
        Command::ValidateMesh { mesh, format } => {
            let fmt = mesh_format(&mesh, format)?;
            let m = match load_mesh(&mesh, fmt) {
                Err(Error::Validation(text)) => {
                    println!("{text}");
                    return Err(Error::Validation(format!(
                        "{} has topology or geometry errors",
                        mesh.display()
                    ))
                    .into());
                }
                other => other?,
            };
            let report = validate_mesh(&m);
            println!(
                "{} nodes, {} faces, {} elements: {}",
                m.num_nodes(),
                m.faces.len(),
                m.num_elements(),
                if report.is_empty() {
                    "valid".to_string()
                } else {
                    report.to_string()
                }
            );
            Ok(())
        }
        Command::OracleCheck { seed, count, mesh } => {
            let meshes = match mesh {
                Some(p) => {
                    let fmt = mesh_format(&p, None)?;
                    vec![load_mesh(&p, fmt)?]
                }
                None => random_corpus(seed, count),
            };
            let material = Material::isotropic("unit", 1.0, 1.0);
            let options = psbfem::sbfem::ElementOptions::default();
            let mut failures = 0;
            for (i, m) in meshes.iter().enumerate() {
                for e in 0..m.num_elements() {
                    let c = check_element(m, e, &material, &options)?;
                    let f = c.failures();
                    if !f.is_empty() {
                        failures += 1;
                    }
                    let mut row = serde_json::to_value(&c).unwrap();
                    row["mesh"] = serde_json::json!(i);
                    row["failures"] = serde_json::json!(f);
                    println!("{row}");
                }
            }
            if failures > 0 {
                return Err(Failure::Checks(format!(
                    "{failures} elements failed the oracle comparison"
                )));
            }
            Ok(())
        }
        Command::Export { case, out, format } => {
            let c = load_case(&case)?;
            let prepared = c.prepare(base_dir(&case))?;
            match format {
                ExportFormat::Vtk => {
                    write_vtk(&out, &prepared.mesh, &VtkFields::default(), &c.name)?
                }
                ExportFormat::Json => save_mesh(&prepared.mesh, &out, MeshFormat::Json)?,
                ExportFormat::Inp => save_mesh(&prepared.mesh, &out, MeshFormat::Inp)?,
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse(_) | Error::Validation(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
