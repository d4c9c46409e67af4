//! The `deltaconv` command line: build operators from a point cloud, validate
//! them against analytic surfaces, apply them to fields, run diffusion and
//! the block forward pass.
//!
//! Exit codes: 0 success, 1 validation failure, 2 bad input, 3 numerical
//! failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::block::{deltaconv_forward, input_vector_features, DeltaConvParams};
use crate::error::{Error, Result};
use crate::field::{Field, VectorField};
use crate::geometry::{build_knn_graph, build_tangent_frames, estimate_normals, KnnGraph, PointCloud};
use crate::io::{
    read_field_csv, read_matrix_market, read_point_cloud, write_field_csv, write_matrix_market,
};
use crate::operators::{apply, build_operator_set, OperatorMeta, OperatorSet};
use crate::oracle::{
    check_report, convergence_report, perona_malik_step, sample_surface, AnalyticCase,
    AnalyticSurface, ReportRow,
};
use crate::{DEFAULT_K, DEFAULT_LAMBDA};

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_BAD_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

pub const META_FILE: &str = "meta.json";
pub const KNN_FILE: &str = "knn.txt";

#[derive(Debug, Parser)]
#[command(name = "deltaconv", version, about = "Exterior-calculus operators on point clouds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the operator set of a point cloud and export it as Matrix Market files.
    Build(BuildArgs),
    /// Check the operators against closed forms on an analytic surface.
    Validate(ValidateArgs),
    /// Apply one exported operator to a field.
    Apply(ApplyArgs),
    /// Run explicit Perona–Malik diffusion steps with exported operators.
    Diffuse(DiffuseArgs),
    /// Run one DeltaConv block over exported operators.
    Forward(ForwardArgs),
    /// Write a deterministic sample of an analytic surface as XYZ with normals.
    Sample(SampleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalsMode {
    /// Normals stored in the input file.
    File,
    /// PCA over the nearest neighbors.
    Estimate,
    /// Closed-form normals of `--surface`.
    Exact,
}

impl NormalsMode {
    fn name(self) -> &'static str {
        match self {
            NormalsMode::File => "file",
            NormalsMode::Estimate => "estimate",
            NormalsMode::Exact => "exact",
        }
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Point cloud (.xyz, .ply or .obj).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = NormalsMode::Estimate)]
    pub normals: NormalsMode,
    /// Neighbor count for normal estimation; defaults to `--k`.
    #[arg(long)]
    pub normal_k: Option<usize>,
    /// Surface for `--normals exact`.
    #[arg(long)]
    pub surface: Option<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub surface: String,
    /// Comma-separated, strictly ascending sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Defaults to 0 on the plane and 1e-3 on curved surfaces.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for `report.csv` and `summary.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    /// Operator directory written by `build`.
    #[arg(long)]
    pub input: PathBuf,
    /// Operator name: G, G_hat, J, D, D_hat, curl, L or lb.
    #[arg(long)]
    pub op: String,
    /// Field CSV.
    #[arg(long)]
    pub field: PathBuf,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiffuseArgs {
    /// Operator directory written by `build`.
    #[arg(long)]
    pub input: PathBuf,
    /// Scalar field CSV.
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.5)]
    pub kappa: f64,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    /// Operator directory written by `build`.
    #[arg(long)]
    pub input: PathBuf,
    /// Scalar input features CSV.
    #[arg(long)]
    pub field: PathBuf,
    /// Vector input features CSV; defaults to the normalized gradient of `--field`.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Block parameters as JSON.
    #[arg(long)]
    pub weights: PathBuf,
    /// Output directory for `scalar.csv` and `vector.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub surface: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Command failure with its exit code.
#[derive(Debug)]
pub enum Failure {
    Validation(Vec<String>),
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Error(e) if e.is_numerical() => EXIT_NUMERICAL,
            Failure::Error(_) => EXIT_BAD_INPUT,
        }
    }
}

pub fn main(cli: Cli) -> ExitCode {
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Validation(rows) => {
                    for r in rows {
                        eprintln!("FAIL {r}");
                    }
                }
                Failure::Error(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(failure.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Build(a) => cmd_build(&a).map_err(Failure::from),
        Command::Validate(a) => cmd_validate(&a),
        Command::Apply(a) => cmd_apply(&a).map_err(Failure::from),
        Command::Diffuse(a) => cmd_diffuse(&a).map_err(Failure::from),
        Command::Forward(a) => cmd_forward(&a).map_err(Failure::from),
        Command::Sample(a) => cmd_sample(&a).map_err(Failure::from),
    }
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildMeta {
    #[serde(flatten)]
    pub operators: OperatorMeta,
    pub normals: String,
    pub normal_k: Option<usize>,
    pub input_sha256: String,
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn load_cloud(args: &BuildArgs) -> Result<PointCloud> {
    let data = read_point_cloud(&args.input)?;
    match args.normals {
        NormalsMode::File => {
            if data.normals.is_none() {
                return Err(Error::InvalidInput(format!(
                    "{} has no normals; use --normals estimate",
                    args.input.display()
                )));
            }
            data.into_cloud(true)
        }
        NormalsMode::Estimate => {
            let cloud = data.into_cloud(false)?;
            let graph = build_knn_graph(&cloud, args.normal_k.unwrap_or(args.k))?;
            estimate_normals(&cloud, &graph)
        }
        NormalsMode::Exact => {
            let name = args.surface.as_deref().ok_or_else(|| {
                Error::InvalidArgument("--normals exact needs --surface".into())
            })?;
            let surface = AnalyticSurface::from_name(name)?;
            let normals = data.positions.iter().map(|p| surface.normal_at(p)).collect();
            PointCloud::with_normals(data.positions, normals)
        }
    }
}

pub fn cmd_build(args: &BuildArgs) -> Result<()> {
    if !(args.lambda >= 0.0 && args.lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", args.lambda)));
    }
    let bytes = std::fs::read(&args.input).map_err(|source| Error::Io {
        path: args.input.clone(),
        source,
    })?;
    let cloud = load_cloud(args)?;
    let graph = build_knn_graph(&cloud, args.k)?;
    let frames = build_tangent_frames(&cloud)?;
    let ops = build_operator_set(&cloud, &graph, &frames, args.lambda)?;

    create_dir(&args.out)?;
    for name in OperatorSet::NAMES {
        write_matrix_market(&args.out.join(format!("{name}.mtx")), ops.lookup(name)?)?;
    }
    write_knn(&args.out.join(KNN_FILE), &graph)?;
    let meta = BuildMeta {
        operators: ops.meta.clone(),
        normals: args.normals.name().into(),
        normal_k: (args.normals == NormalsMode::Estimate).then(|| args.normal_k.unwrap_or(args.k)),
        input_sha256: hex::encode(Sha256::digest(&bytes)),
    };
    let json = serde_json::to_string_pretty(&meta)? + "\n";
    crate::io::write_bytes(&args.out.join(META_FILE), json.as_bytes())?;
    println!(
        "wrote {} operators for {} points to {}",
        OperatorSet::NAMES.len(),
        cloud.len(),
        args.out.display()
    );
    Ok(())
}

fn write_knn(path: &Path, graph: &KnnGraph) -> Result<()> {
    let mut text = String::new();
    for i in 0..graph.n_points() {
        let row: Vec<String> = graph.neighbors(i).iter().map(usize::to_string).collect();
        let _ = writeln!(text, "{}", row.join(" "));
    }
    crate::io::write_bytes(path, text.as_bytes())
}

fn read_knn(path: &Path) -> Result<KnnGraph> {
    let text = crate::io::read_text(path)?;
    let rows = text
        .lines()
        .enumerate()
        .map(|(line, l)| {
            l.split_whitespace()
                .map(|s| {
                    s.parse::<usize>().map_err(|_| Error::Parse {
                        path: path.to_owned(),
                        line: line + 1,
                        message: format!("bad neighbor index {s:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != k) {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            message: format!("expected {k} neighbors"),
        });
    }
    KnnGraph::from_rows(k, n, rows.concat())
}

/// Load the operator set written by `build` from `dir`.
pub fn load_operator_set(dir: &Path) -> Result<OperatorSet> {
    let meta: BuildMeta = serde_json::from_str(&crate::io::read_text(&dir.join(META_FILE))?)?;
    let ops = OperatorSet::NAMES
        .map(|name| read_matrix_market(&dir.join(format!("{name}.mtx"))));
    let ops = ops.into_iter().collect::<Result<Vec<_>>>()?;
    let ops: [_; 8] = ops.try_into().expect("eight operators");
    OperatorSet::from_parts(ops, meta.operators)
}

fn check_points(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::ShapeMismatch {
            expected: format!("{what} over {want} points"),
            actual: format!("{got} points"),
        });
    }
    Ok(())
}

pub fn cmd_apply(args: &ApplyArgs) -> Result<()> {
    let ops = load_operator_set(&args.input)?;
    let op = ops.lookup(&args.op)?;
    let field = read_field_csv(&args.field)?;
    let n = ops.n_points();
    let expected_rows = match field {
        Field::Scalar(_) => n,
        Field::Vector(_) => 2 * n,
    };
    if op.cols() != expected_rows || field.features().rows() != expected_rows {
        let kind = if op.cols() == n { "a scalar" } else { "a vector" };
        return Err(Error::ShapeMismatch {
            expected: format!("{kind} field over {n} points for {}", args.op),
            actual: format!("{} coefficient rows", field.features().rows()),
        });
    }
    write_field_csv(&args.out, &apply(op, &field)?)
}

pub fn cmd_diffuse(args: &DiffuseArgs) -> Result<()> {
    let ops = load_operator_set(&args.input)?;
    let Field::Scalar(mut u) = read_field_csv(&args.field)? else {
        return Err(Error::InvalidInput("diffusion needs a scalar field".into()));
    };
    check_points("field", u.n_points(), ops.n_points())?;
    for _ in 0..args.steps {
        u = perona_malik_step(&u, &ops, args.tau, args.kappa)?;
    }
    write_field_csv(&args.out, &Field::Scalar(u))
}

pub fn cmd_forward(args: &ForwardArgs) -> Result<()> {
    let ops = load_operator_set(&args.input)?;
    let graph = read_knn(&args.input.join(KNN_FILE))?;
    let params = DeltaConvParams::from_json_file(&args.weights)?;
    let Field::Scalar(x) = read_field_csv(&args.field)? else {
        return Err(Error::InvalidInput("--field must be a scalar field".into()));
    };
    check_points("field", x.n_points(), ops.n_points())?;
    let v: VectorField = match &args.vectors {
        Some(path) => match read_field_csv(path)? {
            Field::Vector(v) => v,
            Field::Scalar(_) => {
                return Err(Error::InvalidInput("--vectors must be a vector field".into()))
            }
        },
        None => input_vector_features(&x, &ops)?,
    };
    check_points("vectors", v.n_points(), ops.n_points())?;
    let (x_out, v_out) = deltaconv_forward(&x, &v, &ops, &graph, &params)?;
    create_dir(&args.out)?;
    write_field_csv(&args.out.join("scalar.csv"), &Field::Scalar(x_out))?;
    write_field_csv(&args.out.join("vector.csv"), &Field::Vector(v_out))
}

pub fn cmd_sample(args: &SampleArgs) -> Result<()> {
    let surface = AnalyticSurface::from_name(&args.surface)?;
    let cloud = sample_surface(&surface, args.n, args.seed)?;
    let normals = cloud.normals().expect("analytic samples carry normals");
    let mut text = String::new();
    for (p, n) in cloud.positions().iter().zip(normals) {
        let _ = writeln!(text, "{:e} {:e} {:e} {:e} {:e} {:e}", p.x, p.y, p.z, n.x, n.y, n.z);
    }
    crate::io::write_bytes(&args.out, text.as_bytes())
}

/// JSON summary written next to the validation CSV.
#[derive(Debug, Serialize)]
struct ValidationSummary<'a> {
    surface: &'a str,
    sizes: &'a [usize],
    k: usize,
    lambda: f64,
    seed: u64,
    passed: bool,
    failures: &'a [String],
    rows: &'a [ReportRow],
}

pub fn cmd_validate(args: &ValidateArgs) -> std::result::Result<(), Failure> {
    let surface = AnalyticSurface::from_name(&args.surface)?;
    let plane = matches!(surface, AnalyticSurface::Plane { .. });
    let lambda = args.lambda.unwrap_or(if plane { 0.0 } else { 1e-3 });
    let sizes = args.sizes.clone().unwrap_or_else(|| {
        if plane {
            vec![400, 1600]
        } else {
            vec![1024, 4096, 16384]
        }
    });
    let case = AnalyticCase::standard(surface);
    let rows = convergence_report(&case, &sizes, args.k, lambda, args.seed)?;
    let failures = check_report(&surface, &rows);

    println!("{:<8} {:>7} {:<10} {:>13} {:>13} {:>13}", "surface", "n", "op", "mean_rel_err", "max_rel_err", "mean_abs_err");
    for r in &rows {
        println!(
            "{:<8} {:>7} {:<10} {:>13.6e} {:>13.6e} {:>13.6e}",
            r.surface, r.n, r.op, r.mean_rel_err, r.max_rel_err, r.mean_abs_err
        );
    }
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            w.serialize(r).map_err(|e| Error::InvalidInput(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        crate::io::write_bytes(&dir.join("report.csv"), &bytes)?;
        let summary = ValidationSummary {
            surface: surface.name(),
            sizes: &sizes,
            k: args.k,
            lambda,
            seed: args.seed,
            passed: failures.is_empty(),
            failures: &failures,
            rows: &rows,
        };
        let json = serde_json::to_string_pretty(&summary).map_err(Error::from)? + "\n";
        crate::io::write_bytes(&dir.join("summary.json"), json.as_bytes())?;
    }
    if failures.is_empty() {
        println!("PASS {}", surface.name());
        Ok(())
    } else {
        Err(Failure::Validation(failures))
    }
}
