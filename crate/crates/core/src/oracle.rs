//! Analytic surfaces and fields for validating the operators, convergence
//! reports, and a Perona–Malik diffusion assembled from `G` and `D`.
//!
//! Validation always uses the raw operators; ℓ∞ normalization removes the
//! physical scale that the closed forms are expressed in.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Features, ScalarField};
use crate::geometry::{build_knn_graph, build_tangent_frames, PointCloud, TangentFrames, Vec3};
use crate::operators::{build_divergence, build_gradient, build_rotation, curl, laplace_beltrami, OperatorSet};
use crate::sparse::SparseOperator;

/// Analytic test surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticSurface {
    /// `z = 0` over `[-half_extent, half_extent]²`.
    Plane { half_extent: f64 },
    Sphere { radius: f64 },
    /// Around the z axis with tube radius `minor < major`.
    Torus { major: f64, minor: f64 },
}

impl AnalyticSurface {
    pub fn unit_plane() -> Self {
        AnalyticSurface::Plane { half_extent: 1.0 }
    }

    pub fn unit_sphere() -> Self {
        AnalyticSurface::Sphere { radius: 1.0 }
    }

    pub fn default_torus() -> Self {
        AnalyticSurface::Torus { major: 1.0, minor: 0.4 }
    }

    /// Parse `plane`, `sphere` or `torus` with default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "plane" => Ok(Self::unit_plane()),
            "sphere" => Ok(Self::unit_sphere()),
            "torus" => Ok(Self::default_torus()),
            _ => Err(Error::InvalidArgument(format!(
                "unknown surface {name:?}; expected plane, sphere or torus"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnalyticSurface::Plane { .. } => "plane",
            AnalyticSurface::Sphere { .. } => "sphere",
            AnalyticSurface::Torus { .. } => "torus",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            AnalyticSurface::Plane { half_extent } => half_extent > 0.0,
            AnalyticSurface::Sphere { radius } => radius > 0.0,
            AnalyticSurface::Torus { major, minor } => minor > 0.0 && major > minor,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid surface parameters {self:?}")))
        }
    }

    /// Outward unit normal at a point on the surface.
    pub fn normal_at(&self, p: &Vec3) -> Vec3 {
        match *self {
            AnalyticSurface::Plane { .. } => Vec3::z(),
            AnalyticSurface::Sphere { .. } => p.normalize(),
            AnalyticSurface::Torus { major, .. } => {
                let rho = p.x.hypot(p.y);
                let center = Vec3::new(p.x / rho * major, p.y / rho * major, 0.0);
                (p - center).normalize()
            }
        }
    }
}

/// Deterministic area-uniform samples with exact normals.
pub fn sample_surface(surface: &AnalyticSurface, n: usize, seed: u64) -> Result<PointCloud> {
    surface.validate()?;
    if n < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 samples, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<Vec3> = match *surface {
        AnalyticSurface::Plane { half_extent: a } => (0..n)
            .map(|_| Vec3::new(rng.random_range(-a..a), rng.random_range(-a..a), 0.0))
            .collect(),
        AnalyticSurface::Sphere { radius } => (0..n)
            .map(|_| loop {
                let g = Vec3::from([0; 3].map(|_| StandardNormal.sample(&mut rng)));
                let len = g.norm();
                if len > 1e-12 {
                    break g * (radius / len);
                }
            })
            .collect(),
        AnalyticSurface::Torus { major, minor } => (0..n)
            .map(|_| {
                // accept θ with probability proportional to the ring radius
                let theta = loop {
                    let t = rng.random_range(0.0..2.0 * PI);
                    let accept: f64 = rng.random();
                    if accept * (major + minor) <= major + minor * t.cos() {
                        break t;
                    }
                };
                let phi = rng.random_range(0.0..2.0 * PI);
                let ring = major + minor * theta.cos();
                Vec3::new(ring * phi.cos(), ring * phi.sin(), minor * theta.sin())
            })
            .collect(),
    };
    let normals = positions.iter().map(|p| surface.normal_at(p)).collect();
    PointCloud::with_normals(positions, normals)
}

/// Scalar test functions with closed-form surface derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// `a x + b y + c z`.
    Linear { a: f64, b: f64, c: f64 },
    /// `x² + y²`.
    RadialQuadratic,
    /// The height `z`.
    Height,
}

impl TestFunction {
    pub fn value(&self, p: &Vec3) -> f64 {
        match *self {
            TestFunction::Linear { a, b, c } => a * p.x + b * p.y + c * p.z,
            TestFunction::RadialQuadratic => p.x * p.x + p.y * p.y,
            TestFunction::Height => p.z,
        }
    }

    fn ambient_gradient(&self, p: &Vec3) -> Vec3 {
        match *self {
            TestFunction::Linear { a, b, c } => Vec3::new(a, b, c),
            TestFunction::RadialQuadratic => Vec3::new(2.0 * p.x, 2.0 * p.y, 0.0),
            TestFunction::Height => Vec3::z(),
        }
    }
}

/// A surface with a scalar field and its closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticCase {
    pub surface: AnalyticSurface,
    pub function: TestFunction,
}

impl AnalyticCase {
    /// Default case per surface: `x² + y²` on the plane, `z` elsewhere.
    pub fn standard(surface: AnalyticSurface) -> Self {
        let function = match surface {
            AnalyticSurface::Plane { .. } => TestFunction::RadialQuadratic,
            _ => TestFunction::Height,
        };
        Self { surface, function }
    }

    /// Tangential gradient `∇f − (∇f · n) n`.
    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        let g = self.function.ambient_gradient(p);
        let n = self.surface.normal_at(p);
        g - n * g.dot(&n)
    }

    /// `Δ_B f = −div grad f`, or `None` where no closed form is provided.
    pub fn laplace_beltrami(&self, p: &Vec3) -> Option<f64> {
        match (self.surface, self.function) {
            (AnalyticSurface::Plane { .. }, TestFunction::Linear { .. }) => Some(0.0),
            (AnalyticSurface::Plane { .. }, TestFunction::RadialQuadratic) => Some(-4.0),
            (AnalyticSurface::Sphere { radius }, TestFunction::Height) => {
                Some(2.0 * p.z / (radius * radius))
            }
            (AnalyticSurface::Torus { major, minor }, TestFunction::Height) => {
                // z = r sin θ on the tube; the Laplacian of a θ-only function
                let sin_t = (p.z / minor).clamp(-1.0, 1.0);
                let cos_t = (p.x.hypot(p.y) - major) / minor;
                let ring = major + minor * cos_t;
                let div_grad = -sin_t * (major + 2.0 * minor * cos_t) / (minor * ring);
                Some(-div_grad)
            }
            _ => None,
        }
    }
}

/// Raw (unnormalized) operators on an analytic sample.
pub struct RawOperators {
    pub cloud: PointCloud,
    pub frames: TangentFrames,
    pub g: SparseOperator,
    pub d: SparseOperator,
    pub j: SparseOperator,
}

impl RawOperators {
    pub fn build(cloud: PointCloud, k: usize, lambda: f64) -> Result<Self> {
        let graph = build_knn_graph(&cloud, k)?;
        let frames = build_tangent_frames(&cloud)?;
        let g = build_gradient(&cloud, &frames, &graph, lambda)?;
        let d = build_divergence(&cloud, &frames, &graph, lambda)?;
        let j = build_rotation(cloud.len())?;
        Ok(Self { cloud, frames, g, d, j })
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub surface: String,
    pub n: usize,
    pub op: String,
    /// Mean error magnitude over the mean reference magnitude.
    pub mean_rel_err: f64,
    /// Largest error magnitude over the largest reference magnitude.
    pub max_rel_err: f64,
    /// Mean error magnitude in the field's own units.
    pub mean_abs_err: f64,
}

fn row(case: &AnalyticCase, n: usize, op: &str, errors: &[f64], reference: &[f64]) -> ReportRow {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { a };
    ReportRow {
        surface: case.surface.name().into(),
        n,
        op: op.into(),
        mean_rel_err: ratio(mean(errors), mean(reference)),
        max_rel_err: ratio(max(errors), max(reference)),
        mean_abs_err: mean(errors),
    }
}

/// Compare `G f`, `−D G f` and `curl(G f)` from raw operators against closed
/// forms for every size in `sizes`.
///
/// Rows per size: `grad` (tangential gradient), `lb` (Laplace–Beltrami) and
/// `curl_grad`, whose reference is the gradient magnitude since the exact
/// value is zero.
pub fn convergence_report(
    case: &AnalyticCase,
    sizes: &[usize],
    k: usize,
    lambda: f64,
    seed: u64,
) -> Result<Vec<ReportRow>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("sizes must be strictly ascending".into()));
    }
    let mut rows = Vec::new();
    for &n in sizes {
        let cloud = sample_surface(&case.surface, n, seed)?;
        let raw = RawOperators::build(cloud, k, lambda)?;
        let p = raw.cloud.positions();
        let f = Features::from_fn(n, 1, |i, _| case.function.value(&p[i]));
        let gf = raw.g.apply(&f)?;

        let mut grad_err = Vec::with_capacity(n);
        let mut grad_ref = Vec::with_capacity(n);
        for i in 0..n {
            let approx = raw.frames.ambient(i, gf.get(2 * i, 0), gf.get(2 * i + 1, 0));
            let exact = case.gradient(&p[i]);
            grad_err.push((approx - exact).norm());
            grad_ref.push(exact.norm());
        }
        rows.push(row(case, n, "grad", &grad_err, &grad_ref));

        let lb = laplace_beltrami(&raw.g, &raw.d)?.apply(&f)?;
        let exact_lb: Option<Vec<f64>> = (0..n).map(|i| case.laplace_beltrami(&p[i])).collect();
        if let Some(exact_lb) = exact_lb {
            let err: Vec<f64> = (0..n).map(|i| (lb.get(i, 0) - exact_lb[i]).abs()).collect();
            let reference: Vec<f64> = exact_lb.iter().map(|x| x.abs()).collect();
            rows.push(row(case, n, "lb", &err, &reference));
        }

        let c = curl(&raw.d, &raw.j)?.apply(&gf)?;
        let curl_err: Vec<f64> = (0..n).map(|i| c.get(i, 0).abs()).collect();
        rows.push(row(case, n, "curl_grad", &curl_err, &grad_ref));
    }
    Ok(rows)
}

/// Acceptance thresholds applied by [`check_report`].
pub struct Thresholds;

impl Thresholds {
    /// Polynomial exactness on the plane.
    pub const PLANE_EXACT: f64 = 1e-8;
    /// Mean relative gradient error at the largest size.
    pub const GRAD_MEAN: f64 = 0.05;
    /// Mean relative Laplace–Beltrami error at the largest size.
    pub const LB_MEAN: f64 = 0.15;
}

/// Returns a description of every failed check; empty means the report
/// passes.
///
/// Plane: every relative error ≤ 1e-8. Sphere: grad and lb strictly
/// decreasing and within 5% / 15% at the largest size, curl strictly
/// decreasing. Torus: grad and lb non-increasing.
pub fn check_report(surface: &AnalyticSurface, rows: &[ReportRow]) -> Vec<String> {
    let mut failures = Vec::new();
    let series = |op: &str| -> Vec<&ReportRow> { rows.iter().filter(|r| r.op == op).collect() };
    let describe = |r: &ReportRow| {
        format!(
            "{} n={} {}: mean_rel_err={:.3e} max_rel_err={:.3e} mean_abs_err={:.3e}",
            r.surface, r.n, r.op, r.mean_rel_err, r.max_rel_err, r.mean_abs_err
        )
    };
    let monotone = |op: &str, strict: bool, key: fn(&ReportRow) -> f64, failures: &mut Vec<String>| {
        for w in series(op).windows(2) {
            let (a, b) = (key(w[0]), key(w[1]));
            if (strict && b >= a) || (!strict && b > a) {
                failures.push(format!("not decreasing: {}", describe(w[1])));
            }
        }
    };
    match surface {
        AnalyticSurface::Plane { .. } => {
            for r in rows {
                if r.mean_rel_err > Thresholds::PLANE_EXACT || r.max_rel_err > Thresholds::PLANE_EXACT {
                    failures.push(format!("not exact: {}", describe(r)));
                }
            }
        }
        AnalyticSurface::Sphere { .. } => {
            monotone("grad", true, |r| r.mean_rel_err, &mut failures);
            monotone("lb", true, |r| r.mean_rel_err, &mut failures);
            monotone("curl_grad", true, |r| r.mean_abs_err, &mut failures);
            for (op, limit) in [("grad", Thresholds::GRAD_MEAN), ("lb", Thresholds::LB_MEAN)] {
                if let Some(last) = series(op).last() {
                    if last.mean_rel_err > limit {
                        failures.push(format!("above {limit}: {}", describe(last)));
                    }
                }
            }
        }
        AnalyticSurface::Torus { .. } => {
            monotone("grad", false, |r| r.mean_rel_err, &mut failures);
            monotone("lb", false, |r| r.mean_rel_err, &mut failures);
        }
    }
    failures
}

/// One explicit Perona–Malik step `u + τ D(c ⊙ G u)` with conductance
/// `c_i = 1 / (1 + (‖(Gu)_i‖ / κ)²)` per point and channel, using the raw
/// `G` and `D` of `ops`.
pub fn perona_malik_step(u: &ScalarField, ops: &OperatorSet, tau: f64, kappa: f64) -> Result<ScalarField> {
    diffusion_step(u, &ops.g, &ops.d, tau, kappa)
}

/// [`perona_malik_step`] on explicit raw operators.
pub fn diffusion_step(
    u: &ScalarField,
    g: &SparseOperator,
    d: &SparseOperator,
    tau: f64,
    kappa: f64,
) -> Result<ScalarField> {
    if !(tau > 0.0 && kappa > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tau and kappa must be positive (tau = {tau}, kappa = {kappa})"
        )));
    }
    let mut flux = g.apply(&u.0)?;
    for i in 0..u.n_points() {
        for c in 0..u.channels() {
            let (a, b) = (flux.get(2 * i, c), flux.get(2 * i + 1, c));
            let ratio = a.hypot(b) / kappa;
            let conductance = 1.0 / (1.0 + ratio * ratio);
            flux.set(2 * i, c, a * conductance);
            flux.set(2 * i + 1, c, b * conductance);
        }
    }
    let div = d.apply(&flux)?;
    let next: Vec<f64> = u
        .0
        .as_slice()
        .iter()
        .zip(div.as_slice())
        .map(|(x, dx)| x + tau * dx)
        .collect();
    Ok(ScalarField(Features::from_row_major(u.n_points(), u.channels(), next)?))
}

/// Jittered `side × side` grid on `z = 0` over `[-half_extent, half_extent]²`;
/// each point moves by up to `jitter` grid spacings along x and y.
pub fn jittered_grid(side: usize, half_extent: f64, jitter: f64, seed: u64) -> Result<PointCloud> {
    if side < 4 || !(half_extent > 0.0) || !(0.0..0.5).contains(&jitter) {
        return Err(Error::InvalidArgument(format!(
            "grid needs side >= 4, half_extent > 0, jitter in [0, 0.5) (got {side}, {half_extent}, {jitter})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 2.0 * half_extent / (side - 1) as f64;
    let mut shake = || if jitter > 0.0 { rng.random_range(-jitter..jitter) * h } else { 0.0 };
    let mut positions = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            let x = -half_extent + c as f64 * h + shake();
            let y = -half_extent + r as f64 * h + shake();
            positions.push(Vec3::new(x, y, 0.0));
        }
    }
    let normals = vec![Vec3::z(); positions.len()];
    PointCloud::with_normals(positions, normals)
}

/// Setup of the noisy step-edge diffusion experiment.
///
/// Wide MLS stencils barely see point-scale noise and the composed `D G` has
/// weakly anti-diffusive modes on irregular samples and near the outer
/// boundary, so the experiment uses a lightly jittered grid, a stronger
/// regularizer, and measures away from the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEdgeSetup {
    /// Grid points per side.
    pub side: usize,
    pub half_extent: f64,
    /// Jitter in grid spacings.
    pub jitter: f64,
    pub k: usize,
    pub lambda: f64,
    pub noise_sigma: f64,
    pub steps: usize,
    pub tau: f64,
    pub kappa: f64,
    /// Conductance parameter of the isotropic comparison run.
    pub isotropic_kappa: f64,
    /// Contrast compares the means over `0 < x < band` and `-band < x <= 0`.
    pub band: f64,
    /// Variance is taken over `|x| >= far` on each side.
    pub far: f64,
    /// Points closer than this to the outer boundary are not measured.
    pub margin: f64,
    pub seed: u64,
}

impl Default for StepEdgeSetup {
    fn default() -> Self {
        Self {
            side: 81,
            half_extent: 8.0,
            jitter: 0.1,
            k: 20,
            lambda: 1.0,
            noise_sigma: 0.05,
            steps: 20,
            tau: 0.05,
            kappa: 0.5,
            isotropic_kappa: 1e9,
            band: 0.5,
            far: 3.5,
            margin: 2.0,
            seed: 17,
        }
    }
}

/// Statistics of one diffusion run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusionStats {
    /// Mean of `u` just right of the edge minus the mean just left of it.
    pub contrast: f64,
    /// Mean within-side variance away from the edge.
    pub variance: f64,
}

/// Initial state and both diffusion outcomes of the step-edge experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepEdgeOutcome {
    pub initial: DiffusionStats,
    pub anisotropic: DiffusionStats,
    pub isotropic: DiffusionStats,
}

/// Diffuse a noisy unit step `u = [x > 0]` on a plane with Perona–Malik and
/// with isotropic (κ → ∞) conductance.
pub fn step_edge_experiment(setup: &StepEdgeSetup) -> Result<StepEdgeOutcome> {
    let cloud = jittered_grid(setup.side, setup.half_extent, setup.jitter, setup.seed)?;
    let n = cloud.len();
    let raw = RawOperators::build(cloud, setup.k, setup.lambda)?;
    let p = raw.cloud.positions();
    let noise = Normal::new(0.0, setup.noise_sigma)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed ^ 0x5eed);
    let u0 = ScalarField(Features::from_row_major(
        n,
        1,
        p.iter()
            .map(|q| f64::from(u8::from(q.x > 0.0)) + noise.sample(&mut rng))
            .collect(),
    )?);

    let inner = |q: &Vec3| q.x.abs().max(q.y.abs()) < setup.half_extent - setup.margin;
    let stats = |u: &ScalarField| -> DiffusionStats {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
        };
        let pick = |keep: &dyn Fn(f64) -> bool| -> Vec<f64> {
            (0..n)
                .filter(|&i| inner(&p[i]) && keep(p[i].x))
                .map(|i| u.0.get(i, 0))
                .collect()
        };
        let (b, f) = (setup.band, setup.far);
        DiffusionStats {
            contrast: mean(&pick(&|x| x > 0.0 && x < b)) - mean(&pick(&|x| x <= 0.0 && x > -b)),
            variance: 0.5 * (var(&pick(&|x| x >= f)) + var(&pick(&|x| x <= -f))),
        }
    };
    let run = |kappa: f64| -> Result<ScalarField> {
        let mut u = u0.clone();
        for _ in 0..setup.steps {
            u = diffusion_step(&u, &raw.g, &raw.d, setup.tau, kappa)?;
        }
        Ok(u)
    };
    Ok(StepEdgeOutcome {
        initial: stats(&u0),
        anisotropic: stats(&run(setup.kappa)?),
        isotropic: stats(&run(setup.isotropic_kappa)?),
    })
}
