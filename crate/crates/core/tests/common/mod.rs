#![allow(dead_code)]

use deltaconv::mlp::Stream;
use deltaconv::oracle::{sample_surface, AnalyticSurface};
use deltaconv::{
    build_knn_graph, build_tangent_frames, Activation, BatchNorm, DeltaConvParams, Features,
    KnnGraph, Layer, MlpParams, PointCloud, TangentFrames, VectorField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn plane(n: usize, seed: u64) -> PointCloud {
    sample_surface(&AnalyticSurface::unit_plane(), n, seed).unwrap()
}

pub fn sphere(n: usize, seed: u64) -> PointCloud {
    sample_surface(&AnalyticSurface::unit_sphere(), n, seed).unwrap()
}

pub fn torus(n: usize, seed: u64) -> PointCloud {
    sample_surface(&AnalyticSurface::default_torus(), n, seed).unwrap()
}

pub fn graph_and_frames(cloud: &PointCloud, k: usize) -> (KnnGraph, TangentFrames) {
    (build_knn_graph(cloud, k).unwrap(), build_tangent_frames(cloud).unwrap())
}

pub fn random_features(rows: usize, channels: usize, seed: u64) -> Features {
    let mut r = rng(seed);
    Features::from_fn(rows, channels, |_, _| r.random_range(-1.0..1.0))
}

pub fn random_angles(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
}

/// Coefficients of the same tangent vectors in frames rotated by `angles`.
pub fn reexpress(v: &Features, angles: &[f64]) -> Features {
    let mut out = v.clone();
    for (i, t) in angles.iter().enumerate() {
        let (s, c) = t.sin_cos();
        for ch in 0..v.channels() {
            let (a, b) = (v.get(2 * i, ch), v.get(2 * i + 1, ch));
            out.set(2 * i, ch, c * a + s * b);
            out.set(2 * i + 1, ch, -s * a + c * b);
        }
    }
    out
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let den = b.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

fn random_matrix(r: &mut ChaCha8Rng, out: usize, inw: usize) -> Vec<Vec<f64>> {
    let scale = (1.0 / inw as f64).sqrt();
    (0..out)
        .map(|_| (0..inw).map(|_| r.random_range(-1.0..1.0) * scale).collect())
        .collect()
}

fn random_bn(r: &mut ChaCha8Rng, out: usize) -> BatchNorm {
    BatchNorm {
        scale: (0..out).map(|_| r.random_range(0.5..1.5)).collect(),
        shift: (0..out).map(|_| r.random_range(-0.2..0.2)).collect(),
        mean: (0..out).map(|_| r.random_range(-0.1..0.1)).collect(),
        var: (0..out).map(|_| r.random_range(0.5..2.0)).collect(),
    }
}

/// Two-layer MLP with batch norm and the stream's activation on the hidden
/// layer, linear output.
pub fn random_mlp(r: &mut ChaCha8Rng, widths: &[usize], stream: Stream) -> MlpParams {
    let last = widths.len() - 2;
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let mut layer = Layer::linear(random_matrix(r, w[1], w[0]));
            if l < last {
                layer.bn = Some(random_bn(r, w[1]));
                match stream {
                    Stream::Scalar => {
                        layer.b = (0..w[1]).map(|_| r.random_range(-0.1..0.1)).collect();
                        layer.act = Activation::LeakyRelu(0.2);
                    }
                    Stream::Vector => {
                        layer.b = (0..w[1]).map(|_| r.random_range(-0.1..0.1)).collect();
                        layer.act = Activation::NormRelu;
                    }
                }
            }
            layer
        })
        .collect();
    MlpParams::new(layers)
}

/// Random block parameters for `c_x` scalar and `c_v` vector inputs.
pub fn random_params(c_x: usize, c_v: usize, c_out: usize, v_out: usize, seed: u64) -> DeltaConvParams {
    let mut r = rng(seed);
    DeltaConvParams {
        theta0: random_mlp(&mut r, &[c_x + 3 * c_v, 8, c_out], Stream::Scalar),
        theta1: random_mlp(&mut r, &[c_x, 8, c_out], Stream::Scalar),
        theta2: random_mlp(&mut r, &[2 * (2 * c_v + c_out), 6, v_out], Stream::Vector),
        centralize: false,
    }
}

pub fn vector(f: Features) -> VectorField {
    VectorField::new(f).unwrap()
}

/// Operator set whose `Ĝ`, `D̂` use the given normalization constants
/// instead of the set's own ℓ∞ norms.
pub fn operator_set_with_norms(
    cloud: &PointCloud,
    graph: &KnnGraph,
    frames: &TangentFrames,
    lambda: f64,
    grad_norm: f64,
    div_norm: f64,
) -> deltaconv::OperatorSet {
    use deltaconv::operators::{curl, hodge_laplacian, laplace_beltrami};
    let own = deltaconv::build_operator_set(cloud, graph, frames, lambda).unwrap();
    let g_hat = own.g.scaled(1.0 / grad_norm);
    let d_hat = own.d.scaled(1.0 / div_norm);
    let c = curl(&d_hat, &own.j).unwrap();
    let l = hodge_laplacian(&g_hat, &d_hat, &own.j).unwrap();
    let lb = laplace_beltrami(&g_hat, &d_hat).unwrap();
    let mut meta = own.meta.clone();
    meta.grad_norm = grad_norm;
    meta.div_norm = div_norm;
    deltaconv::OperatorSet::from_parts([own.g, g_hat, own.j, own.d, d_hat, c, l, lb], meta).unwrap()
}
