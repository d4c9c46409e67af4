mod common;

use common::*;
use deltaconv::operators::{curl, hodge_laplacian, laplace_beltrami};
use deltaconv::{
    apply, build_divergence, build_gradient, build_operator_set, build_rotation, estimate_normals,
    Features, Field, ScalarField, SparseOperator, VectorField,
};

fn scalar(cloud: &deltaconv::PointCloud, f: impl Fn(f64, f64, f64) -> f64) -> Features {
    let p = cloud.positions();
    Features::from_fn(cloud.len(), 1, |i, _| f(p[i].x, p[i].y, p[i].z))
}

#[test]
fn plane_gradient_of_linear_field() {
    let cloud = plane(400, 1);
    let (graph, frames) = graph_and_frames(&cloud, 20);
    let g = build_gradient(&cloud, &frames, &graph, 0.0).unwrap();
    let gf = g.apply(&scalar(&cloud, |x, y, _| 2.0 * x + 3.0 * y)).unwrap();
    for i in 0..cloud.len() {
        assert!((gf.get(2 * i, 0) - 2.0).abs() < 1e-9);
        assert!((gf.get(2 * i + 1, 0) - 3.0).abs() < 1e-9);
    }
}

#[test]
fn gradient_annihilates_constants() {
    for cloud in [plane(300, 2), sphere(500, 2), torus(500, 2)] {
        let (graph, frames) = graph_and_frames(&cloud, 20);
        for lambda in [0.0, 0.01, 1.0] {
            let g = build_gradient(&cloud, &frames, &graph, lambda).unwrap();
            let out = g.apply(&Features::from_fn(cloud.len(), 1, |_, _| 1.0)).unwrap();
            assert!(out.max_abs() <= 1e-9, "lambda {lambda}: {}", out.max_abs());
        }
    }
}

#[test]
fn gradient_sparsity_and_stencil() {
    let cloud = sphere(400, 3);
    let (graph, frames) = graph_and_frames(&cloud, 12);
    let g = build_gradient(&cloud, &frames, &graph, 0.01).unwrap();
    let d = build_divergence(&cloud, &frames, &graph, 0.01).unwrap();
    assert_eq!((g.rows(), g.cols()), (800, 400));
    assert_eq!((d.rows(), d.cols()), (400, 800));
    for i in 0..cloud.len() {
        let mut stencil: Vec<usize> = graph.neighbors(i).to_vec();
        stencil.push(i);
        for r in [2 * i, 2 * i + 1] {
            let (cols, _) = g.row(r);
            assert!(cols.len() <= 13);
            assert!(cols.iter().all(|c| stencil.contains(c)));
        }
        let (cols, _) = d.row(i);
        assert!(cols.len() <= 26);
        assert!(cols.iter().all(|c| stencil.contains(&(c / 2))));
    }
}

#[test]
fn rotation_algebra() {
    let j = build_rotation(1).unwrap();
    let v = Features::from_row_major(2, 1, vec![1.0, 0.0]).unwrap();
    assert_eq!(j.apply(&v).unwrap().as_slice(), &[0.0, 1.0]);

    let j = build_rotation(50).unwrap();
    let jj = j.matmul(&j).unwrap();
    assert_eq!(jj, SparseOperator::identity(100).scaled(-1.0));
    let v = random_features(100, 3, 4);
    let jv = VectorField(j.apply(&v).unwrap());
    let (a, b) = (VectorField(v).norms(), jv.norms());
    assert_eq!(a, b);
    assert!(build_rotation(0).is_err());
}

#[test]
fn plane_divergence_of_position_field() {
    let cloud = plane(400, 5);
    let (graph, frames) = graph_and_frames(&cloud, 20);
    let d = build_divergence(&cloud, &frames, &graph, 0.0).unwrap();
    let p = cloud.positions();
    let radial = Features::from_fn(800, 1, |r, _| if r % 2 == 0 { p[r / 2].x } else { p[r / 2].y });
    let div = d.apply(&radial).unwrap();
    assert!(div.as_slice().iter().all(|x| (x - 2.0).abs() < 1e-9));
    let constant = Features::from_fn(800, 1, |r, _| if r % 2 == 0 { 0.3 } else { -1.2 });
    assert!(d.apply(&constant).unwrap().max_abs() < 1e-9);
}

#[test]
fn divergence_undoes_frame_rotation_on_plane() {
    let cloud = plane(300, 6);
    let (graph, frames) = graph_and_frames(&cloud, 20);
    let angles = random_angles(cloud.len(), 7);
    let rotated = frames.rotated(&angles).unwrap();
    let v = random_features(600, 2, 8);
    let d = build_divergence(&cloud, &frames, &graph, 0.0).unwrap();
    let d_rot = build_divergence(&cloud, &rotated, &graph, 0.0).unwrap();
    let a = d.apply(&v).unwrap();
    let b = d_rot.apply(&reexpress(&v, &angles)).unwrap();
    assert!(rel_diff(b.as_slice(), a.as_slice()) < 1e-8);
}

#[test]
fn gradient_and_divergence_are_basis_covariant() {
    for (cloud, lambda) in [(sphere(400, 9), 0.01), (torus(400, 9), 0.001), (plane(300, 9), 0.0)] {
        let (graph, frames) = graph_and_frames(&cloud, 20);
        let angles = random_angles(cloud.len(), 10);
        let rotated = frames.rotated(&angles).unwrap();
        let f = random_features(cloud.len(), 2, 11);
        let v = random_features(2 * cloud.len(), 2, 12);

        let g = build_gradient(&cloud, &frames, &graph, lambda).unwrap();
        let g_rot = build_gradient(&cloud, &rotated, &graph, lambda).unwrap();
        let expect = reexpress(&g.apply(&f).unwrap(), &angles);
        assert!(rel_diff(g_rot.apply(&f).unwrap().as_slice(), expect.as_slice()) < 1e-8);

        let d = build_divergence(&cloud, &frames, &graph, lambda).unwrap();
        let d_rot = build_divergence(&cloud, &rotated, &graph, lambda).unwrap();
        let a = d.apply(&v).unwrap();
        let b = d_rot.apply(&reexpress(&v, &angles)).unwrap();
        assert!(rel_diff(b.as_slice(), a.as_slice()) < 1e-8);
    }
}

#[test]
fn curl_of_gradient_vanishes_on_plane() {
    let cloud = plane(400, 13);
    let (graph, frames) = graph_and_frames(&cloud, 20);
    let g = build_gradient(&cloud, &frames, &graph, 0.0).unwrap();
    let d = build_divergence(&cloud, &frames, &graph, 0.0).unwrap();
    let j = build_rotation(cloud.len()).unwrap();
    let f = scalar(&cloud, |x, y, _| 1.0 - x + 0.5 * y + 2.0 * x * x - 3.0 * x * y + y * y);
    let c = curl(&d, &j).unwrap().apply(&g.apply(&f).unwrap()).unwrap();
    assert!(c.max_abs() < 1e-8, "{}", c.max_abs());
}

#[test]
fn laplace_beltrami_of_radial_quadratic_on_plane() {
    let cloud = plane(400, 14);
    let (graph, frames) = graph_and_frames(&cloud, 20);
    let g = build_gradient(&cloud, &frames, &graph, 0.0).unwrap();
    let d = build_divergence(&cloud, &frames, &graph, 0.0).unwrap();
    let lb = laplace_beltrami(&g, &d).unwrap();
    let out = lb.apply(&scalar(&cloud, |x, y, _| x * x + y * y)).unwrap();
    assert!(out.as_slice().iter().all(|x| (x + 4.0).abs() < 1e-6));
}

#[test]
fn compositions_match_sequential_application() {
    let cloud = sphere(600, 15);
    let (graph, frames) = graph_and_frames(&cloud, 20);
    let ops = build_operator_set(&cloud, &graph, &frames, 0.01).unwrap();
    let v = random_features(1200, 3, 16);
    let (g, d, j) = (&ops.g_hat, &ops.d_hat, &ops.j);
    let gd = g.apply(&d.apply(&v).unwrap()).unwrap();
    let jgdj = j.apply(&g.apply(&d.apply(&j.apply(&v).unwrap()).unwrap()).unwrap()).unwrap();
    let expect: Vec<f64> = gd.as_slice().iter().zip(jgdj.as_slice()).map(|(a, b)| -(a - b)).collect();
    assert!(rel_diff(ops.hodge.apply(&v).unwrap().as_slice(), &expect) < 1e-10);

    let curl_seq: Vec<f64> = d.apply(&j.apply(&v).unwrap()).unwrap().into_vec().iter().map(|x| -x).collect();
    assert!(rel_diff(ops.curl.apply(&v).unwrap().as_slice(), &curl_seq) < 1e-12);

    let f = random_features(600, 2, 17);
    let lb_seq: Vec<f64> = d.apply(&g.apply(&f).unwrap()).unwrap().into_vec().iter().map(|x| -x).collect();
    assert!(rel_diff(ops.laplace_beltrami.apply(&f).unwrap().as_slice(), &lb_seq) < 1e-12);

    let raw = hodge_laplacian(&ops.g, &ops.d, j).unwrap();
    assert_eq!((raw.rows(), raw.cols()), (1200, 1200));
}

#[test]
fn operator_set_invariants() {
    let cloud = plane(400, 18);
    let (graph, frames) = graph_and_frames(&cloud, 20);
    let ops = build_operator_set(&cloud, &graph, &frames, 0.01).unwrap();
    assert!((ops.g_hat.linf_norm() - 1.0).abs() < 1e-12);
    assert!((ops.d_hat.linf_norm() - 1.0).abs() < 1e-12);

    let row_sum_max = |op: &SparseOperator| {
        (0..op.rows())
            .map(|r| op.row(r).1.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    assert_eq!(ops.meta.grad_norm, row_sum_max(&ops.g));
    assert_eq!(ops.meta.div_norm, row_sum_max(&ops.d));
    assert_eq!((ops.meta.n, ops.meta.k, ops.meta.lambda), (400, 20, 0.01));
    for name in deltaconv::OperatorSet::NAMES {
        let op = ops.lookup(name).unwrap();
        assert!(op.triplets().all(|(_, _, v)| v.is_finite()));
        let t: Vec<_> = op.triplets().map(|(r, c, _)| (r, c)).collect();
        assert!(t.windows(2).all(|w| w[0] < w[1]), "{name} not sorted");
    }
    assert!(ops.lookup("grad").is_err());

    let again = build_operator_set(&cloud, &graph, &frames, 0.01).unwrap();
    assert_eq!(ops, again);
}

#[test]
fn assembly_is_independent_of_thread_count() {
    let cloud = sphere(700, 19);
    let (graph, frames) = graph_and_frames(&cloud, 20);
    let build_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| build_operator_set(&cloud, &graph, &frames, 0.01).unwrap())
    };
    let (parallel, serial) = (build_with(4), build_with(1));
    for name in deltaconv::OperatorSet::NAMES {
        let a: Vec<_> = parallel.lookup(name).unwrap().triplets().map(|(r, c, v)| (r, c, v.to_bits())).collect();
        let b: Vec<_> = serial.lookup(name).unwrap().triplets().map(|(r, c, v)| (r, c, v.to_bits())).collect();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn apply_picks_field_kind() {
    let cloud = sphere(200, 20);
    let (graph, frames) = graph_and_frames(&cloud, 20);
    let ops = build_operator_set(&cloud, &graph, &frames, 0.01).unwrap();
    let x = Field::Scalar(ScalarField(random_features(200, 2, 21)));
    assert!(matches!(apply(&ops.g, &x).unwrap(), Field::Vector(_)));
    let v = apply(&ops.g, &x).unwrap();
    assert!(matches!(apply(&ops.d, &v).unwrap(), Field::Scalar(_)));
    assert!(matches!(apply(&ops.hodge, &v).unwrap(), Field::Vector(_)));
    assert!(apply(&ops.d, &x).is_err());
    let zero = Field::Scalar(ScalarField::zeros(200, 1));
    assert_eq!(apply(&ops.laplace_beltrami, &zero).unwrap(), zero);
}

#[test]
fn estimated_normals_build_on_sphere() {
    let cloud = sphere(1000, 22);
    let graph = deltaconv::build_knn_graph(&cloud, 20).unwrap();
    let estimated = estimate_normals(&deltaconv::PointCloud::new(cloud.positions().to_vec()).unwrap(), &graph).unwrap();
    let frames = deltaconv::build_tangent_frames(&estimated).unwrap();
    let ops = build_operator_set(&estimated, &graph, &frames, 0.01).unwrap();
    assert!((ops.g_hat.linf_norm() - 1.0).abs() < 1e-12);
    assert!((ops.d_hat.linf_norm() - 1.0).abs() < 1e-12);
}

#[test]
fn gradient_rejects_mismatched_inputs() {
    let a = sphere(100, 23);
    let b = sphere(120, 23);
    let (graph, frames) = graph_and_frames(&a, 10);
    assert!(build_gradient(&b, &frames, &graph, 0.01).is_err());
}
