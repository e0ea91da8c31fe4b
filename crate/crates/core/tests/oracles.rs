//! Worked examples checked against the independent routines in `common`.

mod common;

use common::*;
use rand::Rng;
use tensor_spca::admm::{y_update, AdmmParams, Lambda};
use tensor_spca::classify::{krr_fit, krr_scores, rbf_kernel, KrrParams, LabeledFeatures, Sigma};
use tensor_spca::par::Execution;
use tensor_spca::spca::{auto_rho, center, deflate, fit, transform};
use tensor_spca::{pca_fit, Matrix};

#[test]
fn jacobi_oracle_self_check() {
    let a = vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]];
    let (vals, vecs) = jacobi_eigen(&a);
    for (l, v) in vals.iter().zip(&vecs) {
        let av = mat_vec(&a, v);
        let err: f64 = av.iter().zip(v).map(|(x, y)| (x - l * y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert!((vnorm(v) - 1.0).abs() < 1e-12);
    }
    assert!(vals.windows(2).all(|w| w[0] >= w[1]));
    let x = gauss_solve(&a, &[1.0, 2.0, 3.0]);
    let back = mat_vec(&a, &x);
    assert!((back[0] - 1.0).abs() + (back[1] - 2.0).abs() + (back[2] - 3.0).abs() < 1e-12);
}

#[test]
fn centered_columns_sum_to_zero() {
    let mut r = rng(11);
    let d = random_matrix(&mut r, 5, 3);
    let c = center(&d);
    for j in 0..3 {
        assert!(c.dtilde.col(j).iter().sum::<f64>().abs() <= 1e-12);
    }
}

#[test]
fn auto_rho_uses_top_eigenvalue() {
    let mut r = rng(12);
    for _ in 0..10 {
        let d = random_matrix(&mut r, 7, 4);
        let (vals, _) = jacobi_eigen(&gram(&to_dense(&d)));
        let expected = (4.4 * vals[0]).max(1.0);
        assert!((auto_rho(&d) - expected).abs() <= 1e-10 * expected);
    }
    let (vals, _) = jacobi_eigen(&vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    assert!((auto_rho(&Matrix::identity(2)) - 4.4 * vals[0]).abs() < 1e-12);
}

#[test]
fn x_update_on_6x4() {
    let mut r = rng(13);
    let d = random_matrix(&mut r, 6, 4);
    let rho = auto_rho(&d);
    let z = [0.3, -0.1, 0.5, 0.2];
    let y = [0.01, 0.0, -0.2, 0.4];
    let x = tensor_spca::admm::x_update(&d, &z, &y, rho).unwrap();
    let mut m = gram(&to_dense(&d));
    for (i, row) in m.iter_mut().enumerate() {
        row.iter_mut().for_each(|v| *v *= -2.0);
        row[i] += rho;
    }
    let rhs: Vec<f64> = z.iter().zip(&y).map(|(a, b)| rho * a - b).collect();
    let oracle = gauss_solve(&m, &rhs);
    for (a, b) in x.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-10 * (1.0 + vnorm(&rhs)));
    }
}

#[test]
fn x_update_trivial_cases() {
    let zero = Matrix::zeros(3, 2);
    let x = tensor_spca::admm::x_update(&zero, &[1.0, 2.0], &[0.5, -1.0], 2.0).unwrap();
    assert!((x[0] - 0.75).abs() < 1e-15 && (x[1] - 2.5).abs() < 1e-15);
    let d = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.5]]).unwrap();
    let x = tensor_spca::admm::x_update(&d, &[0.5, 1.0], &[2.5, 5.0], 5.0).unwrap();
    assert!(x.iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn y_update_elementwise() {
    let mut r = rng(14);
    for _ in 0..20 {
        let p = r.random_range(1..10);
        let v = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            (0..p).map(|_| r.random_range(-2.0..2.0)).collect()
        };
        let (y, x, z) = (v(&mut r), v(&mut r), v(&mut r));
        let rho = r.random_range(0.1..10.0);
        let out = y_update(&y, &x, &z, rho);
        for i in 0..p {
            assert_eq!(out[i], y[i] + rho * (x[i] - z[i]));
        }
    }
    assert_eq!(y_update(&[0.0, 0.0], &[1.0, -1.0], &[0.0, 0.0], 2.0), vec![2.0, -2.0]);
    assert_eq!(y_update(&[0.3], &[0.7], &[0.7], 9.0), vec![0.3]);
}

#[test]
fn deflate_random_10x6() {
    let mut r = rng(15);
    let d = random_matrix(&mut r, 10, 6);
    let mut x: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
    let len = vnorm(&x);
    x.iter_mut().for_each(|v| *v /= len);
    let out = deflate(&d, &x);
    assert!(vnorm(&mat_vec(&to_dense(&out), &x)) <= 1e-10);
}

/// Largest principal angle between the column spans of two orthonormal bases.
fn max_principal_angle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let k = a.len();
    let m: Dense = (0..k).map(|i| (0..k).map(|j| vdot(&a[i], &b[j])).collect()).collect();
    let (vals, _) = jacobi_eigen(&mat_mul(&transpose(&m), &m));
    let smallest = vals.last().unwrap().max(0.0).sqrt().min(1.0);
    smallest.acos()
}

#[test]
fn lambda_zero_fit_spans_top_eigenvectors() {
    let params = AdmmParams {
        lambda: Lambda::Absolute(0.0),
        ..AdmmParams::default()
    };
    let mut r = rng(16);
    let mut checked = 0;
    while checked < 5 {
        let d = random_matrix(&mut r, 30, 5);
        let (vals, vecs) = jacobi_eigen(&gram(&centered(&to_dense(&d))));
        if vals[2] < 1.2 * vals[3] || vals[0] < 1.2 * vals[1] || vals[1] < 1.2 * vals[2] {
            continue;
        }
        checked += 1;
        let model = fit(&d, 3, &params).unwrap();
        let ours: Vec<Vec<f64>> = (0..3).map(|k| model.loadings.col(k)).collect();
        assert!(max_principal_angle(&ours, &vecs[..3]) <= 1e-2);
    }
}

#[test]
fn lambda_zero_transform_matches_pca() {
    let params = AdmmParams {
        lambda: Lambda::Absolute(0.0),
        ..AdmmParams::default()
    };
    let mut r = rng(17);
    let d = random_matrix(&mut r, 25, 4);
    let sparse = transform(&fit(&d, 2, &params).unwrap(), &d).unwrap();
    let pca = pca_fit(&d, 2).unwrap().transform(&d, Execution::Sequential).unwrap();
    for k in 0..2 {
        let (a, b) = (sparse.col(k), pca.col(k));
        let sign = vdot(&a, &b).signum();
        let err = a.iter().zip(&b).map(|(x, y)| (x - sign * y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "column {k}: {err}");
    }
}

#[test]
fn pca_full_dim_is_isometry() {
    let mut r = rng(18);
    let d = random_matrix(&mut r, 9, 4);
    let proj = pca_fit(&d, 4).unwrap().transform(&d, Execution::Sequential).unwrap();
    for i in 0..9 {
        for j in 0..9 {
            let before: f64 = d.row(i).iter().zip(d.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            let after: f64 =
                proj.row(i).iter().zip(proj.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!((before.sqrt() - after.sqrt()).abs() <= 1e-8);
        }
    }
}

fn reconstruction_error(dc: &Dense, basis: &[Vec<f64>]) -> f64 {
    dc.iter()
        .map(|row| {
            let mut rec = vec![0.0; row.len()];
            for b in basis {
                let c = vdot(row, b);
                rec.iter_mut().zip(b).for_each(|(r, bi)| *r += c * bi);
            }
            row.iter().zip(&rec).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum()
}

#[test]
fn pca_beats_random_projections() {
    let mut r = rng(19);
    let d = random_matrix(&mut r, 10, 4);
    let dc = centered(&to_dense(&d));
    let model = pca_fit(&d, 2).unwrap();
    let ours = reconstruction_error(&dc, &[model.components.col(0), model.components.col(1)]);
    for _ in 0..200 {
        let mut a: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut b: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        let na = vnorm(&a);
        a.iter_mut().for_each(|v| *v /= na);
        let ab = vdot(&a, &b);
        b.iter_mut().zip(&a).for_each(|(v, ai)| *v -= ab * ai);
        let nb = vnorm(&b);
        b.iter_mut().for_each(|v| *v /= nb);
        assert!(ours <= reconstruction_error(&dc, &[a, b]) + 1e-12);
    }
}

#[test]
fn kernel_matches_direct_recomputation() {
    let mut r = rng(20);
    let a = random_matrix(&mut r, 6, 3);
    let k = rbf_kernel(&a, &a, 0.7, Execution::Parallel).unwrap();
    let rows = to_dense(&a);
    for i in 0..6 {
        for j in 0..6 {
            assert!((k[(i, j)] - rbf(&rows[i], &rows[j], 0.7)).abs() < 1e-15);
            assert_eq!(k[(i, j)], k[(j, i)]);
            assert!(k[(i, j)] > 0.0 && k[(i, j)] <= 1.0);
        }
    }
}

#[test]
fn krr_residual_on_random_data() {
    let mut r = rng(21);
    let x = random_matrix(&mut r, 15, 4);
    let labels: Vec<usize> = (0..15).map(|_| r.random_range(0..4)).collect();
    let train = LabeledFeatures::new(x.clone(), labels.clone(), 4).unwrap();
    let c = 1e-3;
    let model = krr_fit(&train, &KrrParams { sigma: Sigma::Fixed(0.8), c }, Execution::Sequential)
        .unwrap();
    let rows = to_dense(&x);
    let mut res2 = 0.0;
    for cls in 0..4 {
        let col = model.dual_weights.col(cls);
        let y: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l == cls))).collect();
        let oracle_rhs: Dense = (0..15)
            .map(|i| (0..15).map(|j| rbf(&rows[i], &rows[j], 0.8) + if i == j { c } else { 0.0 }).collect())
            .collect();
        let oracle = gauss_solve(&oracle_rhs, &y);
        let ky = mat_vec(&oracle_rhs, &col);
        res2 += ky.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        for (a, b) in col.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
        }
    }
    let y_norm = (labels.len() as f64).sqrt();
    assert!(res2.sqrt() <= 1e-8 * (1.0 + y_norm));
}

#[test]
fn krr_two_clusters() {
    let mut r = rng(22);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (cls, center) in [(0usize, [-3.0, 0.0]), (1, [3.0, 1.0])] {
        for _ in 0..6 {
            rows.push(vec![
                center[0] + r.random_range(-0.5..0.5),
                center[1] + r.random_range(-0.5..0.5),
            ]);
            labels.push(cls);
        }
    }
    let x = Matrix::from_rows(&rows).unwrap();
    let train = LabeledFeatures::new(x, labels, 2).unwrap();
    let model = krr_fit(&train, &KrrParams::default(), Execution::Sequential).unwrap();
    let query = [3.1, 0.9];
    let scores = krr_scores(&model, &query).unwrap();

    let n = rows.len();
    let k: Dense = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| rbf(&rows[i], &rows[j], model.sigma) + if i == j { 1e-3 } else { 0.0 })
                .collect()
        })
        .collect();
    let kq: Vec<f64> = rows.iter().map(|row| rbf(row, &query, model.sigma)).collect();
    let oracle: Vec<f64> = (0..2)
        .map(|c| {
            let y: Vec<f64> = train.labels.iter().map(|&l| f64::from(u8::from(l == c))).collect();
            vdot(&kq, &gauss_solve(&k, &y))
        })
        .collect();
    assert!(oracle[1] > oracle[0]);
    for (a, b) in scores.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-8);
    }
    assert_eq!(tensor_spca::classify::krr_predict(&model, &query).unwrap(), 1);
}

#[test]
fn isolated_point_keeps_its_class() {
    let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.1, 0.0], vec![0.0, 0.1], vec![50.0, 50.0]])
        .unwrap();
    let train = LabeledFeatures::new(x, vec![0, 0, 0, 1], 2).unwrap();
    let params = KrrParams {
        sigma: Sigma::Fixed(1.0),
        c: 1e-6,
    };
    let model = krr_fit(&train, &params, Execution::Sequential).unwrap();
    assert_eq!(tensor_spca::classify::krr_predict(&model, &[50.0, 50.0]).unwrap(), 1);
}
