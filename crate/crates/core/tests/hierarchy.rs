mod common;

use bamg::chain::{gen_tandem_queue, gen_uniform_network, TANDEM_MU, TANDEM_MU_X, TANDEM_MU_Y};
use bamg::coarsening::{full_coarsen_grid, CfPartition};
use bamg::hierarchy::{
    build_averaging_restriction, coarsen_level, injection_restrict, operator_complexity, Hierarchy,
    Level, Transfer,
};
use bamg::interp::{build_interpolation, LsParams, TestVectorSet};
use bamg::mle::{run_setup, Coarsening, MleParams};
use bamg::smoothing::SmootherParams;
use bamg::{Error, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            for j in 0..m {
                c[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    c
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn identity_interpolation_gives_identity_restriction() {
    let q = build_averaging_restriction(&SparseMatrix::identity(5)).unwrap();
    assert_eq!(q.to_dense(), SparseMatrix::identity(5).to_dense());
}

#[test]
fn restriction_preserves_column_sums() {
    let b = gen_uniform_network(17).unwrap().b();
    let part = full_coarsen_grid(17).unwrap();
    let tvs = TestVectorSet::random_positive(289, 6, 3).unwrap();
    let p = build_interpolation(&b, &part, &tvs, &LsParams::default()).unwrap();
    let q = build_averaging_restriction(&p).unwrap();
    assert_eq!((q.nrows(), q.ncols()), (81, 289));
    for s in q.column_sums() {
        assert!((s - 1.0).abs() < 1e-14);
    }
    // sparsity of P^t
    let pt = p.transpose();
    for i in 0..81 {
        assert_eq!(q.row(i).0, pt.row(i).0);
    }
}

#[test]
fn restriction_rejects_empty_rows_and_columns() {
    let p = SparseMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
    assert!(matches!(
        build_averaging_restriction(&p),
        Err(Error::EmptyInterpolationRow { row: 2 })
    ));
    let p = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
    assert!(matches!(
        build_averaging_restriction(&p),
        Err(Error::EmptyInterpolationColumn { col: 1 })
    ));
}

#[test]
fn coarse_operators_match_dense_products() {
    let b = gen_uniform_network(9).unwrap().b();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut trip = Vec::new();
    for i in 0..81 {
        trip.push((i, i % 25, rng.random_range(0.1..1.0)));
        trip.push((i, (i * 7 + 3) % 25, rng.random_range(0.1..1.0)));
    }
    let p = SparseMatrix::from_triplets(81, 25, &trip).unwrap();
    let q = build_averaging_restriction(&p).unwrap();
    let t = SparseMatrix::identity(81).scaled(2.0);
    let (bc, tc) = coarsen_level(&b, &t, &p, &q).unwrap();
    let want_b = dense_mul(&q.to_dense(), &dense_mul(&b.to_dense(), &p.to_dense()));
    let want_t = dense_mul(&q.to_dense(), &dense_mul(&t.to_dense(), &p.to_dense()));
    assert!(max_diff(&bc.to_dense(), &want_b) < 1e-13);
    assert!(max_diff(&tc.to_dense(), &want_t) < 1e-13);
}

#[test]
fn injection_copies_coarse_values() {
    let part = CfPartition::from_cset(5, vec![4, 1]).unwrap();
    let x = [10.0, 11.0, 12.0, 13.0, 14.0];
    assert_eq!(injection_restrict(&part, &x), vec![11.0, 14.0]);
}

#[test]
fn hierarchy_validates_levels() {
    assert!(Hierarchy::new(Vec::new(), SmootherParams::default()).is_err());
    let b = gen_uniform_network(5).unwrap().b();
    let coarse = Level::new(SparseMatrix::identity(9), SparseMatrix::identity(9));
    let fine = Level::new(b.clone(), SparseMatrix::identity(25));
    // missing transfer
    assert!(Hierarchy::new(vec![fine, coarse.clone()], SmootherParams::default()).is_err());
    // coarse level not smaller
    let mut fine = Level::new(b.clone(), SparseMatrix::identity(25));
    let part = full_coarsen_grid(5).unwrap();
    let tvs = TestVectorSet::random_positive(25, 4, 1).unwrap();
    let p = build_interpolation(&b, &part, &tvs, &LsParams::default()).unwrap();
    let q = build_averaging_restriction(&p).unwrap();
    fine.transfer = Some(Transfer { p, q, part });
    let big = Level::new(SparseMatrix::identity(30), SparseMatrix::identity(30));
    assert!(Hierarchy::new(vec![fine.clone(), big], SmootherParams::default()).is_err());
    let h = Hierarchy::new(vec![fine, coarse], SmootherParams::default()).unwrap();
    assert_eq!(h.num_levels(), 2);
    assert!(h.finest().smoother.is_some());
    assert!(h.coarsest().transfer.is_none());
}

#[test]
fn setup_hierarchy_has_zero_column_sums_and_averaging_transfers() {
    let prob = gen_tandem_queue(17, TANDEM_MU, TANDEM_MU_X, TANDEM_MU_Y).unwrap();
    let out = run_setup(&prob, MleParams::default(), Coarsening::FullGrid).unwrap();
    let h = &out.hierarchy;
    assert_eq!(h.num_levels(), 3);
    for (l, d) in h.column_sum_defects().into_iter().enumerate() {
        let n = h.levels()[l].n() as f64;
        assert!(d <= 1e-12 * n, "level {l}: column-sum defect {d:e}");
    }
    for lev in &h.levels()[..h.num_levels() - 1] {
        let tr = lev.transfer.as_ref().unwrap();
        for s in tr.q.column_sums() {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }
}

#[test]
fn operator_complexity_and_stats() {
    let prob = gen_uniform_network(33).unwrap();
    let out = run_setup(&prob, MleParams::default(), Coarsening::FullGrid).unwrap();
    let h = &out.hierarchy;
    let stats = h.stats();
    let sides: Vec<_> = stats.iter().map(|s| s.grid_side).collect();
    assert_eq!(sides, vec![Some(33), Some(17), Some(9), Some(5)]);
    let total: usize = stats.iter().map(|s| s.nnz).sum();
    let oc = operator_complexity(h);
    assert!((oc - total as f64 / stats[0].nnz as f64).abs() < 1e-15);
    assert!(oc < 1.8);
    let text = h.stats_text();
    assert!(text.contains("33x33") && text.contains("operator complexity"));
    let mut csv = Vec::new();
    h.write_stats_csv(&mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("level,n,nnz,grid_side\n"));
    assert_eq!(csv.lines().count(), 5);
}
