use bamg::chain::*;
use bamg::sparse::strong_components;
use bamg::{Error, SparseMatrix};

#[test]
fn uniform_entries_by_degree() {
    let p = gen_uniform_network(5).unwrap();
    let a = &p.a;
    // interior node (2,2), edge node (0,2), corner (0,0)
    let interior = grid_index(5, 2, 2);
    let edge = grid_index(5, 0, 2);
    let corner = grid_index(5, 0, 0);
    assert_eq!(a.get(grid_index(5, 1, 2), interior), 0.25);
    assert_eq!(a.get(grid_index(5, 1, 2), edge), 1.0 / 3.0);
    assert_eq!(a.get(grid_index(5, 1, 0), corner), 0.5);
    assert!(validate(&p).passed());
}

#[test]
fn uniform_n2_is_all_halves() {
    let p = gen_uniform_network(2).unwrap();
    assert!(p.a.triplets().all(|(_, _, v)| v == 0.5));
    assert!(p.a.column_sums().iter().all(|&s| s == 1.0));
}

#[test]
fn uniform_nnz_is_twice_edge_count() {
    for n in [2, 3, 7] {
        let p = gen_uniform_network(n).unwrap();
        let edges = 2 * n * (n - 1);
        assert_eq!(p.a.nnz(), 2 * edges);
    }
}

#[test]
fn tandem_interior_and_corner() {
    let n = 6;
    let p = gen_tandem_queue(n, TANDEM_MU, TANDEM_MU_X, TANDEM_MU_Y).unwrap();
    let s = grid_index(n, 2, 2);
    assert!((p.a.get(grid_index(n, 3, 2), s) - 11.0 / 31.0).abs() < 1e-15);
    assert!((p.a.get(grid_index(n, 1, 3), s) - 10.0 / 31.0).abs() < 1e-15);
    assert!((p.a.get(grid_index(n, 2, 1), s) - 10.0 / 31.0).abs() < 1e-15);
    let origin = grid_index(n, 0, 0);
    assert_eq!(p.a.get(grid_index(n, 1, 0), origin), 1.0);
    let report = validate(&p);
    assert!(report.passed(), "{report}");
}

#[test]
fn tandem_rejects_nonpositive_weights() {
    assert!(gen_tandem_queue(5, 0.0, 0.5, 0.5).is_err());
}

#[test]
fn planar_square_with_diagonal() {
    // four corners of a slightly skewed square; Delaunay picks one diagonal
    let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.1, 0.9]];
    let p = planar_from_points(&pts).unwrap();
    let a = &p.a;
    let mut degree_three = 0;
    for j in 0..4 {
        let col: Vec<f64> = (0..4).map(|i| a.get(i, j)).filter(|&v| v > 0.0).collect();
        if col.len() == 3 {
            degree_three += 1;
            assert!(col.iter().all(|&v| v == 1.0 / 3.0));
        } else {
            assert_eq!(col.len(), 2);
            assert!(col.iter().all(|&v| v == 0.5));
        }
    }
    assert_eq!(degree_three, 2);
    assert!(validate(&p).passed());
}

#[test]
fn planar_seed_reproducible() {
    let a = gen_planar_graph(200, 9).unwrap();
    let b = gen_planar_graph(200, 9).unwrap();
    let c = gen_planar_graph(200, 10).unwrap();
    assert_eq!(a.a, b.a);
    assert_ne!(a.a, c.a);
    assert_eq!(strong_components(&a.a), 1);
}

#[test]
fn planar_rejects_collinear() {
    let pts = [[0.0, 0.0], [0.5, 0.5], [1.0, 1.0], [0.25, 0.25]];
    assert!(matches!(
        planar_from_points(&pts),
        Err(Error::DegeneratePoints(_))
    ));
}

#[test]
fn strip_zero_diagonal_is_identity() {
    let p = gen_uniform_network(3).unwrap();
    assert_eq!(strip_self_transitions(&p.a).unwrap(), p.a);
}

#[test]
fn strip_half_matrix() {
    let a = SparseMatrix::from_dense(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
    let s = strip_self_transitions(&a).unwrap();
    assert_eq!(s.to_dense(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
}

#[test]
fn strip_absorbing_state_fails() {
    let a = SparseMatrix::from_dense(&[vec![1.0, 0.5], vec![0.0, 0.5]]);
    assert!(matches!(
        strip_self_transitions(&a),
        Err(Error::AbsorbingState { state: 0 })
    ));
}

#[test]
fn validate_flags_substochastic_column() {
    let a = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![0.9, 0.0]]);
    let p = ChainProblem {
        a,
        kind: ChainKind::External,
        grid_dim: None,
        seed: None,
        points: None,
    };
    let r = validate(&p);
    assert!(!r.stochastic.pass);
    assert_eq!(r.stochastic.worst_index, Some(0));
    assert!(r.zero_diagonal.pass);
}

#[test]
fn validate_flags_reducible() {
    let a = SparseMatrix::from_dense(&[
        vec![0.0, 1.0, 0.0, 0.0],
        vec![0.5, 0.0, 0.0, 0.0],
        vec![0.5, 0.0, 0.0, 1.0],
        vec![0.0, 0.0, 1.0, 0.0],
    ]);
    let p = ChainProblem {
        a,
        kind: ChainKind::External,
        grid_dim: None,
        seed: None,
        points: None,
    };
    let r = validate(&p);
    assert_eq!(r.strong_components, 2);
    assert!(!r.passed());
}

#[test]
fn matrix_market_round_trip() {
    let p = gen_uniform_network(3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u3.mtx");
    save_matrix_market(&p, &path).unwrap();
    let q = load_matrix_market(&path).unwrap();
    assert_eq!(q.a, p.a);
    assert_eq!(q.kind, ChainKind::External);
}

#[test]
fn fine_level_diagonal_of_b_is_one() {
    for p in [
        gen_uniform_network(5).unwrap(),
        gen_tandem_queue(5, TANDEM_MU, TANDEM_MU_X, TANDEM_MU_Y).unwrap(),
        gen_planar_graph(30, 1).unwrap(),
    ] {
        assert!(p.b().diagonal().iter().all(|&d| d == 1.0));
    }
}
