use bamg::sparse::mtx::*;
use bamg::{Error, SparseMatrix};
use std::path::Path;
use std::io::Cursor;

#[test]
fn round_trip_is_exact() {
    let m = SparseMatrix::from_dense(&[
        vec![0.0, 1.0 / 3.0, 0.1],
        vec![0.5, 0.0, 0.9],
        vec![0.5, 2.0 / 3.0, 0.0],
    ]);
    let mut buf = Vec::new();
    write_to(&m, &mut buf).unwrap();
    let back = read_from(Cursor::new(buf), Path::new("mem")).unwrap();
    assert_eq!(back, m);
}

#[test]
fn parses_comments_and_symmetric() {
    let text = "%%MatrixMarket matrix coordinate real symmetric\n% hi\n2 2 2\n1 1 4\n2 1 -1\n";
    let m = read_from(Cursor::new(text), Path::new("mem")).unwrap();
    assert_eq!(m.to_dense(), vec![vec![4.0, -1.0], vec![-1.0, 0.0]]);
}

#[test]
fn rejects_bad_index() {
    let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
    let e = read_from(Cursor::new(text), Path::new("mem")).unwrap_err();
    assert!(matches!(e, Error::Parse { line: 3, .. }));
}

#[test]
fn rejects_array_layout() {
    let text = "%%MatrixMarket matrix array real general\n2 2\n";
    assert!(read_from(Cursor::new(text), Path::new("mem")).is_err());
}
