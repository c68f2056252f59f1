use hrelm::regcore::{objective, HrConfig, HrMode, RegProblem, StrategyFamily};
use hrelm::Matrix;
use hrelm_exp::experiment::write_matrix;
use hrelm_exp::sweep::{emit_sweep, log_grid, ProblemSource, SWEEP_HEADER};

fn read(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn worked() -> RegProblem {
    RegProblem::new(
        Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]),
        Matrix::from_column_slice(2, 1, &[1.0, 4.0]),
    )
    .unwrap()
}

#[test]
fn empty_grid_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let source = ProblemSource::Synthetic {
        dim: 3,
        rows: 20,
        seed: 1,
    };
    let n = emit_sweep(
        &source,
        &[StrategyFamily::Scalar],
        &[0, 1],
        &[],
        HrMode::Standard,
        &out,
    )
    .unwrap();
    assert_eq!(n, 0);
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        format!("{}\n", SWEEP_HEADER.join(","))
    );
}

#[test]
fn two_strategies_six_orders() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/fig.csv");
    let grid = log_grid(-3.0, 1.0, 9);
    let source = ProblemSource::Synthetic {
        dim: 10,
        rows: 1000,
        seed: 7,
    };
    let strategies = [StrategyFamily::Scalar, StrategyFamily::SpectrumOffset];
    let orders: Vec<usize> = (0..=5).collect();
    emit_sweep(&source, &strategies, &orders, &grid, HrMode::Standard, &out).unwrap();
    let (header, rows) = read(&out);
    assert_eq!(header, SWEEP_HEADER);
    assert_eq!(rows.len(), 2 * 6 * grid.len());
    for row in &rows {
        for v in &row[3..] {
            assert!(v.parse::<f64>().unwrap().is_finite());
        }
    }
}

#[test]
fn worked_gram_row_matches_hand_values() {
    // gram diag(1,4), R = I: F = diag(1/2, 1/5), Cond = 5/2.
    // c = 0: ‖G⁻¹F‖ = 1/2. c = 1: ‖G⁻¹F²‖ = 1/4.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.csv");
    let source = ProblemSource::Explicit(worked());
    emit_sweep(
        &source,
        &[StrategyFamily::Scalar],
        &[0, 1],
        &[1.0],
        HrMode::Standard,
        &out,
    )
    .unwrap();
    let (_, rows) = read(&out);
    let num = |r: &Vec<String>, i: usize| r[i].parse::<f64>().unwrap();
    for (row, (c, obj, res)) in rows.iter().zip([(0, 1.25, 0.5), (1, 0.625, 0.25)]) {
        assert_eq!(row[0], "scalar");
        assert_eq!(row[1], c.to_string());
        assert_eq!(num(row, 2), 1.0);
        assert!((num(row, 3) - obj).abs() < 1e-12);
        assert!((num(row, 4) - 2.5).abs() < 1e-12);
        assert!((num(row, 5) - res).abs() < 1e-12);
        let lib = objective(&worked(), &Matrix::identity(2, 2), &HrConfig::with_order(c)).unwrap();
        assert!((num(row, 3) - lib).abs() < 1e-12);
    }
}

#[test]
fn gram_file_source_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let gram_path = dir.path().join("gram.csv");
    write_matrix(&gram_path, worked().gram()).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    emit_sweep(
        &ProblemSource::GramFile(gram_path),
        &[StrategyFamily::Scalar],
        &[0, 1, 2],
        &[0.5, 2.0],
        HrMode::Standard,
        &a,
    )
    .unwrap();
    emit_sweep(
        &ProblemSource::Explicit(worked()),
        &[StrategyFamily::Scalar],
        &[0, 1, 2],
        &[0.5, 2.0],
        HrMode::Standard,
        &b,
    )
    .unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn missing_gram_file_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    let err = emit_sweep(
        &ProblemSource::GramFile(missing.clone()),
        &[StrategyFamily::Scalar],
        &[0],
        &[1.0],
        HrMode::Standard,
        &dir.path().join("o.csv"),
    )
    .unwrap_err();
    assert!(err.to_string().contains("absent.csv"));
    assert_eq!(err.exit_code(), 2);
}
