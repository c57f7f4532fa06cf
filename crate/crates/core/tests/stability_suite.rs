//! Stability runs over a small suite of regression models.

use qfilter::harness::{run_stability, Experiment, Tolerances};
use qfilter::matops::{c64, pauli_x, real_diagonal, sigma_minus, zeros};
use qfilter::model::presets::{diagonal_counterexample, observable_qubit};
use qfilter::trajectories::SimulationGrid;
use qfilter::{DensityMatrix, Detection, QsdeModel};

fn suite() -> Vec<(&'static str, QsdeModel)> {
    vec![
        ("observable qubit", observable_qubit()),
        ("diagonal homodyne", diagonal_counterexample(2)),
        (
            "diagonal counting",
            QsdeModel::new(
                zeros(2),
                vec![real_diagonal(&[0.5, 1.0])],
                1.0,
                Detection::Counting,
            )
            .unwrap(),
        ),
        (
            "resonance fluorescence",
            QsdeModel::new(pauli_x(), vec![sigma_minus()], 0.8, Detection::Counting).unwrap(),
        ),
        (
            "inefficient diagonal homodyne",
            QsdeModel::new(
                zeros(3),
                vec![real_diagonal(&[0.0, 0.5, 1.0])],
                0.7,
                Detection::Homodyne,
            )
            .unwrap(),
        ),
    ]
}

fn experiment(model: QsdeModel, rho_true: DensityMatrix, n_paths: usize) -> Experiment {
    let p = model.dim();
    Experiment {
        observables: vec![("M".into(), model.measurement_observable())],
        model,
        rho_true,
        rho_filter: DensityMatrix::maximally_mixed(p),
        grid: SimulationGrid::new(2e-3, 5000)
            .unwrap()
            .with_stride(500)
            .unwrap(),
        n_paths,
        master_seed: 99,
        out_dir: std::env::temp_dir(),
        charfn_grids: vec![],
        tolerances: Tolerances::default(),
    }
}

/// A pure state whose measurement-observable expectation differs from the
/// maximally mixed one.
fn skewed_state(p: usize) -> DensityMatrix {
    let psi: Vec<_> = (0..p)
        .map(|k| c64(0.5f64.powi(k as i32), 0.1 * k as f64))
        .collect();
    DensityMatrix::pure(&psi).unwrap()
}

#[test]
fn measurement_observable_is_stable_across_suite() {
    for (name, model) in suite() {
        let p = model.dim();
        let report = run_stability(&experiment(model, skewed_state(p), 300)).unwrap();
        assert!(report.metadata.absolutely_continuous, "{name}");
        assert_eq!(report.metadata.aborted_paths, 0, "{name}");
        let m = report.series("M").unwrap();
        let (first, last) = (m[0], m[m.len() - 1]);
        assert!(first > 0.05, "{name}: initial difference {first}");
        assert!(last < 0.5 * first, "{name}: {first} -> {last}");
        assert!(m.iter().chain(&report.stderr[0]).all(|&v| v >= 0.0));
    }
}

#[test]
fn identical_filters_never_differ() {
    for (name, model) in suite() {
        let p = model.dim();
        let mut exp = experiment(model, DensityMatrix::maximally_mixed(p), 20);
        exp.grid = SimulationGrid::new(2e-3, 500)
            .unwrap()
            .with_stride(50)
            .unwrap();
        let report = run_stability(&exp).unwrap();
        assert!(report.mean_abs_diff[0].iter().all(|&v| v == 0.0), "{name}");
        assert!(report.trace_distance.iter().all(|&v| v == 0.0), "{name}");
    }
}

#[test]
fn reports_are_deterministic() {
    let (_, model) = suite().swap_remove(3);
    let mut exp = experiment(model, DensityMatrix::basis_state(2, 1), 70);
    exp.grid = SimulationGrid::new(2e-3, 800)
        .unwrap()
        .with_stride(80)
        .unwrap();
    let a = run_stability(&exp).unwrap();
    let b = run_stability(&exp).unwrap();
    assert_eq!(a, b);
    exp.master_seed += 1;
    assert_ne!(run_stability(&exp).unwrap().mean_abs_diff, a.mean_abs_diff);
}
