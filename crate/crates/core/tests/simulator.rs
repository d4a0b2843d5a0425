use gcca_rec::gcca::GccaOptions;
use gcca_rec::simulator::*;

fn small_grid() -> SweepGrid {
    SweepGrid {
        domains: vec![3],
        sparsity: vec![0.2, 0.4],
        rows: vec![80],
    }
}

fn small_settings() -> SweepSettings {
    SweepSettings {
        reps: 6,
        latent_dim: 4,
        seed: 17,
        ..SweepSettings::default()
    }
}

#[test]
fn table_means_match_per_trial_dump() {
    let cells = sweep(&small_grid(), &small_settings(), &GccaOptions::default()).unwrap();
    let mut dump = Vec::new();
    write_trials_csv(&cells, &mut dump).unwrap();
    let mut reader = csv::Reader::from_reader(dump.as_slice());
    let rows: Vec<Vec<String>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    for cell in &cells {
        let s = cell.sparsity.to_string();
        let mine: Vec<&Vec<String>> = rows.iter().filter(|r| r[1] == s).collect();
        assert_eq!(mine.len(), cell.reps);
        let mean = |col: usize| {
            let v: Vec<f64> = mine.iter().map(|r| r[col].parse::<f64>().unwrap()).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!((mean(4) - cell.mse_all_gcca.mean).abs() < 1e-12);
        assert!((mean(5) - cell.mse_all_issm.mean).abs() < 1e-12);
        assert!((mean(6) - cell.mse_missing_gcca.mean).abs() < 1e-12);
        assert!((mean(7) - cell.mse_missing_issm.mean).abs() < 1e-12);
        assert!((mean(8) - cell.improvement.mean).abs() < 1e-12);
    }
}

#[test]
fn sweep_csv_is_reproducible() {
    let run = || {
        let cells = sweep(&small_grid(), &small_settings(), &GccaOptions::default()).unwrap();
        let mut out = Vec::new();
        write_sweep_csv(&cells, &mut out).unwrap();
        out
    };
    let a = run();
    assert_eq!(a, run());
    let header = String::from_utf8(a).unwrap();
    assert!(header.starts_with(&SWEEP_CSV_HEADER.join(",")));
}

#[test]
fn presets_cover_the_documented_grids() {
    let s = SweepGrid::sparsity_preset();
    assert_eq!(s.domains, vec![4, 8]);
    assert!(s.sparsity.contains(&0.05) && s.sparsity.contains(&0.5));
    let r = SweepGrid::rows_preset();
    assert_eq!(r.rows, vec![500, 1000, 1500, 2000, 2500]);
    assert_eq!(r.sparsity, vec![0.4]);
}

#[test]
fn empty_grid_is_rejected() {
    let grid = SweepGrid {
        domains: vec![],
        ..small_grid()
    };
    assert!(sweep(&grid, &small_settings(), &GccaOptions::default()).is_err());
}

#[test]
fn planted_ratings_are_deterministic_and_bounded() {
    let cfg = PlantedRatingsConfig::default();
    let a = generate_planted_ratings(&cfg).unwrap();
    assert_eq!(a, generate_planted_ratings(&cfg).unwrap());
    for m in a.values() {
        assert!(m.entries().iter().all(|e| (1.0..=5.0).contains(&e.value)));
    }
}
