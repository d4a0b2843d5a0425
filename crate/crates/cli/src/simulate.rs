use std::path::Path;

use gcca_rec::simulator::{sweep, write_sweep_csv, write_trials_csv, SweepCell, SweepSettings};

use crate::config::RunConfig;
use crate::data::{create, finish, writeln_to};
use crate::error::{CliError, Result};

pub fn run(cfg: &RunConfig, out: &Path) -> Result<Vec<SweepCell>> {
    let sim = &cfg.simulate;
    let grid = sim.grid();
    if grid.is_empty() {
        return Err(CliError::usage(
            "empty simulation grid; pass --preset or give domains, sparsity and rows",
        ));
    }
    let settings = SweepSettings {
        reps: sim.reps,
        k: sim.k,
        latent_dim: sim.latent_dim,
        sigma: sim.sigma,
        seed: cfg.seed,
    };
    log::info!("simulating {} cells x {} reps", grid.cells().len(), sim.reps);
    let cells = sweep(&grid, &settings, &sim.gcca)?;
    write_sweep_csv(&cells, create(&out.join("sweep.csv"))?)?;
    write_trials_csv(&cells, create(&out.join("trials.csv"))?)?;

    let path = out.join("summary.txt");
    let mut w = create(&path)?;
    writeln_to(
        &mut w,
        &path,
        &format!("seed {}, {} reps per cell, missing-row mse (mean ± std)", cfg.seed, sim.reps),
    )?;
    for c in &cells {
        writeln_to(
            &mut w,
            &path,
            &format!(
                "n={} s={:.2} L={}: gcca {:.5} ± {:.5}, issm {:.5} ± {:.5}, improvement {:.1}%",
                c.domains,
                c.sparsity,
                c.rows,
                c.mse_missing_gcca.mean,
                c.mse_missing_gcca.std,
                c.mse_missing_issm.mean,
                c.mse_missing_issm.std,
                100.0 * c.improvement.mean
            ),
        )?;
    }
    finish(w, &path)?;
    Ok(cells)
}
