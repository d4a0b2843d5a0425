//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria that need the public datasets read them from the directory named
//! by `XDOMAIN_DATA_DIR` (layout documented in `gcca_rec::pipeline::DataDir`)
//! and fail when it is missing.

use std::collections::BTreeMap;
use std::time::Instant;

use gcca_rec::corpus::select_common_users;
use gcca_rec::gcca::*;
use gcca_rec::linalg::{gaussian_matrix, max_principal_angle, seeded_rng, symmetric_eigen_desc};
use gcca_rec::pipeline::*;
use gcca_rec::simulator::*;
use gcca_rec::Error;

const ROOT_SEED: u64 = 20_240_601;
const MIB: f64 = 1024.0 * 1024.0;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Worst diagnostics seen over every fit of the run.
#[derive(Default)]
struct Health {
    constraint: f64,
    residual: f64,
    fits: usize,
}

impl Health {
    fn record(&mut self, constraint: f64, residual: f64) {
        self.constraint = self.constraint.max(constraint);
        self.residual = self.residual.max(residual);
        self.fits += 1;
    }

    fn record_model(&mut self, m: &GccaModel) {
        self.record(m.constraint_error(), m.diagnostics.eigen_residual);
    }

    fn record_report(&mut self, r: &EvalReport) {
        for f in &r.fold_results {
            for &(c, e) in f.diagnostics.values() {
                self.record(c, e);
            }
        }
    }
}

fn sweep_artifact(cells: &[SweepCell], health: &mut Health) -> Vec<u8> {
    for c in cells {
        for t in &c.trials {
            // two fits per trial
            health.record(t.constraint_error, t.eigen_residual);
            health.fits += 1;
        }
    }
    let mut out = Vec::new();
    write_sweep_csv(cells, &mut out).unwrap();
    out
}

fn report_artifact(reports: &[EvalReport]) -> Vec<u8> {
    let mut out = Vec::new();
    write_reports_csv(reports, &mut out).unwrap();
    out
}

fn criterion_1(health: &mut Health) -> (Outcome, Vec<u8>) {
    let grid = SweepGrid {
        domains: vec![4],
        sparsity: vec![0.1, 0.2, 0.3, 0.4, 0.5],
        rows: vec![500],
    };
    let settings = SweepSettings {
        reps: 100,
        k: Some(10),
        latent_dim: 10,
        sigma: 0.1,
        seed: ROOT_SEED,
    };
    let cells = match sweep(&grid, &settings, &GccaOptions::default()) {
        Ok(c) => c,
        Err(e) => return (Outcome::new(false, format!("sweep failed: {e}")), Vec::new()),
    };
    let ratios: Vec<String> = cells
        .iter()
        .map(|c| format!("s={}: {:.3}", c.sparsity, c.improvement.mean))
        .collect();
    let pass = cells.iter().all(|c| c.improvement.mean >= 0.15);
    let artifact = sweep_artifact(&cells, health);
    (
        Outcome::new(pass, format!("mean improvement (>= 0.15) {}", ratios.join(", "))),
        artifact,
    )
}

fn criterion_2(health: &mut Health) -> (Outcome, Vec<u8>) {
    let grid = SweepGrid {
        domains: vec![2],
        sparsity: vec![0.4],
        rows: vec![500, 1000, 1500, 2000, 2500],
    };
    let settings = SweepSettings {
        reps: 50,
        k: Some(10),
        latent_dim: 10,
        sigma: 0.1,
        seed: ROOT_SEED,
    };
    let cells = match sweep(&grid, &settings, &GccaOptions::default()) {
        Ok(c) => c,
        Err(e) => return (Outcome::new(false, format!("sweep failed: {e}")), Vec::new()),
    };
    let detail: Vec<String> = cells
        .iter()
        .map(|c| {
            format!(
                "L={}: issm {:.4} vs gcca {:.4}",
                c.rows, c.mse_missing_issm.mean, c.mse_missing_gcca.mean
            )
        })
        .collect();
    let pass = cells
        .iter()
        .all(|c| c.mse_missing_issm.mean < c.mse_missing_gcca.mean);
    let artifact = sweep_artifact(&cells, health);
    (Outcome::new(pass, detail.join(", ")), artifact)
}

fn criterion_3(health: &mut Health) -> (Outcome, Vec<u8>) {
    let mut worst = 0.0f64;
    let mut artifact = String::new();
    for pair in 0..20u64 {
        let mut rng = seeded_rng(ROOT_SEED ^ (0x300 + pair));
        let x = gaussian_matrix(200, 10, &mut rng);
        let y = gaussian_matrix(200, 8, &mut rng);
        let views = [
            ViewMatrix::complete("x", x.as_ref()).unwrap(),
            ViewMatrix::complete("y", y.as_ref()).unwrap(),
        ];
        let m = sum_of_projections(&views, Some(0.0)).unwrap();
        let (vals, _) = symmetric_eigen_desc(m.as_ref()).unwrap();
        let rho = fit_cca(x.as_ref(), y.as_ref(), 0.0).unwrap().rho;
        let mut want: Vec<f64> = rho.iter().flat_map(|r| [1.0 + r, 1.0 - r]).collect();
        want.extend([1.0, 1.0]);
        want.sort_by(|a, b| b.total_cmp(a));
        for (g, w) in vals.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
        artifact.push_str(&format!("{pair},{:?}\n", rho));
        for variant in [Variant::Standard, Variant::Issm] {
            health.record_model(&fit(&views, 5, variant, &GccaOptions::default()).unwrap());
        }
    }
    (
        Outcome::new(worst <= 1e-6, format!("20 pairs, max |λ − (1 ± ρ)| = {worst:.2e} (<= 1e-6)")),
        artifact.into_bytes(),
    )
}

fn criterion_4(health: &mut Health) -> (Outcome, Vec<u8>) {
    let mut worst = 0.0f64;
    let mut artifact = String::new();
    for instance in 0..10u64 {
        let cfg = SimConfig {
            rows: 150,
            latent_dim: 6,
            domains: 3,
            sparsity: 0.3,
            sigma: 0.1,
            seed: ROOT_SEED ^ (0x400 + instance),
        };
        let data = generate_synthetic(&cfg).unwrap();
        let opts = GccaOptions {
            fast: FastConfig {
                m: 6,
                r: 1e-12,
                ..FastConfig::default()
            },
            ..GccaOptions::default()
        };
        let exact = fit(&data.views, 6, Variant::Issm, &opts).unwrap();
        let fast = fit(&data.views, 6, Variant::FastIssm, &opts).unwrap();
        health.record_model(&exact);
        health.record_model(&fast);
        let angle = max_principal_angle(exact.g.as_ref(), fast.g.as_ref()).unwrap();
        worst = worst.max(angle);
        artifact.push_str(&format!("{instance},{angle:e}\n"));
    }
    (
        Outcome::new(worst < 1e-5, format!("10 instances, max principal angle {worst:.2e} (< 1e-5)")),
        artifact.into_bytes(),
    )
}

fn data_dir() -> Option<DataDir> {
    std::env::var_os("XDOMAIN_DATA_DIR").map(DataDir::new)
}

fn missing(what: &str) -> Outcome {
    Outcome::new(
        false,
        format!("not run: {what} not found (set XDOMAIN_DATA_DIR to the dataset directory)"),
    )
}

fn pipeline_cfg(target: &str, auxiliaries: &[&str]) -> PipelineConfig {
    PipelineConfig {
        target: target.into(),
        auxiliaries: auxiliaries.iter().map(|s| s.to_string()).collect(),
        seed: ROOT_SEED,
        ..PipelineConfig::default()
    }
}

fn movielens() -> Option<BTreeMap<String, gcca_rec::corpus::RatingsMatrix>> {
    let dir = data_dir()?;
    if !dir.has_movielens() {
        return None;
    }
    let genres: Vec<String> = MOVIELENS_DOMAINS.iter().map(|s| s.to_string()).collect();
    Some(dir.movielens(&genres).expect("movielens ingest"))
}

fn run_pair(
    matrices: &BTreeMap<String, gcca_rec::corpus::RatingsMatrix>,
    cfg: &PipelineConfig,
    plan: &EvalPlan,
    c: usize,
) -> gcca_rec::Result<EvalReport> {
    let data = CrossDomainData::new(matrices, &cfg.target, &cfg.auxiliaries)?;
    evaluate_cold_start(&data, cfg, plan, c, &[])
}

fn criterion_6(health: &mut Health) -> (Outcome, Vec<u8>) {
    let Some(ml) = movielens() else {
        return (missing("MovieLens-1M"), Vec::new());
    };
    let cfg = pipeline_cfg("Action", &["Drama"]);
    let report = match run_pair(&ml, &cfg, &EvalPlan::default(), 0) {
        Ok(r) => r,
        Err(e) => return (Outcome::new(false, format!("run failed: {e}")), Vec::new()),
    };
    health.record_report(&report);
    let issm = report.summary.iter().find(|s| s.method == "mf_gcca_issm").unwrap();
    let per_fold = report
        .fold_results
        .iter()
        .all(|f| f.methods["issm"] <= f.methods["standard"]);
    let pass = issm.improvement_over_offset >= 0.20 && per_fold;
    (
        Outcome::new(
            pass,
            format!(
                "offset {:.4}, issm {:.4}, improvement {:.2}% (>= 20%), issm <= standard on every fold: {per_fold}",
                report.mean_mse("offset").unwrap(),
                issm.mean_mse,
                100.0 * issm.improvement_over_offset
            ),
        ),
        report_artifact(&[report]),
    )
}

fn criterion_7(health: &mut Health) -> (Outcome, Vec<u8>) {
    let Some(ml) = movielens() else {
        return (missing("MovieLens-1M"), Vec::new());
    };
    let plan = EvalPlan {
        variants: vec![Variant::Issm],
        ..EvalPlan::default()
    };
    let mut reports = Vec::new();
    for aux in [&["Comedy"][..], &["Drama"], &["Thriller"], &["Comedy", "Drama", "Thriller"]] {
        match run_pair(&ml, &pipeline_cfg("Action", aux), &plan, 5) {
            Ok(r) => {
                health.record_report(&r);
                reports.push(r);
            }
            Err(e) => return (Outcome::new(false, format!("run {aux:?} failed: {e}")), Vec::new()),
        }
    }
    let mse = |r: &EvalReport| r.mean_mse("mf_gcca_issm").unwrap();
    let best_single = reports[..3].iter().map(mse).fold(f64::INFINITY, f64::min);
    let all = mse(&reports[3]);
    (
        Outcome::new(
            all <= best_single + 0.02,
            format!("all three {all:.4} vs best single {best_single:.4} (+0.02 slack)"),
        ),
        report_artifact(&reports),
    )
}

fn criterion_8(health: &mut Health) -> (Outcome, Vec<u8>) {
    let Some(ml) = movielens() else {
        return (missing("MovieLens-1M"), Vec::new());
    };
    let cfg = pipeline_cfg("Action", &["Drama"]);
    let plan = EvalPlan {
        variants: vec![Variant::Issm],
        ..EvalPlan::default()
    };
    let data = match CrossDomainData::new(&ml, &cfg.target, &cfg.auxiliaries) {
        Ok(d) => d,
        Err(e) => return (Outcome::new(false, format!("{e}")), Vec::new()),
    };
    let reports = match sweep_cold_start(&data, &cfg, &plan, &[0, 5, 10, 15, 20, 25], &[]) {
        Ok(r) => r,
        Err(e) => return (Outcome::new(false, format!("sweep failed: {e}")), Vec::new()),
    };
    let gaps: Vec<f64> = reports
        .iter()
        .map(|r| {
            health.record_report(r);
            r.mean_mse("mf").unwrap() - r.mean_mse("mf_gcca_issm").unwrap()
        })
        .collect();
    let pass = gaps[0] > gaps[5] && gaps.iter().all(|&g| g >= 0.0);
    let detail: Vec<String> = reports.iter().zip(&gaps).map(|(r, g)| format!("c={}: {g:.4}", r.c)).collect();
    (
        Outcome::new(pass, format!("mf − issm gaps {}", detail.join(", "))),
        report_artifact(&reports),
    )
}

fn criterion_9(health: &mut Health) -> (Outcome, Vec<u8>) {
    let cats = ["Digital Music", "CD"];
    let Some(dir) = data_dir().filter(|d| d.has_amazon(&cats)) else {
        return (missing("Amazon Digital Music and CD review files"), Vec::new());
    };
    let ingest = dir.amazon(&cats.map(String::from)).expect("amazon ingest");
    let cfg = pipeline_cfg("Digital Music", &["CD"]);
    let plan = EvalPlan {
        variants: vec![Variant::Issm],
        ..EvalPlan::default()
    };
    let report = match run_pair(&ingest.matrices, &cfg, &plan, 0) {
        Ok(r) => r,
        Err(e) => return (Outcome::new(false, format!("run failed: {e}")), Vec::new()),
    };
    health.record_report(&report);
    let issm = report.summary.iter().find(|s| s.method == "mf_gcca_issm").unwrap();
    (
        Outcome::new(
            issm.improvement_over_offset >= 0.05,
            format!("improvement over offset {:.2}% (>= 5%)", 100.0 * issm.improvement_over_offset),
        ),
        report_artifact(&[report]),
    )
}

fn criterion_10(health: &mut Health) -> (Outcome, Vec<u8>) {
    let arithmetic = format!(
        "exact M at L=43057 needs {:.0} MiB",
        exact_memory_bytes(43_057) as f64 / MIB
    );
    let cats = ["Books", "Kindle"];
    let Some(dir) = data_dir().filter(|d| d.has_amazon(&cats)) else {
        let mut o = missing("Amazon Books and Kindle review files");
        o.detail = format!("{}; {arithmetic}", o.detail);
        return (o, Vec::new());
    };
    let ingest = dir.amazon(&cats.map(String::from)).expect("amazon ingest");
    let names = cats.map(String::from);
    let plan = |v: Variant| EvalPlan {
        variants: vec![v],
        ..EvalPlan::default()
    };
    let budget = |mib: u64| {
        let mut cfg = pipeline_cfg("Kindle", &["Books"]);
        cfg.gcca.memory_budget_mib = mib;
        cfg
    };

    let min10 = select_common_users(&ingest.matrices, &names, 10).expect("min-10 selection");
    let users = min10["Kindle"].n_users();
    let refused = matches!(
        run_pair(&min10, &budget(1024), &plan(Variant::Issm), 0),
        Err(Error::Iteration { ref source, .. }) if matches!(**source, Error::MemoryBudget { .. })
    );
    let fast10 = run_pair(&min10, &budget(1024), &plan(Variant::FastIssm), 0);
    let fast_ok = fast10.is_ok();
    if let Ok(r) = &fast10 {
        health.record_report(r);
    }

    let min30 = select_common_users(&ingest.matrices, &names, 30).expect("min-30 selection");
    let exact30 = run_pair(&min30, &budget(1 << 16), &plan(Variant::Issm), 0);
    let fast30 = run_pair(&min30, &budget(1024), &plan(Variant::FastIssm), 0);
    let (rel, mut reports) = match (exact30, fast30) {
        (Ok(e), Ok(f)) => {
            health.record_report(&e);
            health.record_report(&f);
            let (me, mf) = (e.mean_mse("mf_gcca_issm").unwrap(), f.mean_mse("mf_gcca_fast_issm").unwrap());
            (((mf - me) / me).abs(), vec![e, f])
        }
        (e, f) => {
            let why = e.err().or(f.err()).map(|x| x.to_string()).unwrap_or_default();
            return (Outcome::new(false, format!("min-30 comparison failed: {why}")), Vec::new());
        }
    };
    if let Ok(r) = fast10 {
        reports.push(r);
    }
    let pass = refused && fast_ok && rel <= 0.05;
    (
        Outcome::new(
            pass,
            format!(
                "min-10 users {users}; {arithmetic}; exact refused: {refused}; fast ok: {fast_ok}; min-30 |fast − exact|/exact = {:.2}% (<= 5%)",
                100.0 * rel
            ),
        ),
        report_artifact(&reports),
    )
}

type Criterion = fn(&mut Health) -> (Outcome, Vec<u8>);

fn main() {
    let criteria: [(u32, &str, Criterion); 9] = [
        (1, "simulation sparsity sweep", criterion_1),
        (2, "simulation row-count sweep", criterion_2),
        (3, "two-view identity", criterion_3),
        (4, "fast/exact equivalence", criterion_4),
        (6, "movielens action<-drama", criterion_6),
        (7, "movielens multi-auxiliary", criterion_7),
        (8, "cold-start sweep shape", criterion_8),
        (9, "amazon digital music<-cd", criterion_9),
        (10, "fast-variant memory", criterion_10),
    ];
    let mut health = Health::default();
    let mut lines = Vec::new();
    let mut artifacts = Vec::new();
    for (id, name, run) in criteria {
        let t = Instant::now();
        let (outcome, artifact) = run(&mut health);
        let secs = t.elapsed().as_secs_f64();
        lines.push((id, name, outcome, secs));
        artifacts.push((id, name, run, artifact));
    }

    let health_ok = health.constraint <= 1e-6 && health.residual <= 1e-8;
    lines.push((
        5,
        "constraint suites",
        Outcome::new(
            health_ok,
            format!(
                "{} fits, worst constraint {:.2e} (<= 1e-6), worst eigen residual {:.2e} (<= 1e-8)",
                health.fits, health.constraint, health.residual
            ),
        ),
        0.0,
    ));

    let t = Instant::now();
    let mut rerun = Vec::new();
    let mut identical = true;
    for (id, _, run, first) in &artifacts {
        if first.is_empty() {
            continue;
        }
        let (_, again) = run(&mut Health::default());
        identical &= &again == first;
        rerun.push(id.to_string());
    }
    lines.push((
        11,
        "determinism",
        Outcome::new(
            identical && !rerun.is_empty(),
            format!("re-ran criteria {} with the same seed: byte-identical {identical}", rerun.join(",")),
        ),
        t.elapsed().as_secs_f64(),
    ));

    lines.sort_by_key(|l| l.0);
    let mut failed = 0;
    for (id, name, outcome, secs) in &lines {
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!outcome.pass);
        println!("criterion {id:>2} [{tag}] {name}: {} ({secs:.1}s)", outcome.detail);
    }
    println!("acceptance: {} passed, {failed} failed", lines.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
