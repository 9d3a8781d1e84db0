//! synth → sample → fit → invert → evaluate, on disk and in memory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nntt::container::{
    dense_to_text, distribution_to_text, load_dense, load_distribution, load_tt, mpo_to_text,
    save_text, tt_to_text,
};
use nntt::fit::FitOutcome;
use nntt::metrics::{classical_fidelity, quantum_fidelity};
use nntt::reconstruct::{diagnose, normalize_tt, tt_to_mpo};
use nntt::rng::{TEST_STREAM, TRAIN_STREAM};
use nntt::sampling::{load_samples, sample_stream, save_samples, SampleSet};
use nntt::states::{density_to_mpo, exact_outcome_distribution, target_density, MAX_DENSE_SITES};
use nntt::{DenseDensity, DenseDistribution, Povm, TtDistribution, XxzParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{at_path, io, CliError};

pub const RHO_FILE: &str = "rho.txt";
pub const MPO_FILE: &str = "rho_mpo.txt";
pub const DIST_FILE: &str = "distribution.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAIN_FILE: &str = "train.txt";
pub const TEST_FILE: &str = "test.txt";
pub const LOSS_FILE: &str = "loss.csv";
pub const TT_FILE: &str = "tt.txt";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.json";
pub const SCAN_FILE: &str = "scan.csv";
pub const MIN_N_FILE: &str = "min_n.csv";

/// Squared Frobenius truncation budget when factorizing the target.
const MPO_TOL: f64 = 1e-20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub sites: usize,
    pub coupling: f64,
    pub anisotropy: f64,
    pub field: f64,
    pub noise: f64,
}

impl From<&XxzParams<f64>> for ModelParams {
    fn from(p: &XxzParams<f64>) -> Self {
        Self { sites: p.sites, coupling: p.coupling, anisotropy: p.anisotropy, field: p.field, noise: p.noise }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sites: usize,
    pub d: usize,
    pub trace: f64,
    pub params: ModelParams,
    pub param_hash: String,
    pub distribution_sha256: String,
    pub mpo_bond_dims: Vec<usize>,
}

pub struct Snapshot {
    pub manifest: Manifest,
    pub rho: DenseDensity<f64>,
    pub distribution: DenseDistribution<f64>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn param_hash(p: &ModelParams) -> String {
    sha256_hex(serde_json::to_string(p).expect("plain struct").as_bytes())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    io(dir, fs::create_dir_all(dir))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    at_path(path, save_text(path, text))
}

fn to_json<S: Serialize>(v: &S) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D, CliError> {
    let text = io(path, fs::read_to_string(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn synthesize(cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest, CliError> {
    let params = cfg.xxz()?;
    if params.sites > MAX_DENSE_SITES {
        return Err(nntt::Error::Capacity(format!(
            "dense snapshots are limited to {MAX_DENSE_SITES} sites, requested {}; use --sites {MAX_DENSE_SITES} or fewer",
            params.sites
        ))
        .into());
    }
    let rho = target_density(&params)?;
    let mpo = density_to_mpo(&rho, MPO_TOL)?;
    let dist = exact_outcome_distribution(&rho, &Povm::tetrahedral())?;
    let dist_text = distribution_to_text(&dist);
    let model = ModelParams::from(&params);
    let manifest = Manifest {
        sites: params.sites,
        d: rho.dim(),
        trace: rho.trace().re,
        param_hash: param_hash(&model),
        params: model,
        distribution_sha256: sha256_hex(dist_text.as_bytes()),
        mpo_bond_dims: mpo.bond_dims(),
    };
    create_dir(dir)?;
    write(&dir.join(RHO_FILE), &dense_to_text(&rho))?;
    write(&dir.join(MPO_FILE), &mpo_to_text(&mpo))?;
    write(&dir.join(DIST_FILE), &dist_text)?;
    write(&dir.join(MANIFEST_FILE), &to_json(&manifest))?;
    Ok(manifest)
}

/// Loads a snapshot and checks the distribution against its recorded digest.
pub fn read_snapshot(dir: &Path) -> Result<Snapshot, CliError> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    let dist_path = dir.join(DIST_FILE);
    let dist_text = io(&dist_path, fs::read_to_string(&dist_path))?;
    if sha256_hex(dist_text.as_bytes()) != manifest.distribution_sha256 {
        return Err(nntt::Error::Integrity(format!("{} does not match its manifest digest", dist_path.display())).into());
    }
    let distribution = at_path(&dist_path, load_distribution(&dist_path))?;
    let rho_path = dir.join(RHO_FILE);
    let rho = at_path(&rho_path, load_dense(&rho_path))?;
    if distribution.sites() != manifest.sites || rho.sites() != manifest.sites {
        return Err(CliError::Invalid(format!("snapshot files in {} disagree on the site count", dir.display())));
    }
    Ok(Snapshot { manifest, rho, distribution })
}

pub fn draw(dist: &DenseDistribution<f64>, train: u64, test: u64, seed: u64) -> Result<(SampleSet, SampleSet), CliError> {
    Ok((sample_stream(dist, train, seed, TRAIN_STREAM)?, sample_stream(dist, test, seed, TEST_STREAM)?))
}

pub fn write_samples(dir: &Path, train: &SampleSet, test: &SampleSet) -> Result<(), CliError> {
    create_dir(dir)?;
    for (name, set) in [(TRAIN_FILE, train), (TEST_FILE, test)] {
        let path = dir.join(name);
        at_path(&path, save_samples(set, &path))?;
    }
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<SampleSet, CliError> {
    at_path(path, load_samples(path))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub final_loss: f64,
    pub sweeps: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub trials: usize,
    pub best_trial: Option<usize>,
    pub best_seed: Option<u64>,
    pub best_loss: Option<f64>,
    /// Final losses of all trials, ascending.
    pub final_losses_sorted: Vec<f64>,
    pub per_trial: Vec<TrialSummary>,
    pub degenerate: bool,
    pub degenerate_reason: Option<String>,
    pub runtime_s: Option<f64>,
}

pub struct FitRun {
    pub outcome: Option<FitOutcome<f64>>,
    /// Best trial scaled to unit mass; `None` when degenerate.
    pub best: Option<TtDistribution<f64>>,
    pub summary: FitSummary,
}

/// Runs all trials. A degenerate fit is not an error here; it is flagged in
/// the summary so that it can be written out before exiting.
pub fn run_fit(train: &SampleSet, cfg: &ExperimentConfig) -> Result<FitRun, CliError> {
    let start = Instant::now();
    let fit_cfg = cfg.fit_config();
    let runtime = |s: &Instant| cfg.record_timing.then(|| s.elapsed().as_secs_f64());
    let outcome = match nntt::fit(train, &fit_cfg) {
        Ok(o) => o,
        Err(nntt::Error::DegenerateFit(msg)) => {
            let summary = FitSummary {
                trials: fit_cfg.trials,
                best_trial: None,
                best_seed: None,
                best_loss: None,
                final_losses_sorted: Vec::new(),
                per_trial: Vec::new(),
                degenerate: true,
                degenerate_reason: Some(msg),
                runtime_s: runtime(&start),
            };
            return Ok(FitRun { outcome: None, best: None, summary });
        }
        Err(e) => return Err(e.into()),
    };
    let per_trial: Vec<TrialSummary> = outcome
        .trials
        .iter()
        .map(|t| TrialSummary {
            trial: t.trial,
            seed: t.seed,
            final_loss: t.final_loss(),
            sweeps: t.sweeps(),
            converged: t.converged,
        })
        .collect();
    let mut sorted = outcome.final_losses();
    sorted.sort_by(f64::total_cmp);
    let best = outcome.best();
    let (normalized, reason) = match normalize_tt(&best.tt) {
        Ok(tt) => (Some(tt), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = FitSummary {
        trials: outcome.trials.len(),
        best_trial: Some(best.trial),
        best_seed: Some(best.seed),
        best_loss: Some(best.final_loss()),
        final_losses_sorted: sorted,
        per_trial,
        degenerate: reason.is_some(),
        degenerate_reason: reason,
        runtime_s: runtime(&start),
    };
    Ok(FitRun { outcome: Some(outcome), best: normalized, summary })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_fit(dir: &Path, run: &FitRun, record_timing: bool) -> Result<(), CliError> {
    create_dir(dir)?;
    let loss_path = dir.join(LOSS_FILE);
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", loss_path.display()));
    w.write_record(["trial", "sweep", "loss", "wall_time_s"]).map_err(csv_err)?;
    if let Some(outcome) = &run.outcome {
        for t in &outcome.trials {
            for s in &t.trace {
                let time = record_timing.then_some(s.elapsed_s);
                w.write_record([t.trial.to_string(), s.sweep.to_string(), s.loss.to_string(), fmt_opt(time)])
                    .map_err(csv_err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    io(&loss_path, fs::write(&loss_path, bytes))?;
    if let Some(tt) = &run.best {
        write(&dir.join(TT_FILE), &tt_to_text(tt))?;
    }
    write(&dir.join(SUMMARY_FILE), &to_json(&run.summary))
}

pub fn read_tt(path: &Path) -> Result<TtDistribution<f64>, CliError> {
    at_path(path, load_tt(path))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub sites: usize,
    pub bond_profile: Vec<usize>,
    pub i_q: Option<f64>,
    pub f_q: Option<f64>,
    /// Negative spectral mass clipped inside the quantum fidelity.
    pub q_clipped_mass: Option<f64>,
    /// Why the quantum fidelity was not computed.
    pub f_q_omitted: Option<String>,
    pub i_c: f64,
    pub f_c: f64,
    pub i_c_std_error: Option<f64>,
    pub c_clipped_mass: f64,
    pub trace_deviation: Option<f64>,
    pub hermiticity_residual: Option<f64>,
    pub min_eigenvalue: Option<f64>,
    pub test_samples: u64,
    pub runtime_s: Option<f64>,
}

/// Compares a fitted TT with the target. `target` may be `None` when only
/// the outcome distribution is known.
pub fn evaluate(
    tt: &TtDistribution<f64>,
    target: Option<&DenseDensity<f64>>,
    ideal: &DenseDistribution<f64>,
    test: &SampleSet,
    record_timing: bool,
) -> Result<Report, CliError> {
    let start = Instant::now();
    let l = tt.sites();
    if ideal.sites() != l || test.sites() != l || target.is_some_and(|r| r.sites() != l) {
        return Err(CliError::Invalid(format!(
            "site counts differ: tt {l}, distribution {}, test {}{}",
            ideal.sites(),
            test.sites(),
            target.map(|r| format!(", target {}", r.sites())).unwrap_or_default()
        )));
    }
    let tt = normalize_tt(tt)?;
    let classical = classical_fidelity(&tt, ideal, test)?;
    let mut report = Report {
        sites: l,
        bond_profile: tt.bond_dims(),
        i_q: None,
        f_q: None,
        q_clipped_mass: None,
        f_q_omitted: None,
        i_c: classical.infidelity,
        f_c: classical.fidelity,
        i_c_std_error: classical.std_error,
        c_clipped_mass: classical.clipped_mass,
        trace_deviation: None,
        hermiticity_residual: None,
        min_eigenvalue: None,
        test_samples: test.total(),
        runtime_s: None,
    };
    match target {
        _ if l > MAX_DENSE_SITES => {
            report.f_q_omitted = Some(format!("dense density matrices are limited to {MAX_DENSE_SITES} sites, chain has {l}"));
        }
        None => report.f_q_omitted = Some("no target density matrix".into()),
        Some(rho) => {
            let rec = tt_to_mpo(&tt, &Povm::tetrahedral())?.to_dense()?;
            let diag = diagnose(&rec, tt.bond_dims());
            let q = quantum_fidelity(rho, &rec)?;
            report.i_q = Some(q.infidelity);
            report.f_q = Some(q.fidelity);
            report.q_clipped_mass = Some(q.clipped_mass);
            report.trace_deviation = Some(diag.trace_deviation);
            report.hermiticity_residual = Some(diag.hermiticity_residual);
            report.min_eigenvalue = diag.min_eigenvalue;
        }
    }
    report.runtime_s = record_timing.then(|| start.elapsed().as_secs_f64());
    Ok(report)
}

pub fn write_report(path: &Path, report: &Report) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write(path, &to_json(report))
}

pub fn read_report(path: &Path) -> Result<Report, CliError> {
    read_json(path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub sites: usize,
    pub noise: f64,
    pub anisotropy: f64,
    pub bond_dim: usize,
    pub samples: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub index: usize,
    pub point: GridPoint,
    pub error: Option<String>,
    pub best_loss: Option<f64>,
    pub report: Option<Report>,
}

/// Full in-memory pipeline for one grid point.
pub fn run_point(base: &ExperimentConfig, p: &GridPoint) -> Result<(Report, f64), CliError> {
    let cfg = ExperimentConfig {
        sites: p.sites,
        noise: p.noise,
        anisotropy: p.anisotropy,
        bond_dim: p.bond_dim,
        train: p.samples,
        seed: p.seed,
        ..base.clone()
    };
    cfg.validate()?;
    let rho = target_density(&cfg.xxz()?)?;
    let ideal = exact_outcome_distribution(&rho, &Povm::tetrahedral())?;
    let (train, test) = draw(&ideal, cfg.train, cfg.test, cfg.seed)?;
    let run = run_fit(&train, &cfg)?;
    let Some(tt) = run.best else {
        return Err(CliError::Degenerate(run.summary.degenerate_reason.unwrap_or_default()));
    };
    let report = evaluate(&tt, Some(&rho), &ideal, &test, cfg.record_timing)?;
    Ok((report, run.summary.best_loss.unwrap_or(f64::NAN)))
}

pub fn grid(cfg: &ExperimentConfig) -> Result<Vec<GridPoint>, CliError> {
    let a = cfg.axes()?;
    let mut out = Vec::new();
    for &sites in &a.sites {
        for &noise in &a.noise {
            for &anisotropy in &a.anisotropy {
                for &bond_dim in &a.bond_dim {
                    for &samples in &a.samples {
                        for &seed in &a.seeds {
                            out.push(GridPoint { sites, noise, anisotropy, bond_dim, samples, seed });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn point_dir(out: &Path) -> PathBuf {
    out.join("points")
}

/// Runs every grid point in parallel, writes one JSON result per point and
/// aggregates them into `scan.csv`. Failing points are recorded, not fatal.
pub fn scan(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PointResult>, CliError> {
    use rayon::prelude::*;
    let points = grid(cfg)?;
    let dir = point_dir(out);
    create_dir(&dir)?;
    let results: Vec<PointResult> = points
        .into_par_iter()
        .enumerate()
        .map(|(index, point)| {
            let r = run_point(cfg, &point);
            let (report, best_loss, error) = match r {
                Ok((rep, loss)) => (Some(rep), Some(loss), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            PointResult { index, point, error, best_loss, report }
        })
        .collect();
    for r in &results {
        write(&dir.join(format!("{:04}.json", r.index)), &to_json(r))?;
    }
    let rows = read_points(&dir)?;
    write_scan_csv(&out.join(SCAN_FILE), &rows)?;
    Ok(rows)
}

/// Reads back the per-point results written by [`scan`], in index order.
pub fn read_points(dir: &Path) -> Result<Vec<PointResult>, CliError> {
    let mut paths: Vec<PathBuf> = io(dir, fs::read_dir(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut rows: Vec<PointResult> = paths.iter().map(|p| read_json(p)).collect::<Result<_, _>>()?;
    rows.sort_by_key(|r| r.index);
    Ok(rows)
}

pub const SCAN_COLUMNS: [&str; 22] = [
    "index", "sites", "noise", "anisotropy", "bond_dim", "samples", "seed", "status", "error",
    "best_loss", "i_q", "f_q", "q_clipped_mass", "i_c", "f_c", "i_c_std_error", "c_clipped_mass",
    "trace_deviation", "hermiticity_residual", "min_eigenvalue", "bond_profile", "runtime_s",
];

fn write_scan_csv(path: &Path, rows: &[PointResult]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(SCAN_COLUMNS).map_err(err)?;
    for r in rows {
        let p = &r.point;
        let rep = r.report.as_ref();
        let f = |g: fn(&Report) -> Option<f64>| fmt_opt(rep.and_then(g));
        w.write_record([
            r.index.to_string(),
            p.sites.to_string(),
            p.noise.to_string(),
            p.anisotropy.to_string(),
            p.bond_dim.to_string(),
            p.samples.to_string(),
            p.seed.to_string(),
            if r.error.is_some() { "error".into() } else { "ok".into() },
            r.error.clone().unwrap_or_default(),
            fmt_opt(r.best_loss),
            f(|x| x.i_q),
            f(|x| x.f_q),
            f(|x| x.q_clipped_mass),
            f(|x| Some(x.i_c)),
            f(|x| Some(x.f_c)),
            f(|x| x.i_c_std_error),
            f(|x| Some(x.c_clipped_mass)),
            f(|x| x.trace_deviation),
            f(|x| x.hermiticity_residual),
            f(|x| x.min_eigenvalue),
            rep.map(|x| x.bond_profile.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")).unwrap_or_default(),
            f(|x| x.runtime_s),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    io(path, fs::write(path, bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinNRow {
    pub sites: usize,
    pub noise: f64,
    pub anisotropy: f64,
    pub bond_dim: usize,
    pub seed: u64,
    /// Smallest tried sample count with `I_c ≤ ic_target`.
    pub min_samples: Option<u64>,
    pub i_c: Option<f64>,
    pub attempts: usize,
    pub error: Option<String>,
}

/// Doubling search over the training-set size, starting from the smallest
/// value of the samples axis, for every other combination of the axes.
pub fn min_n_search(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<MinNRow>, CliError> {
    use rayon::prelude::*;
    let start = *cfg.axes()?.samples.iter().min().expect("axes are nonempty");
    if start == 0 {
        return Err(CliError::Invalid("sample counts must be positive".into()));
    }
    let mut groups = grid(&ExperimentConfig { scan_samples: Some(vec![start]), ..cfg.clone() })?;
    groups.dedup();
    let rows: Vec<MinNRow> = groups
        .into_par_iter()
        .map(|g| {
            let mut row = MinNRow {
                sites: g.sites,
                noise: g.noise,
                anisotropy: g.anisotropy,
                bond_dim: g.bond_dim,
                seed: g.seed,
                min_samples: None,
                i_c: None,
                attempts: 0,
                error: None,
            };
            let mut n = start;
            while n <= cfg.max_samples {
                row.attempts += 1;
                match run_point(cfg, &GridPoint { samples: n, ..g.clone() }) {
                    Ok((rep, _)) => {
                        row.i_c = Some(rep.i_c);
                        if rep.i_c <= cfg.ic_target {
                            row.min_samples = Some(n);
                            break;
                        }
                    }
                    Err(e) => {
                        row.error = Some(e.to_string());
                        break;
                    }
                }
                n = match n.checked_mul(2) {
                    Some(m) => m,
                    None => break,
                };
            }
            row
        })
        .collect();
    create_dir(out)?;
    let path = out.join(MIN_N_FILE);
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(["sites", "noise", "anisotropy", "bond_dim", "seed", "min_samples", "i_c", "attempts", "error"])
        .map_err(err)?;
    for r in &rows {
        w.write_record([
            r.sites.to_string(),
            r.noise.to_string(),
            r.anisotropy.to_string(),
            r.bond_dim.to_string(),
            r.seed.to_string(),
            r.min_samples.map(|n| n.to_string()).unwrap_or_default(),
            fmt_opt(r.i_c),
            r.attempts.to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    io(&path, fs::write(&path, bytes))?;
    Ok(rows)
}
