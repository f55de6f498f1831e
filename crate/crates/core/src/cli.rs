//! `ganduf` command line: config resolution and subcommand dispatch.
//!
//! Precedence for every knob is flag > config file > default. The seed has one
//! extra layer: an explicit `--seed` or config value wins, then `GANDUF_SEED`,
//! then the section default.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::datasets::{
    archive_read, archive_write, gen_airfoil_dataset, gen_metasurface_dataset, write_design, AirfoilDataConfig,
    AirfoilSource, DesignDataset, DesignKind, MetasurfaceDataConfig,
};
use crate::error::{Error, Result};
use crate::hgan::{load_model, save_model, train, HierGan, LatentConfig, TrainConfig};
use crate::optimizer::{bo_run, BoConfig, BoMode};
use crate::parallel::set_max_threads;
use crate::rng::substream;
use crate::studies::{fitting_test, parametric_study, FitOptions, FitResult, StudyConfig};
use crate::uq::{
    mc_with_bank, reliability_of, synthetic_qoi, QoiFunction, SampleBank, SyntheticQoi, UqReport, SCHEMA_VERSION,
};

pub const DATASET_FILE: &str = "dataset.gdf";
pub const MODEL_FILE: &str = "model.gdm";
pub const CONFIG_FILE: &str = "config.json";
pub const SEED_ENV: &str = "GANDUF_SEED";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    #[default]
    Airfoil,
    Metasurface,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub benchmark: Benchmark,
    pub airfoil: AirfoilDataConfig,
    pub metasurface: MetasurfaceDataConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UqSection {
    pub n_mc: usize,
    pub tau: f64,
    /// Parent code to analyse; all 0.5 when absent.
    pub c_p: Option<Vec<f64>>,
    /// Also sample the noise code instead of fixing `z = 0`.
    pub sample_z: bool,
    /// Defaults to the proxy matching the model's design kind.
    pub qoi: Option<SyntheticQoi>,
    /// Reliability is reported as `P[qoi >= t]` for each threshold.
    pub thresholds: Vec<f64>,
    pub seed: u64,
}

impl Default for UqSection {
    fn default() -> Self {
        Self {
            n_mc: 100,
            tau: 0.05,
            c_p: None,
            sample_z: false,
            qoi: None,
            thresholds: vec![],
            seed: 0,
        }
    }
}

/// Everything a run can be configured with; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides every section seed when set.
    pub seed: Option<u64>,
    pub data: DataSection,
    pub latent: LatentConfig,
    pub train: TrainConfig,
    pub uq: UqSection,
    pub bo: BoConfig,
    pub study: StudyConfig,
}

#[derive(Parser, Debug)]
#[command(name = "ganduf", version, about = "Hierarchical GAN design UQ and robust optimization")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run config with sections data, latent, train, uq, bo, study.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every section; falls back to GANDUF_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a nominal/fabricated dataset archive.
    GenData {
        #[arg(long, value_enum)]
        benchmark: Option<Benchmark>,
        #[arg(long)]
        n_nominal: Option<usize>,
        #[arg(long)]
        n_fab: Option<usize>,
        /// Airfoil surface points.
        #[arg(long)]
        points: Option<usize>,
        /// Metasurface field resolution.
        #[arg(long)]
        res: Option<usize>,
        /// Directory of Selig/Lednicer coordinate files to use instead of the synthetic family.
        #[arg(long)]
        import: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a hierarchical GAN on a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        dp: Option<usize>,
        #[arg(long)]
        dc: Option<usize>,
        #[arg(long)]
        dz: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo QoI statistics at one parent code.
    Uq {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n_mc: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        /// Comma-separated parent code.
        #[arg(long, value_delimiter = ',')]
        c_p: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        qoi: Option<QoiArg>,
        /// Prints the report to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Standard or robust Bayesian optimization over the parent code.
    Optimize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, value_enum)]
        preset: Option<Benchmark>,
        #[arg(long)]
        n_init: Option<usize>,
        #[arg(long)]
        n_total: Option<usize>,
        #[arg(long)]
        n_mc: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        /// Fresh child samples at every evaluation instead of one shared bank.
        #[arg(long)]
        no_crn: bool,
        #[arg(long, value_enum)]
        qoi: Option<QoiArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep (d_p, d_c), training one model per cell.
    Study {
        #[arg(long)]
        data: PathBuf,
        /// Cells as `PxC`, comma-separated, e.g. `2x2,5x2`.
        #[arg(long, value_delimiter = ',', value_parser = parse_cell)]
        grid: Option<Vec<(usize, usize)>>,
        #[arg(long)]
        dz: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        n_targets: Option<usize>,
        #[arg(long)]
        n_nominals: Option<usize>,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long, value_enum)]
        qoi: Option<QoiArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit dataset nominals with the trained generator's parent code.
    FitTest {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        n_targets: usize,
        /// Defaults to 3 d_p.
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum QoiArg {
    AirfoilProxy,
    MetasurfaceProxy,
    TwoPeakTest,
}

impl From<QoiArg> for SyntheticQoi {
    fn from(q: QoiArg) -> Self {
        match q {
            QoiArg::AirfoilProxy => SyntheticQoi::AirfoilProxy,
            QoiArg::MetasurfaceProxy => SyntheticQoi::MetasurfaceProxy,
            QoiArg::TwoPeakTest => SyntheticQoi::TwoPeakTest,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Standard,
    Robust,
}

fn parse_cell(s: &str) -> std::result::Result<(usize, usize), String> {
    let (p, c) = s.split_once('x').ok_or_else(|| format!("expected PxC, got {s:?}"))?;
    let n = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
    Ok((n(p)?, n(c)?))
}

/// Loaded config plus the raw JSON, so explicit file keys can be told from defaults.
struct Resolved {
    cfg: RunConfig,
    raw: Value,
    seed_flag: Option<u64>,
}

impl Resolved {
    fn load(common: &Common) -> Result<Self> {
        let (cfg, raw) = match &common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let raw: Value = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let cfg: RunConfig = serde_json::from_value(raw.clone())
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                (cfg, raw)
            }
            None => (RunConfig::default(), Value::Null),
        };
        Ok(Self {
            cfg,
            raw,
            seed_flag: common.seed,
        })
    }

    /// Seed for one section: flag, then top-level config seed, then an explicit
    /// section seed in the file, then the environment, then the section default.
    fn seed(&self, section: &[&str], default: u64) -> Result<u64> {
        if let Some(s) = self.seed_flag.or(self.cfg.seed) {
            return Ok(s);
        }
        let mut v = &self.raw;
        for k in section {
            v = &v[*k];
        }
        if !v.is_null() {
            return Ok(default);
        }
        match std::env::var(SEED_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={s:?} is not an unsigned integer"))),
            Err(_) => Ok(default),
        }
    }
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn echo_config(out: &Path, command: &str, seed: u64, cfg: &RunConfig) -> Result<()> {
    write_json(
        &out.join(CONFIG_FILE),
        &json!({ "schema_version": SCHEMA_VERSION, "command": command, "seed": seed, "config": cfg }),
    )
}

/// A directory is taken to hold the conventional file name.
fn in_dir(p: &Path, file: &str) -> PathBuf {
    if p.is_dir() {
        p.join(file)
    } else {
        p.to_path_buf()
    }
}

fn default_qoi(kind: DesignKind) -> SyntheticQoi {
    match kind {
        DesignKind::Airfoil => SyntheticQoi::AirfoilProxy,
        DesignKind::Metasurface => SyntheticQoi::MetasurfaceProxy,
    }
}

fn dat_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("dat")) {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(Error::Config(format!("no .dat files in {}", dir.display())));
    }
    Ok(files)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.threads {
        set_max_threads(n);
    }
    let mut r = Resolved::load(&cli.common)?;
    match cli.cmd {
        Cmd::GenData {
            benchmark,
            n_nominal,
            n_fab,
            points,
            res,
            import,
            out,
        } => {
            let air_seed = r.seed(&["data", "airfoil", "seed"], r.cfg.data.airfoil.seed)?;
            let meta_seed = r.seed(&["data", "metasurface", "seed"], r.cfg.data.metasurface.seed)?;
            let d = &mut r.cfg.data;
            d.benchmark = benchmark.unwrap_or(d.benchmark);
            let ds: DesignDataset = match d.benchmark {
                Benchmark::Airfoil => {
                    let a = &mut d.airfoil;
                    a.n_nominal = n_nominal.unwrap_or(a.n_nominal);
                    a.m_fab = n_fab.unwrap_or(a.m_fab);
                    a.n_points = points.unwrap_or(a.n_points);
                    if let Some(dir) = import {
                        a.source = AirfoilSource::Imported { files: dat_files(&dir)? };
                    }
                    a.seed = air_seed;
                    gen_airfoil_dataset(a)?
                }
                Benchmark::Metasurface => {
                    let m = &mut d.metasurface;
                    m.n_nominal = n_nominal.unwrap_or(m.n_nominal);
                    m.m_fab = n_fab.unwrap_or(m.m_fab);
                    m.res = res.unwrap_or(m.res);
                    m.seed = meta_seed;
                    gen_metasurface_dataset(m)?
                }
            };
            create_out(&out)?;
            archive_write(&ds, &out.join(DATASET_FILE))?;
            let seed = match r.cfg.data.benchmark {
                Benchmark::Airfoil => air_seed,
                Benchmark::Metasurface => meta_seed,
            };
            echo_config(&out, "gen-data", seed, &r.cfg)?;
            println!("wrote {} ({} nominal x {} fabricated)", out.join(DATASET_FILE).display(), ds.n_nominal(), ds.n_fab());
        }
        Cmd::Train {
            data,
            dp,
            dc,
            dz,
            steps,
            batch,
            lr,
            lambda,
            out,
        } => {
            let ds = archive_read(&in_dir(&data, DATASET_FILE))?;
            let l = &mut r.cfg.latent;
            l.d_p = dp.unwrap_or(l.d_p);
            l.d_c = dc.unwrap_or(l.d_c);
            l.d_z = dz.unwrap_or(l.d_z);
            let seed = r.seed(&["train", "seed"], r.cfg.train.seed)?;
            let t = &mut r.cfg.train;
            t.steps = steps.unwrap_or(t.steps);
            t.batch = batch.unwrap_or(t.batch);
            t.lr = lr.unwrap_or(t.lr);
            t.lambda = lambda.unwrap_or(t.lambda);
            t.seed = seed;
            let outcome = train(&ds, &r.cfg.latent, &r.cfg.train)?;
            create_out(&out)?;
            save_model(&outcome.model, &out.join(MODEL_FILE))?;
            write_json(
                &out.join("history.json"),
                &json!({ "schema_version": SCHEMA_VERSION, "history": outcome.history }),
            )?;
            echo_config(&out, "train", r.cfg.train.seed, &r.cfg)?;
            let last = outcome.history.last();
            println!(
                "trained {} steps; final loss_d {:.4} loss_g {:.4}",
                r.cfg.train.steps,
                last.map_or(f64::NAN, |h| h.loss_d),
                last.map_or(f64::NAN, |h| h.loss_g)
            );
        }
        Cmd::Uq {
            model,
            n_mc,
            tau,
            c_p,
            qoi,
            out,
        } => {
            let gan = load_model(&in_dir(&model, MODEL_FILE))?;
            let seed = r.seed(&["uq", "seed"], r.cfg.uq.seed)?;
            let u = &mut r.cfg.uq;
            u.n_mc = n_mc.unwrap_or(u.n_mc);
            u.tau = tau.unwrap_or(u.tau);
            u.c_p = c_p.or(u.c_p.take());
            u.qoi = qoi.map(Into::into).or(u.qoi);
            u.seed = seed;
            let report = uq_report(&gan, &r.cfg.uq)?;
            match out {
                Some(out) => {
                    create_out(&out)?;
                    write_json(&out.join("uq_report.json"), &report)?;
                    echo_config(&out, "uq", r.cfg.uq.seed, &r.cfg)?;
                    println!("mean {:.6} variance {:.6} quantile {:.6}", report.mean, report.variance, report.quantile);
                }
                None => println!("{}", serde_json::to_string(&report).map_err(|e| Error::Config(e.to_string()))?),
            }
        }
        Cmd::Optimize {
            model,
            mode,
            preset,
            n_init,
            n_total,
            n_mc,
            tau,
            no_crn,
            qoi,
            out,
        } => {
            let gan = load_model(&in_dir(&model, MODEL_FILE))?;
            let mut bo = match preset {
                Some(Benchmark::Airfoil) => BoConfig::airfoil_preset(r.cfg.bo.seed),
                Some(Benchmark::Metasurface) => BoConfig::metasurface_preset(r.cfg.bo.seed),
                None => r.cfg.bo.clone(),
            };
            if preset.is_none() && r.raw["bo"]["d_p"].is_null() {
                // size the budget to the model unless the file pins it
                bo = BoConfig {
                    mode: bo.mode,
                    n_mc: bo.n_mc,
                    common_random_numbers: bo.common_random_numbers,
                    seed: bo.seed,
                    gp: bo.gp.clone(),
                    ..BoConfig::for_dims(gan.latent().d_p)
                };
            }
            bo.n_init = n_init.unwrap_or(bo.n_init);
            bo.n_total = n_total.unwrap_or(bo.n_total);
            bo.n_mc = n_mc.unwrap_or(bo.n_mc);
            let tau = tau.or(match bo.mode {
                BoMode::Quantile { tau } => Some(tau),
                _ => None,
            });
            bo.mode = match (mode, bo.mode) {
                (Some(ModeArg::Standard), _) => BoMode::Standard,
                (Some(ModeArg::Robust), BoMode::MeanKSigma { k }) if tau.is_none() => BoMode::MeanKSigma { k },
                (Some(ModeArg::Robust), _) => BoMode::Quantile { tau: tau.unwrap_or(0.05) },
                (None, BoMode::Quantile { .. }) => BoMode::Quantile { tau: tau.unwrap_or(0.05) },
                (None, m) => m,
            };
            bo.common_random_numbers &= !no_crn;
            bo.seed = r.seed(&["bo", "seed"], bo.seed)?;
            r.cfg.bo = bo;
            let q = synthetic_qoi(qoi.map(Into::into).unwrap_or(default_qoi(gan.kind)));
            let outcome = bo_run(&gan.gen, &q, &r.cfg.bo)?;
            create_out(&out)?;
            outcome.trace.write_jsonl(&out.join("trace.jsonl"))?;
            write_json(
                &out.join("result.json"),
                &json!({
                    "schema_version": SCHEMA_VERSION,
                    "qoi": q.name(),
                    "mode": r.cfg.bo.mode,
                    "evaluations": outcome.trace.records.len(),
                    "best_c_p": outcome.best_c_p,
                    "best_objective": outcome.best_objective,
                }),
            )?;
            write_design(
                &out.join("best_design.gdf"),
                gan.kind,
                &gan.design_shape,
                &outcome.best_design,
                json!({ "c_p": outcome.best_c_p, "objective": outcome.best_objective }),
            )?;
            echo_config(&out, "optimize", r.cfg.bo.seed, &r.cfg)?;
            println!("best objective {:.6} at c_p {:?}", outcome.best_objective, outcome.best_c_p);
        }
        Cmd::Study {
            data,
            grid,
            dz,
            steps,
            n_targets,
            n_nominals,
            n_samples,
            qoi,
            out,
        } => {
            let ds = archive_read(&in_dir(&data, DATASET_FILE))?;
            let seed = r.seed(&["study", "seed"], r.cfg.study.seed)?;
            let s = &mut r.cfg.study;
            s.grid = grid.unwrap_or(std::mem::take(&mut s.grid));
            s.d_z = dz.unwrap_or(s.d_z);
            s.n_targets = n_targets.unwrap_or(s.n_targets);
            s.n_nominals = n_nominals.unwrap_or(s.n_nominals);
            s.n_samples = n_samples.unwrap_or(s.n_samples);
            s.seed = seed;
            r.cfg.train.steps = steps.unwrap_or(r.cfg.train.steps);
            let q = synthetic_qoi(qoi.map(Into::into).unwrap_or(default_qoi(ds.kind)));
            let report = parametric_study(&ds, &r.cfg.study, &r.cfg.train, &q)?;
            create_out(&out)?;
            write_json(&out.join("study.json"), &report)?;
            std::fs::write(out.join("study.csv"), report.to_csv()).map_err(|e| Error::io(out.join("study.csv"), e))?;
            echo_config(&out, "study", r.cfg.study.seed, &r.cfg)?;
            let failed = report.cells.iter().filter(|c| c.error.is_some()).count();
            println!("{} cells, {failed} failed", report.cells.len());
        }
        Cmd::FitTest {
            model,
            data,
            n_targets,
            restarts,
            out,
        } => {
            let gan = load_model(&in_dir(&model, MODEL_FILE))?;
            let ds = archive_read(&in_dir(&data, DATASET_FILE))?;
            let seed = r.seed(&["study", "seed"], r.cfg.study.seed)?;
            r.cfg.study.seed = seed;
            let results = fit_targets(&gan, &ds, n_targets, restarts, seed)?;
            let rms: Vec<f64> = results.iter().map(|f| f.rms).collect();
            create_out(&out)?;
            write_json(
                &out.join("fit.json"),
                &json!({
                    "schema_version": SCHEMA_VERSION,
                    "seed": seed,
                    "rms": rms,
                    "results": results,
                }),
            )?;
            echo_config(&out, "fit-test", seed, &r.cfg)?;
            let mut sorted = rms.clone();
            sorted.sort_by(f64::total_cmp);
            println!("median rms {:.3e} over {} targets", sorted[sorted.len() / 2], sorted.len());
        }
    }
    Ok(())
}

/// MC report at one parent code, with the bank drawn from the section seed.
pub fn uq_report(gan: &HierGan, u: &UqSection) -> Result<UqReport> {
    let latent = gan.latent();
    let c_p = u.c_p.clone().unwrap_or_else(|| vec![0.5; latent.d_p]);
    let q: QoiFunction = synthetic_qoi(u.qoi.unwrap_or(default_qoi(gan.kind)));
    let bank = SampleBank::draw(latent, u.n_mc, u.sample_z, &mut substream(u.seed, 0))?;
    let samples = mc_with_bank(&gan.gen, &c_p, &q, &bank)?;
    let mut report = UqReport::from_samples(q.name(), &c_p, u.n_mc, u.tau, samples)?;
    for t in &u.thresholds {
        let g: Vec<f64> = report.samples.iter().map(|v| v - t).collect();
        report.reliability.insert(format!("{}>={t}", q.name()), reliability_of(&g));
    }
    Ok(report)
}

/// Fitting test on `n_targets` dataset nominals chosen by `seed`.
pub fn fit_targets(
    gan: &HierGan,
    ds: &DesignDataset,
    n_targets: usize,
    restarts: Option<usize>,
    seed: u64,
) -> Result<Vec<FitResult>> {
    if gan.kind != ds.kind || gan.gen.design_dims() != ds.design_dims() {
        return Err(Error::Config("model and dataset describe different designs".into()));
    }
    let mut rng = substream(seed, 0);
    let n = n_targets.min(ds.n_nominal());
    let idx = rand::seq::index::sample(&mut rng, ds.n_nominal(), n).into_vec();
    let opts = FitOptions {
        n_restarts: restarts.unwrap_or(3 * gan.latent().d_p),
        point_dim: ds.kind.point_dim(),
        ..FitOptions::default()
    };
    idx.iter()
        .map(|&i| fitting_test(&gan.gen, ds.nominal(i), &opts, &mut rng))
        .collect()
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
///
/// Usage errors print clap's message and return 2. Runtime failures print one
/// JSON line `{"error": kind, "message": ...}` to stderr and return 1.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            1
        }
    }
}
