//! Acceptance checks A1-A8. Prints one PASS/FAIL line per check.
//!
//! Pass check names (`A4 A6`) as arguments to run a subset. Failures are
//! reported but only change the exit status when `GANDUF_ACCEPTANCE_STRICT=1`.

use std::path::Path;
use std::time::Instant;

use rand::Rng;

use ganduf::autodiff::{grad_check, Graph, Tensor, Var};
use ganduf::cli::run_cli;
use ganduf::datasets::{gen_airfoil_dataset, gen_metasurface_dataset, sample_pair_batch, AirfoilDataConfig, AirfoilFamily, AirfoilSource, MetasurfaceDataConfig};
use ganduf::geometry::{bernstein_row, distort_field, ffd_deform, make_control_grid, parametric_coords, sdf_motif, MotifKind, MotifParams};
use ganduf::hgan::{
    hier_gan_losses, latent_recovery, loss_gradients, sample_priors, train, ArchConfig, GeneratorLoss, HierGan, LatentConfig,
    Player, TrainConfig,
};
use ganduf::optimizer::{bo_run, expected_improvement_from, lhs_sample, BoConfig, BoMode};
use ganduf::rng::{seeded, substream};
use ganduf::studies::{fidelity_test, fitting_test, wasserstein_1d, FitOptions};
use ganduf::uq::{estimate_quantile, synthetic_qoi, SyntheticQoi, TwoPeak, TwoPeakEmbedding};
use rand_distr::{Distribution, StandardNormal};

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// A1

/// Contracts an arbitrary output against fixed random weights so every
/// output element reaches the scalar with a distinct coefficient.
fn contract(g: &mut Graph, v: Var, seed: u64) -> ganduf::Result<Var> {
    let shape = g.shape(v).to_vec();
    if shape.len() < 2 {
        return Ok(v);
    }
    let (r, c) = (shape[0], shape.get(1).copied().unwrap_or(1));
    let mut rng = seeded(seed);
    let w = g.constant_matrix(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let m = g.mul(v, w)?;
    Ok(g.sum(m))
}

/// Central-difference step balancing truncation against roundoff.
const FD_STEP: f64 = 6e-6;

type OpFn = fn(&mut Graph, Var, usize) -> ganduf::Result<Var>;

fn halves(g: &mut Graph, x: Var, c: usize) -> ganduf::Result<(Var, Var)> {
    Ok((g.slice_cols(x, 0, c)?, g.slice_cols(x, c, 2 * c)?))
}

fn op_families() -> Vec<(&'static str, OpFn, bool)> {
    // (name, op on an input of `c` or `2c` columns, takes two operands)
    vec![
        ("matmul", |g, x, c| {
            let (a, b) = halves(g, x, c)?;
            let bt = g.slice_cols(b, 0, 1)?;
            let m = g.matmul(a, b)?;
            let n = g.matmul(a, bt)?;
            g.concat(&[m, n])
        }, true),
        ("add", |g, x, c| {
            let (a, b) = halves(g, x, c)?;
            g.add(a, b)
        }, true),
        ("add_row", |g, x, c| {
            let (a, b) = halves(g, x, c)?;
            let r = g.shape(b)[0];
            let w = g.constant_matrix(1, r, (0..r).map(|i| 0.3 + i as f64).collect())?;
            let row = g.matmul(w, b)?;
            g.add(a, row)
        }, true),
        ("sub", |g, x, c| {
            let (a, b) = halves(g, x, c)?;
            g.sub(a, b)
        }, true),
        ("mul", |g, x, c| {
            let (a, b) = halves(g, x, c)?;
            g.mul(a, b)
        }, true),
        ("scale", |g, x, _| Ok(g.scale(x, -1.7)), false),
        ("concat", |g, x, c| {
            let (a, b) = halves(g, x, c)?;
            let s = g.square(a);
            g.concat(&[b, s, a])
        }, true),
        ("slice_cols", |g, x, c| g.slice_cols(x, 1, c), false),
        ("tanh", |g, x, _| Ok(g.tanh(x)), false),
        ("sigmoid", |g, x, _| Ok(g.sigmoid(x)), false),
        ("leaky_relu", |g, x, _| Ok(g.leaky_relu(x, 0.2)), false),
        ("softplus", |g, x, _| Ok(g.softplus(x)), false),
        ("log", |g, x, _| {
            let s = g.square(x);
            let one = g.constant(&Tensor::new(g.shape(x).to_vec(), vec![0.5; g.value(x).len()])?);
            let p = g.add(s, one)?;
            Ok(g.log(p))
        }, false),
        ("square", |g, x, _| Ok(g.square(x)), false),
        ("sum", |g, x, _| {
            let t = g.tanh(x);
            let s = g.sum(t);
            let s2 = g.square(s);
            let s2 = g.scale(s2, 0.3);
            g.add(s, s2)
        }, false),
        ("mean", |g, x, _| {
            let t = g.sigmoid(x);
            let s = g.mean(t);
            let s2 = g.square(s);
            let s2 = g.scale(s2, 0.3);
            g.add(s, s2)
        }, false),
    ]
}

fn max_rel_over_params(model: &HierGan, player: Player, kind: GeneratorLoss, seed: u64) -> ganduf::Result<f64> {
    let latent = model.latent().clone();
    let ds = tiny_airfoils(seed);
    let b = sample_pair_batch(&ds, 4, &mut substream(seed, 1))?;
    let p = sample_priors(&latent, 4, &mut substream(seed, 2))?;
    let lambda = 0.7;
    let (_, grads) = loss_gradients(model, player, &b.nominal, &b.fabricated, &p, lambda, kind)?;
    let value = |m: &HierGan| -> ganduf::Result<f64> {
        let l = hier_gan_losses(m, &b.nominal, &b.fabricated, &p, lambda, kind)?;
        Ok(match player {
            Player::Discriminator => l.loss_d,
            Player::Generator => l.loss_g,
        })
    };
    let h = FD_STEP;
    let mut worst = 0.0f64;
    for (t, grad) in grads.iter().enumerate() {
        for i in 0..grad.len() {
            let at = |delta: f64| {
                let mut m = model.clone();
                param_mut(&mut m, player, t).data_mut()[i] += delta;
                value(&m)
            };
            let fd = (at(h)? - at(-h)?) / (2.0 * h);
            let a = grad.data()[i];
            let rel = (a - fd).abs() / (a.abs() + fd.abs() + 1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

fn param_mut(m: &mut HierGan, player: Player, mut t: usize) -> &mut Tensor {
    match player {
        Player::Generator => &mut m.gen.net_mut().params_mut()[t],
        Player::Discriminator => {
            for net in m.disc.nets_mut() {
                let n = net.params().len();
                if t < n {
                    return &mut net.params_mut()[t];
                }
                t -= n;
            }
            panic!("parameter index out of range")
        }
    }
}

fn tiny_airfoils(seed: u64) -> ganduf::datasets::DesignDataset {
    gen_airfoil_dataset(&AirfoilDataConfig {
        n_nominal: 6,
        m_fab: 2,
        n_points: 16,
        source: AirfoilSource::Synthetic {
            family: AirfoilFamily::one_parameter(16),
        },
        seed,
        ..Default::default()
    })
    .expect("tiny dataset")
}

fn a1() -> Check {
    const INSTANCES: u64 = 20;
    let mut worst_op = (0.0f64, "");
    for (name, op, binary) in op_families() {
        for k in 0..INSTANCES {
            let mut rng = substream(1, k);
            let (r, c) = (rng.random_range(2..6), rng.random_range(2..6));
            // both matmul operands come from one input, so make them conformable
            let r = if name == "matmul" { c } else { r };
            let cols = if binary { 2 * c } else { c };
            // keep leaky_relu away from its kink
            let data = (0..r * cols)
                .map(|_| {
                    let v: f64 = rng.random_range(-2.0..2.0);
                    if v.abs() < 0.05 { v + 0.1 } else { v }
                })
                .collect();
            let x = Tensor::matrix(r, cols, data).map_err(err)?;
            let rel = grad_check(
                |g, v| {
                    let out = op(g, v, c)?;
                    contract(g, out, 1000 + k)
                },
                &x,
                FD_STEP,
            )
            .map_err(|e| format!("{name}: {e}"))?;
            if rel > worst_op.0 {
                worst_op = (rel, name);
            }
        }
    }
    ensure(worst_op.0 < 1e-4, format!("op {} rel err {:.2e}", worst_op.1, worst_op.0))?;

    let arch = ArchConfig {
        gen_hidden: vec![8, 6],
        disc_hidden: vec![7, 5],
    };
    let mut worst_loss = 0.0f64;
    for k in 0..INSTANCES {
        let latent = LatentConfig::new(2, 2, 2);
        let model = HierGan::init(&tiny_airfoils(k), &latent, &arch, &mut substream(2, k)).map_err(err)?;
        for (player, kind) in [
            (Player::Discriminator, GeneratorLoss::NonSaturating),
            (Player::Generator, GeneratorLoss::NonSaturating),
        ] {
            worst_loss = worst_loss.max(max_rel_over_params(&model, player, kind, 100 + k).map_err(err)?);
        }
    }
    ensure(worst_loss < 1e-4, format!("loss rel err {worst_loss:.2e}"))?;
    Ok(format!(
        "16 op families x {INSTANCES}: max rel {:.1e} ({}); D/G losses x {INSTANCES}: max rel {worst_loss:.1e}",
        worst_op.0, worst_op.1
    ))
}

// A2

fn a2() -> Check {
    let mut rng = seeded(2);
    let mut pou = 0.0f64;
    for _ in 0..100 {
        let t: f64 = rng.random();
        let n = rng.random_range(1..12);
        pou = pou.max((bernstein_row(n, t).iter().sum::<f64>() - 1.0).abs());
    }
    ensure(pou < 1e-12, format!("partition of unity error {pou:.2e}"))?;

    let family = AirfoilFamily::default();
    let mut ffd = 0.0f64;
    for _ in 0..50 {
        let (_, shape) = family.sample(&mut rng).map_err(err)?;
        let coords = parametric_coords(&shape).map_err(err)?;
        let grid = make_control_grid(&shape, rng.random_range(3..9), rng.random_range(2..5)).map_err(err)?;
        let out = ffd_deform(&coords, &grid);
        for (a, b) in out.points().iter().zip(shape.points()) {
            ffd = ffd.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
        }
    }
    ensure(ffd < 1e-9, format!("identity FFD error {ffd:.2e}"))?;

    let mut sdf = 0.0f64;
    for kind in [MotifKind::IBeam, MotifKind::Cross, MotifKind::SquareRing] {
        let field = sdf_motif(kind, MotifParams { extent: 0.7, width: 0.2 }, 32).map_err(err)?;
        let out = distort_field(&field, 5, 5, 0.0, &mut rng).map_err(err)?;
        for (a, b) in out.values().iter().zip(field.values()) {
            sdf = sdf.max((a - b).abs());
        }
    }
    ensure(sdf < 1e-9, format!("sigma=0 distortion error {sdf:.2e}"))?;
    Ok(format!("PoU {pou:.1e}, FFD identity {ffd:.1e} on 50 shapes, sigma=0 distortion {sdf:.1e}"))
}

// A3

fn a3() -> Check {
    let mut rng = seeded(3);
    for _ in 0..200 {
        let n = rng.random_range(1..200);
        let tau: f64 = rng.random_range(0.001..1.0);
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        let k = ((tau * n as f64).ceil() as usize).clamp(1, n);
        let q = estimate_quantile(&s, tau).map_err(err)?;
        ensure(q == sorted[k - 1], format!("quantile n={n} tau={tau}: {q} vs {}", sorted[k - 1]))?;
    }

    let mut w1 = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..60);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..4.0)).collect();
        // brute force: the optimal assignment is the identity after sorting
        let (mut sa, mut sb) = (a.clone(), b.clone());
        sa.sort_by(f64::total_cmp);
        sb.sort_by(f64::total_cmp);
        let oracle = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
        w1 = w1.max((wasserstein_1d(&a, &b).map_err(err)? - oracle).abs());
    }
    ensure(w1 < 1e-10, format!("W1 error {w1:.2e}"))?;

    const DRAWS: usize = 1_000_000;
    let mut ei = 0.0f64;
    for k in 0..20 {
        let mu = rng.random_range(-2.0..2.0);
        let sigma = rng.random_range(0.05..1.5);
        let f_best = rng.random_range(-1.0..1.0);
        let mut mc = substream(30, k);
        let sum: f64 = (0..DRAWS)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut mc);
                (mu + sigma * e - f_best).max(0.0)
            })
            .sum();
        ei = ei.max((sum / DRAWS as f64 - expected_improvement_from(mu, sigma, f_best)).abs());
    }
    ensure(ei < 1e-3, format!("EI vs MC error {ei:.2e}"))?;

    for _ in 0..20 {
        let (n, d) = (rng.random_range(1..50), rng.random_range(1..8));
        let pts = lhs_sample(n, d, &mut rng).map_err(err)?;
        for j in 0..d {
            let mut strata: Vec<usize> = pts.iter().map(|p| (p[j] * n as f64).floor() as usize).collect();
            strata.sort_unstable();
            ensure(strata == (0..n).collect::<Vec<_>>(), format!("LHS n={n} d={d} column {j}"))?;
        }
    }
    Ok(format!("quantile exact x200, W1 err {w1:.1e} x100, EI vs 1e6 MC err {ei:.1e} x20, LHS strata exact x20"))
}

// A4 and A5 share one trained model.

struct Toy {
    model: HierGan,
    ds: ganduf::datasets::DesignDataset,
}

fn toy_model() -> ganduf::Result<Toy> {
    let ds = gen_airfoil_dataset(&AirfoilDataConfig {
        n_nominal: 200,
        m_fab: 5,
        sigma_y: 0.02,
        n_points: 32,
        source: AirfoilSource::Synthetic {
            family: AirfoilFamily::one_parameter(32),
        },
        seed: 0,
    })?;
    let cfg = TrainConfig {
        steps: 5000,
        ..TrainConfig::default()
    };
    let model = train(&ds, &LatentConfig::new(2, 2, 4), &cfg)?.model;
    Ok(Toy { model, ds })
}

fn a4(toy: &Toy) -> Check {
    let rec = latent_recovery(&toy.model, 2000, &mut seeded(40)).map_err(err)?;
    let corr = rec.min_active_correlation();
    let mut rng = seeded(41);
    let c_ps: Vec<Vec<f64>> = (0..10).map(|_| (0..2).map(|_| rng.random()).collect()).collect();
    let qoi = synthetic_qoi(SyntheticQoi::AirfoilProxy);
    let fid = fidelity_test(&toy.model.gen, &c_ps, &toy.ds.fabrication(), &qoi, 100, &mut rng).map_err(err)?;
    let ratio = fid.median_distance() / fid.median_null();
    let detail = format!(
        "(a) min active corr {corr:.3} (per dim {:.3?}, active {:?}); (b) median W1 {:.3} / null {:.3} = {ratio:.2}",
        rec.correlation,
        rec.active,
        fid.median_distance(),
        fid.median_null()
    );
    ensure(corr > 0.7 && ratio < 2.0, detail.clone())?;
    Ok(detail)
}

fn a5(toy: &Toy) -> Check {
    let gen = &toy.model.gen;
    let d_p = gen.latent().d_p;
    let z = vec![0.0; gen.latent().d_z];
    let opts = FitOptions {
        n_restarts: 3 * d_p,
        point_dim: 2,
        ..FitOptions::default()
    };
    // chord is 1, so the design scale is 1
    let tol = 1e-2;
    let mut rng = seeded(50);
    let mut rms = Vec::new();
    for _ in 0..20 {
        let c: Vec<f64> = (0..d_p).map(|_| rng.random()).collect();
        let target = gen.generate_nominal(&c, &z).map_err(err)?;
        rms.push(fitting_test(gen, &target, &opts, &mut rng).map_err(err)?.rms);
    }
    let hits = rms.iter().filter(|&&r| r < tol).count();
    let worst = rms.iter().cloned().fold(0.0, f64::max);
    let detail = format!("{hits}/20 targets under {tol:.0e} chord RMS (worst {worst:.1e})");
    ensure(hits >= 18, detail.clone())?;
    Ok(detail)
}

// A6

fn a6() -> Check {
    let emb = TwoPeakEmbedding::default();
    let qoi = synthetic_qoi(SyntheticQoi::TwoPeakTest);
    let tp = TwoPeak::default();
    let near = |x: &[f64], c: [f64; 2]| ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt() < 0.1;
    // ground-truth 5th percentile from common draws
    let mut truth_rng = seeded(60);
    let draws: Vec<[f64; 2]> = (0..100_000)
        .map(|_| [StandardNormal.sample(&mut truth_rng), StandardNormal.sample(&mut truth_rng)])
        .collect();
    let sigma = emb.sigma();
    let q05 = |c: &[f64]| -> ganduf::Result<f64> {
        let v: Vec<f64> = draws
            .iter()
            .map(|e| tp.eval(&[c[0] + sigma * e[0], c[1] + sigma * e[1]]))
            .collect::<ganduf::Result<_>>()?;
        estimate_quantile(&v, 0.05)
    };
    let (mut narrow, mut broad, mut better) = (0, 0, 0);
    for seed in 0..10 {
        let cfg = |mode| BoConfig {
            mode,
            n_mc: 100,
            seed,
            ..BoConfig::for_dims(2)
        };
        let s = bo_run(&emb, &qoi, &cfg(BoMode::Standard)).map_err(err)?;
        let r = bo_run(&emb, &qoi, &cfg(BoMode::Quantile { tau: 0.05 })).map_err(err)?;
        narrow += near(&s.best_c_p, tp.narrow.center) as usize;
        broad += near(&r.best_c_p, tp.broad.center) as usize;
        better += (q05(&r.best_c_p).map_err(err)? > q05(&s.best_c_p).map_err(err)?) as usize;
    }
    let detail = format!(
        "standard at narrow peak {narrow}/10, robust at broad peak {broad}/10, robust 5th pct higher {better}/10 (budget {}/{})",
        BoConfig::for_dims(2).n_init,
        BoConfig::for_dims(2).n_total
    );
    ensure(narrow >= 8 && broad >= 8 && better >= 8, detail.clone())?;
    Ok(detail)
}

// A7

fn pipeline(dir: &Path) -> std::result::Result<Vec<(String, Vec<u8>)>, String> {
    let d = dir.to_str().ok_or("non-utf8 temp path")?;
    let steps: [&[&str]; 4] = [
        &["gen-data", "--benchmark", "airfoil", "--n-nominal", "20", "--n-fab", "3", "--points", "32", "--seed", "7", "--out", d],
        &["train", "--data", d, "--dp", "7", "--dc", "5", "--dz", "10", "--steps", "100", "--seed", "7", "--out", d],
        &["uq", "--model", d, "--n-mc", "50", "--tau", "0.05", "--seed", "7", "--out", &format!("{d}/uq")],
        &["optimize", "--model", d, "--n-init", "4", "--n-total", "7", "--n-mc", "20", "--seed", "7", "--out", &format!("{d}/opt")],
    ];
    for args in steps {
        let code = run_cli(std::iter::once("ganduf").chain(args.iter().copied()));
        ensure(code == 0, format!("{} exited {code}", args[0]))?;
    }
    let mut files = Vec::new();
    for sub in ["", "uq", "opt"] {
        let mut names: Vec<_> = std::fs::read_dir(dir.join(sub))
            .map_err(err)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| e.path())
            .collect();
        names.sort();
        for p in names {
            let rel = p.strip_prefix(dir).map_err(err)?.display().to_string();
            files.push((rel, std::fs::read(&p).map_err(err)?));
        }
    }
    Ok(files)
}

fn a7() -> Check {
    let (a, b) = (tempfile::tempdir().map_err(err)?, tempfile::tempdir().map_err(err)?);
    let fa = pipeline(a.path())?;
    let fb = pipeline(b.path())?;
    ensure(fa.len() == fb.len(), "different file sets")?;
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        ensure(na == nb && ba == bb, format!("{na} differs"))?;
    }
    Ok(format!("{} files byte-identical: {}", fa.len(), fa.iter().map(|f| f.0.as_str()).collect::<Vec<_>>().join(" ")))
}

// A8

fn a8() -> Check {
    let air = gen_airfoil_dataset(&AirfoilDataConfig {
        n_nominal: 10,
        m_fab: 2,
        n_points: 32,
        ..Default::default()
    })
    .map_err(err)?;
    let meta = gen_metasurface_dataset(&MetasurfaceDataConfig {
        n_nominal: 10,
        m_fab: 2,
        res: 16,
        ..Default::default()
    })
    .map_err(err)?;
    let tiny = TrainConfig {
        steps: 20,
        ..TrainConfig::default()
    };
    let mut out = Vec::new();
    for (name, ds, latent, preset, qoi) in [
        ("airfoil", &air, LatentConfig::new(7, 5, 10), BoConfig::airfoil_preset(8), SyntheticQoi::AirfoilProxy),
        ("metasurface", &meta, LatentConfig::new(5, 10, 5), BoConfig::metasurface_preset(8), SyntheticQoi::MetasurfaceProxy),
    ] {
        let expect = match name {
            "airfoil" => (7, 21, 140, 100),
            _ => (5, 15, 100, 20),
        };
        ensure(
            (preset.d_p, preset.n_init, preset.n_total, preset.n_mc) == expect && preset.mode == BoMode::Quantile { tau: 0.05 },
            format!("{name} preset {preset:?}"),
        )?;
        let model = train(ds, &latent, &tiny).map_err(err)?.model;
        // two BO iterations past the initial design
        let cfg = BoConfig {
            n_total: preset.n_init + 2,
            ..preset
        };
        let r = bo_run(&model.gen, &synthetic_qoi(qoi), &cfg).map_err(err)?;
        let iters = r.trace.records.iter().filter(|rec| rec.acquisition.is_some()).count();
        ensure(iters >= 2 && r.best_objective.is_finite(), format!("{name}: {iters} BO iterations"))?;
        out.push(format!("{name} d_p {} {}/{} n_mc {}: {iters} iterations ok", preset.d_p, preset.n_init, preset.n_total, preset.n_mc));
    }
    Ok(out.join("; "))
}

fn main() {
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('A')).collect();
    let want = |id: &str| only.is_empty() || only.iter().any(|a| a == id);
    let mut failed = 0;
    let mut report = |id: &str, f: &mut dyn FnMut() -> Check| {
        if !want(id) {
            return;
        }
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("{id} PASS ({secs:.1}s) {d}"),
            Err(d) => {
                failed += 1;
                println!("{id} FAIL ({secs:.1}s) {d}");
            }
        }
    };
    report("A1", &mut a1);
    report("A2", &mut a2);
    report("A3", &mut a3);
    if want("A4") || want("A5") {
        let t = Instant::now();
        match toy_model() {
            Ok(toy) => {
                println!("   toy model trained in {:.1}s", t.elapsed().as_secs_f64());
                report("A4", &mut || a4(&toy));
                report("A5", &mut || a5(&toy));
            }
            Err(e) => {
                report("A4", &mut || Err(format!("training failed: {e}")));
                report("A5", &mut || Err(format!("training failed: {e}")));
            }
        }
    }
    report("A6", &mut a6);
    report("A7", &mut a7);
    report("A8", &mut a8);
    let strict = std::env::var("GANDUF_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed > 0 && strict {
        std::process::exit(1);
    }
}
