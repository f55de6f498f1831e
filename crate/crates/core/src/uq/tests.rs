use super::*;
use crate::datasets::AirfoilFamily;
use crate::rng::seeded;
use rand_distr::{Distribution, Normal};

/// Generator whose design is just `c_c` shifted by `c_p`, handy for exact oracles.
struct Shift(LatentConfig);

impl DesignGenerator for Shift {
    fn latent(&self) -> &LatentConfig {
        &self.0
    }
    fn design_dims(&self) -> usize {
        self.0.d_c
    }
    fn generate(&self, c_p: &[f64], c_c: &[f64], _z: &[f64]) -> Result<Vec<f64>> {
        Ok(c_c.iter().map(|c| c + c_p[0]).collect())
    }
}

fn unit_shift() -> Shift {
    let mut l = LatentConfig::new(1, 1, 0);
    l.child_var = 1.0;
    Shift(l)
}

#[test]
fn moments_by_hand() {
    assert_eq!(estimate_moments(&[2.0, 2.0, 2.0]).unwrap(), (2.0, 0.0));
    assert_eq!(estimate_moments(&[0.0, 2.0]).unwrap(), (1.0, 1.0));
    assert!(estimate_moments(&[]).is_err());
}

#[test]
fn moments_of_normal_draws() {
    let normal = Normal::new(3.0, 2.0).unwrap();
    let mut rng = seeded(1);
    let s: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
    let (m, v) = estimate_moments(&s).unwrap();
    assert!((m - 3.0).abs() < 0.03, "{m}");
    assert!((v - 4.0).abs() < 0.1, "{v}");
    let shifted: Vec<f64> = s.iter().map(|x| x + 5.0).collect();
    let (m2, v2) = estimate_moments(&shifted).unwrap();
    assert!((m2 - m - 5.0).abs() < 1e-9 && (v2 - v).abs() < 1e-9);
}

#[test]
fn quantile_order_statistics() {
    let s: Vec<f64> = (1..=100).rev().map(f64::from).collect();
    assert_eq!(estimate_quantile(&s, 0.05).unwrap(), 5.0);
    assert_eq!(estimate_quantile(&s, 0.07).unwrap(), 7.0);
    assert_eq!(estimate_quantile(&s, 1e-9).unwrap(), 1.0);
    assert_eq!(estimate_quantile(&[4.2], 0.9).unwrap(), 4.2);
    assert!(estimate_quantile(&s, 0.0).is_err());
    assert!(estimate_quantile(&s, 1.0).is_err());
    let mut rng = seeded(3);
    let r: Vec<f64> = (0..57).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
    let mut prev = f64::NEG_INFINITY;
    for k in 1..100 {
        let q = estimate_quantile(&r, k as f64 / 100.0).unwrap();
        assert!(q >= prev && r.contains(&q));
        prev = q;
    }
    assert!(estimate_quantile(&r, 0.3).unwrap() <= estimate_quantile(&r, 0.5).unwrap());
}

#[test]
fn constant_qoi_gives_constant_samples() {
    let q = QoiFunction::new("const", |_| Ok(2.5));
    let s = mc_fabricated_qoi(&unit_shift(), &[0.0], &q, 17, &mut seeded(0)).unwrap();
    assert_eq!(s.values, vec![2.5; 17]);
    assert_eq!(q.evaluations(), 17);
    let one = mc_fabricated_qoi(&unit_shift(), &[0.0], &q, 1, &mut seeded(0)).unwrap();
    assert_eq!(one.values.len(), 1);
    for mode in [RobustMode::Quantile { tau: 0.05 }, RobustMode::MeanKSigma { k: 3.0 }] {
        assert_eq!(robust_objective(&unit_shift(), &[0.0], &q, 10, mode, &mut seeded(1)).unwrap(), 2.5);
    }
}

#[test]
fn mc_mean_is_self_consistent() {
    let q = QoiFunction::new("sq", |x| Ok(x[0] * x[0] + x[0]));
    let g = unit_shift();
    let big = mc_fabricated_qoi(&g, &[0.2], &q, 10_000, &mut seeded(4)).unwrap().values;
    let small = mc_fabricated_qoi(&g, &[0.2], &q, 100, &mut seeded(5)).unwrap().values;
    let (mb, _) = estimate_moments(&big).unwrap();
    let (ms, vs) = estimate_moments(&small).unwrap();
    assert!((mb - ms).abs() <= 4.0 * vs.sqrt() / 10.0);
}

#[test]
fn bernoulli_mean_k_sigma() {
    let q = QoiFunction::new("step", |x| Ok(if x[0] >= 0.0 { 10.0 } else { 0.0 }));
    let v = robust_objective(&unit_shift(), &[0.0], &q, 20_000, RobustMode::MeanKSigma { k: 1.0 }, &mut seeded(2))
        .unwrap();
    assert!(v.abs() < 0.15, "{v}");
}

#[test]
fn normal_quantile() {
    let q = QoiFunction::new("id", |x| Ok(x[0]));
    let v = robust_objective(&unit_shift(), &[0.0], &q, 10_000, RobustMode::Quantile { tau: 0.05 }, &mut seeded(6))
        .unwrap();
    assert!((v + 1.645).abs() < 0.08, "{v}");
}

#[test]
fn reliability_oracles() {
    let g = unit_shift();
    let always = QoiFunction::new("pos", |_| Ok(1.0));
    let never = QoiFunction::new("neg", |_| Ok(-1.0));
    let median = QoiFunction::new("median", |x| Ok(x[0]));
    let loose = QoiFunction::new("loose", |x| Ok(x[0] + 0.5));
    let p = estimate_reliability(&g, &[0.0], &[always, never, median, loose], 20_000, &mut seeded(7)).unwrap();
    assert_eq!(p[0], 1.0);
    assert_eq!(p[1], 0.0);
    assert!((p[2] - 0.5).abs() < 0.02, "{}", p[2]);
    assert!(p[3] >= p[2]);
}

#[test]
fn failures_are_tolerated_up_to_ten_percent() {
    let g = unit_shift();
    let bank = SampleBank {
        c_c: (0..20).map(|i| vec![i as f64]).collect(),
        z: None,
    };
    let two_fail = QoiFunction::new("f", |x| if x[0] < 2.0 { Err(Error::Qoi("bad".into())) } else { Ok(x[0]) });
    let s = mc_with_bank(&g, &[0.0], &two_fail, &bank).unwrap();
    assert_eq!((s.values.len(), s.failures), (18, 2));
    let three_fail = QoiFunction::new("f", |x| if x[0] < 3.0 { Err(Error::Qoi("bad".into())) } else { Ok(x[0]) });
    assert!(matches!(mc_with_bank(&g, &[0.0], &three_fail, &bank), Err(Error::Qoi(_))));
    let nan = QoiFunction::new("nan", |_| Ok(f64::NAN));
    assert!(mc_with_bank(&g, &[0.0], &nan, &bank).is_err());
}

#[test]
fn sequential_and_concurrent_agree() {
    let g = unit_shift();
    let bank = SampleBank::draw(g.latent(), 64, false, &mut seeded(8)).unwrap();
    let f = |x: &[f64]| Ok(x[0].sin());
    let a = mc_with_bank(&g, &[0.3], &QoiFunction::new("c", f), &bank).unwrap();
    let b = mc_with_bank(&g, &[0.3], &QoiFunction::new("s", f).sequential(), &bank).unwrap();
    assert_eq!(a, b);
}

#[test]
fn flat_plate_hits_baseline() {
    let n = 32;
    let pts: Vec<f64> = (0..n)
        .flat_map(|k| {
            let s = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            [0.5 * (1.0 + s.cos()), 0.0]
        })
        .collect();
    let t = airfoil_proxy_terms(&pts).unwrap();
    assert_eq!((t.camber, t.thickness, t.roughness), (0.0, 0.0, 0.0));
    // 2 pi alpha / (cd0 + k_i (2 pi alpha)^2) with alpha = 0.05
    let cl = 0.1 * std::f64::consts::PI;
    let expected = cl / (0.006 + 0.01 * cl * cl);
    assert!((t.value - expected).abs() < 1e-12);
    assert!((flat_plate_baseline() - expected).abs() < 1e-12);
}

#[test]
fn airfoil_proxy_rewards_camber() {
    let fam = AirfoilFamily::default();
    let flat = airfoil_proxy(&fam.shape_from(0.0, 0.4, 0.12).unwrap().to_design_vector()).unwrap();
    let cambered = airfoil_proxy(&fam.shape_from(0.04, 0.4, 0.12).unwrap().to_design_vector()).unwrap();
    assert!(cambered > flat);
    assert!(airfoil_proxy(&[f64::NAN; 32]).is_err());
    assert!(airfoil_proxy(&[1.0; 3]).is_err());
}

#[test]
fn metasurface_proxy_limits() {
    assert_eq!(metasurface_proxy(&vec![1.0; 256]).unwrap(), 0.0);
    assert_eq!(metasurface_proxy(&vec![-1.0; 256]).unwrap(), 0.0);
    let half: Vec<f64> = (0..256).map(|i| if i % 16 < 8 { -1.0 } else { 1.0 }).collect();
    // half filled, one straight 16-edge boundary: 4 * 0.25 * 1 / 3
    assert!((metasurface_proxy(&half).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!(metasurface_proxy(&[0.0; 10]).is_err());
}

#[test]
fn two_peak_ordering_reverses_under_perturbation() {
    let tp = TwoPeak::default();
    let n = tp.narrow.center;
    let b = tp.broad.center;
    assert!(tp.eval(&n).unwrap() > tp.eval(&b).unwrap());
    let sigma = TwoPeakEmbedding::default().sigma();
    // midpoint-rule integration of E[f(x + d)] over +-6 sigma
    let integrate = |x: [f64; 2]| {
        let m = 241;
        let h = 12.0 * sigma / m as f64;
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                let dx = -6.0 * sigma + (i as f64 + 0.5) * h;
                let dy = -6.0 * sigma + (j as f64 + 0.5) * h;
                let w = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma * sigma);
                acc += w * tp.eval(&[x[0] + dx, x[1] + dy]).unwrap() * h * h;
            }
        }
        acc
    };
    let (en, eb) = (integrate(n), integrate(b));
    assert!(eb > en, "{eb} vs {en}");
    assert!((en - tp.expected(&n, sigma)).abs() < 1e-6);
    assert!((eb - tp.expected(&b, sigma)).abs() < 1e-6);
}

#[test]
fn embedding_perturbation_scale() {
    let e = TwoPeakEmbedding::with_sigma(0.1);
    let bank = SampleBank::draw(e.latent(), 20_000, false, &mut seeded(9)).unwrap();
    let id = QoiFunction::new("x0", |x| Ok(x[0]));
    let s = mc_with_bank(&e, &[0.4, 0.6], &id, &bank).unwrap();
    let (m, v) = estimate_moments(&s.values).unwrap();
    assert!((m - 0.4).abs() < 0.005 && (v.sqrt() - 0.1).abs() < 0.005);
    assert_eq!(e.generate_nominal(&[0.4, 0.6], &[]).unwrap(), vec![0.4, 0.6]);
}

#[test]
fn report_serializes_with_schema_version() {
    let r = UqReport::from_samples(
        "q",
        &[0.5],
        3,
        0.05,
        McSamples {
            values: vec![1.0, 2.0, 3.0],
            failures: 0,
        },
    )
    .unwrap();
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["quantile"], 1.0);
    assert_eq!(v["mean"], 2.0);
}
