//! Exit criteria for the core library. Runs as a plain binary so every
//! criterion prints a PASS/FAIL line; the process fails if any criterion does.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use reid_core::eval::{cmc, run_protocol, Method, ProtocolConfig, ShotMode, Views};
use reid_core::image::average_pool_2x2;
use reid_core::lomo::{extract_lomo, extract_lomo_histograms, level_codes, pyramid};
use reid_core::synth::{random_image, CrossViewBenchmark};
use reid_core::{
    compute_covariances_fast, compute_covariances_naive, lomo_dim, multiscale_retinex,
    siltp_codes, train_kissme, train_xqda, CrossViewDataset, Geometry, GrayImage, LomoConfig,
    RetinexConfig, XqdaConfig, XqdaSpectrum,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random dataset where each of `c` classes has at least one sample per view.
fn random_dataset(rng: &mut ChaCha8Rng, d: usize, c: usize, n: usize, m: usize) -> CrossViewDataset {
    let labels = |rng: &mut ChaCha8Rng, len: usize| -> Vec<usize> {
        (0..len).map(|i| if i < c { i } else { rng.random_range(0..c) }).collect()
    };
    let y = labels(rng, n);
    let l = labels(rng, m);
    CrossViewDataset::new(gaussian(rng, d, n), gaussian(rng, d, m), y, l).unwrap()
}

fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

fn random_datasets() -> Vec<CrossViewDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..50)
        .map(|_| {
            let d = rng.random_range(2..=10);
            let c = rng.random_range(2..=6);
            let n = rng.random_range(c..=40);
            let m = rng.random_range(c..=(2000 / n).min(40));
            random_dataset(&mut rng, d, c, n, m)
        })
        .collect()
}

fn covariance_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for ds in random_datasets() {
        let fast = compute_covariances_fast(&ds).map_err(|e| e.to_string())?;
        let naive = compute_covariances_naive(&ds).map_err(|e| e.to_string())?;
        ensure(fast.n_i == naive.n_i && fast.n_e == naive.n_e, || {
            format!("pair counts differ: fast ({}, {}) naive ({}, {})", fast.n_i, fast.n_e, naive.n_i, naive.n_e)
        })?;
        ensure(fast.n_i + fast.n_e == ds.x().ncols() * ds.z().ncols(), || "n_I + n_E != n m".into())?;
        worst = worst
            .max(rel_frobenius(&fast.sigma_i, &naive.sigma_i))
            .max(rel_frobenius(&fast.sigma_e, &naive.sigma_e));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-10, || format!("relative Frobenius error {worst:.3e} > 1e-10"))?;
    ensure(secs < 10.0, || format!("took {secs:.2}s"))?;
    Ok(format!("50 datasets, worst rel err {worst:.2e}, {secs:.2}s"))
}

fn eigen_residuals() -> Outcome {
    let mut datasets = random_datasets();
    let bench = CrossViewBenchmark::default().generate(7).map_err(|e| e.to_string())?;
    let all: Vec<usize> = (0..100).collect();
    datasets.push(bench.cross_view(Views { probe: 0, gallery: 1 }, &all).map_err(|e| e.to_string())?);

    let cfg = XqdaConfig::default();
    let (mut worst, mut pairs) = (0.0f64, 0usize);
    for ds in &datasets {
        let cov = compute_covariances_fast(ds).map_err(|e| e.to_string())?;
        let spectrum = XqdaSpectrum::solve(&cov, cfg.regularizer).map_err(|e| e.to_string())?;
        let model = train_xqda(ds, &cfg).map_err(|e| e.to_string())?;
        let r = model.subspace_dim();
        let lambdas = model.eigenvalues();
        ensure(lambdas.windows(2).all(|w| w[0] > w[1]), || format!("eigenvalues not strictly descending: {lambdas:?}"))?;
        ensure(r == 1 || lambdas.iter().all(|&l| l > 1.0), || format!("dimension rule violated: {lambdas:?}"))?;
        for (k, &lambda) in lambdas.iter().enumerate().take(r) {
            let w = model.w().column(k).into_owned();
            let ew = spectrum.sigma_e() * &w;
            let iw = spectrum.sigma_i() * &w;
            let resid = (&ew - lambda * iw).norm() / ew.norm();
            worst = worst.max(resid);
            pairs += 1;
        }
    }
    ensure(worst <= 1e-8, || format!("worst relative residual {worst:.3e} > 1e-8"))?;
    Ok(format!("{} models, {pairs} eigenpairs, worst residual {worst:.2e}", datasets.len()))
}

fn full_rank_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 8;
    let ds = random_dataset(&mut rng, d, 12, 60, 60);
    let cov = compute_covariances_naive(&ds).map_err(|e| e.to_string())?;
    // Full-space kernel inv(Σ_I) - inv(Σ_E) through LU inverses, independent
    // of the Cholesky route.
    let kernel = cov.sigma_i.clone().try_inverse().ok_or("Σ_I singular")?
        - cov.sigma_e.clone().try_inverse().ok_or("Σ_E singular")?;

    let xqda = train_xqda(
        &ds,
        &XqdaConfig { regularizer: 0.0, max_dims: None, eigen_threshold: f64::NEG_INFINITY },
    )
    .map_err(|e| e.to_string())?;
    ensure(xqda.subspace_dim() == d, || format!("XQDA kept {} of {d} dims", xqda.subspace_dim()))?;
    let kissme = train_kissme(&ds, Some(d), 0.0).map_err(|e| e.to_string())?;

    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let diff = DVector::from_iterator(d, x.iter().zip(&z).map(|(a, b)| a - b));
        let reference = diff.dot(&(&kernel * &diff));
        let scale = reference.abs().max(f64::MIN_POSITIVE);
        for got in [xqda.distance(&x, &z), kissme.distance(&x, &z)] {
            let got = got.map_err(|e| e.to_string())?;
            worst = worst.max((got - reference).abs() / scale);
        }
    }
    ensure(worst <= 1e-8, || format!("worst relative deviation {worst:.3e} > 1e-8"))?;
    Ok(format!("1000 pairs, worst rel deviation {worst:.2e}"))
}

fn dimension_law() -> Outcome {
    let cfg = LomoConfig::default();
    let grid = cfg.grid(Geometry::new(48, 128)).map_err(|e| e.to_string())?;
    let bands: Vec<usize> = grid.iter().map(|g| g.bands).collect();
    let dim = lomo_dim(&cfg, Geometry::new(48, 128)).map_err(|e| e.to_string())?;
    ensure(dim == 26_960 && bands == [24, 11, 5], || format!("dim {dim}, bands {bands:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..20 {
        let geom = Geometry::new(rng.random_range(40..=72), rng.random_range(40..=160));
        let img = random_image(geom.width, geom.height, i, 0.0, 255.0).map_err(|e| e.to_string())?;
        let expected = lomo_dim(&cfg, geom).map_err(|e| e.to_string())?;
        let got = extract_lomo(&img, &cfg).map_err(|e| e.to_string())?.len();
        ensure(got == expected, || format!("{geom:?}: extracted {got}, lomo_dim {expected}"))?;
    }
    Ok("26,960 = 674 x (24 + 11 + 5); 20 random geometries agree".into())
}

fn siltp_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let data: Vec<f64> = (0..64 * 64).map(|_| rng.random_range(0.0..255.0)).collect();
        let img = GrayImage::new(64, 64, data).map_err(|e| e.to_string())?;
        for &(radius, tau) in &[(3, 0.3), (5, 0.3)] {
            let base = siltp_codes(&img, radius, tau).map_err(|e| e.to_string())?;
            for k in [0.5, 2.0, 3.7] {
                let scaled = siltp_codes(&img.scaled_unclamped(k), radius, tau).map_err(|e| e.to_string())?;
                ensure(scaled == base, || format!("codes differ for k = {k}, radius {radius}"))?;
            }
        }
    }
    Ok("10 images x 2 scales x k in {0.5, 2, 3.7}: identical codes".into())
}

fn retinex_gain() -> Outcome {
    let cfg = RetinexConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        // Darkest value 32: the log(v + 1) shift only cancels a gain for v >> 1.
        let img = random_image(48, 128, 100 + seed, 32.0, 255.0).map_err(|e| e.to_string())?;
        let a = multiscale_retinex(&img, &cfg).map_err(|e| e.to_string())?.image;
        let b = multiscale_retinex(&img.scaled(0.5), &cfg).map_err(|e| e.to_string())?.image;
        for (p, q) in a.pixels().iter().zip(b.pixels()) {
            for k in 0..3 {
                worst = worst.max((p[k] - q[k]).abs());
            }
        }
    }
    ensure(worst <= 1.0, || format!("max deviation {worst:.3} gray levels"))?;
    Ok(format!("10 images, max |MSR(0.5 I) - MSR(I)| = {worst:.3} gray levels"))
}

fn max_pool_dominance() -> Outcome {
    let cfg = LomoConfig::default();
    let mut checked = 0usize;
    for seed in 0..5 {
        let img = random_image(48, 128, 200 + seed, 0.0, 255.0).map_err(|e| e.to_string())?;
        let fv = extract_lomo_histograms(&img, &cfg).map_err(|e| e.to_string())?;
        let levels = pyramid(&img, &cfg).map_err(|e| e.to_string())?;
        // independent check of the pyramid construction
        ensure(
            average_pool_2x2(&levels[0]).map_err(|e| e.to_string())? == levels[1],
            || "pyramid level 1 is not the pooled level 0".into(),
        )?;
        for block in &fv.layout {
            let planes = level_codes(&levels[block.level], &cfg).map_err(|e| e.to_string())?;
            let plane_idx = match block.kind {
                reid_core::lomo::BlockKind::Hsv => 0,
                reid_core::lomo::BlockKind::Siltp { radius } => {
                    1 + cfg.siltp_scales.iter().position(|s| s.0 == radius).unwrap()
                }
            };
            let plane = &planes[plane_idx];
            let y0 = block.band * cfg.stride;
            let mut window_hists: Vec<BTreeMap<u16, usize>> = Vec::new();
            let mut x0 = 0;
            while x0 + cfg.window <= plane.width() {
                let mut tally = BTreeMap::new();
                for y in y0..y0 + cfg.window {
                    for x in x0..x0 + cfg.window {
                        *tally.entry(plane.get(x, y)).or_insert(0) += 1;
                    }
                }
                window_hists.push(tally);
                x0 += cfg.stride;
            }
            let area = (cfg.window * cfg.window) as f64;
            for (bin, &got) in fv.values[block.range()].iter().enumerate() {
                let expected = window_hists
                    .iter()
                    .map(|t| *t.get(&(bin as u16)).unwrap_or(&0) as f64 / area)
                    .fold(0.0, f64::max);
                ensure(got == expected, || {
                    format!("level {} band {} bin {bin}: {got} != {expected}", block.level, block.band)
                })?;
                checked += 1;
            }
        }
        drop(levels);
    }
    Ok(format!("5 images, {checked} band bins match enumerated window maxima exactly"))
}

fn cmc_sanity() -> Outcome {
    let g = 100;
    let ids: Vec<usize> = (0..g).collect();
    let perfect = DMatrix::from_fn(g, g, |i, j| if i == j { 0.0 } else { 1.0 });
    let curve = cmc(&perfect, &ids, &ids).map_err(|e| e.to_string())?;
    ensure(curve.rates.iter().all(|&r| r == 1.0), || "perfect metric not all ones".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let probes = 10_000;
    let scores = DMatrix::from_fn(probes, g, |_, _| rng.random::<f64>());
    let probe_ids: Vec<usize> = (0..probes).map(|i| i % g).collect();
    let curve = cmc(&scores, &probe_ids, &ids).map_err(|e| e.to_string())?;
    let r1 = curve.rank(1);
    ensure((0.005..=0.015).contains(&r1), || format!("random rank-1 {r1}"))?;
    ensure(curve.rates.windows(2).all(|w| w[0] <= w[1]) && curve.rank(g) == 1.0, || "curve not monotone to 1".into())?;
    Ok(format!("perfect = all ones; random rank-1 = {r1:.4}"))
}

fn synthetic_benchmark() -> Outcome {
    let start = Instant::now();
    let samples = CrossViewBenchmark::default().generate(42).map_err(|e| e.to_string())?;
    let cfg = ProtocolConfig { trials: 10, seed: 42, shot: ShotMode::Multi, ..Default::default() };
    let views = Views { probe: 0, gallery: 1 };
    let mut rank1 = Vec::new();
    for method in [
        Method::Xqda(XqdaConfig::default()),
        Method::Kissme { pca_dims: Some(30), regularizer: 0.001 },
        Method::Euclidean,
    ] {
        let report = run_protocol(&samples, views, &method, &cfg).map_err(|e| e.to_string())?;
        rank1.push(report.mean_rank(1));
    }
    let secs = start.elapsed().as_secs_f64();
    let summary = format!(
        "rank-1 xqda {:.2}%, kissme(p=30) {:.2}%, euclidean {:.2}%, {secs:.1}s",
        100.0 * rank1[0],
        100.0 * rank1[1],
        100.0 * rank1[2]
    );
    ensure(rank1[0] > rank1[1] && rank1[1] > rank1[2], || format!("ordering violated: {summary}"))?;
    ensure(rank1[0] - rank1[2] >= 0.10, || format!("margin below 10 points: {summary}"))?;
    ensure(secs < 60.0, || format!("too slow: {summary}"))?;
    Ok(summary)
}

fn throughput() -> Outcome {
    let cfg = LomoConfig::default();
    let images: Vec<_> = (0..100)
        .map(|i| random_image(48, 128, 300 + i, 0.0, 255.0))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    for img in &images {
        extract_lomo(img, &cfg).map_err(|e| e.to_string())?;
    }
    let per_image = start.elapsed().as_secs_f64() / images.len() as f64;
    ensure(per_image <= 0.1, || format!("{per_image:.4}s per image"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (d, n) = (600, 632);
    let labels: Vec<usize> = (0..n).collect();
    let ds = CrossViewDataset::new(gaussian(&mut rng, d, n), gaussian(&mut rng, d, n), labels.clone(), labels)
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let model = train_xqda(&ds, &XqdaConfig::default()).map_err(|e| e.to_string())?;
    let train_secs = start.elapsed().as_secs_f64();
    ensure(train_secs <= 30.0, || format!("XQDA training took {train_secs:.2}s"))?;
    Ok(format!(
        "LOMO {:.1} ms/image; XQDA d=600 n=m=632 in {train_secs:.2}s (r = {})",
        per_image * 1e3,
        model.subspace_dim()
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 covariance oracle equivalence", covariance_oracle),
        ("2 eigen residuals and dimension rule", eigen_residuals),
        ("3 full-rank XQDA/KISSME/quadratic-distance equivalence", full_rank_equivalence),
        ("4 descriptor dimension law", dimension_law),
        ("5 SILTP gain invariance", siltp_invariance),
        ("6 Retinex gain invariance", retinex_gain),
        ("7 max-pool dominance", max_pool_dominance),
        ("8 CMC sanity", cmc_sanity),
        ("9 synthetic cross-view benchmark", synthetic_benchmark),
        ("10 throughput", throughput),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
