use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use reid_core::synth::{random_image, CrossViewBenchmark};
use reid_core::{
    multiscale_retinex, run_dimension_sweep, run_fixed_protocol, run_protocol, train_xqda, Method, Report,
    ShotMode, Views,
};

use reid::cache::CachedSamples;
use reid::extract::{describe, extract_manifest, timing_summary};
use reid::report::{cmc_csv, cmc_svg, rank_table, sweep_csv};
use reid::{load_image, save_image, FeatureCache, Manifest, Result, RunConfig, SavedModel, ToolError};

#[derive(Parser)]
#[command(name = "reid", version, about = "LOMO descriptors and XQDA metric learning for person re-identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract LOMO features for every manifest image into a feature cache.
    Extract {
        manifest: PathBuf,
        cache: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Worker threads (default: logical CPUs).
        #[arg(long)]
        threads: Option<usize>,
        /// Also write each resized image's Retinex output as PPM into this directory.
        #[arg(long, value_name = "DIR")]
        dump_retinex: Option<PathBuf>,
    },
    /// Train a metric on all identities shared by the two views and save it.
    Train {
        cache: PathBuf,
        model: PathBuf,
        #[command(flatten)]
        common: Common,
        /// xqda, kissme or mahalanobis.
        #[arg(long, default_value = "xqda")]
        method: String,
        #[command(flatten)]
        learn: LearnFlags,
        #[command(flatten)]
        views: ViewFlags,
    },
    /// Run the split/train/score protocol and write `<out>.csv` and `<out>.svg`.
    Eval {
        cache: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Comma-separated methods: xqda, kissme, mahalanobis, euclidean, cosine.
        #[arg(long, default_value = "xqda")]
        method: String,
        /// Score a saved model on each trial's test split instead of training.
        #[arg(long, conflicts_with_all = ["method", "sweep_dims"])]
        model: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_parser = ["single", "multi"])]
        shot: Option<String>,
        /// Re-run XQDA at these subspace sizes; writes one CSV row per size.
        #[arg(long, value_delimiter = ',', value_name = "R,R,...")]
        sweep_dims: Option<Vec<usize>>,
        #[command(flatten)]
        learn: LearnFlags,
        #[command(flatten)]
        views: ViewFlags,
    },
    /// Apply multiscale Retinex to one image (PNG output for `.png`, PPM otherwise).
    Retinex {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Descriptor throughput, XQDA training time and the synthetic cross-view benchmark.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Random images for the throughput run.
        #[arg(long, default_value_t = 200)]
        images: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct LearnFlags {
    /// Covariance regularizer.
    #[arg(long)]
    reg: Option<f64>,
    /// Fixed XQDA subspace size (overrides the eigenvalue threshold).
    #[arg(long)]
    dims: Option<usize>,
    /// XQDA eigenvalue threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// PCA size for KISSME and Mahalanobis.
    #[arg(long)]
    pca_dims: Option<usize>,
}

#[derive(Args)]
struct ViewFlags {
    #[arg(long)]
    probe_cam: Option<String>,
    #[arg(long)]
    gallery_cam: Option<String>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.protocol.seed = seed;
        }
        Ok(cfg)
    }
}

impl LearnFlags {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(reg) = self.reg {
            cfg.xqda.regularizer = reg;
        }
        if let Some(dims) = self.dims {
            if dims == 0 {
                return Err(ToolError::Usage("--dims must be positive".into()));
            }
            cfg.xqda.max_dims = Some(dims);
            cfg.xqda.eigen_threshold = f64::NEG_INFINITY;
        }
        if let Some(t) = self.threshold {
            cfg.xqda.eigen_threshold = t;
        }
        if let Some(p) = self.pca_dims {
            cfg.pca_dims = Some(p);
        }
        cfg.xqda.validate().map_err(|e| ToolError::Usage(e.to_string()))
    }
}

fn method_from_name(name: &str, cfg: &RunConfig) -> Result<Method> {
    let reg = cfg.xqda.regularizer;
    Ok(match name.trim() {
        "xqda" => Method::Xqda(cfg.xqda.clone()),
        "kissme" => Method::Kissme { pca_dims: cfg.pca_dims, regularizer: reg },
        "mahalanobis" => Method::Mahalanobis { pca_dims: cfg.pca_dims, regularizer: reg },
        "euclidean" => Method::Euclidean,
        "cosine" => Method::Cosine,
        other => return Err(ToolError::Usage(format!("unknown method `{other}`"))),
    })
}

/// Probe/gallery cameras from the flags, defaulting to the first two cameras
/// in cache order.
fn resolve_views(cached: &CachedSamples, flags: &ViewFlags) -> Result<Views> {
    if cached.cameras.len() < 2 {
        return Err(ToolError::Data("cross-view runs need at least two cameras".into()));
    }
    let probe = match &flags.probe_cam {
        Some(name) => cached.camera_index(name)?,
        None => 0,
    };
    let gallery = match &flags.gallery_cam {
        Some(name) => cached.camera_index(name)?,
        None => (0..cached.cameras.len()).find(|&c| c != probe).expect("two cameras"),
    };
    if probe == gallery {
        return Err(ToolError::Usage("probe and gallery cameras must differ".into()));
    }
    if cached.cameras.len() > 2 && (flags.probe_cam.is_none() || flags.gallery_cam.is_none()) {
        eprintln!(
            "note: {} cameras in cache; using probe `{}` and gallery `{}`",
            cached.cameras.len(),
            cached.cameras[probe],
            cached.cameras[gallery]
        );
    }
    Ok(Views { probe, gallery })
}

fn load_samples(path: &Path, cfg: &RunConfig) -> Result<CachedSamples> {
    let cache = FeatureCache::load(path)?;
    cache.check_digest(&cfg.feature_digest())?;
    cache.to_samples()
}

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = OsString::from(prefix.as_os_str());
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| ToolError::Io { path: path.to_path_buf(), source })
}

fn cmd_extract(manifest: &Path, out: &Path, common: &Common, threads: Option<usize>, dump: Option<&Path>) -> Result<()> {
    let cfg = common.config()?;
    let manifest = Manifest::load(manifest)?;
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir).map_err(|source| ToolError::Io { path: dir.to_path_buf(), source })?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| ToolError::Usage(e.to_string()))?;
    let start = Instant::now();
    let outcome = pool.install(|| extract_manifest(&manifest, &cfg, dump))?;
    let wall = start.elapsed();
    for failure in &outcome.failures {
        eprintln!("error: {failure}");
    }
    if let Some((mean, p95)) = timing_summary(&outcome.timings) {
        println!(
            "extracted {} images in {:.2?} ({} threads); per image: mean {:.2} ms, p95 {:.2} ms",
            outcome.timings.len(),
            wall,
            pool.current_num_threads(),
            mean.as_secs_f64() * 1e3,
            p95.as_secs_f64() * 1e3
        );
    }
    match outcome.cache {
        Some(cache) => {
            cache.save(out)?;
            println!("wrote {} records of dimension {} to {}", cache.records.len(), cache.dim, out.display());
            Ok(())
        }
        None => Err(ToolError::Data(format!(
            "{} of {} images failed; no cache written",
            outcome.failures.len(),
            manifest.entries.len()
        ))),
    }
}

fn cmd_train(cache: &Path, out: &Path, common: &Common, method: &str, learn: &LearnFlags, views: &ViewFlags) -> Result<()> {
    let mut cfg = common.config()?;
    learn.apply(&mut cfg)?;
    let method = match method {
        "xqda" | "kissme" | "mahalanobis" => method_from_name(method, &cfg)?,
        other => return Err(ToolError::Usage(format!("cannot train `{other}`; use xqda, kissme or mahalanobis"))),
    };
    let cached = load_samples(cache, &cfg)?;
    let views = resolve_views(&cached, views)?;
    let ids = cached.samples.shared_identities(views);
    let ds = cached.samples.cross_view(views, &ids)?;
    println!(
        "training {} on {} identities ({} probe / {} gallery samples, d = {}), regularizer {}",
        method.name(),
        ids.len(),
        ds.x().ncols(),
        ds.z().ncols(),
        ds.dim(),
        cfg.xqda.regularizer
    );
    let start = Instant::now();
    let trained = method.train(&ds)?;
    let wall = start.elapsed();
    let model = SavedModel::from_trained(trained).expect("trainable methods produce a model");
    match &model {
        SavedModel::Xqda(m) => {
            let head: Vec<String> = m.eigenvalues().iter().take(10).map(|l| format!("{l:.4}")).collect();
            println!("r = {}", m.subspace_dim());
            println!("leading eigenvalues: {}", head.join(" "));
        }
        SavedModel::Metric(m) => {
            println!("metric dimension {} (PCA {})", m.m.nrows(), if m.pca.is_some() { "on" } else { "off" });
        }
    }
    println!("training time {:.3} s", wall.as_secs_f64());
    model.save(out)?;
    println!("wrote {}", out.display());
    Ok(())
}

struct EvalArgs<'a> {
    cache: &'a Path,
    out: &'a Path,
    common: &'a Common,
    method: &'a str,
    model: Option<&'a Path>,
    trials: Option<usize>,
    shot: Option<&'a str>,
    sweep: Option<&'a [usize]>,
    learn: &'a LearnFlags,
    views: &'a ViewFlags,
}

fn cmd_eval(a: EvalArgs<'_>) -> Result<()> {
    let mut cfg = a.common.config()?;
    a.learn.apply(&mut cfg)?;
    if let Some(t) = a.trials {
        cfg.protocol.trials = t;
    }
    if let Some(shot) = a.shot {
        cfg.protocol.shot = reid::config::parse_shot(shot)?;
    }
    cfg.validate()?;
    let cached = load_samples(a.cache, &cfg)?;
    let views = resolve_views(&cached, a.views)?;
    let shot = match cfg.protocol.shot {
        ShotMode::Single => "single",
        ShotMode::Multi => "multi",
    };
    println!(
        "probe `{}` vs gallery `{}`, {} trials, {shot}-shot, seed {}",
        cached.cameras[views.probe], cached.cameras[views.gallery], cfg.protocol.trials, cfg.protocol.seed
    );

    if let Some(dims) = a.sweep {
        let sweep = run_dimension_sweep(&cached.samples, views, &cfg.xqda, dims, &cfg.protocol)?;
        let path = with_extension(a.out, "csv");
        write_file(&path, &sweep_csv(&sweep))?;
        println!("{:>6}  {:>8}", "r", "rank-1");
        for (r, rep) in &sweep {
            println!("{r:>6}  {:>7.2}%", 100.0 * rep.mean_rank(1));
        }
        println!("wrote {}", path.display());
        return Ok(());
    }

    let reports: Vec<Report> = match a.model {
        Some(path) => {
            let model = SavedModel::load(path)?;
            let name = model.name();
            vec![run_fixed_protocol(&cached.samples, views, &model.into_trained(), name, &cfg.protocol)?]
        }
        None => {
            let methods: Vec<Method> =
                a.method.split(',').map(|m| method_from_name(m, &cfg)).collect::<Result<_>>()?;
            methods
                .par_iter()
                .map(|m| run_protocol(&cached.samples, views, m, &cfg.protocol).map_err(ToolError::from))
                .collect::<Result<_>>()?
        }
    };
    let csv = with_extension(a.out, "csv");
    let svg = with_extension(a.out, "svg");
    write_file(&csv, &cmc_csv(&reports))?;
    write_file(&svg, &cmc_svg(&reports))?;
    print!("{}", rank_table(&reports));
    for r in &reports {
        if !r.subspace_dims.is_empty() {
            let dims: Vec<String> = r.subspace_dims.iter().map(usize::to_string).collect();
            println!("{} subspace sizes per trial: {}", r.method, dims.join(" "));
        }
    }
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}

fn cmd_retinex(input: &Path, output: &Path, common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let img = load_image(input)?;
    let out = multiscale_retinex(&img, &cfg.lomo.retinex)?;
    if out.degenerate_stretch {
        eprintln!("note: flat Retinex response; output is mid-gray");
    }
    save_image(output, &out.image).map_err(|source| ToolError::Io { path: output.to_path_buf(), source })?;
    println!("wrote {}", output.display());
    Ok(())
}

fn cmd_bench(common: &Common, images: usize, trials: usize) -> Result<()> {
    let cfg = common.config()?;
    let seed = cfg.protocol.seed;
    let g = cfg.geometry;
    let imgs: Vec<_> = (0..images.max(1) as u64)
        .map(|i| random_image(g.width, g.height, seed.wrapping_add(i), 0.0, 255.0))
        .collect::<reid_core::Result<_>>()?;

    let start = Instant::now();
    for img in &imgs {
        describe(img, &cfg)?;
    }
    let serial = start.elapsed();
    let start = Instant::now();
    imgs.par_iter().map(|img| describe(img, &cfg).map(drop)).collect::<Result<()>>()?;
    let parallel = start.elapsed();
    println!(
        "LOMO {}x{} ({} dims): {:.2} ms/image single-threaded, {:.1} images/s on {} threads",
        g.height,
        g.width,
        reid_core::lomo_dim(&cfg.lomo, g)?,
        serial.as_secs_f64() * 1e3 / imgs.len() as f64,
        imgs.len() as f64 / parallel.as_secs_f64(),
        rayon::current_num_threads()
    );

    let bench = CrossViewBenchmark::default();
    let samples = bench.generate(seed)?;
    let ids = samples.shared_identities(Views { probe: 0, gallery: 1 });
    let ds = samples.cross_view(Views { probe: 0, gallery: 1 }, &ids)?;
    let start = Instant::now();
    let model = train_xqda(&ds, &cfg.xqda)?;
    println!(
        "XQDA on {} samples of dimension {}: r = {} in {:.3} s",
        ds.x().ncols() + ds.z().ncols(),
        ds.dim(),
        model.subspace_dim(),
        start.elapsed().as_secs_f64()
    );

    let mut protocol = cfg.protocol.clone();
    protocol.trials = trials;
    protocol.shot = ShotMode::Multi;
    // The benchmark has 50 dimensions; KISSME keeps 30 principal components.
    let methods = [
        Method::Xqda(cfg.xqda.clone()),
        Method::Kissme { pca_dims: Some(30), regularizer: cfg.xqda.regularizer },
        Method::Euclidean,
    ];
    let reports: Vec<Report> = methods
        .par_iter()
        .map(|m| run_protocol(&samples, Views { probe: 0, gallery: 1 }, m, &protocol).map_err(ToolError::from))
        .collect::<Result<_>>()?;
    println!(
        "synthetic cross-view benchmark ({} identities, d = {}, {} trials, multi-shot):",
        bench.identities, bench.dim, trials
    );
    print!("{}", rank_table(&reports));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Extract { manifest, cache, common, threads, dump_retinex } => {
            cmd_extract(manifest, cache, common, *threads, dump_retinex.as_deref())
        }
        Command::Train { cache, model, common, method, learn, views } => {
            cmd_train(cache, model, common, method, learn, views)
        }
        Command::Eval { cache, out, common, method, model, trials, shot, sweep_dims, learn, views } => {
            cmd_eval(EvalArgs {
                cache,
                out,
                common,
                method,
                model: model.as_deref(),
                trials: *trials,
                shot: shot.as_deref(),
                sweep: sweep_dims.as_deref(),
                learn,
                views,
            })
        }
        Command::Retinex { input, output, common } => cmd_retinex(input, output, common),
        Command::Bench { common, images, trials } => cmd_bench(common, *images, *trials),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
