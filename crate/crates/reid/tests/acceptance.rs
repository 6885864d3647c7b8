//! Dataset-track acceptance check, run only when a VIPeR manifest is given.
//!
//! Set `REID_VIPER_MANIFEST` to a manifest of the 1,264 VIPeR images (two
//! cameras, 632 identities). Features are extracted in-process; the protocol
//! is 10 random half splits, single-shot, and LOMO+XQDA must reach a mean
//! rank-1 rate of at least 35%.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use reid::extract::extract_manifest;
use reid::{Manifest, RunConfig};
use reid_core::{run_protocol, Method, ProtocolConfig, ShotMode, Views};

const RANK1_FLOOR: f64 = 0.35;

fn viper(path: PathBuf) -> Result<String, String> {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let manifest = Manifest::load(&path).map_err(|e| e.to_string())?;
    let outcome = extract_manifest(&manifest, &cfg, None).map_err(|e| e.to_string())?;
    let cache = outcome.cache.ok_or_else(|| outcome.failures.join("; "))?;
    let cached = cache.to_samples().map_err(|e| e.to_string())?;
    if cached.cameras.len() != 2 {
        return Err(format!("expected two cameras, found {}", cached.cameras.len()));
    }
    let views = Views { probe: 0, gallery: 1 };
    let shared = cached.samples.shared_identities(views).len();
    let protocol = ProtocolConfig { trials: 10, shot: ShotMode::Single, seed: 0, ..Default::default() };
    let report = run_protocol(&cached.samples, views, &Method::Xqda(cfg.xqda.clone()), &protocol)
        .map_err(|e| e.to_string())?;
    let test_ids = report.curves[0].len();
    let rank1 = report.mean_rank(1);
    let detail = format!(
        "{} identities, P = {test_ids}, rank-1 {:.2}% (+/- {:.2}), rank-10 {:.2}%, rank-20 {:.2}%, {:.0}s",
        shared,
        100.0 * rank1,
        100.0 * report.std[0],
        100.0 * report.mean_rank(10),
        100.0 * report.mean_rank(20),
        start.elapsed().as_secs_f64()
    );
    if rank1 >= RANK1_FLOOR {
        Ok(detail)
    } else {
        Err(format!("{detail}; below the {:.0}% floor", 100.0 * RANK1_FLOOR))
    }
}

fn main() -> ExitCode {
    let name = "criterion 11 VIPeR LOMO+XQDA rank-1 >= 35%";
    match std::env::var_os("REID_VIPER_MANIFEST") {
        None => {
            println!("SKIP  {name}: set REID_VIPER_MANIFEST to a VIPeR manifest to run");
            ExitCode::SUCCESS
        }
        Some(path) => match viper(PathBuf::from(path)) {
            Ok(detail) => {
                println!("PASS  {name}: {detail}");
                ExitCode::SUCCESS
            }
            Err(detail) => {
                println!("FAIL  {name}: {detail}");
                ExitCode::FAILURE
            }
        },
    }
}
