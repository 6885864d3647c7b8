//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Recognised keys:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `width`, `height` | image geometry after resizing | 48, 128 |
//! | `window`, `stride` | sliding window side and step | 10, 5 |
//! | `pyramid_levels` | number of scales | 3 |
//! | `siltp_scales` | `radius:tau` list | `3:0.3,5:0.3` |
//! | `hsv_bins` | bins per H,S,V channel | `8,8,8` |
//! | `retinex_sigmas` | surround scales | `5,20` |
//! | `retinex_low`, `retinex_high` | output stretch range | 0, 255 |
//! | `regularizer` | added to the intrapersonal covariance diagonal | 0.001 |
//! | `eigen_threshold` | keep eigenvalues above this | 1 |
//! | `max_dims` | cap on the subspace size, or `none` | none |
//! | `trials` | evaluation repeats | 10 |
//! | `train_fraction` / `train_count` | identity split rule | 0.5 |
//! | `shot` | `single` or `multi` | single |
//! | `seed` | protocol seed | 0 |
//! | `pca_dims` | PCA size for KISSME/Mahalanobis, or `none` | 100 |

use std::fmt::Write as _;
use std::path::Path;

use reid_core::{Geometry, LomoConfig, ProtocolConfig, ShotMode, SplitRule, XqdaConfig};
use sha2::{Digest, Sha256};

use crate::error::{Result, ToolError};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub lomo: LomoConfig,
    pub xqda: XqdaConfig,
    pub protocol: ProtocolConfig,
    pub pca_dims: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: Geometry::default(),
            lomo: LomoConfig::default(),
            xqda: XqdaConfig::default(),
            protocol: ProtocolConfig::default(),
            pca_dims: Some(100),
        }
    }
}

fn bad(key: &str, value: &str, expected: &str) -> ToolError {
    ToolError::Usage(format!("config key `{key}`: cannot parse `{value}` as {expected}"))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str, expected: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, expected))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, expected: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse(key, v.trim(), expected)).collect()
}

fn parse_optional(key: &str, value: &str) -> Result<Option<usize>> {
    if value.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        parse(key, value, "a count or `none`").map(Some)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(ToolError::io(path))?;
        Self::parse(&text).map_err(|e| match e {
            ToolError::Usage(msg) => ToolError::Usage(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| ToolError::Usage(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        const COUNT: &str = "a non-negative integer";
        const REAL: &str = "a number";
        match key {
            "width" => self.geometry.width = parse(key, value, COUNT)?,
            "height" => self.geometry.height = parse(key, value, COUNT)?,
            "window" => self.lomo.window = parse(key, value, COUNT)?,
            "stride" => self.lomo.stride = parse(key, value, COUNT)?,
            "pyramid_levels" => self.lomo.pyramid_levels = parse(key, value, COUNT)?,
            "siltp_scales" => {
                self.lomo.siltp_scales = value
                    .split(',')
                    .map(|pair| {
                        let (r, tau) = pair.trim().split_once(':').ok_or_else(|| bad(key, value, "`radius:tau` pairs"))?;
                        Ok((parse(key, r.trim(), COUNT)?, parse(key, tau.trim(), REAL)?))
                    })
                    .collect::<Result<_>>()?;
            }
            "hsv_bins" => {
                let bins: Vec<usize> = parse_list(key, value, "three counts")?;
                self.lomo.hsv_bins = bins.try_into().map_err(|_| bad(key, value, "three counts"))?;
            }
            "retinex_sigmas" => self.lomo.retinex.sigmas = parse_list(key, value, "a list of numbers")?,
            "retinex_low" => self.lomo.retinex.output_low = parse(key, value, REAL)?,
            "retinex_high" => self.lomo.retinex.output_high = parse(key, value, REAL)?,
            "regularizer" => self.xqda.regularizer = parse(key, value, REAL)?,
            "eigen_threshold" => self.xqda.eigen_threshold = parse(key, value, REAL)?,
            "max_dims" => self.xqda.max_dims = parse_optional(key, value)?,
            "trials" => self.protocol.trials = parse(key, value, COUNT)?,
            "train_fraction" => self.protocol.split = SplitRule::TrainFraction(parse(key, value, REAL)?),
            "train_count" => self.protocol.split = SplitRule::TrainCount(parse(key, value, COUNT)?),
            "shot" => self.protocol.shot = parse_shot(value)?,
            "seed" => self.protocol.seed = parse(key, value, "an unsigned 64-bit integer")?,
            "pca_dims" => self.pca_dims = parse_optional(key, value)?,
            _ => return Err(ToolError::Usage(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let check = |r: reid_core::Result<()>| r.map_err(|e| ToolError::Usage(e.to_string()));
        check(self.lomo.validate())?;
        check(self.xqda.validate())?;
        check(self.protocol.validate())?;
        if self.geometry.width > u16::MAX as usize || self.geometry.height > u16::MAX as usize {
            return Err(ToolError::Usage("geometry must fit in 16 bits per side".into()));
        }
        check(reid_core::lomo_dim(&self.lomo, self.geometry).map(drop))
    }

    /// SHA-256 over a canonical rendering of every setting that shapes the
    /// feature layout. Floats are hashed by bit pattern.
    pub fn feature_digest(&self) -> [u8; 32] {
        let l = &self.lomo;
        let mut text = String::new();
        let _ = writeln!(text, "geometry {} {}", self.geometry.width, self.geometry.height);
        let _ = writeln!(text, "window {} stride {} levels {}", l.window, l.stride, l.pyramid_levels);
        for (r, tau) in &l.siltp_scales {
            let _ = writeln!(text, "siltp {r} {:016x}", tau.to_bits());
        }
        let _ = writeln!(text, "hsv {:?}", l.hsv_bins);
        for s in &l.retinex.sigmas {
            let _ = writeln!(text, "sigma {:016x}", s.to_bits());
        }
        let _ = writeln!(
            text,
            "stretch {:016x} {:016x}",
            l.retinex.output_low.to_bits(),
            l.retinex.output_high.to_bits()
        );
        Sha256::digest(text.as_bytes()).into()
    }
}

pub fn parse_shot(value: &str) -> Result<ShotMode> {
    match value {
        "single" => Ok(ShotMode::Single),
        "multi" => Ok(ShotMode::Multi),
        _ => Err(ToolError::Usage(format!("shot must be `single` or `multi`, got `{value}`"))),
    }
}
