//! Binary feature cache.
//!
//! Little-endian layout:
//!
//! ```text
//! "LOMO" | version u16 | dim u32 | count u32 | width u16 | height u16 | digest [u8; 32]
//! count × ( person_len u32 | person utf-8 | camera_len u32 | camera utf-8 | dim × f32 )
//! ```

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use reid_core::{Geometry, LabeledSamples};

use crate::error::{Result, ToolError};

pub const CACHE_MAGIC: [u8; 4] = *b"LOMO";
pub const CACHE_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CacheRecord {
    pub person_id: String,
    pub camera_id: String,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCache {
    pub geometry: Geometry,
    pub digest: [u8; 32],
    pub dim: usize,
    pub records: Vec<CacheRecord>,
}

/// Samples decoded from a cache, with the string labels behind each index.
#[derive(Debug, Clone)]
pub struct CachedSamples {
    pub samples: LabeledSamples,
    pub persons: Vec<String>,
    pub cameras: Vec<String>,
}

impl CachedSamples {
    pub fn camera_index(&self, name: &str) -> Result<usize> {
        self.cameras.iter().position(|c| c == name).ok_or_else(|| {
            ToolError::Data(format!("camera `{name}` not in cache (have: {})", self.cameras.join(", ")))
        })
    }
}

fn corrupt(detail: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, detail.into())
}

fn read_array<const N: usize>(r: &mut impl Read) -> io::Result<[u8; N]> {
    let mut buf = [0; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_string(r: &mut impl Read) -> io::Result<String> {
    let len = u32::from_le_bytes(read_array(r)?) as usize;
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(io::ErrorKind::UnexpectedEof.into());
    }
    String::from_utf8(buf).map_err(|_| corrupt("label is not valid UTF-8"))
}

fn write_string(w: &mut impl Write, s: &str) -> io::Result<()> {
    let len = u32::try_from(s.len()).map_err(|_| corrupt("label too long"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())
}

impl FeatureCache {
    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        let too_big = |what: &str| corrupt(format!("{what} does not fit the cache header"));
        let dim = u32::try_from(self.dim).map_err(|_| too_big("dimension"))?;
        let count = u32::try_from(self.records.len()).map_err(|_| too_big("record count"))?;
        let width = u16::try_from(self.geometry.width).map_err(|_| too_big("width"))?;
        let height = u16::try_from(self.geometry.height).map_err(|_| too_big("height"))?;
        w.write_all(&CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&dim.to_le_bytes())?;
        w.write_all(&count.to_le_bytes())?;
        w.write_all(&width.to_le_bytes())?;
        w.write_all(&height.to_le_bytes())?;
        w.write_all(&self.digest)?;
        let mut buf = Vec::with_capacity(self.dim * 4);
        for rec in &self.records {
            if rec.values.len() != self.dim {
                return Err(corrupt(format!("record has {} values, cache dim is {}", rec.values.len(), self.dim)));
            }
            write_string(&mut w, &rec.person_id)?;
            write_string(&mut w, &rec.camera_id)?;
            buf.clear();
            buf.extend(rec.values.iter().flat_map(|v| v.to_le_bytes()));
            w.write_all(&buf)?;
        }
        w.flush()
    }

    pub fn read_from(mut r: impl Read) -> io::Result<Self> {
        if read_array::<4>(&mut r)? != CACHE_MAGIC {
            return Err(corrupt("not a feature cache (bad magic)"));
        }
        let version = u16::from_le_bytes(read_array(&mut r)?);
        if version != CACHE_VERSION {
            return Err(corrupt(format!("unsupported cache version {version}")));
        }
        let dim = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let count = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let width = u16::from_le_bytes(read_array(&mut r)?) as usize;
        let height = u16::from_le_bytes(read_array(&mut r)?) as usize;
        let digest = read_array::<32>(&mut r)?;
        let mut records = Vec::with_capacity(count.min(1 << 16));
        let mut raw = vec![0u8; dim * 4];
        for _ in 0..count {
            let person_id = read_string(&mut r)?;
            let camera_id = read_string(&mut r)?;
            r.read_exact(&mut raw)?;
            let values = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
            records.push(CacheRecord { person_id, camera_id, values });
        }
        if r.read(&mut [0u8])? != 0 {
            return Err(corrupt("trailing bytes after the last record"));
        }
        Ok(Self { geometry: Geometry::new(width, height), digest, dim, records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(ToolError::io(path))?;
        self.write_to(io::BufWriter::new(file)).map_err(ToolError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(ToolError::io(path))?;
        Self::read_from(io::BufReader::new(file)).map_err(|e| {
            ToolError::Data(format!("{}: corrupt feature cache: {e}", path.display()))
        })
    }

    /// Hard error when the cache was produced under different feature settings.
    pub fn check_digest(&self, expected: &[u8; 32]) -> Result<()> {
        if &self.digest != expected {
            return Err(ToolError::Data(format!(
                "feature cache digest {} does not match the requested configuration {}; \
                 re-extract or pass the config used for extraction",
                hex(&self.digest),
                hex(expected)
            )));
        }
        Ok(())
    }

    /// Features as `f64` columns; string labels are numbered by first appearance.
    pub fn to_samples(&self) -> Result<CachedSamples> {
        fn intern(map: &mut HashMap<String, usize>, names: &mut Vec<String>, key: &str) -> usize {
            *map.entry(key.to_string()).or_insert_with(|| {
                names.push(key.to_string());
                names.len() - 1
            })
        }
        let (mut pmap, mut cmap) = (HashMap::new(), HashMap::new());
        let (mut persons, mut cameras) = (Vec::new(), Vec::new());
        let mut person = Vec::with_capacity(self.records.len());
        let mut camera = Vec::with_capacity(self.records.len());
        for rec in &self.records {
            person.push(intern(&mut pmap, &mut persons, &rec.person_id));
            camera.push(intern(&mut cmap, &mut cameras, &rec.camera_id));
        }
        let features = DMatrix::from_iterator(
            self.dim,
            self.records.len(),
            self.records.iter().flat_map(|r| r.values.iter().map(|&v| v as f64)),
        );
        let samples = LabeledSamples::new(features, person, camera)?;
        Ok(CachedSamples { samples, persons, cameras })
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureCache {
        FeatureCache {
            geometry: Geometry::new(48, 128),
            digest: [7; 32],
            dim: 3,
            records: vec![
                CacheRecord { person_id: "p1".into(), camera_id: "a".into(), values: vec![0.5, -1.0, 2.0] },
                CacheRecord { person_id: "p2".into(), camera_id: "b".into(), values: vec![0.0, 1.0, 1e-3] },
                CacheRecord { person_id: "p1".into(), camera_id: "b".into(), values: vec![3.0, 3.0, 3.0] },
            ],
        }
    }

    #[test]
    fn header_layout() {
        let mut bytes = Vec::new();
        sample().write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"LOMO");
        assert_eq!(&bytes[4..6], &1u16.to_le_bytes());
        assert_eq!(&bytes[6..10], &3u32.to_le_bytes());
        assert_eq!(&bytes[10..14], &3u32.to_le_bytes());
        assert_eq!(&bytes[14..16], &48u16.to_le_bytes());
        assert_eq!(&bytes[16..18], &128u16.to_le_bytes());
        assert_eq!(&bytes[18..50], &[7; 32]);
        assert_eq!(bytes.len(), 50 + 3 * (4 + 2 + 4 + 1 + 12));
    }

    #[test]
    fn truncation_and_trailing_bytes_are_errors() {
        let mut bytes = Vec::new();
        sample().write_to(&mut bytes).unwrap();
        assert!(FeatureCache::read_from(&bytes[..bytes.len() - 1]).is_err());
        bytes.push(0);
        assert!(FeatureCache::read_from(&bytes[..]).is_err());
    }

    #[test]
    fn labels_are_numbered_by_first_appearance() {
        let s = sample().to_samples().unwrap();
        assert_eq!(s.samples.person, [0, 1, 0]);
        assert_eq!(s.samples.camera, [0, 1, 1]);
        assert_eq!(s.persons, ["p1", "p2"]);
        assert_eq!(s.camera_index("b").unwrap(), 1);
        assert!(s.camera_index("c").is_err());
        assert_eq!(s.samples.features[(2, 1)], 1e-3f32 as f64);
    }

    #[test]
    fn digest_mismatch_is_rejected() {
        let cache = sample();
        assert!(cache.check_digest(&[7; 32]).is_ok());
        assert!(cache.check_digest(&[8; 32]).is_err());
    }
}
