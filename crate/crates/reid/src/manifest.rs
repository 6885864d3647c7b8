//! CSV manifest with header `image_path,person_id,camera_id`.
//!
//! Relative image paths are resolved against the manifest's directory. A
//! manifest for a folder of `<person>_<camera>_*.png` files can be made with
//!
//! ```text
//! (echo image_path,person_id,camera_id; for f in *.png; do
//!     IFS=_ read p c _ <<< "$f"; echo "$f,$p,$c"; done) > manifest.csv
//! ```

use std::collections::HashSet;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::error::{Result, ToolError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image_path: PathBuf,
    pub person_id: String,
    pub camera_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(ToolError::io(path))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_reader(file, base).map_err(|e| match e {
            ToolError::Data(msg) => ToolError::Data(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_reader(reader: impl Read, base: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| ToolError::Data(e.to_string()))?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| ToolError::Data(format!("manifest header lacks `{name}` column")))
        };
        let (ip, pp, cp) = (column("image_path")?, column("person_id")?, column("camera_id")?);

        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| ToolError::Data(e.to_string()))?;
            let field = |i: usize| record.get(i).unwrap_or("").to_string();
            let (raw_path, person_id, camera_id) = (field(ip), field(pp), field(cp));
            if raw_path.is_empty() || person_id.is_empty() || camera_id.is_empty() {
                return Err(ToolError::Data(format!("manifest row {} has an empty field", row + 2)));
            }
            let image_path = base.join(&raw_path);
            if !seen.insert(image_path.clone()) {
                return Err(ToolError::Data(format!("duplicate manifest path {raw_path}")));
            }
            entries.push(ManifestEntry { image_path, person_id, camera_id });
        }
        if entries.is_empty() {
            return Err(ToolError::Data("manifest has no rows".into()));
        }
        Ok(Self { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_columns_in_any_order() {
        let text = "camera_id,image_path,person_id\na,x/1.png,7\nb, x/2.png ,7\n";
        let m = Manifest::from_reader(text.as_bytes(), Path::new("/data")).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[1].image_path, Path::new("/data/x/2.png"));
        assert_eq!(m.entries[1].camera_id, "b");
        assert_eq!(m.entries[0].person_id, "7");
    }

    #[test]
    fn rejects_duplicates_missing_columns_and_empty_manifests() {
        let dup = "image_path,person_id,camera_id\na.png,1,a\na.png,1,b\n";
        assert!(Manifest::from_reader(dup.as_bytes(), Path::new("")).is_err());
        let nocam = "image_path,person_id\na.png,1\n";
        assert!(Manifest::from_reader(nocam.as_bytes(), Path::new("")).is_err());
        let empty = "image_path,person_id,camera_id\n";
        assert!(Manifest::from_reader(empty.as_bytes(), Path::new("")).is_err());
    }
}
