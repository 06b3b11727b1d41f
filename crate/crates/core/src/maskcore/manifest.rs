use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{decode_mask, MaskError, Palette};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl FromStr for Split {
    type Err = MaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(MaskError::InvalidManifest(format!("unknown split '{other}'"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_path: String,
    pub mask_path: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifestViolation {
    DuplicateAcrossSplits { image_path: String, splits: Vec<Split> },
    MissingFile { path: String },
    UndecodableMask { mask_path: String, reason: String },
}

impl fmt::Display for ManifestViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifestViolation::DuplicateAcrossSplits { image_path, splits } => {
                let names: Vec<String> = splits.iter().map(Split::to_string).collect();
                write!(f, "{image_path}: listed in several splits ({})", names.join(", "))
            }
            ManifestViolation::MissingFile { path } => write!(f, "{path}: file not found"),
            ManifestViolation::UndecodableMask { mask_path, reason } => {
                write!(f, "{mask_path}: mask does not decode: {reason}")
            }
        }
    }
}

/// Parses `image_path<delim>mask_path<delim>split` records.
///
/// Lines starting with `#` are comments. A leading `image_path,...` header is skipped.
pub fn parse_manifest(text: &str, delimiter: u8) -> Result<Vec<ManifestEntry>, MaskError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut entries = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| MaskError::InvalidManifest(e.to_string()))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if n == 0 && record.get(0) == Some("image_path") {
            continue;
        }
        if record.len() != 3 {
            let line = record.position().map_or(0, |p| p.line());
            return Err(MaskError::InvalidManifest(format!("line {line}: expected 3 fields, found {}", record.len())));
        }
        entries.push(ManifestEntry {
            image_path: record[0].to_string(),
            mask_path: record[1].to_string(),
            split: record[2].parse()?,
        });
    }
    Ok(entries)
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Checks split disjointness, file existence and mask decodability.
///
/// Relative paths resolve against `base_dir`. An empty result means the manifest is clean.
pub fn validate_manifest(
    entries: &[ManifestEntry],
    base_dir: &Path,
    palette: &Palette,
    tolerance: u32,
) -> Vec<ManifestViolation> {
    let mut violations = Vec::new();

    let mut splits_by_image: BTreeMap<&str, Vec<Split>> = BTreeMap::new();
    for e in entries {
        let splits = splits_by_image.entry(e.image_path.as_str()).or_default();
        if !splits.contains(&e.split) {
            splits.push(e.split);
        }
    }
    for (image_path, mut splits) in splits_by_image {
        if splits.len() > 1 {
            splits.sort();
            violations.push(ManifestViolation::DuplicateAcrossSplits { image_path: image_path.to_string(), splits });
        }
    }

    for e in entries {
        let image = resolve(base_dir, &e.image_path);
        if !image.is_file() {
            violations.push(ManifestViolation::MissingFile { path: e.image_path.clone() });
        }
        let mask = resolve(base_dir, &e.mask_path);
        match std::fs::read(&mask) {
            Err(_) => violations.push(ManifestViolation::MissingFile { path: e.mask_path.clone() }),
            Ok(bytes) => {
                if let Err(err) = decode_mask(&bytes, palette, tolerance) {
                    violations.push(ManifestViolation::UndecodableMask {
                        mask_path: e.mask_path.clone(),
                        reason: err.to_string(),
                    });
                }
            }
        }
    }
    violations
}
