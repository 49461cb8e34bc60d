//! Corpus files.
//!
//! * manifest: JSON `{dataset_name, C, activity_names, videos: [{id, activity, T, feature_file, gt_file?}]}`,
//!   activities 1-based, paths relative to the manifest's directory.
//! * features: `"CADF"`, version `u32`, `T u32`, `d u32`, then `T*d` little-endian `f32`, row-major.
//! * ground truth: `"CADG"`, version `u32`, `T u32`, then `T` little-endian `u32` actions
//!   (1-based, 0 = background).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Corpus, FeatureSequence};
use crate::binio::Reader;
use crate::error::{CadError, Result};
use crate::numerics::Tensor2;

pub const FEATURE_MAGIC: &[u8; 4] = b"CADF";
pub const GT_MAGIC: &[u8; 4] = b"CADG";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_name: String,
    #[serde(rename = "C")]
    pub classes: usize,
    pub activity_names: Vec<String>,
    pub videos: Vec<ManifestVideo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestVideo {
    pub id: String,
    /// 1-based activity index.
    pub activity: usize,
    #[serde(rename = "T")]
    pub frames: usize,
    pub feature_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_file: Option<String>,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CadError::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CadError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CadError::io(path, e))
}

/// Features are stored as `f32`; values are narrowed on write.
pub fn write_features(path: &Path, features: &Tensor2) -> Result<()> {
    let mut out = Vec::with_capacity(16 + 4 * features.values().len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(features.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(features.cols() as u32).to_le_bytes());
    for &v in features.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_file(path, &out)
}

pub fn read_features(path: &Path) -> Result<Tensor2> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    r.magic(FEATURE_MAGIC)?;
    r.version(FORMAT_VERSION)?;
    let t = r.u32()? as usize;
    let d = r.u32()? as usize;
    let raw = r.take(t * d * 4)?;
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    r.finish()?;
    Tensor2::new(t, d, values)
}

pub fn write_ground_truth(path: &Path, labels: &[Option<usize>]) -> Result<()> {
    let mut out = Vec::with_capacity(12 + 4 * labels.len());
    out.extend_from_slice(GT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    for l in labels {
        let v = l.map_or(0u32, |a| a as u32 + 1);
        out.extend_from_slice(&v.to_le_bytes());
    }
    write_file(path, &out)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<Option<usize>>> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    r.magic(GT_MAGIC)?;
    r.version(FORMAT_VERSION)?;
    let t = r.u32()? as usize;
    let raw = r.take(t * 4)?;
    let labels = raw
        .chunks_exact(4)
        .map(|c| match u32::from_le_bytes(c.try_into().unwrap()) {
            0 => None,
            a => Some(a as usize - 1),
        })
        .collect();
    r.finish()?;
    Ok(labels)
}

/// Writes `manifest.json`, `features/<id>.cadf` and `gt/<id>.cadg` under
/// `dir`; returns the manifest path.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<PathBuf> {
    let mut videos = Vec::with_capacity(corpus.videos.len());
    for v in &corpus.videos {
        let feature_file = format!("features/{}.cadf", v.video_id);
        write_features(&dir.join(&feature_file), &v.features)?;
        let gt_file = match &v.gt_actions {
            Some(gt) => {
                let f = format!("gt/{}.cadg", v.video_id);
                write_ground_truth(&dir.join(&f), gt)?;
                Some(f)
            }
            None => None,
        };
        videos.push(ManifestVideo {
            id: v.video_id.clone(),
            activity: v.activity + 1,
            frames: v.frames(),
            feature_file,
            gt_file,
        });
    }
    let manifest = Manifest {
        dataset_name: corpus.name.clone(),
        classes: corpus.classes(),
        activity_names: corpus.activity_names.clone(),
        videos,
    };
    let path = dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_file(&path, json.as_bytes())?;
    Ok(path)
}

pub fn read_corpus(manifest_path: &Path) -> Result<Corpus> {
    let bytes = read_file(manifest_path)?;
    let manifest: Manifest = serde_json::from_slice(&bytes).map_err(|e| CadError::Parse {
        path: manifest_path.to_path_buf(),
        offset: byte_offset(&bytes, e.line(), e.column()),
        msg: e.to_string(),
    })?;
    if manifest.activity_names.len() != manifest.classes {
        return Err(CadError::Data {
            path: manifest_path.to_path_buf(),
            msg: format!(
                "C = {} but {} activity names",
                manifest.classes,
                manifest.activity_names.len()
            ),
        });
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut videos = Vec::with_capacity(manifest.videos.len());
    for mv in &manifest.videos {
        if mv.activity == 0 || mv.activity > manifest.classes {
            return Err(CadError::Data {
                path: manifest_path.to_path_buf(),
                msg: format!("video {}: activity {} not in 1..={}", mv.id, mv.activity, manifest.classes),
            });
        }
        let fpath = base.join(&mv.feature_file);
        let features = read_features(&fpath)?;
        if features.rows() != mv.frames {
            return Err(CadError::Data {
                path: fpath,
                msg: format!("{} frames, manifest says T = {}", features.rows(), mv.frames),
            });
        }
        let gt = match &mv.gt_file {
            Some(f) => {
                let gpath = base.join(f);
                let gt = read_ground_truth(&gpath)?;
                if gt.len() != mv.frames {
                    return Err(CadError::Data {
                        path: gpath,
                        msg: format!("{} labels, manifest says T = {}", gt.len(), mv.frames),
                    });
                }
                Some(gt)
            }
            None => None,
        };
        videos.push(FeatureSequence::new(mv.id.clone(), mv.activity - 1, features, gt)?);
    }
    Ok(Corpus {
        name: manifest.dataset_name,
        activity_names: manifest.activity_names,
        videos,
    })
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> u64 {
    let mut cur_line = 1;
    for (i, &b) in bytes.iter().enumerate() {
        if cur_line == line {
            return (i + column.saturating_sub(1)) as u64;
        }
        if b == b'\n' {
            cur_line += 1;
        }
    }
    bytes.len() as u64
}
