//! JSON file formats and path resolution.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use strider_core::gait::{Gait, GaitDomain};
use strider_core::model::RobotModel;

/// Current gait file version.
pub const GAIT_FILE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {msg}")]
    Invalid { path: PathBuf, msg: String },
}

impl FormatError {
    pub fn invalid(path: &Path, msg: impl std::fmt::Display) -> Self {
        FormatError::Invalid {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| FormatError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, to_json_string(value)).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_model(path: &Path) -> Result<RobotModel, FormatError> {
    let m: RobotModel = read_json(path)?;
    m.validate().map_err(|e| FormatError::invalid(path, e))?;
    Ok(m)
}

/// On-disk gait layout: the gait plus a format version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitFile {
    pub version: u32,
    pub model_fingerprint: String,
    pub design_speed: f64,
    pub domains: Vec<GaitDomain>,
}

impl From<&Gait> for GaitFile {
    fn from(g: &Gait) -> Self {
        Self {
            version: GAIT_FILE_VERSION,
            model_fingerprint: g.model_fingerprint.clone(),
            design_speed: g.design_speed,
            domains: g.domains.clone(),
        }
    }
}

pub fn read_gait(path: &Path) -> Result<Gait, FormatError> {
    let f: GaitFile = read_json(path)?;
    if f.version != GAIT_FILE_VERSION {
        return Err(FormatError::invalid(path, format!("unsupported gait file version {}", f.version)));
    }
    let g = Gait {
        model_fingerprint: f.model_fingerprint,
        design_speed: f.design_speed,
        domains: f.domains,
    };
    g.validate().map_err(|e| FormatError::invalid(path, e))?;
    Ok(g)
}

pub fn write_gait(path: &Path, gait: &Gait) -> Result<(), FormatError> {
    write_json(path, &GaitFile::from(gait))
}

/// A config that is either inline or a path to a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(PathBuf),
    Inline(T),
}

impl<T: DeserializeOwned + Clone> Source<T> {
    /// Loads the value; relative paths are taken from `base`.
    pub fn load(&self, base: &Path) -> Result<T, FormatError> {
        match self {
            Source::Inline(v) => Ok(v.clone()),
            Source::Path(p) => read_json(&resolve(base, p)),
        }
    }
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Directory a file's relative references are resolved against.
pub fn base_dir(file: &Path) -> PathBuf {
    file.parent().map(Path::to_path_buf).unwrap_or_default()
}
