//! On-disk scene and report formats.
//!
//! One JSON document holds a whole set of scenes. Curves are stored as
//! control-point lists, incidence matrices as sparse edge lists, and all
//! coordinates are normalized to the unit square. A format-version field
//! guards future evolution.

use crate::bev::{CameraModel, RoiSpec};
use crate::graph::LaneGraph;
use crate::objects::OrientedBox;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

/// Version written by this crate and the only one accepted when loading.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SceneIoError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a valid document: {source}")]
    Malformed {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path} has format version {found}, expected {FORMAT_VERSION}")]
    VersionMismatch { path: String, found: u32 },
}

/// Which side of the road traffic drives on in this scene's region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficSide {
    #[default]
    Right,
    Left,
}

/// One frame: its camera, ROI, lane graph, and objects. Serves as either
/// ground truth or prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub id: String,
    pub camera: CameraModel,
    pub roi: RoiSpec,
    pub graph: LaneGraph,
    pub objects: Vec<OrientedBox>,
    #[serde(default)]
    pub traffic_side: TrafficSide,
}

impl SceneRecord {
    pub fn empty(id: impl Into<String>, camera: CameraModel, roi: RoiSpec) -> Self {
        Self {
            id: id.into(),
            camera,
            roi,
            graph: LaneGraph::empty(),
            objects: Vec::new(),
            traffic_side: TrafficSide::default(),
        }
    }
}

/// A set of scenes plus the format version; the unit of file I/O.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSet {
    pub format_version: u32,
    pub scenes: Vec<SceneRecord>,
}

impl SceneSet {
    pub fn new(scenes: Vec<SceneRecord>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            scenes,
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, SceneIoError> {
    let mut buf = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut buf))
        .map_err(|source| SceneIoError::Io {
            path: path.display().to_string(),
            source,
        })?;
    Ok(buf)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), SceneIoError> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|source| SceneIoError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Generic versioned-document load used for every JSON format here.
pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, SceneIoError> {
    let text = read_to_string(path)?;
    // Check the version before full decoding for a clearer error.
    #[derive(Deserialize)]
    struct VersionProbe {
        format_version: u32,
    }
    if let Ok(probe) = serde_json::from_str::<VersionProbe>(&text) {
        if probe.format_version != FORMAT_VERSION {
            return Err(SceneIoError::VersionMismatch {
                path: path.display().to_string(),
                found: probe.format_version,
            });
        }
    }
    serde_json::from_str(&text).map_err(|source| SceneIoError::Malformed {
        path: path.display().to_string(),
        source,
    })
}

/// Serialize with a trailing newline so repeated writes are byte-stable
/// and diff-friendly.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SceneIoError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn load_scene_set(path: &Path) -> Result<SceneSet, SceneIoError> {
    load_json(path)
}

pub fn save_scene_set(path: &Path, set: &SceneSet) -> Result<(), SceneIoError> {
    save_json(path, set)
}
