//! On-disk datasets: a directory per split holding `.flo` files and a JSON
//! manifest, an array of `{state, flow_file, aug_flow_file}` records.

use std::fs;
use std::path::{Path, PathBuf};

use rank_odo_core::pose::EulerPose6D;
use rank_odo_core::synth::{read_flo, write_flo, FlowField, MotionSample, SceneConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir(self, dataset_dir: &Path) -> PathBuf {
        dataset_dir.join(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRow {
    /// x, y, z, roll, pitch, yaw.
    pub state: [f64; 6],
    pub flow_file: String,
    pub aug_flow_file: String,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_split(dir: &Path, samples: &[MotionSample]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut rows = Vec::with_capacity(samples.len());
    for (k, s) in samples.iter().enumerate() {
        let flow_file = format!("{k:06}.flo");
        let aug_flow_file = format!("{k:06}_aug.flo");
        write_file(&dir.join(&flow_file), &write_flo(&s.flow))?;
        write_file(&dir.join(&aug_flow_file), &write_flo(s.augmented_flow.as_ref().unwrap_or(&s.flow)))?;
        rows.push(ManifestRow { state: s.state.to_array(), flow_file, aug_flow_file });
    }
    let mut text = serde_json::to_string_pretty(&rows).expect("manifest serializes");
    text.push('\n');
    write_file(&dir.join(MANIFEST_FILE), text.as_bytes())
}

fn load_flo(path: &Path, scene: &SceneConfig) -> Result<FlowField, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let flow = read_flo(&bytes).map_err(|e| CliError::data(path, e))?;
    if (flow.width(), flow.height()) != (scene.width, scene.height) {
        return Err(CliError::data(
            path,
            format!("flow is {}x{} but the scene is {}x{}", flow.width(), flow.height(), scene.width, scene.height),
        ));
    }
    Ok(flow)
}

/// Reads a split written by [`write_split`]; every sample carries its
/// stored augmented flow. Flow sizes must match `scene`.
pub fn read_split(dir: &Path, scene: &SceneConfig) -> Result<Vec<MotionSample>, CliError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let rows: Vec<ManifestRow> = serde_json::from_str(&text).map_err(|e| CliError::data(&path, e))?;
    if rows.is_empty() {
        return Err(CliError::data(&path, "manifest lists no samples"));
    }
    rows.iter()
        .enumerate()
        .map(|(k, row)| {
            let state =
                EulerPose6D::from_array(row.state).map_err(|e| CliError::data(&path, format!("sample {k}: {e}")))?;
            Ok(MotionSample {
                state,
                flow: load_flo(&dir.join(&row.flow_file), scene)?,
                augmented_flow: Some(load_flo(&dir.join(&row.aug_flow_file), scene)?),
            })
        })
        .collect()
}
