use std::fs;
use std::path::Path;

use mtc_raw::{ModelParams, SlotDurations};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Sidecar written next to every command's outputs. Together with the
/// recorded arguments it is enough to rerun the command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub arguments: Vec<String>,
    pub params: Option<ModelParams>,
    pub durations: Option<SlotDurations>,
    pub seed: Option<u64>,
    pub format: Option<String>,
    /// Command-specific settings such as run count or quantile target.
    pub settings: serde_json::Value,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            arguments: std::env::args().collect(),
            params: None,
            durations: None,
            seed: None,
            format: None,
            settings: serde_json::Value::Null,
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn read(dir: &Path) -> Result<Self, String> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn write(&self, dir: &Path) -> Result<(), String> {
        let text = serde_json::to_string_pretty(self).map_err(|e| e.to_string())?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Station count, contention window, retry limit and slot durations must
/// agree; numeric controls such as epsilon may differ.
pub fn same_scenario(a: &Manifest, b: &Manifest) -> Result<(), String> {
    let (pa, pb) = match (&a.params, &b.params) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err("manifest lacks model parameters".into()),
    };
    let fields = [
        ("n_stations", pa.n_stations, pb.n_stations),
        ("cw_min", pa.cw_min, pb.cw_min),
        ("cw_max", pa.cw_max, pb.cw_max),
        ("retry_limit", pa.retry_limit, pb.retry_limit),
    ];
    for (name, x, y) in fields {
        if x != y {
            return Err(format!("{name} differs: {x} vs {y}"));
        }
    }
    if a.durations != b.durations {
        return Err(format!(
            "slot durations differ: {:?} vs {:?}",
            a.durations, b.durations
        ));
    }
    Ok(())
}
