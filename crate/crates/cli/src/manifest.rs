use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use multibethe::model::ModelSpec;

/// Provenance record attached to every output artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub argv: Vec<String>,
    pub spec_hash: String,
    pub seed: Option<u64>,
    pub tool_version: &'static str,
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, spec: &ModelSpec, seed: Option<u64>) -> Self {
        // absent --seed still surfaces a seed so the run can be replayed
        let seed = Some(seed.unwrap_or_else(|| {
            let drawn = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_nanos() as u64)
                .unwrap_or(0);
            eprintln!("no --seed given; drew {drawn}");
            drawn
        }));
        RunManifest {
            schema_version: 1,
            command: command.to_string(),
            argv: std::env::args().collect(),
            spec_hash: spec.hash(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}
