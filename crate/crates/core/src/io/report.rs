//! Metric report JSON and per-frame CSV traces.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RegionErrors;

/// Jitter split by channel group, mm/frame^3.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupJitter {
    pub hands: Option<f64>,
    pub body: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: f64,
    pub seconds_per_frame: f64,
}

/// The evaluation report: PA-MPVPE per region (mm), jitter per group
/// (mm/frame^3), mean frame-to-frame wrist displacement (mm), frame count,
/// and wall-clock timing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pa_mpvpe: RegionErrors,
    pub jitter: GroupJitter,
    pub rte: Option<f64>,
    pub frames: usize,
    pub timing: Timing,
}

impl MetricsReport {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::parse(path.as_ref().display().to_string(), e))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Writes the per-frame traces as `frame,jitter,deviation` rows; frames
/// where a trace is undefined (segment starts) leave the cell empty.
pub fn write_traces_csv(
    path: impl AsRef<Path>,
    jitter: &[Option<f64>],
    deviation: &[Option<f64>],
) -> Result<()> {
    if jitter.len() != deviation.len() {
        return Err(Error::InvalidArgument(
            "jitter and deviation traces differ in length".into(),
        ));
    }
    let mut out = String::from("frame,jitter,deviation\n");
    for (t, (j, d)) in jitter.iter().zip(deviation).enumerate() {
        let fmt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!("{t},{},{}\n", fmt(j), fmt(d)));
    }
    std::fs::write(path, out)?;
    Ok(())
}
