use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cdgc::SubsetNorm;
use crate::error::{Error, Result};

/// Grid size written `WxH`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GridSize {
    pub w: usize,
    pub h: usize,
}

impl FromStr for GridSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("grid must look like 32x32, got {s:?}"));
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let w: usize = w.trim().parse().map_err(|_| bad())?;
        let h: usize = h.trim().parse().map_err(|_| bad())?;
        if w == 0 || h == 0 {
            return Err(bad());
        }
        Ok(Self { w, h })
    }
}

impl TryFrom<String> for GridSize {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GridSize> for String {
    fn from(g: GridSize) -> String {
        g.to_string()
    }
}

impl fmt::Display for GridSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.w, self.h)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// CIELAB color.
    #[default]
    Lab,
    /// CIELAB plus horizontal and vertical Sobel responses on L*.
    Filterbank,
}

/// Every knob of a pipeline run. Serializes to a single JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub grid: GridSize,
    pub iterations: usize,
    pub temperature: f64,
    pub pos_scale: Option<f64>,
    pub lambda_compact: f64,
    pub targets: Vec<usize>,
    pub alpha: f64,
    pub gamma: usize,
    pub hidden: usize,
    pub tied: bool,
    pub subset_norm: SubsetNorm,
    pub features: FeatureKind,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            grid: GridSize { w: 32, h: 32 },
            iterations: 10,
            temperature: 1.0,
            pos_scale: None,
            lambda_compact: 0.1,
            targets: vec![256],
            alpha: 0.4,
            gamma: 2,
            hidden: 64,
            tied: true,
            subset_norm: SubsetNorm::Adjacency,
            features: FeatureKind::Lab,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.iterations == 0 {
            return fail("iterations must be at least 1".into());
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return fail(format!("temperature must be positive, got {}", self.temperature));
        }
        if let Some(s) = self.pos_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return fail(format!("pos_scale must be non-negative, got {s}"));
            }
        }
        if !(self.lambda_compact >= 0.0 && self.lambda_compact.is_finite()) {
            return fail(format!("lambda_compact must be non-negative, got {}", self.lambda_compact));
        }
        if self.targets.contains(&0) {
            return fail("targets must be positive".into());
        }
        if self.targets.windows(2).any(|w| w[1] >= w[0]) {
            return fail(format!("targets must be strictly decreasing, got {:?}", self.targets));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if self.gamma == 0 {
            return fail("gamma must be at least 1".into());
        }
        if self.hidden == 0 {
            return fail("hidden must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let c = PipelineConfig {
            targets: vec![9, 3],
            input: Some("a.ppm".into()),
            ..Default::default()
        };
        assert_eq!(PipelineConfig::from_json(&c.to_json()).unwrap(), c);
        assert!(c.to_json().contains("\"32x32\""));
    }

    #[test]
    fn partial_json_uses_defaults() {
        let c = PipelineConfig::from_json(r#"{"grid": "8x4", "alpha": 0.3}"#).unwrap();
        assert_eq!(c.grid, GridSize { w: 8, h: 4 });
        assert_eq!(c.gamma, 2);
        assert!(PipelineConfig::from_json(r#"{"gird": "8x4"}"#).is_err());
    }

    #[test]
    fn validation() {
        let ok = PipelineConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            PipelineConfig { targets: vec![4, 8], ..ok.clone() },
            PipelineConfig { alpha: 1.5, ..ok.clone() },
            PipelineConfig { gamma: 0, ..ok.clone() },
            PipelineConfig { iterations: 0, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn grid_parsing() {
        assert_eq!("128x64".parse::<GridSize>().unwrap(), GridSize { w: 128, h: 64 });
        assert!("128".parse::<GridSize>().is_err());
        assert!("0x4".parse::<GridSize>().is_err());
    }
}
