use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workload::Codec;

pub const DEFAULT_SEED: u64 = 20_210_614;

/// Parameters of the synthetic execution-time model.
///
/// Stored on disk as flat `key = value` lines; absent keys take their
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Share of a VIC task spent in fetch, decode and function load.
    pub vic_shared_fraction: f64,
    pub mpeg4_multiplier: f64,
    pub hevc_multiplier: f64,
    pub vp9_multiplier: f64,
    /// Log-normal sigma applied per phase of VIC tasks.
    pub vic_noise_sigma: f64,
    /// Log-normal sigma applied per phase of codec tasks.
    pub codec_noise_sigma: f64,
    pub rng_seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            vic_shared_fraction: 0.52,
            mpeg4_multiplier: 2.0,
            hevc_multiplier: 4.0,
            vp9_multiplier: 8.0,
            vic_noise_sigma: 0.05,
            codec_noise_sigma: 0.25,
            rng_seed: DEFAULT_SEED,
        }
    }
}

impl OracleConfig {
    /// Defaults with both noise sigmas set to zero.
    pub fn noiseless() -> Self {
        OracleConfig {
            vic_noise_sigma: 0.0,
            codec_noise_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    /// Transform + encode time of a codec task relative to a VIC task.
    pub fn codec_multiplier(&self, codec: Codec) -> f64 {
        match codec {
            Codec::Mpeg4 => self.mpeg4_multiplier,
            Codec::Hevc => self.hevc_multiplier,
            Codec::Vp9 => self.vp9_multiplier,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.vic_shared_fraction;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Config(format!(
                "vic_shared_fraction must lie in (0, 1), got {s}"
            )));
        }
        for codec in Codec::ALL {
            let m = self.codec_multiplier(codec);
            if !(m.is_finite() && m >= 1.0) {
                return Err(Error::Config(format!(
                    "{}_multiplier must be >= 1, got {m}",
                    codec.name()
                )));
            }
        }
        for (name, sigma) in [
            ("vic_noise_sigma", self.vic_noise_sigma),
            ("codec_noise_sigma", self.codec_noise_sigma),
        ] {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {sigma}")));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let cfg: OracleConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
