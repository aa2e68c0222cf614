//! Flat key-value run configuration: one `key = value` per line, `#` starts
//! a comment.  Keys are documented in the shipped reference file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::geometry::IrsGeometry;
use crate::scenario::{ScenarioConfig, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    fn general(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Keys the scenario consumes.  Anything else in a config file is rejected,
/// so typos surface as errors that name the key.
pub const SCENARIO_KEYS: &[&str] = &[
    "frequency_hz",
    "bandwidth_hz",
    "noise_figure_db",
    "ref_loss_db",
    "ref_distance_m",
    "gain_a_dbi",
    "gain_b_dbi",
    "gain_e_dbi",
    "gain_r_dbi",
    "dist_ab_m",
    "dist_ae_m",
    "dist_be_m",
    "dist_ar_m",
    "dist_rb_m",
    "dist_re_m",
    "exp_ab",
    "exp_ae",
    "exp_be",
    "exp_ar",
    "exp_rb",
    "exp_re",
    "power_a_w",
    "power_b_w",
    "irs_n_h",
    "irs_n_v",
    "irs_d_h_wavelengths",
    "irs_d_v_wavelengths",
    "irs_d_h_m",
    "irs_d_v_m",
];

/// Command-level keys (probing plan, optimizer, sweeps, Monte Carlo sizes).
pub const RUN_KEYS: &[&str] = &[
    "t_p",
    "t_d",
    "t_s",
    "rho_t",
    "max_iterations",
    "es_step_fraction",
    "powers_w",
    "blocks",
    "rate_t_d_min",
    "rate_t_d_max",
    "rate_t_d_step",
    "rate_t_s",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    entries: BTreeMap<String, (usize, String)>,
    /// Exact bytes the config was parsed from, hashed into output headers.
    pub raw: String,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::at(line_no, format!("expected `key = value`, got `{raw_line}`")));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::at(line_no, "empty key"));
            }
            if value.is_empty() {
                return Err(ConfigError::at(line_no, format!("key `{key}` has no value")));
            }
            if !SCENARIO_KEYS.contains(&key.as_str()) && !RUN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::at(line_no, format!("unknown key `{key}`")));
            }
            if entries.insert(key.clone(), (line_no, value)).is_some() {
                return Err(ConfigError::at(line_no, format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { entries, raw: text.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| ConfigError::at(*line, format!("key `{key}`: `{v}` is not a number"))),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.get_f64(key)?.ok_or_else(|| ConfigError::general(format!("missing key `{key}`")))
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<usize>().map(Some).map_err(|_| {
                ConfigError::at(*line, format!("key `{key}`: `{v}` is not a nonnegative integer"))
            }),
        }
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => {
                let mut out = Vec::new();
                for part in v.split(',') {
                    let part = part.trim();
                    out.push(part.parse::<f64>().map_err(|_| {
                        ConfigError::at(*line, format!("key `{key}`: `{part}` is not a number"))
                    })?);
                }
                Ok(Some(out))
            }
        }
    }

    /// Scenario from the config, falling back to the reference value for any
    /// absent key.
    pub fn scenario(&self) -> Result<ScenarioConfig, ConfigError> {
        let mut scn = ScenarioConfig::reference(4);
        let f = |key: &str, default: f64| -> Result<f64, ConfigError> {
            Ok(self.get_f64(key)?.unwrap_or(default))
        };
        scn.frequency_hz = f("frequency_hz", scn.frequency_hz)?;
        scn.bandwidth_hz = f("bandwidth_hz", scn.bandwidth_hz)?;
        scn.noise_figure_db = f("noise_figure_db", scn.noise_figure_db)?;
        scn.ref_loss_db = f("ref_loss_db", scn.ref_loss_db)?;
        scn.ref_distance_m = f("ref_distance_m", scn.ref_distance_m)?;
        scn.gain_a_dbi = f("gain_a_dbi", scn.gain_a_dbi)?;
        scn.gain_b_dbi = f("gain_b_dbi", scn.gain_b_dbi)?;
        scn.gain_e_dbi = f("gain_e_dbi", scn.gain_e_dbi)?;
        scn.gain_r_dbi = f("gain_r_dbi", scn.gain_r_dbi)?;
        let dist_keys = ["dist_ab_m", "dist_ae_m", "dist_be_m", "dist_ar_m", "dist_rb_m", "dist_re_m"];
        for (i, key) in dist_keys.iter().enumerate() {
            scn.distances[i] = f(key, scn.distances[i])?;
        }
        let exp_keys = ["exp_ab", "exp_ae", "exp_be", "exp_ar", "exp_rb", "exp_re"];
        for (i, key) in exp_keys.iter().enumerate() {
            scn.exponents[i] = f(key, scn.exponents[i])?;
        }
        scn.power_a_w = f("power_a_w", scn.power_a_w)?;
        scn.power_b_w = f("power_b_w", scn.power_b_w)?;

        let wavelength = SPEED_OF_LIGHT / scn.frequency_hz;
        let n_h = self.get_usize("irs_n_h")?.unwrap_or(scn.irs.n_h);
        let n_v = self.get_usize("irs_n_v")?.unwrap_or(scn.irs.n_v);
        let d_h = match (self.get_f64("irs_d_h_m")?, self.get_f64("irs_d_h_wavelengths")?) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::general(
                    "keys `irs_d_h_m` and `irs_d_h_wavelengths` are mutually exclusive",
                ))
            }
            (Some(m), None) => m,
            (None, Some(w)) => w * wavelength,
            (None, None) => 0.5 * wavelength,
        };
        let d_v = match (self.get_f64("irs_d_v_m")?, self.get_f64("irs_d_v_wavelengths")?) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::general(
                    "keys `irs_d_v_m` and `irs_d_v_wavelengths` are mutually exclusive",
                ))
            }
            (Some(m), None) => m,
            (None, Some(w)) => w * wavelength,
            (None, None) => 0.5 * wavelength,
        };
        scn.irs = IrsGeometry::new(n_h, n_v, d_h, d_v, wavelength)
            .map_err(|e| ConfigError::general(e.to_string()))?;
        scn.validate().map_err(|e| ConfigError::general(e.to_string()))?;
        Ok(scn)
    }

    /// SHA-256 of the exact config bytes, abbreviated for output headers.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.raw.as_bytes());
        let mut out = String::with_capacity(16);
        for b in digest.iter().take(8) {
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_reference_style_config() {
        let cfg = RunConfig::parse(
            "# comment\nfrequency_hz = 1e9\nirs_n_h = 4\nirs_n_v = 4 # trailing\nt_p = 100\n",
        )
        .unwrap();
        assert_eq!(cfg.get_f64("frequency_hz").unwrap(), Some(1e9));
        assert_eq!(cfg.get_usize("irs_n_h").unwrap(), Some(4));
        let scn = cfg.scenario().unwrap();
        assert_eq!(scn.irs.element_count(), 16);
    }

    #[test]
    fn rejects_unknown_key_by_name() {
        let err = RunConfig::parse("frequancy_hz = 1e9\n").unwrap_err();
        assert_eq!(err.line, Some(1));
        assert!(err.message.contains("frequancy_hz"), "{}", err.message);
    }

    #[test]
    fn rejects_malformed_lines_with_line_numbers() {
        let err = RunConfig::parse("t_p = 100\nnonsense line\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        let err = RunConfig::parse("t_p = abc\n").map(|c| c.get_f64("t_p")).unwrap().unwrap_err();
        assert_eq!(err.line, Some(1));
    }

    #[test]
    fn rejects_duplicates_and_exclusive_keys() {
        assert!(RunConfig::parse("t_p = 1\nt_p = 2\n").is_err());
        let cfg = RunConfig::parse("irs_d_h_m = 0.15\nirs_d_h_wavelengths = 0.5\n").unwrap();
        assert!(cfg.scenario().is_err());
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = RunConfig::parse("t_p = 100\n").unwrap();
        let b = RunConfig::parse("t_p = 100\n").unwrap();
        let c = RunConfig::parse("t_p = 101\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn spacing_in_wavelengths() {
        let cfg = RunConfig::parse("irs_d_h_wavelengths = 0.25\nirs_d_v_wavelengths = 0.25\n").unwrap();
        let scn = cfg.scenario().unwrap();
        let lambda = SPEED_OF_LIGHT / 1e9;
        assert!((scn.irs.d_h - 0.25 * lambda).abs() < 1e-12);
    }
}
