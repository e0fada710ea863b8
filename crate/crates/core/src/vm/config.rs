//! Virtual NPU machine model parameters.

use serde::Serialize;
use thiserror::Error;

/// Access alignment required by on-chip transfers, in bytes. Fixed by the
/// hardware model; not configurable.
pub const ALIGNMENT_BYTES: u64 = 32;

/// Machine model: core count, on-chip capacities, queue depths, and latency
/// coefficients for the timed simulator.
///
/// The latency constants are plausible orders of magnitude for relative
/// comparisons only; the model makes no wall-clock claims.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NpuConfig {
    pub num_cores: u32,
    pub ub_bytes: u64,
    pub l1_bytes: u64,
    pub alignment_bytes: u64,
    pub queue_depth_in: u32,
    pub queue_depth_out: u32,
    /// Fixed issue overhead per instruction, cycles.
    pub lat_issue: u64,
    /// Memory-transfer cycles per started 256-byte unit.
    pub lat_mte_per_256b: u64,
    /// Vector cycles per started 256-byte unit.
    pub lat_vec_per_256b: u64,
    /// Cycles per scalar-unit statement.
    pub lat_scalar: u64,
}

impl Default for NpuConfig {
    fn default() -> Self {
        NpuConfig {
            num_cores: 8,
            ub_bytes: 196_608,
            l1_bytes: 1_048_576,
            alignment_bytes: ALIGNMENT_BYTES,
            queue_depth_in: 2,
            queue_depth_out: 2,
            lat_issue: 10,
            lat_mte_per_256b: 20,
            lat_vec_per_256b: 4,
            lat_scalar: 1,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown configuration key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {reason}")]
    BadValue {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
}

impl NpuConfig {
    /// Model invariants: fixed 32-byte alignment, queue depths in [1, 4],
    /// positive core count and capacities.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.alignment_bytes != ALIGNMENT_BYTES {
            return Err(ConfigError::Invalid(format!(
                "alignment_bytes is fixed at {ALIGNMENT_BYTES}"
            )));
        }
        if self.num_cores == 0 {
            return Err(ConfigError::Invalid("num_cores must be positive".into()));
        }
        if self.ub_bytes == 0 || self.l1_bytes == 0 {
            return Err(ConfigError::Invalid(
                "ub_bytes and l1_bytes must be positive".into(),
            ));
        }
        for (name, depth) in [
            ("queue_depth_in", self.queue_depth_in),
            ("queue_depth_out", self.queue_depth_out),
        ] {
            if !(1..=4).contains(&depth) {
                return Err(ConfigError::Invalid(format!(
                    "{name} must be in [1, 4], got {depth}"
                )));
            }
        }
        Ok(())
    }

    /// Parse a `key = value` configuration file body. Blank lines and lines
    /// starting with `#` are ignored. Unknown keys are errors.
    pub fn from_key_values(text: &str) -> Result<NpuConfig, ConfigError> {
        let mut cfg = NpuConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Malformed {
                line: line_no,
                text: line.to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let parse_u64 = |key: &str| -> Result<u64, ConfigError> {
                value.parse::<u64>().map_err(|e| ConfigError::BadValue {
                    line: line_no,
                    key: key.to_string(),
                    reason: e.to_string(),
                })
            };
            match key {
                "num_cores" => cfg.num_cores = parse_u64(key)? as u32,
                "ub_bytes" => cfg.ub_bytes = parse_u64(key)?,
                "l1_bytes" => cfg.l1_bytes = parse_u64(key)?,
                "alignment_bytes" => cfg.alignment_bytes = parse_u64(key)?,
                "queue_depth_in" => cfg.queue_depth_in = parse_u64(key)? as u32,
                "queue_depth_out" => cfg.queue_depth_out = parse_u64(key)? as u32,
                "lat_issue" => cfg.lat_issue = parse_u64(key)?,
                "lat_mte_per_256b" => cfg.lat_mte_per_256b = parse_u64(key)?,
                "lat_vec_per_256b" => cfg.lat_vec_per_256b = parse_u64(key)?,
                "lat_scalar" => cfg.lat_scalar = parse_u64(key)?,
                other => {
                    return Err(ConfigError::UnknownKey {
                        line: line_no,
                        key: other.to_string(),
                    });
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        NpuConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_overrides_and_comments() {
        let cfg = NpuConfig::from_key_values(
            "# machine\nnum_cores = 4\n\nqueue_depth_in = 1\nlat_mte_per_256b = 8\n",
        )
        .unwrap();
        assert_eq!(cfg.num_cores, 4);
        assert_eq!(cfg.queue_depth_in, 1);
        assert_eq!(cfg.lat_mte_per_256b, 8);
        assert_eq!(cfg.ub_bytes, NpuConfig::default().ub_bytes);
    }

    #[test]
    fn rejects_bad_alignment_and_depths() {
        assert!(NpuConfig::from_key_values("alignment_bytes = 64").is_err());
        assert!(NpuConfig::from_key_values("alignment_bytes = 32").is_ok());
        assert!(NpuConfig::from_key_values("queue_depth_in = 5").is_err());
        assert!(NpuConfig::from_key_values("queue_depth_out = 0").is_err());
        assert!(NpuConfig::from_key_values("bogus = 1").is_err());
    }
}
