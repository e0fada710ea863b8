//! Fixture manifest: names, categories, shapes, tolerances, oracle ids, and
//! input distributions for the operator corpus.

use adsl_core::vm::ShapeMap;
use anyhow::{bail, Context, Result};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const CATEGORIES: [&str; 7] = [
    "Activation",
    "Loss",
    "Math",
    "Normalization",
    "Optimizer",
    "Reduce",
    "Pooling",
];

#[derive(Debug, Clone, Deserialize)]
pub struct ManifestFile {
    pub fixtures: Vec<FixtureManifest>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FixtureManifest {
    pub name: String,
    pub category: String,
    /// Reference-oracle id; see `adsl_core::vm::ORACLE_IDS`.
    pub oracle: String,
    pub shapes: Vec<BTreeMap<String, i64>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub inputs: InputSpec,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct Tolerances {
    pub f32: Tolerance,
    pub f16: Tolerance,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            f32: Tolerance {
                rel: 1e-5,
                abs: 1e-6,
            },
            f16: Tolerance {
                rel: 1e-2,
                abs: 1e-3,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct ValueRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for ValueRange {
    fn default() -> Self {
        ValueRange { lo: -1.0, hi: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
pub struct InputSpec {
    #[serde(default)]
    pub default: ValueRange,
    #[serde(default)]
    pub per_tensor: BTreeMap<String, ValueRange>,
}

impl InputSpec {
    pub fn range_for(&self, tensor: &str) -> ValueRange {
        self.per_tensor.get(tensor).copied().unwrap_or(self.default)
    }
}

impl FixtureManifest {
    pub fn shape_map(&self, index: usize) -> ShapeMap {
        self.shapes
            .get(index)
            .map(|m| m.iter().map(|(k, v)| (k.clone(), *v)).collect())
            .unwrap_or_default()
    }
}

/// Load and validate a manifest. Every fixture must name a known category,
/// a known oracle, and an existing `.adsl` file next to the manifest.
pub fn load_manifest(path: &Path) -> Result<(ManifestFile, PathBuf)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let manifest: ManifestFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let root = path
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."));
    for fixture in &manifest.fixtures {
        if !CATEGORIES.contains(&fixture.category.as_str()) {
            bail!(
                "fixture `{}` has unknown category `{}`",
                fixture.name,
                fixture.category
            );
        }
        if !adsl_core::vm::ORACLE_IDS.contains(&fixture.oracle.as_str()) {
            bail!(
                "fixture `{}` names unknown oracle `{}`",
                fixture.name,
                fixture.oracle
            );
        }
        let program = root.join(&fixture.name).join("program.adsl");
        if !program.is_file() {
            bail!("fixture `{}` is missing {}", fixture.name, program.display());
        }
        if fixture.shapes.is_empty() {
            bail!("fixture `{}` declares no shapes", fixture.name);
        }
    }
    Ok((manifest, root))
}

/// Default fixture directory: `fixtures/` beside the workspace the binary
/// runs from, falling back to the compile-time workspace path.
pub fn default_fixture_dir() -> PathBuf {
    let cwd = PathBuf::from("fixtures");
    if cwd.join("manifest.json").is_file() {
        return cwd;
    }
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_manifest_loads_and_covers_all_categories() {
        let dir = default_fixture_dir();
        let (manifest, _) = load_manifest(&dir.join("manifest.json")).unwrap();
        assert!(manifest.fixtures.len() >= 14);
        for category in CATEGORIES {
            let count = manifest
                .fixtures
                .iter()
                .filter(|f| f.category == category)
                .count();
            assert!(count >= 2, "category {category} has {count} fixtures; need 2");
        }
    }
}
