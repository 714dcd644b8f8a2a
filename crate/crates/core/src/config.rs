//! TOML configuration files and run manifests.
//!
//! A config file only needs the keys it wants to change; everything else
//! falls back to the defaults baked into the section types, which match
//! `engine::baseline_config`. Unknown keys are rejected so typos fail
//! loudly instead of silently running the default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::association::{UplinkPolicy, UplinkPowerRule};
use crate::engine::{DownlinkPolicyKind, ScenarioConfig};
use crate::geometry::Region;
use crate::propagation::{PathLossSpec, TierConfig};
use crate::sweep::{
    default_macro_densities, default_small_cell_densities, BiasGrid, BiasObjective,
};
use crate::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: u64,
    pub drops: u32,
    pub region: RegionSection,
    pub pathloss: PathLossSpec,
    #[serde(rename = "macro")]
    pub macro_tier: TierSection,
    pub femto: TierSection,
    pub users: UsersSection,
    pub noise: NoiseSection,
    pub downlink: DownlinkSection,
    pub uplink: UplinkSection,
    pub sweep: SweepSection,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            drops: 2000,
            region: RegionSection::default(),
            pathloss: PathLossSpec::dual(3.0, 4.0),
            macro_tier: TierSection { density_per_km2: 1.0, tx_power_dbm: 46.0, bias_db: 0.0 },
            femto: TierSection { density_per_km2: 10.0, tx_power_dbm: 23.0, bias_db: 0.0 },
            users: UsersSection::default(),
            noise: NoiseSection::default(),
            downlink: DownlinkSection::default(),
            uplink: UplinkSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionSection {
    pub half_width_km: f64,
}

impl Default for RegionSection {
    fn default() -> Self {
        Self { half_width_km: 10.0 }
    }
}

/// Density, power, and bias for one tier. The band and the tier name come
/// from which section the table sits in: `[macro]` is band 0, `[femto]`
/// band 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierSection {
    pub density_per_km2: f64,
    pub tx_power_dbm: f64,
    #[serde(default)]
    pub bias_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UsersSection {
    pub density_per_km2: f64,
}

impl Default for UsersSection {
    fn default() -> Self {
        Self { density_per_km2: 200.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub power_dbm: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { power_dbm: -10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DownlinkSection {
    pub policy: DownlinkPolicyKind,
}

impl Default for DownlinkSection {
    fn default() -> Self {
        Self { policy: DownlinkPolicyKind::MaxPower }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UplinkSection {
    pub policy: UplinkPolicy,
    pub target_rx_power_dbm: f64,
    pub max_tx_power_dbm: f64,
    /// Diagnostic: reuse the downlink fading draw on uplink links.
    pub shared_fading_diagnostic: bool,
}

impl Default for UplinkSection {
    fn default() -> Self {
        Self {
            policy: UplinkPolicy::Coupled,
            target_rx_power_dbm: -70.0,
            max_tx_power_dbm: 20.0,
            shared_fading_diagnostic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub bias_min_db: f64,
    pub bias_max_db: f64,
    pub bias_step_db: f64,
    pub objective: BiasObjective,
    pub femto_densities_per_km2: Vec<f64>,
    pub macro_densities_per_km2: Vec<f64>,
    pub femto_per_macro_ratio: f64,
    /// Path-loss models the density sweeps iterate over.
    pub models: Vec<PathLossSpec>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            bias_min_db: 0.0,
            bias_max_db: 12.0,
            bias_step_db: 1.0,
            objective: BiasObjective::MedianRate,
            femto_densities_per_km2: default_small_cell_densities(),
            macro_densities_per_km2: default_macro_densities(),
            femto_per_macro_ratio: 10.0,
            models: vec![
                PathLossSpec::single(2.0),
                PathLossSpec::single(3.0),
                PathLossSpec::dual(2.0, 4.0),
                PathLossSpec::dual(3.0, 4.0),
            ],
        }
    }
}

impl SweepSection {
    pub fn bias_grid(&self) -> Result<BiasGrid> {
        BiasGrid::from_range(self.bias_min_db, self.bias_max_db, self.bias_step_db)
            .map_err(|e| SimError::Config(format!("sweep.bias_*_db: {e}")))
    }
}

impl FileConfig {
    /// Parses a TOML document; an empty string yields the defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Builds the validated scenario this file describes.
    pub fn to_scenario(&self) -> Result<ScenarioConfig> {
        let region = Region::new(self.region.half_width_km)
            .map_err(|e| SimError::Config(format!("region.half_width_km: {e}")))?;
        if self.downlink.policy == DownlinkPolicyKind::MaxPower
            && (self.macro_tier.bias_db != 0.0 || self.femto.bias_db != 0.0)
        {
            return Err(SimError::Config(
                "bias_db set while downlink.policy is \"max-power\"; \
                 use policy \"biased\" or drop the bias"
                    .into(),
            ));
        }
        let tier = |name: &str, s: &TierSection, band: u8| TierConfig {
            name: name.into(),
            density_per_km2: s.density_per_km2,
            tx_power_dbm: s.tx_power_dbm,
            band,
            bias_db: s.bias_db,
        };
        let config = ScenarioConfig {
            region,
            tiers: vec![tier("macro", &self.macro_tier, 0), tier("femto", &self.femto, 1)],
            user_density_per_km2: self.users.density_per_km2,
            path_loss: self.pathloss,
            noise_dbm: self.noise.power_dbm,
            downlink: self.downlink.policy,
            uplink: self.uplink.policy,
            uplink_power: UplinkPowerRule {
                target_rx_dbm: self.uplink.target_rx_power_dbm,
                max_tx_dbm: self.uplink.max_tx_power_dbm,
            },
            n_drops: self.drops,
            master_seed: self.seed,
            shared_ul_dl_fading: self.uplink.shared_fading_diagnostic,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Loads `path` if given, otherwise the built-in defaults.
pub fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        Some(p) => FileConfig::from_path(p),
        None => Ok(FileConfig::default()),
    }
}

/// Provenance record written next to every batch of output files. Each
/// data file is listed by exactly one manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    pub started_at: String,
    pub finished_at: String,
    pub master_seed: u64,
    pub drops_per_point: u32,
    pub workers: usize,
    pub total_resamples: u64,
    pub output_files: Vec<String>,
    pub config: FileConfig,
}

impl RunManifest {
    pub fn file_name(command: &str) -> String {
        format!("{command}_manifest.toml")
    }
}

/// Writes the manifest into `dir` as `<command>_manifest.toml`.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = dir.join(RunManifest::file_name(&manifest.command));
    std::fs::write(&path, manifest.to_toml_string()?)?;
    Ok(path)
}

impl RunManifest {
    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{baseline_config, SMALL_CELL_TIER};

    #[test]
    fn defaults_match_builtin_baseline() {
        let scenario = FileConfig::default().to_scenario().unwrap();
        assert_eq!(scenario, baseline_config());
    }

    #[test]
    fn empty_document_is_all_defaults() {
        let cfg = FileConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, FileConfig::default());
        assert_eq!(cfg.drops, 2000);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.region.half_width_km, 10.0);
        assert_eq!(cfg.macro_tier.tx_power_dbm, 46.0);
        assert_eq!(cfg.femto.tx_power_dbm, 23.0);
        assert_eq!(cfg.femto.density_per_km2, 10.0);
        assert_eq!(cfg.users.density_per_km2, 200.0);
        assert_eq!(cfg.noise.power_dbm, -10.0);
        assert_eq!(cfg.uplink.target_rx_power_dbm, -70.0);
        assert_eq!(cfg.uplink.max_tx_power_dbm, 20.0);
        assert_eq!(cfg.pathloss, PathLossSpec::dual(3.0, 4.0));
    }

    #[test]
    fn partial_overrides_keep_other_defaults() {
        let cfg = FileConfig::from_toml_str(
            "drops = 50\n[femto]\ndensity_per_km2 = 25\ntx_power_dbm = 20\n",
        )
        .unwrap();
        assert_eq!(cfg.drops, 50);
        assert_eq!(cfg.femto.density_per_km2, 25.0);
        assert_eq!(cfg.femto.tx_power_dbm, 20.0);
        assert_eq!(cfg.femto.bias_db, 0.0);
        assert_eq!(cfg.macro_tier, FileConfig::default().macro_tier);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn unknown_keys_name_the_offender() {
        let err = FileConfig::from_toml_str("bogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");

        let err = FileConfig::from_toml_str("[region]\nhalf_width = 3\n").unwrap_err();
        assert!(err.to_string().contains("half_width"), "{err}");

        let err = FileConfig::from_toml_str("[uplink]\npolcy = \"coupled\"\n").unwrap_err();
        assert!(err.to_string().contains("polcy"), "{err}");
    }

    #[test]
    fn pathloss_variants_parse() {
        let cfg = FileConfig::from_toml_str("[pathloss]\nmodel = \"single\"\nalpha = 3.5\n")
            .unwrap();
        assert_eq!(cfg.pathloss, PathLossSpec::single(3.5));

        let cfg = FileConfig::from_toml_str(
            "[pathloss]\nmodel = \"dual\"\nalpha0 = 2\nalpha1 = 4\ncritical_radius_m = 50\n",
        )
        .unwrap();
        match cfg.pathloss {
            PathLossSpec::Dual { alpha0, alpha1, critical_radius_m, reference_distance_m, .. } => {
                assert_eq!((alpha0, alpha1), (2.0, 4.0));
                assert_eq!(critical_radius_m, 50.0);
                assert_eq!(reference_distance_m, 100.0);
            }
            other => panic!("expected dual, got {other:?}"),
        }

        assert!(FileConfig::from_toml_str("[pathloss]\nmodel = \"cubic\"\n").is_err());
        assert!(FileConfig::from_toml_str("[pathloss]\nmodel = \"single\"\n").is_err());
    }

    #[test]
    fn policy_strings_parse() {
        let cfg = FileConfig::from_toml_str(
            "[downlink]\npolicy = \"biased\"\n[uplink]\npolicy = \"decoupled\"\n",
        )
        .unwrap();
        assert_eq!(cfg.downlink.policy, DownlinkPolicyKind::Biased);
        assert_eq!(cfg.uplink.policy, UplinkPolicy::Decoupled);
        assert!(FileConfig::from_toml_str("[downlink]\npolicy = \"best\"\n").is_err());
    }

    #[test]
    fn scenario_validation_names_config_keys() {
        let cfg =
            FileConfig::from_toml_str("[femto]\ndensity_per_km2 = -1\ntx_power_dbm = 23\n")
                .unwrap();
        let err = cfg.to_scenario().unwrap_err();
        assert!(err.to_string().contains("femto.density_per_km2"), "{err}");

        let cfg = FileConfig::from_toml_str("[region]\nhalf_width_km = 0\n").unwrap();
        let err = cfg.to_scenario().unwrap_err();
        assert!(err.to_string().contains("region.half_width_km"), "{err}");
    }

    #[test]
    fn bias_without_biased_policy_is_rejected() {
        let cfg = FileConfig::from_toml_str(
            "[femto]\ndensity_per_km2 = 10\ntx_power_dbm = 23\nbias_db = 7\n",
        )
        .unwrap();
        let err = cfg.to_scenario().unwrap_err();
        assert!(err.to_string().contains("max-power"), "{err}");

        let cfg = FileConfig::from_toml_str(
            "[downlink]\npolicy = \"biased\"\n\
             [femto]\ndensity_per_km2 = 10\ntx_power_dbm = 23\nbias_db = 7\n",
        )
        .unwrap();
        let scenario = cfg.to_scenario().unwrap();
        assert_eq!(scenario.tiers[SMALL_CELL_TIER].bias_db, 7.0);
    }

    #[test]
    fn sweep_defaults() {
        let s = SweepSection::default();
        assert_eq!(s.bias_grid().unwrap().values_db().len(), 13);
        assert_eq!(s.femto_densities_per_km2.len(), 8);
        assert_eq!(s.macro_densities_per_km2, vec![0.5, 1.0, 2.0, 5.0]);
        assert_eq!(s.femto_per_macro_ratio, 10.0);
        let labels: Vec<String> = s.models.iter().map(|m| m.label()).collect();
        assert_eq!(labels, ["single_a2", "single_a3", "dual_a2_a4", "dual_a3_a4"]);
        assert_eq!(s.objective, BiasObjective::MedianRate);

        let cfg = FileConfig::from_toml_str(
            "[sweep]\nbias_max_db = 6\nobjective = \"edge\"\n\
             [[sweep.models]]\nmodel = \"single\"\nalpha = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.sweep.bias_grid().unwrap().values_db().len(), 7);
        assert_eq!(cfg.sweep.objective, BiasObjective::EdgeRate);
        assert_eq!(cfg.sweep.models, vec![PathLossSpec::single(4.0)]);

        let bad = FileConfig::from_toml_str("[sweep]\nbias_step_db = -1\n").unwrap();
        assert!(bad.sweep.bias_grid().is_err());
    }

    #[test]
    fn toml_round_trip_preserves_config() {
        let mut cfg = FileConfig {
            seed: 99,
            pathloss: PathLossSpec::single(2.75),
            ..FileConfig::default()
        };
        cfg.femto.density_per_km2 = 42.0;
        cfg.uplink.policy = UplinkPolicy::Decoupled;
        cfg.sweep.femto_densities_per_km2 = vec![1.0, 10.0];

        let text = cfg.to_toml_string().unwrap();
        let reparsed = FileConfig::from_toml_str(&text).unwrap();
        assert_eq!(reparsed, cfg);
        assert_eq!(reparsed.to_scenario().unwrap(), cfg.to_scenario().unwrap());
    }

    #[test]
    fn manifest_round_trip() {
        let manifest = RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            command: "run".into(),
            started_at: "2026-01-01T00:00:00Z".into(),
            finished_at: "2026-01-01T00:10:00Z".into(),
            master_seed: 7,
            drops_per_point: 100,
            workers: 2,
            total_resamples: 3,
            output_files: vec!["drops.csv".into(), "summary.csv".into()],
            config: FileConfig::default(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest(dir.path(), &manifest).unwrap();
        assert!(path.ends_with("run_manifest.toml"));
        let text = std::fs::read_to_string(&path).unwrap();
        let reparsed: RunManifest = toml::from_str(&text).unwrap();
        assert_eq!(reparsed, manifest);
    }

    #[test]
    fn load_config_defaults_without_path() {
        assert_eq!(load_config(None).unwrap(), FileConfig::default());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "seed = 5\n").unwrap();
        assert_eq!(load_config(Some(&p)).unwrap().seed, 5);
        assert!(load_config(Some(&dir.path().join("missing.toml"))).is_err());
    }
}
