//! Scenario orchestration: seeds in, per-drop results and summaries out.
//!
//! Each drop is generated, associated, and measured independently from its
//! `(master_seed, drop_index)` pair, so serial and parallel execution give
//! byte-identical results. A whole bias grid can be evaluated on one set
//! of drops: geometry, fading, and per-tier channel bests are computed
//! once, and only the tier-weight comparison reruns per bias value.

use crate::association::{
    decoupled_uplink_map, downlink_tier_bests, downlink_weights_mw, map_from_bests,
    AssociationMap, DownlinkPolicy, TierBest, UplinkPolicy, UplinkPowerRule,
};
use crate::geometry::Region;
use crate::linkmetrics::{downlink_budget, rate_bps_hz, uplink_budget};
use crate::network::{BsId, DropContext, NetworkDrop};
use crate::propagation::{PathLossModel, PathLossSpec, TierConfig};
use crate::stats::percentile;
use crate::{Result, SimError};
use rayon::prelude::*;

/// Tier index sweeps treat as the small-cell tier: bias is applied here,
/// association share is reported for it. The macro tier is index 0.
pub const SMALL_CELL_TIER: usize = 1;

/// How the downlink serving cell is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DownlinkPolicyKind {
    /// Highest instantaneous received power.
    MaxPower,
    /// Highest received power after per-tier bias offsets.
    Biased,
}

/// Complete description of one simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub region: Region,
    pub tiers: Vec<TierConfig>,
    pub user_density_per_km2: f64,
    pub path_loss: PathLossSpec,
    pub noise_dbm: f64,
    pub downlink: DownlinkPolicyKind,
    pub uplink: UplinkPolicy,
    pub uplink_power: UplinkPowerRule,
    pub n_drops: u32,
    pub master_seed: u64,
    /// Diagnostic mode: uplink links reuse the downlink fading draw.
    pub shared_ul_dl_fading: bool,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SimError::Config(msg));
        if self.tiers.len() != 2 {
            return fail(format!("exactly two tiers required, got {}", self.tiers.len()));
        }
        for (i, t) in self.tiers.iter().enumerate() {
            if t.name.is_empty() {
                return fail(format!("tiers[{i}].name must not be empty"));
            }
            if !t.density_per_km2.is_finite() || t.density_per_km2 < 0.0 {
                return fail(format!(
                    "{}.density_per_km2 must be nonnegative and finite, got {}",
                    t.name, t.density_per_km2
                ));
            }
            if !t.tx_power_dbm.is_finite() {
                return fail(format!("{}.tx_power_dbm must be finite, got {}", t.name, t.tx_power_dbm));
            }
            if !t.bias_db.is_finite() {
                return fail(format!("{}.bias_db must be finite, got {}", t.name, t.bias_db));
            }
        }
        if self.tiers.iter().map(|t| t.density_per_km2).sum::<f64>() <= 0.0 {
            return fail("total base-station density must be positive".into());
        }
        if self.tiers[0].band == self.tiers[1].band {
            return fail(format!(
                "tiers must occupy distinct bands, both use band {}",
                self.tiers[0].band
            ));
        }
        if !self.user_density_per_km2.is_finite() || self.user_density_per_km2 < 0.0 {
            return fail(format!(
                "users.density_per_km2 must be nonnegative and finite, got {}",
                self.user_density_per_km2
            ));
        }
        PathLossModel::from_spec(&self.path_loss)?;
        if !self.noise_dbm.is_finite() {
            return fail(format!("noise.power_dbm must be finite, got {}", self.noise_dbm));
        }
        if !self.uplink_power.target_rx_dbm.is_finite() {
            return fail(format!(
                "uplink.target_rx_power_dbm must be finite, got {}",
                self.uplink_power.target_rx_dbm
            ));
        }
        if !self.uplink_power.max_tx_dbm.is_finite() {
            return fail(format!(
                "uplink.max_tx_power_dbm must be finite, got {}",
                self.uplink_power.max_tx_dbm
            ));
        }
        if self.n_drops == 0 {
            return fail("drops must be at least 1".into());
        }
        Ok(())
    }

    /// Effective downlink policy with per-tier biases resolved.
    pub fn downlink_policy(&self) -> DownlinkPolicy {
        match self.downlink {
            DownlinkPolicyKind::MaxPower => DownlinkPolicy::MaxPower,
            DownlinkPolicyKind::Biased => {
                DownlinkPolicy::Biased(self.tiers.iter().map(|t| t.bias_db).collect())
            }
        }
    }

    /// Copy of this scenario with the small-cell tier biased by `bias_db`.
    pub fn with_small_cell_bias(&self, bias_db: f64) -> Self {
        let mut out = self.clone();
        out.tiers[SMALL_CELL_TIER].bias_db = bias_db;
        out.downlink = DownlinkPolicyKind::Biased;
        out
    }

    /// Copy with a different path-loss model, same everything else.
    pub fn with_path_loss(&self, spec: PathLossSpec) -> Self {
        let mut out = self.clone();
        out.path_loss = spec;
        out
    }

    /// Copy with a different small-cell density.
    pub fn with_small_cell_density(&self, density_per_km2: f64) -> Self {
        let mut out = self.clone();
        out.tiers[SMALL_CELL_TIER].density_per_km2 = density_per_km2;
        out
    }
}

/// Everything measured on one drop for the tagged user.
#[derive(Debug, Clone, PartialEq)]
pub struct DropResult {
    pub drop_index: u64,
    pub resamples: u32,
    pub dl_serving: BsId,
    pub ul_serving: BsId,
    /// Uplink and downlink landed on different cells (decoupled policy).
    pub mismatch: bool,
    pub dl_load: u32,
    pub ul_load: u32,
    pub dl_sinr: f64,
    pub ul_sinr: f64,
    pub dl_rate: f64,
    /// Rate under the configured uplink policy.
    pub ul_rate: f64,
    pub ul_rate_coupled: f64,
    pub ul_rate_decoupled: f64,
}

/// p10/p50/p90 of one rate sample set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateStats {
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

impl RateStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        Ok(Self {
            p10: percentile(samples, 10.0)?,
            p50: percentile(samples, 50.0)?,
            p90: percentile(samples, 90.0)?,
        })
    }
}

/// Scenario-level summary over all drops.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub dl: RateStats,
    pub ul: RateStats,
    pub ul_coupled: RateStats,
    pub ul_decoupled: RateStats,
    pub mismatch_fraction: f64,
    /// Fraction of drops whose tagged user is downlink-served by the
    /// small-cell tier.
    pub small_cell_fraction: f64,
    pub mean_resamples: f64,
    pub n_drops: usize,
}

/// All drop results plus their summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub drops: Vec<DropResult>,
    pub stats: SummaryStats,
}

impl ScenarioOutcome {
    pub fn from_drops(drops: Vec<DropResult>) -> Result<Self> {
        if drops.is_empty() {
            return Err(SimError::EmptySamples);
        }
        let collect = |f: fn(&DropResult) -> f64| -> Vec<f64> { drops.iter().map(f).collect() };
        let n = drops.len() as f64;
        let stats = SummaryStats {
            dl: RateStats::from_samples(&collect(|d| d.dl_rate))?,
            ul: RateStats::from_samples(&collect(|d| d.ul_rate))?,
            ul_coupled: RateStats::from_samples(&collect(|d| d.ul_rate_coupled))?,
            ul_decoupled: RateStats::from_samples(&collect(|d| d.ul_rate_decoupled))?,
            mismatch_fraction: drops.iter().filter(|d| d.mismatch).count() as f64 / n,
            small_cell_fraction: drops
                .iter()
                .filter(|d| d.dl_serving.tier as usize == SMALL_CELL_TIER)
                .count() as f64
                / n,
            mean_resamples: drops.iter().map(|d| f64::from(d.resamples)).sum::<f64>() / n,
            n_drops: drops.len(),
        };
        Ok(Self { drops, stats })
    }
}

/// A validated scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    model: PathLossModel,
    dl_weights: Vec<f64>,
}

impl Scenario {
    pub fn prepare(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let model = PathLossModel::from_spec(&config.path_loss)?;
        let policy = config.downlink_policy();
        let dl_weights = downlink_weights_mw(&config.tiers, &policy);
        Ok(Self { config, model, dl_weights })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn model(&self) -> &PathLossModel {
        &self.model
    }

    /// Runs one drop end to end.
    pub fn run_drop(&self, drop_index: u64) -> Result<DropResult> {
        let c = &self.config;
        let drop = NetworkDrop::generate(
            c.region,
            &c.tiers,
            c.user_density_per_km2,
            &self.model,
            c.master_seed,
            drop_index,
        )?;
        let ctx = DropContext::new(&drop, &self.model, &c.tiers, c.noise_dbm, c.shared_ul_dl_fading);
        let bests = downlink_tier_bests(&ctx)?;
        let dec_map = decoupled_uplink_map(&ctx)?;
        evaluate(&ctx, &bests, &dec_map, &self.dl_weights, c.uplink, &c.uplink_power, drop_index)
    }

    /// Runs every drop; parallelism never changes results because each
    /// drop self-seeds and results are collected in index order.
    pub fn run(&self) -> Result<ScenarioOutcome> {
        let drops: Vec<DropResult> = (0..u64::from(self.config.n_drops))
            .into_par_iter()
            .map(|i| self.run_drop(i))
            .collect::<Result<_>>()?;
        ScenarioOutcome::from_drops(drops)
    }

    /// Evaluates every bias value on shared drops: one geometry sample,
    /// one channel-best scan, and one decoupled uplink map per drop, then
    /// a cheap weighted comparison per bias. Outcome `i` is byte-identical
    /// to `Scenario::prepare(config.with_small_cell_bias(biases_db[i]))
    /// .run()`.
    pub fn run_bias_grid(&self, biases_db: &[f64]) -> Result<Vec<ScenarioOutcome>> {
        if biases_db.is_empty() {
            return Err(SimError::InvalidParameter("bias grid must not be empty".into()));
        }
        let c = &self.config;
        let weight_sets: Vec<Vec<f64>> = biases_db
            .iter()
            .map(|&b| {
                let biased = c.with_small_cell_bias(b);
                downlink_weights_mw(&biased.tiers, &biased.downlink_policy())
            })
            .collect();
        let per_drop: Vec<Vec<DropResult>> = (0..u64::from(c.n_drops))
            .into_par_iter()
            .map(|drop_index| {
                let drop = NetworkDrop::generate(
                    c.region,
                    &c.tiers,
                    c.user_density_per_km2,
                    &self.model,
                    c.master_seed,
                    drop_index,
                )?;
                let ctx = DropContext::new(
                    &drop,
                    &self.model,
                    &c.tiers,
                    c.noise_dbm,
                    c.shared_ul_dl_fading,
                );
                let bests = downlink_tier_bests(&ctx)?;
                let dec_map = decoupled_uplink_map(&ctx)?;
                weight_sets
                    .iter()
                    .map(|w| evaluate(&ctx, &bests, &dec_map, w, c.uplink, &c.uplink_power, drop_index))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        (0..biases_db.len())
            .map(|b| {
                let drops = per_drop.iter().map(|row| row[b].clone()).collect();
                ScenarioOutcome::from_drops(drops)
            })
            .collect()
    }
}

/// Measures the tagged user once associations are fixed. Shared verbatim
/// by the single-policy path and the bias-grid path.
fn evaluate(
    ctx: &DropContext,
    bests: &[Vec<TierBest>],
    dec_map: &AssociationMap,
    dl_weights: &[f64],
    ul_policy: UplinkPolicy,
    rule: &UplinkPowerRule,
    drop_index: u64,
) -> Result<DropResult> {
    let dl_map = map_from_bests(ctx, bests, dl_weights)?;
    let tagged = ctx.drop.tagged_user;
    let dl_serving = dl_map.serving[tagged as usize];
    let dl_load = dl_map.load(dl_serving);
    let dl_sinr = downlink_budget(ctx, tagged, dl_serving)?.sinr();
    let dl_rate = rate_bps_hz(dl_sinr, dl_load)?;

    let ul_coupled_sinr = uplink_budget(ctx, tagged, dl_serving, &dl_map, rule)?.sinr();
    let ul_rate_coupled = rate_bps_hz(ul_coupled_sinr, dl_load)?;

    let dec_serving = dec_map.serving[tagged as usize];
    let dec_load = dec_map.load(dec_serving);
    let ul_dec_sinr = uplink_budget(ctx, tagged, dec_serving, dec_map, rule)?.sinr();
    let ul_rate_decoupled = rate_bps_hz(ul_dec_sinr, dec_load)?;

    let (ul_serving, ul_sinr, ul_load, ul_rate) = match ul_policy {
        UplinkPolicy::Coupled => (dl_serving, ul_coupled_sinr, dl_load, ul_rate_coupled),
        UplinkPolicy::Decoupled => (dec_serving, ul_dec_sinr, dec_load, ul_rate_decoupled),
    };
    Ok(DropResult {
        drop_index,
        resamples: ctx.drop.resamples,
        dl_serving,
        ul_serving,
        mismatch: ul_serving != dl_serving,
        dl_load,
        ul_load,
        dl_sinr,
        ul_sinr,
        dl_rate,
        ul_rate,
        ul_rate_coupled,
        ul_rate_decoupled,
    })
}

/// Baseline two-tier setup: 46 dBm macros on one band, 23 dBm femtos on
/// another, 200 users/km^2, -10 dBm noise, truncated inversion uplink
/// toward -70 dBm with a 20 dBm cap, unbiased max-power association.
pub fn baseline_config() -> ScenarioConfig {
    ScenarioConfig {
        region: Region::new(10.0).expect("static value"),
        tiers: vec![
            TierConfig {
                name: "macro".into(),
                density_per_km2: 1.0,
                tx_power_dbm: 46.0,
                band: 0,
                bias_db: 0.0,
            },
            TierConfig {
                name: "femto".into(),
                density_per_km2: 10.0,
                tx_power_dbm: 23.0,
                band: 1,
                bias_db: 0.0,
            },
        ],
        user_density_per_km2: 200.0,
        path_loss: PathLossSpec::dual(3.0, 4.0),
        noise_dbm: -10.0,
        downlink: DownlinkPolicyKind::MaxPower,
        uplink: UplinkPolicy::Coupled,
        uplink_power: UplinkPowerRule { target_rx_dbm: -70.0, max_tx_dbm: 20.0 },
        n_drops: 2000,
        master_seed: 0,
        shared_ul_dl_fading: false,
    }
}
