//! Parameter sweeps over bias values and deployment densities, and the
//! gain metrics reported from them.
//!
//! Every sweep point shares one rule: evaluate a whole bias grid on common
//! drops (common random numbers), pick the optimal bias by a rate
//! objective, and report rate gains of the optimum against the zero-bias
//! baseline on those same drops.

use crate::engine::{DropResult, Scenario, ScenarioConfig, ScenarioOutcome, SMALL_CELL_TIER};
use crate::association::UplinkPolicy;
use crate::{Result, SimError};

/// Strictly increasing, finite bias values in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasGrid {
    values_db: Vec<f64>,
}

impl BiasGrid {
    pub fn new(values_db: Vec<f64>) -> Result<Self> {
        if values_db.is_empty() {
            return Err(SimError::InvalidParameter("bias grid must not be empty".into()));
        }
        if values_db.iter().any(|v| !v.is_finite()) {
            return Err(SimError::InvalidParameter("bias grid values must be finite".into()));
        }
        if values_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::InvalidParameter(
                "bias grid values must be strictly increasing".into(),
            ));
        }
        Ok(Self { values_db })
    }

    /// Inclusive range `min..=max` in `step` increments.
    pub fn from_range(min_db: f64, max_db: f64, step_db: f64) -> Result<Self> {
        if !step_db.is_finite() || step_db <= 0.0 {
            return Err(SimError::InvalidParameter(format!(
                "bias step must be positive, got {step_db}"
            )));
        }
        if !min_db.is_finite() || !max_db.is_finite() || max_db < min_db {
            return Err(SimError::InvalidParameter(format!(
                "bias range [{min_db}, {max_db}] is invalid"
            )));
        }
        let mut values = Vec::new();
        let mut k = 0u32;
        loop {
            let v = min_db + step_db * f64::from(k);
            if v > max_db + 1e-9 {
                break;
            }
            values.push(v);
            k += 1;
        }
        Self::new(values)
    }

    pub fn values_db(&self) -> &[f64] {
        &self.values_db
    }

    /// Position of the zero-bias baseline, if the grid includes 0 dB.
    pub fn zero_index(&self) -> Option<usize> {
        self.values_db.iter().position(|&v| v == 0.0)
    }
}

/// Default grid used by the sweeps: 0 to 12 dB in 1 dB steps.
pub fn default_bias_grid() -> BiasGrid {
    BiasGrid::from_range(0.0, 12.0, 1.0).expect("static range")
}

/// Default small-cell densities: eight log-spaced points, 0.1 to ~316 per
/// km^2, covering relative densities well past the interesting regime.
pub fn default_small_cell_densities() -> Vec<f64> {
    (0..8).map(|i| 10f64.powf(-1.0 + 0.5 * f64::from(i))).collect()
}

/// Default macro densities for the joint sweep.
pub fn default_macro_densities() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 5.0]
}

/// Which downlink-rate percentile the optimal bias maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BiasObjective {
    /// Median (50th percentile) rate.
    #[serde(rename = "median")]
    MedianRate,
    /// Edge (10th percentile) rate.
    #[serde(rename = "edge")]
    EdgeRate,
}

impl BiasObjective {
    pub fn value(&self, outcome: &ScenarioOutcome) -> f64 {
        match self {
            Self::MedianRate => outcome.stats.dl.p50,
            Self::EdgeRate => outcome.stats.dl.p10,
        }
    }
}

/// The winning grid point of a bias sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasSelection {
    pub index: usize,
    pub bias_db: f64,
    pub objective_value: f64,
}

/// Argmax of the objective over aligned grid values and outcomes. Ties
/// resolve toward the smallest bias, so a flat objective reports 0 dB
/// rather than an arbitrary plateau point.
pub fn select_optimal_bias(
    values_db: &[f64],
    outcomes: &[ScenarioOutcome],
    objective: BiasObjective,
) -> Result<BiasSelection> {
    if values_db.len() != outcomes.len() || values_db.is_empty() {
        return Err(SimError::InvalidParameter(
            "bias selection needs equal, nonempty grids and outcomes".into(),
        ));
    }
    let mut best = BiasSelection {
        index: 0,
        bias_db: values_db[0],
        objective_value: objective.value(&outcomes[0]),
    };
    for (i, (v, o)) in values_db.iter().zip(outcomes).enumerate().skip(1) {
        let value = objective.value(o);
        if value > best.objective_value {
            best = BiasSelection { index: i, bias_db: *v, objective_value: value };
        }
    }
    Ok(best)
}

/// Ratio of a rate with some mechanism enabled to the rate without it.
pub fn gain(with: f64, without: f64) -> Result<f64> {
    if !with.is_finite() || with < 0.0 {
        return Err(SimError::InvalidParameter(format!("gain numerator invalid: {with}")));
    }
    if !without.is_finite() || without <= 0.0 {
        return Err(SimError::InvalidParameter(format!(
            "gain baseline must be positive and finite, got {without}"
        )));
    }
    Ok(with / without)
}

/// Fraction of drops whose uplink and downlink cells differ.
pub fn mismatch_fraction(drops: &[DropResult]) -> Result<f64> {
    if drops.is_empty() {
        return Err(SimError::EmptySamples);
    }
    Ok(drops.iter().filter(|d| d.mismatch).count() as f64 / drops.len() as f64)
}

/// One sweep point: a (model, macro density, small-cell density) cell and
/// everything reported about it.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPoint {
    pub small_cell_density_per_km2: f64,
    pub macro_density_per_km2: f64,
    pub model_label: String,
    pub alpha0: f64,
    pub alpha1: f64,
    pub optimal_bias_db: f64,
    /// Downlink rate percentiles at optimal bias over the same percentile
    /// at zero bias.
    pub dl_p10_gain: f64,
    pub dl_p50_gain: f64,
    pub dl_p90_gain: f64,
    /// Median uplink rates at the optimal bias.
    pub ul_coupled_p50: f64,
    pub ul_decoupled_p50: f64,
    /// Median coupled uplink rate at optimal bias over zero bias.
    pub ul_bias_gain: f64,
    /// Median decoupled over coupled uplink rate, both at optimal bias.
    pub ul_decoupling_gain: f64,
    pub mismatch_frac_nobias: f64,
    pub mismatch_frac_optbias: f64,
    /// Small-cell downlink association share at optimal bias.
    pub small_cell_assoc_frac: f64,
    pub n_drops: u32,
    pub seed: u64,
    /// Zero-cell resamples while generating this point's drops. Manifest
    /// metadata, not a CSV column.
    pub total_resamples: u64,
}

/// Bias-grid evaluation of one configuration, with the zero-bias baseline
/// guaranteed present.
pub struct PointEvaluation {
    pub grid_values_db: Vec<f64>,
    pub outcomes: Vec<ScenarioOutcome>,
    pub zero_index: usize,
    pub selection: BiasSelection,
}

/// Runs the bias grid for `config` (uplink forced to decoupled so both
/// uplink variants and the mismatch diagnostic are measured) and selects
/// the optimal bias. A 0 dB baseline is injected if the grid lacks it;
/// the injected point is excluded from the argmax.
pub fn evaluate_point(
    config: &ScenarioConfig,
    grid: &BiasGrid,
    objective: BiasObjective,
) -> Result<PointEvaluation> {
    let mut cfg = config.clone();
    cfg.uplink = UplinkPolicy::Decoupled;
    let mut values: Vec<f64> = grid.values_db().to_vec();
    let injected_zero = grid.zero_index().is_none();
    if injected_zero {
        values.insert(0, 0.0);
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::InvalidParameter(
                "bias grid with negative values must include 0 dB explicitly".into(),
            ));
        }
    }
    let outcomes = Scenario::prepare(cfg)?.run_bias_grid(&values)?;
    let zero_index = values.iter().position(|&v| v == 0.0).expect("zero ensured above");
    let (sel_values, sel_outcomes) = if injected_zero {
        (&values[1..], &outcomes[1..])
    } else {
        (&values[..], &outcomes[..])
    };
    let mut selection = select_optimal_bias(sel_values, sel_outcomes, objective)?;
    if injected_zero {
        selection.index += 1;
    }
    Ok(PointEvaluation { grid_values_db: values, outcomes, zero_index, selection })
}

impl PointEvaluation {
    pub fn zero(&self) -> &ScenarioOutcome {
        &self.outcomes[self.zero_index]
    }

    pub fn optimal(&self) -> &ScenarioOutcome {
        &self.outcomes[self.selection.index]
    }

    /// Resamples for this point's generated drops. Every outcome shares
    /// the same realizations, so one outcome is counted.
    pub fn total_resamples(&self) -> u64 {
        self.outcomes[self.zero_index]
            .drops
            .iter()
            .map(|d| u64::from(d.resamples))
            .sum()
    }

    /// Collapses the evaluation into the reported sweep row.
    pub fn density_point(&self, config: &ScenarioConfig) -> Result<DensityPoint> {
        let zero = self.zero();
        let opt = self.optimal();
        let (alpha0, alpha1) = config.path_loss.exponents();
        Ok(DensityPoint {
            small_cell_density_per_km2: config.tiers[SMALL_CELL_TIER].density_per_km2,
            macro_density_per_km2: config.tiers[0].density_per_km2,
            model_label: config.path_loss.label(),
            alpha0,
            alpha1,
            optimal_bias_db: self.selection.bias_db,
            dl_p10_gain: gain(opt.stats.dl.p10, zero.stats.dl.p10)?,
            dl_p50_gain: gain(opt.stats.dl.p50, zero.stats.dl.p50)?,
            dl_p90_gain: gain(opt.stats.dl.p90, zero.stats.dl.p90)?,
            ul_coupled_p50: opt.stats.ul_coupled.p50,
            ul_decoupled_p50: opt.stats.ul_decoupled.p50,
            ul_bias_gain: gain(opt.stats.ul_coupled.p50, zero.stats.ul_coupled.p50)?,
            ul_decoupling_gain: gain(opt.stats.ul_decoupled.p50, opt.stats.ul_coupled.p50)?,
            mismatch_frac_nobias: zero.stats.mismatch_fraction,
            mismatch_frac_optbias: opt.stats.mismatch_fraction,
            small_cell_assoc_frac: opt.stats.small_cell_fraction,
            n_drops: opt.stats.n_drops as u32,
            seed: config.master_seed,
            total_resamples: self.total_resamples(),
        })
    }
}

fn check_densities(label: &str, densities: &[f64]) -> Result<()> {
    if densities.is_empty() {
        return Err(SimError::InvalidParameter(format!("{label} list must not be empty")));
    }
    if densities.iter().any(|d| !d.is_finite() || *d <= 0.0) {
        return Err(SimError::InvalidParameter(format!(
            "{label} values must be positive and finite"
        )));
    }
    Ok(())
}

/// Sweeps the small-cell density, one row per density.
pub fn density_sweep(
    base: &ScenarioConfig,
    small_cell_densities: &[f64],
    grid: &BiasGrid,
    objective: BiasObjective,
) -> Result<Vec<DensityPoint>> {
    check_densities("small-cell density", small_cell_densities)?;
    small_cell_densities
        .iter()
        .map(|&d| {
            let cfg = base.with_small_cell_density(d);
            evaluate_point(&cfg, grid, objective)?.density_point(&cfg)
        })
        .collect()
}

/// Sweeps the macro density at a fixed small-cell-to-macro ratio, one row
/// per macro density.
pub fn joint_density_sweep(
    base: &ScenarioConfig,
    macro_densities: &[f64],
    small_cell_ratio: f64,
    grid: &BiasGrid,
    objective: BiasObjective,
) -> Result<Vec<DensityPoint>> {
    check_densities("macro density", macro_densities)?;
    if !small_cell_ratio.is_finite() || small_cell_ratio <= 0.0 {
        return Err(SimError::InvalidParameter(format!(
            "small-cell ratio must be positive, got {small_cell_ratio}"
        )));
    }
    macro_densities
        .iter()
        .map(|&m| {
            let mut cfg = base.clone();
            cfg.tiers[0].density_per_km2 = m;
            cfg.tiers[SMALL_CELL_TIER].density_per_km2 = m * small_cell_ratio;
            evaluate_point(&cfg, grid, objective)?.density_point(&cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::baseline_config;
    use crate::geometry::Region;
    use crate::network::BsId;

    fn tiny_config() -> ScenarioConfig {
        let mut c = baseline_config();
        c.region = Region::new(0.8).unwrap();
        c.user_density_per_km2 = 40.0;
        c.n_drops = 25;
        c.master_seed = 11;
        c
    }

    #[test]
    fn grid_validation() {
        assert!(BiasGrid::new(vec![]).is_err());
        assert!(BiasGrid::new(vec![0.0, 0.0]).is_err());
        assert!(BiasGrid::new(vec![2.0, 1.0]).is_err());
        assert!(BiasGrid::new(vec![0.0, f64::NAN]).is_err());
        assert!(BiasGrid::from_range(0.0, 12.0, 0.0).is_err());
        assert!(BiasGrid::from_range(5.0, 4.0, 1.0).is_err());

        let g = BiasGrid::from_range(0.0, 12.0, 1.0).unwrap();
        assert_eq!(g.values_db().len(), 13);
        assert_eq!(g.values_db()[0], 0.0);
        assert_eq!(g.values_db()[12], 12.0);
        assert_eq!(g.zero_index(), Some(0));
        assert_eq!(default_bias_grid(), g);
    }

    #[test]
    fn default_density_lists() {
        let d = default_small_cell_densities();
        assert_eq!(d.len(), 8);
        assert!((d[0] - 0.1).abs() < 1e-12);
        assert!((d[2] - 1.0).abs() < 1e-12);
        assert!((d[7] - 316.227_766_016_837_94).abs() < 1e-9);
        assert!(d.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn gain_spot_values() {
        assert_eq!(gain(2.0, 1.0).unwrap(), 2.0);
        let r = 0.731;
        assert_eq!(gain(r, r).unwrap(), 1.0);
        assert!(gain(1.0, 0.0).is_err());
        assert!(gain(f64::NAN, 1.0).is_err());
        assert!(gain(-1.0, 1.0).is_err());
    }

    fn fake_outcome(dl_rates: &[f64]) -> ScenarioOutcome {
        let drops = dl_rates
            .iter()
            .enumerate()
            .map(|(i, &r)| DropResult {
                drop_index: i as u64,
                resamples: 0,
                dl_serving: BsId::new(0, 0),
                ul_serving: BsId::new(0, 0),
                mismatch: false,
                dl_load: 1,
                ul_load: 1,
                dl_sinr: 1.0,
                ul_sinr: 1.0,
                dl_rate: r,
                ul_rate: r,
                ul_rate_coupled: r,
                ul_rate_decoupled: r,
            })
            .collect();
        ScenarioOutcome::from_drops(drops).unwrap()
    }

    #[test]
    fn optimal_bias_is_argmax_with_ties_toward_smaller() {
        let grid = [0.0, 3.0, 6.0];
        let rising = [
            fake_outcome(&[1.0, 1.0, 1.0]),
            fake_outcome(&[2.0, 2.0, 2.0]),
            fake_outcome(&[3.0, 3.0, 3.0]),
        ];
        let sel = select_optimal_bias(&grid, &rising, BiasObjective::MedianRate).unwrap();
        assert_eq!(sel.bias_db, 6.0);
        assert_eq!(sel.index, 2);

        let flat = [
            fake_outcome(&[2.0, 2.0]),
            fake_outcome(&[2.0, 2.0]),
            fake_outcome(&[2.0, 2.0]),
        ];
        let sel = select_optimal_bias(&grid, &flat, BiasObjective::MedianRate).unwrap();
        assert_eq!(sel.bias_db, 0.0);

        assert!(select_optimal_bias(&grid, &rising[..2], BiasObjective::MedianRate).is_err());
    }

    #[test]
    fn objectives_read_different_percentiles() {
        let o = fake_outcome(&(1..=100).map(f64::from).collect::<Vec<_>>());
        assert_eq!(BiasObjective::MedianRate.value(&o), o.stats.dl.p50);
        assert_eq!(BiasObjective::EdgeRate.value(&o), o.stats.dl.p10);
        assert!(BiasObjective::EdgeRate.value(&o) < BiasObjective::MedianRate.value(&o));
    }

    #[test]
    fn mismatch_fraction_cases() {
        assert!(mismatch_fraction(&[]).is_err());
        let mut drops = fake_outcome(&[1.0, 1.0, 1.0, 1.0]).drops;
        assert_eq!(mismatch_fraction(&drops).unwrap(), 0.0);
        for d in drops.iter_mut() {
            d.mismatch = true;
        }
        assert_eq!(mismatch_fraction(&drops).unwrap(), 1.0);
        drops[0].mismatch = false;
        assert_eq!(mismatch_fraction(&drops).unwrap(), 0.75);
    }

    #[test]
    fn evaluated_optimum_matches_exhaustive_rescan() {
        // The grid evaluation itself is the oracle: re-derive the argmax
        // from the returned outcomes and compare.
        let grid = BiasGrid::new(vec![0.0, 4.0, 8.0, 12.0]).unwrap();
        let eval = evaluate_point(&tiny_config(), &grid, BiasObjective::MedianRate).unwrap();
        let medians: Vec<f64> = eval.outcomes.iter().map(|o| o.stats.dl.p50).collect();
        let mut best = 0;
        for (i, &m) in medians.iter().enumerate() {
            if m > medians[best] {
                best = i;
            }
        }
        assert_eq!(eval.selection.index, best);
        assert_eq!(eval.selection.objective_value, medians[best]);
        assert_eq!(eval.zero_index, 0);
    }

    #[test]
    fn single_tier_scenario_reports_unit_gains_and_zero_bias() {
        let mut cfg = tiny_config();
        cfg.tiers[SMALL_CELL_TIER].density_per_km2 = 0.0;
        let grid = BiasGrid::new(vec![0.0, 6.0, 12.0]).unwrap();
        let eval = evaluate_point(&cfg, &grid, BiasObjective::MedianRate).unwrap();
        let point = eval.density_point(&cfg).unwrap();
        // Bias moves nobody when the biased tier is empty.
        assert_eq!(point.optimal_bias_db, 0.0);
        assert_eq!(point.dl_p10_gain, 1.0);
        assert_eq!(point.dl_p50_gain, 1.0);
        assert_eq!(point.dl_p90_gain, 1.0);
        assert_eq!(point.ul_bias_gain, 1.0);
        assert_eq!(point.small_cell_assoc_frac, 0.0);
    }

    #[test]
    fn zero_baseline_is_injected_when_missing() {
        let grid = BiasGrid::new(vec![3.0, 9.0]).unwrap();
        let eval = evaluate_point(&tiny_config(), &grid, BiasObjective::MedianRate).unwrap();
        assert_eq!(eval.grid_values_db, vec![0.0, 3.0, 9.0]);
        assert_eq!(eval.zero_index, 0);
        // The injected baseline cannot win the argmax.
        assert!(eval.selection.index >= 1);
    }

    #[test]
    fn density_sweep_produces_aligned_rows() {
        let cfg = tiny_config();
        let grid = BiasGrid::new(vec![0.0, 6.0]).unwrap();
        let densities = [2.0, 20.0];
        let rows = density_sweep(&cfg, &densities, &grid, BiasObjective::MedianRate).unwrap();
        assert_eq!(rows.len(), 2);
        for (row, &d) in rows.iter().zip(&densities) {
            assert_eq!(row.small_cell_density_per_km2, d);
            assert_eq!(row.macro_density_per_km2, 1.0);
            assert_eq!(row.model_label, "dual_a3_a4");
            assert_eq!(row.alpha0, 3.0);
            assert_eq!(row.alpha1, 4.0);
            assert_eq!(row.n_drops, 25);
            assert_eq!(row.seed, 11);
            assert!(row.small_cell_assoc_frac >= 0.0 && row.small_cell_assoc_frac <= 1.0);
            assert!(row.mismatch_frac_nobias >= 0.0 && row.mismatch_frac_nobias <= 1.0);
        }
        // Denser small cells attract more of the association share.
        assert!(rows[1].small_cell_assoc_frac > rows[0].small_cell_assoc_frac);

        assert!(density_sweep(&cfg, &[], &grid, BiasObjective::MedianRate).is_err());
        assert!(density_sweep(&cfg, &[-1.0], &grid, BiasObjective::MedianRate).is_err());
    }

    #[test]
    fn joint_sweep_scales_both_tiers() {
        let cfg = tiny_config();
        let grid = BiasGrid::new(vec![0.0, 6.0]).unwrap();
        let rows =
            joint_density_sweep(&cfg, &[1.0, 3.0], 10.0, &grid, BiasObjective::MedianRate).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].macro_density_per_km2, 1.0);
        assert_eq!(rows[0].small_cell_density_per_km2, 10.0);
        assert_eq!(rows[1].macro_density_per_km2, 3.0);
        assert_eq!(rows[1].small_cell_density_per_km2, 30.0);
        assert!(joint_density_sweep(&cfg, &[1.0], 0.0, &grid, BiasObjective::MedianRate).is_err());
    }
}
