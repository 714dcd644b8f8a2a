//! Distance-based path loss, unit conversions, and Rayleigh fading.
//!
//! Path loss is a multiplicative power factor: `k * (x/d0)^-a` up to an
//! optional breakpoint, beyond which the exponent steepens and a constant
//! `(rc/d0)^(a1-a0)` keeps the two branches continuous at the breakpoint.

use crate::rng::unit_exp;
use crate::{Result, SimError};
use rand::RngCore;
use serde::{Deserialize, Serialize};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Declarative path-loss description, as it appears in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathLossSpec {
    Single {
        alpha: f64,
        #[serde(default = "default_reference_distance_m")]
        reference_distance_m: f64,
        #[serde(default = "default_gain_constant")]
        gain_constant: f64,
    },
    Dual {
        alpha0: f64,
        alpha1: f64,
        #[serde(default = "default_critical_radius_m")]
        critical_radius_m: f64,
        #[serde(default = "default_reference_distance_m")]
        reference_distance_m: f64,
        #[serde(default = "default_gain_constant")]
        gain_constant: f64,
    },
}

pub fn default_reference_distance_m() -> f64 {
    100.0
}

pub fn default_critical_radius_m() -> f64 {
    30.0
}

pub fn default_gain_constant() -> f64 {
    1.0
}

impl PathLossSpec {
    pub fn single(alpha: f64) -> Self {
        Self::Single {
            alpha,
            reference_distance_m: default_reference_distance_m(),
            gain_constant: default_gain_constant(),
        }
    }

    pub fn dual(alpha0: f64, alpha1: f64) -> Self {
        Self::Dual {
            alpha0,
            alpha1,
            critical_radius_m: default_critical_radius_m(),
            reference_distance_m: default_reference_distance_m(),
            gain_constant: default_gain_constant(),
        }
    }

    /// Short tag used in sweep output rows, e.g. `single_a3` or `dual_a2_a4`.
    pub fn label(&self) -> String {
        fn fmt(a: f64) -> String {
            if a == a.trunc() {
                format!("{}", a as i64)
            } else {
                format!("{a}")
            }
        }
        match self {
            Self::Single { alpha, .. } => format!("single_a{}", fmt(*alpha)),
            Self::Dual { alpha0, alpha1, .. } => {
                format!("dual_a{}_a{}", fmt(*alpha0), fmt(*alpha1))
            }
        }
    }

    /// Exponents in near-to-far order.
    pub fn exponents(&self) -> (f64, f64) {
        match *self {
            Self::Single { alpha, .. } => (alpha, alpha),
            Self::Dual { alpha0, alpha1, .. } => (alpha0, alpha1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slope {
    Single {
        alpha: f64,
    },
    Dual {
        alpha0: f64,
        alpha1: f64,
        critical_radius_m: f64,
        /// `gain_constant * (rc/d0)^(a1-a0)`, cached so the far branch is a
        /// single powf. With `a1 == a0` this is exactly `gain_constant`, so
        /// a degenerate dual model reproduces the single model bit for bit.
        far_gain: f64,
    },
}

/// Validated path-loss model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    slope: Slope,
    reference_distance_m: f64,
    gain_constant: f64,
}

impl PathLossModel {
    pub fn from_spec(spec: &PathLossSpec) -> Result<Self> {
        let check = |name: &str, v: f64, positive: bool| -> Result<()> {
            let ok = v.is_finite() && if positive { v > 0.0 } else { v >= 0.0 };
            if ok {
                Ok(())
            } else {
                Err(SimError::InvalidParameter(format!(
                    "path loss {name} must be {} and finite, got {v}",
                    if positive { "positive" } else { "nonnegative" }
                )))
            }
        };
        match *spec {
            PathLossSpec::Single { alpha, reference_distance_m, gain_constant } => {
                check("alpha", alpha, false)?;
                check("reference_distance_m", reference_distance_m, true)?;
                check("gain_constant", gain_constant, true)?;
                Ok(Self {
                    slope: Slope::Single { alpha },
                    reference_distance_m,
                    gain_constant,
                })
            }
            PathLossSpec::Dual {
                alpha0,
                alpha1,
                critical_radius_m,
                reference_distance_m,
                gain_constant,
            } => {
                check("alpha0", alpha0, false)?;
                check("alpha1", alpha1, false)?;
                check("critical_radius_m", critical_radius_m, true)?;
                check("reference_distance_m", reference_distance_m, true)?;
                check("gain_constant", gain_constant, true)?;
                if alpha1 < alpha0 {
                    return Err(SimError::InvalidParameter(format!(
                        "far exponent alpha1 ({alpha1}) must be >= near exponent alpha0 ({alpha0})"
                    )));
                }
                let far_gain =
                    gain_constant * (critical_radius_m / reference_distance_m).powf(alpha1 - alpha0);
                Ok(Self {
                    slope: Slope::Dual { alpha0, alpha1, critical_radius_m, far_gain },
                    reference_distance_m,
                    gain_constant,
                })
            }
        }
    }

    pub fn spec(&self) -> PathLossSpec {
        match self.slope {
            Slope::Single { alpha } => PathLossSpec::Single {
                alpha,
                reference_distance_m: self.reference_distance_m,
                gain_constant: self.gain_constant,
            },
            Slope::Dual { alpha0, alpha1, critical_radius_m, .. } => PathLossSpec::Dual {
                alpha0,
                alpha1,
                critical_radius_m,
                reference_distance_m: self.reference_distance_m,
                gain_constant: self.gain_constant,
            },
        }
    }

    /// Multiplicative power factor at distance `x_m`. Errors on `x <= 0`:
    /// a zero-distance link has no defined loss.
    pub fn factor(&self, x_m: f64) -> Result<f64> {
        if x_m.is_nan() || x_m <= 0.0 {
            return Err(SimError::CoincidentNodes);
        }
        Ok(self.factor_unchecked(x_m))
    }

    /// Hot-path variant of [`factor`](Self::factor); `x_m > 0` is the
    /// caller's responsibility.
    #[inline]
    pub fn factor_unchecked(&self, x_m: f64) -> f64 {
        debug_assert!(x_m > 0.0);
        let rel = x_m / self.reference_distance_m;
        match self.slope {
            Slope::Single { alpha } => self.gain_constant * rel.powf(-alpha),
            Slope::Dual { alpha0, alpha1, critical_radius_m, far_gain } => {
                if x_m <= critical_radius_m {
                    self.gain_constant * rel.powf(-alpha0)
                } else {
                    far_gain * rel.powf(-alpha1)
                }
            }
        }
    }

    /// Path loss in dB at distance `x_m` (positive for factors < 1).
    pub fn loss_db(&self, x_m: f64) -> Result<f64> {
        Ok(-linear_to_db(self.factor(x_m)?))
    }

    /// Largest distance whose factor still reaches `min_factor`, i.e. the
    /// radius beyond which no point can beat that factor. `None` means
    /// unbounded (a flat branch at or above `min_factor` extends forever).
    pub fn cull_distance_m(&self, min_factor: f64) -> Option<f64> {
        debug_assert!(min_factor > 0.0);
        let d0 = self.reference_distance_m;
        match self.slope {
            Slope::Single { alpha } => {
                if alpha > 0.0 {
                    Some(d0 * (self.gain_constant / min_factor).powf(1.0 / alpha))
                } else if self.gain_constant >= min_factor {
                    None
                } else {
                    Some(0.0)
                }
            }
            Slope::Dual { alpha0, alpha1, critical_radius_m, far_gain } => {
                let at_rc = self.factor_unchecked(critical_radius_m);
                if min_factor <= at_rc {
                    // Boundary lies on the far branch.
                    if alpha1 > 0.0 {
                        Some(d0 * (far_gain / min_factor).powf(1.0 / alpha1))
                    } else {
                        None
                    }
                } else if alpha0 > 0.0 {
                    Some(d0 * (self.gain_constant / min_factor).powf(1.0 / alpha0))
                } else if self.gain_constant >= min_factor {
                    // Flat near branch qualifies everywhere up to the breakpoint.
                    Some(critical_radius_m)
                } else {
                    Some(0.0)
                }
            }
        }
    }

    /// True when some branch has exponent zero, making distance culling
    /// unable to bound the search.
    pub fn has_flat_branch(&self) -> bool {
        let (a0, a1) = self.spec().exponents();
        a0 == 0.0 || a1 == 0.0
    }
}

/// Unit-mean Rayleigh power fading (exponential) for one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fading(pub f64);

/// One unit-mean exponential fading draw.
pub fn sample_fading(rng: &mut impl RngCore) -> Fading {
    Fading(unit_exp(rng.next_u64()))
}

/// Average received power at distance `x_m` before fading, in mW.
pub fn mean_received_power_mw(tx_power_dbm: f64, model: &PathLossModel, x_m: f64) -> Result<f64> {
    Ok(dbm_to_mw(tx_power_dbm) * model.factor(x_m)?)
}

/// Instantaneous received power in mW: fading times mean power.
pub fn received_power_mw(
    tx_power_dbm: f64,
    fading: Fading,
    model: &PathLossModel,
    x_m: f64,
) -> Result<f64> {
    Ok(fading.0 * mean_received_power_mw(tx_power_dbm, model, x_m)?)
}

/// Per-tier deployment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierConfig {
    pub name: String,
    pub density_per_km2: f64,
    pub tx_power_dbm: f64,
    /// Frequency band id; tiers on different bands do not interfere.
    pub band: u8,
    /// Association bias applied to this tier's downlink candidates.
    pub bias_db: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, tag};

    fn table_models() -> Vec<PathLossModel> {
        [
            PathLossSpec::single(2.0),
            PathLossSpec::single(3.0),
            PathLossSpec::dual(2.0, 2.0),
            PathLossSpec::dual(2.0, 4.0),
            PathLossSpec::dual(3.0, 3.0),
            PathLossSpec::dual(3.0, 4.0),
        ]
        .iter()
        .map(|s| PathLossModel::from_spec(s).unwrap())
        .collect()
    }

    #[test]
    fn db_conversions_round_trip() {
        assert_eq!(dbm_to_mw(0.0), 1.0);
        assert_eq!(dbm_to_mw(30.0), 1000.0);
        assert!((dbm_to_mw(46.0) - 39_810.717_055_349_73).abs() < 1e-9);
        assert_eq!(db_to_linear(10.0), 10.0);
        for v in [-70.0, -10.0, 0.0, 23.0, 46.0] {
            assert!((mw_to_dbm(dbm_to_mw(v)) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn factor_spot_values() {
        let single2 = PathLossModel::from_spec(&PathLossSpec::single(2.0)).unwrap();
        assert_eq!(single2.factor(100.0).unwrap(), 1.0);
        assert!((single2.factor(1000.0).unwrap() - 0.01).abs() < 1e-15);

        let dual24 = PathLossModel::from_spec(&PathLossSpec::dual(2.0, 4.0)).unwrap();
        // Near branch at the breakpoint: (30/100)^-2 = 100/9.
        let near = dual24.factor(30.0).unwrap();
        assert!((near - 100.0 / 9.0).abs() < 1e-9);
        // Far branch at 200 m: 0.09 * (2)^-4 = 0.005625.
        assert!((dual24.factor(200.0).unwrap() - 0.005625).abs() < 1e-15);
    }

    #[test]
    fn factor_rejects_nonpositive_distance() {
        for m in table_models() {
            assert!(matches!(m.factor(0.0), Err(SimError::CoincidentNodes)));
            assert!(matches!(m.factor(-5.0), Err(SimError::CoincidentNodes)));
        }
    }

    #[test]
    fn dual_branches_are_continuous_at_breakpoint() {
        for m in table_models() {
            let rc = match m.slope {
                Slope::Dual { critical_radius_m, .. } => critical_radius_m,
                Slope::Single { .. } => continue,
            };
            let below = m.factor(rc).unwrap();
            let above = m.factor(rc * (1.0 + 1e-12)).unwrap();
            let rel = (below - above).abs() / below;
            assert!(rel < 1e-9, "relative jump {rel} at breakpoint for {m:?}");
        }
    }

    #[test]
    fn degenerate_dual_equals_single_bitwise() {
        for alpha in [2.0, 3.0, 3.7] {
            let single = PathLossModel::from_spec(&PathLossSpec::single(alpha)).unwrap();
            let dual = PathLossModel::from_spec(&PathLossSpec::dual(alpha, alpha)).unwrap();
            for x in [0.5, 1.0, 29.9, 30.0, 30.1, 100.0, 1234.5, 20_000.0] {
                let a = single.factor(x).unwrap();
                let b = dual.factor(x).unwrap();
                assert_eq!(a.to_bits(), b.to_bits(), "x = {x}, alpha = {alpha}");
            }
        }
    }

    #[test]
    fn factor_is_strictly_decreasing() {
        for m in table_models() {
            let mut prev = f64::INFINITY;
            let mut x = 0.5;
            while x < 25_000.0 {
                let f = m.factor(x).unwrap();
                assert!(f < prev, "not decreasing at x = {x} for {m:?}");
                prev = f;
                x *= 1.07;
            }
        }
    }

    #[test]
    fn rejects_inverted_exponent_order() {
        assert!(PathLossModel::from_spec(&PathLossSpec::dual(4.0, 2.0)).is_err());
        assert!(PathLossModel::from_spec(&PathLossSpec::single(-1.0)).is_err());
        let bad = PathLossSpec::Dual {
            alpha0: 2.0,
            alpha1: 4.0,
            critical_radius_m: 0.0,
            reference_distance_m: 100.0,
            gain_constant: 1.0,
        };
        assert!(PathLossModel::from_spec(&bad).is_err());
    }

    #[test]
    fn cull_distance_inverts_factor() {
        for m in table_models() {
            for x in [1.0, 10.0, 29.0, 30.0, 31.0, 250.0, 9000.0] {
                let f = m.factor(x).unwrap();
                let cut = m.cull_distance_m(f).expect("invertible model");
                assert!(
                    (cut - x).abs() / x < 1e-9,
                    "inverse of factor({x}) gave {cut} for {m:?}"
                );
            }
        }
    }

    #[test]
    fn cull_distance_handles_flat_branches() {
        let flat = PathLossModel::from_spec(&PathLossSpec::Single {
            alpha: 0.0,
            reference_distance_m: 100.0,
            gain_constant: 1.0,
        })
        .unwrap();
        assert!(flat.has_flat_branch());
        assert_eq!(flat.cull_distance_m(0.5), None);
        assert_eq!(flat.cull_distance_m(2.0), Some(0.0));

        let flat_near = PathLossModel::from_spec(&PathLossSpec::Dual {
            alpha0: 0.0,
            alpha1: 4.0,
            critical_radius_m: 30.0,
            reference_distance_m: 100.0,
            gain_constant: 1.0,
        })
        .unwrap();
        // Far branch value at the breakpoint is 1.0; below that the far
        // branch bounds the search, above it only the flat plateau remains.
        let far = flat_near.cull_distance_m(0.5).unwrap();
        assert!(far > 30.0);
        assert!((flat_near.cull_distance_m(1.0).unwrap() - 30.0).abs() < 1e-9);
    }

    #[test]
    fn loss_db_matches_factor() {
        let m = PathLossModel::from_spec(&PathLossSpec::single(3.0)).unwrap();
        // (1000/100)^-3 = 1e-3 -> 30 dB loss.
        assert!((m.loss_db(1000.0).unwrap() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn received_power_spot_values() {
        let m2 = PathLossModel::from_spec(&PathLossSpec::single(2.0)).unwrap();
        // At the reference distance the factor is 1: power passes through.
        let p = received_power_mw(46.0, Fading(1.0), &m2, 100.0).unwrap();
        assert!((mw_to_dbm(p) - 46.0).abs() < 1e-12);
        // Ten reference distances at alpha 2: 20 dB down.
        let p = received_power_mw(23.0, Fading(1.0), &m2, 1000.0).unwrap();
        assert!((mw_to_dbm(p) - 3.0).abs() < 1e-12);
        // Fading scales linearly.
        let p2 = received_power_mw(23.0, Fading(2.5), &m2, 1000.0).unwrap();
        assert!((p2 / p - 2.5).abs() < 1e-12);
    }

    #[test]
    fn fading_moments_match_unit_exponential() {
        let mut rng = stream_rng(21, &[tag::FADING_DL]);
        let n = 200_000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let h = sample_fading(&mut rng).0;
            assert!(h > 0.0);
            sum += h;
            sumsq += h * h;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}
