//! Per-drop network state: sampled base stations and users, plus the
//! context that derives every link's fading deterministically.

use crate::geometry::{sample_ppp, Point, PointSet, Region, SpatialIndex};
use crate::propagation::{dbm_to_mw, PathLossModel, TierConfig};
use crate::rng::{self, tag};
use crate::{Result, SimError};

/// Base-station identity: tier index plus index within the tier.
/// Ordering (tier first, then index) is the deterministic tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BsId {
    pub tier: u8,
    pub index: u32,
}

impl BsId {
    pub fn new(tier: u8, index: u32) -> Self {
        Self { tier, index }
    }
}

/// One tier's sampled positions with its spatial index.
#[derive(Debug, Clone)]
pub struct TierPoints {
    pub set: PointSet,
    pub index: SpatialIndex,
}

/// Zero-base-station realizations are resampled at most this many times
/// before the drop is abandoned as an error.
pub const MAX_RESAMPLE_ATTEMPTS: u32 = 10_000;

/// One Monte Carlo realization: base stations per tier, users, and the
/// drop-local seed that every fading draw and interferer pick derives from.
#[derive(Debug, Clone)]
pub struct NetworkDrop {
    pub seed: u64,
    pub region: Region,
    pub tiers: Vec<TierPoints>,
    pub users: PointSet,
    /// Index of the measured user in `users` (always the last entry, placed
    /// at the origin).
    pub tagged_user: u32,
    /// Zero-base-station realizations discarded before this one.
    pub resamples: u32,
}

impl NetworkDrop {
    /// Samples one realization. Each tier and the user set draw from their
    /// own substream of `(master_seed, drop_index, attempt)`, so drops are
    /// independent of evaluation order and worker count. Realizations with
    /// no base stations at all are discarded and redrawn with the next
    /// attempt number.
    pub fn generate(
        region: Region,
        tiers: &[TierConfig],
        user_density_per_km2: f64,
        model: &PathLossModel,
        master_seed: u64,
        drop_index: u64,
    ) -> Result<Self> {
        let min_cell = match model.spec() {
            crate::propagation::PathLossSpec::Dual { critical_radius_m, .. } => critical_radius_m,
            crate::propagation::PathLossSpec::Single { .. } => 0.0,
        };
        for attempt in 0..MAX_RESAMPLE_ATTEMPTS {
            let seed = rng::drop_seed(master_seed, drop_index, attempt);
            let mut sampled = Vec::with_capacity(tiers.len());
            for (t, tier) in tiers.iter().enumerate() {
                let mut stream = rng::stream_rng(seed, &[tag::TIER_PPP, t as u64]);
                sampled.push(sample_ppp(&tier.name, tier.density_per_km2, region, &mut stream)?);
            }
            if sampled.iter().all(|s| s.is_empty()) {
                continue;
            }
            let mut users = sample_ppp(
                "users",
                user_density_per_km2,
                region,
                &mut rng::stream_rng(seed, &[tag::USER_PPP]),
            )?;
            users.points.push([0.0, 0.0]);
            let tagged_user = (users.len() - 1) as u32;
            let tiers = sampled
                .into_iter()
                .map(|set| {
                    let index = SpatialIndex::build(&set.points, region, min_cell);
                    TierPoints { set, index }
                })
                .collect();
            return Ok(Self { seed, region, tiers, users, tagged_user, resamples: attempt });
        }
        Err(SimError::ResampleExhausted { drop_index, attempts: MAX_RESAMPLE_ATTEMPTS })
    }

    /// Builds a drop from explicit positions (tests and oracles).
    pub fn from_parts(
        region: Region,
        tier_points: Vec<PointSet>,
        users: PointSet,
        tagged_user: u32,
        seed: u64,
    ) -> Self {
        let tiers = tier_points
            .into_iter()
            .map(|set| {
                let index = SpatialIndex::build(&set.points, region, 0.0);
                TierPoints { set, index }
            })
            .collect();
        Self { seed, region, tiers, users, tagged_user, resamples: 0 }
    }

    pub fn bs_count(&self) -> usize {
        self.tiers.iter().map(|t| t.set.len()).sum()
    }

    pub fn bs_position(&self, id: BsId) -> Point {
        self.tiers[id.tier as usize].set.points[id.index as usize]
    }

    pub fn user_position(&self, user: u32) -> Point {
        self.users.points[user as usize]
    }
}

/// Link direction; uplink and downlink fades independently unless the
/// context is built with `shared_ul_dl_fading`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Downlink,
    Uplink,
}

/// A drop bundled with everything needed to evaluate links on it.
///
/// Fading is not stored: each (user, base station, direction) value is a
/// pure function of the drop seed, recomputed on demand. That keeps all
/// policies on one drop looking at identical channel realizations.
#[derive(Debug, Clone, Copy)]
pub struct DropContext<'a> {
    pub drop: &'a NetworkDrop,
    pub model: &'a PathLossModel,
    pub tiers: &'a [TierConfig],
    pub noise_mw: f64,
    pub shared_ul_dl_fading: bool,
}

impl<'a> DropContext<'a> {
    pub fn new(
        drop: &'a NetworkDrop,
        model: &'a PathLossModel,
        tiers: &'a [TierConfig],
        noise_dbm: f64,
        shared_ul_dl_fading: bool,
    ) -> Self {
        Self { drop, model, tiers, noise_mw: dbm_to_mw(noise_dbm), shared_ul_dl_fading }
    }

    /// Unit-mean power fading on the link between `user` and `bs`.
    #[inline]
    pub fn fading(&self, link: Link, user: u32, bs: BsId) -> f64 {
        let t = match link {
            Link::Downlink => tag::FADING_DL,
            Link::Uplink if self.shared_ul_dl_fading => tag::FADING_DL,
            Link::Uplink => tag::FADING_UL,
        };
        rng::unit_exp(rng::mix_seq(
            self.drop.seed,
            &[t, u64::from(bs.tier), u64::from(bs.index), u64::from(user)],
        ))
    }

    pub fn tx_power_mw(&self, tier: u8) -> f64 {
        dbm_to_mw(self.tiers[tier as usize].tx_power_dbm)
    }

    /// Instantaneous downlink received power at `user` from `bs`, in mW.
    pub fn dl_rx_power_mw(&self, user: u32, bs: BsId) -> Result<f64> {
        let x = crate::geometry::distance(self.drop.user_position(user), self.drop.bs_position(bs));
        let h = self.fading(Link::Downlink, user, bs);
        Ok(h * self.tx_power_mw(bs.tier) * self.model.factor(x)?)
    }

    /// Tier indices sharing `band`.
    pub fn tiers_on_band(&self, band: u8) -> impl Iterator<Item = u8> + '_ {
        self.tiers
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.band == band)
            .map(|(i, _)| i as u8)
    }
}
