//! Cell association: which base station serves each user, downlink and up.
//!
//! Downlink association picks the candidate with the highest instantaneous
//! biased received power. Within one tier every candidate shares the same
//! transmit power and bias, so the per-tier winner maximizes `fading *
//! path_loss` alone; tier winners are then compared with the tier weight
//! `tx_power_mw * bias_linear` applied. That split lets one spatial scan
//! serve any number of bias values on the same drop.

use crate::geometry::distance;
use crate::network::{BsId, DropContext, Link};
use crate::propagation::{db_to_linear, dbm_to_mw, TierConfig};
use crate::{Result, SimError};

/// Fading values above this are treated as impossible when deriving the
/// scan cull radius: `P(h > cap) = 1e-9` for unit-mean exponential fading,
/// so across ~1e8 candidate links a miss is expected less than once, and a
/// missed candidate would additionally have to beat the running best.
pub const FADING_CULL_CAP: f64 = 20.723_265_836_946_414;

/// Downlink association rule.
#[derive(Debug, Clone, PartialEq)]
pub enum DownlinkPolicy {
    /// Strongest instantaneous received power, no bias.
    MaxPower,
    /// Strongest biased received power; one dB offset per tier.
    Biased(Vec<f64>),
}

impl DownlinkPolicy {
    pub fn bias_db(&self, tier: usize) -> f64 {
        match self {
            Self::MaxPower => 0.0,
            Self::Biased(b) => b.get(tier).copied().unwrap_or(0.0),
        }
    }
}

/// Uplink association rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UplinkPolicy {
    /// Uplink reuses the downlink serving cell.
    Coupled,
    /// Uplink picks its own cell: strongest instantaneous uplink channel
    /// with both tiers weighted equally.
    Decoupled,
}

/// Truncated channel-inversion uplink power control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UplinkPowerRule {
    /// Received-power target at the serving cell, dBm.
    pub target_rx_dbm: f64,
    /// Transmit power cap, dBm.
    pub max_tx_dbm: f64,
}

impl UplinkPowerRule {
    /// Transmit power that inverts `path_loss_db`, truncated at the cap.
    pub fn tx_power_dbm(&self, path_loss_db: f64) -> f64 {
        (self.target_rx_dbm + path_loss_db).min(self.max_tx_dbm)
    }
}

/// Serving assignment for every user, with per-cell member lists.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMap {
    pub serving: Vec<BsId>,
    /// `members[tier][bs]` lists user indices in ascending order.
    members: Vec<Vec<Vec<u32>>>,
}

impl AssociationMap {
    pub fn new(serving: Vec<BsId>, tier_sizes: &[usize]) -> Self {
        let mut members: Vec<Vec<Vec<u32>>> =
            tier_sizes.iter().map(|&n| vec![Vec::new(); n]).collect();
        for (user, bs) in serving.iter().enumerate() {
            members[bs.tier as usize][bs.index as usize].push(user as u32);
        }
        Self { serving, members }
    }

    pub fn members(&self, bs: BsId) -> &[u32] {
        &self.members[bs.tier as usize][bs.index as usize]
    }

    /// Number of users the cell serves.
    pub fn load(&self, bs: BsId) -> u32 {
        self.members(bs).len() as u32
    }
}

/// Per-tier best candidate for one user: `(index_in_tier, fading * path_loss)`.
pub type TierBest = Option<(u32, f64)>;

/// Best candidate in one tier by instantaneous channel, found by an
/// outward ring scan over the tier's bucket grid. Candidates farther than
/// the cull radius implied by the running best and [`FADING_CULL_CAP`]
/// are skipped without drawing their fading.
pub fn best_in_tier(ctx: &DropContext, link: Link, user: u32, tier: u8) -> Result<TierBest> {
    let index = &ctx.drop.tiers[tier as usize].index;
    if index.is_empty() {
        return Ok(None);
    }
    let upos = ctx.drop.user_position(user);
    let (ci, cj) = index.cell_coords(upos);
    let cullable = !ctx.model.has_flat_branch();
    let mut best: TierBest = None;
    let mut cut_m = f64::INFINITY;
    let mut coincident = false;
    for k in 0..=index.max_ring(ci, cj) {
        if best.is_some() && index.ring_min_distance_m(k) > cut_m {
            break;
        }
        index.for_each_ring_cell(ci, cj, k, |x, y| {
            for &id in index.cell_ids(x, y) {
                let d = distance(upos, index.point(id));
                if d <= 0.0 {
                    coincident = true;
                    continue;
                }
                if d > cut_m {
                    continue;
                }
                let score =
                    ctx.fading(link, user, BsId::new(tier, id)) * ctx.model.factor_unchecked(d);
                let better = match best {
                    None => true,
                    Some((bid, bscore)) => score > bscore || (score == bscore && id < bid),
                };
                if better {
                    best = Some((id, score));
                    if cullable {
                        if let Some(c) = ctx.model.cull_distance_m(score / FADING_CULL_CAP) {
                            cut_m = c;
                        }
                    }
                }
            }
        });
        if coincident {
            return Err(SimError::CoincidentNodes);
        }
    }
    Ok(best)
}

/// Per-tier bests for one user.
pub fn tier_bests(ctx: &DropContext, link: Link, user: u32) -> Result<Vec<TierBest>> {
    (0..ctx.drop.tiers.len() as u8)
        .map(|t| best_in_tier(ctx, link, user, t))
        .collect()
}

/// Per-tier bests for every user, downlink: `[user][tier]`.
pub fn downlink_tier_bests(ctx: &DropContext) -> Result<Vec<Vec<TierBest>>> {
    (0..ctx.drop.users.len() as u32)
        .map(|u| tier_bests(ctx, Link::Downlink, u))
        .collect()
}

/// Tier weights for downlink comparison: `tx_power_mw * bias_linear`.
pub fn downlink_weights_mw(tiers: &[TierConfig], policy: &DownlinkPolicy) -> Vec<f64> {
    tiers
        .iter()
        .enumerate()
        .map(|(t, tier)| dbm_to_mw(tier.tx_power_dbm) * db_to_linear(policy.bias_db(t)))
        .collect()
}

/// Winner across tiers once weights are applied. Ties break toward the
/// lower tier index; in-tier ties already broke toward the lower index.
pub fn serving_from_bests(bests: &[TierBest], weights: &[f64]) -> Option<BsId> {
    let mut win: Option<(BsId, f64)> = None;
    for (t, best) in bests.iter().enumerate() {
        if let Some((id, score)) = *best {
            let weighted = score * weights[t];
            if win.is_none_or(|(_, w)| weighted > w) {
                win = Some((BsId::new(t as u8, id), weighted));
            }
        }
    }
    win.map(|(bs, _)| bs)
}

/// Full association map from precomputed per-user tier bests.
pub fn map_from_bests(
    ctx: &DropContext,
    bests: &[Vec<TierBest>],
    weights: &[f64],
) -> Result<AssociationMap> {
    let serving: Vec<BsId> = bests
        .iter()
        .map(|b| serving_from_bests(b, weights).ok_or(SimError::NoBaseStations))
        .collect::<Result<_>>()?;
    let sizes: Vec<usize> = ctx.drop.tiers.iter().map(|t| t.set.len()).collect();
    Ok(AssociationMap::new(serving, &sizes))
}

/// Downlink association for every user under `policy`.
pub fn downlink_map(ctx: &DropContext, policy: &DownlinkPolicy) -> Result<AssociationMap> {
    let bests = downlink_tier_bests(ctx)?;
    map_from_bests(ctx, &bests, &downlink_weights_mw(ctx.tiers, policy))
}

/// Decoupled uplink association for every user: per-tier uplink channel
/// bests compared at equal weight.
pub fn decoupled_uplink_map(ctx: &DropContext) -> Result<AssociationMap> {
    let weights = vec![1.0; ctx.tiers.len()];
    let serving: Vec<BsId> = (0..ctx.drop.users.len() as u32)
        .map(|u| {
            let bests = tier_bests(ctx, Link::Uplink, u)?;
            serving_from_bests(&bests, &weights).ok_or(SimError::NoBaseStations)
        })
        .collect::<Result<_>>()?;
    let sizes: Vec<usize> = ctx.drop.tiers.iter().map(|t| t.set.len()).collect();
    Ok(AssociationMap::new(serving, &sizes))
}

/// Uplink map for a policy; coupled uplink reuses the downlink map.
pub fn uplink_map(
    ctx: &DropContext,
    policy: UplinkPolicy,
    dl_map: &AssociationMap,
) -> Result<AssociationMap> {
    match policy {
        UplinkPolicy::Coupled => Ok(dl_map.clone()),
        UplinkPolicy::Decoupled => decoupled_uplink_map(ctx),
    }
}

/// Reference downlink association by exhaustive scan, independent of the
/// spatial index and culling. Used as an oracle in tests and validation.
pub fn downlink_serving_linear(
    ctx: &DropContext,
    policy: &DownlinkPolicy,
    user: u32,
) -> Result<Option<BsId>> {
    let mut win: Option<(BsId, f64)> = None;
    for (t, tier) in ctx.drop.tiers.iter().enumerate() {
        let bias = db_to_linear(policy.bias_db(t));
        for idx in 0..tier.set.len() as u32 {
            let bs = BsId::new(t as u8, idx);
            let power = ctx.dl_rx_power_mw(user, bs)? * bias;
            let better = match win {
                None => true,
                Some((wid, wpow)) => power > wpow || (power == wpow && bs < wid),
            };
            if better {
                win = Some((bs, power));
            }
        }
    }
    Ok(win.map(|(bs, _)| bs))
}

/// Reference decoupled uplink association by exhaustive scan.
pub fn uplink_serving_linear(ctx: &DropContext, user: u32) -> Result<Option<BsId>> {
    let upos = ctx.drop.user_position(user);
    let mut win: Option<(BsId, f64)> = None;
    for (t, tier) in ctx.drop.tiers.iter().enumerate() {
        for (idx, &p) in tier.set.points.iter().enumerate() {
            let bs = BsId::new(t as u8, idx as u32);
            let x = distance(upos, p);
            let score = ctx.fading(Link::Uplink, user, bs) * ctx.model.factor(x)?;
            let better = match win {
                None => true,
                Some((wid, wscore)) => score > wscore || (score == wscore && bs < wid),
            };
            if better {
                win = Some((bs, score));
            }
        }
    }
    Ok(win.map(|(bs, _)| bs))
}
