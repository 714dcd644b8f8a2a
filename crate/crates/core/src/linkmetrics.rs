//! Instantaneous SINR and per-user rate on one drop.
//!
//! Downlink interference sums every same-band base station except the
//! serving one. Uplink interference takes exactly one active user per
//! other same-band cell, drawn deterministically from that cell's uplink
//! members; cells with no uplink users stay silent.

use crate::association::{AssociationMap, UplinkPowerRule};
use crate::geometry::distance;
use crate::network::{BsId, DropContext, Link};
use crate::propagation::dbm_to_mw;
use crate::rng::{stream_rng, tag};
use crate::{Result, SimError};
use rand::Rng;

/// Signal, interference, and noise for one link, all in mW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub signal_mw: f64,
    pub interference_mw: f64,
    pub noise_mw: f64,
}

impl LinkBudget {
    pub fn sinr(&self) -> f64 {
        combine_sinr(self.signal_mw, self.interference_mw, self.noise_mw)
    }
}

/// Signal over interference plus noise.
#[inline]
pub fn combine_sinr(signal_mw: f64, interference_mw: f64, noise_mw: f64) -> f64 {
    signal_mw / (interference_mw + noise_mw)
}

/// Downlink budget at `user` served by `serving`. Interferers are all
/// other base stations in tiers sharing the serving tier's band.
pub fn downlink_budget(ctx: &DropContext, user: u32, serving: BsId) -> Result<LinkBudget> {
    let signal_mw = ctx.dl_rx_power_mw(user, serving)?;
    let band = ctx.tiers[serving.tier as usize].band;
    let mut interference_mw = 0.0;
    for t in ctx.tiers_on_band(band) {
        for idx in 0..ctx.drop.tiers[t as usize].set.len() as u32 {
            let bs = BsId::new(t, idx);
            if bs == serving {
                continue;
            }
            interference_mw += ctx.dl_rx_power_mw(user, bs)?;
        }
    }
    Ok(LinkBudget { signal_mw, interference_mw, noise_mw: ctx.noise_mw })
}

/// The interfering uplink user for cell `bs`, if the cell has any uplink
/// members: a uniform pick keyed only by the drop seed and the cell id.
pub fn active_uplink_user(ctx: &DropContext, map: &AssociationMap, bs: BsId) -> Option<u32> {
    let members = map.members(bs);
    if members.is_empty() {
        return None;
    }
    let mut rng = stream_rng(ctx.drop.seed, &[tag::UL_PICK, u64::from(bs.tier), u64::from(bs.index)]);
    Some(members[rng.random_range(0..members.len())])
}

/// Transmit power of `user` toward its serving cell under truncated
/// channel inversion, in dBm.
pub fn uplink_tx_power_dbm(
    ctx: &DropContext,
    rule: &UplinkPowerRule,
    user: u32,
    serving: BsId,
) -> Result<f64> {
    let x = distance(ctx.drop.user_position(user), ctx.drop.bs_position(serving));
    Ok(rule.tx_power_dbm(ctx.model.loss_db(x)?))
}

/// Uplink budget for `user` transmitting to `serving`, which must be the
/// user's cell in `map`. Each other same-band cell contributes one active
/// member, inverting power toward its own cell.
pub fn uplink_budget(
    ctx: &DropContext,
    user: u32,
    serving: BsId,
    map: &AssociationMap,
    rule: &UplinkPowerRule,
) -> Result<LinkBudget> {
    if map.serving[user as usize] != serving {
        return Err(SimError::InvalidParameter(format!(
            "uplink budget requested at {serving:?} but user {user} associates elsewhere in this map"
        )));
    }
    let upos = ctx.drop.user_position(user);
    let spos = ctx.drop.bs_position(serving);
    let x = distance(upos, spos);
    let tx_dbm = rule.tx_power_dbm(ctx.model.loss_db(x)?);
    let signal_mw =
        dbm_to_mw(tx_dbm) * ctx.fading(Link::Uplink, user, serving) * ctx.model.factor(x)?;

    let band = ctx.tiers[serving.tier as usize].band;
    let mut interference_mw = 0.0;
    for t in ctx.tiers_on_band(band) {
        for idx in 0..ctx.drop.tiers[t as usize].set.len() as u32 {
            let bs = BsId::new(t, idx);
            if bs == serving {
                continue;
            }
            let Some(v) = active_uplink_user(ctx, map, bs) else {
                continue;
            };
            let own_x = distance(ctx.drop.user_position(v), ctx.drop.bs_position(bs));
            let v_tx_dbm = rule.tx_power_dbm(ctx.model.loss_db(own_x)?);
            let cross_x = distance(ctx.drop.user_position(v), spos);
            interference_mw += dbm_to_mw(v_tx_dbm)
                * ctx.fading(Link::Uplink, v, serving)
                * ctx.model.factor(cross_x)?;
        }
    }
    Ok(LinkBudget { signal_mw, interference_mw, noise_mw: ctx.noise_mw })
}

/// Spectral efficiency share for a cell serving `load` users.
pub fn rate_bps_hz(sinr: f64, load: u32) -> Result<f64> {
    if load == 0 {
        return Err(SimError::InvalidParameter(
            "rate requires a serving cell with at least one user".into(),
        ));
    }
    if sinr.is_nan() || sinr < 0.0 {
        return Err(SimError::InvalidParameter(format!("SINR must be nonnegative, got {sinr}")));
    }
    Ok((1.0 + sinr).log2() / f64::from(load))
}
