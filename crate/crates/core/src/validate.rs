//! Built-in self checks behind the `validate` subcommand.
//!
//! Each check re-derives a core invariant at runtime with independent
//! arithmetic, so a user can confirm an installed binary behaves before
//! trusting a long sweep. The same invariants are locked down harder in
//! the test suite; this is the cheap field version.

use std::time::Instant;

use rand::SeedableRng;

use crate::association::{
    downlink_map, downlink_serving_linear, uplink_serving_linear, DownlinkPolicy,
};
use crate::engine::{baseline_config, Scenario};
use crate::geometry::{distance, sample_ppp, Region, SpatialIndex};
use crate::network::{DropContext, NetworkDrop};
use crate::propagation::{db_to_linear, linear_to_db, PathLossModel, PathLossSpec};
use crate::stats::percentile;

type CheckResult = Result<String, String>;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn run_check(name: &'static str, f: impl FnOnce() -> CheckResult) -> CheckOutcome {
    match f() {
        Ok(detail) => CheckOutcome { name, passed: true, detail },
        Err(detail) => CheckOutcome { name, passed: false, detail },
    }
}

/// Runs every check and returns the outcomes in a fixed order.
pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        run_check("pathloss continuity at the critical radius", continuity),
        run_check("dual slope with equal exponents equals single slope", dual_equals_single),
        run_check("decibel conversions round-trip", decibel_round_trip),
        run_check("ppp count moments", ppp_moments),
        run_check("ppp quadrant uniformity", ppp_quadrants),
        run_check("spatial index equals linear scan", index_equals_scan),
        run_check("association matches exhaustive argmax", association_oracle),
        run_check("percentile reference values", percentile_spots),
        run_check("deterministic replay", deterministic_replay),
        run_check("bias grid equals per-bias runs", bias_grid_consistency),
        run_check("spatial index speedup (informational)", index_speedup),
    ]
}

pub fn all_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|o| o.passed)
}

fn continuity() -> CheckResult {
    for (a0, a1) in [(2.0, 4.0), (3.0, 4.0), (2.0, 2.0), (3.0, 3.0)] {
        let model = PathLossModel::from_spec(&PathLossSpec::dual(a0, a1))
            .map_err(|e| e.to_string())?;
        let rc = 30.0;
        let near = model.factor(rc).map_err(|e| e.to_string())?;
        let far = model.factor(rc * (1.0 + 1e-12)).map_err(|e| e.to_string())?;
        let rel = ((near - far) / near).abs();
        if rel > 1e-9 {
            return Err(format!(
                "dual[{a0},{a1}] jumps at the critical radius: relative step {rel:.3e}"
            ));
        }
    }
    Ok("no step at the breakpoint for 4 exponent pairs".into())
}

fn dual_equals_single() -> CheckResult {
    for alpha in [2.0, 3.0, 4.0] {
        let dual = PathLossModel::from_spec(&PathLossSpec::dual(alpha, alpha))
            .map_err(|e| e.to_string())?;
        let single = PathLossModel::from_spec(&PathLossSpec::single(alpha))
            .map_err(|e| e.to_string())?;
        for x in [0.5, 10.0, 30.0, 100.0, 512.0, 4096.0] {
            let d = dual.factor(x).map_err(|e| e.to_string())?;
            let s = single.factor(x).map_err(|e| e.to_string())?;
            if d.to_bits() != s.to_bits() {
                return Err(format!(
                    "alpha {alpha}, distance {x} m: dual {d:e} != single {s:e}"
                ));
            }
        }
    }
    Ok("bitwise equal for 3 exponents at 6 distances".into())
}

fn decibel_round_trip() -> CheckResult {
    for db in [-30.0, -3.0, 0.0, 17.5, 46.0] {
        let back = linear_to_db(db_to_linear(db));
        if (back - db).abs() > 1e-12 {
            return Err(format!("{db} dB round-trips to {back}"));
        }
    }
    if db_to_linear(0.0) != 1.0 {
        return Err("0 dB must be exactly 1.0 linear".into());
    }
    Ok("5 values round-trip within 1e-12 dB".into())
}

fn ppp_moments() -> CheckResult {
    let region = Region::new(5.0).map_err(|e| e.to_string())?;
    let lambda = 8.0;
    let mean = lambda * region.area_km2();
    let n_draws = 2000usize;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let counts: Vec<f64> = (0..n_draws)
        .map(|_| {
            sample_ppp("check", lambda, region, &mut rng).map(|s| s.points.len() as f64)
        })
        .collect::<crate::Result<_>>()
        .map_err(|e| e.to_string())?;
    let m = counts.iter().sum::<f64>() / n_draws as f64;
    let v = counts.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / (n_draws - 1) as f64;
    let tol = 3.0 * (mean / n_draws as f64).sqrt();
    if (m - mean).abs() > tol {
        return Err(format!("mean count {m:.1} outside {mean} +/- {tol:.1}"));
    }
    if (v / mean - 1.0).abs() > 0.1 {
        return Err(format!("variance/mean {:.3} outside [0.9, 1.1]", v / mean));
    }
    Ok(format!("mean {m:.1} (expect {mean}), variance/mean {:.3}", v / mean))
}

fn ppp_quadrants() -> CheckResult {
    let region = Region::new(5.0).map_err(|e| e.to_string())?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x9ad5);
    let set = sample_ppp("check", 200.0, region, &mut rng).map_err(|e| e.to_string())?;
    let mut quads = [0f64; 4];
    for p in &set.points {
        let q = usize::from(p[0] >= 0.0) + 2 * usize::from(p[1] >= 0.0);
        quads[q] += 1.0;
    }
    let expect = set.points.len() as f64 / 4.0;
    let chi2: f64 = quads.iter().map(|&o| (o - expect) * (o - expect) / expect).sum();
    // chi-square, 3 degrees of freedom, 99.9th percentile
    if chi2 > 16.266 {
        return Err(format!("quadrant chi-square {chi2:.2} > 16.266"));
    }
    Ok(format!("chi-square {chi2:.2} over {} points", set.points.len()))
}

fn index_equals_scan() -> CheckResult {
    let region = Region::new(2.0).map_err(|e| e.to_string())?;
    let mut checked = 0usize;
    for seed in 0..10u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let set = sample_ppp("check", 30.0, region, &mut rng).map_err(|e| e.to_string())?;
        let index = SpatialIndex::build(&set.points, region, 30.0);
        for center in [[0.0, 0.0], [900.0, -1500.0], [-1999.0, 1999.0]] {
            for radius in [50.0, 300.0, 1500.0] {
                let mut got = index.neighbors_within(center, radius);
                got.sort_unstable();
                let mut want: Vec<u32> = (0..set.points.len() as u32)
                    .filter(|&i| distance(center, set.points[i as usize]) <= radius)
                    .collect();
                want.sort_unstable();
                if got != want {
                    return Err(format!(
                        "seed {seed}, center {center:?}, radius {radius}: \
                         index {got:?} != scan {want:?}"
                    ));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} queries agree with brute force"))
}

fn association_oracle() -> CheckResult {
    let mut cfg = baseline_config();
    cfg.region = Region::new(1.0).map_err(|e| e.to_string())?;
    cfg.user_density_per_km2 = 50.0;
    let scenario = Scenario::prepare(cfg.clone()).map_err(|e| e.to_string())?;
    let policy = DownlinkPolicy::Biased(vec![0.0, 7.0]);
    let mut checked = 0usize;
    for drop_index in 0..3u64 {
        let drop = NetworkDrop::generate(
            cfg.region,
            &cfg.tiers,
            cfg.user_density_per_km2,
            scenario.model(),
            cfg.master_seed,
            drop_index,
        )
        .map_err(|e| e.to_string())?;
        let ctx = DropContext::new(&drop, scenario.model(), &cfg.tiers, cfg.noise_dbm, false);
        let map = downlink_map(&ctx, &policy).map_err(|e| e.to_string())?;
        for user in 0..drop.users.len() as u32 {
            let want = downlink_serving_linear(&ctx, &policy, user)
                .map_err(|e| e.to_string())?
                .ok_or("oracle found no cell")?;
            if map.serving[user as usize] != want {
                return Err(format!("drop {drop_index}, user {user}: downlink mismatch"));
            }
            let want_ul = uplink_serving_linear(&ctx, user)
                .map_err(|e| e.to_string())?
                .ok_or("oracle found no cell")?;
            let got_ul = crate::association::decoupled_uplink_map(&ctx)
                .map_err(|e| e.to_string())?
                .serving[user as usize];
            if got_ul != want_ul {
                return Err(format!("drop {drop_index}, user {user}: uplink mismatch"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} users agree with the exhaustive argmax"))
}

fn percentile_spots() -> CheckResult {
    let data: Vec<f64> = (1..=100).map(f64::from).collect();
    let cases = [(50.0, 50.5), (10.0, 10.9), (90.0, 90.1), (0.0, 1.0), (100.0, 100.0)];
    for (q, want) in cases {
        let got = percentile(&data, q).map_err(|e| e.to_string())?;
        if (got - want).abs() > 1e-12 {
            return Err(format!("p{q} of 1..=100 is {got}, expected {want}"));
        }
    }
    Ok("5 reference percentiles exact".into())
}

fn small_scenario() -> crate::engine::ScenarioConfig {
    let mut cfg = baseline_config();
    cfg.region = Region::new(0.8).expect("static region");
    cfg.user_density_per_km2 = 40.0;
    cfg.n_drops = 20;
    cfg
}

fn deterministic_replay() -> CheckResult {
    let cfg = small_scenario();
    let a = Scenario::prepare(cfg.clone())
        .and_then(|s| s.run())
        .map_err(|e| e.to_string())?;
    let b = Scenario::prepare(cfg.clone())
        .and_then(|s| s.run())
        .map_err(|e| e.to_string())?;
    if a.drops != b.drops {
        return Err("repeat run differs".into());
    }
    for threads in [1usize, 2] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        let c = pool
            .install(|| Scenario::prepare(cfg.clone()).and_then(|s| s.run()))
            .map_err(|e| e.to_string())?;
        if c.drops != a.drops {
            return Err(format!("{threads}-thread run differs from default pool"));
        }
    }
    Ok(format!("{} drops identical across repeats and pool sizes", a.drops.len()))
}

fn bias_grid_consistency() -> CheckResult {
    let cfg = small_scenario();
    let grid = Scenario::prepare(cfg.clone())
        .and_then(|s| s.run_bias_grid(&[0.0, 7.0]))
        .map_err(|e| e.to_string())?;
    for (outcome, bias) in grid.iter().zip([0.0, 7.0]) {
        let direct = Scenario::prepare(cfg.with_small_cell_bias(bias))
            .and_then(|s| s.run())
            .map_err(|e| e.to_string())?;
        if outcome.drops != direct.drops {
            return Err(format!("grid point {bias} dB differs from a direct run"));
        }
    }
    Ok("2 grid points identical to per-bias runs".into())
}

fn index_speedup() -> CheckResult {
    let mut cfg = baseline_config();
    cfg.region = Region::new(1.0).map_err(|e| e.to_string())?;
    cfg.tiers[1].density_per_km2 = 100.0;
    cfg.user_density_per_km2 = 200.0;
    let scenario = Scenario::prepare(cfg.clone()).map_err(|e| e.to_string())?;
    let drop = NetworkDrop::generate(
        cfg.region,
        &cfg.tiers,
        cfg.user_density_per_km2,
        scenario.model(),
        1,
        0,
    )
    .map_err(|e| e.to_string())?;
    let ctx = DropContext::new(&drop, scenario.model(), &cfg.tiers, cfg.noise_dbm, false);
    let policy = DownlinkPolicy::MaxPower;

    let t0 = Instant::now();
    let map = downlink_map(&ctx, &policy).map_err(|e| e.to_string())?;
    let indexed = t0.elapsed();

    let t1 = Instant::now();
    let mut linear = Vec::with_capacity(drop.users.len());
    for user in 0..drop.users.len() as u32 {
        linear.push(
            downlink_serving_linear(&ctx, &policy, user)
                .map_err(|e| e.to_string())?
                .ok_or("no cell")?,
        );
    }
    let scanned = t1.elapsed();

    if map.serving != linear {
        return Err("indexed and linear associations disagree".into());
    }
    let ratio = scanned.as_secs_f64() / indexed.as_secs_f64().max(1e-9);
    // Benchmark, not correctness: report the ratio, never fail on it.
    Ok(format!(
        "{:.1}x over linear scan ({} cells, {} users)",
        ratio,
        drop.bs_count(),
        drop.users.len()
    ))
}
