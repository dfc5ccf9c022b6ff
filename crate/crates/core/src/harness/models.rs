//! One trial of each model on a freshly generated network.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng as _;

use super::config::{ExperimentConfig, Model};
use crate::cascade::{build_gai_kapadia_system_with, simulate_random_cascade, SheetSpec};
use crate::clearing::{clear_eisenberg_noe, clear_fictitious_default, clear_rogers_veraart, FinancialSystem};
use crate::debtrank::{debtrank_iterated, debtrank_nonlinear, debtrank_original, leverage_spectral_radius, ExposureSystem};
use crate::firesale::{
    simulate_buffered_deleveraging, simulate_leverage_targeting, simulate_threshold_firesale, transfer_matrix,
    ImpactFunction, PortfolioSystem, Shock,
};
use crate::network::{gen_bipartite_er, gen_erdos_renyi_directed, gen_erdos_renyi_undirected, DegreeModel};
use crate::rng::{seeded, Rng};
use crate::structure::{core_periphery_detect_with, planted_core_periphery, DetectOptions};
use crate::theory::{analyze, ResponseFunction, TheoryResult};
use crate::{Error, Result};

/// Share of banks that must fail for a fire sale to count as global.
pub const GLOBAL_CASCADE_FRACTION: f64 = 0.05;

pub(crate) type Point = BTreeMap<String, f64>;

fn count(point: &Point, name: &str) -> Result<usize> {
    let v = point[name];
    if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::param(format!("{name} must be a non-negative integer, got {v}")))
    }
}

fn flag(b: bool) -> f64 {
    f64::from(u8::from(b))
}

fn theory_at(point: &Point, z: f64, r: f64, distribution: &str) -> Result<TheoryResult> {
    let model = match distribution {
        "regular" => {
            if z.fract() != 0.0 || z < 0.0 {
                return Err(Error::param(format!("regular degree must be an integer, got {z}")));
            }
            DegreeModel::regular(z as usize)?
        }
        _ => DegreeModel::poisson(z)?,
    };
    analyze(&model, &ResponseFunction::threshold(r), point["rho0"])
}

/// Values shared by every trial at one grid point.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Prepared {
    None,
    TheoryRho(f64),
}

pub(crate) fn prepare(config: &ExperimentConfig, point: &Point) -> Result<Prepared> {
    match config.model {
        Model::Cascade => {
            let t = theory_at(point, point["z"], point["R_bar"], "poisson")?;
            Ok(Prepared::TheoryRho(t.rho))
        }
        _ => Ok(Prepared::None),
    }
}

pub(crate) fn run_trial(config: &ExperimentConfig, point: &Point, prepared: Prepared, seed: u64) -> Result<Vec<f64>> {
    let mut rng = seeded(seed);
    match config.model {
        Model::Clearing => clearing_trial(config, point, &mut rng),
        Model::Cascade => {
            let (n, z) = (count(point, "n")?, point["z"]);
            let graph = match config.option("network") {
                "directed_er" => gen_erdos_renyi_directed(n, z, &mut rng)?,
                _ => gen_erdos_renyi_undirected(n, z, &mut rng)?,
            };
            let spec = SheetSpec {
                r_bar: point["R_bar"],
                a_ib: point["A_IB"],
                external_ratio: point["external_ratio"],
            };
            let system = build_gai_kapadia_system_with(&graph, &spec)?;
            let out = simulate_random_cascade(&system, point["rho0"], &mut rng)?;
            let theory = match prepared {
                Prepared::TheoryRho(r) => r,
                Prepared::None => f64::NAN,
            };
            Ok(vec![
                out.default_fraction,
                out.rounds as f64,
                out.initially_defaulted.len() as f64,
                theory,
            ])
        }
        Model::Theory => {
            let t = theory_at(point, point["z"], point["R"], config.option("distribution"))?;
            Ok(vec![
                t.q_star,
                t.rho,
                flag(t.first_order.holds),
                flag(t.second_order.holds),
                t.watts.value,
            ])
        }
        Model::Debtrank => debtrank_trial(config, point, &mut rng),
        Model::Firesale => firesale_trial(config, point, &mut rng),
        Model::Structure => {
            let (n, core) = (count(point, "n")?, count(point, "core")?);
            let adj = planted_core_periphery(n, core, count(point, "links")?, point["noise"], &mut rng)?;
            let opts = DetectOptions {
                seed: rng.random(),
                ..DetectOptions::default()
            };
            let found = core_periphery_detect_with(&adj, opts)?;
            let member = found.membership(n);
            let correct = (0..n).filter(|&i| member[i] == (i < core)).count();
            Ok(vec![
                correct as f64 / n as f64,
                found.error as f64,
                found.normalized_error,
                found.core.len() as f64,
            ])
        }
    }
}

/// Directed ER obligations with `L_ij ~ U(0, 1)` on each edge and external
/// assets `e_i ~ U(0, 2 external)`.
fn clearing_trial(config: &ExperimentConfig, point: &Point, rng: &mut Rng) -> Result<Vec<f64>> {
    let n = count(point, "n")?;
    let graph = gen_erdos_renyi_directed(n, point["z"], rng)?;
    let mut l = vec![vec![0.0; n]; n];
    for &(i, j) in graph.edges() {
        l[i][j] = rng.random::<f64>();
    }
    let e = (0..n).map(|_| 2.0 * point["external"] * rng.random::<f64>()).collect();
    let system = FinancialSystem::new(l, e)?;
    let res = match config.option("method") {
        "rogers_veraart" => clear_rogers_veraart(&system, point["alpha"], point["beta"])?,
        "fictitious_default" => clear_fictitious_default(&system)?,
        _ => clear_eisenberg_noe(&system)?,
    };
    let owed: f64 = res.p_bar.iter().sum();
    let paid: f64 = res.p.iter().sum();
    Ok(vec![
        res.defaults.len() as f64 / n as f64,
        res.iterations as f64,
        if owed > 0.0 { (owed - paid) / owed } else { 0.0 },
        res.unique.map_or(f64::NAN, flag),
    ])
}

/// Unit exposures on a directed ER graph; each bank's equity is its number
/// of exposures over `leverage`, so every row of the leverage matrix sums to
/// `leverage`. Banks without exposures get unit equity.
fn debtrank_trial(config: &ExperimentConfig, point: &Point, rng: &mut Rng) -> Result<Vec<f64>> {
    let n = count(point, "n")?;
    let leverage = point["leverage"];
    if !(leverage > 0.0) {
        return Err(Error::param(format!("leverage must be positive, got {leverage}")));
    }
    let graph = gen_erdos_renyi_directed(n, point["z"], rng)?;
    let mut w = vec![vec![0.0; n]; n];
    for &(i, j) in graph.edges() {
        w[i][j] = 1.0;
    }
    let e0 = graph
        .out_degrees()
        .iter()
        .map(|&k| if k > 0 { k as f64 / leverage } else { 1.0 })
        .collect();
    let system = ExposureSystem::new(w, e0)?;
    let hit = ((point["shocked_fraction"] * n as f64).round() as usize).clamp(1, n.max(1));
    let mut shock = vec![0.0; n];
    for i in sample(rng, n, hit) {
        shock[i] = point["shock"];
    }
    let traj = match config.option("variant") {
        "iterated" => debtrank_iterated(&system, &shock)?,
        "nonlinear" => debtrank_nonlinear(&system, &shock, point["alpha"])?,
        _ => debtrank_original(&system, &shock)?,
    };
    let h = traj.final_h();
    Ok(vec![
        h.iter().sum::<f64>() / n as f64,
        traj.defaulted.len() as f64 / n as f64,
        traj.steps as f64,
        leverage_spectral_radius(&system)?,
    ])
}

/// Bipartite ER portfolios with unit value per bank; one asset drawn
/// uniformly is devalued by `xi`.
fn firesale_trial(config: &ExperimentConfig, point: &Point, rng: &mut Rng) -> Result<Vec<f64>> {
    let (n, m) = (count(point, "n_banks")?, count(point, "m_assets")?);
    let leverage = point["leverage"];
    let graph = gen_bipartite_er(n, m, point["diversification"], rng)?;
    let mut system = PortfolioSystem::from_bipartite(&graph, leverage)?;
    let alpha = point["alpha"];
    let impact = match config.option("impact") {
        "linear" => ImpactFunction::Linear { alpha },
        _ => ImpactFunction::LogLinear { alpha },
    };
    let shock = Shock::Asset {
        asset: rng.random_range(0..m),
        xi: point["xi"],
    };
    let out = match config.option("mode") {
        "target" => simulate_leverage_targeting(&system, impact, shock, point["gamma"])?,
        "buffered" => {
            system = system.with_leverage_cap(vec![leverage * (1.0 + point["buffer"]); n])?;
            simulate_buffered_deleveraging(&system, impact, shock)?
        }
        _ => simulate_threshold_firesale(&system, impact, shock)?,
    };
    let (pi, radius) = transfer_matrix(&system, alpha)?;
    // Mean number of banks toppled by one failure. Its ensemble mean is the
    // spectral radius of the ensemble-averaged transfer matrix, which is
    // (n - 1) times the common off-diagonal entry for exchangeable banks.
    let branching = pi.iter().flatten().sum::<f64>() / n as f64;
    Ok(vec![
        out.default_fraction,
        flag(out.default_fraction > GLOBAL_CASCADE_FRACTION),
        out.rounds as f64,
        radius,
        branching,
    ])
}
