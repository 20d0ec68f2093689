//! The cellular-automaton sweep.
//!
//! At every period the controller walks the population in a fixed order and,
//! while the aggregate load exceeds the target, asks each visited particle to
//! shift its charge one period later or (with V2G) to discharge now and
//! recharge next period.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::SimResult;
use crate::population::{ActionEvent, ActionKind, Population};
use crate::targets::TargetProfile;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    /// Visit particles by ascending id.
    Direct,
    /// Visit particles in merit order (ascending bid) and report clearing prices.
    #[default]
    Price,
}

impl std::str::FromStr for ControlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Self::Direct),
            "price" => Ok(Self::Price),
            other => Err(Error::Config(format!("unknown control mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    pub mode: ControlMode,
    pub v2g_enabled: bool,
    #[serde(default)]
    pub require_prior_charge: bool,
    #[serde(default)]
    pub max_discharges_per_particle: Option<u32>,
    pub seed: u64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            mode: ControlMode::Price,
            v2g_enabled: false,
            require_prior_charge: false,
            max_discharges_per_particle: None,
            seed: 0,
        }
    }
}

impl ControlConfig {
    pub fn with_v2g(&self, enabled: bool) -> Self {
        Self {
            v2g_enabled: enabled,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub k: usize,
    pub actions: Vec<ActionEvent>,
    /// Particles examined during the sweep, eligible or not.
    pub calls: usize,
    /// Bid of the last particle whose action was applied (price mode only).
    pub clearing_price: Option<f64>,
    /// Bid of the first particle left unvisited when the sweep stopped early
    /// (price mode only).
    pub next_bid: Option<f64>,
    pub final_load: i64,
}

impl StepReport {
    pub fn shifts(&self) -> usize {
        self.actions
            .iter()
            .filter(|a| a.kind == ActionKind::Shift)
            .count()
    }

    pub fn discharges(&self) -> usize {
        self.actions.len() - self.shifts()
    }
}

/// Order in which particles are visited under `mode`.
pub fn visit_order(pop: &Population, mode: ControlMode) -> Vec<usize> {
    match mode {
        ControlMode::Direct => (1..=pop.len()).collect(),
        ControlMode::Price => pop.merit_order(),
    }
}

/// One sweep at period `k` (1-based, `k < T`).
pub fn step(
    pop: &mut Population,
    target: &TargetProfile,
    k: usize,
    cfg: &ControlConfig,
) -> Result<StepReport> {
    check_horizons(pop, target)?;
    let order = visit_order(pop, cfg.mode);
    step_in_order(pop, target, k, cfg, &order)
}

fn step_in_order(
    pop: &mut Population,
    target: &TargetProfile,
    k: usize,
    cfg: &ControlConfig,
    order: &[usize],
) -> Result<StepReport> {
    let horizon = pop.horizon();
    if k == 0 || k >= horizon {
        return Err(Error::TimeOutOfRange {
            k,
            max: horizon - 1,
        });
    }
    let goal = target.at(k);
    let mut actions = Vec::new();
    let mut calls = 0;
    let mut last_bid = None;
    let mut next_bid = None;

    for &id in order {
        if pop.aggregate()[k - 1] as f64 <= goal {
            next_bid = Some(pop.particles()[id - 1].bid());
            break;
        }
        calls += 1;
        let particle = &pop.particles()[id - 1];
        let event = if particle.can_shift(k) {
            Some(pop.apply_shift(id, k)?)
        } else if cfg.v2g_enabled
            && particle.can_discharge(k, cfg.require_prior_charge)
            && cfg
                .max_discharges_per_particle
                .is_none_or(|cap| particle.discharges() < cap)
        {
            Some(pop.apply_discharge(id, k, cfg.require_prior_charge)?)
        } else {
            None
        };
        if let Some(e) = event {
            last_bid = Some(pop.particles()[id - 1].bid());
            actions.push(e);
        }
    }

    let priced = cfg.mode == ControlMode::Price;
    Ok(StepReport {
        k,
        actions,
        calls,
        clearing_price: last_bid.filter(|_| priced),
        next_bid: next_bid.filter(|_| priced),
        final_load: pop.aggregate()[k - 1],
    })
}

/// Runs the sweep for `k = 1..T−1` on a copy of `pop`; period `T` is recorded
/// with no actions.
pub fn run(pop: &Population, target: &TargetProfile, cfg: &ControlConfig) -> Result<SimResult> {
    check_horizons(pop, target)?;
    let horizon = pop.horizon();
    let order = visit_order(pop, cfg.mode);
    let mut state = pop.clone();
    let mut reports = Vec::with_capacity(horizon);
    for k in 1..horizon {
        reports.push(step_in_order(&mut state, target, k, cfg, &order)?);
    }
    reports.push(StepReport {
        k: horizon,
        actions: Vec::new(),
        calls: 0,
        clearing_price: None,
        next_bid: None,
        final_load: state.aggregate()[horizon - 1],
    });
    Ok(SimResult::assemble(
        pop.clone(),
        state,
        reports,
        cfg.clone(),
        target.clone(),
    ))
}

/// The same population run without and with V2G, in that order.
pub fn compare_modes(
    pop: &Population,
    target: &TargetProfile,
    cfg: &ControlConfig,
) -> Result<(SimResult, SimResult)> {
    let v1g = run(pop, target, &cfg.with_v2g(false))?;
    let v2g = run(pop, target, &cfg.with_v2g(true))?;
    Ok((v1g, v2g))
}

fn check_horizons(pop: &Population, target: &TargetProfile) -> Result<()> {
    if pop.horizon() != target.horizon() {
        return Err(Error::HorizonMismatch {
            population: pop.horizon(),
            target: target.horizon(),
        });
    }
    Ok(())
}
