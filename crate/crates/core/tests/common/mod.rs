#![allow(dead_code)]

//! Test-only helpers: a literal re-implementation of the controller sweep
//! that works directly on demand vectors and recomputes the aggregate from
//! scratch at every check, plus the reference experiment settings.

use v2g_ca_core::{ActionKind, ControlConfig, ControlMode};

pub const REF_N: usize = 5000;
pub const REF_DENSITY: f64 = 0.167;
pub const REF_T: usize = 100;
pub const REF_FRACTION: f64 = 0.35;
pub const REF_DIP: (usize, usize) = (20, 80);
pub const REF_SEEDS: std::ops::Range<u64> = 1..21;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleState {
    /// `d[n][k-1]` for particle `n+1`.
    pub d: Vec<Vec<i8>>,
    pub bids: Vec<f64>,
    pub discharges: Vec<u32>,
}

#[derive(Debug, PartialEq)]
pub struct OracleStep {
    pub actions: Vec<(usize, usize, ActionKind)>,
    pub calls: usize,
}

fn load(d: &[Vec<i8>], k: usize) -> i64 {
    d.iter().map(|row| i64::from(row[k - 1])).sum()
}

/// One sweep at 1-based `k`.
pub fn oracle_step(state: &mut OracleState, goal: f64, k: usize, cfg: &ControlConfig) -> OracleStep {
    let n = state.d.len();
    let mut order: Vec<usize> = (0..n).collect();
    if cfg.mode == ControlMode::Price {
        order.sort_by(|&a, &b| {
            state.bids[a]
                .partial_cmp(&state.bids[b])
                .unwrap()
                .then(a.cmp(&b))
        });
    }
    let mut actions = Vec::new();
    let mut calls = 0;
    for i in order {
        if (load(&state.d, k) as f64) > goal {
            calls += 1;
            let row = &mut state.d[i];
            if row[k - 1] == 1 && row[k] == 0 {
                row[k - 1] = 0;
                row[k] = 1;
                actions.push((i + 1, k, ActionKind::Shift));
            } else if cfg.v2g_enabled
                && row[k - 1] == 0
                && row[k] == 0
                && (!cfg.require_prior_charge || row[..k].contains(&1))
                && cfg
                    .max_discharges_per_particle
                    .is_none_or(|cap| state.discharges[i] < cap)
            {
                row[k - 1] = -1;
                row[k] = 1;
                state.discharges[i] += 1;
                actions.push((i + 1, k, ActionKind::Discharge));
            }
        } else {
            break;
        }
    }
    OracleStep { actions, calls }
}

/// Full run: sweeps `k = 1..T-1`.
pub fn oracle_run(state: &mut OracleState, goals: &[f64], cfg: &ControlConfig) -> Vec<OracleStep> {
    let t = state.d[0].len();
    (1..t).map(|k| oracle_step(state, goals[k - 1], k, cfg)).collect()
}
