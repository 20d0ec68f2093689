//! Analysis of completed runs: action lattices, (responses, calls)
//! trajectories, hysteresis loop area and summary statistics.

use serde::{Deserialize, Serialize};

use crate::controller::{ControlConfig, StepReport};
use crate::population::{ActionEvent, ActionKind, Population};
use crate::targets::TargetProfile;

/// Everything a run produced. Series are indexed by `k − 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub p_series: Vec<i64>,
    pub p_initial_series: Vec<i64>,
    pub v_series: Vec<usize>,
    pub w_series: Vec<usize>,
    pub calls_series: Vec<usize>,
    pub clearing_series: Vec<Option<f64>>,
    pub next_bid_series: Vec<Option<f64>>,
    pub events: Vec<ActionEvent>,
    pub initial_population: Population,
    pub final_population: Population,
    pub config: ControlConfig,
    pub target: TargetProfile,
}

impl SimResult {
    pub(crate) fn assemble(
        initial_population: Population,
        final_population: Population,
        reports: Vec<StepReport>,
        config: ControlConfig,
        target: TargetProfile,
    ) -> Self {
        let mut v_series = Vec::with_capacity(reports.len());
        let mut w_series = Vec::with_capacity(reports.len());
        let mut calls_series = Vec::with_capacity(reports.len());
        let mut clearing_series = Vec::with_capacity(reports.len());
        let mut next_bid_series = Vec::with_capacity(reports.len());
        let mut events = Vec::new();
        for r in reports {
            v_series.push(r.shifts());
            w_series.push(r.discharges());
            calls_series.push(r.calls);
            clearing_series.push(r.clearing_price);
            next_bid_series.push(r.next_bid);
            events.extend(r.actions);
        }
        Self {
            p_series: final_population.aggregate().to_vec(),
            p_initial_series: initial_population.aggregate().to_vec(),
            v_series,
            w_series,
            calls_series,
            clearing_series,
            next_bid_series,
            events,
            initial_population,
            final_population,
            config,
            target,
        }
    }

    pub fn horizon(&self) -> usize {
        self.p_series.len()
    }

    /// `v(k) + w(k)` for every period.
    pub fn responses(&self) -> Vec<usize> {
        self.v_series
            .iter()
            .zip(&self.w_series)
            .map(|(v, w)| v + w)
            .collect()
    }

    /// Checks the structural invariants tying the series to the event log
    /// and the two population snapshots. Returns a description of the first
    /// violation found.
    pub fn check_consistency(&self) -> Result<(), String> {
        let t = self.horizon();
        let lens = [
            self.p_initial_series.len(),
            self.v_series.len(),
            self.w_series.len(),
            self.calls_series.len(),
            self.clearing_series.len(),
            self.next_bid_series.len(),
            self.target.horizon(),
            self.initial_population.horizon(),
            self.final_population.horizon(),
        ];
        if lens.iter().any(|&l| l != t) {
            return Err(format!("series lengths {lens:?} differ from horizon {t}"));
        }
        if self.p_series != self.final_population.aggregate() {
            return Err("p series does not match final population".into());
        }
        if self.p_initial_series != self.initial_population.aggregate() {
            return Err("initial p series does not match initial population".into());
        }
        let mut v = vec![0usize; t];
        let mut w = vec![0usize; t];
        for e in &self.events {
            if e.time == 0 || e.time > t {
                return Err(format!("event at out-of-range period {}", e.time));
            }
            match e.kind {
                ActionKind::Shift => v[e.time - 1] += 1,
                ActionKind::Discharge => w[e.time - 1] += 1,
            }
        }
        if v != self.v_series || w != self.w_series {
            return Err("action counts disagree with the event log".into());
        }
        if self.p_series.iter().sum::<i64>() != self.p_initial_series.iter().sum::<i64>() {
            return Err("total load not conserved".into());
        }
        let mut replayed = self.initial_population.clone();
        replayed
            .replay(&self.events)
            .map_err(|e| format!("event log does not replay: {e}"))?;
        if replayed.recompute_aggregate() != self.p_series {
            return Err("replayed event log does not reproduce p".into());
        }
        Ok(())
    }
}

/// N×T action grid with rows in merit order (cheapest bid first).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    pub kind: ActionKind,
    /// Particle id occupying each row.
    pub row_ids: Vec<usize>,
    pub horizon: usize,
    cells: Vec<bool>,
}

impl Lattice {
    pub fn empty(kind: ActionKind, row_ids: Vec<usize>, horizon: usize) -> Self {
        let cells = vec![false; row_ids.len() * horizon];
        Self {
            kind,
            row_ids,
            horizon,
            cells,
        }
    }

    pub fn rows(&self) -> usize {
        self.row_ids.len()
    }

    /// Cell at 0-based `row` and 1-based period `k`.
    pub fn get(&self, row: usize, k: usize) -> bool {
        self.cells[row * self.horizon + (k - 1)]
    }

    pub fn set(&mut self, row: usize, k: usize, value: bool) {
        self.cells[row * self.horizon + (k - 1)] = value;
    }

    pub fn column_sums(&self) -> Vec<usize> {
        (1..=self.horizon)
            .map(|k| (0..self.rows()).filter(|&r| self.get(r, k)).count())
            .collect()
    }

    /// Rows with an active cell in period `k`, ascending.
    pub fn active_rows(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.rows()).filter(move |&r| self.get(r, k))
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

pub fn action_lattice(result: &SimResult, kind: ActionKind) -> Lattice {
    let row_ids = result.initial_population.merit_order();
    let mut row_of = vec![0usize; row_ids.len() + 1];
    for (row, &id) in row_ids.iter().enumerate() {
        row_of[id] = row;
    }
    let mut lattice = Lattice::empty(kind, row_ids, result.horizon());
    for e in result.events.iter().filter(|e| e.kind == kind) {
        lattice.set(row_of[e.particle_id], e.time, true);
    }
    lattice
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub responses: usize,
    pub calls: usize,
}

/// One `(v(k) + w(k), calls(k))` point per period, in time order.
pub fn trajectory(result: &SimResult) -> Vec<TrajectoryPoint> {
    result
        .responses()
        .into_iter()
        .zip(&result.calls_series)
        .map(|(responses, &calls)| TrajectoryPoint { responses, calls })
        .collect()
}

pub fn trajectory_xy(points: &[TrajectoryPoint]) -> Vec<(f64, f64)> {
    points
        .iter()
        .map(|p| (p.responses as f64, p.calls as f64))
        .collect()
}

/// Absolute shoelace area of the polygon through `points`, closed last→first.
/// Fewer than three points enclose nothing.
pub fn loop_area(points: &[(f64, f64)]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    // Centring on the first vertex keeps the cross products small.
    let (x0, y0) = points[0];
    let twice: f64 = points
        .iter()
        .zip(points.iter().cycle().skip(1))
        .map(|(&(xa, ya), &(xb, yb))| (xa - x0) * (yb - y0) - (xb - x0) * (ya - y0))
        .sum();
    twice.abs() / 2.0
}

/// Width of the frontier band for a column whose deepest shift sits in row
/// `front` (0-based): the top decile of rows `0..=front`, at least one row.
fn frontier_band(front: usize) -> usize {
    (front + 1).div_ceil(10)
}

/// Whether a discharge in `row` lies on the shift wave front `front`.
fn on_front(row: usize, front: usize) -> bool {
    let band = frontier_band(front);
    row + band > front && row < front + 1 + band
}

/// Fraction of discharge cells sitting on the shift wave front.
///
/// The front of column `k` is the deepest (highest-bid) row with a shift at
/// `k`. A discharge at `(row, k)` is on the front when `row` is within the
/// band of `ceil((front + 1) / 10)` rows on either side of that front row.
/// Columns without any shift have no front. Returns 0 without discharges.
pub fn wavefront_concentration(shift: &Lattice, discharge: &Lattice) -> f64 {
    assert_eq!(shift.rows(), discharge.rows(), "lattice row counts differ");
    assert_eq!(shift.horizon, discharge.horizon, "lattice horizons differ");
    let fronts = shift_fronts(shift);
    let mut total = 0usize;
    let mut hits = 0usize;
    for k in 1..=discharge.horizon {
        for row in discharge.active_rows(k) {
            total += 1;
            if fronts[k - 1].is_some_and(|f| on_front(row, f)) {
                hits += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Deepest shift row per column.
pub fn shift_fronts(shift: &Lattice) -> Vec<Option<usize>> {
    (1..=shift.horizon)
        .map(|k| shift.active_rows(k).last())
        .collect()
}

/// The concentration obtained when every discharge keeps its column but its
/// row is drawn uniformly from all rows; one value per resample.
pub fn wavefront_baseline(
    shift: &Lattice,
    discharge: &Lattice,
    resamples: usize,
    seed: u64,
) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let fronts = shift_fronts(shift);
    let per_column: Vec<usize> = discharge.column_sums();
    let total: usize = per_column.iter().sum();
    let rows = discharge.rows();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..resamples)
        .map(|_| {
            if total == 0 {
                return 0.0;
            }
            let mut hits = 0usize;
            for (col, &count) in per_column.iter().enumerate() {
                for _ in 0..count {
                    let row = rng.random_range(0..rows);
                    if fronts[col].is_some_and(|f| on_front(row, f)) {
                        hits += 1;
                    }
                }
            }
            hits as f64 / total as f64
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total_shifts: usize,
    pub total_discharges: usize,
    /// `Σw / Σv`; 0 when both are 0, infinite when only shifts are 0.
    pub discharge_ratio: f64,
    pub max_calls: usize,
    pub peak_responses: usize,
    /// `Σ_k max(0, p(k) − p*(k))`.
    pub tracking_error: f64,
    pub loop_area: f64,
}

pub fn summarize(result: &SimResult) -> Summary {
    let total_shifts: usize = result.v_series.iter().sum();
    let total_discharges: usize = result.w_series.iter().sum();
    let discharge_ratio = match (total_shifts, total_discharges) {
        (0, 0) => 0.0,
        (v, w) => w as f64 / v as f64,
    };
    let tracking_error = result
        .p_series
        .iter()
        .zip(result.target.values())
        .map(|(&p, &goal)| (p as f64 - goal).max(0.0))
        .sum();
    Summary {
        total_shifts,
        total_discharges,
        discharge_ratio,
        max_calls: result.calls_series.iter().copied().max().unwrap_or(0),
        peak_responses: result.responses().into_iter().max().unwrap_or(0),
        tracking_error,
        loop_area: loop_area(&trajectory_xy(&trajectory(result))),
    }
}

/// Calls needed when responses first reach `level` while ramping down,
/// linearly interpolated between the two periods that bracket the crossing.
/// `None` if responses never reach `level`.
pub fn calls_at_response_level(result: &SimResult, level: f64) -> Option<f64> {
    let points = trajectory(result);
    let mut prev = TrajectoryPoint {
        responses: 0,
        calls: 0,
    };
    for p in points {
        let r = p.responses as f64;
        if r >= level {
            let r0 = prev.responses as f64;
            let (c0, c1) = (prev.calls as f64, p.calls as f64);
            if r <= r0 {
                return Some(c1);
            }
            let frac = ((level - r0) / (r - r0)).clamp(0.0, 1.0);
            return Some(c0 + frac * (c1 - c0));
        }
        prev = p;
    }
    None
}

/// Side-by-side figures for a V1G-only run and a V2G run of one population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub v1g: Summary,
    pub v2g: Summary,
    /// Half of the smaller of the two peak response counts.
    pub response_level: f64,
    pub v1g_calls_at_level: Option<f64>,
    pub v2g_calls_at_level: Option<f64>,
    pub wavefront_concentration: f64,
    /// 95th percentile of the uniform-row baseline for the concentration.
    pub wavefront_baseline_p95: f64,
}

pub const BASELINE_RESAMPLES: usize = 1000;

pub fn compare_results(v1g: &SimResult, v2g: &SimResult) -> Comparison {
    let (s1, s2) = (summarize(v1g), summarize(v2g));
    let response_level = 0.5 * s1.peak_responses.min(s2.peak_responses) as f64;
    let shift = action_lattice(v2g, ActionKind::Shift);
    let discharge = action_lattice(v2g, ActionKind::Discharge);
    let mut baseline = wavefront_baseline(&shift, &discharge, BASELINE_RESAMPLES, v2g.config.seed);
    baseline.sort_by(f64::total_cmp);
    let p95 = baseline[(baseline.len() * 95).div_ceil(100) - 1];
    Comparison {
        v1g_calls_at_level: calls_at_response_level(v1g, response_level),
        v2g_calls_at_level: calls_at_response_level(v2g, response_level),
        v1g: s1,
        v2g: s2,
        response_level,
        wavefront_concentration: wavefront_concentration(&shift, &discharge),
        wavefront_baseline_p95: p95,
    }
}
