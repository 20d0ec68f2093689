//! Load particles, their charging schedules and the aggregate load they produce.
//!
//! Particle ids and time indices are 1-based throughout the public API:
//! particles are `1..=N`, periods are `1..=T`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-period output of a particle: `-1` discharge, `0` idle, `1` charge.
pub type Demand = i8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    Shift,
    Discharge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize, ActionKind)", into = "(usize, usize, ActionKind)")]
pub struct ActionEvent {
    pub particle_id: usize,
    pub time: usize,
    pub kind: ActionKind,
}

impl From<(usize, usize, ActionKind)> for ActionEvent {
    fn from((particle_id, time, kind): (usize, usize, ActionKind)) -> Self {
        Self {
            particle_id,
            time,
            kind,
        }
    }
}

impl From<ActionEvent> for (usize, usize, ActionKind) {
    fn from(e: ActionEvent) -> Self {
        (e.particle_id, e.time, e.kind)
    }
}

/// One vehicle: its demand vector over the horizon and its fixed bid price.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParticleRecord", into = "ParticleRecord")]
pub struct ParticleSchedule {
    id: usize,
    demand: Vec<Demand>,
    bid: f64,
    discharges: u32,
    // 0-based slot of the earliest +1 in `demand`.
    first_charge: Option<usize>,
}

impl ParticleSchedule {
    pub fn new(id: usize, demand: Vec<Demand>, bid: f64) -> Result<Self> {
        if id == 0 {
            return Err(Error::InvalidSchedule("particle ids start at 1".into()));
        }
        if let Some(bad) = demand.iter().find(|d| !(-1..=1).contains(*d)) {
            return Err(Error::InvalidSchedule(format!(
                "particle {id}: demand value {bad} not in {{-1, 0, 1}}"
            )));
        }
        if !(0.0..1.0).contains(&bid) {
            return Err(Error::InvalidSchedule(format!(
                "particle {id}: bid {bid} not in [0, 1)"
            )));
        }
        let first_charge = demand.iter().position(|&d| d == 1);
        Ok(Self {
            id,
            demand,
            bid,
            discharges: 0,
            first_charge,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn demand(&self) -> &[Demand] {
        &self.demand
    }

    pub fn bid(&self) -> f64 {
        self.bid
    }

    /// Number of discharges applied to this particle so far.
    pub fn discharges(&self) -> u32 {
        self.discharges
    }

    /// Demand at 1-based period `k`. Panics when `k` is out of range.
    pub fn at(&self, k: usize) -> Demand {
        self.demand[k - 1]
    }

    /// True iff the schedule holds a charge at some period `k' <= k`.
    pub fn has_charged_by(&self, k: usize) -> bool {
        self.first_charge.is_some_and(|slot| slot < k)
    }

    /// `has_charged_by` evaluated at every period.
    pub fn charged_by_series(&self) -> Vec<bool> {
        (1..=self.demand.len()).map(|k| self.has_charged_by(k)).collect()
    }

    pub fn total_demand(&self) -> i64 {
        self.demand.iter().map(|&d| i64::from(d)).sum()
    }

    pub fn can_shift(&self, k: usize) -> bool {
        k < self.demand.len() && self.at(k) == 1 && self.at(k + 1) == 0
    }

    pub fn can_discharge(&self, k: usize, require_prior_charge: bool) -> bool {
        k < self.demand.len()
            && self.at(k) == 0
            && self.at(k + 1) == 0
            && (!require_prior_charge || self.has_charged_by(k))
    }
}

#[derive(Serialize, Deserialize)]
struct ParticleRecord {
    id: usize,
    bid: f64,
    #[serde(default)]
    discharges: u32,
    /// One character per period: `1` charge, `0` idle, `-` discharge.
    demand: String,
}

impl TryFrom<ParticleRecord> for ParticleSchedule {
    type Error = Error;

    fn try_from(rec: ParticleRecord) -> Result<Self> {
        let demand = rec
            .demand
            .chars()
            .map(|c| match c {
                '1' => Ok(1),
                '0' => Ok(0),
                '-' => Ok(-1),
                other => Err(Error::InvalidSchedule(format!(
                    "particle {}: unexpected demand symbol {other:?}",
                    rec.id
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut p = ParticleSchedule::new(rec.id, demand, rec.bid)?;
        p.discharges = rec.discharges;
        Ok(p)
    }
}

impl From<ParticleSchedule> for ParticleRecord {
    fn from(p: ParticleSchedule) -> Self {
        let demand = p
            .demand
            .iter()
            .map(|d| match d {
                1 => '1',
                0 => '0',
                _ => '-',
            })
            .collect();
        Self {
            id: p.id,
            bid: p.bid,
            discharges: p.discharges,
            demand,
        }
    }
}

/// A population of particles plus the cached aggregate load `p(k) = Σ_n d_n(k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PopulationRecord", into = "PopulationRecord")]
pub struct Population {
    horizon: usize,
    particles: Vec<ParticleSchedule>,
    aggregate: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct PopulationRecord {
    horizon: usize,
    particles: Vec<ParticleSchedule>,
}

impl TryFrom<PopulationRecord> for Population {
    type Error = Error;

    fn try_from(rec: PopulationRecord) -> Result<Self> {
        let pop = Population::from_particles(rec.particles)?;
        if pop.horizon != rec.horizon {
            return Err(Error::InvalidSchedule(format!(
                "declared horizon {} but schedules have length {}",
                rec.horizon, pop.horizon
            )));
        }
        Ok(pop)
    }
}

impl From<Population> for PopulationRecord {
    fn from(p: Population) -> Self {
        Self {
            horizon: p.horizon,
            particles: p.particles,
        }
    }
}

impl Population {
    /// Random population: every slot charges independently with probability
    /// `density`; bids are uniform on `[0, 1)`. Same inputs, same output.
    pub fn generate(n_particles: usize, density: f64, horizon: usize, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&density) {
            return Err(Error::InvalidDensity(density));
        }
        if horizon < 2 {
            return Err(Error::HorizonTooShort {
                min: 2,
                got: horizon,
            });
        }
        if n_particles == 0 {
            return Err(Error::EmptyPopulation);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let particles = (1..=n_particles)
            .map(|id| {
                let demand: Vec<Demand> = (0..horizon)
                    .map(|_| Demand::from(rng.random_bool(density)))
                    .collect();
                let bid: f64 = rng.random();
                ParticleSchedule::new(id, demand, bid)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_particles(particles)
    }

    /// Builds a population from explicit schedules; ids are assigned `1..=N`
    /// in the given order.
    pub fn from_schedules(schedules: Vec<Vec<Demand>>, bids: Vec<f64>) -> Result<Self> {
        if schedules.len() != bids.len() {
            return Err(Error::InvalidSchedule(format!(
                "{} schedules but {} bids",
                schedules.len(),
                bids.len()
            )));
        }
        let particles = schedules
            .into_iter()
            .zip(bids)
            .enumerate()
            .map(|(i, (d, b))| ParticleSchedule::new(i + 1, d, b))
            .collect::<Result<Vec<_>>>()?;
        Self::from_particles(particles)
    }

    fn from_particles(particles: Vec<ParticleSchedule>) -> Result<Self> {
        let first = particles.first().ok_or(Error::EmptyPopulation)?;
        let horizon = first.demand.len();
        if horizon < 2 {
            return Err(Error::HorizonTooShort {
                min: 2,
                got: horizon,
            });
        }
        for (i, p) in particles.iter().enumerate() {
            if p.id != i + 1 {
                return Err(Error::InvalidSchedule(format!(
                    "particle at position {} has id {}",
                    i + 1,
                    p.id
                )));
            }
            if p.demand.len() != horizon {
                return Err(Error::InvalidSchedule(format!(
                    "particle {} has {} periods, expected {horizon}",
                    p.id,
                    p.demand.len()
                )));
            }
        }
        let mut pop = Self {
            horizon,
            particles,
            aggregate: Vec::new(),
        };
        pop.aggregate = pop.recompute_aggregate();
        Ok(pop)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn particles(&self) -> &[ParticleSchedule] {
        &self.particles
    }

    pub fn particle(&self, id: usize) -> Result<&ParticleSchedule> {
        self.check_id(id)?;
        Ok(&self.particles[id - 1])
    }

    /// Cached aggregate load, one entry per period.
    pub fn aggregate(&self) -> &[i64] {
        &self.aggregate
    }

    pub fn aggregate_load(&self, k: usize) -> Result<i64> {
        self.check_time(k, self.horizon)?;
        Ok(self.aggregate[k - 1])
    }

    /// Full recomputation of `Σ_n d_n(k)` for every `k`, bypassing the cache.
    pub fn recompute_aggregate(&self) -> Vec<i64> {
        let mut agg = vec![0i64; self.horizon];
        for p in &self.particles {
            for (a, &d) in agg.iter_mut().zip(&p.demand) {
                *a += i64::from(d);
            }
        }
        agg
    }

    /// Particle ids sorted by ascending bid, ties broken by ascending id.
    pub fn merit_order(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (1..=self.len()).collect();
        ids.sort_by(|&a, &b| {
            self.particles[a - 1]
                .bid
                .total_cmp(&self.particles[b - 1].bid)
                .then(a.cmp(&b))
        });
        ids
    }

    /// Moves particle `id`'s charge at `k` to `k + 1`.
    pub fn apply_shift(&mut self, id: usize, k: usize) -> Result<ActionEvent> {
        self.check_id(id)?;
        self.check_time(k, self.horizon - 1)?;
        let p = &mut self.particles[id - 1];
        if p.at(k) != 1 {
            return Err(not_eligible(id, k, ActionKind::Shift, "no charge scheduled at k"));
        }
        if p.at(k + 1) != 0 {
            return Err(not_eligible(id, k, ActionKind::Shift, "slot k+1 is occupied"));
        }
        p.demand[k - 1] = 0;
        p.demand[k] = 1;
        // The +1 that was at k was the earliest one; it is now at k + 1.
        if p.first_charge == Some(k - 1) {
            p.first_charge = Some(k);
        }
        self.aggregate[k - 1] -= 1;
        self.aggregate[k] += 1;
        Ok(ActionEvent {
            particle_id: id,
            time: k,
            kind: ActionKind::Shift,
        })
    }

    /// Discharges particle `id` at `k` and schedules the recharge at `k + 1`.
    pub fn apply_discharge(
        &mut self,
        id: usize,
        k: usize,
        require_prior_charge: bool,
    ) -> Result<ActionEvent> {
        self.check_id(id)?;
        self.check_time(k, self.horizon - 1)?;
        let p = &mut self.particles[id - 1];
        if p.at(k) != 0 || p.at(k + 1) != 0 {
            return Err(not_eligible(
                id,
                k,
                ActionKind::Discharge,
                "slots k and k+1 must both be idle",
            ));
        }
        if require_prior_charge && !p.has_charged_by(k) {
            return Err(not_eligible(
                id,
                k,
                ActionKind::Discharge,
                "no prior charge",
            ));
        }
        p.demand[k - 1] = -1;
        p.demand[k] = 1;
        p.discharges += 1;
        p.first_charge = Some(p.first_charge.map_or(k, |s| s.min(k)));
        self.aggregate[k - 1] -= 1;
        self.aggregate[k] += 1;
        Ok(ActionEvent {
            particle_id: id,
            time: k,
            kind: ActionKind::Discharge,
        })
    }

    /// Applies an event log in order. Discharges are replayed without the
    /// prior-charge gate since the log already records admitted actions.
    pub fn replay(&mut self, events: &[ActionEvent]) -> Result<()> {
        for e in events {
            match e.kind {
                ActionKind::Shift => self.apply_shift(e.particle_id, e.time)?,
                ActionKind::Discharge => self.apply_discharge(e.particle_id, e.time, false)?,
            };
        }
        Ok(())
    }

    fn check_id(&self, id: usize) -> Result<()> {
        if id == 0 || id > self.len() {
            return Err(Error::UnknownParticle {
                id,
                max: self.len(),
            });
        }
        Ok(())
    }

    fn check_time(&self, k: usize, max: usize) -> Result<()> {
        if k == 0 || k > max {
            return Err(Error::TimeOutOfRange { k, max });
        }
        Ok(())
    }
}

fn not_eligible(id: usize, k: usize, kind: ActionKind, reason: &'static str) -> Error {
    Error::NotEligible {
        id,
        k,
        kind,
        reason,
    }
}
