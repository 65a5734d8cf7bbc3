//! Exact event-driven simulation of the continuous-time Markov process.
//!
//! Events are drawn by aggregate Gillespie sampling with total rate
//! `n + beta * (#I + #Q) + tau * #I`: every individual carries a unit-rate
//! activation clock (quarantined activations are drawn and discarded so the
//! activation mass stays constant at `n`), recoveries fire at rate `beta`
//! per infected individual, and tests at rate `tau` per infectious
//! individual. Superposing the per-individual clocks into one aggregate
//! clock and attributing each tick uniformly is an exact equivalent.
//!
//! An activation by `j` selects a partner from `j`'s own subpopulation with
//! probability `theta`, otherwise from the whole candidate set; candidates
//! are everyone but `j`, or `j`'s backbone neighbors when the backbone is
//! not complete. Contact forms unless an infectious endpoint refrains
//! (probability `sigma` of its group, independently per endpoint) or an
//! endpoint is quarantined. An S–I contact transmits with probability
//! `lambda` (vaccinated susceptibles: `lambda * (1 - gamma_t)`), and a
//! transmission turns severe with probability `p_q` (vaccinated:
//! `p_q * (1 - gamma_q)`).

use rand::distr::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use thiserror::Error;

use crate::netgen::Backbone;
use crate::params::{Group, ModelParams, PopulationSplit};
use crate::trajectory::Trajectory;

/// Health state of one individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Health {
    Susceptible = 0,
    Infectious = 1,
    Quarantined = 2,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("initial infected count {requested} exceeds population size {n}")]
    CountExceedsPopulation { requested: usize, n: usize },
    #[error("closed-form per-individual rates require the complete (unconstrained) backbone")]
    BackbonePresent,
    #[error("total event rate is zero; no further transitions are possible")]
    DeadState,
}

/// Per-individual health states plus the six per-(group, state) counters.
#[derive(Debug, Clone)]
pub struct Population {
    split: PopulationSplit,
    health: Vec<Health>,
    counts: [[usize; 3]; 2],
}

impl Population {
    /// Everyone susceptible.
    pub fn susceptible(split: PopulationSplit) -> Population {
        let mut counts = [[0; 3]; 2];
        for g in Group::BOTH {
            counts[g.index()][Health::Susceptible as usize] = split.size(g);
        }
        Population {
            split,
            health: vec![Health::Susceptible; split.total()],
            counts,
        }
    }

    /// Builds a population from an explicit health array, tallying counters.
    pub fn from_health(split: PopulationSplit, health: Vec<Health>) -> Population {
        assert_eq!(health.len(), split.total());
        let mut counts = [[0; 3]; 2];
        for (j, &h) in health.iter().enumerate() {
            counts[split.group_of(j).index()][h as usize] += 1;
        }
        Population {
            split,
            health,
            counts,
        }
    }

    pub fn split(&self) -> PopulationSplit {
        self.split
    }

    pub fn n(&self) -> usize {
        self.health.len()
    }

    pub fn health(&self, j: usize) -> Health {
        self.health[j]
    }

    pub fn set_health(&mut self, j: usize, new: Health) {
        let g = self.split.group_of(j).index();
        let old = std::mem::replace(&mut self.health[j], new);
        self.counts[g][old as usize] -= 1;
        self.counts[g][new as usize] += 1;
    }

    pub fn count(&self, group: Group, health: Health) -> usize {
        self.counts[group.index()][health as usize]
    }

    pub fn total(&self, health: Health) -> usize {
        self.counts[0][health as usize] + self.counts[1][health as usize]
    }

    /// Infectious plus quarantined individuals.
    pub fn total_infected(&self) -> usize {
        self.total(Health::Infectious) + self.total(Health::Quarantined)
    }

    /// Compartment fractions in trajectory column order
    /// `[S_n, I_n, Q_n, S_v, I_v, Q_v]`.
    pub fn fractions(&self) -> [f64; 6] {
        let n = self.health.len() as f64;
        let c = |g: Group, h: Health| self.counts[g.index()][h as usize] as f64 / n;
        [
            c(Group::NonVaccinated, Health::Susceptible),
            c(Group::NonVaccinated, Health::Infectious),
            c(Group::NonVaccinated, Health::Quarantined),
            c(Group::Vaccinated, Health::Susceptible),
            c(Group::Vaccinated, Health::Infectious),
            c(Group::Vaccinated, Health::Quarantined),
        ]
    }

    /// Recomputes counters from the health array and compares.
    pub fn verify_counts(&self) -> bool {
        let recount = Population::from_health(self.split, self.health.clone());
        recount.counts == self.counts
    }
}

/// Swap-remove index set supporting O(1) insert, remove, and uniform draw.
#[derive(Debug, Clone)]
struct IndexList {
    items: Vec<u32>,
    pos: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl IndexList {
    fn new(capacity: usize) -> IndexList {
        IndexList {
            items: Vec::new(),
            pos: vec![ABSENT; capacity],
        }
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn insert(&mut self, j: usize) {
        debug_assert_eq!(self.pos[j], ABSENT);
        self.pos[j] = self.items.len() as u32;
        self.items.push(j as u32);
    }

    fn remove(&mut self, j: usize) {
        let p = self.pos[j];
        debug_assert_ne!(p, ABSENT);
        let last = *self.items.last().expect("non-empty");
        self.items.swap_remove(p as usize);
        if last != j as u32 {
            self.pos[last as usize] = p;
        }
        self.pos[j] = ABSENT;
    }

    fn get(&self, idx: usize) -> usize {
        self.items[idx] as usize
    }
}

/// What a single event did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Activation {
        actor: usize,
        outcome: ActivationOutcome,
    },
    Recovery {
        who: usize,
    },
    Testing {
        who: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationOutcome {
    /// Quarantined individuals never interact.
    QuarantinedActor,
    /// The (possibly group-filtered) candidate set was empty.
    NoEligiblePartner,
    /// Partner selected but no contact: the partner is quarantined or an
    /// infectious endpoint refrained.
    Blocked { partner: usize },
    /// Contact without a susceptible/infectious pairing; no state change.
    Contact { partner: usize },
    /// S–I contact whose infection roll failed.
    ContactNoTransmission { partner: usize },
    /// The susceptible endpoint got infected.
    Transmission {
        partner: usize,
        infected: usize,
        severe: bool,
    },
}

/// Simulation state: population, clock, and deterministic generator.
#[derive(Debug, Clone)]
pub struct EngineState<'a> {
    params: &'a ModelParams,
    backbone: &'a Backbone,
    population: Population,
    infectious: IndexList,
    quarantined: IndexList,
    clock: f64,
    rng: ChaCha8Rng,
    eradicated_at: Option<f64>,
}

impl<'a> EngineState<'a> {
    /// Draws `initial_infected` individuals uniformly at random and makes a
    /// `severe_fraction` share of them quarantined (the rest infectious).
    pub fn init(
        params: &'a ModelParams,
        backbone: &'a Backbone,
        initial_infected: usize,
        severe_fraction: f64,
        seed: u64,
    ) -> Result<EngineState<'a>, EngineError> {
        assert_eq!(backbone.n(), params.n, "backbone size must match n");
        assert!((0.0..=1.0).contains(&severe_fraction));
        if initial_infected > params.n {
            return Err(EngineError::CountExceedsPopulation {
                requested: initial_infected,
                n: params.n,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut population = Population::susceptible(params.split());
        let severe = (severe_fraction * initial_infected as f64).round() as usize;
        let chosen = rand::seq::index::sample(&mut rng, params.n, initial_infected);
        for (k, j) in chosen.into_iter().enumerate() {
            population.set_health(
                j,
                if k < severe {
                    Health::Quarantined
                } else {
                    Health::Infectious
                },
            );
        }
        Ok(Self::with_rng(params, backbone, population, rng))
    }

    /// Starts from a frozen population snapshot.
    pub fn from_population(
        params: &'a ModelParams,
        backbone: &'a Backbone,
        population: Population,
        seed: u64,
    ) -> EngineState<'a> {
        assert_eq!(backbone.n(), params.n, "backbone size must match n");
        assert_eq!(population.n(), params.n);
        Self::with_rng(params, backbone, population, ChaCha8Rng::seed_from_u64(seed))
    }

    fn with_rng(
        params: &'a ModelParams,
        backbone: &'a Backbone,
        population: Population,
        rng: ChaCha8Rng,
    ) -> EngineState<'a> {
        let n = population.n();
        let mut infectious = IndexList::new(n);
        let mut quarantined = IndexList::new(n);
        for j in 0..n {
            match population.health(j) {
                Health::Infectious => infectious.insert(j),
                Health::Quarantined => quarantined.insert(j),
                Health::Susceptible => {}
            }
        }
        let eradicated_at = (population.total_infected() == 0).then_some(0.0);
        EngineState {
            params,
            backbone,
            population,
            infectious,
            quarantined,
            clock: 0.0,
            rng,
            eradicated_at,
        }
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Time at which infectious + quarantined first hit zero, if reached.
    pub fn eradicated_at(&self) -> Option<f64> {
        self.eradicated_at
    }

    fn sigma(&self, g: Group) -> f64 {
        match g {
            Group::Vaccinated => self.params.sigma_v,
            Group::NonVaccinated => self.params.sigma_n,
        }
    }

    /// Advances the clock by an exponential holding time, executes exactly
    /// one event, and returns what happened.
    pub fn step(&mut self) -> Result<EventRecord, EngineError> {
        let i_count = self.infectious.len();
        let q_count = self.quarantined.len();
        let activation_mass = self.params.n as f64;
        let recovery_mass = self.params.beta * (i_count + q_count) as f64;
        let testing_mass = self.params.tau * i_count as f64;
        let total = activation_mass + recovery_mass + testing_mass;
        if !(total > 0.0) {
            return Err(EngineError::DeadState);
        }
        let dt = Exp::new(total).expect("positive rate").sample(&mut self.rng);
        self.clock += dt;

        let u = self.rng.random::<f64>() * total;
        let kind = if u < activation_mass {
            self.activation()
        } else if u < activation_mass + recovery_mass {
            let r = self.rng.random_range(0..i_count + q_count);
            let who = if r < i_count {
                self.infectious.get(r)
            } else {
                self.quarantined.get(r - i_count)
            };
            self.transition(who, Health::Susceptible);
            EventKind::Recovery { who }
        } else {
            let who = self.infectious.get(self.rng.random_range(0..i_count));
            self.transition(who, Health::Quarantined);
            EventKind::Testing { who }
        };
        if self.population.total_infected() == 0 && self.eradicated_at.is_none() {
            self.eradicated_at = Some(self.clock);
        }
        Ok(EventRecord {
            t: self.clock,
            kind,
        })
    }

    fn activation(&mut self) -> EventKind {
        let split = self.population.split();
        let actor = self.rng.random_range(0..self.params.n);
        let outcome = 'sel: {
            if self.population.health(actor) == Health::Quarantined {
                break 'sel ActivationOutcome::QuarantinedActor;
            }
            let same_group = self.rng.random::<f64>() < self.params.theta;
            let filter = same_group.then(|| split.group_of(actor));
            let Some(partner) = self
                .backbone
                .sample_partner(actor, filter, &split, &mut self.rng)
            else {
                break 'sel ActivationOutcome::NoEligiblePartner;
            };
            if self.population.health(partner) == Health::Quarantined {
                break 'sel ActivationOutcome::Blocked { partner };
            }
            for endpoint in [actor, partner] {
                if self.population.health(endpoint) == Health::Infectious {
                    let refrains =
                        self.rng.random::<f64>() < self.sigma(split.group_of(endpoint));
                    if refrains {
                        break 'sel ActivationOutcome::Blocked { partner };
                    }
                }
            }
            // Contact formed; only an S-I pairing can change state.
            let pair = (
                self.population.health(actor),
                self.population.health(partner),
            );
            let susceptible = match pair {
                (Health::Susceptible, Health::Infectious) => actor,
                (Health::Infectious, Health::Susceptible) => partner,
                _ => break 'sel ActivationOutcome::Contact { partner },
            };
            let vaccinated = split.group_of(susceptible) == Group::Vaccinated;
            let p_infect = self.params.lambda
                * if vaccinated {
                    1.0 - self.params.gamma_t
                } else {
                    1.0
                };
            if self.rng.random::<f64>() >= p_infect {
                break 'sel ActivationOutcome::ContactNoTransmission { partner };
            }
            let p_severe = self.params.p_q
                * if vaccinated {
                    1.0 - self.params.gamma_q
                } else {
                    1.0
                };
            let severe = self.rng.random::<f64>() < p_severe;
            self.transition(
                susceptible,
                if severe {
                    Health::Quarantined
                } else {
                    Health::Infectious
                },
            );
            ActivationOutcome::Transmission {
                partner,
                infected: susceptible,
                severe,
            }
        };
        EventKind::Activation { actor, outcome }
    }

    fn transition(&mut self, j: usize, new: Health) {
        let old = self.population.health(j);
        if old == new {
            return;
        }
        match old {
            Health::Infectious => self.infectious.remove(j),
            Health::Quarantined => self.quarantined.remove(j),
            Health::Susceptible => {}
        }
        match new {
            Health::Infectious => self.infectious.insert(j),
            Health::Quarantined => self.quarantined.insert(j),
            Health::Susceptible => {}
        }
        self.population.set_health(j, new);
    }

    /// Runs until the clock reaches `horizon` or the infection is
    /// eradicated, sampling right-continuous state values on the grid
    /// `0, dt, 2 dt, ..., horizon`. After eradication the all-susceptible
    /// state is absorbing, so the remaining grid is filled with it.
    pub fn run(&mut self, horizon: f64, sample_interval: f64) -> Result<Trajectory, EngineError> {
        assert!(horizon > 0.0 && sample_interval > 0.0);
        assert_eq!(self.clock, 0.0, "run expects a freshly initialized state");
        let grid = sample_grid(horizon, sample_interval);
        let mut traj = Trajectory::new();
        let mut next = 0usize;
        loop {
            if self.population.total_infected() == 0 {
                let frac = self.population.fractions();
                while next < grid.len() {
                    traj.push(grid[next], frac);
                    next += 1;
                }
                break;
            }
            let pre = self.population.fractions();
            let rec = self.step()?;
            while next < grid.len() && grid[next] < rec.t {
                traj.push(grid[next], pre);
                next += 1;
            }
            if rec.t >= horizon {
                // Only an exactly-on-horizon event leaves grid points here.
                let post = self.population.fractions();
                while next < grid.len() {
                    traj.push(grid[next], post);
                    next += 1;
                }
                break;
            }
        }
        traj.eradicated_at = self.eradicated_at.filter(|&t| t <= horizon);
        Ok(traj)
    }
}

fn sample_grid(horizon: f64, interval: f64) -> Vec<f64> {
    let steps = (horizon / interval + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|k| k as f64 * interval).collect();
    let last = *grid.last().expect("non-empty grid");
    if last < horizon - 1e-9 * horizon.max(1.0) {
        grid.push(horizon);
    } else {
        *grid.last_mut().expect("non-empty grid") = last.min(horizon);
    }
    grid
}

/// Closed-form contagion rates of one individual given a frozen snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContagionRates {
    pub group: Group,
    /// Rate of the S -> I transition.
    pub kappa: f64,
    /// Rate of the S -> Q transition.
    pub nu: f64,
}

/// Evaluates the per-individual contagion rates exactly for the
/// unconstrained (complete-mixing) model. Used as the oracle when
/// statistically verifying `step`.
pub fn empirical_rates(
    params: &ModelParams,
    backbone: &Backbone,
    population: &Population,
    j: usize,
) -> Result<ContagionRates, EngineError> {
    if !backbone.is_complete() {
        return Err(EngineError::BackbonePresent);
    }
    let split = population.split();
    let group = split.group_of(j);
    let n = params.n as f64;
    let i_n = population.count(Group::NonVaccinated, Health::Infectious) as f64;
    let i_v = population.count(Group::Vaccinated, Health::Infectious) as f64;
    // Same-group selection weight theta/(n_alpha - 1) plus the uniform
    // weight (1 - theta)/(n - 1); cross-group gets only the uniform part.
    let within = |size: usize| {
        let mut w = (1.0 - params.theta) / (n - 1.0);
        if params.theta > 0.0 {
            w += params.theta / (size as f64 - 1.0);
        }
        w
    };
    let cross = (1.0 - params.theta) / (n - 1.0);
    let (bracket, infect_scale, severe_prob) = match group {
        Group::NonVaccinated => (
            (1.0 - params.sigma_n) * within(split.n_n) * i_n + (1.0 - params.sigma_v) * cross * i_v,
            params.lambda,
            params.p_q,
        ),
        Group::Vaccinated => (
            (1.0 - params.sigma_n) * cross * i_n
                + (1.0 - params.sigma_v) * within(split.n_v) * i_v,
            params.lambda * (1.0 - params.gamma_t),
            params.p_q * (1.0 - params.gamma_q),
        ),
    };
    Ok(ContagionRates {
        group,
        kappa: 2.0 * infect_scale * (1.0 - severe_prob) * bracket,
        nu: 2.0 * infect_scale * severe_prob * bracket,
    })
}

/// The 3x3 transition-rate matrix of one individual for a frozen snapshot,
/// rows and columns ordered S, I, Q.
pub fn transition_rate_matrix(
    params: &ModelParams,
    backbone: &Backbone,
    population: &Population,
    j: usize,
) -> Result<[[f64; 3]; 3], EngineError> {
    let rates = empirical_rates(params, backbone, population, j)?;
    let (beta, tau) = (params.beta, params.tau);
    Ok([
        [-rates.kappa - rates.nu, rates.kappa, rates.nu],
        [beta, -beta - tau, tau],
        [beta, 0.0, -beta],
    ])
}
