//! Time-stepped orchestration of emission, transport, absorption and
//! infection.
//!
//! Each step `[t, t + dt)` runs in a fixed order:
//! 1. scheduled activations due before `t + dt`,
//! 2. collection of due events (sorted by time, then person order) and burst
//!    emission,
//! 3. a parallel transport/collision pass over airborne particles; particles
//!    born inside the step only travel from their birth time,
//! 4. sequential merge of terminal records sorted by `(time, particle_id)`,
//!    dose accumulation, then infection updates at `t + dt`.
//!
//! Everything random is drawn from keyed streams, so results do not depend on
//! the number of worker threads.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{InfectionEvent, InfectionState, Person};
use crate::airflow::{AirflowField, FieldPrimitive};
use crate::collision::{
    ground_collide, plane_crossing, sweep_collide, Absorber, CollisionRecord, SphereAbsorber,
};
use crate::emission::{
    breathing_events, emit_burst, next_arrival, speech_events, BurstKey, EventKind,
};
use crate::error::{Error, Result};
use crate::physics::{advance, AirProperties, ForceModel, Particle};
use crate::rng::{RandomStream, StreamPurpose};
use crate::scenario::{DomainBox, Scenario};
use crate::vec3::Vec3;

/// Downward crossing of the density plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneCrossing {
    pub particle_id: u64,
    pub emitter_id: u32,
    pub x: f64,
    pub y: f64,
    pub time: f64,
}

/// One emission event as it happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionEvent {
    pub time: f64,
    pub person: u32,
    pub event_id: u32,
    pub kind: EventKind,
    pub infectious: bool,
    /// Particles that survived thinning.
    pub particles: u64,
}

/// Particle bookkeeping at the end of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub emitted: u64,
    pub absorbed: u64,
    pub grounded: u64,
    pub exited: u64,
    pub airborne: u64,
}

impl Counters {
    /// `emitted == absorbed + grounded + exited + airborne`.
    pub fn is_conserved(&self) -> bool {
        self.emitted == self.absorbed + self.grounded + self.exited + self.airborne
    }
}

/// Particles released by one person, split by their infectious state at
/// release.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmitterCounts {
    pub person: u32,
    pub non_infectious: u64,
    pub infectious: u64,
}

/// Final state of one person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonOutcome {
    pub id: u32,
    pub name: String,
    pub state: InfectionState,
    pub dose: crate::agents::ApertureDoses,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub scenario: Scenario,
    /// Terminal records (apertures, ground, domain exits), ordered by
    /// `(time, particle_id)`.
    pub collisions: Vec<CollisionRecord>,
    pub crossings: Vec<PlaneCrossing>,
    pub infections: Vec<InfectionEvent>,
    pub emissions: Vec<EmissionEvent>,
    pub emitters: Vec<EmitterCounts>,
    pub counters: Counters,
    pub persons: Vec<PersonOutcome>,
}

impl SimulationReport {
    /// Aperture absorptions only.
    pub fn absorptions(&self) -> impl Iterator<Item = &CollisionRecord> {
        self.collisions
            .iter()
            .filter(|c| matches!(c.absorber, Absorber::Aperture(_)))
    }

    pub fn seed(&self) -> u64 {
        self.scenario.seed
    }
}

/// Run with the global rayon pool.
pub fn run_simulation(scenario: &Scenario) -> Result<SimulationReport> {
    scenario.validate()?;
    Simulation::new(scenario).run()
}

/// Run on a dedicated pool of `threads` workers.
pub fn run_simulation_with_threads(
    scenario: &Scenario,
    threads: usize,
) -> Result<SimulationReport> {
    scenario.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(|| Simulation::new(scenario).run())
}

struct PendingEvent {
    time: f64,
    kind: EventKind,
}

struct Actor {
    person: Person,
    /// Deterministic events (scripted, breathing, speech), ascending.
    queued: VecDeque<PendingEvent>,
    cough_rng: rand_chacha::ChaCha8Rng,
    next_cough: Option<f64>,
    next_event_id: u32,
    activation_pending: bool,
}

impl Actor {
    fn new(person: Person, seed: u64, horizon: f64) -> Actor {
        let delay = person.event_delay;
        let mut times: Vec<(f64, EventKind)> = person
            .scripted_events
            .iter()
            .map(|e| (e.time + delay, e.kind))
            .collect();
        if let Some(b) = &person.breathing {
            times.extend(
                breathing_events(b, horizon - delay)
                    .into_iter()
                    .map(|t| (t + delay, EventKind::Breath)),
            );
        }
        if let Some(s) = &person.speech {
            let stream = RandomStream::keyed(seed, StreamPurpose::Speech, person.id, 0, 0);
            times.extend(
                speech_events(s, horizon - delay, stream)
                    .into_iter()
                    .map(|t| (t + delay, EventKind::Speech)),
            );
        }
        times.retain(|(t, _)| *t >= 0.0 && *t < horizon);
        times.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let cough_rng = RandomStream::keyed(seed, StreamPurpose::Cough, person.id, 0, 0).rng();
        let activation_pending = person.scheduled_activation.is_some();
        let mut actor = Actor {
            queued: times
                .into_iter()
                .map(|(time, kind)| PendingEvent { time, kind })
                .collect(),
            cough_rng,
            next_cough: None,
            next_event_id: 0,
            activation_pending,
            person,
        };
        actor.restart_coughs(0.0);
        actor
    }

    fn cough_rate(&self) -> f64 {
        if self.person.infection.is_infectious() {
            self.person.cough.rate_infected
        } else {
            self.person.cough.rate_healthy
        }
    }

    /// Redraw the next cough from `from` at the current state's rate.
    fn restart_coughs(&mut self, from: f64) {
        let rate = self.cough_rate();
        self.next_cough =
            next_arrival(rate, &mut self.cough_rng).map(|gap| from + self.person.event_delay + gap);
    }

    fn on_became_infectious(&mut self, t: f64) {
        self.restart_coughs(t);
        if self.person.cough_on_activation {
            let time = t + self.person.event_delay;
            let at = self.queued.partition_point(|e| e.time <= time);
            self.queued.insert(
                at,
                PendingEvent {
                    time,
                    kind: EventKind::Cough,
                },
            );
        }
    }

    /// Pop events starting before `until` (and before the horizon).
    fn due_events(&mut self, until: f64, horizon: f64, out: &mut Vec<(f64, EventKind)>) {
        while let Some(e) = self.queued.front() {
            if e.time >= until {
                break;
            }
            let e = self.queued.pop_front().expect("front exists");
            out.push((e.time, e.kind));
        }
        while let Some(tc) = self.next_cough {
            if tc >= until || tc >= horizon {
                break;
            }
            out.push((tc, EventKind::Cough));
            let rate = self.cough_rate();
            self.next_cough = next_arrival(rate, &mut self.cough_rng).map(|gap| tc + gap);
        }
    }
}

/// Read-only state shared by the parallel transport pass.
struct StepContext<'a> {
    field: &'a AirflowField,
    air: &'a AirProperties,
    absorbers: &'a [SphereAbsorber],
    domain: &'a DomainBox,
    plane_height: f64,
}

struct StepOutcome {
    particle: Particle,
    terminal: Option<CollisionRecord>,
    crossing: Option<PlaneCrossing>,
}

/// Move one particle over `[start, start + dt)` and test its path.
fn advance_particle(p: &Particle, start: f64, dt: f64, ctx: &StepContext<'_>) -> StepOutcome {
    let u = ctx.field.sample(p.position, start);
    let next = advance(p, u, ctx.air, dt, ForceModel::ALL);
    let (x0, x1) = (p.position, next.position);

    let mut best: Option<(f64, Vec3, Absorber)> = None;
    for s in ctx.absorbers {
        if let Some(hit) = sweep_collide(x0, x1, s) {
            if best.is_none_or(|(f, _, _)| hit.fraction < f) {
                best = Some((hit.fraction, hit.point, Absorber::Aperture(s.owner)));
            }
        }
    }
    if let Some(hit) = ground_collide(x0, x1) {
        if best.is_none_or(|(f, _, _)| hit.fraction < f) {
            best = Some((hit.fraction, hit.point, Absorber::Ground));
        }
    }

    let crossing = plane_crossing(x0, x1, ctx.plane_height)
        .filter(|c| best.is_none_or(|(f, _, _)| c.fraction <= f))
        .map(|c| PlaneCrossing {
            particle_id: p.id,
            emitter_id: p.emitter_id,
            x: c.point.x,
            y: c.point.y,
            time: start + c.fraction * dt,
        });

    let record = |absorber, position: Vec3, fraction: f64| CollisionRecord {
        particle_id: p.id,
        emitter_id: p.emitter_id,
        event_id: p.event_id,
        absorber,
        position,
        speed: next.velocity.norm(),
        time: start + fraction * dt,
        viral_load: p.viral_load,
    };
    let terminal = match best {
        Some((fraction, point, absorber)) => Some(record(absorber, point, fraction)),
        None if !ctx.domain.contains(x1) => Some(record(Absorber::Exited, x1, 1.0)),
        None => None,
    };
    StepOutcome {
        particle: next,
        terminal,
        crossing,
    }
}

struct Simulation<'a> {
    scenario: &'a Scenario,
    actors: Vec<Actor>,
    field: AirflowField,
    airborne: Vec<Particle>,
    /// Emitted but not yet born, ordered by `(birth_time, id)`.
    unborn: VecDeque<Particle>,
    next_particle_id: u64,
    report: SimulationReport,
}

impl<'a> Simulation<'a> {
    fn new(scenario: &'a Scenario) -> Simulation<'a> {
        let actors = scenario
            .persons
            .iter()
            .map(|p| Actor::new(p.clone(), scenario.seed, scenario.horizon))
            .collect();
        let emitters = scenario
            .persons
            .iter()
            .map(|p| EmitterCounts {
                person: p.id,
                ..Default::default()
            })
            .collect();
        Simulation {
            scenario,
            actors,
            field: scenario.background.clone(),
            airborne: Vec::new(),
            unborn: VecDeque::new(),
            next_particle_id: 0,
            report: SimulationReport {
                scenario: scenario.clone(),
                collisions: Vec::new(),
                crossings: Vec::new(),
                infections: Vec::new(),
                emissions: Vec::new(),
                emitters,
                counters: Counters::default(),
                persons: Vec::new(),
            },
        }
    }

    fn step_count(&self) -> u64 {
        let (h, dt) = (self.scenario.horizon, self.scenario.dt);
        let n = (h / dt).ceil() as u64;
        if n > 1 && (n - 1) as f64 * dt >= h {
            n - 1
        } else {
            n.max(1)
        }
    }

    fn run(mut self) -> Result<SimulationReport> {
        let n = self.step_count();
        let (h, dt) = (self.scenario.horizon, self.scenario.dt);
        log::info!(
            "simulating {} persons for {h} s in {n} steps (dt = {dt} s)",
            self.actors.len()
        );
        for k in 0..n {
            let t = k as f64 * dt;
            let t_end = ((k + 1) as f64 * dt).min(h);
            self.step(t, t_end)?;
        }
        self.finish()
    }

    fn step(&mut self, t: f64, t_end: f64) -> Result<()> {
        self.apply_scheduled_activations(t_end);
        self.emit_due_events(t_end);
        self.field.retire_expired(t);

        // Airborne particles travel the whole step; newborns from birth.
        let mut work: Vec<(Particle, f64)> = self.airborne.drain(..).map(|p| (p, t)).collect();
        while self.unborn.front().is_some_and(|p| p.birth_time < t_end) {
            let p = self.unborn.pop_front().expect("front exists");
            self.report.counters.emitted += 1;
            let start = p.birth_time.max(t);
            work.push((p, start));
        }
        if work.is_empty() {
            self.update_infections(t_end);
            return Ok(());
        }

        let absorbers: Vec<SphereAbsorber> = self
            .actors
            .iter()
            .flat_map(|a| a.person.apertures_at(t))
            .collect();
        let ctx = StepContext {
            field: &self.field,
            air: &self.scenario.air,
            absorbers: &absorbers,
            domain: &self.scenario.domain,
            plane_height: self.scenario.density_plane_height,
        };
        let outcomes: Vec<StepOutcome> = work
            .par_iter()
            .with_min_len(256)
            .map(|(p, start)| advance_particle(p, *start, t_end - start, &ctx))
            .collect();

        let mut terminal = Vec::new();
        for o in outcomes {
            if let Some(c) = o.crossing {
                self.report.crossings.push(c);
            }
            match o.terminal {
                Some(rec) => terminal.push(rec),
                None => self.airborne.push(o.particle),
            }
        }
        terminal.sort_by(|a, b| {
            a.time
                .total_cmp(&b.time)
                .then(a.particle_id.cmp(&b.particle_id))
        });
        for rec in terminal {
            match rec.absorber {
                Absorber::Aperture(id) => {
                    self.report.counters.absorbed += 1;
                    let actor = self
                        .actors
                        .iter_mut()
                        .find(|a| a.person.id == id.person)
                        .ok_or_else(|| Error::Internal(format!("unknown person {}", id.person)))?;
                    actor.person.accumulate_dose(&rec)?;
                }
                Absorber::Ground => self.report.counters.grounded += 1,
                Absorber::Exited => self.report.counters.exited += 1,
            }
            self.report.collisions.push(rec);
        }
        self.update_infections(t_end);
        Ok(())
    }

    fn apply_scheduled_activations(&mut self, t_end: f64) {
        for actor in &mut self.actors {
            if !actor.activation_pending {
                continue;
            }
            let Some(t_act) = actor.person.scheduled_activation else {
                continue;
            };
            if t_act >= t_end {
                continue;
            }
            actor.activation_pending = false;
            if let Some(ev) = actor.person.scheduled_activation(t_act) {
                self.report.infections.push(ev);
                actor.on_became_infectious(t_act);
            }
        }
    }

    fn emit_due_events(&mut self, t_end: f64) {
        let horizon = self.scenario.horizon;
        let mut due: Vec<(f64, usize, EventKind)> = Vec::new();
        let mut buf = Vec::new();
        for (i, actor) in self.actors.iter_mut().enumerate() {
            buf.clear();
            actor.due_events(t_end, horizon, &mut buf);
            due.extend(buf.iter().map(|&(time, kind)| (time, i, kind)));
        }
        if due.is_empty() {
            return;
        }
        due.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut fresh = Vec::new();
        for (time, i, kind) in due {
            let actor = &mut self.actors[i];
            let person = &actor.person;
            let event_id = actor.next_event_id;
            actor.next_event_id += 1;
            let profile = person.profiles.get(kind);
            let origin = person.mouth_at(time);
            let infectious = person.infection.is_infectious();
            if let Some(jet) = &profile.jet {
                self.field.push(FieldPrimitive::CylinderJet(jet.instantiate(
                    origin,
                    person.facing,
                    time,
                )));
            }
            let key = BurstKey {
                seed: self.scenario.seed,
                person: person.id,
                event: event_id,
            };
            let particles = emit_burst(
                profile,
                kind,
                origin,
                person.facing,
                time,
                infectious,
                key,
                &mut self.next_particle_id,
            );
            let counts = &mut self.report.emitters[i];
            if infectious {
                counts.infectious += particles.len() as u64;
            } else {
                counts.non_infectious += particles.len() as u64;
            }
            self.report.emissions.push(EmissionEvent {
                time,
                person: person.id,
                event_id,
                kind,
                infectious,
                particles: particles.len() as u64,
            });
            fresh.extend(particles);
        }
        // Bursts may overlap in time; keep the queue in birth order.
        fresh.retain(|p| p.birth_time < horizon);
        self.unborn.extend(fresh);
        self.unborn
            .make_contiguous()
            .sort_by(|a, b| a.birth_time.total_cmp(&b.birth_time).then(a.id.cmp(&b.id)));
    }

    fn update_infections(&mut self, t: f64) {
        for actor in &mut self.actors {
            let was_infectious = actor.person.infection.is_infectious();
            let events = actor.person.update_infection(t);
            if !events.is_empty() {
                self.report.infections.extend(events);
                if !was_infectious && actor.person.infection.is_infectious() {
                    actor.on_became_infectious(t);
                }
            }
        }
    }

    fn finish(mut self) -> Result<SimulationReport> {
        // Particles released after the horizon were never born.
        self.report.counters.airborne = self.airborne.len() as u64;
        self.report.persons = self
            .actors
            .iter()
            .map(|a| PersonOutcome {
                id: a.person.id,
                name: a.person.name.clone(),
                state: a.person.infection,
                dose: a.person.dose,
            })
            .collect();
        if !self.report.counters.is_conserved() {
            return Err(Error::Internal(format!(
                "particle count not conserved: {:?}",
                self.report.counters
            )));
        }
        Ok(self.report)
    }
}
