//! Event-driven chase-escape engine shared by the moving and the static
//! models.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::contact::{ContactStore, Interval};
use crate::error::{Error, Result};
use crate::points::{DeviceId, Role};

use super::distribution::TimerTable;
use super::trace::{EpidemicTrace, Event, Transition};

/// Earliest window `[s, s + rho)` inside one of `intervals` with
/// `s >= onset`. Returns `(s, s + rho)`.
pub(crate) fn first_window(intervals: &[Interval], onset: f64, rho: f64) -> Option<(f64, f64)> {
    for iv in intervals {
        if iv.end <= onset {
            continue;
        }
        let s = iv.start.max(onset);
        let t = s + rho;
        let fits = if s == iv.start {
            t < iv.end
        } else {
            t <= iv.end
        };
        if fits {
            return Some((s, t));
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    t: f64,
    transition: Transition,
    source: DeviceId,
    target: DeviceId,
    window_start: f64,
}

impl Candidate {
    fn class(&self) -> u8 {
        match self.transition {
            Transition::Infected => 0,
            Transition::Patched => 1,
        }
    }
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t
            .total_cmp(&other.t)
            .then(self.class().cmp(&other.class()))
            .then(self.source.cmp(&other.source))
            .then(self.target.cmp(&other.target))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Susceptible,
    Infected,
    Patched,
    Knight,
}

struct Engine<'a> {
    contacts: &'a ContactStore,
    timers: &'a TimerTable,
    neighbours: Vec<Vec<DeviceId>>,
    state: Vec<State>,
    infected_at: Vec<Option<f64>>,
    patched_at: Vec<Option<f64>>,
    queue: BinaryHeap<Reverse<Candidate>>,
}

impl Engine<'_> {
    fn knight_onset(&self, k: DeviceId) -> Option<f64> {
        match self.state[k as usize] {
            State::Knight => Some(0.0),
            State::Patched => self.patched_at[k as usize],
            _ => None,
        }
    }

    fn schedule_infection(&mut self, source: DeviceId, target: DeviceId, onset: f64) -> Result<()> {
        let rho = self.timers.infection(source, target)?;
        if let Some((s, t)) = first_window(self.contacts.get(source, target)?, onset, rho) {
            self.queue.push(Reverse(Candidate {
                t,
                transition: Transition::Infected,
                source,
                target,
                window_start: s,
            }));
        }
        Ok(())
    }

    fn schedule_patch(&mut self, source: DeviceId, target: DeviceId, onset: f64) -> Result<()> {
        let rho = self.timers.patch(source, target)?;
        if let Some((s, t)) = first_window(self.contacts.get(source, target)?, onset, rho) {
            self.queue.push(Reverse(Candidate {
                t,
                transition: Transition::Patched,
                source,
                target,
                window_start: s,
            }));
        }
        Ok(())
    }

    fn on_infected(&mut self, i: DeviceId, t: f64) -> Result<()> {
        self.state[i as usize] = State::Infected;
        self.infected_at[i as usize] = Some(t);
        let neighbours = self.neighbours[i as usize].clone();
        for k in neighbours {
            match self.state[k as usize] {
                State::Susceptible => self.schedule_infection(i, k, t)?,
                State::Knight | State::Patched => {
                    let onset = self.knight_onset(k).expect("knight").max(t);
                    self.schedule_patch(k, i, onset)?;
                }
                State::Infected => {}
            }
        }
        Ok(())
    }

    fn on_patched(&mut self, i: DeviceId, t: f64) -> Result<()> {
        self.state[i as usize] = State::Patched;
        self.patched_at[i as usize] = Some(t);
        let neighbours = self.neighbours[i as usize].clone();
        for m in neighbours {
            if self.state[m as usize] == State::Infected {
                let onset = self.infected_at[m as usize].expect("infected").max(t);
                self.schedule_patch(i, m, onset)?;
            }
        }
        Ok(())
    }

    fn is_valid(&self, c: &Candidate) -> bool {
        match c.transition {
            Transition::Infected => {
                self.state[c.target as usize] == State::Susceptible
                    && self.patched_at[c.source as usize].is_none_or(|p| c.t <= p)
            }
            Transition::Patched => self.state[c.target as usize] == State::Infected,
        }
    }
}

/// Run chase-escape from `root` (infected at time zero) over the given
/// contacts and pair timers, up to `horizon` or until nothing can change.
/// At equal times infections are processed before patches, and within a
/// class by `(source, target)`.
pub fn run(
    roles: &[Role],
    root: DeviceId,
    contacts: &ContactStore,
    timers: &TimerTable,
    horizon: Option<f64>,
) -> Result<EpidemicTrace> {
    let n = roles.len();
    if contacts.len() != n {
        return Err(Error::invalid(
            "contacts",
            format!("cover {} devices, expected {n}", contacts.len()),
        ));
    }
    match roles.get(root as usize) {
        None => return Err(Error::UnknownDevice(root)),
        Some(Role::Knight) => return Err(Error::invalid("root", "the root must be susceptible")),
        Some(Role::Susceptible) => {}
    }
    if let Some(h) = horizon {
        if !(h >= 0.0) {
            return Err(Error::invalid(
                "horizon",
                format!("must be non-negative, got {h}"),
            ));
        }
    }
    let limit = horizon.unwrap_or(f64::INFINITY);
    let mut engine = Engine {
        contacts,
        timers,
        neighbours: contacts.neighbours(),
        state: roles
            .iter()
            .map(|r| match r {
                Role::Susceptible => State::Susceptible,
                Role::Knight => State::Knight,
            })
            .collect(),
        infected_at: vec![None; n],
        patched_at: vec![None; n],
        queue: BinaryHeap::new(),
    };
    engine.on_infected(root, 0.0)?;
    let mut events = Vec::new();
    while let Some(Reverse(c)) = engine.queue.pop() {
        if c.t > limit {
            break;
        }
        if !engine.is_valid(&c) {
            continue;
        }
        events.push(Event {
            t: c.t,
            device: c.target,
            transition: c.transition,
            cause: c.source,
            window_start: c.window_start,
        });
        match c.transition {
            Transition::Infected => engine.on_infected(c.target, c.t)?,
            Transition::Patched => engine.on_patched(c.target, c.t)?,
        }
    }
    Ok(EpidemicTrace {
        root,
        initial_roles: roles.to_vec(),
        events,
        horizon,
        infected_at: engine.infected_at,
        patched_at: engine.patched_at,
    })
}
